//! Relevance of data records to a weighted query.
//!
//! A record is projected onto the query's variables: for each term and each
//! variable, the membership of the record's value to the region the term
//! asks for. The term score `S_k` is the mean of those memberships weighted
//! by node importance, and the record's relevance is `max_k min(S_k, U_k)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::cpnet::{node_importance, ImportanceMap};
use crate::error::{Error, Result};
use crate::kb::{Dataset, KnowledgeBase};
use crate::query::{resolve_bindings, WeightedQuery};

#[derive(Debug, Clone, PartialEq)]
pub struct DataProjection {
    pub record_index: usize,
    /// `entries[k][i]`: membership for term `k`, variable `i`.
    pub entries: Vec<Vec<f64>>,
    /// Variables whose attribute value the record lacks; they score 0.
    pub missing: Vec<String>,
}

/// Resolved bindings of a query against a knowledge base and a table layout,
/// reusable across records.
pub struct Projector<'a> {
    kb: &'a KnowledgeBase,
    query: &'a WeightedQuery,
    clusters: Vec<Vec<usize>>,
    columns: Vec<Option<usize>>,
}

impl<'a> Projector<'a> {
    pub fn new(kb: &'a KnowledgeBase, query: &'a WeightedQuery, attributes: &[String]) -> Result<Self> {
        let clusters = resolve_bindings(query.net(), &query.bindings, kb)?;
        let columns = query
            .bindings
            .iter()
            .map(|b| attributes.iter().position(|a| *a == b.attribute))
            .collect();
        Ok(Projector {
            kb,
            query,
            clusters,
            columns,
        })
    }

    pub fn project(&self, record_index: usize, record: &[Option<f64>]) -> Result<DataProjection> {
        let mut missing = Vec::new();
        let memberships = self
            .query
            .bindings
            .iter()
            .zip(&self.columns)
            .map(
                |(binding, column)| match column.and_then(|c| record.get(c).copied().flatten()) {
                    Some(value) => {
                        let model = self
                            .kb
                            .model(&binding.attribute)
                            .ok_or_else(|| Error::Binding(format!("unknown attribute `{}`", binding.attribute)))?;
                        Ok(Some(model.memberships(value)))
                    }
                    None => {
                        missing.push(binding.variable.clone());
                        Ok(None)
                    }
                },
            )
            .collect::<Result<Vec<_>>>()?;

        let entries = self
            .query
            .terms
            .iter()
            .map(|term| {
                term.assignment
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| memberships[i].as_ref().map_or(0.0, |u| u[self.clusters[i][v]]))
                    .collect()
            })
            .collect();
        Ok(DataProjection {
            record_index,
            entries,
            missing,
        })
    }
}

/// Projects one record laid out as `attributes`.
pub fn project(
    kb: &KnowledgeBase,
    query: &WeightedQuery,
    attributes: &[String],
    record_index: usize,
    record: &[Option<f64>],
) -> Result<DataProjection> {
    Projector::new(kb, query, attributes)?.project(record_index, record)
}

/// Importance-weighted mean of one term's memberships.
pub fn aggregate_term_score(entries: &[f64], importance: &[u32]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::DegenerateQuery("term has no variables".into()));
    }
    if entries.len() != importance.len() {
        return Err(Error::DegenerateQuery(format!(
            "{} memberships for {} importance weights",
            entries.len(),
            importance.len()
        )));
    }
    let weight: f64 = importance.iter().map(|&g| f64::from(g)).sum();
    if weight <= 0.0 {
        return Err(Error::DegenerateQuery("importance weights sum to zero".into()));
    }
    let weighted: f64 = entries.iter().zip(importance).map(|(u, &g)| u * f64::from(g)).sum();
    Ok(weighted / weight)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `S_k` per term.
    pub term_scores: Vec<f64>,
    /// `min(S_k, U_k)` per term.
    pub term_evals: Vec<f64>,
    pub eval: f64,
}

pub fn evaluate(projection: &DataProjection, query: &WeightedQuery, importance: &ImportanceMap) -> Result<Evaluation> {
    if query.terms.is_empty() {
        return Err(Error::DegenerateQuery("query has no terms".into()));
    }
    if projection.entries.len() != query.terms.len() {
        return Err(Error::DegenerateQuery(
            "projection does not match the query's terms".into(),
        ));
    }
    let term_scores = projection
        .entries
        .iter()
        .map(|e| aggregate_term_score(e, importance.values()))
        .collect::<Result<Vec<_>>>()?;
    let importances: Vec<f64> = query.terms.iter().map(|t| t.importance).collect();
    Ok(combine(term_scores, &importances))
}

/// `max_k min(S_k, U_k)`.
pub fn combine(term_scores: Vec<f64>, importances: &[f64]) -> Evaluation {
    let term_evals: Vec<f64> = term_scores.iter().zip(importances).map(|(s, u)| s.min(*u)).collect();
    let eval = term_evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Evaluation {
        term_scores,
        term_evals,
        eval,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub rank: usize,
    pub record_index: usize,
    pub eval: f64,
    pub term_scores: Vec<f64>,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordFailure {
    pub record_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub results: Vec<RankedResult>,
    pub failures: Vec<RecordFailure>,
}

/// Scores every record, sorts by relevance (ties keep input order) and keeps
/// the first `top_n`. Records that cannot be scored are listed as failures.
pub fn rank(kb: &KnowledgeBase, query: &WeightedQuery, dataset: &Dataset, top_n: Option<usize>) -> Result<Ranking> {
    let importance = node_importance(query.net())?;
    if query.terms.is_empty() {
        return Err(Error::DegenerateQuery("query has no terms".into()));
    }
    let projector = Projector::new(kb, query, dataset.attributes());

    let scored: Vec<std::result::Result<RankedResult, RecordFailure>> = dataset
        .records()
        .par_iter()
        .enumerate()
        .map(|(index, record)| {
            let outcome = projector.as_ref().map_err(|e| e.to_string()).and_then(|p| {
                let projection = p.project(index, record).map_err(|e| e.to_string())?;
                let evaluation = evaluate(&projection, query, &importance).map_err(|e| e.to_string())?;
                Ok(RankedResult {
                    rank: 0,
                    record_index: index,
                    eval: evaluation.eval,
                    term_scores: evaluation.term_scores,
                    missing: projection.missing,
                })
            });
            outcome.map_err(|error| RecordFailure {
                record_index: index,
                error,
            })
        })
        .collect();

    let mut results = Vec::with_capacity(scored.len());
    let mut failures = Vec::new();
    for s in scored {
        match s {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    // stable, so equal scores keep ascending record order
    results.sort_by(|a, b| b.eval.total_cmp(&a.eval));
    if let Some(n) = top_n {
        results.truncate(n);
    }
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(Ranking { results, failures })
}
