//! Fuzzy knowledge base: every numeric attribute of a dataset segmented into
//! labelled fuzzy regions, with the membership degree of each record to each
//! region.

mod dataset;
mod fcm;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

pub use dataset::{ingest_tabular, Dataset, IngestOptions, Row};
pub use fcm::{fcm_objective, fuzzy_c_means, membership_vector, FcmFit, FcmParams};

/// Tolerance on membership row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub attribute: String,
    /// Strictly ascending.
    pub centroids: Vec<f64>,
    /// `labels[j]` names the region around `centroids[j]`.
    pub labels: Vec<String>,
    pub fuzzifier: f64,
}

impl ClusterModel {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn memberships(&self, value: f64) -> Vec<f64> {
        membership_vector(value, &self.centroids, self.fuzzifier)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pub attribute: String,
    /// `record_count × cluster_count`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub default_clusters: usize,
    pub clusters: BTreeMap<String, usize>,
    pub fuzzifier: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Per-attribute overrides are keyed by attribute name.
#[derive(Debug, Clone, PartialEq)]
pub struct KbConfig {
    pub default_clusters: usize,
    pub default_labels: Option<Vec<String>>,
    pub clusters: BTreeMap<String, usize>,
    pub labels: BTreeMap<String, Vec<String>>,
    pub fuzzifier: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub source: Option<String>,
}

impl Default for KbConfig {
    fn default() -> Self {
        let fcm = FcmParams::default();
        KbConfig {
            default_clusters: 3,
            default_labels: None,
            clusters: BTreeMap::new(),
            labels: BTreeMap::new(),
            fuzzifier: fcm.fuzzifier,
            seed: fcm.seed,
            tol: fcm.tol,
            max_iter: fcm.max_iter,
            source: None,
        }
    }
}

/// Linguistic labels used when the configuration names none.
pub fn default_labels(count: usize) -> Vec<String> {
    let fixed: &[&str] = match count {
        2 => &["low", "high"],
        3 => &["low", "medium", "high"],
        5 => &["very_low", "low", "medium", "high", "very_high"],
        _ => &[],
    };
    if fixed.is_empty() {
        (0..count).map(|j| format!("c{j}")).collect()
    } else {
        fixed.iter().map(|s| s.to_string()).collect()
    }
}

/// Fit diagnostics for one attribute; not part of the persisted document.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub attribute: String,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entries: Vec<(ClusterModel, MembershipMatrix)>,
    provenance: Provenance,
}

impl KnowledgeBase {
    pub fn entries(&self) -> &[(ClusterModel, MembershipMatrix)] {
        &self.entries
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn model(&self, attribute: &str) -> Option<&ClusterModel> {
        self.entries.iter().map(|(m, _)| m).find(|m| m.attribute == attribute)
    }

    pub fn matrix(&self, attribute: &str) -> Option<&MembershipMatrix> {
        self.entries.iter().map(|(_, u)| u).find(|u| u.attribute == attribute)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = KbDocument {
            format_version: FORMAT_VERSION,
            attributes: self
                .entries
                .iter()
                .map(|(model, matrix)| AttributeDocument {
                    name: model.attribute.clone(),
                    labels: model.labels.clone(),
                    centroids: model.centroids.clone(),
                    fuzzifier: model.fuzzifier,
                    memberships: matrix.values.clone(),
                })
                .collect(),
            provenance: self.provenance.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses and checks a persisted knowledge base.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: KbDocument = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let mut names = HashSet::new();
        let mut entries = Vec::with_capacity(doc.attributes.len());
        for attr in doc.attributes {
            if !names.insert(attr.name.clone()) {
                return Err(Error::Document(format!("attribute {:?} listed twice", attr.name)));
            }
            let model = ClusterModel {
                attribute: attr.name.clone(),
                centroids: attr.centroids,
                labels: attr.labels,
                fuzzifier: attr.fuzzifier,
            };
            check_model(&model).map_err(Error::Document)?;
            let matrix = MembershipMatrix {
                attribute: attr.name,
                values: attr.memberships,
            };
            check_matrix(&matrix, model.centroids.len()).map_err(Error::Document)?;
            entries.push((model, matrix));
        }
        Ok(KnowledgeBase {
            entries,
            provenance: doc.provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct KbDocument {
    format_version: u32,
    attributes: Vec<AttributeDocument>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct AttributeDocument {
    name: String,
    labels: Vec<String>,
    centroids: Vec<f64>,
    fuzzifier: f64,
    memberships: Vec<Vec<f64>>,
}

fn check_model(model: &ClusterModel) -> std::result::Result<(), String> {
    let name = &model.attribute;
    if model.centroids.len() != model.labels.len() {
        return Err(format!(
            "{name}: {} labels for {} centroids",
            model.labels.len(),
            model.centroids.len()
        ));
    }
    if model.centroids.iter().any(|c| !c.is_finite()) || model.centroids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{name}: centroids must be finite and strictly ascending"));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = model.labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(format!("{name}: duplicate label {dup:?}"));
    }
    if !(model.fuzzifier > 1.0 && model.fuzzifier.is_finite()) {
        return Err(format!("{name}: fuzzifier must be > 1"));
    }
    Ok(())
}

fn check_matrix(matrix: &MembershipMatrix, clusters: usize) -> std::result::Result<(), String> {
    for (i, row) in matrix.values.iter().enumerate() {
        if row.len() != clusters {
            return Err(format!(
                "{}: membership row {i} has {} entries",
                matrix.attribute,
                row.len()
            ));
        }
        if row.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(format!("{}: membership row {i} leaves [0,1]", matrix.attribute));
        }
        if (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(format!("{}: membership row {i} does not sum to 1", matrix.attribute));
        }
    }
    Ok(())
}

pub fn build_knowledge_base(dataset: &Dataset, config: &KbConfig) -> Result<KnowledgeBase> {
    build_knowledge_base_traced(dataset, config).map(|(kb, _)| kb)
}

/// Like [`build_knowledge_base`], also returning per-attribute fit diagnostics.
pub fn build_knowledge_base_traced(dataset: &Dataset, config: &KbConfig) -> Result<(KnowledgeBase, Vec<FitSummary>)> {
    for name in config.clusters.keys().chain(config.labels.keys()) {
        if dataset.attribute_index(name).is_none() {
            return Err(Error::Config(format!("unknown attribute {name:?}")));
        }
    }

    let plans = dataset
        .attributes()
        .iter()
        .enumerate()
        .map(|(index, name)| plan_attribute(name, index, config))
        .collect::<Result<Vec<_>>>()?;

    let fitted = plans
        .into_par_iter()
        .map(|(index, labels, params)| {
            let name = &dataset.attributes()[index];
            let values = dataset.column(index)?;
            let fit = fuzzy_c_means(&values, &params).map_err(|e| match e {
                Error::DegenerateData(msg) => Error::DegenerateData(format!("{name}: {msg}")),
                Error::Parse { row, message, .. } => Error::Parse {
                    row,
                    column: index,
                    message,
                },
                other => other,
            })?;
            let model = ClusterModel {
                attribute: name.clone(),
                centroids: fit.centroids,
                labels,
                fuzzifier: params.fuzzifier,
            };
            let matrix = MembershipMatrix {
                attribute: name.clone(),
                values: fit.memberships,
            };
            let summary = FitSummary {
                attribute: name.clone(),
                iterations: fit.iterations,
                converged: fit.converged,
                objective: fit.objective,
            };
            Ok(((model, matrix), summary))
        })
        .collect::<Result<Vec<_>>>()?;

    let (entries, summaries): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let clusters = entries
        .iter()
        .map(|(m, _)| (m.attribute.clone(), m.centroids.len()))
        .collect();
    let provenance = Provenance {
        source: config.source.clone(),
        default_clusters: config.default_clusters,
        clusters,
        fuzzifier: config.fuzzifier,
        seed: config.seed,
        tol: config.tol,
        max_iter: config.max_iter,
    };
    Ok((KnowledgeBase { entries, provenance }, summaries))
}

fn plan_attribute(name: &str, index: usize, config: &KbConfig) -> Result<(usize, Vec<String>, FcmParams)> {
    let labels = config.labels.get(name).or(config.default_labels.as_ref());
    let count = match (config.clusters.get(name), config.labels.get(name)) {
        (Some(&c), _) => c,
        (None, Some(l)) => l.len(),
        (None, None) => config.default_labels.as_ref().map_or(config.default_clusters, Vec::len),
    };
    let labels = match labels {
        Some(l) if l.len() != count => {
            return Err(Error::Config(format!(
                "{name}: {} labels given for {count} clusters",
                l.len()
            )))
        }
        Some(l) => l.clone(),
        None => default_labels(count),
    };
    let mut seen = HashSet::new();
    if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(Error::Config(format!("{name}: duplicate label {dup:?}")));
    }
    let params = FcmParams {
        clusters: count,
        fuzzifier: config.fuzzifier,
        tol: config.tol,
        max_iter: config.max_iter,
        seed: config.seed.wrapping_add(index as u64),
    };
    Ok((index, labels, params))
}

/// Membership of an arbitrary value to each labelled region of `attribute`,
/// recomputed from the stored centroids.
pub fn membership_of(kb: &KnowledgeBase, attribute: &str, value: f64) -> Result<Vec<f64>> {
    let model = kb
        .model(attribute)
        .ok_or_else(|| Error::Config(format!("unknown attribute {attribute:?}")))?;
    if !value.is_finite() {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: format!("non-finite value {value}"),
        });
    }
    Ok(model.memberships(value))
}
