//! Preference queries: the text language, its compilation into a CP-Net, and
//! the rewrite into a weighted disjunction of conjunctive terms.

mod lexer;
mod parser;
mod pretty;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cpnet::{validate_cpnet, CpNet, CptRow, PreferenceVariable};
use crate::error::{Error, Result};
use crate::kb::{membership_of, KnowledgeBase};
use crate::ucp::{best_outcomes, outcome_utility, term_importance, UcpNet, UtilityDocument};
use crate::FORMAT_VERSION;

pub use parser::parse_query;
pub use pretty::pretty_print;

/// Term count used when the query does not give one, capped by the number of
/// outcomes.
pub const DEFAULT_TERM_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub variables: Vec<VariableSpec>,
    pub term_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    /// Knowledge-base attribute whose labels are this variable's values.
    pub attribute: String,
    pub domain: Vec<String>,
    pub parents: Vec<String>,
    pub preferences: Vec<PreferenceSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSpec {
    /// `(parent, value)` pairs; empty for an unconditional preference.
    pub conditions: Vec<(String, String)>,
    /// Most preferred first.
    pub order: Vec<String>,
}

pub fn build_cpnet(spec: &QuerySpec) -> Result<CpNet> {
    let nodes: Vec<PreferenceVariable> = spec
        .variables
        .iter()
        .map(|v| PreferenceVariable {
            name: v.name.clone(),
            domain: v.domain.clone(),
        })
        .collect();
    let find = |name: &str| {
        nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::Config(format!("unknown variable `{name}`")))
    };
    let value = |node: usize, label: &str| {
        nodes[node]
            .value_index(label)
            .ok_or_else(|| Error::Config(format!("`{label}` is not a value of `{}`", nodes[node].name)))
    };

    let mut parents = Vec::with_capacity(nodes.len());
    let mut cpt = Vec::with_capacity(nodes.len());
    for (i, var) in spec.variables.iter().enumerate() {
        let ps = var.parents.iter().map(|p| find(p)).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::with_capacity(var.preferences.len());
        for pref in &var.preferences {
            let mut context = vec![usize::MAX; ps.len()];
            for (parent, label) in &pref.conditions {
                let p = find(parent)?;
                let slot = ps
                    .iter()
                    .position(|&q| q == p)
                    .ok_or_else(|| Error::Config(format!("`{parent}` is not a parent of `{}`", var.name)))?;
                context[slot] = value(p, label)?;
            }
            if context.contains(&usize::MAX) {
                return Err(Error::Config(format!(
                    "`{}`: preference leaves a parent unfixed",
                    var.name
                )));
            }
            let order = pref.order.iter().map(|l| value(i, l)).collect::<Result<Vec<_>>>()?;
            rows.push(CptRow { context, order });
        }
        parents.push(ps);
        cpt.push(rows);
    }
    let net = CpNet::new(nodes, parents, cpt);
    validate_cpnet(&net).into_result()?;
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub variable: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    /// Domain index per variable, in variable order.
    pub assignment: Vec<usize>,
    /// Membership-derived weight of each chosen value.
    pub weights: Vec<f64>,
    pub utility: f64,
    /// Importance U of the term in [0, 1].
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    pub bindings: Vec<Binding>,
    pub ucp: UcpNet,
    /// Ordered by non-increasing importance.
    pub terms: Vec<Term>,
}

impl WeightedQuery {
    pub fn net(&self) -> &CpNet {
        self.ucp.net()
    }

    pub fn label(&self, variable: usize, value: usize) -> &str {
        &self.net().nodes()[variable].domain[value]
    }
}

/// Checks every variable against the knowledge base and returns, per
/// variable, the cluster index of each domain value.
pub fn resolve_bindings(net: &CpNet, bindings: &[Binding], kb: &KnowledgeBase) -> Result<Vec<Vec<usize>>> {
    if bindings.len() != net.len() {
        return Err(Error::Binding(format!(
            "{} bindings for {} variables",
            bindings.len(),
            net.len()
        )));
    }
    net.nodes()
        .iter()
        .zip(bindings)
        .map(|(node, binding)| {
            if node.name != binding.variable {
                return Err(Error::Binding(format!(
                    "binding for `{}` given to `{}`",
                    binding.variable, node.name
                )));
            }
            let model = kb.model(&binding.attribute).ok_or_else(|| {
                Error::Binding(format!(
                    "`{}` is bound to attribute `{}`, which the knowledge base lacks",
                    node.name, binding.attribute
                ))
            })?;
            node.domain
                .iter()
                .map(|label| {
                    model.label_index(label).ok_or_else(|| {
                        Error::Binding(format!(
                            "`{}`: value `{label}` is not a label of attribute `{}` (labels: {})",
                            node.name,
                            binding.attribute,
                            model.labels.join(", ")
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

/// Turns the best outcomes of the UCP-Net into weighted conjunctive terms.
///
/// Term k is the k-th best complete outcome (ties broken lexicographically by
/// topological position then domain index), its importance is the outcome's
/// normalised utility, and each chosen value carries the self-membership of
/// its cluster centroid as weight. `term_count = None` means
/// `min(DEFAULT_TERM_COUNT, outcome count)`.
pub fn rewrite_query(
    ucp: &UcpNet,
    bindings: &[Binding],
    kb: &KnowledgeBase,
    term_count: Option<usize>,
) -> Result<WeightedQuery> {
    let net = ucp.net();
    let clusters = resolve_bindings(net, bindings, kb)?;
    let outcomes = net.outcome_count().unwrap_or(u64::MAX);
    let count = match term_count {
        None => DEFAULT_TERM_COUNT.min(usize::try_from(outcomes).unwrap_or(usize::MAX)),
        Some(0) => return Err(Error::Capacity("term count must be at least 1".into())),
        Some(t) if t as u64 > outcomes => {
            return Err(Error::Capacity(format!(
                "{t} terms requested but only {outcomes} outcomes exist"
            )))
        }
        Some(t) => t,
    };

    let terms = best_outcomes(ucp, count)
        .into_iter()
        .map(|outcome| {
            let weights = outcome
                .assignment
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let attribute = &bindings[i].attribute;
                    let cluster = clusters[i][v];
                    let centroid = kb.model(attribute).map(|m| m.centroids[cluster]).unwrap_or_default();
                    Ok(membership_of(kb, attribute, centroid)?[cluster])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Term {
                importance: term_importance(ucp, &outcome.assignment)?,
                utility: outcome.utility,
                weights,
                assignment: outcome.assignment,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(WeightedQuery {
        bindings: bindings.to_vec(),
        ucp: ucp.clone(),
        terms,
    })
}

pub fn bindings_of(spec: &QuerySpec) -> Vec<Binding> {
    spec.variables
        .iter()
        .map(|v| Binding {
            variable: v.name.clone(),
            attribute: v.attribute.clone(),
        })
        .collect()
}

/// A query compiled against a knowledge base, as persisted between the
/// compile and evaluation stages.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledQuery {
    pub spec: QuerySpec,
    pub query: WeightedQuery,
}

#[derive(Serialize, Deserialize)]
struct CompiledDocument {
    format_version: u32,
    spec: QuerySpec,
    cpnet: CpNet,
    utilities: UtilityDocument,
    terms: Vec<TermDocument>,
}

#[derive(Serialize, Deserialize)]
struct TermDocument {
    assignment: IndexMap<String, String>,
    weights: IndexMap<String, f64>,
    utility: f64,
    #[serde(rename = "U")]
    importance: f64,
}

impl CompiledQuery {
    pub fn compile(
        spec: QuerySpec,
        kb: &KnowledgeBase,
        term_count: Option<usize>,
        mode: crate::ucp::UtilityMode,
    ) -> Result<Self> {
        let net = build_cpnet(&spec)?;
        let ucp = crate::ucp::assign_utilities_with(&net, mode)?;
        let query = rewrite_query(&ucp, &bindings_of(&spec), kb, term_count.or(spec.term_count))?;
        Ok(CompiledQuery { spec, query })
    }

    pub fn to_json(&self) -> Result<String> {
        let net = self.query.net();
        let names = || net.nodes().iter().map(|n| n.name.clone());
        let doc = CompiledDocument {
            format_version: FORMAT_VERSION,
            spec: self.spec.clone(),
            cpnet: net.clone(),
            utilities: self.query.ucp.to_document(),
            terms: self
                .query
                .terms
                .iter()
                .map(|t| TermDocument {
                    assignment: names()
                        .zip(
                            t.assignment
                                .iter()
                                .enumerate()
                                .map(|(i, &v)| self.query.label(i, v).to_owned()),
                        )
                        .collect(),
                    weights: names().zip(t.weights.iter().copied()).collect(),
                    utility: t.utility,
                    importance: t.importance,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses a compiled-query document and checks that its parts agree.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CompiledDocument = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let rebuilt = build_cpnet(&doc.spec).map_err(|e| Error::Document(format!("spec does not compile: {e}")))?;
        if rebuilt != doc.cpnet {
            return Err(Error::Document("cpnet does not match the spec".into()));
        }
        let ucp = UcpNet::from_document(doc.cpnet, doc.utilities)?;
        let net = ucp.net();

        let mut terms = Vec::with_capacity(doc.terms.len());
        for (k, t) in doc.terms.into_iter().enumerate() {
            if t.assignment.len() != net.len() || t.weights.len() != net.len() {
                return Err(Error::Document(format!("term {} does not cover every variable", k + 1)));
            }
            let mut assignment = Vec::with_capacity(net.len());
            let mut weights = Vec::with_capacity(net.len());
            for node in net.nodes() {
                let label = t
                    .assignment
                    .get(&node.name)
                    .ok_or_else(|| Error::Document(format!("term {} lacks `{}`", k + 1, node.name)))?;
                let value = node.value_index(label).ok_or_else(|| {
                    Error::Document(format!("term {}: `{label}` not in domain of `{}`", k + 1, node.name))
                })?;
                let weight = *t
                    .weights
                    .get(&node.name)
                    .ok_or_else(|| Error::Document(format!("term {} lacks a weight for `{}`", k + 1, node.name)))?;
                assignment.push(value);
                weights.push(weight);
            }
            if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::Document(format!("term {}: weights must lie in [0, 1]", k + 1)));
            }
            if outcome_utility(&ucp, &assignment)? != t.utility || term_importance(&ucp, &assignment)? != t.importance {
                return Err(Error::Document(format!(
                    "term {}: utility does not match the tables",
                    k + 1
                )));
            }
            terms.push(Term {
                assignment,
                weights,
                utility: t.utility,
                importance: t.importance,
            });
        }
        if terms.is_empty() {
            return Err(Error::Document("compiled query has no terms".into()));
        }
        if terms.windows(2).any(|w| w[0].importance < w[1].importance) {
            return Err(Error::Document("terms are not ordered by importance".into()));
        }
        Ok(CompiledQuery {
            query: WeightedQuery {
                bindings: bindings_of(&doc.spec),
                ucp,
                terms,
            },
            spec: doc.spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{build_knowledge_base, Dataset, KbConfig};
    use crate::ucp::{assign_utilities, UtilityMode};

    fn kb() -> KnowledgeBase {
        let ds = Dataset::from_columns(vec![
            ("x".into(), vec![0.0, 1.0, 9.0, 10.0]),
            ("y".into(), vec![5.0, 6.0, 0.0, 1.0]),
            ("z".into(), vec![2.0, 3.0, 7.0, 8.0]),
        ])
        .unwrap();
        build_knowledge_base(
            &ds,
            &KbConfig {
                default_clusters: 2,
                default_labels: Some(vec!["lo".into(), "hi".into()]),
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap()
    }

    const CHAIN: &str = "
        var a: attr x { prefer hi > lo }
        var b: attr y { depends a
            when a = hi: prefer lo > hi
            when a = lo: prefer hi > lo }
        var c: attr z { depends b
            when b = hi: prefer hi > lo
            when b = lo: prefer lo > hi }
    ";

    #[test]
    fn single_variable_net() {
        let net = build_cpnet(&parse_query("var color: attr c { prefer red > green }").unwrap()).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.edges().is_empty());
        assert_eq!(net.table(0)[0].order, vec![0, 1]);
    }

    #[test]
    fn two_node_chain() {
        let spec = parse_query(
            "var a: attr x { prefer u > v } var b: attr y { depends a when a = u: prefer p > q when a = v: prefer q > p }",
        )
        .unwrap();
        let net = build_cpnet(&spec).unwrap();
        assert_eq!(net.edges(), vec![(0, 1)]);
        assert_eq!(net.table(1).len(), 2);
    }

    #[test]
    fn missing_context_is_a_validation_error() {
        let spec =
            parse_query("var a: attr x { prefer u > v } var b: attr y { depends a when a = u: prefer p > q }").unwrap();
        match build_cpnet(&spec).unwrap_err() {
            Error::Validation(report) => assert!(report.to_string().contains("a=v")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cyclic_dependencies() {
        let spec = parse_query(
            "var a: attr x { depends b when b = p: prefer u > v when b = q: prefer u > v }
             var b: attr y { depends a when a = u: prefer p > q when a = v: prefer p > q }",
        )
        .unwrap();
        assert!(matches!(build_cpnet(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn single_binary_variable_two_terms() {
        let spec = parse_query("var a: attr x { prefer hi > lo }").unwrap();
        let ucp = assign_utilities(&build_cpnet(&spec).unwrap()).unwrap();
        let q = rewrite_query(&ucp, &bindings_of(&spec), &kb(), Some(2)).unwrap();
        assert_eq!(q.terms.len(), 2);
        assert_eq!(q.label(0, q.terms[0].assignment[0]), "hi");
        assert_eq!(q.terms[0].importance, 1.0);
        assert_eq!(q.terms[1].importance, 0.0);
        assert_eq!(q.terms[0].weights, vec![1.0]);
    }

    #[test]
    fn one_term_is_the_best_outcome() {
        let spec = parse_query(CHAIN).unwrap();
        let ucp = assign_utilities(&build_cpnet(&spec).unwrap()).unwrap();
        let q = rewrite_query(&ucp, &bindings_of(&spec), &kb(), Some(1)).unwrap();
        assert_eq!(q.terms.len(), 1);
        assert_eq!(q.terms[0].assignment, crate::ucp::best_outcome(&ucp));
        assert_eq!(q.terms[0].importance, 1.0);
    }

    #[test]
    fn default_and_excess_term_counts() {
        let spec = parse_query(CHAIN).unwrap();
        let ucp = assign_utilities(&build_cpnet(&spec).unwrap()).unwrap();
        let q = rewrite_query(&ucp, &bindings_of(&spec), &kb(), None).unwrap();
        assert_eq!(q.terms.len(), DEFAULT_TERM_COUNT);
        assert!(matches!(
            rewrite_query(&ucp, &bindings_of(&spec), &kb(), Some(9)),
            Err(Error::Capacity(_))
        ));
        assert_eq!(
            rewrite_query(&ucp, &bindings_of(&spec), &kb(), Some(8))
                .unwrap()
                .terms
                .len(),
            8
        );
    }

    #[test]
    fn label_mismatch() {
        let spec = parse_query("var a: attr x { prefer high > low }").unwrap();
        let ucp = assign_utilities(&build_cpnet(&spec).unwrap()).unwrap();
        assert!(matches!(
            rewrite_query(&ucp, &bindings_of(&spec), &kb(), None),
            Err(Error::Binding(_))
        ));
        let spec = parse_query("var a: attr nope { prefer hi > lo }").unwrap();
        let ucp = assign_utilities(&build_cpnet(&spec).unwrap()).unwrap();
        assert!(matches!(
            rewrite_query(&ucp, &bindings_of(&spec), &kb(), None),
            Err(Error::Binding(_))
        ));
    }

    #[test]
    fn compiled_document_round_trip() {
        let spec = parse_query(CHAIN).unwrap();
        for mode in [UtilityMode::Dominance, UtilityMode::MembershipScale] {
            let compiled = CompiledQuery::compile(spec.clone(), &kb(), Some(4), mode).unwrap();
            let text = compiled.to_json().unwrap();
            assert!(text.contains("\"format_version\": 1"));
            let back = CompiledQuery::from_json(&text).unwrap();
            assert_eq!(back, compiled);
        }
    }

    #[test]
    fn compiled_document_integrity() {
        let compiled =
            CompiledQuery::compile(parse_query(CHAIN).unwrap(), &kb(), Some(4), UtilityMode::Dominance).unwrap();
        let text = compiled.to_json().unwrap();
        assert!(matches!(CompiledQuery::from_json(&text[..40]), Err(Error::Document(_))));
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();

        let mut reordered = doc.clone();
        reordered["cpnet"]["nodes"][0]["cpt"][0]["prefer"] = serde_json::json!(["lo", "hi"]);
        assert!(matches!(
            CompiledQuery::from_json(&reordered.to_string()),
            Err(Error::Document(_))
        ));

        let mut inflated = doc.clone();
        inflated["terms"][1]["U"] = serde_json::json!(0.9);
        assert!(matches!(
            CompiledQuery::from_json(&inflated.to_string()),
            Err(Error::Document(_))
        ));

        let mut partial = doc;
        partial["terms"][0]["assignment"].as_object_mut().unwrap().remove("b");
        assert!(matches!(
            CompiledQuery::from_json(&partial.to_string()),
            Err(Error::Document(_))
        ));
    }
}
