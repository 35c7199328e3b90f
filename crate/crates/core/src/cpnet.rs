//! Conditional preference networks.
//!
//! Nodes are preference variables with finite ordered domains. Each node lists
//! its parents, and its conditional preference table holds one total order
//! over the node's domain for every assignment of those parents. A [`CpNet`]
//! can be built in any state; [`validate_cpnet`] reports what is wrong with
//! it and every other operation requires a valid net.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of complete assignments [`enumerate_outcomes`]
/// will walk.
pub const DEFAULT_OUTCOME_CAP: u64 = 1_000_000;

/// Largest parent-context space validation will enumerate for one node.
const MAX_CONTEXTS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceVariable {
    pub name: String,
    pub domain: Vec<String>,
}

impl PreferenceVariable {
    pub fn new<S: Into<String>>(name: S, domain: impl IntoIterator<Item = S>) -> Self {
        PreferenceVariable {
            name: name.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == label)
    }
}

/// One row of a conditional preference table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CptRow {
    /// Domain index of each parent, in the node's parent order.
    pub context: Vec<usize>,
    /// Domain indices from most to least preferred.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "CpNetDocument", try_from = "CpNetDocument")]
pub struct CpNet {
    nodes: Vec<PreferenceVariable>,
    parents: Vec<Vec<usize>>,
    cpt: Vec<Vec<CptRow>>,
}

impl CpNet {
    /// `parents[i]` and `cpt[i]` belong to `nodes[i]`. Nothing is checked.
    pub fn new(nodes: Vec<PreferenceVariable>, parents: Vec<Vec<usize>>, cpt: Vec<Vec<CptRow>>) -> Self {
        CpNet { nodes, parents, cpt }
    }

    /// Builds the parent lists from `(parent, child)` edges, in edge order.
    pub fn from_edges(nodes: Vec<PreferenceVariable>, edges: &[(usize, usize)], cpt: Vec<Vec<CptRow>>) -> Self {
        let mut parents = vec![Vec::new(); nodes.len()];
        for &(p, c) in edges {
            if let Some(list) = parents.get_mut(c) {
                list.push(p);
            }
        }
        CpNet { nodes, parents, cpt }
    }

    pub fn nodes(&self) -> &[PreferenceVariable] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&c| self.parents[c].contains(&node))
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn table(&self, node: usize) -> &[CptRow] {
        &self.cpt[node]
    }

    /// Mixed-radix position of a parent context, first parent most significant.
    pub fn context_index(&self, node: usize, context: &[usize]) -> usize {
        self.parents[node]
            .iter()
            .zip(context)
            .fold(0, |acc, (&p, &v)| acc * self.nodes[p].domain.len() + v)
    }

    pub fn context_count(&self, node: usize) -> usize {
        self.parents[node].iter().map(|&p| self.nodes[p].domain.len()).product()
    }

    /// The preference row that applies to `node` under a complete assignment.
    pub fn row_for(&self, node: usize, assignment: &[usize]) -> Option<&CptRow> {
        let context: Vec<usize> = self.parents[node].iter().map(|&p| assignment[p]).collect();
        self.cpt[node].iter().find(|r| r.context == context)
    }

    /// Stable topological order: among ready nodes the earliest declared goes
    /// first. Nodes on a cycle are left out.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self
            .parents
            .iter()
            .map(|ps| ps.iter().filter(|&&p| p < n).count())
            .collect();
        let children: Vec<Vec<usize>> = (0..n).map(|i| self.children(i)).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(node)) = ready.pop() {
            order.push(node);
            for &c in &children[node] {
                // a duplicated parent contributes one in-degree per listing
                for _ in self.parents[c].iter().filter(|&&p| p == node) {
                    indegree[c] -= 1;
                }
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        order
    }

    /// Number of complete assignments, `None` on overflow.
    pub fn outcome_count(&self) -> Option<u64> {
        self.nodes
            .iter()
            .try_fold(1u64, |acc, n| acc.checked_mul(n.domain.len() as u64))
    }

    pub fn describe_context(&self, node: usize, context: &[usize]) -> String {
        self.parents[node]
            .iter()
            .zip(context)
            .map(|(&p, &v)| {
                let var = &self.nodes[p];
                format!("{}={}", var.name, var.domain.get(v).map_or("?", String::as_str))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateNode { name: String },
    EmptyDomain { node: String },
    DuplicateValue { node: String, value: String },
    UnknownParent { node: String, parent: usize },
    DuplicateParent { node: String, parent: String },
    Cycle { nodes: Vec<String> },
    MissingTable { node: String },
    MalformedContext { node: String, row: usize },
    DuplicateContext { node: String, context: String },
    MissingContext { node: String, context: String },
    NotPermutation { node: String, context: String },
    TableTooLarge { node: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode { name } => write!(f, "node {name} declared twice"),
            Violation::EmptyDomain { node } => write!(f, "{node}: empty domain"),
            Violation::DuplicateValue { node, value } => write!(f, "{node}: value {value} appears twice in domain"),
            Violation::UnknownParent { node, parent } => write!(f, "{node}: parent #{parent} does not exist"),
            Violation::DuplicateParent { node, parent } => write!(f, "{node}: parent {parent} listed twice"),
            Violation::Cycle { nodes } => write!(f, "cycle through {}", nodes.join(", ")),
            Violation::MissingTable { node } => write!(f, "{node}: no preference table"),
            Violation::MalformedContext { node, row } => write!(f, "{node}: row {row} has a malformed parent context"),
            Violation::DuplicateContext { node, context } => write!(f, "{node}: context [{context}] given twice"),
            Violation::MissingContext { node, context } => {
                write!(f, "{node}: no preference order for context [{context}]")
            }
            Violation::NotPermutation { node, context } => {
                write!(
                    f,
                    "{node}: order for context [{context}] is not a permutation of the domain"
                )
            }
            Violation::TableTooLarge { node } => write!(f, "{node}: parent context space too large"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {v}")?;
        }
        Ok(())
    }
}

pub fn validate_cpnet(net: &CpNet) -> ValidationReport {
    let mut out = Vec::new();
    let n = net.nodes.len();

    let mut names = HashSet::new();
    for node in &net.nodes {
        if !names.insert(node.name.as_str()) {
            out.push(Violation::DuplicateNode {
                name: node.name.clone(),
            });
        }
        if node.domain.is_empty() {
            out.push(Violation::EmptyDomain {
                node: node.name.clone(),
            });
        }
        let mut seen = HashSet::new();
        for v in &node.domain {
            if !seen.insert(v.as_str()) {
                out.push(Violation::DuplicateValue {
                    node: node.name.clone(),
                    value: v.clone(),
                });
            }
        }
    }

    let mut structural = net.parents.len() != n || net.cpt.len() != n;
    for (i, node) in net.nodes.iter().enumerate() {
        let Some(ps) = net.parents.get(i) else { continue };
        let mut seen = HashSet::new();
        for &p in ps {
            if p >= n {
                out.push(Violation::UnknownParent {
                    node: node.name.clone(),
                    parent: p,
                });
                structural = true;
            } else if !seen.insert(p) {
                out.push(Violation::DuplicateParent {
                    node: node.name.clone(),
                    parent: net.nodes[p].name.clone(),
                });
            }
        }
    }
    if net.parents.len() == n {
        let on_cycle = nodes_on_cycles(net);
        if !on_cycle.is_empty() {
            out.push(Violation::Cycle {
                nodes: on_cycle.iter().map(|&i| net.nodes[i].name.clone()).collect(),
            });
        }
    }

    for i in 0..n {
        if net.cpt.get(i).is_none() {
            out.push(Violation::MissingTable {
                node: net.nodes[i].name.clone(),
            });
        }
    }
    if !structural {
        for i in 0..n {
            check_table(net, i, &mut out);
        }
    }

    ValidationReport { violations: out }
}

fn check_table(net: &CpNet, node: usize, out: &mut Vec<Violation>) {
    let name = &net.nodes[node].name;
    let parents = &net.parents[node];
    let radices: Vec<usize> = parents.iter().map(|&p| net.nodes[p].domain.len()).collect();
    let domain = net.nodes[node].domain.len();

    let mut covered = HashSet::new();
    for (r, row) in net.cpt[node].iter().enumerate() {
        if row.context.len() != parents.len() || row.context.iter().zip(&radices).any(|(&v, &k)| v >= k) {
            out.push(Violation::MalformedContext {
                node: name.clone(),
                row: r,
            });
            continue;
        }
        let context = net.describe_context(node, &row.context);
        if !covered.insert(row.context.clone()) {
            out.push(Violation::DuplicateContext {
                node: name.clone(),
                context: context.clone(),
            });
        }
        let mut seen = vec![false; domain];
        let is_perm = row.order.len() == domain
            && row
                .order
                .iter()
                .all(|&v| v < domain && !std::mem::replace(&mut seen[v], true));
        if !is_perm {
            out.push(Violation::NotPermutation {
                node: name.clone(),
                context,
            });
        }
    }

    let total = radices.iter().try_fold(1u64, |acc, &k| acc.checked_mul(k as u64));
    match total {
        Some(t) if t <= MAX_CONTEXTS => {
            let mut context = vec![0; radices.len()];
            for _ in 0..t {
                if !covered.contains(&context) {
                    out.push(Violation::MissingContext {
                        node: name.clone(),
                        context: net.describe_context(node, &context),
                    });
                }
                advance(&mut context, &radices);
            }
        }
        _ => out.push(Violation::TableTooLarge { node: name.clone() }),
    }
}

/// Odometer step, last position fastest. Returns false after wrapping.
fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for pos in (0..digits.len()).rev() {
        digits[pos] += 1;
        if digits[pos] < radices[pos] {
            return true;
        }
        digits[pos] = 0;
    }
    false
}

fn nodes_on_cycles(net: &CpNet) -> Vec<usize> {
    let n = net.nodes.len();
    // edges child -> parent are enough: a node is on a cycle iff it reaches
    // itself, whichever direction is walked
    (0..n)
        .filter(|&start| {
            let mut stack: Vec<usize> = net.parents[start].iter().copied().filter(|&p| p < n).collect();
            let mut seen = vec![false; n];
            while let Some(v) = stack.pop() {
                if v == start {
                    return true;
                }
                if !std::mem::replace(&mut seen[v], true) {
                    stack.extend(net.parents[v].iter().copied().filter(|&p| p < n));
                }
            }
            false
        })
        .collect()
}

/// Positional importance of every node: 1 for a leaf, otherwise one more than
/// the largest importance among its direct children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceMap {
    names: Vec<String>,
    values: Vec<u32>,
}

impl ImportanceMap {
    pub fn get(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Indexed like the net's nodes.
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

pub fn node_importance(net: &CpNet) -> Result<ImportanceMap> {
    validate_cpnet(net).into_result()?;
    let children: Vec<Vec<usize>> = (0..net.len()).map(|i| net.children(i)).collect();
    let mut values = vec![0u32; net.len()];
    for &node in net.topological_order().iter().rev() {
        values[node] = 1 + children[node].iter().map(|&c| values[c]).max().unwrap_or(0);
    }
    Ok(ImportanceMap {
        names: net.nodes.iter().map(|n| n.name.clone()).collect(),
        values,
    })
}

/// Every complete assignment, as domain indices indexed like the net's nodes,
/// in lexicographic order over (topological position, domain index).
pub fn enumerate_outcomes(net: &CpNet, cap: u64) -> Result<Outcomes> {
    validate_cpnet(net).into_result()?;
    let total = net
        .outcome_count()
        .filter(|&t| t <= cap)
        .ok_or_else(|| Error::Capacity(format!("outcome space exceeds the cap of {cap}")))?;
    let order = net.topological_order();
    let radices = order.iter().map(|&i| net.nodes[i].domain.len()).collect();
    Ok(Outcomes {
        digits: vec![0; order.len()],
        order,
        radices,
        remaining: total,
    })
}

#[derive(Debug, Clone)]
pub struct Outcomes {
    order: Vec<usize>,
    radices: Vec<usize>,
    digits: Vec<usize>,
    remaining: u64,
}

impl Iterator for Outcomes {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut outcome = vec![0; self.order.len()];
        for (&node, &d) in self.order.iter().zip(&self.digits) {
            outcome[node] = d;
        }
        advance(&mut self.digits, &self.radices);
        Some(outcome)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

// Persisted form: labels rather than indices.

#[derive(Serialize, Deserialize)]
struct CpNetDocument {
    nodes: Vec<NodeDocument>,
}

#[derive(Serialize, Deserialize)]
struct NodeDocument {
    name: String,
    domain: Vec<String>,
    parents: Vec<String>,
    cpt: Vec<RowDocument>,
}

#[derive(Serialize, Deserialize)]
struct RowDocument {
    when: Vec<String>,
    prefer: Vec<String>,
}

impl From<CpNet> for CpNetDocument {
    fn from(net: CpNet) -> Self {
        let label = |node: usize, v: usize| net.nodes[node].domain[v].clone();
        let nodes = (0..net.len())
            .map(|i| NodeDocument {
                name: net.nodes[i].name.clone(),
                domain: net.nodes[i].domain.clone(),
                parents: net.parents[i].iter().map(|&p| net.nodes[p].name.clone()).collect(),
                cpt: net.cpt[i]
                    .iter()
                    .map(|row| RowDocument {
                        when: net.parents[i]
                            .iter()
                            .zip(&row.context)
                            .map(|(&p, &v)| label(p, v))
                            .collect(),
                        prefer: row.order.iter().map(|&v| label(i, v)).collect(),
                    })
                    .collect(),
            })
            .collect();
        CpNetDocument { nodes }
    }
}

impl TryFrom<CpNetDocument> for CpNet {
    type Error = String;

    fn try_from(doc: CpNetDocument) -> std::result::Result<Self, String> {
        let nodes: Vec<PreferenceVariable> = doc
            .nodes
            .iter()
            .map(|n| PreferenceVariable {
                name: n.name.clone(),
                domain: n.domain.clone(),
            })
            .collect();
        let find_node = |name: &str| {
            nodes
                .iter()
                .position(|n| n.name == name)
                .ok_or_else(|| format!("unknown node {name:?}"))
        };
        let find_value = |node: usize, label: &str| {
            nodes[node]
                .value_index(label)
                .ok_or_else(|| format!("{}: unknown value {label:?}", nodes[node].name))
        };
        let mut parents = Vec::with_capacity(nodes.len());
        let mut cpt = Vec::with_capacity(nodes.len());
        for (i, n) in doc.nodes.iter().enumerate() {
            let ps = n
                .parents
                .iter()
                .map(|p| find_node(p))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let rows = n
                .cpt
                .iter()
                .map(|row| {
                    if row.when.len() != ps.len() {
                        return Err(format!("{}: context arity mismatch", n.name));
                    }
                    Ok(CptRow {
                        context: ps
                            .iter()
                            .zip(&row.when)
                            .map(|(&p, l)| find_value(p, l))
                            .collect::<std::result::Result<_, _>>()?,
                        order: row
                            .prefer
                            .iter()
                            .map(|l| find_value(i, l))
                            .collect::<std::result::Result<_, _>>()?,
                    })
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            parents.push(ps);
            cpt.push(rows);
        }
        let net = CpNet { nodes, parents, cpt };
        let report = validate_cpnet(&net);
        if report.is_ok() {
            Ok(net)
        } else {
            Err(report.to_string())
        }
    }
}
