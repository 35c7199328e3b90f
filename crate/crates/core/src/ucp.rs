//! Utility CP-Nets.
//!
//! Every preference row is turned into evenly spaced utilities: the least
//! preferred value gets 0 and each step up the order adds the node's step.
//! Steps are chosen bottom-up so that a node's smallest utility gap is at
//! least the sum of its children's largest gaps (the dominance property), which
//! makes the additive outcome utility agree with every conditional preference.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cpnet::{validate_cpnet, CpNet};
use crate::error::{Error, Result};

/// Largest integer every step of the dominance scheme may reach while `f64`
/// arithmetic stays exact.
const EXACT_INTEGER_LIMIT: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityMode {
    /// Integer steps sized so the dominance property holds.
    #[default]
    Dominance,
    /// Each row spread evenly over [0, 1], like a membership degree. Steps are
    /// not coordinated across nodes, so dominance can fail.
    MembershipScale,
}

impl fmt::Display for UtilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UtilityMode::Dominance => "dominance",
            UtilityMode::MembershipScale => "membership-scale",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spans {
    pub minspan: f64,
    pub maxspan: f64,
}

/// Gap statistics over a node's rows, each row listing utilities in
/// preference order. A node whose rows hold a single value has spans (0, 0).
pub fn spans<R: AsRef<[f64]>>(rows: &[R]) -> Spans {
    let mut minspan = f64::INFINITY;
    let mut maxspan: f64 = 0.0;
    for row in rows {
        let row = row.as_ref();
        for pair in row.windows(2) {
            minspan = minspan.min((pair[1] - pair[0]).abs());
        }
        if let (Some(first), Some(last)) = (row.first(), row.last()) {
            maxspan = maxspan.max((last - first).abs());
        }
    }
    if minspan.is_infinite() {
        minspan = 0.0;
    }
    Spans { minspan, maxspan }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeUtilities {
    pub step: f64,
    /// `rows[context_index][value]`, contexts in the net's mixed-radix order.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcpNet {
    net: CpNet,
    mode: UtilityMode,
    utilities: Vec<NodeUtilities>,
    spans: Vec<Spans>,
    max_total_utility: f64,
}

impl UcpNet {
    /// Attaches explicit utility tables to a valid net.
    pub fn from_parts(net: CpNet, mode: UtilityMode, utilities: Vec<NodeUtilities>) -> Result<Self> {
        validate_cpnet(&net).into_result()?;
        if utilities.len() != net.len() {
            return Err(Error::Document(format!(
                "{} utility tables for {} nodes",
                utilities.len(),
                net.len()
            )));
        }
        for (i, table) in utilities.iter().enumerate() {
            let k = net.nodes()[i].domain.len();
            if table.rows.len() != net.context_count(i) || table.rows.iter().any(|r| r.len() != k) {
                return Err(Error::Document(format!(
                    "{}: utility table shape does not match the preference table",
                    net.nodes()[i].name
                )));
            }
            if table.rows.iter().flatten().any(|u| !(u.is_finite() && *u >= 0.0)) {
                return Err(Error::Document(format!(
                    "{}: utilities must be finite and non-negative",
                    net.nodes()[i].name
                )));
            }
        }
        let spans = (0..net.len()).map(|i| node_spans(&net, &utilities[i], i)).collect();
        let max_total_utility = utilities
            .iter()
            .map(|t| t.rows.iter().flatten().copied().fold(0.0, f64::max))
            .sum();
        Ok(UcpNet {
            net,
            mode,
            utilities,
            spans,
            max_total_utility,
        })
    }

    pub fn net(&self) -> &CpNet {
        &self.net
    }

    pub fn mode(&self) -> UtilityMode {
        self.mode
    }

    pub fn utilities(&self) -> &[NodeUtilities] {
        &self.utilities
    }

    pub fn spans(&self) -> &[Spans] {
        &self.spans
    }

    pub fn max_total_utility(&self) -> f64 {
        self.max_total_utility
    }

    /// Utility of `node` taking `value` under the parent values of `assignment`.
    pub fn factor(&self, node: usize, assignment: &[usize]) -> f64 {
        let context: Vec<usize> = self.net.parents(node).iter().map(|&p| assignment[p]).collect();
        self.utilities[node].rows[self.net.context_index(node, &context)][assignment[node]]
    }
}

/// Utilities of one node's rows, each read along its preference order.
fn ordered_rows(net: &CpNet, table: &NodeUtilities, node: usize) -> Vec<Vec<f64>> {
    net.table(node)
        .iter()
        .map(|row| {
            let utilities = &table.rows[net.context_index(node, &row.context)];
            row.order.iter().map(|&v| utilities[v]).collect()
        })
        .collect()
}

fn node_spans(net: &CpNet, table: &NodeUtilities, node: usize) -> Spans {
    spans(&ordered_rows(net, table, node))
}

pub fn assign_utilities(net: &CpNet) -> Result<UcpNet> {
    assign_utilities_with(net, UtilityMode::Dominance)
}

pub fn assign_utilities_with(net: &CpNet, mode: UtilityMode) -> Result<UcpNet> {
    validate_cpnet(net).into_result()?;
    let steps: Vec<f64> = match mode {
        UtilityMode::Dominance => dominance_steps(net)?.into_iter().map(|s| s as f64).collect(),
        UtilityMode::MembershipScale => net
            .nodes()
            .iter()
            .map(|n| match n.domain.len() {
                1 => 0.0,
                k => 1.0 / (k - 1) as f64,
            })
            .collect(),
    };

    let utilities = (0..net.len())
        .map(|node| {
            let k = net.nodes()[node].domain.len();
            let step = steps[node];
            let mut rows = vec![vec![0.0; k]; net.context_count(node)];
            for row in net.table(node) {
                let target = &mut rows[net.context_index(node, &row.context)];
                for (rank, &value) in row.order.iter().enumerate() {
                    // worst value is rank k-1 and lands on 0
                    target[value] = (k - 1 - rank) as f64 * step;
                }
            }
            NodeUtilities { step, rows }
        })
        .collect();
    UcpNet::from_parts(net.clone(), mode, utilities)
}

/// Leaves step by 1; every other node by max(1, Σ children maxspan), where a
/// child's maxspan is (domain size - 1) · its step.
fn dominance_steps(net: &CpNet) -> Result<Vec<u64>> {
    let children: Vec<Vec<usize>> = (0..net.len()).map(|i| net.children(i)).collect();
    let mut steps = vec![0u64; net.len()];
    let mut maxspans = vec![0u64; net.len()];
    for &node in net.topological_order().iter().rev() {
        let below = children[node]
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(maxspans[c]))
            .ok_or(Error::UtilityOverflow)?;
        steps[node] = below.max(1);
        let k = net.nodes()[node].domain.len() as u64;
        maxspans[node] = (k - 1).checked_mul(steps[node]).ok_or(Error::UtilityOverflow)?;
        if maxspans[node] > EXACT_INTEGER_LIMIT {
            return Err(Error::UtilityOverflow);
        }
    }
    if maxspans
        .iter()
        .try_fold(0u64, |acc, &m| acc.checked_add(m))
        .is_none_or(|t| t > EXACT_INTEGER_LIMIT)
    {
        return Err(Error::UtilityOverflow);
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceViolation {
    pub node: String,
    pub minspan: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DominanceReport {
    pub violations: Vec<DominanceViolation>,
}

impl DominanceReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for DominanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} (minspan {} < {})", v.node, v.minspan, v.required))
            .collect();
        write!(f, "VIOLATED at {}", parts.join("; "))
    }
}

/// Checks minspan(X) ≥ Σ maxspan(Y) over the children Y of every node X,
/// recomputing spans from the tables. Nodes with a single-value domain have
/// no adjacent pair to protect and are skipped.
pub fn check_dominance(ucp: &UcpNet) -> DominanceReport {
    let net = &ucp.net;
    let spans: Vec<Spans> = (0..net.len()).map(|i| node_spans(net, &ucp.utilities[i], i)).collect();
    let violations = (0..net.len())
        .filter(|&i| net.nodes()[i].domain.len() > 1)
        .filter_map(|i| {
            let required: f64 = net.children(i).iter().map(|&c| spans[c].maxspan).sum();
            (spans[i].minspan < required).then(|| DominanceViolation {
                node: net.nodes()[i].name.clone(),
                minspan: spans[i].minspan,
                required,
            })
        })
        .collect();
    DominanceReport { violations }
}

fn check_assignment(net: &CpNet, assignment: &[usize]) -> Result<()> {
    if assignment.len() != net.len() {
        return Err(Error::Assignment(format!(
            "{} values for {} variables",
            assignment.len(),
            net.len()
        )));
    }
    for (node, &v) in net.nodes().iter().zip(assignment) {
        if v >= node.domain.len() {
            return Err(Error::Assignment(format!("{}: value #{v} out of domain", node.name)));
        }
    }
    Ok(())
}

/// Sum of the per-node factors, each looked up under the node's parent values.
pub fn outcome_utility(ucp: &UcpNet, assignment: &[usize]) -> Result<f64> {
    check_assignment(&ucp.net, assignment)?;
    Ok((0..ucp.net.len()).map(|node| ucp.factor(node, assignment)).sum())
}

/// Outcome utility normalised by the best attainable total.
pub fn term_importance(ucp: &UcpNet, assignment: &[usize]) -> Result<f64> {
    if ucp.max_total_utility <= 0.0 {
        return Err(Error::DegenerateUtility);
    }
    Ok(outcome_utility(ucp, assignment)? / ucp.max_total_utility)
}

/// The outcome taking every node's most preferred value given its parents.
pub fn best_outcome(ucp: &UcpNet) -> Vec<usize> {
    let net = &ucp.net;
    let mut assignment = vec![0; net.len()];
    for node in net.topological_order() {
        if let Some(row) = net.row_for(node, &assignment) {
            assignment[node] = row.order[0];
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedOutcome {
    pub assignment: Vec<usize>,
    pub utility: f64,
}

struct Candidate {
    utility: f64,
    /// Domain indices in topological order; smaller wins ties.
    key: Vec<usize>,
    assignment: Vec<usize>,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.cmp(other) == Ordering::Less
    }
}

// Ordered so that the better candidate is the smaller one; the heap's top is
// therefore the worst of the kept candidates.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .utility
            .total_cmp(&self.utility)
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// The `count` outcomes of highest utility, best first; equal utilities are
/// ordered lexicographically by (topological position, domain index).
///
/// Depth-first branch and bound in topological order: a partial assignment is
/// dropped once its utility plus the largest factor of every unassigned node
/// cannot reach the worst outcome kept so far.
pub fn best_outcomes(ucp: &UcpNet, count: usize) -> Vec<RankedOutcome> {
    let net = &ucp.net;
    let order = net.topological_order();
    let node_max: Vec<f64> = ucp
        .utilities
        .iter()
        .map(|t| t.rows.iter().flatten().copied().fold(0.0, f64::max))
        .collect();
    let mut rest_max = vec![0.0; order.len() + 1];
    for d in (0..order.len()).rev() {
        rest_max[d] = rest_max[d + 1] + node_max[order[d]];
    }

    let mut search = Search {
        ucp,
        order: &order,
        rest_max: &rest_max,
        slack: 1e-9 * ucp.max_total_utility.max(1.0),
        count,
        kept: BinaryHeap::with_capacity(count + 1),
        assignment: vec![0; net.len()],
    };
    if count > 0 && !order.is_empty() {
        search.descend(0, 0.0);
    }
    search
        .kept
        .into_sorted_vec()
        .into_iter()
        .map(|c| RankedOutcome {
            assignment: c.assignment,
            utility: c.utility,
        })
        .collect()
}

struct Search<'a> {
    ucp: &'a UcpNet,
    order: &'a [usize],
    rest_max: &'a [f64],
    slack: f64,
    count: usize,
    kept: BinaryHeap<Candidate>,
    assignment: Vec<usize>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, partial: f64) {
        if depth == self.order.len() {
            self.offer();
            return;
        }
        let node = self.order[depth];
        let net = self.ucp.net();
        let Some(row) = net.row_for(node, &self.assignment) else {
            return;
        };
        for &value in &row.order.clone() {
            self.assignment[node] = value;
            let here = partial + self.ucp.factor(node, &self.assignment);
            if let Some(worst) = self.kept.peek() {
                if self.kept.len() == self.count && here + self.rest_max[depth + 1] + self.slack < worst.utility {
                    continue;
                }
            }
            self.descend(depth + 1, here);
        }
    }

    fn offer(&mut self) {
        // summed in declaration order so ties match outcome_utility exactly
        let utility = (0..self.assignment.len())
            .map(|n| self.ucp.factor(n, &self.assignment))
            .sum();
        let candidate = Candidate {
            utility,
            key: self.order.iter().map(|&n| self.assignment[n]).collect(),
            assignment: self.assignment.clone(),
        };
        if self.kept.len() < self.count {
            self.kept.push(candidate);
        } else if self.kept.peek().is_some_and(|worst| candidate.beats(worst)) {
            self.kept.pop();
            self.kept.push(candidate);
        }
    }
}

// Persisted form of the utility side of a UCP-Net; the net itself is stored
// separately by the compiled-query document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityDocument {
    pub mode: UtilityMode,
    pub nodes: Vec<NodeUtilityDocument>,
    pub max_total_utility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeUtilityDocument {
    pub name: String,
    pub step: f64,
    pub minspan: f64,
    pub maxspan: f64,
    pub rows: Vec<Vec<f64>>,
}

impl UcpNet {
    pub fn to_document(&self) -> UtilityDocument {
        UtilityDocument {
            mode: self.mode,
            nodes: self
                .utilities
                .iter()
                .zip(&self.spans)
                .zip(self.net.nodes())
                .map(|((t, s), n)| NodeUtilityDocument {
                    name: n.name.clone(),
                    step: t.step,
                    minspan: s.minspan,
                    maxspan: s.maxspan,
                    rows: t.rows.clone(),
                })
                .collect(),
            max_total_utility: self.max_total_utility,
        }
    }

    pub fn from_document(net: CpNet, doc: UtilityDocument) -> Result<Self> {
        for (n, d) in net.nodes().iter().zip(&doc.nodes) {
            if n.name != d.name {
                return Err(Error::Document(format!(
                    "utility table {} does not match node {}",
                    d.name, n.name
                )));
            }
        }
        let tables = doc
            .nodes
            .into_iter()
            .map(|d| NodeUtilities {
                step: d.step,
                rows: d.rows,
            })
            .collect();
        UcpNet::from_parts(net, doc.mode, tables)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpnet::{CptRow, PreferenceVariable};

    fn var(name: &str, k: usize) -> PreferenceVariable {
        PreferenceVariable {
            name: name.into(),
            domain: (0..k).map(|i| format!("v{i}")).collect(),
        }
    }

    /// Every row prefers v0 > v1 > ...
    fn net(domains: &[usize], edges: &[(usize, usize)]) -> CpNet {
        let nodes: Vec<_> = domains
            .iter()
            .enumerate()
            .map(|(i, &k)| var(&format!("n{i}"), k))
            .collect();
        let mut parents = vec![Vec::new(); nodes.len()];
        for &(p, c) in edges {
            parents[c].push(p);
        }
        let cpt = (0..nodes.len())
            .map(|i| {
                let radices: Vec<usize> = parents[i].iter().map(|&p| domains[p]).collect();
                let total: usize = radices.iter().product();
                (0..total)
                    .map(|mut idx| {
                        let mut ctx = vec![0; radices.len()];
                        for pos in (0..radices.len()).rev() {
                            ctx[pos] = idx % radices[pos];
                            idx /= radices[pos];
                        }
                        CptRow {
                            context: ctx,
                            order: (0..domains[i]).collect(),
                        }
                    })
                    .collect()
            })
            .collect();
        CpNet::new(nodes, parents, cpt)
    }

    #[test]
    fn span_formulas() {
        assert_eq!(
            spans(&[vec![0.0, 1.0, 2.0]]),
            Spans {
                minspan: 1.0,
                maxspan: 2.0
            }
        );
        assert_eq!(
            spans(&[vec![0.0]]),
            Spans {
                minspan: 0.0,
                maxspan: 0.0
            }
        );
        assert_eq!(
            spans(&[vec![0.0, 2.0, 4.0], vec![0.0, 2.0]]),
            Spans {
                minspan: 2.0,
                maxspan: 4.0
            }
        );
        assert_eq!(
            spans(&[vec![4.0, 2.0, 0.0]]),
            Spans {
                minspan: 2.0,
                maxspan: 4.0
            }
        );
    }

    #[test]
    fn single_binary_leaf() {
        let ucp = assign_utilities(&net(&[2], &[])).unwrap();
        assert_eq!(ucp.utilities()[0].rows, vec![vec![1.0, 0.0]]);
        assert_eq!(
            ucp.spans()[0],
            Spans {
                minspan: 1.0,
                maxspan: 1.0
            }
        );
    }

    #[test]
    fn parent_of_ternary_leaf() {
        let ucp = assign_utilities(&net(&[2, 3], &[(0, 1)])).unwrap();
        assert_eq!(ucp.utilities()[1].step, 1.0);
        assert_eq!(ucp.utilities()[0].step, 2.0);
        assert_eq!(ucp.utilities()[0].rows, vec![vec![2.0, 0.0]]);
        assert!(check_dominance(&ucp).is_ok());
        assert_eq!(ucp.max_total_utility(), 4.0);
    }

    #[test]
    fn binary_chain() {
        let ucp = assign_utilities(&net(&[2, 2, 2], &[(0, 1), (1, 2)])).unwrap();
        let steps: Vec<f64> = ucp.utilities().iter().map(|t| t.step).collect();
        assert_eq!(steps, [1.0, 1.0, 1.0]);
        assert!(check_dominance(&ucp).is_ok());
        // best, worst, best
        assert_eq!(outcome_utility(&ucp, &[0, 1, 0]).unwrap(), 2.0);
        assert_eq!(term_importance(&ucp, &[0, 1, 0]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn dominance_violation_on_hand_table() {
        let n = net(&[2, 3], &[(0, 1)]);
        let tables = vec![
            NodeUtilities {
                step: 1.0,
                rows: vec![vec![1.0, 0.0]],
            },
            NodeUtilities {
                step: 1.0,
                rows: vec![vec![2.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]],
            },
        ];
        let ucp = UcpNet::from_parts(n, UtilityMode::Dominance, tables).unwrap();
        let report = check_dominance(&ucp);
        assert_eq!(
            report.violations,
            vec![DominanceViolation {
                node: "n0".into(),
                minspan: 1.0,
                required: 2.0
            }]
        );
    }

    #[test]
    fn endpoints_of_importance() {
        let ucp = assign_utilities(&net(&[3, 2, 4], &[(0, 1), (0, 2)])).unwrap();
        assert_eq!(term_importance(&ucp, &best_outcome(&ucp)).unwrap(), 1.0);
        assert_eq!(outcome_utility(&ucp, &[2, 1, 3]).unwrap(), 0.0);
        assert_eq!(term_importance(&ucp, &[2, 1, 3]).unwrap(), 0.0);
    }

    #[test]
    fn bad_assignments() {
        let ucp = assign_utilities(&net(&[2, 2], &[])).unwrap();
        assert!(matches!(outcome_utility(&ucp, &[0]), Err(Error::Assignment(_))));
        assert!(matches!(outcome_utility(&ucp, &[0, 2]), Err(Error::Assignment(_))));
    }

    #[test]
    fn degenerate_utility() {
        let ucp = assign_utilities(&net(&[1, 1], &[(0, 1)])).unwrap();
        assert_eq!(ucp.max_total_utility(), 0.0);
        assert!(matches!(term_importance(&ucp, &[0, 0]), Err(Error::DegenerateUtility)));
    }

    #[test]
    fn single_value_nodes_are_exempt() {
        let ucp = assign_utilities(&net(&[1, 3], &[(0, 1)])).unwrap();
        assert_eq!(
            ucp.spans()[0],
            Spans {
                minspan: 0.0,
                maxspan: 0.0
            }
        );
        assert!(check_dominance(&ucp).is_ok());
    }

    #[test]
    fn membership_scale_mode() {
        let ucp = assign_utilities_with(&net(&[2, 3], &[(0, 1)]), UtilityMode::MembershipScale).unwrap();
        assert_eq!(ucp.utilities()[1].rows[0], vec![1.0, 0.5, 0.0]);
        assert_eq!(ucp.utilities()[0].rows[0], vec![1.0, 0.0]);
        // 1 < 1 is false, so this particular net still satisfies dominance
        assert!(check_dominance(&ucp).is_ok());
        let deeper = assign_utilities_with(&net(&[2, 3, 2], &[(0, 1), (0, 2)]), UtilityMode::MembershipScale).unwrap();
        assert!(!check_dominance(&deeper).is_ok());
    }

    #[test]
    fn overflow_is_reported() {
        let domains = vec![4; 40];
        let edges: Vec<_> = (0..39).map(|i| (i, i + 1)).collect();
        assert!(matches!(
            assign_utilities(&net(&domains, &edges)),
            Err(Error::UtilityOverflow)
        ));
    }

    #[test]
    fn best_outcomes_small() {
        let ucp = assign_utilities(&net(&[2, 2, 2], &[(0, 1), (1, 2)])).unwrap();
        let top = best_outcomes(&ucp, 3);
        let got: Vec<_> = top.iter().map(|o| (o.assignment.clone(), o.utility)).collect();
        // utilities: A 0/1, B 0/1, C 0/1 → ties broken lexicographically
        assert_eq!(
            got,
            vec![(vec![0, 0, 0], 3.0), (vec![0, 0, 1], 2.0), (vec![0, 1, 0], 2.0)]
        );
        assert!(best_outcomes(&ucp, 0).is_empty());
        assert_eq!(best_outcomes(&ucp, 100).len(), 8);
    }
}
