//! Random generators and independent reference implementations shared by the
//! integration suites. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fuzzy_prefs::cpnet::{CpNet, CptRow, PreferenceVariable};
use fuzzy_prefs::ucp::UcpNet;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct NetShape {
    pub max_nodes: usize,
    pub min_domain: usize,
    pub max_domain: usize,
    pub edge_prob: f64,
    pub max_parents: usize,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape {
            max_nodes: 8,
            min_domain: 1,
            max_domain: 4,
            edge_prob: 0.35,
            max_parents: 3,
        }
    }
}

/// Random acyclic net. Declaration order is unrelated to the hidden
/// topological order, parent lists are shuffled and every table row is a
/// random permutation.
pub fn random_net<R: Rng>(rng: &mut R, shape: &NetShape) -> CpNet {
    let n = rng.gen_range(1..=shape.max_nodes);
    let domains: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(shape.min_domain..=shape.max_domain))
        .collect();
    let mut topo: Vec<usize> = (0..n).collect();
    topo.shuffle(rng);

    let mut parents = vec![Vec::new(); n];
    for b in 1..n {
        for a in 0..b {
            if parents[topo[b]].len() < shape.max_parents && rng.gen_bool(shape.edge_prob) {
                parents[topo[b]].push(topo[a]);
            }
        }
        parents[topo[b]].shuffle(rng);
    }
    net_with(rng, &domains, parents)
}

/// Fills random tables for the given structure.
pub fn net_with<R: Rng>(rng: &mut R, domains: &[usize], parents: Vec<Vec<usize>>) -> CpNet {
    let nodes = domains
        .iter()
        .enumerate()
        .map(|(i, &k)| PreferenceVariable {
            name: format!("n{i}"),
            domain: (0..k).map(|v| format!("v{v}")).collect(),
        })
        .collect();
    let cpt = parents
        .iter()
        .enumerate()
        .map(|(i, ps)| {
            let radices: Vec<usize> = ps.iter().map(|&p| domains[p]).collect();
            let mut rows: Vec<CptRow> = product(&radices)
                .into_iter()
                .map(|context| {
                    let mut order: Vec<usize> = (0..domains[i]).collect();
                    order.shuffle(rng);
                    CptRow { context, order }
                })
                .collect();
            rows.shuffle(rng);
            rows
        })
        .collect();
    CpNet::new(nodes, parents, cpt)
}

/// Every combination of digits below `radices`, first digit most significant.
pub fn product(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..r).map(move |d| {
                    let mut next = prefix.clone();
                    next.push(d);
                    next
                })
            })
            .collect();
    }
    out
}

pub fn edges_of(parents: &[Vec<usize>]) -> Vec<(usize, usize)> {
    parents
        .iter()
        .enumerate()
        .flat_map(|(child, ps)| ps.iter().map(move |&p| (p, child)))
        .collect()
}

/// 1 + number of edges on the longest path from each node down to a sink.
pub fn longest_path_importance(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    fn depth(x: usize, edges: &[(usize, usize)]) -> u32 {
        edges
            .iter()
            .filter(|&&(a, _)| a == x)
            .map(|&(_, b)| 1 + depth(b, edges))
            .max()
            .unwrap_or(0)
    }
    (0..n).map(|x| 1 + depth(x, edges)).collect()
}

/// Whether a structure with possibly broken tables is a well-formed CP-Net,
/// checked naively: names, domains, parents, acyclicity by repeated sink
/// removal, and a total order for every parent context.
pub fn brute_force_valid(
    names: &[String],
    domains: &[Vec<String>],
    parents: &[Vec<usize>],
    cpt: &[Vec<CptRow>],
) -> bool {
    let n = names.len();
    if names.iter().collect::<BTreeSet<_>>().len() != n || cpt.len() != n || parents.len() != n {
        return false;
    }
    for i in 0..n {
        if domains[i].is_empty() || domains[i].iter().collect::<BTreeSet<_>>().len() != domains[i].len() {
            return false;
        }
        if parents[i].iter().any(|&p| p >= n) || parents[i].iter().collect::<BTreeSet<_>>().len() != parents[i].len() {
            return false;
        }
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    loop {
        let sink = alive
            .iter()
            .copied()
            .find(|&x| !alive.iter().any(|&c| c != x && parents[c].contains(&x)) && !parents[x].contains(&x));
        match sink {
            Some(x) => {
                alive.remove(&x);
            }
            None => break,
        }
    }
    if !alive.is_empty() {
        return false;
    }
    for i in 0..n {
        let radices: Vec<usize> = parents[i].iter().map(|&p| domains[p].len()).collect();
        let wanted: BTreeSet<Vec<usize>> = product(&radices).into_iter().collect();
        let mut seen = BTreeSet::new();
        for row in &cpt[i] {
            if row.context.len() != radices.len() || row.context.iter().zip(&radices).any(|(v, r)| v >= r) {
                return false;
            }
            if !seen.insert(row.context.clone()) {
                return false;
            }
            let mut sorted = row.order.clone();
            sorted.sort();
            if sorted != (0..domains[i].len()).collect::<Vec<_>>() {
                return false;
            }
        }
        if seen != wanted {
            return false;
        }
    }
    true
}

/// Utility table entry for `node` under `assignment`, addressing rows with a
/// locally computed mixed-radix index.
pub fn factor_oracle(ucp: &UcpNet, node: usize, assignment: &[usize]) -> f64 {
    let net = ucp.net();
    let mut index = 0;
    for &p in net.parents(node) {
        index = index * net.nodes()[p].domain.len() + assignment[p];
    }
    ucp.utilities()[node].rows[index][assignment[node]]
}

pub fn utility_oracle(ucp: &UcpNet, assignment: &[usize]) -> f64 {
    (0..ucp.net().len()).map(|i| factor_oracle(ucp, i, assignment)).sum()
}

/// All outcomes, indexed by node, in no particular order.
pub fn all_outcomes(net: &CpNet) -> Vec<Vec<usize>> {
    let radices: Vec<usize> = net.nodes().iter().map(|n| n.domain.len()).collect();
    product(&radices)
}

/// The `t` best outcomes by brute force: utility descending, then the
/// assignment read in topological order ascending.
pub fn brute_force_top(ucp: &UcpNet, topo: &[usize], t: usize) -> Vec<(Vec<usize>, f64)> {
    let mut scored: Vec<(Vec<usize>, f64)> = all_outcomes(ucp.net())
        .into_iter()
        .map(|a| {
            let u = utility_oracle(ucp, &a);
            (a, u)
        })
        .collect();
    let key = |a: &[usize]| topo.iter().map(|&i| a[i]).collect::<Vec<_>>();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| key(&x.0).cmp(&key(&y.0))));
    scored.truncate(t);
    scored
}

/// Table contents keyed by labels, so nets that differ only in how domains
/// are ordered compare equal.
pub type LabelTables = BTreeMap<(String, Vec<(String, String)>), Vec<String>>;

pub fn label_tables(net: &CpNet) -> LabelTables {
    let mut out = BTreeMap::new();
    for i in 0..net.len() {
        let node = &net.nodes()[i];
        for row in net.table(i) {
            let context = net
                .parents(i)
                .iter()
                .zip(&row.context)
                .map(|(&p, &v)| (net.nodes()[p].name.clone(), net.nodes()[p].domain[v].clone()))
                .collect();
            let order = row.order.iter().map(|&v| node.domain[v].clone()).collect();
            out.insert((node.name.clone(), context), order);
        }
    }
    out
}

/// DSL source for `net`, binding node `i` to attribute `a{i}`, with random
/// layout noise (spacing, comments, blank lines).
pub fn render_program<R: Rng>(rng: &mut R, net: &CpNet, terms: Option<usize>) -> String {
    let pad = |rng: &mut R| -> &'static str { [" ", "  ", "\t", " "][rng.gen_range(0..4)] };
    let mut out = String::new();
    if rng.gen_bool(0.3) {
        out.push_str("# generated program\n");
    }
    for i in 0..net.len() {
        let node = &net.nodes()[i];
        out.push_str(&format!("var {}{}:{}attr a{i} {{\n", node.name, pad(rng), pad(rng)));
        let ps = net.parents(i);
        if !ps.is_empty() {
            let names: Vec<&str> = ps.iter().map(|&p| net.nodes()[p].name.as_str()).collect();
            out.push_str(&format!("  depends {}\n", names.join(&format!(",{}", pad(rng)))));
        }
        for row in net.table(i) {
            out.push_str("  ");
            if !ps.is_empty() {
                let conds: Vec<String> = ps
                    .iter()
                    .zip(&row.context)
                    .map(|(&p, &v)| format!("{} = {}", net.nodes()[p].name, net.nodes()[p].domain[v]))
                    .collect();
                out.push_str(&format!("when {}{}: ", conds.join(", "), pad(rng)));
            }
            let order: Vec<&str> = row.order.iter().map(|&v| node.domain[v].as_str()).collect();
            out.push_str(&format!("prefer {}", order.join(" > ")));
            if rng.gen_bool(0.2) {
                out.push_str("  # row");
            }
            out.push('\n');
        }
        out.push_str("}\n");
        if rng.gen_bool(0.5) {
            out.push('\n');
        }
    }
    if let Some(t) = terms {
        out.push_str(&format!("terms {t}\n"));
    }
    out
}

/// Independent fuzzy c-means: evenly spaced start between min and max,
/// textbook updates, crisp membership on coincident points.
pub fn reference_fcm(values: &[f64], c: usize, m: f64, tol: f64, max_iter: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = (0..c).map(|j| lo + (hi - lo) * (j as f64 + 0.5) / c as f64).collect();
    let exponent = 2.0 / (m - 1.0);
    let memberships = |v: &[f64]| -> Vec<Vec<f64>> {
        values
            .iter()
            .map(|&x| {
                if let Some(hit) = v.iter().position(|&vj| vj == x) {
                    return (0..c).map(|j| if j == hit { 1.0 } else { 0.0 }).collect();
                }
                (0..c)
                    .map(|j| {
                        let dj = (x - v[j]).abs();
                        1.0 / (0..c).map(|k| (dj / (x - v[k]).abs()).powf(exponent)).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    };
    for _ in 0..max_iter {
        let u = memberships(&v);
        let next: Vec<f64> = (0..c)
            .map(|j| {
                let w: Vec<f64> = u.iter().map(|row| row[j].powf(m)).collect();
                w.iter().zip(values).map(|(w, x)| w * x).sum::<f64>() / w.iter().sum::<f64>()
            })
            .collect();
        let moved = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if moved < tol {
            break;
        }
    }
    v.sort_by(f64::total_cmp);
    let u = memberships(&v);
    (v, u)
}

/// Small table of `records` rows over attributes `a0..a{attrs}`.
pub fn random_table<R: Rng>(rng: &mut R, attrs: usize, records: usize) -> Vec<Vec<f64>> {
    (0..records)
        .map(|_| {
            (0..attrs)
                .map(|_| (rng.gen_range(0.0..100.0f64) * 4.0).round() / 4.0)
                .collect()
        })
        .collect()
}

/// Knowledge base over attributes `a0..a{attrs}` with `clusters` regions
/// labelled `v0..`, so any generated variable with a domain of at most
/// `clusters` values binds to its own attribute.
pub fn fixture_kb(attrs: usize, clusters: usize, seed: u64) -> fuzzy_prefs::kb::KnowledgeBase {
    use fuzzy_prefs::kb::{build_knowledge_base, Dataset, KbConfig};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let table = random_table(&mut rng, attrs, 40);
    let attributes: Vec<String> = (0..attrs).map(|i| format!("a{i}")).collect();
    let records = table.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    let dataset = Dataset::new(attributes, records).unwrap();
    let config = KbConfig {
        default_clusters: clusters,
        default_labels: Some((0..clusters).map(|j| format!("v{j}")).collect()),
        seed,
        ..KbConfig::default()
    };
    build_knowledge_base(&dataset, &config).unwrap()
}

/// Binds node `i` of `net` to attribute `a{i}`.
pub fn fixture_bindings(net: &CpNet) -> Vec<fuzzy_prefs::query::Binding> {
    net.nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| fuzzy_prefs::query::Binding {
            variable: n.name.clone(),
            attribute: format!("a{i}"),
        })
        .collect()
}
