//! Identity spoofing metric.
//!
//! `ISM(i, j) = 1 - prod_{r in R_j} (1 - T_ir * ISM(i, r))`: the probability
//! that at least one voucher for `j` is both trustworthy and genuine, seeded
//! with the identities `i` verified out of band.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::network::{NodeId, Path};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsmError {
    #[error("observer {0} has no verified seed identities")]
    NoSeeds(NodeId),
    #[error("node {0} cannot vouch for itself")]
    SelfVouch(NodeId),
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("no ISM value for node {subject} as seen by {observer}")]
    Missing { observer: NodeId, subject: NodeId },
}

pub type Result<T> = std::result::Result<T, IsmError>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoucherGraph {
    nodes: BTreeSet<NodeId>,
    vouchers: BTreeMap<NodeId, BTreeSet<NodeId>>,
    seeds: BTreeMap<NodeId, BTreeSet<NodeId>>,
    trust: BTreeMap<(NodeId, NodeId), f64>,
}

impl VoucherGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId) {
        self.nodes.insert(id);
    }

    pub fn add_voucher(&mut self, subject: NodeId, voucher: NodeId) -> Result<()> {
        if subject == voucher {
            return Err(IsmError::SelfVouch(subject));
        }
        self.nodes.insert(subject);
        self.nodes.insert(voucher);
        self.vouchers.entry(subject).or_default().insert(voucher);
        Ok(())
    }

    pub fn add_seed(&mut self, observer: NodeId, verified: NodeId) {
        self.nodes.insert(observer);
        self.nodes.insert(verified);
        self.seeds.entry(observer).or_default().insert(verified);
    }

    pub fn set_trust(&mut self, observer: NodeId, subject: NodeId, value: f64) {
        self.trust
            .insert((observer, subject), value.clamp(0.0, 1.0));
    }

    pub fn vouchers(&self, subject: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.vouchers.get(&subject).into_iter().flatten().copied()
    }

    pub fn seeds(&self, observer: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.seeds.get(&observer).into_iter().flatten().copied()
    }

    pub fn observers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.seeds.keys().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    /// Combined trust of `observer` in `subject`; unknown pairs are 0 and
    /// self-trust is 1.
    pub fn trust(&self, observer: NodeId, subject: NodeId) -> f64 {
        if observer == subject {
            1.0
        } else {
            self.trust.get(&(observer, subject)).copied().unwrap_or(0.0)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsmMap {
    values: BTreeMap<(NodeId, NodeId), f64>,
    pub iterations: usize,
}

impl IsmMap {
    pub fn get(&self, observer: NodeId, subject: NodeId) -> Option<f64> {
        self.values.get(&(observer, subject)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn merge(&mut self, other: IsmMap) {
        self.values.extend(other.values);
        self.iterations = self.iterations.max(other.iterations);
    }

    pub fn insert(&mut self, observer: NodeId, subject: NodeId, value: f64) {
        self.values.insert((observer, subject), value);
    }
}

/// Fixed-point iteration from seeds = 1, everything else 0. Each sweep
/// updates in place (Gauss-Seidel), which keeps the sequence monotone and
/// lands on the least fixed point above the seed assignment.
pub fn compute_ism(
    graph: &VoucherGraph,
    observer: NodeId,
    tol: f64,
    max_iter: usize,
) -> Result<IsmMap> {
    if !(tol > 0.0) {
        return Err(IsmError::BadTolerance);
    }
    let seeds: BTreeSet<NodeId> = graph.seeds(observer).collect();
    if seeds.is_empty() {
        return Err(IsmError::NoSeeds(observer));
    }
    let mut nodes: Vec<NodeId> = graph.nodes().collect();
    if !nodes.contains(&observer) {
        nodes.push(observer);
        nodes.sort();
    }
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    let fixed: Vec<bool> = nodes
        .iter()
        .map(|id| seeds.contains(id) || *id == observer)
        .collect();
    let mut value: Vec<f64> = fixed.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let weighted: Vec<Vec<(usize, f64)>> = nodes
        .iter()
        .map(|&j| {
            graph
                .vouchers(j)
                .map(|r| (index[&r], graph.trust(observer, r)))
                .collect()
        })
        .collect();

    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut residual: f64 = 0.0;
        for j in 0..nodes.len() {
            if fixed[j] {
                continue;
            }
            let none_valid: f64 = weighted[j]
                .iter()
                .map(|&(r, t)| 1.0 - t * value[r])
                .product();
            let next = (1.0 - none_valid).clamp(0.0, 1.0);
            residual = residual.max((next - value[j]).abs());
            value[j] = next;
        }
        if residual < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(IsmError::NotConverged {
                iterations,
                residual,
            });
        }
    }
    let mut map = IsmMap {
        values: BTreeMap::new(),
        iterations,
    };
    for (k, id) in nodes.iter().enumerate() {
        map.values.insert((observer, *id), value[k]);
    }
    Ok(map)
}

/// Probability that no intermediate node on the path has a spoofed
/// identity, assuming independence.
pub fn path_spoof_probability(path: &Path, ism: &IsmMap, observer: NodeId) -> Result<f64> {
    path.intermediates()
        .iter()
        .map(|&v| {
            ism.get(observer, v).ok_or(IsmError::Missing {
                observer,
                subject: v,
            })
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn empty_voucher_set_is_zero() {
        let mut g = VoucherGraph::new();
        g.add_seed(n(0), n(1));
        g.add_node(n(5));
        let m = compute_ism(&g, n(0), 1e-12, 100).unwrap();
        assert_eq!(m.get(n(0), n(5)), Some(0.0));
        assert_eq!(m.get(n(0), n(1)), Some(1.0));
        assert_eq!(m.get(n(0), n(0)), Some(1.0));
    }

    #[test]
    fn fully_trusted_seed_voucher_gives_one() {
        let mut g = VoucherGraph::new();
        g.add_seed(n(0), n(1));
        g.add_voucher(n(2), n(1)).unwrap();
        g.add_voucher(n(2), n(3)).unwrap();
        g.set_trust(n(0), n(1), 1.0);
        g.set_trust(n(0), n(3), 0.2);
        let m = compute_ism(&g, n(0), 1e-12, 100).unwrap();
        assert_eq!(m.get(n(0), n(2)), Some(1.0));
    }

    #[test]
    fn two_half_vouchers() {
        let mut g = VoucherGraph::new();
        g.add_seed(n(0), n(1));
        g.add_seed(n(0), n(2));
        g.add_voucher(n(3), n(1)).unwrap();
        g.add_voucher(n(3), n(2)).unwrap();
        g.set_trust(n(0), n(1), 0.5);
        g.set_trust(n(0), n(2), 0.5);
        let m = compute_ism(&g, n(0), 1e-12, 100).unwrap();
        assert!((m.get(n(0), n(3)).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cycle_settles_on_least_fixed_point() {
        // 2 and 3 vouch for each other; only 2 is reachable from the seed
        let mut g = VoucherGraph::new();
        g.add_seed(n(0), n(1));
        g.add_voucher(n(2), n(1)).unwrap();
        g.add_voucher(n(2), n(3)).unwrap();
        g.add_voucher(n(3), n(2)).unwrap();
        for k in 1..4 {
            g.set_trust(n(0), n(k), 0.5);
        }
        let m = compute_ism(&g, n(0), 1e-13, 1000).unwrap();
        let (x2, x3) = (m.get(n(0), n(2)).unwrap(), m.get(n(0), n(3)).unwrap());
        // x2 = 1 - 0.5 * (1 - 0.5 x3), x3 = 0.5 x2
        assert!((x2 - (0.5 + 0.25 * x3)).abs() < 1e-10);
        assert!((x3 - 0.5 * x2).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let mut g = VoucherGraph::new();
        assert_eq!(g.add_voucher(n(1), n(1)), Err(IsmError::SelfVouch(n(1))));
        g.add_node(n(1));
        assert_eq!(
            compute_ism(&g, n(0), 1e-9, 10),
            Err(IsmError::NoSeeds(n(0)))
        );
        g.add_seed(n(0), n(1));
        assert_eq!(compute_ism(&g, n(0), 0.0, 10), Err(IsmError::BadTolerance));
    }

    #[test]
    fn non_convergence_reports_residual() {
        // a long chain needs one sweep per hop only if visited against the
        // chain order; max_iter = 1 cannot confirm convergence
        let mut g = VoucherGraph::new();
        g.add_seed(n(0), n(10));
        for k in 1..10 {
            g.add_voucher(n(k), n(k + 1)).unwrap();
            g.set_trust(n(0), n(k + 1), 0.9);
        }
        assert!(matches!(
            compute_ism(&g, n(0), 1e-9, 1),
            Err(IsmError::NotConverged { iterations: 1, .. })
        ));
        assert!(compute_ism(&g, n(0), 1e-9, 50).is_ok());
    }

    #[test]
    fn path_spoof_examples() {
        let mut m = IsmMap::default();
        m.insert(n(0), n(1), 0.9);
        m.insert(n(0), n(2), 0.8);
        assert_eq!(
            path_spoof_probability(&Path(vec![n(0), n(3)]), &m, n(0)).unwrap(),
            1.0
        );
        assert!(
            (path_spoof_probability(&Path(vec![n(0), n(1), n(3)]), &m, n(0)).unwrap() - 0.9).abs()
                < 1e-12
        );
        let p = path_spoof_probability(&Path(vec![n(0), n(1), n(2), n(3)]), &m, n(0)).unwrap();
        assert!((p - 0.72).abs() < 1e-12);
        assert!(path_spoof_probability(&Path(vec![n(0), n(7), n(3)]), &m, n(0)).is_err());
    }
}
