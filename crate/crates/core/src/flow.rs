//! Trust-constrained multipath flow allocation.
//!
//! Each source splits its traffic over admissible paths to maximise
//! `sum log(1 + r) + mu * sum -(r/T) log(r/T)` subject to link capacities.
//! [`solve_distributed`] decomposes the problem through per-link prices and
//! a diminishing-step subgradient method; [`solve_centralized_reference`]
//! solves the same primal with a log-barrier Newton method and serves as the
//! oracle for it.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::{path_trust, NodeId, Path, PathSet, RoutingMatrix, Topology, TrustMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("negative rate {0}")]
    NegativeRate(f64),
    #[error("diversity utility needs positive path trust, got {0}")]
    ZeroTrust(f64),
    #[error("path link {0} -> {1} is missing from the problem")]
    UnknownLink(NodeId, NodeId),
    #[error("capacity must be finite and nonnegative, got {0}")]
    BadCapacity(f64),
    #[error("rate and trust vectors differ in length")]
    LengthMismatch,
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Per-source utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `sum log(1 + r)`, optionally plus `mu` times the diversity term.
    Throughput { mu: f64 },
    /// Only the diversity term `sum -(r/T) log(r/T)`.
    Diversity,
}

impl Default for Utility {
    fn default() -> Self {
        Utility::Throughput { mu: 0.0 }
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `sum log(1 + r)` over the source's paths.
pub fn utility_throughput(rates: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &r in rates {
        if r < 0.0 {
            return Err(FlowError::NegativeRate(r));
        }
        total += r.ln_1p();
    }
    Ok(total)
}

/// `sum -(r/T) log(r/T)` with `0 log 0 = 0`.
pub fn utility_diversity(rates: &[f64], trusts: &[f64]) -> Result<f64> {
    if rates.len() != trusts.len() {
        return Err(FlowError::LengthMismatch);
    }
    let mut total = 0.0;
    for (&r, &t) in rates.iter().zip(trusts) {
        if r < 0.0 {
            return Err(FlowError::NegativeRate(r));
        }
        if r == 0.0 {
            continue;
        }
        if t <= 0.0 {
            return Err(FlowError::ZeroTrust(t));
        }
        total -= xlogx(r / t);
    }
    Ok(total)
}

impl Utility {
    pub fn value(&self, rates: &[f64], trusts: &[f64]) -> Result<f64> {
        match *self {
            Utility::Throughput { mu: 0.0 } => utility_throughput(rates),
            Utility::Throughput { mu } => {
                Ok(utility_throughput(rates)? + mu * utility_diversity(rates, trusts)?)
            }
            Utility::Diversity => utility_diversity(rates, trusts),
        }
    }

    fn weights(&self) -> (f64, f64) {
        match *self {
            Utility::Throughput { mu } => (1.0, mu),
            Utility::Diversity => (0.0, 1.0),
        }
    }

    /// Derivative of the single-path term at `r > 0`.
    pub fn marginal(&self, r: f64, trust: f64) -> f64 {
        let (w1, w2) = self.weights();
        let mut d = w1 / (1.0 + r);
        if w2 > 0.0 {
            d -= w2 / trust * ((r / trust).ln() + 1.0);
        }
        d
    }

    fn curvature(&self, r: f64, trust: f64) -> f64 {
        let (w1, w2) = self.weights();
        let mut h = -w1 / ((1.0 + r) * (1.0 + r));
        if w2 > 0.0 {
            h -= w2 / (trust * r);
        }
        h
    }

    fn term(&self, r: f64, trust: f64) -> f64 {
        let (w1, w2) = self.weights();
        let mut v = w1 * r.ln_1p();
        if w2 > 0.0 && r > 0.0 {
            v -= w2 * xlogx(r / trust);
        }
        v
    }
}

/// One source's admissible paths mapped onto problem link indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDemand {
    pub source: NodeId,
    pub destination: NodeId,
    pub paths: Vec<Path>,
    pub path_links: Vec<Vec<usize>>,
    pub trusts: Vec<f64>,
    pub utility: Utility,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AllocationProblem {
    pub links: Vec<(NodeId, NodeId)>,
    pub capacities: Vec<f64>,
    pub sources: Vec<SourceDemand>,
    pub tau_t: f64,
    pub tau_s: f64,
}

impl AllocationProblem {
    /// Problem over the links used by the given (already admissible) path
    /// sets, with capacities read from `topo`.
    pub fn from_path_sets(
        topo: &Topology,
        sets: &[(PathSet, Utility)],
        trust: &TrustMap,
        tau_t: f64,
        tau_s: f64,
    ) -> Result<Self> {
        let mut problem = AllocationProblem {
            tau_t,
            tau_s,
            ..Default::default()
        };
        let mut index: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
        for (set, _) in sets {
            for path in &set.paths {
                for (a, b) in path.links() {
                    if let Entry::Vacant(e) = index.entry((a, b)) {
                        let c = topo.capacity(a, b).ok_or(FlowError::UnknownLink(a, b))?;
                        e.insert(problem.links.len());
                        problem.links.push((a, b));
                        problem.capacities.push(c);
                    }
                }
            }
        }
        for (set, utility) in sets {
            let trusts = set
                .paths
                .iter()
                .map(|p| path_trust(p, trust))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            problem.push_source(set, trusts, *utility, &index)?;
        }
        Ok(problem)
    }

    /// Problem over an explicit link list; each path must only use those links.
    pub fn with_links(links: Vec<(NodeId, NodeId)>, capacities: Vec<f64>) -> Result<Self> {
        if links.len() != capacities.len() {
            return Err(FlowError::LengthMismatch);
        }
        if let Some(&c) = capacities.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(FlowError::BadCapacity(c));
        }
        Ok(AllocationProblem {
            links,
            capacities,
            ..Default::default()
        })
    }

    pub fn add_source(&mut self, set: &PathSet, trusts: Vec<f64>, utility: Utility) -> Result<()> {
        let index: BTreeMap<(NodeId, NodeId), usize> = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (*l, i))
            .collect();
        self.push_source(set, trusts, utility, &index)
    }

    fn push_source(
        &mut self,
        set: &PathSet,
        trusts: Vec<f64>,
        utility: Utility,
        index: &BTreeMap<(NodeId, NodeId), usize>,
    ) -> Result<()> {
        if trusts.len() != set.paths.len() {
            return Err(FlowError::LengthMismatch);
        }
        let (_, w2) = utility.weights();
        if w2 > 0.0 {
            if let Some(&t) = trusts.iter().find(|t| **t <= 0.0) {
                return Err(FlowError::ZeroTrust(t));
            }
        }
        let path_links = set
            .paths
            .iter()
            .map(|p| {
                p.links()
                    .map(|l| {
                        index
                            .get(&l)
                            .copied()
                            .ok_or(FlowError::UnknownLink(l.0, l.1))
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        self.sources.push(SourceDemand {
            source: set.source,
            destination: set.destination,
            paths: set.paths.clone(),
            path_links,
            trusts,
            utility,
        });
        Ok(())
    }

    pub fn path_count(&self) -> usize {
        self.sources.iter().map(|s| s.paths.len()).sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.iter().sum()
    }

    /// Routing matrix `W_s` of one source over the problem's links.
    pub fn routing_matrix(&self, source: usize) -> RoutingMatrix {
        let s = &self.sources[source];
        let mut entries = vec![vec![0u8; s.paths.len()]; self.links.len()];
        for (col, links) in s.path_links.iter().enumerate() {
            for &l in links {
                entries[l][col] = 1;
            }
        }
        RoutingMatrix {
            links: self.links.clone(),
            entries,
        }
    }

    pub fn objective(&self, alloc: &FlowAllocation) -> f64 {
        self.sources
            .iter()
            .zip(&alloc.rates)
            .map(|(s, r)| {
                r.iter()
                    .zip(&s.trusts)
                    .map(|(&x, &t)| s.utility.term(x, t))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn link_loads(&self, alloc: &FlowAllocation) -> Vec<f64> {
        let mut load = vec![0.0; self.links.len()];
        for (s, rates) in self.sources.iter().zip(&alloc.rates) {
            for (links, &r) in s.path_links.iter().zip(rates) {
                for &l in links {
                    load[l] += r;
                }
            }
        }
        load
    }

    /// Largest capacity violation, 0 when feasible.
    pub fn max_violation(&self, alloc: &FlowAllocation) -> f64 {
        self.link_loads(alloc)
            .iter()
            .zip(&self.capacities)
            .map(|(l, c)| (l - c).max(0.0))
            .fold(0.0, f64::max)
    }

    fn zero_allocation(&self) -> FlowAllocation {
        FlowAllocation {
            rates: self
                .sources
                .iter()
                .map(|s| vec![0.0; s.paths.len()])
                .collect(),
        }
    }
}

/// Rates per source per path, in the order of the problem's sources.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAllocation {
    pub rates: Vec<Vec<f64>>,
}

impl FlowAllocation {
    pub fn source_rate(&self, source: usize) -> f64 {
        self.rates[source].iter().sum()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().flatten().sum()
    }
}

/// Maximises `U(r) - q . r` over `0 <= r <= rate_cap`, path by path.
/// `q[p]` is the sum of link prices along path `p`.
pub fn per_source_best_response(
    trusts: &[f64],
    q: &[f64],
    utility: Utility,
    rate_cap: f64,
) -> Vec<f64> {
    trusts
        .iter()
        .zip(q)
        .map(|(&t, &price)| best_response_path(t, price, utility, rate_cap))
        .collect()
}

fn best_response_path(trust: f64, price: f64, utility: Utility, rate_cap: f64) -> f64 {
    if rate_cap <= 0.0 {
        return 0.0;
    }
    match utility {
        Utility::Throughput { mu: 0.0 } => {
            if price <= 0.0 {
                rate_cap
            } else {
                (1.0 / price - 1.0).clamp(0.0, rate_cap)
            }
        }
        Utility::Diversity => (trust * (-(1.0 + price * trust)).exp()).min(rate_cap),
        Utility::Throughput { .. } => {
            // marginal is strictly decreasing and +inf at 0
            if utility.marginal(rate_cap, trust) - price >= 0.0 {
                return rate_cap;
            }
            let (mut lo, mut hi) = (0.0, rate_cap);
            while hi - lo > 1e-10 * (1.0 + hi) {
                let mid = 0.5 * (lo + hi);
                if utility.marginal(mid, trust) - price > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub iteration: usize,
    pub step_scale: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
}

impl DualState {
    pub fn new(lambda: Vec<f64>, step_scale: f64) -> Self {
        DualState {
            lambda,
            iteration: 1,
            step_scale,
            dual_value: f64::INFINITY,
            primal_residual: f64::INFINITY,
        }
    }

    /// Starting prices `1 / (1 + c_l)`: the price at which a single
    /// throughput path saturates link `l` on its own.
    pub fn warm_start(capacities: &[f64], step_scale: f64) -> Self {
        Self::new(
            capacities.iter().map(|c| 1.0 / (1.0 + c)).collect(),
            step_scale,
        )
    }
}

/// `lambda_l <- max(0, lambda_l - (t0 / t) (c_l - load_l))`.
pub fn subgradient_step(dual: &DualState, loads: &[f64], capacities: &[f64]) -> DualState {
    let step = dual.step_scale / dual.iteration as f64;
    let lambda = dual
        .lambda
        .iter()
        .zip(capacities.iter().zip(loads))
        .map(|(l, (c, load))| (l - step * (c - load)).max(0.0))
        .collect();
    DualState {
        lambda,
        iteration: dual.iteration + 1,
        step_scale: dual.step_scale,
        dual_value: dual.dual_value,
        primal_residual: dual.primal_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub t0: f64,
    /// `None` means 10x the problem's total capacity.
    pub rate_cap: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 5000,
            tol: 1e-6,
            t0: 1.0,
            rate_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub source_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedSolution {
    pub allocation: FlowAllocation,
    pub dual: DualState,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

fn prices(problem: &AllocationProblem, lambda: &[f64]) -> Vec<Vec<f64>> {
    problem
        .sources
        .iter()
        .map(|s| {
            s.path_links
                .iter()
                .map(|links| links.iter().map(|&l| lambda[l]).sum())
                .collect()
        })
        .collect()
}

/// Best responses at `lambda` and the dual function value `g(lambda)`. Each
/// path's rate is capped at its bottleneck capacity, which no feasible
/// allocation exceeds, so `g` still bounds every feasible objective.
pub fn dual_evaluate(
    problem: &AllocationProblem,
    lambda: &[f64],
    rate_cap: f64,
) -> (FlowAllocation, f64) {
    let q = prices(problem, lambda);
    let mut value: f64 = lambda
        .iter()
        .zip(&problem.capacities)
        .map(|(l, c)| l * c)
        .sum();
    let mut rates = Vec::with_capacity(problem.sources.len());
    for (s, qs) in problem.sources.iter().zip(&q) {
        // no feasible allocation puts more than the bottleneck capacity on a path
        let r: Vec<f64> = s
            .path_links
            .iter()
            .zip(&s.trusts)
            .zip(qs)
            .map(|((links, &t), &p)| {
                let cap = links
                    .iter()
                    .map(|&l| problem.capacities[l])
                    .fold(rate_cap, f64::min);
                best_response_path(t, p, s.utility, cap)
            })
            .collect();
        for ((&x, &t), &p) in r.iter().zip(&s.trusts).zip(qs) {
            value += s.utility.term(x, t) - p * x;
        }
        rates.push(r);
    }
    (FlowAllocation { rates }, value)
}

/// Scales down every path crossing an oversubscribed link, worst link first,
/// until all loads fit.
pub fn repair_feasibility(problem: &AllocationProblem, alloc: &mut FlowAllocation) {
    for _ in 0..=problem.links.len() * 4 {
        let loads = problem.link_loads(alloc);
        let worst = loads
            .iter()
            .zip(&problem.capacities)
            .enumerate()
            .filter(|(_, (load, c))| **load > **c)
            .map(|(l, (load, c))| (l, if *c > 0.0 { load / c } else { f64::INFINITY }))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((link, _)) = worst else {
            return;
        };
        let factor = if loads[link] > 0.0 {
            problem.capacities[link] / loads[link]
        } else {
            0.0
        };
        for (s, rates) in problem.sources.iter().zip(alloc.rates.iter_mut()) {
            for (links, r) in s.path_links.iter().zip(rates.iter_mut()) {
                if links.contains(&link) {
                    *r *= factor;
                }
            }
        }
    }
}

/// Dual decomposition: per-source best responses against link prices, then
/// a projected subgradient step on the prices.
pub fn solve_distributed(problem: &AllocationProblem, opts: &SolverOptions) -> DistributedSolution {
    let rate_cap = opts.rate_cap.unwrap_or(10.0 * problem.total_capacity());
    let mut dual = DualState::warm_start(&problem.capacities, opts.t0);
    if problem.path_count() == 0 {
        dual.lambda.iter_mut().for_each(|l| *l = 0.0);
        dual.dual_value = 0.0;
        dual.primal_residual = 0.0;
        return DistributedSolution {
            allocation: problem.zero_allocation(),
            dual,
            trace: Vec::new(),
            converged: true,
        };
    }
    let mut trace = Vec::new();
    let mut previous_value = f64::INFINITY;
    let mut converged = false;
    let mut alloc;
    loop {
        let (a, value) = dual_evaluate(problem, &dual.lambda, rate_cap);
        alloc = a;
        let loads = problem.link_loads(&alloc);
        let residual = loads
            .iter()
            .zip(&problem.capacities)
            .map(|(l, c)| (l - c).max(0.0))
            .fold(0.0, f64::max);
        dual.dual_value = value;
        dual.primal_residual = residual;
        trace.push(TraceRow {
            iteration: dual.iteration,
            dual_value: value,
            primal_residual: residual,
            source_rates: (0..problem.sources.len())
                .map(|s| alloc.source_rate(s))
                .collect(),
        });
        if residual < opts.tol && (value - previous_value).abs() < opts.tol {
            converged = true;
            break;
        }
        if dual.iteration >= opts.max_iter {
            break;
        }
        previous_value = value;
        dual = subgradient_step(&dual, &loads, &problem.capacities);
    }
    repair_feasibility(problem, &mut alloc);
    DistributedSolution {
        allocation: alloc,
        dual,
        trace,
        converged,
    }
}

/// Centralised oracle: log-barrier method with Newton steps on the primal.
/// Paths crossing a zero-capacity link are pinned at 0. The returned
/// allocation is strictly feasible and its objective is within `tol` of the
/// optimum (barrier duality gap).
pub fn solve_centralized_reference(problem: &AllocationProblem, tol: f64) -> FlowAllocation {
    let mut alloc = problem.zero_allocation();
    // flatten the free variables
    let mut vars: Vec<(usize, usize)> = Vec::new();
    for (s, demand) in problem.sources.iter().enumerate() {
        for (p, links) in demand.path_links.iter().enumerate() {
            if links.iter().all(|&l| problem.capacities[l] > 0.0) {
                vars.push((s, p));
            }
        }
    }
    if vars.is_empty() {
        return alloc;
    }
    let used: Vec<usize> = {
        let mut v: Vec<usize> = vars
            .iter()
            .flat_map(|&(s, p)| problem.sources[s].path_links[p].iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let nv = vars.len();
    let nc = used.len();
    let mut a = DMatrix::<f64>::zeros(nc, nv);
    for (j, &(s, p)) in vars.iter().enumerate() {
        for &l in &problem.sources[s].path_links[p] {
            let row = used.binary_search(&l).expect("link collected above");
            a[(row, j)] = 1.0;
        }
    }
    let cap = DVector::from_iterator(nc, used.iter().map(|&l| problem.capacities[l]));
    let crossing = (0..nc).map(|i| a.row(i).sum()).fold(1.0, f64::max);
    let start = cap.min() / (2.0 * crossing);
    let mut x = DVector::from_element(nv, start);

    let utility = |j: usize| {
        let (s, p) = vars[j];
        (problem.sources[s].utility, problem.sources[s].trusts[p])
    };
    let barrier_value = |x: &DVector<f64>, t: f64| -> f64 {
        let slack = &cap - &a * x;
        if x.iter().any(|&v| v <= 0.0) || slack.iter().any(|&v| v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let u: f64 = (0..nv)
            .map(|j| {
                let (ut, tr) = utility(j);
                ut.term(x[j], tr)
            })
            .sum();
        t * u + x.iter().map(|v| v.ln()).sum::<f64>() + slack.iter().map(|v| v.ln()).sum::<f64>()
    };

    let m = (nv + nc) as f64;
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let slack = &cap - &a * &x;
            let inv_slack = slack.map(|v| 1.0 / v);
            let mut grad = DVector::zeros(nv);
            let mut hess = DMatrix::zeros(nv, nv);
            for j in 0..nv {
                let (ut, tr) = utility(j);
                grad[j] = t * ut.marginal(x[j], tr) + 1.0 / x[j];
                hess[(j, j)] = t * ut.curvature(x[j], tr) - 1.0 / (x[j] * x[j]);
            }
            grad -= a.transpose() * &inv_slack;
            let d2 = DMatrix::from_diagonal(&inv_slack.map(|v| v * v));
            hess -= a.transpose() * d2 * &a;
            let neg = -hess;
            let Some(chol) = neg.cholesky() else {
                break;
            };
            let step = chol.solve(&grad);
            let decrement = grad.dot(&step);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let f0 = barrier_value(&x, t);
            let mut s = 1.0;
            loop {
                let cand = &x + &step * s;
                if barrier_value(&cand, t) >= f0 + 0.25 * s * decrement {
                    x = cand;
                    break;
                }
                s *= 0.5;
                if s < 1e-16 {
                    break;
                }
            }
            if s < 1e-16 {
                break;
            }
        }
        if m / t < tol {
            break;
        }
        t *= 8.0;
    }
    for (j, &(s, p)) in vars.iter().enumerate() {
        alloc.rates[s][p] = x[j].max(0.0);
    }
    alloc
}
