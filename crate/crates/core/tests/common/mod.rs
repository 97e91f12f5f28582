#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustflow::flow::{
    dual_evaluate, solve_distributed, subgradient_step, AllocationProblem, DualState,
    SolverOptions, Utility,
};
use trustflow::identity::{path_spoof_probability, IsmMap};
use trustflow::network::{
    admissible_paths, discover_paths, path_trust, CapacityModel, Path, PathSet, Position, Topology,
    TrustMap,
};
use trustflow::social::{build_ledger, ContactCounts, WallPostRecord};
use trustflow::trust::{ChannelLossModel, CombinedTrustState, EvidenceRecord};
use trustflow::NodeId;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random geometric graph with up to `max_sources` connected source pairs and
/// their link-disjoint paths. `max_links` bounds the links the paths use.
pub fn random_network(
    rng: &mut ChaCha8Rng,
    max_sources: usize,
    max_links: usize,
) -> (Topology, Vec<PathSet>) {
    loop {
        let n = rng.gen_range(5..=9);
        let positions: Vec<(NodeId, Position)> = (0..n)
            .map(|k| {
                (
                    NodeId(k),
                    Position::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                )
            })
            .collect();
        let topo = Topology::build(&positions, 0.5, &CapacityModel::Constant(1.0)).unwrap();
        let want = rng.gen_range(1..=max_sources);
        let mut sets = Vec::new();
        for _ in 0..want * 4 {
            if sets.len() == want {
                break;
            }
            let s = rng.gen_range(0..n);
            let d = rng.gen_range(0..n);
            if s == d
                || sets
                    .iter()
                    .any(|p: &PathSet| p.source == NodeId(s) && p.destination == NodeId(d))
            {
                continue;
            }
            let found = discover_paths(&topo, NodeId(s), NodeId(d), 3).unwrap();
            if !found.is_empty() {
                sets.push(found);
            }
        }
        let mut links: Vec<(NodeId, NodeId)> = sets
            .iter()
            .flat_map(|s| s.paths.iter().flat_map(|p| p.links()))
            .collect();
        links.sort();
        links.dedup();
        if !sets.is_empty() && links.len() <= max_links {
            return (topo, sets);
        }
    }
}

/// Allocation problem over the links of `sets` with random capacities in
/// [0.5, 5] and random path trusts in [0.3, 1].
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    sets: &[PathSet],
    utility: Utility,
) -> AllocationProblem {
    let mut links: Vec<(NodeId, NodeId)> = sets
        .iter()
        .flat_map(|s| s.paths.iter().flat_map(|p| p.links()))
        .collect();
    links.sort();
    links.dedup();
    let caps = links.iter().map(|_| rng.gen_range(0.5..5.0)).collect();
    let mut problem = AllocationProblem::with_links(links, caps).unwrap();
    for set in sets {
        let trusts = set.paths.iter().map(|_| rng.gen_range(0.3..=1.0)).collect();
        problem.add_source(set, trusts, utility).unwrap();
    }
    problem
}

pub fn solver_options(max_iter: usize) -> SolverOptions {
    SolverOptions {
        max_iter,
        ..SolverOptions::default()
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($fmt)+)));
        }
    };
}

// Triplet closure

pub fn evidence_case() -> impl Strategy<Value = (u64, u64, f64)> {
    (0u64..=500, 0u64..=500, 0.0f64..0.5)
}

pub fn check_triplet_closure((pos, neg, plr): (u64, u64, f64)) -> Result<(), TestCaseError> {
    let ev = EvidenceRecord::from_counts(pos, neg, ChannelLossModel::new(plr).unwrap());
    let o = ev.opinion();
    let sum = o.belief + o.disbelief + o.uncertainty;
    ensure!(
        (sum - 1.0).abs() <= 1e-12,
        "b + d + u = {sum} for counts ({pos}, {neg}), plr {plr}"
    );
    for x in [o.belief, o.disbelief, o.uncertainty] {
        ensure!((0.0..=1.0).contains(&x), "component {x} outside [0, 1]");
    }
    Ok(())
}

// Incremental update against the closed-form MAP estimate

pub fn update_case() -> impl Strategy<Value = (f64, f64, Vec<bool>)> {
    (1.0f64..20.0, 1.0f64..20.0, vec(any::<bool>(), 0..=200))
}

pub fn check_update_rule(
    (alpha, beta, outcomes): (f64, f64, Vec<bool>),
) -> Result<(), TestCaseError> {
    if alpha + beta - 2.0 < 1e-9 {
        return Ok(());
    }
    let mut state = CombinedTrustState::with_prior(alpha, beta).unwrap();
    let mut r = 0.0;
    for (k, &positive) in outcomes.iter().enumerate() {
        state.observe(if positive {
            trustflow::trust::Outcome::Positive
        } else {
            trustflow::trust::Outcome::Negative
        });
        if positive {
            r += 1.0;
        }
        let n = (k + 1) as f64;
        let closed = (r + alpha - 1.0) / (n + alpha + beta - 2.0);
        ensure!(
            (state.value - closed).abs() <= 1e-12,
            "after {} observations: incremental {} vs closed form {closed}",
            k + 1,
            state.value
        );
    }
    Ok(())
}

// Ledger marginals

pub fn ledger_case() -> impl Strategy<Value = Vec<(u8, u8, i64)>> {
    vec((0u8..6, 0u8..6, 0i64..100_000_000), 0..200)
}

pub fn check_ledger_marginals(posts: Vec<(u8, u8, i64)>) -> Result<(), TestCaseError> {
    let records: Vec<WallPostRecord> = posts
        .iter()
        .map(|&(owner, poster, timestamp)| WallPostRecord {
            owner: format!("u{owner}"),
            poster: format!("u{poster}"),
            timestamp,
            content_length: 1,
        })
        .collect();
    let ledger = build_ledger(&records, &ContactCounts::DistinctPartners).unwrap();
    let mut by_poster: BTreeMap<&str, u64> = BTreeMap::new();
    for (i, _, n) in ledger.pairs() {
        *by_poster.entry(i).or_default() += n;
    }
    for (i, total) in ledger.posters() {
        ensure!(
            by_poster.get(i).copied().unwrap_or(0) == total,
            "sum_j N[{i}][j] != N[{i}] = {total}"
        );
    }
    ensure!(
        by_poster.len() == ledger.posters().count(),
        "posters with pair counts but no total"
    );
    let cross = posts.iter().filter(|(o, p, _)| o != p).count() as u64;
    let all: u64 = ledger.posters().map(|(_, n)| n).sum();
    ensure!(
        all == cross,
        "ledger holds {all} posts, input has {cross} cross-wall posts"
    );
    Ok(())
}

// Path trust monotonicity

pub fn path_trust_case() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (vec(0.0f64..=1.0, 1..10), 0.0f64..=1.0)
}

pub fn check_path_trust_monotone((links, extra): (Vec<f64>, f64)) -> Result<(), TestCaseError> {
    let mut trust = TrustMap::new();
    for (k, &t) in links.iter().enumerate() {
        trust.insert(NodeId(k as u32), NodeId(k as u32 + 1), t);
    }
    let last = links.len() as u32;
    trust.insert(NodeId(last), NodeId(last + 1), extra);
    let short = Path((0..=last).map(NodeId).collect());
    let long = Path((0..=last + 1).map(NodeId).collect());
    let a = path_trust(&short, &trust).unwrap();
    let b = path_trust(&long, &trust).unwrap();
    ensure!(
        (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b),
        "path trust outside [0, 1]"
    );
    ensure!(b <= a, "adding a link raised path trust from {a} to {b}");
    Ok(())
}

// Threshold compliance of the allocation

pub fn threshold_case() -> impl Strategy<Value = (u64, f64, f64)> {
    (any::<u64>(), 0.0f64..=1.0, 0.0f64..=1.0)
}

pub fn check_threshold_compliance(
    (seed, tau_t, tau_s): (u64, f64, f64),
) -> Result<(), TestCaseError> {
    let mut rng = rng(seed);
    let (topo, sets) = random_network(&mut rng, 3, usize::MAX);
    let mut trust = TrustMap::new();
    for l in topo.links() {
        trust.insert(l.src, l.dst, rng.gen_range(0.5..=1.0));
    }
    let mut ism = IsmMap::default();
    for set in &sets {
        for id in topo.node_ids() {
            ism.insert(set.source, id, rng.gen_range(0.0..=1.0));
        }
    }
    let kept: Vec<(PathSet, Utility)> = sets
        .iter()
        .map(|s| {
            (
                admissible_paths(s, &trust, Some(&ism), tau_t, tau_s).unwrap(),
                Utility::default(),
            )
        })
        .collect();
    let problem = AllocationProblem::from_path_sets(&topo, &kept, &trust, tau_t, tau_s).unwrap();
    let solution = solve_distributed(&problem, &solver_options(200));
    let mut rate: BTreeMap<(usize, &Path), f64> = BTreeMap::new();
    for (k, src) in problem.sources.iter().enumerate() {
        for (p, path) in src.paths.iter().enumerate() {
            let r = solution.allocation.rates[k][p];
            ensure!(r >= 0.0, "negative rate {r}");
            rate.insert((k, path), r);
        }
    }
    for (k, set) in sets.iter().enumerate() {
        for path in &set.paths {
            let t = path_trust(path, &trust).unwrap();
            let s = path_spoof_probability(path, &ism, set.source).unwrap();
            let r = rate.get(&(k, path)).copied().unwrap_or(0.0);
            if t < tau_t || s < tau_s {
                ensure!(
                    r == 0.0,
                    "path {path} with trust {t}, spoof probability {s} carries rate {r}"
                );
            }
        }
    }
    Ok(())
}

// Nonnegative link prices

pub fn price_case() -> impl Strategy<Value = (u64, f64)> {
    (any::<u64>(), 0.01f64..10.0)
}

pub fn check_prices_nonnegative((seed, t0): (u64, f64)) -> Result<(), TestCaseError> {
    let mut rng = rng(seed);
    let (_, sets) = random_network(&mut rng, 4, usize::MAX);
    let mu = if rng.gen_bool(0.5) { 0.0 } else { 0.5 };
    let problem = random_problem(&mut rng, &sets, Utility::Throughput { mu });
    let rate_cap = 10.0 * problem.total_capacity();
    let mut dual = DualState::warm_start(&problem.capacities, t0);
    for _ in 0..50 {
        let (alloc, _) = dual_evaluate(&problem, &dual.lambda, rate_cap);
        dual = subgradient_step(&dual, &problem.link_loads(&alloc), &problem.capacities);
        ensure!(
            dual.lambda.iter().all(|&l| l >= 0.0),
            "negative price at iteration {}",
            dual.iteration
        );
    }
    Ok(())
}
