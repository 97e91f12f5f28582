//! Round-based ad hoc network simulation.
//!
//! One round is one second. Each round the topology is rebuilt from node
//! positions, every source discovers up to `k` link-disjoint paths, keeps the
//! ones that pass the trust and spoofing thresholds, splits its packets over
//! them according to the flow allocation, and upstream nodes overhear
//! whether the next hop forwarded.
//!
//! A source rates each path with its own trust in the nodes on it: the link
//! `(u, v)` carries the source's trust in `v`, the destination included.
//! Evidence
//! is gathered by whichever node hands a packet to the next hop, so a source
//! only learns first-hand about its own neighbors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Combiner, ConfigError, Mobility, ScenarioConfig, SourcePairs, TrustMode};
use crate::flow::{solve_distributed, AllocationProblem, FlowError, SolverOptions, Utility};
use crate::identity::{compute_ism, path_spoof_probability, IsmMap, VoucherGraph};
use crate::network::{
    admissible_paths, discover_paths, path_trust, CapacityModel, NodeId, Path, PathSet, Position,
    Topology, TrustMap,
};
use crate::trust::{
    bootstrap_init, bootstrap_update, BootstrapParams, ChannelLossModel, CombinedTrustState,
    EvidenceRecord, Outcome,
};

const LAYOUT: u64 = 0;
const SOCIAL: u64 = 1;
const MOBILITY: u64 = 2;
const TRAFFIC: u64 = 3;

/// Independent generator for one purpose and round, so that changing how
/// many draws one part of a round makes never shifts another part.
fn stream(seed: u64, purpose: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 40) | round);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Position,
    pub waypoint: Position,
    pub speed: f64,
    pub malicious: bool,
    /// Malicious node operating under an identity it does not own.
    pub spoofer: bool,
}

fn draw_point(rng: &mut impl Rng, cfg: &ScenarioConfig) -> Position {
    Position::new(rng.gen::<f64>() * cfg.width, rng.gen::<f64>() * cfg.height)
}

/// Position and next waypoint drawn from the long-run distribution of
/// random-waypoint motion: a leg is picked with probability proportional to
/// its length and the node is placed uniformly along it. Static and mobile
/// runs therefore start from the same spatial distribution.
fn draw_stationary(rng: &mut impl Rng, cfg: &ScenarioConfig) -> (Position, Position) {
    let diagonal = cfg.width.hypot(cfg.height);
    loop {
        let a = draw_point(rng, cfg);
        let b = draw_point(rng, cfg);
        if rng.gen::<f64>() * diagonal <= a.distance(&b) {
            return (a.lerp(&b, rng.gen()), b);
        }
    }
}

fn draw_speed(rng: &mut impl Rng, cfg: &ScenarioConfig) -> f64 {
    cfg.speed_min + rng.gen::<f64>() * (cfg.speed_max - cfg.speed_min)
}

/// Random-waypoint movement over `dt` seconds. A node that reaches its
/// waypoint stops there and draws a new waypoint and speed.
pub fn step_mobility(nodes: &mut [NodeState], cfg: &ScenarioConfig, dt: f64, rng: &mut impl Rng) {
    if cfg.mobility == Mobility::Static {
        return;
    }
    for node in nodes {
        let remaining = node.position.distance(&node.waypoint);
        let travel = node.speed * dt;
        if travel >= remaining {
            node.position = node.waypoint;
            node.waypoint = draw_point(rng, cfg);
            node.speed = draw_speed(rng, cfg);
        } else {
            node.position = node.position.lerp(&node.waypoint, travel / remaining);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forwarding {
    Forwarded,
    Dropped,
}

/// Malicious nodes drop with `drop_probability`; valid nodes lose packets to
/// the channel with probability `plr`.
pub fn forwarding_outcome(
    node: &NodeState,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Forwarding {
    let p = if node.malicious {
        cfg.drop_probability
    } else {
        cfg.plr
    };
    if rng.gen_bool(p) {
        Forwarding::Dropped
    } else {
        Forwarding::Forwarded
    }
}

/// What one observer believes about one subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEntry {
    pub social: f64,
    pub evidence: EvidenceRecord,
    pub map: CombinedTrustState,
    pub bootstrap: f64,
}

impl TrustEntry {
    pub fn new(social: f64, cfg: &ScenarioConfig) -> Self {
        TrustEntry {
            social,
            evidence: EvidenceRecord::new(),
            map: CombinedTrustState::from_social(social, cfg.prior_strength)
                .expect("validated config"),
            bootstrap: bootstrap_init(social).expect("validated config"),
        }
    }

    pub fn value(&self, combiner: Combiner) -> f64 {
        match combiner {
            Combiner::MapPrior => self.map.value,
            Combiner::Bootstrap => self.bootstrap,
        }
    }

    pub fn observations(&self) -> u64 {
        self.evidence.observations()
    }

    /// Adds one observation and updates the combiner `cfg` selects.
    pub fn record(&mut self, outcome: Outcome, cfg: &ScenarioConfig) {
        let channel = if cfg.plr_correction {
            ChannelLossModel::new(cfg.plr).expect("validated config")
        } else {
            ChannelLossModel::lossless()
        };
        self.evidence = self.evidence.record(outcome, channel);
        match cfg.combiner {
            Combiner::MapPrior if cfg.plr_correction => self.map.set_counts(
                self.evidence.corrected_positives(),
                self.evidence.observations(),
            ),
            Combiner::MapPrior => self.map.observe(outcome),
            Combiner::Bootstrap => {
                let params = BootstrapParams {
                    epsilon: cfg.epsilon,
                    zeta: cfg.zeta,
                    rho: cfg.rho,
                };
                self.bootstrap = bootstrap_update(self.bootstrap, self.evidence.belief(), &params)
                    .expect("validated config");
            }
        }
    }
}

/// With probability `observe_probability` the upstream node records the
/// forwarder's action. Returns the recorded outcome, if any.
pub fn observe_and_update(
    entry: &mut TrustEntry,
    forwarding: Forwarding,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Option<Outcome> {
    if !rng.gen_bool(cfg.observe_probability) {
        return None;
    }
    let outcome = match forwarding {
        Forwarding::Forwarded => Outcome::Positive,
        Forwarding::Dropped => Outcome::Negative,
    };
    entry.record(outcome, cfg);
    Some(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundMetrics {
    pub round: usize,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub delivery_ratio: f64,
    /// Delivered payload units this round.
    pub throughput: f64,
    /// Fraction of delivered packets whose path had no malicious node.
    pub avoid_probability: f64,
    pub detected_malicious: usize,
    /// Fraction of sent packets routed through a node with a spoofed identity.
    pub spoofed_fraction: f64,
    pub admissible_paths: usize,
}

/// One path used in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteUse {
    pub source: NodeId,
    pub destination: NodeId,
    pub path: Path,
    pub trust: f64,
    /// Probability that no relay's identity is spoofed; `None` without ISM.
    pub identity_confidence: Option<f64>,
    pub rate: f64,
    pub packets: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub metrics: RoundMetrics,
    pub routes: Vec<RouteUse>,
    pub solver_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustDumpRow {
    pub observer: NodeId,
    pub subject: NodeId,
    pub value: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub metrics: Vec<RoundMetrics>,
    pub trust: Vec<TrustDumpRow>,
    /// First round at whose end some valid observer held each malicious
    /// node below the trust threshold.
    pub detection_rounds: Vec<(NodeId, Option<usize>)>,
    pub unconverged_solves: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ScenarioConfig,
    nodes: Vec<NodeState>,
    trust: Vec<TrustEntry>,
    pairs: Vec<(usize, usize)>,
    vouchers: VoucherGraph,
    round: usize,
    detection: Vec<Option<usize>>,
    unconverged: usize,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let n = cfg.node_count;
        let mut rng = stream(cfg.seed, LAYOUT, 0);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut nodes: Vec<NodeState> = (0..n)
            .map(|k| {
                let (position, waypoint) = draw_stationary(&mut rng, &cfg);
                NodeState {
                    id: NodeId(k as u32),
                    position,
                    waypoint,
                    speed: draw_speed(&mut rng, &cfg),
                    malicious: false,
                    spoofer: false,
                }
            })
            .collect();
        for (rank, &k) in order.iter().enumerate().take(cfg.malicious_count) {
            nodes[k].malicious = true;
            nodes[k].spoofer = rank < cfg.spoofer_count;
        }

        let pairs = match &cfg.source_pairs {
            SourcePairs::Explicit(list) => list
                .iter()
                .map(|&(s, d)| (s as usize, d as usize))
                .collect(),
            SourcePairs::Count(count) => pick_pairs(&nodes, &order, *count, &cfg)?,
        };

        let mut social_rng = stream(cfg.seed, SOCIAL, 0);
        let mut trust = Vec::with_capacity(n * n);
        for _i in 0..n {
            for subject in &nodes {
                let u: f64 = social_rng.gen();
                let looks_valid = !subject.malicious || subject.spoofer;
                let social = match cfg.trust_mode {
                    TrustMode::SocialBehavioral if looks_valid => {
                        cfg.valid_social_min + u * (cfg.valid_social_max - cfg.valid_social_min)
                    }
                    TrustMode::SocialBehavioral => cfg.malicious_social,
                    TrustMode::Behavioral => cfg.behavioral_prior,
                    TrustMode::None => 1.0,
                };
                trust.push(TrustEntry::new(social, &cfg));
            }
        }

        let vouchers = voucher_graph(&nodes, &trust, &cfg);
        Ok(Simulation {
            detection: vec![None; n],
            cfg,
            nodes,
            trust,
            pairs,
            vouchers,
            round: 0,
            unconverged: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn source_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.pairs
            .iter()
            .map(|&(s, d)| (self.nodes[s].id, self.nodes[d].id))
            .collect()
    }

    pub fn entry(&self, observer: NodeId, subject: NodeId) -> &TrustEntry {
        &self.trust[observer.0 as usize * self.cfg.node_count + subject.0 as usize]
    }

    /// Combined trust of `observer` in `subject`.
    pub fn trust(&self, observer: NodeId, subject: NodeId) -> f64 {
        if observer == subject {
            return 1.0;
        }
        self.entry(observer, subject).value(self.cfg.combiner)
    }

    fn trust_idx(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.trust[i * self.cfg.node_count + j].value(self.cfg.combiner)
        }
    }

    fn link_trust(&self, source: usize, v: usize) -> f64 {
        if self.cfg.trust_mode == TrustMode::None {
            1.0
        } else {
            self.trust_idx(source, v)
        }
    }

    fn positions(&self) -> Vec<(NodeId, Position)> {
        self.nodes.iter().map(|n| (n.id, n.position)).collect()
    }

    fn ism_for(&self, source: usize) -> crate::Result<Option<IsmMap>> {
        if !self.cfg.ism_enabled || self.cfg.trust_mode == TrustMode::None {
            return Ok(None);
        }
        let mut graph = self.vouchers.clone();
        let s = self.nodes[source].id;
        for (j, node) in self.nodes.iter().enumerate() {
            if j != source {
                graph.set_trust(s, node.id, self.trust_idx(source, j));
            }
        }
        Ok(Some(compute_ism(&graph, s, 1e-9, 1000)?))
    }

    /// Runs one round and returns what happened.
    pub fn step(&mut self) -> crate::Result<RoundReport> {
        let cfg = self.cfg.clone();
        let n = cfg.node_count;
        let round = self.round;
        let start: Vec<Position> = self.nodes.iter().map(|x| x.position).collect();
        let topo = Topology::build(
            &self.positions(),
            cfg.radio_range,
            &CapacityModel::Constant(cfg.link_capacity),
        )?;

        let mut moved = self.nodes.clone();
        step_mobility(
            &mut moved,
            &cfg,
            1.0,
            &mut stream(cfg.seed, MOBILITY, round as u64),
        );
        let end: Vec<Position> = moved.iter().map(|x| x.position).collect();

        let (tau_t, tau_s) = match cfg.trust_mode {
            TrustMode::None => (0.0, 0.0),
            _ => (cfg.tau_t, cfg.tau_s),
        };
        let utility = Utility::Throughput { mu: cfg.mu };

        // admissible paths per source, with the trust snapshot used to pick them
        let mut sets = Vec::with_capacity(self.pairs.len());
        let mut trust_maps = Vec::with_capacity(self.pairs.len());
        let mut isms = Vec::with_capacity(self.pairs.len());
        for &(s, d) in &self.pairs {
            let found = discover_paths(&topo, self.nodes[s].id, self.nodes[d].id, cfg.k_paths)?;
            let mut local = TrustMap::new();
            for path in &found.paths {
                for (a, b) in path.links() {
                    local.insert(a, b, self.link_trust(s, b.0 as usize));
                }
            }
            let ism = self.ism_for(s)?;
            let mut kept = admissible_paths(&found, &local, ism.as_ref(), tau_t, tau_s)?;
            kept.paths
                .retain(|p| path_trust(p, &local).is_ok_and(|t| t > 0.0));
            trust_maps.push(local);
            sets.push((kept, utility));
            isms.push(ism);
        }
        let admissible: usize = sets.iter().map(|(p, _)| p.len()).sum();
        let problem = allocation_problem(&topo, &sets, &trust_maps, tau_t, tau_s)?;
        let opts = SolverOptions {
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            t0: cfg.t0,
            rate_cap: None,
        };
        let solution = solve_distributed(&problem, &opts);
        if !solution.converged {
            self.unconverged += 1;
        }

        let mut rng = stream(cfg.seed, TRAFFIC, round as u64);
        let mut metrics = RoundMetrics {
            round,
            admissible_paths: admissible,
            ..Default::default()
        };
        let mut avoided = 0u64;
        let mut spoofed = 0u64;
        let mut routes = Vec::new();
        let ppr = cfg.packets_per_round as u64;
        let pairs = self.pairs.clone();
        for (k, ((set, _), &(_, d))) in sets.iter().zip(&pairs).enumerate() {
            metrics.packets_sent += ppr;
            let rates = &solution.allocation.rates[k];
            let counts = apportion(rates, ppr);
            for (p, path) in set.paths.iter().enumerate() {
                routes.push(RouteUse {
                    source: set.source,
                    destination: set.destination,
                    path: path.clone(),
                    trust: problem.sources[k].trusts[p],
                    identity_confidence: isms[k]
                        .as_ref()
                        .map(|m| path_spoof_probability(path, m, set.source))
                        .transpose()?,
                    rate: rates[p],
                    packets: counts[p],
                });
            }
            let schedule = interleave(&counts);
            for (j, &p) in schedule.iter().enumerate() {
                let time = (j as f64 + 0.5) / ppr as f64;
                let path = &set.paths[p];
                let idx: Vec<usize> = path.nodes().iter().map(|id| id.0 as usize).collect();
                let through_malicious = idx.iter().any(|&v| self.nodes[v].malicious);
                if path
                    .intermediates()
                    .iter()
                    .any(|id| self.nodes[id.0 as usize].spoofer)
                {
                    spoofed += 1;
                }
                if self.carry(&idx, d, time, &start, &end, &mut rng, &cfg) {
                    metrics.packets_delivered += 1;
                    if !through_malicious {
                        avoided += 1;
                    }
                }
            }
        }

        self.nodes = moved;
        metrics.delivery_ratio = ratio(metrics.packets_delivered, metrics.packets_sent);
        metrics.throughput = metrics.packets_delivered as f64;
        metrics.avoid_probability = ratio(avoided, metrics.packets_delivered);
        metrics.spoofed_fraction = ratio(spoofed, metrics.packets_sent);
        metrics.detected_malicious = self.update_detection(round);
        self.round += 1;
        debug_assert!(n == self.nodes.len());
        Ok(RoundReport {
            metrics,
            routes,
            solver_converged: solution.converged,
        })
    }

    /// Moves one packet hop by hop. Returns whether it reached the end.
    #[allow(clippy::too_many_arguments)]
    fn carry(
        &mut self,
        idx: &[usize],
        destination: usize,
        time: f64,
        start: &[Position],
        end: &[Position],
        rng: &mut ChaCha8Rng,
        cfg: &ScenarioConfig,
    ) -> bool {
        let at = |v: usize| start[v].lerp(&end[v], time);
        for h in 0..idx.len() - 1 {
            let (u, v) = (idx[h], idx[h + 1]);
            if at(u).distance(&at(v)) > cfg.radio_range {
                return false;
            }
            if v == destination {
                return true;
            }
            let action = forwarding_outcome(&self.nodes[v], cfg, rng);
            if cfg.trust_mode != TrustMode::None {
                let entry = &mut self.trust[u * cfg.node_count + v];
                observe_and_update(entry, action, cfg, rng);
            }
            if action == Forwarding::Dropped {
                return false;
            }
        }
        true
    }

    fn update_detection(&mut self, round: usize) -> usize {
        if self.cfg.trust_mode == TrustMode::None {
            return 0;
        }
        let n = self.cfg.node_count;
        let mut count = 0;
        for m in 0..n {
            if !self.nodes[m].malicious {
                continue;
            }
            let detected = (0..n).any(|i| {
                i != m && !self.nodes[i].malicious && self.trust_idx(i, m) < self.cfg.tau_t
            });
            if detected {
                count += 1;
                self.detection[m].get_or_insert(round);
            }
        }
        count
    }

    pub fn trust_dump(&self) -> Vec<TrustDumpRow> {
        let n = self.cfg.node_count;
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let e = &self.trust[i * n + j];
                    rows.push(TrustDumpRow {
                        observer: self.nodes[i].id,
                        subject: self.nodes[j].id,
                        value: e.value(self.cfg.combiner),
                        n: e.observations(),
                    });
                }
            }
        }
        rows
    }

    pub fn run(mut self) -> crate::Result<RunResult> {
        let mut metrics = Vec::with_capacity(self.cfg.rounds);
        for _ in 0..self.cfg.rounds {
            metrics.push(self.step()?.metrics);
        }
        Ok(RunResult {
            metrics,
            trust: self.trust_dump(),
            detection_rounds: self
                .nodes
                .iter()
                .filter(|x| x.malicious)
                .map(|x| (x.id, self.detection[x.id.0 as usize]))
                .collect(),
            unconverged_solves: self.unconverged,
        })
    }
}

fn allocation_problem(
    topo: &Topology,
    sets: &[(PathSet, Utility)],
    trust_maps: &[TrustMap],
    tau_t: f64,
    tau_s: f64,
) -> crate::Result<AllocationProblem> {
    let mut links = Vec::new();
    let mut caps = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (set, _) in sets {
        for (a, b) in set.paths.iter().flat_map(|p| p.links()) {
            if seen.insert((a, b)) {
                links.push((a, b));
                caps.push(topo.capacity(a, b).ok_or(FlowError::UnknownLink(a, b))?);
            }
        }
    }
    let mut problem = AllocationProblem::with_links(links, caps)?;
    problem.tau_t = tau_t;
    problem.tau_s = tau_s;
    for ((set, utility), local) in sets.iter().zip(trust_maps) {
        let trusts = set
            .paths
            .iter()
            .map(|p| path_trust(p, local))
            .collect::<Result<Vec<_>, _>>()?;
        problem.add_source(set, trusts, *utility)?;
    }
    Ok(problem)
}

pub fn run_simulation(cfg: &ScenarioConfig) -> crate::Result<RunResult> {
    Simulation::new(cfg)?.run()
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Valid node pairs further apart than the radio range but connected at
/// round 0, taken from the end of the shuffled order so that raising the
/// malicious count (which claims the front) leaves them unchanged.
fn pick_pairs(
    nodes: &[NodeState],
    order: &[usize],
    count: usize,
    cfg: &ScenarioConfig,
) -> Result<Vec<(usize, usize)>, ConfigError> {
    let positions: Vec<(NodeId, Position)> = nodes.iter().map(|n| (n.id, n.position)).collect();
    let topo = Topology::build(
        &positions,
        cfg.radio_range,
        &CapacityModel::Constant(cfg.link_capacity),
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let candidates: Vec<usize> = order
        .iter()
        .rev()
        .copied()
        .filter(|&k| !nodes[k].malicious)
        .collect();
    let mut used = vec![false; nodes.len()];
    let mut pairs = Vec::new();
    for (a, &s) in candidates.iter().enumerate() {
        if pairs.len() == count {
            break;
        }
        if used[s] {
            continue;
        }
        let partner = candidates[a + 1..].iter().copied().find(|&d| {
            !used[d]
                && nodes[s].position.distance(&nodes[d].position) > cfg.radio_range
                && discover_paths(&topo, nodes[s].id, nodes[d].id, 1).is_ok_and(|p| !p.is_empty())
        });
        if let Some(d) = partner {
            used[s] = true;
            used[d] = true;
            pairs.push((s, d));
        }
    }
    if pairs.len() < count {
        return Err(ConfigError::Invalid(format!(
            "only {} of {count} source pairs could be placed more than one radio range apart",
            pairs.len()
        )));
    }
    Ok(pairs)
}

/// Vouchers are each node's neighbours at round 0. A spoofer holds no
/// certificate for the identity it claims, so nobody vouches for it and it
/// is never a seed. Seeds are the social contacts a source rates at least
/// `valid_social_min`.
fn voucher_graph(nodes: &[NodeState], trust: &[TrustEntry], cfg: &ScenarioConfig) -> VoucherGraph {
    let n = nodes.len();
    let mut g = VoucherGraph::new();
    for a in nodes {
        g.add_node(a.id);
        for b in nodes {
            if a.id == b.id || a.position.distance(&b.position) > cfg.radio_range {
                continue;
            }
            if a.spoofer {
                continue;
            }
            g.add_voucher(a.id, b.id).expect("distinct ids");
        }
    }
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if i != j && !b.spoofer && trust[i * n + j].social >= cfg.valid_social_min {
                g.add_seed(a.id, b.id);
            }
        }
    }
    g
}

/// Splits `total` packets in proportion to `rates` by largest remainder;
/// ties go to the lower index. Zero total rate sends nothing.
pub fn apportion(rates: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = rates.iter().sum();
    if !(sum > 0.0) {
        return vec![0; rates.len()];
    }
    let exact: Vec<f64> = rates.iter().map(|r| r / sum * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut left = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for k in order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Smooth weighted round-robin order of path indices.
fn interleave(counts: &[u64]) -> Vec<usize> {
    let total: u64 = counts.iter().sum();
    let mut credit = vec![0i64; counts.len()];
    let mut out = Vec::with_capacity(total as usize);
    for _ in 0..total {
        for (c, &w) in credit.iter_mut().zip(counts) {
            *c += w as i64;
        }
        let best = (0..counts.len())
            .max_by_key(|&k| (credit[k], std::cmp::Reverse(k)))
            .expect("nonempty");
        credit[best] -= total as i64;
        out.push(best);
    }
    out
}

/// Delivery statistics over the last fifth of the rounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub delivery_ratio: f64,
    pub throughput: f64,
    pub avoid_probability: f64,
    pub detected_malicious: f64,
    pub spoofed_fraction: f64,
}

impl RunSummary {
    pub const FIELDS: [&'static str; 5] = [
        "delivery_ratio",
        "throughput",
        "avoid_probability",
        "detected_malicious",
        "spoofed_fraction",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.delivery_ratio,
            self.throughput,
            self.avoid_probability,
            self.detected_malicious,
            self.spoofed_fraction,
        ]
    }

    fn from_values(v: [f64; 5]) -> Self {
        RunSummary {
            delivery_ratio: v[0],
            throughput: v[1],
            avoid_probability: v[2],
            detected_malicious: v[3],
            spoofed_fraction: v[4],
        }
    }
}

pub fn summarize(metrics: &[RoundMetrics]) -> RunSummary {
    if metrics.is_empty() {
        return RunSummary::default();
    }
    let tail = &metrics[metrics.len() - metrics.len().div_ceil(5)..];
    let sent: u64 = tail.iter().map(|m| m.packets_sent).sum();
    let delivered: u64 = tail.iter().map(|m| m.packets_delivered).sum();
    let avoided: f64 = tail
        .iter()
        .map(|m| m.avoid_probability * m.packets_delivered as f64)
        .sum();
    let spoofed: f64 = tail
        .iter()
        .map(|m| m.spoofed_fraction * m.packets_sent as f64)
        .sum();
    RunSummary {
        delivery_ratio: ratio(delivered, sent),
        throughput: delivered as f64 / tail.len() as f64,
        avoid_probability: if delivered == 0 {
            0.0
        } else {
            avoided / delivered as f64
        },
        detected_malicious: tail.last().map_or(0.0, |m| m.detected_malicious as f64),
        spoofed_fraction: if sent == 0 {
            0.0
        } else {
            spoofed / sent as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepAxis {
    Speed,
    Malicious,
    TauT,
    Mu,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "speed" => Ok(SweepAxis::Speed),
            "malicious" => Ok(SweepAxis::Malicious),
            "tau-t" => Ok(SweepAxis::TauT),
            "mu" => Ok(SweepAxis::Mu),
            _ => Err(format!(
                "unknown sweep axis {s:?}; expected speed, malicious, tau-t or mu"
            )),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Speed => "speed",
            SweepAxis::Malicious => "malicious",
            SweepAxis::TauT => "tau-t",
            SweepAxis::Mu => "mu",
        })
    }
}

/// The base config with one axis set to `value`. A speed of 0 means static
/// nodes; any other speed is a fixed random-waypoint speed.
pub fn apply_axis(
    base: &ScenarioConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Speed => {
            if !(value >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "speed {value} must be nonnegative"
                )));
            }
            cfg.speed_min = value;
            cfg.speed_max = value;
            cfg.mobility = if value == 0.0 {
                Mobility::Static
            } else {
                Mobility::RandomWaypoint
            };
        }
        SweepAxis::Malicious => {
            if !(value >= 0.0 && value.fract() == 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "malicious count {value} must be a whole number"
                )));
            }
            cfg.malicious_count = value as usize;
            cfg.spoofer_count = cfg.spoofer_count.min(cfg.malicious_count);
        }
        SweepAxis::TauT => cfg.tau_t = value,
        SweepAxis::Mu => cfg.mu = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub runs: usize,
    pub mean: RunSummary,
    pub std: RunSummary,
}

/// Runs every (value, seed) combination on up to `jobs` threads (0 = all
/// cores) and aggregates per value. Rows are sorted by value.
pub fn parameter_sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
    jobs: usize,
) -> crate::Result<Vec<SweepRow>> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let mut tasks = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        let cfg = apply_axis(base, axis, v)?;
        for &seed in seeds {
            tasks.push((
                k,
                ScenarioConfig {
                    seed,
                    ..cfg.clone()
                },
            ));
        }
    }
    let summaries = run_many(tasks, jobs)?;
    let mut grouped: BTreeMap<usize, Vec<RunSummary>> = BTreeMap::new();
    for (k, s) in summaries {
        grouped.entry(k).or_default().push(s);
    }
    Ok(grouped
        .into_iter()
        .map(|(k, runs)| {
            let (mean, std) = mean_std(&runs);
            SweepRow {
                axis,
                value: values[k],
                runs: runs.len(),
                mean,
                std,
            }
        })
        .collect())
}

/// Runs labelled configs in parallel; results come back in input order.
pub fn run_many<K: Send + Sync + Copy>(
    tasks: Vec<(K, ScenarioConfig)>,
    jobs: usize,
) -> crate::Result<Vec<(K, RunSummary)>> {
    let work = || -> crate::Result<Vec<(K, RunSummary)>> {
        tasks
            .par_iter()
            .map(|(k, cfg)| Ok((*k, summarize(&run_simulation(cfg)?.metrics))))
            .collect()
    };
    if jobs == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    pool.install(work)
}

pub fn mean_std(runs: &[RunSummary]) -> (RunSummary, RunSummary) {
    let n = runs.len() as f64;
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    if runs.is_empty() {
        return (RunSummary::default(), RunSummary::default());
    }
    for r in runs {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v / n;
        }
    }
    if runs.len() > 1 {
        for r in runs {
            for ((s, m), v) in std.iter_mut().zip(&mean).zip(r.values()) {
                *s += (v - m) * (v - m) / (n - 1.0);
            }
        }
        std.iter_mut().for_each(|s| *s = s.sqrt());
    }
    (RunSummary::from_values(mean), RunSummary::from_values(std))
}

/// Paths of a path set, for callers that only need the sets.
pub fn path_sets(report: &RoundReport) -> Vec<PathSet> {
    let mut sets: BTreeMap<(NodeId, NodeId), PathSet> = BTreeMap::new();
    for r in &report.routes {
        sets.entry((r.source, r.destination))
            .or_insert_with(|| PathSet::empty(r.source, r.destination))
            .paths
            .push(r.path.clone());
    }
    sets.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(malicious: bool) -> NodeState {
        NodeState {
            id: NodeId(0),
            position: Position::new(0.0, 0.0),
            waypoint: Position::new(10.0, 0.0),
            speed: 5.0,
            malicious,
            spoofer: false,
        }
    }

    #[test]
    fn mobility_examples() {
        let mut cfg = ScenarioConfig::desk();
        let mut nodes = vec![node(false)];
        cfg.mobility = Mobility::Static;
        step_mobility(&mut nodes, &cfg, 1.0, &mut stream(1, MOBILITY, 0));
        assert_eq!(nodes[0].position, Position::new(0.0, 0.0));
        cfg.mobility = Mobility::RandomWaypoint;
        step_mobility(&mut nodes, &cfg, 1.0, &mut stream(1, MOBILITY, 0));
        assert!((nodes[0].position.x - 5.0).abs() < 1e-12);
        let mut a = vec![node(false)];
        a[0].speed = 20.0;
        let mut b = a.clone();
        step_mobility(&mut a, &cfg, 1.0, &mut stream(9, MOBILITY, 3));
        step_mobility(&mut b, &cfg, 1.0, &mut stream(9, MOBILITY, 3));
        assert_eq!(a[0].position, Position::new(10.0, 0.0));
        assert_eq!(a, b);
        assert!(a[0].speed >= cfg.speed_min && a[0].speed <= cfg.speed_max);
    }

    #[test]
    fn forwarding_examples() {
        let mut cfg = ScenarioConfig::desk();
        cfg.plr = 0.0;
        cfg.drop_probability = 1.0;
        let mut rng = stream(3, TRAFFIC, 0);
        for _ in 0..1000 {
            assert_eq!(
                forwarding_outcome(&node(false), &cfg, &mut rng),
                Forwarding::Forwarded
            );
            assert_eq!(
                forwarding_outcome(&node(true), &cfg, &mut rng),
                Forwarding::Dropped
            );
        }
        cfg.drop_probability = 0.8;
        let delivered = (0..10_000)
            .filter(|_| forwarding_outcome(&node(true), &cfg, &mut rng) == Forwarding::Forwarded)
            .count();
        assert!((delivered as f64 / 1e4 - 0.2).abs() < 0.02);
    }

    #[test]
    fn observation_examples() {
        let mut cfg = ScenarioConfig::desk();
        let mut rng = stream(5, TRAFFIC, 0);
        cfg.observe_probability = 0.0;
        let mut e = TrustEntry::new(0.9, &cfg);
        let before = e;
        for _ in 0..100 {
            assert_eq!(
                observe_and_update(&mut e, Forwarding::Dropped, &cfg, &mut rng),
                None
            );
        }
        assert_eq!(e, before);
        cfg.observe_probability = 1.0;
        assert_eq!(
            observe_and_update(&mut e, Forwarding::Dropped, &cfg, &mut rng),
            Some(Outcome::Negative)
        );
        assert_eq!(e.evidence.raw_beta, 1);
        assert_eq!(e.observations(), 1);
    }

    #[test]
    fn apportion_and_interleave() {
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 100), vec![34, 33, 33]);
        assert_eq!(apportion(&[0.0, 0.0], 10), vec![0, 0]);
        assert_eq!(apportion(&[3.0, 1.0], 8), vec![6, 2]);
        let order = interleave(&[2, 1]);
        assert_eq!(order, vec![0, 1, 0]);
        assert_eq!(interleave(&[0, 0]), Vec::<usize>::new());
    }

    #[test]
    fn summary_uses_last_fifth() {
        let mut m = vec![RoundMetrics::default(); 10];
        for (k, r) in m.iter_mut().enumerate() {
            r.packets_sent = 10;
            r.packets_delivered = if k >= 8 { 5 } else { 10 };
        }
        assert_eq!(summarize(&m).delivery_ratio, 0.5);
    }

    #[test]
    fn zero_adversary_delivers_everything() {
        let mut cfg = ScenarioConfig::desk();
        cfg.malicious_count = 0;
        cfg.plr = 0.0;
        cfg.mobility = Mobility::Static;
        cfg.rounds = 5;
        let r = run_simulation(&cfg).unwrap();
        assert!(
            r.metrics.iter().all(|m| m.delivery_ratio == 1.0),
            "{:?}",
            r.metrics
        );
    }
}
