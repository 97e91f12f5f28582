//! Command-line front end.
//!
//! Scenario settings are resolved in this order, later wins: the built-in
//! desk profile, the `--config` file, each `--set section.key=value` in the
//! order given, then the dedicated flags (`--seed`, `--trust-mode`, `--ism`,
//! `--tau-t`, `--tau-s`, `--mu`).
//!
//! Every output file `<out>` gets a `<out>.manifest` next to it holding the
//! resolved configuration plus a `[manifest]` section; passing the manifest
//! back as `--config` reproduces the output byte for byte.
//!
//! Exit codes: 0 success, 1 domain or convergence failure, 2 bad input.

use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Combiner, ScenarioConfig, TrustMode};
use crate::flow::{solve_distributed, AllocationProblem, SolverOptions, Utility};
use crate::identity::compute_ism;
use crate::network::{admissible_paths, discover_paths, NodeId};
use crate::output::{self, SocialSeriesRow, TrustDemoRow};
use crate::sim::{parameter_sweep, Simulation, SweepAxis, TrustEntry};
use crate::social::{
    build_ledger, find_profile, parse_contacts, parse_profiles, parse_wallposts, series_eta,
    trust_timeseries, ContactCounts,
};
use crate::topofile::TopologyFile;
use crate::trust::{ips_trust, ips_trust_from_counts, social_trust, EtaSchedule, Outcome};

const ISM_TOL: f64 = 1e-9;
const ISM_MAX_ITER: usize = 1000;

#[derive(Debug, Parser)]
#[command(
    name = "trustflow",
    version,
    about = "Trust-aware flow allocation and ad hoc network simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evidence accumulation for one observer and one subject.
    TrustDemo(TrustDemoArgs),
    /// Monthly wall-post and social trust of one user in another.
    SocialTrust(SocialTrustArgs),
    /// Identity spoofing metric for a voucher graph.
    Ism(IsmArgs),
    /// Trust-constrained multipath flow allocation for a topology file.
    Allocate(AllocateArgs),
    /// One simulation run, one metrics row per round.
    Simulate(SimulateArgs),
    /// Parameter sweep over seeds, aggregated per axis value.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    #[value(name = "social+behavioral")]
    SocialBehavioral,
    Behavioral,
    None,
}

impl From<ModeArg> for TrustMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SocialBehavioral => TrustMode::SocialBehavioral,
            ModeArg::Behavioral => TrustMode::Behavioral,
            ModeArg::None => TrustMode::None,
        }
    }
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (INI) or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any setting, e.g. `--set network.node_count=40`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trust_mode: Option<ModeArg>,
    #[arg(long)]
    ism: Option<Switch>,
    #[arg(long)]
    tau_t: Option<f64>,
    #[arg(long)]
    tau_s: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Debug, Args)]
struct TrustDemoArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Probability that the subject forwards.
    #[arg(long, default_value_t = 0.7)]
    rate: f64,
    /// Social trust the observer starts from.
    #[arg(long, default_value_t = 0.5)]
    social: f64,
    #[arg(long, default_value_t = 30)]
    observations: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SocialTrustArgs {
    #[arg(long)]
    wallposts: PathBuf,
    /// `user count` lines; without it a user's contacts are the users it
    /// exchanged posts with.
    #[arg(long)]
    contacts: Option<PathBuf>,
    /// Profile blocks for the profile-similarity term.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["I", "J"], required = true)]
    pair: Vec<String>,
    /// Decay constant `a` of the wall-post trust.
    #[arg(long, default_value_t = 1.0)]
    decay: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IsmArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Only this observer; by default every node with seeds.
    #[arg(long)]
    observer: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    topology: PathBuf,
    /// Use the diversity utility instead of throughput plus `mu` diversity.
    #[arg(long)]
    diversity: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write the final trust table here.
    #[arg(long)]
    trust_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    axis: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    values: Vec<f64>,
    /// Number of seeds, counted up from the configured seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

type Step = std::result::Result<(), Failure>;

fn bad_input(e: impl Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn domain(e: impl Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn read(path: &FsPath) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn aux(out: &FsPath, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(
    path: &FsPath,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> crate::Result<()>,
) -> Step {
    let file = fs::File::create(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    w.flush()
        .map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn write_manifest(
    out: &FsPath,
    command: &str,
    entries: &[(&str, String)],
    cfg: Option<&ScenarioConfig>,
) -> Step {
    let mut text = String::from("[manifest]\n");
    text.push_str(&format!("command = {command}\n"));
    text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    if let Some(cfg) = cfg {
        text.push('\n');
        text.push_str(&cfg.to_ini());
    }
    let path = aux(out, ".manifest");
    fs::write(&path, text).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::desk();
    if let Some(path) = &args.config {
        cfg.apply_ini(&read(path)?)
            .map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
    }
    for o in &args.overrides {
        cfg.apply_override(o).map_err(bad_input)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.trust_mode {
        cfg.trust_mode = m.into();
    }
    if let Some(s) = args.ism {
        cfg.ism_enabled = s == Switch::On;
    }
    if let Some(v) = args.tau_t {
        cfg.tau_t = v;
    }
    if let Some(v) = args.tau_s {
        cfg.tau_s = v;
    }
    if let Some(v) = args.mu {
        cfg.mu = v;
    }
    cfg.validate().map_err(bad_input)?;
    Ok(cfg)
}

fn config_source(args: &ScenarioArgs) -> String {
    args.config
        .as_ref()
        .map_or_else(|| "desk".to_string(), |p| p.display().to_string())
}

fn trust_demo(a: &TrustDemoArgs) -> Step {
    let cfg = scenario(&a.scenario)?;
    for (name, v) in [("rate", a.rate), ("social", a.social)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(bad_input(format!("--{name} {v} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map_cfg = ScenarioConfig {
        combiner: Combiner::MapPrior,
        ..cfg.clone()
    };
    let bootstrap_cfg = ScenarioConfig {
        combiner: Combiner::Bootstrap,
        ..cfg.clone()
    };
    let mut entry = TrustEntry::new(a.social, &cfg);
    let mut shadow = entry;
    let mut rows = Vec::with_capacity(a.observations as usize);
    for k in 1..=a.observations {
        let outcome = if rng.gen_bool(a.rate) {
            Outcome::Positive
        } else {
            Outcome::Negative
        };
        entry.record(outcome, &map_cfg);
        shadow.record(outcome, &bootstrap_cfg);
        let opinion = entry.evidence.opinion();
        rows.push(TrustDemoRow {
            observation: k,
            positive: outcome == Outcome::Positive,
            alpha: entry.evidence.alpha,
            beta: entry.evidence.beta,
            belief: opinion.belief,
            uncertainty: opinion.uncertainty,
            map_trust: entry.map.value,
            bootstrap_trust: shadow.bootstrap,
        });
    }
    write_file(&a.out, |w| output::write_trust_demo(w, &rows))?;
    write_manifest(
        &a.out,
        "trust-demo",
        &[
            ("rate", a.rate.to_string()),
            ("social", a.social.to_string()),
            ("observations", a.observations.to_string()),
            ("config_source", config_source(&a.scenario)),
        ],
        Some(&cfg),
    )
}

fn social(a: &SocialTrustArgs) -> Step {
    if !(a.decay.is_finite() && a.decay > 0.0) {
        return Err(bad_input(format!("--decay {} must be positive", a.decay)));
    }
    let (i, j) = (a.pair[0].as_str(), a.pair[1].as_str());
    let posts = parse_wallposts(&read(&a.wallposts)?)
        .into_result()
        .map_err(|e| bad_input(format!("{}: {e}", a.wallposts.display())))?;
    let contacts = match &a.contacts {
        Some(p) => ContactCounts::Explicit(
            parse_contacts(&read(p)?)
                .into_result()
                .map_err(|e| bad_input(format!("{}: {e}", p.display())))?
                .into_iter()
                .collect(),
        ),
        None => ContactCounts::DistinctPartners,
    };
    let ledger = build_ledger(&posts, &contacts).map_err(bad_input)?;
    if ledger.total_posts(i) == 0 && !posts.iter().any(|r| r.owner == i || r.poster == i) {
        return Err(bad_input(format!(
            "user {i} does not appear in {}",
            a.wallposts.display()
        )));
    }
    let ips = match &a.profiles {
        Some(p) => {
            let profiles = parse_profiles(&read(p)?)
                .map_err(|e| bad_input(format!("{}: {e}", p.display())))?;
            let pi = find_profile(&profiles, i)
                .map_err(bad_input)?
                .to_feature_profile();
            let pj = find_profile(&profiles, j)
                .map_err(bad_input)?
                .to_feature_profile();
            ips_trust(&pi, &pj).1
        }
        None => ips_trust_from_counts(0, 0),
    };
    let schedule = EtaSchedule::default();
    let series = trust_timeseries(&posts, &contacts, i, j, a.decay).map_err(bad_input)?;
    let mut rows = Vec::with_capacity(series.len());
    for point in &series {
        let eta = series_eta(point, &schedule);
        rows.push(SocialSeriesRow {
            month: point.month,
            posts_on_j: point.posts_on_j,
            posts_i: point.total_posts,
            wallpost_trust: point.wallpost_trust,
            ips_trust: ips,
            eta,
            social_trust: social_trust(ips, point.wallpost_trust, eta).map_err(domain)?,
        });
    }
    write_file(&a.out, |w| output::write_series(w, &rows))?;
    let path_or = |p: &Option<PathBuf>| {
        p.as_ref()
            .map_or_else(|| "none".to_string(), |p| p.display().to_string())
    };
    write_manifest(
        &a.out,
        "social-trust",
        &[
            ("wallposts", a.wallposts.display().to_string()),
            ("contacts", path_or(&a.contacts)),
            ("profiles", path_or(&a.profiles)),
            ("pair", format!("{i} {j}")),
            ("decay", a.decay.to_string()),
        ],
        None,
    )
}

fn load_topology(path: &FsPath) -> Result<TopologyFile, Failure> {
    TopologyFile::parse(&read(path)?).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn ism(a: &IsmArgs) -> Step {
    let file = load_topology(&a.topology)?;
    let graph = file
        .voucher_graph()
        .map_err(|e| bad_input(format!("{}: {e}", a.topology.display())))?
        .ok_or_else(|| {
            bad_input(format!(
                "{}: no voucher or seed lines",
                a.topology.display()
            ))
        })?;
    let observers: Vec<NodeId> = match a.observer {
        Some(o) => vec![NodeId(o)],
        None => graph.observers().collect(),
    };
    let mut rows = Vec::new();
    for o in observers {
        let map = compute_ism(&graph, o, ISM_TOL, ISM_MAX_ITER).map_err(domain)?;
        rows.extend(map.iter().map(|((i, j), v)| (i, j, v)));
    }
    rows.sort_by_key(|r| (r.0, r.1));
    write_file(&a.out, |w| output::write_ism(w, &rows))?;
    let observer = a
        .observer
        .map_or_else(|| "all".to_string(), |o| o.to_string());
    write_manifest(
        &a.out,
        "ism",
        &[
            ("topology", a.topology.display().to_string()),
            ("observer", observer),
            ("tol", ISM_TOL.to_string()),
            ("max_iter", ISM_MAX_ITER.to_string()),
        ],
        None,
    )
}

fn allocate(a: &AllocateArgs) -> Step {
    let cfg = scenario(&a.scenario)?;
    let file = load_topology(&a.topology)?;
    let at = |e: &dyn Display| bad_input(format!("{}: {e}", a.topology.display()));
    if file.sources.is_empty() {
        return Err(at(&"no `source` lines"));
    }
    let topo = file.topology().map_err(|e| at(&e))?;
    let graph = if cfg.ism_enabled {
        file.voucher_graph().map_err(|e| at(&e))?
    } else {
        None
    };
    let utility = if a.diversity {
        Utility::Diversity
    } else {
        Utility::Throughput { mu: cfg.mu }
    };
    let mut sets = Vec::with_capacity(file.sources.len());
    for &(s, d) in &file.sources {
        let found = discover_paths(&topo, s, d, cfg.k_paths).map_err(|e| at(&e))?;
        let ism = match &graph {
            Some(g) => Some(compute_ism(g, s, ISM_TOL, ISM_MAX_ITER).map_err(domain)?),
            None => None,
        };
        let kept = admissible_paths(&found, &file.trust, ism.as_ref(), cfg.tau_t, cfg.tau_s)
            .map_err(|e| at(&e))?;
        sets.push((kept, utility));
    }
    let problem =
        AllocationProblem::from_path_sets(&topo, &sets, &file.trust, cfg.tau_t, cfg.tau_s)
            .map_err(|e| at(&e))?;
    let opts = SolverOptions {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        t0: cfg.t0,
        rate_cap: None,
    };
    let solution = solve_distributed(&problem, &opts);
    write_file(&a.out, |w| {
        output::write_allocation(w, &problem, &solution.allocation)
    })?;
    let trace = aux(&a.out, ".trace.csv");
    write_file(&trace, |w| {
        output::write_trace(w, problem.sources.len(), &solution.trace)
    })?;
    let utility_name = if a.diversity {
        "diversity"
    } else {
        "throughput"
    };
    write_manifest(
        &a.out,
        "allocate",
        &[
            ("topology", a.topology.display().to_string()),
            ("utility", utility_name.to_string()),
            ("config_source", config_source(&a.scenario)),
            ("converged", solution.converged.to_string()),
        ],
        Some(&cfg),
    )?;
    if solution.converged {
        Ok(())
    } else {
        Err(domain(format!(
            "solver did not converge in {} iterations (residual {:e}); best iterate written",
            cfg.max_iter, solution.dual.primal_residual
        )))
    }
}

fn simulate(a: &SimulateArgs) -> Step {
    let cfg = scenario(&a.scenario)?;
    let sim = Simulation::new(&cfg).map_err(bad_input)?;
    let result = sim.run().map_err(domain)?;
    write_file(&a.out, |w| output::write_metrics(w, &result.metrics))?;
    if let Some(path) = &a.trust_out {
        write_file(path, |w| output::write_trust_dump(w, &result.trust))?;
    }
    write_manifest(
        &a.out,
        "simulate",
        &[
            ("config_source", config_source(&a.scenario)),
            ("seed", cfg.seed.to_string()),
        ],
        Some(&cfg),
    )
}

fn sweep(a: &SweepArgs) -> Step {
    let cfg = scenario(&a.scenario)?;
    if a.values.is_empty() {
        return Err(bad_input("--values is empty"));
    }
    if a.seeds == 0 {
        return Err(bad_input("--seeds must be at least 1"));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let rows = parameter_sweep(&cfg, a.axis, &a.values, &seeds, a.jobs).map_err(|e| match e {
        crate::Error::Config(c) => bad_input(c),
        other => domain(other),
    })?;
    write_file(&a.out, |w| output::write_sweep(w, &rows))?;
    let values: Vec<String> = a.values.iter().map(f64::to_string).collect();
    write_manifest(
        &a.out,
        "sweep",
        &[
            ("axis", a.axis.to_string()),
            ("values", values.join(",")),
            ("seeds", a.seeds.to_string()),
            ("config_source", config_source(&a.scenario)),
        ],
        Some(&cfg),
    )
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::TrustDemo(a) => trust_demo(a),
        Command::SocialTrust(a) => social(a),
        Command::Ism(a) => ism(a),
        Command::Allocate(a) => allocate(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("trustflow: {}", f.message);
            f.code
        }
    }
}
