use trustflow::config::{Mobility, ScenarioConfig, TrustMode};
use trustflow::sim::{parameter_sweep, run_simulation, summarize, Simulation, SweepAxis};
use trustflow::NodeId;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn desk(mode: TrustMode) -> ScenarioConfig {
    ScenarioConfig {
        trust_mode: mode,
        ..ScenarioConfig::desk()
    }
}

fn final_delivery(cfg: &ScenarioConfig) -> f64 {
    SEEDS
        .iter()
        .map(|&seed| {
            let run = run_simulation(&ScenarioConfig {
                seed,
                ..cfg.clone()
            })
            .unwrap();
            summarize(&run.metrics).delivery_ratio
        })
        .sum::<f64>()
        / SEEDS.len() as f64
}

#[test]
fn equal_seeds_give_identical_runs() {
    let cfg = ScenarioConfig {
        rounds: 40,
        seed: 11,
        ..ScenarioConfig::desk()
    };
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.trust, b.trust);
    let c = run_simulation(&ScenarioConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn delivered_never_exceeds_sent() {
    for mode in [TrustMode::SocialBehavioral, TrustMode::None] {
        let run = run_simulation(&ScenarioConfig {
            rounds: 60,
            ..desk(mode)
        })
        .unwrap();
        for m in &run.metrics {
            assert!(m.packets_delivered <= m.packets_sent, "{m:?}");
            assert!((0.0..=1.0).contains(&m.delivery_ratio), "{m:?}");
            assert!((0.0..=1.0).contains(&m.avoid_probability), "{m:?}");
            assert!((0.0..=1.0).contains(&m.spoofed_fraction), "{m:?}");
        }
    }
}

#[test]
fn no_route_below_trust_threshold() {
    let mut sim = Simulation::new(&ScenarioConfig {
        rounds: 60,
        ..ScenarioConfig::desk()
    })
    .unwrap();
    let tau = sim.config().tau_t;
    for _ in 0..60 {
        let report = sim.step().unwrap();
        for r in report.routes.iter().filter(|r| r.packets > 0) {
            assert!(r.trust >= tau, "{r:?}");
        }
    }
}

#[test]
fn social_trust_beats_no_trust() {
    let with = final_delivery(&desk(TrustMode::SocialBehavioral));
    let without = final_delivery(&desk(TrustMode::None));
    assert!(with > without, "social+behavioral {with} vs none {without}");
}

#[test]
fn social_priors_detect_malicious_nodes_sooner() {
    let mean_detection = |mode| {
        let mut rounds = Vec::new();
        for seed in SEEDS {
            let run = run_simulation(&ScenarioConfig { seed, ..desk(mode) }).unwrap();
            let cap = run.metrics.len();
            rounds.extend(
                run.detection_rounds
                    .iter()
                    .map(|(_, r)| r.unwrap_or(cap) as f64),
            );
        }
        rounds.iter().sum::<f64>() / rounds.len() as f64
    };
    let social = mean_detection(TrustMode::SocialBehavioral);
    let behavioral = mean_detection(TrustMode::Behavioral);
    assert!(
        social < behavioral,
        "detection round social {social} vs behavioral {behavioral}"
    );
}

#[test]
fn malicious_trust_does_not_recover() {
    let (mut early, mut late) = (0.0, 0.0);
    let mut samples = 0.0;
    for seed in SEEDS {
        let mut sim = Simulation::new(&ScenarioConfig {
            seed,
            mobility: Mobility::Static,
            ..desk(TrustMode::Behavioral)
        })
        .unwrap();
        let observer = sim.source_pairs()[0].0;
        let bad: Vec<NodeId> = sim
            .nodes()
            .iter()
            .filter(|n| n.malicious)
            .map(|n| n.id)
            .collect();
        for _ in 0..25 {
            sim.step().unwrap();
        }
        let at_25: Vec<f64> = bad.iter().map(|&b| sim.trust(observer, b)).collect();
        for _ in 0..25 {
            sim.step().unwrap();
        }
        for (k, &b) in bad.iter().enumerate() {
            early += at_25[k];
            late += sim.trust(observer, b);
            samples += 1.0;
        }
    }
    let (early, late) = (early / samples, late / samples);
    assert!(
        late <= early + 0.02,
        "trust at round 50 {late} vs round 25 {early}"
    );
}

#[test]
fn threshold_near_one_blocks_all_paths() {
    let run = run_simulation(&ScenarioConfig {
        tau_t: 0.99,
        rounds: 30,
        ..ScenarioConfig::desk()
    })
    .unwrap();
    assert!(run.metrics.iter().all(|m| m.packets_delivered == 0));
}

#[test]
fn diversity_does_not_hurt_delivery() {
    let rows = parameter_sweep(
        &desk(TrustMode::Behavioral),
        SweepAxis::Mu,
        &[0.0, 0.5, 1.0],
        &SEEDS,
        0,
    )
    .unwrap();
    let base = rows[0].mean.delivery_ratio;
    for r in &rows[1..] {
        assert!(
            r.mean.delivery_ratio >= base - 0.02,
            "mu {} gives {} vs {base}",
            r.value,
            r.mean.delivery_ratio
        );
    }
}
