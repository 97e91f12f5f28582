//! Scenario configuration: INI files with `[network]`, `[adversary]`,
//! `[trust]`, `[allocation]` and `[simulation]` sections.
//!
//! Values are applied in order: built-in profile defaults, then the file,
//! then command-line overrides. Unknown sections or keys are errors.

use std::fmt;
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown setting [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key}: cannot parse {value:?}")]
    BadValue {
        section: String,
        key: String,
        value: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("override {0:?} is not of the form section.key=value")]
    BadOverride(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mobility {
    Static,
    RandomWaypoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustMode {
    /// Social priors from the social network plus observed behaviour.
    SocialBehavioral,
    /// The same constant prior for everyone plus observed behaviour.
    Behavioral,
    /// No trust filtering and no updates.
    None,
}

/// How the social prior and the behavioural evidence are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    MapPrior,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourcePairs {
    Count(usize),
    Explicit(Vec<(u32, u32)>),
}

impl fmt::Display for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mobility::Static => "static",
            Mobility::RandomWaypoint => "random-waypoint",
        })
    }
}

impl FromStr for Mobility {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "static" => Ok(Mobility::Static),
            "random-waypoint" | "waypoint" => Ok(Mobility::RandomWaypoint),
            _ => Err(()),
        }
    }
}

impl fmt::Display for TrustMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustMode::SocialBehavioral => "social+behavioral",
            TrustMode::Behavioral => "behavioral",
            TrustMode::None => "none",
        })
    }
}

impl FromStr for TrustMode {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "social+behavioral" | "social" => Ok(TrustMode::SocialBehavioral),
            "behavioral" => Ok(TrustMode::Behavioral),
            "none" => Ok(TrustMode::None),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::MapPrior => "map-prior",
            Combiner::Bootstrap => "bootstrap",
        })
    }
}

impl FromStr for Combiner {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "map-prior" | "map" => Ok(Combiner::MapPrior),
            "bootstrap" => Ok(Combiner::Bootstrap),
            _ => Err(()),
        }
    }
}

impl fmt::Display for SourcePairs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourcePairs::Count(n) => write!(f, "{n}"),
            SourcePairs::Explicit(pairs) => {
                let items: Vec<String> = pairs.iter().map(|(s, d)| format!("{s}-{d}")).collect();
                f.write_str(&items.join(","))
            }
        }
    }
}

impl FromStr for SourcePairs {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        if let Ok(n) = s.parse() {
            return Ok(SourcePairs::Count(n));
        }
        let mut pairs = Vec::new();
        for item in s.split(',') {
            let (a, b) = item.trim().split_once('-').ok_or(())?;
            pairs.push((
                a.trim().parse().map_err(|_| ())?,
                b.trim().parse().map_err(|_| ())?,
            ));
        }
        Ok(SourcePairs::Explicit(pairs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    // [network]
    pub node_count: usize,
    pub width: f64,
    pub height: f64,
    pub radio_range: f64,
    pub link_capacity: f64,
    pub plr: f64,
    pub mobility: Mobility,
    pub speed_min: f64,
    pub speed_max: f64,
    // [adversary]
    pub malicious_count: usize,
    pub drop_probability: f64,
    /// Malicious nodes that also claim identities they do not own; their
    /// social profile looks like a valid user's.
    pub spoofer_count: usize,
    // [trust]
    pub trust_mode: TrustMode,
    pub combiner: Combiner,
    pub observe_probability: f64,
    pub prior_strength: f64,
    pub behavioral_prior: f64,
    pub malicious_social: f64,
    pub valid_social_min: f64,
    pub valid_social_max: f64,
    pub plr_correction: bool,
    pub epsilon: f64,
    pub zeta: f64,
    pub rho: f64,
    pub ism_enabled: bool,
    // [allocation]
    pub k_paths: usize,
    pub tau_t: f64,
    pub tau_s: f64,
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub t0: f64,
    // [simulation]
    pub rounds: usize,
    pub packets_per_round: usize,
    pub source_pairs: SourcePairs,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::desk()
    }
}

impl ScenarioConfig {
    /// 30 nodes, 3 malicious: small enough for test suites.
    pub fn desk() -> Self {
        ScenarioConfig {
            node_count: 30,
            width: 1000.0,
            height: 1000.0,
            radio_range: 400.0,
            link_capacity: 50.0,
            plr: 0.02,
            mobility: Mobility::RandomWaypoint,
            speed_min: 1.0,
            speed_max: 5.0,
            malicious_count: 3,
            drop_probability: 0.8,
            spoofer_count: 0,
            trust_mode: TrustMode::SocialBehavioral,
            combiner: Combiner::MapPrior,
            observe_probability: 0.1,
            prior_strength: 10.0,
            behavioral_prior: 0.9,
            malicious_social: 0.6,
            valid_social_min: 0.85,
            valid_social_max: 1.0,
            plr_correction: true,
            epsilon: 0.7,
            zeta: 0.1,
            rho: 0.9,
            ism_enabled: true,
            k_paths: 3,
            tau_t: 0.65,
            tau_s: 0.5,
            mu: 0.0,
            max_iter: 5000,
            tol: 1e-6,
            t0: 1.0,
            rounds: 200,
            packets_per_round: 100,
            source_pairs: SourcePairs::Count(4),
            seed: 1,
        }
    }

    /// The full-size network: 70 nodes, 10 malicious, 1500 x 1500 m.
    pub fn paper() -> Self {
        ScenarioConfig {
            node_count: 70,
            width: 1500.0,
            height: 1500.0,
            malicious_count: 10,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" | "desk30" => Ok(Self::desk()),
            "paper" | "paper70" => Ok(Self::paper()),
            _ => Err(ConfigError::UnknownProfile(name.to_string())),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.node_count.saturating_sub(self.malicious_count)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || ConfigError::BadValue {
            section: section.to_string(),
            key: key.to_string(),
            value: value.to_string(),
        };
        macro_rules! parse {
            ($field:expr) => {
                $field = value.parse().map_err(|_| bad())?
            };
        }
        match (section, key) {
            ("network", "node_count") => parse!(self.node_count),
            ("network", "width") => parse!(self.width),
            ("network", "height") => parse!(self.height),
            ("network", "radio_range") => parse!(self.radio_range),
            ("network", "link_capacity") => parse!(self.link_capacity),
            ("network", "plr") => parse!(self.plr),
            ("network", "mobility") => parse!(self.mobility),
            ("network", "speed_min") => parse!(self.speed_min),
            ("network", "speed_max") => parse!(self.speed_max),
            ("adversary", "malicious_count") => parse!(self.malicious_count),
            ("adversary", "drop_probability") => parse!(self.drop_probability),
            ("adversary", "spoofer_count") => parse!(self.spoofer_count),
            ("trust", "trust_mode") => parse!(self.trust_mode),
            ("trust", "combiner") => parse!(self.combiner),
            ("trust", "observe_probability") => parse!(self.observe_probability),
            ("trust", "prior_strength") => parse!(self.prior_strength),
            ("trust", "behavioral_prior") => parse!(self.behavioral_prior),
            ("trust", "malicious_social") => parse!(self.malicious_social),
            ("trust", "valid_social_min") => parse!(self.valid_social_min),
            ("trust", "valid_social_max") => parse!(self.valid_social_max),
            ("trust", "plr_correction") => parse!(self.plr_correction),
            ("trust", "epsilon") => parse!(self.epsilon),
            ("trust", "zeta") => parse!(self.zeta),
            ("trust", "rho") => parse!(self.rho),
            ("trust", "ism_enabled") => parse!(self.ism_enabled),
            ("allocation", "k_paths") => parse!(self.k_paths),
            ("allocation", "tau_t") => parse!(self.tau_t),
            ("allocation", "tau_s") => parse!(self.tau_s),
            ("allocation", "mu") => parse!(self.mu),
            ("allocation", "max_iter") => parse!(self.max_iter),
            ("allocation", "tol") => parse!(self.tol),
            ("allocation", "t0") => parse!(self.t0),
            ("simulation", "rounds") => parse!(self.rounds),
            ("simulation", "packets_per_round") => parse!(self.packets_per_round),
            ("simulation", "source_pairs") => parse!(self.source_pairs),
            ("simulation", "seed") => parse!(self.seed),
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Every setting as (section, key, value), in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        vec![
            ("network", "node_count", self.node_count.to_string()),
            ("network", "width", self.width.to_string()),
            ("network", "height", self.height.to_string()),
            ("network", "radio_range", self.radio_range.to_string()),
            ("network", "link_capacity", self.link_capacity.to_string()),
            ("network", "plr", self.plr.to_string()),
            ("network", "mobility", self.mobility.to_string()),
            ("network", "speed_min", self.speed_min.to_string()),
            ("network", "speed_max", self.speed_max.to_string()),
            (
                "adversary",
                "malicious_count",
                self.malicious_count.to_string(),
            ),
            (
                "adversary",
                "drop_probability",
                self.drop_probability.to_string(),
            ),
            ("adversary", "spoofer_count", self.spoofer_count.to_string()),
            ("trust", "trust_mode", self.trust_mode.to_string()),
            ("trust", "combiner", self.combiner.to_string()),
            (
                "trust",
                "observe_probability",
                self.observe_probability.to_string(),
            ),
            ("trust", "prior_strength", self.prior_strength.to_string()),
            (
                "trust",
                "behavioral_prior",
                self.behavioral_prior.to_string(),
            ),
            (
                "trust",
                "malicious_social",
                self.malicious_social.to_string(),
            ),
            (
                "trust",
                "valid_social_min",
                self.valid_social_min.to_string(),
            ),
            (
                "trust",
                "valid_social_max",
                self.valid_social_max.to_string(),
            ),
            ("trust", "plr_correction", self.plr_correction.to_string()),
            ("trust", "epsilon", self.epsilon.to_string()),
            ("trust", "zeta", self.zeta.to_string()),
            ("trust", "rho", self.rho.to_string()),
            ("trust", "ism_enabled", self.ism_enabled.to_string()),
            ("allocation", "k_paths", self.k_paths.to_string()),
            ("allocation", "tau_t", self.tau_t.to_string()),
            ("allocation", "tau_s", self.tau_s.to_string()),
            ("allocation", "mu", self.mu.to_string()),
            ("allocation", "max_iter", self.max_iter.to_string()),
            ("allocation", "tol", self.tol.to_string()),
            ("allocation", "t0", self.t0.to_string()),
            ("simulation", "rounds", self.rounds.to_string()),
            (
                "simulation",
                "packets_per_round",
                self.packets_per_round.to_string(),
            ),
            ("simulation", "source_pairs", self.source_pairs.to_string()),
            ("simulation", "seed", self.seed.to_string()),
        ]
    }

    /// Applies every key of an INI document. A `profile` key in the
    /// `[simulation]` section resets to that built-in profile first.
    pub fn apply_ini(&mut self, text: &str) -> Result<()> {
        let doc = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        if let Some(name) = doc
            .section(Some("simulation"))
            .and_then(|s| s.get("profile"))
        {
            *self = Self::profile(name.trim())?;
        }
        for (section, props) in doc.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: String::new(),
                        key: key.to_string(),
                    });
                }
                continue;
            };
            if section == "manifest" {
                continue;
            }
            for (key, value) in props.iter() {
                if section == "simulation" && key == "profile" {
                    continue;
                }
                self.set(section, key, value)?;
            }
        }
        Ok(())
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let mut cfg = Self::desk();
        cfg.apply_ini(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        self.set(section, key, value)
    }

    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        if self.node_count < 2 {
            return fail("node_count must be at least 2".into());
        }
        if self.malicious_count >= self.node_count {
            return fail(format!(
                "malicious_count {} must be below node_count {}",
                self.malicious_count, self.node_count
            ));
        }
        if self.spoofer_count > self.malicious_count {
            return fail("spoofer_count cannot exceed malicious_count".into());
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.radio_range > 0.0) {
            return fail("area and radio range must be positive".into());
        }
        if !(self.link_capacity.is_finite() && self.link_capacity >= 0.0) {
            return fail("link_capacity must be finite and nonnegative".into());
        }
        if !(self.speed_min >= 0.0
            && self.speed_min <= self.speed_max
            && self.speed_max.is_finite())
        {
            return fail(format!(
                "need 0 <= speed_min <= speed_max, got {} and {}",
                self.speed_min, self.speed_max
            ));
        }
        if self.mobility == Mobility::RandomWaypoint && self.speed_max <= 0.0 {
            return fail("random-waypoint mobility needs speed_max > 0".into());
        }
        unit("plr", self.plr)?;
        if self.plr >= 1.0 {
            return fail("plr must be below 1".into());
        }
        unit("drop_probability", self.drop_probability)?;
        unit("observe_probability", self.observe_probability)?;
        unit("behavioral_prior", self.behavioral_prior)?;
        unit("malicious_social", self.malicious_social)?;
        unit("valid_social_min", self.valid_social_min)?;
        unit("valid_social_max", self.valid_social_max)?;
        if self.valid_social_min > self.valid_social_max {
            return fail("valid_social_min exceeds valid_social_max".into());
        }
        unit("epsilon", self.epsilon)?;
        unit("zeta", self.zeta)?;
        unit("rho", self.rho)?;
        if self.zeta > self.epsilon {
            return fail("zeta must not exceed epsilon".into());
        }
        if !(self.prior_strength > 0.0) {
            return fail("prior_strength must be positive".into());
        }
        unit("tau_t", self.tau_t)?;
        unit("tau_s", self.tau_s)?;
        if !(self.mu >= 0.0) {
            return fail("mu must be nonnegative".into());
        }
        if self.k_paths == 0 {
            return fail("k_paths must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.t0 > 0.0) || self.max_iter == 0 {
            return fail("solver tol, t0 and max_iter must be positive".into());
        }
        match &self.source_pairs {
            SourcePairs::Count(n) if *n == 0 => {
                return fail("source_pairs must be at least 1".into())
            }
            SourcePairs::Count(n) if *n * 2 > self.valid_count() => {
                return fail(format!("{n} source pairs need {} valid nodes", n * 2))
            }
            SourcePairs::Explicit(pairs) => {
                for &(s, d) in pairs {
                    if s == d || s as usize >= self.node_count || d as usize >= self.node_count {
                        return fail(format!("bad source pair {s}-{d}"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_round_trip() {
        let mut cfg = ScenarioConfig::paper();
        cfg.mu = 0.5;
        cfg.source_pairs = SourcePairs::Explicit(vec![(0, 5), (2, 9)]);
        let text = cfg.to_ini();
        assert_eq!(ScenarioConfig::from_ini(&text).unwrap(), cfg);
    }

    #[test]
    fn file_then_overrides() {
        let mut cfg =
            ScenarioConfig::from_ini("[simulation]\nprofile = paper\nrounds = 10\n").unwrap();
        assert_eq!(cfg.node_count, 70);
        assert_eq!(cfg.rounds, 10);
        cfg.apply_override("allocation.tau_t=0.4").unwrap();
        assert_eq!(cfg.tau_t, 0.4);
        assert!(cfg.apply_override("tau_t=0.4").is_err());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            ScenarioConfig::from_ini("[network]\nnodes = 3\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_ini("[adversary]\nmalicious_count = 30\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_ini("[network]\nspeed_min = 6\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_ini("[trust]\ntrust_mode = maybe\n"),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
