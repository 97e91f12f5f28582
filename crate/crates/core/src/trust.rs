//! Behavioral, social and combined trust.
//!
//! Behavioral trust comes from Beta-distributed evidence counters turned into
//! a belief/disbelief/uncertainty opinion. Social trust mixes profile
//! similarity with wall-post interaction frequency. The two are fused either
//! by a MAP estimate with the social value as a Beta prior, or by the
//! bootstrap recursion seeded with the social value.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrustError {
    #[error("beta parameters must be >= 1 (got alpha={alpha}, beta={beta})")]
    PriorFloor { alpha: f64, beta: f64 },
    #[error("trust is undefined with no prior and no observations")]
    UndefinedTrust,
    #[error("mean-square error needs n + n' > 0")]
    EmptyEstimator,
    #[error("bootstrap requires epsilon >= zeta (epsilon={epsilon}, zeta={zeta})")]
    BootstrapCoefficient { epsilon: f64, zeta: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnit { name: &'static str, value: f64 },
    #[error("positive count {r} exceeds observation count {n}")]
    CountMismatch { r: u64, n: u64 },
    #[error("packet loss rate must lie in [0, 1), got {0}")]
    LossRate(f64),
    #[error("negative rate or parameter: {0}")]
    Negative(&'static str),
}

pub type Result<T> = std::result::Result<T, TrustError>;

fn unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(TrustError::OutOfUnit { name, value })
    }
}

/// Outcome of one observed forwarding (or any binary) event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Positive,
    Negative,
}

/// `12 * Var(Beta(alpha, beta))`, which is 1 at the uniform prior and shrinks
/// as evidence accumulates.
pub fn beta_uncertainty(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 1.0 && beta >= 1.0) {
        return Err(TrustError::PriorFloor { alpha, beta });
    }
    let s = alpha + beta;
    Ok(12.0 * alpha * beta / (s * s * (s + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustOpinion {
    pub belief: f64,
    pub disbelief: f64,
    pub uncertainty: f64,
}

impl TrustOpinion {
    pub fn from_beta(alpha: f64, beta: f64) -> Result<Self> {
        let u = beta_uncertainty(alpha, beta)?;
        let s = alpha + beta;
        Ok(TrustOpinion {
            belief: alpha * (1.0 - u) / s,
            disbelief: beta * (1.0 - u) / s,
            uncertainty: u,
        })
    }
}

/// Per-scenario genuine packet loss rate of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelLossModel {
    plr: f64,
}

impl ChannelLossModel {
    pub fn new(plr: f64) -> Result<Self> {
        if (0.0..1.0).contains(&plr) {
            Ok(ChannelLossModel { plr })
        } else {
            Err(TrustError::LossRate(plr))
        }
    }

    pub fn lossless() -> Self {
        ChannelLossModel { plr: 0.0 }
    }

    pub fn plr(&self) -> f64 {
        self.plr
    }
}

/// Evidence counts after moving the expected channel losses from the
/// negative to the positive side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelAdjustment {
    pub alpha: f64,
    pub beta: f64,
    /// Set when the negative count would have dropped below the prior floor.
    pub clamped: bool,
}

pub const EVIDENCE_FLOOR: f64 = 1.0;

pub fn adjust_for_channel_loss(
    alpha0: u64,
    beta0: u64,
    channel: ChannelLossModel,
) -> ChannelAdjustment {
    let (a0, b0) = (alpha0 as f64, beta0 as f64);
    let shift = channel.plr * (a0 + b0);
    let raw_beta = b0 - shift;
    let clamped = raw_beta < EVIDENCE_FLOOR && shift > 0.0;
    ChannelAdjustment {
        alpha: a0 + shift,
        beta: if clamped { EVIDENCE_FLOOR } else { raw_beta },
        clamped,
    }
}

/// Beta evidence about one subject held by one observer.
///
/// Raw counters hold the observed events; `alpha`/`beta` are the
/// prior-inclusive Beta parameters after channel correction, so both start
/// at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceRecord {
    pub alpha: f64,
    pub beta: f64,
    pub raw_alpha: u64,
    pub raw_beta: u64,
    pub clamped: bool,
}

impl Default for EvidenceRecord {
    fn default() -> Self {
        EvidenceRecord::new()
    }
}

impl EvidenceRecord {
    pub fn new() -> Self {
        EvidenceRecord {
            alpha: 1.0,
            beta: 1.0,
            raw_alpha: 0,
            raw_beta: 0,
            clamped: false,
        }
    }

    pub fn from_counts(raw_alpha: u64, raw_beta: u64, channel: ChannelLossModel) -> Self {
        let adj = adjust_for_channel_loss(raw_alpha + 1, raw_beta + 1, channel);
        EvidenceRecord {
            alpha: adj.alpha,
            beta: adj.beta,
            raw_alpha,
            raw_beta,
            clamped: adj.clamped,
        }
    }

    pub fn observations(&self) -> u64 {
        self.raw_alpha + self.raw_beta
    }

    pub fn record(&self, outcome: Outcome, channel: ChannelLossModel) -> Self {
        let (a, b) = match outcome {
            Outcome::Positive => (self.raw_alpha + 1, self.raw_beta),
            Outcome::Negative => (self.raw_alpha, self.raw_beta + 1),
        };
        EvidenceRecord::from_counts(a, b, channel)
    }

    pub fn opinion(&self) -> TrustOpinion {
        // alpha, beta >= 1 by construction
        TrustOpinion::from_beta(self.alpha, self.beta).expect("evidence floor violated")
    }

    /// Behavioral trust: the belief component of the opinion.
    pub fn belief(&self) -> f64 {
        self.opinion().belief
    }

    /// Positive count after channel correction, excluding the prior.
    pub fn corrected_positives(&self) -> f64 {
        (self.alpha - 1.0).min(self.observations() as f64)
    }
}

pub fn opinion_from_evidence(ev: &EvidenceRecord) -> TrustOpinion {
    ev.opinion()
}

pub fn record_observation(
    ev: &EvidenceRecord,
    outcome: Outcome,
    channel: ChannelLossModel,
) -> EvidenceRecord {
    ev.record(outcome, channel)
}

// ---------------------------------------------------------------------------
// Social trust

pub const PROFILE_FEATURES: [&str; 4] = ["activities", "interests", "gender", "affiliations"];

/// A profile as named features, each a set of lowercase tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureProfile {
    features: BTreeMap<String, BTreeSet<String>>,
}

impl FeatureProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a feature from free text; tokens are lowercased and split on
    /// whitespace.
    pub fn with_text(mut self, feature: &str, text: &str) -> Self {
        self.set_tokens(feature, text.split_whitespace().map(str::to_string));
        self
    }

    pub fn set_tokens<I: IntoIterator<Item = String>>(&mut self, feature: &str, tokens: I) {
        let set: BTreeSet<String> = tokens.into_iter().map(|t| t.to_lowercase()).collect();
        self.features.insert(feature.to_lowercase(), set);
    }

    pub fn tokens(&self, feature: &str) -> Option<&BTreeSet<String>> {
        self.features.get(feature).filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSimilarityEvidence {
    pub alpha_s: u32,
    pub beta_s: u32,
    pub per_feature_scores: Vec<(String, f64)>,
    /// Features absent from either profile; scored 0.
    pub missing: Vec<String>,
}

/// Token-overlap score for one feature. Gender is an exact-match feature.
pub fn feature_similarity(feature: &str, a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if feature == "gender" {
        return if a == b { 1.0 } else { 0.0 };
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn profile_evidence(a: &FeatureProfile, b: &FeatureProfile) -> ProfileSimilarityEvidence {
    let mut ev = ProfileSimilarityEvidence {
        alpha_s: 0,
        beta_s: 0,
        per_feature_scores: Vec::with_capacity(PROFILE_FEATURES.len()),
        missing: Vec::new(),
    };
    for feature in PROFILE_FEATURES {
        let score = match (a.tokens(feature), b.tokens(feature)) {
            (Some(ta), Some(tb)) => feature_similarity(feature, ta, tb),
            _ => {
                ev.missing.push(feature.to_string());
                0.0
            }
        };
        if score > 0.5 {
            ev.alpha_s += 1;
        } else {
            ev.beta_s += 1;
        }
        ev.per_feature_scores.push((feature.to_string(), score));
    }
    ev
}

/// Inter-profile-similarity trust: the belief of Beta(alpha_s + 1, beta_s + 1).
pub fn ips_trust(a: &FeatureProfile, b: &FeatureProfile) -> (ProfileSimilarityEvidence, f64) {
    let ev = profile_evidence(a, b);
    let trust = ips_trust_from_counts(ev.alpha_s, ev.beta_s);
    (ev, trust)
}

pub fn ips_trust_from_counts(alpha_s: u32, beta_s: u32) -> f64 {
    let opinion =
        TrustOpinion::from_beta(alpha_s as f64 + 1.0, beta_s as f64 + 1.0).expect("floor holds");
    opinion.belief
}

/// Wall-post trust `1 - exp(-a x)` where `x = N_ij / (N_i / C)` compares the
/// posts on j's wall against i's average per-contact rate. No history gives 0.
pub fn wallpost_trust(posts_on_j: u64, total_posts: u64, contacts: u64, decay: f64) -> f64 {
    if total_posts == 0 || contacts == 0 {
        return 0.0;
    }
    let x = posts_on_j as f64 * contacts as f64 / total_posts as f64;
    1.0 - (-decay * x).exp()
}

/// `eta * W + (1 - eta) * I`.
pub fn social_trust(ips: f64, wallpost: f64, eta: f64) -> Result<f64> {
    unit("ips trust", ips)?;
    unit("wall-post trust", wallpost)?;
    unit("eta", eta)?;
    Ok(eta * wallpost + (1.0 - eta) * ips)
}

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Weight shifted from profile similarity to interactions as time passes and
/// the user becomes active: `min(1, (t / ramp) * min(1, activity / activity_ref))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSchedule {
    pub ramp_secs: f64,
    pub activity_ref: f64,
}

impl Default for EtaSchedule {
    fn default() -> Self {
        EtaSchedule {
            ramp_secs: 90.0 * SECONDS_PER_DAY,
            activity_ref: 50.0,
        }
    }
}

impl EtaSchedule {
    pub fn eta(&self, t_secs: f64, activity: f64) -> f64 {
        let time = (t_secs.max(0.0) / self.ramp_secs).min(1.0);
        let act = (activity.max(0.0) / self.activity_ref).min(1.0);
        (time * act).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialTrustState {
    pub ips_trust: f64,
    pub wallpost_trust: f64,
    pub eta: f64,
    pub social_trust: f64,
}

impl SocialTrustState {
    pub fn new(ips_trust: f64, wallpost_trust: f64, eta: f64) -> Result<Self> {
        let social_trust = social_trust(ips_trust, wallpost_trust, eta)?;
        Ok(SocialTrustState {
            ips_trust,
            wallpost_trust,
            eta,
            social_trust,
        })
    }
}

// ---------------------------------------------------------------------------
// Combined trust

/// MAP estimate of the Bernoulli parameter under a Beta(alpha, beta) prior:
/// `(r + alpha - 1) / (n + alpha + beta - 2)`.
pub fn map_combined_trust(r: u64, n: u64, prior_alpha: f64, prior_beta: f64) -> Result<f64> {
    if r > n {
        return Err(TrustError::CountMismatch { r, n });
    }
    map_trust_real(r as f64, n as f64, prior_alpha, prior_beta)
}

/// Same as [`map_combined_trust`] with fractional (channel-corrected) counts.
pub fn map_trust_real(r: f64, n: f64, prior_alpha: f64, prior_beta: f64) -> Result<f64> {
    if !(prior_alpha >= 1.0 && prior_beta >= 1.0) {
        return Err(TrustError::PriorFloor {
            alpha: prior_alpha,
            beta: prior_beta,
        });
    }
    let denom = n + prior_alpha + prior_beta - 2.0;
    if denom <= 0.0 {
        return Err(TrustError::UndefinedTrust);
    }
    Ok(((r + prior_alpha - 1.0) / denom).clamp(0.0, 1.0))
}

/// One-step update of the MAP trust without storing `r`.
pub fn incremental_trust_update(t_n: f64, n: u64, n_prime: f64, outcome: Outcome) -> f64 {
    let m = n as f64 + n_prime;
    match outcome {
        Outcome::Negative => t_n * m / (m + 1.0),
        Outcome::Positive => (t_n * m + 1.0) / (m + 1.0),
    }
}

/// Mean-square error of the MAP trust after `n` Bernoulli(`t_star`)
/// observations with prior mode `t_prime` and prior weight `n_prime`.
pub fn trust_mse(n: u64, n_prime: f64, t_star: f64, t_prime: f64) -> Result<f64> {
    if n_prime < 0.0 {
        return Err(TrustError::Negative("n'"));
    }
    unit("true trust", t_star)?;
    unit("prior mode", t_prime)?;
    let n = n as f64;
    let m = n + n_prime;
    if m <= 0.0 {
        return Err(TrustError::EmptyEstimator);
    }
    let bias = t_star - t_prime;
    Ok((n * t_star * (1.0 - t_star) + n_prime * n_prime * bias * bias) / (m * m))
}

/// MAP trust of one observer about one subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedTrustState {
    pub value: f64,
    pub n: u64,
    pub positives: u64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
}

impl CombinedTrustState {
    pub fn with_prior(prior_alpha: f64, prior_beta: f64) -> Result<Self> {
        let value = map_combined_trust(0, 0, prior_alpha, prior_beta)?;
        Ok(CombinedTrustState {
            value,
            n: 0,
            positives: 0,
            prior_alpha,
            prior_beta,
        })
    }

    /// Beta(1, 1) prior. The MAP estimate is undefined before the first
    /// observation, so the value starts at the prior mean.
    pub fn uniform() -> Self {
        CombinedTrustState {
            value: 0.5,
            n: 0,
            positives: 0,
            prior_alpha: 1.0,
            prior_beta: 1.0,
        }
    }

    /// Maps a social trust value to pseudo-counts
    /// `alpha = 1 + s * strength`, `beta = 1 + (1 - s) * strength`.
    pub fn from_social(social: f64, strength: f64) -> Result<Self> {
        unit("social trust", social)?;
        if !(strength > 0.0) {
            return Err(TrustError::UndefinedTrust);
        }
        Self::with_prior(1.0 + social * strength, 1.0 + (1.0 - social) * strength)
    }

    pub fn n_prime(&self) -> f64 {
        self.prior_alpha + self.prior_beta - 2.0
    }

    pub fn prior_mode(&self) -> Option<f64> {
        let np = self.n_prime();
        (np > 0.0).then(|| (self.prior_alpha - 1.0) / np)
    }

    pub fn observe(&mut self, outcome: Outcome) {
        let np = self.n_prime();
        if self.n == 0 && np == 0.0 {
            // no prior mass: the first observation defines the frequency
            self.value = if outcome == Outcome::Positive {
                1.0
            } else {
                0.0
            };
        } else {
            self.value = incremental_trust_update(self.value, self.n, np, outcome);
        }
        self.n += 1;
        if outcome == Outcome::Positive {
            self.positives += 1;
        }
    }

    /// Recomputes the value from (possibly channel-corrected) counts.
    pub fn set_counts(&mut self, positives: f64, n: u64) {
        self.n = n;
        self.positives = positives.floor() as u64;
        if let Ok(v) = map_trust_real(positives, n as f64, self.prior_alpha, self.prior_beta) {
            self.value = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapParams {
    pub epsilon: f64,
    pub zeta: f64,
    pub rho: f64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            epsilon: 0.7,
            zeta: 0.1,
            rho: 0.9,
        }
    }
}

impl BootstrapParams {
    pub fn validate(&self) -> Result<()> {
        unit("epsilon", self.epsilon)?;
        unit("zeta", self.zeta)?;
        unit("rho", self.rho)?;
        if self.epsilon < self.zeta {
            return Err(TrustError::BootstrapCoefficient {
                epsilon: self.epsilon,
                zeta: self.zeta,
            });
        }
        Ok(())
    }
}

/// The combined trust starts at the social trust value.
pub fn bootstrap_init(social: f64) -> Result<f64> {
    unit("social trust", social)
}

/// `(eps - zeta * step(1/2 - B)) * T + (1 - eps) * B`, with `step(0) = 0`.
pub fn bootstrap_update(current: f64, behavioral: f64, params: &BootstrapParams) -> Result<f64> {
    params.validate()?;
    unit("trust", current)?;
    unit("behavioral trust", behavioral)?;
    let penalty = if behavioral < 0.5 { params.zeta } else { 0.0 };
    Ok(
        ((params.epsilon - penalty) * current + (1.0 - params.epsilon) * behavioral)
            .clamp(0.0, 1.0),
    )
}

/// `rho * T + (1 - rho) * S`, applied when social trust is refreshed.
pub fn social_refresh(current: f64, social: f64, rho: f64) -> f64 {
    rho * current + (1.0 - rho) * social
}

#[cfg(test)]
mod tests {
    use super::*;

    // Beta moments by composite Simpson quadrature; independent of the
    // closed-form variance used above.
    fn simpson<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for k in 1..n {
            let x = k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    fn beta_var_quadrature(a: f64, b: f64) -> f64 {
        let kernel = |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0);
        let z = simpson(kernel, 20_000);
        let m1 = simpson(|x| x * kernel(x), 20_000) / z;
        let m2 = simpson(|x| x * x * kernel(x), 20_000) / z;
        m2 - m1 * m1
    }

    #[test]
    fn uncertainty_closed_cases() {
        assert_eq!(beta_uncertainty(1.0, 1.0).unwrap(), 1.0);
        let u = beta_uncertainty(10.0, 1.0).unwrap();
        let oracle = 12.0 * beta_var_quadrature(10.0, 1.0);
        assert!((u - oracle).abs() < 1e-8, "{u} vs {oracle}");
        assert!((u - 0.082645).abs() < 1e-6);
        let big = beta_uncertainty(1e6, 3e6).unwrap();
        assert!(big < 1e-5);
    }

    #[test]
    fn uncertainty_rejects_sub_floor() {
        assert!(matches!(
            beta_uncertainty(0.5, 2.0),
            Err(TrustError::PriorFloor { .. })
        ));
        assert!(beta_uncertainty(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn uncertainty_decreases_along_ratio() {
        let mut prev = 2.0;
        for k in 1..50 {
            let u = beta_uncertainty(3.0 * k as f64, k as f64).unwrap();
            assert!(u < prev);
            prev = u;
        }
    }

    #[test]
    fn opinion_examples() {
        let o = opinion_from_evidence(&EvidenceRecord::new());
        assert_eq!((o.belief, o.disbelief, o.uncertainty), (0.0, 0.0, 1.0));
        let o = TrustOpinion::from_beta(10.0, 1.0).unwrap();
        let u = 12.0 * beta_var_quadrature(10.0, 1.0);
        let b = 10.0 / 11.0 * (1.0 - u);
        assert!((o.belief - b).abs() < 1e-8);
        assert!((o.belief - 0.83396).abs() < 1e-5);
        assert!((o.belief + o.disbelief + o.uncertainty - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_adjust_examples() {
        let lossless = ChannelLossModel::lossless();
        let a = adjust_for_channel_loss(10, 10, lossless);
        assert_eq!((a.alpha, a.beta, a.clamped), (10.0, 10.0, false));
        let a = adjust_for_channel_loss(10, 10, ChannelLossModel::new(0.1).unwrap());
        assert!((a.alpha - 12.0).abs() < 1e-12 && (a.beta - 8.0).abs() < 1e-12 && !a.clamped);
        let a = adjust_for_channel_loss(2, 1, ChannelLossModel::new(0.5).unwrap());
        assert_eq!((a.alpha, a.beta, a.clamped), (3.5, 1.0, true));
        assert!(ChannelLossModel::new(1.0).is_err());
    }

    #[test]
    fn record_examples() {
        let ch = ChannelLossModel::lossless();
        let ev = EvidenceRecord::new().record(Outcome::Positive, ch);
        assert_eq!((ev.alpha, ev.beta), (2.0, 1.0));
        let ev = EvidenceRecord::new().record(Outcome::Negative, ch);
        assert_eq!((ev.alpha, ev.beta), (1.0, 2.0));
        assert_eq!(ev.observations(), 1);
    }

    #[test]
    fn ips_examples() {
        let full = |g: &str| {
            FeatureProfile::new()
                .with_text("activities", "hiking chess")
                .with_text("interests", "jazz films")
                .with_text("gender", g)
                .with_text("affiliations", "tulane")
        };
        let (ev, i) = ips_trust(&full("f"), &full("f"));
        assert_eq!((ev.alpha_s, ev.beta_s), (4, 0));
        let u = 12.0 * beta_var_quadrature(5.0, 1.0);
        assert!((i - 5.0 / 6.0 * (1.0 - u)).abs() < 1e-8);
        assert!((i - 0.634921).abs() < 1e-6);

        let other = FeatureProfile::new()
            .with_text("activities", "surfing")
            .with_text("interests", "opera")
            .with_text("gender", "m")
            .with_text("affiliations", "lsu");
        let (ev, i) = ips_trust(&full("f"), &other);
        assert_eq!((ev.alpha_s, ev.beta_s), (0, 4));
        assert!((i - 0.126984).abs() < 1e-6);

        let (ev, i) = ips_trust(&full("f"), &full("m"));
        assert_eq!((ev.alpha_s, ev.beta_s), (3, 1));
        let u = 12.0 * beta_var_quadrature(4.0, 2.0);
        assert!((i - 4.0 / 6.0 * (1.0 - u)).abs() < 1e-8);
        assert!((i - 0.412698).abs() < 1e-6);
    }

    #[test]
    fn ips_missing_feature_is_flagged() {
        let a = FeatureProfile::new()
            .with_text("activities", "chess")
            .with_text("interests", "jazz");
        let (ev, _) = ips_trust(&a, &a);
        assert_eq!(
            ev.missing,
            vec!["gender".to_string(), "affiliations".to_string()]
        );
        assert_eq!((ev.alpha_s, ev.beta_s), (2, 2));
    }

    #[test]
    fn jaccard_scoring_is_case_insensitive() {
        let a = FeatureProfile::new().with_text("interests", "Jazz Blues rock");
        let b = FeatureProfile::new().with_text("interests", "jazz blues");
        let s = feature_similarity(
            "interests",
            a.tokens("interests").unwrap(),
            b.tokens("interests").unwrap(),
        );
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wallpost_examples() {
        assert_eq!(wallpost_trust(0, 10, 5, 1.0), 0.0);
        // exactly the average rate
        let w = wallpost_trust(2, 10, 5, 1.0);
        assert!((w - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((w - 0.632121).abs() < 1e-6);
        assert!(wallpost_trust(1000, 1000, 100, 1.0) > 1.0 - 1e-12);
        assert_eq!(wallpost_trust(3, 0, 5, 1.0), 0.0);
        assert_eq!(wallpost_trust(3, 3, 0, 1.0), 0.0);
    }

    #[test]
    fn social_examples() {
        assert_eq!(social_trust(0.4, 0.8, 0.0).unwrap(), 0.4);
        assert_eq!(social_trust(0.4, 0.8, 1.0).unwrap(), 0.8);
        assert!((social_trust(0.4, 0.8, 0.5).unwrap() - 0.6).abs() < 1e-12);
        assert!(social_trust(1.2, 0.8, 0.5).is_err());
        let st = SocialTrustState::new(0.4, 0.8, 0.25).unwrap();
        assert!((st.social_trust - (0.25 * 0.8 + 0.75 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn eta_schedule_shape() {
        let s = EtaSchedule::default();
        assert_eq!(s.eta(0.0, 0.0), 0.0);
        assert_eq!(s.eta(1e12, 1e6), 1.0);
        let mut prev = 0.0;
        for day in 0..200 {
            let e = s.eta(day as f64 * SECONDS_PER_DAY, 30.0);
            assert!(e >= prev);
            prev = e;
        }
    }

    fn grid_argmax(r: u64, n: u64, a: f64, b: f64) -> f64 {
        let log_post = |x: f64| {
            let p = (r as f64 + a - 1.0) * x.ln() + ((n - r) as f64 + b - 1.0) * (1.0 - x).ln();
            if p.is_nan() {
                f64::NEG_INFINITY
            } else {
                p
            }
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=10_000 {
            let x = k as f64 * 1e-4;
            let v = log_post(x);
            if v > best.0 {
                best = (v, x);
            }
        }
        best.1
    }

    #[test]
    fn map_examples() {
        assert!((map_combined_trust(7, 10, 1.0, 1.0).unwrap() - 0.7).abs() < 1e-12);
        assert!((map_combined_trust(0, 0, 3.0, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let t = map_combined_trust(8, 10, 9.0, 3.0).unwrap();
        assert!((t - 0.8).abs() < 1e-12);
        assert!((grid_argmax(8, 10, 9.0, 3.0) - 0.8).abs() < 1e-4);
        assert_eq!(
            map_combined_trust(0, 0, 1.0, 1.0),
            Err(TrustError::UndefinedTrust)
        );
        assert!(map_combined_trust(3, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn incremental_examples() {
        let p = incremental_trust_update(0.5, 4, 2.0, Outcome::Positive);
        assert!((p - 4.0 / 7.0).abs() < 1e-12);
        // oracle: T=0.5 with n=4, n'=2 under alpha=beta=2 means r=2
        assert!((p - map_combined_trust(3, 5, 2.0, 2.0).unwrap()).abs() < 1e-12);
        let q = incremental_trust_update(0.5, 4, 2.0, Outcome::Negative);
        assert!((q - 3.0 / 7.0).abs() < 1e-12);
        assert!((q - map_combined_trust(2, 5, 2.0, 2.0).unwrap()).abs() < 1e-12);
        assert_eq!(
            incremental_trust_update(0.3, 0, 0.0, Outcome::Positive),
            1.0
        );
        assert_eq!(
            incremental_trust_update(0.3, 0, 0.0, Outcome::Negative),
            0.0
        );
    }

    #[test]
    fn mse_examples() {
        assert!((trust_mse(0, 4.0, 0.8, 0.5).unwrap() - 0.09).abs() < 1e-12);
        assert!((trust_mse(10, 0.0, 0.8, 0.5).unwrap() - 0.016).abs() < 1e-12);
        let m = trust_mse(20, 4.0, 0.8, 0.5).unwrap();
        assert!((m - 4.64 / 576.0).abs() < 1e-12);
        assert_eq!(trust_mse(0, 0.0, 0.5, 0.5), Err(TrustError::EmptyEstimator));
    }

    #[test]
    fn mse_monte_carlo_spot_check() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (n, a, b, p) = (20u64, 3.0, 3.0, 0.8);
        let trials = 200_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let r = (0..n).filter(|_| rng.gen::<f64>() < p).count() as f64;
            let t = (r + a - 1.0) / (n as f64 + a + b - 2.0);
            acc += (t - p) * (t - p);
        }
        let mc = acc / trials as f64;
        let exact = trust_mse(n, 4.0, 0.8, 0.5).unwrap();
        assert!((mc - exact).abs() < 1e-3, "{mc} vs {exact}");
    }

    #[test]
    fn combined_state_tracks_closed_form() {
        let mut st = CombinedTrustState::from_social(0.8, 10.0).unwrap();
        assert!((st.value - 0.8).abs() < 1e-12);
        assert_eq!(st.prior_mode(), Some(0.8));
        for k in 0..30 {
            st.observe(if k % 3 == 0 {
                Outcome::Negative
            } else {
                Outcome::Positive
            });
        }
        let closed = map_combined_trust(st.positives, st.n, st.prior_alpha, st.prior_beta).unwrap();
        assert!((st.value - closed).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_state_starts_from_first_observation() {
        let mut st = CombinedTrustState::uniform();
        st.observe(Outcome::Positive);
        st.observe(Outcome::Negative);
        assert!((st.value - 0.5).abs() < 1e-12);
        assert!(CombinedTrustState::with_prior(1.0, 1.0).is_err());
    }

    #[test]
    fn bootstrap_examples() {
        let p = BootstrapParams {
            epsilon: 0.7,
            zeta: 0.1,
            rho: 0.5,
        };
        assert_eq!(bootstrap_init(0.6).unwrap(), 0.6);
        assert_eq!(bootstrap_init(0.0).unwrap(), 0.0);
        assert_eq!(bootstrap_init(1.0).unwrap(), 1.0);
        assert!((bootstrap_update(0.5, 0.9, &p).unwrap() - 0.62).abs() < 1e-12);
        assert!((bootstrap_update(0.5, 0.3, &p).unwrap() - 0.39).abs() < 1e-12);
        assert!((bootstrap_update(0.7, 0.7, &p).unwrap() - 0.7).abs() < 1e-12);
        // no penalty exactly at one half
        assert!((bootstrap_update(0.5, 0.5, &p).unwrap() - 0.5).abs() < 1e-12);
        let bad = BootstrapParams {
            epsilon: 0.1,
            zeta: 0.2,
            rho: 0.5,
        };
        assert!(matches!(
            bootstrap_update(0.5, 0.5, &bad),
            Err(TrustError::BootstrapCoefficient { .. })
        ));
    }

    #[test]
    fn bootstrap_fixed_points() {
        let p = BootstrapParams::default();
        let mut t = 0.1;
        for _ in 0..200 {
            t = bootstrap_update(t, 0.8, &p).unwrap();
        }
        assert!((t - 0.8).abs() < 1e-9);
        let mut t = 0.9;
        for _ in 0..200 {
            t = bootstrap_update(t, 0.3, &p).unwrap();
        }
        let fixed = (1.0 - p.epsilon) * 0.3 / (1.0 - p.epsilon + p.zeta);
        assert!((t - fixed).abs() < 1e-9);
    }

    #[test]
    fn refresh_examples() {
        assert_eq!(social_refresh(0.8, 0.6, 1.0), 0.8);
        assert_eq!(social_refresh(0.8, 0.6, 0.0), 0.6);
        assert!((social_refresh(0.8, 0.6, 0.5) - 0.7).abs() < 1e-12);
    }
}
