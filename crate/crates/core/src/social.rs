//! Wall-post and profile ingestion.
//!
//! Wall-post files hold one `owner poster timestamp content_length` record per
//! line; profile files hold `user <id>` blocks followed by `feature: tokens`
//! lines. Both accept `#` comments and blank lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trust::{wallpost_trust, EtaSchedule, FeatureProfile};

pub const SECONDS_PER_MONTH: i64 = 30 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{}", join_lines(.0))]
    Lines(Vec<LineError>),
    #[error("line {line}: duplicate profile for user {user}")]
    DuplicateUser { user: String, line: usize },
    #[error("user {0} has posts but no contact count")]
    MissingContacts(String),
    #[error("user {user} has a nonpositive contact count")]
    BadContacts { user: String },
    #[error("unknown user {0}")]
    UnknownUser(String),
}

fn join_lines(errors: &[LineError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WallPostRecord {
    pub owner: String,
    pub poster: String,
    pub timestamp: i64,
    pub content_length: u64,
}

/// Records that parsed plus one error per rejected line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

impl<T> ParseReport<T> {
    /// The records, or every line error if there was any.
    pub fn into_result(self) -> Result<Vec<T>> {
        if self.errors.is_empty() {
            Ok(self.records)
        } else {
            Err(IngestError::Lines(self.errors))
        }
    }
}

fn content(line: &str) -> &str {
    match line.find('#') {
        Some(k) => line[..k].trim(),
        None => line.trim(),
    }
}

pub fn parse_wallposts(input: &str) -> ParseReport<WallPostRecord> {
    let mut report = ParseReport {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (k, raw) in input.lines().enumerate() {
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fail = |message: String| LineError {
            line: k + 1,
            message,
        };
        if fields.len() != 4 {
            report
                .errors
                .push(fail(format!("expected 4 fields, found {}", fields.len())));
            continue;
        }
        let timestamp = match fields[2].parse::<i64>() {
            Ok(t) if t >= 0 => t,
            _ => {
                report
                    .errors
                    .push(fail(format!("bad timestamp {:?}", fields[2])));
                continue;
            }
        };
        let Ok(content_length) = fields[3].parse::<u64>() else {
            report
                .errors
                .push(fail(format!("bad content length {:?}", fields[3])));
            continue;
        };
        report.records.push(WallPostRecord {
            owner: fields[0].to_string(),
            poster: fields[1].to_string(),
            timestamp,
            content_length,
        });
    }
    report
}

pub fn write_wallposts(records: &[WallPostRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            r.owner, r.poster, r.timestamp, r.content_length
        );
    }
    out
}

/// Contact-count file: `user count` per line.
pub fn parse_contacts(input: &str) -> ParseReport<(String, u64)> {
    let mut report = ParseReport {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (k, raw) in input.lines().enumerate() {
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields.as_slice(), fields.get(1).map(|c| c.parse::<u64>())) {
            ([user, _], Some(Ok(c))) => report.records.push((user.to_string(), c)),
            _ => report.errors.push(LineError {
                line: k + 1,
                message: format!("expected `user count`, found {line:?}"),
            }),
        }
    }
    report
}

/// Where the per-user contact count `C` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ContactCounts {
    Explicit(BTreeMap<String, u64>),
    /// Number of distinct users each user exchanged wall posts with, in
    /// either direction.
    DistinctPartners,
}

/// Post counts `N_ij` (posts by i on j's wall) and totals `N_i`. Posts on
/// one's own wall are not interactions and are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLedger {
    pairs: BTreeMap<(String, String), u64>,
    totals: BTreeMap<String, u64>,
    contacts: BTreeMap<String, u64>,
}

impl InteractionLedger {
    pub fn posts(&self, poster: &str, owner: &str) -> u64 {
        self.pairs
            .get(&(poster.to_string(), owner.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_posts(&self, poster: &str) -> u64 {
        self.totals.get(poster).copied().unwrap_or(0)
    }

    pub fn contacts(&self, user: &str) -> u64 {
        self.contacts.get(user).copied().unwrap_or(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.pairs
            .iter()
            .map(|((i, j), n)| (i.as_str(), j.as_str(), *n))
    }

    pub fn posters(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.totals.iter().map(|(i, n)| (i.as_str(), *n))
    }

    pub fn wallpost_trust(&self, i: &str, j: &str, decay: f64) -> f64 {
        wallpost_trust(
            self.posts(i, j),
            self.total_posts(i),
            self.contacts(i),
            decay,
        )
    }
}

pub fn build_ledger(
    records: &[WallPostRecord],
    contacts: &ContactCounts,
) -> Result<InteractionLedger> {
    let mut ledger = InteractionLedger::default();
    let mut partners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        if r.owner == r.poster {
            continue;
        }
        *ledger
            .pairs
            .entry((r.poster.clone(), r.owner.clone()))
            .or_default() += 1;
        *ledger.totals.entry(r.poster.clone()).or_default() += 1;
        partners.entry(&r.poster).or_default().insert(&r.owner);
        partners.entry(&r.owner).or_default().insert(&r.poster);
    }
    match contacts {
        ContactCounts::Explicit(map) => {
            for (user, &c) in map {
                if c == 0 && ledger.totals.contains_key(user) {
                    return Err(IngestError::BadContacts { user: user.clone() });
                }
            }
            if let Some(user) = ledger.totals.keys().find(|u| !map.contains_key(*u)) {
                return Err(IngestError::MissingContacts(user.clone()));
            }
            ledger.contacts = map.clone();
        }
        ContactCounts::DistinctPartners => {
            ledger.contacts = partners
                .into_iter()
                .map(|(u, p)| (u.to_string(), p.len() as u64))
                .collect();
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    /// 1-based 30-day bucket counted from the earliest post.
    pub month: u32,
    pub posts_on_j: u64,
    pub total_posts: u64,
    pub wallpost_trust: f64,
    /// Seconds from the earliest post to the end of this bucket.
    pub elapsed_secs: f64,
}

/// Cumulative wall-post trust of `i` in `j` at the end of every month from the
/// first post in the data set to the last.
pub fn trust_timeseries(
    records: &[WallPostRecord],
    contacts: &ContactCounts,
    i: &str,
    j: &str,
    decay: f64,
) -> Result<Vec<SeriesPoint>> {
    let mut sorted: Vec<&WallPostRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.timestamp);
    let (Some(first), Some(last)) = (sorted.first(), sorted.last()) else {
        return Ok(Vec::new());
    };
    let origin = first.timestamp;
    let months = ((last.timestamp - origin) / SECONDS_PER_MONTH + 1) as u32;
    // contact counts come from the whole data set so they stay fixed over time
    let full = build_ledger(records, contacts)?;
    let c = full.contacts(i);
    if full.total_posts(i) > 0 && c == 0 {
        return Err(IngestError::MissingContacts(i.to_string()));
    }
    let mut series = Vec::with_capacity(months as usize);
    let (mut nij, mut ni) = (0u64, 0u64);
    let mut next = sorted.iter().peekable();
    for m in 1..=months {
        let end = origin + m as i64 * SECONDS_PER_MONTH;
        while let Some(r) = next.next_if(|r| r.timestamp < end) {
            if r.poster == i && r.owner != i {
                ni += 1;
                if r.owner == j {
                    nij += 1;
                }
            }
        }
        series.push(SeriesPoint {
            month: m,
            posts_on_j: nij,
            total_posts: ni,
            wallpost_trust: wallpost_trust(nij, ni, c, decay),
            elapsed_secs: (m as i64 * SECONDS_PER_MONTH) as f64,
        });
    }
    Ok(series)
}

/// Interaction weight for a series point, with the user's posts so far as
/// the activity measure.
pub fn series_eta(point: &SeriesPoint, schedule: &EtaSchedule) -> f64 {
    schedule.eta(point.elapsed_secs, point.total_posts as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileRecord {
    pub user: String,
    pub activities: Vec<String>,
    pub interests: Vec<String>,
    pub affiliations: Vec<String>,
    pub gender: Vec<String>,
    /// Sections absent from the block.
    pub missing: Vec<String>,
}

const SECTIONS: [&str; 4] = ["activities", "interests", "affiliations", "gender"];

impl ProfileRecord {
    fn section_mut(&mut self, name: &str) -> Option<&mut Vec<String>> {
        match name {
            "activities" => Some(&mut self.activities),
            "interests" => Some(&mut self.interests),
            "affiliations" => Some(&mut self.affiliations),
            "gender" => Some(&mut self.gender),
            _ => None,
        }
    }

    fn section(&self, name: &str) -> &[String] {
        match name {
            "activities" => &self.activities,
            "interests" => &self.interests,
            "affiliations" => &self.affiliations,
            _ => &self.gender,
        }
    }

    pub fn to_feature_profile(&self) -> FeatureProfile {
        let mut p = FeatureProfile::new();
        for name in SECTIONS {
            p.set_tokens(name, self.section(name).iter().cloned());
        }
        p
    }
}

fn tokens(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

pub fn parse_profiles(input: &str) -> Result<Vec<ProfileRecord>> {
    let mut records: Vec<ProfileRecord> = Vec::new();
    let mut seen_sections: BTreeSet<&str> = BTreeSet::new();
    let mut users: BTreeMap<String, usize> = BTreeMap::new();
    let mut errors = Vec::new();

    fn finish(record: &mut ProfileRecord, seen: &BTreeSet<&str>) {
        record.missing = SECTIONS
            .iter()
            .filter(|s| !seen.contains(*s))
            .map(|s| s.to_string())
            .collect();
    }

    for (k, raw) in input.lines().enumerate() {
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line
            .strip_prefix("user ")
            .or_else(|| (line == "user").then_some(""))
        {
            let id = rest.trim();
            if id.is_empty() || id.contains(char::is_whitespace) {
                errors.push(LineError {
                    line: k + 1,
                    message: "expected `user <id>`".into(),
                });
                continue;
            }
            if users.contains_key(id) {
                return Err(IngestError::DuplicateUser {
                    user: id.to_string(),
                    line: k + 1,
                });
            }
            if let Some(prev) = records.last_mut() {
                finish(prev, &seen_sections);
            }
            users.insert(id.to_string(), records.len());
            records.push(ProfileRecord {
                user: id.to_string(),
                ..Default::default()
            });
            seen_sections.clear();
            continue;
        }
        let Some((name, value)) = line.split_once(':') else {
            errors.push(LineError {
                line: k + 1,
                message: format!("expected `section: tokens`, found {line:?}"),
            });
            continue;
        };
        let name = name.trim().to_lowercase();
        let Some(current) = records.last_mut() else {
            errors.push(LineError {
                line: k + 1,
                message: "section before any `user` line".into(),
            });
            continue;
        };
        match SECTIONS.iter().find(|s| **s == name) {
            Some(s) => {
                seen_sections.insert(s);
                current
                    .section_mut(s)
                    .expect("known section")
                    .extend(tokens(value));
            }
            None => errors.push(LineError {
                line: k + 1,
                message: format!("unknown section {name:?}"),
            }),
        }
    }
    if let Some(last) = records.last_mut() {
        finish(last, &seen_sections);
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::Lines(errors))
    }
}

pub fn write_profiles(records: &[ProfileRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "user {}", r.user);
        for name in SECTIONS {
            if !r.missing.iter().any(|m| m == name) {
                let _ = writeln!(out, "{}: {}", name, r.section(name).join(" "));
            }
        }
    }
    out
}

pub fn find_profile<'a>(records: &'a [ProfileRecord], user: &str) -> Result<&'a ProfileRecord> {
    records
        .iter()
        .find(|r| r.user == user)
        .ok_or_else(|| IngestError::UnknownUser(user.to_string()))
}

/// Generator for wall-post data sets with one focal pair: user `u0` puts
/// `concentration` of its posts on `u1`'s wall, everyone else posts on
/// uniformly random walls.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLedgerConfig {
    pub users: usize,
    pub months: u32,
    pub posts_per_month: u32,
    pub concentration: f64,
    pub contacts: u64,
    pub seed: u64,
}

impl Default for SyntheticLedgerConfig {
    fn default() -> Self {
        SyntheticLedgerConfig {
            users: 20,
            months: 6,
            posts_per_month: 20,
            concentration: 1.0,
            contacts: 20,
            seed: 1,
        }
    }
}

impl SyntheticLedgerConfig {
    pub fn user(k: usize) -> String {
        format!("u{k}")
    }

    pub fn contact_counts(&self) -> ContactCounts {
        ContactCounts::Explicit(
            (0..self.users)
                .map(|k| (Self::user(k), self.contacts))
                .collect(),
        )
    }

    /// Records sorted by timestamp, starting at time 0.
    pub fn generate(&self) -> Vec<WallPostRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut records = Vec::new();
        if self.users < 2 {
            return records;
        }
        for m in 0..self.months as i64 {
            for poster in 0..self.users {
                for _ in 0..self.posts_per_month {
                    let owner = if poster == 0 && rng.gen_bool(self.concentration.clamp(0.0, 1.0)) {
                        1
                    } else {
                        let o = rng.gen_range(0..self.users - 1);
                        if o >= poster {
                            o + 1
                        } else {
                            o
                        }
                    };
                    let timestamp = m * SECONDS_PER_MONTH + rng.gen_range(0..SECONDS_PER_MONTH);
                    records.push(WallPostRecord {
                        owner: Self::user(owner),
                        poster: Self::user(poster),
                        timestamp,
                        content_length: rng.gen_range(1..400),
                    });
                }
            }
        }
        records.sort_by_key(|r| r.timestamp);
        records
    }
}
