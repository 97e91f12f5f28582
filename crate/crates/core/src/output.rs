//! CSV writers. Column order is fixed per table and rows follow the order of
//! the input slices.

use std::io::Write;

use crate::flow::{AllocationProblem, FlowAllocation, TraceRow};
use crate::network::NodeId;
use crate::sim::{RoundMetrics, RunSummary, SweepRow, TrustDumpRow};
use crate::Result;

pub const METRICS_HEADER: [&str; 9] = [
    "round",
    "packets_sent",
    "packets_delivered",
    "delivery_ratio",
    "throughput",
    "avoid_probability",
    "detected_malicious",
    "spoofed_fraction",
    "admissible_paths",
];

pub const TRUST_DUMP_HEADER: [&str; 4] = ["observer", "subject", "value", "n"];

pub const ALLOCATION_HEADER: [&str; 6] = [
    "source",
    "destination",
    "path_index",
    "path",
    "trust",
    "rate",
];

pub const SERIES_HEADER: [&str; 7] = [
    "month",
    "posts_on_j",
    "posts_i",
    "wallpost_trust",
    "ips_trust",
    "eta",
    "social_trust",
];

pub const TRUST_DEMO_HEADER: [&str; 8] = [
    "observation",
    "outcome",
    "alpha",
    "beta",
    "belief",
    "uncertainty",
    "map_trust",
    "bootstrap_trust",
];

pub const ISM_HEADER: [&str; 3] = ["observer", "subject", "ism"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush()?;
    Ok(())
}

pub fn write_metrics<W: Write>(w: W, rows: &[RoundMetrics]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(METRICS_HEADER)?;
    for m in rows {
        out.write_record([
            m.round.to_string(),
            m.packets_sent.to_string(),
            m.packets_delivered.to_string(),
            m.delivery_ratio.to_string(),
            m.throughput.to_string(),
            m.avoid_probability.to_string(),
            m.detected_malicious.to_string(),
            m.spoofed_fraction.to_string(),
            m.admissible_paths.to_string(),
        ])?;
    }
    finish(out)
}

pub fn write_trust_dump<W: Write>(w: W, rows: &[TrustDumpRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRUST_DUMP_HEADER)?;
    for r in rows {
        out.write_record([
            r.observer.to_string(),
            r.subject.to_string(),
            r.value.to_string(),
            r.n.to_string(),
        ])?;
    }
    finish(out)
}

pub fn sweep_header() -> Vec<String> {
    let mut h = vec!["axis".to_string(), "value".to_string(), "runs".to_string()];
    for f in RunSummary::FIELDS {
        h.push(format!("{f}_mean"));
        h.push(format!("{f}_std"));
    }
    h
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(sweep_header())?;
    for r in rows {
        let mut rec = vec![r.axis.to_string(), r.value.to_string(), r.runs.to_string()];
        for (m, s) in r.mean.values().iter().zip(r.std.values()) {
            rec.push(m.to_string());
            rec.push(s.to_string());
        }
        out.write_record(rec)?;
    }
    finish(out)
}

/// One row per admissible path with its trust and allocated rate.
pub fn write_allocation<W: Write>(
    w: W,
    problem: &AllocationProblem,
    allocation: &FlowAllocation,
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(ALLOCATION_HEADER)?;
    for (s, src) in problem.sources.iter().enumerate() {
        for (p, path) in src.paths.iter().enumerate() {
            out.write_record([
                src.source.to_string(),
                src.destination.to_string(),
                p.to_string(),
                path.to_string(),
                src.trusts[p].to_string(),
                allocation.rates[s][p].to_string(),
            ])?;
        }
    }
    finish(out)
}

/// Solver iterations; one `rate_<k>` column per source.
pub fn write_trace<W: Write>(w: W, sources: usize, rows: &[TraceRow]) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec![
        "iteration".to_string(),
        "dual_value".to_string(),
        "primal_residual".to_string(),
    ];
    header.extend((0..sources).map(|k| format!("rate_{k}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.iteration.to_string(),
            r.dual_value.to_string(),
            r.primal_residual.to_string(),
        ];
        rec.extend(r.source_rates.iter().map(f64::to_string));
        out.write_record(rec)?;
    }
    finish(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialSeriesRow {
    pub month: u32,
    pub posts_on_j: u64,
    pub posts_i: u64,
    pub wallpost_trust: f64,
    pub ips_trust: f64,
    pub eta: f64,
    pub social_trust: f64,
}

pub fn write_series<W: Write>(w: W, rows: &[SocialSeriesRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SERIES_HEADER)?;
    for r in rows {
        out.write_record([
            r.month.to_string(),
            r.posts_on_j.to_string(),
            r.posts_i.to_string(),
            r.wallpost_trust.to_string(),
            r.ips_trust.to_string(),
            r.eta.to_string(),
            r.social_trust.to_string(),
        ])?;
    }
    finish(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustDemoRow {
    pub observation: u64,
    pub positive: bool,
    pub alpha: f64,
    pub beta: f64,
    pub belief: f64,
    pub uncertainty: f64,
    pub map_trust: f64,
    pub bootstrap_trust: f64,
}

pub fn write_trust_demo<W: Write>(w: W, rows: &[TrustDemoRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRUST_DEMO_HEADER)?;
    for r in rows {
        out.write_record([
            r.observation.to_string(),
            if r.positive { "positive" } else { "negative" }.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.belief.to_string(),
            r.uncertainty.to_string(),
            r.map_trust.to_string(),
            r.bootstrap_trust.to_string(),
        ])?;
    }
    finish(out)
}

pub fn write_ism<W: Write>(w: W, rows: &[(NodeId, NodeId, f64)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(ISM_HEADER)?;
    for (i, j, v) in rows {
        out.write_record([i.to_string(), j.to_string(), v.to_string()])?;
    }
    finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SweepAxis;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn metrics_layout() {
        let rows = [RoundMetrics {
            round: 3,
            packets_sent: 400,
            packets_delivered: 390,
            delivery_ratio: 0.975,
            throughput: 390.0,
            avoid_probability: 1.0,
            detected_malicious: 2,
            spoofed_fraction: 0.0,
            admissible_paths: 7,
        }];
        let s = text(|b| write_metrics(b, &rows));
        assert_eq!(
            s,
            "round,packets_sent,packets_delivered,delivery_ratio,throughput,avoid_probability,\
             detected_malicious,spoofed_fraction,admissible_paths\n3,400,390,0.975,390,1,2,0,7\n"
        );
    }

    #[test]
    fn empty_tables_keep_headers() {
        assert_eq!(text(|b| write_metrics(b, &[])).lines().count(), 1);
        assert_eq!(
            text(|b| write_trust_dump(b, &[])),
            "observer,subject,value,n\n"
        );
        assert_eq!(
            text(|b| write_trace(b, 2, &[])),
            "iteration,dual_value,primal_residual,rate_0,rate_1\n"
        );
    }

    #[test]
    fn sweep_columns() {
        let row = SweepRow {
            axis: SweepAxis::TauT,
            value: 0.5,
            runs: 5,
            mean: RunSummary::default(),
            std: RunSummary::default(),
        };
        let s = text(|b| write_sweep(b, &[row]));
        let mut lines = s.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 3 + 2 * RunSummary::FIELDS.len());
        assert_eq!(
            &header[..5],
            &[
                "axis",
                "value",
                "runs",
                "delivery_ratio_mean",
                "delivery_ratio_std"
            ]
        );
        assert!(lines.next().unwrap().starts_with("tau-t,0.5,5,0,0"));
    }
}
