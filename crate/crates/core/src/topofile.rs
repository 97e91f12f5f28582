//! Text format for allocation and ISM instances.
//!
//! ```text
//! range 400            # radio range; links derived from positions
//! capacity 50          # capacity of derived links
//! node 0 0 0           # id x y
//! link 0 1 5           # explicit directed link with capacity
//! source 0 3           # source destination
//! trust 0 1 0.9        # trust of 0 in 1
//! voucher 4 1 2        # 1 and 2 vouch for 4
//! seed 0 1             # 0 has verified 1 out of band
//! ```
//!
//! When any `link` line is present the links are taken verbatim; otherwise
//! every pair within `range` is linked both ways with `capacity`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::identity::VoucherGraph;
use crate::network::{CapacityModel, Link, NetworkError, NodeId, Position, Topology, TrustMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyFileError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("no links given and no `range` line to derive them")]
    MissingRange,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, TopologyFileError>;

pub const DEFAULT_CAPACITY: f64 = 50.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologyFile {
    pub positions: Vec<(NodeId, Position)>,
    pub links: Vec<Link>,
    pub range: Option<f64>,
    pub capacity: Option<f64>,
    pub sources: Vec<(NodeId, NodeId)>,
    pub trust: TrustMap,
    pub vouchers: BTreeMap<NodeId, Vec<NodeId>>,
    pub seeds: Vec<(NodeId, NodeId)>,
}

fn field<T: FromStr>(fields: &[&str], k: usize, what: &str, line: usize) -> Result<T> {
    fields
        .get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| TopologyFileError::Line {
            line,
            message: format!("bad or missing {what}"),
        })
}

fn node(fields: &[&str], k: usize, line: usize) -> Result<NodeId> {
    field::<u32>(fields, k, "node id", line).map(NodeId)
}

fn arity(fields: &[&str], n: usize, line: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(TopologyFileError::Line {
            line,
            message: format!(
                "`{}` takes {} fields, found {}",
                fields[0],
                n - 1,
                fields.len() - 1
            ),
        })
    }
}

impl TopologyFile {
    pub fn parse(input: &str) -> Result<Self> {
        let mut file = TopologyFile::default();
        let mut seen = BTreeMap::new();
        for (k, raw) in input.lines().enumerate() {
            let line = k + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let f: Vec<&str> = text.split_whitespace().collect();
            match f[0] {
                "node" => {
                    arity(&f, 4, line)?;
                    let id = node(&f, 1, line)?;
                    let pos = Position::new(field(&f, 2, "x", line)?, field(&f, 3, "y", line)?);
                    if seen.insert(id, line).is_some() {
                        return Err(TopologyFileError::Line {
                            line,
                            message: format!("duplicate node id {id}"),
                        });
                    }
                    file.positions.push((id, pos));
                }
                "link" => {
                    arity(&f, 4, line)?;
                    file.links.push(Link {
                        src: node(&f, 1, line)?,
                        dst: node(&f, 2, line)?,
                        capacity: field(&f, 3, "capacity", line)?,
                    });
                }
                "range" => {
                    arity(&f, 2, line)?;
                    file.range = Some(field(&f, 1, "range", line)?);
                }
                "capacity" => {
                    arity(&f, 2, line)?;
                    file.capacity = Some(field(&f, 1, "capacity", line)?);
                }
                "source" => {
                    arity(&f, 3, line)?;
                    file.sources.push((node(&f, 1, line)?, node(&f, 2, line)?));
                }
                "trust" => {
                    arity(&f, 4, line)?;
                    let value: f64 = field(&f, 3, "trust value", line)?;
                    if !(0.0..=1.0).contains(&value) {
                        return Err(TopologyFileError::Line {
                            line,
                            message: format!("trust {value} outside [0, 1]"),
                        });
                    }
                    file.trust
                        .insert(node(&f, 1, line)?, node(&f, 2, line)?, value);
                }
                "voucher" => {
                    if f.len() < 3 {
                        return Err(TopologyFileError::Line {
                            line,
                            message: "`voucher` needs a subject and at least one voucher".into(),
                        });
                    }
                    let subject = node(&f, 1, line)?;
                    let list = (2..f.len())
                        .map(|k| node(&f, k, line))
                        .collect::<Result<Vec<_>>>()?;
                    file.vouchers.entry(subject).or_default().extend(list);
                }
                "seed" => {
                    arity(&f, 3, line)?;
                    file.seeds.push((node(&f, 1, line)?, node(&f, 2, line)?));
                }
                other => {
                    return Err(TopologyFileError::Line {
                        line,
                        message: format!("unknown directive {other:?}"),
                    })
                }
            }
        }
        Ok(file)
    }

    pub fn topology(&self) -> Result<Topology> {
        if !self.links.is_empty() {
            let range = self.range.unwrap_or(f64::INFINITY);
            return Ok(Topology::from_links(&self.positions, &self.links, range)?);
        }
        let range = self.range.ok_or(TopologyFileError::MissingRange)?;
        let capacity = CapacityModel::Constant(self.capacity.unwrap_or(DEFAULT_CAPACITY));
        Ok(Topology::build(&self.positions, range, &capacity)?)
    }

    /// Voucher graph with the file's trust values, or `None` when the file
    /// carries no identity data.
    pub fn voucher_graph(&self) -> Result<Option<VoucherGraph>> {
        if self.vouchers.is_empty() && self.seeds.is_empty() {
            return Ok(None);
        }
        let mut g = VoucherGraph::new();
        for (id, _) in &self.positions {
            g.add_node(*id);
        }
        for (subject, list) in &self.vouchers {
            for v in list {
                g.add_voucher(*subject, *v).map_err(NetworkError::from)?;
            }
        }
        for (observer, verified) in &self.seeds {
            g.add_seed(*observer, *verified);
        }
        for ((i, j), t) in self.trust.iter() {
            g.set_trust(i, j, t);
        }
        Ok(Some(g))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.range {
            let _ = writeln!(out, "range {r}");
        }
        if let Some(c) = self.capacity {
            let _ = writeln!(out, "capacity {c}");
        }
        for (id, p) in &self.positions {
            let _ = writeln!(out, "node {id} {} {}", p.x, p.y);
        }
        for l in &self.links {
            let _ = writeln!(out, "link {} {} {}", l.src, l.dst, l.capacity);
        }
        for (s, d) in &self.sources {
            let _ = writeln!(out, "source {s} {d}");
        }
        for ((i, j), t) in self.trust.iter() {
            let _ = writeln!(out, "trust {i} {j} {t}");
        }
        for (subject, list) in &self.vouchers {
            let ids: Vec<String> = list.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "voucher {subject} {}", ids.join(" "));
        }
        for (o, v) in &self.seeds {
            let _ = writeln!(out, "seed {o} {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# diamond
node 0 0 0
node 1 1 1
node 2 1 -1
node 3 2 0
link 0 1 5
link 1 3 5
link 0 2 2
link 2 3 2
source 0 3
trust 0 1 0.9
trust 1 3 1
trust 0 2 0.6
trust 2 3 1
";

    #[test]
    fn parses_and_round_trips() {
        let f = TopologyFile::parse(SAMPLE).unwrap();
        assert_eq!(f.positions.len(), 4);
        assert_eq!(f.links.len(), 4);
        assert_eq!(f.sources, vec![(NodeId(0), NodeId(3))]);
        assert_eq!(f.trust.get(NodeId(0), NodeId(2)), Some(0.6));
        assert_eq!(TopologyFile::parse(&f.render()).unwrap(), f);
        assert_eq!(f.topology().unwrap().link_count(), 4);
        assert!(f.voucher_graph().unwrap().is_none());
    }

    #[test]
    fn rejects_bad_lines() {
        let err = TopologyFile::parse("node 0 0 0\nnode 0 1 1\n").unwrap_err();
        assert!(matches!(err, TopologyFileError::Line { line: 2, .. }));
        assert!(TopologyFile::parse("node a 0 0\n").is_err());
        assert!(TopologyFile::parse("edge 0 1\n").is_err());
        assert!(TopologyFile::parse("trust 0 1 1.5\n").is_err());
        let f = TopologyFile::parse("node 0 0 0\n").unwrap();
        assert_eq!(f.topology(), Err(TopologyFileError::MissingRange));
    }

    #[test]
    fn derived_links() {
        let f = TopologyFile::parse("range 10\ncapacity 3\nnode 0 0 0\nnode 1 5 0\nnode 2 20 0\n")
            .unwrap();
        let t = f.topology().unwrap();
        assert_eq!(t.link_count(), 2);
        assert_eq!(t.capacity(NodeId(0), NodeId(1)), Some(3.0));
    }
}
