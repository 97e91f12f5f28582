//! Topologies, k link-disjoint path discovery, path trust and routing
//! matrices.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::identity::{path_spoof_probability, IsmMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("radio range must be positive, got {0}")]
    BadRange(f64),
    #[error("capacity must be finite and nonnegative, got {0}")]
    BadCapacity(f64),
    #[error("source and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("k must be at least 1")]
    ZeroPaths,
    #[error("no trust entry for link {0} -> {1}")]
    MissingTrust(NodeId, NodeId),
    #[error("path uses {0} -> {1}, which is not a topology link")]
    NotALink(NodeId, NodeId),
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error(transparent)]
    Ism(#[from] crate::identity::IsmError),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Position, t: f64) -> Position {
        Position {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CapacityModel {
    Constant(f64),
    /// Per-link capacities keyed by (src, dst); unlisted links get `default`.
    Table {
        table: BTreeMap<(NodeId, NodeId), f64>,
        default: f64,
    },
}

impl CapacityModel {
    fn capacity(&self, src: NodeId, dst: NodeId) -> f64 {
        match self {
            CapacityModel::Constant(c) => *c,
            CapacityModel::Table { table, default } => {
                table.get(&(src, dst)).copied().unwrap_or(*default)
            }
        }
    }
}

fn check_capacity(c: f64) -> Result<f64> {
    if c.is_finite() && c >= 0.0 {
        Ok(c)
    } else {
        Err(NetworkError::BadCapacity(c))
    }
}

/// Nodes with positions and directed capacitated links.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Position>,
    links: BTreeMap<(NodeId, NodeId), f64>,
    adjacency: BTreeMap<NodeId, Vec<NodeId>>,
    pub radio_range: f64,
}

impl Topology {
    /// Links every pair within `radio_range` in both directions.
    pub fn build(
        positions: &[(NodeId, Position)],
        radio_range: f64,
        capacity: &CapacityModel,
    ) -> Result<Self> {
        if !(radio_range > 0.0) {
            return Err(NetworkError::BadRange(radio_range));
        }
        let mut nodes = BTreeMap::new();
        for &(id, pos) in positions {
            if nodes.insert(id, pos).is_some() {
                return Err(NetworkError::DuplicateNode(id));
            }
        }
        let mut links = BTreeMap::new();
        let list: Vec<_> = nodes.iter().map(|(k, v)| (*k, *v)).collect();
        for (a, (ia, pa)) in list.iter().enumerate() {
            for (ib, pb) in &list[a + 1..] {
                if pa.distance(pb) <= radio_range {
                    links.insert((*ia, *ib), check_capacity(capacity.capacity(*ia, *ib))?);
                    links.insert((*ib, *ia), check_capacity(capacity.capacity(*ib, *ia))?);
                }
            }
        }
        Ok(Self::assemble(nodes, links, radio_range))
    }

    /// Explicit topology; links are taken as given.
    pub fn from_links(
        positions: &[(NodeId, Position)],
        links: &[Link],
        radio_range: f64,
    ) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for &(id, pos) in positions {
            if nodes.insert(id, pos).is_some() {
                return Err(NetworkError::DuplicateNode(id));
            }
        }
        let mut map = BTreeMap::new();
        for l in links {
            for end in [l.src, l.dst] {
                if !nodes.contains_key(&end) {
                    return Err(NetworkError::UnknownNode(end));
                }
            }
            map.insert((l.src, l.dst), check_capacity(l.capacity)?);
        }
        Ok(Self::assemble(nodes, map, radio_range))
    }

    fn assemble(
        nodes: BTreeMap<NodeId, Position>,
        links: BTreeMap<(NodeId, NodeId), f64>,
        radio_range: f64,
    ) -> Self {
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> =
            nodes.keys().map(|k| (*k, Vec::new())).collect();
        // BTreeMap iteration keeps each neighbor list sorted
        for &(a, b) in links.keys() {
            adjacency.entry(a).or_default().push(b);
        }
        Topology {
            nodes,
            links,
            adjacency,
            radio_range,
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn position(&self, id: NodeId) -> Option<Position> {
        self.nodes.get(&id).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.links
            .iter()
            .map(|(&(src, dst), &capacity)| Link { src, dst, capacity })
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn capacity(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.links.get(&(src, dst)).copied()
    }

    pub fn has_link(&self, src: NodeId, dst: NodeId) -> bool {
        self.links.contains_key(&(src, dst))
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.adjacency.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A loop-free node sequence from source to destination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub Vec<NodeId>);

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn hops(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn intermediates(&self) -> &[NodeId] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    pub fn is_loop_free(&self) -> bool {
        let set: BTreeSet<_> = self.0.iter().collect();
        set.len() == self.0.len()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("-")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub source: NodeId,
    pub destination: NodeId,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn empty(source: NodeId, destination: NodeId) -> Self {
        PathSet {
            source,
            destination,
            paths: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Lexicographically smallest among the fewest-hop paths, ignoring removed
/// links.
fn shortest_path(
    topo: &Topology,
    s: NodeId,
    d: NodeId,
    removed: &BTreeSet<(NodeId, NodeId)>,
) -> Option<Path> {
    // distances to d over reversed usable links
    let mut dist: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut reverse: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for l in topo.links() {
        if !removed.contains(&(l.src, l.dst)) {
            reverse.entry(l.dst).or_default().push(l.src);
        }
    }
    dist.insert(d, 0);
    let mut queue = VecDeque::from([d]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[&v];
        for &u in reverse.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if let Entry::Vacant(e) = dist.entry(u) {
                e.insert(dv + 1);
                queue.push_back(u);
            }
        }
    }
    let mut at = s;
    let mut remaining = *dist.get(&s)?;
    let mut nodes = vec![s];
    while remaining > 0 {
        let next = topo
            .neighbors(at)
            .iter()
            .copied()
            .find(|&n| !removed.contains(&(at, n)) && dist.get(&n) == Some(&(remaining - 1)))?;
        nodes.push(next);
        at = next;
        remaining -= 1;
    }
    Some(Path(nodes))
}

/// Up to `k` link-disjoint paths by repeated shortest-path extraction,
/// removing the links of each found path.
pub fn discover_paths(topo: &Topology, s: NodeId, d: NodeId, k: usize) -> Result<PathSet> {
    if s == d {
        return Err(NetworkError::SameEndpoints(s));
    }
    if k == 0 {
        return Err(NetworkError::ZeroPaths);
    }
    for n in [s, d] {
        if !topo.contains(n) {
            return Err(NetworkError::UnknownNode(n));
        }
    }
    let mut removed = BTreeSet::new();
    let mut set = PathSet::empty(s, d);
    while set.len() < k {
        let Some(path) = shortest_path(topo, s, d, &removed) else {
            break;
        };
        removed.extend(path.links());
        set.paths.push(path);
    }
    Ok(set)
}

/// Trust values per directed link (i, j): how much i trusts j.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustMap {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl TrustMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, i: NodeId, j: NodeId, value: f64) {
        self.entries.insert((i, j), value);
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> Option<f64> {
        self.entries.get(&(i, j)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Product of the link trust values along the path.
pub fn path_trust(path: &Path, trust: &TrustMap) -> Result<f64> {
    path.links()
        .map(|(i, j)| trust.get(i, j).ok_or(NetworkError::MissingTrust(i, j)))
        .product()
}

/// Binary link-by-path incidence for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    pub links: Vec<(NodeId, NodeId)>,
    pub entries: Vec<Vec<u8>>,
}

impl RoutingMatrix {
    pub fn columns(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn column_sum(&self, col: usize) -> usize {
        self.entries.iter().map(|row| row[col] as usize).sum()
    }
}

/// Rows follow the topology's link order (sorted by (src, dst)).
pub fn routing_matrix(paths: &PathSet, topo: &Topology) -> Result<RoutingMatrix> {
    let links: Vec<(NodeId, NodeId)> = topo.links().map(|l| (l.src, l.dst)).collect();
    let index: BTreeMap<(NodeId, NodeId), usize> =
        links.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut entries = vec![vec![0u8; paths.len()]; links.len()];
    for (col, path) in paths.paths.iter().enumerate() {
        for (a, b) in path.links() {
            let row = *index.get(&(a, b)).ok_or(NetworkError::NotALink(a, b))?;
            entries[row][col] = 1;
        }
    }
    Ok(RoutingMatrix { links, entries })
}

/// Keeps the paths whose trust reaches `tau_t` and, when an ISM map is given,
/// whose spoof probability for `paths.source` reaches `tau_s`.
pub fn admissible_paths(
    paths: &PathSet,
    trust: &TrustMap,
    ism: Option<&IsmMap>,
    tau_t: f64,
    tau_s: f64,
) -> Result<PathSet> {
    for tau in [tau_t, tau_s] {
        if !(0.0..=1.0).contains(&tau) {
            return Err(NetworkError::BadThreshold(tau));
        }
    }
    let mut kept = PathSet::empty(paths.source, paths.destination);
    for path in &paths.paths {
        if path_trust(path, trust)? < tau_t {
            continue;
        }
        if let Some(ism) = ism {
            if path_spoof_probability(path, ism, paths.source)? < tau_s {
                continue;
            }
        }
        kept.paths.push(path.clone());
    }
    Ok(kept)
}
