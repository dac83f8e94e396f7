//! Location hierarchy construction: the directed multigraph over discrete
//! locations, its pruning to a single-parent forest, and the remapping of
//! address vectors onto forest paths.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Kind of the underlying map element. The declared order (node < way <
/// relation) is the rank used for deterministic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    Node,
    Way,
    Relation,
}

impl SourceKind {
    pub fn letter(&self) -> char {
        match self {
            SourceKind::Node => 'N',
            SourceKind::Way => 'W',
            SourceKind::Relation => 'R',
        }
    }
}

/// Globally unique identifier of a discrete location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationId {
    pub kind: SourceKind,
    pub id: u64,
}

impl LocationId {
    pub fn node(id: u64) -> Self {
        Self {
            kind: SourceKind::Node,
            id,
        }
    }

    pub fn way(id: u64) -> Self {
        Self {
            kind: SourceKind::Way,
            id,
        }
    }

    pub fn relation(id: u64) -> Self {
        Self {
            kind: SourceKind::Relation,
            id,
        }
    }
}

impl std::fmt::Display for LocationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.kind.letter(), self.id)
    }
}

impl serde::Serialize for LocationId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for LocationId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for LocationId {
    type Err = Error;

    /// Accepts the compact form `W438331516` as well as `way:438331516`
    /// and `W:438331516`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("invalid location id '{s}'"));
        let (kind_part, id_part) = match s.split_once(':') {
            Some((k, i)) => (k, i),
            None => s.split_at(1.min(s.len())),
        };
        let kind = match kind_part {
            "N" | "n" | "node" => SourceKind::Node,
            "W" | "w" | "way" => SourceKind::Way,
            "R" | "r" | "relation" => SourceKind::Relation,
            _ => return Err(bad()),
        };
        let id = id_part.parse::<u64>().map_err(|_| bad())?;
        Ok(LocationId { kind, id })
    }
}

/// An ordered list of locations for one sample, finest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressVector(Vec<LocationId>);

impl AddressVector {
    pub fn new(locations: Vec<LocationId>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyAddress);
        }
        let mut seen = HashSet::with_capacity(locations.len());
        for loc in &locations {
            if !seen.insert(*loc) {
                return Err(Error::DuplicateLocation(*loc));
            }
        }
        Ok(Self(locations))
    }

    /// The finest location (first element).
    pub fn finest(&self) -> LocationId {
        self.0[0]
    }

    pub fn locations(&self) -> &[LocationId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: never empty
    }

    /// Keeps only locations satisfying `keep`, preserving order. Returns
    /// `None` when nothing survives.
    pub fn filtered(&self, mut keep: impl FnMut(LocationId) -> bool) -> Option<AddressVector> {
        let kept: Vec<LocationId> = self.0.iter().copied().filter(|l| keep(*l)).collect();
        if kept.is_empty() {
            None
        } else {
            Some(AddressVector(kept))
        }
    }
}

impl std::fmt::Display for AddressVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, loc) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{loc}")?;
        }
        Ok(())
    }
}

impl FromStr for AddressVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let locations = s
            .split_whitespace()
            .map(LocationId::from_str)
            .collect::<Result<Vec<_>>>()?;
        AddressVector::new(locations)
    }
}

/// Directed multigraph over locations. An edge points from a location to the
/// next coarser one; its weight counts how often that adjacency occurred.
#[derive(Debug, Clone, Default)]
pub struct LocationGraph {
    nodes: HashSet<LocationId>,
    edges: HashMap<(LocationId, LocationId), u64>,
}

impl LocationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one address vector: every location becomes a node and every
    /// adjacent pair contributes one edge occurrence.
    pub fn add_address(&mut self, address: &AddressVector) {
        let locs = address.locations();
        for loc in locs {
            self.nodes.insert(*loc);
        }
        for pair in locs.windows(2) {
            *self.edges.entry((pair[0], pair[1])).or_insert(0) += 1;
        }
    }

    /// Merges another graph into this one; edge counts add up, so parallel
    /// readers can build partial graphs and combine them in any order.
    pub fn merge(&mut self, other: LocationGraph) {
        self.nodes.extend(other.nodes);
        for (edge, count) in other.edges {
            *self.edges.entry(edge).or_insert(0) += count;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, loc: LocationId) -> bool {
        self.nodes.contains(&loc)
    }

    pub fn edge_weight(&self, child: LocationId, parent: LocationId) -> u64 {
        self.edges.get(&(child, parent)).copied().unwrap_or(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (LocationId, LocationId, u64)> + '_ {
        self.edges.iter().map(|(&(c, p), &w)| (c, p, w))
    }
}

/// Builds the multigraph from a collection of address vectors.
pub fn build_multigraph(addresses: &[AddressVector]) -> Result<LocationGraph> {
    if addresses.is_empty() {
        return Err(Error::EmptyInput("address collection"));
    }
    let mut graph = LocationGraph::new();
    for address in addresses {
        graph.add_address(address);
    }
    Ok(graph)
}

/// Single-parent hierarchy derived from a [`LocationGraph`], plus per-node
/// sample tallies filled in as remapped vectors are recorded.
#[derive(Debug, Clone, Default)]
pub struct LocationForest {
    nodes: HashSet<LocationId>,
    parent: HashMap<LocationId, LocationId>,
    sample_count: HashMap<LocationId, u64>,
}

/// What [`prune_to_forest`] had to do beyond keeping maximum-count edges.
#[derive(Debug, Clone, Default)]
pub struct PruneDiagnostics {
    /// Edges removed to break cycles, in the order they were removed.
    pub cycle_edges_removed: Vec<(LocationId, LocationId)>,
}

impl PruneDiagnostics {
    pub fn cycles_broken(&self) -> usize {
        self.cycle_edges_removed.len()
    }
}

/// Keeps, for every node with outgoing edges, exactly its maximum-count
/// outgoing edge. Ties are broken towards the smaller parent id (kind rank,
/// then numeric id) so repeated runs agree. Any cycle among the kept edges is
/// broken by removing the lowest-count edge on the cycle.
pub fn prune_to_forest(graph: &LocationGraph) -> (LocationForest, PruneDiagnostics) {
    // group outgoing edges per child; BTreeMap gives a stable node order
    let mut outgoing: BTreeMap<LocationId, Vec<(LocationId, u64)>> = BTreeMap::new();
    for (child, parent, count) in graph.edges() {
        outgoing.entry(child).or_default().push((parent, count));
    }

    let mut parent_map: HashMap<LocationId, LocationId> = HashMap::new();
    for (child, candidates) in &outgoing {
        let best = candidates
            .iter()
            .copied()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("candidates never empty");
        parent_map.insert(*child, best.0);
    }

    let mut diagnostics = PruneDiagnostics::default();
    break_cycles(&mut parent_map, graph, &mut diagnostics);

    let forest = LocationForest {
        nodes: graph.nodes().collect(),
        parent: parent_map,
        sample_count: HashMap::new(),
    };
    (forest, diagnostics)
}

/// Every node has at most one outgoing edge, so each weakly-connected
/// component contains at most one cycle; walking parent links from every node
/// finds them all.
fn break_cycles(
    parent_map: &mut HashMap<LocationId, LocationId>,
    graph: &LocationGraph,
    diagnostics: &mut PruneDiagnostics,
) {
    let mut state: HashMap<LocationId, u8> = HashMap::new(); // 1 = on path, 2 = settled
    let mut starts: Vec<LocationId> = parent_map.keys().copied().collect();
    starts.sort();

    for start in starts {
        if state.get(&start).copied() == Some(2) {
            continue;
        }
        let mut path: Vec<LocationId> = Vec::new();
        let mut current = start;
        loop {
            match state.get(&current).copied() {
                Some(2) => break,
                Some(1) => {
                    // found a cycle: the slice of `path` from `current` onwards
                    let cycle_start = path.iter().position(|&n| n == current).expect("on path");
                    let cycle = &path[cycle_start..];
                    let victim = cycle
                        .iter()
                        .map(|&child| (child, parent_map[&child]))
                        .min_by(|a, b| {
                            let wa = graph.edge_weight(a.0, a.1);
                            let wb = graph.edge_weight(b.0, b.1);
                            wa.cmp(&wb).then(a.cmp(b))
                        })
                        .expect("cycle non-empty");
                    parent_map.remove(&victim.0);
                    diagnostics.cycle_edges_removed.push(victim);
                    break;
                }
                _ => {
                    state.insert(current, 1);
                    path.push(current);
                    match parent_map.get(&current) {
                        Some(&next) => current = next,
                        None => break,
                    }
                }
            }
        }
        for node in path {
            state.insert(node, 2);
        }
    }
}

impl LocationForest {
    pub fn contains(&self, loc: LocationId) -> bool {
        self.nodes.contains(&loc)
    }

    pub fn parent_of(&self, loc: LocationId) -> Option<LocationId> {
        self.parent.get(&loc).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn roots(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.nodes
            .iter()
            .copied()
            .filter(|n| !self.parent.contains_key(n))
    }

    /// Number of samples whose remapped path contains `loc`.
    pub fn sample_count(&self, loc: LocationId) -> u64 {
        self.sample_count.get(&loc).copied().unwrap_or(0)
    }

    /// The path from `loc` to its root, finest first.
    pub fn path_to_root(&self, loc: LocationId) -> Result<Vec<LocationId>> {
        if !self.contains(loc) {
            return Err(Error::NotInForest(loc));
        }
        let mut path = vec![loc];
        let mut current = loc;
        while let Some(parent) = self.parent_of(current) {
            debug_assert!(path.len() <= self.nodes.len(), "cycle in forest");
            path.push(parent);
            current = parent;
        }
        Ok(path)
    }

    /// Replaces an address vector by the forest path of its finest location.
    /// Remapping an already-remapped vector is a no-op.
    pub fn remap(&self, address: &AddressVector) -> Result<AddressVector> {
        let path = self.path_to_root(address.finest())?;
        AddressVector::new(path)
    }

    /// Records one remapped sample: every location on its path gains a count.
    pub fn tally(&mut self, remapped: &AddressVector) {
        for loc in remapped.locations() {
            *self.sample_count.entry(*loc).or_insert(0) += 1;
        }
    }

    /// Full-traversal acyclicity check; used by audits and tests.
    pub fn is_acyclic(&self) -> bool {
        let mut settled: HashSet<LocationId> = HashSet::new();
        for &start in &self.nodes {
            if settled.contains(&start) {
                continue;
            }
            let mut on_path: Vec<LocationId> = Vec::new();
            let mut seen: HashSet<LocationId> = HashSet::new();
            let mut current = start;
            loop {
                if settled.contains(&current) {
                    break;
                }
                if !seen.insert(current) {
                    return false;
                }
                on_path.push(current);
                match self.parent_of(current) {
                    Some(next) => current = next,
                    None => break,
                }
            }
            settled.extend(on_path);
        }
        true
    }

    /// Used by the serialization code to reconstruct a forest verbatim.
    pub(crate) fn from_parts(
        nodes: HashSet<LocationId>,
        parent: HashMap<LocationId, LocationId>,
        sample_count: HashMap<LocationId, u64>,
    ) -> Self {
        Self {
            nodes,
            parent,
            sample_count,
        }
    }
}

/// Occurrence-count filter applied to raw address vectors before the graph is
/// built: locations appearing in fewer than `tau` vectors are dropped from
/// every vector.
#[derive(Debug, Clone, Default)]
pub struct FilterStats {
    pub locations_before: usize,
    pub locations_removed: usize,
    pub vectors_emptied: usize,
}

pub fn filter_rare_locations(
    addresses: &[AddressVector],
    tau: u64,
) -> (Vec<Option<AddressVector>>, FilterStats) {
    let mut occurrences: HashMap<LocationId, u64> = HashMap::new();
    for address in addresses {
        for loc in address.locations() {
            *occurrences.entry(*loc).or_insert(0) += 1;
        }
    }
    let mut stats = FilterStats {
        locations_before: occurrences.len(),
        ..Default::default()
    };
    stats.locations_removed = occurrences.values().filter(|&&c| c < tau).count();

    let filtered: Vec<Option<AddressVector>> = addresses
        .iter()
        .map(|address| {
            let kept = address.filtered(|loc| occurrences[&loc] >= tau);
            if kept.is_none() {
                stats.vectors_emptied += 1;
            }
            kept
        })
        .collect();
    (filtered, stats)
}

/// Result of the full hierarchy build over one address collection.
#[derive(Debug)]
pub struct HierarchyBuild {
    pub forest: LocationForest,
    /// Remapped vector per input, index-aligned; `None` where the finest
    /// location was missing from the forest and the sample was dropped.
    pub remapped: Vec<Option<AddressVector>>,
    pub prune: PruneDiagnostics,
    pub dropped_samples: usize,
    pub graph_nodes: usize,
    pub graph_edges: usize,
}

/// Composes graph construction, pruning, remapping, and tallying.
pub fn build_hierarchy(addresses: &[AddressVector]) -> Result<HierarchyBuild> {
    let graph = build_multigraph(addresses)?;
    let graph_nodes = graph.node_count();
    let graph_edges = graph.edge_count();
    let (mut forest, prune) = prune_to_forest(&graph);

    let mut remapped = Vec::with_capacity(addresses.len());
    let mut dropped_samples = 0;
    for address in addresses {
        match forest.remap(address) {
            Ok(path) => {
                forest.tally(&path);
                remapped.push(Some(path));
            }
            Err(Error::NotInForest(_)) => {
                dropped_samples += 1;
                remapped.push(None);
            }
            Err(e) => return Err(e),
        }
    }

    Ok(HierarchyBuild {
        forest,
        remapped,
        prune,
        dropped_samples,
        graph_nodes,
        graph_edges,
    })
}
