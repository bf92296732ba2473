//! Region routing: collapse router regions to a weighted graph, grow Steiner
//! trees greedily, and convert each tree into a GHZ instance over the target
//! routers by consuming the regions' entangled resources.
//!
//! The routing loop repeatedly picks the smallest-id target as root, spans the
//! remaining targets with a tree, and burns the tree down to a GHZ state: one
//! Bell pair per tree edge (shaped out of a region resource by Z and X
//! measurements), then per-vertex fusion with locally created stars. The
//! result is a "virtual network state": GHZ instances of sizes |S|, |S|-1,
//! ..., 2 with pairwise distinct roots, the same shape a single network's
//! state bundle has.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::graphstate::{GraphError, GraphState, OutcomeSource, QubitId};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("unknown router: {0}")]
    UnknownRouter(String),
    #[error("no route: {0}")]
    NoRoute(String),
    #[error("insufficient resources: {0}")]
    InsufficientResources(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One GHZ resource held inside a region: a star over qubits sitting on the
/// region's member routers (root qubit first).
#[derive(Clone, Debug)]
pub struct RegionResource {
    pub id: usize,
    pub region: String,
    pub root: QubitId,
    pub leaves: Vec<QubitId>,
    pub consumed: bool,
}

impl RegionResource {
    pub fn size(&self) -> usize {
        1 + self.leaves.len()
    }
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut out = vec![self.root.clone()];
        out.extend(self.leaves.iter().cloned());
        out
    }
    pub fn routers(&self) -> BTreeSet<String> {
        self.qubits().into_iter().map(|q| q.device).collect()
    }
    /// The qubit this resource holds on `router`, if any (root preferred).
    pub fn qubit_on(&self, router: &str) -> Option<QubitId> {
        if self.root.device == router {
            return Some(self.root.clone());
        }
        self.leaves.iter().find(|q| q.device == router).cloned()
    }
}

#[derive(Clone, Debug)]
pub struct Region {
    pub id: String,
    pub members: BTreeSet<String>,
}

/// Routers grouped into (possibly overlapping) regions, each region holding an
/// inventory of GHZ resources, all backed by one engine state.
#[derive(Clone, Debug, Default)]
pub struct RegionTopology {
    pub routers: BTreeSet<String>,
    pub regions: Vec<Region>,
    pub resources: Vec<RegionResource>,
    pub router_network: BTreeMap<String, String>,
    pub backing: GraphState,
    next_index: BTreeMap<String, u32>,
}

impl RegionTopology {
    pub fn new() -> Self {
        RegionTopology::default()
    }

    pub fn add_router(&mut self, id: &str, network: &str) {
        self.routers.insert(id.to_string());
        self.router_network.insert(id.to_string(), network.to_string());
    }

    pub fn add_region(&mut self, id: &str, members: &[&str]) -> Result<(), RouteError> {
        for m in members {
            if !self.routers.contains(*m) {
                return Err(RouteError::UnknownRouter((*m).to_string()));
            }
        }
        self.regions.push(Region {
            id: id.to_string(),
            members: members.iter().map(|s| s.to_string()).collect(),
        });
        Ok(())
    }

    pub(crate) fn fresh_qubit(&mut self, router: &str) -> QubitId {
        let n = self.next_index.entry(router.to_string()).or_insert(0);
        let q = QubitId::new(router, *n);
        *n += 1;
        q
    }

    /// Add one GHZ resource to a region; `holders` are the member routers that
    /// receive a qubit each, the first one holding the root. Returns the
    /// resource id.
    pub fn add_ghz(&mut self, region: &str, holders: &[&str]) -> Result<usize, RouteError> {
        let reg = self
            .regions
            .iter()
            .find(|r| r.id == region)
            .ok_or_else(|| RouteError::InvalidRequest(format!("unknown region {region}")))?
            .clone();
        if holders.len() < 2 {
            return Err(RouteError::InvalidRequest("a resource needs at least 2 holders".into()));
        }
        for h in holders {
            if !reg.members.contains(*h) {
                return Err(RouteError::InvalidRequest(format!(
                    "router {h} is not a member of region {region}"
                )));
            }
        }
        let qubits: Vec<QubitId> = holders.iter().map(|h| self.fresh_qubit(h)).collect();
        self.backing.add_star(&qubits)?;
        let id = self.resources.len();
        self.resources.push(RegionResource {
            id,
            region: region.to_string(),
            root: qubits[0].clone(),
            leaves: qubits[1..].to_vec(),
            consumed: false,
        });
        Ok(id)
    }

    pub fn unconsumed(&self) -> impl Iterator<Item = &RegionResource> {
        self.resources.iter().filter(|r| !r.consumed)
    }

    /// Collapse to the classical routing graph: one vertex per router, one
    /// edge per realizable pair of each live resource.
    pub fn collapse_to_graph(&self, cost: &dyn Fn(&RegionResource) -> f64) -> RoutingGraph {
        self.collapse_with(cost, Granularity::FusedRouters)
    }

    pub fn collapse_with(
        &self,
        cost: &dyn Fn(&RegionResource) -> f64,
        granularity: Granularity,
    ) -> RoutingGraph {
        let mut g = RoutingGraph::default();
        match granularity {
            Granularity::FusedRouters => {
                g.vertices = self.routers.clone();
                for res in self.unconsumed() {
                    let routers: Vec<String> = res.routers().into_iter().collect();
                    let c = cost(res);
                    for i in 0..routers.len() {
                        for j in i + 1..routers.len() {
                            g.edges.push(RoutingEdge {
                                a: routers[i].clone(),
                                b: routers[j].clone(),
                                cost: c,
                                resource: Some(res.id),
                            });
                        }
                    }
                }
            }
            Granularity::PerQubit => {
                // One vertex per qubit; free edges tie a router's qubits
                // together, resource edges connect the entangled pairs.
                let mut per_router: BTreeMap<String, Vec<QubitId>> = BTreeMap::new();
                for res in self.unconsumed() {
                    for q in res.qubits() {
                        g.vertices.insert(q.to_string());
                        per_router.entry(q.device.clone()).or_default().push(q.clone());
                    }
                    let qs = res.qubits();
                    let c = cost(res);
                    for i in 0..qs.len() {
                        for j in i + 1..qs.len() {
                            g.edges.push(RoutingEdge {
                                a: qs[i].to_string(),
                                b: qs[j].to_string(),
                                cost: c,
                                resource: Some(res.id),
                            });
                        }
                    }
                }
                for qs in per_router.values() {
                    for i in 0..qs.len() {
                        for j in i + 1..qs.len() {
                            g.edges.push(RoutingEdge {
                                a: qs[i].to_string(),
                                b: qs[j].to_string(),
                                cost: 0.0,
                                resource: None,
                            });
                        }
                    }
                }
            }
        }
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Granularity {
    FusedRouters,
    PerQubit,
}

/// Unit cost: one consumed resource per edge.
pub fn unit_cost(_r: &RegionResource) -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoutingEdge {
    pub a: String,
    pub b: String,
    pub cost: f64,
    pub resource: Option<usize>,
}

impl RoutingEdge {
    fn other(&self, v: &str) -> Option<&str> {
        if self.a == v {
            Some(&self.b)
        } else if self.b == v {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RoutingGraph {
    pub vertices: BTreeSet<String>,
    pub edges: Vec<RoutingEdge>,
}

/// Search state for Dijkstra with full deterministic tie-breaking: order by
/// distance, then by the vertex path, then by the edge-index path.
#[derive(Clone, Debug, PartialEq)]
struct SearchNode {
    dist: f64,
    path: Vec<String>,
    edges: Vec<usize>,
}

impl Eq for SearchNode {}

impl Ord for SearchNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.path.cmp(&other.path))
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

impl PartialOrd for SearchNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path from `a` to the nearest member of `targets`. Ties break on
/// smallest target id, then lexicographically smallest path.
pub fn dijkstra(
    g: &RoutingGraph,
    a: &str,
    targets: &BTreeSet<String>,
) -> Result<(String, Vec<usize>, f64), RouteError> {
    if !g.vertices.contains(a) {
        return Err(RouteError::UnknownRouter(a.to_string()));
    }
    if targets.is_empty() {
        return Err(RouteError::InvalidRequest("empty target set".into()));
    }
    let mut incident: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in g.edges.iter().enumerate() {
        incident.entry(&e.a).or_default().push(i);
        incident.entry(&e.b).or_default().push(i);
    }
    let mut settled: BTreeMap<String, SearchNode> = BTreeMap::new();
    let mut heap: BinaryHeap<std::cmp::Reverse<SearchNode>> = BinaryHeap::new();
    heap.push(std::cmp::Reverse(SearchNode {
        dist: 0.0,
        path: vec![a.to_string()],
        edges: vec![],
    }));
    while let Some(std::cmp::Reverse(node)) = heap.pop() {
        let v = node.path.last().unwrap().clone();
        if settled.contains_key(&v) {
            continue;
        }
        settled.insert(v.clone(), node.clone());
        for &i in incident.get(v.as_str()).map(|x| x.as_slice()).unwrap_or(&[]) {
            let e = &g.edges[i];
            let next = e.other(&v).unwrap();
            if settled.contains_key(next) {
                continue;
            }
            let mut path = node.path.clone();
            path.push(next.to_string());
            let mut edges = node.edges.clone();
            edges.push(i);
            heap.push(std::cmp::Reverse(SearchNode { dist: node.dist + e.cost, path, edges }));
        }
    }
    let best = targets
        .iter()
        .filter_map(|t| settled.get(t).map(|n| (n.dist, t.clone())))
        .min_by(|(d1, t1), (d2, t2)| d1.total_cmp(d2).then_with(|| t1.cmp(t2)));
    match best {
        Some((dist, t)) => {
            let node = &settled[&t];
            Ok((t.clone(), node.edges.clone(), dist))
        }
        None => Err(RouteError::NoRoute(format!("no path from {a} to any of the targets"))),
    }
}

#[derive(Clone, Debug)]
pub struct SteinerTree {
    pub vertices: BTreeSet<String>,
    pub edges: Vec<RoutingEdge>,
    pub root: String,
    pub terminals: BTreeSet<String>,
}

impl SteinerTree {
    pub fn cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }
    pub fn degree(&self, v: &str) -> usize {
        self.edges.iter().filter(|e| e.a == v || e.b == v).count()
    }
    pub fn is_tree(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        if self.edges.len() + 1 != self.vertices.len() {
            return false;
        }
        // Connectivity over the edge list.
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root.clone()];
        seen.insert(self.root.clone());
        while let Some(v) = stack.pop() {
            for e in &self.edges {
                if let Some(o) = e.other(&v) {
                    if seen.insert(o.to_string()) {
                        stack.push(o.to_string());
                    }
                }
            }
        }
        seen == self.vertices
    }
}

/// Greedy Steiner approximation: grow from `x`, repeatedly attaching the
/// terminal with the cheapest shortest path to the current tree.
pub fn steiner(g: &RoutingGraph, s: &BTreeSet<String>, x: &str) -> Result<SteinerTree, RouteError> {
    if !s.contains(x) {
        return Err(RouteError::InvalidRequest(format!("root {x} is not a terminal")));
    }
    for m in s {
        if !g.vertices.contains(m) {
            return Err(RouteError::UnknownRouter(m.clone()));
        }
    }
    let mut tree_vertices: BTreeSet<String> = BTreeSet::from([x.to_string()]);
    let mut tree_edge_ids: BTreeSet<usize> = BTreeSet::new();
    let mut remaining: BTreeSet<String> = s.iter().filter(|m| *m != x).cloned().collect();
    while !remaining.is_empty() {
        let mut best: Option<(f64, String, Vec<usize>)> = None;
        for m in &remaining {
            if let Ok((_, path, dist)) = dijkstra(g, m, &tree_vertices) {
                let better = match &best {
                    None => true,
                    Some((bd, bm, _)) => {
                        dist.total_cmp(bd).then_with(|| m.cmp(bm)) == std::cmp::Ordering::Less
                    }
                };
                if better {
                    best = Some((dist, m.clone(), path));
                }
            }
        }
        let (_, m, path) = best.ok_or_else(|| {
            RouteError::NoRoute(format!("terminals {remaining:?} unreachable from the tree"))
        })?;
        for i in path {
            let e = &g.edges[i];
            tree_vertices.insert(e.a.clone());
            tree_vertices.insert(e.b.clone());
            tree_edge_ids.insert(i);
        }
        remaining.remove(&m);
    }
    let mut edges: Vec<RoutingEdge> = tree_edge_ids.iter().map(|&i| g.edges[i].clone()).collect();
    edges.sort_by(|p, q| p.a.cmp(&q.a).then_with(|| p.b.cmp(&q.b)));
    let tree = SteinerTree {
        vertices: tree_vertices,
        edges,
        root: x.to_string(),
        terminals: s.clone(),
    };
    debug_assert!(tree.is_tree());
    Ok(tree)
}

/// A GHZ instance of the virtual network state: the root qubit sits on the
/// selected router, one leaf qubit per remaining target router.
#[derive(Clone, Debug)]
pub struct VirtualInstance {
    pub root: QubitId,
    pub leaves: Vec<QubitId>,
}

impl VirtualInstance {
    pub fn size(&self) -> usize {
        1 + self.leaves.len()
    }
    pub fn routers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::from([self.root.device.clone()]);
        out.extend(self.leaves.iter().map(|q| q.device.clone()));
        out
    }
}

/// Pick the resource realizing a routing edge; falls back to any live
/// resource covering both endpoints if the referenced one was consumed by an
/// earlier edge of the same tree.
fn pick_resource(t: &RegionTopology, e: &RoutingEdge) -> Result<usize, RouteError> {
    if let Some(id) = e.resource {
        if !t.resources[id].consumed {
            return Ok(id);
        }
    }
    t.unconsumed()
        .find(|r| r.qubit_on(&e.a).is_some() && r.qubit_on(&e.b).is_some())
        .map(|r| r.id)
        .ok_or_else(|| {
            RouteError::InsufficientResources(format!("no live resource covers {}--{}", e.a, e.b))
        })
}

/// Convert a Steiner tree into one GHZ instance over `targets`, rooted at the
/// tree root. Consumes one region resource per tree edge (shaping it into a
/// Bell pair between the edge's endpoints), then fuses the Bell halves at
/// each vertex: interior routers swap through, targets of degree > 1 create a
/// local star and keep its root qubit.
pub fn tree_to_ghz(
    t: &mut RegionTopology,
    tree: &SteinerTree,
    targets: &BTreeSet<String>,
    src: &mut OutcomeSource,
) -> Result<(VirtualInstance, Vec<usize>), RouteError> {
    if !tree.is_tree() || tree.edges.is_empty() {
        return Err(RouteError::InvalidRequest("malformed tree".into()));
    }
    if !targets.contains(&tree.root) {
        return Err(RouteError::InvalidRequest("tree root must be a target".into()));
    }
    for v in targets {
        if !tree.vertices.contains(v) {
            return Err(RouteError::InvalidRequest(format!("target {v} not in tree")));
        }
    }
    let mut consumed = Vec::new();
    let mut halves: BTreeMap<String, Vec<QubitId>> = BTreeMap::new();
    for e in &tree.edges {
        let rid = pick_resource(t, e)?;
        let res = t.resources[rid].clone();
        let qa = res.qubit_on(&e.a).unwrap();
        let qb = res.qubit_on(&e.b).unwrap();
        // Shape the resource into a Bell pair between qa and qb: remove the
        // other leaves in Z; if the root is a third router, an X measurement
        // re-roots the remaining 3-star onto qa.
        for q in res.qubits() {
            if q != qa && q != qb && q != res.root {
                t.backing.measure_z_mut(&q, src)?;
            }
        }
        if res.root != qa && res.root != qb {
            t.backing.measure_x_mut(&res.root, Some(&qa), src)?;
        }
        t.resources[rid].consumed = true;
        consumed.push(rid);
        halves.entry(e.a.clone()).or_default().push(qa);
        halves.entry(e.b.clone()).or_default().push(qb);
    }

    // Fuse per vertex, root first, the rest in id order. Every Bell half at a
    // vertex lives in a distinct component (the subtree behind its edge), so
    // each merge joins two stars.
    let mut order = vec![tree.root.clone()];
    order.extend(tree.vertices.iter().filter(|v| **v != tree.root).cloned());
    let mut kept: BTreeMap<String, QubitId> = BTreeMap::new();
    for v in order {
        let hs = halves.get(&v).cloned().unwrap_or_default();
        let d = hs.len();
        if targets.contains(&v) {
            if d == 1 {
                kept.insert(v.clone(), hs[0].clone());
            } else {
                // Local star of size d+1; its leaves merge with the branch
                // qubits, its root is the qubit this router keeps.
                let locals: Vec<QubitId> = (0..=d).map(|_| t.fresh_qubit(&v)).collect();
                t.backing.add_star(&locals)?;
                for (leaf, h) in locals[1..].iter().zip(hs.iter()) {
                    t.backing.bell_merge_mut(leaf, h, src)?;
                }
                kept.insert(v.clone(), locals[0].clone());
            }
        } else {
            match d {
                0 | 1 => {
                    return Err(RouteError::InvalidRequest(format!(
                        "non-target leaf {v} in tree"
                    )));
                }
                2 => {
                    // Entanglement swap straight through.
                    t.backing.bell_merge_mut(&hs[0], &hs[1], src)?;
                }
                _ => {
                    // Local star of size d joins all branches, keeping nothing.
                    let locals: Vec<QubitId> = (0..d).map(|_| t.fresh_qubit(&v)).collect();
                    t.backing.add_star(&locals)?;
                    for (leaf, h) in locals[1..].iter().zip(hs[1..].iter()) {
                        t.backing.bell_merge_mut(leaf, h, src)?;
                    }
                    t.backing.bell_merge_mut(&locals[0], &hs[0], src)?;
                }
            }
        }
    }

    let root_q = kept[&tree.root].clone();
    t.backing.recentre_star(&root_q)?;
    let comp = t.backing.component(&root_q);
    debug_assert_eq!(
        comp,
        kept.values().cloned().collect::<BTreeSet<_>>(),
        "fused component must be exactly the kept qubits"
    );
    let leaves: Vec<QubitId> =
        kept.iter().filter(|(v, _)| **v != tree.root).map(|(_, q)| q.clone()).collect();
    Ok((VirtualInstance { root: root_q, leaves }, consumed))
}

#[derive(Clone, Debug)]
pub struct RoutingOutcome {
    pub instances: Vec<VirtualInstance>,
    pub consumed: Vec<usize>,
    pub trace: Vec<String>,
    /// Engine op-log span of each step, for amplitude-level replay.
    pub op_ranges: Vec<(usize, usize)>,
}

/// Full routing loop: while at least two targets remain, root a Steiner tree
/// at the smallest-id target, convert it to a GHZ instance, drop that target.
/// The instances form a GHZ network state over the target routers.
pub fn region_routing(
    t: &mut RegionTopology,
    s: &BTreeSet<String>,
    cost: &dyn Fn(&RegionResource) -> f64,
    src: &mut OutcomeSource,
) -> Result<RoutingOutcome, RouteError> {
    if s.len() < 2 {
        return Err(RouteError::InvalidRequest("need at least two target routers".into()));
    }
    for v in s {
        if !t.routers.contains(v) {
            return Err(RouteError::UnknownRouter(v.clone()));
        }
    }
    let mut cur = s.clone();
    let mut out = RoutingOutcome {
        instances: vec![],
        consumed: vec![],
        trace: vec![],
        op_ranges: vec![],
    };
    let mut step = 0usize;
    while cur.len() >= 2 {
        step += 1;
        let v = cur.iter().next().unwrap().clone();
        let g = t.collapse_to_graph(cost);
        let tree = steiner(&g, &cur, &v)?;
        let ops_before = t.backing.op_log.len();
        let (inst, used) = tree_to_ghz(t, &tree, &cur, src)?;
        out.op_ranges.push((ops_before, t.backing.op_log.len()));
        let edge_list: Vec<String> =
            tree.edges.iter().map(|e| format!("{}-{}", e.a, e.b)).collect();
        let used_list: Vec<String> = used.iter().map(|u| u.to_string()).collect();
        out.trace.push(format!(
            "step={step} root={v} tree_edges=[{}] consumed=[{}]",
            edge_list.join(","),
            used_list.join(",")
        ));
        out.instances.push(inst);
        out.consumed.extend(used);
        cur.remove(&v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Hierarchical regions

/// Where a router landed in the hierarchy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub level: usize,
    pub region: usize,
}

/// An m-ary tree of regions. Level 0 holds the routers themselves; each upper
/// level holds the designated (first) routers of the level below, so regions
/// at adjacent levels share exactly one router.
#[derive(Clone, Debug)]
pub struct RegionHierarchy {
    pub m_max: usize,
    /// levels[k] is the list of regions at level k, each a router list in
    /// insertion order (first member = designated router).
    pub levels: Vec<Vec<Vec<String>>>,
}

impl RegionHierarchy {
    pub fn new(m_max: usize) -> Self {
        assert!(m_max >= 2, "hierarchy needs m_max >= 2");
        RegionHierarchy { m_max, levels: vec![] }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// First-fit insertion at level 0; overflow creates a new region, and the
    /// second region at any level triggers a linking level above it joining
    /// the designated routers.
    pub fn insert(&mut self, r: &str) -> Placement {
        self.insert_at(0, r)
    }

    fn insert_at(&mut self, level: usize, r: &str) -> Placement {
        if self.levels.len() <= level {
            self.levels.push(vec![]);
        }
        if let Some(i) = self.levels[level].iter().position(|reg| reg.len() < self.m_max) {
            self.levels[level][i].push(r.to_string());
            return Placement { level, region: i };
        }
        self.levels[level].push(vec![r.to_string()]);
        let idx = self.levels[level].len() - 1;
        if idx == 1 {
            // The level just became plural: link both regions upward through
            // their designated routers.
            let d0 = self.levels[level][0][0].clone();
            self.insert_at(level + 1, &d0);
            self.insert_at(level + 1, r);
        } else if idx >= 2 {
            self.insert_at(level + 1, r);
        }
        Placement { level, region: idx }
    }
}

// ---------------------------------------------------------------------------
// Region-state symmetrization

/// All ways to pick one router per region for an inter-region GHZ state, plus
/// the default all-first assignment used in regular operation.
#[derive(Clone, Debug)]
pub struct RegionAssignments {
    pub count: usize,
    pub assignments: Vec<Vec<String>>,
    pub default: Vec<String>,
}

pub fn symmetrize_region_state(regions: &[Vec<String>]) -> RegionAssignments {
    let mut assignments: Vec<Vec<String>> = vec![vec![]];
    for reg in regions {
        let mut next = Vec::with_capacity(assignments.len() * reg.len());
        for partial in &assignments {
            for r in reg {
                let mut p = partial.clone();
                p.push(r.clone());
                next.push(p);
            }
        }
        assignments = next;
    }
    let default = regions.iter().map(|r| r[0].clone()).collect();
    RegionAssignments { count: assignments.len(), assignments, default }
}

/// Assignments that survive the loss of one router.
pub fn surviving_assignments(a: &RegionAssignments, failed: &str) -> Vec<Vec<String>> {
    a.assignments.iter().filter(|asg| !asg.iter().any(|r| r == failed)).cloned().collect()
}

// ---------------------------------------------------------------------------

/// The four-network interconnect fixture: four entry routers N1..N4 plus four
/// interior routers, grouped into four regions of size two, three of size
/// three, and one of size four. `copies` resources per region.
pub fn four_network_fixture(copies: usize) -> RegionTopology {
    let mut t = RegionTopology::new();
    for (r, net) in [
        ("N1", "net1"),
        ("N2", "net2"),
        ("N3", "net3"),
        ("N4", "net4"),
        ("R5", "transit5"),
        ("R6", "transit6"),
        ("R7", "transit7"),
        ("R8", "transit8"),
    ] {
        t.add_router(r, net);
    }
    let regions: [(&str, &[&str]); 8] = [
        ("p15", &["N1", "R5"]),
        ("p27", &["N2", "R7"]),
        ("p68", &["R6", "R8"]),
        ("p48", &["N4", "R8"]),
        ("t156", &["N1", "R5", "R6"]),
        ("t237", &["N2", "N3", "R7"]),
        ("t567", &["R5", "R6", "R7"]),
        ("q5678", &["R5", "R6", "R7", "R8"]),
    ];
    for (id, members) in regions {
        t.add_region(id, members).unwrap();
        for _ in 0..copies {
            t.add_ghz(id, members).unwrap();
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_graph(edges: &[(&str, &str, f64)]) -> RoutingGraph {
        let mut g = RoutingGraph::default();
        for (a, b, c) in edges {
            g.vertices.insert(a.to_string());
            g.vertices.insert(b.to_string());
            g.edges.push(RoutingEdge {
                a: a.to_string(),
                b: b.to_string(),
                cost: *c,
                resource: None,
            });
        }
        g
    }

    #[test]
    fn dijkstra_prefers_cheaper_path() {
        let g = simple_graph(&[("a", "b", 3.0), ("a", "x", 1.0), ("x", "b", 1.0)]);
        let (t, path, d) = dijkstra(&g, "a", &BTreeSet::from(["b".to_string()])).unwrap();
        assert_eq!(t, "b");
        assert_eq!(d, 2.0);
        assert_eq!(path.len(), 2);
    }

    #[test]
    fn dijkstra_single_edge_and_no_route() {
        let g = simple_graph(&[("a", "b", 1.5), ("c", "d", 1.0)]);
        let (_, _, d) = dijkstra(&g, "a", &BTreeSet::from(["b".to_string()])).unwrap();
        assert_eq!(d, 1.5);
        let err = dijkstra(&g, "a", &BTreeSet::from(["d".to_string()]));
        assert!(matches!(err, Err(RouteError::NoRoute(_))));
    }

    #[test]
    fn dijkstra_tie_breaks_on_id_then_path() {
        // Two targets at equal distance: the smaller id wins.
        let g = simple_graph(&[("a", "c", 1.0), ("a", "b", 1.0)]);
        let (t, _, _) = dijkstra(
            &g,
            "a",
            &BTreeSet::from(["b".to_string(), "c".to_string()]),
        )
        .unwrap();
        assert_eq!(t, "b");
        // Two equal-cost paths to one target: lexicographically smaller path.
        let g2 = simple_graph(&[("a", "m", 1.0), ("m", "z", 1.0), ("a", "k", 1.0), ("k", "z", 1.0)]);
        let (_, path, _) = dijkstra(&g2, "a", &BTreeSet::from(["z".to_string()])).unwrap();
        let via = &g2.edges[path[0]];
        assert!(via.a == "k" || via.b == "k", "expected the path through k");
    }

    #[test]
    fn steiner_on_triangle_all_vertices_is_spanning_tree() {
        let g = simple_graph(&[("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)]);
        let s: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let tree = steiner(&g, &s, "a").unwrap();
        assert!(tree.is_tree());
        assert_eq!(tree.cost(), 2.0);
        assert_eq!(tree.vertices, s);
    }

    #[test]
    fn steiner_two_terminals_single_edge() {
        let g = simple_graph(&[("a", "b", 1.0)]);
        let s: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let tree = steiner(&g, &s, "a").unwrap();
        assert_eq!(tree.edges.len(), 1);
        assert_eq!(tree.cost(), 1.0);
    }

    #[test]
    fn steiner_unreachable_terminal_is_no_route() {
        let g = simple_graph(&[("a", "b", 1.0), ("c", "d", 1.0)]);
        let s: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(steiner(&g, &s, "a"), Err(RouteError::NoRoute(_))));
    }

    #[test]
    fn collapse_two_routers_one_bell() {
        let mut t = RegionTopology::new();
        t.add_router("a", "n1");
        t.add_router("b", "n2");
        t.add_region("r", &["a", "b"]).unwrap();
        t.add_ghz("r", &["a", "b"]).unwrap();
        let g = t.collapse_to_graph(&unit_cost);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].cost, 1.0);
        assert_eq!(g.edges[0].resource, Some(0));
    }

    #[test]
    fn collapse_three_router_region_covers_all_pairs() {
        let mut t = RegionTopology::new();
        for r in ["a", "b", "c"] {
            t.add_router(r, "n");
        }
        t.add_region("r", &["a", "b", "c"]).unwrap();
        t.add_ghz("r", &["a", "b", "c"]).unwrap();
        t.add_ghz("r", &["a", "b"]).unwrap();
        let g = t.collapse_to_graph(&unit_cost);
        // GHZ_3 contributes all three pairs; the Bell adds a parallel a-b.
        assert_eq!(g.edges.len(), 4);
        let pairs: BTreeSet<(String, String)> =
            g.edges.iter().map(|e| (e.a.clone(), e.b.clone())).collect();
        assert_eq!(pairs.len(), 3);
    }

    #[test]
    fn per_qubit_collapse_has_qubit_vertices() {
        let mut t = RegionTopology::new();
        t.add_router("a", "n1");
        t.add_router("b", "n2");
        t.add_region("r", &["a", "b"]).unwrap();
        t.add_ghz("r", &["a", "b"]).unwrap();
        t.add_ghz("r", &["a", "b"]).unwrap();
        let g = t.collapse_with(&unit_cost, Granularity::PerQubit);
        assert_eq!(g.vertices.len(), 4);
        // Two resource edges plus one free intra-router edge per router.
        assert_eq!(g.edges.len(), 4);
        assert_eq!(g.edges.iter().filter(|e| e.resource.is_none()).count(), 2);
    }

    #[test]
    fn hierarchy_nine_routers_m3() {
        let mut h = RegionHierarchy::new(3);
        for i in 1..=9 {
            h.insert(&format!("r{i}"));
        }
        assert_eq!(h.depth(), 2);
        assert_eq!(h.levels[0].len(), 3);
        assert!(h.levels[0].iter().all(|reg| reg.len() == 3));
        assert_eq!(h.levels[1], vec![vec!["r1".to_string(), "r4".into(), "r7".into()]]);
    }

    #[test]
    fn hierarchy_first_router_single_region() {
        let mut h = RegionHierarchy::new(3);
        let p = h.insert("r1");
        assert_eq!(p, Placement { level: 0, region: 0 });
        assert_eq!(h.depth(), 1);
    }

    #[test]
    fn hierarchy_fourth_router_creates_linking_level() {
        let mut h = RegionHierarchy::new(3);
        for i in 1..=4 {
            h.insert(&format!("r{i}"));
        }
        assert_eq!(h.depth(), 2);
        assert_eq!(h.levels[0].len(), 2);
        assert_eq!(h.levels[1], vec![vec!["r1".to_string(), "r4".into()]]);
    }

    #[test]
    fn hierarchy_depth_bound() {
        for m in 2..=4usize {
            for n in 1..=40usize {
                let mut h = RegionHierarchy::new(m);
                for i in 0..n {
                    h.insert(&format!("r{i}"));
                }
                let bound = (n as f64).log(m as f64).ceil() as usize + 1;
                assert!(h.depth() <= bound.max(1), "m={m} n={n} depth={}", h.depth());
                assert!(h
                    .levels
                    .iter()
                    .all(|lvl| lvl.iter().all(|reg| reg.len() <= m)));
            }
        }
    }

    #[test]
    fn symmetrize_counts_and_default() {
        let regions = vec![
            vec!["a1".to_string(), "a2".into()],
            vec!["b1".to_string(), "b2".into()],
            vec!["c1".to_string(), "c2".into()],
        ];
        let asg = symmetrize_region_state(&regions);
        assert_eq!(asg.count, 8);
        assert_eq!(asg.default, vec!["a1", "b1", "c1"]);
        let surv = surviving_assignments(&asg, "a2");
        assert_eq!(surv.len(), 4);
        assert!(surv.iter().all(|s| s[0] == "a1"));
    }

    #[test]
    fn symmetrize_singletons() {
        let regions = vec![vec!["a".to_string()], vec!["b".to_string()]];
        let asg = symmetrize_region_state(&regions);
        assert_eq!(asg.count, 1);
        assert_eq!(asg.assignments, vec![vec!["a".to_string(), "b".into()]]);
    }
}
