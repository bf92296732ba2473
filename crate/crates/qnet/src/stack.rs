//! The layered simulator: devices, provisioning, request fulfilment down to
//! client delivery, and reachability checks.
//!
//! A [`Simulation`] owns one engine state for the whole world. Provisioning
//! (the dynamic phase) lays GHZ resources into it: region resources between
//! routers, and per-network bundles over each network's router and switches.
//! Requests are then served during the adaptive phase using LOCC only —
//! single-qubit measurements, local gates, co-located Bell merges — which the
//! op log makes auditable: `adaptive_ledger` proves no entangling gate ever
//! crossed a device boundary after provisioning.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graphstate::{GraphError, GraphState, OpRecord, OutcomeSource, QubitId};
use crate::oracle::{
    expect_pauli, measure_stabilizer, physical_statevector, OracleError, PauliOp, PauliString,
};
use crate::routing::{region_routing, unit_cost, RegionTopology, RouteError};
use crate::scenario::{RequestDef, Scenario};

#[derive(Debug, Error)]
pub enum StackError {
    #[error("no route: {0}")]
    NoRoute(String),
    #[error("insufficient resources: {0}")]
    InsufficientResources(String),
    #[error("device down: {0}")]
    DeviceDown(String),
    #[error("unknown client: {0}")]
    UnknownClient(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl From<RouteError> for StackError {
    fn from(e: RouteError) -> Self {
        match e {
            RouteError::NoRoute(m) => StackError::NoRoute(m),
            RouteError::InsufficientResources(m) => StackError::InsufficientResources(m),
            RouteError::Graph(g) => StackError::Graph(g),
            other => StackError::Invalid(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Devices and events

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Repeater,
    Switch,
    Router,
    Client,
}

impl Role {
    /// Highest stack layer the role operates on.
    pub fn top_layer(self) -> u8 {
        match self {
            Role::Repeater => 2,
            Role::Switch => 3,
            Role::Router => 4,
            Role::Client => 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Device {
    pub id: String,
    pub role: Role,
    pub layer: u8,
    pub network: String,
    pub alive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    EntanglementReady,
    Ping,
    PingReply,
    FailureDetected,
    Request,
    RequestComplete,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::EntanglementReady => "entanglement-ready",
            EventKind::Ping => "ping",
            EventKind::PingReply => "ping-reply",
            EventKind::FailureDetected => "failure-detected",
            EventKind::Request => "request",
            EventKind::RequestComplete => "request-complete",
        }
    }
}

/// One record on the single-threaded logical-time event queue. Timestamps are
/// logical and strictly increasing within a simulation.
#[derive(Clone, Debug)]
pub struct LayerEvent {
    pub kind: EventKind,
    pub payload: String,
    pub timestamp: u64,
}

// ---------------------------------------------------------------------------
// Resources

/// One GHZ instance of a network bundle, spanning the network's router and/or
/// switches (at most one qubit per device).
#[derive(Clone, Debug)]
pub struct NetInstance {
    pub network: String,
    pub root: QubitId,
    pub leaves: Vec<QubitId>,
    pub consumed: bool,
}

impl NetInstance {
    pub fn size(&self) -> usize {
        1 + self.leaves.len()
    }
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut out = vec![self.root.clone()];
        out.extend(self.leaves.iter().cloned());
        out
    }
    pub fn qubit_on(&self, device: &str) -> Option<QubitId> {
        self.qubits().into_iter().find(|q| q.device == device)
    }
}

/// A virtual GHZ instance between routers, produced by region routing.
#[derive(Clone, Debug)]
pub struct VirtualResource {
    pub root: QubitId,
    pub leaves: Vec<QubitId>,
    pub consumed: bool,
}

impl VirtualResource {
    pub fn size(&self) -> usize {
        1 + self.leaves.len()
    }
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut out = vec![self.root.clone()];
        out.extend(self.leaves.iter().cloned());
        out
    }
    pub fn qubit_on(&self, device: &str) -> Option<QubitId> {
        self.qubits().into_iter().find(|q| q.device == device)
    }
}

/// A Bell pair shaped down for the linking protocol, one half per end device.
#[derive(Clone, Debug)]
pub struct WireBell {
    pub a: QubitId,
    pub b: QubitId,
    pub used: bool,
}

// ---------------------------------------------------------------------------
// Request outcomes and auditing

/// Engine op-log span of one pipeline phase plus the world state it started
/// from, enough to replay the phase on the oracle.
#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub label: String,
    pub op_lo: usize,
    pub op_hi: usize,
    pub snapshot: GraphState,
}

#[derive(Clone, Debug)]
pub struct RequestOutcome {
    pub request: String,
    pub client_qubits: BTreeMap<String, QubitId>,
    pub edges: Vec<(QubitId, QubitId)>,
    pub consumed_region: Vec<usize>,
    pub consumed_net: Vec<usize>,
    pub phases: Vec<PhaseRecord>,
    pub trace: Vec<String>,
}

/// Tally of one op-log slice, used to audit the LOCC-only contract of the
/// adaptive phase: `inter_device_cz` must stay zero after provisioning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LedgerReport {
    pub fresh: usize,
    pub local: usize,
    pub intra_device_cz: usize,
    pub inter_device_cz: usize,
    pub measurements: usize,
    pub relabels: usize,
}

pub fn audit_ops(ops: &[OpRecord]) -> LedgerReport {
    let mut r = LedgerReport::default();
    for op in ops {
        match op {
            OpRecord::Fresh(_) => r.fresh += 1,
            OpRecord::Local(_, _) => r.local += 1,
            OpRecord::Cz(a, b) => {
                if a.device == b.device {
                    r.intra_device_cz += 1;
                } else {
                    r.inter_device_cz += 1;
                }
            }
            OpRecord::Measure(_, _, _) => r.measurements += 1,
            OpRecord::Relabel(_, _) => r.relabels += 1,
        }
    }
    r
}

/// Count of connected components spanning more than one device — the number
/// of distinct entangled resources shared across locations.
pub fn multi_device_components(g: &GraphState) -> usize {
    let mut seen: BTreeSet<QubitId> = BTreeSet::new();
    let mut count = 0;
    for v in g.vertices() {
        if seen.contains(v) {
            continue;
        }
        let comp = g.component(v);
        let devices: BTreeSet<&str> = comp.iter().map(|q| q.device.as_str()).collect();
        if devices.len() > 1 {
            count += 1;
        }
        seen.extend(comp);
    }
    count
}

/// Replay an op-log slice on the oracle from the restriction of `start` to
/// the components the slice touches (plus `extra` seed qubits for survivors
/// the slice never mentions), and compare against the same restriction of
/// `expected`. `Ok(None)` when the register would exceed the oracle's
/// capacity; `Ok(Some(flag))` is the amplitude-level verdict.
pub fn replay_check(
    start: &GraphState,
    ops: &[OpRecord],
    expected: &GraphState,
    extra: &[QubitId],
) -> Result<Option<bool>, StackError> {
    let mut seeds: BTreeSet<QubitId> = BTreeSet::new();
    let mut fresh = 0usize;
    for op in ops {
        let mentioned: Vec<&QubitId> = match op {
            OpRecord::Fresh(a) => {
                fresh += 1;
                vec![a]
            }
            OpRecord::Local(a, _) => vec![a],
            OpRecord::Cz(a, b) => vec![a, b],
            OpRecord::Measure(a, _, _) => vec![a],
            OpRecord::Relabel(a, b) => vec![a, b],
        };
        for q in mentioned {
            if start.contains(q) {
                seeds.insert(q.clone());
            }
        }
    }
    for q in extra {
        if start.contains(q) {
            seeds.insert(q.clone());
        }
    }
    let mut keep: BTreeSet<QubitId> = BTreeSet::new();
    for s in &seeds {
        keep.extend(start.component(s));
    }
    if keep.len() + fresh > 16 {
        return Ok(None);
    }
    let sv0 = physical_statevector(&start.restricted_to(&keep)?)?;
    let sv = crate::oracle::replay_ops(&sv0, ops)?;
    let labels: BTreeSet<QubitId> = sv.labels().iter().cloned().collect();
    let exp = physical_statevector(&expected.restricted_to(&labels)?)?;
    Ok(Some(crate::oracle::equal_up_to_phase(&sv, &exp, 1e-9)?))
}

// ---------------------------------------------------------------------------
// Simulation

pub struct Simulation {
    pub scenario: Scenario,
    pub topology: RegionTopology,
    pub net_instances: Vec<NetInstance>,
    pub virtuals: Vec<VirtualResource>,
    pub devices: BTreeMap<String, Device>,
    /// client id -> (network id, switch device)
    pub clients: BTreeMap<String, (String, String)>,
    pub events: Vec<LayerEvent>,
    /// Op-log length at the end of the last provisioning round; everything
    /// after this index belongs to the adaptive phase.
    pub provision_mark: usize,
    clock: u64,
    src: OutcomeSource,
}

/// Instantiate every layer-3 and layer-4 state a scenario declares. Layers 1
/// and 2 are modeled as always-succeeding providers (noiseless, heralded
/// retries), so provisioning cannot fail for physical reasons.
pub fn provision_dynamic(scenario: &Scenario) -> Result<Simulation, StackError> {
    let mut sim = Simulation {
        scenario: scenario.clone(),
        topology: RegionTopology::new(),
        net_instances: Vec::new(),
        virtuals: Vec::new(),
        devices: BTreeMap::new(),
        clients: BTreeMap::new(),
        events: Vec::new(),
        provision_mark: 0,
        clock: 0,
        src: OutcomeSource::seeded(scenario.seed),
    };
    for net in &scenario.networks {
        let router = net.router();
        sim.topology.add_router(&router, &net.id);
        sim.add_device(&router, Role::Router, &net.id);
        for s in net.switches() {
            sim.add_device(&s, Role::Switch, &net.id);
        }
        for (c, s) in net.clients() {
            sim.add_device(&c, Role::Client, &net.id);
            sim.clients.insert(c, (net.id.clone(), s));
        }
    }
    for reg in &scenario.regions {
        let members: Vec<&str> = reg.members.iter().map(String::as_str).collect();
        sim.topology.add_region(&reg.id, &members)?;
    }
    sim.replenish()?;
    Ok(sim)
}

impl Simulation {
    fn add_device(&mut self, id: &str, role: Role, network: &str) {
        self.devices.insert(
            id.to_string(),
            Device {
                id: id.to_string(),
                role,
                layer: role.top_layer(),
                network: network.to_string(),
                alive: true,
            },
        );
    }

    fn emit(&mut self, kind: EventKind, payload: String) {
        self.clock += 1;
        self.events.push(LayerEvent { kind, payload, timestamp: self.clock });
    }

    pub fn backing(&self) -> &GraphState {
        &self.topology.backing
    }

    /// Qubits currently held by a device.
    pub fn holdings(&self, device: &str) -> BTreeSet<QubitId> {
        self.topology
            .backing
            .vertices()
            .filter(|q| q.device == device)
            .cloned()
            .collect()
    }

    /// Top up every declared resource inventory to its scenario count. Called
    /// by `provision_dynamic` and again to model replenishment between
    /// requests; restores exact instance censuses.
    pub fn replenish(&mut self) -> Result<(), StackError> {
        for reg in self.scenario.regions.clone() {
            let live = self
                .topology
                .resources
                .iter()
                .filter(|r| r.region == reg.id && !r.consumed)
                .count();
            for _ in live..reg.copies as usize {
                let members: Vec<&str> = reg.members.iter().map(String::as_str).collect();
                self.topology.add_ghz(&reg.id, &members)?;
            }
            self.emit(
                EventKind::EntanglementReady,
                format!("region={} copies={}", reg.id, reg.copies),
            );
        }
        for net in self.scenario.networks.clone() {
            if net.switch_clients.is_empty() {
                continue;
            }
            let mut devices = vec![net.router()];
            devices.extend(net.switches());
            let m = devices.len();
            for size in 2..=m {
                let live = self
                    .net_instances
                    .iter()
                    .filter(|i| i.network == net.id && i.size() == size && !i.consumed)
                    .count();
                for _ in live..net.copies as usize {
                    // Canonical bundle layout: the size-s instance roots at
                    // slot m+1-s and spans the last s slots.
                    let slots = &devices[m - size..];
                    let qubits: Vec<QubitId> =
                        slots.iter().map(|d| self.topology.fresh_qubit(d)).collect();
                    self.topology.backing.add_star(&qubits)?;
                    self.net_instances.push(NetInstance {
                        network: net.id.clone(),
                        root: qubits[0].clone(),
                        leaves: qubits[1..].to_vec(),
                        consumed: false,
                    });
                }
            }
            self.emit(
                EventKind::EntanglementReady,
                format!("network={} sizes=2..{m} copies={}", net.id, net.copies),
            );
        }
        self.provision_mark = self.topology.backing.op_log.len();
        Ok(())
    }

    /// Everything the engine did since provisioning ended.
    pub fn adaptive_ledger(&self) -> LedgerReport {
        audit_ops(&self.topology.backing.op_log[self.provision_mark..])
    }

    /// Level-1 reachability: a classical echo. Pure — touches no quantum
    /// state. True iff both ends are alive (classical channels are reliable
    /// in-simulator, so aliveness is the only failure mode).
    pub fn ping_classical(&self, from: &str, to: &str) -> bool {
        let ok = |d: &str| self.devices.get(d).map(|x| x.alive).unwrap_or(false);
        ok(from) && ok(to)
    }

    /// Ping with monitoring semantics: emits the event round-trip and a
    /// failure-detected record when the echo does not come back.
    pub fn monitor(&mut self, from: &str, to: &str) -> bool {
        self.emit(EventKind::Ping, format!("from={from} to={to}"));
        let ok = self.ping_classical(from, to);
        if ok {
            self.emit(EventKind::PingReply, format!("from={to} to={from}"));
        } else {
            self.emit(EventKind::FailureDetected, format!("device={to}"));
        }
        ok
    }

    /// Mark a device dead and discard every resource that touched it: the
    /// surviving partners Z-measure their halves once the loss is known.
    pub fn fail_device(&mut self, device: &str) -> Result<(), StackError> {
        let d = self
            .devices
            .get_mut(device)
            .ok_or_else(|| StackError::Invalid(format!("unknown device {device}")))?;
        if !d.alive {
            return Ok(());
        }
        d.alive = false;
        let mut to_discard: Vec<QubitId> = Vec::new();
        for i in 0..self.topology.resources.len() {
            let r = &self.topology.resources[i];
            if !r.consumed && r.qubit_on(device).is_some() {
                to_discard.extend(r.qubits());
                self.topology.resources[i].consumed = true;
            }
        }
        for inst in self.net_instances.iter_mut() {
            if !inst.consumed && inst.qubit_on(device).is_some() {
                to_discard.extend(inst.qubits());
                inst.consumed = true;
            }
        }
        for v in self.virtuals.iter_mut() {
            if !v.consumed && v.qubit_on(device).is_some() {
                to_discard.extend(v.qubits());
                v.consumed = true;
            }
        }
        for q in to_discard {
            if self.topology.backing.contains(&q) {
                self.topology.backing.discard(&q, &mut self.src)?;
            }
        }
        Ok(())
    }

    // -- local helpers ------------------------------------------------------

    /// Undo the tracked byproduct frames on the given qubits with local
    /// corrections, so the stored graph and the physical state coincide there.
    fn correct_frames(&mut self, qs: &[QubitId]) -> Result<(), StackError> {
        for q in qs {
            let c = self.topology.backing.byproduct(q)?;
            if !c.is_identity() {
                self.topology.backing.apply_local(q, c.adjoint())?;
            }
        }
        Ok(())
    }

    /// Shape a star resource down to a Bell pair between `a` and `b`:
    /// byproduct-correct, Z-measure the surplus leaves, and if the root sits
    /// on a third device, X-measure it to re-root onto `a`.
    fn shape_to_bell(
        &mut self,
        qubits: &[QubitId],
        root: &QubitId,
        a: &QubitId,
        b: &QubitId,
    ) -> Result<(), StackError> {
        self.correct_frames(qubits)?;
        for q in qubits {
            if q != a && q != b && q != root {
                self.topology.backing.measure_z_mut(q, &mut self.src)?;
            }
        }
        if root != a && root != b {
            self.topology.backing.measure_x_mut(root, Some(a), &mut self.src)?;
        }
        self.correct_frames(&[a.clone(), b.clone()])?;
        Ok(())
    }

    fn pick_net_instance(&self, network: &str, da: &str, db: &str) -> Option<usize> {
        self.net_instances
            .iter()
            .enumerate()
            .filter(|(_, i)| {
                i.network == network
                    && !i.consumed
                    && i.qubit_on(da).is_some()
                    && i.qubit_on(db).is_some()
            })
            .min_by_key(|(k, i)| (i.size(), *k))
            .map(|(k, _)| k)
    }

    fn pick_virtual(&self, ra: &str, rb: &str) -> Option<usize> {
        self.virtuals
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.consumed && v.qubit_on(ra).is_some() && v.qubit_on(rb).is_some())
            .min_by_key(|(k, v)| (v.size(), *k))
            .map(|(k, _)| k)
    }

    /// Consume a network instance covering two devices of one network and
    /// shape it into a Bell pair; returns the two halves.
    fn net_wire(
        &mut self,
        network: &str,
        da: &str,
        db: &str,
    ) -> Result<(QubitId, QubitId), StackError> {
        let k = self.pick_net_instance(network, da, db).ok_or_else(|| {
            StackError::InsufficientResources(format!(
                "network {network} has no live instance covering {da} and {db}"
            ))
        })?;
        let inst = self.net_instances[k].clone();
        let qa = inst.qubit_on(da).unwrap();
        let qb = inst.qubit_on(db).unwrap();
        self.shape_to_bell(&inst.qubits(), &inst.root, &qa, &qb)?;
        self.net_instances[k].consumed = true;
        Ok((qa, qb))
    }

    /// Consume a virtual instance covering two routers and shape it into a
    /// Bell pair between them.
    fn virtual_wire(&mut self, ra: &str, rb: &str) -> Result<(QubitId, QubitId), StackError> {
        let k = self.pick_virtual(ra, rb).ok_or_else(|| {
            StackError::InsufficientResources(format!(
                "no virtual instance covers routers {ra} and {rb}"
            ))
        })?;
        let v = self.virtuals[k].clone();
        let qa = v.qubit_on(ra).unwrap();
        let qb = v.qubit_on(rb).unwrap();
        self.shape_to_bell(&v.qubits(), &v.root, &qa, &qb)?;
        self.virtuals[k].consumed = true;
        Ok((qa, qb))
    }

    /// Establish a virtual network state between the given routers without a
    /// client request on top — the route-only entry point.
    pub fn run_routing(
        &mut self,
        targets: &BTreeSet<String>,
    ) -> Result<crate::routing::RoutingOutcome, StackError> {
        let out = region_routing(&mut self.topology, targets, &unit_cost, &mut self.src)?;
        for inst in &out.instances {
            self.virtuals.push(VirtualResource {
                root: inst.root.clone(),
                leaves: inst.leaves.clone(),
                consumed: false,
            });
        }
        Ok(out)
    }

    // -- the request pipeline ----------------------------------------------

    /// Serve one copy of a request: route between the involved networks'
    /// routers, extend the virtual state to the requesting switches by Bell
    /// merges at the routers, run the linking protocol, and hand the finished
    /// qubits over to the clients by relabeling. Each phase records its op-log
    /// span and starting snapshot so tests can replay it on the oracle.
    pub fn fulfill_request(&mut self, req: &RequestDef) -> Result<RequestOutcome, StackError> {
        self.emit(EventKind::Request, format!("request={}", req.id));
        let mut edges: Vec<(String, String)> = Vec::new();
        for (a, b) in &req.edges {
            let e = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        let mut involved: BTreeSet<String> = BTreeSet::new();
        let site = |c: &String| -> Result<(String, String), StackError> {
            self.clients.get(c).cloned().ok_or_else(|| StackError::UnknownClient(c.clone()))
        };
        let mut sites: BTreeMap<String, (String, String)> = BTreeMap::new();
        for (a, b) in &edges {
            for c in [a, b] {
                let s = site(c)?;
                involved.insert(s.0.clone());
                sites.insert(c.clone(), s);
            }
        }
        for (_, (net, sw)) in &sites {
            if !self.devices[sw].alive {
                return Err(StackError::DeviceDown(sw.clone()));
            }
            if involved.len() >= 2 {
                let router = format!("{net}-r");
                if !self.devices[&router].alive {
                    return Err(StackError::DeviceDown(router));
                }
            }
        }

        let mut out = RequestOutcome {
            request: req.id.clone(),
            client_qubits: BTreeMap::new(),
            edges: Vec::new(),
            consumed_region: Vec::new(),
            consumed_net: Vec::new(),
            phases: Vec::new(),
            trace: Vec::new(),
        };

        // Phase 1: virtual network state between the involved routers.
        if involved.len() >= 2 {
            let targets: BTreeSet<String> =
                involved.iter().map(|n| format!("{n}-r")).collect();
            let snapshot = self.topology.backing.clone();
            let routed =
                region_routing(&mut self.topology, &targets, &unit_cost, &mut self.src)?;
            for (i, (lo, hi)) in routed.op_ranges.iter().enumerate() {
                out.phases.push(PhaseRecord {
                    label: format!("routing step={}", i + 1),
                    op_lo: *lo,
                    op_hi: *hi,
                    snapshot: snapshot.clone(),
                });
            }
            out.trace.extend(routed.trace);
            out.consumed_region = routed.consumed;
            for inst in routed.instances {
                self.virtuals.push(VirtualResource {
                    root: inst.root,
                    leaves: inst.leaves,
                    consumed: false,
                });
            }
        }

        // Phase 2+3: one Bell wire per target edge that crosses devices; a
        // cross-network wire chains virtual state and both end networks'
        // instances through Bell merges at the routers.
        let net_before = self.net_instances.iter().filter(|i| i.consumed).count();
        let mut wires: Vec<Option<WireBell>> = Vec::new();
        for (u, v) in &edges {
            let (nu, su) = sites[u].clone();
            let (nv, sv) = sites[v].clone();
            if su == sv {
                wires.push(None);
                continue;
            }
            let snapshot = self.topology.backing.clone();
            let lo = self.topology.backing.op_log.len();
            let (wa, wb) = if nu == nv {
                self.net_wire(&nu, &su, &sv)?
            } else {
                let (ru, rv) = (format!("{nu}-r"), format!("{nv}-r"));
                let (va, vb) = self.virtual_wire(&ru, &rv)?;
                // Entanglement swap at each router: merge the virtual half
                // with the router half of an intra-network Bell pair.
                let (qra, qsa) = self.net_wire(&nu, &ru, &su)?;
                self.topology.backing.bell_merge_mut(&va, &qra, &mut self.src)?;
                let (qrb, qsb) = self.net_wire(&nv, &rv, &sv)?;
                self.topology.backing.bell_merge_mut(&vb, &qrb, &mut self.src)?;
                (qsa, qsb)
            };
            self.correct_frames(&[wa.clone(), wb.clone()])?;
            out.phases.push(PhaseRecord {
                label: format!("wire edge={u}~{v}"),
                op_lo: lo,
                op_hi: self.topology.backing.op_log.len(),
                snapshot,
            });
            self.emit(EventKind::EntanglementReady, format!("wire={u}~{v}"));
            out.trace.push(format!("wire edge={u}~{v} a={wa} b={wb}"));
            wires.push(Some(WireBell { a: wa, b: wb, used: false }));
        }
        out.consumed_net = self
            .net_instances
            .iter()
            .enumerate()
            .filter(|(_, i)| i.consumed)
            .map(|(k, _)| k)
            .skip(net_before)
            .collect();

        // Phase 4: linking — fresh client qubits on the switches, each target
        // edge realized by a local CZ or by contracting a wire.
        let snapshot = self.topology.backing.clone();
        let lo = self.topology.backing.op_log.len();
        let site_devices: BTreeMap<String, String> =
            sites.iter().map(|(c, (_, sw))| (c.clone(), sw.clone())).collect();
        let mut wire_pool: Vec<WireBell> = wires.into_iter().flatten().collect();
        let qubit_of = linking_protocol(
            &mut self.topology.backing,
            &site_devices,
            &mut wire_pool,
            &edges,
            &mut self.src,
        )?;
        out.phases.push(PhaseRecord {
            label: "linking".into(),
            op_lo: lo,
            op_hi: self.topology.backing.op_log.len(),
            snapshot,
        });

        // Phase 5: teleportation to the clients, modeled as hand-over by
        // relabeling (client-side Bell pairs are noiseless and deterministic
        // under the stated assumptions).
        let snapshot = self.topology.backing.clone();
        let lo = self.topology.backing.op_log.len();
        for (c, q) in qubit_of.iter() {
            let held: Vec<u32> = self
                .topology
                .backing
                .vertices()
                .filter(|x| x.device == *c)
                .map(|x| x.index)
                .collect();
            let idx = held.iter().max().map(|m| m + 1).unwrap_or(0);
            let new = QubitId::new(c.clone(), idx);
            self.topology.backing.relabel(q, new.clone())?;
            out.client_qubits.insert(c.clone(), new);
        }
        out.phases.push(PhaseRecord {
            label: "delivery".into(),
            op_lo: lo,
            op_hi: self.topology.backing.op_log.len(),
            snapshot,
        });
        for (u, v) in &edges {
            out.edges.push((out.client_qubits[u].clone(), out.client_qubits[v].clone()));
        }
        out.trace.push(format!(
            "delivered request={} clients=[{}]",
            req.id,
            out.client_qubits.keys().cloned().collect::<Vec<_>>().join(",")
        ));
        self.emit(EventKind::RequestComplete, format!("request={}", req.id));
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Linking protocol, standalone

/// Transform Bell wires and fresh local qubits into an arbitrary target graph
/// over clients, using LOCC only: per client one fresh |+> qubit on its
/// device; a same-device edge is one local CZ; a cross-device edge consumes a
/// wire whose halves are CZ-hooked to the endpoint qubits and contracted by Y
/// measurements. Returns the client qubits.
pub fn linking_protocol(
    world: &mut GraphState,
    sites: &BTreeMap<String, String>,
    wires: &mut [WireBell],
    target: &[(String, String)],
    src: &mut OutcomeSource,
) -> Result<BTreeMap<String, QubitId>, StackError> {
    let correct = |g: &mut GraphState, q: &QubitId| -> Result<(), StackError> {
        let c = g.byproduct(q)?;
        if !c.is_identity() {
            g.apply_local(q, c.adjoint())?;
        }
        Ok(())
    };
    let mut qubit_of: BTreeMap<String, QubitId> = BTreeMap::new();
    for (c, dev) in sites {
        let idx = world
            .vertices()
            .filter(|q| q.device == *dev)
            .map(|q| q.index)
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        let q = QubitId::new(dev.clone(), idx);
        world.add_vertex(q.clone())?;
        qubit_of.insert(c.clone(), q);
    }
    for (u, v) in target {
        let qu = qubit_of.get(u).ok_or_else(|| StackError::UnknownClient(u.clone()))?.clone();
        let qv = qubit_of.get(v).ok_or_else(|| StackError::UnknownClient(v.clone()))?.clone();
        correct(world, &qu)?;
        correct(world, &qv)?;
        let (du, dv) = (sites[u].clone(), sites[v].clone());
        if du == dv {
            world.apply_cz_mut(&qu, &qv)?;
            continue;
        }
        let k = wires
            .iter()
            .position(|w| {
                !w.used
                    && ((w.a.device == du && w.b.device == dv)
                        || (w.a.device == dv && w.b.device == du))
            })
            .ok_or_else(|| {
                StackError::InsufficientResources(format!("no wire between {du} and {dv}"))
            })?;
        let (wa, wb) = if wires[k].a.device == du {
            (wires[k].a.clone(), wires[k].b.clone())
        } else {
            (wires[k].b.clone(), wires[k].a.clone())
        };
        wires[k].used = true;
        correct(world, &wa)?;
        correct(world, &wb)?;
        world.apply_cz_mut(&qu, &wa)?;
        world.apply_cz_mut(&qv, &wb)?;
        correct(world, &wa)?;
        world.measure_y_mut(&wa, src)?;
        correct(world, &wb)?;
        world.measure_y_mut(&wb, src)?;
    }
    for q in qubit_of.values() {
        correct(world, q)?;
    }
    Ok(qubit_of)
}

// ---------------------------------------------------------------------------
// Level-2 reachability: state verification by stabilizer sampling

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Failed,
    Inconclusive,
}

/// One copy of the ensemble under test. `lost` marks qubits whose device is
/// gone: they still purify the state, but no measurement may touch them, so
/// the verifier sees the reduced state on the survivors.
#[derive(Clone, Debug)]
pub struct EnsembleCopy {
    pub state: GraphState,
    pub lost: BTreeSet<QubitId>,
}

/// Destructively verify an ensemble: consume `budget` copies, measuring on
/// each one the stabilizer generators that remain accessible (generators
/// centred on a lost qubit are skipped; Z factors on lost qubits drop out).
/// Any −1 sample fails the ensemble; all +1 with a positive budget verifies
/// it; too small a budget — verification needs budget+1 copies so one
/// survives — is inconclusive. Sampling is seeded and reproducible.
pub fn verify_state(
    copies: &mut Vec<EnsembleCopy>,
    budget: usize,
    seed: u64,
) -> Result<Verdict, StackError> {
    if budget == 0 || copies.len() < budget + 1 {
        return Ok(Verdict::Inconclusive);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consumed: Vec<EnsembleCopy> = copies.drain(..budget).collect();
    let mut failed = false;
    for copy in &consumed {
        let mut sv = physical_statevector(&copy.state)?;
        for a in copy.state.vertices() {
            if copy.lost.contains(a) {
                continue;
            }
            let mut p = PauliString::new().with(a.clone(), PauliOp::X);
            for b in copy.state.neighbours(a)? {
                if !copy.lost.contains(b) {
                    p = p.with(b.clone(), PauliOp::Z);
                }
            }
            let e = expect_pauli(&sv, &p)?;
            let p_plus = (1.0 + e) / 2.0;
            if rng.gen::<f64>() < p_plus {
                let (_, post) = measure_stabilizer(&sv, &p, 0)?;
                sv = post;
            } else {
                failed = true;
                break;
            }
        }
        if failed {
            break;
        }
    }
    Ok(if failed { Verdict::Failed } else { Verdict::Verified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn two_net_scenario() -> Scenario {
        parse_scenario(
            "scenario.seed = 5\n\
             network.a.clients = 1,1\n\
             network.b.clients = 1\n\
             region.ab.members = a-r,b-r\n\
             region.ab.copies = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn provisioning_lays_out_bundles_and_regions() {
        let sim = provision_dynamic(&two_net_scenario()).unwrap();
        // Network a: router + 2 switches -> sizes 2 and 3; network b: size 2.
        let sizes: Vec<(String, usize)> = sim
            .net_instances
            .iter()
            .map(|i| (i.network.clone(), i.size()))
            .collect();
        assert_eq!(
            sizes,
            vec![("a".into(), 2), ("a".into(), 3), ("b".into(), 2)]
        );
        assert_eq!(sim.topology.resources.len(), 2);
        assert!(sim.devices["a-r"].alive && sim.devices["b-s1"].alive);
        assert_eq!(sim.devices["a-c1"].role, Role::Client);
        // Size-3 instance roots at the router, pair on the last two slots.
        let big = sim.net_instances.iter().find(|i| i.size() == 3).unwrap();
        assert_eq!(big.root.device, "a-r");
    }

    #[test]
    fn empty_scenario_provisions_nothing() {
        let sim = provision_dynamic(&Scenario::default()).unwrap();
        assert_eq!(sim.backing().vertex_count(), 0);
        assert!(sim.net_instances.is_empty());
    }

    #[test]
    fn replenish_restores_census_after_consumption() {
        let mut sim = provision_dynamic(&two_net_scenario()).unwrap();
        let req = RequestDef {
            id: "q".into(),
            edges: vec![("a-c1".into(), "b-c1".into())],
            copies: 1,
        };
        sim.fulfill_request(&req).unwrap();
        assert!(sim.net_instances.iter().any(|i| i.consumed));
        let census = |s: &Simulation| -> Vec<(String, usize)> {
            let mut v: Vec<(String, usize)> = s
                .net_instances
                .iter()
                .filter(|i| !i.consumed)
                .map(|i| (i.network.clone(), i.size()))
                .collect();
            v.extend(
                s.topology
                    .unconsumed()
                    .map(|r| (r.region.clone(), r.size())),
            );
            v.sort();
            v
        };
        let fresh = census(&provision_dynamic(&two_net_scenario()).unwrap());
        assert_ne!(census(&sim), fresh);
        sim.replenish().unwrap();
        assert_eq!(census(&sim), fresh);
    }

    #[test]
    fn events_have_strictly_increasing_timestamps() {
        let mut sim = provision_dynamic(&two_net_scenario()).unwrap();
        sim.monitor("a-r", "b-r");
        sim.fail_device("b-r").unwrap();
        sim.monitor("a-r", "b-r");
        assert!(sim.events.len() >= 4);
        for w in sim.events.windows(2) {
            assert!(w[0].timestamp < w[1].timestamp);
        }
        assert!(sim
            .events
            .iter()
            .any(|e| e.kind == EventKind::FailureDetected && e.payload == "device=b-r"));
    }

    #[test]
    fn ping_is_pure_and_tracks_aliveness() {
        let mut sim = provision_dynamic(&two_net_scenario()).unwrap();
        let ops = sim.backing().op_log.len();
        assert!(sim.ping_classical("a-c1", "a-c1"));
        assert!(sim.ping_classical("a-s1", "b-r"));
        sim.fail_device("b-r").unwrap();
        assert!(!sim.ping_classical("a-s1", "b-r"));
        assert!(!sim.ping_classical("b-r", "a-s1"));
        // Failure discards resources (measurements), but pings added nothing
        // on top of that.
        let ledger = audit_ops(&sim.backing().op_log[ops..]);
        assert_eq!(ledger.fresh + ledger.intra_device_cz + ledger.inter_device_cz, 0);
    }

    #[test]
    fn request_through_dead_router_reports_device_down() {
        let mut sim = provision_dynamic(&two_net_scenario()).unwrap();
        sim.fail_device("b-r").unwrap();
        let req = RequestDef {
            id: "q".into(),
            edges: vec![("a-c1".into(), "b-c1".into())],
            copies: 1,
        };
        match sim.fulfill_request(&req) {
            Err(StackError::DeviceDown(d)) => assert_eq!(d, "b-r"),
            other => panic!("expected device-down, got {other:?}"),
        }
    }

    #[test]
    fn unknown_client_is_rejected() {
        let mut sim = provision_dynamic(&two_net_scenario()).unwrap();
        let req = RequestDef {
            id: "q".into(),
            edges: vec![("a-c1".into(), "zz-c9".into())],
            copies: 1,
        };
        assert!(matches!(
            sim.fulfill_request(&req),
            Err(StackError::UnknownClient(_))
        ));
    }
}
