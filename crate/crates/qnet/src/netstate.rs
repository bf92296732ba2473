//! Network states: bundles of GHZ resources held across device chains.
//!
//! A network of m devices keeps one size-i GHZ bundle per device pair chain
//! (sizes 2..m), so any subset of devices can extract entanglement locally.
//! On top of the basic bundle this module implements the two reliability
//! schemes — cyclic symmetrization over device roles and shield qubits on
//! star edges — plus graceful departure, failure, recovery, client-side
//! expansion, and storage-cost accounting.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graphstate::{GraphError, GraphState, OutcomeSource, QubitId};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("unknown device: {0}")]
    UnknownDevice(String),
    #[error("not a shielded state")]
    NotShielded,
    #[error("device not failed: {0}")]
    DeviceNotFailed(String),
    #[error("wrong layout: {0}")]
    WrongLayout(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Client counts per size family: `clients[i-1]` is c_i, the number of
/// clients connected to the device that roots the size-i bundle member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    clients: Vec<u32>,
}

impl NetworkSpec {
    pub fn new(clients: Vec<u32>) -> Result<Self, NetError> {
        if clients.len() < 2 {
            return Err(NetError::InvalidSpec(format!(
                "need at least 2 devices, got {}",
                clients.len()
            )));
        }
        Ok(NetworkSpec { clients })
    }
    pub fn uniform(c: u32, m: usize) -> Result<Self, NetError> {
        NetworkSpec::new(vec![c; m])
    }
    pub fn m(&self) -> usize {
        self.clients.len()
    }
    /// c_i for size family i (1-based).
    pub fn clients_of_family(&self, i: usize) -> u32 {
        self.clients[i - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Plain,
    Shielded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Intact,
    Destroyed,
    Consumed,
    /// Shielded instance touched by a failure, awaiting recovery.
    Pending,
}

#[derive(Clone, Debug)]
pub struct GhzInstance {
    /// Size family i of the undisturbed instance (2..m).
    pub family: usize,
    /// Bundle index (symmetrized states hold several bundles).
    pub bundle: usize,
    /// Index within the family's c_i copies of one bundle.
    pub ordinal: u32,
    /// Cyclic-shift configuration the bundle belongs to (1-based; 1 = plain).
    pub config: usize,
    pub root: QubitId,
    pub leaves: Vec<QubitId>,
    /// leaf -> shield qubit (shields live on the root's device).
    pub shields: BTreeMap<QubitId, QubitId>,
    pub status: Status,
}

impl GhzInstance {
    pub fn size(&self) -> usize {
        1 + self.leaves.len()
    }
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut out = vec![self.root.clone()];
        out.extend(self.leaves.iter().cloned());
        out.extend(self.shields.values().cloned());
        out
    }
    pub fn devices(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        out.insert(self.root.device.clone());
        for l in &self.leaves {
            out.insert(l.device.clone());
        }
        out
    }
    pub fn holds_on(&self, d: &str) -> bool {
        self.qubits().iter().any(|q| q.device == d)
    }
}

/// How symmetrization distributes device roles across bundle copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetrizeMode {
    /// Cyclic shifts of the canonical assignment (m configurations).
    Cyclic,
    /// All m! role permutations.
    FullPermutation,
}

#[derive(Clone, Debug)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    pub layout: Layout,
    /// Live devices, in original order.
    pub devices: Vec<String>,
    /// Original 1-based slot of each device (stable across departures).
    slots: BTreeMap<String, usize>,
    pub instances: Vec<GhzInstance>,
    /// Configuration per bundle, present iff symmetrized.
    pub configurations: Option<Vec<usize>>,
    pub backing: GraphState,
    pub failed: BTreeSet<String>,
    counters: BTreeMap<String, u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub m_m: u64,
    pub m_s: u64,
    pub m_b: u64,
}

/// Storage costs of serving every client: multipartite scheme after client
/// expansion (M_M), the same including shield qubits (M_S), and the direct
/// bipartite alternative (M_B).
pub fn cost_report(spec: &NetworkSpec) -> CostReport {
    let m = spec.m();
    let c = |i: usize| spec.clients_of_family(i) as u64;
    let mut m_m = 0u64;
    for i in 2..=m {
        let inner: u64 = (1..i).map(c).sum();
        m_m += c(i) * (1 + inner);
    }
    let mut m_s = m_m;
    for i in 3..=m {
        m_s += c(i) * (i as u64 - 1);
    }
    let mut m_b = 0u64;
    for i in 1..m {
        for j in i + 1..=m {
            m_b += 2 * c(i) * c(j);
        }
    }
    CostReport { m_m, m_s, m_b }
}

fn device_name(slot: usize) -> String {
    format!("d{slot}")
}

impl NetworkState {
    fn fresh(&mut self, device: &str) -> QubitId {
        let ctr = self.counters.entry(device.to_string()).or_insert(0);
        let q = QubitId::new(device, *ctr);
        *ctr += 1;
        q
    }

    fn empty(spec: NetworkSpec, layout: Layout) -> Self {
        let m = spec.m();
        let devices: Vec<String> = (1..=m).map(device_name).collect();
        let slots = devices
            .iter()
            .enumerate()
            .map(|(k, d)| (d.clone(), k + 1))
            .collect();
        NetworkState {
            spec,
            layout,
            devices,
            slots,
            instances: Vec::new(),
            configurations: None,
            backing: GraphState::new(),
            failed: BTreeSet::new(),
            counters: BTreeMap::new(),
        }
    }

    /// Original slot (1-based) of a live device.
    pub fn slot_of(&self, d: &str) -> Option<usize> {
        self.slots.get(d).copied().filter(|_| self.devices.iter().any(|x| x == d))
    }

    /// Size family whose clients connect at this device in canonical layout.
    pub fn family_at(&self, d: &str) -> Option<usize> {
        self.slots.get(d).map(|s| self.spec.m() + 1 - s)
    }

    /// Add one star instance with given root/leaf device slots; decorates
    /// edges with shield qubits when the layout asks for it.
    fn add_instance(
        &mut self,
        family: usize,
        bundle: usize,
        ordinal: u32,
        config: usize,
        root_slot: usize,
        leaf_slots: &[usize],
    ) -> Result<(), NetError> {
        let root_dev = device_name(root_slot);
        let root = self.fresh(&root_dev);
        self.backing.add_vertex(root.clone())?;
        let mut leaves = Vec::new();
        let mut shields = BTreeMap::new();
        let decorate = self.layout == Layout::Shielded && leaf_slots.len() >= 2;
        for &ls in leaf_slots {
            let leaf = self.fresh(&device_name(ls));
            self.backing.add_vertex(leaf.clone())?;
            if decorate {
                let shield = self.fresh(&root_dev);
                self.backing.add_vertex(shield.clone())?;
                self.backing.apply_cz_mut(&root, &shield)?;
                self.backing.apply_cz_mut(&shield, &leaf)?;
                shields.insert(leaf.clone(), shield);
            } else {
                self.backing.apply_cz_mut(&root, &leaf)?;
            }
            leaves.push(leaf);
        }
        self.instances.push(GhzInstance {
            family,
            bundle,
            ordinal,
            config,
            root,
            leaves,
            shields,
            status: Status::Intact,
        });
        Ok(())
    }

    pub fn live_qubits(&self) -> usize {
        self.backing.vertex_count()
    }

    pub fn intact_instances(&self) -> impl Iterator<Item = &GhzInstance> {
        self.instances.iter().filter(|i| i.status == Status::Intact)
    }

    fn require_device(&self, d: &str) -> Result<(), NetError> {
        if self.devices.iter().any(|x| x == d) {
            Ok(())
        } else {
            Err(NetError::UnknownDevice(d.to_string()))
        }
    }

    /// Strip decoration from one instance by Y-measuring the given shields
    /// (contracts root--shield--leaf paths into direct edges).
    fn contract_shields(
        &mut self,
        idx: usize,
        which: &[QubitId],
        src: &mut OutcomeSource,
    ) -> Result<(), NetError> {
        for shield in which {
            self.backing.measure_y_mut(shield, src)?;
        }
        let inst = &mut self.instances[idx];
        inst.shields.retain(|_, s| !which.contains(s));
        Ok(())
    }

    /// Graceful departure: the leaver converts its rooted instances to plain
    /// stars (Y on its shields), Z-measures its leaf qubits, and X-measures
    /// its root qubits so each instance survives one device smaller.
    pub fn device_leave(&self, d: &str, src: &mut OutcomeSource) -> Result<Self, NetError> {
        self.require_device(d)?;
        let mut st = self.clone();
        for idx in 0..st.instances.len() {
            if st.instances[idx].status != Status::Intact || !st.instances[idx].holds_on(d) {
                continue;
            }
            // 1. Leaver's own shields go first (instances rooted at d).
            if st.instances[idx].root.device == d {
                let own: Vec<QubitId> = st.instances[idx].shields.values().cloned().collect();
                st.contract_shields(idx, &own, src)?;
            }
            // 2. Leaf qubits on d: Z out; owners drop the dangling shields.
            let leaving: Vec<QubitId> = st.instances[idx]
                .leaves
                .iter()
                .filter(|l| l.device == d)
                .cloned()
                .collect();
            for leaf in &leaving {
                st.backing.measure_z_mut(leaf, src)?;
                if let Some(shield) = st.instances[idx].shields.remove(leaf) {
                    st.backing.measure_z_mut(&shield, src)?;
                }
                st.instances[idx].leaves.retain(|l| l != leaf);
            }
            // 3. Root on d (already plain after step 1): X out, smallest leaf
            //    becomes the new root.
            if st.instances[idx].root.device == d {
                let root = st.instances[idx].root.clone();
                let mut leaves = st.instances[idx].leaves.clone();
                leaves.sort();
                if let Some(b0) = leaves.first().cloned() {
                    st.backing.measure_x_mut(&root, Some(&b0), src)?;
                    st.instances[idx].root = b0.clone();
                    st.instances[idx].leaves.retain(|l| *l != b0);
                } else {
                    // Instance shrank to the root alone; drop below.
                    st.backing.measure_x_mut(&root, None, src)?;
                    st.instances[idx].status = Status::Consumed;
                    continue;
                }
            }
            st.finish_reduction(idx, src)?;
        }
        st.instances.retain(|i| i.status != Status::Consumed);
        st.devices.retain(|x| x != d);
        Ok(st)
    }

    /// Post-reduction bookkeeping shared by leave and recover: drop size-1
    /// remnants, and strip the last shield once an instance is a bare pair.
    fn finish_reduction(&mut self, idx: usize, src: &mut OutcomeSource) -> Result<(), NetError> {
        if self.instances[idx].leaves.is_empty() {
            let root = self.instances[idx].root.clone();
            if self.backing.contains(&root) {
                self.backing.measure_x_mut(&root, None, src)?;
            }
            self.instances[idx].status = Status::Consumed;
            return Ok(());
        }
        if self.instances[idx].size() == 2 && !self.instances[idx].shields.is_empty() {
            let rest: Vec<QubitId> = self.instances[idx].shields.values().cloned().collect();
            self.contract_shields(idx, &rest, src)?;
        }
        Ok(())
    }

    /// Unexpected disconnect: the device's qubits are lost (modeled as
    /// Z-discards of one branch of the trace). Plain instances touching the
    /// device are destroyed outright; shielded ones await recovery.
    pub fn device_fail(&self, d: &str, src: &mut OutcomeSource) -> Result<Self, NetError> {
        self.require_device(d)?;
        let mut st = self.clone();
        st.failed.insert(d.to_string());
        for idx in 0..st.instances.len() {
            if st.instances[idx].status != Status::Intact || !st.instances[idx].holds_on(d) {
                continue;
            }
            for q in st.instances[idx].qubits() {
                if q.device == d && st.backing.contains(&q) {
                    st.backing.discard(&q, src)?;
                }
            }
            if st.layout == Layout::Shielded {
                st.instances[idx].status = Status::Pending;
            } else {
                st.instances[idx].status = Status::Destroyed;
                for q in st.instances[idx].qubits() {
                    if st.backing.contains(&q) {
                        st.backing.discard(&q, src)?;
                    }
                }
            }
        }
        st.devices.retain(|x| x != d);
        Ok(st)
    }

    /// Deterministic shield recovery after a failure: Z-measure every shield
    /// pointing at a lost leaf; instances rooted at the failed device (their
    /// shields died with it) and bare pairs touching it are lost.
    pub fn recover_shielded(&self, d: &str, src: &mut OutcomeSource) -> Result<Self, NetError> {
        if self.layout != Layout::Shielded {
            return Err(NetError::NotShielded);
        }
        if !self.failed.contains(d) {
            return Err(NetError::DeviceNotFailed(d.to_string()));
        }
        let mut st = self.clone();
        for idx in 0..st.instances.len() {
            if st.instances[idx].status != Status::Pending {
                continue;
            }
            let rooted_here = st.instances[idx].root.device == d;
            if rooted_here || st.instances[idx].shields.is_empty() {
                // Root and shields (or the bare pair partner) died with d.
                st.instances[idx].status = Status::Destroyed;
                for q in st.instances[idx].qubits() {
                    if st.backing.contains(&q) {
                        st.backing.discard(&q, src)?;
                    }
                }
                continue;
            }
            let lost: Vec<QubitId> = st.instances[idx]
                .leaves
                .iter()
                .filter(|l| l.device == d)
                .cloned()
                .collect();
            for leaf in &lost {
                if let Some(shield) = st.instances[idx].shields.remove(leaf) {
                    st.backing.measure_z_mut(&shield, src)?;
                }
                st.instances[idx].leaves.retain(|l| l != leaf);
            }
            st.instances[idx].status = Status::Intact;
            st.finish_reduction(idx, src)?;
        }
        st.instances.retain(|i| i.status != Status::Consumed);
        Ok(st)
    }

    /// Bundles whose sub-maximal instances all survived a failure: each such
    /// bundle is a complete network state for the remaining devices.
    pub fn intact_full_copies(&self) -> usize {
        let m = self.spec.m();
        let mut by_bundle: BTreeMap<usize, bool> = BTreeMap::new();
        for inst in &self.instances {
            let e = by_bundle.entry(inst.bundle).or_insert(true);
            if inst.family < m && inst.status != Status::Intact {
                *e = false;
            }
        }
        by_bundle.values().filter(|ok| **ok).count()
    }

    /// Expand every instance so its leaves reach all clients of the devices
    /// they sit on: each leaf whose device serves k > 1 clients is fused with
    /// a fresh local (k+1)-star via a Bell measurement.
    pub fn expand_to_clients(&self, src: &mut OutcomeSource) -> Result<Self, NetError> {
        if self.layout != Layout::Plain || self.configurations.is_some() {
            return Err(NetError::WrongLayout(
                "client expansion applies to the plain canonical state".into(),
            ));
        }
        let mut st = self.clone();
        for idx in 0..st.instances.len() {
            if st.instances[idx].status != Status::Intact {
                continue;
            }
            let leaves = st.instances[idx].leaves.clone();
            for leaf in leaves {
                let fam = st
                    .family_at(&leaf.device)
                    .ok_or_else(|| NetError::UnknownDevice(leaf.device.clone()))?;
                let k = st.spec.clients_of_family(fam);
                if k <= 1 {
                    continue;
                }
                // Local (k+1)-star on the leaf's device: root plus one qubit
                // per client, then fuse into the instance.
                let local_root = st.fresh(&leaf.device);
                let clients: Vec<QubitId> =
                    (0..k).map(|_| st.fresh(&leaf.device)).collect();
                let mut star = vec![local_root.clone()];
                star.extend(clients.iter().cloned());
                st.backing.add_star(&star)?;
                st.backing.bell_merge_mut(&leaf, &local_root, src)?;
                let inst = &mut st.instances[idx];
                inst.leaves.retain(|l| *l != leaf);
                inst.leaves.extend(clients);
            }
            // Reducing to canonical star form may have moved the centre.
            let inst = &mut st.instances[idx];
            let centre = st
                .backing
                .star_centre(&inst.root)
                .expect("expanded instance stays a star");
            if centre != inst.root {
                let mut all = vec![inst.root.clone()];
                all.append(&mut inst.leaves);
                all.retain(|q| *q != centre);
                inst.root = centre;
                inst.leaves = all;
            }
        }
        Ok(st)
    }
}

/// Canonical network state: one size-i instance per client slot, rooted at
/// device m+1-i so the bare pair sits on the last two devices.
pub fn build_network_state(spec: &NetworkSpec, layout: Layout) -> Result<NetworkState, NetError> {
    let m = spec.m();
    let mut st = NetworkState::empty(spec.clone(), layout);
    for family in 2..=m {
        for ordinal in 0..spec.clients_of_family(family) {
            let root_slot = m + 1 - family;
            let leaf_slots: Vec<usize> = (root_slot + 1..=m).collect();
            st.add_instance(family, 0, ordinal, 1, root_slot, &leaf_slots)?;
        }
    }
    Ok(st)
}

pub fn symmetrize(spec: &NetworkSpec, n_copies: usize) -> Result<NetworkState, NetError> {
    symmetrize_with(spec, n_copies, SymmetrizeMode::Cyclic)
}

/// n copies of the bundle, distributed round-robin over role assignments.
/// Cyclic mode: configuration k roots the size-i member at device
/// ((i-1 + k-1) mod m) + 1, with leaves on the shifted slots below it.
pub fn symmetrize_with(
    spec: &NetworkSpec,
    n_copies: usize,
    mode: SymmetrizeMode,
) -> Result<NetworkState, NetError> {
    if n_copies < 1 {
        return Err(NetError::InvalidSpec("need at least one copy".into()));
    }
    let m = spec.m();
    let assignments: Vec<Vec<usize>> = match mode {
        SymmetrizeMode::Cyclic => (1..=m)
            .map(|k| (1..=m).map(|p| ((p - 1 + k - 1) % m) + 1).collect())
            .collect(),
        SymmetrizeMode::FullPermutation => permutations(m),
    };
    let mut st = NetworkState::empty(spec.clone(), Layout::Plain);
    let mut configs = Vec::with_capacity(n_copies);
    for bundle in 0..n_copies {
        let cfg = bundle % assignments.len();
        configs.push(cfg + 1);
        let assign = &assignments[cfg];
        for family in 2..=m {
            for ordinal in 0..spec.clients_of_family(family) {
                let root_slot = assign[family - 1];
                let leaf_slots: Vec<usize> =
                    (1..family).map(|p| assign[p - 1]).collect();
                st.add_instance(family, bundle, ordinal, cfg + 1, root_slot, &leaf_slots)?;
            }
        }
    }
    st.configurations = Some(configs);
    Ok(st)
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=m).collect();
    heap_permute(&mut cur, m, &mut out);
    out.sort();
    out
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> OutcomeSource {
        OutcomeSource::seeded(17)
    }

    #[test]
    fn table_costs_examples() {
        let r = cost_report(&NetworkSpec::uniform(3, 5).unwrap());
        assert_eq!((r.m_b, r.m_s, r.m_m), (180, 129, 102));
        let r = cost_report(&NetworkSpec::uniform(7, 15).unwrap());
        assert_eq!((r.m_b, r.m_s, r.m_m), (10290, 5971, 5243));
        let r = cost_report(&NetworkSpec::uniform(1, 2).unwrap());
        assert_eq!((r.m_b, r.m_s, r.m_m), (2, 2, 2));
    }

    #[test]
    fn shield_overhead_identity() {
        for m in 2..=20 {
            for c in 1..=10 {
                let spec = NetworkSpec::uniform(c, m).unwrap();
                let r = cost_report(&spec);
                let want: u64 = (3..=m).map(|i| c as u64 * (i as u64 - 1)).sum();
                assert_eq!(r.m_s - r.m_m, want, "m={m} c={c}");
            }
        }
    }

    #[test]
    fn plain_layout_roots_and_bell_position() {
        let spec = NetworkSpec::uniform(1, 4).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let sizes: Vec<usize> = st.instances.iter().map(|i| i.size()).collect();
        assert_eq!(sizes, vec![2, 3, 4]);
        let bell = st.instances.iter().find(|i| i.family == 2).unwrap();
        assert_eq!(bell.devices(), ["d3".to_string(), "d4".to_string()].into());
        let big = st.instances.iter().find(|i| i.family == 4).unwrap();
        assert_eq!(big.root.device, "d1");
    }

    #[test]
    fn shielded_bell_has_no_shields() {
        let spec = NetworkSpec::uniform(1, 2).unwrap();
        let st = build_network_state(&spec, Layout::Shielded).unwrap();
        assert_eq!(st.instances.len(), 1);
        assert!(st.instances[0].shields.is_empty());
        assert_eq!(st.live_qubits(), 2);
    }

    #[test]
    fn shielded_counts_match_storage_formula() {
        for m in 2..=5 {
            let spec = NetworkSpec::uniform(1, m).unwrap();
            let st = build_network_state(&spec, Layout::Shielded).unwrap();
            let r = cost_report(&spec);
            assert_eq!(st.live_qubits() as u64, r.m_s, "m={m}");
        }
    }

    #[test]
    fn leave_reduces_all_instances() {
        let spec = NetworkSpec::uniform(1, 3).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let st2 = st.device_leave("d3", &mut src()).unwrap();
        // Size-3 instance shrinks to a pair between d1 and d2; the bare pair
        // on (d2, d3) shrinks to nothing and is dropped.
        assert_eq!(st2.instances.len(), 1);
        let inst = &st2.instances[0];
        assert_eq!(inst.size(), 2);
        assert_eq!(inst.devices(), ["d1".to_string(), "d2".to_string()].into());
        assert_eq!(st2.live_qubits(), 2);
        assert!(st2.backing.has_edge(&inst.root, &inst.leaves[0]));
    }

    #[test]
    fn leaf_only_holder_uses_z_measurements_only() {
        // The last device roots nothing in canonical layout.
        let spec = NetworkSpec::uniform(1, 4).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let st2 = st.device_leave("d4", &mut src()).unwrap();
        assert!(st2
            .backing
            .outcome_log
            .iter()
            .all(|r| r.tag == "mz" || r.qubit.device != "d4"));
        assert!(st2
            .backing
            .outcome_log
            .iter()
            .filter(|r| r.qubit.device == "d4")
            .all(|r| r.tag == "mz"));
        // All three instances survive one size smaller (bell drops to 1 -> gone).
        let sizes: Vec<usize> = st2.instances.iter().map(|i| i.size()).collect();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn plain_fail_destroys_exactly_touching_instances() {
        let spec = NetworkSpec::uniform(1, 4).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        // d3 holds a qubit of every instance.
        let st2 = st.device_fail("d3", &mut src()).unwrap();
        assert!(st2.instances.iter().all(|i| i.status == Status::Destroyed));
        assert_eq!(st2.live_qubits(), 0);
        // d1 holds only the size-4 root.
        let st3 = st.device_fail("d1", &mut src()).unwrap();
        let destroyed: Vec<usize> = st3
            .instances
            .iter()
            .filter(|i| i.status == Status::Destroyed)
            .map(|i| i.family)
            .collect();
        assert_eq!(destroyed, vec![4]);
    }

    #[test]
    fn shielded_fail_marks_pending_not_destroyed() {
        let spec = NetworkSpec::uniform(1, 3).unwrap();
        let st = build_network_state(&spec, Layout::Shielded).unwrap();
        let st2 = st.device_fail("d3", &mut src()).unwrap();
        assert!(st2.instances.iter().all(|i| i.status != Status::Destroyed));
        assert!(st2.instances.iter().any(|i| i.status == Status::Pending));
    }

    #[test]
    fn symmetrize_round_robin_and_role_coverage() {
        let spec = NetworkSpec::uniform(1, 3).unwrap();
        let st = symmetrize(&spec, 3).unwrap();
        assert_eq!(st.configurations.as_ref().unwrap(), &vec![1, 2, 3]);
        // Each device roots the size-3 member in exactly one configuration.
        let mut roots: Vec<String> = st
            .instances
            .iter()
            .filter(|i| i.family == 3)
            .map(|i| i.root.device.clone())
            .collect();
        roots.sort();
        assert_eq!(roots, vec!["d1", "d2", "d3"]);
        let st = symmetrize(&spec, 1).unwrap();
        assert_eq!(st.configurations.as_ref().unwrap(), &vec![1]);
        let spec4 = NetworkSpec::uniform(1, 4).unwrap();
        let st = symmetrize(&spec4, 8).unwrap();
        let mut per_cfg = BTreeMap::new();
        for c in st.configurations.as_ref().unwrap() {
            *per_cfg.entry(*c).or_insert(0) += 1;
        }
        assert_eq!(per_cfg.values().copied().collect::<Vec<i32>>(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn intact_counts_match_enumeration_m3_n3() {
        let spec = NetworkSpec::uniform(1, 3).unwrap();
        for fail_slot in 1..=3usize {
            let st = symmetrize(&spec, 3).unwrap();
            let d = format!("d{fail_slot}");
            let st2 = st.device_fail(&d, &mut src()).unwrap();
            // Brute-force: a bundle survives iff its sub-maximal instances
            // avoid the failed device.
            let mut expect = 0usize;
            for bundle in 0..3usize {
                let ok = st
                    .instances
                    .iter()
                    .filter(|i| i.bundle == bundle && i.family < 3)
                    .all(|i| !i.devices().contains(&d));
                if ok {
                    expect += 1;
                }
            }
            assert_eq!(st2.intact_full_copies(), expect, "fail {d}");
            assert_eq!(expect, 1);
        }
    }

    #[test]
    fn expansion_census_matches_cost() {
        let spec = NetworkSpec::new(vec![2, 1, 1]).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let expanded = st.expand_to_clients(&mut src()).unwrap();
        let r = cost_report(&spec);
        assert_eq!(expanded.live_qubits() as u64, r.m_m);
        assert_eq!(r.m_m, 7);
        let mut sizes: Vec<usize> = expanded.instances.iter().map(|i| i.size()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![3, 4]);
        // m=2, c=1: nothing to expand.
        let spec = NetworkSpec::uniform(1, 2).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let expanded = st.expand_to_clients(&mut src()).unwrap();
        assert_eq!(expanded.live_qubits(), 2);
    }

    #[test]
    fn expansion_census_matches_table_row() {
        let spec = NetworkSpec::uniform(3, 5).unwrap();
        let st = build_network_state(&spec, Layout::Plain).unwrap();
        let expanded = st.expand_to_clients(&mut src()).unwrap();
        assert_eq!(expanded.live_qubits() as u64, 102);
    }

    #[test]
    fn full_permutation_mode_covers_all_roles() {
        let spec = NetworkSpec::uniform(1, 3).unwrap();
        let st = symmetrize_with(&spec, 6, SymmetrizeMode::FullPermutation).unwrap();
        assert_eq!(st.configurations.as_ref().unwrap().len(), 6);
        let cfgs: BTreeSet<usize> = st.configurations.as_ref().unwrap().iter().copied().collect();
        assert_eq!(cfgs.len(), 6);
    }
}
