//! Dense state-vector ground truth for small systems.
//!
//! Everything the graph-state engine does is replayable here at amplitude
//! level: build the canonical graph state with CZ gates on |+>^n, apply local
//! Cliffords, project measurements branch by branch, and compare states up to
//! global phase. Capacity is 16 qubits for vectors and 12 for reduced density
//! operators, which covers every certification fixture.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use thiserror::Error;

use crate::clifford::{Clifford, Mat2, Pauli};
use crate::graphstate::{GraphState, OpRecord, QubitId};

pub const MAX_VECTOR_QUBITS: usize = 16;
pub const MAX_DENSITY_QUBITS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("capacity exceeded: {0} qubits (limit {1})")]
    CapacityExceeded(usize, usize),
    #[error("label error: {0}")]
    LabelError(String),
    #[error("impossible outcome: branch probability {0:.3e}")]
    ImpossibleOutcome(f64),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    fn matrix(self) -> Option<Mat2> {
        match self {
            PauliOp::I => None,
            PauliOp::X => Some(Pauli::X.matrix()),
            PauliOp::Y => Some(Pauli::Y.matrix()),
            PauliOp::Z => Some(Pauli::Z.matrix()),
        }
    }
}

/// Tensor product of single-qubit Paulis with an overall phase.
#[derive(Clone, Debug)]
pub struct PauliString {
    pub ops: BTreeMap<QubitId, PauliOp>,
    pub phase: Complex64,
}

impl PauliString {
    pub fn new() -> Self {
        PauliString { ops: BTreeMap::new(), phase: Complex64::new(1.0, 0.0) }
    }
    pub fn with(mut self, q: QubitId, op: PauliOp) -> Self {
        self.ops.insert(q, op);
        self
    }
    pub fn negated(mut self) -> Self {
        self.phase = -self.phase;
        self
    }
    /// Correlation operator of vertex `a` in graph `g`: X_a Z_N(a).
    pub fn correlation_operator(g: &GraphState, a: &QubitId) -> Self {
        let mut p = PauliString::new().with(a.clone(), PauliOp::X);
        for b in g.neighbours(a).expect("vertex in graph") {
            p = p.with(b.clone(), PauliOp::Z);
        }
        p
    }
}

impl Default for PauliString {
    fn default() -> Self {
        PauliString::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureBasis {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug)]
pub struct StateVector {
    labels: Vec<QubitId>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }
    pub fn qubit_count(&self) -> usize {
        self.labels.len()
    }

    fn index_of(&self, q: &QubitId) -> Result<usize, OracleError> {
        self.labels
            .iter()
            .position(|l| l == q)
            .ok_or_else(|| OracleError::LabelError(format!("unknown qubit {q}")))
    }

    /// |0...0> style basis ordering: labels[0] is the most significant bit.
    pub fn product_plus(labels: &[QubitId]) -> Result<Self, OracleError> {
        if labels.len() > MAX_VECTOR_QUBITS {
            return Err(OracleError::CapacityExceeded(labels.len(), MAX_VECTOR_QUBITS));
        }
        let set: BTreeSet<_> = labels.iter().collect();
        if set.len() != labels.len() {
            return Err(OracleError::LabelError("duplicate labels".into()));
        }
        let n = labels.len();
        let dim = 1usize << n;
        let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector { labels: labels.to_vec(), amps: vec![amp; dim] })
    }

    pub fn apply_local(&mut self, q: &QubitId, m: &Mat2) -> Result<(), OracleError> {
        let k = self.index_of(q)?;
        let shift = self.labels.len() - 1 - k;
        let mask = 1usize << shift;
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let a0 = self.amps[idx];
                let a1 = self.amps[idx | mask];
                self.amps[idx] = m[0] * a0 + m[1] * a1;
                self.amps[idx | mask] = m[2] * a0 + m[3] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_clifford(&mut self, q: &QubitId, c: Clifford) -> Result<(), OracleError> {
        self.apply_local(q, &c.matrix())
    }

    pub fn apply_cz(&mut self, a: &QubitId, b: &QubitId) -> Result<(), OracleError> {
        let ka = self.index_of(a)?;
        let kb = self.index_of(b)?;
        if ka == kb {
            return Err(OracleError::LabelError("CZ needs two distinct qubits".into()));
        }
        let n = self.labels.len();
        let ma = 1usize << (n - 1 - ka);
        let mb = 1usize << (n - 1 - kb);
        for idx in 0..self.amps.len() {
            if idx & ma != 0 && idx & mb != 0 {
                self.amps[idx] = -self.amps[idx];
            }
        }
        Ok(())
    }

    /// Extend the register by one fresh qubit in |+> (appended as the least
    /// significant position).
    pub fn tensor_plus(&self, q: &QubitId) -> Result<StateVector, OracleError> {
        if self.labels.contains(q) {
            return Err(OracleError::LabelError(format!("duplicate qubit {q}")));
        }
        if self.labels.len() + 1 > MAX_VECTOR_QUBITS {
            return Err(OracleError::CapacityExceeded(self.labels.len() + 1, MAX_VECTOR_QUBITS));
        }
        let mut labels = self.labels.clone();
        labels.push(q.clone());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = Vec::with_capacity(self.amps.len() * 2);
        for a in &self.amps {
            amps.push(a * s);
            amps.push(a * s);
        }
        Ok(StateVector { labels, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.amps.iter_mut() {
            *c *= s;
        }
    }
}

/// Canonical graph state of the edge set: CZ per edge on |+>^n. Frames are
/// deliberately ignored; apply them separately with `apply_frames`.
pub fn build_statevector(g: &GraphState) -> Result<StateVector, OracleError> {
    let labels: Vec<QubitId> = g.vertices().cloned().collect();
    let mut sv = StateVector::product_plus(&labels)?;
    for (a, b) in g.edges() {
        sv.apply_cz(&a, &b)?;
    }
    Ok(sv)
}

/// Apply every byproduct frame of `g` to `sv`, giving the physical state.
pub fn apply_frames(sv: &mut StateVector, g: &GraphState) -> Result<(), OracleError> {
    for q in g.vertices() {
        let c = g.byproduct(q).expect("vertex has a frame");
        if !c.is_identity() {
            sv.apply_clifford(q, c)?;
        }
    }
    Ok(())
}

/// Physical state of a graph-plus-frames description in one call.
pub fn physical_statevector(g: &GraphState) -> Result<StateVector, OracleError> {
    let mut sv = build_statevector(g)?;
    apply_frames(&mut sv, g)?;
    Ok(sv)
}

/// Replay a slice of an engine op log on a state vector. Fresh qubits extend
/// the register in |+>, measurements remove their qubit using the logged
/// outcome. The result is the exact physical evolution the engine claims to
/// have performed, so comparing against `physical_statevector` of the final
/// engine state certifies a whole protocol run at amplitude level.
pub fn replay_ops(sv: &StateVector, ops: &[OpRecord]) -> Result<StateVector, OracleError> {
    let mut cur = sv.clone();
    for op in ops {
        match op {
            OpRecord::Fresh(q) => cur = cur.tensor_plus(q)?,
            OpRecord::Local(q, c) => cur.apply_clifford(q, *c)?,
            OpRecord::Cz(a, b) => cur.apply_cz(a, b)?,
            OpRecord::Measure(q, basis, outcome) => {
                let mb = match basis {
                    Pauli::X => MeasureBasis::X,
                    Pauli::Y => MeasureBasis::Y,
                    Pauli::Z => MeasureBasis::Z,
                };
                let (_, next) = measure_projective(&cur, q, mb, *outcome)?;
                cur = next;
            }
            OpRecord::Relabel(old, new) => {
                if cur.labels.contains(new) {
                    return Err(OracleError::LabelError(format!("duplicate qubit {new}")));
                }
                let k = cur.index_of(old)?;
                cur.labels[k] = new.clone();
            }
        }
    }
    Ok(cur)
}

pub fn expect_pauli(sv: &StateVector, p: &PauliString) -> Result<f64, OracleError> {
    let mut work = sv.clone();
    for (q, op) in &p.ops {
        if let Some(m) = op.matrix() {
            work.apply_local(q, &m)?;
        } else {
            work.index_of(q)?;
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in sv.amps.iter().zip(work.amps.iter()) {
        acc += a.conj() * b;
    }
    acc *= p.phase;
    Ok(acc.re)
}

/// Projective measurement of a Hermitian Pauli-string observable without
/// removing any qubit. Returns the probability of the requested sign
/// (0 → +1, 1 → −1) together with the renormalized post-measurement state;
/// errors when that branch has (numerically) zero weight.
pub fn measure_stabilizer(
    sv: &StateVector,
    p: &PauliString,
    outcome: u8,
) -> Result<(f64, StateVector), OracleError> {
    let mut work = sv.clone();
    for (q, op) in &p.ops {
        if let Some(m) = op.matrix() {
            work.apply_local(q, &m)?;
        } else {
            work.index_of(q)?;
        }
    }
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    let mut amps = Vec::with_capacity(sv.amps.len());
    for (a, b) in sv.amps.iter().zip(work.amps.iter()) {
        amps.push(0.5 * (a + sign * p.phase * b));
    }
    let mut post = StateVector { labels: sv.labels.clone(), amps };
    let norm = post.norm();
    let prob = norm * norm;
    if prob < 1e-12 {
        return Err(OracleError::ImpossibleOutcome(prob));
    }
    post.scale(1.0 / norm);
    Ok((prob, post))
}

fn slice_out(sv: &StateVector, k: usize, bit: usize) -> StateVector {
    let n = sv.labels.len();
    let shift = n - 1 - k;
    let mut labels = sv.labels.clone();
    labels.remove(k);
    let mut amps = Vec::with_capacity(sv.amps.len() / 2);
    for idx in 0..sv.amps.len() {
        if (idx >> shift) & 1 == bit {
            amps.push(sv.amps[idx]);
        }
    }
    StateVector { labels, amps }
}

/// Projective single-qubit measurement; the measured qubit is removed from the
/// register. Returns the Born probability of the requested outcome and the
/// normalized post-measurement state of the remaining qubits.
pub fn measure_projective(
    sv: &StateVector,
    q: &QubitId,
    basis: MeasureBasis,
    outcome: u8,
) -> Result<(f64, StateVector), OracleError> {
    let k = sv.index_of(q)?;
    let mut work = sv.clone();
    // Rotate the measured eigenbasis onto the computational one.
    match basis {
        MeasureBasis::Z => {}
        MeasureBasis::X => work.apply_clifford(q, Clifford::hadamard())?,
        MeasureBasis::Y => {
            work.apply_clifford(q, Clifford::phase_dag())?;
            work.apply_clifford(q, Clifford::hadamard())?;
        }
    }
    let mut out = slice_out(&work, k, (outcome & 1) as usize);
    let p = out.norm().powi(2);
    if p < 1e-12 {
        return Err(OracleError::ImpossibleOutcome(p));
    }
    out.scale(1.0 / p.sqrt());
    Ok((p, out))
}

/// Projective two-qubit Bell measurement; both qubits are removed. Outcome
/// bits (x, z) select the state (Z_a^x X_b^z)(|00> + |11>)/sqrt(2), matching
/// the bits produced by measuring X on `a` and Z on `b` after CNOT(a -> b).
pub fn measure_bell(
    sv: &StateVector,
    a: &QubitId,
    b: &QubitId,
    x: u8,
    z: u8,
) -> Result<(f64, StateVector), OracleError> {
    let ka = sv.index_of(a)?;
    let kb = sv.index_of(b)?;
    if ka == kb {
        return Err(OracleError::LabelError("Bell measurement needs two qubits".into()));
    }
    let n = sv.labels.len();
    let sa = n - 1 - ka;
    let sb = n - 1 - kb;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Bell amplitudes bell[qa][qb]
    let mut bell = [[Complex64::new(0.0, 0.0); 2]; 2];
    let zb = (z & 1) as usize;
    bell[0][zb] = Complex64::new(s, 0.0);
    bell[1][1 - zb] = Complex64::new(if x & 1 == 1 { -s } else { s }, 0.0);

    let mut labels = sv.labels.clone();
    let (hi, lo) = if ka < kb { (ka, kb) } else { (kb, ka) };
    labels.remove(lo);
    labels.remove(hi);
    let mut amps = vec![Complex64::new(0.0, 0.0); sv.amps.len() / 4];
    let mut pos = 0usize;
    for idx in 0..sv.amps.len() {
        if (idx >> sa) & 1 == 0 && (idx >> sb) & 1 == 0 {
            let mut acc = Complex64::new(0.0, 0.0);
            for qa in 0..2usize {
                for qb in 0..2usize {
                    let full = idx | (qa << sa) | (qb << sb);
                    acc += bell[qa][qb].conj() * sv.amps[full];
                }
            }
            amps[pos] = acc;
            pos += 1;
        }
    }
    let mut out = StateVector { labels, amps };
    let p = out.norm().powi(2);
    if p < 1e-12 {
        return Err(OracleError::ImpossibleOutcome(p));
    }
    out.scale(1.0 / p.sqrt());
    Ok((p, out))
}

pub fn equal_up_to_phase(a: &StateVector, b: &StateVector, tol: f64) -> Result<bool, OracleError> {
    if a.labels.len() != b.labels.len() {
        return Err(OracleError::LabelError("qubit counts differ".into()));
    }
    let aligned = align_like(b, &a.labels)?;
    // Align global phase at the largest amplitude of a.
    let pivot = (0..a.amps.len())
        .max_by(|&i, &j| a.amps[i].norm().partial_cmp(&a.amps[j].norm()).unwrap())
        .unwrap();
    if aligned.amps[pivot].norm() < tol {
        return Ok(false);
    }
    let phase = a.amps[pivot] / aligned.amps[pivot];
    let phase = phase / phase.norm();
    Ok(a
        .amps
        .iter()
        .zip(aligned.amps.iter())
        .all(|(x, y)| (x - phase * y).norm() <= tol))
}

/// Reorder the register of `sv` to `order` (same label set required).
pub fn align_like(sv: &StateVector, order: &[QubitId]) -> Result<StateVector, OracleError> {
    if sv.labels == order {
        return Ok(sv.clone());
    }
    let n = sv.labels.len();
    if order.len() != n {
        return Err(OracleError::LabelError("qubit counts differ".into()));
    }
    let mut perm = Vec::with_capacity(n);
    for q in order {
        perm.push(sv.index_of(q)?);
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); sv.amps.len()];
    for idx in 0..sv.amps.len() {
        // idx is in the order of `order`; build the source index.
        let mut src = 0usize;
        for (new_pos, &old_pos) in perm.iter().enumerate() {
            let bit = (idx >> (n - 1 - new_pos)) & 1;
            src |= bit << (n - 1 - old_pos);
        }
        amps[idx] = sv.amps[src];
    }
    Ok(StateVector { labels: order.to_vec(), amps })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DensityOperator {
    labels: Vec<QubitId>,
    /// Row-major dense matrix of dimension 2^n x 2^n.
    mat: Vec<Complex64>,
}

impl DensityOperator {
    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }
    pub fn dim(&self) -> usize {
        1usize << self.labels.len()
    }
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[i * self.dim() + j]
    }

    pub fn from_pure(sv: &StateVector) -> Result<Self, OracleError> {
        if sv.labels.len() > MAX_DENSITY_QUBITS {
            return Err(OracleError::CapacityExceeded(sv.labels.len(), MAX_DENSITY_QUBITS));
        }
        let d = sv.amps.len();
        let mut mat = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                mat[i * d + j] = sv.amps[i] * sv.amps[j].conj();
            }
        }
        Ok(DensityOperator { labels: sv.labels.clone(), mat })
    }

    pub fn expect_pauli(&self, p: &PauliString) -> Result<f64, OracleError> {
        // tr(rho P) with P assembled qubit by qubit.
        let n = self.labels.len();
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                // P[j][i] as a product of single-qubit entries.
                let mut entry = Complex64::new(1.0, 0.0);
                for (k, q) in self.labels.iter().enumerate() {
                    let bi = (i >> (n - 1 - k)) & 1;
                    let bj = (j >> (n - 1 - k)) & 1;
                    let op = p.ops.get(q).copied().unwrap_or(PauliOp::I);
                    let e = match op.matrix() {
                        None => {
                            if bi == bj {
                                Complex64::new(1.0, 0.0)
                            } else {
                                Complex64::new(0.0, 0.0)
                            }
                        }
                        Some(m) => m[bj * 2 + bi],
                    };
                    entry *= e;
                    if entry.norm_sqr() == 0.0 {
                        break;
                    }
                }
                acc += self.mat[i * d + j] * entry;
            }
        }
        for q in p.ops.keys() {
            if !self.labels.contains(q) {
                return Err(OracleError::LabelError(format!("unknown qubit {q}")));
            }
        }
        acc *= p.phase;
        Ok(acc.re)
    }

    pub fn approx_eq(&self, other: &DensityOperator, tol: f64) -> bool {
        self.labels == other.labels
            && self
                .mat
                .iter()
                .zip(other.mat.iter())
                .all(|(a, b)| (a - b).norm() <= tol)
    }
}

/// Trace out the given qubits, returning the reduced density operator on the
/// remaining ones.
pub fn ptrace_replace(
    sv: &StateVector,
    traced: &BTreeSet<QubitId>,
) -> Result<DensityOperator, OracleError> {
    for q in traced {
        sv.index_of(q)?;
    }
    let keep: Vec<QubitId> = sv.labels.iter().filter(|q| !traced.contains(*q)).cloned().collect();
    if keep.len() > MAX_DENSITY_QUBITS {
        return Err(OracleError::CapacityExceeded(keep.len(), MAX_DENSITY_QUBITS));
    }
    let n = sv.labels.len();
    let keep_pos: Vec<usize> = sv
        .labels
        .iter()
        .enumerate()
        .filter(|(_, q)| !traced.contains(*q))
        .map(|(k, _)| k)
        .collect();
    let traced_pos: Vec<usize> = sv
        .labels
        .iter()
        .enumerate()
        .filter(|(_, q)| traced.contains(*q))
        .map(|(k, _)| k)
        .collect();
    let dk = 1usize << keep.len();
    let dt = 1usize << traced_pos.len();
    let mut mat = vec![Complex64::new(0.0, 0.0); dk * dk];
    let assemble = |kept: usize, tr: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &k) in keep_pos.iter().enumerate() {
            let bit = (kept >> (keep_pos.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - k);
        }
        for (pos, &k) in traced_pos.iter().enumerate() {
            let bit = (tr >> (traced_pos.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - k);
        }
        idx
    };
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..dt {
                acc += sv.amps[assemble(i, t)] * sv.amps[assemble(j, t)].conj();
            }
            mat[i * dk + j] = acc;
        }
    }
    Ok(DensityOperator { labels: keep, mat })
}

/// <psi| rho |psi>: the probability that a joint measurement of all
/// stabilizers of |psi> comes out all-+1 when the copy is in state rho.
/// Labels must agree as sets; ordering is reconciled here.
pub fn fidelity(rho: &DensityOperator, psi: &StateVector) -> Result<f64, OracleError> {
    let want: BTreeSet<_> = rho.labels.iter().collect();
    let have: BTreeSet<_> = psi.labels.iter().collect();
    if want != have {
        return Err(OracleError::LabelError("fidelity: label sets differ".into()));
    }
    let aligned = align_like(psi, &rho.labels)?;
    let d = rho.labels.len();
    let dim = 1usize << d;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += aligned.amps[i].conj() * rho.mat[i * dim + j] * aligned.amps[j];
        }
    }
    Ok(acc.re)
}
