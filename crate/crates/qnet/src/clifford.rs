//! The single-qubit Clifford group (24 elements up to global phase).
//!
//! Byproduct frames on graph-state vertices live in this group: local
//! complementation produces square roots of Paulis, so plain Pauli tracking
//! would be lossy. All group tables (products, adjoints, Pauli conjugation,
//! local-complementation decompositions) are generated at startup from 2x2
//! matrices rather than transcribed by hand.

use num_complex::Complex64;
use once_cell::sync::Lazy;

pub const GROUP_SIZE: usize = 24;

/// 2x2 complex matrix, row major.
pub type Mat2 = [Complex64; 4];

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat2 {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }
}

/// One step of a vertex-operator reduction: which vertex gets locally
/// complemented to strip a generator off the frame.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LcMove {
    /// Local complementation at the vertex carrying the frame.
    AtVertex,
    /// Local complementation at one of its neighbours.
    AtNeighbour,
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn mat_adj(a: &Mat2) -> Mat2 {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

/// Normalize global phase: first entry of magnitude > 0.3 becomes positive real.
fn canonical(m: &Mat2) -> Mat2 {
    let pivot = m.iter().find(|c| c.norm() > 0.3).expect("zero matrix");
    let phase = pivot / pivot.norm();
    let mut out = *m;
    for c in out.iter_mut() {
        *c /= phase;
    }
    out
}

fn key(m: &Mat2) -> [i64; 8] {
    let c = canonical(m);
    let mut k = [0i64; 8];
    for (j, e) in c.iter().enumerate() {
        k[2 * j] = (e.re * 1e6).round() as i64;
        k[2 * j + 1] = (e.im * 1e6).round() as i64;
    }
    k
}

pub struct Tables {
    pub mats: Vec<Mat2>,
    pub mul: [[u8; GROUP_SIZE]; GROUP_SIZE],
    pub adj: [u8; GROUP_SIZE],
    pub diag: [bool; GROUP_SIZE],
    /// conj[c][p]: C† P C = sign * Q, stored as (Q, sign).
    pub conj: [[(Pauli, i8); 3]; GROUP_SIZE],
    pub decomp: Vec<Vec<LcMove>>,
    lookup: std::collections::HashMap<[i64; 8], u8>,
    pub id: u8,
    pub h: u8,
    pub s: u8,
    pub sdag: u8,
    pub x: u8,
    pub y: u8,
    pub z: u8,
    /// exp(+i pi/4 X): right factor picked up by the complemented vertex.
    pub lc_vertex: u8,
    /// exp(-i pi/4 Z): right factor picked up by each neighbour.
    pub lc_neighbour: u8,
}

fn h_mat() -> Mat2 {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [s, s, s, -s]
}

fn s_mat() -> Mat2 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
    ]
}

fn id_mat() -> Mat2 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ]
}

/// exp(i t P) = cos(t) I + i sin(t) P
fn exp_i(p: Pauli, t: f64) -> Mat2 {
    let idm = id_mat();
    let pm = p.matrix();
    let c = Complex64::new(t.cos(), 0.0);
    let is = Complex64::new(0.0, t.sin());
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for j in 0..4 {
        out[j] = c * idm[j] + is * pm[j];
    }
    out
}

fn build() -> Tables {
    use std::collections::HashMap;
    // Closure of {H, S} under multiplication gives all 24 elements.
    let mut mats: Vec<Mat2> = vec![canonical(&id_mat())];
    let mut lookup: HashMap<[i64; 8], u8> = HashMap::new();
    lookup.insert(key(&id_mat()), 0);
    let gens = [h_mat(), s_mat()];
    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        let cur = mats[idx];
        for g in &gens {
            let prod = canonical(&mat_mul(g, &cur));
            let k = key(&prod);
            if !lookup.contains_key(&k) {
                let new_idx = mats.len() as u8;
                lookup.insert(k, new_idx);
                mats.push(prod);
                frontier.push(new_idx as usize);
            }
        }
    }
    assert_eq!(mats.len(), GROUP_SIZE, "single-qubit Clifford closure");

    let find = |m: &Mat2| -> u8 { *lookup.get(&key(m)).expect("element not in group") };

    let mut mul = [[0u8; GROUP_SIZE]; GROUP_SIZE];
    for a in 0..GROUP_SIZE {
        for b in 0..GROUP_SIZE {
            mul[a][b] = find(&mat_mul(&mats[a], &mats[b]));
        }
    }
    let mut adj = [0u8; GROUP_SIZE];
    let mut diag = [false; GROUP_SIZE];
    let mut conj = [[(Pauli::X, 1i8); 3]; GROUP_SIZE];
    for a in 0..GROUP_SIZE {
        adj[a] = find(&mat_adj(&mats[a]));
        diag[a] = mats[a][1].norm() < 1e-9 && mats[a][2].norm() < 1e-9;
        for (pi, p) in [Pauli::X, Pauli::Y, Pauli::Z].iter().enumerate() {
            let m = mat_mul(&mat_mul(&mat_adj(&mats[a]), &p.matrix()), &mats[a]);
            let mut found = None;
            'search: for q in [Pauli::X, Pauli::Y, Pauli::Z] {
                for sign in [1i8, -1] {
                    let qm = q.matrix();
                    let dev = (0..4)
                        .map(|j| (m[j] - qm[j] * Complex64::new(sign as f64, 0.0)).norm())
                        .fold(0.0f64, f64::max);
                    if dev < 1e-9 {
                        found = Some((q, sign));
                        break 'search;
                    }
                }
            }
            conj[a][pi] = found.expect("Clifford conjugation must map Pauli to signed Pauli");
        }
    }

    let lc_vertex = find(&exp_i(Pauli::X, std::f64::consts::FRAC_PI_4));
    let lc_neighbour = find(&exp_i(Pauli::Z, -std::f64::consts::FRAC_PI_4));

    // Shortest right-multiplication word over the two LC generators that lands
    // the frame in the diagonal subgroup.
    let mut decomp: Vec<Option<Vec<LcMove>>> = vec![None; GROUP_SIZE];
    let mut queue = std::collections::VecDeque::new();
    for a in 0..GROUP_SIZE {
        if diag[a] {
            decomp[a] = Some(vec![]);
            queue.push_back(a);
        }
    }
    // Reverse BFS: from each solved element e, any v with v*g = e gets word [g-move, e-word].
    while let Some(e) = queue.pop_front() {
        for (g, mv) in [(lc_vertex, LcMove::AtVertex), (lc_neighbour, LcMove::AtNeighbour)] {
            for v in 0..GROUP_SIZE {
                if mul[v][g as usize] as usize == e && decomp[v].is_none() {
                    let mut word = vec![mv];
                    word.extend(decomp[e].as_ref().unwrap().iter().copied());
                    decomp[v] = Some(word);
                    queue.push_back(v);
                }
            }
        }
    }
    let decomp: Vec<Vec<LcMove>> = decomp
        .into_iter()
        .map(|w| w.expect("every frame reducible by local complementations"))
        .collect();

    let sdag = find(&mat_adj(&s_mat()));
    Tables {
        id: find(&id_mat()),
        h: find(&h_mat()),
        s: find(&s_mat()),
        sdag,
        x: find(&Pauli::X.matrix()),
        y: find(&Pauli::Y.matrix()),
        z: find(&Pauli::Z.matrix()),
        lc_vertex,
        lc_neighbour,
        mats,
        mul,
        adj,
        diag,
        conj,
        decomp,
        lookup,
    }
}

pub static TABLES: Lazy<Tables> = Lazy::new(build);

/// exp(+-i pi/4 P) as a group element (square roots of the Paulis).
pub fn exp_i_clifford(p: Pauli, positive: bool) -> Clifford {
    let t = if positive {
        std::f64::consts::FRAC_PI_4
    } else {
        -std::f64::consts::FRAC_PI_4
    };
    Clifford::from_matrix(&exp_i(p, t)).expect("Pauli square roots are Clifford")
}

/// One of the 24 single-qubit Cliffords, identified up to global phase.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct Clifford(pub u8);

impl Default for Clifford {
    fn default() -> Self {
        Clifford(TABLES.id)
    }
}

impl Clifford {
    pub fn identity() -> Self {
        Clifford(TABLES.id)
    }
    pub fn hadamard() -> Self {
        Clifford(TABLES.h)
    }
    pub fn phase() -> Self {
        Clifford(TABLES.s)
    }
    pub fn phase_dag() -> Self {
        Clifford(TABLES.sdag)
    }
    pub fn pauli(p: Pauli) -> Self {
        match p {
            Pauli::X => Clifford(TABLES.x),
            Pauli::Y => Clifford(TABLES.y),
            Pauli::Z => Clifford(TABLES.z),
        }
    }
    pub fn lc_vertex() -> Self {
        Clifford(TABLES.lc_vertex)
    }
    pub fn lc_neighbour() -> Self {
        Clifford(TABLES.lc_neighbour)
    }
    pub fn from_matrix(m: &Mat2) -> Option<Self> {
        TABLES.lookup.get(&key(m)).map(|&i| Clifford(i))
    }

    pub fn then(self, later: Clifford) -> Clifford {
        // later * self as matrices
        Clifford(TABLES.mul[later.0 as usize][self.0 as usize])
    }
    pub fn compose_right(self, earlier: Clifford) -> Clifford {
        Clifford(TABLES.mul[self.0 as usize][earlier.0 as usize])
    }
    pub fn adjoint(self) -> Clifford {
        Clifford(TABLES.adj[self.0 as usize])
    }
    pub fn is_diagonal(self) -> bool {
        TABLES.diag[self.0 as usize]
    }
    pub fn is_identity(self) -> bool {
        self.0 == TABLES.id
    }
    /// C† P C as a signed Pauli.
    pub fn conjugate_pauli(self, p: Pauli) -> (Pauli, i8) {
        let pi = match p {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        };
        TABLES.conj[self.0 as usize][pi]
    }
    pub fn matrix(self) -> Mat2 {
        TABLES.mats[self.0 as usize]
    }
    pub fn reduction_word(self) -> &'static [LcMove] {
        &TABLES.decomp[self.0 as usize]
    }
}
