//! Dense stabiliser-tableau simulation (destabiliser/stabiliser rows with sign bits).
//!
//! This is the reference simulator: it tracks the full state, including the projective
//! preparation, and records actual measurement outcomes rather than flips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Basis, Instruction, MemoryCircuit};
use crate::error::{Error, Result};
use crate::noise::{ChannelKind, NoisyCircuit};
use crate::pauli::{Pauli, PauliProduct};
use crate::shots::ShotBatch;

/// Default qubit bound for [`tableau_simulate`].
pub const DEFAULT_MAX_QUBITS: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Row {
    x: Vec<u64>,
    z: Vec<u64>,
    sign: bool,
}

impl Row {
    fn zero(words: usize) -> Self {
        Row { x: vec![0; words], z: vec![0; words], sign: false }
    }

    fn from_product(p: &PauliProduct, words: usize) -> Self {
        let mut row = Row::zero(words);
        for &(q, pauli) in p.terms() {
            if pauli.has_x() {
                row.x[q / 64] |= 1 << (q % 64);
            }
            if pauli.has_z() {
                row.z[q / 64] |= 1 << (q % 64);
            }
        }
        row.sign = p.negative;
        row
    }

    fn anticommutes(&self, other: &Row) -> bool {
        let mut acc = 0u32;
        for w in 0..self.x.len() {
            acc ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones();
        }
        acc & 1 == 1
    }

    /// `self <- self * other`, returning the power of `i` picked up (mod 4).
    fn mul_assign(&mut self, other: &Row) -> u32 {
        let mut cnt1 = 0u64;
        let mut cnt2 = 0u64;
        let mut total = 0u32;
        for w in 0..self.x.len() {
            let (x1, z1) = (self.x[w], self.z[w]);
            let (x2, z2) = (other.x[w], other.z[w]);
            let nx = x1 ^ x2;
            let nz = z1 ^ z2;
            self.x[w] = nx;
            self.z[w] = nz;
            let x1z2 = x1 & z2;
            let anti = (x2 & z1) ^ x1z2;
            cnt2 ^= (cnt1 ^ nx ^ nz ^ x1z2) & anti;
            cnt1 ^= anti;
            total += cnt1.count_ones() + 2 * cnt2.count_ones();
            cnt1 = 0;
            cnt2 = 0;
        }
        let phase = total & 3;
        self.sign ^= other.sign ^ (phase == 2);
        phase
    }
}

/// Stabiliser state of `n` qubits: rows `0..n` destabilisers, `n..2n` stabilisers.
#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    words: usize,
    rows: Vec<Row>,
}

impl Tableau {
    /// `|0…0⟩`.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut rows = Vec::with_capacity(2 * n);
        for q in 0..n {
            let mut r = Row::zero(words);
            r.x[q / 64] |= 1 << (q % 64);
            rows.push(r);
        }
        for q in 0..n {
            let mut r = Row::zero(words);
            r.z[q / 64] |= 1 << (q % 64);
            rows.push(r);
        }
        Tableau { n, words, rows }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn bit(v: &[u64], q: usize) -> bool {
        (v[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn h(&mut self, q: usize) {
        let (w, m) = (q / 64, 1u64 << (q % 64));
        for r in &mut self.rows {
            let x = r.x[w] & m;
            let z = r.z[w] & m;
            if x != 0 && z != 0 {
                r.sign ^= true;
            }
            r.x[w] = (r.x[w] & !m) | z;
            r.z[w] = (r.z[w] & !m) | x;
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        for r in &mut self.rows {
            let xc = Self::bit(&r.x, c);
            let zc = Self::bit(&r.z, c);
            let xt = Self::bit(&r.x, t);
            let zt = Self::bit(&r.z, t);
            if xc && zt && (xt == zc) {
                r.sign ^= true;
            }
            if xc {
                r.x[t / 64] ^= 1 << (t % 64);
            }
            if zt {
                r.z[c / 64] ^= 1 << (c % 64);
            }
        }
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        for r in &mut self.rows {
            let flip = (p.has_x() && Self::bit(&r.z, q)) ^ (p.has_z() && Self::bit(&r.x, q));
            r.sign ^= flip;
        }
    }

    pub fn apply_product(&mut self, p: &PauliProduct) {
        for &(q, pauli) in p.terms() {
            self.apply_pauli(q, pauli);
        }
    }

    /// Measures the Hermitian product `p`. Returns `(outcome, was_random)`, where
    /// `outcome` is true for eigenvalue −1 of the signed product. A random outcome is
    /// taken from `forced` when given, otherwise from `rng`.
    pub fn measure(&mut self, p: &PauliProduct, forced: Option<bool>, rng: &mut impl Rng) -> (bool, bool) {
        let target = Row::from_product(p, self.words);
        let n = self.n;
        let pivot = (n..2 * n).find(|&i| self.rows[i].anticommutes(&target));
        match pivot {
            Some(pv) => {
                for i in 0..2 * n {
                    if i != pv && self.rows[i].anticommutes(&target) {
                        let src = self.rows[pv].clone();
                        self.rows[i].mul_assign(&src);
                    }
                }
                let outcome = forced.unwrap_or_else(|| rng.random());
                self.rows[pv - n] = self.rows[pv].clone();
                let mut new_row = target;
                new_row.sign = p.negative ^ outcome;
                self.rows[pv] = new_row;
                (outcome, true)
            }
            None => {
                let mut acc = Row::zero(self.words);
                for i in 0..n {
                    if self.rows[i].anticommutes(&target) {
                        let src = self.rows[i + n].clone();
                        acc.mul_assign(&src);
                    }
                }
                debug_assert_eq!(acc.x, target.x);
                debug_assert_eq!(acc.z, target.z);
                (acc.sign ^ p.negative, false)
            }
        }
    }

    pub fn measure_z(&mut self, q: usize, rng: &mut impl Rng) -> bool {
        self.measure(&PauliProduct::new([(q, Pauli::Z)]), None, rng).0
    }

    pub fn reset_z(&mut self, q: usize, rng: &mut impl Rng) {
        if self.measure_z(q, rng) {
            self.apply_pauli(q, Pauli::X);
        }
    }

    /// Expectation of `p` if deterministic (`Some(±1)`), otherwise `None`.
    pub fn peek(&self, p: &PauliProduct) -> Option<f64> {
        let target = Row::from_product(p, self.words);
        let n = self.n;
        if (n..2 * n).any(|i| self.rows[i].anticommutes(&target)) {
            return None;
        }
        let mut acc = Row::zero(self.words);
        for i in 0..n {
            if self.rows[i].anticommutes(&target) {
                acc.mul_assign(&self.rows[i + n]);
            }
        }
        Some(if acc.sign ^ p.negative { -1.0 } else { 1.0 })
    }
}

/// For each generator `g_k`, a Pauli anticommuting with `g_k` and commuting with every
/// other generator. Generators must be independent and pairwise commuting.
pub fn dual_paulis(generators: &[PauliProduct], n: usize) -> Result<Vec<PauliProduct>> {
    let m = generators.len();
    // Unknown C = (cx[0..n], cz[0..n]); row j of the system reads
    // sum_q z_j[q] cx[q] + x_j[q] cz[q] = rhs_j.
    let cols = 2 * n;
    let mut a: Vec<Vec<bool>> = generators
        .iter()
        .map(|g| {
            let mut row = vec![false; cols + m];
            for &(q, p) in g.terms() {
                if p.has_z() {
                    row[q] = true;
                }
                if p.has_x() {
                    row[n + q] = true;
                }
            }
            row
        })
        .collect();
    for (j, row) in a.iter_mut().enumerate() {
        row[cols + j] = true;
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m {
            break;
        }
        let Some(pr) = (r..m).find(|&i| a[i][c]) else { continue };
        a.swap(r, pr);
        for i in 0..m {
            if i != r && a[i][c] {
                let (src, dst) = if i < r {
                    let (lo, hi) = a.split_at_mut(r);
                    (&hi[0], &mut lo[i])
                } else {
                    let (lo, hi) = a.split_at_mut(i);
                    (&lo[r], &mut hi[0])
                };
                for k in 0..cols + m {
                    dst[k] ^= src[k];
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if r < m {
        return Err(Error::Circuit("preparation generators are not independent".into()));
    }
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        // after reduction, row i = sum of original rows with augmented bits set; solution
        // for rhs e_k sets pivot variable i to (augmented bit k of row i)
        let mut cx = vec![false; n];
        let mut cz = vec![false; n];
        for (i, &c) in pivots.iter().enumerate() {
            if a[i][cols + k] {
                if c < n {
                    cx[c] = true;
                } else {
                    cz[c - n] = true;
                }
            }
        }
        out.push(PauliProduct::new((0..n).map(|q| (q, Pauli::from_bits(cx[q], cz[q])))));
    }
    Ok(out)
}

/// Runs the noiseless-prep circuit with noise channels sampled per shot.
struct TableauRunner<'a> {
    noisy: &'a NoisyCircuit,
    noise_at: Vec<Vec<usize>>,
    duals: Vec<Option<Vec<PauliProduct>>>,
}

impl<'a> TableauRunner<'a> {
    fn new(noisy: &'a NoisyCircuit) -> Result<Self> {
        let circuit = &noisy.base;
        let mut noise_at = vec![Vec::new(); circuit.instructions.len()];
        for (i, ch) in noisy.channels.iter().enumerate() {
            noise_at[ch.location].push(i);
        }
        let mut duals = Vec::new();
        for ins in &circuit.instructions {
            duals.push(match ins {
                Instruction::PrepProject { generators, canonicalize: true } => {
                    Some(dual_paulis(generators, circuit.num_qubits)?)
                }
                _ => None,
            });
        }
        Ok(TableauRunner { noisy, noise_at, duals })
    }

    /// Raw measurement record for one shot.
    fn run(&self, rng: &mut ChaCha8Rng) -> Vec<bool> {
        let circuit = &self.noisy.base;
        let mut t = Tableau::new(circuit.num_qubits);
        let mut rec = Vec::with_capacity(circuit.num_measurements);
        for (i, ins) in circuit.instructions.iter().enumerate() {
            match ins {
                Instruction::PrepProject { generators, canonicalize } => {
                    let mut wrong = Vec::new();
                    for (k, g) in generators.iter().enumerate() {
                        let forced = canonicalize.then_some(false);
                        let (outcome, _) = t.measure(g, forced, rng);
                        if outcome {
                            wrong.push(k);
                        }
                    }
                    if let Some(duals) = &self.duals[i] {
                        for k in wrong {
                            t.apply_product(&duals[k]);
                        }
                    }
                }
                Instruction::ResetZ(q) => t.reset_z(*q, rng),
                Instruction::H(q) => t.h(*q),
                Instruction::Cx(c, tq) => t.cx(*c, *tq),
                Instruction::MeasureZ(q) => rec.push(t.measure_z(*q, rng)),
                Instruction::MeasureTransversal { basis, qubits } => {
                    for &q in qubits {
                        let p = match basis {
                            Basis::X => Pauli::X,
                            Basis::Y => Pauli::Y,
                            Basis::Z => Pauli::Z,
                        };
                        rec.push(t.measure(&PauliProduct::new([(q, p)]), None, rng).0);
                    }
                }
                Instruction::MeasurePauli(p) => rec.push(t.measure(p, None, rng).0),
                Instruction::Tick => {}
            }
            for &c in &self.noise_at[i] {
                let ch = &self.noisy.channels[c];
                if ch.probability <= 0.0 || rng.random::<f64>() >= ch.probability {
                    continue;
                }
                match ch.kind {
                    ChannelKind::Depolarize1 { qubit } => {
                        let k = rng.random_range(1..4u8);
                        t.apply_pauli(qubit, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k as usize]);
                    }
                    ChannelKind::Depolarize2 { a, b } => {
                        let k = rng.random_range(1..16usize);
                        let ps = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
                        t.apply_pauli(a, ps[k >> 2]);
                        t.apply_pauli(b, ps[k & 3]);
                    }
                    ChannelKind::XFlip { qubit } => t.apply_pauli(qubit, Pauli::X),
                    ChannelKind::MeasurementFlip { record, .. } => rec[record] ^= true,
                }
            }
        }
        rec
    }
}

/// Raw detector parities and observable parity of one measurement record.
fn evaluate(circuit: &MemoryCircuit, rec: &[bool]) -> (Vec<bool>, bool) {
    let dets = circuit
        .detectors
        .iter()
        .map(|d| d.measurements.iter().fold(false, |acc, &m| acc ^ rec[m]))
        .collect();
    let obs = circuit.observable.measurements.iter().fold(false, |acc, &m| acc ^ rec[m]);
    (dets, obs)
}

/// Reference simulation of `n_shots` shots with the full tableau. Observable bits are
/// reported relative to the noiseless reference outcome, as in the frame sampler.
pub fn tableau_simulate(circuit: &NoisyCircuit, n_shots: usize, seed: u64) -> Result<ShotBatch> {
    tableau_simulate_bounded(circuit, n_shots, seed, DEFAULT_MAX_QUBITS)
}

pub fn tableau_simulate_bounded(
    circuit: &NoisyCircuit,
    n_shots: usize,
    seed: u64,
    max_qubits: usize,
) -> Result<ShotBatch> {
    let base = &circuit.base;
    if base.num_qubits > max_qubits {
        return Err(Error::TooManyQubits { qubits: base.num_qubits, limit: max_qubits });
    }
    let runner = TableauRunner::new(circuit)?;
    let reference = base.reference_observable().unwrap_or(false);
    let mut batch = ShotBatch::zeros(n_shots, base.num_detectors(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x7ab1e);
    for s in 0..n_shots {
        let rec = runner.run(&mut rng);
        let (dets, obs) = evaluate(base, &rec);
        for (d, &v) in dets.iter().enumerate() {
            if v {
                batch.set_detector(s, d, true);
            }
        }
        batch.set_observable(s, obs ^ reference);
    }
    Ok(batch)
}

/// True iff `shots` noiseless tableau runs give zero on every detector and, for
/// same-basis circuits, the reference observable value.
pub fn validate_determinism_with(circuit: &MemoryCircuit, shots: usize, seed: u64) -> bool {
    let noisy = NoisyCircuit::noiseless(circuit.clone());
    let Ok(runner) = TableauRunner::new(&noisy) else { return false };
    let reference = circuit.reference_observable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..shots {
        let rec = runner.run(&mut rng);
        let (dets, obs) = evaluate(circuit, &rec);
        if dets.iter().any(|&b| b) {
            return false;
        }
        if let Some(r) = reference {
            if obs != r {
                return false;
            }
        }
    }
    true
}

pub fn validate_determinism(circuit: &MemoryCircuit) -> bool {
    validate_determinism_with(circuit, 16, 0xd37e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_memory_circuit, build_memory_circuit_with, PrepState};
    use crate::layout::build_patch;

    #[test]
    fn bell_pair_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut t = Tableau::new(2);
            t.h(0);
            t.cx(0, 1);
            assert_eq!(t.peek(&PauliProduct::uniform([0, 1], Pauli::X)), Some(1.0));
            assert_eq!(t.peek(&PauliProduct::uniform([0, 1], Pauli::Z)), Some(1.0));
            assert_eq!(t.peek(&PauliProduct::uniform([0, 1], Pauli::Y)), Some(-1.0));
            let a = t.measure_z(0, &mut rng);
            let b = t.measure_z(1, &mut rng);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn y_eigenstate() {
        // S-free preparation of |+i>: measure Y with forced +1
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = Tableau::new(1);
        let y = PauliProduct::new([(0, Pauli::Y)]);
        let (o, random) = t.measure(&y, Some(false), &mut rng);
        assert!(random && !o);
        assert_eq!(t.peek(&y), Some(1.0));
        t.h(0);
        // H Y H = -Y
        assert_eq!(t.peek(&y), Some(-1.0));
        assert_eq!(t.peek(&PauliProduct::new([(0, Pauli::X)])), None);
    }

    #[test]
    fn duals_are_dual() {
        let p = build_patch(3).unwrap();
        let mut gens: Vec<PauliProduct> = p.stabilisers.iter().map(|s| s.as_product()).collect();
        gens.push(p.logical_y_product());
        let duals = dual_paulis(&gens, p.num_data()).unwrap();
        for (k, dk) in duals.iter().enumerate() {
            for (j, g) in gens.iter().enumerate() {
                assert_eq!(!dk.commutes_with(g), j == k);
            }
        }
    }

    #[test]
    fn all_basis_pairs_are_deterministic() {
        let patch = build_patch(3).unwrap();
        for prep in PrepState::ALL {
            for basis in Basis::ALL {
                let c = build_memory_circuit(&patch, prep, basis, 1).unwrap();
                assert!(validate_determinism(&c), "{prep} {basis}");
            }
        }
    }

    #[test]
    fn uncanonicalised_prep_is_not_deterministic() {
        let patch = build_patch(3).unwrap();
        let c = build_memory_circuit_with(&patch, PrepState::ZERO, Basis::Z, 1, false).unwrap();
        assert!(!validate_determinism(&c));
    }

    #[test]
    fn corrupted_detector_is_caught() {
        let patch = build_patch(3).unwrap();
        let mut c = build_memory_circuit(&patch, PrepState::PLUS, Basis::X, 1).unwrap();
        // a single data-qubit X outcome is random on its own
        let last = c.num_measurements - 1;
        c.detectors[0].measurements = vec![last];
        assert!(!validate_determinism(&c));
    }

    #[test]
    fn resource_guard() {
        let patch = build_patch(9).unwrap();
        let c = build_memory_circuit(&patch, PrepState::ZERO, Basis::Z, 1).unwrap();
        let err = tableau_simulate(&NoisyCircuit::noiseless(c), 1, 0).unwrap_err();
        assert!(matches!(err, Error::TooManyQubits { qubits: 161, limit: 128 }));
    }

    #[test]
    fn y_memory_d5_noiseless() {
        let patch = build_patch(5).unwrap();
        let c = build_memory_circuit(&patch, PrepState::PLUS_I, Basis::Y, 3).unwrap();
        assert_eq!(c.rounds, 15);
        let batch = tableau_simulate(&NoisyCircuit::noiseless(c), 4, 3).unwrap();
        assert_eq!(batch.count_detection_events(), 0);
        assert_eq!(batch.count_observable_flips(), 0);
    }
}
