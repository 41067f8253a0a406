//! Bit-parallel Pauli-frame propagation.
//!
//! A frame holds one X bit and one Z bit per qubit for each of 64 lanes packed in a
//! `u64`. Lanes are independent shots when sampling, or independent injected faults
//! when extracting the detector error model. Recorded measurement bits are flips
//! relative to the noiseless reference run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{Basis, Instruction, MemoryCircuit};
use crate::error::{Error, Result};
use crate::noise::{ChannelKind, NoiseCategory, NoisyCircuit};
use crate::pauli::Pauli;
use crate::shots::ShotBatch;

pub const LANES: usize = 64;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    /// Gauge-randomise by the prepared state's stabiliser generator `gen`.
    Prep(usize),
    Reset(usize),
    H(usize),
    Cx(usize, usize),
    MeasZ { q: usize, rec: usize },
    MeasX { q: usize, rec: usize },
    MeasPauli { product: usize, rec: usize },
    Noise(usize),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct SparsePauli {
    pub x: Vec<usize>,
    pub z: Vec<usize>,
}

impl SparsePauli {
    fn from_terms(terms: &[(usize, Pauli)]) -> Self {
        let mut out = SparsePauli::default();
        for &(q, p) in terms {
            if p.has_x() {
                out.x.push(q);
            }
            if p.has_z() {
                out.z.push(q);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Stream {
    p_max: f64,
    ln_keep: f64,
}

/// A single fault applied to every lane it is enabled for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultOp {
    Pauli(Vec<(usize, Pauli)>),
    FlipRecord(usize),
}

/// Fault placed right after instruction `after_instruction` executes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fault {
    pub after_instruction: usize,
    pub op: FaultOp,
}

/// The noisy circuit compiled into a flat op list.
#[derive(Clone, Debug)]
pub struct Program {
    pub(crate) ops: Vec<Op>,
    /// `ops` position just after instruction `i` (before its noise ops).
    pub(crate) instruction_end: Vec<usize>,
    pub(crate) prep_gens: Vec<SparsePauli>,
    pub(crate) products: Vec<SparsePauli>,
    pub(crate) num_qubits: usize,
    pub(crate) num_records: usize,
    pub(crate) detectors: Vec<Vec<usize>>,
    pub(crate) observable: Vec<usize>,
    channels: Vec<(ChannelKind, f64, usize, usize)>,
    streams: Vec<Stream>,
}

fn stream_index(cat: NoiseCategory) -> usize {
    NoiseCategory::ALL.iter().position(|c| *c == cat).unwrap()
}

impl Program {
    pub fn compile(noisy: &NoisyCircuit) -> Result<Program> {
        let circuit = &noisy.base;
        let mut noise_at: Vec<Vec<usize>> = vec![Vec::new(); circuit.instructions.len()];
        for (i, ch) in noisy.channels.iter().enumerate() {
            if ch.location >= circuit.instructions.len() {
                return Err(Error::Circuit(format!("channel {i} located past the end of the circuit")));
            }
            noise_at[ch.location].push(i);
        }

        let mut p_max = [0.0f64; 6];
        let mut ordinals = [0usize; 6];
        let mut channels = Vec::with_capacity(noisy.channels.len());
        for ch in &noisy.channels {
            let s = stream_index(ch.category);
            p_max[s] = p_max[s].max(ch.probability);
            channels.push((ch.kind, ch.probability, s, ordinals[s]));
            ordinals[s] += 1;
        }
        let streams = p_max
            .iter()
            .map(|&p| Stream { p_max: p, ln_keep: (1.0 - p).ln() })
            .collect();

        let mut ops = Vec::new();
        let mut instruction_end = Vec::with_capacity(circuit.instructions.len());
        let mut prep_gens = Vec::new();
        let mut products = Vec::new();
        let mut rec = 0usize;
        for (idx, ins) in circuit.instructions.iter().enumerate() {
            match ins {
                Instruction::PrepProject { generators, .. } => {
                    for g in generators {
                        ops.push(Op::Prep(prep_gens.len()));
                        prep_gens.push(SparsePauli::from_terms(g.terms()));
                    }
                }
                Instruction::ResetZ(q) => ops.push(Op::Reset(*q)),
                Instruction::H(q) => ops.push(Op::H(*q)),
                Instruction::Cx(c, t) => ops.push(Op::Cx(*c, *t)),
                Instruction::MeasureZ(q) => {
                    ops.push(Op::MeasZ { q: *q, rec });
                    rec += 1;
                }
                Instruction::MeasureTransversal { basis, qubits } => {
                    for &q in qubits {
                        match basis {
                            Basis::Z => ops.push(Op::MeasZ { q, rec }),
                            Basis::X => ops.push(Op::MeasX { q, rec }),
                            Basis::Y => {
                                return Err(Error::Circuit("transversal Y measurement is not supported".into()))
                            }
                        }
                        rec += 1;
                    }
                }
                Instruction::MeasurePauli(p) => {
                    ops.push(Op::MeasPauli { product: products.len(), rec });
                    products.push(SparsePauli::from_terms(p.terms()));
                    rec += 1;
                }
                Instruction::Tick => {}
            }
            instruction_end.push(ops.len());
            for &c in &noise_at[idx] {
                ops.push(Op::Noise(c));
            }
        }
        if rec != circuit.num_measurements {
            return Err(Error::Circuit(format!(
                "circuit declares {} measurements but produces {rec}",
                circuit.num_measurements
            )));
        }
        Ok(Program {
            ops,
            instruction_end,
            prep_gens,
            products,
            num_qubits: circuit.num_qubits,
            num_records: rec,
            detectors: circuit.detectors.iter().map(|d| d.measurements.clone()).collect(),
            observable: circuit.observable.measurements.clone(),
            channels,
            streams,
        })
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
    pub rec: Vec<u64>,
}

impl Frame {
    pub fn new(num_qubits: usize, num_records: usize) -> Self {
        Frame { x: vec![0; num_qubits], z: vec![0; num_qubits], rec: vec![0; num_records] }
    }

    fn clear(&mut self) {
        self.x.fill(0);
        self.z.fill(0);
        self.rec.fill(0);
    }

    fn apply_pauli(&mut self, q: usize, p: Pauli, lanes: u64) {
        if p.has_x() {
            self.x[q] ^= lanes;
        }
        if p.has_z() {
            self.z[q] ^= lanes;
        }
    }

    fn apply_fault(&mut self, op: &FaultOp, lanes: u64) {
        match op {
            FaultOp::Pauli(terms) => {
                for &(q, p) in terms {
                    self.apply_pauli(q, p, lanes);
                }
            }
            FaultOp::FlipRecord(r) => self.rec[*r] ^= lanes,
        }
    }
}

const PAULI_BY_INDEX: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

impl Program {
    /// Executes one op. `rng` is `Some` when sampling (gauge randomisation on) and
    /// `None` for deterministic fault propagation.
    #[inline]
    fn step(&self, op: &Op, f: &mut Frame, rng: Option<&mut ChaCha8Rng>) {
        match *op {
            Op::Prep(g) => {
                if let Some(rng) = rng {
                    let r: u64 = rng.random();
                    let gen = &self.prep_gens[g];
                    for &q in &gen.x {
                        f.x[q] ^= r;
                    }
                    for &q in &gen.z {
                        f.z[q] ^= r;
                    }
                }
            }
            Op::Reset(q) => {
                f.x[q] = 0;
                f.z[q] = rng.map_or(0, |r| r.random());
            }
            Op::H(q) => std::mem::swap(&mut f.x[q], &mut f.z[q]),
            Op::Cx(c, t) => {
                f.x[t] ^= f.x[c];
                f.z[c] ^= f.z[t];
            }
            Op::MeasZ { q, rec } => {
                f.rec[rec] ^= f.x[q];
                if let Some(rng) = rng {
                    f.z[q] ^= rng.random::<u64>();
                }
            }
            Op::MeasX { q, rec } => {
                f.rec[rec] ^= f.z[q];
                if let Some(rng) = rng {
                    f.x[q] ^= rng.random::<u64>();
                }
            }
            Op::MeasPauli { product, rec } => {
                let p = &self.products[product];
                let mut flip = 0u64;
                for &q in &p.x {
                    flip ^= f.z[q];
                }
                for &q in &p.z {
                    flip ^= f.x[q];
                }
                f.rec[rec] ^= flip;
                if let Some(rng) = rng {
                    let r: u64 = rng.random();
                    for &q in &p.x {
                        f.x[q] ^= r;
                    }
                    for &q in &p.z {
                        f.z[q] ^= r;
                    }
                }
            }
            Op::Noise(_) => {}
        }
    }

    fn apply_channel(&self, c: usize, lane: usize, f: &mut Frame, rng: &mut ChaCha8Rng) {
        let bit = 1u64 << lane;
        match self.channels[c].0 {
            ChannelKind::Depolarize1 { qubit } => {
                let k = rng.random_range(1..4usize);
                f.apply_pauli(qubit, PAULI_BY_INDEX[k], bit);
            }
            ChannelKind::Depolarize2 { a, b } => {
                let k = rng.random_range(1..16usize);
                f.apply_pauli(a, PAULI_BY_INDEX[k >> 2], bit);
                f.apply_pauli(b, PAULI_BY_INDEX[k & 3], bit);
            }
            ChannelKind::XFlip { qubit } => f.x[qubit] ^= bit,
            ChannelKind::MeasurementFlip { record, .. } => f.rec[record] ^= bit,
        }
    }

    /// Block RNG: stream `block` of the ChaCha8 generator keyed by `seed`.
    pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        rng
    }

    fn geometric(rng: &mut ChaCha8Rng, s: &Stream) -> u64 {
        if s.p_max <= 0.0 {
            return u64::MAX;
        }
        if s.p_max >= 1.0 {
            return 0;
        }
        let u = 1.0 - rng.random::<f64>();
        let k = (u.ln() / s.ln_keep).floor();
        if k >= 1e18 {
            u64::MAX / 2
        } else {
            k as u64
        }
    }

    /// Samples 64 shots into `f`. When `noise` is false only gauge randomisation runs.
    pub(crate) fn run_block(&self, f: &mut Frame, rng: &mut ChaCha8Rng, noise: bool, fault: Option<&(usize, FaultOp)>) {
        f.clear();
        let mut next = [u64::MAX; 6];
        if noise {
            for (s, stream) in self.streams.iter().enumerate() {
                next[s] = Self::geometric(rng, stream);
            }
        }
        for (pos, op) in self.ops.iter().enumerate() {
            if let Some((at, fop)) = fault {
                if *at == pos {
                    f.apply_fault(fop, u64::MAX);
                }
            }
            if let Op::Noise(c) = *op {
                if !noise {
                    continue;
                }
                let (_, prob, s, ordinal) = self.channels[c];
                let base = (ordinal as u64) * LANES as u64;
                let end = base + LANES as u64;
                while next[s] < end {
                    let lane = (next[s] - base) as usize;
                    let stream = self.streams[s];
                    let accept = prob >= stream.p_max || rng.random::<f64>() * stream.p_max < prob;
                    if accept {
                        self.apply_channel(c, lane, f, rng);
                    }
                    next[s] = next[s].saturating_add(1).saturating_add(Self::geometric(rng, &stream));
                }
            } else {
                self.step(op, f, Some(rng));
            }
        }
        if let Some((at, fop)) = fault {
            if *at == self.ops.len() {
                f.apply_fault(fop, u64::MAX);
            }
        }
    }

    /// Deterministically propagates up to 64 faults, lane `i` carrying `faults[i]`.
    /// Positions are `ops` indices; a fault is applied before the op at its position.
    pub(crate) fn propagate_faults(&self, f: &mut Frame, faults: &[(usize, FaultOp)]) {
        debug_assert!(faults.len() <= LANES);
        f.clear();
        let mut order: Vec<usize> = (0..faults.len()).collect();
        order.sort_by_key(|&i| faults[i].0);
        let start = order.first().map_or(self.ops.len(), |&i| faults[i].0);
        let mut k = 0;
        for pos in start..self.ops.len() {
            while k < order.len() && faults[order[k]].0 == pos {
                let i = order[k];
                f.apply_fault(&faults[i].1, 1u64 << i);
                k += 1;
            }
            self.step(&self.ops[pos], f, None);
        }
        while k < order.len() {
            let i = order[k];
            f.apply_fault(&faults[i].1, 1u64 << i);
            k += 1;
        }
    }

    pub(crate) fn detector_words(&self, f: &Frame, out: &mut Vec<u64>) -> u64 {
        out.clear();
        out.extend(self.detectors.iter().map(|ms| ms.iter().fold(0u64, |acc, &m| acc ^ f.rec[m])));
        self.observable.iter().fold(0u64, |acc, &m| acc ^ f.rec[m])
    }

    pub(crate) fn position_after(&self, instruction: usize) -> usize {
        self.instruction_end[instruction]
    }
}

/// Sampled detection events for one 64-shot block, one word per detector.
#[derive(Clone, Debug, Default)]
pub struct Block {
    pub detectors: Vec<u64>,
    pub observable: u64,
}

impl Block {
    /// Flagged detector ids for every lane, appended to `out[lane]`.
    pub fn flagged_per_lane(&self, out: &mut [Vec<u32>]) {
        for v in out.iter_mut() {
            v.clear();
        }
        for (d, &w) in self.detectors.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let lane = bits.trailing_zeros() as usize;
                if lane < out.len() {
                    out[lane].push(d as u32);
                }
                bits &= bits - 1;
            }
        }
    }
}

/// Shot sampler over a compiled noisy circuit.
pub struct FrameSampler {
    program: Program,
}

impl FrameSampler {
    /// Compiles the circuit and checks that every detector is deterministic in the
    /// noiseless circuit.
    pub fn new(noisy: &NoisyCircuit) -> Result<Self> {
        let program = Program::compile(noisy)?;
        let sampler = FrameSampler { program };
        if let Some(d) = sampler.nondeterministic_detector() {
            return Err(Error::Circuit(format!("detector D{d} is not deterministic under zero noise")));
        }
        Ok(sampler)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn num_detectors(&self) -> usize {
        self.program.num_detectors()
    }

    fn nondeterministic_detector(&self) -> Option<usize> {
        let mut f = Frame::new(self.program.num_qubits, self.program.num_records);
        let mut rng = Program::block_rng(0x5eed_da7a, 0);
        self.program.run_block(&mut f, &mut rng, false, None);
        let mut words = Vec::new();
        self.program.detector_words(&f, &mut words);
        words.iter().position(|&w| w != 0)
    }

    /// Samples block `block` (shots `64*block .. 64*block+64`) of the run keyed by `seed`.
    pub fn sample_block(&self, seed: u64, block: u64, out: &mut Block) {
        let mut f = Frame::new(self.program.num_qubits, self.program.num_records);
        self.sample_block_with(&mut f, seed, block, out);
    }

    pub(crate) fn sample_block_with(&self, f: &mut Frame, seed: u64, block: u64, out: &mut Block) {
        let mut rng = Program::block_rng(seed, block);
        self.program.run_block(f, &mut rng, true, None);
        out.observable = self.program.detector_words(f, &mut out.detectors);
    }

    /// Runs one noiseless block with a single fault injected in every lane.
    pub fn sample_with_fault(&self, fault: &Fault, seed: u64) -> Block {
        let mut f = Frame::new(self.program.num_qubits, self.program.num_records);
        let mut rng = Program::block_rng(seed, 0);
        let pos = self.program.position_after(fault.after_instruction);
        self.program.run_block(&mut f, &mut rng, false, Some(&(pos, fault.op.clone())));
        let mut out = Block::default();
        out.observable = self.program.detector_words(&f, &mut out.detectors);
        out
    }

    /// Samples `n_shots` shots. Shot `i` belongs to block `i / 64`, whose random
    /// stream depends only on `(seed, i / 64)`, so results do not depend on how blocks
    /// are spread over threads.
    pub fn sample(&self, n_shots: usize, seed: u64) -> ShotBatch {
        let n_det = self.num_detectors();
        let n_blocks = n_shots.div_ceil(LANES);
        let blocks: Vec<Block> = (0..n_blocks as u64)
            .into_par_iter()
            .map_init(
                || Frame::new(self.program.num_qubits, self.program.num_records),
                |f, b| {
                    let mut out = Block::default();
                    self.sample_block_with(f, seed, b, &mut out);
                    out
                },
            )
            .collect();
        let mut batch = ShotBatch::zeros(n_shots, n_det, seed);
        for (b, block) in blocks.iter().enumerate() {
            let base = b * LANES;
            for (d, &w) in block.detectors.iter().enumerate() {
                let mut bits = w;
                while bits != 0 {
                    let lane = bits.trailing_zeros() as usize;
                    if base + lane < n_shots {
                        batch.set_detector(base + lane, d, true);
                    }
                    bits &= bits - 1;
                }
            }
            let mut bits = block.observable;
            while bits != 0 {
                let lane = bits.trailing_zeros() as usize;
                if base + lane < n_shots {
                    batch.set_observable(base + lane, true);
                }
                bits &= bits - 1;
            }
        }
        batch
    }
}

/// Samples detector and observable flips for `n_shots` shots.
pub fn sample_shots(circuit: &NoisyCircuit, n_shots: usize, seed: u64) -> Result<ShotBatch> {
    Ok(FrameSampler::new(circuit)?.sample(n_shots, seed))
}

/// Frame-based determinism check (gauge randomisation only): every detector must be
/// unaffected by the stabiliser-group randomisation.
pub fn frame_deterministic(circuit: &MemoryCircuit) -> Result<bool> {
    let noisy = NoisyCircuit::noiseless(circuit.clone());
    let program = Program::compile(&noisy)?;
    let sampler = FrameSampler { program };
    Ok(sampler.nondeterministic_detector().is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_memory_circuit, PrepState};
    use crate::layout::{build_patch, StabiliserKind};
    use crate::noise::{apply_si1000, NoiseParams};

    fn noisy(d: usize, prep: PrepState, basis: Basis, p: f64) -> NoisyCircuit {
        let c = build_memory_circuit(&build_patch(d).unwrap(), prep, basis, 3).unwrap();
        apply_si1000(&c, &NoiseParams::uniform(p)).unwrap()
    }

    #[test]
    fn zero_noise_gives_zero_detectors() {
        for basis in Basis::ALL {
            let n = noisy(3, PrepState::eigenstate(basis), basis, 0.0);
            let batch = sample_shots(&n, 500, 1).unwrap();
            assert_eq!(batch.count_detection_events(), 0);
            assert_eq!(batch.count_observable_flips(), 0);
        }
    }

    #[test]
    fn scaled_to_zero_is_silent() {
        let n = noisy(3, PrepState::ZERO, Basis::Z, 0.01).scaled(0.0);
        let batch = sample_shots(&n, 640, 3).unwrap();
        assert_eq!(batch.count_detection_events(), 0);
    }

    #[test]
    fn cross_basis_observable_is_random() {
        let n = noisy(3, PrepState::ZERO, Basis::X, 0.0);
        let batch = sample_shots(&n, 20_000, 9).unwrap();
        assert_eq!(batch.count_detection_events(), 0);
        let frac = batch.count_observable_flips() as f64 / 20_000.0;
        // sigma = 0.0035
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn same_seed_same_shots() {
        let n = noisy(3, PrepState::ZERO, Basis::Z, 0.01);
        let a = sample_shots(&n, 1000, 5).unwrap();
        let b = sample_shots(&n, 1000, 5).unwrap();
        assert_eq!(a, b);
        let c = sample_shots(&n, 1000, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_property() {
        // the first 128 shots do not depend on how many shots are requested
        let n = noisy(3, PrepState::ZERO, Basis::Z, 0.01);
        let a = sample_shots(&n, 128, 11).unwrap();
        let b = sample_shots(&n, 1000, 11).unwrap();
        for s in 0..128 {
            assert_eq!(a.detector_row(s), b.detector_row(s));
            assert_eq!(a.observable(s), b.observable(s));
        }
    }

    #[test]
    fn single_bulk_x_error_fires_two_z_detector_pairs() {
        // d=3, Z memory. Data qubit 4 is the centre (1,1), inside two Z plaquettes.
        let patch = build_patch(3).unwrap();
        let c = build_memory_circuit(&patch, PrepState::ZERO, Basis::Z, 3).unwrap();
        let sampler = FrameSampler::new(&NoisyCircuit::noiseless(c.clone())).unwrap();
        // inject right after the measure/reset layer closing round 3
        let closing_ticks: Vec<usize> = c
            .instructions
            .iter()
            .enumerate()
            .filter(|(i, ins)| {
                matches!(ins, Instruction::Tick)
                    && matches!(c.instructions[i - 1], Instruction::MeasureZ(_) | Instruction::ResetZ(_))
            })
            .map(|(i, _)| i)
            .collect();
        // closing_ticks[0] is the initial reset layer; [k] closes round k-1
        let fault = Fault { after_instruction: closing_ticks[4], op: FaultOp::Pauli(vec![(4, Pauli::X)]) };
        let block = sampler.sample_with_fault(&fault, 0);
        let fired: Vec<usize> = block
            .detectors
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0)
            .map(|(d, &w)| {
                assert_eq!(w, u64::MAX);
                d
            })
            .collect();
        let z_plaquettes: Vec<usize> = patch
            .stabilisers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == StabiliserKind::Z && s.support().contains(&4))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(z_plaquettes.len(), 2);
        // the error sits between round 3 and round 4: round-4 detectors (comparing 3 and 4)
        let mut expected: Vec<usize> = c
            .detectors
            .iter()
            .enumerate()
            .filter(|(_, d)| d.round == 4 && z_plaquettes.contains(&d.stabiliser))
            .map(|(i, _)| i)
            .collect();
        expected.sort();
        assert_eq!(fired, expected);
        assert_eq!(block.observable, 0);
    }

    #[test]
    fn uncorrected_logical_flips_observable() {
        let patch = build_patch(3).unwrap();
        let c = build_memory_circuit(&patch, PrepState::ZERO, Basis::Z, 1).unwrap();
        let sampler = FrameSampler::new(&NoisyCircuit::noiseless(c.clone())).unwrap();
        let last_tick = c.instructions.len() - 2;
        assert!(matches!(c.instructions[last_tick], Instruction::Tick));
        let xl = patch.logical_x.iter().map(|&q| (q, Pauli::X)).collect();
        let block = sampler.sample_with_fault(&Fault { after_instruction: last_tick, op: FaultOp::Pauli(xl) }, 0);
        assert_eq!(block.observable, u64::MAX);
        assert!(block.detectors.iter().all(|&w| w == 0));
    }

    #[test]
    fn detection_rate_grows_with_p() {
        let lo = sample_shots(&noisy(3, PrepState::ZERO, Basis::Z, 0.001), 2000, 1).unwrap();
        let hi = sample_shots(&noisy(3, PrepState::ZERO, Basis::Z, 0.01), 2000, 1).unwrap();
        assert!(hi.count_detection_events() > 3 * lo.count_detection_events());
    }
}
