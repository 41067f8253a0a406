//! Detector error model extraction and matching-graph construction.
//!
//! Every channel is expanded into its Pauli terms (or a record flip). Each term is
//! propagated through the rest of the circuit with the frame kernel, giving the set of
//! detectors it flips and whether it flips the observable. Terms with equal symptoms are
//! merged into one mechanism.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::circuit::{build_memory_circuit, Basis, PrepState};
use crate::error::{Error, Result};
use crate::frame::{Fault, FaultOp, Frame, Program, LANES};
use crate::layout::{StabiliserKind, SurfaceCodePatch};
use crate::noise::{apply_si1000, ChannelKind, NoiseParams, NoisyCircuit};
use crate::pauli::Pauli;

/// Detectors flipped by a fault (sorted) and whether it flips the observable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symptom {
    pub detectors: Vec<u32>,
    pub flips_observable: bool,
}

impl Symptom {
    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty() && !self.flips_observable
    }

    pub fn xor(&self, other: &Symptom) -> Symptom {
        let (a, b) = (&self.detectors, &other.detectors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                out.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Symptom { detectors: out, flips_observable: self.flips_observable ^ other.flips_observable }
    }

    fn write_targets(&self, out: &mut String) {
        for d in &self.detectors {
            let _ = write!(out, " D{d}");
        }
        if self.flips_observable {
            out.push_str(" L0");
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMechanism {
    pub probability: f64,
    pub symptom: Symptom,
    /// Candidate splits into component symptoms (X part and Z part of a Pauli term).
    pub hints: Vec<Vec<Symptom>>,
}

impl ErrorMechanism {
    pub fn detectors(&self) -> &[u32] {
        &self.symptom.detectors
    }

    pub fn flips_observable(&self) -> bool {
        self.symptom.flips_observable
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorErrorModel {
    pub num_detectors: usize,
    pub detector_kinds: Vec<StabiliserKind>,
    pub mechanisms: Vec<ErrorMechanism>,
}

/// One Pauli term (or record flip) of one channel.
#[derive(Clone, Debug)]
pub struct TermFault {
    pub channel: usize,
    pub fault: Fault,
    pub probability: f64,
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// Every nonidentity term of every channel at its marginal probability.
pub fn channel_terms(noisy: &NoisyCircuit) -> Vec<TermFault> {
    let mut out = Vec::new();
    for (c, ch) in noisy.channels.iter().enumerate() {
        let at = ch.location;
        let mut push = |op: FaultOp, probability: f64| {
            out.push(TermFault { channel: c, fault: Fault { after_instruction: at, op }, probability })
        };
        match ch.kind {
            ChannelKind::Depolarize1 { qubit } => {
                for p in &PAULIS[1..] {
                    push(FaultOp::Pauli(vec![(qubit, *p)]), ch.probability / 3.0);
                }
            }
            ChannelKind::Depolarize2 { a, b } => {
                for k in 1..16 {
                    let terms: Vec<(usize, Pauli)> = [(a, PAULIS[k >> 2]), (b, PAULIS[k & 3])]
                        .into_iter()
                        .filter(|(_, p)| *p != Pauli::I)
                        .collect();
                    push(FaultOp::Pauli(terms), ch.probability / 15.0);
                }
            }
            ChannelKind::XFlip { qubit } => push(FaultOp::Pauli(vec![(qubit, Pauli::X)]), ch.probability),
            ChannelKind::MeasurementFlip { record, .. } => push(FaultOp::FlipRecord(record), ch.probability),
        }
    }
    out
}

/// Single-qubit X/Z faults and record flips: every term is a product of these.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum BasisFault {
    X(usize, usize),
    Z(usize, usize),
    Rec(usize),
}

fn split_term(pos: usize, op: &FaultOp) -> (Vec<BasisFault>, Vec<BasisFault>) {
    match op {
        FaultOp::Pauli(terms) => {
            let xs = terms.iter().filter(|(_, p)| p.has_x()).map(|&(q, _)| BasisFault::X(pos, q)).collect();
            let zs = terms.iter().filter(|(_, p)| p.has_z()).map(|&(q, _)| BasisFault::Z(pos, q)).collect();
            (xs, zs)
        }
        FaultOp::FlipRecord(r) => (vec![BasisFault::Rec(*r)], Vec::new()),
    }
}

/// Computes the symptom of every basis fault with 64-lane propagation passes.
fn basis_symptoms(program: &Program, faults: &[BasisFault]) -> Vec<Symptom> {
    let chunks: Vec<&[BasisFault]> = faults.chunks(LANES).collect();
    let per_chunk: Vec<Vec<Symptom>> = chunks
        .par_iter()
        .map_init(
            || (Frame::new(program.num_qubits, program.num_records), Vec::new()),
            |(frame, words), chunk| {
                let ops: Vec<(usize, FaultOp)> = chunk
                    .iter()
                    .map(|f| match *f {
                        BasisFault::X(pos, q) => (pos, FaultOp::Pauli(vec![(q, Pauli::X)])),
                        BasisFault::Z(pos, q) => (pos, FaultOp::Pauli(vec![(q, Pauli::Z)])),
                        // record flips act after all gates; place them at the end
                        BasisFault::Rec(r) => (program.ops.len(), FaultOp::FlipRecord(r)),
                    })
                    .collect();
                program.propagate_faults(frame, &ops);
                let obs = program.detector_words(frame, words);
                let mut out = vec![Symptom::default(); chunk.len()];
                for (d, &w) in words.iter().enumerate() {
                    let mut bits = w;
                    while bits != 0 {
                        let lane = bits.trailing_zeros() as usize;
                        out[lane].detectors.push(d as u32);
                        bits &= bits - 1;
                    }
                }
                for (lane, s) in out.iter_mut().enumerate() {
                    s.flips_observable = (obs >> lane) & 1 == 1;
                }
                out
            },
        )
        .collect();
    per_chunk.into_iter().flatten().collect()
}

/// Symptom of every channel term, in [`channel_terms`] order, together with the X-part
/// and Z-part symptoms.
pub fn term_symptoms(noisy: &NoisyCircuit) -> Result<Vec<(TermFault, Symptom, Vec<Symptom>)>> {
    let program = Program::compile(noisy)?;
    let terms = channel_terms(noisy);
    let mut basis: BTreeSet<BasisFault> = BTreeSet::new();
    let mut splits = Vec::with_capacity(terms.len());
    for t in &terms {
        let pos = program.position_after(t.fault.after_instruction);
        let (xs, zs) = split_term(pos, &t.fault.op);
        basis.extend(xs.iter().cloned());
        basis.extend(zs.iter().cloned());
        splits.push((xs, zs));
    }
    let basis: Vec<BasisFault> = basis.into_iter().collect();
    let symptoms = basis_symptoms(&program, &basis);
    let index: HashMap<&BasisFault, usize> = basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let combine = |fs: &[BasisFault]| {
        fs.iter().fold(Symptom::default(), |acc, f| acc.xor(&symptoms[index[f]]))
    };
    let mut out = Vec::with_capacity(terms.len());
    for (t, (xs, zs)) in terms.into_iter().zip(splits) {
        let xpart = combine(&xs);
        let zpart = combine(&zs);
        let full = xpart.xor(&zpart);
        let parts: Vec<Symptom> = [xpart, zpart].into_iter().filter(|s| !s.is_empty()).collect();
        out.push((t, full, parts));
    }
    Ok(out)
}

/// `p1 (1 - p2) + p2 (1 - p1)`: probability that an odd number of two independent
/// mechanisms fire.
pub fn merge_probability(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

fn merge_all(mut ps: Vec<f64>) -> f64 {
    ps.sort_by(|a, b| a.total_cmp(b));
    ps.into_iter().fold(0.0, merge_probability)
}

/// Extracts the merged detector error model.
pub fn extract_dem(noisy: &NoisyCircuit) -> Result<DetectorErrorModel> {
    let terms = term_symptoms(noisy)?;
    let mut groups: BTreeMap<Symptom, (Vec<f64>, BTreeSet<Vec<Symptom>>)> = BTreeMap::new();
    for (t, symptom, parts) in terms {
        if t.probability <= 0.0 || symptom.is_empty() {
            continue;
        }
        let entry = groups.entry(symptom).or_default();
        entry.0.push(t.probability);
        if parts.len() > 1 {
            entry.1.insert(parts);
        }
    }
    let mut mechanisms = Vec::with_capacity(groups.len());
    for (symptom, (ps, hints)) in groups {
        let probability = merge_all(ps);
        if probability >= 0.5 {
            return Err(Error::MechanismProbability { probability, symptom: format_symptom(&symptom) });
        }
        mechanisms.push(ErrorMechanism { probability, symptom, hints: hints.into_iter().collect() });
    }
    Ok(DetectorErrorModel {
        num_detectors: noisy.base.num_detectors(),
        detector_kinds: noisy.base.detectors.iter().map(|d| d.kind).collect(),
        mechanisms,
    })
}

fn format_symptom(s: &Symptom) -> String {
    let mut out = String::new();
    s.write_targets(&mut out);
    out.trim_start().to_string()
}

impl DetectorErrorModel {
    /// One line per mechanism: `error(p) D<i> D<j> [L0]`. Decomposition hints, when
    /// present, are written as components separated by `^` (their XOR is the symptom).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# detectors {}", self.num_detectors);
        let kinds: String = self.detector_kinds.iter().map(|k| if *k == StabiliserKind::X { 'X' } else { 'Z' }).collect();
        let _ = writeln!(out, "# kinds {kinds}");
        for m in &self.mechanisms {
            let _ = write!(out, "error({})", m.probability);
            match m.hints.first() {
                Some(parts) => {
                    for (i, part) in parts.iter().enumerate() {
                        if i > 0 {
                            out.push_str(" ^");
                        }
                        part.write_targets(&mut out);
                    }
                }
                None => m.symptom.write_targets(&mut out),
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut num_detectors = None;
        let mut detector_kinds = Vec::new();
        let mut mechanisms = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# detectors ") {
                num_detectors = Some(rest.trim().parse().map_err(|_| bad(ln, "detector count"))?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("# kinds ") {
                detector_kinds = rest
                    .trim()
                    .chars()
                    .map(|c| match c {
                        'X' => Ok(StabiliserKind::X),
                        'Z' => Ok(StabiliserKind::Z),
                        _ => Err(bad(ln, "detector kind")),
                    })
                    .collect::<Result<_>>()?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rest = line.strip_prefix("error(").ok_or_else(|| bad(ln, "expected error(p)"))?;
            let close = rest.find(')').ok_or_else(|| bad(ln, "unclosed probability"))?;
            let probability: f64 = rest[..close].parse().map_err(|_| bad(ln, "probability"))?;
            let mut parts = vec![Symptom::default()];
            for tok in rest[close + 1..].split_whitespace() {
                if tok == "^" {
                    parts.push(Symptom::default());
                } else if tok == "L0" {
                    parts.last_mut().unwrap().flips_observable ^= true;
                } else if let Some(d) = tok.strip_prefix('D') {
                    let d: u32 = d.parse().map_err(|_| bad(ln, "detector id"))?;
                    parts.last_mut().unwrap().detectors.push(d);
                } else {
                    return Err(bad(ln, "unknown target"));
                }
            }
            for p in &mut parts {
                p.detectors.sort_unstable();
            }
            let symptom = parts.iter().fold(Symptom::default(), |acc, p| acc.xor(p));
            let hints = if parts.len() > 1 { vec![parts] } else { Vec::new() };
            mechanisms.push(ErrorMechanism { probability, symptom, hints });
        }
        let num_detectors = num_detectors.ok_or_else(|| Error::Format("missing detector count".into()))?;
        if detector_kinds.len() != num_detectors {
            return Err(Error::Format("detector kinds do not match the detector count".into()));
        }
        Ok(DetectorErrorModel { num_detectors, detector_kinds, mechanisms })
    }
}

fn bad(line: usize, what: &str) -> Error {
    Error::Format(format!("line {}: {what}", line + 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    /// `None` for the boundary.
    pub v: Option<usize>,
    pub probability: f64,
    pub weight: f64,
    pub flips_observable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingGraph {
    pub num_detectors: usize,
    pub edges: Vec<Edge>,
    /// Edges that received contributions with different observable flags; the larger
    /// contribution wins.
    pub observable_conflicts: usize,
}

pub fn edge_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

type EdgeKey = (usize, Option<usize>);

fn edge_key(dets: &[u32]) -> Option<EdgeKey> {
    match *dets {
        [a] => Some((a as usize, None)),
        [a, b] => Some((a.min(b) as usize, Some(a.max(b) as usize))),
        _ => None,
    }
}

impl MatchingGraph {
    /// Index of the boundary node in node-numbered views of the graph.
    pub fn boundary(&self) -> usize {
        self.num_detectors
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.num_detectors);
        for e in &self.edges {
            let v = e.v.map_or("B".to_string(), |v| v.to_string());
            let _ = writeln!(out, "edge {} {} {} {} {}", e.u, v, e.probability, e.weight, u8::from(e.flips_observable));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut num_detectors = None;
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => {}
                ["nodes", n] => num_detectors = Some(n.parse().map_err(|_| bad(ln, "node count"))?),
                ["edge", u, v, p, w, o] => {
                    let u = u.parse().map_err(|_| bad(ln, "edge endpoint"))?;
                    let v = if *v == "B" { None } else { Some(v.parse().map_err(|_| bad(ln, "edge endpoint"))?) };
                    edges.push(Edge {
                        u,
                        v,
                        probability: p.parse().map_err(|_| bad(ln, "probability"))?,
                        weight: w.parse().map_err(|_| bad(ln, "weight"))?,
                        flips_observable: match *o {
                            "0" => false,
                            "1" => true,
                            _ => return Err(bad(ln, "observable flag")),
                        },
                    });
                }
                _ => return Err(bad(ln, "unrecognised line")),
            }
        }
        let num_detectors = num_detectors.ok_or_else(|| Error::Format("missing node count".into()))?;
        if edges.iter().any(|e| e.u >= num_detectors || e.v.is_some_and(|v| v >= num_detectors)) {
            return Err(Error::Format("edge endpoint out of range".into()));
        }
        Ok(MatchingGraph { num_detectors, edges, observable_conflicts: 0 })
    }
}

/// Builds the matching graph, decomposing mechanisms with more than two detectors (or
/// touching both X- and Z-type detectors) into graphlike components.
pub fn build_matching_graph(dem: &DetectorErrorModel) -> Result<MatchingGraph> {
    let kinds = &dem.detector_kinds;
    let single_kind = |s: &Symptom| s.detectors.windows(2).all(|w| kinds[w[0] as usize] == kinds[w[1] as usize]);
    let graphlike = |s: &Symptom| !s.detectors.is_empty() && s.detectors.len() <= 2 && single_kind(s);

    // Observable flags of directly graphlike mechanisms, used to resolve components.
    let mut known: HashMap<&[u32], bool> = HashMap::new();
    for m in &dem.mechanisms {
        if graphlike(&m.symptom) {
            known.entry(&m.symptom.detectors).or_insert(m.symptom.flips_observable);
        }
    }

    // (key) -> contributions per observable flag
    let mut contributions: BTreeMap<EdgeKey, [Vec<f64>; 2]> = BTreeMap::new();
    let mut add = |s: &Symptom, p: f64| {
        let key = edge_key(&s.detectors).expect("graphlike symptom");
        contributions.entry(key).or_default()[usize::from(s.flips_observable)].push(p);
    };

    for m in &dem.mechanisms {
        if m.symptom.detectors.is_empty() {
            // flips only the observable: invisible to the decoder
            continue;
        }
        if graphlike(&m.symptom) {
            add(&m.symptom, m.probability);
            continue;
        }
        if let Some(parts) = m.hints.iter().find(|parts| parts.iter().all(|p| graphlike(p))) {
            for part in parts {
                add(part, m.probability);
            }
            continue;
        }
        // split by detector type and recover the observable flags from known edges
        let (xs, zs): (Vec<u32>, Vec<u32>) =
            m.symptom.detectors.iter().partition(|&&d| kinds[d as usize] == StabiliserKind::X);
        let ok_sizes = !xs.is_empty() && !zs.is_empty() && xs.len() <= 2 && zs.len() <= 2;
        let resolved = ok_sizes
            .then(|| {
                let total = m.symptom.flips_observable;
                match (known.get(xs.as_slice()), known.get(zs.as_slice())) {
                    (Some(&ox), _) => Some((ox, total ^ ox)),
                    (None, Some(&oz)) => Some((total ^ oz, oz)),
                    (None, None) => None,
                }
            })
            .flatten();
        match resolved {
            Some((ox, oz)) => {
                add(&Symptom { detectors: xs, flips_observable: ox }, m.probability);
                add(&Symptom { detectors: zs, flips_observable: oz }, m.probability);
            }
            None => {
                return Err(Error::Decomposition(format!(
                    "error({}) {}",
                    m.probability,
                    format_symptom(&m.symptom)
                )))
            }
        }
    }

    let mut edges = Vec::with_capacity(contributions.len());
    let mut conflicts = 0;
    for ((u, v), [plain, flipped]) in contributions {
        let p0 = merge_all(plain);
        let p1 = merge_all(flipped);
        if p0 > 0.0 && p1 > 0.0 {
            conflicts += 1;
        }
        let (probability, flips_observable) = if p1 > p0 { (p1, true) } else { (p0, false) };
        if probability >= 0.5 {
            return Err(Error::MechanismProbability {
                probability,
                symptom: format!("edge {u}-{}", v.map_or("B".into(), |v| v.to_string())),
            });
        }
        edges.push(Edge { u, v, probability, weight: edge_weight(probability), flips_observable });
    }
    Ok(MatchingGraph { num_detectors: dem.num_detectors, edges, observable_conflicts: conflicts })
}

/// Matching graph of the companion circuit that prepares the `+1` eigenstate of
/// `measure_basis`. Shots measured in that basis are decoded with it whatever state
/// they started from.
pub fn dem_for_measurement(
    patch: &SurfaceCodePatch,
    measure_basis: Basis,
    rounds_factor: usize,
    params: &NoiseParams,
) -> Result<MatchingGraph> {
    let circuit = build_memory_circuit(patch, PrepState::eigenstate(measure_basis), measure_basis, rounds_factor)?;
    let noisy = apply_si1000(&circuit, params)?;
    build_matching_graph(&extract_dem(&noisy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_memory_circuit, Instruction};
    use crate::layout::build_patch;
    use crate::noise::{Channel, NoiseCategory};

    fn circuit(d: usize, prep: PrepState, basis: Basis) -> crate::circuit::MemoryCircuit {
        build_memory_circuit(&build_patch(d).unwrap(), prep, basis, 3).unwrap()
    }

    #[test]
    fn zero_noise_is_empty() {
        let n = apply_si1000(&circuit(3, PrepState::ZERO, Basis::Z), &NoiseParams::uniform(0.0)).unwrap();
        assert!(extract_dem(&n).unwrap().mechanisms.is_empty());
    }

    #[test]
    fn single_x_flip_channel() {
        let c = circuit(3, PrepState::ZERO, Basis::Z);
        // after the measure/reset layer closing round 2, on the centre data qubit
        let tick = c
            .instructions
            .iter()
            .enumerate()
            .filter(|(i, ins)| matches!(ins, Instruction::Tick) && matches!(c.instructions[i - 1], Instruction::ResetZ(_)))
            .nth(3)
            .unwrap()
            .0;
        let mut noisy = NoisyCircuit::noiseless(c);
        noisy.channels.push(Channel {
            location: tick,
            kind: ChannelKind::XFlip { qubit: 4 },
            category: NoiseCategory::Reset,
            probability: 0.01,
        });
        let dem = extract_dem(&noisy).unwrap();
        assert_eq!(dem.mechanisms.len(), 1);
        assert_eq!(dem.mechanisms[0].probability, 0.01);
        assert_eq!(dem.mechanisms[0].detectors().len(), 2);
    }

    #[test]
    fn merge_rule() {
        assert!((merge_probability(0.1, 0.2) - 0.26).abs() < 1e-15);
        assert_eq!(merge_probability(0.0, 0.3), 0.3);
    }

    #[test]
    fn edge_weight_formula() {
        assert!((edge_weight(0.01) - 99f64.ln()).abs() < 1e-12);
        assert!((edge_weight(0.01) - 4.59512).abs() < 1e-5);
    }

    #[test]
    fn graph_edges_and_boundary() {
        let dem = DetectorErrorModel {
            num_detectors: 8,
            detector_kinds: vec![StabiliserKind::Z; 8],
            mechanisms: vec![
                ErrorMechanism {
                    probability: 0.01,
                    symptom: Symptom { detectors: vec![3, 7], flips_observable: false },
                    hints: vec![],
                },
                ErrorMechanism {
                    probability: 0.02,
                    symptom: Symptom { detectors: vec![3], flips_observable: true },
                    hints: vec![],
                },
            ],
        };
        let g = build_matching_graph(&dem).unwrap();
        assert_eq!(g.edges.len(), 2);
        let e = g.edges.iter().find(|e| e.v == Some(7)).unwrap();
        assert_eq!(e.u, 3);
        assert!((e.weight - 99f64.ln()).abs() < 1e-12);
        let b = g.edges.iter().find(|e| e.v.is_none()).unwrap();
        assert!(b.flips_observable);
    }

    #[test]
    fn undecomposable_is_reported() {
        let dem = DetectorErrorModel {
            num_detectors: 4,
            detector_kinds: vec![StabiliserKind::Z; 4],
            mechanisms: vec![ErrorMechanism {
                probability: 0.01,
                symptom: Symptom { detectors: vec![0, 1, 2], flips_observable: false },
                hints: vec![],
            }],
        };
        assert!(matches!(build_matching_graph(&dem), Err(Error::Decomposition(_))));
    }

    #[test]
    fn y_terms_decompose_into_existing_edges() {
        let n = apply_si1000(&circuit(3, PrepState::ZERO, Basis::Z), &NoiseParams::uniform(0.001)).unwrap();
        let dem = extract_dem(&n).unwrap();
        let graphlike: BTreeSet<Vec<u32>> = dem
            .mechanisms
            .iter()
            .filter(|m| m.detectors().len() <= 2)
            .map(|m| m.detectors().to_vec())
            .collect();
        let mut checked = 0;
        for m in dem.mechanisms.iter().filter(|m| m.detectors().len() == 4) {
            let parts = &m.hints[0];
            let xor = parts.iter().fold(Symptom::default(), |a, p| a.xor(p));
            assert_eq!(xor, m.symptom);
            for p in parts {
                assert!(graphlike.contains(&p.detectors));
            }
            checked += 1;
        }
        assert!(checked > 0);
        build_matching_graph(&dem).unwrap();
    }

    #[test]
    fn merge_is_order_independent() {
        let n = apply_si1000(&circuit(3, PrepState::ZERO, Basis::Z), &NoiseParams::uniform(0.002)).unwrap();
        let mut rev = n.clone();
        rev.channels.reverse();
        assert_eq!(extract_dem(&n).unwrap(), extract_dem(&rev).unwrap());
    }

    #[test]
    fn text_roundtrips() {
        let n = apply_si1000(&circuit(3, PrepState::PLUS, Basis::X), &NoiseParams::uniform(0.002)).unwrap();
        let dem = extract_dem(&n).unwrap();
        let back = DetectorErrorModel::from_text(&dem.to_text()).unwrap();
        assert_eq!(back.mechanisms.len(), dem.mechanisms.len());
        for (a, b) in dem.mechanisms.iter().zip(&back.mechanisms) {
            assert_eq!(a.symptom, b.symptom);
            assert_eq!(a.probability, b.probability);
        }
        let g = build_matching_graph(&dem).unwrap();
        let g2 = MatchingGraph::from_text(&g.to_text()).unwrap();
        assert_eq!(g.edges, g2.edges);
    }

    #[test]
    fn weights_consistent_and_positive() {
        for basis in Basis::ALL {
            let g = dem_for_measurement(&build_patch(3).unwrap(), basis, 3, &NoiseParams::uniform(0.003)).unwrap();
            for e in &g.edges {
                assert!(e.weight > 0.0);
                assert!((e.weight - ((1.0 - e.probability) / e.probability).ln()).abs() < 1e-12);
            }
        }
    }
}
