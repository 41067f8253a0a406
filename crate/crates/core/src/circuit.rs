//! Memory-experiment circuits with detectors and a logical observable.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{StabiliserKind, SurfaceCodePatch};
use crate::pauli::PauliProduct;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::Z => "Z",
        };
        f.write_str(s)
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "X" => Ok(Basis::X),
            "Y" => Ok(Basis::Y),
            "Z" => Ok(Basis::Z),
            other => Err(Error::InvalidParameter(format!("unknown basis `{other}`"))),
        }
    }
}

/// One of the six single-qubit stabiliser states, prepared on the logical qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrepState {
    pub basis: Basis,
    pub negative: bool,
}

impl PrepState {
    pub const ZERO: PrepState = PrepState { basis: Basis::Z, negative: false };
    pub const ONE: PrepState = PrepState { basis: Basis::Z, negative: true };
    pub const PLUS: PrepState = PrepState { basis: Basis::X, negative: false };
    pub const MINUS: PrepState = PrepState { basis: Basis::X, negative: true };
    pub const PLUS_I: PrepState = PrepState { basis: Basis::Y, negative: false };
    pub const MINUS_I: PrepState = PrepState { basis: Basis::Y, negative: true };

    /// Ordered as |0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩.
    pub const ALL: [PrepState; 6] =
        [Self::ZERO, Self::ONE, Self::PLUS, Self::MINUS, Self::PLUS_I, Self::MINUS_I];

    pub fn eigenstate(basis: Basis) -> PrepState {
        PrepState { basis, negative: false }
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
    pub fn bloch(self) -> [f64; 3] {
        let s = if self.negative { -1.0 } else { 1.0 };
        match self.basis {
            Basis::X => [s, 0.0, 0.0],
            Basis::Y => [0.0, s, 0.0],
            Basis::Z => [0.0, 0.0, s],
        }
    }

    pub fn label(self) -> &'static str {
        match (self.basis, self.negative) {
            (Basis::Z, false) => "Z+",
            (Basis::Z, true) => "Z-",
            (Basis::X, false) => "X+",
            (Basis::X, true) => "X-",
            (Basis::Y, false) => "Y+",
            (Basis::Y, true) => "Y-",
        }
    }
}

impl fmt::Display for PrepState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrepState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let found = match t {
            "0" | "Z+" | "|0>" => PrepState::ZERO,
            "1" | "Z-" | "|1>" => PrepState::ONE,
            "+" | "X+" | "|+>" => PrepState::PLUS,
            "-" | "X-" | "|->" => PrepState::MINUS,
            "+i" | "Y+" | "|+i>" => PrepState::PLUS_I,
            "-i" | "Y-" | "|-i>" => PrepState::MINUS_I,
            other => return Err(Error::InvalidParameter(format!("unknown stabiliser state `{other}`"))),
        };
        Ok(found)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    /// Noiseless projection of `|0…0⟩` onto the joint eigenspace of the generators. Each
    /// generator's sign is the requested eigenvalue; with `canonicalize` unset, randomly
    /// projected signs are left as measured.
    PrepProject { generators: Vec<PauliProduct>, canonicalize: bool },
    ResetZ(usize),
    H(usize),
    Cx(usize, usize),
    MeasureZ(usize),
    /// Noiseless single-qubit measurement of every listed qubit in `basis` (X or Z).
    MeasureTransversal { basis: Basis, qubits: Vec<usize> },
    /// Noiseless measurement of a Pauli product.
    MeasurePauli(PauliProduct),
    /// Layer boundary. Idle noise attaches here.
    Tick,
}

impl Instruction {
    pub fn num_measurements(&self) -> usize {
        match self {
            Instruction::MeasureZ(_) | Instruction::MeasurePauli(_) => 1,
            Instruction::MeasureTransversal { qubits, .. } => qubits.len(),
            _ => 0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(
            self,
            Instruction::PrepProject { .. }
                | Instruction::MeasureTransversal { .. }
                | Instruction::MeasurePauli(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorDef {
    pub measurements: Vec<usize>,
    pub kind: StabiliserKind,
    pub stabiliser: usize,
    /// Syndrome round; the final data-measurement comparison uses `rounds`.
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableDef {
    pub measurements: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MemoryCircuit {
    pub distance: usize,
    pub num_qubits: usize,
    pub num_data: usize,
    pub instructions: Vec<Instruction>,
    pub rounds: usize,
    pub prep: PrepState,
    pub measure_basis: Basis,
    pub detectors: Vec<DetectorDef>,
    pub observable: ObservableDef,
    pub num_measurements: usize,
}

impl MemoryCircuit {
    /// Noiseless observable parity when it is deterministic (same-basis experiments).
    pub fn reference_observable(&self) -> Option<bool> {
        (self.prep.basis == self.measure_basis).then_some(self.prep.negative)
    }

    /// Sign relating the observable flip rate to the expectation value: `-1` for the
    /// `−` eigenstates measured in their own basis, `+1` otherwise.
    pub fn noiseless_sign(&self) -> f64 {
        match self.reference_observable() {
            Some(true) => -1.0,
            _ => 1.0,
        }
    }

    /// Noiseless expectation value of the measured logical observable.
    pub fn noiseless_expectation(&self) -> f64 {
        let bloch = self.prep.bloch();
        match self.measure_basis {
            Basis::X => bloch[0],
            Basis::Y => bloch[1],
            Basis::Z => bloch[2],
        }
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Line-oriented text form: one instruction per line, followed by detector and
    /// observable annotations referencing absolute measurement-record indices.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# memory d={} rounds={} prep={} measure={}",
            self.distance, self.rounds, self.prep, self.measure_basis
        );
        for ins in &self.instructions {
            match ins {
                Instruction::PrepProject { generators, canonicalize } => {
                    let gens: Vec<String> = generators.iter().map(|g| g.to_string()).collect();
                    let _ = writeln!(out, "PREP canon={} {}", u8::from(*canonicalize), gens.join(" "));
                }
                Instruction::ResetZ(q) => {
                    let _ = writeln!(out, "R {q}");
                }
                Instruction::H(q) => {
                    let _ = writeln!(out, "H {q}");
                }
                Instruction::Cx(c, t) => {
                    let _ = writeln!(out, "CX {c} {t}");
                }
                Instruction::MeasureZ(q) => {
                    let _ = writeln!(out, "M {q}");
                }
                Instruction::MeasureTransversal { basis, qubits } => {
                    let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                    let _ = writeln!(out, "M{basis} {}", qs.join(" "));
                }
                Instruction::MeasurePauli(p) => {
                    let _ = writeln!(out, "MPP {p}");
                }
                Instruction::Tick => {
                    let _ = writeln!(out, "TICK");
                }
            }
        }
        for (i, det) in self.detectors.iter().enumerate() {
            let recs: Vec<String> = det.measurements.iter().map(|m| format!("rec[{m}]")).collect();
            let _ = writeln!(
                out,
                "DETECTOR D{i} {:?} s={} t={} {}",
                det.kind,
                det.stabiliser,
                det.round,
                recs.join(" ")
            );
        }
        let recs: Vec<String> =
            self.observable.measurements.iter().map(|m| format!("rec[{m}]")).collect();
        let _ = writeln!(out, "OBSERVABLE L0 {}", recs.join(" "));
        out
    }
}

fn logical_product(patch: &SurfaceCodePatch, basis: Basis) -> PauliProduct {
    match basis {
        Basis::X => patch.logical_x_product(),
        Basis::Y => patch.logical_y_product(),
        Basis::Z => patch.logical_z_product(),
    }
}

/// Builds the noiseless skeleton of a memory experiment: projective preparation,
/// `rounds_factor * d` syndrome-extraction rounds and a noiseless logical measurement.
pub fn build_memory_circuit(
    patch: &SurfaceCodePatch,
    prep: PrepState,
    measure_basis: Basis,
    rounds_factor: usize,
) -> Result<MemoryCircuit> {
    build_memory_circuit_with(patch, prep, measure_basis, rounds_factor, true)
}

/// As [`build_memory_circuit`], optionally leaving the projected preparation signs
/// uncanonicalised (then first-round detectors are not deterministic).
pub fn build_memory_circuit_with(
    patch: &SurfaceCodePatch,
    prep: PrepState,
    measure_basis: Basis,
    rounds_factor: usize,
    canonicalize: bool,
) -> Result<MemoryCircuit> {
    if rounds_factor == 0 {
        return Err(Error::InvalidParameter("rounds_factor must be at least 1".into()));
    }
    let d = patch.distance;
    let rounds = rounds_factor * d;
    let n_data = patch.num_data();
    let n_stab = patch.stabilisers.len();
    let ancillas: Vec<usize> = (0..n_stab).map(|s| patch.ancilla_qubit(s)).collect();
    let x_ancillas: Vec<usize> = patch
        .stabilisers
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == StabiliserKind::X)
        .map(|(i, _)| patch.ancilla_qubit(i))
        .collect();

    let mut ins = Vec::new();

    let mut generators: Vec<PauliProduct> =
        patch.stabilisers.iter().map(|s| s.as_product()).collect();
    let logical = logical_product(patch, prep.basis);
    generators.push(if prep.negative { logical.negated() } else { logical });
    ins.push(Instruction::PrepProject { generators, canonicalize });
    ins.push(Instruction::Tick);

    for &a in &ancillas {
        ins.push(Instruction::ResetZ(a));
    }
    ins.push(Instruction::Tick);

    for r in 0..rounds {
        for &a in &x_ancillas {
            ins.push(Instruction::H(a));
        }
        ins.push(Instruction::Tick);
        for layer in 0..4 {
            for (s, stab) in patch.stabilisers.iter().enumerate() {
                if let Some(q) = stab.schedule()[layer] {
                    let a = patch.ancilla_qubit(s);
                    match stab.kind {
                        StabiliserKind::X => ins.push(Instruction::Cx(a, q)),
                        StabiliserKind::Z => ins.push(Instruction::Cx(q, a)),
                    }
                }
            }
            ins.push(Instruction::Tick);
        }
        for &a in &x_ancillas {
            ins.push(Instruction::H(a));
        }
        ins.push(Instruction::Tick);
        for &a in &ancillas {
            ins.push(Instruction::MeasureZ(a));
        }
        if r + 1 < rounds {
            for &a in &ancillas {
                ins.push(Instruction::ResetZ(a));
            }
        }
        ins.push(Instruction::Tick);
    }

    let meas = |r: usize, s: usize| r * n_stab + s;
    let final_start = rounds * n_stab;
    let mut detectors = Vec::new();
    for r in 0..rounds {
        for (s, stab) in patch.stabilisers.iter().enumerate() {
            let measurements = if r == 0 { vec![meas(0, s)] } else { vec![meas(r - 1, s), meas(r, s)] };
            detectors.push(DetectorDef { measurements, kind: stab.kind, stabiliser: s, round: r });
        }
    }

    let observable;
    let num_measurements;
    match measure_basis {
        Basis::X | Basis::Z => {
            let data: Vec<usize> = (0..n_data).collect();
            ins.push(Instruction::MeasureTransversal { basis: measure_basis, qubits: data });
            num_measurements = final_start + n_data;
            let kind = if measure_basis == Basis::X { StabiliserKind::X } else { StabiliserKind::Z };
            for (s, stab) in patch.stabilisers.iter().enumerate() {
                if stab.kind != kind {
                    continue;
                }
                let mut measurements = vec![meas(rounds - 1, s)];
                measurements.extend(stab.support().into_iter().map(|q| final_start + q));
                detectors.push(DetectorDef { measurements, kind, stabiliser: s, round: rounds });
            }
            let chain = if measure_basis == Basis::X { &patch.logical_x } else { &patch.logical_z };
            observable = ObservableDef { measurements: chain.iter().map(|q| final_start + q).collect() };
        }
        Basis::Y => {
            for stab in &patch.stabilisers {
                ins.push(Instruction::MeasurePauli(stab.as_product()));
            }
            ins.push(Instruction::MeasurePauli(patch.logical_y_product()));
            num_measurements = final_start + n_stab + 1;
            for (s, stab) in patch.stabilisers.iter().enumerate() {
                detectors.push(DetectorDef {
                    measurements: vec![meas(rounds - 1, s), final_start + s],
                    kind: stab.kind,
                    stabiliser: s,
                    round: rounds,
                });
            }
            observable = ObservableDef { measurements: vec![final_start + n_stab] };
        }
    }

    Ok(MemoryCircuit {
        distance: d,
        num_qubits: patch.num_qubits(),
        num_data: n_data,
        instructions: ins,
        rounds,
        prep,
        measure_basis,
        detectors,
        observable,
        num_measurements,
    })
}
