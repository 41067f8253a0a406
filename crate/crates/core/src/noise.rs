//! SI1000 circuit-level Pauli noise with optional spatial inhomogeneity.
//!
//! Channel categories and probabilities, for base rate `p`:
//!
//! | category                         | channel       | probability |
//! |----------------------------------|---------------|-------------|
//! | after each CX                    | depolarize2   | `p`         |
//! | after each single-qubit gate     | depolarize1   | `p/10`      |
//! | idle qubit during a gate layer   | depolarize1   | `p/10`      |
//! | after each reset                 | X flip        | `2p`        |
//! | ancilla measurement result       | classical flip| `5p`        |
//! | idle qubit during measure/reset  | depolarize1   | `2p`        |

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{Instruction, MemoryCircuit};
use crate::error::{Error, Result};

/// Largest probability any single channel may carry.
pub const MAX_CHANNEL_PROBABILITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: f64,
    #[serde(default)]
    pub inhomogeneity_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseParams {
    pub fn uniform(p: f64) -> Self {
        NoiseParams { p, inhomogeneity_sigma: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.p) || self.p.is_nan() {
            return Err(Error::InvalidParameter(format!("p = {} is outside [0, 0.5]", self.p)));
        }
        if !(self.inhomogeneity_sigma >= 0.0) || !self.inhomogeneity_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inhomogeneity_sigma = {} must be finite and nonnegative",
                self.inhomogeneity_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseCategory {
    TwoQubitGate,
    SingleQubitGate,
    GateIdle,
    Reset,
    Measurement,
    MeasureIdle,
}

impl NoiseCategory {
    pub const ALL: [NoiseCategory; 6] = [
        NoiseCategory::TwoQubitGate,
        NoiseCategory::SingleQubitGate,
        NoiseCategory::GateIdle,
        NoiseCategory::Reset,
        NoiseCategory::Measurement,
        NoiseCategory::MeasureIdle,
    ];

    pub fn multiplier(self) -> f64 {
        match self {
            NoiseCategory::TwoQubitGate => 1.0,
            NoiseCategory::SingleQubitGate | NoiseCategory::GateIdle => 0.1,
            NoiseCategory::Reset | NoiseCategory::MeasureIdle => 2.0,
            NoiseCategory::Measurement => 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Uniform over X, Y, Z.
    Depolarize1 { qubit: usize },
    /// Uniform over the 15 non-identity two-qubit Paulis.
    Depolarize2 { a: usize, b: usize },
    XFlip { qubit: usize },
    /// Flips the recorded result of measurement `record` (taken on `qubit`).
    MeasurementFlip { record: usize, qubit: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    /// Index of the instruction after which the channel acts.
    pub location: usize,
    pub kind: ChannelKind,
    pub category: NoiseCategory,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct NoisyCircuit {
    pub base: MemoryCircuit,
    pub channels: Vec<Channel>,
    pub params: NoiseParams,
}

impl NoisyCircuit {
    /// The circuit with every channel removed.
    pub fn noiseless(base: MemoryCircuit) -> Self {
        NoisyCircuit { base, channels: Vec::new(), params: NoiseParams::uniform(0.0) }
    }

    /// Copy with every channel probability multiplied by `factor` (capped at 0.5).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.probability = (ch.probability * factor).min(MAX_CHANNEL_PROBABILITY);
        }
        out
    }

    pub fn count_by_category(&self) -> BTreeMap<NoiseCategory, usize> {
        let mut counts = BTreeMap::new();
        for ch in &self.channels {
            *counts.entry(ch.category).or_insert(0) += 1;
        }
        counts
    }
}

/// Per-location multiplicative factors for inhomogeneous noise. Constant over rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct InhomogeneityMap {
    pub qubit: Vec<f64>,
    /// Keyed by `(min, max)` qubit index of a CX pair.
    pub pair: BTreeMap<(usize, usize), f64>,
}

impl InhomogeneityMap {
    pub fn homogeneous(num_qubits: usize) -> Self {
        InhomogeneityMap { qubit: vec![1.0; num_qubits], pair: BTreeMap::new() }
    }

    pub fn qubit_factor(&self, q: usize) -> f64 {
        self.qubit.get(q).copied().unwrap_or(1.0)
    }

    pub fn pair_factor(&self, a: usize, b: usize) -> f64 {
        self.pair.get(&(a.min(b), a.max(b))).copied().unwrap_or(1.0)
    }
}

fn cx_pairs(circuit: &MemoryCircuit) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = circuit
        .instructions
        .iter()
        .filter_map(|ins| match *ins {
            Instruction::Cx(c, t) => Some((c.min(t), c.max(t))),
            _ => None,
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Draws one factor per qubit and one per interacting qubit pair from `Normal(1, σ)`,
/// redrawing values at or below zero or above the bound that keeps every scaled
/// probability at most 0.5.
pub fn sample_inhomogeneity(circuit: &MemoryCircuit, params: &NoiseParams) -> Result<InhomogeneityMap> {
    params.validate()?;
    let pairs = cx_pairs(circuit);
    if params.inhomogeneity_sigma == 0.0 {
        let mut map = InhomogeneityMap::homogeneous(circuit.num_qubits);
        map.pair = pairs.into_iter().map(|k| (k, 1.0)).collect();
        return Ok(map);
    }
    let max_mult = NoiseCategory::Measurement.multiplier();
    let upper = if params.p > 0.0 { MAX_CHANNEL_PROBABILITY / (max_mult * params.p) } else { f64::INFINITY };
    if upper <= 0.0 {
        return Err(Error::InvalidParameter("p too large for inhomogeneous scaling".into()));
    }
    let normal = Normal::new(1.0, params.inhomogeneity_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0x1a40);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let f: f64 = normal.sample(rng);
        if f > 0.0 && f <= upper {
            return f;
        }
    };
    let qubit = (0..circuit.num_qubits).map(|_| draw(&mut rng)).collect();
    let pair = pairs.into_iter().map(|k| (k, draw(&mut rng))).collect();
    Ok(InhomogeneityMap { qubit, pair })
}

/// Attaches SI1000 channels to every syndrome-extraction layer.
pub fn apply_si1000(circuit: &MemoryCircuit, params: &NoiseParams) -> Result<NoisyCircuit> {
    let factors = sample_inhomogeneity(circuit, params)?;
    apply_si1000_with(circuit, params, &factors)
}

pub fn apply_si1000_with(
    circuit: &MemoryCircuit,
    params: &NoiseParams,
    factors: &InhomogeneityMap,
) -> Result<NoisyCircuit> {
    params.validate()?;
    let p = params.p;
    let prob = |cat: NoiseCategory, f: f64| (cat.multiplier() * p * f).min(MAX_CHANNEL_PROBABILITY);
    let mut channels = Vec::new();
    let mut record = 0usize;
    let mut layer_start = 0usize;
    let n = circuit.num_qubits;

    for (idx, ins) in circuit.instructions.iter().enumerate() {
        match *ins {
            Instruction::Tick => {
                let layer = &circuit.instructions[layer_start..idx];
                layer_start = idx + 1;
                let noiseless = layer.iter().any(Instruction::is_noiseless);
                if noiseless || layer.is_empty() {
                    continue;
                }
                let mut touched = vec![false; n];
                let mut measure_layer = false;
                for op in layer {
                    match *op {
                        Instruction::ResetZ(q) | Instruction::MeasureZ(q) => {
                            touched[q] = true;
                            measure_layer = true;
                        }
                        Instruction::H(q) => touched[q] = true,
                        Instruction::Cx(c, t) => {
                            touched[c] = true;
                            touched[t] = true;
                        }
                        _ => {}
                    }
                }
                let category =
                    if measure_layer { NoiseCategory::MeasureIdle } else { NoiseCategory::GateIdle };
                for q in (0..n).filter(|&q| !touched[q]) {
                    channels.push(Channel {
                        location: idx,
                        kind: ChannelKind::Depolarize1 { qubit: q },
                        category,
                        probability: prob(category, factors.qubit_factor(q)),
                    });
                }
            }
            Instruction::ResetZ(q) => channels.push(Channel {
                location: idx,
                kind: ChannelKind::XFlip { qubit: q },
                category: NoiseCategory::Reset,
                probability: prob(NoiseCategory::Reset, factors.qubit_factor(q)),
            }),
            Instruction::H(q) => channels.push(Channel {
                location: idx,
                kind: ChannelKind::Depolarize1 { qubit: q },
                category: NoiseCategory::SingleQubitGate,
                probability: prob(NoiseCategory::SingleQubitGate, factors.qubit_factor(q)),
            }),
            Instruction::Cx(c, t) => channels.push(Channel {
                location: idx,
                kind: ChannelKind::Depolarize2 { a: c, b: t },
                category: NoiseCategory::TwoQubitGate,
                probability: prob(NoiseCategory::TwoQubitGate, factors.pair_factor(c, t)),
            }),
            Instruction::MeasureZ(q) => channels.push(Channel {
                location: idx,
                kind: ChannelKind::MeasurementFlip { record, qubit: q },
                category: NoiseCategory::Measurement,
                probability: prob(NoiseCategory::Measurement, factors.qubit_factor(q)),
            }),
            _ => {}
        }
        record += ins.num_measurements();
    }

    Ok(NoisyCircuit { base: circuit.clone(), channels, params: *params })
}

/// Structural audit: every channel sits on a noisy instruction and carries
/// `multiplier(category) * p * factor`, capped at 0.5.
pub fn audit(noisy: &NoisyCircuit, factors: &InhomogeneityMap) -> std::result::Result<(), String> {
    let p = noisy.params.p;
    for (i, ch) in noisy.channels.iter().enumerate() {
        let ins = noisy
            .base
            .instructions
            .get(ch.location)
            .ok_or_else(|| format!("channel {i} points past the circuit"))?;
        if ins.is_noiseless() {
            return Err(format!("channel {i} attached to a noiseless instruction"));
        }
        let factor = match ch.kind {
            ChannelKind::Depolarize2 { a, b } => factors.pair_factor(a, b),
            ChannelKind::Depolarize1 { qubit }
            | ChannelKind::XFlip { qubit }
            | ChannelKind::MeasurementFlip { qubit, .. } => factors.qubit_factor(qubit),
        };
        let expected = (ch.category.multiplier() * p * factor).min(MAX_CHANNEL_PROBABILITY);
        if (ch.probability - expected).abs() > 1e-15 {
            return Err(format!(
                "channel {i} ({:?}) has probability {} but expected {}",
                ch.category, ch.probability, expected
            ));
        }
        if !(0.0..=1.0).contains(&ch.probability) {
            return Err(format!("channel {i} probability out of range"));
        }
        let consistent = matches!(
            (ch.category, ch.kind, ins),
            (NoiseCategory::TwoQubitGate, ChannelKind::Depolarize2 { .. }, Instruction::Cx(..))
                | (NoiseCategory::SingleQubitGate, ChannelKind::Depolarize1 { .. }, Instruction::H(_))
                | (NoiseCategory::GateIdle, ChannelKind::Depolarize1 { .. }, Instruction::Tick)
                | (NoiseCategory::MeasureIdle, ChannelKind::Depolarize1 { .. }, Instruction::Tick)
                | (NoiseCategory::Reset, ChannelKind::XFlip { .. }, Instruction::ResetZ(_))
                | (NoiseCategory::Measurement, ChannelKind::MeasurementFlip { .. }, Instruction::MeasureZ(_))
        );
        if !consistent {
            return Err(format!("channel {i} category does not match its instruction"));
        }
    }
    Ok(())
}
