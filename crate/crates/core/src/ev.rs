//! Expectation values from logical error rates, stabiliser decompositions of
//! non-stabiliser inputs, and single-qubit logical process tomography.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_memory_circuit, Basis, PrepState};
use crate::decoder::{run_memory_point, FailureCount};
use crate::dem::dem_for_measurement;
use crate::error::{Error, Result};
use crate::layout::SurfaceCodePatch;
use crate::noise::{apply_si1000, NoiseParams};
use crate::pauli::Pauli;

/// What an estimate refers to: the prepared state, the measured observable, and the
/// code point `(d, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvLabel {
    pub state: String,
    pub observable: Basis,
    pub d: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EVEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_shots: usize,
    pub label: EvLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvMethod {
    Direct,
    Decomposition,
    Channel,
}

impl fmt::Display for EvMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvMethod::Direct => "direct",
            EvMethod::Decomposition => "decomposition",
            EvMethod::Channel => "channel",
        })
    }
}

pub const EV_CSV_HEADER: &str = "state_label,observable,d,p,value,std_err,n_shots,method";

impl EVEstimate {
    pub fn csv_row(&self, method: EvMethod) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.label.state,
            self.label.observable,
            self.label.d,
            self.label.p,
            self.value,
            self.std_err,
            self.n_shots,
            method
        )
    }
}

/// `E = sign · (1 − 2 P_L)` with `std_err² = 4 P_L (1 − P_L) / n`.
pub fn ev_from_ler(p_l: f64, noiseless_sign: f64, n_shots: usize, label: EvLabel) -> Result<EVEstimate> {
    if !(0.0..=1.0).contains(&p_l) {
        return Err(Error::InvalidParameter(format!("P_L = {p_l} outside [0, 1]")));
    }
    if noiseless_sign.abs() != 1.0 {
        return Err(Error::InvalidParameter(format!("noiseless sign must be ±1, got {noiseless_sign}")));
    }
    let std_err = if n_shots == 0 { 0.0 } else { 2.0 * (p_l * (1.0 - p_l) / n_shots as f64).sqrt() };
    Ok(EVEstimate { value: noiseless_sign * (1.0 - 2.0 * p_l), std_err, n_shots, label })
}

/// Runs one memory experiment (prepare `prep`, measure `observable` after `3d` rounds)
/// and converts its failure rate into an expectation value. Shots are decoded with the
/// matching graph of the measurement basis.
pub fn measure_ev(
    patch: &SurfaceCodePatch,
    prep: PrepState,
    observable: Basis,
    params: &NoiseParams,
    n_shots: usize,
    seed: u64,
) -> Result<(EVEstimate, FailureCount)> {
    let circuit = build_memory_circuit(patch, prep, observable, 3)?;
    let sign = circuit.noiseless_sign();
    let noisy = apply_si1000(&circuit, params)?;
    let graph = dem_for_measurement(patch, observable, 3, params)?;
    let count = run_memory_point(&noisy, &graph, n_shots, seed)?;
    let label = EvLabel { state: prep.label().into(), observable, d: patch.distance, p: params.p };
    let p_l = count.n_fails as f64 / n_shots as f64;
    Ok((ev_from_ler(p_l, sign, n_shots, label)?, count))
}

/// Column order of the stabiliser decomposition: `|+⟩, |−⟩, |+i⟩, |−i⟩, |0⟩, |1⟩`.
pub const DECOMPOSITION_BASIS: [PrepState; 6] = [
    PrepState::PLUS,
    PrepState::MINUS,
    PrepState::PLUS_I,
    PrepState::MINUS_I,
    PrepState::ZERO,
    PrepState::ONE,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabiliserDecomposition {
    /// Coefficients over [`DECOMPOSITION_BASIS`].
    pub x: [f64; 6],
    /// `Tr[ρP]` for `P = I, X, Y, Z`.
    pub b: [f64; 4],
    pub robustness: f64,
}

/// `A[j][i] = Tr[P_j σ_i]` with rows `I, X, Y, Z`.
pub fn decomposition_matrix() -> [[f64; 6]; 4] {
    let mut a = [[0.0; 6]; 4];
    for (i, s) in DECOMPOSITION_BASIS.iter().enumerate() {
        let r = s.bloch();
        a[0][i] = 1.0;
        a[1][i] = r[0];
        a[2][i] = r[1];
        a[3][i] = r[2];
    }
    a
}

const VERTEX_TOL: f64 = 1e-12;

/// Minimum-L1 quasiprobability decomposition of the single-qubit state with Pauli
/// expectations `b`, found by enumerating all basic feasible solutions of the LP in
/// `x = u − v, u, v ≥ 0`. Among optimal vertices the lexicographically largest `x` wins.
pub fn decompose_state(b: [f64; 4]) -> Result<StabiliserDecomposition> {
    if (b[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Decompose(format!("trace component must be 1, got {}", b[0])));
    }
    let norm = (b[1] * b[1] + b[2] * b[2] + b[3] * b[3]).sqrt();
    if !norm.is_finite() || norm > 1.0 + 1e-12 {
        return Err(Error::Decompose(format!("Bloch vector norm {norm} exceeds 1")));
    }
    let a = decomposition_matrix();
    // column k < 6 is u_k, column k ≥ 6 is v_{k-6} with coefficient −A
    let column = |k: usize| -> Vector4<f64> {
        let (i, s) = if k < 6 { (k, 1.0) } else { (k - 6, -1.0) };
        Vector4::new(s * a[0][i], s * a[1][i], s * a[2][i], s * a[3][i])
    };
    let rhs = Vector4::from(b);

    let mut best: Option<([f64; 6], f64)> = None;
    for c0 in 0..12 {
        for c1 in c0 + 1..12 {
            for c2 in c1 + 1..12 {
                for c3 in c2 + 1..12 {
                    let cols = [c0, c1, c2, c3];
                    let m = Matrix4::from_columns(&cols.map(column));
                    let Some(sol) = m.lu().solve(&rhs) else { continue };
                    if !sol.iter().all(|v| v.is_finite() && *v >= -VERTEX_TOL) {
                        continue;
                    }
                    if (m * sol - rhs).amax() > 1e-9 {
                        continue;
                    }
                    let mut x = [0.0; 6];
                    for (&k, &val) in cols.iter().zip(sol.iter()) {
                        let val = val.max(0.0);
                        if k < 6 {
                            x[k] += val;
                        } else {
                            x[k - 6] -= val;
                        }
                    }
                    let l1: f64 = x.iter().map(|v| v.abs()).sum();
                    let better = match &best {
                        None => true,
                        Some((bx, bl1)) => {
                            if l1 < bl1 - 1e-10 {
                                true
                            } else if l1 > bl1 + 1e-10 {
                                false
                            } else {
                                lex_cmp(&x, bx) == Ordering::Greater
                            }
                        }
                    };
                    if better {
                        best = Some((x, l1));
                    }
                }
            }
        }
    }
    let (x, robustness) = best.ok_or_else(|| Error::Decompose("no feasible vertex".into()))?;
    Ok(StabiliserDecomposition { x, b, robustness })
}

fn lex_cmp(a: &[f64; 6], b: &[f64; 6]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-10 {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Pauli expectations of `R_z(θ)|+⟩`.
pub fn xy_plane_target(theta: f64) -> [f64; 4] {
    [1.0, theta.cos(), theta.sin(), 0.0]
}

/// `Σ x_i E_i` over component estimates ordered as [`DECOMPOSITION_BASIS`].
pub fn combine_evs(
    decomposition: &StabiliserDecomposition,
    component_evs: &[EVEstimate; 6],
    state_label: &str,
) -> Result<EVEstimate> {
    let first = &component_evs[0].label;
    for ev in &component_evs[1..] {
        if ev.label.observable != first.observable || ev.label.d != first.d || ev.label.p != first.p {
            return Err(Error::LabelMismatch(format!(
                "component ({}, d={}, p={}) vs ({}, d={}, p={})",
                ev.label.observable, ev.label.d, ev.label.p, first.observable, first.d, first.p
            )));
        }
    }
    let mut value = 0.0;
    let mut var = 0.0;
    for (x, ev) in decomposition.x.iter().zip(component_evs) {
        value += x * ev.value;
        var += x * x * ev.std_err * ev.std_err;
    }
    Ok(EVEstimate {
        value,
        std_err: var.sqrt(),
        n_shots: component_evs.iter().map(|e| e.n_shots).sum(),
        label: EvLabel { state: state_label.into(), ..first.clone() },
    })
}

pub type Mat2 = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_matrix(p: Pauli) -> Mat2 {
    let (o, z) = (c(0.0, 0.0), c(1.0, 0.0));
    match p {
        Pauli::I => Mat2::new(z, o, o, z),
        Pauli::X => Mat2::new(o, z, z, o),
        Pauli::Y => Mat2::new(o, c(0.0, -1.0), c(0.0, 1.0), o),
        Pauli::Z => Mat2::new(z, o, o, -z),
    }
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// `(I + ex X + ey Y + ez Z)/2`, with the Bloch vector scaled back onto the unit ball
/// when its norm exceeds one.
pub fn state_tomography(ex: f64, ey: f64, ez: f64) -> Mat2 {
    let norm = (ex * ex + ey * ey + ez * ez).sqrt();
    let s = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    density_matrix([1.0, s * ex, s * ey, s * ez])
}

/// Density matrix with Pauli expectations `b = (1, ⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
pub fn density_matrix(b: [f64; 4]) -> Mat2 {
    let mut rho = Mat2::zeros();
    for (p, v) in PAULIS.iter().zip(b) {
        rho += pauli_matrix(*p) * c(v / 2.0, 0.0);
    }
    rho
}

/// Process matrix in the Hermitian Pauli basis: `E(ρ) = Σ χ_mn P_m ρ P_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub chi: Matrix4<Complex64>,
}

impl ProcessMatrix {
    pub fn identity() -> Self {
        let mut chi = Matrix4::zeros();
        chi[(0, 0)] = c(1.0, 0.0);
        ProcessMatrix { chi }
    }

    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let mut out = Mat2::zeros();
        for m in 0..4 {
            let pm = pauli_matrix(PAULIS[m]);
            for n in 0..4 {
                let w = self.chi[(m, n)];
                if w != c(0.0, 0.0) {
                    out += pm * rho * pauli_matrix(PAULIS[n]) * w;
                }
            }
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.chi - self.chi.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// Largest deviation of `Σ χ_mn P_n P_m` from the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let mut sum = Mat2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                sum += pauli_matrix(PAULIS[n]) * pauli_matrix(PAULIS[m]) * self.chi[(m, n)];
            }
        }
        (sum - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Reconstructs the logical channel from the output states for inputs `|0⟩, |1⟩, |+⟩,
/// |+i⟩`.
pub fn process_tomography(rho_out_0: &Mat2, rho_out_1: &Mat2, rho_out_plus: &Mat2, rho_out_plusi: &Mat2) -> ProcessMatrix {
    let i = c(0.0, 1.0);
    let r1 = *rho_out_0;
    let r4 = *rho_out_1;
    let diag = r1 + r4;
    // E(|0⟩⟨1|) and E(|1⟩⟨0|)
    let upper = rho_out_plus + rho_out_plusi * i - diag * (c(1.0, 1.0) / 2.0);
    let lower = rho_out_plus - rho_out_plusi * i - diag * (c(1.0, -1.0) / 2.0);

    let mut block = Matrix4::<Complex64>::zeros();
    for r in 0..2 {
        for col in 0..2 {
            block[(r, col)] = r1[(r, col)];
            block[(r, col + 2)] = upper[(r, col)];
            block[(r + 2, col)] = lower[(r, col)];
            block[(r + 2, col + 2)] = r4[(r, col)];
        }
    }
    let h = c(0.5, 0.0);
    let (o, one) = (c(0.0, 0.0), h);
    let lambda = Matrix4::new(
        one, o, o, one, //
        o, one, one, o, //
        o, one, -one, o, //
        one, o, o, -one,
    );
    // basis I, X, −iY, Z
    let raw = lambda * block * lambda;
    let phase = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
    let mut chi = Matrix4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            chi[(m, n)] = phase[m] * phase[n].conj() * raw[(m, n)];
        }
    }
    ProcessMatrix { chi }
}

/// `Tr[O E(ρ_b)]` for the state with Pauli expectations `b`.
pub fn ev_via_channel(chi: &ProcessMatrix, b: [f64; 4], observable: Pauli) -> f64 {
    let out = chi.apply(&density_matrix(b));
    (pauli_matrix(observable) * out).trace().re
}

/// Tomographic estimates `[⟨X⟩, ⟨Y⟩, ⟨Z⟩]` for each of the inputs `|0⟩, |1⟩, |+⟩, |+i⟩`.
pub type TomographyData = [[EVEstimate; 3]; 4];

pub const TOMOGRAPHY_INPUTS: [PrepState; 4] = [PrepState::ZERO, PrepState::ONE, PrepState::PLUS, PrepState::PLUS_I];

pub fn channel_from_tomography(data: &TomographyData) -> ProcessMatrix {
    channel_from_values(&data.clone().map(|row| row.map(|e| e.value)))
}

fn channel_from_values(v: &[[f64; 3]; 4]) -> ProcessMatrix {
    let rho = v.map(|[x, y, z]| state_tomography(x, y, z));
    process_tomography(&rho[0], &rho[1], &rho[2], &rho[3])
}

/// Channel-method estimate with an error bar propagated linearly from the twelve
/// tomographic estimates.
pub fn channel_estimate(data: &TomographyData, b: [f64; 4], observable: Basis, state_label: &str) -> EVEstimate {
    let pauli = match observable {
        Basis::X => Pauli::X,
        Basis::Y => Pauli::Y,
        Basis::Z => Pauli::Z,
    };
    let values = data.clone().map(|row| row.map(|e| e.value));
    let f = |v: &[[f64; 3]; 4]| ev_via_channel(&channel_from_values(v), b, pauli);
    let value = f(&values);
    let h = 1e-6;
    let mut var = 0.0;
    for s in 0..4 {
        for k in 0..3 {
            let mut up = values;
            let mut down = values;
            up[s][k] += h;
            down[s][k] -= h;
            let grad = (f(&up) - f(&down)) / (2.0 * h);
            var += grad * grad * data[s][k].std_err * data[s][k].std_err;
        }
    }
    let first = &data[0][0].label;
    EVEstimate {
        value,
        std_err: var.sqrt(),
        n_shots: data.iter().flatten().map(|e| e.n_shots).sum(),
        label: EvLabel { state: state_label.into(), observable, d: first.d, p: first.p },
    }
}

/// Runs the twelve tomography experiments.
pub fn measure_tomography(
    patch: &SurfaceCodePatch,
    params: &NoiseParams,
    n_shots: usize,
    seed: u64,
) -> Result<TomographyData> {
    let mut out = Vec::with_capacity(4);
    for (s, prep) in TOMOGRAPHY_INPUTS.iter().enumerate() {
        let mut row = Vec::with_capacity(3);
        for (k, basis) in Basis::ALL.iter().enumerate() {
            let sub_seed = seed.wrapping_add((3 * s + k) as u64 * 0x9E37_79B9);
            row.push(measure_ev(patch, *prep, *basis, params, n_shots, sub_seed)?.0);
        }
        out.push(<[EVEstimate; 3]>::try_from(row).unwrap());
    }
    Ok(<TomographyData>::try_from(out).unwrap())
}

/// Runs the six component experiments of a decomposition-method estimate.
pub fn measure_components(
    patch: &SurfaceCodePatch,
    observable: Basis,
    params: &NoiseParams,
    n_shots: usize,
    seed: u64,
) -> Result<[EVEstimate; 6]> {
    let mut out = Vec::with_capacity(6);
    for (i, prep) in DECOMPOSITION_BASIS.iter().enumerate() {
        let sub_seed = seed.wrapping_add(i as u64 * 0x9E37_79B9);
        out.push(measure_ev(patch, *prep, observable, params, n_shots, sub_seed)?.0);
    }
    Ok(<[EVEstimate; 6]>::try_from(out).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn label() -> EvLabel {
        EvLabel { state: "Z+".into(), observable: Basis::Z, d: 3, p: 0.001 }
    }

    #[test]
    fn ev_from_ler_values() {
        assert_eq!(ev_from_ler(0.0, 1.0, 100, label()).unwrap().value, 1.0);
        assert_abs_diff_eq!(ev_from_ler(0.1, 1.0, 100, label()).unwrap().value, 0.8, epsilon = 1e-15);
        assert_eq!(ev_from_ler(0.5, -1.0, 100, label()).unwrap().value, 0.0);
        let e = ev_from_ler(0.2, -1.0, 400, label()).unwrap();
        assert_abs_diff_eq!(e.value, -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(e.std_err * e.std_err, 4.0 * 0.2 * 0.8 / 400.0, epsilon = 1e-15);
        assert!(ev_from_ler(1.5, 1.0, 1, label()).is_err());
    }

    #[test]
    fn t_state_decomposition() {
        let r = 0.5f64.sqrt();
        let dec = decompose_state([1.0, r, r, 0.0]).unwrap();
        let s2 = 2f64.sqrt();
        let want = [s2 / 2.0, 0.0, 0.5, (1.0 - s2) / 2.0, 0.0, 0.0];
        let l1: f64 = dec.x.iter().zip(want).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 1e-9, "{:?}", dec.x);
        assert_abs_diff_eq!(dec.robustness, s2, epsilon = 1e-12);
    }

    #[test]
    fn stabiliser_state_is_its_own_decomposition() {
        let dec = decompose_state([1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(dec.x, [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(dec.robustness, 1.0);
        assert!(decompose_state([1.0, 0.9, 0.9, 0.0]).is_err());
        assert!(decompose_state([0.5, 0.0, 0.0, 0.0]).is_err());
    }

    // Independent check on the column convention: Σ x_i ρ(σ_i) reproduces ρ(b).
    #[test]
    fn decomposition_reconstructs_density_matrix() {
        for k in 0..=12 {
            let theta = std::f64::consts::PI * k as f64 / 12.0;
            let b = [1.0, 0.8 * theta.cos(), 0.5 * theta.sin(), 0.3];
            let dec = decompose_state(b).unwrap();
            let mut rho = Mat2::zeros();
            for (x, s) in dec.x.iter().zip(DECOMPOSITION_BASIS) {
                let [bx, by, bz] = s.bloch();
                rho += density_matrix([1.0, bx, by, bz]) * c(*x, 0.0);
            }
            assert!((rho - density_matrix(b)).iter().all(|z| z.norm() < 1e-9));
            assert_abs_diff_eq!(dec.x.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn xy_plane_targets() {
        let pi = std::f64::consts::PI;
        let t = xy_plane_target(0.0);
        assert_eq!(t, [1.0, 1.0, 0.0, 0.0]);
        let t = xy_plane_target(pi / 2.0);
        assert_abs_diff_eq!(t[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t[2], 1.0);
        assert_abs_diff_eq!(xy_plane_target(pi)[1], -1.0);
    }

    fn comp(value: f64, std_err: f64, observable: Basis) -> EVEstimate {
        EVEstimate { value, std_err, n_shots: 10, label: EvLabel { state: "s".into(), observable, d: 3, p: 0.001 } }
    }

    #[test]
    fn combine_t_state() {
        let r = 0.5f64.sqrt();
        let dec = decompose_state([1.0, r, r, 0.0]).unwrap();
        let noiseless: [EVEstimate; 6] =
            DECOMPOSITION_BASIS.map(|s| comp(s.bloch()[0], 0.01, Basis::X));
        let ev = combine_evs(&dec, &noiseless, "T").unwrap();
        assert_abs_diff_eq!(ev.value, r, epsilon = 1e-12);
        let s2 = 2f64.sqrt();
        let want = 0.01 * (2.0 + 1.0 + (1.0 - s2) * (1.0 - s2)).sqrt() / 2.0;
        assert_abs_diff_eq!(ev.std_err, want, epsilon = 1e-12);

        let zero = decompose_state([1.0, 0.0, 0.0, 1.0]).unwrap();
        let comps = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6].map(|v| comp(v, 0.0, Basis::X));
        assert_abs_diff_eq!(combine_evs(&zero, &comps, "0").unwrap().value, 0.5);

        let scaled = noiseless.clone().map(|mut e| {
            e.value *= 0.37;
            e
        });
        assert_abs_diff_eq!(combine_evs(&dec, &scaled, "T").unwrap().value, 0.37 * r, epsilon = 1e-12);

        let mut bad = noiseless;
        bad[3].label.observable = Basis::Z;
        assert!(matches!(combine_evs(&dec, &bad, "T"), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn state_tomography_examples() {
        let rho = state_tomography(0.0, 0.0, 1.0);
        assert_abs_diff_eq!(rho[(0, 0)].re, 1.0);
        assert_abs_diff_eq!(rho[(1, 1)].re, 0.0);
        let rho = state_tomography(1.0, 0.0, 0.0);
        for z in rho.iter() {
            assert_abs_diff_eq!(z.re, 0.5);
        }
        let rho = state_tomography(0.0, 0.0, 0.0);
        assert_abs_diff_eq!(rho[(0, 1)].norm(), 0.0);
        assert_abs_diff_eq!(rho[(0, 0)].re, 0.5);
        let rho = state_tomography(1.0, 1.0, 0.0);
        let bx = (pauli_matrix(Pauli::X) * rho).trace().re;
        assert_abs_diff_eq!(bx, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    fn outputs(kraus: &[Mat2]) -> [Mat2; 4] {
        TOMOGRAPHY_INPUTS.map(|s| {
            let [x, y, z] = s.bloch();
            let rho = density_matrix([1.0, x, y, z]);
            kraus.iter().map(|k| k * rho * k.adjoint()).sum()
        })
    }

    fn chi_of(kraus: &[Mat2]) -> ProcessMatrix {
        let o = outputs(kraus);
        process_tomography(&o[0], &o[1], &o[2], &o[3])
    }

    fn assert_chi(chi: &ProcessMatrix, want: [[f64; 4]; 4]) {
        for m in 0..4 {
            for n in 0..4 {
                assert!((chi.chi[(m, n)] - c(want[m][n], 0.0)).norm() < 1e-12, "chi = {}", chi.chi);
            }
        }
    }

    #[test]
    fn identity_channel() {
        let chi = chi_of(&[Mat2::identity()]);
        assert_eq!(chi.chi.map(|z| (z.norm() > 1e-12) as u8).sum(), 1);
        assert_chi(&chi, [[1.0, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 4], [0.0; 4]]);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(ev_via_channel(&chi, [1.0, r, r, 0.0], Pauli::X), r, epsilon = 1e-12);
    }

    #[test]
    fn depolarising_channel() {
        let half = state_tomography(0.0, 0.0, 0.0);
        let chi = process_tomography(&half, &half, &half, &half);
        let q = 0.25;
        assert_chi(&chi, [[q, 0.0, 0.0, 0.0], [0.0, q, 0.0, 0.0], [0.0, 0.0, q, 0.0], [0.0, 0.0, 0.0, q]]);
        for obs in [Pauli::X, Pauli::Y, Pauli::Z] {
            assert_abs_diff_eq!(ev_via_channel(&chi, [1.0, 0.3, -0.4, 0.5], obs), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bit_flip_channel() {
        let f: f64 = 0.13;
        let kraus = [Mat2::identity() * c((1.0 - f).sqrt(), 0.0), pauli_matrix(Pauli::X) * c(f.sqrt(), 0.0)];
        let chi = chi_of(&kraus);
        assert_chi(&chi, [[1.0 - f, 0.0, 0.0, 0.0], [0.0, f, 0.0, 0.0], [0.0; 4], [0.0; 4]]);
        assert_abs_diff_eq!(ev_via_channel(&chi, [1.0, 0.0, 0.0, 1.0], Pauli::Z), 1.0 - 2.0 * f, epsilon = 1e-12);
    }

    // A generic channel: rotation followed by amplitude damping. The reconstructed χ
    // must reproduce the Kraus action on arbitrary inputs.
    #[test]
    fn generic_channel_round_trip() {
        let (a, g) = (0.4f64, 0.2f64);
        let rot = Mat2::new(c(a.cos(), 0.0), c(0.0, -a.sin()), c(0.0, -a.sin()), c(a.cos(), 0.0));
        let k0 = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c((1.0 - g).sqrt(), 0.0)) * rot;
        let k1 = Mat2::new(c(0.0, 0.0), c(g.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0)) * rot;
        let chi = chi_of(&[k0, k1]);
        assert!(chi.is_hermitian(1e-12));
        assert!(chi.trace_preservation_error() < 1e-12);
        for b in [[1.0, 0.6, -0.2, 0.7], [1.0, 0.0, 1.0, 0.0], [1.0, -0.3, 0.3, -0.3]] {
            let rho = density_matrix(b);
            let direct: Mat2 = [k0, k1].iter().map(|k| k * rho * k.adjoint()).sum();
            for p in PAULIS {
                let want = (pauli_matrix(p) * direct).trace().re;
                assert_abs_diff_eq!(ev_via_channel(&chi, b, p), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn csv_row_format() {
        let e = ev_from_ler(0.25, 1.0, 16, EvLabel { state: "X+".into(), observable: Basis::X, d: 5, p: 0.002 }).unwrap();
        assert_eq!(e.csv_row(EvMethod::Direct), "X+,X,5,0.002,0.5,0.21650635094610965,16,direct");
    }
}
