use infdist::circuit::Basis;
use infdist::ev::{
    channel_estimate, combine_evs, decompose_state, decomposition_matrix, measure_components, measure_tomography,
    xy_plane_target,
};
use infdist::{build_patch, NoiseParams};
use nalgebra::{Matrix4, Vector4};

// Every choice of four columns of the 4×6 system whose solution reproduces b is a
// vertex of {x : Ax = b}; the L1 minimum over them is the robustness.
fn brute_force_min_l1(b: [f64; 4]) -> f64 {
    let a = decomposition_matrix();
    let mut best = f64::INFINITY;
    for mask in 0u32..64 {
        if mask.count_ones() != 4 {
            continue;
        }
        let cols: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
        let m = Matrix4::from_fn(|r, c| a[r][cols[c]]);
        if let Some(sol) = m.lu().solve(&Vector4::from(b)) {
            if (m * sol - Vector4::from(b)).amax() < 1e-9 {
                best = best.min(sol.iter().map(|v| v.abs()).sum());
            }
        }
    }
    best
}

#[test]
fn decomposition_is_l1_optimal_on_xy_plane() {
    for k in 0..=24 {
        let theta = std::f64::consts::PI * k as f64 / 24.0;
        let b = xy_plane_target(theta);
        let dec = decompose_state(b).unwrap();
        let a = decomposition_matrix();
        for (j, row) in a.iter().enumerate() {
            let ax: f64 = row.iter().zip(dec.x).map(|(a, x)| a * x).sum();
            assert!((ax - b[j]).abs() < 1e-9);
        }
        assert!((dec.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((dec.robustness - brute_force_min_l1(b)).abs() < 1e-9, "theta = {theta}");
    }
}

#[test]
fn pi_over_three() {
    let b = xy_plane_target(std::f64::consts::PI / 3.0);
    let dec = decompose_state(b).unwrap();
    assert!((dec.robustness - brute_force_min_l1(b)).abs() < 1e-9);
    assert!(dec.robustness > 1.0);
}

#[test]
fn noiseless_t_state_pipeline() {
    let patch = build_patch(3).unwrap();
    let b = xy_plane_target(std::f64::consts::FRAC_PI_4);
    let dec = decompose_state(b).unwrap();
    let comps = measure_components(&patch, Basis::X, &NoiseParams::uniform(0.0), 20_000, 3).unwrap();
    let ev = combine_evs(&dec, &comps, "T").unwrap();
    let want = 0.5f64.sqrt();
    assert!((ev.value - want).abs() <= 3.0 * ev.std_err + 1e-12, "{} ± {}", ev.value, ev.std_err);
}

#[test]
fn channel_and_decomposition_methods_agree() {
    let patch = build_patch(3).unwrap();
    let params = NoiseParams::uniform(0.01);
    let b = xy_plane_target(std::f64::consts::FRAC_PI_4);
    let n = 20_000;
    let tomo = measure_tomography(&patch, &params, n, 11).unwrap();
    let via_channel = channel_estimate(&tomo, b, Basis::X, "T");
    let dec = decompose_state(b).unwrap();
    let comps = measure_components(&patch, Basis::X, &params, n, 12).unwrap();
    let via_dec = combine_evs(&dec, &comps, "T").unwrap();
    let sigma = (via_channel.std_err.powi(2) + via_dec.std_err.powi(2)).sqrt();
    assert!(
        (via_channel.value - via_dec.value).abs() <= 3.0 * sigma,
        "channel {} ± {}, decomposition {} ± {}",
        via_channel.value,
        via_channel.std_err,
        via_dec.value,
        via_dec.std_err
    );
    assert!(via_dec.value < 0.7 && via_dec.value > 0.3);
}
