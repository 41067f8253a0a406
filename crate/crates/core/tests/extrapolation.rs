use infdist::extrapolation::{
    ansatz_jacobian, bootstrap, lm_fit, richardson_extrapolate, Ansatz, DataPoint, DataSeries, Parity,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

fn eval(theta: &[f64], d: f64) -> f64 {
    theta[0] + theta[1..].chunks(2).map(|t| t[0] * (-(t[1].exp()) * d).exp()).sum::<f64>()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let terms = rng.random_range(1..=2);
        let mut theta = vec![rng.random_range(-0.9..0.9)];
        for _ in 0..terms {
            theta.push(rng.random_range(-0.5..0.5));
            theta.push(rng.random_range(0.2f64..1.5).ln());
        }
        let d = rng.random_range(2.0..15.0);
        let (_, grad) = ansatz_jacobian(&theta, d);
        assert_eq!(grad[0], 1.0);
        // differentiate each exponential term on its own so rounding in A does not
        // swamp small gradients
        let term = |t: &[f64]| t[0] * (-(t[1].exp()) * d).exp();
        for (i, g) in grad.iter().enumerate().skip(1) {
            let k = (i - 1) / 2 * 2 + 1;
            let j = i - k;
            let h = 1e-5 * theta[i].abs().max(1e-2);
            let mut up = theta[k..k + 2].to_vec();
            let mut down = up.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (term(&up) - term(&down)) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs();
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst}");
}

fn exact(theta: &[f64], ds: &[usize]) -> DataSeries {
    let pts = ds.iter().map(|&d| DataPoint { d, ev: eval(theta, d as f64), std_err: 0.0, n_shots: 0 }).collect();
    DataSeries::new(pts, Parity::All, usize::MAX).unwrap()
}

#[test]
fn exact_model_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let a = rng.random_range(-0.9..0.9);
        let b = rng.random_range(-0.5..0.5);
        let c: f64 = rng.random_range(0.2..1.5);
        let s = exact(&[a, b, c.ln()], &[3, 5, 7, 9, 11]);
        let fit = lm_fit(&s, Ansatz::SingleExp).unwrap();
        assert!(fit.converged);
        assert!((fit.a - a).abs() <= 1e-6 * a.abs().max(1e-3), "A {a} vs {}", fit.a);
        assert!((fit.terms[0].b - b).abs() <= 1e-6 * b.abs(), "B {b} vs {}", fit.terms[0].b);
        assert!((fit.terms[0].c - c).abs() <= 1e-6 * c, "C {c} vs {}", fit.terms[0].c);
    }
}

#[test]
fn double_exp_exact_recovery() {
    let theta = [0.7, 0.3, 0.3f64.ln(), -0.2, 0.9f64.ln()];
    let s = exact(&theta, &[3, 5, 7, 9, 11, 13, 15]);
    let fit = lm_fit(&s, Ansatz::DoubleExp).unwrap();
    assert_eq!(fit.ansatz, Ansatz::DoubleExp);
    assert!((fit.a - 0.7).abs() < 1e-6, "{fit:?}");
}

#[test]
fn richardson_constant_fixpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let mut ds: Vec<usize> = (2..30).filter(|_| rng.random_bool(0.3)).collect();
        if ds.is_empty() {
            ds.push(3);
        }
        let c = rng.random_range(-1.0..1.0);
        let pts = ds.iter().map(|&d| DataPoint { d, ev: c, std_err: 0.0, n_shots: 0 }).collect();
        let s = DataSeries::new(pts, Parity::All, usize::MAX).unwrap();
        let r = richardson_extrapolate(&s).unwrap();
        assert!((r - c).abs() < 1e-6 * (1.0f64).max(c.abs()), "{ds:?}: {r} vs {c}");
    }
}

fn noisy_series(rng: &mut ChaCha8Rng, theta: &[f64], ds: &[usize], n_shots: u64) -> DataSeries {
    let pts = ds
        .iter()
        .map(|&d| {
            let ev = eval(theta, d as f64).clamp(-1.0, 1.0);
            let q = (1.0 - ev) / 2.0;
            let k = Binomial::new(n_shots, q).unwrap().sample(rng);
            let qh = k as f64 / n_shots as f64;
            let std_err = 2.0 * (qh * (1.0 - qh) / n_shots as f64).sqrt();
            DataPoint { d, ev: 1.0 - 2.0 * qh, std_err, n_shots: n_shots as usize }
        })
        .collect();
    DataSeries::new(pts, Parity::All, usize::MAX).unwrap()
}

#[test]
fn a_never_leaves_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let theta = [rng.random_range(0.9..1.0), rng.random_range(-0.5..0.0), rng.random_range(0.05f64..0.6).ln()];
        let s = noisy_series(&mut rng, &theta, &[3, 5, 7, 9], 10_000);
        for ansatz in [Ansatz::SingleExp] {
            let fit = lm_fit(&s, ansatz).unwrap();
            assert!((-1.0..=1.0).contains(&fit.a), "{}", fit.a);
        }
    }
}

#[test]
fn double_exp_with_gaussian_noise_within_bootstrap_error() {
    let theta = [0.65, 0.25, 0.35f64.ln(), 0.1, 0.9f64.ln()];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1e-4).unwrap();
    let pts = (3..=19)
        .step_by(2)
        .map(|d| DataPoint { d, ev: eval(&theta, d as f64) + noise.sample(&mut rng), std_err: 1e-4, n_shots: 0 })
        .collect();
    let s = DataSeries::new(pts, Parity::Odd, 19).unwrap();
    let fit = lm_fit(&s, Ansatz::DoubleExp).unwrap();
    let boot = bootstrap(&s, fit.ansatz, 300, 10);
    assert!((fit.a - 0.65).abs() <= 3.0 * boot.std, "A {} ± {}", fit.a, boot.std);
}

#[test]
fn bootstrap_interval_coverage() {
    let theta = [0.8, -0.3, 0.4f64.ln()];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut covered = 0;
    for meta in 0..100 {
        let s = noisy_series(&mut rng, &theta, &[3, 5, 7, 9, 11], 100_000);
        let boot = bootstrap(&s, Ansatz::SingleExp, 200, meta);
        if boot.p16 <= 0.8 && 0.8 <= boot.p84 {
            covered += 1;
        }
    }
    assert!(covered >= 60, "covered {covered}/100");
}

#[test]
fn ler_ansatz_beats_richardson() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut wins = 0;
    for _ in 0..100 {
        let a = rng.random_range(0.5..0.95);
        let theta = [a, -rng.random_range(0.2..0.6), rng.random_range(0.3f64..0.5).ln(), -rng.random_range(0.05..0.2), rng.random_range(0.6f64..0.9).ln()];
        let s = noisy_series(&mut rng, &theta, &[3, 5, 7, 9, 11, 13, 15, 17], 1_000_000);
        let fit = lm_fit(&s, Ansatz::DoubleExp).unwrap();
        let rich = richardson_extrapolate(&s).unwrap();
        if (fit.extrapolated - a).abs() < (rich - a).abs() {
            wins += 1;
        }
    }
    assert!(wins >= 80, "wins {wins}/100");
}
