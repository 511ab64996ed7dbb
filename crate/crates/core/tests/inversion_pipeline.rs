use approx::assert_relative_eq;
use cavspec::inversion::{
    density_from_levelshift, levelshift_from_chi, levelshift_from_transmissivity, TransmissivitySweep,
    DEFAULT_CHI_FLOOR,
};
use cavspec::io::read_transmissivity;
use cavspec::levelshift::LevelShift;
use cavspec::model::{CavitySpec, CouplingDensity};
use cavspec::response::{propagator, Channel};
use cavspec::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn gaussian() -> LevelShift {
    LevelShift::new(CouplingDensity::gaussian(0.0, 1.0, 0.5, 0.0).unwrap())
}

fn chi(ls: &LevelShift, wc: f64, kappa: f64, omega: &[f64]) -> Vec<Complex64> {
    let cav = CavitySpec::new(wc, kappa).unwrap();
    omega
        .iter()
        .map(|&w| propagator(ls, &cav, w, Channel::Cc).unwrap())
        .collect()
}

fn sweep(ls: &LevelShift, kappa: f64, omega: &[f64], cavity: &[f64]) -> TransmissivitySweep {
    let mut data = vec![vec![0.0; cavity.len()]; omega.len()];
    for (j, &wc) in cavity.iter().enumerate() {
        for (i, c) in chi(ls, wc, kappa, omega).iter().enumerate() {
            data[i][j] = c.norm_sqr();
        }
    }
    TransmissivitySweep {
        omega: omega.to_vec(),
        cavity_grid: cavity.to_vec(),
        data,
    }
}

#[test]
fn transmissivity_and_chi_give_the_same_level_shift() {
    let ls = gaussian();
    let kappa = 0.3;
    let omega = linspace(-4.0, 4.0, 81);
    let from_t = levelshift_from_transmissivity(&sweep(&ls, kappa, &omega, &linspace(-7.0, 7.0, 281)), kappa).unwrap();
    let from_chi = levelshift_from_chi(
        &omega,
        &chi(&ls, 0.2, kappa, &omega),
        &CavitySpec::new(0.2, kappa).unwrap(),
        DEFAULT_CHI_FLOOR,
    )
    .unwrap();
    assert!((0..omega.len()).all(|i| from_t.is_valid(i) && from_chi.is_valid(i)));
    let scale = from_chi.k.iter().map(|k| k.norm()).fold(0.0, f64::max);
    for (i, (a, b)) in from_t.k.iter().zip(&from_chi.k).enumerate() {
        assert!((a - b).norm() <= 1e-4 * scale, "ω = {}: {a} vs {b}", omega[i]);
        let exact = ls.eval(Complex64::new(omega[i], 0.0)).unwrap();
        assert!((b - exact).norm() <= 1e-12 * scale);
    }
}

#[test]
fn transmissivity_file_rows_may_come_in_any_order() {
    let ls = gaussian();
    let omega = linspace(-2.0, 2.0, 5);
    let cavity = linspace(-6.0, 6.0, 61);
    let s = sweep(&ls, 0.3, &omega, &cavity);
    let mut rows = Vec::new();
    for (i, w) in omega.iter().enumerate() {
        for (j, wc) in cavity.iter().enumerate() {
            rows.push(format!("{w},{wc},{}", s.data[i][j]));
        }
    }
    rows.reverse();
    let text = format!("omega,omega_c,transmissivity\n{}\n", rows.join("\n"));
    let back = read_transmissivity(text.as_bytes()).unwrap();
    assert_eq!(back.omega, s.omega);
    assert_eq!(back.cavity_grid, s.cavity_grid);
    assert_eq!(back.data, s.data);
}

#[test]
fn noisy_chi_error_tracks_sensitivity() {
    // Complex noise of relative size ε perturbs K̃⁺ by about ε/|χ|.
    let ls = gaussian();
    let cav = CavitySpec::new(0.0, 0.3).unwrap();
    let omega = linspace(-4.0, 4.0, 161);
    let clean = chi(&ls, 0.0, 0.3, &omega);
    let truth = levelshift_from_chi(&omega, &clean, &cav, DEFAULT_CHI_FLOOR).unwrap();
    let eps = 1e-3;
    let noise = Normal::new(0.0, eps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sum_sq, mut predicted_sq) = (0.0, 0.0);
    let mut weights = Vec::new();
    for _ in 0..200 {
        let noisy: Vec<Complex64> = clean
            .iter()
            .map(|c| c * Complex64::new(1.0 + noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let t = levelshift_from_chi(&omega, &noisy, &cav, DEFAULT_CHI_FLOOR).unwrap();
        for (i, k) in t.k.iter().enumerate() {
            sum_sq += (k - truth.k[i]).norm_sqr();
            predicted_sq += 2.0 * (eps * t.sensitivity[i]).powi(2);
        }
        weights.push(density_from_levelshift(&t, 0.0).unwrap().total_weight);
    }
    assert_relative_eq!((sum_sq / predicted_sq).sqrt(), 1.0, max_relative = 0.05);

    // Noise enters Ω² to first order only, so the estimate is unbiased.
    let exact = density_from_levelshift(&truth, 0.0).unwrap().total_weight;
    assert_relative_eq!(exact, 0.25, max_relative = 0.01);
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let sd = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * sd / n.sqrt(),
        "mean {mean}, exact {exact}, sd {sd}"
    );
}
