use super::*;
use crate::rng::seeded;
use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn z_examples() {
    assert!((z_cross_covariance(0.5, 1, 1, 0.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((z_cross_covariance(0.0, 1, 1, 0.0).unwrap() - 1.0).abs() < 1e-14);
    for d in [-0.3, 0.2, 0.9, 1.1] {
        for j in [1, 3] {
            let v = z_cross_covariance(d, j, j, 0.0).unwrap();
            assert!(v > 0.0, "d={d} j={j}");
        }
    }
    assert!(z_cross_covariance(0.5, 1, 1, 0.0).is_ok());
    assert!(z_cross_covariance(1.25, 1, 1, 0.0).is_err());
    assert!(z_cross_covariance(-0.5, 1, 1, 0.0).is_err());
    assert!(z_cross_covariance(0.2, 0, 1, 0.0).is_err());
}

#[test]
fn z_tail_decays() {
    for k in 0..33 {
        let d = GRID_MIN + 0.05 * k as f64;
        let far = z_cross_covariance(d, 1, 1, 1e3).unwrap().abs();
        assert!(far < 1e-2, "d={d}: {far}");
    }
    let a = z_cross_covariance(0.2, 1, 1, 100.0).unwrap().abs();
    let b = z_cross_covariance(0.2, 1, 1, 1000.0).unwrap().abs();
    assert!(b < a);
}

#[test]
fn z_continuous_at_half() {
    for (i, j) in [(1, 1), (2, 2), (1, 2), (2, 3), (3, 1)] {
        for tau in [0.0, 0.5, 1.0, 2.5, -1.5] {
            let mid = z_cross_covariance(0.5, i, j, tau).unwrap();
            let above = z_cross_covariance(0.5 + 1e-4, i, j, tau).unwrap();
            assert!(
                (above - mid).abs() < 1e-3,
                "i={i} j={j} tau={tau}: {above} vs {mid}"
            );
            // below 1/2 the window grows with j, above it stays of unit length
            if i == 1 && j == 1 {
                let below = z_cross_covariance(0.5 - 1e-4, i, j, tau).unwrap();
                assert!(
                    (below - mid).abs() < 1e-3,
                    "i={i} tau={tau}: {below} vs {mid}"
                );
            }
        }
    }
}

#[test]
fn z_stationary_symmetry() {
    for d in [0.2, 0.5, 0.8] {
        for tau in [0.3, 1.7, 4.0] {
            let a = z_cross_covariance(d, 1, 2, tau).unwrap();
            let b = z_cross_covariance(d, 2, 1, -tau).unwrap();
            assert!((a - b).abs() < 1e-10, "d={d} tau={tau}");
        }
    }
}

fn small_cfg(seed: u64) -> CalibrationConfig {
    CalibrationConfig {
        replications: 400,
        n_cal: 10_000,
        m_cal: 25,
        seed,
    }
}

#[test]
fn gamma_scalar_at_half() {
    let g = gamma_p(0.5, 1, &small_cfg(1)).unwrap();
    assert!(
        (g[(0, 0)] - 0.2524f64.powi(2)).abs() < 0.01,
        "{}",
        g[(0, 0)]
    );
    let (b, _, _) = bundled_table().unwrap().gamma_interp(1, 0.5).unwrap();
    assert!((b[(0, 0)].sqrt() - 0.2524).abs() < 0.02);
}

#[test]
fn gamma_pair_correlation_below_one() {
    let g = gamma_p(0.0, 2, &small_cfg(2)).unwrap();
    assert!((g[(0, 1)] - g[(1, 0)]).abs() < 1e-15);
    assert!(g[(0, 1)].abs() < (g[(0, 0)] * g[(1, 1)]).sqrt());
    assert!(nalgebra::Cholesky::new(g).is_some());
}

#[test]
fn gamma_rejects_bad_config() {
    assert!(gamma_p(1.3, 2, &small_cfg(0)).is_err());
    let short = CalibrationConfig {
        n_cal: 100,
        ..small_cfg(0)
    };
    assert!(matches!(
        gamma_p(0.0, 2, &short),
        Err(MirError::SeriesTooShort { .. })
    ));
}

fn ratio(a: f64, b: f64) -> f64 {
    (a + b).abs() / (a.abs() + b.abs())
}

/// σ_11(d) by integrating over τ the covariance of the two ratio
/// functionals, each τ estimated by Monte Carlo with common random numbers.
/// Returns the integral and a batch-means standard error.
fn direct_sigma11(d: f64, samples: usize, batches: usize) -> (f64, f64) {
    let mut rng = seeded(99);
    let draws: Vec<Vector4<f64>> = (0..samples)
        .map(|_| Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let c = |s: f64| z_cross_covariance(d, 1, 1, s).unwrap();
    let mut taus = Vec::new();
    let mut t = 0.0;
    while t < 50.0 {
        let h = if t < 3.0 { 0.025 } else { 0.1 };
        taus.push((t, h));
        t += h;
    }
    let per = samples / batches;
    let mut integrals = vec![0.0; batches];
    for (k, &(tau, h)) in taus.iter().enumerate() {
        // points (0, 1, τ, τ + 1)
        let pts = [0.0, 1.0, tau, tau + 1.0];
        let cov = Matrix4::from_fn(|a, b| c(pts[b] - pts[a]));
        let eig = SymmetricEigen::new(cov);
        let root =
            eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let weight = if k == 0 { 0.5 * h } else { h };
        for (b, chunk) in draws.chunks(per).take(batches).enumerate() {
            let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
            for z in chunk {
                let y = root * z;
                let u = ratio(y[0], y[1]);
                let v = ratio(y[2], y[3]);
                s1 += u;
                s2 += v;
                s12 += u * v;
            }
            let n = chunk.len() as f64;
            integrals[b] += 2.0 * weight * (s12 / n - s1 * s2 / (n * n));
        }
    }
    let mean = integrals.iter().sum::<f64>() / batches as f64;
    let var = integrals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[test]
fn direct_integration_oracle() {
    let table = bundled_table().unwrap();
    let r = table.provenance.replications as f64;
    for d in [0.5, 1.0] {
        let (direct, se_direct) = direct_sigma11(d, 40_000, 20);
        let (g, _, _) = table.gamma_interp(1, d).unwrap();
        let path = g[(0, 0)];
        let se_path = path * (2.0 / (r - 1.0)).sqrt();
        let se = (se_direct.powi(2) + se_path.powi(2)).sqrt();
        assert!(
            (direct - path).abs() < 3.0 * se,
            "d={d}: direct {direct:.5} ± {se_direct:.5}, table {path:.5} ± {se_path:.5}"
        );
    }
}

#[test]
fn bundled_table_is_valid() {
    let t = bundled_table().unwrap();
    assert_eq!(t.p, 20);
    assert!(t.covers_default_range());
    assert_eq!(t.d_grid.len(), 34);
    t.validate().unwrap();
}

#[test]
fn sigma_decreases_with_p() {
    let t = bundled_table().unwrap();
    for d in [0.5, 1.0] {
        let s: Vec<f64> = [5, 10, 15, 20]
            .iter()
            .map(|&p| t.sigma_p_of_d(p, d).unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]), "d={d}: {s:?}");
    }
}

#[test]
fn sigma_hat_consistent_and_clamped() {
    let t = bundled_table().unwrap();
    let sh = t.sigma_hat_matrix(0.5, 10).unwrap();
    let (_, precision) = gls_weights(&sh.matrix).unwrap();
    let sd = (1.0 / precision).sqrt();
    assert!((sd - t.sigma_p_of_d(10, 0.5).unwrap()).abs() < 1e-12);
    assert!(!sh.clamped);

    let far = t.sigma_hat_matrix(3.0, 5).unwrap();
    assert!(far.clamped);
    assert_eq!(far.d_used, GRID_MAX);

    let zero = t.sigma_hat_matrix(0.0, 5).unwrap();
    assert!((&zero.matrix - zero.matrix.transpose()).abs().max() < 1e-15);
    assert!(nalgebra::Cholesky::new(zero.matrix).is_some());

    assert!(t.sigma_p_of_d(21, 0.5).is_err());
}

#[test]
fn interpolation_hits_grid_points() {
    let t = bundled_table().unwrap();
    let (g, du, _) = t.gamma_interp(20, 0.25).unwrap();
    assert_eq!(du, 0.25);
    let k = t
        .d_grid
        .iter()
        .position(|&d| (d - 0.25).abs() < 1e-12)
        .unwrap();
    assert_eq!(g, t.gamma_at(k));
}

fn tiny_table() -> SigmaTable {
    let grid = GridSpec {
        start: 0.0,
        step: 0.5,
        end: 1.0,
    };
    let cfg = CalibrationConfig {
        replications: 50,
        n_cal: 2000,
        m_cal: 10,
        seed: 3,
    };
    SigmaTable::build(3, &grid, &cfg).unwrap()
}

#[test]
fn roundtrip_and_tamper() {
    let t = tiny_table();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    t.save(&path).unwrap();
    assert_eq!(SigmaTable::load(&path).unwrap(), t);

    let mut bad = t.clone();
    bad.gamma[1][0] = -1.0;
    assert!(SigmaTable::from_json(&bad.to_json().unwrap()).is_err());
    let mut bad = t.clone();
    bad.sigma[0] *= 1.001;
    assert!(SigmaTable::from_json(&bad.to_json().unwrap()).is_err());
    let mut bad = t;
    bad.d_grid.swap(0, 1);
    assert!(SigmaTable::from_json(&bad.to_json().unwrap()).is_err());
}

#[test]
fn grid_spec_parsing() {
    let g: GridSpec = "-0.45:0.05:1.2".parse().unwrap();
    assert_eq!(g, GridSpec::default());
    assert_eq!(g.points().unwrap().len(), 34);
    assert_eq!(
        "0.5".parse::<GridSpec>().unwrap().points().unwrap(),
        vec![0.5]
    );
    assert!("1:2".parse::<GridSpec>().is_err());
    assert!(GridSpec {
        start: -1.0,
        step: 0.1,
        end: 0.0
    }
    .points()
    .is_err());
}
