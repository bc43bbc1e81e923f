#![allow(clippy::needless_range_loop)]

use super::*;
use crate::rng::substream;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[test]
fn white_noise_fgn() {
    let g = autocov(&ProcessSpec::new(Family::Fgn, 0.0, 10), 5)
        .unwrap()
        .gamma;
    assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn arfima_variance() {
    let g = autocov(&ProcessSpec::arfima(0.2, 10), 3).unwrap().gamma;
    let expected = gamma(0.6) / gamma(0.8).powi(2);
    assert!((g[0] - expected).abs() < 1e-12);
    assert!((g[0] - 1.0987).abs() < 1e-4);
    // ρ(1) = d / (1 - d)
    assert!((g[1] / g[0] - 0.25).abs() < 1e-12);
}

#[test]
fn arma_part_matches_closed_form() {
    // AR(1): γ(h) = φ^h / (1 - φ²)
    let g = arma_autocov(&[0.6], &[]);
    for h in 0..10 {
        assert!((g[h] - 0.6f64.powi(h as i32) / (1.0 - 0.36)).abs() < 1e-12);
    }
    // MA(1): (1 + θ², θ, 0, ...)
    let g = arma_autocov(&[], &[0.4]);
    assert!((g[0] - 1.16).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    assert!(g.iter().skip(2).all(|v| *v == 0.0));
}

#[test]
fn arfima_with_d_zero_is_arma() {
    let spec = ProcessSpec::arfima(0.0, 10).with_arma(vec![0.5], vec![0.3]);
    let g = autocov(&spec, 6).unwrap().gamma;
    let a = arma_autocov(&[0.5], &[0.3]);
    for k in 0..6 {
        assert!((g[k] - a[k]).abs() < 1e-12);
    }
}

// Independent check of the convolution route: direct quadrature of
// (1/π) ∫_0^π |θ|²/|φ|² |2 sin(λ/2)|^{-2d} cos(kλ) dλ.
#[test]
fn arfima_convolution_matches_spectral_quadrature() {
    let (d, phi, theta) = (0.3, 0.5, -0.2);
    let spec = ProcessSpec::arfima(d, 10).with_arma(vec![phi], vec![theta]);
    let g = autocov(&spec, 8).unwrap().gamma;
    let density = |l: f64| {
        let num = 1.0 + theta * theta + 2.0 * theta * l.cos();
        let den = 1.0 + phi * phi - 2.0 * phi * l.cos();
        num / den * (2.0 * (l / 2.0).sin()).powf(-2.0 * d)
    };
    let q = crate::process::autocov::spectral_autocov(d, 8, &[], density).unwrap();
    for k in 0..8 {
        assert!(
            (g[k] - q[k]).abs() < 1e-7 * g[0],
            "lag {k}: {} vs {}",
            g[k],
            q[k]
        );
    }
}

/// ∫_0^π λ^{-a} cos(kλ) dλ by rotating the contour onto two vertical rays:
/// Γ(1-a) sin(πa/2) k^{a-1} - Re[i e^{ikπ} ∫_0^∞ (π + it)^{-a} e^{-kt} dt].
fn power_cos_integral(a: f64, k: usize) -> f64 {
    let kf = k as f64;
    if k == 0 {
        return PI.powf(1.0 - a) / (1.0 - a);
    }
    let head = gamma(1.0 - a) * (PI * a / 2.0).sin() * kf.powf(a - 1.0);
    // ∫_0^∞ (π + it)^{-a} e^{-kt} dt, substituting t = s / k, on a
    // truncated range with composite Gauss–Legendre
    let gl = crate::quadrature::GaussLegendre::new(24);
    let mut im = 0.0;
    let upper = 60.0;
    let pieces = 240;
    for p in 0..pieces {
        let lo = upper * p as f64 / pieces as f64;
        let hi = upper * (p + 1) as f64 / pieces as f64;
        im += gl.integrate(lo, hi, |s| {
            let t = s / kf;
            let (r, th) = ((PI * PI + t * t).sqrt(), (t / PI).atan());
            r.powf(-a) * (-a * th).sin() * (-s).exp() / kf
        });
    }
    // only the imaginary part survives: Re[i e^{ikπ} (re + i im)] = -(-1)^k im
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    head + sign * im
}

#[test]
fn pure_power_quadrature_matches_contour_formula() {
    for d in [-0.3, 0.0, 0.2, 0.45] {
        let spec = ProcessSpec {
            c1: 0.0,
            ..ProcessSpec::new(Family::SpectralF3, d, 10)
        };
        let g = autocov(&spec, 51).unwrap().gamma;
        for k in [0usize, 1, 2, 3, 7, 20, 50] {
            let oracle = power_cos_integral(2.0 * d, k) / PI;
            let scale = g[0].abs();
            assert!(
                (g[k] - oracle).abs() < 1e-8 * scale,
                "d = {d}, k = {k}: {} vs {}",
                g[k],
                oracle
            );
        }
    }
}

#[test]
fn f3_without_extra_term_is_proportional_to_power_law() {
    let d = 0.2;
    let spec = ProcessSpec::new(Family::SpectralF3, d, 10);
    let g = autocov(&spec, 51).unwrap().gamma;
    let ratio0 = g[0] / power_cos_integral(2.0 * d, 0);
    for k in 1..=50 {
        let r = g[k] / power_cos_integral(2.0 * d, k);
        assert!((r - ratio0).abs() < 1e-4 * ratio0.abs());
    }
}

#[test]
fn f3_extra_term_is_sum_of_two_powers() {
    let (d, c1, beta) = (0.3, 2.0, 0.5);
    let spec = ProcessSpec {
        c1,
        beta,
        ..ProcessSpec::new(Family::SpectralF3, d, 10)
    };
    let g = autocov(&spec, 21).unwrap().gamma;
    for k in [0usize, 1, 5, 20] {
        let oracle =
            (power_cos_integral(2.0 * d, k) + c1 * power_cos_integral(2.0 * d - beta, k)) / PI;
        assert!((g[k] - oracle).abs() < 1e-7 * g[0], "k = {k}");
    }
}

#[test]
fn f4_agrees_with_refined_quadrature() {
    let d = 0.25;
    let spec = ProcessSpec::new(Family::SpectralF4, d, 10);
    let g = autocov(&spec, 12).unwrap().gamma;
    // brute force: many small panels, pole handled by the same substitution
    let gl = crate::quadrature::GaussLegendre::new(40);
    let f = |l: f64| l.powf(-2.0 * d) * (1.0 + l.ln().abs() * l);
    for k in [0usize, 1, 3, 11] {
        let r = 4.0 / (1.0 - 2.0 * d);
        let a0 = 1e-3;
        let mut v = gl.integrate(0.0, 1.0, |u| {
            let l = a0 * u.powf(r);
            f(l) * (k as f64 * l).cos() * a0 * r * u.powf(r - 1.0)
        });
        let mut edges = vec![a0];
        let m = 4000;
        for j in 1..=m {
            edges.push(a0 + (1.0 - a0) * j as f64 / m as f64);
        }
        for j in 1..=m {
            edges.push(1.0 + (PI - 1.0) * j as f64 / m as f64);
        }
        for w in edges.windows(2) {
            v += gl.integrate(w[0], w[1], |l| f(l) * (k as f64 * l).cos());
        }
        v /= PI;
        assert!((g[k] - v).abs() < 1e-8 * g[0], "k = {k}: {} vs {v}", g[k]);
    }
}

#[test]
fn autocov_bounded_by_variance() {
    let specs = [
        ProcessSpec::new(Family::Fgn, 0.3, 10),
        ProcessSpec::arfima(-0.3, 10),
        ProcessSpec::arfima(0.4, 10).with_arma(vec![-0.5], vec![0.2]),
        ProcessSpec::new(Family::SpectralF4, 0.1, 10),
    ];
    for s in specs {
        let g = autocov(&s, 200).unwrap().gamma;
        assert!(g[0] > 0.0);
        assert!(g.iter().all(|v| v.abs() <= g[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn validation() {
    assert!(ProcessSpec::arfima(1.6, 10).validate().is_err());
    assert!(ProcessSpec::arfima(-0.5, 10).validate().is_err());
    assert!(ProcessSpec::new(Family::Fgn, 0.5, 10).validate().is_err());
    assert!(ProcessSpec::arfima(0.2, 10)
        .with_arma(vec![1.0], vec![])
        .validate()
        .is_err());
    assert!(ProcessSpec::arfima(0.2, 10)
        .with_arma(vec![0.5, 0.6], vec![])
        .validate()
        .is_err());
    assert!(ProcessSpec::arfima(0.2, 10)
        .with_arma(vec![1.2, -0.5], vec![])
        .validate()
        .is_ok());
    assert!(ProcessSpec::new(Family::Fgn, 0.2, 10)
        .with_arma(vec![0.1], vec![])
        .validate()
        .is_err());
    assert!(ProcessSpec::arfima(0.2, 0).validate().is_err());
}

#[test]
fn step_down_matches_roots() {
    assert!(ar_is_stationary(&[]));
    assert!(ar_is_stationary(&[0.9]));
    assert!(!ar_is_stationary(&[-1.0]));
    // (1 - 0.5z)(1 - 0.8z) = 1 - 1.3z + 0.4z²
    assert!(ar_is_stationary(&[1.3, -0.4]));
    // (1 - 0.5z)(1 - 1.25z) = 1 - 1.75z + 0.625z²
    assert!(!ar_is_stationary(&[1.75, -0.625]));
}

#[test]
fn deterministic_generation() {
    let spec = ProcessSpec::arfima(0.4, 1000).with_seed(42);
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.values(), b.values());
    let c = generate(&spec.clone().with_seed(43)).unwrap();
    assert_ne!(a.values(), c.values());
}

#[test]
fn eigenvalues_nonnegative_for_shipped_families() {
    let specs = [
        ProcessSpec::new(Family::Fgn, 0.45, 5000),
        ProcessSpec::new(Family::Fgn, -0.45, 5000),
        ProcessSpec::arfima(0.45, 5000),
        ProcessSpec::arfima(-0.45, 5000),
        ProcessSpec::arfima(1.2, 5000),
        ProcessSpec::arfima(0.3, 5000).with_arma(vec![-0.9], vec![]),
        ProcessSpec::arfima(0.3, 5000).with_arma(vec![0.9], vec![]),
        ProcessSpec::arfima(0.3, 5000).with_arma(vec![-0.3], vec![0.7]),
        ProcessSpec {
            c1: 1.0,
            beta: 0.1,
            ..ProcessSpec::new(Family::SpectralF3, 0.4, 2000)
        },
        ProcessSpec::new(Family::SpectralF4, 0.4, 2000),
        ProcessSpec::new(Family::SpectralF4, 1.2, 2000),
    ];
    for s in &specs {
        let sampler = CirculantSampler::new(&{
            let mut t = s.clone();
            if t.family == Family::Trend {
                t.family = Family::Arfima;
            }
            t
        })
        .unwrap();
        assert!(sampler.min_relative_eigenvalue() >= -1e-8, "{s:?}");
    }
}

fn sample_autocov(x: &[f64], k: usize) -> f64 {
    // known zero mean
    let n = x.len();
    x[..n - k]
        .iter()
        .zip(&x[k..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / (n - k) as f64
}

#[test]
fn fgn_autocovariance_within_four_standard_errors() {
    let n = 1 << 14;
    let reps = 500;
    let spec = ProcessSpec::new(Family::Fgn, 0.2, n);
    let sim = Simulator::new(&spec).unwrap();
    let theory = fgn_autocov(0.7, 21);
    let mut draws = vec![Vec::new(); 21];
    for r in 0..reps {
        let x = sim.sample(&mut substream(7, "fgn-acf", r as u64));
        for k in 0..=20 {
            draws[k].push(sample_autocov(&x, k));
        }
    }
    for k in 0..=20 {
        let m = draws[k].iter().sum::<f64>() / reps as f64;
        let v = draws[k].iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (v / reps as f64).sqrt();
        assert!(
            (m - theory[k]).abs() < 4.0 * se,
            "lag {k}: {m} vs {} (se {se})",
            theory[k]
        );
    }
}

fn ks_against_normal(mut z: Vec<f64>) -> f64 {
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = z.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, v) in z.iter().enumerate() {
        let f = crate::normal::normal_cdf(*v);
        dmax = dmax
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    // asymptotic Kolmogorov p-value
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * dmax;
    let mut p = 0.0;
    for j in 1..100 {
        let j = j as f64;
        p += 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * t * t).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn marginals_are_standard_normal() {
    // one coordinate per independent path keeps the sample i.i.d.
    for spec in [
        ProcessSpec::new(Family::Fgn, 0.3, 64),
        ProcessSpec::arfima(0.3, 64),
    ] {
        let sim = Simulator::new(&spec).unwrap();
        let sd = autocov(&spec, 1).unwrap().gamma[0].sqrt();
        let z: Vec<f64> = (0..10_000)
            .map(|r| sim.sample(&mut substream(3, "ks", r))[17] / sd)
            .collect();
        let p = ks_against_normal(z);
        assert!(p > 0.01, "{spec:?}: p = {p}");
    }
}

#[test]
fn differenced_integrated_path_matches_increment_law() {
    let reps = 400;
    let n = 2000;
    let sim = Simulator::new(&ProcessSpec::arfima(0.8, n)).unwrap();
    let theory = arfima0_autocov(-0.2, 4);
    for k in 0..4 {
        let draws: Vec<f64> = (0..reps)
            .map(|r| {
                let x = sim.sample(&mut substream(9, "cum", r));
                let mut dx = vec![x[0]];
                dx.extend(x.windows(2).map(|w| w[1] - w[0]));
                sample_autocov(&dx, k)
            })
            .collect();
        let m = draws.iter().sum::<f64>() / reps as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(
            (m - theory[k]).abs() < 4.0 * (v / reps as f64).sqrt(),
            "lag {k}"
        );
    }
}

#[test]
fn trend_mean_is_sine() {
    let n = 200;
    let spec = ProcessSpec::new(Family::Trend, 0.4, n);
    let sim = Simulator::new(&spec).unwrap();
    let mut mean = vec![0.0; n];
    // the noise sd reaches about 1.9 at t = n, so 2000 draws leave a
    // pointwise error near 0.04; 20000 keep the sup-norm well under 0.05
    let reps = 20_000;
    for r in 0..reps {
        for (m, v) in mean
            .iter_mut()
            .zip(sim.sample(&mut substream(5, "trend", r)))
        {
            *m += v / reps as f64;
        }
    }
    let sup = mean
        .iter()
        .enumerate()
        .map(|(i, m)| (m - (2.0 * PI * (i + 1) as f64 / n as f64).sin()).abs())
        .fold(0.0, f64::max);
    assert!(sup < 0.05, "sup-norm {sup}");
}
