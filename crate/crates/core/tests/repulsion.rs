use std::f64::consts::{PI, TAU};

use rand::Rng;

use trigroots::geometry::{condition_t, DEFAULT_TAU};
use trigroots::repulsion::{
    empirical_smallball, fourier_annulus, fourier_decay_target, gaussian_smallball, rademacher_char_product,
    DEFAULT_C0PRIME,
};
use trigroots::{EnsembleSpec, SeedSpec};

/// `Π |cos⟨v_i, x⟩ cos⟨v_i', x⟩|` with `v_i = (cos it, -(i/n) sin it)` and
/// `v_i' = (sin it, (i/n) cos it)`, summed in log space.
fn direct_log_product(t: f64, n: usize, x: (f64, f64)) -> f64 {
    (1..=n)
        .map(|i| {
            let w = i as f64 / n as f64;
            let (s, c) = (i as f64 * t).sin_cos();
            let u = x.0 * c - x.1 * w * s;
            let v = x.0 * s + x.1 * w * c;
            u.cos().abs().ln() + v.cos().abs().ln()
        })
        .sum()
}

#[test]
fn decay_on_the_annulus() {
    let (n, t, tau) = (10_000, 1.0, 1.0 / 64.0);
    assert!(condition_t(t, n, tau, DEFAULT_C0PRIME).unwrap());
    let (r0, r1) = fourier_annulus(n, tau);
    let target = fourier_decay_target(n, tau);
    assert!((target - (-(n as f64).powf(tau)).exp()).abs() < 1e-15);
    let mut rng = SeedSpec::new(77, 0).rng();
    for _ in 0..100 {
        // uniform by area
        let r = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
        let phi = rng.random_range(0.0..TAU);
        let x = (r * phi.cos(), r * phi.sin());
        let c = rademacher_char_product(t, n, x).unwrap();
        let direct = direct_log_product(t, n, x);
        assert!((c.log_product - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        assert!(c.product <= target, "x = {x:?}: {} > {target}", c.product);
        assert!(c.holds);
    }
}

#[test]
fn smallball_oracle_is_monotone() {
    let mut prev = 0.0;
    for k in 1..=20 {
        let a = k as f64 * 0.05;
        let v = gaussian_smallball(1.0, 64, a, 0.3).unwrap();
        assert!(v >= prev);
        prev = v;
    }
    prev = 0.0;
    for k in 1..=20 {
        let b = k as f64 * 0.05;
        let v = gaussian_smallball(1.0, 64, 0.3, b).unwrap();
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn stderr_scales_with_trials() {
    let g = EnsembleSpec::gaussian();
    let a = empirical_smallball(&g, 1.0, 40, 0.3, 0.3, 20_000, 5).unwrap();
    let b = empirical_smallball(&g, 1.0, 40, 0.3, 0.3, 80_000, 5).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn gaussian_ratio_does_not_depend_on_t() {
    let g = EnsembleSpec::gaussian();
    let (n, a) = (60, 0.2);
    let est: Vec<_> = (0..10)
        .map(|i| {
            let t = 0.3 + 0.29 * i as f64;
            empirical_smallball(&g, t, n, a, a, 100_000, 900 + i).unwrap()
        })
        .collect();
    for x in &est {
        for y in &est {
            let se = (x.stderr.powi(2) + y.stderr.powi(2)).sqrt();
            assert!((x.estimate - y.estimate).abs() <= 3.0 * se);
        }
    }
    // the oracle itself is exactly t-free
    let o: Vec<f64> = (0..10).map(|i| gaussian_smallball(0.1 + i as f64, n, a, a).unwrap()).collect();
    assert!(o.iter().all(|v| (v - o[0]).abs() < 1e-12));
}

#[test]
fn resonant_points_fail_the_condition() {
    for n in [100usize, 1000, 10_000] {
        assert!(!condition_t(PI / 2.0, n, DEFAULT_TAU, DEFAULT_C0PRIME).unwrap());
        assert!(!condition_t(PI / 3.0, n, DEFAULT_TAU, DEFAULT_C0PRIME).unwrap());
    }
}
