//! Small-ball behaviour of `(P_n(t), P_n'(t)/n)` at a fixed angle: the exact
//! covariance, the Gaussian closed form, Monte Carlo estimates for any
//! ensemble, and the Rademacher characteristic function with its
//! `ξ`-norm bound.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::ensembles::{EnsembleSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::geometry::{condition_t, DEFAULT_TAU};
use crate::trigpoly::CompensatedSum;

/// Default `C0'` for the condition on `t`.
pub const DEFAULT_C0PRIME: f64 = 10.0;

const COV_TOL: f64 = 1e-12;

/// Law of `(P_n(t), P_n'(t)/n)` for unit-variance coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLaw2 {
    pub t: f64,
    pub n: usize,
    pub cov: [[f64; 2]; 2],
}

impl JointLaw2 {
    /// Standard deviation of `P_n'(t)/n`.
    pub fn slope_sd(&self) -> f64 {
        self.cov[1][1].sqrt()
    }
}

/// `(n+1)(2n+1)/(6n²)`.
pub fn slope_variance(n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0) * (2.0 * n + 1.0) / (6.0 * n * n)
}

/// Sums the covariance entries term by term and checks them against the
/// identities `cov00 = 1`, `cov01 = 0`, `cov11 = (n+1)(2n+1)/(6n²)`.
pub fn joint_covariance(t: f64, n: usize) -> Result<JointLaw2> {
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    let nf = n as f64;
    let (mut c00, mut c01, mut c11) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    for k in 1..=n {
        let (s, c) = (k as f64 * t).sin_cos();
        let w = k as f64 / nf;
        // P = n^{-1/2} Σ a c + b s, P'/n = n^{-1/2} Σ w (b c - a s)
        c00.add(c * c + s * s);
        c01.add(c * (-w * s) + s * (w * c));
        c11.add(w * w * (s * s + c * c));
    }
    let cov00 = c00.total() / nf;
    let cov01 = c01.total() / nf;
    let cov11 = c11.total() / nf;
    let want = slope_variance(n);
    if (cov00 - 1.0).abs() > COV_TOL || cov01.abs() > COV_TOL || (cov11 - want).abs() > COV_TOL * want {
        return Err(Error::CovarianceDrift(format!(
            "t = {t}, n = {n}: got ({cov00}, {cov01}, {cov11}), expected (1, 0, {want})"
        )));
    }
    Ok(JointLaw2 {
        t,
        n,
        cov: [[cov00, cov01], [cov01, cov11]],
    })
}

/// `P(|P_n(t)| ≤ α, |P_n'(t)| ≤ βn)` for Gaussian coefficients.
pub fn gaussian_smallball(t: f64, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Parameter("α and β must be positive".into()));
    }
    let law = joint_covariance(t, n)?;
    Ok(erf(alpha / SQRT_2) * erf(beta / (law.slope_sd() * SQRT_2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub trials: u64,
    /// Whether `t` passes the Diophantine condition (with the default
    /// `τ` and `C0'`); estimates are still produced when it fails.
    pub condition_t: bool,
    /// `α > 1/n` and `β > 1/n`.
    pub in_regime: bool,
}

impl SmallBallEstimate {
    pub fn ratio_to_alphabeta(&self, alpha: f64, beta: f64) -> f64 {
        self.estimate / (alpha * beta)
    }
}

/// Frequency of `|P_n(t)| ≤ α, |P_n'(t)| ≤ βn` over `trials` polynomials
/// drawn with [`SeedSpec`] `(seed, i)`, `i = 0..trials`; the coefficients of
/// trial `i` are those of `sample_poly(spec, n, (seed, i))`.
pub fn empirical_smallball(
    spec: &EnsembleSpec,
    t: f64,
    n: usize,
    alpha: f64,
    beta: f64,
    trials: u64,
    seed: u64,
) -> Result<SmallBallEstimate> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::Parameter("α and β must be nonnegative".into()));
    }
    let nf = n as f64;
    let scale = 1.0 / nf.sqrt();
    let (cs, ss): (Vec<f64>, Vec<f64>) = (1..=n).map(|k| (k as f64 * t).sin_cos()).map(|(s, c)| (c, s)).unzip();
    let slope_cap = beta * nf;
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; 2 * n];
            let mut hits = 0u64;
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = SeedSpec::new(seed, i).rng();
                spec.fill(&mut rng, &mut buf);
                let (a, b) = buf.split_at(n);
                let (mut v, mut d) = (0.0, 0.0);
                for k in 0..n {
                    v += a[k] * cs[k] + b[k] * ss[k];
                    d += (k + 1) as f64 * (b[k] * cs[k] - a[k] * ss[k]);
                }
                if (v * scale).abs() <= alpha && (d * scale).abs() <= slope_cap {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(SmallBallEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        hits,
        trials,
        condition_t: condition_t(t, n, DEFAULT_TAU, DEFAULT_C0PRIME)?,
        in_regime: alpha > 1.0 / nf && beta > 1.0 / nf,
    })
}

/// `|Π cos⟨v_i, x⟩ cos⟨v_i', x⟩|` against `exp(-Σ (‖⟨v_i, x/2π⟩‖_ξ² +
/// ‖⟨v_i', x/2π⟩‖_ξ²)/2)` with `‖w‖_ξ² = ‖2w‖²_{ℝ/ℤ}/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharProduct {
    pub product: f64,
    pub bound: f64,
    pub log_product: f64,
    pub log_bound: f64,
    pub holds: bool,
}

pub fn rademacher_char_product(t: f64, n: usize, x: (f64, f64)) -> Result<CharProduct> {
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    let nf = n as f64;
    let mut log_product = 0.0;
    let mut exponent = 0.0;
    let frac = |y: f64| (y - y.round()).abs();
    for i in 1..=n {
        let (s, c) = (i as f64 * t).sin_cos();
        let w = i as f64 / nf;
        let th = x.0 * c - x.1 * w * s;
        let th2 = x.0 * s + x.1 * w * c;
        log_product += th.cos().abs().ln() + th2.cos().abs().ln();
        exponent += frac(th / PI).powi(2) + frac(th2 / PI).powi(2);
    }
    let log_bound = -exponent / 4.0;
    let product = log_product.exp();
    let bound = log_bound.exp();
    Ok(CharProduct {
        product,
        bound,
        log_product,
        log_bound,
        holds: product <= bound + 1e-12 && log_product <= log_bound + 1e-9,
    })
}

/// Radii `n^{5τ-1/2} ≤ ‖x‖ ≤ n^{1-8τ}` where the product should fall below
/// `e^{-n^τ}` for large `n`.
pub fn fourier_annulus(n: usize, tau: f64) -> (f64, f64) {
    let nf = n as f64;
    (nf.powf(5.0 * tau - 0.5), nf.powf(1.0 - 8.0 * tau))
}

pub fn fourier_decay_target(n: usize, tau: f64) -> f64 {
    (-(n as f64).powf(tau)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_poly;

    #[test]
    fn covariance_identities() {
        let law = joint_covariance(0.7, 3).unwrap();
        assert_eq!(law.cov[0][1], law.cov[1][0]);
        assert!(law.cov[0][1].abs() < 1e-15);
        assert!((law.cov[1][1] - 14.0 / 27.0).abs() < 1e-15);
        let big = joint_covariance(2.1, 100_000).unwrap();
        assert!((big.cov[1][1] - 1.0 / 3.0).abs() < 1e-4);
        for &(t, n) in &[(0.0, 5), (PI, 17), (-1.3, 1000), (123.4, 77)] {
            assert!(joint_covariance(t, n).is_ok());
        }
    }

    #[test]
    fn smallball_limits() {
        let big = gaussian_smallball(1.0, 50, 40.0, 40.0).unwrap();
        assert!((big - 1.0).abs() < 1e-12);
        let n = 1_000_000;
        let a = 1e-4;
        let r = gaussian_smallball(1.0, n, a, a).unwrap() / (a * a);
        assert!((r - 2.0 * 3f64.sqrt() / PI).abs() < 1e-5);
        assert!(gaussian_smallball(1.0, 10, 0.0, 0.1).is_err());
    }

    #[test]
    fn smallball_matches_sampled_polys() {
        let spec = EnsembleSpec::rademacher();
        let (n, t, a, b) = (12, 0.9, 0.5, 0.4);
        let est = empirical_smallball(&spec, t, n, a, b, 300, 11).unwrap();
        let mut hits = 0;
        for i in 0..300 {
            let p = sample_poly(&spec, n, SeedSpec::new(11, i)).unwrap();
            let j = p.eval_jet(t);
            if j.value.abs() <= a && j.d1.abs() <= b * n as f64 {
                hits += 1;
            }
        }
        assert_eq!(est.hits, hits);
    }

    #[test]
    fn smallball_gaussian_oracle() {
        let spec = EnsembleSpec::gaussian();
        let (n, t, a, b) = (40, 1.0, 0.3, 0.3);
        let est = empirical_smallball(&spec, t, n, a, b, 200_000, 3).unwrap();
        let want = gaussian_smallball(t, n, a, b).unwrap();
        assert!((est.estimate - want).abs() < 4.0 * est.stderr, "{est:?} vs {want}");
        assert!(est.condition_t && est.in_regime);
    }

    #[test]
    fn smallball_zero_alpha() {
        let est = empirical_smallball(&EnsembleSpec::gaussian(), 1.0, 20, 0.0, 0.5, 1000, 1).unwrap();
        assert_eq!(est.hits, 0);
        assert!(empirical_smallball(&EnsembleSpec::gaussian(), 1.0, 20, 0.1, 0.5, 0, 1).is_err());
    }

    #[test]
    fn resonant_t_flagged() {
        let est = empirical_smallball(&EnsembleSpec::rademacher(), PI / 2.0, 20, 0.1, 0.1, 10, 1).unwrap();
        assert!(!est.condition_t);
    }

    #[test]
    fn char_product_origin() {
        let c = rademacher_char_product(1.0, 50, (0.0, 0.0)).unwrap();
        assert_eq!(c.product, 1.0);
        assert_eq!(c.bound, 1.0);
        assert!(c.holds);
    }

    #[test]
    fn char_product_direct() {
        let (t, n, x) = (0.8, 9, (0.7, -1.9));
        let c = rademacher_char_product(t, n, x).unwrap();
        let mut prod = 1.0;
        for i in 1..=n {
            let it = i as f64 * t;
            let w = i as f64 / n as f64;
            prod *= (x.0 * it.cos() - x.1 * w * it.sin()).cos();
            prod *= (x.0 * it.sin() + x.1 * w * it.cos()).cos();
        }
        assert!((c.product - prod.abs()).abs() < 1e-13);
        assert!(c.holds);
    }
}
