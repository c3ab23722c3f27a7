//! Coefficient laws and reproducible sampling.
//!
//! Every trial's randomness is a pure function of `(master_seed,
//! trial_index)`: the pair is hashed into a ChaCha8 key, so sweeps produce the
//! same draws however the trials are spread over threads.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::trigpoly::TrigPoly;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A named coefficient law, normalized to mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law {
    Gaussian,
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
    /// Takes `√((1-p)/p)` with probability `p` and `-√(p/(1-p))` otherwise.
    BoundedTwoPoint { p: f64 },
    /// Standard normal conditioned on `|ξ| ≤ c`, rescaled to unit variance.
    TruncatedGaussian { c: f64 },
}

/// A law together with the metadata the concentration results care about.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub law: Law,
    /// `E ξ^4`.
    pub fourth_moment: f64,
    /// Almost-sure bound `C_0` on `|ξ|`, if the law is bounded.
    pub bound: Option<f64>,
    /// Log-Sobolev constant, when one is known: `Ent(f²) ≤ C E|∇f|²`.
    pub lsi_constant: Option<f64>,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Raw second and fourth moments of a standard normal conditioned on `|ξ| ≤ c`.
fn truncated_normal_moments(c: f64) -> (f64, f64) {
    let z = erf(c / SQRT_2);
    let phi = std_normal_pdf(c);
    let m2 = 1.0 - 2.0 * c * phi / z;
    let m4 = 3.0 * m2 - 2.0 * c.powi(3) * phi / z;
    (m2, m4)
}

impl EnsembleSpec {
    pub fn new(law: Law) -> Result<Self> {
        let spec = match law {
            Law::Gaussian => EnsembleSpec {
                law,
                fourth_moment: 3.0,
                bound: None,
                lsi_constant: Some(2.0),
            },
            Law::Rademacher => EnsembleSpec {
                law,
                fourth_moment: 1.0,
                bound: Some(1.0),
                lsi_constant: None,
            },
            Law::Uniform => EnsembleSpec {
                law,
                fourth_moment: 9.0 / 5.0,
                bound: Some(SQRT_3),
                lsi_constant: None,
            },
            Law::BoundedTwoPoint { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::EnsembleParameter(format!(
                        "two-point probability {p} must lie in (0, 1)"
                    )));
                }
                let q = 1.0 - p;
                EnsembleSpec {
                    law,
                    fourth_moment: (q.powi(3) + p.powi(3)) / (p * q),
                    bound: Some((q / p).sqrt().max((p / q).sqrt())),
                    lsi_constant: None,
                }
            }
            Law::TruncatedGaussian { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::EnsembleParameter(format!(
                        "truncation level {c} must be positive and finite"
                    )));
                }
                let (m2, m4) = truncated_normal_moments(c);
                EnsembleSpec {
                    law,
                    fourth_moment: m4 / (m2 * m2),
                    bound: Some(c / m2.sqrt()),
                    // Bakry-Emery on the convex truncation, then rescaling.
                    lsi_constant: Some(2.0 / m2),
                }
            }
        };
        Ok(spec)
    }

    pub fn gaussian() -> Self {
        Self::new(Law::Gaussian).expect("gaussian")
    }

    pub fn rademacher() -> Self {
        Self::new(Law::Rademacher).expect("rademacher")
    }

    pub fn uniform() -> Self {
        Self::new(Law::Uniform).expect("uniform")
    }

    pub fn is_bounded(&self) -> bool {
        self.bound.is_some()
    }

    pub fn satisfies_lsi(&self) -> bool {
        self.lsi_constant.is_some()
    }

    /// `E ξ^4 - 3`, the quantity that shifts the variance of the root count.
    pub fn excess_fourth_moment(&self) -> f64 {
        self.fourth_moment - 3.0
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// One draw of `ξ`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            Law::Gaussian => rng.sample(StandardNormal),
            Law::Rademacher => {
                if rng.next_u32() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Law::Uniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            Law::BoundedTwoPoint { p } => {
                if rng.random::<f64>() < p {
                    ((1.0 - p) / p).sqrt()
                } else {
                    -(p / (1.0 - p)).sqrt()
                }
            }
            Law::TruncatedGaussian { c } => {
                let (m2, _) = truncated_normal_moments(c);
                truncated_draw(rng, c) / m2.sqrt()
            }
        }
    }

    /// Fills `out` with i.i.d. draws. Rademacher uses 64 draws per word.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.law {
            Law::Rademacher => {
                for chunk in out.chunks_mut(64) {
                    let bits = rng.next_u64();
                    for (i, v) in chunk.iter_mut().enumerate() {
                        *v = if (bits >> i) & 1 == 0 { 1.0 } else { -1.0 };
                    }
                }
            }
            Law::TruncatedGaussian { c } => {
                let s = 1.0 / truncated_normal_moments(c).0.sqrt();
                for v in out.iter_mut() {
                    *v = truncated_draw(rng, c) * s;
                }
            }
            _ => {
                for v in out.iter_mut() {
                    *v = self.draw(rng);
                }
            }
        }
    }
}

fn truncated_draw<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    if c >= 1.0 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x.abs() <= c {
                return x;
            }
        }
    } else {
        loop {
            let x = c * (2.0 * rng.random::<f64>() - 1.0);
            if rng.random::<f64>() <= (-0.5 * x * x).exp() {
                return x;
            }
        }
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.law {
            Law::Gaussian => write!(f, "gaussian"),
            Law::Rademacher => write!(f, "rademacher"),
            Law::Uniform => write!(f, "uniform"),
            Law::BoundedTwoPoint { p } => write!(f, "bounded_two_point({p})"),
            Law::TruncatedGaussian { c } => write!(f, "truncated_gaussian({c})"),
        }
    }
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    /// Parses `name` or `name(param)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::UnknownEnsemble(s.to_string()))?;
                let v: f64 = inner.trim().parse().map_err(|_| {
                    Error::EnsembleParameter(format!("`{inner}` is not a number"))
                })?;
                (s[..i].trim(), Some(v))
            }
            None => (s, None),
        };
        let law = match (name.to_ascii_lowercase().as_str(), param) {
            ("gaussian", None) => Law::Gaussian,
            ("rademacher", None) => Law::Rademacher,
            ("uniform", None) => Law::Uniform,
            ("bounded_two_point", Some(p)) => Law::BoundedTwoPoint { p },
            ("truncated_gaussian", Some(c)) => Law::TruncatedGaussian { c },
            ("bounded_two_point" | "truncated_gaussian", None) => {
                return Err(Error::EnsembleParameter(format!("`{name}` needs a parameter")))
            }
            ("gaussian" | "rademacher" | "uniform", Some(_)) => {
                return Err(Error::EnsembleParameter(format!("`{name}` takes no parameter")))
            }
            _ => return Err(Error::UnknownEnsemble(s.to_string())),
        };
        EnsembleSpec::new(law)
    }
}

impl Serialize for EnsembleSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnsembleSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifies the random stream of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        SeedSpec {
            master_seed,
            trial_index,
        }
    }

    /// 256-bit key derived by hashing the pair.
    pub fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.master_seed) ^ splitmix64(self.trial_index ^ 0x5851_F42D_4C95_7F2D);
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}

/// `2n` i.i.d. draws fill `a_1..a_n` and then `b_1..b_n`.
pub fn sample_poly(spec: &EnsembleSpec, n: usize, seed: SeedSpec) -> Result<TrigPoly> {
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    let mut rng = seed.rng();
    let mut buf = vec![0.0; 2 * n];
    spec.fill(&mut rng, &mut buf);
    let sin = buf.split_off(n);
    TrigPoly::new(buf, sin)
}

/// Monte Carlo moment estimates with normal-approximation standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub draws: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// Raw fourth moment `E ξ^4`.
    pub fourth_moment: f64,
    pub fourth_moment_se: f64,
    /// Standardized kurtosis `E(ξ-μ)^4 / σ^4`.
    pub kurtosis: f64,
}

pub const MIN_MOMENT_DRAWS: u64 = 10_000;

pub fn moment_report(spec: &EnsembleSpec, draws: u64, master_seed: u64) -> Result<MomentReport> {
    if draws < MIN_MOMENT_DRAWS {
        return Err(Error::Parameter(format!(
            "moment report needs at least {MIN_MOMENT_DRAWS} draws, got {draws}"
        )));
    }
    let mut rng = SeedSpec::new(master_seed, u64::MAX).rng();
    let mut xs = vec![0.0; draws as usize];
    spec.fill(&mut rng, &mut xs);
    let t = draws as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let (mut c2, mut c4) = (0.0, 0.0);
    let (mut r4, mut r8) = (0.0, 0.0);
    for &x in &xs {
        let d = x - mean;
        let d2 = d * d;
        c2 += d2;
        c4 += d2 * d2;
        let x4 = (x * x) * (x * x);
        r4 += x4;
        r8 += x4 * x4;
    }
    let variance = c2 / (t - 1.0);
    let m2 = c2 / t;
    let m4c = c4 / t;
    let fourth = r4 / t;
    let fourth_var = (r8 / t - fourth * fourth).max(0.0);
    Ok(MomentReport {
        draws,
        mean,
        mean_se: (variance / t).sqrt(),
        variance,
        variance_se: ((m4c - m2 * m2).max(0.0) / t).sqrt(),
        fourth_moment: fourth,
        fourth_moment_se: (fourth_var / t).sqrt(),
        kurtosis: m4c / (m2 * m2),
    })
}

/// Empirical registration check: `|mean| ≤ 4/√T` and `|var - 1| ≤ 8/√T`.
pub fn check_moments(spec: &EnsembleSpec, draws: u64, master_seed: u64) -> Result<MomentReport> {
    let r = moment_report(spec, draws, master_seed)?;
    let root_t = (draws as f64).sqrt();
    if r.mean.abs() > 4.0 / root_t || (r.variance - 1.0).abs() > 8.0 / root_t {
        return Err(Error::EnsembleParameter(format!(
            "{spec}: sample mean {} and variance {} inconsistent with a standardized law",
            r.mean, r.variance
        )));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in [
            "gaussian",
            "rademacher",
            "uniform",
            "bounded_two_point(0.25)",
            "truncated_gaussian(2.5)",
        ] {
            let e: EnsembleSpec = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!(matches!("cauchy".parse::<EnsembleSpec>(), Err(Error::UnknownEnsemble(_))));
        assert!("bounded_two_point".parse::<EnsembleSpec>().is_err());
        assert!("bounded_two_point(1.5)".parse::<EnsembleSpec>().is_err());
        assert!("gaussian(2)".parse::<EnsembleSpec>().is_err());
        assert!("truncated_gaussian(-1)".parse::<EnsembleSpec>().is_err());
    }

    #[test]
    fn analytic_fourth_moments() {
        assert_eq!(EnsembleSpec::gaussian().fourth_moment, 3.0);
        assert_eq!(EnsembleSpec::rademacher().fourth_moment, 1.0);
        assert_eq!(EnsembleSpec::uniform().fourth_moment, 1.8);
        let half: EnsembleSpec = "bounded_two_point(0.5)".parse().unwrap();
        assert!((half.fourth_moment - 1.0).abs() < 1e-15);
        assert_eq!(half.bound, Some(1.0));
        // Wide truncation is nearly Gaussian.
        let wide: EnsembleSpec = "truncated_gaussian(8)".parse().unwrap();
        assert!((wide.fourth_moment - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = EnsembleSpec::gaussian();
        let a = sample_poly(&g, 17, SeedSpec::new(3, 9)).unwrap();
        let b = sample_poly(&g, 17, SeedSpec::new(3, 9)).unwrap();
        let c = sample_poly(&g, 17, SeedSpec::new(3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_poly(&g, 0, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn rademacher_support() {
        let r = EnsembleSpec::rademacher();
        let p = sample_poly(&r, 1000, SeedSpec::new(1, 2)).unwrap();
        assert!(p
            .cos_coeffs()
            .iter()
            .chain(p.sin_coeffs())
            .all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn bounded_laws_respect_their_bound() {
        for s in ["uniform", "bounded_two_point(0.2)", "truncated_gaussian(1.5)", "truncated_gaussian(0.5)"] {
            let e: EnsembleSpec = s.parse().unwrap();
            let c0 = e.bound.unwrap();
            let p = sample_poly(&e, 5000, SeedSpec::new(4, 4)).unwrap();
            assert!(p.cos_coeffs().iter().chain(p.sin_coeffs()).all(|x| x.abs() <= c0));
        }
    }

    #[test]
    fn gaussian_sample_variance() {
        let g = EnsembleSpec::gaussian();
        let p = sample_poly(&g, 10_000, SeedSpec::new(77, 0)).unwrap();
        let xs: Vec<f64> = p.cos_coeffs().iter().chain(p.sin_coeffs()).copied().collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((0.95..=1.05).contains(&v), "variance {v}");
    }

    #[test]
    fn moment_reports() {
        let r = moment_report(&EnsembleSpec::rademacher(), 100_000, 5).unwrap();
        assert_eq!(r.fourth_moment, 1.0);
        let t = 1_000_000u64;
        let g = moment_report(&EnsembleSpec::gaussian(), t, 6).unwrap();
        assert!((g.fourth_moment - 3.0).abs() <= 5.0 * (96.0 / t as f64).sqrt());
        let u = moment_report(&EnsembleSpec::uniform(), t, 7).unwrap();
        assert!((u.fourth_moment - 1.8).abs() <= 3.0 * u.fourth_moment_se);
        assert!(moment_report(&EnsembleSpec::uniform(), 10, 7).is_err());
    }

    #[test]
    fn registration_check_for_every_family() {
        for s in [
            "gaussian",
            "rademacher",
            "uniform",
            "bounded_two_point(0.3)",
            "truncated_gaussian(1.2)",
            "truncated_gaussian(0.4)",
        ] {
            let e: EnsembleSpec = s.parse().unwrap();
            let r = check_moments(&e, 1_000_000, 12).unwrap();
            assert!((r.fourth_moment - e.fourth_moment).abs() <= 5.0 * r.fourth_moment_se, "{s}");
        }
    }

    #[test]
    fn seed_keys_differ_across_pairs() {
        let a = SeedSpec::new(1, 2).key();
        let b = SeedSpec::new(2, 1).key();
        let c = SeedSpec::new(1, 3).key();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, SeedSpec::new(1, 2).key());
    }
}
