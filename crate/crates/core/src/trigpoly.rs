//! Real trigonometric polynomials
//!
//! ```text
//!     P(x) = n^{-1/2} Σ_{k=1..n} a_k cos(kx) + b_k sin(kx)
//! ```
//!
//! on the torus `[-π, π)`. The `1/√n` factor is applied at evaluation, so
//! with i.i.d. unit-variance coefficients `P(x)` has unit variance at every
//! point. There is no constant term.
//!
//! Pointwise evaluation walks the harmonics with an angle-addition
//! recurrence (re-seeded from `sin_cos` every [`RESEED`] terms to stop the
//! rotation error from drifting) and accumulates with Neumaier summation.
//! Grid evaluation goes through a complex FFT.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The rotation recurrence is restarted from exact values this often.
pub const RESEED: usize = 64;

/// Wraps an angle into the fundamental domain `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

/// Grid abscissa `x_j = -π + 2πj/K`.
#[inline]
pub fn grid_point(j: usize, k: usize) -> f64 {
    -PI + TAU * (j as f64) / (k as f64)
}

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Iterator over `(k, cos kx, sin kx)` for `k = 1..=n`.
#[derive(Clone, Debug)]
pub struct Harmonics {
    x: f64,
    k: usize,
    n: usize,
    step: (f64, f64),
    current: (f64, f64),
}

impl Harmonics {
    pub fn new(x: f64, n: usize) -> Self {
        let (s, c) = x.sin_cos();
        Harmonics {
            x,
            k: 0,
            n,
            step: (c, s),
            current: (1.0, 0.0),
        }
    }
}

impl Iterator for Harmonics {
    type Item = (usize, f64, f64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if self.k >= self.n {
            return None;
        }
        self.k += 1;
        if self.k.is_multiple_of(RESEED) {
            let (s, c) = (self.k as f64 * self.x).sin_cos();
            self.current = (c, s);
        } else {
            let (c, s) = self.current;
            let (c1, s1) = self.step;
            self.current = (c * c1 - s * s1, s * c1 + c * s1);
        }
        Some((self.k, self.current.0, self.current.1))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n - self.k;
        (left, Some(left))
    }
}

/// Value and first two derivatives at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Values of `P, P', P'', P'''` on the cyclic grid `x_j = -π + 2πj/K`.
#[derive(Clone, Debug)]
pub struct GridJets {
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl GridJets {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn jet(&self, j: usize) -> Jet {
        Jet {
            value: self.values[j],
            d1: self.d1[j],
            d2: self.d2[j],
        }
    }
}

/// Outer and inner estimates of `sup |P^{(m)}|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupBounds {
    /// `n^{-1/2} Σ k^m (|a_k| + |b_k|)`, always an upper bound.
    pub upper: f64,
    /// Largest `|P^{(m)}|` on a `4n`-point grid, always a lower bound.
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolyRecord {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Serialize for TrigPoly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PolyRecord {
            n: self.degree(),
            a: self.cos.clone(),
            b: self.sin.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = PolyRecord::deserialize(deserializer)?;
        if rec.a.len() != rec.n || rec.b.len() != rec.n {
            return Err(serde::de::Error::custom(format!(
                "declared degree {} but got {} cosine and {} sine coefficients",
                rec.n,
                rec.a.len(),
                rec.b.len()
            )));
        }
        TrigPoly::new(rec.a, rec.b).map_err(serde::de::Error::custom)
    }
}

/// Whether a sum of floats is exactly zero (Shewchuk's exact partials).
fn exact_sum_is_zero(xs: impl Iterator<Item = f64>) -> bool {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in xs {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // nonoverlapping partials cancel only if all vanish
    partials.iter().all(|&p| p == 0.0)
}

impl TrigPoly {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        let n = cos.len();
        if n == 0 && sin.is_empty() {
            return Err(Error::ZeroDegree);
        }
        if sin.len() != n {
            return Err(Error::CoefficientLength {
                expected: n.max(sin.len()),
                cos: n,
                sin: sin.len(),
            });
        }
        if n == 0 {
            return Err(Error::ZeroDegree);
        }
        if let Some(i) = cos.iter().chain(sin.iter()).position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index: i });
        }
        Ok(TrigPoly { cos, sin })
    }

    /// Builds the polynomial whose evaluation is `Σ cos_k cos(kx) + sin_k sin(kx)`
    /// with no normalization, by absorbing `√n` into the coefficients.
    pub fn from_unnormalized(cos: &[f64], sin: &[f64]) -> Result<Self> {
        let root_n = (cos.len() as f64).sqrt();
        Self::new(
            cos.iter().map(|c| c * root_n).collect(),
            sin.iter().map(|s| s * root_n).collect(),
        )
    }

    /// Degree-`n` polynomial equal to `amp_cos cos(kx) + amp_sin sin(kx)`.
    pub fn monomial(n: usize, k: usize, amp_cos: f64, amp_sin: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Parameter(format!(
                "harmonic {k} outside 1..={n}"
            )));
        }
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        cos[k - 1] = amp_cos;
        sin[k - 1] = amp_sin;
        Self::from_unnormalized(&cos, &sin)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// The `1/√n` evaluation factor.
    #[inline]
    pub fn scale(&self) -> f64 {
        1.0 / (self.degree() as f64).sqrt()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (k, c, s) in Harmonics::new(x, self.degree()) {
            acc.add(self.cos[k - 1] * c);
            acc.add(self.sin[k - 1] * s);
        }
        acc.total() * self.scale()
    }

    /// `P`, `P'` and `P''` at `x` in a single pass (plain accumulation).
    pub fn eval_jet(&self, x: f64) -> Jet {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (k, c, s) in Harmonics::new(x, self.degree()) {
            let (a, b) = (self.cos[k - 1], self.sin[k - 1]);
            let kf = k as f64;
            let even = a * c + b * s;
            v += even;
            d1 += kf * (b * c - a * s);
            d2 -= kf * kf * even;
        }
        let scale = self.scale();
        Jet {
            value: v * scale,
            d1: d1 * scale,
            d2: d2 * scale,
        }
    }

    pub fn derivative(&self, order: u32) -> DerivativeRep {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        for _ in 0..(order % 4) {
            for (k, (a, b)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
                let kf = (k + 1) as f64;
                let (na, nb) = (kf * *b, -kf * *a);
                *a = na;
                *b = nb;
            }
        }
        // The remaining multiples of four only scale each harmonic by k^4.
        let quads = (order / 4) as i32;
        if quads > 0 {
            for (k, (a, b)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
                let f = ((k + 1) as f64).powi(4 * quads);
                *a *= f;
                *b *= f;
            }
        }
        DerivativeRep {
            order,
            base: TrigPoly { cos, sin },
        }
    }

    /// Values at `x_j = -π + 2πj/K`, `j = 0..K`.
    pub fn eval_grid(&self, k: usize) -> Result<Vec<f64>> {
        self.check_grid(k)?;
        Ok(self.grid_pair(k, 0, None).0)
    }

    /// `P` through `P'''` on the `K`-point grid (two FFTs).
    pub fn grid_jets(&self, k: usize) -> Result<GridJets> {
        self.check_grid(k)?;
        let (values, d1) = self.grid_pair(k, 0, Some(1));
        let (d2, d3) = self.grid_pair(k, 2, Some(3));
        Ok(GridJets {
            values,
            d1: d1.unwrap_or_default(),
            d2,
            d3: d3.unwrap_or_default(),
        })
    }

    fn check_grid(&self, k: usize) -> Result<()> {
        let min = 2 * self.degree() + 2;
        if k < min {
            return Err(Error::GridTooSmall {
                k,
                n: self.degree(),
                min,
            });
        }
        Ok(())
    }

    /// Evaluates one or two derivative orders on the grid with one complex
    /// FFT: both outputs are real, so their Hermitian spectra can share the
    /// real and imaginary lanes.
    fn grid_pair(&self, k_grid: usize, first: u32, second: Option<u32>) -> (Vec<f64>, Option<Vec<f64>>) {
        let mut spectrum = vec![Complex64::new(0.0, 0.0); k_grid];
        let scale = self.scale();
        let lane = |order: u32, k: usize, a: f64, b: f64| -> Complex64 {
            // c_k (ik)^m (-1)^k with c_k = (a - ib)/√n
            let kf = k as f64;
            let mut c = Complex64::new(a, -b) * scale * kf.powi(order as i32);
            c *= match order % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            if k % 2 == 1 {
                -c
            } else {
                c
            }
        };
        for k in 1..=self.degree() {
            let (a, b) = (self.cos[k - 1], self.sin[k - 1]);
            let d1 = lane(first, k, a, b) * 0.5;
            let mut lo = d1;
            let mut hi = d1.conj();
            if let Some(m) = second {
                let d2 = lane(m, k, a, b) * 0.5;
                let i = Complex64::new(0.0, 1.0);
                lo += i * d2;
                hi += i * d2.conj();
            }
            spectrum[k] += lo;
            spectrum[k_grid - k] += hi;
        }
        inverse_fft(&mut spectrum);
        let re = spectrum.iter().map(|z| z.re).collect();
        let im = second.map(|_| spectrum.iter().map(|z| z.im).collect());
        (re, im)
    }

    /// `∫_{-π}^{π} P(x)^2 dx = (π/n) Σ (a_k² + b_k²)`.
    pub fn l2_norm_sq(&self) -> f64 {
        let s: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .map(|(a, b)| a * a + b * b)
            .sum();
        PI * s / self.degree() as f64
    }

    /// `n^{-1/2} Σ k^m (|a_k| + |b_k|)`.
    pub fn coeff_bound(&self, order: u32) -> f64 {
        let s: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (a, b))| ((i + 1) as f64).powi(order as i32) * (a.abs() + b.abs()))
            .sum();
        s * self.scale()
    }

    pub fn sup_bounds(&self, order: u32) -> SupBounds {
        let k = 4 * self.degree();
        let grid = if order == 0 {
            self.grid_pair(k, 0, None).0
        } else {
            self.grid_pair(k, order, None).0
        };
        let lower = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        SupBounds {
            upper: self.coeff_bound(order),
            lower,
        }
    }

    /// Decides `P(x) = 0` exactly at `x ∈ {0, ±π}`, where every harmonic is
    /// `±1` or `0`; `None` elsewhere.
    pub fn vanishes_exactly_at(&self, x: f64) -> Option<bool> {
        if x == 0.0 {
            Some(exact_sum_is_zero(self.cos.iter().copied()))
        } else if x.abs() == PI {
            let alternating = self.cos.iter().enumerate().map(|(k, &a)| if k % 2 == 0 { -a } else { a });
            Some(exact_sum_is_zero(alternating))
        } else {
            None
        }
    }

    /// Replaces every `b_k` by `-b_k`, i.e. `x ↦ P(-x)`.
    pub fn reflect(&self) -> TrigPoly {
        TrigPoly {
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|b| -b).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> TrigPoly {
        TrigPoly {
            cos: self.cos.iter().map(|a| a * factor).collect(),
            sin: self.sin.iter().map(|b| b * factor).collect(),
        }
    }

    /// Pointwise sum, carried at the larger of the two degrees.
    pub fn sum(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree());
        let root_n = (n as f64).sqrt();
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for p in [self, other] {
            let f = root_n * p.scale();
            for k in 0..p.degree() {
                cos[k] += f * p.cos[k];
                sin[k] += f * p.sin[k];
            }
        }
        TrigPoly { cos, sin }
    }

    /// `n,a_1,..,a_n,b_1,..,b_n` with round-trip float formatting.
    pub fn to_csv_row(&self) -> String {
        let mut out = self.degree().to_string();
        for c in self.cos.iter().chain(&self.sin) {
            let _ = write!(out, ",{c:?}");
        }
        out
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let mut fields = row.trim().split(',').map(str::trim);
        let n: usize = fields
            .next()
            .filter(|f| !f.is_empty())
            .ok_or_else(|| Error::Parse("empty row".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("degree: {e}")))?;
        let coeffs = fields
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("`{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if coeffs.len() != 2 * n {
            return Err(Error::Parse(format!(
                "degree {n} needs {} coefficients, got {}",
                2 * n,
                coeffs.len()
            )));
        }
        let (a, b) = coeffs.split_at(n);
        Self::new(a.to_vec(), b.to_vec())
    }
}

/// `m`-fold image of the coefficients under `(a, b) ↦ (k b, -k a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeRep {
    pub order: u32,
    pub base: TrigPoly,
}

impl DerivativeRep {
    pub fn eval(&self, x: f64) -> f64 {
        self.base.eval(x)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_fft(buf: &mut [Complex64]) {
    let plan: Arc<dyn Fft<f64>> = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}
