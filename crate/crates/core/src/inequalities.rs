//! Executable forms of the deterministic inequalities: Bernstein in `L²`,
//! the large sieve, the level-set cover, the interpolation bound for
//! clustered roots, and root separation with transport under perturbation.
//!
//! Gaps `δ` are in radians. The sieve constant is the classical one with the
//! gap measured in full turns, so `δ^{-1}` becomes `2π/δ`.

use std::f64::consts::{E, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::certify::{self, Cell, DerivBounds};
use crate::error::{Error, Result};
use crate::rootcount::{self, Bracket, Domain};
use crate::trigpoly::TrigPoly;

const REL_TOL: f64 = 1e-9;

/// Grid size used for interval maxima.
pub const MAX_GRID: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        InequalityReport {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + REL_TOL),
            slack: rhs - lhs,
        }
    }
}

/// `∫(p')² ≤ n² ∫p²`, both sides by Parseval.
pub fn bernstein_l2(p: &TrigPoly) -> InequalityReport {
    bernstein_l2_with_constant(p, 0.0)
}

/// Same, for `p + n^{-1/2} a0`.
pub fn bernstein_l2_with_constant(p: &TrigPoly, a0: f64) -> InequalityReport {
    let n = p.degree() as f64;
    let mut lhs = 0.0;
    let mut energy = 0.0;
    for (i, (a, b)) in p.cos_coeffs().iter().zip(p.sin_coeffs()).enumerate() {
        let k = (i + 1) as f64;
        let e = a * a + b * b;
        lhs += k * k * e;
        energy += e;
    }
    let lhs = PI * lhs / n;
    let norm_sq = PI * energy / n + TAU * a0 * a0 / n;
    InequalityReport::new(lhs, n * n * norm_sq)
}

/// Smallest cyclic gap between distinct angles; errors on coincident points.
pub fn min_cyclic_gap(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPoints);
    }
    let mut idx: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, &x)| (crate::trigpoly::wrap_angle(x), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    if idx.len() == 1 {
        return Ok(TAU);
    }
    let mut gap = f64::INFINITY;
    for w in 0..idx.len() {
        let (x, i) = idx[w];
        let (y, j) = idx[(w + 1) % idx.len()];
        let d = if w + 1 == idx.len() { y + TAU - x } else { y - x };
        if d <= 0.0 || d >= TAU {
            return Err(Error::CoincidentPoints(i.min(j), i.max(j)));
        }
        gap = gap.min(d);
    }
    Ok(gap)
}

/// Sieve factor `(2n + 2π/δ) / (2π)`.
pub fn sieve_factor(n: usize, delta: f64) -> f64 {
    (2.0 * n as f64 + TAU / delta) / TAU
}

/// `Σ p(x_i)² ≤ (2n + 2π/δ)/(2π) ∫p²` with `δ` the minimal cyclic gap.
pub fn large_sieve(p: &TrigPoly, points: &[f64]) -> Result<InequalityReport> {
    let delta = min_cyclic_gap(points)?;
    let lhs: f64 = points.iter().map(|&x| p.eval(x).powi(2)).sum();
    Ok(InequalityReport::new(lhs, sieve_factor(p.degree(), delta) * p.l2_norm_sq()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetCover {
    pub m_bound: u64,
    /// δ-separated points with `|p| ≥ λ`.
    pub value_witness: Vec<f64>,
    /// δ-separated points with `|p'| ≥ λn`.
    pub slope_witness: Vec<f64>,
}

impl LevelSetCover {
    pub fn witness_len(&self) -> usize {
        self.value_witness.len() + self.slope_witness.len()
    }

    /// The two families together stay within `2M`.
    pub fn within_bound(&self) -> bool {
        self.witness_len() as u64 <= 2 * self.m_bound
    }
}

/// Greedy maximal δ-separated subsets of the set where `|p| ≥ λ` or
/// `|p'| ≥ λn`, read off a dense grid, together with the sieve bound `M`.
pub fn level_set_cover(p: &TrigPoly, tau: f64, lambda: f64, delta: f64) -> Result<LevelSetCover> {
    if !(tau > 0.0 && lambda > 0.0 && delta > 0.0) {
        return Err(Error::Parameter("τ, λ and δ must be positive".into()));
    }
    let norm_sq = p.l2_norm_sq();
    if norm_sq > tau * tau * (1.0 + REL_TOL) {
        return Err(Error::NormBound {
            norm_sq,
            bound_sq: tau * tau,
        });
    }
    let n = p.degree();
    let m_bound = (sieve_factor(n, delta) * tau * tau / (lambda * lambda)).floor() as u64;
    let k = (16 * n).max((8.0 * TAU / delta).ceil() as usize).next_power_of_two();
    let grid = p.grid_jets(k)?;
    let xs: Vec<f64> = (0..k).map(|j| crate::trigpoly::grid_point(j, k)).collect();
    let slope_level = lambda * n as f64;
    let value_witness = greedy_separated(&xs, |j| grid.values[j].abs() >= lambda, delta);
    let slope_witness = greedy_separated(&xs, |j| grid.d1[j].abs() >= slope_level, delta);
    Ok(LevelSetCover {
        m_bound,
        value_witness,
        slope_witness,
    })
}

fn greedy_separated(xs: &[f64], keep: impl Fn(usize) -> bool, delta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (j, &x) in xs.iter().enumerate() {
        if !keep(j) {
            continue;
        }
        let far_from_last = out.last().is_none_or(|&y| x - y >= delta);
        let far_from_first = out.first().is_none_or(|&y| y + TAU - x >= delta);
        if far_from_last && far_from_first {
            out.push(x);
        }
    }
    out
}

/// Coefficients of `P^{(m)} / n^m`, which stay bounded for any `m`.
fn normalized_derivative(p: &TrigPoly, m: u32) -> TrigPoly {
    let n = p.degree() as f64;
    let rot = p.derivative(m % 4).base;
    let rest = (m - m % 4) as f64;
    let mut cos = rot.cos_coeffs().to_vec();
    let mut sin = rot.sin_coeffs().to_vec();
    for (i, (a, b)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
        let k = (i + 1) as f64;
        // (k/n)^rest · n^{-(m mod 4)}
        let f = (k / n).powf(rest) / n.powi((m % 4) as i32);
        *a *= f;
        *b *= f;
    }
    TrigPoly::new(cos, sin).expect("same shape")
}

fn interval_max(p: &TrigPoly, lo: f64, hi: f64) -> f64 {
    (0..MAX_GRID)
        .map(|i| {
            let x = if i + 1 == MAX_GRID {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (MAX_GRID - 1) as f64
            };
            p.eval(x).abs()
        })
        .fold(0.0, f64::max)
}

/// `ln((4er/j)^j)`, with the empty product for `j = 0`.
fn ln_factor(r: f64, j: u32) -> f64 {
    if j == 0 {
        0.0
    } else {
        j as f64 * (4.0 * E * r / j as f64).ln()
    }
}

/// Checks `max_I |p| ≤ (4er/m)^m max_I |p^{(m)}|` and
/// `max_I |p'| ≤ (4er/(m-1))^{m-1} max_I |p^{(m)}|` for an interval holding
/// at least `m` certified roots. Left sides are grid maxima; the common right
/// side maximum is a grid maximum padded by `sup|p^{(m+1)}| · step / 2`.
pub fn interpolation_bound(
    p: &TrigPoly,
    lo: f64,
    hi: f64,
    m: u32,
) -> Result<(InequalityReport, InequalityReport)> {
    if m == 0 {
        return Err(Error::Parameter("m must be at least 1".into()));
    }
    let domain = Domain::interval(lo, hi)?;
    let count = rootcount::count(p, domain)?;
    if (count.roots.len() as u64) < m as u64 {
        return Err(if count.certified {
            Error::TooFewRoots {
                found: count.count,
                required: m as usize,
            }
        } else {
            Error::Uncertified
        });
    }
    let n = p.degree() as f64;
    let r = hi - lo;
    let step = r / (MAX_GRID - 1) as f64;
    let dm = normalized_derivative(p, m);
    let pad = normalized_derivative(p, m + 1).coeff_bound(0) * n * step / 2.0;
    // max_I |p^{(m)}| / n^m, from above
    let top = interval_max(&dm, lo, hi) + pad;
    let ln_top = top.ln() + m as f64 * n.ln();
    let lhs_f = interval_max(p, lo, hi);
    let lhs_d = interval_max(&p.derivative(1).base, lo, hi);
    let rhs_f = (ln_factor(r, m) + ln_top).exp();
    let rhs_d = (ln_factor(r, m - 1) + ln_top).exp();
    Ok((InequalityReport::new(lhs_f, rhs_f), InequalityReport::new(lhs_d, rhs_d)))
}

/// Certifies that every point of `[lo, hi]` has `|f| > μ` or `|f'| > ν`.
fn certify_hypothesis(
    f: &TrigPoly,
    bounds: &DerivBounds,
    lo: f64,
    hi: f64,
    mu: f64,
    nu: f64,
) -> Result<()> {
    let step = TAU / (certify::GRID_FACTOR * f.degree()) as f64;
    let mut stack = certify::pointwise_cells(f, lo, hi, step);
    stack.reverse();
    let mut evals = stack.len();
    let budget = rootcount::default_budget(f.degree());
    while let Some(c) = stack.pop() {
        if c.value_above(bounds, 0.0, mu) || c.slope_above(bounds, nu) {
            continue;
        }
        for j in [c.jet_lo, c.jet_hi] {
            if j.value.abs() + bounds.margin[0] <= mu && j.d1.abs() + bounds.margin[1] <= nu {
                let x = if j == c.jet_lo { c.lo } else { c.hi };
                return Err(Error::HypothesisViolated {
                    x,
                    value: j.value.abs(),
                    slope: j.d1.abs(),
                });
            }
        }
        if c.width() < certify::MIN_WIDTH || evals >= budget {
            return Err(Error::HypothesisInconclusive {
                x: 0.5 * (c.lo + c.hi),
            });
        }
        let (l, r) = c.split(f);
        evals += 1;
        stack.push(r);
        stack.push(l);
    }
    Ok(())
}

/// A root of `f` together with its interval `I(x) = (a, b)`, on whose
/// endpoints `|f| = μ` with opposite signs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedRoot {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Last (or first) crossing of `f = level` inside `[lo, hi]`.
fn nearest_crossing(
    f: &TrigPoly,
    bounds: &DerivBounds,
    level: f64,
    lo: f64,
    hi: f64,
    want_last: bool,
) -> Result<f64> {
    let step = TAU / (certify::GRID_FACTOR * f.degree()) as f64;
    let cells: Vec<Cell> = certify::pointwise_cells(f, lo, hi, step);
    let evals = cells.len() + 1;
    let found = rootcount::isolate(f, bounds, level, cells, rootcount::default_budget(f.degree()), evals);
    let at = if want_last { 0.5 * (lo + hi) } else { lo };
    if !found.certified {
        return Err(Error::HypothesisInconclusive { x: at });
    }
    let b = if want_last {
        found.roots.last()
    } else {
        found.roots.first()
    };
    let b = b.ok_or(Error::HypothesisInconclusive { x: at })?;
    rootcount::refine_level(f, level, *b)
}

/// The intervals `I(x_i)` around each root `x_i` of `f` in `[lo, hi]` lying
/// farther than `μ/ν` from both ends, under the certified hypothesis that
/// every point has `|f| > μ` or `|f'| > ν`.
pub fn separation_intervals(
    f: &TrigPoly,
    lo: f64,
    hi: f64,
    mu: f64,
    nu: f64,
) -> Result<Vec<SeparatedRoot>> {
    if !(mu > 0.0 && nu > 0.0) {
        return Err(Error::Parameter("μ and ν must be positive".into()));
    }
    let reach = mu / nu;
    if hi - lo <= 2.0 * reach {
        return Err(Error::Parameter(format!(
            "interval length {} must exceed 2μ/ν = {}",
            hi - lo,
            2.0 * reach
        )));
    }
    let domain = Domain::interval(lo, hi)?;
    let (grid, bounds) = certify::seed_grid(f);
    certify_hypothesis(f, &bounds, lo, hi, mu, nu)?;
    let count = rootcount::count_with_grid(f, &grid, &bounds, domain, rootcount::default_budget(f.degree()))?;
    if !count.certified {
        return Err(Error::Uncertified);
    }
    let mut out = Vec::new();
    for b in &count.roots {
        let x = rootcount::refine_root(f, *b)?;
        if x - lo <= reach || hi - x <= reach {
            continue;
        }
        let rising = f.eval_jet(x).d1 > 0.0;
        let (left_level, right_level) = if rising { (-mu, mu) } else { (mu, -mu) };
        let a = nearest_crossing(f, &bounds, left_level, x - reach, x, true)?;
        let c = nearest_crossing(f, &bounds, right_level, x, x + reach, false)?;
        out.push(SeparatedRoot { root: x, lo: a, hi: c });
    }
    Ok(out)
}

/// Certified upper bound of `sup |g|` on `[lo, hi]`.
pub fn interval_sup(g: &TrigPoly, lo: f64, hi: f64) -> f64 {
    let step = (hi - lo) / (MAX_GRID - 1) as f64;
    let padded = interval_max(g, lo, hi) + g.coeff_bound(1) * step / 2.0;
    g.coeff_bound(0).min(padded) * (1.0 + 1e-12)
}

/// Matched pair of a root of `f` and the transported root of `f + g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub original: f64,
    pub perturbed: f64,
}

/// For each root handled by [`separation_intervals`], a root of `f + g`
/// inside `I(x_i)`, provided `sup_I |g| < μ`.
pub fn perturbation_root_transport(
    f: &TrigPoly,
    g: &TrigPoly,
    lo: f64,
    hi: f64,
    mu: f64,
    nu: f64,
) -> Result<Vec<RootPair>> {
    let bound = interval_sup(g, lo, hi);
    if bound >= mu {
        return Err(Error::PerturbationTooLarge { bound, limit: mu });
    }
    let intervals = separation_intervals(f, lo, hi, mu, nu)?;
    let h = f.sum(g);
    intervals
        .iter()
        .map(|s| {
            let perturbed = rootcount::refine_root(&h, Bracket { lo: s.lo, hi: s.hi })?;
            Ok(RootPair {
                original: s.root,
                perturbed,
            })
        })
        .collect()
}
