//! Rigorous enclosures of `|P - c|` and `|P'|` over short intervals.
//!
//! All tests are Taylor expansions around a point where `P, P', P''` are
//! known, with the remainder controlled by a certified bound on the next
//! derivative. Derivative bounds are the minimum of the coefficient bound
//! `n^{-1/2} Σ k^m (|a_k| + |b_k|)`, the grid bound
//! `max_grid |P^{(m)}| / (1 - πn/K)` (nearest grid point plus Bernstein), and
//! `n sup|P^{(m-1)}|` (Bernstein). A floating-point margin proportional to
//! the coefficient bound absorbs evaluation round-off.

use std::f64::consts::{PI, TAU};

use crate::trigpoly::{GridJets, Jet, TrigPoly};

/// Intervals narrower than this are never split further.
pub const MIN_WIDTH: f64 = TAU / (1u64 << 40) as f64;

/// Grid oversampling factor used to seed certification.
pub const GRID_FACTOR: usize = 8;

/// Certified upper bounds on `sup |P^{(m)}|`, `m = 0..=3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivBounds {
    pub sup: [f64; 4],
    /// Absolute round-off allowance for computed `P^{(m)}` values.
    pub margin: [f64; 4],
}

impl DerivBounds {
    /// Coefficient bounds only.
    pub fn coarse(p: &TrigPoly) -> Self {
        let n = p.degree() as f64;
        let mut sup = [0.0; 4];
        let mut margin = [0.0; 4];
        for m in 0..4 {
            sup[m] = p.coeff_bound(m as u32);
            margin[m] = 1e-13 * (n + 100.0) * sup[m];
        }
        DerivBounds { sup, margin }
    }

    /// Tightened with grid maxima of each derivative.
    pub fn from_grid(p: &TrigPoly, grid: &GridJets) -> Self {
        let mut b = Self::coarse(p);
        let n = p.degree() as f64;
        let k = grid.len() as f64;
        let shrink = 1.0 - PI * n / k;
        if shrink <= 0.0 {
            return b;
        }
        let lanes = [&grid.values, &grid.d1, &grid.d2, &grid.d3];
        for (m, lane) in lanes.iter().enumerate() {
            let gmax = lane.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let sharp = (gmax + b.margin[m]) / shrink;
            b.sup[m] = b.sup[m].min(sharp);
        }
        for m in 1..4 {
            b.sup[m] = b.sup[m].min(n * b.sup[m - 1]);
        }
        b
    }

    /// Largest possible change of `P - c` within distance `s` of a point with jet `j`.
    #[inline]
    pub fn value_drift(&self, j: &Jet, s: f64) -> f64 {
        let d1 = j.d1.abs() + self.margin[1];
        let d2 = j.d2.abs() + self.margin[2];
        let t0 = self.sup[1] * s;
        let t1 = d1 * s + self.sup[2] * s * s * 0.5;
        let t2 = d1 * s + d2 * s * s * 0.5 + self.sup[3] * s * s * s / 6.0;
        t0.min(t1).min(t2) + self.margin[0]
    }

    /// Largest possible change of `P'` within distance `s`.
    #[inline]
    pub fn slope_drift(&self, j: &Jet, s: f64) -> f64 {
        let t0 = self.sup[2] * s;
        let t1 = (j.d2.abs() + self.margin[2]) * s + self.sup[3] * s * s * 0.5;
        t0.min(t1) + self.margin[1]
    }

    /// Lower bound of `|P - level|` within distance `s`.
    #[inline]
    pub fn value_lower(&self, j: &Jet, level: f64, s: f64) -> f64 {
        (j.value - level).abs() - self.value_drift(j, s)
    }

    #[inline]
    pub fn value_upper(&self, j: &Jet, level: f64, s: f64) -> f64 {
        (j.value - level).abs() + self.value_drift(j, s)
    }

    #[inline]
    pub fn slope_lower(&self, j: &Jet, s: f64) -> f64 {
        j.d1.abs() - self.slope_drift(j, s)
    }

    #[inline]
    pub fn slope_upper(&self, j: &Jet, s: f64) -> f64 {
        j.d1.abs() + self.slope_drift(j, s)
    }
}

/// An interval `[lo, hi]` with the jets at both ends.
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub jet_lo: Jet,
    pub jet_hi: Jet,
}

impl Cell {
    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Splits at the midpoint, evaluating the new jet.
    pub fn split(&self, p: &TrigPoly) -> (Cell, Cell) {
        let mid = 0.5 * (self.lo + self.hi);
        self.split_at(mid, p.eval_jet(mid))
    }

    pub fn split_at(&self, mid: f64, jet: Jet) -> (Cell, Cell) {
        (
            Cell {
                lo: self.lo,
                hi: mid,
                jet_lo: self.jet_lo,
                jet_hi: jet,
            },
            Cell {
                lo: mid,
                hi: self.hi,
                jet_lo: jet,
                jet_hi: self.jet_hi,
            },
        )
    }

    /// `|P - level| > 0` throughout (each endpoint covers its half).
    #[inline]
    pub fn level_free(&self, b: &DerivBounds, level: f64) -> bool {
        let s = 0.5 * self.width();
        b.value_lower(&self.jet_lo, level, s) > 0.0 && b.value_lower(&self.jet_hi, level, s) > 0.0
    }

    /// `|P - level| > bound` throughout.
    #[inline]
    pub fn value_above(&self, b: &DerivBounds, level: f64, bound: f64) -> bool {
        let s = 0.5 * self.width();
        b.value_lower(&self.jet_lo, level, s) > bound && b.value_lower(&self.jet_hi, level, s) > bound
    }

    /// `|P - level| ≤ bound` throughout.
    #[inline]
    pub fn value_within(&self, b: &DerivBounds, level: f64, bound: f64) -> bool {
        let s = 0.5 * self.width();
        b.value_upper(&self.jet_lo, level, s) <= bound && b.value_upper(&self.jet_hi, level, s) <= bound
    }

    /// `|P'| > bound` throughout.
    #[inline]
    pub fn slope_above(&self, b: &DerivBounds, bound: f64) -> bool {
        let s = 0.5 * self.width();
        b.slope_lower(&self.jet_lo, s) > bound
            && b.slope_lower(&self.jet_hi, s) > bound
            && (self.jet_lo.d1 > 0.0) == (self.jet_hi.d1 > 0.0)
    }

    /// `|P'| ≤ bound` throughout.
    #[inline]
    pub fn slope_within(&self, b: &DerivBounds, bound: f64) -> bool {
        let s = 0.5 * self.width();
        b.slope_upper(&self.jet_lo, s) <= bound && b.slope_upper(&self.jet_hi, s) <= bound
    }

    /// `P'` certified nonvanishing, so `P` is strictly monotone.
    #[inline]
    pub fn monotone(&self, b: &DerivBounds) -> bool {
        self.slope_above(b, 0.0)
    }
}

/// Sign with exact zeros read as `+0`.
#[inline]
pub fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Initial cells on the cyclic grid: cell `j` is `[x_j, x_{j+1}]`.
pub fn grid_cells(grid: &GridJets, from: usize, to: usize) -> Vec<Cell> {
    let k = grid.len();
    (from..to)
        .map(|j| {
            let lo = crate::trigpoly::grid_point(j, k);
            let hi = if j + 1 == k {
                PI
            } else {
                crate::trigpoly::grid_point(j + 1, k)
            };
            Cell {
                lo,
                hi,
                jet_lo: grid.jet(j % k),
                jet_hi: grid.jet((j + 1) % k),
            }
        })
        .collect()
}

/// Cells of roughly `step` width covering `[lo, hi]` with pointwise jets.
pub fn pointwise_cells(p: &TrigPoly, lo: f64, hi: f64, step: f64) -> Vec<Cell> {
    let m = ((hi - lo) / step).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=m)
        .map(|i| if i == m { hi } else { lo + (hi - lo) * i as f64 / m as f64 })
        .collect();
    let jets: Vec<Jet> = xs.iter().map(|&x| p.eval_jet(x)).collect();
    (0..m)
        .map(|i| Cell {
            lo: xs[i],
            hi: xs[i + 1],
            jet_lo: jets[i],
            jet_hi: jets[i + 1],
        })
        .collect()
}

/// Standard seeding grid for a polynomial: `K = 8n` and the tightened bounds.
pub fn seed_grid(p: &TrigPoly) -> (GridJets, DerivBounds) {
    let k = GRID_FACTOR * p.degree();
    let grid = p.grid_jets(k).expect("8n >= 2n + 2");
    let bounds = DerivBounds::from_grid(p, &grid);
    (grid, bounds)
}
