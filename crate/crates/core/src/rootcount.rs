//! Counting sign-change roots on the torus or on a subinterval.
//!
//! [`count_certified`] subdivides until every piece is either provably
//! root-free or provably monotone, so each reported bracket holds exactly one
//! root. [`count_fast`] just counts sign changes of an FFT grid and is a lower
//! bound.
//!
//! Exact zeros are read as `+0` throughout, so a root sitting exactly on a
//! cell boundary is attributed to exactly one neighbouring cell.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certify::{self, Cell, DerivBounds, MIN_WIDTH};
use crate::error::{Error, Result};
use crate::trigpoly::{GridJets, TrigPoly};

/// Where roots are counted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// `[-π, π)` with endpoints identified.
    Torus,
    /// Closed interval `[lo, hi]`, `hi - lo ≤ 2π`.
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    /// `[0, π]`.
    pub fn upper_half() -> Self {
        Domain::Interval { lo: 0.0, hi: PI }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::Domain(format!("[{lo}, {hi}] is empty or not finite")));
        }
        if hi - lo > TAU {
            return Err(Error::Domain(format!("[{lo}, {hi}] is longer than the torus")));
        }
        Ok(Domain::Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        match *self {
            Domain::Torus => TAU,
            Domain::Interval { lo, hi } => hi - lo,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Domain::Torus => write!(f, "torus"),
            Domain::Interval { lo, hi } => write!(f, "{lo:?},{hi:?}"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    /// `torus`, `half` (for `[0, π]`), or `lo,hi`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "torus" => return Ok(Domain::Torus),
            "half" | "upper_half" => return Ok(Domain::upper_half()),
            _ => {}
        }
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| Error::Domain(format!("`{s}`: expected `torus`, `half` or `lo,hi`")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("`{t}` is not a number")))
        };
        Domain::interval(parse(lo)?, parse(hi)?)
    }
}

impl Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedCount {
    pub count: usize,
    pub certified: bool,
    /// One bracket per isolated root, in increasing order.
    pub roots: Vec<Bracket>,
    /// Pieces that could not be resolved (tangency, tight cluster, budget).
    pub ambiguous: Vec<Bracket>,
    pub evals_used: usize,
}

pub fn default_budget(n: usize) -> usize {
    1_000_000 + 2000 * n
}

/// Certified count on `domain` with the default budget.
pub fn count(p: &TrigPoly, domain: Domain) -> Result<CertifiedCount> {
    count_certified(p, domain, default_budget(p.degree()))
}

pub fn count_certified(p: &TrigPoly, domain: Domain, budget: usize) -> Result<CertifiedCount> {
    let (grid, bounds) = certify::seed_grid(p);
    count_with_grid(p, &grid, &bounds, domain, budget)
}

/// Same as [`count_certified`] but reusing an existing seeding grid.
pub fn count_with_grid(
    p: &TrigPoly,
    grid: &GridJets,
    bounds: &DerivBounds,
    domain: Domain,
    budget: usize,
) -> Result<CertifiedCount> {
    let n = p.degree();
    let min = 16 * n;
    if budget < min {
        return Err(Error::BudgetTooSmall { budget, min });
    }
    let k = grid.len();
    let mut evals = k;
    let cells = match domain {
        Domain::Torus => certify::grid_cells(grid, 0, k),
        Domain::Interval { lo, hi } => match aligned(lo, hi, k) {
            Some((from, to)) => aligned_cells(grid, from, to),
            None => {
                let cells = certify::pointwise_cells(p, lo, hi, TAU / k as f64);
                evals += cells.len() + 1;
                cells
            }
        },
    };
    let Domain::Interval { lo, hi } = domain else {
        return Ok(isolate(p, bounds, 0.0, cells, budget, evals));
    };
    // A root on the boundary of the closed interval cannot be attributed from
    // the sign pattern; at 0 and ±π it can be decided exactly instead.
    let mut exact = Vec::new();
    let mut undecided = Vec::new();
    for x in [lo, hi] {
        match p.vanishes_exactly_at(x) {
            Some(true) => exact.push(x),
            Some(false) => {}
            None if p.eval(x).abs() <= bounds.margin[0] => undecided.push(x),
            None => {}
        }
    }
    let mut out = isolate_with_roots(p, bounds, 0.0, cells, budget, evals + 2, &exact);
    for x in undecided {
        out.ambiguous.push(Bracket { lo: x, hi: x });
        out.certified = false;
    }
    Ok(out)
}

/// Grid indices `(from, to)` if both ends sit on grid points (up to round-off).
fn aligned(lo: f64, hi: f64, k: usize) -> Option<(usize, usize)> {
    let idx = |x: f64| -> Option<isize> {
        let t = (x + PI) * k as f64 / TAU;
        let j = t.round();
        ((t - j).abs() < 1e-9).then_some(j as isize)
    };
    let (a, b) = (idx(lo)?, idx(hi)?);
    if b <= a || (b - a) as usize > k {
        return None;
    }
    Some((a.rem_euclid(k as isize) as usize, (a.rem_euclid(k as isize) + (b - a)) as usize))
}

/// Grid cells `from..to` where `to` may run past `K` (wrapping).
fn aligned_cells(grid: &GridJets, from: usize, to: usize) -> Vec<Cell> {
    let k = grid.len();
    (from..to)
        .map(|j| {
            let mut c = certify::grid_cells(grid, j % k, j % k + 1)[0];
            // keep abscissae increasing across the seam
            let shift = (j / k) as f64 * TAU;
            c.lo += shift;
            c.hi += shift;
            c
        })
        .collect()
}

/// Isolates the roots of `P - level` in the given cells.
pub(crate) fn isolate(
    p: &TrigPoly,
    bounds: &DerivBounds,
    level: f64,
    cells: Vec<Cell>,
    budget: usize,
    evals: usize,
) -> CertifiedCount {
    isolate_with_roots(p, bounds, level, cells, budget, evals, &[])
}

// `known` are cell endpoints where `P = level` holds exactly. Each is
// reported once; a monotone cell touching one holds no other root.
fn isolate_with_roots(
    p: &TrigPoly,
    bounds: &DerivBounds,
    level: f64,
    cells: Vec<Cell>,
    budget: usize,
    mut evals: usize,
    known: &[f64],
) -> CertifiedCount {
    let touches = |c: &Cell| known.iter().any(|&x| (c.lo - x).abs() < 1e-13 || (c.hi - x).abs() < 1e-13);
    let mut roots: Vec<Bracket> = known.iter().map(|&x| Bracket { lo: x, hi: x }).collect();
    let mut ambiguous = Vec::new();
    let mut exhausted = false;
    let mut stack: Vec<Cell> = Vec::new();
    for cell in cells {
        stack.push(cell);
        while let Some(c) = stack.pop() {
            if c.level_free(bounds, level) {
                continue;
            }
            if c.monotone(bounds) {
                if touches(&c) {
                    continue;
                }
                if certify::positive(c.jet_lo.value - level) != certify::positive(c.jet_hi.value - level) {
                    roots.push(Bracket { lo: c.lo, hi: c.hi });
                }
                continue;
            }
            if c.width() < MIN_WIDTH || exhausted || evals >= budget {
                exhausted |= evals >= budget;
                ambiguous.push(Bracket { lo: c.lo, hi: c.hi });
                continue;
            }
            let (left, right) = c.split(p);
            evals += 1;
            // right first so the left half is processed next
            stack.push(right);
            stack.push(left);
        }
    }
    let sign_changes = ambiguous
        .iter()
        .filter(|b| {
            certify::positive(p.eval(b.lo) - level) != certify::positive(p.eval(b.hi) - level)
        })
        .count();
    let certified = ambiguous.is_empty();
    roots.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    CertifiedCount {
        count: roots.len() + if certified { 0 } else { sign_changes },
        certified,
        roots,
        ambiguous,
        evals_used: evals,
    }
}

/// Minimum grid size accepted by [`count_fast`].
pub fn fast_min_grid(n: usize) -> usize {
    8 * n
}

/// Cyclic sign changes of `eval_grid(p, K)`.
pub fn count_fast(p: &TrigPoly, k: usize) -> Result<usize> {
    count_fast_in(p, k, Domain::Torus)
}

/// Sign changes between consecutive grid points inside `domain`; interval
/// ends must be grid points (for `[0, π]` any even `K` works).
pub fn count_fast_in(p: &TrigPoly, k: usize, domain: Domain) -> Result<usize> {
    let min = fast_min_grid(p.degree());
    if k < min {
        return Err(Error::GridTooSmall {
            k,
            n: p.degree(),
            min,
        });
    }
    let values = p.eval_grid(k)?;
    let (from, to) = match domain {
        Domain::Torus => (0, k),
        Domain::Interval { lo, hi } => aligned(lo, hi, k).ok_or_else(|| {
            Error::Domain(format!("[{lo}, {hi}] does not sit on the {k}-point grid"))
        })?,
    };
    Ok(sign_changes(&values, from, to))
}

pub(crate) fn sign_changes(values: &[f64], from: usize, to: usize) -> usize {
    let k = values.len();
    (from..to)
        .filter(|&j| certify::positive(values[j % k]) != certify::positive(values[(j + 1) % k]))
        .count()
}

pub const ROOT_TOL: f64 = 1e-12;

/// Safeguarded Newton inside a sign-change bracket; the result is within
/// [`ROOT_TOL`] of a root.
pub fn refine_root(p: &TrigPoly, bracket: Bracket) -> Result<f64> {
    refine_level(p, 0.0, bracket)
}

/// Root of `P - level` inside the bracket.
pub fn refine_level(p: &TrigPoly, level: f64, bracket: Bracket) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo.min(bracket.hi), bracket.lo.max(bracket.hi));
    let fa = p.eval(a) - level;
    let fb = p.eval(b) - level;
    let sa = certify::positive(fa);
    if sa == certify::positive(fb) || !(a < b) {
        return Err(Error::InvalidBracket {
            lo: bracket.lo,
            hi: bracket.hi,
            flo: fa,
            fhi: fb,
        });
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..400 {
        if b - a <= ROOT_TOL {
            return Ok(0.5 * (a + b));
        }
        let jet = p.eval_jet(x);
        let v = jet.value - level;
        if v == 0.0 {
            // +0 convention: the sign change sits at x exactly or just left of it
            return Ok(x);
        }
        if certify::positive(v) == sa {
            a = x;
        } else {
            b = x;
        }
        let step = if jet.d1 != 0.0 { v / jet.d1 } else { f64::INFINITY };
        let newton = x - step;
        if step.abs() < 0.25 * ROOT_TOL && newton > a && newton < b {
            let lo = (newton - 0.5 * ROOT_TOL).max(a);
            let hi = (newton + 0.5 * ROOT_TOL).min(b);
            let slo = certify::positive(p.eval(lo) - level);
            let shi = certify::positive(p.eval(hi) - level);
            if slo == sa && shi != sa {
                return Ok(0.5 * (lo + hi));
            }
            if slo != sa {
                b = lo;
            } else {
                a = hi;
            }
            x = 0.5 * (a + b);
        } else if newton > a && newton < b && step.abs() < 0.5 * (b - a) {
            x = newton;
        } else {
            x = 0.5 * (a + b);
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_poly, EnsembleSpec, SeedSpec};

    fn cos1() -> TrigPoly {
        TrigPoly::new(vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn cosine_has_two_roots() {
        let c = count(&cos1(), Domain::Torus).unwrap();
        assert_eq!(c.count, 2);
        assert!(c.certified);
        assert!(c.roots[0].lo <= -PI / 2.0 && -PI / 2.0 <= c.roots[0].hi);
        assert!(c.roots[1].lo <= PI / 2.0 && PI / 2.0 <= c.roots[1].hi);
    }

    #[test]
    fn endpoint_roots() {
        // exact zero at 0 and π: counted once each on the closed interval
        let sine = TrigPoly::monomial(1, 1, 0.0, 1.0).unwrap();
        let c = count(&sine, Domain::upper_half()).unwrap();
        assert!(c.certified);
        assert_eq!(c.count, 2);
        assert_eq!(c.roots[0], Bracket { lo: 0.0, hi: 0.0 });
        assert_eq!(c.roots[1], Bracket { lo: PI, hi: PI });
        let c = count(&sine, Domain::interval(-1.0, 0.0).unwrap()).unwrap();
        assert!(c.certified);
        assert_eq!(c.count, 1);
        let c = count(&sine, Domain::interval(-1.0, 1.0).unwrap()).unwrap();
        assert!(c.certified);
        assert_eq!(c.count, 1);
        // cos(π/2) is only zero up to round-off: cannot be decided
        let c = count(&cos1(), Domain::interval(0.0, PI / 2.0).unwrap()).unwrap();
        assert!(!c.certified);
        assert_eq!(c.ambiguous, vec![Bracket { lo: PI / 2.0, hi: PI / 2.0 }]);
    }

    #[test]
    fn endpoint_roots_of_sign_polynomials() {
        // Σ a_k = 0 and Σ (-1)^k a_k = 0: roots at 0 and π, of either slope
        for (cos, sin) in [
            (vec![1.0, -1.0, -1.0, 1.0], vec![1.0, 1.0, -1.0, 1.0]),
            (vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, -1.0, 1.0, -1.0]),
        ] {
            let p = TrigPoly::new(cos, sin).unwrap();
            let half = count(&p, Domain::upper_half()).unwrap();
            let lower = count(&p, Domain::interval(-PI, 0.0).unwrap()).unwrap();
            let torus = count(&p, Domain::Torus).unwrap();
            assert!(half.certified && lower.certified && torus.certified);
            // 0 and ±π are each shared by the two halves
            assert_eq!(half.count + lower.count, torus.count + 2);
        }
    }

    #[test]
    fn pure_sine_has_2n_roots() {
        for n in [1usize, 2, 3, 8, 50, 129] {
            let p = TrigPoly::monomial(n, n, 0.0, 1.0).unwrap();
            let c = count(&p, Domain::Torus).unwrap();
            assert!(c.certified, "n={n}");
            assert_eq!(c.count, 2 * n, "n={n}");
            assert_eq!(count_fast(&p, 8 * n).unwrap(), 2 * n);
        }
    }

    #[test]
    fn budget_and_domain_errors() {
        let p = cos1();
        assert!(matches!(
            count_certified(&p, Domain::Torus, 15),
            Err(Error::BudgetTooSmall { .. })
        ));
        // budget at the minimum: best effort, possibly uncertified
        let q = sample_poly(&EnsembleSpec::gaussian(), 64, SeedSpec::new(1, 1)).unwrap();
        let c = count_certified(&q, Domain::Torus, 16 * 64).unwrap();
        assert!(!c.certified || c.ambiguous.is_empty());
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::interval(0.0, 7.0).is_err());
        assert!("0,pi".parse::<Domain>().is_err());
        assert_eq!("half".parse::<Domain>().unwrap(), Domain::upper_half());
    }

    #[test]
    fn fast_count_examples() {
        assert_eq!(count_fast(&cos1(), 64).unwrap(), 2);
        assert!(count_fast(&cos1(), 7).is_err());
    }

    #[test]
    fn subinterval_counts() {
        let p = cos1();
        let c = count(&p, Domain::interval(0.0, 3.0).unwrap()).unwrap();
        assert_eq!((c.count, c.certified), (1, true));
        let c = count(&p, Domain::upper_half()).unwrap();
        assert_eq!(c.count, 1);
        let c = count(&p, Domain::interval(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.count, 0);
        // wraps across the seam at ±π
        let c = count(&p, Domain::interval(2.0, 2.0 + PI).unwrap()).unwrap();
        assert_eq!(c.count, 1);
    }

    #[test]
    fn refine_examples() {
        let p = cos1();
        let r = refine_root(&p, Bracket { lo: 1.0, hi: 2.0 }).unwrap();
        assert!((r - PI / 2.0).abs() <= 1e-12);
        let m = p.scaled(-1.0);
        let r = refine_root(&m, Bracket { lo: 1.0, hi: 2.0 }).unwrap();
        assert!((r - PI / 2.0).abs() <= 1e-12);
        assert!(matches!(
            refine_root(&p, Bracket { lo: -1.0, hi: 1.0 }),
            Err(Error::InvalidBracket { .. })
        ));
    }

    #[test]
    fn refined_random_roots_are_small() {
        let g = EnsembleSpec::gaussian();
        for t in 0..20 {
            let p = sample_poly(&g, 40, SeedSpec::new(9, t)).unwrap();
            let c = count(&p, Domain::Torus).unwrap();
            let lip = p.sup_bounds(1).upper;
            for b in &c.roots {
                let r = refine_root(&p, *b).unwrap();
                assert!(r >= b.lo && r <= b.hi);
                assert!(p.eval(r).abs() <= lip * 1e-12);
            }
        }
    }

    #[test]
    fn aligned_detection() {
        assert_eq!(aligned(0.0, PI, 16), Some((8, 16)));
        assert_eq!(aligned(-PI, PI, 16), Some((0, 16)));
        assert_eq!(aligned(0.1, PI, 16), None);
    }
}
