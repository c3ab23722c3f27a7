//! Partition of the torus into windows of length about `R/n`, stability of
//! each window, exceptional polynomials, the parameter schedule, the
//! Diophantine condition on evaluation points, and the split of the root
//! count between stable and unstable windows.

use std::f64::consts::{E, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::certify::{self, Cell, DerivBounds};
use crate::ensembles::{sample_poly, EnsembleSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::rootcount::{self, Domain};
use crate::trigpoly::{GridJets, TrigPoly};

/// `⌈2πn/R⌉` equal half-open windows `[b_i, b_{i+1})` tiling `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPartition {
    pub n: usize,
    pub r: f64,
    pub count: usize,
}

impl TorusPartition {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDegree);
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Parameter(format!("window constant R = {r} must be positive")));
        }
        let count = (TAU * n as f64 / r).ceil();
        if count > u32::MAX as f64 {
            return Err(Error::Parameter(format!("R = {r} gives {count} windows")));
        }
        Ok(TorusPartition {
            n,
            r,
            count: (count as usize).max(1),
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Left end of window `i`; `boundary(count) = π`.
    #[inline]
    pub fn boundary(&self, i: usize) -> f64 {
        if i >= self.count {
            PI
        } else {
            -PI + TAU * i as f64 / self.count as f64
        }
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.boundary(i), self.boundary(i + 1))
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.count).map(|i| self.interval(i))
    }

    /// Window containing `x`, after wrapping to `[-π, π)`.
    pub fn index_of(&self, x: f64) -> usize {
        let x = crate::trigpoly::wrap_angle(x);
        self.index_in_range(x) % self.count
    }

    // `x` in [-π, π]; may return `count` for x = π.
    fn index_in_range(&self, x: f64) -> usize {
        let m = self.count;
        let mut i = (((x + PI) * m as f64 / TAU).floor().max(0.0) as usize).min(m);
        while i > 0 && self.boundary(i) > x {
            i -= 1;
        }
        while i < m && self.boundary(i + 1) <= x {
            i += 1;
        }
        i
    }

    /// Windows meeting the open interval `(lo, hi)`, as an inclusive range.
    fn span(&self, lo: f64, hi: f64) -> (usize, usize) {
        let first = self.index_in_range(lo).min(self.count - 1);
        let mut last = self.index_in_range(hi).min(self.count - 1);
        if last > first && self.boundary(last) >= hi {
            last -= 1;
        }
        (first, last.max(first))
    }
}

/// `δ = c0 ε / ln(1/ε)`, `α = δ^{3/2}`, `β = δ^{3/4}`, `γ = δ^{5/4}`, `τ = δ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchedule {
    pub eps: f64,
    pub c0: f64,
    pub r: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl ParameterSchedule {
    pub fn new(eps: f64, c0: f64, r: f64) -> Result<Self> {
        let delta = Self::delta_for(eps, c0)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Parameter(format!("R = {r} must be positive")));
        }
        let limit = eps / (1024.0 * E);
        if delta * r >= limit {
            return Err(Error::Parameter(format!(
                "δR = {} must be below ε/(1024e) = {limit}",
                delta * r
            )));
        }
        Ok(ParameterSchedule {
            eps,
            c0,
            r,
            delta,
            alpha: delta.powf(1.5),
            beta: delta.powf(0.75),
            gamma: delta.powf(1.25),
            tau: delta * delta,
        })
    }

    /// Schedule with `R` at `fraction` of its supremum `ε / (1024 e δ)`.
    pub fn with_window_fraction(eps: f64, c0: f64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Parameter(format!("window fraction {fraction} outside (0, 1)")));
        }
        Self::new(eps, c0, fraction * Self::max_window(eps, c0)?)
    }

    /// Supremum of admissible `R`.
    pub fn max_window(eps: f64, c0: f64) -> Result<f64> {
        Ok(eps / (1024.0 * E * Self::delta_for(eps, c0)?))
    }

    fn delta_for(eps: f64, c0: f64) -> Result<f64> {
        if !(eps > 0.0 && eps < 1.0 / E) {
            return Err(Error::Parameter(format!("ε = {eps} must lie in (0, 1/e)")));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Parameter(format!("c0 = {c0} must be positive")));
        }
        Ok(c0 * eps / (1.0 / eps).ln())
    }

    pub fn partition(&self, n: usize) -> Result<TorusPartition> {
        TorusPartition::new(n, self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn new(len: usize) -> Self {
        Bits {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// Sets `lo..=hi`.
    fn set_range(&mut self, lo: usize, hi: usize) {
        let (wa, wb) = (lo / 64, hi / 64);
        let head = !0u64 << (lo % 64);
        let tail = !0u64 >> (63 - hi % 64);
        if wa == wb {
            self.words[wa] |= head & tail;
        } else {
            self.words[wa] |= head;
            for w in &mut self.words[wa + 1..wb] {
                *w = !0;
            }
            self.words[wb] |= tail;
        }
    }

    fn all_in(&self, lo: usize, hi: usize) -> bool {
        (lo..=hi).all(|i| self.get(i))
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Cyclic dilation by one position on each side.
    fn dilate(&self) -> Bits {
        let nw = self.words.len();
        let mut out = Bits::new(self.len);
        for i in 0..nw {
            let w = self.words[i];
            let below = if i > 0 { self.words[i - 1] >> 63 } else { 0 };
            let above = if i + 1 < nw { self.words[i + 1] << 63 } else { 0 };
            out.words[i] = w | (w << 1) | (w >> 1) | below | above;
        }
        let rem = self.len % 64;
        if rem != 0 {
            out.words[nw - 1] &= (1u64 << rem) - 1;
        }
        if self.get(self.len - 1) {
            out.set(0);
        }
        if self.get(0) {
            out.set(self.len - 1);
        }
        out
    }
}

/// Verdict for every window of a partition: `I_i` is stable iff no point of
/// `3I_i = I_{i-1} ∪ I_i ∪ I_{i+1}` has `|p| ≤ α` and `|p'| ≤ βn`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalClassification {
    pub partition: TorusPartition,
    pub alpha: f64,
    pub beta: f64,
    /// Windows containing a point with both values small.
    bad: Bits,
    unstable: Bits,
    undecided: Bits,
    pub evals_used: usize,
}

impl IntervalClassification {
    pub fn len(&self) -> usize {
        self.partition.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn verdict(&self, i: usize) -> Verdict {
        if self.unstable.get(i) {
            Verdict::Unstable
        } else if self.undecided.get(i) {
            Verdict::Undecided
        } else {
            Verdict::Stable
        }
    }

    pub fn verdicts(&self) -> impl Iterator<Item = Verdict> + '_ {
        (0..self.len()).map(|i| self.verdict(i))
    }

    /// Maximal runs `(first, last, verdict)` of equal verdicts.
    pub fn runs(&self) -> Vec<(usize, usize, Verdict)> {
        let mut out: Vec<(usize, usize, Verdict)> = Vec::new();
        let mut i = 0;
        let m = self.len();
        while i < m {
            let v = self.verdict(i);
            // skip whole stable words quickly
            let mut j = i + 1;
            while j < m {
                if v == Verdict::Stable && j % 64 == 0 && j + 64 <= m {
                    let w = j / 64;
                    if self.unstable.words[w] == 0 && self.undecided.words[w] == 0 {
                        j += 64;
                        continue;
                    }
                }
                if self.verdict(j) != v {
                    break;
                }
                j += 1;
            }
            out.push((i, j - 1, v));
            i = j;
        }
        out
    }

    pub fn unstable_count(&self) -> usize {
        self.unstable.count()
    }

    pub fn undecided_count(&self) -> usize {
        self.undecided.count()
    }

    pub fn stable_count(&self) -> usize {
        self.len() - self.unstable_count() - self.undecided_count()
    }

    pub fn is_decided(&self) -> bool {
        self.undecided_count() == 0
    }

    /// Window `i` itself contains a point with both values small.
    pub fn has_bad_point(&self, i: usize) -> bool {
        self.bad.get(i)
    }
}

/// Classifies all windows with the exclusion tests of the certified counter.
pub fn classify(p: &TrigPoly, part: &TorusPartition, alpha: f64, beta: f64) -> Result<IntervalClassification> {
    let (grid, bounds) = certify::seed_grid(p);
    classify_with_grid(p, &grid, &bounds, part, alpha, beta)
}

pub fn classify_with_grid(
    p: &TrigPoly,
    grid: &GridJets,
    bounds: &DerivBounds,
    part: &TorusPartition,
    alpha: f64,
    beta: f64,
) -> Result<IntervalClassification> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Parameter("α and β must be positive".into()));
    }
    if part.n != p.degree() {
        return Err(Error::Parameter(format!(
            "partition built for degree {}, polynomial has degree {}",
            part.n,
            p.degree()
        )));
    }
    let m = part.count;
    let slope = beta * p.degree() as f64;
    let mut bad = Bits::new(m);
    let mut open = Bits::new(m);
    let budget = rootcount::default_budget(p.degree());
    let mut evals = grid.len();
    let is_witness = |j: &crate::trigpoly::Jet| {
        j.value.abs() + bounds.margin[0] <= alpha && j.d1.abs() + bounds.margin[1] <= slope
    };
    let mut stack: Vec<Cell> = Vec::new();
    for cell in certify::grid_cells(grid, 0, grid.len()) {
        stack.push(cell);
        while let Some(c) = stack.pop() {
            let (first, last) = part.span(c.lo, c.hi);
            if bad.all_in(first, last) {
                continue;
            }
            if c.value_above(bounds, 0.0, alpha) || c.slope_above(bounds, slope) {
                continue;
            }
            if c.value_within(bounds, 0.0, alpha) && c.slope_within(bounds, slope) {
                bad.set_range(first, last);
                continue;
            }
            let mut hit = false;
            for (x, j) in [(c.lo, &c.jet_lo), (c.hi, &c.jet_hi)] {
                if is_witness(j) {
                    bad.set(part.index_of(x));
                    hit = true;
                }
            }
            if hit && bad.all_in(first, last) {
                continue;
            }
            let mid = if first < last {
                let guess = ((0.5 * (c.lo + c.hi) + PI) * m as f64 / TAU).round() as usize;
                part.boundary(guess.clamp(first + 1, last))
            } else {
                if c.width() < certify::MIN_WIDTH || evals >= budget {
                    open.set(first);
                    continue;
                }
                0.5 * (c.lo + c.hi)
            };
            let jet = p.eval_jet(mid);
            evals += 1;
            let (l, r) = c.split_at(mid, jet);
            stack.push(r);
            stack.push(l);
        }
    }
    let unstable = bad.dilate();
    let mut undecided = open.dilate();
    for (u, s) in undecided.words.iter_mut().zip(&unstable.words) {
        *u &= !s;
    }
    Ok(IntervalClassification {
        partition: *part,
        alpha,
        beta,
        bad,
        unstable,
        undecided,
        evals_used: evals,
    })
}

/// At least `δn` windows are unstable or undecided.
pub fn is_exceptional(cls: &IntervalClassification, delta: f64) -> bool {
    (cls.unstable_count() + cls.undecided_count()) as f64 >= delta * cls.partition.n as f64
}

/// Default exponent `τ` in the condition on `t`.
pub const DEFAULT_TAU: f64 = 1.0 / 64.0;

/// Distance from `x` to the nearest integer.
pub fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// No `1 ≤ k ≤ C0'` brings `kt/π` within `n^{-1+8τ}` of an integer.
pub fn condition_t(t: f64, n: usize, tau: f64, c0prime: f64) -> Result<bool> {
    if !(c0prime >= 1.0) {
        return Err(Error::Parameter(format!("C0' = {c0prime} must be at least 1")));
    }
    if n == 0 {
        return Err(Error::ZeroDegree);
    }
    let threshold = (n as f64).powf(-1.0 + 8.0 * tau);
    let kmax = c0prime.floor() as u64;
    Ok((1..=kmax).all(|k| dist_to_integer(k as f64 * t / PI) > threshold))
}

/// Certified roots split by the verdict of the window holding each root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootMass {
    pub roots_unstable: usize,
    pub roots_stable: usize,
}

impl RootMass {
    pub fn total(&self) -> usize {
        self.roots_unstable + self.roots_stable
    }
}

pub fn unstable_root_mass(p: &TrigPoly, cls: &IntervalClassification) -> Result<RootMass> {
    let (grid, bounds) = certify::seed_grid(p);
    unstable_root_mass_with_grid(p, &grid, &bounds, cls)
}

pub fn unstable_root_mass_with_grid(
    p: &TrigPoly,
    grid: &GridJets,
    bounds: &DerivBounds,
    cls: &IntervalClassification,
) -> Result<RootMass> {
    if !cls.is_decided() {
        return Err(Error::Undecided(cls.undecided_count()));
    }
    let count = rootcount::count_with_grid(p, grid, bounds, Domain::Torus, rootcount::default_budget(p.degree()))?;
    if !count.certified {
        return Err(Error::Uncertified);
    }
    let part = &cls.partition;
    let mut mass = RootMass {
        roots_unstable: 0,
        roots_stable: 0,
    };
    for b in &count.roots {
        let (first, last) = part.span(b.lo, b.hi);
        let v = cls.verdict(first);
        let uniform = (first..=last).all(|i| cls.verdict(i) == v);
        let v = if uniform {
            v
        } else {
            cls.verdict(part.index_of(rootcount::refine_root(p, *b)?))
        };
        match v {
            Verdict::Unstable => mass.roots_unstable += 1,
            _ => mass.roots_stable += 1,
        }
    }
    Ok(mass)
}

/// `Σ_{i∈I} ⟨e, v_i⟩²` and `Σ_{i∈I} ⟨e, v_i'⟩²` over `I = start..start+L`,
/// with `v_i = (cos it, -(i/n) sin it)` and `v_i' = (sin it, (i/n) cos it)`.
pub fn block_projection_sums(
    t: f64,
    n: usize,
    l: usize,
    start: usize,
    e: (f64, f64),
    tau: f64,
    c0prime: f64,
) -> Result<(f64, f64)> {
    if start < 1 || start + l > n + 1 || l == 0 {
        return Err(Error::Parameter(format!(
            "index window {start}..{} must lie in 1..={n}",
            start + l
        )));
    }
    if (l as f64) < (n as f64).powf(1.0 - 4.0 * tau) {
        return Err(Error::Parameter(format!(
            "window length {l} below n^(1-4τ) = {}",
            (n as f64).powf(1.0 - 4.0 * tau)
        )));
    }
    if ((e.0 * e.0 + e.1 * e.1).sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter("e must be a unit vector".into()));
    }
    if !condition_t(t, n, tau, c0prime)? {
        return Err(Error::Parameter(format!("t = {t} fails the Diophantine condition")));
    }
    let nf = n as f64;
    let (mut sv, mut svp) = (0.0, 0.0);
    for i in start..start + l {
        let (s, c) = (i as f64 * t).sin_cos();
        let w = i as f64 / nf;
        let v = e.0 * c - e.1 * w * s;
        let vp = e.0 * s + e.1 * w * c;
        sv += v * v;
        svp += vp * vp;
    }
    Ok((sv, svp))
}

/// Stability summary of one polynomial under a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryTrial {
    pub trial_index: u64,
    pub windows: usize,
    pub unstable: usize,
    pub undecided: usize,
    pub exceptional: bool,
    /// Root split, absent when some window is undecided or the count is
    /// not certified.
    pub mass: Option<RootMass>,
}

pub fn geometry_trial(
    p: &TrigPoly,
    sched: &ParameterSchedule,
    trial_index: u64,
) -> Result<(IntervalClassification, GeometryTrial)> {
    let part = sched.partition(p.degree())?;
    let (grid, bounds) = certify::seed_grid(p);
    let cls = classify_with_grid(p, &grid, &bounds, &part, sched.alpha, sched.beta)?;
    let mass = match unstable_root_mass_with_grid(p, &grid, &bounds, &cls) {
        Ok(m) => Some(m),
        Err(Error::Undecided(_)) | Err(Error::Uncertified) => None,
        Err(e) => return Err(e),
    };
    let summary = GeometryTrial {
        trial_index,
        windows: part.count,
        unstable: cls.unstable_count(),
        undecided: cls.undecided_count(),
        exceptional: is_exceptional(&cls, sched.delta),
        mass,
    };
    Ok((cls, summary))
}

/// [`geometry_trial`] for trials `0..trials` of an ensemble, in trial order.
pub fn geometry_sweep(
    spec: &EnsembleSpec,
    n: usize,
    sched: &ParameterSchedule,
    trials: u64,
    seed: u64,
) -> Result<Vec<GeometryTrial>> {
    use rayon::prelude::*;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let p = sample_poly(spec, n, SeedSpec::new(seed, i))?;
            geometry_trial(&p, sched, i).map(|(_, g)| g)
        })
        .collect()
}

/// Aggregate of a geometry sweep: exceptional frequency and the joint
/// event "not exceptional but more than `εn/2` roots on unstable windows".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RarityReport {
    pub trials: u64,
    pub exceptional: u64,
    pub frequency: f64,
    /// Rule-of-three bound, when no trial was exceptional.
    pub upper_95: Option<f64>,
    pub non_exceptional: u64,
    pub joint_violations: u64,
    /// Non-exceptional trials whose root split could not be certified.
    pub unresolved: u64,
    pub mean_unstable_fraction: f64,
}

pub fn rarity_report(trials: &[GeometryTrial], sched: &ParameterSchedule, n: usize) -> RarityReport {
    let t = trials.len() as u64;
    let exceptional = trials.iter().filter(|g| g.exceptional).count() as u64;
    let limit = sched.eps * n as f64 / 2.0;
    let mut joint = 0;
    let mut unresolved = 0;
    for g in trials.iter().filter(|g| !g.exceptional) {
        match g.mass {
            Some(m) if m.roots_unstable as f64 > limit => joint += 1,
            Some(_) => {}
            None => unresolved += 1,
        }
    }
    RarityReport {
        trials: t,
        exceptional,
        frequency: exceptional as f64 / t.max(1) as f64,
        upper_95: (exceptional == 0 && t > 0).then(|| 3.0 / t as f64),
        non_exceptional: t - exceptional,
        joint_violations: joint,
        unresolved,
        mean_unstable_fraction: trials
            .iter()
            .map(|g| g.unstable as f64 / g.windows as f64)
            .sum::<f64>()
            / t.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_tiles() {
        let part = TorusPartition::new(10, 0.37).unwrap();
        assert_eq!(part.count, (TAU * 10.0 / 0.37).ceil() as usize);
        assert_eq!(part.boundary(0), -PI);
        assert_eq!(part.boundary(part.count), PI);
        let w = TAU / part.count as f64;
        for (i, (lo, hi)) in part.intervals().enumerate() {
            assert!((hi - lo - w).abs() < 1e-14);
            assert_eq!(part.index_of(lo), i);
            assert_eq!(part.index_of(0.5 * (lo + hi)), i);
        }
        assert_eq!(part.index_of(PI), 0);
    }

    #[test]
    fn schedule_values() {
        let s = ParameterSchedule::with_window_fraction(0.2, 1.0, 0.5).unwrap();
        let d = 0.2 / 5f64.ln();
        assert!((s.delta - d).abs() < 1e-15);
        assert!((s.alpha - d.powf(1.5)).abs() < 1e-15);
        assert!((s.beta - d.powf(0.75)).abs() < 1e-15);
        assert!((s.tau - d * d).abs() < 1e-15);
        assert!(s.delta * s.r < 0.2 / (1024.0 * E));
        assert!(ParameterSchedule::new(0.4, 1.0, 1e-6).is_err());
        let rmax = ParameterSchedule::max_window(0.2, 1.0).unwrap();
        assert!(ParameterSchedule::new(0.2, 1.0, rmax).is_err());
        assert!(ParameterSchedule::new(0.2, 1.0, 0.999 * rmax).is_ok());
    }

    #[test]
    fn cos_all_stable() {
        let p = TrigPoly::monomial(1, 1, 1.0, 0.0).unwrap();
        let part = TorusPartition::new(1, TAU / 4.0).unwrap();
        let cls = classify(&p, &part, 0.01, 0.01).unwrap();
        assert_eq!(cls.stable_count(), 4);
        assert!(!is_exceptional(&cls, 0.5));
        let mass = unstable_root_mass(&p, &cls).unwrap();
        assert_eq!(mass, RootMass { roots_unstable: 0, roots_stable: 2 });
    }

    #[test]
    fn huge_thresholds_all_unstable() {
        let p = sample_poly(&EnsembleSpec::gaussian(), 8, SeedSpec::new(2, 0)).unwrap();
        let part = TorusPartition::new(8, 0.5).unwrap();
        let cls = classify(&p, &part, 2.0 * p.coeff_bound(0), 2.0 * p.coeff_bound(1) / 8.0).unwrap();
        assert_eq!(cls.unstable_count(), part.count);
        assert!(is_exceptional(&cls, TAU / 0.5 / 8.0));
        let mass = unstable_root_mass(&p, &cls).unwrap();
        assert_eq!(mass.roots_stable, 0);
    }

    // Oracle: dense sampling of the bad set. Windows whose tripled window
    // contains a sampled bad point must be unstable; windows far (in grid
    // terms) from every sampled bad point must be stable.
    #[test]
    fn classification_matches_dense_sampling() {
        let spec = EnsembleSpec::gaussian();
        let n = 24;
        let part = TorusPartition::new(n, 0.05).unwrap();
        let (alpha, beta) = (0.15, 0.3);
        for t in 0..10 {
            let p = sample_poly(&spec, n, SeedSpec::new(3, t)).unwrap();
            let cls = classify(&p, &part, alpha, beta).unwrap();
            assert!(cls.is_decided());
            let m = part.count;
            let per = 64;
            let mut near_bad = vec![false; m];
            let mut sampled_bad = vec![false; m];
            for i in 0..m {
                let (lo, hi) = part.interval(i);
                for s in 0..per {
                    let x = lo + (hi - lo) * s as f64 / per as f64;
                    let j = p.eval_jet(x);
                    if j.value.abs() <= alpha && j.d1.abs() <= beta * n as f64 {
                        sampled_bad[i] = true;
                    }
                    // loose version catches bad points between samples
                    let step = (hi - lo) / per as f64;
                    if j.value.abs() <= alpha + p.coeff_bound(1) * step
                        && j.d1.abs() <= beta * n as f64 + p.coeff_bound(2) * step
                    {
                        near_bad[i] = true;
                    }
                }
            }
            for i in 0..m {
                let nb = [(i + m - 1) % m, i, (i + 1) % m];
                if nb.iter().any(|&k| sampled_bad[k]) {
                    assert_eq!(cls.verdict(i), Verdict::Unstable, "trial {t} window {i}");
                }
                if !nb.iter().any(|&k| near_bad[k]) {
                    assert_eq!(cls.verdict(i), Verdict::Stable, "trial {t} window {i}");
                }
            }
            let mass = unstable_root_mass(&p, &cls).unwrap();
            assert_eq!(mass.total(), rootcount::count(&p, Domain::Torus).unwrap().count);
        }
    }

    #[test]
    fn runs_cover_partition() {
        let p = sample_poly(&EnsembleSpec::gaussian(), 16, SeedSpec::new(9, 1)).unwrap();
        let part = TorusPartition::new(16, 0.01).unwrap();
        let cls = classify(&p, &part, 0.2, 0.3).unwrap();
        let runs = cls.runs();
        assert_eq!(runs[0].0, 0);
        assert_eq!(runs.last().unwrap().1, part.count - 1);
        let mut unstable = 0;
        for w in runs.windows(2) {
            assert_eq!(w[0].1 + 1, w[1].0);
            assert_ne!(w[0].2, w[1].2);
        }
        for &(a, b, v) in &runs {
            if v == Verdict::Unstable {
                unstable += b - a + 1;
            }
        }
        assert_eq!(unstable, cls.unstable_count());
    }

    #[test]
    fn dilation_wraps() {
        let mut b = Bits::new(130);
        b.set(0);
        b.set(64);
        let d = b.dilate();
        let set: Vec<usize> = (0..130).filter(|&i| d.get(i)).collect();
        assert_eq!(set, vec![0, 1, 63, 64, 65, 129]);
        let mut b = Bits::new(130);
        b.set_range(3, 127);
        assert_eq!(b.count(), 125);
    }

    #[test]
    fn condition_examples() {
        assert!(!condition_t(PI / 2.0, 100, DEFAULT_TAU, 2.0).unwrap());
        assert!(condition_t(1.0, 10_000, DEFAULT_TAU, 100.0).unwrap());
        assert!(!condition_t(PI * 3.0 / 7.0, 10_000, DEFAULT_TAU, 10.0).unwrap());
        assert!(condition_t(PI * 3.0 / 7.0, 10_000, DEFAULT_TAU, 6.0).unwrap());
        assert!(condition_t(1.0, 10, DEFAULT_TAU, 0.5).is_err());
    }

    #[test]
    fn claim_sums_examples() {
        let n = 2000;
        let (sv, _) = block_projection_sums(1.0, n, n, 1, (1.0, 0.0), DEFAULT_TAU, 10.0).unwrap();
        assert!((sv / (n as f64 / 2.0) - 1.0).abs() < 0.1);
        let (sv, _) = block_projection_sums(1.0, n, n, 1, (0.0, 1.0), DEFAULT_TAU, 10.0).unwrap();
        assert!((sv / (n as f64 / 6.0) - 1.0).abs() < 0.15);
        assert!(block_projection_sums(PI / 2.0, n, n, 1, (1.0, 0.0), DEFAULT_TAU, 10.0).is_err());
        assert!(block_projection_sums(1.0, n, 10, 1, (1.0, 0.0), DEFAULT_TAU, 10.0).is_err());
    }
}
