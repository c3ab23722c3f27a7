//! Monte Carlo sweeps over root counts and the estimators computed from
//! their records.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::ensembles::{sample_poly, EnsembleSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::rootcount::{self, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountPath {
    Fast,
    Certified,
}

impl fmt::Display for CountPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountPath::Fast => "fast",
            CountPath::Certified => "certified",
        })
    }
}

impl FromStr for CountPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fast" => Ok(CountPath::Fast),
            "certified" => Ok(CountPath::Certified),
            other => Err(Error::Parameter(format!("count path `{other}`: expected fast or certified"))),
        }
    }
}

/// One trial of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub master_seed: u64,
    pub trial_index: u64,
    pub n: usize,
    pub ensemble: String,
    pub domain: Domain,
    pub count: u64,
    pub certified: bool,
    pub count_path: CountPath,
    /// Seconds spent on the trial; only recorded on request because it
    /// breaks byte-for-byte reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub spec: EnsembleSpec,
    pub n: usize,
    pub trials: u64,
    pub domain: Domain,
    pub path: CountPath,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    /// First trial index (for resuming).
    pub start: u64,
    /// Grid size for the fast path; `None` means `8n`.
    pub fast_grid: Option<usize>,
    /// Every `audit_every`-th trial of a fast sweep is recounted certified.
    pub audit_every: u64,
    pub timings: bool,
}

/// Trials computed between two syncs of the sink.
pub const SWEEP_CHUNK: u64 = 256;

/// Largest tolerated fraction of audited fast counts that disagree.
pub const AUDIT_TOLERANCE: f64 = 1e-3;

impl SweepConfig {
    pub fn new(spec: EnsembleSpec, n: usize, trials: u64, domain: Domain, seed: u64) -> Self {
        SweepConfig {
            spec,
            n,
            trials,
            domain,
            path: CountPath::Certified,
            seed,
            threads: 0,
            start: 0,
            fast_grid: None,
            audit_every: 100,
            timings: false,
        }
    }

    fn grid(&self) -> usize {
        self.fast_grid.unwrap_or_else(|| rootcount::fast_min_grid(self.n))
    }
}

/// Receives records in trial order.
pub trait RecordSink {
    fn accept(&mut self, record: &RunRecord) -> io::Result<()>;

    /// Makes everything accepted so far durable.
    fn sync(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl RecordSink for Vec<RunRecord> {
    fn accept(&mut self, record: &RunRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// One JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for JsonlSink<W> {
    fn accept(&mut self, record: &RunRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    fn sync(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub written: u64,
    pub last_trial: Option<u64>,
    pub audited: u64,
    pub disagreements: u64,
}

/// The record of a single trial, exactly as a sweep would produce it.
pub fn count_trial(cfg: &SweepConfig, trial_index: u64) -> Result<RunRecord> {
    count_trial_audited(cfg, trial_index).map(|(r, _)| r)
}

// The record, and for audited fast trials whether the certified count agrees.
fn count_trial_audited(cfg: &SweepConfig, trial_index: u64) -> Result<(RunRecord, Option<bool>)> {
    let clock = cfg.timings.then(Instant::now);
    let p = sample_poly(&cfg.spec, cfg.n, SeedSpec::new(cfg.seed, trial_index))?;
    let (count, certified, audit) = match cfg.path {
        CountPath::Certified => {
            let c = rootcount::count(&p, cfg.domain)?;
            (c.count as u64, c.certified, None)
        }
        CountPath::Fast => {
            let fast = rootcount::count_fast_in(&p, cfg.grid(), cfg.domain)? as u64;
            let audit = (cfg.audit_every > 0 && trial_index.is_multiple_of(cfg.audit_every)).then(|| {
                rootcount::count(&p, cfg.domain)
                    .map(|c| c.certified && c.count as u64 == fast)
                    .unwrap_or(false)
            });
            (fast, false, audit)
        }
    };
    let record = RunRecord {
        master_seed: cfg.seed,
        trial_index,
        n: cfg.n,
        ensemble: cfg.spec.to_string(),
        domain: cfg.domain,
        count,
        certified,
        count_path: cfg.path,
        wall_time: clock.map(|c| c.elapsed().as_secs_f64()),
    };
    Ok((record, audit))
}

/// A pool with `threads` workers, or one per core when `threads` is 0.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))
}

/// Runs trials `start..start + trials` on a pool of `threads` workers and
/// hands the records to `sink` in trial order, syncing after each chunk.
pub fn run_sweep(cfg: &SweepConfig, sink: &mut dyn RecordSink) -> Result<SweepOutcome> {
    if cfg.trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if cfg.n == 0 {
        return Err(Error::ZeroDegree);
    }
    if cfg.path == CountPath::Fast && cfg.grid() < rootcount::fast_min_grid(cfg.n) {
        return Err(Error::GridTooSmall {
            k: cfg.grid(),
            n: cfg.n,
            min: rootcount::fast_min_grid(cfg.n),
        });
    }
    let pool = thread_pool(cfg.threads)?;
    let chunk = SWEEP_CHUNK;
    let end = cfg.start + cfg.trials;
    let mut out = SweepOutcome::default();
    let mut lo = cfg.start;
    while lo < end {
        let hi = (lo + chunk).min(end);
        let batch: Vec<(RunRecord, Option<bool>)> = pool.install(|| {
            (lo..hi)
                .into_par_iter()
                .map(|i| count_trial_audited(cfg, i))
                .collect::<Result<Vec<_>>>()
        })?;
        for (_, a) in &batch {
            if let Some(ok) = a {
                out.audited += 1;
                out.disagreements += u64::from(!ok);
            }
        }
        if out.disagreements as f64 > AUDIT_TOLERANCE * out.audited as f64 {
            return Err(Error::AuditFailed {
                disagreements: out.disagreements as usize,
                audited: out.audited as usize,
            });
        }
        let io_err = |source| Error::Io {
            last_durable: out.last_trial,
            source,
        };
        for (r, _) in &batch {
            sink.accept(r).map_err(io_err)?;
        }
        sink.sync().map_err(io_err)?;
        out.written += batch.len() as u64;
        out.last_trial = Some(hi - 1);
        lo = hi;
    }
    Ok(out)
}

/// Parses JSONL records; blank lines and lines starting with `#` are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(t).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        // header lines carry no trial index
        if v.get("trial_index").is_none() {
            continue;
        }
        out.push(serde_json::from_value(v).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Prepares a partially written JSONL file for appending: drops an
/// incomplete trailing line and returns the next trial index to run.
pub fn prepare_resume(path: &Path, default_start: u64) -> Result<u64> {
    let mut file = OpenOptions::new().read(true).write(true).open(path)?;
    let mut good_len = 0u64;
    let mut next = default_start;
    {
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        let mut offset = 0u64;
        loop {
            line.clear();
            let read = reader.read_line(&mut line)?;
            if read == 0 {
                break;
            }
            offset += read as u64;
            if !line.ends_with('\n') {
                break;
            }
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                match serde_json::from_str::<serde_json::Value>(t) {
                    Ok(v) => {
                        if let Some(i) = v.get("trial_index").and_then(|x| x.as_u64()) {
                            next = next.max(i + 1);
                        }
                    }
                    Err(_) => break,
                }
            }
            good_len = offset;
        }
    }
    file.set_len(good_len)?;
    file.seek(SeekFrom::End(0))?;
    Ok(next)
}

/// Opens `path` for appending records.
pub fn append_sink(path: &Path) -> Result<JsonlSink<io::BufWriter<File>>> {
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    Ok(JsonlSink::new(io::BufWriter::new(f)))
}

pub const MIN_SUMMARY_RECORDS: usize = 30;

pub const DEFAULT_TAIL_EPS: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEntry {
    pub eps: f64,
    pub exceedances: u64,
    pub probability: f64,
    pub stderr: f64,
    /// One-sided 95% bound `3/trials`, reported when no exceedance occurred.
    pub upper_95: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub trials: usize,
    pub n: usize,
    pub ensemble: String,
    pub domain: Domain,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub tails: Vec<TailEntry>,
}

fn check_homogeneous(records: &[RunRecord]) -> Result<()> {
    let first = &records[0];
    for r in records {
        if r.n != first.n || r.ensemble != first.ensemble || r.domain != first.domain {
            return Err(Error::Heterogeneous(format!(
                "trial {} has (n={}, {}, {}) but trial {} has (n={}, {}, {})",
                r.trial_index, r.n, r.ensemble, r.domain, first.trial_index, first.n, first.ensemble, first.domain
            )));
        }
    }
    Ok(())
}

struct Moments {
    mean: f64,
    /// Central moments with divisor `T`.
    m2: f64,
    m3: f64,
    m4: f64,
    t: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Moments {
        mean,
        m2: m2 / t,
        m3: m3 / t,
        m4: m4 / t,
        t,
    }
}

impl Moments {
    fn variance(&self) -> f64 {
        self.m2 * self.t / (self.t - 1.0)
    }

    /// Plug-in standard error of the unbiased variance.
    fn variance_se(&self) -> f64 {
        let s2 = self.variance();
        let t = self.t;
        ((self.m4 - s2 * s2 * (t - 3.0) / (t - 1.0)) / t).max(0.0).sqrt()
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and
/// `Normal(mu, var)`, evaluated on both sides of every jump.
pub fn ks_distance(xs: &[f64], mu: f64, var: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len() as f64;
    if var <= 0.0 {
        let below = sorted.iter().filter(|&&x| x < mu).count() as f64;
        let upto = sorted.iter().filter(|&&x| x <= mu).count() as f64;
        // point mass at mu: CDF jumps from 0 to 1 at mu
        return (below / t).max(1.0 - upto / t);
    }
    let sd = var.sqrt();
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = normal_cdf((x - mu) / sd);
        d = d.max((f - i as f64 / t).abs()).max((j as f64 / t - f).abs());
        i = j;
    }
    d
}

pub fn summarize(records: &[RunRecord]) -> Result<SummaryStats> {
    summarize_with(records, &DEFAULT_TAIL_EPS)
}

pub fn summarize_with(records: &[RunRecord], eps: &[f64]) -> Result<SummaryStats> {
    if records.len() < MIN_SUMMARY_RECORDS {
        return Err(Error::TooFewRecords {
            required: MIN_SUMMARY_RECORDS,
            got: records.len(),
        });
    }
    check_homogeneous(records)?;
    let xs: Vec<f64> = records.iter().map(|r| r.count as f64).collect();
    let m = moments(&xs);
    let var = m.variance();
    let (skew, kurt) = if m.m2 > 0.0 {
        (m.m3 / m.m2.powf(1.5), m.m4 / (m.m2 * m.m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(SummaryStats {
        trials: records.len(),
        n: records[0].n,
        ensemble: records[0].ensemble.clone(),
        domain: records[0].domain,
        mean: m.mean,
        mean_se: (var / m.t).sqrt(),
        variance: var,
        variance_se: m.variance_se(),
        skew,
        excess_kurtosis: kurt,
        ks_distance: ks_distance(&xs, m.mean, var),
        tails: tail_curve(records, eps),
    })
}

/// Bootstrap standard error of the unbiased variance.
pub fn variance_se_bootstrap(records: &[RunRecord], resamples: usize, seed: u64) -> Result<f64> {
    if records.len() < 2 || resamples < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            got: records.len().min(resamples),
        });
    }
    let xs: Vec<f64> = records.iter().map(|r| r.count as f64).collect();
    let mut rng = SeedSpec::new(seed, u64::MAX).rng();
    let mut buf = vec![0.0; xs.len()];
    let vars: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            moments(&buf).variance()
        })
        .collect();
    Ok(moments(&vars).variance().sqrt())
}

/// `P(|N - mean| ≥ εn)` for each `ε`, with the sample mean as centre.
pub fn tail_curve(records: &[RunRecord], eps: &[f64]) -> Vec<TailEntry> {
    if records.is_empty() {
        return Vec::new();
    }
    let t = records.len() as f64;
    let n = records[0].n as f64;
    let mean = records.iter().map(|r| r.count as f64).sum::<f64>() / t;
    eps.iter()
        .map(|&e| {
            let k = records
                .iter()
                .filter(|r| (r.count as f64 - mean).abs() >= e * n)
                .count() as u64;
            let p = k as f64 / t;
            TailEntry {
                eps: e,
                exceedances: k,
                probability: p,
                stderr: (p * (1.0 - p) / t).sqrt(),
                upper_95: (k == 0).then_some(3.0 / t),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KurtosisContrast {
    pub diff_var_over_n: f64,
    pub combined_se: f64,
}

fn is_upper_half(d: &Domain) -> bool {
    matches!(*d, Domain::Interval { lo, hi } if lo == 0.0 && hi == std::f64::consts::PI)
}

/// `Var_A/n - Var_B/n` for two record sets counted on `[0, π]`.
pub fn kurtosis_contrast(a: &[RunRecord], b: &[RunRecord]) -> Result<KurtosisContrast> {
    for set in [a, b] {
        if set.len() < MIN_SUMMARY_RECORDS {
            return Err(Error::TooFewRecords {
                required: MIN_SUMMARY_RECORDS,
                got: set.len(),
            });
        }
        check_homogeneous(set)?;
        if !is_upper_half(&set[0].domain) {
            return Err(Error::Domain(format!("records counted on {}, need [0, π]", set[0].domain)));
        }
    }
    if a[0].n != b[0].n {
        return Err(Error::Heterogeneous(format!("degrees {} and {}", a[0].n, b[0].n)));
    }
    let n = a[0].n as f64;
    let ma = moments(&a.iter().map(|r| r.count as f64).collect::<Vec<_>>());
    let mb = moments(&b.iter().map(|r| r.count as f64).collect::<Vec<_>>());
    Ok(KurtosisContrast {
        diff_var_over_n: (ma.variance() - mb.variance()) / n,
        combined_se: (ma.variance_se().powi(2) + mb.variance_se().powi(2)).sqrt() / n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Persistence {
    pub trials: usize,
    pub zero_count_trials: usize,
    /// Rule-of-three bound, present only when no trial had zero roots.
    pub upper_bound_95: Option<f64>,
}

pub fn persistence_counter(records: &[RunRecord]) -> Persistence {
    let zeros = records.iter().filter(|r| r.count == 0).count();
    Persistence {
        trials: records.len(),
        zero_count_trials: zeros,
        upper_bound_95: (zeros == 0 && !records.is_empty()).then(|| 3.0 / records.len() as f64),
    }
}

/// Counts grouped by value, for plotting histograms.
pub fn histogram(records: &[RunRecord]) -> BTreeMap<u64, u64> {
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(r.count).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64, count: u64) -> RunRecord {
        RunRecord {
            master_seed: 1,
            trial_index: i,
            n: 10,
            ensemble: "gaussian".into(),
            domain: Domain::Torus,
            count,
            certified: true,
            count_path: CountPath::Certified,
            wall_time: None,
        }
    }

    #[test]
    fn record_json_shape() {
        let r = rec(3, 8);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"master_seed":1,"trial_index":3,"n":10,"ensemble":"gaussian","domain":"torus","count":8,"certified":true,"count_path":"certified"}"#
        );
        let back: RunRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn constant_counts() {
        let rs: Vec<_> = (0..40).map(|i| rec(i, 12)).collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.ks_distance, 0.0);
        assert_eq!(s.mean, 12.0);
    }

    #[test]
    fn too_few_and_mixed() {
        let rs: Vec<_> = (0..10).map(|i| rec(i, 12)).collect();
        assert!(matches!(summarize(&rs), Err(Error::TooFewRecords { .. })));
        let mut rs: Vec<_> = (0..40).map(|i| rec(i, 12)).collect();
        rs[5].n = 11;
        assert!(matches!(summarize(&rs), Err(Error::Heterogeneous(_))));
    }

    #[test]
    fn moments_against_textbook() {
        // counts 0..=9 repeated: mean 4.5, unbiased variance 8.25·T/(T-1)
        let rs: Vec<_> = (0..100).map(|i| rec(i, i % 10)).collect();
        let s = summarize(&rs).unwrap();
        assert!((s.mean - 4.5).abs() < 1e-12);
        assert!((s.variance - 8.25 * 100.0 / 99.0).abs() < 1e-12);
        assert!(s.skew.abs() < 1e-12);
        // discrete uniform on 10 points: excess kurtosis -6(k²+1)/(5(k²-1))
        assert!((s.excess_kurtosis + 6.0 * 101.0 / (5.0 * 99.0)).abs() < 1e-12);
    }

    #[test]
    fn tails_monotone_and_limits() {
        let rs: Vec<_> = (0..200).map(|i| rec(i, 4 + 2 * (i % 7))).collect();
        let t = tail_curve(&rs, &[0.0, 0.05, 0.1, 0.3, 0.5, 2.3]);
        assert_eq!(t[0].probability, 1.0);
        for w in t.windows(2) {
            assert!(w[1].probability <= w[0].probability);
        }
        assert_eq!(t[5].probability, 0.0);
        assert_eq!(t[5].upper_95, Some(3.0 / 200.0));
    }

    #[test]
    fn ks_against_direct_sup() {
        let xs = [-1.0, 0.0, 0.0, 0.5, 2.0];
        let d = ks_distance(&xs, 0.2, 1.1);
        // brute force over a fine grid of x
        let mut best = 0.0f64;
        for k in -4000..4000 {
            let x = k as f64 / 1000.0;
            let f = xs.iter().filter(|&&v| v <= x).count() as f64 / 5.0;
            best = best.max((f - normal_cdf((x - 0.2) / 1.1f64.sqrt())).abs());
        }
        assert!(d >= best - 1e-12 && d - best < 2e-3, "{d} {best}");
    }

    #[test]
    fn persistence() {
        let rs: Vec<_> = (0..50).map(|i| rec(i, 2 + i % 3)).collect();
        let p = persistence_counter(&rs);
        assert_eq!((p.zero_count_trials, p.upper_bound_95), (0, Some(3.0 / 50.0)));
        let p = persistence_counter(&[rec(0, 0)]);
        assert_eq!((p.zero_count_trials, p.upper_bound_95), (1, None));
    }

    #[test]
    fn contrast_requires_half_domain() {
        let a: Vec<_> = (0..40).map(|i| rec(i, i % 5)).collect();
        assert!(matches!(kurtosis_contrast(&a, &a), Err(Error::Domain(_))));
        let h: Vec<_> = a
            .iter()
            .map(|r| RunRecord {
                domain: Domain::upper_half(),
                ..r.clone()
            })
            .collect();
        let c = kurtosis_contrast(&h, &h).unwrap();
        assert_eq!(c.diff_var_over_n, 0.0);
    }

    #[test]
    fn sweep_matches_single_trials() {
        let mut cfg = SweepConfig::new(EnsembleSpec::gaussian(), 12, 20, Domain::Torus, 77);
        cfg.threads = 2;
        let mut out: Vec<RunRecord> = Vec::new();
        let o = run_sweep(&cfg, &mut out).unwrap();
        assert_eq!(o.written, 20);
        assert_eq!(o.last_trial, Some(19));
        for r in &out {
            assert_eq!(r, &count_trial(&cfg, r.trial_index).unwrap());
            assert!(r.count % 2 == 0 && r.count <= 24);
        }
    }

    #[test]
    fn fast_sweep_audits() {
        let mut cfg = SweepConfig::new(EnsembleSpec::gaussian(), 8, 30, Domain::Torus, 5);
        cfg.path = CountPath::Fast;
        cfg.fast_grid = Some(4096);
        cfg.audit_every = 10;
        let mut out: Vec<RunRecord> = Vec::new();
        let o = run_sweep(&cfg, &mut out).unwrap();
        assert_eq!((o.audited, o.disagreements), (3, 0));
        cfg.fast_grid = Some(8);
        assert!(matches!(run_sweep(&cfg, &mut out), Err(Error::GridTooSmall { .. })));
    }

    struct Failing(usize);
    impl RecordSink for Failing {
        fn accept(&mut self, _: &RunRecord) -> io::Result<()> {
            if self.0 == 0 {
                return Err(io::Error::other("disk full"));
            }
            self.0 -= 1;
            Ok(())
        }
    }

    #[test]
    fn io_failure_reports_last_durable() {
        let cfg = SweepConfig::new(EnsembleSpec::rademacher(), 4, 600, Domain::Torus, 1);
        let err = run_sweep(&cfg, &mut Failing(300)).unwrap_err();
        match err {
            Error::Io { last_durable, .. } => assert_eq!(last_durable, Some(255)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resume_drops_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let cfg = SweepConfig::new(EnsembleSpec::gaussian(), 6, 5, Domain::Torus, 3);
        let mut sink = JsonlSink::new(Vec::new());
        run_sweep(&cfg, &mut sink).unwrap();
        let mut bytes = sink.into_inner();
        bytes.extend_from_slice(br#"{"master_seed":3,"trial_in"#);
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(prepare_resume(&path, 0).unwrap(), 5);
        let mut cfg2 = cfg.clone();
        cfg2.start = 5;
        cfg2.trials = 3;
        let mut sink = append_sink(&path).unwrap();
        run_sweep(&cfg2, &mut sink).unwrap();
        drop(sink);
        let recs = read_records(BufReader::new(File::open(&path).unwrap())).unwrap();
        let idx: Vec<u64> = recs.iter().map(|r| r.trial_index).collect();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
    }
}
