use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use trigroots::ensembles::Law;
use trigroots::geometry::{self, ParameterSchedule};
use trigroots::repulsion;
use trigroots::rootcount;
use trigroots::stats::{self, CountPath, JsonlSink, RunRecord, SweepConfig};
use trigroots::suites::{self, Suite};
use trigroots::{sample_poly, Domain, EnsembleSpec, Error, Result, SeedSpec, TrigPoly};

use crate::config::Settings;

/// Keys that change neither the numbers nor their order; they stay out of
/// headers so that outputs compare byte for byte.
const UNRECORDED: &[&str] = &["threads", "output", "resume", "verdicts"];

pub fn run(name: &str, s: &Settings) -> Result<u8> {
    match name {
        "sample" => sample(s),
        "count" => count(s),
        "sweep" => sweep(s),
        "tails" => tails(s),
        "repulsion" => repulsion_cmd(s),
        "geometry" => geometry_cmd(s),
        "verify" => verify(s),
        "report" => report(s),
        other => Err(Error::Parameter(format!("unknown command `{other}`"))),
    }
}

fn header(command: &str, s: &Settings) -> Value {
    let conflicts: Vec<Value> = s
        .conflicts
        .iter()
        .filter(|c| !UNRECORDED.contains(&c.key.as_str()))
        .map(|c| serde_json::to_value(c).expect("plain data"))
        .collect();
    let mut sources = s.sources_json();
    sources.retain(|k, _| !UNRECORDED.contains(&k.as_str()));
    json!({
        "tool": "trigroots",
        "version": trigroots::VERSION,
        "command": command,
        "config": Value::Object(s.config_json(UNRECORDED)),
        "sources": Value::Object(sources),
        "conflicts": conflicts,
    })
}

fn csv_header(command: &str, s: &Settings) -> String {
    format!("# header {}\n", header(command, s))
}

fn stdout_write(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn print_json(v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    stdout_write(&text)
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data")
}

fn ensemble(s: &Settings) -> Result<EnsembleSpec> {
    s.require("ensemble")
}

fn path(s: &Settings) -> Result<CountPath> {
    if s.switch("certified")? {
        return Ok(CountPath::Certified);
    }
    s.require("path")
}

fn sample(s: &Settings) -> Result<u8> {
    let spec = ensemble(s)?;
    let n: usize = s.require("n")?;
    let seed: u64 = s.require("seed")?;
    let first: u64 = s.require("trial")?;
    let count: u64 = s.require("count")?;
    let format: String = s.require("format")?;
    let polys: Vec<(u64, TrigPoly)> = (first..first + count)
        .map(|i| sample_poly(&spec, n, SeedSpec::new(seed, i)).map(|p| (i, p)))
        .collect::<Result<_>>()?;
    match format.as_str() {
        "csv" => {
            let mut text = csv_header("sample", s);
            for (_, p) in &polys {
                text.push_str(&p.to_csv_row());
                text.push('\n');
            }
            stdout_write(&text)?;
        }
        "json" => {
            let rows: Vec<Value> = polys
                .iter()
                .map(|(i, p)| json!({"trial_index": i, "n": p.degree(), "cos": p.cos_coeffs(), "sin": p.sin_coeffs()}))
                .collect();
            print_json(&json!({"header": header("sample", s), "polynomials": rows}))?;
        }
        other => return Err(Error::Parameter(format!("format `{other}`: expected csv or json"))),
    }
    Ok(0)
}

fn count_one(p: &TrigPoly, domain: Domain, path: CountPath, grid: Option<usize>, budget: Option<usize>) -> Result<Value> {
    match path {
        CountPath::Certified => {
            let budget = budget.unwrap_or_else(|| rootcount::default_budget(p.degree()));
            let c = rootcount::count_certified(p, domain, budget)?;
            let mut v = to_value(&c);
            v["count_path"] = json!("certified");
            Ok(v)
        }
        CountPath::Fast => {
            let k = grid.unwrap_or_else(|| rootcount::fast_min_grid(p.degree()));
            let c = rootcount::count_fast_in(p, k, domain)?;
            Ok(json!({"count": c, "certified": false, "count_path": "fast", "grid": k}))
        }
    }
}

fn count(s: &Settings) -> Result<u8> {
    let domain: Domain = s.require("domain")?;
    let path = path(s)?;
    let grid: Option<usize> = s.get("grid")?;
    let budget: Option<usize> = s.get("budget")?;
    let h = header("count", s);
    if let Some(input) = s.raw("input") {
        let file = BufReader::new(File::open(input)?);
        let mut results = Vec::new();
        for line in file.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let p = TrigPoly::from_csv_row(t)?;
            results.push(count_one(&p, domain, path, grid, budget)?);
        }
        print_json(&json!({"header": h, "results": results}))?;
    } else {
        let spec = ensemble(s)?;
        let n: usize = s.require("n")?;
        let seed: u64 = s.require("seed")?;
        let trial: u64 = s.require("trial")?;
        let p = sample_poly(&spec, n, SeedSpec::new(seed, trial))?;
        print_json(&json!({"header": h, "result": count_one(&p, domain, path, grid, budget)?}))?;
    }
    Ok(0)
}

// Next trial index per degree in an existing sweep file, after dropping a
// torn trailing line; also checks that the file was written with the same
// settings.
fn resume_state(file: &Path, h: &Value) -> Result<BTreeMap<usize, u64>> {
    stats::prepare_resume(file, 0)?;
    let reader = BufReader::new(File::open(file)?);
    let mut lines = reader.lines();
    if let Some(first) = lines.next() {
        let first = first?;
        let old: Value = serde_json::from_str(first.trim())
            .map_err(|e| Error::Parse(format!("{}: first line: {e}", file.display())))?;
        let old_cfg = old.get("header").and_then(|x| x.get("config"));
        if old_cfg != h.get("header").and_then(|x| x.get("config")) {
            return Err(Error::Parameter(format!(
                "{} was written with different settings; refusing to resume",
                file.display()
            )));
        }
    }
    let records = stats::read_records(BufReader::new(File::open(file)?))?;
    let mut next = BTreeMap::new();
    for r in records {
        let e = next.entry(r.n).or_insert(0);
        *e = (*e).max(r.trial_index + 1);
    }
    Ok(next)
}

fn sweep(s: &Settings) -> Result<u8> {
    let spec = ensemble(s)?;
    let ns: Vec<usize> = s
        .list("n")?
        .ok_or_else(|| Error::Parameter("missing required setting `n`".into()))?;
    let trials: u64 = s.require("trials")?;
    let seed: u64 = s.require("seed")?;
    let domain: Domain = s.require("domain")?;
    let mut base = SweepConfig::new(spec, 1, trials, domain, seed);
    base.path = path(s)?;
    base.fast_grid = s.get("grid")?;
    base.audit_every = s.require("audit_every")?;
    base.threads = s.require("threads")?;
    base.timings = s.switch("timings")?;
    let resume = s.switch("resume")?;
    let h = json!({"header": header("sweep", s)});
    let header_line = format!("{h}\n");

    let output = s.raw("output").map(Path::new);
    let mut done: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sink: JsonlSink<Box<dyn Write>> = match output {
        Some(file) => {
            let existing = resume && file.exists() && fs::metadata(file)?.len() > 0;
            if existing {
                done = resume_state(file, &h)?;
                let f = fs::OpenOptions::new().append(true).open(file)?;
                JsonlSink::new(Box::new(BufWriter::new(f)))
            } else {
                let mut f = BufWriter::new(File::create(file)?);
                f.write_all(header_line.as_bytes())?;
                f.flush()?;
                JsonlSink::new(Box::new(f))
            }
        }
        None => {
            if resume {
                return Err(Error::Parameter("resume needs an output file".into()));
            }
            let mut out = io::stdout().lock();
            out.write_all(header_line.as_bytes())?;
            JsonlSink::new(Box::new(out))
        }
    };
    for &n in &ns {
        let start = done.get(&n).copied().unwrap_or(0);
        if start >= trials {
            continue;
        }
        let mut cfg = base.clone();
        cfg.n = n;
        cfg.start = start;
        cfg.trials = trials - start;
        let outcome = stats::run_sweep(&cfg, &mut sink)?;
        if outcome.audited > 0 {
            eprintln!(
                "n = {n}: {} of {} audited fast counts disagreed",
                outcome.disagreements, outcome.audited
            );
        }
    }
    Ok(0)
}

fn load_records(s: &Settings) -> Result<Vec<RunRecord>> {
    let inputs: Vec<String> = s
        .list("input")?
        .ok_or_else(|| Error::Parameter("missing required setting `input`".into()))?;
    let mut out = Vec::new();
    for f in inputs {
        let reader = BufReader::new(File::open(&f)?);
        out.extend(stats::read_records(reader)?);
    }
    Ok(out)
}

// Records grouped by (ensemble, n, domain), in that order.
fn groups(records: Vec<RunRecord>) -> BTreeMap<(String, usize, String), Vec<RunRecord>> {
    let mut out: BTreeMap<(String, usize, String), Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.ensemble.clone(), r.n, r.domain.to_string())).or_default().push(r);
    }
    out
}

fn eps_list(s: &Settings) -> Result<Vec<f64>> {
    Ok(s.list("eps")?.unwrap_or_else(|| stats::DEFAULT_TAIL_EPS.to_vec()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn tails(s: &Settings) -> Result<u8> {
    let eps = eps_list(s)?;
    let mut text = csv_header("tails", s);
    text.push_str("ensemble,n,domain,trials,eps,exceedances,probability,stderr,upper_95,rate\n");
    for ((ens, n, dom), recs) in groups(load_records(s)?) {
        for t in stats::tail_curve(&recs, &eps) {
            let rate = (t.exceedances > 0).then(|| -t.probability.ln() / n as f64);
            let _ = writeln!(
                text,
                "{ens},{n},\"{dom}\",{},{},{},{},{},{},{}",
                recs.len(),
                t.eps,
                t.exceedances,
                t.probability,
                t.stderr,
                opt(t.upper_95),
                opt(rate)
            );
        }
    }
    stdout_write(&text)?;
    Ok(0)
}

fn repulsion_cmd(s: &Settings) -> Result<u8> {
    let spec = ensemble(s)?;
    let n: usize = s.require("n")?;
    let seed: u64 = s.require("seed")?;
    let trials: u64 = s.get("trials")?.unwrap_or(1_000_000);
    let t: f64 = s.require("t")?;
    let alpha: f64 = s.require("alpha")?;
    let beta: f64 = s.require("beta")?;
    let pool = stats::thread_pool(s.require("threads")?)?;
    let est = pool.install(|| repulsion::empirical_smallball(&spec, t, n, alpha, beta, trials, seed))?;
    let oracle = if spec.law == Law::Gaussian {
        Some(repulsion::gaussian_smallball(t, n, alpha, beta)?)
    } else {
        None
    };
    let result = json!({
        "estimate": est.estimate,
        "stderr": est.stderr,
        "hits": est.hits,
        "trials": est.trials,
        "oracle": oracle,
        "ratio_to_alphabeta": est.ratio_to_alphabeta(alpha, beta),
        "condition_t": est.condition_t,
        "in_regime": est.in_regime,
    });
    print_json(&json!({"header": header("repulsion", s), "result": result}))?;
    Ok(0)
}

fn geometry_cmd(s: &Settings) -> Result<u8> {
    let spec = ensemble(s)?;
    let n: usize = s.require("n")?;
    let seed: u64 = s.require("seed")?;
    let eps: f64 = s.get("eps")?.unwrap_or(0.2);
    let c0: f64 = s.require("c0")?;
    let sched = match s.get::<f64>("r")? {
        Some(r) => ParameterSchedule::new(eps, c0, r)?,
        None => ParameterSchedule::with_window_fraction(eps, c0, s.require("window_fraction")?)?,
    };
    let h = header("geometry", s);
    if let Some(trials) = s.get::<u64>("trials")? {
        if s.is_set("verdicts") {
            return Err(Error::Parameter("verdicts are written for a single trial only".into()));
        }
        let pool = stats::thread_pool(s.require("threads")?)?;
        let all = pool.install(|| geometry::geometry_sweep(&spec, n, &sched, trials, seed))?;
        let rarity = geometry::rarity_report(&all, &sched, n);
        print_json(&json!({"header": h, "schedule": to_value(&sched), "rarity": to_value(&rarity), "trials": to_value(&all)}))?;
    } else {
        let trial: u64 = s.require("trial")?;
        let p = sample_poly(&spec, n, SeedSpec::new(seed, trial))?;
        let (cls, summary) = geometry::geometry_trial(&p, &sched, trial)?;
        let runs = cls.runs();
        if let Some(file) = s.raw("verdicts") {
            let mut text = csv_header("geometry", s);
            text.push_str("first,last,verdict\n");
            for (a, b, v) in &runs {
                let _ = writeln!(text, "{a},{b},{v}");
            }
            fs::write(file, text)?;
        }
        print_json(&json!({"header": h, "schedule": to_value(&sched), "trial": to_value(&summary), "runs": runs.len()}))?;
    }
    Ok(0)
}

fn verify(s: &Settings) -> Result<u8> {
    let names: Vec<String> = s.list("suite")?.unwrap_or_default();
    let suites: Vec<Suite> = if names.iter().any(|x| x == "all") {
        Suite::ALL.to_vec()
    } else {
        names.iter().map(|x| x.parse()).collect::<Result<_>>()?
    };
    let trials: u64 = s.get("trials")?.unwrap_or(100);
    let seed: u64 = s.require("seed")?;
    let mut text = csv_header("verify", s);
    text.push_str("suite,trials,passed,violations,skipped\n");
    let mut violations = 0;
    for suite in suites {
        let r = suites::run_suite(suite, trials, seed);
        for row in r.rows.iter().filter(|x| x.outcome == suites::Outcome::Fail) {
            eprintln!(
                "violation: {} trial {} (n = {}): {} > {} {}",
                row.suite, row.trial, row.n, row.lhs, row.rhs, row.note
            );
        }
        violations += r.violations;
        let _ = writeln!(text, "{},{},{},{},{}", r.suite, r.trials, r.passed, r.violations, r.skipped);
    }
    stdout_write(&text)?;
    Ok(u8::from(violations > 0))
}

fn report(s: &Settings) -> Result<u8> {
    let eps = eps_list(s)?;
    let boot: usize = s.require("bootstrap")?;
    let plot = s.switch("plot_data")?;
    let mut text = csv_header("report", s);
    let grouped = groups(load_records(s)?);
    if plot {
        for (block, ((ens, n, dom), recs)) in grouped.iter().enumerate() {
            let _ = writeln!(text, "# block {block}: histogram {ens} n={n} domain={dom}");
            text.push_str("# count frequency\n");
            for (c, k) in stats::histogram(recs) {
                let _ = writeln!(text, "{c} {}", k as f64 / recs.len() as f64);
            }
            text.push_str("\n\n");
        }
        for (i, ((ens, n, dom), recs)) in grouped.iter().enumerate() {
            let _ = writeln!(text, "# block {}: tails {ens} n={n} domain={dom}", grouped.len() + i);
            text.push_str("# eps probability stderr\n");
            for t in stats::tail_curve(recs, &eps) {
                let _ = writeln!(text, "{} {} {}", t.eps, t.probability, t.stderr);
            }
            text.push_str("\n\n");
        }
    } else {
        text.push_str(
            "ensemble,n,domain,trials,mean,mean_se,mean_over_n,variance,variance_se,variance_over_n,\
             skew,excess_kurtosis,ks_distance,zero_count_trials\n",
        );
        for ((ens, n, dom), recs) in &grouped {
            let st = stats::summarize_with(recs, &eps)?;
            let var_se = if boot > 0 {
                stats::variance_se_bootstrap(recs, boot, 0)?
            } else {
                st.variance_se
            };
            let zeros = stats::persistence_counter(recs).zero_count_trials;
            let nf = *n as f64;
            let _ = writeln!(
                text,
                "{ens},{n},\"{dom}\",{},{},{},{},{},{},{},{},{},{},{zeros}",
                st.trials,
                st.mean,
                st.mean_se,
                st.mean / nf,
                st.variance,
                var_se,
                st.variance / nf,
                st.skew,
                st.excess_kurtosis,
                st.ks_distance
            );
        }
    }
    stdout_write(&text)?;
    Ok(0)
}
