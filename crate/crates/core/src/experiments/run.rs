use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, Scheme, SweepKind};
use crate::ao::{baseline_wij, baseline_woj, optimize, AoTrace, Mode};
use crate::channels::{dbm_to_watts, gen_channels, gen_direct_bob_eve, perturb_csi, watts_to_dbm, ChannelSet, Geometry};
use crate::error::{Error, Result};
use crate::system::{link_metrics, LinkMetrics, SystemParams};

const STREAM_CHANNELS: u64 = 0;
const STREAM_DIRECT: u64 = 1;
const STREAM_CSI: u64 = 2;
const STREAM_OPTIMIZER: u64 = 16;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial`; it depends on nothing else, so channels are shared
/// across sweep points and schemes.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ trial as u64)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One row of the raw results file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub coordinate: f64,
    pub trial: usize,
    pub seed: u64,
    pub mode: Scheme,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub p_b_dbm: f64,
    pub rate_bob: f64,
    pub rate_eve: f64,
    pub secrecy: f64,
    pub secrecy_raw: f64,
    pub p_si_dbm: f64,
    pub p_j_dbm: f64,
    /// Outer AO iterations, 0 for the reference schemes.
    pub n_k: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub coordinate: f64,
    pub mode: Scheme,
    pub trials: usize,
    pub rate_bob_mean: f64,
    pub rate_bob_std: f64,
    pub rate_eve_mean: f64,
    pub rate_eve_std: f64,
    pub secrecy_mean: f64,
    pub secrecy_std: f64,
    pub n_k_mean: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ResultRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub raw_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub manifest: PathBuf,
    pub timings_csv: PathBuf,
    /// Per-iteration traces, convergence sweeps only.
    pub traces_csv: Option<PathBuf>,
}

fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Geometry and system parameters at one sweep point.
pub fn scenario_at(cfg: &ExperimentConfig, value: f64) -> (Geometry, SystemParams) {
    let mut geom = cfg.geometry.clone();
    let mut sys = cfg.system;
    match cfg.sweep {
        SweepKind::Convergence | SweepKind::SweepL | SweepKind::Single => geom.l = value as usize,
        SweepKind::SweepDistance => {
            geom.pos_ris_first = [geom.pos_bob_tx_first[0] + value, geom.pos_ris_first[1], geom.pos_ris_first[2]];
        }
        SweepKind::SweepPower => sys.p_b = dbm_to_watts(value),
    }
    (geom, sys)
}

struct TrialResult {
    records: Vec<ResultRecord>,
    traces: Vec<(Scheme, AoTrace)>,
}

/// Channels of one trial as seen by the optimizer and as used for scoring.
pub struct TrialChannels {
    pub truth: ChannelSet,
    pub estimate: ChannelSet,
    pub h_be: crate::linalg::CVec,
}

pub fn trial_channels(cfg: &ExperimentConfig, geom: &Geometry, seed: u64) -> Result<TrialChannels> {
    let truth = gen_channels(geom, &cfg.channel, &mut stream(seed, STREAM_CHANNELS))?;
    let h_be = gen_direct_bob_eve(geom, &cfg.channel, &mut stream(seed, STREAM_DIRECT))?;
    let mut estimate = truth.clone();
    if let Some(eps) = cfg.imperfect_csi_eps {
        estimate.h_ie = perturb_csi(&truth.h_ie, eps, cfg.csi_error_variance, &mut stream(seed, STREAM_CSI))?;
    }
    Ok(TrialChannels { truth, estimate, h_be })
}

fn run_trial(cfg: &ExperimentConfig, value: f64, trial: usize) -> Result<TrialResult> {
    let (geom, sys) = scenario_at(cfg, value);
    let seed = trial_seed(cfg.master_seed, trial);
    let ch = trial_channels(cfg, &geom, seed)?;
    let mut out = TrialResult { records: Vec::with_capacity(cfg.modes.len()), traces: Vec::new() };
    for (idx, &scheme) in cfg.modes.iter().enumerate() {
        let start = Instant::now();
        let (metrics, n_k, converged): (LinkMetrics, usize, bool) = match scheme {
            Scheme::Es | Scheme::Ms => {
                let mode = if scheme == Scheme::Es { Mode::Es } else { Mode::Ms };
                let mut rng = stream(seed, STREAM_OPTIMIZER + idx as u64);
                let (st, trace) = optimize(mode, &ch.estimate, &sys, &cfg.optimizer, &mut rng)
                    .map_err(|e| Error::Config(format!("{scheme} at {} = {value}, trial {trial}: {e}", cfg.sweep.coordinate())))?;
                // Scored on the true channels when the optimizer only had an estimate.
                let metrics = link_metrics(&ch.truth, &st.ris, &st.bf, &sys)?;
                let res = (metrics, trace.n_k, trace.converged());
                if cfg.sweep == SweepKind::Convergence {
                    out.traces.push((scheme, trace));
                }
                res
            }
            Scheme::Woj => (baseline_woj(&ch.truth, &sys), 0, true),
            Scheme::Wij => (baseline_wij(&ch.truth, &ch.h_be, &sys, cfg.rho)?, 0, true),
        };
        out.records.push(ResultRecord {
            coordinate: value,
            trial,
            seed,
            mode: scheme,
            l: geom.l,
            m: geom.m,
            n: geom.n,
            p_b_dbm: watts_to_dbm(sys.p_b),
            rate_bob: metrics.rate_bob,
            rate_eve: metrics.rate_eve,
            secrecy: metrics.secrecy,
            secrecy_raw: metrics.secrecy_raw,
            p_si_dbm: watts_to_dbm(metrics.p_si),
            p_j_dbm: watts_to_dbm(metrics.p_j),
            n_k,
            converged,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Runs every `(sweep value, trial)` task on `workers` threads and returns the
/// results in task order.
fn run_tasks(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let tasks: Vec<(f64, usize)> = cfg.sweep_values.iter().flat_map(|&v| (0..cfg.trials).map(move |t| (v, t))).collect();
    let slots: Vec<Mutex<Option<Result<TrialResult>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(v, t)) = tasks.get(i) else { break };
        let r = run_trial(cfg, v, t);
        *slots[i].lock().expect("result slot") = Some(r);
    };
    let workers = cfg.workers.clamp(1, tasks.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every task ran")).collect()
}

const RAW_HEADER: [&str; 15] =
    ["sweep", "coordinate", "trial", "seed", "mode", "L", "M", "N", "P_B_dbm", "R_r", "R_e", "C", "C_raw", "P_si_dbm", "P_j_dbm"];

fn raw_row(sweep: SweepKind, r: &ResultRecord) -> Vec<String> {
    vec![
        sweep.name().into(),
        num(r.coordinate),
        r.trial.to_string(),
        r.seed.to_string(),
        r.mode.name().into(),
        r.l.to_string(),
        r.m.to_string(),
        r.n.to_string(),
        num(r.p_b_dbm),
        num(r.rate_bob),
        num(r.rate_eve),
        num(r.secrecy),
        num(r.secrecy_raw),
        num(r.p_si_dbm),
        num(r.p_j_dbm),
        r.n_k.to_string(),
        u8::from(r.converged).to_string(),
    ]
}

/// Raw results as CSV text; wall times are excluded so reruns are byte-identical.
pub fn raw_csv(sweep: SweepKind, records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = RAW_HEADER.to_vec();
    header.extend(["N_k", "converged"]);
    w.write_record(&header)?;
    for r in records {
        w.write_record(raw_row(sweep, r))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Config(e.to_string()))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation per `(sweep value, scheme)`, computed from
/// the values exactly as written to the raw file.
pub fn aggregate(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Vec<AggregateRow> {
    let printed = |x: f64| num(x).parse::<f64>().unwrap_or(x);
    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let vi = cfg.sweep_values.iter().position(|&v| v == r.coordinate).unwrap_or(usize::MAX);
        let mi = cfg.modes.iter().position(|&m| m == r.mode).unwrap_or(usize::MAX);
        groups.entry((vi, mi)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let col = |f: fn(&ResultRecord) -> f64| mean_std(&rs.iter().map(|r| printed(f(r))).collect::<Vec<_>>());
            let (rb, rbs) = col(|r| r.rate_bob);
            let (re, res) = col(|r| r.rate_eve);
            let (c, cs) = col(|r| r.secrecy);
            let (nk, _) = col(|r| r.n_k as f64);
            AggregateRow {
                coordinate: rs[0].coordinate,
                mode: rs[0].mode,
                trials: rs.len(),
                rate_bob_mean: rb,
                rate_bob_std: rbs,
                rate_eve_mean: re,
                rate_eve_std: res,
                secrecy_mean: c,
                secrecy_std: cs,
                n_k_mean: nk,
            }
        })
        .collect()
}

fn aggregate_csv(sweep: SweepKind, rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([sweep.coordinate(), "mode", "trials", "R_r_mean", "R_r_std", "R_e_mean", "R_e_std", "C_mean", "C_std", "N_k_mean"])?;
    for a in rows {
        w.write_record([
            num(a.coordinate),
            a.mode.name().into(),
            a.trials.to_string(),
            num(a.rate_bob_mean),
            num(a.rate_bob_std),
            num(a.rate_eve_mean),
            num(a.rate_eve_std),
            num(a.secrecy_mean),
            num(a.secrecy_std),
            num(a.n_k_mean),
        ])?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_name: &'static str,
    crate_version: &'static str,
    config: &'a ExperimentConfig,
    trial_seeds: Vec<u64>,
    files: BTreeMap<&'static str, String>,
}

/// Runs the configured sweep and writes `raw.csv`, `aggregate.csv`,
/// `timings.csv`, `manifest.json` and, for convergence sweeps, `traces.csv`
/// into `cfg.output_path`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let results = run_tasks(cfg)?;
    let dir = &cfg.output_path;
    fs::create_dir_all(dir)?;

    let mut records = Vec::new();
    let mut traces = String::from("coordinate,trial,mode,");
    let mut first_trace = true;
    for tr in &results {
        for (scheme, trace) in &tr.traces {
            let rec = &tr.records[0];
            let csv = trace.to_csv();
            let mut lines = csv.lines();
            let head = lines.next().unwrap_or_default();
            if first_trace {
                traces.push_str(head);
                traces.push('\n');
                first_trace = false;
            }
            for line in lines {
                traces.push_str(&format!("{},{},{},{line}\n", num(rec.coordinate), rec.trial, scheme.name()));
            }
        }
        records.extend(tr.records.iter().cloned());
    }

    let aggregates = aggregate(cfg, &records);
    let raw_path = dir.join("raw.csv");
    let agg_path = dir.join("aggregate.csv");
    let tim_path = dir.join("timings.csv");
    let man_path = dir.join("manifest.json");
    fs::write(&raw_path, raw_csv(cfg.sweep, &records)?)?;
    fs::write(&agg_path, aggregate_csv(cfg.sweep, &aggregates)?)?;

    let mut timings = format!("{},trial,mode,wall_time_s\n", cfg.sweep.coordinate());
    for r in &records {
        timings.push_str(&format!("{},{},{},{:.6}\n", num(r.coordinate), r.trial, r.mode.name(), r.wall_time_s));
    }
    fs::write(&tim_path, timings)?;

    let traces_csv = if cfg.sweep == SweepKind::Convergence {
        let p = dir.join("traces.csv");
        fs::write(&p, traces)?;
        Some(p)
    } else {
        None
    };

    let mut files = BTreeMap::new();
    for (k, p) in [("raw", &raw_path), ("aggregate", &agg_path), ("timings", &tim_path)] {
        files.insert(k, file_name(p));
    }
    if let Some(p) = &traces_csv {
        files.insert("traces", file_name(p));
    }
    let manifest = Manifest {
        crate_name: env!("CARGO_PKG_NAME"),
        crate_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        trial_seeds: (0..cfg.trials).map(|t| trial_seed(cfg.master_seed, t)).collect(),
        files,
    };
    fs::write(&man_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunOutput { records, aggregates, raw_csv: raw_path, aggregate_csv: agg_path, manifest: man_path, timings_csv: tim_path, traces_csv })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::validate_config;

    fn quick(extra: &str, dir: &Path) -> ExperimentConfig {
        let text = format!("{extra}\noutput_path = {:?}\nmax_outer_iters = 5\nG = 50\n", dir.display().to_string());
        validate_config(&text).unwrap()
    }

    #[test]
    fn seeds_are_isolated_per_trial() {
        let a: Vec<u64> = (0..5).map(|t| trial_seed(7, t)).collect();
        let b: Vec<u64> = (0..8).map(|t| trial_seed(7, t)).collect();
        assert_eq!(a[..], b[..5]);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
        let mut sorted = b.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), b.len());
    }

    #[test]
    fn row_counts_follow_the_grid() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick("sweep = \"sweep_l\"\nsweep_values = [4, 9]\nmodes = \"es,woj,wij\"\ntrials = 2", dir.path());
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 12);
        assert_eq!(out.aggregates.len(), 6);
        let raw = fs::read_to_string(&out.raw_csv).unwrap();
        assert_eq!(raw.lines().count(), 13);
        let agg = fs::read_to_string(&out.aggregate_csv).unwrap();
        assert_eq!(agg.lines().count(), 7);
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out.manifest).unwrap()).unwrap();
        assert_eq!(manifest["trial_seeds"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn single_woj_matches_direct_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick("modes = \"woj\"\ntrials = 1\nmaster_seed = 11\nL = 9", dir.path());
        let out = run_experiment(&cfg).unwrap();
        let (geom, sys) = scenario_at(&cfg, 9.0);
        let ch = gen_channels(&geom, &cfg.channel, &mut stream(trial_seed(11, 0), STREAM_CHANNELS)).unwrap();
        assert_eq!(out.records[0].secrecy, baseline_woj(&ch, &sys).secrecy);
    }

    #[test]
    fn reruns_are_byte_identical_and_workers_do_not_matter() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg1 = quick("sweep = \"sweep_power\"\nsweep_values = [0, 20]\nmodes = \"es,ms,wij\"\ntrials = 2\nL = 4", d1.path());
        let mut cfg2 = quick("sweep = \"sweep_power\"\nsweep_values = [0, 20]\nmodes = \"es,ms,wij\"\ntrials = 2\nL = 4", d2.path());
        cfg2.workers = 3;
        run_experiment(&cfg1).unwrap();
        run_experiment(&cfg2).unwrap();
        let a = fs::read(d1.path().join("raw.csv")).unwrap();
        let b = fs::read(d2.path().join("raw.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aggregates_match_raw_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick("sweep = \"sweep_distance\"\nsweep_values = [0.2, 0.4]\nmodes = \"es,woj\"\ntrials = 3\nL = 4", dir.path());
        let out = run_experiment(&cfg).unwrap();
        let mut rdr = csv::Reader::from_path(&out.raw_csv).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        for a in &out.aggregates {
            let cs: Vec<f64> = rows
                .iter()
                .filter(|r| r[4] == *a.mode.name() && r[1].parse::<f64>().unwrap() == a.coordinate)
                .map(|r| r[11].parse().unwrap())
                .collect();
            let (m, s) = mean_std(&cs);
            assert_eq!((m, s), (a.secrecy_mean, a.secrecy_std));
        }
    }

    #[test]
    fn convergence_writes_traces_and_imperfect_csi_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick("sweep = \"convergence\"\nsweep_values = [4]\ntrials = 1\nimperfect_csi_eps = 0.2", dir.path());
        let out = run_experiment(&cfg).unwrap();
        let traces = fs::read_to_string(out.traces_csv.unwrap()).unwrap();
        assert!(traces.starts_with("coordinate,trial,mode,iter,"));
        assert!(traces.lines().count() >= 3);
    }
}
