use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::ao::{AoOptions, InitStrategy};
use crate::channels::{dbm_to_watts, watts_to_dbm, ChannelParams, CsiErrorVariance, GainModel, Geometry, Point};
use crate::error::Error;
use crate::mode::RoundingScore;
use crate::system::SystemParams;

/// Largest RIS size allowed without `full_scale`.
pub const DESK_SCALE_MAX_L: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Per-iteration AO traces; sweep values are RIS sizes.
    Convergence,
    SweepL,
    /// Sweep values are the x-offset (m) of the RIS grid from the Bob transmit array.
    SweepDistance,
    /// Sweep values are jamming powers `P_B` in dBm.
    SweepPower,
    /// One scenario point; the sweep value is the RIS size.
    Single,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] =
        [SweepKind::Convergence, SweepKind::SweepL, SweepKind::SweepDistance, SweepKind::SweepPower, SweepKind::Single];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Convergence => "convergence",
            SweepKind::SweepL => "sweep_l",
            SweepKind::SweepDistance => "sweep_distance",
            SweepKind::SweepPower => "sweep_power",
            SweepKind::Single => "single",
        }
    }

    /// Header of the sweep-coordinate column.
    pub fn coordinate(self) -> &'static str {
        match self {
            SweepKind::SweepDistance => "distance_m",
            SweepKind::SweepPower => "P_B_dbm",
            _ => "L",
        }
    }

    pub fn default_values(self, geom: &Geometry) -> Vec<f64> {
        match self {
            SweepKind::Convergence => vec![16.0, 36.0],
            SweepKind::SweepL => vec![16.0, 36.0, 64.0],
            SweepKind::SweepDistance => vec![0.1, 0.2, 0.3, 0.4, 0.5],
            SweepKind::SweepPower => vec![0.0, 10.0, 20.0, 30.0, 40.0],
            SweepKind::Single => vec![geom.l as f64],
        }
    }

    pub fn default_schemes(self) -> Vec<Scheme> {
        match self {
            SweepKind::Convergence => vec![Scheme::Es, Scheme::Ms],
            _ => vec![Scheme::Es, Scheme::Ms, Scheme::Woj, Scheme::Wij],
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown sweep `{s}` (expected one of convergence, sweep_l, sweep_distance, sweep_power, single)"))
    }
}

/// Scheme evaluated at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Es,
    Ms,
    /// No jamming.
    Woj,
    /// Direct jamming with residual self-interference.
    Wij,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Es => "es",
            Scheme::Ms => "ms",
            Scheme::Woj => "woj",
            Scheme::Wij => "wij",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "es" => Ok(Scheme::Es),
            "ms" => Ok(Scheme::Ms),
            "woj" => Ok(Scheme::Woj),
            "wij" => Ok(Scheme::Wij),
            other => Err(format!("unknown mode `{other}` (expected es, ms, woj or wij)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub csi_error_variance: CsiErrorVariance,
    pub system: SystemParams,
    /// Residual self-interference factor of the direct-jamming reference.
    pub rho: f64,
    pub optimizer: AoOptions,
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
    pub modes: Vec<Scheme>,
    pub trials: usize,
    pub master_seed: u64,
    pub imperfect_csi_eps: Option<f64>,
    pub output_path: PathBuf,
    /// Lifts the desk-scale cap on the RIS size.
    pub full_scale: bool,
    /// Trial worker threads.
    pub workers: usize,
    /// `key = value` for every key that took its default.
    pub defaulted: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        validate_config("").expect("defaults are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line of the offending key, when it can be located.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

/// Every problem found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("geometry", &["alice", "eve", "bob_tx", "bob_rx", "ris", "element_spacing", "M", "N", "L"]),
    ("channel", &["wavelength", "rician_K", "rician_exponent", "rayleigh_exponent", "rayleigh_variance", "gain_model", "csi_error_variance"]),
    ("system", &["P_A_dbm", "P_B_dbm", "noise_r_dbm", "noise_e_dbm", "P_th_dbm", "rho_db"]),
    ("optimizer", &["delta", "max_outer_iters", "init", "G", "safeguard", "extrapolate", "rounding", "randomization_width", "solver_max_iters", "solver_tol"]),
    ("experiment", &["sweep", "sweep_values", "modes", "trials", "master_seed", "imperfect_csi_eps", "output_path", "full_scale", "workers"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

/// Maps `(section, key)` to the line it is written on.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim().trim_matches('"');
        if k == key && (current == section || current.is_empty()) {
            return Some(i + 1);
        }
    }
    None
}

/// Collects the raw value of every known key, reporting unknown ones.
struct Entries<'a> {
    text: &'a str,
    values: Vec<(&'static str, String, Value)>,
    issues: Vec<ConfigIssue>,
    defaulted: Vec<String>,
}

impl<'a> Entries<'a> {
    fn issue(&mut self, section: &str, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { line: locate(self.text, section, key), key: key.to_string(), message: message.into() });
    }

    fn take(&mut self, section: &'static str, key: &str) -> Option<Value> {
        let pos = self.values.iter().position(|(s, k, _)| *s == section && k == key)?;
        Some(self.values.swap_remove(pos).2)
    }

    fn get<T>(&mut self, section: &'static str, key: &str, default: T, parse: impl Fn(&Value) -> Result<T, String>, show: impl Fn(&T) -> String) -> T {
        match self.take(section, key) {
            Some(v) => match parse(&v) {
                Ok(t) => t,
                Err(msg) => {
                    self.issue(section, key, msg);
                    default
                }
            },
            None => {
                self.defaulted.push(format!("{key} = {}", show(&default)));
                default
            }
        }
    }
}

fn as_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Float(f) if f.is_finite() => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a finite number, got {other}")),
    }
}

fn as_usize(v: &Value) -> Result<usize, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(format!("expected a non-negative integer, got {other}")),
    }
}

fn as_bool(v: &Value) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("expected true or false, got {v}"))
}

fn as_str(v: &Value) -> Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, got {v}"))
}

fn as_point(v: &Value) -> Result<Point, String> {
    let arr = v.as_array().ok_or_else(|| format!("expected [x, y, z], got {v}"))?;
    if arr.len() != 3 {
        return Err(format!("expected 3 coordinates, got {}", arr.len()));
    }
    Ok([as_f64(&arr[0])?, as_f64(&arr[1])?, as_f64(&arr[2])?])
}

fn as_f64_list(v: &Value) -> Result<Vec<f64>, String> {
    let arr = v.as_array().ok_or_else(|| format!("expected a list of numbers, got {v}"))?;
    arr.iter().map(as_f64).collect()
}

fn as_schemes(v: &Value) -> Result<Vec<Scheme>, String> {
    let items: Vec<String> = match v {
        Value::String(s) => s.split(',').map(str::to_string).collect(),
        Value::Array(a) => a.iter().map(|x| as_str(x).map(str::to_string)).collect::<Result<_, _>>()?,
        other => return Err(format!("expected a list of modes, got {other}")),
    };
    let mut out: Vec<Scheme> = Vec::new();
    for s in items {
        let m: Scheme = s.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn fmt_point(p: &Point) -> String {
    format!("[{}, {}, {}]", p[0], p[1], p[2])
}

fn fmt_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
}

/// Parses and checks the sectioned `key = value` config text. Missing keys take
/// the reference-scenario defaults and are listed in `defaulted`.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        ConfigErrors(vec![ConfigIssue { line, key: "<syntax>".into(), message: e.message().to_string() }])
    })?;

    let mut en = Entries { text, values: Vec::new(), issues: Vec::new(), defaulted: Vec::new() };
    for (name, value) in table {
        if let Some((section, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) {
            let Value::Table(inner) = value else {
                en.issue("", &name, "section name used as a key");
                continue;
            };
            for (k, v) in inner {
                if keys.contains(&k.as_str()) {
                    en.values.push((section, k, v));
                } else {
                    let hint = section_of(&k).map(|s| format!(" (belongs in [{s}])")).unwrap_or_default();
                    en.issue(section, &k, format!("unknown key in [{section}]{hint}"));
                }
            }
        } else if let Some(section) = section_of(&name) {
            en.values.push((section, name, value));
        } else {
            en.issue("", &name, "unknown key");
        }
    }

    let g0 = Geometry::default();
    let c0 = ChannelParams::default();
    let s0 = SystemParams::default();
    let a0 = AoOptions::default();
    let num = |x: &f64| x.to_string();
    let int = |x: &usize| x.to_string();
    let boolean = |x: &bool| x.to_string();

    let geometry = Geometry {
        pos_alice: en.get("geometry", "alice", g0.pos_alice, as_point, fmt_point),
        pos_eve: en.get("geometry", "eve", g0.pos_eve, as_point, fmt_point),
        pos_bob_tx_first: en.get("geometry", "bob_tx", g0.pos_bob_tx_first, as_point, fmt_point),
        pos_bob_rx_first: en.get("geometry", "bob_rx", g0.pos_bob_rx_first, as_point, fmt_point),
        pos_ris_first: en.get("geometry", "ris", g0.pos_ris_first, as_point, fmt_point),
        element_spacing: en.get("geometry", "element_spacing", g0.element_spacing, as_f64, num),
        m: en.get("geometry", "M", g0.m, as_usize, int),
        n: en.get("geometry", "N", g0.n, as_usize, int),
        l: en.get("geometry", "L", g0.l, as_usize, int),
    };
    let gain_model = en.get(
        "channel",
        "gain_model",
        c0.gain_model,
        |v| match as_str(v)? {
            "isotropic" => Ok(GainModel::IsotropicUnit),
            "cosine" => Ok(GainModel::Cosine),
            o => Err(format!("unknown gain model `{o}` (expected isotropic or cosine)")),
        },
        |g| if *g == GainModel::Cosine { "\"cosine\"".into() } else { "\"isotropic\"".into() },
    );
    let channel = ChannelParams {
        wavelength: en.get("channel", "wavelength", c0.wavelength, as_f64, num),
        rician_k: en.get("channel", "rician_K", c0.rician_k, as_f64, num),
        rician_pathloss_exp: en.get("channel", "rician_exponent", c0.rician_pathloss_exp, as_f64, num),
        rayleigh_pathloss_exp: en.get("channel", "rayleigh_exponent", c0.rayleigh_pathloss_exp, as_f64, num),
        rayleigh_var: en.get("channel", "rayleigh_variance", c0.rayleigh_var, as_f64, num),
        gain_model,
    };
    let csi_error_variance = en.get(
        "channel",
        "csi_error_variance",
        CsiErrorVariance::Magnitude,
        |v| match as_str(v)? {
            "magnitude" => Ok(CsiErrorVariance::Magnitude),
            "power" => Ok(CsiErrorVariance::Power),
            o => Err(format!("unknown variance model `{o}` (expected magnitude or power)")),
        },
        |m| if *m == CsiErrorVariance::Power { "\"power\"".into() } else { "\"magnitude\"".into() },
    );

    let dbm = |k: &'static str, w: f64, en: &mut Entries| dbm_to_watts(en.get("system", k, watts_to_dbm(w), as_f64, num));
    let system = SystemParams {
        p_a: dbm("P_A_dbm", s0.p_a, &mut en),
        p_b: dbm("P_B_dbm", s0.p_b, &mut en),
        noise_r: dbm("noise_r_dbm", s0.noise_r, &mut en),
        noise_e: dbm("noise_e_dbm", s0.noise_e, &mut en),
        p_th: dbm("P_th_dbm", s0.p_th, &mut en),
    };
    let rho = 10f64.powf(en.get("system", "rho_db", -110.0, as_f64, num) / 10.0);

    let mut solver_opts = a0.solver_opts;
    solver_opts.max_iters = en.get("optimizer", "solver_max_iters", solver_opts.max_iters, as_usize, int);
    solver_opts.tol_obj = en.get("optimizer", "solver_tol", solver_opts.tol_obj, as_f64, num);
    let optimizer = AoOptions {
        delta: en.get("optimizer", "delta", a0.delta, as_f64, num),
        max_outer_iters: en.get("optimizer", "max_outer_iters", a0.max_outer_iters, as_usize, int),
        init_strategy: en.get(
            "optimizer",
            "init",
            a0.init_strategy,
            |v| match as_str(v)? {
                "matched_filter" => Ok(InitStrategy::MatchedFilter),
                "random_phase" => Ok(InitStrategy::RandomPhase),
                o => Err(format!("unknown init `{o}` (expected matched_filter or random_phase)")),
            },
            |s| if *s == InitStrategy::RandomPhase { "\"random_phase\"".into() } else { "\"matched_filter\"".into() },
        ),
        solver_opts,
        g: en.get("optimizer", "G", a0.g, as_usize, int),
        safeguard: en.get("optimizer", "safeguard", a0.safeguard, as_bool, boolean),
        width: en.get("optimizer", "randomization_width", a0.width, as_usize, int),
        rounding: en.get(
            "optimizer",
            "rounding",
            a0.rounding,
            |v| match as_str(v)? {
                "exact" => Ok(RoundingScore::Exact),
                "lifted" => Ok(RoundingScore::Lifted),
                "lifted_swapped" => Ok(RoundingScore::LiftedSwapped),
                o => Err(format!("unknown rounding score `{o}` (expected exact, lifted or lifted_swapped)")),
            },
            |r| format!("\"{}\"", match r {
                RoundingScore::Exact => "exact",
                RoundingScore::Lifted => "lifted",
                RoundingScore::LiftedSwapped => "lifted_swapped",
            }),
        ),
        extrapolate: en.get("optimizer", "extrapolate", a0.extrapolate, as_bool, boolean),
    };

    let sweep = en.get("experiment", "sweep", SweepKind::Single, |v| as_str(v)?.parse(), |s| format!("\"{}\"", s.name()));
    let sweep_values = en.get("experiment", "sweep_values", sweep.default_values(&geometry), as_f64_list, |v| fmt_list(v));
    let modes = en.get("experiment", "modes", sweep.default_schemes(), as_schemes, |m| {
        format!("[{}]", m.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", "))
    });
    let trials = en.get("experiment", "trials", 20, as_usize, int);
    let master_seed = en.get(
        "experiment",
        "master_seed",
        0u64,
        |v| match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            o => Err(format!("expected a non-negative integer, got {o}")),
        },
        |s| s.to_string(),
    );
    let imperfect_csi_eps = match en.take("experiment", "imperfect_csi_eps") {
        Some(v) => match as_f64(&v) {
            Ok(e) => Some(e),
            Err(m) => {
                en.issue("experiment", "imperfect_csi_eps", m);
                None
            }
        },
        None => None,
    };
    let output_path = en.get("experiment", "output_path", PathBuf::from("results"), |v| as_str(v).map(PathBuf::from), |p| format!("{:?}", p.display().to_string()));
    let full_scale = en.get("experiment", "full_scale", false, as_bool, boolean);
    let workers = en.get("experiment", "workers", 1, as_usize, int);

    let mut cfg = ExperimentConfig {
        geometry,
        channel,
        csi_error_variance,
        system,
        rho,
        optimizer,
        sweep,
        sweep_values,
        modes,
        trials,
        master_seed,
        imperfect_csi_eps,
        output_path,
        full_scale,
        workers,
        defaulted: Vec::new(),
    };
    let mut issues = std::mem::take(&mut en.issues);
    for issue in cfg.check() {
        let section = section_of(&issue.key).unwrap_or("");
        issues.push(ConfigIssue { line: locate(text, section, &issue.key), ..issue });
    }
    if !issues.is_empty() {
        return Err(ConfigErrors(issues));
    }
    cfg.defaulted = en.defaulted;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Semantic checks on an assembled config (bounds, desk-scale caps).
    pub fn check(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |key: &str, message: String| out.push(ConfigIssue { line: None, key: key.to_string(), message });
        if self.trials == 0 {
            bad("trials", "must be >= 1".into());
        }
        if self.workers == 0 {
            bad("workers", "must be >= 1".into());
        }
        if self.sweep_values.is_empty() {
            bad("sweep_values", "must not be empty".into());
        }
        if self.modes.is_empty() {
            bad("modes", "must not be empty".into());
        }
        if self.sweep == SweepKind::Convergence {
            if let Some(m) = self.modes.iter().find(|m| matches!(m, Scheme::Woj | Scheme::Wij)) {
                bad("modes", format!("`{m}` has no iteration trace; convergence runs accept es and ms only"));
            }
        }
        if let Some(e) = self.imperfect_csi_eps {
            if !(0.0..=1.0).contains(&e) {
                bad("imperfect_csi_eps", format!("must lie in [0, 1], got {e}"));
            }
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            bad("rho_db", "must give a finite factor".into());
        }
        let sized = matches!(self.sweep, SweepKind::Convergence | SweepKind::SweepL | SweepKind::Single);
        for &v in &self.sweep_values {
            let ok = match self.sweep {
                _ if !v.is_finite() => false,
                _ if sized => v >= 1.0 && v.fract() == 0.0,
                SweepKind::SweepDistance => v > 0.0,
                _ => true,
            };
            if !ok {
                bad("sweep_values", format!("invalid {} value {v}", self.sweep.coordinate()));
            }
        }
        let largest = if sized { self.sweep_values.iter().fold(self.geometry.l as f64, |a, &b| a.max(b)) } else { self.geometry.l as f64 };
        if !self.full_scale && largest > DESK_SCALE_MAX_L as f64 {
            bad(if sized { "sweep_values" } else { "L" }, format!("L = {largest} exceeds the desk-scale cap of {DESK_SCALE_MAX_L}; set full_scale = true"));
        }
        if let Err(e) = self.geometry.validate() {
            bad("L", e.to_string());
        }
        if let Err(e) = self.channel.validate() {
            bad("wavelength", e.to_string());
        }
        if let Err(e) = self.system.validate() {
            bad("P_A_dbm", e.to_string());
        }
        if let Err(e) = self.optimizer.validate() {
            bad("delta", e.to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let issues = self.check();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = validate_config("").unwrap();
        assert_eq!(cfg.geometry, Geometry::default());
        assert_eq!(cfg.system, SystemParams::default());
        assert_eq!(cfg.channel.wavelength, 0.05);
        assert_eq!(cfg.channel.rayleigh_pathloss_exp, 4.0);
        assert_eq!(cfg.channel.rician_pathloss_exp, 2.5);
        assert_eq!(cfg.channel.rician_k, 3.0);
        assert_eq!(cfg.optimizer.delta, 1e-5);
        assert_eq!(cfg.optimizer.g, 1000);
        assert!((cfg.rho - 1e-11).abs() < 1e-24);
        assert_eq!(cfg.trials, 20);
        assert!(cfg.defaulted.iter().any(|d| d.starts_with("P_B_dbm = 10")));
    }

    #[test]
    fn zero_trials_is_rejected_with_location() {
        let err = validate_config("[experiment]\ntrials = 0\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].key, "trials");
        assert_eq!(err.0[0].line, Some(2));
        assert!(err.to_string().contains(">= 1"));
    }

    #[test]
    fn power_in_dbm_converts_to_watts() {
        let cfg = validate_config("P_B_dbm = 10").unwrap();
        assert!((cfg.system.p_b - 0.01).abs() < 1e-15);
        let cfg = validate_config("[system]\nP_B_dbm = 40").unwrap();
        assert!((cfg.system.p_b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_misplaced_keys_are_errors() {
        let err = validate_config("[system]\nP_B_dmb = 10\ntrials = 3\n[geometry]\nL = \"many\"\n").unwrap_err();
        let msgs: Vec<String> = err.0.iter().map(ToString::to_string).collect();
        assert_eq!(msgs.len(), 3, "{msgs:?}");
        assert!(msgs[0].starts_with("line 2") && msgs[0].contains("unknown key"));
        assert!(msgs[1].starts_with("line 3") && msgs[1].contains("[experiment]"));
        assert!(msgs[2].starts_with("line 5") && msgs[2].contains("integer"));
    }

    #[test]
    fn sweeps_modes_and_caps() {
        let cfg = validate_config("sweep = \"sweep_l\"\nmodes = \"es,woj\"").unwrap();
        assert_eq!(cfg.sweep_values, vec![16.0, 36.0, 64.0]);
        assert_eq!(cfg.modes, vec![Scheme::Es, Scheme::Woj]);
        assert!(validate_config("sweep = \"sweep_l\"\nsweep_values = [100]").is_err());
        assert!(validate_config("sweep = \"sweep_l\"\nsweep_values = [100]\nfull_scale = true").is_ok());
        assert!(validate_config("sweep = \"convergence\"\nmodes = [\"woj\"]").is_err());
        assert!(validate_config("modes = [\"xs\"]").is_err());
        assert!(validate_config("sweep = \"sideways\"").is_err());
        assert!(validate_config("imperfect_csi_eps = 1.5").is_err());
        assert!(validate_config("trials = ").is_err());
    }
}
