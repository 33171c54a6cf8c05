//! Alternating optimization of the jamming beamformer, the RIS and the receive
//! combiner, plus the two reference schemes without an optimized RIS.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{complex_gaussian, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, wrap_phase, CVec, C64};
use crate::mode::{gaussian_randomize, lift_mode_problem, lifted_vector, RandomizeOptions, RoundingScore};
use crate::sca::{build_es_problem, build_ms_phase_problem, build_r_problem, build_w_problem, ConvexProblem};
use crate::solver::{solve, solve_sdr, SolverOptions};
use crate::system::{
    effective_channels, feasibility, link_metrics, log2_1p, si_total_power, Beamformers, EsRisConfig, LinkMetrics,
    MsRisConfig, RisConfig, SystemParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Energy splitting: every element reflects and refracts.
    Es,
    /// Mode switching: every element either reflects or refracts.
    Ms,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Es => "es",
            Mode::Ms => "ms",
        })
    }
}

/// How the receive combiner is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// `r = h_ar / ‖h_ar‖`.
    #[default]
    MatchedFilter,
    /// Equal-magnitude entries with random phases.
    RandomPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoOptions {
    /// Relative change of the secrecy rate that ends the iteration.
    pub delta: f64,
    pub max_outer_iters: usize,
    pub init_strategy: InitStrategy,
    pub solver_opts: SolverOptions,
    /// Gaussian-randomization samples per mode-selection step.
    pub g: usize,
    /// Reject any block update that lowers the true secrecy rate.
    pub safeguard: bool,
    /// Worker threads used by the randomization step.
    pub width: usize,
    pub rounding: RoundingScore,
    /// Append an extrapolation step to every outer iteration.
    pub extrapolate: bool,
}

impl Default for AoOptions {
    fn default() -> Self {
        AoOptions {
            delta: 1e-5,
            max_outer_iters: 100,
            init_strategy: InitStrategy::MatchedFilter,
            solver_opts: SolverOptions::default(),
            g: 1000,
            safeguard: true,
            width: 1,
            rounding: RoundingScore::Exact,
            extrapolate: false,
        }
    }
}

impl AoOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::param("delta", format!("must be > 0, got {}", self.delta)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::param("max_outer_iters", "must be >= 1"));
        }
        if self.g == 0 {
            return Err(Error::param("G", "must be >= 1"));
        }
        self.solver_opts.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoState {
    pub bf: Beamformers,
    pub ris: RisConfig,
    pub metrics: LinkMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Transmit,
    Ris,
    Modes,
    Receive,
    /// Safeguarded step along the direction of the previous outer iteration.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub kind: BlockKind,
    /// Incumbent `C_raw` entering the block.
    pub before: f64,
    /// `C_raw` of the candidate, `NaN` when no candidate was produced.
    pub candidate: f64,
    pub accepted: bool,
    /// Why the candidate was rejected or not produced.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub start: f64,
    pub blocks: Vec<BlockRecord>,
    /// Incumbent `C_raw` after the iteration.
    pub c_raw: f64,
    pub p_si: f64,
    /// `1 − P_B‖H_r w‖² / P_th`; non-negative for every accepted state.
    pub si_margin: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    pub mode: Mode,
    pub initial: f64,
    pub iterations: Vec<IterationRecord>,
    /// Outer iterations performed.
    pub n_k: usize,
    pub stop: StopReason,
}

impl AoTrace {
    /// Accepted `C_raw` values in order: initial state, then the incumbent after every block.
    pub fn accepted_sequence(&self) -> Vec<f64> {
        let mut seq = vec![self.initial];
        for it in &self.iterations {
            for b in &it.blocks {
                seq.push(if b.accepted { b.candidate } else { b.before });
            }
        }
        seq
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,c_raw_start,w_candidate,w_accepted,ris_candidate,ris_accepted,mode_candidate,mode_accepted,r_candidate,r_accepted,extrapolate_candidate,extrapolate_accepted,c_raw,p_si,si_margin,relative_change\n");
        for it in &self.iterations {
            s.push_str(&format!("{},{:.8e}", it.iter, it.start));
            for kind in [BlockKind::Transmit, BlockKind::Ris, BlockKind::Modes, BlockKind::Receive, BlockKind::Extrapolate] {
                match it.blocks.iter().find(|b| b.kind == kind) {
                    Some(b) => s.push_str(&format!(",{:.8e},{}", b.candidate, u8::from(b.accepted))),
                    None => s.push_str(",,"),
                }
            }
            s.push_str(&format!(",{:.8e},{:.8e},{:.8e},{:.8e}\n", it.c_raw, it.p_si, it.si_margin, it.relative_change));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

fn random_phases<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Vec<f64> {
    (0..l).map(|_| wrap_phase(rng.random::<f64>() * std::f64::consts::TAU)).collect()
}

fn matched_filter(ch: &ChannelSet) -> CVec {
    let n = norm_sqr(&ch.h_ar).sqrt();
    if n > 0.0 {
        ch.h_ar.unscale(n)
    } else {
        let mut r = CVec::zeros(ch.h_ar.len());
        r[0] = C64::new(1.0, 0.0);
        r
    }
}

/// Feasible starting point for the alternating optimization.
pub fn initialize<R: Rng + ?Sized>(mode: Mode, ch: &ChannelSet, sys: &SystemParams, rng: &mut R, opts: &AoOptions) -> Result<AoState> {
    ch.validate()?;
    sys.validate()?;
    let (m, n, l) = ch.dims();
    let r = match opts.init_strategy {
        InitStrategy::MatchedFilter => matched_filter(ch),
        InitStrategy::RandomPhase => {
            let ph = random_phases(n, rng);
            CVec::from_fn(n, |i, _| C64::from_polar(1.0 / (n as f64).sqrt(), ph[i]))
        }
    };
    let ris: RisConfig = match mode {
        Mode::Es => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mu = random_phases(l, rng);
            let nu = random_phases(l, rng);
            EsRisConfig::new(vec![h; l], vec![h; l], mu, nu)?.into()
        }
        Mode::Ms => {
            let a = (0..l).map(|_| rng.random::<bool>()).collect();
            let mu = random_phases(l, rng);
            let nu = random_phases(l, rng);
            MsRisConfig::new(a, mu, nu)?.into()
        }
    };
    let mut w = CVec::from_fn(m, |_, _| complex_gaussian(rng, 1.0));
    let radius = rng.random::<f64>().powf(1.0 / (2 * m) as f64);
    let norm = norm_sqr(&w).sqrt();
    w = if norm > 0.0 { w.scale(radius / norm) } else { w };

    let (h_r, _) = effective_channels(ch, &ris)?;
    let mut halvings = 0;
    while si_total_power(&h_r, &w, sys) > sys.p_th {
        if halvings == 60 {
            return Err(Error::Initialization(format!(
                "SI still {:.3e} W above the threshold after 60 halvings of w",
                si_total_power(&h_r, &w, sys) - sys.p_th
            )));
        }
        w = w.scale(0.5);
        halvings += 1;
    }
    let bf = Beamformers { w, r };
    let metrics = link_metrics(ch, &ris, &bf, sys)?;
    let report = feasibility(ch, &ris, &bf, sys)?;
    if !report.ok() {
        return Err(Error::Initialization(format!("initial state infeasible (worst violation {:.3e})", report.worst_violation)));
    }
    Ok(AoState { bf, ris, metrics })
}

/// Outcome of one block before the acceptance test.
type Candidate = Result<(Beamformers, RisConfig)>;

fn solve_block(p: &ConvexProblem, opts: &AoOptions) -> Result<CVec> {
    Ok(solve(p, &p.expansion.x, &opts.solver_opts)?.x)
}

fn transmit_block(ch: &ChannelSet, st: &AoState, sys: &SystemParams, opts: &AoOptions) -> Candidate {
    let p = build_w_problem(ch, &st.ris, &st.bf, sys)?;
    let mut w = solve_block(&p, opts)?;
    // Pull the solver's tolerance-level excess back inside both constraints.
    let (h_r, _) = effective_channels(ch, &st.ris)?;
    let si = si_total_power(&h_r, &w, sys);
    let pw = norm_sqr(&w);
    let shrink = (if pw > 1.0 { 1.0 / pw } else { 1.0 }).min(if si > sys.p_th { sys.p_th / si } else { 1.0 });
    if shrink < 1.0 {
        w = w.scale(shrink.sqrt() * (1.0 - 1e-12));
    }
    Ok((Beamformers { w, r: st.bf.r.clone() }, st.ris.clone()))
}

fn receive_block(ch: &ChannelSet, st: &AoState, sys: &SystemParams, opts: &AoOptions) -> Candidate {
    let p = build_r_problem(ch, &st.ris, &st.bf, sys)?;
    let mut r = solve_block(&p, opts)?;
    let n = norm_sqr(&r);
    if n > 1.0 {
        r = r.unscale(n.sqrt());
    }
    Ok((Beamformers { w: st.bf.w.clone(), r }, st.ris.clone()))
}

fn ris_block(ch: &ChannelSet, st: &AoState, sys: &SystemParams, opts: &AoOptions) -> Candidate {
    let ris = match &st.ris {
        RisConfig::Es(es) => {
            let p = build_es_problem(ch, &st.bf, es, sys)?;
            let x = solve_block(&p, opts)?;
            let l = es.len();
            let refl = x.rows(0, l).into_owned();
            let refr = x.rows(l, l).into_owned();
            RisConfig::Es(EsRisConfig::from_coefficients(&refl, &refr))
        }
        RisConfig::Ms(ms) => {
            let p = build_ms_phase_problem(ch, &st.bf, ms, sys)?;
            let x = solve_block(&p, opts)?;
            let l = ms.len();
            let mut target = ms.clone();
            for i in 0..l {
                let (v, slot) = if ms.a[i] { (x[i], &mut target.mu[i]) } else { (x[l + i], &mut target.nu[i]) };
                if v.norm() > 1e-12 {
                    *slot = wrap_phase(v.arg());
                }
            }
            return repair_phases(ch, st, ms, &target, sys, opts);
        }
    };
    Ok((st.bf.clone(), ris))
}

/// Rescales `w` so the total self-interference sits at or below the threshold.
fn fit_si(ch: &ChannelSet, ris: &RisConfig, w: &CVec, sys: &SystemParams) -> Result<CVec> {
    let (h_r, _) = effective_channels(ch, ris)?;
    let si = si_total_power(&h_r, w, sys);
    Ok(if si > sys.p_th { w.scale((sys.p_th / si).sqrt() * (1.0 - 1e-12)) } else { w.clone() })
}

/// Projecting the relaxed phases onto the unit circle usually breaks the SI
/// nulling of the current `w`. Walk back from the projected phases toward the
/// incumbent ones, shrink `w` onto the SI threshold and re-solve the transmit
/// subproblem at every step, and stop at the first candidate that does not lose
/// secrecy rate (or keep the best one seen).
fn repair_phases(ch: &ChannelSet, st: &AoState, old: &MsRisConfig, target: &MsRisConfig, sys: &SystemParams, opts: &AoOptions) -> Candidate {
    let mut best: Option<(f64, Beamformers, RisConfig)> = None;
    let mut t = 1.0;
    for _ in 0..8 {
        let step = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| wrap_phase(x + t * wrap_phase(y - x))).collect::<Vec<_>>();
        let ris = RisConfig::Ms(MsRisConfig { a: old.a.clone(), mu: step(&old.mu, &target.mu), nu: step(&old.nu, &target.nu) });
        let bf = Beamformers { w: fit_si(ch, &ris, &st.bf.w, sys)?, r: st.bf.r.clone() };
        let metrics = link_metrics(ch, &ris, &bf, sys)?;
        let mut trial = AoState { bf, ris, metrics };
        // Re-aim the jammer at the new phases; the shrunken w is a feasible expansion point.
        if let Ok((bf, _)) = transmit_block(ch, &trial, sys, opts) {
            let m = link_metrics(ch, &trial.ris, &bf, sys)?;
            if m.secrecy_raw > trial.metrics.secrecy_raw {
                trial.bf = bf;
                trial.metrics = m;
            }
        }
        let c = trial.metrics.secrecy_raw;
        if best.as_ref().is_none_or(|(b, _, _)| c > *b) {
            best = Some((c, trial.bf, trial.ris));
        }
        if c >= st.metrics.secrecy_raw {
            break;
        }
        t *= 0.5;
    }
    let (_, bf, ris) = best.expect("at least one step");
    Ok((bf, ris))
}

fn mode_block<R: Rng + ?Sized>(ch: &ChannelSet, st: &AoState, sys: &SystemParams, opts: &AoOptions, rng: &mut R) -> Candidate {
    let RisConfig::Ms(ms) = &st.ris else {
        return Err(Error::param("mode", "mode selection needs a mode-switching RIS"));
    };
    let sdr = lift_mode_problem(ch, &st.bf, ms, sys)?;
    let relaxed = solve_sdr(&sdr, &lifted_vector(&ms.a), &opts.solver_opts)?;
    let ropts = RandomizeOptions { samples: opts.g, width: opts.width, score: opts.rounding };
    let rounded = gaussian_randomize(&relaxed.x, &sdr, &ropts, rng)?;
    Ok((st.bf.clone(), RisConfig::Ms(ms.with_modes(rounded.a))))
}

/// Moves `(w, RIS, r)` from `prev` through `cur` by growing multiples of the
/// step just taken. Block-wise ascent zig-zags along the active SI constraint,
/// and the accumulated step points along the ridge.
fn extrapolate(ch: &ChannelSet, prev: &AoState, cur: &AoState, sys: &SystemParams) -> Candidate {
    let lerp = |a: &CVec, b: &CVec, beta: f64| b + (b - a).scale(beta);
    let mut best: Option<(f64, Beamformers, RisConfig)> = None;
    let mut beta = 1.0;
    for _ in 0..12 {
        let ris = match (&prev.ris, &cur.ris) {
            (RisConfig::Es(_), RisConfig::Es(_)) => {
                let (p1, p2) = prev.ris.coefficients();
                let (c1, c2) = cur.ris.coefficients();
                RisConfig::Es(EsRisConfig::from_coefficients(&lerp(&p1, &c1, beta), &lerp(&p2, &c2, beta)))
            }
            (RisConfig::Ms(p), RisConfig::Ms(c)) if p.a == c.a => {
                let step = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| wrap_phase(y + beta * wrap_phase(y - x))).collect();
                RisConfig::Ms(MsRisConfig { a: c.a.clone(), mu: step(&p.mu, &c.mu), nu: step(&p.nu, &c.nu) })
            }
            _ => cur.ris.clone(),
        };
        let mut w = lerp(&prev.bf.w, &cur.bf.w, beta);
        let pw = norm_sqr(&w);
        if pw > 1.0 {
            w = w.unscale(pw.sqrt() * (1.0 + 1e-12));
        }
        let w = fit_si(ch, &ris, &w, sys)?;
        let mut r = lerp(&prev.bf.r, &cur.bf.r, beta);
        let pr = norm_sqr(&r);
        if pr > 1.0 {
            r = r.unscale(pr.sqrt());
        }
        let bf = Beamformers { w, r };
        let c = link_metrics(ch, &ris, &bf, sys)?.secrecy_raw;
        match &best {
            Some((b, _, _)) if c <= *b => break,
            _ => best = Some((c, bf, ris)),
        }
        beta *= 2.0;
    }
    let (_, bf, ris) = best.expect("at least one step");
    Ok((bf, ris))
}

/// Applies the acceptance rule to a block candidate and records the outcome.
fn settle(kind: BlockKind, cand: Candidate, st: &mut AoState, ch: &ChannelSet, sys: &SystemParams, opts: &AoOptions) -> BlockRecord {
    let before = st.metrics.secrecy_raw;
    let reject = |candidate: f64, note: String| BlockRecord { kind, before, candidate, accepted: false, note: Some(note) };
    let (bf, ris) = match cand {
        Ok(c) => c,
        Err(e) => return reject(f64::NAN, e.to_string()),
    };
    let metrics = match link_metrics(ch, &ris, &bf, sys) {
        Ok(m) => m,
        Err(e) => return reject(f64::NAN, e.to_string()),
    };
    let c = metrics.secrecy_raw;
    match feasibility(ch, &ris, &bf, sys) {
        Ok(rep) if rep.ok() => {}
        Ok(rep) => return reject(c, format!("infeasible candidate (worst violation {:.3e})", rep.worst_violation)),
        Err(e) => return reject(c, e.to_string()),
    }
    if !c.is_finite() || (opts.safeguard && c < before) {
        return reject(c, "secrecy rate would decrease".into());
    }
    *st = AoState { bf, ris, metrics };
    BlockRecord { kind, before, candidate: c, accepted: true, note: None }
}

/// Runs the alternating optimization from a fresh initialization.
pub fn optimize<R: Rng + ?Sized>(mode: Mode, ch: &ChannelSet, sys: &SystemParams, opts: &AoOptions, rng: &mut R) -> Result<(AoState, AoTrace)> {
    opts.validate()?;
    let state = initialize(mode, ch, sys, rng, opts)?;
    optimize_from(state, ch, sys, opts, rng)
}

/// Runs the alternating optimization from a given feasible state.
pub fn optimize_from<R: Rng + ?Sized>(
    mut st: AoState,
    ch: &ChannelSet,
    sys: &SystemParams,
    opts: &AoOptions,
    rng: &mut R,
) -> Result<(AoState, AoTrace)> {
    opts.validate()?;
    let mode = match st.ris {
        RisConfig::Es(_) => Mode::Es,
        RisConfig::Ms(_) => Mode::Ms,
    };
    let mut trace = AoTrace { mode, initial: st.metrics.secrecy_raw, iterations: Vec::new(), n_k: 0, stop: StopReason::MaxIterations };
    let mut idle = 0usize;
    for k in 1..=opts.max_outer_iters {
        let start = st.metrics.secrecy_raw;
        let anchor = st.clone();
        let mut blocks = Vec::with_capacity(5);
        let cand = transmit_block(ch, &st, sys, opts);
        blocks.push(settle(BlockKind::Transmit, cand, &mut st, ch, sys, opts));
        let cand = ris_block(ch, &st, sys, opts);
        blocks.push(settle(BlockKind::Ris, cand, &mut st, ch, sys, opts));
        if mode == Mode::Ms {
            let cand = mode_block(ch, &st, sys, opts, rng);
            blocks.push(settle(BlockKind::Modes, cand, &mut st, ch, sys, opts));
        }
        let cand = receive_block(ch, &st, sys, opts);
        blocks.push(settle(BlockKind::Receive, cand, &mut st, ch, sys, opts));
        if opts.extrapolate {
            let cand = extrapolate(ch, &anchor, &st, sys);
            blocks.push(settle(BlockKind::Extrapolate, cand, &mut st, ch, sys, opts));
        }

        let c = st.metrics.secrecy_raw;
        let rel = (c - start).abs() / start.abs().max(1e-9);
        let (h_r, _) = effective_channels(ch, &st.ris)?;
        let all_rejected = blocks.iter().all(|b| !b.accepted);
        trace.iterations.push(IterationRecord {
            iter: k,
            start,
            blocks,
            c_raw: c,
            p_si: st.metrics.p_si,
            si_margin: 1.0 - si_total_power(&h_r, &st.bf.w, sys) / sys.p_th,
            relative_change: rel,
        });
        trace.n_k = k;
        idle = if all_rejected { idle + 1 } else { 0 };
        if idle >= 3 {
            trace.stop = StopReason::Stalled;
            break;
        }
        if rel <= opts.delta && !all_rejected {
            trace.stop = StopReason::Converged;
            break;
        }
    }
    Ok((st, trace))
}

/// Reference scheme without jamming: `w = 0`, matched-filter combining.
pub fn baseline_woj(ch: &ChannelSet, sys: &SystemParams) -> LinkMetrics {
    let rate_bob = log2_1p(sys.p_a * norm_sqr(&ch.h_ar) / sys.noise_r);
    let rate_eve = log2_1p(sys.p_a * ch.h_ae.norm_sqr() / sys.noise_e);
    let raw = rate_bob - rate_eve;
    LinkMetrics { rate_bob, rate_eve, secrecy: raw.max(0.0), secrecy_raw: raw, p_si: 0.0, p_j: 0.0 }
}

/// Reference scheme with direct jamming toward Eve over `h_be` and a residual
/// self-interference of `ρ P_B` after cancellation.
pub fn baseline_wij(ch: &ChannelSet, h_be: &CVec, sys: &SystemParams, rho: f64) -> Result<LinkMetrics> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::param("rho", format!("must be finite and >= 0, got {rho}")));
    }
    let p_si = rho * sys.p_b;
    // Maximum-ratio jamming w = h_beᴴ/‖h_be‖ delivers P_B‖h_be‖² at Eve.
    let p_j = sys.p_b * norm_sqr(h_be);
    let rate_bob = log2_1p(sys.p_a * norm_sqr(&ch.h_ar) / (p_si + sys.noise_r));
    let rate_eve = log2_1p(sys.p_a * ch.h_ae.norm_sqr() / (p_j + sys.noise_e));
    let raw = rate_bob - rate_eve;
    Ok(LinkMetrics { rate_bob, rate_eve, secrecy: raw.max(0.0), secrecy_raw: raw, p_si, p_j })
}
