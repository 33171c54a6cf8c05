//! Mode selection for the mode-switching RIS: the lifted binary problem, its
//! semidefinite relaxation, Gaussian-randomization rounding, and an exhaustive
//! search for small surfaces.
//!
//! With the phases fixed, the SI power, Eve's jamming power and the SI-threshold
//! quantity are each a quadratic form `aᵀ Π a + 2Re{aᵀ z} + q` in the binary
//! reflect indicator `a`. Substituting `b = 2a − 1` and `x = [b; 1]` turns each
//! into `¼ xᵀ Π′ x + q′` with `Π′ = [[Π, g], [gᴴ, 0]]`, `g = h + 2z`, `h = Π 1`
//! and `q′ = ¼ 1ᵀΠ1 + Re{1ᵀz} + q`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cis, outer, row_dot, CMat, CVec, C64, LN2};
use crate::sca::{taylor_log_tangent, trace_to_hadamard, QuadraticForm, SubproblemConstants, Tangent, TAU_FLOOR};
use crate::system::{
    check_beamformer_dims, effective_channels_from, metrics_from_effective, si_total_power, Beamformers, MsRisConfig,
    SystemParams,
};

/// Largest surface accepted by [`exhaustive_mode_search`].
pub const EXHAUSTIVE_MAX_L: usize = 16;

/// How Gaussian-randomization candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingScore {
    /// True secrecy rate through the system model.
    #[default]
    Exact,
    /// Lifted surrogate objective at `x xᵀ`.
    Lifted,
    /// Lifted surrogate with Bob's numerator paired to the Eve-side matrix and
    /// vice versa. Diagnostic only.
    LiftedSwapped,
}

/// Everything needed to score a mode vector exactly.
#[derive(Debug, Clone)]
pub struct ModeContext {
    pub ch: ChannelSet,
    pub bf: Beamformers,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub incumbent: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SdrProblem {
    /// `Π′` for the SI power at Bob's combiner, Eve's jamming power, and the SI-threshold quantity.
    pub pi: [CMat; 3],
    pub q: [f64; 3],
    pub sys: SystemParams,
    pub constants: SubproblemConstants,
    pub tau_bar: f64,
    pub tangent: Tangent,
    pub context: ModeContext,
    re: [DMatrix<f64>; 3],
}

/// Form index of the SI power `|r H_r w|²`.
pub const FORM_SI: usize = 0;
/// Form index of Eve's jamming power `|h_e w|²`.
pub const FORM_EVE: usize = 1;
/// Form index of the threshold quantity `‖H_r w‖²`.
pub const FORM_THRESHOLD: usize = 2;

fn lift(form: &QuadraticForm) -> (CMat, f64) {
    let l = form.dim();
    let h: CVec = CVec::from_fn(l, |i, _| form.pi.row(i).iter().sum());
    let g = &h + form.z.scale(2.0);
    let mut p = CMat::zeros(l + 1, l + 1);
    p.view_mut((0, 0), (l, l)).copy_from(&form.pi);
    for i in 0..l {
        p[(i, l)] = g[i];
        p[(l, i)] = g[i].conj();
    }
    let total: C64 = form.pi.iter().sum();
    let zsum: C64 = form.z.iter().sum();
    (p, 0.25 * total.re + zsum.re + form.q)
}

/// The three quadratic forms in the reflect indicator `a` for fixed phases.
pub fn mode_forms(ch: &ChannelSet, bf: &Beamformers, mu: &[f64], nu: &[f64]) -> Result<[QuadraticForm; 3]> {
    check_beamformer_dims(ch, bf)?;
    let (_, _, l) = ch.dims();
    if mu.len() != l || nu.len() != l {
        return Err(Error::DimensionMismatch(format!("phase vectors of length {}/{} for L = {l}", mu.len(), nu.len())));
    }
    let t = &ch.h_ti * &bf.w;
    let tr = CVec::from_fn(l, |i, _| cis(mu[i]) * t[i]);
    let tt = CVec::from_fn(l, |i, _| cis(nu[i]) * t[i]);
    let d = &ch.h_tr * &bf.w;
    let p = &ch.h_ir * bf.r.map(|z| z.conj());
    let c0 = row_dot(&bf.r, &d);

    let y_r = outer(&tr, &tr);
    let z1 = outer(&tr, &p).map(|v| v * c0.conj());
    let f1 = trace_to_hadamard(&outer(&p, &p), &y_r, Some(&z1), c0.norm_sqr())?;

    // Refraction carries weight 1 − a, so the a-linear term enters with a minus sign.
    let y_t = outer(&tt, &tt);
    let d2: C64 = ch.h_ie.iter().zip(tt.iter()).map(|(h, t)| h.conj() * t).sum();
    let z2 = (&y_t * outer(&ch.h_ie, &ch.h_ie)).scale(-1.0);
    let f2 = trace_to_hadamard(&outer(&ch.h_ie, &ch.h_ie), &y_t, Some(&z2), d2.norm_sqr())?;

    let z3 = outer(&tr, &(&ch.h_ir * &d));
    let f3 = trace_to_hadamard(&(&ch.h_ir * ch.h_ir.adjoint()), &y_r, Some(&z3), d.norm_squared())?;
    Ok([f1, f2, f3])
}

/// Builds the lifted mode-selection problem around the modes and phases in `ms`.
pub fn lift_mode_problem(ch: &ChannelSet, bf: &Beamformers, ms: &MsRisConfig, sys: &SystemParams) -> Result<SdrProblem> {
    let forms = mode_forms(ch, bf, &ms.mu, &ms.nu)?;
    let lifted: Vec<(CMat, f64)> = forms.iter().map(lift).collect();
    let pi = [lifted[0].0.clone(), lifted[1].0.clone(), lifted[2].0.clone()];
    let q = [lifted[0].1, lifted[1].1, lifted[2].1];
    let re = [pi[0].map(|z| z.re), pi[1].map(|z| z.re), pi[2].map(|z| z.re)];
    let constants = SubproblemConstants::new(ch, &bf.r, sys);
    let a_inc = DVector::from_iterator(ms.len(), ms.a.iter().map(|&a| if a { 1.0 } else { 0.0 }));
    let q1 = forms[FORM_SI].value(&a_inc.map(|v| C64::new(v, 0.0)));
    let tau_bar = (sys.p_b * q1 + sys.noise_r).max(TAU_FLOOR);
    let tangent = taylor_log_tangent(constants.a, tau_bar)?;
    Ok(SdrProblem {
        pi,
        q,
        sys: *sys,
        constants,
        tau_bar,
        tangent,
        context: ModeContext { ch: ch.clone(), bf: bf.clone(), mu: ms.mu.clone(), nu: ms.nu.clone(), incumbent: ms.a.clone() },
        re,
    })
}

/// `x = [2a − 1; 1]`.
pub fn lifted_vector(a: &[bool]) -> DVector<f64> {
    let l = a.len();
    DVector::from_fn(l + 1, |i, _| if i == l || a[i] { 1.0 } else { -1.0 })
}

fn eve_term(b: f64, varrho: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if varrho > 0.0 {
        -(b / varrho).ln_1p() / LN2
    } else {
        f64::NEG_INFINITY
    }
}

impl SdrProblem {
    /// Matrix size `L + 1`.
    pub fn size(&self) -> usize {
        self.re[0].nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.size() - 1
    }

    /// `¼ Tr(Π′_k X) + q′_k` for real symmetric `X`.
    pub fn lifted_value(&self, k: usize, x: &DMatrix<f64>) -> f64 {
        0.25 * self.re[k].dot(x) + self.q[k]
    }

    /// The lifted value at `x xᵀ` evaluated with the complex `Π′`.
    pub fn lifted_value_vec(&self, k: usize, x: &DVector<f64>) -> C64 {
        let xc = x.map(|v| C64::new(v, 0.0));
        (xc.transpose() * &self.pi[k] * &xc)[(0, 0)] * 0.25 + self.q[k]
    }

    /// Surrogate objective: Bob's tangent on the SI side minus Eve's rate.
    pub fn objective(&self, x: &DMatrix<f64>) -> f64 {
        let tau = self.sys.p_b * self.lifted_value(FORM_SI, x) + self.sys.noise_r;
        let varrho = self.sys.p_b * self.lifted_value(FORM_EVE, x) + self.sys.noise_e;
        self.tangent.eval(tau) + eve_term(self.constants.b, varrho)
    }

    pub fn objective_gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let pb4 = 0.25 * self.sys.p_b;
        let mut g = self.re[FORM_SI].scale(self.tangent.slope * pb4);
        let b = self.constants.b;
        if b > 0.0 {
            let varrho = self.sys.p_b * self.lifted_value(FORM_EVE, x) + self.sys.noise_e;
            let d1 = b / (varrho * (varrho + b) * LN2);
            g += self.re[FORM_EVE].scale(d1 * pb4);
        }
        g
    }

    /// `P_B ‖H_r w‖² / P_th` in lifted form.
    pub fn si_ratio(&self, x: &DMatrix<f64>) -> f64 {
        self.sys.p_b * self.lifted_value(FORM_THRESHOLD, x) / self.sys.p_th
    }

    pub fn si_ratio_gradient(&self) -> DMatrix<f64> {
        self.re[FORM_THRESHOLD].scale(0.25 * self.sys.p_b / self.sys.p_th)
    }

    fn lifted_score(&self, a: &[bool], swapped: bool) -> f64 {
        let x = lifted_vector(a);
        let xx = &x * x.transpose();
        if !swapped {
            return self.objective(&xx);
        }
        let inc = lifted_vector(&self.context.incumbent);
        let inc_tau = self.sys.p_b * self.lifted_value(FORM_EVE, &(&inc * inc.transpose())) + self.sys.noise_r;
        let Ok(tan) = taylor_log_tangent(self.constants.a, inc_tau.max(TAU_FLOOR)) else { return f64::NEG_INFINITY };
        let tau = self.sys.p_b * self.lifted_value(FORM_EVE, &xx) + self.sys.noise_r;
        let varrho = self.sys.p_b * self.lifted_value(FORM_SI, &xx) + self.sys.noise_e;
        tan.eval(tau) + eve_term(self.constants.b, varrho)
    }

    /// Exact `(C_raw, SI feasible)` for mode vector `a` at the stored phases.
    pub fn exact(&self, a: &[bool]) -> Result<(f64, bool)> {
        let ctx = &self.context;
        let ms = MsRisConfig { a: a.to_vec(), mu: ctx.mu.clone(), nu: ctx.nu.clone() };
        let (refl, refr) = ms.coefficients();
        let (h_r, h_e) = effective_channels_from(&ctx.ch, &refl, &refr)?;
        let m = metrics_from_effective(&ctx.ch, &h_r, &h_e, &ctx.bf, &self.sys);
        let si_ok = si_total_power(&h_r, &ctx.bf.w, &self.sys) <= self.sys.p_th;
        Ok((m.secrecy_raw, si_ok))
    }

    fn score(&self, a: &[bool], how: RoundingScore) -> Result<Option<f64>> {
        let (c, ok) = self.exact(a)?;
        if !ok {
            return Ok(None);
        }
        Ok(Some(match how {
            RoundingScore::Exact => c,
            RoundingScore::Lifted => self.lifted_score(a, false),
            RoundingScore::LiftedSwapped => self.lifted_score(a, true),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizeOptions {
    /// Number of Gaussian samples `G`.
    pub samples: usize,
    /// Worker threads; the result does not depend on this.
    pub width: usize,
    pub score: RoundingScore,
}

impl Default for RandomizeOptions {
    fn default() -> Self {
        RandomizeOptions { samples: 1000, width: 1, score: RoundingScore::Exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingResult {
    pub a: Vec<bool>,
    /// Exact `C_raw` of the returned modes.
    pub secrecy_raw: f64,
    /// Samples that met the SI threshold.
    pub feasible_samples: usize,
    /// Whether a sample replaced the incumbent.
    pub improved: bool,
}

/// `sgn` with `sgn(0) = +1`, followed by the global flip that makes the last entry `+1`.
pub fn sign_round(xi: &DVector<f64>) -> DVector<f64> {
    let mut s = xi.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    if s[s.len() - 1] < 0.0 {
        s.neg_mut();
    }
    s
}

/// `F` with `F Fᵀ = X⁺`, the PSD part of `X`.
pub fn psd_factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.clone());
    let mut f = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

fn validate_relaxed(x: &DMatrix<f64>, n: usize) -> Result<()> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!("relaxed solution is {}×{}, expected {n}×{n}", x.nrows(), x.ncols())));
    }
    let asym = (x - x.transpose()).amax();
    let diag = (0..n).map(|i| (x[(i, i)] - 1.0).abs()).fold(0.0f64, f64::max);
    let min_eig = SymmetricEigen::new(x.clone()).eigenvalues.min();
    if asym > 1e-8 || diag > 1e-6 || min_eig < -1e-6 || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(
            "X",
            format!("not a unit-diagonal PSD matrix (asymmetry {asym:.1e}, diagonal error {diag:.1e}, min eigenvalue {min_eig:.1e})"),
        ));
    }
    Ok(())
}

fn candidate(f: &DMatrix<f64>, base_seed: u64, g: usize) -> Vec<bool> {
    let n = f.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(g as u64);
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let s = sign_round(&(f * z));
    (0..n - 1).map(|i| s[i] > 0.0).collect()
}

/// Gaussian randomization: samples `ξ ~ N(0, X)`, rounds by sign, and keeps the
/// best candidate that meets the SI threshold. The incumbent modes win ties and
/// are returned when no sample beats them.
pub fn gaussian_randomize<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    sdr: &SdrProblem,
    opts: &RandomizeOptions,
    rng: &mut R,
) -> Result<RoundingResult> {
    if opts.samples == 0 {
        return Err(Error::param("G", "at least one sample is required"));
    }
    validate_relaxed(x, sdr.size())?;
    let f = psd_factor(x);
    let base_seed: u64 = rng.random();
    let incumbent = sdr.context.incumbent.clone();
    let (inc_c, inc_ok) = sdr.exact(&incumbent)?;
    let inc_score = if inc_ok { sdr.score(&incumbent, opts.score)? } else { None };

    let evaluate = |range: std::ops::Range<usize>| -> Result<Vec<(usize, Vec<bool>, Option<f64>)>> {
        range
            .map(|g| {
                let a = candidate(&f, base_seed, g);
                let s = sdr.score(&a, opts.score)?;
                Ok((g, a, s))
            })
            .collect()
    };
    let width = opts.width.max(1).min(opts.samples);
    let results: Vec<(usize, Vec<bool>, Option<f64>)> = if width == 1 {
        evaluate(0..opts.samples)?
    } else {
        let chunk = opts.samples.div_ceil(width);
        let parts: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..width)
                .map(|w| {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(opts.samples);
                    let ev = &evaluate;
                    s.spawn(move || ev(lo..hi))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("randomization worker panicked")).collect()
        });
        let mut all = Vec::with_capacity(opts.samples);
        for p in parts {
            all.extend(p?);
        }
        all
    };

    let mut best: Option<(f64, Vec<bool>)> = inc_score.map(|s| (s, incumbent.clone()));
    let mut feasible = 0usize;
    for (_, a, s) in results {
        let Some(s) = s else { continue };
        feasible += 1;
        if best.as_ref().map_or(true, |(b, _)| s > *b) {
            best = Some((s, a));
        }
    }
    let a = best.map(|(_, a)| a).unwrap_or_else(|| incumbent.clone());
    let improved = a != incumbent;
    let (c, _) = if improved { sdr.exact(&a)? } else { (inc_c, inc_ok) };
    // A surrogate-ranked winner may still lose on the true objective.
    if improved && opts.score != RoundingScore::Exact && inc_ok && c < inc_c {
        return Ok(RoundingResult { a: incumbent, secrecy_raw: inc_c, feasible_samples: feasible, improved: false });
    }
    Ok(RoundingResult { a, secrecy_raw: c, feasible_samples: feasible, improved })
}

/// Enumerates all `2^L` mode vectors in lexicographic order (reflect after
/// refract) and returns the first maximizer of the exact `C_raw` among those
/// meeting the SI threshold.
pub fn exhaustive_mode_search(sdr: &SdrProblem) -> Result<(Vec<bool>, f64)> {
    let l = sdr.num_elements();
    if l > EXHAUSTIVE_MAX_L {
        return Err(Error::param("L", format!("exhaustive search supports L <= {EXHAUSTIVE_MAX_L}, got {l}")));
    }
    let mut best: Option<(f64, Vec<bool>)> = None;
    for code in 0u32..(1u32 << l) {
        let a: Vec<bool> = (0..l).map(|i| code >> (l - 1 - i) & 1 == 1).collect();
        let (c, ok) = sdr.exact(&a)?;
        if ok && best.as_ref().map_or(true, |(b, _)| c > *b) {
            best = Some((c, a));
        }
    }
    best.map(|(c, a)| (a, c)).ok_or_else(|| Error::EmptyConstraintSet("no mode vector meets the SI threshold".into()))
}
