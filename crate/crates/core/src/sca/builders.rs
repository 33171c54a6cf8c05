use super::bounds::{log_frac_lower, quad_linearize, taylor_log_tangent};
use super::forms::{trace_to_hadamard, QuadraticForm};
use super::problem::{Block, Constraint, ConvexProblem, Expansion, Link, Term};
use crate::channels::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cis, outer, row_dot, CMat, CVec, C64, LN2};
use crate::system::{
    check_beamformer_dims, effective_channels, metrics_from_effective, Beamformers, EsRisConfig, MsRisConfig, RisConfig,
    SystemParams,
};

/// Lower clamp for the SI-plus-noise expansion value `τ̄` (W).
pub const TAU_FLOOR: f64 = 1e-15;

/// Constraint slack accepted at the expansion point (unit-scale constraints).
const EXPANSION_TOL: f64 = 1e-8;

/// Numerators of Bob's and Eve's SINR: `A = P_A |r h_ar^H|²`, `B = P_A |h_ae|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemConstants {
    pub a: f64,
    pub b: f64,
}

impl SubproblemConstants {
    pub fn new(ch: &ChannelSet, r: &CVec, sys: &SystemParams) -> Self {
        let gain: C64 = r.iter().zip(ch.h_ar.iter()).map(|(r, h)| r * h.conj()).sum();
        SubproblemConstants { a: sys.p_a * gain.norm_sqr(), b: sys.p_a * ch.h_ae.norm_sqr() }
    }
}

fn range(from: usize, len: usize) -> Vec<usize> {
    (from..from + len).collect()
}

fn check_expansion(p: &ConvexProblem) -> Result<()> {
    for i in 0..p.constraints.len() {
        let v = p.constraint_value(i, &p.expansion.x);
        if !(v <= EXPANSION_TOL) {
            return Err(Error::InfeasibleExpansion(format!("{} = {v:.3e}", p.constraints[i].label)));
        }
    }
    let f = p.objective(&p.expansion.x);
    if !f.is_finite() {
        return Err(Error::InfeasibleExpansion(format!("surrogate is {f} at the expansion point")));
    }
    Ok(())
}

fn ball(dim: usize, label: &str) -> Constraint {
    Constraint { label: label.into(), support: range(0, dim), form: QuadraticForm::identity(dim, -1.0) }
}

fn tau_bar(p_si: f64, sys: &SystemParams) -> f64 {
    (p_si + sys.noise_r).max(TAU_FLOOR)
}

/// Transmit (jamming) beamformer block: maximize over `w` with `r` and the RIS fixed.
pub fn build_w_problem(ch: &ChannelSet, ris: &RisConfig, bf: &Beamformers, sys: &SystemParams) -> Result<ConvexProblem> {
    check_beamformer_dims(ch, bf)?;
    let (h_r, h_e) = effective_channels(ch, ris)?;
    let m = bf.w.len();
    let metrics = metrics_from_effective(ch, &h_r, &h_e, bf, sys);
    let k = SubproblemConstants::new(ch, &bf.r, sys);

    let tau0 = tau_bar(metrics.p_si, sys);
    let tangent = taylor_log_tangent(k.a, tau0)?;
    let c = (h_r.transpose() * &bf.r).map(|z| z.conj());
    let tau_form = QuadraticForm { pi: outer(&c, &c).scale(sys.p_b), z: CVec::zeros(m), q: sys.noise_r };

    let mut terms = vec![Term { support: range(0, m), form: tau_form, link: Link::Linear(tangent.slope) }];
    let mut varrho = None;
    if k.b > 0.0 {
        let he = h_e.map(|z| z.conj());
        let lin = quad_linearize(&outer(&he, &he).scale(sys.p_b), &bf.w)?.with_offset(sys.noise_e);
        varrho = Some(metrics.p_j + sys.noise_e);
        terms.push(Term { support: range(0, m), form: lin, link: Link::NegLog2OnePlusRatio(k.b) });
    }
    let si = QuadraticForm { pi: (h_r.adjoint() * &h_r).scale(sys.p_b / sys.p_th), z: CVec::zeros(m), q: -1.0 };
    let p = ConvexProblem {
        dim: m,
        block: Block::Transmit,
        constant: tangent.value - tangent.slope * tau0,
        terms,
        constraints: vec![
            ball(m, "transmit power"),
            Constraint { label: "SI threshold".into(), support: range(0, m), form: si },
        ],
        expansion: Expansion { x: bf.w.clone(), tau: tau0, psi: None, varrho },
    };
    check_expansion(&p)?;
    Ok(p)
}

/// Receive beamformer block: maximize over `r`; Eve's rate is a constant here.
pub fn build_r_problem(ch: &ChannelSet, ris: &RisConfig, bf: &Beamformers, sys: &SystemParams) -> Result<ConvexProblem> {
    check_beamformer_dims(ch, bf)?;
    let (h_r, h_e) = effective_channels(ch, ris)?;
    let n = bf.r.len();
    let metrics = metrics_from_effective(ch, &h_r, &h_e, bf, sys);
    let k = SubproblemConstants::new(ch, &bf.r, sys);
    if !(k.a > 0.0) {
        return Err(Error::InfeasibleExpansion("receive beamformer is orthogonal to Alice's channel".into()));
    }
    let tau0 = tau_bar(metrics.p_si, sys);
    let bound = log_frac_lower(k.a, tau0)?;

    let psi_form = quad_linearize(&outer(&ch.h_ar, &ch.h_ar).scale(sys.p_a), &bf.r)?;
    let v = (&h_r * &bf.w).map(|z| z.conj());
    let tau_form = QuadraticForm { pi: outer(&v, &v).scale(sys.p_b), z: CVec::zeros(n), q: sys.noise_r };

    let p = ConvexProblem {
        dim: n,
        block: Block::Receive,
        constant: bound.base + 2.0 * bound.coef / LN2 - metrics.rate_eve,
        terms: vec![
            Term { support: range(0, n), form: psi_form, link: Link::NegInverse(bound.coef * bound.psi_bar / LN2) },
            Term { support: range(0, n), form: tau_form, link: Link::Linear(-bound.coef / (LN2 * tau0)) },
        ],
        constraints: vec![ball(n, "receive norm")],
        expansion: Expansion { x: bf.r.clone(), tau: tau0, psi: Some(k.a), varrho: None },
    };
    check_expansion(&p)?;
    Ok(p)
}

/// Products shared by the RIS-side forms.
struct RisProducts {
    /// `H_ti w`.
    t: CVec,
    /// `H_ir r^H`.
    p: CVec,
    /// `r H_tr w`.
    c0: C64,
    /// `H_tr w`.
    d: CVec,
}

impl RisProducts {
    fn new(ch: &ChannelSet, bf: &Beamformers) -> Self {
        let d = &ch.h_tr * &bf.w;
        RisProducts {
            t: &ch.h_ti * &bf.w,
            p: &ch.h_ir * bf.r.map(|z| z.conj()),
            c0: row_dot(&bf.r, &d),
            d,
        }
    }
}

/// `|r H_r w|²`, `|h_e w|²` and `‖H_r w‖²` as quadratic forms in the reflect
/// (first, third) and refract (second) coefficient vectors, with per-element
/// weights folded in for the mode-switching case.
fn ris_forms(ch: &ChannelSet, bf: &Beamformers, refl_mask: &[f64], refr_mask: &[f64]) -> Result<[QuadraticForm; 3]> {
    let pr = RisProducts::new(ch, bf);
    let l = pr.t.len();
    let mask = |x: CMat, wl: &[f64]| CMat::from_fn(l, l, |i, j| x[(i, j)] * (wl[i] * wl[j]));
    let col_mask = |x: CMat, wl: &[f64]| CMat::from_fn(l, l, |i, j| x[(i, j)] * wl[j]);

    let y = outer(&pr.t, &pr.t);
    let x1 = mask(outer(&pr.p, &pr.p), refl_mask);
    let z1 = col_mask(outer(&pr.t, &pr.p).map(|v| v * pr.c0.conj()), refl_mask);
    let f1 = trace_to_hadamard(&x1, &y, Some(&z1), pr.c0.norm_sqr())?;

    let x2 = mask(outer(&ch.h_ie, &ch.h_ie), refr_mask);
    let f2 = trace_to_hadamard(&x2, &y, None, 0.0)?;

    let x3 = mask(&ch.h_ir * ch.h_ir.adjoint(), refl_mask);
    let z3 = col_mask(outer(&pr.t, &(&ch.h_ir * &pr.d)), refl_mask);
    let f3 = trace_to_hadamard(&x3, &y, Some(&z3), pr.d.norm_squared())?;
    Ok([f1, f2, f3])
}

/// Assembles the RIS-block surrogate over `x = [μ; ν]` given the three raw forms.
fn ris_problem(
    ch: &ChannelSet,
    bf: &Beamformers,
    sys: &SystemParams,
    forms: [QuadraticForm; 3],
    x_bar: CVec,
    element_constraints: Vec<Constraint>,
    block: Block,
) -> Result<ConvexProblem> {
    let l = x_bar.len() / 2;
    let k = SubproblemConstants::new(ch, &bf.r, sys);
    let [f1, f2, f3] = forms;
    let mu_bar = x_bar.rows(0, l).into_owned();
    let nu_bar = x_bar.rows(l, l).into_owned();

    let tau_form = f1.scaled(sys.p_b).with_offset(sys.noise_r);
    let tau0 = tau_form.value(&mu_bar).max(TAU_FLOOR);
    let tangent = taylor_log_tangent(k.a, tau0)?;
    let mut terms = vec![Term { support: range(0, l), form: tau_form, link: Link::Linear(tangent.slope) }];
    let mut varrho = None;
    if k.b > 0.0 {
        let lin = quad_linearize(&f2.pi.scale(sys.p_b), &nu_bar)?.with_offset(sys.noise_e);
        varrho = Some(lin.value(&nu_bar));
        terms.push(Term { support: range(l, l), form: lin, link: Link::NegLog2OnePlusRatio(k.b) });
    }
    let mut constraints = element_constraints;
    constraints.push(Constraint { label: "SI threshold".into(), support: range(0, l), form: f3.scaled(sys.p_b / sys.p_th).with_offset(-1.0) });
    let p = ConvexProblem {
        dim: 2 * l,
        block,
        constant: tangent.value - tangent.slope * tau0,
        terms,
        constraints,
        expansion: Expansion { x: x_bar, tau: tau0, psi: None, varrho },
    };
    check_expansion(&p)?;
    Ok(p)
}

fn check_ris_len(ch: &ChannelSet, l: usize) -> Result<()> {
    let (_, _, lc) = ch.dims();
    if l != lc {
        return Err(Error::DimensionMismatch(format!("RIS configuration has {l} elements, channels have L = {lc}")));
    }
    Ok(())
}

/// Energy-splitting RIS block over `x = [μ_s; ν_s] ∈ C^{2L}` with the coupled
/// per-element budget `|μ_l|² + |ν_l|² ≤ 1`.
pub fn build_es_problem(ch: &ChannelSet, bf: &Beamformers, es: &EsRisConfig, sys: &SystemParams) -> Result<ConvexProblem> {
    check_beamformer_dims(ch, bf)?;
    check_ris_len(ch, es.len())?;
    let l = es.len();
    let ones = vec![1.0; l];
    let forms = ris_forms(ch, bf, &ones, &ones)?;
    let (refl, refr) = es.coefficients();
    let mut x_bar = CVec::zeros(2 * l);
    x_bar.rows_mut(0, l).copy_from(&refl);
    x_bar.rows_mut(l, l).copy_from(&refr);
    let constraints = (0..l)
        .map(|i| Constraint {
            label: format!("element {i} power"),
            support: vec![i, l + i],
            form: QuadraticForm::identity(2, -1.0),
        })
        .collect();
    ris_problem(ch, bf, sys, forms, x_bar, constraints, Block::EsRis)
}

/// Mode-switching phase block with modes fixed; unit modulus relaxed to `|·| ≤ 1`.
pub fn build_ms_phase_problem(ch: &ChannelSet, bf: &Beamformers, ms: &MsRisConfig, sys: &SystemParams) -> Result<ConvexProblem> {
    check_beamformer_dims(ch, bf)?;
    check_ris_len(ch, ms.len())?;
    let l = ms.len();
    let refl_mask: Vec<f64> = ms.a.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let refr_mask: Vec<f64> = refl_mask.iter().map(|a| 1.0 - a).collect();
    let forms = ris_forms(ch, bf, &refl_mask, &refr_mask)?;
    let mut x_bar = CVec::zeros(2 * l);
    for i in 0..l {
        x_bar[i] = cis(ms.mu[i]);
        x_bar[l + i] = cis(ms.nu[i]);
    }
    let constraints = (0..2 * l)
        .map(|i| Constraint {
            label: if i < l { format!("reflect modulus {i}") } else { format!("refract modulus {}", i - l) },
            support: vec![i],
            form: QuadraticForm::identity(1, -1.0),
        })
        .collect();
    ris_problem(ch, bf, sys, forms, x_bar, constraints, Block::MsPhases)
}

/// Secrecy rate at given RIS coefficients, used by the tests to compare the
/// surrogate against the exact objective.
#[cfg(test)]
pub(crate) fn exact_secrecy_raw(ch: &ChannelSet, refl: &CVec, refr: &CVec, bf: &Beamformers, sys: &SystemParams) -> f64 {
    let (h_r, h_e) = crate::system::effective_channels_from(ch, refl, refr).unwrap();
    metrics_from_effective(ch, &h_r, &h_e, bf, sys).secrecy_raw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gen_channels, ChannelParams, Geometry};
    use crate::linalg::{c, norm_sqr};
    use crate::system::link_metrics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Case {
        ch: ChannelSet,
        sys: SystemParams,
        bf: Beamformers,
        rng: ChaCha8Rng,
    }

    fn rand_cvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn unit_ball(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        let v = rand_cvec(n, rng);
        let r: f64 = rng.random::<f64>().sqrt();
        v.scale(r / norm_sqr(&v).sqrt())
    }

    // A generous SI threshold keeps random beamformers feasible so that the
    // sampling tests cover the whole ball.
    fn case(l: usize, seed: u64) -> Case {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = gen_channels(&Geometry { l, ..Geometry::default() }, &ChannelParams::default(), &mut rng).unwrap();
        let sys = SystemParams { p_th: 1.0, ..SystemParams::default() };
        let w = unit_ball(4, &mut rng);
        let r = ch.h_ar.normalize();
        Case { ch, sys, bf: Beamformers { w, r }, rng }
    }

    fn random_es(l: usize, rng: &mut ChaCha8Rng) -> EsRisConfig {
        let u: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
        let v = u.iter().map(|u| (1.0 - u * u).max(0.0).sqrt() * rng.random::<f64>()).collect();
        let mu = (0..l).map(|_| rng.random::<f64>() * 6.3).collect();
        let nu = (0..l).map(|_| rng.random::<f64>() * 6.3).collect();
        EsRisConfig::new(u, v, mu, nu).unwrap()
    }

    #[test]
    fn w_surrogate_tight_and_below() {
        for seed in 0..3 {
            let mut k = case(8, seed);
            let ris: RisConfig = random_es(8, &mut k.rng).into();
            let p = build_w_problem(&k.ch, &ris, &k.bf, &k.sys).unwrap();
            let exact = link_metrics(&k.ch, &ris, &k.bf, &k.sys).unwrap().secrecy_raw;
            assert!((p.objective(&k.bf.w) - exact).abs() <= 1e-9);
            for _ in 0..100 {
                let w = unit_ball(4, &mut k.rng);
                let bf = Beamformers { w: w.clone(), r: k.bf.r.clone() };
                let c = link_metrics(&k.ch, &ris, &bf, &k.sys).unwrap().secrecy_raw;
                assert!(p.objective(&w) <= c + 1e-8);
            }
        }
    }

    #[test]
    fn w_surrogate_without_eve_is_bob_tangent() {
        let mut k = case(4, 3);
        k.ch.h_ae = c(0.0, 0.0);
        let ris: RisConfig = random_es(4, &mut k.rng).into();
        let p = build_w_problem(&k.ch, &ris, &k.bf, &k.sys).unwrap();
        assert_eq!(p.terms.len(), 1);
        assert!(p.expansion.varrho.is_none());
    }

    #[test]
    fn r_surrogate_tight_and_below() {
        for seed in 0..3 {
            let mut k = case(8, 10 + seed);
            let ris: RisConfig = random_es(8, &mut k.rng).into();
            let r0 = unit_ball(2, &mut k.rng);
            let bf = Beamformers { w: k.bf.w.clone(), r: r0 };
            let p = build_r_problem(&k.ch, &ris, &bf, &k.sys).unwrap();
            let exact = link_metrics(&k.ch, &ris, &bf, &k.sys).unwrap().secrecy_raw;
            assert!((p.objective(&bf.r) - exact).abs() <= 1e-9);
            for _ in 0..100 {
                let r = unit_ball(2, &mut k.rng);
                let bf2 = Beamformers { w: bf.w.clone(), r: r.clone() };
                let c = link_metrics(&k.ch, &ris, &bf2, &k.sys).unwrap().secrecy_raw;
                assert!(p.objective(&r) <= c + 1e-8);
            }
        }
    }

    #[test]
    fn es_surrogate_tight_and_below() {
        for seed in 0..3 {
            let mut k = case(8, 20 + seed);
            let es = random_es(8, &mut k.rng);
            let p = build_es_problem(&k.ch, &k.bf, &es, &k.sys).unwrap();
            let exact = link_metrics(&k.ch, &es.clone().into(), &k.bf, &k.sys).unwrap().secrecy_raw;
            assert!((p.objective(&p.expansion.x) - exact).abs() <= 1e-9);
            for _ in 0..100 {
                let cand = random_es(8, &mut k.rng);
                let (refl, refr) = cand.coefficients();
                let mut x = CVec::zeros(16);
                x.rows_mut(0, 8).copy_from(&refl);
                x.rows_mut(8, 8).copy_from(&refr);
                assert!(p.max_violation(&x) <= 1e-12);
                let c = exact_secrecy_raw(&k.ch, &refl, &refr, &k.bf, &k.sys);
                assert!(p.objective(&x) <= c + 1e-8);
            }
        }
    }

    #[test]
    fn es_forms_cross_check_system_model() {
        let mut k = case(6, 30);
        let es = random_es(6, &mut k.rng);
        let ris: RisConfig = es.clone().into();
        let p = build_es_problem(&k.ch, &k.bf, &es, &k.sys).unwrap();
        let m = link_metrics(&k.ch, &ris, &k.bf, &k.sys).unwrap();
        let mu = p.expansion.x.rows(0, 6).into_owned();
        let p_si = (p.terms[0].form.value(&mu) - k.sys.noise_r) / k.sys.p_b;
        assert!((p_si - m.p_si / k.sys.p_b).abs() <= 1e-10 * (m.p_si / k.sys.p_b));
        let (h_r, _) = effective_channels(&k.ch, &ris).unwrap();
        let si = k.sys.p_b * norm_sqr(&(&h_r * &k.bf.w));
        let via_form = (p.constraints.last().unwrap().form.value(&mu) + 1.0) * k.sys.p_th;
        assert!((si - via_form).abs() <= 1e-10 * si);
        // Per-element constraints on coordinate vectors.
        for i in 0..6 {
            let mut x = CVec::zeros(12);
            x[i] = c(1.0, 0.0);
            assert_eq!(p.constraint_value(i, &x), 0.0);
            x[6 + i] = c(0.0, 1.0);
            assert_eq!(p.constraint_value(i, &x), 1.0);
        }
    }

    #[test]
    fn ms_surrogate_tight_and_below() {
        for seed in 0..3 {
            let mut k = case(8, 40 + seed);
            let a: Vec<bool> = (0..8).map(|_| k.rng.random::<bool>()).collect();
            let mu = (0..8).map(|_| k.rng.random::<f64>() * 6.3).collect();
            let nu = (0..8).map(|_| k.rng.random::<f64>() * 6.3).collect();
            let ms = MsRisConfig::new(a.clone(), mu, nu).unwrap();
            let p = build_ms_phase_problem(&k.ch, &k.bf, &ms, &k.sys).unwrap();
            let exact = link_metrics(&k.ch, &ms.clone().into(), &k.bf, &k.sys).unwrap().secrecy_raw;
            assert!((p.objective(&p.expansion.x) - exact).abs() <= 1e-9);
            for _ in 0..100 {
                let phases: Vec<f64> = (0..16).map(|_| k.rng.random::<f64>() * 6.3).collect();
                let cand = MsRisConfig::new(a.clone(), phases[..8].to_vec(), phases[8..].to_vec()).unwrap();
                let x = CVec::from_fn(16, |i, _| cis(phases[i]));
                let (refl, refr) = cand.coefficients();
                let c = exact_secrecy_raw(&k.ch, &refl, &refr, &k.bf, &k.sys);
                assert!(p.objective(&x) <= c + 1e-8);
            }
        }
    }

    #[test]
    fn ms_masks() {
        let mut k = case(5, 50);
        let ms = MsRisConfig::new(vec![true; 5], vec![0.1; 5], vec![0.2; 5]).unwrap();
        let p = build_ms_phase_problem(&k.ch, &k.bf, &ms, &k.sys).unwrap();
        let eve = &p.terms[1].form;
        assert!(eve.z.iter().all(|z| z.norm() == 0.0));
        let a = vec![true, false, true, false, true];
        let ms = MsRisConfig::new(a.clone(), vec![0.4; 5], vec![1.1; 5]).unwrap();
        let forms = ris_forms(&k.ch, &k.bf, &[1.0, 0.0, 1.0, 0.0, 1.0], &[0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        for (l, &al) in a.iter().enumerate() {
            if !al {
                assert!((0..5).all(|j| forms[0].pi[(l, j)].norm() == 0.0 && forms[0].pi[(j, l)].norm() == 0.0));
                assert_eq!(forms[0].z[l].norm(), 0.0);
            }
        }
        let _ = build_ms_phase_problem(&k.ch, &k.bf, &ms, &k.sys).unwrap();
        let _ = &mut k.rng;
    }

    #[test]
    fn infeasible_expansion_is_rejected() {
        let mut k = case(4, 60);
        let es = random_es(4, &mut k.rng);
        let big = Beamformers { w: k.bf.w.scale(3.0 / norm_sqr(&k.bf.w).sqrt()), r: k.bf.r.clone() };
        assert!(matches!(build_w_problem(&k.ch, &es.clone().into(), &big, &k.sys), Err(Error::InfeasibleExpansion(_))));
        let tight = SystemParams { p_th: 1e-30, ..k.sys };
        assert!(matches!(build_es_problem(&k.ch, &k.bf, &es, &tight), Err(Error::InfeasibleExpansion(_))));
    }

    #[test]
    fn constraints_are_convex_on_samples() {
        let mut k = case(6, 70);
        let es = random_es(6, &mut k.rng);
        let p = build_es_problem(&k.ch, &k.bf, &es, &k.sys).unwrap();
        for _ in 0..50 {
            let x1 = rand_cvec(12, &mut k.rng);
            let x2 = rand_cvec(12, &mut k.rng);
            let lam: f64 = k.rng.random();
            let mid = x1.scale(lam) + x2.scale(1.0 - lam);
            for i in 0..p.constraints.len() {
                let (g1, g2, gm) = (p.constraint_value(i, &x1), p.constraint_value(i, &x2), p.constraint_value(i, &mid));
                assert!(gm <= lam * g1 + (1.0 - lam) * g2 + 1e-9 * (1.0 + g1.abs() + g2.abs()));
            }
        }
    }
}
