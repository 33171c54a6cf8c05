//! RIS configurations, beamformers, and link-level metrics.

use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cis, norm_sqr, row_dot, wrap_phase, CMat, CVec, C64, LN2};

/// Absolute tolerance for unit-scale constraints in feasibility reports.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Alice transmit power (W).
    pub p_a: f64,
    /// Bob jamming power (W).
    pub p_b: f64,
    /// Noise power at Bob (W).
    pub noise_r: f64,
    /// Noise power at Eve (W).
    pub noise_e: f64,
    /// Self-interference threshold at Bob's receive antennas (W).
    pub p_th: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        use crate::channels::dbm_to_watts;
        SystemParams {
            p_a: dbm_to_watts(10.0),
            p_b: dbm_to_watts(10.0),
            noise_r: dbm_to_watts(-80.0),
            noise_e: dbm_to_watts(-80.0),
            p_th: dbm_to_watts(-60.0),
        }
    }
}

impl SystemParams {
    /// `P_B = 0` is allowed (no jamming); every other quantity must be positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("P_A", self.p_a), ("sigma_r^2", self.noise_r), ("sigma_e^2", self.noise_e), ("P_th", self.p_th)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.p_b >= 0.0 && self.p_b.is_finite()) {
            return Err(Error::param("P_B", format!("must be finite and >= 0, got {}", self.p_b)));
        }
        Ok(())
    }
}

/// Energy-splitting configuration: every element reflects and refracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsRisConfig {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl EsRisConfig {
    pub fn new(u: Vec<f64>, v: Vec<f64>, mu: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        let l = u.len();
        if v.len() != l || mu.len() != l || nu.len() != l {
            return Err(Error::DimensionMismatch("ES config vectors differ in length".into()));
        }
        Ok(EsRisConfig {
            u,
            v,
            mu: mu.into_iter().map(wrap_phase).collect(),
            nu: nu.into_iter().map(wrap_phase).collect(),
        })
    }

    /// Builds a configuration from complex reflect/refract coefficients, pulling
    /// any element with `|μ|² + |ν|² > 1` back onto the unit circle.
    pub fn from_coefficients(refl: &CVec, refr: &CVec) -> Self {
        let l = refl.len();
        let mut cfg = EsRisConfig { u: vec![0.0; l], v: vec![0.0; l], mu: vec![0.0; l], nu: vec![0.0; l] };
        for i in 0..l {
            let (mut u, mut v) = (refl[i].norm(), refr[i].norm());
            let s = u * u + v * v;
            if s > 1.0 {
                let k = s.sqrt();
                u /= k;
                v /= k;
            }
            cfg.u[i] = u.min(1.0);
            cfg.v[i] = v.min(1.0);
            cfg.mu[i] = wrap_phase(refl[i].arg());
            cfg.nu[i] = wrap_phase(refr[i].arg());
        }
        cfg
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Diagonals of `R_s` and `T_s`.
    pub fn coefficients(&self) -> (CVec, CVec) {
        let l = self.len();
        let refl = CVec::from_fn(l, |i, _| cis(self.mu[i]) * self.u[i]);
        let refr = CVec::from_fn(l, |i, _| cis(self.nu[i]) * self.v[i]);
        (refl, refr)
    }

    /// Largest violation of the per-element amplitude constraints.
    pub fn violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            let (u, v) = (self.u[i], self.v[i]);
            worst = worst.max(u * u + v * v - 1.0).max(-u).max(-v).max(u - 1.0).max(v - 1.0);
        }
        worst
    }
}

/// Mode-switching configuration: element `l` reflects when `a[l]` and refracts
/// otherwise, always at unit amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsRisConfig {
    pub a: Vec<bool>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl MsRisConfig {
    pub fn new(a: Vec<bool>, mu: Vec<f64>, nu: Vec<f64>) -> Result<Self> {
        if mu.len() != a.len() || nu.len() != a.len() {
            return Err(Error::DimensionMismatch("MS config vectors differ in length".into()));
        }
        Ok(MsRisConfig {
            a,
            mu: mu.into_iter().map(wrap_phase).collect(),
            nu: nu.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn with_modes(&self, a: Vec<bool>) -> Self {
        MsRisConfig { a, mu: self.mu.clone(), nu: self.nu.clone() }
    }

    /// Unit-modulus phase vectors `diag(R')`, `diag(T')`.
    pub fn phase_vectors(&self) -> (CVec, CVec) {
        let l = self.len();
        (CVec::from_fn(l, |i, _| cis(self.mu[i])), CVec::from_fn(l, |i, _| cis(self.nu[i])))
    }

    /// Diagonals of `A R'` and `(I - A) T'`.
    pub fn coefficients(&self) -> (CVec, CVec) {
        let (p, t) = self.phase_vectors();
        let l = self.len();
        let refl = CVec::from_fn(l, |i, _| if self.a[i] { p[i] } else { C64::new(0.0, 0.0) });
        let refr = CVec::from_fn(l, |i, _| if self.a[i] { C64::new(0.0, 0.0) } else { t[i] });
        (refl, refr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RisConfig {
    Es(EsRisConfig),
    Ms(MsRisConfig),
}

impl RisConfig {
    pub fn len(&self) -> usize {
        match self {
            RisConfig::Es(c) => c.len(),
            RisConfig::Ms(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coefficients(&self) -> (CVec, CVec) {
        match self {
            RisConfig::Es(c) => c.coefficients(),
            RisConfig::Ms(c) => c.coefficients(),
        }
    }

    pub fn violation(&self) -> f64 {
        match self {
            RisConfig::Es(c) => c.violation(),
            // Binary modes and unit amplitudes hold by construction.
            RisConfig::Ms(_) => 0.0,
        }
    }
}

impl From<EsRisConfig> for RisConfig {
    fn from(c: EsRisConfig) -> Self {
        RisConfig::Es(c)
    }
}

impl From<MsRisConfig> for RisConfig {
    fn from(c: MsRisConfig) -> Self {
        RisConfig::Ms(c)
    }
}

/// Transmit (`w`, `M×1`) and receive (`r`, `1×N`, stored as its entries) beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w: CVec,
    pub r: CVec,
}

impl Beamformers {
    pub fn power_violation(&self) -> f64 {
        (norm_sqr(&self.w) - 1.0).max(norm_sqr(&self.r) - 1.0).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub rate_bob: f64,
    pub rate_eve: f64,
    /// `max(C_raw, 0)`, the reported secrecy capacity.
    pub secrecy: f64,
    /// `R_r - R_e`, used inside the optimization.
    pub secrecy_raw: f64,
    pub p_si: f64,
    pub p_j: f64,
}

#[inline]
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN2
}

/// Effective Bob self-interference matrix `H_r` (`N×M`) and Eve jamming row
/// `h_e` (`1×M`) for diagonal reflect/refract coefficients.
pub fn effective_channels_from(ch: &ChannelSet, refl: &CVec, refr: &CVec) -> Result<(CMat, CVec)> {
    let (m, _n, l) = ch.dims();
    if refl.len() != l || refr.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "RIS configuration has {} elements, channels have L = {l}",
            refl.len()
        )));
    }
    // diag(refl) H_ti, then H_ir^H (...)
    let mut scaled = ch.h_ti.clone();
    for (li, mut row) in scaled.row_iter_mut().enumerate() {
        row *= refl[li];
    }
    let h_r = &ch.h_tr + ch.h_ir.adjoint() * scaled;
    let mut h_e = CVec::zeros(m);
    for li in 0..l {
        let coef = ch.h_ie[li].conj() * refr[li];
        for mi in 0..m {
            h_e[mi] += coef * ch.h_ti[(li, mi)];
        }
    }
    Ok((h_r, h_e))
}

pub fn effective_channels(ch: &ChannelSet, ris: &RisConfig) -> Result<(CMat, CVec)> {
    let (refl, refr) = ris.coefficients();
    effective_channels_from(ch, &refl, &refr)
}

pub(crate) fn metrics_from_effective(ch: &ChannelSet, h_r: &CMat, h_e: &CVec, bf: &Beamformers, sys: &SystemParams) -> LinkMetrics {
    let hw = h_r * &bf.w;
    let p_si = sys.p_b * row_dot(&bf.r, &hw).norm_sqr();
    let p_j = sys.p_b * row_dot(h_e, &bf.w).norm_sqr();
    let bob_gain: C64 = bf.r.iter().zip(ch.h_ar.iter()).map(|(r, h)| r * h.conj()).sum();
    let rate_bob = log2_1p(sys.p_a * bob_gain.norm_sqr() / (p_si + sys.noise_r));
    let rate_eve = log2_1p(sys.p_a * ch.h_ae.norm_sqr() / (p_j + sys.noise_e));
    let secrecy_raw = rate_bob - rate_eve;
    LinkMetrics { rate_bob, rate_eve, secrecy: secrecy_raw.max(0.0), secrecy_raw, p_si, p_j }
}

pub fn link_metrics(ch: &ChannelSet, ris: &RisConfig, bf: &Beamformers, sys: &SystemParams) -> Result<LinkMetrics> {
    let (h_r, h_e) = effective_channels(ch, ris)?;
    check_beamformer_dims(ch, bf)?;
    Ok(metrics_from_effective(ch, &h_r, &h_e, bf, sys))
}

pub(crate) fn check_beamformer_dims(ch: &ChannelSet, bf: &Beamformers) -> Result<()> {
    let (m, n, _) = ch.dims();
    if bf.w.len() != m || bf.r.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "beamformers (w: {}, r: {}) vs channels (M = {m}, N = {n})",
            bf.w.len(),
            bf.r.len()
        )));
    }
    Ok(())
}

/// `P_B w^H H_r^H H_r w`, the total self-interference power across all receive antennas.
pub fn si_total_power(h_r: &CMat, w: &CVec, sys: &SystemParams) -> f64 {
    sys.p_b * norm_sqr(&(h_r * w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub ris_ok: bool,
    pub power_ok: bool,
    pub si_ok: bool,
    pub ris_violation: f64,
    pub power_violation: f64,
    /// Excess of the total SI power over `P_th`, in watts.
    pub si_violation: f64,
    /// Largest of the unit-scale violations, with the SI excess expressed relative to `P_th`.
    pub worst_violation: f64,
}

impl FeasibilityReport {
    pub fn ok(&self) -> bool {
        self.ris_ok && self.power_ok && self.si_ok
    }
}

pub fn feasibility(ch: &ChannelSet, ris: &RisConfig, bf: &Beamformers, sys: &SystemParams) -> Result<FeasibilityReport> {
    let (h_r, _) = effective_channels(ch, ris)?;
    check_beamformer_dims(ch, bf)?;
    let ris_violation = ris.violation().max(0.0);
    let power_violation = bf.power_violation();
    let si_violation = (si_total_power(&h_r, &bf.w, sys) - sys.p_th).max(0.0);
    Ok(FeasibilityReport {
        ris_ok: ris_violation <= FEAS_TOL,
        power_ok: power_violation <= FEAS_TOL,
        si_ok: si_violation <= FEAS_TOL * sys.p_th,
        ris_violation,
        power_violation,
        si_violation,
        worst_violation: ris_violation.max(power_violation).max(si_violation / sys.p_th),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gen_channels, ChannelParams, Geometry};
    use crate::linalg::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(l: usize, seed: u64) -> (ChannelSet, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geom = Geometry { l, ..Geometry::default() };
        let ch = gen_channels(&geom, &ChannelParams::default(), &mut rng).unwrap();
        (ch, rng)
    }

    fn random_es(l: usize, rng: &mut ChaCha8Rng) -> EsRisConfig {
        let u: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = u.iter().map(|u| (1.0 - u * u).sqrt() * rng.random::<f64>()).collect();
        let mu = (0..l).map(|_| rng.random::<f64>() * 6.28).collect();
        let nu = (0..l).map(|_| rng.random::<f64>() * 6.28).collect();
        EsRisConfig::new(u, v, mu, nu).unwrap()
    }

    fn random_cvec(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
    }

    #[test]
    fn zero_amplitudes_leave_direct_path() {
        let (ch, _) = setup(4, 1);
        let es = EsRisConfig::new(vec![0.0; 4], vec![0.0; 4], vec![1.0; 4], vec![2.0; 4]).unwrap();
        let (h_r, h_e) = effective_channels(&ch, &es.into()).unwrap();
        assert_eq!(h_r, ch.h_tr);
        assert!(h_e.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn all_reflect_silences_eve_path() {
        let (ch, _) = setup(4, 2);
        let ms = MsRisConfig::new(vec![true; 4], vec![0.3; 4], vec![1.3; 4]).unwrap();
        let (_, h_e) = effective_channels(&ch, &ms.into()).unwrap();
        assert!(h_e.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn effective_channel_matches_explicit_sum() {
        let (ch, mut rng) = setup(4, 3);
        let es = random_es(4, &mut rng);
        let (refl, _) = es.coefficients();
        let (h_r, _) = effective_channels(&ch, &es.clone().into()).unwrap();
        let (_, n, _) = ch.dims();
        for ni in 0..n {
            for mi in 0..4 {
                let mut s = ch.h_tr[(ni, mi)];
                for l in 0..4 {
                    s += ch.h_ir[(l, ni)].conj() * refl[l] * ch.h_ti[(l, mi)];
                }
                assert!((s - h_r[(ni, mi)]).norm() <= 1e-12 * s.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (ch, _) = setup(4, 4);
        let es = EsRisConfig::new(vec![0.5; 3], vec![0.5; 3], vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert!(matches!(effective_channels(&ch, &es.into()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_jamming_power_reduces_to_snr() {
        let (ch, mut rng) = setup(4, 5);
        let es = random_es(4, &mut rng);
        let bf = Beamformers { w: random_cvec(4, &mut rng, 0.5), r: random_cvec(2, &mut rng, 0.5) };
        let sys = SystemParams { p_b: 0.0, ..SystemParams::default() };
        let m = link_metrics(&ch, &es.into(), &bf, &sys).unwrap();
        assert_eq!(m.p_si, 0.0);
        assert_eq!(m.p_j, 0.0);
        let g: C64 = bf.r.iter().zip(ch.h_ar.iter()).map(|(r, h)| r * h.conj()).sum();
        assert!((m.rate_bob - (1.0 + sys.p_a * g.norm_sqr() / sys.noise_r).log2()).abs() < 1e-12);
        assert!((m.rate_eve - (1.0 + sys.p_a * ch.h_ae.norm_sqr() / sys.noise_e).log2()).abs() < 1e-12);
    }

    #[test]
    fn equal_rates_give_zero_secrecy() {
        let (mut ch, _) = setup(1, 6);
        ch.h_ar = CVec::from_element(2, c(0.0, 0.0));
        ch.h_ar[0] = c(1e-3, 0.0);
        ch.h_ae = c(0.0, 1e-3);
        let ms = MsRisConfig::new(vec![true], vec![0.0], vec![0.0]).unwrap();
        let bf = Beamformers { w: CVec::zeros(4), r: CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]) };
        let m = link_metrics(&ch, &ms.into(), &bf, &SystemParams::default()).unwrap();
        assert!(m.secrecy_raw.abs() < 1e-12);
        assert_eq!(m.secrecy, m.secrecy_raw.max(0.0));
    }

    #[test]
    fn si_power_matches_trace_form() {
        let (ch, mut rng) = setup(9, 7);
        let es = random_es(9, &mut rng);
        let bf = Beamformers { w: random_cvec(4, &mut rng, 0.4), r: random_cvec(2, &mut rng, 0.6) };
        let sys = SystemParams::default();
        let ris: RisConfig = es.into();
        let m = link_metrics(&ch, &ris, &bf, &sys).unwrap();
        let (h_r, _) = effective_channels(&ch, &ris).unwrap();
        // w^H (H_r^H r^H P_B r H_r) w
        let rh = h_r.transpose() * &bf.r; // (r H_r)^T
        let k = rh.conjugate() * rh.transpose() * C64::new(sys.p_b, 0.0);
        let trace_form = (bf.w.adjoint() * k * &bf.w)[(0, 0)].re;
        assert!((trace_form - m.p_si).abs() <= 1e-10 * m.p_si);
    }

    #[test]
    fn feasibility_examples() {
        let (ch, _) = setup(2, 8);
        let sys = SystemParams::default();
        let bad = EsRisConfig::new(vec![0.8; 2], vec![0.8; 2], vec![0.0; 2], vec![0.0; 2]).unwrap();
        let bf0 = Beamformers { w: CVec::zeros(4), r: CVec::zeros(2) };
        let rep = feasibility(&ch, &bad.into(), &bf0, &sys).unwrap();
        assert!(!rep.ris_ok);
        assert!(rep.power_ok && rep.si_ok);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let edge = EsRisConfig::new(vec![h; 2], vec![h; 2], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(feasibility(&ch, &edge.into(), &bf0, &sys).unwrap().ok());
        let one = EsRisConfig::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(feasibility(&ch, &one.into(), &bf0, &sys).unwrap().ris_ok);
    }

    #[test]
    fn phase_rotation_and_power_scaling() {
        let (ch, mut rng) = setup(4, 9);
        let ris: RisConfig = random_es(4, &mut rng).into();
        let bf = Beamformers { w: random_cvec(4, &mut rng, 0.4), r: random_cvec(2, &mut rng, 0.6) };
        let sys = SystemParams::default();
        let base = link_metrics(&ch, &ris, &bf, &sys).unwrap();
        let rot = Beamformers { w: bf.w.map(|z| z * cis(1.234)), r: bf.r.clone() };
        let m = link_metrics(&ch, &ris, &rot, &sys).unwrap();
        assert!((m.p_si - base.p_si).abs() <= 1e-12 * base.p_si);
        assert!((m.p_j - base.p_j).abs() <= 1e-12 * base.p_j);
        let doubled = link_metrics(&ch, &ris, &bf, &SystemParams { p_b: 2.0 * sys.p_b, ..sys }).unwrap();
        assert!((doubled.p_si - 2.0 * base.p_si).abs() <= 1e-12 * base.p_si);
        assert!((doubled.p_j - 2.0 * base.p_j).abs() <= 1e-12 * base.p_j);
    }

    #[test]
    fn ms_elements_feed_exactly_one_path() {
        let ms = MsRisConfig::new(vec![true, false, true], vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap();
        let (refl, refr) = ms.coefficients();
        for l in 0..3 {
            assert!((refl[l].norm() + refr[l].norm() - 1.0).abs() < 1e-15);
            assert!(refl[l].norm() == 0.0 || refr[l].norm() == 0.0);
        }
    }
}
