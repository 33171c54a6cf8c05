use super::forms::QuadraticForm;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec, LN2};

/// Tangent of `τ ↦ log2(1 + A/τ)` at `τ̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    pub tau_bar: f64,
    pub value: f64,
    pub slope: f64,
}

impl Tangent {
    pub fn eval(&self, tau: f64) -> f64 {
        self.value + self.slope * (tau - self.tau_bar)
    }

    pub fn intercept(&self) -> f64 {
        self.value - self.slope * self.tau_bar
    }
}

/// The convex function `log2(1 + A/τ)` lies above its tangent, so the result is
/// a global affine minorant that is exact at `τ̄`.
pub fn taylor_log_tangent(a: f64, tau_bar: f64) -> Result<Tangent> {
    if !(tau_bar > 0.0 && tau_bar.is_finite()) {
        return Err(Error::param("tau_bar", format!("expansion point must be > 0, got {tau_bar}")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::param("A", format!("numerator must be >= 0, got {a}")));
    }
    let ratio = a / tau_bar;
    let slope = -a / (tau_bar * (tau_bar + a) * LN2);
    Ok(Tangent { tau_bar, value: ratio.ln_1p() / LN2, slope })
}

/// Affine minorant `2Re{x^H M x̄} − x̄^H M x̄` of the convex form `x^H M x`.
pub fn quad_linearize(m: &CMat, x_bar: &CVec) -> Result<QuadraticForm> {
    let k = m.nrows();
    if m.ncols() != k || x_bar.len() != k {
        return Err(Error::DimensionMismatch(format!("linearizing a {}×{} form at a {}-vector", k, m.ncols(), x_bar.len())));
    }
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let defect = hermitian_defect(m);
    if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(defect));
    }
    let mx = m * x_bar;
    let q = -x_bar.iter().zip(mx.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    Ok(QuadraticForm { pi: CMat::zeros(k, k), z: mx.map(|v| v.conj()), q })
}

/// Minorant of `log2(1 + ψ/τ)` that is jointly concave in `(ψ, τ)` on the
/// positive orthant and exact at `(ψ̄, τ̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFracBound {
    pub psi_bar: f64,
    pub tau_bar: f64,
    /// `log2(1 + ψ̄/τ̄)`.
    pub base: f64,
    /// `(ψ̄/τ̄)/(1 + ψ̄/τ̄)`.
    pub coef: f64,
}

impl LogFracBound {
    pub fn eval(&self, psi: f64, tau: f64) -> f64 {
        if psi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.base + self.coef / LN2 * (2.0 - self.psi_bar / psi - tau / self.tau_bar)
    }
}

pub fn log_frac_lower(psi_bar: f64, tau_bar: f64) -> Result<LogFracBound> {
    if !(psi_bar > 0.0 && psi_bar.is_finite()) {
        return Err(Error::param("psi_bar", format!("must be > 0, got {psi_bar}")));
    }
    if !(tau_bar > 0.0 && tau_bar.is_finite()) {
        return Err(Error::param("tau_bar", format!("must be > 0, got {tau_bar}")));
    }
    let ratio = psi_bar / tau_bar;
    Ok(LogFracBound { psi_bar, tau_bar, base: ratio.ln_1p() / LN2, coef: ratio / (1.0 + ratio) })
}
