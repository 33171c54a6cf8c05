use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec, C64};

/// `f(x) = x^H Π x + 2 Re{x^T z} + q` with Hermitian `Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub pi: CMat,
    pub z: CVec,
    pub q: f64,
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

impl QuadraticForm {
    /// Validates shapes and Hermitian symmetry (relative to the largest entry),
    /// then stores the exactly Hermitian part of `pi`.
    pub fn new(pi: CMat, z: CVec, q: f64) -> Result<Self> {
        let k = pi.nrows();
        if pi.ncols() != k || z.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "quadratic form with Π {}×{} and z of length {}",
                pi.nrows(),
                pi.ncols(),
                z.len()
            )));
        }
        let defect = hermitian_defect(&pi);
        if defect > 1e-12 * max_abs(&pi).max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self::from_parts_symmetrized(pi, z, q))
    }

    pub(crate) fn from_parts_symmetrized(pi: CMat, z: CVec, q: f64) -> Self {
        let pi = (&pi + pi.adjoint()).scale(0.5);
        QuadraticForm { pi, z, q }
    }

    pub fn zeros(k: usize) -> Self {
        QuadraticForm { pi: CMat::zeros(k, k), z: CVec::zeros(k), q: 0.0 }
    }

    pub fn identity(k: usize, q: f64) -> Self {
        QuadraticForm { pi: CMat::identity(k, k), z: CVec::zeros(k), q }
    }

    pub fn constant(k: usize, q: f64) -> Self {
        QuadraticForm { q, ..Self::zeros(k) }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn value(&self, x: &CVec) -> f64 {
        let px = &self.pi * x;
        let quad: C64 = x.iter().zip(px.iter()).map(|(a, b)| a.conj() * b).sum();
        let lin: C64 = x.iter().zip(self.z.iter()).map(|(a, b)| a * b).sum();
        quad.re + 2.0 * lin.re + self.q
    }

    /// Gradient `∂f/∂Re x + j ∂f/∂Im x = 2 Π x + 2 conj(z)`.
    pub fn gradient(&self, x: &CVec) -> CVec {
        (&self.pi * x).scale(2.0) + self.z.map(|z| z.conj()).scale(2.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        QuadraticForm { pi: self.pi.scale(s), z: self.z.scale(s), q: self.q * s }
    }

    pub fn with_offset(mut self, dq: f64) -> Self {
        self.q += dq;
        self
    }

    pub fn is_affine(&self) -> bool {
        self.pi.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

/// Rewrites `Tr(R^H X R Y) + Tr(R Z) + Tr(R^H Z^H) + q` with `R = diag(μ)` as a
/// quadratic form in `μ`. The quadratic matrix is `X ⊙ Y^T`, the linear term
/// `diag(Z)`.
pub fn trace_to_hadamard(x: &CMat, y: &CMat, z: Option<&CMat>, q: f64) -> Result<QuadraticForm> {
    let l = x.nrows();
    let square = |m: &CMat| m.nrows() == l && m.ncols() == l;
    if !square(x) || !square(y) || !z.map_or(true, square) {
        return Err(Error::DimensionMismatch("trace_to_hadamard expects conformable square inputs".into()));
    }
    let pi = CMat::from_fn(l, l, |i, j| x[(i, j)] * y[(j, i)]);
    let zd = match z {
        Some(z) => z.diagonal(),
        None => CVec::zeros(l),
    };
    Ok(QuadraticForm::from_parts_symmetrized(pi, zd, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag, outer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn rmat(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn trace_expr(x: &CMat, y: &CMat, z: &CMat, q: f64, mu: &CVec) -> C64 {
        let r = diag(mu);
        (r.adjoint() * x * &r * y).trace() + (&r * z).trace() + (r.adjoint() * z.adjoint()).trace() + q
    }

    #[test]
    fn scalar_case() {
        let x = CMat::from_element(1, 1, c(2.0, 0.0));
        let y = CMat::from_element(1, 1, c(3.0, 0.0));
        let z = CMat::from_element(1, 1, c(0.5, -0.25));
        let f = trace_to_hadamard(&x, &y, Some(&z), 1.5).unwrap();
        let mu = CVec::from_element(1, c(0.3, 0.4));
        let want = 0.25 * 6.0 + 2.0 * (mu[0] * z[(0, 0)]).re + 1.5;
        assert!((f.value(&mu) - want).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_trace_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in [2usize, 4, 7] {
            let (a, b) = (rmat(l, &mut rng), rmat(l, &mut rng));
            let x = &a * a.adjoint();
            let y = &b * b.adjoint();
            let z = rmat(l, &mut rng);
            let f = trace_to_hadamard(&x, &y, Some(&z), 0.7).unwrap();
            for _ in 0..50 {
                let mu = rvec(l, &mut rng);
                let t = trace_expr(&x, &y, &z, 0.7, &mu);
                assert!(t.im.abs() < 1e-12 * (1.0 + t.re.abs()));
                assert!((f.value(&mu) - t.re).abs() <= 1e-12 * (1.0 + t.re.abs()));
            }
        }
    }

    #[test]
    fn unit_phase_values_are_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (a, b) = (rmat(5, &mut rng), rmat(5, &mut rng));
        let f = trace_to_hadamard(&(&a * a.adjoint()), &(&b * b.adjoint()), None, 0.0).unwrap();
        let mu = CVec::from_fn(5, |i, _| crate::linalg::cis(i as f64));
        let v: C64 = (mu.adjoint() * &f.pi * &mu)[(0, 0)];
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn rank_one_forms_match_squared_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (p, t) = (rvec(4, &mut rng), rvec(4, &mut rng));
        let f = trace_to_hadamard(&outer(&p, &p), &outer(&t, &t), None, 0.0).unwrap();
        let mu = rvec(4, &mut rng);
        let s: C64 = (0..4).map(|l| p[l].conj() * t[l] * mu[l]).sum();
        assert!((f.value(&mu) - s.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = CMat::zeros(3, 3);
        assert!(trace_to_hadamard(&x, &CMat::zeros(2, 2), None, 0.0).is_err());
        let mut h = CMat::identity(2, 2);
        h[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(QuadraticForm::new(h, CVec::zeros(2), 0.0), Err(Error::NotHermitian(_))));
        assert!(QuadraticForm::new(CMat::identity(2, 2), CVec::zeros(3), 0.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = rmat(3, &mut rng);
        let f = QuadraticForm::new(&a * a.adjoint(), rvec(3, &mut rng), 0.2).unwrap();
        let x = rvec(3, &mut rng);
        let g = f.gradient(&x);
        let h = 1e-6;
        for i in 0..3 {
            for (dir, part) in [(c(1.0, 0.0), g[i].re), (c(0.0, 1.0), g[i].im)] {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += dir * h;
                xm[i] -= dir * h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((fd - part).abs() < 1e-7);
            }
        }
    }
}
