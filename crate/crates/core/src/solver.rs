//! Numerical solvers for the SCA surrogates and the mode-selection relaxation.
//!
//! [`solve`] runs a log-barrier method on the realified variable `[Re x; Im x]`.
//! Each centering step is a damped Newton iteration with exact Hessians of the
//! quadratic forms and their scalar links, globalized by backtracking.
//!
//! [`solve_sdr`] maximizes a concave function over the elliptope
//! `{X ⪰ 0, diag X = 1}` intersected with one linear inequality. It keeps the
//! iterate factored as `X = V Vᵀ` with unit-norm rows, so the projection onto
//! the unit diagonal is a row normalization and positive semidefiniteness is
//! structural. With more columns than rows every local maximizer of the
//! factored problem is a global maximizer of the relaxation.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec, C64};
use crate::mode::SdrProblem;
use crate::sca::{ConvexProblem, QuadraticForm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Cap on Newton (or projected-gradient) iterations across all barrier stages.
    pub max_iters: usize,
    /// Relative objective accuracy: barrier gap for [`solve`], stall for [`solve_sdr`].
    pub tol_obj: f64,
    /// Largest constraint violation accepted on exit.
    pub tol_feas: f64,
    /// Barrier weight reduction per stage, in `(0, 1)`.
    pub barrier_mu: f64,
    /// Backtracking step shrink factor, in `(0, 1)`.
    pub shrink: f64,
    /// Armijo sufficient-decrease constant, in `(0, 0.5)`.
    pub sufficient_decrease: f64,
    /// Keep per-iteration records in [`Solution::trace`].
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 2000,
            tol_obj: 1e-7,
            tol_feas: 1e-8,
            barrier_mu: 0.2,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        for (name, v) in [("tol_obj", self.tol_obj), ("tol_feas", self.tol_feas)] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("barrier_mu", self.barrier_mu), ("shrink", self.shrink)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 0.5) {
            return Err(Error::param("sufficient_decrease", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: CVec,
    pub objective: f64,
    pub feas_violation: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl Solution {
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        write_trace(&self.trace, path)
    }
}

fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iter,objective,max_violation")?;
    for r in rows {
        writeln!(f, "{},{:.10e},{:.10e}", r.iter, r.objective, r.max_violation)?;
    }
    Ok(())
}

/// A quadratic form on a subset of the realified coordinates:
/// `uᵀ P u + cᵀ u + q` with `u = v[idx]`.
struct RealForm {
    idx: Vec<usize>,
    p: DMatrix<f64>,
    c: DVector<f64>,
    q: f64,
}

impl RealForm {
    fn new(form: &QuadraticForm, support: &[usize], n: usize) -> Self {
        let k = support.len();
        let mut idx: Vec<usize> = support.to_vec();
        idx.extend(support.iter().map(|i| n + i));
        let mut p = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..k {
                let z = form.pi[(i, j)];
                p[(i, j)] = z.re;
                p[(k + i, k + j)] = z.re;
                p[(i, k + j)] = -z.im;
                p[(k + i, j)] = z.im;
            }
        }
        let mut c = DVector::zeros(2 * k);
        for i in 0..k {
            c[i] = 2.0 * form.z[i].re;
            c[k + i] = -2.0 * form.z[i].im;
        }
        let affine = p.iter().all(|&x| x == 0.0);
        RealForm { idx, p: if affine { DMatrix::zeros(0, 0) } else { p }, c, q: form.q }
    }

    fn local(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| v[i]))
    }

    fn affine(&self) -> bool {
        self.p.nrows() == 0
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        let u = self.local(v);
        let quad = if self.affine() { 0.0 } else { u.dot(&(&self.p * &u)) };
        quad + self.c.dot(&u) + self.q
    }

    /// Value and local gradient.
    fn value_grad(&self, v: &DVector<f64>) -> (f64, DVector<f64>) {
        let u = self.local(v);
        if self.affine() {
            return (self.c.dot(&u) + self.q, self.c.clone());
        }
        let pu = &self.p * &u;
        (u.dot(&pu) + self.c.dot(&u) + self.q, pu.scale(2.0) + &self.c)
    }

    /// `H[idx, idx] += a · 2P + b · g gᵀ`.
    fn add_hessian(&self, h: &mut DMatrix<f64>, g: &DVector<f64>, a: f64, b: f64) {
        let k = self.idx.len();
        for jj in 0..k {
            let j = self.idx[jj];
            for ii in 0..k {
                let i = self.idx[ii];
                let mut v = b * g[ii] * g[jj];
                if !self.affine() {
                    v += 2.0 * a * self.p[(ii, jj)];
                }
                h[(i, j)] += v;
            }
        }
    }

    fn scatter(&self, dst: &mut DVector<f64>, g: &DVector<f64>, s: f64) {
        for (k, &i) in self.idx.iter().enumerate() {
            dst[i] += s * g[k];
        }
    }
}

struct Realified<'a> {
    prob: &'a ConvexProblem,
    terms: Vec<RealForm>,
    cons: Vec<RealForm>,
    /// Barrier shifts that let a start point sitting on a constraint boundary be used.
    shift: Vec<f64>,
    dim: usize,
}

fn realify(x: &CVec) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

fn complexify(v: &DVector<f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(v[i], v[n + i]))
}

impl<'a> Realified<'a> {
    fn new(prob: &'a ConvexProblem) -> Self {
        let n = prob.dim;
        Realified {
            prob,
            terms: prob.terms.iter().map(|t| RealForm::new(&t.form, &t.support, n)).collect(),
            cons: prob.constraints.iter().map(|c| RealForm::new(&c.form, &c.support, n)).collect(),
            shift: vec![0.0; prob.constraints.len()],
            dim: 2 * n,
        }
    }

    fn objective(&self, v: &DVector<f64>) -> f64 {
        let mut f = self.prob.constant;
        for (rf, t) in self.terms.iter().zip(&self.prob.terms) {
            f += t.link.value(rf.value(v));
        }
        f
    }

    fn max_violation(&self, v: &DVector<f64>) -> f64 {
        self.cons.iter().map(|c| c.value(v)).fold(0.0f64, f64::max)
    }

    /// `φ_t(v) = −t f(v) − Σ ln(s_i − g_i(v))`, or `None` outside the domain.
    fn barrier(&self, v: &DVector<f64>, t: f64) -> Option<f64> {
        let mut phi = 0.0;
        for (c, s) in self.cons.iter().zip(&self.shift) {
            let slack = s - c.value(v);
            if !(slack > 0.0) {
                return None;
            }
            phi -= slack.ln();
        }
        let f = self.objective(v);
        if !f.is_finite() {
            return None;
        }
        Some(phi - t * f)
    }

    fn barrier_derivatives(&self, v: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(self.dim);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for (rf, term) in self.terms.iter().zip(&self.prob.terms) {
            let (q, gl) = rf.value_grad(v);
            let (d1, d2) = term.link.derivatives(q);
            rf.scatter(&mut g, &gl, -t * d1);
            rf.add_hessian(&mut h, &gl, -t * d1, -t * d2);
        }
        for (c, s) in self.cons.iter().zip(&self.shift) {
            let (val, gl) = c.value_grad(v);
            let slack = s - val;
            c.scatter(&mut g, &gl, 1.0 / slack);
            c.add_hessian(&mut h, &gl, 1.0 / slack, 1.0 / (slack * slack));
        }
        (g, h)
    }
}

/// Solves `H d = −g`, adding diagonal regularization when `H` is numerically singular.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|x| x.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

const CENTERING_STEPS: usize = 60;

/// Maximizes a [`ConvexProblem`] from a feasible start.
///
/// The returned point is never worse than `x0` and never violates a
/// constraint by more than `opts.tol_feas`.
pub fn solve(problem: &ConvexProblem, x0: &CVec, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    if x0.len() != problem.dim {
        return Err(Error::DimensionMismatch(format!("start point has length {}, problem has {}", x0.len(), problem.dim)));
    }
    let mut rp = Realified::new(problem);
    let mut v = realify(x0);
    for (i, c) in rp.cons.iter().enumerate() {
        let g = c.value(&v);
        if !(g <= opts.tol_feas) {
            return Err(Error::InfeasibleStart { index: i, violation: g });
        }
        if g > -1e-13 {
            rp.shift[i] = g.max(0.0) + 1e-11;
        }
    }
    let f0 = rp.objective(&v);
    if !f0.is_finite() {
        return Err(Error::NonFinite { iter: 0, what: format!("objective {f0} at the start point") });
    }
    let viol0 = rp.max_violation(&v);
    let m = rp.cons.len().max(1) as f64;
    let mut t = 10.0 * m / (1.0 + f0.abs());
    let mut iters = 0usize;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(TraceRow { iter: 0, objective: f0, max_violation: viol0 });
    }
    let mut converged = false;

    'outer: while iters < opts.max_iters {
        for _ in 0..CENTERING_STEPS {
            if iters >= opts.max_iters {
                break 'outer;
            }
            let Some(phi) = rp.barrier(&v, t) else { break };
            let (g, h) = rp.barrier_derivatives(&v, t);
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { iter: iters, what: format!("barrier gradient at x = {:?}", complexify(&v)) });
            }
            let Some(d) = newton_direction(h, &g) else { break };
            let slope = g.dot(&d);
            if -slope / 2.0 <= 1e-10 {
                break;
            }
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-16 {
                let cand = &v + d.scale(s);
                if let Some(pc) = rp.barrier(&cand, t) {
                    if pc <= phi + opts.sufficient_decrease * s * slope {
                        v = cand;
                        accepted = true;
                        break;
                    }
                }
                s *= opts.shrink;
            }
            iters += 1;
            if opts.record_trace {
                trace.push(TraceRow { iter: iters, objective: rp.objective(&v), max_violation: rp.max_violation(&v) });
            }
            if !accepted {
                break;
            }
        }
        let f = rp.objective(&v);
        if m / t <= opts.tol_obj * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        t /= opts.barrier_mu;
    }

    let f = rp.objective(&v);
    let viol = rp.max_violation(&v);
    if !(f >= f0) || !(viol <= opts.tol_feas.max(viol0)) {
        return Ok(Solution { x: x0.clone(), objective: f0, feas_violation: viol0, iters, converged: false, trace });
    }
    Ok(Solution { x: complexify(&v), objective: f, feas_violation: viol, iters, converged, trace })
}

/// Nearest positive semidefinite matrix in Frobenius norm (negative eigenvalues clamped).
pub fn project_psd(s: &CMat) -> Result<CMat> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!("project_psd on a {}×{} matrix", n, s.ncols())));
    }
    let scale = s.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let defect = hermitian_defect(s);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let eig = SymmetricEigen::new(crate::linalg::hermitian_part(s));
    let lam = eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0));
    let u = &eig.eigenvectors;
    let out = u * CMat::from_diagonal(&lam) * u.adjoint();
    Ok(crate::linalg::hermitian_part(&out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrSolution {
    /// Relaxed solution, symmetric PSD with unit diagonal.
    pub x: DMatrix<f64>,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl SdrSolution {
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        write_trace(&self.trace, path)
    }
}

fn normalize_rows(v: &mut DMatrix<f64>) {
    for mut row in v.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        } else {
            row.fill(0.0);
            row[0] = 1.0;
        }
    }
}

/// Objective of the factored problem with the SI inequality as a barrier of
/// weight `w`: `f(VVᵀ) + w · ln(1 + s − SI(VVᵀ)/P_th)`.
struct SdrPhase<'a> {
    sdr: &'a SdrProblem,
    weight: f64,
    shift: f64,
    /// Phase-one mode: maximize `−SI/P_th` instead of the secrecy surrogate.
    feasibility: bool,
}

impl SdrPhase<'_> {
    fn slack(&self, x: &DMatrix<f64>) -> f64 {
        1.0 + self.shift - self.sdr.si_ratio(x)
    }

    fn value(&self, x: &DMatrix<f64>) -> Option<f64> {
        if self.feasibility {
            return Some(-self.sdr.si_ratio(x));
        }
        let f = self.sdr.objective(x);
        let slack = self.slack(x);
        if !(slack > 0.0) || !f.is_finite() {
            return None;
        }
        Some(f + self.weight * slack.ln())
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.feasibility {
            return -self.sdr.si_ratio_gradient();
        }
        let slack = self.slack(x);
        self.sdr.objective_gradient(x) - self.sdr.si_ratio_gradient().scale(self.weight / slack)
    }
}

/// Projected-gradient ascent on unit-row factors for one barrier weight.
fn ascend(phase: &SdrPhase<'_>, v: &mut DMatrix<f64>, opts: &SolverOptions, budget: usize, trace: &mut Vec<TraceRow>, it0: usize) -> (usize, bool) {
    let mut x = &*v * v.transpose();
    let Some(mut val) = phase.value(&x) else { return (0, false) };
    let mut step: f64 = f64::NAN;
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut stall = 0usize;
    let mut iters = 0usize;
    while iters < budget {
        let gx = phase.gradient(&x);
        let gv = (&gx * &*v).scale(2.0);
        // Riemannian gradient: remove the radial component of each row.
        let mut rg = gv.clone();
        for i in 0..v.nrows() {
            let radial = rg.row(i).dot(&v.row(i));
            for j in 0..v.ncols() {
                rg[(i, j)] -= radial * v[(i, j)];
            }
        }
        let gnorm = rg.norm();
        if !(gnorm > 1e-15 * (1.0 + val.abs())) {
            return (iters, true);
        }
        if let Some((pv, pg)) = &prev {
            let sv = &*v - pv;
            let yv = &rg - pg;
            let sy = sv.dot(&yv).abs();
            if sy > 0.0 {
                step = sv.norm_squared() / sy;
            }
        }
        if !(step.is_finite() && step > 0.0) {
            step = 0.1 / gnorm;
        }
        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = &*v + rg.scale(s);
            normalize_rows(&mut cand);
            let xc = &cand * cand.transpose();
            if let Some(vc) = phase.value(&xc) {
                let moved = &cand - &*v;
                if vc >= val + opts.sufficient_decrease * rg.dot(&moved) {
                    prev = Some((v.clone(), rg));
                    *v = cand;
                    x = xc;
                    let gain = vc - val;
                    val = vc;
                    accepted = true;
                    if gain <= opts.tol_obj * 1e-2 * (1.0 + val.abs()) {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                    break;
                }
            }
            s *= opts.shrink;
        }
        iters += 1;
        if opts.record_trace {
            trace.push(TraceRow { iter: it0 + iters, objective: phase.sdr.objective(&x), max_violation: (phase.sdr.si_ratio(&x) - 1.0).max(0.0) });
        }
        if !accepted {
            return (iters, true);
        }
        if stall >= 5 {
            return (iters, true);
        }
        if phase.feasibility && phase.sdr.si_ratio(&x) < 1.0 - 1e-3 {
            return (iters, true);
        }
    }
    (iters, false)
}

/// Solves the mode-selection relaxation starting from the incumbent sign vector
/// `x_bar` (length `L + 1`, last entry `+1`).
pub fn solve_sdr(sdr: &SdrProblem, x_bar: &DVector<f64>, opts: &SolverOptions) -> Result<SdrSolution> {
    opts.validate()?;
    let n = sdr.size();
    if x_bar.len() != n {
        return Err(Error::DimensionMismatch(format!("incumbent of length {} for an SDR of size {n}", x_bar.len())));
    }
    let k = n + 1;
    let mut v = DMatrix::zeros(n, k);
    v.set_column(0, x_bar);
    // Deterministic perturbation that lets the iterate leave the rank-one start.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5d12_0b0e);
    let noise = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng)).scale(1.0 / (k as f64).sqrt());
    let mut trace = Vec::new();
    let mut iters = 0usize;

    let si0 = sdr.si_ratio(&(x_bar * x_bar.transpose()));
    if !(si0 <= 1.0 + opts.tol_feas) {
        // Phase one: look for any relaxed point meeting the SI threshold.
        let mut vp = &v + noise.scale(0.3);
        normalize_rows(&mut vp);
        let phase = SdrPhase { sdr, weight: 0.0, shift: 0.0, feasibility: true };
        let (it, _) = ascend(&phase, &mut vp, opts, opts.max_iters, &mut trace, 0);
        iters += it;
        let si = sdr.si_ratio(&(&vp * vp.transpose()));
        if !(si < 1.0) {
            return Err(Error::EmptyConstraintSet(format!(
                "SI threshold unmet by the relaxation (best P_si/P_th = {si:.3e})"
            )));
        }
        v = vp;
    } else {
        let mut eps = 1e-2;
        loop {
            let mut cand = &v + noise.scale(eps);
            normalize_rows(&mut cand);
            if sdr.si_ratio(&(&cand * cand.transpose())) < 1.0 || eps < 1e-9 {
                if sdr.si_ratio(&(&cand * cand.transpose())) < 1.0 + opts.tol_feas {
                    v = cand;
                }
                break;
            }
            eps *= 0.25;
        }
        normalize_rows(&mut v);
    }

    let x_start = &v * v.transpose();
    let f_scale = 1.0 + sdr.objective(&x_start).abs();
    let shift = (sdr.si_ratio(&x_start) - 1.0).max(0.0) + 1e-11;
    let mut weight = 1e-2 * f_scale;
    let mut converged = false;
    while iters < opts.max_iters {
        let phase = SdrPhase { sdr, weight, shift, feasibility: false };
        let (it, done) = ascend(&phase, &mut v, opts, opts.max_iters - iters, &mut trace, iters);
        iters += it;
        if weight <= opts.tol_obj * f_scale {
            converged = done;
            break;
        }
        weight *= opts.barrier_mu * opts.barrier_mu;
    }
    let x = &v * v.transpose();
    let objective = sdr.objective(&x);
    Ok(SdrSolution { x, objective, iters, converged, trace })
}
