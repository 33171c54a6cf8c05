use std::fmt::Write as _;

use super::forms::QuadraticForm;
use crate::linalg::{CVec, C64, LN2};

/// Scalar map applied to the value `q` of a quadratic form inside the objective.
/// Every link is concave and non-decreasing on its domain, or affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// `coef · q`; concave only when the form is affine or `coef ≤ 0` with a PSD form.
    Linear(f64),
    /// `−log2(1 + b/q)` on `q > 0`.
    NegLog2OnePlusRatio(f64),
    /// `−s/q` on `q > 0`.
    NegInverse(f64),
}

impl Link {
    pub fn value(&self, q: f64) -> f64 {
        match *self {
            Link::Linear(k) => k * q,
            Link::NegLog2OnePlusRatio(b) => {
                if b == 0.0 {
                    0.0
                } else if q > 0.0 {
                    -(b / q).ln_1p() / LN2
                } else {
                    f64::NEG_INFINITY
                }
            }
            Link::NegInverse(s) => {
                if q > 0.0 {
                    -s / q
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// First and second derivatives with respect to `q`.
    pub fn derivatives(&self, q: f64) -> (f64, f64) {
        match *self {
            Link::Linear(k) => (k, 0.0),
            Link::NegLog2OnePlusRatio(b) => {
                let d = q * (q + b);
                (b / (d * LN2), -b * (2.0 * q + b) / (LN2 * d * d))
            }
            Link::NegInverse(s) => (s / (q * q), -2.0 * s / (q * q * q)),
        }
    }
}

/// `link(form(x[support]))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub support: Vec<usize>,
    pub form: QuadraticForm,
    pub link: Link,
}

/// Convex constraint `form(x[support]) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub support: Vec<usize>,
    pub form: QuadraticForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Transmit,
    Receive,
    EsRis,
    MsPhases,
}

/// Where the surrogate was built and the slack values it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub x: CVec,
    /// `τ̄`: SI-plus-noise power at Bob (W).
    pub tau: f64,
    /// `ψ̄`: useful signal power at Bob, receive block only (W).
    pub psi: Option<f64>,
    /// `ϱ̄`: jamming-plus-noise power at Eve (W), absent when Eve's rate is constant.
    pub varrho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProblem {
    pub dim: usize,
    pub block: Block,
    pub constant: f64,
    pub terms: Vec<Term>,
    pub constraints: Vec<Constraint>,
    pub expansion: Expansion,
}

fn gather(x: &CVec, support: &[usize]) -> CVec {
    CVec::from_iterator(support.len(), support.iter().map(|&i| x[i]))
}

impl ConvexProblem {
    /// Objective value, `−∞` outside the domain of any link.
    pub fn objective(&self, x: &CVec) -> f64 {
        let mut f = self.constant;
        for t in &self.terms {
            f += t.link.value(t.form.value(&gather(x, &t.support)));
        }
        f
    }

    /// Objective value and complex gradient `∂f/∂Re x + j ∂f/∂Im x`.
    pub fn objective_with_gradient(&self, x: &CVec) -> (f64, CVec) {
        let mut f = self.constant;
        let mut g = CVec::zeros(self.dim);
        for t in &self.terms {
            let xs = gather(x, &t.support);
            let q = t.form.value(&xs);
            f += t.link.value(q);
            let (d1, _) = t.link.derivatives(q);
            let gs = t.form.gradient(&xs);
            for (k, &i) in t.support.iter().enumerate() {
                g[i] += gs[k] * d1;
            }
        }
        (f, g)
    }

    pub fn constraint_value(&self, idx: usize, x: &CVec) -> f64 {
        let c = &self.constraints[idx];
        c.form.value(&gather(x, &c.support))
    }

    pub fn constraint_gradient(&self, idx: usize, x: &CVec) -> CVec {
        let c = &self.constraints[idx];
        let gs = c.form.gradient(&gather(x, &c.support));
        let mut g = CVec::zeros(self.dim);
        for (k, &i) in c.support.iter().enumerate() {
            g[i] += gs[k];
        }
        g
    }

    pub fn max_violation(&self, x: &CVec) -> f64 {
        (0..self.constraints.len()).map(|i| self.constraint_value(i, x)).fold(0.0f64, f64::max)
    }

    /// Human-readable structural dump for solver regression diffs.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "block = {:?}", self.block);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "constant = {:.17e}", self.constant);
        let _ = writeln!(s, "tau_bar = {:.17e}", self.expansion.tau);
        if let Some(p) = self.expansion.psi {
            let _ = writeln!(s, "psi_bar = {p:.17e}");
        }
        if let Some(r) = self.expansion.varrho {
            let _ = writeln!(s, "varrho_bar = {r:.17e}");
        }
        let _ = writeln!(s, "expansion_point = [{}]", fmt_cvec(&self.expansion.x));
        for (i, t) in self.terms.iter().enumerate() {
            let _ = writeln!(
                s,
                "term[{i}] link = {:?} support = {} |Pi|_F = {:.6e} |z| = {:.6e} q = {:.17e}",
                t.link,
                fmt_support(&t.support),
                t.form.pi.norm(),
                t.form.z.norm(),
                t.form.q
            );
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                s,
                "constraint[{i}] {} support = {} |Pi|_F = {:.6e} |z| = {:.6e} q = {:.17e}",
                c.label,
                fmt_support(&c.support),
                c.form.pi.norm(),
                c.form.z.norm(),
                c.form.q
            );
        }
        s
    }
}

fn fmt_cvec(x: &CVec) -> String {
    x.iter().map(|z: &C64| format!("{:.17e}{:+.17e}j", z.re, z.im)).collect::<Vec<_>>().join(", ")
}

fn fmt_support(s: &[usize]) -> String {
    let contiguous = s.windows(2).all(|w| w[1] == w[0] + 1);
    match (s.first(), s.last()) {
        (Some(a), Some(b)) if contiguous && s.len() > 2 => format!("{a}..={b}"),
        _ => format!("{s:?}"),
    }
}
