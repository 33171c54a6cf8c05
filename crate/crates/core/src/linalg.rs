//! Complex matrix aliases and small helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const LN2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let p = phase.rem_euclid(two_pi);
    if p >= two_pi {
        0.0
    } else {
        p
    }
}

/// Plain (non-conjugating) product of a row vector stored as a column and a vector.
#[inline]
pub fn row_dot(row: &CVec, v: &CVec) -> C64 {
    row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry of `|A - A^H|`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    if a.ncols() != n {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// `diag(d)` as a dense matrix.
pub fn diag(d: &CVec) -> CMat {
    CMat::from_diagonal(d)
}

/// Outer product `x y^H`.
pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}
