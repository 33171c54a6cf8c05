//! Channel synthesis from node geometry.
//!
//! Links touching the RIS or Bob's two arrays follow a near-field model that
//! uses the exact distance between every antenna/element pair: the Bob
//! self-interference matrix and the RIS→Eve vector are Rician with a
//! `r^{κ/2}` path loss, the two RIS legs are pure line-of-sight with free-space
//! `1/r` loss, and the Alice links are Rayleigh with a `r^{α/2}` loss.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

pub type Point = [f64; 3];

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Converts watts to dBm (`-inf` for zero power).
pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// `G(θ, φ) = 1` everywhere.
    IsotropicUnit,
    /// `G(θ, φ) = 2 cos θ` in front of the antenna (boresight +x), zero behind it.
    Cosine,
}

impl GainModel {
    fn gain(self, dir: &Direction) -> f64 {
        match self {
            GainModel::IsotropicUnit => 1.0,
            GainModel::Cosine => 2.0 * dir.theta.cos().max(0.0),
        }
    }
}

/// Relative position `(r, θ, φ)` of one node seen from another. `θ` is the polar
/// angle from the +x boresight and `φ` the azimuth around it.
#[derive(Debug, Clone, Copy)]
pub struct Direction {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn between(from: &Point, to: &Point) -> Self {
        let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let theta = if r > 0.0 { (d[0] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
        let phi = crate::linalg::wrap_phase(d[2].atan2(d[1]));
        Direction { r, theta, phi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub pos_alice: Point,
    pub pos_eve: Point,
    /// First transmit antenna of Bob; the array extends along +y.
    pub pos_bob_tx_first: Point,
    /// First receive antenna of Bob; the array extends along +y.
    pub pos_bob_rx_first: Point,
    /// First RIS element; the surface is a near-square grid in the x–z plane.
    pub pos_ris_first: Point,
    pub element_spacing: f64,
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            pos_alice: [10.0, -17.0, 1.5],
            pos_eve: [20.0, 0.0, 1.5],
            pos_bob_tx_first: [0.0, 0.0, 5.0],
            pos_bob_rx_first: [0.0, 0.1, 5.0],
            pos_ris_first: [0.2, 0.0, 5.0],
            element_spacing: 0.025,
            m: 4,
            n: 2,
            l: 36,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.l == 0 {
            return Err(Error::param("M/N/L", "antenna and element counts must be >= 1"));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::param("element_spacing", "must be > 0"));
        }
        let all = [
            self.pos_alice,
            self.pos_eve,
            self.pos_bob_tx_first,
            self.pos_bob_rx_first,
            self.pos_ris_first,
        ];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("positions", "coordinates must be finite"));
        }
        Ok(())
    }

    pub fn tx_antennas(&self) -> Vec<Point> {
        linear_array(&self.pos_bob_tx_first, self.m, self.element_spacing)
    }

    pub fn rx_antennas(&self) -> Vec<Point> {
        linear_array(&self.pos_bob_rx_first, self.n, self.element_spacing)
    }

    /// RIS element positions, row-major on a `⌈√L⌉`-column grid in the x–z plane.
    pub fn ris_elements(&self) -> Vec<Point> {
        let cols = (self.l as f64).sqrt().ceil() as usize;
        let o = self.pos_ris_first;
        let d = self.element_spacing;
        (0..self.l)
            .map(|l| [o[0] + (l % cols) as f64 * d, o[1], o[2] + (l / cols) as f64 * d])
            .collect()
    }
}

fn linear_array(first: &Point, count: usize, spacing: f64) -> Vec<Point> {
    (0..count)
        .map(|i| [first[0], first[1] + i as f64 * spacing, first[2]])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub wavelength: f64,
    pub rician_k: f64,
    pub rician_pathloss_exp: f64,
    pub rayleigh_pathloss_exp: f64,
    pub rayleigh_var: f64,
    pub gain_model: GainModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            wavelength: 0.05,
            rician_k: 3.0,
            rician_pathloss_exp: 2.5,
            rayleigh_pathloss_exp: 4.0,
            rayleigh_var: 1.0,
            gain_model: GainModel::IsotropicUnit,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::param("wavelength", "must be > 0"));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::param("rician_k", "must be >= 0"));
        }
        if !(2.0..=6.0).contains(&self.rician_pathloss_exp) {
            return Err(Error::param("rician_pathloss_exp", "must lie in [2, 6]"));
        }
        if !(2.0..=6.0).contains(&self.rayleigh_pathloss_exp) {
            return Err(Error::param("rayleigh_pathloss_exp", "must lie in [2, 6]"));
        }
        if !(self.rayleigh_var > 0.0) {
            return Err(Error::param("rayleigh_var", "must be > 0"));
        }
        Ok(())
    }
}

/// One channel realization. Row vectors (`h_ar`) are stored as column vectors
/// holding the row entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Bob transmit → Bob receive, `N×M`.
    pub h_tr: CMat,
    /// RIS → Bob receive, `L×N`.
    pub h_ir: CMat,
    /// Bob transmit → RIS, `L×M`.
    pub h_ti: CMat,
    /// RIS → Eve, length `L`.
    pub h_ie: CVec,
    /// Alice → Bob receive, `1×N` row.
    pub h_ar: CVec,
    /// Alice → Eve.
    pub h_ae: C64,
}

impl ChannelSet {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h_tr.ncols(), self.h_tr.nrows(), self.h_ti.nrows())
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n, l) = self.dims();
        let ok = self.h_ir.shape() == (l, n)
            && self.h_ti.shape() == (l, m)
            && self.h_ie.len() == l
            && self.h_ar.len() == n;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "channel set with M={m}, N={n}, L={l} has inconsistent shapes"
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let fin = |z: &C64| z.re.is_finite() && z.im.is_finite();
        self.h_tr.iter().all(fin)
            && self.h_ir.iter().all(fin)
            && self.h_ti.iter().all(fin)
            && self.h_ie.iter().all(fin)
            && self.h_ar.iter().all(fin)
            && fin(&self.h_ae)
    }

    /// Serializes to the portable text format read back by [`ChannelSet::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# starjam channel set v1\n");
        let h_ie = CMat::from_column_slice(self.h_ie.len(), 1, self.h_ie.as_slice());
        let h_ar = CMat::from_row_slice(1, self.h_ar.len(), self.h_ar.as_slice());
        let h_ae = CMat::from_element(1, 1, self.h_ae);
        for (name, m) in [
            ("H_tr", &self.h_tr),
            ("H_ir", &self.h_ir),
            ("H_ti", &self.h_ti),
            ("h_ie", &h_ie),
            ("h_ar", &h_ar),
            ("h_ae", &h_ae),
        ] {
            let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|j| format!("{:.17e} {:.17e}", m[(i, j)].re, m[(i, j)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut blocks: Vec<(String, CMat)> = Vec::new();
        while let Some((lineno, header)) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::ChannelParse { line: lineno, reason: "expected `name rows cols`".into() });
            }
            let parse_dim = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::ChannelParse { line: lineno, reason: format!("bad dimension: {e}") })
            };
            let (rows, cols) = (parse_dim(parts[1])?, parse_dim(parts[2])?);
            let mut m = CMat::zeros(rows, cols);
            for i in 0..rows {
                let (ln, row) = lines
                    .next()
                    .ok_or(Error::ChannelParse { line: lineno, reason: "truncated matrix".into() })?;
                let nums: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::ChannelParse { line: ln, reason: e.to_string() })?;
                if nums.len() != 2 * cols {
                    return Err(Error::ChannelParse {
                        line: ln,
                        reason: format!("expected {} numbers, found {}", 2 * cols, nums.len()),
                    });
                }
                for j in 0..cols {
                    m[(i, j)] = C64::new(nums[2 * j], nums[2 * j + 1]);
                }
            }
            blocks.push((parts[0].to_string(), m));
        }
        let take = |name: &str| {
            blocks
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m.clone())
                .ok_or(Error::ChannelParse { line: 0, reason: format!("missing block `{name}`") })
        };
        let h_ie = take("h_ie")?;
        let h_ar = take("h_ar")?;
        let set = ChannelSet {
            h_tr: take("H_tr")?,
            h_ir: take("H_ir")?,
            h_ti: take("H_ti")?,
            h_ie: CVec::from_column_slice(h_ie.as_slice()),
            h_ar: CVec::from_iterator(h_ar.len(), h_ar.transpose().iter().copied()),
            h_ae: take("h_ae")?[(0, 0)],
        };
        set.validate()?;
        Ok(set)
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(s * re, s * im)
}

fn distance(a: &Point, b: &Point, names: (&str, &str)) -> Result<Direction> {
    let d = Direction::between(a, b);
    if !(d.r > 0.0) {
        return Err(Error::CoLocated(names.0.into(), names.1.into()));
    }
    Ok(d)
}

/// Line-of-sight phase term `e^{-j 2π r / λ}`.
fn los(r: f64, wavelength: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * r / wavelength)
}

/// Draws one channel realization. Identical RNG state gives bit-identical output;
/// `H_ir` and `H_ti` do not consume randomness.
pub fn gen_channels<R: Rng + ?Sized>(geom: &Geometry, params: &ChannelParams, rng: &mut R) -> Result<ChannelSet> {
    geom.validate()?;
    params.validate()?;
    let lam = params.wavelength;
    let k = params.rician_k;
    let (w_los, w_nlos) = ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt());
    let half_kappa = params.rician_pathloss_exp / 2.0;
    let half_alpha = params.rayleigh_pathloss_exp / 2.0;
    let g = params.gain_model;

    let tx = geom.tx_antennas();
    let rx = geom.rx_antennas();
    let ris = geom.ris_elements();
    let (m, n, l) = (geom.m, geom.n, geom.l);

    // Links that do not depend on L are drawn first so that a seed yields the
    // same direct channels for every RIS size.
    let mut h_ar = CVec::zeros(n);
    for (ni, prx) in rx.iter().enumerate() {
        let d = distance(&geom.pos_alice, prx, ("alice", "bob_rx"))?;
        h_ar[ni] = complex_gaussian(rng, params.rayleigh_var) / d.r.powf(half_alpha);
    }
    let d_ae = distance(&geom.pos_alice, &geom.pos_eve, ("alice", "eve"))?;
    let h_ae = complex_gaussian(rng, params.rayleigh_var) / d_ae.r.powf(half_alpha);

    let mut h_tr = CMat::zeros(n, m);
    for (ni, prx) in rx.iter().enumerate() {
        for (mi, ptx) in tx.iter().enumerate() {
            let d_mn = distance(ptx, prx, ("bob_tx", "bob_rx"))?;
            let d_nm = Direction::between(prx, ptx);
            let amp = lam * (g.gain(&d_mn) * g.gain(&d_nm)).sqrt() / (4.0 * PI * d_mn.r.powf(half_kappa));
            let nlos = complex_gaussian(rng, 1.0);
            h_tr[(ni, mi)] = (los(d_mn.r, lam) * w_los + nlos * w_nlos) * amp;
        }
    }

    let mut h_ir = CMat::zeros(l, n);
    let mut h_ti = CMat::zeros(l, m);
    for (li, pe) in ris.iter().enumerate() {
        for (ni, prx) in rx.iter().enumerate() {
            let d = distance(prx, pe, ("bob_rx", "ris"))?;
            h_ir[(li, ni)] = los(d.r, lam) * (lam * g.gain(&d).sqrt() / (4.0 * PI * d.r));
        }
        for (mi, ptx) in tx.iter().enumerate() {
            let d = distance(ptx, pe, ("bob_tx", "ris"))?;
            h_ti[(li, mi)] = los(d.r, lam) * (lam * g.gain(&d).sqrt() / (4.0 * PI * d.r));
        }
    }

    let mut h_ie = CVec::zeros(l);
    for (li, pe) in ris.iter().enumerate() {
        let d = distance(pe, &geom.pos_eve, ("ris", "eve"))?;
        let amp = lam / (4.0 * PI * d.r.powf(half_kappa));
        let nlos = complex_gaussian(rng, 1.0);
        h_ie[li] = (los(d.r, lam) * w_los + nlos * w_nlos) * amp;
    }

    Ok(ChannelSet { h_tr, h_ir, h_ti, h_ie, h_ar, h_ae })
}

/// Rayleigh channel from Bob's transmit array straight to Eve (`1×M` row), used
/// only by the conventional-cancellation reference scheme.
pub fn gen_direct_bob_eve<R: Rng + ?Sized>(geom: &Geometry, params: &ChannelParams, rng: &mut R) -> Result<CVec> {
    geom.validate()?;
    params.validate()?;
    let half_alpha = params.rayleigh_pathloss_exp / 2.0;
    let mut h = CVec::zeros(geom.m);
    for (mi, ptx) in geom.tx_antennas().iter().enumerate() {
        let d = distance(ptx, &geom.pos_eve, ("bob_tx", "eve"))?;
        h[mi] = complex_gaussian(rng, params.rayleigh_var) / d.r.powf(half_alpha);
    }
    Ok(h)
}

/// Variance of the per-element estimation error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiErrorVariance {
    /// `|[h_ie]_l|`
    #[default]
    Magnitude,
    /// `|[h_ie]_l|²`
    Power,
}

/// Estimated RIS→Eve channel `√(1-ε) h + √ε h̃`.
pub fn perturb_csi<R: Rng + ?Sized>(h_ie: &CVec, eps: f64, model: CsiErrorVariance, rng: &mut R) -> Result<CVec> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::param("eps", format!("must lie in [0, 1], got {eps}")));
    }
    let (a, b) = ((1.0 - eps).sqrt(), eps.sqrt());
    Ok(h_ie.map(|h| {
        let var = match model {
            CsiErrorVariance::Magnitude => h.norm(),
            CsiErrorVariance::Power => h.norm_sqr(),
        };
        h * a + complex_gaussian(rng, var) * b
    }))
}
