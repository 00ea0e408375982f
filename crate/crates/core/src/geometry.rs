//! Closed-form geometry of the Siegel upper half-space
//! `U = { z in C^n : Im z_n > |z'|^2 }`.
//!
//! Everything here is a pure function of coordinates. The central object is
//! the sesquilinear form `rho(z, w) = (i/2)(conj(w_n) - z_n) - z' . conj(w')`,
//! from which the Bergman kernel, the Bergman metric and the ball volumes
//! are built.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::factorial;

/// Points with `rho(z)` at or below this height are rejected on construction.
pub const MIN_HEIGHT: f64 = 1e-14;

/// Rounding slack allowed on the Bergman-metric radicand before it is
/// treated as an inconsistency instead of being clamped.
pub const RADICAND_SLACK: f64 = 1e-12;

/// A point of the Siegel upper half-space. The last coordinate is `z_n`,
/// the first `n - 1` coordinates form `z'`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SiegelPoint {
    coords: Vec<Complex64>,
}

impl SiegelPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("a point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let h = height(&coords);
        if !(h > MIN_HEIGHT) {
            return Err(Error::OutsideDomain { rho: h });
        }
        Ok(Self { coords })
    }

    /// Builds a point from `z'` and `z_n`.
    pub fn from_parts(zprime: &[Complex64], zn: Complex64) -> Result<Self> {
        let mut coords = zprime.to_vec();
        coords.push(zn);
        Self::new(coords)
    }

    /// The distinguished point `(0', i)`.
    pub fn base(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let mut coords = vec![Complex64::new(0.0, 0.0); n];
        coords[n - 1] = Complex64::new(0.0, 1.0);
        Self { coords }
    }

    /// Skips the membership check. Used for images of automorphisms, which
    /// lie in the domain exactly even when rounding puts them on its edge.
    pub(crate) fn from_coords_unchecked(coords: Vec<Complex64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn zprime(&self) -> &[Complex64] {
        &self.coords[..self.coords.len() - 1]
    }

    pub fn zn(&self) -> Complex64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.coords.iter().map(|c| [c.re, c.im]).collect()
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

impl TryFrom<Vec<[f64; 2]>> for SiegelPoint {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<SiegelPoint> for Vec<[f64; 2]> {
    fn from(p: SiegelPoint) -> Self {
        p.to_pairs()
    }
}

impl fmt::Debug for SiegelPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_pairs()).finish()
    }
}

/// Complex dimension of the ambient space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct DomainParams {
    n: usize,
}

impl DomainParams {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension n must be at least 1".into()));
        }
        Ok(Self { n })
    }

    pub fn n(self) -> usize {
        self.n
    }

    /// `n! / (4 pi^n)`, the constant in front of the Bergman kernel.
    pub fn kernel_constant(self) -> f64 {
        kernel_constant(self.n)
    }
}

impl TryFrom<usize> for DomainParams {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<DomainParams> for usize {
    fn from(p: DomainParams) -> usize {
        p.n
    }
}

pub fn kernel_constant(n: usize) -> f64 {
    factorial(n) / (4.0 * PI.powi(n as i32))
}

fn height(c: &[Complex64]) -> f64 {
    let (zn, zp) = c.split_last().expect("non-empty");
    zn.im - zp.iter().map(|x| x.norm_sqr()).sum::<f64>()
}

fn check_dims(z: &SiegelPoint, w: &SiegelPoint) -> Result<()> {
    if z.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            found: w.dim(),
        });
    }
    Ok(())
}

/// `rho(z, w)` on raw coordinate slices of equal length.
pub fn rho_form_raw(z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
    if z.len() != w.len() || z.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: w.len(),
        });
    }
    Ok(rho_pair(z, w))
}

#[inline]
pub(crate) fn rho_pair(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let n = z.len();
    let i_half = Complex64::new(0.0, 0.5);
    let mut acc = i_half * (w[n - 1].conj() - z[n - 1]);
    for k in 0..n - 1 {
        acc -= z[k] * w[k].conj();
    }
    acc
}

pub fn rho_form(z: &SiegelPoint, w: &SiegelPoint) -> Result<Complex64> {
    check_dims(z, w)?;
    Ok(rho_pair(&z.coords, &w.coords))
}

/// `rho(z) = Im z_n - |z'|^2`, the height of `z` above the boundary.
pub fn rho(z: &SiegelPoint) -> f64 {
    height(&z.coords)
}

#[inline]
pub(crate) fn kernel_unchecked(z: &SiegelPoint, w: &SiegelPoint) -> Complex64 {
    let n = z.dim();
    // Principal branch: Re rho(z, w) >= (rho(z) + rho(w)) / 2 > 0.
    kernel_constant(n) * rho_pair(&z.coords, &w.coords).powi(-(n as i32 + 1))
}

/// `|K(z, w)|^2` scaled to the normalized kernel: `|k_z(w)|^2`.
#[inline]
pub(crate) fn normalized_kernel_sq_unchecked(z: &SiegelPoint, w: &SiegelPoint) -> f64 {
    let n = z.dim() as i32;
    let rz = rho(z);
    let m = rho_pair(&z.coords, &w.coords).norm_sqr();
    kernel_constant(z.dim()) * rz.powi(n + 1) / m.powi(n + 1)
}

pub fn bergman_kernel(z: &SiegelPoint, w: &SiegelPoint) -> Result<Complex64> {
    check_dims(z, w)?;
    Ok(kernel_unchecked(z, w))
}

/// `k_z(w) = K(z, w) / sqrt(K(z, z))`.
pub fn normalized_kernel(z: &SiegelPoint, w: &SiegelPoint) -> Result<Complex64> {
    check_dims(z, w)?;
    Ok(kernel_unchecked(z, w) / invariant_density(z).sqrt())
}

/// `|k_z(w)|^2`.
pub fn normalized_kernel_sq(z: &SiegelPoint, w: &SiegelPoint) -> Result<f64> {
    check_dims(z, w)?;
    Ok(normalized_kernel_sq_unchecked(z, w))
}

/// `K(z, z)`, the density of the invariant measure with respect to volume.
pub fn invariant_density(z: &SiegelPoint) -> f64 {
    kernel_constant(z.dim()) * rho(z).powi(-(z.dim() as i32 + 1))
}

/// Squared pseudo-distance `tanh^2 beta(z, w) = 1 - rho(z) rho(w) / |rho(z, w)|^2`.
///
/// The numerator `|rho(z,w)|^2 - rho(z) rho(w)` is evaluated as
/// `(|d_n - 2i d'.conj(z')|^2 + 4 rho(z) |d'|^2) / 4` with `d = w - z`, which
/// carries no cancellation for nearby points.
pub fn metric_radicand(z: &SiegelPoint, w: &SiegelPoint) -> Result<f64> {
    check_dims(z, w)?;
    Ok(radicand_unchecked(z, w))
}

#[inline]
pub(crate) fn radicand_unchecked(z: &SiegelPoint, w: &SiegelPoint) -> f64 {
    radicand_pair(z, w).0
}

/// `(tanh^2 beta, 1 - tanh^2 beta)`, each evaluated without cancellation.
#[inline]
fn radicand_pair(z: &SiegelPoint, w: &SiegelPoint) -> (f64, f64) {
    let n = z.dim();
    let zc = &z.coords;
    let wc = &w.coords;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut dprime_sq = 0.0;
    for k in 0..n - 1 {
        let d = wc[k] - zc[k];
        cross += d * zc[k].conj();
        dprime_sq += d.norm_sqr();
    }
    let dn = wc[n - 1] - zc[n - 1];
    let shifted = dn - Complex64::new(0.0, 2.0) * cross;
    let rz = rho(z);
    let num = shifted.norm_sqr() + 4.0 * rz * dprime_sq;
    let pair_sq = rho_pair(zc, wc).norm_sqr();
    (num / (4.0 * pair_sq), rz * rho(w) / pair_sq)
}

/// The Bergman metric `beta(z, w) = artanh sqrt(1 - rho(z) rho(w) / |rho(z, w)|^2)`.
pub fn bergman_metric(z: &SiegelPoint, w: &SiegelPoint) -> Result<f64> {
    check_dims(z, w)?;
    let (rad, co) = radicand_pair(z, w);
    if !(-RADICAND_SLACK..=1.0 + RADICAND_SLACK).contains(&rad) {
        return Err(Error::Consistency(format!(
            "Bergman metric radicand {rad:e} outside [0, 1]"
        )));
    }
    Ok(metric_from_parts(rad, co))
}

/// `artanh sqrt(rad) = ln(1 + sqrt(rad)) - ln(1 - rad) / 2`, with `co = 1 - rad`.
#[inline]
fn metric_from_parts(rad: f64, co: f64) -> f64 {
    let rad = rad.clamp(0.0, 1.0);
    if co <= 0.0 {
        return f64::INFINITY;
    }
    rad.sqrt().ln_1p() - 0.5 * co.ln()
}

#[inline]
pub(crate) fn metric_unchecked(z: &SiegelPoint, w: &SiegelPoint) -> f64 {
    let (rad, co) = radicand_pair(z, w);
    metric_from_parts(rad, co)
}

/// Nonisotropic dilation `delta_t(u) = (t u', t^2 u_n)`.
pub fn dilate(t: f64, u: &SiegelPoint) -> Result<SiegelPoint> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dilation factor must be positive, got {t}"
        )));
    }
    Ok(dilate_unchecked(t, u))
}

pub(crate) fn dilate_unchecked(t: f64, u: &SiegelPoint) -> SiegelPoint {
    let n = u.dim();
    let mut c = u.coords.clone();
    for x in &mut c[..n - 1] {
        *x *= t;
    }
    c[n - 1] *= t * t;
    SiegelPoint::from_coords_unchecked(c)
}

/// Heisenberg translation `h_z`, which maps `z` to `(0', i rho(z))`.
pub fn translate(z: &SiegelPoint, u: &SiegelPoint) -> Result<SiegelPoint> {
    check_dims(z, u)?;
    Ok(translate_unchecked(z, u))
}

fn translate_unchecked(z: &SiegelPoint, u: &SiegelPoint) -> SiegelPoint {
    let n = z.dim();
    let (zn, zp) = z.coords.split_last().unwrap();
    let (un, up) = u.coords.split_last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut cross = Complex64::new(0.0, 0.0);
    let mut zp_sq = 0.0;
    for k in 0..n - 1 {
        out.push(up[k] - zp[k]);
        cross += up[k] * zp[k].conj();
        zp_sq += zp[k].norm_sqr();
    }
    let i = Complex64::new(0.0, 1.0);
    out.push(un - zn.re - 2.0 * i * cross + i * zp_sq);
    SiegelPoint::from_coords_unchecked(out)
}

/// Inverse of [`translate`].
pub fn inverse_translate(z: &SiegelPoint, v: &SiegelPoint) -> Result<SiegelPoint> {
    check_dims(z, v)?;
    Ok(inverse_translate_unchecked(z, v))
}

fn inverse_translate_unchecked(z: &SiegelPoint, v: &SiegelPoint) -> SiegelPoint {
    let n = z.dim();
    let (zn, zp) = z.coords.split_last().unwrap();
    let (vn, vp) = v.coords.split_last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut cross = Complex64::new(0.0, 0.0);
    let mut zp_sq = 0.0;
    for k in 0..n - 1 {
        out.push(vp[k] + zp[k]);
        cross += vp[k] * zp[k].conj();
        zp_sq += zp[k].norm_sqr();
    }
    let i = Complex64::new(0.0, 1.0);
    out.push(vn + zn.re + 2.0 * i * cross + i * zp_sq);
    SiegelPoint::from_coords_unchecked(out)
}

/// `sigma_z = delta_{rho(z)^{-1/2}} . h_z`; sends `z` to the base point.
pub fn automorphism(z: &SiegelPoint, u: &SiegelPoint) -> Result<SiegelPoint> {
    check_dims(z, u)?;
    Ok(automorphism_unchecked(z, u))
}

pub(crate) fn automorphism_unchecked(z: &SiegelPoint, u: &SiegelPoint) -> SiegelPoint {
    dilate_unchecked(rho(z).powf(-0.5), &translate_unchecked(z, u))
}

/// `sigma_z^{-1} = h_z^{-1} . delta_{rho(z)^{1/2}}`.
pub fn inverse_automorphism(z: &SiegelPoint, u: &SiegelPoint) -> Result<SiegelPoint> {
    check_dims(z, u)?;
    Ok(inverse_automorphism_unchecked(z, u))
}

pub(crate) fn inverse_automorphism_unchecked(z: &SiegelPoint, u: &SiegelPoint) -> SiegelPoint {
    inverse_translate_unchecked(z, &dilate_unchecked(rho(z).sqrt(), u))
}

/// Lebesgue volume of the Bergman ball `D(z, r)`:
/// `(4 pi^n / n!) tanh^{2n} r / (1 - tanh^2 r)^{n+1} rho(z)^{n+1}`.
pub fn ball_volume(z: &SiegelPoint, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    Ok(unit_ball_volume(z.dim(), r) * rho(z).powi(z.dim() as i32 + 1))
}

/// `|D(i, r)|`. Written as `sinh^{2n} r cosh^2 r` to stay finite for large `r`.
pub fn unit_ball_volume(n: usize, r: f64) -> f64 {
    let (s, c) = (r.sinh(), r.cosh());
    s.powi(2 * n as i32) * c * c / kernel_constant(n)
}

/// Axis-aligned bounds, in chart coordinates, of a set in the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartBox {
    /// Range of the height `rho(w)`.
    pub h: (f64, f64),
    /// Range of `Re w_n`.
    pub xn: (f64, f64),
    /// `w'` lies in the ball of this radius around `zprime_center`.
    pub zprime_center: Vec<Complex64>,
    pub zprime_radius: f64,
}

impl ChartBox {
    /// Upper bound for `|w'|` over the box.
    pub fn zprime_max(&self) -> f64 {
        self.zprime_center.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() + self.zprime_radius
    }
}

/// A box in chart coordinates `(z', Re z_n, rho)` containing `D(z, r)`.
///
/// Over `D(z, r)` the height satisfies `e^{-2r} <= rho(w)/rho(z) <= e^{2r}`,
/// `|w' - z'| <= sinh(r) sqrt(rho(z))`, and
/// `|Re w_n - Re z_n| <= rho(z) sinh(2r) + 2 sinh(r) sqrt(rho(z)) |z'|`.
pub fn ball_chart_bounds(z: &SiegelPoint, r: f64) -> ChartBox {
    let rz = rho(z);
    let s = r.sinh();
    let zp_norm = z.zprime().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let dx = rz * (2.0 * r).sinh() + 2.0 * s * rz.sqrt() * zp_norm;
    let xc = z.zn().re;
    ChartBox {
        h: (rz * (-2.0 * r).exp(), rz * (2.0 * r).exp()),
        xn: (xc - dx, xc + dx),
        zprime_center: z.zprime().to_vec(),
        zprime_radius: s * rz.sqrt(),
    }
}
