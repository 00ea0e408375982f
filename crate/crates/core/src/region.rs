//! Truncated regions of the domain, described in chart coordinates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{kernel_constant, rho, ChartBox, SiegelPoint};
use crate::special::factorial;

/// `{ rho_min <= rho(z) <= rho_max, |z'| <= zprime_radius, |Re z_n| <= re_zn_bound }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionFields")]
pub struct Region {
    pub n: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub zprime_radius: f64,
    pub re_zn_bound: f64,
}

#[derive(Deserialize)]
struct RegionFields {
    n: usize,
    rho_min: f64,
    rho_max: f64,
    #[serde(default = "one")]
    zprime_radius: f64,
    re_zn_bound: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RegionFields> for Region {
    type Error = Error;
    fn try_from(f: RegionFields) -> Result<Self> {
        Region::new(f.n, f.rho_min, f.rho_max, f.zprime_radius, f.re_zn_bound)
    }
}

impl Region {
    pub fn new(n: usize, rho_min: f64, rho_max: f64, zprime_radius: f64, re_zn_bound: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("region dimension must be at least 1".into()));
        }
        let finite = [rho_min, rho_max, zprime_radius, re_zn_bound]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(rho_min > 0.0) || !(rho_min < rho_max) {
            return Err(Error::InvalidArgument(format!(
                "region needs 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        if !(zprime_radius > 0.0) || !(re_zn_bound > 0.0) {
            return Err(Error::InvalidArgument("region bounds must be positive".into()));
        }
        Ok(Self {
            n,
            rho_min,
            rho_max,
            zprime_radius,
            re_zn_bound,
        })
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Smallest region containing every box.
    pub fn enclosing(n: usize, boxes: &[ChartBox]) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidArgument("no boxes to enclose".into()));
        }
        let rho_min = boxes.iter().map(|b| b.h.0).fold(f64::INFINITY, f64::min);
        let rho_max = boxes.iter().map(|b| b.h.1).fold(0.0, f64::max);
        let x = boxes.iter().map(|b| b.xn.0.abs().max(b.xn.1.abs())).fold(0.0, f64::max);
        let zp = boxes.iter().map(|b| b.zprime_max()).fold(0.0, f64::max);
        Region::new(n, rho_min, rho_max, zp.max(1e-3), x.max(1e-3))
    }

    /// Region around `z` spanning `rho(z) * [4^-levels, 4^levels]` in height,
    /// `|Re z_n| + rho(z) 4^levels` in `Re z_n` and `|z'| + sqrt(rho(z)) 2^levels` in `z'`.
    pub fn around(z: &SiegelPoint, levels: usize) -> Region {
        let r = rho(z);
        let f = 4f64.powi(levels as i32);
        let zp = z.zprime().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        Region {
            n: z.dim(),
            rho_min: r / f,
            rho_max: r * f,
            zprime_radius: zp + r.sqrt() * 2f64.powi(levels as i32),
            re_zn_bound: z.zn().re.abs() + r * f,
        }
    }

    pub fn contains(&self, z: &SiegelPoint) -> bool {
        if z.dim() != self.n {
            return false;
        }
        let h = rho(z);
        let zp: f64 = z.zprime().iter().map(|c| c.norm_sqr()).sum();
        h >= self.rho_min
            && h <= self.rho_max
            && zp <= self.zprime_radius * self.zprime_radius
            && z.zn().re.abs() <= self.re_zn_bound
    }

    /// Volume of the unit ball in `C^{n-1}` scaled to `zprime_radius`.
    fn zprime_volume(&self) -> f64 {
        let m = self.n - 1;
        PI.powi(m as i32) * self.zprime_radius.powi(2 * m as i32) / factorial(m)
    }

    /// Lebesgue volume.
    pub fn volume(&self) -> f64 {
        self.zprime_volume() * 2.0 * self.re_zn_bound * (self.rho_max - self.rho_min)
    }

    /// Invariant measure `lambda(region)`, in closed form.
    pub fn lambda_measure(&self) -> f64 {
        let n = self.n as i32;
        let h_part = (self.rho_min.powi(-n) - self.rho_max.powi(-n)) / n as f64;
        kernel_constant(self.n) * self.zprime_volume() * 2.0 * self.re_zn_bound * h_part
    }

    /// Region after `levels` rounds of outward growth: heights spread by 4 on
    /// both ends, `Re z_n` bound by 4, `z'` radius by 2 (a dilation by 2).
    pub fn expanded(&self, levels: usize) -> Region {
        let f = 4f64.powi(levels as i32);
        Region {
            n: self.n,
            rho_min: self.rho_min / f,
            rho_max: self.rho_max * f,
            zprime_radius: self.zprime_radius * 2f64.powi(levels as i32),
            re_zn_bound: self.re_zn_bound * f,
        }
    }

    /// A point drawn uniformly with respect to Lebesgue measure.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> SiegelPoint {
        let h = rng.random_range(self.rho_min..=self.rho_max);
        let x = rng.random_range(-self.re_zn_bound..=self.re_zn_bound);
        let zp = sample_in_ball(rng, self.n - 1, self.zprime_radius);
        chart_unchecked(&zp, x, h)
    }
}

/// Uniform point of the ball of radius `radius` in `C^m`, by rejection from the cube.
pub(crate) fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, m: usize, radius: f64) -> Vec<Complex64> {
    if m == 0 {
        return Vec::new();
    }
    loop {
        let v: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if sq <= 1.0 {
            return v.into_iter().map(|c| c * radius).collect();
        }
    }
}
