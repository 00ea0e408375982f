//! Monte Carlo estimates used as independent checks of closed forms.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{ball_chart_bounds, invariant_density, metric_unchecked, SiegelPoint};
use crate::region::{sample_in_ball, Region};
use crate::special::factorial;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    /// One standard deviation of `value`.
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_sums(box_volume: f64, sum: f64, sum_sq: f64, samples: usize) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        McEstimate {
            value: box_volume * mean,
            std_error: box_volume * (var / n).sqrt(),
            samples,
        }
    }
}

fn ball_volume_cn(m: usize, radius: f64) -> f64 {
    std::f64::consts::PI.powi(m as i32) * radius.powi(2 * m as i32) / factorial(m)
}

/// Height drawn from the density proportional to `h^-k` on `[a, b]`, with
/// the normalizer `integral_a^b h^-k dh`.
fn sample_height<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, k: i32) -> (f64, f64) {
    let u: f64 = rng.random();
    match k {
        0 => (a + u * (b - a), b - a),
        1 => (a * (b / a).powf(u), (b / a).ln()),
        _ => {
            let e = 1.0 - k as f64;
            let (ae, be) = (a.powf(e), b.powf(e));
            ((ae + u * (be - ae)).powf(1.0 / e), (be - ae) / e)
        }
    }
}

/// `integral_{D(z,r)} weight dV` by rejection sampling in the chart box
/// that encloses the ball, with heights drawn from the density `~ h^-k`.
/// `weight` receives the point and its height.
fn ball_integral<R, F>(z: &SiegelPoint, r: f64, samples: usize, rng: &mut R, k: i32, weight: F) -> Result<McEstimate>
where
    R: Rng + ?Sized,
    F: Fn(&SiegelPoint, f64) -> f64,
{
    if !(r > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument("need r > 0 and at least one sample".into()));
    }
    let b = ball_chart_bounds(z, r);
    let m = z.dim() - 1;
    let (_, h_norm) = sample_height(rng, b.h.0, b.h.1, k);
    let box_volume = h_norm * (b.xn.1 - b.xn.0) * ball_volume_cn(m, b.zprime_radius);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (h, _) = sample_height(rng, b.h.0, b.h.1, k);
        let x = rng.random_range(b.xn.0..b.xn.1);
        let mut zp = sample_in_ball(rng, m, b.zprime_radius);
        for (c, o) in zp.iter_mut().zip(&b.zprime_center) {
            *c += o;
        }
        let w = chart_unchecked(&zp, x, h);
        if metric_unchecked(z, &w) < r {
            let v = weight(&w, h) * h.powi(k);
            sum += v;
            sum_sq += v * v;
        }
    }
    Ok(McEstimate::from_sums(box_volume, sum, sum_sq, samples))
}

/// Lebesgue volume of `D(z, r)`.
pub fn mc_ball_volume<R: Rng + ?Sized>(z: &SiegelPoint, r: f64, samples: usize, rng: &mut R) -> Result<McEstimate> {
    ball_integral(z, r, samples, rng, 0, |_, _| 1.0)
}

/// Invariant measure `lambda(D(z, r))`. Heights are drawn from the density
/// `~ h^-(n+1)`, which makes the weight constant on the ball.
pub fn mc_ball_lambda<R: Rng + ?Sized>(z: &SiegelPoint, r: f64, samples: usize, rng: &mut R) -> Result<McEstimate> {
    ball_integral(z, r, samples, rng, z.dim() as i32 + 1, |w, _| invariant_density(w))
}

/// Lebesgue volume of a region, sampled in ambient coordinates
/// `(z', Im z_n)` without using the chart; `Re z_n` factors out.
pub fn mc_region_volume<R: Rng + ?Sized>(region: &Region, samples: usize, rng: &mut R) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let m = region.n - 1;
    let rad = region.zprime_radius;
    let y_max = region.rho_max + rad * rad;
    let box_volume = (2.0 * rad).powi(2 * m as i32) * 2.0 * region.re_zn_bound * (y_max - region.rho_min);
    let mut hits = 0.0;
    for _ in 0..samples {
        let zp: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.random_range(-rad..rad), rng.random_range(-rad..rad)))
            .collect();
        let y = rng.random_range(region.rho_min..y_max);
        let zp_sq: f64 = zp.iter().map(|c| c.norm_sqr()).sum();
        let h = y - zp_sq;
        if zp_sq <= rad * rad && h >= region.rho_min && h <= region.rho_max {
            hits += 1.0;
        }
    }
    Ok(McEstimate::from_sums(box_volume, hits, hits, samples))
}
