//! Global coordinate chart `(z', Re z_n, h) -> (z', Re z_n + i(h + |z'|^2))`.
//!
//! In these coordinates `rho(z) = h` and the Lebesgue volume element is
//! `dV = dx' dy' dx_n dh`: the map is a shear in `Im z_n`, so the Jacobian is
//! unit lower triangular.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rho, SiegelPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCoords {
    /// `z' = x' + i y'`.
    pub zprime: Vec<Complex64>,
    /// `x_n = Re z_n`.
    pub xn: f64,
    /// Height above the boundary, `h = rho(z)`.
    pub h: f64,
}

pub fn chart(c: &ChartCoords) -> Result<SiegelPoint> {
    if !(c.h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chart height must be positive, got {}",
            c.h
        )));
    }
    let zp_sq: f64 = c.zprime.iter().map(|v| v.norm_sqr()).sum();
    SiegelPoint::from_parts(&c.zprime, Complex64::new(c.xn, c.h + zp_sq))
}

#[inline]
pub(crate) fn chart_unchecked(zprime: &[Complex64], xn: f64, h: f64) -> SiegelPoint {
    let zp_sq: f64 = zprime.iter().map(|v| v.norm_sqr()).sum();
    let mut coords = Vec::with_capacity(zprime.len() + 1);
    coords.extend_from_slice(zprime);
    coords.push(Complex64::new(xn, h + zp_sq));
    SiegelPoint::from_coords_unchecked(coords)
}

pub fn chart_inverse(z: &SiegelPoint) -> ChartCoords {
    ChartCoords {
        zprime: z.zprime().to_vec(),
        xn: z.zn().re,
        h: rho(z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn base_point_in_chart() {
        let z = chart(&ChartCoords {
            zprime: vec![],
            xn: 0.0,
            h: 1.0,
        })
        .unwrap();
        assert_eq!(z, SiegelPoint::base(1));
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..100 {
                let c = ChartCoords {
                    zprime: (0..n - 1)
                        .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                        .collect(),
                    xn: rng.random_range(-5.0..5.0),
                    h: rng.random_range(0.01..4.0),
                };
                let back = chart_inverse(&chart(&c).unwrap());
                assert!((back.h - c.h).abs() < 1e-14 * (1.0 + c.h.abs()) * 10.0);
                assert_eq!(back.xn, c.xn);
                assert_eq!(back.zprime, c.zprime);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_height() {
        assert!(chart(&ChartCoords {
            zprime: vec![],
            xn: 0.0,
            h: 0.0
        })
        .is_err());
    }
}
