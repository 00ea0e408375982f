//! Averaging functions, Berezin transforms, `L^p(dlambda)` norms, lattice
//! sums and the closed-form integral of `rho(w)^t / |rho(z,w)|^s`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    ball_volume, invariant_density, metric_unchecked, normalized_kernel_sq_unchecked, rho, rho_pair, unit_ball_volume,
    SiegelPoint,
};
use crate::lattice::Lattice;
use crate::measures::{AtomicMeasure, DensityMeasure, Measure};
use crate::quadrature::{
    extrapolate_tail, refine_until_converged, BallEstimate, BallIntegrator, ChartRule, GridPlan, QuadratureSpec,
};
use crate::region::Region;
use crate::special::gamma;

/// `mu(D(z,r)) / |D(z,r)|`.
pub fn averaging_function(mu: &Measure, z: &SiegelPoint, r: f64) -> Result<f64> {
    let mass = mu.ball_mass(z, r)?;
    Ok(mass / ball_volume(z, r)?)
}

fn averaging_atomic(mu: &AtomicMeasure, z: &SiegelPoint, r: f64, unit_volume: f64) -> f64 {
    let mass: f64 = mu
        .atoms()
        .iter()
        .filter(|a| metric_unchecked(z, &a.point) < r)
        .map(|a| a.weight)
        .sum();
    if mass == 0.0 {
        0.0
    } else {
        mass / (unit_volume * rho(z).powi(mu.n() as i32 + 1))
    }
}

/// Constant `C(r, n)` with `mu_hat_r <= C(r, n) mu_tilde` pointwise:
/// `(1 - T^2)^{n+1} / T^{2n} * ((1 + T) / (1 - T))^{2(n+1)}`, `T = tanh r`.
pub fn averaging_to_berezin_constant(n: usize, r: f64) -> f64 {
    let t = r.tanh();
    let m = n as i32 + 1;
    (1.0 - t * t).powi(m) / t.powi(2 * n as i32) * ((1.0 + t) / (1.0 - t)).powi(2 * m)
}

/// `integral |k_z(w)|^2 dmu(w)`. Density measures are integrated over
/// their support with default quadrature settings.
pub fn berezin_transform(mu: &Measure, z: &SiegelPoint) -> Result<f64> {
    match mu {
        Measure::Atomic(m) => berezin_atomic(m, z),
        Measure::Density(d) => berezin_density(d, z, &QuadratureSpec::new(d.support.clone())),
    }
}

pub fn berezin_atomic(mu: &AtomicMeasure, z: &SiegelPoint) -> Result<f64> {
    if z.dim() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: z.dim(),
        });
    }
    Ok(berezin_atomic_unchecked(mu, z))
}

fn berezin_atomic_unchecked(mu: &AtomicMeasure, z: &SiegelPoint) -> f64 {
    mu.atoms()
        .iter()
        .map(|a| a.weight * normalized_kernel_sq_unchecked(z, &a.point))
        .sum()
}

/// Berezin transform of a density with quadrature parameters from `spec`
/// (its region is replaced by the support).
pub fn berezin_density(mu: &DensityMeasure, z: &SiegelPoint, spec: &QuadratureSpec) -> Result<f64> {
    if z.dim() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: z.dim(),
        });
    }
    let mut foci = mu.foci();
    foci.push(z.clone());
    let (shells, _) = refine_until_converged(spec, |order, sphere_order| {
        ChartRule::plan(&GridPlan {
            region: &mu.support,
            levels: 0,
            foci: &foci,
            order,
            sphere_order,
            panel_ratio: spec.panel_ratio,
        })
        .integrate(|w| mu.density_at(w) * normalized_kernel_sq_unchecked(z, w))
    })?;
    Ok(shells.iter().sum())
}

/// A nonnegative function on the domain, with the points near which it
/// varies fastest (used to grade quadrature panels).
#[derive(Clone)]
pub struct ScalarField {
    pub label: String,
    pub foci: Vec<SiegelPoint>,
    eval: Arc<dyn Fn(&SiegelPoint) -> f64 + Send + Sync>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("foci", &self.foci.len())
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(label: impl Into<String>, foci: Vec<SiegelPoint>, eval: F) -> Self
    where
        F: Fn(&SiegelPoint) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            label: label.into(),
            foci,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::new(format!("constant {c}"), Vec::new(), move |_| c)
    }

    /// `mu_tilde`.
    pub fn berezin(mu: &AtomicMeasure) -> Self {
        let m = mu.clone();
        ScalarField::new("berezin", mu.points(), move |z| berezin_atomic_unchecked(&m, z))
    }

    /// `mu_hat_r`.
    pub fn averaging(mu: &AtomicMeasure, r: f64) -> Self {
        let m = mu.clone();
        let unit = unit_ball_volume(mu.n(), r);
        ScalarField::new(format!("averaging r={r}"), mu.points(), move |z| {
            averaging_atomic(&m, z, r, unit)
        })
    }

    pub fn eval(&self, z: &SiegelPoint) -> f64 {
        (self.eval)(z)
    }
}

/// Result of an `L^p(dlambda)` computation over a truncated region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpEstimate {
    pub p: f64,
    /// `(integral F^p dlambda)^{1/p}`, tail included when available.
    pub norm: f64,
    /// `integral F^p dlambda`, tail included when available.
    pub integral: f64,
    /// `integral F^p dlambda` over the level-0 region only.
    pub truncated: f64,
    /// Relative change between the last two refinement steps.
    pub error_estimate: f64,
    /// Extrapolated contribution outside the level-0 region.
    pub tail_estimate: Option<f64>,
    pub region: Region,
}

/// `(integral_region F^p K(z,z) dV)^{1/p}` with `spec.tail_levels`
/// outward expansions feeding the tail estimate.
pub fn lp_lambda_norm(field: &ScalarField, p: f64, spec: &QuadratureSpec) -> Result<LpEstimate> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let (shells, change) = refine_until_converged(spec, |order, sphere_order| {
        ChartRule::plan(&GridPlan {
            region: &spec.region,
            levels: spec.tail_levels,
            foci: &field.foci,
            order,
            sphere_order,
            panel_ratio: spec.panel_ratio,
        })
        .integrate(|z| {
            let v = field.eval(z);
            if v <= 0.0 {
                0.0
            } else {
                v.powf(p) * invariant_density(z)
            }
        })
    })?;
    let cumulative: Vec<f64> = shells
        .iter()
        .scan(0.0, |s, x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let tail = extrapolate_tail(&cumulative);
    Ok(LpEstimate {
        p,
        norm: tail.total.max(0.0).powf(1.0 / p),
        integral: tail.total,
        truncated: tail.truncated,
        error_estimate: change,
        tail_estimate: tail.tail_estimate,
        region: spec.region.clone(),
    })
}

/// `sum_k mu_hat_r(a_k)^p` with `r` the lattice radius.
pub fn lattice_power_sum(mu: &Measure, lat: &Lattice, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if mu.n() != lat.region.n {
        return Err(Error::DimensionMismatch {
            expected: lat.region.n,
            found: mu.n(),
        });
    }
    let r = lat.r;
    let mut sum = 0.0;
    match mu {
        Measure::Atomic(m) => {
            let unit = unit_ball_volume(m.n(), r);
            for a in &lat.points {
                let v = averaging_atomic(m, a, r, unit);
                if v > 0.0 {
                    sum += v.powf(p);
                }
            }
        }
        Measure::Density(_) => {
            for a in &lat.points {
                let v = averaging_function(mu, a, r)?;
                if v > 0.0 {
                    sum += v.powf(p);
                }
            }
        }
    }
    Ok(sum)
}

/// `(sum_k mu_hat_r(a_k)^p)^{1/p}`.
pub fn lattice_lp_sum(mu: &Measure, lat: &Lattice, p: f64) -> Result<f64> {
    Ok(lattice_power_sum(mu, lat, p)?.powf(1.0 / p))
}

/// `integral mu_hat_r^p dlambda` for an atomic measure. The support of
/// `mu_hat_r` is the union of the balls `D(w_j, r)`; each ball is integrated
/// with weight `1 / N(z)`, `N(z)` the number of balls containing `z`.
pub fn averaging_power_integral(mu: &AtomicMeasure, r: f64, p: f64, integ: &BallIntegrator) -> Result<BallEstimate> {
    if integ.n() != mu.n() || (integ.r() - r).abs() > 0.0 {
        return Err(Error::InvalidArgument(
            "ball integrator does not match the measure and radius".into(),
        ));
    }
    let unit = unit_ball_volume(mu.n(), r);
    let mut total = BallEstimate {
        value: 0.0,
        error_estimate: 0.0,
    };
    for a in mu.atoms() {
        let est = integ.estimate(&a.point, |z| {
            let mut mass = 0.0;
            let mut count = 0usize;
            for b in mu.atoms() {
                if metric_unchecked(z, &b.point) < r {
                    mass += b.weight;
                    count += 1;
                }
            }
            if count == 0 {
                return 0.0;
            }
            let avg = mass / (unit * rho(z).powi(mu.n() as i32 + 1));
            avg.powf(p) * invariant_density(z) / count as f64
        });
        total.value += est.value;
        total.error_estimate += est.error_estimate;
    }
    Ok(total)
}

/// Berezin transform at `a` of the measure `mu_hat_r dV`:
/// `sum_j c_j integral_{D(w_j, r)} |k_a(w)|^2 / |D(w, r)| dV(w)`.
pub fn averaged_berezin(mu: &AtomicMeasure, a: &SiegelPoint, integ: &BallIntegrator) -> Result<BallEstimate> {
    if a.dim() != mu.n() || integ.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: a.dim(),
        });
    }
    let unit = unit_ball_volume(mu.n(), integ.r());
    let m = mu.n() as i32 + 1;
    let mut total = BallEstimate {
        value: 0.0,
        error_estimate: 0.0,
    };
    for atom in mu.atoms() {
        let est = integ.estimate(&atom.point, |w| {
            normalized_kernel_sq_unchecked(a, w) / (unit * rho(w).powi(m))
        });
        total.value += atom.weight * est.value;
        total.error_estimate += atom.weight * est.error_estimate;
    }
    Ok(total)
}

/// `C(n,s,t) = 4 pi^n Gamma(1+t) Gamma(s-t-n-1) / Gamma(s/2)^2`, defined
/// when `t > -1` and `s - t > n + 1`; the integral diverges otherwise.
pub fn keylemma_constant(n: usize, s: f64, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !s.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument("s and t must be finite".into()));
    }
    if !(t > -1.0) {
        return Err(Error::Divergent(format!(
            "t = {t} <= -1: rho(w)^t is not integrable at the boundary"
        )));
    }
    if !(s - t > n as f64 + 1.0) {
        return Err(Error::Divergent(format!(
            "s - t = {} <= n + 1 = {}: the integral diverges at infinity",
            s - t,
            n + 1
        )));
    }
    let nf = n as f64;
    let g = gamma(s / 2.0);
    Ok(4.0 * std::f64::consts::PI.powi(n as i32) * gamma(1.0 + t) * gamma(s - t - nf - 1.0) / (g * g))
}

/// Numeric and closed-form values of `integral rho(w)^t / |rho(z,w)|^s dV(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaCheck {
    pub n: usize,
    pub s: f64,
    pub t: f64,
    pub point: SiegelPoint,
    pub numeric: f64,
    pub closed_form: f64,
    pub ratio: f64,
    pub error_estimate: f64,
    pub tail_estimate: Option<f64>,
}

pub fn keylemma_check(z: &SiegelPoint, s: f64, t: f64, spec: &QuadratureSpec) -> Result<KeyLemmaCheck> {
    let n = z.dim();
    if spec.region.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec.region.n,
        });
    }
    let c = keylemma_constant(n, s, t)?;
    let closed_form = c / rho(z).powf(s - t - n as f64 - 1.0);
    let foci = [z.clone()];
    let (shells, change) = refine_until_converged(spec, |order, sphere_order| {
        ChartRule::plan(&GridPlan {
            region: &spec.region,
            levels: spec.tail_levels,
            foci: &foci,
            order,
            sphere_order,
            panel_ratio: spec.panel_ratio,
        })
        .integrate(|w| rho(w).powf(t) * rho_pair(z.coords(), w.coords()).norm().powf(-s))
    })?;
    let cumulative: Vec<f64> = shells
        .iter()
        .scan(0.0, |s, x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let tail = extrapolate_tail(&cumulative);
    Ok(KeyLemmaCheck {
        n,
        s,
        t,
        point: z.clone(),
        numeric: tail.total,
        closed_form,
        ratio: tail.total / closed_form,
        error_estimate: change,
        tail_estimate: tail.tail_estimate,
    })
}
