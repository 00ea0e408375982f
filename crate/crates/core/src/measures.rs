//! Positive measures: finite sums of point masses, and densities on a
//! truncated region.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{bergman_metric, dilate, metric_unchecked, rho, SiegelPoint};
use crate::quadrature::{refine_until_converged, BallIntegrator, ChartRule, GridPlan, QuadratureSpec};
use crate::region::Region;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: SiegelPoint,
    pub weight: f64,
}

/// `sum_j c_j delta_{w_j}` with `c_j > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomicFields")]
pub struct AtomicMeasure {
    n: usize,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct AtomicFields {
    #[serde(default)]
    n: Option<usize>,
    atoms: Vec<Atom>,
}

impl TryFrom<AtomicFields> for AtomicMeasure {
    type Error = Error;
    fn try_from(f: AtomicFields) -> Result<Self> {
        let n = match (f.n, f.atoms.first()) {
            (Some(n), _) => n,
            (None, Some(a)) => a.point.dim(),
            (None, None) => return Err(Error::InvalidArgument("an empty measure needs an explicit n".into())),
        };
        AtomicMeasure::new(n, f.atoms)
    }
}

impl AtomicMeasure {
    pub fn new(n: usize, atoms: Vec<Atom>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        for a in &atoms {
            if a.point.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.point.dim(),
                });
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "atom weights must be positive, got {}",
                    a.weight
                )));
            }
        }
        Ok(AtomicMeasure { n, atoms })
    }

    pub fn empty(n: usize) -> Self {
        AtomicMeasure { n, atoms: Vec::new() }
    }

    /// Unit point mass.
    pub fn dirac(point: SiegelPoint) -> Self {
        AtomicMeasure {
            n: point.dim(),
            atoms: vec![Atom { point, weight: 1.0 }],
        }
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> Vec<SiegelPoint> {
        self.atoms.iter().map(|a| a.point.clone()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn push(&mut self, atom: Atom) -> Result<()> {
        let mut atoms = std::mem::take(&mut self.atoms);
        atoms.push(atom);
        *self = AtomicMeasure::new(self.n, atoms)?;
        Ok(())
    }

    /// Every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        AtomicMeasure::new(
            self.n,
            self.atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.clone(),
                    weight: a.weight * factor,
                })
                .collect(),
        )
    }

    /// Pushforward under the dilation `delta_t`, weights unchanged.
    pub fn dilated(&self, t: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    point: dilate(t, &a.point)?,
                    weight: a.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        AtomicMeasure::new(self.n, atoms)
    }

    /// Exact mass of the open ball `D(z, r)`.
    pub fn ball_mass(&self, z: &SiegelPoint, r: f64) -> Result<f64> {
        check_ball(self.n, z, r)?;
        Ok(self
            .atoms
            .iter()
            .filter(|a| metric_unchecked(z, &a.point) < r)
            .map(|a| a.weight)
            .sum())
    }

    pub fn admissibility(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(self
            .atoms
            .iter()
            .map(|a| a.weight * admissibility_weight(&a.point, alpha))
            .sum())
    }
}

fn check_ball(n: usize, z: &SiegelPoint, r: f64) -> Result<()> {
    if z.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.dim(),
        });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `|z_n + i|^{-alpha}`.
fn admissibility_weight(z: &SiegelPoint, alpha: f64) -> f64 {
    (z.zn() + Complex64::new(0.0, 1.0)).norm().powf(-alpha)
}

/// Built-in density families, evaluated in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityFamily {
    /// `g = value` on the support.
    Constant { value: f64 },
    /// `g = amplitude * exp(-d^2 / (2 sigma^2))`, `d` the Euclidean distance
    /// to `center` in the coordinates `(z', Re z_n, rho)`.
    Gaussian {
        amplitude: f64,
        center: SiegelPoint,
        sigma: f64,
    },
}

impl DensityFamily {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            DensityFamily::Constant { value } => {
                if !(*value >= 0.0) || !value.is_finite() {
                    return Err(Error::InvalidArgument(
                        "constant density must be finite and nonnegative".into(),
                    ));
                }
            }
            DensityFamily::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                if !(*amplitude >= 0.0) || !amplitude.is_finite() || !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidArgument(
                        "gaussian needs amplitude >= 0 and sigma > 0".into(),
                    ));
                }
                if center.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: center.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    fn eval(&self, z: &SiegelPoint) -> f64 {
        match self {
            DensityFamily::Constant { value } => *value,
            DensityFamily::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                let dzp: f64 = z
                    .zprime()
                    .iter()
                    .zip(center.zprime())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                let dx = z.zn().re - center.zn().re;
                let dh = rho(z) - rho(center);
                amplitude * (-(dzp + dx * dx + dh * dh) / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            DensityFamily::Constant { value } => *value == 0.0,
            DensityFamily::Gaussian { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// `g dV` with `g` from a built-in family, restricted to `support`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityFields")]
pub struct DensityMeasure {
    pub density: DensityFamily,
    pub support: Region,
}

#[derive(Deserialize)]
struct DensityFields {
    density: DensityFamily,
    support: Region,
}

impl TryFrom<DensityFields> for DensityMeasure {
    type Error = Error;
    fn try_from(f: DensityFields) -> Result<Self> {
        DensityMeasure::new(f.density, f.support)
    }
}

/// Cells per axis for [`DensityMeasure::discretize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub h: usize,
    pub xn: usize,
    /// Cells per real coordinate of `z'`.
    pub zprime: usize,
}

impl Resolution {
    pub fn uniform(k: usize) -> Self {
        Resolution { h: k, xn: k, zprime: k }
    }
}

impl DensityMeasure {
    pub fn new(density: DensityFamily, support: Region) -> Result<Self> {
        density.validate(support.n)?;
        Ok(DensityMeasure { density, support })
    }

    /// Lebesgue measure restricted to `support`.
    pub fn lebesgue(support: Region) -> Self {
        DensityMeasure {
            density: DensityFamily::Constant { value: 1.0 },
            support,
        }
    }

    pub fn n(&self) -> usize {
        self.support.n
    }

    /// `g(z)`, zero off the support.
    pub fn density_at(&self, z: &SiegelPoint) -> f64 {
        if self.support.contains(z) {
            self.density.eval(z)
        } else {
            0.0
        }
    }

    /// Points around which the density varies fastest.
    pub fn foci(&self) -> Vec<SiegelPoint> {
        match &self.density {
            DensityFamily::Gaussian { center, .. } => vec![center.clone()],
            DensityFamily::Constant { .. } => Vec::new(),
        }
    }

    /// `integral_{D(z,r)} g dV`, by a ball rule with an order-refinement check.
    pub fn ball_mass(&self, z: &SiegelPoint, r: f64) -> Result<f64> {
        check_ball(self.n(), z, r)?;
        let integ = BallIntegrator::standard(self.n(), r)?;
        Ok(integ.integrate(z, |w| self.density_at(w))?.value)
    }

    /// `integral g(z) |z_n + i|^{-alpha} dV` over the support.
    pub fn admissibility(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        self.integrate(&QuadratureSpec::new(self.support.clone()), |z| {
            admissibility_weight(z, alpha)
        })
    }

    /// `integral f g dV` over the support with `spec.region` replaced by the support.
    pub fn integrate<F>(&self, spec: &QuadratureSpec, f: F) -> Result<f64>
    where
        F: Fn(&SiegelPoint) -> f64 + Sync,
    {
        let foci = self.foci();
        let (shells, _) = refine_until_converged(spec, |order, sphere_order| {
            ChartRule::plan(&GridPlan {
                region: &self.support,
                levels: 0,
                foci: &foci,
                order,
                sphere_order,
                panel_ratio: spec.panel_ratio,
            })
            .integrate(|z| self.density.eval(z) * f(z))
        })?;
        Ok(shells.iter().sum())
    }

    /// Midpoint rule on a uniform grid over the support. Cells in `z'` whose
    /// midpoint falls outside the ball are dropped and the kept cells are
    /// rescaled to the ball's volume.
    pub fn discretize(&self, res: Resolution) -> Result<AtomicMeasure> {
        if res.h == 0 || res.xn == 0 || (self.n() > 1 && res.zprime == 0) {
            return Err(Error::InvalidArgument("resolution must be at least 1 per axis".into()));
        }
        let n = self.n();
        let s = &self.support;
        if self.density.is_zero() {
            return Ok(AtomicMeasure::empty(n));
        }
        let dh = (s.rho_max - s.rho_min) / res.h as f64;
        let dx = 2.0 * s.re_zn_bound / res.xn as f64;
        let zcells = zprime_cells(n - 1, s.zprime_radius, res.zprime);
        let mut atoms = Vec::new();
        for ih in 0..res.h {
            let h = s.rho_min + (ih as f64 + 0.5) * dh;
            for ix in 0..res.xn {
                let x = -s.re_zn_bound + (ix as f64 + 0.5) * dx;
                for (zp, vol) in &zcells {
                    let point = chart_unchecked(zp, x, h);
                    let g = self.density.eval(&point);
                    if g > 0.0 {
                        atoms.push(Atom {
                            point,
                            weight: g * dh * dx * vol,
                        });
                    }
                }
            }
        }
        AtomicMeasure::new(n, atoms)
    }
}

/// Midpoints and volumes of the cube cells covering the ball of radius
/// `radius` in `C^m`.
fn zprime_cells(m: usize, radius: f64, k: usize) -> Vec<(Vec<Complex64>, f64)> {
    if m == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    let d = 2 * m;
    let side = 2.0 * radius / k as f64;
    let total = k.pow(d as u32);
    let mut cells = Vec::new();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let coords: Vec<f64> = idx.iter().map(|&i| -radius + (i as f64 + 0.5) * side).collect();
        if coords.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
            let zp = coords.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            cells.push(zp);
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    let ball = std::f64::consts::PI.powi(m as i32) * radius.powi(d as i32) / crate::special::factorial(m);
    let vol = ball / cells.len() as f64;
    cells.into_iter().map(|zp| (zp, vol)).collect()
}

/// Either kind of measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Atomic(AtomicMeasure),
    Density(DensityMeasure),
}

impl From<AtomicMeasure> for Measure {
    fn from(m: AtomicMeasure) -> Self {
        Measure::Atomic(m)
    }
}

impl From<DensityMeasure> for Measure {
    fn from(m: DensityMeasure) -> Self {
        Measure::Density(m)
    }
}

impl Measure {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn n(&self) -> usize {
        match self {
            Measure::Atomic(m) => m.n(),
            Measure::Density(m) => m.n(),
        }
    }

    /// `mu(D(z, r))`.
    pub fn ball_mass(&self, z: &SiegelPoint, r: f64) -> Result<f64> {
        match self {
            Measure::Atomic(m) => m.ball_mass(z, r),
            Measure::Density(m) => m.ball_mass(z, r),
        }
    }

    /// `integral dmu(z) / |z_n + i|^alpha`.
    pub fn admissibility(&self, alpha: f64) -> Result<f64> {
        match self {
            Measure::Atomic(m) => m.admissibility(alpha),
            Measure::Density(m) => m.admissibility(alpha),
        }
    }
}

/// Exact `D(z, r)` membership for a list of points, used by tests and oracles.
pub fn atoms_in_ball(mu: &AtomicMeasure, z: &SiegelPoint, r: f64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (j, a) in mu.atoms().iter().enumerate() {
        if bergman_metric(z, &a.point)? < r {
            out.push(j);
        }
    }
    Ok(out)
}
