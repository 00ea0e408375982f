//! Tensor Gauss-Legendre quadrature over the chart and over Bergman balls.
//!
//! Chart integrals use one panel grid per chart axis: geometric panels in the
//! height `h` (integrands are power laws there), and panels in `Re z_n` and
//! `|z'|` whose width follows a size function graded away from a set of focus
//! points. Directions of `z'` are handled by a product rule on the sphere.
//!
//! Every panel carries a shell index. The integrator returns one partial sum
//! per shell, which lets a single pass produce the integral over a family of
//! nested regions (tail extrapolation, height sweeps).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{inverse_automorphism_unchecked, rho, SiegelPoint};
use crate::region::Region;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if order == 1 {
                p1 = x;
                p0 = 1.0;
            } else {
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_order(x), p0 = P_{order-1}(x)
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if order == 1 {
            nodes[0] = 0.0;
            weights[0] = 2.0;
            break;
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// A one-dimensional rule assembled from panels.
#[derive(Clone, Debug, Default)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub shells: Vec<usize>,
}

impl AxisRule {
    /// `order` Gauss nodes on each panel `[breaks[k], breaks[k+1]]`.
    pub fn from_breaks(breaks: &[f64], order: usize, shell_of: impl Fn(f64, f64) -> usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut rule = AxisRule::default();
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let s = shell_of(a, b);
            for (x, w) in gx.iter().zip(&gw) {
                rule.nodes.push(mid + half * x);
                rule.weights.push(half * w);
                rule.shells.push(s);
            }
        }
        rule
    }

    /// The degenerate rule with one node of unit weight.
    pub fn point(value: f64) -> Self {
        AxisRule {
            nodes: vec![value],
            weights: vec![1.0],
            shells: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Breaks `lo, lo q, lo q^2, ..., hi` (the last panel may be shorter).
pub fn geometric_breaks(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && ratio > 1.0);
    let mut out = vec![lo];
    let mut x = lo;
    loop {
        x *= ratio;
        if x >= hi * (1.0 - 1e-9) {
            out.push(hi);
            break;
        }
        out.push(x);
    }
    out
}

/// A point around which panels are refined, with its length scale.
#[derive(Clone, Copy, Debug)]
pub struct AxisFocus {
    pub at: f64,
    pub scale: f64,
}

/// Breaks on `[lo, hi]` whose panel widths are `growth` times the distance
/// from the panel's nearer end to each focus, at least `scale / 2` and at most
/// `max_width`. Neighbouring panels then differ by the factor `1 + growth` on
/// both sides of a focus.
pub fn graded_breaks(lo: f64, hi: f64, foci: &[AxisFocus], growth: f64, max_width: f64) -> Vec<f64> {
    assert!(hi > lo);
    let width = |x: f64| -> f64 {
        foci.iter()
            .map(|f| {
                let d = x - f.at;
                let w = if d >= 0.0 {
                    growth * d
                } else {
                    growth * -d / (1.0 + growth)
                };
                (0.5 * f.scale).max(w)
            })
            .fold(max_width, f64::min)
    };
    let mut out = vec![lo];
    let mut x = lo;
    while x < hi {
        let w = width(x);
        let next = x + w;
        if next >= hi - 0.25 * w {
            out.push(hi);
            break;
        }
        out.push(next);
        x = next;
    }
    out
}

/// Sorted union of `breaks` and the `extra` points lying inside, with
/// near-duplicates removed.
pub fn merge_breaks(mut breaks: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = (breaks[0], *breaks.last().unwrap());
    breaks.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    let mut out: Vec<f64> = Vec::with_capacity(breaks.len());
    for x in breaks {
        match out.last() {
            Some(&p) if (x - p).abs() <= 1e-12 * scale.max(x.abs()) => {
                // keep the endpoint exactly
                if x == hi {
                    *out.last_mut().unwrap() = hi;
                }
            }
            _ => out.push(x),
        }
    }
    out
}

/// Product rule on the unit sphere `S^{d-1}` in `R^d`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub dim: usize,
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `order` controls the angular resolution; weights sum to the surface area.
    pub fn new(dim: usize, order: usize) -> Self {
        match dim {
            0 => SphereRule {
                dim,
                dirs: vec![vec![]],
                weights: vec![1.0],
            },
            1 => SphereRule {
                dim,
                dirs: vec![vec![-1.0], vec![1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = 2 * order.max(2);
                let dirs = (0..m)
                    .map(|k| {
                        let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                SphereRule {
                    dim,
                    dirs,
                    weights: vec![2.0 * PI / m as f64; m],
                }
            }
            _ => {
                // polar coordinate t = cos(phi) carries the weight (1 - t^2)^{(dim-3)/2}
                let lower = SphereRule::new(dim - 1, order);
                let m = order.max(2);
                let (ts, tw): (Vec<f64>, Vec<f64>) = if dim % 2 == 1 {
                    let (x, w) = gauss_legendre(m);
                    let p = (dim as i32 - 3) / 2;
                    let w = x.iter().zip(&w).map(|(t, w)| w * (1.0 - t * t).powi(p)).collect();
                    (x, w)
                } else {
                    // Gauss-Chebyshev of the second kind absorbs the half-integer power
                    let p = (dim as i32 - 4) / 2;
                    (1..=m)
                        .map(|k| {
                            let a = k as f64 * PI / (m as f64 + 1.0);
                            let t = a.cos();
                            (t, PI / (m as f64 + 1.0) * a.sin().powi(2) * (1.0 - t * t).powi(p))
                        })
                        .unzip()
                };
                let mut dirs = Vec::new();
                let mut weights = Vec::new();
                for (t, wt) in ts.iter().zip(&tw) {
                    let s = (1.0 - t * t).max(0.0).sqrt();
                    for (d, wd) in lower.dirs.iter().zip(&lower.weights) {
                        let mut v = Vec::with_capacity(dim);
                        v.push(*t);
                        v.extend(d.iter().map(|x| s * x));
                        dirs.push(v);
                        weights.push(wt * wd);
                    }
                }
                SphereRule { dim, dirs, weights }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Surface area of `S^{d-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    if dim == 0 {
        return 1.0;
    }
    2.0 * PI.powf(dim as f64 / 2.0) / crate::special::gamma(dim as f64 / 2.0)
}

/// A tensor rule over the chart: heights x `Re z_n` x `|z'|` x directions of `z'`.
#[derive(Clone, Debug)]
pub struct ChartRule {
    pub n: usize,
    pub h: AxisRule,
    pub xn: AxisRule,
    /// Radial `|z'|` rule; its weights already include `|z'|^{2n-3}`.
    pub radial: AxisRule,
    pub sphere: SphereRule,
    pub shells: usize,
}

/// Parameters of a chart grid.
#[derive(Clone, Debug)]
pub struct GridPlan<'a> {
    /// The level-0 region; levels `1..=levels` are successive [`Region::expanded`] copies.
    pub region: &'a Region,
    pub levels: usize,
    pub foci: &'a [SiegelPoint],
    pub order: usize,
    pub sphere_order: usize,
    pub panel_ratio: f64,
}

fn level_shell(bounds: &[(f64, f64)], a: f64, b: f64) -> usize {
    bounds
        .iter()
        .position(|&(lo, hi)| {
            let tol = 1e-9 * (lo.abs().max(hi.abs()));
            a >= lo - tol && b <= hi + tol
        })
        .unwrap_or(bounds.len() - 1)
}

impl ChartRule {
    pub fn new(n: usize, h: AxisRule, xn: AxisRule, radial: AxisRule, sphere: SphereRule) -> Self {
        let shells = h
            .shells
            .iter()
            .chain(&xn.shells)
            .chain(&radial.shells)
            .max()
            .map_or(1, |m| m + 1);
        ChartRule {
            n,
            h,
            xn,
            radial,
            sphere,
            shells,
        }
    }

    pub fn plan(plan: &GridPlan<'_>) -> Self {
        let n = plan.region.n;
        let levels: Vec<Region> = (0..=plan.levels).map(|k| plan.region.expanded(k)).collect();
        let outer = levels.last().unwrap();
        let growth = 0.5 * (plan.panel_ratio - 1.0);

        // heights
        let h_bounds: Vec<(f64, f64)> = levels.iter().map(|r| (r.rho_min, r.rho_max)).collect();
        let h_extra: Vec<f64> = h_bounds.iter().flat_map(|&(a, b)| [a, b]).collect();
        let h_breaks = merge_breaks(
            geometric_breaks(outer.rho_min, outer.rho_max, plan.panel_ratio),
            &h_extra,
        );
        let h = AxisRule::from_breaks(&h_breaks, plan.order, |a, b| level_shell(&h_bounds, a, b));

        // Re z_n
        let x_bounds: Vec<(f64, f64)> = levels.iter().map(|r| (-r.re_zn_bound, r.re_zn_bound)).collect();
        let x_extra: Vec<f64> = x_bounds.iter().flat_map(|&(a, b)| [a, b]).collect();
        let mut x_foci: Vec<AxisFocus> = plan
            .foci
            .iter()
            .map(|f| AxisFocus {
                at: f.zn().re,
                scale: rho(f),
            })
            .collect();
        if x_foci.is_empty() {
            x_foci.push(AxisFocus {
                at: 0.0,
                scale: plan.region.re_zn_bound / 4.0,
            });
        }
        let xb = graded_breaks(
            -outer.re_zn_bound,
            outer.re_zn_bound,
            &x_foci,
            growth,
            outer.re_zn_bound / 2.0,
        );
        let xn = AxisRule::from_breaks(&merge_breaks(xb, &x_extra), plan.order, |a, b| {
            level_shell(&x_bounds, a, b)
        });

        // |z'|
        let radial = if n == 1 {
            AxisRule::point(0.0)
        } else {
            let r_bounds: Vec<(f64, f64)> = levels.iter().map(|r| (0.0, r.zprime_radius)).collect();
            let r_extra: Vec<f64> = r_bounds.iter().map(|&(_, b)| b).collect();
            let mut r_foci: Vec<AxisFocus> = plan
                .foci
                .iter()
                .map(|f| AxisFocus {
                    at: f.zprime().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
                    scale: rho(f).sqrt(),
                })
                .collect();
            if r_foci.is_empty() {
                r_foci.push(AxisFocus {
                    at: 0.0,
                    scale: plan.region.zprime_radius / 4.0,
                });
            }
            let rb = graded_breaks(0.0, outer.zprime_radius, &r_foci, growth, outer.zprime_radius / 2.0);
            let mut rule = AxisRule::from_breaks(&merge_breaks(rb, &r_extra), plan.order, |a, b| {
                level_shell(&r_bounds, a, b)
            });
            let pow = 2 * n as i32 - 3;
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
                *w *= x.powi(pow);
            }
            rule
        };
        let sphere = SphereRule::new(2 * n - 2, plan.sphere_order);
        ChartRule::new(n, h, xn, radial, sphere)
    }

    pub fn node_count(&self) -> usize {
        self.h.len() * self.xn.len() * self.radial.len() * self.sphere.len()
    }

    /// Per-shell partial sums of `integral f dV`. A cell belongs to the
    /// largest shell index among its axis panels. The reduction order is
    /// fixed, so the result does not depend on the thread count.
    pub fn integrate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&SiegelPoint) -> f64 + Sync,
    {
        let m = self.n - 1;
        let partials: Vec<Vec<f64>> = (0..self.h.len())
            .into_par_iter()
            .map(|ih| {
                let mut acc = vec![0.0; self.shells];
                let h = self.h.nodes[ih];
                let wh = self.h.weights[ih];
                let sh = self.h.shells[ih];
                let mut zp = vec![Complex64::new(0.0, 0.0); m];
                for ix in 0..self.xn.len() {
                    let x = self.xn.nodes[ix];
                    let wx = wh * self.xn.weights[ix];
                    let sx = sh.max(self.xn.shells[ix]);
                    for ir in 0..self.radial.len() {
                        let rr = self.radial.nodes[ir];
                        let wr = wx * self.radial.weights[ir];
                        let sr = sx.max(self.radial.shells[ir]);
                        let mut cell = 0.0;
                        for (dir, ws) in self.sphere.dirs.iter().zip(&self.sphere.weights) {
                            for (j, c) in zp.iter_mut().enumerate() {
                                *c = Complex64::new(rr * dir[2 * j], rr * dir[2 * j + 1]);
                            }
                            let z = chart_unchecked(&zp, x, h);
                            cell += ws * f(&z);
                        }
                        acc[sr] += wr * cell;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; self.shells];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }
}

/// Settings shared by chart integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadratureFields")]
pub struct QuadratureSpec {
    pub region: Region,
    /// Gauss nodes per panel on each axis.
    pub order: usize,
    /// Angular resolution for directions of `z'` and in Bergman balls.
    pub sphere_order: usize,
    /// Growth factor between neighbouring panels.
    pub panel_ratio: f64,
    pub rel_tol: f64,
    /// How many times the order may be raised before giving up.
    pub max_refinements: usize,
    /// Number of outward expansions used for the tail estimate (0 = none).
    pub tail_levels: usize,
}

#[derive(Deserialize)]
struct QuadratureFields {
    region: Region,
    #[serde(default = "defaults::order")]
    order: usize,
    #[serde(default = "defaults::sphere_order")]
    sphere_order: usize,
    #[serde(default = "defaults::panel_ratio")]
    panel_ratio: f64,
    #[serde(default = "defaults::rel_tol")]
    rel_tol: f64,
    #[serde(default = "defaults::max_refinements")]
    max_refinements: usize,
    #[serde(default)]
    tail_levels: usize,
}

mod defaults {
    pub fn order() -> usize {
        8
    }
    pub fn sphere_order() -> usize {
        8
    }
    pub fn panel_ratio() -> f64 {
        2.0
    }
    pub fn rel_tol() -> f64 {
        1e-2
    }
    pub fn max_refinements() -> usize {
        3
    }
}

impl TryFrom<QuadratureFields> for QuadratureSpec {
    type Error = Error;
    fn try_from(f: QuadratureFields) -> Result<Self> {
        let spec = QuadratureSpec {
            region: f.region,
            order: f.order,
            sphere_order: f.sphere_order,
            panel_ratio: f.panel_ratio,
            rel_tol: f.rel_tol,
            max_refinements: f.max_refinements,
            tail_levels: f.tail_levels,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl QuadratureSpec {
    pub fn new(region: Region) -> Self {
        QuadratureSpec {
            region,
            order: defaults::order(),
            sphere_order: defaults::sphere_order(),
            panel_ratio: defaults::panel_ratio(),
            rel_tol: defaults::rel_tol(),
            max_refinements: defaults::max_refinements(),
            tail_levels: 0,
        }
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_tail_levels(mut self, levels: usize) -> Self {
        self.tail_levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.sphere_order < 2 {
            return Err(Error::InvalidArgument("quadrature orders must be at least 2".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if !(self.panel_ratio > 1.0) || !self.panel_ratio.is_finite() {
            return Err(Error::InvalidArgument("panel_ratio must exceed 1".into()));
        }
        Ok(())
    }

    /// Order used at refinement step `k`.
    pub fn order_at(&self, k: usize) -> usize {
        self.order + 2 * k
    }
}

/// Runs `eval(order, sphere_order)` with increasing orders until consecutive
/// cumulative shell sums agree to `rel_tol`. Returns the last per-shell sums
/// and the largest relative change of the cumulative sums.
pub fn refine_until_converged<F>(spec: &QuadratureSpec, mut eval: F) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(usize, usize) -> Vec<f64>,
{
    spec.validate()?;
    let cumulative = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .scan(0.0, |s, x| {
                *s += x;
                Some(*s)
            })
            .collect()
    };
    let mut prev = cumulative(&eval(spec.order_at(0), spec.sphere_order));
    let mut last_shells = Vec::new();
    let mut last_change = f64::INFINITY;
    for k in 1..=spec.max_refinements.max(1) {
        let shells = eval(spec.order_at(k), spec.sphere_order + k);
        let cur = cumulative(&shells);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| {
                let d = (a - b).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / a.abs().max(b.abs())
                }
            })
            .fold(0.0, f64::max);
        last_shells = shells;
        last_change = change;
        if change <= spec.rel_tol {
            return Ok((last_shells, change));
        }
        if k == spec.max_refinements.max(1) {
            return Err(Error::Tolerance {
                estimate: *cur.last().unwrap(),
                previous: *prev.last().unwrap(),
                rel_tol: spec.rel_tol,
            });
        }
        prev = cur;
    }
    Ok((last_shells, last_change))
}

/// Value of an integral over the unbounded domain from a sequence of nested truncations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailedValue {
    /// Integral over the level-0 region.
    pub truncated: f64,
    /// Integral over the largest region plus the extrapolated remainder.
    pub total: f64,
    /// `total - truncated`; `None` when the increments do not decay.
    pub tail_estimate: Option<f64>,
}

/// Geometric (Aitken) extrapolation of cumulative values over nested regions.
/// Power-law tails become geometric series under the fixed expansion factor.
pub fn extrapolate_tail(cumulative: &[f64]) -> TailedValue {
    let truncated = cumulative[0];
    let last = *cumulative.last().unwrap();
    if cumulative.len() < 3 {
        return TailedValue {
            truncated,
            total: last,
            tail_estimate: if cumulative.len() == 1 {
                Some(0.0)
            } else {
                Some(last - truncated)
            },
        };
    }
    let k = cumulative.len();
    let d1 = cumulative[k - 2] - cumulative[k - 3];
    let d2 = cumulative[k - 1] - cumulative[k - 2];
    let beyond = if d2 == 0.0 {
        Some(0.0)
    } else if d1 != 0.0 && d2 / d1 > 0.0 && d2 / d1 < 1.0 {
        let q = d2 / d1;
        Some(d2 * q / (1.0 - q))
    } else if d2.abs() <= 1e-12 * last.abs() {
        Some(0.0)
    } else {
        None
    };
    match beyond {
        Some(b) => TailedValue {
            truncated,
            total: last + b,
            tail_estimate: Some(last + b - truncated),
        },
        None => TailedValue {
            truncated,
            total: last,
            tail_estimate: None,
        },
    }
}

/// Quadrature over the Bergman ball `D(z, r)`, built once on `D(i, r)` and
/// transported by `sigma_z^{-1}` (whose real Jacobian is `rho(z)^{n+1}`).
///
/// `D(i, r)` projects onto the ellipsoid `|u'|^2 + c (Re u_n)^2 <= sinh^2 r`,
/// `c = (1 - tanh^2 r) / 4`, and over each base point `Im u_n` fills an
/// interval of length `tanh(r) sqrt(1 - q) / c` where `q` is the normalized
/// ellipsoid radius squared. Chebyshev nodes in `sqrt(q)` absorb the
/// square-root edge.
#[derive(Clone, Debug)]
pub struct BallRule {
    pub n: usize,
    pub r: f64,
    pub points: Vec<SiegelPoint>,
    pub weights: Vec<f64>,
}

impl BallRule {
    pub fn new(n: usize, r: f64, order: usize, sphere_order: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
        }
        if n == 0 || order < 2 {
            return Err(Error::InvalidArgument("ball rule needs n >= 1 and order >= 2".into()));
        }
        let t = r.tanh();
        let s = r.sinh();
        let c = 0.25 * (1.0 - t * t);
        let (gx, gw) = gauss_legendre(order);
        let sphere = SphereRule::new(2 * n - 1, sphere_order);
        let base_scale = s.powi(2 * n as i32 - 1) / c.sqrt();
        // Radial variable u = sin(theta) on [-1, 1] with Chebyshev weight
        // sqrt(1 - u^2); the sphere rule is antipodally symmetric, so the
        // positive nodes with doubled weight give the same sum.
        let mu = 2 * order;
        let radial: Vec<(f64, f64)> = (1..=mu)
            .map(|k| {
                let a = k as f64 * PI / (mu as f64 + 1.0);
                (a.cos(), 2.0 * PI / (mu as f64 + 1.0) * a.sin().powi(2))
            })
            .filter(|&(u, _)| u > 0.0)
            .collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let m = n - 1;
        for &(u, wu) in &radial {
            let root = (1.0 - u * u).sqrt();
            let half = t * root / (2.0 * c);
            // Chebyshev weight already carries sqrt(1 - u^2)
            let radial_w = 0.5 * wu * u.powi(2 * n as i32 - 2) * t / (2.0 * c);
            for (dir, wd) in sphere.dirs.iter().zip(&sphere.weights) {
                let zp: Vec<Complex64> = (0..m)
                    .map(|j| Complex64::new(s * u * dir[2 * j], s * u * dir[2 * j + 1]))
                    .collect();
                let x = s * u * dir[2 * m] / c.sqrt();
                for (xy, wy) in gx.iter().zip(&gw) {
                    let y = 1.0 / (2.0 * c) - 1.0 + half * xy;
                    let mut coords = zp.clone();
                    coords.push(Complex64::new(x, y));
                    points.push(SiegelPoint::from_coords_unchecked(coords));
                    weights.push(base_scale * radial_w * wd * wy);
                }
            }
        }
        Ok(BallRule { n, r, points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `integral_{D(center, r)} f dV`.
    pub fn integrate<F>(&self, center: &SiegelPoint, f: F) -> f64
    where
        F: Fn(&SiegelPoint) -> f64,
    {
        let jac = rho(center).powi(self.n as i32 + 1);
        let mut acc = 0.0;
        for (u, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(&inverse_automorphism_unchecked(center, u));
        }
        jac * acc
    }
}

/// A ladder of ball rules of increasing order, used to integrate over many
/// balls of one radius with a convergence check.
#[derive(Clone, Debug)]
pub struct BallIntegrator {
    pub rel_tol: f64,
    rules: Vec<BallRule>,
}

/// A ball integral together with the change between the last two rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

impl BallIntegrator {
    pub fn new(
        n: usize,
        r: f64,
        order: usize,
        sphere_order: usize,
        rel_tol: f64,
        max_refinements: usize,
    ) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must lie in (0, 1), got {rel_tol}"
            )));
        }
        let rules = (0..=max_refinements.max(1))
            .map(|k| BallRule::new(n, r, order + 2 * k, sphere_order + k))
            .collect::<Result<Vec<_>>>()?;
        Ok(BallIntegrator { rel_tol, rules })
    }

    /// Default settings: order 8, one refinement step, `rel_tol` 1e-2.
    pub fn standard(n: usize, r: f64) -> Result<Self> {
        BallIntegrator::new(n, r, 8, 8, 1e-2, 2)
    }

    pub fn n(&self) -> usize {
        self.rules[0].n
    }

    pub fn r(&self) -> f64 {
        self.rules[0].r
    }

    /// Raises the order until two successive rules agree to `rel_tol`.
    pub fn integrate<F>(&self, center: &SiegelPoint, f: F) -> Result<BallEstimate>
    where
        F: Fn(&SiegelPoint) -> f64,
    {
        let mut prev = self.rules[0].integrate(center, &f);
        for (k, rule) in self.rules.iter().enumerate().skip(1) {
            let cur = rule.integrate(center, &f);
            let err = (cur - prev).abs();
            if err <= self.rel_tol * cur.abs().max(f64::MIN_POSITIVE) || err == 0.0 {
                return Ok(BallEstimate {
                    value: cur,
                    error_estimate: err,
                });
            }
            if k + 1 == self.rules.len() {
                return Err(Error::Tolerance {
                    estimate: cur,
                    previous: prev,
                    rel_tol: self.rel_tol,
                });
            }
            prev = cur;
        }
        unreachable!("a ball integrator holds at least two rules")
    }

    /// Two-rule estimate without enforcing the tolerance; for integrands
    /// with interior jumps whose error is reported rather than controlled.
    pub fn estimate<F>(&self, center: &SiegelPoint, f: F) -> BallEstimate
    where
        F: Fn(&SiegelPoint) -> f64,
    {
        let k = self.rules.len();
        let prev = self.rules[k - 2].integrate(center, &f);
        let value = self.rules[k - 1].integrate(center, &f);
        BallEstimate {
            value,
            error_estimate: (value - prev).abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bergman_metric, unit_ball_volume};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in 1..=20 {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "order {order}");
            for deg in 0..(2 * order) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-12, "order {order}, degree {deg}");
            }
        }
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        for d in 1..=5 {
            let s = SphereRule::new(d, 6);
            let area: f64 = s.weights.iter().sum();
            assert!((area - sphere_area(d)).abs() < 1e-10, "d = {d}");
            for dir in &s.dirs {
                let norm: f64 = dir.iter().map(|x| x * x).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_rule_second_moment() {
        // integral of x_1^2 over S^{d-1} = area / d
        for d in 2..=5 {
            let s = SphereRule::new(d, 6);
            let m: f64 = s.dirs.iter().zip(&s.weights).map(|(v, w)| w * v[0] * v[0]).sum();
            assert!((m - sphere_area(d) / d as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn geometric_and_graded_breaks_are_monotone() {
        let g = geometric_breaks(0.25, 10.0, 2.0);
        assert_eq!(g[0], 0.25);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.windows(2).all(|p| p[1] > p[0]));
        let foci = [AxisFocus { at: 0.3, scale: 0.5 }, AxisFocus { at: -1.0, scale: 0.1 }];
        let b = graded_breaks(-50.0, 50.0, &foci, 0.5, 25.0);
        assert!(b.windows(2).all(|p| p[1] > p[0]));
        assert_eq!(*b.last().unwrap(), 50.0);
        let m = merge_breaks(b.clone(), &[-3.0, 0.3, 100.0]);
        assert!(m.contains(&-3.0));
        assert!(!m.contains(&100.0));
        assert!(m.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn graded_panels_grow_evenly_on_both_sides() {
        for growth in [0.5, 1.0, 2.0] {
            let b = graded_breaks(-4096.0, 4096.0, &[AxisFocus { at: 0.0, scale: 1.0 }], growth, 2048.0);
            for p in b.windows(2) {
                let near = p[0].abs().min(p[1].abs());
                let far_side = if p[0] < 0.0 && p[1] > 0.0 { 0.0 } else { near };
                assert!(
                    p[1] - p[0] <= (growth * far_side).max(0.5) * (1.0 + 1e-12),
                    "{p:?} growth {growth}"
                );
            }
        }
    }

    #[test]
    fn chart_rule_integrates_region_volume() {
        for n in 1..=2 {
            let region = Region::new(n, 0.5, 2.0, 1.5, 3.0).unwrap();
            let rule = ChartRule::plan(&GridPlan {
                region: &region,
                levels: 0,
                foci: &[],
                order: 10,
                sphere_order: 4,
                panel_ratio: 2.0,
            });
            let v: f64 = rule.integrate(|_| 1.0).iter().sum();
            assert!(((v - region.volume()) / region.volume()).abs() < 1e-12, "n = {n}");
            let l: f64 = rule.integrate(crate::geometry::invariant_density).iter().sum();
            assert!(((l - region.lambda_measure()) / l).abs() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn chart_rule_shells_nest() {
        let region = Region::new(1, 0.5, 2.0, 1.0, 3.0).unwrap();
        let rule = ChartRule::plan(&GridPlan {
            region: &region,
            levels: 2,
            foci: &[],
            order: 4,
            sphere_order: 4,
            panel_ratio: 2.0,
        });
        assert_eq!(rule.shells, 3);
        let shells = rule.integrate(|_| 1.0);
        assert!((shells[0] - region.volume()).abs() < 1e-10);
        let all: f64 = shells.iter().sum();
        assert!((all - region.expanded(2).volume()).abs() < 1e-8 * all);
    }

    #[test]
    fn ball_rule_reproduces_ball_volume() {
        for n in 1..=3 {
            for &r in &[0.2, 0.5, 1.0] {
                let rule = BallRule::new(n, r, 6, 6).unwrap();
                let v = rule.integrate(&SiegelPoint::base(n), |_| 1.0);
                let exact = unit_ball_volume(n, r);
                assert!(((v - exact) / exact).abs() < 1e-10, "n={n} r={r}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn ball_rule_nodes_lie_in_ball() {
        let rule = BallRule::new(2, 0.7, 5, 4).unwrap();
        let base = SiegelPoint::base(2);
        for u in &rule.points {
            assert!(bergman_metric(&base, u).unwrap() < 0.7 + 1e-12);
        }
    }

    #[test]
    fn tail_extrapolation_is_exact_for_geometric_increments() {
        let cum = [1.0, 1.5, 1.75];
        let t = extrapolate_tail(&cum);
        assert!((t.total - 2.0).abs() < 1e-15);
        assert_eq!(t.truncated, 1.0);
        let div = extrapolate_tail(&[1.0, 2.0, 3.5]);
        assert!(div.tail_estimate.is_none());
    }
}
