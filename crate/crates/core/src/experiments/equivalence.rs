use rayon::prelude::*;

use super::{
    multiplicative_spread, region_around_points, ExperimentConfig, Outcome, QuadDefaults, Record, Relation, Verdict,
};
use crate::error::Result;
use crate::geometry::ball_chart_bounds;
use crate::lattice::{build_lattice, Lattice};
use crate::measures::{AtomicMeasure, Measure};
use crate::quadrature::{BallIntegrator, QuadratureSpec};
use crate::region::Region;
use crate::schatten::{gram_matrix, schatten_power, spectrum};
use crate::transforms::{averaging_power_integral, lattice_power_sum, lp_lambda_norm, ScalarField};

const DEFAULTS: QuadDefaults = QuadDefaults {
    order: 8,
    sphere_order: 8,
    panel_ratio: 2.0,
    rel_tol: 1e-2,
    max_refinements: 3,
    base_levels: 2,
    tail_levels: 3,
};

const DEFAULT_INSTANCES: usize = 20;
const DEFAULT_P: [f64; 4] = [0.6, 1.0, 1.5, 2.0];

type Completed = (Quantities, (Lattice, Lattice), QuadratureSpec);

/// `Q1..Q4` for one measure at every `p`; `q4` is `None` at or below the cutoff.
#[derive(Clone, Debug)]
struct Quantities {
    q1: Vec<f64>,
    q2: Vec<f64>,
    q2_alt: Vec<f64>,
    q3: Vec<f64>,
    q4: Vec<Option<f64>>,
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    q: QuadDefaults,
    n: usize,
    p_grid: Vec<f64>,
    integ: BallIntegrator,
}

impl Setup<'_> {
    fn cutoff(&self) -> f64 {
        self.n as f64 / (self.n as f64 + 1.0)
    }

    fn lattices(&self, mu: &AtomicMeasure, k: usize) -> Result<(Lattice, Lattice)> {
        let region = match &self.cfg.region {
            Some(r) => r.clone(),
            None => {
                let boxes: Vec<_> = mu.points().iter().map(|w| ball_chart_bounds(w, self.cfg.r)).collect();
                Region::enclosing(self.n, &boxes)?
            }
        };
        let seed = self.cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(2 * k as u64);
        Ok((
            build_lattice(&region, self.cfg.r, seed)?,
            build_lattice(&region, self.cfg.r, seed + 1)?,
        ))
    }

    fn spec(&self, mu: &AtomicMeasure) -> Result<QuadratureSpec> {
        self.q
            .spec(region_around_points(self.n, &mu.points(), self.q.base_levels)?)
    }

    fn quantities(&self, mu: &AtomicMeasure, lats: &(Lattice, Lattice), spec: &QuadratureSpec) -> Result<Quantities> {
        let eig = if mu.is_empty() {
            None
        } else {
            Some(spectrum(&gram_matrix(mu)?)?)
        };
        let measure = Measure::Atomic(mu.clone());
        let field = ScalarField::berezin(mu);
        let mut out = Quantities {
            q1: Vec::new(),
            q2: Vec::new(),
            q2_alt: Vec::new(),
            q3: Vec::new(),
            q4: Vec::new(),
        };
        for &p in &self.p_grid {
            out.q1.push(match &eig {
                Some(s) => schatten_power(s, p)?,
                None => 0.0,
            });
            out.q2.push(lattice_power_sum(&measure, &lats.0, p)?);
            out.q2_alt.push(lattice_power_sum(&measure, &lats.1, p)?);
            out.q3
                .push(averaging_power_integral(mu, self.cfg.r, p, &self.integ)?.value);
            out.q4.push(if p > self.cutoff() {
                Some(lp_lambda_norm(&field, p, spec)?.integral)
            } else {
                None
            });
        }
        Ok(out)
    }
}

/// `Q1 = ||T_mu||_p^p`, `Q2 = sum_k mu_hat_r(a_k)^p` on two independent
/// lattices, `Q3 = integral mu_hat_r^p dlambda` and, above the cutoff,
/// `Q4 = integral mu_tilde^p dlambda`, over a random family.
pub fn run_equivalence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    for n in cfg.dims() {
        let setup = Setup {
            cfg,
            q: cfg.quadrature.resolve(DEFAULTS),
            n,
            p_grid: if cfg.p_grid.is_empty() {
                DEFAULT_P.to_vec()
            } else {
                cfg.p_grid.clone()
            },
            integ: cfg.quadrature.resolve(DEFAULTS).ball_integrator(n, cfg.r)?,
        };
        let count = cfg.instances.unwrap_or(DEFAULT_INSTANCES);
        let family = cfg.measures(n, count, (1, 8))?;
        let results: Vec<Result<Completed>> = family
            .par_iter()
            .enumerate()
            .map(|(k, mu)| {
                let lats = setup.lattices(mu, k)?;
                let spec = setup.spec(mu)?;
                let q = setup.quantities(mu, &lats, &spec)?;
                Ok((q, lats, spec))
            })
            .collect();

        let mut done = Vec::new();
        for (k, (mu, res)) in family.iter().zip(results).enumerate() {
            match res {
                Ok((q, lats, spec)) => {
                    record_instance(&setup, k, mu, &lats, &q, &mut out);
                    done.push((k, q, lats, spec));
                }
                Err(e) => out.errors.push(format!("equivalence n={n} #{k}: {e}")),
            }
        }
        out.verdicts.push(Verdict::ge(
            format!("equivalence n={n} completed instances"),
            done.len() as f64,
            family.len() as f64,
        ));
        bands(&setup, &done, &mut out);
        if let Some((k, q, lats, spec)) = done.first() {
            homogeneity(&setup, &family[*k], q, lats, spec, &mut out)?;
            empty_measure(&setup, lats, spec, &mut out)?;
        }
    }
    Ok(out)
}

fn record_instance(
    s: &Setup,
    k: usize,
    mu: &AtomicMeasure,
    lats: &(Lattice, Lattice),
    q: &Quantities,
    out: &mut Outcome,
) {
    for (i, &p) in s.p_grid.iter().enumerate() {
        let mut rec = Record::new(format!("equivalence n={} #{k} p={p}", s.n))
            .input("n", s.n)
            .input("instance", k)
            .input("p", p)
            .input("atoms", mu.len())
            .input("lattice_points", lats.0.len())
            .value("q1", q.q1[i])
            .value("q2", q.q2[i])
            .value("q2_alt", q.q2_alt[i])
            .value("q3", q.q3[i])
            .value("q1_over_q2", q.q1[i] / q.q2[i])
            .value("q2_over_q3", q.q2[i] / q.q3[i])
            .value("q2_over_q2_alt", q.q2[i] / q.q2_alt[i]);
        if let Some(q4) = q.q4[i] {
            rec.set("q4", q4);
            rec.set("q1_over_q4", q.q1[i] / q4);
        }
        out.records.push(rec);
    }
}

fn bands(s: &Setup, done: &[(usize, Quantities, (Lattice, Lattice), QuadratureSpec)], out: &mut Outcome) {
    let tol = &s.cfg.tolerances;
    for (i, &p) in s.p_grid.iter().enumerate() {
        let tag = format!("n={} p={p}", s.n);
        let ratios =
            |f: &dyn Fn(&Quantities) -> Option<f64>| -> Vec<f64> { done.iter().filter_map(|d| f(&d.1)).collect() };
        let q12 = ratios(&|q| Some(q.q1[i] / q.q2[i]));
        let q23 = ratios(&|q| Some(q.q2[i] / q.q3[i]));
        let lat = ratios(&|q| Some(q.q2[i] / q.q2_alt[i]));
        let mut summary = Record::new(format!("bands {tag}")).input("n", s.n).input("p", p);
        for (name, v, limit) in [
            ("q1_over_q2", &q12, tol.band_spread),
            ("q2_over_q3", &q23, tol.band_spread),
            ("q2_over_q2_alt", &lat, tol.lattice_spread),
        ] {
            push_band(out, &mut summary, &tag, name, v, limit);
        }
        if p > s.cutoff() {
            let q14 = ratios(&|q| q.q4[i].map(|q4| q.q1[i] / q4));
            push_band(out, &mut summary, &tag, "q1_over_q4", &q14, tol.band_spread);
        }
        out.records.push(summary);
    }
}

fn push_band(out: &mut Outcome, rec: &mut Record, tag: &str, name: &str, values: &[f64], limit: f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    rec.set(&format!("{name}_min"), lo);
    rec.set(&format!("{name}_max"), hi);
    let spread = multiplicative_spread(values);
    let v = Verdict::le(format!("{name} spread {tag}"), spread, limit);
    out.verdicts.push(if values.is_empty() {
        Verdict::inconclusive(v.name, limit, Relation::Le, "no completed instances")
    } else {
        v
    });
}

/// `Q(2 mu) = 2^p Q(mu)` for every quantity.
fn homogeneity(
    s: &Setup,
    mu: &AtomicMeasure,
    q: &Quantities,
    lats: &(Lattice, Lattice),
    spec: &QuadratureSpec,
    out: &mut Outcome,
) -> Result<()> {
    let doubled = s.quantities(&mu.scaled(2.0)?, lats, spec)?;
    let mut worst = 0.0f64;
    for (i, &p) in s.p_grid.iter().enumerate() {
        let f = 2f64.powf(p);
        let pairs = [
            (doubled.q1[i], q.q1[i]),
            (doubled.q2[i], q.q2[i]),
            (doubled.q3[i], q.q3[i]),
        ]
        .into_iter()
        .chain(doubled.q4[i].zip(q.q4[i]));
        for (a, b) in pairs {
            worst = worst.max((a / (f * b) - 1.0).abs());
        }
    }
    out.records.push(
        Record::new(format!("homogeneity n={}", s.n))
            .input("n", s.n)
            .value("max_rel_error", worst),
    );
    out.verdicts.push(Verdict::le(
        format!("homogeneity n={}", s.n),
        worst,
        s.cfg.tolerances.homogeneity,
    ));
    Ok(())
}

fn empty_measure(s: &Setup, lats: &(Lattice, Lattice), spec: &QuadratureSpec, out: &mut Outcome) -> Result<()> {
    let q = s.quantities(&AtomicMeasure::empty(s.n), lats, spec)?;
    let total: f64 =
        q.q1.iter()
            .chain(&q.q2)
            .chain(&q.q2_alt)
            .chain(&q.q3)
            .chain(q.q4.iter().flatten())
            .map(|v| v.abs())
            .sum();
    out.verdicts
        .push(Verdict::le(format!("empty measure n={}", s.n), total, 0.0));
    Ok(())
}
