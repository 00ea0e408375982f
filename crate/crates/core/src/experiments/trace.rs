use rayon::prelude::*;

use super::{region_around_points, ExperimentConfig, Outcome, QuadDefaults, Record, Relation, Verdict};
use crate::error::Result;
use crate::geometry::SiegelPoint;
use crate::measures::AtomicMeasure;
use crate::schatten::trace_identity_check;

const DEFAULTS: QuadDefaults = QuadDefaults {
    order: 8,
    sphere_order: 4,
    panel_ratio: 2.0,
    rel_tol: 1e-3,
    max_refinements: 3,
    base_levels: 2,
    tail_levels: 4,
};

const DEFAULT_INSTANCES: usize = 10;

/// `sum_k lambda_k` against `integral mu_tilde dlambda` for a unit point
/// mass at `i` and a random family with up to 50 atoms.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = cfg.quadrature.resolve(DEFAULTS);
    let mut out = Outcome::default();
    for n in cfg.dims() {
        let mut family = vec![("dirac".to_string(), AtomicMeasure::dirac(SiegelPoint::base(n)))];
        let count = cfg.instances.unwrap_or(DEFAULT_INSTANCES);
        for (k, mu) in cfg.measures(n, count, (1, 50))?.into_iter().enumerate() {
            family.push((format!("#{k}"), mu));
        }
        let results: Vec<Outcome> = family
            .par_iter()
            .map(|(name, mu)| instance(cfg, &q, n, name, mu))
            .collect();
        for r in results {
            out.extend(r);
        }
    }
    Ok(out)
}

fn instance(cfg: &ExperimentConfig, q: &QuadDefaults, n: usize, name: &str, mu: &AtomicMeasure) -> Outcome {
    let mut out = Outcome::default();
    let label = format!("trace n={n} {name}");
    let tol = cfg.tolerances.trace_rel;
    let checked = region_around_points(n, &mu.points(), q.base_levels)
        .and_then(|region| q.spec(region))
        .and_then(|spec| trace_identity_check(mu, &spec));
    match checked {
        Ok(c) => {
            let mut rec = Record::new(label.clone())
                .input("n", n)
                .input("atoms", mu.len())
                .value("eigen_trace", c.lhs)
                .value("integral", c.rhs)
                .value("truncated", c.truncated)
                .value("error_estimate", c.error_estimate)
                .value("rel_diff", c.rel_diff);
            if let Some(t) = c.tail_estimate {
                rec.set("tail_estimate", t);
            }
            out.records.push(rec);
            out.verdicts.push(Verdict::le(label, c.rel_diff, tol));
        }
        Err(e) => {
            out.errors.push(format!("{label}: {e}"));
            out.verdicts
                .push(Verdict::inconclusive(label, tol, Relation::Le, e.to_string()));
        }
    }
    out
}
