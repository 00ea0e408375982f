use rayon::prelude::*;

use super::{ExperimentConfig, Outcome, QuadDefaults, Record, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{dilate, rho, SiegelPoint};
use crate::region::Region;
use crate::transforms::{keylemma_check, keylemma_constant};

const DEFAULTS: QuadDefaults = QuadDefaults {
    order: 8,
    sphere_order: 2,
    panel_ratio: 3.0,
    rel_tol: 1e-3,
    max_refinements: 3,
    base_levels: 1,
    tail_levels: 3,
};

const S_GRID: [f64; 2] = [4.0, 6.0];
const T_GRID: [f64; 2] = [0.0, 1.0];

/// Key integral over `{n} x S_GRID x T_GRID` at `i` and `delta_2(i)`.
/// Parameters on the divergent branch must be rejected.
pub fn run_keylemma(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = cfg.quadrature.resolve(DEFAULTS);
    let mut cases = Vec::new();
    for n in cfg.dims() {
        for s in S_GRID {
            for t in T_GRID {
                for z in [SiegelPoint::base(n), dilate(2.0, &SiegelPoint::base(n))?] {
                    cases.push((n, s, t, z));
                }
            }
        }
    }
    let results: Vec<Result<Outcome>> = cases
        .par_iter()
        .map(|(n, s, t, z)| case(cfg, &q, *n, *s, *t, z))
        .collect();
    let mut out = Outcome::default();
    for r in results {
        out.extend(r?);
    }
    for n in cfg.dims() {
        let rejected = matches!(keylemma_constant(n, 4.0, -1.0), Err(Error::Divergent(_)));
        out.verdicts.push(Verdict::ge(
            format!("keylemma n={n} s=4 t=-1 rejected"),
            rejected as u8 as f64,
            1.0,
        ));
    }
    Ok(out)
}

fn case(cfg: &ExperimentConfig, q: &QuadDefaults, n: usize, s: f64, t: f64, z: &SiegelPoint) -> Result<Outcome> {
    let mut out = Outcome::default();
    let label = format!("keylemma n={n} s={s} t={t} rho={}", rho(z));
    let rec = Record::new(label.clone())
        .input("n", n)
        .input("s", s)
        .input("t", t)
        .input("rho", rho(z));
    let divergent = t <= -1.0 || s - t <= n as f64 + 1.0;
    let spec = q.spec(Region::around(z, q.base_levels))?;
    match keylemma_check(z, s, t, &spec) {
        Err(Error::Divergent(msg)) => {
            out.records.push(rec.input("rejected", msg));
            out.verdicts
                .push(Verdict::ge(format!("{label} rejected"), divergent as u8 as f64, 1.0));
        }
        Err(e) => {
            out.errors.push(format!("{label}: {e}"));
            out.verdicts.push(Verdict::inconclusive(
                label,
                cfg.tolerances.keylemma,
                super::Relation::Le,
                e.to_string(),
            ));
        }
        Ok(c) => {
            let mut rec = rec
                .value("numeric", c.numeric)
                .value("closed_form", c.closed_form)
                .value("ratio", c.ratio)
                .value("error_estimate", c.error_estimate);
            if let Some(tail) = c.tail_estimate {
                rec.set("tail_estimate", tail);
            }
            out.records.push(rec);
            let v = Verdict::le(label, (c.ratio - 1.0).abs(), cfg.tolerances.keylemma);
            out.verdicts.push(if divergent {
                Verdict { passed: false, ..v }.with_note("divergent parameters were not rejected")
            } else {
                v
            });
        }
    }
    Ok(out)
}
