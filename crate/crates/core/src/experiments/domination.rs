use rand::Rng;
use rayon::prelude::*;

use super::{multiplicative_spread, ExperimentConfig, Outcome, QuadDefaults, Record, Verdict};
use crate::chart::chart_unchecked;
use crate::error::Result;
use crate::geometry::{ball_chart_bounds, SiegelPoint};
use crate::measures::AtomicMeasure;
use crate::region::{sample_in_ball, Region};
use crate::transforms::{averaged_berezin, berezin_atomic};

const DEFAULTS: QuadDefaults = QuadDefaults {
    order: 8,
    sphere_order: 8,
    panel_ratio: 2.0,
    rel_tol: 1e-2,
    max_refinements: 2,
    base_levels: 0,
    tail_levels: 0,
};

const DEFAULT_INSTANCES: usize = 5;
const DEFAULT_SAMPLES: usize = 100;
/// Sampled points lie within this Bergman radius of the atoms' chart boxes.
const SAMPLE_RADIUS: f64 = 2.0;

/// Ratio of `mu_tilde(a)` to the Berezin transform of `mu_hat_r dV` at `a`.
/// The fitted constant `C_r` is the largest ratio; its stability is the
/// spread `max / min` over all sampled points and measures.
pub fn run_domination(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = cfg.quadrature.resolve(DEFAULTS);
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut out = Outcome::default();
    for n in cfg.dims() {
        let integ = q.ball_integrator(n, cfg.r)?;
        let family = cfg.measures(n, cfg.instances.unwrap_or(DEFAULT_INSTANCES), (1, 8))?;
        let results: Vec<Result<Vec<(SiegelPoint, f64)>>> = family
            .par_iter()
            .enumerate()
            .map(|(k, mu)| {
                let mut rng = cfg.rng(0xd0_0000 + 64 * n as u64 + k as u64);
                let region = sample_region(mu)?;
                (0..samples)
                    .map(|_| {
                        let a = sample_log_height(&region, &mut rng);
                        let num = berezin_atomic(mu, &a)?;
                        let den = averaged_berezin(mu, &a, &integ)?.value;
                        Ok((a, num / den))
                    })
                    .collect()
            })
            .collect();
        let mut all = Vec::new();
        let mut completed = 0usize;
        for (k, res) in results.into_iter().enumerate() {
            match res {
                Ok(ratios) => {
                    let vals: Vec<f64> = ratios.iter().map(|r| r.1).collect();
                    out.records.push(
                        Record::new(format!("domination n={n} #{k}"))
                            .input("n", n)
                            .input("instance", k)
                            .input("atoms", family[k].len())
                            .input("r", cfg.r)
                            .value("c_r", vals.iter().copied().fold(0.0, f64::max))
                            .value("min_ratio", vals.iter().copied().fold(f64::INFINITY, f64::min))
                            .value("spread", multiplicative_spread(&vals)),
                    );
                    all.extend(vals);
                    completed += 1;
                }
                Err(e) => out.errors.push(format!("domination n={n} #{k}: {e}")),
            }
        }
        out.verdicts.push(Verdict::ge(
            format!("domination n={n} completed instances"),
            completed as f64,
            family.len() as f64,
        ));
        let c_r = all.iter().copied().fold(0.0, f64::max);
        let spread = multiplicative_spread(&all);
        out.records.push(
            Record::new(format!("domination n={n} fitted"))
                .input("n", n)
                .input("r", cfg.r)
                .input("samples", all.len())
                .value("c_r", c_r)
                .value("spread", spread),
        );
        out.verdicts.push(Verdict::le(
            format!("domination spread n={n}"),
            spread,
            cfg.tolerances.domination_spread,
        ));
    }
    Ok(out)
}

fn sample_region(mu: &AtomicMeasure) -> Result<Region> {
    let boxes: Vec<_> = mu
        .points()
        .iter()
        .map(|w| ball_chart_bounds(w, SAMPLE_RADIUS))
        .collect();
    Region::enclosing(mu.n(), &boxes)
}

/// `rho` log-uniform, `Re z_n` and `z'` uniform.
fn sample_log_height<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> SiegelPoint {
    let h = rng.random_range(region.rho_min.ln()..=region.rho_max.ln()).exp();
    let x = rng.random_range(-region.re_zn_bound..=region.re_zn_bound);
    let zp = sample_in_ball(rng, region.n - 1, region.zprime_radius);
    chart_unchecked(&zp, x, h)
}
