use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, Outcome, Record, Verdict};
use crate::chart::chart_unchecked;
use crate::error::Result;
use crate::geometry::{
    automorphism, ball_chart_bounds, ball_volume, bergman_kernel, bergman_metric, inverse_automorphism, rho, rho_form,
    SiegelPoint,
};
use crate::montecarlo::{mc_ball_lambda, mc_ball_volume};
use crate::quadrature::BallRule;
use crate::region::sample_in_ball;

const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_MC_SAMPLES: usize = 1_000_000;
const VOLUME_PAIRS: usize = 5;
const LAMBDA_CENTRES: usize = 5;
const SUBHARMONIC_SAMPLES: usize = 200;

pub(crate) fn random_point(rng: &mut ChaCha8Rng, n: usize) -> SiegelPoint {
    let h = rng.random_range(0.1f64.ln()..10f64.ln()).exp();
    let x = rng.random_range(-3.0..3.0);
    let zp = sample_in_ball(rng, n - 1, 1.5);
    chart_unchecked(&zp, x, h)
}

/// A point of `D(u, r)`: uniform in the chart box of `D(i, r)` by
/// rejection, then moved by `sigma_u^{-1}`.
fn point_near(rng: &mut ChaCha8Rng, u: &SiegelPoint, r: f64) -> Result<SiegelPoint> {
    let base = SiegelPoint::base(u.dim());
    let b = ball_chart_bounds(&base, r);
    loop {
        let h = rng.random_range(b.h.0..b.h.1);
        let x = rng.random_range(b.xn.0..b.xn.1);
        let zp = sample_in_ball(rng, u.dim() - 1, b.zprime_radius);
        let w = chart_unchecked(&zp, x, h);
        if bergman_metric(&base, &w)? < r {
            return inverse_automorphism(u, &w);
        }
    }
}

fn coord_distance(a: &SiegelPoint, b: &SiegelPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn identities(cfg: &ExperimentConfig, n: usize, samples: usize, out: &mut Outcome) -> Result<()> {
    let mut rng = cfg.rng(0x1d00 + n as u64);
    let base = SiegelPoint::base(n);
    let mut worst = [0.0f64; 6];
    for _ in 0..samples {
        let z = random_point(&mut rng, n);
        let u = random_point(&mut rng, n);
        let v = random_point(&mut rng, n);
        let rz = rho(&z);
        let ruv = rho_form(&u, &v)?;
        let su = automorphism(&z, &u)?;
        let sv = automorphism(&z, &v)?;
        let iu = inverse_automorphism(&z, &u)?;
        let iv = inverse_automorphism(&z, &v)?;
        let errs = [
            (rho_form(&su, &sv)? - ruv / rz).norm(),
            (rho_form(&iu, &iv)? - ruv * rz).norm(),
            (rho_form(&u, &v)? - rho_form(&v, &u)?.conj()).norm(),
            coord_distance(&automorphism(&z, &z)?, &base),
            coord_distance(&inverse_automorphism(&z, &su)?, &u),
            (bergman_metric(&su, &sv)? - bergman_metric(&u, &v)?).abs(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let names = [
        "automorphism_scaling",
        "inverse_automorphism_scaling",
        "hermitian_symmetry",
        "automorphism_centre",
        "round_trip",
        "metric_invariance",
    ];
    let mut rec = Record::new(format!("identities n={n}"))
        .input("n", n)
        .input("samples", samples);
    for (name, w) in names.iter().zip(worst) {
        rec.set(name, w);
        out.verdicts
            .push(Verdict::le(format!("{name} n={n}"), w, cfg.tolerances.identity));
    }
    out.records.push(rec);
    Ok(())
}

fn inequalities(cfg: &ExperimentConfig, n: usize, samples: usize, out: &mut Outcome) -> Result<()> {
    let mut rng = cfg.rng(0x1e00 + n as u64);
    let radii = [0.25, 0.5, 1.0, 2.0];
    let mut lower_violations = 0usize;
    let mut distortion_violations = 0usize;
    let mut worst_lower = f64::INFINITY;
    let mut worst_distortion = f64::INFINITY;
    for i in 0..samples {
        let z = random_point(&mut rng, n);
        let w = random_point(&mut rng, n);
        let lhs = 2.0 * rho_form(&z, &w)?.norm();
        let rhs = rho(&z).max(rho(&w));
        worst_lower = worst_lower.min(lhs / rhs);
        if lhs < rhs {
            lower_violations += 1;
        }

        let r = radii[i % radii.len()];
        let u = random_point(&mut rng, n);
        let v = point_near(&mut rng, &u, r)?;
        if bergman_metric(&u, &v)? > r {
            continue;
        }
        let t = r.tanh();
        let bound = (1.0 + t) / (1.0 - t);
        let q = rho_form(&z, &u)?.norm() / rho_form(&z, &v)?.norm();
        // margin to the nearer bound, in log scale; negative means violated
        let margin = bound.ln() - q.ln().abs();
        worst_distortion = worst_distortion.min(margin);
        if q > bound || q < 1.0 / bound {
            distortion_violations += 1;
        }
    }
    out.records.push(
        Record::new(format!("inequalities n={n}"))
            .input("n", n)
            .input("samples", samples)
            .value("lower_bound_min_ratio", worst_lower)
            .value("distortion_min_log_margin", worst_distortion),
    );
    out.verdicts.push(Verdict::le(
        format!("lower_bound_violations n={n}"),
        lower_violations as f64,
        0.0,
    ));
    out.verdicts.push(Verdict::le(
        format!("distortion_violations n={n}"),
        distortion_violations as f64,
        0.0,
    ));
    Ok(())
}

fn volumes(cfg: &ExperimentConfig, n: usize, out: &mut Outcome) -> Result<()> {
    let mut rng = cfg.rng(0x1f00 + n as u64);
    let mc = cfg.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let mut worst = 0.0f64;
    for k in 0..VOLUME_PAIRS {
        let z = random_point(&mut rng, n);
        let r = rng.random_range(0.2..1.5);
        let exact = ball_volume(&z, r)?;
        let est = mc_ball_volume(&z, r, mc, &mut rng)?;
        let rel = (est.value - exact).abs() / exact;
        worst = worst.max(rel);
        out.records.push(
            Record::new(format!("ball_volume n={n} #{k}"))
                .input("n", n)
                .input("r", r)
                .input("rho", rho(&z))
                .value("closed_form", exact)
                .value("monte_carlo", est.value)
                .value("std_error", est.std_error)
                .value("rel_diff", rel),
        );
    }
    out.verdicts.push(Verdict::le(
        format!("ball_volume_vs_mc n={n}"),
        worst,
        cfg.tolerances.volume_rel,
    ));

    let r = cfg.r;
    let mut lambdas = Vec::with_capacity(LAMBDA_CENTRES);
    for k in 0..LAMBDA_CENTRES {
        let z = random_point(&mut rng, n);
        let est = mc_ball_lambda(&z, r, mc, &mut rng)?;
        lambdas.push(est.value);
        out.records.push(
            Record::new(format!("ball_lambda n={n} #{k}"))
                .input("n", n)
                .input("r", r)
                .input("rho", rho(&z))
                .value("lambda", est.value)
                .value("std_error", est.std_error),
        );
    }
    let mean = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(0.0, f64::max);
    out.verdicts.push(Verdict::le(
        format!("ball_lambda_spread n={n}"),
        (hi - lo) / mean,
        cfg.tolerances.lambda_spread,
    ));
    Ok(())
}

/// `|K_w(z)|^p rho(z)^{n+1} / integral_{D(z,r)} |K_w|^p dV` over random
/// `z, w`. Distortion bounds the spread by `((1+T)/(1-T))^{2(n+1)p}`, `T = tanh r`.
fn subharmonic(cfg: &ExperimentConfig, n: usize, out: &mut Outcome) -> Result<()> {
    let mut rng = cfg.rng(0x2000 + n as u64);
    let r = cfg.r;
    let rule = BallRule::new(n, r, 6, 4)?;
    for p in [1.0, 2.0] {
        let mut ratios = Vec::with_capacity(SUBHARMONIC_SAMPLES);
        for i in 0..SUBHARMONIC_SAMPLES {
            let z = random_point(&mut rng, n);
            // every other sample puts the pole close to the ball
            let w = if i % 2 == 0 {
                random_point(&mut rng, n)
            } else {
                point_near(&mut rng, &z, 2.0 * r)?
            };
            let f = |u: &SiegelPoint| -> f64 {
                bergman_kernel(u, &w)
                    .map(|k: Complex64| k.norm().powf(p))
                    .unwrap_or(f64::NAN)
            };
            let integral = rule.integrate(&z, f);
            ratios.push(f(&z) * rho(&z).powi(n as i32 + 1) / integral);
        }
        let t = r.tanh();
        let bound = ((1.0 + t) / (1.0 - t)).powf(2.0 * (n as f64 + 1.0) * p);
        let spread = super::multiplicative_spread(&ratios);
        let sup = ratios.iter().copied().fold(0.0, f64::max);
        out.records.push(
            Record::new(format!("subharmonic n={n} p={p}"))
                .input("n", n)
                .input("p", p)
                .input("r", r)
                .value("sup_ratio", sup)
                .value("spread", spread)
                .value("distortion_bound", bound),
        );
        out.verdicts
            .push(Verdict::le(format!("subharmonic_spread n={n} p={p}"), spread, bound));
    }
    Ok(())
}

pub fn run_geometry_suite(cfg: &ExperimentConfig) -> Result<Outcome> {
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut out = Outcome::default();
    for n in cfg.dims() {
        identities(cfg, n, samples, &mut out)?;
        inequalities(cfg, n, samples, &mut out)?;
        // sampling boxes in dimension 3 and up are too sparse for the 1% target
        if n <= 2 {
            volumes(cfg, n, &mut out)?;
        }
        subharmonic(cfg, n, &mut out)?;
    }
    Ok(out)
}
