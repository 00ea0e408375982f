//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use siegel::experiments::{random_measure, run, ExperimentConfig, ExperimentReport, Record, Verdict};
use siegel::geometry::{rho, rho_form, SiegelPoint};
use siegel::measures::{AtomicMeasure, DensityMeasure, Measure};
use siegel::region::Region;
use siegel::schatten::{gram_matrix, power_inequality_check, schatten_norm, spectrum};
use siegel::transforms::berezin_transform;

const SEED: u64 = 20_240_601;

type Check = Result<(bool, String), String>;

fn tolerances() -> Value {
    json!({
        "identity": 1e-10,
        "volume_rel": 0.01,
        "lambda_spread": 0.02,
        "keylemma": 0.01,
        "trace_rel": 0.02,
        "band_spread": 100.0,
        "lattice_spread": 10.0,
        "homogeneity": 1e-9,
        "slope_rel": [0.10, 0.15],
        "convergence_rel": 0.02,
        "exact_rel": 1e-12,
        "domination_spread": 10.0
    })
}

fn run_config(mut cfg: Value) -> Result<ExperimentReport, String> {
    cfg["seed"] = json!(SEED);
    cfg["tolerances"] = tolerances();
    let cfg = ExperimentConfig::from_json_slice(cfg.to_string().as_bytes()).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())
}

fn selected(report: &ExperimentReport, pred: impl Fn(&str) -> bool) -> Vec<&Verdict> {
    report.verdicts.iter().filter(|v| pred(&v.name)).collect()
}

/// All selected verdicts passed, and at least `min` were selected.
fn all_passed(verdicts: &[&Verdict], min: usize) -> (bool, String) {
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| format!("{} = {:.3e} vs {:.3e}", v.name, v.measured, v.threshold))
        .collect();
    let ok = failed.is_empty() && verdicts.len() >= min;
    let detail = if failed.is_empty() {
        format!("{} checks", verdicts.len())
    } else {
        failed.join("; ")
    };
    (ok, detail)
}

fn worst(verdicts: &[&Verdict]) -> f64 {
    verdicts.iter().map(|v| v.measured).fold(0.0, f64::max)
}

fn records<'a>(report: &'a ExperimentReport, prefix: &str) -> Vec<&'a Record> {
    report.records.iter().filter(|r| r.label.starts_with(prefix)).collect()
}

fn at(x: f64, y: f64) -> SiegelPoint {
    SiegelPoint::new(vec![Complex64::new(x, y)]).unwrap()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn line(id: u8, title: &str, check: Check) -> bool {
    let (ok, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id:>2} {} {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn geometry_report() -> Result<(ExperimentReport, f64), String> {
    let start = Instant::now();
    let report = run_config(json!({"scenario": "geometry", "dims": [1, 2, 3], "samples": 10_000}))?;
    Ok((report, start.elapsed().as_secs_f64()))
}

fn identities(geo: &Result<(ExperimentReport, f64), String>) -> Check {
    let (report, secs) = geo.as_ref().map_err(Clone::clone)?;
    let names = [
        "automorphism_scaling",
        "inverse_automorphism_scaling",
        "hermitian_symmetry",
        "automorphism_centre",
        "round_trip",
        "metric_invariance",
    ];
    let v = selected(report, |s| names.iter().any(|n| s.starts_with(n)));
    let samples_ok = records(report, "identities")
        .iter()
        .all(|r| r.inputs["samples"].as_u64().unwrap_or(0) >= 10_000);

    // rho(z, w) = (i/2)(conj(w) - z) in one dimension.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut direct = 0.0f64;
    for _ in 0..1000 {
        let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(0.1..5.0));
        let w = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(0.1..5.0));
        let expected = Complex64::new(0.0, 0.5) * (w.conj() - z);
        let got = rho_form(&at(z.re, z.im), &at(w.re, w.im)).map_err(|e| e.to_string())?;
        direct = direct.max((got - expected).norm());
    }
    let (ok, detail) = all_passed(&v, 18);
    let ok = ok && samples_ok && direct < 1e-12 && *secs < 10.0;
    Ok((
        ok,
        format!(
            "{detail}, max error {:.2e}, direct rho error {direct:.1e}, {secs:.1}s",
            worst(&v)
        ),
    ))
}

fn inequalities(geo: &Result<(ExperimentReport, f64), String>) -> Check {
    let (report, _) = geo.as_ref().map_err(Clone::clone)?;
    let v = selected(report, |s| {
        (s.starts_with("lower_bound_violations") || s.starts_with("distortion_violations"))
            && (s.ends_with("n=1") || s.ends_with("n=2"))
    });

    // 2|rho(z,w)| >= max(rho(z), rho(w)) in one dimension from first principles.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (zx, zy): (f64, f64) = (rng.random_range(-5.0..5.0), 10f64.powf(rng.random_range(-2.0..2.0)));
        let (wx, wy): (f64, f64) = (rng.random_range(-5.0..5.0), 10f64.powf(rng.random_range(-2.0..2.0)));
        let r = 0.5 * ((wx - zx).powi(2) + (wy + zy).powi(2)).sqrt();
        if 2.0 * r < zy.max(wy) * (1.0 - 1e-14) {
            violations += 1;
        }
    }
    let (ok, detail) = all_passed(&v, 4);
    Ok((
        ok && violations == 0,
        format!("{detail}, {violations} direct violations"),
    ))
}

fn keylemma() -> Check {
    let start = Instant::now();
    let report = run_config(json!({"scenario": "keylemma", "dims": [1, 2]}))?;
    let secs = start.elapsed().as_secs_f64();
    let v: Vec<&Verdict> = report.verdicts.iter().collect();
    let rejected = v.iter().filter(|v| v.name.ends_with("rejected")).count();

    // C(n,s,t) rho^{-(s-t-n-1)} with integer gamma arguments.
    let mut oracle = 0.0f64;
    let mut evaluated = 0;
    for r in &report.records {
        let Some(&closed) = r.values.get("closed_form") else {
            continue;
        };
        let n = r.inputs["n"].as_u64().unwrap() as u32;
        let s = r.inputs["s"].as_f64().unwrap() as u32;
        let t = r.inputs["t"].as_f64().unwrap() as u32;
        let h = r.inputs["rho"].as_f64().unwrap();
        let c = 4.0 * PI.powi(n as i32) * factorial(t) * factorial(s - t - n - 2) / factorial(s / 2 - 1).powi(2);
        let expected = c / h.powi((s - t - n - 1) as i32);
        oracle = oracle.max((closed - expected).abs() / expected);
        evaluated += 1;
    }
    let (ok, detail) = all_passed(&v, 16);
    let ratio_err = worst(&selected(&report, |s| !s.ends_with("rejected")));
    let ok = ok && rejected >= 3 && evaluated >= 12 && oracle < 1e-12 && secs < 60.0;
    Ok((
        ok,
        format!("{detail}, worst |ratio-1| {ratio_err:.2e}, {rejected} rejections, closed form error {oracle:.1e}, {secs:.1}s"),
    ))
}

fn volumes(geo: &Result<(ExperimentReport, f64), String>) -> Check {
    let (report, _) = geo.as_ref().map_err(Clone::clone)?;
    let vol = selected(report, |s| s.starts_with("ball_volume_vs_mc"));
    let lam = selected(report, |s| s.starts_with("ball_lambda_spread"));
    let pairs = records(report, "ball_volume ");

    let mut oracle = 0.0f64;
    for r in &pairs {
        let n = r.inputs["n"].as_u64().unwrap() as i32;
        let radius = r.inputs["r"].as_f64().unwrap();
        let h = r.inputs["rho"].as_f64().unwrap();
        let t2 = radius.tanh().powi(2);
        let expected = 4.0 * PI.powi(n) / factorial(n as u32) * t2.powi(n) / (1.0 - t2).powi(n + 1) * h.powi(n + 1);
        oracle = oracle.max((r.values["closed_form"] - expected).abs() / expected);
    }
    let (ok_v, _) = all_passed(&vol, 2);
    let (ok_l, _) = all_passed(&lam, 2);
    let ok = ok_v && ok_l && pairs.len() >= 10 && oracle < 1e-12;
    Ok((
        ok,
        format!(
            "worst volume error {:.2e}, worst lambda spread {:.2e}, closed form error {oracle:.1e}",
            worst(&vol),
            worst(&lam)
        ),
    ))
}

fn normalization() -> Check {
    let region = Region::new(1, 1e-4, 1e4, 1.0, 1e4).map_err(|e| e.to_string())?;
    let mu = Measure::Density(DensityMeasure::lebesgue(region));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut err = 0.0f64;
    for _ in 0..20 {
        let z = at(rng.random_range(-2.0..2.0), 2f64.powf(rng.random_range(-2.0..2.0)));
        let v = berezin_transform(&mu, &z).map_err(|e| e.to_string())?;
        err = err.max((v - 1.0).abs());
    }
    Ok((err <= 0.02, format!("20 points, max |B(1)-1| {err:.2e}")))
}

fn rank_one() -> Check {
    let mu = AtomicMeasure::dirac(SiegelPoint::base(1));
    let sp = spectrum(&gram_matrix(&mu).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let expected = 1.0 / (4.0 * PI);
    let mut err = 0.0f64;
    for p in [0.4, 0.6, 1.0, 2.0] {
        let norm = schatten_norm(&sp, p).map_err(|e| e.to_string())?;
        err = err.max((norm - expected).abs() / expected);
    }
    Ok((err <= 1e-12, format!("max relative error {err:.1e}")))
}

fn trace() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let family: Vec<AtomicMeasure> = (0..10).map(|_| random_measure(&mut rng, 1, 1, 50)).collect();
    let start = Instant::now();
    let report = run_config(json!({
        "scenario": "trace",
        "dims": [1],
        "measure": {"kind": "inline", "measures": family},
    }))?;
    let secs = start.elapsed().as_secs_f64();

    // sum_j c_j K(w_j, w_j) = sum_j c_j / (4 pi rho_j^2) in one dimension.
    let mut oracle = 0.0f64;
    for (k, mu) in family.iter().enumerate() {
        let expected: f64 = mu
            .atoms()
            .iter()
            .map(|a| a.weight / (4.0 * PI * rho(&a.point).powi(2)))
            .sum();
        let rec = report
            .records
            .iter()
            .find(|r| r.label == format!("trace n=1 #{k}"))
            .ok_or(format!("missing record #{k}"))?;
        oracle = oracle.max((rec.values["eigen_trace"] - expected).abs() / expected);
    }
    let v = selected(&report, |s| s.starts_with("trace n=1 #"));
    let (ok, detail) = all_passed(&v, 10);
    let ok = ok && oracle < 1e-10 && secs < 300.0;
    Ok((
        ok,
        format!(
            "{detail}, worst relative gap {:.2e}, eigen trace error {oracle:.1e}, {secs:.1}s",
            worst(&v)
        ),
    ))
}

fn equivalence() -> Check {
    let report = run_config(json!({
        "scenario": "equivalence",
        "dims": [1],
        "instances": 20,
        "p_grid": [0.6, 1.0, 1.5, 2.0],
    }))?;
    let v: Vec<&Verdict> = report.verdicts.iter().collect();
    let (ok, detail) = all_passed(&v, 4 * 4 + 3);
    let mut finite = true;
    let recs: Vec<&Record> = report
        .records
        .iter()
        .filter(|r| r.label.starts_with("equivalence n=1 #"))
        .collect();
    for r in &recs {
        let p = r.inputs["p"].as_f64().unwrap();
        let mut keys = vec!["q1", "q2", "q2_alt", "q3"];
        if p > 0.5 {
            keys.push("q4");
        }
        finite &= keys
            .iter()
            .all(|k| r.values.get(*k).is_some_and(|x| x.is_finite() && *x > 0.0));
    }
    let band = worst(&selected(&report, |s| {
        s.starts_with("q1_over") || s.starts_with("q2_over_q3")
    }));
    let lat = worst(&selected(&report, |s| s.starts_with("q2_over_q2_alt")));
    let ok = ok && finite && recs.len() >= 80;
    Ok((
        ok,
        format!("{detail}, widest band {band:.2}, lattice spread {lat:.2}, all quantities positive: {finite}"),
    ))
}

fn cutoff() -> Check {
    let report = run_config(json!({"scenario": "cutoff", "dims": [1, 2]}))?;
    let v: Vec<&Verdict> = report.verdicts.iter().collect();
    let c = 2.0 / 3.0;
    let expected: Vec<String> = [
        "slope n=1 p=0.3".to_string(),
        "slope n=1 p=0.4".to_string(),
        "converges n=1 p=0.6".to_string(),
        "converges n=1 p=0.75".to_string(),
        "slope n=2 p=0.5".to_string(),
        format!("slope n=2 p={}", c - 0.1),
        format!("slope n=2 p={}", c + 0.1),
    ]
    .into();
    let missing: Vec<&String> = expected.iter().filter(|e| !v.iter().any(|x| &x.name == *e)).collect();
    let k_ii = 1.0 / (4.0 * PI);
    let mut norm_err = 0.0f64;
    for r in records(&report, "cutoff n=1") {
        norm_err = norm_err.max((r.values["schatten_norm"] - k_ii).abs() / k_ii);
    }
    let (ok, detail) = all_passed(&v, 14);
    let slopes = selected(&report, |s| s.starts_with("slope"));
    let gaps = selected(&report, |s| s.starts_with("converges"));
    let ok = ok && missing.is_empty() && norm_err <= 1e-12;
    Ok((
        ok,
        format!(
            "{detail}, worst slope error {:.2e}, worst final gap {:.2e}, rank-one norm error {norm_err:.1e}",
            worst(&slopes),
            worst(&gaps)
        ),
    ))
}

fn power_inequality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let mut violations = 0;
    let mut rhs_err = 0.0f64;
    for trial in 0..10_000 {
        let n = 1 + trial % 2;
        let mu = random_measure(&mut rng, n, 1, 6);
        let g = gram_matrix(&mu).map_err(|e| e.to_string())?;
        let mut x: Vec<Complex64> = (0..g.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|c| *c /= norm);
        let p = rng.random_range(1.0..3.0);
        let check = power_inequality_check(&g, p, &x).map_err(|e| e.to_string())?;
        if check.lhs < check.rhs - 1e-10 {
            violations += 1;
        }
        // <Gx, x> straight from the matrix.
        let m = g.matrix();
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..x.len() {
            for j in 0..x.len() {
                quad += x[i].conj() * m[(i, j)] * x[j];
            }
        }
        let expected = quad.re.powf(p);
        if expected > 1e-300 {
            rhs_err = rhs_err.max((check.rhs - expected).abs() / expected);
        }
    }
    Ok((
        violations == 0 && rhs_err < 1e-8,
        format!("10000 trials, {violations} violations, quadratic form error {rhs_err:.1e}"),
    ))
}

fn domination() -> Check {
    let report = run_config(json!({
        "scenario": "domination",
        "dims": [1],
        "r": 0.5,
        "instances": 5,
        "samples": 100,
    }))?;
    let v: Vec<&Verdict> = report.verdicts.iter().collect();
    let (ok, detail) = all_passed(&v, 2);
    let spread = worst(&selected(&report, |s| s.starts_with("domination spread")));
    Ok((ok, format!("{detail}, spread {spread:.2}")))
}

#[test]
fn acceptance() {
    let geo = geometry_report();
    let results = [
        line(1, "algebraic identities", identities(&geo)),
        line(2, "metric inequalities", inequalities(&geo)),
        line(3, "key integral", keylemma()),
        line(4, "ball volume", volumes(&geo)),
        line(5, "normalization", normalization()),
        line(6, "rank-one exactness", rank_one()),
        line(7, "trace formula", trace()),
        line(8, "equivalence bands", equivalence()),
        line(9, "cutoff sharpness", cutoff()),
        line(10, "power inequality", power_inequality()),
        line(11, "domination", domination()),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
