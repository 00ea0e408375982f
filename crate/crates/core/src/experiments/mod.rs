//! Config-driven scenario runner with machine-readable reports.

mod cutoff;
mod domination;
mod equivalence;
mod geometry;
mod keylemma;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{rho, SiegelPoint};
use crate::measures::{Atom, AtomicMeasure};
use crate::quadrature::{BallIntegrator, QuadratureSpec};
use crate::region::{sample_in_ball, Region};

pub use cutoff::{increment_slope, run_cutoff};
pub use domination::run_domination;
pub use equivalence::run_equivalence;
pub use geometry::run_geometry_suite;
pub use keylemma::run_keylemma;
pub use trace::run_trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Geometry,
    Keylemma,
    Equivalence,
    Cutoff,
    Trace,
    Domination,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Geometry,
        Scenario::Keylemma,
        Scenario::Equivalence,
        Scenario::Cutoff,
        Scenario::Trace,
        Scenario::Domination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Geometry => "geometry",
            Scenario::Keylemma => "keylemma",
            Scenario::Equivalence => "equivalence",
            Scenario::Cutoff => "cutoff",
            Scenario::Trace => "trace",
            Scenario::Domination => "domination",
        }
    }

    fn default_dims(self) -> Vec<usize> {
        match self {
            Scenario::Geometry => vec![1, 2, 3],
            Scenario::Keylemma | Scenario::Cutoff => vec![1, 2],
            Scenario::Equivalence | Scenario::Trace | Scenario::Domination => vec![1],
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {s:?}")))
    }
}

/// Where the atomic measures of a suite come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    /// Atoms with `rho` log-uniform in `[0.5, 2]`, `Re z_n` uniform in
    /// `[-2, 2]`, `z'` uniform in the unit ball and weights uniform in `[0.5, 2]`.
    Random {
        #[serde(default)]
        min_atoms: Option<usize>,
        #[serde(default)]
        max_atoms: Option<usize>,
    },
    /// A JSON file holding one measure or an array of measures.
    File {
        path: PathBuf,
    },
    Inline {
        measures: Vec<AtomicMeasure>,
    },
}

impl Default for MeasureSource {
    fn default() -> Self {
        MeasureSource::Random {
            min_atoms: None,
            max_atoms: None,
        }
    }
}

/// Quadrature overrides; unset fields take the scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_refinements: Option<usize>,
    /// Levels of outward growth of the level-0 region around the foci.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_levels: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct QuadDefaults {
    pub order: usize,
    pub sphere_order: usize,
    pub panel_ratio: f64,
    pub rel_tol: f64,
    pub max_refinements: usize,
    pub base_levels: usize,
    pub tail_levels: usize,
}

impl QuadratureSettings {
    pub(crate) fn resolve(&self, d: QuadDefaults) -> QuadDefaults {
        QuadDefaults {
            order: self.order.unwrap_or(d.order),
            sphere_order: self.sphere_order.unwrap_or(d.sphere_order),
            panel_ratio: self.panel_ratio.unwrap_or(d.panel_ratio),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            max_refinements: self.max_refinements.unwrap_or(d.max_refinements),
            base_levels: self.base_levels.unwrap_or(d.base_levels),
            tail_levels: self.tail_levels.unwrap_or(d.tail_levels),
        }
    }
}

impl QuadDefaults {
    pub(crate) fn spec(&self, region: Region) -> Result<QuadratureSpec> {
        let mut spec = QuadratureSpec::new(region)
            .with_order(self.order)
            .with_rel_tol(self.rel_tol)
            .with_tail_levels(self.tail_levels);
        spec.sphere_order = self.sphere_order;
        spec.panel_ratio = self.panel_ratio;
        spec.max_refinements = self.max_refinements;
        spec.validate()?;
        Ok(spec)
    }

    pub(crate) fn ball_integrator(&self, n: usize, r: f64) -> Result<BallIntegrator> {
        BallIntegrator::new(n, r, self.order, self.sphere_order, self.rel_tol, self.max_refinements)
    }
}

/// Acceptance thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Maximum absolute error of exact algebraic identities.
    pub identity: f64,
    /// Relative gap between closed-form and Monte Carlo ball volumes.
    pub volume_rel: f64,
    /// Relative spread `(max - min) / mean` of `lambda(D(z, r))` over centres.
    pub lambda_spread: f64,
    /// `|numeric / closed form - 1|` for the key integral.
    pub keylemma: f64,
    /// Relative gap in the trace identity.
    pub trace_rel: f64,
    /// Multiplicative spread of each ratio band in the equivalence suite.
    pub band_spread: f64,
    /// Multiplicative spread of the ratio between two lattice sums.
    pub lattice_spread: f64,
    /// Relative error of `Q(2 mu) / Q(mu) = 2^p`.
    pub homogeneity: f64,
    /// Relative slope error, indexed by `n - 1`; the last entry covers larger `n`.
    pub slope_rel: Vec<f64>,
    /// Relative gap between the last two sweep values of a convergent integral.
    pub convergence_rel: f64,
    /// Relative error of rank-one Schatten norms.
    pub exact_rel: f64,
    /// Multiplicative spread of the fitted domination constant.
    pub domination_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            volume_rel: 0.01,
            lambda_spread: 0.02,
            keylemma: 0.01,
            trace_rel: 0.02,
            band_spread: 100.0,
            lattice_spread: 10.0,
            homogeneity: 1e-9,
            slope_rel: vec![0.10, 0.15],
            convergence_rel: 0.02,
            exact_rel: 1e-12,
            domination_spread: 10.0,
        }
    }
}

impl Tolerances {
    pub fn slope_rel_for(&self, n: usize) -> f64 {
        let i = (n - 1).min(self.slope_rel.len().saturating_sub(1));
        self.slope_rel.get(i).copied().unwrap_or(0.1)
    }
}

/// The `rho_min` sweep `eps = 2^-k`, `k = eps_max_exp..=eps_min_exp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub eps_max_exp: u32,
    pub eps_min_exp: u32,
    /// Number of deepest increments entering the slope fit.
    pub fit_points: usize,
    /// Outer truncation `2^outer_exp` of height and `Re z_n`.
    pub outer_exp: u32,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            eps_max_exp: 2,
            eps_min_exp: 20,
            fit_points: 8,
            outer_exp: 12,
        }
    }
}

fn default_r() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Dimensions to run; empty means the scenario default.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Region for region-based scenarios; derived from the measures when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    /// Lattice and averaging radius.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Exponents; empty means the scenario default.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub measure: MeasureSource,
    #[serde(default)]
    pub seed: u64,
    /// Number of measures in a family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    /// Random samples per check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Monte Carlo samples per ball.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            dims: Vec::new(),
            region: None,
            r: default_r(),
            p_grid: Vec::new(),
            measure: MeasureSource::default(),
            seed: 0,
            instances: None,
            samples: None,
            mc_samples: None,
            quadrature: QuadratureSettings::default(),
            tolerances: Tolerances::default(),
            sweep: SweepSettings::default(),
            output: None,
        }
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&n) = self.dims.iter().find(|&&n| n == 0 || n > 8) {
            return Err(Error::InvalidArgument(format!("dimension {n} outside 1..=8")));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidArgument(format!("r must be positive, got {}", self.r)));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "p grid values must be positive, got {p}"
            )));
        }
        if self.instances == Some(0) || self.samples == Some(0) || self.mc_samples == Some(0) {
            return Err(Error::InvalidArgument(
                "instance and sample counts must be positive".into(),
            ));
        }
        if let Some(region) = &self.region {
            if let Some(&n) = self.dims.iter().find(|&&n| n != region.n) {
                return Err(Error::DimensionMismatch {
                    expected: region.n,
                    found: n,
                });
            }
        }
        let s = &self.sweep;
        if s.eps_min_exp < s.eps_max_exp + 2 || s.eps_min_exp > 40 || s.fit_points < 2 {
            return Err(Error::InvalidArgument(
                "sweep needs eps_min_exp >= eps_max_exp + 2, eps_min_exp <= 40 and fit_points >= 2".into(),
            ));
        }
        if let MeasureSource::Random {
            min_atoms: Some(lo),
            max_atoms: Some(hi),
        } = self.measure
        {
            if lo > hi {
                return Err(Error::InvalidArgument("min_atoms exceeds max_atoms".into()));
            }
        }
        let q = &self.quadrature;
        if q.order == Some(0) || q.sphere_order == Some(0) {
            return Err(Error::InvalidArgument("quadrature orders must be positive".into()));
        }
        if q.panel_ratio.is_some_and(|r| !(r > 1.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("panel_ratio must exceed 1".into()));
        }
        if q.rel_tol.is_some_and(|t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        if self.dims.is_empty() {
            self.scenario.default_dims()
        } else {
            self.dims.clone()
        }
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// The measure family of a suite: `count` random measures or the
    /// measures read from the configured source.
    pub(crate) fn measures(&self, n: usize, count: usize, default_atoms: (usize, usize)) -> Result<Vec<AtomicMeasure>> {
        let list = match &self.measure {
            MeasureSource::Random { min_atoms, max_atoms } => {
                let lo = min_atoms.unwrap_or(default_atoms.0).max(1);
                let hi = max_atoms.unwrap_or(default_atoms.1).max(lo);
                let mut rng = self.rng(0x6d65_6173 + n as u64);
                (0..count).map(|_| random_measure(&mut rng, n, lo, hi)).collect()
            }
            MeasureSource::File { path } => {
                let bytes = std::fs::read(path)?;
                parse_measures(&bytes)?
            }
            MeasureSource::Inline { measures } => measures.clone(),
        };
        if let Some(m) = list.iter().find(|m| m.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.n(),
            });
        }
        Ok(list)
    }
}

/// One measure or an array of measures.
pub fn parse_measures(bytes: &[u8]) -> Result<Vec<AtomicMeasure>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<AtomicMeasure>),
        One(AtomicMeasure),
    }
    Ok(match serde_json::from_slice(bytes)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(m) => vec![m],
    })
}

/// A draw from the random atomic family described on [`MeasureSource::Random`].
pub fn random_measure<R: Rng + ?Sized>(rng: &mut R, n: usize, min_atoms: usize, max_atoms: usize) -> AtomicMeasure {
    let count = rng.random_range(min_atoms..=max_atoms);
    let atoms = (0..count)
        .map(|_| {
            let h = (rng.random_range(0.5f64.ln()..=2f64.ln())).exp();
            let x = rng.random_range(-2.0..=2.0);
            let zp = sample_in_ball(rng, n - 1, 1.0);
            Atom {
                point: chart_unchecked(&zp, x, h),
                weight: rng.random_range(0.5..=2.0),
            }
        })
        .collect();
    AtomicMeasure::new(n, atoms).expect("random atoms are valid")
}

/// Region spanning `rho * [4^-levels, 4^levels]` around all atoms, with
/// `Re z_n` and `z'` margins grown like [`Region::around`].
pub fn region_around_points(n: usize, points: &[SiegelPoint], levels: usize) -> Result<Region> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points to enclose".into()));
    }
    let f = 4f64.powi(levels as i32);
    let hs: Vec<f64> = points.iter().map(rho).collect();
    let h_lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let h_hi = hs.iter().copied().fold(0.0, f64::max);
    let x = points.iter().map(|p| p.zn().re.abs()).fold(0.0, f64::max);
    let zp = points
        .iter()
        .map(|p| p.zprime().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Region::new(
        n,
        h_lo / f,
        h_hi * f,
        zp + h_hi.sqrt() * 2f64.powi(levels as i32),
        x + h_hi * f,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured <= threshold`
    Le,
    /// `measured >= threshold`
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn le(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            measured,
            threshold,
            relation: Relation::Le,
            passed: measured.is_finite() && measured <= threshold,
            note: None,
        }
    }

    pub fn ge(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            measured,
            threshold,
            relation: Relation::Ge,
            passed: measured.is_finite() && measured >= threshold,
            note: None,
        }
    }

    /// A failed verdict for a check that could not be evaluated.
    pub fn inconclusive(name: impl Into<String>, threshold: f64, relation: Relation, why: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            measured: f64::NAN,
            threshold,
            relation,
            passed: false,
            note: Some(why.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// One case of a suite. Non-finite quantities are dropped from `values`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub label: String,
    pub inputs: BTreeMap<String, Value>,
    pub values: BTreeMap<String, f64>,
}

impl Record {
    pub fn new(label: impl Into<String>) -> Self {
        Record {
            label: label.into(),
            ..Record::default()
        }
    }

    pub fn input(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.inputs.insert(key.to_string(), v.into());
        self
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.set(key, v);
        self
    }

    pub fn set(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.values.insert(key.to_string(), v);
        }
    }
}

/// Records and verdicts produced by a scenario.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub verdicts: Vec<Verdict>,
    pub errors: Vec<String>,
}

impl Outcome {
    pub(crate) fn extend(&mut self, other: Outcome) {
        self.records.extend(other.records);
        self.verdicts.extend(other.verdicts);
        self.errors.extend(other.errors);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub verdicts: Vec<Verdict>,
    /// Per-instance failures that did not abort the suite.
    pub errors: Vec<String>,
    pub runtime_secs: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the runtime zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.runtime_secs = 0.0;
        Ok(serde_json::to_string(&copy)?)
    }

    /// Records as CSV: `label`, then the sorted input keys, then the sorted value keys.
    pub fn records_csv(&self) -> String {
        let inputs: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.inputs.keys().map(String::as_str))
            .collect();
        let values: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.values.keys().map(String::as_str))
            .collect();
        let mut out = String::from("label");
        for k in inputs.iter().chain(&values) {
            out.push(',');
            out.push_str(&csv_field(k));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&csv_field(&r.label));
            for k in &inputs {
                out.push(',');
                match r.inputs.get(*k) {
                    Some(Value::String(s)) => out.push_str(&csv_field(s)),
                    Some(v) => out.push_str(&csv_field(&v.to_string())),
                    None => {}
                }
            }
            for k in &values {
                out.push(',');
                if let Some(v) = r.values.get(*k) {
                    out.push_str(&format!("{v:e}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn verdicts_csv(&self) -> String {
        let mut out = String::from("name,measured,relation,threshold,passed\n");
        for v in &self.verdicts {
            let rel = match v.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
            };
            out.push_str(&format!(
                "{},{:e},{rel},{:e},{}\n",
                csv_field(&v.name),
                v.measured,
                v.threshold,
                v.passed
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs the configured scenario.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let outcome = match config.scenario {
        Scenario::Geometry => run_geometry_suite(config)?,
        Scenario::Keylemma => run_keylemma(config)?,
        Scenario::Equivalence => run_equivalence(config)?,
        Scenario::Cutoff => run_cutoff(config)?,
        Scenario::Trace => run_trace(config)?,
        Scenario::Domination => run_domination(config)?,
    };
    Ok(ExperimentReport {
        scenario: config.scenario,
        config: config.clone(),
        records: outcome.records,
        verdicts: outcome.verdicts,
        errors: outcome.errors,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// `max / min` of positive values; infinite if any value is not finite and positive.
pub fn multiplicative_spread(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return f64::INFINITY;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    hi / lo
}
