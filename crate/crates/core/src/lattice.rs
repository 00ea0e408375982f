//! Separated nets in the Bergman metric on a truncated region.
//!
//! A lattice is grown greedily from a shifted Halton sequence: a candidate
//! is accepted when it keeps Bergman distance at least `r/2` from every
//! point accepted so far. Distance queries are pruned with the bound
//! `|ln rho(z) - ln rho(w)| <= 2 beta(z, w)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::chart_unchecked;
use crate::error::{Error, Result};
use crate::geometry::{kernel_constant, metric_unchecked, rho, unit_ball_volume, SiegelPoint};
use crate::region::Region;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Seed used by [`overlap_count`], which takes no seed of its own.
const OVERLAP_SEED: u64 = 0x5eed_0f0e_71a9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeFields")]
pub struct Lattice {
    pub r: f64,
    pub region: Region,
    /// Points in acceptance order.
    pub points: Vec<SiegelPoint>,
}

#[derive(Deserialize)]
struct LatticeFields {
    r: f64,
    region: Region,
    points: Vec<SiegelPoint>,
}

impl TryFrom<LatticeFields> for Lattice {
    type Error = Error;
    fn try_from(f: LatticeFields) -> Result<Self> {
        Lattice::new(f.r, f.region, f.points)
    }
}

impl Lattice {
    /// Checks shapes only; use [`verify_covering`] and [`min_separation`]
    /// for the metric properties.
    pub fn new(r: f64, region: Region, points: Vec<SiegelPoint>) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lattice radius must be positive, got {r}"
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("a lattice needs at least one point".into()));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != region.n) {
            return Err(Error::DimensionMismatch {
                expected: region.n,
                found: p.dim(),
            });
        }
        Ok(Lattice { r, region, points })
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy without the point at `index`.
    pub fn without(&self, index: usize) -> Result<Lattice> {
        let mut points = self.points.clone();
        points.remove(index);
        Lattice::new(self.r, self.region.clone(), points)
    }
}

/// Tuning knobs for [`build_lattice_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeOptions {
    /// Candidates drawn; `None` picks a budget from the region's invariant volume.
    #[serde(default)]
    pub candidate_budget: Option<usize>,
    /// Samples used to certify covering after construction; 0 skips it.
    #[serde(default = "default_verify_samples")]
    pub verify_samples: usize,
}

fn default_verify_samples() -> usize {
    100_000
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions {
            candidate_budget: None,
            verify_samples: default_verify_samples(),
        }
    }
}

/// Points indexed by `ln rho` for pruned distance queries.
struct HeightIndex {
    keys: Vec<(f64, usize)>,
}

impl HeightIndex {
    fn new() -> Self {
        HeightIndex { keys: Vec::new() }
    }

    fn insert(&mut self, ln_rho: f64, idx: usize) {
        let pos = self.keys.partition_point(|&(k, _)| k < ln_rho);
        self.keys.insert(pos, (ln_rho, idx));
    }

    /// Indices whose `ln rho` lies within `width` of `ln_rho`.
    fn band(&self, ln_rho: f64, width: f64) -> impl Iterator<Item = usize> + '_ {
        let lo = self.keys.partition_point(|&(k, _)| k < ln_rho - width);
        let hi = self.keys.partition_point(|&(k, _)| k <= ln_rho + width);
        self.keys[lo..hi].iter().map(|&(_, i)| i)
    }

    fn from_points(points: &[SiegelPoint]) -> Self {
        let mut keys: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (rho(p).ln(), i)).collect();
        keys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        HeightIndex { keys }
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

/// Shifted Halton stream mapped into the region: log-uniform in height,
/// uniform in `Re z_n`, uniform in the `z'` ball (by rejection).
struct CandidateStream<'a> {
    region: &'a Region,
    shift: Vec<f64>,
    index: u64,
}

impl<'a> CandidateStream<'a> {
    fn new(region: &'a Region, seed: u64) -> Result<Self> {
        let dims = 2 * region.n;
        if dims > PRIMES.len() {
            return Err(Error::InvalidArgument(format!(
                "lattice construction supports n <= {}",
                PRIMES.len() / 2
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.random::<f64>()).collect();
        Ok(CandidateStream {
            region,
            shift,
            index: 0,
        })
    }

    /// Next Halton point; `None` when it falls outside the `z'` ball.
    fn next_raw(&mut self) -> Option<SiegelPoint> {
        self.index += 1;
        let u: Vec<f64> = self
            .shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(self.index, p) + s).fract())
            .collect();
        let reg = self.region;
        let h = reg.rho_min * (reg.rho_max / reg.rho_min).powf(u[0]);
        let x = reg.re_zn_bound * (2.0 * u[1] - 1.0);
        let m = reg.n - 1;
        let mut zp = Vec::with_capacity(m);
        let mut norm_sq = 0.0;
        for j in 0..m {
            let a = reg.zprime_radius * (2.0 * u[2 + 2 * j] - 1.0);
            let b = reg.zprime_radius * (2.0 * u[3 + 2 * j] - 1.0);
            norm_sq += a * a + b * b;
            zp.push(Complex64::new(a, b));
        }
        if norm_sq > reg.zprime_radius * reg.zprime_radius {
            return None;
        }
        Some(chart_unchecked(&zp, x, h))
    }
}

fn default_budget(region: &Region, r: f64) -> usize {
    let cell = kernel_constant(region.n) * unit_ball_volume(region.n, r / 4.0);
    let est = 64.0 * region.lambda_measure() / cell;
    est.clamp(2_000.0, 2_000_000.0) as usize
}

/// Greedy `r/2`-separated lattice with default options.
pub fn build_lattice(region: &Region, r: f64, seed: u64) -> Result<Lattice> {
    build_lattice_with(region, r, seed, &LatticeOptions::default())
}

pub fn build_lattice_with(region: &Region, r: f64, seed: u64, opts: &LatticeOptions) -> Result<Lattice> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lattice radius must be positive, got {r}"
        )));
    }
    let budget = opts.candidate_budget.unwrap_or_else(|| default_budget(region, r));
    if budget == 0 {
        return Err(Error::InvalidArgument("candidate budget must be positive".into()));
    }
    let mut stream = CandidateStream::new(region, seed)?;
    let mut points: Vec<SiegelPoint> = Vec::new();
    let mut index = HeightIndex::new();
    let sep = 0.5 * r;
    let mut drawn = 0usize;
    let max_attempts = budget.saturating_mul(64);
    let mut attempts = 0usize;
    while drawn < budget && attempts < max_attempts {
        attempts += 1;
        let Some(c) = stream.next_raw() else { continue };
        drawn += 1;
        let lc = rho(&c).ln();
        let close = index
            .band(lc, 2.0 * sep)
            .any(|i| metric_unchecked(&points[i], &c) < sep);
        if !close {
            index.insert(lc, points.len());
            points.push(c);
        }
    }
    let lat = Lattice::new(r, region.clone(), points)?;
    if opts.verify_samples > 0 {
        let report = verify_covering(&lat, opts.verify_samples, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        if let Some(worst) = report.worst_sample.as_ref().filter(|_| report.covered < report.samples) {
            return Err(Error::Construction {
                sample: worst.to_pairs(),
                gap: report.worst_gap,
            });
        }
    }
    Ok(lat)
}

/// Distance from `z` to the nearest lattice point, searching first within
/// the height band that can contain points closer than `radius`.
fn nearest_distance(points: &[SiegelPoint], index: &HeightIndex, z: &SiegelPoint, radius: f64) -> f64 {
    let lz = rho(z).ln();
    let near = index
        .band(lz, 2.0 * radius)
        .map(|i| metric_unchecked(&points[i], z))
        .fold(f64::INFINITY, f64::min);
    if near < radius {
        return near;
    }
    points
        .iter()
        .map(|p| metric_unchecked(p, z))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub samples: usize,
    pub covered: usize,
    pub fraction: f64,
    /// Largest distance from a sample to its nearest lattice point.
    pub worst_gap: f64,
    pub worst_sample: Option<SiegelPoint>,
}

/// Fraction of Lebesgue-uniform samples of the region lying in some `D(a_k, r)`.
pub fn verify_covering(lat: &Lattice, samples: usize, seed: u64) -> Result<CoverageReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<SiegelPoint> = (0..samples).map(|_| lat.region.sample_uniform(&mut rng)).collect();
    let index = HeightIndex::from_points(&lat.points);
    let gaps: Vec<f64> = pts
        .par_iter()
        .map(|z| nearest_distance(&lat.points, &index, z, lat.r))
        .collect();
    let covered = gaps.iter().filter(|&&g| g < lat.r).count();
    let (worst_idx, worst_gap) =
        gaps.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc },
        );
    Ok(CoverageReport {
        samples,
        covered,
        fraction: covered as f64 / samples as f64,
        worst_gap,
        worst_sample: Some(pts[worst_idx].clone()),
    })
}

/// Smallest pairwise Bergman distance (infinite for a single point).
pub fn min_separation(lat: &Lattice) -> f64 {
    let pts = &lat.points;
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            pts[i + 1..]
                .iter()
                .map(|q| metric_unchecked(&pts[i], q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Largest number of balls `D(a_k, radius)` containing one of `samples`
/// Lebesgue-uniform points of the region.
pub fn overlap_count(lat: &Lattice, radius: f64, samples: usize) -> Result<usize> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(OVERLAP_SEED);
    let pts: Vec<SiegelPoint> = (0..samples).map(|_| lat.region.sample_uniform(&mut rng)).collect();
    Ok(overlap_at(lat, radius, &pts))
}

/// Largest number of balls `D(a_k, radius)` containing one of `pts`.
pub fn overlap_at(lat: &Lattice, radius: f64, pts: &[SiegelPoint]) -> usize {
    let index = HeightIndex::from_points(&lat.points);
    pts.par_iter()
        .map(|z| {
            index
                .band(rho(z).ln(), 2.0 * radius)
                .filter(|&i| metric_unchecked(&lat.points[i], z) < radius)
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Families of lattice indices, pairwise more than `separation` apart within each family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedPartition {
    pub families: Vec<Vec<usize>>,
    pub separation: f64,
}

impl SeparatedPartition {
    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }
}

/// First-fit coloring, in lattice order, of the graph joining points at
/// distance `<= separation`.
pub fn partition_separated(lat: &Lattice, separation: f64) -> Result<SeparatedPartition> {
    if !(separation > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let pts = &lat.points;
    let index = HeightIndex::from_points(pts);
    let neighbours: Vec<Vec<usize>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut v: Vec<usize> = index
                .band(rho(&pts[i]).ln(), 2.0 * separation)
                .filter(|&j| j != i && metric_unchecked(&pts[i], &pts[j]) <= separation)
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut color = vec![usize::MAX; pts.len()];
    let mut families: Vec<Vec<usize>> = Vec::new();
    for i in 0..pts.len() {
        let used: Vec<usize> = neighbours[i]
            .iter()
            .map(|&j| color[j])
            .filter(|&c| c != usize::MAX)
            .collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        color[i] = c;
        if c == families.len() {
            families.push(Vec::new());
        }
        families[c].push(i);
    }
    Ok(SeparatedPartition { families, separation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_region() -> Region {
        Region::new(1, 0.5, 2.0, 1.0, 2.0).unwrap()
    }

    fn quick() -> LatticeOptions {
        LatticeOptions {
            candidate_budget: None,
            verify_samples: 20_000,
        }
    }

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn lattice_is_separated_and_covering() {
        let lat = build_lattice_with(&standard_region(), 0.5, 7, &quick()).unwrap();
        assert!(min_separation(&lat) >= 0.25);
        let rep = verify_covering(&lat, 20_000, 1).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!(lat.points.iter().all(|p| lat.region.contains(p)));
    }

    #[test]
    fn tiny_region_gives_single_point() {
        let region = Region::new(1, 1.0, 1.0 + 1e-4, 1.0, 1e-4).unwrap();
        let lat = build_lattice_with(&region, 0.5, 3, &quick()).unwrap();
        assert_eq!(lat.len(), 1);
        assert_eq!(verify_covering(&lat, 1000, 0).unwrap().fraction, 1.0);
    }

    #[test]
    fn removing_a_neighbourhood_breaks_covering() {
        let lat = build_lattice_with(&standard_region(), 0.5, 11, &quick()).unwrap();
        let centre = lat.points[lat.len() / 2].clone();
        let kept: Vec<SiegelPoint> = lat
            .points
            .iter()
            .filter(|p| metric_unchecked(p, &centre) >= lat.r)
            .cloned()
            .collect();
        let cut = Lattice::new(lat.r, lat.region.clone(), kept).unwrap();
        assert!(verify_covering(&cut, 20_000, 5).unwrap().fraction < 1.0);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_lattice_with(&standard_region(), 0.5, 42, &quick()).unwrap();
        let b = build_lattice_with(&standard_region(), 0.5, 42, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn starved_budget_is_a_construction_error() {
        let opts = LatticeOptions {
            candidate_budget: Some(3),
            verify_samples: 2000,
        };
        match build_lattice_with(&standard_region(), 0.5, 1, &opts) {
            Err(Error::Construction { gap, .. }) => assert!(gap >= 0.5),
            other => panic!("expected construction error, got {other:?}"),
        }
    }

    #[test]
    fn overlap_is_monotone_and_one_for_small_radius() {
        let lat = build_lattice_with(&standard_region(), 0.5, 2, &quick()).unwrap();
        assert_eq!(overlap_count(&lat, 0.12, 5000).unwrap(), 1);
        let counts: Vec<usize> = [0.12, 0.3, 0.6, 1.0]
            .iter()
            .map(|&r| overlap_count(&lat, r, 5000).unwrap())
            .collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    }

    #[test]
    fn partition_families_are_separated() {
        let lat = build_lattice_with(&standard_region(), 0.5, 2, &quick()).unwrap();
        assert_eq!(partition_separated(&lat, 0.2).unwrap().len(), 1);
        let part = partition_separated(&lat, 1.0).unwrap();
        let mut all: Vec<usize> = part.families.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..lat.len()).collect::<Vec<_>>());
        for fam in &part.families {
            for (k, &i) in fam.iter().enumerate() {
                for &j in &fam[k + 1..] {
                    assert!(metric_unchecked(&lat.points[i], &lat.points[j]) > 1.0);
                }
            }
        }
    }

    #[test]
    fn lattice_json_round_trip() {
        let lat = build_lattice_with(&standard_region(), 0.8, 2, &quick()).unwrap();
        let s = serde_json::to_vec(&lat).unwrap();
        assert_eq!(Lattice::from_json_slice(&s).unwrap(), lat);
        assert!(Lattice::from_json_slice(
            br#"{"r":0.5,"region":{"n":1,"rho_min":0.5,"rho_max":2,"re_zn_bound":1},"points":[]}"#
        )
        .is_err());
    }
}
