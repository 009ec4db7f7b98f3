//! Parameter schedules, per-point estimation, classification and the
//! corpus-level dimension report.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{build_local_pair, Budget};
use crate::geometry::{
    ball_query, build_neighborhood_graph, component_centers, farthest_point_subsample,
    inner_vertex_set, GeometryError, PointCloud, SubsampleTarget,
};
use crate::homology::{local_profile, LocalHomologyProfile};

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("sampling too coarse for guarantee: epsilon {epsilon} >= rho/58 = {limit}")]
    TooCoarse { epsilon: f64, limit: f64 },
    #[error("alpha {alpha} outside [{lo}, {hi}]")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Strict,
    Relaxed,
    Manual,
}

/// Scales of the two Rips pairs around a base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub r: f64,
    /// Highest homology dimension; `None` means `min(d - 1, 7)`.
    pub k_max: Option<usize>,
    pub mode: ScheduleMode,
}

/// Lower end of the admissible `alpha` range, `((ε+ρ) - √(ε²+ρ²-6ερ)) / 2`.
pub fn theta1(epsilon: f64, rho: f64) -> f64 {
    ((epsilon + rho) - (epsilon * epsilon + rho * rho - 6.0 * epsilon * rho).sqrt()) / 2.0
}

/// Upper end of the admissible `alpha` range, `(ρ - 13ε) / 22`.
pub fn alpha_max(epsilon: f64, rho: f64) -> f64 {
    (rho - 13.0 * epsilon) / 22.0
}

fn finite_positive(name: &str, v: f64) -> Result<(), ScheduleError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ScheduleError::Invalid(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Strict schedule from sampling density and reach. Without `alpha` the
/// midpoint of `[θ1, (ρ-13ε)/22]` is used; then `η1 = 9α+4ε`,
/// `η2 = η1+12α+6ε`, `r = η1+η2`.
pub fn parameter_schedule(
    epsilon: f64,
    rho: f64,
    alpha: Option<f64>,
) -> Result<ParamSchedule, ScheduleError> {
    finite_positive("epsilon", epsilon)?;
    finite_positive("rho", rho)?;
    let limit = rho / 58.0;
    if epsilon >= limit {
        return Err(ScheduleError::TooCoarse { epsilon, limit });
    }
    let lo = theta1(epsilon, rho);
    let hi = alpha_max(epsilon, rho);
    let alpha = match alpha {
        Some(a) if !(lo..=hi).contains(&a) => {
            return Err(ScheduleError::AlphaOutOfRange { alpha: a, lo, hi })
        }
        Some(a) => a,
        None => (lo + hi) / 2.0,
    };
    let eta1 = 9.0 * alpha + 4.0 * epsilon;
    let eta2 = eta1 + 12.0 * alpha + 6.0 * epsilon;
    let schedule = ParamSchedule {
        epsilon: Some(epsilon),
        rho: Some(rho),
        alpha,
        eta1,
        eta2,
        r: eta1 + eta2,
        k_max: None,
        mode: ScheduleMode::Strict,
    };
    schedule.validate()?;
    Ok(schedule)
}

impl ParamSchedule {
    /// Direct scales with only ordering checks: `0 < α` and `0 < η1 < η2 < r`.
    pub fn manual(
        alpha: f64,
        eta1: f64,
        eta2: f64,
        r: f64,
        k_max: Option<usize>,
    ) -> Result<Self, ScheduleError> {
        let s = Self {
            epsilon: None,
            rho: None,
            alpha,
            eta1,
            eta2,
            r,
            k_max,
            mode: ScheduleMode::Manual,
        };
        s.validate()?;
        Ok(s)
    }

    /// Scales checked against the looser offset-level conditions
    /// `η1 >= 3α+4ε`, `η2 >= η1+4α+6ε`, `r > η2+2α+6ε`, with the larger
    /// pair at `3α`. This is an offset-space guarantee, not a Rips one.
    pub fn relaxed(
        epsilon: f64,
        alpha: f64,
        eta1: f64,
        eta2: f64,
        r: f64,
        k_max: Option<usize>,
    ) -> Result<Self, ScheduleError> {
        let s = Self {
            epsilon: Some(epsilon),
            rho: None,
            alpha,
            eta1,
            eta2,
            r,
            k_max,
            mode: ScheduleMode::Relaxed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_k_max(mut self, k_max: Option<usize>) -> Self {
        self.k_max = k_max;
        self
    }

    /// Highest homology dimension for an ambient dimension `d`.
    pub fn effective_k_max(&self, ambient_dim: usize) -> usize {
        self.k_max
            .unwrap_or_else(|| ambient_dim.saturating_sub(1).min(7))
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        finite_positive("alpha", self.alpha)?;
        finite_positive("eta1", self.eta1)?;
        if !(self.eta1 < self.eta2 && self.eta2 < self.r) || !self.r.is_finite() {
            return Err(ScheduleError::Invalid(format!(
                "need eta1 < eta2 < r, got {} / {} / {}",
                self.eta1, self.eta2, self.r
            )));
        }
        match self.mode {
            ScheduleMode::Manual => Ok(()),
            ScheduleMode::Relaxed => {
                let eps = self.epsilon.unwrap_or(0.0);
                finite_positive("epsilon", eps)?;
                let a = self.alpha;
                let checks = [
                    (self.eta1 >= 3.0 * a + 4.0 * eps, "eta1 >= 3α + 4ε"),
                    (
                        self.eta2 >= self.eta1 + 4.0 * a + 6.0 * eps,
                        "eta2 >= eta1 + 4α + 6ε",
                    ),
                    (
                        self.r > self.eta2 + 2.0 * a + 6.0 * eps,
                        "r > eta2 + 2α + 6ε",
                    ),
                ];
                match checks.iter().find(|(ok, _)| !ok) {
                    Some((_, what)) => Err(ScheduleError::Invalid(format!("relaxed: {what}"))),
                    None => Ok(()),
                }
            }
            ScheduleMode::Strict => {
                let (Some(eps), Some(rho)) = (self.epsilon, self.rho) else {
                    return Err(ScheduleError::Invalid(
                        "strict mode needs epsilon and rho".into(),
                    ));
                };
                if eps >= rho / 58.0 {
                    return Err(ScheduleError::TooCoarse {
                        epsilon: eps,
                        limit: rho / 58.0,
                    });
                }
                let (lo, hi) = (theta1(eps, rho), alpha_max(eps, rho));
                if !(lo..=hi).contains(&self.alpha) {
                    return Err(ScheduleError::AlphaOutOfRange {
                        alpha: self.alpha,
                        lo,
                        hi,
                    });
                }
                let a = self.alpha;
                let checks = [
                    (self.eta1 >= 9.0 * a + 4.0 * eps, "eta1 >= 9α + 4ε"),
                    (
                        self.eta2 >= self.eta1 + 12.0 * a + 6.0 * eps,
                        "eta2 >= eta1 + 12α + 6ε",
                    ),
                    (self.r >= self.eta1 + self.eta2, "r >= eta1 + eta2"),
                    (eps < self.eta1 && self.eta2 < rho, "ε < eta1, eta2 < ρ"),
                ];
                match checks.iter().find(|(ok, _)| !ok) {
                    Some((_, what)) => Err(ScheduleError::Invalid(format!("strict: {what}"))),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Outcome at one base point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Trivial,
    Sphere(usize),
    NonSphere,
    Skipped(String),
}

impl Classification {
    pub fn of(profile: &LocalHomologyProfile) -> Self {
        if profile.is_trivial() {
            Classification::Trivial
        } else if let Some(n) = profile.sphere_dimension() {
            Classification::Sphere(n)
        } else {
            Classification::NonSphere
        }
    }

    pub fn sphere_dimension(&self) -> Option<usize> {
        match self {
            Classification::Sphere(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Trivial => write!(f, "trivial"),
            Classification::Sphere(n) => write!(f, "sphere({n})"),
            Classification::NonSphere => write!(f, "non-sphere"),
            Classification::Skipped(why) => write!(f, "skipped: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePointResult {
    pub index: Option<usize>,
    pub ranks: Option<LocalHomologyProfile>,
    pub class: Classification,
    /// Size of the largest vertex set, `P_{3α,r}`.
    pub neighbors: usize,
    pub millis: Option<u64>,
}

/// Runs the full local computation at ambient point `p`.
pub fn estimate_local(
    cloud: &PointCloud,
    p: &[f64],
    schedule: &ParamSchedule,
    budget: Budget,
) -> BasePointResult {
    let k_max = schedule.effective_k_max(cloud.dim());
    let neighbors = inner_vertex_set(cloud, p, 3.0 * schedule.alpha, schedule.r)
        .map(|v| v.len())
        .unwrap_or(0);
    let skipped = |why: String| BasePointResult {
        index: None,
        ranks: None,
        class: Classification::Skipped(why),
        neighbors,
        millis: None,
    };
    let pair = match build_local_pair(cloud, p, schedule, k_max, budget) {
        Ok(pair) => pair,
        Err(e) => return skipped(e.to_string()),
    };
    match local_profile(&pair, k_max) {
        Ok(profile) => BasePointResult {
            index: None,
            class: Classification::of(&profile),
            ranks: Some(profile),
            neighbors,
            millis: None,
        },
        Err(e) => skipped(e.to_string()),
    }
}

/// How base points are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSelection {
    /// Farthest-point subsample with pairwise spacing at least `min_dist`.
    Sparse {
        min_dist: f64,
        seed: u64,
    },
    /// Graph centers of components with at least `min_size` points.
    Centers {
        edge_len: f64,
        min_size: usize,
    },
    All,
    List(Vec<usize>),
}

impl BaseSelection {
    pub fn select(&self, cloud: &PointCloud) -> Result<Vec<usize>, GeometryError> {
        let mut idx = match self {
            BaseSelection::Sparse { min_dist, seed } => {
                farthest_point_subsample(cloud, SubsampleTarget::MinDist(*min_dist), *seed)?
            }
            BaseSelection::Centers { edge_len, min_size } => {
                component_centers(&build_neighborhood_graph(cloud, *edge_len)?, *min_size)
            }
            BaseSelection::All => (0..cloud.len()).collect(),
            BaseSelection::List(list) => {
                if let Some(&bad) = list.iter().find(|&&i| i >= cloud.len()) {
                    return Err(GeometryError::InvalidParameter(format!(
                        "base point index {bad} out of range for {} points",
                        cloud.len()
                    )));
                }
                list.clone()
            }
        };
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub trivial: usize,
    pub non_sphere: usize,
    pub skipped: usize,
    /// Sphere(n) counts keyed by n.
    pub spheres: BTreeMap<usize, usize>,
}

impl Tallies {
    pub fn from_classes<'a>(classes: impl IntoIterator<Item = &'a Classification>) -> Self {
        let mut t = Tallies::default();
        for c in classes {
            match c {
                Classification::Trivial => t.trivial += 1,
                Classification::NonSphere => t.non_sphere += 1,
                Classification::Skipped(_) => t.skipped += 1,
                Classification::Sphere(n) => *t.spheres.entry(*n).or_default() += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.trivial + self.non_sphere + self.skipped + self.valid()
    }

    pub fn valid(&self) -> usize {
        self.spheres.values().sum()
    }

    /// The `n` with the most Sphere(n) results.
    pub fn plurality(&self) -> Plurality {
        let Some(&best) = self.spheres.values().max() else {
            return Plurality::NoValid;
        };
        let mut winners = self.spheres.iter().filter(|(_, &c)| c == best);
        let (&n, _) = winners.next().expect("max exists");
        if winners.next().is_some() {
            Plurality::Tie
        } else {
            Plurality::Unique(n)
        }
    }

    /// Estimated dimension and whether a tie prevented one.
    fn estimate(&self) -> (Option<usize>, bool) {
        match self.plurality() {
            Plurality::Unique(n) => (Some(n), false),
            Plurality::NoValid => (None, false),
            Plurality::Tie => (None, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plurality {
    NoValid,
    Unique(usize),
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimateOptions {
    pub budget: Budget,
    /// Ground-truth dimension; enables the correct ratio.
    pub truth: Option<usize>,
    pub record_timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub schedule: ParamSchedule,
    pub k_max: usize,
    pub strategy: BaseSelection,
    pub sample_points: usize,
    pub per_point: Vec<BasePointResult>,
    pub tallies: Tallies,
    pub avg_neighbors: f64,
    pub estimated_dimension: Option<usize>,
    /// Set when two or more dimensions tie for the plurality.
    pub ambiguous: bool,
    pub truth: Option<usize>,
    /// Fraction of valid base points whose sphere dimension equals `truth`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct_ratio: Option<f64>,
    pub millis: Option<u64>,
}

impl DimensionReport {
    pub fn from_results(
        schedule: ParamSchedule,
        k_max: usize,
        strategy: BaseSelection,
        sample_points: usize,
        per_point: Vec<BasePointResult>,
        truth: Option<usize>,
    ) -> Self {
        let tallies = Tallies::from_classes(per_point.iter().map(|r| &r.class));
        let (estimated_dimension, ambiguous) = tallies.estimate();
        let avg_neighbors = if per_point.is_empty() {
            0.0
        } else {
            per_point.iter().map(|r| r.neighbors as f64).sum::<f64>() / per_point.len() as f64
        };
        let correct_ratio = truth.and_then(|t| {
            let valid = tallies.valid();
            (valid > 0).then(|| tallies.spheres.get(&t).copied().unwrap_or(0) as f64 / valid as f64)
        });
        Self {
            schedule,
            k_max,
            strategy,
            sample_points,
            per_point,
            tallies,
            avg_neighbors,
            estimated_dimension,
            ambiguous,
            truth,
            correct_ratio,
            millis: None,
        }
    }

    pub fn has_estimate(&self) -> bool {
        self.estimated_dimension.is_some()
    }

    /// Valid points whose sphere dimension disagrees with `truth`.
    pub fn wrong_dimension_count(&self, truth: usize) -> usize {
        self.tallies
            .spheres
            .iter()
            .filter(|(&n, _)| n != truth)
            .map(|(_, &c)| c)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per sphere dimension (or a single row when there are none):
    /// sample points, average neighborhood, not-n-sphere, trivial, n,
    /// n-sphere count, correct ratio.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "sample_points,avg_neighb,not_n_sphere,trivial,n,n_sphere,correct_ratio"
        )?;
        let total = self.tallies.total();
        let valid = self.tallies.valid();
        let ratio = match (self.truth, self.correct_ratio) {
            (Some(t), Some(r)) => format!(
                "{:.1}% ({}/{})",
                100.0 * r,
                self.tallies.spheres.get(&t).copied().unwrap_or(0),
                valid
            ),
            _ => String::new(),
        };
        let head = format!(
            "{},{:.0},{}/{},{}/{}",
            self.sample_points,
            self.avg_neighbors,
            self.tallies.non_sphere,
            total,
            self.tallies.trivial,
            total
        );
        if self.tallies.spheres.is_empty() {
            writeln!(w, "{head},,,{ratio}")?;
        }
        for (n, c) in &self.tallies.spheres {
            writeln!(w, "{head},{n},{c}/{total},{ratio}")?;
        }
        Ok(())
    }
}

/// Estimates at every selected base point in parallel and aggregates.
/// Results are gathered in ascending base-point order.
pub fn estimate_dimension(
    cloud: &PointCloud,
    schedule: &ParamSchedule,
    strategy: &BaseSelection,
    options: EstimateOptions,
) -> Result<DimensionReport, GeometryError> {
    let start = Instant::now();
    let bases = strategy.select(cloud)?;
    let per_point: Vec<BasePointResult> = bases
        .par_iter()
        .map(|&i| {
            let t0 = Instant::now();
            let mut res = estimate_local(cloud, cloud.point(i), schedule, options.budget);
            res.index = Some(i);
            if let Classification::Skipped(why) = &res.class {
                res.class = Classification::Skipped(format!("base point {i}: {why}"));
            }
            if options.record_timings {
                res.millis = Some(t0.elapsed().as_millis() as u64);
            }
            res
        })
        .collect();
    let mut report = DimensionReport::from_results(
        *schedule,
        schedule.effective_k_max(cloud.dim()),
        strategy.clone(),
        cloud.len(),
        per_point,
        options.truth,
    );
    if options.record_timings {
        report.millis = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

/// Distribution of outcomes over repeated random subsamples around one center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCenterReport {
    pub center: usize,
    pub trials: usize,
    pub subsample_size: usize,
    pub tallies: Tallies,
    pub estimated_dimension: Option<usize>,
    pub ambiguous: bool,
    /// Share of valid trials at the plurality dimension.
    pub percentage: Option<f64>,
    pub results: Vec<BasePointResult>,
}

/// Each trial draws `subsample_size` points uniformly without replacement
/// from the `P_{3α,r}` neighborhood of `center` (always keeping the center)
/// and estimates there.
pub fn repeated_center_estimate(
    cloud: &PointCloud,
    schedule: &ParamSchedule,
    center: usize,
    subsample_size: usize,
    trials: usize,
    seed: u64,
    budget: Budget,
) -> Result<RepeatedCenterReport, GeometryError> {
    if trials == 0 {
        return Err(GeometryError::InvalidParameter(
            "trials must be >= 1".into(),
        ));
    }
    if center >= cloud.len() {
        return Err(GeometryError::InvalidParameter(format!(
            "center {center} out of range"
        )));
    }
    let p = cloud.point(center).to_vec();
    let hood: Vec<usize> = ball_query(cloud, &p, schedule.r + 3.0 * schedule.alpha)?
        .into_iter()
        .filter(|&i| i != center)
        .collect();
    let take = subsample_size.saturating_sub(1).min(hood.len());
    let seeds: Vec<u64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials).map(|_| rand::Rng::random(&mut rng)).collect()
    };
    let results: Vec<BasePointResult> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut chosen: Vec<usize> = sample(&mut rng, hood.len(), take)
                .into_iter()
                .map(|k| hood[k])
                .collect();
            chosen.push(center);
            chosen.sort_unstable();
            let sub = cloud.select(&chosen);
            let mut res = estimate_local(&sub, &p, schedule, budget);
            res.index = Some(center);
            res
        })
        .collect();
    let tallies = Tallies::from_classes(results.iter().map(|r| &r.class));
    let (estimated_dimension, ambiguous) = tallies.estimate();
    let percentage =
        estimated_dimension.map(|n| tallies.spheres[&n] as f64 / tallies.valid() as f64);
    Ok(RepeatedCenterReport {
        center,
        trials,
        subsample_size: take + 1,
        tallies,
        estimated_dimension,
        ambiguous,
        percentage,
        results,
    })
}
