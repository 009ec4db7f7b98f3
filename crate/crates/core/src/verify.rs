//! Random small instances and the agreement check between the block-order
//! readout and the coned-complex route.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex::{build_local_pair, Budget, ComplexError, LocalPairComplex};
use crate::geometry::PointCloud;
use crate::homology::{cone_oracle_rank, local_profile, HomologyError, LocalHomologyProfile};
use crate::pipeline::ParamSchedule;

/// A point cloud, a base point and a manual schedule.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub cloud: PointCloud,
    pub base: Vec<f64>,
    pub schedule: ParamSchedule,
    pub k_max: usize,
}

impl SmallInstance {
    /// 3 to 12 points in `[-1, 1]^d` with `d` in 1..=3. The base point is
    /// usually a sample point and sometimes an arbitrary ambient point.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n = rng.random_range(3..=12);
        let d = rng.random_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cloud = PointCloud::new(rows).expect("finite coordinates");
        let base = if rng.random_bool(0.75) {
            cloud.point(0).to_vec()
        } else {
            (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let alpha = rng.random_range(0.05..0.4);
        let eta1 = rng.random_range(alpha..1.2);
        let eta2 = rng.random_range(eta1..1.6);
        let r = rng.random_range(eta2..2.0);
        let k_max = 2;
        let schedule = ParamSchedule::manual(alpha, eta1, eta2, r, Some(k_max))
            .expect("ordered by construction");
        Self {
            cloud,
            base,
            schedule,
            k_max,
        }
    }

    pub fn pair(&self) -> Result<LocalPairComplex, ComplexError> {
        build_local_pair(
            &self.cloud,
            &self.base,
            &self.schedule,
            self.k_max,
            Budget::default(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Disagreement {
    pub trial: usize,
    pub block_readout: Vec<usize>,
    pub cone: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub trials: usize,
    pub agreements: usize,
    /// Instances whose image rank is nonzero in some dimension.
    pub nontrivial: usize,
    pub disagreements: Vec<Disagreement>,
}

impl VerifySummary {
    pub fn all_agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Both image-rank routes on one instance.
pub fn both_routes(
    pair: &LocalPairComplex,
    k_max: usize,
) -> Result<(LocalHomologyProfile, LocalHomologyProfile), HomologyError> {
    Ok((local_profile(pair, k_max)?, cone_oracle_rank(pair, k_max)))
}

pub fn run_oracle_suite(trials: usize, seed: u64) -> VerifySummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = VerifySummary {
        trials,
        agreements: 0,
        nontrivial: 0,
        disagreements: Vec::new(),
    };
    for trial in 0..trials {
        let inst = SmallInstance::random(&mut rng);
        let pair = inst.pair().expect("small instances fit the default budget");
        let block = local_profile(&pair, inst.k_max).map(|p| p.ranks().to_vec());
        let cone = cone_oracle_rank(&pair, inst.k_max);
        match block {
            Ok(b) if b == cone.ranks() => {
                summary.agreements += 1;
                if !cone.is_trivial() {
                    summary.nontrivial += 1;
                }
            }
            Ok(b) => summary.disagreements.push(Disagreement {
                trial,
                block_readout: b,
                cone: cone.ranks().to_vec(),
            }),
            Err(_) => summary.disagreements.push(Disagreement {
                trial,
                block_readout: Vec::new(),
                cone: cone.ranks().to_vec(),
            }),
        }
    }
    summary
}
