//! Synthetic corpora: spherical caps, translated-patch images and noisy
//! parametric embeddings.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GridIndex, PointCloud};

#[derive(Debug, Error, PartialEq)]
pub enum DatagenError {
    #[error("invalid generator parameter: {0}")]
    Invalid(String),
}

/// Records how a corpus was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub points: usize,
    pub dim: usize,
}

/// Writes one comma-separated row per point.
pub fn write_csv<W: Write>(cloud: &PointCloud, mut w: W) -> io::Result<()> {
    let mut line = String::new();
    for p in cloud.points() {
        line.clear();
        for (k, x) in p.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&x.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Area-uniform point on the cap of `S^n` within `cap_angle` of the pole
/// `(0, ..., 0, 1)`. The polar angle is drawn by rejection against the
/// `sin^(n-1)` density, the azimuthal direction from a normalized Gaussian.
fn cap_point<R: Rng>(rng: &mut R, n: usize, cap_angle: f64, out: &mut [f64]) {
    let peak = if cap_angle >= std::f64::consts::FRAC_PI_2 {
        1.0
    } else {
        cap_angle.sin()
    };
    let theta = loop {
        let t = rng.random::<f64>() * cap_angle;
        let w = (t.sin() / peak).powi(n as i32 - 1);
        if rng.random::<f64>() <= w {
            break t;
        }
    };
    let dir = loop {
        let g: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break g.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let (s, c) = theta.sin_cos();
    for (o, d) in out[..n].iter_mut().zip(&dir) {
        *o = s * d;
    }
    out[n] = c;
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.iter_mut().for_each(|x| *x /= norm);
}

/// Net spacing as a fraction of the requested covering radius.
const CAP_NET_FACTOR: f64 = 0.95;

/// Points on the unit `n`-sphere within `cap_angle` of a pole, densified until
/// every point of the cap lies within `target_epsilon` of the sample.
///
/// Candidates are drawn area-uniformly and kept when no kept point lies
/// within `0.95 * target_epsilon`; sampling stops after a long run of
/// rejected candidates, so kept points are also pairwise separated.
pub fn sphere_cap(
    n: usize,
    cap_angle: f64,
    target_epsilon: f64,
    seed: u64,
) -> Result<PointCloud, DatagenError> {
    if n == 0 {
        return Err(DatagenError::Invalid(
            "sphere dimension must be >= 1".into(),
        ));
    }
    if !(cap_angle > 0.0 && cap_angle <= std::f64::consts::PI) {
        return Err(DatagenError::Invalid(format!(
            "cap angle must lie in (0, π], got {cap_angle}"
        )));
    }
    if target_epsilon.is_nan() || target_epsilon <= 0.0 {
        return Err(DatagenError::Invalid(format!(
            "target epsilon must be positive, got {target_epsilon}"
        )));
    }
    let spacing = CAP_NET_FACTOR * target_epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = GridIndex::new(n + 1, spacing);
    let mut candidate = vec![0.0; n + 1];
    let mut streak = 0usize;
    loop {
        let patience = 10_000usize.max(30 * grid.len());
        if streak >= patience {
            break;
        }
        cap_point(&mut rng, n, cap_angle, &mut candidate);
        if grid.any_within(&candidate, spacing) {
            streak += 1;
        } else {
            grid.insert(&candidate);
            streak = 0;
        }
    }
    PointCloud::from_flat(n + 1, grid.into_points())
        .map_err(|e| DatagenError::Invalid(e.to_string()))
}

/// Area-uniform probes of the same cap, for coverage checks.
pub fn sphere_cap_probes(n: usize, cap_angle: f64, count: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![0.0; count * (n + 1)];
    for chunk in coords.chunks_exact_mut(n + 1) {
        cap_point(&mut rng, n, cap_angle, chunk);
    }
    PointCloud::from_flat(n + 1, coords).expect("finite probes")
}

/// A `patch_w × patch_h` white rectangle translated over a black
/// `image_w × image_h` image, one row-major image vector per offset.
/// Offsets run row by row with step `stride` in both directions.
pub fn shift_images(
    image_w: usize,
    image_h: usize,
    patch_w: usize,
    patch_h: usize,
    stride: usize,
) -> Result<PointCloud, DatagenError> {
    if stride == 0 || patch_w == 0 || patch_h == 0 {
        return Err(DatagenError::Invalid(
            "stride and patch size must be positive".into(),
        ));
    }
    if patch_w > image_w || patch_h > image_h {
        return Err(DatagenError::Invalid(format!(
            "patch {patch_w}x{patch_h} does not fit in {image_w}x{image_h}"
        )));
    }
    let dim = image_w * image_h;
    let mut coords = Vec::new();
    for oy in (0..=image_h - patch_h).step_by(stride) {
        for ox in (0..=image_w - patch_w).step_by(stride) {
            let start = coords.len();
            coords.resize(start + dim, 0.0);
            for y in oy..oy + patch_h {
                let row = start + y * image_w;
                coords[row + ox..row + ox + patch_w].fill(1.0);
            }
        }
    }
    PointCloud::from_flat(dim, coords).map_err(|e| DatagenError::Invalid(e.to_string()))
}

/// One axis of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    /// Periodic axes leave out the endpoint, which coincides with the start.
    pub periodic: bool,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let intervals = if self.periodic {
            self.steps
        } else {
            self.steps - 1
        };
        let h = (self.end - self.start) / intervals as f64;
        (0..self.steps).map(|i| self.start + h * i as f64).collect()
    }
}

/// Samples the map on the Cartesian grid of `axes` and moves every image
/// point by a vector drawn uniformly from the ball of radius `noise`.
pub fn parametric_noisy<F>(
    map: F,
    axes: &[Axis],
    noise: f64,
    seed: u64,
) -> Result<PointCloud, DatagenError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if noise.is_nan() || noise < 0.0 {
        return Err(DatagenError::Invalid(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    if axes.is_empty() || axes.iter().any(|a| a.steps == 0) {
        return Err(DatagenError::Invalid(
            "every axis needs at least one step".into(),
        ));
    }
    let values: Vec<Vec<f64>> = axes.iter().map(Axis::values).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    let mut param = vec![0.0; axes.len()];
    'grid: loop {
        for (k, &i) in idx.iter().enumerate() {
            param[k] = values[k][i];
        }
        let mut x = map(&param);
        if noise > 0.0 {
            let d = x.len();
            let g: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = g
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let radius = noise * rng.random::<f64>().powf(1.0 / d as f64);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += radius * gi / norm;
            }
        }
        rows.push(x);
        let mut k = axes.len();
        loop {
            if k == 0 {
                break 'grid;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < values[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    PointCloud::new(rows).map_err(|e| DatagenError::Invalid(e.to_string()))
}

/// `(cos u, sin u, cos v, sin v) / √2`, a flat torus in `R^4`.
pub fn flat_torus(param: &[f64]) -> Vec<f64> {
    let (u, v) = (param[0], param[1]);
    vec![
        u.cos() * FRAC_1_SQRT_2,
        u.sin() * FRAC_1_SQRT_2,
        v.cos() * FRAC_1_SQRT_2,
        v.sin() * FRAC_1_SQRT_2,
    ]
}
