//! Shared helpers: a brute-force truth oracle for the image rank and the
//! structural checks run by both the property suite and the acceptance runner.
#![allow(dead_code)]

use std::collections::HashMap;

use localdim::complex::{build_rips, Budget, LocalPairComplex, Region, Simplex};
use localdim::geometry::{
    build_neighborhood_graph, component_centers, inner_vertex_set, outer_vertex_set, PointCloud,
};
use localdim::homology::{
    assemble_boundary, cone_oracle_rank, dense_rank_oracle, local_profile, submatrix_betti,
    BoundaryMatrixZ2,
};
use localdim::pipeline::ParamSchedule;
use localdim::verify::SmallInstance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud<R: Rng>(rng: &mut R, n: usize, d: usize) -> PointCloud {
    let rows = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    PointCloud::new(rows).unwrap()
}

/// Every subset of `vertices` with at most `dim_cap + 1` elements whose
/// pairwise distances are at most `t`, sorted by (size, lex).
pub fn brute_rips(
    cloud: &PointCloud,
    vertices: &[usize],
    t: f64,
    dim_cap: usize,
) -> Vec<Vec<usize>> {
    let mut vs = vertices.to_vec();
    vs.sort_unstable();
    assert!(vs.len() <= 20, "brute force is exponential");
    let mut out = Vec::new();
    for mask in 1u32..(1 << vs.len()) {
        if mask.count_ones() as usize > dim_cap + 1 {
            continue;
        }
        let s: Vec<usize> = (0..vs.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| vs[i])
            .collect();
        let ok = s
            .iter()
            .enumerate()
            .all(|(a, &i)| s[a + 1..].iter().all(|&j| cloud.dist(i, j) <= t));
        if ok {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Z₂ vectors as sorted index sets, kept in a reduced basis keyed by pivot.
#[derive(Default)]
struct Gf2Span {
    by_pivot: HashMap<usize, Vec<usize>>,
}

fn xor(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(*x);
                i += 1;
            }
            (Some(x), None) => {
                out.push(*x);
                i += 1;
            }
            (_, Some(y)) => {
                out.push(*y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl Gf2Span {
    /// Adds `v`; returns whether the span grew.
    fn insert(&mut self, mut v: Vec<usize>) -> bool {
        while let Some(&p) = v.last() {
            match self.by_pivot.get(&p) {
                Some(b) => v = xor(&v, b),
                None => {
                    self.by_pivot.insert(p, v);
                    return true;
                }
            }
        }
        false
    }

    fn rank(&self) -> usize {
        self.by_pivot.len()
    }
}

/// Kernel of a Z₂ linear map given column by column (each column a sorted
/// set of row indices); kernel vectors are sorted sets of column indices.
fn kernel(columns: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut pivots: HashMap<usize, (Vec<usize>, Vec<usize>)> = HashMap::new();
    let mut ker = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let mut v = col.clone();
        let mut combo = vec![j];
        loop {
            match v.last() {
                None => {
                    ker.push(combo);
                    break;
                }
                Some(&p) => match pivots.get(&p) {
                    Some((bv, bc)) => {
                        v = xor(&v, bv);
                        combo = xor(&combo, bc);
                    }
                    None => {
                        pivots.insert(p, (v, combo));
                        break;
                    }
                },
            }
        }
    }
    ker
}

/// The four complexes recomputed from scratch with plain distance tests and
/// subset enumeration.
pub struct BrutePair {
    pub a1: Vec<Vec<usize>>,
    pub b1: Vec<Vec<usize>>,
    pub a2: Vec<Vec<usize>>,
    pub b2: Vec<Vec<usize>>,
}

pub fn brute_pair(cloud: &PointCloud, p: &[f64], s: &ParamSchedule, k_max: usize) -> BrutePair {
    let d: Vec<f64> = cloud
        .points()
        .map(|q| {
            q.iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let a = s.alpha;
    let set = |lo: f64, hi: f64| -> Vec<usize> {
        (0..cloud.len())
            .filter(|&i| d[i] >= lo && d[i] <= hi)
            .collect()
    };
    let cap = k_max + 1;
    BrutePair {
        a1: brute_rips(cloud, &set(f64::NEG_INFINITY, s.r + a), 2.0 * a, cap),
        b1: brute_rips(cloud, &set(s.eta2 - a, s.r + a), 2.0 * a, cap),
        a2: brute_rips(cloud, &set(f64::NEG_INFINITY, s.r + 3.0 * a), 6.0 * a, cap),
        b2: brute_rips(cloud, &set(s.eta1 - 3.0 * a, s.r + 3.0 * a), 6.0 * a, cap),
    }
}

/// Rank of `H_k(A1, B1) -> H_k(A2, B2)` over Z₂ by explicit linear algebra:
/// relative cycles of the first pair pushed into the second quotient, against
/// the relative boundaries there.
pub fn truth_image_rank(bp: &BrutePair, k_max: usize) -> Vec<usize> {
    let index = |c: &[Vec<usize>]| -> HashMap<Vec<usize>, ()> {
        c.iter().map(|s| (s.clone(), ())).collect()
    };
    let (in_b1, in_b2) = (index(&bp.b1), index(&bp.b2));
    let rel = |c: &[Vec<usize>], sub: &HashMap<Vec<usize>, ()>, k: usize| -> Vec<Vec<usize>> {
        c.iter()
            .filter(|s| s.len() == k + 1 && !sub.contains_key(*s))
            .cloned()
            .collect()
    };
    let position = |list: &[Vec<usize>]| -> HashMap<Vec<usize>, usize> {
        list.iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    };
    let facets = |s: &[usize]| -> Vec<Vec<usize>> {
        (0..s.len())
            .map(|i| {
                s.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect()
    };
    let image = |cells: &[Vec<usize>], target: &HashMap<Vec<usize>, usize>| -> Vec<Vec<usize>> {
        cells
            .iter()
            .map(|s| {
                let mut rows: Vec<usize> = facets(s)
                    .iter()
                    .filter(|f| !f.is_empty())
                    .filter_map(|f| target.get(f).copied())
                    .collect();
                rows.sort_unstable();
                rows
            })
            .collect()
    };

    (0..=k_max)
        .map(|k| {
            let c1 = rel(&bp.a1, &in_b1, k);
            let c1_down = if k == 0 {
                Vec::new()
            } else {
                rel(&bp.a1, &in_b1, k - 1)
            };
            let cycles = kernel(&image(&c1, &position(&c1_down)));

            let q = rel(&bp.a2, &in_b2, k);
            let qpos = position(&q);
            let up = rel(&bp.a2, &in_b2, k + 1);
            let mut span = Gf2Span::default();
            for col in image(&up, &qpos) {
                span.insert(col);
            }
            let base = span.rank();
            for z in cycles {
                let mut v: Vec<usize> = z
                    .iter()
                    .filter_map(|&i| qpos.get(&c1[i]).copied())
                    .collect();
                v.sort_unstable();
                span.insert(v);
            }
            span.rank() - base
        })
        .collect()
}

/// Random manual schedule with `0 < α` and `0 < η1 < η2 < r`.
pub fn random_schedule<R: Rng>(rng: &mut R, k_max: usize) -> ParamSchedule {
    let alpha = rng.random_range(0.05..0.4);
    let eta1 = rng.random_range(0.05..1.2);
    let eta2 = rng.random_range(eta1 + 0.01..1.6);
    let r = rng.random_range(eta2 + 0.01..2.0);
    ParamSchedule::manual(alpha, eta1, eta2, r, Some(k_max)).unwrap()
}

pub fn small_instance(seed: u64) -> SmallInstance {
    SmallInstance::random(&mut rng(seed))
}

fn vertex_sets(pair: &LocalPairComplex) -> [Vec<usize>; 4] {
    [
        pair.a1.vertices().to_vec(),
        pair.b1.vertices().to_vec(),
        pair.a2.vertices().to_vec(),
        pair.b2.vertices().to_vec(),
    ]
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

// Each check returns Err with a description on the first violation.

/// `V(B1) ⊆ V(A1) ⊆ V(A2)` and `V(B1) ⊆ V(B2) ⊆ V(A2)`, both from the
/// geometric queries and from the built pair.
pub fn check_monotonicity(seed: u64) -> Result<(), String> {
    let inst = small_instance(seed);
    let (c, p, s) = (&inst.cloud, &inst.base[..], &inst.schedule);
    let a = s.alpha;
    let va1 = inner_vertex_set(c, p, a, s.r).unwrap();
    let vb1 = outer_vertex_set(c, p, a, s.r, s.eta2).unwrap();
    let va2 = inner_vertex_set(c, p, 3.0 * a, s.r).unwrap();
    let vb2 = outer_vertex_set(c, p, 3.0 * a, s.r, s.eta1).unwrap();
    let chain = [
        (subset(&vb1, &va1), "V(B1) ⊆ V(A1)"),
        (subset(&va1, &va2), "V(A1) ⊆ V(A2)"),
        (subset(&vb1, &vb2), "V(B1) ⊆ V(B2)"),
        (subset(&vb2, &va2), "V(B2) ⊆ V(A2)"),
    ];
    if let Some((_, what)) = chain.iter().find(|(ok, _)| !ok) {
        return Err(format!("seed {seed}: {what}"));
    }
    let pair = inst.pair().map_err(|e| format!("seed {seed}: {e}"))?;
    let [a1, b1, a2, b2] = vertex_sets(&pair);
    if (a1, b1, a2, b2) != (va1, vb1, va2, vb2) {
        return Err(format!(
            "seed {seed}: built vertex sets differ from queries"
        ));
    }
    for (inner, outer) in [
        (&pair.b1, &pair.a1),
        (&pair.a1, &pair.a2),
        (&pair.b1, &pair.b2),
        (&pair.b2, &pair.a2),
    ] {
        if !inner.simplices().iter().all(|s| outer.contains(s)) {
            return Err(format!("seed {seed}: simplex inclusion fails"));
        }
    }
    Ok(())
}

/// Every facet of every simplex is present.
pub fn check_face_closure(seed: u64) -> Result<(), String> {
    let mut g = rng(seed);
    let n = g.random_range(2..=14);
    let d = g.random_range(1..=4);
    let cloud = random_cloud(&mut g, n, d);
    let t = g.random_range(0.1..2.0);
    let cap = g.random_range(0..=4);
    let all: Vec<usize> = (0..n).collect();
    let rips = build_rips(&cloud, &all, t, cap, usize::MAX).unwrap();
    for s in rips.simplices() {
        if s.dim() > cap {
            return Err(format!("seed {seed}: simplex above dim cap"));
        }
        if s.dim() > 0 && !s.facets().all(|f| rips.contains(&f)) {
            return Err(format!("seed {seed}: missing facet of {s:?}"));
        }
    }
    Ok(())
}

/// The clique expansion equals subset enumeration on at most 10 points.
pub fn check_clique_oracle(seed: u64) -> Result<(), String> {
    let mut g = rng(seed);
    let n = g.random_range(1..=10);
    let d = g.random_range(1..=3);
    let cloud = random_cloud(&mut g, n, d);
    let t = g.random_range(0.0..2.5);
    let cap = g.random_range(0..=9);
    let mut vs: Vec<usize> = (0..n).collect();
    vs.shuffle(&mut g);
    vs.truncate(g.random_range(1..=n));
    let rips = build_rips(&cloud, &vs, t, cap, usize::MAX).unwrap();
    let got: Vec<Vec<usize>> = rips
        .simplices()
        .iter()
        .map(|s| s.vertices().to_vec())
        .collect();
    let want = brute_rips(&cloud, &vs, t, cap);
    if got != want {
        return Err(format!(
            "seed {seed}: {} simplices vs {} by enumeration",
            got.len(),
            want.len()
        ));
    }
    Ok(())
}

fn square_is_zero(m: &BoundaryMatrixZ2) -> bool {
    m.columns.iter().all(|col| {
        let mut acc: Vec<usize> = Vec::new();
        for &r in col {
            acc = xor(&acc, &m.columns[r]);
        }
        acc.is_empty()
    })
}

/// `∂∘∂ = 0` on both quotient submatrices `C(A1)/C(B1)` and `C(A2)/C(B2)`.
pub fn check_boundary_squared(seed: u64) -> Result<(), String> {
    let inst = small_instance(seed);
    let pair = inst.pair().map_err(|e| e.to_string())?;
    let m = assemble_boundary(&pair);
    for regions in [
        [Region::B2AndA1, Region::A1NotB2],
        [Region::A1NotB2, Region::Rest],
    ] {
        if !square_is_zero(&m.restrict(&regions)) {
            return Err(format!("seed {seed}: ∂∘∂ ≠ 0 on {regions:?}"));
        }
    }
    Ok(())
}

/// The block order is a filtration of the quotient, also after shuffling.
pub fn check_filtration(seed: u64) -> Result<(), String> {
    let inst = small_instance(seed);
    let pair = inst.pair().map_err(|e| e.to_string())?;
    let shuffled = pair.shuffled_within_blocks(&mut rng(seed ^ 0x5eed));
    if !pair.is_valid_quotient_filtration() || !shuffled.is_valid_quotient_filtration() {
        return Err(format!("seed {seed}: invalid filtration"));
    }
    let mut seen = vec![Region::B2NotA1; 0];
    for (region, _) in pair.ordered() {
        seen.push(region);
    }
    if !seen.windows(2).all(|w| w[0] <= w[1]) {
        return Err(format!("seed {seed}: blocks out of order"));
    }
    Ok(())
}

/// Ranks do not depend on the order inside a block.
pub fn check_reorder_invariance(seed: u64) -> Result<(), String> {
    let inst = small_instance(seed);
    let pair = inst.pair().map_err(|e| e.to_string())?;
    let base = local_profile(&pair, inst.k_max).map_err(|e| e.to_string())?;
    for t in 0..3 {
        let shuffled = pair.shuffled_within_blocks(&mut rng(seed.wrapping_mul(31) + t));
        let p = local_profile(&shuffled, inst.k_max).map_err(|e| e.to_string())?;
        if p != base {
            return Err(format!(
                "seed {seed}: {:?} vs {:?} after shuffle",
                p.ranks(),
                base.ranks()
            ));
        }
    }
    Ok(())
}

/// Block readout, cone route and the brute-force truth agree.
pub fn check_three_way(seed: u64) -> Result<Vec<usize>, String> {
    let inst = small_instance(seed);
    let pair = inst.pair().map_err(|e| e.to_string())?;
    let block = local_profile(&pair, inst.k_max).map_err(|e| e.to_string())?;
    let cone = cone_oracle_rank(&pair, inst.k_max);
    let truth = truth_image_rank(
        &brute_pair(&inst.cloud, &inst.base, &inst.schedule, inst.k_max),
        inst.k_max,
    );
    if block.ranks() != truth.as_slice() || cone.ranks() != truth.as_slice() {
        return Err(format!(
            "seed {seed}: block {:?}, cone {:?}, truth {truth:?}",
            block.ranks(),
            cone.ranks()
        ));
    }
    Ok(truth)
}

/// Unpaired zero columns of the blocks 3–4 submatrix equal `dim H_k(A1, B1)`.
/// Returns `None` when `A1` is over the size limit.
pub fn check_relative_betti(seed: u64, max_simplices: usize) -> Option<Result<(), String>> {
    let inst = small_instance(seed);
    let pair = inst.pair().ok()?;
    if pair.a1.len() > max_simplices {
        return None;
    }
    let m = assemble_boundary(&pair);
    let got = submatrix_betti(&m, &[Region::B2AndA1, Region::A1NotB2], inst.k_max);
    let want: Vec<usize> = (0..=inst.k_max)
        .map(|k| dense_rank_oracle(pair.a1.simplices(), pair.b1.simplices(), k).unwrap())
        .collect();
    Some(if got == want {
        Ok(())
    } else {
        Err(format!("seed {seed}: submatrix {got:?}, dense {want:?}"))
    })
}

/// All-pairs shortest paths on the `edge`-graph with Euclidean weights.
#[allow(clippy::needless_range_loop)]
fn floyd_warshall(cloud: &PointCloud, edge: f64) -> Vec<Vec<f64>> {
    let n = cloud.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for j in 0..n {
            let w = cloud.dist(i, j);
            if i != j && w <= edge {
                d[i][j] = w;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Centers are minimum-eccentricity vertices with the lowest index among
/// ties, one per component of at least 3 points; permuting the cloud
/// permutes the components and keeps each center a minimizer.
pub fn check_center_covariance(seed: u64) -> Result<(), String> {
    let mut g = rng(seed);
    let n = g.random_range(3..=40);
    let cloud = random_cloud(&mut g, n, 2);
    let edge = g.random_range(0.2..0.8);
    let min_size = 3;
    let d = floyd_warshall(&cloud, edge);
    let ecc: Vec<f64> = d
        .iter()
        .map(|row| {
            row.iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(0.0, f64::max)
        })
        .collect();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        if !seen[i] {
            let c: Vec<usize> = (0..n).filter(|&j| d[i][j].is_finite()).collect();
            c.iter().for_each(|&j| seen[j] = true);
            if c.len() >= min_size {
                comps.push(c);
            }
        }
    }
    let is_min = |c: &[usize], v: usize| {
        let best = c.iter().map(|&j| ecc[j]).fold(f64::INFINITY, f64::min);
        c.contains(&v) && ecc[v] <= best + 1e-9
    };
    let expected: Vec<usize> = {
        let mut e: Vec<usize> = comps
            .iter()
            .map(|c| *c.iter().find(|&&v| is_min(c, v)).unwrap())
            .collect();
        e.sort_unstable();
        e
    };
    let mut got = component_centers(&build_neighborhood_graph(&cloud, edge).unwrap(), min_size);
    got.sort_unstable();
    if got != expected {
        return Err(format!(
            "seed {seed}: centers {got:?}, expected {expected:?}"
        ));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut g);
    // row i of the permuted cloud is row perm[i] of the original
    let permuted = cloud.select(&perm);
    let mapped: Vec<usize> = component_centers(
        &build_neighborhood_graph(&permuted, edge).unwrap(),
        min_size,
    )
    .into_iter()
    .map(|i| perm[i])
    .collect();
    if mapped.len() != comps.len() {
        return Err(format!(
            "seed {seed}: {} centers after permuting, {} before",
            mapped.len(),
            comps.len()
        ));
    }
    for c in &comps {
        let inside: Vec<usize> = mapped.iter().copied().filter(|v| c.contains(v)).collect();
        if inside.len() != 1 || !is_min(c, inside[0]) {
            return Err(format!(
                "seed {seed}: permuted centers {mapped:?} not minimizers"
            ));
        }
    }
    Ok(())
}

pub fn default_budget() -> Budget {
    Budget::default()
}

pub fn as_simplices(list: &[Vec<usize>]) -> Vec<Simplex> {
    list.iter()
        .map(|v| Simplex::new(v.clone()).unwrap())
        .collect()
}
