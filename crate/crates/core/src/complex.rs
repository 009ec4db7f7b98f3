//! Vietoris–Rips complexes on vertex subsets and the four-complex local pair
//! `(A1, B1) -> (A2, B2)` ordered into blocks for the image-rank reduction.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{inner_vertex_set, outer_vertex_set, GeometryError, PointCloud};
use crate::pipeline::ParamSchedule;

#[derive(Debug, Error, PartialEq)]
pub enum ComplexError {
    #[error("simplex budget of {limit} exceeded")]
    SimplexBudget { limit: usize },
    #[error("vertex budget of {limit} exceeded ({found} vertices)")]
    VertexBudget { limit: usize, found: usize },
    #[error("inclusion violated: {0}")]
    InclusionViolation(&'static str),
    #[error("vertices must be strictly increasing")]
    UnsortedSimplex,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Size limits applied to each complex built for one base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    pub max_simplices: usize,
    pub max_vertices: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_simplices: 5_000_000,
            max_vertices: 50_000,
        }
    }
}

/// A simplex as a strictly increasing tuple of global point indices.
///
/// Simplices order by dimension first and lexicographically second, so a
/// sorted list is always a valid filtration of a closed complex.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn new(vertices: Vec<usize>) -> Result<Self, ComplexError> {
        if vertices.is_empty() || vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ComplexError::UnsortedSimplex);
        }
        Ok(Self(vertices))
    }

    pub(crate) fn from_sorted(vertices: Vec<usize>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Self(vertices)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces, in the order obtained by dropping vertex 0, 1, ...
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &v)| (i != skip).then_some(v))
                    .collect(),
            )
        })
    }
}

impl Ord for Simplex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Simplex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Clique complex of a distance-threshold graph, truncated at `dim_cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct RipsComplex {
    pub threshold: f64,
    pub dim_cap: usize,
    vertices: Vec<usize>,
    simplices: Vec<Simplex>,
}

impl RipsComplex {
    /// Vertex set, ascending.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// All simplices sorted by dimension then lexicographically.
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.index_of(s).is_some()
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.simplices.binary_search(s).ok()
    }

    /// Number of simplices per dimension.
    pub fn f_vector(&self) -> Vec<usize> {
        let mut f = Vec::new();
        for s in &self.simplices {
            if f.len() <= s.dim() {
                f.resize(s.dim() + 1, 0);
            }
            f[s.dim()] += 1;
        }
        f
    }

    /// Expands cliques over a sorted vertex list given upper adjacency
    /// (`upper[i]` holds local indices `j > i`, ascending).
    fn from_upper_adjacency(
        vertices: Vec<usize>,
        upper: &[Vec<usize>],
        threshold: f64,
        dim_cap: usize,
        max_simplices: usize,
    ) -> Result<Self, ComplexError> {
        let mut simplices = Vec::new();
        let mut stack: Vec<usize> = Vec::with_capacity(dim_cap + 1);
        for v in 0..vertices.len() {
            stack.push(v);
            expand(
                &vertices,
                upper,
                &mut stack,
                &upper[v],
                dim_cap,
                max_simplices,
                &mut simplices,
            )?;
            stack.pop();
        }
        simplices.sort_unstable();
        Ok(Self {
            threshold,
            dim_cap,
            vertices,
            simplices,
        })
    }
}

fn expand(
    vertices: &[usize],
    upper: &[Vec<usize>],
    stack: &mut Vec<usize>,
    candidates: &[usize],
    dim_cap: usize,
    max_simplices: usize,
    out: &mut Vec<Simplex>,
) -> Result<(), ComplexError> {
    if out.len() >= max_simplices {
        return Err(ComplexError::SimplexBudget {
            limit: max_simplices,
        });
    }
    out.push(Simplex(stack.iter().map(|&l| vertices[l]).collect()));
    if stack.len() > dim_cap {
        return Ok(());
    }
    for (k, &c) in candidates.iter().enumerate() {
        let next = intersect_sorted(&candidates[k + 1..], &upper[c]);
        stack.push(c);
        expand(vertices, upper, stack, &next, dim_cap, max_simplices, out)?;
        stack.pop();
    }
    Ok(())
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Rips complex on `vertex_set` with edges `|p_i - p_j| <= threshold`,
/// holding every clique of dimension at most `dim_cap`.
pub fn build_rips(
    cloud: &PointCloud,
    vertex_set: &[usize],
    threshold: f64,
    dim_cap: usize,
    max_simplices: usize,
) -> Result<RipsComplex, ComplexError> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(GeometryError::InvalidParameter(format!(
            "threshold must be non-negative, got {threshold}"
        ))
        .into());
    }
    let mut vertices = vertex_set.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    let upper: Vec<Vec<usize>> = (0..vertices.len())
        .map(|i| {
            ((i + 1)..vertices.len())
                .filter(|&j| cloud.dist(vertices[i], vertices[j]) <= threshold)
                .collect()
        })
        .collect();
    RipsComplex::from_upper_adjacency(vertices, &upper, threshold, dim_cap, max_simplices)
}

/// Region of an `A2` simplex in the block order used by the reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    /// `B2 \ A1`
    B2NotA1 = 1,
    /// `B1`
    B1 = 2,
    /// `(B2 \ B1) ∩ A1`
    B2AndA1 = 3,
    /// `A1 \ B2`
    A1NotB2 = 4,
    /// `A2 \ (A1 ∪ B2)`
    Rest = 5,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::B2NotA1,
        Region::B1,
        Region::B2AndA1,
        Region::A1NotB2,
        Region::Rest,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn classify(in_a1: bool, in_b1: bool, in_b2: bool) -> Region {
        match (in_a1, in_b1, in_b2) {
            (_, true, _) => Region::B1,
            (false, _, true) => Region::B2NotA1,
            (true, _, true) => Region::B2AndA1,
            (true, _, false) => Region::A1NotB2,
            (false, _, false) => Region::Rest,
        }
    }

    /// Blocks that survive the quotient and enter the boundary matrix.
    pub fn in_matrix(self) -> bool {
        self >= Region::B2AndA1
    }
}

/// The inclusion of pairs `(A1, B1) -> (A2, B2)` around one base point,
/// with every simplex of `A2` tagged by [`Region`] and placed in block order.
#[derive(Debug, Clone)]
pub struct LocalPairComplex {
    pub a1: RipsComplex,
    pub b1: RipsComplex,
    pub a2: RipsComplex,
    pub b2: RipsComplex,
    regions: Vec<Region>,
    order: Vec<usize>,
    block_starts: [usize; 6],
}

impl LocalPairComplex {
    /// Tags `A2`'s simplices against the other three complexes after checking
    /// `B1 ⊆ A1 ⊆ A2` and `B1 ⊆ B2 ⊆ A2` simplex by simplex.
    pub fn from_complexes(
        a1: RipsComplex,
        b1: RipsComplex,
        a2: RipsComplex,
        b2: RipsComplex,
    ) -> Result<Self, ComplexError> {
        if !a1.simplices.iter().all(|s| a2.contains(s)) {
            return Err(ComplexError::InclusionViolation("A1 ⊄ A2"));
        }
        if !b2.simplices.iter().all(|s| a2.contains(s)) {
            return Err(ComplexError::InclusionViolation("B2 ⊄ A2"));
        }
        if !b1.simplices.iter().all(|s| a1.contains(s)) {
            return Err(ComplexError::InclusionViolation("B1 ⊄ A1"));
        }
        if !b1.simplices.iter().all(|s| b2.contains(s)) {
            return Err(ComplexError::InclusionViolation("B1 ⊄ B2"));
        }
        let regions: Vec<Region> = a2
            .simplices
            .iter()
            .map(|s| Region::classify(a1.contains(s), b1.contains(s), b2.contains(s)))
            .collect();
        let mut pair = Self {
            a1,
            b1,
            a2,
            b2,
            regions,
            order: Vec::new(),
            block_starts: [0; 6],
        };
        let mut order: Vec<usize> = (0..pair.a2.len()).collect();
        // a2 is already sorted by (dim, lex); a stable sort by region keeps that inside each block
        order.sort_by_key(|&i| pair.regions[i]);
        pair.set_order(order);
        Ok(pair)
    }

    fn set_order(&mut self, order: Vec<usize>) {
        let mut starts = [0usize; 6];
        for &i in &order {
            starts[self.regions[i].tag() as usize] += 1;
        }
        for b in 1..6 {
            starts[b] += starts[b - 1];
        }
        self.block_starts = starts;
        self.order = order;
    }

    pub fn region_of(&self, a2_index: usize) -> Region {
        self.regions[a2_index]
    }

    /// Indices into `a2.simplices()` in filtration order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Filtration-order positions `start..end` occupied by `region`.
    pub fn block_range(&self, region: Region) -> std::ops::Range<usize> {
        let t = region.tag() as usize;
        self.block_starts[t - 1]..self.block_starts[t]
    }

    pub fn block_len(&self, region: Region) -> usize {
        self.block_range(region).len()
    }

    /// `(region, simplex)` in filtration order.
    pub fn ordered(&self) -> impl Iterator<Item = (Region, &Simplex)> + '_ {
        self.order
            .iter()
            .map(move |&i| (self.regions[i], &self.a2.simplices[i]))
    }

    /// Randomly permutes simplices of equal dimension inside each block.
    /// The result is another valid block filtration.
    pub fn shuffled_within_blocks<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut order = self.order.clone();
        let mut start = 0;
        while start < order.len() {
            let key = |i: usize| (self.regions[i], self.a2.simplices[i].dim());
            let k = key(order[start]);
            let mut end = start + 1;
            while end < order.len() && key(order[end]) == k {
                end += 1;
            }
            order[start..end].shuffle(rng);
            start = end;
        }
        let mut out = self.clone();
        out.set_order(order);
        out
    }

    /// Every face of a simplex in blocks 3–5 either precedes it or lies in blocks 1–2.
    pub fn is_valid_quotient_filtration(&self) -> bool {
        let mut position = vec![usize::MAX; self.a2.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            position[i] = pos;
        }
        let blocks_in_order = self
            .order
            .windows(2)
            .all(|w| self.regions[w[0]] <= self.regions[w[1]]);
        blocks_in_order
            && self.order.iter().enumerate().all(|(pos, &i)| {
                !self.regions[i].in_matrix()
                    || self.a2.simplices[i].facets().all(|f| {
                        let j = self.a2.index_of(&f).expect("A2 is closed under faces");
                        !self.regions[j].in_matrix() || position[j] < pos
                    })
            })
    }

    /// One line per simplex in filtration order: `region dim v0 v1 ...`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (region, s) in self.ordered() {
            write!(w, "{} {}", region.tag(), s.dim())?;
            for v in s.vertices() {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Builds `A1 = Rips^{2α}(P_{α,r})`, `B1 = Rips^{2α}(P_{α,r}^{η2})`,
/// `A2 = Rips^{6α}(P_{3α,r})` and `B2 = Rips^{6α}(P_{3α,r}^{η1})` around `p`,
/// each truncated at `k_max + 1`.
pub fn build_local_pair(
    cloud: &PointCloud,
    p: &[f64],
    schedule: &ParamSchedule,
    k_max: usize,
    budget: Budget,
) -> Result<LocalPairComplex, ComplexError> {
    let alpha = schedule.alpha;
    let r = schedule.r;
    let v_a2 = inner_vertex_set(cloud, p, 3.0 * alpha, r)?;
    if v_a2.len() > budget.max_vertices {
        return Err(ComplexError::VertexBudget {
            limit: budget.max_vertices,
            found: v_a2.len(),
        });
    }
    let v_a1 = inner_vertex_set(cloud, p, alpha, r)?;
    let v_b1 = outer_vertex_set(cloud, p, alpha, r, schedule.eta2)?;
    let v_b2 = outer_vertex_set(cloud, p, 3.0 * alpha, r, schedule.eta1)?;

    let small = 2.0 * alpha;
    let large = 6.0 * alpha;
    // one distance pass over the largest vertex set, shared by all four complexes
    let edges: Vec<Vec<(usize, f64)>> = (0..v_a2.len())
        .map(|i| {
            ((i + 1)..v_a2.len())
                .filter_map(|j| {
                    let d = cloud.dist(v_a2[i], v_a2[j]);
                    (d <= large).then_some((j, d))
                })
                .collect()
        })
        .collect();
    let dim_cap = k_max + 1;
    let restricted = |subset: &[usize], threshold: f64| -> Result<RipsComplex, ComplexError> {
        let mut member = vec![usize::MAX; v_a2.len()];
        let mut k = 0;
        for (local, &g) in v_a2.iter().enumerate() {
            if k < subset.len() && subset[k] == g {
                member[local] = k;
                k += 1;
            }
        }
        debug_assert_eq!(k, subset.len(), "vertex set not contained in P_(3α,r)");
        let mut upper = vec![Vec::new(); subset.len()];
        for (i, row) in edges.iter().enumerate() {
            if member[i] == usize::MAX {
                continue;
            }
            for &(j, d) in row {
                if member[j] != usize::MAX && d <= threshold {
                    upper[member[i]].push(member[j]);
                }
            }
        }
        RipsComplex::from_upper_adjacency(
            subset.to_vec(),
            &upper,
            threshold,
            dim_cap,
            budget.max_simplices,
        )
    };
    let a2 = restricted(&v_a2, large)?;
    let b2 = restricted(&v_b2, large)?;
    let a1 = restricted(&v_a1, small)?;
    let b1 = restricted(&v_b1, small)?;
    LocalPairComplex::from_complexes(a1, b1, a2, b2)
}
