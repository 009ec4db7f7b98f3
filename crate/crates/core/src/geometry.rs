//! Point clouds, metric queries and the vertex sets of the local Rips pairs.
//!
//! Every query here is a plain linear scan over the cloud. Local
//! neighborhoods in practice hold a few hundred points, so the scan is never
//! the bottleneck next to clique expansion and reduction.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::unionfind::UnionFind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate in point {point}")]
    NonFinite { point: usize },
    #[error("point dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested {requested} points from a cloud of {available}")]
    CountTooLarge { requested: usize, available: usize },
    #[error("no points")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Euclidean distance between two coordinate slices of equal length.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// An immutable sample of `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from rows, rejecting ragged input and non-finite values.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let Some(first) = points.first() else {
            return Err(GeometryError::Empty);
        };
        let dim = first.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
            if p.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinite { point: i });
            }
        }
        Self::from_flat(dim, coords)
    }

    /// Builds a cloud from a flat row-major buffer. An empty buffer gives an
    /// empty cloud of the stated dimension.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite { point: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Result<Self, GeometryError> {
        Self::from_flat(dim, Vec::new())
    }

    /// Parses comma- or whitespace-delimited text, one point per row. Blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse<R: BufRead>(reader: R, skip_header: bool) -> Result<Self, GeometryError> {
        let mut dim = None;
        let mut coords = Vec::new();
        let mut header_pending = skip_header;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| GeometryError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if header_pending {
                header_pending = false;
                continue;
            }
            let mut row = 0;
            for field in trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
            {
                let value: f64 = field.parse().map_err(|_| GeometryError::Parse {
                    line: lineno + 1,
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !value.is_finite() {
                    return Err(GeometryError::Parse {
                        line: lineno + 1,
                        message: "non-finite coordinate".into(),
                    });
                }
                coords.push(value);
                row += 1;
            }
            match dim {
                None => dim = Some(row),
                Some(d) if d != row => {
                    return Err(GeometryError::Parse {
                        line: lineno + 1,
                        message: format!("expected {d} coordinates, found {row}"),
                    })
                }
                _ => {}
            }
        }
        match dim {
            None => Err(GeometryError::Empty),
            Some(d) => Self::from_flat(d, coords),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j))
    }

    /// The sub-cloud made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<(), GeometryError> {
        if p.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        Ok(())
    }

    /// Indices whose distance to `center` lies in the closed interval `[lo, hi]`.
    fn annulus(&self, center: &[f64], lo: f64, hi: f64) -> Vec<usize> {
        self.points()
            .enumerate()
            .filter_map(|(i, q)| {
                let d = distance(q, center);
                (d >= lo && d <= hi).then_some(i)
            })
            .collect()
    }

    /// Distances from `center` to every point.
    pub fn distances_from(&self, center: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(center)?;
        Ok(self.points().map(|q| distance(q, center)).collect())
    }
}

/// `{ i : |p_i - center| <= radius }`, ascending.
pub fn ball_query(
    cloud: &PointCloud,
    center: &[f64],
    radius: f64,
) -> Result<Vec<usize>, GeometryError> {
    cloud.check_dim(center)?;
    if radius.is_nan() || radius < 0.0 {
        return Err(GeometryError::InvalidParameter(format!(
            "radius must be non-negative, got {radius}"
        )));
    }
    Ok(cloud.annulus(center, f64::NEG_INFINITY, radius))
}

/// Points whose `alpha`-ball meets the closed `r`-ball around `p`, i.e.
/// `|p_i - p| <= r + alpha`.
pub fn inner_vertex_set(
    cloud: &PointCloud,
    p: &[f64],
    alpha: f64,
    r: f64,
) -> Result<Vec<usize>, GeometryError> {
    cloud.check_dim(p)?;
    positive("alpha", alpha)?;
    positive("r", r)?;
    Ok(cloud.annulus(p, f64::NEG_INFINITY, r + alpha))
}

/// The subset of [`inner_vertex_set`] whose `alpha`-balls also reach the
/// closed complement of the open `beta`-ball, i.e. `beta - alpha <= |p_i - p| <= r + alpha`.
pub fn outer_vertex_set(
    cloud: &PointCloud,
    p: &[f64],
    alpha: f64,
    r: f64,
    beta: f64,
) -> Result<Vec<usize>, GeometryError> {
    cloud.check_dim(p)?;
    positive("alpha", alpha)?;
    positive("r", r)?;
    positive("beta", beta)?;
    Ok(cloud.annulus(p, beta - alpha, r + alpha))
}

fn positive(name: &str, value: f64) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Stopping rule for [`farthest_point_subsample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleTarget {
    /// Stop after this many points.
    Count(usize),
    /// Stop once every remaining point is closer than this to the selection.
    MinDist(f64),
}

/// Greedy farthest-point traversal. The first index is drawn from `seed`;
/// each later pick maximizes the distance to the current selection, ties
/// going to the lowest index. Returned in selection order.
pub fn farthest_point_subsample(
    cloud: &PointCloud,
    target: SubsampleTarget,
    seed: u64,
) -> Result<Vec<usize>, GeometryError> {
    let n = cloud.len();
    match target {
        SubsampleTarget::Count(c) if c > n => {
            return Err(GeometryError::CountTooLarge {
                requested: c,
                available: n,
            })
        }
        SubsampleTarget::MinDist(m) if m.is_nan() || m <= 0.0 => {
            return Err(GeometryError::InvalidParameter(format!(
                "min_dist must be positive, got {m}"
            )))
        }
        SubsampleTarget::Count(0) => return Ok(Vec::new()),
        _ => {}
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..n);
    let mut selected = vec![start];
    let mut to_set: Vec<f64> = (0..n).map(|i| cloud.dist(i, start)).collect();
    to_set[start] = f64::NEG_INFINITY;
    loop {
        if let SubsampleTarget::Count(c) = target {
            if selected.len() >= c {
                break;
            }
        }
        let (next, far) =
            to_set
                .iter()
                .enumerate()
                .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, &d)| {
                    if d > best.1 {
                        (i, d)
                    } else {
                        best
                    }
                });
        if next == usize::MAX {
            break;
        }
        if let SubsampleTarget::MinDist(m) = target {
            if far < m {
                break;
            }
        }
        selected.push(next);
        to_set[next] = f64::NEG_INFINITY;
        let q = cloud.point(next);
        for (i, d) in to_set.iter_mut().enumerate() {
            let nd = distance(cloud.point(i), q);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(selected)
}

/// Distance-threshold graph on a cloud with its connected components.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    pub edge_len: f64,
    /// Adjacency lists, ascending, with the Euclidean length of each edge.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Component label per vertex; labels are numbered by lowest member.
    pub component: Vec<usize>,
}

impl NeighborhoodGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn component_count(&self) -> usize {
        self.component.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of every component, each list ascending, components ordered by label.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.component_count()];
        for (v, &c) in self.component.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

pub fn build_neighborhood_graph(
    cloud: &PointCloud,
    edge_len: f64,
) -> Result<NeighborhoodGraph, GeometryError> {
    positive("edge_len", edge_len)?;
    let n = cloud.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud.dist(i, j);
            if d <= edge_len {
                adjacency[i].push((j, d));
                adjacency[j].push((i, d));
                uf.union(i, j);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(j, _)| j);
    }
    let mut relabel = BTreeMap::new();
    let component = (0..n)
        .map(|v| {
            let root = uf.find(v);
            let next = relabel.len();
            *relabel.entry(root).or_insert(next)
        })
        .collect();
    Ok(NeighborhoodGraph {
        edge_len,
        adjacency,
        component,
    })
}

/// One center per component with at least `min_component_size` vertices:
/// the vertex minimizing its weighted eccentricity (the farthest
/// shortest-path distance within its component). Ties go to the lowest index.
pub fn component_centers(graph: &NeighborhoodGraph, min_component_size: usize) -> Vec<usize> {
    let mut centers = Vec::new();
    for members in graph.components() {
        if members.len() < min_component_size.max(1) {
            continue;
        }
        let mut local = vec![usize::MAX; graph.vertex_count()];
        let mut g = UnGraph::<(), f64>::with_capacity(members.len(), 0);
        for (k, &v) in members.iter().enumerate() {
            local[v] = k;
            g.add_node(());
        }
        for &v in &members {
            for &(w, len) in &graph.adjacency[v] {
                if v < w {
                    g.add_edge(NodeIndex::new(local[v]), NodeIndex::new(local[w]), len);
                }
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for (k, &v) in members.iter().enumerate() {
            let dist = dijkstra(&g, NodeIndex::new(k), None, |e| *e.weight());
            let ecc = dist.values().copied().fold(0.0, f64::max);
            if best.is_none_or(|(b, _)| ecc < b) {
                best = Some((ecc, v));
            }
        }
        if let Some((_, v)) = best {
            centers.push(v);
        }
    }
    centers
}

/// Uniform hash grid over low-dimensional points, for radius queries that
/// would otherwise scan the whole set. Cell side equals the query radius it
/// was built for; queries with a larger radius are rejected.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    dim: usize,
    points: Vec<f64>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl GridIndex {
    pub fn new(dim: usize, cell: f64) -> Self {
        assert!(cell > 0.0 && dim > 0);
        Self {
            cell,
            dim,
            points: Vec::new(),
            cells: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }

    pub fn insert(&mut self, p: &[f64]) -> usize {
        let id = self.len();
        self.points.extend_from_slice(p);
        self.cells.entry(self.key(p)).or_default().push(id);
        id
    }

    /// Visits the stored points of every cell that can hold a point within
    /// `radius` of `p`, the cell of `p` first. Stops when `visit` returns true.
    fn scan_near(&self, p: &[f64], radius: f64, mut visit: impl FnMut(usize) -> bool) {
        assert!(radius <= self.cell, "query radius exceeds cell size");
        let base = self.key(p);
        let choices: Vec<Vec<i64>> = p
            .iter()
            .zip(&base)
            .map(|(&x, &b)| {
                let lo = x - b as f64 * self.cell;
                let mut c = vec![0];
                if lo <= radius {
                    c.push(-1);
                }
                if self.cell - lo <= radius {
                    c.push(1);
                }
                c
            })
            .collect();
        let mut pick = vec![0usize; self.dim];
        let mut key = base.clone();
        loop {
            for k in 0..self.dim {
                key[k] = base[k] + choices[k][pick[k]];
            }
            if let Some(ids) = self.cells.get(&key) {
                if ids.iter().any(|&id| visit(id)) {
                    return;
                }
            }
            let mut k = 0;
            while k < self.dim && pick[k] + 1 == choices[k].len() {
                pick[k] = 0;
                k += 1;
            }
            if k == self.dim {
                return;
            }
            pick[k] += 1;
        }
    }

    fn stored(&self, id: usize) -> &[f64] {
        &self.points[id * self.dim..(id + 1) * self.dim]
    }

    /// Distance from `p` to the nearest stored point, if one lies within `radius`.
    pub fn nearest_within(&self, p: &[f64], radius: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        self.scan_near(p, radius, |id| {
            let d = distance(p, self.stored(id));
            if d <= radius && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
            false
        });
        best
    }

    /// Whether some stored point lies within `radius` of `p`.
    pub fn any_within(&self, p: &[f64], radius: f64) -> bool {
        let mut found = false;
        self.scan_near(p, radius, |id| {
            found = distance(p, self.stored(id)) <= radius;
            found
        });
        found
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }
}
