//! Z₂ boundary matrices over the block filtration of a [`LocalPairComplex`],
//! standard column reduction, and the readout of `rank im(H(A1,B1) -> H(A2,B2))`.
//!
//! Two independent checks live here as well: the coned-complex route, which
//! turns both relative groups into reduced absolute homology, and a dense
//! Gaussian-elimination computation of relative Betti numbers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{LocalPairComplex, Region, Simplex};

#[derive(Debug, Error, PartialEq)]
pub enum HomologyError {
    #[error("negative image rank in dimension {dim}: {zero} zero columns, {bdry} paired")]
    NegativeRank {
        dim: usize,
        zero: usize,
        bdry: usize,
    },
    #[error("instance of {size} relative simplices exceeds dense oracle limit {limit}")]
    TooLarge { size: usize, limit: usize },
}

/// Largest number of relative simplices the dense oracle accepts.
pub const DENSE_ORACLE_LIMIT: usize = 512;

/// Working columns longer than this are reduced in a dense bitset.
const DENSE_SWITCH: usize = 128;

/// Rank of the image map per homology dimension `0..=k_max`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocalHomologyProfile {
    ranks: Vec<usize>,
}

impl LocalHomologyProfile {
    pub fn new(ranks: Vec<usize>) -> Self {
        Self { ranks }
    }

    pub fn zero(k_max: usize) -> Self {
        Self {
            ranks: vec![0; k_max + 1],
        }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self, k: usize) -> usize {
        self.ranks.get(k).copied().unwrap_or(0)
    }

    pub fn is_trivial(&self) -> bool {
        self.ranks.iter().all(|&r| r == 0)
    }

    /// `Some(n)` when the profile is that of a reduced `n`-sphere: rank one
    /// in dimension `n` and zero elsewhere.
    pub fn sphere_dimension(&self) -> Option<usize> {
        let mut nonzero = self.ranks.iter().enumerate().filter(|(_, &r)| r != 0);
        match (nonzero.next(), nonzero.next()) {
            (Some((n, &1)), None) => Some(n),
            _ => None,
        }
    }
}

/// Square Z₂ matrix over the simplices of blocks 3–5 in filtration order.
/// Facets lying in blocks 1–2 are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrixZ2 {
    /// Sorted row indices per column.
    pub columns: Vec<Vec<usize>>,
    pub dims: Vec<usize>,
    pub regions: Vec<Region>,
}

impl BoundaryMatrixZ2 {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Principal submatrix on the given regions, reindexed.
    pub fn restrict(&self, keep: &[Region]) -> BoundaryMatrixZ2 {
        let mut new_index = vec![usize::MAX; self.len()];
        let mut out = BoundaryMatrixZ2 {
            columns: Vec::new(),
            dims: Vec::new(),
            regions: Vec::new(),
        };
        for j in 0..self.len() {
            if keep.contains(&self.regions[j]) {
                new_index[j] = out.columns.len();
                out.columns.push(
                    self.columns[j]
                        .iter()
                        .filter_map(|&i| (new_index[i] != usize::MAX).then_some(new_index[i]))
                        .collect(),
                );
                out.dims.push(self.dims[j]);
                out.regions.push(self.regions[j]);
            }
        }
        out
    }
}

pub fn assemble_boundary(pair: &LocalPairComplex) -> BoundaryMatrixZ2 {
    let a2 = pair.a2.simplices();
    let start = pair.block_range(Region::B2AndA1).start;
    let suffix = &pair.order()[start..];
    let mut row_of = vec![usize::MAX; a2.len()];
    for (pos, &i) in suffix.iter().enumerate() {
        row_of[i] = pos;
    }
    let mut columns = Vec::with_capacity(suffix.len());
    let mut dims = Vec::with_capacity(suffix.len());
    let mut regions = Vec::with_capacity(suffix.len());
    for &i in suffix {
        let s = &a2[i];
        let mut col: Vec<usize> = s
            .facets()
            .filter_map(|f| {
                let fi = pair.a2.index_of(&f).expect("A2 is closed under faces");
                (row_of[fi] != usize::MAX).then_some(row_of[fi])
            })
            .collect();
        col.sort_unstable();
        columns.push(col);
        dims.push(s.dim());
        regions.push(pair.region_of(i));
    }
    BoundaryMatrixZ2 {
        columns,
        dims,
        regions,
    }
}

/// Result of left-to-right column reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub columns: Vec<Vec<usize>>,
    /// For each row, the column whose low it is.
    pub pivot_of_row: Vec<Option<usize>>,
}

impl Reduction {
    pub fn low(&self, j: usize) -> Option<usize> {
        self.columns[j].last().copied()
    }

    pub fn is_zero(&self, j: usize) -> bool {
        self.columns[j].is_empty()
    }

    /// `(low, column)` for every nonzero column, by column.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.columns.len())
            .filter_map(|j| self.low(j).map(|l| (l, j)))
            .collect()
    }
}

pub fn reduce(matrix: &BoundaryMatrixZ2) -> Reduction {
    reduce_columns(matrix.columns.clone())
}

/// Standard reduction: while the low of column `j` equals the low of an
/// earlier column, add that column into `j`. Row indices must precede their column.
pub fn reduce_columns(mut columns: Vec<Vec<usize>>) -> Reduction {
    let n = columns.len();
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; n];
    let mut scratch = Vec::new();
    let mut dense = DenseColumn::default();
    for j in 0..n {
        let mut col = std::mem::take(&mut columns[j]);
        while let Some(&low) = col.last() {
            let Some(k) = pivot_of_row[low] else { break };
            if col.len() > DENSE_SWITCH {
                dense.load(&col, n);
                while let Some(low) = dense.low() {
                    let Some(k) = pivot_of_row[low] else { break };
                    dense.toggle(&columns[k]);
                }
                dense.store(&mut col);
                break;
            }
            symmetric_difference_into(&col, &columns[k], &mut scratch);
            std::mem::swap(&mut col, &mut scratch);
        }
        if let Some(&low) = col.last() {
            pivot_of_row[low] = Some(j);
        }
        columns[j] = col;
    }
    Reduction {
        columns,
        pivot_of_row,
    }
}

fn symmetric_difference_into(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

#[derive(Default)]
struct DenseColumn {
    words: Vec<u64>,
    top: usize,
}

impl DenseColumn {
    fn load(&mut self, col: &[usize], n: usize) {
        self.words.clear();
        self.words.resize(n.div_ceil(64), 0);
        for &i in col {
            self.words[i / 64] ^= 1 << (i % 64);
        }
        self.top = self.words.len();
    }

    fn low(&mut self) -> Option<usize> {
        while self.top > 0 {
            let w = self.words[self.top - 1];
            if w != 0 {
                return Some((self.top - 1) * 64 + 63 - w.leading_zeros() as usize);
            }
            self.top -= 1;
        }
        None
    }

    fn toggle(&mut self, col: &[usize]) {
        for &i in col {
            self.words[i / 64] ^= 1 << (i % 64);
        }
    }

    fn store(&self, out: &mut Vec<usize>) {
        out.clear();
        for (w, &bits) in self.words.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                out.push(w * 64 + b.trailing_zeros() as usize);
                b &= b - 1;
            }
        }
    }
}

/// Counts zero columns of `A1 \ B2` simplices that are not the low of any
/// later `(k+1)`-column from `A2 \ B2`.
pub fn image_rank(
    matrix: &BoundaryMatrixZ2,
    reduction: &Reduction,
    k_max: usize,
) -> Result<LocalHomologyProfile, HomologyError> {
    let mut zero = vec![0usize; k_max + 1];
    let mut bdry = vec![0usize; k_max + 1];
    for j in 0..matrix.len() {
        let k = matrix.dims[j];
        if matrix.regions[j] != Region::A1NotB2 || k > k_max || !reduction.is_zero(j) {
            continue;
        }
        zero[k] += 1;
        if let Some(killer) = reduction.pivot_of_row[j] {
            if matches!(matrix.regions[killer], Region::A1NotB2 | Region::Rest)
                && matrix.dims[killer] == k + 1
            {
                bdry[k] += 1;
            }
        }
    }
    let ranks = zero
        .iter()
        .zip(&bdry)
        .enumerate()
        .map(|(dim, (&z, &b))| {
            z.checked_sub(b).ok_or(HomologyError::NegativeRank {
                dim,
                zero: z,
                bdry: b,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(LocalHomologyProfile::new(ranks))
}

/// Assemble, reduce and read off the image rank in one call.
pub fn local_profile(
    pair: &LocalPairComplex,
    k_max: usize,
) -> Result<LocalHomologyProfile, HomologyError> {
    let matrix = assemble_boundary(pair);
    let reduction = reduce(&matrix);
    image_rank(&matrix, &reduction, k_max)
}

/// Relative Betti numbers of the quotient on `regions`, read from the
/// reduction of that principal submatrix as unpaired zero columns.
///
/// `[B2AndA1, A1NotB2]` gives `H(A1, B1)`; `[A1NotB2, Rest]` gives `H(A2, B2)`.
pub fn submatrix_betti(matrix: &BoundaryMatrixZ2, regions: &[Region], k_max: usize) -> Vec<usize> {
    let sub = matrix.restrict(regions);
    let red = reduce(&sub);
    let mut betti = vec![0; k_max + 1];
    for j in 0..sub.len() {
        if sub.dims[j] <= k_max && red.is_zero(j) && red.pivot_of_row[j].is_none() {
            betti[sub.dims[j]] += 1;
        }
    }
    betti
}

/// Apex vertex of the cones; sorts after every point index.
const APEX: usize = usize::MAX;

fn cone_over(s: &Simplex) -> Simplex {
    let mut v = s.vertices().to_vec();
    v.push(APEX);
    Simplex::from_sorted(v)
}

/// Image rank through `A1 ∪ w*B1 -> A2 ∪ w*B2`.
///
/// The filtration lists the first complex, then the rest of the second, and
/// counts first-complex `k`-simplices whose column reduces to zero and never
/// gets paired. When `B2` is nonempty the apex is placed first and excluded
/// from the count, which turns the second complex's `H_0` into reduced
/// homology while keeping the unreduced `H_0(A1)` when `B1` is empty.
pub fn cone_oracle_rank(pair: &LocalPairComplex, k_max: usize) -> LocalHomologyProfile {
    let top = k_max + 1;
    let apex = Simplex::from_sorted(vec![APEX]);
    let coned = |base: &[Simplex], sub: &[Simplex]| -> Vec<Simplex> {
        let mut k: Vec<Simplex> = base.iter().filter(|s| s.dim() <= top).cloned().collect();
        k.extend(sub.iter().filter(|s| s.dim() < top).map(cone_over));
        if !sub.is_empty() {
            k.push(apex.clone());
        }
        k.sort_unstable();
        k
    };
    let k1 = coned(pair.a1.simplices(), pair.b1.simplices());
    let k2 = coned(pair.a2.simplices(), pair.b2.simplices());
    let with_apex = !pair.b2.is_empty();

    let mut order: Vec<&Simplex> = Vec::with_capacity(k2.len());
    if with_apex {
        order.push(&apex);
    }
    order.extend(k1.iter().filter(|s| **s != apex));
    let first_len = order.len();
    order.extend(
        k2.iter()
            .filter(|s| **s != apex && k1.binary_search(s).is_err()),
    );

    let position: HashMap<&Simplex, usize> =
        order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let columns: Vec<Vec<usize>> = order
        .iter()
        .map(|s| {
            let mut col: Vec<usize> = s.facets().map(|f| position[&f]).collect();
            col.sort_unstable();
            col
        })
        .collect();
    let red = reduce_columns(columns);
    let mut ranks = vec![0; k_max + 1];
    for (j, s) in order[..first_len].iter().enumerate() {
        if **s == apex || s.dim() > k_max {
            continue;
        }
        if red.is_zero(j) && red.pivot_of_row[j].is_none() {
            ranks[s.dim()] += 1;
        }
    }
    LocalHomologyProfile::new(ranks)
}

/// `dim H_k(A, B; Z₂)` by Gaussian elimination on the quotient boundary maps.
/// Simplices of `b` absent from `a` are ignored.
pub fn dense_rank_oracle(a: &[Simplex], b: &[Simplex], k: usize) -> Result<usize, HomologyError> {
    let mut b_sorted: Vec<&Simplex> = b.iter().collect();
    b_sorted.sort_unstable();
    let rel: Vec<&Simplex> = a
        .iter()
        .filter(|s| b_sorted.binary_search(s).is_err())
        .collect();
    if rel.len() > DENSE_ORACLE_LIMIT {
        return Err(HomologyError::TooLarge {
            size: rel.len(),
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let chains = |d: usize| -> Vec<&Simplex> {
        let mut c: Vec<&Simplex> = rel.iter().copied().filter(|s| s.dim() == d).collect();
        c.sort_unstable();
        c
    };
    // rank of the boundary from dimension d to d-1, relative simplices only
    let boundary_rank = |d: usize| -> usize {
        if d == 0 {
            return 0;
        }
        let rows = chains(d - 1);
        let index: HashMap<&Simplex, usize> =
            rows.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let words = rows.len().div_ceil(64).max(1);
        let vectors = chains(d).into_iter().map(|s| {
            let mut v = vec![0u64; words];
            for f in s.facets() {
                if let Some(&i) = index.get(&f) {
                    v[i / 64] ^= 1 << (i % 64);
                }
            }
            v
        });
        gf2_rank(vectors, words)
    };
    let n_k = chains(k).len();
    Ok(n_k - boundary_rank(k) - boundary_rank(k + 1))
}

fn gf2_rank(vectors: impl Iterator<Item = Vec<u64>>, words: usize) -> usize {
    let mut pivots: Vec<Option<Vec<u64>>> = vec![None; words * 64];
    let mut rank = 0;
    for mut v in vectors {
        while let Some(top) = (0..words).rev().find(|&w| v[w] != 0) {
            let bit = top * 64 + 63 - v[top].leading_zeros() as usize;
            match &pivots[bit] {
                Some(p) => v.iter_mut().zip(p).for_each(|(a, b)| *a ^= b),
                None => {
                    pivots[bit] = Some(v);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}
