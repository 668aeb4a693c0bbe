//! Binary-tree storage giving ℓ²-sampling, entry-query and norm access to a
//! Hermitian matrix.
//!
//! Each nonempty row keeps a complete binary tree whose leaves hold
//! `|M(i,j)|²` for the present entries (sorted by column) and whose internal
//! nodes hold the sums of their children. A second tree of the same shape is
//! kept over the squared row norms, so its root is `‖M‖²_F`. Sampling a row
//! or an entry within a row is a root-to-leaf descent that branches in
//! proportion to the subtree sums.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance for Hermitian mirror conflicts and imaginary diagonals.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Complete binary tree of partial sums over a dense leaf array.
///
/// `nodes[1]` is the root and the leaves occupy `nodes[cap..2 * cap]`.
#[derive(Clone, Debug)]
pub(crate) struct SumTree {
    cap: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub(crate) fn from_leaves(leaves: &[f64]) -> Self {
        let cap = leaves.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + leaves.len()].copy_from_slice(leaves);
        for i in (1..cap).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { cap, nodes }
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub(crate) fn leaf(&self, k: usize) -> f64 {
        self.nodes[self.cap + k]
    }

    pub(crate) fn depth(&self) -> usize {
        self.cap.trailing_zeros() as usize
    }

    /// Overwrite one leaf and refresh the sums on its path to the root.
    pub(crate) fn update(&mut self, k: usize, value: f64) {
        let mut idx = self.cap + k;
        self.nodes[idx] = value;
        while idx > 1 {
            idx /= 2;
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1];
        }
    }

    /// Descend from the root using `u ∈ [0, 1)`; returns the leaf slot.
    ///
    /// A child with zero mass is never entered, so the returned leaf always
    /// carries positive mass when the root does.
    #[inline]
    pub(crate) fn descend(&self, u: f64, touched: &mut usize) -> usize {
        let mut target = u * self.nodes[1];
        let mut idx = 1;
        *touched += 1;
        while idx < self.cap {
            let left = self.nodes[2 * idx];
            let right = self.nodes[2 * idx + 1];
            *touched += 2;
            // Branch-free: `target >= left` also covers an empty left child.
            let go_right = (target >= left) & (right > 0.0);
            target -= left * f64::from(u8::from(go_right));
            idx = 2 * idx + usize::from(go_right);
        }
        idx - self.cap
    }

    /// Product of the branch ratios on the path to leaf `k`.
    pub(crate) fn path_probability(&self, k: usize) -> f64 {
        let mut idx = self.cap + k;
        let mut prob = 1.0;
        while idx > 1 {
            let parent = idx / 2;
            let sum = self.nodes[2 * parent] + self.nodes[2 * parent + 1];
            if sum <= 0.0 {
                return 0.0;
            }
            prob *= self.nodes[idx] / sum;
            idx = parent;
        }
        prob
    }

    /// Largest relative mismatch between a node and the sum of its children.
    pub(crate) fn max_defect(&self) -> f64 {
        (1..self.cap)
            .map(|i| {
                let sum = self.nodes[2 * i] + self.nodes[2 * i + 1];
                let scale = sum.abs().max(self.nodes[i].abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (self.nodes[i] - sum).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
struct RowTree {
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    tree: SumTree,
}

impl RowTree {
    fn new(cols: Vec<usize>, vals: Vec<Complex64>) -> Self {
        let leaves: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
        Self {
            tree: SumTree::from_leaves(&leaves),
            cols,
            vals,
        }
    }

    fn slot(&self, j: usize) -> Option<usize> {
        self.cols.binary_search(&j).ok()
    }
}

/// A Hermitian matrix held in the two-level sampling tree structure.
#[derive(Clone, Debug)]
pub struct SampledMatrix {
    n: usize,
    rank_hint: usize,
    row_ids: Vec<usize>,
    rows: Vec<RowTree>,
    norms: SumTree,
}

impl SampledMatrix {
    /// Build from 0-based `(i, j, value)` triples.
    ///
    /// Off-diagonal entries are mirrored by conjugation, so listing only the
    /// upper triangle is enough. Listing both `(i, j)` and `(j, i)` is allowed
    /// when they agree within [`HERMITIAN_TOL`].
    pub fn build(
        entries: impl IntoIterator<Item = (usize, usize, Complex64)>,
        n: usize,
        rank_hint: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Index("dimension must be positive".into()));
        }
        let mut explicit: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Index(format!("({i}, {j}) outside {n}x{n}")));
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({i}, {j})")));
            }
            let v = if i == j {
                if v.im.abs() > HERMITIAN_TOL {
                    return Err(Error::Hermiticity(format!(
                        "diagonal entry ({i}, {i}) has imaginary part {}",
                        v.im
                    )));
                }
                Complex64::new(v.re, 0.0)
            } else {
                v
            };
            if explicit.insert((i, j), v).is_some() {
                return Err(Error::Duplicate(i, j));
            }
        }
        let mut full = explicit.clone();
        for (&(i, j), &v) in &explicit {
            if i == j {
                continue;
            }
            match explicit.get(&(j, i)) {
                Some(w) if (w - v.conj()).norm() > HERMITIAN_TOL => {
                    return Err(Error::Hermiticity(format!(
                        "M({i},{j}) = {v} but M({j},{i}) = {w}"
                    )));
                }
                Some(_) => {}
                None => {
                    full.insert((j, i), v.conj());
                }
            }
        }

        let mut row_ids = Vec::new();
        let mut rows = Vec::new();
        let mut current: Option<usize> = None;
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for ((i, j), v) in full {
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            if current != Some(i) {
                if let Some(r) = current {
                    row_ids.push(r);
                    rows.push(RowTree::new(std::mem::take(&mut cols), std::mem::take(&mut vals)));
                }
                current = Some(i);
            }
            cols.push(j);
            vals.push(v);
        }
        if let Some(r) = current {
            row_ids.push(r);
            rows.push(RowTree::new(cols, vals));
        }
        let leaves: Vec<f64> = rows.iter().map(|r| r.tree.total()).collect();
        Ok(Self {
            n,
            rank_hint: rank_hint.max(1),
            row_ids,
            norms: SumTree::from_leaves(&leaves),
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank_hint(&self) -> usize {
        self.rank_hint
    }

    /// Number of stored nonzero entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.cols.len()).sum()
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::Index(format!("{i} outside 0..{}", self.n)))
        } else {
            Ok(())
        }
    }

    #[inline]
    fn row_slot(&self, i: usize) -> Option<usize> {
        self.row_ids.binary_search(&i).ok()
    }

    /// `M(i, j)`, zero for unstored positions.
    pub fn query(&self, i: usize, j: usize) -> Result<Complex64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.entry(i, j))
    }

    /// Unchecked variant of [`query`](Self::query) for in-range indices.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.row_slot(i)
            .and_then(|r| {
                let row = &self.rows[r];
                row.slot(j).map(|s| row.vals[s])
            })
            .unwrap_or_default()
    }

    pub fn row_norm_sq(&self, i: usize) -> Result<f64> {
        self.check(i)?;
        Ok(self.row_slot(i).map_or(0.0, |r| self.rows[r].tree.total()))
    }

    pub fn row_norm(&self, i: usize) -> Result<f64> {
        self.row_norm_sq(i).map(f64::sqrt)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.norms.total()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Sample row `i` with probability `‖M(i,·)‖² / ‖M‖²_F`.
    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.sample_row_traced(rng).map(|(i, _)| i)
    }

    /// [`sample_row`](Self::sample_row) plus the number of tree nodes read.
    pub fn sample_row_traced<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize)> {
        if self.norms.total() <= 0.0 {
            return Err(Error::ZeroMass("matrix has zero Frobenius norm".into()));
        }
        let mut touched = 0;
        let slot = self.norms.descend(rng.random::<f64>(), &mut touched);
        Ok((self.row_ids[slot], touched))
    }

    /// Sample column `j` with probability `|M(i,j)|² / ‖M(i,·)‖²`.
    pub fn sample_entry_in_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        self.sample_entry_in_row_traced(i, rng).map(|(j, _)| j)
    }

    pub fn sample_entry_in_row_traced<R: Rng + ?Sized>(
        &self,
        i: usize,
        rng: &mut R,
    ) -> Result<(usize, usize)> {
        self.check(i)?;
        let row = self
            .row_slot(i)
            .map(|r| &self.rows[r])
            .filter(|r| r.tree.total() > 0.0)
            .ok_or_else(|| Error::ZeroMass(format!("row {i} is empty")))?;
        let mut touched = 0;
        let slot = row.tree.descend(rng.random::<f64>(), &mut touched);
        Ok((row.cols[slot], touched))
    }

    /// Draw `(i, j)` with probability `|M(i,j)|² / ‖M‖²_F` and return the
    /// stored value alongside.
    #[inline]
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize, Complex64)> {
        if self.norms.total() <= 0.0 {
            return Err(Error::ZeroMass("matrix has zero Frobenius norm".into()));
        }
        let mut touched = 0;
        let r = self.norms.descend(rng.random::<f64>(), &mut touched);
        let row = &self.rows[r];
        let s = row.tree.descend(rng.random::<f64>(), &mut touched);
        Ok((self.row_ids[r], row.cols[s], row.vals[s]))
    }

    /// Probability of reaching row `i` computed as the product of branch
    /// ratios along its descent path.
    pub fn row_descent_probability(&self, i: usize) -> f64 {
        self.row_slot(i)
            .map_or(0.0, |r| self.norms.path_probability(r))
    }

    /// Probability of reaching column `j` within row `i` by tree descent.
    pub fn entry_descent_probability(&self, i: usize, j: usize) -> f64 {
        self.row_slot(i)
            .and_then(|r| {
                let row = &self.rows[r];
                row.slot(j).map(|s| row.tree.path_probability(s))
            })
            .unwrap_or(0.0)
    }

    /// Depth of the deepest tree (row trees and the norm tree).
    pub fn max_depth(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.tree.depth())
            .chain(std::iter::once(self.norms.depth()))
            .max()
            .unwrap_or(0)
    }

    /// Iterate over stored entries `(i, j, M(i,j))` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.row_ids.iter().zip(&self.rows).flat_map(|(&i, row)| {
            row.cols.iter().zip(&row.vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Rows that carry at least one stored entry, ascending.
    pub fn nonempty_rows(&self) -> &[usize] {
        &self.row_ids
    }

    /// Set `M(i, j) = value` and `M(j, i) = conj(value)`.
    ///
    /// Updating a stored position refreshes only the affected leaf-to-root
    /// paths. A new position reshapes its row tree and, for a new row, the
    /// norm tree.
    pub fn write(&mut self, i: usize, j: usize, value: Complex64) -> Result<()> {
        self.check(i)?;
        self.check(j)?;
        if i == j && value.im.abs() > HERMITIAN_TOL {
            return Err(Error::Hermiticity(format!(
                "diagonal entry ({i}, {i}) has imaginary part {}",
                value.im
            )));
        }
        let value = if i == j { Complex64::new(value.re, 0.0) } else { value };
        self.write_one(i, j, value);
        if i != j {
            self.write_one(j, i, value.conj());
        }
        Ok(())
    }

    fn write_one(&mut self, i: usize, j: usize, value: Complex64) {
        match self.row_ids.binary_search(&i) {
            Ok(r) => {
                let row = &mut self.rows[r];
                match row.cols.binary_search(&j) {
                    Ok(s) => {
                        row.vals[s] = value;
                        row.tree.update(s, value.norm_sqr());
                        let total = row.tree.total();
                        self.norms.update(r, total);
                    }
                    Err(s) => {
                        row.cols.insert(s, j);
                        row.vals.insert(s, value);
                        *row = RowTree::new(std::mem::take(&mut row.cols), std::mem::take(&mut row.vals));
                        let total = row.tree.total();
                        if r < self.norms.cap {
                            self.norms.update(r, total);
                        } else {
                            self.rebuild_norms();
                        }
                    }
                }
            }
            Err(r) => {
                self.row_ids.insert(r, i);
                self.rows.insert(r, RowTree::new(vec![j], vec![value]));
                self.rebuild_norms();
            }
        }
    }

    fn rebuild_norms(&mut self) {
        let leaves: Vec<f64> = self.rows.iter().map(|r| r.tree.total()).collect();
        self.norms = SumTree::from_leaves(&leaves);
    }

    /// Recompute every tree bottom-up from the stored leaf values.
    pub fn rebuild(&mut self) {
        for row in &mut self.rows {
            *row = RowTree::new(std::mem::take(&mut row.cols), std::mem::take(&mut row.vals));
        }
        self.rebuild_norms();
    }

    /// Largest relative mismatch between any internal node and the sum of
    /// its children, including the row-root/norm-leaf link.
    pub fn max_tree_defect(&self) -> f64 {
        let link = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let a = row.tree.total();
                let b = self.norms.leaf(r);
                let scale = a.abs().max(b.abs());
                if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
            })
            .fold(0.0, f64::max);
        self.rows
            .iter()
            .map(|r| r.tree.max_defect())
            .fold(self.norms.max_defect(), f64::max)
            .max(link)
    }
}

/// Sampling and query access shared by stored matrices and their views.
pub trait SamplingAccess: Send + Sync {
    fn dim(&self) -> usize;
    /// Entry `M(i, j)` for in-range indices.
    fn entry(&self, i: usize, j: usize) -> Complex64;
    fn row_norm_sq(&self, i: usize) -> f64;
    fn frobenius_norm_sq(&self) -> f64;
    fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize>;
    fn sample_entry_in_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize>;
    /// Joint draw of `(i, j)` with probability `|M(i,j)|² / ‖M‖²_F`, with the value.
    fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize, Complex64)>;
}

impl SamplingAccess for SampledMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    #[inline]
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        SampledMatrix::entry(self, i, j)
    }
    fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_slot(i).map_or(0.0, |r| self.rows[r].tree.total())
    }
    fn frobenius_norm_sq(&self) -> f64 {
        self.norms.total()
    }
    fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        SampledMatrix::sample_row(self, rng)
    }
    fn sample_entry_in_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        SampledMatrix::sample_entry_in_row(self, i, rng)
    }
    #[inline]
    fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize, Complex64)> {
        SampledMatrix::sample_entry(self, rng)
    }
}

/// A shared stored matrix, optionally viewed with its sign flipped.
///
/// Negation leaves every sampling distribution unchanged since `|−x|² = |x|²`;
/// only queried values change sign.
#[derive(Clone, Debug)]
pub struct SignedMatrix {
    matrix: Arc<SampledMatrix>,
    negated: bool,
}

impl SignedMatrix {
    pub fn new(matrix: Arc<SampledMatrix>) -> Self {
        Self { matrix, negated: false }
    }

    pub fn negated(matrix: Arc<SampledMatrix>) -> Self {
        Self { matrix, negated: true }
    }

    /// The same storage with the opposite sign.
    pub fn negate(&self) -> Self {
        Self {
            matrix: Arc::clone(&self.matrix),
            negated: !self.negated,
        }
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn sign(&self) -> f64 {
        if self.negated { -1.0 } else { 1.0 }
    }

    pub fn inner(&self) -> &Arc<SampledMatrix> {
        &self.matrix
    }

    pub fn rank_hint(&self) -> usize {
        self.matrix.rank_hint()
    }
}

impl From<SampledMatrix> for SignedMatrix {
    fn from(m: SampledMatrix) -> Self {
        Self::new(Arc::new(m))
    }
}

impl SamplingAccess for SignedMatrix {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    #[inline]
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        let v = self.matrix.entry(i, j);
        if self.negated { -v } else { v }
    }
    fn row_norm_sq(&self, i: usize) -> f64 {
        SamplingAccess::row_norm_sq(&*self.matrix, i)
    }
    fn frobenius_norm_sq(&self) -> f64 {
        self.matrix.frobenius_norm_sq()
    }
    fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.matrix.sample_row(rng)
    }
    fn sample_entry_in_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        self.matrix.sample_entry_in_row(i, rng)
    }
    #[inline]
    fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize, Complex64)> {
        let (i, j, v) = self.matrix.sample_entry(rng)?;
        Ok((i, j, if self.negated { -v } else { v }))
    }
}
