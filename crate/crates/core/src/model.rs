//! Core data types shared by the engines and the harness.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default magnitude at or above which a value is treated as infinite.
pub const DEFAULT_INFINITY: f64 = 1e20;

/// Map values of magnitude `>= threshold` to the matching signed infinity.
#[inline]
pub fn normalize_infinity(v: f64, threshold: f64) -> f64 {
    if v >= threshold {
        f64::INFINITY
    } else if v <= -threshold {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Constraint matrix in compressed sparse row (CSR) form.
///
/// Canonical form: column indices strictly increasing within each row and no
/// explicitly stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Build a canonical matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate positions are summed, entries that are exactly zero after
    /// summation are dropped, and columns are sorted within each row.
    pub fn from_triplets(
        entries: &[(usize, usize, f64)],
        num_rows: usize,
        num_cols: usize,
    ) -> Result<Self> {
        for &(r, c, _) in entries {
            if r >= num_rows || c >= num_cols {
                return Err(Error::Structural(format!(
                    "entry ({r}, {c}) outside a {num_rows}x{num_cols} matrix"
                )));
            }
        }
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; num_rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (r, c, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == r && sorted[k].1 == c {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..num_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { num_rows, num_cols, row_ptr, col_idx, values })
    }

    pub fn empty(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            row_ptr: vec![0; num_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row_nnz(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    /// Column indices and coefficients of one row.
    #[inline]
    pub fn row(&self, row: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Check every structural invariant of the canonical form.
    pub fn validate(&self) -> Result<()> {
        validate_compressed(
            self.num_rows,
            self.num_cols,
            &self.row_ptr,
            &self.col_idx,
            &self.values,
        )
    }

    /// Column-major copy of the same matrix.
    pub fn to_csc(&self) -> ColumnMajorMatrix {
        let (col_ptr, row_idx, values) = transpose(
            self.num_rows,
            self.num_cols,
            &self.row_ptr,
            &self.col_idx,
            &self.values,
        );
        ColumnMajorMatrix {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            col_ptr,
            row_idx,
            values,
        }
    }
}

/// Compressed sparse column (CSC) mirror of a [`SparseMatrix`], used by the
/// sequential engine to find every constraint containing a variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMajorMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl ColumnMajorMatrix {
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn col_nnz(&self, col: usize) -> usize {
        self.col_ptr[col + 1] - self.col_ptr[col]
    }

    #[inline]
    pub fn col(&self, col: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn validate(&self) -> Result<()> {
        validate_compressed(
            self.num_cols,
            self.num_rows,
            &self.col_ptr,
            &self.row_idx,
            &self.values,
        )
    }

    pub fn to_csr(&self) -> SparseMatrix {
        let (row_ptr, col_idx, values) = transpose(
            self.num_cols,
            self.num_rows,
            &self.col_ptr,
            &self.row_idx,
            &self.values,
        );
        SparseMatrix {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Counting-sort transpose. Emits minor indices in increasing order because
/// the major dimension is scanned in order.
fn transpose(
    major: usize,
    minor: usize,
    ptr: &[usize],
    idx: &[usize],
    values: &[f64],
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut out_ptr = vec![0usize; minor + 1];
    for &j in idx {
        out_ptr[j + 1] += 1;
    }
    for j in 0..minor {
        out_ptr[j + 1] += out_ptr[j];
    }
    let mut next = out_ptr.clone();
    let mut out_idx = vec![0usize; idx.len()];
    let mut out_val = vec![0.0; idx.len()];
    for i in 0..major {
        for k in ptr[i]..ptr[i + 1] {
            let j = idx[k];
            let dst = next[j];
            next[j] += 1;
            out_idx[dst] = i;
            out_val[dst] = values[k];
        }
    }
    (out_ptr, out_idx, out_val)
}

fn validate_compressed(
    major: usize,
    minor: usize,
    ptr: &[usize],
    idx: &[usize],
    values: &[f64],
) -> Result<()> {
    if ptr.len() != major + 1 {
        return Err(Error::Structural(format!(
            "pointer array has length {}, expected {}",
            ptr.len(),
            major + 1
        )));
    }
    if ptr[0] != 0 || ptr[major] != idx.len() || idx.len() != values.len() {
        return Err(Error::Structural("pointer array does not span the entries".into()));
    }
    for i in 0..major {
        if ptr[i] > ptr[i + 1] {
            return Err(Error::Structural(format!("pointer array decreases at {i}")));
        }
        let seg = &idx[ptr[i]..ptr[i + 1]];
        if seg.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural(format!("indices of line {i} not strictly increasing")));
        }
        if seg.iter().any(|&j| j >= minor) {
            return Err(Error::Structural(format!("index out of range in line {i}")));
        }
    }
    if values.iter().any(|&v| v == 0.0 || v.is_nan()) {
        return Err(Error::Structural("stored coefficient is zero or NaN".into()));
    }
    Ok(())
}

/// Lower and upper bounds per variable, with native float infinities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableBounds {
    #[serde(with = "crate::extended::vec")]
    pub lower: Vec<f64>,
    #[serde(with = "crate::extended::vec")]
    pub upper: Vec<f64>,
}

impl VariableBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension { expected: lower.len(), actual: upper.len() });
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Index of the first variable with `lower > upper`, if any.
    pub fn first_crossing(&self) -> Option<usize> {
        self.lower.iter().zip(&self.upper).position(|(l, u)| l > u)
    }
}

/// A system `lhs <= A x <= rhs` over bounded, possibly integral variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub matrix: SparseMatrix,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub bounds: VariableBounds,
    pub integral: Vec<bool>,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        matrix: SparseMatrix,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        bounds: VariableBounds,
        integral: Vec<bool>,
    ) -> Result<Self> {
        let instance = Self { name: name.into(), matrix, lhs, rhs, bounds, integral };
        instance.validate()?;
        Ok(instance)
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.matrix.num_rows
    }

    #[inline]
    pub fn num_cols(&self) -> usize {
        self.matrix.num_cols
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.validate()?;
        let m = self.matrix.num_rows;
        let n = self.matrix.num_cols;
        for (len, expected) in [
            (self.lhs.len(), m),
            (self.rhs.len(), m),
            (self.bounds.lower.len(), n),
            (self.bounds.upper.len(), n),
            (self.integral.len(), n),
        ] {
            if len != expected {
                return Err(Error::Dimension { expected, actual: len });
            }
        }
        for i in 0..m {
            let (l, r) = (self.lhs[i], self.rhs[i]);
            if l.is_nan() || r.is_nan() || l > r || l == f64::INFINITY || r == f64::NEG_INFINITY {
                return Err(Error::Structural(format!("constraint {i} has sides [{l}, {r}]")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.bounds.lower[j], self.bounds.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Structural(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }
}

/// Finite parts of the minimum and maximum activity of one constraint, plus
/// how many infinite terms were left out of each sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActivityRecord<T = f64> {
    pub min_finite: T,
    pub max_finite: T,
    pub min_inf_count: usize,
    pub max_inf_count: usize,
}

impl<T: num_traits::Float> ActivityRecord<T> {
    pub fn zero() -> Self {
        Self {
            min_finite: T::zero(),
            max_finite: T::zero(),
            min_inf_count: 0,
            max_inf_count: 0,
        }
    }

    /// Effective minimum activity: the finite sum, or `-inf` when any term is infinite.
    #[inline]
    pub fn min_activity(&self) -> T {
        if self.min_inf_count == 0 {
            self.min_finite
        } else {
            T::neg_infinity()
        }
    }

    #[inline]
    pub fn max_activity(&self) -> T {
        if self.max_inf_count == 0 {
            self.max_finite
        } else {
            T::infinity()
        }
    }

    /// Combine partial records of two disjoint pieces of a row.
    #[inline]
    pub fn combine(self, other: Self) -> Self {
        Self {
            min_finite: self.min_finite + other.min_finite,
            max_finite: self.max_finite + other.max_finite,
            min_inf_count: self.min_inf_count + other.min_inf_count,
            max_inf_count: self.max_inf_count + other.max_inf_count,
        }
    }
}

/// Execution kind of one row block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    /// Several short rows processed together, one accumulator per row.
    Stream,
    /// A single row below the vector threshold, reduced in one chunk.
    VectorNarrow,
    /// A single long row, reduced as partial sums over fixed-size chunks.
    VectorWide,
}

/// Contiguous row blocks covering `[0, num_rows)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowBlockPartition {
    pub block_starts: Vec<usize>,
    pub kinds: Vec<BlockKind>,
}

impl RowBlockPartition {
    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn block_rows(&self, block: usize) -> std::ops::Range<usize> {
        self.block_starts[block]..self.block_starts[block + 1]
    }

    /// Check the partition against a matrix and the sizing parameters that built it.
    pub fn validate(&self, matrix: &SparseMatrix, nnz_budget: usize, vector_threshold: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Structural(msg));
        if self.block_starts.len() != self.kinds.len() + 1 {
            return fail("block_starts and kinds lengths disagree".into());
        }
        if self.block_starts.first() != Some(&0) || self.block_starts.last() != Some(&matrix.num_rows) {
            return fail("blocks do not cover all rows".into());
        }
        for b in 0..self.num_blocks() {
            let rows = self.block_rows(b);
            if rows.is_empty() {
                return fail(format!("block {b} is empty"));
            }
            let nnz = matrix.row_ptr[rows.end] - matrix.row_ptr[rows.start];
            match self.kinds[b] {
                BlockKind::Stream => {
                    if rows.len() < 2 || nnz > nnz_budget {
                        return fail(format!("stream block {b} has {} rows and {nnz} nnz", rows.len()));
                    }
                }
                kind => {
                    if rows.len() != 1 {
                        return fail(format!("vector block {b} has {} rows", rows.len()));
                    }
                    let narrow = nnz < vector_threshold;
                    if narrow != (kind == BlockKind::VectorNarrow) {
                        return fail(format!("vector block {b} with {nnz} nnz tagged {kind:?}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    RoundLimit,
    Infeasible,
}

/// Outcome of one propagation run. `elapsed` covers the round loop only.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub bounds: VariableBounds,
    pub status: Status,
    pub rounds_executed: usize,
    pub total_bound_changes: usize,
    pub per_round_changes: Vec<usize>,
    pub elapsed: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarMode {
    Wide64,
    Narrow32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub round_limit: usize,
    pub infinity_threshold: f64,
    pub improvement_abs: f64,
    pub improvement_rel: f64,
    pub integrality_eps: f64,
    pub nnz_budget: usize,
    pub vector_threshold: usize,
    /// Worker threads for the parallel engine; 0 picks the machine default.
    pub worker_count: usize,
    pub scalar_mode: ScalarMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            round_limit: 100,
            infinity_threshold: DEFAULT_INFINITY,
            improvement_abs: 1e-7,
            improvement_rel: 1e-7,
            integrality_eps: 1e-6,
            nnz_budget: 1024,
            vector_threshold: 64,
            worker_count: 0,
            scalar_mode: ScalarMode::Wide64,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("infinity_threshold", self.infinity_threshold),
            ("improvement_abs", self.improvement_abs),
            ("improvement_rel", self.improvement_rel),
            ("integrality_eps", self.integrality_eps),
        ];
        for (name, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.round_limit < 1 {
            return Err(Error::Config("round_limit must be at least 1".into()));
        }
        if self.vector_threshold < 1 {
            return Err(Error::Config("vector_threshold must be at least 1".into()));
        }
        if self.nnz_budget < self.vector_threshold {
            return Err(Error::Config(format!(
                "nnz_budget ({}) must be at least vector_threshold ({})",
                self.nnz_budget, self.vector_threshold
            )));
        }
        Ok(())
    }
}
