use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::model::{ProblemInstance, SparseMatrix, VariableBounds};

/// Finite bound used for the chain variables of [`gen_cascade`].
pub const CASCADE_BOUND: f64 = 1e6;

/// A chain of `m` constraints `x_k - x_{k-1} <= 0` over `x_0..x_m`.
///
/// `x_0` is fixed to zero and every other variable starts in `[0, 1e6]`.
/// Constraint `k` can only tighten `x_k` after constraint `k - 1` has
/// tightened `x_{k-1}`, and rows are ordered so that a forward scan resolves
/// the whole chain in one pass.
pub fn gen_cascade(m: usize) -> Result<ProblemInstance> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("cascade needs at least 2 constraints, got {m}")));
    }
    let mut triplets = Vec::with_capacity(2 * m);
    for k in 1..=m {
        triplets.push((k - 1, k - 1, -1.0));
        triplets.push((k - 1, k, 1.0));
    }
    let matrix = SparseMatrix::from_triplets(&triplets, m, m + 1)?;
    let mut upper = vec![CASCADE_BOUND; m + 1];
    upper[0] = 0.0;
    ProblemInstance::new(
        format!("cascade{m}"),
        matrix,
        vec![f64::NEG_INFINITY; m],
        vec![0.0; m],
        VariableBounds::new(vec![0.0; m + 1], upper)?,
        vec![false; m + 1],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomInstanceParams {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Mean number of non-zeros per row (geometric distribution, at least 1).
    pub mean_row_len: f64,
    pub integral_fraction: f64,
    /// Probability that a variable loses one of its bounds.
    pub infinite_bound_fraction: f64,
    /// Cap on the total number of non-zeros.
    pub max_nnz: usize,
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        Self {
            num_rows: 100,
            num_cols: 100,
            mean_row_len: 6.0,
            integral_fraction: 0.3,
            infinite_bound_fraction: 0.0,
            max_nnz: 50_000,
        }
    }
}

/// Random sparse instance that is feasible by construction.
///
/// Coefficients are uniform in `[-10, 10]` away from `(-0.1, 0.1)`, bounds
/// uniform in `[-100, 100]` (integer-valued for integral variables). A hidden
/// reference point inside the bounds satisfies every constraint; each side is
/// placed between the reference activity and the activity bound, so most rows
/// can tighten something without making the system infeasible.
pub fn gen_random(params: &RandomInstanceParams, seed: u64) -> Result<ProblemInstance> {
    let (m, n) = (params.num_rows, params.num_cols);
    if n == 0 || params.mean_row_len < 1.0 {
        return Err(Error::InvalidArgument("need at least one column and a mean row length >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut integral = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let is_int = rng.gen_bool(params.integral_fraction);
        let (a, b): (f64, f64) = (rng.gen_range(-100.0..=100.0), rng.gen_range(-100.0..=100.0));
        let (mut l, mut u) = (a.min(b), a.max(b));
        if is_int {
            l = l.ceil();
            u = u.floor().max(l);
        }
        let x = if is_int {
            rng.gen_range(l as i64..=u as i64) as f64
        } else {
            rng.gen_range(l..=u)
        };
        if rng.gen_bool(params.infinite_bound_fraction) {
            if rng.gen_bool(0.5) {
                l = f64::NEG_INFINITY;
            } else {
                u = f64::INFINITY;
            }
        }
        integral.push(is_int);
        lower.push(l);
        upper.push(u);
        point.push(x);
    }

    let row_len = Geometric::new(1.0 / params.mean_row_len)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut triplets = Vec::new();
    let mut lhs = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let budget = params.max_nnz.saturating_sub(triplets.len());
        let len = ((1 + row_len.sample(&mut rng)) as usize).min(n).min(budget);
        let mut cols = sample(&mut rng, n, len).into_vec();
        cols.sort_unstable();

        let (mut at_point, mut min_act, mut max_act) = (0.0, 0.0, 0.0);
        for &j in &cols {
            let magnitude: f64 = rng.gen_range(0.1..=10.0);
            let a = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
            triplets.push((i, j, a));
            at_point += a * point[j];
            let (lo, hi) = if a > 0.0 { (lower[j], upper[j]) } else { (upper[j], lower[j]) };
            min_act += a * lo;
            max_act += a * hi;
        }
        // Gaps between the reference activity and the activity bounds; infinite
        // activity bounds get a nominal gap.
        let up_gap = if max_act.is_finite() { max_act - at_point } else { 100.0 };
        let down_gap = if min_act.is_finite() { at_point - min_act } else { 100.0 };
        let r = at_point + rng.gen_range(0.0..0.6) * up_gap;
        let l = at_point - rng.gen_range(0.0..0.6) * down_gap;
        let (row_lhs, row_rhs) = match rng.gen_range(0..10) {
            0..=3 => (f64::NEG_INFINITY, r),
            4..=7 => (l, f64::INFINITY),
            _ => (l, r),
        };
        lhs.push(row_lhs);
        rhs.push(row_rhs);
    }

    let matrix = SparseMatrix::from_triplets(&triplets, m, n)?;
    ProblemInstance::new(
        format!("random_{m}x{n}_s{seed}"),
        matrix,
        lhs,
        rhs,
        VariableBounds::new(lower, upper)?,
        integral,
    )
}
