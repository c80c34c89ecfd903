use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ProblemInstance, SparseMatrix, VariableBounds};

/// Row and column orderings of a permuted instance.
///
/// `row_perm[new] = old` and `col_perm[new] = old`: position `new` of the
/// permuted instance holds constraint / variable `old` of the original.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPair {
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub seed: u64,
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

impl PermutationPair {
    pub fn is_valid(&self) -> bool {
        let check = |p: &[usize]| {
            let mut seen = vec![false; p.len()];
            p.iter().all(|&k| k < p.len() && !std::mem::replace(&mut seen[k], true))
        };
        check(&self.row_perm) && check(&self.col_perm)
    }

    /// Map bounds of the permuted instance back to the original variable order.
    pub fn restore_bounds(&self, permuted: &VariableBounds) -> VariableBounds {
        let mut lower = vec![0.0; permuted.len()];
        let mut upper = vec![0.0; permuted.len()];
        for (new, &old) in self.col_perm.iter().enumerate() {
            lower[old] = permuted.lower[new];
            upper[old] = permuted.upper[new];
        }
        VariableBounds { lower, upper }
    }
}

/// Shuffle constraints and variables with a seeded Fisher-Yates shuffle.
pub fn permute_instance(instance: &ProblemInstance, seed: u64) -> (ProblemInstance, PermutationPair) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row_perm: Vec<usize> = (0..instance.num_rows()).collect();
    let mut col_perm: Vec<usize> = (0..instance.num_cols()).collect();
    row_perm.shuffle(&mut rng);
    col_perm.shuffle(&mut rng);

    let col_new = inverse(&col_perm);
    let matrix = &instance.matrix;
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for (new_row, &old_row) in row_perm.iter().enumerate() {
        let (cols, values) = matrix.row(old_row);
        triplets.extend(cols.iter().zip(values).map(|(&j, &v)| (new_row, col_new[j], v)));
    }
    let permuted_matrix = SparseMatrix::from_triplets(&triplets, matrix.num_rows, matrix.num_cols)
        .expect("permuted indices stay in range");

    let pick = |v: &[f64], perm: &[usize]| perm.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let permuted = ProblemInstance {
        name: format!("{}_perm{seed}", instance.name),
        matrix: permuted_matrix,
        lhs: pick(&instance.lhs, &row_perm),
        rhs: pick(&instance.rhs, &row_perm),
        bounds: VariableBounds {
            lower: pick(&instance.bounds.lower, &col_perm),
            upper: pick(&instance.bounds.upper, &col_perm),
        },
        integral: col_perm.iter().map(|&k| instance.integral[k]).collect(),
    };
    (permuted, PermutationPair { row_perm, col_perm, seed })
}
