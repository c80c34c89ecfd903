use crate::model::{BlockKind, EngineConfig, RowBlockPartition, SparseMatrix};

/// Greedy left-to-right grouping of rows into blocks.
///
/// Consecutive rows are accumulated while their total nnz stays within
/// `nnz_budget`. A group of two or more rows is a `Stream` block; a row left
/// alone (too long, or followed by a row that does not fit) becomes a vector
/// block, narrow or wide depending on `vector_threshold`.
pub fn partition_row_blocks(matrix: &SparseMatrix, cfg: &EngineConfig) -> RowBlockPartition {
    let budget = cfg.nnz_budget;
    let mut block_starts = vec![0];
    let mut kinds = Vec::new();
    let mut row = 0;
    while row < matrix.num_rows {
        let start = row;
        let mut nnz = 0;
        while row < matrix.num_rows && nnz + matrix.row_nnz(row) <= budget {
            nnz += matrix.row_nnz(row);
            row += 1;
        }
        if row - start >= 2 {
            kinds.push(BlockKind::Stream);
        } else {
            // Either the single row fitted alone, or it exceeds the budget.
            if row == start {
                row += 1;
            }
            let kind = if matrix.row_nnz(start) < cfg.vector_threshold {
                BlockKind::VectorNarrow
            } else {
                BlockKind::VectorWide
            };
            kinds.push(kind);
        }
        block_starts.push(row);
    }
    RowBlockPartition { block_starts, kinds }
}
