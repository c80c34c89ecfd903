//! Result comparison, instance size classes and speedup statistics.

mod bench;

pub use bench::{run_benchmark, Aggregate, BenchMetadata, BenchRecord, BenchTable, EngineSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::model::{PropagationResult, Status};

/// Absolute / relative tolerances of the bound comparator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-8, rel: 1e-5 }
    }
}

/// `a` is the reference value, `b` the value under test: equal when both are
/// the same infinity, or both finite with `|a - b| <= t_abs + t_rel * |b|`.
pub fn bounds_equal(a: f64, b: f64, t_abs: f64, t_rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= t_abs + t_rel * b.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub var: usize,
    pub side: Side,
    pub reference: Extended,
    pub test: Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub equal: bool,
    pub status_match: bool,
    pub first_mismatch: Option<Mismatch>,
    /// Bound mismatches, plus one if the statuses differ.
    pub num_mismatches: usize,
}

/// Compare every bound of `test` against `reference`.
///
/// When both runs are infeasible the bounds are not compared: they are the
/// engine-specific partial state at the moment the empty domain was found.
pub fn compare_results(
    reference: &PropagationResult,
    test: &PropagationResult,
    tol: Tolerances,
) -> Result<ComparisonReport> {
    let n = reference.bounds.len();
    if test.bounds.len() != n {
        return Err(Error::Dimension { expected: n, actual: test.bounds.len() });
    }
    let status_match = reference.status == test.status;
    let mut first_mismatch = None;
    let mut num_mismatches = usize::from(!status_match);
    let both_infeasible = status_match && reference.status == Status::Infeasible;
    if !both_infeasible {
        for j in 0..n {
            let sides = [
                (Side::Lower, reference.bounds.lower[j], test.bounds.lower[j]),
                (Side::Upper, reference.bounds.upper[j], test.bounds.upper[j]),
            ];
            for (side, a, b) in sides {
                if !bounds_equal(a, b, tol.abs, tol.rel) {
                    num_mismatches += 1;
                    first_mismatch.get_or_insert(Mismatch {
                        var: j,
                        side,
                        reference: Extended(a),
                        test: Extended(b),
                    });
                }
            }
        }
    }
    Ok(ComparisonReport {
        equal: num_mismatches == 0,
        status_match,
        first_mismatch,
        num_mismatches,
    })
}

/// Size subsets `[s, t)` by number of variables and constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Set1,
    Set2,
    Set3,
    Set4,
    Set5,
    Set6,
    Set7,
    Set8,
}

/// Lower edges of Set-1 .. Set-8; the upper edge of Set-8 is unbounded.
const SIZE_EDGES: [usize; 9] = [
    1_000, 10_000, 20_000, 40_000, 80_000, 160_000, 320_000, 640_000, usize::MAX,
];

impl SizeClass {
    pub const ALL: [SizeClass; 8] = [
        SizeClass::Set1,
        SizeClass::Set2,
        SizeClass::Set3,
        SizeClass::Set4,
        SizeClass::Set5,
        SizeClass::Set6,
        SizeClass::Set7,
        SizeClass::Set8,
    ];

    /// An instance is in `[s, t)` when it has fewer than `t` rows and fewer
    /// than `t` columns, but at least `s` of one of them. Instances below 1k
    /// in both dimensions belong to no class.
    pub fn of(num_rows: usize, num_cols: usize) -> Option<SizeClass> {
        let largest = num_rows.max(num_cols);
        (0..8)
            .find(|&k| largest >= SIZE_EDGES[k] && largest < SIZE_EDGES[k + 1])
            .map(|k| Self::ALL[k])
    }

    pub fn label(&self) -> &'static str {
        match self {
            SizeClass::Set1 => "Set-1",
            SizeClass::Set2 => "Set-2",
            SizeClass::Set3 => "Set-3",
            SizeClass::Set4 => "Set-4",
            SizeClass::Set5 => "Set-5",
            SizeClass::Set6 => "Set-6",
            SizeClass::Set7 => "Set-7",
            SizeClass::Set8 => "Set-8",
        }
    }
}

/// exp(mean(ln x)); `None` for an empty slice.
pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let log_sum: f64 = values.iter().map(|v| v.ln()).sum();
    Some((log_sum / values.len() as f64).exp())
}

/// Percentile `p` in `[0, 100]` with linear interpolation between ranks.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}
