//! The closed-form counterfactual transform: given a preference source
//! table and target marginals, produce the unique table that carries the
//! source's generalized Liu-Lu matrix on the target marginals.
//!
//! Construction: the measure formula is inverted at every cut to give the
//! counterfactual corner sums
//! `S*(i+1, j+1) = floor(Q*) + theta_ij * (min(R*, C*) - floor(Q*))`,
//! where `R*`, `C*` are the target tail sums past the cut and
//! `Q* = R* C* / total`. Boundary corner sums are the target tails
//! themselves, and cells fall out by double differencing. The result is
//! unique and deterministic; negative cells are reported, never clamped,
//! because a negative entry is the transform's signal that the requested
//! counterfactual is not realistic.

use crate::liulu::{self, CutFlag, LiuLuError, LiuLuMatrix};
use crate::tables::{ContingencyTable, TableError};
use crate::DEFAULT_NEGATIVE_TOLERANCE;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NmError {
    #[error("target marginal sums differ: rows {row_sum} vs cols {col_sum}")]
    TargetSumMismatch { row_sum: f64, col_sum: f64 },
    #[error("negative {axis} target at index {index}: {value}")]
    NegativeTarget {
        axis: &'static str,
        index: usize,
        value: f64,
    },
    #[error("target total must be positive, got {total}")]
    ZeroTargetTotal { total: f64 },
    #[error("source is {source_rows}x{source_cols} but targets describe {target_rows}x{target_cols}")]
    DimensionMismatch {
        source_rows: usize,
        source_cols: usize,
        target_rows: usize,
        target_cols: usize,
    },
    #[error("degenerate source cut ({i},{j}): the sorting measure is undefined there")]
    DegenerateSourceCut { i: usize, j: usize },
    #[error("degenerate target cut ({i},{j}): tail min equals floor(Q*), the counterfactual is undefined there")]
    DegenerateTargetCut { i: usize, j: usize },
    #[error(transparent)]
    LiuLu(#[from] LiuLuError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Row and column totals a transform must reproduce. Both vectors must be
/// nonnegative and share one grand total (within 1e-9).
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMarginals {
    row_targets: Vec<f64>,
    col_targets: Vec<f64>,
}

impl TargetMarginals {
    pub fn new(row_targets: Vec<f64>, col_targets: Vec<f64>) -> Result<Self, NmError> {
        for (index, &value) in row_targets.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(NmError::NegativeTarget { axis: "row", index, value });
            }
        }
        for (index, &value) in col_targets.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(NmError::NegativeTarget { axis: "column", index, value });
            }
        }
        let row_sum: f64 = row_targets.iter().sum();
        let col_sum: f64 = col_targets.iter().sum();
        if (row_sum - col_sum).abs() > 1e-9 {
            return Err(NmError::TargetSumMismatch { row_sum, col_sum });
        }
        Ok(Self { row_targets, col_targets })
    }

    /// Targets read off another observed table's marginals.
    pub fn from_table(t: &ContingencyTable) -> Self {
        let (row_targets, col_targets) = t.marginals();
        Self { row_targets, col_targets }
    }

    pub fn row_targets(&self) -> &[f64] {
        &self.row_targets
    }

    pub fn col_targets(&self) -> &[f64] {
        &self.col_targets
    }

    pub fn total(&self) -> f64 {
        self.row_targets.iter().sum()
    }
}

/// Counterfactual survival sums: entry (r, c) (0-based) is the transformed
/// mass over rows > r and columns > c of the 1-based table, i.e. the spec's
/// S*(r+1, c+1). Shape (n+1) x (m+1) with zero last row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerSums {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl CornerSums {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * (self.m + 1) + c]
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.m
    }
}

/// One interior corner sum: the inverted measure formula at a single cut.
#[inline]
pub(crate) fn corner_value(theta: f64, row_tail: f64, col_tail: f64, total: f64) -> f64 {
    let q_floor = liulu::floor_exact(row_tail, col_tail, total);
    q_floor + theta * (row_tail.min(col_tail) - q_floor)
}

/// Checks a target cut for degeneracy and returns (tail min, floor(Q*)).
#[inline]
pub(crate) fn target_cut_parts(row_tail: f64, col_tail: f64, total: f64) -> Option<(f64, f64)> {
    let q_floor = liulu::floor_exact(row_tail, col_tail, total);
    let min_tail = row_tail.min(col_tail);
    if (min_tail - q_floor).abs() <= 1e-9 * min_tail.abs().max(1.0) {
        None
    } else {
        Some((min_tail, q_floor))
    }
}

pub(crate) fn suffix_sums(v: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        tails[i] = tails[i + 1] + v[i];
    }
    tails
}

/// The counterfactual corner sums for a source table and target marginals.
pub fn nm_corner_sums(
    source: &ContingencyTable,
    targets: &TargetMarginals,
) -> Result<CornerSums, NmError> {
    let (n, m) = (source.n_rows(), source.n_cols());
    if targets.row_targets.len() != n || targets.col_targets.len() != m {
        return Err(NmError::DimensionMismatch {
            source_rows: n,
            source_cols: m,
            target_rows: targets.row_targets.len(),
            target_cols: targets.col_targets.len(),
        });
    }
    let measure = liulu::ll_generalized(source)?;
    corner_sums_from_measure(&measure, targets)
}

/// Corner sums from a precomputed source measure; shared with the lattice
/// search engines, which reuse one measure across many target vectors.
pub(crate) fn corner_sums_from_measure(
    measure: &LiuLuMatrix,
    targets: &TargetMarginals,
) -> Result<CornerSums, NmError> {
    let n = measure.n_row_cuts() + 1;
    let m = measure.n_col_cuts() + 1;
    for i in 1..n {
        for j in 1..m {
            if measure.flag(i, j) == CutFlag::DegenerateDenominator {
                return Err(NmError::DegenerateSourceCut { i, j });
            }
        }
    }
    let row_tails = suffix_sums(&targets.row_targets);
    let col_tails = suffix_sums(&targets.col_targets);
    let total = row_tails[0];
    if total <= 0.0 {
        return Err(NmError::ZeroTargetTotal { total });
    }
    let mut values = vec![0.0; (n + 1) * (m + 1)];
    let stride = m + 1;
    values[0] = total;
    for r in 1..n {
        values[r * stride] = row_tails[r];
    }
    for c in 1..m {
        values[c] = col_tails[c];
    }
    for i in 1..n {
        for j in 1..m {
            let (row_tail, col_tail) = (row_tails[i], col_tails[j]);
            if target_cut_parts(row_tail, col_tail, total).is_none() {
                return Err(NmError::DegenerateTargetCut { i, j });
            }
            values[i * stride + j] = corner_value(measure.value(i, j), row_tail, col_tail, total);
        }
    }
    Ok(CornerSums { n, m, values })
}

/// A cell of the transformed table that came out negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegativeCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A transformed table with its negative-cell report and the per-cut
/// measure (values and flags) inherited from the source.
#[derive(Clone, Debug)]
pub struct NmResult {
    pub table: ContingencyTable,
    pub negative_cells: Vec<NegativeCell>,
    pub source_measure: LiuLuMatrix,
}

/// Transforms a source table onto target marginals, preserving the source's
/// generalized Liu-Lu matrix at every non-degenerate cut.
pub fn nm_transform(
    source: &ContingencyTable,
    targets: &TargetMarginals,
) -> Result<NmResult, NmError> {
    let (n, m) = (source.n_rows(), source.n_cols());
    if targets.row_targets.len() != n || targets.col_targets.len() != m {
        return Err(NmError::DimensionMismatch {
            source_rows: n,
            source_cols: m,
            target_rows: targets.row_targets.len(),
            target_cols: targets.col_targets.len(),
        });
    }
    let measure = liulu::ll_generalized(source)?;
    let sums = corner_sums_from_measure(&measure, targets)?;
    let stride = m + 1;
    let s = |r: usize, c: usize| sums.values[r * stride + c];
    let mut counts = Vec::with_capacity(n * m);
    for r in 0..n {
        for c in 0..m {
            counts.push(s(r, c) - s(r + 1, c) - s(r, c + 1) + s(r + 1, c + 1));
        }
    }
    let table = ContingencyTable::new(counts, source.row_labels().to_vec(), source.col_labels().to_vec())?;
    let negative_cells = collect_negative_cells(&table, DEFAULT_NEGATIVE_TOLERANCE);
    Ok(NmResult { table, negative_cells, source_measure: measure })
}

pub(crate) fn collect_negative_cells(table: &ContingencyTable, tolerance: f64) -> Vec<NegativeCell> {
    let mut cells = Vec::new();
    for row in 0..table.n_rows() {
        for col in 0..table.n_cols() {
            let value = table.get(row, col);
            if value < -tolerance {
                cells.push(NegativeCell { row, col, value });
            }
        }
    }
    cells
}

/// Transform onto the marginals of another observed table.
pub fn nm_transform_to_availability(
    source: &ContingencyTable,
    availability: &ContingencyTable,
) -> Result<NmResult, NmError> {
    nm_transform(source, &TargetMarginals::from_table(availability))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<f64>>) -> ContingencyTable {
        ContingencyTable::from_rows(rows).unwrap()
    }

    fn targets(rows: &[f64], cols: &[f64]) -> TargetMarginals {
        TargetMarginals::new(rows.to_vec(), cols.to_vec()).unwrap()
    }

    #[test]
    fn corner_sums_balanced_2x2() {
        // theta = 14/24; Q* = 25 so S*(2,2) = 25 + theta*25.
        let src = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let sums = nm_corner_sums(&src, &targets(&[50.0, 50.0], &[50.0, 50.0])).unwrap();
        let expected = 25.0 + (14.0 / 24.0) * 25.0;
        assert!((sums.get(1, 1) - expected).abs() < 1e-12);
        assert_eq!(sums.get(0, 0), 100.0);
        assert_eq!(sums.get(1, 0), 50.0);
        assert_eq!(sums.get(0, 1), 50.0);
        assert_eq!(sums.get(2, 1), 0.0);
    }

    #[test]
    fn corner_sums_identity_targets() {
        let src = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let sums = nm_corner_sums(&src, &TargetMarginals::from_table(&src)).unwrap();
        // The source's own survival sums.
        assert_eq!(sums.get(0, 0), 100.0);
        assert!((sums.get(1, 1) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn corner_sums_perfect_sorting_3x3() {
        let src = table(vec![
            vec![10.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 10.0],
        ]);
        let sums = nm_corner_sums(&src, &targets(&[12.0, 10.0, 8.0], &[12.0, 10.0, 8.0])).unwrap();
        assert_eq!(sums.get(1, 1), 18.0);
        assert_eq!(sums.get(1, 2), 8.0);
        assert_eq!(sums.get(2, 1), 8.0);
        assert_eq!(sums.get(2, 2), 8.0);
    }

    #[test]
    fn transform_balanced_2x2() {
        let src = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let res = nm_transform(&src, &targets(&[50.0, 50.0], &[50.0, 50.0])).unwrap();
        let hh = 25.0 + (14.0 / 24.0) * 25.0;
        let expect = [100.0 - 50.0 - 50.0 + hh, 50.0 - hh, 50.0 - hh, hh];
        for (got, want) in res.table.counts().iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        // marginals exact, measure preserved
        let (rows, cols) = res.table.marginals();
        assert!((rows[0] - 50.0).abs() < 1e-9 && (cols[1] - 50.0).abs() < 1e-9);
        let out_measure = liulu::ll_generalized(&res.table).unwrap();
        assert!(out_measure.max_ok_diff(&res.source_measure) < 1e-9);
        assert!(res.negative_cells.is_empty());
    }

    #[test]
    fn transform_identity() {
        let src = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let res = nm_transform(&src, &TargetMarginals::from_table(&src)).unwrap();
        assert!(res.table.max_abs_diff(&src) <= 1e-12);
    }

    #[test]
    fn transform_perfect_sorting_stays_diagonal() {
        let src = table(vec![
            vec![10.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 10.0],
        ]);
        let res = nm_transform(&src, &targets(&[12.0, 10.0, 8.0], &[12.0, 10.0, 8.0])).unwrap();
        let want = table(vec![
            vec![12.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 8.0],
        ]);
        assert!(res.table.max_abs_diff(&want) <= 1e-9);
    }

    #[test]
    fn transform_determinism_bit_identical() {
        let src = table(vec![vec![7.0, 3.0, 1.0], vec![2.0, 9.0, 4.0], vec![1.0, 2.0, 8.0]]);
        let t = targets(&[12.0, 14.0, 11.0], &[9.0, 16.0, 12.0]);
        let a = nm_transform(&src, &t).unwrap();
        let b = nm_transform(&src, &t).unwrap();
        assert_eq!(a.table.counts(), b.table.counts());
    }

    #[test]
    fn convenience_form_matches_explicit_targets() {
        let src = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let avail = table(vec![vec![20.0, 30.0], vec![30.0, 20.0]]);
        let a = nm_transform_to_availability(&src, &avail).unwrap();
        let b = nm_transform(&src, &targets(&[50.0, 50.0], &[50.0, 50.0])).unwrap();
        assert_eq!(a.table.counts(), b.table.counts());
    }

    #[test]
    fn zero_target_tail_is_degenerate() {
        let src = table(vec![vec![5.0, 1.0], vec![1.0, 5.0]]);
        let err = nm_transform(&src, &targets(&[12.0, 0.0], &[6.0, 6.0])).unwrap_err();
        assert!(matches!(err, NmError::DegenerateTargetCut { i: 1, j: 1 }));
    }

    #[test]
    fn degenerate_source_cut_is_rejected() {
        // Source cut (1,1): high row 10, high col 100, Q = 10 = min -> degenerate.
        let src = table(vec![vec![0.0, 90.0], vec![0.0, 10.0]]);
        let err = nm_transform(&src, &targets(&[50.0, 50.0], &[50.0, 50.0])).unwrap_err();
        assert!(matches!(err, NmError::DegenerateSourceCut { i: 1, j: 1 }));
    }

    #[test]
    fn target_validation() {
        assert!(matches!(
            TargetMarginals::new(vec![1.0, -2.0], vec![-1.0]),
            Err(NmError::NegativeTarget { .. })
        ));
        assert!(matches!(
            TargetMarginals::new(vec![1.0, 2.0], vec![4.0]),
            Err(NmError::TargetSumMismatch { .. })
        ));
    }

    #[test]
    fn negative_assortativity_cut_still_transforms() {
        // Anti-sorted source: theta < 0 at the cut, transform stays total and
        // the flag rides along in the result.
        let src = table(vec![vec![2.0, 8.0], vec![9.0, 1.0]]);
        let res = nm_transform(&src, &targets(&[10.0, 10.0], &[11.0, 9.0])).unwrap();
        assert!(res.source_measure.has_negative_cut());
        let (rows, _) = res.table.marginals();
        assert!((rows[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn works_with_zero_cells_in_source() {
        let src = table(vec![vec![6.0, 0.0, 1.0], vec![0.0, 5.0, 2.0], vec![1.0, 0.0, 7.0]]);
        let res = nm_transform(&src, &targets(&[8.0, 8.0, 6.0], &[8.0, 6.0, 8.0])).unwrap();
        let out_measure = liulu::ll_generalized(&res.table).unwrap();
        assert!(out_measure.max_ok_diff(&res.source_measure) < 1e-9);
    }
}
