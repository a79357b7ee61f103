//! The Liu-Lu sorting measures: the simplified scalar form for 2x2 tables
//! and the matrix-valued generalization with one entry per cut of the two
//! ordered axes.
//!
//! The simplified measure is the normalized distance between the realized
//! matching and random matching,
//! `(N_HH - floor(Q)) / (min(N_H., N_.H) - floor(Q))` with
//! `Q = N_H. * N_.H / N_..`. The literature defines it for positive sorting
//! only; here the raw value is always computed and a flag records negative
//! assortativity, so downstream transforms stay total. A degenerate
//! denominator (the minimum marginal equals floor(Q)) leaves the value
//! undefined and is reported as such.

use crate::tables::{ContingencyTable, TableError};
use thiserror::Error;

/// Per-cut status of a measure evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutFlag {
    Ok,
    /// The high-high cell falls short of its random-matching floor; the raw
    /// formula value is still reported.
    NegativeAssortativity,
    /// min(high-row, high-col) equals floor(Q): the measure is undefined at
    /// this cut.
    DegenerateDenominator,
}

impl CutFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CutFlag::Ok => "ok",
            CutFlag::NegativeAssortativity => "negative-assortativity",
            CutFlag::DegenerateDenominator => "degenerate-denominator",
        }
    }
}

#[derive(Debug, Error)]
pub enum LiuLuError {
    #[error("cut ({i},{j}) out of range for an {n}x{m} table")]
    CutOutOfRange { i: usize, j: usize, n: usize, m: usize },
    #[error("degenerate denominator: min(high-row total {high_row}, high-col total {high_col}) equals floor(Q) = {q_floor}")]
    DegenerateDenominator {
        high_row: f64,
        high_col: f64,
        q_floor: f64,
    },
    #[error("table must be at least 2x2 for cut measures, got {n}x{m}")]
    TooSmall { n: usize, m: usize },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// A 2x2 aggregate of an ordered table at one cut, with the low/high
/// quadrant totals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoByTwo {
    pub low_low: f64,
    pub low_high: f64,
    pub high_low: f64,
    pub high_high: f64,
}

impl TwoByTwo {
    pub fn from_table(t: &ContingencyTable) -> Result<Self, LiuLuError> {
        if t.n_rows() != 2 || t.n_cols() != 2 {
            return Err(LiuLuError::TooSmall { n: t.n_rows(), m: t.n_cols() });
        }
        Ok(Self {
            low_low: t.get(0, 0),
            low_high: t.get(0, 1),
            high_low: t.get(1, 0),
            high_high: t.get(1, 1),
        })
    }

    pub fn high_row_total(&self) -> f64 {
        self.high_low + self.high_high
    }

    pub fn high_col_total(&self) -> f64 {
        self.low_high + self.high_high
    }

    pub fn grand_total(&self) -> f64 {
        ((self.low_low + self.low_high) + self.high_low) + self.high_high
    }

    /// Expected high-high count under random matching.
    pub fn random_expectation(&self) -> f64 {
        self.high_row_total() * self.high_col_total() / self.grand_total()
    }

    /// The largest integer at most the random-matching expectation.
    pub fn random_expectation_floor(&self) -> f64 {
        floor_exact(self.high_row_total(), self.high_col_total(), self.grand_total())
    }
}

/// floor(a*b/den), hardened against floating-point artifacts.
///
/// When a, b, and den are all (within 1e-9 of) integers the quotient is
/// floored with exact 128-bit integer arithmetic. Otherwise the product
/// quotient is snapped to the nearest integer when within a relative 1e-9
/// of it (ties "Q integral" take floor(Q) = Q), and floored normally
/// otherwise.
pub(crate) fn floor_exact(a: f64, b: f64, den: f64) -> f64 {
    const SNAP: f64 = 1e-9;
    let near_int = |x: f64| x.abs() < 9.0e15 && (x - x.round()).abs() <= SNAP;
    if near_int(a) && near_int(b) && near_int(den) && den.round() != 0.0 {
        let n = a.round() as i128 * b.round() as i128;
        let d = den.round() as i128;
        return n.div_euclid(d) as f64;
    }
    let q = a * b / den;
    let r = q.round();
    if (q - r).abs() <= SNAP * q.abs().max(1.0) {
        r
    } else {
        q.floor()
    }
}

/// A measure value together with its status flag (`Ok` or
/// `NegativeAssortativity`; degenerate cuts are errors here).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutValue {
    pub value: f64,
    pub flag: CutFlag,
}

/// Relative guard under which the denominator `min - floor(Q)` is treated
/// as exactly zero.
const DEGENERATE_GUARD: f64 = 1e-9;

/// The simplified Liu-Lu measure of a 2x2 aggregate.
pub fn ll_simple(z: &TwoByTwo) -> Result<CutValue, LiuLuError> {
    let total = z.grand_total();
    if total <= 0.0 {
        return Err(TableError::ZeroTotal.into());
    }
    let high_row = z.high_row_total();
    let high_col = z.high_col_total();
    let q_floor = z.random_expectation_floor();
    let min_marginal = high_row.min(high_col);
    let denom = min_marginal - q_floor;
    if denom.abs() <= DEGENERATE_GUARD * min_marginal.abs().max(1.0) {
        return Err(LiuLuError::DegenerateDenominator { high_row, high_col, q_floor });
    }
    let value = (z.high_high - q_floor) / denom;
    let flag = if z.high_high < q_floor {
        CutFlag::NegativeAssortativity
    } else {
        CutFlag::Ok
    };
    Ok(CutValue { value, flag })
}

/// Aggregates an n x m table into the 2x2 table splitting rows after `i`
/// and columns after `j` (1-based cut indices). The grand total is
/// preserved.
pub fn cut_aggregate(t: &ContingencyTable, i: usize, j: usize) -> Result<TwoByTwo, LiuLuError> {
    let (n, m) = (t.n_rows(), t.n_cols());
    if i < 1 || i > n - 1 || j < 1 || j > m - 1 {
        return Err(LiuLuError::CutOutOfRange { i, j, n, m });
    }
    let mut quadrants = [0.0f64; 4];
    for r in 0..n {
        for c in 0..m {
            let hi_r = usize::from(r >= i);
            let hi_c = usize::from(c >= j);
            quadrants[hi_r * 2 + hi_c] += t.get(r, c);
        }
    }
    Ok(TwoByTwo {
        low_low: quadrants[0],
        low_high: quadrants[1],
        high_low: quadrants[2],
        high_high: quadrants[3],
    })
}

/// The matrix of per-cut measure values for an n x m ordered table:
/// (n-1) x (m-1) values, entry (i, j) for the cut aggregating rows 1..=i
/// against the rest and columns 1..=j against the rest. Degenerate cuts
/// hold NaN and are flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct LiuLuMatrix {
    n_row_cuts: usize,
    n_col_cuts: usize,
    values: Vec<f64>,
    flags: Vec<CutFlag>,
}

impl LiuLuMatrix {
    pub fn n_row_cuts(&self) -> usize {
        self.n_row_cuts
    }

    pub fn n_col_cuts(&self) -> usize {
        self.n_col_cuts
    }

    /// Value at 1-based cut (i, j); NaN when the cut is degenerate.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.n_col_cuts + (j - 1)]
    }

    pub fn flag(&self, i: usize, j: usize) -> CutFlag {
        self.flags[(i - 1) * self.n_col_cuts + (j - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[CutFlag] {
        &self.flags
    }

    pub fn has_degenerate_cut(&self) -> bool {
        self.flags.contains(&CutFlag::DegenerateDenominator)
    }

    pub fn has_negative_cut(&self) -> bool {
        self.flags.contains(&CutFlag::NegativeAssortativity)
    }

    /// Largest absolute value difference against another matrix of the same
    /// shape, over cuts flagged `Ok` in both.
    pub fn max_ok_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n_row_cuts, other.n_row_cuts);
        assert_eq!(self.n_col_cuts, other.n_col_cuts);
        let mut worst = 0.0f64;
        for idx in 0..self.values.len() {
            if self.flags[idx] == CutFlag::Ok && other.flags[idx] == CutFlag::Ok {
                worst = worst.max((self.values[idx] - other.values[idx]).abs());
            }
        }
        worst
    }
}

/// Evaluates the simplified measure at every cut of an ordered table.
/// Degenerate cuts are recorded in the flags and the rest of the matrix is
/// still computed.
pub fn ll_generalized(t: &ContingencyTable) -> Result<LiuLuMatrix, LiuLuError> {
    let (n, m) = (t.n_rows(), t.n_cols());
    if n < 2 || m < 2 {
        return Err(LiuLuError::TooSmall { n, m });
    }
    if t.grand_total() <= 0.0 {
        return Err(TableError::ZeroTotal.into());
    }
    let (n_row_cuts, n_col_cuts) = (n - 1, m - 1);
    let mut values = Vec::with_capacity(n_row_cuts * n_col_cuts);
    let mut flags = Vec::with_capacity(n_row_cuts * n_col_cuts);
    for i in 1..=n_row_cuts {
        for j in 1..=n_col_cuts {
            let z = cut_aggregate(t, i, j)?;
            match ll_simple(&z) {
                Ok(cv) => {
                    values.push(cv.value);
                    flags.push(cv.flag);
                }
                Err(LiuLuError::DegenerateDenominator { .. }) => {
                    values.push(f64::NAN);
                    flags.push(CutFlag::DegenerateDenominator);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(LiuLuMatrix { n_row_cuts, n_col_cuts, values, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<f64>>) -> ContingencyTable {
        ContingencyTable::from_rows(rows).unwrap()
    }

    fn diag3() -> ContingencyTable {
        table(vec![
            vec![10.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 10.0],
        ])
    }

    #[test]
    fn cut_aggregate_diag_corner() {
        let z = cut_aggregate(&diag3(), 1, 1).unwrap();
        assert_eq!(z, TwoByTwo { low_low: 10.0, low_high: 0.0, high_low: 0.0, high_high: 20.0 });
    }

    #[test]
    fn cut_aggregate_diag_off_center() {
        let z = cut_aggregate(&diag3(), 1, 2).unwrap();
        assert_eq!(z, TwoByTwo { low_low: 10.0, low_high: 0.0, high_low: 10.0, high_high: 10.0 });
    }

    #[test]
    fn cut_aggregate_of_2x2_is_identity() {
        let t = table(vec![vec![3.0, 4.0], vec![5.0, 6.0]]);
        let z = cut_aggregate(&t, 1, 1).unwrap();
        assert_eq!(z, TwoByTwo { low_low: 3.0, low_high: 4.0, high_low: 5.0, high_high: 6.0 });
    }

    #[test]
    fn cut_aggregate_rejects_bad_cuts() {
        assert!(matches!(
            cut_aggregate(&diag3(), 0, 1),
            Err(LiuLuError::CutOutOfRange { .. })
        ));
        assert!(matches!(
            cut_aggregate(&diag3(), 1, 3),
            Err(LiuLuError::CutOutOfRange { .. })
        ));
    }

    #[test]
    fn ll_simple_textbook_value() {
        // Q = 60*60/100 = 36, so (50 - 36) / (60 - 36) = 14/24.
        let z = TwoByTwo { low_low: 30.0, low_high: 10.0, high_low: 10.0, high_high: 50.0 };
        let cv = ll_simple(&z).unwrap();
        assert_eq!(cv.flag, CutFlag::Ok);
        assert!((cv.value - 14.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn ll_simple_random_matching_is_zero() {
        let z = TwoByTwo { low_low: 16.0, low_high: 24.0, high_low: 24.0, high_high: 36.0 };
        assert_eq!(ll_simple(&z).unwrap().value, 0.0);
    }

    #[test]
    fn ll_simple_perfect_diagonal_is_one() {
        let z = TwoByTwo { low_low: 40.0, low_high: 0.0, high_low: 0.0, high_high: 60.0 };
        assert_eq!(ll_simple(&z).unwrap().value, 1.0);
    }

    #[test]
    fn ll_simple_flags_negative_sorting() {
        // high-high below the random floor
        let z = TwoByTwo { low_low: 0.0, low_high: 40.0, high_low: 60.0, high_high: 0.0 };
        let cv = ll_simple(&z).unwrap();
        assert_eq!(cv.flag, CutFlag::NegativeAssortativity);
        assert!(cv.value < 0.0);
    }

    #[test]
    fn ll_simple_degenerate_denominator() {
        // min marginal 10, Q = 10*100/100 = 10 = floor(Q)
        let z = TwoByTwo { low_low: 0.0, low_high: 90.0, high_low: 0.0, high_high: 10.0 };
        assert!(matches!(
            ll_simple(&z),
            Err(LiuLuError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn ll_generalized_diag_all_ones() {
        let m = ll_generalized(&diag3()).unwrap();
        assert_eq!(m.n_row_cuts(), 2);
        assert_eq!(m.n_col_cuts(), 2);
        for i in 1..=2 {
            for j in 1..=2 {
                assert_eq!(m.value(i, j), 1.0, "cut ({i},{j})");
                assert_eq!(m.flag(i, j), CutFlag::Ok);
            }
        }
    }

    #[test]
    fn ll_generalized_2x2_matches_simple() {
        let t = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let m = ll_generalized(&t).unwrap();
        let direct = ll_simple(&TwoByTwo::from_table(&t).unwrap()).unwrap();
        assert_eq!(m.value(1, 1), direct.value);
    }

    #[test]
    fn ll_generalized_rank_one_scores_zero() {
        // Outer-product table with integral Q at every cut: rows (10,20,30),
        // cols (6,24,30), total 60. Every cut evaluates to exactly 0.
        let rows = [10.0, 20.0, 30.0];
        let cols = [6.0, 24.0, 30.0];
        let cells: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| cols.iter().map(|c| r * c / 60.0).collect())
            .collect();
        let m = ll_generalized(&table(cells)).unwrap();
        for i in 1..=2 {
            for j in 1..=2 {
                assert_eq!(m.value(i, j), 0.0, "cut ({i},{j})");
            }
        }
    }

    #[test]
    fn ll_generalized_records_degenerate_cut_and_continues() {
        // Column tail at j=2 is a single couple: Q = 3*1/4 -> floor 0,
        // min marginal 1... pick a table where one cut degenerates.
        let t = table(vec![vec![0.0, 9.0, 0.0], vec![0.0, 0.0, 1.0]]);
        // cut (1,2): high block N_HH = 1, high row 1, high col 1, Q = 1*1/10 -> 0: fine.
        // cut (1,1): high row 1, high col 10, Q = 1*10/10 = 1 = min -> degenerate.
        let m = ll_generalized(&t).unwrap();
        assert_eq!(m.flag(1, 1), CutFlag::DegenerateDenominator);
        assert!(m.value(1, 1).is_nan());
        assert_eq!(m.flag(1, 2), CutFlag::Ok);
    }

    #[test]
    fn floor_exact_integral_inputs() {
        assert_eq!(floor_exact(60.0, 60.0, 100.0), 36.0);
        assert_eq!(floor_exact(20.0, 10.0, 30.0), 6.0);
        assert_eq!(floor_exact(18.0, 18.0, 30.0), 10.0);
    }

    #[test]
    fn floor_exact_snaps_near_integers() {
        // A product quotient that lands a hair above/below an integer must
        // not wobble across the floor.
        assert_eq!(floor_exact(36.000000000001, 1.0, 1.0), 36.0);
        assert_eq!(floor_exact(35.999999999999, 1.0, 1.0), 36.0);
        assert_eq!(floor_exact(36.4, 1.0, 1.0), 36.0);
    }

    #[test]
    fn scaling_preserves_measure_when_q_stays_integral() {
        // Q = 36 at the only cut; scaling by k keeps k*Q integral.
        let base = table(vec![vec![30.0, 10.0], vec![10.0, 50.0]]);
        let expected = ll_generalized(&base).unwrap().value(1, 1);
        for k in [2.0, 5.0, 10.0] {
            let scaled = table(vec![vec![30.0 * k, 10.0 * k], vec![10.0 * k, 50.0 * k]]);
            let got = ll_generalized(&scaled).unwrap().value(1, 1);
            assert!((got - expected).abs() < 1e-12, "k={k}");
        }
    }
}
