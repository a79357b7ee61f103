//! Contingency-table data model and the operations that read marriage-market
//! structure out of it: marginals, race/education blocks, equilibrium
//! moments, category merging, and microdata aggregation.
//!
//! Cell values are real, not integer: counterfactual transforms produce
//! fractional and possibly negative entries, so one numeric cell type serves
//! observed and counterfactual tables alike. Nonnegativity of observed
//! tables is enforced at ingestion, not in the type.

use thiserror::Error;

/// Errors from table construction and table-level operations.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("unknown {axis} label `{label}`")]
    UnknownLabel { axis: &'static str, label: String },
    #[error("record {index} has negative or non-finite weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("table grand total must be positive")]
    ZeroTotal,
    #[error("{axis} group {group:?} is not a contiguous ascending index range starting where the previous group ended")]
    NonContiguousGroup { axis: &'static str, group: Vec<usize> },
    #[error("table is {rows}x{cols} but this operation expects {expected}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: String,
    },
    #[error("race index {index} out of range (layout has exactly 2 races)")]
    RaceOutOfRange { index: usize },
    #[error("invalid table data: {0}")]
    InvalidData(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// A row or column label: an optional outer group (race) and a level
/// (education, or the single trait of a plain table).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AxisLabel {
    pub group: String,
    pub level: String,
}

impl AxisLabel {
    pub fn new(group: impl Into<String>, level: impl Into<String>) -> Self {
        Self {
            group: group.into(),
            level: level.into(),
        }
    }

    /// A label with no outer group, for single-trait tables.
    pub fn plain(level: impl Into<String>) -> Self {
        Self::new("", level)
    }
}

impl std::fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.group.is_empty() {
            write!(f, "{}", self.level)
        } else {
            write!(f, "{}.{}", self.group, self.level)
        }
    }
}

/// A labeled matrix of couple counts. Rows are husband types, columns are
/// wife types. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyTable {
    n_rows: usize,
    n_cols: usize,
    counts: Vec<f64>,
    row_labels: Vec<AxisLabel>,
    col_labels: Vec<AxisLabel>,
}

impl ContingencyTable {
    pub fn new(
        counts: Vec<f64>,
        row_labels: Vec<AxisLabel>,
        col_labels: Vec<AxisLabel>,
    ) -> Result<Self, TableError> {
        let (n_rows, n_cols) = (row_labels.len(), col_labels.len());
        if n_rows == 0 || n_cols == 0 {
            return Err(TableError::InvalidData("table must have at least one row and column".into()));
        }
        if counts.len() != n_rows * n_cols {
            return Err(TableError::InvalidData(format!(
                "expected {} cells for a {}x{} table, got {}",
                n_rows * n_cols,
                n_rows,
                n_cols,
                counts.len()
            )));
        }
        if let Some(bad) = counts.iter().find(|v| !v.is_finite()) {
            return Err(TableError::InvalidData(format!("non-finite cell value {bad}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            counts,
            row_labels,
            col_labels,
        })
    }

    /// Builds a table from nested rows with numbered plain labels.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, TableError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(TableError::InvalidData("ragged rows".into()));
        }
        let counts: Vec<f64> = rows.into_iter().flatten().collect();
        let row_labels = (1..=n_rows).map(|i| AxisLabel::plain(i.to_string())).collect();
        let col_labels = (1..=n_cols).map(|i| AxisLabel::plain(i.to_string())).collect();
        Self::new(counts, row_labels, col_labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_labels(&self) -> &[AxisLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[AxisLabel] {
        &self.col_labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.n_cols + col]
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| (0..self.n_cols).map(|c| self.get(r, c)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n_cols)
            .map(|c| (0..self.n_rows).map(|r| self.get(r, c)).sum())
            .collect()
    }

    /// Exact row and column sums; the two vectors always share the same
    /// grand total.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        (self.row_sums(), self.col_sums())
    }

    pub fn grand_total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.counts.iter().all(|&v| v >= 0.0)
    }

    /// Largest absolute cell difference against another table of the same
    /// shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sums grouped rows and columns into a coarser table. Groups must be
    /// contiguous ascending index ranges that partition the axis in order.
    /// The grand total is preserved exactly.
    pub fn merge_categories(
        &self,
        row_groups: &[Vec<usize>],
        col_groups: &[Vec<usize>],
    ) -> Result<Self, TableError> {
        validate_partition("row", row_groups, self.n_rows)?;
        validate_partition("column", col_groups, self.n_cols)?;
        let mut counts = Vec::with_capacity(row_groups.len() * col_groups.len());
        for rg in row_groups {
            for cg in col_groups {
                let mut sum = 0.0;
                for &r in rg {
                    for &c in cg {
                        sum += self.get(r, c);
                    }
                }
                counts.push(sum);
            }
        }
        let row_labels = row_groups.iter().map(|g| merge_labels(&self.row_labels, g)).collect();
        let col_labels = col_groups.iter().map(|g| merge_labels(&self.col_labels, g)).collect();
        Self::new(counts, row_labels, col_labels)
    }
}

fn validate_partition(
    axis: &'static str,
    groups: &[Vec<usize>],
    len: usize,
) -> Result<(), TableError> {
    let mut next = 0usize;
    for group in groups {
        if group.is_empty() {
            return Err(TableError::NonContiguousGroup { axis, group: group.clone() });
        }
        for &idx in group {
            if idx != next {
                return Err(TableError::NonContiguousGroup { axis, group: group.clone() });
            }
            next += 1;
        }
    }
    if next != len {
        return Err(TableError::NonContiguousGroup {
            axis,
            group: groups.last().cloned().unwrap_or_default(),
        });
    }
    Ok(())
}

fn merge_labels(labels: &[AxisLabel], group: &[usize]) -> AxisLabel {
    if group.len() == 1 {
        return labels[group[0]].clone();
    }
    let first_group = &labels[group[0]].group;
    let common_group = group.iter().all(|&i| &labels[i].group == first_group);
    let level = group
        .iter()
        .map(|&i| labels[i].level.as_str())
        .collect::<Vec<_>>()
        .join("+");
    AxisLabel::new(if common_group { first_group.clone() } else { String::new() }, level)
}

/// The race-by-education layout of the full tables: exactly two races, and
/// one shared, strictly ordered list of education levels for both sexes.
/// Rows and columns are race-major with education ascending within race.
#[derive(Clone, Debug, PartialEq)]
pub struct RaceEduLayout {
    race_labels: [String; 2],
    edu_labels: Vec<String>,
}

impl RaceEduLayout {
    pub fn new(race_labels: [String; 2], edu_labels: Vec<String>) -> Result<Self, TableError> {
        if race_labels[0] == race_labels[1] {
            return Err(TableError::InvalidLayout("race labels must be distinct".into()));
        }
        if edu_labels.is_empty() {
            return Err(TableError::InvalidLayout("at least one education level is required".into()));
        }
        for (i, a) in edu_labels.iter().enumerate() {
            if edu_labels[i + 1..].contains(a) {
                return Err(TableError::InvalidLayout(format!("duplicate education label `{a}`")));
            }
        }
        Ok(Self { race_labels, edu_labels })
    }

    /// The default layout from Table 1: races B and W, education L < M < H.
    pub fn standard() -> Self {
        Self::new(
            ["B".into(), "W".into()],
            vec!["L".into(), "M".into(), "H".into()],
        )
        .unwrap()
    }

    pub fn race_labels(&self) -> &[String; 2] {
        &self.race_labels
    }

    pub fn edu_labels(&self) -> &[String] {
        &self.edu_labels
    }

    pub fn n_edu(&self) -> usize {
        self.edu_labels.len()
    }

    /// Rows (and columns) of a conforming table: 2 * n_edu.
    pub fn table_dim(&self) -> usize {
        2 * self.n_edu()
    }

    #[inline]
    pub fn index(&self, race: usize, edu: usize) -> usize {
        race * self.n_edu() + edu
    }

    pub fn race_index(&self, label: &str) -> Option<usize> {
        self.race_labels.iter().position(|r| r == label)
    }

    pub fn edu_index(&self, label: &str) -> Option<usize> {
        self.edu_labels.iter().position(|e| e == label)
    }

    /// The full race-major axis labels for a conforming table.
    pub fn axis_labels(&self) -> Vec<AxisLabel> {
        let mut labels = Vec::with_capacity(self.table_dim());
        for race in &self.race_labels {
            for edu in &self.edu_labels {
                labels.push(AxisLabel::new(race.clone(), edu.clone()));
            }
        }
        labels
    }

    pub fn check_table(&self, t: &ContingencyTable) -> Result<(), TableError> {
        let d = self.table_dim();
        if t.n_rows() != d || t.n_cols() != d {
            return Err(TableError::ShapeMismatch {
                rows: t.n_rows(),
                cols: t.n_cols(),
                expected: format!("{d}x{d} (race-major, {} education levels)", self.n_edu()),
            });
        }
        Ok(())
    }

    /// Recovers a layout from a table whose labels follow the race-major
    /// convention: two group blocks with one shared education-level list,
    /// identical on rows and columns.
    pub fn infer(t: &ContingencyTable) -> Option<RaceEduLayout> {
        let rows = t.row_labels();
        if rows.len() < 4 || rows.len() % 2 != 0 || rows != t.col_labels() {
            return None;
        }
        let n = rows.len() / 2;
        let race_a = rows[0].group.clone();
        let race_b = rows[n].group.clone();
        if race_a.is_empty() || race_b.is_empty() || race_a == race_b {
            return None;
        }
        let edu: Vec<String> = rows[..n].iter().map(|l| l.level.clone()).collect();
        for k in 0..n {
            if rows[k].group != race_a || rows[n + k].group != race_b || rows[n + k].level != edu[k]
            {
                return None;
            }
        }
        RaceEduLayout::new([race_a, race_b], edu).ok()
    }
}

/// One weighted couple observation from microdata.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupleRecord {
    pub husband_race: String,
    pub husband_edu: String,
    pub wife_race: String,
    pub wife_edu: String,
    pub weight: f64,
}

/// Aggregates weighted couple records into a race-by-education table. Cell
/// (h, w) is the sum of weights of matching records.
pub fn from_microdata(
    records: &[CoupleRecord],
    layout: &RaceEduLayout,
) -> Result<ContingencyTable, TableError> {
    let d = layout.table_dim();
    let mut counts = vec![0.0; d * d];
    for (index, rec) in records.iter().enumerate() {
        if !(rec.weight.is_finite() && rec.weight >= 0.0) {
            return Err(TableError::NegativeWeight { index, weight: rec.weight });
        }
        let hr = layout
            .race_index(&rec.husband_race)
            .ok_or_else(|| TableError::UnknownLabel { axis: "husband race", label: rec.husband_race.clone() })?;
        let he = layout
            .edu_index(&rec.husband_edu)
            .ok_or_else(|| TableError::UnknownLabel { axis: "husband education", label: rec.husband_edu.clone() })?;
        let wr = layout
            .race_index(&rec.wife_race)
            .ok_or_else(|| TableError::UnknownLabel { axis: "wife race", label: rec.wife_race.clone() })?;
        let we = layout
            .edu_index(&rec.wife_edu)
            .ok_or_else(|| TableError::UnknownLabel { axis: "wife education", label: rec.wife_edu.clone() })?;
        counts[layout.index(hr, he) * d + layout.index(wr, we)] += rec.weight;
    }
    ContingencyTable::new(counts, layout.axis_labels(), layout.axis_labels())
}

/// The fixed racial-block visit order used by the moment accumulators:
/// (husband race, wife race) = BB, WB, BW, WW. Keeping one canonical
/// accumulation order makes moment values reproducible bit-for-bit across
/// every code path that assembles the same cells.
const BLOCK_ORDER: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

fn block_cell_sum(t: &ContingencyTable, layout: &RaceEduLayout, hr: usize, wr: usize) -> f64 {
    let n = layout.n_edu();
    let mut sum = 0.0;
    for k in 0..n {
        for l in 0..n {
            sum += t.get(layout.index(hr, k), layout.index(wr, l));
        }
    }
    sum
}

fn blockwise_grand_total(t: &ContingencyTable, layout: &RaceEduLayout) -> f64 {
    let mut total = 0.0;
    for (hr, wr) in BLOCK_ORDER {
        total += block_cell_sum(t, layout, hr, wr);
    }
    total
}

/// Share of educationally homogamous couples: the mass of all cells whose
/// husband education equals the wife education, across all four racial
/// blocks, divided by the grand total. Accumulated per racial block in
/// `BLOCK_ORDER`.
pub fn sehc(t: &ContingencyTable, layout: &RaceEduLayout) -> Result<f64, TableError> {
    layout.check_table(t)?;
    let total = blockwise_grand_total(t, layout);
    if total <= 0.0 {
        return Err(TableError::ZeroTotal);
    }
    let n = layout.n_edu();
    let mut homogamous = 0.0;
    for (hr, wr) in BLOCK_ORDER {
        let mut sub = 0.0;
        for k in 0..n {
            sub += t.get(layout.index(hr, k), layout.index(wr, k));
        }
        homogamous += sub;
    }
    Ok(homogamous / total)
}

/// Share of inter-racial marriages: one minus the share of couples in the
/// two same-race diagonal blocks.
pub fn sirm(t: &ContingencyTable, layout: &RaceEduLayout) -> Result<f64, TableError> {
    layout.check_table(t)?;
    let total = blockwise_grand_total(t, layout);
    if total <= 0.0 {
        return Err(TableError::ZeroTotal);
    }
    let same_race = block_cell_sum(t, layout, 0, 0) + block_cell_sum(t, layout, 1, 1);
    Ok(1.0 - same_race / total)
}

/// Collapses a race-by-education table to the 2x2 table of couple counts by
/// (husband race, wife race). The grand total is preserved exactly.
pub fn race_aggregate(
    t: &ContingencyTable,
    layout: &RaceEduLayout,
) -> Result<ContingencyTable, TableError> {
    layout.check_table(t)?;
    let mut counts = Vec::with_capacity(4);
    for hr in 0..2 {
        for wr in 0..2 {
            counts.push(block_cell_sum(t, layout, hr, wr));
        }
    }
    let labels: Vec<AxisLabel> = layout.race_labels().iter().map(AxisLabel::plain).collect();
    ContingencyTable::new(counts, labels.clone(), labels)
}

/// Collapses a race-by-education table to the n x n table of couple counts
/// by (husband education, wife education), summing over both races.
pub fn edu_aggregate(
    t: &ContingencyTable,
    layout: &RaceEduLayout,
) -> Result<ContingencyTable, TableError> {
    layout.check_table(t)?;
    let n = layout.n_edu();
    let mut counts = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let mut sum = 0.0;
            for (hr, wr) in BLOCK_ORDER {
                sum += t.get(layout.index(hr, k), layout.index(wr, l));
            }
            counts.push(sum);
        }
    }
    let labels: Vec<AxisLabel> = layout.edu_labels().iter().map(AxisLabel::plain).collect();
    ContingencyTable::new(counts, labels.clone(), labels)
}

/// Extracts the n x n education sub-table of one racial block.
pub fn block_extract(
    t: &ContingencyTable,
    layout: &RaceEduLayout,
    husband_race: usize,
    wife_race: usize,
) -> Result<ContingencyTable, TableError> {
    layout.check_table(t)?;
    if husband_race > 1 {
        return Err(TableError::RaceOutOfRange { index: husband_race });
    }
    if wife_race > 1 {
        return Err(TableError::RaceOutOfRange { index: wife_race });
    }
    let n = layout.n_edu();
    let mut counts = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            counts.push(t.get(layout.index(husband_race, k), layout.index(wife_race, l)));
        }
    }
    let labels: Vec<AxisLabel> = layout.edu_labels().iter().map(AxisLabel::plain).collect();
    ContingencyTable::new(counts, labels.clone(), labels)
}

/// Diagonal share of a square single-trait table: the homogamy moment for
/// one-dimensional decompositions.
pub fn diagonal_share(t: &ContingencyTable) -> Result<f64, TableError> {
    if t.n_rows() != t.n_cols() {
        return Err(TableError::ShapeMismatch {
            rows: t.n_rows(),
            cols: t.n_cols(),
            expected: "a square table".into(),
        });
    }
    let total = t.grand_total();
    if total <= 0.0 {
        return Err(TableError::ZeroTotal);
    }
    let diag: f64 = (0..t.n_rows()).map(|i| t.get(i, i)).sum();
    Ok(diag / total)
}

/// One minus the diagonal share: the exogamy moment for one-dimensional
/// decompositions.
pub fn off_diagonal_share(t: &ContingencyTable) -> Result<f64, TableError> {
    Ok(1.0 - diagonal_share(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> RaceEduLayout {
        RaceEduLayout::standard()
    }

    fn rec(hr: &str, he: &str, wr: &str, we: &str, w: f64) -> CoupleRecord {
        CoupleRecord {
            husband_race: hr.into(),
            husband_edu: he.into(),
            wife_race: wr.into(),
            wife_edu: we.into(),
            weight: w,
        }
    }

    #[test]
    fn microdata_single_record() {
        let t = from_microdata(&[rec("B", "L", "B", "L", 1.0)], &layout()).unwrap();
        assert_eq!(t.n_rows(), 6);
        assert_eq!(t.n_cols(), 6);
        assert_eq!(t.get(0, 0), 1.0);
        assert_eq!(t.grand_total(), 1.0);
    }

    #[test]
    fn microdata_empty() {
        let t = from_microdata(&[], &layout()).unwrap();
        assert_eq!(t.grand_total(), 0.0);
        assert!(t.counts().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn microdata_additive_weights() {
        let t = from_microdata(
            &[rec("W", "H", "W", "M", 2.5), rec("W", "H", "W", "M", 0.5)],
            &layout(),
        )
        .unwrap();
        // row WH = 3 + 2 = 5, col WM = 3 + 1 = 4
        assert_eq!(t.get(5, 4), 3.0);
    }

    #[test]
    fn microdata_rejects_bad_labels_and_weights() {
        let err = from_microdata(&[rec("X", "L", "B", "L", 1.0)], &layout()).unwrap_err();
        assert!(matches!(err, TableError::UnknownLabel { .. }));
        let err = from_microdata(&[rec("B", "L", "B", "L", -1.0)], &layout()).unwrap_err();
        assert!(matches!(err, TableError::NegativeWeight { .. }));
    }

    #[test]
    fn marginals_small() {
        let t = ContingencyTable::from_rows(vec![vec![30.0, 10.0], vec![10.0, 50.0]]).unwrap();
        let (rows, cols) = t.marginals();
        assert_eq!(rows, vec![40.0, 60.0]);
        assert_eq!(cols, vec![40.0, 60.0]);
        assert_eq!(t.grand_total(), 100.0);
    }

    #[test]
    fn marginals_zero_table() {
        let t = ContingencyTable::from_rows(vec![vec![0.0; 3]; 3]).unwrap();
        let (rows, cols) = t.marginals();
        assert_eq!(rows, vec![0.0; 3]);
        assert_eq!(cols, vec![0.0; 3]);
    }

    #[test]
    fn marginals_diagonal() {
        let t = ContingencyTable::from_rows(vec![
            vec![12.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 8.0],
        ])
        .unwrap();
        let (rows, cols) = t.marginals();
        assert_eq!(rows, vec![12.0, 10.0, 8.0]);
        assert_eq!(cols, vec![12.0, 10.0, 8.0]);
    }

    /// Places `value` at (husband race+edu, wife race+edu) in a fresh 6x6.
    fn table_with(cells: &[(usize, usize, usize, usize, f64)]) -> ContingencyTable {
        let lay = layout();
        let d = lay.table_dim();
        let mut counts = vec![0.0; d * d];
        for &(hr, he, wr, we, v) in cells {
            counts[lay.index(hr, he) * d + lay.index(wr, we)] += v;
        }
        ContingencyTable::new(counts, lay.axis_labels(), lay.axis_labels()).unwrap()
    }

    #[test]
    fn sehc_all_homogamous() {
        let t = table_with(&[(0, 0, 0, 0, 10.0), (1, 2, 0, 2, 5.0), (1, 1, 1, 1, 5.0)]);
        assert_eq!(sehc(&t, &layout()).unwrap(), 1.0);
    }

    #[test]
    fn sehc_none_homogamous() {
        let t = table_with(&[(0, 0, 0, 1, 10.0), (1, 2, 0, 0, 5.0)]);
        assert_eq!(sehc(&t, &layout()).unwrap(), 0.0);
    }

    #[test]
    fn sehc_mixed_forty_percent() {
        // 100 couples; homogamous cells sum to 40 across blocks.
        let t = table_with(&[
            (0, 0, 0, 0, 10.0),
            (0, 1, 1, 1, 20.0),
            (1, 2, 1, 2, 10.0),
            (0, 0, 0, 1, 25.0),
            (1, 1, 1, 2, 35.0),
        ]);
        assert!((sehc(&t, &layout()).unwrap() - 0.40).abs() < 1e-15);
    }

    #[test]
    fn sehc_zero_total_errors() {
        let t = table_with(&[]);
        assert!(matches!(sehc(&t, &layout()), Err(TableError::ZeroTotal)));
    }

    #[test]
    fn sirm_all_same_race() {
        let t = table_with(&[(0, 0, 0, 1, 30.0), (1, 2, 1, 0, 70.0)]);
        assert_eq!(sirm(&t, &layout()).unwrap(), 0.0);
    }

    #[test]
    fn sirm_all_mixed() {
        let t = table_with(&[(0, 0, 1, 1, 30.0), (1, 2, 0, 0, 70.0)]);
        assert_eq!(sirm(&t, &layout()).unwrap(), 1.0);
    }

    #[test]
    fn sirm_twelve_percent() {
        let t = table_with(&[
            (0, 0, 0, 0, 44.0),
            (1, 1, 1, 1, 44.0),
            (0, 0, 1, 0, 7.0),
            (1, 2, 0, 1, 5.0),
        ]);
        assert!((sirm(&t, &layout()).unwrap() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn race_aggregate_all_mass_ww() {
        let t = table_with(&[(1, 0, 1, 2, 42.0)]);
        let agg = race_aggregate(&t, &layout()).unwrap();
        assert_eq!(agg.counts(), &[0.0, 0.0, 0.0, 42.0]);
    }

    #[test]
    fn race_aggregate_block_totals() {
        let t = table_with(&[
            (0, 0, 0, 0, 10.0),
            (0, 1, 1, 1, 2.0),
            (1, 2, 0, 0, 3.0),
            (1, 0, 1, 1, 85.0),
        ]);
        let agg = race_aggregate(&t, &layout()).unwrap();
        assert_eq!(agg.counts(), &[10.0, 2.0, 3.0, 85.0]);
        assert_eq!(agg.grand_total(), t.grand_total());
    }

    #[test]
    fn race_aggregate_uniform_ones() {
        let t = ContingencyTable::new(vec![1.0; 36], layout().axis_labels(), layout().axis_labels()).unwrap();
        let agg = race_aggregate(&t, &layout()).unwrap();
        assert_eq!(agg.counts(), &[9.0, 9.0, 9.0, 9.0]);
    }

    #[test]
    fn edu_aggregate_all_mass_one_level() {
        let t = table_with(&[(0, 1, 1, 1, 9.0), (1, 1, 0, 1, 3.0)]);
        let agg = edu_aggregate(&t, &layout()).unwrap();
        assert_eq!(agg.get(1, 1), 12.0);
        assert_eq!(agg.grand_total(), 12.0);
    }

    #[test]
    fn edu_aggregate_identity_on_block_totals() {
        let t = table_with(&[
            (0, 0, 0, 2, 4.0),
            (1, 0, 0, 2, 6.0),
            (0, 0, 1, 2, 1.0),
            (1, 0, 1, 2, 2.0),
        ]);
        let agg = edu_aggregate(&t, &layout()).unwrap();
        assert_eq!(agg.get(0, 2), 13.0);
    }

    #[test]
    fn edu_aggregate_uniform_ones() {
        let t = ContingencyTable::new(vec![1.0; 36], layout().axis_labels(), layout().axis_labels()).unwrap();
        let agg = edu_aggregate(&t, &layout()).unwrap();
        assert!(agg.counts().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn block_extract_positions() {
        let lay = layout();
        let d = lay.table_dim();
        // cell value encodes its position: 100*row + col
        let counts: Vec<f64> = (0..d * d).map(|i| (100 * (i / d) + i % d) as f64).collect();
        let t = ContingencyTable::new(counts, lay.axis_labels(), lay.axis_labels()).unwrap();
        let bb = block_extract(&t, &lay, 0, 0).unwrap();
        assert_eq!(bb.get(0, 0), 0.0);
        assert_eq!(bb.get(2, 2), 202.0);
        let bw = block_extract(&t, &lay, 0, 1).unwrap();
        assert_eq!(bw.get(0, 0), 3.0);
        let wb = block_extract(&t, &lay, 1, 0).unwrap();
        assert_eq!(wb.get(1, 2), 402.0);
    }

    #[test]
    fn merge_diag_into_two() {
        let t = ContingencyTable::from_rows(vec![
            vec![12.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 8.0],
        ])
        .unwrap();
        let m = t
            .merge_categories(&[vec![0], vec![1, 2]], &[vec![0], vec![1, 2]])
            .unwrap();
        assert_eq!(m.counts(), &[12.0, 0.0, 0.0, 18.0]);
    }

    #[test]
    fn merge_trivial_partition_is_identity() {
        let t = ContingencyTable::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = t
            .merge_categories(&[vec![0], vec![1]], &[vec![0], vec![1]])
            .unwrap();
        assert_eq!(m.counts(), t.counts());
    }

    #[test]
    fn merge_everything_gives_grand_total() {
        let t = ContingencyTable::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let m = t.merge_categories(&[vec![0, 1]], &[vec![0, 1]]).unwrap();
        assert_eq!(m.counts(), &[10.0]);
        assert_eq!(m.n_rows(), 1);
    }

    #[test]
    fn merge_rejects_non_contiguous() {
        let t = ContingencyTable::from_rows(vec![vec![1.0; 3]; 3]).unwrap();
        let err = t
            .merge_categories(&[vec![0, 2], vec![1]], &[vec![0, 1, 2]])
            .unwrap_err();
        assert!(matches!(err, TableError::NonContiguousGroup { .. }));
    }

    #[test]
    fn merge_composes() {
        let t = ContingencyTable::from_rows(vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![5.0, 6.0, 7.0, 8.0],
            vec![9.0, 10.0, 11.0, 12.0],
            vec![13.0, 14.0, 15.0, 16.0],
        ])
        .unwrap();
        let once = t
            .merge_categories(
                &[vec![0, 1], vec![2], vec![3]],
                &[vec![0], vec![1, 2], vec![3]],
            )
            .unwrap()
            .merge_categories(&[vec![0], vec![1, 2]], &[vec![0, 1], vec![2]])
            .unwrap();
        let direct = t
            .merge_categories(&[vec![0, 1], vec![2, 3]], &[vec![0, 1, 2], vec![3]])
            .unwrap();
        assert_eq!(once.counts(), direct.counts());
    }

    #[test]
    fn aggregates_preserve_grand_total() {
        let t = table_with(&[
            (0, 0, 1, 2, 3.5),
            (1, 1, 0, 0, 2.25),
            (0, 2, 0, 1, 7.0),
            (1, 2, 1, 2, 11.0),
        ]);
        let lay = layout();
        assert_eq!(race_aggregate(&t, &lay).unwrap().grand_total(), t.grand_total());
        assert_eq!(edu_aggregate(&t, &lay).unwrap().grand_total(), t.grand_total());
    }
}
