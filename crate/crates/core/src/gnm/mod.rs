//! The sequential two-trait counterfactual construction and its interval
//! searches.
//!
//! Individuals are assumed to sort along one trait first and the other
//! second. With race first, step 1 transforms the 2x2 racial distribution
//! onto counterfactual availability; step 2 must then distribute each race's
//! education-specific men and women across the same-race and inter-racial
//! blocks. Those within-block target marginals are under-determined: the
//! free choices form an integer lattice of dimension 2(n-1) + 2(m-1). Every
//! lattice point yields one assembled counterfactual table, so any scalar
//! moment (SEHC or SIRM) takes values on a finite set, reported here as a
//! [min, max] interval with the attaining allocations.
//!
//! With education first the roles swap: step 1 produces the n x n
//! counterfactual education-pair distribution, and step 2 parameterizes the
//! 2x2 race composition of every education-pair block (dimension
//! n(m-1) + m(n-1)). Allowing both orders widens the interval to the hull.
//!
//! Allocations whose assembled table contains a cell below `-epsilon` are
//! excluded as unrealistic (the transform's negative-entry signal), and
//! allocations whose block transform hits a degenerate target cut are
//! excluded as undefined; both exclusions are counted separately.

mod edu_first;
mod eval;
mod race_first;

use crate::liulu::LiuLuError;
use crate::nm::{self, NegativeCell, NmError, TargetMarginals};
use crate::tables::{
    block_extract, edu_aggregate, race_aggregate, sehc, sirm, ContingencyTable, RaceEduLayout,
    TableError,
};
use crate::DEFAULT_NEGATIVE_TOLERANCE;
use thiserror::Error;

/// Which trait sorts first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortOrder {
    RaceFirst,
    EducationFirst,
    /// Hull of the two single-order intervals.
    BothOrders,
}

/// The scalar moment optimized over the feasible lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Sehc,
    Sirm,
}

/// Which allocations the interval search ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocationSpace {
    /// Every feasible lattice point.
    Full,
    /// Only the allocation actually observed in the availability table;
    /// the interval degenerates to a point.
    ObservedOnly,
}

/// Which table supplies the step-2 block preferences. The declared time
/// roles say education preferences come from the education-preference table
/// (race first) and race preferences from the race-preference table
/// (education first); the literal block formulas reuse the step-1 table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step2Source {
    DeclaredRoles,
    StepOneTable,
}

#[derive(Debug, Error)]
pub enum GnmError {
    #[error("no integer allocation satisfies the block-total constraints: {detail}")]
    InfeasibleBlockTotals { detail: String },
    #[error("every allocation was excluded (negative cells or degenerate cuts); no feasible point")]
    NoFeasiblePoint,
    #[error("block transform failed for racial block ({husband_race},{wife_race}): {source}")]
    BlockTransform {
        husband_race: usize,
        wife_race: usize,
        source: NmError,
    },
    #[error("allocation does not satisfy the lattice constraints: {detail}")]
    AllocationMismatch { detail: String },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Nm(#[from] NmError),
    #[error(transparent)]
    LiuLu(#[from] LiuLuError),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl GnmError {
    /// True for the errors that mean "the feasible set is empty", as
    /// opposed to a malformed problem.
    pub fn is_empty_feasible_set(&self) -> bool {
        matches!(
            self,
            GnmError::NoFeasiblePoint | GnmError::InfeasibleBlockTotals { .. }
        )
    }
}

/// A full counterfactual problem: the three observed tables, the layout,
/// and the search configuration.
#[derive(Clone, Debug)]
pub struct GnmProblem {
    /// Observed table at the time race preferences are measured.
    pub race_prefs: ContingencyTable,
    /// Observed table at the time availability is measured.
    pub availability: ContingencyTable,
    /// Observed table at the time education preferences are measured.
    pub edu_prefs: ContingencyTable,
    pub layout: RaceEduLayout,
    pub order: SortOrder,
    pub objective: Objective,
    /// Cells below `-epsilon` mark an allocation as unrealistic.
    pub epsilon: f64,
    pub allocation_space: AllocationSpace,
    pub step2_source: Step2Source,
    /// Parallel workers for the large-lattice search path. Results are
    /// identical for any value.
    pub jobs: usize,
}

impl GnmProblem {
    pub fn new(
        race_prefs: ContingencyTable,
        availability: ContingencyTable,
        edu_prefs: ContingencyTable,
        layout: RaceEduLayout,
    ) -> Result<Self, GnmError> {
        for (name, t) in [
            ("race-preference", &race_prefs),
            ("availability", &availability),
            ("education-preference", &edu_prefs),
        ] {
            layout.check_table(t)?;
            if !t.is_nonnegative() {
                return Err(GnmError::InvalidProblem(format!(
                    "{name} table must be nonnegative (observed tables only)"
                )));
            }
        }
        if availability.grand_total() <= 0.0 {
            return Err(GnmError::InvalidProblem(
                "availability table must have positive total".into(),
            ));
        }
        if layout.n_edu() < 2 {
            return Err(GnmError::InvalidProblem(
                "the sequential construction needs at least two education levels".into(),
            ));
        }
        Ok(Self {
            race_prefs,
            availability,
            edu_prefs,
            layout,
            order: SortOrder::RaceFirst,
            objective: Objective::Sehc,
            epsilon: DEFAULT_NEGATIVE_TOLERANCE,
            allocation_space: AllocationSpace::Full,
            step2_source: Step2Source::DeclaredRoles,
            jobs: 1,
        })
    }

    pub fn with_order(mut self, order: SortOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_allocation_space(mut self, space: AllocationSpace) -> Self {
        self.allocation_space = space;
        self
    }

    pub fn with_step2_source(mut self, source: Step2Source) -> Self {
        self.step2_source = source;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    /// Step-2 preference table under the race-first order.
    pub(crate) fn race_first_step2_table(&self) -> &ContingencyTable {
        match self.step2_source {
            Step2Source::DeclaredRoles => &self.edu_prefs,
            Step2Source::StepOneTable => &self.race_prefs,
        }
    }

    /// Step-2 preference table under the education-first order.
    pub(crate) fn edu_first_step2_table(&self) -> &ContingencyTable {
        match self.step2_source {
            Step2Source::DeclaredRoles => &self.race_prefs,
            Step2Source::StepOneTable => &self.edu_prefs,
        }
    }

    pub(crate) fn moment(&self, t: &ContingencyTable) -> Result<f64, TableError> {
        match self.objective {
            Objective::Sehc => sehc(t, &self.layout),
            Objective::Sirm => sirm(t, &self.layout),
        }
    }
}

/// One point of the allocation lattice.
///
/// Race first: for each husband race, how many men of each education level
/// marry into the inter-racial block (and symmetrically for wives). The
/// same-race block marginals follow by subtraction from availability.
///
/// Education first: for each education pair (k, l), how many first-race
/// husbands of education k have wives of education l, and symmetrically for
/// first-race wives; second-race counts follow by subtraction from the
/// step-1 block totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AllocationPoint {
    RaceFirst {
        husband_to_mixed: [Vec<i64>; 2],
        wife_to_mixed: [Vec<i64>; 2],
    },
    EducationFirst {
        /// Row-major n x n counts for the first race's husbands.
        husband_race0: Vec<i64>,
        /// Row-major n x n counts for the first race's wives.
        wife_race0: Vec<i64>,
        n_edu: usize,
    },
}

impl AllocationPoint {
    /// The coordinates in canonical enumeration order, used for
    /// lexicographic tie-breaking.
    pub fn lex_key(&self) -> Vec<i64> {
        match self {
            AllocationPoint::RaceFirst { husband_to_mixed, wife_to_mixed } => husband_to_mixed
                .iter()
                .chain(wife_to_mixed.iter())
                .flatten()
                .copied()
                .collect(),
            AllocationPoint::EducationFirst { husband_race0, wife_race0, n_edu } => {
                let n = *n_edu;
                let mut key = husband_race0.clone();
                // wife coordinates enumerate column by column
                for l in 0..n {
                    for k in 0..n {
                        key.push(wife_race0[k * n + l]);
                    }
                }
                key
            }
        }
    }
}

/// The min/max of a moment over the feasible lattice, with the attaining
/// allocations and the exclusion bookkeeping.
#[derive(Clone, Debug)]
pub struct MomentInterval {
    pub min_value: f64,
    pub max_value: f64,
    pub argmin: AllocationPoint,
    pub argmax: AllocationPoint,
    /// Feasible points examined by the search.
    pub n_feasible: u64,
    /// Points excluded because the assembled table had a cell below
    /// `-epsilon`.
    pub n_excluded_negative: u64,
    /// Points excluded because a block transform hit a degenerate target
    /// cut (the counterfactual is undefined there).
    pub n_excluded_degenerate: u64,
}

/// Step 1 of the race-first order: the 2x2 counterfactual racial
/// distribution, carrying the race-preference table's racial sorting onto
/// the availability table's racial marginals.
pub fn racial_step(p: &GnmProblem) -> Result<ContingencyTable, GnmError> {
    let z_pref = race_aggregate(&p.race_prefs, &p.layout)?;
    let z_avail = race_aggregate(&p.availability, &p.layout)?;
    let res = nm::nm_transform_to_availability(&z_pref, &z_avail)?;
    Ok(res.table)
}

/// Step 1 of the education-first order: the n x n counterfactual
/// education-pair distribution.
pub fn education_step(p: &GnmProblem) -> Result<ContingencyTable, GnmError> {
    let z_pref = edu_aggregate(&p.edu_prefs, &p.layout)?;
    let z_avail = edu_aggregate(&p.availability, &p.layout)?;
    let res = nm::nm_transform_to_availability(&z_pref, &z_avail)?;
    Ok(res.table)
}

pub(crate) fn floor_snapped(v: f64) -> f64 {
    if (v - v.round()).abs() <= 1e-9 {
        v.round()
    } else {
        v.floor()
    }
}

fn as_exact_integer(v: f64, what: &str) -> Result<i64, GnmError> {
    if (v - v.round()).abs() > 1e-6 || v.abs() > 9.0e15 {
        return Err(GnmError::InfeasibleBlockTotals {
            detail: format!("{what} must be an integer for the allocation lattice, got {v}"),
        });
    }
    Ok(v.round() as i64)
}

/// Rounds the step-1 racial block totals to integers with the
/// largest-remainder method, preserving the grand total. Remainder ties
/// prefer the same-race diagonal, which keeps the rounded table consistent
/// with the (integer) racial availability marginals.
pub fn round_block_totals(
    racial: &ContingencyTable,
    availability_racial: &ContingencyTable,
) -> Result<[[i64; 2]; 2], GnmError> {
    if racial.n_rows() != 2 || racial.n_cols() != 2 {
        return Err(GnmError::InvalidProblem(format!(
            "racial table must be 2x2, got {}x{}",
            racial.n_rows(),
            racial.n_cols()
        )));
    }
    let (av_rows, av_cols) = availability_racial.marginals();
    let row_totals = [
        as_exact_integer(av_rows[0], "racial availability row total")?,
        as_exact_integer(av_rows[1], "racial availability row total")?,
    ];
    let col_totals = [
        as_exact_integer(av_cols[0], "racial availability column total")?,
        as_exact_integer(av_cols[1], "racial availability column total")?,
    ];
    let grand = row_totals[0] + row_totals[1];
    if grand != col_totals[0] + col_totals[1] {
        return Err(GnmError::InfeasibleBlockTotals {
            detail: "racial availability marginals are inconsistent".into(),
        });
    }

    let cells = racial.counts();
    let floors: Vec<f64> = cells.iter().map(|&v| floor_snapped(v)).collect();
    let fracs: Vec<f64> = cells
        .iter()
        .zip(&floors)
        .map(|(&v, &f)| (v - f).max(0.0))
        .collect();
    let floor_sum: f64 = floors.iter().sum();
    let leftover = (grand as f64 - floor_sum).round() as i64;
    if !(0..=4).contains(&leftover) {
        return Err(GnmError::InfeasibleBlockTotals {
            detail: format!(
                "racial counterfactual total {} does not match availability total {grand}",
                racial.grand_total()
            ),
        });
    }
    // Largest remainder; ties by fixed rank BB, WW, BW, WB.
    const TIE_RANK: [usize; 4] = [0, 2, 3, 1];
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        if (fracs[a] - fracs[b]).abs() <= 1e-9 {
            TIE_RANK[a].cmp(&TIE_RANK[b])
        } else {
            fracs[b].partial_cmp(&fracs[a]).unwrap()
        }
    });
    let mut rounded = [
        [floors[0] as i64, floors[1] as i64],
        [floors[2] as i64, floors[3] as i64],
    ];
    for &idx in order.iter().take(leftover as usize) {
        rounded[idx / 2][idx % 2] += 1;
    }

    for (i, row) in rounded.iter().enumerate() {
        if row[0] + row[1] != row_totals[i] {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "rounded racial blocks break the row-{i} availability total ({} vs {})",
                    row[0] + row[1],
                    row_totals[i]
                ),
            });
        }
    }
    for j in 0..2 {
        if rounded[0][j] + rounded[1][j] != col_totals[j] {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!("rounded racial blocks break the column-{j} availability total"),
            });
        }
    }
    if rounded.iter().flatten().any(|&v| v < 0) {
        return Err(GnmError::InfeasibleBlockTotals {
            detail: "the racial counterfactual assigns negative mass to a racial block".into(),
        });
    }
    Ok(rounded)
}

/// Race- and education-specific availability: `male[r][k]` counts husbands
/// of race r and education k in the availability table; `female[r][l]`
/// counts wives likewise.
#[derive(Clone, Debug)]
pub(crate) struct AvailabilityVectors {
    pub male: [Vec<f64>; 2],
    pub female: [Vec<f64>; 2],
}

pub(crate) fn availability_vectors(p: &GnmProblem) -> AvailabilityVectors {
    let n = p.layout.n_edu();
    let (rows, cols) = p.availability.marginals();
    let slice = |v: &[f64], race: usize| v[race * n..(race + 1) * n].to_vec();
    AvailabilityVectors {
        male: [slice(&rows, 0), slice(&rows, 1)],
        female: [slice(&cols, 0), slice(&cols, 1)],
    }
}

/// Integer caps for allocations bounded by real-valued availability.
pub(crate) fn caps_of(avail: &[f64]) -> Vec<i64> {
    avail.iter().map(|&a| floor_snapped(a + 1e-9).max(0.0) as i64).collect()
}

/// All vectors of nonnegative integers with the given total, bounded
/// per-coordinate by caps, in ascending lexicographic order. Coordinate
/// ranges are tightened by the remaining-capacity bound before enumeration.
pub(crate) fn compositions(total: i64, caps: &[i64]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if total < 0 || caps.is_empty() {
        return out;
    }
    let mut suffix = vec![0i64; caps.len() + 1];
    for k in (0..caps.len()).rev() {
        suffix[k] = suffix[k + 1] + caps[k].max(0);
    }
    if total > suffix[0] {
        return out;
    }
    let mut current = vec![0i64; caps.len()];
    fn rec(
        k: usize,
        remaining: i64,
        caps: &[i64],
        suffix: &[i64],
        current: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if k == caps.len() - 1 {
            if remaining <= caps[k] {
                current[k] = remaining;
                out.push(current.clone());
            }
            return;
        }
        let lo = (remaining - suffix[k + 1]).max(0);
        let hi = caps[k].min(remaining);
        for v in lo..=hi {
            current[k] = v;
            rec(k + 1, remaining - v, caps, suffix, current, out);
        }
    }
    if caps.len() == 1 {
        if (0..=caps[0]).contains(&total) {
            out.push(vec![total]);
        }
        return out;
    }
    rec(0, total, caps, &suffix, &mut current, &mut out);
    out
}

/// The four race-first allocation groups, in enumeration order:
/// husbands-to-mixed per race, then wives-to-mixed per race.
pub(crate) struct RaceFirstGroups {
    /// [race0 husbands, race1 husbands, race0 wives, race1 wives]
    pub groups: [Vec<Vec<i64>>; 4],
    pub rounded: [[i64; 2]; 2],
}

pub(crate) fn race_first_groups(
    p: &GnmProblem,
    racial: &ContingencyTable,
) -> Result<RaceFirstGroups, GnmError> {
    let availability_racial = race_aggregate(&p.availability, &p.layout)?;
    let rounded = round_block_totals(racial, &availability_racial)?;
    let av = availability_vectors(p);
    let mixed_of_husband = [rounded[0][1], rounded[1][0]];
    let mixed_of_wife = [rounded[1][0], rounded[0][1]];
    let mut groups: [Vec<Vec<i64>>; 4] = [vec![], vec![], vec![], vec![]];
    for race in 0..2 {
        groups[race] = compositions(mixed_of_husband[race], &caps_of(&av.male[race]));
        if groups[race].is_empty() {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "no split of race-{race} husbands by education reaches the inter-racial block total {}",
                    mixed_of_husband[race]
                ),
            });
        }
        groups[2 + race] = compositions(mixed_of_wife[race], &caps_of(&av.female[race]));
        if groups[2 + race].is_empty() {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "no split of race-{race} wives by education reaches the inter-racial block total {}",
                    mixed_of_wife[race]
                ),
            });
        }
    }
    Ok(RaceFirstGroups { groups, rounded })
}

/// A lazily enumerated stream of allocation points in lexicographic order.
#[derive(Debug)]
pub struct AllocationStream {
    groups: Vec<Vec<Vec<i64>>>,
    idx: Vec<usize>,
    done: bool,
    kind: StreamKind,
}

#[derive(Debug)]
enum StreamKind {
    RaceFirst,
    EducationFirst { n_edu: usize },
}

impl AllocationStream {
    fn new(groups: Vec<Vec<Vec<i64>>>, kind: StreamKind) -> Self {
        let done = groups.iter().any(Vec::is_empty);
        let idx = vec![0; groups.len()];
        Self { groups, idx, done, kind }
    }

    /// Number of lattice points in the stream.
    pub fn lattice_size(&self) -> u128 {
        self.groups.iter().map(|g| g.len() as u128).product()
    }

    fn current(&self) -> AllocationPoint {
        let pick = |i: usize| self.groups[i][self.idx[i]].clone();
        match self.kind {
            StreamKind::RaceFirst => AllocationPoint::RaceFirst {
                husband_to_mixed: [pick(0), pick(1)],
                wife_to_mixed: [pick(2), pick(3)],
            },
            StreamKind::EducationFirst { n_edu } => {
                let n = n_edu;
                let mut husband = vec![0i64; n * n];
                for k in 0..n {
                    husband[k * n..(k + 1) * n].copy_from_slice(&self.groups[k][self.idx[k]]);
                }
                let mut wife = vec![0i64; n * n];
                for l in 0..n {
                    let col = &self.groups[n + l][self.idx[n + l]];
                    for k in 0..n {
                        wife[k * n + l] = col[k];
                    }
                }
                AllocationPoint::EducationFirst { husband_race0: husband, wife_race0: wife, n_edu: n }
            }
        }
    }
}

impl Iterator for AllocationStream {
    type Item = AllocationPoint;

    fn next(&mut self) -> Option<AllocationPoint> {
        if self.done {
            return None;
        }
        let point = self.current();
        // odometer increment, last group fastest
        let mut pos = self.groups.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < self.groups[pos].len() {
                break;
            }
            self.idx[pos] = 0;
        }
        Some(point)
    }
}

/// Every integer point satisfying the race-first allocation constraints,
/// in deterministic lexicographic order.
pub fn enumerate_allocations(
    p: &GnmProblem,
    racial: &ContingencyTable,
) -> Result<AllocationStream, GnmError> {
    let g = race_first_groups(p, racial)?;
    Ok(AllocationStream::new(g.groups.into_iter().collect(), StreamKind::RaceFirst))
}

/// Education-first allocation groups: one composition family per husband
/// education level (rows of the first race's husband matrix), then one per
/// wife education level (columns of the wife matrix).
pub(crate) struct EduFirstGroups {
    pub groups: Vec<Vec<Vec<i64>>>,
    pub block_totals: Vec<f64>,
}

/// The step-1 education-pair block totals, validated nonnegative.
pub(crate) fn edu_block_totals(
    p: &GnmProblem,
    edu_table: &ContingencyTable,
) -> Result<Vec<f64>, GnmError> {
    let n = p.layout.n_edu();
    if edu_table.n_rows() != n || edu_table.n_cols() != n {
        return Err(GnmError::InvalidProblem(format!(
            "education step table must be {n}x{n}"
        )));
    }
    let block_totals: Vec<f64> = edu_table.counts().to_vec();
    for (i, &e) in block_totals.iter().enumerate() {
        if e < -p.epsilon {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "education-pair block ({},{}) has negative counterfactual mass {e}",
                    i / n,
                    i % n
                ),
            });
        }
    }
    Ok(block_totals)
}

pub(crate) fn edu_first_groups(
    p: &GnmProblem,
    edu_table: &ContingencyTable,
) -> Result<EduFirstGroups, GnmError> {
    let n = p.layout.n_edu();
    let av = availability_vectors(p);
    let block_totals = edu_block_totals(p, edu_table)?;
    let cell_caps: Vec<i64> = block_totals.iter().map(|&e| floor_snapped(e + 1e-9).max(0.0) as i64).collect();
    let mut groups = Vec::with_capacity(2 * n);
    for k in 0..n {
        let total = as_exact_integer(av.male[0][k], "race-0 male availability")?;
        let caps: Vec<i64> = (0..n).map(|l| cell_caps[k * n + l]).collect();
        let g = compositions(total, &caps);
        if g.is_empty() {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "race-0 husbands of education {k} ({total}) cannot be split across the education-pair block capacities"
                ),
            });
        }
        groups.push(g);
    }
    for l in 0..n {
        let total = as_exact_integer(av.female[0][l], "race-0 female availability")?;
        let caps: Vec<i64> = (0..n).map(|k| cell_caps[k * n + l]).collect();
        let g = compositions(total, &caps);
        if g.is_empty() {
            return Err(GnmError::InfeasibleBlockTotals {
                detail: format!(
                    "race-0 wives of education {l} ({total}) cannot be split across the education-pair block capacities"
                ),
            });
        }
        groups.push(g);
    }
    Ok(EduFirstGroups { groups, block_totals })
}

/// Step 1 of the education-first order plus the stream of step-2
/// allocations it admits.
pub fn education_first_step(
    p: &GnmProblem,
) -> Result<(ContingencyTable, AllocationStream), GnmError> {
    let edu_table = education_step(p)?;
    let n = p.layout.n_edu();
    let g = edu_first_groups(p, &edu_table)?;
    Ok((
        edu_table,
        AllocationStream::new(g.groups, StreamKind::EducationFirst { n_edu: n }),
    ))
}

/// `a - b`, clamped to zero when cap rounding leaves a negligible negative
/// remainder.
#[inline]
pub(crate) fn sub_clamped(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d < 0.0 {
        0.0
    } else {
        d
    }
}

/// The husband/wife target marginal vectors of one racial block under a
/// race-first allocation.
pub(crate) fn race_first_block_targets(
    av: &AvailabilityVectors,
    a: &AllocationPoint,
    hr: usize,
    wr: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (husband_to_mixed, wife_to_mixed) = match a {
        AllocationPoint::RaceFirst { husband_to_mixed, wife_to_mixed } => {
            (husband_to_mixed, wife_to_mixed)
        }
        AllocationPoint::EducationFirst { .. } => unreachable!("race-first targets need a race-first point"),
    };
    let husband: Vec<f64> = if hr == wr {
        av.male[hr]
            .iter()
            .zip(&husband_to_mixed[hr])
            .map(|(&a, &u)| sub_clamped(a, u as f64))
            .collect()
    } else {
        husband_to_mixed[hr].iter().map(|&u| u as f64).collect()
    };
    let wife: Vec<f64> = if hr == wr {
        av.female[wr]
            .iter()
            .zip(&wife_to_mixed[wr])
            .map(|(&a, &w)| sub_clamped(a, w as f64))
            .collect()
    } else {
        wife_to_mixed[wr].iter().map(|&w| w as f64).collect()
    };
    (husband, wife)
}

/// The 2x2 racial slice of a table at one education pair (k, l).
pub(crate) fn race_slice(
    t: &ContingencyTable,
    layout: &RaceEduLayout,
    k: usize,
    l: usize,
) -> ContingencyTable {
    let cells = vec![
        t.get(layout.index(0, k), layout.index(0, l)),
        t.get(layout.index(0, k), layout.index(1, l)),
        t.get(layout.index(1, k), layout.index(0, l)),
        t.get(layout.index(1, k), layout.index(1, l)),
    ];
    let labels: Vec<_> = layout
        .race_labels()
        .iter()
        .map(crate::tables::AxisLabel::plain)
        .collect();
    ContingencyTable::new(cells, labels.clone(), labels).expect("2x2 slice")
}

/// Assembles the full counterfactual table for one allocation point.
/// `step1` is the rounded-consistent racial 2x2 (race first) or the
/// education-pair n x n table (education first). Negative cells below
/// `-epsilon` are reported, never clamped.
pub fn assemble_counterfactual(
    p: &GnmProblem,
    step1: &ContingencyTable,
    a: &AllocationPoint,
) -> Result<(ContingencyTable, Vec<NegativeCell>), GnmError> {
    let table = match a {
        AllocationPoint::RaceFirst { .. } => assemble_race_first(p, step1, a)?,
        AllocationPoint::EducationFirst { .. } => assemble_edu_first(p, step1, a)?,
    };
    let negatives = nm::collect_negative_cells(&table, p.epsilon);
    Ok((table, negatives))
}

fn assemble_race_first(
    p: &GnmProblem,
    racial: &ContingencyTable,
    a: &AllocationPoint,
) -> Result<ContingencyTable, GnmError> {
    let n = p.layout.n_edu();
    let d = p.layout.table_dim();
    let availability_racial = race_aggregate(&p.availability, &p.layout)?;
    let rounded = round_block_totals(racial, &availability_racial)?;
    validate_race_first_point(p, rounded, a)?;
    let av = availability_vectors(p);
    let step2 = p.race_first_step2_table();
    let mut counts = vec![0.0; d * d];
    for hr in 0..2 {
        for wr in 0..2 {
            let (husband, wife) = race_first_block_targets(&av, a, hr, wr);
            let block_total: f64 = husband.iter().sum();
            if block_total == 0.0 {
                continue;
            }
            let source = block_extract(step2, &p.layout, hr, wr)?;
            let targets = TargetMarginals::new(husband, wife)
                .map_err(|source| GnmError::BlockTransform { husband_race: hr, wife_race: wr, source })?;
            let res = nm::nm_transform(&source, &targets)
                .map_err(|source| GnmError::BlockTransform { husband_race: hr, wife_race: wr, source })?;
            for k in 0..n {
                for l in 0..n {
                    counts[p.layout.index(hr, k) * d + p.layout.index(wr, l)] = res.table.get(k, l);
                }
            }
        }
    }
    Ok(ContingencyTable::new(
        counts,
        p.layout.axis_labels(),
        p.layout.axis_labels(),
    )?)
}

fn validate_race_first_point(
    p: &GnmProblem,
    rounded: [[i64; 2]; 2],
    a: &AllocationPoint,
) -> Result<(), GnmError> {
    let AllocationPoint::RaceFirst { husband_to_mixed, wife_to_mixed } = a else {
        return Err(GnmError::AllocationMismatch { detail: "expected a race-first point".into() });
    };
    let n = p.layout.n_edu();
    let av = availability_vectors(p);
    let mixed_of_husband = [rounded[0][1], rounded[1][0]];
    let mixed_of_wife = [rounded[1][0], rounded[0][1]];
    for race in 0..2 {
        for (label, vecs, caps, want) in [
            ("husband", &husband_to_mixed[race], caps_of(&av.male[race]), mixed_of_husband[race]),
            ("wife", &wife_to_mixed[race], caps_of(&av.female[race]), mixed_of_wife[race]),
        ] {
            if vecs.len() != n {
                return Err(GnmError::AllocationMismatch {
                    detail: format!("{label} vector for race {race} must have {n} entries"),
                });
            }
            if vecs.iter().any(|&v| v < 0) || vecs.iter().zip(&caps).any(|(&v, &c)| v > c) {
                return Err(GnmError::AllocationMismatch {
                    detail: format!("{label} allocation for race {race} violates availability caps"),
                });
            }
            if vecs.iter().sum::<i64>() != want {
                return Err(GnmError::AllocationMismatch {
                    detail: format!(
                        "{label} allocation for race {race} must sum to the rounded inter-racial total {want}"
                    ),
                });
            }
        }
    }
    Ok(())
}

fn assemble_edu_first(
    p: &GnmProblem,
    edu_table: &ContingencyTable,
    a: &AllocationPoint,
) -> Result<ContingencyTable, GnmError> {
    let AllocationPoint::EducationFirst { husband_race0, wife_race0, n_edu } = a else {
        return Err(GnmError::AllocationMismatch { detail: "expected an education-first point".into() });
    };
    let n = p.layout.n_edu();
    if *n_edu != n || husband_race0.len() != n * n || wife_race0.len() != n * n {
        return Err(GnmError::AllocationMismatch {
            detail: format!("education-first point must carry {n}x{n} matrices"),
        });
    }
    let block_totals = edu_block_totals(p, edu_table)?;
    let av = availability_vectors(p);
    for k in 0..n {
        let sum: i64 = (0..n).map(|l| husband_race0[k * n + l]).sum();
        if sum != as_exact_integer(av.male[0][k], "race-0 male availability")? {
            return Err(GnmError::AllocationMismatch {
                detail: format!("husband row {k} must sum to the race-0 availability"),
            });
        }
    }
    for l in 0..n {
        let sum: i64 = (0..n).map(|k| wife_race0[k * n + l]).sum();
        if sum != as_exact_integer(av.female[0][l], "race-0 female availability")? {
            return Err(GnmError::AllocationMismatch {
                detail: format!("wife column {l} must sum to the race-0 availability"),
            });
        }
    }
    let step2 = p.edu_first_step2_table();
    let d = p.layout.table_dim();
    let mut counts = vec![0.0; d * d];
    for k in 0..n {
        for l in 0..n {
            let e = block_totals[k * n + l];
            let x = husband_race0[k * n + l] as f64;
            let y = wife_race0[k * n + l] as f64;
            if e.abs() <= p.epsilon {
                if x != 0.0 || y != 0.0 {
                    return Err(GnmError::AllocationMismatch {
                        detail: format!("education-pair block ({k},{l}) is empty but received mass"),
                    });
                }
                continue;
            }
            if x > floor_snapped(e + 1e-9) || y > floor_snapped(e + 1e-9) {
                return Err(GnmError::AllocationMismatch {
                    detail: format!("education-pair block ({k},{l}) capacity exceeded"),
                });
            }
            let source = race_slice(step2, &p.layout, k, l);
            let husband = vec![x, sub_clamped(e, x)];
            let wife = vec![y, sub_clamped(e, y)];
            let targets = TargetMarginals::new(husband, wife)
                .map_err(|source| GnmError::BlockTransform { husband_race: k, wife_race: l, source })?;
            let res = nm::nm_transform(&source, &targets)
                .map_err(|source| GnmError::BlockTransform { husband_race: k, wife_race: l, source })?;
            for hr in 0..2 {
                for wr in 0..2 {
                    counts[p.layout.index(hr, k) * d + p.layout.index(wr, l)] = res.table.get(hr, wr);
                }
            }
        }
    }
    Ok(ContingencyTable::new(
        counts,
        p.layout.axis_labels(),
        p.layout.axis_labels(),
    )?)
}

/// The allocation actually realized in the availability table, under the
/// given order's parameterization.
pub fn observed_allocation(p: &GnmProblem, order: SortOrder) -> Result<AllocationPoint, GnmError> {
    let n = p.layout.n_edu();
    let t = &p.availability;
    let lay = &p.layout;
    match order {
        SortOrder::RaceFirst => {
            let mut husband_to_mixed = [vec![0i64; n], vec![0i64; n]];
            let mut wife_to_mixed = [vec![0i64; n], vec![0i64; n]];
            for race in 0..2 {
                let other = 1 - race;
                for k in 0..n {
                    let mixed_h: f64 = (0..n).map(|l| t.get(lay.index(race, k), lay.index(other, l))).sum();
                    husband_to_mixed[race][k] =
                        as_exact_integer(mixed_h, "observed inter-racial husband count")?;
                    let mixed_w: f64 = (0..n).map(|l| t.get(lay.index(other, l), lay.index(race, k))).sum();
                    wife_to_mixed[race][k] =
                        as_exact_integer(mixed_w, "observed inter-racial wife count")?;
                }
            }
            Ok(AllocationPoint::RaceFirst { husband_to_mixed, wife_to_mixed })
        }
        SortOrder::EducationFirst => {
            let mut husband = vec![0i64; n * n];
            let mut wife = vec![0i64; n * n];
            for k in 0..n {
                for l in 0..n {
                    let h: f64 = (0..2).map(|wr| t.get(lay.index(0, k), lay.index(wr, l))).sum();
                    husband[k * n + l] = as_exact_integer(h, "observed husband education pairing")?;
                    let w: f64 = (0..2).map(|hr| t.get(lay.index(hr, k), lay.index(0, l))).sum();
                    wife[k * n + l] = as_exact_integer(w, "observed wife education pairing")?;
                }
            }
            Ok(AllocationPoint::EducationFirst { husband_race0: husband, wife_race0: wife, n_edu: n })
        }
        SortOrder::BothOrders => Err(GnmError::InvalidProblem(
            "the observed allocation is order-specific; pick one order".into(),
        )),
    }
}

/// Assembles one allocation and evaluates the problem's moment on it.
pub fn evaluate_allocation(
    p: &GnmProblem,
    step1: &ContingencyTable,
    a: &AllocationPoint,
) -> Result<(f64, ContingencyTable, Vec<NegativeCell>), GnmError> {
    let (table, negatives) = assemble_counterfactual(p, step1, a)?;
    let value = p.moment(&table)?;
    Ok((value, table, negatives))
}

/// The point interval at the observed allocation; the observed allocation
/// must be feasible in the counterfactual problem or there is no point to
/// report.
pub(crate) fn observed_point_interval(
    p: &GnmProblem,
    order: SortOrder,
) -> Result<MomentInterval, GnmError> {
    let a = observed_allocation(p, order)?;
    let step1 = match order {
        SortOrder::RaceFirst => racial_step(p)?,
        SortOrder::EducationFirst => education_step(p)?,
        SortOrder::BothOrders => unreachable!("resolved to a single order"),
    };
    match evaluate_allocation(p, &step1, &a) {
        Ok((value, _, negatives)) => {
            if !negatives.is_empty() {
                return Err(GnmError::NoFeasiblePoint);
            }
            Ok(MomentInterval {
                min_value: value,
                max_value: value,
                argmin: a.clone(),
                argmax: a,
                n_feasible: 1,
                n_excluded_negative: 0,
                n_excluded_degenerate: 0,
            })
        }
        Err(GnmError::BlockTransform { .. }) | Err(GnmError::AllocationMismatch { .. }) => {
            Err(GnmError::NoFeasiblePoint)
        }
        Err(e) => Err(e),
    }
}

fn merge_intervals(first: MomentInterval, second: MomentInterval) -> MomentInterval {
    let mut out = first;
    // ties keep the race-first (first-run) attaining point
    if second.min_value < out.min_value {
        out.min_value = second.min_value;
        out.argmin = second.argmin;
    }
    if second.max_value > out.max_value {
        out.max_value = second.max_value;
        out.argmax = second.argmax;
    }
    out.n_feasible += second.n_feasible;
    out.n_excluded_negative += second.n_excluded_negative;
    out.n_excluded_degenerate += second.n_excluded_degenerate;
    out
}

/// Minimum and maximum of the objective over every feasible allocation, for
/// the configured order (hull of both orders when `BothOrders`).
pub fn gnm_interval(p: &GnmProblem) -> Result<MomentInterval, GnmError> {
    match p.order {
        SortOrder::RaceFirst => race_first::search(p),
        SortOrder::EducationFirst => edu_first::search(p),
        SortOrder::BothOrders => {
            let race = race_first::search(p);
            let edu = edu_first::search(p);
            match (race, edu) {
                (Ok(a), Ok(b)) => Ok(merge_intervals(a, b)),
                (Ok(a), Err(e)) if e.is_empty_feasible_set() => Ok(a),
                (Err(e), Ok(b)) if e.is_empty_feasible_set() => Ok(b),
                (Err(a), Err(b)) => {
                    if a.is_empty_feasible_set() && b.is_empty_feasible_set() {
                        Err(GnmError::NoFeasiblePoint)
                    } else if a.is_empty_feasible_set() {
                        Err(b)
                    } else {
                        Err(a)
                    }
                }
                (Err(e), _) => Err(e),
                (_, Err(e)) => Err(e),
            }
        }
    }
}
