//! Independent brute-force verifiers for the transform and the lattice
//! searches.
//!
//! Everything here re-derives measures, transforms, constraints, rounding,
//! and enumeration with its own plain loops: the only implementation shared
//! with the engine is the `tables` module (and the public problem/result
//! data types, for comparability). A bug in the measure, transform, or
//! search code paths therefore cannot confirm itself through the oracle.
//!
//! The searches are guarded: instances beyond a million lattice points are
//! refused rather than ground through.

use crate::gnm::{
    AllocationSpace, GnmProblem, MomentInterval, AllocationPoint, Objective, SortOrder,
    Step2Source,
};
use crate::nm::TargetMarginals;
use crate::tables::{
    edu_aggregate, race_aggregate, sehc, sirm, ContingencyTable, RaceEduLayout,
};
use thiserror::Error;

const LATTICE_GUARD: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("lattice has {size} points, above the oracle guard of {LATTICE_GUARD}")]
    LatticeTooLarge { size: u128 },
    #[error("no integer allocation satisfies the constraints: {detail}")]
    Infeasible { detail: String },
    #[error("every allocation excluded; no feasible point")]
    NoFeasiblePoint,
    #[error("oracle cannot verify this problem: {0}")]
    Unsupported(String),
}

/// Deviations of a candidate table from the transform contract: marginal
/// fidelity against the targets and measure preservation against the
/// source, both recomputed from scratch.
#[derive(Clone, Copy, Debug)]
pub struct NmVerification {
    pub max_marginal_deviation: f64,
    pub max_measure_deviation: f64,
    /// Cuts where both source and candidate have a defined measure.
    pub n_compared_cuts: usize,
}

/// floor(a*b/den) with exact integer arithmetic when the inputs are whole.
fn oracle_floor(a: f64, b: f64, den: f64) -> f64 {
    let whole = |x: f64| x.abs() < 9.0e15 && (x - x.round()).abs() <= 1e-9;
    if whole(a) && whole(b) && whole(den) && den.round() != 0.0 {
        let prod = a.round() as i128 * b.round() as i128;
        return prod.div_euclid(den.round() as i128) as f64;
    }
    let q = a * b / den;
    let near = q.round();
    if (q - near).abs() <= 1e-9 * q.abs().max(1.0) {
        near
    } else {
        q.floor()
    }
}

/// The simplified measure at one cut of a table, by direct quadrant
/// summation. `None` when the denominator degenerates.
fn oracle_cut_value(t: &ContingencyTable, cut_row: usize, cut_col: usize) -> Option<f64> {
    let mut high_high = 0.0;
    let mut high_row = 0.0;
    let mut high_col = 0.0;
    let mut total = 0.0;
    for r in 0..t.n_rows() {
        for c in 0..t.n_cols() {
            let v = t.get(r, c);
            total += v;
            if r >= cut_row {
                high_row += v;
            }
            if c >= cut_col {
                high_col += v;
            }
            if r >= cut_row && c >= cut_col {
                high_high += v;
            }
        }
    }
    if total <= 0.0 {
        return None;
    }
    let q_floor = oracle_floor(high_row, high_col, total);
    let min_marginal = high_row.min(high_col);
    let denom = min_marginal - q_floor;
    if denom.abs() <= 1e-9 * min_marginal.abs().max(1.0) {
        return None;
    }
    Some((high_high - q_floor) / denom)
}

/// Recomputes marginals and per-cut measures of a candidate transform
/// output, independently of the transform code path.
pub fn verify_nm(
    source: &ContingencyTable,
    targets: &TargetMarginals,
    candidate: &ContingencyTable,
) -> NmVerification {
    let mut max_marginal_deviation = 0.0f64;
    for (r, &want) in targets.row_targets().iter().enumerate() {
        let mut sum = 0.0;
        for c in 0..candidate.n_cols() {
            sum += candidate.get(r, c);
        }
        max_marginal_deviation = max_marginal_deviation.max((sum - want).abs());
    }
    for (c, &want) in targets.col_targets().iter().enumerate() {
        let mut sum = 0.0;
        for r in 0..candidate.n_rows() {
            sum += candidate.get(r, c);
        }
        max_marginal_deviation = max_marginal_deviation.max((sum - want).abs());
    }
    let mut max_measure_deviation = 0.0f64;
    let mut n_compared_cuts = 0;
    for i in 1..source.n_rows() {
        for j in 1..source.n_cols() {
            let src = oracle_cut_value(source, i, j);
            let out = oracle_cut_value(candidate, i, j);
            if let (Some(a), Some(b)) = (src, out) {
                max_measure_deviation = max_measure_deviation.max((a - b).abs());
                n_compared_cuts += 1;
            }
        }
    }
    NmVerification {
        max_marginal_deviation,
        max_measure_deviation,
        n_compared_cuts,
    }
}

enum OracleBlock {
    Zero,
    Degenerate,
    Theta(Vec<f64>),
}

/// Measures a block source at every cut, independently.
fn oracle_block_measure(source: &ContingencyTable) -> OracleBlock {
    let (n, m) = (source.n_rows(), source.n_cols());
    let mut theta = Vec::with_capacity((n - 1) * (m - 1));
    for i in 1..n {
        for j in 1..m {
            match oracle_cut_value(source, i, j) {
                Some(v) => theta.push(v),
                None => return OracleBlock::Degenerate,
            }
        }
    }
    OracleBlock::Theta(theta)
}

/// The transform by direct corner-sum inversion. `None` when a target cut
/// degenerates.
fn oracle_nm(block: &OracleBlock, rows: &[f64], cols: &[f64]) -> Option<Vec<f64>> {
    let theta = match block {
        OracleBlock::Zero => return Some(vec![0.0; rows.len() * cols.len()]),
        OracleBlock::Degenerate => return None,
        OracleBlock::Theta(t) => t,
    };
    let (n, m) = (rows.len(), cols.len());
    let mut row_tails = vec![0.0; n + 1];
    for i in (0..n).rev() {
        row_tails[i] = row_tails[i + 1] + rows[i];
    }
    let mut col_tails = vec![0.0; m + 1];
    for j in (0..m).rev() {
        col_tails[j] = col_tails[j + 1] + cols[j];
    }
    let total = row_tails[0];
    if total <= 0.0 {
        return None;
    }
    let stride = m + 1;
    let mut s = vec![0.0; (n + 1) * (m + 1)];
    s[0] = total;
    for r in 1..n {
        s[r * stride] = row_tails[r];
    }
    for c in 1..m {
        s[c] = col_tails[c];
    }
    for i in 1..n {
        for j in 1..m {
            let (rt, ct) = (row_tails[i], col_tails[j]);
            let q_floor = oracle_floor(rt, ct, total);
            let min_tail = rt.min(ct);
            if (min_tail - q_floor).abs() <= 1e-9 * min_tail.abs().max(1.0) {
                return None;
            }
            s[i * stride + j] = q_floor + theta[(i - 1) * (m - 1) + (j - 1)] * (min_tail - q_floor);
        }
    }
    let mut cells = Vec::with_capacity(n * m);
    for r in 0..n {
        for c in 0..m {
            cells.push(s[r * stride + c] - s[(r + 1) * stride + c] - s[r * stride + c + 1]
                + s[(r + 1) * stride + c + 1]);
        }
    }
    Some(cells)
}

fn whole(v: f64, what: &str) -> Result<i64, OracleError> {
    if (v - v.round()).abs() > 1e-6 {
        return Err(OracleError::Infeasible {
            detail: format!("{what} is not an integer: {v}"),
        });
    }
    Ok(v.round() as i64)
}

/// All cap-bounded nonnegative integer vectors with the given sum, lex
/// ascending, by plain recursion.
fn oracle_compositions(total: i64, caps: &[i64]) -> Vec<Vec<i64>> {
    fn rec(total: i64, caps: &[i64], prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if caps.len() == 1 {
            if total >= 0 && total <= caps[0] {
                prefix.push(total);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for v in 0..=caps[0].min(total.max(0)) {
            prefix.push(v);
            rec(total - v, &caps[1..], prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if total >= 0 && !caps.is_empty() {
        rec(total, caps, &mut Vec::new(), &mut out);
    }
    out
}

fn oracle_caps(avail: &[f64]) -> Vec<i64> {
    avail.iter().map(|&a| (a + 1e-9).floor().max(0.0) as i64).collect()
}

struct Assembled {
    table: ContingencyTable,
    degenerate: bool,
}

/// Largest-remainder rounding of the 2x2 racial counterfactual, preserving
/// the availability marginals; remainder ties go to the same-race diagonal.
fn oracle_round(racial: &[f64], grand: i64) -> Option<[i64; 4]> {
    let floors: Vec<f64> = racial
        .iter()
        .map(|&v| {
            if (v - v.round()).abs() <= 1e-9 {
                v.round()
            } else {
                v.floor()
            }
        })
        .collect();
    let leftover = grand - floors.iter().sum::<f64>() as i64;
    if !(0..=4).contains(&leftover) {
        return None;
    }
    let fracs: Vec<f64> = racial.iter().zip(&floors).map(|(&v, &f)| (v - f).max(0.0)).collect();
    let tie_rank = [0usize, 2, 3, 1];
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        if (fracs[a] - fracs[b]).abs() <= 1e-9 {
            tie_rank[a].cmp(&tie_rank[b])
        } else {
            fracs[b].partial_cmp(&fracs[a]).unwrap()
        }
    });
    let mut rounded = [floors[0] as i64, floors[1] as i64, floors[2] as i64, floors[3] as i64];
    for &i in order.iter().take(leftover as usize) {
        rounded[i] += 1;
    }
    if rounded.iter().any(|&v| v < 0) {
        return None;
    }
    Some(rounded)
}

struct RaceLattice {
    groups: [Vec<Vec<i64>>; 4],
    blocks: [OracleBlock; 4],
    male: [Vec<f64>; 2],
    female: [Vec<f64>; 2],
}

fn race_lattice(p: &GnmProblem) -> Result<RaceLattice, OracleError> {
    let lay = &p.layout;
    let n = lay.n_edu();
    let zr = race_aggregate(&p.race_prefs, lay).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let za = race_aggregate(&p.availability, lay).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let racial_block = oracle_block_measure(&zr);
    let (za_rows, za_cols) = za.marginals();
    let racial = oracle_nm(&racial_block, &za_rows, &za_cols)
        .ok_or_else(|| OracleError::Unsupported("racial step degenerates".into()))?;
    let grand = whole(za_rows[0], "availability total")? + whole(za_rows[1], "availability total")?;
    let rounded = oracle_round(&racial, grand).ok_or_else(|| OracleError::Infeasible {
        detail: "racial counterfactual cannot be rounded onto the availability marginals".into(),
    })?;
    // consistency with the availability marginals
    for i in 0..2 {
        if rounded[2 * i] + rounded[2 * i + 1] != whole(za_rows[i], "row total")? {
            return Err(OracleError::Infeasible { detail: "rounding broke a row total".into() });
        }
        if rounded[i] + rounded[2 + i] != whole(za_cols[i], "column total")? {
            return Err(OracleError::Infeasible { detail: "rounding broke a column total".into() });
        }
    }
    let (av_rows, av_cols) = p.availability.marginals();
    let male = [av_rows[..n].to_vec(), av_rows[n..].to_vec()];
    let female = [av_cols[..n].to_vec(), av_cols[n..].to_vec()];
    let mixed_h = [rounded[1], rounded[2]];
    let mixed_w = [rounded[2], rounded[1]];
    let mut groups: [Vec<Vec<i64>>; 4] = [vec![], vec![], vec![], vec![]];
    for race in 0..2 {
        groups[race] = oracle_compositions(mixed_h[race], &oracle_caps(&male[race]));
        groups[2 + race] = oracle_compositions(mixed_w[race], &oracle_caps(&female[race]));
        if groups[race].is_empty() || groups[2 + race].is_empty() {
            return Err(OracleError::Infeasible {
                detail: format!("race {race} cannot supply its inter-racial block"),
            });
        }
    }
    let step2 = match p.step2_source {
        Step2Source::DeclaredRoles => &p.edu_prefs,
        Step2Source::StepOneTable => &p.race_prefs,
    };
    let block_source = |hr: usize, wr: usize| -> ContingencyTable {
        let mut cells = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                cells.push(step2.get(lay.index(hr, k), lay.index(wr, l)));
            }
        }
        ContingencyTable::from_rows(
            cells.chunks(n).map(<[f64]>::to_vec).collect(),
        )
        .expect("block")
    };
    let totals = [rounded[0], rounded[1], rounded[2], rounded[3]];
    let mut blocks = Vec::with_capacity(4);
    for b in 0..4 {
        blocks.push(if totals[b] == 0 {
            OracleBlock::Zero
        } else {
            oracle_block_measure(&block_source(b / 2, b % 2))
        });
    }
    let blocks: [OracleBlock; 4] = match blocks.try_into() {
        Ok(b) => b,
        Err(_) => unreachable!(),
    };
    Ok(RaceLattice { groups, blocks, male, female })
}

fn assemble_race(
    lat: &RaceLattice,
    lay: &RaceEduLayout,
    u0: &[i64],
    u1: &[i64],
    w0: &[i64],
    w1: &[i64],
) -> Assembled {
    let n = lay.n_edu();
    let d = lay.table_dim();
    let mut counts = vec![0.0; d * d];
    let mut degenerate = false;
    for hr in 0..2 {
        for wr in 0..2 {
            let (husband, wife): (Vec<f64>, Vec<f64>) = if hr == wr {
                let u = if hr == 0 { u0 } else { u1 };
                let w = if wr == 0 { w0 } else { w1 };
                (
                    lat.male[hr].iter().zip(u).map(|(&a, &x)| (a - x as f64).max(0.0)).collect(),
                    lat.female[wr].iter().zip(w).map(|(&a, &x)| (a - x as f64).max(0.0)).collect(),
                )
            } else {
                let u = if hr == 0 { u0 } else { u1 };
                let w = if wr == 0 { w0 } else { w1 };
                (
                    u.iter().map(|&x| x as f64).collect(),
                    w.iter().map(|&x| x as f64).collect(),
                )
            };
            let husband_total: f64 = husband.iter().sum();
            if husband_total == 0.0 {
                continue;
            }
            match oracle_nm(&lat.blocks[hr * 2 + wr], &husband, &wife) {
                Some(cells) => {
                    for k in 0..n {
                        for l in 0..n {
                            counts[lay.index(hr, k) * d + lay.index(wr, l)] = cells[k * n + l];
                        }
                    }
                }
                None => {
                    degenerate = true;
                }
            }
        }
    }
    let table =
        ContingencyTable::new(counts, lay.axis_labels(), lay.axis_labels()).expect("assembled");
    Assembled { table, degenerate }
}

struct Tracker {
    epsilon: f64,
    n_feasible: u64,
    n_neg: u64,
    n_deg: u64,
    best_max: Option<(f64, AllocationPoint)>,
    best_min: Option<(f64, AllocationPoint)>,
}

impl Tracker {
    fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            n_feasible: 0,
            n_neg: 0,
            n_deg: 0,
            best_max: None,
            best_min: None,
        }
    }

    fn offer(
        &mut self,
        assembled: &Assembled,
        value: impl FnOnce(&ContingencyTable) -> f64,
        point: impl FnOnce() -> AllocationPoint,
    ) {
        if assembled.degenerate {
            self.n_deg += 1;
            return;
        }
        let min_cell = assembled.table.counts().iter().copied().fold(f64::INFINITY, f64::min);
        if min_cell < -self.epsilon {
            self.n_neg += 1;
            return;
        }
        let v = value(&assembled.table);
        self.n_feasible += 1;
        let p = point();
        if self.best_max.as_ref().is_none_or(|(bv, _)| v > *bv) {
            self.best_max = Some((v, p.clone()));
        }
        if self.best_min.as_ref().is_none_or(|(bv, _)| v < *bv) {
            self.best_min = Some((v, p));
        }
    }

    fn into_interval(self) -> Result<MomentInterval, OracleError> {
        let Some((max_v, argmax)) = self.best_max else {
            return Err(OracleError::NoFeasiblePoint);
        };
        let (min_v, argmin) = self.best_min.expect("min tracks max");
        Ok(MomentInterval {
            min_value: min_v,
            max_value: max_v,
            argmin,
            argmax,
            n_feasible: self.n_feasible,
            n_excluded_negative: self.n_neg,
            n_excluded_degenerate: self.n_deg,
        })
    }
}

fn moment_fn(p: &GnmProblem) -> impl Fn(&ContingencyTable) -> f64 + '_ {
    move |t: &ContingencyTable| match p.objective {
        Objective::Sehc => sehc(t, &p.layout).expect("moment"),
        Objective::Sirm => sirm(t, &p.layout).expect("moment"),
    }
}

fn enumerate_race_first(p: &GnmProblem) -> Result<MomentInterval, OracleError> {
    let lat = race_lattice(p)?;
    let size: u128 = lat.groups.iter().map(|g| g.len() as u128).product();
    if size > LATTICE_GUARD {
        return Err(OracleError::LatticeTooLarge { size });
    }
    let value = moment_fn(p);
    let mut tracker = Tracker::new(p.epsilon);
    for u0 in &lat.groups[0] {
        for u1 in &lat.groups[1] {
            for w0 in &lat.groups[2] {
                for w1 in &lat.groups[3] {
                    let assembled = assemble_race(&lat, &p.layout, u0, u1, w0, w1);
                    tracker.offer(&assembled, &value, || AllocationPoint::RaceFirst {
                        husband_to_mixed: [u0.clone(), u1.clone()],
                        wife_to_mixed: [w0.clone(), w1.clone()],
                    });
                }
            }
        }
    }
    tracker.into_interval()
}

struct EduLattice {
    row_groups: Vec<Vec<Vec<i64>>>,
    col_groups: Vec<Vec<Vec<i64>>>,
    blocks: Vec<OracleBlock>,
    totals: Vec<f64>,
}

fn edu_lattice(p: &GnmProblem) -> Result<EduLattice, OracleError> {
    let lay = &p.layout;
    let n = lay.n_edu();
    let zp = edu_aggregate(&p.edu_prefs, lay).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let za = edu_aggregate(&p.availability, lay).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let block = oracle_block_measure(&zp);
    let (za_rows, za_cols) = za.marginals();
    let totals = oracle_nm(&block, &za_rows, &za_cols)
        .ok_or_else(|| OracleError::Unsupported("education step degenerates".into()))?;
    if totals.iter().any(|&e| e < -p.epsilon) {
        return Err(OracleError::Infeasible {
            detail: "education step assigns negative mass to a block".into(),
        });
    }
    let caps: Vec<i64> = totals.iter().map(|&e| (e + 1e-9).floor().max(0.0) as i64).collect();
    let (av_rows, av_cols) = p.availability.marginals();
    let mut row_groups = Vec::with_capacity(n);
    for k in 0..n {
        let t = whole(av_rows[k], "race-0 male availability")?;
        let row_caps: Vec<i64> = (0..n).map(|l| caps[k * n + l]).collect();
        let g = oracle_compositions(t, &row_caps);
        if g.is_empty() {
            return Err(OracleError::Infeasible {
                detail: format!("race-0 husbands of education {k} cannot be placed"),
            });
        }
        row_groups.push(g);
    }
    let mut col_groups = Vec::with_capacity(n);
    for l in 0..n {
        let t = whole(av_cols[l], "race-0 female availability")?;
        let col_caps: Vec<i64> = (0..n).map(|k| caps[k * n + l]).collect();
        let g = oracle_compositions(t, &col_caps);
        if g.is_empty() {
            return Err(OracleError::Infeasible {
                detail: format!("race-0 wives of education {l} cannot be placed"),
            });
        }
        col_groups.push(g);
    }
    let step2 = match p.step2_source {
        Step2Source::DeclaredRoles => &p.race_prefs,
        Step2Source::StepOneTable => &p.edu_prefs,
    };
    let mut blocks = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let e = totals[k * n + l];
            blocks.push(if e.abs() <= p.epsilon {
                OracleBlock::Zero
            } else {
                let slice = ContingencyTable::from_rows(vec![
                    vec![
                        step2.get(lay.index(0, k), lay.index(0, l)),
                        step2.get(lay.index(0, k), lay.index(1, l)),
                    ],
                    vec![
                        step2.get(lay.index(1, k), lay.index(0, l)),
                        step2.get(lay.index(1, k), lay.index(1, l)),
                    ],
                ])
                .expect("slice");
                oracle_block_measure(&slice)
            });
        }
    }
    Ok(EduLattice { row_groups, col_groups, blocks, totals })
}

fn assemble_edu(
    lat: &EduLattice,
    lay: &RaceEduLayout,
    epsilon: f64,
    husband: &[i64],
    wife: &[i64],
) -> Assembled {
    let n = lay.n_edu();
    let d = lay.table_dim();
    let mut counts = vec![0.0; d * d];
    let mut degenerate = false;
    for k in 0..n {
        for l in 0..n {
            let e = lat.totals[k * n + l];
            if e.abs() <= epsilon {
                continue;
            }
            let x = husband[k * n + l] as f64;
            let y = wife[k * n + l] as f64;
            let rows = vec![x, (e - x).max(0.0)];
            let cols = vec![y, (e - y).max(0.0)];
            match oracle_nm(&lat.blocks[k * n + l], &rows, &cols) {
                Some(cells) => {
                    for hr in 0..2 {
                        for wr in 0..2 {
                            counts[lay.index(hr, k) * d + lay.index(wr, l)] = cells[hr * 2 + wr];
                        }
                    }
                }
                None => degenerate = true,
            }
        }
    }
    let table =
        ContingencyTable::new(counts, lay.axis_labels(), lay.axis_labels()).expect("assembled");
    Assembled { table, degenerate }
}

fn enumerate_edu_first(p: &GnmProblem) -> Result<MomentInterval, OracleError> {
    let lat = edu_lattice(p)?;
    let n = p.layout.n_edu();
    let size: u128 = lat
        .row_groups
        .iter()
        .chain(&lat.col_groups)
        .map(|g| g.len() as u128)
        .product();
    if size > LATTICE_GUARD {
        return Err(OracleError::LatticeTooLarge { size });
    }
    let value = moment_fn(p);
    let mut tracker = Tracker::new(p.epsilon);
    let sizes: Vec<usize> = lat
        .row_groups
        .iter()
        .chain(&lat.col_groups)
        .map(Vec::len)
        .collect();
    let mut idx = vec![0usize; 2 * n];
    loop {
        let mut husband = vec![0i64; n * n];
        for k in 0..n {
            husband[k * n..(k + 1) * n].copy_from_slice(&lat.row_groups[k][idx[k]]);
        }
        let mut wife = vec![0i64; n * n];
        for l in 0..n {
            let col = &lat.col_groups[l][idx[n + l]];
            for k in 0..n {
                wife[k * n + l] = col[k];
            }
        }
        let assembled = assemble_edu(&lat, &p.layout, p.epsilon, &husband, &wife);
        tracker.offer(&assembled, &value, || AllocationPoint::EducationFirst {
            husband_race0: husband.clone(),
            wife_race0: wife.clone(),
            n_edu: n,
        });
        let mut pos = 2 * n;
        loop {
            if pos == 0 {
                return tracker.into_interval();
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn observed_point(p: &GnmProblem, order: SortOrder) -> Result<MomentInterval, OracleError> {
    let lay = &p.layout;
    let n = lay.n_edu();
    let t = &p.availability;
    let value = moment_fn(p);
    let mut tracker = Tracker::new(p.epsilon);
    match order {
        SortOrder::RaceFirst => {
            let lat = race_lattice(p)?;
            let mut u = [vec![0i64; n], vec![0i64; n]];
            let mut w = [vec![0i64; n], vec![0i64; n]];
            for race in 0..2 {
                let other = 1 - race;
                for k in 0..n {
                    let mh: f64 = (0..n).map(|l| t.get(lay.index(race, k), lay.index(other, l))).sum();
                    u[race][k] = whole(mh, "observed mixed husbands")?;
                    let mw: f64 = (0..n).map(|l| t.get(lay.index(other, l), lay.index(race, k))).sum();
                    w[race][k] = whole(mw, "observed mixed wives")?;
                }
            }
            for race in 0..2 {
                if !lat.groups[race].contains(&u[race]) || !lat.groups[2 + race].contains(&w[race]) {
                    return Err(OracleError::NoFeasiblePoint);
                }
            }
            let assembled = assemble_race(&lat, lay, &u[0], &u[1], &w[0], &w[1]);
            tracker.offer(&assembled, &value, || AllocationPoint::RaceFirst {
                husband_to_mixed: u.clone(),
                wife_to_mixed: w.clone(),
            });
        }
        SortOrder::EducationFirst => {
            let lat = edu_lattice(p)?;
            let mut husband = vec![0i64; n * n];
            let mut wife = vec![0i64; n * n];
            for k in 0..n {
                for l in 0..n {
                    let h: f64 = (0..2).map(|wr| t.get(lay.index(0, k), lay.index(wr, l))).sum();
                    husband[k * n + l] = whole(h, "observed pairing")?;
                    let wv: f64 = (0..2).map(|hr| t.get(lay.index(hr, k), lay.index(0, l))).sum();
                    wife[k * n + l] = whole(wv, "observed pairing")?;
                }
            }
            let mut ok = true;
            for k in 0..n {
                let row: Vec<i64> = husband[k * n..(k + 1) * n].to_vec();
                ok &= lat.row_groups[k].contains(&row);
            }
            for l in 0..n {
                let col: Vec<i64> = (0..n).map(|k| wife[k * n + l]).collect();
                ok &= lat.col_groups[l].contains(&col);
            }
            if !ok {
                return Err(OracleError::NoFeasiblePoint);
            }
            let assembled = assemble_edu(&lat, lay, p.epsilon, &husband, &wife);
            tracker.offer(&assembled, &value, || AllocationPoint::EducationFirst {
                husband_race0: husband.clone(),
                wife_race0: wife.clone(),
                n_edu: n,
            });
        }
        SortOrder::BothOrders => {
            return Err(OracleError::Unsupported("pick one order for the observed point".into()))
        }
    }
    tracker.into_interval()
}

/// Ground-truth interval by plain nested-loop enumeration of every
/// allocation, with all constraints re-derived from scratch.
pub fn enumerate_gnm(p: &GnmProblem) -> Result<MomentInterval, OracleError> {
    if p.allocation_space == AllocationSpace::ObservedOnly {
        return match p.order {
            SortOrder::BothOrders => {
                Err(OracleError::Unsupported("pick one order for the observed point".into()))
            }
            order => observed_point(p, order),
        };
    }
    match p.order {
        SortOrder::RaceFirst => enumerate_race_first(p),
        SortOrder::EducationFirst => enumerate_edu_first(p),
        SortOrder::BothOrders => {
            let a = enumerate_race_first(p);
            let b = enumerate_edu_first(p);
            match (a, b) {
                (Ok(mut a), Ok(b)) => {
                    if b.min_value < a.min_value {
                        a.min_value = b.min_value;
                        a.argmin = b.argmin;
                    }
                    if b.max_value > a.max_value {
                        a.max_value = b.max_value;
                        a.argmax = b.argmax;
                    }
                    a.n_feasible += b.n_feasible;
                    a.n_excluded_negative += b.n_excluded_negative;
                    a.n_excluded_degenerate += b.n_excluded_degenerate;
                    Ok(a)
                }
                (Ok(a), Err(OracleError::Infeasible { .. } | OracleError::NoFeasiblePoint)) => Ok(a),
                (Err(OracleError::Infeasible { .. } | OracleError::NoFeasiblePoint), Ok(b)) => Ok(b),
                (Err(e), _) => Err(e),
                (_, Err(e)) => Err(e),
            }
        }
    }
}
