//! Interval search over the education-first allocation lattice.
//!
//! Step 1 fixes every education-pair block total, so the objective and
//! feasibility decompose per block into functions of the two integers
//! (first-race husbands, first-race wives) allocated to that block. The
//! search memoizes those per-block evaluations and scans the lattice of
//! row-constrained husband matrices and column-constrained wife matrices in
//! lexicographic order. The per-point moment is accumulated in the same
//! canonical order as the moment functions on an assembled table, so values
//! are bit-identical to assembling each point.
//!
//! This order's lattice grows much faster than the race-first one (one
//! composition family per education level and sex); it is intended for the
//! small instances where the hull of both orders is of interest.

use super::eval::{eval_block_2x2, BlockPre, ST_DEG};
use super::race_first::{better_max, better_min, finalize, Cand, SearchAcc};
use super::{
    availability_vectors, edu_first_groups, education_step, race_slice, AllocationPoint,
    AllocationSpace, GnmError, GnmProblem, MomentInterval, Objective, SortOrder,
};

/// Memoized evaluation of one education-pair block at one (x, y) choice:
/// the four race cells and the exclusion status.
struct CellMemo {
    x_cap: usize,
    cells: Vec<([f64; 4], u8)>,
}

impl CellMemo {
    fn build(pre: &BlockPre, e: f64, x_cap: i64, y_cap: i64, epsilon: f64) -> CellMemo {
        let (xc, yc) = (x_cap.max(0) as usize, y_cap.max(0) as usize);
        let mut cells = Vec::with_capacity((xc + 1) * (yc + 1));
        for x in 0..=xc {
            for y in 0..=yc {
                cells.push(eval_block_2x2(pre, e, x as f64, y as f64, epsilon));
            }
        }
        CellMemo { x_cap: xc, cells }
    }

    #[inline]
    fn at(&self, x: i64, y: i64) -> &([f64; 4], u8) {
        let y_len = self.cells.len() / (self.x_cap + 1);
        &self.cells[x as usize * y_len + y as usize]
    }
}

pub(crate) fn search(p: &GnmProblem) -> Result<MomentInterval, GnmError> {
    if p.allocation_space == AllocationSpace::ObservedOnly {
        return super::observed_point_interval(p, SortOrder::EducationFirst);
    }
    let edu_table = education_step(p)?;
    let groups = edu_first_groups(p, &edu_table)?;
    let n = p.layout.n_edu();
    let step2 = p.edu_first_step2_table();
    let av = availability_vectors(p);

    let lattice: u128 = groups.groups.iter().map(|g| g.len() as u128).product();
    log::debug!("education-first lattice: {lattice} points");
    if lattice > 200_000_000 {
        log::warn!(
            "education-first lattice has {lattice} points; this scan is exhaustive and will be slow"
        );
    }

    // Per-block measure sources and memo tables.
    let mut memos = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let e = groups.block_totals[k * n + l];
            let zero = e.abs() <= p.epsilon;
            let pre = BlockPre::from_source(&race_slice(step2, &p.layout, k, l), zero);
            let cap = super::floor_snapped(e + 1e-9).max(0.0) as i64;
            let x_cap = cap.min(as_cap(av.male[0][k]));
            let y_cap = cap.min(as_cap(av.female[0][l]));
            memos.push(CellMemo::build(&pre, if zero { 0.0 } else { e }, x_cap, y_cap, p.epsilon));
        }
    }

    // Odometer over the 2n composition groups: husband rows then wife
    // columns, matching the allocation stream's lexicographic order.
    let sizes: Vec<usize> = groups.groups.iter().map(Vec::len).collect();
    let mut idx = vec![0usize; 2 * n];
    let mut acc = SearchAcc::default();
    let objective = p.objective;
    loop {
        // gather the point's per-cell (x, y) and evaluate
        let mut status = 0u8;
        let mut num_parts = [0.0f64; 4]; // racial blocks BB, BW, WB, WW
        let mut den_parts = [0.0f64; 4];
        'cells: for k in 0..n {
            let x_row = &groups.groups[k][idx[k]];
            for l in 0..n {
                let y_col = &groups.groups[n + l][idx[n + l]];
                let (cells, st) = memos[k * n + l].at(x_row[l], y_col[k]);
                status |= st;
                if status & ST_DEG != 0 {
                    break 'cells;
                }
                den_parts[0] += cells[0];
                den_parts[1] += cells[1];
                den_parts[2] += cells[2];
                den_parts[3] += cells[3];
                if k == l {
                    num_parts[0] += cells[0];
                    num_parts[1] += cells[1];
                    num_parts[2] += cells[2];
                    num_parts[3] += cells[3];
                }
            }
        }
        if status & ST_DEG != 0 {
            acc.n_deg += 1;
        } else if status != 0 {
            acc.n_neg += 1;
        } else {
            acc.n_feas += 1;
            // canonical block order BB, WB, BW, WW
            let den = ((den_parts[0] + den_parts[2]) + den_parts[1]) + den_parts[3];
            let num = match objective {
                Objective::Sehc => ((num_parts[0] + num_parts[2]) + num_parts[1]) + num_parts[3],
                Objective::Sirm => den_parts[0] + den_parts[3],
            };
            let value = finalize(objective, num, den);
            let key: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
            if better_max(&acc.best_max, value, &key) {
                acc.best_max = Some(Cand { value, idx: key.clone() });
            }
            if better_min(&acc.best_min, value, &key) {
                acc.best_min = Some(Cand { value, idx: key });
            }
        }
        // odometer increment, last group fastest
        let mut pos = 2 * n;
        loop {
            if pos == 0 {
                let Some(max_c) = acc.best_max.clone() else {
                    return Err(GnmError::NoFeasiblePoint);
                };
                let min_c = acc.best_min.clone().expect("min tracks max");
                return Ok(MomentInterval {
                    min_value: min_c.value,
                    max_value: max_c.value,
                    argmin: point_from_idx(&groups.groups, n, &min_c.idx),
                    argmax: point_from_idx(&groups.groups, n, &max_c.idx),
                    n_feasible: acc.n_feas,
                    n_excluded_negative: acc.n_neg,
                    n_excluded_degenerate: acc.n_deg,
                });
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

fn as_cap(v: f64) -> i64 {
    super::floor_snapped(v + 1e-9).max(0.0) as i64
}

fn point_from_idx(groups: &[Vec<Vec<i64>>], n: usize, idx: &[u32]) -> AllocationPoint {
    let mut husband = vec![0i64; n * n];
    for k in 0..n {
        husband[k * n..(k + 1) * n].copy_from_slice(&groups[k][idx[k] as usize]);
    }
    let mut wife = vec![0i64; n * n];
    for l in 0..n {
        let col = &groups[n + l][idx[n + l] as usize];
        for k in 0..n {
            wife[k * n + l] = col[k];
        }
    }
    AllocationPoint::EducationFirst { husband_race0: husband, wife_race0: wife, n_edu: n }
}
