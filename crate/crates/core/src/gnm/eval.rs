//! Allocation-free block evaluation for the lattice searches.
//!
//! Reproduces, arithmetic operation for operation, what assembling a block
//! through the transform and scanning its cells would compute, without
//! building tables. Every search value therefore matches the value of the
//! corresponding assembled table bit for bit.

use crate::liulu::{self, CutFlag};
use crate::nm;
use crate::tables::ContingencyTable;

pub(crate) const ST_NEG: u8 = 1;
pub(crate) const ST_DEG: u8 = 2;

/// What the objective takes from a block's cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NumMode {
    /// Education-diagonal mass (homogamy numerator).
    Diagonal,
    /// The whole block mass (same-race numerator).
    Everything,
    /// Nothing (the block does not enter the numerator).
    None,
}

/// Precomputed per-block measure state.
#[derive(Clone, Debug)]
pub(crate) enum BlockPre {
    /// The block carries no mass under any allocation.
    Zero,
    /// The preference source cannot be measured (zero total or a degenerate
    /// cut): every allocation touching this block is excluded.
    Degenerate,
    /// Cut values of the source, row-major (n-1) x (m-1).
    Active { theta: Vec<f64> },
}

impl BlockPre {
    /// Measures a step-2 preference source, for a block whose totals are
    /// fixed by the sum constraints.
    pub(crate) fn from_source(source: &ContingencyTable, block_total_is_zero: bool) -> Self {
        if block_total_is_zero {
            return BlockPre::Zero;
        }
        match liulu::ll_generalized(source) {
            Ok(m) => {
                if m.flags().contains(&CutFlag::DegenerateDenominator) {
                    BlockPre::Degenerate
                } else {
                    BlockPre::Active { theta: m.values().to_vec() }
                }
            }
            Err(_) => BlockPre::Degenerate,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct BlockEval {
    pub num: f64,
    pub den: f64,
    pub status: u8,
}

pub(crate) struct EvalScratch {
    corner: Vec<f64>,
    h_tails: Vec<f64>,
    w_tails: Vec<f64>,
}

impl EvalScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            corner: vec![0.0; (n + 1) * (n + 1)],
            h_tails: vec![0.0; n + 1],
            w_tails: vec![0.0; n + 1],
        }
    }
}

/// Evaluates one n x n block for the given husband/wife target vectors.
/// Mirrors `nm_corner_sums` + double differencing + the canonical cell
/// scans of the moment functions.
pub(crate) fn eval_block(
    pre: &BlockPre,
    n: usize,
    h_vec: &[f64],
    w_vec: &[f64],
    num_mode: NumMode,
    epsilon: f64,
    scratch: &mut EvalScratch,
) -> BlockEval {
    let theta = match pre {
        BlockPre::Zero => return BlockEval { num: 0.0, den: 0.0, status: 0 },
        BlockPre::Degenerate => return BlockEval { num: f64::NAN, den: f64::NAN, status: ST_DEG },
        BlockPre::Active { theta } => theta,
    };
    // identical suffix accumulation to nm::suffix_sums
    scratch.h_tails[n] = 0.0;
    for i in (0..n).rev() {
        scratch.h_tails[i] = scratch.h_tails[i + 1] + h_vec[i];
    }
    scratch.w_tails[n] = 0.0;
    for j in (0..n).rev() {
        scratch.w_tails[j] = scratch.w_tails[j + 1] + w_vec[j];
    }
    let total = scratch.h_tails[0];
    if total <= 0.0 {
        // all-zero marginals with a positive-rated block cannot happen for
        // consistent constraints; treat as excluded
        return BlockEval { num: f64::NAN, den: f64::NAN, status: ST_DEG };
    }
    let stride = n + 1;
    scratch.corner[0] = total;
    for r in 1..n {
        scratch.corner[r * stride] = scratch.h_tails[r];
    }
    for c in 1..n {
        scratch.corner[c] = scratch.w_tails[c];
    }
    for r in 0..=n {
        scratch.corner[r * stride + n] = 0.0;
    }
    for c in 0..=n {
        scratch.corner[n * stride + c] = 0.0;
    }
    for i in 1..n {
        for j in 1..n {
            let (rt, ct) = (scratch.h_tails[i], scratch.w_tails[j]);
            if nm::target_cut_parts(rt, ct, total).is_none() {
                return BlockEval { num: f64::NAN, den: f64::NAN, status: ST_DEG };
            }
            scratch.corner[i * stride + j] =
                nm::corner_value(theta[(i - 1) * (n - 1) + (j - 1)], rt, ct, total);
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut min_cell = f64::INFINITY;
    for r in 0..n {
        for c in 0..n {
            let cell = scratch.corner[r * stride + c] - scratch.corner[(r + 1) * stride + c]
                - scratch.corner[r * stride + c + 1]
                + scratch.corner[(r + 1) * stride + c + 1];
            den += cell;
            if num_mode == NumMode::Diagonal && r == c {
                num += cell;
            }
            if cell < min_cell {
                min_cell = cell;
            }
        }
    }
    if num_mode == NumMode::Everything {
        num = den;
    }
    let status = if min_cell < -epsilon { ST_NEG } else { 0 };
    BlockEval { num, den, status }
}

/// Evaluates one 2x2 race-composition block of the education-first order
/// and returns its four cells (row-major) with the status. `e` is the
/// block's step-1 total, `x`/`y` the first-race husband/wife counts.
pub(crate) fn eval_block_2x2(
    theta: &BlockPre,
    e: f64,
    x: f64,
    y: f64,
    epsilon: f64,
) -> ([f64; 4], u8) {
    let theta = match theta {
        BlockPre::Zero => return ([0.0; 4], 0),
        BlockPre::Degenerate => return ([f64::NAN; 4], ST_DEG),
        BlockPre::Active { theta } => theta[0],
    };
    // target vectors are [x, e - x] / [y, e - y]; replicate the suffix sums
    let hx = crate::gnm::sub_clamped(e, x);
    let wy = crate::gnm::sub_clamped(e, y);
    let total = hx + x;
    if total <= 0.0 {
        return ([f64::NAN; 4], ST_DEG);
    }
    if nm::target_cut_parts(hx, wy, total).is_none() {
        return ([f64::NAN; 4], ST_DEG);
    }
    let s11 = nm::corner_value(theta, hx, wy, total);
    let c00 = total - hx - wy + s11;
    let c01 = wy - s11;
    let c10 = hx - s11;
    let c11 = s11;
    let cells = [c00, c01, c10, c11];
    let status = if cells.iter().any(|&c| c < -epsilon) { ST_NEG } else { 0 };
    (cells, status)
}
