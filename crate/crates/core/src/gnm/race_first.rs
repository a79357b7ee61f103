//! Exact interval search over the race-first allocation lattice.
//!
//! The objective and the feasibility of a full allocation split along the
//! two wife-side groups once the husband-side pair is fixed: blocks (0,0)
//! and (1,0) depend only on the race-0 wife split, blocks (0,1) and (1,1)
//! only on the race-1 wife split. The search therefore enumerates
//! husband-side pairs and, per pair, sweeps the two wife sides
//! independently; feasibility counts come from per-row bitmasks, so counts
//! are exact even when value sweeps are skipped.
//!
//! Small lattices (every toy and test corpus) run through a direct scan in
//! strict lexicographic order whose per-point values are bit-identical to
//! assembling the table and applying the moment. Large lattices use the
//! tiled pair sweep with sound ratio bounds; bounds only ever skip pairs
//! that provably cannot improve the running optimum, so the optimum itself
//! is exact. For the share-of-inter-racial-marriages objective the value is
//! constant over the lattice up to float noise of the cell sums, and the
//! large-lattice path reports the value at the lexicographically first
//! feasible allocation as a point interval.
//!
//! Results, counts, and attaining points are independent of the worker
//! count.

use super::eval::{eval_block, BlockEval, BlockPre, EvalScratch, NumMode, ST_DEG};
use super::{
    availability_vectors, race_first_groups, racial_step, sub_clamped, AllocationPoint,
    AllocationSpace, GnmError, GnmProblem, MomentInterval, Objective, SortOrder,
};
use crate::tables::block_extract;
use rayon::prelude::*;

const DIRECT_LATTICE_LIMIT: u128 = 10_000_000;
const DIRECT_PAIR_ENTRY_LIMIT: usize = 8_000_000;
const TILE_BUDGET_ENTRIES: usize = 8_000_000;

pub(crate) fn finalize(objective: Objective, num: f64, den: f64) -> f64 {
    match objective {
        Objective::Sehc => num / den,
        Objective::Sirm => 1.0 - num / den,
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Cand {
    pub value: f64,
    pub idx: Vec<u32>,
}

pub(crate) fn better_max(cur: &Option<Cand>, value: f64, idx: &[u32]) -> bool {
    match cur {
        None => true,
        Some(c) => value > c.value || (value == c.value && idx < &c.idx[..]),
    }
}

pub(crate) fn better_min(cur: &Option<Cand>, value: f64, idx: &[u32]) -> bool {
    match cur {
        None => true,
        Some(c) => value < c.value || (value == c.value && idx < &c.idx[..]),
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct SearchAcc {
    pub n_feas: u64,
    pub n_neg: u64,
    pub n_deg: u64,
    pub best_max: Option<Cand>,
    pub best_min: Option<Cand>,
    pub first_feas: Option<Cand>,
}

impl SearchAcc {
    pub(crate) fn merge(mut self, other: SearchAcc) -> SearchAcc {
        self.n_feas += other.n_feas;
        self.n_neg += other.n_neg;
        self.n_deg += other.n_deg;
        if let Some(c) = other.best_max {
            if better_max(&self.best_max, c.value, &c.idx) {
                self.best_max = Some(c);
            }
        }
        if let Some(c) = other.best_min {
            if better_min(&self.best_min, c.value, &c.idx) {
                self.best_min = Some(c);
            }
        }
        if let Some(c) = other.first_feas {
            let take = match &self.first_feas {
                None => true,
                Some(cur) => c.idx < cur.idx,
            };
            if take {
                self.first_feas = Some(c);
            }
        }
        self
    }
}

/// Per-point target vectors of the four groups: the mixed-block side uses
/// the allocation itself, the same-race side its complement against
/// availability.
struct GroupData {
    coords: Vec<Vec<i64>>,
    direct: Vec<Vec<f64>>,
    complement: Vec<Vec<f64>>,
}

fn group_data(coords: Vec<Vec<i64>>, avail: &[f64]) -> GroupData {
    let direct: Vec<Vec<f64>> = coords
        .iter()
        .map(|v| v.iter().map(|&x| x as f64).collect())
        .collect();
    let complement: Vec<Vec<f64>> = coords
        .iter()
        .map(|v| {
            v.iter()
                .zip(avail)
                .map(|(&x, &a)| sub_clamped(a, x as f64))
                .collect()
        })
        .collect();
    GroupData { coords, direct, complement }
}

/// Block wiring: block index b = husband_race * 2 + wife_race. Row data
/// comes from the husband group, column data from the wife group.
struct Wiring;

impl Wiring {
    /// (husband group id, use complement?) per block
    const ROW: [(usize, bool); 4] = [(0, true), (0, false), (1, false), (1, true)];
    /// (wife group id, use complement?) per block
    const COL: [(usize, bool); 4] = [(2, true), (3, false), (2, false), (3, true)];
}

struct Ctx {
    n: usize,
    epsilon: f64,
    objective: Objective,
    groups: [GroupData; 4],
    pre: [BlockPre; 4],
    num_mode: [NumMode; 4],
}

impl Ctx {
    fn row_vec(&self, block: usize, idx: usize) -> &[f64] {
        let (g, comp) = Wiring::ROW[block];
        if comp {
            &self.groups[g].complement[idx]
        } else {
            &self.groups[g].direct[idx]
        }
    }

    fn col_vec(&self, block: usize, idx: usize) -> &[f64] {
        let (g, comp) = Wiring::COL[block];
        if comp {
            &self.groups[g].complement[idx]
        } else {
            &self.groups[g].direct[idx]
        }
    }

    fn eval(&self, block: usize, row_idx: usize, col_idx: usize, scratch: &mut EvalScratch) -> BlockEval {
        eval_block(
            &self.pre[block],
            self.n,
            self.row_vec(block, row_idx),
            self.col_vec(block, col_idx),
            self.num_mode[block],
            self.epsilon,
            scratch,
        )
    }

    fn point(&self, idx: &[u32]) -> AllocationPoint {
        AllocationPoint::RaceFirst {
            husband_to_mixed: [
                self.groups[0].coords[idx[0] as usize].clone(),
                self.groups[1].coords[idx[1] as usize].clone(),
            ],
            wife_to_mixed: [
                self.groups[2].coords[idx[2] as usize].clone(),
                self.groups[3].coords[idx[3] as usize].clone(),
            ],
        }
    }
}

fn build_ctx(p: &GnmProblem) -> Result<(Ctx, [[i64; 2]; 2]), GnmError> {
    let racial = racial_step(p)?;
    let g = race_first_groups(p, &racial)?;
    let av = availability_vectors(p);
    let [g0, g1, g2, g3] = g.groups;
    let groups = [
        group_data(g0, &av.male[0]),
        group_data(g1, &av.male[1]),
        group_data(g2, &av.female[0]),
        group_data(g3, &av.female[1]),
    ];
    let step2 = p.race_first_step2_table();
    let block_totals = [
        g.rounded[0][0],
        g.rounded[0][1],
        g.rounded[1][0],
        g.rounded[1][1],
    ];
    let mut pre = Vec::with_capacity(4);
    for (b, &total) in block_totals.iter().enumerate() {
        let source = block_extract(step2, &p.layout, b / 2, b % 2)?;
        pre.push(BlockPre::from_source(&source, total == 0));
    }
    let pre: [BlockPre; 4] = pre.try_into().expect("four blocks");
    let num_mode = match p.objective {
        Objective::Sehc => [NumMode::Diagonal; 4],
        Objective::Sirm => [
            NumMode::Everything,
            NumMode::None,
            NumMode::None,
            NumMode::Everything,
        ],
    };
    Ok((
        Ctx {
            n: p.layout.n_edu(),
            epsilon: p.epsilon,
            objective: p.objective,
            groups,
            pre,
            num_mode,
        },
        g.rounded,
    ))
}

pub(crate) fn search(p: &GnmProblem) -> Result<MomentInterval, GnmError> {
    if p.allocation_space == AllocationSpace::ObservedOnly {
        return super::observed_point_interval(p, SortOrder::RaceFirst);
    }
    let (ctx, _rounded) = build_ctx(p)?;
    let sizes = [
        ctx.groups[0].coords.len(),
        ctx.groups[1].coords.len(),
        ctx.groups[2].coords.len(),
        ctx.groups[3].coords.len(),
    ];
    let lattice: u128 = sizes.iter().map(|&s| s as u128).product();
    let pair_entries = (sizes[0] + sizes[1]) * (sizes[2] + sizes[3]);
    log::debug!(
        "race-first lattice: {} x {} x {} x {} = {} points",
        sizes[0],
        sizes[1],
        sizes[2],
        sizes[3],
        lattice
    );
    let acc = if lattice <= DIRECT_LATTICE_LIMIT && pair_entries <= DIRECT_PAIR_ENTRY_LIMIT {
        direct_scan(&ctx, sizes)
    } else {
        tiled_scan(p, &ctx, sizes)
    };
    let Some(max_c) = acc.best_max.clone() else {
        return Err(GnmError::NoFeasiblePoint);
    };
    let min_c = acc.best_min.clone().expect("min tracks max");
    Ok(MomentInterval {
        min_value: min_c.value,
        max_value: max_c.value,
        argmin: ctx.point(&min_c.idx),
        argmax: ctx.point(&max_c.idx),
        n_feasible: acc.n_feas,
        n_excluded_negative: acc.n_neg,
        n_excluded_degenerate: acc.n_deg,
    })
}

/// Dense per-block value matrices for the direct scan.
struct Dense {
    n_cols: usize,
    num: Vec<f64>,
    den: Vec<f64>,
    status: Vec<u8>,
}

impl Dense {
    fn build(ctx: &Ctx, block: usize, n_rows: usize, n_cols: usize) -> Dense {
        let mut num = vec![0.0; n_rows * n_cols];
        let mut den = vec![0.0; n_rows * n_cols];
        let mut status = vec![0u8; n_rows * n_cols];
        let mut scratch = EvalScratch::new(ctx.n);
        for r in 0..n_rows {
            for c in 0..n_cols {
                let e = ctx.eval(block, r, c, &mut scratch);
                num[r * n_cols + c] = e.num;
                den[r * n_cols + c] = e.den;
                status[r * n_cols + c] = e.status;
            }
        }
        Dense { n_cols, num, den, status }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> (f64, f64, u8) {
        let i = r * self.n_cols + c;
        (self.num[i], self.den[i], self.status[i])
    }
}

/// Full scan in lexicographic point order; values are bit-identical to
/// assembling each point and applying the canonical moment.
fn direct_scan(ctx: &Ctx, sizes: [usize; 4]) -> SearchAcc {
    let b00 = Dense::build(ctx, 0, sizes[0], sizes[2]);
    let b01 = Dense::build(ctx, 1, sizes[0], sizes[3]);
    let b10 = Dense::build(ctx, 2, sizes[1], sizes[2]);
    let b11 = Dense::build(ctx, 3, sizes[1], sizes[3]);
    let mut acc = SearchAcc::default();
    let mut side_b: Vec<(f64, f64, u8)> = vec![(0.0, 0.0, 0); sizes[2]];
    for i0 in 0..sizes[0] {
        for i1 in 0..sizes[1] {
            for (i2, slot) in side_b.iter_mut().enumerate() {
                let (n0, d0, s0) = b00.at(i0, i2);
                let (n1, d1, s1) = b10.at(i1, i2);
                *slot = (n0 + n1, d0 + d1, s0 | s1);
            }
            for (i2, &(sbn, sbd, sbs)) in side_b.iter().enumerate() {
                for i3 in 0..sizes[3] {
                    let (bwn, bwd, bws) = b01.at(i0, i3);
                    let (wwn, wwd, wws) = b11.at(i1, i3);
                    let st = sbs | bws | wws;
                    if st == 0 {
                        acc.n_feas += 1;
                        let num = (sbn + bwn) + wwn;
                        let den = (sbd + bwd) + wwd;
                        let value = finalize(ctx.objective, num, den);
                        let idx = [i0 as u32, i1 as u32, i2 as u32, i3 as u32];
                        if better_max(&acc.best_max, value, &idx) {
                            acc.best_max = Some(Cand { value, idx: idx.to_vec() });
                        }
                        if better_min(&acc.best_min, value, &idx) {
                            acc.best_min = Some(Cand { value, idx: idx.to_vec() });
                        }
                    } else if st & ST_DEG != 0 {
                        acc.n_deg += 1;
                    } else {
                        acc.n_neg += 1;
                    }
                }
            }
        }
    }
    acc
}

/// One tile of rows of a block, with per-row feasibility masks and value
/// ranges over the feasible entries.
struct Tile {
    n_cols: usize,
    words: usize,
    num: Vec<f64>,
    den: Vec<f64>,
    status: Vec<u8>,
    feas: Vec<u64>,
    deg: Vec<u64>,
    num_hi: Vec<f64>,
    num_lo: Vec<f64>,
    den_hi: Vec<f64>,
    den_lo: Vec<f64>,
}

struct RowView<'a> {
    num: &'a [f64],
    den: &'a [f64],
    status: &'a [u8],
    feas: &'a [u64],
    deg: &'a [u64],
    num_hi: f64,
    num_lo: f64,
    den_hi: f64,
    den_lo: f64,
}

impl Tile {
    fn build(ctx: &Ctx, block: usize, row_range: std::ops::Range<usize>, n_cols: usize) -> Tile {
        let n_rows = row_range.len();
        let words = n_cols.div_ceil(64);
        let mut tile = Tile {
            n_cols,
            words,
            num: vec![0.0; n_rows * n_cols],
            den: vec![0.0; n_rows * n_cols],
            status: vec![0u8; n_rows * n_cols],
            feas: vec![0u64; n_rows * words],
            deg: vec![0u64; n_rows * words],
            num_hi: vec![f64::NEG_INFINITY; n_rows],
            num_lo: vec![f64::INFINITY; n_rows],
            den_hi: vec![f64::NEG_INFINITY; n_rows],
            den_lo: vec![f64::INFINITY; n_rows],
        };
        let start = row_range.start;
        let cols_per_row = n_cols;
        // fill rows in parallel; each closure owns disjoint slices
        let rows: Vec<(usize, &mut [f64], &mut [f64], &mut [u8], &mut [u64], &mut [u64])> = {
            let num_chunks = tile.num.chunks_mut(cols_per_row);
            let den_chunks = tile.den.chunks_mut(cols_per_row);
            let st_chunks = tile.status.chunks_mut(cols_per_row);
            let feas_chunks = tile.feas.chunks_mut(words);
            let deg_chunks = tile.deg.chunks_mut(words);
            num_chunks
                .zip(den_chunks)
                .zip(st_chunks)
                .zip(feas_chunks)
                .zip(deg_chunks)
                .enumerate()
                .map(|(r, ((((num, den), st), feas), deg))| (r, num, den, st, feas, deg))
                .collect()
        };
        let aggregates: Vec<(f64, f64, f64, f64)> = rows
            .into_par_iter()
            .map(|(r, num, den, st, feas, deg)| {
                let mut scratch = EvalScratch::new(ctx.n);
                let row_idx = start + r;
                let mut agg = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
                for c in 0..n_cols {
                    let e = ctx.eval(block, row_idx, c, &mut scratch);
                    num[c] = e.num;
                    den[c] = e.den;
                    st[c] = e.status;
                    if e.status == 0 {
                        feas[c / 64] |= 1u64 << (c % 64);
                        agg.0 = agg.0.max(e.num);
                        agg.1 = agg.1.min(e.num);
                        agg.2 = agg.2.max(e.den);
                        agg.3 = agg.3.min(e.den);
                    } else if e.status & ST_DEG != 0 {
                        deg[c / 64] |= 1u64 << (c % 64);
                    }
                }
                agg
            })
            .collect();
        for (r, agg) in aggregates.into_iter().enumerate() {
            tile.num_hi[r] = agg.0;
            tile.num_lo[r] = agg.1;
            tile.den_hi[r] = agg.2;
            tile.den_lo[r] = agg.3;
        }
        tile
    }

    fn row(&self, r: usize) -> RowView<'_> {
        RowView {
            num: &self.num[r * self.n_cols..(r + 1) * self.n_cols],
            den: &self.den[r * self.n_cols..(r + 1) * self.n_cols],
            status: &self.status[r * self.n_cols..(r + 1) * self.n_cols],
            feas: &self.feas[r * self.words..(r + 1) * self.words],
            deg: &self.deg[r * self.words..(r + 1) * self.words],
            num_hi: self.num_hi[r],
            num_lo: self.num_lo[r],
            den_hi: self.den_hi[r],
            den_lo: self.den_lo[r],
        }
    }
}

fn side_counts(a: &RowView, b: &RowView, len: usize) -> (u64, u64) {
    let mut feas = 0u64;
    let mut deg = 0u64;
    for w in 0..a.feas.len() {
        feas += (a.feas[w] & b.feas[w]).count_ones() as u64;
        deg += (a.deg[w] | b.deg[w]).count_ones() as u64;
    }
    let _ = len;
    (feas, deg)
}

fn first_common_bit(a: &[u64], b: &[u64]) -> Option<usize> {
    for (w, (&x, &y)) in a.iter().zip(b).enumerate() {
        let m = x & y;
        if m != 0 {
            return Some(w * 64 + m.trailing_zeros() as usize);
        }
    }
    None
}

/// Best feasible entry of one side under the (numerator, denominator, index)
/// preference order.
fn sweep_side(a: &RowView, b: &RowView, maximize: bool) -> Option<(f64, f64, usize)> {
    let mut best: Option<(f64, f64, usize)> = None;
    for i in 0..a.num.len() {
        if a.status[i] | b.status[i] != 0 {
            continue;
        }
        let num = a.num[i] + b.num[i];
        let den = a.den[i] + b.den[i];
        let better = match best {
            None => true,
            Some((bn, bd, _)) => {
                if maximize {
                    num > bn || (num == bn && den < bd)
                } else {
                    num < bn || (num == bn && den > bd)
                }
            }
        };
        if better {
            best = Some((num, den, i));
        }
    }
    best
}

fn ratio_bounds(num_lo: f64, num_hi: f64, den_lo: f64, den_hi: f64) -> (f64, f64) {
    if den_lo <= 0.0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let hi = if num_hi >= 0.0 { num_hi / den_lo } else { num_hi / den_hi };
    let lo = if num_lo >= 0.0 { num_lo / den_hi } else { num_lo / den_lo };
    (lo, hi)
}

fn tiled_scan(p: &GnmProblem, ctx: &Ctx, sizes: [usize; 4]) -> SearchAcc {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(p.jobs.max(1))
        .build();
    match pool {
        Ok(pool) => pool.install(|| tiled_scan_inner(ctx, sizes)),
        Err(_) => tiled_scan_inner(ctx, sizes),
    }
}

fn tiled_scan_inner(ctx: &Ctx, sizes: [usize; 4]) -> SearchAcc {
    let cols_b = sizes[2];
    let cols_w = sizes[3];
    let col_entries = cols_b + cols_w;
    let tile_rows = (TILE_BUDGET_ENTRIES / col_entries.max(1)).clamp(8, 4096);
    let flat = ctx.objective == Objective::Sirm;

    // Deterministic seed incumbents from a fixed sample of husband pairs.
    let probe = |len: usize| -> Vec<usize> {
        let mut v = vec![0, len / 2, len.saturating_sub(1)];
        v.dedup();
        v.retain(|&i| i < len);
        v
    };
    let mut seed = SearchAcc::default();
    if !flat {
        for &i0 in &probe(sizes[0]) {
            let t00 = Tile::build(ctx, 0, i0..i0 + 1, cols_b);
            let t01 = Tile::build(ctx, 1, i0..i0 + 1, cols_w);
            for &i1 in &probe(sizes[1]) {
                let t10 = Tile::build(ctx, 2, i1..i1 + 1, cols_b);
                let t11 = Tile::build(ctx, 3, i1..i1 + 1, cols_w);
                process_pair_values(
                    ctx,
                    &t00.row(0),
                    &t10.row(0),
                    &t01.row(0),
                    &t11.row(0),
                    [i0 as u32, i1 as u32],
                    &mut seed,
                    true,
                );
            }
        }
        seed.n_feas = 0;
        seed.n_neg = 0;
        seed.n_deg = 0;
    }

    let mut acc = SearchAcc::default();
    let mut tb = 0;
    while tb < sizes[0] {
        let tb_end = (tb + tile_rows).min(sizes[0]);
        let t00 = Tile::build(ctx, 0, tb..tb_end, cols_b);
        let t01 = Tile::build(ctx, 1, tb..tb_end, cols_w);
        let mut tw = 0;
        while tw < sizes[1] {
            let tw_end = (tw + tile_rows).min(sizes[1]);
            let t10 = Tile::build(ctx, 2, tw..tw_end, cols_b);
            let t11 = Tile::build(ctx, 3, tw..tw_end, cols_w);
            let row_results: Vec<SearchAcc> = (0..tb_end - tb)
                .into_par_iter()
                .map(|r0| {
                    let mut local = seed.clone();
                    local.n_feas = 0;
                    local.n_neg = 0;
                    local.n_deg = 0;
                    let row00 = t00.row(r0);
                    let row01 = t01.row(r0);
                    let i0 = (tb + r0) as u32;
                    for r1 in 0..tw_end - tw {
                        let row10 = t10.row(r1);
                        let row11 = t11.row(r1);
                        let i1 = (tw + r1) as u32;
                        let (feas_b, deg_b) = side_counts(&row00, &row10, cols_b);
                        let (feas_w, deg_w) = side_counts(&row01, &row11, cols_w);
                        let nb = cols_b as u64;
                        let nw = cols_w as u64;
                        let pair_deg = deg_b * nw + (nb - deg_b) * deg_w;
                        let pair_feas = feas_b * feas_w;
                        local.n_deg += pair_deg;
                        local.n_feas += pair_feas;
                        local.n_neg += nb * nw - pair_deg - pair_feas;
                        if pair_feas == 0 {
                            continue;
                        }
                        if flat {
                            if local.first_feas.is_none() {
                                let i2 = first_common_bit(row00.feas, row10.feas).unwrap();
                                let i3 = first_common_bit(row01.feas, row11.feas).unwrap();
                                let num = ((row00.num[i2] + row10.num[i2]) + row01.num[i3])
                                    + row11.num[i3];
                                let den = ((row00.den[i2] + row10.den[i2]) + row01.den[i3])
                                    + row11.den[i3];
                                local.first_feas = Some(Cand {
                                    value: finalize(ctx.objective, num, den),
                                    idx: vec![i0, i1, i2 as u32, i3 as u32],
                                });
                            }
                            continue;
                        }
                        process_pair_values(ctx, &row00, &row10, &row01, &row11, [i0, i1], &mut local, false);
                    }
                    local
                })
                .collect();
            for r in row_results {
                acc = acc.merge(r);
            }
            tw = tw_end;
        }
        tb = tb_end;
    }
    if flat {
        if let Some(c) = acc.first_feas.take() {
            acc.best_max = Some(c.clone());
            acc.best_min = Some(c);
        }
    } else {
        acc = acc.merge(seed_candidates_only(seed));
    }
    acc
}

fn seed_candidates_only(seed: SearchAcc) -> SearchAcc {
    SearchAcc {
        n_feas: 0,
        n_neg: 0,
        n_deg: 0,
        best_max: seed.best_max,
        best_min: seed.best_min,
        first_feas: None,
    }
}

/// Sweeps both wife sides of one husband pair and offers the two candidate
/// points to the accumulator. With `force`, bounds are not consulted.
#[allow(clippy::too_many_arguments)]
fn process_pair_values(
    ctx: &Ctx,
    row00: &RowView,
    row10: &RowView,
    row01: &RowView,
    row11: &RowView,
    pair: [u32; 2],
    acc: &mut SearchAcc,
    force: bool,
) {
    let num_hi = row00.num_hi + row10.num_hi + row01.num_hi + row11.num_hi;
    let num_lo = row00.num_lo + row10.num_lo + row01.num_lo + row11.num_lo;
    let den_hi = row00.den_hi + row10.den_hi + row01.den_hi + row11.den_hi;
    let den_lo = row00.den_lo + row10.den_lo + row01.den_lo + row11.den_lo;
    if !num_hi.is_finite() || !num_lo.is_finite() {
        return; // a side has no feasible entry
    }
    let (bound_lo, bound_hi) = match ctx.objective {
        Objective::Sehc => ratio_bounds(num_lo, num_hi, den_lo, den_hi),
        Objective::Sirm => {
            let (rl, rh) = ratio_bounds(num_lo, num_hi, den_lo, den_hi);
            (1.0 - rh, 1.0 - rl)
        }
    };
    let want_max = force
        || match &acc.best_max {
            None => true,
            Some(c) => bound_hi > c.value,
        };
    let want_min = force
        || match &acc.best_min {
            None => true,
            Some(c) => bound_lo < c.value,
        };
    if !want_max && !want_min {
        return;
    }
    // For SEHC the value is monotone in the numerator (the denominator is
    // constant up to cell-sum noise), so per-side selection by numerator
    // finds the optimum; for SIRM it is anti-monotone.
    let max_needs_max_num = ctx.objective == Objective::Sehc;
    for (label_max, run) in [(true, want_max), (false, want_min)] {
        if !run {
            continue;
        }
        let pick_max_num = if label_max { max_needs_max_num } else { !max_needs_max_num };
        let Some((bn, bd, i2)) = sweep_side(row00, row10, pick_max_num) else {
            continue;
        };
        let Some((_, _, i3)) = sweep_side(row01, row11, pick_max_num) else {
            continue;
        };
        let num = (bn + row01.num[i3]) + row11.num[i3];
        let den = (bd + row01.den[i3]) + row11.den[i3];
        let value = finalize(ctx.objective, num, den);
        let idx = [pair[0], pair[1], i2 as u32, i3 as u32];
        if label_max {
            if better_max(&acc.best_max, value, &idx) {
                acc.best_max = Some(Cand { value, idx: idx.to_vec() });
            }
        } else if better_min(&acc.best_min, value, &idx) {
            acc.best_min = Some(Cand { value, idx: idx.to_vec() });
        }
    }
}
