//! Path-independent decomposition schemes for two and three factors, with
//! exact residual bookkeeping and conservative interval propagation.
//!
//! Every component is a fixed signed combination of the moment evaluated at
//! the corners of the factor grid, so with point-valued corners the
//! components sum to the total change exactly. When corners are intervals
//! (the under-determined counterfactuals), each component's interval is
//! computed by selecting every corner independently within its interval;
//! this over-covers, never under-covers, the attainable component set, and
//! the reports label it accordingly.

use crate::gnm::{self, GnmError, GnmProblem, MomentInterval, Objective, SortOrder};
use crate::nm::{self, NmError};
use crate::tables::{ContingencyTable, RaceEduLayout, TableError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("corner (availability={a}, race-prefs={pr}, edu-prefs={pe}) failed: {source}")]
    Corner {
        a: usize,
        pr: usize,
        pe: usize,
        source: GnmError,
    },
    #[error(transparent)]
    Nm(#[from] NmError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Gnm(#[from] GnmError),
}

/// A point value or a closed interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bounds {
    Point(f64),
    Interval { lo: f64, hi: f64 },
}

impl Bounds {
    pub fn lo(&self) -> f64 {
        match *self {
            Bounds::Point(v) => v,
            Bounds::Interval { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            Bounds::Point(v) => v,
            Bounds::Interval { lo: _, hi } => hi,
        }
    }

    pub fn midpoint(&self) -> f64 {
        match *self {
            Bounds::Point(v) => v,
            Bounds::Interval { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Bounds::Point(_))
    }

    fn from_interval(m: &MomentInterval) -> Bounds {
        if m.min_value == m.max_value {
            Bounds::Point(m.min_value)
        } else {
            Bounds::Interval { lo: m.min_value, hi: m.max_value }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    Main,
    Interaction,
    Residuum,
}

/// One named decomposition component.
#[derive(Clone, Debug)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    pub value: Bounds,
}

/// A full decomposition: the total change, the components, and the exact-sum
/// check (evaluated at interval midpoints when any corner is an interval;
/// the identity is exact only pointwise).
#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub total_change: Bounds,
    pub components: Vec<Component>,
    pub exact_sum_residual: f64,
    /// True when interval corners forced conservative component intervals.
    pub conservative: bool,
}

impl DecompositionReport {
    fn finish(total_change: Bounds, components: Vec<Component>) -> Self {
        let sum_mid: f64 = components.iter().map(|c| c.value.midpoint()).sum();
        let conservative =
            !total_change.is_point() || components.iter().any(|c| !c.value.is_point());
        DecompositionReport {
            exact_sum_residual: total_change.midpoint() - sum_mid,
            total_change,
            components,
            conservative,
        }
    }
}

/// Moment values at the four (availability, preference) combinations.
/// Index convention: `f_ap` holds availability at time a, preferences at
/// time p.
#[derive(Clone, Copy, Debug)]
pub struct FactorGrid2 {
    pub f00: f64,
    pub f01: f64,
    pub f10: f64,
    pub f11: f64,
}

/// Two-factor path-independent decomposition: main effects against the base
/// corner plus one joint interaction, summing to the total exactly.
pub fn biewen2(g: &FactorGrid2) -> DecompositionReport {
    let availability = g.f10 - g.f00;
    let preferences = g.f01 - g.f00;
    let interaction = g.f11 - g.f10 - g.f01 + g.f00;
    DecompositionReport::finish(
        Bounds::Point(g.f11 - g.f00),
        vec![
            Component {
                name: "availability".into(),
                kind: ComponentKind::Main,
                value: Bounds::Point(availability),
            },
            Component {
                name: "preferences".into(),
                kind: ComponentKind::Main,
                value: Bounds::Point(preferences),
            },
            Component {
                name: "availability*preferences".into(),
                kind: ComponentKind::Interaction,
                value: Bounds::Point(interaction),
            },
        ],
    )
}

/// Moment values (or intervals) at all eight (availability, race
/// preferences, education preferences) time combinations. Corner index:
/// bit 2 = availability, bit 1 = race preferences, bit 0 = education
/// preferences; so `corners[0b101]` is (A1, PR0, PE1). Observed corners 000
/// and 111 are points by construction.
#[derive(Clone, Debug)]
pub struct FactorGrid3 {
    pub corners: [Bounds; 8],
}

const A: usize = 0b100;
const PR: usize = 0b010;
const PE: usize = 0b001;

/// Signed corner combination evaluated with independent corner selection.
fn combine(corners: &[Bounds; 8], coeffs: &[(usize, f64)]) -> Bounds {
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut point = true;
    for &(idx, c) in coeffs {
        let b = &corners[idx];
        point &= b.is_point();
        if c >= 0.0 {
            lo += c * b.lo();
            hi += c * b.hi();
        } else {
            lo += c * b.hi();
            hi += c * b.lo();
        }
    }
    if point {
        Bounds::Point(lo)
    } else {
        Bounds::Interval { lo, hi }
    }
}

/// Three-factor path-independent decomposition: three main effects, three
/// pairwise interactions, and the triple-interaction residuum. With point
/// corners the seven components sum to the total change exactly.
pub fn biewen3(g: &FactorGrid3) -> DecompositionReport {
    let c = &g.corners;
    let main_a = combine(c, &[(A, 1.0), (0, -1.0)]);
    let main_pr = combine(c, &[(PR, 1.0), (0, -1.0)]);
    let main_pe = combine(c, &[(PE, 1.0), (0, -1.0)]);
    let int_pr_a = combine(c, &[(A | PR, 1.0), (A, -1.0), (PR, -1.0), (0, 1.0)]);
    let int_pe_a = combine(c, &[(A | PE, 1.0), (A, -1.0), (PE, -1.0), (0, 1.0)]);
    let int_pe_pr = combine(c, &[(PR | PE, 1.0), (PR, -1.0), (PE, -1.0), (0, 1.0)]);
    // residuum = total minus everything else, which expands to the
    // alternating sum over all eight corners
    let residuum = combine(
        c,
        &[
            (A | PR | PE, 1.0),
            (A | PR, -1.0),
            (A | PE, -1.0),
            (PR | PE, -1.0),
            (A, 1.0),
            (PR, 1.0),
            (PE, 1.0),
            (0, -1.0),
        ],
    );
    let total = combine(c, &[(A | PR | PE, 1.0), (0, -1.0)]);
    DecompositionReport::finish(
        total,
        vec![
            Component { name: "availability".into(), kind: ComponentKind::Main, value: main_a },
            Component { name: "race-preferences".into(), kind: ComponentKind::Main, value: main_pr },
            Component { name: "edu-preferences".into(), kind: ComponentKind::Main, value: main_pe },
            Component {
                name: "race-preferences*availability".into(),
                kind: ComponentKind::Interaction,
                value: int_pr_a,
            },
            Component {
                name: "edu-preferences*availability".into(),
                kind: ComponentKind::Interaction,
                value: int_pe_a,
            },
            Component {
                name: "edu-preferences*race-preferences".into(),
                kind: ComponentKind::Interaction,
                value: int_pe_pr,
            },
            Component { name: "residuum".into(), kind: ComponentKind::Residuum, value: residuum },
        ],
    )
}

/// One-trait decomposition: counterfactual corners built with the
/// measure-preserving transform, two-factor scheme on top. The moment is
/// any scalar function of a table (diagonal share, off-diagonal share, or a
/// layout-bound moment).
pub fn decompose_one_dim<F>(
    z0: &ContingencyTable,
    z1: &ContingencyTable,
    moment: F,
) -> Result<DecompositionReport, DecompError>
where
    F: Fn(&ContingencyTable) -> Result<f64, TableError>,
{
    let f00 = moment(z0)?;
    let f11 = moment(z1)?;
    let f10 = moment(&nm::nm_transform_to_availability(z0, z1)?.table)?;
    let f01 = moment(&nm::nm_transform_to_availability(z1, z0)?.table)?;
    Ok(biewen2(&FactorGrid2 { f00, f01, f10, f11 }))
}

/// Two-trait decomposition: observed corners are points, the six mixed
/// corners are interval searches over the allocation lattice.
#[allow(clippy::too_many_arguments)]
pub fn decompose_two_dim(
    k0: &ContingencyTable,
    k1: &ContingencyTable,
    layout: &RaceEduLayout,
    objective: Objective,
    order: SortOrder,
    epsilon: f64,
    jobs: usize,
    observed_only: bool,
) -> Result<DecompositionReport, DecompError> {
    let moment = |t: &ContingencyTable| match objective {
        Objective::Sehc => crate::tables::sehc(t, layout),
        Objective::Sirm => crate::tables::sirm(t, layout),
    };
    let mut corners = [Bounds::Point(0.0); 8];
    corners[0] = Bounds::Point(moment(k0)?);
    corners[A | PR | PE] = Bounds::Point(moment(k1)?);
    for idx in 1..7usize {
        let pick = |bit: usize| if idx & bit != 0 { k1 } else { k0 };
        let mut problem = GnmProblem::new(
            pick(PR).clone(),
            pick(A).clone(),
            pick(PE).clone(),
            layout.clone(),
        )
        .map_err(|source| DecompError::Corner {
            a: usize::from(idx & A != 0),
            pr: usize::from(idx & PR != 0),
            pe: usize::from(idx & PE != 0),
            source,
        })?
        .with_order(order)
        .with_objective(objective)
        .with_epsilon(epsilon)
        .with_jobs(jobs);
        if observed_only {
            problem = problem.with_allocation_space(gnm::AllocationSpace::ObservedOnly);
        }
        let interval = gnm::gnm_interval(&problem).map_err(|source| DecompError::Corner {
            a: usize::from(idx & A != 0),
            pr: usize::from(idx & PR != 0),
            pe: usize::from(idx & PE != 0),
            source,
        })?;
        corners[idx] = Bounds::from_interval(&interval);
    }
    Ok(biewen3(&FactorGrid3 { corners }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_name<'a>(r: &'a DecompositionReport, name: &str) -> &'a Component {
        r.components.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn biewen2_additive_function_has_no_interaction() {
        // f(A, P) = A + P with A: 1 -> 2, P: 3 -> 5
        let g = FactorGrid2 { f00: 4.0, f10: 5.0, f01: 6.0, f11: 7.0 };
        let r = biewen2(&g);
        assert_eq!(by_name(&r, "availability").value, Bounds::Point(1.0));
        assert_eq!(by_name(&r, "preferences").value, Bounds::Point(2.0));
        assert_eq!(by_name(&r, "availability*preferences").value, Bounds::Point(0.0));
        assert_eq!(r.exact_sum_residual, 0.0);
    }

    #[test]
    fn biewen2_multiplicative_function() {
        // f(A, P) = A * P with A: 1 -> 2, P: 3 -> 5: total 7 = 3 + 2 + 2
        let g = FactorGrid2 { f00: 3.0, f10: 6.0, f01: 5.0, f11: 10.0 };
        let r = biewen2(&g);
        assert_eq!(r.total_change, Bounds::Point(7.0));
        assert_eq!(by_name(&r, "availability").value, Bounds::Point(3.0));
        assert_eq!(by_name(&r, "preferences").value, Bounds::Point(2.0));
        assert_eq!(by_name(&r, "availability*preferences").value, Bounds::Point(2.0));
    }

    #[test]
    fn biewen2_no_change() {
        let g = FactorGrid2 { f00: 0.3, f10: 0.3, f01: 0.3, f11: 0.3 };
        let r = biewen2(&g);
        for c in &r.components {
            assert_eq!(c.value, Bounds::Point(0.0));
        }
    }

    fn point_grid(f: impl Fn(usize, usize, usize) -> f64) -> FactorGrid3 {
        let mut corners = [Bounds::Point(0.0); 8];
        for (idx, corner) in corners.iter_mut().enumerate() {
            *corner = Bounds::Point(f(
                usize::from(idx & A != 0),
                usize::from(idx & PR != 0),
                usize::from(idx & PE != 0),
            ));
        }
        FactorGrid3 { corners }
    }

    #[test]
    fn biewen3_additive_function_has_no_interactions() {
        let g = point_grid(|a, pr, pe| a as f64 + 2.0 * pr as f64 + 3.0 * pe as f64);
        let r = biewen3(&g);
        assert_eq!(by_name(&r, "availability").value, Bounds::Point(1.0));
        assert_eq!(by_name(&r, "race-preferences").value, Bounds::Point(2.0));
        assert_eq!(by_name(&r, "edu-preferences").value, Bounds::Point(3.0));
        for name in [
            "race-preferences*availability",
            "edu-preferences*availability",
            "edu-preferences*race-preferences",
            "residuum",
        ] {
            assert_eq!(by_name(&r, name).value, Bounds::Point(0.0), "{name}");
        }
    }

    #[test]
    fn biewen3_multiplicative_fixture() {
        // f = A * PR * PE moving (1,1,1) -> (2,3,4):
        // total 23 = (1 + 2 + 3) + (2 + 3 + 6) + 6
        let g = point_grid(|a, pr, pe| {
            (if a == 1 { 2.0 } else { 1.0 })
                * (if pr == 1 { 3.0 } else { 1.0 })
                * (if pe == 1 { 4.0 } else { 1.0 })
        });
        let r = biewen3(&g);
        assert_eq!(r.total_change, Bounds::Point(23.0));
        assert_eq!(by_name(&r, "availability").value, Bounds::Point(1.0));
        assert_eq!(by_name(&r, "race-preferences").value, Bounds::Point(2.0));
        assert_eq!(by_name(&r, "edu-preferences").value, Bounds::Point(3.0));
        assert_eq!(by_name(&r, "race-preferences*availability").value, Bounds::Point(2.0));
        assert_eq!(by_name(&r, "edu-preferences*availability").value, Bounds::Point(3.0));
        assert_eq!(by_name(&r, "edu-preferences*race-preferences").value, Bounds::Point(6.0));
        assert_eq!(by_name(&r, "residuum").value, Bounds::Point(6.0));
        assert!(r.exact_sum_residual.abs() <= 1e-12);
    }

    #[test]
    fn biewen3_no_change() {
        let g = point_grid(|_, _, _| 0.42);
        let r = biewen3(&g);
        for c in &r.components {
            assert_eq!(c.value, Bounds::Point(0.0), "{}", c.name);
        }
    }

    #[test]
    fn component_sum_matches_total_on_random_grids() {
        // cheap deterministic pseudo-random corners
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let mut corners = [Bounds::Point(0.0); 8];
            for c in corners.iter_mut() {
                *c = Bounds::Point(next() * 2.0 - 1.0);
            }
            let r = biewen3(&FactorGrid3 { corners });
            let sum: f64 = r.components.iter().map(|c| c.value.midpoint()).sum();
            assert!((r.total_change.midpoint() - sum).abs() <= 1e-12);
        }
    }

    #[test]
    fn interval_components_are_monotone_in_corner_width() {
        let base = point_grid(|a, pr, pe| a as f64 * 0.5 + pr as f64 * 0.25 + pe as f64 * 0.125);
        let mut widened = base.clone();
        widened.corners[A] = Bounds::Interval { lo: 0.4, hi: 0.6 };
        let r_base = biewen3(&base);
        let r_wide = biewen3(&widened);
        let mut wider = widened.clone();
        wider.corners[A] = Bounds::Interval { lo: 0.3, hi: 0.7 };
        let r_wider = biewen3(&wider);
        for ((a, b), c) in r_base
            .components
            .iter()
            .zip(&r_wide.components)
            .zip(&r_wider.components)
        {
            assert!(b.value.lo() <= a.value.lo() + 1e-15 && b.value.hi() >= a.value.hi() - 1e-15);
            assert!(c.value.lo() <= b.value.lo() + 1e-15 && c.value.hi() >= b.value.hi() - 1e-15);
        }
    }

    #[test]
    fn path_independence_under_factor_relabeling() {
        // swapping the PR and PE roles (together with their grid) swaps the
        // corresponding components and changes no values
        let f = |a: usize, pr: usize, pe: usize| {
            1.0 + a as f64 * 0.5 + pr as f64 * 0.3 + pe as f64 * 0.2
                + (a * pr) as f64 * 0.07
                + (a * pe) as f64 * 0.011
                + (pr * pe) as f64 * 0.013
                + (a * pr * pe) as f64 * 0.017
        };
        let g = point_grid(f);
        let swapped = point_grid(|a, pr, pe| f(a, pe, pr));
        let r = biewen3(&g);
        let rs = biewen3(&swapped);
        assert_eq!(by_name(&r, "race-preferences").value, by_name(&rs, "edu-preferences").value);
        assert_eq!(by_name(&r, "edu-preferences").value, by_name(&rs, "race-preferences").value);
        assert_eq!(
            by_name(&r, "race-preferences*availability").value,
            by_name(&rs, "edu-preferences*availability").value
        );
        assert_eq!(by_name(&r, "residuum").value, by_name(&rs, "residuum").value);
        assert_eq!(r.total_change, rs.total_change);
    }
}
