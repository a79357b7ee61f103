//! Counterfactual analysis of marital sorting from contingency tables.
//!
//! The library works with tables of couple counts classified by the spouses'
//! race and education level. It provides:
//!
//! - [`tables`]: the table data model, marginals, race/education block
//!   structure, equilibrium moments (share of educationally homogamous
//!   couples, share of inter-racial marriages), category merging, and
//!   microdata aggregation;
//! - [`liulu`]: the simplified (2x2) and matrix-valued generalized Liu-Lu
//!   sorting measures;
//! - [`nm`]: the closed-form counterfactual transform that maps a preference
//!   source table onto target marginals while preserving its generalized
//!   Liu-Lu matrix (the Naszodi-Mendonca transform);
//! - [`gnm`]: the two-trait sequential generalization (race then education,
//!   or the reverse), its integer allocation lattice, and exact min/max
//!   interval searches for scalar moments over the feasible lattice;
//! - [`decomp`]: path-independent two- and three-factor decomposition
//!   schemes with exact residual bookkeeping and conservative interval
//!   propagation;
//! - [`oracle`]: independent brute-force verifiers used to validate the main
//!   engine on small instances;
//! - [`io`]: CSV reading and writing for labeled tables.
//!
//! All tables are immutable values and every operation is a pure function,
//! so everything here is safe to share across parallel workers.

pub mod decomp;
pub mod gnm;
pub mod io;
pub mod liulu;
pub mod nm;
pub mod oracle;
pub mod tables;

/// Cells below this threshold are treated as structurally negative when a
/// transform reports negative entries; smaller magnitudes are floating-point
/// noise from the corner-sum differencing.
pub const DEFAULT_NEGATIVE_TOLERANCE: f64 = 1e-9;
