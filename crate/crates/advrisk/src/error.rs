//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by construction, alignment, and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid eta: {eta}, must be in [0, 1]")]
    EtaOutOfRange { eta: f64 },

    #[error("invalid loss parameter {name}: {value}, must be {requirement}")]
    LossParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("loss table invalid: {reason}")]
    LossTable { reason: String },

    #[error("radius {eps} is not grid-aligned: nearest admissible values are {below} and {above}")]
    Alignment { eps: f64, below: f64, above: f64 },

    #[error("point {x} is not a node of the grid (lo {lo}, spacing {spacing}, count {count})")]
    OffGrid {
        x: f64,
        lo: f64,
        spacing: f64,
        count: usize,
    },

    #[error("grids are incompatible: {reason}")]
    GridMismatch { reason: String },

    #[error("function grid does not cover {what}: needs [{need_lo}, {need_hi}], has [{have_lo}, {have_hi}]")]
    Coverage {
        what: &'static str,
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("invalid grid: {reason}")]
    Grid { reason: String },

    #[error("invalid distribution: {reason}")]
    Distribution { reason: String },

    #[error(
        "total mass {total} outside (0, 1]; pass the mass override to accept unnormalized input"
    )]
    MassBudget { total: f64 },

    #[error("monotone curve invalid: {reason}")]
    Curve { reason: String },

    #[error("value {value} outside the domain of {what}: [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("attack infeasible: class-{class} displacement {displacement} exceeds radius {eps} plus slack {slack}")]
    Infeasible {
        class: u8,
        displacement: f64,
        eps: f64,
        slack: f64,
    },

    #[error("marginal masses differ by {difference}, beyond tolerance {tol}")]
    MassMismatch { difference: f64, tol: f64 },

    #[error(
        "enumeration too large: {combinations} displacement combinations exceed the cap {cap}"
    )]
    TooLarge { combinations: u128, cap: u128 },

    #[error("instance too large for exhaustive search: {atoms} mass-bearing nodes, cap {cap}")]
    TooManyAtoms { atoms: usize, cap: usize },

    #[error("bound degenerate: {reason}")]
    DegenerateBound { reason: String },

    #[error("precondition violated: {reason}")]
    Precondition { reason: String },

    #[error("csv parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("config error: {reason}")]
    Config { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
