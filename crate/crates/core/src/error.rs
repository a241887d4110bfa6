use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("kernel truncation at radius {radius} discards mass {discarded:.3e} (limit {limit})")]
    TruncationTooAggressive {
        radius: f64,
        discarded: f64,
        limit: f64,
    },

    #[error("grid mismatch: kernel dx = {kernel_dx}, field dx = {field_dx}")]
    GridMismatch { kernel_dx: f64, field_dx: f64 },

    #[error("kernel half-width {kernel_cells} cells exceeds domain of {domain_cells} cells")]
    KernelTooWide {
        kernel_cells: usize,
        domain_cells: usize,
    },

    #[error("non-finite value at t = {time}, x = {x}")]
    BlowUp { time: f64, x: f64 },

    #[error(
        "clamped negative mass {clamped:.3e} exceeds 1e-10 of max(u) = {max:.3e} at t = {time}"
    )]
    ExcessiveClamping { clamped: f64, max: f64, time: f64 },

    #[error("front at x = {front} reached the guard band of x_hi = {x_hi} at t = {time}")]
    DomainExhausted { front: f64, x_hi: f64, time: f64 },

    #[error("explicit reference scheme unstable: dt_ref = {dt_ref} > dx²/4 = {limit}")]
    ReferenceUnstable { dt_ref: f64, limit: f64 },

    #[error("reference instance too large: {0}")]
    ReferenceTooLarge(String),

    #[error("no downward crossing of level {level}")]
    NoCrossing { level: f64 },

    #[error("point x = {x} outside domain [{x_lo}, {x_hi}]")]
    OutOfDomain { x: f64, x_lo: f64, x_hi: f64 },

    #[error("fit window holds {found} samples, at least {required} required")]
    DegenerateWindow { found: usize, required: usize },

    #[error("power-law model inapplicable: d - b is non-positive for every profiled offset")]
    PowerModelInapplicable,

    #[error("oracle covers t in [{t_lo}, {t_hi}], query needs [{need_lo}, {need_hi}]")]
    OracleCoverage {
        t_lo: f64,
        t_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("zero standard error with mean {mean} != reference {reference}")]
    ZeroStandardError { mean: f64, reference: f64 },

    #[error("only {hits} surviving paths at t = {time} (need {required})")]
    InsufficientHits {
        hits: usize,
        time: f64,
        required: usize,
    },

    #[error("series truncation not guaranteed for t = {0} (need t > 0.1)")]
    SeriesRegime(f64),

    #[error("malformed snapshot data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite".into(),
        })
    }
}
