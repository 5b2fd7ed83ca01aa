//! Command-line front end: JSON configuration, reporting, table presets and
//! the command implementations used by the `subdiff` binary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod format;
pub mod presets;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NUMERICAL: i32 = 2;
}

/// Maps an error to an exit code: numerical breakdowns give 2, everything
/// else (bad flags, bad configs, invalid parameters) gives 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use subdiff_core::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::ZeroPivot { .. } | Error::SeriesDivergence { .. } | Error::CorruptKernel { .. } | Error::Inconsistent { .. } => {
                    exit::NUMERICAL
                }
                _ => exit::USAGE,
            };
        }
    }
    exit::USAGE
}
