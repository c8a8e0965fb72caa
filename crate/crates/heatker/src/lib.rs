//! Driver for heat kernel coefficient computations: operator descriptions,
//! the staged pipeline and output formats.

pub mod emit;
pub mod operator;
pub mod pipeline;

pub use emit::{emit_expression, emit_report, read_json, Format};
pub use operator::{parse_operator, OperatorError};
pub use pipeline::{run, Dimension, Passes, Report, RunConfig, RunError};
