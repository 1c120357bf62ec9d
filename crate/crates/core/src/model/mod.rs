//! Coefficient expressions, model documents and coefficient statistics.

pub mod expr;
pub mod interval;
pub mod spec;
pub mod stats;

pub use expr::{parse_expr, parse_sequence_expr, CoeffExpr, ExprError, Func};
pub use interval::Interval;
pub use spec::{load_model, load_model_file, ImpulseSchedule, ImpulseTimes, ModelDoc, ModelError, ModelSpec};
pub use stats::{
    compute_stats, derivative_sup, extremes, impulse_product_bound, Bound, CoeffStats, DelayStats, Extremes,
    ProductBounds, StatsBundle, StatsConfig, StatsOverride,
};
