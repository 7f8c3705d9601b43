//! Post-processing of simulation results.

pub mod fit;
pub mod lyapunov;
pub mod zeno;

pub use fit::{decay_fit, DecayFit};
pub use lyapunov::{lyapunov_trace, razumikhin_audit, AuditSpec, LyapunovAudit, RazumikhinAudit};
pub use zeno::{
    compare_to_oracle, zeno_recursion_oracle, zeno_report, OracleComparison, OracleEvent,
    ZenoOracle, ZenoReport, ZenoVerdict,
};
