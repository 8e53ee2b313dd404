//! Numerical checks of learned and analytic systems: rollout errors,
//! passivity residuals and Monte-Carlo energy balance, the Gronwall
//! stability bound, and coupled-path closeness.

mod passivity;
pub mod report;
mod rollout;
mod stability;

pub use passivity::{passivity_residual, residual_grid, weak_passivity_mc, PassivityOptions, PassivityReport};
pub use rollout::{
    energy_curve, rollout_metrics, RolloutComparison, RolloutMetrics, RolloutSettings, DIVERGENCE_NORM,
};
pub use stability::{
    coefficient_gaps, coupled_sup_gaps, gronwall_bound, lipschitz_estimate, stability_bound_check, uat_report,
    StabilityReport, UatReport, LIPSCHITZ_RADIUS_STEPS, LIPSCHITZ_SAFETY,
};
