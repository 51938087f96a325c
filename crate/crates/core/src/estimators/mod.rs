//! Estimating equations, rate matrices, Jacobian limits and the solver.

pub mod design;
pub mod equations;
pub mod identifiability;
pub mod init;
pub mod params;
pub mod rates;
pub mod result;
pub mod solver;
pub mod wmatrix;

pub use design::{default_f1, default_f2, DEFAULT_LAMBDA, MomentDesign, MomentTuple, RegularityCase, WParams};
pub use equations::{g_n, h_n, statistic_s, EstimatingEquation};
pub use identifiability::{check_identifiability, IdentifiabilityReport, ParamFlag};
pub use init::initial_guess;
pub use params::{spectral_scale, theta_from_model, Kind, Method, ParamVector};
pub use rates::{predicted_rates, rate_matrix_cbar, rate_matrix_r, wn_schedule, Rate};
pub use result::{estimate, EstimationResult};
pub use solver::{solve, MomentFunction, SolveOptions, SolveOutcome, SolverPath};
pub use wmatrix::{regularity_determinants, w_bar, w_underline, DeterminantPair, WForm};
