//! Large-deviation rate functions of the normalized distance.
//!
//! For `p ≥ 2` the summands `(|g − g'|², |g'|^p)` satisfy Cramér's theorem
//! with rate `Λ*`; the distance rates follow by contraction. The cube uses
//! the one-dimensional summand `|u − u'|²`.

pub mod conjugate;
pub mod cube;
pub mod mgf;
pub mod rate;

pub use conjugate::{legendre2, Conjugate, Conjugator};
pub use cube::{cube_log_mgf, cube_log_mgf_derivatives, cube_rate};
pub use mgf::{gaussian_log_mgf, log_mgf, log_mgf_quadrature, mgf_domain_contains, MgfEvaluation, MgfWorkspace};
pub use rate::{
    rate_ball, rate_boundary, rate_curve, rate_curve_with_workers, rate_point, rate_radial, RateCurve,
    RateDiagnostics, RatePoint,
};
