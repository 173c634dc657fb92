//! Distances between independent random points in `l_p^n` balls.
//!
//! The crate samples uniform points in `B_p^n` and on its boundary (cone
//! measure), evaluates the central-limit constants of the normalized
//! distance `n^{1/p−1/2}‖X−Y‖₂`, the exact distance law on the Euclidean
//! sphere, and the large-deviation rate functions obtained by quadrature of
//! a log-moment generating function followed by convex conjugation.
//!
//! Module map:
//!
//! - [`specfun`]: gamma/beta functions, moments of `p`-generalized Gaussians
//! - [`sampler`]: reproducible random streams and exact samplers
//! - [`stats`]: Monte Carlo batches, moments, KS distance, tail rates
//! - [`clt`]: CLT constants, the exact sphere law, CLT reports
//! - [`ldp`]: log-MGFs, Legendre–Fenchel transforms, rate functions

pub mod clt;
pub mod error;
pub mod extended;
pub mod ldp;
pub mod optimize;
pub mod quadrature;
pub mod sampler;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use extended::Extended;
pub use sampler::{DomainKind, RandomStream};
pub use specfun::PIndex;
