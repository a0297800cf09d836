//! Convex and concave roofs of the restricted entropy.
//!
//! Every length-`N` pure decomposition of a rank-`r` state `ρ = Σ p_j e_j e_j†`
//! is `ψ_i = Σ_j V_ij √p_j e_j` for some `N × r` matrix `V` with orthonormal
//! columns. The roofs are optimized over that Stiefel manifold.

mod ensemble;
mod objective;
mod optimize;
mod oracle;
mod stationarity;
mod stiefel;

pub use ensemble::Ensemble;
pub use objective::{member_function, roof_gradient, roof_objective, RoofGradient};
pub use optimize::{
    concave_roof, entanglement_of_formation, optimize_roof, RoofOptions, RoofResult,
};
pub use oracle::brute_force_roof;
pub(crate) use optimize::stiefel_descent;
pub use stationarity::stationarity_residual;
pub use stiefel::{hjw_ensemble, HjwFactor, StiefelPoint};

/// Members lighter than this contribute nothing to objective or gradient.
pub const MEMBER_WEIGHT_FLOOR: f64 = 1e-14;
/// Normalized restricted eigenvalues below this are frozen out of the log.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Members lighter than this are dropped from returned ensembles.
pub const PRUNE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Infimum: entanglement of formation.
    #[default]
    Min,
    /// Supremum: the decomposition term of the conditional entropy.
    Max,
}

impl Direction {
    pub(crate) fn sign(self) -> f64 {
        match self {
            Direction::Min => 1.0,
            Direction::Max => -1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }
}
