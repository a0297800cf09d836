//! Worked families: the symmetric `M₂` and `M₃` states, their orbit
//! decompositions under permutations, the embedding `Γ: M₂ → M₃` and the
//! bifurcation scan of the `M₃` family.

mod families;
mod group;
mod orbit;
mod scan;

pub use families::{
    binary_entropy, gamma_ensemble, gamma_isometry, gamma_map, m2_pair_amplitudes, m2_pair_decomposition,
    m2_symmetric_state, m3_symmetric_state, GammaInput, GammaOutput,
};
pub use group::{permutation_action, GroupAction};
pub use orbit::{
    best_single_orbit, m3_two_orbit_candidates, orbit_ansatz, ray_orbit, solve_h_invariant_candidate,
    two_orbit_ansatz, AnsatzFit, AnsatzOutcome, PHASE_GRID,
};
pub use scan::{
    bifurcation_scan, default_grid, leaf_linearity_along_scan, uniform_grid, Bracket, Detected, LinearityRow,
    ScanOptions, ScanPoint, ScanReport, Z1_CANDIDATE, Z_MAX, Z_MIN,
};
