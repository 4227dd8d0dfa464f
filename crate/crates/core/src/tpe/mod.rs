//! Truncated polynomial expansion (TPE) transceiver.
//!
//! The precoder of UE k is a degree J − 1 polynomial in the estimated-channel
//! Gram operator applied to ĥ_k. Its weights and powers come from deterministic
//! moments, so a trial needs only J − 1 Gram applications and no inversion.

mod design;
mod empirical;
mod moments;

pub use design::{
    balanced_dl_powers_fixed_weights, common_weights, design_tpe, optimal_weights, solve_qtpe, tpe_asymptotic_sinrs,
    tpe_average_power, tpe_dl_powers, TpeSolution,
};
pub use empirical::{
    build_empirical_moments, empirical_dl_sinr, empirical_ul_sinr, krylov_blocks, tpe_beamformers, EmpiricalMoments,
};
pub use moments::{build_deterministic_moments, DeterministicMoments};
