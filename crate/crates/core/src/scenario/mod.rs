//! Endpoint profiles, the DUKPT applicability verdict engine, end-to-end
//! simulations across schemes and the terminal cloning demonstration.

mod cloning;
mod profile;
mod simulation;

pub use cloning::{clone_attack_demo, CloneAttackReport, CloneEvent, Sender};
pub use profile::{
    builtin_profile, builtin_profiles, evaluate_applicability, parse_profiles,
    render_verdict_table, ApplicabilityStatus, ApplicabilityVerdict, Dependency, EndpointProfile,
    ReasonCode, SecureKeyStorage, TransactionOrigin,
};
pub use simulation::{run_fleet_simulation, run_simulation, SimulationReport};
