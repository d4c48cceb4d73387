//! Dataset ingestion, synthetic data, and query-likelihood simulation.

mod synth;
mod traffic;
mod truth;
mod vecs;

pub use synth::{generate_synthetic, SyntheticConfig, SyntheticMixture};
pub use traffic::{
    calibrate_alpha, read_profile, read_traffic, sample_traffic, simulate_at_score,
    simulate_likelihoods, write_profile, write_traffic, BetaSimConfig, LikelihoodProfile,
    Simulation, TrafficSample, CALIBRATION_BETA,
};
pub use truth::compute_ground_truth;
pub use vecs::{
    parse_fvecs, parse_ivecs, read_fvecs, read_fvecs_head, read_ivecs, write_fvecs, write_ivecs,
};
