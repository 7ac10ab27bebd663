//! Monte Carlo estimation of partition functions, noiseless capacities and
//! information rates for two-dimensional binary constrained channels.
//!
//! The pieces, bottom up:
//!
//! * [`grid_model`]: the M×M grid, its pairwise kernel, and the split of the
//!   columns into alternating A/B strips, each of which reduces to a chain
//!   when the other side is fixed;
//! * [`chain_engine`]: backward filtering / forward sampling on those chains;
//! * [`tree_gibbs`]: blocked Gibbs sampling that alternates exact draws of
//!   the A and B sides, yielding side marginals as a by-product;
//! * [`estimators`]: Ogata-Tanemura and multilayer importance sampling;
//! * [`capacity`]: noiseless capacity plus exact enumeration and transfer
//!   matrix oracles;
//! * [`info_rate`]: the AWGN channel and the double-loop information rate
//!   estimator.

pub mod capacity;
pub mod chain_engine;
pub mod estimators;
pub mod grid_model;
pub mod info_rate;
pub mod logspace;
pub mod seed;
pub mod tree_gibbs;

pub use capacity::{
    estimate_capacity, exact_log_z_enumeration, exact_log_z_transfer_matrix, CapacityEstimate,
    CapacityError, PathEstimate,
};
pub use chain_engine::{
    backward_filter, chain_normalization, forward_sample, hard_square_chain, sampler_self_check,
    BackwardMessages, ChainError, ChainModel, ChainSample, SamplerCheck,
};
pub use estimators::{
    importance_ratio, multilayer_estimate, ogata_tanemura_direct, ogata_tanemura_direct_for,
    ogata_tanemura_tree, tree_ogata_tanemura, BaseEstimate, ChannelTempering,
    EstimatorAccumulator, EstimatorError, KernelTempering, LayerSchedule, LogEstimate,
    MultilayerConfig, MultilayerEstimate, OgataTanemura, SideEstimates, TemperedFamily, Trace,
    TracePoint, TraceSpec,
};
pub use grid_model::{
    count_support_zeroed, evaluate_f, restrict_to_strip, Configuration, ConstraintKind,
    FactorModel, GridError, GridSpec, PartialConfiguration, Side, Strip, SupportCount,
};
pub use info_rate::{
    conditional_entropy_rate, estimate_info_rate, exact_log_p_y, log_p_y, simulate_output,
    ChannelModel, InfoRateConfig, InfoRateError, InfoRateResult, LayerPolicy, OutputSample,
};
pub use seed::SeedTree;
pub use tree_gibbs::{
    run_chain, ChainSchedule, GibbsSample, GibbsSampler, GibbsState, TargetError, TargetSpec,
};
