//! Monte Carlo estimators with reproducible, exactly mergeable accumulators.

pub mod accum;
pub mod correlation;
pub mod fit;
pub mod lyapunov;
pub mod runner;
pub mod sampling;
pub mod singular;
pub mod tails;

pub use accum::{FixedSum, Histogram};
pub use fit::{fit_power, wilson, PowerFit};
pub use runner::{run_chunks, stream_rng, Merge};
pub use sampling::{sample_mu, sample_mu_scatterer, Region, Stratification, StratifiedCounts};
pub use correlation::{correlation, CorrelationSeries, Observable};
pub use lyapunov::{lyapunov, periodic_expansion, LyapunovEstimate, PeriodicExpansion};
pub use singular::{one_step_expansion, proxy_distance, singularity_neighborhood, NeighborhoodEstimate, OneStepReport};
