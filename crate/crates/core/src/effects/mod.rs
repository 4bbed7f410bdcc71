//! Fixed-effect averages, their variances, and network statistics.

pub mod average;
pub mod bootstrap;
pub mod clustering;
pub mod moments;
pub mod pattern;
pub mod transitivity;
pub mod variance;

pub use average::{
    average_effect, jackknifed_average, leaveout_average, plugin_average, EffectOptions, EffectResult, JackknifedAverage, Target,
};
pub use bootstrap::{bootstrap_jackknife_se, bootstrap_statistic_se, BootstrapResult};
pub use clustering::{expected_clustering, expected_clustering_from_probs};
pub use moments::{
    CustomMoment, DiscreteDifference, EvalContext, ExpectedTriangles, FittedMean, Local, MarginalEffect, Moment,
    Reciprocity, TransitivityCovariance, TriangleCount,
};
pub use pattern::LambdaPattern;
pub use transitivity::{transitivity_statistic, StatisticKind};
pub use variance::{conditional_variance, population_variance, ConditionalVariance, PopulationVariance};
