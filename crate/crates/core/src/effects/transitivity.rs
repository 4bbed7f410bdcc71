//! Jackknifed specification tests for dyadic independence.

use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::jackknife::LeaveOutEstimates;
use crate::scalar::Scalar;

use super::average::{average_effect, EffectOptions, EffectResult, Target};
use super::moments::{Moment, Reciprocity, TransitivityCovariance, TriangleCount};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `(1/(N(N−1))) Σ (Y_ij − p̂_ij) S_ij`, `S_ij = (1/(N−2)) Σ_k Y_ik Y_kj`.
    #[default]
    CovarianceForm,
    /// Observed minus expected transitive triangles.
    TriangleCountForm,
    /// `S_ij = Y_ji`.
    Reciprocity,
}

impl StatisticKind {
    pub fn moment<T: Scalar>(self) -> Box<dyn Moment<T>> {
        match self {
            StatisticKind::CovarianceForm => Box::new(TransitivityCovariance::default()),
            StatisticKind::TriangleCountForm => Box::new(TriangleCount::default()),
            StatisticKind::Reciprocity => Box::new(Reciprocity::default()),
        }
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "covariance" | "covariance_form" | "transitivity" => Ok(StatisticKind::CovarianceForm),
            "triangle_count" | "triangle_count_form" | "triangles" => Ok(StatisticKind::TriangleCountForm),
            "reciprocity" => Ok(StatisticKind::Reciprocity),
            other => Err(format!("unknown statistic {other:?}")),
        }
    }
}

/// Plug-in and jackknifed statistic, studentized by the conditional
/// (outcome-noise) standard error.
pub fn transitivity_statistic<T: Scalar>(
    est: &LeaveOutEstimates<T>,
    data: &NetworkData<T>,
    kind: StatisticKind,
    jobs: usize,
) -> Result<EffectResult<T>> {
    let family = est.full.family;
    if !family.is_binary() {
        return Err(Error::UnsupportedFamily {
            family: family.name(),
            operation: "transitivity statistic",
        });
    }
    let opts = EffectOptions {
        target: Target::Conditional,
        jobs,
        allow_large: false,
    };
    average_effect(est, kind.moment::<T>().as_ref(), data, &opts)
}
