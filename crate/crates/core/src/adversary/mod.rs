//! Lower-bound constructions and the adversaries that drive trackers
//! through them.

mod flower;
mod rhombi;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventError, Trajectory};
use crate::geometry::GeometryError;
use crate::offline::{OfflineError, Violation};
use crate::online::OnlineError;

pub use flower::{
    flower, run_deterministic_adversary, DeterministicRun, Flower, TrackerFactory,
    FLOWER_CENTER_RADIUS,
};
pub use rhombi::{
    rhombi_construction, run_stateless_adversary, NearestCenterPolicy, Rhombi, StatelessPolicy,
    StatelessRun, RHOMBI_EDGES,
};
pub use tree::{interval_tree, trilateration_lb, yao_expected_cost, IntervalTree, YaoResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("construction self-check failed: {0}")]
    SelfCheck(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid stateless policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Events(#[from] EventError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error("tracker produced an invalid solution: {0}")]
    InvalidSolution(#[from] Violation),
}

/// Finite distribution over trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct TrajectoryDistribution {
    trajectories: Vec<(Trajectory, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    trajectories: Vec<RawWeighted>,
}

#[derive(Serialize, Deserialize)]
struct RawWeighted {
    probability: f64,
    samples: Vec<Vec<f64>>,
}

impl TryFrom<RawDistribution> for TrajectoryDistribution {
    type Error = AdversaryError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        let trajectories = raw
            .trajectories
            .into_iter()
            .map(|w| Ok((Trajectory::from_rows(w.samples)?, w.probability)))
            .collect::<Result<Vec<_>, AdversaryError>>()?;
        TrajectoryDistribution::new(trajectories)
    }
}

impl From<TrajectoryDistribution> for RawDistribution {
    fn from(d: TrajectoryDistribution) -> Self {
        RawDistribution {
            trajectories: d
                .trajectories
                .into_iter()
                .map(|(t, probability)| RawWeighted {
                    probability,
                    samples: t.to_rows(),
                })
                .collect(),
        }
    }
}

impl TrajectoryDistribution {
    pub fn new(trajectories: Vec<(Trajectory, f64)>) -> Result<Self, AdversaryError> {
        if trajectories.is_empty() {
            return Err(AdversaryError::Parameter(
                "distribution has no trajectories".into(),
            ));
        }
        if let Some((_, p)) = trajectories
            .iter()
            .find(|(_, p)| !(*p > 0.0) || !p.is_finite())
        {
            return Err(AdversaryError::Parameter(format!(
                "probability {p} is not positive"
            )));
        }
        let total: f64 = trajectories.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AdversaryError::Parameter(format!(
                "probabilities sum to {total}"
            )));
        }
        let dim = trajectories[0].0.dim();
        if trajectories.iter().any(|(t, _)| t.dim() != dim) {
            return Err(AdversaryError::Parameter(
                "trajectories differ in dimension".into(),
            ));
        }
        Ok(TrajectoryDistribution { trajectories })
    }

    pub fn uniform(trajectories: Vec<Trajectory>) -> Result<Self, AdversaryError> {
        let p = 1.0 / trajectories.len() as f64;
        TrajectoryDistribution::new(trajectories.into_iter().map(|t| (t, p)).collect())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Trajectory, f64)> {
        self.trajectories.iter().map(|(t, p)| (t, *p))
    }

    pub fn get(&self, i: usize) -> Option<&Trajectory> {
        self.trajectories.get(i).map(|(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn distribution_validation_and_json() {
        let t = Trajectory::unit_timed(0.0, [Point::one(0.0), Point::one(1.0)]).unwrap();
        assert!(TrajectoryDistribution::new(vec![(t.clone(), 0.5)]).is_err());
        assert!(TrajectoryDistribution::new(vec![(t.clone(), 1.5), (t.clone(), -0.5)]).is_err());
        let d = TrajectoryDistribution::uniform(vec![t.clone(), t]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(
            s,
            r#"{"trajectories":[{"probability":0.5,"samples":[[0.0,0.0],[1.0,1.0]]},{"probability":0.5,"samples":[[0.0,0.0],[1.0,1.0]]}]}"#
        );
        assert_eq!(
            serde_json::from_str::<TrajectoryDistribution>(&s).unwrap(),
            d
        );
    }
}
