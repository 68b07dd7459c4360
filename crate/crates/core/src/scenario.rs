//! JSON scenario documents: regions plus a trajectory or a distribution of
//! trajectories, and the coverage requirement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::TrajectoryDistribution;
use crate::events::Trajectory;
use crate::geometry::{check_region_set, GeometryError, Region};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version '{0}' (expected \"1\")")]
    Version(String),
    #[error("declared dimension {declared} but regions have dimension {found}")]
    Dimension { declared: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("coverage must be at least 1")]
    Coverage,
    #[error("scenario has no {0}")]
    Missing(&'static str),
    #[error("trajectory index {index} out of range ({len} trajectories)")]
    Index { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: String,
    pub dimension: usize,
    #[serde(default = "one")]
    pub coverage: usize,
    pub regions: Vec<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<TrajectoryDistribution>,
}

fn one() -> usize {
    1
}

impl ScenarioFile {
    pub fn new(regions: Vec<Region>, coverage: usize) -> Result<Self, ScenarioError> {
        let dimension = check_region_set(&regions)?;
        Ok(ScenarioFile {
            schema_version: SCHEMA_VERSION.into(),
            dimension,
            coverage,
            regions,
            trajectory: None,
            distribution: None,
        })
    }

    pub fn with_trajectory(mut self, t: Trajectory) -> Self {
        self.trajectory = Some(t);
        self
    }

    pub fn with_distribution(mut self, d: TrajectoryDistribution) -> Self {
        self.distribution = Some(d);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: ScenarioFile = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(self.schema_version.clone()));
        }
        if self.coverage == 0 {
            return Err(ScenarioError::Coverage);
        }
        let found = check_region_set(&self.regions)?;
        if found != self.dimension {
            return Err(ScenarioError::Dimension {
                declared: self.dimension,
                found,
            });
        }
        let trajectories = self.trajectory.iter().chain(
            self.distribution
                .iter()
                .flat_map(|d| d.iter().map(|(t, _)| t)),
        );
        for t in trajectories {
            if t.dim() != self.dimension {
                return Err(GeometryError::DimensionMismatch {
                    expected: self.dimension,
                    found: t.dim(),
                }
                .into());
            }
        }
        Ok(())
    }

    /// The single trajectory, or trajectory `index` of the distribution.
    pub fn trajectory_at(&self, index: Option<usize>) -> Result<&Trajectory, ScenarioError> {
        match (index, &self.trajectory, &self.distribution) {
            (None, Some(t), _) => Ok(t),
            (Some(i), _, Some(d)) => d.get(i).ok_or(ScenarioError::Index {
                index: i,
                len: d.len(),
            }),
            (None, None, Some(d)) if d.len() == 1 => Ok(d.get(0).expect("one trajectory")),
            (None, None, Some(_)) => Err(ScenarioError::Missing(
                "single trajectory; pick one with an index",
            )),
            (Some(_), _, None) => Err(ScenarioError::Missing("distribution")),
            (None, None, None) => Err(ScenarioError::Missing("trajectory")),
        }
    }
}
