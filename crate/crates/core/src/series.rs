use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableName {
    Cos2theta,
    Cos2phi,
    Jx,
    Jy,
    Jz,
}

impl ObservableName {
    pub const ALL: [ObservableName; 5] = [Self::Cos2theta, Self::Cos2phi, Self::Jx, Self::Jy, Self::Jz];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cos2theta => "cos2theta",
            Self::Cos2phi => "cos2phi",
            Self::Jx => "jx",
            Self::Jy => "jy",
            Self::Jz => "jz",
        }
    }
}

impl fmt::Display for ObservableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservableName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| format!("unknown observable `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Spectral,
    Fdtd,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spectral => "spectral",
            Self::Fdtd => "fdtd",
        }
    }
}

/// Where a series came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub engine: Engine,
    pub molecule: String,
    pub temperature_k: f64,
    pub params: BTreeMap<String, f64>,
}

/// A named observable sampled on a dimensionless time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: ObservableName,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl ObservableSeries {
    pub fn new(name: ObservableName, times: Vec<f64>, values: Vec<f64>, meta: SeriesMeta) -> Result<Self, String> {
        let s = Self { name, times, values, meta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.times.len() != self.values.len() {
            return Err(format!("{} times but {} values", self.times.len(), self.values.len()));
        }
        if let Some(w) = self.times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(format!("times not strictly increasing at {} -> {}", w[0], w[1]));
        }
        if self.times.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err("non-finite sample".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs_deviation(&self, other: &ObservableSeries) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
