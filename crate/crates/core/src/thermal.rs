//! Boltzmann-weighted initial-state mixtures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::ObservableSeries;

/// Second radiation constant `hc/k` in cm·K.
pub const HC_OVER_K: f64 = 1.438_776_877;
/// Speed of light in cm/s.
pub const SPEED_OF_LIGHT_CM: f64 = 2.997_924_58e10;
pub const DEFAULT_WEIGHT_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("no state survives the weight cutoff {cutoff}")]
    EmptyEnsemble { cutoff: f64 },
    #[error("series {index} does not share the reference time grid")]
    GridMismatch { index: usize },
    #[error("{series} series but {weights} weights")]
    LengthMismatch { series: usize, weights: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSpec {
    pub name: String,
    /// Rotational constant in cm⁻¹.
    pub b_wavenumber: f64,
    /// Polarizability anisotropy in C·m²/V.
    #[serde(default)]
    pub delta_alpha: Option<f64>,
    #[serde(default = "one")]
    pub spin_weight_even: f64,
    #[serde(default = "one")]
    pub spin_weight_odd: f64,
}

fn one() -> f64 {
    1.0
}

impl MoleculeSpec {
    pub fn new(name: impl Into<String>, b_wavenumber: f64) -> Self {
        Self { name: name.into(), b_wavenumber, delta_alpha: None, spin_weight_even: 1.0, spin_weight_odd: 1.0 }
    }

    pub fn with_spin_weights(mut self, even: f64, odd: f64) -> Self {
        self.spin_weight_even = even;
        self.spin_weight_odd = odd;
        self
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.b_wavenumber.is_finite() && self.b_wavenumber > 0.0) {
            return Err(ThermalError::InvalidMolecule(format!("rotational constant {} cm^-1", self.b_wavenumber)));
        }
        let (e, o) = (self.spin_weight_even, self.spin_weight_odd);
        if !(e.is_finite() && o.is_finite() && e >= 0.0 && o >= 0.0) || e + o == 0.0 {
            return Err(ThermalError::InvalidMolecule(format!("spin weights ({e}, {o})")));
        }
        if let Some(da) = self.delta_alpha {
            if !da.is_finite() {
                return Err(ThermalError::InvalidMolecule(format!("delta_alpha {da}")));
            }
        }
        Ok(())
    }

    pub fn spin_weight(&self, l: i64) -> f64 {
        if l % 2 == 0 {
            self.spin_weight_even
        } else {
            self.spin_weight_odd
        }
    }

    /// `E_l / k` in kelvin.
    pub fn energy_kelvin(&self, l: i64) -> f64 {
        HC_OVER_K * self.b_wavenumber * (l * (l + 1)) as f64
    }

    /// `T_rev = 1/(2Bc)` in picoseconds.
    pub fn revival_period_ps(&self) -> f64 {
        1e12 / (2.0 * self.b_wavenumber * SPEED_OF_LIGHT_CM)
    }

    pub fn dimensionless_to_ps(&self, tau: f64) -> f64 {
        tau * self.revival_period_ps() / std::f64::consts::TAU
    }

    pub fn ps_to_dimensionless(&self, ps: f64) -> f64 {
        ps * std::f64::consts::TAU / self.revival_period_ps()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub l: i64,
    pub m: i64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub molecule: MoleculeSpec,
    pub temperature_k: f64,
    pub weight_cutoff: f64,
}

impl EnsembleSpec {
    pub fn new(molecule: MoleculeSpec, temperature_k: f64) -> Self {
        Self { molecule, temperature_k, weight_cutoff: DEFAULT_WEIGHT_CUTOFF }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        self.molecule.validate()?;
        if !(self.temperature_k.is_finite() && self.temperature_k > 0.0) {
            return Err(ThermalError::InvalidEnsemble(format!("temperature {} K", self.temperature_k)));
        }
        if !(self.weight_cutoff.is_finite() && (0.0..1.0).contains(&self.weight_cutoff)) {
            return Err(ThermalError::InvalidEnsemble(format!("weight cutoff {}", self.weight_cutoff)));
        }
        Ok(())
    }
}

/// The retained mixture, members in ascending flat basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<Member>,
    /// Partition function over the retained states, relative to `E = 0`.
    pub partition_function: f64,
}

impl Ensemble {
    pub fn l_max(&self) -> i64 {
        self.members.iter().map(|m| m.l).max().unwrap_or(0)
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Keeps only `m >= 0`, doubling the weight of `m > 0`. Valid for
    /// observables that are even under `φ → -φ`.
    pub fn fold_reflection(&self) -> Ensemble {
        let members = self
            .members
            .iter()
            .filter(|m| m.m >= 0)
            .map(|m| Member { weight: if m.m > 0 { 2.0 * m.weight } else { m.weight }, ..*m })
            .collect();
        Ensemble { members, partition_function: self.partition_function }
    }

    /// Every `(l, m)` has its mirror `(l, -m)` at the same weight.
    pub fn is_reflection_symmetric(&self) -> bool {
        let weights: std::collections::HashMap<(i64, i64), f64> =
            self.members.iter().map(|m| ((m.l, m.m), m.weight)).collect();
        self.members.iter().all(|m| weights.get(&(m.l, -m.m)) == Some(&m.weight))
    }

    /// A pure state, for single-member runs.
    pub fn pure(l: i64, m: i64) -> Ensemble {
        Ensemble { members: vec![Member { l, m, weight: 1.0 }], partition_function: 1.0 }
    }
}

pub fn build_ensemble(spec: &EnsembleSpec) -> Result<Ensemble, ThermalError> {
    spec.validate()?;
    let mol = &spec.molecule;
    let t = spec.temperature_k;
    let boltz = |l: i64| mol.spin_weight(l) * (-mol.energy_kelvin(l) / t).exp();
    let w_max = boltz(0).max(boltz(1));
    let g_max = mol.spin_weight_even.max(mol.spin_weight_odd);
    let threshold = spec.weight_cutoff * w_max;
    let mut shells = Vec::new();
    let mut l = 0;
    while g_max * (-mol.energy_kelvin(l) / t).exp() >= threshold {
        let w = boltz(l);
        if w > 0.0 && w >= threshold {
            shells.push((l, w));
        }
        l += 1;
    }
    if shells.is_empty() {
        return Err(ThermalError::EmptyEnsemble { cutoff: spec.weight_cutoff });
    }
    let z: f64 = shells.iter().map(|&(l, w)| (2 * l + 1) as f64 * w).sum();
    let members = shells.iter().flat_map(|&(l, w)| (-l..=l).map(move |m| Member { l, m, weight: w / z })).collect();
    Ok(Ensemble { members, partition_function: z })
}

/// Pointwise weighted sum in ascending member order.
pub fn thermal_average(series: &[ObservableSeries], weights: &[f64]) -> Result<ObservableSeries, ThermalError> {
    if series.len() != weights.len() {
        return Err(ThermalError::LengthMismatch { series: series.len(), weights: weights.len() });
    }
    let first = series.first().ok_or(ThermalError::LengthMismatch { series: 0, weights: 0 })?;
    let mut values = vec![0.0; first.len()];
    for (i, (s, &w)) in series.iter().zip(weights).enumerate() {
        if s.times != first.times || s.name != first.name {
            return Err(ThermalError::GridMismatch { index: i });
        }
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += w * v;
        }
    }
    Ok(ObservableSeries { name: first.name, times: first.times.clone(), values, meta: first.meta.clone() })
}
