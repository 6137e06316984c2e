//! Model family. Log-space models are `ln σ = x·β + offset`, with β mapped to
//! named physical parameters (σ₀ = e^{β₀}, φ = e^{β_φ}).

use super::dataset::{CrossSectionPoint, DiffractionKind, ReactionClass};
use super::DiffractError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitModel {
    SDF1,
    SDC1,
    SDF1s,
    SDF2,
    SDCln,
    SDC4,
    SDF1w1,
    SDC1w1,
    DDF1,
    DDF2,
    DDC1,
}

/// How a coefficient maps to a reported parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Exp,
}

pub const ALL_MODELS: [FitModel; 11] = [
    FitModel::SDF1,
    FitModel::SDC1,
    FitModel::SDF1s,
    FitModel::SDF2,
    FitModel::SDCln,
    FitModel::SDC4,
    FitModel::SDF1w1,
    FitModel::SDC1w1,
    FitModel::DDF1,
    FitModel::DDF2,
    FitModel::DDC1,
];

impl FitModel {
    pub fn parse(s: &str) -> Result<Self, DiffractError> {
        ALL_MODELS
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DiffractError::UnknownModel(s.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SDF1 => "SDF1",
            Self::SDC1 => "SDC1",
            Self::SDF1s => "SDF1s",
            Self::SDF2 => "SDF2",
            Self::SDCln => "SDCln",
            Self::SDC4 => "SDC4",
            Self::SDF1w1 => "SDF1w1",
            Self::SDC1w1 => "SDC1w1",
            Self::DDF1 => "DDF1",
            Self::DDF2 => "DDF2",
            Self::DDC1 => "DDC1",
        }
    }

    pub fn kind(self) -> DiffractionKind {
        match self {
            Self::DDF1 | Self::DDF2 | Self::DDC1 => DiffractionKind::Double,
            _ => DiffractionKind::Single,
        }
    }

    /// Fitted in ln σ (true) or directly in mb (SDCln).
    pub fn log_space(self) -> bool {
        self != Self::SDCln
    }

    /// Unit weights by definition (the w1 variants).
    pub fn unit_weights(self) -> bool {
        matches!(self, Self::SDF1w1 | Self::SDC1w1)
    }

    /// Exponent multiplying ln φ per unit k: 2 for SD, 4 for DD.
    pub fn phi_power(self) -> f64 {
        match self.kind() {
            DiffractionKind::Single => 2.0,
            DiffractionKind::Double => 4.0,
        }
    }

    /// Index of the single φ coefficient, if the model has one.
    pub fn phi_index(self) -> Option<usize> {
        match self {
            Self::SDF1 | Self::SDF1w1 | Self::DDF2 => Some(2),
            _ => None,
        }
    }

    /// φ enters only through a frozen offset.
    pub fn requires_frozen_phi(self) -> bool {
        self == Self::DDF1
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Self::SDF1 | Self::SDF1w1 => &["sigma0", "epsilon", "phi"],
            Self::SDC1 | Self::SDC1w1 => &["sigma0", "epsilon"],
            Self::SDF1s => &["sigma0", "epsilon", "phi0", "kappa"],
            Self::SDF2 => &["sigma0", "epsilon", "phi1", "phi2"],
            Self::SDCln => &["sigma0", "sigma1"],
            Self::SDC4 => &["sigma0", "c0", "c1", "c2", "c3"],
            Self::DDF1 | Self::DDC1 => &["sigma2", "epsilon2"],
            Self::DDF2 => &["sigma2", "epsilon2", "phi"],
        }
    }

    pub fn transforms(self) -> Vec<Transform> {
        use Transform::*;
        match self {
            Self::SDF1 | Self::SDF1w1 | Self::DDF2 => vec![Exp, Identity, Exp],
            Self::SDF1s => vec![Exp, Identity, Exp, Identity],
            Self::SDF2 => vec![Exp, Identity, Exp, Exp],
            Self::SDCln => vec![Identity, Identity],
            Self::SDC4 => vec![Exp, Identity, Identity, Identity, Identity],
            _ => vec![Exp, Identity],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    fn class_k(self, class: ReactionClass) -> Result<f64, DiffractError> {
        if class.kind() != self.kind() {
            return Err(DiffractError::ClassKindMismatch { class, kind: self.kind() });
        }
        Ok(class.k() as f64)
    }

    /// Design row at (s, class) with φ columns included.
    pub fn regressors(self, s: f64, class: ReactionClass) -> Result<Vec<f64>, DiffractError> {
        let k = self.class_k(class)?;
        let l = s.ln();
        let p = self.phi_power();
        Ok(match self {
            Self::SDF1 | Self::SDF1w1 | Self::DDF2 => vec![1.0, l, p * k],
            Self::SDC1 | Self::SDC1w1 | Self::DDF1 | Self::DDC1 => vec![1.0, l],
            Self::SDF1s => vec![1.0, l, p * k, p * k * l],
            Self::SDF2 => {
                let step = |m: f64| if k >= m { p } else { 0.0 };
                vec![1.0, l, step(1.0), step(2.0)]
            }
            Self::SDCln => vec![1.0, l],
            Self::SDC4 => vec![1.0, l, l * l, l.powi(3), l.powi(4)],
        })
    }

    /// Maps physical parameters to linear coefficients.
    pub fn coefficients(self, params: &[f64]) -> Result<Vec<f64>, DiffractError> {
        if params.len() != self.n_params() {
            return Err(DiffractError::ParameterCount {
                model: self.name().into(),
                expected: self.n_params(),
                found: params.len(),
            });
        }
        Ok(params
            .iter()
            .zip(self.transforms())
            .map(|(v, t)| match t {
                Transform::Identity => *v,
                Transform::Exp => v.ln(),
            })
            .collect())
    }
}

impl std::fmt::Display for FitModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Prediction at (√s, class) in mb. `phi_frozen` supplies φ for DDF1.
pub fn predict_at(
    m: FitModel,
    params: &[f64],
    phi_frozen: Option<f64>,
    sqrt_s: f64,
    class: ReactionClass,
) -> Result<f64, DiffractError> {
    let beta = m.coefficients(params)?;
    let x = m.regressors(sqrt_s * sqrt_s, class)?;
    let lin: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
    if !m.log_space() {
        return Ok(lin);
    }
    let offset = match (m.requires_frozen_phi(), phi_frozen) {
        (true, None) => return Err(DiffractError::MissingFrozenPhi(m.name().into())),
        (true, Some(phi)) => m.phi_power() * class.k() as f64 * phi.ln(),
        (false, _) => 0.0,
    };
    Ok((lin + offset).exp())
}

/// Prediction for a data point (2σ_SD or σ_DD, mb).
pub fn model_predict(
    m: FitModel,
    params: &[f64],
    phi_frozen: Option<f64>,
    point: &CrossSectionPoint,
) -> Result<f64, DiffractError> {
    predict_at(m, params, phi_frozen, point.sqrt_s, point.class)
}
