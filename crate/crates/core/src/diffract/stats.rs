//! Direct E710 estimate and Gaussian significance of φ < 1.
//!
//! `z = (1 − φ)/σ_φ`, one-sided `p = ½ erfc(z/√2)`, two-sided `2p`.

use super::fit::FitResult;
use super::DiffractError;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E710Estimate {
    /// φ = √(N_L/N_R).
    pub phi: f64,
    /// ½ φ √((δN_L/N_L)² + (δN_R/N_R)²).
    pub sigma_phi: f64,
    /// N_R − N_L.
    pub delta_n: f64,
    /// √(N_L + N_R), the spread expected from fair counting.
    pub delta_n_std: f64,
    /// ΔN / ΔN_std.
    pub counting_z: f64,
}

pub fn e710_direct_phi(n_l: f64, n_r: f64, err_l: f64, err_r: f64) -> Result<E710Estimate, DiffractError> {
    if !(n_l > 0.0 && n_r > 0.0) {
        return Err(DiffractError::NonPositiveCounts);
    }
    let phi = (n_l / n_r).sqrt();
    let sigma_phi = 0.5 * phi * (err_l / n_l).hypot(err_r / n_r);
    let delta_n = n_r - n_l;
    let delta_n_std = (n_l + n_r).sqrt();
    Ok(E710Estimate {
        phi,
        sigma_phi,
        delta_n,
        delta_n_std,
        counting_z: delta_n / delta_n_std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullHypothesis {
    /// φ ≥ 1, tested one-sided.
    PhiGe1,
    /// φ = 1 (no class dependence), tested two-sided.
    PhiIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub z: f64,
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

impl Significance {
    pub fn p(&self, null: NullHypothesis) -> f64 {
        match null {
            NullHypothesis::PhiGe1 => self.p_one_sided,
            NullHypothesis::PhiIndependent => self.p_two_sided,
        }
    }
}

pub fn significance(phi: f64, sigma_phi: f64) -> Result<Significance, DiffractError> {
    if !(sigma_phi > 0.0) {
        return Err(DiffractError::BadUncertainty(sigma_phi));
    }
    let z = (1.0 - phi) / sigma_phi;
    let p = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    Ok(Significance {
        z,
        p_one_sided: p,
        p_two_sided: 2.0 * p,
    })
}

/// Significance under the naive and the χ²-rescaled uncertainty of φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSignificance {
    pub null: NullHypothesis,
    pub phi: f64,
    pub naive: Significance,
    pub rescaled: Significance,
}

pub fn significance_of_fit(fit: &FitResult, null: NullHypothesis) -> Result<FitSignificance, DiffractError> {
    let p = fit
        .param("phi")
        .filter(|p| !p.fixed)
        .ok_or_else(|| DiffractError::MissingPhi(fit.model.name().into()))?;
    Ok(FitSignificance {
        null,
        phi: p.value,
        naive: significance(p.value, p.err_naive)?,
        rescaled: significance(p.value, p.err_rescaled)?,
    })
}
