//! Weighted linear least squares in the model's fit space, solved by QR of
//! `√W X`.
//!
//! ```text
//! δ_w  = √(Σ wᵢ rᵢ² / Σ wᵢ),   rᵢ = ln σ̂ᵢ − ln σᵢ,   wᵢ = (σᵢ/δσᵢ)²
//! δ_L2 = √(Σ (σ̂ᵢ − σᵢ)² / n)
//! χ²_w = Σ wᵢ rᵢ² / (n − n_f)
//! ```
//!
//! The naive covariance is `(XᵀWX)⁻¹` for inverse-variance weights and
//! `(XᵀX)⁻¹ · RSS/(n − n_f)` for unit weights; the rescaled covariance is
//! `(XᵀWX)⁻¹ · χ²_w` in both cases.

use super::dataset::{included, CrossSectionPoint, ReactionClass};
use super::model::{FitModel, Transform};
use super::DiffractError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative pivot size below which the design counts as rank-deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// w = (σ/δσ)² in log space, 1/δσ² in linear space.
    Inverse,
    Unit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `None` uses the model's own convention.
    pub weights: Option<WeightMode>,
    pub phi_frozen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub err_naive: f64,
    pub err_rescaled: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub experiment: String,
    pub class: ReactionClass,
    pub sqrt_s: f64,
    pub value: f64,
    pub error: f64,
    pub weight: f64,
    pub predicted: f64,
    /// Fit-space residual: ln σ̂ − ln σ, or σ̂ − σ for linear models.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub weights: WeightMode,
    pub phi_frozen: Option<f64>,
    pub params: Vec<ParamEstimate>,
    /// Free linear coefficients β.
    pub coefficients: Vec<f64>,
    pub covariance_naive: Vec<Vec<f64>>,
    pub covariance_rescaled: Vec<Vec<f64>>,
    pub delta_w: f64,
    #[serde(rename = "delta_L2")]
    pub delta_l2: f64,
    pub chi2_w: f64,
    pub n: usize,
    pub n_f: usize,
    pub points: Vec<FitPoint>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&ParamEstimate> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Physical parameter values in model order, frozen ones included.
    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    pub fn predict(&self, sqrt_s: f64, class: ReactionClass) -> Result<f64, DiffractError> {
        super::model::predict_at(self.model, &self.values(), self.phi_frozen, sqrt_s, class)
    }
}

struct Design {
    x: DMatrix<f64>,
    y: DVector<f64>,
    offset: DVector<f64>,
    w: DVector<f64>,
    /// Column of the full model removed by freezing.
    frozen_column: Option<usize>,
}

fn resolve(m: FitModel, opts: &FitOptions) -> Result<(WeightMode, Option<f64>), DiffractError> {
    let weights = opts.weights.unwrap_or(if m.unit_weights() { WeightMode::Unit } else { WeightMode::Inverse });
    if let Some(phi) = opts.phi_frozen {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(DiffractError::BadFrozenPhi(phi));
        }
        if m.phi_index().is_none() && !m.requires_frozen_phi() {
            return Err(DiffractError::CannotFreeze(m.name().into()));
        }
    } else if m.requires_frozen_phi() {
        return Err(DiffractError::MissingFrozenPhi(m.name().into()));
    }
    Ok((weights, opts.phi_frozen))
}

fn point_weight(m: FitModel, mode: WeightMode, p: &CrossSectionPoint) -> f64 {
    match (mode, m.log_space()) {
        (WeightMode::Unit, _) => 1.0,
        (WeightMode::Inverse, true) => (p.value / p.error()).powi(2),
        (WeightMode::Inverse, false) => p.error().powi(-2),
    }
}

fn design(
    m: FitModel,
    pts: &[&CrossSectionPoint],
    mode: WeightMode,
    phi_frozen: Option<f64>,
) -> Result<Design, DiffractError> {
    let frozen_column = phi_frozen.and(m.phi_index());
    let n_cols = m.n_params() - usize::from(frozen_column.is_some());
    let mut x = DMatrix::zeros(pts.len(), n_cols);
    let mut offset = DVector::zeros(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let row = m.regressors(p.s(), p.class)?;
        let mut c = 0;
        for (j, v) in row.iter().enumerate() {
            if Some(j) == frozen_column {
                offset[i] = v * phi_frozen.unwrap().ln();
            } else {
                x[(i, c)] = *v;
                c += 1;
            }
        }
        if m.requires_frozen_phi() {
            offset[i] = m.phi_power() * p.class.k() as f64 * phi_frozen.unwrap().ln();
        }
    }
    let y = DVector::from_iterator(
        pts.len(),
        pts.iter().map(|p| if m.log_space() { p.value.ln() } else { p.value }),
    );
    let w = DVector::from_iterator(pts.len(), pts.iter().map(|p| point_weight(m, mode, p)));
    Ok(Design {
        x,
        y,
        offset,
        w,
        frozen_column,
    })
}

/// Fits `m` to the included points of its kind.
pub fn fit(m: FitModel, data: &[CrossSectionPoint], opts: FitOptions) -> Result<FitResult, DiffractError> {
    let (mode, phi_frozen) = resolve(m, &opts)?;
    let pts = included(data, m.kind());
    let d = design(m, &pts, mode, phi_frozen)?;
    let (n, n_f) = (d.x.nrows(), d.x.ncols());
    if n <= n_f {
        return Err(DiffractError::TooFewPoints { n, n_f });
    }
    let sw = d.w.map(f64::sqrt);
    let a = DMatrix::from_fn(n, n_f, |i, j| sw[i] * d.x[(i, j)]);
    let b = (&d.y - &d.offset).component_mul(&sw);
    let qr = a.qr();
    let r = qr.r();
    let scale = (0..n_f).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..n_f).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return Err(DiffractError::RankDeficient(m.name().into()));
    }
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| DiffractError::RankDeficient(m.name().into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(n_f, n_f))
        .ok_or_else(|| DiffractError::RankDeficient(m.name().into()))?;
    let base = &r_inv * r_inv.transpose();

    let fitted = &d.x * &beta + &d.offset;
    let resid = &fitted - &d.y;
    let wrss: f64 = resid.iter().zip(d.w.iter()).map(|(r, w)| w * r * r).sum();
    let dof = (n - n_f) as f64;
    let chi2_w = wrss / dof;
    let naive = match mode {
        WeightMode::Inverse => base.clone(),
        WeightMode::Unit => &base * chi2_w,
    };
    let rescaled = &base * chi2_w;

    let predicted: Vec<f64> = fitted.iter().map(|v| if m.log_space() { v.exp() } else { *v }).collect();
    let log_w: Vec<f64> = pts.iter().map(|p| point_weight(m, mode, p)).collect();
    let log_w: Vec<f64> = if m.log_space() {
        log_w
    } else {
        // δ_w always refers to log residuals with log-space weights.
        pts.iter().map(|p| point_weight(FitModel::SDF1, mode, p)).collect()
    };
    let delta_w = {
        let num: f64 = pts
            .iter()
            .zip(&predicted)
            .zip(&log_w)
            .map(|((p, pr), w)| w * (pr.ln() - p.value.ln()).powi(2))
            .sum();
        (num / log_w.iter().sum::<f64>()).sqrt()
    };
    let delta_l2 = (pts.iter().zip(&predicted).map(|(p, pr)| (pr - p.value).powi(2)).sum::<f64>() / n as f64).sqrt();

    let transforms = m.transforms();
    let mut params = Vec::with_capacity(m.n_params());
    let mut c = 0;
    for (j, name) in m.param_names().iter().enumerate() {
        if Some(j) == d.frozen_column {
            params.push(ParamEstimate {
                name: (*name).into(),
                value: phi_frozen.unwrap(),
                err_naive: 0.0,
                err_rescaled: 0.0,
                fixed: true,
            });
            continue;
        }
        let (v, en, er) = (beta[c], naive[(c, c)].sqrt(), rescaled[(c, c)].sqrt());
        let value = match transforms[j] {
            Transform::Identity => v,
            Transform::Exp => v.exp(),
        };
        let jac = match transforms[j] {
            Transform::Identity => 1.0,
            Transform::Exp => value,
        };
        params.push(ParamEstimate {
            name: (*name).into(),
            value,
            err_naive: jac * en,
            err_rescaled: jac * er,
            fixed: false,
        });
        c += 1;
    }

    let points = pts
        .iter()
        .enumerate()
        .map(|(i, p)| FitPoint {
            experiment: p.experiment.clone(),
            class: p.class,
            sqrt_s: p.sqrt_s,
            value: p.value,
            error: p.error(),
            weight: d.w[i],
            predicted: predicted[i],
            residual: resid[i],
        })
        .collect();
    let to_rows = |mat: &DMatrix<f64>| (0..n_f).map(|i| (0..n_f).map(|j| mat[(i, j)]).collect()).collect();
    Ok(FitResult {
        model: m,
        weights: mode,
        phi_frozen,
        params,
        coefficients: beta.iter().copied().collect(),
        covariance_naive: to_rows(&naive),
        covariance_rescaled: to_rows(&rescaled),
        delta_w,
        delta_l2,
        chi2_w,
        n,
        n_f,
        points,
    })
}

/// Double-diffractive fit; DDF1 needs `phi_frozen`.
pub fn fit_dd(m: FitModel, data: &[CrossSectionPoint], phi_frozen: Option<f64>) -> Result<FitResult, DiffractError> {
    fit(m, data, FitOptions { weights: None, phi_frozen })
}

/// δ_w of arbitrary parameters for a log-space model; the objective the fit
/// minimises, exposed for brute-force checks.
pub fn weighted_deviation(
    m: FitModel,
    params: &[f64],
    data: &[CrossSectionPoint],
    opts: FitOptions,
) -> Result<f64, DiffractError> {
    let (mode, phi_frozen) = resolve(m, &opts)?;
    let pts = included(data, m.kind());
    let (mut num, mut den) = (0.0, 0.0);
    for p in pts {
        let w = point_weight(FitModel::SDF1, mode, p);
        let pr = super::model::model_predict(m, params, phi_frozen, p)?;
        num += w * (pr.ln() - p.value.ln()).powi(2);
        den += w;
    }
    Ok((num / den).sqrt())
}
