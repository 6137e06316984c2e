//! Structured fit summaries and plot data.

use super::dataset::{CrossSectionPoint, ReactionClass};
use super::fit::FitResult;
use super::DiffractError;
use serde::Serialize;
use std::io::Write;

/// Curve grid: √s log-spaced over [10, 10⁴] GeV.
pub const CURVE_MIN: f64 = 10.0;
pub const CURVE_MAX: f64 = 1e4;
pub const CURVE_POINTS: usize = 61;

#[derive(Debug, Clone, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub value: f64,
    pub err_naive: f64,
    pub err_rescaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: String,
    pub params: Vec<ParamSummary>,
    pub delta_w: f64,
    #[serde(rename = "delta_L2")]
    pub delta_l2: f64,
    pub chi2_w: f64,
    pub n: usize,
    pub n_f: usize,
    pub points: Vec<super::fit::FitPoint>,
}

impl From<&FitResult> for FitSummary {
    fn from(r: &FitResult) -> Self {
        Self {
            model: r.model.name().into(),
            params: r
                .params
                .iter()
                .map(|p| ParamSummary {
                    name: p.name.clone(),
                    value: p.value,
                    err_naive: p.err_naive,
                    err_rescaled: p.err_rescaled,
                })
                .collect(),
            delta_w: r.delta_w,
            delta_l2: r.delta_l2,
            chi2_w: r.chi2_w,
            n: r.n,
            n_f: r.n_f,
            points: r.points.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub model: String,
    pub class: ReactionClass,
    pub sqrt_s: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub fits: Vec<FitSummary>,
    #[serde(skip)]
    pub curves: Vec<CurvePoint>,
}

/// Classes that appear in the fitted data; class D only if present.
fn curve_classes(r: &FitResult) -> Vec<ReactionClass> {
    let mut cls: Vec<ReactionClass> = ReactionClass::of_kind(r.model.kind())
        .iter()
        .copied()
        .filter(|c| c.k() <= 1 || r.points.iter().any(|p| p.class == *c))
        .collect();
    cls.dedup();
    cls
}

pub fn report(results: &[FitResult]) -> Result<Report, DiffractError> {
    if results.is_empty() {
        return Err(DiffractError::EmptyReport);
    }
    let mut curves = Vec::new();
    let step = (CURVE_MAX / CURVE_MIN).ln() / (CURVE_POINTS - 1) as f64;
    for r in results {
        for class in curve_classes(r) {
            for i in 0..CURVE_POINTS {
                let sqrt_s = CURVE_MIN * (step * i as f64).exp();
                curves.push(CurvePoint {
                    model: r.model.name().into(),
                    class,
                    sqrt_s,
                    predicted: r.predict(sqrt_s, class)?,
                });
            }
        }
    }
    Ok(Report {
        fits: results.iter().map(FitSummary::from).collect(),
        curves,
    })
}

impl Report {
    pub fn write_json<W: Write>(&self, w: W) -> Result<(), DiffractError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Columns: model, class, sqrt_s, predicted.
    pub fn write_curves_csv<W: Write>(&self, w: W) -> Result<(), DiffractError> {
        let mut out = csv::Writer::from_writer(w);
        for c in &self.curves {
            out.serialize(c)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Columns: experiment, kind, class, sqrt_s, value, error_down, error_up, include.
pub fn write_points_csv<W: Write>(data: &[CrossSectionPoint], w: W) -> Result<(), DiffractError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["experiment", "kind", "class", "sqrt_s", "value", "error_down", "error_up", "include"])?;
    for p in data {
        let kind = match p.kind {
            super::DiffractionKind::Single => "SD",
            super::DiffractionKind::Double => "DD",
        };
        out.write_record([
            p.experiment.clone(),
            kind.into(),
            p.class.to_string(),
            p.sqrt_s.to_string(),
            p.value.to_string(),
            p.error_down().to_string(),
            p.error_up().to_string(),
            p.include.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
