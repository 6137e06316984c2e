use crate::manifest::Recorder;
use crate::usage;
use anyhow::Result;
use decolab::diffract::dataset::{self, DiffractionKind};
use decolab::diffract::report::{report, write_points_csv};
use decolab::diffract::stats::{significance_of_fit, FitSignificance, NullHypothesis};
use decolab::diffract::{fit, FitModel, FitOptions, FitResult, WeightMode};
use serde::Serialize;
use std::path::PathBuf;

fn parse_model(s: &str) -> Result<FitModel, String> {
    FitModel::parse(s).map_err(|e| e.to_string())
}

fn parse_freeze(s: &str) -> Result<f64, String> {
    let v = s.strip_prefix("phi=").ok_or("expected phi=VALUE")?;
    v.parse::<f64>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
enum Weights {
    Inv,
    Unit,
}

#[derive(clap::Args)]
pub struct Args {
    /// SDF1, SDC1, SDF1s, SDF2, SDCln, SDC4, SDF1w1, SDC1w1, DDF1, DDF2 or DDC1.
    #[arg(long, value_parser = parse_model)]
    model: FitModel,
    /// Dataset CSV [default: the shipped compilation for the model's kind].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Freeze the decoherence factor, e.g. phi=0.881.
    #[arg(long, value_parser = parse_freeze)]
    freeze: Option<f64>,
    /// Weighting [default: the model's own].
    #[arg(long, value_enum)]
    weights: Option<Weights>,
    #[arg(long, default_value = "out/fit")]
    out: PathBuf,
}

#[derive(Serialize)]
struct Config {
    model: FitModel,
    data: Option<String>,
    dataset_sha256: String,
    freeze: Option<f64>,
    weights: Option<Weights>,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    summary: decolab::diffract::report::FitSummary,
    weights: WeightMode,
    phi_frozen: Option<f64>,
    covariance_naive: &'a [Vec<f64>],
    covariance_rescaled: &'a [Vec<f64>],
    significance: Vec<FitSignificance>,
}

pub fn run(a: Args) -> Result<()> {
    let (points, bytes) = match &a.data {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| usage(format!("reading {}: {e}", p.display())))?;
            let pts = dataset::parse_dataset(bytes.as_slice()).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            (pts, bytes)
        }
        None => {
            let text = match a.model.kind() {
                DiffractionKind::Single => dataset::SD_CSV,
                DiffractionKind::Double => dataset::DD_CSV,
            };
            (dataset::parse_dataset(text.as_bytes())?, text.as_bytes().to_vec())
        }
    };
    let config = Config {
        model: a.model,
        data: a.data.as_ref().map(|p| p.display().to_string()),
        dataset_sha256: crate::manifest::sha256_hex(&bytes),
        freeze: a.freeze,
        weights: a.weights,
    };
    let mut rec = Recorder::new("fit", &a.out, &config, None)?;
    rec.dataset(config.dataset_sha256.clone());
    if let Some(p) = &a.data {
        rec.input(p)?;
    }
    let opts = FitOptions {
        weights: a.weights.map(|w| match w {
            Weights::Inv => WeightMode::Inverse,
            Weights::Unit => WeightMode::Unit,
        }),
        phi_frozen: a.freeze,
    };
    let r: FitResult = fit(a.model, &points, opts).map_err(|e| match e {
        decolab::diffract::DiffractError::MissingFrozenPhi(_)
        | decolab::diffract::DiffractError::CannotFreeze(_)
        | decolab::diffract::DiffractError::BadFrozenPhi(_) => usage(e.to_string()),
        other => other.into(),
    })?;
    let significance = [NullHypothesis::PhiGe1, NullHypothesis::PhiIndependent]
        .into_iter()
        .filter_map(|n| significance_of_fit(&r, n).ok())
        .collect();
    let out = FitOutput {
        summary: (&r).into(),
        weights: r.weights,
        phi_frozen: r.phi_frozen,
        covariance_naive: &r.covariance_naive,
        covariance_rescaled: &r.covariance_rescaled,
        significance,
    };
    rec.write("fit.json", &serde_json::to_vec_pretty(&out)?)?;
    let rep = report(std::slice::from_ref(&r))?;
    let mut curves = Vec::new();
    rep.write_curves_csv(&mut curves)?;
    rec.write("curves.csv", &curves)?;
    let mut pts = Vec::new();
    write_points_csv(&points, &mut pts)?;
    rec.write("points.csv", &pts)?;
    let m = rec.finish()?;
    for p in &r.params {
        println!(
            "{:>8} = {:.5} ± {:.5} (naive) ± {:.5} (rescaled){}",
            p.name,
            p.value,
            p.err_naive,
            p.err_rescaled,
            if p.fixed { " [fixed]" } else { "" }
        );
    }
    println!(
        "delta_w = {:.2}%  delta_L2 = {:.3} mb  chi2_w = {:.3}  n = {}  n_f = {}",
        100.0 * r.delta_w,
        r.delta_l2,
        r.chi2_w,
        r.n,
        r.n_f
    );
    println!("wrote {}", m.display());
    Ok(())
}
