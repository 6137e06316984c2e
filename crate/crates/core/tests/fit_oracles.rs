//! Brute-force oracles for the weighted least-squares fits.

use decolab::diffract::fit::weighted_deviation;
use decolab::diffract::{fit, fit_dd, shipped_dd, shipped_sd, CrossSectionPoint, FitModel, FitOptions, FitResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 200;

/// (ln s, k, ln σ, w) for included points of one kind.
fn prepared(data: &[CrossSectionPoint], kind: decolab::diffract::DiffractionKind) -> Vec<(f64, f64, f64, f64)> {
    data.iter()
        .filter(|p| p.include && p.kind == kind)
        .map(|p| (p.s().ln(), p.class.k() as f64, p.value.ln(), (p.value / p.error()).powi(2)))
        .collect()
}

fn axis(lo: f64, hi: f64) -> Vec<f64> {
    (0..GRID).map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64).collect()
}

fn spacing(a: &[f64]) -> f64 {
    a[1] - a[0]
}

/// δ_w of ln σ̂ = a + εL + power·k·ln φ, computed without the library.
fn delta_w(pts: &[(f64, f64, f64, f64)], a: f64, eps: f64, power_ln_phi: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(l, k, y, w) in pts {
        let r = a + eps * l + k * power_ln_phi - y;
        num += w * r * r;
        den += w;
    }
    (num / den).sqrt()
}

struct GridMin {
    value: f64,
    arg: [f64; 3],
}

fn grid_search(pts: &[(f64, f64, f64, f64)], s0: &[f64], eps: &[f64], phi: &[f64], power: f64) -> GridMin {
    let mut best = GridMin {
        value: f64::INFINITY,
        arg: [0.0; 3],
    };
    for &s in s0 {
        let a = s.ln();
        for &e in eps {
            for &f in phi {
                let v = delta_w(pts, a, e, power * f.ln());
                if v < best.value {
                    best = GridMin { value: v, arg: [s, e, f] };
                }
            }
        }
    }
    best
}

fn value(r: &FitResult, name: &str) -> f64 {
    r.param(name).unwrap().value
}

fn assert_brackets(r: &FitResult, grid: &GridMin, names: [&str; 3], axes: [&[f64]; 3], cells: f64) {
    // Least squares is the exact minimiser: no grid node can beat it.
    assert!(grid.value >= r.delta_w - 1e-12, "grid {} < fit {}", grid.value, r.delta_w);
    for ((name, ax), g) in names.iter().zip(axes).zip(grid.arg) {
        if ax.len() == 1 {
            continue;
        }
        let v = value(r, name);
        assert!(
            (v - g).abs() <= cells * spacing(ax),
            "{name}: fit {v} vs grid {g} (spacing {})",
            spacing(ax)
        );
    }
}

#[test]
fn sdf1_grid_search_brackets_least_squares() {
    let sd = shipped_sd();
    let r = fit(FitModel::SDF1, &sd, FitOptions::default()).unwrap();
    let pts = prepared(&sd, decolab::diffract::DiffractionKind::Single);
    let (s0, eps, phi) = (axis(2.5, 5.0), axis(0.05, 0.12), axis(0.80, 1.00));
    let g = grid_search(&pts, &s0, &eps, &phi, 2.0);
    assert_brackets(&r, &g, ["sigma0", "epsilon", "phi"], [&s0, &eps, &phi], 3.0);
    assert!(g.value - r.delta_w < 1e-3 * r.delta_w);
    let lib = weighted_deviation(FitModel::SDF1, &g.arg, &sd, FitOptions::default()).unwrap();
    assert!((lib - g.value).abs() < 1e-12);
}

#[test]
fn ddf2_grid_search_brackets_least_squares() {
    let dd = shipped_dd();
    let r = fit_dd(FitModel::DDF2, &dd, None).unwrap();
    let pts = prepared(&dd, decolab::diffract::DiffractionKind::Double);
    let (s0, eps, phi) = (axis(0.5, 4.0), axis(0.0, 0.25), axis(0.70, 1.10));
    let g = grid_search(&pts, &s0, &eps, &phi, 4.0);
    assert_brackets(&r, &g, ["sigma2", "epsilon2", "phi"], [&s0, &eps, &phi], 3.0);
}

#[test]
fn two_parameter_grids() {
    let sd = shipped_sd();
    let dd = shipped_dd();
    let cases: [(FitModel, &[CrossSectionPoint], Option<f64>, [&str; 2], f64, [f64; 4]); 3] = [
        (FitModel::SDC1, &sd, None, ["sigma0", "epsilon"], 2.0, [3.0, 7.0, 0.02, 0.08]),
        (FitModel::DDC1, &dd, None, ["sigma2", "epsilon2"], 4.0, [0.1, 1.5, 0.05, 0.3]),
        (FitModel::DDF1, &dd, Some(0.881), ["sigma2", "epsilon2"], 4.0, [0.5, 4.0, 0.0, 0.2]),
    ];
    for (m, data, phi, names, power, [a, b, c, d]) in cases {
        let r = fit(m, data, FitOptions { weights: None, phi_frozen: phi }).unwrap();
        let pts = prepared(data, m.kind());
        let (s0, eps) = (axis(a, b), axis(c, d));
        let fixed = [phi.unwrap_or(1.0)];
        let g = grid_search(&pts, &s0, &eps, &fixed, power);
        assert!(g.value >= r.delta_w - 1e-12, "{m}");
        for (name, (ax, gv)) in names.iter().zip([(&s0, g.arg[0]), (&eps, g.arg[1])]) {
            assert!((value(&r, name) - gv).abs() <= 2.0 * spacing(ax), "{m} {name}");
        }
    }
}

/// Fit-space objective Σ w r² for arbitrary coefficients.
fn objective(m: FitModel, data: &[CrossSectionPoint], beta: &[f64]) -> f64 {
    data.iter()
        .filter(|p| p.include && p.kind == m.kind())
        .map(|p| {
            let x = m.regressors(p.s(), p.class).unwrap();
            let lin: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let (y, w) = if m.log_space() {
                (p.value.ln(), (p.value / p.error()).powi(2))
            } else {
                (p.value, p.error().powi(-2))
            };
            w * (lin - y).powi(2)
        })
        .sum()
}

#[test]
fn higher_order_models_are_local_minima() {
    let sd = shipped_sd();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in [FitModel::SDF1s, FitModel::SDF2, FitModel::SDC4, FitModel::SDCln] {
        let r = fit(m, &sd, FitOptions::default()).unwrap();
        let best = objective(m, &sd, &r.coefficients);
        for _ in 0..2000 {
            let scale = 10f64.powi(rng.random_range(-6..-1));
            let trial: Vec<f64> = r
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, b)| b + scale * rng.random_range(-1.0..1.0) * r.covariance_naive[i][i].sqrt())
                .collect();
            assert!(objective(m, &sd, &trial) >= best * (1.0 - 1e-12), "{m}");
        }
    }
}
