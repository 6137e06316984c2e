//! Two-level dephasing model driven by a weak transverse coupling.
//!
//! ```text
//! H = E₁|1⟩⟨1| + E₂|2⟩⟨2| + g σ_x,    L = a₁|1⟩⟨1| + a₂|2⟩⟨2|,  rate γ
//! Δω = E₂ − E₁,   Γ = ½γ(a₁ − a₂)²,   z = Γ − iΔω
//! ```
//!
//! Expanding ρ = ρ⁽⁰⁾ + gρ⁽¹⁾ + g²ρ⁽²⁾ + … from ρ(0) = |1⟩⟨1| gives the
//! hierarchy `dρ⁽ⁿ⁾/dt = L₀ρ⁽ⁿ⁾ + L₁ρ⁽ⁿ⁻¹⁾` with `L₁ρ = −i[σ_x, ρ]`, whose
//! closed-form solutions are
//!
//! ```text
//! ρ₁₂⁽¹⁾(t) = i(1 − e^{−zt})/z
//! dρ₂₂⁽²⁾/dt = 2Φ(t),  Φ(t) = ∫₀ᵗ e^{−Γs} cos(Δω s) ds = Re[(1 − e^{−zt})/z]
//! ρ₂₂⁽²⁾(t) = 2 Re[(t − (1 − e^{−zt})/z)/z]
//! ```
//!
//! For Γ > 0 the rate saturates at `Φ_γ = Γ/(Γ² + Δω²)`, which peaks at
//! Γ = |Δω| and vanishes in both the coherent and the strongly dephased limit.

use crate::lindblad::{self, DephasingGenerator, LindbladError};
use crate::qcore::{ComplexMatrix, DephasingChannel, C64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// |zt| below which closed forms switch to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DysonError {
    #[error("Γ and Δω both vanish; the saturated rate is undefined")]
    Degenerate,
    #[error("dephasing rate must be finite and non-negative (got {0})")]
    BadRate(f64),
    #[error("time must be finite and non-negative (got {0})")]
    BadTime(f64),
    #[error("expected a 2x2 matrix (got {0}x{0})")]
    NotQubit(usize),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    pub e1: f64,
    pub e2: f64,
    pub a1: f64,
    pub a2: f64,
    pub gamma: f64,
    pub g: f64,
}

impl TwoLevelModel {
    /// Model with E₁ = 0, E₂ = Δω, a = (1, 0) and γ = 2Γ.
    pub fn from_rates(dephasing: f64, delta_omega: f64, g: f64) -> Self {
        Self {
            e1: 0.0,
            e2: delta_omega,
            a1: 1.0,
            a2: 0.0,
            gamma: 2.0 * dephasing,
            g,
        }
    }

    pub fn validate(&self) -> Result<(), DysonError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(DysonError::BadRate(self.gamma));
        }
        Ok(())
    }

    pub fn delta_omega(&self) -> f64 {
        self.e2 - self.e1
    }

    /// Γ = ½γ(a₁ − a₂)²
    pub fn dephasing_rate(&self) -> f64 {
        0.5 * self.gamma * (self.a1 - self.a2).powi(2)
    }

    /// z = Γ − iΔω
    pub fn z(&self) -> C64 {
        C64::new(self.dephasing_rate(), -self.delta_omega())
    }

    pub fn is_degenerate(&self) -> bool {
        self.dephasing_rate() == 0.0 && self.delta_omega() == 0.0
    }

    /// Full generator with coupling g.
    pub fn generator(&self) -> Result<DephasingGenerator, DysonError> {
        self.validate()?;
        let h = &ComplexMatrix::from_diagonal(&[self.e1, self.e2]) + &ComplexMatrix::pauli_x().scale_real(self.g);
        let l = DephasingChannel::diagonal(&[self.a1, self.a2], self.gamma).map_err(LindbladError::from)?;
        Ok(DephasingGenerator::new(h, vec![l], vec![])?)
    }

    fn unperturbed_generator(&self) -> Result<DephasingGenerator, DysonError> {
        Self { g: 0.0, ..*self }.generator()
    }
}

fn check_time(t: f64) -> Result<(), DysonError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(DysonError::BadTime(t))
    }
}

/// Exact action of e^{L₀τ}: populations fixed, ρ₁₂ scaled by e^{−zτ}.
pub fn unperturbed_propagator(m: &TwoLevelModel, tau: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix, DysonError> {
    check_time(tau)?;
    m.validate()?;
    if rho.dim() != 2 {
        return Err(DysonError::NotQubit(rho.dim()));
    }
    let f = (-m.z() * tau).exp();
    let mut out = rho.clone();
    out.set(0, 1, rho.get(0, 1) * f);
    out.set(1, 0, rho.get(1, 0) * f.conj());
    Ok(out)
}

/// (1 − e^{−x})/x, with its series near x = 0.
fn phi1(x: C64) -> C64 {
    if x.norm() < SERIES_CUTOFF {
        C64::new(1.0, 0.0) - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        (C64::new(1.0, 0.0) - (-x).exp()) / x
    }
}

/// (x − 1 + e^{−x})/x², with its series near x = 0.
fn phi2(x: C64) -> C64 {
    if x.norm() < SERIES_CUTOFF {
        C64::new(0.5, 0.0) - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (x - C64::new(1.0, 0.0) + (-x).exp()) / (x * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrder {
    pub value: C64,
    /// Γ = Δω = 0, where the coherence grows linearly as it.
    pub degenerate: bool,
}

/// ρ₁₂⁽¹⁾(t) = i(1 − e^{−zt})/z; equals it in the degenerate limit.
pub fn first_order_coherence(m: &TwoLevelModel, t: f64) -> Result<FirstOrder, DysonError> {
    check_time(t)?;
    m.validate()?;
    let x = m.z() * t;
    Ok(FirstOrder {
        value: C64::new(0.0, t) * phi1(x),
        degenerate: m.is_degenerate(),
    })
}

/// Φ(t) = ∫₀ᵗ e^{−Γs} cos(Δω s) ds.
pub fn phi(m: &TwoLevelModel, t: f64) -> Result<f64, DysonError> {
    check_time(t)?;
    m.validate()?;
    Ok(t * phi1(m.z() * t).re)
}

/// dρ₂₂⁽²⁾/dt = 2Φ(t).
pub fn second_order_population_rate(m: &TwoLevelModel, t: f64) -> Result<f64, DysonError> {
    Ok(2.0 * phi(m, t)?)
}

/// ρ₂₂⁽²⁾(t) = 2 Re[(t − (1 − e^{−zt})/z)/z].
pub fn second_order_population(m: &TwoLevelModel, t: f64) -> Result<f64, DysonError> {
    check_time(t)?;
    m.validate()?;
    Ok(2.0 * t * t * phi2(m.z() * t).re)
}

/// Φ_γ = Γ/(Γ² + Δω²); the effective transition coupling is g²Φ_γ.
pub fn decoherence_gain(m: &TwoLevelModel) -> Result<f64, DysonError> {
    m.validate()?;
    if m.is_degenerate() {
        return Err(DysonError::Degenerate);
    }
    let gamma = m.dephasing_rate();
    let dw = m.delta_omega();
    Ok(gamma / (gamma * gamma + dw * dw))
}

/// Closed-form ρ⁽⁰⁾, ρ⁽¹⁾, ρ⁽²⁾ on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DysonTerms {
    pub times: Vec<f64>,
    pub rho0: Vec<ComplexMatrix>,
    pub rho1: Vec<ComplexMatrix>,
    pub rho2: Vec<ComplexMatrix>,
}

pub fn dyson_terms(m: &TwoLevelModel, times: &[f64]) -> Result<DysonTerms, DysonError> {
    let mut out = DysonTerms {
        times: times.to_vec(),
        rho0: Vec::new(),
        rho1: Vec::new(),
        rho2: Vec::new(),
    };
    for &t in times {
        out.rho0.push(ComplexMatrix::from_diagonal(&[1.0, 0.0]));
        let c = first_order_coherence(m, t)?.value;
        let mut r1 = ComplexMatrix::zeros(2);
        r1.set(0, 1, c);
        r1.set(1, 0, c.conj());
        out.rho1.push(r1);
        let p = second_order_population(m, t)?;
        out.rho2.push(ComplexMatrix::from_diagonal(&[-p, p]));
    }
    Ok(out)
}

/// Hierarchy orders 0–2 integrated numerically with RK4.
pub fn integrate_hierarchy(m: &TwoLevelModel, t_end: f64, dt: f64, record_every: usize) -> Result<DysonTerms, DysonError> {
    let l0 = m.unperturbed_generator()?;
    let sx = ComplexMatrix::pauli_x();
    let l1 = |r: &ComplexMatrix| {
        crate::qcore::commutator(&sx, r)
            .expect("2x2 operands")
            .scale(C64::new(0.0, -1.0))
    };
    let rhs = |s: &[ComplexMatrix; 3]| -> [ComplexMatrix; 3] {
        [
            l0.apply(&s[0]),
            &l0.apply(&s[1]) + &l1(&s[0]),
            &l0.apply(&s[2]) + &l1(&s[1]),
        ]
    };
    let axpy = |s: &[ComplexMatrix; 3], k: &[ComplexMatrix; 3], h: f64| -> [ComplexMatrix; 3] {
        std::array::from_fn(|i| &s[i] + &k[i].scale_real(h))
    };
    let (n, h) = lindblad::step_grid(t_end, dt)?;
    let mut state = [
        ComplexMatrix::from_diagonal(&[1.0, 0.0]),
        ComplexMatrix::zeros(2),
        ComplexMatrix::zeros(2),
    ];
    let mut out = DysonTerms {
        times: vec![0.0],
        rho0: vec![state[0].clone()],
        rho1: vec![state[1].clone()],
        rho2: vec![state[2].clone()],
    };
    for step in 1..=n {
        let k1 = rhs(&state);
        let k2 = rhs(&axpy(&state, &k1, 0.5 * h));
        let k3 = rhs(&axpy(&state, &k2, 0.5 * h));
        let k4 = rhs(&axpy(&state, &k3, h));
        state = std::array::from_fn(|i| {
            let incr = &(&k1[i] + &k4[i]) + &(&k2[i] + &k3[i]).scale_real(2.0);
            &state[i] + &incr.scale_real(h / 6.0)
        });
        if step % record_every.max(1) == 0 || step == n {
            out.times.push(step as f64 * h);
            out.rho0.push(state[0].clone());
            out.rho1.push(state[1].clone());
            out.rho2.push(state[2].clone());
        }
    }
    Ok(out)
}

/// Comparison of the second-order series against full propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DysonReport {
    pub g: f64,
    pub t_end: f64,
    /// max_t |ρ₂₂(t) − g²ρ₂₂⁽²⁾(t)|.
    pub max_population_deviation: f64,
    /// max_t max_entries |ρ(t) − (ρ⁽⁰⁾ + gρ⁽¹⁾ + g²ρ⁽²⁾)(t)|.
    pub hierarchy_residual: f64,
    /// Least-squares slope of the exact ρ₂₂ over [t_end/2, t_end].
    pub exact_slope: f64,
    /// 2g²Φ_γ, absent in the degenerate case.
    pub predicted_slope: Option<f64>,
    pub slope_relative_error: Option<f64>,
    /// Last recorded time up to which |ρ₂₂ − g²ρ₂₂⁽²⁾| ≤ 1% of g²ρ₂₂⁽²⁾.
    pub validity_end: f64,
}

/// Step size for propagating the full model.
fn exact_dt(gen: &DephasingGenerator) -> f64 {
    (0.05 / gen.spectral_bound().max(1e-12)).min(1e-2)
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of the exact excited population over [t_end/2, t_end].
pub fn exact_population_slope(m: &TwoLevelModel, t_end: f64) -> Result<f64, DysonError> {
    let gen = m.generator()?;
    let rho0 = ComplexMatrix::from_diagonal(&[1.0, 0.0]);
    let path = lindblad::propagate_sampled(&gen, &rho0, t_end, exact_dt(&gen), 1)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = path
        .times
        .iter()
        .zip(&path.states)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .map(|(t, r)| (*t, r.get(1, 1).re))
        .unzip();
    Ok(linear_slope(&xs, &ys))
}

pub fn dyson_vs_exact(m: &TwoLevelModel, t_end: f64) -> Result<DysonReport, DysonError> {
    check_time(t_end)?;
    let gen = m.generator()?;
    let rho_init = ComplexMatrix::from_diagonal(&[1.0, 0.0]);
    let path = lindblad::propagate_sampled(&gen, &rho_init, t_end, exact_dt(&gen), 1)?;
    let terms = dyson_terms(m, &path.times)?;
    let g = m.g;
    let mut max_population_deviation = 0.0f64;
    let mut hierarchy_residual = 0.0f64;
    let mut validity_end = 0.0;
    let mut valid = true;
    for (s, exact) in path.states.iter().enumerate() {
        let series = &(&terms.rho0[s] + &terms.rho1[s].scale_real(g)) + &terms.rho2[s].scale_real(g * g);
        hierarchy_residual = hierarchy_residual.max((exact - &series).max_abs());
        let second = g * g * terms.rho2[s].get(1, 1).re;
        let dev = (exact.get(1, 1).re - second).abs();
        max_population_deviation = max_population_deviation.max(dev);
        if valid && (second == 0.0 || dev <= 0.01 * second.abs()) {
            validity_end = path.times[s];
        } else {
            valid = false;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = path
        .times
        .iter()
        .zip(&path.states)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .map(|(t, r)| (*t, r.get(1, 1).re))
        .unzip();
    let exact_slope = if xs.len() >= 2 { linear_slope(&xs, &ys) } else { f64::NAN };
    let predicted_slope = decoherence_gain(m).ok().map(|p| 2.0 * g * g * p);
    let slope_relative_error = predicted_slope
        .filter(|p| *p != 0.0)
        .map(|p| (exact_slope - p).abs() / p.abs());
    Ok(DysonReport {
        g,
        t_end,
        max_population_deviation,
        hierarchy_residual,
        exact_slope,
        predicted_slope,
        slope_relative_error,
        validity_end,
    })
}

/// One point of a (Γ, Δω) scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub dephasing: f64,
    pub delta_omega: f64,
    pub phi_gamma: f64,
    pub exact_slope: f64,
    pub predicted_slope: f64,
}

/// Φ_γ and the exact population slope over a grid. `t_end_factor / Γ` sets
/// each propagation window; Γ must be positive.
pub fn gain_scan(dephasings: &[f64], delta_omegas: &[f64], g: f64, t_end_factor: f64) -> Result<Vec<ScanRow>, DysonError> {
    let mut rows = Vec::with_capacity(dephasings.len() * delta_omegas.len());
    for &gamma in dephasings {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(DysonError::BadRate(gamma));
        }
        for &dw in delta_omegas {
            let m = TwoLevelModel::from_rates(gamma, dw, g);
            let phi_gamma = decoherence_gain(&m)?;
            rows.push(ScanRow {
                dephasing: gamma,
                delta_omega: dw,
                phi_gamma,
                exact_slope: exact_population_slope(&m, t_end_factor / gamma)?,
                predicted_slope: 2.0 * g * g * phi_gamma,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trapezoid(f: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
        let h = t / n as f64;
        let inner: f64 = (1..n).map(|k| f(k as f64 * h)).sum();
        h * (inner + 0.5 * (f(0.0) + f(t)))
    }

    #[test]
    fn unperturbed_propagator_examples() {
        let mut rho = ComplexMatrix::from_diagonal(&[0.3, 0.7]);
        rho.set(0, 1, C64::new(1.0, 0.0));
        rho.set(1, 0, C64::new(1.0, 0.0));
        let frozen = TwoLevelModel::from_rates(0.0, 0.0, 0.0);
        assert_eq!(unperturbed_propagator(&frozen, 3.0, &rho).unwrap(), rho);
        let damped = TwoLevelModel::from_rates(1.0, 0.0, 0.0);
        let out = unperturbed_propagator(&damped, 1.0, &rho).unwrap();
        assert!((out.get(0, 1) - C64::new((-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert_eq!(out.get(1, 1), rho.get(1, 1));
        assert!(unperturbed_propagator(&damped, -1.0, &rho).is_err());
    }

    #[test]
    fn unperturbed_propagator_matches_master_equation() {
        let m = TwoLevelModel {
            e1: 0.4,
            e2: -0.9,
            a1: 0.3,
            a2: 1.2,
            gamma: 0.8,
            g: 0.0,
        };
        let mut rho = ComplexMatrix::from_diagonal(&[0.6, 0.4]);
        rho.set(0, 1, C64::new(0.2, -0.3));
        rho.set(1, 0, C64::new(0.2, 0.3));
        let path = lindblad::propagate_sampled(&m.generator().unwrap(), &rho, 2.5, 1e-3, 10_000).unwrap();
        let closed = unperturbed_propagator(&m, 2.5, &rho).unwrap();
        assert!((path.last() - &closed).max_abs() < 1e-8);
    }

    #[test]
    fn first_order_examples() {
        let m = TwoLevelModel::from_rates(1.0, 0.0, 0.0);
        assert_eq!(first_order_coherence(&m, 0.0).unwrap().value, C64::new(0.0, 0.0));
        let late = first_order_coherence(&TwoLevelModel::from_rates(1.0, 2.0, 0.0), 60.0).unwrap().value;
        let limit = C64::new(0.0, 1.0) / C64::new(1.0, -2.0);
        assert!((late - limit).norm() < 1e-15);
        let v = first_order_coherence(&m, 1.0).unwrap();
        assert!((v.value - C64::new(0.0, 1.0 - (-1.0f64).exp())).norm() < 1e-15);
        assert!(!v.degenerate);
        let d = first_order_coherence(&TwoLevelModel::from_rates(0.0, 0.0, 0.0), 2.0).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.value, C64::new(0.0, 2.0));
    }

    #[test]
    fn closed_forms_match_numerical_hierarchy() {
        let m = TwoLevelModel {
            e1: 0.0,
            e2: 1.3,
            a1: 1.0,
            a2: -0.2,
            gamma: 1.1,
            g: 0.0,
        };
        let num = integrate_hierarchy(&m, 6.0, 1e-3, 500).unwrap();
        let closed = dyson_terms(&m, &num.times).unwrap();
        for s in 0..num.times.len() {
            assert!((&num.rho1[s] - &closed.rho1[s]).max_abs() < 1e-8);
            assert!((&num.rho2[s] - &closed.rho2[s]).max_abs() < 1e-8);
            assert_eq!(num.rho1[s].get(0, 0), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn phi_examples() {
        let undamped = TwoLevelModel::from_rates(0.0, 1.7, 0.0);
        for t in [0.3, 2.0, 9.0] {
            assert!((phi(&undamped, t).unwrap() - (1.7 * t).sin() / 1.7).abs() < 1e-14);
        }
        let m = TwoLevelModel::from_rates(0.7, 2.0, 0.0);
        let limit = decoherence_gain(&m).unwrap();
        assert!((phi(&m, 80.0).unwrap() - limit).abs() < 1e-15);
        let m = TwoLevelModel::from_rates(1.0, 1.0, 0.0);
        let quad = trapezoid(|s| (-s).exp() * s.cos(), 10.0, 1_000_000);
        assert!((phi(&m, 10.0).unwrap() - quad).abs() < 1e-9);
        assert_eq!(second_order_population_rate(&m, 10.0).unwrap(), 2.0 * phi(&m, 10.0).unwrap());
    }

    #[test]
    fn gain_examples() {
        let g = |gamma, dw| decoherence_gain(&TwoLevelModel::from_rates(gamma, dw, 0.0)).unwrap();
        assert_eq!(g(1.0, 0.0), 1.0);
        assert_eq!(g(1.0, 1.0), 0.5);
        assert!((g(0.01, 1.0) - 0.01).abs() < 1e-5);
        assert!(matches!(
            decoherence_gain(&TwoLevelModel::from_rates(0.0, 0.0, 0.0)),
            Err(DysonError::Degenerate)
        ));
    }

    #[test]
    fn gain_peaks_at_detuning() {
        let dw = 2.0;
        let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 0.01).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                let fa = decoherence_gain(&TwoLevelModel::from_rates(*a, dw, 0.0)).unwrap();
                let fb = decoherence_gain(&TwoLevelModel::from_rates(*b, dw, 0.0)).unwrap();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!((best - dw).abs() < 1e-9);
        let peak = decoherence_gain(&TwoLevelModel::from_rates(dw, dw, 0.0)).unwrap();
        assert!((peak - 1.0 / (2.0 * dw)).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_has_no_deviation() {
        let r = dyson_vs_exact(&TwoLevelModel::from_rates(1.0, 2.0, 0.0), 5.0).unwrap();
        assert_eq!(r.max_population_deviation, 0.0);
        assert!(r.hierarchy_residual < 1e-12);
    }

    #[test]
    fn weak_coupling_slope_matches_saturated_gain() {
        let r = dyson_vs_exact(&TwoLevelModel::from_rates(1.0, 2.0, 1e-2), 20.0).unwrap();
        assert!(r.slope_relative_error.unwrap() < 0.01, "{r:?}");
        assert!(r.validity_end > 10.0);
    }

    #[test]
    fn hierarchy_residual_is_third_order() {
        let m = |g| TwoLevelModel::from_rates(0.8, 1.5, g);
        let big = dyson_vs_exact(&m(0.05), 5.0).unwrap().hierarchy_residual;
        let small = dyson_vs_exact(&m(0.025), 5.0).unwrap().hierarchy_residual;
        assert!(big / small >= 7.0, "ratio {}", big / small);
    }

    #[test]
    fn series_branch_is_continuous() {
        let m = TwoLevelModel::from_rates(1e-4, 2e-4, 0.0);
        for t in [4.0, 4.5, 5.0] {
            let x = m.z() * t;
            let direct = (C64::new(1.0, 0.0) - (-x).exp()) / x;
            assert!((phi1(x) - direct).norm() < 1e-12);
            let direct2 = (x - 1.0 + (-x).exp()) / (x * x);
            assert!((phi2(x) - direct2).norm() < 1e-8);
        }
    }

    #[test]
    fn scan_rows_cover_grid() {
        let rows = gain_scan(&[0.5, 1.0], &[1.0], 1e-2, 20.0).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!((r.exact_slope - r.predicted_slope).abs() < 0.01 * r.predicted_slope);
        }
        assert!(matches!(gain_scan(&[0.0], &[1.0], 1e-2, 20.0), Err(DysonError::BadRate(_))));
    }

    proptest! {
        #[test]
        fn gain_bounded_by_peak(gamma in 1e-3f64..50.0, dw in 0.05f64..10.0) {
            let p = decoherence_gain(&TwoLevelModel::from_rates(gamma, dw, 0.0)).unwrap();
            prop_assert!(p <= 1.0 / (2.0 * dw) * (1.0 + 1e-12));
            prop_assert!(p > 0.0);
        }

        #[test]
        fn second_order_population_is_non_negative(gamma in 0.0f64..5.0, dw in 0.0f64..5.0) {
            let m = TwoLevelModel::from_rates(gamma, dw, 0.0);
            for k in 0..200 {
                prop_assert!(second_order_population(&m, k as f64 * 0.05).unwrap() >= -1e-12);
            }
        }

        // Φ(t) dips below zero near Δω t = 3π/2 unless Γ ≥ |Δω|.
        #[test]
        fn second_order_population_monotone_when_overdamped(dw in 0.0f64..5.0, excess in 0.0f64..5.0) {
            let m = TwoLevelModel::from_rates(dw + excess, dw, 0.0);
            let mut prev = 0.0;
            for k in 0..200 {
                let p = second_order_population(&m, k as f64 * 0.05).unwrap();
                prop_assert!(p >= prev - 1e-12);
                prev = p;
            }
        }
    }
}
