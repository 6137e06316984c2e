//! Stratonovich stochastic Schrödinger equation and its ensemble averages.
//!
//! A single realisation obeys
//!
//! ```text
//! dψ = −iHψ dt − i Σ_j L_j ψ ∘ dW_j,      ⟨dW_j dW_k⟩ = δ_jk γ_j dt
//! ```
//!
//! With Hermitian `L_j` the exact solution is unitary, so every trajectory keeps
//! its norm; the Heun discretisation violates this by `⅛ΔW⁴` per step. The
//! ensemble mean state obeys `dψ̃/dt = −iHψ̃ − ½ Σ γ_j L_j² ψ̃` and decays in norm
//! through phase averaging, while `ρ̃ = avg |ψ⟩⟨ψ|` follows the dephasing master
//! equation of [`crate::lindblad`].
//!
//! Trajectory `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so
//! any trajectory can be regenerated in isolation. Ensembles are reduced in
//! fixed-size chunks in index order; results do not depend on thread count.

use crate::lindblad::{self, DephasingGenerator, LindbladError};
use crate::qcore::{ComplexMatrix, DensityMatrix, DensityReport, DephasingChannel, QcoreError, StateVector, Tolerances, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// dt·γ‖L‖² above which a warning is logged.
pub const STABILITY_WARN: f64 = 0.1;
/// dt·γ‖L‖² above which the configuration is rejected.
pub const STABILITY_MAX: f64 = 1.0;
/// Trajectories per reduction chunk.
const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("channel {index} has negative rate {gamma}; backward channels are only supported by the averaged equations")]
    NegativeRate { index: usize, gamma: f64 },
    #[error("operator dimension {found} does not match state dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("n_traj must be positive")]
    NoTrajectories,
    #[error("record interval must be at least 1")]
    BadRecordInterval,
    #[error("time step {dt} is unstable (dt * max rate * |L|^2 = {product:.3})")]
    UnstableStep { dt: f64, product: f64 },
}

/// Ensemble configuration. `record_every` selects which steps are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseConfig {
    pub hamiltonian: ComplexMatrix,
    pub channels: Vec<DephasingChannel>,
    pub initial: StateVector,
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    1
}

/// 1e−3 divided by the fastest scale among ‖H‖ and γ_j‖L_j‖².
pub fn default_dt(hamiltonian: &ComplexMatrix, channels: &[DephasingChannel]) -> f64 {
    let scale = channels
        .iter()
        .map(|c| c.gamma.abs() * c.operator.hermitian_norm().powi(2))
        .fold(hamiltonian.hermitian_norm(), f64::max);
    if scale > 0.0 {
        1e-3 / scale
    } else {
        1e-3
    }
}

impl SseConfig {
    fn validate_common(&self) -> Result<(usize, f64), TrajectoryError> {
        let n = self.initial.dim();
        let defect = self.hamiltonian.hermiticity_defect();
        if defect > crate::qcore::TAU_HERM {
            return Err(QcoreError::NotHermitian { defect }.into());
        }
        if self.hamiltonian.dim() != n {
            return Err(TrajectoryError::DimensionMismatch {
                expected: n,
                found: self.hamiltonian.dim(),
            });
        }
        for ch in &self.channels {
            ch.validate(crate::qcore::TAU_HERM)?;
            if ch.dim() != n {
                return Err(TrajectoryError::DimensionMismatch {
                    expected: n,
                    found: ch.dim(),
                });
            }
        }
        if self.record_every == 0 {
            return Err(TrajectoryError::BadRecordInterval);
        }
        Ok(lindblad::step_grid(self.t_end, self.dt)?)
    }

    /// Validates for trajectory mode; returns (steps, adjusted dt).
    pub fn validate(&self) -> Result<(usize, f64), TrajectoryError> {
        let (steps, h) = self.validate_common()?;
        if self.n_traj == 0 {
            return Err(TrajectoryError::NoTrajectories);
        }
        for (index, ch) in self.channels.iter().enumerate() {
            if ch.gamma < 0.0 {
                return Err(TrajectoryError::NegativeRate {
                    index,
                    gamma: ch.gamma,
                });
            }
        }
        let product = h * self
            .channels
            .iter()
            .map(|c| c.gamma * c.operator.hermitian_norm().powi(2))
            .fold(0.0, f64::max);
        if product > STABILITY_MAX {
            return Err(TrajectoryError::UnstableStep { dt: h, product });
        }
        if product > STABILITY_WARN {
            log::warn!("dt * gamma * |L|^2 = {product:.3} exceeds {STABILITY_WARN}; expect integrator bias");
        }
        Ok((steps, h))
    }

    /// Generator of the ensemble-averaged density matrix.
    pub fn generator(&self) -> Result<DephasingGenerator, TrajectoryError> {
        Ok(DephasingGenerator::new(
            self.hamiltonian.clone(),
            self.channels.clone(),
            vec![],
        )?)
    }

    pub fn initial_density(&self) -> DensityMatrix {
        DensityMatrix::pure(&self.initial)
    }

    fn recorded_steps(&self, steps: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=steps).step_by(self.record_every).collect();
        if *out.last().unwrap() != steps {
            out.push(steps);
        }
        out
    }
}

/// States of one trajectory (or of the averaged equation) on the recorded grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl StatePath {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm()).collect()
    }
}

/// Flattened operators for the per-step update.
struct Stepper {
    n: usize,
    h_dt: Vec<C64>,
    /// (√(γ_j dt), row-major L_j) for channels with γ_j > 0.
    noise: Vec<(f64, Vec<C64>)>,
    m: Vec<C64>,
    v1: Vec<C64>,
    v2: Vec<C64>,
}

impl Stepper {
    fn new(cfg: &SseConfig, dt: f64) -> Self {
        let n = cfg.initial.dim();
        let h_dt = cfg.hamiltonian.to_row_major().into_iter().map(|z| z * dt).collect();
        let noise = cfg
            .channels
            .iter()
            .filter(|c| c.gamma > 0.0)
            .map(|c| ((c.gamma * dt).sqrt(), c.operator.to_row_major()))
            .collect();
        Self {
            n,
            h_dt,
            noise,
            m: vec![C64::new(0.0, 0.0); n * n],
            v1: vec![C64::new(0.0, 0.0); n],
            v2: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// One Heun step. With drift f = −iH, diffusion g_j = −iL_j and a shared
    /// increment the predictor–corrector collapses to ψ ← (1 − iM − ½M²)ψ with
    /// M = H dt + Σ_j L_j ΔW_j.
    fn step(&mut self, psi: &mut [C64], rng: &mut ChaCha8Rng) {
        let n = self.n;
        self.m.copy_from_slice(&self.h_dt);
        for (amp, l) in &self.noise {
            let xi: f64 = rng.sample(StandardNormal);
            let dw = amp * xi;
            for (m, l) in self.m.iter_mut().zip(l) {
                *m += l * dw;
            }
        }
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            self.v1[i] = row.iter().zip(psi.iter()).map(|(a, b)| a * b).sum();
        }
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            self.v2[i] = row.iter().zip(&self.v1).map(|(a, b)| a * b).sum();
        }
        for i in 0..n {
            psi[i] += C64::new(self.v1[i].im, -self.v1[i].re) - self.v2[i] * 0.5;
        }
    }
}

fn trajectory_rng(seed: u64, traj_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj_index);
    rng
}

/// Runs trajectory `traj_index`, calling `visit(slot, ψ)` at each recorded step.
fn run_trajectory(
    cfg: &SseConfig,
    steps: usize,
    dt: f64,
    traj_index: u64,
    mut visit: impl FnMut(usize, &[C64]),
) {
    let mut stepper = Stepper::new(cfg, dt);
    let mut rng = trajectory_rng(cfg.seed, traj_index);
    let mut psi: Vec<C64> = cfg.initial.amplitudes().iter().copied().collect();
    let mut slot = 0;
    visit(slot, &psi);
    for step in 1..=steps {
        stepper.step(&mut psi, &mut rng);
        if step % cfg.record_every == 0 || step == steps {
            slot += 1;
            visit(slot, &psi);
        }
    }
}

/// One realisation of ψ(t), reproducible from `(cfg.seed, traj_index)`.
pub fn integrate_sse_trajectory(cfg: &SseConfig, traj_index: u64) -> Result<StatePath, TrajectoryError> {
    let (steps, dt) = cfg.validate()?;
    let times = cfg.recorded_steps(steps).iter().map(|&s| s as f64 * dt).collect();
    let mut states = Vec::new();
    run_trajectory(cfg, steps, dt, traj_index, |_, psi| {
        states.push(StateVector::from_dvector(nalgebra::DVector::from_column_slice(psi)));
    });
    Ok(StatePath { times, states })
}

/// Running sums over trajectories at each recorded time.
#[derive(Clone)]
struct Moments {
    n: usize,
    psi: Vec<C64>,
    psi_sq: Vec<f64>,
    rho: Vec<C64>,
    rho_sq: Vec<f64>,
}

impl Moments {
    fn new(slots: usize, n: usize) -> Self {
        Self {
            n,
            psi: vec![C64::new(0.0, 0.0); slots * n],
            psi_sq: vec![0.0; slots * n],
            rho: vec![C64::new(0.0, 0.0); slots * n * n],
            rho_sq: vec![0.0; slots * n * n],
        }
    }

    fn add(&mut self, slot: usize, psi: &[C64]) {
        let n = self.n;
        for (i, a) in psi.iter().enumerate() {
            self.psi[slot * n + i] += a;
            self.psi_sq[slot * n + i] += a.norm_sqr();
            for (j, b) in psi.iter().enumerate() {
                let x = a * b.conj();
                let k = (slot * n + i) * n + j;
                self.rho[k] += x;
                self.rho_sq[k] += x.norm_sqr();
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.psi.iter_mut().zip(&other.psi) {
            *a += b;
        }
        for (a, b) in self.psi_sq.iter_mut().zip(&other.psi_sq) {
            *a += b;
        }
        for (a, b) in self.rho.iter_mut().zip(&other.rho) {
            *a += b;
        }
        for (a, b) in self.rho_sq.iter_mut().zip(&other.rho_sq) {
            *a += b;
        }
    }
}

/// Standard error of a sample mean from Σx and Σ|x|².
fn standard_error(sum: C64, sum_sq: f64, count: usize) -> f64 {
    if count < 2 {
        return f64::NAN;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// Ensemble averages on the recorded time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n_traj: usize,
    /// avg ψ per time.
    pub mean_state: Vec<Vec<C64>>,
    /// Standard error of each mean-state component.
    pub mean_state_stderr: Vec<Vec<f64>>,
    /// ρ̃ = avg |ψ⟩⟨ψ| per time.
    pub mean_density: Vec<ComplexMatrix>,
    /// Standard error of each ρ̃ entry, row-major per time.
    pub density_stderr: Vec<Vec<Vec<f64>>>,
}

impl EnsembleResult {
    /// Tolerances appropriate for a finite ensemble of raw outer products.
    pub fn relaxed_tolerances(&self) -> Tolerances {
        let root = (self.n_traj as f64).sqrt();
        Tolerances {
            herm: crate::qcore::TAU_HERM,
            trace: 5.0 / root,
            pos: 1e-3 / root + 1e-8,
        }
    }

    pub fn density_reports(&self) -> Vec<DensityReport> {
        let tol = self.relaxed_tolerances();
        self.mean_density
            .iter()
            .map(|rho| crate::qcore::check_density(rho, &tol))
            .collect()
    }

    /// CSV with `t` and, per entry, the real and imaginary parts of ρ̃ and the
    /// entry's standard error.
    pub fn write_csv<W: Write>(&self, writer: W, entries: &[(usize, usize)]) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for (k, i) in entries {
            header.extend([format!("re_rho{k}{i}"), format!("im_rho{k}{i}"), format!("se_rho{k}{i}")]);
        }
        w.write_record(&header)?;
        for (s, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.10e}")];
            for &(k, i) in entries {
                let z = self.mean_density[s].get(k, i);
                row.push(format!("{:.10e}", z.re));
                row.push(format!("{:.10e}", z.im));
                row.push(format!("{:.10e}", self.density_stderr[s][k][i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Averages `n_traj` trajectories. Parallel over chunks, reduced in index order.
pub fn run_ensemble(cfg: &SseConfig) -> Result<EnsembleResult, TrajectoryError> {
    let (steps, dt) = cfg.validate()?;
    let recorded = cfg.recorded_steps(steps);
    let slots = recorded.len();
    let n = cfg.initial.dim();
    let n_chunks = cfg.n_traj.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(slots, n);
            let end = ((c + 1) * CHUNK).min(cfg.n_traj);
            for traj in c * CHUNK..end {
                run_trajectory(cfg, steps, dt, traj as u64, |slot, psi| acc.add(slot, psi));
            }
            acc
        })
        .collect();
    let mut total = Moments::new(slots, n);
    for p in &partials {
        total.merge(p);
    }

    let count = cfg.n_traj;
    let inv = 1.0 / count as f64;
    let mut mean_state = Vec::with_capacity(slots);
    let mut mean_state_stderr = Vec::with_capacity(slots);
    let mut mean_density = Vec::with_capacity(slots);
    let mut density_stderr = Vec::with_capacity(slots);
    for s in 0..slots {
        let base = s * n;
        mean_state.push((0..n).map(|i| total.psi[base + i] * inv).collect());
        mean_state_stderr.push(
            (0..n)
                .map(|i| standard_error(total.psi[base + i], total.psi_sq[base + i], count))
                .collect(),
        );
        let rho = nalgebra::DMatrix::from_fn(n, n, |i, j| total.rho[(base + i) * n + j] * inv);
        mean_density.push(ComplexMatrix::from(rho));
        density_stderr.push(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let k = (base + i) * n + j;
                            standard_error(total.rho[k], total.rho_sq[k], count)
                        })
                        .collect()
                })
                .collect(),
        );
    }
    Ok(EnsembleResult {
        times: recorded.iter().map(|&s| s as f64 * dt).collect(),
        n_traj: count,
        mean_state,
        mean_state_stderr,
        mean_density,
        density_stderr,
    })
}

/// RK4 integration of dψ̃/dt = −iHψ̃ − ½ Σ γ_j L_j² ψ̃ for rates of any sign.
pub fn integrate_averaged_psi(cfg: &SseConfig) -> Result<StatePath, TrajectoryError> {
    let (steps, dt) = cfg.validate_common()?;
    let mut generator = cfg.hamiltonian.scale(C64::new(0.0, -1.0));
    let mut bound = cfg.hamiltonian.hermitian_norm();
    for ch in &cfg.channels {
        let l2 = &ch.operator * &ch.operator;
        bound += 0.5 * ch.gamma.abs() * l2.hermitian_norm();
        generator = &generator - &l2.scale_real(0.5 * ch.gamma);
    }
    let product = dt * bound;
    if product > lindblad::RK4_STABILITY_LIMIT {
        return Err(TrajectoryError::UnstableStep { dt, product });
    }
    let g = generator.inner();
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let mut psi = cfg.initial.amplitudes().clone();
    let mut times = vec![0.0];
    let mut states = vec![cfg.initial.clone()];
    for step in 1..=steps {
        let k1 = g * &psi;
        let k2 = g * (&psi + &k1 * half);
        let k3 = g * (&psi + &k2 * half);
        let k4 = g * (&psi + &k3 * full);
        psi += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        if step % cfg.record_every == 0 || step == steps {
            times.push(step as f64 * dt);
            states.push(StateVector::from_dvector(psi.clone()));
        }
    }
    Ok(StatePath { times, states })
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_traj: usize,
    pub replicates: usize,
    /// RMS over replicates of max_{t, entries} |ρ̃ − ρ_ref|.
    pub rms_max_error: f64,
    /// Error of the previous (smaller) size divided by this one.
    pub ratio_to_previous: Option<f64>,
}

fn replicate_seed(seed: u64, replicate: usize, n_traj: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_traj as u64) << 20) ^ replicate as u64 ^ (1 << 63));
    rng.random()
}

/// Ensemble error against the deterministic master equation as the number of
/// trajectories grows. Each size is run with `replicates` independent seeds.
pub fn convergence_study(
    cfg: &SseConfig,
    sizes: &[usize],
    replicates: usize,
) -> Result<Vec<ConvergenceRow>, TrajectoryError> {
    let (_, dt) = cfg.validate()?;
    let reference = lindblad::propagate_sampled(
        &cfg.generator()?,
        cfg.initial_density().matrix(),
        cfg.t_end,
        dt,
        cfg.record_every,
    )?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n_traj in sizes {
        let mut sum_sq = 0.0;
        for r in 0..replicates.max(1) {
            let run = SseConfig {
                n_traj,
                seed: replicate_seed(cfg.seed, r, n_traj),
                ..cfg.clone()
            };
            let ens = run_ensemble(&run)?;
            let err = ens
                .mean_density
                .iter()
                .zip(&reference.states)
                .map(|(a, b)| (a - b).max_abs())
                .fold(0.0, f64::max);
            sum_sq += err * err;
        }
        let rms_max_error = (sum_sq / replicates.max(1) as f64).sqrt();
        let ratio_to_previous = rows.last().map(|p| p.rms_max_error / rms_max_error);
        rows.push(ConvergenceRow {
            n_traj,
            replicates: replicates.max(1),
            rms_max_error,
            ratio_to_previous,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn plus() -> StateVector {
        let s = 1.0 / 2f64.sqrt();
        StateVector::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap()
    }

    fn dephasing_qubit(n_traj: usize, seed: u64) -> SseConfig {
        SseConfig {
            hamiltonian: ComplexMatrix::zeros(2),
            channels: vec![DephasingChannel::new(ComplexMatrix::pauli_z(), 1.0).unwrap()],
            initial: plus(),
            dt: 1e-3,
            t_end: 1.0,
            n_traj,
            seed,
            record_every: 100,
        }
    }

    fn three_level(n_traj: usize) -> SseConfig {
        let h = ComplexMatrix::from_real_rows(&[
            vec![0.0, 0.4, 0.0],
            vec![0.4, 0.5, 0.3],
            vec![0.0, 0.3, -0.2],
        ])
        .unwrap();
        let l1 = ComplexMatrix::from_diagonal(&[1.0, 0.0, -0.5]);
        let mut l2 = ComplexMatrix::zeros(3);
        l2.set(0, 2, C64::new(0.0, 0.6));
        l2.set(2, 0, C64::new(0.0, -0.6));
        l2.set(1, 1, C64::new(0.3, 0.0));
        let amps = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.64), C64::new(0.48, 0.0)];
        SseConfig {
            hamiltonian: h,
            channels: vec![
                DephasingChannel::new(l1, 0.7).unwrap(),
                DephasingChannel::new(l2, 0.5).unwrap(),
            ],
            initial: StateVector::new(amps).unwrap(),
            dt: 1e-3,
            t_end: 1.5,
            n_traj,
            seed: 99,
            record_every: 250,
        }
    }

    #[test]
    fn noiseless_trajectory_is_unitary() {
        let cfg = SseConfig {
            hamiltonian: ComplexMatrix::pauli_z(),
            channels: vec![],
            record_every: 1,
            ..dephasing_qubit(1, 0)
        };
        let path = integrate_sse_trajectory(&cfg, 0).unwrap();
        let last = path.states.last().unwrap().amplitudes();
        let s = 1.0 / 2f64.sqrt();
        // exp(−iσ_z t)|+⟩ at t = 1 up to the O(dt²) per-step Heun defect.
        assert!((last[0] - C64::new(0.0, -1.0).exp() * s).norm() < 1e-6);
        assert!((last[1] - C64::new(0.0, 1.0).exp() * s).norm() < 1e-6);
        // |1 − iλdt − ½λ²dt²| = 1 + ⅛dt⁴ + O(dt⁸) per step for λ = ±1.
        let norms = path.norms();
        for (step, norm) in norms.iter().enumerate() {
            let expected = step as f64 * cfg.dt.powi(4) / 8.0;
            assert!((norm - 1.0 - expected).abs() < 1e-14);
        }
        assert!(norms[500] - 1.0 < 1e-10);
    }

    #[test]
    fn heun_step_matches_explicit_predictor_corrector() {
        let cfg = three_level(1);
        let dt = cfg.dt;
        let mut stepper = Stepper::new(&cfg, dt);
        let mut psi: Vec<C64> = cfg.initial.amplitudes().iter().copied().collect();
        let mut rng = trajectory_rng(5, 3);
        stepper.step(&mut psi, &mut rng);

        let mut rng = trajectory_rng(5, 3);
        let dws: Vec<f64> = cfg
            .channels
            .iter()
            .map(|c| (c.gamma * dt).sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mi = C64::new(0.0, -1.0);
        let drift = |v: &DVector<C64>| cfg.hamiltonian.apply(v) * mi;
        let diffusion = |v: &DVector<C64>| {
            cfg.channels
                .iter()
                .zip(&dws)
                .fold(DVector::zeros(3), |acc, (c, dw)| acc + c.operator.apply(v) * (mi * *dw))
        };
        let psi0 = cfg.initial.amplitudes().clone();
        let re = |x: f64| C64::new(x, 0.0);
        let pred = &psi0 + drift(&psi0) * re(dt) + diffusion(&psi0);
        let next = &psi0 + (drift(&psi0) + drift(&pred)) * re(0.5 * dt) + (diffusion(&psi0) + diffusion(&pred)) * re(0.5);
        for i in 0..3 {
            assert!((psi[i] - next[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn single_trajectory_norm_grows_by_an_eighth_dw_to_the_fourth() {
        // Per step |1 − iλx − ½λ²x²|² = 1 + ¼x⁴ for λ = ±1, so the norm ratio is
        // 1 + ⅛ΔW⁴ + O(ΔW⁸) and its mean is ⅜dt².
        let cfg = SseConfig {
            record_every: 1,
            ..dephasing_qubit(1, 17)
        };
        let mut acc = 0.0;
        let mut count = 0;
        for traj in 0..20 {
            let norms = integrate_sse_trajectory(&cfg, traj).unwrap().norms();
            for w in norms.windows(2) {
                let growth = w[1] / w[0] - 1.0;
                assert!(growth >= -1e-15);
                acc += growth;
                count += 1;
            }
        }
        let mean = acc / count as f64 / (cfg.dt * cfg.dt);
        assert!((mean - 0.375).abs() < 0.03, "mean growth / dt^2 = {mean}");
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = three_level(1);
        assert_eq!(integrate_sse_trajectory(&cfg, 7).unwrap(), integrate_sse_trajectory(&cfg, 7).unwrap());
        assert_ne!(integrate_sse_trajectory(&cfg, 7).unwrap(), integrate_sse_trajectory(&cfg, 8).unwrap());
        let cfg = three_level(300);
        assert_eq!(run_ensemble(&cfg).unwrap(), run_ensemble(&cfg).unwrap());
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let cfg = three_level(200);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| run_ensemble(&cfg).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let parallel = pool.install(|| run_ensemble(&cfg).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn dephasing_qubit_ensemble_matches_closed_form() {
        let ens = run_ensemble(&dephasing_qubit(10_000, 1)).unwrap();
        for (s, t) in ens.times.iter().enumerate() {
            let expected = 0.5 * (-2.0 * t).exp();
            let got = ens.mean_density[s].get(0, 1);
            let se = ens.density_stderr[s][0][1].max(1e-12);
            assert!((got.re - expected).abs() < 3.0 * se, "t = {t}: {got} vs {expected} (se {se})");
        }
        for r in ens.density_reports() {
            assert!(r.is_valid(), "{r}");
        }
    }

    #[test]
    fn zero_rate_ensemble_is_unitary() {
        let mut cfg = three_level(8);
        for c in &mut cfg.channels {
            c.gamma = 0.0;
        }
        let ens = run_ensemble(&cfg).unwrap();
        let path = integrate_averaged_psi(&cfg).unwrap();
        for (rho, psi) in ens.mean_density.iter().zip(&path.states) {
            assert!((rho - &psi.outer()).max_abs() < 1e-6);
        }
        assert!(ens.density_stderr.last().unwrap()[0][1] < 1e-6);
    }

    #[test]
    fn averaged_psi_decays_with_l_squared_identity() {
        let cfg = SseConfig {
            channels: vec![DephasingChannel::new(ComplexMatrix::pauli_x(), 0.8).unwrap()],
            ..dephasing_qubit(1, 0)
        };
        let path = integrate_averaged_psi(&cfg).unwrap();
        for (t, psi) in path.times.iter().zip(&path.states) {
            let f = (-0.8 * t / 2.0).exp();
            for (a, a0) in psi.amplitudes().iter().zip(cfg.initial.amplitudes().iter()) {
                assert!((a - a0 * f).norm() < 1e-12);
            }
        }
        let backward = SseConfig {
            channels: vec![DephasingChannel::new(ComplexMatrix::pauli_x(), -0.8).unwrap()],
            ..cfg
        };
        let grown = integrate_averaged_psi(&backward).unwrap();
        assert!((grown.states.last().unwrap().norm() - 0.4f64.exp()).abs() < 1e-12);
        assert!(matches!(run_ensemble(&backward), Err(TrajectoryError::NegativeRate { index: 0, .. })));
    }

    #[test]
    fn mean_state_follows_averaged_equation() {
        let cfg = three_level(4000);
        let ens = run_ensemble(&cfg).unwrap();
        let path = integrate_averaged_psi(&cfg).unwrap();
        assert_eq!(ens.times.len(), path.times.len());
        for (s, psi) in path.states.iter().enumerate() {
            for i in 0..3 {
                let diff = (ens.mean_state[s][i] - psi.amplitudes()[i]).norm();
                assert!(diff < 3.0 * ens.mean_state_stderr[s][i] + 1e-3, "slot {s}, component {i}");
            }
        }
    }

    #[test]
    fn ensemble_density_follows_master_equation() {
        let cfg = three_level(4000);
        let ens = run_ensemble(&cfg).unwrap();
        let det = lindblad::propagate_sampled(&cfg.generator().unwrap(), cfg.initial_density().matrix(), cfg.t_end, cfg.dt, cfg.record_every).unwrap();
        for (s, (a, b)) in ens.mean_density.iter().zip(&det.states).enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    let se = ens.density_stderr[s][i][j];
                    assert!((a.get(i, j) - b.get(i, j)).norm() < 4.0 * se + 1e-3);
                }
            }
        }
    }

    #[test]
    fn configuration_errors() {
        let mut cfg = dephasing_qubit(0, 0);
        assert!(matches!(run_ensemble(&cfg), Err(TrajectoryError::NoTrajectories)));
        cfg.n_traj = 1;
        cfg.dt = 2.0;
        cfg.t_end = 4.0;
        assert!(matches!(run_ensemble(&cfg), Err(TrajectoryError::UnstableStep { .. })));
        cfg.dt = 1e-3;
        cfg.hamiltonian = ComplexMatrix::new(DMatrix::from_element(2, 2, C64::new(0.0, 1.0))).unwrap();
        assert!(matches!(run_ensemble(&cfg), Err(TrajectoryError::Qcore(QcoreError::NotHermitian { .. }))));
        cfg.hamiltonian = ComplexMatrix::zeros(3);
        assert!(matches!(run_ensemble(&cfg), Err(TrajectoryError::DimensionMismatch { .. })));
    }

    #[test]
    fn default_step_tracks_fastest_scale() {
        let ch = DephasingChannel::new(ComplexMatrix::pauli_z().scale_real(2.0), 0.5).unwrap();
        assert!((default_dt(&ComplexMatrix::pauli_x(), &[ch]) - 0.5e-3).abs() < 1e-15);
        assert_eq!(default_dt(&ComplexMatrix::zeros(2), &[]), 1e-3);
    }
}
