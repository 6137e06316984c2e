//! Deterministic dephasing master equation with signed rates.
//!
//! ```text
//! dρ/dt = −i[H, ρ] − ½ Σ_j γ_j [L_j, [L_j, ρ]] − ½ Σ_β γ^B_β [L^B_β, [L^B_β, ρ]]
//! ```
//!
//! With every operator diagonal in one basis the coherence ρ_ki decays as
//! `exp(−Γ^tot_ki t)` (modulo the unitary rotation), where
//!
//! ```text
//! Γ_ki   = ½ Σ_j γ_j (a_j^k − a_j^i)²
//! Γ^B_ki = ½ Σ_β γ^B_β (b_β^k − b_β^i)²
//! Γ^tot  = Γ + Γ^B
//! ```
//!
//! Bath rates come from a sampled correlation function,
//! `γ^B = 2 ∫₀^∞ Re C(τ) dτ` and `η^B = 2 ∫₀^∞ Im C(τ) dτ`.

use crate::qcore::{
    double_commutator, ComplexMatrix, DensityMatrix, DephasingChannel, QcoreError, C64,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Minimum eigenvalue below which propagation with backward channels stops.
pub const POSITIVITY_HALT: f64 = -1e-3;
/// Maximum off-diagonal magnitude for an operator to count as diagonal.
pub const DIAGONAL_TOL: f64 = 1e-10;
/// Relative tail magnitude a bath correlation must decay below.
pub const BATH_TAIL_TOL: f64 = 1e-6;
/// Largest dt·(spectral bound) accepted by the RK4 stepper.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error("operator dimension {found} does not match Hamiltonian dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bath channel {index} has negative rate {gamma}")]
    NegativeBathRate { index: usize, gamma: f64 },
    #[error("time step must be finite and positive (got {0})")]
    InvalidStep(f64),
    #[error("end time must be finite and non-negative (got {0})")]
    InvalidEndTime(f64),
    #[error("step {dt} exceeds the RK4 stability region (dt * bound = {product:.3})")]
    UnstableStep { dt: f64, product: f64 },
    #[error("channel {index} is not diagonal (off-diagonal defect {defect:.3e})")]
    NonDiagonal { index: usize, defect: f64 },
    #[error("bath correlation does not decay: |C(end)| = {tail:.3e}, |C(0)| = {head:.3e}")]
    NonDecayingTail { tail: f64, head: f64 },
    #[error("bath correlation C(0) must be real (imaginary part {0:.3e})")]
    ComplexZeroLag(f64),
    #[error("bath correlation needs at least two samples and a positive spacing")]
    BadSampling,
    #[error("record interval must be at least 1")]
    BadRecordInterval,
}

/// Hamiltonian plus stochastic (any-sign) and bath (non-negative) channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingGenerator {
    pub hamiltonian: ComplexMatrix,
    pub channels: Vec<DephasingChannel>,
    #[serde(default)]
    pub bath: Vec<DephasingChannel>,
}

impl DephasingGenerator {
    pub fn new(
        hamiltonian: ComplexMatrix,
        channels: Vec<DephasingChannel>,
        bath: Vec<DephasingChannel>,
    ) -> Result<Self, LindbladError> {
        let gen = Self {
            hamiltonian,
            channels,
            bath,
        };
        gen.validate()?;
        Ok(gen)
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let defect = self.hamiltonian.hermiticity_defect();
        if defect > crate::qcore::TAU_HERM {
            return Err(QcoreError::NotHermitian { defect }.into());
        }
        let n = self.dim();
        for ch in self.channels.iter().chain(&self.bath) {
            ch.validate(crate::qcore::TAU_HERM)?;
            if ch.dim() != n {
                return Err(LindbladError::DimensionMismatch {
                    expected: n,
                    found: ch.dim(),
                });
            }
        }
        for (index, b) in self.bath.iter().enumerate() {
            if b.gamma < 0.0 {
                return Err(LindbladError::NegativeBathRate {
                    index,
                    gamma: b.gamma,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Stochastic channels followed by bath channels.
    pub fn all_channels(&self) -> impl Iterator<Item = &DephasingChannel> {
        self.channels.iter().chain(&self.bath)
    }

    pub fn has_backward_channels(&self) -> bool {
        self.channels.iter().any(|c| c.gamma < 0.0)
    }

    /// Upper bound on the magnitude of the generator's eigenvalues.
    pub fn spectral_bound(&self) -> f64 {
        let h = self.hamiltonian.hermitian_norm();
        let d: f64 = self
            .all_channels()
            .map(|c| 2.0 * c.gamma.abs() * c.operator.hermitian_norm().powi(2))
            .sum();
        2.0 * h + d
    }

    /// Applies the generator once.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        Liouvillian::new(self).apply(rho.inner()).into()
    }
}

/// Precomputed operator products for repeated generator application.
struct Liouvillian {
    h: DMatrix<C64>,
    terms: Vec<(f64, DMatrix<C64>, DMatrix<C64>)>,
}

impl Liouvillian {
    fn new(gen: &DephasingGenerator) -> Self {
        let terms = gen
            .all_channels()
            .filter(|c| c.gamma != 0.0)
            .map(|c| {
                let l = c.operator.inner().clone();
                let l2 = &l * &l;
                (c.gamma, l, l2)
            })
            .collect();
        Self {
            h: gen.hamiltonian.inner().clone(),
            terms,
        }
    }

    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mi = C64::new(0.0, -1.0);
        let mut out = (&self.h * rho - rho * &self.h) * mi;
        for (gamma, l, l2) in &self.terms {
            let lrl = l * rho * l;
            let dc = l2 * rho + rho * l2 - lrl * C64::new(2.0, 0.0);
            out -= dc * C64::new(0.5 * gamma, 0.0);
        }
        out
    }

    fn rk4_step(&self, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
        let half = C64::new(0.5 * h, 0.0);
        let full = C64::new(h, 0.0);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * half));
        let k3 = self.apply(&(rho + &k2 * half));
        let k4 = self.apply(&(rho + &k3 * full));
        rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
    }
}

/// Why a propagation stopped before `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    pub time: f64,
    pub min_eigenvalue: f64,
}

/// Recorded states of a propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPath {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub halted: Option<Halt>,
}

impl DensityPath {
    pub fn last(&self) -> &ComplexMatrix {
        self.states.last().expect("path holds the initial state")
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(crate::qcore::von_neumann_entropy)
            .collect()
    }

    pub fn purities(&self) -> Vec<f64> {
        self.states.iter().map(crate::qcore::purity).collect()
    }

    /// Re Tr(Hρ) along the path.
    pub fn energies(&self, h: &ComplexMatrix) -> Vec<f64> {
        self.states
            .iter()
            .map(|rho| (h.inner() * rho.inner()).trace().re)
            .collect()
    }

    /// CSV with columns `t`, `re_rho{k}{i}`, `im_rho{k}{i}` per entry, then
    /// `entropy`, `purity`, `energy`.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        entries: &[(usize, usize)],
        hamiltonian: &ComplexMatrix,
    ) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for (k, i) in entries {
            header.push(format!("re_rho{k}{i}"));
            header.push(format!("im_rho{k}{i}"));
        }
        header.extend(["entropy", "purity", "energy"].map(String::from));
        w.write_record(&header)?;
        let (ent, pur, en) = (self.entropies(), self.purities(), self.energies(hamiltonian));
        for (n, (t, rho)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![format!("{t:.10e}")];
            for &(k, i) in entries {
                row.push(format!("{:.10e}", rho.get(k, i).re));
                row.push(format!("{:.10e}", rho.get(k, i).im));
            }
            row.push(format!("{:.10e}", ent[n]));
            row.push(format!("{:.10e}", pur[n]));
            row.push(format!("{:.10e}", en[n]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of RK4 steps and the adjusted step so that `n·h = t_end` exactly.
pub fn step_grid(t_end: f64, dt: f64) -> Result<(usize, f64), LindbladError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LindbladError::InvalidStep(dt));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(LindbladError::InvalidEndTime(t_end));
    }
    let n = (t_end / dt).round() as usize;
    if n == 0 {
        return Ok((0, 0.0));
    }
    Ok((n, t_end / n as f64))
}

/// Integrates the master equation from `rho0` to `t_end`, recording every step.
pub fn propagate(
    gen: &DephasingGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    dt: f64,
) -> Result<DensityPath, LindbladError> {
    propagate_sampled(gen, rho0.matrix(), t_end, dt, 1)
}

/// As [`propagate`], recording every `record_every`-th step plus the final
/// state. The initial matrix is not validated as a density matrix so that
/// generic operators (e.g. single coherences) can be propagated linearly.
pub fn propagate_sampled(
    gen: &DephasingGenerator,
    rho0: &ComplexMatrix,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<DensityPath, LindbladError> {
    gen.validate()?;
    if rho0.dim() != gen.dim() {
        return Err(LindbladError::DimensionMismatch {
            expected: gen.dim(),
            found: rho0.dim(),
        });
    }
    if record_every == 0 {
        return Err(LindbladError::BadRecordInterval);
    }
    let (n, h) = step_grid(t_end, dt)?;
    let product = h * gen.spectral_bound();
    if product > RK4_STABILITY_LIMIT {
        return Err(LindbladError::UnstableStep { dt: h, product });
    }
    let watch_positivity = gen.has_backward_channels();
    let liou = Liouvillian::new(gen);
    let mut rho = rho0.inner().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut halted = None;
    for step in 1..=n {
        rho = liou.rk4_step(&rho, h);
        let t = step as f64 * h;
        let current = ComplexMatrix::new(rho.clone())?;
        if watch_positivity {
            let min_eigenvalue = current.hermitian_eigenvalues()[0];
            if min_eigenvalue < POSITIVITY_HALT {
                log::warn!("positivity lost at t = {t:.4e} (min eigenvalue {min_eigenvalue:.3e}); halting");
                times.push(t);
                states.push(current);
                halted = Some(Halt {
                    time: t,
                    min_eigenvalue,
                });
                break;
            }
        }
        if step % record_every == 0 || step == n {
            times.push(t);
            states.push(current);
        }
    }
    Ok(DensityPath {
        times,
        states,
        halted,
    })
}

/// Real symmetric matrix of pairwise dephasing rates with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub values: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![vec![0.0; dim]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k][i]
    }

    fn add_channel(&mut self, amplitudes: &[f64], gamma: f64) {
        let n = self.dim();
        for k in 0..n {
            for i in 0..n {
                let d = amplitudes[k] - amplitudes[i];
                self.values[k][i] += 0.5 * gamma * d * d;
            }
        }
    }

    pub fn sum(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Self { values }
    }
}

/// Stochastic, bath and total rate matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSplit {
    pub stochastic: RateMatrix,
    pub bath: RateMatrix,
    pub total: RateMatrix,
}

/// Rates from diagonal amplitude vectors directly.
pub fn rates_from_amplitudes(dim: usize, channels: &[(Vec<f64>, f64)]) -> RateMatrix {
    let mut g = RateMatrix::zeros(dim);
    for (a, gamma) in channels {
        g.add_channel(a, *gamma);
    }
    g
}

fn amplitude_list(
    channels: &[DephasingChannel],
    dim: usize,
    offset: usize,
) -> Result<Vec<(Vec<f64>, f64)>, LindbladError> {
    channels
        .iter()
        .enumerate()
        .map(|(j, ch)| {
            if ch.dim() != dim {
                return Err(LindbladError::DimensionMismatch {
                    expected: dim,
                    found: ch.dim(),
                });
            }
            ch.diagonal_amplitudes(DIAGONAL_TOL)
                .map(|a| (a, ch.gamma))
                .ok_or(LindbladError::NonDiagonal {
                    index: offset + j,
                    defect: ch.operator.off_diagonal_defect(),
                })
        })
        .collect()
}

/// Γ, Γ^B and Γ^tot for channels diagonal in the computational basis.
/// Channel indices in errors count stochastic channels first, then bath.
pub fn diagonal_rates(
    channels: &[DephasingChannel],
    bath: &[DephasingChannel],
) -> Result<RateSplit, LindbladError> {
    let dim = channels
        .first()
        .or(bath.first())
        .map(|c| c.dim())
        .unwrap_or(0);
    let stochastic = rates_from_amplitudes(dim, &amplitude_list(channels, dim, 0)?);
    let bath = rates_from_amplitudes(dim, &amplitude_list(bath, dim, channels.len())?);
    let total = stochastic.sum(&bath);
    Ok(RateSplit {
        stochastic,
        bath,
        total,
    })
}

/// Uniformly sampled bath correlation C(τ_n), τ_n = n·dtau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathCorrelation {
    pub samples: Vec<C64>,
    pub dtau: f64,
}

impl BathCorrelation {
    pub fn from_fn(dtau: f64, n: usize, f: impl Fn(f64) -> C64) -> Self {
        Self {
            samples: (0..n).map(|k| f(k as f64 * dtau)).collect(),
            dtau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathRates {
    pub gamma: f64,
    pub eta: f64,
    /// γ^B came out negative.
    pub negative_warning: bool,
}

/// γ^B = 2∫Re C and η^B = 2∫Im C by the trapezoid rule.
pub fn bath_rates(corr: &BathCorrelation) -> Result<BathRates, LindbladError> {
    let c = &corr.samples;
    if c.len() < 2 || !(corr.dtau.is_finite() && corr.dtau > 0.0) {
        return Err(LindbladError::BadSampling);
    }
    let head = c[0].norm();
    if c[0].im.abs() > 1e-10 * head.max(1.0) {
        return Err(LindbladError::ComplexZeroLag(c[0].im));
    }
    let tail = c[c.len() - 1].norm();
    if tail > BATH_TAIL_TOL * head {
        return Err(LindbladError::NonDecayingTail { tail, head });
    }
    let interior: C64 = c[1..c.len() - 1].iter().sum();
    let integral = (interior + (c[0] + c[c.len() - 1]) * 0.5) * corr.dtau;
    let gamma = 2.0 * integral.re;
    let negative_warning = gamma < 0.0;
    if negative_warning {
        log::warn!("bath correlation integrates to a negative rate {gamma:.3e}");
    }
    Ok(BathRates {
        gamma,
        eta: 2.0 * integral.im,
        negative_warning,
    })
}

/// Energy-conservation diagnostics of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Frobenius norm of [H, L_j] per channel (stochastic, then bath).
    pub commutator_norms: Vec<f64>,
    /// ‖Σ_j γ_j [L_j, [L_j, H]]‖ over all channels.
    pub adjoint_residual: f64,
    /// Same residual restricted to γ > 0 and to γ < 0.
    pub positive_residual: f64,
    pub negative_residual: f64,
    /// max_t |Tr(Hρ(t)) − Tr(Hρ(0))| along the propagated path.
    pub energy_drift: f64,
    pub mixed_signs: bool,
    /// The combined residual vanishes while a sign subset does not.
    pub subset_caveat: bool,
}

/// Tolerance below which an adjoint residual counts as zero.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn energy_conservation_check(
    gen: &DephasingGenerator,
    rho0: &DensityMatrix,
    t_end: f64,
    dt: f64,
) -> Result<EnergyReport, LindbladError> {
    gen.validate()?;
    let h = &gen.hamiltonian;
    let mut commutator_norms = Vec::new();
    let mut pos = ComplexMatrix::zeros(gen.dim());
    let mut neg = ComplexMatrix::zeros(gen.dim());
    for ch in gen.all_channels() {
        commutator_norms.push(crate::qcore::commutator(h, &ch.operator)?.frobenius_norm());
        let term = double_commutator(&ch.operator, h)?.scale_real(ch.gamma);
        if ch.gamma > 0.0 {
            pos = &pos + &term;
        } else if ch.gamma < 0.0 {
            neg = &neg + &term;
        }
    }
    let adjoint_residual = (&pos + &neg).frobenius_norm();
    let positive_residual = pos.frobenius_norm();
    let negative_residual = neg.frobenius_norm();
    let mixed_signs = gen.all_channels().any(|c| c.gamma > 0.0) && gen.all_channels().any(|c| c.gamma < 0.0);
    let subset_caveat = mixed_signs
        && adjoint_residual < RESIDUAL_TOL
        && (positive_residual >= RESIDUAL_TOL || negative_residual >= RESIDUAL_TOL);

    let path = propagate(gen, rho0, t_end, dt)?;
    let energies = path.energies(h);
    let e0 = energies[0];
    let energy_drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    Ok(EnergyReport {
        commutator_norms,
        adjoint_residual,
        positive_residual,
        negative_residual,
        energy_drift,
        mixed_signs,
        subset_caveat,
    })
}
