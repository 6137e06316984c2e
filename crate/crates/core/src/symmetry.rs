//! CP and CPT constraints on dephasing generators over a labelled basis.
//!
//! Basis states are matter (p), antimatter (p̄) or neutral (o) and carry an
//! involution k ↦ k̄ with ō = o. In that basis CP acts as the permutation
//! `X_ij ↦ X_{ī j̄}` and CPT as the permutation followed by complex
//! conjugation. Pairing channel j with j̄ (`a_j̄^k = a_j^k̄`), invariance of the
//! generator requires
//!
//! ```text
//! CP:  γ_j = γ_j̄   ⇒  Γ_ki =  Γ_k̄ī
//! CPT: γ_j = −γ_j̄  ⇒  Γ_ki = −Γ_k̄ī,   Γ_oo' = 0
//! ```
//!
//! The bath part always satisfies `Γ^B_ki = Γ^B_k̄ī`, so under CPT the totals of
//! a matter–neutral and an antimatter–neutral coherence split as
//! `Γ^B ± Γ`, and the decoherence factor is `φ = (Γ^B − Γ)/(Γ^B + Γ)`.

use crate::lindblad::{self, DephasingGenerator, RateMatrix};
use crate::qcore::{ComplexMatrix, DephasingChannel, QcoreError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Amplitude tolerance when matching a channel to its conjugate partner.
pub const PAIRING_TOL: f64 = 1e-12;
/// Tolerance for rate and Hamiltonian residuals in a verdict.
pub const VERDICT_TOL: f64 = 1e-10;
/// Off-block magnitude accepted as zero.
pub const BLOCK_TOL: f64 = 1e-9;
/// Relative eigenvalue gap below which levels count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("conjugation map is not an involution at index {0}")]
    NotInvolution(usize),
    #[error("conjugation index {0} out of range")]
    OutOfRange(usize),
    #[error("state {0} is neutral but not a fixed point of conjugation")]
    NeutralNotFixed(usize),
    #[error("state {index} maps to state {image} of incompatible species")]
    SpeciesMismatch { index: usize, image: usize },
    #[error("dimension mismatch: basis has {basis} states, operator has {operator}")]
    DimensionMismatch { basis: usize, operator: usize },
    #[error("channel {0} has no conjugate partner")]
    UnpairedChannel(usize),
    #[error("channel {index} is not diagonal in the labelled basis")]
    NonDiagonal { index: usize },
    #[error("pairing is not an involution at channel {0}")]
    BadPairing(usize),
    #[error("Γ^B + Γ must be positive (got {0})")]
    NonPositiveDenominator(f64),
    #[error("bath rate must be non-negative (got {0})")]
    NegativeBath(f64),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Matter,
    Antimatter,
    Neutral,
    /// Composite state holding both matter and antimatter.
    Mixed,
}

impl Species {
    fn conjugate(self) -> Self {
        match self {
            Species::Matter => Species::Antimatter,
            Species::Antimatter => Species::Matter,
            other => other,
        }
    }

    fn combine(self, other: Self) -> Self {
        use Species::*;
        match (self, other) {
            (Neutral, s) | (s, Neutral) => s,
            (Matter, Matter) => Matter,
            (Antimatter, Antimatter) => Antimatter,
            _ => Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisLabel {
    pub name: String,
    pub species: Species,
}

/// Basis states with species tags and the conjugation involution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledBasis {
    pub labels: Vec<BasisLabel>,
    pub conjugate: Vec<usize>,
}

impl LabelledBasis {
    pub fn new(labels: Vec<BasisLabel>, conjugate: Vec<usize>) -> Result<Self, SymmetryError> {
        let b = Self { labels, conjugate };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        let n = self.labels.len();
        if self.conjugate.len() != n {
            return Err(SymmetryError::DimensionMismatch {
                basis: n,
                operator: self.conjugate.len(),
            });
        }
        for (k, &kb) in self.conjugate.iter().enumerate() {
            if kb >= n {
                return Err(SymmetryError::OutOfRange(kb));
            }
            if self.conjugate[kb] != k {
                return Err(SymmetryError::NotInvolution(k));
            }
            let s = self.labels[k].species;
            if s == Species::Neutral && kb != k {
                return Err(SymmetryError::NeutralNotFixed(k));
            }
            let image = self.labels[kb].species;
            let compatible = match s {
                Species::Mixed => image == Species::Mixed,
                _ => image == s.conjugate(),
            };
            if !compatible {
                return Err(SymmetryError::SpeciesMismatch { index: k, image: kb });
            }
        }
        Ok(())
    }

    /// `pairs` matter states p_i, their antimatter partners, then `neutrals`
    /// neutral states.
    pub fn single(pairs: usize, neutrals: usize) -> Self {
        let mut labels = Vec::new();
        for i in 0..pairs {
            labels.push(BasisLabel {
                name: format!("p{i}"),
                species: Species::Matter,
            });
        }
        for i in 0..pairs {
            labels.push(BasisLabel {
                name: format!("pbar{i}"),
                species: Species::Antimatter,
            });
        }
        for i in 0..neutrals {
            labels.push(BasisLabel {
                name: format!("o{i}"),
                species: Species::Neutral,
            });
        }
        let conjugate = (0..2 * pairs + neutrals)
            .map(|k| match k {
                k if k < pairs => k + pairs,
                k if k < 2 * pairs => k - pairs,
                k => k,
            })
            .collect();
        Self { labels, conjugate }
    }

    /// Product basis |qr⟩ with conjugation (q, r) ↦ (q̄, r̄).
    pub fn product(&self, other: &Self) -> Self {
        let m = other.dim();
        let mut labels = Vec::with_capacity(self.dim() * m);
        let mut conjugate = Vec::with_capacity(self.dim() * m);
        for (q, lq) in self.labels.iter().enumerate() {
            for (r, lr) in other.labels.iter().enumerate() {
                labels.push(BasisLabel {
                    name: format!("{} {}", lq.name, lr.name),
                    species: lq.species.combine(lr.species),
                });
                conjugate.push(self.conjugate[q] * m + other.conjugate[r]);
            }
        }
        Self { labels, conjugate }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn species(&self, k: usize) -> Species {
        self.labels[k].species
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryKind {
    Cp,
    Cpt,
}

/// CP (unitary permutation) or CPT (permutation then conjugation); phases +1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryTransform {
    pub kind: SymmetryKind,
    pub permutation: Vec<usize>,
}

impl SymmetryTransform {
    pub fn new(kind: SymmetryKind, basis: &LabelledBasis) -> Self {
        Self {
            kind,
            permutation: basis.conjugate.clone(),
        }
    }
}

/// S X S⁻¹ in the labelled basis.
pub fn apply_transform(t: &SymmetryTransform, x: &ComplexMatrix) -> Result<ComplexMatrix, SymmetryError> {
    let n = t.permutation.len();
    if x.dim() != n {
        return Err(SymmetryError::DimensionMismatch {
            basis: n,
            operator: x.dim(),
        });
    }
    let p = &t.permutation;
    let permuted = nalgebra::DMatrix::from_fn(n, n, |i, j| x.get(p[i], p[j]));
    let out = ComplexMatrix::from(permuted);
    Ok(match t.kind {
        SymmetryKind::Cp => out,
        SymmetryKind::Cpt => out.conjugate(),
    })
}

/// One pure-dephasing channel by its diagonal amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyChannel {
    pub amplitudes: Vec<f64>,
    pub gamma: f64,
}

/// Channels with an explicit conjugate pairing j ↦ j̄.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFamily {
    pub channels: Vec<FamilyChannel>,
    pub partner: Vec<usize>,
}

impl ChannelFamily {
    /// Checks that the pairing is an involution and that partner amplitudes
    /// are the conjugation image of each other.
    pub fn validate(&self, basis: &LabelledBasis) -> Result<(), SymmetryError> {
        if self.partner.len() != self.channels.len() {
            return Err(SymmetryError::BadPairing(self.partner.len().min(self.channels.len())));
        }
        for (j, &jb) in self.partner.iter().enumerate() {
            if jb >= self.channels.len() || self.partner[jb] != j {
                return Err(SymmetryError::BadPairing(j));
            }
            let a = &self.channels[j].amplitudes;
            if a.len() != basis.dim() {
                return Err(SymmetryError::DimensionMismatch {
                    basis: basis.dim(),
                    operator: a.len(),
                });
            }
            let ab = &self.channels[jb].amplitudes;
            if (0..a.len()).any(|k| (ab[k] - a[basis.conjugate[k]]).abs() > PAIRING_TOL) {
                return Err(SymmetryError::BadPairing(j));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.channels.first().map_or(0, |c| c.amplitudes.len())
    }

    pub fn to_channels(&self) -> Vec<DephasingChannel> {
        self.channels
            .iter()
            .map(|c| DephasingChannel {
                operator: ComplexMatrix::from_diagonal(&c.amplitudes),
                gamma: c.gamma,
            })
            .collect()
    }

    /// Γ_ki = ½ Σ_j γ_j (a_j^k − a_j^i)².
    pub fn rates(&self) -> RateMatrix {
        let list: Vec<(Vec<f64>, f64)> = self.channels.iter().map(|c| (c.amplitudes.clone(), c.gamma)).collect();
        lindblad::rates_from_amplitudes(self.dim(), &list)
    }
}

fn conjugated(a: &[f64], basis: &LabelledBasis) -> Vec<f64> {
    (0..a.len()).map(|k| a[basis.conjugate[k]]).collect()
}

/// Random family obeying the pairing rule of `kind` exactly.
///
/// CP: pairs with arbitrary amplitudes and a shared signed rate, plus one
/// self-conjugate channel. CPT: each pair is anchored on matter states with
/// γ ≥ 0 and its conjugate carries −γ.
pub fn build_constrained_family(basis: &LabelledBasis, kind: SymmetryKind, seed: u64) -> ChannelFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.dim();
    let n_pairs = rng.random_range(1..=3);
    let mut channels = Vec::new();
    let mut partner = Vec::new();
    for _ in 0..n_pairs {
        let (a, gamma) = match kind {
            SymmetryKind::Cp => {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                (a, rng.random_range(-1.0..1.0))
            }
            SymmetryKind::Cpt => {
                let a: Vec<f64> = (0..n)
                    .map(|k| match basis.species(k) {
                        Species::Matter => rng.random_range(-1.0..1.0),
                        _ => 0.0,
                    })
                    .collect();
                (a, rng.random_range(0.0..1.0))
            }
        };
        let ab = conjugated(&a, basis);
        let gb = match kind {
            SymmetryKind::Cp => gamma,
            SymmetryKind::Cpt => -gamma,
        };
        let j = channels.len();
        channels.push(FamilyChannel { amplitudes: a, gamma });
        channels.push(FamilyChannel {
            amplitudes: ab,
            gamma: gb,
        });
        partner.extend([j + 1, j]);
    }
    if kind == SymmetryKind::Cp {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sym: Vec<f64> = (0..n).map(|k| 0.5 * (raw[k] + raw[basis.conjugate[k]])).collect();
        partner.push(channels.len());
        channels.push(FamilyChannel {
            amplitudes: sym,
            gamma: rng.random_range(-1.0..1.0),
        });
    }
    ChannelFamily { channels, partner }
}

/// Per-channel pairing residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResidual {
    pub index: usize,
    pub partner: usize,
    /// |γ_j − γ_j̄| under CP, |γ_j + γ_j̄| under CPT.
    pub residual: f64,
    pub bath: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryVerdict {
    pub kind: SymmetryKind,
    /// max |S(H) − H|.
    pub hamiltonian_residual: f64,
    pub channels: Vec<ChannelResidual>,
    /// Indices (stochastic first, then bath) whose residual exceeds tolerance.
    pub violations: Vec<usize>,
    pub pass: bool,
}

fn pair_channels(amps: &[Vec<f64>], basis: &LabelledBasis, offset: usize) -> Result<Vec<usize>, SymmetryError> {
    let mut partner = vec![usize::MAX; amps.len()];
    for j in 0..amps.len() {
        if partner[j] != usize::MAX {
            continue;
        }
        let target = conjugated(&amps[j], basis);
        let matches = |c: &Vec<f64>| c.iter().zip(&target).all(|(x, y)| (x - y).abs() <= PAIRING_TOL);
        let found = if matches(&amps[j]) {
            Some(j)
        } else {
            (0..amps.len()).find(|&c| c != j && partner[c] == usize::MAX && matches(&amps[c]))
        };
        let c = found.ok_or(SymmetryError::UnpairedChannel(offset + j))?;
        partner[j] = c;
        partner[c] = j;
    }
    Ok(partner)
}

/// Checks S(H) = H and the rate pairing rule. Bath channels must obey the CP
/// rule under either kind.
pub fn check_generator_symmetry(
    t: &SymmetryTransform,
    basis: &LabelledBasis,
    gen: &DephasingGenerator,
) -> Result<SymmetryVerdict, SymmetryError> {
    basis.validate()?;
    if gen.dim() != basis.dim() {
        return Err(SymmetryError::DimensionMismatch {
            basis: basis.dim(),
            operator: gen.dim(),
        });
    }
    let hamiltonian_residual = (&apply_transform(t, &gen.hamiltonian)? - &gen.hamiltonian).max_abs();
    let amplitudes = |chs: &[DephasingChannel], offset: usize| -> Result<Vec<Vec<f64>>, SymmetryError> {
        chs.iter()
            .enumerate()
            .map(|(j, c)| {
                c.diagonal_amplitudes(lindblad::DIAGONAL_TOL)
                    .ok_or(SymmetryError::NonDiagonal { index: offset + j })
            })
            .collect()
    };
    let mut residuals = Vec::new();
    let groups: [(&[DephasingChannel], usize, bool); 2] =
        [(&gen.channels, 0, false), (&gen.bath, gen.channels.len(), true)];
    for (chs, offset, bath) in groups {
        let partner = pair_channels(&amplitudes(chs, offset)?, basis, offset)?;
        for (j, &jb) in partner.iter().enumerate() {
            let (g, gb) = (chs[j].gamma, chs[jb].gamma);
            let residual = if bath || t.kind == SymmetryKind::Cp {
                (g - gb).abs()
            } else {
                (g + gb).abs()
            };
            residuals.push(ChannelResidual {
                index: offset + j,
                partner: offset + jb,
                residual,
                bath,
            });
        }
    }
    let violations: Vec<usize> = residuals
        .iter()
        .filter(|r| r.residual > VERDICT_TOL)
        .map(|r| r.index)
        .collect();
    let pass = violations.is_empty() && hamiltonian_residual <= VERDICT_TOL;
    Ok(SymmetryVerdict {
        kind: t.kind,
        hamiltonian_residual,
        channels: residuals,
        violations,
        pass,
    })
}

/// Totals for a matter–neutral coherence and its antimatter image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalRateSplit {
    pub stochastic: f64,
    pub bath: f64,
    pub matter_total: f64,
    pub antimatter_total: f64,
    /// Antimatter total is negative (Γ > Γ^B under CPT).
    pub negative_total: bool,
}

/// (Γ^B + Γ, Γ^B ± Γ) for scalar rates; CP gives equal totals.
pub fn split_totals(kind: SymmetryKind, bath: f64, stochastic: f64) -> Result<TotalRateSplit, SymmetryError> {
    if bath < 0.0 {
        return Err(SymmetryError::NegativeBath(bath));
    }
    let antimatter_total = match kind {
        SymmetryKind::Cp => bath + stochastic,
        SymmetryKind::Cpt => bath - stochastic,
    };
    if antimatter_total < 0.0 {
        log::warn!("antimatter total rate {antimatter_total:.3e} is negative");
    }
    Ok(TotalRateSplit {
        stochastic,
        bath,
        matter_total: bath + stochastic,
        antimatter_total,
        negative_total: antimatter_total < 0.0,
    })
}

/// Rates of the coherences (q, o) and (q̄, o) from explicit families.
pub fn total_rate_split(
    family: &ChannelFamily,
    bath_family: &ChannelFamily,
    basis: &LabelledBasis,
    pair: (usize, usize),
) -> Result<TotalRateSplit, SymmetryError> {
    family.validate(basis)?;
    bath_family.validate(basis)?;
    if let Some(c) = bath_family.channels.iter().find(|c| c.gamma < 0.0) {
        return Err(SymmetryError::NegativeBath(c.gamma));
    }
    let (q, o) = pair;
    let (qb, ob) = (basis.conjugate[q], basis.conjugate[o]);
    let g = family.rates();
    let b = bath_family.rates();
    let matter_total = g.get(q, o) + b.get(q, o);
    let antimatter_total = g.get(qb, ob) + b.get(qb, ob);
    if antimatter_total < 0.0 {
        log::warn!("antimatter total rate {antimatter_total:.3e} is negative");
    }
    Ok(TotalRateSplit {
        stochastic: g.get(q, o),
        bath: b.get(q, o),
        matter_total,
        antimatter_total,
        negative_total: antimatter_total < 0.0,
    })
}

/// φ = (Γ^B − Γ)/(Γ^B + Γ).
pub fn phi_factor(bath: f64, stochastic: f64) -> Result<f64, SymmetryError> {
    let den = bath + stochastic;
    if !(den > 0.0) {
        return Err(SymmetryError::NonPositiveDenominator(den));
    }
    Ok((bath - stochastic) / den)
}

/// Γ/Γ^B implied by a decoherence factor, (1 − φ)/(1 + φ).
pub fn rate_ratio_from_phi(phi: f64) -> f64 {
    (1.0 - phi) / (1.0 + phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorBlockReport {
    /// Frobenius norm of [H, L].
    pub commutator_norm: f64,
    pub commutes: bool,
    /// Largest |⟨i|L|k⟩| between different degenerate clusters.
    pub max_off_block: f64,
    /// Largest |⟨i|L|k⟩| for i ≠ k.
    pub max_off_diagonal: f64,
    pub block_diagonal: bool,
    pub strictly_diagonal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue indices grouped into degenerate clusters.
    pub clusters: Vec<Vec<usize>>,
    pub operators: Vec<OperatorBlockReport>,
}

/// Matrix elements of each operator in the eigenbasis of H, grouped by
/// degenerate cluster.
pub fn block_diagonality_check(h: &ComplexMatrix, ops: &[ComplexMatrix]) -> Result<BlockReport, SymmetryError> {
    let defect = h.hermiticity_defect();
    if defect > crate::qcore::TAU_HERM {
        return Err(QcoreError::NotHermitian { defect }.into());
    }
    let (eigenvalues, vectors) = h.hermitian_eigen();
    let gap = DEGENERACY_GAP * h.hermitian_norm();
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    let mut cluster_of = vec![0usize; eigenvalues.len()];
    for k in 1..eigenvalues.len() {
        if eigenvalues[k] - eigenvalues[k - 1] > gap {
            clusters.push(Vec::new());
        }
        cluster_of[k] = clusters.len() - 1;
        clusters.last_mut().unwrap().push(k);
    }
    let mut operators = Vec::with_capacity(ops.len());
    for l in ops {
        if l.dim() != h.dim() {
            return Err(SymmetryError::DimensionMismatch {
                basis: h.dim(),
                operator: l.dim(),
            });
        }
        let commutator_norm = crate::qcore::commutator(h, l)?.frobenius_norm();
        let m = vectors.adjoint() * l.inner() * &vectors;
        let (mut max_off_block, mut max_off_diagonal) = (0.0f64, 0.0f64);
        for i in 0..m.nrows() {
            for k in 0..m.ncols() {
                if i == k {
                    continue;
                }
                let v = m[(i, k)].norm();
                max_off_diagonal = max_off_diagonal.max(v);
                if cluster_of[i] != cluster_of[k] {
                    max_off_block = max_off_block.max(v);
                }
            }
        }
        operators.push(OperatorBlockReport {
            commutator_norm,
            commutes: commutator_norm <= BLOCK_TOL,
            max_off_block,
            max_off_diagonal,
            block_diagonal: max_off_block <= BLOCK_TOL,
            strictly_diagonal: max_off_diagonal <= BLOCK_TOL,
        });
    }
    Ok(BlockReport {
        eigenvalues,
        clusters,
        operators,
    })
}
