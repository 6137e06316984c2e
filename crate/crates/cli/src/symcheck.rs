use crate::manifest::Recorder;
use crate::usage;
use anyhow::{bail, Result};
use decolab::lindblad::DephasingGenerator;
use decolab::symmetry::{check_generator_symmetry, SymmetryError, LabelledBasis, SymmetryKind, SymmetryTransform};
use decolab::{ComplexMatrix, DephasingChannel};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// JSON family spec: kind, basis, optional hamiltonian/energies, channels, bath.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "out/symcheck")]
    out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum BasisSpec {
    Explicit(LabelledBasis),
    Counts {
        pairs: usize,
        #[serde(default)]
        neutrals: usize,
        /// Two-particle product of the single-particle basis.
        #[serde(default)]
        two_particle: bool,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    amplitudes: Vec<f64>,
    gamma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    kind: SymmetryKind,
    basis: BasisSpec,
    #[serde(default)]
    hamiltonian: Option<ComplexMatrix>,
    /// Diagonal Hamiltonian; ignored when `hamiltonian` is given.
    #[serde(default)]
    energies: Option<Vec<f64>>,
    channels: Vec<ChannelSpec>,
    #[serde(default)]
    bath: Vec<ChannelSpec>,
}

fn basis(spec: &BasisSpec) -> Result<LabelledBasis> {
    let b = match spec {
        BasisSpec::Explicit(b) => b.clone(),
        BasisSpec::Counts {
            pairs,
            neutrals,
            two_particle,
        } => {
            let one = LabelledBasis::single(*pairs, *neutrals);
            if *two_particle {
                one.product(&one)
            } else {
                one
            }
        }
    };
    b.validate().map_err(|e| usage(format!("bad basis: {e}")))?;
    Ok(b)
}

fn channels(specs: &[ChannelSpec]) -> Result<Vec<DephasingChannel>> {
    specs
        .iter()
        .map(|c| DephasingChannel::diagonal(&c.amplitudes, c.gamma).map_err(|e| usage(format!("bad channel: {e}"))))
        .collect()
}

pub fn run(a: Args) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| usage(format!("reading {}: {e}", a.spec.display())))?;
    let spec: FamilySpec = serde_json::from_str(&text).map_err(|e| usage(format!("bad family spec: {e}")))?;
    let b = basis(&spec.basis)?;
    let n = b.dim();
    let h = match (&spec.hamiltonian, &spec.energies) {
        (Some(h), _) => h.clone(),
        (None, Some(e)) => ComplexMatrix::from_diagonal(e),
        (None, None) => ComplexMatrix::zeros(n),
    };
    let gen = DephasingGenerator::new(h, channels(&spec.channels)?, channels(&spec.bath)?)
        .map_err(|e| usage(format!("bad generator: {e}")))?;
    let t = SymmetryTransform::new(spec.kind, &b);
    let verdict = check_generator_symmetry(&t, &b, &gen).map_err(|e| match e {
        SymmetryError::UnpairedChannel(_) => anyhow::Error::from(e),
        other => usage(other.to_string()),
    })?;

    let mut rec = Recorder::new("symcheck", &a.out, &spec, None)?;
    rec.input(&a.spec)?;
    rec.write("verdict.json", &serde_json::to_vec_pretty(&verdict)?)?;
    rec.finish()?;
    if verdict.pass {
        println!("{:?} invariant: pass", spec.kind);
        return Ok(());
    }
    let mut lines = Vec::new();
    if verdict.hamiltonian_residual > decolab::symmetry::VERDICT_TOL {
        lines.push(format!("hamiltonian residual {:.3e}", verdict.hamiltonian_residual));
    }
    for c in verdict.channels.iter().filter(|c| verdict.violations.contains(&c.index)) {
        let which = if c.bath { "bath channel" } else { "channel" };
        lines.push(format!(
            "{which} {} (partner {}) residual {:.3e}",
            c.index, c.partner, c.residual
        ));
    }
    bail!("{:?} invariance violated: {}", spec.kind, lines.join("; "))
}
