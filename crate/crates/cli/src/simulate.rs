use crate::manifest::Recorder;
use crate::usage;
use anyhow::{Context, Result};
use decolab::lindblad;
use decolab::trajectories::{convergence_study, run_ensemble, SseConfig};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// JSON model file: hamiltonian, channels, initial, dt, t_end, n_traj, seed.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out/simulate")]
    out: PathBuf,
    /// Ensemble sizes for the convergence table [default: n/100, n/10, n].
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Independent replicates per ensemble size.
    #[arg(long, default_value_t = 4)]
    replicates: usize,
    /// Skip the convergence table.
    #[arg(long)]
    no_convergence: bool,
}

fn default_sizes(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [n / 100, n / 10, n].into_iter().filter(|&k| k > 0).collect();
    v.dedup();
    v
}

pub fn run(a: Args) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| usage(format!("reading {}: {e}", a.config.display())))?;
    let cfg: SseConfig = serde_json::from_str(&text).map_err(|e| usage(format!("bad config: {e}")))?;
    let (_, dt) = cfg.validate().map_err(|e| usage(format!("bad config: {e}")))?;
    if a.replicates == 0 {
        return Err(usage("--replicates must be positive"));
    }
    let sizes = a.sizes.clone().unwrap_or_else(|| default_sizes(cfg.n_traj));
    if sizes.contains(&0) {
        return Err(usage("--sizes entries must be positive"));
    }

    let mut rec = Recorder::new("simulate", &a.out, &cfg, Some(cfg.seed))?;
    rec.input(&a.config)?;

    let ens = run_ensemble(&cfg)?;
    let reference = lindblad::propagate_sampled(
        &cfg.generator()?,
        cfg.initial_density().matrix(),
        cfg.t_end,
        dt,
        cfg.record_every,
    )?;
    let n = cfg.initial.dim();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| (k + 1..n).map(move |i| (k, i))).collect();
    let mut csv = String::from("t");
    for (k, i) in &pairs {
        write!(
            csv,
            ",re_rho{k}{i}_ens,re_rho{k}{i}_det,im_rho{k}{i}_ens,im_rho{k}{i}_det,err_{k}{i}"
        )?;
    }
    csv.push('\n');
    for (s, t) in ens.times.iter().enumerate() {
        write!(csv, "{t}")?;
        let (e, d) = (&ens.mean_density[s], &reference.states[s]);
        for &(k, i) in &pairs {
            let (x, y) = (e.get(k, i), d.get(k, i));
            write!(csv, ",{},{},{},{},{}", x.re, y.re, x.im, y.im, (x - y).norm())?;
        }
        csv.push('\n');
    }
    rec.write("ensemble_vs_master.csv", csv.as_bytes())?;

    let mut ens_csv = Vec::new();
    let all: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |i| (k, i))).collect();
    ens.write_csv(&mut ens_csv, &all).context("writing ensemble CSV")?;
    rec.write("ensemble.csv", &ens_csv)?;

    if !a.no_convergence {
        let rows = convergence_study(&cfg, &sizes, a.replicates)?;
        let mut table = String::from("n_traj,replicates,rms_max_error,ratio_to_previous\n");
        for r in rows {
            let ratio = r.ratio_to_previous.map(|x| x.to_string()).unwrap_or_default();
            writeln!(table, "{},{},{},{}", r.n_traj, r.replicates, r.rms_max_error, ratio)?;
        }
        rec.write("convergence.csv", table.as_bytes())?;
    }
    let m = rec.finish()?;
    println!("wrote {}", m.display());
    Ok(())
}
