use crate::manifest::Recorder;
use crate::usage;
use anyhow::Result;
use decolab::dyson;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Dephasing rates Γ as lo:hi:n (linear) or a single value.
    #[arg(long, default_value = "0.2:5.0:25")]
    gamma: String,
    /// Detunings Δω as lo:hi:n (linear) or a single value.
    #[arg(long, default_value = "1.0")]
    detuning: String,
    /// Coupling g.
    #[arg(long, default_value_t = 1e-2)]
    g: f64,
    /// Exact propagation window in units of 1/Γ.
    #[arg(long, default_value_t = 20.0)]
    t_factor: f64,
    #[arg(long, default_value = "out/dyson")]
    #[serde(skip)]
    out: PathBuf,
}

/// Parses `lo:hi:n` into n linearly spaced values, or a single number.
pub fn parse_range(spec: &str, name: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("bad --{name} range {spec:?}; expected lo:hi:n or a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let vals = match parts.as_slice() {
        [v] => vec![v.trim().parse::<f64>().map_err(|_| bad())?],
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 || hi < lo || (n == 1 && hi != lo) {
                return Err(bad());
            }
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        }
        _ => return Err(bad()),
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(vals)
}

pub fn run(a: Args) -> Result<()> {
    let gammas = parse_range(&a.gamma, "gamma")?;
    let detunings = parse_range(&a.detuning, "detuning")?;
    if gammas.iter().any(|g| *g <= 0.0) {
        return Err(usage("--gamma values must be positive"));
    }
    if !(a.g.is_finite() && a.g > 0.0) || !(a.t_factor > 0.0) {
        return Err(usage("--g and --t-factor must be positive"));
    }
    let mut rec = Recorder::new("dyson", &a.out, &a, None)?;
    let rows = dyson::gain_scan(&gammas, &detunings, a.g, a.t_factor)?;
    let mut csv = String::from("dephasing,delta_omega,phi_gamma,exact_slope,predicted_slope,slope_rel_error\n");
    for r in &rows {
        let rel = (r.exact_slope - r.predicted_slope).abs() / r.predicted_slope.abs();
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.dephasing, r.delta_omega, r.phi_gamma, r.exact_slope, r.predicted_slope, rel
        )?;
    }
    rec.write("gain_surface.csv", csv.as_bytes())?;
    let m = rec.finish()?;
    println!("wrote {}", m.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2.5", "x").unwrap(), vec![2.5]);
        assert_eq!(parse_range("0:1:3", "x").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("1:1:1", "x").unwrap(), vec![1.0]);
        for bad in ["2:1:3", "0:1:0", "a", "1:2", "0:1:1"] {
            assert!(parse_range(bad, "x").is_err(), "{bad}");
        }
    }
}
