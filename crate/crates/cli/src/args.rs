//! Command-line interface.

use std::path::PathBuf;

use anyhow::{ensure, Result};
use bcos::SchemeKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_counts, parse_reals, parse_schemes, ProblemConfig, StudyConfig};

#[derive(Debug, Parser)]
#[command(name = "bcos", version, about = "Convergence studies for the coupled BCOS solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and measure one (scheme, N) cell.
    Solve(Flags),
    /// Run every (scheme, N) cell and write errors.csv, rates.csv and a plot script.
    Study(Flags),
    /// Time the backward solve per scheme and K and write timing.csv.
    Bench(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// example1, example2 or example3; selects the preset when no config is given.
    #[arg(long)]
    pub problem: Option<String>,
    /// Scheme, or a comma-separated list for `study` and `bench`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Four comma-separated theta values.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Number of cosine terms; `bench` accepts a comma-separated list.
    #[arg(long = "K")]
    pub k: Option<String>,
    /// Time steps for `solve`, or the fixed N for `bench`; replaces the N list
    /// unless `--N-list` is also given.
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "N-list")]
    pub n_list: Option<String>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Fine reference steps.
    #[arg(long = "n-fine")]
    pub n_fine: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Truncation range `a,b`.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML study file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    /// Config file or preset, then flag overrides.
    ///
    /// With both `--config` and `--problem`, the problem is replaced by the
    /// named problem's default parameters and the remaining file settings kept.
    pub fn resolve(&self) -> Result<StudyConfig> {
        let mut cfg = match (&self.config, &self.problem) {
            (Some(path), _) => StudyConfig::load(path)?,
            (None, Some(name)) => StudyConfig::preset(ProblemConfig::from_name(name)?),
            (None, None) => StudyConfig::preset(ProblemConfig::from_name("example3")?),
        };
        if let (Some(_), Some(name)) = (&self.config, &self.problem) {
            if name != cfg.problem.name() {
                cfg.problem = ProblemConfig::from_name(name)?;
            }
        }
        if let Some(s) = &self.scheme {
            cfg.schemes = parse_schemes(s)?;
        }
        if let Some(t) = &self.theta {
            let v = parse_reals(t, 4)?;
            cfg.theta = [v[0], v[1], v[2], v[3]];
        }
        if let Some(k) = &self.k {
            let ks = parse_counts(k)?;
            ensure!(!ks.is_empty(), "--K needs a value");
            cfg.k = ks[0];
            cfg.timing.k_list = ks;
        }
        if let Some(n) = self.n {
            cfg.timing.n = n;
            cfg.n_list = vec![n];
        }
        if let Some(n) = &self.n_list {
            cfg.n_list = parse_counts(n)?;
        }
        if let Some(p) = self.paths {
            cfg.paths = p;
        }
        if let Some(n) = self.n_fine {
            cfg.n_fine = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = &self.range {
            let v = parse_reals(r, 2)?;
            cfg.range = (v[0], v[1]);
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The single cell selected for `solve`.
    pub fn single_cell(&self, cfg: &StudyConfig) -> Result<(SchemeKind, usize)> {
        ensure!(cfg.schemes.len() == 1 || self.scheme.is_none(), "solve takes exactly one --scheme");
        ensure!(self.k.as_deref().is_none_or(|k| !k.contains(',')), "solve takes exactly one --K");
        let n = self.n.or_else(|| cfg.n_list.first().copied()).expect("validated N_list is non-empty");
        Ok((cfg.schemes[0], n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> Flags {
        let mut full = vec!["bcos", "study"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Study(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_the_preset() {
        let cfg = flags(&[
            "--problem", "example2", "--scheme", "euler,milstein", "--theta", "0.5,0.5,0.5,-0.5", "--K", "256", "--N-list",
            "10,100", "--paths", "64", "--n-fine", "1000", "--seed", "9", "--range", "-3,5",
        ])
        .resolve()
        .unwrap();
        assert_eq!(cfg.problem.name(), "example2");
        assert_eq!(cfg.schemes, vec![SchemeKind::Euler, SchemeKind::Milstein]);
        assert_eq!((cfg.k, cfg.paths, cfg.n_fine, cfg.seed), (256, 64, 1000, 9));
        assert_eq!(cfg.n_list, vec![10, 100]);
        assert_eq!(cfg.range, (-3.0, 5.0));
        assert_eq!(cfg.theta[3], -0.5);
    }

    #[test]
    fn invalid_theta_is_a_config_error() {
        assert!(flags(&["--theta", "0.5,0.5,0.5,-0.7"]).resolve().is_err());
        assert!(flags(&["--theta", "0.5,0.5"]).resolve().is_err());
    }

    #[test]
    fn non_divisor_step_count_is_rejected() {
        assert!(flags(&["--N-list", "10,300", "--n-fine", "1000"]).resolve().is_err());
    }

    #[test]
    fn solve_takes_one_cell() {
        let f = flags(&["--scheme", "milstein", "--N", "100"]);
        let cfg = f.resolve().unwrap();
        assert_eq!(f.single_cell(&cfg).unwrap(), (SchemeKind::Milstein, 100));
        let f = flags(&["--scheme", "euler,milstein"]);
        assert!(f.single_cell(&f.resolve().unwrap()).is_err());
    }
}
