//! Study configuration: presets, TOML files and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bcos::problem::{example1, example3, Example2, Example2Params};
use bcos::{FbsdeProblem, LqParams, SchemeKind, ThetaParams};
use serde::Deserialize;

/// Problem selection with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Example1,
    Example2 { kappa_z: f64 },
    Example3(LqParams),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 { .. } => "example2",
            Self::Example3(_) => "example3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "example1" => Self::Example1,
            "example2" => Self::Example2 { kappa_z: 0.0 },
            "example3" => Self::Example3(LqParams::default()),
            other => bail!("unknown problem `{other}` (expected example1, example2 or example3)"),
        })
    }

    pub fn build(&self) -> Result<Box<dyn FbsdeProblem>> {
        Ok(match *self {
            Self::Example1 => Box::new(example1()),
            Self::Example2 { kappa_z } => {
                Box::new(Example2::with_params(Example2Params { kappa_z, ..Example2Params::default() }))
            }
            Self::Example3(params) => Box::new(example3(params)?),
        })
    }

    /// Short parameter tag for the `problem` CSV column.
    pub fn label(&self) -> String {
        match self {
            Self::Example2 { kappa_z } => format!("example2[kappa_z={kappa_z:e}]"),
            other => other.name().to_string(),
        }
    }
}

/// Wall-clock benchmark settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub k_list: Vec<usize>,
    pub n: usize,
    pub repeats: usize,
}

/// Fully resolved study parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemConfig,
    pub schemes: Vec<SchemeKind>,
    pub theta: [f64; 4],
    pub k: usize,
    pub n_list: Vec<usize>,
    pub paths: usize,
    pub n_fine: usize,
    pub seed: u64,
    pub range: (f64, f64),
    pub out: PathBuf,
    pub timing: TimingConfig,
}

const EXAMPLE1_RANGE: (f64, f64) = (-19.341110327048455, 22.822591808529936);

impl StudyConfig {
    /// Reference run parameters of each benchmark.
    pub fn preset(problem: ProblemConfig) -> Self {
        let (k, theta, range) = match problem {
            ProblemConfig::Example1 => (512, [0.5, 0.5, 0.5, 0.0], EXAMPLE1_RANGE),
            ProblemConfig::Example2 { .. } => (1024, [0.5, 0.5, 0.5, -0.5], (-3.0, 5.0)),
            ProblemConfig::Example3(_) => (1024, [0.5, 0.5, 0.5, -0.5], (-5.0, 5.0)),
        };
        Self {
            problem,
            schemes: SchemeKind::ALL.to_vec(),
            theta,
            k,
            n_list: vec![10, 100, 400, 1000],
            paths: 1024,
            n_fine: 100_000,
            seed: 42,
            range,
            out: PathBuf::from("out"),
            timing: TimingConfig { k_list: vec![k], n: 1000, repeats: 1 },
        }
    }

    pub fn theta_params(&self) -> Result<ThetaParams> {
        Ok(ThetaParams::from_array(self.theta)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.theta_params()?;
        ensure!(self.range.0 < self.range.1, "range: a = {} must be below b = {}", self.range.0, self.range.1);
        ensure!(self.k > 0, "K must be positive");
        ensure!(!self.schemes.is_empty(), "at least one scheme is required");
        ensure!(!self.n_list.is_empty(), "N_list must not be empty");
        ensure!(self.paths > 0, "paths must be positive");
        ensure!(self.n_fine > 0, "n_fine must be positive");
        for &n in &self.n_list {
            ensure!(n > 0 && self.n_fine % n == 0, "N = {n} does not divide n_fine = {}", self.n_fine);
        }
        ensure!(self.timing.n > 0 && self.timing.repeats > 0, "timing N and repeats must be positive");
        ensure!(self.timing.k_list.iter().all(|&k| k > 0), "timing K_list entries must be positive");
        Ok(())
    }

    /// Parse a TOML study file on top of the preset named in its `[problem]` table.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let mut cfg = Self::preset(raw.problem.resolve()?);
        if let Some(s) = raw.study {
            s.apply(&mut cfg)?;
        }
        if let Some(t) = raw.timing {
            if let Some(k) = t.k_list {
                cfg.timing.k_list = k;
            }
            if let Some(n) = t.n {
                cfg.timing.n = n;
            }
            if let Some(r) = t.repeats {
                cfg.timing.repeats = r;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in config file {}", path.display()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    study: Option<RawStudy>,
    timing: Option<RawTiming>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    kappa_z: Option<f64>,
    horizon: Option<f64>,
    x0: Option<f64>,
    #[serde(rename = "A")]
    a: Option<f64>,
    #[serde(rename = "B")]
    b: Option<f64>,
    beta: Option<f64>,
    #[serde(rename = "C")]
    c: Option<f64>,
    #[serde(rename = "D")]
    d: Option<f64>,
    #[serde(rename = "Sigma")]
    sigma: Option<f64>,
    #[serde(rename = "R_x")]
    r_x: Option<f64>,
    #[serde(rename = "R_xu")]
    r_xu: Option<f64>,
    #[serde(rename = "R_u")]
    r_u: Option<f64>,
    #[serde(rename = "G")]
    g: Option<f64>,
}

impl RawProblem {
    fn resolve(&self) -> Result<ProblemConfig> {
        let lq = [self.horizon, self.x0, self.a, self.b, self.beta, self.c, self.d, self.sigma, self.r_x, self.r_xu, self.r_u, self.g];
        match ProblemConfig::from_name(&self.name)? {
            ProblemConfig::Example1 => {
                ensure!(self.kappa_z.is_none() && lq.iter().all(Option::is_none), "example1 takes no parameters");
                Ok(ProblemConfig::Example1)
            }
            ProblemConfig::Example2 { kappa_z } => {
                ensure!(lq.iter().all(Option::is_none), "example2 only takes kappa_z");
                Ok(ProblemConfig::Example2 { kappa_z: self.kappa_z.unwrap_or(kappa_z) })
            }
            ProblemConfig::Example3(mut p) => {
                ensure!(self.kappa_z.is_none(), "kappa_z belongs to example2");
                let fields = [
                    &mut p.horizon, &mut p.x0, &mut p.a, &mut p.b, &mut p.beta, &mut p.c, &mut p.d, &mut p.sigma,
                    &mut p.r_x, &mut p.r_xu, &mut p.r_u, &mut p.g,
                ];
                for (slot, value) in fields.into_iter().zip(lq) {
                    if let Some(v) = value {
                        *slot = v;
                    }
                }
                p.validate()?;
                Ok(ProblemConfig::Example3(p))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    schemes: Option<Vec<String>>,
    theta: Option<[f64; 4]>,
    #[serde(rename = "K")]
    k: Option<usize>,
    #[serde(rename = "N_list")]
    n_list: Option<Vec<usize>>,
    paths: Option<usize>,
    n_fine: Option<usize>,
    seed: Option<u64>,
    range: Option<[f64; 2]>,
    out: Option<PathBuf>,
}

impl RawStudy {
    fn apply(self, cfg: &mut StudyConfig) -> Result<()> {
        if let Some(s) = self.schemes {
            cfg.schemes = s.iter().map(|n| n.parse().map_err(anyhow::Error::from)).collect::<Result<_>>()?;
        }
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
        if let Some(k) = self.k {
            cfg.k = k;
            cfg.timing.k_list = vec![k];
        }
        if let Some(n) = self.n_list {
            cfg.n_list = n;
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
        if let Some([a, b]) = self.range {
            cfg.range = (a, b);
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    #[serde(rename = "K_list")]
    k_list: Option<Vec<usize>>,
    #[serde(rename = "N")]
    n: Option<usize>,
    repeats: Option<usize>,
}

/// Parse `a,b,...` into exactly `len` reals.
pub fn parse_reals(text: &str, len: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("`{s}` is not a number")))
        .collect::<Result<Vec<_>>>()?;
    ensure!(values.len() == len, "expected {len} comma-separated values, got {}", values.len());
    Ok(values)
}

pub fn parse_counts(text: &str) -> Result<Vec<usize>> {
    text.split(',').map(|s| s.trim().parse::<usize>().with_context(|| format!("`{s}` is not a count"))).collect()
}

pub fn parse_schemes(text: &str) -> Result<Vec<SchemeKind>> {
    text.split(',').map(|s| s.trim().parse().map_err(anyhow::Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_the_benchmark_parameters() {
        let e1 = StudyConfig::preset(ProblemConfig::Example1);
        assert_eq!(e1.k, 512);
        assert_eq!(e1.theta, [0.5, 0.5, 0.5, 0.0]);
        assert!((e1.range.0 + 19.341110327048455).abs() < 1e-12);
        let e2 = StudyConfig::preset(ProblemConfig::Example2 { kappa_z: 0.0 });
        assert_eq!((e2.k, e2.range), (1024, (-3.0, 5.0)));
        let e3 = StudyConfig::preset(ProblemConfig::from_name("example3").unwrap());
        assert_eq!((e3.k, e3.range, e3.theta), (1024, (-5.0, 5.0), [0.5, 0.5, 0.5, -0.5]));
        for cfg in [e1, e2, e3] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn toml_overrides_the_preset() {
        let cfg = StudyConfig::from_toml_str(
            r#"
            [problem]
            name = "example3"
            G = 1.5

            [study]
            schemes = ["euler", "milstein"]
            K = 512
            N_list = [10, 100]
            seed = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.schemes, vec![SchemeKind::Euler, SchemeKind::Milstein]);
        assert_eq!(cfg.k, 512);
        assert_eq!(cfg.timing.k_list, vec![512]);
        assert_eq!(cfg.seed, 7);
        match cfg.problem {
            ProblemConfig::Example3(p) => assert_eq!(p.g, 1.5),
            _ => panic!("wrong problem"),
        }
    }

    #[test]
    fn parse_errors_name_the_location() {
        let err = StudyConfig::from_toml_str("[problem]\nname = \"example3\"\n[study]\nKK = 3\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("KK") && msg.contains("line 4"), "{msg}");
        assert!(StudyConfig::from_toml_str("[problem]\nname = \"example9\"\n").is_err());
        assert!(StudyConfig::from_toml_str("[problem]\nname = \"example1\"\nkappa_z = 1.0\n").is_err());
    }

    #[test]
    fn validation_rejects_inconsistent_settings() {
        let mut cfg = StudyConfig::preset(ProblemConfig::Example1);
        cfg.theta = [0.5, 0.5, 0.5, 0.7];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::preset(ProblemConfig::Example1);
        cfg.n_list = vec![300];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::preset(ProblemConfig::Example1);
        cfg.range = (1.0, -1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn list_parsers() {
        assert_eq!(parse_reals("0.5,0.5, 0.5,-0.5", 4).unwrap(), vec![0.5, 0.5, 0.5, -0.5]);
        assert!(parse_reals("1,2", 4).is_err());
        assert_eq!(parse_counts("10,100").unwrap(), vec![10, 100]);
        assert_eq!(parse_schemes("euler,wt2").unwrap(), vec![SchemeKind::Euler, SchemeKind::WeakTaylor2]);
    }
}
