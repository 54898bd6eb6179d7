//! The TOML run description and its translation into library types.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gsmf::data::{gen_data, DataSource, DatasetRecipe};
use gsmf::io::read_sampling_csv;
use gsmf::{Builtin, LinearMap, ProblemSpec, RelaxationParams, SolverConfig};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dataset: DatasetRecipe,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub relaxation: RelaxationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub rank: usize,
    pub lambda: f64,
    #[serde(default = "nonneg")]
    pub psi: Builtin,
    #[serde(default = "nonneg")]
    pub phi: Builtin,
    #[serde(default)]
    pub map: MapConfig,
}

fn nonneg() -> Builtin {
    Builtin::NonnegIndicator
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    #[default]
    Full,
    /// Observe the entries listed in a CSV of 1-based `(row, col)` pairs.
    #[serde(alias = "symmetric_sampling")]
    Sampling { omega: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationConfig {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig { alpha: 0.6, beta: None, gamma: None }
    }
}

impl RelaxationConfig {
    pub fn build(&self) -> gsmf::Result<RelaxationParams> {
        match (self.beta, self.gamma) {
            (None, None) => RelaxationParams::new(self.alpha),
            (beta, gamma) => {
                let beta = beta.unwrap_or(self.alpha / (self.alpha - 1.0));
                RelaxationParams::with_parts(self.alpha, beta, gamma)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Also write the final factors as `X.mtx` and `Y.mtx`.
    #[serde(default)]
    pub factors: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub noise_t: Option<Vec<f64>>,
    pub rank: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub reps: usize,
}

fn one() -> usize {
    1
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub audit: bool,
    pub symmetrize_noise: bool,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::File { path } = &mut self.dataset.source {
            fix(path);
        }
        if let MapConfig::Sampling { omega } = &mut self.problem.map {
            fix(omega);
        }
        if let Some(dir) = &mut self.output.dir {
            fix(dir);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output.dir = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.solver.seed = seed;
        }
        self.solver.audit |= o.audit;
        self.dataset.symmetrize_noise |= o.symmetrize_noise;
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("gsmf-out"))
    }

    pub fn target(&self) -> Result<DMatrix<f64>> {
        gen_data(&self.dataset).context("building the dataset")
    }

    pub fn problem(&self, target: &DMatrix<f64>) -> Result<ProblemSpec> {
        let p = &self.problem;
        let spec = match &p.map {
            MapConfig::Full => ProblemSpec::factorization(target, p.rank, p.lambda, p.psi, p.phi)?,
            MapConfig::Sampling { omega } => {
                if !target.is_square() {
                    bail!("target must be square, got {}x{}", target.nrows(), target.ncols());
                }
                let set = read_sampling_csv(omega, target.nrows())?;
                let map = LinearMap::sampling(set);
                let b = map.apply(target)?;
                ProblemSpec::new(map, b, Arc::new(p.psi), Arc::new(p.phi), p.lambda, p.rank)?
            }
        };
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
source = "planted"
n = 10
r = 2

[problem]
rank = 2
lambda = 1.0
"#;

    #[test]
    fn minimal_config_defaults() {
        let c: Config = toml::from_str(MINIMAL).unwrap();
        assert_eq!(c.problem.psi, Builtin::NonnegIndicator);
        assert!(matches!(c.problem.map, MapConfig::Full));
        assert_eq!(c.relaxation.alpha, 0.6);
        assert_eq!(c.solver, SolverConfig::default());
        assert!(c.sweep.is_none());
    }

    #[test]
    fn regularizer_names() {
        let text = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\npsi = { kind = \"l1\", weight = 0.5 }\nphi = { kind = \"nonneg_l1\", weight = 0.1 }");
        let c: Config = toml::from_str(&text).unwrap();
        assert_eq!(c.problem.psi, Builtin::L1 { weight: 0.5 });
        assert_eq!(c.problem.phi, Builtin::NonnegPlusL1 { weight: 0.1 });
        let text = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\npsi = { kind = \"nonneg\" }\nphi = { kind = \"zero\" }");
        let c: Config = toml::from_str(&text).unwrap();
        assert_eq!(c.problem.psi, Builtin::NonnegIndicator);
        assert_eq!(c.problem.phi, Builtin::Zero);
    }

    #[test]
    fn missing_rank_is_named() {
        let err = toml::from_str::<Config>(&MINIMAL.replace("rank = 2\n", "")).unwrap_err();
        assert!(err.to_string().contains("rank"), "{err}");
    }

    #[test]
    fn unknown_solver_field_is_rejected() {
        let text = format!("{MINIMAL}\n[solver]\nbogus = 1\n");
        let err = toml::from_str::<Config>(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn relaxation_from_parts() {
        let r = RelaxationConfig { alpha: 2.0, beta: Some(2.0), gamma: None };
        assert_eq!(r.build().unwrap().beta(), 2.0);
        let r = RelaxationConfig { alpha: 2.0, beta: Some(3.0), gamma: None };
        assert!(r.build().is_err());
        let r = RelaxationConfig { alpha: 0.6, beta: None, gamma: Some(1.0) };
        assert_eq!(r.build().unwrap().gamma(), 1.0);
    }

    #[test]
    fn solver_section() {
        let text = format!(
            "{MINIMAL}\n[solver]\nscheme = \"prox_linear\"\nline_search = {{ mode = \"max_type\", window = 3 }}\ntol = 1e-8\nmax_time_sec = 5\n"
        );
        let c: Config = toml::from_str(&text).unwrap();
        assert_eq!(c.solver.scheme, gsmf::Scheme::ProxLinear);
        assert_eq!(c.solver.line_search, gsmf::LineSearch::MaxType { window: 3 });
        assert_eq!(c.solver.max_time_sec, Some(5.0));
    }
}
