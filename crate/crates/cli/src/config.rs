use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symred::functionals::{EnergySpec, SpecJson};
use symred::models::{builtin, FullModel, ModelFile};
use symred::solver::{InitPolicy, SolveConfig};

use crate::output::{read_text, sha256_hex, CliResult, Failure};

#[derive(Debug, Clone, Default)]
pub struct ModelChoice {
    pub model: Option<String>,
    pub model_file: Option<PathBuf>,
}

/// Contents of a `--config` file. Every field may be overridden by a flag;
/// relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub deflate: bool,
    #[serde(default)]
    pub negative: bool,
}

pub const DEFAULT_GRID: usize = 401;

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.model_file, &mut cfg.spec_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// A model together with the information needed to rebuild it later.
pub struct ResolvedModel {
    pub model: FullModel,
    pub file: Option<ModelFile>,
}

impl ResolvedModel {
    pub fn rebuild(name: &str, file: Option<&ModelFile>) -> CliResult<FullModel> {
        match file {
            Some(f) => Ok(f.build()?),
            None => Ok(builtin(name)?),
        }
    }
}

pub fn resolve_model(choice: &ModelChoice) -> CliResult<ResolvedModel> {
    match (&choice.model, &choice.model_file) {
        (Some(name), None) => Ok(ResolvedModel { model: builtin(name)?, file: None }),
        (None, Some(path)) => {
            let file = ModelFile::from_json(&read_text(path)?)?;
            Ok(ResolvedModel { model: file.build()?, file: Some(file) })
        }
        (None, None) => Err(Failure::usage("a model is required (--model or --model-file)")),
        (Some(_), Some(_)) => Err(Failure::usage("--model and --model-file are mutually exclusive")),
    }
}

/// Everything a solve or sweep needs, validated.
pub struct Problem {
    pub model: ResolvedModel,
    pub spec_json: SpecJson,
    pub spec: EnergySpec,
    pub spec_digest: String,
    pub solve: SolveConfig,
    pub epsilons: Vec<f64>,
}

pub fn spec_digest(spec: &SpecJson) -> CliResult<String> {
    Ok(sha256_hex(serde_json::to_string(spec)?.as_bytes()))
}

impl RunConfig {
    pub fn resolve(&self) -> CliResult<Problem> {
        let model = resolve_model(&ModelChoice { model: self.model.clone(), model_file: self.model_file.clone() })?;
        model.model.quotient.ensure_eligible()?;
        let spec_json = match (&self.spec, &self.spec_file) {
            (_, Some(path)) => SpecJson::from_json(&read_text(path)?)?,
            (Some(inline), None) => inline.clone(),
            (None, None) => return Err(Failure::usage("an energy spec is required (--spec or \"spec\" in --config)")),
        };
        let spec = spec_json.build(model.model.quotient.ambient_dim)?;
        let epsilons = self.epsilons.clone().ok_or_else(|| Failure::usage("ε is required (--eps)"))?;
        if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Failure::usage(format!("every ε must be positive and finite, got {epsilons:?}")));
        }
        let mut solve = SolveConfig::new(epsilons[0], self.grid.unwrap_or(DEFAULT_GRID));
        if let Some(seed) = self.seed {
            solve.init = InitPolicy::Random { seed };
        }
        if let Some(m) = self.max_iters {
            solve.max_iters = m;
        }
        if let Some(t) = self.grad_tol {
            solve.grad_tol = t;
        }
        solve.deflate = self.deflate;
        solve.negative = self.negative;
        solve.validate()?;
        Ok(Problem { spec_digest: spec_digest(&spec_json)?, model, spec_json, spec, solve, epsilons })
    }
}
