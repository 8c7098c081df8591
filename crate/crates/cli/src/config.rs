//! JSON run configuration.
//!
//! Relative paths inside a config file are resolved against the directory
//! that contains it; paths given on the command line are used as-is.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use specgap::qmc::{DEFAULT_KOROBOV_MULTIPLIER, MAX_LEVEL};
use specgap::{
    korobov_vector, parse_generating_vector, CoefficientModel, CoefficientSpec, FailPolicy,
    QuadratureRule, ShiftSpec, SurveyConfig, ToleranceSpec,
};

/// Level capacity assumed for generating-vector files when the config does
/// not say (`..._m20` style vectors support `2^20` points).
const DEFAULT_FILE_CAPACITY: u32 = 20;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coefficient: CoefficientSpec,
    pub mesh: MeshSection,
    pub qmc: QmcSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub survey: SurveySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KorobovSection {
    #[serde(default = "default_multiplier")]
    pub a: u64,
}

fn default_multiplier() -> u64 {
    DEFAULT_KOROBOV_MULTIPLIER
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmcSection {
    /// Text file with one component per line (or `index value` pairs).
    #[serde(default)]
    pub genvec_path: Option<PathBuf>,
    /// Largest `m` the vector file supports.
    #[serde(default)]
    pub genvec_max_level: Option<u32>,
    /// Used when no `genvec_path` is given.
    #[serde(default)]
    pub korobov: Option<KorobovSection>,
    pub m_max: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_bisections: usize,
    pub residual_audit: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let t = ToleranceSpec::default();
        Self {
            abs_tol: t.abs_tol,
            rel_tol: t.rel_tol,
            max_bisections: t.max_bisections,
            residual_audit: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurveySection {
    pub fail_policy: Option<FailPolicy>,
    pub quadrature: QuadratureRule,
    pub dump_gaps: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub levels_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Command-line overrides shared by the subcommands that read a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub genvec: Option<PathBuf>,
    pub m_max: Option<u32>,
    pub dump_gaps: Option<PathBuf>,
}

impl RunConfig {
    /// Parses `path`, reporting the JSON path of the offending field on error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            anyhow::anyhow!("{}: field `{}`: {}", path.display(), field, e.inner())
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.qmc.genvec_path);
        fix(&mut self.survey.dump_gaps);
        fix(&mut self.output.levels_csv);
        fix(&mut self.output.report_json);
        fix(&mut self.output.svg);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.qmc.seed = Some(seed);
        }
        if let Some(path) = &o.genvec {
            self.qmc.genvec_path = Some(path.clone());
        }
        if let Some(m) = o.m_max {
            self.qmc.m_max = m;
        }
        if let Some(path) = &o.dump_gaps {
            self.survey.dump_gaps = Some(path.clone());
        }
    }

    pub fn model(&self) -> Result<CoefficientModel> {
        CoefficientModel::new(self.coefficient).context("field `coefficient`")
    }

    /// Generating vector, its capacity in levels, and a description of its source.
    fn generating_vector(&self, s: usize) -> Result<(Vec<u64>, u32, String)> {
        match &self.qmc.genvec_path {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading generating vector {}", path.display()))?;
                let parsed = parse_generating_vector(&text)
                    .with_context(|| format!("parsing generating vector {}", path.display()))?;
                if parsed.even_entries.iter().any(|&j| j < s) {
                    eprintln!(
                        "warning: {} has even entries at positions {:?}; prefixes are not all lattice rules",
                        path.display(),
                        parsed.even_entries
                    );
                }
                let z = parsed
                    .take(s)
                    .with_context(|| format!("field `qmc.genvec_path`: {}", path.display()))?;
                let capacity = self.qmc.genvec_max_level.unwrap_or(DEFAULT_FILE_CAPACITY);
                Ok((z, capacity, path.display().to_string()))
            }
            None => {
                let a = self
                    .qmc
                    .korobov
                    .as_ref()
                    .map_or(DEFAULT_KOROBOV_MULTIPLIER, |k| k.a);
                if a.is_multiple_of(2) {
                    bail!("field `qmc.korobov.a`: multiplier must be odd, got {a}");
                }
                Ok((
                    korobov_vector(a, s, MAX_LEVEL),
                    MAX_LEVEL,
                    format!("korobov a={a} (searched default, not a published vector)"),
                ))
            }
        }
    }

    pub fn shift(&self, no_shift: bool) -> ShiftSpec {
        if no_shift {
            ShiftSpec::None
        } else {
            ShiftSpec::Seeded(self.qmc.seed.unwrap_or(DEFAULT_SEED))
        }
    }

    pub fn survey_config(&self, no_shift: bool) -> Result<SurveyConfig> {
        let model = self.model()?;
        if self.mesh.n < 2 {
            bail!("field `mesh.n`: need at least 2 cells, got {}", self.mesh.n);
        }
        let (z, capacity, source) = self.generating_vector(model.dimension())?;
        if self.qmc.m_max > capacity {
            bail!(
                "field `qmc.m_max`: {} exceeds the generating vector capacity 2^{capacity}",
                self.qmc.m_max
            );
        }
        let solver = ToleranceSpec {
            abs_tol: self.solver.abs_tol,
            rel_tol: self.solver.rel_tol,
            max_bisections: self.solver.max_bisections,
            ..ToleranceSpec::default()
        };
        if !(solver.abs_tol > 0.0 && solver.rel_tol > 0.0) {
            bail!("field `solver`: tolerances must be positive");
        }
        Ok(SurveyConfig {
            model,
            mesh_cells: self.mesh.n,
            generating_vector: z,
            genvec_source: source,
            m_max: self.qmc.m_max,
            shift: self.shift(no_shift),
            solver,
            quadrature: self.survey.quadrature,
            residual_audit: self.solver.residual_audit,
            fail_policy: self.survey.fail_policy,
        })
    }
}
