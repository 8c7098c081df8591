//! Gap surveys over lattice realisations.
//!
//! For each lattice index `i < 2^m_max` the stiffness matrix is assembled,
//! the two smallest eigenvalues are computed and the gap is recorded.
//! `delta_N` is the minimum over indices `0..N` for every `N = 2^m`; the
//! levels are reduced block by block (`[2^(m-1), 2^m)`) so the result does
//! not depend on how the samples were scheduled.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{power_law_fit, AnalysisError, PowerLawFit};
use crate::coefficient::{CoefficientModel, Family, ParameterPoint};
use crate::discretization::{
    assemble_mass, DiscretizationError, QuadratureRule, StiffnessAssembler, TridiagonalSymmetric,
    UniformMesh,
};
use crate::eigensolve::{
    discrete_laplacian_eigenvalue, inverse_iteration, smallest_eigenvalues_with_fallback,
    EigenError, ToleranceSpec,
};
use crate::qmc::{generating_vector_checksum, LatticeSequence, QmcError, ShiftSpec};

/// Relative slack allowed on the per-sample bracket check.
pub const BRACKET_SLACK: f64 = 1e-9;

/// One eigenvector audit every this many lattice indices.
pub const AUDIT_STRIDE: u64 = 1024;

const BRACKET_PAD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("invalid survey configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Qmc(#[from] QmcError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("sample {} failed: {}", .0.index, .0.reason)]
    SampleFailed(SampleFailure),
    #[error("every sample failed; no minimum available")]
    NoSamples,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailPolicy {
    /// The first failed sample aborts the survey.
    Strict,
    /// Failed samples are counted and excluded from the minimum.
    Record,
}

impl FailPolicy {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Affine => FailPolicy::Strict,
            Family::LogNormal => FailPolicy::Record,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Coercivity,
    Coefficient,
    Solver,
    BracketViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: u64,
    pub kind: FailureKind,
    pub reason: String,
}

/// Eigenvalues and gap at one realisation, with the realised coefficient
/// range over the quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub index: u64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub coeff_lo: f64,
    pub coeff_hi: f64,
}

/// Per-sample evaluator: mesh, mass matrix and basis tables are built once.
#[derive(Debug, Clone)]
pub struct GapSampler {
    assembler: StiffnessAssembler,
    mass: TridiagonalSymmetric,
    chi: [f64; 2],
    tol: ToleranceSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub sample: GapSample,
    pub clustered: bool,
    pub used_fallback_bracket: bool,
}

impl GapSampler {
    pub fn new(
        model: CoefficientModel,
        mesh: UniformMesh,
        rule: QuadratureRule,
        tol: ToleranceSpec,
    ) -> Result<Self, SurveyError> {
        if mesh.dof() < 2 {
            return Err(SurveyError::Config(format!(
                "a gap needs at least 2 interior nodes, mesh has {}",
                mesh.dof()
            )));
        }
        Ok(Self {
            assembler: StiffnessAssembler::new(mesh, model, rule)?,
            mass: assemble_mass(&mesh),
            chi: [
                discrete_laplacian_eigenvalue(&mesh, 1)?,
                discrete_laplacian_eigenvalue(&mesh, 2)?,
            ],
            tol,
        })
    }

    /// Discrete Laplacian eigenvalues `(chi_1^h, chi_2^h)`.
    pub fn chi(&self) -> [f64; 2] {
        self.chi
    }

    pub fn mass(&self) -> &TridiagonalSymmetric {
        &self.mass
    }

    pub fn assembler(&self) -> &StiffnessAssembler {
        &self.assembler
    }

    pub fn sample(&self, index: u64, y: &ParameterPoint) -> Result<SampleOutcome, SampleFailure> {
        let fail = |kind, reason: String| SampleFailure {
            index,
            kind,
            reason,
        };
        let (a, nodal) = self.assembler.assemble(y).map_err(|e| match e {
            DiscretizationError::Coercivity { .. } => fail(FailureKind::Coercivity, e.to_string()),
            other => fail(FailureKind::Coefficient, other.to_string()),
        })?;
        let (lo, hi) = (nodal.lo, nodal.hi);
        let hint = (
            lo * self.chi[0] * (1.0 - BRACKET_PAD),
            hi * self.chi[1] * (1.0 + BRACKET_PAD),
        );
        let (eig, fallback) =
            smallest_eigenvalues_with_fallback(&a, &self.mass, 2, hint, &self.tol)
                .map_err(|e| fail(FailureKind::Solver, e.to_string()))?;
        let (lambda1, lambda2) = (eig.values[0], eig.values[1]);

        for (k, lambda) in [lambda1, lambda2].into_iter().enumerate() {
            let lower = lo * self.chi[k] * (1.0 - BRACKET_SLACK);
            let upper = hi * self.chi[k] * (1.0 + BRACKET_SLACK);
            if !(lower <= lambda && lambda <= upper) {
                return Err(fail(
                    FailureKind::BracketViolation,
                    format!("lambda_{} = {lambda} outside [{lower}, {upper}]", k + 1),
                ));
            }
        }
        Ok(SampleOutcome {
            sample: GapSample {
                index,
                lambda1,
                lambda2,
                gap: (lambda2 - lambda1).max(0.0),
                coeff_lo: lo,
                coeff_hi: hi,
            },
            clustered: eig.clustered,
            used_fallback_bracket: fallback,
        })
    }

    /// Largest eigenvector residual `||A u - lambda M u||_2 / ||u||_M`
    /// over the two computed eigenpairs, divided by `||A||_inf`.
    pub fn audit(&self, y: &ParameterPoint, sample: &GapSample) -> Result<f64, String> {
        let (a, _) = self.assembler.assemble(y).map_err(|e| e.to_string())?;
        let norm = a.norm_inf();
        let mut worst = 0.0f64;
        for lambda in [sample.lambda1, sample.lambda2] {
            let ev =
                inverse_iteration(&a, &self.mass, lambda, &self.tol).map_err(|e| e.to_string())?;
            worst = worst.max(ev.residual / norm);
        }
        Ok(worst)
    }
}

/// Gap at a single realisation with default quadrature.
pub fn sample_gap(
    model: &CoefficientModel,
    mesh: &UniformMesh,
    y: &ParameterPoint,
    tol: &ToleranceSpec,
) -> Result<GapSample, SurveyError> {
    let sampler = GapSampler::new(*model, *mesh, QuadratureRule::Gauss2, *tol)?;
    sampler
        .sample(0, y)
        .map(|o| o.sample)
        .map_err(SurveyError::SampleFailed)
}

/// Fully resolved survey input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub model: CoefficientModel,
    pub mesh_cells: usize,
    /// At least `s` odd components; only the first `s` are used.
    pub generating_vector: Vec<u64>,
    /// Human-readable origin of the vector (file path or Korobov rule).
    pub genvec_source: String,
    pub m_max: u32,
    pub shift: ShiftSpec,
    #[serde(default)]
    pub solver: ToleranceSpec,
    #[serde(default)]
    pub quadrature: QuadratureRule,
    #[serde(default)]
    pub residual_audit: bool,
    /// Defaults to strict for affine and record for log-normal models.
    #[serde(default)]
    pub fail_policy: Option<FailPolicy>,
}

impl SurveyConfig {
    pub fn fail_policy(&self) -> FailPolicy {
        self.fail_policy
            .unwrap_or_else(|| FailPolicy::default_for(self.model.family()))
    }

    fn active_vector(&self) -> Result<Vec<u64>, SurveyError> {
        let s = self.model.dimension();
        if self.generating_vector.len() < s {
            return Err(SurveyError::Config(format!(
                "generating vector has {} components, model dimension is {s}",
                self.generating_vector.len()
            )));
        }
        Ok(self.generating_vector[..s].to_vec())
    }

    pub fn lattice(&self) -> Result<LatticeSequence, SurveyError> {
        Ok(LatticeSequence::new(
            self.active_vector()?,
            self.m_max,
            self.shift,
        )?)
    }

    /// SHA-256 of the canonical JSON form, with the generating vector
    /// replaced by its checksum.
    pub fn fingerprint(&self) -> Result<String, SurveyError> {
        let z = self.active_vector()?;
        let mut value =
            serde_json::to_value(self).map_err(|e| SurveyError::Config(e.to_string()))?;
        value["generating_vector"] = serde_json::Value::String(generating_vector_checksum(&z));
        let text = serde_json::to_string(&value).map_err(|e| SurveyError::Config(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SurveyOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Keep every successful sample in the result (for `--dump-gaps`).
    pub keep_samples: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub m: u32,
    #[serde(rename = "N")]
    pub n: u64,
    pub delta_n: f64,
    pub argmin_index: u64,
    pub diff: f64,
}

/// Everything needed to reproduce a survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub family: Family,
    pub a0: f64,
    pub c0: f64,
    pub s: usize,
    pub a_star: f64,
    pub mesh_cells: usize,
    pub h: f64,
    pub m_max: u32,
    pub seed: Option<u64>,
    pub genvec_source: String,
    pub genvec_sha256: String,
    pub config_sha256: String,
    pub quadrature: QuadratureRule,
    pub fail_policy: FailPolicy,
}

impl Provenance {
    /// `key=value` pairs for file headers.
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("config_sha256={}", self.config_sha256),
            format!("genvec_sha256={}", self.genvec_sha256),
            format!("genvec_source={}", self.genvec_source),
            format!(
                "seed={}",
                self.seed
                    .map_or_else(|| "none".to_string(), |s| s.to_string())
            ),
            format!(
                "model={} a0={} c0={} s={} a_star={}",
                self.family, self.a0, self.c0, self.s, self.a_star
            ),
            format!("mesh_cells={} h={}", self.mesh_cells, self.h),
            format!("m_max={}", self.m_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub checked: usize,
    pub failed: usize,
    /// Largest `residual / ||A||_inf` seen.
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResult {
    pub levels: Vec<LevelRecord>,
    pub n_star: u64,
    pub fit: Option<PowerLawFit>,
    pub provenance: Provenance,
    pub samples_evaluated: u64,
    pub failed: usize,
    /// The lowest-index failures, at most [`SurveyResult::FAILURE_LOG`].
    pub failures: Vec<SampleFailure>,
    pub clustered: usize,
    pub fallback_brackets: usize,
    pub audit: Option<AuditSummary>,
    #[serde(skip)]
    pub samples: Option<Vec<GapSample>>,
}

impl SurveyResult {
    pub const FAILURE_LOG: usize = 32;

    pub fn delta_star(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.delta_n)
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    gap: f64,
    index: u64,
}

fn better(a: Option<Best>, b: Best) -> Option<Best> {
    match a {
        Some(cur) if (cur.gap, cur.index) <= (b.gap, b.index) => Some(cur),
        _ => Some(b),
    }
}

type Outcome = Result<SampleOutcome, SampleFailure>;
type Audit = Result<f64, String>;

fn block(m: u32) -> std::ops::Range<u64> {
    if m == 0 {
        0..1
    } else {
        (1u64 << (m - 1))..(1u64 << m)
    }
}

pub fn run_survey(
    config: &SurveyConfig,
    options: &SurveyOptions,
) -> Result<SurveyResult, SurveyError> {
    match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SurveyError::Pool(e.to_string()))?;
            pool.install(|| survey_in_pool(config, options))
        }
        None => survey_in_pool(config, options),
    }
}

fn survey_in_pool(
    config: &SurveyConfig,
    options: &SurveyOptions,
) -> Result<SurveyResult, SurveyError> {
    let mesh = UniformMesh::new(config.mesh_cells)?;
    let lattice = config.lattice()?;
    let sampler = GapSampler::new(config.model, mesh, config.quadrature, config.solver)?;
    let policy = config.fail_policy();

    let provenance = Provenance {
        family: config.model.family(),
        a0: config.model.a0(),
        c0: config.model.c0(),
        s: config.model.dimension(),
        a_star: config.model.a_star(),
        mesh_cells: mesh.cells(),
        h: mesh.h(),
        m_max: config.m_max,
        seed: match config.shift {
            ShiftSpec::Seeded(seed) => Some(seed),
            ShiftSpec::None => None,
        },
        genvec_source: config.genvec_source.clone(),
        genvec_sha256: lattice.checksum(),
        config_sha256: config.fingerprint()?,
        quadrature: config.quadrature,
        fail_policy: policy,
    };

    let mut best: Option<Best> = None;
    let mut minima = Vec::with_capacity(config.m_max as usize + 1);
    let mut failed = 0usize;
    let mut failures = Vec::new();
    let mut clustered = 0usize;
    let mut fallback = 0usize;
    let mut audit = config.residual_audit.then_some(AuditSummary {
        checked: 0,
        failed: 0,
        max_relative_residual: 0.0,
    });
    let mut kept = options.keep_samples.then(Vec::new);

    for m in 0..=config.m_max {
        let range = block(m);
        let outcomes: Vec<(Outcome, Option<Audit>)> = (range.start as usize..range.end as usize)
            .into_par_iter()
            .map(|i| {
                let i = i as u64;
                let y = match lattice.lattice_point(i) {
                    Ok(y) => y,
                    Err(e) => {
                        return (
                            Err(SampleFailure {
                                index: i,
                                kind: FailureKind::Coefficient,
                                reason: e.to_string(),
                            }),
                            None,
                        )
                    }
                };
                let outcome = sampler.sample(i, &y);
                let audited = match (
                    &outcome,
                    config.residual_audit && i.is_multiple_of(AUDIT_STRIDE),
                ) {
                    (Ok(o), true) => Some(sampler.audit(&y, &o.sample)),
                    _ => None,
                };
                (outcome, audited)
            })
            .collect();

        for (outcome, audited) in outcomes {
            match outcome {
                Ok(o) => {
                    best = better(
                        best,
                        Best {
                            gap: o.sample.gap,
                            index: o.sample.index,
                        },
                    );
                    clustered += usize::from(o.clustered);
                    fallback += usize::from(o.used_fallback_bracket);
                    if let Some(k) = kept.as_mut() {
                        k.push(o.sample);
                    }
                }
                Err(f) => {
                    if policy == FailPolicy::Strict {
                        return Err(SurveyError::SampleFailed(f));
                    }
                    failed += 1;
                    if failures.len() < SurveyResult::FAILURE_LOG {
                        failures.push(f);
                    }
                }
            }
            if let (Some(summary), Some(result)) = (audit.as_mut(), audited) {
                summary.checked += 1;
                match result {
                    Ok(r) => summary.max_relative_residual = summary.max_relative_residual.max(r),
                    Err(_) => summary.failed += 1,
                }
            }
        }
        minima.push(best);
    }

    let star = minima
        .last()
        .copied()
        .flatten()
        .ok_or(SurveyError::NoSamples)?;
    let levels: Vec<LevelRecord> = minima
        .iter()
        .enumerate()
        .filter_map(|(m, b)| {
            b.map(|b| LevelRecord {
                m: m as u32,
                n: 1u64 << m,
                delta_n: b.gap,
                argmin_index: b.index,
                diff: b.gap - star.gap,
            })
        })
        .collect();
    let points: Vec<(f64, f64)> = levels.iter().map(|l| (l.n as f64, l.diff)).collect();
    let fit = match power_law_fit(&points) {
        Ok(f) => Some(f),
        Err(AnalysisError::InsufficientPoints { .. }) => None,
        Err(e) => return Err(SurveyError::Config(e.to_string())),
    };

    Ok(SurveyResult {
        levels,
        n_star: 1u64 << config.m_max,
        fit,
        provenance,
        samples_evaluated: 1u64 << config.m_max,
        failed,
        failures,
        clustered,
        fallback_brackets: fallback,
        audit,
        samples: kept,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SurveyError + '_ {
    move |source| SurveyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SurveyError + '_ {
    move |source| SurveyError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(
    path: &Path,
    header: &[&str],
    comments: &[String],
    rows: &[T],
) -> Result<(), SurveyError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for line in comments {
        writeln!(out, "# {line}").map_err(io_err(path))?;
    }
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    writer.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

pub const LEVEL_COLUMNS: [&str; 5] = ["m", "N", "delta_N", "argmin_index", "diff"];
pub const SAMPLE_COLUMNS: [&str; 6] =
    ["index", "lambda1", "lambda2", "gap", "coeff_lo", "coeff_hi"];

/// Writes the levels table; `comments` become `# ` header lines.
pub fn write_levels_csv(
    path: &Path,
    levels: &[LevelRecord],
    comments: &[String],
) -> Result<(), SurveyError> {
    write_csv(path, &LEVEL_COLUMNS, comments, levels)
}

pub fn write_samples_csv(
    path: &Path,
    samples: &[GapSample],
    comments: &[String],
) -> Result<(), SurveyError> {
    write_csv(path, &SAMPLE_COLUMNS, comments, samples)
}

/// Reads a levels table, skipping `#` comment lines.
pub fn read_levels_csv(path: &Path) -> Result<Vec<LevelRecord>, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(LEVEL_COLUMNS.iter().copied()) {
        return Err(SurveyError::Config(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            LEVEL_COLUMNS,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err(path))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |i: usize| {
                SurveyError::Config(format!(
                    "{}: line {}: cannot parse {} = {:?}",
                    path.display(),
                    rec.position().map_or(0, |p| p.line()),
                    LEVEL_COLUMNS[i],
                    field(i)
                ))
            };
            Ok(LevelRecord {
                m: field(0).parse().map_err(|_| bad(0))?,
                n: field(1).parse().map_err(|_| bad(1))?,
                delta_n: field(2).parse().map_err(|_| bad(2))?,
                argmin_index: field(3).parse().map_err(|_| bad(3))?,
                diff: field(4).parse().map_err(|_| bad(4))?,
            })
        })
        .collect()
}

/// Fit `alpha N^-beta` to the positive `diff` entries of a levels table.
pub fn fit_levels(levels: &[LevelRecord]) -> Result<PowerLawFit, AnalysisError> {
    let points: Vec<(f64, f64)> = levels.iter().map(|l| (l.n as f64, l.diff)).collect();
    power_law_fit(&points)
}
