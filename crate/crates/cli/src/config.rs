//! Experiment configuration: JSON schema, overrides and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use dilate_core::channel::DensityMatrix;
use dilate_core::dilation::{CutoffMode, CutoffPolicy};
use dilate_core::generators::{
    presets, HamiltonianTerm, JumpTerm, LindbladSpec, TimeGrid, TimeProfile,
};
use dilate_core::linalg::{c, CMatrix, CVector};

use crate::error::CliError;

/// A complex matrix written as rows of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    pub grid: GridBlock,
    pub pipeline: PipelineBlock,
    #[serde(default)]
    pub cutoff: Option<CutoffBlock>,
    #[serde(default)]
    pub perturbation: Option<PerturbationBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Either `{"preset": name, "params": {...}}` or `{"custom": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub custom: Option<CustomSystem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub dim: usize,
    #[serde(default)]
    pub hamiltonian: Vec<CustomHamiltonian>,
    #[serde(default)]
    pub jumps: Vec<CustomJump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomHamiltonian {
    pub matrix: MatrixRows,
    pub profile: TimeProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomJump {
    pub operator: MatrixRows,
    pub rate: TimeProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Diagnose,
    Dilate,
    Simulate,
    Compare,
    Rescale,
    Figures,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Diagnose => "diagnose",
            Stage::Dilate => "dilate",
            Stage::Simulate => "simulate",
            Stage::Compare => "compare",
            Stage::Rescale => "rescale",
            Stage::Figures => "figures",
        }
    }

    fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Simulate | Stage::Rescale => &[Stage::Dilate],
            Stage::Compare => &[Stage::Simulate],
            _ => &[],
        }
    }
}

/// Named initial state or an explicit density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Matrix(MatrixRows),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named("plus".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineBlock {
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub initial_state: InitialState,
    /// Simulation start; defaults to the first point where `H` is defined.
    #[serde(default)]
    pub simulate_from: Option<f64>,
    /// Comparison window start; defaults to the simulation start.
    #[serde(default)]
    pub compare_from: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub rescale: RescaleBlock,
    #[serde(default)]
    pub figures: FiguresBlock,
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_substeps() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleBlock {
    #[serde(default = "default_h0")]
    pub h0: f64,
    #[serde(default)]
    pub anchor_time: f64,
    #[serde(default = "default_factor_tol")]
    pub factor_tol: f64,
}

fn default_h0() -> f64 {
    1.0
}

fn default_factor_tol() -> f64 {
    1e-6
}

impl Default for RescaleBlock {
    fn default() -> Self {
        Self {
            h0: default_h0(),
            anchor_time: 0.0,
            factor_tol: default_factor_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresBlock {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Cutoffs in units of `γ`.
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_fig3_steps")]
    pub fig3_steps: usize,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_cutoffs() -> Vec<f64> {
    vec![20.0, 40.0, 200.0]
}

fn default_omega0() -> f64 {
    2.0
}

fn default_fig3_steps() -> usize {
    500
}

impl Default for FiguresBlock {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            cutoffs: default_cutoffs(),
            omega0: default_omega0(),
            fig3_steps: default_fig3_steps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffBlock {
    pub c: f64,
    #[serde(default = "default_mode")]
    pub mode: CutoffMode,
}

fn default_mode() -> CutoffMode {
    CutoffMode::PrefactorClamp
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationBlock {
    pub delta: f64,
    /// The first-order generator `L⁽¹⁾`, in the same form as `system`.
    pub system: SystemBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("dilate-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// A configuration that passed validation, with its derived objects.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub hash: String,
    pub spec: LindbladSpec,
    pub grid: TimeGrid,
    pub stages: Vec<Stage>,
    /// Stages added because a requested stage depends on them.
    pub implied: Vec<Stage>,
    pub initial_state: DensityMatrix,
    pub cutoff: Option<CutoffPolicy>,
    pub perturbation: Option<(LindbladSpec, f64)>,
}

/// Set `dotted.key` in `doc` to `value`, parsed as JSON when possible and
/// as a plain string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Validation(format!(
            "override '{assignment}' is not of the form key=value"
        ))
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Validation(format!(
                "override key '{key}' has an empty segment"
            )));
        }
        let map = node.as_object_mut().ok_or_else(|| {
            CliError::Validation(format!(
                "override '{key}': '{part}' is not inside an object"
            ))
        })?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one segment")
}

pub fn matrix_from_rows(rows: &MatrixRows, what: &str) -> Result<CMatrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation(format!(
            "{what} must be a non-empty square matrix"
        )));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::Validation(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn build_system(block: &SystemBlock, what: &str) -> Result<LindbladSpec, CliError> {
    match (&block.preset, &block.custom) {
        (Some(name), None) => presets::build_preset(name, &block.params)
            .map_err(|e| CliError::Validation(format!("{what}: {e}"))),
        (None, Some(custom)) => {
            if !block.params.is_empty() {
                return Err(CliError::Validation(format!(
                    "{what}: params apply to presets only"
                )));
            }
            let hamiltonian = custom
                .hamiltonian
                .iter()
                .enumerate()
                .map(|(k, h)| {
                    Ok(HamiltonianTerm {
                        matrix: matrix_from_rows(&h.matrix, &format!("{what} Hamiltonian {k}"))?,
                        profile: h.profile.clone(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let jumps = custom
                .jumps
                .iter()
                .enumerate()
                .map(|(k, j)| {
                    Ok(JumpTerm {
                        operator: matrix_from_rows(&j.operator, &format!("{what} jump {k}"))?,
                        rate: j.rate.clone(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            LindbladSpec::new(custom.dim, hamiltonian, jumps)
                .map_err(|e| CliError::Validation(format!("{what}: {e}")))
        }
        _ => Err(CliError::Validation(format!(
            "{what} needs exactly one of 'preset' or 'custom'"
        ))),
    }
}

fn initial_state(state: &InitialState, d: usize) -> Result<DensityMatrix, CliError> {
    let one = c(1.0, 0.0);
    match state {
        InitialState::Named(name) => {
            let psi = match name.as_str() {
                "ground" => DensityMatrix::basis(d, 0),
                "excited" if d == 2 => DensityMatrix::basis(d, 1),
                "plus" => DensityMatrix::pure(&CVector::from_element(d, one)),
                "maximally_mixed" => DensityMatrix::maximally_mixed(d),
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown initial state '{other}' (expected ground, excited, plus, maximally_mixed or a matrix)"
                    )))
                }
            };
            Ok(psi)
        }
        InitialState::Matrix(rows) => {
            let m = matrix_from_rows(rows, "initial_state")?;
            if m.nrows() != d {
                return Err(CliError::Validation(format!(
                    "initial_state is {}-dimensional, system {d}",
                    m.nrows()
                )));
            }
            DensityMatrix::new(m, 1e-10)
                .map_err(|e| CliError::Validation(format!("initial_state: {e}")))
        }
    }
}

fn stage_order(requested: &[Stage]) -> (Vec<Stage>, Vec<Stage>) {
    let mut all: Vec<Stage> = requested.to_vec();
    let mut implied = Vec::new();
    let mut k = 0;
    while k < all.len() {
        for &p in all[k].prerequisites() {
            if !all.contains(&p) {
                all.push(p);
                implied.push(p);
            }
        }
        k += 1;
    }
    all.sort();
    all.dedup();
    implied.sort();
    (all, implied)
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parse `text`, apply overrides, and validate every block before any
/// computation runs.
pub fn load(text: &str, overrides: &[String]) -> Result<Validated, CliError> {
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let hash = sha256_hex(&serde_json::to_vec(&doc).expect("a parsed document serializes"));
    let config: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::Validation(format!("config schema: {e}")))?;
    validate(config, hash)
}

fn validate(config: ExperimentConfig, hash: String) -> Result<Validated, CliError> {
    if config.pipeline.stages.is_empty() {
        return Err(CliError::Validation("pipeline.stages is empty".into()));
    }
    let spec = build_system(&config.system, "system")?;
    let g = &config.grid;
    let grid = TimeGrid::new(g.t_start, g.t_end, g.n_steps)
        .map_err(|e| CliError::Validation(format!("grid: {e}")))?;
    if !spec.covers(0.0, grid.t_end) {
        return Err(CliError::Validation(format!(
            "system profiles do not cover [0, {}]",
            grid.t_end
        )));
    }
    let (stages, implied) = stage_order(&config.pipeline.stages);
    let p = &config.pipeline;
    if !(p.tolerance > 0.0) {
        return Err(CliError::Validation(
            "pipeline.tolerance must be positive".into(),
        ));
    }
    if p.substeps == 0 {
        return Err(CliError::Validation(
            "pipeline.substeps must be at least 1".into(),
        ));
    }
    for (name, t) in [
        ("simulate_from", p.simulate_from),
        ("compare_from", p.compare_from),
    ] {
        if let Some(t) = t {
            if !(t >= grid.t_start && t <= grid.t_end) {
                return Err(CliError::Validation(format!(
                    "pipeline.{name} = {t} lies outside the grid"
                )));
            }
        }
    }
    if !(p.rescale.h0 > 0.0 && p.rescale.factor_tol > 0.0) {
        return Err(CliError::Validation(
            "pipeline.rescale.h0 and factor_tol must be positive".into(),
        ));
    }
    let f = &p.figures;
    if !(f.gamma > 0.0)
        || f.cutoffs.is_empty()
        || f.cutoffs.iter().any(|c| !(*c > 0.0))
        || f.fig3_steps == 0
    {
        return Err(CliError::Validation(
            "pipeline.figures needs gamma > 0, positive cutoffs and fig3_steps > 0".into(),
        ));
    }
    let initial_state = initial_state(&p.initial_state, spec.dim())?;
    let cutoff = config
        .cutoff
        .as_ref()
        .map(|b| {
            CutoffPolicy::new(b.c, b.mode).map_err(|e| CliError::Validation(format!("cutoff: {e}")))
        })
        .transpose()?;
    let perturbation = match &config.perturbation {
        Some(b) => {
            if !b.delta.is_finite() {
                return Err(CliError::Validation(
                    "perturbation.delta must be finite".into(),
                ));
            }
            if grid.t_start != 0.0 {
                return Err(CliError::Validation(
                    "perturbation needs a grid starting at t = 0".into(),
                ));
            }
            let l1 = build_system(&b.system, "perturbation.system")?;
            if l1.dim() != spec.dim() {
                return Err(CliError::Validation(
                    "perturbation.system must act on the same space as system".into(),
                ));
            }
            Some((l1, b.delta))
        }
        None => None,
    };
    if config.output.formats.is_empty() {
        return Err(CliError::Validation("output.formats is empty".into()));
    }
    Ok(Validated {
        config,
        hash,
        spec,
        grid,
        stages,
        implied,
        initial_state,
        cutoff,
        perturbation,
    })
}
