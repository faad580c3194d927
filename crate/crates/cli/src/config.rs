//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use diffeq::analysis::{diffeo_bank_specs, scalar_field_bank, vector_field_bank, RotationFitOptions};
use diffeq::operators::{OperatorKind, OperatorSpec, Rho};
use diffeq::{ChartDomain, DiffeoSpec, FieldSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Consistent,
    Falsified,
}

impl Expectation {
    /// Verdict predicted for an operator kind: pointwise kinds and scalar
    /// multiples commute, the nonlocal and gain kinds do not.
    pub fn predicted(m: &OperatorSpec) -> Self {
        match m.kind {
            OperatorKind::PointwiseVectorGain { .. } | OperatorKind::GaussianBlur { .. } | OperatorKind::LocalAverage { .. } => {
                Self::Falsified
            }
            _ => Self::Consistent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    Scalar,
    Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorEntry {
    #[serde(flatten)]
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expectation>,
    /// Bank for operators that accept both kinds; scalar when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<BankKind>,
}

impl OperatorEntry {
    pub fn new(operator: OperatorSpec) -> Self {
        Self { operator, expected: None, bank: None }
    }

    pub fn expectation(&self) -> Expectation {
        self.expected.unwrap_or_else(|| Expectation::predicted(&self.operator))
    }

    pub fn bank_kind(&self) -> BankKind {
        match self.operator.accepts() {
            diffeq::operators::Accepts::Scalar => BankKind::Scalar,
            diffeq::operators::Accepts::Vector => BankKind::Vector,
            diffeq::operators::Accepts::Both => self.bank.unwrap_or(BankKind::Scalar),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefectSection {
    /// Torus template; its resolution is replaced by each level.
    pub chart: ChartDomain<f64>,
    pub levels: Vec<usize>,
    pub diffeos: Vec<DiffeoSpec>,
    pub scalar_fields: Vec<FieldSpec>,
    pub vector_fields: Vec<FieldSpec>,
    pub operators: Vec<OperatorEntry>,
    pub budget: usize,
}

impl Default for DefectSection {
    fn default() -> Self {
        Self {
            chart: ChartDomain::torus(2, 0.0, 1.0, 8).unwrap(),
            levels: vec![128, 256],
            diffeos: diffeo_bank_specs(),
            scalar_fields: scalar_field_bank(),
            vector_fields: vector_field_bank(),
            operators: vec![
                OperatorEntry::new(OperatorSpec::pointwise(Rho::Relu)),
                OperatorEntry::new(OperatorSpec::pointwise(Rho::Tanh)),
                OperatorEntry::new(OperatorSpec::pointwise(Rho::Abs)),
                OperatorEntry::new(OperatorSpec::blur(0.05)),
                OperatorEntry::new(OperatorSpec::local_average(0.1)),
                OperatorEntry::new(OperatorSpec::scalar_multiple(-1.5)),
                OperatorEntry::new(OperatorSpec::scalar_multiple(0.0)),
                OperatorEntry::new(OperatorSpec::scalar_multiple(2.0)),
                OperatorEntry::new(OperatorSpec::vector_gain(Rho::Tanh)),
            ],
            budget: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecaySection {
    pub dims: Vec<usize>,
    pub resolution: usize,
    /// Half-width of the box `[-extent, extent]^d`.
    pub extent: f64,
    pub n_values: Vec<u32>,
    pub p: Vec<f64>,
    pub eps: f64,
    pub field_radius: f64,
    pub tolerance: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { dims: vec![1, 2], resolution: 512, extent: 1.6, n_values: vec![2, 4, 8], p: vec![1.0, 2.0], eps: 0.5, field_radius: 0.9, tolerance: 1.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormBoundSection {
    pub resolution: usize,
    pub diffeos: Vec<DiffeoSpec>,
    pub trials: usize,
    pub slack: f64,
}

impl Default for NormBoundSection {
    fn default() -> Self {
        Self { resolution: 256, diffeos: diffeo_bank_specs(), trials: 64, slack: 1.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VitaliSection {
    pub resolution: usize,
    pub field: FieldSpec,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Target as a fraction of `‖1_U f‖_p`.
    pub eps_rel: f64,
    pub max_balls: usize,
}

impl Default for VitaliSection {
    fn default() -> Self {
        Self {
            resolution: 512,
            field: FieldSpec::Bump { center: vec![0.5, 0.5], radius: 0.1, amplitude: 1.0 },
            center: vec![0.5, 0.5],
            radius: 0.15,
            eps_rel: 0.05,
            max_balls: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSection {
    pub resolution: usize,
    pub contravariance_pairs: usize,
    pub flowbox_steps: usize,
    pub rotation: RotationFitOptions,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self { resolution: 256, contravariance_pairs: 20, flowbox_steps: 64, rotation: RotationFitOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub p: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub defect: DefectSection,
    pub decay: DecaySection,
    pub norm_bound: NormBoundSection,
    pub vitali: VitaliSection,
    pub suite: SuiteSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: vec![2.0],
            seed: 0x5eed,
            out_dir: PathBuf::from("out"),
            defect: DefectSection::default(),
            decay: DecaySection::default(),
            norm_bound: NormBoundSection::default(),
            vitali: VitaliSection::default(),
            suite: SuiteSection::default(),
        }
    }
}

/// Parse failure with its position in the document.
#[derive(Debug, thiserror::Error)]
#[error("{path}:{line}:{column}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.display().to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
