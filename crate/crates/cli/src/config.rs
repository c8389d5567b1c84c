//! Experiment configuration files.
//!
//! Configs are TOML. Unknown keys are rejected, `--set a.b=value` overrides
//! are applied before validation, and the fully resolved configuration
//! (every default filled in) can be echoed back with [`Resolved::metadata`].

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use mixsvm_core::loss::LabelRange;
use mixsvm_core::process::{
    ClassProb, LabelModel, MarkovChain, Noise, ProcessKind, RegressionMean, TestFunction, XDist,
};
use mixsvm_core::{KernelKind, KernelSpec, LossKind, LossSpec, ProcessSpec, ScheduleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossDto>,
    #[serde(default)]
    pub kernel: KernelDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleDto>,
    #[serde(default)]
    pub experiment: ExperimentDto,
    #[serde(default)]
    pub mixing: MixingDto,
    #[serde(default)]
    pub lln: LlnDto,
    #[serde(default)]
    pub simulate: RunDto,
    #[serde(default)]
    pub train: RunDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessDto {
    Iid {
        x_dist: XDistDto,
        label: LabelDto,
    },
    MarkovChain {
        trans: Vec<Vec<f64>>,
        /// Defaults to the chain's stationary law.
        #[serde(default)]
        init: Option<Vec<f64>>,
        /// Defaults to the state index as a 1-d input.
        #[serde(default)]
        feature_map: Option<Vec<Vec<f64>>>,
        label: LabelDto,
    },
    Ar1 {
        rho: f64,
        noise_sd: f64,
        /// Defaults to a stationary start.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
        label: LabelDto,
    },
    NoisyDoubling {
        noise_sd: f64,
        label: LabelDto,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum XDistDto {
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        sds: Vec<f64>,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelDto {
    Classification { eta: EtaDto },
    Regression { mean: MeanDto, noise: NoiseDto, moment_order: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaDto {
    Constant(f64),
    PerState(Vec<f64>),
    Logistic { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanDto {
    PerState(Vec<f64>),
    Linear { weights: Vec<f64>, bias: f64 },
    Sine { amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDto {
    Gaussian { sd: f64 },
    Laplace { scale: f64 },
    StudentT { dof: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossDto {
    /// hinge, squared_hinge, logistic, least_squares, absolute,
    /// epsilon_insensitive or huber.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Closed label interval `[lo, hi]`; margin losses always use {-1, 1}
    /// and distance losses default to the whole real line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDto {
    /// gaussian, linear or polynomial.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    /// Bound on `‖x‖` used for the sup norm of unbounded kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_bound: Option<f64>,
}

impl Default for KernelDto {
    fn default() -> Self {
        Self {
            kind: "gaussian".into(),
            sigma: Some(1.0),
            degree: None,
            offset: None,
            domain_bound: None,
        }
    }
}

/// A rational number written as an integer, a decimal or `"num/den"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalDto {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalDto {
    pub fn value(&self, field: &str) -> Result<Rational64> {
        match self {
            RationalDto::Int(i) => Ok(Rational64::from_integer(*i)),
            RationalDto::Float(f) => {
                Rational64::approximate_float(*f).ok_or_else(|| anyhow!("{field}: {f} is not a finite rational"))
            }
            RationalDto::Text(s) => {
                Rational64::from_str(s.trim()).map_err(|_| anyhow!("{field}: cannot parse `{s}` as a rational"))
            }
        }
    }

    fn normalized(&self, field: &str) -> Result<Self> {
        Ok(RationalDto::Text(self.value(field)?.to_string()))
    }
}

fn one() -> RationalDto {
    RationalDto::Text("1".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDto {
    pub c: f64,
    pub gamma: RationalDto,
    /// Decay exponent of the marginal averages and bi-mixing averages.
    #[serde(default = "one")]
    pub alpha: RationalDto,
    /// Decay exponent of the blended bi-mixing average (regression).
    #[serde(default = "one")]
    pub beta: RationalDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentDto {
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_m: usize,
    pub ref_m_factor: usize,
    pub tol: f64,
    pub max_epochs: usize,
    pub future_window: usize,
}

impl Default for ExperimentDto {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 400, 1600, 6400],
            seeds: (1..=20).collect(),
            test_m: 10_000,
            ref_m_factor: 20,
            tol: 1e-8,
            max_epochs: 20_000,
            future_window: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingDto {
    pub lags: Vec<usize>,
    /// Time index of the first variable of each lag pair.
    pub start: usize,
    /// Sizes at which to fit the decay exponents; empty skips the fit.
    pub exponent_grid: Vec<usize>,
}

impl Default for MixingDto {
    fn default() -> Self {
        Self {
            lags: (1..=10).collect(),
            start: 1,
            exponent_grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnDto {
    /// `constant:c`, `state:s` or `threshold:coord:at`.
    pub test_functions: Vec<String>,
}

impl Default for LlnDto {
    fn default() -> Self {
        Self {
            test_functions: vec!["constant:1".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunDto {
    pub n: usize,
    pub seed: u64,
}

impl Default for RunDto {
    fn default() -> Self {
        Self { n: 1000, seed: 1 }
    }
}

/// Validated domain objects built from a config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The configuration with every default filled in.
    pub file: ConfigFile,
    pub process: Option<ProcessSpec>,
    pub loss: Option<LossSpec>,
    pub kernel: KernelSpec,
    pub domain_bound: Option<f64>,
    pub schedule: Option<ScheduleSpec>,
    pub alpha: Rational64,
    pub beta: Rational64,
    pub test_functions: Vec<TestFunction>,
}

impl Resolved {
    pub fn process(&self) -> Result<&ProcessSpec> {
        self.process.as_ref().ok_or_else(|| anyhow!("missing section [process]"))
    }

    pub fn loss(&self) -> Result<&LossSpec> {
        self.loss.as_ref().ok_or_else(|| anyhow!("missing section [loss]"))
    }

    pub fn schedule(&self) -> Result<&ScheduleSpec> {
        self.schedule.as_ref().ok_or_else(|| anyhow!("missing section [schedule]"))
    }

    /// The resolved configuration as TOML, headed by the tool version.
    pub fn metadata(&self) -> Result<String> {
        let body = toml::to_string(&self.file).context("serializing resolved config")?;
        Ok(format!("# resolved by mixsvm {}\n{body}", env!("CARGO_PKG_VERSION")))
    }
}

/// Reads and resolves a config file.
pub fn load(path: &Path, overrides: &[String]) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_str(&text, overrides).with_context(|| format!("in config {}", path.display()))
}

/// Parses TOML text, applies `key=value` overrides and resolves the result.
pub fn parse_str(text: &str, overrides: &[String]) -> Result<Resolved> {
    let file: ConfigFile = if overrides.is_empty() {
        // direct parsing keeps line information in schema errors
        toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| anyhow!("invalid config: {e}"))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| anyhow!("invalid config after overrides: {e}"))?
    };
    resolve(file)
}

/// Sets a dotted key in a TOML table. The value is parsed as a TOML value
/// and taken as a plain string when that fails.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override `{spec}` has an empty key");
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn resolve(mut file: ConfigFile) -> Result<Resolved> {
    let process = match file.process.as_mut() {
        Some(p) => Some(build_process(p)?),
        None => None,
    };
    let loss = file.loss.as_ref().map(build_loss).transpose()?;
    let input_dim = process.as_ref().map_or(1, |p| p.input_dim());
    let kernel = build_kernel(&file.kernel, input_dim)?;
    let domain_bound = file.kernel.domain_bound;
    if let Some(b) = domain_bound {
        if !(b > 0.0) {
            bail!("kernel.domain_bound: must be > 0, got {b}");
        }
    }
    let (schedule, alpha, beta) = match file.schedule.as_mut() {
        Some(s) => {
            let gamma = s.gamma.value("schedule.gamma")?;
            let alpha = s.alpha.value("schedule.alpha")?;
            let beta = s.beta.value("schedule.beta")?;
            s.gamma = s.gamma.normalized("schedule.gamma")?;
            s.alpha = s.alpha.normalized("schedule.alpha")?;
            s.beta = s.beta.normalized("schedule.beta")?;
            let spec = ScheduleSpec::new(s.c, gamma).map_err(|e| anyhow!("schedule: {e}"))?;
            (Some(spec), alpha, beta)
        }
        None => (None, Rational64::from_integer(1), Rational64::from_integer(1)),
    };
    if let (Some(p), Some(l)) = (&process, &loss) {
        p.check_loss(l).map_err(|e| anyhow!("loss: {e}"))?;
    }
    let test_functions = file
        .lln
        .test_functions
        .iter()
        .map(|s| parse_test_function(s))
        .collect::<Result<Vec<_>>>()?;
    validate_experiment(&file.experiment)?;
    Ok(Resolved {
        file,
        process,
        loss,
        kernel,
        domain_bound,
        schedule,
        alpha,
        beta,
        test_functions,
    })
}

fn validate_experiment(e: &ExperimentDto) -> Result<()> {
    if e.n_grid.is_empty() || e.n_grid.contains(&0) {
        bail!("experiment.n_grid: must list positive sizes");
    }
    if e.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("experiment.n_grid: must be strictly ascending");
    }
    if e.seeds.is_empty() {
        bail!("experiment.seeds: must be nonempty");
    }
    if e.test_m < mixsvm_core::harness::MIN_TEST_M {
        bail!("experiment.test_m: must be >= {}, got {}", mixsvm_core::harness::MIN_TEST_M, e.test_m);
    }
    if e.ref_m_factor == 0 {
        bail!("experiment.ref_m_factor: must be positive");
    }
    if !(e.tol > 0.0) {
        bail!("experiment.tol: must be > 0, got {}", e.tol);
    }
    Ok(())
}

pub fn parse_test_function(s: &str) -> Result<TestFunction> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| anyhow!("lln.test_functions: bad number in `{s}`")) };
    let idx = |v: &str| -> Result<usize> { v.parse().map_err(|_| anyhow!("lln.test_functions: bad index in `{s}`")) };
    match parts.as_slice() {
        ["constant", c] => Ok(TestFunction::Constant(num(c)?)),
        ["state", k] => Ok(TestFunction::StateIndicator(idx(k)?)),
        ["threshold", coord, at] => Ok(TestFunction::Threshold {
            coord: idx(coord)?,
            at: num(at)?,
        }),
        _ => bail!("lln.test_functions: unknown test function `{s}`"),
    }
}

fn build_label(l: &LabelDto) -> LabelModel {
    match l {
        LabelDto::Classification { eta } => LabelModel::Classification(match eta {
            EtaDto::Constant(c) => ClassProb::Constant(*c),
            EtaDto::PerState(v) => ClassProb::PerState(v.clone()),
            EtaDto::Logistic { weights, bias } => ClassProb::Logistic {
                weights: weights.clone(),
                bias: *bias,
            },
        }),
        LabelDto::Regression { mean, noise, moment_order } => LabelModel::Regression {
            mean: match mean {
                MeanDto::PerState(v) => RegressionMean::PerState(v.clone()),
                MeanDto::Linear { weights, bias } => RegressionMean::Linear {
                    weights: weights.clone(),
                    bias: *bias,
                },
                MeanDto::Sine { amplitude, frequency } => RegressionMean::Sine {
                    amplitude: *amplitude,
                    frequency: *frequency,
                },
            },
            noise: match *noise {
                NoiseDto::Gaussian { sd } => Noise::Gaussian { sd },
                NoiseDto::Laplace { scale } => Noise::Laplace { scale },
                NoiseDto::StudentT { dof, scale } => Noise::StudentT { dof, scale },
            },
            moment_order: *moment_order,
        },
    }
}

/// Builds the process and fills the defaulted fields of `dto` in place.
fn build_process(dto: &mut ProcessDto) -> Result<ProcessSpec> {
    let (kind, label) = match dto {
        ProcessDto::Iid { x_dist, label } => {
            let x_dist = match x_dist {
                XDistDto::GaussianMixture { weights, means, sds } => XDist::GaussianMixture {
                    weights: weights.clone(),
                    means: means.clone(),
                    sds: sds.clone(),
                },
                XDistDto::UniformBox { lo, hi } => XDist::UniformBox {
                    lo: lo.clone(),
                    hi: hi.clone(),
                },
            };
            (ProcessKind::Iid { x_dist }, build_label(label))
        }
        ProcessDto::MarkovChain {
            trans,
            init,
            feature_map,
            label,
        } => {
            let m = trans.len();
            let fm = feature_map
                .get_or_insert_with(|| (0..m).map(|i| vec![i as f64]).collect())
                .clone();
            let chain = match init {
                Some(v) => MarkovChain::new(trans.clone(), v.clone(), fm),
                None => MarkovChain::stationary(trans.clone(), fm),
            }
            .map_err(|e| anyhow!("process.trans/init/feature_map: {e}"))?;
            *init = Some(chain.init().to_vec());
            (ProcessKind::MarkovChain(chain), build_label(label))
        }
        ProcessDto::Ar1 {
            rho,
            noise_sd,
            x0,
            label,
        } => (
            ProcessKind::Ar1 {
                rho: *rho,
                noise_sd: *noise_sd,
                x0: *x0,
            },
            build_label(label),
        ),
        ProcessDto::NoisyDoubling { noise_sd, label } => {
            (ProcessKind::NoisyDoubling { noise_sd: *noise_sd }, build_label(label))
        }
    };
    ProcessSpec::new(kind, label).map_err(|e| anyhow!("process: {e}"))
}

fn build_loss(dto: &LossDto) -> Result<LossSpec> {
    let needs = |name: &str, v: Option<f64>| -> Result<f64> {
        v.ok_or_else(|| anyhow!("loss.{name}: required for loss kind `{}`", dto.kind))
    };
    let kind = match dto.kind.as_str() {
        "hinge" => LossKind::Hinge,
        "squared_hinge" => LossKind::SquaredHinge,
        "logistic" => LossKind::LogisticMargin,
        "least_squares" => LossKind::LeastSquares,
        "absolute" => LossKind::AbsoluteDistance,
        "epsilon_insensitive" => LossKind::EpsilonInsensitive {
            epsilon: needs("epsilon", dto.epsilon)?,
        },
        "huber" => LossKind::Huber {
            delta: needs("delta", dto.delta)?,
        },
        other => bail!("loss.kind: unknown loss `{other}`"),
    };
    if dto.epsilon.is_some() && dto.kind != "epsilon_insensitive" {
        bail!("loss.epsilon: only valid for epsilon_insensitive");
    }
    if dto.delta.is_some() && dto.kind != "huber" {
        bail!("loss.delta: only valid for huber");
    }
    let spec = match dto.y_range {
        None => LossSpec::new(kind),
        Some([lo, hi]) => LossSpec::with_range(kind, LabelRange::Interval { lo, hi }),
    };
    spec.map_err(|e| anyhow!("loss: {e}"))
}

fn build_kernel(dto: &KernelDto, input_dim: usize) -> Result<KernelSpec> {
    let forbid = |name: &str, present: bool| -> Result<()> {
        if present {
            bail!("kernel.{name}: not a parameter of kernel kind `{}`", dto.kind);
        }
        Ok(())
    };
    let kind = match dto.kind.as_str() {
        "gaussian" => {
            forbid("degree", dto.degree.is_some())?;
            forbid("offset", dto.offset.is_some())?;
            KernelKind::Gaussian {
                sigma: dto.sigma.ok_or_else(|| anyhow!("kernel.sigma: required for gaussian kernels"))?,
            }
        }
        "linear" => {
            forbid("sigma", dto.sigma.is_some())?;
            forbid("degree", dto.degree.is_some())?;
            forbid("offset", dto.offset.is_some())?;
            KernelKind::Linear
        }
        "polynomial" => {
            forbid("sigma", dto.sigma.is_some())?;
            KernelKind::Polynomial {
                degree: dto.degree.ok_or_else(|| anyhow!("kernel.degree: required for polynomial kernels"))?,
                offset: dto.offset.unwrap_or(0.0),
            }
        }
        other => bail!("kernel.kind: unknown kernel `{other}`"),
    };
    KernelSpec::new(kind, input_dim).map_err(|e| anyhow!("kernel: {e}"))
}
