//! Configuration, orchestration and output for the `twistlab` binary.
//!
//! A run is described by one JSON document:
//!
//! ```json
//! { "experiment": "fcs", "seed": 0, "params": { "lambdas": [-0.5, 0.0, 0.5] } }
//! ```
//!
//! Unknown keys are rejected at every level. Each experiment evaluates a sweep
//! grid, attaches its invariant checks to every row, and emits CSV or JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlators::{centered_two_point_sequence, fcs_from_covariance, TwistKind};
use crate::edcore::{
    build_spin_hamiltonian, expectation, ground_state, product_operator, site_operator, thermal_density_matrix,
    Boundary, ChainModel, Family, SiteOp, StateRecord,
};
use crate::entanglement::{
    cft_exponent_fit, reduced_density_matrix, renyi_from_gaussian, renyi_from_rdm, tr_rhoa_n_replica, EntropyMethod,
    MAX_REPLICA_QUBITS,
};
use crate::error::{Error, Result};
use crate::formfactor::{ff_axiom_residuals, ff_series_two_point_with, AxiomGrid, FormFactor, SeriesOptions};
use crate::gaussian::{
    bdg_diagonalize, chain_ground_covariance, thermal_covariance, BdGForm, FermionBoundary, MajoranaCovariance,
};
use crate::jordanwigner::{jw_fermions_from_spins, sector_hamiltonians};
use crate::toda::{sample_toda_thermal, stretch_fcs_estimate, stretch_fcs_oracle};
use crate::twist::{conjugation_automorphism, exchange_residual, left_right_residual, Generator, TwistSpec};

/// Environment variable holding the default thread budget.
pub const THREADS_ENV: &str = "TWISTLAB_THREADS";
/// Environment variable that turns on per-check summaries on stderr.
pub const VERBOSE_ENV: &str = "TWISTLAB_VERBOSE";

/// Largest chain for the dense spectrum comparison in `jw-check`.
const MAX_JW_CHECK_SITES: usize = 10;
/// Chains up to this size get an exact-diagonalization cross-check.
const ED_CROSSCHECK_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ed,
    TwistCheck,
    JwCheck,
    Gaussian,
    Correlator,
    Fcs,
    Entropy,
    CftFit,
    Formfactor,
    Toda,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ed => "ed",
            Self::TwistCheck => "twist-check",
            Self::JwCheck => "jw-check",
            Self::Gaussian => "gaussian",
            Self::Correlator => "correlator",
            Self::Fcs => "fcs",
            Self::Entropy => "entropy",
            Self::CftFit => "cft-fit",
            Self::Formfactor => "formfactor",
            Self::Toda => "toda",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment parameters

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdParams {
    pub model: ChainModel,
    /// Thermal states to prepare besides the ground state.
    pub betas: Vec<f64>,
}

impl Default for EdParams {
    fn default() -> Self {
        Self { model: ChainModel::transverse_ising(8, 1.0, 0.5, Boundary::Open), betas: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistCheckParams {
    pub length: usize,
    pub generator: Generator,
    pub anchor: usize,
    pub lambdas: Vec<f64>,
    /// Random single-site probes per λ, drawn from the run seed.
    pub probes: usize,
}

impl Default for TwistCheckParams {
    fn default() -> Self {
        Self { length: 10, generator: Generator::Sigma3, anchor: 4, lambdas: vec![0.3, 1.1, 2.5], probes: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JwCheckParams {
    pub model: ChainModel,
}

impl Default for JwCheckParams {
    fn default() -> Self {
        Self { model: ChainModel::transverse_ising(6, 1.0, 0.7, Boundary::Periodic) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianParams {
    pub model: ChainModel,
    /// Thermal states besides the ground state (open chains only).
    pub betas: Vec<f64>,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self { model: ChainModel::transverse_ising(12, 1.0, 0.5, Boundary::Open), betas: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelatorParams {
    pub model: ChainModel,
    pub kind: TwistKind,
    /// Pair separations, placed symmetrically about the middle of the chain.
    pub separations: Vec<usize>,
    /// Transverse fields to sweep; empty means the model's own field.
    pub fields: Vec<f64>,
}

impl Default for CorrelatorParams {
    fn default() -> Self {
        Self {
            model: ChainModel::transverse_ising(12, 1.0, 0.5, Boundary::Open),
            kind: TwistKind::Order,
            separations: (1..=9).collect(),
            fields: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcsParams {
    pub model: ChainModel,
    /// Thermal states; empty means the ground state.
    pub betas: Vec<f64>,
    pub region_start: usize,
    pub region_size: usize,
    /// Strictly increasing counting fields.
    pub lambdas: Vec<f64>,
}

impl Default for FcsParams {
    fn default() -> Self {
        Self {
            model: ChainModel::xx(8, 1.0, 0.0, Boundary::Open),
            betas: vec![0.5, 1.0, 2.0],
            region_start: 2,
            region_size: 4,
            lambdas: linspace(-1.0, 1.0, 21),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyParams {
    pub model: ChainModel,
    pub orders: Vec<f64>,
    pub region_start: usize,
    /// Empty means `1 ..= L/2`.
    pub region_sizes: Vec<usize>,
    /// Empty means every method that fits the chain.
    pub methods: Vec<EntropyMethod>,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            model: ChainModel::transverse_ising(7, 1.0, 1.0, Boundary::Open),
            orders: vec![2.0],
            region_start: 0,
            region_sizes: Vec::new(),
            methods: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CftFitParams {
    pub model: ChainModel,
    pub orders: Vec<f64>,
}

impl Default for CftFitParams {
    fn default() -> Self {
        Self { model: ChainModel::transverse_ising(128, 1.0, 1.0, Boundary::Periodic), orders: vec![2.0, 3.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormfactorParams {
    pub mass: f64,
    pub vev: f64,
    pub separations: Vec<f64>,
    pub grid: AxiomGrid,
}

impl Default for FormfactorParams {
    fn default() -> Self {
        Self { mass: 1.0, vev: 1.0, separations: vec![0.5, 1.0, 2.0, 5.0], grid: AxiomGrid::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TodaParams {
    pub beta: f64,
    pub pressure: f64,
    pub sites: usize,
    pub draws: usize,
    pub lambdas: Vec<f64>,
    /// Heights at which to evaluate; empty means `0 ..= sites`.
    pub xs: Vec<usize>,
}

impl Default for TodaParams {
    fn default() -> Self {
        Self { beta: 1.0, pressure: 3.0, sites: 20, draws: 100_000, lambdas: vec![0.5], xs: vec![1, 5, 10, 20] }
    }
}

/// Typed parameters of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Ed(EdParams),
    TwistCheck(TwistCheckParams),
    JwCheck(JwCheckParams),
    Gaussian(GaussianParams),
    Correlator(CorrelatorParams),
    Fcs(FcsParams),
    Entropy(EntropyParams),
    CftFit(CftFitParams),
    Formfactor(FormfactorParams),
    Toda(TodaParams),
}

impl Params {
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Ed => Self::Ed(Default::default()),
            ExperimentKind::TwistCheck => Self::TwistCheck(Default::default()),
            ExperimentKind::JwCheck => Self::JwCheck(Default::default()),
            ExperimentKind::Gaussian => Self::Gaussian(Default::default()),
            ExperimentKind::Correlator => Self::Correlator(Default::default()),
            ExperimentKind::Fcs => Self::Fcs(Default::default()),
            ExperimentKind::Entropy => Self::Entropy(Default::default()),
            ExperimentKind::CftFit => Self::CftFit(Default::default()),
            ExperimentKind::Formfactor => Self::Formfactor(Default::default()),
            ExperimentKind::Toda => Self::Toda(Default::default()),
        }
    }

    fn from_value(kind: ExperimentKind, v: serde_json::Value) -> Result<Self> {
        fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
            serde_json::from_value(v).map_err(|e| Error::Config(format!("params: {e}")))
        }
        Ok(match kind {
            ExperimentKind::Ed => Self::Ed(parse(v)?),
            ExperimentKind::TwistCheck => Self::TwistCheck(parse(v)?),
            ExperimentKind::JwCheck => Self::JwCheck(parse(v)?),
            ExperimentKind::Gaussian => Self::Gaussian(parse(v)?),
            ExperimentKind::Correlator => Self::Correlator(parse(v)?),
            ExperimentKind::Fcs => Self::Fcs(parse(v)?),
            ExperimentKind::Entropy => Self::Entropy(parse(v)?),
            ExperimentKind::CftFit => Self::CftFit(parse(v)?),
            ExperimentKind::Formfactor => Self::Formfactor(parse(v)?),
            ExperimentKind::Toda => Self::Toda(parse(v)?),
        })
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::Ed(_) => ExperimentKind::Ed,
            Self::TwistCheck(_) => ExperimentKind::TwistCheck,
            Self::JwCheck(_) => ExperimentKind::JwCheck,
            Self::Gaussian(_) => ExperimentKind::Gaussian,
            Self::Correlator(_) => ExperimentKind::Correlator,
            Self::Fcs(_) => ExperimentKind::Fcs,
            Self::Entropy(_) => ExperimentKind::Entropy,
            Self::CftFit(_) => ExperimentKind::CftFit,
            Self::Formfactor(_) => ExperimentKind::Formfactor,
            Self::Toda(_) => ExperimentKind::Toda,
        }
    }
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<ExperimentKind>,
    #[serde(default)]
    seed: u64,
    threads: Option<usize>,
    output: Option<PathBuf>,
    #[serde(default)]
    format: OutputFormat,
    #[serde(default)]
    check: bool,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Thread budget; `None` falls back to `TWISTLAB_THREADS`, then 1.
    pub threads: Option<usize>,
    /// Output directory; `None` writes to stdout.
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Evaluate and report the invariant checks without emitting data.
    pub check: bool,
    pub params: Params,
}

impl RunConfig {
    pub fn new(params: Params) -> Self {
        Self { seed: 0, threads: None, output: None, format: OutputFormat::Csv, check: false, params }
    }

    pub fn default_for(kind: ExperimentKind) -> Self {
        Self::new(Params::default_for(kind))
    }

    pub fn experiment(&self) -> ExperimentKind {
        self.params.kind()
    }

    /// Parses a JSON document. `expected` is the experiment named on the command line;
    /// the document may omit `experiment` but must not contradict it.
    pub fn from_json(text: &str, expected: Option<ExperimentKind>) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let kind = match (raw.experiment, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "config describes experiment '{}' but '{}' was requested",
                    a.name(),
                    b.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing key 'experiment'".into())),
        };
        let params = match raw.params {
            Some(v) => Params::from_value(kind, v)?,
            None => Params::default_for(kind),
        };
        let cfg = Self { seed: raw.seed, threads: raw.threads, output: raw.output, format: raw.format, check: raw.check, params };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical document: sorted keys, defaults filled in.
    pub fn to_json(&self) -> String {
        let mut m = serde_json::Map::new();
        m.insert("experiment".into(), serde_json::json!(self.experiment()));
        m.insert("seed".into(), serde_json::json!(self.seed));
        m.insert("format".into(), serde_json::json!(self.format));
        m.insert("check".into(), serde_json::json!(self.check));
        if let Some(t) = self.threads {
            m.insert("threads".into(), serde_json::json!(t));
        }
        if let Some(o) = &self.output {
            m.insert("output".into(), serde_json::json!(o));
        }
        m.insert("params".into(), serde_json::to_value(&self.params).expect("params serialize"));
        serde_json::Value::Object(m).to_string()
    }

    /// SHA-256 over the canonical JSON of everything that can change the numbers:
    /// experiment, seed and params. Output location, format and threads are left out.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::json!({
            "experiment": self.experiment(),
            "seed": self.seed,
            "params": self.params,
        })
        .to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Schema-level checks; violations are configuration errors.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let finite = |name: &str, vs: &[f64]| -> Result<()> {
            match vs.iter().find(|v| !v.is_finite()) {
                Some(v) => Err(Error::Config(format!("{name} must be finite, got {v}"))),
                None => Ok(()),
            }
        };
        let model = |m: &ChainModel| m.validate().map_err(|e| Error::Config(format!("model: {e}")));
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let betas = |bs: &[f64]| -> Result<()> {
            finite("betas", bs)?;
            match bs.iter().find(|&&b| b < 0.0) {
                Some(b) => Err(Error::Config(format!("betas must be non-negative, got {b}"))),
                None => Ok(()),
            }
        };
        let non_empty = |name: &str, empty: bool| -> Result<()> {
            if empty {
                Err(Error::Config(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        match &self.params {
            Params::Ed(p) => {
                model(&p.model)?;
                betas(&p.betas)?;
            }
            Params::TwistCheck(p) => {
                finite("lambdas", &p.lambdas)?;
                non_empty("lambdas", p.lambdas.is_empty())?;
                if p.length == 0 || p.anchor >= p.length {
                    return Err(Error::Config(format!("need 0 <= anchor < length, got {} and {}", p.anchor, p.length)));
                }
            }
            Params::JwCheck(p) => model(&p.model)?,
            Params::Gaussian(p) => {
                model(&p.model)?;
                betas(&p.betas)?;
                if !p.betas.is_empty() && p.model.boundary == Boundary::Periodic {
                    return Err(Error::Config("thermal Gaussian states need an open chain".into()));
                }
            }
            Params::Correlator(p) => {
                model(&p.model)?;
                finite("fields", &p.fields)?;
                non_empty("separations", p.separations.is_empty())?;
            }
            Params::Fcs(p) => {
                model(&p.model)?;
                betas(&p.betas)?;
                finite("lambdas", &p.lambdas)?;
                non_empty("lambdas", p.lambdas.is_empty())?;
                if p.lambdas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("lambdas must be strictly increasing".into()));
                }
                if !p.betas.is_empty() && p.model.boundary == Boundary::Periodic {
                    return Err(Error::Config("thermal Gaussian states need an open chain".into()));
                }
                if p.region_size == 0 || p.region_start + p.region_size > p.model.length {
                    return Err(Error::Config("region must be non-empty and inside the chain".into()));
                }
            }
            Params::Entropy(p) => {
                model(&p.model)?;
                finite("orders", &p.orders)?;
                non_empty("orders", p.orders.is_empty())?;
                if let Some(n) = p.orders.iter().find(|&&n| n <= 0.0) {
                    return Err(Error::Config(format!("Rényi orders must be positive, got {n}")));
                }
                let sizes = entropy_sizes(p);
                if sizes.iter().any(|&s| s == 0 || p.region_start + s > p.model.length) {
                    return Err(Error::Config("regions must be non-empty and inside the chain".into()));
                }
            }
            Params::CftFit(p) => {
                model(&p.model)?;
                finite("orders", &p.orders)?;
                non_empty("orders", p.orders.is_empty())?;
            }
            Params::Formfactor(p) => {
                positive("mass", p.mass)?;
                finite("vev", &[p.vev])?;
                finite("separations", &p.separations)?;
                for &r in &p.separations {
                    positive("separation", r)?;
                }
            }
            Params::Toda(p) => {
                positive("beta", p.beta)?;
                positive("pressure", p.pressure)?;
                finite("lambdas", &p.lambdas)?;
                if p.sites == 0 || p.draws < 2 {
                    return Err(Error::Config("toda needs at least one site and two draws".into()));
                }
                if let Some(x) = p.xs.iter().find(|&&x| x > p.sites) {
                    return Err(Error::Config(format!("height x = {x} exceeds {} sites", p.sites)));
                }
            }
        }
        Ok(())
    }

    fn thread_budget(&self) -> usize {
        self.threads
            .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()))
            .filter(|&n| n > 0)
            .unwrap_or(1)
    }
}

// ---------------------------------------------------------------------------
// Records

/// One output cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    /// Serialized as `[re, im]`.
    Complex(C64),
    Text(String),
}

/// A built-in invariant check: pass when `value ≤ tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    /// Position on the sweep grid.
    pub index: usize,
    #[serde(with = "ordered")]
    pub values: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    /// Seconds spent on this grid point; excluded from CSV.
    pub wall_time: f64,
}

/// Keeps the column order of `values` in JSON objects.
mod ordered {
    use super::Value;
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(String, Value)], s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(v.len()))?;
        for (k, x) in v {
            m.serialize_entry(k, x)?;
        }
        m.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, Value)>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<(String, super::Value)>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an object of output values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut a: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(e) = a.next_entry()? {
                    out.push(e);
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub complex: bool,
}

/// All records of one run plus the column layout, which exists even when no rows do.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub columns: Vec<Column>,
    pub checks: Vec<String>,
    pub records: Vec<ResultRecord>,
}

impl ResultSet {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.checks.iter().all(|c| c.pass))
    }

    /// `(check name, passed, total)` in schema order.
    pub fn check_summary(&self) -> Vec<(String, usize, usize)> {
        self.checks
            .iter()
            .map(|name| {
                let mut pass = 0;
                let mut total = 0;
                for c in self.records.iter().flat_map(|r| &r.checks).filter(|c| &c.name == name) {
                    total += 1;
                    pass += c.pass as usize;
                }
                (name.clone(), pass, total)
            })
            .collect()
    }
}

/// A row under construction.
#[derive(Default)]
struct Row {
    values: Vec<(String, Value)>,
    checks: Vec<Check>,
}

impl Row {
    fn int(mut self, name: &str, v: usize) -> Self {
        self.values.push((name.into(), Value::Int(v as i64)));
        self
    }
    fn real(mut self, name: &str, v: f64) -> Self {
        self.values.push((name.into(), Value::Real(v)));
        self
    }
    fn complex(mut self, name: &str, v: C64) -> Self {
        self.values.push((name.into(), Value::Complex(v)));
        self
    }
    fn text(mut self, name: &str, v: &str) -> Self {
        self.values.push((name.into(), Value::Text(v.into())));
        self
    }
    /// Inverse temperature; the ground state is written as `inf`.
    fn beta(self, beta: Option<f64>) -> Self {
        match beta {
            Some(b) => self.real("beta", b),
            None => self.text("beta", "inf"),
        }
    }
    fn check(mut self, name: &str, value: f64, tolerance: f64) -> Self {
        self.checks.push(Check { name: name.into(), value, tolerance, pass: value <= tolerance });
        self
    }
}

/// Column layout of an experiment; complex columns are marked with a trailing `*`.
struct Schema {
    columns: Vec<Column>,
    checks: Vec<String>,
}

impl Schema {
    fn new(columns: &[&str], checks: &[&str]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|c| match c.strip_suffix('*') {
                    Some(n) => Column { name: n.into(), complex: true },
                    None => Column { name: (*c).into(), complex: false },
                })
                .collect(),
            checks: checks.iter().map(|c| (*c).into()).collect(),
        }
    }

    fn conforms(&self, row: &Row) -> bool {
        row.values.len() == self.columns.len()
            && row.values.iter().zip(&self.columns).all(|((n, v), c)| *n == c.name && matches!(v, Value::Complex(_)) == c.complex)
            && row.checks.len() == self.checks.len()
            && row.checks.iter().zip(&self.checks).all(|(a, b)| &a.name == b)
    }
}

/// Adds the grid point to an error message, keeping its kind.
fn at_point(e: Error, point: &str) -> Error {
    match e {
        Error::Capacity(m) => Error::Capacity(format!("{point}: {m}")),
        Error::Index(m) => Error::Index(format!("{point}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{point}: {m}")),
        Error::Pole(m) => Error::Pole(format!("{point}: {m}")),
        Error::Quadrature(m) => Error::Quadrature(format!("{point}: {m}")),
        Error::Divergence(m) => Error::Divergence(format!("{point}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{point}: {m}")),
        Error::Config(m) => Error::Config(format!("{point}: {m}")),
        other => other,
    }
}

/// Evaluates `f` on every point, in parallel, returning results in grid order with
/// their wall time.
fn sweep<P, T>(points: &[P], f: impl Fn(&P) -> Result<T> + Sync) -> Result<Vec<(T, f64)>>
where
    P: Sync + std::fmt::Debug,
    T: Send,
{
    points
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let row = f(p).map_err(|e| at_point(e, &format!("grid point {p:?}")))?;
            Ok((row, start.elapsed().as_secs_f64()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Experiments

/// Runs the configured experiment on a pool of `threads` workers.
pub fn run_experiment(cfg: &RunConfig) -> Result<ResultSet> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.thread_budget())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (schema, rows) = pool.install(|| match &cfg.params {
        Params::Ed(p) => run_ed(p),
        Params::TwistCheck(p) => run_twist_check(p, cfg.seed),
        Params::JwCheck(p) => run_jw_check(p),
        Params::Gaussian(p) => run_gaussian(p),
        Params::Correlator(p) => run_correlator(p),
        Params::Fcs(p) => run_fcs(p),
        Params::Entropy(p) => run_entropy(p),
        Params::CftFit(p) => run_cft_fit(p),
        Params::Formfactor(p) => run_formfactor(p),
        Params::Toda(p) => run_toda(p, cfg.seed),
    })?;
    let hash = cfg.config_hash();
    let experiment = cfg.experiment();
    let mut records = Vec::with_capacity(rows.len());
    for (index, (row, wall_time)) in rows.into_iter().enumerate() {
        if !schema.conforms(&row) {
            return Err(Error::Numerical(format!("row {index} does not match the {} schema", experiment.name())));
        }
        records.push(ResultRecord {
            experiment,
            config_hash: hash.clone(),
            index,
            values: row.values,
            checks: row.checks,
            wall_time,
        });
    }
    Ok(ResultSet { experiment, config_hash: hash, columns: schema.columns, checks: schema.checks, records })
}

type Table = (Schema, Vec<(Row, f64)>);

fn is_quadratic(m: &ChainModel) -> bool {
    matches!(m.family, Family::TransverseIsing | Family::Xx)
}

fn run_ed(p: &EdParams) -> Result<Table> {
    let schema = Schema::new(&["state", "beta", "energy", "magnetization"], &["hermiticity", "normalization"]);
    let h = build_spin_hamiltonian(&p.model)?;
    let l = p.model.length;
    let mz = (0..l)
        .map(|x| site_operator(SiteOp::Sigma3, x, l))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .try_fold(crate::edcore::ManyBodyOperator::zeros(l), |acc, o| acc.add(&o))?
        .scale(C64::new(1.0 / l as f64, 0.0));
    let mut points: Vec<Option<f64>> = vec![None];
    points.extend(p.betas.iter().map(|&b| Some(b)));
    let herm = h.hermiticity_defect();
    let rows = sweep(&points, |&beta| {
        let state = match beta {
            None => ground_state(&h)?,
            Some(b) => thermal_density_matrix(&h, b)?,
        };
        let norm = match &state.payload {
            crate::edcore::StatePayload::Pure(v) => (v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs(),
            crate::edcore::StatePayload::Density(rho) => (rho.trace() - C64::new(1.0, 0.0)).norm(),
        };
        Ok(Row::default()
            .text("state", if beta.is_none() { "ground" } else { "thermal" })
            .beta(beta)
            .real("energy", expectation(&state, &h)?.re)
            .real("magnetization", expectation(&state, &mz)?.re)
            .check("hermiticity", herm, 1e-12)
            .check("normalization", norm, 1e-10))
    })?;
    Ok((schema, rows))
}

fn run_twist_check(p: &TwistCheckParams, seed: u64) -> Result<Table> {
    let schema = Schema::new(&["lambda", "probe_site", "relation"], &["exchange", "left_right"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, usize)> = p
        .lambdas
        .iter()
        .flat_map(|&l| (0..p.probes).map(|_| (l, rng.random_range(0..p.length))).collect::<Vec<_>>())
        .collect();
    let rows = sweep(&points, |&(lambda, probe)| {
        let spec = TwistSpec::right(p.generator, lambda, p.anchor, p.length)?;
        let aut = conjugation_automorphism(&spec)?;
        let o = site_operator(SiteOp::Sigma1, probe, p.length)?;
        let ex = exchange_residual(&spec, &o, &aut)?;
        let lr = left_right_residual(&spec)?;
        Ok(Row::default()
            .real("lambda", lambda)
            .int("probe_site", probe)
            .text("relation", if probe >= p.anchor { "inside" } else { "outside" })
            .check("exchange", ex, 1e-12)
            .check("left_right", lr, 1e-12))
    })?;
    Ok((schema, rows))
}

fn run_jw_check(p: &JwCheckParams) -> Result<Table> {
    let schema = Schema::new(&["levels", "ground_energy"], &["car", "sector_decomposition", "spectrum"]);
    let m = &p.model;
    if m.length > MAX_JW_CHECK_SITES {
        return Err(Error::Capacity(format!("jw-check diagonalizes densely up to {MAX_JW_CHECK_SITES} sites")));
    }
    let rows = sweep(&[m.length], |_| {
        let car = jw_fermions_from_spins(m.length)?.car_defect()?;
        let sectors = sector_hamiltonians(m)?;
        let spin = build_spin_hamiltonian(m)?.eigenvalues_hermitian();
        let parity_levels = |form: &BdGForm, parity: f64| -> Result<Vec<f64>> {
            Ok(bdg_diagonalize(form)?
                .many_body_levels()?
                .into_iter()
                .filter(|l| l.1 * parity > 0.0)
                .map(|l| l.0)
                .collect())
        };
        let mut fermion = parity_levels(&sectors.even, 1.0)?;
        fermion.extend(parity_levels(&sectors.odd, -1.0)?);
        fermion.sort_by(f64::total_cmp);
        let dist = if fermion.len() == spin.len() {
            spin.iter().zip(&fermion).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        Ok(Row::default()
            .int("levels", spin.len())
            .real("ground_energy", spin[0])
            .check("car", car, 1e-12)
            .check("sector_decomposition", sectors.residual, 1e-12)
            .check("spectrum", dist, 1e-10))
    })?;
    Ok((schema, rows))
}

fn mean_occupation(cov: &MajoranaCovariance) -> f64 {
    let l = cov.sites();
    // a_{2x} a_{2x+1} = i(1 − 2n)  ⇒  <n> = (1 + Γ_{2x,2x+1})/2
    (0..l).map(|x| 0.5 * (1.0 + cov.gamma[(2 * x, 2 * x + 1)])).sum::<f64>() / l as f64
}

/// Largest `|eigenvalue|` of `iΓ`, which is at most 1 for a physical state.
fn covariance_bound(cov: &MajoranaCovariance) -> f64 {
    let n = cov.gamma.nrows();
    let ig = DMatrix::<C64>::from_fn(n, n, |i, j| C64::new(0.0, cov.gamma[(i, j)]));
    crate::linalg::eigh(&ig).0.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn run_gaussian(p: &GaussianParams) -> Result<Table> {
    let schema = Schema::new(
        &["state", "beta", "energy", "mean_occupation"],
        &["physical", "ed_energy"],
    );
    let m = &p.model;
    if !is_quadratic(m) {
        return Err(Error::Config("gaussian needs a transverse-ising or xx chain".into()));
    }
    let ed_ground = if m.length <= ED_CROSSCHECK_SITES {
        let h = build_spin_hamiltonian(m)?;
        Some(expectation(&ground_state(&h)?, &h)?.re)
    } else {
        None
    };
    let mut points: Vec<Option<f64>> = vec![None];
    points.extend(p.betas.iter().map(|&b| Some(b)));
    let rows = sweep(&points, |&beta| {
        let (cov, energy, ed) = match beta {
            None => {
                let (cov, e) = chain_ground_covariance(m)?;
                (cov, e, ed_ground)
            }
            Some(b) => {
                let form = BdGForm::from_chain(m, FermionBoundary::Open)?;
                let spec = bdg_diagonalize(&form)?;
                let e = spec.ground_energy
                    + 0.5 * spec.energies.iter().map(|&e| e * (1.0 - (0.5 * b * e).tanh())).sum::<f64>();
                let ed = if m.length <= 8 {
                    let h = build_spin_hamiltonian(m)?;
                    Some(expectation(&thermal_density_matrix(&h, b)?, &h)?.re)
                } else {
                    None
                };
                (thermal_covariance(&form, b)?, e, ed)
            }
        };
        let bound = covariance_bound(&cov);
        Ok(Row::default()
            .text("state", if beta.is_none() { "ground" } else { "thermal" })
            .beta(beta)
            .real("energy", energy)
            .real("mean_occupation", mean_occupation(&cov))
            .check("physical", (bound - 1.0).max(0.0), 1e-10)
            .check("ed_energy", ed.map_or(0.0, |e| (e - energy).abs()), 1e-9))
    })?;
    Ok((schema, rows))
}

/// `σ¹_x σ¹_x'` or `∏_{x≤y<x'} σ³_y` as a spin operator.
fn spin_two_point(kind: TwistKind, x: usize, xp: usize, l: usize) -> Result<crate::edcore::ManyBodyOperator> {
    match kind {
        TwistKind::Order => product_operator(l, &[(x, SiteOp::Sigma1.matrix()), (xp, SiteOp::Sigma1.matrix())]),
        TwistKind::Disorder => {
            let f: Vec<_> = (x..xp).map(|y| (y, SiteOp::Sigma3.matrix())).collect();
            product_operator(l, &f)
        }
    }
}

fn run_correlator(p: &CorrelatorParams) -> Result<Table> {
    let schema = Schema::new(&["field", "separation", "x", "x_prime", "value"], &["bounded", "ed_agreement"]);
    if !is_quadratic(&p.model) {
        return Err(Error::Config("correlator needs a transverse-ising or xx chain".into()));
    }
    let fields = if p.fields.is_empty() { vec![p.model.field] } else { p.fields.clone() };
    let l = p.model.length;
    let per_field = sweep(&fields, |&h| {
        let model = ChainModel { field: h, ..p.model.clone() };
        let (cov, _) = chain_ground_covariance(&model)?;
        let seq = centered_two_point_sequence(&cov, p.kind, &p.separations)?;
        let ed = if l <= ED_CROSSCHECK_SITES { Some(ground_state(&build_spin_hamiltonian(&model)?)?) } else { None };
        seq.into_iter()
            .map(|(s, g)| {
                let x = (l - s) / 2;
                let diff = match &ed {
                    Some(state) => (expectation(state, &spin_two_point(p.kind, x, x + s, l)?)?.re - g).abs(),
                    None => 0.0,
                };
                Ok((s, x, g, diff))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for ((pts, t), &h) in per_field.into_iter().zip(&fields) {
        let share = t / pts.len().max(1) as f64;
        for (s, x, g, diff) in pts {
            rows.push((
                Row::default()
                    .real("field", h)
                    .int("separation", s)
                    .int("x", x)
                    .int("x_prime", x + s)
                    .real("value", g)
                    .check("bounded", (g.abs() - 1.0).max(0.0), 1e-12)
                    .check("ed_agreement", diff, 1e-9),
                share,
            ));
        }
    }
    Ok((schema, rows))
}

fn run_fcs(p: &FcsParams) -> Result<Table> {
    let schema = Schema::new(&["beta", "lambda", "value*", "log_value*"], &["bounded", "ed_agreement"]);
    let m = &p.model;
    if !is_quadratic(m) {
        return Err(Error::Config("fcs needs a transverse-ising or xx chain".into()));
    }
    let region: Vec<usize> = (p.region_start..p.region_start + p.region_size).collect();
    let states: Vec<Option<f64>> = if p.betas.is_empty() { vec![None] } else { p.betas.iter().map(|&b| Some(b)).collect() };
    let ed_h = if m.length <= 10 { Some(build_spin_hamiltonian(m)?) } else { None };
    let per_state = sweep(&states, |&beta| {
        let cov = match beta {
            None => chain_ground_covariance(m)?.0,
            Some(b) => thermal_covariance(&BdGForm::from_chain(m, FermionBoundary::Open)?, b)?,
        };
        let curve = fcs_from_covariance(&cov, &region, &p.lambdas, "fcs")?;
        let ed_state = match (&ed_h, beta) {
            (Some(h), None) => Some(ground_state(h)?),
            (Some(h), Some(b)) => Some(thermal_density_matrix(h, b)?),
            _ => None,
        };
        let diffs = p
            .lambdas
            .iter()
            .enumerate()
            .map(|(k, &lambda)| match &ed_state {
                Some(s) => Ok((counting_expectation(s, &region, lambda)? - curve.values[k]).norm()),
                None => Ok(0.0),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((curve, diffs))
    })?;
    let mut rows = Vec::new();
    for (((curve, diffs), t), &beta) in per_state.into_iter().zip(&states) {
        let share = t / p.lambdas.len() as f64;
        for (k, &lambda) in p.lambdas.iter().enumerate() {
            let v = curve.values[k];
            rows.push((
                Row::default()
                    .beta(beta)
                    .real("lambda", lambda)
                    .complex("value", v)
                    .complex("log_value", curve.log_values[k])
                    .check("bounded", (v.norm() - 1.0).max(0.0), 1e-12)
                    .check("ed_agreement", diffs[k], 1e-10),
                share,
            ));
        }
    }
    Ok((schema, rows))
}

/// `<e^{iλN_A}>` on an exact state.
fn counting_expectation(state: &StateRecord, region: &[usize], lambda: f64) -> Result<C64> {
    let phase = C64::from_polar(1.0, lambda);
    let local = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), phase]];
    let factors: Vec<_> = region.iter().map(|&x| (x, local)).collect();
    expectation(state, &product_operator(state.sites, &factors)?)
}

fn entropy_sizes(p: &EntropyParams) -> Vec<usize> {
    if p.region_sizes.is_empty() {
        (1..=p.model.length / 2).collect()
    } else {
        p.region_sizes.clone()
    }
}

fn entropy_methods(p: &EntropyParams) -> Result<Vec<EntropyMethod>> {
    let l = p.model.length;
    let integer_orders = p.orders.iter().all(|&n| n >= 2.0 && n.fract() == 0.0);
    let max_order = p.orders.iter().copied().fold(0.0, f64::max) as usize;
    if !p.methods.is_empty() {
        if p.methods.contains(&EntropyMethod::Replica) && !integer_orders {
            return Err(Error::Config("the replica method needs integer orders n ≥ 2".into()));
        }
        if p.methods.contains(&EntropyMethod::Covariance) && !is_quadratic(&p.model) {
            return Err(Error::Config("the covariance method needs a transverse-ising or xx chain".into()));
        }
        return Ok(p.methods.clone());
    }
    let mut m = Vec::new();
    if integer_orders && max_order * l <= MAX_REPLICA_QUBITS {
        m.push(EntropyMethod::Replica);
    }
    if l <= ED_CROSSCHECK_SITES {
        m.push(EntropyMethod::ReducedDensityMatrix);
    }
    if is_quadratic(&p.model) {
        m.push(EntropyMethod::Covariance);
    }
    if m.is_empty() {
        return Err(Error::Capacity(format!("no entropy method fits a {l}-site {:?} chain", p.model.family)));
    }
    Ok(m)
}

fn method_column(m: EntropyMethod) -> &'static str {
    match m {
        EntropyMethod::Replica => "renyi_replica",
        EntropyMethod::ReducedDensityMatrix => "renyi_rdm",
        EntropyMethod::Covariance => "renyi_covariance",
    }
}

fn run_entropy(p: &EntropyParams) -> Result<Table> {
    let methods = entropy_methods(p)?;
    let has = |m| methods.contains(&m);
    let mut columns = vec!["region_size", "order"];
    columns.extend(methods.iter().map(|&m| method_column(m)));
    let mut checks = Vec::new();
    if has(EntropyMethod::Replica) && has(EntropyMethod::ReducedDensityMatrix) {
        checks.push("replica_vs_rdm");
    }
    if has(EntropyMethod::ReducedDensityMatrix) && has(EntropyMethod::Covariance) {
        checks.push("rdm_vs_covariance");
    }
    if has(EntropyMethod::Replica) && has(EntropyMethod::Covariance) && !has(EntropyMethod::ReducedDensityMatrix) {
        checks.push("replica_vs_covariance");
    }
    let schema = Schema::new(&columns, &checks);
    let needs_state = has(EntropyMethod::Replica) || has(EntropyMethod::ReducedDensityMatrix);
    let state = if needs_state { Some(ground_state(&build_spin_hamiltonian(&p.model)?)?) } else { None };
    let cov = if has(EntropyMethod::Covariance) { Some(chain_ground_covariance(&p.model)?.0) } else { None };
    let points: Vec<(usize, f64)> =
        entropy_sizes(p).into_iter().flat_map(|s| p.orders.iter().map(move |&n| (s, n))).collect();
    let rows = sweep(&points, |&(size, n)| {
        let region: Vec<usize> = (p.region_start..p.region_start + size).collect();
        let mut row = Row::default().int("region_size", size).real("order", n);
        let mut vals = BTreeMap::new();
        for &m in &methods {
            let s = match m {
                EntropyMethod::Replica => {
                    let tr = tr_rhoa_n_replica(state.as_ref().expect("state"), &region, n as usize)?;
                    tr.ln() / (1.0 - n)
                }
                EntropyMethod::ReducedDensityMatrix => {
                    let rho = reduced_density_matrix(state.as_ref().expect("state"), &region)?;
                    renyi_from_rdm(&rho, n)?.entropy
                }
                EntropyMethod::Covariance => renyi_from_gaussian(cov.as_ref().expect("cov"), &region, n)?.entropy,
            };
            vals.insert(method_column(m), s);
            row = row.real(method_column(m), s);
        }
        let diff = |a, b| (vals[a] - vals[b]).abs();
        for &c in &checks {
            row = match c {
                "replica_vs_rdm" => row.check(c, diff("renyi_replica", "renyi_rdm"), 1e-10),
                "rdm_vs_covariance" => row.check(c, diff("renyi_rdm", "renyi_covariance"), 1e-8),
                _ => row.check(c, diff("renyi_replica", "renyi_covariance"), 1e-8),
            };
        }
        Ok(row)
    })?;
    Ok((schema, rows))
}

fn run_cft_fit(p: &CftFitParams) -> Result<Table> {
    let schema = Schema::new(
        &["order", "exponent", "central_charge", "intercept", "r_squared", "rms_residual", "fit_points"],
        &["fit_quality"],
    );
    if !is_quadratic(&p.model) {
        return Err(Error::Config("cft-fit needs a transverse-ising or xx chain".into()));
    }
    let (cov, _) = chain_ground_covariance(&p.model)?;
    let l = p.model.length;
    let rows = sweep(&p.orders, |&n| {
        let data: Vec<(usize, f64)> = (1..=l / 2)
            .map(|s| {
                let region: Vec<usize> = (0..s).collect();
                Ok((s, -renyi_from_gaussian(&cov, &region, n)?.trace_power.ln()))
            })
            .collect::<Result<_>>()?;
        let fit = cft_exponent_fit(&data, l, n)?;
        Ok(Row::default()
            .real("order", n)
            .real("exponent", fit.exponent)
            .real("central_charge", fit.central_charge)
            .real("intercept", fit.intercept)
            .real("r_squared", fit.r_squared)
            .real("rms_residual", fit.rms_residual)
            .int("fit_points", fit.sizes.len())
            .check("fit_quality", 1.0 - fit.r_squared, 1.0 - crate::entanglement::MIN_R_SQUARED))
    })?;
    Ok((schema, rows))
}

fn run_formfactor(p: &FormfactorParams) -> Result<Table> {
    let schema = Schema::new(
        &["r", "mr", "vev_squared", "two_point"],
        &["periodicity", "pole_residue", "dual_quadrature"],
    );
    let ff = FormFactor::ising_disorder(p.mass, p.vev)?;
    let axioms = ff_axiom_residuals(&ff, &p.grid)?;
    let rows = sweep(&p.separations, |&r| {
        let g = ff_series_two_point_with(&ff, r, 2, SeriesOptions::default())?;
        let shifted = SeriesOptions { breakpoint_shift: 0.31, ..SeriesOptions::default() };
        let g2 = ff_series_two_point_with(&ff, r, 2, shifted)?;
        Ok(Row::default()
            .real("r", r)
            .real("mr", p.mass * r)
            .real("vev_squared", p.vev * p.vev)
            .real("two_point", g)
            .check("periodicity", axioms.periodicity, 1e-12)
            .check("pole_residue", axioms.pole_mismatch, 1e-8)
            .check("dual_quadrature", (g - g2).abs(), 1e-9))
    })?;
    Ok((schema, rows))
}

fn run_toda(p: &TodaParams, seed: u64) -> Result<Table> {
    let schema = Schema::new(&["lambda", "x", "mean", "stderr", "oracle"], &["deviation_sigma"]);
    let ens = sample_toda_thermal(p.beta, p.pressure, p.sites, p.draws, seed)?;
    let xs: Vec<usize> = if p.xs.is_empty() { (0..=p.sites).collect() } else { p.xs.clone() };
    let points: Vec<(f64, usize)> = p.lambdas.iter().flat_map(|&l| xs.iter().map(move |&x| (l, x))).collect();
    let rows = sweep(&points, |&(lambda, x)| {
        let (mean, err) = stretch_fcs_estimate(&ens, lambda, x)?;
        let oracle = stretch_fcs_oracle(p.beta, p.pressure, lambda, x)?;
        let dev = if err > 0.0 {
            (mean - oracle).abs() / err
        } else if mean == oracle {
            0.0
        } else {
            f64::INFINITY
        };
        Ok(Row::default()
            .real("lambda", lambda)
            .int("x", x)
            .real("mean", mean)
            .real("stderr", err)
            .real("oracle", oracle)
            .check("deviation_sigma", dev, 3.0))
    })?;
    Ok((schema, rows))
}

// ---------------------------------------------------------------------------
// Output

/// `d.dddddddddddddddde±x`: 17 significant digits, round-trip exact.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV with a header row; wall time is left out so reruns are byte-identical.
pub fn emit_csv(set: &ResultSet) -> String {
    let mut header = vec!["index".to_string(), "config_hash".to_string()];
    for c in &set.columns {
        if c.complex {
            header.push(format!("{}_re", c.name));
            header.push(format!("{}_im", c.name));
        } else {
            header.push(c.name.clone());
        }
    }
    for c in &set.checks {
        header.push(c.clone());
        header.push(format!("{c}_tol"));
        header.push(format!("{c}_pass"));
    }
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for r in &set.records {
        let mut cells = vec![r.index.to_string(), r.config_hash.clone()];
        for (_, v) in &r.values {
            match v {
                Value::Bool(b) => cells.push(b.to_string()),
                Value::Int(i) => cells.push(i.to_string()),
                Value::Real(x) => cells.push(format_float(*x)),
                Value::Complex(z) => {
                    cells.push(format_float(z.re));
                    cells.push(format_float(z.im));
                }
                Value::Text(s) => cells.push(csv_field(s)),
            }
        }
        for c in &r.checks {
            cells.push(format_float(c.value));
            cells.push(format_float(c.tolerance));
            cells.push(c.pass.to_string());
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// A JSON array with one object per record.
pub fn emit_json(set: &ResultSet) -> Result<String> {
    serde_json::to_string_pretty(&set.records).map_err(|e| Error::Numerical(format!("json encoding: {e}")))
}

pub fn emit(set: &ResultSet, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(emit_csv(set)),
        OutputFormat::Json => emit_json(set),
    }
}

/// Writes `<dir>/<experiment>.<ext>` and returns its path.
pub fn write_output(set: &ResultSet, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.{}", set.experiment.name(), format.extension()));
    std::fs::write(&path, emit(set, format)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "twistlab", version, about = "Twist fields on spin chains and free fermions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Evaluate the invariant checks only and print their summary.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Exact ground and thermal states of a spin chain.
    Ed,
    /// Exchange and left/right relations of twist strings.
    TwistCheck,
    /// Jordan-Wigner algebra and parity-sector spectra.
    JwCheck,
    /// Gaussian ground and thermal states.
    Gaussian,
    /// Order and disorder two-point functions.
    Correlator,
    /// Full counting statistics of a region.
    Fcs,
    /// Rényi entropies by replica, reduced density matrix and covariance.
    Entropy,
    /// Power-law fit of Tr ρ_A^n against the chord length.
    CftFit,
    /// Ising form-factor axioms and the two-particle series.
    Formfactor,
    /// Toda stretch generating function, Monte Carlo against the closed form.
    Toda,
}

impl Command {
    pub fn kind(self) -> ExperimentKind {
        match self {
            Command::Ed => ExperimentKind::Ed,
            Command::TwistCheck => ExperimentKind::TwistCheck,
            Command::JwCheck => ExperimentKind::JwCheck,
            Command::Gaussian => ExperimentKind::Gaussian,
            Command::Correlator => ExperimentKind::Correlator,
            Command::Fcs => ExperimentKind::Fcs,
            Command::Entropy => ExperimentKind::Entropy,
            Command::CftFit => ExperimentKind::CftFit,
            Command::Formfactor => ExperimentKind::Formfactor,
            Command::Toda => ExperimentKind::Toda,
        }
    }
}

/// Builds the effective configuration: file (or defaults), then flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text, Some(kind))?
        }
        None => RunConfig::default_for(kind),
    };
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.common.threads {
        cfg.threads = Some(t);
    }
    if let Some(f) = cli.common.format {
        cfg.format = f;
    }
    if let Some(o) = &cli.common.out {
        cfg.output = Some(o.clone());
    }
    cfg.check |= cli.common.check;
    cfg.validate()?;
    Ok(cfg)
}

fn verbose() -> bool {
    std::env::var(VERBOSE_ENV).is_ok_and(|v| !v.is_empty() && v != "0")
}

fn write_summary(set: &ResultSet, w: &mut dyn Write) {
    if set.checks.is_empty() {
        let _ = writeln!(w, "no invariant checks apply to this configuration");
    }
    for (name, pass, total) in set.check_summary() {
        let _ = writeln!(w, "{} {name}: {pass}/{total} pass", if pass == total { "ok  " } else { "FAIL" });
    }
}

/// Entry point shared by the binary and the tests; returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| run_experiment(&cfg).map(|set| (cfg, set)));
    let (cfg, set) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    if cfg.check {
        write_summary(&set, stdout);
    } else {
        let written = match &cfg.output {
            Some(dir) => write_output(&set, cfg.format, dir).map(|p| {
                if verbose() {
                    let _ = writeln!(stderr, "wrote {}", p.display());
                }
            }),
            None => emit(&set, cfg.format).map(|s| {
                let _ = stdout.write_all(s.as_bytes());
            }),
        };
        if let Err(e) = written {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
        if verbose() || !set.all_pass() {
            write_summary(&set, stderr);
        }
    }
    if set.all_pass() {
        0
    } else {
        1
    }
}
