//! CSV and JSON persistence. Floats are written with 17 significant digits
//! so that reruns can be compared byte for byte and every file reads back
//! without loss.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::ensemble::Spectrum;
use crate::error::{Error, Result};
use crate::harness::{
    CltRow, ConcentrationReport, ExperimentConfig, HsReport, ResolventReport, SupportReport,
};
use crate::sampler::{Provenance, SampleBatch};

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn sci<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*v))
}

/// Parses a config, naming the offending key on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.inner()))
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

/// Canonical JSON: keys sorted, no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut cfg = cfg.clone();
    cfg.threads = None;
    let digest = Sha256::digest(canonical_json(&cfg)?.as_bytes());
    Ok(hex::encode(digest))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Closed-form values in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub quantity: String,
    #[serde(serialize_with = "sci")]
    pub re_z: f64,
    #[serde(serialize_with = "sci")]
    pub im_z: f64,
    #[serde(serialize_with = "sci")]
    pub re: f64,
    #[serde(serialize_with = "sci")]
    pub im: f64,
}

impl TheoryRow {
    pub fn new(quantity: &str, z: Complex64, v: Complex64) -> Self {
        TheoryRow {
            quantity: quantity.to_string(),
            re_z: z.re,
            im_z: z.im,
            re: v.re,
            im: v.im,
        }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re_z, self.im_z)
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltCsvRow {
    #[serde(serialize_with = "sci")]
    pub re_z: f64,
    #[serde(serialize_with = "sci")]
    pub im_z: f64,
    #[serde(serialize_with = "sci")]
    pub m_hat_re: f64,
    #[serde(serialize_with = "sci")]
    pub m_hat_im: f64,
    #[serde(serialize_with = "sci")]
    pub m_hat_empirical_re: f64,
    #[serde(serialize_with = "sci")]
    pub m_hat_empirical_im: f64,
    #[serde(serialize_with = "sci")]
    pub m_theory_re: f64,
    #[serde(serialize_with = "sci")]
    pub m_theory_im: f64,
    #[serde(serialize_with = "sci")]
    pub stderr: f64,
    pub replications: usize,
}

impl From<&CltRow> for CltCsvRow {
    fn from(r: &CltRow) -> Self {
        CltCsvRow {
            re_z: r.z.re,
            im_z: r.z.im,
            m_hat_re: r.m_hat.re,
            m_hat_im: r.m_hat.im,
            m_hat_empirical_re: r.m_hat_empirical.re,
            m_hat_empirical_im: r.m_hat_empirical.im,
            m_theory_re: r.m_theory.re,
            m_theory_im: r.m_theory.im,
            stderr: r.stderr,
            replications: r.replications,
        }
    }
}

impl From<&CltCsvRow> for CltRow {
    fn from(r: &CltCsvRow) -> Self {
        CltRow {
            z: Complex64::new(r.re_z, r.im_z),
            m_hat: Complex64::new(r.m_hat_re, r.m_hat_im),
            m_hat_empirical: Complex64::new(r.m_hat_empirical_re, r.m_hat_empirical_im),
            m_theory: Complex64::new(r.m_theory_re, r.m_theory_im),
            stderr: r.stderr,
            replications: r.replications,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCsvRow {
    pub replication: usize,
    pub outliers: usize,
    pub zero_count: usize,
    #[serde(serialize_with = "sci")]
    pub max_abs: f64,
    #[serde(serialize_with = "sci")]
    pub min_positive: f64,
}

pub fn support_rows(rep: &SupportReport) -> Vec<SupportCsvRow> {
    rep.rows
        .iter()
        .map(|r| SupportCsvRow {
            replication: r.replication,
            outliers: r.outliers,
            zero_count: r.zero_count,
            max_abs: r.max_abs,
            min_positive: r.min_positive,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCsvRow {
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "sci")]
    pub quad_form_mse: f64,
    #[serde(serialize_with = "sci")]
    pub trace_variance: f64,
    #[serde(serialize_with = "sci")]
    pub lambda_max: f64,
    pub edge_exceedances: usize,
    pub replications: usize,
}

pub fn concentration_rows(rep: &ConcentrationReport) -> Vec<ConcentrationCsvRow> {
    rep.rows
        .iter()
        .map(|r| ConcentrationCsvRow {
            n: r.n,
            m: r.m,
            quad_form_mse: r.quad_form_mse,
            trace_variance: r.trace_variance,
            lambda_max: r.lambda_max,
            edge_exceedances: r.edge_exceedances,
            replications: r.replications,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventCsvRow {
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "sci")]
    pub m_block: f64,
    #[serde(serialize_with = "sci")]
    pub n_block: f64,
    #[serde(serialize_with = "sci")]
    pub trace_identity_error: f64,
    pub replications: usize,
}

pub fn resolvent_rows(rep: &ResolventReport) -> Vec<ResolventCsvRow> {
    rep.rows
        .iter()
        .map(|r| ResolventCsvRow {
            n: r.n,
            m: r.m,
            m_block: r.m_block,
            n_block: r.n_block,
            trace_identity_error: r.trace_identity_error,
            replications: r.replications,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsCsvRow {
    #[serde(serialize_with = "sci")]
    pub monte_carlo: f64,
    #[serde(serialize_with = "sci")]
    pub stderr: f64,
    #[serde(serialize_with = "sci")]
    pub theory: f64,
    #[serde(serialize_with = "sci")]
    pub limit_integral: f64,
    #[serde(serialize_with = "sci")]
    pub mu: f64,
    #[serde(serialize_with = "sci")]
    pub kappa: f64,
    pub order: usize,
    pub replications: usize,
}

impl From<&HsReport> for HsCsvRow {
    fn from(r: &HsReport) -> Self {
        HsCsvRow {
            monte_carlo: r.monte_carlo,
            stderr: r.stderr,
            theory: r.theory,
            limit_integral: r.limit_integral,
            mu: r.moments.mu,
            kappa: r.moments.kappa,
            order: r.settings.order,
            replications: r.replications,
        }
    }
}

/// Everything about a batch except the numbers themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub n: usize,
    pub m: usize,
    pub rescale: f64,
    pub acceptance_rate: f64,
    pub provenance: Provenance,
}

/// One row per vector, columns `x0 … x{n−1}`, plus a JSON sidecar.
pub fn write_batch(csv_path: &Path, sidecar_path: &Path, batch: &SampleBatch) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record((0..batch.n).map(|i| format!("x{i}")))?;
    for v in batch.vectors() {
        w.write_record(v.iter().map(|x| fmt_f64(*x)))?;
    }
    w.flush()?;
    write_json(
        sidecar_path,
        &BatchSidecar {
            n: batch.n,
            m: batch.m,
            rescale: batch.rescale,
            acceptance_rate: batch.acceptance_rate,
            provenance: batch.provenance.clone(),
        },
    )
}

fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("not a number: `{field}`")))
}

pub fn read_batch(csv_path: &Path, sidecar_path: &Path) -> Result<SampleBatch> {
    let side: BatchSidecar = read_json(sidecar_path)?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let mut data = Vec::with_capacity(side.n * side.m);
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != side.n {
            return Err(Error::Config(format!(
                "batch row has {} entries, sidecar says n = {}",
                rec.len(),
                side.n
            )));
        }
        for field in rec.iter() {
            data.push(parse_f64(field)?);
        }
    }
    if data.len() != side.n * side.m {
        return Err(Error::Config(format!(
            "batch has {} rows, sidecar says m = {}",
            data.len() / side.n.max(1),
            side.m
        )));
    }
    Ok(SampleBatch {
        n: side.n,
        m: side.m,
        data,
        rescale: side.rescale,
        acceptance_rate: side.acceptance_rate,
        provenance: side.provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub n: usize,
    pub m: usize,
    pub seed_lineage: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SingularValueRow {
    #[serde(serialize_with = "sci")]
    singular_value: f64,
}

/// One singular value per row, plus `(n, m, seed lineage)` alongside.
pub fn write_spectrum(csv_path: &Path, sidecar_path: &Path, spec: &Spectrum, seed_lineage: &[u64]) -> Result<()> {
    let rows: Vec<SingularValueRow> = spec
        .singular_values
        .iter()
        .map(|&s| SingularValueRow { singular_value: s })
        .collect();
    write_rows(csv_path, &rows)?;
    write_json(
        sidecar_path,
        &SpectrumSidecar {
            n: spec.n,
            m: spec.m,
            seed_lineage: seed_lineage.to_vec(),
        },
    )
}

pub fn read_spectrum(csv_path: &Path, sidecar_path: &Path) -> Result<(Spectrum, Vec<u64>)> {
    let side: SpectrumSidecar = read_json(sidecar_path)?;
    let rows: Vec<SingularValueRow> = read_rows(csv_path)?;
    if rows.len() != side.n {
        return Err(Error::Config(format!(
            "spectrum has {} values, sidecar says n = {}",
            rows.len(),
            side.n
        )));
    }
    Ok((
        Spectrum {
            n: side.n,
            m: side.m,
            singular_values: rows.into_iter().map(|r| r.singular_value).collect(),
        },
        side.seed_lineage,
    ))
}

/// Outcome of one invariant check on emitted results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl ValidatorOutcome {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        ValidatorOutcome {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    pub validators: Vec<ValidatorOutcome>,
    /// Free-form summary values (slopes, moment estimates, ...).
    pub summary: serde_json::Value,
}
