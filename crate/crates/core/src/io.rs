//! Deterministic file output: atomic writes, SHA-256-hashed artifacts, and
//! the run manifest that makes every command replayable.
//!
//! Every command assembles its artifacts **in memory** as `(name, bytes)`
//! pairs, then commits them in one pass: each file is written atomically
//! (write to a temporary sibling, then rename) and a [`RunManifest`] is
//! written last, recording the command, the fully-resolved configuration,
//! the seed, the code version, start/end timestamps, and the SHA-256 of
//! every artifact.  Because all numerics are deterministic in the seed, a
//! rerun from the manifest must reproduce each artifact byte for byte; the
//! hashes are how the `rerun` command verifies that.
//!
//! CSV output is UTF-8 with a header row, `.` decimal points, and the
//! shortest round-trip float formatting (so files are identical across
//! platforms and worker counts).  Missing values (for example the theory
//! variance column when no `I_{n,r}` source is configured) are written as
//! `nan`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{ConvergenceReport, HoleReport, MomentReport};
use crate::limit_law::DnrEvaluation;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Write `bytes` to `path` atomically (temporary sibling + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One artifact recorded in a manifest: file name (relative to the manifest's
/// directory) and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to reproduce and verify a run.
///
/// `config` echoes the fully-resolved configuration (seed precedence already
/// applied), so `rerun` needs nothing but this file.  Timestamps are wall
/// clock (unix seconds) and are the only fields expected to differ between a
/// run and its faithful rerun; artifact identity is judged by the hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputRecord>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// In-memory artifact set of one command run; committed atomically together
/// with its manifest.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub started_unix: u64,
    manifest_stem: String,
    files: Vec<(String, Vec<u8>)>,
}

impl RunOutputs {
    /// Start collecting artifacts for `command` with its resolved config.
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            started_unix: unix_now(),
            manifest_stem: command.to_string(),
            files: Vec::new(),
        })
    }

    /// Override the manifest file stem (default: the command name), e.g. to
    /// keep `inr_n2_r1` and `inr_n3_r1` manifests side by side.
    pub fn set_manifest_stem(&mut self, stem: &str) {
        self.manifest_stem = stem.to_string();
    }

    /// Add one artifact by name (no directory components).
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Add a pretty-printed JSON artifact.
    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// File names staged so far, in insertion order.
    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(name, _)| name.clone()).collect()
    }

    /// Hash records for the staged artifacts.
    pub fn records(&self) -> Vec<OutputRecord> {
        self.files
            .iter()
            .map(|(name, bytes)| OutputRecord {
                name: name.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect()
    }

    /// Compare staged artifacts against a previous run's manifest records,
    /// returning the names whose hashes differ (empty = byte-identical).
    pub fn diverging_outputs(&self, previous: &[OutputRecord]) -> Vec<String> {
        let records = self.records();
        let mut diverging = Vec::new();
        for record in &records {
            match previous.iter().find(|p| p.name == record.name) {
                Some(p) if p.sha256 == record.sha256 => {}
                _ => diverging.push(record.name.clone()),
            }
        }
        for p in previous {
            if !records.iter().any(|r| r.name == p.name) {
                diverging.push(p.name.clone());
            }
        }
        diverging
    }

    /// Write all artifacts plus `<command>.manifest.json` into `dir`,
    /// returning the paths written (manifest last).
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let records = self.records();
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started_unix,
            finished_unix: unix_now(),
            outputs: records,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let manifest_path = dir.join(format!("{}.manifest.json", self.manifest_stem));
        write_atomic(&manifest_path, &bytes)?;
        written.push(manifest_path);
        Ok(written)
    }
}

/// Read and parse a manifest file.
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        Error::Dependency(format!("cannot read manifest {}: {err}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|err| Error::Dependency(format!("malformed manifest {}: {err}", path.display())))
}

/// Format a float for CSV: shortest round-trip representation, `nan` for
/// missing values.
fn csv_float(value: f64) -> String {
    if value.is_nan() {
        "nan".to_string()
    } else {
        format!("{value}")
    }
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// CSV for a `D_{n,r}` evaluation table (also the per-node artifact of the
/// `inr` command): columns `t, estimate, std_error, n_samples`.
pub fn dnr_table_csv(rows: &[DnrEvaluation]) -> Vec<u8> {
    csv_table(
        "t,estimate,std_error,n_samples",
        rows.iter().map(|row| {
            vec![
                csv_float(row.t),
                csv_float(row.estimate),
                csv_float(row.std_error),
                row.n_samples.to_string(),
            ]
        }),
    )
}

/// CSV for a moment report with the fixed column order
/// `d, mean, mean_ci_lo, mean_ci_hi, theory_mean, var_raw, var_corr,
/// var_ci_lo, var_ci_hi, theory_var` (missing theory variance → `nan`).
pub fn moment_report_csv(report: &MomentReport) -> Vec<u8> {
    csv_table(
        "d,mean,mean_ci_lo,mean_ci_hi,theory_mean,var_raw,var_corr,var_ci_lo,var_ci_hi,theory_var",
        report.rows.iter().map(|row| {
            vec![
                row.d.to_string(),
                csv_float(row.mean),
                csv_float(row.mean_ci.0),
                csv_float(row.mean_ci.1),
                csv_float(row.theory_mean),
                csv_float(row.var_raw),
                csv_float(row.var_corrected),
                csv_float(row.var_ci.0),
                csv_float(row.var_ci.1),
                csv_float(row.theory_var.unwrap_or(f64::NAN)),
            ]
        }),
    )
}

/// CSV for a hole-probability report: frequencies, Wilson intervals, and the
/// rate-normalized `p(d)·d` columns.
pub fn hole_report_csv(report: &HoleReport) -> Vec<u8> {
    csv_table(
        "d,trials,holes,frequency,ci_lo,ci_hi,scaled,scaled_ci_lo,scaled_ci_hi",
        report.rows.iter().map(|row| {
            vec![
                row.d.to_string(),
                row.trials.to_string(),
                row.holes.to_string(),
                csv_float(row.frequency),
                csv_float(row.ci.0),
                csv_float(row.ci.1),
                csv_float(row.scaled),
                csv_float(row.scaled_ci.0),
                csv_float(row.scaled_ci.1),
            ]
        }),
    )
}

/// CSV summarizing a convergence run per degree.
pub fn convergence_rows_csv(report: &ConvergenceReport) -> Vec<u8> {
    csv_table(
        "d,mean_scaled,spread,deviation,limit",
        report.rows.iter().map(|row| {
            vec![
                row.d.to_string(),
                csv_float(row.mean_scaled),
                csv_float(row.spread),
                csv_float(row.deviation),
                csv_float(report.limit),
            ]
        }),
    )
}

/// CSV with one row per independent sequence and one column per degree of
/// the ladder (`sequence, d<deg>, ...`).
pub fn convergence_series_csv(report: &ConvergenceReport) -> Vec<u8> {
    let mut header = String::from("sequence");
    for d in &report.config.degrees {
        let _ = write!(header, ",d{d}");
    }
    csv_table(
        &header,
        report.series.iter().enumerate().map(|(seq, path)| {
            let mut row = Vec::with_capacity(path.len() + 1);
            row.push(seq.to_string());
            row.extend(path.iter().map(|&v| csv_float(v)));
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{
        ConvergenceConfig, ConvergenceRow, EstimatorSpec, ExperimentConfig, ManifoldMode,
        MomentRow, PhiSpec,
    };

    fn sample_report() -> MomentReport {
        MomentReport {
            config: ExperimentConfig {
                n: 2,
                r: 1,
                degrees: vec![4],
                trials: 30,
                estimator: EstimatorSpec::Crofton { k_geodesics: 10 },
                phi: PhiSpec::Constant { value: 1.0 },
                seed: 1,
                mode: ManifoldMode::Sphere,
                inr_source: None,
            },
            rows: vec![MomentRow {
                d: 4,
                mean: 12.5,
                mean_ci: (12.0, 13.0),
                theory_mean: 4.0 * std::f64::consts::PI,
                var_raw: 9.25,
                var_corrected: 8.5,
                var_ci: (5.0, 12.0),
                theory_var: None,
                estimator_var_correction: 0.75,
                trials_used: 30,
                trials_failed: 0,
            }],
        }
    }

    #[test]
    fn sha256_matches_known_vector() {
        // [TRIVIAL] FIPS 180-2 test vector for "abc".
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn atomic_write_replaces_content_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["artifact.csv".to_string()]);
    }

    #[test]
    fn moment_csv_has_pinned_header_and_nan_theory_var() {
        // The fixed column order is an external interface; downstream
        // plotting depends on it byte for byte.
        let report = sample_report();
        let csv = String::from_utf8(moment_report_csv(&report)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "d,mean,mean_ci_lo,mean_ci_hi,theory_mean,var_raw,var_corr,var_ci_lo,var_ci_hi,theory_var"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("4,12.5,12,13,"));
        assert!(row.ends_with(",nan"));
        assert_eq!(row.split(',').count(), 10);
    }

    #[test]
    fn csv_floats_round_trip() {
        // Shortest-representation formatting must parse back to the exact
        // same bits (Rust's float Display guarantees this; the CSV contract
        // relies on it).
        let values = [
            1.0 / 3.0,
            std::f64::consts::PI,
            1.103372654533575,
            -0.028578088909862,
            1e-300,
        ];
        for &v in &values {
            let s = csv_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "round-trip failed for {s}");
        }
    }

    #[test]
    fn convergence_series_csv_has_one_column_per_degree() {
        let report = ConvergenceReport {
            config: ConvergenceConfig {
                n: 3,
                degrees: vec![4, 16],
                sequences: 2,
                k_geodesics: 10,
                phi: PhiSpec::Constant { value: 1.0 },
                mode: ManifoldMode::Sphere,
                seed: 0,
            },
            limit: 4.0 * std::f64::consts::PI,
            conjectural: false,
            rows: vec![
                ConvergenceRow {
                    d: 4,
                    mean_scaled: 12.0,
                    spread: 1.0,
                    deviation: -0.5,
                },
                ConvergenceRow {
                    d: 16,
                    mean_scaled: 12.4,
                    spread: 0.5,
                    deviation: -0.1,
                },
            ],
            series: vec![vec![11.5, 12.3], vec![12.5, 12.5]],
        };
        let csv = String::from_utf8(convergence_series_csv(&report)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sequence,d4,d16");
        assert_eq!(lines.next().unwrap(), "0,11.5,12.3");
        assert_eq!(lines.next().unwrap(), "1,12.5,12.5");
    }

    #[test]
    fn run_outputs_commit_writes_manifest_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let config = serde_json::json!({ "n": 2, "r": 1 });
        let mut outputs = RunOutputs::new("inr", &config, 7).unwrap();
        outputs.add("inr_n2_r1.csv", b"t,estimate\n1,2\n".to_vec());
        outputs.add_json("inr_n2_r1.json", &config).unwrap();
        let records = outputs.records();
        let written = outputs.commit(dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        assert!(written[2].ends_with("inr.manifest.json"));

        let manifest = read_manifest(&written[2]).unwrap();
        assert_eq!(manifest.command, "inr");
        assert_eq!(manifest.seed, 7);
        assert_eq!(manifest.outputs, records);
        assert_eq!(manifest.config, config);
        assert!(manifest.finished_unix >= manifest.started_unix);
        // Hashes in the manifest match the bytes on disk.
        for record in &manifest.outputs {
            let bytes = std::fs::read(dir.path().join(&record.name)).unwrap();
            assert_eq!(sha256_hex(&bytes), record.sha256, "hash of {}", record.name);
        }
    }

    #[test]
    fn diverging_outputs_detects_mismatch_and_identity() {
        let config = serde_json::json!({});
        let mut a = RunOutputs::new("experiment", &config, 0).unwrap();
        a.add("report.csv", b"d,mean\n1,2\n".to_vec());
        let records = a.records();
        assert!(a.diverging_outputs(&records).is_empty());

        let mut b = RunOutputs::new("experiment", &config, 0).unwrap();
        b.add("report.csv", b"d,mean\n1,3\n".to_vec());
        assert_eq!(b.diverging_outputs(&records), vec!["report.csv".to_string()]);

        let c = RunOutputs::new("experiment", &config, 0).unwrap();
        assert_eq!(c.diverging_outputs(&records), vec!["report.csv".to_string()]);
    }
}
