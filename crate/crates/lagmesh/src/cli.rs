//! Configuration-driven front end: build point sets and bases, run studies,
//! emit CSV/plot artifacts.

use crate::error::{Error, Result};
use crate::experiments::{self, report, KernelSpec, StudyConfig, StudyKind};
use crate::geometry::{
    extend_grid, generate_quasi_uniform, point_set_metrics, restrict_to_tilde, Domain,
};
use crate::interpolation::{solve_full_lagrange, write_basis_text};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Metrics,
    Basis,
    Study,
}

/// The whole config file: command selector plus every study knob.
/// Unknown keys are rejected at parse time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub command: Command,
    #[serde(default)]
    pub study: Option<StudyKind>,
    #[serde(default = "defaults::domain")]
    pub domain: String,
    #[serde(default = "defaults::kernel")]
    pub kernel: KernelSpec,
    /// Target fill distance for the metrics/basis commands.
    #[serde(default)]
    pub target_h: Option<f64>,
    /// Fill-distance probe resolution; defaults to target_h / 10.
    #[serde(default)]
    pub probe_resolution: Option<f64>,
    #[serde(default = "defaults::h_levels")]
    pub h_levels: Vec<f64>,
    #[serde(
        default = "defaults::p_values",
        serialize_with = "report::ser_exponents",
        deserialize_with = "report::de_exponents"
    )]
    pub p_values: Vec<f64>,
    #[serde(default = "defaults::sigma_values")]
    pub sigma_values: Vec<f64>,
    #[serde(rename = "K_values", default = "defaults::k_values")]
    pub k_values: Vec<f64>,
    #[serde(rename = "local_K", default = "defaults::local_k")]
    pub local_k: f64,
    #[serde(
        default = "defaults::nikolskii_pairs",
        serialize_with = "report::ser_pairs",
        deserialize_with = "report::de_pairs"
    )]
    pub nikolskii_pairs: Vec<(f64, f64)>,
    #[serde(default = "defaults::n_random_coeff")]
    pub n_random_coeff: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::quad_fraction")]
    pub quad_resolution_fraction: f64,
    #[serde(default = "defaults::basis_kinds")]
    pub basis_kinds: Vec<String>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: String,
    #[serde(default = "defaults::verbosity")]
    pub verbosity: u8,
}

mod defaults {
    use super::KernelSpec;

    pub fn domain() -> String {
        "square".into()
    }
    pub fn kernel() -> KernelSpec {
        KernelSpec {
            family: "matern".into(),
            m: 2,
        }
    }
    pub fn h_levels() -> Vec<f64> {
        vec![0.2, 0.1]
    }
    pub fn p_values() -> Vec<f64> {
        vec![1.0, 2.0, f64::INFINITY]
    }
    pub fn sigma_values() -> Vec<f64> {
        vec![1.0]
    }
    pub fn k_values() -> Vec<f64> {
        vec![2.0, 4.0, 6.0, 8.0]
    }
    pub fn local_k() -> f64 {
        6.0
    }
    pub fn nikolskii_pairs() -> Vec<(f64, f64)> {
        vec![(2.0, f64::INFINITY)]
    }
    pub fn n_random_coeff() -> usize {
        100
    }
    pub fn quad_fraction() -> f64 {
        0.1
    }
    pub fn basis_kinds() -> Vec<String> {
        vec!["full".into(), "local".into()]
    }
    pub fn output_dir() -> String {
        "out".into()
    }
    pub fn verbosity() -> u8 {
        1
    }
}

impl CliConfig {
    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            domain: self.domain.clone(),
            kernel: self.kernel.clone(),
            h_levels: self.h_levels.clone(),
            p_values: self.p_values.clone(),
            sigma_values: self.sigma_values.clone(),
            k_values: self.k_values.clone(),
            local_k: self.local_k,
            nikolskii_pairs: self.nikolskii_pairs.clone(),
            n_random_coeff: self.n_random_coeff,
            seed: self.seed,
            quad_resolution_fraction: self.quad_resolution_fraction,
            basis_kinds: self.basis_kinds.clone(),
        }
    }

    /// Semantic validation beyond the grammar.
    pub fn validate(&self) -> Result<()> {
        Domain::from_name(&self.domain)?;
        self.kernel.build(dim_of(&self.domain)?)?;
        match self.command {
            Command::Metrics | Command::Basis => {
                let h = self.target_h.ok_or_else(|| Error::ConfigSemantic {
                    key: "target_h".into(),
                    message: "required for the metrics and basis commands".into(),
                })?;
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::ConfigSemantic {
                        key: "target_h".into(),
                        message: format!("must lie in (0, 1), got {h}"),
                    });
                }
            }
            Command::Study => {
                if self.study.is_none() {
                    return Err(Error::ConfigSemantic {
                        key: "study".into(),
                        message: "required when command = study".into(),
                    });
                }
                self.study_config().validate()?;
            }
        }
        Ok(())
    }
}

fn dim_of(domain: &str) -> Result<u32> {
    Ok(Domain::from_name(domain)?.dim() as u32)
}

/// Parse and validate a config file (JSON grammar, unknown keys rejected).
pub fn parse_config(path: &Path) -> Result<CliConfig> {
    let text = fs::read_to_string(path)?;
    let cfg: CliConfig = serde_json::from_str(&text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Exit status of a run: artifacts were written unless the status is Error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    DegenerateStudy,
}

impl RunStatus {
    pub fn code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::DegenerateStudy => 1,
        }
    }
}

/// Execute a validated config. All outputs are computed before any file is
/// created, so a failing run leaves no artifacts behind.
pub fn run(cfg: &CliConfig) -> Result<RunStatus> {
    cfg.validate()?;
    match cfg.command {
        Command::Metrics => run_metrics(cfg),
        Command::Basis => run_basis(cfg),
        Command::Study => run_study_command(cfg),
    }
}

fn run_metrics(cfg: &CliConfig) -> Result<RunStatus> {
    let domain = Domain::from_name(&cfg.domain)?;
    let h = cfg.target_h.expect("validated");
    let probe = cfg.probe_resolution.unwrap_or(h / 10.0);
    let set = generate_quasi_uniform(&domain, h, cfg.seed)?;
    let metrics = point_set_metrics(&set, &domain, probe)?;
    println!(
        "domain={} N={} h={} q={} rho={}",
        cfg.domain,
        set.len(),
        metrics.fill_distance,
        metrics.separation_radius,
        metrics.mesh_ratio
    );
    Ok(RunStatus::Success)
}

fn prepare_output_dir(dir: &str) -> Result<PathBuf> {
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path)?;
    // probe writability up front so failures cannot leave partial artifacts
    let probe = path.join(".write_probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(path)
}

fn run_basis(cfg: &CliConfig) -> Result<RunStatus> {
    let domain = Domain::from_name(&cfg.domain)?;
    let h = cfg.target_h.expect("validated");
    let probe = cfg.probe_resolution.unwrap_or(h / 10.0);
    let kernel = cfg.kernel.build(domain.dim() as u32)?;

    let xi = generate_quasi_uniform(&domain, h, cfg.seed)?;
    let metrics = point_set_metrics(&xi, &domain, probe)?;
    let ext = extend_grid(&xi, &domain, metrics.fill_distance)?;
    let xi_tilde = restrict_to_tilde(&ext, &domain);
    log::info!(
        "basis: |Xi| = {}, |Xi~| = {}, h = {}, q = {}, rho = {}",
        xi.len(),
        xi_tilde.len(),
        metrics.fill_distance,
        metrics.separation_radius,
        metrics.mesh_ratio
    );
    let basis = solve_full_lagrange(&kernel, &xi_tilde, xi.ids())?;

    let mut basis_text = Vec::new();
    write_basis_text(&basis, &mut basis_text)?;
    let mut points_text = Vec::new();
    xi_tilde.write_text(&mut points_text)?;

    let out = prepare_output_dir(&cfg.output_dir)?;
    fs::write(out.join("basis.txt"), basis_text)?;
    fs::write(out.join("points.txt"), points_text)?;
    for w in &basis.warnings {
        log::warn!("{w}");
    }
    Ok(RunStatus::Success)
}

fn run_study_command(cfg: &CliConfig) -> Result<RunStatus> {
    let kind = cfg.study.expect("validated");
    let study_cfg = cfg.study_config();
    let report = experiments::run_study(kind, &study_cfg)?;

    let csv = report.to_csv();
    let text = report.to_text();
    let plot = report.plot_script();

    let out = prepare_output_dir(&cfg.output_dir)?;
    fs::write(out.join("report.csv"), csv)?;
    fs::write(out.join("report.txt"), text)?;
    fs::write(out.join("plot.gp"), plot)?;

    if report.is_degenerate() {
        return Ok(RunStatus::DegenerateStudy);
    }
    Ok(RunStatus::Success)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_metrics_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"command": "metrics", "domain": "square", "target_h": 0.1}"#,
        );
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.probe_resolution, None); // resolved to h/10 at use
        assert_eq!(cfg.local_k, 6.0);
        assert_eq!(cfg.verbosity, 1);
    }

    #[test]
    fn nondecreasing_levels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"command": "study", "study": "stability", "h_levels": [0.1, 0.2]}"#,
        );
        match parse_config(&path) {
            Err(Error::ConfigSemantic { key, message }) => {
                assert_eq!(key, "h_levels");
                assert!(message.contains("strictly decreasing"));
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "{\"command\": \"metrics\", \"target_h\": 0.1,\n \"bogus\": 1}",
        );
        match parse_config(&path) {
            Err(Error::ConfigParse { line, column, message }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
                assert!(message.contains("bogus"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_roundtrip_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"command": "study", "study": "truncation", "K_values": [2, 4, 6],
                "p_values": [1, "inf"], "h_levels": [0.3, 0.2], "seed": 9}"#,
        );
        let cfg = parse_config(&path).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let path2 = write_config(dir.path(), &text);
        let back = parse_config(&path2).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn metrics_command_runs() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"command": "metrics", "domain": "interval", "target_h": 0.2}"#,
        );
        let cfg = parse_config(&path).unwrap();
        assert_eq!(run(&cfg).unwrap(), RunStatus::Success);
    }
}
