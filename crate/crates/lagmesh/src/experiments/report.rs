//! Report assembly and serialization: CSV rows, key = value text blocks,
//! and a gnuplot script consuming the CSV.

use super::{CellRecord, StudyConfig, StudyKind};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub const CSV_HEADER: &str = "study,h,q,rho,p,sigma,K,kind,ratio_min,ratio_max,slope,resid,warn";

/// Inputs that pin down a report byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub domain: String,
    pub kernel_family: String,
    pub kernel_m: u32,
    pub h_levels: Vec<f64>,
    pub quad_resolution_fraction: f64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub study: StudyKind,
    pub provenance: Provenance,
    pub cells: Vec<CellRecord>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_infinite() && x > 0.0 => "inf".into(),
        Some(x) => format!("{x}"),
    }
}

impl ExperimentReport {
    pub fn new(study: StudyKind, cfg: &StudyConfig, cells: Vec<CellRecord>) -> ExperimentReport {
        ExperimentReport {
            study,
            provenance: Provenance {
                seed: cfg.seed,
                domain: cfg.domain.clone(),
                kernel_family: cfg.kernel.family.clone(),
                kernel_m: cfg.kernel.m,
                h_levels: cfg.h_levels.clone(),
                quad_resolution_fraction: cfg.quad_resolution_fraction,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            cells,
        }
    }

    /// No cell carries a usable measurement.
    pub fn is_degenerate(&self) -> bool {
        self.cells.iter().all(|c| {
            c.ratio_min.is_none() && c.ratio_max.is_none() && c.slope.is_none()
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.study.as_str(),
                c.h,
                c.q,
                c.rho,
                fmt_opt(c.p),
                fmt_opt(c.sigma),
                fmt_opt(c.k),
                c.kind,
                fmt_opt(c.ratio_min),
                fmt_opt(c.ratio_max),
                fmt_opt(c.slope),
                fmt_opt(c.resid),
                c.warn.replace(',', ";"),
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        out.push_str(&format!("study = {}\n", self.study.as_str()));
        out.push_str(&format!("version = {}\n", p.version));
        out.push_str(&format!("seed = {}\n", p.seed));
        out.push_str(&format!("domain = {}\n", p.domain));
        out.push_str(&format!("kernel = {} m={}\n", p.kernel_family, p.kernel_m));
        out.push_str(&format!(
            "h_levels = {}\n",
            p.h_levels
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ));
        out.push_str(&format!(
            "quad_resolution_fraction = {}\n",
            p.quad_resolution_fraction
        ));
        for c in &self.cells {
            out.push_str("\n[cell]\n");
            out.push_str(&format!("kind = {}\n", c.kind));
            out.push_str(&format!("h = {}\n", c.h));
            out.push_str(&format!("q = {}\n", c.q));
            out.push_str(&format!("rho = {}\n", c.rho));
            if let Some(p) = c.p {
                out.push_str(&format!("p = {}\n", fmt_opt(Some(p))));
            }
            if let Some(s) = c.sigma {
                out.push_str(&format!("sigma = {s}\n"));
            }
            if let Some(k) = c.k {
                out.push_str(&format!("K = {k}\n"));
            }
            if let Some(v) = c.ratio_min {
                out.push_str(&format!("ratio_min = {v}\n"));
            }
            if let Some(v) = c.ratio_max {
                out.push_str(&format!("ratio_max = {v}\n"));
            }
            if let Some(v) = c.slope {
                out.push_str(&format!("slope = {v}\n"));
            }
            if let Some(v) = c.resid {
                out.push_str(&format!("resid = {v}\n"));
            }
            if !c.warn.is_empty() {
                out.push_str(&format!("warn = {}\n", c.warn));
            }
        }
        out
    }

    /// Log-scale gnuplot script plotting the measured ratios against h.
    pub fn plot_script(&self) -> String {
        let title = self.study.as_str();
        format!(
            "# gnuplot script for {title} study; consumes report.csv\n\
             set datafile separator ','\n\
             set key autotitle columnhead\n\
             set logscale x\n\
             set logscale y\n\
             set xlabel 'h'\n\
             set ylabel 'measured ratio'\n\
             set title '{title}'\n\
             plot 'report.csv' using 2:10 with points pt 7 title 'ratio_max', \\\n\
                  'report.csv' using 2:9 with points pt 5 title 'ratio_min'\n"
        )
    }
}

// --- serde helpers for exponents that may be infinite -----------------------

fn exponent_to_json(p: f64) -> serde_json::Value {
    if p.is_infinite() {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::json!(p)
    }
}

fn exponent_from_json(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) if s == "inf" => Some(f64::INFINITY),
        _ => None,
    }
}

pub fn ser_exponents<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(values.iter().map(|&p| exponent_to_json(p)))
}

pub fn de_exponents<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let raw: Vec<serde_json::Value> = Vec::deserialize(d)?;
    raw.iter()
        .map(|v| {
            exponent_from_json(v)
                .ok_or_else(|| D::Error::custom(format!("bad exponent {v} (number or \"inf\")")))
        })
        .collect()
}

pub fn ser_pairs<S: Serializer>(values: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(
        values
            .iter()
            .map(|&(r, p)| vec![exponent_to_json(r), exponent_to_json(p)]),
    )
}

pub fn de_pairs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
    let raw: Vec<Vec<serde_json::Value>> = Vec::deserialize(d)?;
    raw.iter()
        .map(|pair| {
            if pair.len() != 2 {
                return Err(D::Error::custom("pair must have two entries"));
            }
            let r = exponent_from_json(&pair[0])
                .ok_or_else(|| D::Error::custom("bad exponent in pair"))?;
            let p = exponent_from_json(&pair[1])
                .ok_or_else(|| D::Error::custom("bad exponent in pair"))?;
            Ok((r, p))
        })
        .collect()
}
