//! Parameter sweeps measuring the empirical constants and rates behind the
//! stability, Nikolskii, Bernstein, truncation and trace inequalities.

pub mod report;

pub use report::{ExperimentReport, Provenance, CSV_HEADER};

use crate::error::{Error, Result};
use crate::geometry::{
    extend_grid, footprint, generate_quasi_uniform, point_set_metrics, restrict_to_tilde, Domain,
    FootprintConfig, PointSet, PointSetMetrics,
};
use crate::interpolation::{
    solve_full_lagrange, solve_local_basis, solve_local_lagrange, truncate_and_project, BasisKind,
    LagrangeBasis,
};
use crate::kernels::{eval_kernel_derivative, Kernel};
use crate::norms::{
    boundary_quadrature, interior_quadrature, lp_norm_sampled, multi_indices, QuadratureRule,
    SampleSet,
};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Kernel family + order, as configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    pub m: u32,
}

impl KernelSpec {
    pub fn build(&self, d: u32) -> Result<Kernel> {
        match self.family.as_str() {
            "matern" => Ok(Kernel::matern(self.m, d)),
            "surface_spline" => Ok(Kernel::surface_spline(self.m, d)),
            other => Err(Error::ConfigSemantic {
                key: "kernel.family".into(),
                message: format!("unknown family `{other}` (matern | surface_spline)"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Decay,
    Stability,
    Bernstein,
    Truncation,
    Trace,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::Decay => "decay",
            StudyKind::Stability => "stability",
            StudyKind::Bernstein => "bernstein",
            StudyKind::Truncation => "truncation",
            StudyKind::Trace => "trace",
        }
    }
}

/// Sweep axes and sampling policy for one study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub domain: String,
    pub kernel: KernelSpec,
    pub h_levels: Vec<f64>,
    #[serde(
        serialize_with = "report::ser_exponents",
        deserialize_with = "report::de_exponents"
    )]
    pub p_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub k_values: Vec<f64>,
    /// Footprint multiplier for the local bases used by the stability,
    /// Bernstein and trace studies.
    pub local_k: f64,
    /// (r, p) pairs for the Nikolskii ratio.
    #[serde(
        serialize_with = "report::ser_pairs",
        deserialize_with = "report::de_pairs"
    )]
    pub nikolskii_pairs: Vec<(f64, f64)>,
    pub n_random_coeff: usize,
    pub seed: u64,
    /// Interior quadrature resolution as a fraction of the measured h.
    pub quad_resolution_fraction: f64,
    /// Basis kinds the sweep covers ("full" and/or "local").
    pub basis_kinds: Vec<String>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_levels.is_empty() {
            return Err(Error::ConfigSemantic {
                key: "h_levels".into(),
                message: "at least one level required".into(),
            });
        }
        if !self.h_levels.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::ConfigSemantic {
                key: "h_levels".into(),
                message: "h_levels must be strictly decreasing".into(),
            });
        }
        if self.h_levels.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
            return Err(Error::ConfigSemantic {
                key: "h_levels".into(),
                message: "levels must lie in (0, 1)".into(),
            });
        }
        if self.n_random_coeff < 10 {
            return Err(Error::ConfigSemantic {
                key: "n_random_coeff".into(),
                message: "need at least 10 random draws".into(),
            });
        }
        if self.p_values.iter().any(|&p| p < 1.0) {
            return Err(Error::ConfigSemantic {
                key: "p_values".into(),
                message: "exponents must be >= 1".into(),
            });
        }
        if !(self.quad_resolution_fraction > 0.0 && self.quad_resolution_fraction <= 0.5) {
            return Err(Error::ConfigSemantic {
                key: "quad_resolution_fraction".into(),
                message: "fraction must lie in (0, 0.5]".into(),
            });
        }
        for k in &self.basis_kinds {
            if k != "full" && k != "local" {
                return Err(Error::ConfigSemantic {
                    key: "basis_kinds".into(),
                    message: format!("unknown basis kind `{k}` (full | local)"),
                });
            }
        }
        if self.basis_kinds.is_empty() {
            return Err(Error::ConfigSemantic {
                key: "basis_kinds".into(),
                message: "at least one basis kind required".into(),
            });
        }
        Ok(())
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            domain: "square".into(),
            kernel: KernelSpec {
                family: "matern".into(),
                m: 2,
            },
            h_levels: vec![0.2, 0.1],
            p_values: vec![1.0, 2.0, f64::INFINITY],
            sigma_values: vec![1.0],
            k_values: vec![2.0, 4.0, 6.0, 8.0],
            local_k: 6.0,
            nikolskii_pairs: vec![(2.0, f64::INFINITY)],
            n_random_coeff: 100,
            seed: 0,
            quad_resolution_fraction: 0.1,
            basis_kinds: vec!["full".into(), "local".into()],
        }
    }
}

/// One measurement cell of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    pub h: f64,
    pub q: f64,
    pub rho: f64,
    pub p: Option<f64>,
    pub sigma: Option<f64>,
    pub k: Option<f64>,
    pub kind: String,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub slope: Option<f64>,
    pub resid: Option<f64>,
    pub warn: String,
}

impl CellRecord {
    fn at(metrics: &PointSetMetrics, kind: &str) -> CellRecord {
        CellRecord {
            h: metrics.fill_distance,
            q: metrics.separation_radius,
            rho: metrics.mesh_ratio,
            p: None,
            sigma: None,
            k: None,
            kind: kind.to_string(),
            ratio_min: None,
            ratio_max: None,
            slope: None,
            resid: None,
            warn: String::new(),
        }
    }
}

/// Geometry and quadrature shared by every cell of one refinement level.
pub struct Level {
    pub target_h: f64,
    pub domain: Domain,
    pub xi: PointSet,
    pub xi_tilde: PointSet,
    pub metrics: PointSetMetrics,
    pub quad: QuadratureRule,
}

pub fn build_level(cfg: &StudyConfig, target_h: f64) -> Result<Level> {
    let domain = Domain::from_name(&cfg.domain)?;
    let xi = generate_quasi_uniform(&domain, target_h, cfg.seed)?;
    let metrics = point_set_metrics(&xi, &domain, target_h / 10.0)?;
    // target_h upper-bounds the measured fill distance, which extend_grid allows
    let ext = extend_grid(&xi, &domain, target_h)?;
    let xi_tilde = restrict_to_tilde(&ext, &domain);
    let quad = interior_quadrature(&domain, cfg.quad_resolution_fraction * target_h)?;
    log::info!(
        "level h_target={target_h}: |Xi| = {}, |Xi~| = {}, h = {:.4}, q = {:.4}, rho = {:.3}, quad nodes = {}",
        xi.len(),
        xi_tilde.len(),
        metrics.fill_distance,
        metrics.separation_radius,
        metrics.mesh_ratio,
        quad.len()
    );
    Ok(Level {
        target_h,
        domain,
        xi,
        xi_tilde,
        metrics,
        quad,
    })
}

/// Values of D^alpha applied to every basis column at a flat node list,
/// shaped (n_nodes, n_columns). The kernel-evaluation matrix is built in
/// row chunks so it is never materialized whole.
pub fn basis_value_matrix(
    basis: &LagrangeBasis,
    nodes: &[f64],
    dim: usize,
    alpha: &[usize],
) -> Result<Array2<f64>> {
    let n_nodes = nodes.len() / dim;
    let centers = &basis.centers;
    let n_centers = centers.len();
    let n_cols = basis.columns.len();

    // dense coefficient matrix (centers x columns)
    let index = centers.id_index();
    let mut coeff = Array2::zeros((n_centers, n_cols));
    for (j, col) in basis.columns.iter().enumerate() {
        for &(id, a) in &col.coeffs {
            coeff[(index[&id], j)] = a;
        }
    }

    const CHUNK: usize = 2048;
    let chunks: Result<Vec<Array2<f64>>> = (0..n_nodes)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut e = Array2::zeros((chunk.len(), n_centers));
            let mut diff = vec![0.0; dim];
            for (row, &node_idx) in chunk.iter().enumerate() {
                let x = &nodes[node_idx * dim..(node_idx + 1) * dim];
                for c in 0..n_centers {
                    let pc = centers.point(c);
                    for k in 0..dim {
                        diff[k] = x[k] - pc[k];
                    }
                    e[(row, c)] = eval_kernel_derivative(&basis.kernel, alpha, &diff)?;
                }
            }
            Ok(e.dot(&coeff))
        })
        .collect();
    let chunks = chunks?;
    let mut values = Array2::zeros((n_nodes, n_cols));
    let mut row0 = 0;
    for block in chunks {
        let rows = block.nrows();
        values
            .slice_mut(ndarray::s![row0..row0 + rows, ..])
            .assign(&block);
        row0 += rows;
    }

    if let Some(pb) = &basis.poly_basis {
        let n_poly = pb.len();
        let mut pnodes = Array2::zeros((n_nodes, n_poly));
        for i in 0..n_nodes {
            let x = &nodes[i * dim..(i + 1) * dim];
            for j in 0..n_poly {
                pnodes[(i, j)] = pb.eval_derivative(j, alpha, x);
            }
        }
        let mut pc = Array2::zeros((n_poly, n_cols));
        for (j, col) in basis.columns.iter().enumerate() {
            for (r, &c) in col.poly.iter().enumerate() {
                pc[(r, j)] = c;
            }
        }
        values = values + pnodes.dot(&pc);
    }
    Ok(values)
}

/// Standard-normal draws plus the deterministic unit vectors: the sampled
/// stand-ins for the suprema in the inequalities.
fn coefficient_draws(n_cols: usize, n_random: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n_random + n_cols);
    for _ in 0..n_random {
        let v: Array1<f64> = Array1::from_iter((0..n_cols).map(|_| standard_normal(&mut rng)));
        draws.push(v);
    }
    for j in 0..n_cols {
        let mut e = Array1::zeros(n_cols);
        e[j] = 1.0;
        draws.push(e);
    }
    draws
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two uniforms
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn lp_vector_norm(a: &Array1<f64>, p: f64) -> f64 {
    if p.is_infinite() {
        a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    } else {
        a.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Least-squares fit of y against x; returns (slope, r_squared).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    (slope, r2)
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

fn configured_kinds(cfg: &StudyConfig) -> Vec<BasisKind> {
    cfg.basis_kinds
        .iter()
        .map(|k| match k.as_str() {
            "full" => BasisKind::Full,
            _ => BasisKind::Local,
        })
        .collect()
}

fn basis_of_kind(
    kernel: &Kernel,
    level: &Level,
    kind: BasisKind,
    local_k: f64,
) -> Result<LagrangeBasis> {
    match kind {
        BasisKind::Full => solve_full_lagrange(kernel, &level.xi_tilde, level.xi.ids()),
        BasisKind::Local => {
            let cfg = FootprintConfig::new(local_k, level.metrics.fill_distance);
            solve_local_basis(kernel, &level.xi_tilde, level.xi.ids(), &cfg)
        }
        BasisKind::Truncated => {
            let full = solve_full_lagrange(kernel, &level.xi_tilde, level.xi.ids())?;
            let cfg = FootprintConfig::new(local_k, level.metrics.fill_distance);
            crate::interpolation::truncate_basis(&full, &cfg)
        }
    }
}

/// Interior centers sorted by decreasing distance to the boundary.
fn most_interior_ids(level: &Level, count: usize) -> Vec<usize> {
    let mut ids: Vec<(usize, f64)> = level
        .xi
        .iter()
        .map(|(id, p)| (id, level.domain.boundary_distance(p)))
        .collect();
    ids.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ids.into_iter().take(count).map(|(id, _)| id).collect()
}

// ---------------------------------------------------------------------------
// decay study
// ---------------------------------------------------------------------------

/// Exponential-decay rates of the Lagrange functions and their coefficient
/// vectors: least-squares slope of the log envelope against distance/h over
/// the interior window [2h, min(10h, dist(xi, boundary))].
pub fn run_decay_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &target_h in &cfg.h_levels {
        let level = build_level(cfg, target_h)?;
        let kernel = cfg.kernel.build(level.domain.dim() as u32)?;
        let full = solve_full_lagrange(&kernel, &level.xi_tilde, level.xi.ids())?;
        let h = level.metrics.fill_distance;
        let selected = most_interior_ids(&level, 5);

        let mut lagrange_fits = Vec::new();
        let mut coeff_fits = Vec::new();
        let index = level.xi_tilde.id_index();
        for &xi_id in &selected {
            let xi_pos = level.xi_tilde.point(index[&xi_id]).to_vec();
            let window_hi = (10.0 * h).min(level.domain.boundary_distance(&xi_pos));
            if window_hi <= 2.0 * h {
                continue;
            }
            // pointwise decay on radial fans from xi
            let col = full.column(xi_id).expect("interior column");
            let mut bins: HashMap<usize, f64> = HashMap::new();
            let dim = level.domain.dim();
            let n_dirs = if dim == 1 { 2 } else { 16 };
            for dir in 0..n_dirs {
                let angle = 2.0 * std::f64::consts::PI * dir as f64 / n_dirs as f64;
                let unit: Vec<f64> = if dim == 1 {
                    vec![if dir == 0 { 1.0 } else { -1.0 }]
                } else {
                    vec![angle.cos(), angle.sin()]
                };
                let mut r = 2.0 * h;
                while r <= window_hi {
                    let x: Vec<f64> = xi_pos
                        .iter()
                        .zip(unit.iter())
                        .map(|(c, u)| c + r * u)
                        .collect();
                    if level.domain.is_inside(&x) {
                        let v = full.eval_column_indexed(col, &x, &vec![0; dim], &index)?;
                        let bin = (2.0 * r / h).floor() as usize;
                        let entry = bins.entry(bin).or_insert(0.0);
                        *entry = entry.max(v.abs());
                    }
                    r += h / 8.0;
                }
            }
            if let Some((slope, r2)) = fit_log_envelope(&bins) {
                lagrange_fits.push((slope, r2));
            }

            // coefficient decay over centers in the window
            let mut cbins: HashMap<usize, f64> = HashMap::new();
            for &(id, a) in &col.coeffs {
                let zeta = level.xi_tilde.point(index[&id]);
                let r = crate::geometry::dist(&xi_pos, zeta);
                if r >= 2.0 * h && r <= window_hi {
                    let bin = (2.0 * r / h).floor() as usize;
                    let entry = cbins.entry(bin).or_insert(0.0);
                    *entry = entry.max(a.abs());
                }
            }
            if let Some((slope, r2)) = fit_log_envelope(&cbins) {
                coeff_fits.push((slope, r2));
            }
        }

        for (name, fits) in [("lagrange", &lagrange_fits), ("coeff", &coeff_fits)] {
            let mut cell = CellRecord::at(&level.metrics, name);
            if fits.is_empty() {
                cell.warn = "insufficient bins".into();
            } else {
                let n = fits.len() as f64;
                cell.slope = Some(fits.iter().map(|f| f.0).sum::<f64>() / n);
                cell.resid = Some(fits.iter().map(|f| f.1).sum::<f64>() / n);
                cell.ratio_min = fits.iter().map(|f| f.0).min_by(|a, b| a.partial_cmp(b).unwrap());
                cell.ratio_max = fits.iter().map(|f| f.0).max_by(|a, b| a.partial_cmp(b).unwrap());
            }
            cells.push(cell);
        }
    }
    Ok(ExperimentReport::new(StudyKind::Decay, cfg, cells))
}

/// Fit ln(envelope) against the bin center in h units; needs >= 4 bins.
fn fit_log_envelope(bins: &HashMap<usize, f64>) -> Option<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut keys: Vec<&usize> = bins.keys().collect();
    keys.sort();
    for &bin in keys {
        let v = bins[&bin];
        if v > 0.0 && v.is_finite() {
            // bins have width h/2; report the center in units of h
            xs.push((bin as f64 + 0.5) / 2.0);
            ys.push(v.ln());
        }
    }
    if xs.len() < 4 {
        return None;
    }
    Some(linear_fit(&xs, &ys))
}

// ---------------------------------------------------------------------------
// stability study
// ---------------------------------------------------------------------------

/// Riesz-stability spread q^{-d/p} ||s||_{L_p} / ||a||_{l_p} over random and
/// unit-vector draws, plus the Nikolskii ratios, for full and local bases.
pub fn run_stability_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (level_idx, &target_h) in cfg.h_levels.iter().enumerate() {
        let level = build_level(cfg, target_h)?;
        let kernel = cfg.kernel.build(level.domain.dim() as u32)?;
        let d = level.domain.dim() as f64;
        let q = level.metrics.separation_radius;

        if level.quad.resolution > q / 3.0 {
            let mut cell = CellRecord::at(&level.metrics, "refused");
            cell.warn = format!(
                "quadrature resolution {} exceeds q/3 = {}",
                level.quad.resolution,
                q / 3.0
            );
            cells.push(cell);
            continue;
        }

        let draws = coefficient_draws(
            level.xi.len(),
            cfg.n_random_coeff,
            cfg.seed ^ (level_idx as u64).wrapping_mul(0x9E37),
        );

        for kind in configured_kinds(cfg) {
            let basis = basis_of_kind(&kernel, &level, kind, cfg.local_k)?;
            let values = basis_value_matrix(
                &basis,
                level.quad.nodes_flat(),
                level.domain.dim(),
                &vec![0; level.domain.dim()],
            )?;

            let mut spread = vec![(f64::INFINITY, 0.0_f64); cfg.p_values.len()];
            let mut nik = vec![(f64::INFINITY, 0.0_f64); cfg.nikolskii_pairs.len()];
            for a in &draws {
                let s = values.dot(a);
                let sv = s.as_slice().unwrap();
                for (slot, &p) in spread.iter_mut().zip(cfg.p_values.iter()) {
                    let na = lp_vector_norm(a, p);
                    if na == 0.0 {
                        continue;
                    }
                    let ns = lp_norm_sampled(sv, &level.quad.weights, p);
                    let ratio = q.powf(-d / p_or_zero(p)) * ns / na;
                    slot.0 = slot.0.min(ratio);
                    slot.1 = slot.1.max(ratio);
                }
                // Nikolskii: ||s||_p q^{d(1/r - 1/p)_+} / ||s||_r
                for (slot, &(r, p)) in nik.iter_mut().zip(cfg.nikolskii_pairs.iter()) {
                    let np = lp_norm_sampled(sv, &level.quad.weights, p);
                    let nr = lp_norm_sampled(sv, &level.quad.weights, r);
                    if nr == 0.0 {
                        continue;
                    }
                    let ratio = np * q.powf(d * positive_part(inv(r) - inv(p))) / nr;
                    slot.0 = slot.0.min(ratio);
                    slot.1 = slot.1.max(ratio);
                }
            }
            for (&p, &(lo, hi)) in cfg.p_values.iter().zip(spread.iter()) {
                let mut cell = CellRecord::at(&level.metrics, kind.as_str());
                cell.p = Some(p);
                cell.ratio_min = Some(lo);
                cell.ratio_max = Some(hi);
                cells.push(cell);
            }
            for (&(r, p), &(lo, hi)) in cfg.nikolskii_pairs.iter().zip(nik.iter()) {
                let mut cell =
                    CellRecord::at(&level.metrics, &format!("nikolskii_{}", kind.as_str()));
                cell.p = Some(p);
                cell.sigma = Some(r); // the r exponent rides in the sigma column
                cell.ratio_min = Some(lo);
                cell.ratio_max = Some(hi);
                cells.push(cell);
            }
        }
    }
    Ok(ExperimentReport::new(StudyKind::Stability, cfg, cells))
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn p_or_zero(p: f64) -> f64 {
    if p.is_infinite() {
        f64::INFINITY
    } else {
        p
    }
}

// ---------------------------------------------------------------------------
// bernstein study
// ---------------------------------------------------------------------------

const SLOBODECKIJ_CAP: usize = 5000;

/// Bernstein ratios h^sigma ||s||_{W_p^sigma} / ||s||_{L_p} and
/// h^{sigma - d/p} ||s||_{W_p^sigma} / ||a||_{l_p}, maxima over draws.
pub fn run_bernstein_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    // (kind, p, sigma) -> ratios per level, for growth factors
    let mut history: HashMap<(String, u64, u64), Vec<f64>> = HashMap::new();

    for (level_idx, &target_h) in cfg.h_levels.iter().enumerate() {
        let level = build_level(cfg, target_h)?;
        let kernel = cfg.kernel.build(level.domain.dim() as u32)?;
        let d = level.domain.dim() as f64;
        let h = level.metrics.fill_distance;
        let m = kernel.m as f64;
        let dim = level.domain.dim();

        let max_k = cfg
            .sigma_values
            .iter()
            .map(|s| s.floor() as usize)
            .chain(cfg.sigma_values.iter().map(|s| s.ceil() as usize))
            .max()
            .unwrap_or(0);
        let needs_fractional = cfg.sigma_values.iter().any(|s| s.fract() != 0.0);

        // capped sub-quadrature for the O(n^2) fractional double sum
        let frac_quad = if needs_fractional {
            Some(capped_quadrature(&level, SLOBODECKIJ_CAP)?)
        } else {
            None
        };

        let draws = coefficient_draws(
            level.xi.len(),
            cfg.n_random_coeff,
            cfg.seed ^ (level_idx as u64).wrapping_mul(0xB5297),
        );

        for kind in configured_kinds(cfg) {
            let basis = basis_of_kind(&kernel, &level, kind, cfg.local_k)?;
            // derivative value matrices for all |alpha| <= max_k
            let mut mats: HashMap<Vec<usize>, Array2<f64>> = HashMap::new();
            for order in 0..=max_k {
                for alpha in multi_indices(dim, order) {
                    let v = basis_value_matrix(&basis, level.quad.nodes_flat(), dim, &alpha)?;
                    mats.insert(alpha, v);
                }
            }
            let mut frac_mats: HashMap<Vec<usize>, Array2<f64>> = HashMap::new();
            if let Some(fq) = &frac_quad {
                for order in 0..=max_k {
                    for alpha in multi_indices(dim, order) {
                        let v = basis_value_matrix(&basis, fq.nodes_flat(), dim, &alpha)?;
                        frac_mats.insert(alpha, v);
                    }
                }
            }

            for &p in &cfg.p_values {
                for &sigma in &cfg.sigma_values {
                    let mut cell = CellRecord::at(&level.metrics, kind.as_str());
                    cell.p = Some(p);
                    cell.sigma = Some(sigma);
                    let limit = m - positive_part(d / 2.0 - d * inv(p));
                    if sigma > limit + 1e-12 {
                        cell.warn = format!("skipped: sigma > m - (d/2 - d/p)_+ = {limit}");
                        cells.push(cell);
                        continue;
                    }
                    if p.is_infinite() && sigma.fract() != 0.0 {
                        cell.warn = "skipped: fractional sigma needs p < infinity".into();
                        cells.push(cell);
                        continue;
                    }
                    let k = sigma.floor() as usize;
                    let delta = sigma - k as f64;

                    let mut max_vs_lp: f64 = 0.0;
                    let mut max_vs_coeff: f64 = 0.0;
                    for a in &draws {
                        let mut set = SampleSet::new(&level.quad);
                        for order in 0..=k {
                            for alpha in multi_indices(dim, order) {
                                let v = mats[&alpha].dot(a);
                                set.insert(alpha, v.to_vec());
                            }
                        }
                        let lp = set.lp(p)?;
                        let mut wnorm = set.sobolev_integer(k, p)?;
                        if delta > 0.0 {
                            let fq = frac_quad.as_ref().expect("fractional quadrature");
                            let mut fset = SampleSet::new(fq);
                            for alpha in multi_indices(dim, k) {
                                let v = frac_mats[&alpha].dot(a);
                                fset.insert(alpha, v.to_vec());
                            }
                            let semi = fset.slobodeckij(k, delta, p)?;
                            wnorm = (wnorm.powf(p) + semi.powf(p)).powf(1.0 / p);
                        }
                        let na = lp_vector_norm(a, p);
                        if lp > 0.0 {
                            max_vs_lp = max_vs_lp.max(h.powf(sigma) * wnorm / lp);
                        }
                        if na > 0.0 {
                            max_vs_coeff =
                                max_vs_coeff.max(h.powf(sigma - d * inv(p)) * wnorm / na);
                        }
                    }
                    cell.ratio_max = Some(max_vs_lp);
                    cell.ratio_min = Some(max_vs_coeff);
                    let key = (
                        kind.as_str().to_string(),
                        p.to_bits(),
                        sigma.to_bits(),
                    );
                    let prev = history.entry(key).or_default();
                    if let Some(last) = prev.last() {
                        cell.slope = Some(max_vs_lp / last);
                    }
                    prev.push(max_vs_lp);
                    cells.push(cell);
                }
            }
        }
    }
    Ok(ExperimentReport::new(StudyKind::Bernstein, cfg, cells))
}

/// A coarser interior rule whose node count respects the double-sum cap.
fn capped_quadrature(level: &Level, cap: usize) -> Result<QuadratureRule> {
    let mut res = level.quad.resolution;
    loop {
        let q = interior_quadrature(&level.domain, res)?;
        if q.len() <= cap {
            return Ok(q);
        }
        res *= ((q.len() as f64) / cap as f64).powf(1.0 / level.domain.dim() as f64) * 1.05;
    }
}

// ---------------------------------------------------------------------------
// truncation study
// ---------------------------------------------------------------------------

/// Tail-coefficient mass and truncated/local approximation errors against
/// the footprint multiplier K.
pub fn run_truncation_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.k_values.len() < 3 {
        return Err(Error::ConfigSemantic {
            key: "K_values".into(),
            message: "need at least 3 footprint multipliers".into(),
        });
    }
    let mut cells = Vec::new();
    for &target_h in &cfg.h_levels {
        let level = build_level(cfg, target_h)?;
        let kernel = cfg.kernel.build(level.domain.dim() as u32)?;
        let h = level.metrics.fill_distance;
        let dim = level.domain.dim();
        let full = solve_full_lagrange(&kernel, &level.xi_tilde, level.xi.ids())?;
        let xi_id = most_interior_ids(&level, 1)[0];

        // sup norms on a decimated node grid (enough for node-max errors)
        let eval_quad = interior_quadrature(&level.domain, (h / 3.0).max(level.quad.resolution))?;
        let index = level.xi_tilde.id_index();
        let col_full = full.column(xi_id).expect("interior column");
        let alphas: Vec<Vec<usize>> = (0..=1).flat_map(|o| multi_indices(dim, o)).collect();
        let mut full_samples: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        for alpha in &alphas {
            let vals: Result<Vec<f64>> = (0..eval_quad.len())
                .map(|i| full.eval_column_indexed(col_full, eval_quad.node(i), alpha, &index))
                .collect();
            full_samples.insert(alpha.clone(), vals?);
        }

        let mut local_linf_by_k = Vec::new();
        for &k_mult in &cfg.k_values {
            let fp_cfg = FootprintConfig::new(k_mult, h);
            let ups = match footprint(xi_id, &level.xi_tilde, &fp_cfg) {
                Ok(u) => u,
                Err(e) => {
                    let mut cell = CellRecord::at(&level.metrics, "skipped");
                    cell.k = Some(k_mult);
                    cell.warn = format!("footprint failed: {e}");
                    cells.push(cell);
                    continue;
                }
            };
            let truncated = match truncate_and_project(&full, xi_id, &ups) {
                Ok(c) => c,
                Err(e) => {
                    let mut cell = CellRecord::at(&level.metrics, "skipped");
                    cell.k = Some(k_mult);
                    cell.warn = format!("truncation failed: {e}");
                    cells.push(cell);
                    continue;
                }
            };
            let local = match solve_local_lagrange(&kernel, &ups, xi_id) {
                Ok(c) => c,
                Err(e) => {
                    let mut cell = CellRecord::at(&level.metrics, "skipped");
                    cell.k = Some(k_mult);
                    cell.warn = format!("local solve failed: {e}");
                    cells.push(cell);
                    continue;
                }
            };

            let mut record = |kind: &str, value: f64| {
                let mut cell = CellRecord::at(&level.metrics, kind);
                cell.k = Some(k_mult);
                cell.ratio_max = Some(value);
                cells.push(cell);
            };

            record("tail", truncated.tail_mass.unwrap_or(0.0));

            // errors vs the full column, in sup and W_2^1 over the nodes
            for (name, column) in [("trunc", &truncated), ("local", &local)] {
                let mut diff = SampleSet::new(&eval_quad);
                for alpha in &alphas {
                    let mut vals = Vec::with_capacity(eval_quad.len());
                    for i in 0..eval_quad.len() {
                        let v =
                            full.eval_column_indexed(column, eval_quad.node(i), alpha, &index)?;
                        vals.push(full_samples[alpha][i] - v);
                    }
                    diff.insert(alpha.clone(), vals);
                }
                let linf = diff.lp(f64::INFINITY)?;
                let w21 = diff.sobolev_integer(1, 2.0)?;
                record(&format!("{name}_linf"), linf);
                record(&format!("{name}_w21"), w21);
                if name == "local" {
                    local_linf_by_k.push((k_mult, linf));
                }
            }
        }

        if local_linf_by_k.len() >= 3 {
            let xs: Vec<f64> = local_linf_by_k.iter().map(|v| v.0).collect();
            let ys: Vec<f64> = local_linf_by_k
                .iter()
                .map(|v| v.1.max(1e-300).ln())
                .collect();
            let (slope, r2) = linear_fit(&xs, &ys);
            let mut cell = CellRecord::at(&level.metrics, "fit_local_linf");
            cell.slope = Some(slope);
            cell.resid = Some(r2);
            cells.push(cell);
        }
    }
    Ok(ExperimentReport::new(StudyKind::Truncation, cfg, cells))
}

// ---------------------------------------------------------------------------
// trace study
// ---------------------------------------------------------------------------

/// Boundary-to-interior ratios h^{1/p} ||s||_{L_p(boundary)} / ||s||_{L_p}.
pub fn run_trace_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut history: HashMap<(String, u64), Vec<f64>> = HashMap::new();
    for (level_idx, &target_h) in cfg.h_levels.iter().enumerate() {
        let level = build_level(cfg, target_h)?;
        let kernel = cfg.kernel.build(level.domain.dim() as u32)?;
        let h = level.metrics.fill_distance;
        let dim = level.domain.dim();
        let bquad = boundary_quadrature(&level.domain, level.quad.resolution)?;

        let draws = coefficient_draws(
            level.xi.len(),
            cfg.n_random_coeff,
            cfg.seed ^ (level_idx as u64).wrapping_mul(0xC2B2),
        );

        for kind in configured_kinds(cfg) {
            let basis = basis_of_kind(&kernel, &level, kind, cfg.local_k)?;
            let zero = vec![0usize; dim];
            let v_in = basis_value_matrix(&basis, level.quad.nodes_flat(), dim, &zero)?;
            let v_bnd = basis_value_matrix(&basis, bquad.nodes_flat(), dim, &zero)?;

            for &p in &cfg.p_values {
                let mut lo = f64::INFINITY;
                let mut hi: f64 = 0.0;
                for a in &draws {
                    let si = v_in.dot(a);
                    let sb = v_bnd.dot(a);
                    let ni = lp_norm_sampled(si.as_slice().unwrap(), &level.quad.weights, p);
                    if ni == 0.0 {
                        continue;
                    }
                    let nb = lp_norm_sampled(sb.as_slice().unwrap(), &bquad.weights, p);
                    let ratio = h.powf(inv(p)) * nb / ni;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
                let mut cell = CellRecord::at(&level.metrics, kind.as_str());
                cell.p = Some(p);
                cell.ratio_min = Some(lo);
                cell.ratio_max = Some(hi);
                let key = (kind.as_str().to_string(), p.to_bits());
                let prev = history.entry(key).or_default();
                if let Some(last) = prev.last() {
                    cell.slope = Some(hi / last);
                }
                prev.push(hi);
                cells.push(cell);
            }
        }
    }
    Ok(ExperimentReport::new(StudyKind::Trace, cfg, cells))
}

/// Dispatch a study by kind.
pub fn run_study(kind: StudyKind, cfg: &StudyConfig) -> Result<ExperimentReport> {
    match kind {
        StudyKind::Decay => run_decay_study(cfg),
        StudyKind::Stability => run_stability_study(cfg),
        StudyKind::Bernstein => run_bernstein_study(cfg),
        StudyKind::Truncation => run_truncation_study(cfg),
        StudyKind::Trace => run_trace_study(cfg),
    }
}
