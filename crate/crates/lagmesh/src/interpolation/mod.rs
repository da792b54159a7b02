//! Assembly and solution of full, truncated, and local Lagrange bases,
//! including the side-condition projector for conditionally positive
//! definite kernels.

use crate::error::{Error, Result};
use crate::geometry::{dist, footprint, FootprintConfig, PointSet};
use crate::kernels::{
    eval_kernel_derivative, eval_kernel_radial, polynomial_basis, vandermonde, Kernel,
    KernelFamily, PolynomialBasis,
};
use ndarray::{Array1, Array2};
use ndarray::ShapeBuilder;
use ndarray_linalg::{Eigh, FactorizeH, SolveH, UPLO};
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

/// Which construction produced a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Full,
    Truncated,
    Local,
}

impl BasisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisKind::Full => "full",
            BasisKind::Truncated => "truncated",
            BasisKind::Local => "local",
        }
    }
}

/// One Lagrange column: kernel coefficients (sparse over center ids) plus
/// the polynomial part for surface splines.
#[derive(Clone, Debug)]
pub struct BasisColumn {
    pub xi_id: usize,
    /// (center_id, coefficient), sorted by center id.
    pub coeffs: Vec<(usize, f64)>,
    pub poly: Vec<f64>,
    /// Sum of |A| over omitted centers, recorded during truncation.
    pub tail_mass: Option<f64>,
}

/// A family of Lagrange columns over a common center set.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    pub kind: BasisKind,
    pub kernel: Kernel,
    /// All centers the columns may reference (the extended set).
    pub centers: PointSet,
    pub poly_basis: Option<PolynomialBasis>,
    /// Columns sorted by xi_id; one per interior center.
    pub columns: Vec<BasisColumn>,
    pub footprint_cfg: Option<FootprintConfig>,
    pub warnings: Vec<String>,
}

impl LagrangeBasis {
    pub fn column(&self, xi_id: usize) -> Option<&BasisColumn> {
        self.columns.iter().find(|c| c.xi_id == xi_id)
    }

    pub fn interior_ids(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.xi_id).collect()
    }

    /// Evaluate D^alpha of one column at x.
    pub fn eval_column(&self, col: &BasisColumn, x: &[f64], alpha: &[usize]) -> Result<f64> {
        let index = self.centers.id_index();
        self.eval_column_indexed(col, x, alpha, &index)
    }

    /// Evaluation with a prebuilt id -> index map (bulk callers).
    pub fn eval_column_indexed(
        &self,
        col: &BasisColumn,
        x: &[f64],
        alpha: &[usize],
        index: &HashMap<usize, usize>,
    ) -> Result<f64> {
        let dim = self.centers.dim();
        let mut diff = vec![0.0; dim];
        let mut total = 0.0;
        for &(center_id, a) in &col.coeffs {
            if a == 0.0 {
                continue;
            }
            let idx = index[&center_id];
            let c = self.centers.point(idx);
            for k in 0..dim {
                diff[k] = x[k] - c[k];
            }
            total += a * eval_kernel_derivative(&self.kernel, alpha, &diff)?;
        }
        if let Some(basis) = &self.poly_basis {
            for (j, &cj) in col.poly.iter().enumerate() {
                if cj != 0.0 {
                    total += cj * basis.eval_derivative(j, alpha, x);
                }
            }
        }
        Ok(total)
    }
}

/// Coefficients over the interior centers, expanded in a Lagrange basis.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub basis: Arc<LagrangeBasis>,
    /// One coefficient per basis column, in column order.
    pub coeffs: Vec<f64>,
}

impl Expansion {
    pub fn new(basis: Arc<LagrangeBasis>, coeffs: Vec<f64>) -> Expansion {
        assert_eq!(coeffs.len(), basis.columns.len());
        Expansion { basis, coeffs }
    }
}

/// Evaluate D^alpha of sum_xi a_xi column_xi at x.
pub fn eval_expansion(e: &Expansion, x: &[f64], alpha: &[usize]) -> Result<f64> {
    let index = e.basis.centers.id_index();
    let mut total = 0.0;
    for (col, &a) in e.basis.columns.iter().zip(e.coeffs.iter()) {
        if a != 0.0 {
            total += a * e.basis.eval_column_indexed(col, x, alpha, &index)?;
        }
    }
    Ok(total)
}

/// Assembled (optionally bordered) symmetric collocation system.
pub struct CollocationSystem {
    pub kernel: Kernel,
    pub points: PointSet,
    pub matrix: Array2<f64>,
    pub n_points: usize,
    pub n_poly: usize,
    pub poly_basis: Option<PolynomialBasis>,
}

/// Build the collocation matrix K_X = (k(xi - zeta)), bordered with the
/// Vandermonde block for surface splines.
pub fn assemble_collocation(kernel: &Kernel, x: &PointSet) -> Result<CollocationSystem> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    if n >= 2 {
        let min = x.min_pairwise_distance().unwrap();
        if !(min > 0.0) {
            return Err(Error::InvalidInput(
                "coincident points in collocation set".into(),
            ));
        }
    }
    let (poly_basis, n_poly) = match kernel.family {
        KernelFamily::Matern => (None, 0),
        KernelFamily::SurfaceSpline => {
            let basis = polynomial_basis(kernel.m as usize, kernel.d as usize);
            if n < basis.len() {
                return Err(Error::NonUnisolvent);
            }
            // unisolvency check rides on the Gram eigensolve
            vandermonde(x, &basis)?;
            let len = basis.len();
            (Some(basis), len)
        }
    };

    let size = n + n_poly;
    let mut matrix = Array2::zeros((size, size));
    // kernel block, symmetric fill
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = x.point(i);
            (i..n)
                .map(|j| eval_kernel_radial(kernel, dist(pi, x.point(j))))
                .collect()
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    if let Some(basis) = &poly_basis {
        for i in 0..n {
            for j in 0..n_poly {
                let v = basis.eval(j, x.point(i));
                matrix[(i, n + j)] = v;
                matrix[(n + j, i)] = v;
            }
        }
    }
    Ok(CollocationSystem {
        kernel: *kernel,
        points: x.clone(),
        matrix,
        n_points: n,
        n_poly,
        poly_basis,
    })
}

/// Factorized collocation system (LAPACK Bunch-Kaufman); solves batches of
/// right-hand sides with one factorization plus a refinement pass.
///
/// Symmetric storage is layout-agnostic, so the row-major matrix is handed
/// to column-major LAPACK as-is.
pub struct FactorizedSystem {
    pub sys: CollocationSystem,
    factors: Vec<f64>,
    ipiv: Vec<i32>,
    pub condition_estimate: f64,
}

const CONDITION_WARN: f64 = 1e12;

impl CollocationSystem {
    pub fn factorize(self) -> Result<FactorizedSystem> {
        self.factorize_opts(true)
    }

    /// Factorize, optionally skipping the condition estimate (footprint
    /// solves are too numerous to estimate each).
    pub fn factorize_opts(self, estimate_condition: bool) -> Result<FactorizedSystem> {
        let n = self.matrix.nrows();
        let mut factors = self
            .matrix
            .as_slice()
            .expect("contiguous matrix")
            .to_vec();
        let mut ipiv = vec![0i32; n];
        let mut info = 0i32;
        unsafe {
            let mut work_query = [0.0f64];
            lapack::dsytrf(
                b'L',
                n as i32,
                &mut factors,
                n as i32,
                &mut ipiv,
                &mut work_query,
                -1,
                &mut info,
            );
            let lwork = work_query[0] as i32;
            let mut work = vec![0.0f64; lwork.max(1) as usize];
            lapack::dsytrf(
                b'L',
                n as i32,
                &mut factors,
                n as i32,
                &mut ipiv,
                &mut work,
                lwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::SingularSystem);
        }
        let mut f = FactorizedSystem {
            sys: self,
            factors,
            ipiv,
            condition_estimate: 0.0,
        };
        if estimate_condition {
            f.condition_estimate = f.estimate_condition(12);
        }
        Ok(f)
    }
}

impl FactorizedSystem {
    pub fn size(&self) -> usize {
        self.sys.matrix.nrows()
    }

    pub fn condition_warning(&self) -> Option<String> {
        (self.condition_estimate > CONDITION_WARN).then(|| {
            format!(
                "condition estimate {:.3e} exceeds {:.0e}",
                self.condition_estimate, CONDITION_WARN
            )
        })
    }

    /// dsytrs on a column-major batch of right-hand sides, in place.
    fn solve_batch_in_place(&self, b: &mut [f64], nrhs: usize) -> Result<()> {
        let n = self.size();
        assert_eq!(b.len(), n * nrhs);
        if nrhs == 0 {
            return Ok(());
        }
        let mut info = 0i32;
        unsafe {
            lapack::dsytrs(
                b'L',
                n as i32,
                nrhs as i32,
                &self.factors,
                n as i32,
                &self.ipiv,
                b,
                n as i32,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::SingularSystem);
        }
        Ok(())
    }

    /// Solve A X = B for a column-major batch with one refinement pass.
    pub fn solve_batch_refined(&self, rhs: &[f64], nrhs: usize) -> Result<Vec<f64>> {
        let n = self.size();
        let mut x = rhs.to_vec();
        self.solve_batch_in_place(&mut x, nrhs)?;
        // residual R = B - A X, computed as a gemm over the batch
        let xm = ndarray::Array2::from_shape_vec((n, nrhs).f(), x.clone())
            .expect("column-major batch");
        let ax = self.sys.matrix.dot(&xm);
        let mut r = vec![0.0; n * nrhs];
        for j in 0..nrhs {
            for i in 0..n {
                r[j * n + i] = rhs[j * n + i] - ax[(i, j)];
            }
        }
        if self.solve_batch_in_place(&mut r, nrhs).is_ok() {
            for (xi, ri) in x.iter_mut().zip(r.iter()) {
                *xi += ri;
            }
        }
        Ok(x)
    }

    /// Solve with one refinement pass.
    pub fn solve_refined(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        let x = self.solve_batch_refined(rhs.as_slice().expect("contiguous rhs"), 1)?;
        Ok(Array1::from_vec(x))
    }

    /// Power iteration for |lambda|_max of A and of A^{-1}; their product
    /// estimates the spectral condition number.
    fn estimate_condition(&self, iters: usize) -> f64 {
        let n = self.size();
        let seed_vec = |salt: f64| {
            Array1::from_iter((0..n).map(|i| 1.0 + salt * ((i * 2654435761 % 97) as f64) / 97.0))
        };
        let normalize = |v: &mut Array1<f64>| {
            let norm = v.dot(v).sqrt();
            if norm > 0.0 {
                *v /= norm;
            }
            norm
        };
        let mut v = seed_vec(0.5);
        let mut lambda_max = 0.0;
        normalize(&mut v);
        for _ in 0..iters {
            let mut w = self.sys.matrix.dot(&v);
            lambda_max = normalize(&mut w);
            v = w;
        }
        let mut v = seed_vec(0.25);
        normalize(&mut v);
        let mut lambda_inv = 0.0;
        for _ in 0..iters {
            let mut w = match self.solve_batch_refined(v.as_slice().unwrap(), 1) {
                Ok(w) => Array1::from_vec(w),
                Err(_) => return f64::INFINITY,
            };
            lambda_inv = normalize(&mut w);
            v = w;
        }
        lambda_max * lambda_inv
    }
}

/// Solve the full Lagrange basis on the extended set: one factorization,
/// one column per interior id.
pub fn solve_full_lagrange(
    kernel: &Kernel,
    xi_tilde: &PointSet,
    interior_ids: &[usize],
) -> Result<LagrangeBasis> {
    let sys = assemble_collocation(kernel, xi_tilde)?;
    let f = sys.factorize()?;
    let mut warnings = Vec::new();
    if let Some(w) = f.condition_warning() {
        warnings.push(w);
    }
    let n = f.sys.n_points;
    let size = f.size();
    let index = f.sys.points.id_index();
    let nrhs = interior_ids.len();
    let mut rhs = vec![0.0; size * nrhs];
    for (j, &xi_id) in interior_ids.iter().enumerate() {
        let row = *index
            .get(&xi_id)
            .ok_or_else(|| Error::InvalidInput(format!("id {xi_id} not in center set")))?;
        rhs[j * size + row] = 1.0;
    }
    let solution = f.solve_batch_refined(&rhs, nrhs)?;
    let mut columns: Vec<BasisColumn> = interior_ids
        .iter()
        .enumerate()
        .map(|(j, &xi_id)| {
            let sol = &solution[j * size..(j + 1) * size];
            let mut coeffs: Vec<(usize, f64)> =
                (0..n).map(|i| (f.sys.points.id(i), sol[i])).collect();
            coeffs.sort_by_key(|&(id, _)| id);
            BasisColumn {
                xi_id,
                coeffs,
                poly: sol[n..].to_vec(),
                tail_mass: None,
            }
        })
        .collect();
    columns.sort_by_key(|c| c.xi_id);
    Ok(LagrangeBasis {
        kind: BasisKind::Full,
        kernel: *kernel,
        centers: xi_tilde.clone(),
        poly_basis: f.sys.poly_basis.clone(),
        columns,
        footprint_cfg: None,
        warnings,
    })
}

/// Solve one local Lagrange column on a footprint: b_xi interpolates the
/// delta data on Upsilon(xi).
pub fn solve_local_lagrange(
    kernel: &Kernel,
    upsilon: &PointSet,
    xi_id: usize,
) -> Result<BasisColumn> {
    let row = upsilon
        .index_of(xi_id)
        .ok_or_else(|| Error::InvalidInput(format!("xi id {xi_id} not in its footprint")))?;
    let sys = assemble_collocation(kernel, upsilon)?;
    let f = sys.factorize_opts(false)?;
    let n = f.sys.n_points;
    let mut rhs = Array1::zeros(f.size());
    rhs[row] = 1.0;
    let sol = f.solve_refined(&rhs)?;
    let mut coeffs: Vec<(usize, f64)> = (0..n).map(|i| (upsilon.id(i), sol[i])).collect();
    coeffs.sort_by_key(|&(id, _)| id);
    let poly: Vec<f64> = (n..f.size()).map(|i| sol[i]).collect();
    Ok(BasisColumn {
        xi_id,
        coeffs,
        poly,
        tail_mass: None,
    })
}

/// Build the whole local basis: one footprint solve per interior id.
pub fn solve_local_basis(
    kernel: &Kernel,
    xi_tilde: &PointSet,
    interior_ids: &[usize],
    cfg: &FootprintConfig,
) -> Result<LagrangeBasis> {
    let poly_basis = match kernel.family {
        KernelFamily::Matern => None,
        KernelFamily::SurfaceSpline => Some(polynomial_basis(
            kernel.m as usize,
            kernel.d as usize,
        )),
    };
    let columns: Result<Vec<BasisColumn>> = interior_ids
        .par_iter()
        .map(|&xi_id| {
            let ups = footprint(xi_id, xi_tilde, cfg)?;
            solve_local_lagrange(kernel, &ups, xi_id)
        })
        .collect();
    let mut columns = columns?;
    columns.sort_by_key(|c| c.xi_id);
    Ok(LagrangeBasis {
        kind: BasisKind::Local,
        kernel: *kernel,
        centers: xi_tilde.clone(),
        poly_basis,
        columns,
        footprint_cfg: Some(*cfg),
        warnings: Vec::new(),
    })
}

/// Truncate a full column to a footprint and, for surface splines, project
/// the restricted coefficients back onto the side-condition subspace:
/// A~ = (I - P) A|_Upsilon with P = Phi (Phi^T Phi)^{-1} Phi^T.
pub fn truncate_and_project(
    full: &LagrangeBasis,
    xi_id: usize,
    upsilon: &PointSet,
) -> Result<BasisColumn> {
    if full.kind != BasisKind::Full {
        return Err(Error::InvalidInput(
            "truncation starts from a full basis".into(),
        ));
    }
    let col = full
        .column(xi_id)
        .ok_or_else(|| Error::InvalidInput(format!("no column for id {xi_id}")))?;
    let keep: std::collections::HashSet<usize> = upsilon.ids().iter().copied().collect();
    let mut restricted: Vec<(usize, f64)> = Vec::with_capacity(upsilon.len());
    let mut tail = 0.0;
    for &(id, a) in &col.coeffs {
        if keep.contains(&id) {
            restricted.push((id, a));
        } else {
            tail += a.abs();
        }
    }
    log::debug!(
        "truncation xi={xi_id}: |Upsilon| = {}, tail mass = {tail:.3e}",
        upsilon.len()
    );

    if full.kernel.family == KernelFamily::SurfaceSpline {
        // order the restriction by upsilon to build Phi rows consistently
        let basis = full
            .poly_basis
            .as_ref()
            .expect("surface-spline basis carries its polynomial space");
        let by_id: HashMap<usize, f64> = restricted.iter().copied().collect();
        let sys = vandermonde(upsilon, basis)?;
        let a_r = Array1::from_iter((0..upsilon.len()).map(|i| by_id[&upsilon.id(i)]));
        let phi_t_a = sys.phi.t().dot(&a_r);
        let gram_f = sys.gram.factorizeh().map_err(|_| Error::NonUnisolvent)?;
        let z = gram_f.solveh(&phi_t_a).map_err(|_| Error::NonUnisolvent)?;
        let projected = &a_r - &sys.phi.dot(&z);
        restricted = (0..upsilon.len())
            .map(|i| (upsilon.id(i), projected[i]))
            .collect();
        restricted.sort_by_key(|&(id, _)| id);
    }

    Ok(BasisColumn {
        xi_id,
        coeffs: restricted,
        poly: col.poly.clone(),
        tail_mass: Some(tail),
    })
}

/// Truncate every column of a full basis.
pub fn truncate_basis(full: &LagrangeBasis, cfg: &FootprintConfig) -> Result<LagrangeBasis> {
    let columns: Result<Vec<BasisColumn>> = full
        .columns
        .par_iter()
        .map(|col| {
            let ups = footprint(col.xi_id, &full.centers, cfg)?;
            truncate_and_project(full, col.xi_id, &ups)
        })
        .collect();
    let mut columns = columns?;
    columns.sort_by_key(|c| c.xi_id);
    Ok(LagrangeBasis {
        kind: BasisKind::Truncated,
        kernel: full.kernel,
        centers: full.centers.clone(),
        poly_basis: full.poly_basis.clone(),
        columns,
        footprint_cfg: Some(*cfg),
        warnings: Vec::new(),
    })
}

/// The native-space inner product of two full Lagrange functions equals the
/// coefficient A_{xi, zeta} read from column zeta at row xi.
pub fn native_inner_product(full: &LagrangeBasis, xi_id: usize, zeta_id: usize) -> Result<f64> {
    if full.kind != BasisKind::Full {
        return Err(Error::InvalidInput("inner product needs the full basis".into()));
    }
    if full.column(xi_id).is_none() {
        return Err(Error::InvalidInput(format!("id {xi_id} is not interior")));
    }
    let col = full
        .column(zeta_id)
        .ok_or_else(|| Error::InvalidInput(format!("id {zeta_id} is not interior")))?;
    col.coeffs
        .iter()
        .find(|(id, _)| *id == xi_id)
        .map(|&(_, a)| a)
        .ok_or_else(|| Error::InvalidInput(format!("row {xi_id} missing from column {zeta_id}")))
}

/// For a surface-spline footprint: the minimal positive eigenvalue theta of
/// Pperp K Pperp and the spectral norm of the local Lagrange coefficient
/// matrix. The pair satisfies theta * coeff_norm = 1.
pub fn theta_vs_coeff_norm(kernel: &Kernel, upsilon: &PointSet) -> Result<(f64, f64)> {
    if kernel.family != KernelFamily::SurfaceSpline {
        return Err(Error::InvalidInput(
            "theta identity applies to surface splines".into(),
        ));
    }
    if upsilon.len() > 500 {
        return Err(Error::InvalidInput(format!(
            "footprint too large for dense eigensolve: {}",
            upsilon.len()
        )));
    }
    let n = upsilon.len();
    let basis = polynomial_basis(kernel.m as usize, kernel.d as usize);
    let sys_v = vandermonde(upsilon, &basis)?;

    // P = Phi G^{-1} Phi^T, Pperp = I - P
    let gram_f = sys_v.gram.factorizeh().map_err(|_| Error::NonUnisolvent)?;
    let mut p = Array2::zeros((n, n));
    for j in 0..n {
        let col = sys_v.phi.row(j).to_owned();
        let z = gram_f.solveh(&col).map_err(|_| Error::NonUnisolvent)?;
        let pcol = sys_v.phi.dot(&z);
        for i in 0..n {
            p[(i, j)] = pcol[i];
        }
    }
    let mut pperp = -p;
    for i in 0..n {
        pperp[(i, i)] += 1.0;
    }

    let coll = assemble_collocation(kernel, upsilon)?;
    let k_block = coll.matrix.slice(ndarray::s![0..n, 0..n]).to_owned();
    let m = pperp.dot(&k_block).dot(&pperp);
    let m = (&m + &m.t()) * 0.5;
    let (eigs, _) = m.eigh(UPLO::Lower)?;
    let lambda_abs_max = eigs.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    let threshold = 1e-10 * lambda_abs_max;
    let theta = eigs
        .iter()
        .cloned()
        .filter(|&e| e > threshold)
        .fold(f64::INFINITY, f64::min);
    if !theta.is_finite() {
        return Err(Error::DegenerateFootprint);
    }

    // local Lagrange coefficient matrix A on Upsilon
    let f = coll.factorize_opts(false)?;
    let size = f.size();
    let mut rhs = vec![0.0; size * n];
    for j in 0..n {
        rhs[j * size + j] = 1.0;
    }
    let sol = f.solve_batch_refined(&rhs, n)?;
    let mut a = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = sol[j * size + i];
        }
    }
    let a_sym = (&a + &a.t()) * 0.5;
    let (a_eigs, _) = a_sym.eigh(UPLO::Lower)?;
    let coeff_norm = a_eigs.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    Ok((theta, coeff_norm))
}

/// Export columns as plain-text sparse triplets with a deterministic
/// ordering: columns by xi id, entries by center id.
pub fn write_basis_text<W: Write>(basis: &LagrangeBasis, mut w: W) -> Result<()> {
    writeln!(
        w,
        "lagrange_basis kind={} family={} m={} d={} columns={} npoly={}",
        basis.kind.as_str(),
        basis.kernel.family.as_str(),
        basis.kernel.m,
        basis.kernel.d,
        basis.columns.len(),
        basis.poly_basis.as_ref().map_or(0, |b| b.len()),
    )?;
    for col in &basis.columns {
        writeln!(w, "column xi={} nnz={}", col.xi_id, col.coeffs.len())?;
        for &(id, a) in &col.coeffs {
            writeln!(w, "{} {} {}", col.xi_id, id, a)?;
        }
        if !col.poly.is_empty() {
            let parts: Vec<String> = col.poly.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "poly {}", parts.join(" "))?;
        }
    }
    Ok(())
}
