//! Acceptance suite: one test per criterion, printing one pass/fail line
//! each. Tolerances are pinned in the asserts.

use lagmesh::experiments::{
    run_bernstein_study, run_decay_study, run_stability_study, run_trace_study,
    run_truncation_study, CellRecord, ExperimentReport, KernelSpec, StudyConfig, CSV_HEADER,
};
use lagmesh::geometry::{
    extend_grid, generate_quasi_uniform, point_set_metrics, restrict_to_tilde, Domain,
    FootprintConfig, PointSet,
};
use lagmesh::interpolation::{
    assemble_collocation, eval_expansion, solve_full_lagrange, theta_vs_coeff_norm,
    truncate_and_project, Expansion,
};
use lagmesh::kernels::{
    eval_kernel_derivative, polynomial_basis, vandermonde, Kernel, KernelFamily,
};
use lagmesh::norms::{interior_quadrature, slobodeckij_seminorm, FnField};
use ndarray::Array1;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn pass(criterion: &str, detail: String) {
    println!("[{criterion}] PASS: {detail}");
}

// -- shared fixtures --------------------------------------------------------

fn stability_report() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = StudyConfig {
            domain: "square".into(),
            kernel: KernelSpec {
                family: "matern".into(),
                m: 2,
            },
            h_levels: vec![0.14, 0.07],
            p_values: vec![1.0, 2.0, f64::INFINITY],
            nikolskii_pairs: vec![(2.0, f64::INFINITY)],
            n_random_coeff: 100,
            seed: 7,
            quad_resolution_fraction: 0.1,
            local_k: 6.0,
            ..Default::default()
        };
        run_stability_study(&cfg).expect("stability study")
    })
}

fn cells_of<'a>(report: &'a ExperimentReport, kind: &str, p: f64) -> Vec<&'a CellRecord> {
    report
        .cells
        .iter()
        .filter(|c| c.kind == kind && c.p == Some(p))
        .collect()
}

fn factor(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

// -- criterion 1: exactness oracles -----------------------------------------

#[test]
fn criterion_01_exactness_oracles() {
    // hat function chi_0(x) = 1 - x on [0, 1] to 1e-10
    let k = Kernel::surface_spline(1, 1);
    let x = PointSet::new(1, vec![vec![0.0], vec![1.0]]);
    let basis = solve_full_lagrange(&k, &x, &[0, 1]).unwrap();
    let col = basis.column(0).unwrap();
    let mut hat_err: f64 = 0.0;
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let v = basis.eval_column(col, &[t], &[0]).unwrap();
        hat_err = hat_err.max((v - (1.0 - t)).abs());
    }
    assert!(hat_err <= 1e-10, "hat solve error {hat_err:.3e} > 1e-10");

    // projector example: A restricted (0.7, 0.4) -> (0.15, -0.15)
    let centers = PointSet::new(1, vec![vec![0.0], vec![1.0], vec![5.0]]);
    let synthetic = lagmesh::interpolation::LagrangeBasis {
        kind: lagmesh::interpolation::BasisKind::Full,
        kernel: k,
        centers,
        poly_basis: Some(polynomial_basis(1, 1)),
        columns: vec![lagmesh::interpolation::BasisColumn {
            xi_id: 0,
            coeffs: vec![(0, 0.7), (1, 0.4), (2, -1.1)],
            poly: vec![0.0],
            tail_mass: None,
        }],
        footprint_cfg: None,
        warnings: vec![],
    };
    let ups = PointSet::new(1, vec![vec![0.0], vec![1.0]]);
    let projected = truncate_and_project(&synthetic, 0, &ups).unwrap();
    let proj_err = (projected.coeffs[0].1 - 0.15)
        .abs()
        .max((projected.coeffs[1].1 + 0.15).abs());
    assert!(proj_err <= 1e-12, "projector error {proj_err:.3e}");

    // Slobodeckij analytic oracle: f(x) = x, p = 2, delta = 1/2 on (0,1).
    // The integrand |x-y|^2 / |x-y|^{1 + 2*(1/2)} is identically 1, so the
    // squared seminorm is exactly 1 (the double integral int int 1 dx dy).
    let di = Domain::interval(0.0, 1.0);
    let qi = interior_quadrature(&di, 0.01).unwrap();
    let linear = FnField {
        dim: 1,
        f: |x: &[f64], alpha: &[usize]| match alpha[0] {
            0 => x[0],
            1 => 1.0,
            _ => 0.0,
        },
    };
    let slobo = slobodeckij_seminorm(&linear, &qi, 0, 0.5, 2.0).unwrap();
    assert!(
        (slobo - 1.0).abs() <= 0.02,
        "Slobodeckij {slobo} differs from the analytic value 1 by more than 2%"
    );

    // Gram example: X = {-1, 0, 1}, basis {1, x}: ||G^{-1}|| = 1/2 to 1e-12
    let pts = PointSet::new(1, vec![vec![-1.0], vec![0.0], vec![1.0]]);
    let sys = vandermonde(&pts, &polynomial_basis(2, 1)).unwrap();
    assert!(
        (sys.gram_inverse_norm - 0.5).abs() <= 1e-12,
        "Gram inverse norm {}",
        sys.gram_inverse_norm
    );

    pass(
        "criterion 1",
        format!("hat {hat_err:.1e}, projector {proj_err:.1e}, slobodeckij {slobo:.5}, gram {:.15}", sys.gram_inverse_norm),
    );
}

// -- criterion 2: Lagrange/side-condition invariants over a battery ---------

struct BatteryCase {
    domain: &'static str,
    family: KernelFamily,
    m: u32,
    h: f64,
    seed: u64,
}

fn battery() -> Vec<BatteryCase> {
    let mut cases = Vec::new();
    let mut seed = 100;
    for m in [1u32, 2, 3] {
        for h in [0.1, 0.06] {
            for family in [KernelFamily::Matern, KernelFamily::SurfaceSpline] {
                cases.push(BatteryCase {
                    domain: "interval",
                    family,
                    m,
                    h,
                    seed,
                });
                seed += 1;
            }
        }
    }
    for (domain, m, h) in [
        ("square", 2u32, 0.2),
        ("square", 3, 0.25),
        ("disk", 2, 0.3),
        ("disk", 3, 0.35),
    ] {
        for family in [KernelFamily::Matern, KernelFamily::SurfaceSpline] {
            cases.push(BatteryCase {
                domain,
                family,
                m,
                h,
                seed,
            });
            seed += 1;
        }
    }
    cases
}

#[test]
fn criterion_02_lagrange_invariants_battery() {
    let cases = battery();
    assert!(cases.len() >= 20, "battery has {} cases", cases.len());
    let mut max_delta: f64 = 0.0;
    let mut max_side: f64 = 0.0;
    let mut max_sym: f64 = 0.0;
    let mut max_repro: f64 = 0.0;

    for case in &cases {
        let domain = Domain::from_name(case.domain).unwrap();
        let d = domain.dim() as u32;
        let kernel = match case.family {
            KernelFamily::Matern => Kernel::matern(case.m, d),
            KernelFamily::SurfaceSpline => Kernel::surface_spline(case.m, d),
        };
        if 2 * case.m <= d {
            continue;
        }
        let xi = generate_quasi_uniform(&domain, case.h, case.seed).unwrap();
        let metrics = point_set_metrics(&xi, &domain, case.h / 10.0).unwrap();
        let ext = extend_grid(&xi, &domain, case.h).unwrap();
        let tilde = restrict_to_tilde(&ext, &domain);
        let full = solve_full_lagrange(&kernel, &tilde, xi.ids()).unwrap();
        let index = tilde.id_index();
        let zero_alpha = vec![0usize; d as usize];

        // delta property on a sample of columns, recomputed from the kernel
        for col in full.columns.iter().step_by((full.columns.len() / 5).max(1)) {
            for (zeta_id, zeta) in tilde.iter() {
                let v = full
                    .eval_column_indexed(col, zeta, &zero_alpha, &index)
                    .unwrap();
                let expect = if zeta_id == col.xi_id { 1.0 } else { 0.0 };
                max_delta = max_delta.max((v - expect).abs());
            }
        }

        // full-basis coefficient symmetry over interior pairs
        let ids = full.interior_ids();
        for &a in ids.iter().take(8) {
            for &b in ids.iter().take(8) {
                let ab = lagmesh::interpolation::native_inner_product(&full, a, b).unwrap();
                let ba = lagmesh::interpolation::native_inner_product(&full, b, a).unwrap();
                max_sym = max_sym.max((ab - ba).abs());
            }
        }

        if case.family == KernelFamily::SurfaceSpline {
            let pb = polynomial_basis(case.m as usize, d as usize);
            // truncated side conditions at a small footprint
            let cfg = FootprintConfig::new(2.0, metrics.fill_distance.min(0.9));
            for &xi_id in ids.iter().take(2) {
                let ups = lagmesh::geometry::footprint(xi_id, &tilde, &cfg).unwrap();
                if ups.len() < pb.len() {
                    continue;
                }
                let trunc = match truncate_and_project(&full, xi_id, &ups) {
                    Ok(t) => t,
                    Err(_) => continue, // non-unisolvent tiny footprint
                };
                for j in 0..pb.len() {
                    let acc: f64 = trunc
                        .coeffs
                        .iter()
                        .map(|&(id, a)| a * pb.eval(j, tilde.point(index[&id])))
                        .sum();
                    max_side = max_side.max(acc.abs());
                }
            }

            // polynomial reproduction: interpolate data from p in Pi_{m-1}
            let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
            let coeffs: Vec<f64> = (0..pb.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p_at = |x: &[f64]| -> f64 {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * pb.eval(j, x))
                    .sum()
            };
            let sys = assemble_collocation(&kernel, &tilde).unwrap();
            let size = sys.matrix.nrows();
            let n = tilde.len();
            let f = sys.factorize().unwrap();
            let mut rhs = Array1::zeros(size);
            for i in 0..n {
                rhs[i] = p_at(tilde.point(i));
            }
            let sol = f.solve_refined(&rhs).unwrap();
            let bbox = domain.bbox();
            let mut checked = 0;
            while checked < 100 {
                let x: Vec<f64> = (0..d as usize)
                    .map(|k| rng.gen_range(bbox.min[k]..bbox.max[k]))
                    .collect();
                if !domain.is_inside(&x) {
                    continue;
                }
                checked += 1;
                let mut s = 0.0;
                for i in 0..n {
                    let diff: Vec<f64> = x
                        .iter()
                        .zip(tilde.point(i).iter())
                        .map(|(a, b)| a - b)
                        .collect();
                    s += sol[i] * eval_kernel_derivative(&kernel, &zero_alpha, &diff).unwrap();
                }
                for j in 0..pb.len() {
                    s += sol[n + j] * pb.eval(j, &x);
                }
                max_repro = max_repro.max((s - p_at(&x)).abs());
            }
        }
    }

    assert!(max_delta <= 1e-8, "delta residual {max_delta:.3e} > 1e-8");
    assert!(max_side <= 1e-10, "side conditions {max_side:.3e} > 1e-10");
    assert!(max_sym <= 1e-8, "symmetry {max_sym:.3e} > 1e-8");
    assert!(max_repro <= 1e-8, "reproduction {max_repro:.3e} > 1e-8");
    pass(
        "criterion 2",
        format!(
            "{} cases: delta {max_delta:.1e}, side {max_side:.1e}, symmetry {max_sym:.1e}, reproduction {max_repro:.1e}",
            cases.len()
        ),
    );
}

// -- criterion 3: decay rates ------------------------------------------------

#[test]
fn criterion_03_decay() {
    let cfg = StudyConfig {
        domain: "square".into(),
        kernel: KernelSpec {
            family: "matern".into(),
            m: 2,
        },
        h_levels: vec![0.1, 0.05],
        seed: 11,
        quad_resolution_fraction: 0.1,
        ..Default::default()
    };
    let report = run_decay_study(&cfg).unwrap();
    for kind in ["lagrange", "coeff"] {
        let cells: Vec<&CellRecord> = report.cells.iter().filter(|c| c.kind == kind).collect();
        assert_eq!(cells.len(), 2, "{kind}: expected two levels");
        for c in &cells {
            assert!(c.warn.is_empty(), "{kind} cell marked: {}", c.warn);
            assert!(c.slope.unwrap() < 0.0, "{kind} slope {:?}", c.slope);
            assert!(
                c.resid.unwrap() >= 0.9,
                "{kind} fit R^2 {:?} < 0.9",
                c.resid
            );
        }
        let (s1, s2) = (cells[0].slope.unwrap(), cells[1].slope.unwrap());
        assert!(
            (s1 / s2 - 1.0).abs() <= 0.3,
            "{kind}: slopes {s1:.3} vs {s2:.3} differ by more than 30%"
        );
    }
    let slopes: Vec<f64> = report.cells.iter().filter_map(|c| c.slope).collect();
    pass("criterion 3", format!("slopes {slopes:.2?} with R^2 >= 0.9"));
}

// -- criteria 4 and 5: stability and Nikolskii -------------------------------

#[test]
fn criterion_04_stability_spread() {
    let report = stability_report();
    for kind in ["full", "local"] {
        for p in [1.0, 2.0, f64::INFINITY] {
            let cells = cells_of(report, kind, p);
            assert_eq!(cells.len(), 2, "{kind} p={p}: need both levels");
            for c in &cells {
                let lo = c.ratio_min.unwrap();
                let hi = c.ratio_max.unwrap();
                assert!(
                    lo > 0.0 && hi.is_finite() && hi / lo < f64::INFINITY,
                    "{kind} p={p}: spread [{lo}, {hi}]"
                );
            }
            let lo_move = factor(cells[0].ratio_min.unwrap(), cells[1].ratio_min.unwrap());
            let hi_move = factor(cells[0].ratio_max.unwrap(), cells[1].ratio_max.unwrap());
            assert!(
                lo_move <= 2.0 && hi_move <= 2.0,
                "{kind} p={p}: endpoints move {lo_move:.2}x / {hi_move:.2}x > 2x"
            );
        }
    }
    pass(
        "criterion 4",
        "riesz spread endpoints move <= 2x across h halving for full and local bases, p in {1, 2, inf}".into(),
    );
}

#[test]
fn criterion_05_nikolskii() {
    let report = stability_report();
    for kind in ["nikolskii_full", "nikolskii_local"] {
        let cells: Vec<&CellRecord> = report
            .cells
            .iter()
            .filter(|c| c.kind == kind && c.p == Some(f64::INFINITY) && c.sigma == Some(2.0))
            .collect();
        assert_eq!(cells.len(), 2, "{kind}: need both levels");
        let movement = factor(cells[0].ratio_max.unwrap(), cells[1].ratio_max.unwrap());
        assert!(
            movement <= 2.0,
            "{kind}: max ratio moves {movement:.2}x > 2x across halving"
        );
    }
    pass(
        "criterion 5",
        "(r, p) = (2, inf) normalized ratio moves <= 2x across h halving".into(),
    );
}

// -- criterion 6: Bernstein ---------------------------------------------------

#[test]
fn criterion_06_bernstein() {
    let cfg = StudyConfig {
        domain: "square".into(),
        kernel: KernelSpec {
            family: "matern".into(),
            m: 2,
        },
        h_levels: vec![0.14, 0.07],
        p_values: vec![2.0, f64::INFINITY],
        sigma_values: vec![1.0, 1.5],
        local_k: 6.0,
        basis_kinds: vec!["local".into()],
        n_random_coeff: 30,
        seed: 5,
        quad_resolution_fraction: 0.1,
        ..Default::default()
    };
    let report = run_bernstein_study(&cfg).unwrap();
    for (p, sigma) in [(2.0, 1.0), (f64::INFINITY, 1.0), (2.0, 1.5)] {
        let cells: Vec<&CellRecord> = report
            .cells
            .iter()
            .filter(|c| {
                c.kind == "local" && c.p == Some(p) && c.sigma == Some(sigma) && c.warn.is_empty()
            })
            .collect();
        assert_eq!(cells.len(), 2, "(p={p}, sigma={sigma}): need both levels");
        let (r1, r2) = (cells[0].ratio_max.unwrap(), cells[1].ratio_max.unwrap());
        assert!(r1 > 0.0 && r2 > 0.0);
        assert!(
            (r2 / r1 - 1.0).abs() <= 0.35,
            "(p={p}, sigma={sigma}): normalized ratio {r1:.3} -> {r2:.3} moves more than 35%"
        );
    }
    pass(
        "criterion 6",
        "h^sigma ||s||_W / ||s||_Lp stable within 35% across halving for (2,1), (inf,1), (2,1.5), local K=6".into(),
    );
}

// -- criterion 7: truncation ---------------------------------------------------

#[test]
fn criterion_07_truncation() {
    for family in ["matern", "surface_spline"] {
        let cfg = StudyConfig {
            domain: "square".into(),
            kernel: KernelSpec {
                family: family.into(),
                m: 2,
            },
            h_levels: vec![0.05],
            k_values: vec![2.0, 4.0, 6.0, 8.0],
            seed: 13,
            quad_resolution_fraction: 0.1,
            ..Default::default()
        };
        let report = run_truncation_study(&cfg).unwrap();
        for kind in ["tail", "local_linf"] {
            let series: Vec<(f64, f64)> = report
                .cells
                .iter()
                .filter(|c| c.kind == kind)
                .map(|c| (c.k.unwrap(), c.ratio_max.unwrap()))
                .collect();
            assert_eq!(series.len(), 4, "{family}/{kind}: need all four K values");
            for w in series.windows(2) {
                // nonincreasing up to solver-noise floor
                assert!(
                    w[1].1 <= w[0].1 * (1.0 + 1e-6) + 1e-11,
                    "{family}/{kind}: value rises from K={} ({:.3e}) to K={} ({:.3e})",
                    w[0].0,
                    w[0].1,
                    w[1].0,
                    w[1].1
                );
            }
            let drop = series[0].1 / series[3].1.max(1e-300);
            assert!(
                drop >= 10.0,
                "{family}/{kind}: drop K=2 -> K=8 is {drop:.2}x < 10x"
            );
        }
    }
    pass(
        "criterion 7",
        "tail mass and local sup error nonincreasing in K with >= 10x drop from K=2 to K=8, both families".into(),
    );
}

// -- criterion 8: theta identity ------------------------------------------------

#[test]
fn criterion_08_theta_identity() {
    let kernel = Kernel::surface_spline(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 20 {
        let n = rng.gen_range(10..=180);
        let radius: f64 = rng.gen_range(0.1..0.4);
        let mut pts = Vec::new();
        for _ in 0..n {
            let r = radius * rng.gen_range(0.0..1.0_f64).sqrt();
            let t = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
            pts.push(vec![r * t.cos(), r * t.sin()]);
        }
        let set = PointSet::new(2, pts);
        if set.min_pairwise_distance().unwrap_or(0.0) < 1e-3 * radius {
            continue;
        }
        match theta_vs_coeff_norm(&kernel, &set) {
            Ok((theta, norm)) => {
                worst = worst.max((theta * norm - 1.0).abs());
                count += 1;
            }
            Err(_) => continue,
        }
    }
    assert!(
        worst <= 1e-6,
        "theta * coeff_norm deviates from 1 by {worst:.3e}"
    );
    pass(
        "criterion 8",
        format!("theta * ||A|| = 1 within {worst:.2e} on 20 random footprints"),
    );
}

// -- criterion 9: Gram scaling ----------------------------------------------------

#[test]
fn criterion_09_gram_scaling() {
    let pattern: Vec<Vec<f64>> = vec![
        vec![0.1, 0.2],
        vec![-0.4, 0.5],
        vec![0.7, -0.3],
        vec![-0.6, -0.6],
        vec![0.9, 0.1],
        vec![0.0, -0.9],
        vec![0.3, 0.8],
        vec![-0.2, 0.0],
        vec![0.5, 0.5],
        vec![-0.8, 0.3],
        vec![0.2, -0.55],
        vec![-0.15, 0.85],
    ];
    let mut spreads = Vec::new();
    for m in [2usize, 3] {
        let basis = polynomial_basis(m, 2);
        let mut normalized = Vec::new();
        for k in 0..4 {
            let r = 0.5f64.powi(k);
            let pts: Vec<Vec<f64>> = pattern.iter().map(|p| vec![p[0] * r, p[1] * r]).collect();
            let sys = vandermonde(&PointSet::new(2, pts), &basis).unwrap();
            normalized.push(sys.gram_inverse_norm * r.powi(2 * (m as i32 - 1)));
        }
        let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            hi / lo <= 2.0,
            "m = {m}: ||G^-1|| r^(2m-2) varies {:.2}x > 2x over r in 1..1/8",
            hi / lo
        );
        spreads.push(hi / lo);
    }
    pass(
        "criterion 9",
        format!("normalized Gram inverse norm varies {spreads:.2?} <= 2x for m = 2, 3"),
    );
}

// -- criterion 10: trace -----------------------------------------------------------

#[test]
fn criterion_10_trace() {
    let cfg = StudyConfig {
        domain: "disk".into(),
        kernel: KernelSpec {
            family: "matern".into(),
            m: 2,
        },
        h_levels: vec![0.2, 0.1],
        p_values: vec![2.0, f64::INFINITY],
        local_k: 4.0,
        n_random_coeff: 50,
        seed: 17,
        quad_resolution_fraction: 0.1,
        ..Default::default()
    };
    let report = run_trace_study(&cfg).unwrap();
    for kind in ["full", "local"] {
        for p in [2.0, f64::INFINITY] {
            let cells = cells_of(&report, kind, p);
            assert_eq!(cells.len(), 2, "{kind} p={p}: need both levels");
            let movement = factor(
                cells[0].ratio_max.unwrap(),
                cells[1].ratio_max.unwrap(),
            );
            assert!(
                movement <= 1.35,
                "{kind} p={p}: trace ratio moves {movement:.3}x > 1.35x across halving"
            );
        }
    }
    pass(
        "criterion 10",
        "h^(1/p) boundary/interior ratio stable within 35% across halving on the disk, p in {2, inf}".into(),
    );
}

// -- criterion 11: scaling identity --------------------------------------------------

#[test]
fn criterion_11_scaling_identity() {
    // |u|_{W_p^s(O_R)} = R^{d/p - s} |U|_{W_p^s(O)} for u(x) = U(x/R)
    let (p, s) = (2.0, 1.5);
    let (k, delta) = (1usize, 0.5);
    let polys: [fn(&[f64], &[usize]) -> f64; 2] = [
        |x, alpha| match (alpha[0], alpha[1]) {
            (0, 0) => x[0] * x[0] * x[1] + x[1] * x[1],
            (1, 0) => 2.0 * x[0] * x[1],
            (0, 1) => x[0] * x[0] + 2.0 * x[1],
            _ => 0.0,
        },
        |x, alpha| match (alpha[0], alpha[1]) {
            (0, 0) => x[0] * x[0] - x[0] * x[1],
            (1, 0) => 2.0 * x[0] - x[1],
            (0, 1) => -x[0],
            _ => 0.0,
        },
    ];
    let mut worst: f64 = 0.0;
    for (pi, poly) in polys.iter().enumerate() {
        let base = FnField { dim: 2, f: *poly };
        let q0 = interior_quadrature(&Domain::unit_square(), 0.02).unwrap();
        let reference = slobodeckij_seminorm(&base, &q0, k, delta, p).unwrap();
        for r in [2.0_f64, 4.0] {
            let scaled = FnField {
                dim: 2,
                f: move |x: &[f64], alpha: &[usize]| {
                    let inner = [x[0] / r, x[1] / r];
                    let order: usize = alpha.iter().sum();
                    poly(&inner, alpha) / r.powi(order as i32)
                },
            };
            let square_r = Domain::custom(
                "square_r",
                std::sync::Arc::new(move |x: &[f64]| {
                    x[0] >= 0.0 && x[0] <= r && x[1] >= 0.0 && x[1] <= r
                }),
                lagmesh::geometry::Bbox::new(vec![0.0, 0.0], vec![r, r]),
                lagmesh::geometry::Boundary::None,
                Some(r * 2.0_f64.sqrt()),
            );
            let qr = interior_quadrature(&square_r, 0.02 * r).unwrap();
            let got = slobodeckij_seminorm(&scaled, &qr, k, delta, p).unwrap();
            let expect = r.powf(2.0 / p - s) * reference;
            let rel = (got - expect).abs() / expect;
            assert!(
                rel <= 0.02,
                "poly {pi}, R = {r}: got {got}, expected {expect} (rel {rel:.4})"
            );
            worst = worst.max(rel);
        }
    }
    pass(
        "criterion 11",
        format!("fractional scaling identity holds within {worst:.4} <= 2% at R = 2, 4"),
    );
}

// -- criterion 12: infrastructure ------------------------------------------------------

#[test]
fn criterion_12_infrastructure() {
    // deterministic byte-identical reports per seed
    let cfg = StudyConfig {
        domain: "interval".into(),
        kernel: KernelSpec {
            family: "surface_spline".into(),
            m: 1,
        },
        h_levels: vec![0.2],
        p_values: vec![2.0],
        nikolskii_pairs: vec![(2.0, f64::INFINITY)],
        n_random_coeff: 10,
        seed: 23,
        quad_resolution_fraction: 0.1,
        local_k: 2.0,
        ..Default::default()
    };
    let a = run_stability_study(&cfg).unwrap();
    let b = run_stability_study(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv(), "reports differ across runs");
    assert_eq!(a.to_text(), b.to_text());

    // golden CSV header
    assert_eq!(
        CSV_HEADER,
        "study,h,q,rho,p,sigma,K,kind,ratio_min,ratio_max,slope,resid,warn"
    );
    assert!(a.to_csv().starts_with(CSV_HEADER));

    // config round-trip through serialize/parse
    let text = serde_json::to_string(&cfg).unwrap();
    let back: StudyConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, back);

    pass(
        "criterion 12",
        "byte-identical reports, golden CSV header, config round-trip".into(),
    );
}

// -- supporting check: expansion evaluation consistency ----------------------

#[test]
fn expansion_matches_study_fast_path() {
    // the matrix fast path used by the studies agrees with direct expansion
    // evaluation
    let domain = Domain::unit_square();
    let kernel = Kernel::matern(2, 2);
    let xi = generate_quasi_uniform(&domain, 0.25, 31).unwrap();
    let ext = extend_grid(&xi, &domain, 0.25).unwrap();
    let tilde = restrict_to_tilde(&ext, &domain);
    let full = std::sync::Arc::new(solve_full_lagrange(&kernel, &tilde, xi.ids()).unwrap());
    let quad = interior_quadrature(&domain, 0.05).unwrap();
    let values =
        lagmesh::experiments::basis_value_matrix(&full, quad.nodes_flat(), 2, &[0, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..full.columns.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let e = Expansion::new(full.clone(), a.clone());
    let fast = values.dot(&Array1::from_vec(a));
    for i in (0..quad.len()).step_by(37) {
        let direct = eval_expansion(&e, quad.node(i), &[0, 0]).unwrap();
        assert!(
            (direct - fast[i]).abs() <= 1e-9 * direct.abs().max(1.0),
            "node {i}: {direct} vs {}",
            fast[i]
        );
    }
}
