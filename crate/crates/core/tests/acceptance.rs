//! Acceptance suite. Every test prints one `criterion N` line with its verdict
//! and the measured values before asserting.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use sphere_fem::analysis::{local_singular_energy, SingularIC, SingularPlacement, SmoothTestProblem};
use sphere_fem::assembly::{assemble_mass, assemble_stiffness, NodalField};
use sphere_fem::config::{ExperimentConfig, GridSpec};
use sphere_fem::experiments::{
    run_barrier_scan, run_convergence_space, run_convergence_time, run_dynamics, simulation_config, smooth_level_mesh,
    SpaceReport, SpaceRow,
};
use sphere_fem::linsolve::{solve_saddle, SaddleMethod, SaddleOptions, SaddleSystem, VectorBlock};
use sphere_fem::mesh::{build_structured_2d, build_structured_3d, BoxDomain, Mesh};
use sphere_fem::schemes::{prepare_initial, run_simulation, Operators, Scheme, Trajectory};
use sphere_fem::sparse::SparseOperator;

fn report(n: u32, name: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {verdict} {details}");
}

fn rel_close(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn smooth_run(level: u32, scheme: Scheme, k: f64, t_final: f64) -> (Trajectory, Duration) {
    let mut cfg = ExperimentConfig {
        scheme,
        ..ExperimentConfig::default()
    };
    cfg.fp_tol = 1e-13;
    let problem = SmoothTestProblem::default();
    let mesh = smooth_level_mesh(&cfg, level).unwrap();
    let start = Instant::now();
    let ops = Operators::new(&mesh).unwrap();
    let sim = simulation_config(&cfg, problem.gamma, k, t_final).unwrap();
    let u0 = prepare_initial(&mesh, 2, |x, o| problem.u(x, 0.0, o)).unwrap();
    let tr = run_simulation(&ops, u0, &sim, |_| {}).unwrap();
    (tr, start.elapsed())
}

#[test]
fn criterion_01_energy_identity() {
    let mut pass = true;
    let mut details = String::new();
    for scheme in [Scheme::Euler, Scheme::CrankNicolson] {
        let (tr, elapsed) = smooth_run(4, scheme, 0.05, 1.0);
        assert_eq!(tr.steps.len(), 20);
        let ok = tr.global_residual <= 1e-9 && elapsed < Duration::from_secs(5);
        pass &= ok;
        let step_max = tr.steps.iter().map(|r| r.energy_residual).fold(0.0, f64::max);
        details += &format!(
            "[{scheme:?}: global residual {:.3e}, max step residual {step_max:.3e}, {:.2?}] ",
            tr.global_residual, elapsed
        );
    }
    report(1, "discrete energy identity", pass, &details);
    assert!(pass);
}

/// Smooth random unit field built from a few low Fourier modes of the angles.
fn random_unit_field(mesh: &Mesh, coeffs: &[f64]) -> NodalField {
    let components = mesh.dim();
    prepare_initial(mesh, components, |x, out| {
        let mode = |c: &[f64]| {
            c[0] + c[1] * (PI * x[0]).sin() + c[2] * (PI * x[1]).cos() + c[3] * (PI * (x[0] + x[x.len() - 1])).sin()
        };
        let theta = mode(&coeffs[0..4]);
        if components == 2 {
            out[0] = theta.cos();
            out[1] = theta.sin();
        } else {
            let phi = 0.5 * PI + mode(&coeffs[4..8]);
            out[0] = phi.sin() * theta.cos();
            out[1] = phi.sin() * theta.sin();
            out[2] = phi.cos();
        }
    })
    .unwrap()
}

#[test]
fn criterion_02_nodal_constraint() {
    let start = Instant::now();
    let meshes = [
        build_structured_2d(6, 5, &BoxDomain::unit(2)).unwrap(),
        build_structured_3d(3, 3, 2, &BoxDomain::unit(3)).unwrap(),
    ];
    let ops: Vec<Operators> = meshes.iter().map(|m| Operators::new(m).unwrap()).collect();
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 12,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let worst = std::cell::Cell::new((f64::INFINITY, 0.0f64));
    let strategy = (0usize..2, prop::collection::vec(-1.0f64..1.0, 8), 1e-3f64..2e-2);
    let result = runner.run(&strategy, |(which, coeffs, k)| {
        let mesh = &meshes[which];
        let u0 = random_unit_field(mesh, &coeffs);
        let cfg = ExperimentConfig {
            renormalize: false,
            fp_tol: 1e-13,
            ..ExperimentConfig::default()
        };
        for scheme in [Scheme::Euler, Scheme::CrankNicolson] {
            let mut sim = simulation_config(&cfg, 1.0, k, 100.0 * k).unwrap();
            sim.scheme = scheme;
            prop_assert_eq!(sim.params.n_steps, 100);
            let mut prev = u0.nodal_norms();
            let mut monotone = true;
            let tr = run_simulation(&ops[which], u0.clone(), &sim, |s| {
                let norms = s.u.nodal_norms();
                // Nodes that do not move may lose an ulp in the norm evaluation.
                monotone &= norms
                    .iter()
                    .zip(&prev)
                    .all(|(n, p)| *n >= *p * (1.0 - 4.0 * f64::EPSILON));
                prev = norms;
            })
            .unwrap();
            let (mut min_seen, mut dev_seen) = worst.get();
            match scheme {
                Scheme::Euler => {
                    let min = tr.reports().map(|r| r.min_norm).fold(f64::INFINITY, f64::min);
                    min_seen = min_seen.min(min);
                    prop_assert!(min >= 1.0 - 1e-10, "Euler min norm {min}");
                    prop_assert!(monotone, "Euler nodal norms decreased");
                }
                Scheme::CrankNicolson => {
                    let dev = tr
                        .reports()
                        .map(|r| (r.max_norm - 1.0).abs().max((r.min_norm - 1.0).abs()))
                        .fold(0.0, f64::max);
                    dev_seen = dev_seen.max(dev);
                    prop_assert!(dev <= 1e-10, "CN norm deviation {dev}");
                }
            }
            worst.set((min_seen, dev_seen));
        }
        Ok(())
    });
    let elapsed = start.elapsed();
    let pass = result.is_ok() && elapsed < Duration::from_secs(10);
    let (min, dev) = worst.get();
    report(
        2,
        "nodal unit-sphere constraint",
        pass,
        &format!("Euler min norm {min:.15}, CN max deviation {dev:.3e}, {elapsed:.2?}, {result:?}"),
    );
    assert!(pass);
}

fn space_report() -> &'static (SpaceReport, Duration) {
    static REPORT: OnceLock<(SpaceReport, Duration)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let mut cfg = ExperimentConfig::default();
        cfg.set("levels", "1..6").unwrap();
        cfg.k = Some(0.1 / 16.0);
        cfg.solver = SaddleMethod::Uzawa;
        cfg.quad_order = 6;
        let start = Instant::now();
        let rep = run_convergence_space(&cfg).unwrap();
        (rep, start.elapsed())
    })
}

fn in_range(r: Option<f64>, lo: f64, hi: f64) -> bool {
    r.is_some_and(|r| (lo..=hi).contains(&r))
}

fn fmt_rates(rates: &[Option<f64>]) -> String {
    rates
        .iter()
        .map(|r| r.map_or("-".into(), |r| format!("{r:.3}")))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_03_space_convergence() {
    let (rep, elapsed) = space_report();
    let n = rep.rows.len();
    let mut pass = *elapsed <= Duration::from_secs(600);
    let mut details = String::new();
    type Column = fn(&SpaceRow) -> f64;
    let columns: [(&str, Column, f64, f64); 4] = [
        ("L1", |r| r.u.l1, 1.85, 2.15),
        ("L2", |r| r.u.l2, 1.85, 2.15),
        ("Linf", |r| r.u.linf, 1.85, 2.15),
        ("H1", |r| r.u.h1, 0.9, 1.1),
    ];
    for (name, col, lo, hi) in columns {
        let rates = rep.rates(col);
        pass &= rates[n - 2..].iter().all(|&r| in_range(r, lo, hi));
        details += &format!("[{name} rates {}] ", fmt_rates(&rates));
    }
    let l2 = rep.rows[n - 1].u.l2;
    pass &= rep.rows[n - 1].level == 6 && rel_close(l2, 4.7e-3, 0.10);
    details += &format!("L2(i=6) {l2:.4e}, {elapsed:.1?}");
    report(3, "space convergence", pass, &details);
    assert!(pass);
}

#[test]
fn criterion_04_multiplier_dual_norm() {
    let (rep, _) = space_report();
    let rows = &rep.rows;
    let at = |level: u32| rows.iter().position(|r| r.level == level).unwrap();
    let h1_rates = rep.rates(|r| r.q_dual_h1);
    let h10_rates = rep.rates(|r| r.q_dual_h10);
    let fine = at(4)..=at(6);
    let rates_ok = h1_rates[fine.clone()].iter().all(|&r| in_range(r, 1.7, 2.2))
        && h10_rates[fine].iter().all(|&r| in_range(r, 1.7, 2.2));
    let q5 = rows[at(5)].q_dual_h1;
    let magnitude_ok = rel_close(q5, 1.2166, 0.20);
    // Bounded: no refinement step more than doubles the error, and the
    // finest error does not exceed the coarsest.
    let bounded = |col: fn(&SpaceRow) -> f64| {
        rows.windows(2).all(|w| col(&w[1]) <= 2.0 * col(&w[0])) && col(&rows[rows.len() - 1]) <= col(&rows[0])
    };
    let l2_ok = bounded(|r| r.q.l2);
    let linf_ok = rows.windows(2).all(|w| w[1].q.linf <= 2.0 * w[0].q.linf);
    let h1_growing = rows[at(3)..].windows(2).all(|w| w[1].q.h1 > w[0].q.h1);
    let pass = rates_ok && magnitude_ok && l2_ok && linf_ok && h1_growing;
    let list = |col: fn(&SpaceRow) -> f64| {
        rows.iter()
            .map(|r| format!("{:.4}", col(r)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        4,
        "multiplier dual norm",
        pass,
        &format!(
            "[H1 dual {} rates {}] [H10 dual {} rates {}] [q L2 {}] [q Linf {}] [q H1 {}]",
            list(|r| r.q_dual_h1),
            fmt_rates(&h1_rates),
            list(|r| r.q_dual_h10),
            fmt_rates(&h10_rates),
            list(|r| r.q.l2),
            list(|r| r.q.linf),
            list(|r| r.q.h1),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_time_convergence() {
    let mut cfg = ExperimentConfig {
        level: 3,
        ..ExperimentConfig::default()
    };
    cfg.set("steps", "0..5").unwrap();
    let start = Instant::now();
    let rep = run_convergence_time(&cfg).unwrap();
    let elapsed = start.elapsed();
    let mut pass = elapsed <= Duration::from_secs(600);
    for row in rep.rows.iter().filter(|r| r.j >= 3) {
        pass &= in_range(row.rate, 1.95, 2.05);
    }
    let j3 = rep.rows.iter().find(|r| r.j == 3).unwrap();
    pass &= rel_close(j3.increment, 6.1e-5, 0.15);
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "j={} inc {:.4e} rate {}",
                r.j,
                r.increment,
                r.rate.map_or("-".into(), |x| format!("{x:.4}"))
            )
        })
        .collect();
    report(
        5,
        "time self-convergence",
        pass,
        &format!("[{}] {elapsed:.1?}", rows.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_06_singular_local_energy() {
    let center = 4.0;
    let edge = (22.0 - 2.0 * 5f64.sqrt()) / 5.0;
    let mut worst: f64 = 0.0;
    for (nx, ny) in [(34, 17), (66, 33), (130, 65)] {
        let mesh = build_structured_2d(nx, ny, &SingularIC::domain(2)).unwrap();
        for rect in [[nx / 2, ny / 2], [nx / 2 - 1, ny / 2], [3, 4]] {
            let c = local_singular_energy(&mesh, rect, SingularPlacement::RectangleCenter).unwrap();
            let e = local_singular_energy(&mesh, rect, SingularPlacement::EdgeMidpoint).unwrap();
            worst = worst.max((c - center).abs()).max((e - edge).abs());
        }
    }
    let pass = worst <= 1e-12;
    report(6, "singular local energy", pass, &format!("max deviation {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_07_barrier_h_independence() {
    let cfg = ExperimentConfig {
        grids: ["34x17", "66x33", "130x65"]
            .iter()
            .map(|g| g.parse::<GridSpec>().unwrap())
            .collect(),
        samples_per_cell: 16,
        ..ExperimentConfig::default()
    };
    let rep = run_barrier_scan(&cfg).unwrap();
    let amps: Vec<f64> = rep.grids.iter().map(|g| g.amplitude).collect();
    let max = amps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = amps.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = min > 0.0 && max / min <= 2.0;
    report(
        7,
        "barrier h-independence",
        pass,
        &format!("amplitudes {amps:.4?}, max/min {:.3}", max / min),
    );
    assert!(pass);
}

#[test]
fn criterion_08_dynamics_energy_monotone() {
    let start = Instant::now();
    let mut details = String::new();
    let mut pass = true;
    for (grids, k, t_final) in [(["34x17", "54x17"], 1e-3, 0.3), (["10x9x9", "17x9x9"], 5e-3, 0.25)] {
        let mut cfg = ExperimentConfig::default();
        cfg.grids = grids.iter().map(|g| g.parse::<GridSpec>().unwrap()).collect();
        cfg.dim = cfg.grids[0].dim();
        cfg.solver = SaddleMethod::Uzawa;
        cfg.k = Some(k);
        cfg.t_final = Some(t_final);
        let rep = run_dynamics(&cfg).unwrap();
        for run in &rep.runs {
            let energies: Vec<f64> = run.trajectory.reports().map(|r| r.energy).collect();
            let e0 = energies[0];
            let monotone = energies.windows(2).all(|w| w[1] <= w[0] + 1e-10 * e0);
            pass &= monotone;
            details += &format!(
                "[{}: energy {:.4} -> {:.4}, monotone {monotone}] ",
                run.grid,
                e0,
                energies[energies.len() - 1]
            );
        }
    }
    report(
        8,
        "dynamics energy monotone",
        pass,
        &format!("{details}{:.1?}", start.elapsed()),
    );
    assert!(pass);
}

/// Barycentric gradients and volume of a simplex from its vertex coordinates,
/// by inverting the edge matrix directly.
fn simplex_oracle(points: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let d = points.len() - 1;
    let e: Vec<Vec<f64>> = (1..=d)
        .map(|i| (0..d).map(|r| points[i][r] - points[0][r]).collect())
        .collect();
    // Columns of the edge matrix are e[i]; solve with Gauss-Jordan.
    let mut m: Vec<Vec<f64>> = (0..d)
        .map(|r| {
            let mut row: Vec<f64> = (0..d).map(|c| e[c][r]).collect();
            row.extend((0..d).map(|c| if c == r { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let mut det = 1.0;
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    let volume = det.abs() / fact;
    // Row i of the inverse is the gradient of barycentric coordinate i + 1.
    let mut grads: Vec<Vec<f64>> = (0..d).map(|i| m[i][d..].to_vec()).collect();
    let g0: Vec<f64> = (0..d).map(|c| -grads.iter().map(|g| g[c]).sum::<f64>()).collect();
    grads.insert(0, g0);
    (volume, grads)
}

/// Exact `∫∇u·∇v` and `∫u v` for scalar P1 fields, cell by cell.
fn oracle_forms(mesh: &Mesh, u: &[f64], v: &[f64]) -> (f64, f64) {
    let (mut k, mut m) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        let points: Vec<Vec<f64>> = verts.iter().map(|&a| mesh.vertex(a).to_vec()).collect();
        let (vol, grads) = simplex_oracle(&points);
        let d = mesh.dim();
        let gu: Vec<f64> = (0..d)
            .map(|r| verts.iter().zip(&grads).map(|(&a, g)| u[a] * g[r]).sum())
            .collect();
        let gv: Vec<f64> = (0..d)
            .map(|r| verts.iter().zip(&grads).map(|(&a, g)| v[a] * g[r]).sum())
            .collect();
        k += vol * gu.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>();
        // ∫λ_i λ_j = vol (1 + δ_ij) / ((d + 1)(d + 2)).
        let denom = ((d + 1) * (d + 2)) as f64;
        for (i, &a) in verts.iter().enumerate() {
            for (j, &b) in verts.iter().enumerate() {
                let w = if i == j { 2.0 } else { 1.0 };
                m += vol * w / denom * u[a] * v[b];
            }
        }
    }
    (k, m)
}

#[test]
fn criterion_09_oracle_equivalence() {
    let meshes = [
        build_structured_2d(7, 5, &BoxDomain::new(&[-1.0, 0.0], &[2.0, 1.5]).unwrap()).unwrap(),
        build_structured_3d(3, 4, 2, &BoxDomain::new(&[0.0, -1.0, 0.0], &[1.0, 1.0, 0.5]).unwrap()).unwrap(),
    ];
    let forms: Vec<(SparseOperator, SparseOperator)> = meshes
        .iter()
        .map(|m| (assemble_stiffness(m).unwrap(), assemble_mass(m).unwrap()))
        .collect();
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 100,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    let nv: Vec<usize> = meshes.iter().map(|m| m.n_vertices()).collect();
    let strategy = (0usize..2).prop_flat_map(move |w| {
        (
            Just(w),
            prop::collection::vec(-10.0f64..10.0, nv[w]),
            prop::collection::vec(-10.0f64..10.0, nv[w]),
        )
    });
    let forms_result = runner.run(&strategy, |(w, u, v)| {
        let (k_ref, m_ref) = oracle_forms(&meshes[w], &u, &v);
        let (k, m) = (forms[w].0.bilinear(&u, &v), forms[w].1.bilinear(&u, &v));
        // Relative to the Cauchy-Schwarz bound, so cancellation in the form
        // value does not inflate the ratio.
        let (kuu, muu) = oracle_forms(&meshes[w], &u, &u);
        let (kvv, mvv) = oracle_forms(&meshes[w], &v, &v);
        let k_err = (k - k_ref).abs() / (kuu * kvv).sqrt();
        let m_err = (m - m_ref).abs() / (muu * mvv).sqrt();
        worst.set(worst.get().max(k_err).max(m_err));
        prop_assert!(
            k_err <= 1e-13 && m_err <= 1e-13,
            "stiffness {k_err:.3e}, mass {m_err:.3e}"
        );
        Ok(())
    });

    // Constraint rows d_a at vertex a versus the mass-weighted rows Σ_b M_ab d_b.
    let mut constraint_worst: f64 = 0.0;
    let mut constraint_ok = true;
    for seed in 0..5u64 {
        let mesh = &meshes[(seed % 2) as usize];
        let ops = Operators::new(mesh).unwrap();
        let n = mesh.n_vertices();
        let c = mesh.dim();
        let mut runner = TestRunner::deterministic();
        let mut draw = |len: usize| {
            prop::collection::vec(-1.0f64..1.0, len)
                .new_tree(&mut runner)
                .unwrap()
                .current()
        };
        let d = draw(n * c);
        let rhs_u = draw(n * c);
        let rhs_q = draw(n);
        let a = ops.mass.add_scaled(1.0, &ops.stiffness, 0.3).unwrap();
        let mut nodal = Vec::new();
        for v in 0..n {
            for i in 0..c {
                nodal.push((v, v * c + i, d[v * c + i]));
            }
        }
        let b = SparseOperator::from_triplets(n, n * c, &nodal, false).unwrap();
        let mut weighted = Vec::new();
        for (r, col, m) in ops.mass.triplets() {
            for i in 0..c {
                weighted.push((r, col * c + i, m * d[col * c + i]));
            }
        }
        let bw = SparseOperator::from_triplets(n, n * c, &weighted, false).unwrap();
        let block = VectorBlock::ComponentDiagonal {
            scalar: a,
            components: c,
        };
        let s1 = solve_saddle(
            &SaddleSystem {
                a: block.clone(),
                b,
                rhs_u: rhs_u.clone(),
                rhs_q: rhs_q.clone(),
            },
            &SaddleOptions::default(),
        )
        .unwrap();
        let s2 = solve_saddle(
            &SaddleSystem {
                a: block,
                b: bw,
                rhs_u,
                rhs_q: ops.mass.mul_vec(&rhs_q),
            },
            &SaddleOptions::default(),
        )
        .unwrap();
        let scale = s1.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let du = s1.u.iter().zip(&s2.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        let mq = ops.mass.mul_vec(&s2.q);
        let qscale = s1.q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dq = s1.q.iter().zip(&mq).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / qscale;
        constraint_worst = constraint_worst.max(du).max(dq);
        constraint_ok &= du <= 1e-12 && dq <= 1e-12;
    }
    let pass = forms_result.is_ok() && constraint_ok;
    report(
        9,
        "oracle equivalence",
        pass,
        &format!(
            "bilinear forms max rel error {:.3e}, constraint forms max rel difference {constraint_worst:.3e} {forms_result:?}",
            worst.get()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_fixed_point_iterations() {
    let mut max_iters = 0;
    let mut details = String::new();
    for (level, k) in [(4, 0.05), (4, 0.1 / 16.0), (5, 0.1 / 16.0)] {
        let (tr, _) = smooth_run(level, Scheme::CrankNicolson, k, 0.25);
        let m = tr.steps.iter().filter_map(|r| r.fp_iters).max().unwrap();
        max_iters = max_iters.max(m);
        details += &format!("[i={level}, k={k}: max {m}] ");
    }
    let pass = max_iters <= 30;
    report(10, "fixed-point iterations", pass, &details);
    assert!(pass);
}
