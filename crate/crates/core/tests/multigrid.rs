use nematic_core::assembly::{Assembler, BlockSystem, Layout};
use nematic_core::bench::twist_problem;
use nematic_core::linalg::multigrid::{galerkin_coarse, MgLevel};
use nematic_core::linalg::{direct_solve, mg_solve, InnerSolve, MgConfig, MgHierarchy};
use nematic_core::nonlinear::Method;
use nematic_core::scalar::norm2;
use nematic_core::Mesh;

fn start_system(n: usize, perturb: f64, lambda: f64) -> BlockSystem<f64> {
    let spec = twist_problem();
    let layout = spec.layout(Mesh::new(n, n, true).unwrap(), Method::Lagrangian).unwrap();
    let model = spec.model(Method::Lagrangian, None).unwrap();
    let mut x = spec.initial_guess(&layout, perturb);
    for i in layout.multiplier_indices() {
        x[i] = lambda;
    }
    Assembler::new(layout, model).unwrap().system(&x).unwrap()
}

/// Out-of-plane start with a nonzero multiplier, so every block is populated.
fn twist_system(n: usize) -> BlockSystem<f64> {
    start_system(n, 0.05, 0.3)
}

fn residual(sys: &BlockSystem<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = sys.matrix.mul_vec(x);
    b.iter().zip(&ax).map(|(p, q)| p - q).collect()
}

fn masked_rhs(sys: &BlockSystem<f64>) -> Vec<f64> {
    let mut b = sys.rhs.clone();
    for (bi, m) in b.iter_mut().zip(sys.layout.dirichlet_mask()) {
        if m {
            *bi = 0.0;
        }
    }
    b
}

#[test]
fn exact_relaxation_is_a_direct_solve() {
    let sys = twist_system(8);
    let b = masked_rhs(&sys);
    let level = MgLevel::with_exact_collocation(sys.layout, sys.matrix.clone()).unwrap();
    let mut x = vec![0.0; b.len()];
    level.relax(&mut x, &b, 1.0, InnerSolve::Exact).unwrap();
    let rel = norm2(&residual(&sys, &x, &b)) / norm2(&b);
    assert!(rel < 1e-10, "relative residual {rel}");
    let want = direct_solve(&sys.matrix, &b).unwrap();
    let err = x.iter().zip(&want).map(|(a, w)| (a - w).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn relaxation_with_exact_inner_solve_satisfies_the_constraint_rows() {
    let sys = twist_system(8);
    let b = masked_rhs(&sys);
    let cfg = MgConfig { inner: InnerSolve::Exact, ..MgConfig::default() };
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let mut x: Vec<f64> = (0..b.len()).map(|i| ((i * 7) % 11) as f64 * 1e-2).collect();
    for (xi, m) in x.iter_mut().zip(sys.layout.dirichlet_mask()) {
        if m {
            *xi = 0.0;
        }
    }
    h.finest().relax(&mut x, &b, 1.2, InnerSolve::Exact).unwrap();
    let r = residual(&sys, &x, &b);
    let l = sys.layout.multiplier_indices();
    let worst = l.iter().map(|&i| r[i].abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "multiplier residual {worst}");
}

#[test]
fn relaxation_does_not_increase_the_residual() {
    let sys = start_system(16, 0.0, 0.0);
    let b = masked_rhs(&sys);
    let cfg = MgConfig::default();
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let mut x = vec![0.0; b.len()];
    let mut last = norm2(&b);
    for sweep in 0..20 {
        h.finest().relax(&mut x, &b, 1.2, cfg.inner).unwrap();
        let now = norm2(&residual(&sys, &x, &b));
        assert!(now <= last * (1.0 + 1e-12), "sweep {sweep}: {last} -> {now}");
        last = now;
    }
    let out = mg_solve(&h, &b, &cfg).unwrap();
    assert!(out.converged);
    assert!(out.history.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.history);
}

#[test]
fn hierarchy_operators_are_galerkin_products() {
    let sys = twist_system(16);
    let h = MgHierarchy::build(&sys, &MgConfig::default()).unwrap();
    assert_eq!(h.levels.len(), 2);
    let (coarse, fine) = (&h.levels[0], &h.levels[1]);
    let p = fine.prolongation.as_ref().unwrap();
    let g = galerkin_coarse(&fine.matrix, p, &coarse.layout.dirichlet_mask()).unwrap();
    assert!(g.max_abs_diff(&coarse.matrix) < 1e-10 * coarse.matrix.max_abs());
    assert!(coarse.matrix.asymmetry() < 1e-12 * coarse.matrix.max_abs());
    assert_eq!(coarse.layout, Layout::lagrangian(Mesh::new(8, 8, true).unwrap()));
}

#[test]
fn single_level_hierarchy_keeps_the_matrix() {
    let sys = twist_system(8);
    let h = MgHierarchy::build(&sys, &MgConfig::default()).unwrap();
    assert_eq!(h.levels.len(), 1);
    assert_eq!(h.finest().matrix.max_abs_diff(&sys.matrix), 0.0);
    let b = masked_rhs(&sys);
    let out = mg_solve(&h, &b, &MgConfig::default()).unwrap();
    assert_eq!(out.cycles, 1);
}

#[test]
fn manufactured_solution_is_recovered() {
    let sys = twist_system(32);
    let mask = sys.layout.dirichlet_mask();
    let xs: Vec<f64> = (0..mask.len()).map(|i| if mask[i] { 0.0 } else { ((i * 37) % 101) as f64 / 101.0 - 0.5 }).collect();
    let b = sys.matrix.mul_vec(&xs);
    let cfg = MgConfig::default();
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let out = mg_solve(&h, &b, &cfg).unwrap();
    assert!(out.converged);
    assert!(out.relative_residual < 1e-6);
    let direct = direct_solve(&sys.matrix, &b).unwrap();
    let scale = norm2(&direct);
    let u = sys.layout.field_dofs();
    let diff: Vec<f64> = out.x[..u].iter().zip(&direct[..u]).map(|(a, d)| a - d).collect();
    assert!(norm2(&diff) < 1e-3 * scale);
    let diff: Vec<f64> = out.x[..u].iter().zip(&xs[..u]).map(|(a, d)| a - d).collect();
    assert!(norm2(&diff) < 1e-3 * norm2(&xs));
}

#[test]
fn scaling_the_right_hand_side_scales_the_solution() {
    let sys = twist_system(16);
    let b = masked_rhs(&sys);
    let cfg = MgConfig::default();
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let one = mg_solve(&h, &b, &cfg).unwrap();
    let b3: Vec<f64> = b.iter().map(|v| 3.0 * v).collect();
    let three = mg_solve(&h, &b3, &cfg).unwrap();
    assert_eq!(one.cycles, three.cycles);
    let err = one.x.iter().zip(&three.x).map(|(a, c)| (3.0 * a - c).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10 * one.x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
}

#[test]
fn moderate_weight_needs_no_more_cycles_than_a_large_one() {
    let sys = twist_system(32);
    let b = masked_rhs(&sys);
    let cycles = |g: f64| {
        let cfg = MgConfig { gamma_b: g, ..MgConfig::default() };
        let h = MgHierarchy::build(&sys, &cfg).unwrap();
        let out = mg_solve(&h, &b, &cfg).unwrap();
        assert!(out.converged, "gamma {g}");
        out.cycles
    };
    assert!(cycles(1.2) <= cycles(2.0));
}

#[test]
fn zero_right_hand_side_takes_no_cycles() {
    let sys = twist_system(16);
    let cfg = MgConfig::default();
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let out = mg_solve(&h, &vec![0.0; sys.rhs.len()], &cfg).unwrap();
    assert_eq!(out.cycles, 0);
    assert!(out.converged && out.x.iter().all(|&v| v == 0.0));
}

#[test]
fn cycle_limit_is_reported_not_raised() {
    let sys = twist_system(16);
    let b = masked_rhs(&sys);
    let cfg = MgConfig { max_cycles: 2, tol: 1e-14, ..MgConfig::default() };
    let h = MgHierarchy::build(&sys, &cfg).unwrap();
    let out = mg_solve(&h, &b, &cfg).unwrap();
    assert!(!out.converged);
    assert_eq!(out.cycles, 2);
    assert_eq!(out.history.len(), 2);
}
