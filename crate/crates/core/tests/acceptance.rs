//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! The lines go straight to the process stdout so they show up without
//! `--nocapture`. Heavy runs hold a shared lock: two 128x128 factorizations
//! side by side do not fit in memory on small machines.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use nematic_core::assembly::{fd_gradient, Assembler, Layout, Model};
use nematic_core::bench::{
    run, sweep_gamma, ProblemKind, RunConfig, RunResult, SolverChoice,
};
use nematic_core::energy::{deviation_stats, ElectricConstants, FrankConstants};
use nematic_core::linalg::multigrid::MgLevel;
use nematic_core::linalg::{InnerSolve, MgConfig, MgHierarchy};
use nematic_core::nonlinear::{
    lagrangian_accept_adjust, quadratic_model, rho_lagrangian, rho_penalty, tr_accept_adjust, Method, Ratio,
    Stepping, TrLagrangianParams, TrPenaltyParams, TrSubproblem,
};
use nematic_core::scalar::{dot, norm2};
use nematic_core::sparse::SparseMatrix;
use nematic_core::Mesh;

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn cfg(problem: ProblemKind, method: Method, stepping: Stepping, zeta: Option<f64>) -> RunConfig {
    RunConfig { problem, method, stepping, zeta, ..RunConfig::default() }
}

fn solve(c: &RunConfig) -> RunResult {
    let r = run(c).expect("valid configuration");
    if let Some(e) = &r.report.error {
        eprintln!("{}: {e}", c.label());
    }
    r
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

#[test]
fn criterion_01_twist_energy() {
    let _g = heavy();
    let r = solve(&cfg(ProblemKind::Twist, Method::Lagrangian, Stepping::TrSimple, None));
    let e = r.report.row.energy;
    let t = r.report.row.time_s;
    let close = e.is_some_and(|e| (e - 0.37011).abs() < 5e-5);
    let six = e.is_some_and(|e| format!("{e:.6}") == "0.370110");
    verdict(
        1,
        r.converged() && close && six && t < 180.0,
        &format!("energy {} at 128x128 (target 0.37011 +- 5e-5, six digits 0.370110), {t:.1} s (< 180 s)", fmt(e)),
    );
}

#[test]
fn criterion_02_twist_error() {
    let _g = heavy();
    let r = solve(&cfg(ProblemKind::Twist, Method::Lagrangian, Stepping::TrSimple, None));
    let err = r.report.row.l2_error;
    // the order is measured with a tolerance well below the discretization error
    let tight = |levels| {
        let c = RunConfig { levels, tol: 1e-9, ..cfg(ProblemKind::Twist, Method::Lagrangian, Stepping::TrSimple, None) };
        solve(&c).report.row.l2_error
    };
    let (coarse, fine) = (tight(4), tight(5));
    let order = match (coarse, fine) {
        (Some(a), Some(b)) => (a / b).log2(),
        _ => f64::NAN,
    };
    let ok = err.is_some_and(|e| e < 1e-7) && (2.5..=3.5).contains(&order);
    verdict(
        2,
        ok,
        &format!("L2 error {} at 128x128 (< 1e-7); order {order:.3} from {} / {} (in [2.5, 3.5])", fmt(err), fmt(coarse), fmt(fine)),
    );
}

#[test]
fn criterion_03_penalty_error_scaling() {
    let _g = heavy();
    let mut errors = Vec::new();
    let mut devs = Vec::new();
    let mut all = true;
    for k in 1..=5 {
        let r = solve(&cfg(ProblemKind::Twist, Method::Penalty, Stepping::Damped, Some(10f64.powi(k))));
        all &= r.converged();
        errors.push(r.report.row.l2_error.unwrap_or(f64::NAN));
        devs.push(r.report.row.min_dev.map_or(f64::NAN, f64::abs));
    }
    let in_band = |v: &[f64]| v.windows(2).all(|w| (5.0..=20.0).contains(&(w[0] / w[1])));
    let ratios = |v: &[f64]| v.windows(2).map(|w| format!("{:.2}", w[0] / w[1])).collect::<Vec<_>>().join("/");
    verdict(
        3,
        all && in_band(&errors) && in_band(&devs),
        &format!("zeta 1e1..1e5 converged {all}; L2 ratios {} ; min-dev ratios {} (each in [5, 20])", ratios(&errors), ratios(&devs)),
    );
}

#[test]
fn criterion_04_robustness() {
    let _g = heavy();
    let mut notes = Vec::new();
    let mut ok = true;
    let damped = solve(&cfg(ProblemKind::Twist, Method::Penalty, Stepping::Damped, Some(1e6)));
    ok &= damped.report.diverged;
    notes.push(format!("twist damped 1e6 diverged={}", damped.report.diverged));
    for k in 6..=9 {
        let r = solve(&cfg(ProblemKind::Twist, Method::Penalty, Stepping::TrSimple, Some(10f64.powi(k))));
        ok &= r.converged();
        notes.push(format!("twist tr-simple 1e{k} converged={}", r.converged()));
    }
    for k in [5, 6] {
        let z = Some(10f64.powi(k));
        let d = solve(&cfg(ProblemKind::Nano, Method::Penalty, Stepping::Damped, z));
        let t = solve(&cfg(ProblemKind::Nano, Method::Penalty, Stepping::TrSimple, z));
        ok &= d.report.diverged && t.converged();
        notes.push(format!("nano 1e{k} damped diverged={} tr-simple converged={}", d.report.diverged, t.converged()));
    }
    verdict(4, ok, &notes.join("; "));
}

#[test]
fn criterion_05_tilt_twist_energy() {
    let _g = heavy();
    let base = cfg(ProblemKind::TiltTwist, Method::Lagrangian, Stepping::TrSimple, None);
    let tilted = solve(&base);
    let planar = solve(&RunConfig { perturb: Some(0.0), ..base });
    let e = tilted.report.row.energy;
    let p = planar.report.row.energy;
    let close = e.is_some_and(|e| (e - 3.59294).abs() < 2e-3);
    // a start without perturbation may settle on the planar twist; it must never look better
    let branch = match (e, p) {
        (Some(e), Some(p)) => p >= e - 2e-3,
        _ => false,
    };
    let label = match (e, p) {
        (Some(e), Some(p)) if p > e + 2e-3 => "planar branch found, higher energy",
        (Some(_), Some(_)) => "unperturbed start reached the same branch",
        _ => "unperturbed run failed",
    };
    verdict(
        5,
        tilted.converged() && close && branch,
        &format!("energy {} (target 3.59294 +- 2e-3); unperturbed {} ({label})", fmt(e), fmt(p)),
    );
}

#[test]
fn criterion_06_nano_energy() {
    let _g = heavy();
    let r = solve(&cfg(ProblemKind::Nano, Method::Lagrangian, Stepping::TrSimple, None));
    let row = &r.report.row;
    let close = row.energy.is_some_and(|e| (e - 3.89001).abs() < 5e-3);
    let dev = match (row.min_dev, row.max_dev) {
        (Some(a), Some(b)) => a.abs().max(b.abs()),
        _ => f64::NAN,
    };
    verdict(
        6,
        r.converged() && close && dev <= 1e-3,
        &format!(
            "energy {} (target 3.89001 +- 5e-3); deviation extrema {} / {} (magnitudes <= 1e-3)",
            fmt(row.energy),
            fmt(row.min_dev),
            fmt(row.max_dev)
        ),
    );
}

#[test]
fn criterion_07_nested_iteration_efficiency() {
    let _g = heavy();
    let base = cfg(ProblemKind::Twist, Method::Lagrangian, Stepping::Damped, None);
    let ni = solve(&base);
    let flat = solve(&RunConfig { nested: false, ..base });
    let (a, b) = (ni.report.row.wu, flat.report.row.wu);
    let ok = a.is_some_and(|w| w <= 2.0) && b.is_some_and(|w| w >= 20.0);
    verdict(7, ok, &format!("WU with nested iteration {} (<= 2.0), without {} (>= 20)", fmt(a), fmt(b)));
}

fn diag(d: &[f64]) -> SparseMatrix<f64> {
    let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
    SparseMatrix::from_triplets(d.len(), d.len(), &t).unwrap()
}

fn subproblem(u: &SparseMatrix<f64>, f: &[f64]) -> TrSubproblem<f64> {
    let w = nematic_core::linalg::direct_solve(u, f).unwrap();
    TrSubproblem::new(u, f.to_vec(), w)
}

#[test]
fn criterion_08_trust_region_procedures() {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let pp = TrPenaltyParams::<f64>::default();
    let lp = TrLagrangianParams::<f64>::default();
    let eye = diag(&[1.0, 1.0]);
    let mut checks: Vec<(&str, bool)> = Vec::new();

    checks.push(("model at zero step", quadratic_model(2.0, &[1.0, 3.0], &eye, &[0.0, 0.0]) == 2.0));
    checks.push(("model along e1", quadratic_model(2.0, &[0.0, 0.0], &eye, &[1.0, 0.0]) == 2.5));

    let s = subproblem(&eye, &[1.0, 0.0]).simple_step(2.0);
    checks.push(("simple interior Newton step", close(s.step[0], -1.0) && s.step[1] == 0.0));
    let s = subproblem(&eye, &[3.0, 0.0]).simple_step(1.0);
    checks.push((
        "simple boundary step",
        close(s.step[0], -1.0) && close(quadratic_model(0.0, &[3.0, 0.0], &eye, &s.step), -2.5),
    ));

    let p = subproblem(&eye, &[0.3, -0.4]);
    let (a, b) = (p.two_d_step(0.2), p.simple_step(0.2));
    checks.push(("2D step on a collapsed subspace", close(a.step[0], b.step[0]) && close(a.step[1], b.step[1])));
    let s = subproblem(&diag(&[1.0, 4.0]), &[1.0, 1.0]).two_d_step(10.0);
    checks.push(("2D interior Newton step", close(s.step[0], -1.0) && close(s.step[1], -0.25)));

    checks.push(("ratio of an exact model", rho_penalty(1.0, 0.5, 0.5) == Ratio::Finite(1.0)));
    checks.push(("ratio escape for a zero step", rho_penalty(1.0, 1.0, 0.0) == Ratio::Escape));

    checks.push(("penalty: middle ratio keeps radius", tr_accept_adjust(0.5, 0.3, 0.1, &pp) == (true, 0.3)));
    let (acc, d) = tr_accept_adjust(0.05, 0.3, 0.3, &pp);
    checks.push(("penalty: poor ratio rejects and halves", !acc && close(d, 0.15)));
    let (acc, d) = tr_accept_adjust(0.9, 0.3, 0.3, &pp);
    checks.push(("penalty: good boundary ratio expands", acc && close(d, 0.39)));

    let (acc, w) = lagrangian_accept_adjust(0.6, 0.2, &lp);
    checks.push(("multiplier: good ratio grows the scale", acc && close(w, 0.3)));
    let (acc, w) = lagrangian_accept_adjust(0.1, lp.w_min, &lp);
    checks.push(("multiplier: forced acceptance at the floor", acc && close(w, lp.w_min)));
    checks.push(("multiplier: affine residual ratio", close(rho_lagrangian(2.0, 2.0 * (1.0 - 0.4), 0.4), 1.0)));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        8,
        failed.is_empty(),
        &format!("{} procedure examples, failing: {}", checks.len(), if failed.is_empty() { "none".to_string() } else { failed.join(", ") }),
    );
}

fn random_state(layout: &Layout, seed: u64) -> Vec<f64> {
    // small deterministic generator; the oracle needs variety, not quality
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut x: Vec<f64> = (0..layout.dof_count()).map(|_| next()).collect();
    for (i, v) in x.iter_mut().enumerate().take(layout.field_dofs()) {
        if i % layout.stride() == 2 {
            *v += 0.5;
        }
    }
    x
}

/// Largest relative mismatch between analytic and finite-difference
/// derivatives: gradient against the objective, Hessian rows against the gradient.
fn fd_mismatch(asm: &Assembler<f64>, seed: u64) -> f64 {
    let x = random_state(asm.layout(), seed);
    let g = asm.raw_gradient(&x).unwrap();
    let fd = fd_gradient(|y| asm.objective(y).unwrap(), &x, 1e-5);
    let rel = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&d) / norm2(a).max(1e-300)
    };
    let mut worst = rel(&g, &fd);
    let h = asm.raw_hessian(&x).unwrap();
    let dir = random_state(asm.layout(), seed + 1);
    let hd = h.mul_vec(&dir);
    let eps = 1e-6;
    let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
    let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
    let (gp, gm) = (asm.raw_gradient(&xp).unwrap(), asm.raw_gradient(&xm).unwrap());
    let fd_hd: Vec<f64> = gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
    worst = worst.max(rel(&hd, &fd_hd));
    worst
}

/// Dense Cholesky; `true` when the matrix is symmetric positive definite.
fn cholesky_succeeds(m: &SparseMatrix<f64>) -> bool {
    let mut a = m.to_dense();
    let n = a.len();
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>();
            a[i][j] = s / d;
        }
    }
    true
}

fn constant_state(layout: &Layout) -> Vec<f64> {
    let mut x = vec![0.0; layout.dof_count()];
    for node in 0..layout.node_count() {
        x[node * layout.stride()..node * layout.stride() + 3].copy_from_slice(&[0.6, 0.0, 0.8]);
    }
    for i in layout.multiplier_indices() {
        x[i] = 0.7;
    }
    x
}

#[test]
fn criterion_09_oracles() {
    let mesh = Mesh::new(8, 8, true).unwrap();
    let fc = FrankConstants::new(1.0, 1.7, 0.8).unwrap();
    let ec = ElectricConstants { eps0: 1.3, eps_par: 9.0, eps_perp: 7.0, e_s: 1.5, e_b: -1.1 };
    let mut notes = Vec::new();
    let mut ok = true;

    let assemblies = [
        ("penalty", Assembler::new(Layout::penalty(mesh), Model::penalty(fc, 50.0)).unwrap()),
        ("multiplier", Assembler::new(Layout::lagrangian(mesh), Model::lagrangian(fc)).unwrap()),
        ("flexo", Assembler::new(Layout::flexo(mesh), Model::flexo(fc, ec)).unwrap()),
    ];
    for (name, asm) in &assemblies {
        let m = (1..=2).map(|s| fd_mismatch(asm, s)).fold(0.0, f64::max);
        ok &= m < 1e-5;
        notes.push(format!("{name} FD {m:.1e}"));
    }

    // coercive regime: equal twist and bend constants, weak penalty, near-unit field
    let small = Mesh::new(4, 4, true).unwrap();
    let layout = Layout::penalty(small);
    let frank = FrankConstants::new(1.0, 1.3, 1.3).unwrap();
    let x = layout.space().interpolate_fn(|px: f64, py: f64| {
        let t = 0.4 * py + 0.2 * (2.0 * std::f64::consts::PI * px).sin();
        let len = (1.0 + 0.005 * (3.0 * py).sin()).sqrt();
        vec![len * t.cos(), 0.0, len * t.sin()]
    });
    let (lo, hi) = deviation_stats(&layout.space(), &x).unwrap();
    let mut spd = lo >= -0.01 && hi <= 0.01;
    for zeta in [1e-2, 0.5, 1.0] {
        let sys = Assembler::new(layout, Model::penalty(frank, zeta)).unwrap().system(&x).unwrap();
        spd &= cholesky_succeeds(&sys.matrix);
    }
    ok &= spd;
    notes.push(format!("penalty Hessian SPD {spd}"));

    let mut galerkin = 0.0f64;
    for (make, model) in [
        (Layout::lagrangian as fn(Mesh) -> Layout, Model::lagrangian(fc)),
        (Layout::flexo, Model::flexo(fc, ec)),
    ] {
        let coarse = make(mesh);
        let fine = coarse.refined();
        let fine_sys = Assembler::new(fine, model).unwrap().system(&constant_state(&fine)).unwrap();
        let coarse_sys = Assembler::new(coarse, model).unwrap().system(&constant_state(&coarse)).unwrap();
        let h = MgHierarchy::build(&fine_sys, &MgConfig::default()).unwrap();
        galerkin = galerkin.max(h.levels[0].matrix.max_abs_diff(&coarse_sys.matrix) / coarse_sys.matrix.max_abs());
    }
    ok &= galerkin < 1e-10;
    notes.push(format!("Galerkin identity {galerkin:.1e}"));

    let layout = Layout::lagrangian(mesh);
    let base = constant_state(&layout);
    let mut x = random_state(&layout, 7);
    for i in 0..layout.field_dofs() {
        x[i] = base[i] + 0.1 * x[i];
    }
    let sys = Assembler::new(layout, Model::lagrangian(fc)).unwrap().system(&x).unwrap();
    let mut b = sys.rhs.clone();
    for (bi, m) in b.iter_mut().zip(layout.dirichlet_mask()) {
        if m {
            *bi = 0.0;
        }
    }
    let level = MgLevel::with_exact_collocation(layout, sys.matrix.clone()).unwrap();
    let mut sol = vec![0.0; b.len()];
    level.relax(&mut sol, &b, 1.0, InnerSolve::Exact).unwrap();
    let ax = sys.matrix.mul_vec(&sol);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let one_update = norm2(&r) / norm2(&b);
    ok &= one_update < 1e-10;
    notes.push(format!("exact relaxation residual {one_update:.1e}"));

    verdict(9, ok, &notes.join("; "));
}

#[test]
fn criterion_10_multigrid() {
    let _g = heavy();
    let run = solve(&RunConfig { solver: SolverChoice::Mg, ..cfg(ProblemKind::Flexo, Method::Lagrangian, Stepping::TrSimple, None) });
    let mut cycles = Vec::new();
    for level in run.report.levels.iter().filter(|l| l.cells >= 32) {
        cycles.extend(level.mg_cycles.iter().copied());
    }
    let spread = match (cycles.iter().max(), cycles.iter().min()) {
        (Some(hi), Some(lo)) if run.converged() => hi - lo,
        _ => usize::MAX,
    };

    let gammas: Vec<f64> = (0..=18).map(|k| 1.10 + 0.05 * k as f64).collect();
    let flexo = RunConfig { levels: 4, ..cfg(ProblemKind::Flexo, Method::Lagrangian, Stepping::TrSimple, None) };
    let rows = sweep_gamma(&flexo, &gammas).unwrap();
    let cost = |r: &nematic_core::bench::GammaRow| if r.converged { r.avg_cycles } else { f64::INFINITY };
    let best = rows.iter().min_by(|a, b| cost(a).total_cmp(&cost(b))).unwrap();
    let at = |g: f64| rows.iter().find(|r| (r.gamma_b - g).abs() < 1e-9).map(cost).unwrap();
    let (at_120, at_200) = (at(1.2), at(2.0));
    let flat = at_120 <= at_200;
    let minimum_ok = (best.gamma_b - 1.2).abs() <= 0.05 + 1e-9;
    let profile: Vec<String> = rows.iter().map(|r| format!("{:.2}:{:.1}", r.gamma_b, cost(r))).collect();

    let energy = run.report.row.energy;
    let stretch = energy.is_some_and(|e| (e - 16.413).abs() <= 0.5);

    verdict(
        10,
        spread <= 3 && minimum_ok && flat,
        &format!(
            "flexo NI multigrid cycles per Newton step on 32..128 {cycles:?} (spread {spread} <= 3); \
             64x64 gamma sweep minimum at {:.2} ({:.1} cycles, want 1.20 +- 0.05); cycles at 1.20 {at_120:.1} <= at 2.00 {at_200:.1}; \
             profile [{}]; stretch flexo energy {} (16.413 +- 0.5: {})",
            best.gamma_b,
            best.avg_cycles,
            profile.join(" "),
            fmt(energy),
            if stretch { "met" } else { "missed" }
        ),
    );
}

#[test]
fn criterion_11_renormalization() {
    let _g = heavy();
    let r = solve(&cfg(ProblemKind::Twist, Method::PenaltyRenorm, Stepping::Tr2d, Some(1e3)));
    let unit = match &r.layout {
        Some(l) => r.state[..l.field_dofs()]
            .chunks(3)
            .map(|n| (dot(n, n).sqrt() - 1.0).abs())
            .fold(0.0, f64::max),
        None => f64::NAN,
    };
    let err = r.report.row.l2_error;
    let within = err.is_some_and(|e| e <= 3.0 * 3.357e-6 && e >= 3.357e-6 / 3.0);
    verdict(
        11,
        r.converged() && unit < 1e-14 && within,
        &format!("nodal | |n| - 1 | max {unit:.1e} (< 1e-14); L2 error {} (within 3x of 3.357e-6)", fmt(err)),
    );
}
