//! Mode dispatch.

use fbsys::diagnostics::{
    fourier_audit, free_boundary_extract, map_to_h, monotonicity_audit, record, write_branch_csv, AuditOptions,
};
use fbsys::solver::{alpha_root_find, continue_branch, contraction_threshold, Branch, StepControl};
use fbsys::spectral::{apply_c, check_spectral_bound, eigen_solve, WeightedSpace};
use fbsys::variational::{coordinate_minimize, free_energy, DensityPair, MinimizeOptions};
use fbsys::{build_mesh, DomainMesh, GridField, ProblemParams, SolutionState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Method, Mode, RunConfig};
use crate::output::{row, Out};
use crate::Failure;

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let params = cfg.problem()?;
    let mesh = build_mesh(cfg.shape(), cfg.domain.n).map_err(Failure::from_core)?;
    let mut out = Out::new(cfg, &mesh)?;
    match cfg.mode {
        Mode::Solve => solve(&mut out, &params),
        Mode::Branch => branch(&mut out, &params),
        Mode::Spectrum => spectrum(&mut out, &params),
        Mode::Verify => verify(&mut out, &params),
        Mode::Oracle => oracle(&mut out, &params),
    }
}

/// The λ values of a run, ascending and without repeats.
fn lambdas(cfg: &RunConfig) -> Vec<f64> {
    let mut v = if cfg.sweep.lambdas.is_empty() { vec![cfg.lambda] } else { cfg.sweep.lambdas.clone() };
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Runs `f` over `items` on the configured pool; results keep input order.
fn fan_out<T, R, F>(cfg: &RunConfig, items: &[T], f: F) -> Result<Vec<R>, Failure>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, Failure> + Sync + Send,
{
    if items.len() == 1 {
        return Ok(vec![f(&items[0])?]);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .map_err(|e| Failure::Solver(e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn continuation(mesh: &DomainMesh, params: &ProblemParams, cfg: &RunConfig, lambda: f64) -> Result<SolutionState, Failure> {
    if lambda == 0.0 {
        return Ok(SolutionState::at_zero(mesh)?);
    }
    let control = StepControl { track_sigma: false, ..cfg.step_control() };
    let b = continue_branch(mesh, params, lambda, &control, &cfg.tolerances())?;
    let last = b.states.last().expect("branch holds the λ = 0 state");
    if (last.lambda - lambda).abs() > 1e-12 * lambda.max(1.0) {
        return Err(Failure::Solver(format!("branch stopped at λ = {} ({:?}) before λ = {lambda}", last.lambda, b.stop)));
    }
    Ok(last.clone())
}

fn solve_at(mesh: &DomainMesh, params: &ProblemParams, cfg: &RunConfig, lambda: f64) -> Result<SolutionState, Failure> {
    match cfg.solve.method {
        Method::Continuation => continuation(mesh, params, cfg, lambda),
        Method::Contraction => Ok(alpha_root_find(mesh, params, lambda, &cfg.tolerances())?),
        Method::Variational => {
            let init = DensityPair::uniform(mesh);
            Ok(coordinate_minimize(mesh, params, lambda, &init, &MinimizeOptions::default())?.0)
        }
    }
}

const STATE_HEADER: [&str; 11] =
    ["lambda", "alpha1", "alpha2", "residual", "mass_defect_1", "mass_defect_2", "min_v1", "min_v2", "E", "F", "gamma"];

fn state_row(mesh: &DomainMesh, params: &ProblemParams, s: &SolutionState) -> Result<Vec<String>, Failure> {
    let r = record(mesh, params, s, f64::NAN)?;
    let m = s.mass_defects(mesh, params);
    Ok(row(&[
        s.lambda,
        s.alpha[0],
        s.alpha[1],
        s.residual(mesh, params)?,
        m[0],
        m[1],
        s.min_v(0),
        s.min_v(1),
        r.e,
        r.f,
        r.gamma,
    ]))
}

fn write_fields(out: &mut Out, params: &ProblemParams, name: &str, s: &SolutionState) -> Result<(), Failure> {
    let (r1, r2) = (s.density(params, 0), s.density(params, 1));
    let rows: Vec<Vec<String>> = out
        .mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, p)| row(&[p[0], p[1], s.psi[0].as_slice()[k], s.psi[1].as_slice()[k], r1.as_slice()[k], r2.as_slice()[k]]))
        .collect();
    out.csv(name, &["x", "y", "psi1", "psi2", "rho1", "rho2"], &rows)
}

fn solve(out: &mut Out, params: &ProblemParams) -> Result<(), Failure> {
    let (cfg, mesh) = (out.cfg, out.mesh);
    let ls = lambdas(cfg);
    let states = fan_out(cfg, &ls, |&l| solve_at(mesh, params, cfg, l))?;
    let rows = states.iter().map(|s| state_row(mesh, params, s)).collect::<Result<Vec<_>, _>>()?;
    out.csv("state.csv", &STATE_HEADER, &rows)?;
    let single = states.len() == 1;
    for (k, s) in states.iter().enumerate() {
        let tag = if single { String::new() } else { format!("_{k:03}") };
        write_fields(out, params, &format!("fields{tag}.csv"), s)?;
        let contours = free_boundary_extract(mesh, s);
        if !contours.is_empty() {
            out.contours(&format!("solve{tag}_"), &contours)?;
        }
        println!("λ = {}: α = ({:.10}, {:.10})", s.lambda, s.alpha[0], s.alpha[1]);
    }
    Ok(())
}

fn bracket_json(b: Option<fbsys::solver::Bracket>) -> serde_json::Value {
    b.map_or(serde_json::Value::Null, |b| json!({ "lo": b.lo, "hi": b.hi }))
}

fn branch(out: &mut Out, params: &ProblemParams) -> Result<(), Failure> {
    let (cfg, mesh) = (out.cfg, out.mesh);
    let b = continue_branch(mesh, params, cfg.step.lambda_max, &cfg.step_control(), &cfg.tolerances())?;
    write_branch_csv(&b.records, &out.path("branch.csv"))?;
    out.sidecar("branch.csv")?;
    let last = b.states.last().expect("branch holds the λ = 0 state");
    let contours = free_boundary_extract(mesh, last);
    if !contours.is_empty() {
        out.contours("branch_", &contours)?;
    }
    out.json(
        "branch_report.json",
        &json!({
            "records": b.records.len(),
            "last_lambda": last.lambda,
            "stop": format!("{:?}", b.stop),
            "lambda_bar": bracket_json(b.lambda_bar),
            "lambda_star": bracket_json(b.lambda_star),
        }),
    )?;
    println!("{} records up to λ = {}; stop: {:?}", b.records.len(), last.lambda, b.stop);
    if let Some(x) = b.lambda_bar {
        println!("λ̄ ∈ [{}, {}]", x.lo, x.hi);
    }
    if let Some(x) = b.lambda_star {
        println!("λ* ∈ [{}, {}]", x.lo, x.hi);
    }
    Ok(())
}

fn spectrum(out: &mut Out, params: &ProblemParams) -> Result<(), Failure> {
    let (cfg, mesh) = (out.cfg, out.mesh);
    let ls = lambdas(cfg);
    let sets = fan_out(cfg, &ls, |&l| {
        let s = continuation(mesh, params, cfg, l)?;
        let space = WeightedSpace::new(mesh, params, &s)?;
        Ok(eigen_solve(&space, mesh, cfg.spectrum.k)?)
    })?;
    let mut rows = Vec::new();
    for set in &sets {
        for k in 0..set.len() {
            let mu = set.mus.get(k).copied().unwrap_or(f64::NAN);
            let mut r = row(&[set.lambda]);
            r.push((k + 1).to_string());
            r.extend(row(&[set.sigmas[k], set.nus[k], mu, set.residuals[k]]));
            rows.push(r);
        }
        println!("λ = {}: σ₁ = {}", set.lambda, set.sigmas[0]);
    }
    out.csv("spectrum.csv", &["lambda", "k", "sigma", "nu", "mu", "residual"], &rows)
}

fn oracle_lambdas(cfg: &RunConfig, mesh: &DomainMesh, params: &ProblemParams) -> Result<Vec<f64>, Failure> {
    if !cfg.oracle.lambdas.is_empty() {
        let mut v = cfg.oracle.lambdas.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        return Ok(v);
    }
    let l0 = contraction_threshold(mesh, params)?.lambda0;
    Ok((1..=5).map(|k| l0 * k as f64 / 5.0).collect())
}

fn oracle(out: &mut Out, params: &ProblemParams) -> Result<(), Failure> {
    let (cfg, mesh) = (out.cfg, out.mesh);
    let ls = oracle_lambdas(cfg, mesh, params)?;
    let rows = fan_out(cfg, &ls, |&l| {
        let n = continuation(mesh, params, cfg, l)?;
        let (v, d, rep) = coordinate_minimize(mesh, params, l, &DensityPair::uniform(mesh), &MinimizeOptions::default())?;
        let j = free_energy(mesh, params, l, &d)?;
        let (da, dp) = n.distance(&v);
        let mut r = row(&[l, n.alpha[0], n.alpha[1], v.alpha[0], v.alpha[1], da, dp, j]);
        r.push(rep.sweeps.to_string());
        r.push(rep.converged.to_string());
        Ok(r)
    })?;
    for r in &rows {
        println!("λ = {}: |Δα| = {}, |Δψ|∞ = {}", r[0], r[5], r[6]);
    }
    out.csv(
        "oracle.csv",
        &["lambda", "alpha1_newton", "alpha2_newton", "alpha1_variational", "alpha2_variational", "d_alpha", "d_psi", "J", "sweeps", "converged"],
        &rows,
    )
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Check {
        Check { name, value, threshold, pass: value <= threshold }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Check {
        Check { name, value, threshold, pass: value >= threshold }
    }
}

fn random_pair(space: &WeightedSpace, n: usize, rng: &mut ChaCha8Rng) -> Result<(GridField, GridField), Failure> {
    let mut draw = || GridField::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (a, b) = (draw()?, draw()?);
    Ok((space.project(0, &a)?, space.project(1, &b)?))
}

fn pair_inner(space: &WeightedSpace, a: &(GridField, GridField), b: &(GridField, GridField)) -> f64 {
    space.inner(0, a.0.as_slice(), b.0.as_slice()) + space.inner(1, a.1.as_slice(), b.1.as_slice())
}

/// Largest relative asymmetry `|⟨η,Cφ⟩ − ⟨Cη,φ⟩|` over random pairs.
fn self_adjointness(mesh: &DomainMesh, params: &ProblemParams, s: &SolutionState, pairs: usize, seed: u64) -> Result<f64, Failure> {
    let space = WeightedSpace::new(mesh, params, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (eta, phi) = (random_pair(&space, mesh.len(), &mut rng)?, random_pair(&space, mesh.len(), &mut rng)?);
        let (c_eta, c_phi) = (apply_c(&space, mesh, &eta)?, apply_c(&space, mesh, &phi)?);
        let norm = |x: &(GridField, GridField)| pair_inner(&space, x, x).sqrt();
        let scale = norm(&eta) * norm(&c_phi) + norm(&c_eta) * norm(&phi);
        worst = worst.max((pair_inner(&space, &eta, &c_phi) - pair_inner(&space, &c_eta, &phi)).abs() / scale);
    }
    Ok(worst)
}

fn small_lambda_checks(mesh: &DomainMesh, params: &ProblemParams, cfg: &RunConfig) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerances();
    let l0 = contraction_threshold(mesh, params)?.lambda0;
    let (mut min_alpha, mut worst) = (f64::INFINITY, 0.0f64);
    for l in [0.5 * l0, l0] {
        let a = alpha_root_find(mesh, params, l, &tol)?;
        let b = continuation(mesh, params, cfg, l)?;
        let (c, _, _) = coordinate_minimize(mesh, params, l, &DensityPair::uniform(mesh), &MinimizeOptions::default())?;
        min_alpha = min_alpha.min(a.alpha[0].min(a.alpha[1]));
        for (x, y) in [(&a, &b), (&a, &c), (&b, &c)] {
            let (da, dp) = x.distance(y);
            worst = worst.max(da).max(dp);
        }
    }
    Ok(vec![Check::at_least("small_lambda_alpha", min_alpha, 1.0 / 3.0), Check::at_most("dual_solver_agreement", worst, 1e-6)])
}

fn branch_checks(mesh: &DomainMesh, params: &ProblemParams, cfg: &RunConfig, b: &Branch) -> Result<Vec<Check>, Failure> {
    let tol = cfg.tolerances();
    let mut checks = Vec::new();

    let (mut res, mut mass, mut spread, mut fdef) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (r, s) in b.records.iter().zip(&b.states) {
        res = res.max(s.residual(mesh, params)?);
        mass = s.mass_defects(mesh, params).iter().fold(mass, |m, d| m.max(d.abs()));
        spread = spread.max(r.e_spread() / r.e);
        fdef = fdef.max(r.f_identity_defect(params).abs());
    }
    checks.push(Check::at_most("branch_residual", res, 10.0 * tol.newton_tol));
    checks.push(Check::at_most("mass_constraint", mass, 1e-8));
    checks.push(Check::at_most("energy_consistency", spread, 1e-8));
    checks.push(Check::at_most("free_energy_identity", fdef, 1e-8));

    let positive: Vec<_> = b.positive_records().collect();
    let records: Vec<_> = positive.iter().map(|(r, _)| (*r).clone()).collect();
    let audit = monotonicity_audit(&records, &AuditOptions::default());
    checks.push(Check::at_most("monotonicity_violations", audit.violations.len() as f64, 0.0));
    let deriv = audit.derivatives.iter().map(|d| d.rel_err).fold(0.0, f64::max);
    checks.push(Check::at_most("free_energy_derivative", deriv, AuditOptions::default().derivative_rtol));

    if params.p1 == params.p2 {
        let asym = positive
            .iter()
            .map(|(_, s)| (s.alpha[0] - s.alpha[1]).abs().max(s.psi[0].max_abs_diff(&s.psi[1])))
            .fold(0.0, f64::max);
        checks.push(Check::at_most("scalar_symmetry", asym, 1e-7));
    }

    let bound = check_spectral_bound(b, mesh, params)?;
    checks.push(Check::at_most("spectral_bound_violations", bound.violations() as f64, 0.0));

    let (mut h_res, mut h_id) = (0.0f64, 0.0f64);
    for (r, s) in positive.iter().filter(|(_, s)| s.lambda > 0.0) {
        let h = map_to_h(mesh, params, s)?;
        h_res = h.residuals.iter().fold(h_res, |m, x| m.max(*x));
        h_id = h.norm_identity.iter().fold(h_id, |m, x| m.max(x.abs()));
        h_id = h_id.max((h.gamma_h - r.gamma).abs()).max((h.e_h - r.e).abs()).max((h.f_h - r.f).abs());
    }
    checks.push(Check::at_most("h_residual", h_res, 10.0 * tol.newton_tol));
    checks.push(Check::at_most("h_identities", h_id, 1e-8));

    let mut margin = f64::INFINITY;
    // eigen solves dominate; sample at most eight interior records
    let windows: Vec<_> = positive.windows(3).collect();
    let stride = windows.len().div_ceil(8).max(1);
    for w in windows.iter().step_by(stride) {
        let s = w[1].1;
        let space = WeightedSpace::new(mesh, params, s)?;
        let set = eigen_solve(&space, mesh, cfg.spectrum.k)?;
        let f = fourier_audit(mesh, params, s, &set, (w[0].1, w[2].1))?;
        margin = margin.min(f.de_dlambda_fd - f.lower_bound);
    }
    if margin.is_finite() {
        checks.push(Check::at_least("energy_derivative_bound", margin, -1e-6));
    }

    let last_positive = positive.last().expect("the λ = 0 state is positive").1;
    let sym = self_adjointness(mesh, params, last_positive, cfg.verify.random_pairs, cfg.seed)?;
    checks.push(Check::at_most("c_self_adjoint", sym, 1e-9));

    let last = b.states.last().expect("branch holds the λ = 0 state");
    if !last.is_positive() {
        let contours = free_boundary_extract(mesh, last);
        let missing = (0..2)
            .filter(|&i| last.alpha[i] < 0.0)
            .filter(|&i| !contours.iter().any(|c| c.component == i + 1 && c.closed && c.interior))
            .count();
        checks.push(Check::at_most("free_boundary_contours_missing", missing as f64, 0.0));
    }
    Ok(checks)
}

fn verify(out: &mut Out, params: &ProblemParams) -> Result<(), Failure> {
    let (cfg, mesh) = (out.cfg, out.mesh);
    let b = continue_branch(mesh, params, cfg.step.lambda_max, &cfg.step_control(), &cfg.tolerances())?;
    let mut checks = small_lambda_checks(mesh, params, cfg)?;
    checks.extend(branch_checks(mesh, params, cfg, &b)?);

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            let mut r = vec![c.name.to_string()];
            r.extend(row(&[c.value, c.threshold]));
            r.push(c.pass.to_string());
            r
        })
        .collect();
    out.csv("verify.csv", &["check", "value", "threshold", "pass"], &rows)?;
    for c in &checks {
        println!("[{}] {}: {:e} (threshold {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    println!("verify: {} checks on {} branch records, {} failed", checks.len(), b.records.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed))
    }
}
