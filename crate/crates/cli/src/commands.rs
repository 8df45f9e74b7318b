//! The `run`, `validate`, and `oracle` subcommands.

use crate::config::{ConfigError, ProblemChoice, RunConfig};
use simpl_core::field::{CellField, Mesh};
use simpl_core::io::{write_pgm, write_vtk};
use simpl_core::optimizer::{simpl_run, IterRecord, OptHistory, StopStatus};
use simpl_core::oracles;
use simpl_core::polytope::Polytope;
use simpl_core::problems::mean_phase_saturation;
use simpl_core::projection::GlobalConstraints;
use std::path::Path;
use std::time::Instant;

/// Process exit codes: 0 tolerance met, 1 error, 2 iteration cap.
pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_MAX_ITERS: u8 = 2;

pub fn validate(config_path: &Path) -> u8 {
    match try_validate(config_path) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

fn try_validate(config_path: &Path) -> Result<String, String> {
    let cfg = RunConfig::load(config_path).map_err(|e| e.to_string())?;
    let built = cfg.problem.build().map_err(|e| e.to_string())?;
    let opts = cfg
        .optimizer_options(built.recommended_options)
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "config ok: problem={} grid={}x{} constraints={} tol_rel={:e} max_iters={} output={}",
        cfg.problem.name(),
        cfg.problem.grid().0,
        cfg.problem.grid().1,
        built.constraints.num_constraints(),
        opts.tol_rel,
        opts.max_iters,
        cfg.output_dir.display()
    ))
}

pub fn run(config_path: &Path) -> u8 {
    // Everything that can be rejected must be rejected before any output
    // file is created.
    let cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(&ConfigError::to_string(&e)),
    };
    let mut built = match cfg.problem.build() {
        Ok(b) => b,
        Err(e) => return fail(&e.to_string()),
    };
    let opts = match cfg.optimizer_options(built.recommended_options) {
        Ok(o) => o,
        Err(e) => return fail(&e.to_string()),
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.output_dir) {
        return fail(&format!("cannot create {}: {e}", cfg.output_dir.display()));
    }

    let mesh = built.problem.mesh();
    let out_dir = cfg.output_dir.clone();
    let every = cfg.snapshot_every;
    let mut snapshot_error: Option<String> = None;
    let mut observer = |rec: &IterRecord, eta: &CellField| {
        if every > 0 && rec.k % every == 0 && snapshot_error.is_none() {
            if let Err(e) = write_design_fields(&out_dir, &format!("{:05}", rec.k), mesh, eta, &[])
            {
                snapshot_error = Some(e);
            }
        }
    };

    let t0 = Instant::now();
    let run_result = simpl_run(
        &mut built.problem,
        &built.polytope,
        &built.constraints,
        built.initial_psi.clone(),
        &opts,
        Some(&mut observer),
    );
    let wall = t0.elapsed().as_secs_f64();

    if let Some(e) = snapshot_error {
        return fail(&format!("snapshot write failed: {e}"));
    }

    match run_result {
        Ok(result) => {
            let mut point_fields: Vec<(&str, &simpl_core::field::NodalField)> = Vec::new();
            if let Some((filtered, displacement)) = built.problem.last_state() {
                point_fields.push(("eta_filtered", filtered));
                point_fields.push(("u", displacement));
            }
            if let Err(e) = write_design_fields(&cfg.output_dir, "final", mesh, &result.eta, &point_fields)
                .and_then(|_| write_history(&cfg.output_dir, &result.history))
                .and_then(|_| {
                    write_summary(
                        &cfg.output_dir,
                        &cfg.problem,
                        &result.history,
                        Some(result.status),
                        None,
                        result.objective,
                        Some(&result.eta),
                        wall,
                    )
                })
            {
                return fail(&e);
            }
            match result.status {
                StopStatus::ToleranceMet => EXIT_OK,
                StopStatus::MaxIterations => EXIT_MAX_ITERS,
            }
        }
        Err(aborted) => {
            // Preserve whatever the run produced before failing.
            let _ = write_history(&cfg.output_dir, &aborted.history);
            let final_f = aborted
                .history
                .records
                .last()
                .map_or(aborted.history.initial_objective, |r| r.objective);
            let _ = write_summary(
                &cfg.output_dir,
                &cfg.problem,
                &aborted.history,
                None,
                Some(&aborted.error.to_string()),
                final_f,
                None,
                wall,
            );
            fail(&format!("{aborted}"))
        }
    }
}

fn fail(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    EXIT_ERROR
}

fn write_design_fields(
    dir: &Path,
    tag: &str,
    mesh: Mesh,
    eta: &CellField,
    point_fields: &[(&str, &simpl_core::field::NodalField)],
) -> Result<(), String> {
    let vtk = dir.join(format!("design_{tag}.vtk"));
    write_vtk(&vtk, "design", mesh, &[("eta", eta)], point_fields)
        .map_err(|e| format!("{}: {e}", vtk.display()))?;
    for c in 0..eta.channels() {
        let pgm = dir.join(format!("eta_{c}_{tag}.pgm"));
        write_pgm(&pgm, eta, c).map_err(|e| format!("{}: {e}", pgm.display()))?;
    }
    Ok(())
}

fn write_history(dir: &Path, history: &OptHistory) -> Result<(), String> {
    let path = dir.join("history.csv");
    let mut file =
        std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    history
        .write_csv(&mut file)
        .map_err(|e| format!("{}: {e}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn write_summary(
    dir: &Path,
    problem: &ProblemChoice,
    history: &OptHistory,
    status: Option<StopStatus>,
    error: Option<&str>,
    final_objective: f64,
    eta: Option<&CellField>,
    wall_seconds: f64,
) -> Result<(), String> {
    let status_text = match (status, error) {
        (Some(StopStatus::ToleranceMet), _) => "tolerance_met".to_string(),
        (Some(StopStatus::MaxIterations), _) => "max_iterations".to_string(),
        (None, Some(e)) => format!("aborted: {e}"),
        (None, None) => "unknown".to_string(),
    };
    let (nx, ny) = problem.grid();
    let mut text = String::new();
    text.push_str(&format!("problem = {}\n", problem.name()));
    text.push_str(&format!("grid = {nx}x{ny}\n"));
    text.push_str(&format!("status = {status_text}\n"));
    text.push_str(&format!("iterations = {}\n", history.records.len()));
    text.push_str(&format!(
        "initial_objective = {:.16e}\n",
        history.initial_objective
    ));
    text.push_str(&format!("final_objective = {final_objective:.16e}\n"));
    text.push_str(&format!(
        "initial_residual = {:.16e}\n",
        history.initial_residual
    ));
    if let Some(rec) = history.records.last() {
        text.push_str(&format!("final_residual = {:.16e}\n", rec.residual));
        text.push_str(&format!(
            "relative_residual = {:.16e}\n",
            rec.residual / history.initial_residual
        ));
    }
    if let Some(eta) = eta {
        if let Ok(s) = mean_phase_saturation(eta) {
            text.push_str(&format!("mean_saturation = {s:.6}\n"));
        }
    }
    text.push_str(&format!("wall_time_seconds = {wall_seconds:.3}\n"));
    let path = dir.join("summary");
    std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Run one of the independent reference computations and print its values.
pub fn oracle(name: &str) -> u8 {
    match name {
        "entropy-hexagon" => {
            let mut data = Vec::new();
            for i in 0..6 {
                let a = std::f64::consts::PI / 3.0 * i as f64;
                data.push(a.cos());
                data.push(a.sin());
            }
            let p = Polytope::new(2, &data).expect("hexagon");
            let eta = p.gradient_map(&[0.4, -0.7]).expect("interior point").point;
            let (lambda, value) =
                oracles::min_entropy_barycentric(2, &data, &eta).expect("oracle converges");
            println!("target point: ({:.12}, {:.12})", eta[0], eta[1]);
            println!("constrained-entropy oracle value: {value:.12}");
            println!("oracle barycentric coordinates: {lambda:.12?}");
            println!(
                "dual-route entropy for comparison: {:.12}",
                p.entropy_value(&eta, None).expect("interior")
            );
            EXIT_OK
        }
        "projection-bisection" => {
            // Saturated segment on |Ω| = 3 with mass bound 1.5.
            let p = Polytope::new(1, &[0.0, 1.0]).unwrap();
            let b = 1.5;
            let h = |mu: f64| {
                let pt = p.gradient_map(&[1.0 - mu]).unwrap().point[0];
                3.0 * pt - b
            };
            let mu = oracles::bisection_root(h, 0.0, 64.0, 1e-14, 300).expect("bracketed");
            println!("bisection multiplier for the saturated-segment projection: {mu:.12}");
            println!("projected design value: {:.12}", 1.0 / (1.0 + (-(1.0 - mu)).exp()));
            EXIT_OK
        }
        "dual-single-cell" => {
            let mesh = Mesh::new(1.0, 1.0, 1, 1).unwrap();
            let p = Polytope::new(2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
            let psi_half = CellField::constant(mesh, &[1.0, 2.0]);
            let c = GlobalConstraints::new(
                2,
                &[vec![1.0, 0.0], vec![0.0, 1.0]],
                &[0.3, 0.3],
            )
            .unwrap();
            let mu = oracles::dual_ascent_multipliers(&p, &psi_half, &c, 40_000);
            let shifted = [1.0 - mu[0], 2.0 - mu[1]];
            let eta = p.gradient_map(&shifted).unwrap().point;
            println!("projected-gradient dual multipliers: ({:.12}, {:.12})", mu[0], mu[1]);
            println!("projected design: ({:.12}, {:.12})", eta[0], eta[1]);
            EXIT_OK
        }
        "quadratic-kkt" => {
            let target = [0.3, 0.45, 0.55, 0.7];
            let eta = oracles::euclidean_box_mass_projection(&target, 0.25, 0.4);
            println!("constrained quadratic minimizer (4 cells, mass ≤ 0.4): {eta:.12?}");
            println!(
                "mass check: {:.12}",
                eta.iter().sum::<f64>() * 0.25
            );
            EXIT_OK
        }
        "voigt-rotation" => {
            let spec = simpl_core::materials::OrthoSpec::new(5.0, 0.5, 0.3, 4).unwrap();
            let c = simpl_core::materials::ortho_voigt(&spec);
            let r = oracles::voigt_rotate(&c.0, std::f64::consts::FRAC_PI_2);
            println!("reference orthotropic stiffness rotated by π/2:");
            for row in &r {
                println!("  [{:12.6} {:12.6} {:12.6}]", row[0], row[1], row[2]);
            }
            EXIT_OK
        }
        "binary-bregman" => {
            let y = 1.0 / (1.0 + (-1.0f64).exp());
            let d = oracles::binary_entropy_bregman(0.5, y);
            println!("binary-entropy Bregman divergence D(0.5, sigmoid(1)): {d:.12}");
            EXIT_OK
        }
        other => {
            eprintln!("error: unknown oracle '{other}'");
            eprintln!(
                "available: entropy-hexagon, projection-bisection, dual-single-cell, quadratic-kkt, voigt-rotation, binary-bregman"
            );
            EXIT_ERROR
        }
    }
}
