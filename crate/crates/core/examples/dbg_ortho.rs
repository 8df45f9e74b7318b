// temporary debug: orthotropic benchmark at desk scale with live output
use simpl_core::optimizer::{simpl_run, OptOptions};
use simpl_core::problems::{build_orthotropic_cantilever, mean_phase_saturation, OrthoConfig};

fn main() {
    let t0 = std::time::Instant::now();
    let cfg = OrthoConfig { nx: 96, ny: 32, ..OrthoConfig::default() };
    let mut built = build_orthotropic_cantilever(&cfg).unwrap();
    let opts = OptOptions { tol_rel: 1e-8, max_iters: 200, alpha0: 1e-6, latent_bound: 300.0, ..OptOptions::default() };
    let mut res0 = f64::NAN;
    let mut observer = |rec: &simpl_core::optimizer::IterRecord, _eta: &simpl_core::field::CellField| {
        if rec.k == 0 { res0 = rec.residual; }
        eprintln!(
            "k={:3} F={:.6e} res={:.3e} rel={:.3e} a={:.3e} bt={}{} mu={:.3e} cv={:.4} minl={:.1e} t={:.1?}",
            rec.k, rec.objective, rec.residual, rec.residual / res0,
            rec.alpha, rec.backtracks, if rec.backtrack_exhausted { "!" } else { "" },
            rec.multipliers[0], rec.constraint_values[0],
            rec.min_barycentric, t0.elapsed()
        );
    };
    let res = simpl_run(
        &mut built.problem,
        &built.polytope,
        &built.constraints,
        built.initial_psi,
        &opts,
        Some(&mut observer),
    );
    match res {
        Ok(r) => {
            eprintln!("status {:?} F={:.6e} iters={} wall={:?}", r.status, r.objective, r.history.records.len(), t0.elapsed());
            eprintln!("mean saturation: {:.4}", mean_phase_saturation(&r.eta).unwrap());
        }
        Err(e) => eprintln!("ABORTED after {:?}: {e}", t0.elapsed()),
    }
}
