// temporary profiling of the benchmark building blocks
use simpl_core::field::CellField;
use simpl_core::optimizer::Objective;
use simpl_core::problems::{build_isotropic_cantilever, IsoConfig};
use simpl_core::projection::project_multi;
use std::time::Instant;

fn main() {
    let cfg = IsoConfig { nx: 96, ny: 32, ..IsoConfig::default() };
    let t = Instant::now();
    let mut built = build_isotropic_cantilever(&cfg).unwrap();
    eprintln!("build (incl filter factorization): {:?}", t.elapsed());

    let mesh = built.problem.mesh();
    let psi = CellField::zeros(mesh, 4);

    let t = Instant::now();
    let proj = project_multi(&built.polytope, &psi, &built.constraints, 1e-10, 500);
    match &proj {
        Ok(p) => eprintln!("project_multi on uniform: {:?} sweeps={} mu={:?}", t.elapsed(), p.sweeps, p.multipliers),
        Err(e) => eprintln!("project_multi FAILED after {:?}: {e}", t.elapsed()),
    }

    let eta = {
        let mut eta = CellField::zeros(mesh, 4);
        for e in 0..mesh.num_cells() {
            let b = built.polytope.gradient_map(psi.cell(e)).unwrap();
            eta.cell_mut(e).copy_from_slice(&b.point);
        }
        eta
    };
    let t = Instant::now();
    let (f, _g) = built.problem.evaluate(&eta).unwrap();
    eprintln!("objective evaluation: {:?}  F={f:.6e}", t.elapsed());
    let t = Instant::now();
    let _ = built.problem.evaluate(&eta).unwrap();
    eprintln!("objective evaluation (2nd): {:?}", t.elapsed());
}
