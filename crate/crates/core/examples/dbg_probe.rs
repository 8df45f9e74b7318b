// temporary: probe the initial state of the orthotropic benchmark
use simpl_core::field::CellField;
use simpl_core::optimizer::Objective;
use simpl_core::problems::{build_orthotropic_cantilever, OrthoConfig};
use simpl_core::projection::project_single;

fn main() {
    let cfg = OrthoConfig { nx: 96, ny: 32, ..OrthoConfig::default() };
    let mut built = build_orthotropic_cantilever(&cfg).unwrap();
    let mesh = built.problem.mesh();
    let psi0 = CellField::constant(mesh, &[0.0, 0.1, 0.0]);
    let proj = project_single(&built.polytope, &psi0, built.constraints.row(0), built.constraints.bound(0), 1e-10).unwrap();
    eprintln!("pre-projection mu = {:.4}", proj.multipliers[0]);
    let mut eta = CellField::zeros(mesh, 3);
    for e in 0..mesh.num_cells() {
        let b = built.polytope.gradient_map(proj.psi.cell(e)).unwrap();
        eta.cell_mut(e).copy_from_slice(&b.point);
    }
    eprintln!("eta0 cell0 = {:?}", eta.cell(0));
    let (f, g) = built.problem.evaluate(&eta).unwrap();
    let gmax = g.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let gmean = g.values().iter().map(|v| v.abs()).sum::<f64>() / g.values().len() as f64;
    eprintln!("F0 = {f:.6e}  |g|_inf = {gmax:.3e}  |g|_mean = {gmean:.3e}");
}
