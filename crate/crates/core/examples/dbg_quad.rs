// temporary debug: constrained quadratic history
use simpl_core::field::{CellField, Mesh};
use simpl_core::optimizer::{simpl_run, OptOptions};
use simpl_core::polytope::Polytope;
use simpl_core::projection::GlobalConstraints;

fn main() {
    let mesh = Mesh::new(1.0, 1.0, 2, 2).unwrap();
    let target_vals = [0.3, 0.45, 0.55, 0.7];
    let target = CellField::from_values(mesh, 1, target_vals.to_vec()).unwrap();
    let mut problem = move |eta: &CellField| {
        let mut grad = eta.clone();
        let mut f = 0.0;
        for (g, t) in grad.values_mut().iter_mut().zip(target.values()) {
            *g -= t;
            f += 0.5 * *g * *g;
        }
        Ok((f * eta.mesh().cell_area(), grad))
    };
    let seg = Polytope::new(1, &[0.0, 1.0]).unwrap();
    let constraints = GlobalConstraints::new(1, &[vec![1.0]], &[0.4]).unwrap();
    let opts = OptOptions { tol_rel: 1e-11, tol_abs: 1e-11, max_iters: 100, ..OptOptions::default() };
    let res = simpl_run(&mut problem, &seg, &constraints, CellField::zeros(mesh, 1), &opts, None).unwrap();
    println!("status {:?} final eta {:?}", res.status, res.eta.values());
    for r in &res.history.records {
        println!("k={:3} F={:.6e} res={:.3e} alpha={:.3e} bt={} mu={:?} cv={:?}", r.k, r.objective, r.residual, r.alpha, r.backtracks, r.multipliers, r.constraint_values);
    }
}
