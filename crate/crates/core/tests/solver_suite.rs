//! Solver oracle suite: conjugate gradients against dense Gaussian
//! elimination on genuinely assembled finite-element systems, and an
//! independent recomputation of the reported residual.

mod common;

use common::*;
use linesource::assembly::{apply_dirichlet, assemble_stiffness, DirichletBc};
use linesource::mesh::{Mesh, MeshParams};
use linesource::quadrature::QuadratureSpec;
use linesource::solver::{cg_solve, dense_solve, CgOptions, CsrMatrix};
use rand::Rng;

/// Assembles the Dirichlet-eliminated stiffness system of a box mesh with
/// a seeded random right-hand side.
fn assembled_system(mesh: &Mesh, seed: u64) -> (CsrMatrix, Vec<f64>) {
    let quad = QuadratureSpec::default();
    let kappa = |p: linesource::geometry::Point3| 1.0 + 0.5 * p.x + 0.25 * p.y * p.z;
    let mut a = assemble_stiffness(mesh, &kappa, &quad).expect("assembly");
    let mut r = rng(seed);
    let mut b: Vec<f64> = (0..mesh.n_nodes()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let bc = DirichletBc::from_function(mesh, &[0, 1, 2, 3, 4, 5], &|p| {
        Ok(0.25 * p.x - 0.125 * p.y + 0.0625 * p.z)
    })
    .expect("boundary data");
    apply_dirichlet(&mut a, &mut b, &bc);
    (a, b)
}

fn dense_of(a: &CsrMatrix) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            d[i][*j as usize] = *v;
        }
    }
    d
}

#[test]
fn cg_matches_dense_elimination_on_assembled_systems() {
    // Tet 11^3 gives 1728 unknowns, past the 1500 mark; the prism case adds
    // the other element kind at a medium size.
    let cases = [
        ("tet", Mesh::build_box_tet(&MeshParams::unit(11, 11)).unwrap(), 701u64),
        ("prism", Mesh::build_box_prism(&MeshParams::unit(7, 9)).unwrap(), 702u64),
    ];
    for (name, mesh, seed) in cases {
        let n = mesh.n_nodes();
        let (a, b) = assembled_system(&mesh, seed);
        let dense = dense_of(&a);
        let x_dense = dense_solve(&dense, &b).expect("dense solve");
        let (x_cg, stats) = cg_solve(
            &a,
            &b,
            &CgOptions {
                rel_tol: 1e-12,
                max_iter: None,
            },
        )
        .expect("cg converged");
        let scale = x_dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_diff = x_cg
            .iter()
            .zip(&x_dense)
            .fold(0.0f64, |m, (c, d)| m.max((c - d).abs()));
        assert!(
            max_diff < 1e-8 * scale.max(1.0),
            "{name} (n = {n}): max |x_cg - x_dense| = {max_diff:.3e}, scale {scale:.3e}"
        );
        assert!(
            stats.relative_residual <= 1e-12,
            "{name}: reported residual {:.3e}",
            stats.relative_residual
        );
    }
}

#[test]
fn reported_residual_matches_an_independent_recomputation() {
    let mesh = Mesh::build_box_tet(&MeshParams::unit(8, 8)).unwrap();
    let (a, b) = assembled_system(&mesh, 703);
    let (x, stats) = cg_solve(&a, &b, &CgOptions::default()).expect("cg converged");
    let n = a.n();
    let mut r = b.clone();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut ax = 0.0;
        for (j, v) in cols.iter().zip(vals) {
            ax += v * x[*j as usize];
        }
        r[i] -= ax;
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let recomputed = rn / bn;
    assert!(
        recomputed <= 1e-10,
        "true relative residual {recomputed:.3e} exceeds the solve tolerance"
    );
    let diff = (recomputed - stats.relative_residual).abs();
    assert!(
        diff <= 1e-14 + 0.05 * recomputed.max(stats.relative_residual),
        "reported {:.6e} vs recomputed {recomputed:.6e}",
        stats.relative_residual
    );
}
