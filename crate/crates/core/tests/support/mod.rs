//! Conforming P1 displacement discretization on both components, used as a
//! locking-prone reference.

#![allow(dead_code)]

use hrfem::elasticity::{LameParams, ManufacturedCase, Sym2};
use hrfem::mesh::Mesh;
use hrfem::quadrature;
use nalgebra::{DMatrix, DVector};

/// L2 errors of the displacement and of the stress `C eps(u_h)`.
#[derive(Clone, Copy, Debug)]
pub struct P1Errors {
    pub u: f64,
    pub sigma: f64,
}

/// Gradients of the three barycentric coordinates and the cell area.
fn barycentric_gradients(v: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(v[j][1] - v[k][1]) / det, (v[k][0] - v[j][0]) / det];
    }
    (g, 0.5 * det.abs())
}

/// Strain of the vector basis function `phi_i e_c`.
fn basis_strain(g: &[f64; 2], c: usize) -> Sym2 {
    let mut grad = [[0.0; 2]; 2];
    grad[c] = *g;
    Sym2::sym_grad(grad)
}

pub fn solve_p1p1(mesh: &Mesh, case: &ManufacturedCase) -> P1Errors {
    let params: LameParams = case.params;
    let nv = mesh.num_vertices();
    let mut index = vec![usize::MAX; nv];
    let mut n = 0;
    for v in 0..nv {
        if !mesh.is_boundary_vertex(v) {
            index[v] = n;
            n += 1;
        }
    }
    let rule = quadrature::rule(10).expect("quadrature rule");
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; 2 * n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.triangle_vertices(t);
        let (g, area) = barycentric_gradients(&v);
        let pts = rule.map_points(&v);
        for i in 0..3 {
            if index[tri[i]] == usize::MAX {
                continue;
            }
            for ci in 0..2 {
                let row = 2 * index[tri[i]] + ci;
                let ei = basis_strain(&g[i], ci);
                for j in 0..3 {
                    if index[tri[j]] == usize::MAX {
                        continue;
                    }
                    for cj in 0..2 {
                        let ej = basis_strain(&g[j], cj);
                        let a = area * params.elasticity(ej).ddot(ei);
                        triplets.push((row, 2 * index[tri[j]] + cj, a));
                    }
                }
                let load: f64 = pts
                    .iter()
                    .zip(&rule.points)
                    .zip(&rule.weights)
                    .map(|((&p, l), w)| w * case.f(p)[ci] * l[i])
                    .sum();
                rhs[row] -= area * load;
            }
        }
    }
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    for (i, j, a) in triplets {
        k[(i, j)] += a;
    }
    let x = k
        .cholesky()
        .expect("P1 stiffness is SPD")
        .solve(&DVector::from_vec(rhs));
    let nodal = |vert: usize| -> [f64; 2] {
        match index[vert] {
            usize::MAX => [0.0, 0.0],
            i => [x[2 * i], x[2 * i + 1]],
        }
    };
    let (mut eu, mut es) = (0.0, 0.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let v = mesh.triangle_vertices(t);
        let (g, _) = barycentric_gradients(&v);
        let vals = tri.map(nodal);
        let mut grad = [[0.0; 2]; 2];
        for i in 0..3 {
            for c in 0..2 {
                grad[c][0] += vals[i][c] * g[i][0];
                grad[c][1] += vals[i][c] * g[i][1];
            }
        }
        let sigma_h = params.elasticity(Sym2::sym_grad(grad));
        let c = centroid(&v);
        eu += rule.integrate(&v, |p| {
            let l =
                [0, 1, 2].map(|i| 1.0 / 3.0 + g[i][0] * (p[0] - c[0]) + g[i][1] * (p[1] - c[1]));
            let uh = [0, 1].map(|k| (0..3).map(|i| l[i] * vals[i][k]).sum::<f64>());
            let u = case.u(p);
            (u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2)
        });
        es += rule.integrate(&v, |p| (case.sigma(p) - sigma_h).norm_sq());
    }
    P1Errors {
        u: eu.sqrt(),
        sigma: es.sqrt(),
    }
}

fn centroid(v: &[[f64; 2]; 3]) -> [f64; 2] {
    [
        (v[0][0] + v[1][0] + v[2][0]) / 3.0,
        (v[0][1] + v[1][1] + v[2][1]) / 3.0,
    ]
}
