//! Kouhia-Stenberg displacements: continuous piecewise linear first
//! component, Crouzeix-Raviart second component, clamped.

use crate::local_fe::{LocalElement, P1Coeffs, P1_MODES};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsDof {
    /// Hat function of an interior vertex, first component.
    Vertex(usize),
    /// Edge function of an interior edge, second component.
    Edge(usize),
}

#[derive(Clone, Debug)]
pub struct KsSpace {
    dofs: Vec<KsDof>,
    cell_dofs: Vec<[Option<usize>; 6]>,
    num_vertex_dofs: usize,
}

impl KsSpace {
    pub fn new(mesh: &Mesh) -> Self {
        let mut dofs = Vec::new();
        let mut vertex_dof = vec![None; mesh.num_vertices()];
        for (v, slot) in vertex_dof.iter_mut().enumerate() {
            if !mesh.is_boundary_vertex(v) {
                *slot = Some(dofs.len());
                dofs.push(KsDof::Vertex(v));
            }
        }
        let num_vertex_dofs = dofs.len();
        let mut edge_dof = vec![None; mesh.num_edges()];
        for (e, slot) in edge_dof.iter_mut().enumerate() {
            if !mesh.is_boundary_edge(e) {
                *slot = Some(dofs.len());
                dofs.push(KsDof::Edge(e));
            }
        }
        let cell_dofs = (0..mesh.num_triangles())
            .map(|t| {
                let tri = mesh.triangles()[t];
                let edges = mesh.edges_of_triangle(t);
                std::array::from_fn(|k| {
                    if k < 3 {
                        vertex_dof[tri[k]]
                    } else {
                        edge_dof[edges[k - 3]]
                    }
                })
            })
            .collect();
        KsSpace {
            dofs,
            cell_dofs,
            num_vertex_dofs,
        }
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn num_vertex_dofs(&self) -> usize {
        self.num_vertex_dofs
    }

    pub fn dof(&self, i: usize) -> KsDof {
        self.dofs[i]
    }

    /// Global index of each of the six local tests of a cell, `None` for
    /// tests attached to boundary entities.
    pub fn cell_dofs(&self, t: usize) -> [Option<usize>; 6] {
        self.cell_dofs[t]
    }

    /// Restriction of a member to one cell as linear field coefficients.
    pub fn cell_field(&self, t: usize, el: &LocalElement, coeffs: &[f64]) -> P1Coeffs {
        let mut out = [0.0; P1_MODES];
        for (k, dof) in self.cell_dofs[t].iter().enumerate() {
            if let Some(i) = dof {
                for m in 0..P1_MODES {
                    out[m] += coeffs[*i] * el.tests[(k, m)];
                }
            }
        }
        out
    }
}
