//! Locally supported basis of the stress space: piecewise enriched linear
//! symmetric tensors whose pairing with every Kouhia-Stenberg displacement
//! vanishes.
//!
//! Functions come in four groups, in this order:
//! 1. one single-cell vertex dual per (boundary vertex, incident cell);
//! 2. for each interior vertex with cells `T_1..T_m` in cyclic order, the
//!    `m - 1` differences of vertex duals on adjacent cells;
//! 3. one single-cell edge dual per boundary edge;
//! 4. for each interior edge, the difference of the edge duals of its two
//!    cells.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fe_spaces::ks::{KsDof, KsSpace};
use crate::local_fe::{LocalElement, StressCoeffs, LOCAL_TOL, STRESS_MODES};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    BoundaryVertex,
    InteriorVertex,
    BoundaryEdge,
    InteriorEdge,
}

#[derive(Clone, Debug)]
pub struct StressFunction {
    pub group: Group,
    /// Vertex or edge index owning the function.
    pub entity: usize,
    /// `(cell, coefficients over the six local dual functions)`.
    pub pieces: Vec<(usize, StressCoeffs)>,
}

#[derive(Clone, Debug)]
pub struct StressBasis {
    functions: Vec<StressFunction>,
    /// Per cell: `(function index, stress-mode coefficients)`, sorted by
    /// function index.
    cell_modes: Vec<Vec<(usize, StressCoeffs)>>,
    fallback_entities: usize,
}

fn unit(s: usize) -> StressCoeffs {
    let mut e = [0.0; STRESS_MODES];
    e[s] = 1.0;
    e
}

/// Candidate single-cell duals of one entity: `(cell, local dual index)`.
type Candidates = Vec<(usize, usize)>;

impl StressBasis {
    pub fn build(mesh: &Mesh, ks: &KsSpace, locals: &[LocalElement]) -> Result<Self> {
        let mut functions = Vec::new();
        let mut fallback_entities = 0;
        let vertex_candidates = |v: usize, cells: Vec<usize>| -> Candidates {
            cells
                .into_iter()
                .map(|t| (t, mesh.local_vertex(t, v).expect("incident cell")))
                .collect()
        };
        let edge_candidates = |e: usize| -> Candidates {
            mesh.triangles_of_edge(e)
                .iter()
                .map(|&t| (t, 3 + mesh.local_edge(t, e).expect("incident cell")))
                .collect()
        };

        for v in (0..mesh.num_vertices()).filter(|&v| mesh.is_boundary_vertex(v)) {
            let mut cells = mesh.triangles_of_vertex(v).to_vec();
            cells.sort_unstable();
            for (t, s) in vertex_candidates(v, cells) {
                functions.push(StressFunction {
                    group: Group::BoundaryVertex,
                    entity: v,
                    pieces: vec![(t, unit(s))],
                });
            }
        }
        for v in (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)) {
            let cand = vertex_candidates(v, mesh.cyclic_triangles_of_vertex(v));
            let (fns, fallback) = constrained_functions(
                ks,
                locals,
                &cand,
                Group::InteriorVertex,
                v,
                KsDof::Vertex(v),
            )?;
            fallback_entities += fallback as usize;
            functions.extend(fns);
        }
        for e in (0..mesh.num_edges()).filter(|&e| mesh.is_boundary_edge(e)) {
            let (t, s) = edge_candidates(e)[0];
            functions.push(StressFunction {
                group: Group::BoundaryEdge,
                entity: e,
                pieces: vec![(t, unit(s))],
            });
        }
        for e in (0..mesh.num_edges()).filter(|&e| !mesh.is_boundary_edge(e)) {
            let (fns, fallback) = constrained_functions(
                ks,
                locals,
                &edge_candidates(e),
                Group::InteriorEdge,
                e,
                KsDof::Edge(e),
            )?;
            fallback_entities += fallback as usize;
            functions.extend(fns);
        }

        let basis =
            Self::from_functions(mesh.num_triangles(), locals, functions, fallback_entities);
        let (residual, scale) = adjoint_residual(ks, locals, &basis);
        if residual > LOCAL_TOL * scale {
            return Err(Error::Construction {
                entity: "global adjoint identity".into(),
                residual,
            });
        }
        Ok(basis)
    }

    fn from_functions(
        nt: usize,
        locals: &[LocalElement],
        functions: Vec<StressFunction>,
        fallback_entities: usize,
    ) -> Self {
        let mut cell_modes = vec![Vec::new(); nt];
        for (f, func) in functions.iter().enumerate() {
            for (t, dual_coeffs) in &func.pieces {
                let el = &locals[*t];
                let mut modes = [0.0; STRESS_MODES];
                for (s, c) in dual_coeffs.iter().enumerate() {
                    if *c != 0.0 {
                        for (r, m) in modes.iter_mut().enumerate() {
                            *m += c * el.dual[(r, s)];
                        }
                    }
                }
                cell_modes[*t].push((f, modes));
            }
        }
        StressBasis {
            functions,
            cell_modes,
            fallback_entities,
        }
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[StressFunction] {
        &self.functions
    }

    pub fn cell_functions(&self, t: usize) -> &[(usize, StressCoeffs)] {
        &self.cell_modes[t]
    }

    pub fn num_cells(&self) -> usize {
        self.cell_modes.len()
    }

    /// Number of entities whose functions came from the nullspace fallback
    /// rather than adjacent-pair differences.
    pub fn fallback_entities(&self) -> usize {
        self.fallback_entities
    }

    pub fn count_group(&self, g: Group) -> usize {
        self.functions.iter().filter(|f| f.group == g).count()
    }

    /// Stress-mode coefficients of a member on one cell.
    pub fn cell_stress(&self, t: usize, coeffs: &[f64]) -> StressCoeffs {
        let mut out = [0.0; STRESS_MODES];
        for (f, modes) in &self.cell_modes[t] {
            for r in 0..STRESS_MODES {
                out[r] += coeffs[*f] * modes[r];
            }
        }
        out
    }

    /// Copy with one mode coefficient of one function on one cell shifted;
    /// used to calibrate the adjoint detector.
    pub fn perturbed(&self, function: usize, cell: usize, mode: usize, delta: f64) -> Self {
        let mut out = self.clone();
        for (f, modes) in out.cell_modes[cell].iter_mut() {
            if *f == function {
                modes[mode] += delta;
            }
        }
        out
    }
}

/// Functions of one interior entity. Returns them with a flag telling
/// whether the nullspace fallback was used.
fn constrained_functions(
    ks: &KsSpace,
    locals: &[LocalElement],
    cand: &Candidates,
    group: Group,
    entity: usize,
    own: KsDof,
) -> Result<(Vec<StressFunction>, bool)> {
    // Constraint block: rows are the global displacement tests touching the
    // candidate cells, columns the candidates.
    let mut rows: Vec<usize> = cand
        .iter()
        .flat_map(|&(t, _)| ks.cell_dofs(t).into_iter().flatten())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let mut block: DMatrix<f64> = DMatrix::zeros(rows.len(), cand.len());
    for (j, &(t, s)) in cand.iter().enumerate() {
        let el = &locals[t];
        let dual = el.dual_function(s);
        let tests = el.geometry.test_functions();
        for (k, dof) in ks.cell_dofs(t).iter().enumerate() {
            if let Some(i) = dof {
                let row = rows.binary_search(i).expect("row collected above");
                block[(row, j)] += el.pair(&dual, &tests[k]);
            }
        }
    }
    let own_row =
        rows.iter()
            .position(|&i| ks.dof(i) == own)
            .ok_or_else(|| Error::Construction {
                entity: format!("{group:?} {entity}"),
                residual: f64::NAN,
            })?;
    let shortcut = (0..rows.len()).all(|r| {
        let want = if r == own_row { 1.0 } else { 0.0 };
        (0..cand.len()).all(|j| (block[(r, j)] - want).abs() <= LOCAL_TOL)
    });

    let coefficient_sets: Vec<Vec<f64>> = if shortcut {
        (0..cand.len() - 1)
            .map(|i| {
                let mut c = vec![0.0; cand.len()];
                c[i] = 1.0;
                c[i + 1] = -1.0;
                c
            })
            .collect()
    } else {
        nullspace_columns(&block)
    };

    let mut out = Vec::with_capacity(coefficient_sets.len());
    for c in coefficient_sets {
        let residual = (&block * nalgebra::DVector::from_vec(c.clone())).amax();
        if residual > LOCAL_TOL {
            return Err(Error::Construction {
                entity: format!("{group:?} {entity}"),
                residual,
            });
        }
        let pieces = cand
            .iter()
            .zip(&c)
            .filter(|(_, &v)| v.abs() > 1e-14)
            .map(|(&(t, s), &v)| {
                let mut d = [0.0; STRESS_MODES];
                d[s] = v;
                (t, d)
            })
            .collect();
        out.push(StressFunction {
            group,
            entity,
            pieces,
        });
    }
    Ok((out, !shortcut))
}

/// Orthonormal nullspace vectors of a small dense matrix, ordered by
/// singular value and then by the first cell carrying weight.
fn nullspace_columns(block: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = block.ncols();
    let gram = block.transpose() * block;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= (LOCAL_TOL * LOCAL_TOL) * scale)
        .collect();
    let lead = |i: usize| {
        (0..n)
            .position(|k| eig.eigenvectors[(k, i)].abs() > 1e-12)
            .unwrap_or(n)
    };
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .total_cmp(&eig.eigenvalues[b].abs())
            .then(lead(a).cmp(&lead(b)))
    });
    idx.into_iter()
        .map(|i| (0..n).map(|k| eig.eigenvectors[(k, i)]).collect())
        .collect()
}

/// Matrix of pairings `(div tau_i, v_j) + (tau_i, eps_h v_j)` between every
/// stress basis function and every displacement basis function.
pub fn adjoint_matrix(
    ks: &KsSpace,
    locals: &[LocalElement],
    basis: &StressBasis,
) -> (SparseMatrix, f64) {
    let mut triplets = Vec::new();
    let mut scale: f64 = 0.0;
    for (t, el) in locals.iter().enumerate() {
        let tests = el.geometry.test_functions();
        let dofs = ks.cell_dofs(t);
        for (f, modes) in basis.cell_functions(t) {
            for (k, dof) in dofs.iter().enumerate() {
                if let Some(i) = dof {
                    let v = el.pair(modes, &tests[k]);
                    scale = scale.max(v.abs());
                    triplets.push((*f, *i, v));
                }
            }
        }
    }
    (
        SparseMatrix::from_triplets(basis.dim(), ks.dim(), triplets),
        scale.max(f64::MIN_POSITIVE),
    )
}

/// Largest pairing entry and the scale of the individual cell
/// contributions.
pub fn adjoint_residual(ks: &KsSpace, locals: &[LocalElement], basis: &StressBasis) -> (f64, f64) {
    let (m, scale) = adjoint_matrix(ks, locals, basis);
    (m.max_abs(), scale)
}
