//! Per-cell shape spaces and the local dual basis.
//!
//! All polynomials live in coordinates shifted to the cell centroid,
//! `(xi, eta) = (x - cx, y - cy)`.
//!
//! Stress modes, in order: `E11`, `E12`, `E22`, the shear modes
//! `[[0, xi], [xi, 0]]` and `[[0, eta], [eta, 0]]`, and the quadratic shear
//! mode `[[0, xi^2 - eta^2], [., 0]]`. The first five span the reduced space.
//!
//! Vector fields are stored as six coefficients over the linear modes
//! `(1,0), (0,1), (xi,0), (eta,0), (0,xi), (0,eta)`.
//!
//! The six local displacement tests are the three vertex hat functions in
//! the first component followed by the three edge functions `1 - 2 l_k` in
//! the second component (local edge `k` is opposite local vertex `k`).

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector6};

use crate::elasticity::{LameParams, Sym2};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{self, QuadRule};

pub const STRESS_MODES: usize = 6;
pub const REDUCED_STRESS_MODES: usize = 5;
pub const P1_MODES: usize = 6;
/// Index of the quadratic shear mode.
pub const QUADRATIC_MODE: usize = 5;
/// Degree of the rule used for every polynomial cell integral.
pub const ASSEMBLY_DEGREE: usize = 4;
/// Relative tolerance for local algebra checks.
pub const LOCAL_TOL: f64 = 1e-10;

/// Linear vector field coefficients over the six modes.
pub type P1Coeffs = [f64; P1_MODES];
/// Stress coefficients over the six modes.
pub type StressCoeffs = [f64; STRESS_MODES];

const fn unit(i: usize) -> P1Coeffs {
    let mut e = [0.0; P1_MODES];
    e[i] = 1.0;
    e
}

/// Strain-reduced linear fields: constants, `(xi, 0)`, `(eta, xi)`, `(0, eta)`.
pub const VEPS_MODES: [P1Coeffs; 5] = [
    unit(0),
    unit(1),
    unit(2),
    [0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
    unit(5),
];

pub const P0_MODES: [P1Coeffs; 2] = [unit(0), unit(1)];

/// Rigid motions: translations and the rotation `(eta, -xi)`.
pub const RIGID_MODES: [P1Coeffs; 3] = [unit(0), unit(1), [0.0, 0.0, 0.0, 1.0, -1.0, 0.0]];

pub fn stress_mode(r: usize, q: Point) -> Sym2 {
    let (xi, eta) = (q[0], q[1]);
    match r {
        0 => Sym2::new(1.0, 0.0, 0.0),
        1 => Sym2::new(0.0, 1.0, 0.0),
        2 => Sym2::new(0.0, 0.0, 1.0),
        3 => Sym2::new(0.0, xi, 0.0),
        4 => Sym2::new(0.0, eta, 0.0),
        5 => Sym2::new(0.0, xi * xi - eta * eta, 0.0),
        _ => panic!("stress mode index {r} out of range"),
    }
}

pub fn stress_mode_div(r: usize, q: Point) -> [f64; 2] {
    match r {
        0..=2 => [0.0, 0.0],
        3 => [0.0, 1.0],
        4 => [1.0, 0.0],
        5 => [-2.0 * q[1], 2.0 * q[0]],
        _ => panic!("stress mode index {r} out of range"),
    }
}

pub fn p1_mode(m: usize, q: Point) -> [f64; 2] {
    match m {
        0 => [1.0, 0.0],
        1 => [0.0, 1.0],
        2 => [q[0], 0.0],
        3 => [q[1], 0.0],
        4 => [0.0, q[0]],
        5 => [0.0, q[1]],
        _ => panic!("P1 mode index {m} out of range"),
    }
}

pub fn p1_mode_eps(m: usize) -> Sym2 {
    match m {
        0 | 1 => Sym2::ZERO,
        2 => Sym2::new(1.0, 0.0, 0.0),
        3 | 4 => Sym2::new(0.0, 0.5, 0.0),
        5 => Sym2::new(0.0, 0.0, 1.0),
        _ => panic!("P1 mode index {m} out of range"),
    }
}

pub fn eval_stress(a: &StressCoeffs, q: Point) -> Sym2 {
    let (xi, eta) = (q[0], q[1]);
    Sym2::new(
        a[0],
        a[1] + a[3] * xi + a[4] * eta + a[5] * (xi * xi - eta * eta),
        a[2],
    )
}

pub fn eval_stress_div(a: &StressCoeffs, q: Point) -> [f64; 2] {
    [a[4] - 2.0 * a[5] * q[1], a[3] + 2.0 * a[5] * q[0]]
}

pub fn eval_p1(c: &P1Coeffs, q: Point) -> [f64; 2] {
    [
        c[0] + c[2] * q[0] + c[3] * q[1],
        c[1] + c[4] * q[0] + c[5] * q[1],
    ]
}

/// Constant strain of a linear field.
pub fn p1_strain(c: &P1Coeffs) -> Sym2 {
    Sym2::new(c[2], 0.5 * (c[3] + c[4]), c[5])
}

/// Linear field in the strain-reduced space with the given constant part
/// and strain.
pub fn veps_from_strain(constant: [f64; 2], eps: Sym2) -> P1Coeffs {
    [constant[0], constant[1], eps.xx, eps.xy, eps.xy, eps.yy]
}

/// Removes the rotation about the centroid.
pub fn drop_rotation(c: &P1Coeffs) -> P1Coeffs {
    let s = 0.5 * (c[3] + c[4]);
    [c[0], c[1], c[2], s, s, c[5]]
}

/// Stress coefficients of a constant tensor.
pub fn constant_stress(s: Sym2) -> StressCoeffs {
    [s.xx, s.xy, s.yy, 0.0, 0.0, 0.0]
}

#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub centroid: Point,
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(vertices: [Point; 3]) -> Result<Self> {
        let [a, b, c] = vertices;
        let twice = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if !(twice > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "cell {vertices:?} is degenerate or clockwise"
            )));
        }
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let mut grad_bary = [[0.0; 2]; 3];
        for (k, g) in grad_bary.iter_mut().enumerate() {
            let p = vertices[(k + 1) % 3];
            let q = vertices[(k + 2) % 3];
            *g = [(p[1] - q[1]) / twice, (q[0] - p[0]) / twice];
        }
        Ok(CellGeometry {
            vertices,
            centroid,
            area: 0.5 * twice,
            grad_bary,
        })
    }

    pub fn from_mesh(mesh: &Mesh, t: usize) -> Self {
        CellGeometry::new(mesh.triangle_vertices(t)).expect("mesh cells are positively oriented")
    }

    pub fn to_local(&self, p: Point) -> Point {
        [p[0] - self.centroid[0], p[1] - self.centroid[1]]
    }

    /// Quadrature points in local coordinates together with `|T| * weight`.
    pub fn local_points(&self, rule: &QuadRule) -> Vec<(Point, f64)> {
        rule.map_points(&self.vertices)
            .into_iter()
            .zip(&rule.weights)
            .map(|(p, &w)| (self.to_local(p), w * self.area))
            .collect()
    }

    /// Quadrature points in global coordinates, local coordinates and
    /// scaled weights.
    pub fn points(&self, rule: &QuadRule) -> Vec<(Point, Point, f64)> {
        rule.map_points(&self.vertices)
            .into_iter()
            .zip(&rule.weights)
            .map(|(p, &w)| (p, self.to_local(p), w * self.area))
            .collect()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let q = self.to_local(p);
        (0..3).all(|k| {
            let g = self.grad_bary[k];
            1.0 / 3.0 + g[0] * q[0] + g[1] * q[1] >= -tol
        })
    }

    /// Local displacement tests as linear field coefficients.
    pub fn test_functions(&self) -> [P1Coeffs; 6] {
        let third = 1.0 / 3.0;
        let mut out = [[0.0; P1_MODES]; 6];
        for k in 0..3 {
            let g = self.grad_bary[k];
            out[k] = [third, 0.0, g[0], g[1], 0.0, 0.0];
            out[3 + k] = [0.0, third, 0.0, 0.0, -2.0 * g[0], -2.0 * g[1]];
        }
        out
    }
}

/// Cell data shared by every space and form: geometry, the local pairing,
/// the dual basis and the polynomial Gram matrices of the modes.
#[derive(Clone, Debug)]
pub struct LocalElement {
    pub geometry: CellGeometry,
    /// `pairing[(r, m)] = (div t_r, e_m) + (t_r, eps e_m)` for stress mode
    /// `r` and linear mode `m`.
    pub pairing: Matrix6<f64>,
    /// Rows are the local displacement tests in linear-mode coefficients.
    pub tests: Matrix6<f64>,
    /// Column `s` holds the stress-mode coefficients of the dual function
    /// of local test `s`: vertex duals first, then edge duals.
    pub dual: Matrix6<f64>,
    /// `(t_r, t_s)`.
    pub stress_mass: Matrix6<f64>,
    /// `(t_r^D, t_s^D)`.
    pub dev_gram: Matrix6<f64>,
    /// `(tr t_r, tr t_s)`.
    pub trace_gram: Matrix6<f64>,
    /// `(div t_r, div t_s)`.
    pub div_gram: Matrix6<f64>,
    /// `(div t_r, e_m)`.
    pub div_moment: Matrix6<f64>,
    /// `(e_m, e_n)`.
    pub p1_mass: Matrix6<f64>,
    /// Cell average of each stress mode.
    pub mode_mean: [Sym2; STRESS_MODES],
}

impl LocalElement {
    pub fn new(geometry: CellGeometry) -> Result<Self> {
        let rule = quadrature::rule(ASSEMBLY_DEGREE)?;
        let pts = geometry.local_points(rule);
        let mut pairing = Matrix6::zeros();
        let mut stress_mass = Matrix6::zeros();
        let mut dev_gram = Matrix6::zeros();
        let mut trace_gram = Matrix6::zeros();
        let mut div_gram = Matrix6::zeros();
        let mut div_moment = Matrix6::zeros();
        let mut p1_mass = Matrix6::zeros();
        let mut mode_mean = [Sym2::ZERO; STRESS_MODES];
        for &(q, w) in &pts {
            let modes: [Sym2; 6] = std::array::from_fn(|r| stress_mode(r, q));
            let divs: [[f64; 2]; 6] = std::array::from_fn(|r| stress_mode_div(r, q));
            let vecs: [[f64; 2]; 6] = std::array::from_fn(|m| p1_mode(m, q));
            for r in 0..6 {
                mode_mean[r] += (w / geometry.area) * modes[r];
                for s in 0..6 {
                    stress_mass[(r, s)] += w * modes[r].ddot(modes[s]);
                    dev_gram[(r, s)] += w * modes[r].deviatoric().ddot(modes[s].deviatoric());
                    trace_gram[(r, s)] += w * modes[r].trace() * modes[s].trace();
                    div_gram[(r, s)] += w * (divs[r][0] * divs[s][0] + divs[r][1] * divs[s][1]);
                    div_moment[(r, s)] += w * (divs[r][0] * vecs[s][0] + divs[r][1] * vecs[s][1]);
                    p1_mass[(r, s)] += w * (vecs[r][0] * vecs[s][0] + vecs[r][1] * vecs[s][1]);
                    pairing[(r, s)] += w * modes[r].ddot(p1_mode_eps(s));
                }
            }
        }
        pairing += div_moment;
        let tests = Matrix6::from_fn(|s, m| geometry.test_functions()[s][m]);
        let local: Matrix6<f64> = pairing * tests.transpose();
        let sv = local.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-12 * smax) {
            return Err(Error::SingularCell { cell: usize::MAX });
        }
        let dual = local
            .transpose()
            .try_inverse()
            .ok_or(Error::SingularCell { cell: usize::MAX })?;
        Ok(LocalElement {
            geometry,
            pairing,
            tests,
            dual,
            stress_mass,
            dev_gram,
            trace_gram,
            div_gram,
            div_moment,
            p1_mass,
            mode_mean,
        })
    }

    /// Local pairing between stress modes and the six local tests.
    pub fn test_pairing(&self) -> Matrix6<f64> {
        self.pairing * self.tests.transpose()
    }

    /// Largest entry of `M^T C - I`.
    pub fn dual_residual(&self) -> f64 {
        (self.test_pairing().transpose() * self.dual - Matrix6::identity()).amax()
    }

    pub fn dual_function(&self, s: usize) -> StressCoeffs {
        std::array::from_fn(|r| self.dual[(r, s)])
    }

    pub fn pair(&self, a: &StressCoeffs, v: &P1Coeffs) -> f64 {
        (Vector6::from(*a).transpose() * self.pairing * Vector6::from(*v))[(0, 0)]
    }

    pub fn div_pair(&self, a: &StressCoeffs, v: &P1Coeffs) -> f64 {
        (Vector6::from(*a).transpose() * self.div_moment * Vector6::from(*v))[(0, 0)]
    }

    /// Compliance Gram `(A t_r, t_s)`.
    pub fn compliance_gram(&self, params: &LameParams) -> Matrix6<f64> {
        params.deviatoric_weight() * self.dev_gram + params.trace_weight() * self.trace_gram
    }

    /// Compliance Gram of the cell averages `(A P0 t_r, P0 t_s)`.
    pub fn projected_compliance_gram(&self, params: &LameParams) -> Matrix6<f64> {
        let area = self.geometry.area;
        Matrix6::from_fn(|r, s| area * params.compliance_form(self.mode_mean[r], self.mode_mean[s]))
    }

    pub fn mean_stress(&self, a: &StressCoeffs) -> Sym2 {
        let mut s = Sym2::ZERO;
        for r in 0..STRESS_MODES {
            s += a[r] * self.mode_mean[r];
        }
        s
    }

    pub fn trace_integral(&self, a: &StressCoeffs) -> f64 {
        let mut total = 0.0;
        for r in 0..STRESS_MODES {
            total += a[r] * self.mode_mean[r].trace();
        }
        total * self.geometry.area
    }

    /// `(g, e_m)` for a vector field `g` using a rule of the given degree.
    pub fn load_moments(&self, degree: usize, g: impl Fn(Point) -> [f64; 2]) -> Result<P1Coeffs> {
        let rule = quadrature::rule(degree)?;
        let mut out = [0.0; P1_MODES];
        for (p, q, w) in self.geometry.points(rule) {
            let v = g(p);
            for (m, o) in out.iter_mut().enumerate() {
                let e = p1_mode(m, q);
                *o += w * (v[0] * e[0] + v[1] * e[1]);
            }
        }
        Ok(out)
    }

    /// Moments `(g, e_m)` of a linear field given by coefficients.
    pub fn p1_moments(&self, c: &P1Coeffs) -> P1Coeffs {
        (self.p1_mass * Vector6::from(*c)).into()
    }

    /// L2 projection onto the span of `modes`, from moments `(g, e_m)`.
    fn project_moments<const K: usize>(
        &self,
        modes: &[P1Coeffs; K],
        moments: &P1Coeffs,
    ) -> [f64; K] {
        let basis = DMatrix::from_fn(P1_MODES, K, |m, k| modes[k][m]);
        let mass = DMatrix::from_fn(P1_MODES, P1_MODES, |i, j| self.p1_mass[(i, j)]);
        let gram = basis.transpose() * mass * &basis;
        let rhs = basis.transpose() * DVector::from_row_slice(moments);
        let sol = gram
            .lu()
            .solve(&rhs)
            .expect("mode Gram matrices are nonsingular on valid cells");
        std::array::from_fn(|k| sol[k])
    }

    /// Rigid coefficients of the L2 projection onto rigid motions.
    pub fn rigid_projection(&self, moments: &P1Coeffs) -> [f64; 3] {
        self.project_moments(&RIGID_MODES, moments)
    }

    /// Cell average of a field from its moments.
    pub fn mean_projection(&self, moments: &P1Coeffs) -> [f64; 2] {
        [
            moments[0] / self.geometry.area,
            moments[1] / self.geometry.area,
        ]
    }

    pub fn rigid_to_p1(c: &[f64; 3]) -> P1Coeffs {
        let mut out = [0.0; P1_MODES];
        for (k, mode) in RIGID_MODES.iter().enumerate() {
            for m in 0..P1_MODES {
                out[m] += c[k] * mode[m];
            }
        }
        out
    }

    /// Solves `pairing^T a = rhs` for the stress coefficients `a` whose
    /// pairing with every linear mode is prescribed.
    pub fn stress_from_pairings(&self, rhs: &P1Coeffs) -> StressCoeffs {
        self.pairing
            .transpose()
            .lu()
            .solve(&Vector6::from(*rhs))
            .expect("local pairing is nonsingular on valid cells")
            .into()
    }

    /// Rigid mass matrix `(w_j, w_k)`.
    pub fn rigid_mass(&self) -> Matrix3<f64> {
        let basis = SMatrix::<f64, 6, 3>::from_fn(|m, k| RIGID_MODES[k][m]);
        basis.transpose() * self.p1_mass * basis
    }

    /// Kernel and range identities of the local operators, measured as the
    /// largest sine of the principal angles between computed and expected
    /// subspaces. Also checks the expected dimensions.
    pub fn kernel_range_report(&self) -> KernelRangeReport {
        // div of each mode as linear-field coefficients, via the L2
        // projection onto linear fields on this cell.
        let minv = self.p1_mass.try_inverse().expect("P1 mass is SPD");
        let div_coeffs = self.div_moment * minv; // rows: modes
        let div_full = DMatrix::from_fn(6, 6, |r, m| div_coeffs[(r, m)]);
        let div_reduced = DMatrix::from_fn(REDUCED_STRESS_MODES, 6, |r, m| div_coeffs[(r, m)]);
        let eps_p1 = DMatrix::from_fn(6, 3, |m, c| p1_mode_eps(m).to_array()[c]);
        let veps = DMatrix::from_fn(5, 6, |k, m| VEPS_MODES[k][m]);
        let eps_veps = &veps * &eps_p1;
        let constants = DMatrix::from_fn(6, 3, |r, c| if r == c { 1.0 } else { 0.0 });
        let rigid = DMatrix::from_fn(6, 3, |m, k| RIGID_MODES[k][m]);
        let p0 = DMatrix::from_fn(6, 2, |m, k| P0_MODES[k][m]);
        let p0_in_veps = DMatrix::from_fn(5, 2, |k, c| if k == c { 1.0 } else { 0.0 });

        let div_kernel = left_nullspace(&div_full);
        let div_range = row_space(&div_full);
        let eps_kernel = left_nullspace(&eps_p1);
        let reduced_range = row_space(&div_reduced);
        let veps_kernel = left_nullspace(&eps_veps);
        let checks = [
            (
                div_kernel.ncols(),
                3,
                subspace_defect(&div_kernel, &constants),
            ),
            (div_range.ncols(), 3, subspace_defect(&div_range, &rigid)),
            (eps_kernel.ncols(), 3, subspace_defect(&eps_kernel, &rigid)),
            (
                reduced_range.ncols(),
                2,
                subspace_defect(&reduced_range, &p0),
            ),
            (
                veps_kernel.ncols(),
                2,
                subspace_defect(&veps_kernel, &p0_in_veps),
            ),
        ];
        KernelRangeReport {
            dims_ok: checks.iter().all(|&(got, want, _)| got == want),
            max_defect: checks.iter().map(|c| c.2).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KernelRangeReport {
    pub dims_ok: bool,
    pub max_defect: f64,
}

impl KernelRangeReport {
    pub fn passed(&self) -> bool {
        self.dims_ok && self.max_defect <= LOCAL_TOL
    }
}

/// Orthonormal basis (columns) of `{x : x^T m = 0}`.
fn left_nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let full = m * m.transpose();
    let eig = full.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<_> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-20 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis (columns) of the span of the rows of `m`.
fn row_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.transpose().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Largest sine of the principal angles between the column spans, or 1 if
/// the dimensions differ.
fn subspace_defect(q: &DMatrix<f64>, expected: &DMatrix<f64>) -> f64 {
    let e = expected.clone().qr().q();
    if q.ncols() != e.ncols() {
        return 1.0;
    }
    let proj = &e - q * (q.transpose() * &e);
    proj.singular_values().max()
}

/// Cached local elements for every cell of a mesh.
pub fn build_local_elements(mesh: &Mesh) -> Result<Vec<LocalElement>> {
    use rayon::prelude::*;
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            LocalElement::new(CellGeometry::from_mesh(mesh, t)).map_err(|e| match e {
                Error::SingularCell { .. } => Error::SingularCell { cell: t },
                other => other,
            })
        })
        .collect()
}
