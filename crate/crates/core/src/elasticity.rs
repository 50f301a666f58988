//! Isotropic material laws, tensor algebra on symmetric 2x2 tensors and
//! manufactured exact solutions on the unit square.
//!
//! Sign convention: the load is `f = div(sigma)`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor stored as `(xx, xy, yy)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    /// Full contraction `a : b`.
    pub fn ddot(self, other: Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn norm_sq(self) -> f64 {
        self.ddot(self)
    }

    pub fn deviatoric(self) -> Sym2 {
        let h = 0.5 * self.trace();
        Sym2::new(self.xx - h, self.xy, self.yy - h)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.xx, self.xy, self.yy]
    }

    /// Symmetric part of a gradient `g[i][j] = d_j u_i`.
    pub fn sym_grad(g: [[f64; 2]; 2]) -> Sym2 {
        Sym2::new(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        *self = *self + o;
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        Sym2::new(-self.xx, -self.xy, -self.yy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, s: Sym2) -> Sym2 {
        Sym2::new(self * s.xx, self * s.xy, self * s.yy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
}

impl LameParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Invalid(format!(
                "Lame parameters must be positive and finite (mu = {mu}, lambda = {lambda})"
            )));
        }
        Ok(LameParams { mu, lambda })
    }

    /// `C eps = lambda tr(eps) Id + 2 mu eps`.
    pub fn elasticity(&self, eps: Sym2) -> Sym2 {
        2.0 * self.mu * eps + (self.lambda * eps.trace()) * Sym2::IDENTITY
    }

    /// Inverse of [`Self::elasticity`].
    pub fn compliance(&self, sigma: Sym2) -> Sym2 {
        let shift = self.lambda / (2.0 * self.lambda + 2.0 * self.mu) * sigma.trace();
        (0.5 / self.mu) * (sigma - shift * Sym2::IDENTITY)
    }

    /// Pointwise compliance form split into deviatoric and trace parts.
    pub fn compliance_form(&self, s: Sym2, t: Sym2) -> f64 {
        self.deviatoric_weight() * s.deviatoric().ddot(t.deviatoric())
            + self.trace_weight() * s.trace() * t.trace()
    }

    pub fn deviatoric_weight(&self) -> f64 {
        0.5 / self.mu
    }

    pub fn trace_weight(&self) -> f64 {
        0.25 / (self.lambda + self.mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// `u = (s, s)` with `s = sin(pi x) sin(pi y)`.
    TrigGeneric,
    /// `u = curl((sin(pi x) sin(pi y))^2)`, divergence free.
    DivfreeLocking,
}

impl CaseId {
    pub fn name(self) -> &'static str {
        match self {
            CaseId::TrigGeneric => "trig-generic",
            CaseId::DivfreeLocking => "divfree-locking",
        }
    }
}

impl std::str::FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trig-generic" | "trig_generic" => Ok(CaseId::TrigGeneric),
            "divfree-locking" | "divfree_locking" => Ok(CaseId::DivfreeLocking),
            other => Err(Error::Invalid(format!("unknown case '{other}'"))),
        }
    }
}

/// Closed-form solution of `A sigma = eps(u)`, `div sigma = f`, `u = 0` on
/// the boundary of the unit square.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub params: LameParams,
}

impl ManufacturedCase {
    pub fn new(id: CaseId, params: LameParams) -> Self {
        ManufacturedCase { id, params }
    }

    /// Whether the stress and load change with lambda.
    pub fn depends_on_lambda(&self) -> bool {
        matches!(self.id, CaseId::TrigGeneric)
    }

    pub fn u(&self, p: [f64; 2]) -> [f64; 2] {
        let (a, ca) = (PI * p[0]).sin_cos();
        let (b, cb) = (PI * p[1]).sin_cos();
        match self.id {
            CaseId::TrigGeneric => [a * b, a * b],
            CaseId::DivfreeLocking => [2.0 * PI * a * a * b * cb, -2.0 * PI * a * ca * b * b],
        }
    }

    /// `g[i][j] = d_j u_i`.
    pub fn grad_u(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let (a, ca) = (PI * p[0]).sin_cos();
        let (b, cb) = (PI * p[1]).sin_cos();
        match self.id {
            CaseId::TrigGeneric => {
                let sx = PI * ca * b;
                let sy = PI * a * cb;
                [[sx, sy], [sx, sy]]
            }
            CaseId::DivfreeLocking => {
                let pi2 = PI * PI;
                [
                    [
                        4.0 * pi2 * a * ca * b * cb,
                        2.0 * pi2 * a * a * (cb * cb - b * b),
                    ],
                    [
                        -2.0 * pi2 * b * b * (ca * ca - a * a),
                        -4.0 * pi2 * a * ca * b * cb,
                    ],
                ]
            }
        }
    }

    pub fn div_u(&self, p: [f64; 2]) -> f64 {
        let g = self.grad_u(p);
        g[0][0] + g[1][1]
    }

    pub fn eps(&self, p: [f64; 2]) -> Sym2 {
        Sym2::sym_grad(self.grad_u(p))
    }

    pub fn sigma(&self, p: [f64; 2]) -> Sym2 {
        self.params.elasticity(self.eps(p))
    }

    pub fn div_sigma(&self, p: [f64; 2]) -> [f64; 2] {
        let (mu, lambda) = (self.params.mu, self.params.lambda);
        let (a, ca) = (PI * p[0]).sin_cos();
        let (b, cb) = (PI * p[1]).sin_cos();
        let pi2 = PI * PI;
        match self.id {
            CaseId::TrigGeneric => {
                let s = a * b;
                let sxx = -pi2 * s;
                let syy = -pi2 * s;
                let sxy = pi2 * ca * cb;
                [
                    lambda * (sxx + sxy) + 2.0 * mu * sxx + mu * (sxy + syy),
                    mu * (sxx + sxy) + lambda * (sxy + syy) + 2.0 * mu * syy,
                ]
            }
            CaseId::DivfreeLocking => {
                let pi3 = pi2 * PI;
                [
                    mu * 4.0 * pi3 * b * cb * (ca * ca - 3.0 * a * a),
                    -mu * 4.0 * pi3 * a * ca * (cb * cb - 3.0 * b * b),
                ]
            }
        }
    }

    /// The load `f = div(sigma)`.
    pub fn f(&self, p: [f64; 2]) -> [f64; 2] {
        self.div_sigma(p)
    }
}
