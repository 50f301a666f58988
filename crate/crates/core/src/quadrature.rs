//! Quadrature on triangles in barycentric form.
//!
//! Degrees 1, 2, 4, 5 and 6 use tabulated symmetric rules; degree 3 is
//! served by the degree-4 rule. Degrees 7 through 12 use a collapsed
//! (Duffy) tensor Gauss-Legendre rule. Weights sum to one, so a rule
//! integrates `f` over `T` as `|T| * sum(w_i f(x_i))`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 12;

#[derive(Clone, Debug)]
pub struct QuadRule {
    pub degree: usize,
    /// Barycentric coordinates of the points.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points for a triangle with the given vertices.
    pub fn map_points(&self, v: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|l| {
                [
                    l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                    l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                ]
            })
            .collect()
    }

    /// Integral of `f` over the triangle with vertices `v`.
    pub fn integrate(&self, v: &[[f64; 2]; 3], mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        let area = 0.5
            * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
                .abs();
        let pts = self.map_points(v);
        area * pts
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum::<f64>()
    }
}

fn orbit3(a: f64, w: f64, out: &mut QuadRule) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        out.points.push(p);
        out.weights.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, out: &mut QuadRule) {
    let c = 1.0 - a - b;
    for p in [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ] {
        out.points.push(p);
        out.weights.push(w);
    }
}

fn tabulated(degree: usize) -> QuadRule {
    let mut r = QuadRule {
        degree,
        points: Vec::new(),
        weights: Vec::new(),
    };
    let third = 1.0 / 3.0;
    match degree {
        1 => {
            r.points.push([third; 3]);
            r.weights.push(1.0);
        }
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut r),
        4 => {
            orbit3(0.445948490915965, 0.223381589678011, &mut r);
            orbit3(0.091576213509771, 0.109951743655322, &mut r);
        }
        5 => {
            r.points.push([third; 3]);
            r.weights.push(0.225);
            orbit3(0.470142064105115, 0.132394152788506, &mut r);
            orbit3(0.101286507323456, 0.125939180544827, &mut r);
        }
        6 => {
            orbit3(0.249286745170910, 0.116786275726379, &mut r);
            orbit3(0.063089014491502, 0.050844906370207, &mut r);
            orbit6(
                0.053145049844817,
                0.310352451033784,
                0.082851075618374,
                &mut r,
            );
        }
        _ => unreachable!("no tabulated rule of degree {degree}"),
    }
    normalize(r)
}

fn normalize(mut r: QuadRule) -> QuadRule {
    let s: f64 = r.weights.iter().sum();
    r.weights.iter_mut().for_each(|w| *w /= s);
    r
}

/// Collapsed tensor rule: the unit square mapped onto the reference
/// triangle by `(s, t) -> (s (1 - t), t)`.
fn collapsed(degree: usize) -> QuadRule {
    let n = (degree + 2).div_ceil(2);
    let gl = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
    let pairs: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut r = QuadRule {
        degree,
        points: Vec::with_capacity(n * n),
        weights: Vec::with_capacity(n * n),
    };
    for &(t, wt) in &pairs {
        for &(s, ws) in &pairs {
            let x = s * (1.0 - t);
            r.points.push([1.0 - x - t, x, t]);
            r.weights.push(ws * wt * (1.0 - t));
        }
    }
    normalize(r)
}

/// Rule exact for polynomials of total degree `degree` (1..=12).
pub fn rule(degree: usize) -> Result<&'static QuadRule> {
    static RULES: [OnceLock<QuadRule>; MAX_DEGREE + 1] =
        [const { OnceLock::new() }; MAX_DEGREE + 1];
    let key = match degree {
        3 => 4,
        1..=MAX_DEGREE => degree,
        _ => return Err(Error::UnsupportedDegree(degree)),
    };
    Ok(RULES[key].get_or_init(|| match key {
        1 | 2 | 4 | 5 | 6 => tabulated(key),
        _ => collapsed(key),
    }))
}
