//! Moment polytopes in the anticanonical gauge: every facet reads
//! `<x, normal> + 1 >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Supported toric Fano models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "CP1")]
    Cp1,
    #[serde(rename = "Hirzebruch1")]
    Hirzebruch1,
}

impl ModelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::Cp1 => "CP1",
            ModelName::Hirzebruch1 => "Hirzebruch1",
        }
    }
}

impl std::str::FromStr for ModelName {
    type Err = crate::error::LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CP1" => Ok(ModelName::Cp1),
            "Hirzebruch1" => Ok(ModelName::Hirzebruch1),
            other => invalid(format!("unknown model '{other}'")),
        }
    }
}

/// Convex lattice polytope of dimension 1 or 2.
///
/// In dimension 2 the vertices are stored counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub normals: Vec<Vec<i64>>,
    pub vertices: Vec<Vec<f64>>,
}

const VERTEX_TOL: f64 = 1e-12;

pub fn build_model(name: ModelName) -> Polytope {
    match name {
        ModelName::Cp1 => Polytope {
            dim: 1,
            normals: vec![vec![1], vec![-1]],
            vertices: vec![vec![-1.0], vec![1.0]],
        },
        ModelName::Hirzebruch1 => Polytope {
            dim: 2,
            normals: vec![vec![1, 0], vec![0, 1], vec![-1, 1], vec![0, -1]],
            vertices: vec![
                vec![-1.0, -1.0],
                vec![0.0, -1.0],
                vec![2.0, 1.0],
                vec![-1.0, 1.0],
            ],
        },
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Polytope {
    /// Checks the anticanonical-gauge invariants.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return invalid(format!("dimension {} not supported", self.dim));
        }
        if self.normals.len() < self.dim + 1 || self.vertices.len() < self.dim + 1 {
            return invalid("too few facets or vertices");
        }
        for n in &self.normals {
            if n.len() != self.dim {
                return invalid("normal has wrong length");
            }
            let g = n.iter().fold(0, |g, &c| gcd(g, c));
            if g != 1 {
                return invalid(format!("normal {n:?} is not primitive"));
            }
        }
        for v in &self.vertices {
            if v.len() != self.dim {
                return invalid("vertex has wrong length");
            }
            let vals = self.facet_values(v);
            if vals.iter().any(|&l| l < -VERTEX_TOL) {
                return invalid(format!("vertex {v:?} violates a facet inequality"));
            }
            let active = vals.iter().filter(|l| l.abs() <= VERTEX_TOL).count();
            if active != self.dim {
                return invalid(format!("vertex {v:?} lies on {active} facets"));
            }
        }
        if self.dim == 2 && self.signed_area() <= 0.0 {
            return invalid("vertices must be counter-clockwise");
        }
        Ok(())
    }

    pub fn facet_count(&self) -> usize {
        self.normals.len()
    }

    /// `l_k(x) = <x, normal_k> + 1` for every facet.
    pub fn facet_values(&self, x: &[f64]) -> Vec<f64> {
        self.normals
            .iter()
            .map(|n| 1.0 + n.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>())
            .collect()
    }

    pub fn min_facet_value(&self, x: &[f64]) -> f64 {
        self.facet_values(x)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn normal_f64(&self, k: usize) -> Vec<f64> {
        self.normals[k].iter().map(|&c| c as f64).collect()
    }

    fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (&v[i], &v[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Lebesgue volume (length in dimension 1, area in dimension 2).
    pub fn volume(&self) -> f64 {
        match self.dim {
            1 => {
                let (lo, hi) = self.interval();
                hi - lo
            }
            _ => self.signed_area(),
        }
    }

    pub fn barycenter(&self) -> Vec<f64> {
        match self.dim {
            1 => {
                let (lo, hi) = self.interval();
                vec![(lo + hi) / 2.0]
            }
            _ => {
                let v = &self.vertices;
                let n = v.len();
                let (mut cx, mut cy) = (0.0, 0.0);
                for i in 0..n {
                    let (a, b) = (&v[i], &v[(i + 1) % n]);
                    let cross = a[0] * b[1] - a[1] * b[0];
                    cx += (a[0] + b[0]) * cross;
                    cy += (a[1] + b[1]) * cross;
                }
                let area6 = 6.0 * self.signed_area();
                vec![cx / area6, cy / area6]
            }
        }
    }

    /// Endpoints of a one-dimensional polytope.
    pub fn interval(&self) -> (f64, f64) {
        let xs = self.vertices.iter().map(|v| v[0]);
        let lo = xs.clone().fold(f64::INFINITY, f64::min);
        let hi = xs.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Range of the affine form `<a, x> + b` over the polytope.
    pub fn affine_range(&self, a: &[f64], b: f64) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| b + v.iter().zip(a).map(|(x, y)| x * y).sum::<f64>())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polytope serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Polytope = serde_json::from_str(s)
            .map_err(|e| crate::error::LabError::InvalidArgument(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Clips a convex counter-clockwise polygon to the half-plane `<a, x> + b >= 0`.
pub(crate) fn clip_half_plane(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] + b;
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (sp, sq) = (side(&p), side(&q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let s = sp / (sp - sq);
            out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
        }
    }
    // drop slivers produced by vertices lying on the cut line
    out.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-15 && (p[1] - q[1]).abs() < 1e-15);
    out
}

pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}
