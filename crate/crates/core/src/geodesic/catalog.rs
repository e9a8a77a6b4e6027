//! Built-in ray catalogs for each model.

use crate::geometry::ModelName;
use crate::metric::RaySpec;

fn pl(a: &[f64], b: f64) -> RaySpec {
    RaySpec::Pl {
        a: a.to_vec(),
        b,
        delta: None,
    }
}

fn affine(xi: &[f64]) -> RaySpec {
    RaySpec::Affine {
        xi: xi.to_vec(),
        c: 0.0,
    }
}

/// Affine rays along torus directions, piecewise-linear rays across the
/// polytope and a few convex polynomials.
pub fn ray_catalog(model: ModelName) -> Vec<RaySpec> {
    match model {
        ModelName::Cp1 => vec![
            affine(&[1.0]),
            affine(&[-1.0]),
            pl(&[1.0], 0.0),
            pl(&[-1.0], 0.0),
            pl(&[1.0], -0.5),
            pl(&[-1.0], 0.5),
            RaySpec::Poly {
                terms: vec![((2, 0), 1.0)],
            },
            RaySpec::Poly {
                terms: vec![((4, 0), 1.0), ((1, 0), 0.3)],
            },
        ],
        ModelName::Hirzebruch1 => vec![
            affine(&[1.0, 0.0]),
            affine(&[0.0, 1.0]),
            affine(&[0.0, -1.0]),
            pl(&[1.0, 0.0], 0.0),
            pl(&[0.0, 1.0], 0.0),
            pl(&[-1.0, 0.0], 0.0),
            pl(&[0.0, -1.0], 0.0),
            pl(&[1.0, 1.0], -0.5),
            pl(&[-1.0, 1.0], 0.0),
            RaySpec::Poly {
                terms: vec![((2, 0), 1.0), ((0, 2), 1.0)],
            },
            RaySpec::Poly {
                terms: vec![((2, 0), 0.5), ((1, 1), 0.3), ((0, 2), 1.0), ((1, 0), 0.2)],
            },
        ],
    }
}
