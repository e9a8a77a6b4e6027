//! Scalar functionals of a metric or of a point on a geodesic: `ℋ`, `ℰ₀`,
//! Ding's `ℱ`, the modified `ℱ_X`, and `W(ω, -h)` with the `μ` bound.
//!
//! Along a path the measure `e^{h₀-φ_t} ω₀ⁿ` is `e^{-f_t} dy` up to a
//! constant, which pulls back to `e^{h_t - c_t} dλ` on the polytope; all
//! integrals therefore use one rule on `P`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::geodesic::path::{GeodesicPath, PathSample};
use crate::invariants::TorusVector;
use crate::metric::{SampledMetric, SymplecticPotential};

/// Default Gauss order per cell.
pub const DEFAULT_ORDER: usize = 24;

/// Relative change allowed between a value and its doubled-order recomputation.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FunctionalName {
    H,
    E0,
    F,
    Fx,
    W,
    MuBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub name: FunctionalName,
    pub value: f64,
    pub normalization_constants: BTreeMap<String, f64>,
    pub quadrature_order: usize,
    /// Value recomputed at twice the order.
    pub refined_value: f64,
    pub converged: bool,
}

/// Evaluates `eval` at `order` and `2·order` and packs the result.
pub fn report(
    name: FunctionalName,
    order: usize,
    eval: impl Fn(usize) -> Result<(f64, BTreeMap<String, f64>)>,
) -> Result<FunctionalReport> {
    let (value, normalization_constants) = eval(order)?;
    let (refined_value, _) = eval(2 * order)?;
    let converged = (value - refined_value).abs() <= CONVERGENCE_TOL * value.abs().max(1.0);
    Ok(FunctionalReport {
        name,
        value,
        normalization_constants,
        quadrature_order: order,
        refined_value,
        converged,
    })
}

/// `ℋ(ω) = ∫_M h e^h ωⁿ`.
pub fn h_functional(s: &SampledMetric) -> f64 {
    s.integrate_weighted(&s.ricci.h)
}

pub fn h_functional_report(u: &SymplecticPotential, order: usize) -> Result<FunctionalReport> {
    report(FunctionalName::H, order, |o| {
        let rule = crate::geometry::quadrature(&u.model.polytope, o)?;
        let s = SampledMetric::new(u, &rule)?;
        let constants = BTreeMap::from([("c".to_string(), s.ricci.c)]);
        Ok((h_functional(&s), constants))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WBound {
    /// `W(ω, -h) = ∫ (n + Δh + |∇h|² - h) e^h ωⁿ`, by direct quadrature.
    pub w_at_minus_h: f64,
    /// `nV - ℋ(ω)`.
    pub mu_bound: f64,
}

pub fn w_and_mu_bound(s: &SampledMetric) -> WBound {
    let n = s.rule().dim as f64;
    let lap = s.field.ricci_laplacian();
    let flux = s.field.ricci_flux();
    let grad = s.field.ricci_gradient();
    let g: Vec<f64> = (0..s.field.len())
        .map(|i| n + lap[i] + flux[i].dot(&grad[i]) - s.ricci.h[i])
        .collect();
    WBound {
        w_at_minus_h: s.integrate_weighted(&g),
        mu_bound: n * s.volume() - h_functional(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FDerivative {
    pub d_e0: f64,
    pub d_f: f64,
}

/// `dℰ₀/dt = -(1/V) ∫ φ̇ ω_tⁿ = (1/vol P) ∫_P v dλ`.
pub fn d_e0(p: &PathSample) -> f64 {
    p.s.field.rule.sum(&p.v) / p.s.polytope_volume()
}

/// `dℱ/dt = dℰ₀/dt + ∫ φ̇ e^{h₀-φ} ω₀ⁿ / ∫ e^{h₀-φ} ω₀ⁿ`.
pub fn f_derivative(p: &PathSample) -> FDerivative {
    let d0 = d_e0(p);
    let second = p.s.integrate_weighted(&p.v) / p.s.volume();
    FDerivative {
        d_e0: d0,
        d_f: d0 - second,
    }
}

/// `dℱ_X/dt = (1/vol P) ∫_P v (e^{θ_X} - e^{h_t}) dλ`.
pub fn modified_f_derivative(p: &PathSample, x: &TorusVector) -> Result<f64> {
    let theta = x.theta(p.s.rule())?;
    let g: Vec<f64> = p.v.iter().zip(&theta).map(|(v, q)| v * q.exp()).collect();
    let first = p.s.field.rule.sum(&g) / p.s.polytope_volume();
    Ok(first - p.s.integrate_weighted(&p.v) / p.s.volume())
}

/// `ℱ(t) = t·dℰ₀/dt - log(∫ e^{-f_t} dy / ∫ e^{-f_0} dy)`, given the base sample.
pub fn f_value(p: &PathSample, base: &PathSample) -> f64 {
    p.t * d_e0(p) - (p.log_partition - base.log_partition)
}

/// `ℱ_X(t) = t·(1/vol P) ∫_P v e^{θ_X} dλ - log(∫ e^{-f_t} dy / ∫ e^{-f_0} dy)`;
/// the first term is linear because `v` and `θ_X` are fixed on `P`.
pub fn modified_f_value(p: &PathSample, base: &PathSample, x: &TorusVector) -> Result<f64> {
    let theta = x.theta(p.s.rule())?;
    let g: Vec<f64> = p.v.iter().zip(&theta).map(|(v, q)| v * q.exp()).collect();
    let slope = p.s.field.rule.sum(&g) / p.s.polytope_volume();
    Ok(p.t * slope - (p.log_partition - base.log_partition))
}

pub fn f_derivative_along(path: &GeodesicPath, t: f64, order: usize) -> Result<FDerivative> {
    Ok(f_derivative(&path.sample(t, &path.rule(order)?)?))
}

pub fn modified_f_derivative_along(
    path: &GeodesicPath,
    t: f64,
    x: &TorusVector,
    order: usize,
) -> Result<f64> {
    modified_f_derivative(&path.sample(t, &path.rule(order)?)?, x)
}

pub fn f_value_along(path: &GeodesicPath, t: f64, order: usize) -> Result<f64> {
    let rule = path.rule(order)?;
    let base = path.sample(0.0, &rule)?;
    Ok(f_value(&path.sample(t, &rule)?, &base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{quadrature, ModelName};
    use crate::metric::{catalog_metrics, Direction, MetricSpec, RaySpec};

    fn sampled(u: &SymplecticPotential) -> SampledMetric {
        SampledMetric::new(u, &quadrature(&u.model.polytope, DEFAULT_ORDER).unwrap()).unwrap()
    }

    #[test]
    fn h_functional_on_reference_metrics() {
        let cp1 = sampled(&SymplecticPotential::reference(ModelName::Cp1));
        assert!(h_functional(&cp1).abs() < 1e-8 * cp1.volume());
        let f1 = sampled(&SymplecticPotential::reference(ModelName::Hirzebruch1));
        assert!(h_functional(&f1) > 1e-3);
        let bubble =
            SymplecticPotential::new(MetricSpec::bubble(ModelName::Cp1, vec![0.1])).unwrap();
        let r = h_functional_report(&bubble, DEFAULT_ORDER).unwrap();
        assert!(r.value > 0.0 && r.converged);
    }

    #[test]
    fn w_identity() {
        let cp1 = sampled(&SymplecticPotential::reference(ModelName::Cp1));
        let w = w_and_mu_bound(&cp1);
        assert!((w.w_at_minus_h - cp1.volume()).abs() < 1e-8 * cp1.volume());
        for u in catalog_metrics(ModelName::Hirzebruch1) {
            let s = sampled(&u);
            let w = w_and_mu_bound(&s);
            assert!((w.w_at_minus_h - w.mu_bound).abs() < 1e-4 * w.mu_bound.abs());
        }
    }

    fn ray(model: ModelName, spec: RaySpec) -> GeodesicPath {
        let u = SymplecticPotential::reference(model);
        let dim = u.dim();
        GeodesicPath::ray(u, Direction::from_spec(&spec, dim, 1e-2).unwrap())
    }

    #[test]
    fn stationary_path() {
        let p = ray(ModelName::Cp1, RaySpec::Poly { terms: vec![] });
        let d = f_derivative_along(&p, 1.0, 16).unwrap();
        assert_eq!((d.d_e0, d.d_f), (0.0, 0.0));
        assert_eq!(
            modified_f_derivative_along(&p, 1.0, &TorusVector::zero(1), 16).unwrap(),
            0.0
        );
        assert_eq!(f_value_along(&p, 0.0, 16).unwrap(), 0.0);
    }

    #[test]
    fn affine_ray_slope_is_futaki_over_volume() {
        let p = ray(
            ModelName::Hirzebruch1,
            RaySpec::Affine {
                xi: vec![1.0, 0.5],
                c: 0.2,
            },
        );
        let s = sampled(&p.u0);
        let f = crate::invariants::futaki(&s, &TorusVector::new(vec![1.0, 0.5])).unwrap();
        for t in [0.0, 1.0, 3.0] {
            let d = f_derivative_along(&p, t, DEFAULT_ORDER).unwrap();
            assert!((d.d_f - f.measure / s.volume()).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn modified_reduces_to_plain_at_zero_field() {
        let p = ray(
            ModelName::Hirzebruch1,
            RaySpec::Pl {
                a: vec![1.0, 1.0],
                b: -0.2,
                delta: None,
            },
        );
        let rule = p.rule(12).unwrap();
        let smp = p.sample(2.0, &rule).unwrap();
        let a = f_derivative(&smp).d_f;
        let b = modified_f_derivative(&smp, &TorusVector::zero(2)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn f_value_derivative_consistency() {
        let p = ray(
            ModelName::Cp1,
            RaySpec::Pl {
                a: vec![1.0],
                b: 0.0,
                delta: None,
            },
        );
        let h = 1e-3;
        let fd = (f_value_along(&p, 1.0 + h, 24).unwrap()
            - f_value_along(&p, 1.0 - h, 24).unwrap())
            / (2.0 * h);
        let d = f_derivative_along(&p, 1.0, 24).unwrap().d_f;
        assert!((fd - d).abs() < 1e-6, "{fd} vs {d}");
    }
}
