//! Toric geodesics `u_t = u_0 + t·v` and the `H(t)` probe along them.
//!
//! In the invariant class the homogeneous complex Monge-Ampère equation is
//! solved exactly by linear interpolation of symplectic potentials; in
//! complex coordinates `φ̇ = -v` at the point `x = ∇f_t(y)`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{graded_quadrature, quadrature, QuadratureRule};
use crate::metric::field::{NodeField, SampledMetric};
use crate::metric::{grad_pairing, Direction, SymplecticPotential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathKind {
    Segment { length: f64 },
    Ray,
}

#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub u0: SymplecticPotential,
    pub v: Direction,
    pub kind: PathKind,
}

impl GeodesicPath {
    pub fn ray(u0: SymplecticPotential, v: Direction) -> Self {
        Self {
            u0,
            v,
            kind: PathKind::Ray,
        }
    }

    pub fn segment(u0: SymplecticPotential, v: Direction, length: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return invalid("segment length must be positive");
        }
        Ok(Self {
            u0,
            v,
            kind: PathKind::Segment { length },
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        match self.kind {
            PathKind::Ray => t >= 0.0 && t.is_finite(),
            PathKind::Segment { length } => (0.0..=length).contains(&t),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            invalid(format!("t = {t} is outside the path domain"))
        }
    }

    /// `u_t`; `t` may leave the domain slightly for finite differences.
    pub fn potential_at(&self, t: f64) -> SymplecticPotential {
        self.u0.with_direction(t, self.v.clone())
    }

    /// Quadrature adapted to the direction: graded around the crease of a
    /// smoothed piecewise-linear direction, uniform otherwise.
    pub fn rule(&self, order: usize) -> Result<QuadratureRule> {
        match self.v.crease() {
            Some((a, b, delta)) => graded_quadrature(&self.u0.model.polytope, order, a, b, delta),
            None => quadrature(&self.u0.model.polytope, order),
        }
    }

    /// Samples `u_t` on `rule` without a domain check.
    pub fn sample_unchecked(&self, t: f64, rule: &QuadratureRule) -> Result<PathSample> {
        let s = SampledMetric::new(&self.potential_at(t), rule)?;
        let log_partition = s.field.log_partition()?;
        let v = rule.nodes.iter().map(|x| self.v.value(x)).collect();
        Ok(PathSample {
            t,
            s,
            v,
            log_partition,
        })
    }

    pub fn sample(&self, t: f64, rule: &QuadratureRule) -> Result<PathSample> {
        self.check(t)?;
        self.sample_unchecked(t, rule)
    }
}

/// A point of a path sampled on a rule.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub s: SampledMetric,
    /// Direction values at the nodes.
    pub v: Vec<f64>,
    /// `log ∫_P e^{h_t - c_t} dλ`, the pulled-back `log ∫ e^{-f_t} dy`.
    pub log_partition: f64,
}

impl PathSample {
    /// `H(t) = ∫ φ̇ e^{h_t} ω_tⁿ = -C_n ∫_P v e^{h_t} dλ`.
    pub fn h_of_t(&self) -> f64 {
        -self.s.integrate_weighted(&self.v)
    }

    /// `a(t)` with `∫ (φ̇ + a) e^{h_t} ω_tⁿ = 0`.
    pub fn centering(&self) -> f64 {
        self.s.integrate_weighted(&self.v) / self.s.volume()
    }

    /// `∫ (|∇φ̇|² - (φ̇ + a)²) e^{h_t} ω_tⁿ`.
    pub fn poincare_rhs(&self, path: &GeodesicPath) -> Result<f64> {
        let rule = self.s.rule();
        let dv = NodeField::sample(rule, |x| {
            let j = path.v.jet(x);
            (j.value, j.grad)
        });
        let grad2 = grad_pairing(&dv, &dv, &self.s.field)?;
        let a = self.centering();
        let g: Vec<f64> = grad2
            .iter()
            .zip(&self.v)
            .map(|(p, v)| p - (v - a).powi(2))
            .collect();
        Ok(self.s.integrate_weighted(&g))
    }
}

pub fn h_of_t(path: &GeodesicPath, t: f64, order: usize) -> Result<f64> {
    Ok(path.sample(t, &path.rule(order)?)?.h_of_t())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub fd_slope: f64,
    pub rhs: f64,
}

/// Finite-difference step for [`dh_dt_identity`].
pub const SLOPE_FD_STEP: f64 = 1e-3;

/// Richardson-extrapolated centered difference of `H(t)` next to the
/// quadrature value of `dH/dt`.
pub fn dh_dt_identity(path: &GeodesicPath, t: f64, order: usize) -> Result<SlopeCheck> {
    let h = SLOPE_FD_STEP;
    if !path.contains(t - h) || !path.contains(t + h) {
        return invalid("t must be interior to the path domain");
    }
    let rule = path.rule(order)?;
    let at = |s: f64| -> Result<f64> { Ok(path.sample_unchecked(s, &rule)?.h_of_t()) };
    let d = |s: f64| -> Result<f64> { Ok((at(t + s)? - at(t - s)?) / (2.0 * s)) };
    let fd_slope = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
    let rhs = path.sample(t, &rule)?.poincare_rhs(path)?;
    Ok(SlopeCheck { fd_slope, rhs })
}
