//! Functionals sampled along rays and the on-catalog stability verdict.

use serde::Serialize;

use super::path::{GeodesicPath, PathSample};
use crate::error::Result;
use crate::functionals::{d_e0, f_derivative, f_value, modified_f_derivative, modified_f_value};
use crate::invariants::TorusVector;
use crate::metric::{Direction, RaySpec, SymplecticPotential};

/// Times at which slopes are sampled along each ray.
pub const PROBE_TIMES: [f64; 5] = [0.0, 1.0, 2.0, 4.0, 8.0];

/// Slope tolerance for the verdict.
pub const PROBE_TOL: f64 = 1e-6;

/// Slope tolerance for the probe modified by the extremal field.
pub const MODIFIED_PROBE_TOL: f64 = 1e-5;

pub const ON_CATALOG_HEADER: &str = "semistability verdict is on-catalog: it covers only the listed smooth invariant rays and certifies nothing about rays outside the catalog";

/// One row of a path trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    /// `ℰ₀(t) - ℰ₀(0)`.
    pub e0: f64,
    pub h_of_t: f64,
    pub f: f64,
    pub d_f: f64,
    /// `dℱ_X/dt`; equals `dℱ/dt` when no field is given.
    pub d_fx: f64,
    /// `ℱ_X(t)`; equals `ℱ(t)` when no field is given.
    pub fx: f64,
}

/// Samples `H`, `ℱ`, `ℱ_X` and their slopes at `times` on one rule.
pub fn path_trace(
    path: &GeodesicPath,
    times: &[f64],
    x: Option<&TorusVector>,
    order: usize,
) -> Result<Vec<TraceRow>> {
    let rule = path.rule(order)?;
    let base = path.sample(0.0, &rule)?;
    let zero = TorusVector::zero(path.u0.dim());
    let x = x.unwrap_or(&zero);
    times
        .iter()
        .map(|&t| {
            let p = path.sample(t, &rule)?;
            row(&p, &base, x)
        })
        .collect()
}

fn row(p: &PathSample, base: &PathSample, x: &TorusVector) -> Result<TraceRow> {
    Ok(TraceRow {
        t: p.t,
        e0: p.t * d_e0(p),
        h_of_t: p.h_of_t(),
        f: f_value(p, base),
        d_f: f_derivative(p).d_f,
        d_fx: modified_f_derivative(p, x)?,
        fx: modified_f_value(p, base, x)?,
    })
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,H_of_t,F,dF,dFX,E0\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            r.t, r.h_of_t, r.f, r.d_f, r.d_fx, r.e0
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayVerdict {
    pub ray: RaySpec,
    pub slopes: Vec<f64>,
    pub terminal_slope: f64,
    /// First sampled time from which every later slope is `≥ -tol`.
    pub first_nonnegative_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub header: String,
    /// `"F"`, or `"FX"` for the probe modified by `field`.
    pub functional: String,
    pub field: Option<Vec<f64>>,
    pub times: Vec<f64>,
    pub tol: f64,
    pub rays: Vec<RayVerdict>,
    pub semistable_on_catalog: bool,
}

/// Samples `dℱ/dt`, or `dℱ_X/dt` when `x` is given, along every ray from
/// `base` at [`PROBE_TIMES`].
pub fn stability_probe(
    base: &SymplecticPotential,
    rays: &[RaySpec],
    x: Option<&TorusVector>,
    delta: f64,
    tol: f64,
    order: usize,
) -> Result<StabilityReport> {
    let mut verdicts = Vec::with_capacity(rays.len());
    for spec in rays {
        let dir = Direction::from_spec(spec, base.dim(), delta)?;
        let path = GeodesicPath::ray(base.clone(), dir);
        let rule = path.rule(order)?;
        let mut slopes = Vec::with_capacity(PROBE_TIMES.len());
        for &t in &PROBE_TIMES {
            let p = path.sample(t, &rule)?;
            slopes.push(match x {
                Some(x) => modified_f_derivative(&p, x)?,
                None => f_derivative(&p).d_f,
            });
        }
        let tail = slopes.iter().rposition(|s| *s < -tol).map_or(0, |k| k + 1);
        verdicts.push(RayVerdict {
            ray: spec.clone(),
            terminal_slope: *slopes.last().unwrap_or(&0.0),
            first_nonnegative_t: PROBE_TIMES.get(tail).copied(),
            slopes,
        });
    }
    Ok(StabilityReport {
        header: ON_CATALOG_HEADER.to_string(),
        functional: if x.is_some() { "FX" } else { "F" }.to_string(),
        field: x.map(|v| v.components.clone()),
        times: PROBE_TIMES.to_vec(),
        tol,
        semistable_on_catalog: verdicts.iter().all(|v| v.terminal_slope >= -tol),
        rays: verdicts,
    })
}
