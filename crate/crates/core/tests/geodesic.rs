use kahlerlab::functionals::DEFAULT_ORDER;
use kahlerlab::geodesic::{
    dh_dt_identity, path_trace, ray_catalog, stability_probe, GeodesicPath, PROBE_TOL,
};
use kahlerlab::geometry::{quadrature, ModelName};
use kahlerlab::metric::{Direction, RaySpec, SampledMetric, SymplecticPotential, DEFAULT_DELTA};

const MODELS: [ModelName; 2] = [ModelName::Cp1, ModelName::Hirzebruch1];

fn ray(model: ModelName, spec: &RaySpec, delta: f64) -> GeodesicPath {
    let u = SymplecticPotential::reference(model);
    let dim = u.dim();
    GeodesicPath::ray(u, Direction::from_spec(spec, dim, delta).unwrap())
}

fn volume(model: ModelName) -> f64 {
    let u = SymplecticPotential::reference(model);
    SampledMetric::new(&u, &quadrature(&u.model.polytope, 8).unwrap())
        .unwrap()
        .volume()
}

#[test]
fn stationary_ray_has_zero_probe() {
    let p = ray(
        ModelName::Cp1,
        &RaySpec::Poly { terms: vec![] },
        DEFAULT_DELTA,
    );
    for r in path_trace(&p, &[0.0, 1.0, 3.0], None, 16).unwrap() {
        assert_eq!(r.h_of_t, 0.0);
    }
    let c = dh_dt_identity(&p, 1.0, 16).unwrap();
    assert_eq!((c.fd_slope, c.rhs), (0.0, 0.0));
}

#[test]
fn slope_identity_on_affine_cp1_ray() {
    let p = ray(
        ModelName::Cp1,
        &RaySpec::Affine {
            xi: vec![1.0],
            c: 0.3,
        },
        DEFAULT_DELTA,
    );
    let v = volume(ModelName::Cp1);
    let c = dh_dt_identity(&p, 1.0, DEFAULT_ORDER).unwrap();
    assert!(
        (c.fd_slope - c.rhs).abs() < 1e-4 * c.rhs.abs().max(v * 1e-6),
        "{c:?}"
    );
}

#[test]
fn poincare_rhs_is_nonnegative_on_catalog() {
    for model in MODELS {
        let v = volume(model);
        for spec in ray_catalog(model) {
            let p = ray(model, &spec, DEFAULT_DELTA);
            for t in [0.5, 2.0] {
                let c = dh_dt_identity(&p, t, DEFAULT_ORDER).unwrap();
                assert!(c.rhs >= -1e-8 * v, "{model:?} {spec:?} t = {t}: {c:?}");
                assert!(
                    (c.fd_slope - c.rhs).abs() < 1e-3 * c.rhs.abs().max(v * 1e-6),
                    "{model:?} {spec:?} t = {t}: {c:?}"
                );
            }
        }
    }
}

fn pl_rays(model: ModelName) -> Vec<RaySpec> {
    ray_catalog(model)
        .into_iter()
        .filter(|s| matches!(s, RaySpec::Pl { .. }))
        .collect()
}

#[test]
fn fillet_halving_keeps_verdicts() {
    for model in MODELS {
        let u = SymplecticPotential::reference(model);
        let rays = ray_catalog(model);
        let a = stability_probe(&u, &rays, None, DEFAULT_DELTA, PROBE_TOL, DEFAULT_ORDER).unwrap();
        let b = stability_probe(
            &u,
            &rays,
            None,
            DEFAULT_DELTA / 2.0,
            PROBE_TOL,
            DEFAULT_ORDER,
        )
        .unwrap();
        assert_eq!(a.semistable_on_catalog, b.semistable_on_catalog);
        for (x, y) in a.rays.iter().zip(&b.rays) {
            assert_eq!(x.first_nonnegative_t, y.first_nonnegative_t, "{:?}", x.ray);
            let signs = |s: &[f64]| s.iter().map(|v| *v >= -PROBE_TOL).collect::<Vec<_>>();
            assert_eq!(signs(&x.slopes), signs(&y.slopes), "{:?}", x.ray);
        }
    }
}

#[test]
fn fillet_halving_is_first_order_and_fine_fillets_are_stable() {
    let times = [0.0, 1.0, 2.0, 4.0, 8.0];
    for model in MODELS {
        for spec in pl_rays(model) {
            let slopes = |delta: f64| -> Vec<f64> {
                path_trace(&ray(model, &spec, delta), &times, None, DEFAULT_ORDER)
                    .unwrap()
                    .iter()
                    .map(|r| r.d_f)
                    .collect()
            };
            let (s1, s2, s3) = (slopes(1e-2), slopes(5e-3), slopes(2.5e-3));
            // differences halve with the fillet at t = 8
            let ratio = (s1[4] - s2[4]) / (s2[4] - s3[4]);
            assert!((ratio - 2.0).abs() < 0.2, "{spec:?}: ratio {ratio}");
            // at t = 0 the fillet enters at second order
            assert!((s1[0] - s2[0]).abs() < 1e-4, "{spec:?}");
            let (f1, f2) = (slopes(2.5e-4), slopes(1.25e-4));
            for (a, b) in f1.iter().zip(&f2) {
                assert!((a - b).abs() < 1e-4, "{model:?} {spec:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn catalog_parses_from_file_format() {
    for model in MODELS {
        let text = serde_json::to_string(&ray_catalog(model)).unwrap();
        let back: Vec<RaySpec> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ray_catalog(model));
    }
}
