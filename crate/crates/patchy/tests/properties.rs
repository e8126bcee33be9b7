use patchy::geometry::PointClass;
use patchy::integrate::{alpha_star_monotone, solve_forward, solve_perturbed, sup_distance};
use patchy::perturbation::{DriftPiece, Jump};
use patchy::rates::{example_1_4_paths, fit_power_law, log_spaced, Example14};
use patchy::scenario::Scenario;
use patchy::{BvPath, Patch, PatchyField, Point, Polygon, SmoothFieldSpec, SolverOpts};
use proptest::prelude::*;

fn demo() -> PatchyField {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/demo_generic.cfg")).unwrap();
    Scenario::from_json(&text).unwrap().field().unwrap()
}

fn point(lo: f64, hi: f64) -> impl Strategy<Value = Point> {
    (lo..hi, lo..hi).prop_map(|(x, y)| Point::new(x, y))
}

fn jumps(max: usize) -> impl Strategy<Value = BvPath> {
    prop::collection::vec((0.05f64..0.95, point(-0.05, 0.05)), 1..=max)
        .prop_map(|v| BvPath::new(v.into_iter().map(|(t, d)| Jump { t, d }).collect(), vec![]).unwrap())
}

fn drift() -> impl Strategy<Value = BvPath> {
    (jumps(3), 0.0f64..0.5, 0.5f64..1.0, point(-0.1, 0.1)).prop_map(|(w, a, b, rate)| {
        BvPath::new(w.jumps().to_vec(), vec![DriftPiece { t0: a, t1: b, rate }]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn rectangle_area_and_orientation(x0 in -5.0f64..5.0, y0 in -5.0f64..5.0, w in 0.1f64..5.0, h in 0.1f64..5.0) {
        let r = Polygon::rect(x0, y0, x0 + w, y0 + h).unwrap();
        prop_assert!((r.area() - w * h).abs() <= 1e-12 * (1.0 + w * h));
        let mut rev = r.vertices().to_vec();
        rev.reverse();
        let back = Polygon::new(rev).unwrap();
        prop_assert!((back.area() - r.area()).abs() <= 1e-12);
        prop_assert_eq!(r.classify_point(Point::new(x0 + w / 2.0, y0 + h / 2.0), 1e-9), PointClass::Interior);
        prop_assert_eq!(r.classify_point(Point::new(x0 + w / 2.0, y0), 1e-9), PointClass::Boundary);
        prop_assert_eq!(r.classify_point(Point::new(x0 + 2.0 * w, y0), 1e-9), PointClass::Exterior);
    }

    #[test]
    fn variation_is_homogeneous(w in drift(), s in -3.0f64..3.0) {
        prop_assert!((w.scaled(s).total_variation() - s.abs() * w.total_variation()).abs() <= 1e-12);
        let v = w.with_total_variation(0.25).unwrap();
        prop_assert!((v.total_variation() - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn refining_and_shifting_keep_the_path(w in drift(), cuts in prop::collection::vec(0.0f64..1.0, 0..5), dt in -1.0f64..1.0, t in 0.0f64..1.0) {
        let r = w.refined(&cuts);
        prop_assert!((r.total_variation() - w.total_variation()).abs() <= 1e-12);
        prop_assert!(r.value(0.0, t).dist(w.value(0.0, t)) <= 1e-12);
        let s = w.time_shifted(dt);
        prop_assert!(s.value(dt, t + dt).dist(w.value(0.0, t)) <= 1e-12);
    }

    #[test]
    fn concatenation_adds_variation(a in jumps(3), b in jumps(3)) {
        let c = a.concat(&b, 1.0).unwrap();
        prop_assert!((c.total_variation() - a.total_variation() - b.total_variation()).abs() <= 1e-12);
        prop_assert!((c.variation_on(0.0, 1.0) - a.total_variation()).abs() <= 1e-12);
    }

    #[test]
    fn power_laws_are_fitted_exactly(e in 0.1f64..2.0, c in 0.01f64..10.0, n in 4usize..10) {
        let pts: Vec<(f64, f64)> = log_spaced(1e-1, 1e-5, n).into_iter().map(|t| (t, c * t.powf(e))).collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.exponent - e).abs() <= 1e-9);
        prop_assert!((fit.constant / c - 1.0).abs() <= 1e-8);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn log_spacing_is_geometric(a in -6.0f64..0.0, b in -6.0f64..0.0, n in 2usize..12) {
        let (a, b) = (10f64.powf(a), 10f64.powf(b));
        let v = log_spaced(a, b, n);
        prop_assert_eq!(v.len(), n);
        prop_assert_eq!(v[0], a);
        prop_assert_eq!(v[n - 1], b);
        let q = v[1] / v[0];
        for w in v.windows(2) {
            prop_assert!((w[1] / w[0] / q - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_field_offset_is_the_perturbation(g in point(-1.0, 1.0), w in drift()) {
        let f = PatchyField::new(vec![Patch::new(0, Polygon::rect(-10.0, -10.0, 10.0, 10.0).unwrap(), SmoothFieldSpec::constant(g))]).unwrap();
        let opts = SolverOpts::default();
        let x = solve_forward(&f, Point::new(0.0, 0.0), 0.0, 1.0, &opts).unwrap();
        let y = solve_perturbed(&f, &w, Point::new(0.0, 0.0), 0.0, 1.0, &opts).unwrap();
        for t in [0.1, 0.37, 0.5, 0.81, 1.0] {
            prop_assert!((y.eval(t) - x.eval(t)).dist(w.value(0.0, t)) <= 1e-9);
        }
        let peak = sup_distance(&x, &y, 0.0, 1.0);
        prop_assert!(peak <= w.total_variation() + 1e-9);
    }

    #[test]
    fn demo_solutions_stay_in_the_domain_and_climb(x0 in point(0.05, 1.95), span in 0.5f64..5.0) {
        let f = demo();
        let x = solve_forward(&f, x0, 0.0, span, &SolverOpts::default()).unwrap();
        prop_assert!(alpha_star_monotone(&f, &x));
        for p in &x.pieces {
            for s in &p.samples {
                prop_assert!(f.alpha_star(s.x).is_some());
            }
        }
        prop_assert!((x.t1() - span).abs() <= 1e-12);
    }

    #[test]
    fn tangential_variation_is_closed_form(eps in 1e-4f64..0.05, alpha in 1.5f64..3.0, beta in 1.5f64..3.0) {
        let s = Example14::new(alpha, beta).unwrap();
        let r = example_1_4_paths(&s, eps, 1e-2).unwrap();
        prop_assert!((r.tv - 2.0 * eps.powf(alpha)).abs() <= 1e-15);
        prop_assert!(r.distance >= eps.powf(1.0 / beta) * (1.0 - 1e-6));
        prop_assert!(r.distance <= eps.powf(1.0 / beta) + eps.powf(alpha) + 1e-9);
    }

    #[test]
    fn scenarios_roundtrip_through_json(t1 in 0.5f64..10.0, x in 0.1f64..0.9, seed in any::<u64>()) {
        let text = format!(r#"{{
            "schema": 1, "name": "p",
            "patches": [{{"index": 3, "polygon": [[0,0],[1,0],[1,1],[0,1]], "field": {{"constant": [0.5, 0.5], "linear": [[-1,0],[0,-1]]}}}}],
            "perturbation": {{"random": {{"count": 2, "tv": 0.01}}}},
            "run": {{"t1": {t1}, "x0": [{x}, 0.5], "seed": {seed}}}
        }}"#);
        let s = Scenario::from_json(&text).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.perturbation(seed), s.perturbation(seed));
    }
}
