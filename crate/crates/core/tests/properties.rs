use std::sync::Arc;

use proptest::prelude::*;

use wiener_lab::capacity::{p_capacity, parabolic_capacity, CapacityProblem, ParabolicCondenser, Region, TimeSlice};
use wiener_lab::geometry::{benchmark_domain, nested_cylinders, BenchParams, Cube};
use wiener_lab::harnack::{intrinsic_theta, l1_harnack_gap, weak_harnack_ratio, Theta};
use wiener_lab::lattice::Lattice;
use wiener_lab::pde::{
    check_comparison, flux, solve_cauchy_dirichlet, BoundaryData, Controls, Field, FluxSpec, COMPARISON_TOL,
};
use wiener_lab::wiener::{oscillation_iteration, weight_a, wiener_integral, wiener_sum, DeltaProfile, ModulusParams};

fn line(h: f64, half: f64) -> Lattice {
    let n = (2.0 * half / h).round() as usize + 1;
    Lattice::new(1, h, &[-half], &[n]).unwrap()
}

fn square(h: f64, half: f64) -> Lattice {
    let n = (2.0 * half / h).round() as usize + 1;
    Lattice::new(2, h, &[-half, -half], &[n, n]).unwrap()
}

fn cube_region(dim: usize, half: f64) -> Region {
    Region::Cube(Cube::new(&vec![0.0; dim], half).unwrap())
}

fn rect(lat: &Lattice, window: f64, inner: [f64; 2], p: f64) -> CapacityProblem {
    CapacityProblem::from_predicate(lat, cube_region(2, window), p, move |x| {
        x[0].abs() <= inner[0] + 1e-12 && x[1].abs() <= inner[1] + 1e-12
    })
}

fn constant_field(c: f64, dt: f64, n: usize) -> Field {
    let lat = square(1.0 / 16.0, 1.0);
    let len = lat.len();
    let inside = (0..len)
        .map(|i| lat.point(i)[..2].iter().all(|v| v.abs() < 1.0 - 1e-9))
        .collect();
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    Field {
        lattice: lat,
        inside,
        values: vec![vec![c; len]; times.len()],
        times,
    }
}

fn nonincreasing(len: usize) -> impl Strategy<Value = Vec<f64>> {
    (0.05f64..1.0, prop::collection::vec(0.5f64..=1.0, len)).prop_map(|(start, factors)| {
        let mut w = start;
        factors
            .into_iter()
            .map(|f| {
                w *= f;
                w
            })
            .collect()
    })
}

fn modulus_params() -> impl Strategy<Value = ModulusParams> {
    (1usize..=3, 0.0f64..1.0, 1.1f64..8.0, 0.1f64..1.0, 0.05f64..0.95).prop_map(|(dim, s, gamma2, c, nu)| {
        // Keep p inside the supercritical window for the sampled dimension.
        let lo = 2.0 * dim as f64 / (dim as f64 + 1.0);
        ModulusParams {
            dim,
            p: lo + (1.99 - lo) * (0.01 + 0.98 * s),
            gamma2,
            c,
            nu,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nested_cylinders_are_nested(omega in nonincreasing(12), c in 0.05f64..1.0, p in 1.05f64..1.99, r_o in 0.1f64..4.0) {
        let q = nested_cylinders(&[0.3, -0.2], 0.7, r_o, &omega, c, p).unwrap();
        for pair in q.windows(2) {
            prop_assert!(pair[0].contains(&pair[1]));
        }
    }

    #[test]
    fn structure_conditions_hold(
        p in 1.05f64..1.99,
        xi in prop::collection::vec(-10.0f64..10.0, 3),
        eta in prop::collection::vec(-10.0f64..10.0, 3),
        u in -5.0f64..5.0,
        c_o in 0.1f64..1.0,
        spread in 0.0f64..3.0,
        lipschitz in 0.0f64..4.0,
    ) {
        let c_1 = c_o + spread;
        let spec = FluxSpec::u_modulated(p, c_o, c_1, lipschitz);
        let x = [0.1, 0.2, 0.3];
        let a = flux(&spec, &x, 0.0, u, &xi);
        let b = flux(&spec, &x, 0.0, u, &eta);
        let norm = |v: &[f64]| v.iter().map(|w| w * w).sum::<f64>().sqrt();
        let dot = |v: &[f64], w: &[f64]| v.iter().zip(w).map(|(s, t)| s * t).sum::<f64>();
        let n = norm(&xi);
        let tol = 1e-12 * (1.0 + n.powf(p));
        prop_assert!(dot(&a, &xi) >= c_o * n.powf(p) - tol);
        prop_assert!(norm(&a) <= c_1 * n.powf(p - 1.0) + tol);
        let diff: Vec<f64> = xi.iter().zip(&eta).map(|(s, t)| s - t).collect();
        let da: Vec<f64> = a.iter().zip(&b).map(|(s, t)| s - t).collect();
        prop_assert!(dot(&da, &diff) >= -1e-9 * (1.0 + n.powf(p) + norm(&eta).powf(p)));
    }

    #[test]
    fn weight_is_monotone_in_density(d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0, p in 1.05f64..1.99, gamma2 in 1.1f64..8.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (a, b) = (weight_a(lo, gamma2, p).unwrap(), weight_a(hi, gamma2, p).unwrap());
        prop_assert!(a <= b);
        prop_assert!(b <= 1.0 / (4.0 * gamma2));
    }

    #[test]
    fn recursion_invariants(
        params in modulus_params(),
        omega_o in 0.01f64..=1.0,
        deltas in prop::collection::vec(0.0f64..=1.0, 1..30),
        g_scale in 0.0f64..0.6,
        seed in 0u64..1000,
    ) {
        let m = deltas.len();
        let g: Vec<f64> = (0..m).map(|j| g_scale * omega_o * (((seed + j as u64) * 2654435761) % 1000) as f64 / 1000.0).collect();
        let trace = oscillation_iteration(omega_o, &deltas, &g, 1.0, &params).unwrap();
        prop_assert_eq!(trace.monotonicity_violation(), None);
        prop_assert_eq!(trace.lower_bound_violation(), None);
        prop_assert_eq!(trace.product_bound_violation(), None);
        prop_assert!(trace.omega.iter().all(|w| *w <= omega_o));
    }

    #[test]
    fn constant_density_recursion_is_geometric(gamma2 in 1.1f64..8.0, m in 1usize..40, omega_o in 0.01f64..=1.0) {
        let params = ModulusParams { gamma2, ..Default::default() };
        let trace = oscillation_iteration(omega_o, &vec![1.0; m], &vec![0.0; m], 1.0, &params).unwrap();
        let exact = omega_o * (1.0 - 1.0 / (4.0 * gamma2)).powi(m as i32);
        prop_assert!((trace.omega[m] - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn constant_density_integral_is_logarithmic(g in 0.0f64..=1.0, p in 1.05f64..1.99, lo in 1e-6f64..0.5, gamma2 in 1.1f64..8.0) {
        let v = wiener_integral(&DeltaProfile::Constant(g), lo, 1.0, p, gamma2).unwrap();
        let exact = g.powf(1.0 / (p - 1.0)) / (4.0 * gamma2) * (1.0 / lo).ln();
        prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact));
        let sum = wiener_sum(&[g; 8], p, gamma2).unwrap();
        prop_assert!((sum - 8.0 * weight_a(g, gamma2, p).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn harnack_constants_of_constant_fields(c in 0.01f64..10.0, cw in 0.05f64..1.0, p in 1.35f64..1.99) {
        let rho: f64 = 0.05;
        let span = cw * c.powf(2.0 - p) * rho.powf(p);
        let u = constant_field(c, span / 8.0, 8);
        let k = Cube::new(&[0.0, 0.0], 2.0 * rho).unwrap();
        let theta = intrinsic_theta(&u, &k, 0.0, cw, p).unwrap();
        prop_assert!(matches!(theta, Theta::Finite(v) if (v - cw * c.powf(2.0 - p)).abs() <= 1e-12 * v));
        let weak = weak_harnack_ratio(&u, &[0.0, 0.0], rho, 0.0, cw, p).unwrap();
        prop_assert!(weak.pass);
        prop_assert!((weak.empirical_constant - 1.0).abs() <= 1e-12);
        let l1 = l1_harnack_gap(&u, &[0.0, 0.0], 0.125, 0.0, span, p).unwrap();
        prop_assert!(l1.pass);
        prop_assert!(l1.empirical_constant <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn capacity_is_monotone_under_inclusion(
        a in 0.1f64..0.4, b in 0.1f64..0.4, grow in 0.0f64..0.2, p in 1.2f64..1.95,
    ) {
        let lat = square(1.0 / 16.0, 1.0);
        let small = p_capacity(&rect(&lat, 0.75, [a, b], p)).unwrap();
        let big = p_capacity(&rect(&lat, 0.75, [a + grow, b + grow], p)).unwrap();
        prop_assert!(small.value <= big.value * (1.0 + 1e-9));
        let wide = p_capacity(&rect(&lat, 0.9, [a, b], p)).unwrap();
        prop_assert!(wide.value <= small.value * (1.0 + 1e-9));
        for r in [&small, &big, &wide] {
            prop_assert!(r.potential.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn capacity_is_homogeneous(r in 0.1f64..0.45, big in 0.55f64..0.95, p in 1.2f64..1.95) {
        // Scaling by 2 while halving the lattice index keeps the discrete problem identical.
        let one = |s: f64| {
            let lat = line(s / 64.0, s);
            CapacityProblem::from_predicate(&lat, cube_region(1, big * s), p, move |x| x[0].abs() <= r * s + 1e-12)
        };
        let a = p_capacity(&one(1.0)).unwrap().value;
        let b = p_capacity(&one(2.0)).unwrap().value;
        prop_assert!((b / a - 2f64.powf(1.0 - p)).abs() <= 1e-9);
    }

    #[test]
    fn time_constant_condenser_follows_slice_formula(a in 0.0f64..1.0, len in 0.01f64..2.0, half in 0.1f64..0.4, p in 1.2f64..1.95) {
        let lat = square(1.0 / 8.0, 1.0);
        let problem = rect(&lat, 0.75, [half, half], p);
        let elliptic = p_capacity(&problem).unwrap().value;
        let gamma = parabolic_capacity(&ParabolicCondenser {
            lattice: lat,
            window: problem.window.clone(),
            time: (a, a + len),
            slices: vec![TimeSlice { t0: a, t1: a + len, nodes: problem.inner.clone() }],
            p,
        })
        .unwrap();
        prop_assert!((gamma - len * elliptic).abs() <= 1e-9 * len * elliptic);
    }

    #[test]
    fn solutions_obey_maximum_principle_and_comparison(
        amp in 0.1f64..1.0, shift in 0.0f64..0.5, freq in 0.5f64..3.0, p in 1.35f64..1.95,
    ) {
        let d = benchmark_domain("full_cube", &BenchParams { dim: 1, h: 1.0 / 16.0, p, ..Default::default() }).unwrap();
        let g1 = BoundaryData::from_fn("g1", move |x, t| amp * (freq * x[0] + t).sin());
        let g2 = BoundaryData::from_fn("g2", move |x, t| amp * (freq * x[0] + t).sin() + shift);
        let ctl = Controls { dt: Some(0.02), ..Default::default() };
        let spec = FluxSpec::prototype(p);
        let u1 = solve_cauchy_dirichlet(&spec, &d, &g1, 0.2, &ctl).unwrap();
        let u2 = solve_cauchy_dirichlet(&spec, &d, &g2, 0.2, &ctl).unwrap();
        let r = check_comparison(&u2, &u1, COMPARISON_TOL).unwrap();
        prop_assert!(r.pass, "{:?}", r);
        let tol = 1e-8;
        for v in &u1.values {
            prop_assert!(v.iter().all(|w| *w >= -amp - tol && *w <= amp + tol));
        }
    }

    #[test]
    fn mass_decays_with_zero_boundary_data(c in -0.5f64..0.5, w in 0.2f64..0.9, p in 1.35f64..1.95) {
        let d = benchmark_domain("full_cube", &BenchParams { dim: 1, h: 1.0 / 16.0, p, ..Default::default() }).unwrap();
        let init = Arc::new(move |x: &[f64], _t: f64| (1.0 - ((x[0] - c) / w).powi(2)).max(0.0));
        let ctl = Controls { dt: Some(0.01), initial: Some(init), ..Default::default() };
        let u = solve_cauchy_dirichlet(&FluxSpec::prototype(p), &d, &BoundaryData::constant(0.0), 0.1, &ctl).unwrap();
        let mass: Vec<f64> = u.values.iter().map(|v| v.iter().sum::<f64>()).collect();
        prop_assert!(mass.windows(2).all(|m| m[1] <= m[0] + 1e-9));
        prop_assert!(u.values.iter().all(|v| v.iter().all(|x| *x >= -1e-9)));
    }
}
