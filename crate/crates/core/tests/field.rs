use neutral_core::field::{coating_convergence, interface_residuals, ode_residual, pde_residual, sample_surface};
use neutral_core::geometry::{rho_from_cartesian, semi_axes};
use neutral_core::{effective_conductivity, AnalyticSolution, Axis, EllipsoidSpec, MaterialPair, Region};

fn cases() -> Vec<(EllipsoidSpec, MaterialPair)> {
    vec![
        (EllipsoidSpec::new([1.0, 2.0, 3.0], 1.0, 4.0).unwrap(), MaterialPair::new(10.0, 1.0, 3.0, 1.0).unwrap()),
        (EllipsoidSpec::new([0.5, 0.7, 2.0], 0.1, 0.9).unwrap(), MaterialPair::new(4.0, 2.0, 1.5, -0.7).unwrap()),
        (EllipsoidSpec::sphere(0.8, 1.0).unwrap(), MaterialPair::new(1.0, 5.0, 2.5, 2.0).unwrap()),
        (EllipsoidSpec::sphere(0.5f64.cbrt(), 1.0).unwrap(), MaterialPair::linear(10.0, 1.0).unwrap()),
    ]
}

#[test]
fn interface_conditions_hold_on_every_axis() {
    for (spec, mat) in cases() {
        for axis in Axis::ALL {
            let sol = AnalyticSolution::new(&spec, &mat, axis).unwrap();
            let r = interface_residuals(&sol, 200).unwrap();
            assert!(r.max_relative() < 1e-8, "{axis} {r:?}");
            assert!(sol.chain_identity_residual() < 1e-12);
            let sigma_star = effective_conductivity(&spec, &mat, axis).unwrap();
            assert!((sol.sigma_star - sigma_star).abs() <= 1e-14 * sigma_star);
            let b2 = sol.b2_from_exterior();
            assert!((b2 - sol.b2).abs() <= 1e-11 * sol.b2.abs().max(1e-300), "{b2} vs {}", sol.b2);
        }
    }
}

#[test]
fn potential_on_the_axes() {
    for (spec, mat) in cases() {
        let sol = AnalyticSolution::new(&spec, &mat, Axis::X1).unwrap();
        assert_eq!(sol.potential(&[0.0; 3]).unwrap(), 0.0);
        let lc = spec.core_semi_axes();
        let x = [0.5 * lc[0], 0.1 * lc[1], 0.0];
        assert_eq!(sol.potential(&x).unwrap(), sol.a1 * x[0]);
        assert_eq!(sol.gradient(&x).unwrap(), [sol.a1, 0.0, 0.0]);
        let far = semi_axes(3.0 * spec.rho_e().abs() + 1.0, &spec).unwrap();
        let y = [0.9 * far[0], 0.0, 0.0];
        assert_eq!(sol.potential(&y).unwrap(), mat.e_field * y[0]);
        assert_eq!(sol.gradient(&y).unwrap(), [mat.e_field, 0.0, 0.0]);
    }
}

#[test]
fn coating_gradient_against_central_differences() {
    let h = 1e-5;
    for (spec, mat) in cases() {
        let sol = AnalyticSolution::new(&spec, &mat, Axis::X3).unwrap();
        let rho = 0.5 * (spec.rho_c() + spec.rho_e());
        for x in sample_surface(&spec, rho, 40, 5).unwrap() {
            let grad = sol.gradient(&x).unwrap();
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in 0..3 {
                let (mut a, mut b) = (x, x);
                a[d] += h;
                b[d] -= h;
                let fd = (sol.potential(&a).unwrap() - sol.potential(&b).unwrap()) / (2.0 * h);
                assert!((fd - grad[d]).abs() < 10.0 * h * h * norm + 1e-9 * norm, "{x:?} d={d}");
            }
        }
    }
}

#[test]
fn surface_samples_lie_on_the_shell() {
    for (spec, _) in cases() {
        for rho in [spec.rho_c(), spec.rho_e()] {
            for x in sample_surface(&spec, rho, 64, 1).unwrap() {
                let back = rho_from_cartesian(&x, &spec).unwrap();
                assert!((back - rho).abs() < 1e-10 * rho.abs().max(1.0));
            }
        }
    }
}

#[test]
fn coating_pde_converges_at_second_order() {
    for (spec, mat) in cases() {
        let sol = AnalyticSolution::new(&spec, &mat, Axis::X1).unwrap();
        assert_eq!(pde_residual(&sol, Region::Core, 10, 1e-3).unwrap(), 0.0);
        let l = spec.exterior_semi_axes().iter().cloned().fold(f64::INFINITY, f64::min);
        let steps = [2e-3 * l, 1e-3 * l, 5e-4 * l];
        let r = coating_convergence(&sol, 30, &steps).unwrap();
        for ratio in &r.ratios {
            assert!((ratio - 4.0).abs() < 0.3, "{r:?}");
        }
        assert!(ode_residual(&sol, 100).unwrap() < 1e-9);
    }
}

#[test]
fn perturbation_shows_in_core_flux() {
    let (spec, mat) = &cases()[0];
    let sol = AnalyticSolution::new(spec, mat, Axis::X1).unwrap();
    let bad = sol.with_core_field_scaled(1.01);
    let r = interface_residuals(&bad, 100).unwrap();
    let rel = r.core_flux / r.flux_scale;
    assert!(rel > 1e-3 && rel < 1e-1, "{rel}");
}
