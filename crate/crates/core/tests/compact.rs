mod common;

use atmplace::compact::*;
use atmplace::model::{synthesize_benchmark, warpage_metric, InterfaceKind};
use common::*;
use proptest::prelude::*;

const AS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
const BS: [f64; 5] = [-5.0, -1.5, 0.3, 1.0, 5.0];

#[test]
fn aux_matches_quadrature_on_grid() {
    let mut worst: f64 = 0.0;
    for &a in &AS {
        for &b in &BS {
            for &c in &BS {
                let f = aux_f(a, b, c).unwrap();
                let q = aux_quadrature(a, b, c);
                worst = worst.max((f - q).abs() / q.abs());
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn aux_unit_point_matches_quadrature() {
    let q = aux_quadrature(1.0, 1.0, 1.0);
    assert!((aux_f(1.0, 1.0, 1.0).unwrap() - q).abs() <= 1e-6 * q);
}

#[test]
fn aux_gradient_matches_central_differences() {
    let h = 1e-6;
    for &(a, b, c) in &[(1.0, 0.0, 1.0), (0.3, 2.0, -1.0), (2.5, -0.7, 4.0), (0.8, 1.2, 1.2)] {
        let g = aux_f_grad(a, b, c).unwrap();
        let fa = central(|t| aux_f(t, b, c).unwrap(), a, h);
        let fb = central(|t| aux_f(a, t, c).unwrap(), b, h);
        let fc = central(|t| aux_f(a, b, t).unwrap(), c, h);
        for (x, y) in g.iter().zip([fa, fb, fc]) {
            assert!(rel_err(*x, y, 1e-3) <= 1e-6, "({a},{b},{c}): {g:?} vs {:?}", [fa, fb, fc]);
        }
    }
}

#[test]
fn depth_derivative_is_nonpositive_for_positive_widths() {
    for &a in &AS {
        for b in [0.1, 0.5, 1.0, 3.0] {
            for c in [0.1, 0.5, 1.0, 3.0] {
                assert!(aux_f_grad(a, b, c).unwrap()[0] <= 0.0);
            }
        }
    }
}

#[test]
fn thermal_is_invariant_under_relabeling() {
    let grid = GridSpec::new(24, 20, 30.0, 25.0);
    let fps = random_footprints(3, 4, &grid);
    let p = params_for(4);
    let t = eval_tc(&p, &fps, &grid).unwrap();
    let order = [2, 0, 3, 1];
    let fps2: Vec<_> = order.iter().map(|&k| fps[k]).collect();
    let p2 = CompactThermalParams {
        per_chiplet: order.iter().map(|&k| p.per_chiplet[k]).collect(),
        ..p.clone()
    };
    let t2 = eval_tc(&p2, &fps2, &grid).unwrap();
    for (a, b) in t.values.iter().zip(&t2.values) {
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}

#[test]
fn thermal_is_linear_in_each_power() {
    let grid = GridSpec::new(16, 16, 30.0, 30.0);
    let mut fps = random_footprints(4, 3, &grid);
    let p = params_for(3);
    let base = eval_tc(&p, &fps, &grid).unwrap();
    let mut without = fps.clone();
    without[1].power = 0.0;
    let rest = eval_tc(&p, &without, &grid).unwrap();
    fps[1].power *= 3.0;
    let scaled = eval_tc(&p, &fps, &grid).unwrap();
    for r in 0..grid.cells() {
        let own = base.values[r] - rest.values[r];
        let own3 = scaled.values[r] - rest.values[r];
        assert!((own3 - 3.0 * own).abs() <= 1e-9 * own.abs().max(1e-9));
    }
}

#[test]
fn thermal_gradient_matches_central_differences() {
    let grid = GridSpec::new(20, 20, 30.0, 30.0);
    let p = params_for(4);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let fps = random_footprints(100 + seed, 4, &grid);
        let g = grad_tc(&p, &fps, &grid).unwrap();
        worst = worst.max(field_fd_error(&fps, &g, &|f| eval_tc(&p, f, &grid).unwrap().values));
    }
    assert!(worst <= 1e-4, "worst {worst:e}");
}

#[test]
fn thermal_vjp_matches_gradient_fields() {
    let grid = GridSpec::new(12, 10, 20.0, 18.0);
    let p = params_for(3);
    let fps = random_footprints(9, 3, &grid);
    let weights: Vec<f64> = (0..grid.cells()).map(|r| ((r * 7919) % 13) as f64 - 6.0).collect();
    let v = thermal_vjp(&p, &fps, &grid, &weights).unwrap();
    let g = grad_tc(&p, &fps, &grid).unwrap();
    for i in 0..3 {
        for k in 0..4 {
            let dot: f64 = g[i][k].values.iter().zip(&weights).map(|(a, b)| a * b).sum();
            assert!((dot - v[i][k]).abs() <= 1e-9 * dot.abs().max(1e-12));
        }
    }
}

#[test]
fn symmetric_chiplet_has_zero_center_gradient_and_far_field_decays() {
    let grid = GridSpec::new(15, 15, 15.0, 15.0);
    let p = params_for(1);
    let fp = Footprint {
        x: 7.5,
        y: 7.5,
        w: 3.0,
        h: 3.0,
        power: 1e6,
    };
    let g = grad_tc(&p, &[fp], &grid).unwrap();
    assert!(g[0][0].get(7, 7).abs() < 1e-12);
    let peak = g[0][0].values.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    // the far field falls off like 1/r², so the chiplet sits ~3e4 length scales away
    let wide = GridSpec::new(40, 4, 40000.0, 4.0);
    let far = Footprint { x: 39900.0, y: 2.0, ..fp };
    let gf = grad_tc(&p, &[far], &wide).unwrap();
    assert!(gf[0][0].get(0, 1).abs() < 1e-8 * peak);
}

#[test]
fn warpage_trivial_cases() {
    let grid = GridSpec::new(10, 10, 30.0, 30.0);
    let fps = random_footprints(5, 2, &grid);
    let tp = params_for(2);
    let mut wp = warp_params(2);
    wp.alpha = 0.0;
    assert!(eval_w(&wp, &tp, &fps, &grid).unwrap().values.iter().all(|&v| v == 1.5));
    let empty = CompactWarpageParams {
        per_chiplet: vec![],
        ..warp_params(0)
    };
    let tp0 = params_for(0);
    assert!(eval_w(&empty, &tp0, &[], &grid).unwrap().values.iter().all(|&v| v == 1.5));
    let flat = atmplace::field::FieldGrid::from_fn(10, 10, 30.0, 30.0, |_, _| 33.0);
    let mut same = warp_params(2);
    for p in &mut same.per_chiplet {
        p.t_ref = 33.0;
    }
    assert!(eval_w_with_thermal(&same, &fps, &flat).unwrap().values.iter().all(|&v| v == 1.5));
}

#[test]
fn warpage_is_affine_in_alpha_and_bias() {
    let grid = GridSpec::new(12, 12, 30.0, 30.0);
    let fps = random_footprints(6, 3, &grid);
    let tp = params_for(3);
    let wp = warp_params(3);
    let base = eval_w(&wp, &tp, &fps, &grid).unwrap();
    let s = 2.5;
    let scaled = eval_w(&CompactWarpageParams { alpha: s * wp.alpha, ..wp.clone() }, &tp, &fps, &grid).unwrap();
    for (a, b) in base.values.iter().zip(&scaled.values) {
        assert!((b - (s * (a - wp.b) + wp.b)).abs() <= 1e-10 * (1.0 + b.abs()));
    }
    let shifted = eval_w(&CompactWarpageParams { b: wp.b + 7.0, ..wp.clone() }, &tp, &fps, &grid).unwrap();
    let d = warpage_metric(&shifted).unwrap() - warpage_metric(&base).unwrap();
    assert!(d.abs() < 1e-12);
}

#[test]
fn warpage_gradient_matches_central_differences() {
    let grid = GridSpec::new(16, 16, 30.0, 30.0);
    let tp = params_for(4);
    let wp = warp_params(4);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let fps = random_footprints(200 + seed, 4, &grid);
        let g = grad_w(&wp, &tp, &fps, &grid).unwrap();
        worst = worst.max(field_fd_error(&fps, &g, &|f| eval_w(&wp, &tp, f, &grid).unwrap().values));
    }
    assert!(worst <= 1e-4, "worst {worst:e}");
    let zero = CompactWarpageParams { alpha: 0.0, ..wp };
    let fps = random_footprints(1, 4, &grid);
    for fields in grad_w(&zero, &tp, &fps, &grid).unwrap() {
        assert!(fields.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn warpage_vjp_matches_gradient_fields() {
    let grid = GridSpec::new(12, 12, 30.0, 30.0);
    let tp = params_for(3);
    let wp = warp_params(3);
    let fps = random_footprints(11, 3, &grid);
    let t = eval_tc(&tp, &fps, &grid).unwrap();
    let weights: Vec<f64> = (0..grid.cells()).map(|r| ((r * 31) % 7) as f64 - 3.0).collect();
    let v = warpage_vjp(&wp, &tp, &fps, &t, &weights, None).unwrap();
    let g = grad_w(&wp, &tp, &fps, &grid).unwrap();
    for i in 0..3 {
        for k in 0..4 {
            let dot: f64 = g[i][k].values.iter().zip(&weights).map(|(a, b)| a * b).sum();
            assert!((dot - v[i][k]).abs() <= 1e-8 * dot.abs().max(1e-9), "{i} {k}: {dot} {}", v[i][k]);
        }
    }
}

#[test]
fn smooth_range_gradient_matches_central_differences() {
    let v: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0 + i as f64 * 0.01).collect();
    let tau = 4.0;
    let (_, g) = smooth_peak_to_valley(&v, tau);
    for k in 0..v.len() {
        let fd = central(
            |t| {
                let mut w = v.clone();
                w[k] = t;
                smooth_peak_to_valley(&w, tau).0
            },
            v[k],
            1e-6,
        );
        assert!((fd - g[k]).abs() < 1e-7);
    }
}

fn small_design() -> atmplace::model::DesignInstance {
    synthesize_benchmark(7, 4, InterfaceKind::Standard16, 0.5).unwrap()
}

#[test]
fn thermal_self_fit_recovers_field() {
    let d = small_design();
    let grid = GridSpec::from_design(&d);
    let truth = CompactThermalParams {
        amp: 1.7e-5,
        a: 0.6,
        bias: 27.0,
        per_chiplet: d.chiplets.iter().map(|c| LengthScale { lx: 0.7 * c.w, ly: 0.4 * c.h }).collect(),
    };
    let mut r = rng(1);
    let samples: Vec<_> = (0..6)
        .map(|_| {
            let p = random_legal_placement(&d, &mut r);
            let t = eval_tc(&truth, &snapped_footprints(&d, &p).unwrap(), &grid).unwrap();
            (p, t)
        })
        .collect();
    let (fit, rep) = fit_thermal(&d, &samples, &FitConfig::default()).unwrap();
    assert!(rep.train_mae.iter().all(|&m| m < 0.01), "{:?}", rep.train_mae);

    let shifted: Vec<_> = samples.iter().map(|(p, t)| (p.clone(), t.map(|v| v + 10.0))).collect();
    let (fit2, rep2) = fit_thermal(&d, &shifted, &FitConfig::default()).unwrap();
    assert!((fit2.bias - fit.bias - 10.0).abs() < 0.05, "{} vs {}", fit2.bias, fit.bias);
    assert!(rep2.train_mae.iter().all(|&m| m < 0.01));
}

#[test]
fn warpage_self_fit_recovers_field() {
    let d = small_design();
    let grid = GridSpec::from_design(&d);
    let tp = CompactThermalParams::initial(&d, 25.0, 60.0);
    let truth = CompactWarpageParams {
        alpha: 0.002,
        b: 0.5,
        per_chiplet: (0..4)
            .map(|i| LocalWarp {
                kx: 0.05 + 0.01 * i as f64,
                ky: 0.06,
                lambda: 0.2 * i as f64 - 0.3,
                c: -1.0,
                t_ref: 25.0 + i as f64,
            })
            .collect(),
    };
    let mut r = rng(2);
    let samples: Vec<_> = (0..6)
        .map(|_| {
            let p = random_legal_placement(&d, &mut r);
            let w = eval_w(&truth, &tp, &snapped_footprints(&d, &p).unwrap(), &grid).unwrap();
            (p, w)
        })
        .collect();
    let (fit, rep) = fit_warpage(&d, &tp, &samples, &FitConfig::default()).unwrap();
    assert!(rep.train_mae.iter().all(|&m| m < 0.01), "{:?}", rep.train_mae);

    let shifted: Vec<_> = samples.iter().map(|(p, w)| (p.clone(), w.map(|v| v + 5.0))).collect();
    let (_, rep2) = fit_warpage(&d, &tp, &shifted, &FitConfig::default()).unwrap();
    assert!(rep2.train_mae.iter().all(|&m| m < 0.01), "{:?}", rep2.train_mae);
    let _ = fit;
}

#[test]
fn fitting_needs_two_samples() {
    let d = small_design();
    let grid = GridSpec::from_design(&d);
    let p = random_legal_placement(&d, &mut rng(3));
    let t = eval_tc(&CompactThermalParams::initial(&d, 25.0, 10.0), &snapped_footprints(&d, &p).unwrap(), &grid).unwrap();
    assert!(matches!(
        fit_thermal(&d, &[(p, t)], &FitConfig::default()),
        Err(atmplace::Error::Precondition(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aux_is_odd_and_symmetric(a in 0.05f64..5.0, b in -6.0f64..6.0, c in -6.0f64..6.0) {
        let f = aux_f(a, b, c).unwrap();
        prop_assert!((f - aux_f(a, c, b).unwrap()).abs() <= 1e-12 * (1.0 + f.abs()));
        prop_assert!((f + aux_f(a, -b, c).unwrap()).abs() <= 1e-12 * (1.0 + f.abs()));
    }

    #[test]
    fn smooth_range_bounds_exact_range(v in proptest::collection::vec(-10.0f64..10.0, 2..40), tau in 0.5f64..50.0) {
        let exact = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        let (s, _) = smooth_peak_to_valley(&v, tau);
        prop_assert!(s >= exact - 1e-9);
        prop_assert!(s <= exact + 2.0 * (v.len() as f64).ln() / tau + 1e-9);
    }
}
