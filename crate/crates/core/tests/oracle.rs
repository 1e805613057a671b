mod common;

use atmplace::model::{ChipletSpec, DesignInstance, InterposerSpec, Placement, Pose};
use atmplace::oracle::{rasterize_power, solve_thermal, ThermalOracleConfig};
use common::{plate_mms_error, thermal_cfg, thermal_mms_error};


#[test]
fn thermal_manufactured_solution_is_second_order() {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| thermal_mms_error(n)).collect();
    assert!(e[0] / e[1] >= 3.5, "{e:?}");
    assert!(e[1] / e[2] >= 3.5, "{e:?}");
    println!("thermal errors {e:?}");
}

#[test]
fn plate_manufactured_solution_is_second_order() {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| plate_mms_error(n)).collect();
    println!("plate errors {e:?}");
    assert!(e[0] / e[1] >= 3.5, "{e:?}");
    assert!(e[1] / e[2] >= 3.5, "{e:?}");
}

fn design(chips: &[(f64, f64, f64)]) -> DesignInstance {
    let chiplets = chips
        .iter()
        .enumerate()
        .map(|(id, &(w, h, p))| ChipletSpec {
            id,
            w,
            h,
            t: 0.5,
            power_density: p,
            bumps: vec![],
        })
        .collect();
    DesignInstance::new(InterposerSpec::new(20.0, 20.0, 16), chiplets, vec![]).unwrap()
}

#[test]
fn mirror_symmetric_placement_gives_symmetric_field() {
    let d = design(&[(4.0, 3.0, 1e6), (4.0, 3.0, 1e6)]);
    let p = Placement::new(vec![Pose::new(5.0, 8.0, 0.0), Pose::new(15.0, 8.0, 0.0)]);
    let t = solve_thermal(&d, &p, &ThermalOracleConfig { refine: 2, ..thermal_cfg() }).unwrap();
    let scale = t.max() - 25.0;
    for j in 0..t.ny {
        for i in 0..t.nx {
            let m = t.get(t.nx - 1 - i, j);
            assert!((t.get(i, j) - m).abs() <= 1e-6 * scale);
        }
    }
}

#[test]
fn single_chiplet_peak_lies_on_footprint_and_above_ambient() {
    let d = design(&[(3.0, 5.0, 2e6)]);
    let p = Placement::new(vec![Pose::new(6.0, 13.0, 90.0)]);
    let t = solve_thermal(&d, &p, &thermal_cfg()).unwrap();
    let (i, j) = t.argmax();
    let (x, y) = t.center(i, j);
    assert!((x - 6.0).abs() <= 2.5 && (y - 13.0).abs() <= 1.5, "peak at ({x}, {y})");
    assert!(t.values.iter().all(|&v| v >= 25.0));
}

#[test]
fn refined_solve_conserves_rastered_power() {
    let d = design(&[(3.3, 4.1, 1.5e6)]);
    let p = Placement::new(vec![Pose::new(7.1, 9.3, 0.0)]);
    let fine = rasterize_power(&d, &p, 64, 64).unwrap();
    let coarse = rasterize_power(&d, &p, 16, 16).unwrap();
    let tf: f64 = fine.values.iter().sum::<f64>() * fine.dx * fine.dy;
    let tc: f64 = coarse.values.iter().sum::<f64>() * coarse.dx * coarse.dy;
    assert!((tf - tc).abs() < 1e-9 * tc);
}
