use std::time::Instant;

use serde::Serialize;

use super::dataset::Sample;
use super::flow::OracleConfig;
use super::SCHEMA_VERSION;
use crate::compact::{
    eval_tc, eval_w_with_thermal, fit_thermal, fit_warpage, snapped_footprints, CompactThermalParams,
    CompactWarpageParams, FitConfig, FitReport, GridSpec,
};
use crate::field::{field_mae, field_pearson, FieldGrid};
use crate::model::{DesignInstance, Placement};
use crate::oracle::{solve_thermal, solve_warpage};
use crate::{Error, Result};

/// Agreement of one compact model with the oracle on the training and
/// held-out samples. MAE in the field unit, Pearson dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub train_mae: f64,
    pub train_pearson: f64,
    pub test_mae: f64,
    pub test_pearson: f64,
    pub test_mae_per_sample: Vec<f64>,
    pub test_pearson_per_sample: Vec<f64>,
    pub final_mse: f64,
    pub adam_iterations: usize,
    pub lm_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub schema_version: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub thermal: ModelMetrics,
    pub warpage: ModelMetrics,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub thermal: CompactThermalParams,
    pub warpage: CompactWarpageParams,
    pub summary: FitSummary,
    pub thermal_report: FitReport,
    pub warpage_report: FitReport,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn compare(pred: &[FieldGrid], truth: &[&FieldGrid]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mae = Vec::with_capacity(pred.len());
    let mut r = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(truth) {
        mae.push(field_mae(p, t)?);
        r.push(field_pearson(p, t)?);
    }
    Ok((mae, r))
}

fn predict(
    design: &DesignInstance,
    tp: &CompactThermalParams,
    wp: &CompactWarpageParams,
    placements: &[&Placement],
) -> Result<(Vec<FieldGrid>, Vec<FieldGrid>)> {
    let grid = GridSpec::from_design(design);
    let mut ts = Vec::with_capacity(placements.len());
    let mut ws = Vec::with_capacity(placements.len());
    for p in placements {
        let fps = snapped_footprints(design, p)?;
        let t = eval_tc(tp, &fps, &grid)?;
        ws.push(eval_w_with_thermal(wp, &fps, &t)?);
        ts.push(t);
    }
    Ok((ts, ws))
}

fn metrics(report: &FitReport, test: (Vec<f64>, Vec<f64>)) -> ModelMetrics {
    ModelMetrics {
        train_mae: mean(&report.train_mae),
        train_pearson: mean(&report.train_pearson),
        test_mae: mean(&test.0),
        test_pearson: mean(&test.1),
        test_mae_per_sample: test.0,
        test_pearson_per_sample: test.1,
        final_mse: report.final_mse,
        adam_iterations: report.adam_iterations,
        lm_iterations: report.lm_iterations,
    }
}

/// Fits the thermal model on the first `n_train` samples, then the warpage
/// model on top of it, and scores both on the remaining samples.
pub fn fit_dataset(design: &DesignInstance, samples: &[Sample], n_train: usize, cfg: &FitConfig) -> Result<FitOutcome> {
    if n_train == 0 || n_train >= samples.len() {
        return Err(Error::Precondition(format!(
            "need at least one training and one test sample, got {n_train} of {}",
            samples.len()
        )));
    }
    let (train, test) = samples.split_at(n_train);
    let thermal_train: Vec<(Placement, FieldGrid)> = train.iter().map(|s| (s.0.clone(), s.1.clone())).collect();
    let (tp, thermal_report) = fit_thermal(design, &thermal_train, cfg)?;
    let warp_train: Vec<(Placement, FieldGrid)> = train.iter().map(|s| (s.0.clone(), s.2.clone())).collect();
    let (wp, warpage_report) = fit_warpage(design, &tp, &warp_train, cfg)?;

    let placements: Vec<&Placement> = test.iter().map(|s| &s.0).collect();
    let (ts, ws) = predict(design, &tp, &wp, &placements)?;
    let t_truth: Vec<&FieldGrid> = test.iter().map(|s| &s.1).collect();
    let w_truth: Vec<&FieldGrid> = test.iter().map(|s| &s.2).collect();
    let summary = FitSummary {
        schema_version: SCHEMA_VERSION,
        n_train,
        n_test: test.len(),
        thermal: metrics(&thermal_report, compare(&ts, &t_truth)?),
        warpage: metrics(&warpage_report, compare(&ws, &w_truth)?),
    };
    Ok(FitOutcome {
        thermal: tp,
        warpage: wp,
        summary,
        thermal_report,
        warpage_report,
    })
}

/// Wall-clock comparison of one oracle solve against full-grid compact
/// evaluations, both on the same layout and grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub repetitions: usize,
    pub oracle_thermal_s: f64,
    pub oracle_warpage_s: f64,
    pub compact_thermal_s: f64,
    pub compact_warpage_s: f64,
    pub thermal_speedup: f64,
    pub warpage_speedup: f64,
    pub combined_speedup: f64,
}

/// Times one oracle solve per physics and the mean of `repetitions`
/// compact evaluations.
pub fn measure_speedup(
    design: &DesignInstance,
    placement: &Placement,
    tp: &CompactThermalParams,
    wp: &CompactWarpageParams,
    oracle: &OracleConfig,
    repetitions: usize,
) -> Result<SpeedupReport> {
    let reps = repetitions.max(1);
    let t0 = Instant::now();
    let t = solve_thermal(design, placement, &oracle.thermal)?;
    let oracle_thermal_s = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    solve_warpage(&t, &oracle.plate)?;
    let oracle_warpage_s = t0.elapsed().as_secs_f64();

    let fps = snapped_footprints(design, placement)?;
    let grid = GridSpec::of_field(&t);
    let t0 = Instant::now();
    let mut tc = None;
    for _ in 0..reps {
        tc = Some(std::hint::black_box(eval_tc(tp, &fps, &grid)?));
    }
    let compact_thermal_s = t0.elapsed().as_secs_f64() / reps as f64;
    let tc = tc.expect("at least one repetition");
    let t0 = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(eval_w_with_thermal(wp, &fps, &tc)?);
    }
    let compact_warpage_s = t0.elapsed().as_secs_f64() / reps as f64;
    let ratio = |a: f64, b: f64| a / b.max(1e-12);
    Ok(SpeedupReport {
        repetitions: reps,
        oracle_thermal_s,
        oracle_warpage_s,
        compact_thermal_s,
        compact_warpage_s,
        thermal_speedup: ratio(oracle_thermal_s, compact_thermal_s),
        warpage_speedup: ratio(oracle_warpage_s, compact_warpage_s),
        combined_speedup: ratio(oracle_thermal_s + oracle_warpage_s, compact_thermal_s + compact_warpage_s),
    })
}
