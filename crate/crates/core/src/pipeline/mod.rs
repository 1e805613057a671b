//! End-to-end stages: oracle datasets, model fitting, placement runs,
//! Pareto sweeps and hyperparameter search. Every stage writes its results
//! and its wall-clock timings to separate files, so result files depend only
//! on inputs and seeds.

mod dataset;
mod fit;
mod flow;
mod pareto;
mod tune;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, load_dataset, DatasetConfig, Manifest, Sample, SampleEntry};
pub use fit::{fit_dataset, measure_speedup, FitOutcome, FitSummary, ModelMetrics, SpeedupReport};
pub use flow::{audit, run_place, run_place_from, save_place_outputs, AuditReport, OracleConfig, PlaceConfig, PlaceOutcome, PlaceReport};
pub use pareto::{non_dominated, pareto_csv, pareto_svg, run_pareto, ParetoConfig, ParetoPoint, ParetoResult};
pub use tune::{run_tune, TuneConfig, TuneResult, TuneSettings, TuneTrial};

use crate::model::write_text;
use crate::Result;

/// Version of every JSON report layout written by this module.
pub const SCHEMA_VERSION: u32 = 1;

/// Optimization mode: wirelength only, or with the physics penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WlDriven,
    TmAware,
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_text(path, &(text + "\n"))
}

/// Seconds spent in named stages, in the order they ran.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn time<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let out = f();
        self.stages.push((name.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|(n, _)| n == name).map(|s| s.1)
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.stages {
            m.insert(k.clone(), serde_json::json!(v));
        }
        serde_json::json!({ "schema_version": SCHEMA_VERSION, "seconds": m })
    }
}

/// Seed of the `k`-th independent run derived from a base seed.
pub(crate) fn derive_seed(base: u64, k: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(base);
    r.set_stream(k);
    r.next_u64()
}
