use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::{audit, run_place_from, PlaceConfig};
use super::{derive_seed, Mode, Timings, SCHEMA_VERSION};
use crate::legal::{initial_placement, InitConfig};
use crate::model::DesignInstance;
use crate::place::{CgdConfig, CompactModels};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    /// Number of sampled configurations.
    pub budget: usize,
    pub seed: u64,
    pub base: PlaceConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            budget: 8,
            seed: 0,
            base: PlaceConfig::default(),
        }
    }
}

/// The sampled optimizer settings of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub eta_start: f64,
    pub eta_end: f64,
    pub step_pos: f64,
    pub step_theta: f64,
    pub rho: f64,
    pub zeta: f64,
    pub gamma: u32,
}

impl TuneSettings {
    /// Log-uniform for scale parameters, uniform otherwise.
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
        TuneSettings {
            eta_start: rng.gen_range(0.2..1.0),
            eta_end: log_uniform(rng, 0.01, 0.1),
            step_pos: log_uniform(rng, 0.005, 0.05),
            step_theta: rng.gen_range(1.0..10.0),
            rho: log_uniform(rng, 0.3, 3.0),
            zeta: rng.gen_range(0.2..1.0),
            gamma: rng.gen_range(1..=3),
        }
    }

    fn apply(&self, cgd: &CgdConfig) -> CgdConfig {
        let mut c = cgd.clone();
        c.eta_start = self.eta_start;
        c.eta_end = self.eta_end;
        c.step_pos = self.step_pos;
        c.step_theta = self.step_theta;
        c.zeta = self.zeta;
        c.penalty.rho = self.rho;
        c.penalty.gamma = self.gamma;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneTrial {
    pub index: usize,
    pub seed: u64,
    pub settings: TuneSettings,
    /// Sum of the final metrics relative to the seed layout; infinite for
    /// failed runs.
    pub score: f64,
    pub twl: Option<f64>,
    pub t_max: Option<f64>,
    pub warpage: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneResult {
    pub schema_version: u32,
    pub mode: Mode,
    pub best: usize,
    pub best_score: f64,
    pub seed_twl: f64,
    pub seed_t_max: Option<f64>,
    pub seed_warpage: Option<f64>,
    pub trials: Vec<TuneTrial>,
    pub best_config: PlaceConfig,
}

/// Seeded random search over the annealing schedule, step sizes and
/// penalty shaping. The score is `TWL / TWL_seed`, plus in thermo-mechanical
/// mode the temperature rise over ambient and the warpage relative to the
/// seed layout. Ties go to the earliest trial.
pub fn run_tune(design: &DesignInstance, models: Option<CompactModels>, cfg: &TuneConfig) -> Result<TuneResult> {
    if cfg.budget == 0 {
        return Err(Error::Precondition("tuning budget must be at least 1".into()));
    }
    let mut base = cfg.base.clone();
    base.audit = true;
    let init_cfg = InitConfig {
        seed: base.seed,
        ..base.init.clone()
    };
    let init = initial_placement(design, &init_cfg)?;
    let physics = base.mode == Mode::TmAware;
    let seed_audit = audit(design, &init.placement, physics.then_some(&base.oracle))?;
    let ambient = base.oracle.thermal.t_ambient;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let settings: Vec<TuneSettings> = (0..cfg.budget).map(|_| TuneSettings::sample(&mut rng)).collect();
    let trials = par::map(cfg.budget, |index| {
        let mut run = base.clone();
        run.seed = derive_seed(cfg.seed, index as u64);
        run.cgd = settings[index].apply(&base.cgd);
        run.audit = physics;
        let mut t = TuneTrial {
            index,
            seed: run.seed,
            settings: settings[index].clone(),
            score: f64::INFINITY,
            twl: None,
            t_max: None,
            warpage: None,
            error: None,
        };
        match run_place_from(design, models, &run, &init, Timings::default()) {
            Ok(out) => {
                let r = &out.report;
                let mut score = r.twl / seed_audit.twl;
                if physics {
                    if let (Some(tm), Some(ts)) = (r.t_max, seed_audit.t_max) {
                        score += (tm - ambient) / (ts - ambient).max(1e-9);
                    }
                    if let (Some(w), Some(ws)) = (r.warpage, seed_audit.warpage) {
                        score += w / ws.max(1e-12);
                    }
                }
                t.score = score;
                t.twl = Some(r.twl);
                t.t_max = r.t_max;
                t.warpage = r.warpage;
            }
            Err(e) => {
                log::warn!("tuning trial {index} failed: {e}");
                t.error = Some(e.to_string());
            }
        }
        t
    });
    let best = trials
        .iter()
        .fold(0, |b, t| if t.score < trials[b].score { t.index } else { b });
    let mut best_config = base.clone();
    best_config.cgd = trials[best].settings.apply(&base.cgd);
    Ok(TuneResult {
        schema_version: SCHEMA_VERSION,
        mode: base.mode,
        best,
        best_score: trials[best].score,
        seed_twl: seed_audit.twl,
        seed_t_max: seed_audit.t_max,
        seed_warpage: seed_audit.warpage,
        trials,
        best_config,
    })
}
