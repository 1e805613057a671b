use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{save_json, Mode, Timings, SCHEMA_VERSION};
use crate::compact::{eval_tc, eval_w_with_thermal, snapped_footprints, GridSpec};
use crate::field::FieldGrid;
use crate::legal::{initial_placement, legalize, InitConfig, InitOutcome, LegalizeConfig, LegalizeOutcome};
use crate::model::{
    check_legal, exact_wirelength, placement_to_json, warpage_metric, write_text, DesignInstance, LegalityReport,
    Placement,
};
use crate::oracle::{solve_thermal, solve_warpage, PlateOracleConfig, ThermalOracleConfig};
use crate::place::{run_cgd, snap_orientations, trajectory_csv, CgdConfig, CompactModels, TrajectoryRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub thermal: ThermalOracleConfig,
    pub plate: PlateOracleConfig,
}

/// Settings of one placement run. The run seed overrides the seeds of the
/// individual stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceConfig {
    pub mode: Mode,
    pub seed: u64,
    pub init: InitConfig,
    pub cgd: CgdConfig,
    pub legalize: LegalizeConfig,
    pub oracle: OracleConfig,
    /// Evaluate the final layout with both oracles.
    pub audit: bool,
}

impl Default for PlaceConfig {
    fn default() -> Self {
        PlaceConfig {
            mode: Mode::WlDriven,
            seed: 0,
            init: InitConfig {
                time_budget_s: 600.0,
                node_limit: Some(3000),
                ..InitConfig::default()
            },
            cgd: CgdConfig::default(),
            legalize: LegalizeConfig {
                time_budget_s: 600.0,
                node_limit: Some(3000),
                ..LegalizeConfig::default()
            },
            oracle: OracleConfig::default(),
            audit: true,
        }
    }
}

impl PlaceConfig {
    /// Optimizer settings for this mode; WL-driven runs drop both physics
    /// penalties.
    pub fn effective_cgd(&self) -> CgdConfig {
        let mut c = self.cgd.clone();
        c.seed = self.seed;
        if self.mode == Mode::WlDriven {
            c.penalty.lambda_t = 0.0;
            c.penalty.lambda_w = 0.0;
        }
        c
    }
}

/// Exact metrics of a snapped layout, with the physics from the oracles.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub legal: bool,
    pub legality: LegalityReport,
    pub twl: f64,
    pub t_max: Option<f64>,
    pub warpage: Option<f64>,
    #[serde(skip)]
    pub thermal: Option<FieldGrid>,
    #[serde(skip)]
    pub displacement: Option<FieldGrid>,
}

pub fn audit(design: &DesignInstance, placement: &Placement, oracle: Option<&OracleConfig>) -> Result<AuditReport> {
    let legality = check_legal(design, placement)?;
    let twl = exact_wirelength(design, placement)?;
    let (thermal, displacement) = match oracle {
        Some(o) => {
            let t = solve_thermal(design, placement, &o.thermal)?;
            let w = solve_warpage(&t, &o.plate)?;
            (Some(t), Some(w))
        }
        None => (None, None),
    };
    Ok(AuditReport {
        legal: legality.is_legal(),
        legality,
        twl,
        t_max: thermal.as_ref().map(FieldGrid::max),
        warpage: displacement.as_ref().map(warpage_metric).transpose()?,
        thermal,
        displacement,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CgdSummary {
    pub iterations: usize,
    pub converged: bool,
    pub noise_events: usize,
    pub lambda_dens0: f64,
    pub final_eta: f64,
    pub warp_tau: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlaceReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub num_chiplets: usize,
    /// Exact wirelength of the final layout, mm.
    pub twl: f64,
    pub legal: bool,
    /// Oracle peak temperature, °C.
    pub t_max: Option<f64>,
    /// Oracle peak-to-valley displacement, µm.
    pub warpage: Option<f64>,
    /// Same metrics from the compact models, when available.
    pub compact_t_max: Option<f64>,
    pub compact_warpage: Option<f64>,
    pub seed_twl: f64,
    pub init: InitOutcome,
    pub cgd: CgdSummary,
    pub legalization: LegalizeOutcome,
    pub legality: LegalityReport,
}

#[derive(Debug, Clone)]
pub struct PlaceOutcome {
    pub placement: Placement,
    pub trajectory: Vec<TrajectoryRow>,
    pub report: PlaceReport,
    pub timings: Timings,
    pub audit: AuditReport,
}

/// Seeding MILP, conjugate-gradient optimization, snapping, legalization
/// and the final audit.
pub fn run_place(design: &DesignInstance, models: Option<CompactModels>, cfg: &PlaceConfig) -> Result<PlaceOutcome> {
    let mut timings = Timings::default();
    let init_cfg = InitConfig {
        seed: cfg.seed,
        ..cfg.init.clone()
    };
    let init = timings.time("init", || initial_placement(design, &init_cfg))?;
    run_place_from(design, models, cfg, &init, timings)
}

/// [`run_place`] from an existing seed layout.
pub fn run_place_from(
    design: &DesignInstance,
    models: Option<CompactModels>,
    cfg: &PlaceConfig,
    init: &InitOutcome,
    mut timings: Timings,
) -> Result<PlaceOutcome> {
    if cfg.mode == Mode::TmAware && models.is_none() {
        return Err(Error::Precondition("thermo-mechanical mode needs fitted compact models".into()));
    }
    let cgd_cfg = cfg.effective_cgd();
    let cgd_models = if cfg.mode == Mode::TmAware { models } else { None };
    let cgd = timings.time("opt", || run_cgd(design, &init.placement, cgd_models, &cgd_cfg))?;
    let snapped = snap_orientations(&cgd.placement, cgd.final_eta);
    let leg_cfg = LegalizeConfig {
        seed: cfg.seed,
        ..cfg.legalize.clone()
    };
    let legal = timings.time("legalization", || legalize(design, &snapped, &leg_cfg))?;
    let oracle = cfg.audit.then_some(&cfg.oracle);
    let audit = timings.time("audit", || audit(design, &legal.placement, oracle))?;
    if !audit.legal {
        return Err(Error::InfeasibleLegalization(format!(
            "final layout is not legal: {:?}",
            audit.legality
        )));
    }
    let (compact_t_max, compact_warpage) = match models {
        Some(m) => {
            let fps = snapped_footprints(design, &legal.placement)?;
            let t = eval_tc(m.thermal, &fps, &GridSpec::from_design(design))?;
            let w = eval_w_with_thermal(m.warpage, &fps, &t)?;
            (Some(t.max()), Some(warpage_metric(&w)?))
        }
        None => (None, None),
    };
    let report = PlaceReport {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode,
        seed: cfg.seed,
        num_chiplets: design.num_chiplets(),
        twl: audit.twl,
        legal: audit.legal,
        t_max: audit.t_max,
        warpage: audit.warpage,
        compact_t_max,
        compact_warpage,
        seed_twl: exact_wirelength(design, &init.placement)?,
        init: init.clone(),
        cgd: CgdSummary {
            iterations: cgd.iterations,
            converged: cgd.converged,
            noise_events: cgd.noise_events,
            lambda_dens0: cgd.lambda_dens0,
            final_eta: cgd.final_eta,
            warp_tau: cgd.warp_tau,
        },
        legalization: legal.clone(),
        legality: audit.legality.clone(),
    };
    Ok(PlaceOutcome {
        placement: legal.placement,
        trajectory: cgd.trajectory,
        report,
        timings,
        audit,
    })
}

/// Writes `placement.json`, `trajectory.csv`, `report.json`, `timings.json`
/// and, when audited, the oracle fields as CSV and SVG.
pub fn save_place_outputs(dir: &Path, out: &PlaceOutcome) -> Result<()> {
    write_text(&dir.join("placement.json"), &placement_to_json(&out.placement))?;
    write_text(&dir.join("trajectory.csv"), &trajectory_csv(&out.trajectory))?;
    save_json(&dir.join("report.json"), &out.report)?;
    save_json(&dir.join("timings.json"), &out.timings.to_json())?;
    if let Some(t) = &out.audit.thermal {
        write_text(&dir.join("thermal.csv"), &t.to_csv())?;
        write_text(&dir.join("thermal.svg"), &t.to_svg("temperature", "C"))?;
    }
    if let Some(w) = &out.audit.displacement {
        write_text(&dir.join("warpage.csv"), &w.to_csv())?;
        write_text(&dir.join("warpage.svg"), &w.to_svg("displacement", "um"))?;
    }
    Ok(())
}
