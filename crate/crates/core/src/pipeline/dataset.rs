use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::OracleConfig;
use super::{derive_seed, save_json, SCHEMA_VERSION};
use crate::field::FieldGrid;
use crate::legal::{legalize, LegalizeConfig};
use crate::model::{
    check_legal, load_placement, placement_to_json, rotated_dims, write_text, DesignInstance, Placement, Pose,
    ORIENTATIONS,
};
use crate::oracle::{solve_thermal, solve_warpage};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 10,
            seed: 0,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub placement: String,
    pub thermal: String,
    pub warpage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub count: usize,
    pub num_chiplets: usize,
    pub grid: usize,
    pub oracle: OracleConfig,
    pub samples: Vec<SampleEntry>,
}

/// One labelled sample: a legal layout with its oracle temperature and
/// displacement fields.
pub type Sample = (Placement, FieldGrid, FieldGrid);

/// Uniform random centres and orientations, repaired into a legal layout
/// with the greedy legalizer.
fn random_legal(design: &DesignInstance, seed: u64) -> Result<Placement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ip = &design.interposer;
    let mut poses = Vec::with_capacity(design.num_chiplets());
    for c in &design.chiplets {
        let theta = ORIENTATIONS[rng.gen_range(0..4)];
        let (w, h) = rotated_dims(c.w, c.h, theta)?;
        let x = rng.gen_range(0.0..=1.0) * (ip.width - w).max(0.0) + w / 2.0;
        let y = rng.gen_range(0.0..=1.0) * (ip.height - h).max(0.0) + h / 2.0;
        poses.push(Pose::new(x, y, theta));
    }
    let cfg = LegalizeConfig {
        lambda_w: 0.0,
        greedy_threshold: 0,
        ..LegalizeConfig::default()
    };
    Ok(legalize(design, &Placement::new(poses), &cfg)?.placement)
}

fn label(design: &DesignInstance, placement: &Placement, oracle: &OracleConfig) -> Result<(FieldGrid, FieldGrid, f64)> {
    let t0 = Instant::now();
    let t = solve_thermal(design, placement, &oracle.thermal)?;
    let w = solve_warpage(&t, &oracle.plate)?;
    Ok((t, w, t0.elapsed().as_secs_f64()))
}

/// Random legal layouts labelled by both oracles. With `dir` set, each
/// sample is written to `sample_NNN/` next to `manifest.json`, and the oracle
/// wall-clock times to `timings.json`.
///
/// Returns the manifest, the samples and the oracle seconds per sample.
pub fn generate_dataset(
    design: &DesignInstance,
    cfg: &DatasetConfig,
    dir: Option<&Path>,
) -> Result<(Manifest, Vec<Sample>, Vec<f64>)> {
    if cfg.count < 2 {
        return Err(Error::Precondition(format!(
            "a dataset needs at least 2 samples for fitting, got {}",
            cfg.count
        )));
    }
    let labelled = par::map(cfg.count, |id| -> Result<(Sample, f64)> {
        let wrap = |e: Error| Error::Sample { id, source: Box::new(e) };
        let p = random_legal(design, derive_seed(cfg.seed, id as u64)).map_err(wrap)?;
        if !check_legal(design, &p).map_err(wrap)?.is_legal() {
            return Err(wrap(Error::InfeasibleLegalization("repaired sample is not legal".into())));
        }
        let (t, w, secs) = label(design, &p, &cfg.oracle).map_err(wrap)?;
        Ok(((p, t, w), secs))
    });
    let mut samples = Vec::with_capacity(cfg.count);
    let mut seconds = Vec::with_capacity(cfg.count);
    for r in labelled {
        let (s, secs) = r?;
        samples.push(s);
        seconds.push(secs);
    }
    let entries: Vec<SampleEntry> = (0..cfg.count)
        .map(|id| {
            let d = format!("sample_{id:03}");
            SampleEntry {
                id,
                placement: format!("{d}/placement.json"),
                thermal: format!("{d}/thermal.csv"),
                warpage: format!("{d}/warpage.csv"),
            }
        })
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        count: cfg.count,
        num_chiplets: design.num_chiplets(),
        grid: design.interposer.grid,
        oracle: cfg.oracle.clone(),
        samples: entries,
    };
    if let Some(dir) = dir {
        for (e, (p, t, w)) in manifest.samples.iter().zip(&samples) {
            write_text(&dir.join(&e.placement), &placement_to_json(p))?;
            write_text(&dir.join(&e.thermal), &t.to_csv())?;
            write_text(&dir.join(&e.warpage), &w.to_csv())?;
        }
        save_json(&dir.join("manifest.json"), &manifest)?;
        save_json(
            &dir.join("timings.json"),
            &serde_json::json!({ "schema_version": SCHEMA_VERSION, "oracle_seconds": seconds }),
        )?;
    }
    Ok((manifest, samples, seconds))
}

/// Reads a dataset written by [`generate_dataset`].
pub fn load_dataset(design: &DesignInstance, dir: &Path) -> Result<(Manifest, Vec<Sample>)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    if manifest.num_chiplets != design.num_chiplets() {
        return Err(Error::ShapeMismatch {
            expected: format!("dataset for {} chiplets", design.num_chiplets()),
            found: manifest.num_chiplets.to_string(),
        });
    }
    let (w, h) = (design.interposer.width, design.interposer.height);
    let read = |rel: &str| -> Result<String> {
        let p = dir.join(rel);
        std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let samples = manifest
        .samples
        .iter()
        .map(|e| {
            let p = load_placement(&dir.join(&e.placement))?;
            let t = FieldGrid::from_csv(&read(&e.thermal)?, w, h)?;
            let d = FieldGrid::from_csv(&read(&e.warpage)?, w, h)?;
            Ok((p, t, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}
