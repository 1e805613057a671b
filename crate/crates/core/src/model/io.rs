use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChipletSpec, DesignInstance, InterposerSpec, Net, Placement, Pose};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DesignFile {
    interposer: InterposerSpec,
    chiplets: Vec<ChipletSpec>,
    nets: Vec<Net>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    chiplet: usize,
    x_mm: f64,
    y_mm: f64,
    theta_deg: f64,
}

const DESIGN_KEYS: &[&str] = &["interposer", "chiplets", "nets"];
const INTERPOSER_KEYS: &[&str] = &["width_mm", "height_mm", "grid", "min_spacing_mm"];
const CHIPLET_KEYS: &[&str] = &["id", "w_mm", "h_mm", "t_mm", "power_w_per_m2", "bumps"];
const BUMP_KEYS: &[&str] = &["pin", "x_mm", "y_mm", "clump"];
const NET_KEYS: &[&str] = &["id", "a", "b"];
const PIN_REF_KEYS: &[&str] = &["chiplet", "pin"];
const POSE_KEYS: &[&str] = &["chiplet", "x_mm", "y_mm", "theta_deg"];

fn warn_unknown(v: &Value, known: &[&str], at: &str) {
    if let Value::Object(map) = v {
        for k in map.keys() {
            if !known.contains(&k.as_str()) {
                log::warn!("ignoring unknown field '{k}' in {at}");
            }
        }
    }
}

fn each<'a>(v: &'a Value, key: &str) -> impl Iterator<Item = &'a Value> {
    v.get(key)
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
}

fn parse_err(context: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    }
}

pub fn design_from_json(text: &str, context: &str) -> Result<DesignInstance> {
    let raw: Value = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    warn_unknown(&raw, DESIGN_KEYS, "design");
    if let Some(ip) = raw.get("interposer") {
        warn_unknown(ip, INTERPOSER_KEYS, "interposer");
    }
    for (k, c) in each(&raw, "chiplets").enumerate() {
        warn_unknown(c, CHIPLET_KEYS, &format!("chiplets[{k}]"));
        for b in each(c, "bumps") {
            warn_unknown(b, BUMP_KEYS, &format!("chiplets[{k}].bumps"));
        }
    }
    for (k, n) in each(&raw, "nets").enumerate() {
        if n.get("pins").is_some() {
            return Err(Error::Parse {
                context: context.to_string(),
                message: format!("nets[{k}] is a multi-pin net; only two-pin nets (a, b) are supported"),
            });
        }
        warn_unknown(n, NET_KEYS, &format!("nets[{k}]"));
        for end in ["a", "b"] {
            if let Some(e) = n.get(end) {
                warn_unknown(e, PIN_REF_KEYS, &format!("nets[{k}].{end}"));
            }
        }
    }
    let file: DesignFile = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    DesignInstance::new(file.interposer, file.chiplets, file.nets)
}

pub fn design_to_json(design: &DesignInstance) -> String {
    let file = DesignFile {
        interposer: design.interposer.clone(),
        chiplets: design.chiplets.clone(),
        nets: design.nets.clone(),
    };
    serde_json::to_string_pretty(&file).expect("design serializes") + "\n"
}

pub fn placement_from_json(text: &str, context: &str) -> Result<Placement> {
    let raw: Value = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    if let Value::Array(items) = &raw {
        for v in items {
            warn_unknown(v, POSE_KEYS, "placement entry");
        }
    }
    let mut recs: Vec<PoseRecord> = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    recs.sort_by_key(|r| r.chiplet);
    for (k, r) in recs.iter().enumerate() {
        if r.chiplet != k {
            return Err(Error::InvalidPlacement(format!(
                "{context}: chiplet indices must cover 0..{} exactly once",
                recs.len()
            )));
        }
    }
    Ok(Placement::new(
        recs.iter()
            .map(|r| Pose::new(r.x_mm, r.y_mm, r.theta_deg))
            .collect(),
    ))
}

pub fn placement_to_json(placement: &Placement) -> String {
    let recs: Vec<PoseRecord> = placement
        .poses
        .iter()
        .enumerate()
        .map(|(k, p)| PoseRecord {
            chiplet: k,
            x_mm: p.x,
            y_mm: p.y,
            theta_deg: p.theta,
        })
        .collect();
    serde_json::to_string_pretty(&recs).expect("placement serializes") + "\n"
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_design(path: &Path) -> Result<DesignInstance> {
    design_from_json(&read(path)?, &path.display().to_string())
}

pub fn save_design(path: &Path, design: &DesignInstance) -> Result<()> {
    write_text(path, &design_to_json(design))
}

pub fn load_placement(path: &Path) -> Result<Placement> {
    placement_from_json(&read(path)?, &path.display().to_string())
}

pub fn save_placement(path: &Path, placement: &Placement) -> Result<()> {
    write_text(path, &placement_to_json(placement))
}
