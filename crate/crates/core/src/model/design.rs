use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterposerSpec {
    #[serde(rename = "width_mm")]
    pub width: f64,
    #[serde(rename = "height_mm")]
    pub height: f64,
    /// Cells per side of analysis grids.
    pub grid: usize,
    #[serde(rename = "min_spacing_mm", default = "default_spacing")]
    pub min_spacing: f64,
}

fn default_spacing() -> f64 {
    0.1
}

impl InterposerSpec {
    pub fn new(width: f64, height: f64, grid: usize) -> Self {
        InterposerSpec {
            width,
            height,
            grid,
            min_spacing: default_spacing(),
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpPin {
    pub pin: usize,
    /// Offset from the chiplet center, mm.
    #[serde(rename = "x_mm")]
    pub x: f64,
    #[serde(rename = "y_mm")]
    pub y: f64,
    pub clump: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipletSpec {
    pub id: usize,
    #[serde(rename = "w_mm")]
    pub w: f64,
    #[serde(rename = "h_mm")]
    pub h: f64,
    #[serde(rename = "t_mm")]
    pub t: f64,
    #[serde(rename = "power_w_per_m2")]
    pub power_density: f64,
    pub bumps: Vec<BumpPin>,
}

impl ChipletSpec {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinRef {
    pub chiplet: usize,
    pub pin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub id: usize,
    pub a: PinRef,
    pub b: PinRef,
}

/// Two-pin net with pin offsets looked up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedNet {
    pub i: usize,
    pub pi: (f64, f64),
    pub j: usize,
    pub pj: (f64, f64),
}

/// A validated placement problem. Chiplet `k` must carry id `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInstance {
    pub interposer: InterposerSpec,
    pub chiplets: Vec<ChipletSpec>,
    pub nets: Vec<Net>,
    resolved: Vec<ResolvedNet>,
    clump_offsets: BTreeMap<(usize, usize), (f64, f64)>,
    net_counts: BTreeMap<(usize, usize), usize>,
}

impl DesignInstance {
    pub fn new(interposer: InterposerSpec, chiplets: Vec<ChipletSpec>, nets: Vec<Net>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if !(interposer.width > 0.0 && interposer.height > 0.0) {
            return bad(format!(
                "interposer must have positive size, got {} x {}",
                interposer.width, interposer.height
            ));
        }
        if interposer.grid < 8 {
            return bad(format!("grid must be at least 8, got {}", interposer.grid));
        }
        if !(interposer.min_spacing >= 0.0) {
            return bad("min_spacing_mm must be non-negative".into());
        }
        let mut pin_index: Vec<BTreeMap<usize, (f64, f64)>> = Vec::with_capacity(chiplets.len());
        for (k, c) in chiplets.iter().enumerate() {
            if c.id != k {
                return bad(format!("chiplet at position {k} has id {}; ids must be 0..N in order", c.id));
            }
            if !(c.w > 0.0 && c.h > 0.0 && c.t > 0.0) {
                return bad(format!("chiplet {k} must have positive dimensions"));
            }
            if !(c.power_density >= 0.0) || !c.power_density.is_finite() {
                return bad(format!("chiplet {k} has invalid power density {}", c.power_density));
            }
            let mut pins = BTreeMap::new();
            for b in &c.bumps {
                let tol = 1e-9;
                if b.x.abs() > c.w / 2.0 + tol || b.y.abs() > c.h / 2.0 + tol {
                    return bad(format!(
                        "pin {} of chiplet {k} at ({}, {}) lies outside the chiplet",
                        b.pin, b.x, b.y
                    ));
                }
                if pins.insert(b.pin, (b.x, b.y)).is_some() {
                    return bad(format!("chiplet {k} has duplicate pin id {}", b.pin));
                }
            }
            pin_index.push(pins);
        }
        let mut resolved = Vec::with_capacity(nets.len());
        let lookup = |r: &PinRef, net: usize| -> Result<(f64, f64)> {
            pin_index
                .get(r.chiplet)
                .and_then(|p| p.get(&r.pin))
                .copied()
                .ok_or_else(|| {
                    Error::InvalidDesign(format!(
                        "net {net} references missing pin {} on chiplet {}",
                        r.pin, r.chiplet
                    ))
                })
        };
        for n in &nets {
            if n.a.chiplet == n.b.chiplet {
                return bad(format!("net {} connects chiplet {} to itself", n.id, n.a.chiplet));
            }
            resolved.push(ResolvedNet {
                i: n.a.chiplet,
                pi: lookup(&n.a, n.id)?,
                j: n.b.chiplet,
                pj: lookup(&n.b, n.id)?,
            });
        }
        let mut sums: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
        let mut net_counts = BTreeMap::new();
        for r in &resolved {
            for (me, other, p) in [(r.i, r.j, r.pi), (r.j, r.i, r.pj)] {
                let e = sums.entry((me, other)).or_insert((0.0, 0.0, 0));
                e.0 += p.0;
                e.1 += p.1;
                e.2 += 1;
                *net_counts.entry((me, other)).or_insert(0) += 1;
            }
        }
        // each net was counted once per direction
        let clump_offsets = sums
            .into_iter()
            .map(|(k, (sx, sy, n))| (k, (sx / n as f64, sy / n as f64)))
            .collect();
        Ok(DesignInstance {
            interposer,
            chiplets,
            nets,
            resolved,
            clump_offsets,
            net_counts,
        })
    }

    pub fn num_chiplets(&self) -> usize {
        self.chiplets.len()
    }

    pub fn resolved_nets(&self) -> &[ResolvedNet] {
        &self.resolved
    }

    /// Centroid on chiplet `i` of the pins whose nets reach chiplet `j`.
    pub fn clump_offset(&self, i: usize, j: usize) -> Option<(f64, f64)> {
        self.clump_offsets.get(&(i, j)).copied()
    }

    /// Number of nets between chiplets `i` and `j` (symmetric).
    pub fn net_count(&self, i: usize, j: usize) -> usize {
        self.net_counts.get(&(i, j)).copied().unwrap_or(0)
    }

    /// Connected pairs `(i, j)` with `i < j`.
    pub fn connected_pairs(&self) -> Vec<(usize, usize)> {
        self.net_counts
            .keys()
            .filter(|(i, j)| i < j)
            .copied()
            .collect()
    }

    pub fn total_chiplet_area(&self) -> f64 {
        self.chiplets.iter().map(ChipletSpec::area).sum()
    }

    pub fn total_power_w(&self) -> f64 {
        self.chiplets
            .iter()
            .map(|c| c.power_density * c.area() * 1e-6)
            .sum()
    }

    pub fn whitespace(&self) -> f64 {
        1.0 - self.total_chiplet_area() / self.interposer.area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chiplet(id: usize, pins: &[(usize, f64, f64)]) -> ChipletSpec {
        ChipletSpec {
            id,
            w: 2.0,
            h: 2.0,
            t: 0.5,
            power_density: 1e5,
            bumps: pins
                .iter()
                .map(|&(pin, x, y)| BumpPin { pin, x, y, clump: 0 })
                .collect(),
        }
    }

    fn net(id: usize, a: (usize, usize), b: (usize, usize)) -> Net {
        Net {
            id,
            a: PinRef { chiplet: a.0, pin: a.1 },
            b: PinRef { chiplet: b.0, pin: b.1 },
        }
    }

    #[test]
    fn clump_offsets_are_centroids() {
        let d = DesignInstance::new(
            InterposerSpec::new(10.0, 10.0, 16),
            vec![
                chiplet(0, &[(0, 1.0, 0.0), (1, 1.0, 0.5)]),
                chiplet(1, &[(0, -1.0, 0.2), (1, -1.0, 0.4)]),
            ],
            vec![net(0, (0, 0), (1, 0)), net(1, (0, 1), (1, 1))],
        )
        .unwrap();
        assert_eq!(d.clump_offset(0, 1), Some((1.0, 0.25)));
        let (x, y) = d.clump_offset(1, 0).unwrap();
        assert!((x + 1.0).abs() < 1e-12 && (y - 0.3).abs() < 1e-12);
        assert_eq!(d.net_count(0, 1), 2);
        assert_eq!(d.net_count(1, 0), 2);
        assert_eq!(d.connected_pairs(), vec![(0, 1)]);
    }

    #[test]
    fn rejects_self_nets_and_missing_pins() {
        let ip = InterposerSpec::new(10.0, 10.0, 16);
        let cs = vec![chiplet(0, &[(0, 0.0, 0.0), (1, 0.0, 0.0)]), chiplet(1, &[(0, 0.0, 0.0)])];
        assert!(DesignInstance::new(ip.clone(), cs.clone(), vec![net(0, (0, 0), (0, 1))]).is_err());
        assert!(DesignInstance::new(ip, cs, vec![net(0, (0, 0), (1, 7))]).is_err());
    }

    #[test]
    fn rejects_pin_outside_chiplet() {
        let ip = InterposerSpec::new(10.0, 10.0, 16);
        assert!(DesignInstance::new(ip, vec![chiplet(0, &[(0, 1.5, 0.0)])], vec![]).is_err());
    }
}
