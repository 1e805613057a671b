use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BumpPin, ChipletSpec, DesignInstance, InterposerSpec, Net, PinRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfaceKind {
    /// Standard x16 die-to-die module.
    Standard16,
    /// Advanced x32 die-to-die module.
    Advanced32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSpec {
    pub cols: usize,
    pub lanes: usize,
    pub bump_pitch_um: f64,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
}

impl InterfaceKind {
    pub fn spec(self) -> InterfaceSpec {
        match self {
            InterfaceKind::Standard16 => InterfaceSpec {
                cols: 12,
                lanes: 16,
                bump_pitch_um: 100.0,
                pitch_x_um: 180.0,
                pitch_y_um: 90.0,
            },
            InterfaceKind::Advanced32 => InterfaceSpec {
                cols: 16,
                lanes: 32,
                bump_pitch_um: 25.0,
                pitch_x_um: 27.0,
                pitch_y_um: 42.0,
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterfaceKind::Standard16 => "x16",
            InterfaceKind::Advanced32 => "x32",
        }
    }
}

impl std::str::FromStr for InterfaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x16" | "standard" | "standard16" => Ok(InterfaceKind::Standard16),
            "x32" | "advanced" | "advanced32" => Ok(InterfaceKind::Advanced32),
            other => Err(Error::Precondition(format!(
                "unknown interface '{other}', expected x16 or x32"
            ))),
        }
    }
}

const SIDE_RANGE: (f64, f64) = (6.0, 14.0);
const THICKNESS_RANGE: (f64, f64) = (0.3, 0.8);
const POWER_RANGE: (f64, f64) = (2e5, 3e6);
/// Distance of a clump's outer bump row from the chiplet edge, mm.
const EDGE_INSET: f64 = 0.15;

/// Rounds to `digits` decimals.
fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// Which chiplet edge faces direction `(dx, dy)`: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
fn facing_edge(dx: f64, dy: f64) -> usize {
    if dx.abs() >= dy.abs() {
        if dx >= 0.0 {
            0
        } else {
            2
        }
    } else if dy >= 0.0 {
        1
    } else {
        3
    }
}

/// Shelf packing at orientation 0 with `gap` spacing; true when everything fits.
pub(crate) fn shelf_fits(dims: &[(f64, f64)], width: f64, height: f64, gap: f64) -> bool {
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by(|&a, &b| dims[b].1.total_cmp(&dims[a].1).then(a.cmp(&b)));
    let (mut x, mut y, mut shelf_h) = (0.0f64, 0.0f64, 0.0f64);
    for k in order {
        let (w, h) = dims[k];
        if x > 0.0 && x + w > width {
            y += shelf_h + gap;
            x = 0.0;
            shelf_h = 0.0;
        }
        if x + w > width || y + h > height {
            return false;
        }
        x += w + gap;
        shelf_h = shelf_h.max(h);
    }
    true
}

/// Random benchmark with `n` chiplets whose interposer leaves roughly
/// `whitespace` of its area empty.
///
/// Connectivity is a random spanning tree plus extra random edges. Every
/// connected pair gets one interface clump per side, on the edge of each
/// chiplet facing its partner's random anchor point, wired lane to lane.
pub fn synthesize_benchmark(seed: u64, n: usize, kind: InterfaceKind, whitespace: f64) -> Result<DesignInstance> {
    if n < 2 {
        return Err(Error::Precondition(format!("need at least 2 chiplets, got {n}")));
    }
    if !(0.3..=0.7).contains(&whitespace) {
        return Err(Error::Precondition(format!(
            "whitespace target {whitespace} outside [0.3, 0.7]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                round_to(rng.gen_range(SIDE_RANGE.0..SIDE_RANGE.1), 2),
                round_to(rng.gen_range(SIDE_RANGE.0..SIDE_RANGE.1), 2),
            )
        })
        .collect();
    let thickness: Vec<f64> = (0..n)
        .map(|_| round_to(rng.gen_range(THICKNESS_RANGE.0..THICKNESS_RANGE.1), 2))
        .collect();
    let power: Vec<f64> = (0..n)
        .map(|_| round_to(rng.gen_range(POWER_RANGE.0..POWER_RANGE.1), -3))
        .collect();
    let area: f64 = dims.iter().map(|(w, h)| w * h).sum();
    let side = round_to((area / (1.0 - whitespace)).sqrt(), 2);
    let interposer = InterposerSpec::new(side, side, 64);
    if !shelf_fits(&dims, side, side, interposer.min_spacing) {
        return Err(Error::Generator(format!(
            "{n} chiplets do not fit a {side} mm interposer at whitespace {whitespace}"
        )));
    }

    // connectivity: random spanning tree, then extra edges
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let (a, b) = (order[k].min(parent), order[k].max(parent));
        pairs.push((a, b));
    }
    let extra = n / 2;
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let p = (a.min(b), a.max(b));
        if a != b && !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    pairs.sort();

    let anchors: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
        .collect();
    // clumps per (chiplet, edge), in pair order
    let mut edge_slots: Vec<[Vec<usize>; 4]> = vec![Default::default(); n];
    // entry 2p + s holds (chiplet, edge) for side s of pair p
    let mut clump_edge: Vec<(usize, usize)> = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for (me, other) in [(a, b), (b, a)] {
            let e = facing_edge(anchors[other].0 - anchors[me].0, anchors[other].1 - anchors[me].1);
            edge_slots[me][e].push(p);
            clump_edge.push((me, e));
        }
    }

    let iface = kind.spec();
    let px = iface.pitch_x_um * 1e-3;
    let py = iface.pitch_y_um * 1e-3;
    let mut bumps: Vec<Vec<BumpPin>> = vec![Vec::new(); n];
    let mut clump_counter = vec![0usize; n];
    // pins of (pair, side) in lane order
    let mut lane_pins: Vec<[Vec<usize>; 2]> = vec![Default::default(); pairs.len()];
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for (s, me) in [a, b].into_iter().enumerate() {
            let (w, h) = dims[me];
            let e = clump_edge[2 * p + s].1;
            let slots = &edge_slots[me][e];
            let slot = slots.iter().position(|&q| q == p).unwrap_or(0);
            let frac = (slot + 1) as f64 / (slots.len() + 1) as f64;
            let clump = clump_counter[me];
            clump_counter[me] += 1;
            let along_len = if e % 2 == 0 { h } else { w };
            let center_along = -along_len / 2.0 + frac * along_len;
            for lane in 0..iface.lanes {
                let col = lane % iface.cols;
                let row = lane / iface.cols;
                let along = center_along + (col as f64 - (iface.cols as f64 - 1.0) / 2.0) * px;
                let depth = EDGE_INSET + row as f64 * py;
                let along = along.clamp(-along_len / 2.0, along_len / 2.0);
                let (x, y) = match e {
                    0 => (w / 2.0 - depth, along),
                    1 => (along, h / 2.0 - depth),
                    2 => (-w / 2.0 + depth, along),
                    _ => (along, -h / 2.0 + depth),
                };
                let pin = bumps[me].len();
                bumps[me].push(BumpPin {
                    pin,
                    x: round_to(x, 6),
                    y: round_to(y, 6),
                    clump,
                });
                lane_pins[p][s].push(pin);
            }
        }
    }
    let mut nets = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for lane in 0..iface.lanes {
            nets.push(Net {
                id: nets.len(),
                a: PinRef {
                    chiplet: a,
                    pin: lane_pins[p][0][lane],
                },
                b: PinRef {
                    chiplet: b,
                    pin: lane_pins[p][1][lane],
                },
            });
        }
    }
    let chiplets = (0..n)
        .map(|id| ChipletSpec {
            id,
            w: dims[id].0,
            h: dims[id].1,
            t: thickness[id],
            power_density: power[id],
            bumps: std::mem::take(&mut bumps[id]),
        })
        .collect();
    DesignInstance::new(interposer, chiplets, nets)
}
