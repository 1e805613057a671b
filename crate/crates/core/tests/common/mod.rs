#![allow(dead_code)]

use std::f64::consts::PI;

use atmplace::compact::{CompactThermalParams, CompactWarpageParams, Footprint, GridSpec, LengthScale, LocalWarp};
use atmplace::field::FieldGrid;
use atmplace::model::*;
use atmplace::oracle::{solve_plate_field, solve_thermal_field, PlateOracleConfig, ThermalOracleConfig};
use atmplace::place::{CompactModels, Objective, PenaltyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

/// Integrand of the auxiliary function, with its finite limit `4bc/π` near 0
/// taken from the series `erf(z) ≈ 2z/√π (1 - z²/3)`.
fn aux_integrand(a: f64, b: f64, c: f64, x: f64) -> f64 {
    if x < 1e-3 {
        let k = 4.0 * b * c / std::f64::consts::PI;
        return k * (1.0 - (a * a + (b * b + c * c) / 3.0) * x * x);
    }
    (-a * a * x * x).exp() * erf(b * x) * erf(c * x) / (x * x)
}

fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (lm, rm) = (0.5 * (lo + mid), 0.5 * (mid + hi));
    let (flm, frm) = (f(lm), f(rm));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, lo, mid, flo, flm, fmid, left, tol / 2.0, depth - 1)
        + simpson(f, mid, hi, fmid, frm, fhi, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[lo, hi]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let (fl, fm, fh) = (f(lo), f(0.5 * (lo + hi)), f(hi));
    let whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh);
    simpson(f, lo, hi, fl, fm, fh, whole, tol, 50)
}

/// `∫_0^∞ exp(-a²x²) erf(bx) erf(cx) / x² dx` by quadrature, cut where the
/// Gaussian factor drops below 1e-30.
pub fn aux_quadrature(a: f64, b: f64, c: f64) -> f64 {
    let f = |x: f64| aux_integrand(a, b, c, x);
    let cut = 69.0f64.sqrt() / a;
    // panels on a geometric-ish split so the steep region near 0 is resolved
    let mut edges = vec![0.0];
    let mut e = 0.05 / b.abs().max(c.abs()).max(a);
    while e < cut {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(cut);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += integrate(&f, w[0], w[1], 1e-15);
    }
    total
}

/// Central difference of `f` at `x` with step `h`.
pub fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Relative error with a floor so near-zero reference entries do not
/// dominate: `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Random placement with snapped orientations that passes `check_legal`,
/// found by rejection sampling.
pub fn random_legal_placement(design: &DesignInstance, rng: &mut ChaCha8Rng) -> Placement {
    let (w, h) = (design.interposer.width, design.interposer.height);
    for _ in 0..200_000 {
        let mut poses = Vec::new();
        for c in &design.chiplets {
            let theta = ORIENTATIONS[rng.gen_range(0..4)];
            let (cw, ch) = if theta == 90.0 || theta == 270.0 { (c.h, c.w) } else { (c.w, c.h) };
            let x = rng.gen_range(cw / 2.0..=w - cw / 2.0);
            let y = rng.gen_range(ch / 2.0..=h - ch / 2.0);
            poses.push(Pose::new(x, y, theta));
        }
        let p = Placement::new(poses);
        if check_legal(design, &p).unwrap().is_legal() {
            return p;
        }
    }
    panic!("no legal random placement found");
}

/// Random continuous footprints for gradient checks.
pub fn random_footprints(seed: u64, n: usize, grid: &GridSpec) -> Vec<Footprint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Footprint {
            x: rng.gen_range(0.2..0.8) * grid.width,
            y: rng.gen_range(0.2..0.8) * grid.height,
            w: rng.gen_range(2.0..6.0),
            h: rng.gen_range(2.0..6.0),
            power: rng.gen_range(2e5..3e6),
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hand-built four-chiplet instance small enough for lattice enumeration:
/// a 7 mm interposer, sides and pin offsets on a 0.25 mm lattice.
pub fn desk4() -> DesignInstance {
    use atmplace::model::{BumpPin, ChipletSpec, InterposerSpec, Net, PinRef};
    let chip = |id: usize, w: f64, h: f64, power: f64, pins: &[(f64, f64)]| ChipletSpec {
        id,
        w,
        h,
        t: 0.5,
        power_density: power,
        bumps: pins
            .iter()
            .enumerate()
            .map(|(pin, &(x, y))| BumpPin { pin, x, y, clump: 0 })
            .collect(),
    };
    let chiplets = vec![
        chip(0, 3.0, 2.0, 4e5, &[(1.25, 0.5), (1.25, -0.5), (-1.0, -0.75), (0.0, 0.75)]),
        chip(1, 2.5, 2.0, 2e5, &[(-1.0, 0.5), (-1.0, -0.5), (0.75, -0.75)]),
        chip(2, 2.0, 2.0, 6e5, &[(0.0, 0.75), (-0.75, -0.5), (0.75, 0.25)]),
        chip(3, 3.0, 1.5, 1e5, &[(1.25, 0.5), (-1.25, 0.25)]),
    ];
    let links = [((0, 0), (1, 0)), ((0, 1), (1, 1)), ((1, 2), (2, 0)), ((2, 1), (3, 0)), ((0, 2), (3, 1)), ((0, 3), (2, 2))];
    let nets = links
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| Net {
            id,
            a: PinRef { chiplet: a.0, pin: a.1 },
            b: PinRef { chiplet: b.0, pin: b.1 },
        })
        .collect();
    DesignInstance::new(InterposerSpec::new(7.0, 7.0, 16), chiplets, nets).unwrap()
}

/// Counter-clockwise quarter turns of a pin offset.
fn turn(o: (f64, f64), quarter: usize) -> (f64, f64) {
    (0..quarter).fold(o, |(x, y), _| (-y, x))
}

struct Candidate {
    pose: Pose,
    rect: [f64; 4],
    /// Absolute positions of this chiplet's net endpoints, by net index.
    ends: Vec<(usize, (f64, f64))>,
}

struct Search<'a> {
    order: Vec<usize>,
    cands: Vec<Vec<Candidate>>,
    nets: &'a [(usize, usize)],
    gap: f64,
    best: f64,
    best_poses: Option<Vec<Pose>>,
}

impl Search<'_> {
    fn separated(&self, a: &[f64; 4], b: &[f64; 4]) -> bool {
        let gx = (a[0] - b[0]).abs() - (a[2] + b[2]) / 2.0;
        let gy = (a[1] - b[1]).abs() - (a[3] + b[3]) / 2.0;
        gx.max(gy) >= self.gap - 1e-9
    }

    /// Wirelength of the nets between candidate `c` of chiplet `k` and the
    /// already placed chiplets.
    fn cost(&self, k: usize, c: &Candidate, placed: &[Option<usize>]) -> f64 {
        let mut s = 0.0;
        for &(net, p) in &c.ends {
            let (i, j) = self.nets[net];
            let other = if i == k { j } else { i };
            if let Some(oc) = placed[other] {
                let q = self.cands[other][oc].ends.iter().find(|e| e.0 == net).unwrap().1;
                s += (p.0 - q.0).abs() + (p.1 - q.1).abs();
            }
        }
        s
    }

    fn dfs(&mut self, level: usize, placed: &mut Vec<Option<usize>>, partial: f64) {
        if level == self.order.len() {
            if partial < self.best {
                self.best = partial;
                let poses = (0..placed.len()).map(|k| self.cands[k][placed[k].unwrap()].pose).collect();
                self.best_poses = Some(poses);
            }
            return;
        }
        // every unplaced chiplet still pays at least its cheapest link to
        // the placed ones
        let lookahead: f64 = self.order[level + 1..]
            .iter()
            .map(|&r| self.cands[r].iter().map(|c| self.cost(r, c, placed)).fold(f64::INFINITY, f64::min))
            .sum();
        let k = self.order[level];
        let mut children: Vec<(f64, usize)> = (0..self.cands[k].len())
            .filter(|&ci| {
                let r = &self.cands[k][ci].rect;
                placed
                    .iter()
                    .enumerate()
                    .all(|(o, p)| p.is_none_or(|pc| self.separated(r, &self.cands[o][pc].rect)))
            })
            .map(|ci| (self.cost(k, &self.cands[k][ci], placed), ci))
            .filter(|&(c, _)| partial + c + lookahead < self.best - 1e-9)
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (c, ci) in children {
            if partial + c + lookahead >= self.best - 1e-9 {
                break;
            }
            placed[k] = Some(ci);
            self.dfs(level + 1, placed, partial + c);
            placed[k] = None;
        }
    }
}

/// Minimum exact wirelength over every legal layout with lower-left corners
/// on a `q` lattice and every orientation, found by branch and bound. Only
/// layouts strictly below `upper` are searched; `None` if there are none.
pub fn exhaustive_wirelength(d: &DesignInstance, q: f64, upper: f64) -> Option<(f64, Vec<Pose>)> {
    let ip = &d.interposer;
    let n = d.num_chiplets();
    let nets: Vec<(usize, usize)> = d.resolved_nets().iter().map(|r| (r.i, r.j)).collect();
    let resolved = d.resolved_nets();
    let mut cands: Vec<Vec<Candidate>> = Vec::with_capacity(n);
    for (k, c) in d.chiplets.iter().enumerate() {
        let mut v = Vec::new();
        for (quarter, &theta) in ORIENTATIONS.iter().enumerate() {
            let (w, h) = if quarter % 2 == 0 { (c.w, c.h) } else { (c.h, c.w) };
            let nx = ((ip.width - w) / q + 1e-9).floor() as i64;
            let ny = ((ip.height - h) / q + 1e-9).floor() as i64;
            for a in 0..=nx {
                for b in 0..=ny {
                    let (x, y) = (a as f64 * q + w / 2.0, b as f64 * q + h / 2.0);
                    let ends = resolved
                        .iter()
                        .enumerate()
                        .filter_map(|(ni, r)| {
                            let o = if r.i == k {
                                r.pi
                            } else if r.j == k {
                                r.pj
                            } else {
                                return None;
                            };
                            let t = turn(o, quarter);
                            Some((ni, (x + t.0, y + t.1)))
                        })
                        .collect();
                    v.push(Candidate {
                        pose: Pose::new(x, y, theta),
                        rect: [x, y, w, h],
                        ends,
                    });
                }
            }
        }
        cands.push(v);
    }
    // most connected chiplet first, then whichever has most links to those
    let links = |a: usize, b: usize| nets.iter().filter(|&&(i, j)| (i == a && j == b) || (i == b && j == a)).count();
    let mut order: Vec<usize> = vec![(0..n).max_by_key(|&k| (0..n).map(|o| links(k, o)).sum::<usize>()).unwrap()];
    while order.len() < n {
        let next = (0..n)
            .filter(|k| !order.contains(k))
            .max_by_key(|&k| order.iter().map(|&o| links(k, o)).sum::<usize>())
            .unwrap();
        order.push(next);
    }
    let mut s = Search {
        order,
        cands,
        nets: &nets,
        gap: ip.min_spacing,
        best: upper,
        best_poses: None,
    };
    s.dfs(0, &mut vec![None; n], 0.0);
    s.best_poses.map(|p| (s.best, p))
}

/// Largest entry-wise relative error between analytic derivative fields and
/// central differences of `eval`, with a floor of 1e-3 of each field's peak.
pub fn field_fd_error(
    fps: &[Footprint],
    analytic: &[[atmplace::field::FieldGrid; 4]],
    eval: &dyn Fn(&[Footprint]) -> Vec<f64>,
) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, fields) in analytic.iter().enumerate() {
        for (k, field) in fields.iter().enumerate() {
            let shifted = |d: f64| {
                let mut f = fps.to_vec();
                match k {
                    0 => f[i].x += d,
                    1 => f[i].y += d,
                    2 => f[i].w += d,
                    _ => f[i].h += d,
                }
                eval(&f)
            };
            let (p, m) = (shifted(h), shifted(-h));
            let peak = field.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (r, a) in field.values.iter().enumerate() {
                let fd = (p[r] - m[r]) / (2.0 * h);
                worst = worst.max(rel_err(*a, fd, 1e-3 * peak));
            }
        }
    }
    worst
}

pub fn design4() -> DesignInstance {
    synthesize_benchmark(7, 4, InterfaceKind::Standard16, 0.5).unwrap()
}

pub fn models_for(d: &DesignInstance) -> (CompactThermalParams, CompactWarpageParams) {
    let t = CompactThermalParams::initial(d, 25.0, 60.0);
    let w = CompactWarpageParams {
        alpha: 0.004,
        b: 1.5,
        per_chiplet: (0..d.num_chiplets())
            .map(|i| LocalWarp {
                kx: 0.08 + 0.01 * i as f64,
                ky: 0.07,
                lambda: 0.3 - 0.2 * i as f64,
                c: -1.0 + 0.1 * i as f64,
                t_ref: 30.0 + i as f64,
            })
            .collect(),
    };
    (t, w)
}

/// Random continuous state: positions anywhere on the interposer (overlaps
/// allowed), angles anywhere on the circle.
pub fn random_state(d: &DesignInstance, seed: u64) -> Placement {
    let mut r = rng(seed);
    let ip = &d.interposer;
    Placement::new(
        d.chiplets
            .iter()
            .map(|_| {
                Pose::new(
                    r.gen_range(0.15..0.85) * ip.width,
                    r.gen_range(0.15..0.85) * ip.height,
                    r.gen_range(0.0..360.0),
                )
            })
            .collect(),
    )
}

pub fn perturbed(p: &Placement, i: usize, k: usize, h: f64) -> Placement {
    let mut q = p.clone();
    match k {
        0 => q.poses[i].x += h,
        1 => q.poses[i].y += h,
        _ => q.poses[i].theta += h,
    }
    q
}

/// Worst relative error of an analytic per-chiplet gradient against central
/// differences of `f`, with a floor of 1e-3 of the largest component.
pub fn fd_check(p: &Placement, grad: &[[f64; 3]], f: impl Fn(&Placement) -> f64) -> f64 {
    let scale = grad.iter().flat_map(|g| g.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (i, g) in grad.iter().enumerate() {
        for k in 0..3 {
            let h = if k == 2 { 1e-4 } else { 1e-5 };
            let fd = (f(&perturbed(p, i, k, h)) - f(&perturbed(p, i, k, -h))) / (2.0 * h);
            worst = worst.max(rel_err(g[k], fd, 1e-3 * scale.max(1e-12)));
        }
    }
    worst
}

pub fn active_penalties(d: &DesignInstance, models: CompactModels, p: &Placement) -> PenaltyConfig {
    // thresholds inside the reached ranges so every hinge is active somewhere
    let probe = Objective::new(d, Some(models), PenaltyConfig::default(), 1e-3).unwrap();
    let ev = probe.evaluate(p, 0.3).unwrap();
    PenaltyConfig {
        lambda_dens: 0.7,
        lambda_t: 0.01,
        lambda_w: 0.5,
        t_th: 0.5 * (25.0 + ev.t_max.unwrap()),
        w_th: 0.5 * ev.warpage.unwrap(),
        warp_tau: Some(2.0),
        ..PenaltyConfig::default()
    }
}

/// Interposer of the manufactured-solution checks, mm.
const MMS_W: f64 = 20.0;
const MMS_H: f64 = 16.0;

pub fn thermal_cfg() -> ThermalOracleConfig {
    ThermalOracleConfig {
        refine: 1,
        tolerance: 1e-13,
        ..Default::default()
    }
}

pub fn plate_cfg() -> PlateOracleConfig {
    PlateOracleConfig {
        refine: 1,
        tolerance: 1e-11,
        ..Default::default()
    }
}

/// L-infinity error against the manufactured solution cos(pi x/W) cos(pi y/H).
pub fn thermal_mms_error(n: usize) -> f64 {
    let cfg = thermal_cfg();
    let c = cfg.kappa_eff * cfg.stack_thickness_mm * 1e-3;
    let sigma = cfg.h_sink(MMS_W * MMS_H);
    let (wm, hm) = (MMS_W * 1e-3, MMS_H * 1e-3);
    let exact = |x: f64, y: f64| (PI * x / MMS_W).cos() * (PI * y / MMS_H).cos();
    let k2 = PI * PI * (1.0 / (wm * wm) + 1.0 / (hm * hm));
    let power = FieldGrid::from_fn(n, n, MMS_W, MMS_H, |x, y| (c * k2 + sigma) * exact(x, y));
    let t = solve_thermal_field(&power, &cfg).unwrap();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = t.center(i, j);
            err = err.max((t.get(i, j) - cfg.t_ambient - exact(x, y)).abs());
        }
    }
    err
}

/// L-infinity error against the eigen-solution for dT = sin(pi x/MMS_W) sin(pi y/MMS_H).
pub fn plate_mms_error(n: usize) -> f64 {
    let cfg = plate_cfg();
    let lambda = (PI / MMS_W).powi(2) + (PI / MMS_H).powi(2);
    let amp = -cfg.load_coefficient() / lambda * 1e3;
    let shape = |x: f64, y: f64| (PI * x / MMS_W).sin() * (PI * y / MMS_H).sin();
    let dt = FieldGrid::from_fn(n, n, MMS_W, MMS_H, shape);
    let w = solve_plate_field(&dt, &cfg).unwrap();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = w.center(i, j);
            err = err.max((w.get(i, j) - amp * shape(x, y)).abs());
        }
    }
    err
}

pub fn rotated(theta: f64, o: (f64, f64)) -> (f64, f64) {
    rotate_offset(o.0, o.1, orientation_index(theta).unwrap())
}

/// Seeding objective of a concrete layout, straight from its definition.
pub fn init_objective(d: &DesignInstance, p: &Placement) -> f64 {
    d.connected_pairs()
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (p.poses[i], p.poses[j]);
            let oi = rotated(a.theta, d.clump_offset(i, j).unwrap());
            let oj = rotated(b.theta, d.clump_offset(j, i).unwrap());
            d.net_count(i, j) as f64 * ((a.x + oi.0 - b.x - oj.0).abs() + (a.y + oi.1 - b.y - oj.1).abs())
        })
        .sum()
}

pub fn dims_at(c: &ChipletSpec, theta: f64) -> (f64, f64) {
    rotated_dims(c.w, c.h, theta).unwrap()
}

/// Exhaustive seeding oracle: every chiplet on every lattice point and
/// orientation, separation as `(1/2 + ε) * dims sum + gap` on either axis.
pub fn init_brute_force(d: &DesignInstance, eps: f64, q: f64) -> f64 {
    let ip = &d.interposer;
    let n = d.num_chiplets();
    let mut cands: Vec<Vec<Pose>> = Vec::new();
    for c in &d.chiplets {
        let mut v = Vec::new();
        for theta in ORIENTATIONS {
            let (w, h) = dims_at(c, theta);
            let nx = ((ip.width - w) / q + 1e-9).floor() as i64;
            let ny = ((ip.height - h) / q + 1e-9).floor() as i64;
            for a in 0..=nx {
                for b in 0..=ny {
                    v.push(Pose::new(w / 2.0 + a as f64 * q, h / 2.0 + b as f64 * q, theta));
                }
            }
        }
        cands.push(v);
    }
    let sep = |i: usize, a: &Pose, j: usize, b: &Pose| {
        let (wi, hi) = dims_at(&d.chiplets[i], a.theta);
        let (wj, hj) = dims_at(&d.chiplets[j], b.theta);
        let g = ip.min_spacing + 1e-5;
        (a.x - b.x).abs() >= (0.5 + eps) * (wi + wj) + g - 1e-9 || (a.y - b.y).abs() >= (0.5 + eps) * (hi + hj) + g - 1e-9
    };
    let mut best = f64::INFINITY;
    let mut stack = vec![Pose::new(0.0, 0.0, 0.0); n];
    fn rec(
        k: usize,
        n: usize,
        cands: &[Vec<Pose>],
        stack: &mut Vec<Pose>,
        best: &mut f64,
        d: &DesignInstance,
        sep: &dyn Fn(usize, &Pose, usize, &Pose) -> bool,
    ) {
        if k == n {
            *best = best.min(init_objective(d, &Placement::new(stack.clone())));
            return;
        }
        for c in &cands[k] {
            if (0..k).all(|j| sep(k, c, j, &stack[j])) {
                stack[k] = *c;
                rec(k + 1, n, cands, stack, best, d, sep);
            }
        }
    }
    rec(0, n, &cands, &mut stack, &mut best, d, &sep);
    best
}

/// Fixed thermal parameters for `n` chiplets with distinct length scales.
pub fn params_for(n: usize) -> CompactThermalParams {
    CompactThermalParams {
        amp: 2e-5,
        a: 0.45,
        bias: 25.0,
        per_chiplet: (0..n)
            .map(|i| LengthScale {
                lx: 1.5 + 0.3 * i as f64,
                ly: 2.0 - 0.2 * i as f64,
            })
            .collect(),
    }
}

/// Fixed warpage parameters for `n` chiplets.
pub fn warp_params(n: usize) -> CompactWarpageParams {
    CompactWarpageParams {
        alpha: 0.004,
        b: 1.5,
        per_chiplet: (0..n)
            .map(|i| LocalWarp {
                kx: 0.08 + 0.01 * i as f64,
                ky: 0.07,
                lambda: 0.3 - 0.2 * i as f64,
                c: -1.0 + 0.1 * i as f64,
                t_ref: 30.0 + i as f64,
            })
            .collect(),
    }
}
