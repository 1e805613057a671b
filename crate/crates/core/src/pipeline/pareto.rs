use serde::{Deserialize, Serialize};

use super::flow::{run_place_from, PlaceConfig};
use super::{derive_seed, Mode, Timings};
use crate::legal::{initial_placement, InitConfig};
use crate::model::DesignInstance;
use crate::place::CompactModels;
use crate::{par, Error, Result};

/// Sweep over the cartesian product of the physics weights. Every grid
/// point starts from the same seed layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ParetoConfig {
    pub lambda_t: Vec<f64>,
    pub lambda_w: Vec<f64>,
    pub base: PlaceConfig,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        ParetoConfig {
            lambda_t: vec![0.0, 0.1, 1.0],
            lambda_w: vec![0.0, 0.1, 1.0],
            base: PlaceConfig {
                mode: Mode::TmAware,
                ..PlaceConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub index: usize,
    pub lambda_t: f64,
    pub lambda_w: f64,
    pub seed: u64,
    pub twl: Option<f64>,
    pub t_max: Option<f64>,
    pub warpage: Option<f64>,
    /// Peak temperature and warpage predicted by the compact models.
    pub compact_t_max: Option<f64>,
    pub compact_warpage: Option<f64>,
    pub error: Option<String>,
}

impl ParetoPoint {
    fn metrics(&self) -> Option<[f64; 3]> {
        Some([self.twl?, self.t_max?, self.warpage?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoResult {
    pub points: Vec<ParetoPoint>,
    /// Indices into `points` of the non-dominated runs.
    pub front: Vec<usize>,
}

/// Indices of the points no other point dominates (all coordinates ≤ and
/// one strictly <, everything minimized).
pub fn non_dominated(points: &[[f64; 3]]) -> Vec<usize> {
    let dominates = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}

/// Runs one placement per grid point, in grid order (λ_T outer). Failed
/// runs are logged and kept with their error; the front is taken over the
/// successful ones.
pub fn run_pareto(design: &DesignInstance, models: CompactModels, cfg: &ParetoConfig) -> Result<ParetoResult> {
    if cfg.lambda_t.is_empty() || cfg.lambda_w.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    let init_cfg = InitConfig {
        seed: cfg.base.seed,
        ..cfg.base.init.clone()
    };
    let init = initial_placement(design, &init_cfg)?;
    let grid: Vec<(f64, f64)> = cfg
        .lambda_t
        .iter()
        .flat_map(|&t| cfg.lambda_w.iter().map(move |&w| (t, w)))
        .collect();
    let points = par::map(grid.len(), |index| {
        let (lambda_t, lambda_w) = grid[index];
        let mut run = cfg.base.clone();
        run.mode = Mode::TmAware;
        run.seed = derive_seed(cfg.base.seed, index as u64);
        run.cgd.penalty.lambda_t = lambda_t;
        run.cgd.penalty.lambda_w = lambda_w;
        let mut p = ParetoPoint {
            index,
            lambda_t,
            lambda_w,
            seed: run.seed,
            twl: None,
            t_max: None,
            warpage: None,
            compact_t_max: None,
            compact_warpage: None,
            error: None,
        };
        match run_place_from(design, Some(models), &run, &init, Timings::default()) {
            Ok(out) => {
                p.twl = Some(out.report.twl);
                p.t_max = out.report.t_max.or(out.report.compact_t_max);
                p.warpage = out.report.warpage.or(out.report.compact_warpage);
                p.compact_t_max = out.report.compact_t_max;
                p.compact_warpage = out.report.compact_warpage;
            }
            Err(e) => {
                log::warn!("sweep point {index} (lambda_t {lambda_t}, lambda_w {lambda_w}) failed: {e}");
                p.error = Some(e.to_string());
            }
        }
        p
    });
    let ok: Vec<(usize, [f64; 3])> = points.iter().filter_map(|p| Some((p.index, p.metrics()?))).collect();
    let metrics: Vec<[f64; 3]> = ok.iter().map(|o| o.1).collect();
    let front = non_dominated(&metrics).into_iter().map(|k| ok[k].0).collect();
    Ok(ParetoResult { points, front })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

pub fn pareto_csv(result: &ParetoResult) -> String {
    let mut s = String::from("index,lambda_t,lambda_w,seed,twl,t_max,warpage,compact_t_max,compact_warpage,on_front,error\n");
    for p in &result.points {
        let err = p.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
        s += &format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.index,
            p.lambda_t,
            p.lambda_w,
            p.seed,
            opt(p.twl),
            opt(p.t_max),
            opt(p.warpage),
            opt(p.compact_t_max),
            opt(p.compact_warpage),
            result.front.contains(&p.index) as u8,
            err
        );
    }
    s
}

/// Scatter of TWL against peak temperature; front points filled, marker
/// radius growing with warpage.
pub fn pareto_svg(result: &ParetoResult) -> String {
    let pts: Vec<(usize, [f64; 3])> = result.points.iter().filter_map(|p| Some((p.index, p.metrics()?))).collect();
    let (w, h, m) = (480.0, 360.0, 50.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" text-anchor=\"middle\">TWL (mm)</text>\n\
         <text x=\"14\" y=\"{cy}\" transform=\"rotate(-90 14 {cy})\" text-anchor=\"middle\">peak temperature (C)</text>\n",
        y0 = h - m,
        x1 = w - m,
        cx = w / 2.0,
        ty = h - 12.0,
        cy = h / 2.0
    );
    if !pts.is_empty() {
        let range = |k: usize| {
            let lo = pts.iter().map(|p| p.1[k]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.1[k]).fold(f64::NEG_INFINITY, f64::max);
            (lo, (hi - lo).max(1e-12))
        };
        let (x0, xs) = range(0);
        let (t0, ts) = range(1);
        let (w0, ws) = range(2);
        for (i, p) in &pts {
            let px = m + (p[0] - x0) / xs * (w - 2.0 * m);
            let py = h - m - (p[1] - t0) / ts * (h - 2.0 * m);
            let r = 3.0 + 5.0 * (p[2] - w0) / ws;
            let fill = if result.front.contains(i) { "steelblue" } else { "none" };
            s += &format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"{r:.2}\" fill=\"{fill}\" stroke=\"steelblue\"><title>run {i}</title></circle>\n"
            );
        }
        s += &format!(
            "<text x=\"{m}\" y=\"{:.0}\">{x0:.1}</text>\n<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"end\">{:.1}</text>\n",
            h - m + 16.0,
            w - m,
            h - m + 16.0,
            x0 + xs
        );
        s += &format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"end\">{t0:.1}</text>\n<text x=\"{:.0}\" y=\"{m}\" text-anchor=\"end\">{:.1}</text>\n",
            m - 4.0,
            h - m,
            m - 4.0,
            t0 + ts
        );
    }
    s + "</svg>\n"
}
