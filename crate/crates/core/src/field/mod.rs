//! Uniform scalar grids over the interposer and field comparison metrics.

use std::fmt::Write;

use crate::{Error, Result};

/// Cell-centered scalar field; row `j` holds cells with `y` in
/// `[j dy, (j + 1) dy]`, so row 0 is at the bottom (y-min).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    /// Cell size in mm.
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn zeros(nx: usize, ny: usize, width: f64, height: f64) -> Self {
        FieldGrid {
            nx,
            ny,
            dx: width / nx as f64,
            dy: height / ny as f64,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn from_values(nx: usize, ny: usize, dx: f64, dy: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nx * ny, "grid value count");
        FieldGrid { nx, ny, dx, dy, values }
    }

    /// Fills each cell with `f(x, y)` at its center.
    pub fn from_fn(nx: usize, ny: usize, width: f64, height: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = FieldGrid::zeros(nx, ny, width, height);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = g.center(i, j);
                g.values[j * nx + i] = f(x, y);
            }
        }
        g
    }

    pub fn width(&self) -> f64 {
        self.dx * self.nx as f64
    }

    pub fn height(&self) -> f64 {
        self.dy * self.ny as f64
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Index `(i, j)` of the largest value (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best % self.nx, best / self.nx)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FieldGrid {
        FieldGrid {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn same_shape(&self, other: &FieldGrid) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.nx, self.ny),
                found: format!("{}x{}", other.nx, other.ny),
            });
        }
        Ok(())
    }

    /// Subtracts the least-squares plane `a + b x + c y`.
    pub fn detrended(&self) -> FieldGrid {
        // cell centers are a tensor grid, so x and y are uncorrelated and
        // the normal equations decouple after centering
        let mean = self.mean();
        let (cx, cy) = (self.width() / 2.0, self.height() / 2.0);
        let (mut sxx, mut syy, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.center(i, j);
                let v = self.get(i, j) - mean;
                sxx += (x - cx) * (x - cx);
                syy += (y - cy) * (y - cy);
                sxv += (x - cx) * v;
                syv += (y - cy) * v;
            }
        }
        let bx = if sxx > 0.0 { sxv / sxx } else { 0.0 };
        let by = if syy > 0.0 { syv / syy } else { 0.0 };
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.center(i, j);
                out.values[j * self.nx + i] -= mean + bx * (x - cx) + by * (y - cy);
            }
        }
        out
    }

    /// CSV with `ny` rows of `nx` values; the first row is y-min.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 20);
        for j in 0..self.ny {
            for i in 0..self.nx {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{:.12e}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, width: f64, height: f64) -> Result<FieldGrid> {
        let mut values = Vec::new();
        let mut nx = None;
        let mut ny = 0;
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse {
                context: format!("csv line {}", line_no + 1),
                message: e.to_string(),
            })?;
            match nx {
                None => nx = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(Error::Parse {
                        context: format!("csv line {}", line_no + 1),
                        message: format!("expected {n} values, found {}", row.len()),
                    })
                }
                _ => {}
            }
            values.extend(row);
            ny += 1;
        }
        let nx = nx.ok_or(Error::EmptyGrid)?;
        Ok(FieldGrid::from_values(nx, ny, width / nx as f64, height / ny as f64, values))
    }

    /// Grayscale heatmap (black = min, white = max) with a min/max caption.
    pub fn to_svg(&self, title: &str, unit: &str) -> String {
        let px = (512 / self.nx.max(1)).max(2);
        let (w, h) = (self.nx * px, self.ny * px);
        let (lo, hi) = (self.min(), self.max());
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            w,
            h + 40,
            w,
            h + 40
        );
        for j in 0..self.ny {
            for i in 0..self.nx {
                let g = (((self.get(i, j) - lo) / span) * 255.0).round() as u8;
                // flip so y-min is drawn at the bottom
                let top = (self.ny - 1 - j) * px;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{px}" height="{px}" fill="rgb({g},{g},{g})"/>"#,
                    i * px,
                    top
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="4" y="{}" font-family="monospace" font-size="12">{}: min {:.4} {unit}, max {:.4} {unit}</text>"#,
            h + 16,
            xml_escape(title),
            lo,
            hi
        );
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean absolute difference of two same-shape fields.
pub fn field_mae(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    a.same_shape(b)?;
    if a.values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.values.len() as f64)
}

/// Pearson correlation of two same-shape fields.
pub fn field_pearson(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    a.same_shape(b)?;
    pearson(&a.values, &b.values)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::DegenerateField);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> FieldGrid {
        FieldGrid::from_values(v.len(), 1, 1.0, 1.0, v.to_vec())
    }

    #[test]
    fn metric_examples() {
        let a = line(&[0.0, 1.0, 2.0]);
        let b = line(&[0.0, 2.0, 4.0]);
        assert_eq!(field_mae(&a, &b).unwrap(), 1.0);
        assert_eq!(field_mae(&a, &a).unwrap(), 0.0);
        assert!((field_pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let c = a.map(|v| 2.0 * v + 3.0);
        assert!((field_pearson(&a, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            field_pearson(&a, &line(&[1.0, 1.0, 1.0])),
            Err(Error::DegenerateField)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g = FieldGrid::from_fn(4, 3, 8.0, 6.0, |x, y| x * 10.0 + y);
        let back = FieldGrid::from_csv(&g.to_csv(), 8.0, 6.0).unwrap();
        assert_eq!(back.nx, 4);
        assert_eq!(back.ny, 3);
        for (a, b) in g.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
        // first row is the bottom row
        assert!(g.to_csv().starts_with(&format!("{:.12e}", g.get(0, 0))));
    }

    #[test]
    fn detrend_removes_planes() {
        let g = FieldGrid::from_fn(8, 6, 4.0, 3.0, |x, y| 1.0 + 2.0 * x - 0.5 * y);
        assert!(g.detrended().values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn svg_mentions_range() {
        let g = FieldGrid::from_fn(4, 4, 1.0, 1.0, |x, _| x);
        let s = g.to_svg("temp", "C");
        assert!(s.starts_with("<svg"));
        assert!(s.contains("min 0.1250"));
    }
}
