use crate::{Error, Result};

/// Boundary treatment on all four sides of a cell-centered grid.
#[derive(Debug, Clone)]
pub enum Boundary {
    /// Zero normal flux.
    Neumann,
    /// Prescribed face values: `west`/`east` have `ny` entries, `south`/`north` `nx`.
    Dirichlet {
        west: Vec<f64>,
        east: Vec<f64>,
        south: Vec<f64>,
        north: Vec<f64>,
    },
}

impl Boundary {
    pub fn zero_dirichlet(nx: usize, ny: usize) -> Self {
        Boundary::Dirichlet {
            west: vec![0.0; ny],
            east: vec![0.0; ny],
            south: vec![0.0; nx],
            north: vec![0.0; nx],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorReport {
    pub iterations: usize,
    pub residual: f64,
}

/// `(-c_x d2/dx2 - c_y d2/dy2 + sigma) u = rhs` in the five-point form
/// `c_x = c / dx^2`, `c_y = c / dy^2`.
pub(crate) struct Operator<'a> {
    pub nx: usize,
    pub ny: usize,
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub boundary: &'a Boundary,
}

const CHECK_EVERY: usize = 10;

impl Operator<'_> {
    /// Right-hand side with boundary data folded in, and the diagonal.
    fn assemble(&self, rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut b = rhs.to_vec();
        let mut diag = vec![self.sigma; nx * ny];
        let dirichlet = !matches!(self.boundary, Boundary::Neumann);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                // interior neighbours contribute c; a Dirichlet face uses the
                // ghost 2g - u_P, a Neumann face the ghost u_P
                for (inside, c) in [
                    (i > 0, self.cx),
                    (i + 1 < nx, self.cx),
                    (j > 0, self.cy),
                    (j + 1 < ny, self.cy),
                ] {
                    if inside {
                        diag[k] += c;
                    } else if dirichlet {
                        diag[k] += 2.0 * c;
                    }
                }
            }
        }
        if let Boundary::Dirichlet { west, east, south, north } = self.boundary {
            for j in 0..ny {
                b[j * nx] += 2.0 * self.cx * west[j];
                b[j * nx + nx - 1] += 2.0 * self.cx * east[j];
            }
            for i in 0..nx {
                b[i] += 2.0 * self.cy * south[i];
                b[(ny - 1) * nx + i] += 2.0 * self.cy * north[i];
            }
        }
        (b, diag)
    }

    fn omega(&self) -> f64 {
        let s = 2.0 * self.cx + 2.0 * self.cy + self.sigma;
        let rho = match self.boundary {
            Boundary::Neumann => (2.0 * self.cx + 2.0 * self.cy) / s,
            Boundary::Dirichlet { .. } => {
                let px = (std::f64::consts::PI / self.nx as f64).cos();
                let py = (std::f64::consts::PI / self.ny as f64).cos();
                (2.0 * self.cx * px + 2.0 * self.cy * py) / s
            }
        };
        2.0 / (1.0 + (1.0 - rho * rho).max(0.0).sqrt())
    }

    #[inline]
    fn neighbour_sum(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let k = j * nx + i;
        let mut s = 0.0;
        if i > 0 {
            s += self.cx * u[k - 1];
        }
        if i + 1 < nx {
            s += self.cx * u[k + 1];
        }
        if j > 0 {
            s += self.cy * u[k - nx];
        }
        if j + 1 < ny {
            s += self.cy * u[k + nx];
        }
        s
    }

    fn residual_norm(&self, u: &[f64], b: &[f64], diag: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                let r = b[k] + self.neighbour_sum(u, i, j) - diag[k] * u[k];
                r2 += r * r;
            }
        }
        r2.sqrt()
    }

    /// Red-black SOR from the initial guess in `u` until the residual drops
    /// below `tol` relative to the right-hand side norm, or to `norm_floor`
    /// when that is larger (for right-hand sides that are pure round-off).
    pub fn solve(
        &self,
        rhs: &[f64],
        u: &mut [f64],
        tol: f64,
        max_iterations: usize,
        norm_floor: f64,
    ) -> Result<SorReport> {
        let (b, diag) = self.assemble(rhs);
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(norm_floor);
        if bnorm == 0.0 {
            u.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SorReport {
                iterations: 0,
                residual: 0.0,
            });
        }
        let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let omega = self.omega();
        let (nx, ny) = (self.nx, self.ny);
        let mut residual = self.residual_norm(u, &b, &diag) / bnorm;
        let mut it = 0;
        while residual > tol {
            if it >= max_iterations {
                return Err(Error::NonConvergence {
                    solver: "SOR",
                    iterations: it,
                    residual,
                });
            }
            for color in 0..2 {
                for j in 0..ny {
                    let row = j * nx;
                    let interior_row = j > 0 && j + 1 < ny;
                    let mut i = (j + color) % 2;
                    while i < nx {
                        let k = row + i;
                        let s = if interior_row && i > 0 && i + 1 < nx {
                            self.cx * (u[k - 1] + u[k + 1]) + self.cy * (u[k - nx] + u[k + nx])
                        } else {
                            self.neighbour_sum(u, i, j)
                        };
                        u[k] += omega * ((b[k] + s) * inv[k] - u[k]);
                        i += 2;
                    }
                }
            }
            it += 1;
            if it % CHECK_EVERY == 0 {
                residual = self.residual_norm(u, &b, &diag) / bnorm;
            }
        }
        Ok(SorReport {
            iterations: it,
            residual,
        })
    }
}
