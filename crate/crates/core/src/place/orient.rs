use crate::model::{Placement, Pose, ORIENTATIONS};

/// Normalized circular distance between two angles in degrees, in `[0, 0.5]`.
pub fn angular_deviation(theta: f64, theta_k: f64) -> f64 {
    let d = (theta - theta_k).rem_euclid(360.0) / 360.0;
    d.min(1.0 - d)
}

/// `(Δθ, dΔθ/dθ)` with the derivative per degree.
fn deviation_with_grad(theta: f64, theta_k: f64) -> (f64, f64) {
    let d = (theta - theta_k).rem_euclid(360.0) / 360.0;
    if d <= 0.5 {
        (d, 1.0 / 360.0)
    } else {
        (1.0 - d, -1.0 / 360.0)
    }
}

/// Piecewise quadratic affinity of angle `theta` to the legal orientation
/// `theta_k`: 1 at the orientation, 0 from a quarter turn away.
pub fn rz(theta_k: f64, theta: f64) -> f64 {
    rz_with_grad(theta_k, theta).0
}

/// `(R_z, dR_z/dθ)`, derivative per degree.
pub fn rz_with_grad(theta_k: f64, theta: f64) -> (f64, f64) {
    let n = ORIENTATIONS.len() as f64;
    let (d, dd) = deviation_with_grad(theta, theta_k);
    if d <= 0.5 / n {
        (1.0 - 2.0 * n * n * d * d, -4.0 * n * n * d * dd)
    } else if d <= 1.0 / n {
        let e = d - 1.0 / n;
        (2.0 * n * n * e * e, 4.0 * n * n * e * dd)
    } else {
        (0.0, 0.0)
    }
}

/// Softmax of `R_z / eta` over the four legal orientations.
pub fn bz(theta: f64, eta: f64) -> [f64; 4] {
    bz_with_grad(theta, eta).0
}

/// Orientation probabilities and their derivatives with respect to `theta`
/// (per degree).
pub fn bz_with_grad(theta: f64, eta: f64) -> ([f64; 4], [f64; 4]) {
    let mut r = [0.0; 4];
    let mut dr = [0.0; 4];
    for k in 0..4 {
        (r[k], dr[k]) = rz_with_grad(ORIENTATIONS[k], theta);
    }
    let top = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = r.map(|v| ((v - top) / eta).exp());
    let s: f64 = e.iter().sum();
    let b = e.map(|v| v / s);
    let mean: f64 = (0..4).map(|k| b[k] * dr[k]).sum();
    let db = [0, 1, 2, 3].map(|k| b[k] * (dr[k] - mean) / eta);
    (b, db)
}

/// Index of the most probable orientation; ties go to the lowest index.
pub fn snap_index(theta: f64, eta: f64) -> usize {
    let b = bz(theta, eta);
    let mut best = 0;
    for k in 1..4 {
        if b[k] > b[best] {
            best = k;
        }
    }
    best
}

/// Replaces every angle by its most probable legal orientation.
pub fn snap_orientations(placement: &Placement, eta: f64) -> Placement {
    Placement::new(
        placement
            .poses
            .iter()
            .map(|p| Pose::new(p.x, p.y, ORIENTATIONS[snap_index(p.theta, eta)]))
            .collect(),
    )
}

/// Probability mass on the even (`0°`, `180°`) and odd (`90°`, `270°`)
/// orientations and the derivative of the odd mass.
pub(crate) fn parity_mix(b: &[f64; 4], db: &[f64; 4]) -> (f64, f64, f64) {
    (b[0] + b[2], b[1] + b[3], db[1] + db[3])
}
