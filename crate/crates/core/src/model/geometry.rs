use crate::{Error, Result};

/// Legal orientations in degrees; index `k` is orientation `k * 90`.
pub const ORIENTATIONS: [f64; 4] = [0.0, 90.0, 180.0, 270.0];

const SNAP_TOL: f64 = 1e-9;

/// Index into [`ORIENTATIONS`] of a snapped angle (taken modulo 360).
pub fn orientation_index(theta: f64) -> Result<usize> {
    if !theta.is_finite() {
        return Err(Error::InvalidOrientation(theta));
    }
    let q = theta.rem_euclid(360.0) / 90.0;
    let k = q.round();
    if (q - k).abs() > SNAP_TOL {
        return Err(Error::InvalidOrientation(theta));
    }
    Ok(k as usize % 4)
}

/// Nearest legal orientation index; ties go to the lower index.
pub fn snap_angle(theta: f64) -> usize {
    let q = theta.rem_euclid(360.0) / 90.0;
    let lower = q.floor();
    let lo = lower as usize % 4;
    let hi = (lo + 1) % 4;
    let f = q - lower;
    if f > 0.5 {
        hi
    } else if f < 0.5 {
        lo
    } else {
        lo.min(hi)
    }
}

/// Footprint of a `w x h` chiplet after rotation.
pub fn rotated_dims(w: f64, h: f64, theta: f64) -> Result<(f64, f64)> {
    Ok(if orientation_index(theta)? % 2 == 0 {
        (w, h)
    } else {
        (h, w)
    })
}

/// Rotates a bump offset by `k * 90` degrees counter-clockwise, exactly.
pub fn rotate_offset(xp: f64, yp: f64, k: usize) -> (f64, f64) {
    match k % 4 {
        0 => (xp, yp),
        1 => (-yp, xp),
        2 => (-xp, -yp),
        _ => (yp, -xp),
    }
}

/// Absolute bump position for a chiplet centered at `(x, y)` with snapped `theta`.
pub fn bump_abs_position(x: f64, y: f64, theta: f64, xp: f64, yp: f64) -> Result<(f64, f64)> {
    let (dx, dy) = rotate_offset(xp, yp, orientation_index(theta)?);
    Ok((x + dx, y + dy))
}
