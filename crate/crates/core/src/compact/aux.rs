//! The auxiliary integral `F(a, b, c) = ∫_0^∞ exp(-a²x²) erf(bx) erf(cx) / x² dx`
//! behind the compact thermal model, in closed form.
//!
//! With `Δ = sqrt(a² + b² + c²)` the closed form is
//! `(2/√π) [b asinh(c / sqrt(a²+b²)) + c asinh(b / sqrt(a²+c²)) - a atan(bc / (aΔ))]`,
//! where `asinh(c / r) = ln((c + Δ) / r)`. `F` is odd in `b` and in `c`.
//! Its partial derivatives are the three bracketed pieces:
//! `F_a = -(2/√π) atan(bc/(aΔ))`, `F_b = (2/√π) asinh(c/sqrt(a²+b²))`,
//! `F_c = (2/√π) asinh(b/sqrt(a²+c²))`.

use std::f64::consts::FRAC_2_SQRT_PI;

use crate::{Error, Result};

/// `F` and its partials `(F, F_a, F_b, F_c)` without the `2/√π` factor,
/// given precomputed `a² + b²`, `ln sqrt(a² + b²)` and likewise for `c`.
#[inline(always)]
pub(crate) fn kernel(a: f64, b: f64, rb2: f64, ln_rb: f64, c: f64, ln_rc: f64) -> [f64; 4] {
    let d = (rb2 + c * c).sqrt();
    let fb = (c.abs() + d).ln() - ln_rb;
    let fb = if c < 0.0 { -fb } else { fb };
    let fc = (b.abs() + d).ln() - ln_rc;
    let fc = if b < 0.0 { -fc } else { fc };
    let at = (b * c / (a * d)).atan();
    [b * fb + c * fc - a * at, -at, fb, fc]
}

fn parts(a: f64, b: f64, c: f64) -> Result<[f64; 4]> {
    if !(a > 0.0 && a.is_finite()) || !b.is_finite() || !c.is_finite() {
        return Err(Error::Domain(format!("auxiliary function needs a > 0, got ({a}, {b}, {c})")));
    }
    let rb2 = a * a + b * b;
    let rc2 = a * a + c * c;
    let k = kernel(a, b, rb2, 0.5 * rb2.ln(), c, 0.5 * rc2.ln());
    Ok(k.map(|v| v * FRAC_2_SQRT_PI))
}

/// Closed-form `F(a, b, c)`; `a` must be positive.
pub fn aux_f(a: f64, b: f64, c: f64) -> Result<f64> {
    Ok(parts(a, b, c)?[0])
}

/// `(∂F/∂a, ∂F/∂b, ∂F/∂c)`. At `b = c = 0` this is `(0, 0, 0)`.
pub fn aux_f_grad(a: f64, b: f64, c: f64) -> Result<[f64; 3]> {
    let p = parts(a, b, c)?;
    Ok([p[1], p[2], p[3]])
}
