//! Closed forms tying round number, probability and subset size together,
//! plus the linear bounds on the size recursion. These are the analytic
//! facts the counter-based reducer's schedule is built on, exposed as pure
//! functions so the property tests can cross-check every route.

use crate::error::MathError;

/// 1/(1 - e^-1) = 1.581976..., the per-round probability growth factor.
pub fn growth_factor() -> f64 {
    1.0 / decay()
}

/// 1 - e^-1 = 0.632120...
pub fn decay() -> f64 {
    -(-1.0f64).exp_m1()
}

fn check_prob(p: f64, name: &str) -> Result<(), MathError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MathError::Domain(format!("{name} must be in (0,1), got {p}")));
    }
    Ok(())
}

/// Real-valued optimal subset size for a uniform probability: -1/ln(1-p).
pub fn size_from_prob(p: f64) -> Result<f64, MathError> {
    check_prob(p, "p")?;
    Ok(-1.0 / (-p).ln_1p())
}

/// Probability after one more all-failing round: p/(1 - e^-1).
///
/// Domain is restricted to p < 1 - e^-1 so the result stays below 1.
pub fn next_prob(p: f64) -> Result<f64, MathError> {
    if !(p > 0.0 && p < decay()) {
        return Err(MathError::Domain(format!(
            "p must be in (0, 1-e^-1), got {p}"
        )));
    }
    Ok(p / decay())
}

/// Two-step form of [`next_prob`]: p / (1 - (1-p)^s) with s = -1/ln(1-p).
/// Algebraically identical; kept as an independent route for verification.
pub fn next_prob_two_step(p: f64) -> Result<f64, MathError> {
    check_prob(p, "p")?;
    let s = size_from_prob(p)?;
    // (1-p)^s = exp(s * ln(1-p)), evaluated via ln_1p/exp_m1 for stability
    let denom = -(s * (-p).ln_1p()).exp_m1();
    Ok(p / denom)
}

/// Uncapped probability at round r: p0 / (1 - e^-1)^r.
pub fn prob_at_round(r: u32, p0: f64) -> Result<f64, MathError> {
    check_prob(p0, "p0")?;
    Ok(p0 * growth_factor().powi(r as i32))
}

/// Log of the expected reduction gain s*(1-p)^s. Monotone transform used
/// for all gain comparisons so every argmax route agrees bit-for-bit.
pub fn log_gain(s: u64, p: f64) -> f64 {
    (s as f64).ln() + s as f64 * (-p).ln_1p()
}

/// Tolerance under which two log-gains count as a tie. A mathematical tie
/// (e.g. 9 vs 10 at p = 0.1) evaluates to a difference of a few ulps,
/// well below this; a genuinely flat region of the gain curve at very
/// small p stays above it for p > 1e-6.
pub const GAIN_TIE_EPS: f64 = 1e-13;

/// Integer argmax of s*(1-p)^s over positive integers: floor or ceiling of
/// -1/ln(1-p), whichever gains more, ties resolved to the larger size.
/// For p >= 0.5 the argmax degenerates to a singleton.
pub fn optimal_int_size(p: f64) -> Result<u64, MathError> {
    check_prob(p, "p")?;
    if p >= 0.5 {
        return Ok(1);
    }
    let real = size_from_prob(p)?;
    let lo = (real.floor() as u64).max(1);
    let hi = (real.ceil() as u64).max(1);
    if lo == hi {
        return Ok(lo);
    }
    let g_lo = log_gain(lo, p);
    let g_hi = log_gain(hi, p);
    if g_hi >= g_lo - GAIN_TIE_EPS {
        Ok(hi)
    } else {
        Ok(lo)
    }
}

/// The size recursion expressed in sizes alone:
/// s_next = 1 / ln((1 - e^-1) / (e^(-1/s) - e^-1)). Defined for s > 1.
pub fn size_recursion(s: f64) -> Result<f64, MathError> {
    if !(s > 1.0) {
        return Err(MathError::Domain(format!("s must be > 1, got {s}")));
    }
    let e_inv = (-1.0f64).exp();
    let arg = decay() / ((-1.0 / s).exp() - e_inv);
    Ok(1.0 / arg.ln())
}

/// Linear bracket around one step of the size recursion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundCheck {
    pub s: u64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Check (1-e^-1)s - 1 <= size_recursion(s) <= (1-e^-1)s for integer s >= 2.
pub fn bound_check(s: u64) -> Result<BoundCheck, MathError> {
    if s < 2 {
        return Err(MathError::Domain(format!("s must be >= 2, got {s}")));
    }
    let lower = decay() * s as f64 - 1.0;
    let upper = decay() * s as f64;
    let value = size_recursion(s as f64)?;
    // 1e-9 slack absorbs floating error in the closed form
    let holds = value >= lower - 1e-9 && value <= upper + 1e-9;
    Ok(BoundCheck {
        s,
        lower,
        value,
        upper,
        holds,
    })
}
