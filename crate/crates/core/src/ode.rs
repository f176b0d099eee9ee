//! Fixed-step classical RK4, shared by every integrator in the crate.

use crate::error::{Error, Result};

/// Components beyond this magnitude (or non-finite) abort integration.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// One classical RK4 step of size `dt` for `dy/dt = f(y)`.
pub fn rk4_step<F>(f: &F, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let k1 = f(y)?;
    let mut stage = vec![0.0; n];

    for i in 0..n {
        stage[i] = y[i] + 0.5 * dt * k1[i];
    }
    let k2 = f(&stage)?;
    for i in 0..n {
        stage[i] = y[i] + 0.5 * dt * k2[i];
    }
    let k3 = f(&stage)?;
    for i in 0..n {
        stage[i] = y[i] + dt * k3[i];
    }
    let k4 = f(&stage)?;

    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

pub(crate) fn validate_span(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidStep { dt });
    }
    if !(t1 > t0) {
        return Err(Error::InvalidSpan { t0, t1 });
    }
    // Tolerant floor: (t1-t0)/dt can land a hair under an integer when the
    // quotient is mathematically exact but not representable.
    Ok(((t1 - t0) / dt * (1.0 + 1e-12)).floor() as usize)
}

pub(crate) fn check_finite(y: &[f64], t: f64) -> Result<()> {
    for &c in y {
        if !c.is_finite() || c.abs() > BLOWUP_LIMIT {
            return Err(Error::BlowUp {
                t,
                limit: BLOWUP_LIMIT,
            });
        }
    }
    Ok(())
}
