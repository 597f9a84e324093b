use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    Trapped,
    UntrappedPlus,
    UntrappedMinus,
    /// Within tolerance of the separatrix.
    Marginal,
}

/// v₁² on the level set (e, p) at grid node ix.
#[inline]
pub fn v1_squared(eq: &Equilibrium, e: f64, p: f64, ix: usize) -> f64 {
    let k = e + eq.phi0[ix];
    let q = p + eq.psi0[ix];
    if eq.profile.is_relativistic() {
        k * k - 1.0 - q * q
    } else {
        2.0 * k - q * q
    }
}

/// (min, max) over the x grid of v₁² at fixed (e, p).
pub fn v1_squared_range(eq: &Equilibrium, e: f64, p: f64) -> (f64, f64) {
    (0..eq.nx()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
        let v = v1_squared(eq, e, p, i);
        (lo.min(v), hi.max(v))
    })
}

/// Untrapped iff v₁²(x) > 0 at every grid node; `branch` is the sign of v₁.
pub fn classify_orbit(eq: &Equilibrium, e: f64, p: f64, branch: f64, tol: f64) -> Result<OrbitClass> {
    if !(e.is_finite() && p.is_finite()) {
        return Err(Error::Domain(format!("classify_orbit at e = {e}, p = {p}")));
    }
    let (lo, hi) = v1_squared_range(eq, e, p);
    if hi < 0.0 {
        return Err(Error::EmptyEnergyShell { e, p });
    }
    let scale = hi.abs().max(1.0);
    if lo.abs() <= tol * scale {
        return Ok(OrbitClass::Marginal);
    }
    if lo > 0.0 {
        Ok(if branch >= 0.0 { OrbitClass::UntrappedPlus } else { OrbitClass::UntrappedMinus })
    } else {
        Ok(OrbitClass::Trapped)
    }
}
