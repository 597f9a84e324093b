//! Tensor midpoint velocity grid on [−v₁max, v₁max] × [−v₂max, v₂max].
//!
//! Nodes are cell centres, so the grid is symmetric under v₁ ↦ −v₁ and never places a
//! node on v₁ = 0. The midpoint rule is spectrally accurate for the smooth, rapidly
//! decaying integrands that occur here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::MuProfile;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VelocityGrid {
    pub n1: usize,
    pub n2: usize,
    pub vmax1: f64,
    pub vmax2: f64,
    pub h1: f64,
    pub h2: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(n1: usize, n2: usize, vmax1: f64, vmax2: f64) -> Result<Self> {
        if n1 < 2 || n1 % 2 != 0 || n2 < 2 || n2 % 2 != 0 {
            return Err(Error::Validation(format!(
                "velocity node counts must be even and at least 2, got {n1} x {n2}"
            )));
        }
        if !(vmax1 > 0.0 && vmax1.is_finite() && vmax2 > 0.0 && vmax2.is_finite()) {
            return Err(Error::Validation(format!("v_max must be positive, got ({vmax1}, {vmax2})")));
        }
        let h1 = 2.0 * vmax1 / n1 as f64;
        let h2 = 2.0 * vmax2 / n2 as f64;
        let v1 = (0..n1).map(|i| -vmax1 + (i as f64 + 0.5) * h1).collect();
        let v2 = (0..n2).map(|j| -vmax2 + (j as f64 + 0.5) * h2).collect();
        Ok(VelocityGrid { n1, n2, vmax1, vmax2, h1, h2, v1, v2 })
    }

    /// Box sized so every component of the profile has tail mass below 1e-12,
    /// unless `vmax` overrides both half-widths.
    pub fn for_profile(profile: &MuProfile, n1: usize, n2: usize, vmax: Option<f64>) -> Result<Self> {
        let (a, b) = match vmax {
            Some(v) => (v, v),
            None => profile.velocity_extent(),
        };
        Self::new(n1, n2, a, b)
    }

    /// Box reaching the level eps_supp of the profile peak.
    pub fn for_profile_tail(profile: &MuProfile, n1: usize, n2: usize, eps_supp: f64) -> Result<Self> {
        if !(eps_supp > 0.0 && eps_supp < 1.0) {
            return Err(Error::Validation(format!("eps_supp must lie in (0, 1), got {eps_supp}")));
        }
        let (a, b) = profile.velocity_extent_at(-eps_supp.ln());
        Self::new(n1, n2, a, b)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell area, the quadrature weight of every node.
    pub fn weight(&self) -> f64 {
        self.h1 * self.h2
    }

    /// Flat index of (i1, i2), v₂ fastest.
    #[inline]
    pub fn flat(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    #[inline]
    pub fn mirror1(&self, i1: usize) -> usize {
        self.n1 - 1 - i1
    }

    pub fn halved(&self) -> Result<Self> {
        Self::new(self.n1, self.n2, 0.5 * self.vmax1, 0.5 * self.vmax2)
    }

    /// Σ w f(v₁, v₂) over the grid, in a fixed summation order.
    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for &a in &self.v1 {
            for &b in &self.v2 {
                s += f(a, b);
            }
        }
        s * self.weight()
    }
}
