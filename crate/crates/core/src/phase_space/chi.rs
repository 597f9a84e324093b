use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};

use super::grid::PhaseSpaceGrid;
use super::orbits::v1_squared_range;
use super::transport::Transport;

#[derive(Clone, Debug)]
pub struct ChiOptions {
    /// w vanishes where min_x v₁² < margin_lo and equals 1 above margin_hi.
    pub margin_lo: f64,
    pub margin_hi: f64,
    /// Optional energy shell [e_lo, e_hi] restricting the support of w.
    pub shell: Option<(f64, f64)>,
    /// Optional smooth energy taper: w falls from 1 at e_lo to 0 at e_hi.
    pub taper: Option<(f64, f64)>,
}

impl Default for ChiOptions {
    fn default() -> Self {
        ChiOptions { margin_lo: 0.0, margin_hi: 0.0, shell: None, taper: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiReport {
    /// ∬μ_e v̂₁χ dx dv.
    pub mu_e_v1_moment: f64,
    /// ‖D̂χ‖ / ‖χ‖ in the unweighted discrete L² norm.
    pub transport_defect: f64,
    /// ⟨v̂₁, χ⟩ in the |μ_e|-weighted inner product.
    pub v1_pairing: f64,
    pub support_size: usize,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// χ = sign(v₁)·w(e, p) on untrapped level sets, 0 elsewhere. w depends on (e, p) only,
/// through a smooth cutoff in the separatrix margin min_x v₁² and an optional energy shell.
pub fn build_chi(eq: &Equilibrium, grid: &PhaseSpaceGrid, opts: &ChiOptions) -> Result<Vec<f64>> {
    let chi = grid.from_fn(|n| {
        let (lo, _) = v1_squared_range(eq, n.e, n.p);
        if lo <= opts.margin_lo {
            return 0.0;
        }
        let mut w = if opts.margin_hi > opts.margin_lo {
            smoothstep((lo - opts.margin_lo) / (opts.margin_hi - opts.margin_lo))
        } else {
            1.0
        };
        if let Some((a, b)) = opts.shell {
            if n.e < a || n.e > b {
                w = 0.0;
            }
        }
        if let Some((a, b)) = opts.taper {
            w *= 1.0 - smoothstep((n.e - a) / (b - a));
        }
        n.v1.signum() * w
    });
    if chi.iter().all(|&c| c == 0.0) {
        return Err(Error::Validation("no untrapped region supports chi".into()));
    }
    Ok(chi)
}

pub fn chi_report(grid: &PhaseSpaceGrid, transport: &Transport, chi: &[f64]) -> ChiReport {
    let w = grid.weight();
    let moment: f64 = grid.nodes.iter().zip(chi).map(|(n, c)| w * n.mu_e * n.vh1 * c).sum();
    let dchi = transport.apply(chi);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let gw = grid.gram_w();
    let v1 = grid.from_fn(|n| n.vh1);
    ChiReport {
        mu_e_v1_moment: moment,
        transport_defect: norm(&dchi) / norm(chi),
        v1_pairing: grid.inner(&gw, &v1, chi),
        support_size: chi.iter().filter(|&&c| c != 0.0).count(),
    }
}
