use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::linalg::{sparse_from_triplets, sparse_matvec, Sparse};
use crate::xspace::XBasisKind;

use super::grid::PhaseSpaceGrid;

/// Fourth-order central first-derivative stencil: offsets −2..=2.
const STENCIL: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];

/// Discrete transport D̂ = v̂₁∂ₓ + φ⁰′∂_{v₁} + ψ⁰′(v̂₁∂_{v₂} − v̂₂∂_{v₁}) on the supported
/// nodes. Spectral in x, fourth-order central in v with zero extension outside the
/// support, and with the rotation term written in symmetric form, so the matrix is
/// exactly skew.
#[derive(Clone, Debug)]
pub struct Transport {
    pub full: Sparse,
    /// Even input (half values) to odd output (half values).
    pub even_to_odd: Sparse,
    /// Odd input to even output.
    pub odd_to_even: Sparse,
}

impl Transport {
    pub fn new(eq: &Equilibrium, grid: &PhaseSpaceGrid) -> Result<Self> {
        let vg = &grid.vg;
        let prof = &eq.profile;
        let inhom = !eq.is_homogeneous();
        if inhom && grid.xb.kind != XBasisKind::Nodal {
            return Err(Error::Contract("inhomogeneous transport needs the nodal basis".into()));
        }
        let vhat = |i1: usize, i2: usize| prof.velocity(vg.v1[i1], vg.v2[i2]);
        let mut t = Vec::new();
        for (r, n) in grid.nodes.iter().enumerate() {
            for b in 0..grid.xb.n {
                let d = grid.xb.dx[(n.ix, b)];
                if d != 0.0 {
                    if let Some(c) = grid.node_at(b, n.i1, n.i2) {
                        t.push((r, c, n.vh1 * d));
                    }
                }
            }
            if !inhom {
                continue;
            }
            let dphi = -eq.e1[n.ix];
            let dpsi = eq.b0[n.ix];
            for &(s, cs) in &STENCIL {
                let j1 = n.i1 as isize + s;
                if j1 >= 0 && (j1 as usize) < vg.n1 {
                    let j1 = j1 as usize;
                    if let Some(c) = grid.node_at(n.ix, j1, n.i2) {
                        let vh2c = vhat(j1, n.i2).1;
                        let coef = dphi - 0.5 * dpsi * (n.vh2 + vh2c);
                        t.push((r, c, cs / vg.h1 * coef));
                    }
                }
                let j2 = n.i2 as isize + s;
                if j2 >= 0 && (j2 as usize) < vg.n2 {
                    let j2 = j2 as usize;
                    if let Some(c) = grid.node_at(n.ix, n.i1, j2) {
                        let vh1c = vhat(n.i1, j2).0;
                        t.push((r, c, cs / vg.h2 * 0.5 * dpsi * (n.vh1 + vh1c)));
                    }
                }
            }
        }
        let full = sparse_from_triplets(grid.len(), grid.len(), &t);
        let half = |sign: f64| {
            let mut ht = Vec::new();
            for &(r, c, v) in &t {
                if let Some(rh) = grid.half_index(r) {
                    match grid.half_index(c) {
                        Some(ch) => ht.push((rh, ch, v)),
                        None => ht.push((rh, grid.half_index(grid.mirror[c]).unwrap(), sign * v)),
                    }
                }
            }
            sparse_from_triplets(grid.n_half(), grid.n_half(), &ht)
        };
        Ok(Transport { even_to_odd: half(1.0), odd_to_even: half(-1.0), full })
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        sparse_matvec(&self.full, h)
    }
}

/// D̂h for a grid function h.
pub fn apply_transport(eq: &Equilibrium, grid: &PhaseSpaceGrid, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != grid.len() {
        return Err(Error::Validation(format!("grid function has {} entries, grid has {}", h.len(), grid.len())));
    }
    Ok(Transport::new(eq, grid)?.apply(h))
}

/// D̂h for h asserted to have parity `sign` in v₁ (+1 even, −1 odd).
pub fn apply_transport_with_parity(
    transport: &Transport,
    grid: &PhaseSpaceGrid,
    h: &[f64],
    sign: f64,
) -> Result<Vec<f64>> {
    let defect = grid.parity_defect(h, sign);
    if defect > 1e-12 {
        return Err(Error::Contract(format!("input violates asserted parity by {defect:e}")));
    }
    Ok(transport.apply(h))
}
