//! The Vlasov–Maxwell triple on a phase-space grid.
//!
//! X = (g_ev, E₁, ψ), Y = (f_od, E₂). Parity functions are stored on the v₁ > 0 half of
//! the grid. Weighted blocks are conjugated by s = √|μ_e| so the transport block inherits
//! the exact skew symmetry of D̂.

use faer::Mat;
use serde::Serialize;

use super::triple::HamiltonianTriple;
use crate::error::{Error, Result};
use crate::linalg::{dot, matvec, sparse_to_dense};
use crate::phase_space::{PhaseSpaceGrid, Transport};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VmLayout {
    /// Half-grid nodes.
    pub nh: usize,
    /// x-function coefficients.
    pub n: usize,
}

impl VmLayout {
    pub fn dim_x(&self) -> usize {
        self.nh + 2 * self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.nh + 3 * self.n
    }

    pub fn g<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.nh]
    }

    pub fn e1<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.nh..self.nh + self.n]
    }

    pub fn psi<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.nh + self.n..self.dim_x()]
    }

    pub fn f<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.dim_x()..self.dim_x() + self.nh]
    }

    pub fn e2<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.dim_x() + self.nh..]
    }

    pub fn pack(&self, g: &[f64], e1: &[f64], psi: &[f64], f: &[f64], e2: &[f64]) -> Vec<f64> {
        [g, e1, psi, f, e2].concat()
    }
}

#[derive(Clone, Debug)]
pub struct VmTriple {
    pub triple: HamiltonianTriple,
    pub layout: VmLayout,
    /// |μ_e| on the half grid.
    pub abs_mu_e: Vec<f64>,
    /// x index of each half node.
    pub half_ix: Vec<usize>,
    /// ‖B′ from the Grams − analytic B′‖/‖analytic B′‖.
    pub adjoint_block_defect: f64,
    /// Constraint row C(u, v) = ∂ₓE₁ + ∫g dv + (∫μ_e v̂₂ dv)ψ.
    pub constraint: Mat<f64>,
    /// Per-half-node weight 2·Δx·Δv₁Δv₂ of full-grid integrals of parity functions.
    pub w2: f64,
    pub wx: f64,
    pub dx: Mat<f64>,
}

pub fn assemble_vm_triple(grid: &PhaseSpaceGrid, tr: &Transport) -> Result<VmTriple> {
    let nh = grid.n_half();
    let n = grid.xb.n;
    if nh == 0 {
        return Err(Error::Assembly("empty support mask".into()));
    }
    let layout = VmLayout { nh, n };
    let (nxd, nyd) = (layout.dim_x(), nh + n);
    let w2 = 2.0 * grid.weight();
    let hv2 = 2.0 * grid.vg.weight();
    let wx = grid.xb.wx;
    let half: Vec<_> = grid.half.iter().map(|&k| &grid.nodes[k]).collect();
    let abs_mu_e: Vec<f64> = half.iter().map(|nd| -nd.mu_e).collect();
    let s: Vec<f64> = abs_mu_e.iter().map(|m| m.sqrt()).collect();
    let half_ix: Vec<usize> = half.iter().map(|nd| nd.ix).collect();

    let m_p = grid.velocity_integral(&grid.from_fn(|k| k.vh2 * k.mu_p));
    let mut l0 = grid.xb.neg_lap.clone();
    for i in 0..n {
        l0[(i, i)] -= m_p[i];
    }
    let h1 = grid.xb.h1_gram();

    let mut l_form = Mat::zeros(nxd, nxd);
    let mut gram_x = Mat::zeros(nxd, nxd);
    let mut a_form = Mat::zeros(nyd, nyd);
    for j in 0..nh {
        let d = w2 / abs_mu_e[j];
        l_form[(j, j)] = d;
        gram_x[(j, j)] = d;
        a_form[(j, j)] = d;
    }
    for i in 0..n {
        l_form[(nh + i, nh + i)] = wx;
        gram_x[(nh + i, nh + i)] = wx;
        a_form[(nh + i, nh + i)] = wx;
        for j in 0..n {
            l_form[(nh + n + i, nh + n + j)] = wx * l0[(i, j)];
            gram_x[(nh + n + i, nh + n + j)] = h1[(i, j)];
        }
    }
    let gram_y = a_form.clone();

    let d_oe = sparse_to_dense(&tr.odd_to_even);
    let d_eo = sparse_to_dense(&tr.even_to_odd);
    let mut b_op = Mat::zeros(nxd, nyd);
    for r in 0..nh {
        for c in 0..nh {
            let d = d_oe[(r, c)];
            if d != 0.0 {
                b_op[(r, c)] = -s[r] * d * s[c];
            }
        }
        b_op[(r, nh + half_ix[r])] = -abs_mu_e[r] * half[r].vh2;
        b_op[(nh + half_ix[r], r)] += hv2 * abs_mu_e[r] * half[r].vh1;
    }
    for i in 0..n {
        b_op[(nh + n + i, nh + i)] = -1.0;
    }
    let wy: Vec<f64> = (0..nyd).map(|j| if j < nh { w2 } else { wx }).collect();
    let wxv: Vec<f64> = (0..nxd).map(|i| if i < nh { w2 } else { wx }).collect();
    let b = Mat::from_fn(nxd, nyd, |i, j| b_op[(i, j)] / wy[j]);

    // B′ on functions: W_Y⁻¹ B_opᵀ W_X against its block formula.
    let mut bp = Mat::zeros(nyd, nxd);
    for r in 0..nh {
        for c in 0..nh {
            let d = d_eo[(r, c)];
            if d != 0.0 {
                bp[(r, c)] = s[r] * d * s[c];
            }
        }
        bp[(r, nh + half_ix[r])] = abs_mu_e[r] * half[r].vh1;
        bp[(nh + half_ix[r], r)] += -hv2 * abs_mu_e[r] * half[r].vh2;
    }
    for i in 0..n {
        bp[(nh + i, nh + n + i)] = -1.0;
    }
    let via = Mat::from_fn(nyd, nxd, |i, j| b_op[(j, i)] * wxv[j] / wy[i]);
    let adjoint_block_defect = (&via - &bp).norm_l2() / bp.norm_l2();

    let dx = grid.xb.dx.clone();
    let mue_v2 = grid.velocity_integral(&grid.from_fn(|k| k.mu_e * k.vh2));
    let mut constraint = Mat::zeros(n, layout.dim());
    for r in 0..nh {
        constraint[(half_ix[r], r)] += hv2;
    }
    for i in 0..n {
        for j in 0..n {
            constraint[(i, nh + j)] = dx[(i, j)];
        }
        constraint[(i, nh + n + i)] = mue_v2[i];
    }

    let mut triple = HamiltonianTriple::new(l_form, a_form, b, gram_x, gram_y)?;
    triple.range_scaling = Some((0..nyd).map(|j| if j < nh { wy[j] / s[j] } else { wy[j] }).collect());
    Ok(VmTriple { triple, layout, abs_mu_e, half_ix, adjoint_block_defect, constraint, w2, wx, dx })
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ComponentNorms {
    pub norm_g: f64,
    #[serde(rename = "norm_E1")]
    pub norm_e1: f64,
    #[serde(rename = "norm_E2")]
    pub norm_e2: f64,
    pub norm_psi_h1: f64,
    pub norm_f: f64,
}

impl VmTriple {
    /// C(u, v) as an x-function.
    pub fn constraint_residual(&self, x: &[f64]) -> Vec<f64> {
        matvec(self.constraint.as_ref(), x)
    }

    /// ‖C M‖_F/(‖C‖_F‖M‖_F).
    pub fn constraint_propagation_defect(&self, m: &Mat<f64>) -> f64 {
        let cm = &self.constraint * m;
        cm.norm_l2() / (self.constraint.norm_l2() * m.norm_l2())
    }

    pub fn norms(&self, x: &[f64]) -> ComponentNorms {
        let l = &self.layout;
        let wsum = |h: &[f64]| -> f64 { h.iter().zip(&self.abs_mu_e).map(|(v, m)| self.w2 * v * v / m).sum::<f64>().sqrt() };
        let psi = l.psi(x);
        let h1 = &self.triple.gram_x;
        let off = l.nh + l.n;
        let mut q = 0.0;
        for i in 0..l.n {
            for j in 0..l.n {
                q += psi[i] * h1[(off + i, off + j)] * psi[j];
            }
        }
        ComponentNorms {
            norm_g: wsum(l.g(x)),
            norm_e1: (self.wx * dot(l.e1(x), l.e1(x))).sqrt(),
            norm_e2: (self.wx * dot(l.e2(x), l.e2(x))).sqrt(),
            norm_psi_h1: q.max(0.0).sqrt(),
            norm_f: wsum(l.f(x)),
        }
    }

    /// ‖·‖_Z = ‖g‖ + ‖E₁‖ + ‖E₂‖ + ‖ψ‖_{H¹}, with f folded into g.
    pub fn z_norm(&self, x: &[f64]) -> f64 {
        let c = self.norms(x);
        c.norm_g.hypot(c.norm_f) + c.norm_e1 + c.norm_e2 + c.norm_psi_h1
    }
}
