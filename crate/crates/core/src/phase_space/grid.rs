use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::velocity::VelocityGrid;
use crate::xspace::{XBasis, XBasisKind};

/// Equilibrium data at one phase-space node.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Node {
    pub ix: usize,
    pub i1: usize,
    pub i2: usize,
    pub v1: f64,
    pub v2: f64,
    pub vh1: f64,
    pub vh2: f64,
    pub e: f64,
    pub p: f64,
    pub mu: f64,
    pub mu_e: f64,
    pub mu_p: f64,
}

const ABSENT: usize = usize::MAX;

/// Tensor grid in (x, v₁, v₂) restricted to the weighted support {|μ_e| ≥ ε_w}.
///
/// Grid functions are vectors over the supported nodes, ordered by (x, v₁, v₂).
/// The "half" ordering lists supported nodes with v₁ > 0; a function of known parity
/// in v₁ is determined by its values there.
#[derive(Clone, Debug)]
pub struct PhaseSpaceGrid {
    pub xb: XBasis,
    pub vg: VelocityGrid,
    pub eps_w: f64,
    pub nodes: Vec<Node>,
    pub mirror: Vec<usize>,
    pub half: Vec<usize>,
    lookup: Vec<usize>,
    half_of: Vec<usize>,
}

impl PhaseSpaceGrid {
    /// `eps_w_rel` scales the largest |μ_e| on the grid into the support threshold.
    pub fn new(eq: &Equilibrium, xb: XBasis, eps_w_rel: f64) -> Result<Self> {
        if xb.nx != eq.nx() {
            return Err(Error::Validation("x basis and equilibrium grid differ".into()));
        }
        if matches!(xb.kind, XBasisKind::FourierBlock { .. }) && !eq.is_homogeneous() {
            return Err(Error::Contract("Fourier-block grids need a homogeneous equilibrium".into()));
        }
        let vg = eq.vgrid.clone();
        let prof = &eq.profile;
        let nx = xb.n;
        let mut all = Vec::with_capacity(nx * vg.len());
        for ix in 0..nx {
            let xnode = if matches!(xb.kind, XBasisKind::Nodal) { ix } else { 0 };
            for i1 in 0..vg.n1 {
                for i2 in 0..vg.n2 {
                    let (v1, v2) = (vg.v1[i1], vg.v2[i2]);
                    let (e, p) = eq.invariants(xnode, v1, v2);
                    let m = prof.eval_unchecked(e, p);
                    let (vh1, vh2) = prof.velocity(v1, v2);
                    all.push(Node { ix, i1, i2, v1, v2, vh1, vh2, e, p, mu: m.mu, mu_e: m.mu_e, mu_p: m.mu_p });
                }
            }
        }
        let peak = all.iter().fold(0.0f64, |m, n| m.max(n.mu_e.abs()));
        let eps_w = eps_w_rel * peak;
        let pass: Vec<bool> = all.iter().map(|n| n.mu_e < 0.0 && n.mu_e.abs() >= eps_w).collect();
        let flat = |ix: usize, i1: usize, i2: usize| (ix * vg.n1 + i1) * vg.n2 + i2;
        let mut lookup = vec![ABSENT; all.len()];
        let mut nodes = Vec::new();
        for (k, n) in all.into_iter().enumerate() {
            // Pairwise decision keeps the mask symmetric under roundoff at the threshold.
            if pass[k] && pass[flat(n.ix, vg.mirror1(n.i1), n.i2)] {
                lookup[k] = nodes.len();
                nodes.push(n);
            }
        }
        if nodes.is_empty() {
            return Err(Error::Assembly("empty support mask".into()));
        }
        let mut mirror = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let m = lookup[flat(n.ix, vg.mirror1(n.i1), n.i2)];
            if m == ABSENT {
                return Err(Error::Assembly("support mask is not symmetric in v1".into()));
            }
            mirror.push(m);
        }
        let mut half = Vec::new();
        let mut half_of = vec![ABSENT; nodes.len()];
        for (k, n) in nodes.iter().enumerate() {
            if n.v1 > 0.0 {
                half_of[k] = half.len();
                half.push(k);
            }
        }
        Ok(PhaseSpaceGrid { xb, vg, eps_w, nodes, mirror, half, lookup, half_of })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_half(&self) -> usize {
        self.half.len()
    }

    /// Node id of grid position (ix, i1, i2), if supported.
    pub fn node_at(&self, ix: usize, i1: usize, i2: usize) -> Option<usize> {
        let k = self.lookup[(ix * self.vg.n1 + i1) * self.vg.n2 + i2];
        (k != ABSENT).then_some(k)
    }

    /// Position in the half ordering of the v₁ > 0 node k.
    pub fn half_index(&self, k: usize) -> Option<usize> {
        let h = self.half_of[k];
        (h != ABSENT).then_some(h)
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.lookup.iter().map(|&k| k != ABSENT).collect()
    }

    /// Quadrature weight of every node: wx·Δv₁Δv₂.
    pub fn weight(&self) -> f64 {
        self.xb.wx * self.vg.weight()
    }

    /// Sum of quadrature weights over the full (unmasked) box.
    pub fn box_weight(&self) -> f64 {
        self.weight() * (self.xb.n * self.vg.len()) as f64
    }

    /// Diagonal Gram of the 1/|μ_e|-weighted inner product.
    pub fn gram_inv_w(&self) -> Vec<f64> {
        let w = self.weight();
        self.nodes.iter().map(|n| w / n.mu_e.abs()).collect()
    }

    /// Diagonal Gram of the |μ_e|-weighted inner product.
    pub fn gram_w(&self) -> Vec<f64> {
        let w = self.weight();
        self.nodes.iter().map(|n| w * n.mu_e.abs()).collect()
    }

    pub fn from_fn(&self, f: impl Fn(&Node) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    /// Even and odd parts in v₁.
    pub fn parity_split(&self, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ev = (0..h.len()).map(|k| 0.5 * (h[k] + h[self.mirror[k]])).collect();
        let od = (0..h.len()).map(|k| 0.5 * (h[k] - h[self.mirror[k]])).collect();
        (ev, od)
    }

    /// Largest parity violation |h(k) − s·h(mirror k)| relative to max |h|.
    pub fn parity_defect(&self, h: &[f64], sign: f64) -> f64 {
        let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        (0..h.len()).map(|k| (h[k] - sign * h[self.mirror[k]]).abs()).fold(0.0, f64::max) / scale
    }

    pub fn to_half(&self, h: &[f64]) -> Vec<f64> {
        self.half.iter().map(|&k| h[k]).collect()
    }

    /// Extends half values with parity `sign` (+1 even, −1 odd).
    pub fn from_half(&self, hh: &[f64], sign: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (j, &k) in self.half.iter().enumerate() {
            out[k] = hh[j];
            out[self.mirror[k]] = sign * hh[j];
        }
        out
    }

    /// ∫h dv at each x coefficient.
    pub fn velocity_integral(&self, h: &[f64]) -> Vec<f64> {
        let w = self.vg.weight();
        let mut out = vec![0.0; self.xb.n];
        for (k, n) in self.nodes.iter().enumerate() {
            out[n.ix] += w * h[k];
        }
        out
    }

    /// Weighted inner product Σ w·g·a·b.
    pub fn inner(&self, gram: &[f64], a: &[f64], b: &[f64]) -> f64 {
        gram.iter().zip(a).zip(b).map(|((g, x), y)| g * x * y).sum()
    }

    pub fn norm(&self, gram: &[f64], a: &[f64]) -> f64 {
        self.inner(gram, a, a).sqrt()
    }
}
