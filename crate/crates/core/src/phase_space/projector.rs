use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use faer::Mat;

use crate::linalg::{matvec, sparse_from_triplets, sparse_matvec, sym_eigen, Sparse};
use crate::xspace::XBasisKind;

use super::characteristics::Flow;
use super::grid::PhaseSpaceGrid;
use super::transport::Transport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorMethod {
    FourierExactHomogeneous,
    OrbitAverage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectorOptions {
    pub method: ProjectorMethod,
    /// Averaging horizon for orbits with no detected return.
    #[serde(rename = "T_avg")]
    pub t_avg: f64,
    pub dt: f64,
    pub interp_order: usize,
    /// Largest accepted idempotence, adjointness and kernel defect.
    pub tolerance: f64,
}

impl Default for ProjectorOptions {
    fn default() -> Self {
        ProjectorOptions {
            method: ProjectorMethod::FourierExactHomogeneous,
            t_avg: 1000.0,
            dt: 0.05,
            interp_order: 6,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ProjectorDiagnostics {
    pub idempotence_defect: f64,
    pub adjoint_defect: f64,
    /// Adjointness defect of the orbit average before symmetrization.
    pub raw_adjoint_defect: f64,
    pub kernel_defect: f64,
    pub orbits_without_return: usize,
    pub probe_count: usize,
}

#[derive(Clone, Debug)]
pub enum ProjectorMatrix {
    Sparse(Sparse),
    /// 𝒫 = L·R with L = W^{-1/2}Q and R = QᵀW^{1/2}.
    LowRank { left: Mat<f64>, right: Mat<f64> },
}

/// Discrete projector onto ker D̂ in the |μ_e|-weighted inner product.
#[derive(Clone, Debug)]
pub struct KernelProjector {
    pub method: ProjectorMethod,
    pub t_avg: f64,
    pub matrix: ProjectorMatrix,
    pub diagnostics: ProjectorDiagnostics,
}

impl KernelProjector {
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        match &self.matrix {
            ProjectorMatrix::Sparse(m) => sparse_matvec(m, h),
            ProjectorMatrix::LowRank { left, right } => matvec(left.as_ref(), &matvec(right.as_ref(), h)),
        }
    }

    /// Dimension of the range (orbit method) or None for the sparse exact form.
    pub fn rank(&self) -> Option<usize> {
        match &self.matrix {
            ProjectorMatrix::Sparse(_) => None,
            ProjectorMatrix::LowRank { left, .. } => Some(left.ncols()),
        }
    }
}

pub fn build_projector(
    eq: &Equilibrium,
    grid: &PhaseSpaceGrid,
    transport: &Transport,
    opts: &ProjectorOptions,
) -> Result<KernelProjector> {
    if !(opts.tolerance > 0.0) {
        return Err(Error::Validation("projector tolerance must be positive".into()));
    }
    let (matrix, raw_adjoint, no_return) = match opts.method {
        ProjectorMethod::FourierExactHomogeneous => {
            if !eq.is_homogeneous() {
                return Err(Error::Contract("exact projector needs a homogeneous equilibrium".into()));
            }
            (ProjectorMatrix::Sparse(exact_matrix(grid)), 0.0, 0)
        }
        ProjectorMethod::OrbitAverage => {
            if grid.xb.kind != XBasisKind::Nodal {
                return Err(Error::Contract("orbit averaging needs the nodal basis".into()));
            }
            if !(opts.t_avg > 0.0 && opts.dt > 0.0) || opts.interp_order < 2 {
                return Err(Error::Validation("orbit averaging needs T_avg, dt > 0 and order >= 2".into()));
            }
            let (raw, missing) = orbit_matrix(eq, grid, opts)?;
            let raw_adj = adjoint_defect(grid, &raw);
            (spectral_projector(grid, &symmetrize(grid, &raw))?, raw_adj, missing)
        }
    };
    let mut p = KernelProjector {
        method: opts.method,
        t_avg: opts.t_avg,
        matrix,
        diagnostics: ProjectorDiagnostics::default(),
    };
    p.diagnostics = diagnose(grid, transport, &p);
    p.diagnostics.raw_adjoint_defect = raw_adjoint;
    p.diagnostics.orbits_without_return = no_return;
    let d = &p.diagnostics;
    if d.idempotence_defect > opts.tolerance || d.adjoint_defect > opts.tolerance || d.kernel_defect > opts.tolerance {
        return Err(Error::ProjectorRejected(format!(
            "idempotence {:e}, adjoint {:e}, kernel {:e} against tolerance {:e}",
            d.idempotence_defect, d.adjoint_defect, d.kernel_defect, opts.tolerance
        )));
    }
    Ok(p)
}

/// x-average plus the Nyquist component, which together span the discrete ker ∂ₓ.
fn exact_matrix(grid: &PhaseSpaceGrid) -> Sparse {
    let mut t = Vec::new();
    for (r, n) in grid.nodes.iter().enumerate() {
        for b in 0..grid.xb.n {
            let w = grid.xb.ker_dx[(n.ix, b)];
            if w != 0.0 {
                if let Some(c) = grid.node_at(b, n.i1, n.i2) {
                    t.push((r, c, w));
                }
            }
        }
    }
    sparse_from_triplets(grid.len(), grid.len(), &t)
}

/// Periodic sinc weights of the trigonometric interpolant at x.
fn trig_weights(x: f64, n: usize, period: f64, out: &mut [f64]) {
    let h = period / n as f64;
    for (j, w) in out.iter_mut().enumerate() {
        let th = std::f64::consts::PI * (x - j as f64 * h) / period;
        *w = if th.sin().abs() < 1e-13 { 1.0 } else { (n as f64 * th).sin() / (n as f64 * th.tan()) };
    }
}

/// Lagrange weights of order q on the uniform midpoint grid; returns the first index.
fn lagrange_weights(v: f64, nodes: &[f64], h: f64, q: usize, out: &mut Vec<f64>) -> Option<usize> {
    let n = nodes.len();
    let lo = nodes[0] - 0.5 * h;
    if v < lo || v > -lo {
        return None;
    }
    let pos = (v - nodes[0]) / h;
    let start = (pos.floor() as isize - (q as isize / 2 - 1)).clamp(0, (n - q.min(n)) as isize) as usize;
    let q = q.min(n);
    out.clear();
    for j in 0..q {
        let mut w = 1.0;
        for m in 0..q {
            if m != j {
                w *= (v - nodes[start + m]) / (nodes[start + j] - nodes[start + m]);
            }
        }
        out.push(w);
    }
    Some(start)
}

struct Accumulator<'a> {
    grid: &'a PhaseSpaceGrid,
    q: usize,
    dense: Vec<f64>,
    wx: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl<'a> Accumulator<'a> {
    fn new(grid: &'a PhaseSpaceGrid, q: usize) -> Self {
        Accumulator {
            grid,
            q,
            dense: vec![0.0; grid.xb.n * grid.vg.len()],
            wx: vec![0.0; grid.xb.n],
            w1: Vec::with_capacity(q),
            w2: Vec::with_capacity(q),
        }
    }

    fn add(&mut self, s: [f64; 3], weight: f64) {
        let g = self.grid;
        let vg = &g.vg;
        let (Some(s1), Some(s2)) = (
            lagrange_weights(s[1], &vg.v1, vg.h1, self.q, &mut self.w1),
            lagrange_weights(s[2], &vg.v2, vg.h2, self.q, &mut self.w2),
        ) else {
            return;
        };
        trig_weights(s[0].rem_euclid(g.xb.period), g.xb.n, g.xb.period, &mut self.wx);
        for (ix, &ax) in self.wx.iter().enumerate() {
            if ax == 0.0 {
                continue;
            }
            for (a, &b1) in self.w1.iter().enumerate() {
                if b1 == 0.0 {
                    continue;
                }
                let base = (ix * vg.n1 + s1 + a) * vg.n2 + s2;
                let f = weight * ax * b1;
                for (b, &b2) in self.w2.iter().enumerate() {
                    self.dense[base + b] += f * b2;
                }
            }
        }
    }

    fn drain(&mut self, row: usize, out: &mut Vec<(usize, usize, f64)>) {
        let g = self.grid;
        let vg = &g.vg;
        for (k, v) in self.dense.iter_mut().enumerate() {
            if *v != 0.0 {
                if v.abs() > 1e-15 {
                    let ix = k / vg.len();
                    let rem = k % vg.len();
                    if let Some(c) = g.node_at(ix, rem / vg.n2, rem % vg.n2) {
                        out.push((row, c, *v));
                    }
                }
                *v = 0.0;
            }
        }
    }
}

/// Orbit average over one exact period when a return to the starting x with the same
/// sign of v₁ is found within T_avg, otherwise over [0, T_avg].
fn orbit_matrix(eq: &Equilibrium, grid: &PhaseSpaceGrid, opts: &ProjectorOptions) -> Result<(Sparse, usize)> {
    let flow = Flow::new(eq);
    flow.check_step(opts.dt)?;
    let period = grid.xb.period;
    let xs: Vec<f64> = (0..grid.xb.n).map(|i| i as f64 * period / grid.xb.n as f64).collect();
    let rows: Vec<Result<(Vec<(usize, usize, f64)>, bool)>> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || Accumulator::new(grid, opts.interp_order),
            |acc, r| {
                let n = &grid.nodes[r];
                let s0 = [xs[n.ix], n.v1, n.v2];
                let ret = find_return(&flow, s0, period, opts.t_avg, opts.dt)?;
                let returned = ret.is_some();
                match ret {
                    Some(t_ret) => {
                        let m = ((t_ret / opts.dt).ceil() as usize).max(32);
                        let h = t_ret / m as f64;
                        let mut s = s0;
                        for _ in 0..m {
                            acc.add(s, 1.0 / m as f64);
                            s = flow.rk4(s, h);
                        }
                    }
                    None => {
                        let m = (opts.t_avg / opts.dt).ceil() as usize;
                        let h = opts.t_avg / m as f64;
                        let mut s = s0;
                        for k in 0..=m {
                            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                            acc.add(s, w / m as f64);
                            if k < m {
                                s = flow.rk4(s, h);
                                flow.guard(s, (k + 1) as f64 * h, h)?;
                            }
                        }
                    }
                }
                let mut out = Vec::new();
                acc.drain(r, &mut out);
                Ok((out, returned))
            },
        )
        .collect();
    let mut t = Vec::new();
    let mut missing = 0;
    for row in rows {
        let (entries, returned) = row?;
        if !returned {
            missing += 1;
        }
        t.extend(entries);
    }
    Ok((sparse_from_triplets(grid.len(), grid.len(), &t), missing))
}

/// First time T > 0 with X(T) = x₀ + mP for an integer m and v₁ of the starting sign.
fn find_return(flow: &Flow, s0: [f64; 3], period: f64, horizon: f64, dt: f64) -> Result<Option<f64>> {
    let sign = s0[1].signum();
    let mut s = s0;
    let mut t = 0.0;
    let steps = (horizon / dt).ceil() as usize;
    for k in 0..steps {
        let next = flow.rk4(s, dt);
        flow.guard(next, t + dt, dt)?;
        let a = (s[0] - s0[0]) / period;
        let b = (next[0] - s0[0]) / period;
        // integer strictly crossed (or landed on) within this step, excluding the start
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m = if a < b { lo.floor() + 1.0 } else { hi.ceil() - 1.0 };
        let crosses = if k == 0 { m != 0.0 && m >= lo && m <= hi } else { m >= lo && m <= hi };
        if crosses && next[1].signum() == sign && s[1].signum() == sign {
            // Newton on τ ∈ [0, dt] for X(τ) = x₀ + mP
            let target = s0[0] + m * period;
            let mut tau = dt * (target - s[0]) / (next[0] - s[0]);
            for _ in 0..6 {
                let st = flow.rk4(s, tau);
                let vx = st[1];
                if vx == 0.0 {
                    break;
                }
                tau -= (st[0] - target) / vx;
                tau = tau.clamp(0.0, dt);
            }
            return Ok(Some(t + tau));
        }
        s = next;
        t += dt;
    }
    Ok(None)
}

/// ½(A + W⁻¹AᵀW) with W the |μ_e| Gram.
fn symmetrize(grid: &PhaseSpaceGrid, a: &Sparse) -> Sparse {
    let w = grid.gram_w();
    let mut t = Vec::new();
    let sym = a.as_ref().symbolic();
    let vals = a.as_ref().val();
    for r in 0..a.nrows() {
        for idx in sym.row_range(r) {
            let c = sym.col_idx()[idx];
            let v = vals[idx];
            t.push((r, c, 0.5 * v));
            t.push((c, r, 0.5 * v * w[r] / w[c]));
        }
    }
    sparse_from_triplets(a.nrows(), a.ncols(), &t)
}

/// W-orthogonal projector onto the eigenvalue > ½ cluster of the W-self-adjoint average.
fn spectral_projector(grid: &PhaseSpaceGrid, a: &Sparse) -> Result<ProjectorMatrix> {
    let n = grid.len();
    let sw: Vec<f64> = grid.gram_w().iter().map(|w| w.sqrt()).collect();
    let mut s = Mat::<f64>::zeros(n, n);
    let sym = a.as_ref().symbolic();
    let vals = a.as_ref().val();
    for r in 0..n {
        for idx in sym.row_range(r) {
            let c = sym.col_idx()[idx];
            s[(r, c)] += vals[idx] * sw[r] / sw[c];
        }
    }
    let (lam, q) = sym_eigen(s.as_ref())?;
    let keep: Vec<usize> = (0..n).filter(|&j| lam[j] > 0.5).collect();
    let left = Mat::from_fn(n, keep.len(), |i, j| q[(i, keep[j])] / sw[i]);
    let right = Mat::from_fn(keep.len(), n, |i, j| q[(j, keep[i])] * sw[j]);
    Ok(ProjectorMatrix::LowRank { left, right })
}

/// Smooth probe functions, even in v₁, with random low Fourier content in x.
pub fn probe_functions(grid: &PhaseSpaceGrid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = 2.0 * std::f64::consts::PI / grid.xb.period;
    let nodal = grid.xb.kind == XBasisKind::Nodal;
    let xs: Vec<f64> = (0..grid.xb.n).map(|i| i as f64 * grid.xb.period / grid.xb.n as f64).collect();
    (0..count)
        .map(|_| {
            let m = rng.gen_range(0..=2) as f64;
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let c: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let coef: Vec<f64> = (0..grid.xb.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            grid.from_fn(|n| {
                let xpart = if nodal { 1.0 + 0.5 * (m * kappa * xs[n.ix] + th).cos() } else { coef[n.ix] };
                xpart * (c[0] + c[1] * n.v1 * n.v1 / (1.0 + n.v1 * n.v1) + c[2] * n.v2.tanh() + c[3] * (0.5 * n.v2).cos())
            })
        })
        .collect()
}

fn adjoint_defect(grid: &PhaseSpaceGrid, a: &Sparse) -> f64 {
    let w = grid.gram_w();
    let probes = probe_functions(grid, 6, 17);
    let ap: Vec<Vec<f64>> = probes.iter().map(|h| sparse_matvec(a, h)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..probes.len() {
        for j in 0..probes.len() {
            let lhs = grid.inner(&w, &ap[i], &probes[j]);
            let rhs = grid.inner(&w, &probes[i], &ap[j]);
            let scale = grid.norm(&w, &probes[i]) * grid.norm(&w, &probes[j]);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// Idempotence, adjointness and D̂-annihilation defects on the probe set, all relative
/// to |μ_e|-weighted norms.
pub fn diagnose(grid: &PhaseSpaceGrid, transport: &Transport, p: &KernelProjector) -> ProjectorDiagnostics {
    let w = grid.gram_w();
    let probes = probe_functions(grid, 10, 5);
    let mut d = ProjectorDiagnostics { probe_count: probes.len(), ..Default::default() };
    let ph: Vec<Vec<f64>> = probes.iter().map(|h| p.apply(h)).collect();
    for (h, q) in probes.iter().zip(&ph) {
        let nh = grid.norm(&w, h);
        let qq = p.apply(q);
        let diff: Vec<f64> = qq.iter().zip(q).map(|(a, b)| a - b).collect();
        d.idempotence_defect = d.idempotence_defect.max(grid.norm(&w, &diff) / nh);
        let dq = transport.apply(q);
        d.kernel_defect = d.kernel_defect.max(grid.norm(&w, &dq) / nh);
    }
    for i in 0..probes.len() {
        for j in 0..probes.len() {
            let lhs = grid.inner(&w, &ph[i], &probes[j]);
            let rhs = grid.inner(&w, &probes[i], &ph[j]);
            let scale = grid.norm(&w, &probes[i]) * grid.norm(&w, &probes[j]);
            d.adjoint_defect = d.adjoint_defect.max((lhs - rhs).abs() / scale);
        }
    }
    d
}

/// Largest relative difference on the probe set between projectors built with horizons
/// T_avg and T_avg/2.
pub fn t_avg_sensitivity(eq: &Equilibrium, grid: &PhaseSpaceGrid, opts: &ProjectorOptions) -> Result<f64> {
    let (a, _) = orbit_matrix(eq, grid, opts)?;
    let half = ProjectorOptions { t_avg: 0.5 * opts.t_avg, ..opts.clone() };
    let (b, _) = orbit_matrix(eq, grid, &half)?;
    let mk = |m: ProjectorMatrix| KernelProjector {
        method: ProjectorMethod::OrbitAverage,
        t_avg: opts.t_avg,
        matrix: m,
        diagnostics: ProjectorDiagnostics::default(),
    };
    let a = mk(spectral_projector(grid, &symmetrize(grid, &a))?);
    let b = mk(spectral_projector(grid, &symmetrize(grid, &b))?);
    let w = grid.gram_w();
    let mut worst: f64 = 0.0;
    for h in probe_functions(grid, 10, 5) {
        let d: Vec<f64> = a.apply(&h).iter().zip(b.apply(&h)).map(|(x, y)| x - y).collect();
        worst = worst.max(grid.norm(&w, &d) / grid.norm(&w, &h));
    }
    Ok(worst)
}
