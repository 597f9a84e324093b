//! Periodic steady states: φ⁰'' = n_ion − ∫μ dv and ψ⁰'' = ∫v̂₂μ dv.

use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2, thin_svd};
use crate::profiles::MuProfile;
use crate::velocity::VelocityGrid;
use crate::xspace::{spectral_derivative, TrigInterpolant, XGrid};

#[derive(Clone, Debug)]
pub struct EquilibriumOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Ion density n₀(1 + a cos(2πx/P)).
    pub ion_modulation: f64,
    pub seed: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions { tol: 1e-10, max_iter: 60, ion_modulation: 0.0, seed: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub density: f64,
    pub current2: f64,
    /// μ at the box edge exceeds 1e-10 of its peak.
    pub truncated: bool,
}

/// Per-node velocity moments and their derivatives with respect to (φ, ψ).
#[derive(Clone, Copy, Debug, Default)]
struct LocalMoments {
    n: f64,
    j: f64,
    n_phi: f64,
    n_psi: f64,
    j_phi: f64,
    j_psi: f64,
}

fn local_moments(profile: &MuProfile, vg: &VelocityGrid, phi: f64, psi: f64) -> LocalMoments {
    let mut m = LocalMoments::default();
    for &a in &vg.v1 {
        for &b in &vg.v2 {
            let e = profile.kinetic_energy(a, b) - phi;
            let p = b - psi;
            let mu = profile.eval_unchecked(e, p);
            let (_, vh2) = profile.velocity(a, b);
            m.n += mu.mu;
            m.j += vh2 * mu.mu;
            m.n_phi -= mu.mu_e;
            m.n_psi -= mu.mu_p;
            m.j_phi -= vh2 * mu.mu_e;
            m.j_psi -= vh2 * mu.mu_p;
        }
    }
    let w = vg.weight();
    m.n *= w;
    m.j *= w;
    m.n_phi *= w;
    m.n_psi *= w;
    m.j_phi *= w;
    m.j_psi *= w;
    m
}

/// ∫μ dv and ∫v̂₂μ dv at fixed potentials.
pub fn moments_at(profile: &MuProfile, vg: &VelocityGrid, phi: f64, psi: f64) -> Moments {
    let m = local_moments(profile, vg, phi, psi);
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for (i, &a) in vg.v1.iter().enumerate() {
        for (j, &b) in vg.v2.iter().enumerate() {
            let mu = profile.eval_unchecked(profile.kinetic_energy(a, b) - phi, b - psi).mu;
            peak = peak.max(mu);
            if i == 0 || j == 0 || i + 1 == vg.n1 || j + 1 == vg.n2 {
                edge = edge.max(mu);
            }
        }
    }
    Moments { density: m.n, current2: m.j, truncated: edge > 1e-10 * peak }
}

#[derive(Clone, Debug, Serialize)]
pub struct Equilibrium {
    pub grid: XGrid,
    pub vgrid: VelocityGrid,
    pub profile: MuProfile,
    pub ion_density: Vec<f64>,
    pub phi0: Vec<f64>,
    pub psi0: Vec<f64>,
    pub e1: Vec<f64>,
    pub b0: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// (∫(n_ion − ∫μ dv) dx, ∫∫v̂₂μ dv dx), relative to ∫n_ion dx.
    pub neutrality_defect: (f64, f64),
}

impl Equilibrium {
    pub fn is_homogeneous(&self) -> bool {
        self.phi0.iter().chain(&self.psi0).all(|&v| v == 0.0)
    }

    pub fn nx(&self) -> usize {
        self.grid.n
    }

    pub fn period(&self) -> f64 {
        self.grid.period
    }

    pub fn moments(&self, ix: usize) -> Result<Moments> {
        if ix >= self.grid.n {
            return Err(Error::Validation(format!("x index {ix} outside grid of {}", self.grid.n)));
        }
        Ok(moments_at(&self.profile, &self.vgrid, self.phi0[ix], self.psi0[ix]))
    }

    pub fn phi_interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(&self.phi0, self.grid.period)
    }

    pub fn psi_interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(&self.psi0, self.grid.period)
    }

    /// Energy and canonical momentum of (x-node, v).
    #[inline]
    pub fn invariants(&self, ix: usize, v1: f64, v2: f64) -> (f64, f64) {
        (self.profile.kinetic_energy(v1, v2) - self.phi0[ix], v2 - self.psi0[ix])
    }

    pub fn export_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# P = {:.17e}", self.grid.period);
        let _ = writeln!(s, "# Nx = {}", self.grid.n);
        let _ = writeln!(s, "# profile_hash = {}", self.profile.hash());
        let _ = writeln!(s, "# x phi0 psi0 E1 B0");
        for i in 0..self.grid.n {
            let _ = writeln!(
                s,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                self.grid.x[i], self.phi0[i], self.psi0[i], self.e1[i], self.b0[i]
            );
        }
        s
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        crate::report::write_atomic(path, self.export_string().as_bytes())
    }
}

fn residual(
    profile: &MuProfile,
    vg: &VelocityGrid,
    dxx: &Mat<f64>,
    ion: &[f64],
    phi: &[f64],
    psi: &[f64],
) -> (Vec<f64>, Vec<LocalMoments>) {
    let n = ion.len();
    let lm: Vec<LocalMoments> = (0..n).map(|i| local_moments(profile, vg, phi[i], psi[i])).collect();
    let lphi = matvec(dxx.as_ref(), phi);
    let lpsi = matvec(dxx.as_ref(), psi);
    let mut f = vec![0.0; 2 * n];
    for i in 0..n {
        f[i] = lphi[i] - ion[i] + lm[i].n;
        f[n + i] = lpsi[i] - lm[i].j;
    }
    (f, lm)
}

/// Newton iteration with pseudo-inverse steps and backtracking on the residual norm.
///
/// Jacobian null directions (the mean of ψ⁰ when ∫v̂₂μ_p dv = 0, resonant modes of the
/// homogeneous state) receive no update, so they stay at their seed values.
pub fn solve_equilibrium(
    profile: &MuProfile,
    period: f64,
    nx: usize,
    vgrid: &VelocityGrid,
    opts: &EquilibriumOptions,
) -> Result<Equilibrium> {
    let grid = XGrid::new(nx, period)?;
    let n = nx;
    let kappa = grid.kappa();
    // Ion background matched to the discrete electron density of the homogeneous
    // state, so that state solves the discrete system exactly.
    let n_ref = local_moments(profile, vgrid, 0.0, 0.0).n;
    let ion: Vec<f64> =
        grid.x.iter().map(|&x| n_ref * (1.0 + opts.ion_modulation * (kappa * x).cos())).collect();
    let (mut phi, mut psi) = match &opts.seed {
        Some((a, b)) => {
            if a.len() != n || b.len() != n {
                return Err(Error::Validation("seed potentials must have Nx entries".into()));
            }
            (a.clone(), b.clone())
        }
        None => (vec![0.0; n], vec![0.0; n]),
    };
    let dxx = grid.dxx_matrix();
    let scale = norm2(&ion);
    let (mut f, mut lm) = residual(profile, vgrid, &dxx, &ion, &phi, &psi);
    let mut rel = norm2(&f) / scale;
    let mut iterations = 0;
    while rel > opts.tol {
        if iterations >= opts.max_iter {
            return Err(fail(&f, scale, iterations, opts.tol));
        }
        iterations += 1;
        let jac = Mat::from_fn(2 * n, 2 * n, |r, c| {
            let (bi, i) = (r / n, r % n);
            let (bj, j) = (c / n, c % n);
            let lap = if bi == bj { dxx[(i, j)] } else { 0.0 };
            let d = if i == j {
                let m = &lm[i];
                match (bi, bj) {
                    (0, 0) => m.n_phi,
                    (0, 1) => m.n_psi,
                    (1, 0) => -m.j_phi,
                    _ => -m.j_psi,
                }
            } else {
                0.0
            };
            lap + d
        });
        let svd = thin_svd(jac.as_ref())?;
        let smax = svd.s.first().copied().unwrap_or(0.0);
        // step = −V Σ⁺ Uᵀ F
        let utf = matvec(svd.u.transpose(), &f);
        let coef: Vec<f64> = utf
            .iter()
            .zip(&svd.s)
            .map(|(c, &s)| if s > 1e-9 * smax { -c / s } else { 0.0 })
            .collect();
        let step = matvec(svd.v.as_ref(), &coef);
        let mut alpha = 1.0;
        let r0 = norm2(&f);
        loop {
            let tphi: Vec<f64> = (0..n).map(|i| phi[i] + alpha * step[i]).collect();
            let tpsi: Vec<f64> = (0..n).map(|i| psi[i] + alpha * step[n + i]).collect();
            let (tf, tlm) = residual(profile, vgrid, &dxx, &ion, &tphi, &tpsi);
            if norm2(&tf) < (1.0 - 1e-4 * alpha) * r0 || norm2(&tf) / scale <= opts.tol {
                phi = tphi;
                psi = tpsi;
                f = tf;
                lm = tlm;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-6 {
                return Err(fail(&f, scale, iterations, opts.tol));
            }
        }
        rel = norm2(&f) / scale;
    }
    let e1: Vec<f64> = spectral_derivative(&phi, period, 1).iter().map(|v| -v).collect();
    let b0 = spectral_derivative(&psi, period, 1);
    let total_ion: f64 = ion.iter().sum();
    let neutrality = (
        ion.iter().zip(&lm).map(|(a, m)| a - m.n).sum::<f64>() / total_ion,
        lm.iter().map(|m| m.j).sum::<f64>() / total_ion,
    );
    if neutrality.0.abs() > 1e3 * opts.tol || neutrality.1.abs() > 1e3 * opts.tol {
        return Err(Error::Unsolvable(format!(
            "neutrality defects ({:e}, {:e}) after convergence",
            neutrality.0, neutrality.1
        )));
    }
    Ok(Equilibrium {
        grid,
        vgrid: vgrid.clone(),
        profile: profile.clone(),
        ion_density: ion,
        phi0: phi,
        psi0: psi,
        e1,
        b0,
        residual_norm: rel,
        iterations,
        neutrality_defect: neutrality,
    })
}

/// Stalled Newton: a residual dominated by the x-means cannot be removed by any
/// periodic potential, which makes the configuration unsolvable.
fn fail(f: &[f64], scale: f64, iterations: usize, tol: f64) -> Error {
    let n = f.len() / 2;
    let mean1 = f[..n].iter().sum::<f64>() / n as f64;
    let mean2 = f[n..].iter().sum::<f64>() / n as f64;
    let mean_part = ((mean1 * mean1 + mean2 * mean2) * n as f64).sqrt() / scale;
    if mean_part > 100.0 * tol {
        Error::Unsolvable(format!(
            "periodic solvability violated: mean residuals ({mean1:e}, {mean2:e})"
        ))
    } else {
        Error::NewtonDivergence { iterations, residual: norm2(f) / scale }
    }
}
