//! Reduced operators on x-functions: 𝒜₁⁰, 𝒜₂⁰, ℬ⁰, (ℬ⁰)*, ℒ⁰ and the field operator L₀.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, dot, matvec, sym_eigen};
use crate::phase_space::{KernelProjector, PhaseSpaceGrid};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CountTolerances {
    /// Zero threshold relative to the largest |eigenvalue|.
    pub tol_zero_rel: f64,
}

impl Default for CountTolerances {
    fn default() -> Self {
        CountTolerances { tol_zero_rel: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NegativeCount {
    pub n_minus: usize,
    pub dim_ker: usize,
    pub spectrum: Vec<f64>,
    pub tol_zero: f64,
    /// Eigenvalues with tol_zero < |λ| ≤ 100·tol_zero.
    pub marginal: Vec<f64>,
}

/// n⁻ = #{λ < −tol}, dim ker = #{|λ| ≤ tol} for a symmetric matrix.
pub fn negative_count(op: &Mat<f64>, tol: CountTolerances) -> Result<NegativeCount> {
    let asym = asymmetry(op.as_ref());
    if asym > 1e-10 {
        return Err(Error::Contract(format!("operator not symmetric: relative defect {asym:e}")));
    }
    let (spectrum, _) = sym_eigen(op.as_ref())?;
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigensolve produced non-finite values".into()));
    }
    let scale = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol_zero = tol.tol_zero_rel * scale;
    Ok(count_spectrum(spectrum, tol_zero))
}

pub fn count_spectrum(spectrum: Vec<f64>, tol_zero: f64) -> NegativeCount {
    let n_minus = spectrum.iter().filter(|&&v| v < -tol_zero).count();
    let dim_ker = spectrum.iter().filter(|&&v| v.abs() <= tol_zero).count();
    let marginal = spectrum.iter().copied().filter(|v| v.abs() > tol_zero && v.abs() <= 100.0 * tol_zero).collect();
    NegativeCount { n_minus, dim_ker, spectrum, tol_zero, marginal }
}

#[derive(Clone, Debug)]
pub struct OperatorBundle {
    pub a1: Mat<f64>,
    pub a2: Mat<f64>,
    pub b0: Mat<f64>,
    /// (ℬ⁰)* from its closed form (∫μ_p dv)h + ∫v̂₂μ_e𝒫h dv.
    pub b0_star: Mat<f64>,
    pub l0_field: Mat<f64>,
    /// ℬ⁰ᵀ(𝒜₁⁰)⁺ℬ⁰ + 𝒜₂⁰.
    pub lcal0: Mat<f64>,
    /// Pseudo-inverse of 𝒜₁⁰ on the complement of its kernel.
    pub a1_pinv: Mat<f64>,
    pub a1_kernel_dim: usize,
    pub a1_min_eig: f64,
    /// ‖closed-form (ℬ⁰)* − ℬ⁰ᵀ‖ / (‖ℬ⁰‖ + ‖∫|μ_e| dv‖).
    pub adjoint_formula_defect: f64,
    /// wx: weight of the x inner product.
    pub wx: f64,
    pub tol: CountTolerances,
}

/// Phase-space lift of an x-function: H(x, v) = h(x).
fn lift(grid: &PhaseSpaceGrid, h: &[f64]) -> Vec<f64> {
    grid.from_fn(|n| h[n.ix])
}

impl OperatorBundle {
    /// Column-by-column assembly on the basis of x-functions carried by the grid.
    pub fn assemble(grid: &PhaseSpaceGrid, proj: &KernelProjector, tol: CountTolerances) -> Result<Self> {
        let n = grid.xb.n;
        let xb = &grid.xb;
        let mu_e = grid.from_fn(|k| k.mu_e);
        let mu_p = grid.from_fn(|k| k.mu_p);
        let vh2 = grid.from_fn(|k| k.vh2);
        let m_p = grid.velocity_integral(&grid.from_fn(|k| k.vh2 * k.mu_p));
        // −Dx² = DxᵀDx; the E₁ = ∂ₓφ energy of the lift uses this form.
        let dtd = xb.dx.transpose() * &xb.dx;
        let times = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();

        let mut a1 = Mat::zeros(n, n);
        let mut a2 = Mat::zeros(n, n);
        let mut b0 = Mat::zeros(n, n);
        let mut b0s = Mat::zeros(n, n);
        let mut l0 = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let h = lift(grid, &e);
            let ph = proj.apply(&h);
            let v2h = times(&vh2, &h);
            let pv2h = proj.apply(&v2h);
            let mue_h = grid.velocity_integral(&times(&mu_e, &h));
            let mue_ph = grid.velocity_integral(&times(&mu_e, &ph));
            let col_a2 = grid.velocity_integral(&times(&times(&mu_e, &vh2), &pv2h));
            let rem: Vec<f64> = v2h.iter().zip(&pv2h).map(|(a, b)| a - b).collect();
            let col_b = grid.velocity_integral(&times(&mu_e, &rem));
            let mup_h = grid.velocity_integral(&times(&mu_p, &h));
            let col_bs = grid.velocity_integral(&times(&times(&vh2, &mu_e), &ph));
            for i in 0..n {
                a1[(i, j)] = dtd[(i, j)] - mue_h[i] + mue_ph[i];
                let lap = xb.neg_lap[(i, j)];
                let mp = if i == j { m_p[i] } else { 0.0 };
                a2[(i, j)] = lap - mp - col_a2[i];
                l0[(i, j)] = lap - mp;
                b0[(i, j)] = -col_b[i];
                b0s[(i, j)] = mup_h[i] + col_bs[i];
            }
        }
        for m in [&mut a1, &mut a2] {
            let asym = asymmetry(m.as_ref());
            if asym > 1e-8 {
                return Err(Error::Assembly(format!("reduced operator asymmetric by {asym:e}")));
            }
            *m = crate::linalg::symmetrize(m.as_ref());
        }

        let (lam, q) = sym_eigen(a1.as_ref())?;
        let scale = lam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol_zero = tol.tol_zero_rel * scale;
        if lam[0] < -tol_zero {
            return Err(Error::Assembly(format!("A1 has negative eigenvalue {:e}", lam[0])));
        }
        let keep: Vec<usize> = (0..n).filter(|&i| lam[i] > tol_zero).collect();
        let a1_pinv = Mat::from_fn(n, n, |r, c| keep.iter().map(|&k| q[(r, k)] * q[(c, k)] / lam[k]).sum());
        let lcal0 = crate::linalg::symmetrize((b0.transpose() * &a1_pinv * &b0 + &a2).as_ref());

        let dens = grid.velocity_integral(&grid.from_fn(|k| -k.mu_e));
        let scale = b0.norm_l2() + dens.iter().map(|d| d * d).sum::<f64>().sqrt();
        let adjoint_formula_defect = (&b0s - b0.transpose()).norm_l2() / scale;
        Ok(OperatorBundle {
            a1,
            a2,
            b0,
            b0_star: b0s,
            l0_field: l0,
            lcal0,
            a1_pinv,
            a1_kernel_dim: n - keep.len(),
            a1_min_eig: lam[0],
            adjoint_formula_defect,
            wx: xb.wx,
            tol,
        })
    }

    pub fn count_lcal0(&self) -> Result<NegativeCount> {
        negative_count(&self.lcal0, self.tol)
    }

    /// (ℒ⁰ψ, ψ) in the x inner product.
    pub fn lcal0_form(&self, psi: &[f64]) -> f64 {
        self.wx * dot(psi, &matvec(self.lcal0.as_ref(), psi))
    }
}

/// Lifted state (g_ev^ψ, E₁^ψ, ψ) that realizes the reduced form, together with φ^ψ.
#[derive(Clone, Debug)]
pub struct LiftedState {
    pub phi: Vec<f64>,
    pub g_ev: Vec<f64>,
    pub e1: Vec<f64>,
    pub psi: Vec<f64>,
    /// ⟨L u^ψ, u^ψ⟩.
    pub l_form: f64,
    /// (ℒ⁰ψ, ψ).
    pub lcal0_form: f64,
}

/// φ^ψ = −(𝒜₁⁰)⁺ℬ⁰ψ, g_ev^ψ = μ_e(φ^ψ − 𝒫(v̂₂ψ + φ^ψ)), E₁^ψ = ∂ₓφ^ψ, checked against
/// ⟨Lu^ψ, u^ψ⟩ = (ℒ⁰ψ, ψ).
pub fn lift_psi(grid: &PhaseSpaceGrid, bundle: &OperatorBundle, proj: &KernelProjector, psi: &[f64]) -> Result<LiftedState> {
    let n = grid.xb.n;
    if psi.len() != n {
        return Err(Error::Validation(format!("psi has {} entries, expected {n}", psi.len())));
    }
    let bpsi = matvec(bundle.b0.as_ref(), psi);
    let phi: Vec<f64> = matvec(bundle.a1_pinv.as_ref(), &bpsi).iter().map(|v| -v).collect();
    let arg = grid.from_fn(|k| k.vh2 * psi[k.ix] + phi[k.ix]);
    let parg = proj.apply(&arg);
    let g_ev: Vec<f64> = grid.nodes.iter().enumerate().map(|(k, nd)| nd.mu_e * (phi[nd.ix] - parg[k])).collect();
    let e1 = matvec(grid.xb.dx.as_ref(), &phi);
    let l_form = field_l_form(grid, bundle, &g_ev, &e1, psi);
    let lcal0_form = bundle.lcal0_form(psi);
    let h1 = grid.xb.wx * (dot(psi, &matvec(grid.xb.neg_lap.as_ref(), psi)) + dot(psi, psi));
    let scale = lcal0_form.abs().max(h1).max(f64::MIN_POSITIVE);
    if (l_form - lcal0_form).abs() > 1e-6 * scale {
        return Err(Error::Consistency(format!(
            "lift identity violated: <Lu,u> = {l_form:e}, (L0 psi, psi) = {lcal0_form:e}"
        )));
    }
    Ok(LiftedState { phi, g_ev, e1, psi: psi.to_vec(), l_form, lcal0_form })
}

/// ⟨Lu, u⟩ = ∬g²/|μ_e| + ∫E₁² + ⟨L₀ψ, ψ⟩ for u = (g, E₁, ψ) with g on the full grid.
pub fn field_l_form(grid: &PhaseSpaceGrid, bundle: &OperatorBundle, g: &[f64], e1: &[f64], psi: &[f64]) -> f64 {
    let gi = grid.gram_inv_w();
    grid.inner(&gi, g, g) + grid.xb.wx * (dot(e1, e1) + dot(psi, &matvec(bundle.l0_field.as_ref(), psi)))
}
