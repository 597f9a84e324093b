//! ker ℒ⁰ against the kernel of ⟨L·,·⟩ restricted to R(B).

use faer::Mat;
use serde::Serialize;

use super::triple::RestrictedCount;
use super::vm::VmTriple;
use crate::error::{Error, Result};
use crate::linalg::{dot, matvec, norm2, sym_eigen};
use crate::operators::{lift_psi, OperatorBundle};
use crate::phase_space::{KernelProjector, PhaseSpaceGrid};

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub dim_ker_lcal0: usize,
    pub dim_ker_restricted: usize,
    /// X-distance of each lifted kernel vector from R(B), relative.
    pub lift_range_defect: f64,
    /// ‖Qᵀ L u^ψ‖ relative to ‖u^ψ‖ and the restricted spectrum scale.
    pub lift_form_defect: f64,
    /// X-distance of each lift from the restricted kernel span, relative.
    pub span_defect: f64,
    /// ‖ℒ⁰ψ‖/(‖ℒ⁰‖‖ψ‖) for the ψ block of each restricted-kernel vector.
    pub converse_residual: f64,
    pub matched: bool,
}

fn x_inner(g: &Mat<f64>, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &matvec(g.as_ref(), b))
}

/// Lifts ψ to X coordinates (g_ev on the half grid, E₁, ψ).
pub fn lift_to_x(grid: &PhaseSpaceGrid, bundle: &OperatorBundle, proj: &KernelProjector, psi: &[f64]) -> Result<Vec<f64>> {
    let l = lift_psi(grid, bundle, proj, psi)?;
    let g: Vec<f64> = grid.half.iter().map(|&k| l.g_ev[k]).collect();
    Ok([g.as_slice(), &l.e1, &l.psi].concat())
}

pub fn kernel_correspondence(
    vm: &VmTriple,
    restricted: &RestrictedCount,
    grid: &PhaseSpaceGrid,
    bundle: &OperatorBundle,
    proj: &KernelProjector,
    tol: f64,
) -> Result<KernelReport> {
    let t = &vm.triple;
    let gx = &t.gram_x;
    let count = bundle.count_lcal0()?;
    let (vals, vecs) = sym_eigen(bundle.lcal0.as_ref())?;
    let ker: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= count.tol_zero).collect();
    let q = &restricted.range;
    let kb = &restricted.kernel;
    let rscale = restricted.spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let (mut range_d, mut form_d, mut span_d) = (0.0f64, 0.0f64, 0.0f64);
    for &i in &ker {
        let psi: Vec<f64> = vecs.col(i).iter().copied().collect();
        let u = lift_to_x(grid, bundle, proj, &psi)?;
        let nu = x_inner(gx, &u, &u).sqrt();
        let gu = matvec(gx.as_ref(), &u);
        let dist = |basis: &Mat<f64>| {
            let c = matvec(basis.transpose(), &gu);
            let p = matvec(basis.as_ref(), &c);
            let r: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a - b).collect();
            x_inner(gx, &r, &r).max(0.0).sqrt() / nu
        };
        range_d = range_d.max(dist(q));
        span_d = span_d.max(dist(kb));
        let lu = matvec(t.l_form.as_ref(), &u);
        form_d = form_d.max(norm2(&matvec(q.transpose(), &lu)) / (nu * rscale));
    }

    let lnorm = bundle.lcal0.norm_l2();
    let off = vm.layout.nh + vm.layout.n;
    let mut converse: f64 = 0.0;
    for j in 0..kb.ncols() {
        let psi: Vec<f64> = (0..vm.layout.n).map(|i| kb[(off + i, j)]).collect();
        let np = norm2(&psi);
        let r = if np > 0.0 { norm2(&matvec(bundle.lcal0.as_ref(), &psi)) / (lnorm * np) } else { f64::INFINITY };
        converse = converse.max(r);
    }

    let dims_match = ker.len() == restricted.dim_ker_restricted;
    let report = KernelReport {
        dim_ker_lcal0: ker.len(),
        dim_ker_restricted: restricted.dim_ker_restricted,
        lift_range_defect: range_d,
        lift_form_defect: form_d,
        span_defect: span_d,
        converse_residual: converse,
        matched: dims_match && range_d <= tol && form_d <= tol && span_d <= tol && converse <= tol,
    };
    if !dims_match {
        return Err(Error::Consistency(format!(
            "kernel dimension mismatch: ker L0 = {}, restricted kernel = {}; defects: range {range_d:e}, form {form_d:e}, span {span_d:e}, converse {converse:e}",
            report.dim_ker_lcal0, report.dim_ker_restricted
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurReport {
    pub samples: usize,
    /// min over samples of (⟨Lu,u⟩ − wx·ψᵀℒ⁰ψ)/‖u‖²_X for u = BAv, v Gaussian.
    pub min_margin: f64,
}

pub fn schur_margin(vm: &VmTriple, bundle: &OperatorBundle, samples: usize, seed: u64) -> SchurReport {
    use rand::SeedableRng;
    let t = &vm.triple;
    let ba = &t.b * &t.a_form;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let v: Vec<f64> = (0..t.dim_y()).map(|_| super::gaussian(&mut rng)).collect();
        let u = matvec(ba.as_ref(), &v);
        let lu = x_inner(&t.l_form, &u, &u);
        let red = bundle.lcal0_form(vm.layout.psi(&u));
        worst = worst.min((lu - red) / x_inner(&t.gram_x, &u, &u));
    }
    SchurReport { samples, min_margin: worst }
}
