mod common;

use common::{homogeneous, nodal_grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmstab::linalg::sym_eigenvalues;
use vmstab::operators::{lift_psi, negative_count, CountTolerances, OperatorBundle};
use vmstab::phase_space::{build_projector, ProjectorOptions};

fn bundle(t2: f64, nx: usize, nv: usize) -> (vmstab::phase_space::PhaseSpaceGrid, vmstab::phase_space::KernelProjector, OperatorBundle) {
    let eq = homogeneous(t2, nx, nv);
    let (grid, tr) = nodal_grid(&eq);
    let proj = build_projector(&eq, &grid, &tr, &ProjectorOptions::default()).unwrap();
    let b = OperatorBundle::assemble(&grid, &proj, CountTolerances::default()).unwrap();
    (grid, proj, b)
}

/// k² − n0(T2/T1 − 1) for 0 < k < N/2, n0 for k = 0, k_N² + n0 at Nyquist.
fn oracle(t2: f64, nx: usize) -> Vec<f64> {
    let mut v = vec![1.0, (nx / 2) as f64 * (nx / 2) as f64 + 1.0];
    for k in 1..nx / 2 {
        let l = (k * k) as f64 - (t2 - 1.0);
        v.push(l);
        v.push(l);
    }
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn homogeneous_spectrum_matches_dispersion_oracle() {
    for &t2 in &[1.0, 3.0, 4.5] {
        let (_, _, b) = bundle(t2, 16, 24);
        // Support truncation at 1e-10 of the peak leaves O(1e-10) moments.
        assert!(b.b0.norm_l2() < 1e-8, "B0 = {:e}", b.b0.norm_l2());
        let got = sym_eigenvalues(b.lcal0.as_ref()).unwrap();
        for (g, w) in got.iter().zip(oracle(t2, 16)) {
            assert!((g - w).abs() < 1e-6 * w.abs().max(1.0), "T2={t2}: {g} vs {w}");
        }
    }
}

#[test]
fn negative_count_follows_anisotropy() {
    let (_, _, b) = bundle(4.5, 16, 24);
    let c = b.count_lcal0().unwrap();
    assert_eq!((c.n_minus, c.dim_ker), (2, 0));
    let (_, _, b) = bundle(2.0, 16, 24);
    let c = b.count_lcal0().unwrap();
    assert_eq!((c.n_minus, c.dim_ker), (0, 2));
}

#[test]
fn a1_is_nonnegative_with_constant_and_nyquist_kernel() {
    let (_, _, b) = bundle(3.0, 16, 24);
    assert!(b.a1_min_eig > -1e-9);
    assert_eq!(b.a1_kernel_dim, 2);
    let ones = vec![1.0; 16];
    let r = vmstab::linalg::matvec(b.a1.as_ref(), &ones);
    assert!(vmstab::linalg::norm2(&r) < 1e-10);
}

#[test]
fn closed_form_adjoint_agrees_with_transpose() {
    let (_, _, b) = bundle(3.0, 16, 24);
    assert!(b.adjoint_formula_defect < 1e-8, "{}", b.adjoint_formula_defect);
}

#[test]
fn lift_reproduces_reduced_form() {
    let (grid, proj, b) = bundle(4.5, 16, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let psi: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = lift_psi(&grid, &b, &proj, &psi).unwrap();
        assert!((l.l_form - l.lcal0_form).abs() < 1e-8 * l.lcal0_form.abs().max(1.0));
    }
}

#[test]
fn asymmetric_operator_is_rejected() {
    let m = faer::Mat::from_fn(3, 3, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
    assert!(matches!(negative_count(&m, CountTolerances::default()), Err(vmstab::Error::Contract(_))));
}

#[test]
fn lift_rejects_wrong_length() {
    let (grid, proj, b) = bundle(3.0, 8, 16);
    assert!(lift_psi(&grid, &b, &proj, &[0.0; 3]).is_err());
}
