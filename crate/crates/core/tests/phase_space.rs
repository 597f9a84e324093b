mod common;

use common::{homogeneous, modulated, nodal_grid};
use vmstab::phase_space::chi::{build_chi, chi_report, ChiOptions};
use vmstab::phase_space::characteristics::{integrate_characteristics, invariants_at, Flow};
use vmstab::phase_space::orbits::{classify_orbit, OrbitClass};
use vmstab::phase_space::projector::{build_projector, probe_functions, ProjectorMethod, ProjectorOptions};
use vmstab::Error;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[test]
fn homogeneous_transport_of_sine() {
    let eq = homogeneous(5.0, 16, 16);
    let (grid, tr) = nodal_grid(&eq);
    let h = grid.from_fn(|n| eq.grid.x[n.ix].sin());
    let dh = tr.apply(&h);
    for (k, n) in grid.nodes.iter().enumerate() {
        assert!((dh[k] - n.v1 * eq.grid.x[n.ix].cos()).abs() < 1e-12 * (1.0 + n.v1.abs()));
    }
}

#[test]
fn invariants_are_annihilated_in_the_interior() {
    let eq = modulated(16, 32);
    let (grid, tr) = nodal_grid(&eq);
    let e = grid.from_fn(|n| n.e);
    let p = grid.from_fn(|n| n.p);
    let (de, dp) = (tr.apply(&e), tr.apply(&p));
    let vg = &grid.vg;
    let inner = |i: usize, n: usize| i >= 2 && i + 2 < n;
    for (k, n) in grid.nodes.iter().enumerate() {
        let all_in = inner(n.i1, vg.n1) && inner(n.i2, vg.n2);
        let nbrs = [(-2, 0), (-1, 0), (1, 0), (2, 0), (0, -2), (0, -1), (0, 1), (0, 2)];
        let supported = all_in && nbrs.iter().all(|&(a, b)| {
            grid.node_at(n.ix, (n.i1 as isize + a) as usize, (n.i2 as isize + b) as usize).is_some()
        });
        if all_in && supported {
            assert!(de[k].abs() < 1e-9, "De = {} at {:?}", de[k], n);
            assert!(dp[k].abs() < 1e-9, "Dp = {} at {:?}", dp[k], n);
        }
    }
}

#[test]
fn transport_is_skew_and_flips_parity() {
    let eq = modulated(8, 16);
    let (grid, tr) = nodal_grid(&eq);
    let h = grid.from_fn(|n| (n.v1 * n.v1 + 0.3 * n.v2).cos() * (1.0 + eq.grid.x[n.ix].sin()));
    let g = grid.from_fn(|n| (0.2 * n.v1).sin() * (n.v2 - 0.5 * n.v1 * n.v1).tanh());
    let lhs: f64 = tr.apply(&h).iter().zip(&g).map(|(a, b)| a * b).sum();
    let rhs: f64 = h.iter().zip(tr.apply(&g)).map(|(a, b)| a * b).sum();
    assert!((lhs + rhs).abs() < 1e-10 * l2(&h) * l2(&g), "{lhs} {rhs} {} {}", l2(&h), l2(&g));
    let (ev, od) = grid.parity_split(&h);
    assert!(grid.parity_defect(&tr.apply(&ev), -1.0) < 1e-13);
    assert!(grid.parity_defect(&tr.apply(&od), 1.0) < 1e-13);
    // half-grid blocks reproduce the full operator on parity classes
    let hh = grid.to_half(&ev);
    let full = grid.to_half(&tr.apply(&ev));
    let half = vmstab::linalg::sparse_matvec(&tr.even_to_odd, &hh);
    for (a, b) in full.iter().zip(&half) {
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }
    let err = vmstab::phase_space::transport::apply_transport_with_parity(&tr, &grid, &g, 1.0);
    assert!(matches!(err, Err(Error::Contract(_))));
}

#[test]
fn box_weights_sum_to_box_volume() {
    let eq = homogeneous(1.0, 8, 16);
    let (grid, _) = nodal_grid(&eq);
    let want = eq.period() * 2.0 * grid.vg.vmax1 * 2.0 * grid.vg.vmax2;
    assert!((grid.box_weight() - want).abs() < 1e-12 * want);
    assert!(grid.gram_inv_w().iter().all(|&g| g > 0.0));
    assert!(grid.gram_w().iter().all(|&g| g > 0.0));
}

#[test]
fn homogeneous_characteristics_are_straight_lines() {
    let eq = homogeneous(5.0, 8, 16);
    let tr = integrate_characteristics(&eq, 1.0, (0.7, -0.4), 10.0, 0.05).unwrap();
    let last = tr.t.len() - 1;
    assert!((tr.x[last] - (1.0 + 0.7 * 10.0)).abs() < 1e-12);
    assert_eq!(tr.v1[last], 0.7);
    assert_eq!(tr.v2[last], -0.4);
}

#[test]
fn invariants_are_conserved_along_characteristics() {
    let eq = modulated(16, 16);
    let flow = Flow::new(&eq);
    for &(x0, v1, v2) in &[(0.3, 0.9, -0.2), (2.0, -0.2, 0.6), (4.0, 1.7, 1.1)] {
        let tr = integrate_characteristics(&eq, x0, (v1, v2), 50.0, 0.01).unwrap();
        let (e0, p0) = invariants_at(&eq, &flow, x0, v1, v2);
        for k in 0..tr.t.len() {
            let (e, p) = invariants_at(&eq, &flow, tr.x[k], tr.v1[k], tr.v2[k]);
            assert!((e - e0).abs() <= 1e-8 * e0.abs().max(1e-2));
            assert!((p - p0).abs() <= 1e-8 * p0.abs().max(1e-2));
        }
    }
}

#[test]
fn trapped_bounce_period_matches_harmonic_well() {
    let eq = modulated(16, 16);
    let flow = Flow::new(&eq);
    // potential maximum of φ⁰ is the well bottom of U = −φ⁰ + ½(p + ψ⁰)² at p = −ψ⁰
    let (xm, _) = (0..2000)
        .map(|i| i as f64 * eq.period() / 2000.0)
        .map(|x| (x, flow.potentials(x).0))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let h = 1e-3;
    let u = |x: f64| -flow.potentials(x).0;
    let curvature = (u(xm + h) - 2.0 * u(xm) + u(xm - h)) / (h * h);
    let want = 2.0 * std::f64::consts::PI / curvature.sqrt();
    let psi_m = flow.potentials(xm).1;
    let tr = integrate_characteristics(&eq, xm, (0.01, psi_m), 3.0 * want, 0.01).unwrap();
    // successive upward crossings of v₁ = 0
    let ups: Vec<f64> = (1..tr.t.len()).filter(|&k| tr.v1[k - 1] < 0.0 && tr.v1[k] >= 0.0).map(|k| tr.t[k]).collect();
    assert!(ups.len() >= 2);
    let measured = ups[1] - ups[0];
    assert!((measured - want).abs() < 0.05 * want, "{measured} vs {want}");
}

#[test]
fn step_size_and_blowup_guards() {
    let eq = modulated(16, 16);
    assert!(matches!(integrate_characteristics(&eq, 0.0, (0.1, 0.1), 1.0, -0.1), Err(Error::Validation(_))));
    let far = 20.0 * eq.vgrid.vmax1;
    assert!(matches!(integrate_characteristics(&eq, 0.0, (far, 0.0), 1.0, 0.01), Err(Error::Instability { .. })));
}

#[test]
fn orbit_classes() {
    let eq = homogeneous(1.0, 8, 16);
    assert_eq!(classify_orbit(&eq, 1.0, 0.5, 1.0, 1e-10).unwrap(), OrbitClass::UntrappedPlus);
    assert_eq!(classify_orbit(&eq, 1.0, 0.5, -1.0, 1e-10).unwrap(), OrbitClass::UntrappedMinus);
    assert!(matches!(classify_orbit(&eq, 0.1, 1.0, 1.0, 1e-10), Err(Error::EmptyEnergyShell { .. })));
    assert_eq!(classify_orbit(&eq, 0.125, 0.5, 1.0, 1e-10).unwrap(), OrbitClass::Marginal);

    let eq = modulated(16, 16);
    let p = 0.2;
    let crit = (0..eq.nx())
        .map(|i| 0.5 * (p + eq.psi0[i]).powi(2) - eq.phi0[i])
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(classify_orbit(&eq, crit + 1e-4, p, 1.0, 1e-10).unwrap(), OrbitClass::UntrappedPlus);
    assert_eq!(classify_orbit(&eq, crit - 1e-4, p, 1.0, 1e-10).unwrap(), OrbitClass::Trapped);
}

#[test]
fn exact_projector_averages_in_x() {
    let eq = homogeneous(5.0, 16, 16);
    let (grid, tr) = nodal_grid(&eq);
    let p = build_projector(&eq, &grid, &tr, &ProjectorOptions::default()).unwrap();
    let a = |n: &vmstab::phase_space::Node| (-0.3 * n.v1 * n.v1).exp() + n.v2;
    let h = grid.from_fn(|n| a(n) + n.v1.cos() * eq.grid.x[n.ix].cos());
    let ph = p.apply(&h);
    for (k, n) in grid.nodes.iter().enumerate() {
        assert!((ph[k] - a(n)).abs() < 1e-12);
    }
    let inv = grid.from_fn(|n| (n.e - 0.2 * n.p).sin());
    let back = p.apply(&inv);
    assert!(back.iter().zip(&inv).all(|(a, b)| (a - b).abs() < 1e-6));
    let d = &p.diagnostics;
    assert!(d.idempotence_defect <= 1e-6 && d.adjoint_defect <= 1e-6 && d.kernel_defect <= 1e-6);
}

#[test]
fn orbit_average_agrees_with_exact_projector_when_homogeneous() {
    let eq = homogeneous(5.0, 8, 16);
    let (grid, tr) = nodal_grid(&eq);
    let exact = build_projector(&eq, &grid, &tr, &ProjectorOptions::default()).unwrap();
    let opts = ProjectorOptions { method: ProjectorMethod::OrbitAverage, tolerance: 1e-3, ..Default::default() };
    let orbit = build_projector(&eq, &grid, &tr, &opts).unwrap();
    let w = grid.gram_w();
    for h in probe_functions(&grid, 10, 99) {
        let d: Vec<f64> = exact.apply(&h).iter().zip(orbit.apply(&h)).map(|(a, b)| a - b).collect();
        assert!(grid.norm(&w, &d) <= 1e-4 * grid.norm(&w, &h));
    }
}

#[test]
fn exact_projector_rejects_inhomogeneous_equilibria() {
    let eq = modulated(8, 16);
    let (grid, tr) = nodal_grid(&eq);
    let r = build_projector(&eq, &grid, &tr, &ProjectorOptions::default());
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn chi_on_a_homogeneous_shell() {
    let eq = homogeneous(5.0, 8, 16);
    let (grid, tr) = nodal_grid(&eq);
    let opts = ChiOptions { shell: Some((0.5, 3.0)), ..Default::default() };
    let chi = build_chi(&eq, &grid, &opts).unwrap();
    assert_eq!(grid.parity_defect(&chi, -1.0), 0.0);
    let r = chi_report(&grid, &tr, &chi);
    let w = grid.weight();
    let want: f64 = 2.0
        * grid
            .nodes
            .iter()
            .zip(&chi)
            .filter(|(n, c)| n.v1 > 0.0 && **c != 0.0)
            .map(|(n, _)| w * n.mu_e * n.v1)
            .sum::<f64>();
    assert!(r.mu_e_v1_moment < 0.0);
    assert!((r.mu_e_v1_moment - want).abs() < 1e-14);
    assert!(r.transport_defect <= 1e-6);
    assert!(r.v1_pairing.abs() > 0.0);
    let none = ChiOptions { shell: Some((1e3, 2e3)), ..Default::default() };
    assert!(build_chi(&eq, &grid, &none).is_err());
}

#[test]
fn orbit_projector_is_an_exact_projector_with_amplitude_limited_kernel_defect() {
    use vmstab::equilibrium::{solve_equilibrium, EquilibriumOptions};
    use vmstab::profiles::MuProfile;
    use vmstab::velocity::VelocityGrid;
    let mut defects = Vec::new();
    for amp in [1e-2, 1e-3] {
        let mu = MuProfile::bi_maxwellian(1.0, 0.5, 0.5).unwrap();
        let vg = VelocityGrid::for_profile(&mu, 16, 16, None).unwrap();
        let eopts = EquilibriumOptions { ion_modulation: amp, ..Default::default() };
        let eq = solve_equilibrium(&mu, 2.0 * std::f64::consts::PI, 8, &vg, &eopts).unwrap();
        let (grid, tr) = nodal_grid(&eq);
        let opts = ProjectorOptions { method: ProjectorMethod::OrbitAverage, tolerance: 1.0, ..Default::default() };
        let p = build_projector(&eq, &grid, &tr, &opts).unwrap();
        let d = &p.diagnostics;
        assert!(d.idempotence_defect < 1e-10 && d.adjoint_defect < 1e-10, "{d:?}");
        assert_eq!(d.orbits_without_return, 0);
        defects.push(d.kernel_defect);
    }
    // unresolved trapped layer: the defect falls in proportion to the potential amplitude
    assert!(defects[1] < 0.2 * defects[0], "{defects:?}");
}
