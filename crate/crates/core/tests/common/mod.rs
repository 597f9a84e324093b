#![allow(dead_code)]

use std::f64::consts::PI;

use vmstab::equilibrium::{solve_equilibrium, Equilibrium, EquilibriumOptions};
use vmstab::phase_space::{PhaseSpaceGrid, Transport};
use vmstab::profiles::MuProfile;
use vmstab::velocity::VelocityGrid;
use vmstab::xspace::XBasis;

pub fn homogeneous(t2: f64, nx: usize, nv: usize) -> Equilibrium {
    let mu = MuProfile::bi_maxwellian(1.0, 1.0, t2).unwrap();
    let vg = VelocityGrid::for_profile(&mu, nv, nv, None).unwrap();
    solve_equilibrium(&mu, 2.0 * PI, nx, &vg, &EquilibriumOptions::default()).unwrap()
}

/// Small-amplitude equilibrium driven by a 5% ion-density modulation.
pub fn modulated(nx: usize, nv: usize) -> Equilibrium {
    let mu = MuProfile::bi_maxwellian(1.0, 0.5, 0.5).unwrap();
    let vg = VelocityGrid::for_profile(&mu, nv, nv, None).unwrap();
    let opts = EquilibriumOptions { ion_modulation: 0.05, ..Default::default() };
    solve_equilibrium(&mu, 2.0 * PI, nx, &vg, &opts).unwrap()
}

pub fn nodal_grid(eq: &Equilibrium) -> (PhaseSpaceGrid, Transport) {
    let grid = PhaseSpaceGrid::new(eq, XBasis::nodal(&eq.grid), 1e-10).unwrap();
    let tr = Transport::new(eq, &grid).unwrap();
    (grid, tr)
}
