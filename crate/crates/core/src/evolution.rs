//! Time evolution of the linearized system by the implicit midpoint rule.

use std::collections::VecDeque;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{gaussian, HamiltonianTriple, SpectralDecomposition, VmTriple};
use crate::linalg::{dot, linear_fit, matvec, norm2, norm_inf, thin_svd};
use crate::report::csv;

const RING: usize = 4096;

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    pub energy: f64,
    pub constraint_residual: f64,
    pub norm_g: f64,
    #[serde(rename = "norm_E1")]
    pub norm_e1: f64,
    #[serde(rename = "norm_E2")]
    pub norm_e2: f64,
    pub norm_psi_h1: f64,
    /// ∫ψ dx.
    pub psi_mean: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionState {
    /// (g_ev, E₁, ψ, f_od, E₂) in the triple layout.
    pub x: Vec<f64>,
    pub t: f64,
    pub diagnostics: VecDeque<DiagnosticsSample>,
    /// Neutrality defect removed by the constraint projection.
    pub neutrality_correction: f64,
}

#[derive(Clone, Debug)]
pub enum Seed {
    Eigenvector(usize),
    RandomEvenOdd(u64),
    Custom(Vec<f64>),
}

pub fn monitor(vm: &VmTriple, x: &[f64], t: f64) -> DiagnosticsSample {
    let c = vm.norms(x);
    let r = vm.constraint_residual(x);
    let psi = vm.layout.psi(x);
    DiagnosticsSample {
        t,
        energy: vm.triple.energy(x),
        constraint_residual: (vm.wx * dot(&r, &r)).sqrt(),
        norm_g: c.norm_g.hypot(c.norm_f),
        norm_e1: c.norm_e1,
        norm_e2: c.norm_e2,
        norm_psi_h1: c.norm_psi_h1,
        psi_mean: vm.wx * psi.iter().sum::<f64>(),
    }
}

/// Removes the constraint residual: the part outside the range of ∂ₓ through g, the rest through E₁.
pub fn project_constraint(vm: &VmTriple, x: &mut [f64]) -> Result<f64> {
    let l = vm.layout;
    let n = l.n;
    let r = vm.constraint_residual(x);
    let svd = thin_svd(vm.dx.as_ref())?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..svd.s.len()).filter(|&i| svd.s[i] > 1e-10 * smax).collect();
    // Component of r in range(∂ₓ) and its preimage.
    let mut r_range = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for &q in &keep {
        let c: f64 = (0..n).map(|i| svd.u[(i, q)] * r[i]).sum();
        for i in 0..n {
            r_range[i] += c * svd.u[(i, q)];
            delta[i] -= c / svd.s[q] * svd.v[(i, q)];
        }
    }
    let r_perp: Vec<f64> = r.iter().zip(&r_range).map(|(a, b)| a - b).collect();
    let defect = (vm.wx * dot(&r_perp, &r_perp)).sqrt();
    let mut dens = vec![0.0; n];
    for (j, &ix) in vm.half_ix.iter().enumerate() {
        dens[ix] += vm.w2 / vm.wx * vm.abs_mu_e[j];
    }
    for (j, &ix) in vm.half_ix.iter().enumerate() {
        if dens[ix] > 0.0 {
            x[j] -= r_perp[ix] * vm.abs_mu_e[j] / dens[ix];
        }
    }
    for i in 0..n {
        x[l.nh + i] += delta[i];
    }
    Ok(defect)
}

pub fn init_state(vm: &VmTriple, dec: Option<&SpectralDecomposition>, seed: &Seed) -> Result<EvolutionState> {
    let l = vm.layout;
    let dim = l.dim();
    let mut x = match seed {
        Seed::Eigenvector(i) => {
            let dec = dec.ok_or_else(|| Error::Validation("eigenvector seed needs a spectral decomposition".into()))?;
            if *i >= dec.dim_eu() {
                return Err(Error::Validation(format!("eigenvector index {i} out of range ({} unstable)", dec.dim_eu())));
            }
            dec.unstable_vector(*i)
        }
        Seed::RandomEvenOdd(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            let mut x: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
            let off = l.dim_x();
            for j in 0..l.nh {
                x[j] *= vm.abs_mu_e[j].sqrt();
                x[off + j] *= vm.abs_mu_e[j].sqrt();
            }
            x
        }
        Seed::Custom(v) => {
            if v.len() != dim {
                return Err(Error::Validation(format!("custom seed has {} entries, expected {dim}", v.len())));
            }
            v.clone()
        }
    };
    let z = vm.z_norm(&x);
    let defect = project_constraint(vm, &mut x)?;
    if z > 0.0 && defect > 0.1 * z {
        return Err(Error::Validation(format!("seed neutrality defect {defect:e} exceeds 10% of its norm {z:e}")));
    }
    let mut st = EvolutionState { x, t: 0.0, diagnostics: VecDeque::new(), neutrality_correction: defect };
    st.diagnostics.push_back(monitor(vm, &st.x, 0.0));
    Ok(st)
}

/// Dense implicit-midpoint propagator (I − h/2 M)⁻¹(I + h/2 M).
#[derive(Clone, Debug)]
pub struct Propagator {
    pub dt: f64,
    pub p: Mat<f64>,
    /// Solve residual of the propagator construction, relative.
    pub residual: f64,
}

impl Propagator {
    pub fn new(m: &Mat<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Validation("dt must be positive".into()));
        }
        let radius = crate::linalg::general_eigenvalues(m.as_ref()).ok().map(|ev| ev.iter().fold(0.0f64, |a, z| a.max(z.0.hypot(z.1))));
        Self::with_radius(m, dt, radius.unwrap_or_else(|| norm_inf(m.as_ref())))
    }

    /// Same as `new` with a known spectral radius estimate.
    pub fn with_radius(m: &Mat<f64>, dt: f64, radius: f64) -> Result<Self> {
        Self::scaled(m, dt, radius, None)
    }

    /// Propagator for a triple, solved in coordinates where the energy form has unit diagonal.
    /// Plain pivoting leaks round-off into the heavily weighted tail rows of the energy.
    pub fn for_triple(t: &HamiltonianTriple, dt: f64, radius: f64) -> Result<Self> {
        let h: Vec<f64> = (0..t.l_form.nrows())
            .map(|i| t.l_form[(i, i)])
            .chain((0..t.a_form.nrows()).map(|i| t.a_form[(i, i)]))
            .collect();
        let top = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d: Vec<f64> = h.iter().map(|v| 1.0 / v.abs().max(1e-14 * top).sqrt()).collect();
        Self::scaled(&t.generator(), dt, radius, Some(&d))
    }

    /// Cayley map of M computed as D·Cay(D⁻¹MD)·D⁻¹ for the diagonal scaling d.
    fn scaled(m: &Mat<f64>, dt: f64, radius: f64, d: Option<&[f64]>) -> Result<Self> {
        if dt * radius > 0.5 {
            return Err(Error::Validation(format!("dt·ρ(M) = {:.3} exceeds 0.5", dt * radius)));
        }
        let n = m.nrows();
        let h = 0.5 * dt;
        let s = |i: usize| d.map_or(1.0, |d| d[i]);
        let lhs = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - h * m[(i, j)] * s(j) / s(i));
        let rhs = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + h * m[(i, j)] * s(j) / s(i));
        let pz = crate::linalg::solve(lhs.as_ref(), rhs.as_ref());
        let residual = (&lhs * &pz - &rhs).norm_l2() / rhs.norm_l2();
        if !(residual < 1e-10) {
            return Err(Error::Numerical(format!("propagator solve residual {residual:e}")));
        }
        let p = Mat::from_fn(n, n, |i, j| pz[(i, j)] * s(i) / s(j));
        Ok(Propagator { dt, p, residual })
    }
}

pub fn step(vm: &VmTriple, prop: &Propagator, st: &mut EvolutionState) {
    st.x = matvec(prop.p.as_ref(), &st.x);
    st.t += prop.dt;
    if st.diagnostics.len() == RING {
        st.diagnostics.pop_front();
    }
    st.diagnostics.push_back(monitor(vm, &st.x, st.t));
}

pub fn run(vm: &VmTriple, prop: &Propagator, st: &mut EvolutionState, steps: usize) -> Vec<DiagnosticsSample> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(monitor(vm, &st.x, st.t));
    for _ in 0..steps {
        step(vm, prop, st);
        out.push(*st.diagnostics.back().expect("sample pushed by step"));
    }
    out
}

pub fn time_series_csv(samples: &[DiagnosticsSample]) -> String {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| vec![s.t, s.energy, s.constraint_residual, s.norm_g, s.norm_e1, s.norm_e2, s.norm_psi_h1])
        .collect();
    csv(&["t", "energy", "constraint_residual", "norm_g", "norm_E1", "norm_E2", "norm_psi_H1"], &rows)
}

#[derive(Clone, Debug)]
pub enum Subspace {
    Unstable,
    /// Random state projected onto the center space.
    Center(u64),
    /// Caller-supplied state, projected onto the center space.
    CenterCustom(Vec<f64>),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GrowthReport {
    pub fitted_rate: Option<f64>,
    pub lambda_u: Option<f64>,
    pub relative_rate_error: Option<f64>,
    /// max ‖x(t)‖/‖x(0)‖ over the samples.
    pub center_bound_m: Option<f64>,
    /// max ‖x(t)‖/(‖x(0)‖(1 + t²)).
    pub quadratic_constant: Option<f64>,
    /// Slope of ln ratio against ln t over the last decade of t.
    pub late_power: Option<f64>,
    /// Slope of the ratio against log₁₀ t over the last decade, divided by the mean ratio there.
    pub late_trend: Option<f64>,
    pub quadratic_bound_ok: Option<bool>,
    pub projection_defect: f64,
    pub samples: Vec<(f64, f64)>,
}

/// P^m x by binary powers of P.
struct PowerCache {
    powers: Vec<Mat<f64>>,
}

impl PowerCache {
    fn new(p: &Mat<f64>, max_steps: u64) -> Self {
        let mut powers = vec![p.clone()];
        let mut k = 1u64;
        while 2 * k <= max_steps {
            let last = powers.last().expect("nonempty");
            powers.push(last * last);
            k *= 2;
        }
        PowerCache { powers }
    }

    fn apply(&self, x: &[f64], mut m: u64) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut j = 0;
        while m > 0 {
            if m & 1 == 1 {
                y = matvec(self.powers[j].as_ref(), &y);
            }
            m >>= 1;
            j += 1;
        }
        y
    }
}

pub fn measure_growth(
    vm: &VmTriple,
    dec: &SpectralDecomposition,
    prop: &Propagator,
    subspace: &Subspace,
    t_final: f64,
) -> Result<GrowthReport> {
    let dt = prop.dt;
    let steps = (t_final / dt).round().max(1.0) as u64;
    match subspace {
        Subspace::Unstable => {
            let lu = dec.lambda_u.ok_or_else(|| Error::Validation("no unstable eigenvalue to measure".into()))?;
            let idx = (0..dec.dim_eu())
                .min_by(|&a, &b| dec.unstable[a].total_cmp(&dec.unstable[b]))
                .expect("nonempty unstable set");
            let st = init_state(vm, Some(dec), &Seed::Eigenvector(idx))?;
            let m = vm.triple.generator();
            let mx = matvec(m.as_ref(), &st.x);
            let lam = dec.unstable[idx];
            let res: Vec<f64> = mx.iter().zip(&st.x).map(|(a, b)| a - lam * b).collect();
            let projection_defect = norm2(&res) / (dec.norm_m * norm2(&st.x));
            if projection_defect > 1e-6 {
                return Err(Error::Numerical(format!("unstable seed off its eigenspace by {projection_defect:e}")));
            }
            let mut x = st.x.clone();
            let z0 = vm.z_norm(&x);
            let (mut ts, mut ls) = (vec![0.0], vec![0.0]);
            let mut samples = vec![(0.0, 1.0)];
            for k in 1..=steps {
                x = matvec(prop.p.as_ref(), &x);
                let r = vm.z_norm(&x) / z0;
                ts.push(k as f64 * dt);
                ls.push(r.ln());
                samples.push((k as f64 * dt, r));
            }
            let (rate, _) = linear_fit(&ts, &ls);
            Ok(GrowthReport {
                fitted_rate: Some(rate),
                lambda_u: Some(lu),
                relative_rate_error: Some((rate - lu).abs() / lu),
                projection_defect,
                samples,
                ..Default::default()
            })
        }
        Subspace::Center(_) | Subspace::CenterCustom(_) => {
            let raw = match subspace {
                Subspace::Center(s) => init_state(vm, None, &Seed::RandomEvenOdd(*s))?.x,
                Subspace::CenterCustom(v) => v.clone(),
                Subspace::Unstable => unreachable!(),
            };
            let x0 = dec.project_center(&raw);
            let z0 = vm.z_norm(&x0);
            if z0 == 0.0 {
                return Err(Error::Validation("center seed vanishes after projection".into()));
            }
            let projection_defect = center_defect(vm, dec, &x0);
            if projection_defect > 1e-6 {
                return Err(Error::Numerical(format!("center projection defect {projection_defect:e}")));
            }
            let cache = PowerCache::new(&prop.p, steps);
            let mut ms: Vec<u64> = (0..=60)
                .map(|i| (steps as f64).powf(i as f64 / 60.0).round() as u64)
                .collect();
            ms.dedup();
            let mut samples = vec![(0.0, 1.0)];
            for &m in &ms {
                let y = cache.apply(&x0, m);
                samples.push((m as f64 * dt, vm.z_norm(&y) / z0));
            }
            let center_bound_m = samples.iter().map(|s| s.1).fold(0.0, f64::max);
            let quadratic_constant = samples.iter().map(|s| s.1 / (1.0 + s.0 * s.0)).fold(0.0, f64::max);
            let late: Vec<&(f64, f64)> = samples.iter().filter(|s| s.0 >= t_final / 10.0).collect();
            let lt: Vec<f64> = late.iter().map(|s| s.0.ln()).collect();
            let lr: Vec<f64> = late.iter().map(|s| s.1.ln()).collect();
            let (late_power, _) = linear_fit(&lt, &lr);
            let l10: Vec<f64> = late.iter().map(|s| s.0.log10()).collect();
            let rr: Vec<f64> = late.iter().map(|s| s.1).collect();
            let mean = rr.iter().sum::<f64>() / rr.len() as f64;
            let (slope, _) = linear_fit(&l10, &rr);
            Ok(GrowthReport {
                lambda_u: dec.lambda_u,
                center_bound_m: Some(center_bound_m),
                quadratic_constant: Some(quadratic_constant),
                late_power: Some(late_power),
                late_trend: Some(slope / mean),
                quadratic_bound_ok: Some(late_power <= 2.0 + 0.1),
                projection_defect,
                samples,
                ..Default::default()
            })
        }
    }
}

/// Largest |energy pairing| of x with the hyperbolic eigenvectors, relative.
fn center_defect(vm: &VmTriple, dec: &SpectralDecomposition, x: &[f64]) -> f64 {
    let t = &vm.triple;
    let nx = t.norm2(x).sqrt();
    let mut worst: f64 = 0.0;
    for basis in [&dec.basis_u, &dec.basis_s] {
        for j in 0..basis.ncols() {
            let v: Vec<f64> = basis.col(j).iter().copied().collect();
            let (a, b) = t.split(&v);
            let (p, q) = t.split(x);
            let pair = dot(p, &matvec(t.l_form.as_ref(), a)) + dot(q, &matvec(t.a_form.as_ref(), b));
            worst = worst.max(pair.abs() / (nx * t.norm2(&v).sqrt()));
        }
    }
    worst
}


/// v with BAv = u in the least-squares sense; (0, v) is the Jordan partner of a stationary (u, 0).
pub fn kernel_partner(vm: &VmTriple, u: &[f64]) -> Result<Vec<f64>> {
    let t = &vm.triple;
    let ba = &t.b * &t.a_form;
    let svd = thin_svd(ba.as_ref())?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let mut v = vec![0.0; t.dim_y()];
    for q in 0..svd.s.len() {
        if svd.s[q] <= 1e-10 * smax {
            continue;
        }
        let c: f64 = (0..t.dim_x()).map(|i| svd.u[(i, q)] * u[i]).sum::<f64>() / svd.s[q];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += c * svd.v[(i, q)];
        }
    }
    let mut x = vec![0.0; t.dim_x()];
    x.extend(v);
    Ok(x)
}
