use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::xspace::TrigInterpolant;

/// Steady force field along characteristics: Ẋ = v̂₁, V̇₁ = φ⁰′ − v̂₂ψ⁰′, V̇₂ = v̂₁ψ⁰′,
/// with φ⁰′ and ψ⁰′ the exact derivatives of the trigonometric interpolants.
#[derive(Clone, Debug)]
pub struct Flow {
    phi: TrigInterpolant,
    psi: TrigInterpolant,
    relativistic: bool,
    pub max_b: f64,
    pub v_limit: f64,
}

impl Flow {
    pub fn new(eq: &Equilibrium) -> Self {
        let max_b = eq.b0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Flow {
            phi: eq.phi_interpolant(),
            psi: eq.psi_interpolant(),
            relativistic: eq.profile.is_relativistic(),
            max_b,
            v_limit: 10.0 * eq.vgrid.vmax1.max(eq.vgrid.vmax2),
        }
    }

    #[inline]
    fn rhs(&self, s: [f64; 3]) -> [f64; 3] {
        let [x, v1, v2] = s;
        let (vh1, vh2) = if self.relativistic {
            let g = (1.0 + v1 * v1 + v2 * v2).sqrt();
            (v1 / g, v2 / g)
        } else {
            (v1, v2)
        };
        let dphi = self.phi.derivative(x);
        let dpsi = self.psi.derivative(x);
        [vh1, dphi - vh2 * dpsi, vh1 * dpsi]
    }

    #[inline]
    pub fn rk4(&self, s: [f64; 3], dt: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = self.rhs(s);
        let k2 = self.rhs(add(s, k1, 0.5 * dt));
        let k3 = self.rhs(add(s, k2, 0.5 * dt));
        let k4 = self.rhs(add(s, k3, dt));
        [
            s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            s[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        if dt * self.max_b > 0.1 {
            return Err(Error::Validation(format!(
                "dt = {dt} does not resolve the gyration: dt*max|B0| = {} > 0.1",
                dt * self.max_b
            )));
        }
        Ok(())
    }

    pub fn guard(&self, s: [f64; 3], t: f64, dt: f64) -> Result<()> {
        if !(s[1].is_finite() && s[2].is_finite()) || s[1].hypot(s[2]) > self.v_limit {
            return Err(Error::Instability { t, dt });
        }
        Ok(())
    }

    pub fn potentials(&self, x: f64) -> (f64, f64) {
        (self.phi.eval(x), self.psi.eval(x))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

/// Classical RK4 from (x₀, v₀) over [0, T] with step dt; x is not wrapped.
pub fn integrate_characteristics(eq: &Equilibrium, x0: f64, v0: (f64, f64), t_end: f64, dt: f64) -> Result<Trajectory> {
    let flow = Flow::new(eq);
    flow.check_step(dt)?;
    if !(t_end >= 0.0 && t_end.is_finite() && x0.is_finite() && v0.0.is_finite() && v0.1.is_finite()) {
        return Err(Error::Validation("non-finite trajectory input".into()));
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let mut tr = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v1: Vec::with_capacity(steps + 1),
        v2: Vec::with_capacity(steps + 1),
    };
    let mut s = [x0, v0.0, v0.1];
    for k in 0..=steps {
        tr.t.push(k as f64 * h);
        tr.x.push(s[0]);
        tr.v1.push(s[1]);
        tr.v2.push(s[2]);
        if k < steps {
            s = flow.rk4(s, h);
            flow.guard(s, (k + 1) as f64 * h, h)?;
        }
    }
    Ok(tr)
}

/// Energy and canonical momentum at an arbitrary phase point.
pub fn invariants_at(eq: &Equilibrium, flow: &Flow, x: f64, v1: f64, v2: f64) -> (f64, f64) {
    let (phi, psi) = flow.potentials(x);
    (eq.profile.kinetic_energy(v1, v2) - phi, v2 - psi)
}
