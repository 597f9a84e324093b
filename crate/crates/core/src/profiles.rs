//! Steady distribution families μ(e, p) and checks of their structural assumptions.
//!
//! A profile is a function of the particle energy e and the canonical momentum p only,
//! so it is automatically constant along the steady characteristics. Every family
//! here is closed-form, with exact partial derivatives μ_e and μ_p.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    BiMaxwellian,
    SumOfMaxwellians,
}

/// One anisotropic Maxwellian: temperature `t1` across the field direction x,
/// `t2` along v₂, drifting by `p_shift` in p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianComponent {
    pub amplitude: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    #[serde(default)]
    pub p_shift: f64,
}

/// Value of μ together with its exact partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuValue {
    pub mu: f64,
    pub mu_e: f64,
    pub mu_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub family: ProfileFamily,
    pub n0: f64,
    pub components: Vec<MaxwellianComponent>,
    #[serde(default)]
    pub relativistic: bool,
    #[serde(default = "default_decay_alpha")]
    pub decay_alpha: f64,
}

fn default_decay_alpha() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuProfile {
    spec: ProfileSpec,
    norms: Vec<f64>,
}

impl Serialize for MuProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

const TAIL_LOG: f64 = 27.631_021_115_928_547; // ln(1e12)

impl MuProfile {
    /// μ = n₀/(2π√(T₁T₂)) exp(−(e − p²/2)/T₁ − p²/(2T₂)) in the nonrelativistic case.
    pub fn bi_maxwellian(n0: f64, t1: f64, t2: f64) -> Result<Self> {
        Self::new(ProfileSpec {
            family: ProfileFamily::BiMaxwellian,
            n0,
            components: vec![MaxwellianComponent { amplitude: n0, t1, t2, p_shift: 0.0 }],
            relativistic: false,
            decay_alpha: default_decay_alpha(),
        })
    }

    pub fn sum_of_maxwellians(n0: f64, components: Vec<MaxwellianComponent>) -> Result<Self> {
        Self::new(ProfileSpec {
            family: ProfileFamily::SumOfMaxwellians,
            n0,
            components,
            relativistic: false,
            decay_alpha: default_decay_alpha(),
        })
    }

    pub fn relativistic(self, on: bool) -> Result<Self> {
        let mut spec = self.spec;
        spec.relativistic = on;
        Self::new(spec)
    }

    pub fn new(spec: ProfileSpec) -> Result<Self> {
        if !(spec.n0.is_finite() && spec.n0 > 0.0) {
            return Err(Error::Validation(format!("n0 must be positive, got {}", spec.n0)));
        }
        if spec.components.is_empty() {
            return Err(Error::Validation("profile has no Maxwellian components".into()));
        }
        if spec.family == ProfileFamily::BiMaxwellian && spec.components.len() != 1 {
            return Err(Error::Validation("bi_maxwellian takes exactly one component".into()));
        }
        if !(spec.decay_alpha.is_finite() && spec.decay_alpha > 2.0) {
            return Err(Error::Validation(format!(
                "decay exponent must exceed 2, got {}",
                spec.decay_alpha
            )));
        }
        for c in &spec.components {
            if !(c.t1.is_finite() && c.t1 > 0.0) {
                return Err(Error::Validation(format!("T1 must be positive, got {}", c.t1)));
            }
            if !(c.t2.is_finite() && c.t2 > 0.0) {
                return Err(Error::Validation(format!("T2 must be positive, got {}", c.t2)));
            }
            if !(c.amplitude.is_finite() && c.p_shift.is_finite()) {
                return Err(Error::Validation("non-finite component parameter".into()));
            }
        }
        let norms = spec
            .components
            .iter()
            .map(|c| {
                if spec.relativistic {
                    c.amplitude / relativistic_mass(c)
                } else {
                    c.amplitude / (2.0 * PI * (c.t1 * c.t2).sqrt())
                }
            })
            .collect();
        Ok(MuProfile { spec, norms })
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn n0(&self) -> f64 {
        self.spec.n0
    }

    pub fn is_relativistic(&self) -> bool {
        self.spec.relativistic
    }

    pub fn components(&self) -> &[MaxwellianComponent] {
        &self.spec.components
    }

    /// Particle kinetic energy: |v|²/2, or √(1+|v|²) with the relativistic toggle.
    #[inline]
    pub fn kinetic_energy(&self, v1: f64, v2: f64) -> f64 {
        if self.spec.relativistic {
            (1.0 + v1 * v1 + v2 * v2).sqrt()
        } else {
            0.5 * (v1 * v1 + v2 * v2)
        }
    }

    /// Particle velocity for momentum variable v (identity when nonrelativistic).
    #[inline]
    pub fn velocity(&self, v1: f64, v2: f64) -> (f64, f64) {
        if self.spec.relativistic {
            let g = (1.0 + v1 * v1 + v2 * v2).sqrt();
            (v1 / g, v2 / g)
        } else {
            (v1, v2)
        }
    }

    /// Momentum-direction energy at zero cross-field motion: p²/2 or √(1+p²).
    #[inline]
    fn axial_energy(&self, p: f64) -> f64 {
        if self.spec.relativistic {
            (1.0 + p * p).sqrt()
        } else {
            0.5 * p * p
        }
    }

    /// Smallest energy reachable at canonical momentum p (homogeneous fields).
    pub fn energy_floor(&self, p: f64) -> f64 {
        self.axial_energy(p)
    }

    pub fn eval(&self, e: f64, p: f64) -> Result<MuValue> {
        if !e.is_finite() || !p.is_finite() {
            return Err(Error::Domain(format!("eval_mu at e = {e}, p = {p}")));
        }
        Ok(self.eval_unchecked(e, p))
    }

    #[inline]
    pub fn eval_unchecked(&self, e: f64, p: f64) -> MuValue {
        let mut out = MuValue { mu: 0.0, mu_e: 0.0, mu_p: 0.0 };
        let rel = self.spec.relativistic;
        let ax = self.axial_energy(p);
        let dax = if rel { p / (1.0 + p * p).sqrt() } else { p };
        for (c, norm) in self.spec.components.iter().zip(&self.norms) {
            let q = p - c.p_shift;
            let (drift, ddrift) = if rel {
                let r = (1.0 + q * q).sqrt();
                (r - 1.0, q / r)
            } else {
                (0.5 * q * q, q)
            };
            let m = norm * (-(e - ax) / c.t1 - drift / c.t2).exp();
            out.mu += m;
            out.mu_e -= m / c.t1;
            out.mu_p += m * (dax / c.t1 - ddrift / c.t2);
        }
        out
    }

    /// Velocity half-width per direction beyond which every component is below
    /// 1e-12 of its peak.
    pub fn velocity_extent(&self) -> (f64, f64) {
        self.velocity_extent_at(TAIL_LOG)
    }

    /// Half-widths where the tail falls to e^(−tail_log) of the peak.
    pub fn velocity_extent_at(&self, tail_log: f64) -> (f64, f64) {
        let mut w1: f64 = 0.0;
        let mut w2: f64 = 0.0;
        for c in &self.spec.components {
            let (a, b) = if self.spec.relativistic {
                let reach = |t: f64| ((1.0 + tail_log * t).powi(2) - 1.0).sqrt();
                (reach(c.t1), reach(c.t2) + c.p_shift.abs())
            } else {
                ((2.0 * tail_log * c.t1).sqrt(), (2.0 * tail_log * c.t2).sqrt() + c.p_shift.abs())
            };
            w1 = w1.max(a);
            w2 = w2.max(b);
        }
        (w1, w2)
    }

    /// Stable content hash used in exported headers and reports.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(&self.spec).expect("profile serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// ∫ exp(−(γ − √(1+v₂²))/T₁ − (√(1+(v₂−s)²) − 1)/T₂) dv by a fine midpoint rule.
fn relativistic_mass(c: &MaxwellianComponent) -> f64 {
    let reach = |t: f64| ((1.0 + TAIL_LOG * t).powi(2) - 1.0).sqrt();
    let (a, b) = (reach(c.t1), reach(c.t2) + c.p_shift.abs());
    let n = 1200;
    let (h1, h2) = (2.0 * a / n as f64, 2.0 * b / n as f64);
    let mut sum = 0.0;
    for i in 0..n {
        let v1 = -a + (i as f64 + 0.5) * h1;
        for j in 0..n {
            let v2 = -b + (j as f64 + 0.5) * h2;
            let g = (1.0 + v1 * v1 + v2 * v2).sqrt();
            let q = v2 - c.p_shift;
            sum += (-(g - (1.0 + v2 * v2).sqrt()) / c.t1 - ((1.0 + q * q).sqrt() - 1.0) / c.t2).exp();
        }
    }
    sum * h1 * h2
}

/// Sample lattice in the invariants (e, p).
#[derive(Clone, Debug)]
pub struct InvariantLattice {
    pub e: Vec<f64>,
    pub p: Vec<f64>,
}

impl InvariantLattice {
    /// e log-spaced on [0, e_max] (dense near 0, reaching into the tail), p uniform on
    /// [−p_max, p_max].
    pub fn log_spaced(e_max: f64, ne: usize, p_max: f64, np: usize) -> Self {
        let e = (0..ne)
            .map(|i| (1.0 + e_max).powf(i as f64 / (ne.max(2) - 1) as f64) - 1.0)
            .collect();
        let p = (0..np)
            .map(|j| -p_max + 2.0 * p_max * j as f64 / (np.max(2) - 1) as f64)
            .collect();
        InvariantLattice { e, p }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub support_threshold: f64,
    pub min_neg_mu_e: f64,
    pub fitted_tail_exponent: f64,
    pub tail_constant: f64,
    pub checks: Vec<InvariantCheck>,
}

/// Checks μ ≥ 0, μ_e < 0 on the numerical support and the power-law tail bound on a
/// lattice restricted to the physically reachable region e ≥ e_floor(p).
pub fn validate_assumptions(profile: &MuProfile, lattice: &InvariantLattice) -> Result<ValidationReport> {
    if lattice.e.is_empty() || lattice.p.is_empty() {
        return Err(Error::Validation("empty (e, p) lattice".into()));
    }
    let mut samples = Vec::with_capacity(lattice.e.len() * lattice.p.len());
    for &p in &lattice.p {
        let floor = profile.energy_floor(p);
        for &e0 in &lattice.e {
            let e = e0 + floor;
            samples.push((e, p, profile.eval(e, p)?));
        }
    }
    let peak = samples.iter().map(|s| s.2.mu).fold(0.0, f64::max);
    let eps_supp = 1e-12 * peak;

    let mut min_neg_mu_e = f64::INFINITY;
    for &(e, p, m) in &samples {
        if m.mu < -eps_supp {
            return Err(Error::AssumptionViolated { inequality: "mu >= 0", e, p, value: m.mu });
        }
        if m.mu > eps_supp {
            if m.mu_e >= 0.0 {
                return Err(Error::AssumptionViolated {
                    inequality: "mu_e < 0",
                    e,
                    p,
                    value: m.mu_e,
                });
            }
            min_neg_mu_e = min_neg_mu_e.min(-m.mu_e);
        }
    }

    // Tail exponent from the envelope max_p (|μ_e| + |μ_p|) over e ≥ 10 (measured above
    // the energy floor).
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &e0 in lattice.e.iter().filter(|&&e| e >= 10.0) {
        let env = lattice
            .p
            .iter()
            .map(|&p| {
                let m = profile.eval_unchecked(e0 + profile.energy_floor(p), p);
                m.mu_e.abs() + m.mu_p.abs()
            })
            .fold(0.0, f64::max);
        if env > 0.0 {
            xs.push((1.0 + e0).ln());
            ys.push(env.ln());
        }
    }
    let fitted = if xs.len() >= 2 {
        -2.0 * crate::linalg::linear_fit(&xs, &ys).0
    } else {
        f64::INFINITY
    };
    let alpha = profile.spec.decay_alpha;
    let tail_constant = samples
        .iter()
        .map(|(e, _, m)| (m.mu_e.abs() + m.mu_p.abs()) * (1.0 + e.abs()).powf(alpha / 2.0))
        .fold(0.0, f64::max);

    let checks = vec![
        InvariantCheck {
            name: "mu_nonnegative".into(),
            passed: true,
            detail: format!("{} lattice points", samples.len()),
        },
        InvariantCheck {
            name: "mu_e_negative_on_support".into(),
            passed: true,
            detail: format!("min(-mu_e) = {min_neg_mu_e:e} over mu > {eps_supp:e}"),
        },
        InvariantCheck {
            name: "tail_bound".into(),
            passed: fitted > 2.0 && tail_constant.is_finite(),
            detail: format!("fitted alpha = {fitted}, c = {tail_constant:e} at alpha = {alpha}"),
        },
    ];
    if !checks[2].passed {
        return Err(Error::AssumptionViolated {
            inequality: "(|mu_e|+|mu_p|) <= c(1+|e|)^(-alpha/2), alpha > 2",
            e: lattice.e.last().copied().unwrap_or(0.0),
            p: 0.0,
            value: fitted,
        });
    }
    Ok(ValidationReport {
        support_threshold: eps_supp,
        min_neg_mu_e,
        fitted_tail_exponent: fitted,
        tail_constant,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn fd(profile: &MuProfile, e: f64, p: f64, h: f64) -> (f64, f64) {
        let me = (profile.eval_unchecked(e + h, p).mu - profile.eval_unchecked(e - h, p).mu) / (2.0 * h);
        let mp = (profile.eval_unchecked(e, p + h).mu - profile.eval_unchecked(e, p - h).mu) / (2.0 * h);
        (me, mp)
    }

    #[test]
    fn isotropic_origin_values() {
        let mu = MuProfile::bi_maxwellian(1.0, 1.0, 1.0).unwrap();
        let v = mu.eval(0.0, 0.0).unwrap();
        let c = 1.0 / (2.0 * PI);
        assert!((v.mu - c).abs() < 1e-15);
        assert!((v.mu_e + c).abs() < 1e-15);
        assert_eq!(v.mu_p, 0.0);
    }

    #[test]
    fn p_even_families_have_zero_mu_p_on_axis() {
        let mu = MuProfile::sum_of_maxwellians(
            1.0,
            vec![
                MaxwellianComponent { amplitude: 0.7, t1: 1.0, t2: 3.0, p_shift: 0.0 },
                MaxwellianComponent { amplitude: 0.3, t1: 0.5, t2: 0.2, p_shift: 0.0 },
            ],
        )
        .unwrap();
        for e in [0.0, 0.3, 2.0, 11.0] {
            assert_eq!(mu.eval(e, 0.0).unwrap().mu_p, 0.0);
        }
    }

    #[test]
    fn anisotropic_derivatives_match_finite_differences() {
        let mu = MuProfile::bi_maxwellian(1.0, 1.0, 5.0).unwrap();
        let v = mu.eval(1.0, 1.0).unwrap();
        // closed form at (e, p) = (1, 1)
        let c = 1.0 / (2.0 * PI * 5f64.sqrt());
        let want = c * (-(1.0 - 0.5) - 0.1f64).exp();
        assert!((v.mu - want).abs() < 1e-15);
        let (me, mp) = fd(&mu, 1.0, 1.0, 1e-4);
        assert!((v.mu_e - me).abs() <= 1e-6 * v.mu_e.abs());
        assert!((v.mu_p - mp).abs() <= 1e-6 * v.mu_p.abs());
    }

    #[test]
    fn random_samples_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let profiles = [
            MuProfile::bi_maxwellian(1.0, 1.0, 4.5).unwrap(),
            MuProfile::sum_of_maxwellians(
                1.0,
                vec![
                    MaxwellianComponent { amplitude: 0.6, t1: 1.0, t2: 2.0, p_shift: 0.4 },
                    MaxwellianComponent { amplitude: 0.4, t1: 2.0, t2: 0.5, p_shift: -0.6 },
                ],
            )
            .unwrap(),
            MuProfile::bi_maxwellian(1.0, 0.5, 2.0).unwrap().relativistic(true).unwrap(),
        ];
        for mu in &profiles {
            for _ in 0..1000 {
                let p: f64 = rng.gen_range(-3.0..3.0);
                let e = mu.energy_floor(p) + rng.gen_range(0.0..6.0);
                let v = mu.eval(e, p).unwrap();
                let (me, mp) = fd(mu, e, p, 1e-4);
                assert!((v.mu_e - me).abs() <= 1e-6 * (1.0 + v.mu_e.abs()));
                assert!((v.mu_p - mp).abs() <= 1e-6 * (1.0 + v.mu_p.abs()));
            }
        }
    }

    #[test]
    fn relativistic_normalization_gives_unit_density() {
        let mu = MuProfile::bi_maxwellian(1.0, 0.2, 0.4).unwrap().relativistic(true).unwrap();
        let (a, b) = mu.velocity_extent();
        let n = 600;
        let (h1, h2) = (2.0 * a / n as f64, 2.0 * b / n as f64);
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v1 = -a + (i as f64 + 0.5) * h1;
                let v2 = -b + (j as f64 + 0.5) * h2;
                sum += mu.eval_unchecked(mu.kinetic_energy(v1, v2), v2).mu;
            }
        }
        assert!((sum * h1 * h2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters_and_inputs() {
        assert!(matches!(MuProfile::bi_maxwellian(1.0, -1.0, 1.0), Err(Error::Validation(_))));
        assert!(matches!(MuProfile::bi_maxwellian(1.0, 1.0, 0.0), Err(Error::Validation(_))));
        let mu = MuProfile::bi_maxwellian(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(mu.eval(f64::NAN, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn anisotropic_profile_passes_validation() {
        let mu = MuProfile::bi_maxwellian(1.0, 1.0, 5.0).unwrap();
        let lat = InvariantLattice::log_spaced(60.0, 80, 8.0, 41);
        let r = validate_assumptions(&mu, &lat).unwrap();
        assert!(r.min_neg_mu_e > 0.0);
        assert!(r.fitted_tail_exponent > 2.0);
        assert!(r.tail_constant.is_finite());
        assert!(r.checks.iter().all(|c| c.passed));
    }

    #[test]
    fn bump_on_tail_fails_with_witness() {
        let mu = MuProfile::sum_of_maxwellians(
            1.0,
            vec![
                MaxwellianComponent { amplitude: 1.0, t1: 1.0, t2: 1.0, p_shift: 0.0 },
                MaxwellianComponent { amplitude: -0.3, t1: 0.5, t2: 0.5, p_shift: 0.0 },
            ],
        )
        .unwrap();
        let lat = InvariantLattice::log_spaced(30.0, 60, 4.0, 21);
        match validate_assumptions(&mu, &lat) {
            Err(Error::AssumptionViolated { inequality, value, .. }) => {
                assert_eq!(inequality, "mu_e < 0");
                assert!(value >= 0.0);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn empty_lattice_is_rejected() {
        let mu = MuProfile::bi_maxwellian(1.0, 1.0, 1.0).unwrap();
        let lat = InvariantLattice { e: vec![], p: vec![0.0] };
        assert!(matches!(validate_assumptions(&mu, &lat), Err(Error::Validation(_))));
    }
}
