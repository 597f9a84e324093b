//! Run configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{ProjectorMethod, ProjectorOptions};
use crate::profiles::ProfileSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "P")]
    pub period: f64,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Nv1")]
    pub nv1: usize,
    #[serde(rename = "Nv2")]
    pub nv2: usize,
    /// Common velocity half-width; per-direction from the profile tail when absent.
    #[serde(default)]
    pub v_max: Option<f64>,
    /// Support mask level relative to max |μ_e|.
    #[serde(default = "d_eps_w")]
    pub eps_w: f64,
    /// Tail level of μ defining the velocity box.
    #[serde(default = "d_eps_supp")]
    pub eps_supp: f64,
    /// Relative amplitude of the ion density modulation.
    #[serde(default)]
    pub ion_modulation: f64,
}

fn d_eps_w() -> f64 {
    1e-10
}
fn d_eps_supp() -> f64 {
    1e-12
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "d_tol_zero")]
    pub tol_zero: f64,
    #[serde(default = "d_tol_spec")]
    pub tol_spec: f64,
    #[serde(default = "d_tol_rank")]
    pub tol_rank: f64,
}

fn d_tol_zero() -> f64 {
    1e-8
}
fn d_tol_spec() -> f64 {
    1e-6
}
fn d_tol_rank() -> f64 {
    1e-10
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { tol_zero: d_tol_zero(), tol_spec: d_tol_spec(), tol_rank: d_tol_rank() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Unstable,
    Center,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Defaults to min(0.01/λ_u, 0.5/ρ(M)).
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_seed")]
    pub seed: SeedKind,
    #[serde(default = "d_rng")]
    pub rng_seed: u64,
    /// Steps between rows of the time series.
    #[serde(default = "d_stride")]
    pub output_stride: usize,
}

fn d_seed() -> SeedKind {
    SeedKind::Unstable
}
fn d_rng() -> u64 {
    1
}
fn d_stride() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    T1,
    T2,
    #[serde(rename = "n0")]
    N0,
    P,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    /// Explicit values; otherwise `steps` points evenly spaced over [start, stop].
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

impl SweepConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(Error::Config("sweep values are empty".into()));
            }
            return Ok(v.clone());
        }
        match (self.start, self.stop, self.steps) {
            (Some(a), Some(b), Some(n)) if n >= 1 => Ok(if n == 1 {
                vec![a]
            } else {
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }),
            _ => Err(Error::Config("sweep needs `values` or `start`, `stop` and `steps` ≥ 1".into())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    pub domain: DomainConfig,
    #[serde(default)]
    pub projector: ProjectorOptions,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: Option<String>,
}

fn pow2(n: usize) -> bool {
    n >= 2 && n.is_power_of_two()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        let bad = |m: String| Err(Error::Validation(m));
        if !(d.period > 0.0 && d.period.is_finite()) {
            return bad(format!("P must be positive, got {}", d.period));
        }
        if !pow2(d.nx) || d.nx < 4 || !pow2(d.nv1) || !pow2(d.nv2) {
            return bad(format!("Nx, Nv1, Nv2 must be powers of two (Nx ≥ 4), got {}, {}, {}", d.nx, d.nv1, d.nv2));
        }
        if let Some(v) = d.v_max {
            if !(v > 0.0) {
                return bad(format!("v_max must be positive, got {v}"));
            }
        }
        if !(d.eps_w > 0.0 && d.eps_w < 1.0) || !(d.eps_supp > 0.0 && d.eps_supp < 1.0) {
            return bad("eps_w and eps_supp must lie in (0, 1)".into());
        }
        if !(d.ion_modulation.abs() < 1.0) {
            return bad(format!("ion_modulation must satisfy |a| < 1, got {}", d.ion_modulation));
        }
        let s = &self.spectral;
        for (name, v) in [("tol_zero", s.tol_zero), ("tol_spec", s.tol_spec), ("tol_rank", s.tol_rank)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let p = &self.projector;
        if !(p.tolerance > 0.0 && p.t_avg > 0.0 && p.dt > 0.0) {
            return bad("projector tolerance, T_avg and dt must be positive".into());
        }
        if let Some(e) = &self.evolution {
            if !(e.t_final > 0.0) || e.dt.is_some_and(|v| !(v > 0.0)) || e.output_stride == 0 {
                return bad("evolution T, dt and output_stride must be positive".into());
            }
        }
        if let Some(sw) = &self.sweep {
            sw.points()?;
        }
        crate::profiles::MuProfile::new(self.profile.clone())?;
        Ok(())
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::report::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Homogeneous equilibria use the exact projector unless the file says otherwise.
    pub fn projector_method(&self) -> ProjectorMethod {
        self.projector.method
    }
}

/// Annotated reference configuration with every default.
pub fn config_reference() -> &'static str {
    r#"# vmstab run configuration. Values shown are defaults where a default exists.

output = "out"                 # report directory (overridden by --out)

[profile]
family = "bi_maxwellian"       # or "sum_of_maxwellians"
n0 = 1.0                       # background density
relativistic = false
decay_alpha = 3.0              # assumed tail exponent, must exceed 2

[[profile.components]]
amplitude = 1.0
T1 = 1.0
T2 = 4.5
p_shift = 0.0                  # drift in the canonical momentum

[domain]
P = 6.283185307179586          # period
Nx = 16                        # power of two, at least 4
Nv1 = 16                       # power of two
Nv2 = 16                       # power of two
# v_max = 8.0                  # common half-width; default per direction from eps_supp
eps_w = 1e-10                  # support mask, relative to max |mu_e|
eps_supp = 1e-12               # tail level defining the velocity box
ion_modulation = 0.0           # relative ion density modulation a in n(1 + a cos kx)

[projector]
method = "fourier_exact_homogeneous"   # or "orbit_average"
T_avg = 1000.0                 # orbit search horizon
dt = 0.05                      # orbit integration step
interp_order = 6
tolerance = 1e-6               # accepted projector defects

[spectral]
tol_zero = 1e-8                # zero eigenvalue threshold, relative to max |lambda|
tol_spec = 1e-6                # |Re lambda| threshold, relative to the generator norm
tol_rank = 1e-10               # range cut, relative to the largest singular value

[evolution]
T = 10.0                       # final time
# dt = 0.005                   # default min(0.01/lambda_u, 0.5/rho(M))
seed = "unstable"              # "unstable", "center" or "random"
rng_seed = 1
output_stride = 1

[sweep]
parameter = "T2"               # "T1", "T2", "n0" or "P"
values = [1.0, 2.0, 3.0, 4.5, 8.0, 12.0]
# start = 1.0
# stop = 12.0
# steps = 12
"#
}
