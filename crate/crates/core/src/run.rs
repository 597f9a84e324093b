//! Command orchestration: builds the pipeline from a configuration and writes reports.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SeedKind, SpectralConfig, SweepParameter};
use crate::equilibrium::{solve_equilibrium, Equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::evolution::{self, GrowthReport, Propagator, Seed, Subspace};
use crate::hamiltonian::{
    assemble_vm_triple, kernel_correspondence, restricted_negative_count, schur_margin, spectral_decompose,
    verify_axioms, AxiomReport, DecompositionReport, KernelReport, RestrictedOptions, SchurReport,
    SpectralOptions, VmTriple,
};
use crate::operators::{count_spectrum, CountTolerances, NegativeCount, OperatorBundle};
use crate::phase_space::chi::{build_chi, chi_report, ChiOptions, ChiReport};
use crate::phase_space::projector::t_avg_sensitivity;
use crate::phase_space::{build_projector, KernelProjector, PhaseSpaceGrid, ProjectorDiagnostics, ProjectorMethod, Transport};
use crate::profiles::MuProfile;
use crate::report::{csv, write_atomic, write_json};
use crate::velocity::VelocityGrid;
use crate::xspace::XBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Equilibrium,
    Spectrum,
    Evolve,
    Verify,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub fast_path: bool,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportHeader {
    pub command: &'static str,
    pub config_hash: String,
    pub tolerances: SpectralConfig,
    pub projector_tolerance: f64,
    pub version: &'static str,
}

impl ReportHeader {
    fn new(cfg: &RunConfig, cmd: Command) -> Self {
        ReportHeader {
            command: cmd.name(),
            config_hash: cfg.hash(),
            tolerances: cfg.spectral,
            projector_tolerance: cfg.projector.tolerance,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Everything assembled on the nodal grid.
pub struct Pipeline {
    pub eq: Equilibrium,
    pub grid: PhaseSpaceGrid,
    pub transport: Transport,
    pub proj: KernelProjector,
    pub bundle: OperatorBundle,
    pub vm: VmTriple,
}

pub fn build_equilibrium(cfg: &RunConfig) -> Result<Equilibrium> {
    let d = &cfg.domain;
    let mu = MuProfile::new(cfg.profile.clone())?;
    let vg = match d.v_max {
        Some(v) => VelocityGrid::for_profile(&mu, d.nv1, d.nv2, Some(v))?,
        None => VelocityGrid::for_profile_tail(&mu, d.nv1, d.nv2, d.eps_supp)?,
    };
    let opts = EquilibriumOptions { ion_modulation: d.ion_modulation, ..Default::default() };
    solve_equilibrium(&mu, d.period, d.nx, &vg, &opts)
}

fn count_tol(cfg: &RunConfig) -> CountTolerances {
    CountTolerances { tol_zero_rel: cfg.spectral.tol_zero }
}

pub fn build_pipeline(cfg: &RunConfig) -> Result<Pipeline> {
    let eq = build_equilibrium(cfg)?;
    let grid = PhaseSpaceGrid::new(&eq, XBasis::nodal(&eq.grid), cfg.domain.eps_w)?;
    let transport = Transport::new(&eq, &grid)?;
    let proj = build_projector(&eq, &grid, &transport, &cfg.projector)?;
    let bundle = OperatorBundle::assemble(&grid, &proj, count_tol(cfg))?;
    let vm = assemble_vm_triple(&grid, &transport)?;
    Ok(Pipeline { eq, grid, transport, proj, bundle, vm })
}

fn spectral_opts(cfg: &RunConfig) -> SpectralOptions {
    SpectralOptions { tol_spec_rel: cfg.spectral.tol_spec, ..Default::default() }
}

fn restricted_opts(cfg: &RunConfig) -> RestrictedOptions {
    RestrictedOptions { tol_rank: cfg.spectral.tol_rank, tol_zero_rel: cfg.spectral.tol_zero }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub fast_path: bool,
    #[serde(rename = "L0_spectrum")]
    pub l0_spectrum: Vec<f64>,
    pub n_minus: usize,
    pub dim_ker: usize,
    pub tol_zero: f64,
    pub marginal_flags: Vec<f64>,
    pub a1_kernel_dim: usize,
    pub adjoint_formula_defect: f64,
    pub decomposition: DecompositionReport,
    #[serde(rename = "dim_Eu")]
    pub dim_eu: usize,
    pub lambda_u: Option<f64>,
    /// Largest growth rate.
    pub lambda_max: Option<f64>,
    pub n_minus_restricted: usize,
    pub dim_ker_restricted: usize,
    pub restricted_warnings: Vec<String>,
    #[serde(rename = "n_minus_Lcal0")]
    pub n_minus_lcal0: usize,
    pub counts_consistent: bool,
}

impl SpectrumReport {
    pub fn summary_line(&self) -> String {
        format!(
            "n-(L0)={}, dim Eu={}, n_minus_restricted={}, counts_consistent={}",
            self.n_minus_lcal0, self.dim_eu, self.n_minus_restricted, self.counts_consistent
        )
    }
}

struct SpectrumParts {
    count: NegativeCount,
    a1_kernel_dim: usize,
    adjoint_formula_defect: f64,
    decomposition: DecompositionReport,
    n_minus_restricted: usize,
    dim_ker_restricted: usize,
    warnings: Vec<String>,
}

fn spectrum_nodal(cfg: &RunConfig, p: &Pipeline) -> Result<SpectrumParts> {
    let count = p.bundle.count_lcal0()?;
    let dec = spectral_decompose(&p.vm.triple, spectral_opts(cfg))?;
    let rc = restricted_negative_count(&p.vm.triple, restricted_opts(cfg))?;
    Ok(SpectrumParts {
        count,
        a1_kernel_dim: p.bundle.a1_kernel_dim,
        adjoint_formula_defect: p.bundle.adjoint_formula_defect,
        decomposition: dec.report(),
        n_minus_restricted: rc.n_minus_restricted,
        dim_ker_restricted: rc.dim_ker_restricted,
        warnings: rc.warning.into_iter().collect(),
    })
}

/// Homogeneous shortcut: the whole problem splits over Fourier blocks, so each block is
/// assembled and solved on its own and the counts are summed.
fn spectrum_fast(cfg: &RunConfig) -> Result<SpectrumParts> {
    let eq = build_equilibrium(cfg)?;
    if !eq.is_homogeneous() {
        return Err(Error::Contract("the fast path needs a homogeneous equilibrium".into()));
    }
    if cfg.projector.method != ProjectorMethod::FourierExactHomogeneous {
        return Err(Error::Contract("the fast path uses the exact homogeneous projector".into()));
    }
    let blocks = XBasis::fourier_blocks(&eq.grid);
    let mut spectrum = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut energy = Vec::new();
    let mut parts = SpectrumParts {
        count: count_spectrum(Vec::new(), 0.0),
        a1_kernel_dim: 0,
        adjoint_formula_defect: 0.0,
        decomposition: DecompositionReport {
            eigenvalues: Vec::new(),
            dim_eu: 0,
            dim_es: 0,
            dim_ec: 0,
            lambda_u: None,
            tol_spec: 0.0,
            max_abs_re: 0.0,
            quadruple_defect: 0.0,
            eigvec_residual: 0.0,
            energy_on_hyperbolic: Vec::new(),
        },
        n_minus_restricted: 0,
        dim_ker_restricted: 0,
        warnings: Vec::new(),
    };
    for xb in blocks {
        let mode = match xb.kind {
            crate::xspace::XBasisKind::FourierBlock { mode } => mode,
            _ => unreachable!("fourier_blocks yields block bases"),
        };
        let grid = PhaseSpaceGrid::new(&eq, xb, cfg.domain.eps_w)?;
        let tr = Transport::new(&eq, &grid)?;
        let proj = build_projector(&eq, &grid, &tr, &cfg.projector)?;
        let bundle = OperatorBundle::assemble(&grid, &proj, count_tol(cfg))?;
        let vm = assemble_vm_triple(&grid, &tr)?;
        let dec = spectral_decompose(&vm.triple, spectral_opts(cfg))?.report();
        let rc = restricted_negative_count(&vm.triple, restricted_opts(cfg))?;
        spectrum.extend(bundle.count_lcal0()?.spectrum);
        parts.a1_kernel_dim += bundle.a1_kernel_dim;
        parts.adjoint_formula_defect = parts.adjoint_formula_defect.max(bundle.adjoint_formula_defect);
        let d = &mut parts.decomposition;
        d.dim_eu += dec.dim_eu;
        d.dim_es += dec.dim_es;
        d.dim_ec += dec.dim_ec;
        d.lambda_u = match (d.lambda_u, dec.lambda_u) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        d.tol_spec = d.tol_spec.max(dec.tol_spec);
        d.max_abs_re = d.max_abs_re.max(dec.max_abs_re);
        d.quadruple_defect = d.quadruple_defect.max(dec.quadruple_defect);
        d.eigvec_residual = d.eigvec_residual.max(dec.eigvec_residual);
        eigenvalues.extend(dec.eigenvalues);
        energy.extend(dec.energy_on_hyperbolic);
        parts.n_minus_restricted += rc.n_minus_restricted;
        parts.dim_ker_restricted += rc.dim_ker_restricted;
        parts.warnings.extend(rc.warning.map(|w| format!("mode {mode}: {w}")));
    }
    spectrum.sort_by(f64::total_cmp);
    let scale = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    parts.count = count_spectrum(spectrum, cfg.spectral.tol_zero * scale);
    parts.decomposition.eigenvalues = eigenvalues;
    parts.decomposition.energy_on_hyperbolic = energy;
    Ok(parts)
}

fn assemble_spectrum_report(cfg: &RunConfig, fast: bool, s: SpectrumParts) -> SpectrumReport {
    let d = &s.decomposition;
    let lambda_max = d.eigenvalues.iter().map(|z| z.0).filter(|&r| r > d.tol_spec).reduce(f64::max);
    let n = s.count.n_minus;
    SpectrumReport {
        header: ReportHeader::new(cfg, Command::Spectrum),
        fast_path: fast,
        n_minus: n,
        dim_ker: s.count.dim_ker,
        tol_zero: s.count.tol_zero,
        marginal_flags: s.count.marginal.clone(),
        l0_spectrum: s.count.spectrum,
        a1_kernel_dim: s.a1_kernel_dim,
        adjoint_formula_defect: s.adjoint_formula_defect,
        dim_eu: d.dim_eu,
        lambda_u: d.lambda_u,
        lambda_max,
        n_minus_restricted: s.n_minus_restricted,
        dim_ker_restricted: s.dim_ker_restricted,
        restricted_warnings: s.warnings,
        n_minus_lcal0: n,
        counts_consistent: d.dim_eu == s.n_minus_restricted && s.n_minus_restricted == n && d.dim_es == d.dim_eu,
        decomposition: s.decomposition,
    }
}

pub fn spectrum_report(cfg: &RunConfig, fast_path: bool) -> Result<SpectrumReport> {
    let parts = if fast_path { spectrum_fast(cfg)? } else { spectrum_nodal(cfg, &build_pipeline(cfg)?)? };
    Ok(assemble_spectrum_report(cfg, fast_path, parts))
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub homogeneous: bool,
    pub residual_norm: f64,
    pub iterations: usize,
    pub neutrality_defect: (f64, f64),
    pub profile_hash: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub seed: SeedKind,
    pub dt: f64,
    pub steps: usize,
    pub spectral_radius: f64,
    pub propagator_residual: f64,
    pub neutrality_correction: f64,
    /// max |E(t) − E(0)| / max(|E(0)|, ‖x(0)‖²).
    pub relative_energy_drift: f64,
    pub max_constraint_residual: f64,
    pub growth: Option<GrowthReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub axioms: AxiomReport,
    pub adjoint_block_defect: f64,
    pub constraint_propagation_defect: f64,
    pub projector: ProjectorDiagnostics,
    pub t_avg_sensitivity: Option<f64>,
    pub adjoint_formula_defect: f64,
    pub a1_kernel_dim: usize,
    #[serde(rename = "n_minus_Lcal0")]
    pub n_minus_lcal0: usize,
    pub dim_ker_lcal0: usize,
    pub n_minus_restricted: usize,
    pub dim_ker_restricted: usize,
    #[serde(rename = "dim_Eu")]
    pub dim_eu: usize,
    #[serde(rename = "dim_Es")]
    pub dim_es: usize,
    pub counts_consistent: bool,
    pub max_abs_re: f64,
    pub quadruple_defect: f64,
    pub energy_on_hyperbolic: Vec<f64>,
    pub kernel: Option<KernelReport>,
    pub schur: SchurReport,
    pub chi: Option<ChiReport>,
    pub chi_error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    #[serde(rename = "n_minus_Lcal0")]
    pub n_minus_lcal0: usize,
    #[serde(rename = "dim_Eu")]
    pub dim_eu: usize,
    pub n_minus_restricted: usize,
    pub lambda_u: Option<f64>,
    pub lambda_max: Option<f64>,
    pub counts_consistent: bool,
    pub report: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

/// Error payload written next to the reports when a command fails.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub command: Option<&'static str>,
    pub config_hash: Option<String>,
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

pub fn write_error(out: &Path, cmd: Option<Command>, cfg: Option<&RunConfig>, err: &Error) -> Result<PathBuf> {
    let path = out.join("error.json");
    let rep = ErrorReport {
        command: cmd.map(|c| c.name()),
        config_hash: cfg.map(|c| c.hash()),
        kind: err.kind(),
        exit_code: err.exit_code(),
        message: err.to_string(),
    };
    write_json(&path, &rep)?;
    Ok(path)
}

/// Applies a sweep value to a copy of the configuration.
pub fn with_parameter(cfg: &RunConfig, par: SweepParameter, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match par {
        SweepParameter::T1 => c.profile.components.iter_mut().for_each(|m| m.t1 = value),
        SweepParameter::T2 => c.profile.components.iter_mut().for_each(|m| m.t2 = value),
        SweepParameter::N0 => c.profile.n0 = value,
        SweepParameter::P => c.domain.period = value,
    }
    c.sweep = None;
    c.validate()?;
    Ok(c)
}

pub fn run(cfg: &RunConfig, cmd: Command, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out)?;
    match cmd {
        Command::Equilibrium => run_equilibrium(cfg, opts),
        Command::Spectrum => {
            let rep = spectrum_report(cfg, opts.fast_path)?;
            let path = opts.out.join("spectrum.json");
            write_json(&path, &rep)?;
            let summary = rep.summary_line();
            if !rep.counts_consistent {
                return Err(Error::Consistency(format!("{summary} (report {})", path.display())));
            }
            Ok(RunOutcome { summary, files: vec![path] })
        }
        Command::Evolve => run_evolve(cfg, opts),
        Command::Verify => run_verify(cfg, opts),
        Command::Sweep => run_sweep(cfg, opts),
    }
}

fn run_equilibrium(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let eq = build_equilibrium(cfg)?;
    let data = opts.out.join("equilibrium.txt");
    eq.export(&data)?;
    let rep = EquilibriumReport {
        header: ReportHeader::new(cfg, Command::Equilibrium),
        homogeneous: eq.is_homogeneous(),
        residual_norm: eq.residual_norm,
        iterations: eq.iterations,
        neutrality_defect: eq.neutrality_defect,
        profile_hash: eq.profile.hash(),
    };
    let path = opts.out.join("equilibrium.json");
    write_json(&path, &rep)?;
    let summary = format!("residual={:e}, iterations={}, homogeneous={}", rep.residual_norm, rep.iterations, rep.homogeneous);
    Ok(RunOutcome { summary, files: vec![data, path] })
}

fn run_evolve(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let ev = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| Error::Config("evolve needs an [evolution] section".into()))?;
    let p = build_pipeline(cfg)?;
    let dec = spectral_decompose(&p.vm.triple, spectral_opts(cfg))?;
    let rho = dec.spectral_radius();
    let dt = match ev.dt {
        Some(dt) => dt,
        None => dec.lambda_u.map_or(0.5 / rho, |lu| (0.01 / lu).min(0.5 / rho)),
    };
    let prop = Propagator::for_triple(&p.vm.triple, dt, rho)?;
    let seed = match ev.seed {
        SeedKind::Unstable => {
            let idx = (0..dec.dim_eu())
                .min_by(|&a, &b| dec.unstable[a].total_cmp(&dec.unstable[b]))
                .ok_or_else(|| Error::Validation("unstable seed requested but the spectrum has no unstable part".into()))?;
            Seed::Eigenvector(idx)
        }
        SeedKind::Center => {
            let raw = evolution::init_state(&p.vm, None, &Seed::RandomEvenOdd(ev.rng_seed))?;
            Seed::Custom(dec.project_center(&raw.x))
        }
        SeedKind::Random => Seed::RandomEvenOdd(ev.rng_seed),
    };
    let mut st = evolution::init_state(&p.vm, Some(&dec), &seed)?;
    let x0 = st.x.clone();
    let steps = (ev.t_final / dt).ceil() as usize;
    let first = st.diagnostics[0];
    let mut series = vec![first];
    let all = evolution::run(&p.vm, &prop, &mut st, steps);
    series.extend(all.iter().enumerate().filter(|(i, _)| (i + 1) % ev.output_stride == 0 || i + 1 == steps).map(|(_, s)| *s));
    let e0 = first.energy;
    // Hyperbolic seeds carry zero energy, so drift is measured against the state norm too.
    let escale = e0.abs().max(p.vm.triple.norm2(&x0)).max(f64::MIN_POSITIVE);
    let drift = all.iter().fold(0.0f64, |m, s| m.max((s.energy - e0).abs())) / escale;
    let cmax = all.iter().fold(first.constraint_residual, |m, s| m.max(s.constraint_residual));
    let growth = match ev.seed {
        SeedKind::Unstable => Some(evolution::measure_growth(&p.vm, &dec, &prop, &Subspace::Unstable, ev.t_final)?),
        SeedKind::Center => {
            Some(evolution::measure_growth(&p.vm, &dec, &prop, &Subspace::CenterCustom(st_seed(&seed)), ev.t_final)?)
        }
        SeedKind::Random => None,
    };
    let csv_path = opts.out.join("timeseries.csv");
    write_atomic(&csv_path, evolution::time_series_csv(&series).as_bytes())?;
    let rep = EvolveReport {
        header: ReportHeader::new(cfg, Command::Evolve),
        seed: ev.seed,
        dt,
        steps,
        spectral_radius: rho,
        propagator_residual: prop.residual,
        neutrality_correction: st.neutrality_correction,
        relative_energy_drift: drift,
        max_constraint_residual: cmax,
        growth,
    };
    let path = opts.out.join("growth.json");
    write_json(&path, &rep)?;
    let mut summary = format!("steps={steps}, dt={dt:e}, energy drift={drift:e}, max constraint={cmax:e}");
    if let Some(g) = &rep.growth {
        if let (Some(r), Some(l)) = (g.fitted_rate, g.lambda_u) {
            summary.push_str(&format!(", fitted rate={r:.6}, lambda_u={l:.6}"));
        }
        if let Some(b) = g.center_bound_m {
            summary.push_str(&format!(", center bound={b:.4}"));
        }
    }
    Ok(RunOutcome { summary, files: vec![csv_path, path] })
}

fn st_seed(seed: &Seed) -> Vec<f64> {
    match seed {
        Seed::Custom(v) => v.clone(),
        _ => unreachable!("center seeds are explicit states"),
    }
}

fn run_verify(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let p = build_pipeline(cfg)?;
    let t = &p.vm.triple;
    let axioms = verify_axioms(t, cfg.spectral.tol_zero)?;
    let m = t.generator();
    let dec = spectral_decompose(t, spectral_opts(cfg))?;
    let rc = restricted_negative_count(t, restricted_opts(cfg))?;
    let count = p.bundle.count_lcal0()?;
    let kernel = if count.dim_ker > 0 || rc.dim_ker_restricted > 0 {
        Some(kernel_correspondence(&p.vm, &rc, &p.grid, &p.bundle, &p.proj, 1e-6)?)
    } else {
        None
    };
    let t_avg = match cfg.projector.method {
        ProjectorMethod::OrbitAverage => Some(t_avg_sensitivity(&p.eq, &p.grid, &cfg.projector)?),
        ProjectorMethod::FourierExactHomogeneous => None,
    };
    let (chi, chi_error) = match build_chi(&p.eq, &p.grid, &ChiOptions::default()) {
        Ok(c) => (Some(chi_report(&p.grid, &p.transport, &c)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let counts_consistent = dec.dim_eu() == rc.n_minus_restricted && rc.n_minus_restricted == count.n_minus;
    let rep = VerifyReport {
        header: ReportHeader::new(cfg, Command::Verify),
        axioms,
        adjoint_block_defect: p.vm.adjoint_block_defect,
        constraint_propagation_defect: p.vm.constraint_propagation_defect(&m),
        projector: p.proj.diagnostics.clone(),
        t_avg_sensitivity: t_avg,
        adjoint_formula_defect: p.bundle.adjoint_formula_defect,
        a1_kernel_dim: p.bundle.a1_kernel_dim,
        n_minus_lcal0: count.n_minus,
        dim_ker_lcal0: count.dim_ker,
        n_minus_restricted: rc.n_minus_restricted,
        dim_ker_restricted: rc.dim_ker_restricted,
        dim_eu: dec.dim_eu(),
        dim_es: dec.dim_es(),
        counts_consistent,
        max_abs_re: dec.max_abs_re,
        quadruple_defect: dec.quadruple_defect,
        energy_on_hyperbolic: dec.energy_on_hyperbolic.clone(),
        kernel,
        schur: schur_margin(&p.vm, &p.bundle, 50, 11),
        chi,
        chi_error,
    };
    let path = opts.out.join("verify.json");
    write_json(&path, &rep)?;
    let summary = format!(
        "n-(L0)={}, n_minus_restricted={}, dim Eu={}, counts_consistent={}, schur margin={:e}",
        rep.n_minus_lcal0, rep.n_minus_restricted, rep.dim_eu, counts_consistent, rep.schur.min_margin
    );
    if !counts_consistent {
        return Err(Error::Consistency(summary));
    }
    Ok(RunOutcome { summary, files: vec![path] })
}

fn run_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let points = sw.points()?;
    let configs: Vec<RunConfig> = points.iter().map(|&v| with_parameter(cfg, sw.parameter, v)).collect::<Result<_>>()?;
    let work = || -> Vec<Result<SpectrumReport>> {
        configs.par_iter().map(|c| spectrum_report(c, opts.fast_path)).collect()
    };
    let results = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (i, (v, r)) in points.iter().zip(results).enumerate() {
        let rep = r?;
        let name = format!("spectrum_{i:03}.json");
        let path = opts.out.join(&name);
        write_json(&path, &rep)?;
        files.push(path);
        rows.push(SweepRow {
            parameter: *v,
            n_minus_lcal0: rep.n_minus_lcal0,
            dim_eu: rep.dim_eu,
            n_minus_restricted: rep.n_minus_restricted,
            lambda_u: rep.lambda_u,
            lambda_max: rep.lambda_max,
            counts_consistent: rep.counts_consistent,
            report: name,
        });
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.parameter, r.n_minus_lcal0 as f64, r.lambda_max.unwrap_or(0.0)])
        .collect();
    let csv_path = opts.out.join("sweep.csv");
    write_atomic(&csv_path, csv(&["parameter", "n_minus_Lcal0", "lambda_u"], &table).as_bytes())?;
    let rep = SweepReport { header: ReportHeader::new(cfg, Command::Sweep), parameter: sw.parameter, rows };
    let path = opts.out.join("sweep.json");
    write_json(&path, &rep)?;
    files.push(csv_path);
    files.push(path);
    let mut summary = String::from("parameter  n-(L0)  dim Eu  lambda_u\n");
    for r in &rep.rows {
        summary.push_str(&format!(
            "{:>9.4}  {:>6}  {:>6}  {}\n",
            r.parameter,
            r.n_minus_lcal0,
            r.dim_eu,
            r.lambda_max.map_or("-".into(), |l| format!("{l:.6}"))
        ));
    }
    if let Some(bad) = rep.rows.iter().find(|r| !r.counts_consistent) {
        return Err(Error::Consistency(format!("counts disagree at parameter {}", bad.parameter)));
    }
    Ok(RunOutcome { summary: summary.trim_end().to_string(), files })
}
