//! Separable Hamiltonian systems u̇ = BAv, v̇ = −B′Lu in finite dimensions.
//!
//! Forms are stored as Gram-type matrices: ⟨Lu, u⟩ = uᵀ L u, ⟨Av, v⟩ = vᵀ A v. B maps
//! coefficient covectors of Y to vectors of X, so B′ is the plain transpose and the
//! generator reads M = [[0, BA], [−BᵀL, 0]].

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, cholesky, congruence_inverse, dot, gen_sym_eigen, lower_transpose_solve, matvec, norm_inf, orthonormalize,
    sym_eigen, thin_svd,
};
use crate::operators::{count_spectrum, NegativeCount};

/// Standard normal sample.
pub fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

#[derive(Clone, Debug)]
pub struct HamiltonianTriple {
    pub l_form: Mat<f64>,
    pub a_form: Mat<f64>,
    pub b: Mat<f64>,
    pub gram_x: Mat<f64>,
    pub gram_y: Mat<f64>,
    /// Positive column scaling of B used only to condition the range factorization.
    pub range_scaling: Option<Vec<f64>>,
}

impl HamiltonianTriple {
    pub fn new(l_form: Mat<f64>, a_form: Mat<f64>, b: Mat<f64>, gram_x: Mat<f64>, gram_y: Mat<f64>) -> Result<Self> {
        let (nx, ny) = (l_form.nrows(), a_form.nrows());
        let square = |m: &Mat<f64>, n: usize| m.nrows() == n && m.ncols() == n;
        if !square(&l_form, nx) || !square(&gram_x, nx) || !square(&a_form, ny) || !square(&gram_y, ny) {
            return Err(Error::Assembly("forms and Gram matrices must be square and conforming".into()));
        }
        if b.nrows() != nx || b.ncols() != ny {
            return Err(Error::Assembly(format!("B is {}x{}, expected {nx}x{ny}", b.nrows(), b.ncols())));
        }
        Ok(HamiltonianTriple { l_form, a_form, b, gram_x, gram_y, range_scaling: None })
    }

    pub fn dim_x(&self) -> usize {
        self.l_form.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.a_form.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dim_x() + self.dim_y()
    }

    /// Blocks BA and −BᵀL of the generator.
    pub fn generator_blocks(&self) -> (Mat<f64>, Mat<f64>) {
        let ba = &self.b * &self.a_form;
        let btl = -(self.b.transpose() * &self.l_form);
        (ba, btl)
    }

    pub fn generator(&self) -> Mat<f64> {
        let (ba, mbtl) = self.generator_blocks();
        let (nx, n) = (self.dim_x(), self.dim());
        let mut m = Mat::zeros(n, n);
        for j in 0..ba.ncols() {
            for i in 0..nx {
                m[(i, nx + j)] = ba[(i, j)];
            }
        }
        for j in 0..nx {
            for i in 0..mbtl.nrows() {
                m[(nx + i, j)] = mbtl[(i, j)];
            }
        }
        m
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.dim_x())
    }

    /// ⟨Lu, u⟩ + ⟨Av, v⟩.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let (u, v) = self.split(x);
        dot(u, &matvec(self.l_form.as_ref(), u)) + dot(v, &matvec(self.a_form.as_ref(), v))
    }

    /// Squared norm of X × Y.
    pub fn norm2(&self, x: &[f64]) -> f64 {
        let (u, v) = self.split(x);
        dot(u, &matvec(self.gram_x.as_ref(), u)) + dot(v, &matvec(self.gram_y.as_ref(), v))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    /// min ⟨Av, v⟩/‖v‖².
    pub delta: f64,
    pub l_asymmetry: f64,
    pub a_asymmetry: f64,
    pub n_minus_l: usize,
    pub dim_ker_l: usize,
    /// Smallest positive eigenvalue of L relative to the X Gram.
    pub coercivity_x_plus: f64,
    pub b_double_dual_defect: f64,
    /// ‖MᵀH + HM‖/‖HM‖ for the energy Gram H = diag(L, A).
    pub energy_identity_defect: f64,
}

pub fn verify_axioms(t: &HamiltonianTriple, tol_zero_rel: f64) -> Result<AxiomReport> {
    let l_asymmetry = asymmetry(t.l_form.as_ref());
    let a_asymmetry = asymmetry(t.a_form.as_ref());
    if l_asymmetry > 1e-10 || a_asymmetry > 1e-10 {
        return Err(Error::Axiom {
            axiom: "G1".into(),
            detail: format!("forms not symmetric: L {l_asymmetry:e}, A {a_asymmetry:e}"),
        });
    }
    let (a_eig, _) = gen_sym_eigen(t.a_form.as_ref(), t.gram_y.as_ref())?;
    let delta = a_eig.first().copied().unwrap_or(f64::INFINITY);
    if !(delta > 0.0) {
        return Err(Error::Axiom { axiom: "G2".into(), detail: format!("A not coercive: delta = {delta:e}") });
    }
    let (l_eig, _) = gen_sym_eigen(t.l_form.as_ref(), t.gram_x.as_ref())?;
    let scale = l_eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = count_spectrum(l_eig, tol_zero_rel * scale);
    let coercivity_x_plus = c.spectrum.iter().copied().find(|&v| v > c.tol_zero).unwrap_or(f64::INFINITY);
    let bt = t.b.transpose().to_owned();
    let b_double_dual_defect = (bt.transpose() - &t.b).norm_l2();
    let (ba, mbtl) = t.generator_blocks();
    let hm = &t.l_form * &ba;
    // Top-right block of MᵀH + HM; the bottom-left block is its transpose.
    let mth = mbtl.transpose() * &t.a_form;
    let den = hm.norm_l2();
    let energy_identity_defect = if den > 0.0 { (&hm + &mth).norm_l2() / den } else { 0.0 };
    Ok(AxiomReport {
        delta,
        l_asymmetry,
        a_asymmetry,
        n_minus_l: c.n_minus,
        dim_ker_l: c.dim_ker,
        coercivity_x_plus,
        b_double_dual_defect,
        energy_identity_defect,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralOptions {
    /// Re λ threshold relative to ‖M‖∞.
    pub tol_spec_rel: f64,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol_spec_rel: 1e-6, seed: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<(f64, f64)>,
    pub tol_spec: f64,
    pub norm_m: f64,
    /// Eigenvalues with Re λ > tol_spec, and a real basis of their eigenvectors.
    pub unstable: Vec<f64>,
    pub basis_u: Mat<f64>,
    pub stable: Vec<f64>,
    pub basis_s: Mat<f64>,
    pub dim_ec: usize,
    pub lambda_u: Option<f64>,
    pub max_abs_re: f64,
    /// Largest distance from λ to the nearest of −λ and λ̄ over |λ| > tol_spec, relative to max(1, |λ|).
    pub quadruple_defect: f64,
    /// ‖MV − VT‖/‖M‖ over the hyperbolic eigenbases.
    pub eigvec_residual: f64,
    /// |⟨Lu,u⟩ + ⟨Av,v⟩|/‖x‖² on each basis vector of Eᵘ then Eˢ.
    pub energy_on_hyperbolic: Vec<f64>,
    hyp: Mat<f64>,
    hyp_h: Mat<f64>,
    pairing_inv: Mat<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub eigenvalues: Vec<(f64, f64)>,
    #[serde(rename = "dim_Eu")]
    pub dim_eu: usize,
    #[serde(rename = "dim_Es")]
    pub dim_es: usize,
    #[serde(rename = "dim_Ec")]
    pub dim_ec: usize,
    pub lambda_u: Option<f64>,
    pub tol_spec: f64,
    pub max_abs_re: f64,
    pub quadruple_defect: f64,
    pub eigvec_residual: f64,
    pub energy_on_hyperbolic: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim_eu(&self) -> usize {
        self.unstable.len()
    }

    pub fn dim_es(&self) -> usize {
        self.stable.len()
    }

    /// Projection onto Eᶜ along Eᵘ ⊕ Eˢ, orthogonal in the energy form.
    pub fn project_center(&self, x: &[f64]) -> Vec<f64> {
        if self.hyp.ncols() == 0 {
            return x.to_vec();
        }
        let c = matvec(self.hyp_h.transpose(), x);
        let y = matvec(self.pairing_inv.as_ref(), &c);
        let corr = matvec(self.hyp.as_ref(), &y);
        x.iter().zip(&corr).map(|(a, b)| a - b).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, z| a.max(z.0.hypot(z.1)))
    }

    pub fn unstable_vector(&self, j: usize) -> Vec<f64> {
        self.basis_u.col(j).iter().copied().collect()
    }

    pub fn report(&self) -> DecompositionReport {
        DecompositionReport {
            eigenvalues: self.eigenvalues.clone(),
            dim_eu: self.dim_eu(),
            dim_es: self.dim_es(),
            dim_ec: self.dim_ec,
            lambda_u: self.lambda_u,
            tol_spec: self.tol_spec,
            max_abs_re: self.max_abs_re,
            quadruple_defect: self.quadruple_defect,
            eigvec_residual: self.eigvec_residual,
            energy_on_hyperbolic: self.energy_on_hyperbolic.clone(),
        }
    }
}

fn cluster(mut values: Vec<f64>) -> Vec<(f64, usize)> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((_, m, last)) if (v - *last).abs() <= 1e-6 * v.abs().max(1.0) => {
                *m += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(first, m, last)| (0.5 * (first + last), m)).collect()
}

/// Real eigenbasis for a semisimple real eigenvalue of multiplicity m by block inverse iteration.
fn eigenbasis(m: &Mat<f64>, lambda: f64, mult: usize, rng: &mut ChaCha8Rng) -> Result<(Mat<f64>, f64)> {
    let n = m.nrows();
    let sigma = lambda + 1e-9 * lambda.abs().max(1.0);
    let shifted = Mat::from_fn(n, n, |i, j| m[(i, j)] - if i == j { sigma } else { 0.0 });
    let lu = shifted.partial_piv_lu();
    let mut v = Mat::from_fn(n, mult, |_, _| gaussian(rng));
    orthonormalize(&mut v);
    for _ in 0..4 {
        v = faer::linalg::solvers::Solve::solve(&lu, &v);
        orthonormalize(&mut v);
    }
    let mv = m * &v;
    let tt = v.transpose() * &mv;
    let residual = (&mv - &v * &tt).norm_l2() / norm_inf(m.as_ref()).max(f64::MIN_POSITIVE);
    let off = (&tt - Mat::from_fn(mult, mult, |i, j| if i == j { lambda } else { 0.0 })).norm_l2();
    if off > 1e-6 * lambda.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "eigenvalue {lambda:e} of multiplicity {mult} is defective (block departure {off:e})"
        )));
    }
    Ok((v, residual))
}

pub fn spectral_decompose(t: &HamiltonianTriple, opts: SpectralOptions) -> Result<SpectralDecomposition> {
    let m = t.generator();
    let eigenvalues = crate::linalg::general_eigenvalues(m.as_ref())?;
    let norm_m = norm_inf(m.as_ref());
    let tol_spec = opts.tol_spec_rel * norm_m;
    let mut up = Vec::new();
    let mut down = Vec::new();
    for &(re, im) in &eigenvalues {
        if re.abs() > tol_spec {
            if im.abs() > tol_spec {
                return Err(Error::Numerical(format!("complex hyperbolic eigenvalue {re:e}{im:+e}i not supported")));
            }
            if re > 0.0 {
                up.push(re);
            } else {
                down.push(re);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = t.dim();
    let mut residual: f64 = 0.0;
    let mut build = |vals: &[f64]| -> Result<Mat<f64>> {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (lam, mult) in cluster(vals.to_vec()) {
            let (v, r) = eigenbasis(&m, lam, mult, &mut rng)?;
            residual = residual.max(r);
            for j in 0..mult {
                let mut c: Vec<f64> = v.col(j).iter().copied().collect();
                let nn = t.norm2(&c).sqrt();
                c.iter_mut().for_each(|x| *x /= nn);
                cols.push(c);
            }
        }
        Ok(crate::linalg::mat_from_cols(n, &cols))
    };
    let basis_u = build(&up)?;
    let basis_s = build(&down)?;
    let hyp = Mat::from_fn(n, basis_u.ncols() + basis_s.ncols(), |i, j| {
        if j < basis_u.ncols() {
            basis_u[(i, j)]
        } else {
            basis_s[(i, j - basis_u.ncols())]
        }
    });
    let nx = t.dim_x();
    let hyp_h = Mat::from_fn(n, hyp.ncols(), |_, _| 0.0);
    let mut hyp_h = hyp_h;
    {
        let top = &t.l_form * hyp.as_ref().subrows(0, nx);
        let bot = &t.a_form * hyp.as_ref().subrows(nx, n - nx);
        for j in 0..hyp.ncols() {
            for i in 0..nx {
                hyp_h[(i, j)] = top[(i, j)];
            }
            for i in 0..n - nx {
                hyp_h[(nx + i, j)] = bot[(i, j)];
            }
        }
    }
    let pairing = hyp.transpose() * &hyp_h;
    let pairing_inv = if pairing.nrows() > 0 {
        crate::linalg::inverse(pairing.as_ref())
    } else {
        Mat::zeros(0, 0)
    };
    let energy_on_hyperbolic = (0..hyp.ncols())
        .map(|j| {
            let c: Vec<f64> = hyp.col(j).iter().copied().collect();
            t.energy(&c).abs() / t.norm2(&c)
        })
        .collect();

    let max_abs_re = eigenvalues.iter().fold(0.0f64, |a, z| a.max(z.0.abs()));
    let mut quadruple_defect: f64 = 0.0;
    for &(re, im) in &eigenvalues {
        if re.hypot(im) <= tol_spec {
            continue;
        }
        let nearest = |tr: f64, ti: f64| {
            eigenvalues.iter().map(|&(a, b)| (a - tr).hypot(b - ti)).fold(f64::INFINITY, f64::min)
        };
        let d = nearest(-re, -im).max(nearest(re, -im)) / re.hypot(im).max(1.0);
        quadruple_defect = quadruple_defect.max(d);
    }
    let lambda_u = up.iter().copied().reduce(f64::min);
    let dim_ec = n - up.len() - down.len();
    Ok(SpectralDecomposition {
        eigenvalues,
        tol_spec,
        norm_m,
        unstable: up,
        basis_u,
        stable: down,
        basis_s,
        dim_ec,
        lambda_u,
        max_abs_re,
        quadruple_defect,
        eigvec_residual: residual,
        energy_on_hyperbolic,
        hyp,
        hyp_h,
        pairing_inv,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictedCount {
    pub n_minus_restricted: usize,
    pub dim_ker_restricted: usize,
    pub rank: usize,
    /// σ_rank/σ_{rank+1} (infinite when the cut is at the end).
    pub rank_gap: f64,
    pub warning: Option<String>,
    pub spectrum: Vec<f64>,
    #[serde(skip)]
    pub kernel: Mat<f64>,
    #[serde(skip)]
    pub range: Mat<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RestrictedOptions {
    pub tol_rank: f64,
    pub tol_zero_rel: f64,
}

impl Default for RestrictedOptions {
    fn default() -> Self {
        RestrictedOptions { tol_rank: 1e-10, tol_zero_rel: 1e-8 }
    }
}

/// n⁻ of ⟨L·,·⟩ on R(B): X-orthonormal range basis by SVD, then the restricted form.
pub fn restricted_negative_count(t: &HamiltonianTriple, opts: RestrictedOptions) -> Result<RestrictedCount> {
    let nx = t.dim_x();
    let cx = cholesky(t.gram_x.as_ref())?;
    let mut bs = t.b.clone();
    if let Some(sc) = &t.range_scaling {
        for j in 0..bs.ncols() {
            for i in 0..nx {
                bs[(i, j)] *= sc[j];
            }
        }
    }
    let k = cx.transpose() * &bs;
    let svd = thin_svd(k.as_ref())?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let rank = svd.s.iter().filter(|&&s| s > opts.tol_rank * smax && s > 0.0).count();
    let rank_gap = if rank == 0 || rank >= svd.s.len() {
        f64::INFINITY
    } else {
        svd.s[rank - 1] / svd.s[rank].max(f64::MIN_POSITIVE)
    };
    let warning = (rank_gap < 10.0).then(|| {
        let mut best = (0, 0.0);
        for i in 1..svd.s.len() {
            let r = svd.s[i - 1] / svd.s[i].max(f64::MIN_POSITIVE);
            if r > best.1 {
                best = (i, r);
            }
        }
        format!("rank plateau ambiguous: threshold rank {rank}, largest singular gap at rank {}", best.0)
    });
    let u = svd.u.as_ref().subcols(0, rank).to_owned();
    let lt = congruence_inverse(cx.as_ref(), t.l_form.as_ref());
    let r = u.transpose() * &lt * &u;
    let (vals, vecs) = sym_eigen(r.as_ref())?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let NegativeCount { n_minus, dim_ker, spectrum, tol_zero, .. } = count_spectrum(vals, opts.tol_zero_rel * scale);
    let mut range = u.clone();
    lower_transpose_solve(cx.as_ref(), &mut range);
    let ker_idx: Vec<usize> = (0..spectrum.len()).filter(|&i| spectrum[i].abs() <= tol_zero).collect();
    let kernel = Mat::from_fn(nx, ker_idx.len(), |i, j| {
        (0..rank).map(|q| range[(i, q)] * vecs[(q, ker_idx[j])]).sum()
    });
    Ok(RestrictedCount {
        n_minus_restricted: n_minus,
        dim_ker_restricted: dim_ker,
        rank,
        rank_gap,
        warning,
        spectrum,
        kernel,
        range,
    })
}
