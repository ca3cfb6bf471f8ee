//! Rescaled operators d_h = d_{0,1} + h·d_{1,0} + h²·d_{2,-1}, their
//! adjoints, the Dirac decomposition D_h = D_0 + h·D_⊥ + h²·F, eigenvalue
//! sweeps over an h-grid with fitted scaling exponents, the small-branch
//! counting report, the operator-inequality check for Δ_h, and the h-norm.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::BigradedComplex;
use crate::error::{Error, Result};
use crate::linalg::{self, rank_kernel, sym_eig, Subspace, Tolerances};
use crate::spectral::SpectralPage;

/// Log-log slope margin separating integer scaling exponents.
pub const SLOPE_MARGIN: f64 = 0.25;

/// Relative threshold below which a branch counts as identically zero.
pub const ZERO_BRANCH_REL: f64 = 1e-12;

/// 12 logarithmically spaced points from 1e-1 down to 1e-4.
pub fn default_h_grid() -> Vec<f64> {
    log_grid(1e-1, 1e-4, 12)
}

pub fn log_grid(h_max: f64, h_min: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && h_max > h_min && h_min > 0.0);
    let (l0, l1) = (h_max.log10(), h_min.log10());
    (0..points)
        .map(|j| 10f64.powf(l0 + (l1 - l0) * j as f64 / (points - 1) as f64))
        .collect()
}

/// Assembly of a single bihomogeneous component on total degree r.
pub fn component_total(
    c: &BigradedComplex,
    r: usize,
    comp: crate::complex::DiffComponent,
) -> DMatrix<f64> {
    use crate::complex::DiffComponent::*;
    match comp {
        D01 => assemble_weighted(c, r, 1.0, 0.0, 0.0),
        D10 => assemble_weighted(c, r, 0.0, 1.0, 0.0),
        D2m1 => assemble_weighted(c, r, 0.0, 0.0, 1.0),
    }
}

/// Weighted assembly Σ w_i · d-component on degree r; weights (1,1,1) give
/// the total differential.
fn assemble_weighted(
    c: &BigradedComplex,
    r: usize,
    w01: f64,
    w10: f64,
    w2m1: f64,
) -> DMatrix<f64> {
    use crate::complex::DiffComponent::*;
    let src = c.layout(r);
    let tgt = c.layout(r + 1);
    let mut out = DMatrix::zeros(tgt.total_dim, src.total_dim);
    for piece in &src.pieces {
        for (comp, w) in [(D01, w01), (D10, w10), (D2m1, w2m1)] {
            if w == 0.0 {
                continue;
            }
            let (du, dv) = comp.shift();
            let Some(target) = tgt.find(piece.u as isize + du, piece.v as isize + dv) else {
                continue;
            };
            let m = c.component(comp, piece.u as isize, piece.v as isize);
            if m.nrows() == 0 || m.ncols() == 0 {
                continue;
            }
            let mut view = out.view_mut((target.offset, piece.offset), (m.nrows(), m.ncols()));
            view += &*m * w;
        }
    }
    out
}

/// The rescaled operator family at a fixed h, expressed in the orthonormal
/// frame of the complex (so adjoints are plain transposes).
#[derive(Debug, Clone)]
pub struct RescaledOps {
    pub h: f64,
    top_degree: usize,
    /// d_h per degree: Ω^r → Ω^{r+1}.
    dh: Vec<DMatrix<f64>>,
    /// d_{0,1} per degree.
    d0_part: Vec<DMatrix<f64>>,
    /// d_{1,0} per degree.
    dperp_part: Vec<DMatrix<f64>>,
    /// d_{2,-1} per degree.
    f_part: Vec<DMatrix<f64>>,
}

impl RescaledOps {
    pub fn d(&self, r: usize) -> &DMatrix<f64> {
        &self.dh[r]
    }

    pub fn top_degree(&self) -> usize {
        self.top_degree
    }

    /// Δ_h on degree r: d_hᵀd_h + d_h d_hᵀ of the adjacent degrees.
    pub fn laplacian(&self, r: usize) -> DMatrix<f64> {
        Self::laplacian_of(&self.dh, r)
    }

    /// Δ_0 on degree r (leafwise Laplacian).
    pub fn laplacian_leafwise(&self, r: usize) -> DMatrix<f64> {
        Self::laplacian_of(&self.d0_part, r)
    }

    /// Δ_⊥ on degree r (transverse Laplacian).
    pub fn laplacian_transverse(&self, r: usize) -> DMatrix<f64> {
        Self::laplacian_of(&self.dperp_part, r)
    }

    fn laplacian_of(d: &[DMatrix<f64>], r: usize) -> DMatrix<f64> {
        let n = d[r].ncols();
        let mut lap = DMatrix::zeros(n, n);
        lap += d[r].transpose() * &d[r];
        if r > 0 {
            lap += &d[r - 1] * d[r - 1].transpose();
        }
        lap
    }

    fn total_dirac_of(d: &[DMatrix<f64>], dims: &[usize]) -> DMatrix<f64> {
        let total: usize = dims.iter().sum();
        let mut out = DMatrix::zeros(total, total);
        let mut offset = 0usize;
        for (r, &dim) in dims.iter().enumerate() {
            if r + 1 <= d.len() && r < d.len() {
                let block = &d[r];
                let next_offset = offset + dim;
                out.view_mut((next_offset, offset), (block.nrows(), block.ncols()))
                    .copy_from(block);
                out.view_mut((offset, next_offset), (block.ncols(), block.nrows()))
                    .copy_from(&block.transpose());
            }
            offset += dim;
        }
        out
    }

    fn degree_dims(&self) -> Vec<usize> {
        (0..=self.top_degree).map(|r| self.dh[r].ncols()).collect()
    }

    /// D_h = d_h + δ_h on ⊕_r Ω^r.
    pub fn total_dirac(&self) -> DMatrix<f64> {
        Self::total_dirac_of(&self.dh, &self.degree_dims())
    }

    /// D_0 = d_{0,1} + δ_{0,-1} on ⊕_r Ω^r.
    pub fn dirac_leafwise(&self) -> DMatrix<f64> {
        Self::total_dirac_of(&self.d0_part, &self.degree_dims())
    }

    /// D_⊥ = d_{1,0} + δ_{-1,0} on ⊕_r Ω^r.
    pub fn dirac_transverse(&self) -> DMatrix<f64> {
        Self::total_dirac_of(&self.dperp_part, &self.degree_dims())
    }

    /// F = d_{2,-1} + δ_{-2,1} on ⊕_r Ω^r.
    pub fn dirac_order_zero(&self) -> DMatrix<f64> {
        Self::total_dirac_of(&self.f_part, &self.degree_dims())
    }

    /// Residual of D_h² = ⊕_r Δ_h^r, and of the decomposition
    /// D_h = D_0 + h·D_⊥ + h²·F.
    pub fn dirac_identity_residual(&self) -> f64 {
        let dirac = self.total_dirac();
        let squared = &dirac * &dirac;
        let dims = self.degree_dims();
        let total: usize = dims.iter().sum();
        let mut block_diag = DMatrix::zeros(total, total);
        let mut offset = 0usize;
        for (r, &dim) in dims.iter().enumerate() {
            block_diag
                .view_mut((offset, offset), (dim, dim))
                .copy_from(&self.laplacian(r));
            offset += dim;
        }
        let res_sq = (&squared - block_diag).norm();
        let recomposed = self.dirac_leafwise()
            + self.dirac_transverse() * self.h
            + self.dirac_order_zero() * (self.h * self.h);
        let res_dec = (recomposed - dirac).norm();
        res_sq.max(res_dec)
    }

    /// Residual of the conjugation identity Θ_h · d · Θ_h⁻¹ = d_h.
    pub fn theta_conjugation_residual(&self, c: &BigradedComplex) -> Result<f64> {
        let mut worst = 0.0f64;
        for r in 0..=self.top_degree {
            let d = c.total_d(r)?;
            let th_src = theta(c, r, self.h)?;
            let th_tgt = theta(c, r + 1, self.h)?;
            let mut conj = &th_tgt * &d;
            for (j, col) in th_inv_diag(&th_src).iter().enumerate() {
                for i in 0..conj.nrows() {
                    conj[(i, j)] *= col;
                }
            }
            worst = worst.max((conj - &self.dh[r]).norm());
        }
        Ok(worst)
    }
}

fn th_inv_diag(th: &DMatrix<f64>) -> Vec<f64> {
    (0..th.ncols()).map(|j| 1.0 / th[(j, j)]).collect()
}

/// Θ_h on degree r: diagonal scaling h^u on the piece of transverse
/// degree u. theta(C, r, 1) is the identity.
pub fn theta(c: &BigradedComplex, r: usize, h: f64) -> Result<DMatrix<f64>> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput("h must be positive".into()));
    }
    let layout = c.layout(r);
    let mut diag = DVector::zeros(layout.total_dim);
    for piece in &layout.pieces {
        let scale = h.powi(piece.u as i32);
        for i in 0..piece.dim {
            diag[piece.offset + i] = scale;
        }
    }
    Ok(DMatrix::from_diagonal(&diag))
}

/// Assemble the rescaled operator family at parameter h.
pub fn rescaled_ops(c: &BigradedComplex, h: f64, _tol: &Tolerances) -> Result<RescaledOps> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput("h must be positive".into()));
    }
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let top = c.top_degree();
    let mut dh = Vec::with_capacity(top + 1);
    let mut d0 = Vec::with_capacity(top + 1);
    let mut dperp = Vec::with_capacity(top + 1);
    let mut f = Vec::with_capacity(top + 1);
    for r in 0..=top {
        dh.push(assemble_weighted(c, r, 1.0, h, h * h));
        d0.push(assemble_weighted(c, r, 1.0, 0.0, 0.0));
        dperp.push(assemble_weighted(c, r, 0.0, 1.0, 0.0));
        f.push(assemble_weighted(c, r, 0.0, 0.0, 1.0));
    }
    Ok(RescaledOps {
        h,
        top_degree: top,
        dh,
        d0_part: d0,
        dperp_part: dperp,
        f_part: f,
    })
}

/// Eigenvalue branches of Δ_h on one degree across the h-grid.
#[derive(Debug, Clone)]
pub struct BranchData {
    /// lambdas[h_idx][i]: the i-th smallest eigenvalue at h_grid[h_idx].
    pub lambdas: Vec<Vec<f64>>,
    /// vectors[h_idx]: eigenvectors for the tracked branches (columns).
    pub vectors: Vec<DMatrix<f64>>,
    /// Fitted log-log slope per branch over the smallest-h half; None for
    /// identically-zero branches (slope undefined).
    pub kappa: Vec<Option<f64>>,
    /// Branch reads as identically zero at the smallest h.
    pub zero_branch: Vec<bool>,
}

/// Eigenvalue sweep over a descending h-grid.
#[derive(Debug, Clone)]
pub struct AdiabaticSweep {
    pub h_grid: Vec<f64>,
    pub degrees: Vec<usize>,
    pub per_degree: BTreeMap<usize, BranchData>,
}

impl AdiabaticSweep {
    /// Number of branches classified O(h^{2k}): fitted slope ≥ 2k − margin,
    /// or identically zero.
    pub fn count_in_h2k(&self, r: usize, k: usize) -> usize {
        let data = &self.per_degree[&r];
        data.kappa
            .iter()
            .zip(&data.zero_branch)
            .filter(|(kappa, &zero)| {
                zero || kappa.map(|s| s >= 2.0 * k as f64 - SLOPE_MARGIN).unwrap_or(false)
            })
            .count()
    }

    pub fn branch_count(&self, r: usize) -> usize {
        self.per_degree[&r].kappa.len()
    }

    /// Eigenvalues of branch i across the grid.
    pub fn branch(&self, r: usize, i: usize) -> Vec<f64> {
        self.per_degree[&r]
            .lambdas
            .iter()
            .map(|row| row[i])
            .collect()
    }
}

fn validate_grid(h_grid: &[f64]) -> Result<()> {
    if h_grid.len() < 4 {
        return Err(Error::InvalidInput("h grid needs at least 4 points".into()));
    }
    if h_grid.iter().any(|&h| h <= 0.0 || !h.is_finite()) {
        return Err(Error::InvalidInput("h grid must be positive".into()));
    }
    if h_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidInput("h grid must be strictly descending".into()));
    }
    let decades = (h_grid[0] / h_grid[h_grid.len() - 1]).log10();
    if decades < 2.0 - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "h grid must span at least 2 decades, got {decades:.2}"
        )));
    }
    Ok(())
}

fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn sweep_threads() -> usize {
    std::env::var("ADIABATIC_SS_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Eigenvalue sweep: the `num_branches` smallest eigenvalues of Δ_h per
/// degree and grid point, matched across h by sorted order, with fitted
/// scaling exponents over the smallest-h half of the grid.
pub fn sweep(
    c: &BigradedComplex,
    h_grid: &[f64],
    degrees: &[usize],
    num_branches: usize,
    tol: &Tolerances,
) -> Result<AdiabaticSweep> {
    validate_grid(h_grid)?;
    for &r in degrees {
        if r > c.top_degree() {
            return Err(Error::InvalidInput(format!("degree {r} out of range")));
        }
    }
    let solve_one = |&h: &f64| -> Result<Vec<(usize, Vec<f64>, DMatrix<f64>)>> {
        let ops = rescaled_ops(c, h, tol)?;
        let mut per_degree = Vec::new();
        for &r in degrees {
            let lap = ops.laplacian(r);
            let (values, vectors) = sym_eig(&lap, tol)?;
            let take = num_branches.min(values.len());
            let lambdas: Vec<f64> = values[..take].to_vec();
            let vecs = vectors.columns(0, take).into_owned();
            per_degree.push((r, lambdas, vecs));
        }
        Ok(per_degree)
    };
    let threads = sweep_threads();
    let results: Vec<_> = if threads == 1 {
        h_grid.iter().map(solve_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InternalCheckFailed(format!("thread pool: {e}")))?;
        pool.install(|| h_grid.par_iter().map(solve_one).collect::<Result<_>>())?
    };

    let mut per_degree = BTreeMap::new();
    for (deg_idx, &r) in degrees.iter().enumerate() {
        let lambdas: Vec<Vec<f64>> = results.iter().map(|row| row[deg_idx].1.clone()).collect();
        let vectors: Vec<DMatrix<f64>> =
            results.iter().map(|row| row[deg_idx].2.clone()).collect();
        let branches = lambdas.iter().map(|l| l.len()).min().unwrap_or(0);
        // Fit on the smallest-h half of the grid.
        let half = h_grid.len() / 2;
        let fit_idx: Vec<usize> = (half..h_grid.len()).collect();
        let h_fit: Vec<f64> = fit_idx.iter().map(|&j| h_grid[j]).collect();
        // Identically-zero detection at the smallest grid point, relative
        // to the operator scale there.
        let h_min_idx = h_grid.len() - 1;
        let ops_min = rescaled_ops(c, h_grid[h_min_idx], tol)?;
        let scale_min = ops_min.laplacian(r).norm().max(1.0);
        let mut kappa = Vec::with_capacity(branches);
        let mut zero_branch = Vec::with_capacity(branches);
        for i in 0..branches {
            let zero = lambdas[h_min_idx][i] <= ZERO_BRANCH_REL * scale_min;
            zero_branch.push(zero);
            if zero {
                kappa.push(None);
            } else {
                let ys: Vec<f64> = fit_idx.iter().map(|&j| lambdas[j][i]).collect();
                kappa.push(Some(fit_loglog_slope(&h_fit, &ys)));
            }
        }
        per_degree.insert(
            r,
            BranchData {
                lambdas,
                vectors,
                kappa,
                zero_branch,
            },
        );
    }
    Ok(AdiabaticSweep {
        h_grid: h_grid.to_vec(),
        degrees: degrees.to_vec(),
        per_degree,
    })
}

/// dim ker Δ_0 per degree, the finite-dimensional stand-in for dim Ê_1^r.
pub fn leafwise_kernel_dims(c: &BigradedComplex, tol: &Tolerances) -> Result<Vec<usize>> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let mut dims = vec![0usize; c.top_degree() + 1];
    for u in 0..=c.q() {
        for v in 0..=c.p() {
            let d_out = c.d01_at(u as isize, v as isize);
            let d_in = c.d01_at(u as isize, v as isize - 1);
            // ker Δ_0 = ker d01 ∩ ker δ01 = kernel of the stack [d01; d01ᵀ].
            let mut stacked = DMatrix::zeros(d_out.nrows() + d_in.ncols(), c.dims()[u][v]);
            stacked
                .view_mut((0, 0), (d_out.nrows(), d_out.ncols()))
                .copy_from(&*d_out);
            stacked
                .view_mut((d_out.nrows(), 0), (d_in.ncols(), d_in.nrows()))
                .copy_from(&d_in.transpose());
            let (_, kernel) = rank_kernel(&stacked, tol)?;
            dims[u + v] += kernel.dim();
        }
    }
    Ok(dims)
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremARow {
    pub r: usize,
    pub k: usize,
    pub expected: usize,
    pub counted: usize,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremAReport {
    pub rows: Vec<TheoremARow>,
}

impl TheoremAReport {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|row| row.matches)
    }
}

/// Compare small-branch counts against the page dimensions: n_1^r against
/// dim ker Δ_0 (the Ê_1 stand-in) and n_k^r against dim E_k^r for k ≥ 2.
/// `pages[k]` must hold page k for k = 0..=q+1.
pub fn theorem_a_report(
    c: &BigradedComplex,
    sweep: &AdiabaticSweep,
    pages: &[SpectralPage],
    tol: &Tolerances,
) -> Result<TheoremAReport> {
    let h1_dims = leafwise_kernel_dims(c, tol)?;
    let mut rows = Vec::new();
    for &r in &sweep.degrees {
        let n1 = sweep.count_in_h2k(r, 1);
        rows.push(TheoremARow {
            r,
            k: 1,
            expected: h1_dims[r],
            counted: n1,
            matches: n1 == h1_dims[r],
        });
        for k in 2..pages.len() {
            let expected = pages[k].degree_dim(r);
            let counted = sweep.count_in_h2k(r, k);
            rows.push(TheoremARow {
                r,
                k,
                expected,
                counted,
                matches: counted == expected,
            });
        }
    }
    Ok(TheoremAReport { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiracInequalityReport {
    /// (h, c(h)) with c(h) = max(0, −λ_min(Δ_h − ½Δ_0 − ½h²Δ_⊥))/h².
    pub samples: Vec<(f64, f64)>,
    /// max c(h) over the smallest-h half: the fitted constant C.
    pub fitted_c: f64,
    /// log-log slope of c(h) on the smallest-h half (0 when c ≈ 0).
    pub slope: f64,
    pub pass: bool,
}

/// Check the lower bound Δ_h ⪰ ½Δ_0 + ½h²Δ_⊥ − C·h² by measuring the most
/// negative eigenvalue of the difference; pass iff c(h) stays bounded as
/// h ↓ 0 (no negative log-log trend beyond the slope margin).
pub fn dirac_inequality_check(
    c: &BigradedComplex,
    h_grid: &[f64],
    tol: &Tolerances,
) -> Result<DiracInequalityReport> {
    validate_grid(h_grid)?;
    let mut samples = Vec::with_capacity(h_grid.len());
    let mut scale: f64 = 1.0;
    for &h in h_grid {
        let ops = rescaled_ops(c, h, tol)?;
        let mut worst = 0.0f64;
        for r in 0..=c.top_degree() {
            let m = ops.laplacian(r)
                - ops.laplacian_leafwise(r) * 0.5
                - ops.laplacian_transverse(r) * (0.5 * h * h);
            scale = scale.max(ops.laplacian_leafwise(r).norm());
            if m.nrows() == 0 {
                continue;
            }
            let (values, _) = sym_eig(&m, tol)?;
            worst = worst.max(-values[0]);
        }
        samples.push((h, worst / (h * h)));
    }
    let half = h_grid.len() / 2;
    let tail = &samples[half..];
    let fitted_c = tail.iter().map(|s| s.1).fold(0.0f64, f64::max);
    let floor = 1e-10 * scale;
    let (slope, pass) = if fitted_c <= floor {
        (0.0, true)
    } else {
        let hs: Vec<f64> = tail.iter().map(|s| s.0).collect();
        let cs: Vec<f64> = tail.iter().map(|s| s.1.max(floor * 1e-3)).collect();
        let slope = fit_loglog_slope(&hs, &cs);
        (slope, slope >= -SLOPE_MARGIN)
    };
    Ok(DiracInequalityReport {
        samples,
        fitted_c,
        slope,
        pass,
    })
}

/// ‖ω‖_h for ω in total degree r: h^{−q/2}·h^u per piece, combined in
/// quadrature; the gram inner product is used on each piece.
pub fn h_norm(c: &BigradedComplex, r: usize, omega: &DVector<f64>, h: f64) -> Result<f64> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput("h must be positive".into()));
    }
    let layout = c.layout(r);
    if omega.len() != layout.total_dim {
        return Err(Error::InvalidInput(format!(
            "omega has length {}, degree {r} has dimension {}",
            omega.len(),
            layout.total_dim
        )));
    }
    let mut total = 0.0f64;
    for piece in &layout.pieces {
        let x = omega.rows(piece.offset, piece.dim).into_owned();
        let sq = match c.gram_at(piece.u, piece.v) {
            None => x.norm_squared(),
            Some(g) => (x.transpose() * g * &x)[(0, 0)],
        };
        let w = h.powf(-(c.q() as f64) / 2.0) * h.powi(piece.u as i32);
        total += w * w * sq;
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricEquivalenceReport {
    /// Fitted equivalence constant: max over samples and grid points of
    /// max(ratio, 1/ratio).
    pub constant: f64,
    /// Trend of the per-h worst ratio across the grid; ≈ 0 when the
    /// equivalence constant is h-independent.
    pub slope: f64,
    pub pass: bool,
}

/// Check that ‖·‖'_h / ‖·‖_h is bounded by an h-independent constant by
/// sampling random vectors per degree across the grid.
pub fn metric_equivalence_check(
    c: &BigradedComplex,
    c_other: &BigradedComplex,
    h_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MetricEquivalenceReport> {
    if c.dims() != c_other.dims() {
        return Err(Error::InvalidInput(
            "complexes must share the dimension table".into(),
        ));
    }
    validate_grid(h_grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_h_worst = Vec::with_capacity(h_grid.len());
    let mut constant = 1.0f64;
    for &h in h_grid {
        let mut worst = 1.0f64;
        for r in 0..=c.top_degree() {
            let n = c.degree_dim(r);
            if n == 0 {
                continue;
            }
            for _ in 0..samples {
                let omega = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let a = h_norm(c, r, &omega, h)?;
                let b = h_norm(c_other, r, &omega, h)?;
                if a > 0.0 && b > 0.0 {
                    let ratio = (b / a).max(a / b);
                    worst = worst.max(ratio);
                }
            }
        }
        per_h_worst.push(worst);
        constant = constant.max(worst);
    }
    let slope = fit_loglog_slope(h_grid, &per_h_worst);
    Ok(MetricEquivalenceReport {
        constant,
        slope,
        pass: slope.abs() <= SLOPE_MARGIN,
    })
}

/// Span of the `count` lowest eigenvectors of Δ_h on degree r, for the
/// eigenspace-convergence checks. Returns the span and a degeneracy warning
/// when the eigenvalue at the cut is not separated.
pub fn small_eigenspace(
    sweep: &AdiabaticSweep,
    r: usize,
    h_idx: usize,
    count: usize,
    tol: &Tolerances,
) -> Result<(Subspace, bool)> {
    let data = sweep
        .per_degree
        .get(&r)
        .ok_or_else(|| Error::InvalidInput(format!("degree {r} not in sweep")))?;
    if h_idx >= sweep.h_grid.len() {
        return Err(Error::InvalidInput("h index out of range".into()));
    }
    let lambdas = &data.lambdas[h_idx];
    if count > lambdas.len() {
        return Err(Error::InvalidInput(format!(
            "requested {count} branches, sweep tracked {}",
            lambdas.len()
        )));
    }
    let vectors = data.vectors[h_idx].columns(0, count).into_owned();
    let degenerate = if count == 0 || count >= lambdas.len() {
        false
    } else {
        let gap = lambdas[count] - lambdas[count - 1];
        gap <= tol.tol_eig * lambdas[count].abs().max(1.0)
    };
    Ok((linalg::orthonormalize(&vectors, tol), degenerate))
}
