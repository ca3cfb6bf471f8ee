//! Spectral-sequence pages of the filtration by transverse degree: the
//! subspaces Z_k, B_k, page representatives E_k with their differentials,
//! the projected pages z_k, b_k, e_k, the direct-sum decomposition into
//! U/V/W blocks, the m-counting identity, and the Gromov–Shubin counting
//! formula for the rescaled Laplacian.
//!
//! Quotients are never represented abstractly: every U/W quotient is
//! realized as the orthogonal complement of W inside U.

use nalgebra::DMatrix;

use crate::adiabatic;
use crate::complex::BigradedComplex;
use crate::error::{Error, Result};
use crate::linalg::{
    self, min_norm_solve, ortho_complement_in, orthonormalize, orthonormalize_scaled, rank_kernel,
    subspace_intersect, subspace_sum, sym_eig, Subspace, Tolerances,
};

/// Page index: finite page k (k ≥ −1 appears internally) or the limit page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageIndex {
    Finite(i64),
    Infinite,
}

impl PageIndex {
    pub fn prev(self) -> PageIndex {
        match self {
            PageIndex::Finite(k) => PageIndex::Finite(k - 1),
            PageIndex::Infinite => PageIndex::Infinite,
        }
    }
}

impl std::fmt::Display for PageIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PageIndex::Finite(k) => write!(f, "{k}"),
            PageIndex::Infinite => write!(f, "inf"),
        }
    }
}

fn clamp_level(level: i64, q: usize) -> usize {
    level.clamp(0, q as i64 + 1) as usize
}

/// Z_k^{u,v} = Ω_u^{u+v} ∩ d⁻¹(Ω_{u+k}^{u+v+1}) as a subspace of Ω^{u+v};
/// k = ∞ intersects with ker d. Total in (u, v): off-grid labels give the
/// subspace the definition dictates (zero when the filtration piece is).
pub fn compute_zk(
    c: &BigradedComplex,
    k: PageIndex,
    u: isize,
    v: isize,
    tol: &Tolerances,
) -> Result<Subspace> {
    let r = u + v;
    if r < 0 || r > c.top_degree() as isize {
        return Ok(Subspace::zero(0));
    }
    let r = r as usize;
    let layout = c.layout(r);
    let ambient = layout.total_dim;
    let level = clamp_level(u.max(0) as i64, c.q());
    let level = if u < 0 { 0 } else { level };
    let (off_u, len_u) = layout.filtration_range(level);
    if len_u == 0 {
        return Ok(Subspace::zero(ambient));
    }
    let d = c.total_d(r)?;
    // Rows of degree r+1 below filtration u+k must vanish on d·x.
    let kill_level = match k {
        PageIndex::Infinite => c.q() + 1,
        PageIndex::Finite(kf) => clamp_level(u as i64 + kf, c.q()),
    };
    let (rows_end, _) = c.layout(r + 1).filtration_range(kill_level);
    let restricted = d.view((0, off_u), (rows_end, len_u)).into_owned();
    let (_, kernel) = rank_kernel(&restricted, tol)?;
    let mut basis = DMatrix::zeros(ambient, kernel.dim());
    basis
        .view_mut((off_u, 0), (len_u, kernel.dim()))
        .copy_from(kernel.basis());
    Subspace::from_orthonormal(basis, tol)
}

/// B_k^{u,v} = Ω_u^{u+v} ∩ d(Ω_{u−k}^{u+v−1}); B_{−1} = 0 by convention,
/// k = ∞ uses the full image of d.
pub fn compute_bk(
    c: &BigradedComplex,
    k: PageIndex,
    u: isize,
    v: isize,
    tol: &Tolerances,
) -> Result<Subspace> {
    let r = u + v;
    if r < 0 || r > c.top_degree() as isize {
        return Ok(Subspace::zero(0));
    }
    let r = r as usize;
    let layout = c.layout(r);
    let ambient = layout.total_dim;
    if let PageIndex::Finite(kf) = k {
        if kf < 0 {
            return Ok(Subspace::zero(ambient));
        }
    }
    if r == 0 {
        return Ok(Subspace::zero(ambient));
    }
    let src_layout = c.layout(r - 1);
    let src_level = match k {
        PageIndex::Infinite => 0,
        PageIndex::Finite(kf) => clamp_level(u as i64 - kf, c.q()),
    };
    let src_level = if u < 0 { clamp_level(u as i64, c.q()) } else { src_level };
    let (src_off, src_len) = src_layout.filtration_range(src_level);
    if src_len == 0 {
        return Ok(Subspace::zero(ambient));
    }
    let d = c.total_d(r - 1)?;
    let restricted = d.view((0, src_off), (ambient, src_len)).into_owned();
    // First the clean image span, then its intersection with the coordinate
    // subspace Ω_u: the head rows of the orthonormal image basis must
    // vanish. Solving on the orthonormal basis avoids amplifying error
    // through small-norm image columns.
    let image = orthonormalize(&restricted, tol);
    if image.dim() == 0 {
        return Ok(Subspace::zero(ambient));
    }
    let level_u = clamp_level(u.max(0) as i64, c.q());
    let (off_u, _) = layout.filtration_range(level_u);
    let head = image.basis().view((0, 0), (off_u, image.dim())).into_owned();
    let (_, coeffs) = linalg::rank_kernel_scaled(&head, 1.0, tol)?;
    if coeffs.dim() == 0 {
        return Ok(Subspace::zero(ambient));
    }
    let mut basis = image.basis() * coeffs.basis();
    for j in 0..basis.ncols() {
        for i in 0..off_u {
            basis[(i, j)] = 0.0;
        }
    }
    Ok(orthonormalize_scaled(&basis, 1.0, tol))
}

/// One page entry at a bidegree.
#[derive(Debug, Clone)]
pub struct PageEntry {
    pub u: usize,
    pub v: usize,
    /// Z_k^{u,v} in degree-(u+v) coordinates.
    pub z: Subspace,
    /// Z_{k−1}^{u+1,v−1} + B_{k−1}^{u,v}, the denominator inside Z_k.
    pub denominator: Subspace,
    /// Orthocomplement representatives of E_k^{u,v} inside Z_k.
    pub e_reps: Subspace,
    /// d_k expressed in the representative bases, mapping into the entry at
    /// (u+k, v−k+1).
    pub d_k: DMatrix<f64>,
    /// Rank of d_k with the cutoff floored at the total differential's
    /// scale (a coefficient matrix of pure roundoff must read as zero).
    pub d_rank: usize,
}

/// A full spectral-sequence page.
#[derive(Debug, Clone)]
pub struct SpectralPage {
    pub k: PageIndex,
    pub entries: Vec<Vec<PageEntry>>,
}

impl SpectralPage {
    pub fn entry(&self, u: usize, v: usize) -> &PageEntry {
        &self.entries[u][v]
    }

    pub fn dim(&self, u: usize, v: usize) -> usize {
        self.entries[u][v].e_reps.dim()
    }

    pub fn dims(&self) -> Vec<Vec<usize>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.e_reps.dim()).collect())
            .collect()
    }

    pub fn degree_dim(&self, r: usize) -> usize {
        let mut total = 0;
        for row in &self.entries {
            for e in row {
                if e.u + e.v == r {
                    total += e.e_reps.dim();
                }
            }
        }
        total
    }

    pub fn d_rank(&self, u: usize, v: usize) -> usize {
        self.entries[u][v].d_rank
    }

    /// Residual of d_k∘d_k = 0 across the page.
    pub fn dk_squared_residual(&self, k_shift: (isize, isize)) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.entries {
            for e in row {
                let (tu, tv) = (e.u as isize + k_shift.0, e.v as isize + k_shift.1);
                if tu < 0 || tv < 0 {
                    continue;
                }
                let (tu, tv) = (tu as usize, tv as usize);
                if tu >= self.entries.len() || tv >= self.entries[tu].len() {
                    continue;
                }
                let next = &self.entries[tu][tv];
                if next.d_k.nrows() == 0 || e.d_k.nrows() == 0 {
                    continue;
                }
                worst = worst.max((&next.d_k * &e.d_k).norm());
            }
        }
        worst
    }
}

/// Compute the page (E_k, d_k) with canonical orthocomplement
/// representatives: E_k = Z_k ⊖ (Z_{k−1}^{u+1,v−1} + B_{k−1}^{u,v}).
pub fn page(c: &BigradedComplex, k: PageIndex, tol: &Tolerances) -> Result<SpectralPage> {
    let c = c.orthonormal_view()?;
    let c = c.as_ref();
    if let PageIndex::Finite(kf) = k {
        if kf < 0 {
            return Err(Error::InvalidInput("page index must be >= 0".into()));
        }
    }
    let mut entries: Vec<Vec<PageEntry>> = Vec::new();
    for u in 0..=c.q() {
        let mut row = Vec::new();
        for v in 0..=c.p() {
            let (ui, vi) = (u as isize, v as isize);
            let z = compute_zk(c, k, ui, vi, tol)?;
            let z_prev = compute_zk(c, k.prev(), ui + 1, vi - 1, tol)?;
            let b_prev = compute_bk(
                c,
                match k {
                    PageIndex::Infinite => PageIndex::Infinite,
                    PageIndex::Finite(kf) => PageIndex::Finite(kf - 1),
                },
                ui,
                vi,
                tol,
            )?;
            let s = subspace_sum(&z_prev, &b_prev, tol)?;
            let denominator = subspace_intersect(&s, &z, tol)?;
            let e_reps = ortho_complement_in(&denominator, &z, tol)?;
            row.push(PageEntry {
                u,
                v,
                z,
                denominator,
                e_reps,
                d_k: DMatrix::zeros(0, 0),
                d_rank: 0,
            });
        }
        entries.push(row);
    }
    // d_k maps representatives at (u,v) to representatives at (u+k, v−k+1),
    // by projecting d of a representative onto the target representatives.
    if let PageIndex::Finite(kf) = k {
        let mut dk_grid: Vec<Vec<(DMatrix<f64>, usize)>> = Vec::new();
        for u in 0..=c.q() {
            let mut row = Vec::new();
            for v in 0..=c.p() {
                let src = &entries[u][v];
                let (tu, tv) = (u as isize + kf as isize, v as isize - kf as isize + 1);
                let target_dim = if tu >= 0 && tv >= 0 && tu <= c.q() as isize && tv <= c.p() as isize
                {
                    entries[tu as usize][tv as usize].e_reps.dim()
                } else {
                    0
                };
                if target_dim == 0 || src.e_reps.dim() == 0 {
                    row.push((DMatrix::zeros(target_dim, src.e_reps.dim()), 0));
                    continue;
                }
                let r = u + v;
                let d = c.total_d(r)?;
                let mapped = &d * src.e_reps.basis();
                let tgt = &entries[tu as usize][tv as usize].e_reps;
                let dk = tgt.basis().transpose() * mapped;
                let (rank, _) = linalg::rank_kernel_scaled(&dk, d.norm().max(1.0), tol)?;
                row.push((dk, rank));
            }
            dk_grid.push(row);
        }
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let (dk, rank) = std::mem::take(&mut dk_grid[u][v]);
                entries[u][v].d_k = dk;
                entries[u][v].d_rank = rank;
            }
        }
    } else {
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let dim = entries[u][v].e_reps.dim();
                entries[u][v].d_k = DMatrix::zeros(0, dim);
            }
        }
    }
    Ok(SpectralPage { k, entries })
}

/// Projected page at a bidegree: z_k, b_k, e_k live inside the piece
/// Ω^{u,v} itself.
#[derive(Debug, Clone)]
pub struct ProjectedEntry {
    pub u: usize,
    pub v: usize,
    /// z_k^{u,v} = π_{u,v}(Z_k^{u,v}).
    pub z: Subspace,
    /// b_k^{u,v} = π_{u,v}(B_k^{u,v}).
    pub b: Subspace,
    /// b_{k−1}^{u,v}, the denominator of e_k.
    pub b_prev: Subspace,
    /// e_k^{u,v} = z_k ⊖ b_{k−1}.
    pub e_reps: Subspace,
    /// d_k in the representative bases.
    pub d_k: DMatrix<f64>,
    /// Rank of d_k, cutoff floored at the total differential's scale.
    pub d_rank: usize,
}

#[derive(Debug, Clone)]
pub struct ProjectedPage {
    pub k: PageIndex,
    pub entries: Vec<Vec<ProjectedEntry>>,
}

impl ProjectedPage {
    pub fn entry(&self, u: usize, v: usize) -> &ProjectedEntry {
        &self.entries[u][v]
    }

    pub fn dim(&self, u: usize, v: usize) -> usize {
        self.entries[u][v].e_reps.dim()
    }
}

/// Apply the coordinate projection π_{u,v} to a degree-(u+v) subspace and
/// orthonormalize the result inside the piece.
fn project_to_piece(
    c: &BigradedComplex,
    s: &Subspace,
    u: usize,
    v: usize,
    tol: &Tolerances,
) -> Subspace {
    let layout = c.layout(u + v);
    match layout.piece_rows(s.basis(), u, v) {
        None => Subspace::zero(c.dim_at(u as isize, v as isize)),
        Some(rows) => orthonormalize_scaled(&rows, 1.0, tol),
    }
}

/// The projected page (z_k, b_k, e_k, d_k). Representative spaces live in
/// the bigraded pieces; d_k is computed by lifting a representative through
/// π_{u,v} back into Z_k and projecting d of the lift.
pub fn projected_page(c: &BigradedComplex, k: PageIndex, tol: &Tolerances) -> Result<ProjectedPage> {
    let c = c.orthonormal_view()?;
    let c = c.as_ref();
    let mut entries: Vec<Vec<ProjectedEntry>> = Vec::new();
    let mut z_full: Vec<Vec<Subspace>> = Vec::new();
    for u in 0..=c.q() {
        let mut row = Vec::new();
        let mut zf_row = Vec::new();
        for v in 0..=c.p() {
            let (ui, vi) = (u as isize, v as isize);
            let zk = compute_zk(c, k, ui, vi, tol)?;
            let bk = compute_bk(c, k, ui, vi, tol)?;
            let bk_prev = compute_bk(
                c,
                match k {
                    PageIndex::Infinite => PageIndex::Infinite,
                    PageIndex::Finite(kf) => PageIndex::Finite(kf - 1),
                },
                ui,
                vi,
                tol,
            )?;
            let z = project_to_piece(c, &zk, u, v, tol);
            let b = project_to_piece(c, &bk, u, v, tol);
            let b_prev = project_to_piece(c, &bk_prev, u, v, tol);
            let e_reps = ortho_complement_in(&b_prev, &z, tol)?;
            row.push(ProjectedEntry {
                u,
                v,
                z,
                b,
                b_prev,
                e_reps,
                d_k: DMatrix::zeros(0, 0),
                d_rank: 0,
            });
            zf_row.push(zk);
        }
        entries.push(row);
        z_full.push(zf_row);
    }

    if let PageIndex::Finite(kf) = k {
        let mut dk_grid: Vec<Vec<(DMatrix<f64>, usize)>> = Vec::new();
        for u in 0..=c.q() {
            let mut row = Vec::new();
            for v in 0..=c.p() {
                let src = &entries[u][v];
                let (tu, tv) = (u as isize + kf as isize, v as isize - kf as isize + 1);
                let target_ok =
                    tu >= 0 && tv >= 0 && tu <= c.q() as isize && tv <= c.p() as isize;
                let target_dim = if target_ok {
                    entries[tu as usize][tv as usize].e_reps.dim()
                } else {
                    0
                };
                if target_dim == 0 || src.e_reps.dim() == 0 {
                    row.push((DMatrix::zeros(target_dim, src.e_reps.dim()), 0));
                    continue;
                }
                let r = u + v;
                let layout = c.layout(r);
                let zk = &z_full[u][v];
                // Lift each representative y through π: find x ∈ Z_k with
                // π_{u,v}(x) = y; the class of d(x) at the target does not
                // depend on the choice of lift.
                let proj_z = layout
                    .piece_rows(zk.basis(), u, v)
                    .unwrap_or_else(|| DMatrix::zeros(0, zk.dim()));
                let d = c.total_d(r)?;
                let tgt_layout = c.layout(r + 1);
                let tgt = &entries[tu as usize][tv as usize];
                let mut dk = DMatrix::zeros(target_dim, src.e_reps.dim());
                for j in 0..src.e_reps.dim() {
                    let y = src.e_reps.basis().column(j).into_owned();
                    let (coeff, res) = min_norm_solve(&proj_z, &y, tol)?;
                    if res > tol.tol_orth.max(1e3 * tol.tol_rank) {
                        return Err(Error::InternalCheckFailed(format!(
                            "projected representative not liftable through pi at \
                             ({u},{v}): residual {res:.3e}"
                        )));
                    }
                    let x = zk.basis() * coeff;
                    let w = &d * x;
                    let w_piece = tgt_layout
                        .piece_rows(&DMatrix::from_column_slice(w.len(), 1, w.as_slice()), tu as usize, tv as usize)
                        .unwrap_or_else(|| DMatrix::zeros(0, 1));
                    let coeffs = tgt.e_reps.basis().transpose() * w_piece;
                    dk.set_column(j, &coeffs.column(0));
                }
                let (rank, _) = linalg::rank_kernel_scaled(&dk, d.norm().max(1.0), tol)?;
                row.push((dk, rank));
            }
            dk_grid.push(row);
        }
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let (dk, rank) = std::mem::take(&mut dk_grid[u][v]);
                entries[u][v].d_k = dk;
                entries[u][v].d_rank = rank;
            }
        }
    }
    Ok(ProjectedPage { k, entries })
}

/// The direct-sum decomposition Ω^r ≅ ⊕ (V ⊕ ⊕_ℓ (U_ℓ ⊕ W_ℓ)):
/// W_ℓ complements Z_{ℓ−1}^{u+1,v−1} + Z_{ℓ+1}^{u,v} inside Z_ℓ^{u,v},
/// U_ℓ = d(W_ℓ), and V complements Z_∞^{u+1,v−1} + B_∞ inside Z_∞.
#[derive(Debug, Clone)]
pub struct DecompositionUVW {
    /// u_spaces[ℓ][u][v] ⊆ Ω^{u+v}, the image blocks d(W_ℓ).
    pub u_spaces: Vec<Vec<Vec<Subspace>>>,
    /// v_spaces[u][v] ≅ E_∞^{u,v}.
    pub v_spaces: Vec<Vec<Subspace>>,
    /// w_spaces[ℓ][u][v] ≅ E_ℓ/(E_ℓ ∩ ker d_ℓ).
    pub w_spaces: Vec<Vec<Vec<Subspace>>>,
}

impl DecompositionUVW {
    pub fn levels(&self) -> usize {
        self.w_spaces.len()
    }

    /// dim E_k^{u,v} recovered from the decomposition:
    /// dim V + Σ_{ℓ≥k} (dim U_ℓ + dim W_ℓ).
    pub fn e_dim(&self, k: usize, u: usize, v: usize) -> usize {
        let mut total = self.v_spaces[u][v].dim();
        for l in k..self.levels() {
            total += self.u_spaces[l][u][v].dim() + self.w_spaces[l][u][v].dim();
        }
        total
    }

    /// Total dimension placed at degree r; equals dim Ω^r when the
    /// decomposition is a direct sum.
    pub fn degree_total(&self, r: usize) -> usize {
        let mut total = 0;
        for (u, row) in self.v_spaces.iter().enumerate() {
            for (v, s) in row.iter().enumerate() {
                if u + v == r {
                    total += s.dim();
                    for l in 0..self.levels() {
                        total +=
                            self.u_spaces[l][u][v].dim() + self.w_spaces[l][u][v].dim();
                    }
                }
            }
        }
        total
    }
}

/// Construct the U/V/W decomposition. Construction order: W_ℓ as
/// orthocomplements, then U_ℓ := d(W_ℓ) (checked to be an isomorphic image),
/// then V.
pub fn decompose(c: &BigradedComplex, tol: &Tolerances) -> Result<DecompositionUVW> {
    let c = c.orthonormal_view()?;
    let c = c.as_ref();
    let levels = c.q() + 1;
    let zero_grid =
        |c: &BigradedComplex| -> Vec<Vec<Subspace>> {
            (0..=c.q())
                .map(|u| {
                    (0..=c.p())
                        .map(|v| Subspace::zero(c.degree_dim(u + v)))
                        .collect()
                })
                .collect()
        };
    let mut w_spaces: Vec<Vec<Vec<Subspace>>> = vec![zero_grid(c); levels];
    let mut u_spaces: Vec<Vec<Vec<Subspace>>> = vec![zero_grid(c); levels];
    let mut v_spaces: Vec<Vec<Subspace>> = zero_grid(c);

    for l in 0..levels {
        let li = l as i64;
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let (ui, vi) = (u as isize, v as isize);
                let z_l = compute_zk(c, PageIndex::Finite(li), ui, vi, tol)?;
                if z_l.dim() == 0 {
                    continue;
                }
                let z_prev = compute_zk(c, PageIndex::Finite(li - 1), ui + 1, vi - 1, tol)?;
                let z_next = compute_zk(c, PageIndex::Finite(li + 1), ui, vi, tol)?;
                let s = subspace_sum(&z_prev, &z_next, tol)?;
                let s = subspace_intersect(&s, &z_l, tol)?;
                let w = ortho_complement_in(&s, &z_l, tol)?;
                if w.dim() == 0 {
                    continue;
                }
                // d maps W_ℓ isomorphically onto U_ℓ at (u+ℓ, v−ℓ+1).
                let r = u + v;
                let d = c.total_d(r)?;
                let image = &d * w.basis();
                let u_space = orthonormalize(&image, tol);
                if u_space.dim() != w.dim() {
                    return Err(Error::InternalCheckFailed(format!(
                        "d does not map W_{l} at ({u},{v}) isomorphically: \
                         dim W = {}, rank dW = {} (tol_rank mismatch?)",
                        w.dim(),
                        u_space.dim()
                    )));
                }
                let (tu, tv) = (ui + l as isize, vi - l as isize + 1);
                if tu >= 0 && tv >= 0 && tu <= c.q() as isize && tv <= c.p() as isize {
                    u_spaces[l][tu as usize][tv as usize] = u_space;
                } else if u_space.dim() > 0 {
                    return Err(Error::InternalCheckFailed(format!(
                        "nonzero U_{l} lands outside the grid at ({tu},{tv})"
                    )));
                }
                w_spaces[l][u][v] = w;
            }
        }
    }

    for u in 0..=c.q() {
        for v in 0..=c.p() {
            let (ui, vi) = (u as isize, v as isize);
            let z_inf = compute_zk(c, PageIndex::Infinite, ui, vi, tol)?;
            if z_inf.dim() == 0 {
                continue;
            }
            let z_inf_prev = compute_zk(c, PageIndex::Infinite, ui + 1, vi - 1, tol)?;
            let b_inf = compute_bk(c, PageIndex::Infinite, ui, vi, tol)?;
            let s = subspace_sum(&z_inf_prev, &b_inf, tol)?;
            let s = subspace_intersect(&s, &z_inf, tol)?;
            v_spaces[u][v] = ortho_complement_in(&s, &z_inf, tol)?;
        }
    }

    Ok(DecompositionUVW {
        u_spaces,
        v_spaces,
        w_spaces,
    })
}

/// Residual diagnostics of the decomposition: d(U) = d(V) = 0 and the
/// per-degree direct-sum property (dimension count and joint independence).
pub fn decomposition_checks(
    c: &BigradedComplex,
    dec: &DecompositionUVW,
    tol: &Tolerances,
) -> Result<Vec<(String, f64, bool)>> {
    let c = c.orthonormal_view()?;
    let c = c.as_ref();
    let mut out = Vec::new();
    let mut d_residual = 0.0f64;
    for u in 0..=c.q() {
        for v in 0..=c.p() {
            let r = u + v;
            let d = c.total_d(r)?;
            for l in 0..dec.levels() {
                let s = &dec.u_spaces[l][u][v];
                if s.dim() > 0 {
                    d_residual = d_residual.max((&d * s.basis()).norm());
                }
            }
            let s = &dec.v_spaces[u][v];
            if s.dim() > 0 {
                d_residual = d_residual.max((&d * s.basis()).norm());
            }
        }
    }
    let d_scale: f64 = (0..=c.top_degree())
        .map(|r| c.total_d(r).map(|m| m.norm()).unwrap_or(0.0))
        .fold(1.0, f64::max);
    out.push((
        "d_vanishes_on_U_and_V".into(),
        d_residual,
        d_residual <= tol.tol_eq * d_scale,
    ));

    for r in 0..=c.top_degree() {
        let n = c.degree_dim(r);
        let total = dec.degree_total(r);
        let mut stacked = DMatrix::zeros(n, total);
        let mut col = 0usize;
        let push = |s: &Subspace, stacked: &mut DMatrix<f64>, col: &mut usize| {
            if s.dim() > 0 {
                stacked
                    .view_mut((0, *col), (n, s.dim()))
                    .copy_from(s.basis());
                *col += s.dim();
            }
        };
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                if u + v != r {
                    continue;
                }
                push(&dec.v_spaces[u][v], &mut stacked, &mut col);
                for l in 0..dec.levels() {
                    push(&dec.u_spaces[l][u][v], &mut stacked, &mut col);
                    push(&dec.w_spaces[l][u][v], &mut stacked, &mut col);
                }
            }
        }
        let (rank, _) = rank_kernel(&stacked, tol)?;
        let ok = total == n && rank == n;
        out.push((
            format!("direct_sum @ degree {r}"),
            (total as f64 - rank as f64).abs(),
            ok,
        ));
    }
    Ok(out)
}

/// m_k^r table and the L_k realization dims from the W blocks.
#[derive(Debug, Clone)]
pub struct CountingTable {
    /// m[k][r] = Σ_{ℓ≥k, u+v=r} rank d_ℓ^{u,v}.
    pub m: Vec<Vec<usize>>,
    /// dim L_k^r materialized as ⊕_{ℓ≥k} W_ℓ; equals m[k][r] when the
    /// blocks are independent.
    pub l_dims: Vec<Vec<usize>>,
    /// Betti numbers per degree.
    pub betti: Vec<usize>,
}

impl CountingTable {
    /// Residual of Corollary-(m): dim E_k^r − m_k^{r−1} − β^r − m_k^r,
    /// reported per (k, r).
    pub fn corollary_m_holds(&self, page_degree_dims: &[Vec<usize>]) -> bool {
        for (k, row) in self.m.iter().enumerate() {
            for r in 0..row.len() {
                let lhs = page_degree_dims[k][r] as i64;
                let m_prev = if r == 0 { 0 } else { self.m[k][r - 1] as i64 };
                let rhs = m_prev + self.betti[r] as i64 + self.m[k][r] as i64;
                if lhs != rhs {
                    return false;
                }
            }
        }
        true
    }
}

/// Build the counting table; `pages[k]` must hold page k for k = 0..=q+1.
pub fn m_counts(
    c: &BigradedComplex,
    pages: &[SpectralPage],
    dec: &DecompositionUVW,
    tol: &Tolerances,
) -> Result<CountingTable> {
    let top = c.top_degree();
    let kmax = pages.len();
    let mut rank_dk = vec![vec![0usize; top + 1]; kmax];
    for (k, page) in pages.iter().enumerate() {
        for row in &page.entries {
            for e in row {
                let r = e.u + e.v;
                rank_dk[k][r] += e.d_rank;
            }
        }
    }
    let mut m = vec![vec![0usize; top + 1]; kmax];
    for k in 0..kmax {
        for r in 0..=top {
            for l in k..kmax {
                m[k][r] += rank_dk[l][r];
            }
        }
    }
    let mut l_dims = vec![vec![0usize; top + 1]; kmax];
    for k in 0..kmax {
        for r in 0..=top {
            let n = c.degree_dim(r);
            let mut total_cols = 0usize;
            for u in 0..=c.q() {
                for v in 0..=c.p() {
                    if u + v != r {
                        continue;
                    }
                    for l in k..dec.levels() {
                        total_cols += dec.w_spaces[l][u][v].dim();
                    }
                }
            }
            let mut stacked = DMatrix::zeros(n, total_cols);
            let mut col = 0usize;
            for u in 0..=c.q() {
                for v in 0..=c.p() {
                    if u + v != r {
                        continue;
                    }
                    for l in k..dec.levels() {
                        let s = &dec.w_spaces[l][u][v];
                        if s.dim() > 0 {
                            stacked
                                .view_mut((0, col), (n, s.dim()))
                                .copy_from(s.basis());
                            col += s.dim();
                        }
                    }
                }
            }
            l_dims[k][r] = if total_cols == 0 {
                0
            } else {
                rank_kernel(&stacked, tol)?.0
            };
        }
    }
    let mut betti = Vec::new();
    for r in 0..=top {
        betti.push(c.betti(r, tol)?);
    }
    Ok(CountingTable { m, l_dims, betti })
}

/// Gromov–Shubin counting data at spectral parameter λ and adiabatic
/// parameter h.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GromovShubin {
    pub r: usize,
    pub lambda: f64,
    pub h: f64,
    /// Eigenvalues of Δ_h on Ω^r that are ≤ λ (with multiplicity).
    pub n_count: usize,
    pub f_prev: usize,
    pub f_curr: usize,
    pub betti: usize,
    pub identity_holds: bool,
}

/// F^r(λ): number of nonzero singular values σ of d_h restricted to
/// (ker d_h)^⊥ with σ² ≤ λ. At finite dimension the supremum over subspaces
/// is attained by the span of the smallest singular vectors.
pub fn f_count(d: &DMatrix<f64>, lambda: f64, tie_tol: f64, tol: &Tolerances) -> Result<usize> {
    if d.ncols() == 0 || d.nrows() == 0 {
        return Ok(0);
    }
    let sigma = linalg::singular_values(d);
    let cutoff = tol.tol_rank * sigma.first().copied().unwrap_or(0.0);
    Ok(sigma
        .iter()
        .filter(|&&s| s > cutoff && s * s <= lambda + tie_tol)
        .count())
}

/// The counting identity N^r(λ) = F^{r−1}(λ) + β^r + F^r(λ) for Δ_h.
pub fn gromov_shubin(
    c: &BigradedComplex,
    r: usize,
    lambda: f64,
    h: f64,
    tol: &Tolerances,
) -> Result<GromovShubin> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput("lambda must be >= 0".into()));
    }
    let ops = adiabatic::rescaled_ops(c, h, tol)?;
    let tie_tol = 1e-8 * lambda.max(1.0);
    let (eigs, _) = sym_eig(&ops.laplacian(r), tol)?;
    let n_count = eigs.iter().filter(|&&e| e <= lambda + tie_tol).count();
    let f_curr = f_count(ops.d(r), lambda, tie_tol, tol)?;
    let f_prev = if r == 0 {
        0
    } else {
        f_count(ops.d(r - 1), lambda, tie_tol, tol)?
    };
    let betti = c.betti(r, tol)?;
    Ok(GromovShubin {
        r,
        lambda,
        h,
        n_count,
        f_prev,
        f_curr,
        betti,
        identity_holds: n_count == f_prev + betti + f_curr,
    })
}

/// All pages 0..=q+1 plus the limit page; the standard working set.
pub fn all_pages(c: &BigradedComplex, tol: &Tolerances) -> Result<(Vec<SpectralPage>, SpectralPage)> {
    let mut pages = Vec::new();
    for k in 0..=(c.q() as i64 + 1) {
        pages.push(page(c, PageIndex::Finite(k), tol)?);
    }
    let inf = page(c, PageIndex::Infinite, tol)?;
    Ok((pages, inf))
}
