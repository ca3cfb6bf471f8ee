//! The three nested sequences attached to the complex: the Hodge tower
//! (leafwise-harmonic realization of the pages with per-level operators),
//! the two jet towers (forms extendable to h-polynomials killing d_h/δ_h,
//! resp. Δ_h, modulo h^k), the inclusion-chain report between them, the
//! principal-angle convergence check for small eigenspaces, and the
//! small-divisor conditioning diagnostic on the torus models.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::adiabatic::{self, AdiabaticSweep};
use crate::complex::{BigradedComplex, DiffComponent};
use crate::error::{Error, Result};
use crate::linalg::{
    self, min_norm_solve_mat, ortho_complement_in, orthonormalize_scaled, principal_angles,
    rank_kernel, rank_kernel_scaled, subspace_intersect, Subspace, Tolerances,
};
use crate::models::{kronecker_modes, kronecker_multipliers, kronecker_t2, KroneckerSpec};
use crate::report::CheckEntry;
use crate::spectral::{projected_page, PageIndex};

/// Orthogonal projections onto the leafwise-Hodge summands of each piece:
/// Π onto ker Δ_0, P onto im d_{0,1}, Q onto im δ_{0,-1}.
#[derive(Debug, Clone)]
pub struct HodgeProjectors {
    pub pi: Vec<Vec<DMatrix<f64>>>,
    pub p: Vec<Vec<DMatrix<f64>>>,
    pub q: Vec<Vec<DMatrix<f64>>>,
}

impl HodgeProjectors {
    /// Max residual over pieces of Π + P + Q = id, idempotency, symmetry
    /// and pairwise orthogonality.
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for u in 0..self.pi.len() {
            for v in 0..self.pi[u].len() {
                let (pi, p, q) = (&self.pi[u][v], &self.p[u][v], &self.q[u][v]);
                let n = pi.nrows();
                if n == 0 {
                    continue;
                }
                let id = DMatrix::identity(n, n);
                worst = worst.max((pi + p + q - id).norm());
                for m in [pi, p, q] {
                    worst = worst.max((m * m - m).norm());
                    worst = worst.max((m - m.transpose()).norm());
                }
                worst = worst.max((pi * p).norm());
                worst = worst.max((pi * q).norm());
                worst = worst.max((p * q).norm());
            }
        }
        worst
    }
}

/// Leafwise Hodge projectors per piece; ker Δ_0 = ker d_{0,1} ∩ ker δ_{0,-1}.
pub fn hodge_projectors(c: &BigradedComplex, tol: &Tolerances) -> Result<HodgeProjectors> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let mut pi = Vec::new();
    let mut p = Vec::new();
    let mut q = Vec::new();
    for u in 0..=c.q() {
        let mut pi_row = Vec::new();
        let mut p_row = Vec::new();
        let mut q_row = Vec::new();
        for v in 0..=c.p() {
            let n = c.dims()[u][v];
            let d_out = c.d01_at(u as isize, v as isize);
            let d_in = c.d01_at(u as isize, v as isize - 1);
            let mut stacked = DMatrix::zeros(d_out.nrows() + d_in.ncols(), n);
            stacked
                .view_mut((0, 0), (d_out.nrows(), n))
                .copy_from(&*d_out);
            stacked
                .view_mut((d_out.nrows(), 0), (d_in.ncols(), n))
                .copy_from(&d_in.transpose());
            let (_, kernel) = rank_kernel(&stacked, tol)?;
            pi_row.push(kernel.basis() * kernel.basis().transpose());
            let im_d = linalg::orthonormalize(&d_in, tol);
            p_row.push(im_d.basis() * im_d.basis().transpose());
            let im_delta = linalg::orthonormalize(&d_out.transpose(), tol);
            q_row.push(im_delta.basis() * im_delta.basis().transpose());
        }
        pi.push(pi_row);
        p.push(p_row);
        q.push(q_row);
    }
    Ok(HodgeProjectors { pi, p, q })
}

/// One level of the Hodge tower: per-piece bases (inside the bigraded
/// pieces) and the level differential in those bases.
#[derive(Debug, Clone)]
pub struct HodgeLevel {
    pub k: usize,
    pub bases: Vec<Vec<Subspace>>,
    /// d_k from (u,v) to (u+k, v−k+1) in the level bases.
    pub d_k: Vec<Vec<DMatrix<f64>>>,
}

impl HodgeLevel {
    pub fn dims(&self) -> Vec<Vec<usize>> {
        self.bases
            .iter()
            .map(|row| row.iter().map(|s| s.dim()).collect())
            .collect()
    }

    pub fn degree_dim(&self, r: usize) -> usize {
        let mut total = 0;
        for (u, row) in self.bases.iter().enumerate() {
            for (v, s) in row.iter().enumerate() {
                if u + v == r {
                    total += s.dim();
                }
            }
        }
        total
    }
}

/// The nested tower H_1 ⊇ H_2 ⊇ … ⊇ H_{q+1} = H_∞ with cross-checks
/// against the complement realization inside the projected pages.
#[derive(Debug, Clone)]
pub struct HodgeTower {
    levels: Vec<HodgeLevel>,
    pub cross_checks: Vec<CheckEntry>,
}

impl HodgeTower {
    /// Level k (1-based); indices beyond stabilization return the last level.
    pub fn level(&self, k: usize) -> &HodgeLevel {
        let idx = k.max(1).min(self.levels.len());
        &self.levels[idx - 1]
    }

    pub fn stabilization_level(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[HodgeLevel] {
        &self.levels
    }

    /// H_k^r = ⊕_{u+v=r} H_k^{u,v} embedded in the degree coordinates.
    pub fn degree_subspace(&self, c: &BigradedComplex, k: usize, r: usize) -> Subspace {
        let level = self.level(k);
        let layout = c.layout(r);
        let total: usize = level
            .bases
            .iter()
            .enumerate()
            .flat_map(|(u, row)| {
                row.iter()
                    .enumerate()
                    .filter(move |(v, _)| u + *v == r)
                    .map(|(_, s)| s.dim())
            })
            .sum();
        let mut basis = DMatrix::zeros(layout.total_dim, total);
        let mut col = 0usize;
        for piece in &layout.pieces {
            let s = &level.bases[piece.u][piece.v];
            if s.dim() > 0 {
                basis
                    .view_mut((piece.offset, col), (piece.dim, s.dim()))
                    .copy_from(s.basis());
                col += s.dim();
            }
        }
        Subspace::from_orthonormal(basis, &Tolerances::default())
            .unwrap_or_else(|_| Subspace::zero(layout.total_dim))
    }
}

/// Unknown-block layout of the lift system: slots a = 1..k−1 hold the
/// correction α_a ∈ Ω^{u+a, v−a}.
struct LiftSystem {
    matrix: DMatrix<f64>,
    col_offsets: Vec<(isize, isize, usize, usize)>,
}

fn build_lift_system(c: &BigradedComplex, u: isize, v: isize, k: usize) -> LiftSystem {
    let slots: Vec<(isize, isize)> = (1..k as isize).map(|a| (u + a, v - a)).collect();
    let rows: Vec<(isize, isize)> = (1..k as isize).map(|a| (u + a, v - a + 1)).collect();
    let col_dims: Vec<usize> = slots.iter().map(|&(su, sv)| c.dim_at(su, sv)).collect();
    let row_dims: Vec<usize> = rows.iter().map(|&(ru, rv)| c.dim_at(ru, rv)).collect();
    let total_cols: usize = col_dims.iter().sum();
    let total_rows: usize = row_dims.iter().sum();
    let mut matrix = DMatrix::zeros(total_rows, total_cols);
    let mut col_offsets = Vec::new();
    let mut col_off = 0usize;
    for (ci, &(su, sv)) in slots.iter().enumerate() {
        col_offsets.push((su, sv, col_off, col_dims[ci]));
        let mut row_off = 0usize;
        for (ri, &(ru, rv)) in rows.iter().enumerate() {
            for comp in [DiffComponent::D01, DiffComponent::D10, DiffComponent::D2m1] {
                let (du, dv) = comp.shift();
                if su + du == ru && sv + dv == rv {
                    let m = c.component(comp, su, sv);
                    if m.nrows() > 0 && m.ncols() > 0 {
                        matrix
                            .view_mut((row_off, col_off), (m.nrows(), m.ncols()))
                            .copy_from(&*m);
                    }
                }
            }
            row_off += row_dims[ri];
        }
        col_off += col_dims[ci];
    }
    LiftSystem {
        matrix,
        col_offsets,
    }
}

/// Build the Hodge tower. Level 1 is the complement of b_0 inside z_1
/// (= ker Δ_0 piecewise); d_1 = Π d_{1,0}; for k ≥ 2, d_k is computed via
/// the constructive lift (solve the corrections α in the filtration tail so
/// that the intermediate components of d(ω+α) vanish, then project), and
/// H_{k+1} = ker(d_k δ_k + δ_k d_k) with exact basis containment in H_k.
pub fn hodge_tower(c: &BigradedComplex, tol: &Tolerances) -> Result<HodgeTower> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let k_stab = c.q() + 1;
    let d_scale: f64 = (0..=c.top_degree())
        .map(|r| c.total_d(r).map(|d| d.norm()).unwrap_or(0.0))
        .fold(1.0, f64::max);

    let pp1 = projected_page(c, PageIndex::Finite(1), tol)?;
    let mut bases: Vec<Vec<Subspace>> = (0..=c.q())
        .map(|u| {
            (0..=c.p())
                .map(|v| pp1.entry(u, v).e_reps.clone())
                .collect()
        })
        .collect();

    let mut levels: Vec<HodgeLevel> = Vec::new();
    let mut cross_checks: Vec<CheckEntry> = Vec::new();

    for k in 1..=k_stab {
        // d_k in the current bases.
        let mut d_k: Vec<Vec<DMatrix<f64>>> = Vec::new();
        for u in 0..=c.q() {
            let mut row = Vec::new();
            for v in 0..=c.p() {
                let src = &bases[u][v];
                let (tu, tv) = (u as isize + k as isize, v as isize - k as isize + 1);
                let tgt_dim = if tu >= 0 && tv >= 0 && tu <= c.q() as isize && tv <= c.p() as isize
                {
                    bases[tu as usize][tv as usize].dim()
                } else {
                    0
                };
                if src.dim() == 0 || tgt_dim == 0 {
                    row.push(DMatrix::zeros(tgt_dim, src.dim()));
                    continue;
                }
                let tgt = &bases[tu as usize][tv as usize];
                let (ui, vi) = (u as isize, v as isize);
                // gamma(ω) = π_{u+k,v−k+1} d(ω + α) with α from the lift.
                let mut gamma = DMatrix::zeros(c.dim_at(tu, tv), src.dim());
                // Direct contributions of ω itself (slots k−1, k−2 are ω
                // when k ≤ 2).
                if k == 1 {
                    gamma += c.d10_at(ui, vi).as_ref() * src.basis();
                } else if k == 2 {
                    gamma += c.d2m1_at(ui, vi).as_ref() * src.basis();
                }
                if k >= 2 {
                    let system = build_lift_system(c, ui, vi, k);
                    if system.matrix.ncols() > 0 {
                        // RHS: −π_{u+a,v−a+1} d(ω) for a = 1..k−1.
                        let mut rhs = DMatrix::zeros(system.matrix.nrows(), src.dim());
                        let mut row_off = 0usize;
                        for a in 1..k as isize {
                            let (ru, rv) = (ui + a, vi - a + 1);
                            let dim = c.dim_at(ru, rv);
                            if a == 1 {
                                let m = c.d10_at(ui, vi);
                                if m.nrows() > 0 {
                                    rhs.view_mut((row_off, 0), (dim, src.dim()))
                                        .copy_from(&(-(m.as_ref() * src.basis())));
                                }
                            } else if a == 2 {
                                let m = c.d2m1_at(ui, vi);
                                if m.nrows() > 0 {
                                    rhs.view_mut((row_off, 0), (dim, src.dim()))
                                        .copy_from(&(-(m.as_ref() * src.basis())));
                                }
                            }
                            row_off += dim;
                        }
                        let (alpha, res) = min_norm_solve_mat(&system.matrix, &rhs, tol)?;
                        if res > tol.tol_eq * d_scale {
                            return Err(Error::InternalCheckFailed(format!(
                                "lift system for d_{k} at ({u},{v}) inconsistent: \
                                 residual {res:.3e} (representatives not in Z_k?)"
                            )));
                        }
                        // gamma += d10·α_{k−1} + d2m1·α_{k−2}.
                        for &(su, sv, off, dim) in &system.col_offsets {
                            if dim == 0 {
                                continue;
                            }
                            let slot_rows = alpha.rows(off, dim).into_owned();
                            if su == ui + k as isize - 1 {
                                let m = c.d10_at(su, sv);
                                if m.nrows() > 0 {
                                    gamma += m.as_ref() * &slot_rows;
                                }
                            }
                            if su == ui + k as isize - 2 {
                                let m = c.d2m1_at(su, sv);
                                if m.nrows() > 0 {
                                    gamma += m.as_ref() * &slot_rows;
                                }
                            }
                        }
                    }
                }
                row.push(tgt.basis().transpose() * gamma);
            }
            d_k.push(row);
        }
        levels.push(HodgeLevel {
            k,
            bases: bases.clone(),
            d_k: d_k.clone(),
        });

        if k == k_stab {
            break;
        }
        // H_{k+1} = ker d_k ∩ ker δ_k inside H_k, with exact basis
        // containment; cross-checked against the complement realization
        // z_{k+1} ⊖ b_k.
        let mut next_bases: Vec<Vec<Subspace>> = Vec::new();
        for u in 0..=c.q() {
            let mut row = Vec::new();
            for v in 0..=c.p() {
                let cur = &bases[u][v];
                if cur.dim() == 0 {
                    row.push(cur.clone());
                    continue;
                }
                let d_out = &d_k[u][v];
                let (su, sv) = (u as isize - k as isize, v as isize + k as isize - 1);
                let d_in = if su >= 0 && sv >= 0 && su <= c.q() as isize && sv <= c.p() as isize {
                    d_k[su as usize][sv as usize].clone()
                } else {
                    DMatrix::zeros(cur.dim(), 0)
                };
                let mut stacked = DMatrix::zeros(d_out.nrows() + d_in.ncols(), cur.dim());
                stacked
                    .view_mut((0, 0), (d_out.nrows(), cur.dim()))
                    .copy_from(d_out);
                stacked
                    .view_mut((d_out.nrows(), 0), (d_in.ncols(), cur.dim()))
                    .copy_from(&d_in.transpose());
                let (_, kernel) = rank_kernel_scaled(&stacked, d_scale, tol)?;
                let basis = cur.basis() * kernel.basis();
                row.push(Subspace::from_orthonormal(basis, tol)?);
            }
            next_bases.push(row);
        }
        let pp_next = projected_page(c, PageIndex::Finite(k as i64 + 1), tol)?;
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let complement = &pp_next.entry(u, v).e_reps;
                let built = &next_bases[u][v];
                let res = if complement.dim() != built.dim() {
                    1.0
                } else if built.dim() == 0 {
                    0.0
                } else {
                    built
                        .contains_residual(complement)
                        .max(complement.contains_residual(built))
                };
                cross_checks.push(
                    CheckEntry::new(
                        format!("hodge_level_{}_matches_page_complement @ ({u},{v})", k + 1),
                        res,
                        tol.tol_orth,
                    )
                    .with_details(format!(
                        "ker-route dim {}, complement-route dim {}",
                        built.dim(),
                        complement.dim()
                    )),
                );
            }
        }
        bases = next_bases;
    }
    Ok(HodgeTower {
        levels,
        cross_checks,
    })
}

/// Which rescaled operator the jet must annihilate modulo h^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JetKind {
    /// d_h and δ_h conditions on the same jet.
    Forman,
    /// Δ_h conditions.
    MazzeoMelrose,
}

/// Truncated h-power-series extension ω̃(h) = Σ_{j<order} h^j · coeffs[j].
#[derive(Debug, Clone)]
pub struct PolynomialJet {
    pub order: usize,
    pub coeffs: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct JetLevel {
    pub k: usize,
    /// Admissible ω_0 per total degree (degree coordinates).
    pub by_degree: Vec<Subspace>,
    /// dim(admissible ∩ Ω^{u,v}) per bidegree.
    pub piece_dims: Vec<Vec<usize>>,
    /// dim(admissible) − Σ piece dims per degree; 0 iff bigraded.
    pub bigraded_defect: Vec<i64>,
    /// One witness jet per admissible basis vector, per degree.
    pub witnesses: Vec<Vec<PolynomialJet>>,
}

#[derive(Debug, Clone)]
pub struct JetTower {
    pub kind: JetKind,
    pub levels: Vec<JetLevel>,
}

impl JetTower {
    /// Admissible space at level k and degree r; level 0 is everything.
    pub fn degree_subspace(&self, c: &BigradedComplex, k: usize, r: usize) -> Subspace {
        if k == 0 {
            return Subspace::full(c.degree_dim(r));
        }
        let idx = k.min(self.levels.len());
        self.levels[idx - 1].by_degree[r].clone()
    }
}

/// Block system expressing that the chosen operator applied to
/// Σ_j h^j ω_j has vanishing coefficients of h^0..h^{k−1}; the unknown jet
/// has `length` slots (length ≥ k; higher slots never influence lower
/// coefficients, so length = k is canonical).
fn jet_system(
    c: &BigradedComplex,
    kind: JetKind,
    r: usize,
    k: usize,
    length: usize,
) -> DMatrix<f64> {
    use DiffComponent::*;
    let n_r = c.degree_dim(r);
    let d_up: Vec<DMatrix<f64>> = [D01, D10, D2m1]
        .iter()
        .map(|&comp| adiabatic::component_total(c, r, comp))
        .collect();
    let d_down: Vec<DMatrix<f64>> = if r > 0 {
        [D01, D10, D2m1]
            .iter()
            .map(|&comp| adiabatic::component_total(c, r - 1, comp).transpose())
            .collect()
    } else {
        Vec::new()
    };
    let coeff_ops: Vec<DMatrix<f64>> = match kind {
        JetKind::Forman => Vec::new(),
        JetKind::MazzeoMelrose => {
            // Δ_h = Σ_t h^t L_t with L_t = Σ_{i+j=t} (d_i δ_j + δ_i d_j).
            (0..=4usize)
                .map(|t| {
                    let mut l = DMatrix::zeros(n_r, n_r);
                    for i in 0..=2usize {
                        let j = t as isize - i as isize;
                        if !(0..=2).contains(&j) {
                            continue;
                        }
                        let j = j as usize;
                        l += d_up[j].transpose() * &d_up[i];
                        if r > 0 {
                            l += d_down[j].transpose() * &d_down[i];
                        }
                    }
                    l
                })
                .collect()
        }
    };
    let (row_block, n_rows_per): (usize, Vec<usize>) = match kind {
        JetKind::Forman => {
            let up = c.degree_dim(r + 1);
            let down = if r > 0 { c.degree_dim(r - 1) } else { 0 };
            (up + down, vec![up, down])
        }
        JetKind::MazzeoMelrose => (n_r, vec![n_r]),
    };
    let mut m = DMatrix::zeros(k * row_block, length * n_r);
    for t in 0..k {
        for j in 0..length {
            let i = t as isize - j as isize;
            if i < 0 {
                continue;
            }
            let i = i as usize;
            match kind {
                JetKind::Forman => {
                    if i <= 2 {
                        let up_rows = n_rows_per[0];
                        if up_rows > 0 {
                            m.view_mut((t * row_block, j * n_r), (up_rows, n_r))
                                .copy_from(&d_up[i]);
                        }
                        if r > 0 && n_rows_per[1] > 0 {
                            m.view_mut((t * row_block + up_rows, j * n_r), (n_rows_per[1], n_r))
                                .copy_from(&d_down[i]);
                        }
                    }
                }
                JetKind::MazzeoMelrose => {
                    if i <= 4 {
                        m.view_mut((t * row_block, j * n_r), (n_r, n_r))
                            .copy_from(&coeff_ops[i]);
                    }
                }
            }
        }
    }
    m
}

/// Jet tower with explicit jet length k + extra per level; `extra = 0` is
/// the canonical length.
pub fn jet_tower_with_length(
    c: &BigradedComplex,
    kind: JetKind,
    k_max: usize,
    extra: usize,
    tol: &Tolerances,
) -> Result<JetTower> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    if k_max > 2 * (c.q() + 1) {
        return Err(Error::InvalidInput(format!(
            "k_max {k_max} exceeds 2(q+1) = {}; nothing changes beyond stabilization",
            2 * (c.q() + 1)
        )));
    }
    let mut levels = Vec::new();
    for k in 1..=k_max {
        let length = k + extra;
        let mut by_degree = Vec::new();
        let mut witnesses = Vec::new();
        for r in 0..=c.top_degree() {
            let n_r = c.degree_dim(r);
            if n_r == 0 {
                by_degree.push(Subspace::zero(0));
                witnesses.push(Vec::new());
                continue;
            }
            let system = jet_system(c, kind, r, k, length);
            let (_, kernel) = rank_kernel(&system, tol)?;
            let slot0 = kernel.basis().rows(0, n_r).into_owned();
            let admissible = orthonormalize_scaled(&slot0, 1.0, tol);
            // One witness jet per basis vector: solve for the higher slots
            // with ω_0 fixed.
            let mut wits = Vec::new();
            if admissible.dim() > 0 && length > 1 {
                let slot0_block = system.columns(0, n_r).into_owned();
                let rest_block = system.columns(n_r, (length - 1) * n_r).into_owned();
                let rhs = -(&slot0_block * admissible.basis());
                let (alpha, res) = min_norm_solve_mat(&rest_block, &rhs, tol)?;
                if res > tol.tol_eq * system.norm().max(1.0) {
                    return Err(Error::InternalCheckFailed(format!(
                        "witness jet solve inconsistent at level {k}, degree {r}: \
                         residual {res:.3e}"
                    )));
                }
                for j in 0..admissible.dim() {
                    let mut coeffs = vec![admissible.basis().column(j).into_owned()];
                    for slot in 0..length - 1 {
                        coeffs.push(alpha.view((slot * n_r, j), (n_r, 1)).column(0).into_owned());
                    }
                    wits.push(PolynomialJet {
                        order: k,
                        coeffs,
                    });
                }
            } else {
                for j in 0..admissible.dim() {
                    wits.push(PolynomialJet {
                        order: k,
                        coeffs: vec![admissible.basis().column(j).into_owned()],
                    });
                }
            }
            by_degree.push(admissible);
            witnesses.push(wits);
        }
        // Per-bidegree dims by intersecting with the coordinate pieces.
        let mut piece_dims = vec![vec![0usize; c.p() + 1]; c.q() + 1];
        let mut bigraded_defect = Vec::new();
        for r in 0..=c.top_degree() {
            let s = &by_degree[r];
            let layout = c.layout(r);
            let mut total = 0usize;
            for piece in &layout.pieces {
                let indices: Vec<usize> =
                    (piece.offset..piece.offset + piece.dim).collect();
                let coord = Subspace::coordinate(layout.total_dim, &indices);
                let inter = subspace_intersect(s, &coord, tol)?;
                piece_dims[piece.u][piece.v] = inter.dim();
                total += inter.dim();
            }
            bigraded_defect.push(s.dim() as i64 - total as i64);
        }
        levels.push(JetLevel {
            k,
            by_degree,
            piece_dims,
            bigraded_defect,
            witnesses,
        });
    }
    Ok(JetTower { kind, levels })
}

/// Jet tower with the canonical jet length (= the level).
pub fn jet_tower(
    c: &BigradedComplex,
    kind: JetKind,
    k_max: usize,
    tol: &Tolerances,
) -> Result<JetTower> {
    jet_tower_with_length(c, kind, k_max, 0, tol)
}

/// Residual of the jet conditions for a witness: the h^0..h^{k−1}
/// coefficients of the chosen operator applied to the jet.
pub fn jet_condition_residual(
    c: &BigradedComplex,
    kind: JetKind,
    r: usize,
    jet: &PolynomialJet,
) -> Result<f64> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let length = jet.coeffs.len();
    let system = jet_system(c, kind, r, jet.order, length);
    let n_r = c.degree_dim(r);
    let mut x = DVector::zeros(length * n_r);
    for (j, coeff) in jet.coeffs.iter().enumerate() {
        x.rows_mut(j * n_r, n_r).copy_from(coeff);
    }
    Ok((system * x).norm())
}

/// Inclusion-chain report between the three towers.
#[derive(Debug, Clone)]
pub struct InclusionReport {
    pub entries: Vec<CheckEntry>,
    /// (tower, level, degree) → dim, for the side-by-side table.
    pub dims: Vec<(String, usize, usize, usize)>,
}

impl InclusionReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Verify, per level and degree, 𝕳_k ⊆ 𝖍_k ⊆ 𝕳_{⌊k/2⌋}, 𝕳_1 = 𝓗_1,
/// 𝕳_k ⊆ 𝓗_k, and the finite-dimensional equality 𝕳_k = 𝓗_k.
pub fn inclusion_report(
    c: &BigradedComplex,
    hodge: &HodgeTower,
    forman: &JetTower,
    mm: &JetTower,
    tol: &Tolerances,
) -> Result<InclusionReport> {
    let view = c.orthonormal_view()?;
    let c = view.as_ref();
    let tolerance = tol.tol_orth;
    let mut entries = Vec::new();
    let mut dims = Vec::new();
    let k_max = forman.levels.len().min(mm.levels.len());
    for k in 1..=k_max {
        for r in 0..=c.top_degree() {
            let f_k = forman.degree_subspace(c, k, r);
            let m_k = mm.degree_subspace(c, k, r);
            let h_k = hodge.degree_subspace(c, k, r);
            dims.push(("forman".into(), k, r, f_k.dim()));
            dims.push(("mazzeo_melrose".into(), k, r, m_k.dim()));
            dims.push(("hodge".into(), k, r, h_k.dim()));
            entries.push(CheckEntry::new(
                format!("forman_{k} in mm_{k} @ degree {r}"),
                m_k.contains_residual(&f_k),
                tolerance,
            ));
            let f_half = forman.degree_subspace(c, k / 2, r);
            entries.push(CheckEntry::new(
                format!("mm_{k} in forman_{} @ degree {r}", k / 2),
                f_half.contains_residual(&m_k),
                tolerance,
            ));
            entries.push(CheckEntry::new(
                format!("forman_{k} in hodge_{k} @ degree {r}"),
                h_k.contains_residual(&f_k),
                tolerance,
            ));
            // Finite dimension: the closure obstruction vanishes, so the
            // towers agree.
            let res_eq = if f_k.dim() == h_k.dim() {
                h_k.contains_residual(&f_k).max(f_k.contains_residual(&h_k))
            } else {
                1.0
            };
            entries.push(
                CheckEntry::new(format!("forman_{k} equals hodge_{k} @ degree {r}"), res_eq, tolerance)
                    .with_details(format!("dims {} vs {}", f_k.dim(), h_k.dim())),
            );
        }
    }
    Ok(InclusionReport { entries, dims })
}

/// Principal angles between the span of the smallest dim H_k^r eigenvectors
/// of Δ_h and H_k^r; the returned flag warns about a degenerate eigenvalue
/// at the cut index.
pub fn eigenspace_convergence(
    c: &BigradedComplex,
    sweep: &AdiabaticSweep,
    hodge: &HodgeTower,
    k: usize,
    r: usize,
    h_idx: usize,
    tol: &Tolerances,
) -> Result<(Vec<f64>, bool)> {
    let target = hodge.degree_subspace(c, k, r);
    if target.dim() == 0 {
        return Err(Error::PreconditionViolated(format!(
            "H_{k} has dimension 0 in degree {r}"
        )));
    }
    let (span, degenerate) = adiabatic::small_eigenspace(sweep, r, h_idx, target.dim(), tol)?;
    let angles = principal_angles(&span, &target)?;
    Ok((angles, degenerate))
}

/// One row of the small-divisor diagnostic table.
#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleRow {
    pub n: usize,
    /// min over nonzero truncated modes of |m + α n|.
    pub s_floor: f64,
    /// Frobenius norm of the minimum-norm solution X of
    /// d01·X = (id − Π)·d10 on multiples of the characteristic form.
    pub g_norm: f64,
    /// α resolved as rational within the truncation (s_floor ≈ 0).
    pub resonant: bool,
}

/// Small-divisor floor s(N) and leafwise-primitive growth g(N) for the
/// Kronecker model with slope `alpha`. Above `dense_threshold` the solve
/// uses the mode-diagonal form of the same system; the two routes agree on
/// overlapping N (see tests).
pub fn liouville_diagnostic(
    alpha: f64,
    n_list: &[usize],
    tol: &Tolerances,
) -> Result<Vec<LiouvilleRow>> {
    if !alpha.is_finite() {
        return Err(Error::InvalidInput("alpha must be finite".into()));
    }
    const DENSE_THRESHOLD: usize = 12;
    let mut rows = Vec::new();
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidInput("truncations must be >= 1".into()));
        }
        let mut s_floor = f64::INFINITY;
        for m in -(n as i64)..=(n as i64) {
            for nn in -(n as i64)..=(n as i64) {
                if m == 0 && nn == 0 {
                    continue;
                }
                let val = (m as f64 + alpha * nn as f64).abs();
                s_floor = s_floor.min(val);
            }
        }
        let resonant = s_floor <= 1e-14 * n as f64;
        let g_norm = if n <= DENSE_THRESHOLD {
            liouville_g_dense(alpha, n, tol)?
        } else {
            liouville_g_modewise(alpha, n)
        };
        rows.push(LiouvilleRow {
            n,
            s_floor,
            g_norm,
            resonant,
        });
    }
    Ok(rows)
}

/// Dense route: minimum-norm solve of d01·X = (id − Π)(d10 ∘ (χ∧·)) on the
/// (1,·) column of the Kronecker complex. The wedge with χ identifies
/// functions with multiples of the characteristic form.
fn liouville_g_dense(alpha: f64, n: usize, tol: &Tolerances) -> Result<f64> {
    let c = kronecker_t2(&KroneckerSpec { alpha, n })?;
    let projectors = hodge_projectors(&c, tol)?;
    let a = c.d01_at(1, 0).into_owned();
    let d10_chi = c.d10_at(0, 1).into_owned();
    let dim = d10_chi.nrows();
    let rhs = (DMatrix::identity(dim, dim) - &projectors.pi[1][1]) * d10_chi;
    let (x, _res) = min_norm_solve_mat(&a, &rhs, tol)?;
    Ok(x.norm())
}

/// Mode-diagonal route: on mode (m, n) the solve is (a·J)·X = −b·J with
/// solution −(b/a)·I₂, so ‖X‖² accumulates 2(b/a)² per nonzero mode.
fn liouville_g_modewise(alpha: f64, n: usize) -> f64 {
    let mut total = 0.0f64;
    for (m, nn) in kronecker_modes(n).into_iter().skip(1) {
        let (a, b) = kronecker_multipliers(alpha, m, nn);
        if a != 0.0 {
            total += 2.0 * (b / a) * (b / a);
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::{default_h_grid, sweep};
    use crate::models::{self, corpus_spec, golden_alpha, liouville10_alpha, ProductSpec};
    use crate::spectral::all_pages;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn leafwise_only_complex() -> BigradedComplex {
        // D10 = D2m1 = 0: only the leafwise differential acts.
        let mut c = BigradedComplex::new(1, 1, vec![vec![3, 3], vec![3, 3]]).unwrap();
        let d = nalgebra::dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0];
        c.set_d01(0, 0, d.clone()).unwrap();
        c.set_d01(1, 0, d).unwrap();
        c
    }

    #[test]
    fn projectors_trivial_when_d01_vanishes() {
        let c = BigradedComplex::new(1, 1, vec![vec![2, 2], vec![2, 2]]).unwrap();
        let hp = hodge_projectors(&c, &tol()).unwrap();
        for u in 0..=1 {
            for v in 0..=1 {
                assert_eq!(hp.pi[u][v], DMatrix::identity(2, 2));
                assert_eq!(hp.p[u][v].norm(), 0.0);
                assert_eq!(hp.q[u][v].norm(), 0.0);
            }
        }
    }

    #[test]
    fn projector_identities_on_models() {
        for seed in [1u64, 2] {
            let c = models::random_complex(&corpus_spec(seed)).unwrap();
            let hp = hodge_projectors(&c, &tol()).unwrap();
            assert!(hp.residual() < 1e-10, "seed {seed}: {}", hp.residual());
        }
        let c = models::kronecker_t2(&KroneckerSpec {
            alpha: golden_alpha(),
            n: 2,
        })
        .unwrap();
        let hp = hodge_projectors(&c, &tol()).unwrap();
        assert!(hp.residual() < 1e-10);
    }

    #[test]
    fn projector_rank_identities() {
        let c = models::random_complex(&corpus_spec(3)).unwrap();
        let hp = hodge_projectors(&c, &tol()).unwrap();
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let d_in = c.d01_at(u as isize, v as isize - 1);
                let d_out = c.d01_at(u as isize, v as isize);
                let rank_p = linalg::rank_kernel(&hp.p[u][v], &tol()).unwrap().0;
                let rank_q = linalg::rank_kernel(&hp.q[u][v], &tol()).unwrap().0;
                assert_eq!(rank_p, linalg::rank_kernel(&d_in, &tol()).unwrap().0);
                assert_eq!(rank_q, linalg::rank_kernel(&d_out, &tol()).unwrap().0);
            }
        }
    }

    #[test]
    fn kronecker_pi_counts_resonant_modes() {
        // Functions piece: ker Δ_0 is spanned by modes with zero leafwise
        // multiplier; for irrational slope only the constant survives, for
        // slope 0 all m = 0 modes do.
        let n = 3usize;
        let c = models::kronecker_t2(&KroneckerSpec {
            alpha: golden_alpha(),
            n,
        })
        .unwrap();
        let hp = hodge_projectors(&c, &tol()).unwrap();
        let rank_pi = linalg::rank_kernel(&hp.pi[0][0], &tol()).unwrap().0;
        assert_eq!(rank_pi, 1);
        let c0 = models::kronecker_t2(&KroneckerSpec { alpha: 0.0, n }).unwrap();
        let hp0 = hodge_projectors(&c0, &tol()).unwrap();
        let rank_pi0 = linalg::rank_kernel(&hp0.pi[0][0], &tol()).unwrap().0;
        assert_eq!(rank_pi0, 2 * n + 1);
    }

    #[test]
    fn hodge_level_one_is_leafwise_kernel() {
        let c = models::random_complex(&corpus_spec(5)).unwrap();
        let tower = hodge_tower(&c, &tol()).unwrap();
        let h1_dims = adiabatic::leafwise_kernel_dims(&c, &tol()).unwrap();
        for r in 0..=c.top_degree() {
            assert_eq!(tower.level(1).degree_dim(r), h1_dims[r], "degree {r}");
        }
    }

    #[test]
    fn hodge_dims_match_pages_and_nesting_is_exact() {
        for seed in [6u64, 7, 8] {
            let c = models::random_complex(&corpus_spec(seed)).unwrap();
            let tower = hodge_tower(&c, &tol()).unwrap();
            for e in &tower.cross_checks {
                assert!(e.pass, "seed {seed}: {} residual {}", e.name, e.residual);
            }
            let (pages, _) = all_pages(&c, &tol()).unwrap();
            for k in 2..=tower.stabilization_level() {
                for u in 0..=c.q() {
                    for v in 0..=c.p() {
                        assert_eq!(
                            tower.level(k).bases[u][v].dim(),
                            pages[k].dim(u, v),
                            "seed {seed} H_{k} at ({u},{v})"
                        );
                    }
                }
            }
            // Nesting with exact basis containment.
            for k in 1..tower.stabilization_level() {
                for u in 0..=c.q() {
                    for v in 0..=c.p() {
                        let outer = &tower.level(k).bases[u][v];
                        let inner = &tower.level(k + 1).bases[u][v];
                        assert!(outer.contains_residual(inner) < 1e-10);
                    }
                }
            }
            // Stabilized level recovers the Betti numbers.
            for r in 0..=c.top_degree() {
                assert_eq!(
                    tower.level(tower.stabilization_level()).degree_dim(r),
                    c.betti(r, &tol()).unwrap(),
                    "seed {seed} degree {r}"
                );
            }
        }
    }

    #[test]
    fn hodge_dk_squared_vanishes_and_h2_computes_d1_cohomology() {
        let c = models::random_complex(&corpus_spec(9)).unwrap();
        let tower = hodge_tower(&c, &tol()).unwrap();
        for level in tower.levels() {
            let k = level.k;
            for u in 0..=c.q() {
                for v in 0..=c.p() {
                    let d1 = &level.d_k[u][v];
                    let (tu, tv) = (u + k, v as isize - k as isize + 1);
                    if tu > c.q() || tv < 0 || tv as usize > c.p() {
                        continue;
                    }
                    let d2 = &level.d_k[tu][tv as usize];
                    if d2.nrows() > 0 && d1.nrows() > 0 && d2.ncols() == d1.nrows() {
                        assert!((d2 * d1).norm() < 1e-9, "k={k} at ({u},{v})");
                    }
                }
            }
        }
        // dim H_2^{u,v} = dim H^u(H_1^{·,v}, d_1).
        let l1 = tower.level(1);
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let d_out_rank = {
                    let m = &l1.d_k[u][v];
                    linalg::rank_kernel_scaled(m, 1.0, &tol()).unwrap().0
                };
                let d_in_rank = if u >= 1 {
                    let m = &l1.d_k[u - 1][v];
                    linalg::rank_kernel_scaled(m, 1.0, &tol()).unwrap().0
                } else {
                    0
                };
                let expected = l1.bases[u][v].dim() - d_out_rank - d_in_rank;
                assert_eq!(tower.level(2).bases[u][v].dim(), expected, "({u},{v})");
            }
        }
    }

    #[test]
    fn tower_invariant_under_uniform_gram_scaling() {
        let c = models::random_complex(&corpus_spec(10)).unwrap();
        let mut scaled = c.clone();
        for u in 0..=c.q() {
            for v in 0..=c.p() {
                let n = c.dims()[u][v];
                scaled
                    .set_gram(u, v, DMatrix::identity(n, n) * 7.5)
                    .unwrap();
            }
        }
        let t1 = hodge_tower(&c, &tol()).unwrap();
        let t2 = hodge_tower(&scaled, &tol()).unwrap();
        for k in 1..=t1.stabilization_level() {
            for u in 0..=c.q() {
                for v in 0..=c.p() {
                    let a = &t1.level(k).bases[u][v];
                    let b = &t2.level(k).bases[u][v];
                    assert_eq!(a.dim(), b.dim());
                    if a.dim() > 0 {
                        assert!(a.contains_residual(b) < tol().tol_orth);
                    }
                }
            }
        }
    }

    #[test]
    fn forman_level_one_is_hodge_level_one() {
        for seed in [11u64, 12] {
            let c = models::random_complex(&corpus_spec(seed)).unwrap();
            let hodge = hodge_tower(&c, &tol()).unwrap();
            let forman = jet_tower(&c, JetKind::Forman, 1, &tol()).unwrap();
            for r in 0..=c.top_degree() {
                let f1 = forman.degree_subspace(&c, 1, r);
                let h1 = hodge.degree_subspace(&c, 1, r);
                assert_eq!(f1.dim(), h1.dim(), "seed {seed} degree {r}");
                if f1.dim() > 0 {
                    assert!(h1.contains_residual(&f1) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn jets_trivial_when_transverse_vanishes() {
        // D10 = D2m1 = 0: all higher conditions are vacuous on harmonic
        // jets, so every level equals ker Δ_0.
        let c = leafwise_only_complex();
        let hodge = hodge_tower(&c, &tol()).unwrap();
        let forman = jet_tower(&c, JetKind::Forman, 4, &tol()).unwrap();
        let mm = jet_tower(&c, JetKind::MazzeoMelrose, 4, &tol()).unwrap();
        for k in 1..=4usize {
            for r in 0..=c.top_degree() {
                let h1 = hodge.degree_subspace(&c, 1, r);
                for (name, tower) in [("forman", &forman), ("mm", &mm)] {
                    let s = tower.degree_subspace(&c, k, r);
                    assert_eq!(s.dim(), h1.dim(), "{name} level {k} degree {r}");
                    if s.dim() > 0 {
                        assert!(h1.contains_residual(&s) < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn jet_levels_are_monotone_and_witnesses_satisfy_conditions() {
        let c = models::random_complex(&corpus_spec(13)).unwrap();
        for kind in [JetKind::Forman, JetKind::MazzeoMelrose] {
            let tower = jet_tower(&c, kind, 3, &tol()).unwrap();
            for k in 1..tower.levels.len() {
                for r in 0..=c.top_degree() {
                    let outer = &tower.levels[k - 1].by_degree[r];
                    let inner = &tower.levels[k].by_degree[r];
                    assert!(
                        outer.contains_residual(inner) < 1e-8,
                        "{kind:?} level {} ⊇ {} degree {r}",
                        k,
                        k + 1
                    );
                }
            }
            for level in &tower.levels {
                for r in 0..=c.top_degree() {
                    for jet in &level.witnesses[r] {
                        let res = jet_condition_residual(&c, kind, r, jet).unwrap();
                        assert!(res < 1e-8, "{kind:?} level {} degree {r}: {res}", level.k);
                    }
                }
            }
        }
    }

    #[test]
    fn forman_level_two_equals_split_jet_characterization() {
        // ω admits a combined jet killing both h¹ coefficients iff it has
        // separate extensions for the d_h and δ_h conditions.
        let c = models::random_complex(&corpus_spec(14)).unwrap();
        let view = c.orthonormal_view().unwrap();
        let cv = view.as_ref();
        let forman = jet_tower(cv, JetKind::Forman, 2, &tol()).unwrap();
        for r in 0..=cv.top_degree() {
            let n_r = cv.degree_dim(r);
            if n_r == 0 {
                continue;
            }
            let combined = &forman.levels[1].by_degree[r];
            let mut split: Option<Subspace> = None;
            for rows in ["d", "delta"] {
                let full = jet_system(cv, JetKind::Forman, r, 2, 2);
                // Rows of the Forman system alternate d-block then δ-block
                // per coefficient; select one side by zeroing the other.
                let up = cv.degree_dim(r + 1);
                let down = if r > 0 { cv.degree_dim(r - 1) } else { 0 };
                let block = up + down;
                let mut sub = full.clone();
                for t in 0..2usize {
                    let (start, len) = if rows == "d" {
                        (t * block + up, down)
                    } else {
                        (t * block, up)
                    };
                    for i in start..start + len {
                        for j in 0..sub.ncols() {
                            sub[(i, j)] = 0.0;
                        }
                    }
                }
                let (_, kernel) = rank_kernel(&sub, &tol()).unwrap();
                let slot0 = kernel.basis().rows(0, n_r).into_owned();
                let adm = orthonormalize_scaled(&slot0, 1.0, &tol());
                split = Some(match split {
                    None => adm,
                    Some(prev) => subspace_intersect(&prev, &adm, &tol()).unwrap(),
                });
            }
            let split = split.unwrap();
            assert_eq!(combined.dim(), split.dim(), "degree {r}");
            if combined.dim() > 0 {
                assert!(split.contains_residual(combined) < 1e-8);
            }
        }
    }

    #[test]
    fn jet_length_extension_does_not_change_admissible_space() {
        let c = models::random_complex(&corpus_spec(15)).unwrap();
        for kind in [JetKind::Forman, JetKind::MazzeoMelrose] {
            let base = jet_tower(&c, kind, 3, &tol()).unwrap();
            let extended = jet_tower_with_length(&c, kind, 3, 3, &tol()).unwrap();
            for k in 1..=3usize {
                for r in 0..=c.top_degree() {
                    let a = &base.levels[k - 1].by_degree[r];
                    let b = &extended.levels[k - 1].by_degree[r];
                    assert_eq!(a.dim(), b.dim(), "{kind:?} level {k} degree {r}");
                    if a.dim() > 0 {
                        assert!(a.contains_residual(b) < 1e-8);
                        assert!(b.contains_residual(a) < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn inclusion_chains_hold_on_models() {
        let mut complexes = vec![
            models::kronecker_t2(&KroneckerSpec {
                alpha: golden_alpha(),
                n: 2,
            })
            .unwrap(),
            models::product_bundle(&ProductSpec { n: 2 }).unwrap(),
        ];
        for seed in [16u64, 17] {
            complexes.push(models::random_complex(&corpus_spec(seed)).unwrap());
        }
        for (i, c) in complexes.iter().enumerate() {
            let k_max = 2 * (c.q() + 1);
            let hodge = hodge_tower(c, &tol()).unwrap();
            let forman = jet_tower(c, JetKind::Forman, k_max, &tol()).unwrap();
            let mm = jet_tower(c, JetKind::MazzeoMelrose, k_max, &tol()).unwrap();
            let report = inclusion_report(c, &hodge, &forman, &mm, &tol()).unwrap();
            for e in &report.entries {
                assert!(
                    e.pass,
                    "complex {i}: {} residual {:.3e} ({})",
                    e.name, e.residual, e.details
                );
            }
        }
    }

    #[test]
    fn zero_differential_towers_are_everything() {
        let c = BigradedComplex::new(1, 1, vec![vec![2, 2], vec![2, 2]]).unwrap();
        let hodge = hodge_tower(&c, &tol()).unwrap();
        let forman = jet_tower(&c, JetKind::Forman, 3, &tol()).unwrap();
        for k in 1..=3usize {
            for r in 0..=2usize {
                assert_eq!(forman.degree_subspace(&c, k, r).dim(), c.degree_dim(r));
            }
        }
        for k in 1..=hodge.stabilization_level() {
            for r in 0..=2usize {
                assert_eq!(hodge.degree_subspace(&c, k, r).dim(), c.degree_dim(r));
            }
        }
    }

    #[test]
    fn eigenspace_angles_vanish_for_block_diagonal_laplacian() {
        // D10 = D2m1 = 0: eigenvectors are h-independent, so the angle to
        // the harmonic space is zero at every h.
        let c = leafwise_only_complex();
        let grid = default_h_grid();
        let degrees: Vec<usize> = (0..=c.top_degree()).collect();
        let sw = sweep(&c, &grid, &degrees, 6, &tol()).unwrap();
        let hodge = hodge_tower(&c, &tol()).unwrap();
        for r in 0..=c.top_degree() {
            for h_idx in [0, grid.len() - 1] {
                let (angles, _) = eigenspace_convergence(
                    &c,
                    &sw,
                    &hodge,
                    hodge.stabilization_level(),
                    r,
                    h_idx,
                    &tol(),
                )
                .unwrap();
                let worst = angles.last().copied().unwrap_or(0.0);
                assert!(worst < 1e-8, "degree {r} h_idx {h_idx}: {worst}");
            }
        }
    }

    #[test]
    fn kronecker_kernel_angles_vanish() {
        // ker Δ_h is spanned by the h-independent constant modes.
        let c = models::kronecker_t2(&KroneckerSpec {
            alpha: golden_alpha(),
            n: 2,
        })
        .unwrap();
        let grid = default_h_grid();
        let sw = sweep(&c, &grid, &[1], 4, &tol()).unwrap();
        let hodge = hodge_tower(&c, &tol()).unwrap();
        for h_idx in 0..grid.len() {
            let (angles, _) = eigenspace_convergence(
                &c,
                &sw,
                &hodge,
                hodge.stabilization_level(),
                1,
                h_idx,
                &tol(),
            )
            .unwrap();
            assert!(angles.last().copied().unwrap_or(0.0) < 1e-10);
        }
    }

    #[test]
    fn liouville_sqrt2_floor_bound() {
        // √2 is badly approximable: s(N) ≥ 1/((2+2√2)·N).
        let rows =
            liouville_diagnostic(2f64.sqrt(), &[4, 8, 16, 32, 64], &tol()).unwrap();
        let c_bound = 1.0 / (2.0 + 2.0 * 2f64.sqrt());
        for row in &rows {
            assert!(!row.resonant);
            assert!(
                row.s_floor >= c_bound / row.n as f64,
                "N={}: {} < {}",
                row.n,
                row.s_floor,
                c_bound / row.n as f64
            );
        }
    }

    #[test]
    fn liouville10_floor_value_at_ten() {
        // Brute force over |m|,|n| ≤ 10: the best approximation to
        // Σ 10^{-j!} is 9α ≈ 0.990009, giving s(10) = 1 − 9α.
        let rows = liouville_diagnostic(liouville10_alpha(), &[10], &tol()).unwrap();
        let expected = 1.0 - 9.0 * liouville10_alpha();
        assert_relative_eq!(rows[0].s_floor, expected, max_relative = 1e-12);
    }

    #[test]
    fn liouville_dense_and_modewise_routes_agree() {
        for alpha in [2f64.sqrt(), golden_alpha()] {
            for n in [4usize, 8] {
                let dense = liouville_g_dense(alpha, n, &tol()).unwrap();
                let modewise = liouville_g_modewise(alpha, n);
                assert_relative_eq!(dense, modewise, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn liouville_golden_growth_is_polynomially_bounded() {
        let ns = [4usize, 8, 16, 32, 64];
        let rows = liouville_diagnostic(golden_alpha(), &ns, &tol()).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.g_norm.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!(slope < 3.0, "slope {slope}");
        assert!(slope > 0.0);
    }

    #[test]
    fn liouville_rejects_bad_input() {
        assert!(liouville_diagnostic(f64::NAN, &[4], &tol()).is_err());
        assert!(liouville_diagnostic(0.5, &[0], &tol()).is_err());
        // Rational slope: the floor collapses to zero and is flagged.
        let rows = liouville_diagnostic(0.5, &[4], &tol()).unwrap();
        assert!(rows[0].resonant);
    }
}
