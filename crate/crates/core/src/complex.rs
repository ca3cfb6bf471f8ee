//! The central data model: a finite-dimensional bigraded complex with the
//! three differential components d_{0,1}, d_{1,0}, d_{2,-1}, a block-diagonal
//! inner product, filtration subspaces by transverse degree, and structure
//! validation.
//!
//! Pieces with u > q, v > p or negative indices are zero spaces; every
//! component map touching them is an empty matrix, never an absent entry,
//! so block assembly is uniform.

use std::borrow::Cow;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Subspace, Tolerances};
use crate::report::{CheckEntry, ReportBundle};

/// Transverse degree u and tangential degree v of a bigraded piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bidegree {
    pub u: usize,
    pub v: usize,
}

impl Bidegree {
    pub fn new(u: usize, v: usize) -> Self {
        Bidegree { u, v }
    }

    pub fn total(&self) -> usize {
        self.u + self.v
    }
}

/// The three bihomogeneous differential components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffComponent {
    /// d_{0,1}: tangential derivative, bidegree shift (0, 1).
    D01,
    /// d_{1,0}: transverse derivative, bidegree shift (1, 0).
    D10,
    /// d_{2,-1}: order-zero term, bidegree shift (2, -1).
    D2m1,
}

impl DiffComponent {
    pub fn shift(&self) -> (isize, isize) {
        match self {
            DiffComponent::D01 => (0, 1),
            DiffComponent::D10 => (1, 0),
            DiffComponent::D2m1 => (2, -1),
        }
    }
}

/// Finite-dimensional bigraded complex over ℝ.
#[derive(Debug, Clone)]
pub struct BigradedComplex {
    p: usize,
    q: usize,
    dims: Vec<Vec<usize>>,
    /// None means the identity inner product on that piece.
    gram: Vec<Vec<Option<DMatrix<f64>>>>,
    d01: Vec<Vec<DMatrix<f64>>>,
    d10: Vec<Vec<DMatrix<f64>>>,
    d2m1: Vec<Vec<DMatrix<f64>>>,
}

impl BigradedComplex {
    /// A complex with the given piece dimensions and all differentials zero.
    pub fn new(p: usize, q: usize, dims: Vec<Vec<usize>>) -> Result<Self> {
        if dims.len() != q + 1 || dims.iter().any(|row| row.len() != p + 1) {
            return Err(Error::InvalidInput(format!(
                "dims table must be {}x{}",
                q + 1,
                p + 1
            )));
        }
        let dim_at = |u: isize, v: isize| -> usize {
            if u < 0 || v < 0 || u > q as isize || v > p as isize {
                0
            } else {
                dims[u as usize][v as usize]
            }
        };
        let grid_of = |shift: (isize, isize)| -> Vec<Vec<DMatrix<f64>>> {
            (0..=q)
                .map(|u| {
                    (0..=p)
                        .map(|v| {
                            let rows = dim_at(u as isize + shift.0, v as isize + shift.1);
                            DMatrix::zeros(rows, dims[u][v])
                        })
                        .collect()
                })
                .collect()
        };
        Ok(BigradedComplex {
            p,
            q,
            gram: vec![vec![None; p + 1]; q + 1],
            d01: grid_of((0, 1)),
            d10: grid_of((1, 0)),
            d2m1: grid_of((2, -1)),
            dims,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Top total degree p + q.
    pub fn top_degree(&self) -> usize {
        self.p + self.q
    }

    pub fn dims(&self) -> &Vec<Vec<usize>> {
        &self.dims
    }

    /// Piece dimension; zero outside the grid.
    pub fn dim_at(&self, u: isize, v: isize) -> usize {
        if u < 0 || v < 0 || u > self.q as isize || v > self.p as isize {
            0
        } else {
            self.dims[u as usize][v as usize]
        }
    }

    fn check_on_grid(&self, u: usize, v: usize) -> Result<()> {
        if u > self.q || v > self.p {
            return Err(Error::InvalidInput(format!(
                "bidegree ({u},{v}) outside grid q={}, p={}",
                self.q, self.p
            )));
        }
        Ok(())
    }

    fn set_component(
        &mut self,
        comp: DiffComponent,
        u: usize,
        v: usize,
        m: DMatrix<f64>,
    ) -> Result<()> {
        self.check_on_grid(u, v)?;
        let shift = comp.shift();
        let rows = self.dim_at(u as isize + shift.0, v as isize + shift.1);
        let cols = self.dims[u][v];
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::InvalidInput(format!(
                "{comp:?} at ({u},{v}) must be {rows}x{cols}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let grid = match comp {
            DiffComponent::D01 => &mut self.d01,
            DiffComponent::D10 => &mut self.d10,
            DiffComponent::D2m1 => &mut self.d2m1,
        };
        grid[u][v] = m;
        Ok(())
    }

    pub fn set_d01(&mut self, u: usize, v: usize, m: DMatrix<f64>) -> Result<()> {
        self.set_component(DiffComponent::D01, u, v, m)
    }

    pub fn set_d10(&mut self, u: usize, v: usize, m: DMatrix<f64>) -> Result<()> {
        self.set_component(DiffComponent::D10, u, v, m)
    }

    pub fn set_d2m1(&mut self, u: usize, v: usize, m: DMatrix<f64>) -> Result<()> {
        self.set_component(DiffComponent::D2m1, u, v, m)
    }

    pub fn set_gram(&mut self, u: usize, v: usize, g: DMatrix<f64>) -> Result<()> {
        self.check_on_grid(u, v)?;
        let n = self.dims[u][v];
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "gram at ({u},{v}) must be {n}x{n}"
            )));
        }
        self.gram[u][v] = Some(g);
        Ok(())
    }

    /// Component matrix, with empty matrices for off-grid source bidegrees.
    pub fn component(&self, comp: DiffComponent, u: isize, v: isize) -> Cow<'_, DMatrix<f64>> {
        if u < 0 || v < 0 || u > self.q as isize || v > self.p as isize {
            let shift = comp.shift();
            return Cow::Owned(DMatrix::zeros(self.dim_at(u + shift.0, v + shift.1), 0));
        }
        let grid = match comp {
            DiffComponent::D01 => &self.d01,
            DiffComponent::D10 => &self.d10,
            DiffComponent::D2m1 => &self.d2m1,
        };
        Cow::Borrowed(&grid[u as usize][v as usize])
    }

    pub fn d01_at(&self, u: isize, v: isize) -> Cow<'_, DMatrix<f64>> {
        self.component(DiffComponent::D01, u, v)
    }

    pub fn d10_at(&self, u: isize, v: isize) -> Cow<'_, DMatrix<f64>> {
        self.component(DiffComponent::D10, u, v)
    }

    pub fn d2m1_at(&self, u: isize, v: isize) -> Cow<'_, DMatrix<f64>> {
        self.component(DiffComponent::D2m1, u, v)
    }

    pub fn gram_at(&self, u: usize, v: usize) -> Option<&DMatrix<f64>> {
        self.gram[u][v].as_ref()
    }

    pub fn has_nontrivial_gram(&self) -> bool {
        self.gram.iter().flatten().any(|g| g.is_some())
    }

    /// Layout of total degree r as the ordered concatenation of pieces
    /// (u, r−u), u ascending.
    pub fn layout(&self, r: usize) -> GradedLayout {
        let mut pieces = Vec::new();
        let mut offset = 0usize;
        for u in 0..=self.q {
            if r < u || r - u > self.p {
                continue;
            }
            let v = r - u;
            let dim = self.dims[u][v];
            pieces.push(LayoutPiece { u, v, offset, dim });
            offset += dim;
        }
        GradedLayout {
            degree: r,
            total_dim: offset,
            pieces,
        }
    }

    pub fn degree_dim(&self, r: usize) -> usize {
        if r > self.top_degree() {
            0
        } else {
            self.layout(r).total_dim
        }
    }

    /// Total differential Ω^r → Ω^{r+1} assembled from the three components.
    pub fn total_d(&self, r: usize) -> Result<DMatrix<f64>> {
        if r > self.top_degree() {
            return Err(Error::InvalidInput(format!(
                "degree {r} out of range 0..={}",
                self.top_degree()
            )));
        }
        let src = self.layout(r);
        let tgt = self.layout(r + 1);
        let mut out = DMatrix::zeros(tgt.total_dim, src.total_dim);
        for piece in &src.pieces {
            for comp in [DiffComponent::D01, DiffComponent::D10, DiffComponent::D2m1] {
                let (du, dv) = comp.shift();
                let (tu, tv) = (piece.u as isize + du, piece.v as isize + dv);
                let Some(target) = tgt.find(tu, tv) else {
                    continue;
                };
                let m = self.component(comp, piece.u as isize, piece.v as isize);
                if m.nrows() == 0 || m.ncols() == 0 {
                    continue;
                }
                out.view_mut((target.offset, piece.offset), (m.nrows(), m.ncols()))
                    .copy_from(&*m);
            }
        }
        Ok(out)
    }

    /// Coordinate subspace of Ω^r spanned by pieces of transverse degree ≥ k.
    pub fn filtration_subspace(&self, k: usize, r: usize) -> Subspace {
        let layout = self.layout(r);
        let (offset, len) = layout.filtration_range(k);
        let indices: Vec<usize> = (offset..offset + len).collect();
        Subspace::coordinate(layout.total_dim, &indices)
    }

    /// Betti number of total degree r: dim ker d_r − rank d_{r−1}.
    pub fn betti(&self, r: usize, tol: &Tolerances) -> Result<usize> {
        if r > self.top_degree() {
            return Ok(0);
        }
        let (_, kernel) = linalg::rank_kernel(&self.total_d(r)?, tol)?;
        let rank_prev = if r == 0 {
            0
        } else {
            linalg::rank_kernel(&self.total_d(r - 1)?, tol)?.0
        };
        Ok(kernel.dim() - rank_prev)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut chi = 0i64;
        for r in 0..=self.top_degree() {
            let d = self.degree_dim(r) as i64;
            chi += if r % 2 == 0 { d } else { -d };
        }
        chi
    }

    /// Gram-induced adjoint components δ_{0,-1}, δ_{-1,0}, δ_{-2,1}.
    pub fn adjoint_components(&self) -> Result<AdjointComponents> {
        let chol = self.cholesky_factors()?;
        let adjoint_of = |comp: DiffComponent| -> Vec<Vec<DMatrix<f64>>> {
            let (du, dv) = comp.shift();
            (0..=self.q)
                .map(|u| {
                    (0..=self.p)
                        .map(|v| {
                            // δ on piece (u,v) maps to (u-du, v-dv); it is the
                            // adjoint of d from that source piece.
                            let (su, sv) = (u as isize - du, v as isize - dv);
                            let d = self.component(comp, su, sv);
                            let mut adj = d.transpose();
                            if let Some(g_tgt) = self.gram[u][v].as_ref() {
                                adj *= g_tgt;
                            }
                            if su >= 0
                                && sv >= 0
                                && su <= self.q as isize
                                && sv <= self.p as isize
                            {
                                if let Some(ch) = chol[su as usize][sv as usize].as_ref() {
                                    adj = ch.solve(&adj);
                                }
                            }
                            adj
                        })
                        .collect()
                })
                .collect()
        };
        Ok(AdjointComponents {
            delta_0m1: adjoint_of(DiffComponent::D01),
            delta_m10: adjoint_of(DiffComponent::D10),
            delta_m21: adjoint_of(DiffComponent::D2m1),
        })
    }

    #[allow(clippy::type_complexity)]
    fn cholesky_factors(&self) -> Result<Vec<Vec<Option<Cholesky<f64, nalgebra::Dyn>>>>> {
        let mut out = Vec::with_capacity(self.q + 1);
        for u in 0..=self.q {
            let mut row = Vec::with_capacity(self.p + 1);
            for v in 0..=self.p {
                match self.gram[u][v].as_ref() {
                    None => row.push(None),
                    Some(g) => {
                        let sym_res = (g - g.transpose()).norm();
                        if sym_res > 1e-12 * g.norm().max(1.0) {
                            return Err(Error::InvalidInput(format!(
                                "gram at ({u},{v}) not symmetric"
                            )));
                        }
                        let ch = Cholesky::new(g.clone()).ok_or_else(|| {
                            Error::InvalidInput(format!("gram at ({u},{v}) not positive definite"))
                        })?;
                        row.push(Some(ch));
                    }
                }
            }
            out.push(row);
        }
        Ok(out)
    }

    /// The same complex expressed in per-piece orthonormal coordinates
    /// (y = Lᵀx with gram = LLᵀ), so its inner product is the identity.
    /// Returns a borrow when the gram already is the identity.
    pub fn orthonormal_view(&self) -> Result<Cow<'_, BigradedComplex>> {
        if !self.has_nontrivial_gram() {
            return Ok(Cow::Borrowed(self));
        }
        let chol = self.cholesky_factors()?;
        let lt = |u: isize, v: isize| -> Option<DMatrix<f64>> {
            if u < 0 || v < 0 || u > self.q as isize || v > self.p as isize {
                return None;
            }
            chol[u as usize][v as usize]
                .as_ref()
                .map(|c| c.l().transpose())
        };
        let mut out = BigradedComplex::new(self.p, self.q, self.dims.clone())?;
        for u in 0..=self.q as isize {
            for v in 0..=self.p as isize {
                for comp in [DiffComponent::D01, DiffComponent::D10, DiffComponent::D2m1] {
                    let (du, dv) = comp.shift();
                    let d = self.component(comp, u, v).into_owned();
                    if d.nrows() == 0 || d.ncols() == 0 {
                        continue;
                    }
                    // d' = Lᵀ_target · d · L⁻ᵀ_source
                    let mut m = d;
                    if let Some(lt_tgt) = lt(u + du, v + dv) {
                        m = lt_tgt * m;
                    }
                    if let Some(ch) = chol[u as usize][v as usize].as_ref() {
                        // m · L⁻ᵀ via the lower-triangular solve L·X = mᵀ.
                        let mt = m.transpose();
                        let solved = ch.l().solve_lower_triangular(&mt).ok_or_else(|| {
                            Error::InternalCheckFailed(
                                "singular Cholesky factor in orthonormal view".into(),
                            )
                        })?;
                        m = solved.transpose();
                    }
                    out.set_component(comp, u as usize, v as usize, m)?;
                }
            }
        }
        Ok(Cow::Owned(out))
    }

    /// Structure validation: the five component identities, gram positive
    /// definiteness, finiteness, and d² = 0 on every total degree.
    pub fn validate(&self, tol: &Tolerances) -> Result<ReportBundle> {
        let mut report =
            ReportBundle::new("check", serde_json::json!({ "p": self.p, "q": self.q }));
        for (grid, name) in [
            (&self.d01, "d01"),
            (&self.d10, "d10"),
            (&self.d2m1, "d2m1"),
        ] {
            for row in grid.iter() {
                for m in row.iter() {
                    if !m.iter().all(|x| x.is_finite()) {
                        return Err(Error::InvalidInput(format!(
                            "{name} has non-finite entries"
                        )));
                    }
                }
            }
        }
        for u in 0..=self.q {
            for v in 0..=self.p {
                if let Some(g) = self.gram[u][v].as_ref() {
                    let ok = Cholesky::new(g.clone()).is_some();
                    report.push(
                        CheckEntry::boolean(format!("gram_spd @ ({u},{v})"), ok)
                            .with_details("symmetric positive definite"),
                    );
                }
            }
        }

        for u in 0..=self.q as isize {
            for v in 0..=self.p as isize {
                let d01 = self.d01_at(u, v);
                let d10 = self.d10_at(u, v);
                let d2m1 = self.d2m1_at(u, v);
                let scale = |ms: &[&DMatrix<f64>]| -> f64 {
                    ms.iter().map(|m| m.norm()).fold(1.0f64, f64::max)
                };

                let a = self.d01_at(u, v + 1).as_ref() * d01.as_ref();
                report.push(CheckEntry::new(
                    format!("d01_squared @ ({u},{v})"),
                    a.norm(),
                    tol.tol_eq * scale(&[&d01]).powi(2),
                ));

                let a = self.d2m1_at(u + 2, v - 1).as_ref() * d2m1.as_ref();
                report.push(CheckEntry::new(
                    format!("d2m1_squared @ ({u},{v})"),
                    a.norm(),
                    tol.tol_eq * scale(&[&d2m1]).powi(2),
                ));

                let a = self.d01_at(u + 1, v).as_ref() * d10.as_ref()
                    + self.d10_at(u, v + 1).as_ref() * d01.as_ref();
                report.push(CheckEntry::new(
                    format!("anticommute_d01_d10 @ ({u},{v})"),
                    a.norm(),
                    tol.tol_eq * scale(&[&d01, &d10]).powi(2),
                ));

                let a = self.d10_at(u + 2, v - 1).as_ref() * d2m1.as_ref()
                    + self.d2m1_at(u + 1, v).as_ref() * d10.as_ref();
                report.push(CheckEntry::new(
                    format!("anticommute_d10_d2m1 @ ({u},{v})"),
                    a.norm(),
                    tol.tol_eq * scale(&[&d10, &d2m1]).powi(2),
                ));

                let a = self.d10_at(u + 1, v).as_ref() * d10.as_ref()
                    + self.d01_at(u + 2, v - 1).as_ref() * d2m1.as_ref()
                    + self.d2m1_at(u, v + 1).as_ref() * d01.as_ref();
                report.push(CheckEntry::new(
                    format!("d10_squared_plus_mixed @ ({u},{v})"),
                    a.norm(),
                    tol.tol_eq * scale(&[&d01, &d10, &d2m1]).powi(2),
                ));
            }
        }

        for r in 0..self.top_degree() {
            let d_r = self.total_d(r)?;
            let d_r1 = self.total_d(r + 1)?;
            let composed = &d_r1 * &d_r;
            report.push(CheckEntry::new(
                format!("total_d_squared @ degree {r}"),
                composed.norm(),
                tol.tol_eq * d_r.norm().max(1.0) * d_r1.norm().max(1.0),
            ));
        }
        Ok(report)
    }
}

/// Adjoint components δ_{-i,-j} = d_{i,j}^* computed from the gram matrices.
/// Indexed by the *source* bidegree of the δ map: `delta_0m1[u][v]` maps
/// piece (u,v) to (u,v-1), and so on.
#[derive(Debug, Clone)]
pub struct AdjointComponents {
    pub delta_0m1: Vec<Vec<DMatrix<f64>>>,
    pub delta_m10: Vec<Vec<DMatrix<f64>>>,
    pub delta_m21: Vec<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone, Copy)]
pub struct LayoutPiece {
    pub u: usize,
    pub v: usize,
    pub offset: usize,
    pub dim: usize,
}

/// Ordered concatenation of the bigraded pieces of one total degree,
/// u ascending; fixes the embedding of pieces into Ω^r.
#[derive(Debug, Clone)]
pub struct GradedLayout {
    pub degree: usize,
    pub total_dim: usize,
    pub pieces: Vec<LayoutPiece>,
}

impl GradedLayout {
    pub fn find(&self, u: isize, v: isize) -> Option<&LayoutPiece> {
        if u < 0 || v < 0 {
            return None;
        }
        self.pieces
            .iter()
            .find(|piece| piece.u == u as usize && piece.v == v as usize)
    }

    /// Contiguous coordinate range of the pieces with transverse degree ≥ k.
    pub fn filtration_range(&self, k: usize) -> (usize, usize) {
        let mut offset = self.total_dim;
        let mut len = 0usize;
        for piece in &self.pieces {
            if piece.u >= k {
                offset = offset.min(piece.offset);
                len += piece.dim;
            }
        }
        if len == 0 {
            (self.total_dim, 0)
        } else {
            (offset, len)
        }
    }

    /// Extract the (u,v)-block rows of a vectorized degree-r object.
    pub fn piece_rows(&self, m: &DMatrix<f64>, u: usize, v: usize) -> Option<DMatrix<f64>> {
        let piece = self.find(u as isize, v as isize)?;
        Some(m.rows(piece.offset, piece.dim).into_owned())
    }

    /// Injection matrix of the (u,v) piece into the degree coordinates.
    pub fn inject_piece(&self, u: usize, v: usize) -> Option<DMatrix<f64>> {
        let piece = self.find(u as isize, v as isize)?;
        let mut m = DMatrix::zeros(self.total_dim, piece.dim);
        for j in 0..piece.dim {
            m[(piece.offset + j, j)] = 1.0;
        }
        Some(m)
    }
}
