//! Dense linear algebra with an explicit tolerance policy.
//!
//! Rank decisions use a relative singular-value cutoff, orthonormal bases
//! carry a deterministic sign convention, and symmetric matrices with exact
//! zero coupling are solved block-by-block so that well-separated eigenvalue
//! clusters keep their relative accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thresholds controlling every rank, orthogonality and identity decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank decisions.
    pub tol_rank: f64,
    /// Allowed orthonormality residual ‖BᵀB − I‖.
    pub tol_orth: f64,
    /// Allowed residual for matrix identities, relative to operator norms.
    pub tol_eq: f64,
    /// Allowed eigen-residual ‖Sv − λv‖ relative to ‖S‖.
    pub tol_eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_rank: 1e-10,
            tol_orth: 1e-8,
            tol_eq: 1e-8,
            tol_eig: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if self.tol_rank > 0.0 && self.tol_orth > 0.0 && self.tol_eq > 0.0 && self.tol_eig > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "tolerances must be strictly positive".into(),
            ))
        }
    }
}

/// A linear subspace of ℝⁿ stored as an orthonormal column basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal; checked against `tol`.
    pub fn from_orthonormal(basis: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let ambient_dim = basis.nrows();
        let s = Subspace { ambient_dim, basis };
        let res = s.orthonormality_residual();
        if res > tol.tol_orth {
            return Err(Error::InvalidInput(format!(
                "basis not orthonormal: residual {res:.3e} > {:.3e}",
                tol.tol_orth
            )));
        }
        Ok(s)
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Coordinate subspace spanned by the unit vectors `indices`.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(ambient_dim, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            basis[(i, j)] = 1.0;
        }
        Subspace { ambient_dim, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn orthonormality_residual(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let gram = self.basis.transpose() * &self.basis;
        (gram - DMatrix::identity(self.dim(), self.dim())).norm()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// ‖(I − P)M‖ where P projects onto the subspace: how far the columns of
    /// `m` stick out of the subspace.
    pub fn residual_outside(&self, m: &DMatrix<f64>) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * m);
        (m - proj).norm()
    }

    /// Max projection residual of `other`'s basis outside `self`, normalized
    /// per column; ≈0 iff `other` ⊆ `self`.
    pub fn contains_residual(&self, other: &Subspace) -> f64 {
        if other.dim() == 0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for j in 0..other.dim() {
            let col = other.basis.column(j).into_owned();
            let r = (&col - self.project(&col)).norm();
            worst = worst.max(r);
        }
        worst
    }

    /// Applies a linear map to the subspace and re-orthonormalizes the image.
    pub fn map(&self, m: &DMatrix<f64>, tol: &Tolerances) -> Subspace {
        orthonormalize(&(m * &self.basis), tol)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Flips column signs so the entry of largest magnitude is positive.
/// Fixes the sign ambiguity of SVD/eigen bases for reproducible output.
fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m.nrows() > 0 && m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

struct SortedSvd {
    /// rows × k left factor, k = min(rows, cols).
    u: DMatrix<f64>,
    /// Singular values, descending.
    sigma: Vec<f64>,
    /// cols × k right factor.
    v: DMatrix<f64>,
}

/// Thin SVD with singular values sorted descending. Wide matrices are
/// factored through their transpose: the tall orientation is the accurate
/// path of the underlying solver.
fn full_svd_sorted(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = (m.nrows(), m.ncols());
    let wide = rows < cols;
    let svd = if wide {
        m.transpose().svd(true, true)
    } else {
        m.clone().svd(true, true)
    };
    let u_raw = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    let mut sigma = Vec::with_capacity(k);
    for (out, &idx) in order.iter().enumerate() {
        sigma.push(svd.singular_values[idx]);
        if wide {
            // m = (v_raw) Σ (u_raw)ᵀ with the factors of mᵀ.
            for i in 0..rows {
                u[(i, out)] = v_t[(idx, i)];
            }
            for i in 0..cols {
                v[(i, out)] = u_raw[(i, idx)];
            }
        } else {
            for i in 0..rows {
                u[(i, out)] = u_raw[(i, idx)];
            }
            for i in 0..cols {
                v[(i, out)] = v_t[(idx, i)];
            }
        }
    }
    SortedSvd { u, sigma, v }
}

/// Orthonormal basis of the span of the leading `rank` pivoted columns,
/// via Householder QR with column pivoting. Householder orthonormalization
/// keeps the span accurate to machine precision, which the singular-vector
/// factors of the iterative SVD do not guarantee for clustered spectra.
fn range_basis(a: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let qr = a.clone().col_piv_qr();
    let q = qr.q();
    q.columns(0, rank.min(q.ncols())).into_owned()
}

/// Orthonormal basis of the orthogonal complement of `w`'s columns
/// (assumed orthonormal). The complement projector has a perfectly
/// separated spectrum, so the symmetric eigensolver recovers it exactly.
fn complement_of_range(w: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = w.nrows();
    let k = w.ncols();
    if k >= n {
        return Vec::new();
    }
    let proj = DMatrix::identity(n, n) - w * w.transpose();
    let eig = nalgebra::SymmetricEigen::new(proj);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    order
        .iter()
        .take(n - k)
        .map(|&idx| eig.eigenvectors.column(idx).into_owned())
        .collect()
}

/// Kernel of a block: orthogonal complement of its row space.
fn block_kernel(m: &DMatrix<f64>, rank: usize) -> Vec<DVector<f64>> {
    let n = m.ncols();
    if rank == 0 {
        return (0..n)
            .map(|j| {
                let mut v = DVector::zeros(n);
                v[j] = 1.0;
                v
            })
            .collect();
    }
    let row_space = range_basis(&m.transpose(), rank);
    complement_of_range(&row_space)
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sigma = m.clone().singular_values().as_slice().to_vec();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sigma
}

/// Union-find over column indices; rows connect every column they touch.
/// Splitting a matrix into its exactly-decoupled blocks keeps each block's
/// singular values accurate relative to that block's own scale.
fn column_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.ncols();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..m.nrows() {
        let mut first: Option<usize> = None;
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                match first {
                    None => first = Some(j),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, j));
                        if a != b {
                            parent[b.max(a)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group: std::collections::BTreeMap<usize, usize> = Default::default();
    for j in 0..n {
        let r = find(&mut parent, j);
        let g = *root_to_group.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(j);
    }
    groups
}

/// Components of the symmetric coupling graph: i ~ j iff S\[i,j\] ≠ 0.
fn symmetric_components(s: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = s.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if s[(i, j)] != 0.0 || s[(j, i)] != 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group: std::collections::BTreeMap<usize, usize> = Default::default();
    for j in 0..n {
        let r = find(&mut parent, j);
        let g = *root_to_group.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(j);
    }
    groups
}

fn rows_touching(m: &DMatrix<f64>, cols: &[usize]) -> Vec<usize> {
    let mut rows = Vec::new();
    'outer: for i in 0..m.nrows() {
        for &j in cols {
            if m[(i, j)] != 0.0 {
                rows.push(i);
                continue 'outer;
            }
        }
    }
    rows
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Rank and kernel of `m` with a relative singular-value cutoff.
///
/// The kernel basis is orthonormal and deterministic; rank + dim ker = ncols.
pub fn rank_kernel(m: &DMatrix<f64>, tol: &Tolerances) -> Result<(usize, Subspace)> {
    rank_kernel_scaled(m, 0.0, tol)
}

/// [`rank_kernel`] with a scale floor in the cutoff, see
/// [`orthonormalize_scaled`].
pub fn rank_kernel_scaled(
    m: &DMatrix<f64>,
    scale_floor: f64,
    tol: &Tolerances,
) -> Result<(usize, Subspace)> {
    check_finite(m)?;
    let n = m.ncols();
    if n == 0 {
        return Ok((0, Subspace::zero(0)));
    }
    if m.nrows() == 0 {
        return Ok((0, Subspace::full(n)));
    }
    let components = column_components(m);
    // First pass: singular values of every nontrivial block, tracking the
    // global scale so the cutoff is uniform across blocks.
    let mut factored: Vec<(Vec<usize>, Option<(DMatrix<f64>, Vec<f64>)>)> = Vec::new();
    let mut sigma_max: f64 = 0.0;
    for cols in components {
        let rows = rows_touching(m, &cols);
        if rows.is_empty() {
            factored.push((cols, None));
            continue;
        }
        let block = submatrix(m, &rows, &cols);
        let sigma = sorted_singular_values(&block);
        if let Some(&s) = sigma.first() {
            sigma_max = sigma_max.max(s);
        }
        factored.push((cols, Some((block, sigma))));
    }
    let cutoff = tol.tol_rank * sigma_max.max(scale_floor);
    let mut rank = 0usize;
    let mut kernel_cols: Vec<DVector<f64>> = Vec::new();
    for (cols, block) in factored {
        match block {
            None => {
                // Columns not hit by any row are free kernel directions.
                for &j in &cols {
                    let mut v = DVector::zeros(n);
                    v[j] = 1.0;
                    kernel_cols.push(v);
                }
            }
            Some((block, sigma)) => {
                let local_rank = sigma.iter().filter(|&&s| s > cutoff).count();
                rank += local_rank;
                for vec in block_kernel(&block, local_rank) {
                    let mut v = DVector::zeros(n);
                    for (local, &j) in cols.iter().enumerate() {
                        v[j] = vec[local];
                    }
                    kernel_cols.push(v);
                }
            }
        }
    }
    let mut basis = DMatrix::zeros(n, kernel_cols.len());
    for (j, col) in kernel_cols.iter().enumerate() {
        basis.set_column(j, col);
    }
    fix_column_signs(&mut basis);
    Ok((
        rank,
        Subspace {
            ambient_dim: n,
            basis,
        },
    ))
}

/// Orthonormal basis of the column space of `v`. Rank-deficient input is
/// fine; the result has rank-many columns.
pub fn orthonormalize(v: &DMatrix<f64>, tol: &Tolerances) -> Subspace {
    orthonormalize_scaled(v, 0.0, tol)
}

/// Like [`orthonormalize`] but the rank cutoff is `tol_rank · max(σ_max,
/// scale_floor)`. Passing the natural scale of the input (1 for images of
/// orthonormal bases) keeps pure-roundoff columns from being kept as rank.
pub fn orthonormalize_scaled(v: &DMatrix<f64>, scale_floor: f64, tol: &Tolerances) -> Subspace {
    let ambient = v.nrows();
    if v.ncols() == 0 || ambient == 0 || v.iter().all(|&x| x == 0.0) {
        return Subspace::zero(ambient);
    }
    let sigma = sorted_singular_values(v);
    let cutoff = tol.tol_rank * sigma[0].max(scale_floor);
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let mut basis = range_basis(v, rank);
    fix_column_signs(&mut basis);
    Subspace {
        ambient_dim: ambient,
        basis,
    }
}

fn check_same_ambient(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim == b.ambient_dim {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "ambient dimension mismatch: {} vs {}",
            a.ambient_dim, b.ambient_dim
        )))
    }
}

/// Span of A + B.
pub fn subspace_sum(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace> {
    check_same_ambient(a, b)?;
    let mut stacked = DMatrix::zeros(a.ambient_dim, a.dim() + b.dim());
    stacked.view_mut((0, 0), (a.ambient_dim, a.dim())).copy_from(&a.basis);
    stacked
        .view_mut((0, a.dim()), (b.ambient_dim, b.dim()))
        .copy_from(&b.basis);
    Ok(orthonormalize(&stacked, tol))
}

/// A ∩ B via the kernel of the stacked complementary projections.
pub fn subspace_intersect(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace> {
    check_same_ambient(a, b)?;
    let n = a.ambient_dim;
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Subspace::zero(n));
    }
    let id = DMatrix::identity(n, n);
    let pa = &a.basis * a.basis.transpose();
    let pb = &b.basis * b.basis.transpose();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(&id - pa));
    stacked.view_mut((n, 0), (n, n)).copy_from(&(&id - pb));
    // Projectors have unit scale, so floor the cutoff at 1: a stack of pure
    // roundoff must read as the zero map.
    let (_, kernel) = rank_kernel_scaled(&stacked, 1.0, tol)?;
    Ok(kernel)
}

/// Orthogonal complement of A inside B, so that B = A ⊕ C orthogonally.
/// Requires A ⊆ B (checked by projection residual).
pub fn ortho_complement_in(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace> {
    check_same_ambient(a, b)?;
    let res = b.contains_residual(a);
    if res > tol.tol_orth.max(1e3 * tol.tol_rank) {
        return Err(Error::PreconditionViolated(format!(
            "A is not contained in B: projection residual {res:.3e}"
        )));
    }
    if a.dim() == 0 {
        return Ok(b.clone());
    }
    // (I − P_A) applied to B's basis keeps the span of the complement; B's
    // columns are unit vectors, so the cutoff floors at scale 1.
    let proj = &a.basis * (a.basis.transpose() * &b.basis);
    Ok(orthonormalize_scaled(&(&b.basis - proj), 1.0, tol))
}

/// Eigendecomposition of a symmetric matrix: values ascending, orthonormal
/// vectors with fixed signs. Exactly-decoupled blocks are solved separately.
pub fn sym_eig(s: &DMatrix<f64>, tol: &Tolerances) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(s)?;
    if s.nrows() != s.ncols() {
        return Err(Error::InvalidInput(format!(
            "matrix not square: {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let norm = s.norm();
    let asym = (s - s.transpose()).norm();
    if asym > tol.tol_eq * norm.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix not symmetric: residual {asym:.3e}"
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for cols in symmetric_components(&sym) {
        if cols.len() == 1 {
            let j = cols[0];
            let mut v = DVector::zeros(n);
            v[j] = 1.0;
            pairs.push((sym[(j, j)], v));
            continue;
        }
        let block = submatrix(&sym, &cols, &cols);
        let eig = nalgebra::SymmetricEigen::new(block);
        for k in 0..cols.len() {
            let mut v = DVector::zeros(n);
            for (local, &j) in cols.iter().enumerate() {
                v[j] = eig.eigenvectors[(local, k)];
            }
            pairs.push((eig.eigenvalues[k], v));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(j, v);
    }
    fix_column_signs(&mut vectors);
    Ok((values, vectors))
}

/// Minimum-norm least-squares solution of Ax = b and its residual ‖Ax − b‖.
pub fn min_norm_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: &Tolerances,
) -> Result<(DVector<f64>, f64)> {
    check_finite(a)?;
    if a.nrows() != b.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok((DVector::zeros(0), b.norm()));
    }
    if a.nrows() == 0 {
        return Ok((DVector::zeros(a.ncols()), 0.0));
    }
    let svd = full_svd_sorted(a);
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = tol.tol_rank * sigma_max;
    let mut x = DVector::zeros(a.ncols());
    for k in 0..svd.sigma.len() {
        let s = svd.sigma[k];
        if s > cutoff {
            let coef = svd.u.column(k).dot(b);
            x += svd.v.column(k) * (coef / s);
        }
    }
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Column-wise minimum-norm solve with a matrix right-hand side; returns the
/// stacked solution.
pub fn min_norm_solve_mat(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, f64)> {
    let mut x = DMatrix::zeros(a.ncols(), b.ncols());
    let mut worst = 0.0f64;
    for j in 0..b.ncols() {
        let (xj, res) = min_norm_solve(a, &b.column(j).into_owned(), tol)?;
        x.set_column(j, &xj);
        worst = worst.max(res);
    }
    Ok((x, worst))
}

/// Singular values of `m`, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    sorted_singular_values(m)
}

/// Principal angles (radians, ascending) between two subspaces, computed
/// from the singular values of AᵀB.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    check_same_ambient(a, b)?;
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Vec::new());
    }
    let prod = a.basis.transpose() * &b.basis;
    let svd = full_svd_sorted(&prod);
    let k = a.dim().min(b.dim());
    let mut angles: Vec<f64> = svd
        .sigma
        .iter()
        .take(k)
        .map(|&s| s.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(angles)
}

/// Inertia-style count of eigenvalues ≤ `lambda` of a symmetric matrix via
/// LDLᵀ with diagonal pivoting; independent of the SVD/eigen route.
pub fn count_eigs_below(s: &DMatrix<f64>, lambda: f64) -> usize {
    let n = s.nrows();
    let mut a = s.clone();
    for i in 0..n {
        a[(i, i)] -= lambda;
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut negatives = 0usize;
    let scale = s.norm().max(1.0);
    while let Some(pos) = {
        // Pick the remaining index with the largest |diagonal|.
        let mut best: Option<(usize, f64)> = None;
        for (k, &i) in active.iter().enumerate() {
            let v = a[(i, i)].abs();
            if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    } {
        let i = active.swap_remove(pos);
        let d = a[(i, i)];
        if d.abs() <= 1e-14 * scale {
            // Semi-definite edge: treat as zero pivot, not below lambda.
            continue;
        }
        if d < 0.0 {
            negatives += 1;
        }
        for &r in &active {
            let f = a[(r, i)] / d;
            for &c in &active {
                let v = a[(i, c)];
                a[(r, c)] -= f * v;
            }
        }
        if active.is_empty() {
            break;
        }
    }
    negatives
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn rank_kernel_identity() {
        let m = DMatrix::<f64>::identity(3, 3);
        let (rank, kernel) = rank_kernel(&m, &tol()).unwrap();
        assert_eq!(rank, 3);
        assert_eq!(kernel.dim(), 0);
    }

    #[test]
    fn rank_kernel_zero_map() {
        let m = DMatrix::<f64>::zeros(2, 4);
        let (rank, kernel) = rank_kernel(&m, &tol()).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(kernel.dim(), 4);
        assert!(kernel.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn rank_kernel_rank_one() {
        // Hand-computed SVD: singular values (2, 0), kernel (1,-1)/sqrt(2).
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        let (rank, kernel) = rank_kernel(&m, &tol()).unwrap();
        assert_eq!(rank, 1);
        assert_eq!(kernel.dim(), 1);
        let v = kernel.basis().column(0);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(v[0].abs(), inv_sqrt2, epsilon = 1e-12);
        assert_relative_eq!(v[1].abs(), inv_sqrt2, epsilon = 1e-12);
        assert_relative_eq!(v[0] + v[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_kernel_postcondition_mv_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = DMatrix::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
            let (rank, kernel) = rank_kernel(&m, &tol()).unwrap();
            assert_eq!(rank + kernel.dim(), 8);
            for j in 0..kernel.dim() {
                let v = kernel.basis().column(j).into_owned();
                assert!((&m * v).norm() <= tol().tol_rank * m.norm() * 10.0);
            }
        }
    }

    #[test]
    fn rank_kernel_rejects_nan() {
        let m = dmatrix![f64::NAN, 0.0; 0.0, 1.0];
        assert!(matches!(
            rank_kernel(&m, &tol()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_span() {
        let m = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let s = orthonormalize(&m, &tol());
        assert_eq!(s.dim(), 2);
        assert!(s.orthonormality_residual() < tol().tol_orth);
        assert!(s.residual_outside(&m) < 1e-12);
    }

    #[test]
    fn orthonormalize_single_column() {
        let m = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let s = orthonormalize(&m, &tol());
        assert_eq!(s.dim(), 1);
        assert_relative_eq!(s.basis()[(0, 0)], 0.6, epsilon = 1e-12);
        assert_relative_eq!(s.basis()[(1, 0)], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_collapses_parallel_columns() {
        let m = dmatrix![1.0, 2.0; 2.0, 4.0];
        let s = orthonormalize(&m, &tol());
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn subspace_ops_trivial_cases() {
        let a = Subspace::coordinate(2, &[0]);
        let sum = subspace_sum(&a, &a, &tol()).unwrap();
        let int = subspace_intersect(&a, &a, &tol()).unwrap();
        let comp = ortho_complement_in(&a, &a, &tol()).unwrap();
        assert_eq!(sum.dim(), 1);
        assert_eq!(int.dim(), 1);
        assert_eq!(comp.dim(), 0);

        let b = Subspace::coordinate(2, &[1]);
        let sum = subspace_sum(&a, &b, &tol()).unwrap();
        let int = subspace_intersect(&a, &b, &tol()).unwrap();
        assert_eq!(sum.dim(), 2);
        assert_eq!(int.dim(), 0);
    }

    #[test]
    fn complement_by_gram_schmidt() {
        // A = span(e1), B = span(e1, e1+e2): complement is span(e2).
        let a = Subspace::coordinate(2, &[0]);
        let b = orthonormalize(&dmatrix![1.0, 1.0; 0.0, 1.0], &tol());
        let c = ortho_complement_in(&a, &b, &tol()).unwrap();
        assert_eq!(c.dim(), 1);
        assert_relative_eq!(c.basis()[(0, 0)].abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(c.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn complement_requires_containment() {
        let a = Subspace::coordinate(2, &[0]);
        let b = Subspace::coordinate(2, &[1]);
        assert!(matches!(
            ortho_complement_in(&a, &b, &tol()),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn sum_rejects_ambient_mismatch() {
        let a = Subspace::zero(2);
        let b = Subspace::zero(3);
        assert!(matches!(
            subspace_sum(&a, &b, &tol()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sym_eig_diagonal() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 3.0]));
        let (values, _) = sym_eig(&s, &tol()).unwrap();
        assert_eq!(values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sym_eig_off_diagonal() {
        // Characteristic polynomial λ² − 1: eigenvalues ∓1.
        let s = dmatrix![0.0, 1.0; 1.0, 0.0];
        let (values, vectors) = sym_eig(&s, &tol()).unwrap();
        assert_relative_eq!(values[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(values[1], 1.0, epsilon = 1e-12);
        let recon = &vectors
            * DMatrix::from_diagonal(&DVector::from_vec(values.clone()))
            * vectors.transpose();
        assert!((recon - s).norm() < 1e-12);
    }

    #[test]
    fn sym_eig_zero_matrix() {
        let s = DMatrix::<f64>::zeros(4, 4);
        let (values, _) = sym_eig(&s, &tol()).unwrap();
        assert!(values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let s = dmatrix![0.0, 1.0; 0.0, 0.0];
        assert!(matches!(sym_eig(&s, &tol()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sym_eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 3, 6, 10] {
            let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let s = (&raw + raw.transpose()) * 0.5;
            let (values, vectors) = sym_eig(&s, &tol()).unwrap();
            let recon = &vectors
                * DMatrix::from_diagonal(&DVector::from_vec(values.clone()))
                * vectors.transpose();
            assert!((recon - &s).norm() <= 10.0 * tol().tol_eig * s.norm().max(1.0));
            for w in values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn min_norm_invertible_exact() {
        let a = dmatrix![2.0, 0.0; 0.0, 4.0];
        let b = DVector::from_vec(vec![2.0, 8.0]);
        let (x, res) = min_norm_solve(&a, &b, &tol()).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn min_norm_zero_matrix() {
        let a = DMatrix::<f64>::zeros(2, 3);
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let (x, res) = min_norm_solve(&a, &b, &tol()).unwrap();
        assert!(x.norm() < 1e-14);
        assert_relative_eq!(res, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_row_vector() {
        // Pseudoinverse of [1 1]: x = (1, 1) solves x1 + x2 = 2 with least norm.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, res) = min_norm_solve(&a, &b, &tol()).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn principal_angles_extremes() {
        let a = Subspace::coordinate(3, &[0]);
        let b = Subspace::coordinate(3, &[0]);
        let angles = principal_angles(&a, &b).unwrap();
        assert!(angles[0] < 1e-8);
        let c = Subspace::coordinate(3, &[1]);
        let angles = principal_angles(&a, &c).unwrap();
        assert_relative_eq!(angles[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn count_eigs_below_matches_sym_eig() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let n = rng.random_range(1..7);
            let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let s = (&raw + raw.transpose()) * 0.5;
            let (values, _) = sym_eig(&s, &tol()).unwrap();
            let lambda = rng.random_range(-2.0..2.0);
            let expected = values.iter().filter(|&&v| v <= lambda).count();
            assert_eq!(count_eigs_below(&s, lambda + 1e-12), expected);
        }
    }

    fn random_subspace(rng: &mut ChaCha8Rng, ambient: usize, dim: usize) -> Subspace {
        let m = DMatrix::from_fn(ambient, dim, |_, _| rng.random_range(-1.0..1.0));
        orthonormalize(&m, &tol())
    }

    #[test]
    fn sum_intersect_dimension_formula_seeded() {
        // dim(A+B) + dim(A∩B) = dim A + dim B over 100 seeded trials.
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ambient = rng.random_range(2..8);
            let da = rng.random_range(0..=ambient);
            let db = rng.random_range(0..=ambient);
            let a = random_subspace(&mut rng, ambient, da);
            let b = random_subspace(&mut rng, ambient, db);
            let sum = subspace_sum(&a, &b, &tol()).unwrap();
            let int = subspace_intersect(&a, &b, &tol()).unwrap();
            assert_eq!(sum.dim() + int.dim(), a.dim() + b.dim());
        }
    }

    #[test]
    fn determinism_same_input_same_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(6, 9, |_, _| rng.random_range(-1.0..1.0));
        let (r1, k1) = rank_kernel(&m, &tol()).unwrap();
        let (r2, k2) = rank_kernel(&m, &tol()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(k1.basis(), k2.basis());
        let s = (&m * m.transpose()) * 0.5 + (&m * m.transpose()).transpose() * 0.5;
        let (v1, w1) = sym_eig(&s, &tol()).unwrap();
        let (v2, w2) = sym_eig(&s, &tol()).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(w1, w2);
    }

    proptest! {
        #[test]
        fn rank_equals_rank_of_transpose(rows in 1usize..7, cols in 1usize..7, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Mix in low-rank structure so the property sees nontrivial kernels.
            let r = rng.random_range(0..=rows.min(cols));
            let mut m = DMatrix::zeros(rows, cols);
            for _ in 0..r {
                let u = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0f64));
                let v = DVector::from_fn(cols, |_, _| rng.random_range(-1.0..1.0f64));
                m += u * v.transpose();
            }
            let (rank_m, _) = rank_kernel(&m, &tol()).unwrap();
            let (rank_mt, _) = rank_kernel(&m.transpose(), &tol()).unwrap();
            prop_assert_eq!(rank_m, rank_mt);
        }

        #[test]
        fn min_norm_is_least_squares(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.random_range(1..6);
            let cols = rng.random_range(1..6);
            let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0f64));
            let b = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0f64));
            let (x, res) = min_norm_solve(&a, &b, &tol()).unwrap();
            // Perturbing x in any direction must not reduce the residual.
            for _ in 0..5 {
                let dx = DVector::from_fn(cols, |_, _| rng.random_range(-1e-3..1e-3f64));
                let res2 = (&a * (&x + dx) - &b).norm();
                prop_assert!(res <= res2 + 1e-9);
            }
        }
    }
}
