//! Dense symmetric linear algebra.
//!
//! Everything the analysis formulas need rests on four primitives: a
//! deterministic symmetric eigendecomposition, an SPD solve, the PSD matrix
//! square root and a rank-truncated pseudo-inverse. Matrices are stored in
//! [`nalgebra::DMatrix`]. [`eig_sym`] runs Householder tridiagonalization
//! followed by implicit QL; [`eig_sym_jacobi`] is an independent cyclic
//! Jacobi solver with a fixed sweep order, kept as a cross-check. Both
//! return eigenvalues in non-increasing order with a fixed sign convention,
//! so the same input always yields bit-identical output.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Off-diagonal Frobenius threshold (relative to `‖M‖_F`) that ends the
/// Jacobi iteration.
pub const JACOBI_OFF_TOL: f64 = 1e-12;

/// Sweep cap for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Smallest admissible pivot, relative to the largest diagonal entry.
pub const SPD_REL_TOL: f64 = 1e-10;

/// Square symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, checking squareness and
    /// `|M[i][j] - M[j][i]| <= 1e-12 * max(1, |M[i][j]|)`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite(i * n + j));
                }
                let gap = (a - b).abs();
                if gap > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
            if !m[(j, j)].is_finite() {
                return Err(Error::NonFinite(j * n + j));
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds a matrix from the lower triangle produced by `f(i, j)` with
    /// `i >= j`, mirroring it so the result is exactly symmetric.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Copies the lower triangle of `m` over the upper one.
    pub fn symmetrize_from_lower(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(j, i)] = m[(i, j)];
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        SymMatrix::new(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.0 * x)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `a * self + b * I`.
    pub fn affine_identity(&self, a: f64, b: f64) -> SymMatrix {
        let mut m = &self.0 * a;
        for i in 0..self.dim() {
            m[(i, i)] += b;
        }
        SymMatrix(m)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Orthonormal eigenvectors (columns of `u`) and eigenvalues `s` sorted in
/// non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    u: DMatrix<f64>,
    s: DVector<f64>,
}

impl SpectralDecomp {
    /// Assembles a decomposition from parts. Columns of `u` must be
    /// orthonormal and `s` non-increasing; this is the caller's contract.
    pub fn from_parts(u: DMatrix<f64>, s: DVector<f64>) -> Result<Self> {
        check_dim(u.nrows(), s.len())?;
        check_dim(u.ncols(), s.len())?;
        Ok(SpectralDecomp { u, s })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn min_eig(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eig(&self) -> f64 {
        self.s.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Uᵀ x`: coordinates of `x` in the eigenbasis.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.u.tr_mul(x))
    }

    /// `U c`: maps eigen-coordinates back to the signal domain.
    pub fn synthesize(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), c.len())?;
        Ok(&self.u * c)
    }

    /// `U diag(gain(s_i)) Uᵀ y`.
    pub fn apply_spectral(
        &self,
        y: &DVector<f64>,
        gain: impl Fn(f64) -> f64,
    ) -> Result<DVector<f64>> {
        let mut c = self.project(y)?;
        for (ci, &si) in c.iter_mut().zip(self.s.iter()) {
            *ci *= gain(si);
        }
        self.synthesize(&c)
    }

    /// `U diag(f(s_i)) Uᵀ` as a symmetric matrix.
    pub fn spectral_matrix(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.u.clone();
        for (k, &sk) in self.s.iter().enumerate() {
            let fk = f(sk);
            scaled.column_mut(k).scale_mut(fk);
        }
        let m = scaled * self.u.transpose();
        SymMatrix::symmetrize_from_lower(m).expect("square by construction")
    }

    /// `U diag(s) Uᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        self.spectral_matrix(|s| s)
    }

    /// Leading `r` eigenvectors as an `n × r` matrix.
    pub fn leading_vectors(&self, r: usize) -> DMatrix<f64> {
        self.u.columns(0, r.min(self.dim())).into_owned()
    }

    /// Trailing `n - r` eigenvectors as an `n × (n - r)` matrix.
    pub fn trailing_vectors(&self, r: usize) -> DMatrix<f64> {
        let r = r.min(self.dim());
        self.u.columns(r, self.dim() - r).into_owned()
    }
}

/// Symmetric eigendecomposition (tridiagonal reduction + implicit QL).
///
/// Eigenvalues are returned in non-increasing order (stable on ties) and
/// every eigenvector has its first nonzero component positive.
pub fn eig_sym(m: &SymMatrix) -> Result<SpectralDecomp> {
    let n = m.dim();
    let max_iters = 1000 * n.max(1);
    let eig = nalgebra::SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, max_iters).ok_or(
        Error::NoConvergence {
            what: "symmetric QL eigensolver",
            iters: max_iters,
            residual: f64::NAN,
        },
    )?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Ok(sorted_decomp(n, &values, |k, i| eig.eigenvectors[(i, k)]))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps visit `(p, q)` pairs in row-major order of the strict upper
/// triangle. Iteration stops once the off-diagonal Frobenius norm falls
/// below `1e-12 ‖M‖_F` or after 100 sweeps. Eigenvalues are returned in
/// non-increasing order (stable on ties, so lower original index first) and
/// every eigenvector has its first nonzero component positive.
pub fn eig_sym_jacobi(m: &SymMatrix) -> Result<SpectralDecomp> {
    let n = m.dim();
    if n == 0 {
        return Ok(SpectralDecomp {
            u: DMatrix::zeros(0, 0),
            s: DVector::zeros(0),
        });
    }

    // Row-major working copies; `vt` holds eigenvectors as rows.
    let mut a: Vec<f64> = (0..n * n).map(|k| m.0[(k / n, k % n)]).collect();
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let total = m.frobenius_norm();
    let threshold = JACOBI_OFF_TOL * total;
    let off_norm = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += a[i * n + j] * a[i * n + j];
            }
        }
        (2.0 * acc).sqrt()
    };

    let mut converged = off_norm(&a) <= threshold;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Negligible element after the first few sweeps: zero it.
                if sweep > 3
                    && (app.abs() + 100.0 * apq.abs() == app.abs())
                    && (aqq.abs() + 100.0 * apq.abs() == aqq.abs())
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut vt, n, p, q);
            }
        }
        sweep += 1;
        converged = off_norm(&a) <= threshold;
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "jacobi eigensolver",
            iters: sweep,
            residual: off_norm(&a),
        });
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    Ok(sorted_decomp(n, &diag, |k, i| vt[k * n + i]))
}

/// One Jacobi rotation annihilating `a[p][q]` on a full row-major matrix.
fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[p * n + k];
        let akq = a[q * n + k];
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        a[p * n + k] = np;
        a[k * n + p] = np;
        a[q * n + k] = nq;
        a[k * n + q] = nq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    let (lo, hi) = vt.split_at_mut(q * n);
    let vp = &mut lo[p * n..p * n + n];
    let vq = &mut hi[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Sorts eigenpairs descending (stable) and fixes signs. `vec(k, i)` is
/// component `i` of the eigenvector paired with `values[k]`.
fn sorted_decomp(n: usize, values: &[f64], vec: impl Fn(usize, usize) -> f64) -> SpectralDecomp {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));

    let mut u = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        s[col] = values[k];
        let sign = (0..n)
            .map(|i| vec(k, i))
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, |v| v.signum());
        for i in 0..n {
            u[(i, col)] = sign * vec(k, i);
        }
    }
    SpectralDecomp { u, s }
}

/// Solves `M x = b` for symmetric positive definite `M` by Cholesky
/// factorization with one step of iterative refinement.
///
/// A pivot at or below `1e-10 · max_i M[i][i]` is reported as
/// [`Error::NotPositiveDefinite`].
pub fn solve_spd(m: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = SpdFactor::new(m)?;
    chol.solve(b)
}

/// A reusable Cholesky factor together with the matrix it came from.
#[derive(Debug, Clone)]
pub struct SpdFactor<'a> {
    m: &'a SymMatrix,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> SpdFactor<'a> {
    pub fn new(m: &'a SymMatrix) -> Result<Self> {
        let n = m.dim();
        let scale = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
        let tol = SPD_REL_TOL * scale;
        // nalgebra gives up at the first non-positive pivot
        let chol = nalgebra::Cholesky::new(m.0.clone())
            .ok_or(Error::NotPositiveDefinite { value: 0.0, tol })?;
        let l = chol.l_dirty();
        for i in 0..n {
            let pivot = l[(i, i)] * l[(i, i)];
            if !(pivot > tol) {
                return Err(Error::NotPositiveDefinite { value: pivot, tol });
            }
        }
        Ok(SpdFactor { m, chol })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.m.dim(), b.len())?;
        let mut x = self.chol.solve(b);
        let r = b - &self.m.0 * &x;
        x += self.chol.solve(&r);
        Ok(x)
    }
}

/// Principal square root of a positive semi-definite matrix.
///
/// Eigenvalues in `[-1e-6, 0)` are treated as round-off and clamped to
/// zero; anything more negative is rejected.
pub fn sqrt_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let d = eig_sym(m)?;
    sqrt_from_decomp(&d)
}

pub fn sqrt_from_decomp(d: &SpectralDecomp) -> Result<SymMatrix> {
    if let Some(&neg) = d.s.iter().find(|&&v| v < -1e-6) {
        return Err(Error::NegativeEigenvalue(neg));
    }
    Ok(d.spectral_matrix(|s| s.max(0.0).sqrt()))
}

/// `U₁ S₁⁻¹ U₁ᵀ` over the `r` leading eigenpairs.
pub fn pinv_truncated(m: &SymMatrix, r: usize) -> Result<SymMatrix> {
    let d = eig_sym(m)?;
    pinv_from_decomp(&d, r)
}

pub fn pinv_from_decomp(d: &SpectralDecomp, r: usize) -> Result<SymMatrix> {
    let n = d.dim();
    if r == 0 || r > n {
        return Err(Error::InvalidConfig(format!("rank {r} outside 1..={n}")));
    }
    for k in 0..r {
        if d.s[k] <= 1e-12 {
            return Err(Error::SmallEigenvalue {
                index: k,
                value: d.s[k],
            });
        }
    }
    let u1 = d.leading_vectors(r);
    let mut scaled = u1.clone();
    for k in 0..r {
        scaled.column_mut(k).scale_mut(1.0 / d.s[k]);
    }
    SymMatrix::symmetrize_from_lower(scaled * u1.transpose())
}
