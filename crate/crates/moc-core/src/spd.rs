//! Spectral calculus on symmetric positive-definite matrices.
//!
//! Everything here goes through one eigendecomposition of the input: the
//! matrix logarithm `log(C) = U ln(Λ) Uᵀ`, the squared log-Euclidean distance
//! `‖log(A+εI) − log(B+εI)‖²_F`, and its analytic gradient via the
//! Daleckii-Krein form of the Fréchet derivative of `log`, i.e. the first
//! divided differences of `ln` on eigenvalue pairs.
//!
//! All arithmetic is double precision; eigenvalue logs amplify
//! single-precision noise too much for gradient checks at 1e-6.
//!
//! The eigensolver is nalgebra's symmetric QL with implicit shifts
//! ([`nalgebra::linalg::SymmetricEigen`]), post-processed into a deterministic
//! convention: eigenvalues ascending, each eigenvector's first nonzero
//! component positive.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues below `PD_RATIO_THRESHOLD * max_eigval` fail the
/// positive-definiteness check. Explicit failure beats silent clamping.
pub const PD_RATIO_THRESHOLD: f64 = 1e-14;

/// Eigenvalue pairs closer than `DEGENERATE_EIG_REL * max(λi, λj)` use the
/// confluent limit `1/λi` for the divided difference of `ln`, avoiding
/// catastrophic cancellation.
pub const DEGENERATE_EIG_REL: f64 = 1e-12;

/// A dense real symmetric matrix.
///
/// Construction symmetrizes the input as `(M + Mᵀ)/2`, tolerating round-off
/// from upstream arithmetic, and rejects non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeError(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix contains non-finite entries".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeError("row lengths do not form a square matrix".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Frobenius inner product `⟨A, B⟩ = Σᵢⱼ AᵢⱼBᵢⱼ`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Eigendecomposition `M = U Λ Uᵀ` with eigenvalues sorted ascending and a
/// fixed sign convention on eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    /// Eigenvalues, ascending.
    pub eigvals: Vec<f64>,
    /// Orthogonal matrix whose columns are the matching eigenvectors.
    pub eigvecs: DMatrix<f64>,
}

impl SpectralFactorization {
    /// Reassembles `U f(Λ) Uᵀ`, symmetrized to absorb round-off.
    pub fn map_eigvals(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.eigvals.len();
        let diag = DMatrix::from_fn(n, n, |i, j| if i == j { f(self.eigvals[i]) } else { 0.0 });
        let m = &self.eigvecs * diag * self.eigvecs.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_eigvals(|x| x)
    }

    pub fn min_eigval(&self) -> f64 {
        self.eigvals[0]
    }

    pub fn max_eigval(&self) -> f64 {
        self.eigvals[self.eigvals.len() - 1]
    }
}

/// Eigendecomposition of a symmetric matrix, deterministic for identical
/// input: eigenvalues ascending (stable order on ties), eigenvectors with the
/// first nonzero component positive.
pub fn sym_eig(m: &SymMatrix) -> Result<SpectralFactorization> {
    let n = m.dim();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidInput("eigendecomposition did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let eigvals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigvecs = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(k);
        let flip = src.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0);
        for row in 0..n {
            eigvecs[(row, col)] = if flip { -src[row] } else { src[row] };
        }
    }

    Ok(SpectralFactorization { eigvals, eigvecs })
}

/// A symmetric matrix with verified strictly positive eigenvalues.
///
/// The spectral factorization computed for the check is kept, so the log,
/// distance, and gradient operations below never re-decompose. Shifting by
/// `εI` reuses the same eigenvectors with eigenvalues `λ + ε`.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    sym: SymMatrix,
    fact: SpectralFactorization,
}

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::from_sym(SymMatrix::new(m)?)
    }

    pub fn from_sym(sym: SymMatrix) -> Result<Self> {
        let fact = sym_eig(&sym)?;
        let (min, max) = (fact.min_eigval(), fact.max_eigval());
        let threshold = PD_RATIO_THRESHOLD * max;
        if !(min > threshold) || max <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigval: min, threshold });
        }
        Ok(Self { sym, fact })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.sym.matrix()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn factorization(&self) -> &SpectralFactorization {
        &self.fact
    }

    /// `A⁻¹` through the cached factorization.
    pub fn inverse(&self) -> SpdMatrix {
        let m = self.fact.map_eigvals(|x| 1.0 / x);
        SpdMatrix::new(m).expect("inverse of SPD is SPD")
    }

    /// `log(A + εI)` without re-decomposing.
    fn log_shifted(&self, eps: f64) -> SymMatrix {
        SymMatrix { m: self.fact.map_eigvals(|x| (x + eps).ln()) }
    }
}

/// Matrix logarithm `log(C) = U ln(Λ) Uᵀ`.
pub fn spd_log(c: &SpdMatrix) -> SymMatrix {
    c.log_shifted(0.0)
}

/// Matrix exponential of a symmetric matrix; always SPD when it fits in
/// double precision.
pub fn spd_exp(s: &SymMatrix) -> Result<SpdMatrix> {
    let fact = sym_eig(s)?;
    if fact.eigvals.iter().any(|x| x.exp().is_infinite()) {
        return Err(Error::NumericOverflow(format!(
            "exp of eigenvalue {} overflows f64",
            fact.max_eigval()
        )));
    }
    let m = fact.map_eigvals(|x| x.exp());
    SpdMatrix::new(m)
}

/// Squared log-Euclidean distance `‖log(A+εI) − log(B+εI)‖²_F`.
///
/// Symmetric in its arguments, zero exactly when `a == b`, and invariant
/// under joint orthogonal congruence, positive scaling, and inversion
/// (at `eps = 0`).
pub fn lem_distance_sq(a: &SpdMatrix, b: &SpdMatrix, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
            context: "lem_distance_sq",
        });
    }
    let diff = a.log_shifted(eps).into_matrix() - b.log_shifted(eps).into_matrix();
    Ok(diff.iter().map(|x| x * x).sum())
}

/// Adjoint (= directional derivative, the operator is self-adjoint) of the
/// Fréchet derivative of the matrix logarithm at `c`, applied to `w`:
///
/// `U (G ∘ (Uᵀ w U)) Uᵀ` with `Gᵢⱼ = (ln λᵢ − ln λⱼ)/(λᵢ − λⱼ)`, `Gᵢᵢ = 1/λᵢ`.
pub fn logm_frechet_adjoint(c: &SpdMatrix, w: &SymMatrix) -> Result<SymMatrix> {
    if c.dim() != w.dim() {
        return Err(Error::DimMismatch {
            expected: c.dim(),
            got: w.dim(),
            context: "logm_frechet_adjoint",
        });
    }
    Ok(frechet_apply(&c.fact, 0.0, w))
}

fn frechet_apply(fact: &SpectralFactorization, shift: f64, w: &SymMatrix) -> SymMatrix {
    let n = fact.eigvals.len();
    let u = &fact.eigvecs;
    let wt = u.transpose() * w.matrix() * u;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (li, lj) = (fact.eigvals[i] + shift, fact.eigvals[j] + shift);
            h[(i, j)] = wt[(i, j)] * log_divided_difference(li, lj);
        }
    }
    let m = u * h * u.transpose();
    SymMatrix { m: (&m + m.transpose()) * 0.5 }
}

/// First divided difference of `ln`, with the confluent limit `1/λᵢ` when the
/// eigenvalues nearly coincide.
fn log_divided_difference(li: f64, lj: f64) -> f64 {
    if (li - lj).abs() < DEGENERATE_EIG_REL * li.max(lj) {
        1.0 / li
    } else {
        (li.ln() - lj.ln()) / (li - lj)
    }
}

/// Gradient of [`lem_distance_sq`] with respect to the entries of `c_curr`:
///
/// `2 · Dlog(C+εI)[log(C+εI) − log(T+εI)]`, returned symmetric. The
/// convention is the full entry grid, so a finite-difference check must
/// perturb `(i,j)` and `(j,i)` together and halve the off-diagonal quotient.
pub fn grad_r_spd(c_curr: &SpdMatrix, c_tgt: &SpdMatrix, eps: f64) -> Result<SymMatrix> {
    check_eps(eps)?;
    if c_curr.dim() != c_tgt.dim() {
        return Err(Error::DimMismatch {
            expected: c_curr.dim(),
            got: c_tgt.dim(),
            context: "grad_r_spd",
        });
    }
    let diff = SymMatrix {
        m: c_curr.log_shifted(eps).into_matrix() - c_tgt.log_shifted(eps).into_matrix(),
    };
    let mut grad = frechet_apply(&c_curr.fact, eps, &diff);
    grad.m *= 2.0;
    Ok(grad)
}

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidInput(format!("eps must be finite and non-negative, got {eps}")));
    }
    Ok(())
}
