//! Dense symmetric linear algebra: eigendecomposition, PSD square roots and
//! subspace angles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Relative floor below which a negative eigenvalue is treated as noise.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Eigendecomposition of a real symmetric matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2` first. Eigenvalues come back in
/// descending order; each eigenvector is signed so that its largest-magnitude
/// entry is positive.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() != m.ncols() {
        return invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return invalid("matrix is empty");
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..p {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// A symmetric PSD sensitivity matrix with its cached eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    entries: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = sym_eig(&m)?;
        Ok(Self {
            entries: symmetrize(&m),
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
            eigenvalues: DVector::zeros(dim),
            eigenvectors: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal columns in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn leading_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn leading_vector(&self) -> Vec<f64> {
        self.eigenvectors.column(0).iter().copied().collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().copied().collect()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }

    pub fn frobenius_distance(&self, other: &SpectralMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }
}

impl Serialize for SpectralMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            entries: Vec<Vec<f64>>,
            eigenvalues: Vec<f64>,
            eigenvectors: Vec<Vec<f64>>,
        }
        Repr {
            entries: rows_of(&self.entries),
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            eigenvectors: columns_of(&self.eigenvectors),
        }
        .serialize(s)
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn columns_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Serializes a matrix as a list of rows.
pub(crate) fn serialize_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    rows_of(m).serialize(s)
}

/// Symmetric square root `S = V diag(√λ) Vᵀ`, so that `S Sᵀ = M`.
///
/// Eigenvalues in `[-1e-8·λmax, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn psd_sqrt(m: &SpectralMatrix) -> Result<DMatrix<f64>> {
    let lmax = m.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let tol = PSD_TOLERANCE * lmax;
    let mut roots = DVector::zeros(m.dim());
    for (i, &l) in m.eigenvalues.iter().enumerate() {
        if l < -tol {
            return Err(Error::NotPsd {
                eigenvalue: l,
                tolerance: tol,
            });
        }
        roots[i] = l.max(0.0).sqrt();
    }
    Ok(&m.eigenvectors * DMatrix::from_diagonal(&roots) * m.eigenvectors.transpose())
}

/// `|uᵀv| / (‖u‖‖v‖)`: cosine of the angle between the lines spanned by `u`
/// and `v`.
pub fn subspace_cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return invalid(format!("vector lengths differ: {} vs {}", u.len(), v.len()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return invalid("zero vector has no direction");
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot.abs() / (nu * nv)).min(1.0))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the complement of `u` (columns), via Gram-Schmidt
/// against the coordinate axes.
pub fn orthogonal_complement(u: &[f64]) -> Result<DMatrix<f64>> {
    let p = u.len();
    let nu = norm(u);
    if nu == 0.0 {
        return invalid("zero vector has no complement");
    }
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_iterator(p, u.iter().map(|x| x / nu))];
    for axis in 0..p {
        if basis.len() == p {
            break;
        }
        let mut v = DVector::zeros(p);
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
    }
    let cols: Vec<DVector<f64>> = basis.into_iter().skip(1).collect();
    Ok(DMatrix::from_columns(&cols))
}
