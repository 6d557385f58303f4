//! Spectral form `U^n = Σ_j e^{inθ_j} P_j` of a (small, dense) unitary.
//!
//! The decomposition goes through a complex Schur factorization. For a normal
//! matrix the triangular factor is diagonal and the Schur vectors are already
//! an orthonormal eigenbasis, which also keeps degenerate eigenspaces
//! orthonormal. When the Schur iteration stalls (exactly permutation-like
//! matrices can do that) a Hermitian-pencil solver takes over. Every
//! eigenpair is certified by its residual before use.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::numeric::{wrap_phase, Complex64, NumericPolicy, ZERO};
use crate::report::{csv, fmt_sig};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    dim: usize,
    /// Ascending, in `(-π, π]`.
    eigenphases: Vec<f64>,
    /// Orthonormal eigenvectors of each cluster, one per column.
    clusters: Vec<DMatrix<Complex64>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct (clustered) eigenphases.
    pub fn len(&self) -> usize {
        self.eigenphases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenphases.is_empty()
    }

    pub fn eigenphases(&self) -> &[f64] {
        &self.eigenphases
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.ncols()).collect()
    }

    pub fn multiplicity(&self, j: usize) -> usize {
        self.clusters[j].ncols()
    }

    /// Orthonormal eigenvectors of cluster `j`, as columns.
    pub fn eigenvectors(&self, j: usize) -> &DMatrix<Complex64> {
        &self.clusters[j]
    }

    /// `P_j = V_j V_j†`.
    pub fn projector(&self, j: usize) -> DMatrix<Complex64> {
        let v = &self.clusters[j];
        v * v.adjoint()
    }

    /// `Σ_j e^{iθ_j} P_j`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (j, &theta) in self.eigenphases.iter().enumerate() {
            m += self.projector(j) * Complex64::from_polar(1.0, theta);
        }
        m
    }

    /// CSV rows `theta,multiplicity`.
    pub fn to_csv(&self) -> String {
        let rows = self
            .eigenphases
            .iter()
            .zip(&self.clusters)
            .map(|(t, c)| vec![fmt_sig(*t), c.ncols().to_string()]);
        csv(&["theta", "multiplicity"], rows)
    }
}

/// Eigendecomposition of a unitary matrix with the default policy.
pub fn eigendecompose(matrix: &DMatrix<Complex64>, cluster_tol: f64) -> Result<Spectrum> {
    eigendecompose_with(matrix, cluster_tol, &NumericPolicy::default())
}

pub fn eigendecompose_with(
    matrix: &DMatrix<Complex64>,
    cluster_tol: f64,
    policy: &NumericPolicy,
) -> Result<Spectrum> {
    let d = matrix.nrows();
    check_dim(d, matrix.ncols())?;
    if d > policy.dense_cap {
        return Err(Error::DenseTooLarge {
            dim: d,
            cap: policy.dense_cap,
        });
    }
    if d == 0 {
        return Ok(Spectrum {
            dim: 0,
            eigenphases: vec![],
            clusters: vec![],
        });
    }

    let candidates = match nalgebra::linalg::Schur::try_new(matrix.clone(), f64::EPSILON, 10_000) {
        Some(schur) => {
            let (q, t) = schur.unpack();
            (0..d).map(|i| (t[(i, i)], q.column(i).into_owned())).collect()
        }
        None => hermitian_pencil(matrix)?,
    };

    let mut pairs: Vec<(f64, DVector<Complex64>)> = Vec::with_capacity(d);
    for (i, (lambda, v)) in candidates.into_iter().enumerate() {
        let residual = (matrix * &v - &v * lambda).norm();
        if residual > policy.eig_residual {
            return Err(Error::Numerical(format!(
                "eigenpair {i} residual {residual:.3e} exceeds {:.1e}",
                policy.eig_residual
            )));
        }
        // Modulus is dropped: only the phase of a unitary eigenvalue is kept.
        pairs.push((wrap_phase(lambda.arg()), v));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        match groups.last_mut() {
            Some(g) if pairs[i].0 - pairs[*g.last().unwrap()].0 < cluster_tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    // Phases just above -π belong with phases just below π.
    if groups.len() > 1 {
        let first = pairs[groups[0][0]].0;
        let last = pairs[*groups.last().unwrap().last().unwrap()].0;
        if first + 2.0 * std::f64::consts::PI - last < cluster_tol {
            let head = groups.remove(0);
            groups.last_mut().unwrap().extend(head);
        }
    }

    let mut clustered: Vec<(f64, DMatrix<Complex64>)> = groups
        .into_iter()
        .map(|g| {
            let phase_sum: Complex64 = g.iter().map(|&i| Complex64::from_polar(1.0, pairs[i].0)).sum();
            let cols: Vec<DVector<Complex64>> = g.iter().map(|&i| pairs[i].1.clone()).collect();
            (wrap_phase(phase_sum.arg()), orthonormal_columns(cols))
        })
        .collect();
    clustered.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (eigenphases, clusters) = clustered.into_iter().unzip();
    Ok(Spectrum {
        dim: d,
        eigenphases,
        clusters,
    })
}

/// Fallback when the Schur iteration stalls, as it can on permutation-like
/// unitaries. The Hermitian part of `e^{-iγ}M` has eigenvalues
/// `cos(θ - γ)`; ties left in it are split by the anti-Hermitian part,
/// `sin(θ - γ)`. Eigenvalues are recovered as Rayleigh quotients. Only valid
/// for normal matrices; the caller certifies every pair.
fn hermitian_pencil(matrix: &DMatrix<Complex64>) -> Result<Vec<(Complex64, DVector<Complex64>)>> {
    const GAMMA: f64 = 0.577_215_664_901_532_9;
    const TIE: f64 = 1e-9;
    let rot = Complex64::from_polar(1.0, -GAMMA);
    let m = matrix * rot;
    let half = Complex64::new(0.5, 0.0);
    let a = (&m + m.adjoint()) * half;
    let b = (&m - m.adjoint()) * Complex64::new(0.0, -0.5);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));

    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < TIE {
            end += 1;
        }
        let cols: Vec<DVector<Complex64>> =
            order[start..end].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let v = DMatrix::from_columns(&cols);
        let vectors = if cols.len() == 1 {
            v
        } else {
            let inner = v.adjoint() * &b * &v;
            let inner = (&inner + inner.adjoint()) * half;
            let sub = nalgebra::linalg::SymmetricEigen::try_new(inner, f64::EPSILON, 10_000)
                .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
            v * sub.eigenvectors
        };
        for col in vectors.column_iter() {
            let x = col.into_owned();
            let lambda = x.dotc(&(matrix * &x)) / x.dotc(&x);
            out.push((lambda, x));
        }
        start = end;
    }
    Ok(out)
}

/// Gram–Schmidt over the columns, then fixes each column's global phase so
/// its first non-negligible component is real and positive.
fn orthonormal_columns(cols: Vec<DVector<Complex64>>) -> DMatrix<Complex64> {
    let mut out: Vec<DVector<Complex64>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        for _ in 0..2 {
            for b in &out {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        v /= Complex64::new(n, 0.0);
        if let Some(lead) = v.iter().find(|x| x.norm() > 1e-8).copied() {
            v *= lead.conj() / lead.norm();
        }
        out.push(v);
    }
    DMatrix::from_columns(&out)
}

/// `U^n · state` from the spectral form.
pub fn power_apply(spec: &Spectrum, n: u64, state: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    check_dim(spec.dim, state.len())?;
    let mut out = DVector::from_element(spec.dim, ZERO);
    for (theta, v) in spec.eigenphases.iter().zip(&spec.clusters) {
        let phase = Complex64::from_polar(1.0, wrap_phase(*theta * n as f64));
        let coeffs = v.adjoint() * state;
        out += v * coeffs * phase;
    }
    Ok(out)
}
