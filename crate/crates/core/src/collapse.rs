//! Reduction of the walk to the smallest `U`-invariant subspace containing
//! the initial state.
//!
//! The closure starts from orthonormalized seeds and keeps applying `U` and
//! `U†` to every basis vector, adding whatever survives Gram–Schmidt. For the
//! star family the result has a size independent of `N`, so long walks can be
//! run on a handful of coefficients and lifted back at the end.

use nalgebra::{DMatrix, DVector};

use crate::edgespace::{BasisLabel, WalkState, HUB};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{inner, norm_sqr, Complex64, NumericPolicy, ZERO};
use crate::report::{csv, fmt_sig};
use crate::stargraph::{AnomalyKind, StarGraph};
use crate::stepop::StepOperator;

/// Orthonormal vectors spanning an invariant subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    vectors: Vec<WalkState>,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[WalkState] {
        &self.vectors
    }

    /// Dimension of the ambient walk space.
    pub fn full_dim(&self) -> usize {
        self.vectors.first().map_or(0, WalkState::dim)
    }

    /// Coefficients `⟨v_a|state⟩`.
    pub fn project(&self, state: &WalkState) -> Result<DVector<Complex64>> {
        check_dim(self.full_dim(), state.dim())?;
        Ok(DVector::from_iterator(
            self.dim(),
            self.vectors.iter().map(|v| inner(v.amplitudes(), state.amplitudes())),
        ))
    }

    /// Largest `|⟨v_a|v_b⟩ - δ_ab|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err = 0.0f64;
        for (a, va) in self.vectors.iter().enumerate() {
            for (b, vb) in self.vectors.iter().enumerate().skip(a) {
                let ip = inner(va.amplitudes(), vb.amplitudes());
                let want = if a == b { 1.0 } else { 0.0 };
                err = err.max((ip - want).norm());
            }
        }
        err
    }

    /// Gram matrix `Σ_{i∈rows} conj(v_a[i]) v_b[i]` restricted to a subset of
    /// full-space positions. `c† G c` is then the probability on those
    /// positions for a reduced state `c`.
    pub fn gram_on(&self, rows: &[usize]) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| {
            let (va, vb) = (self.vectors[a].amplitudes(), self.vectors[b].amplitudes());
            rows.iter().map(|&i| va[i].conj() * vb[i]).sum()
        })
    }
}

/// `op` expressed in an invariant basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOperator {
    pub matrix: DMatrix<Complex64>,
    pub basis: ReducedBasis,
}

impl ReducedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest entry of `|M†M - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(d, d);
        g.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `row,col,re,im` for every entry.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let rows = (0..d).flat_map(|r| {
            (0..d).map(move |c| (r, c)).map(|(r, c)| {
                let x = self.matrix[(r, c)];
                vec![r.to_string(), c.to_string(), fmt_sig(x.re), fmt_sig(x.im)]
            })
        });
        csv(&["row", "col", "re", "im"], rows)
    }
}

/// Closure of `seeds` under `op` and `op†`.
pub fn invariant_basis(
    op: &StepOperator,
    seeds: &[WalkState],
    policy: &NumericPolicy,
) -> Result<ReducedBasis> {
    invariant_basis_multi(&[op], seeds, policy)
}

/// Closure under several operators at once; the result is invariant under
/// each of them. New vectors are appended in generation order: for each basis
/// vector in turn, `U_1 v, U_1† v, U_2 v, U_2† v, …`.
pub fn invariant_basis_multi(
    ops: &[&StepOperator],
    seeds: &[WalkState],
    policy: &NumericPolicy,
) -> Result<ReducedBasis> {
    let dim = ops
        .first()
        .map(|op| op.dim())
        .ok_or_else(|| Error::Config("closure needs at least one operator".into()))?;
    for op in ops {
        check_dim(dim, op.dim())?;
    }
    for s in seeds {
        check_dim(dim, s.dim())?;
    }

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let push = |basis: &mut Vec<Vec<Complex64>>, v: Vec<Complex64>| -> Result<()> {
        if let Some(v) = orthogonalize(basis, v, policy) {
            if basis.len() == policy.closure_cap {
                return Err(Error::SubspaceTooLarge {
                    cap: policy.closure_cap,
                });
            }
            basis.push(v);
        }
        Ok(())
    };

    for s in seeds {
        push(&mut basis, s.amplitudes().to_vec())?;
    }
    let mut scratch = vec![ZERO; dim];
    let mut next = 0;
    while next < basis.len() {
        for op in ops {
            op.apply_into(&basis[next], &mut scratch);
            push(&mut basis, scratch.clone())?;
            op.apply_adjoint_into(&basis[next], &mut scratch);
            push(&mut basis, scratch.clone())?;
        }
        next += 1;
    }
    Ok(ReducedBasis {
        vectors: basis.into_iter().map(WalkState::from_amplitudes).collect(),
    })
}

/// Modified Gram–Schmidt with reorthogonalization. Returns the normalized
/// residual, or `None` when it is below the acceptance threshold.
fn orthogonalize(
    basis: &[Vec<Complex64>],
    mut v: Vec<Complex64>,
    policy: &NumericPolicy,
) -> Option<Vec<Complex64>> {
    let initial = norm_sqr(&v).sqrt();
    if initial == 0.0 {
        return None;
    }
    for _ in 0..=policy.reorth_passes {
        for b in basis {
            let c = inner(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = norm_sqr(&v).sqrt();
    if n <= policy.closure_accept {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// `M_ab = ⟨v_a|U|v_b⟩`, failing if the basis is not invariant within the
/// default tolerance.
pub fn reduce_operator(op: &StepOperator, basis: &ReducedBasis) -> Result<ReducedOperator> {
    reduce_operator_with(op, basis, NumericPolicy::default().invariance)
}

pub fn reduce_operator_with(
    op: &StepOperator,
    basis: &ReducedBasis,
    tolerance: f64,
) -> Result<ReducedOperator> {
    let (matrix, residual) = project_operator(op, basis)?;
    if residual > tolerance {
        return Err(Error::NotInvariant { residual });
    }
    Ok(ReducedOperator {
        matrix,
        basis: basis.clone(),
    })
}

/// Projection `Π U Π` and the invariance residual `max_b ‖(I - Π) U v_b‖`.
pub fn project_operator(
    op: &StepOperator,
    basis: &ReducedBasis,
) -> Result<(DMatrix<Complex64>, f64)> {
    check_dim(op.dim(), basis.full_dim())?;
    let d = basis.dim();
    let mut m = DMatrix::zeros(d, d);
    let mut residual = 0.0f64;
    let mut image = vec![ZERO; op.dim()];
    for (b, vb) in basis.vectors.iter().enumerate() {
        op.apply_into(vb.amplitudes(), &mut image);
        let mut rest = image.clone();
        for (a, va) in basis.vectors.iter().enumerate() {
            let c = inner(va.amplitudes(), &image);
            m[(a, b)] = c;
            rest.iter_mut().zip(va.amplitudes()).for_each(|(x, y)| *x -= c * y);
        }
        residual = residual.max(norm_sqr(&rest).sqrt());
    }
    Ok((m, residual))
}

/// `Σ_a c_a v_a`.
pub fn lift(reduced_state: &[Complex64], basis: &ReducedBasis) -> Result<WalkState> {
    check_dim(basis.dim(), reduced_state.len())?;
    let mut out = vec![ZERO; basis.full_dim()];
    for (c, v) in reduced_state.iter().zip(&basis.vectors) {
        out.iter_mut().zip(v.amplitudes()).for_each(|(x, y)| *x += c * y);
    }
    Ok(WalkState::from_amplitudes(out))
}

/// The five hand-built symmetric states of the extra-edge walk, in order:
/// `ψ₁ = (|0,u⟩+|0,v⟩)/√2`, `ψ₂ = (|u,0⟩+|v,0⟩)/√2`, `ψ₃` and `ψ₄` the uniform
/// outgoing and incoming states on the other spokes, `ψ₅ = (|u,v⟩+|v,u⟩)/√2`.
pub fn extra_edge_sector_states(graph: &StarGraph) -> Result<Vec<WalkState>> {
    let AnomalyKind::ExtraEdge { u, v } = graph.kind() else {
        return Err(Error::Config("sector states are defined for extra_edge graphs".into()));
    };
    let basis = crate::edgespace::make_basis(graph);
    let n = graph.n_spokes();
    let uniform = |labels: Vec<BasisLabel>| {
        let mut amps = vec![ZERO; basis.dim()];
        let w = 1.0 / (labels.len() as f64).sqrt();
        for l in labels {
            amps[basis.index_of(&l).expect("label in basis")] = Complex64::new(w, 0.0);
        }
        WalkState::from_amplitudes(amps)
    };
    let others = || (1..=n).filter(move |&j| j != u && j != v);
    Ok(vec![
        uniform(vec![BasisLabel::edge(HUB, u), BasisLabel::edge(HUB, v)]),
        uniform(vec![BasisLabel::edge(u, HUB), BasisLabel::edge(v, HUB)]),
        uniform(others().map(|j| BasisLabel::edge(HUB, j)).collect()),
        uniform(others().map(|j| BasisLabel::edge(j, HUB)).collect()),
        uniform(vec![BasisLabel::edge(u, v), BasisLabel::edge(v, u)]),
    ])
}
