//! The walk's Hilbert space: directed edge states `|u,v⟩` and loop states
//! `|l_j⟩`.
//!
//! Basis order is fixed: `|0,1⟩ … |0,N⟩`, then `|1,0⟩ … |N,0⟩`, then the
//! anomaly states. Those are `|u,v⟩, |v,u⟩` for an extra edge, `|l_at⟩` for a
//! loop, `|at,A⟩, |A,at⟩` for an extended edge (with `A = N + 1`), and
//! `|l_1⟩ … |l_N⟩` for a missing loop (the dummy loop included).

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::numeric::{inner, norm_sqr, Complex64, ONE, ZERO};
use crate::stargraph::{AnomalyKind, StarGraph};

/// The hub vertex.
pub const HUB: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisLabel {
    /// Particle on edge `{from, to}` moving towards `to`.
    Edge { from: usize, to: usize },
    /// Particle on the loop attached to `at`.
    Loop { at: usize },
}

impl BasisLabel {
    pub fn edge(from: usize, to: usize) -> Self {
        BasisLabel::Edge { from, to }
    }

    /// The undirected element this state lives on.
    pub fn key(&self) -> EdgeKey {
        match *self {
            BasisLabel::Edge { from: HUB, to } => EdgeKey::Spoke(to),
            BasisLabel::Edge { from, to: HUB } => EdgeKey::Spoke(from),
            BasisLabel::Edge { from, to } => EdgeKey::Edge(from.min(to), from.max(to)),
            BasisLabel::Loop { at } => EdgeKey::Loop(at),
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Edge { from, to } => write!(f, "{from}>{to}"),
            BasisLabel::Loop { at } => write!(f, "l{at}"),
        }
    }
}

/// An undirected edge or loop, the unit of measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKey {
    /// The spoke `{0, j}`.
    Spoke(usize),
    /// A non-hub edge `{u, v}` with `u < v`.
    Edge(usize, usize),
    Loop(usize),
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKey::Spoke(j) => write!(f, "spoke{j}"),
            EdgeKey::Edge(u, v) => write!(f, "edge{u}-{v}"),
            EdgeKey::Loop(j) => write!(f, "loop{j}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasis {
    n_spokes: usize,
    labels: Vec<BasisLabel>,
    index: HashMap<BasisLabel, usize>,
}

impl EdgeBasis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn n_spokes(&self) -> usize {
        self.n_spokes
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> BasisLabel {
        self.labels[i]
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Position of `|0,j⟩`.
    pub fn outgoing(&self, j: usize) -> usize {
        debug_assert!((1..=self.n_spokes).contains(&j));
        j - 1
    }

    /// Position of `|j,0⟩`.
    pub fn incoming(&self, j: usize) -> usize {
        debug_assert!((1..=self.n_spokes).contains(&j));
        self.n_spokes + j - 1
    }

    /// Whether position `i` is a spoke state (`|0,j⟩` or `|j,0⟩`).
    pub fn is_spoke(&self, i: usize) -> bool {
        i < 2 * self.n_spokes
    }
}

/// Enumerates the basis of `graph` in the fixed order described in the
/// module docs.
pub fn make_basis(graph: &StarGraph) -> EdgeBasis {
    let n = graph.n_spokes();
    let mut labels = Vec::with_capacity(graph.hilbert_dim());
    labels.extend((1..=n).map(|j| BasisLabel::edge(HUB, j)));
    labels.extend((1..=n).map(|j| BasisLabel::edge(j, HUB)));
    match graph.kind() {
        AnomalyKind::None => {}
        AnomalyKind::ExtraEdge { u, v } => {
            labels.push(BasisLabel::edge(u, v));
            labels.push(BasisLabel::edge(v, u));
        }
        AnomalyKind::Loop { at } => labels.push(BasisLabel::Loop { at }),
        AnomalyKind::ExtendedEdge { at } => {
            let a = graph.extension_vertex();
            labels.push(BasisLabel::edge(at, a));
            labels.push(BasisLabel::edge(a, at));
        }
        AnomalyKind::MissingLoop { .. } => {
            labels.extend((1..=n).map(|at| BasisLabel::Loop { at }));
        }
    }
    let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    EdgeBasis {
        n_spokes: n,
        labels,
        index,
    }
}

/// Amplitudes over an [`EdgeBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    amplitudes: Vec<Complex64>,
}

impl WalkState {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// Normalizes `amplitudes` to unit length.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = norm_sqr(&amplitudes).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Config("cannot normalize a zero or non-finite state".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(Self { amplitudes })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![ZERO; dim],
        }
    }

    pub fn basis_state(dim: usize, i: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amplitudes[i] = ONE;
        s
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &WalkState) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> WalkState {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Largest `|a_i - b_i|`.
    pub fn max_abs_diff(&self, other: &WalkState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn norm(state: &WalkState) -> f64 {
    state.norm()
}

/// Probability of finding the particle on each undirected edge or loop.
/// Both directions of an edge are summed. Every element of the graph gets an
/// entry, zero or not.
pub fn edge_probabilities(state: &WalkState, basis: &EdgeBasis) -> Result<BTreeMap<EdgeKey, f64>> {
    check_dim(basis.dim(), state.dim())?;
    let mut out = BTreeMap::new();
    for (label, a) in basis.labels().iter().zip(state.amplitudes()) {
        *out.entry(label.key()).or_insert(0.0) += a.norm_sqr();
    }
    Ok(out)
}
