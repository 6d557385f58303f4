//! The one-step unitary `U`.
//!
//! At the hub a particle arriving on spoke `j` is reflected with amplitude
//! `-r` and transmitted into every other spoke with amplitude `t`:
//!
//! ```text
//! U|j,0⟩ = -r|0,j⟩ + t Σ_{k≠j} |0,k⟩,   r = (N-2)/N,  t = 2/N.
//! ```
//!
//! Outer vertices transmit without reflection; the anomaly only rewires where
//! the particle goes next. Hub columns are never stored densely. Writing the
//! hub block as `t·J - (r+t)·I` gives `(Uψ)_{0,k} = t·S - (r+t)·ψ_{k,0}` with
//! `S = Σ_j ψ_{j,0}`, so one step costs `O(N)`.

use nalgebra::DMatrix;

use crate::edgespace::{make_basis, BasisLabel, EdgeBasis, WalkState, HUB};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{Complex64, ONE, ZERO};
use crate::report::{csv, fmt_sig};
use crate::stargraph::{AnomalyKind, StarGraph};

/// A block of the hub coin: spokes in the group scatter among themselves
/// with reflection `-reflect` and transmission `transmit`.
#[derive(Debug, Clone, PartialEq)]
pub struct HubGroup {
    /// Spoke ids (1-based), ascending.
    pub spokes: Vec<usize>,
    pub reflect: f64,
    pub transmit: f64,
}

impl HubGroup {
    /// Entry `⟨0,k|U|j,0⟩` for spokes `k`, `j` of this group.
    fn entry(&self, k: usize, j: usize) -> f64 {
        if k == j {
            -self.reflect
        } else {
            self.transmit
        }
    }
}

/// An outer-vertex column with exactly one nonzero entry.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Transfer {
    col: usize,
    row: usize,
    amp: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    /// Incoming spoke `|j,0⟩`, scattered by hub group `group`.
    Hub { spoke: usize, group: usize },
    /// Index into `transfers`.
    Transfer(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator {
    basis: EdgeBasis,
    hub_r: f64,
    hub_t: f64,
    groups: Vec<HubGroup>,
    /// Per-spoke multiplier on hub columns (1 unless deliberately broken).
    hub_scale: Vec<Complex64>,
    /// All of `hub_scale` is exactly 1.
    unscaled: bool,
    transfers: Vec<Transfer>,
    /// Runs of outgoing positions `i` with the plain rule `|0,j⟩ → |j,0⟩`,
    /// applied as slice copies.
    plain_runs: Vec<std::ops::Range<usize>>,
    /// Indices into `transfers` not covered by `plain_runs`.
    other_transfers: Vec<usize>,
    columns: Vec<Column>,
}

/// The walk operator for `graph`.
pub fn build_step_operator(graph: &StarGraph) -> StepOperator {
    let n = graph.n_spokes();
    let r = (n as f64 - 2.0) / n as f64;
    let t = 2.0 / n as f64;
    let group = HubGroup {
        spokes: (1..=n).collect(),
        reflect: r,
        transmit: t,
    };
    StepOperator::assemble(graph, r, t, vec![group])
}

impl StepOperator {
    /// Builds `U` from hub groups plus the outer-vertex rules of `graph`.
    /// The groups must partition `1..=N`.
    pub(crate) fn assemble(graph: &StarGraph, hub_r: f64, hub_t: f64, groups: Vec<HubGroup>) -> Self {
        let basis = make_basis(graph);
        let n = graph.n_spokes();
        let idx = |l: BasisLabel| basis.index_of(&l).expect("label belongs to basis");
        let phase = Complex64::from_polar(1.0, graph.anomaly().mark_phase.to_radians());

        let mut rules: Vec<(BasisLabel, BasisLabel, Complex64)> = Vec::with_capacity(basis.dim());
        let pass_through = |j: usize| (BasisLabel::edge(HUB, j), BasisLabel::edge(j, HUB), ONE);
        match graph.kind() {
            AnomalyKind::None => rules.extend((1..=n).map(pass_through)),
            AnomalyKind::ExtraEdge { u, v } => {
                rules.extend((1..=n).filter(|&j| j != u && j != v).map(pass_through));
                rules.push((BasisLabel::edge(HUB, u), BasisLabel::edge(u, v), ONE));
                rules.push((BasisLabel::edge(HUB, v), BasisLabel::edge(v, u), ONE));
                rules.push((BasisLabel::edge(u, v), BasisLabel::edge(v, HUB), ONE));
                rules.push((BasisLabel::edge(v, u), BasisLabel::edge(u, HUB), ONE));
            }
            AnomalyKind::Loop { at } => {
                rules.extend((1..=n).filter(|&j| j != at).map(pass_through));
                rules.push((BasisLabel::edge(HUB, at), BasisLabel::Loop { at }, ONE));
                rules.push((BasisLabel::Loop { at }, BasisLabel::edge(at, HUB), ONE));
            }
            AnomalyKind::ExtendedEdge { at } => {
                let a = graph.extension_vertex();
                rules.extend((1..=n).filter(|&j| j != at).map(pass_through));
                rules.push((BasisLabel::edge(HUB, at), BasisLabel::edge(at, a), ONE));
                rules.push((BasisLabel::edge(at, a), BasisLabel::edge(a, at), phase));
                rules.push((BasisLabel::edge(a, at), BasisLabel::edge(at, HUB), ONE));
            }
            AnomalyKind::MissingLoop { at } => {
                for j in (1..=n).filter(|&j| j != at) {
                    rules.push((BasisLabel::edge(HUB, j), BasisLabel::Loop { at: j }, ONE));
                    rules.push((BasisLabel::Loop { at: j }, BasisLabel::edge(j, HUB), ONE));
                }
                rules.push((BasisLabel::edge(HUB, at), BasisLabel::edge(at, HUB), phase));
                rules.push((BasisLabel::Loop { at }, BasisLabel::Loop { at }, ONE));
            }
        }

        let mut transfers: Vec<Transfer> = rules
            .into_iter()
            .map(|(from, to, amp)| Transfer {
                col: idx(from),
                row: idx(to),
                amp,
            })
            .collect();
        transfers.sort_by_key(|t| t.col);
        debug_assert!({
            let mut rows: Vec<usize> = transfers.iter().map(|t| t.row).collect();
            rows.sort_unstable();
            rows.windows(2).all(|w| w[0] != w[1]) && rows.iter().all(|&r| r >= n)
        });

        let mut columns = vec![Column::Transfer(usize::MAX); basis.dim()];
        for (g, group) in groups.iter().enumerate() {
            for &spoke in &group.spokes {
                columns[basis.incoming(spoke)] = Column::Hub { spoke, group: g };
            }
        }
        for (i, t) in transfers.iter().enumerate() {
            columns[t.col] = Column::Transfer(i);
        }
        debug_assert!(columns.iter().all(|c| *c != Column::Transfer(usize::MAX)));

        let mut op = Self {
            basis,
            hub_r,
            hub_t,
            groups,
            hub_scale: vec![ONE; n],
            unscaled: true,
            transfers,
            plain_runs: vec![],
            other_transfers: vec![],
            columns,
        };
        op.index_transfers();
        op
    }

    fn index_transfers(&mut self) {
        let n = self.basis.n_spokes();
        self.plain_runs.clear();
        self.other_transfers.clear();
        for (i, t) in self.transfers.iter().enumerate() {
            if t.col < n && t.row == t.col + n && t.amp == ONE {
                match self.plain_runs.last_mut() {
                    Some(run) if run.end == t.col => run.end += 1,
                    _ => self.plain_runs.push(t.col..t.col + 1),
                }
            } else {
                self.other_transfers.push(i);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &EdgeBasis {
        &self.basis
    }

    /// Reflection coefficient `r` of the hub.
    pub fn hub_r(&self) -> f64 {
        self.hub_r
    }

    /// Transmission coefficient `t` of the hub.
    pub fn hub_t(&self) -> f64 {
        self.hub_t
    }

    pub fn hub_groups(&self) -> &[HubGroup] {
        &self.groups
    }

    /// Multiplies column `col` by `factor`. Only useful for building broken
    /// operators in diagnostics and tests.
    pub fn scale_column(&mut self, col: usize, factor: Complex64) {
        match self.columns[col] {
            Column::Hub { spoke, .. } => {
                self.hub_scale[spoke - 1] *= factor;
                self.unscaled = false;
            }
            Column::Transfer(i) => {
                self.transfers[i].amp *= factor;
                self.index_transfers();
            }
        }
    }

    /// Nonzero entries `(row, amplitude)` of column `col`.
    pub fn column(&self, col: usize) -> Vec<(usize, Complex64)> {
        match self.columns[col] {
            Column::Hub { spoke, group } => {
                let g = &self.groups[group];
                let scale = self.hub_scale[spoke - 1];
                g.spokes
                    .iter()
                    .map(|&k| (self.basis.outgoing(k), scale * g.entry(k, spoke)))
                    .collect()
            }
            Column::Transfer(i) => {
                let t = &self.transfers[i];
                vec![(t.row, t.amp)]
            }
        }
    }

    /// Total stored nonzeros if every column were materialized.
    pub fn nnz(&self) -> usize {
        let hub: usize = self.groups.iter().map(|g| g.spokes.len().pow(2)).sum();
        hub + self.transfers.len()
    }

    /// `out = U·input`. Both slices must have length `dim()`.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        let n = self.basis.n_spokes();
        let incoming = &input[n..2 * n];
        let out_spokes = &mut out[..n];
        if self.unscaled && self.groups.len() == 1 {
            // one group over all spokes, in order
            let g = &self.groups[0];
            let broadcast = compensated_sum(incoming.iter().copied()) * g.transmit;
            let diag = g.reflect + g.transmit;
            for (o, x) in out_spokes.iter_mut().zip(incoming) {
                *o = broadcast - x * diag;
            }
        } else {
            for g in &self.groups {
                let sum = compensated_sum(g.spokes.iter().map(|&j| self.hub_scale[j - 1] * incoming[j - 1]));
                let broadcast = sum * g.transmit;
                let diag = g.reflect + g.transmit;
                for &k in &g.spokes {
                    out_spokes[k - 1] = broadcast - self.hub_scale[k - 1] * incoming[k - 1] * diag;
                }
            }
        }
        // Every row outside the hub's outputs receives exactly one transfer.
        for run in &self.plain_runs {
            out[run.start + n..run.end + n].copy_from_slice(&input[run.clone()]);
        }
        for &i in &self.other_transfers {
            let t = &self.transfers[i];
            out[t.row] = t.amp * input[t.col];
        }
    }

    /// `out = U†·input`.
    pub fn apply_adjoint_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        let n = self.basis.n_spokes();
        let outgoing = &input[..n];
        for g in &self.groups {
            let sum = compensated_sum(g.spokes.iter().map(|&k| outgoing[k - 1]));
            let diag = g.reflect + g.transmit;
            for &j in &g.spokes {
                let v = sum * g.transmit - outgoing[j - 1] * diag;
                out[n + j - 1] = self.hub_scale[j - 1].conj() * v;
            }
        }
        // Transfer columns are exactly the positions the hub does not read.
        for run in &self.plain_runs {
            out[run.clone()].copy_from_slice(&input[run.start + n..run.end + n]);
        }
        for &i in &self.other_transfers {
            let t = &self.transfers[i];
            out[t.col] = t.amp.conj() * input[t.row];
        }
    }

    /// `U†·state`.
    pub fn apply_adjoint(&self, state: &WalkState) -> Result<WalkState> {
        check_dim(self.dim(), state.dim())?;
        let mut out = vec![ZERO; self.dim()];
        self.apply_adjoint_into(state.amplitudes(), &mut out);
        Ok(WalkState::from_amplitudes(out))
    }

    /// Dense copy of `U`; refuses dimensions above `cap`.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        let d = self.dim();
        if d > cap {
            return Err(Error::DenseTooLarge { dim: d, cap });
        }
        let mut m = DMatrix::zeros(d, d);
        for col in 0..d {
            for (row, a) in self.column(col) {
                m[(row, col)] += a;
            }
        }
        Ok(m)
    }

    /// CSV triplets `row_label,col_label,re,im` of all nonzeros.
    pub fn to_csv(&self, cap: usize) -> Result<String> {
        if self.dim() > cap {
            return Err(Error::DenseTooLarge {
                dim: self.dim(),
                cap,
            });
        }
        let labels = self.basis.labels();
        let rows = (0..self.dim()).flat_map(|col| {
            self.column(col).into_iter().map(move |(row, a)| {
                vec![
                    labels[row].to_string(),
                    labels[col].to_string(),
                    fmt_sig(a.re),
                    fmt_sig(a.im),
                ]
            })
        });
        Ok(csv(&["row_label", "col_label", "re", "im"], rows))
    }
}

/// Neumaier-compensated sum; the hub adds up `N` amplitudes of equal size
/// every step and plain summation drifts visibly by `N ~ 10^6`.
fn compensated_sum(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let (mut re, mut im) = ((0.0f64, 0.0f64), (0.0f64, 0.0f64));
    let add = |(sum, comp): &mut (f64, f64), x: f64| {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    };
    for v in values {
        add(&mut re, v.re);
        add(&mut im, v.im);
    }
    Complex64::new(re.0 + re.1, im.0 + im.1)
}

/// One step of the walk.
pub fn apply_step(op: &StepOperator, state: &WalkState) -> Result<WalkState> {
    check_dim(op.dim(), state.dim())?;
    let mut out = vec![ZERO; op.dim()];
    op.apply_into(state.amplitudes(), &mut out);
    Ok(WalkState::from_amplitudes(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitarityReport {
    /// `max |(U†U - I)_{ij}|`.
    pub max_deviation: f64,
    pub passed: bool,
}

/// Certifies `U†U = I` entrywise from column inner products.
///
/// Only pairs of columns with overlapping support are visited: hub columns of
/// one group against each other (a closed form in the group's coefficients),
/// transfer columns landing on the same row, and transfer columns landing on
/// hub rows against that group's hub columns.
pub fn check_unitarity(op: &StepOperator, tolerance: f64) -> UnitarityReport {
    let mut dev = 0.0f64;
    let basis = &op.basis;

    for g in &op.groups {
        let size = g.spokes.len() as f64;
        let s = g.reflect + g.transmit;
        let t = g.transmit;
        // Σ_m (t - sδ_mj)(t - sδ_mk) over the group's rows.
        let off = size * t * t - 2.0 * s * t;
        let diag = off + s * s;
        for &j in &g.spokes {
            let cj = op.hub_scale[j - 1];
            for &k in &g.spokes {
                let ck = op.hub_scale[k - 1];
                let gram = cj.conj() * ck * if j == k { diag } else { off };
                let d = if j == k { (gram - ONE).norm() } else { gram.norm() };
                dev = dev.max(d);
            }
        }
    }

    let mut by_row: Vec<Vec<&Transfer>> = vec![Vec::new(); op.dim()];
    for t in &op.transfers {
        by_row[t.row].push(t);
    }
    for (row, ts) in by_row.iter().enumerate() {
        for (a, ta) in ts.iter().enumerate() {
            dev = dev.max((ta.amp.norm_sqr() - 1.0).abs());
            for tb in &ts[a + 1..] {
                dev = dev.max((ta.amp.conj() * tb.amp).norm());
            }
            if row < basis.n_spokes() {
                let k = row + 1;
                if let Some(g) = op.groups.iter().find(|g| g.spokes.contains(&k)) {
                    for &j in &g.spokes {
                        let gram = ta.amp.conj() * op.hub_scale[j - 1] * g.entry(k, j);
                        dev = dev.max(gram.norm());
                    }
                }
            }
        }
    }

    UnitarityReport {
        max_deviation: dev,
        passed: dev < tolerance,
    }
}
