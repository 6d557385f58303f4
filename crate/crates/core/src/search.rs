//! Searching for the anomaly: initial states, hitting-time predictions,
//! step-by-step evolution, accessible-edge measurement, and the classical
//! adjacency-list baseline.
//!
//! Only spokes can be measured. A particle sitting on the extra edge, the
//! loop, or the extension is not detected.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collapse::{invariant_basis, reduce_operator};
use crate::edgespace::{make_basis, BasisLabel, EdgeBasis, WalkState};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{Complex64, NumericPolicy, ZERO};
use crate::powerlaw::{fit_loglog, LineFit};
use crate::report::{csv, fmt_sig};
use crate::stargraph::{spec_value, AnomalyKind, StarGraph};
use crate::stepop::build_step_operator;

/// Which initial state to start the walk in.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateKind {
    /// `(1/√(2N)) Σ_j (|0,j⟩ - |j,0⟩)`.
    Minus,
    /// Same with a plus sign; the search fails from here.
    Plus,
    /// `a·ψ_out + b·ψ_in`, normalized.
    InOut { a: Complex64, b: Complex64 },
    /// `(ψ_out + ψ_in + ψ_loop)/√3`, for a missing loop with phase π.
    LoopPi,
    /// `(e^{-2πi/3} ψ_out + ψ_in + e^{2πi/3} ψ_loop)/(1 - e^{2πi/3})`, for a
    /// missing loop with phase π/3. With a negative phase the complex
    /// conjugate is used instead.
    LoopThird,
    /// Explicit amplitudes over the graph's basis, normalized.
    Custom(Vec<Complex64>),
}

impl InitialStateKind {
    pub fn name(&self) -> String {
        match self {
            InitialStateKind::Minus => "minus".into(),
            InitialStateKind::Plus => "plus".into(),
            InitialStateKind::InOut { a, b } => format!("inout({a},{b})"),
            InitialStateKind::LoopPi => "loop_pi".into(),
            InitialStateKind::LoopThird => "loop_third".into(),
            InitialStateKind::Custom(_) => "custom".into(),
        }
    }

    /// The kind a search on `graph` uses when none is given.
    pub fn default_for(graph: &StarGraph) -> Self {
        match graph.kind() {
            AnomalyKind::MissingLoop { .. } => {
                let phi = graph.anomaly().mark_phase.to_radians();
                if (phi.abs() - PI / 3.0).abs() < 1e-12 {
                    InitialStateKind::LoopThird
                } else {
                    InitialStateKind::LoopPi
                }
            }
            AnomalyKind::ExtendedEdge { .. } => InitialStateKind::InOut {
                a: Complex64::new(1.0, 0.0),
                b: Complex64::new(-1.0, 0.0),
            },
            _ => InitialStateKind::Minus,
        }
    }
}

/// `ψ_out = (1/√N) Σ|0,j⟩`, `ψ_in = (1/√N) Σ|j,0⟩`, and, when the graph has
/// loops on every vertex, `ψ_loop = (1/√N) Σ|l_j⟩`.
pub fn symmetric_states(graph: &StarGraph) -> Vec<WalkState> {
    let basis = make_basis(graph);
    let n = graph.n_spokes();
    let w = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let uniform = |idx: &dyn Fn(usize) -> usize| {
        let mut a = vec![ZERO; basis.dim()];
        for j in 1..=n {
            a[idx(j)] = w;
        }
        WalkState::from_amplitudes(a)
    };
    let mut out = vec![
        uniform(&|j| basis.outgoing(j)),
        uniform(&|j| basis.incoming(j)),
    ];
    if matches!(graph.kind(), AnomalyKind::MissingLoop { .. }) {
        out.push(uniform(&|j| basis.index_of(&BasisLabel::Loop { at: j }).unwrap()));
    }
    out
}

fn combine(terms: &[(Complex64, &WalkState)]) -> Vec<Complex64> {
    let mut a = vec![ZERO; terms[0].1.dim()];
    for (c, s) in terms {
        a.iter_mut().zip(s.amplitudes()).for_each(|(x, y)| *x += c * y);
    }
    a
}

pub fn initial_state(graph: &StarGraph, kind: &InitialStateKind) -> Result<WalkState> {
    let sym = symmetric_states(graph);
    let (psi_out, psi_in) = (&sym[0], &sym[1]);
    let one = Complex64::new(1.0, 0.0);
    let needs_loops = || {
        sym.get(2).ok_or_else(|| {
            Error::Config(format!(
                "initial state `{}` requires a missing_loop graph",
                kind.name()
            ))
        })
    };
    match kind {
        InitialStateKind::Minus => WalkState::normalized(combine(&[(one, psi_out), (-one, psi_in)])),
        InitialStateKind::Plus => WalkState::normalized(combine(&[(one, psi_out), (one, psi_in)])),
        InitialStateKind::InOut { a, b } => {
            if a.norm() == 0.0 && b.norm() == 0.0 {
                return Err(Error::Config("inout needs (a, b) != (0, 0)".into()));
            }
            WalkState::normalized(combine(&[(*a, psi_out), (*b, psi_in)]))
        }
        InitialStateKind::LoopPi => {
            let psi_loop = needs_loops()?;
            let w = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
            Ok(WalkState::from_amplitudes(combine(&[
                (w, psi_out),
                (w, psi_in),
                (w, psi_loop),
            ])))
        }
        InitialStateKind::LoopThird => {
            let psi_loop = needs_loops()?;
            let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
            let norm = one / (one - omega);
            let state = WalkState::from_amplitudes(combine(&[
                (omega.conj() * norm, psi_out),
                (norm, psi_in),
                (omega * norm, psi_loop),
            ]));
            if graph.anomaly().mark_phase.to_radians() < 0.0 {
                Ok(state.conj())
            } else {
                Ok(state)
            }
        }
        InitialStateKind::Custom(amps) => {
            check_dim(graph.hilbert_dim(), amps.len())?;
            WalkState::normalized(amps.clone())
        }
    }
}

/// Step at which the detectable probability first peaks, from the large-`N`
/// closed form. Extra edge: `n·Δ = π/2` with `Δ = √(2t/3) = 2/√(3N)`. Loop:
/// `n·√(t/3) = π/2`.
pub fn predicted_hitting_step(graph: &StarGraph) -> Result<usize> {
    let t = 2.0 / graph.n_spokes() as f64;
    let steps = match graph.kind() {
        AnomalyKind::ExtraEdge { .. } => PI / (2.0 * (2.0 * t / 3.0).sqrt()),
        AnomalyKind::Loop { .. } => PI / (2.0 * (t / 3.0).sqrt()),
        other => return Err(Error::NoPrediction(other.name())),
    };
    Ok(steps.round() as usize)
}

/// Basis positions split into the searched-for spokes, the undetectable
/// anomaly states, and everything else.
#[derive(Debug, Clone)]
struct Regions {
    target: Vec<usize>,
    anomaly: Vec<usize>,
    rest: Vec<usize>,
}

impl Regions {
    fn of(graph: &StarGraph, basis: &EdgeBasis) -> Self {
        let spokes = graph.anomaly_spokes();
        let mut target = Vec::new();
        for &j in &spokes {
            target.push(basis.outgoing(j));
            target.push(basis.incoming(j));
        }
        target.sort_unstable();
        let anomaly: Vec<usize> = match graph.kind() {
            AnomalyKind::MissingLoop { at } => {
                vec![basis.index_of(&BasisLabel::Loop { at }).unwrap()]
            }
            _ => (2 * graph.n_spokes()..basis.dim()).collect(),
        };
        let rest = (0..basis.dim())
            .filter(|i| target.binary_search(i).is_err() && !anomaly.contains(i))
            .collect();
        Self {
            target,
            anomaly,
            rest,
        }
    }

    fn record(&self, n: usize, amps: &[Complex64]) -> StepRecord {
        let p = |idx: &[usize]| idx.iter().map(|&i| amps[i].norm_sqr()).sum::<f64>();
        StepRecord {
            n,
            p_target_spokes: p(&self.target),
            p_anomaly: p(&self.anomaly),
            p_rest: p(&self.rest),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    /// On the spokes leading into the anomaly (detectable).
    pub p_target_spokes: f64,
    /// On the anomaly itself (undetectable).
    pub p_anomaly: f64,
    pub p_rest: f64,
}

impl StepRecord {
    pub fn total(&self) -> f64 {
        self.p_target_spokes + self.p_anomaly
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub per_step: Vec<StepRecord>,
    pub peak_step: usize,
    pub peak_detectable: f64,
    pub peak_undetected: f64,
    pub predicted_step: Option<usize>,
}

impl SearchResult {
    fn from_records(per_step: Vec<StepRecord>, predicted_step: Option<usize>) -> Self {
        let peak = per_step
            .iter()
            .copied()
            .reduce(|best, r| if r.total() > best.total() { r } else { best })
            .expect("at least one record");
        Self {
            peak_step: peak.n,
            peak_detectable: peak.p_target_spokes,
            peak_undetected: peak.p_anomaly,
            per_step,
            predicted_step,
        }
    }

    /// Largest combined target probability seen.
    pub fn max_total(&self) -> f64 {
        self.per_step.iter().map(StepRecord::total).fold(0.0, f64::max)
    }

    pub fn max_detectable(&self) -> f64 {
        self.per_step.iter().map(|r| r.p_target_spokes).fold(0.0, f64::max)
    }

    /// Set when the empirical peak is more than two steps from the
    /// prediction.
    pub fn prediction_warning(&self) -> Option<String> {
        let p = self.predicted_step?;
        (p.abs_diff(self.peak_step) > 2).then(|| {
            format!(
                "peak at step {} is {} steps from the predicted {}",
                self.peak_step,
                p.abs_diff(self.peak_step),
                p
            )
        })
    }

    /// `n,p_target_spokes,p_anomaly,p_rest`.
    pub fn to_csv(&self) -> String {
        let rows = self.per_step.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_sig(r.p_target_spokes),
                fmt_sig(r.p_anomaly),
                fmt_sig(r.p_rest),
            ]
        });
        csv(&["n", "p_target_spokes", "p_anomaly", "p_rest"], rows)
    }

    /// Summary object for JSON output.
    pub fn summary(&self, graph: &StarGraph, kind: &InitialStateKind) -> serde_json::Value {
        serde_json::json!({
            "graph": spec_value(graph),
            "kind": kind.name(),
            "predicted_step": self.predicted_step,
            "peak_step": self.peak_step,
            "peak_detectable": self.peak_detectable,
            "peak_undetected": self.peak_undetected,
            "peak_total": self.peak_detectable + self.peak_undetected,
            "steps": self.per_step.len() - 1,
            "warning": self.prediction_warning(),
        })
    }
}

/// How a search evolves the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// `O(N)` sparse steps in the full space.
    #[default]
    Full,
    /// Steps in the invariant subspace of the initial state, with a
    /// full-space spot check at the peak.
    Reduced,
}

/// Evolves for `max_steps` steps in the full space and records the
/// probabilities after each one (step 0 is the initial state).
pub fn run_search(graph: &StarGraph, kind: &InitialStateKind, max_steps: usize) -> Result<SearchResult> {
    run_search_with(graph, kind, max_steps, Engine::Full)
}

pub fn run_search_with(
    graph: &StarGraph,
    kind: &InitialStateKind,
    max_steps: usize,
    engine: Engine,
) -> Result<SearchResult> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    let init = initial_state(graph, kind)?;
    let predicted = predicted_hitting_step(graph).ok();
    match engine {
        Engine::Full => {
            let records = evolve_full(graph, &init, max_steps);
            Ok(SearchResult::from_records(records, predicted))
        }
        Engine::Reduced => {
            let records = evolve_reduced(graph, &init, max_steps)?;
            let result = SearchResult::from_records(records, predicted);
            let check = evolve_full(graph, &init, result.peak_step);
            let (a, b) = (check.last().unwrap(), &result.per_step[result.peak_step]);
            let diff = (a.p_target_spokes - b.p_target_spokes)
                .abs()
                .max((a.p_anomaly - b.p_anomaly).abs());
            if diff > 1e-9 {
                return Err(Error::Numerical(format!(
                    "reduced evolution disagrees with full evolution by {diff:.3e} at step {}",
                    result.peak_step
                )));
            }
            Ok(result)
        }
    }
}

fn evolve_full(graph: &StarGraph, init: &WalkState, steps: usize) -> Vec<StepRecord> {
    let op = build_step_operator(graph);
    let regions = Regions::of(graph, op.basis());
    let mut cur = init.amplitudes().to_vec();
    let mut next = vec![ZERO; cur.len()];
    let mut records = Vec::with_capacity(steps + 1);
    records.push(regions.record(0, &cur));
    for n in 1..=steps {
        op.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        records.push(regions.record(n, &cur));
    }
    records
}

fn evolve_reduced(graph: &StarGraph, init: &WalkState, steps: usize) -> Result<Vec<StepRecord>> {
    let op = build_step_operator(graph);
    let policy = NumericPolicy::default();
    let basis = invariant_basis(&op, std::slice::from_ref(init), &policy)?;
    let reduced = reduce_operator(&op, &basis)?;
    let regions = Regions::of(graph, op.basis());
    let grams = [
        basis.gram_on(&regions.target),
        basis.gram_on(&regions.anomaly),
        basis.gram_on(&regions.rest),
    ];
    let quad = |g: &DMatrix<Complex64>, c: &DVector<Complex64>| c.dotc(&(g * c)).re;
    let mut c = basis.project(init)?;
    let mut records = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        if n > 0 {
            c = &reduced.matrix * c;
        }
        records.push(StepRecord {
            n,
            p_target_spokes: quad(&grams[0], &c),
            p_anomaly: quad(&grams[1], &c),
            p_rest: quad(&grams[2], &c),
        });
    }
    Ok(records)
}

/// Result of measuring which spoke the particle is on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    /// Sampled spoke (with a seed) or the most likely spoke (without);
    /// `None` when the sample fell on an undetectable state.
    pub detected_edge: Option<usize>,
    pub p_undetected: f64,
    /// Probability of spoke `j` at index `j - 1`.
    pub distribution: Vec<f64>,
}

/// Measures the accessible spokes. With `seed`, draws one outcome.
pub fn measure_accessible(state: &WalkState, graph: &StarGraph, seed: Option<u64>) -> Result<Measurement> {
    check_dim(graph.hilbert_dim(), state.dim())?;
    let basis = make_basis(graph);
    let amps = state.amplitudes();
    let n = graph.n_spokes();
    let distribution: Vec<f64> = (1..=n)
        .map(|j| amps[basis.outgoing(j)].norm_sqr() + amps[basis.incoming(j)].norm_sqr())
        .collect();
    let p_undetected: f64 = amps[2 * n..].iter().map(|a| a.norm_sqr()).sum();
    let detected_edge = match seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let total = distribution.iter().sum::<f64>() + p_undetected;
            let mut u = rng.random::<f64>() * total;
            let mut hit = None;
            for (i, p) in distribution.iter().enumerate() {
                if u < *p {
                    hit = Some(i + 1);
                    break;
                }
                u -= p;
            }
            hit
        }
        None => distribution
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1),
    };
    Ok(Measurement {
        detected_edge,
        p_undetected,
        distribution,
    })
}

/// Neighbour list of outer vertex `j` as an adjacency list would store it
/// (a loop lists the vertex itself).
fn neighbours(graph: &StarGraph, j: usize) -> Vec<usize> {
    match graph.kind() {
        AnomalyKind::ExtraEdge { u, v } if j == u => vec![0, v],
        AnomalyKind::ExtraEdge { u, v } if j == v => vec![0, u],
        AnomalyKind::Loop { at } if j == at => vec![0, j],
        AnomalyKind::ExtendedEdge { at } if j == at => vec![0, graph.extension_vertex()],
        AnomalyKind::MissingLoop { at } if j != at => vec![0, j],
        _ => vec![0],
    }
}

/// What a neighbour list looks like away from the anomaly.
fn typical_neighbours(graph: &StarGraph, j: usize) -> Vec<usize> {
    match graph.kind() {
        AnomalyKind::MissingLoop { .. } => vec![0, j],
        _ => vec![0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BaselineOutcome {
    /// Neighbour lists read before the anomaly showed up.
    pub queries: usize,
}

/// Classical search: read outer vertices' neighbour lists in a random order
/// until one deviates from the plain star.
pub fn classical_baseline(graph: &StarGraph, seed: u64) -> Result<BaselineOutcome> {
    if graph.kind() == AnomalyKind::None {
        return Err(Error::NothingToFind);
    }
    let mut order: Vec<usize> = (1..=graph.n_spokes()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let queries = order
        .iter()
        .position(|&j| neighbours(graph, j) != typical_neighbours(graph, j))
        .expect("an anomalous vertex exists")
        + 1;
    Ok(BaselineOutcome { queries })
}

/// Exact mean of [`classical_baseline`] over uniformly random orders:
/// `(N+1)/(k+1)` with `k` anomalous vertices.
pub fn expected_classical_queries(graph: &StarGraph) -> Result<f64> {
    let k = match graph.kind() {
        AnomalyKind::None => return Err(Error::NothingToFind),
        AnomalyKind::ExtraEdge { .. } => 2.0,
        _ => 1.0,
    };
    Ok((graph.n_spokes() as f64 + 1.0) / (k + 1.0))
}

/// Mean query count over seeds `0..seeds`, offset by `base_seed`.
pub fn classical_mean(graph: &StarGraph, seeds: u64, base_seed: u64) -> Result<f64> {
    let total: usize = (0..seeds)
        .into_par_iter()
        .map(|s| classical_baseline(graph, base_seed.wrapping_add(s)).map(|o| o.queries))
        .sum::<Result<usize>>()?;
    Ok(total as f64 / seeds as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub predicted_step: Option<usize>,
    pub max_steps: usize,
    pub peak_step: usize,
    pub peak_detectable: f64,
    pub peak_undetected: f64,
}

/// Steps scanned for the first peak: half again the prediction, or `4√N`
/// without one. Later revivals of the same height are kept out of the window.
pub fn sweep_window(graph: &StarGraph) -> usize {
    match predicted_hitting_step(graph) {
        Ok(p) => (p * 3 / 2).max(p + 3),
        Err(_) => (4.0 * (graph.n_spokes() as f64).sqrt()).ceil() as usize,
    }
}

/// Runs the same search over several star sizes, in parallel.
pub fn hitting_sweep(
    template: &StarGraph,
    kind: &InitialStateKind,
    n_list: &[usize],
    engine: Engine,
) -> Result<Vec<SweepRow>> {
    n_list
        .par_iter()
        .map(|&n| {
            let graph = template.resized(n)?;
            let max_steps = sweep_window(&graph);
            let r = run_search_with(&graph, kind, max_steps, engine)?;
            Ok(SweepRow {
                n,
                predicted_step: r.predicted_step,
                max_steps,
                peak_step: r.peak_step,
                peak_detectable: r.peak_detectable,
                peak_undetected: r.peak_undetected,
            })
        })
        .collect()
}

/// Log–log fit of peak step against `N`.
pub fn hitting_time_fit(rows: &[SweepRow]) -> Result<LineFit> {
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let steps: Vec<f64> = rows.iter().map(|r| r.peak_step as f64).collect();
    fit_loglog(&ns, &steps)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let body = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            r.predicted_step.map_or(String::new(), |p| p.to_string()),
            r.max_steps.to_string(),
            r.peak_step.to_string(),
            fmt_sig(r.peak_detectable),
            fmt_sig(r.peak_undetected),
            fmt_sig(r.peak_detectable + r.peak_undetected),
        ]
    });
    csv(
        &[
            "N",
            "predicted_step",
            "max_steps",
            "peak_step",
            "peak_detectable",
            "peak_undetected",
            "peak_total",
        ],
        body,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::extra_edge_sector_states;
    use crate::stargraph::{build_star, Anomaly, Phase};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn minus_state_amplitude_at_two_spokes() {
        // N = 2 is below the validated minimum; built directly for this check.
        let g = StarGraph {
            n_spokes: 2,
            anomaly: Anomaly::none(),
        };
        let s = initial_state(&g, &InitialStateKind::Minus).unwrap();
        assert!((s.amplitudes()[0] - c(0.5)).norm() < 1e-15);
        assert!((s.amplitudes()[2] - c(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn minus_state_decomposes_onto_sector_states() {
        let n = 100;
        let g = build_star(n, Anomaly::extra_edge(1, 2)).unwrap();
        let s = initial_state(&g, &InitialStateKind::Minus).unwrap();
        let sector = extra_edge_sector_states(&g).unwrap();
        let nf = n as f64;
        let want = [
            1.0 / nf.sqrt(),
            -1.0 / nf.sqrt(),
            ((nf - 2.0) / (2.0 * nf)).sqrt(),
            -((nf - 2.0) / (2.0 * nf)).sqrt(),
            0.0,
        ];
        for (v, w) in sector.iter().zip(want) {
            assert!((v.inner(&s).unwrap() - c(w)).norm() < 1e-14);
        }
        assert!((sector[0].inner(&s).unwrap().re - 0.1).abs() < 1e-14);
    }

    #[test]
    fn loop_states_are_unit_norm() {
        for phase in [Phase::PI, Phase::pi_fraction(1, 3).unwrap(), Phase::pi_fraction(-1, 3).unwrap()] {
            let g = build_star(16, Anomaly::missing_loop(3, phase)).unwrap();
            for kind in [InitialStateKind::LoopPi, InitialStateKind::LoopThird] {
                let s = initial_state(&g, &kind).unwrap();
                assert!((s.norm() - 1.0).abs() < 1e-14);
            }
        }
        // |1 - e^{2πi/3}| = √3
        let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!(((c(1.0) - omega).norm() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn negative_third_phase_uses_conjugate_state() {
        let plus = build_star(8, Anomaly::missing_loop(1, Phase::pi_fraction(1, 3).unwrap())).unwrap();
        let minus = build_star(8, Anomaly::missing_loop(1, Phase::pi_fraction(-1, 3).unwrap())).unwrap();
        let a = initial_state(&plus, &InitialStateKind::LoopThird).unwrap();
        let b = initial_state(&minus, &InitialStateKind::LoopThird).unwrap();
        assert_eq!(a.conj(), b);
    }

    #[test]
    fn incompatible_kinds() {
        let g = build_star(10, Anomaly::extra_edge(1, 2)).unwrap();
        assert!(matches!(initial_state(&g, &InitialStateKind::LoopPi), Err(Error::Config(_))));
        assert!(matches!(
            initial_state(&g, &InitialStateKind::InOut { a: ZERO, b: ZERO }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            initial_state(&g, &InitialStateKind::Custom(vec![c(1.0); 3])),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(run_search(&g, &InitialStateKind::Minus, 0), Err(Error::Config(_))));
    }

    #[test]
    fn predictions() {
        let p = |g: Anomaly, n| predicted_hitting_step(&build_star(n, g).unwrap());
        assert_eq!(p(Anomaly::extra_edge(1, 2), 100), Ok(14));
        assert_eq!(p(Anomaly::loop_at(1), 100), Ok(19));
        assert_eq!(p(Anomaly::extra_edge(1, 2), 400), Ok(27));
        assert_eq!(p(Anomaly::extra_edge(1, 2), 1000), Ok(43));
        assert_eq!(p(Anomaly::extended_edge(1), 100), Err(Error::NoPrediction("extended_edge")));
    }

    #[test]
    fn extra_edge_search_peaks_near_prediction() {
        let g = build_star(100, Anomaly::extra_edge(1, 2)).unwrap();
        let r = run_search(&g, &InitialStateKind::Minus, 40).unwrap();
        assert!((13..=15).contains(&r.peak_step), "{}", r.peak_step);
        assert!((0.60..=0.70).contains(&r.peak_detectable));
        assert!((0.28..=0.38).contains(&r.peak_undetected));
        assert!(r.prediction_warning().is_none());
        for rec in &r.per_step {
            assert!((rec.total() + rec.p_rest - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn location_does_not_matter() {
        let a = run_search(&build_star(60, Anomaly::extra_edge(1, 2)).unwrap(), &InitialStateKind::Minus, 30).unwrap();
        let b = run_search(&build_star(60, Anomaly::extra_edge(17, 44)).unwrap(), &InitialStateKind::Minus, 30).unwrap();
        assert_eq!(a.peak_step, b.peak_step);
        for (x, y) in a.per_step.iter().zip(&b.per_step) {
            assert!((x.total() - y.total()).abs() < 1e-12);
        }
        let a = run_search(&build_star(60, Anomaly::loop_at(1)).unwrap(), &InitialStateKind::Minus, 30).unwrap();
        let b = run_search(&build_star(60, Anomaly::loop_at(59)).unwrap(), &InitialStateKind::Minus, 30).unwrap();
        assert_eq!(a.peak_step, b.peak_step);
    }

    #[test]
    fn plus_sign_fails() {
        let g = build_star(100, Anomaly::extra_edge(1, 2)).unwrap();
        let r = run_search(&g, &InitialStateKind::Plus, 200).unwrap();
        assert!(r.max_total() < 0.2);
    }

    #[test]
    fn missing_loop_with_pi_phase_localizes() {
        let g = build_star(100, Anomaly::missing_loop(1, Phase::PI)).unwrap();
        let r = run_search(&g, &InitialStateKind::LoopPi, 30).unwrap();
        assert!(r.max_detectable() > 0.5);
    }

    #[test]
    fn reduced_engine_matches_full() {
        let g = build_star(200, Anomaly::loop_at(5)).unwrap();
        let full = run_search_with(&g, &InitialStateKind::Minus, 60, Engine::Full).unwrap();
        let red = run_search_with(&g, &InitialStateKind::Minus, 60, Engine::Reduced).unwrap();
        assert_eq!(full.peak_step, red.peak_step);
        for (a, b) in full.per_step.iter().zip(&red.per_step) {
            assert!((a.p_target_spokes - b.p_target_spokes).abs() < 1e-10);
            assert!((a.p_rest - b.p_rest).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_examples() {
        let g = build_star(4, Anomaly::extra_edge(1, 2)).unwrap();
        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        let mut s = WalkState::zeros(10);
        s.amplitudes_mut()[8] = h;
        s.amplitudes_mut()[9] = h;
        let m = measure_accessible(&s, &g, None).unwrap();
        assert!((m.p_undetected - 1.0).abs() < 1e-15);
        assert_eq!(m.detected_edge, None);
        assert_eq!(measure_accessible(&s, &g, Some(3)).unwrap().detected_edge, None);

        let g = build_star(10, Anomaly::none()).unwrap();
        let s = WalkState::normalized(vec![c(1.0); 20]).unwrap();
        let m = measure_accessible(&s, &g, None).unwrap();
        for p in &m.distribution {
            assert!((p - 0.1).abs() < 1e-15);
        }
        assert!(measure_accessible(&WalkState::zeros(3), &g, None).is_err());
    }

    #[test]
    fn sampling_is_seeded_and_follows_distribution() {
        let g = build_star(4, Anomaly::none()).unwrap();
        let mut a = vec![ZERO; 8];
        a[0] = c(0.8);
        a[5] = c(0.6);
        let s = WalkState::from_amplitudes(a);
        let draws: Vec<_> = (0..2000)
            .map(|seed| measure_accessible(&s, &g, Some(seed)).unwrap().detected_edge)
            .collect();
        let again: Vec<_> = (0..2000)
            .map(|seed| measure_accessible(&s, &g, Some(seed)).unwrap().detected_edge)
            .collect();
        assert_eq!(draws, again);
        let ones = draws.iter().filter(|d| **d == Some(1)).count() as f64 / 2000.0;
        assert!((ones - 0.64).abs() < 0.05, "{ones}");
        assert!(draws.iter().all(|d| matches!(d, Some(1) | Some(2))));
    }

    #[test]
    fn classical_baseline_small_exhaustive() {
        // N = 3, anomaly at a fixed vertex: position of that vertex in a
        // random order averages (1 + 2 + 3)/3 over the 6 orders.
        let g = build_star(3, Anomaly::loop_at(2)).unwrap();
        let mean = classical_mean(&g, 60_000, 0).unwrap();
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
        assert_eq!(expected_classical_queries(&g).unwrap(), 2.0);
        for seed in 0..50 {
            let q = classical_baseline(&g, seed).unwrap().queries;
            assert!((1..=3).contains(&q));
        }
        assert_eq!(
            classical_baseline(&build_star(3, Anomaly::none()).unwrap(), 0),
            Err(Error::NothingToFind)
        );
    }

    #[test]
    fn classical_baseline_detects_every_variant() {
        for a in [
            Anomaly::extra_edge(2, 5),
            Anomaly::loop_at(4),
            Anomaly::extended_edge(6),
            Anomaly::missing_loop(3, Phase::ZERO),
        ] {
            let g = build_star(6, a).unwrap();
            let q = classical_baseline(&g, 11).unwrap().queries;
            assert!((1..=6).contains(&q));
        }
    }
}
