//! Finite-`N` walks as perturbations of their `N → ∞` limit.
//!
//! As `N` grows the hub coin tends to pure reflection on any fixed spoke,
//! so the anomaly decouples from the bulk. The limit operator `U₀` used here
//! keeps that structure in the full space. The spokes touching the anomaly
//! reflect with `-1`, and the remaining `B` bulk spokes keep a Grover coin
//! among themselves (`-(B-2)/B` on the diagonal, `2/B` off it). Restricted
//! to the symmetric sector this is the reduced matrix with `r = 1, t = 0`.
//! [`HubLimit::FullReflection`] (every spoke reflects) is kept as well, but
//! it leaves the bulk's uniform states oscillating instead of fixed and is
//! not the limit of the symmetric sector.
//!
//! Eigenphases of `U₀` are grouped into branches. Each perturbed eigenphase
//! is matched to the branch whose eigenspace it overlaps most, and its shift
//! `Δθ` is measured from the branch phase. A branch with several coupled
//! eigenvectors splits as `N^{-1/2}`, a simple one moves as `N^{-1}`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::collapse::{invariant_basis, invariant_basis_multi, project_operator};
use crate::error::{Error, Result};
use crate::numeric::{wrap_phase, Complex64, NumericPolicy};
use crate::powerlaw::{fit_loglog, LineFit};
use crate::report::{csv, fmt_sig};
use crate::search::symmetric_states;
use crate::spectral::{eigendecompose_with, Spectrum};
use crate::stargraph::StarGraph;
use crate::stepop::{HubGroup, StepOperator};

/// Which `N → ∞` operator to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HubLimit {
    /// Every spoke reflects at the hub with `-1`.
    FullReflection,
    /// Anomaly spokes reflect with `-1`; the bulk keeps its Grover coin.
    #[default]
    BulkTransmission,
}

/// The unperturbed operator `U₀` for `graph`. Outer-vertex rules are those
/// of the perturbed walk.
pub fn build_unperturbed(graph: &StarGraph, limit: HubLimit) -> StepOperator {
    let n = graph.n_spokes();
    let reflecting = |spokes: Vec<usize>| HubGroup {
        spokes,
        reflect: 1.0,
        transmit: 0.0,
    };
    let groups = match limit {
        HubLimit::FullReflection => vec![reflecting((1..=n).collect())],
        HubLimit::BulkTransmission => {
            let special = graph.anomaly_spokes();
            let bulk: Vec<usize> = (1..=n).filter(|j| !special.contains(j)).collect();
            let b = bulk.len() as f64;
            let mut groups = vec![HubGroup {
                spokes: bulk,
                reflect: (b - 2.0) / b,
                transmit: 2.0 / b,
            }];
            if !special.is_empty() {
                groups.push(reflecting(special));
            }
            groups
        }
    };
    StepOperator::assemble(graph, 1.0, 0.0, groups)
}

/// How one branch of `U₀` moved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenShift {
    pub theta0: f64,
    pub multiplicity0: usize,
    /// One entry per perturbed eigenvector matched to this branch.
    pub shifts: Vec<f64>,
    /// Fraction of each matched eigenvector inside the branch eigenspace.
    pub overlaps: Vec<f64>,
    /// Eigenvectors on which `U` and `U₀` agree exactly; they never move.
    pub decoupled: Vec<bool>,
}

impl EigenShift {
    /// Multiplicity not counting decoupled eigenvectors.
    pub fn effective_multiplicity(&self) -> usize {
        self.decoupled.iter().filter(|d| !**d).count()
    }

    pub fn is_degenerate(&self) -> bool {
        self.effective_multiplicity() > 1
    }

    /// Largest `|Δθ|` over coupled eigenvectors.
    pub fn max_shift(&self) -> f64 {
        self.shifts
            .iter()
            .zip(&self.decoupled)
            .filter(|(_, d)| !**d)
            .map(|(s, _)| s.abs())
            .fold(0.0, f64::max)
    }

    /// Rounded `theta0`, used to identify the branch across `N`.
    pub fn key(&self) -> i64 {
        (self.theta0 * 1e6).round() as i64
    }
}

/// Matches perturbed eigenvectors to branches of `unperturbed`. A cluster
/// whose best overlap is below `1 - match_tol`, or within `match_tol` of its
/// second best, is ambiguous.
pub fn eigenphase_shifts(
    perturbed: &Spectrum,
    unperturbed: &Spectrum,
    match_tol: f64,
) -> Result<Vec<EigenShift>> {
    if perturbed.dim() != unperturbed.dim() {
        return Err(Error::Dimension {
            expected: unperturbed.dim(),
            found: perturbed.dim(),
        });
    }
    let mut out: Vec<EigenShift> = unperturbed
        .eigenphases()
        .iter()
        .zip(unperturbed.multiplicities())
        .map(|(&theta0, m)| EigenShift {
            theta0,
            multiplicity0: m,
            shifts: vec![],
            overlaps: vec![],
            decoupled: vec![],
        })
        .collect();

    for (c, &theta) in perturbed.eigenphases().iter().enumerate() {
        let vc = perturbed.eigenvectors(c);
        let mc = vc.ncols() as f64;
        let overlaps: Vec<f64> = (0..unperturbed.len())
            .map(|b| (unperturbed.eigenvectors(b).adjoint() * vc).norm_squared() / mc)
            .collect();
        let mut order: Vec<usize> = (0..overlaps.len()).collect();
        order.sort_by(|a, b| overlaps[*b].total_cmp(&overlaps[*a]));
        let best = order[0];
        let second = order.get(1).map_or(0.0, |&i| overlaps[i]);
        if overlaps[best] < 1.0 - match_tol || second >= overlaps[best] - match_tol {
            return Err(Error::Matching(format!(
                "eigenphase {theta:.6} overlaps branches at {:.3} and {second:.3}",
                overlaps[best]
            )));
        }
        let branch = &mut out[best];
        for _ in 0..vc.ncols() {
            branch.shifts.push(wrap_phase(theta - branch.theta0));
            branch.overlaps.push(overlaps[best]);
            branch.decoupled.push(false);
        }
    }
    for b in &out {
        if b.shifts.len() != b.multiplicity0 {
            return Err(Error::Matching(format!(
                "branch {:.6} has multiplicity {} but {} eigenvectors matched",
                b.theta0,
                b.multiplicity0,
                b.shifts.len()
            )));
        }
    }
    Ok(out)
}

/// Marks eigenvectors of the perturbed spectrum on which the two reduced
/// operators act identically, in the order [`eigenphase_shifts`] assigned
/// them.
fn mark_decoupled(
    shifts: &mut [EigenShift],
    perturbed: &Spectrum,
    unperturbed: &Spectrum,
    diff: &DMatrix<Complex64>,
    tol: f64,
) {
    let mut cursor = vec![0usize; shifts.len()];
    for c in 0..perturbed.len() {
        let vc = perturbed.eigenvectors(c);
        let best = (0..unperturbed.len())
            .max_by(|a, b| {
                let oa = (unperturbed.eigenvectors(*a).adjoint() * vc).norm_squared();
                let ob = (unperturbed.eigenvectors(*b).adjoint() * vc).norm_squared();
                oa.total_cmp(&ob)
            })
            .expect("non-empty spectrum");
        let sv = (diff * vc).singular_values();
        let quiet = sv.iter().filter(|s| **s < tol).count();
        let b = &mut shifts[best];
        for k in 0..vc.ncols() {
            b.decoupled[cursor[best] + k] = k < quiet;
        }
        cursor[best] += vc.ncols();
    }
}

/// Everything measured at one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbPoint {
    pub n: usize,
    pub closure_dim: usize,
    /// The closure of `U` alone was not `U₀`-invariant and had to be
    /// extended under both operators.
    pub joint_closure: bool,
    pub branches: Vec<EigenShift>,
}

const DECOUPLED_TOL: f64 = 1e-10;

/// Compares `U` and `U₀` on the smallest subspace containing the symmetric
/// states that both leave invariant.
pub fn perturbation_point(graph: &StarGraph, limit: HubLimit, policy: &NumericPolicy) -> Result<PerturbPoint> {
    let u = crate::stepop::build_step_operator(graph);
    let u0 = build_unperturbed(graph, limit);
    let seeds = symmetric_states(graph);
    let mut basis = invariant_basis(&u, &seeds, policy)?;
    let mut joint = false;
    if project_operator(&u0, &basis)?.1 > policy.invariance {
        basis = invariant_basis_multi(&[&u, &u0], &seeds, policy)?;
        joint = true;
    }
    let (m, r) = project_operator(&u, &basis)?;
    let (m0, r0) = project_operator(&u0, &basis)?;
    let residual = r.max(r0);
    if residual > policy.invariance {
        return Err(Error::NotInvariant { residual });
    }
    let spec = eigendecompose_with(&m, policy.cluster, policy)?;
    let spec0 = eigendecompose_with(&m0, policy.cluster, policy)?;
    let mut branches = eigenphase_shifts(&spec, &spec0, policy.match_tol)?;
    mark_decoupled(&mut branches, &spec, &spec0, &(&m - &m0), DECOUPLED_TOL);
    Ok(PerturbPoint {
        n: graph.n_spokes(),
        closure_dim: basis.dim(),
        joint_closure: joint,
        branches,
    })
}

/// [`perturbation_point`] for every size in `n_list`, in parallel.
pub fn perturbation_sweep(
    template: &StarGraph,
    n_list: &[usize],
    limit: HubLimit,
    policy: &NumericPolicy,
) -> Result<Vec<PerturbPoint>> {
    n_list
        .par_iter()
        .map(|&n| perturbation_point(&template.resized(n)?, limit, policy))
        .collect()
}

/// `N,branch_theta0,multiplicity0,delta_theta,overlap`, one row per matched
/// eigenvector.
pub fn shifts_csv(points: &[PerturbPoint]) -> String {
    let mut rows = Vec::new();
    for p in points {
        for b in &p.branches {
            for (s, o) in b.shifts.iter().zip(&b.overlaps) {
                rows.push(vec![
                    p.n.to_string(),
                    fmt_sig(b.theta0),
                    b.multiplicity0.to_string(),
                    fmt_sig(*s),
                    fmt_sig(*o),
                ]);
            }
        }
    }
    csv(&["N", "branch_theta0", "multiplicity0", "delta_theta", "overlap"], rows)
}

/// Power-law fit of one branch's largest shift against `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchFit {
    pub theta0: f64,
    pub multiplicity0: usize,
    pub effective_multiplicity: usize,
    /// `None` when fewer than four sizes had a shift above the floor.
    pub fit: Option<LineFit>,
    pub usable_points: usize,
}

impl BranchFit {
    pub fn require(&self) -> Result<LineFit> {
        self.fit.ok_or(Error::InsufficientData {
            branch: self.theta0,
            usable: self.usable_points,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.effective_multiplicity > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub branches: Vec<BranchFit>,
}

impl ScalingFit {
    /// `branch_theta0,slope,intercept,r_squared,points_used`.
    pub fn to_csv(&self) -> String {
        let rows = self.branches.iter().map(|b| match b.fit {
            Some(f) => vec![
                fmt_sig(b.theta0),
                fmt_sig(f.slope),
                fmt_sig(f.intercept),
                fmt_sig(f.r_squared),
                f.points.to_string(),
            ],
            None => vec![
                fmt_sig(b.theta0),
                String::new(),
                String::new(),
                String::new(),
                b.usable_points.to_string(),
            ],
        });
        csv(&["branch_theta0", "slope", "intercept", "r_squared", "points_used"], rows)
    }
}

const MIN_FIT_POINTS: usize = 4;

/// θ₀, multiplicity, effective multiplicity, (log N, log |Δθ|) pairs.
type BranchSeries = (f64, usize, usize, Vec<(f64, f64)>);

/// Fits `log max|Δθ|` against `log N` per branch, skipping shifts at or
/// below `floor` (they are rounding noise, not scaling).
pub fn fit_scaling(points: &[PerturbPoint], floor: f64) -> Result<ScalingFit> {
    let mut by_key: BTreeMap<i64, BranchSeries> = BTreeMap::new();
    for p in points {
        for b in &p.branches {
            let entry = by_key
                .entry(b.key())
                .or_insert((b.theta0, b.multiplicity0, b.effective_multiplicity(), vec![]));
            if entry.1 != b.multiplicity0 || entry.2 != b.effective_multiplicity() {
                return Err(Error::Matching(format!(
                    "branch {:.6} changes multiplicity across N",
                    b.theta0
                )));
            }
            let s = b.max_shift();
            if s > floor {
                entry.3.push((p.n as f64, s));
            }
        }
    }
    let mut branches = Vec::with_capacity(by_key.len());
    for (theta0, multiplicity0, effective_multiplicity, data) in by_key.into_values() {
        let fit = if data.len() >= MIN_FIT_POINTS {
            let (ns, ys): (Vec<f64>, Vec<f64>) = data.iter().copied().unzip();
            Some(fit_loglog(&ns, &ys)?)
        } else {
            None
        };
        branches.push(BranchFit {
            theta0,
            multiplicity0,
            effective_multiplicity,
            fit,
            usable_points: data.len(),
        });
    }
    Ok(ScalingFit { branches })
}
