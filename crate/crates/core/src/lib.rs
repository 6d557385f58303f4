//! Discrete-time scattering quantum walks on star graphs with structural
//! anomalies.
//!
//! The particle lives on directed edges `|u,v⟩` (and on loops `|l_j⟩`) and
//! scatters at vertices once per time step. The hub of the star uses the
//! Grover-like coin with reflection `-r` and transmission `t`, where
//! `r = (N-2)/N` and `t = 2/N`; the outer vertices either pass the particle
//! straight back or route it through the anomaly (an extra edge, a loop, an
//! edge extension, or a missing loop).
//!
//! The crate is organised bottom-up:
//!
//! - [`edgespace`]: the directed-edge Hilbert space and walk states.
//! - [`stargraph`]: graph family, anomaly descriptors and the JSON spec format.
//! - [`stepop`]: the one-step unitary, applied in `O(N)` per step.
//! - [`collapse`]: Krylov-style closure onto the invariant subspace.
//! - [`spectral`]: eigenphases, projectors and `U^n` via the spectral form.
//! - [`search`]: initial states, hitting times, measurement and the classical
//!   baseline.
//! - [`perturb`]: eigenphase splitting of the finite-`N` walk relative to its
//!   `N → ∞` limit.
//!
//! ```
//! use anomaly_walk::{build_star, Anomaly, InitialStateKind, run_search};
//!
//! let graph = build_star(100, Anomaly::extra_edge(1, 2)).unwrap();
//! let result = run_search(&graph, &InitialStateKind::Minus, 40).unwrap();
//! assert!((13..=15).contains(&result.peak_step));
//! ```

pub mod collapse;
pub mod edgespace;
pub mod error;
pub mod numeric;
pub mod perturb;
pub mod powerlaw;
pub mod report;
pub mod search;
pub mod spectral;
pub mod stargraph;
pub mod stepop;

pub use collapse::{invariant_basis, lift, reduce_operator, ReducedBasis, ReducedOperator};
pub use edgespace::{edge_probabilities, make_basis, norm, BasisLabel, EdgeBasis, EdgeKey, WalkState};
pub use error::{Error, Result};
pub use numeric::{Complex64, NumericPolicy};
pub use perturb::{
    build_unperturbed, eigenphase_shifts, fit_scaling, EigenShift, HubLimit, ScalingFit,
};
pub use search::{
    classical_baseline, initial_state, measure_accessible, predicted_hitting_step, run_search,
    InitialStateKind, SearchResult,
};
pub use spectral::{eigendecompose, power_apply, Spectrum};
pub use stargraph::{build_star, parse_spec, serialize_spec, Anomaly, AnomalyKind, Phase, StarGraph};
pub use stepop::{apply_step, build_step_operator, check_unitarity, StepOperator, UnitarityReport};
