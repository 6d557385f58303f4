//! Star graphs with at most one structural anomaly, and their JSON spec format.
//!
//! A spec file is a UTF-8 JSON object:
//!
//! ```json
//! {"n_spokes":64,"anomaly":{"type":"missing_loop","at":1,"phase_num":1,"phase_den":3}}
//! ```
//!
//! `type` is one of `none`, `extra_edge` (fields `u`, `v`), `loop`,
//! `extended_edge` or `missing_loop` (field `at`). The marking phase of
//! `extended_edge` and `missing_loop` is given either as `phase_num` /
//! `phase_den`, meaning `(num/den)·π`, or as `phase_rad`. Unknown keys are
//! rejected. [`serialize_spec`] emits the canonical form: sorted keys, no
//! whitespace, and rational phases whenever the angle is a small rational
//! multiple of π.

use std::f64::consts::PI;
use std::fmt;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Largest denominator tried when recognising a radian value as `(p/q)·π`.
const MAX_PHASE_DEN: i64 = 24;

/// An angle, kept as an exact rational multiple of π when possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// `(num / den) · π` in lowest terms, `den > 0`.
    PiFraction { num: i64, den: i64 },
    Radians(f64),
}

impl Phase {
    pub const ZERO: Phase = Phase::PiFraction { num: 0, den: 1 };
    pub const PI: Phase = Phase::PiFraction { num: 1, den: 1 };

    pub fn pi_fraction(num: i64, den: i64) -> Result<Phase> {
        if den == 0 {
            return Err(Error::Semantic("phase_den must be nonzero".into()));
        }
        let (mut num, mut den) = (num, den);
        if den < 0 {
            num = -num;
            den = -den;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        Ok(Phase::PiFraction {
            num: num / g,
            den: den / g,
        })
    }

    /// Radian constructor; snaps to a rational multiple of π when `rad` is
    /// bit-identical to `num·π/den` for a small denominator.
    pub fn radians(rad: f64) -> Result<Phase> {
        if !rad.is_finite() {
            return Err(Error::Semantic(format!("phase {rad} is not a finite real")));
        }
        for den in 1..=MAX_PHASE_DEN {
            let num = (rad * den as f64 / PI).round();
            if num.abs() > (4 * den) as f64 {
                continue;
            }
            if num * PI / den as f64 == rad {
                return Phase::pi_fraction(num as i64, den);
            }
        }
        Ok(Phase::Radians(rad))
    }

    pub fn to_radians(self) -> f64 {
        match self {
            Phase::PiFraction { num, den } => num as f64 * PI / den as f64,
            Phase::Radians(r) => r,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Phase::PiFraction { num: 0, .. } => write!(f, "0"),
            Phase::PiFraction { num, den: 1 } => write!(f, "{num}π"),
            Phase::PiFraction { num, den } => write!(f, "{num}π/{den}"),
            Phase::Radians(r) => write!(f, "{r}"),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnomalyKind {
    None,
    /// Extra edge between outer vertices `u < v`.
    ExtraEdge { u: usize, v: usize },
    /// A loop attached to one outer vertex.
    Loop { at: usize },
    /// The spoke to `at` is continued by one more edge to a new leaf `A`.
    ExtendedEdge { at: usize },
    /// Every outer vertex carries a loop except `at`, which gets a dummy
    /// fixed-point loop instead.
    MissingLoop { at: usize },
}

impl AnomalyKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::None => "none",
            AnomalyKind::ExtraEdge { .. } => "extra_edge",
            AnomalyKind::Loop { .. } => "loop",
            AnomalyKind::ExtendedEdge { .. } => "extended_edge",
            AnomalyKind::MissingLoop { .. } => "missing_loop",
        }
    }
}

/// Anomaly variant plus its marking phase.
///
/// The phase multiplies the `|1,A⟩ → |A,1⟩` amplitude of an extended edge and
/// the `|0,1⟩ → |1,0⟩` amplitude of a missing loop. It is always zero for the
/// other variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub mark_phase: Phase,
}

impl Anomaly {
    pub fn none() -> Self {
        Self {
            kind: AnomalyKind::None,
            mark_phase: Phase::ZERO,
        }
    }

    pub fn extra_edge(u: usize, v: usize) -> Self {
        Self {
            kind: AnomalyKind::ExtraEdge { u, v },
            mark_phase: Phase::ZERO,
        }
    }

    pub fn loop_at(at: usize) -> Self {
        Self {
            kind: AnomalyKind::Loop { at },
            mark_phase: Phase::ZERO,
        }
    }

    /// Extended edge marked with phase π, the variant that is searchable.
    pub fn extended_edge(at: usize) -> Self {
        Self {
            kind: AnomalyKind::ExtendedEdge { at },
            mark_phase: Phase::PI,
        }
    }

    pub fn missing_loop(at: usize, phase: Phase) -> Self {
        Self {
            kind: AnomalyKind::MissingLoop { at },
            mark_phase: phase,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.mark_phase = phase;
        self
    }

    fn uses_phase(&self) -> bool {
        matches!(
            self.kind,
            AnomalyKind::ExtendedEdge { .. } | AnomalyKind::MissingLoop { .. }
        )
    }
}

/// A validated star graph: hub `0`, outer vertices `1..=N`, plus the anomaly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarGraph {
    pub(crate) n_spokes: usize,
    pub(crate) anomaly: Anomaly,
}

impl StarGraph {
    pub fn n_spokes(&self) -> usize {
        self.n_spokes
    }

    pub fn anomaly(&self) -> &Anomaly {
        &self.anomaly
    }

    pub fn kind(&self) -> AnomalyKind {
        self.anomaly.kind
    }

    /// Same anomaly on a star with a different number of spokes.
    pub fn resized(&self, n_spokes: usize) -> Result<StarGraph> {
        build_star(n_spokes, self.anomaly)
    }

    /// Label of the leaf vertex added by an extended edge.
    pub fn extension_vertex(&self) -> usize {
        self.n_spokes + 1
    }

    /// Dimension of the walk's Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        let n = self.n_spokes;
        match self.anomaly.kind {
            AnomalyKind::None => 2 * n,
            AnomalyKind::ExtraEdge { .. } => 2 * n + 2,
            AnomalyKind::Loop { .. } => 2 * n + 1,
            AnomalyKind::ExtendedEdge { .. } => 2 * n + 2,
            AnomalyKind::MissingLoop { .. } => 3 * n,
        }
    }

    /// Outer vertices whose spokes lead into the anomaly.
    pub fn anomaly_spokes(&self) -> Vec<usize> {
        match self.anomaly.kind {
            AnomalyKind::None => vec![],
            AnomalyKind::ExtraEdge { u, v } => vec![u, v],
            AnomalyKind::Loop { at }
            | AnomalyKind::ExtendedEdge { at }
            | AnomalyKind::MissingLoop { at } => vec![at],
        }
    }
}

/// Validates and builds a star graph. An extra edge given as `(v, u)` with
/// `v > u` is stored as `(u, v)`.
pub fn build_star(n: usize, anomaly: Anomaly) -> Result<StarGraph> {
    if n < 3 {
        return Err(Error::Size(n));
    }
    let check = |vertex: usize| {
        if (1..=n).contains(&vertex) {
            Ok(())
        } else {
            Err(Error::Index {
                vertex,
                n_spokes: n,
            })
        }
    };
    let mut anomaly = anomaly;
    match anomaly.kind {
        AnomalyKind::None => {}
        AnomalyKind::ExtraEdge { u, v } => {
            check(u)?;
            check(v)?;
            if u == v {
                return Err(Error::SelfEdge(u));
            }
            anomaly.kind = AnomalyKind::ExtraEdge {
                u: u.min(v),
                v: u.max(v),
            };
        }
        AnomalyKind::Loop { at }
        | AnomalyKind::ExtendedEdge { at }
        | AnomalyKind::MissingLoop { at } => check(at)?,
    }
    if !anomaly.uses_phase() {
        anomaly.mark_phase = Phase::ZERO;
    }
    if !anomaly.mark_phase.to_radians().is_finite() {
        return Err(Error::Semantic("mark phase is not finite".into()));
    }
    Ok(StarGraph {
        n_spokes: n,
        anomaly,
    })
}

/// Parses a graph spec (see the module docs).
pub fn parse_spec(text: &str) -> Result<StarGraph> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = value
        .as_object()
        .ok_or_else(|| Error::Semantic("spec must be a JSON object".into()))?;
    reject_unknown(root, &["n_spokes", "anomaly"], "spec")?;
    let n = get_uint(root, "n_spokes", "spec")?;
    let anomaly = match root.get("anomaly") {
        None => Anomaly::none(),
        Some(a) => parse_anomaly(a)?,
    };
    build_star(n, anomaly)
}

fn parse_anomaly(value: &Value) -> Result<Anomaly> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Semantic("`anomaly` must be an object".into()))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Semantic("anomaly needs a string `type`".into()))?;
    const PHASE_KEYS: [&str; 3] = ["phase_num", "phase_den", "phase_rad"];
    let (kind, fields): (AnomalyKind, &[&str]) = match ty {
        "none" => (AnomalyKind::None, &["type"]),
        "extra_edge" => (
            AnomalyKind::ExtraEdge {
                u: get_uint(obj, "u", "extra_edge")?,
                v: get_uint(obj, "v", "extra_edge")?,
            },
            &["type", "u", "v"],
        ),
        "loop" => (
            AnomalyKind::Loop {
                at: get_uint(obj, "at", "loop")?,
            },
            &["type", "at"],
        ),
        "extended_edge" => (
            AnomalyKind::ExtendedEdge {
                at: get_uint(obj, "at", "extended_edge")?,
            },
            &["type", "at", PHASE_KEYS[0], PHASE_KEYS[1], PHASE_KEYS[2]],
        ),
        "missing_loop" => (
            AnomalyKind::MissingLoop {
                at: get_uint(obj, "at", "missing_loop")?,
            },
            &["type", "at", PHASE_KEYS[0], PHASE_KEYS[1], PHASE_KEYS[2]],
        ),
        other => {
            return Err(Error::Semantic(format!("unknown anomaly type `{other}`")));
        }
    };
    reject_unknown(obj, fields, ty)?;
    let default_phase = match kind {
        AnomalyKind::ExtendedEdge { .. } => Phase::PI,
        _ => Phase::ZERO,
    };
    let mark_phase = parse_phase(obj)?.unwrap_or(default_phase);
    Ok(Anomaly { kind, mark_phase })
}

fn parse_phase(obj: &Map<String, Value>) -> Result<Option<Phase>> {
    let num = obj.get("phase_num");
    let den = obj.get("phase_den");
    let rad = obj.get("phase_rad");
    match (num, den, rad) {
        (None, None, None) => Ok(None),
        (Some(_), Some(_), None) => {
            let num = num
                .and_then(Value::as_i64)
                .ok_or_else(|| Error::Semantic("`phase_num` must be an integer".into()))?;
            let den = den
                .and_then(Value::as_i64)
                .ok_or_else(|| Error::Semantic("`phase_den` must be an integer".into()))?;
            Phase::pi_fraction(num, den).map(Some)
        }
        (None, None, Some(r)) => {
            let r = r
                .as_f64()
                .ok_or_else(|| Error::Semantic("`phase_rad` must be a number".into()))?;
            Phase::radians(r).map(Some)
        }
        (_, _, None) => Err(Error::Semantic(
            "`phase_num` and `phase_den` must be given together".into(),
        )),
        _ => Err(Error::Semantic(
            "give either `phase_num`/`phase_den` or `phase_rad`, not both".into(),
        )),
    }
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Semantic(format!("unknown key `{k}` in {ctx}"))),
        None => Ok(()),
    }
}

fn get_uint(obj: &Map<String, Value>, key: &str, ctx: &str) -> Result<usize> {
    let v = obj
        .get(key)
        .ok_or_else(|| Error::Semantic(format!("{ctx} is missing `{key}`")))?;
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| Error::Semantic(format!("`{key}` must be a nonnegative integer, got {v}")))
}

/// Canonical spec text for a graph; [`parse_spec`] inverts it.
pub fn serialize_spec(graph: &StarGraph) -> String {
    serde_json::to_string(&spec_value(graph)).expect("spec value is always serializable")
}

/// Canonical spec as a JSON value (keys sorted).
pub fn spec_value(graph: &StarGraph) -> Value {
    let mut anomaly = Map::new();
    anomaly.insert("type".into(), graph.anomaly.kind.name().into());
    match graph.anomaly.kind {
        AnomalyKind::None => {}
        AnomalyKind::ExtraEdge { u, v } => {
            anomaly.insert("u".into(), u.into());
            anomaly.insert("v".into(), v.into());
        }
        AnomalyKind::Loop { at } => {
            anomaly.insert("at".into(), at.into());
        }
        AnomalyKind::ExtendedEdge { at } | AnomalyKind::MissingLoop { at } => {
            anomaly.insert("at".into(), at.into());
            match graph.anomaly.mark_phase {
                Phase::PiFraction { num, den } => {
                    anomaly.insert("phase_num".into(), num.into());
                    anomaly.insert("phase_den".into(), den.into());
                }
                Phase::Radians(r) => {
                    anomaly.insert("phase_rad".into(), r.into());
                }
            }
        }
    }
    let mut root = Map::new();
    root.insert("anomaly".into(), Value::Object(anomaly));
    root.insert("n_spokes".into(), graph.n_spokes.into());
    Value::Object(root)
}
