//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured values. Exits non-zero if any criterion fails for a reason not
//! listed in `KNOWN_DEVIATIONS`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anomaly_walk::collapse::{extra_edge_sector_states, invariant_basis};
use anomaly_walk::perturb::{fit_scaling, perturbation_sweep, HubLimit};
use anomaly_walk::search::{
    classical_mean, expected_classical_queries, hitting_sweep, hitting_time_fit, Engine,
};
use anomaly_walk::{
    build_star, build_step_operator, initial_state, lift, parse_spec, predicted_hitting_step,
    reduce_operator, run_search, serialize_spec, Anomaly, Complex64,
    InitialStateKind, NumericPolicy, Phase, StarGraph, WalkState,
};
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-checks that cannot hold as written, with the reason. They are still
/// evaluated and printed as failures.
const KNOWN_DEVIATIONS: &[(&str, &str)] = &[(
    "3a",
    "the minus state is orthogonal to the uniform fixed point of U, so its minimal closure is 4-dimensional; the 5-dimensional sector is recovered from the sector states",
)];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn star(n: usize, a: Anomaly) -> StarGraph {
    build_star(n, a).expect("valid graph")
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// First-peak window: the walk revives periodically, and later revivals
/// are as high as the first.
fn sweep_steps(g: &StarGraph) -> usize {
    anomaly_walk::search::sweep_window(g)
}

fn pow2(from: u32, to: u32) -> Vec<usize> {
    (from..=to).map(|k| 1usize << k).collect()
}

fn c1_extra_edge_search() -> Outcome {
    let start = Instant::now();
    let g = star(100, Anomaly::extra_edge(1, 2));
    let r = run_search(&g, &InitialStateKind::Minus, sweep_steps(&g)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let predicted = predicted_hitting_step(&g).map_err(|e| e.to_string())?;
    check(
        r.peak_step.abs_diff(14) <= 1
            && predicted == 14
            && (0.60..=0.70).contains(&r.peak_detectable)
            && (0.28..=0.38).contains(&r.peak_undetected)
            && elapsed < Duration::from_secs(1),
        format!(
            "N=100 peak step {} (predicted {predicted}), spokes {:.4}, edge {:.4}, {:.1?}",
            r.peak_step, r.peak_detectable, r.peak_undetected, elapsed
        ),
    )
}

fn c2_sign_sensitivity() -> Outcome {
    let g = star(100, Anomaly::extra_edge(1, 2));
    let r = run_search(&g, &InitialStateKind::Plus, 200).map_err(|e| e.to_string())?;
    let max = r.max_total();
    check(max < 0.2, format!("plus state max target probability {max:.4} over n <= 200"))
}

fn c3_reduced_fidelity() -> Vec<(&'static str, Outcome)> {
    let policy = NumericPolicy::default();
    let sizes = [4usize, 10, 100, 1000];
    let mut dims = vec![];
    let mut sector_dims = vec![];
    let mut worst_lift = 0.0f64;
    let mut worst_matrix = 0.0f64;
    for &n in &sizes {
        let g = star(n, Anomaly::extra_edge(1, 2));
        let op = build_step_operator(&g);
        let seed = initial_state(&g, &InitialStateKind::Minus).unwrap();
        let basis = invariant_basis(&op, std::slice::from_ref(&seed), &policy).unwrap();
        dims.push(basis.dim());

        let sector = extra_edge_sector_states(&g).unwrap();
        let sector_basis = invariant_basis(&op, &sector, &policy).unwrap();
        sector_dims.push(sector_basis.dim());

        // reduced evolution, lifted, against full evolution
        let red = reduce_operator(&op, &basis).unwrap();
        let mut coeffs = basis.project(&seed).unwrap();
        let mut full = seed.clone();
        let mut scratch = vec![Complex64::new(0.0, 0.0); op.dim()];
        for _ in 0..200 {
            coeffs = &red.matrix * coeffs;
            op.apply_into(full.amplitudes(), &mut scratch);
            full = WalkState::from_amplitudes(scratch.clone());
            let lifted = lift(coeffs.as_slice(), &basis).unwrap();
            worst_lift = worst_lift.max(lifted.max_abs_diff(&full));
        }

        // matrix elements ⟨ψ_a|U|ψ_b⟩ in the hand-built sector basis
        let (r, t) = (op.hub_r(), op.hub_t());
        let cross = 2.0 * (r * t).sqrt();
        let mut want = DMatrix::<Complex64>::zeros(5, 5);
        want[(4, 0)] = c(1.0);
        want[(0, 1)] = c(-(r - t));
        want[(2, 1)] = c(cross);
        want[(3, 2)] = c(1.0);
        want[(2, 3)] = c(r - t);
        want[(0, 3)] = c(cross);
        want[(1, 4)] = c(1.0);
        for (b, vb) in sector.iter().enumerate() {
            let image = anomaly_walk::apply_step(&op, vb).unwrap();
            for (a, va) in sector.iter().enumerate() {
                let got = va.inner(&image).unwrap();
                worst_matrix = worst_matrix.max((got - want[(a, b)]).norm());
            }
        }
    }
    vec![
        (
            "3a",
            check(
                dims.iter().all(|d| *d == 5),
                format!(
                    "minus-state closure dims {dims:?} for N {sizes:?}; sector-state closure dims {sector_dims:?}"
                ),
            ),
        ),
        (
            "3b",
            check(
                worst_lift < 1e-9,
                format!("lifted reduced vs full evolution, n <= 200: max amplitude error {worst_lift:.2e}"),
            ),
        ),
        (
            "3c",
            check(
                worst_matrix < 1e-12,
                format!("sector-basis matrix vs closed form: max entry error {worst_matrix:.2e}"),
            ),
        ),
    ]
}

fn c4_loop_search() -> Outcome {
    let g = star(100, Anomaly::loop_at(1));
    let r = run_search(&g, &InitialStateKind::Minus, sweep_steps(&g)).map_err(|e| e.to_string())?;
    let predicted = predicted_hitting_step(&g).map_err(|e| e.to_string())?;
    check(
        r.peak_step.abs_diff(19) <= 1
            && predicted == 19
            && (0.60..=0.70).contains(&r.peak_detectable)
            && (0.28..=0.38).contains(&r.peak_undetected),
        format!(
            "N=100 peak step {} (predicted {predicted}), spoke {:.4}, loop {:.4}",
            r.peak_step, r.peak_detectable, r.peak_undetected
        ),
    )
}

fn c5_hitting_scaling() -> Outcome {
    let start = Instant::now();
    let ns = pow2(6, 12);
    let mut parts = vec![];
    let mut ok = true;
    for (name, a) in [("extra_edge", Anomaly::extra_edge(1, 2)), ("loop", Anomaly::loop_at(1))] {
        let rows = hitting_sweep(&star(8, a), &InitialStateKind::Minus, &ns, Engine::Reduced)
            .map_err(|e| e.to_string())?;
        let fit = hitting_time_fit(&rows).map_err(|e| e.to_string())?;
        ok &= (fit.slope - 0.5).abs() <= 0.05;
        let steps: Vec<usize> = rows.iter().map(|r| r.peak_step).collect();
        parts.push(format!("{name} slope {:.4} (steps {steps:?})", fit.slope));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    check(ok, format!("N 64..4096: {}; {:.1?}", parts.join(", "), elapsed))
}

fn inout_grid() -> Vec<InitialStateKind> {
    let mut kinds = vec![
        InitialStateKind::InOut { a: c(1.0), b: c(0.0) },
        InitialStateKind::InOut { a: c(0.0), b: c(1.0) },
    ];
    for k in 1..=5 {
        let alpha = k as f64 * PI / 12.0;
        for m in 0..5 {
            let beta = m as f64 * 2.0 * PI / 5.0;
            kinds.push(InitialStateKind::InOut {
                a: c(alpha.cos()),
                b: Complex64::from_polar(alpha.sin(), beta),
            });
        }
    }
    kinds
}

fn c6_failure_cases() -> Outcome {
    let grid = inout_grid();
    let mut ok = true;
    let mut parts = vec![];
    for (name, a) in [
        ("extended_edge(0)", Anomaly::extended_edge(1).with_phase(Phase::ZERO)),
        ("missing_loop(0)", Anomaly::missing_loop(1, Phase::ZERO)),
    ] {
        for n in [64usize, 256] {
            let g = star(n, a);
            let steps = (10.0 * (n as f64).sqrt()).ceil() as usize;
            let mut worst = 0.0f64;
            for kind in &grid {
                let r = run_search(&g, kind, steps).map_err(|e| e.to_string())?;
                worst = worst.max(r.max_total());
            }
            let bound = 3.0 / n as f64 + 0.1;
            ok &= worst < bound;
            parts.push(format!("{name} N={n} max {worst:.4} < {bound:.4}"));
        }
    }
    check(ok, format!("{} states each: {}", grid.len(), parts.join(", ")))
}

fn c7_marked_fixes() -> Outcome {
    let third = Phase::pi_fraction(1, 3).unwrap();
    let cases = [
        ("extended_edge(pi)", Anomaly::extended_edge(1), InitialStateKind::Minus, false),
        ("missing_loop(pi)", Anomaly::missing_loop(1, Phase::PI), InitialStateKind::LoopPi, true),
        ("missing_loop(pi/3)", Anomaly::missing_loop(1, third), InitialStateKind::LoopThird, true),
    ];
    let mut ok = true;
    let mut parts = vec![];
    for (name, a, kind, spoke_only) in cases {
        let mut vals = vec![];
        for n in [64usize, 256, 1024] {
            let g = star(n, a);
            let steps = (4.0 * (n as f64).sqrt()).floor() as usize;
            let r = run_search(&g, &kind, steps).map_err(|e| e.to_string())?;
            let best = if spoke_only { r.max_detectable() } else { r.max_total() };
            ok &= best > 0.5;
            vals.push(format!("{best:.3}"));
        }
        parts.push(format!("{name} [{}]", vals.join(", ")));
    }
    check(ok, format!("max within 4*sqrt(N), N 64/256/1024: {}", parts.join(", ")))
}

fn c8_perturbation_scaling() -> Outcome {
    let policy = NumericPolicy::default();
    let ns = pow2(6, 12);
    let third = Phase::pi_fraction(1, 3).unwrap();
    let variants = [
        ("extra_edge", Anomaly::extra_edge(1, 2)),
        ("loop", Anomaly::loop_at(1)),
        ("extended_edge(pi)", Anomaly::extended_edge(1)),
        ("missing_loop(pi)", Anomaly::missing_loop(1, Phase::PI)),
        ("missing_loop(pi/3)", Anomaly::missing_loop(1, third)),
    ];
    let mut ok = true;
    let mut parts = vec![];
    for (name, a) in variants {
        let points = perturbation_sweep(&star(8, a), &ns, HubLimit::BulkTransmission, &policy)
            .map_err(|e| format!("{name}: {e}"))?;
        let fit = fit_scaling(&points, policy.shift_floor).map_err(|e| format!("{name}: {e}"))?;
        let mut degenerate = vec![];
        let mut simple = vec![];
        for b in &fit.branches {
            if b.effective_multiplicity == 0 {
                continue;
            }
            let slope = b.fit.map(|f| f.slope);
            if b.is_degenerate() {
                ok &= slope.is_some_and(|s| (s + 0.5).abs() <= 0.1);
                degenerate.push(slope.map_or("none".into(), |s| format!("{s:.3}")));
            } else {
                // below the floor everywhere is acceptable; a fit must be ~ -1
                ok &= slope.map_or(true, |s| (s + 1.0).abs() <= 0.15);
                simple.push(slope.map_or("floor".into(), |s| format!("{s:.3}")));
            }
        }
        parts.push(format!(
            "{name}: degenerate [{}] simple [{}]",
            degenerate.join(", "),
            simple.join(", ")
        ));
    }
    check(ok, format!("N 64..4096 slopes: {}", parts.join("; ")))
}

fn c9_classical_baseline() -> Outcome {
    let n = 1000;
    let g = star(n, Anomaly::loop_at(1));
    let mean = classical_mean(&g, 10_000, 0).map_err(|e| e.to_string())?;
    let target = (n as f64 + 1.0) / 2.0;
    let expected = expected_classical_queries(&g).map_err(|e| e.to_string())?;
    let quantum = run_search(&g, &InitialStateKind::Minus, sweep_steps(&g))
        .map_err(|e| e.to_string())?
        .peak_step;
    let extra = star(n, Anomaly::extra_edge(1, 2));
    let extra_mean = classical_mean(&extra, 10_000, 0).map_err(|e| e.to_string())?;
    let extra_quantum = run_search(&extra, &InitialStateKind::Minus, sweep_steps(&extra))
        .map_err(|e| e.to_string())?
        .peak_step;
    check(
        (mean - target).abs() <= 0.05 * target && expected == target,
        format!(
            "loop N=1000: classical mean {mean:.1} vs {target:.1}, quantum peak step {quantum}, \
             quantum/classical {:.4}; extra edge: classical {extra_mean:.1} (exact {:.1}), quantum {extra_quantum}, \
             ratio {:.4}",
            quantum as f64 / mean,
            expected_classical_queries(&extra).unwrap(),
            extra_quantum as f64 / extra_mean
        ),
    )
}

fn c10_infrastructure() -> Vec<(&'static str, Outcome)> {
    // unitarity against the dense matrix, every variant
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 3..=60usize {
        let variants = [
            Anomaly::none(),
            Anomaly::extra_edge(1, 2),
            Anomaly::extra_edge(1, n),
            Anomaly::loop_at(n),
            Anomaly::extended_edge(2),
            Anomaly::extended_edge(1).with_phase(Phase::ZERO),
            Anomaly::missing_loop(1, Phase::ZERO),
            Anomaly::missing_loop(n, Phase::PI),
            Anomaly::missing_loop(2, Phase::pi_fraction(1, 3).unwrap()),
        ];
        for a in variants {
            let op = build_step_operator(&star(n, a));
            let d = op.to_dense(5000).unwrap();
            let dev = (d.adjoint() * &d - DMatrix::identity(op.dim(), op.dim()))
                .iter()
                .map(|x| x.norm())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
            count += 1;
        }
    }
    let unitary = check(
        worst < 1e-12,
        format!("{count} operators, N 3..60: max |U^dagger U - I| {worst:.2e}"),
    );

    // norm drift on the O(N) path
    let start = Instant::now();
    let n = 1_000_000;
    let g = star(n, Anomaly::extra_edge(1, 2));
    let op = build_step_operator(&g);
    let mut cur = initial_state(&g, &InitialStateKind::Minus).unwrap().into_amplitudes();
    let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
    for _ in 0..10_000 {
        op.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    let drift = (WalkState::from_amplitudes(cur).norm() - 1.0).abs();
    let drift_line = check(
        drift < 1e-10,
        format!("N=10^6, 10^4 steps: norm drift {drift:.2e} ({:.1?})", start.elapsed()),
    );

    // spec round trip
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    let total = 2000;
    for _ in 0..total {
        let g = random_graph(&mut rng);
        let text = serialize_spec(&g);
        match parse_spec(&text) {
            Ok(back) if back == g && serialize_spec(&back) == text => {}
            _ => failures += 1,
        }
    }
    let round_trip = check(
        failures == 0,
        format!("{total} random specs, {failures} round-trip mismatches"),
    );
    vec![("10a", unitary), ("10b", drift_line), ("10c", round_trip)]
}

fn random_graph(rng: &mut ChaCha8Rng) -> StarGraph {
    let n = rng.random_range(3..=5000usize);
    let at = rng.random_range(1..=n);
    let phase = match rng.random_range(0..3u8) {
        0 => Phase::pi_fraction(rng.random_range(-12..=12i64), rng.random_range(1..=12i64)).unwrap(),
        1 => Phase::radians(rng.random_range(-3.0..3.0)).unwrap(),
        _ => Phase::ZERO,
    };
    let a = match rng.random_range(0..5u8) {
        0 => Anomaly::none(),
        1 => {
            let mut v = rng.random_range(1..=n);
            if v == at {
                v = if at == n { 1 } else { at + 1 };
            }
            Anomaly::extra_edge(at, v)
        }
        2 => Anomaly::loop_at(at),
        3 => Anomaly::extended_edge(at).with_phase(phase),
        _ => Anomaly::missing_loop(at, phase),
    };
    star(n, a)
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, &str, Outcome)> = vec![
        ("1", "extra-edge search", c1_extra_edge_search()),
        ("2", "sign sensitivity", c2_sign_sensitivity()),
    ];
    for (id, r) in c3_reduced_fidelity() {
        results.push((id, "reduced-space fidelity", r));
    }
    results.push(("4", "loop search", c4_loop_search()));
    results.push(("5", "hitting-time scaling", c5_hitting_scaling()));
    results.push(("6", "failure cases", c6_failure_cases()));
    results.push(("7", "marked fixes", c7_marked_fixes()));
    results.push(("8", "perturbation mechanism", c8_perturbation_scaling()));
    results.push(("9", "classical baseline", c9_classical_baseline()));
    for (id, r) in c10_infrastructure() {
        results.push((id, "infrastructure", r));
    }

    let mut unexpected = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS [{id}] {name}: {detail}"),
            Err(detail) => {
                let known = KNOWN_DEVIATIONS.iter().find(|(k, _)| k == id);
                println!("FAIL [{id}] {name}: {detail}");
                match known {
                    Some((_, why)) => println!("     documented: {why}"),
                    None => unexpected += 1,
                }
            }
        }
    }
    let passed = results.iter().filter(|r| r.2.is_ok()).count();
    println!("{passed}/{} checks passed", results.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
