//! End-to-end acceptance checks. Runs as a plain binary so that every check prints its own
//! PASS/FAIL line, and exits non-zero if any of them fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustframe::codec::{LatticeQuantizer, UpdateRef};
use trustframe::compute::{AtomicOpSpec, Computation, Matrix, SeedPath, StateVector, CLIENT_AGENT};
use trustframe::experiment::{
    execute_run, execute_verify, run_sweep, write_run, RunConfig, Scenario, CHAIN_FILE, COSTS_FILE,
    PRECISION_FILE,
};
use trustframe::ledger::{verify_chain_bytes, IntegrityReport};
use trustframe::netsim::{measured_vs_predicted, predicted_cost, run_session, SessionConfig};
use trustframe::protocol::{
    client_run_frames, deviation_probability_bound, endorse_frame, randomized_endorse,
    required_endorsers, validate_trajectory, FrameClosure, ProtocolMode, RandomizedConfig,
    ToleranceSchedule, ValidationConfig, Verdict,
};

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T>(r: trustframe::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---- independent reference computations ----

/// `A x + b` computed directly from the matrix entries.
fn affine_ref(a: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a.get(i, j) * x[j]).sum::<f64>() + b[i])
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct RandomAffine {
    op: AtomicOpSpec,
    matrix: Matrix,
    offset: Vec<f64>,
    lipschitz: f64,
}

fn random_affine(rng: &mut ChaCha8Rng, d: usize, lipschitz: f64) -> RandomAffine {
    let mut singular: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..lipschitz)).collect();
    singular[0] = lipschitz;
    let matrix = Matrix::with_singular_values(&singular, rng.random());
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let op = AtomicOpSpec::affine(matrix.clone(), offset.clone())
        .expect("square")
        .with_lipschitz(lipschitz);
    RandomAffine {
        op,
        matrix,
        offset,
        lipschitz,
    }
}

fn random_state(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> StateVector {
    StateVector::new((0..d).map(|_| rng.random_range(-scale..scale)).collect()).expect("finite")
}

/// Iterations that keep an expanding map within a comfortable state range.
fn horizon(lipschitz: f64, cap: u64) -> u64 {
    if lipschitz <= 1.0 {
        cap
    } else {
        ((1e6f64).ln() / lipschitz.ln()).floor().min(cap as f64) as u64
    }
}

// ---- checks ----

fn honest_runs_are_never_invalidated() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut frames = 0;
    let mut worst_ratio = 0.0f64;
    for run_id in 0..200u64 {
        let d = [2, 8, 32][run_id as usize % 3];
        let l = rng.random_range(0.2..2.0);
        let a = random_affine(&mut rng, d, l);
        let tolerance = rng.random_range(0.05..1.0);
        let cfg = ValidationConfig {
            frame_cap: rng.random_range(1..25),
            quant_radius: rng.random_range(0.5..5.0),
            state_bound: 1e9,
            ..ValidationConfig::for_tolerance(tolerance, l)
        };
        let eps = tolerance / (l + 1.0);
        ensure((cfg.max_error - eps).abs() <= 1e-15 * eps, || {
            "ε rule".into()
        })?;
        let x0 = random_state(&mut rng, d, 2.0);
        let run = e2s(client_run_frames(&a.op, &x0, horizon(l, 60), &cfg, run_id))?;
        for f in &run.frames {
            let cp = e2s(run.dictionary.resolve(f.checkpoint()))?;
            let e = e2s(endorse_frame(f, &cp, &a.op, &run.quantizer, &cfg, 1))?;
            ensure(e.verdict.is_valid(), || {
                format!(
                    "run {run_id} (d={d}, L={l:.3}) frame {} rejected",
                    f.index()
                )
            })?;
            frames += 1;
        }
        // every reported step, recomputed from the matrix, stays within (L+1)ε
        for w in run.reported.windows(2) {
            let dev = dist(
                w[1].as_slice(),
                &affine_ref(&a.matrix, &a.offset, w[0].as_slice()),
            );
            ensure(dev <= (a.lipschitz + 1.0) * eps * (1.0 + 1e-9), || {
                format!("run {run_id}: deviation {dev} above (L+1)ε")
            })?;
            worst_ratio = worst_ratio.max(dev / tolerance);
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!(
        "200 runs, {frames} frames, worst deviation {worst_ratio:.3}·Δ_val, {took:.1?}"
    ))
}

fn injected_errors_are_detected() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut exact = 0;
    for run_id in 0..200u64 {
        let d = [2, 8, 32][run_id as usize % 3];
        let l = rng.random_range(0.2..2.0);
        let a = random_affine(&mut rng, d, l);
        let tolerance = rng.random_range(0.05..1.0);
        let cfg = ValidationConfig {
            frame_cap: rng.random_range(1..25),
            quant_radius: rng.random_range(0.5..5.0),
            state_bound: 1e9,
            ..ValidationConfig::for_tolerance(tolerance, l)
        };
        let x0 = random_state(&mut rng, d, 2.0);
        let t_max = horizon(l, 40);
        let run = e2s(client_run_frames(&a.op, &x0, t_max, &cfg, run_id))?;
        // the report at time j is the true state plus an error of the critical size
        let j = rng.random_range(1..=t_max as usize);
        let size = tolerance + l * cfg.max_error + 1e-6;
        let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&dir);
        let bad: Vec<f64> = run.true_states[j]
            .as_slice()
            .iter()
            .zip(&dir)
            .map(|(x, u)| x + size * u / n)
            .collect();
        ensure(
            (dist(&bad, run.true_states[j].as_slice()) - size).abs() < 1e-9,
            || "injection size".into(),
        )?;
        let mut reported = run.reported.clone();
        reported[j] = e2s(StateVector::new(bad))?;
        let schedule = ToleranceSchedule::Constant(tolerance);
        let c = e2s(validate_trajectory(
            &a.op,
            &reported[0],
            &reported[1..],
            0,
            &schedule,
        ))?;
        match c.verdict {
            Verdict::Invalid { offset, .. } if offset < j => {
                if offset + 1 == j {
                    exact += 1;
                }
            }
            v => return Err(format!("run {run_id}: error at {j} gave {v:?}")),
        }
    }
    Ok(format!(
        "200 of 200 detected, {exact} exactly at the injected offset"
    ))
}

fn quantizer_error_is_bounded() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut points = 0;
    let mut worst = 0.0f64;
    let mut worst_refined = 0.0f64;
    for &d in &[1usize, 2, 5, 16, 64] {
        for &eps in &[1e-3, 0.05, 0.7] {
            let radius = 10.0 * eps;
            let q = e2s(LatticeQuantizer::new(d, eps, radius))?;
            let s = 2.0 * eps / (d as f64).sqrt();
            for _ in 0..10_000 {
                // inside the cube of half-width radius/√d, hence inside the quantizer range
                let raw: Vec<f64> = (0..d)
                    .map(|_| rng.random_range(-radius..radius) / (d as f64).sqrt())
                    .collect();
                let delta = e2s(StateVector::new(raw.clone()))?;
                let u = e2s(q.quantize(&delta))?;
                // reconstruction from the indices and the pitch alone
                let rec: Vec<f64> = u.indices.iter().map(|&i| i as f64 * s).collect();
                let err = dist(&rec, &raw);
                ensure(err <= eps, || format!("d={d} ε={eps}: error {err}"))?;
                worst = worst.max(err / eps);
                points += 1;
            }
            ensure(points % 10_000 == 0, || "every sample must count".into())?;
            for _ in 0..500 {
                let raw: Vec<f64> = (0..d)
                    .map(|_| rng.random_range(-radius..radius) / (d as f64).sqrt())
                    .collect();
                let delta = e2s(StateVector::new(raw.clone()))?;
                let mut u = e2s(q.quantize(&delta))?;
                for r in 1..=6u32 {
                    let chunk = e2s(q.refine(
                        &delta,
                        &u,
                        UpdateRef {
                            frame_index: 0,
                            offset: 0,
                        },
                    ))?;
                    u = e2s(q.apply_refinement(&u, &chunk))?;
                    let h = s / 2f64.powi(r as i32);
                    let rec: Vec<f64> = u.indices.iter().map(|&i| i as f64 * h).collect();
                    let err = dist(&rec, &raw);
                    let bound = eps / 2f64.powi(r as i32);
                    ensure(err <= bound, || {
                        format!("d={d} ε={eps} r={r}: {err} > {bound}")
                    })?;
                    worst_refined = worst_refined.max(err / bound);
                }
            }
        }
    }
    Ok(format!(
        "{points} samples, worst error {worst:.4}·ε, refined worst {worst_refined:.4}·ε/2^r"
    ))
}

fn frames_meet_the_length_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut checked = 0;
    let mut tight = f64::INFINITY;
    for &l in &[1.05f64, 1.2, 2.0] {
        for run_id in 0..30u64 {
            let d = 4;
            let mut diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..l)).collect();
            diag[0] = l;
            let q = Matrix::random_orthogonal(d, run_id + 17);
            let qd = q.matmul(&Matrix::diagonal(&diag)).expect("square");
            let a = qd.matmul(&q.transpose()).expect("square");
            let op = e2s(AtomicOpSpec::affine(a, vec![0.0; d]))?.with_lipschitz(l);
            let cfg = ValidationConfig {
                frame_cap: rng.random_range(5..200),
                quant_radius: rng.random_range(0.5..3.0),
                state_bound: 1e12,
                ..ValidationConfig::for_tolerance(0.05, l)
            };
            let x0 = random_state(&mut rng, d, 1e-3);
            let t = ((1e7f64).ln() / l.ln()).min(400.0) as u64;
            let run = e2s(client_run_frames(&op, &x0, t, &cfg, run_id))?;
            for ((f, closure), first) in run.frames.iter().zip(&run.closures).zip(run.first_steps())
            {
                if *closure == FrameClosure::EndOfRun {
                    continue;
                }
                let Some(delta) = first else { continue };
                // min{(ln(Δ_quant − ε) − ln δ)/ln L, M̄}
                let bound = ((cfg.quant_radius - cfg.max_error).ln() - delta.ln()) / l.ln();
                let bound = bound.min(cfg.frame_cap as f64);
                ensure(f.len() as f64 >= bound, || {
                    format!(
                        "L={l} run {run_id} frame {}: {} < {bound}",
                        f.index(),
                        f.len()
                    )
                })?;
                tight = tight.min(f.len() as f64 - bound);
                checked += 1;
            }
        }
    }
    ensure(checked > 0, || "no frames closed".into())?;
    Ok(format!(
        "{checked} sealed frames, smallest slack {tight:.3}"
    ))
}

fn affine_config(rng: &mut ChaCha8Rng, seed: u64) -> (String, f64, f64) {
    let d = rng.random_range(2..7usize);
    let l = rng.random_range(0.3..1.3);
    let mut singular: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..l)).collect();
    singular[0] = l;
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let tolerance = rng.random_range(0.1..1.0);
    let eps = tolerance / (l + 1.0) / rng.random_range(2.0..20.0);
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let iterations = if l > 1.0 {
        ((1e3f64).ln() / l.ln()) as u64
    } else {
        150
    };
    let text = format!(
        r#"
scenario = "custom"
iterations = {iterations}
seed = {seed}
modes = ["batch"]
[computation]
kind = "affine"
singular_values = [{}]
offset = [{}]
matrix_seed = {}
initial_state = [{}]
[validation]
tolerance = {{ constant = {tolerance:?} }}
quant_radius = 3.0
max_error = {eps:?}
frame_fraction = 0.1
lipschitz = {l:?}
state_bound = 1e9
"#,
        list(&singular),
        list(&offset),
        seed + 1000,
        list(&x0),
    );
    (text, l, eps)
}

fn audits_verify_and_mutations_are_caught() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut audits = 0;
    let mut flips = 0;
    let mut worst = 0.0f64;
    for run_id in 0..50u64 {
        let (text, l, eps) = affine_config(&mut rng, run_id);
        let cfg = e2s(RunConfig::from_toml(&text))?;
        let a = e2s(execute_run(&cfg, None, None))?;
        let report = a.verification.as_ref().ok_or("no replay")?;
        let k = e2s(cfg.resolve())?.session.period;
        let bound = (l.powi(k as i32) + 1.0) * k as f64 * eps;
        for c in &report.checks {
            if let Some(dev) = c.deviation {
                ensure(dev <= bound, || {
                    format!("run {run_id} height {}: {dev} > {bound} (K={k})", c.height)
                })?;
                worst = worst.max(dev / bound);
                audits += 1;
            }
        }
        let bytes = a.chain.to_bytes();
        let tip = a.chain.tip();
        let ok = e2s(execute_verify(&bytes, &cfg, Some(&tip)))?;
        ensure(ok.passed(), || format!("run {run_id}: {}", ok.render()))?;
        // every bit for a few chains, a random sample for the rest
        let positions: Vec<usize> = if run_id < 3 {
            (0..bytes.len() * 8).collect()
        } else {
            (0..64)
                .map(|_| rng.random_range(0..bytes.len() * 8))
                .collect()
        };
        for p in positions {
            let mut m = bytes.clone();
            m[p / 8] ^= 1 << (p % 8);
            ensure(
                verify_chain_bytes(&m, Some(&tip)) != IntegrityReport::Ok,
                || format!("run {run_id}: flip of bit {p} went unnoticed"),
            )?;
            flips += 1;
        }
    }
    Ok(format!(
        "50 chains, {audits} audits, worst deviation {worst:.3}·bound, {flips} bit flips caught"
    ))
}

fn randomized_bound_holds() -> Check {
    let trials = 10_000u64;
    let mut lines = Vec::new();
    let mut points = 0;
    for &(d, margin, eps) in &[(2usize, 3.0, 0.0), (2, 6.0, 0.0), (4, 10.0, 0.05)] {
        let op = e2s(AtomicOpSpec::gaussian_drift(d, 1.0))?;
        let q = if eps > 0.0 {
            Some(e2s(LatticeQuantizer::new(d, eps, 100.0))?)
        } else {
            None
        };
        for &m in &[1usize, 5, 20] {
            let rcfg = RandomizedConfig {
                endorsers: m,
                outlier_prob: 0.5,
                margin,
                lambda: Some(1.0),
            };
            let prev = StateVector::zeros(d);
            let mut rejected = 0u64;
            for t in 1..=trials {
                let theta = op.draw(SeedPath::new(9, CLIENT_AGENT, t));
                let x = e2s(StateVector::new(op.apply(prev.as_slice(), theta.as_ref())))?;
                let report = match &q {
                    Some(q) => {
                        let u = e2s(q.quantize(&e2s(x.sub(&prev))?))?;
                        e2s(prev.add(&e2s(q.dequantize(&u))?))?
                    }
                    None => x,
                };
                let v = e2s(randomized_endorse(&op, &report, &prev, t, &rcfg, 9, 0))?;
                if !v.valid {
                    rejected += 1;
                }
            }
            // 2dλ²/(Δ − 2ε)²·(1 + 1/m)² with λ = 1, L = 1
            let gap = margin - 2.0 * eps;
            let formula = (2.0 * d as f64 / (gap * gap) * (1.0 + 1.0 / m as f64).powi(2)).min(1.0);
            let lib = e2s(deviation_probability_bound(d, 1.0, margin, 1.0, eps, m))?;
            ensure((formula - lib).abs() <= 1e-12, || {
                format!("bound {lib} vs {formula}")
            })?;
            let rate = rejected as f64 / trials as f64;
            let sigma = (formula * (1.0 - formula) / trials as f64).sqrt();
            ensure(rate <= formula + 3.0 * sigma, || {
                format!("d={d} Δ={margin} m={m}: rate {rate} > {formula} + 3σ")
            })?;
            lines.push(format!("m={m}:{rate:.4}≤{formula:.3}"));
            points += 1;
        }
    }
    // sizing: wherever the endorser formula is feasible its answer meets the target
    let mut feasible = 0;
    let mut infeasible = 0;
    for &lambda in &[0.05, 0.1, 0.25, 0.5, 0.9, 1.0, 2.0] {
        for &rho in &[0.01, 0.05, 0.1, 0.3] {
            for &margin in &[1.0, 2.0, 4.0] {
                for &d in &[1usize, 4, 16] {
                    match required_endorsers(rho, d, margin, 1.0, 0.01, lambda) {
                        Ok(m) => {
                            let gap = margin - 0.02;
                            let b = 2.0 * d as f64 * lambda * lambda / (gap * gap)
                                * (1.0 + 1.0 / (m as f64 * lambda)).powi(2);
                            ensure(b <= rho * (1.0 + 1e-9), || {
                                format!("λ={lambda} ρ={rho} Δ={margin} d={d}: m={m} gives {b}")
                            })?;
                            feasible += 1;
                        }
                        Err(_) => infeasible += 1,
                    }
                }
            }
        }
    }
    ensure(feasible > 0, || "no feasible sizing point".into())?;
    Ok(format!(
        "{points} points [{}]; sizing feasible at {feasible} points, infeasible at {infeasible}",
        lines.join(" ")
    ))
}

fn cost_modes_are_ordered() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for (case, &d) in [4usize, 12, 32].iter().enumerate() {
        let a = random_affine(&mut rng, d, 0.9);
        let validation = ValidationConfig {
            frame_cap: 40,
            quant_radius: 4.0,
            max_error: 0.01,
            ..ValidationConfig::for_tolerance(0.3, 0.9)
        };
        let cfg = SessionConfig {
            period: 4,
            ..SessionConfig::new(validation)
        };
        let x0 = random_state(&mut rng, d, 3.0);
        let mut rows = Vec::new();
        for mode in ProtocolMode::ALL {
            let s = e2s(run_session(&a.op, &x0, 240, mode, &cfg))?;
            ensure(s.completed(), || format!("case {case} {mode} halted"))?;
            let p = s.mode_params(&cfg);
            let copies = p.endorsers;
            let comm = (s.costs.report_bits() + s.costs.report_meta_bits()) as f64 / copies;
            let storage = s.costs.storage_bits() + s.costs.storage_meta_bits();
            rows.push((
                mode,
                s.costs.comp_ops(),
                comm,
                storage,
                measured_vs_predicted(&s.costs, &p),
                p,
            ));
        }
        let (t, st, b) = (&rows[0], &rows[1], &rows[2]);
        ensure(t.2 > st.2 && st.2 > b.2, || {
            format!("case {case} comm {} {} {}", t.2, st.2, b.2)
        })?;
        ensure(t.3 > st.3 && st.3 > b.3, || {
            format!("case {case} storage {} {} {}", t.3, st.3, b.3)
        })?;
        ensure(b.1 >= st.1 && st.1 >= t.1, || {
            format!("case {case} comp {} {} {}", t.1, st.1, b.1)
        })?;
        let predicted = predicted_cost(&b.5).comm_bits;
        let ratio = b.4.measured.comm_bits / predicted;
        ensure(ratio <= 4.0, || {
            format!("case {case} batch comm ratio {ratio}")
        })?;
        worst = worst.max(ratio);
    }
    Ok(format!(
        "3 trajectories ordered, batch comm at most {worst:.2}× the model"
    ))
}

const STUDY: &str = include_str!("../examples/configs/classifier_study.toml");

fn study_trends_reproduce() -> Check {
    let start = Instant::now();
    let cfg = e2s(RunConfig::from_toml(STUDY))?;
    ensure(cfg.experiment.seeds == 10, || {
        "study must average 10 seeds".into()
    })?;
    let tols = cfg.experiment.tolerances.clone();
    let out = e2s(run_sweep(&cfg, &tols, ProtocolMode::Batch))?;
    let row = |s: Scenario, t: f64| out.cost(s, t).ok_or(format!("missing {s} {t}"));

    // (a) nonincreasing in tolerance, converging at both ends
    for s in Scenario::STUDY {
        for w in tols.windows(2) {
            let (lo, hi) = (row(s, w[0])?, row(s, w[1])?);
            ensure(
                hi.recomputations_per_iter <= lo.recomputations_per_iter,
                || format!("{s}: recomputations rise from {} to {}", w[0], w[1]),
            )?;
        }
    }
    let (first, last) = (tols[0], tols[tols.len() - 1]);
    for t in [first, last] {
        let r: Vec<f64> = Scenario::STUDY
            .iter()
            .map(|&s| row(s, t).map(|r| r.recomputations_per_iter))
            .collect::<Result<_, _>>()?;
        let spread =
            r.iter().cloned().fold(f64::MIN, f64::max) - r.iter().cloned().fold(f64::MAX, f64::min);
        ensure(spread <= 0.05 * r[0].max(1e-9) + 1e-9, || {
            format!("scenarios differ at tolerance {t}: {r:?}")
        })?;
    }
    // (b) and (c) at the middle tolerance
    let mid = tols[tols.len() / 2];
    let base = row(Scenario::Base, mid)?;
    let coarse = row(Scenario::CoarseCompression, mid)?;
    let large = row(Scenario::LargeFrames, mid)?;
    ensure(
        coarse.recomputations_per_iter > base.recomputations_per_iter,
        || {
            format!(
                "coarse recomputations {} vs base {}",
                coarse.recomputations_per_iter, base.recomputations_per_iter
            )
        },
    )?;
    ensure(coarse.comm_bits_per_dim < base.comm_bits_per_dim, || {
        format!(
            "coarse comm {} vs base {}",
            coarse.comm_bits_per_dim, base.comm_bits_per_dim
        )
    })?;
    ensure(large.comm_bits_per_dim < base.comm_bits_per_dim, || {
        format!(
            "large-frame comm {} vs base {}",
            large.comm_bits_per_dim, base.comm_bits_per_dim
        )
    })?;
    // (d) validated training at batch 10 against plain SGD at batch 10
    let validated = out.validated_accuracy(mid).ok_or("no validated accuracy")?;
    let vanilla = out.vanilla_accuracy(10).ok_or("no vanilla accuracy")?;
    ensure(validated >= vanilla, || {
        format!("validated {validated} < vanilla {vanilla}")
    })?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(600), || format!("took {took:?}"))?;
    Ok(format!(
        "tolerance {mid}: recomp base {:.3} coarse {:.3} large {:.3}; comm base {:.2} coarse {:.2} large {:.2}; accuracy {validated:.4} vs {vanilla:.4}; {took:.1?}",
        base.recomputations_per_iter,
        coarse.recomputations_per_iter,
        large.recomputations_per_iter,
        base.comm_bits_per_dim,
        coarse.comm_bits_per_dim,
        large.comm_bits_per_dim,
    ))
}

const AFFINE: &str = include_str!("../examples/configs/affine.toml");

fn reruns_are_byte_identical() -> Check {
    let mut compared = 0;
    for (name, text, iterations) in [("affine", AFFINE, None), ("classifier", STUDY, Some(120))] {
        let mut cfg = e2s(RunConfig::from_toml(text))?;
        if let Some(t) = iterations {
            cfg.iterations = t;
        }
        let dirs = [
            tempfile::tempdir().map_err(|e| e.to_string())?,
            tempfile::tempdir().map_err(|e| e.to_string())?,
        ];
        for dir in &dirs {
            let a = e2s(execute_run(&cfg, None, None))?;
            e2s(write_run(dir.path(), &a))?;
        }
        for file in [CHAIN_FILE, COSTS_FILE, PRECISION_FILE] {
            let x = std::fs::read(dirs[0].path().join(file)).map_err(|e| e.to_string())?;
            let y = std::fs::read(dirs[1].path().join(file)).map_err(|e| e.to_string())?;
            ensure(x == y, || format!("{name}: {file} differs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} files identical across reruns"))
}

fn main() {
    let checks: [(&str, CheckFn); 9] = [
        (
            "honest runs are never invalidated",
            honest_runs_are_never_invalidated,
        ),
        (
            "critical injected errors are detected",
            injected_errors_are_detected,
        ),
        (
            "quantizer and refinement errors are bounded",
            quantizer_error_is_bounded,
        ),
        (
            "frames meet the length lower bound",
            frames_meet_the_length_bound,
        ),
        (
            "audits verify and bit flips are caught",
            audits_verify_and_mutations_are_caught,
        ),
        (
            "randomized validation stays within its bound",
            randomized_bound_holds,
        ),
        ("protocol modes are cost-ordered", cost_modes_are_ordered),
        ("classifier study trends reproduce", study_trends_reproduce),
        ("reruns are byte-identical", reruns_are_byte_identical),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        match outcome {
            Ok(detail) => println!("[{}/9] PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[{}/9] FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
