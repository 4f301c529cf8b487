//! Acceptance suite: one line per criterion, nonzero exit if any hard
//! criterion fails. Criteria 10 and 11 are directional reports; a miss
//! is written to `acceptance/warnings.txt` instead of failing the suite.
//!
//! Expected values come from oracles written here (closed forms, brute
//! force, direct formula evaluation), never from the code under test.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gan_qd::config::{DataKind, Preset, RunConfig};
use gan_qd::engine::Mode;
use gan_qd::genome::{mutate, mutate_traced, GeneSpace, Genome, MutationRates, Role, UidAllocator};
use gan_qd::harness::{compare_runs, run_experiment, CsvRow};
use gan_qd::metrics::{frechet_distance, matrix_sqrt, GaussianStats};
use gan_qd::nn::{
    adam_step, init_params, Activation, AdamState, LayerHyper, LayerKind, LayerSpec, Tensor, TrainedNetwork,
};
use gan_qd::phenotype::{build_phenotype, transfer_weights, IoShape};
use gan_qd::qd::{constrained_dominates, dominates, fast_nondominated_sort, ObjectiveVector};
use gan_qd::train::{d_loss, g_loss};
use gan_qd::WORST_FITNESS;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Warn,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn soft(ok: bool, detail: String) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Warn }, detail }
}

fn out_root() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------- 1

const FD_STEP: f64 = 1e-3;
const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 20;
/// Pre-activations closer than this to a kink are resampled: one step of
/// size `FD_STEP` moves a pre-activation by at most `FD_STEP` here, since
/// inputs and weights are bounded by 1.
const KINK_MARGIN: f64 = 1e-2;

fn random_spec(kind: LayerKind, act: Activation, rng: &mut ChaCha8Rng) -> LayerSpec {
    let out = rng.random_range(1..=4);
    match kind {
        LayerKind::Dense => {
            let in_shape = if rng.random_bool(0.5) {
                vec![rng.random_range(1..=8)]
            } else {
                vec![rng.random_range(1..=2), rng.random_range(1..=3), rng.random_range(1..=3)]
            };
            LayerSpec::new(kind, in_shape, LayerHyper::dense(out), act)
        }
        LayerKind::Conv2d => {
            let in_shape = if rng.random_bool(0.2) {
                vec![rng.random_range(1..=4)]
            } else {
                vec![rng.random_range(1..=3), rng.random_range(1..=6), rng.random_range(1..=6)]
            };
            LayerSpec::new(kind, in_shape, LayerHyper::conv(out), act)
        }
        LayerKind::Deconv2d => {
            let in_shape = if rng.random_bool(0.2) {
                vec![rng.random_range(1..=4)]
            } else {
                vec![rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)]
            };
            LayerSpec::new(kind, in_shape, LayerHyper::deconv(out), act)
        }
    }
}

/// Norm-wise relative error between two gradient vectors.
fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    let mut resampled = 0usize;
    let mut combos = 0usize;
    for kind in [LayerKind::Dense, LayerKind::Conv2d, LayerKind::Deconv2d] {
        for act in Activation::ALL {
            combos += 1;
            let mut done = 0;
            while done < GRAD_INSTANCES {
                let spec = random_spec(kind, act, &mut rng);
                let mut layer = init_params(spec.clone(), &mut rng).unwrap();
                for w in layer.weights.data_mut() {
                    *w = rng.random_range(-1.0..1.0);
                }
                for b in layer.bias.data_mut() {
                    *b = rng.random_range(-1.0..1.0);
                }
                let batch = 2;
                let mut xshape = vec![batch];
                xshape.extend_from_slice(&spec.in_shape);
                let x = Tensor::from_fn(xshape, |_| rng.random_range(-1.0..1.0));
                if act.has_kink() && layer.affine(&x).unwrap().data().iter().any(|z| z.abs() < KINK_MARGIN) {
                    resampled += 1;
                    continue;
                }
                let out_shape = spec.out_shape().unwrap();
                let net = TrainedNetwork::new(vec![layer], out_shape).unwrap();
                let (y, cache) = net.forward(&x).unwrap();
                let c = Tensor::from_fn(y.shape().to_vec(), |_| rng.random_range(-1.0..1.0));
                let grads = net.backward(&cache, &c).unwrap();

                let loss = |n: &TrainedNetwork, x: &Tensor| -> f64 {
                    n.predict(x).unwrap().data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
                };
                // perturb one scalar: 0 = weight, 1 = bias, 2 = input
                let numeric = |which: usize, i: usize| -> f64 {
                    let bump = |h: f64| {
                        let (mut n, mut x) = (net.clone(), x.clone());
                        match which {
                            0 => n.layers[0].weights.data_mut()[i] += h,
                            1 => n.layers[0].bias.data_mut()[i] += h,
                            _ => x.data_mut()[i] += h,
                        }
                        loss(&n, &x)
                    };
                    (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP)
                };
                let nw: Vec<f64> = (0..net.layers[0].weights.len()).map(|i| numeric(0, i)).collect();
                let nb: Vec<f64> = (0..net.layers[0].bias.len()).map(|i| numeric(1, i)).collect();
                let nx: Vec<f64> = (0..x.len()).map(|i| numeric(2, i)).collect();
                for (what, a, n) in [
                    ("weights", &grads.layers[0].weights[..], &nw[..]),
                    ("bias", &grads.layers[0].bias[..], &nb[..]),
                    ("input", grads.input.data(), &nx[..]),
                ] {
                    let e = rel_error(a, n);
                    if e > worst {
                        worst = e;
                        worst_case = format!("{kind:?}/{act} {what} in {:?}", spec.in_shape);
                    }
                }
                done += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= GRAD_TOL && elapsed < Duration::from_secs(30),
        format!(
            "{combos} kind x activation combos x {GRAD_INSTANCES} instances, worst relative error {worst:.2e} ({worst_case}), \
             {resampled} near-kink instances resampled, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn adam_closed_form() -> Outcome {
    let mut p = [0.0];
    let mut s = AdamState::new(1);
    adam_step(&mut p, &[1.0], &mut s, 0.001, 0).unwrap();
    // t = 1: m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps)
    let expected = -0.001 * 1.0 / (1.0 + 1e-8);
    let ok = (p[0] - expected).abs() <= 1e-9 && (p[0] - (-0.0009999999900)).abs() <= 1e-9;
    verdict(ok, format!("param {:.13} vs closed form {:.13}", p[0], expected))
}

// ---------------------------------------------------------------- 3

/// Peel fronts by testing every remaining pair.
fn brute_force_fronts(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let dom = |a: &ObjectiveVector, b: &ObjectiveVector| {
        let (an, bn) = (a.novelty, b.novelty);
        let (ac, bc) = (a.competition, b.competition);
        an >= bn && ac >= bc && (an > bn || ac > bc)
    };
    let mut remaining: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| j != i && dom(&objs[j], &objs[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn nondominated_sort_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=32);
        let objs: Vec<ObjectiveVector> = (0..n)
            .map(|_| ObjectiveVector::new(rng.random_range(0..6) as f64, rng.random_range(0..6)))
            .collect();
        let mut got = fast_nondominated_sort(&objs);
        for f in got.iter_mut() {
            f.sort_unstable();
        }
        if got != brute_force_fronts(&objs) {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("200 random populations (size <= 32, integer objectives), {mismatches} mismatches"))
}

// ---------------------------------------------------------------- 4

fn feasible_oracle(other: f64, this: f64) -> bool {
    if other.is_nan() || other.is_infinite() || other == f64::MAX {
        return false;
    }
    let clamp = |f: f64| if f < 1e-8 { 1e-8 } else { f };
    let this = if this.is_nan() { f64::INFINITY } else { clamp(this) };
    clamp(other) < 2.0 * this
}

fn random_fitness(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => WORST_FITNESS,
        1 => [f64::NAN, f64::INFINITY, 0.0, 1e-9][rng.random_range(0..4)],
        2 => [0.5, 1.0, 2.0, 4.0][rng.random_range(0..4)],
        _ => rng.random_range(0.0..10.0),
    }
}

fn constrained_dominance_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut problems = Vec::new();
    let mut both_feasible = 0;
    for k in 0..1000 {
        let fa = random_fitness(&mut rng);
        // exact ratio-2 boundaries for a share of the pairs
        let fb = if k % 7 == 0 && fa.is_finite() { 2.0 * fa } else { random_fitness(&mut rng) };
        let a = ObjectiveVector::new(rng.random_range(0..4) as f64, rng.random_range(0..4));
        let b = ObjectiveVector::new(rng.random_range(0..4) as f64, rng.random_range(0..4));
        let ab = constrained_dominates(&a, &b, fa, fb);
        let ba = constrained_dominates(&b, &a, fb, fa);
        if ab && ba {
            problems.push(format!("mutual at ({fa}, {fb})"));
        }
        let a_ok = feasible_oracle(fa, fb);
        let b_ok = feasible_oracle(fb, fa);
        let expected = (a_ok && !b_ok) || (a_ok && b_ok && dominates(&a, &b));
        if ab != expected {
            problems.push(format!("({fa}, {fb}) gave {ab}, direct evaluation {expected}"));
        }
        if a_ok && b_ok {
            both_feasible += 1;
            if ab != dominates(&a, &b) {
                problems.push(format!("feasible pair ({fa}, {fb}) differs from plain dominance"));
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "1000 random pairs ({both_feasible} both feasible), {} violations{}",
            problems.len(),
            problems.first().map(|p| format!(", first: {p}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 1e-3
}

fn frechet_metric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut diag_err: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=16);
        let ma: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let mb: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let va: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..4.0)).collect();
        let vb: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..4.0)).collect();
        // diagonal closed form: |ma - mb|^2 + sum(va + vb - 2 sqrt(va vb))
        let expected: f64 = (0..d)
            .map(|i| (ma[i] - mb[i]).powi(2) + va[i] + vb[i] - 2.0 * (va[i] * vb[i]).sqrt())
            .sum();
        let a = GaussianStats { mean: ma, cov: DMatrix::from_diagonal(&DVector::from_vec(va)) };
        let b = GaussianStats { mean: mb, cov: DMatrix::from_diagonal(&DVector::from_vec(vb)) };
        diag_err = diag_err.max((frechet_distance(&a, &b).unwrap() - expected).abs());
    }

    let mut sym_err: f64 = 0.0;
    let mut self_nonzero = 0;
    let mut recon_err: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=24);
        let a = GaussianStats {
            mean: DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            cov: random_spd(d, &mut rng),
        };
        let b = GaussianStats {
            mean: DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            cov: random_spd(d, &mut rng),
        };
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        sym_err = sym_err.max((ab - ba).abs());
        if frechet_distance(&a, &a.clone()).unwrap() != 0.0 {
            self_nonzero += 1;
        }
        let s = matrix_sqrt(&a.cov).unwrap();
        recon_err = recon_err.max((&s * &s - &a.cov).norm());
    }
    verdict(
        diag_err <= 1e-8 && sym_err <= 1e-6 && self_nonzero == 0 && recon_err <= 1e-6,
        format!(
            "diagonal closed form max err {diag_err:.1e} (100 cases), symmetry max err {sym_err:.1e}, \
             {self_nonzero} nonzero self-distances, sqrt reconstruction max Frobenius err {recon_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn losses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let clamp = |s: f64| s.clamp(1e-7, 1.0 - 1e-7);
    let mut err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let m = rng.random_range(1..=64);
        let real: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let fake: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..=1.0)).collect();
        let mut lr = 0.0;
        for &r in &real {
            lr -= clamp(r).ln();
        }
        let mut lf = 0.0;
        for &f in &fake {
            lf -= (1.0 - clamp(f)).ln();
        }
        let expected_d = lr / n as f64 + lf / m as f64;
        let mut lg = 0.0;
        for &f in &fake {
            lg -= clamp(f).ln();
        }
        let expected_g = lg / m as f64;
        err = err.max((d_loss(&real, &fake).unwrap() - expected_d).abs());
        err = err.max((g_loss(&fake).unwrap() - expected_g).abs());
    }
    let worst_d = d_loss(&[0.0; 8], &[1.0; 8]).unwrap();
    let worst_g = g_loss(&[0.0; 8]).unwrap();
    verdict(
        err <= 1e-12 && worst_d <= 32.24 && worst_g <= 16.12 && worst_d.is_finite(),
        format!("max deviation from direct formula {err:.1e}; extremes d_loss {worst_d:.4} g_loss {worst_g:.4}"),
    )
}

// ---------------------------------------------------------------- 7

fn mutation_rates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut uids = UidAllocator::new();
    let space = GeneSpace { width_min: 32, width_max: 256, genome_limit: 4 };
    let rates = MutationRates::default();
    let trials = 10_000;
    let (mut add, mut remove, mut change) = (0, 0, 0);
    for k in 0..trials {
        let role = if k % 2 == 0 { Role::Generator } else { Role::Discriminator };
        // length 2 under a limit of 4: every operator is always applicable
        let parent = Genome::new(
            role,
            vec![space.random_gene(role, &mut rng, &mut uids), space.random_gene(role, &mut rng, &mut uids)],
        );
        let (_, trace) = mutate_traced(&parent, &mut rng, &rates, &space, &mut uids);
        add += trace.added as usize;
        remove += trace.removed as usize;
        change += trace.changed as usize;
    }
    let f = |c: usize| c as f64 / trials as f64;
    let ok = (f(add) - 0.3).abs() <= 0.015 && (f(remove) - 0.1).abs() <= 0.015 && (f(change) - 0.1).abs() <= 0.015;
    verdict(
        ok,
        format!("{trials} mutations: add {:.4} (0.3), remove {:.4} (0.1), change {:.4} (0.1)", f(add), f(remove), f(change)),
    )
}

// ---------------------------------------------------------------- 8

fn weight_transfer_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut uids = UidAllocator::new();
    let space = GeneSpace { width_min: 4, width_max: 16, genome_limit: 4 };
    let grow = MutationRates { add: 1.0, remove: 0.0, change: 0.3 };
    let mut mismatches = 0;
    let mut checked = 0;
    for sample_shape in [vec![1, 8, 8], vec![2]] {
        let io = IoShape { sample_shape, latent_dim: 6 };
        for role in [Role::Generator, Role::Discriminator] {
            let mut built = 0;
            while built < 5 {
                let mut genome = Genome::random_minimal(role, &space, &mut rng, &mut uids);
                for _ in 0..rng.random_range(0..3) {
                    genome = mutate(&genome, &mut rng, &grow, &space, &mut uids);
                }
                let Ok(parent) = build_phenotype(&genome, &io, &mut rng) else { continue };
                built += 1;
                let child_genome = mutate(&genome, &mut rng, &MutationRates::NONE, &space, &mut uids);
                let child = transfer_weights(&genome, &parent, &child_genome, &io, &mut rng).unwrap();
                let in_len = parent.input_len();
                for _ in 0..100 {
                    let x = Tensor::from_fn(vec![1, in_len], |_| rng.random_range(-2.0..2.0));
                    let a = parent.predict(&x).unwrap();
                    let b = child.predict(&x).unwrap();
                    checked += 1;
                    if a.data().iter().zip(b.data()).any(|(p, q)| p.to_bits() != q.to_bits()) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    verdict(mismatches == 0, format!("{checked} random inputs over 20 parent/child pairs, {mismatches} not bitwise equal"))
}

// ---------------------------------------------------------------- 9-11

struct DeskRuns {
    rows: Vec<(Mode, u64, Vec<CsvRow>, Duration)>,
    csv: Vec<(Mode, PathBuf)>,
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn desk_config(mode: Mode, seed: u64) -> RunConfig {
    let mut c = RunConfig::preset(Preset::Desk);
    c.mode = mode;
    c.seed = seed;
    c.out_dir = out_root().join(format!("desk/{mode}_seed{seed}"));
    c
}

fn desk_runs() -> Result<DeskRuns, String> {
    let mut rows = Vec::new();
    let mut csv = Vec::new();
    for mode in [Mode::Nsgc, Mode::Nslc, Mode::Coegan] {
        for seed in SEEDS {
            let c = desk_config(mode, seed);
            let start = Instant::now();
            let outcome = run_experiment(&c).map_err(|e| format!("{mode} seed {seed}: {e}"))?;
            let took = start.elapsed();
            println!("      desk run {mode} seed {seed}: {:.1}s", took.as_secs_f64());
            csv.push((mode, outcome.out_dir.join("metrics.csv")));
            rows.push((mode, seed, outcome.rows, took));
        }
    }
    Ok(DeskRuns { rows, csv })
}

fn end_to_end(runs: &DeskRuns) -> Outcome {
    let c = desk_config(Mode::Nsgc, 0);
    let setup_ok =
        c.data.kind == DataKind::Shapes && c.population_size == 5 && c.generations == 20 && c.mode == Mode::Nsgc;
    let mut passed = 0;
    let mut parts = Vec::new();
    let mut slowest = Duration::ZERO;
    for (_, seed, rows, took) in runs.rows.iter().filter(|r| r.0 == Mode::Nsgc) {
        let first = rows.first().map(|r| r.best_fid).unwrap_or(f64::NAN);
        let last = rows.last().map(|r| r.best_fid).unwrap_or(f64::NAN);
        let ratio = last / first;
        if ratio < 0.5 {
            passed += 1;
        }
        slowest = slowest.max(*took);
        parts.push(format!("seed {seed}: {first:.2} -> {last:.2} ({ratio:.2})"));
    }
    verdict(
        setup_ok && passed >= 4 && slowest < Duration::from_secs(600),
        format!(
            "{passed}/5 NSGC seeds reach < 50% of generation-1 best FID [{}]; slowest run {:.0}s",
            parts.join(", "),
            slowest.as_secs_f64()
        ),
    )
}

fn final_fids(runs: &DeskRuns, mode: Mode) -> Vec<f64> {
    runs.rows.iter().filter(|r| r.0 == mode).map(|r| r.2.last().unwrap().best_fid).collect()
}

fn csvs(runs: &DeskRuns, mode: Mode) -> Vec<PathBuf> {
    runs.csv.iter().filter(|c| c.0 == mode).map(|c| c.1.clone()).collect()
}

fn mode_ordering(runs: &DeskRuns, warnings: &mut String) -> Outcome {
    let nsgc = final_fids(runs, Mode::Nsgc);
    let nslc = final_fids(runs, Mode::Nslc);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cmp = match compare_runs(&csvs(runs, Mode::Nsgc), &csvs(runs, Mode::Nslc)) {
        Ok(c) => c,
        Err(e) => return verdict(false, format!("compare_runs failed: {e}")),
    };
    let ok = mean(&nsgc) <= mean(&nslc);
    let detail = format!(
        "mean final best FID NSGC {:.3} vs NSLC {:.3}; Mann-Whitney U {} p {:.4}",
        mean(&nsgc),
        mean(&nslc),
        cmp.test.u,
        cmp.test.p_value
    );
    if !ok {
        let _ = writeln!(warnings, "criterion 10: expected NSGC <= NSLC, got {detail}");
    }
    soft(ok, detail)
}

fn novelty_accounting(runs: &DeskRuns, warnings: &mut String) -> Outcome {
    // mean over every generation and seed of the discriminator population's
    // mean trained samples
    let avg = |mode: Mode| {
        let v: Vec<f64> =
            runs.rows.iter().filter(|r| r.0 == mode).flat_map(|r| r.2.iter().map(|x| x.mean_d_trained_samples)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (nslc, coegan) = (avg(Mode::Nslc), avg(Mode::Coegan));
    let ok = nslc < coegan;
    let detail = format!("mean discriminator trained samples NSLC {nslc:.1} vs COEGAN {coegan:.1}");
    if !ok {
        let _ = writeln!(warnings, "criterion 11: expected NSLC < COEGAN, got {detail}");
    }
    soft(ok, detail)
}

// ---------------------------------------------------------------- 12

fn determinism() -> Outcome {
    let run = |threads: usize, tag: &str| -> Result<Vec<u8>, String> {
        let mut c = RunConfig::preset(Preset::Desk);
        c.mode = Mode::Nsgc;
        c.seed = 11;
        c.generations = 3;
        c.out_dir = out_root().join(format!("determinism/{tag}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| run_experiment(&c)).map_err(|e| e.to_string())?;
        fs::read(c.out_dir.join("metrics.csv")).map_err(|e| e.to_string())
    };
    let results: Result<Vec<_>, _> = [(1, "w1a"), (1, "w1b"), (4, "w4a"), (4, "w4b")]
        .into_iter()
        .map(|(t, tag)| run(t, tag))
        .collect();
    match results {
        Ok(r) => {
            let same = r.windows(2).all(|w| w[0] == w[1]);
            verdict(same, format!("4 runs (1 and 4 workers, twice each), CSVs byte-identical: {same}"))
        }
        Err(e) => verdict(false, format!("run failed: {e}")),
    }
}

fn main() {
    let mut lines = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
        };
        let line = format!("[{tag}] criterion {n:>2} {name}: {}", o.detail);
        println!("{line}");
        lines.push((o.status, line));
    };
    report(1, "gradient oracle", gradient_oracle());
    report(2, "adam closed form", adam_closed_form());
    report(3, "nondominated sort oracle", nondominated_sort_oracle());
    report(4, "constrained dominance", constrained_dominance_properties());
    report(5, "frechet metric", frechet_metric());
    report(6, "loss formulas", losses());
    report(7, "mutation rates", mutation_rates());
    report(8, "weight transfer identity", weight_transfer_identity());

    let mut warnings = String::new();
    match desk_runs() {
        Ok(runs) => {
            report(9, "end-to-end desk run", end_to_end(&runs));
            report(10, "mode ordering (soft)", mode_ordering(&runs, &mut warnings));
            report(11, "novelty accounting (soft)", novelty_accounting(&runs, &mut warnings));
        }
        Err(e) => {
            for (n, name) in [(9, "end-to-end desk run"), (10, "mode ordering (soft)"), (11, "novelty accounting (soft)")] {
                report(n, name, verdict(false, format!("desk runs failed: {e}")));
            }
        }
    }
    report(12, "determinism", determinism());

    let root = out_root();
    let _ = fs::write(root.join("warnings.txt"), &warnings);
    let text: String = lines.iter().map(|(_, l)| format!("{l}\n")).collect();
    let _ = fs::write(root.join("report.txt"), text);
    let failed = lines.iter().filter(|(s, _)| *s == Status::Fail).count();
    println!("acceptance: {} criteria, {failed} failed, report in {}", lines.len(), root.display());
    if failed > 0 {
        std::process::exit(1);
    }
}
