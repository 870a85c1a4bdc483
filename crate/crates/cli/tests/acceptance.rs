//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anyhow::{ensure, Result};
use nalgebra::{Matrix2, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reidtrack::assoc::{hungarian, CostMatrix};
use reidtrack::grid::{Cell, GaussianKernel, GridGeometry, ProbabilityGrid};
use reidtrack::histfilter::{GaussianBelief2D, HistFilterConfig, TrackState};
use reidtrack::kalman::KFState;
use reidtrack::measurement::{DistanceGrid, EmbeddingVector};
use reidtrack::metrics::{evaluate, EvalConfig};
use reidtrack::pipeline::{run, run_all, PipelineConfig, TrackerVariant};
use reidtrack::{generate_scenario, Metrics, OutputBox, ScenarioConfig};
use reidtrack_cli::config::RunConfig;
use reidtrack_cli::runner;

// Criterion 1
const CONVOLVE_TOL: f64 = 1e-10;
const CONVOLVE_SEEDS: u64 = 100;
const CONVOLVE_MAX_SIDE: usize = 16;
const HUNGARIAN_MATRICES: u64 = 1000;
const HUNGARIAN_MAX_N: usize = 7;
const HUNGARIAN_COST_TOL: f64 = 1e-9;
const KALMAN_TOL: f64 = 1e-9;
const SOFTMIN_REL_TOL: f64 = 1e-12;
const ORACLE_SECONDS: f64 = 10.0;
// Criterion 2
const NORMALIZATION_TOL: f64 = 1e-9;
const FUZZ_STEPS: usize = 1000;
const ENTROPY_SLACK: f64 = 1e-12;
// Criterion 3
const KF_GRID: usize = 64;
const KF_FRAMES: usize = 50;
const KF_MEAN_TOL_CELLS: f64 = 0.5;
const KF_SECONDS: f64 = 5.0;
// Criterion 4
const METRIC_TOL: f64 = 1e-12;
// Criterion 5
const EASY_SEEDS: u64 = 10;
const EASY_SECONDS: f64 = 60.0;
const EASY_INTEGRATED_MOTA: f64 = 0.90;
const EASY_NNKF_GT_MOTA: f64 = 0.80;
// Criterion 6
const HARD_SEEDS: u64 = 10;
// Criterion 7
const SWEEP_SCALES: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];
const SWEEP_SEEDS: usize = 5;
const SWEEP_ACCEPTED_ARGMAX: [f64; 3] = [0.9, 1.0, 1.1];
// Criterion 8
const DETERMINISM_FRAMES: usize = 80;
const DETERMINISM_SEED: u64 = 7;

type Criterion<'a> = Box<dyn Fn() -> Result<Outcome> + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_grid(r: &mut ChaCha8Rng, w: usize, h: usize) -> ProbabilityGrid {
    let g = GridGeometry::new(w, h, 1.0).unwrap();
    let values = (0..w * h).map(|_| r.random::<f64>() + 1e-3).collect();
    ProbabilityGrid::new(g, values)
        .unwrap()
        .normalized()
        .unwrap()
}

fn quadruple_loop(post: &ProbabilityGrid, k: &GaussianKernel) -> Vec<f64> {
    let (w, h) = (post.width() as isize, post.height() as isize);
    let r = k.radius() as isize;
    let mut out = vec![0.0; (w * h) as usize];
    for orow in 0..h {
        for ocol in 0..w {
            for irow in 0..h {
                for icol in 0..w {
                    let (dr, dc) = (orow - irow, ocol - icol);
                    if dr.abs() <= r && dc.abs() <= r {
                        out[(orow * w + ocol) as usize] +=
                            post.get(Cell::new(irow as usize, icol as usize)) * k.weight(dr, dc);
                    }
                }
            }
        }
    }
    let s: f64 = out.iter().sum();
    out.iter().map(|v| v / s).collect()
}

fn brute_force(cost: &CostMatrix) -> f64 {
    fn rec(row: usize, cost: &CostMatrix, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.rows() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.cols() {
            if !used[c] {
                used[c] = true;
                rec(row + 1, cost, used, acc + cost.get(row, c), best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, cost, &mut vec![false; cost.cols()], 0.0, &mut best);
    best
}

/// Explicit F P F^T + Q followed by the textbook update with H = [I 0].
fn kalman_by_hand(
    m: [f64; 4],
    p: [[f64; 4]; 4],
    q: [f64; 4],
    z: [f64; 2],
    rv: f64,
) -> ([f64; 4], [[f64; 4]; 4]) {
    let f = [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let mut mp = [0.0; 4];
    let mut fp = [[0.0; 4]; 4];
    let mut pp = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            mp[i] += f[i][j] * m[j];
            for k in 0..4 {
                fp[i][j] += f[i][k] * p[k][j];
            }
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                pp[i][j] += fp[i][k] * f[j][k];
            }
        }
        pp[i][i] += q[i];
    }
    let s = [[pp[0][0] + rv, pp[0][1]], [pp[1][0], pp[1][1] + rv]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let si = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let mut k = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            k[i][j] = pp[i][0] * si[0][j] + pp[i][1] * si[1][j];
        }
    }
    let y = [z[0] - mp[0], z[1] - mp[1]];
    let mut mu = mp;
    let mut pu = pp;
    for i in 0..4 {
        mu[i] += k[i][0] * y[0] + k[i][1] * y[1];
        for j in 0..4 {
            pu[i][j] = pp[i][j] - (k[i][0] * pp[0][j] + k[i][1] * pp[1][j]);
        }
    }
    (mu, pu)
}

fn criterion_1() -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut pass = true;

    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..CONVOLVE_SEEDS {
        let mut r = rng(seed);
        let (w, h) = (
            r.random_range(1..=CONVOLVE_MAX_SIDE),
            r.random_range(1..=CONVOLVE_MAX_SIDE),
        );
        let post = random_grid(&mut r, w, h);
        let (a, d) = (r.random_range(0.2..2.0), r.random_range(0.2..2.0));
        let b = r.random_range(-0.8..0.8) * f64::sqrt(a * d);
        let k = GaussianKernel::new(
            [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)],
            [[a, b], [b, d]],
        )?;
        let got = post.convolve(&k)?;
        for (x, y) in got.values().iter().zip(quadruple_loop(&post, &k)) {
            worst = worst.max((x - y).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= worst < CONVOLVE_TOL && secs < ORACLE_SECONDS;
    notes.push(format!("convolve {worst:.1e} in {secs:.2}s"));

    let t = Instant::now();
    let mut mismatches = 0;
    for seed in 0..HUNGARIAN_MATRICES {
        let mut r = rng(50_000 + seed);
        let n = r.random_range(1..=HUNGARIAN_MAX_N);
        let cost = CostMatrix::from_fn(n, n, |_, _| r.random_range(0.0..10.0));
        if (cost.total(&hungarian(&cost)) - brute_force(&cost)).abs() > HUNGARIAN_COST_TOL {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= mismatches == 0 && secs < ORACLE_SECONDS;
    notes.push(format!("hungarian {mismatches} mismatches in {secs:.2}s"));

    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let mut r = rng(70_000 + seed);
        let m = [0.0; 4].map(|_: f64| r.random_range(-50.0..50.0));
        let a: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut p = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                p[i][j] = (0..4).map(|k| a[i * 4 + k] * a[j * 4 + k]).sum::<f64>();
            }
            p[i][i] += 0.5;
        }
        let q = [0.0; 4].map(|_: f64| r.random_range(0.0..2.0));
        let rv = r.random_range(0.5..8.0);
        let z = [r.random_range(-50.0..50.0), r.random_range(-50.0..50.0)];
        let lib = KFState::new(Vector4::from(m), Matrix4::from_fn(|i, j| p[i][j]))
            .predict(&Matrix4::from_diagonal(&Vector4::from(q)))
            .update(z, &(Matrix2::identity() * rv));
        let (mh, ph) = kalman_by_hand(m, p, q, z, rv);
        for i in 0..4 {
            worst = worst.max((lib.mean[i] - mh[i]).abs());
            for j in 0..4 {
                worst = worst.max((lib.covariance[(i, j)] - ph[i][j]).abs());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= worst < KALMAN_TOL && secs < ORACLE_SECONDS;
    notes.push(format!("kalman {worst:.1e} in {secs:.2}s"));

    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut r = rng(90_000 + seed);
        let g = GridGeometry::new(8, 6, 1.0)?;
        let d: Vec<f64> = (0..48).map(|_| r.random_range(0.0..2.0)).collect();
        let tau = r.random_range(0.2..2.0);
        let got = DistanceGrid::new(g, d.clone())?.softmin(tau)?;
        let raw: Vec<f64> = d.iter().map(|v| (-v / tau).exp()).collect();
        let s: f64 = raw.iter().sum();
        for (x, y) in got.values().iter().zip(&raw) {
            worst = worst.max(((x - y / s) / (y / s)).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= worst < SOFTMIN_REL_TOL && secs < ORACLE_SECONDS;
    notes.push(format!("softmin rel {worst:.1e} in {secs:.2}s"));
    outcome(pass, notes.join("; "))
}

fn criterion_2() -> Result<Outcome> {
    let g = GridGeometry::new(14, 11, 8.0)?;
    let cfg = HistFilterConfig::default();
    let mut r = rng(2);
    let start = [50.0, 40.0];
    let mut track = TrackState::init(1, start, EmbeddingVector::new(vec![1.0, 0.0]), &cfg, g)?;
    let mut worst: f64 = 0.0;
    let mut entropy_ok = true;
    let mut uniform_identity = true;
    for _ in 0..FUZZ_STEPS {
        if !track.is_active() {
            track = TrackState::init(1, start, EmbeddingVector::new(vec![1.0, 0.0]), &cfg, g)?;
        }
        track.velocity_belief = GaussianBelief2D::isotropic(
            [r.random_range(-6.0..6.0), r.random_range(-6.0..6.0)],
            r.random_range(0.0..9.0),
        );
        track = track.predict(&cfg)?;
        if !track.is_active() {
            continue;
        }
        worst = worst.max((track.position_belief.sum() - 1.0).abs());
        let lik = if r.random_bool(0.2) {
            ProbabilityGrid::uniform(g)
        } else {
            ProbabilityGrid::from_fn(g, |_| r.random::<f64>().powi(4))?
        };
        let before = track.position_belief.clone();
        track = track.update_with_likelihood(&lik);
        if !track.is_active() {
            continue;
        }
        if lik.values().iter().all(|&v| v == lik.values()[0]) {
            uniform_identity &= track.position_belief.values() == before.values();
        }
        let b = &track.position_belief;
        worst = worst.max((b.sum() - 1.0).abs());
        let h = b.entropy();
        entropy_ok &= h >= -ENTROPY_SLACK && h <= b.max_entropy() + ENTROPY_SLACK;
    }
    let pass = worst < NORMALIZATION_TOL && entropy_ok && uniform_identity;
    outcome(
        pass,
        format!("max |sum-1| {worst:.1e} over {FUZZ_STEPS} steps; uniform update bit-identical: {uniform_identity}; entropy in [0, ln N]: {entropy_ok}"),
    )
}

fn criterion_3() -> Result<Outcome> {
    let t = Instant::now();
    let g = GridGeometry::new(KF_GRID, KF_GRID, 1.0)?;
    let (q, rv, s0): (f64, f64, f64) = (1.0, 4.0, 2.0);
    let v = [0.7, 0.5];
    let cfg = HistFilterConfig {
        sigma_init: s0,
        initial_velocity_var: 0.0,
        position_noise: q,
        velocity_noise: 0.0,
        ..HistFilterConfig::default()
    };
    let start = [12.0, 15.0];
    let mut hf = TrackState::init(1, start, EmbeddingVector::new(vec![1.0]), &cfg, g)?;
    hf.velocity_belief = GaussianBelief2D::isotropic(v, 0.0);
    let mut kf = KFState::new(
        Vector4::new(start[0], start[1], v[0], v[1]),
        Matrix4::from_diagonal(&Vector4::new(s0 * s0, s0 * s0, 0.0, 0.0)),
    );
    let kq = Matrix4::from_diagonal(&Vector4::new(q, q, 0.0, 0.0));
    let mut r = rng(33);
    let mut truth = start;
    let mut normal = move || -> f64 {
        // Box-Muller keeps the test free of extra distributions.
        let (u1, u2): (f64, f64) = (r.random_range(1e-12..1.0), r.random());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..KF_FRAMES {
        truth = [
            truth[0] + v[0] + q.sqrt() * normal(),
            truth[1] + v[1] + q.sqrt() * normal(),
        ];
        let z = [
            truth[0] + rv.sqrt() * normal(),
            truth[1] + rv.sqrt() * normal(),
        ];
        hf = hf.predict(&cfg)?;
        let lik = ProbabilityGrid::from_fn(g, |c| {
            let p = g.cell_center(c);
            (-0.5 * ((p[0] - z[0]).powi(2) + (p[1] - z[1]).powi(2)) / rv).exp()
        })?;
        hf = hf.update_with_likelihood(&lik);
        kf = kf.predict(&kq).update(z, &(Matrix2::identity() * rv));
        let m = hf.position_belief.expectation();
        worst = worst.max(((m[0] - kf.mean[0]).powi(2) + (m[1] - kf.mean[1]).powi(2)).sqrt());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < KF_MEAN_TOL_CELLS && secs < KF_SECONDS,
        format!("max mean gap {worst:.3} cells over {KF_FRAMES} frames on {KF_GRID}x{KF_GRID} in {secs:.2}s"),
    )
}

fn bx(id: u64, frame: usize, x: f64) -> OutputBox {
    OutputBox {
        track_id: id,
        frame,
        center: [x, 100.0],
        width: 20.0,
        height: 50.0,
    }
}

fn criterion_4() -> Result<Outcome> {
    let gt: Vec<OutputBox> = (0..10).map(|f| bx(1, f, 50.0)).collect();
    let hyp: Vec<OutputBox> = (0..10)
        .map(|f| bx(if f < 5 { 7 } else { 8 }, f, 50.0))
        .collect();
    let cfg = EvalConfig::default();
    let m = evaluate(&gt, &hyp, &cfg)?;
    let switch_ok = m.ids == 1
        && (m.mota - 0.9).abs() < METRIC_TOL
        && (m.idf1 - 0.5).abs() < METRIC_TOL
        && (m.motp - 1.0).abs() < METRIC_TOL;
    let own = evaluate(&gt, &gt, &cfg)?;
    let self_ok =
        own.mota == 1.0 && own.motp == 1.0 && own.idf1 == 1.0 && own.idp == 1.0 && own.idr == 1.0;
    let junk: Vec<OutputBox> = (0..10)
        .flat_map(|f| [bx(5, f, 400.0), bx(6, f, 600.0)])
        .collect();
    let neg = evaluate(&gt, &junk, &cfg)?;
    let neg_ok = (neg.mota - (1.0 - 30.0 / 10.0)).abs() < METRIC_TOL;
    let empty = evaluate(&gt, &[], &cfg)?;
    let empty_ok = empty.mota == 0.0 && empty.fn_ == 10 && empty.idr == 0.0;
    outcome(
        switch_ok && self_ok && neg_ok && empty_ok,
        format!(
            "switch: MOTA {:.3} IDF1 {:.3} IDS {}; self: MOTA {} IDF1 {}; negative MOTA {:.1}; empty FN {}",
            m.mota, m.idf1, m.ids, own.mota, own.idf1, neg.mota, empty.fn_
        ),
    )
}

fn mean(v: &[Metrics], f: impl Fn(&Metrics) -> f64) -> f64 {
    v.iter().map(f).sum::<f64>() / v.len() as f64
}

fn criterion_5() -> Result<Outcome> {
    let t = Instant::now();
    let pc = PipelineConfig::default();
    let mut integrated = Vec::new();
    let mut gt_kf = Vec::new();
    for seed in 0..EASY_SEEDS {
        let s = generate_scenario(&ScenarioConfig::easy(seed))?;
        let out = run_all(
            &s,
            &[TrackerVariant::Integrated, TrackerVariant::NnkfGt],
            &pc,
        )?;
        integrated.push(out[0].metrics);
        gt_kf.push(out[1].metrics);
    }
    let secs = t.elapsed().as_secs_f64();
    let (im, ids, km) = (
        mean(&integrated, |m| m.mota),
        mean(&integrated, |m| m.ids as f64),
        mean(&gt_kf, |m| m.mota),
    );
    outcome(
        im >= EASY_INTEGRATED_MOTA && ids == 0.0 && km >= EASY_NNKF_GT_MOTA && secs < EASY_SECONDS,
        format!("integrated MOTA {im:.3} IDS {ids:.1}; NN-KF+GT MOTA {km:.3}; {EASY_SEEDS} seeds in {secs:.1}s"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let pc = PipelineConfig::default();
    let mut by: Vec<Vec<Metrics>> = vec![Vec::new(); TrackerVariant::ALL.len()];
    for seed in 0..HARD_SEEDS {
        let s = generate_scenario(&ScenarioConfig::hard(seed))?;
        for (i, o) in run_all(&s, &TrackerVariant::ALL, &pc)?
            .into_iter()
            .enumerate()
        {
            by[i].push(o.metrics);
        }
    }
    let idx = |v: TrackerVariant| TrackerVariant::ALL.iter().position(|&x| x == v).unwrap();
    let get = |v, f: fn(&Metrics) -> f64| mean(&by[idx(v)], f);
    let ids = |m: &Metrics| m.ids as f64;
    let fp = |m: &Metrics| m.fp as f64;
    let mota = |m: &Metrics| m.mota;
    use TrackerVariant::*;
    let a = get(NnkfReid, ids) < get(NnkfGt, ids) && get(NnkfReid, ids) < get(Nnkf, ids);
    let b = get(IntegratedEntropy, fp) < get(Integrated, fp);
    let c =
        get(NnkfOnlyReid, ids) < get(NnkfGt, ids) && get(NnkfOnlyReid, mota) <= get(NnkfReid, mota);
    let table: Vec<String> = TrackerVariant::ALL
        .iter()
        .map(|&v| {
            format!(
                "{v} MOTA {:.3} FP {:.1} IDS {:.1}",
                get(v, mota),
                get(v, fp),
                get(v, ids)
            )
        })
        .collect();
    outcome(
        a && b && c,
        format!(
            "(a) {} (b) {} (c) {} | {}",
            verdict(a),
            verdict(b),
            verdict(c),
            table.join(" | ")
        ),
    )
}

fn criterion_7(tmp: &Path) -> Result<Outcome> {
    let cfg = RunConfig {
        tracker: TrackerVariant::Integrated,
        seeds: SWEEP_SEEDS,
        ..RunConfig::default()
    };
    let values: Vec<serde_json::Value> = SWEEP_SCALES.iter().map(|&s| s.into()).collect();
    let rows = runner::sweep(&cfg, "scale", &values)?;
    let csv_path = tmp.join("scale_sweep.csv");
    runner::write_sweep_csv(std::fs::File::create(&csv_path)?, "scale", &rows)?;
    let mut rd = csv::Reader::from_path(&csv_path)?;
    ensure!(
        rd.headers()?.iter().collect::<Vec<_>>() == ["scale", "MOTA", "MOTP"],
        "sweep header"
    );
    let parsed: Vec<(f64, f64, f64)> = rd.deserialize().collect::<Result<_, _>>()?;
    ensure!(parsed.len() == SWEEP_SCALES.len(), "sweep rows");

    // Oracle: the first seed at every scale run on its own.
    let mut oracle_ok = true;
    for (i, &scale) in SWEEP_SCALES.iter().enumerate() {
        let pc = PipelineConfig {
            scale,
            ..PipelineConfig::default()
        };
        let s = generate_scenario(&ScenarioConfig::easy(0))?;
        oracle_ok &= run(&s, TrackerVariant::Integrated, &pc)?.metrics == rows[i].runs[0];
        oracle_ok &=
            parsed[i].0 == scale && parsed[i].2 == rows[i].motp && parsed[i].1 == rows[i].mota;
    }
    let best = parsed
        .iter()
        .cloned()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, r| {
            if r.2 > acc.1 {
                (r.0, r.2)
            } else {
                acc
            }
        });
    let near = SWEEP_ACCEPTED_ARGMAX.contains(&best.0);
    let curve: Vec<String> = parsed
        .iter()
        .map(|r| format!("{:.1}:{:.3}", r.0, r.2))
        .collect();
    outcome(
        near && oracle_ok,
        format!(
            "MOTP argmax at scale {} ({}); individual runs match: {oracle_ok}",
            best.0,
            curve.join(" ")
        ),
    )
}

fn read_all(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        if e.file_type()?.is_file() {
            out.push((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path())?,
            ));
        }
    }
    Ok(out)
}

fn reidtrack(args: &[&str]) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_reidtrack"))
        .args(args)
        .output()?;
    ensure!(
        status.status.success(),
        "reidtrack {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn criterion_8(tmp: &Path) -> Result<Outcome> {
    let frames = DETERMINISM_FRAMES.to_string();
    let seed = DETERMINISM_SEED.to_string();
    let set_frames = format!("scenario.frames={frames}");
    let mut runs = Vec::new();
    for rep in 0..2 {
        let scen = tmp.join(format!("scen{rep}"));
        let out = tmp.join(format!("run{rep}"));
        let (scen_s, out_s) = (
            scen.to_string_lossy().into_owned(),
            out.to_string_lossy().into_owned(),
        );
        reidtrack(&[
            "generate",
            "--materialize",
            "--seed",
            &seed,
            "--set",
            &set_frames,
            "--out",
            &scen_s,
        ])?;
        reidtrack(&[
            "track",
            "--tracker",
            "integrated",
            "--scenario",
            &scen_s,
            "--out",
            &out_s,
            "--dump-frames",
        ])?;
        runs.push((
            read_all(&scen)?,
            read_all(&out)?,
            read_all(&out.join(runner::FRAMES_DIR))?,
        ));
    }
    let identical = runs[0] == runs[1];

    // Every variant runs from the same scenario directory.
    let scen_s = tmp.join("scen0").to_string_lossy().into_owned();
    let mut schema_ok = true;
    for v in TrackerVariant::ALL {
        let out = tmp.join(format!("variant_{v}"));
        reidtrack(&[
            "track",
            "--tracker",
            v.name(),
            "--scenario",
            &scen_s,
            "--out",
            &out.to_string_lossy(),
        ])?;
        let json: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join(runner::METRICS_FILE))?)?;
        for key in [
            "MOTA", "MOTP", "FP", "FN", "IDS", "MT", "ML", "IDF1", "IDP", "IDR",
        ] {
            schema_ok &= json.get(key).is_some();
        }
    }

    // In-process runs of the same seed serialize to the same bytes.
    let mut cfg = RunConfig::default().with("scenario.frames", DETERMINISM_FRAMES.into())?;
    cfg.scenario.seed = DETERMINISM_SEED;
    let mut bytes = Vec::new();
    for rep in 0..2 {
        let dir = tmp.join(format!("mem{rep}"));
        runner::write_run(&dir, &runner::track(&cfg)?)?;
        bytes.push(read_all(&dir)?);
    }
    let in_process = bytes[0] == bytes[1];
    let files = runs[0].0.len() + runs[0].1.len() + runs[0].2.len();
    outcome(
        identical && in_process && schema_ok,
        format!("{files} files byte-identical across two CLI runs: {identical}; in-process: {in_process}; all variants write full metrics: {schema_ok}"),
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "fails"
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 oracle equivalences", Box::new(criterion_1)),
        ("2 Bayes-filter invariants", Box::new(criterion_2)),
        ("3 histogram filter matches Kalman", Box::new(criterion_3)),
        ("4 metric correctness", Box::new(criterion_4)),
        ("5 easy regime end-to-end", Box::new(criterion_5)),
        ("6 hard regime orderings", Box::new(criterion_6)),
        ("7 scale sweep", Box::new(|| criterion_7(tmp.path()))),
        ("8 determinism", Box::new(|| criterion_8(tmp.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} [{name}] {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
