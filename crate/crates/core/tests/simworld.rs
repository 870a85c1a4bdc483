use reidtrack::math::median;
use reidtrack::pipeline::{run, PipelineConfig, TrackerVariant};
use reidtrack::simworld::{generate_scenario, BackgroundMode, DetectionConfig, ScenarioConfig};

#[test]
fn same_seed_renders_identical_frames() {
    let cfg = ScenarioConfig {
        frames: 30,
        ..ScenarioConfig::hard(17)
    };
    let a = generate_scenario(&cfg).unwrap();
    let b = generate_scenario(&cfg).unwrap();
    assert_eq!(a, b);
    for t in [0, 7, 29] {
        assert_eq!(a.render_frame(t).unwrap(), b.render_frame(t).unwrap());
    }
    let other = generate_scenario(&ScenarioConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.identities[0].embedding, other.identities[0].embedding);
}

#[test]
fn fifty_identities_in_128_dims_are_well_separated() {
    let cfg = ScenarioConfig {
        num_identities: 50,
        frames: 2,
        ..ScenarioConfig::easy(5)
    };
    let s = generate_scenario(&cfg).unwrap();
    let mut min = f64::INFINITY;
    for (i, a) in s.identities.iter().enumerate() {
        for b in &s.identities[i + 1..] {
            min = min.min(a.embedding.distance(&b.embedding).unwrap());
        }
    }
    assert!(min > 1.0, "closest pair at {min}");
}

#[test]
fn noise_free_identity_is_the_distance_argmin() {
    let cfg = ScenarioConfig {
        frames: 60,
        ..ScenarioConfig::easy(9)
    };
    let s = generate_scenario(&cfg).unwrap();
    let g = s.geometry();
    let mut checked = 0;
    for t in 0..s.frames() {
        let obs = s.render_frame(t).unwrap();
        let cells: Vec<_> = s
            .identities
            .iter()
            .filter(|i| i.trajectory[t].present)
            .map(|i| (i, g.cell_at(i.trajectory[t].center).unwrap()))
            .collect();
        for (ident, cell) in &cells {
            if cells.iter().filter(|(_, c)| c == cell).count() > 1 {
                continue;
            }
            let d = obs.embedding_map.distance_map(&ident.embedding).unwrap();
            assert_eq!(d.argmin(), *cell, "frame {t} id {}", ident.id);
            assert!(d.min() < 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn false_positive_count_is_poisson() {
    let fp_rate = 0.002;
    let cfg = ScenarioConfig {
        frames: 400,
        detection: DetectionConfig {
            miss_rate: 1.0,
            fp_rate,
            ..DetectionConfig::default()
        },
        ..ScenarioConfig::easy(21)
    };
    let s = generate_scenario(&cfg).unwrap();
    let count: usize = (0..s.frames())
        .map(|t| s.render_frame(t).unwrap().detections.len())
        .sum();
    let lambda = fp_rate * (cfg.width * cfg.height) as f64 * cfg.frames as f64;
    let z = (count as f64 - lambda) / lambda.sqrt();
    assert!(z.abs() < 3.0, "count {count} against {lambda}");
}

#[test]
fn confuser_sits_closer_than_typical_background() {
    let s = generate_scenario(&ScenarioConfig {
        frames: 5,
        background_mode: BackgroundMode::Confuser,
        ..ScenarioConfig::easy(4)
    })
    .unwrap();
    let c = s.confuser.as_ref().unwrap();
    let target = &s
        .identities
        .iter()
        .find(|i| i.id == c.target)
        .unwrap()
        .embedding;
    let obs = s.render_frame(2).unwrap();
    let d = obs.embedding_map.distance_map(target).unwrap();
    let background: Vec<f64> = d.values().iter().cloned().filter(|v| *v > 1e-9).collect();
    assert!(d.get(c.cell) < median(&background).unwrap());
}

#[test]
fn ground_truth_started_kalman_never_switches_on_clean_detections() {
    for seed in 0..5 {
        let cfg = ScenarioConfig {
            frames: 150,
            motion_noise_sigma: 0.0,
            detection: DetectionConfig {
                miss_rate: 0.0,
                fp_rate: 0.0,
                score_noise: 0.0,
                position_noise: 0.0,
                ..DetectionConfig::default()
            },
            ..ScenarioConfig::easy(seed)
        };
        let s = generate_scenario(&cfg).unwrap();
        let out = run(&s, TrackerVariant::NnkfGt, &PipelineConfig::default()).unwrap();
        assert_eq!(out.metrics.ids, 0, "seed {seed}");
        assert_eq!(out.metrics.fp, 0, "seed {seed}");
    }
}
