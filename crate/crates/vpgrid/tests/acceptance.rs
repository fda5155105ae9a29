//! Acceptance suite. Each test prints one `criterion N (...): pass` line and
//! enforces its accuracy bars and runtime budget.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpgrid::classical::{
    center_baseline, extract_peaks, hough_detect, hough_transform, intersect, sobel_edges,
    BaselineMode, HoughLine, HoughParams,
};
use vpgrid::eval::{evaluate, evaluate_existence, report_to_tsv, EvalReport};
use vpgrid::geometry::{CellIndex, GridSpec, PixelPoint};
use vpgrid::nn::{
    grad_check, load_model, predict_existence, predict_localization, prepare_augmented_samples,
    prepare_samples, reference_architecture, save_model, train_samples, LayerSpec, Network,
    Task, Tensor, TrainConfig, TrainSample,
};
use vpgrid::raster::{parse_pgm, pgm_bytes, ImageRaster};
use vpgrid::scenegen::{
    build_dataset, generate_positive, read_manifest, RngSeed, SceneParams, Split,
};

fn finish(number: u32, name: &str, ok: bool, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    let verdict = if ok && elapsed <= budget { "pass" } else { "fail" };
    println!(
        "criterion {number} ({name}): {verdict} [{:.1}s of {:.0}s budget]",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {number} ({name}) failed its checks");
    assert!(
        elapsed <= budget,
        "criterion {number} ({name}) exceeded its {budget:?} budget: {elapsed:?}"
    );
}

#[test]
fn criterion_1_quantization() {
    let start = Instant::now();
    let mut ok = true;
    for (side, n) in [(300u32, 10u32), (300, 20), (300, 30), (64, 8)] {
        let grid = GridSpec::new(side, side, n).unwrap();
        let mut per_cell = vec![0u64; grid.class_count() as usize];
        for y in 0..side {
            for x in 0..side {
                let p = PixelPoint::new(x as f64 + 0.5, y as f64 + 0.5);
                let cell = grid.pixel_to_cell(p).unwrap();
                // independent floor-quantizer oracle
                let want = CellIndex::new(
                    (y * n / side).min(n - 1),
                    (x * n / side).min(n - 1),
                );
                ok &= cell == want;
                per_cell[grid.linearize(cell).unwrap() as usize] += 1;
            }
        }
        // the cells partition the image
        ok &= per_cell.iter().sum::<u64>() == u64::from(side) * u64::from(side);
        ok &= per_cell.iter().all(|c| *c > 0);
        // linearize is a bijection and cell centers quantize back
        for idx in 0..grid.class_count() {
            let cell = grid.delinearize(idx).unwrap();
            ok &= grid.linearize(cell).unwrap() == idx;
            ok &= grid.pixel_to_cell(grid.cell_to_center(cell).unwrap()).unwrap() == cell;
        }
    }
    finish(1, "quantization", ok, start, Duration::from_secs(5));
}

#[test]
fn criterion_2_chance_level() {
    let start = Instant::now();
    let grid = GridSpec::new(300, 300, 20).unwrap();
    let mut ok = grid.chance_level() == 0.0025;

    // uniform predictor vs uniform truth over 5,000 trials
    let p = grid.class_count();
    let trials = 5_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hits = (0..trials)
        .filter(|_| rng.gen_range(0..p) == rng.gen_range(0..p))
        .count() as f64;
    let rate = hits / f64::from(trials);
    let q = grid.chance_level();
    let se = (q * (1.0 - q) / f64::from(trials)).sqrt();
    ok &= (rate - q).abs() <= 3.0 * se;
    finish(2, "chance level", ok, start, Duration::from_secs(10));
}

#[test]
fn criterion_3_center_baseline() {
    let start = Instant::now();
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // top-1 equals a brute-force histogram argmax on 1,000 random multisets
    for _ in 0..1_000 {
        let n = rng.gen_range(2..=12u32);
        let grid = GridSpec::new(12 * n, 12 * n, n).unwrap();
        let p = grid.class_count();
        let labels: Vec<u32> = (0..rng.gen_range(1..=40)).map(|_| rng.gen_range(0..p)).collect();
        let cells: Vec<CellIndex> =
            labels.iter().map(|&i| grid.delinearize(i).unwrap()).collect();
        let pred = center_baseline(&cells, grid, BaselineMode::Top1).unwrap();
        let mut hist = vec![0u32; p as usize];
        for &i in &labels {
            hist[i as usize] += 1;
        }
        let argmax = (0..p as usize).max_by_key(|&i| (hist[i], usize::MAX - i)).unwrap();
        ok &= pred.entries().len() == 1
            && grid.linearize(pred.entries()[0].0).unwrap() == argmax as u32;
    }

    // top-5 plus shape on 100 randomized modes including corners and edges
    let grid = GridSpec::new(80, 80, 8).unwrap();
    for trial in 0..100u32 {
        let mode_cell = match trial {
            0 => CellIndex::new(0, 0),
            1 => CellIndex::new(0, 7),
            2 => CellIndex::new(7, 0),
            3 => CellIndex::new(7, 7),
            4 => CellIndex::new(0, 3),
            5 => CellIndex::new(7, 4),
            6 => CellIndex::new(3, 0),
            7 => CellIndex::new(4, 7),
            _ => CellIndex::new(rng.gen_range(0..8), rng.gen_range(0..8)),
        };
        // unique mode: 4 copies of the mode plus up to 2 of anything else
        let mut cells = vec![mode_cell; 4];
        for _ in 0..rng.gen_range(0..10) {
            let other = CellIndex::new(rng.gen_range(0..8), rng.gen_range(0..8));
            if other != mode_cell && cells.iter().filter(|c| **c == other).count() < 2 {
                cells.push(other);
            }
        }
        let pred = center_baseline(&cells, grid, BaselineMode::Top5).unwrap();
        let (r, c) = (mode_cell.row as i64, mode_cell.col as i64);
        let expected: Vec<CellIndex> = [(r, c), (r, c - 1), (r - 1, c), (r, c + 1), (r + 1, c)]
            .into_iter()
            .filter(|(r, c)| (0..8).contains(r) && (0..8).contains(c))
            .map(|(r, c)| CellIndex::new(r as u32, c as u32))
            .collect();
        ok &= pred.cells().collect::<Vec<_>>() == expected;
    }
    finish(3, "center baseline", ok, start, Duration::from_secs(5));
}

#[test]
fn criterion_4_hough() {
    let start = Instant::now();
    let mut ok = true;

    // vote conservation on a busy scene
    let params = SceneParams::desk_scale();
    let (img, _) = generate_positive(&params, RngSeed(5)).unwrap();
    let edges = sobel_edges(&img, 2.0).unwrap();
    let acc = hough_transform(&edges, 180, 1.0).unwrap();
    ok &= acc.total_votes() == edges.edge_count() as u64 * 180;

    // single-line concentration: every masked pixel of an ideal horizontal
    // segment lands in one bin
    let mut line_img = ImageRaster::new(64, 64, 0.0).unwrap();
    for x in 8..56 {
        line_img.set(x, 30, 1.0);
    }
    let edges = sobel_edges(&line_img, 1.9).unwrap();
    let acc = hough_transform(&edges, 180, 1.0).unwrap();
    let peaks = extract_peaks(&acc, 4, 1, 2).unwrap();
    ok &= !peaks.is_empty();
    let top = &peaks[0];
    let on_line = edges
        .edge_pixels()
        .filter(|(_, y)| (top.rho - f64::from(*y)).abs() < 0.5)
        .count();
    ok &= top.votes as usize == on_line && on_line > 0;
    ok &= (top.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-9;

    // hand-computed intersections
    let a = HoughLine { theta: 0.0, rho: 10.0, votes: 1 };
    let b = HoughLine { theta: std::f64::consts::FRAC_PI_2, rho: 20.0, votes: 1 };
    let pt = intersect(&a, &b).unwrap();
    ok &= pt.x == 10.0 && pt.y == 20.0;
    ok &= intersect(&a, &a).is_none();
    let c = HoughLine {
        theta: std::f64::consts::FRAC_PI_4,
        rho: std::f64::consts::SQRT_2 * 10.0,
        votes: 1,
    };
    let d = HoughLine { theta: 3.0 * std::f64::consts::FRAC_PI_4, rho: 0.0, votes: 1 };
    let pt = intersect(&c, &d).unwrap();
    ok &= (pt.x - 10.0).abs() < 1e-9 && (pt.y - 10.0).abs() < 1e-9;

    // full chain on clean positives: top-1 >= 90% over 200 seeds
    let clean = SceneParams {
        n_converging: 8,
        n_distractor: 0,
        noise_sigma: 0.0,
        ..SceneParams::desk_scale()
    };
    let grid = GridSpec::new(64, 64, 8).unwrap();
    let hp = HoughParams::default();
    let hits = (0..200u64)
        .filter(|seed| {
            let (img, vp) = generate_positive(&clean, RngSeed(*seed)).unwrap();
            let truth = grid.pixel_to_cell(vp).unwrap();
            hough_detect(&img, grid, &hp, 1).unwrap().topk_hit(truth, 1)
        })
        .count();
    ok &= hits >= 180;
    finish(4, "hough", ok, start, Duration::from_secs(60));
}

fn random_small_net(rng: &mut ChaCha8Rng) -> (Network, usize, usize) {
    let h = rng.gen_range(6..=9);
    let w = rng.gen_range(6..=9);
    let head = rng.gen_range(3..=5);
    let mut specs = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        specs.push(LayerSpec::Conv {
            out_channels: rng.gen_range(2..=4),
            kernel: 3,
            stride: 1,
            pad: 1,
        });
        specs.push(LayerSpec::ReLU);
    }
    if rng.gen_bool(0.5) {
        specs.push(LayerSpec::MaxPool { window: 2, stride: 2 });
    }
    specs.push(LayerSpec::Flatten);
    specs.push(LayerSpec::Dense { out_features: rng.gen_range(6..=12) });
    specs.push(LayerSpec::ReLU);
    specs.push(LayerSpec::Dense { out_features: head });
    let net = Network::build(1, h, w, &specs, rng.gen()).unwrap();
    (net, h * w, head)
}

#[test]
fn criterion_5_gradient_check() {
    let start = Instant::now();
    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..20 {
        let (net, pixels, head) = random_small_net(&mut rng);
        let batch_size = 2;
        let data: Vec<f64> = (0..batch_size * pixels).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (_, h, w) = net.input_shape();
        let batch = Tensor::from_data(&[batch_size, 1, h, w], data).unwrap();
        let labels: Vec<usize> = (0..batch_size).map(|_| rng.gen_range(0..head)).collect();
        let report = grad_check(&net, &batch, &labels, 1e-4, 200).unwrap();
        ok &= report.max_rel_error < 1e-4;
        ok &= report.checked > 0;
    }
    finish(5, "gradient check", ok, start, Duration::from_secs(60));
}

#[test]
fn criterion_6_overfit() {
    let start = Instant::now();
    let grid = GridSpec::new(64, 64, 8).unwrap();
    let params = SceneParams::desk_scale();
    let samples: Vec<TrainSample> = (0..16u64)
        .map(|seed| {
            let (img, vp) = generate_positive(&params, RngSeed(600 + seed)).unwrap();
            let label =
                grid.linearize(grid.pixel_to_cell(vp).unwrap()).unwrap() as usize;
            TrainSample { image: img, label }
        })
        .collect();
    let mut net = Network::build(1, 64, 64, &reference_architecture(64), 6).unwrap();
    let mut trained = 0;
    let mut ok = false;
    while trained < 200 {
        let cfg = TrainConfig {
            epochs: 20,
            seed: trained as u64,
            ..TrainConfig::default()
        };
        let (next, _) = train_samples(net, &samples, &cfg).unwrap();
        net = next;
        trained += 20;
        let correct = samples
            .iter()
            .filter(|s| {
                let pred = predict_localization(&net, &s.image, grid, 1).unwrap();
                grid.linearize(pred.entries()[0].0).unwrap() as usize == s.label
            })
            .count();
        if correct == samples.len() {
            ok = true;
            break;
        }
    }
    finish(6, "overfit", ok, start, Duration::from_secs(120));
}

#[test]
fn criterion_7_desk_scale_experiment() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(64, 64, 8).unwrap();
    let params = SceneParams {
        noise_sigma: 0.15,
        n_distractor: 8,
        ..SceneParams::desk_scale()
    };
    let manifest_path = dir.path().join("manifest.txt");
    let manifest =
        build_dataset(350, 350, 0.7143, &params, &[grid], RngSeed(42), dir.path()).unwrap();
    assert_eq!(manifest.split(Split::Train).count(), 500);
    assert_eq!(manifest.split(Split::Test).count(), 200);

    // existence net over all 500 train samples
    let ex_samples =
        prepare_samples(&manifest_path, &manifest, Task::Existence, grid, Split::Train).unwrap();
    let cfg = TrainConfig { epochs: 6, ..TrainConfig::default() };
    let ex_net = Network::build(1, 64, 64, &reference_architecture(2), 0).unwrap();
    let (ex_net, _) = train_samples(ex_net, &ex_samples, &cfg).unwrap();

    // localization net over the 250 train positives plus augmented copies
    let loc_samples = prepare_augmented_samples(
        &manifest_path,
        &manifest,
        Task::Localization,
        grid,
        Split::Train,
        4,
        0,
    )
    .unwrap();
    let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
    let loc_net = Network::build(1, 64, 64, &reference_architecture(64), 0).unwrap();
    let (loc_net, _) = train_samples(loc_net, &loc_samples, &cfg).unwrap();

    // existence accuracy over the full test split
    let mut probs = Vec::new();
    let mut flags = Vec::new();
    for entry in manifest.split(Split::Test) {
        let img = vpgrid::scenegen::load_entry_image(&manifest_path, entry).unwrap();
        probs.push(predict_existence(&ex_net, &img).unwrap());
        flags.push(entry.vp.is_some());
    }
    let existence_acc = evaluate_existence(&probs, &flags, 0.5).unwrap();

    // localization over the positive test images
    let mut truths = Vec::new();
    let mut images = Vec::new();
    for entry in manifest.split(Split::Test) {
        if let Some(vp) = entry.vp {
            truths.push(grid.pixel_to_cell(vp).unwrap());
            images.push(vpgrid::scenegen::load_entry_image(&manifest_path, entry).unwrap());
        }
    }
    let hp = HoughParams::default();
    let train_labels: Vec<CellIndex> = manifest
        .split(Split::Train)
        .filter_map(|e| e.vp)
        .map(|vp| grid.pixel_to_cell(vp).unwrap())
        .collect();
    let center_pred = center_baseline(&train_labels, grid, BaselineMode::Top5).unwrap();
    let cnn: Vec<_> = images
        .iter()
        .map(|img| predict_localization(&loc_net, img, grid, 5).unwrap())
        .collect();
    let hough: Vec<_> = images
        .iter()
        .map(|img| hough_detect(img, grid, &hp, 5).unwrap())
        .collect();
    let center: Vec<_> = images.iter().map(|_| center_pred.clone()).collect();
    let cnn_row = evaluate("cnn", &cnn, &truths, grid).unwrap();
    let hough_row = evaluate("hough", &hough, &truths, grid).unwrap();
    let center_row = evaluate("center", &center, &truths, grid).unwrap();
    println!(
        "  existence {existence_acc:.3}; top-1 cnn {:.3} hough {:.3} center {:.3} chance {:.4}; cnn top-5 {:.3}",
        cnn_row.top1_accuracy(),
        hough_row.top1_accuracy(),
        center_row.top1_accuracy(),
        grid.chance_level(),
        1.0 - cnn_row.top5_error(),
    );
    let mut ok = existence_acc >= 0.95;
    ok &= 1.0 - cnn_row.top5_error() >= 0.80;
    ok &= cnn_row.top1_accuracy() > hough_row.top1_accuracy();
    ok &= hough_row.top1_accuracy() > center_row.top1_accuracy();
    ok &= center_row.top1_accuracy() > grid.chance_level();
    finish(7, "desk-scale experiment", ok, start, Duration::from_secs(600));
}

#[test]
fn criterion_8_bit_exactness() {
    let start = Instant::now();
    let mut ok = true;

    // PGM round trip
    let (img, _) = generate_positive(&SceneParams::desk_scale(), RngSeed(8)).unwrap();
    let bytes = pgm_bytes(&img);
    ok &= pgm_bytes(&parse_pgm(&bytes).unwrap()) == bytes;

    // model round trip
    let dir = tempfile::tempdir().unwrap();
    let net = Network::build(1, 64, 64, &reference_architecture(64), 8).unwrap();
    let path_a = dir.path().join("a.vpg");
    let path_b = dir.path().join("b.vpg");
    save_model(&net, &path_a).unwrap();
    save_model(&load_model(&path_a).unwrap(), &path_b).unwrap();
    ok &= std::fs::read(&path_a).unwrap() == std::fs::read(&path_b).unwrap();

    // two full pipeline runs with equal seeds give byte-identical reports
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>, String)> = Vec::new();
    for run in ["run1", "run2"] {
        let out = dir.path().join(run);
        let params = SceneParams::desk_scale();
        let grid = GridSpec::new(64, 64, 8).unwrap();
        build_dataset(8, 8, 0.75, &params, &[grid], RngSeed(88), &out).unwrap();
        let manifest_path = out.join("manifest.txt");
        let manifest = read_manifest(&manifest_path).unwrap();
        let samples =
            prepare_samples(&manifest_path, &manifest, Task::Existence, grid, Split::Train)
                .unwrap();
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let net = Network::build(1, 64, 64, &reference_architecture(2), 0).unwrap();
        let (net, _) = train_samples(net, &samples, &cfg).unwrap();
        let model_path = out.join("model.vpg");
        save_model(&net, &model_path).unwrap();

        let mut report = EvalReport::new();
        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for entry in manifest.split(Split::Test) {
            if let Some(vp) = entry.vp {
                let img = vpgrid::scenegen::load_entry_image(&manifest_path, entry).unwrap();
                truths.push(grid.pixel_to_cell(vp).unwrap());
                preds.push(hough_detect(&img, grid, &HoughParams::default(), 5).unwrap());
            }
        }
        report.rows.push(evaluate("hough", &preds, &truths, grid).unwrap());
        artifacts.push((
            std::fs::read(&model_path).unwrap(),
            std::fs::read(&manifest_path).unwrap(),
            report_to_tsv(&report),
        ));
    }
    ok &= artifacts[0] == artifacts[1];
    finish(8, "bit exactness", ok, start, Duration::from_secs(30));
}
