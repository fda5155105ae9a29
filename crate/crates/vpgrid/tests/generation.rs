//! Checks generated positives against an independent line-fit oracle and
//! exercises dataset round trips.

use vpgrid::geometry::PixelPoint;
use vpgrid::raster::CoveredPixel;
use vpgrid::scenegen::{
    build_dataset, generate_positive_scene, read_manifest, RngSeed, SceneParams, Split,
};

/// Fits an infinite line to covered pixels by coverage-weighted total least
/// squares. Returns (centroid, unit normal).
fn fit_line(pixels: &[CoveredPixel]) -> ((f64, f64), (f64, f64)) {
    let wsum: f64 = pixels.iter().map(|p| p.coverage).sum();
    assert!(wsum > 0.0);
    let cx = pixels
        .iter()
        .map(|p| p.coverage * (p.x as f64 + 0.5))
        .sum::<f64>()
        / wsum;
    let cy = pixels
        .iter()
        .map(|p| p.coverage * (p.y as f64 + 0.5))
        .sum::<f64>()
        / wsum;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pixels {
        let dx = p.x as f64 + 0.5 - cx;
        let dy = p.y as f64 + 0.5 - cy;
        sxx += p.coverage * dx * dx;
        sxy += p.coverage * dx * dy;
        syy += p.coverage * dy * dy;
    }
    // Principal direction of the 2x2 scatter matrix; the normal is its
    // eigenvector for the smaller eigenvalue.
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lambda = 0.5 * trace + (0.25 * trace * trace - det).max(0.0).sqrt();
    let (dx, dy) = if sxy.abs() > 1e-12 {
        (lambda - syy, sxy)
    } else if sxx >= syy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (dx * dx + dy * dy).sqrt();
    ((cx, cy), (-dy / norm, dx / norm))
}

/// Least-squares point of concurrence of lines given as (point, unit normal).
fn concurrence_point(lines: &[((f64, f64), (f64, f64))]) -> (f64, f64) {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((cx, cy), (nx, ny)) in lines {
        a11 += nx * nx;
        a12 += nx * ny;
        a22 += ny * ny;
        let rho = nx * cx + ny * cy;
        b1 += nx * rho;
        b2 += ny * rho;
    }
    let det = a11 * a22 - a12 * a12;
    assert!(det.abs() > 1e-9, "degenerate line bundle");
    ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
}

#[test]
fn converging_segments_agree_with_recorded_vp() {
    let params = SceneParams {
        noise_sigma: 0.0,
        n_distractor: 0,
        ..SceneParams::desk_scale()
    };
    for seed in 0..40u64 {
        let scene = generate_positive_scene(&params, RngSeed(seed)).unwrap();
        let fits: Vec<_> = scene
            .converging_pixels
            .iter()
            .filter(|p| p.len() >= 8)
            .map(|p| fit_line(p))
            .collect();
        assert!(fits.len() >= 2, "seed {seed}: too few usable segments");
        let (x, y) = concurrence_point(&fits);
        let dist = ((x - scene.vp.x).powi(2) + (y - scene.vp.y).powi(2)).sqrt();
        assert!(
            dist < 1.0,
            "seed {seed}: fitted point ({x:.2},{y:.2}) is {dist:.3} px from {:?}",
            scene.vp
        );
    }
}

#[test]
fn vp_stays_inside_central_band() {
    let params = SceneParams::desk_scale();
    for seed in 0..200u64 {
        let scene = generate_positive_scene(&params, RngSeed(seed)).unwrap();
        let PixelPoint { x, y } = scene.vp;
        assert!(x >= 0.1 * 64.0 && x <= 0.9 * 64.0);
        assert!(y >= 0.1 * 64.0 && y <= 0.9 * 64.0);
    }
}

#[test]
fn dataset_round_trip_preserves_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let params = SceneParams::desk_scale();
    let grids = [vpgrid::geometry::GridSpec::new(64, 64, 8).unwrap()];
    let manifest = build_dataset(10, 10, 0.8, &params, &grids, RngSeed(3), dir.path()).unwrap();
    let loaded = read_manifest(&dir.path().join("manifest.txt")).unwrap();
    assert_eq!(loaded.entries.len(), manifest.entries.len());
    assert_eq!(loaded.grids, manifest.grids);
    assert_eq!(loaded.split(Split::Train).count(), 16);
    assert_eq!(loaded.split(Split::Test).count(), 4);
    for (a, b) in loaded.entries.iter().zip(&manifest.entries) {
        assert_eq!(a.path, b.path);
        assert_eq!(a.split, b.split);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.vp.is_some(), b.vp.is_some());
    }
}
