//! Acceptance suite. Every criterion runs at its stated tolerance and prints
//! one PASS or FAIL line; the process fails if any criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use caninesynth::core::assets::{procedural_assets, ProceduralAssetConfig};
use caninesynth::core::composite::{generate_sample, Assets, DataSample, GenerationParams};
use caninesynth::core::eval::{dice_f2, iou, iterative_threshold, pixel_accuracy, BinaryMask, Heatmap};
use caninesynth::core::image::{Image, PixelRect};
use caninesynth::core::linalg::{Quat, Rigid, Vec3};
use caninesynth::core::mesh::{
    apply_lbs, forward_kinematics, generate_canonical_dog, procedural_textures, DogConfig, PoseParams,
    JOINT_COUNT,
};
use caninesynth::core::pca::{fit_pca, project, synthesize_unclamped, SampleMatrix};
use caninesynth::core::placement::{
    clamp_translation, depth_for_size, sample_center, select_window, BBoxEntry, BBoxStats, DepthBounds,
};
use caninesynth::dataset::{SampleFiles, SampleRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn assets() -> &'static Assets {
    static ASSETS: std::sync::OnceLock<Assets> = std::sync::OnceLock::new();
    ASSETS.get_or_init(|| procedural_assets(&ProceduralAssetConfig::default()).expect("procedural assets"))
}

/// Generates samples in parallel and checks each one as it is produced, so
/// only the per-sample results are kept in memory.
fn check_samples<T: Send>(
    seed: u64,
    n: u64,
    f: impl Fn(&DataSample) -> Result<T, String> + Sync,
) -> Result<Vec<T>, String> {
    let params = GenerationParams::default();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let s = generate_sample(&params, assets(), seed, i).map_err(|e| format!("sample {i}: {e}"))?;
            f(&s)
        })
        .collect()
}

fn pca_round_trip() -> Outcome {
    let start = Instant::now();
    let mesh = generate_canonical_dog(&DogConfig::default()).map_err(|e| e.to_string())?;
    check(mesh.faces().len() == 4848, || {
        format!("{} faces", mesh.faces().len())
    })?;
    let textures = procedural_textures(&mesh, 12, 4, 3).map_err(|e| e.to_string())?;
    let cols: Vec<&[f64]> = textures.iter().map(|t| t.texels()).collect();
    let model = fit_pca(&SampleMatrix::from_columns(textures[0].layout(), &cols).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(model.n_features() == 4848 * 64 * 3, || {
        format!("{} features", model.n_features())
    })?;
    let mut worst: f64 = 0.0;
    for x in &cols {
        let c = project(&model, x).map_err(|e| e.to_string())?;
        let y = synthesize_unclamped(&model, &c).map_err(|e| e.to_string())?;
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    let ortho = model.orthonormality_error();
    let elapsed = start.elapsed();
    check(worst <= 1e-6, || {
        format!("relative reconstruction error {worst:e}")
    })?;
    check(ortho <= 1e-8, || format!("orthonormality error {ortho:e}"))?;
    within(elapsed, 30.0, "fit")?;
    Ok(format!(
        "{} components, worst relative error {worst:.1e}, orthonormality {ortho:.1e}, {:.1} s",
        model.n_components(),
        elapsed.as_secs_f64()
    ))
}

fn random_quat(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let q = Quat::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if q.norm() > 0.1 {
            return q.normalized();
        }
    }
}

fn lbs_identity_and_equivariance() -> Outcome {
    let mesh = generate_canonical_dog(&DogConfig::default()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let kin =
        forward_kinematics(mesh.skeleton(), &PoseParams::identity(JOINT_COUNT)).map_err(|e| e.to_string())?;
    let rest = apply_lbs(&mesh, &kin.globals).map_err(|e| e.to_string())?;
    let id_err = rest
        .iter()
        .zip(mesh.vertices())
        .map(|(a, b)| a.max_abs_diff(*b))
        .fold(0.0, f64::max);
    check(id_err <= 1e-10, || format!("identity error {id_err:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut eq_err: f64 = 0.0;
    for _ in 0..100 {
        let pose = PoseParams {
            joint_rotations: (0..JOINT_COUNT).map(|_| random_quat(&mut rng)).collect(),
            root_rotation: random_quat(&mut rng),
            root_depth: rng.random_range(0.0..10.0),
        };
        let motion = Rigid::new(
            random_quat(&mut rng),
            Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        );
        let kin = forward_kinematics(mesh.skeleton(), &pose).map_err(|e| e.to_string())?;
        let moved: Vec<Rigid> = kin.globals.iter().map(|g| motion * *g).collect();
        let a = apply_lbs(&mesh, &moved).map_err(|e| e.to_string())?;
        let b = apply_lbs(&mesh, &kin.globals).map_err(|e| e.to_string())?;
        for (x, y) in a.iter().zip(&b) {
            eq_err = eq_err.max(x.max_abs_diff(motion.apply(*y)));
        }
    }
    let elapsed = start.elapsed();
    check(eq_err <= 1e-8, || format!("equivariance error {eq_err:e}"))?;
    within(elapsed, 5.0, "identity + 100 poses")?;
    Ok(format!(
        "identity {id_err:.1e}, equivariance {eq_err:.1e} over 100 poses, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn compositing_exactness() -> Outcome {
    let errors = check_samples(11, 100, |s| {
        let bg = &assets().backgrounds()[s.background].image;
        let mut worst: f64 = 0.0;
        for y in 0..s.rgb.height() {
            for x in 0..s.rgb.width() {
                let m = if *s.render.mask.get(x, y) { 1.0 } else { 0.0 };
                let fg = s.render.rgb.get(x, y);
                let b = bg.get(x, y);
                let out = s.rgb.get(x, y);
                for c in 0..3 {
                    worst = worst.max((out[c] - (b[c] * (1.0 - m) + fg[c])).abs());
                }
            }
        }
        if let Some((x, y)) = s.render.consistency_violation() {
            return Err(format!(
                "sample {}: mask/depth/part disagree at ({x}, {y})",
                s.index
            ));
        }
        // Independent restatement of the channel agreement.
        for ((m, p), d) in s
            .render
            .mask
            .data()
            .iter()
            .zip(s.render.part_map.data())
            .zip(s.render.depth.data())
        {
            check(*m == p.is_some() && *m == d.is_finite(), || {
                format!("sample {} channels disagree", s.index)
            })?;
            if !m {
                check(*d == f64::INFINITY, || {
                    format!("sample {} background depth {d}", s.index)
                })?;
            }
        }
        Ok(worst)
    })?;
    let worst = errors.into_iter().fold(0.0, f64::max);
    check(worst <= 1e-7, || format!("max compositing error {worst:e}"))?;
    Ok(format!(
        "100 samples, max |out − (bg·(1−mask)+rgb)| = {worst:.1e}, channels consistent"
    ))
}

fn random_stats(rng: &mut ChaCha8Rng, n: usize) -> BBoxStats {
    BBoxStats::new(
        (0..n)
            .map(|_| BBoxEntry {
                size_fraction: rng.random_range(0.001..1.0),
                cx: rng.random_range(0.0..1.0),
                cy: rng.random_range(0.0..1.0),
            })
            .collect(),
    )
    .unwrap()
}

fn brute_window(stats: &BBoxStats, s: f64) -> Vec<usize> {
    let sizes: Vec<f64> = stats.entries().iter().map(|e| e.size_fraction).collect();
    let smin = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sizes.iter().cloned().fold(0.0, f64::max);
    let mut h = 0.1;
    loop {
        let (lo, hi) = (s * (1.0 - h), s * (1.0 + h));
        let hits: Vec<usize> = (0..sizes.len())
            .filter(|&i| lo <= sizes[i] && sizes[i] <= hi)
            .collect();
        if hits.len() >= 2 || (lo <= smin && hi >= smax) {
            return hits;
        }
        h *= 1.5;
    }
}

fn placement_soundness() -> Outcome {
    let (w, h) = (455usize, 256usize);
    let bounds = DepthBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut placed, mut unclamped_axes, mut worst_centre) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..200);
        let stats = random_stats(&mut rng, n);
        let mut by_size = Vec::with_capacity(100);
        for _ in 0..100 {
            // Render boxes always lie in the frame; some touch its edges.
            let bw = rng.random_range(1..=w as i64);
            let bh = rng.random_range(1..=h as i64);
            let x0 = rng.random_range(0..=w as i64 - bw);
            let y0 = rng.random_range(0..=h as i64 - bh);
            let rect = PixelRect::new(x0, y0, x0 + bw, y0 + bh);
            let size = rect.area() as f64 / (w * h) as f64;
            by_size.push((size, depth_for_size(&stats, &bounds, size)));

            let cp = sample_center(&stats, size, &mut rng).map_err(|e| e.to_string())?;
            let (dx, dy) = clamp_translation(rect, cp, (w, h)).map_err(|e| e.to_string())?;
            let moved = rect.translated(dx, dy);
            check(moved.inside(w, h), || {
                format!("{rect:?} moved to {moved:?} leaves the frame")
            })?;
            placed += 1;

            let (cx, cy) = rect.center();
            for (axis, (lo, hi, len, target, c, d)) in [
                (rect.x0, rect.x1, w, cp[0] * w as f64, cx, dx),
                (rect.y0, rect.y1, h, cp[1] * h as f64, cy, dy),
            ]
            .into_iter()
            .enumerate()
            {
                let ideal = target - c;
                let free =
                    lo > 0 && hi < len as i64 && lo as f64 + ideal >= 0.0 && hi as f64 + ideal <= len as f64;
                if free {
                    unclamped_axes += 1;
                    let err = (c + d as f64 - target).abs();
                    worst_centre = worst_centre.max(err);
                    check(err <= 1.0, || {
                        format!("axis {axis}: centre misses target by {err}")
                    })?;
                }
            }
        }
        by_size.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in by_size.windows(2) {
            check(pair[1].1 <= pair[0].1, || {
                format!("depth grows with size: {pair:?}")
            })?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let stats = random_stats(&mut rng, n);
        let s = rng.random_range(0.001..1.0);
        let sel = select_window(&stats, s);
        let want = brute_window(&stats, s);
        check(sel.indices == want, || {
            format!("window {:?} vs brute force {want:?}", sel.indices)
        })?;
    }
    Ok(format!(
        "{placed} placements in frame, depth monotone, {unclamped_axes} unclamped axes within {worst_centre:.2} px, \
         1000 windows match brute force"
    ))
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, workers: &str| -> Result<(BTreeMap<PathBuf, Vec<u8>>, f64), String> {
        let out = tmp.path().join(name);
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_caninesynth"))
            .args([
                "generate",
                "--count",
                "100",
                "--seed",
                "7",
                "--workers",
                workers,
                "--out",
            ])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        check(status.success(), || format!("generate exited with {status}"))?;
        check(secs < 120.0, || format!("run {name} took {secs:.1} s"))?;
        Ok((collect_files(&out), secs))
    };
    let (a, ta) = run("first", "1")?;
    let (b, tb) = run("second", "1")?;
    let (c, tc) = run("eight", "8")?;
    check(a.len() == 401, || format!("{} files written", a.len()))?;
    for (name, other) in [("rerun", &b), ("8 workers", &c)] {
        check(a.keys().eq(other.keys()), || {
            format!("{name}: different file sets")
        })?;
        if let Some((p, _)) = a.iter().find(|(p, bytes)| other[*p] != **bytes) {
            return Err(format!("{name}: {} differs", p.display()));
        }
    }
    Ok(format!(
        "{} files byte-identical across runs and 1 vs 8 workers ({ta:.1} s, {tb:.1} s, {tc:.1} s)",
        a.len()
    ))
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    let p = rng.random_range(0.0..1.0);
    Image::from_fn(w, h, |_, _| rng.random_bool(p))
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(1..9), rng.random_range(1..9));
        let (a, b) = (random_mask(&mut rng, w, h), random_mask(&mut rng, w, h));
        let on = |m: &BinaryMask| -> HashSet<usize> { (0..w * h).filter(|&i| m.data()[i]).collect() };
        let (sa, sb) = (on(&a), on(&b));
        let inter = sa.intersection(&sb).count();
        let union = sa.union(&sb).count();
        let want_iou = if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
        let denom = sa.len() + sb.len();
        let want_dice = if denom == 0 {
            1.0
        } else {
            2.0 * inter as f64 / denom as f64
        };
        let want_acc = (w * h - sa.symmetric_difference(&sb).count()) as f64 / (w * h) as f64;
        let got = (
            iou(&a, &b).unwrap(),
            dice_f2(&a, &b).unwrap(),
            pixel_accuracy(&a, &b).unwrap(),
        );
        check(got == (want_iou, want_dice, want_acc), || {
            format!("{got:?} vs oracle {:?}", (want_iou, want_dice, want_acc))
        })?;
        // dice = 2·iou/(1+iou): exact on counts since |a|+|b| = union + inter.
        check(denom == union + inter, || "count identity broken".into())?;
        let via = 2.0 * got.0 / (1.0 + got.0);
        check((got.1 - via).abs() <= 4.0 * f64::EPSILON, || {
            format!("dice {} vs 2·iou/(1+iou) {via}", got.1)
        })?;
    }
    // Bounds over a larger fuzz set.
    for _ in 0..10_000 {
        let (w, h) = (rng.random_range(1..6), rng.random_range(1..6));
        let (a, b) = (random_mask(&mut rng, w, h), random_mask(&mut rng, w, h));
        for m in [
            iou(&a, &b).unwrap(),
            dice_f2(&a, &b).unwrap(),
            pixel_accuracy(&a, &b).unwrap(),
        ] {
            check((0.0..=1.0).contains(&m), || format!("metric {m} out of bounds"))?;
        }
    }
    let m = random_mask(&mut rng, 16, 16);
    let full = Image::filled(8, 8, true);
    let left = Image::from_fn(8, 8, |x, _| x < 4);
    let right = Image::from_fn(8, 8, |x, _| x >= 4);
    check(
        iou(&m, &m).unwrap() == 1.0
            && dice_f2(&m, &m).unwrap() == 1.0
            && pixel_accuracy(&m, &m).unwrap() == 1.0,
        || "identical masks".into(),
    )?;
    check(
        iou(&left, &right).unwrap() == 0.0 && dice_f2(&left, &right).unwrap() == 0.0,
        || "disjoint masks".into(),
    )?;
    check(iou(&full, &left).unwrap() == 0.5, || "half overlap".into())?;
    Ok("1000 pairs match counting oracles exactly, dice–IoU identity holds, 10000 pairs in bounds".into())
}

/// 64×64 heatmap: an ellipse at `dog`, a surrounding box at `box_mode` and
/// near-zero background, with Gaussian noise of σ = 0.02 on the two modes.
fn bimodal_heatmap(seed: u64, dog: f64, box_mode: f64) -> (Heatmap, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let (w, h) = (64usize, 64usize);
    let mut truth = Vec::with_capacity(w * h);
    let values: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            let in_dog = ((x - 32.0) / 26.0).powi(2) + ((y - 32.0) / 20.0).powi(2) <= 1.0;
            let in_box = (1.0..=63.0).contains(&x) && (1.5..=62.5).contains(&y);
            truth.push(in_dog);
            if in_dog {
                dog + noise.sample(&mut rng)
            } else if in_box {
                box_mode + noise.sample(&mut rng)
            } else {
                0.02 + 0.01 * rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    let hm = Heatmap::clamped(Image::from_vec(w, h, values).unwrap()).0;
    (hm, Image::from_vec(w, h, truth).unwrap())
}

fn threshold_sensitivity() -> Outcome {
    let (mut close_max, mut far_min) = (0.0f64, 1.0f64);
    let mut detail = String::new();
    for seed in 0..5 {
        let (hm, dog) = bimodal_heatmap(seed, 0.725, 0.525);
        let (t5, m5) = iterative_threshold(&hm, 0.5).map_err(|e| e.to_string())?;
        let (t7, m7) = iterative_threshold(&hm, 0.7).map_err(|e| e.to_string())?;
        let agree = iou(&m5, &m7).unwrap();
        close_max = close_max.max(agree);
        if seed == 0 {
            detail = format!(
                "0.525/0.725: t={t5:.3} vs {t7:.3}, IoU with dog {:.3} vs {:.3}",
                iou(&m5, &dog).unwrap(),
                iou(&m7, &dog).unwrap()
            );
        }
        check(agree < 0.5, || {
            format!("seed {seed}: masks agree with IoU {agree}")
        })?;

        let (hm, _) = bimodal_heatmap(seed, 0.9, 0.1);
        let (_, m5) = iterative_threshold(&hm, 0.5).map_err(|e| e.to_string())?;
        let (_, m7) = iterative_threshold(&hm, 0.7).map_err(|e| e.to_string())?;
        let agree = iou(&m5, &m7).unwrap();
        far_min = far_min.min(agree);
        check(agree > 0.99, || {
            format!("seed {seed}: 0.1/0.9 masks differ, IoU {agree}")
        })?;
    }
    Ok(format!(
        "5 heatmaps each; modes 0.525/0.725 IoU(t0=0.5, t0=0.7) ≤ {close_max:.3}, modes 0.1/0.9 ≥ {far_min:.3}; {detail}"
    ))
}

fn reprojection() -> Outcome {
    let cam = GenerationParams::default().camera;
    let per_sample = check_samples(21, 1000, |s| {
        // Go through the annotation file format.
        let json =
            serde_json::to_string(&SampleRecord::of(s, 21, SampleFiles::for_index(s.index, false))).unwrap();
        let rec: SampleRecord = serde_json::from_str(&json).unwrap();
        check(rec.joints_2d.len() == JOINT_COUNT, || "joint count".into())?;
        let [dx, dy] = rec.placement.translation;
        let (mut worst, mut checked, mut behind) = (0.0f64, 0usize, 0usize);
        for (j3, j2) in rec.joints_3d.iter().zip(&rec.joints_2d) {
            let depth = -j3[2];
            match j2.position {
                Some([u, v]) => {
                    let pu = cam.principal[0] + cam.focal * j3[0] / depth + dx as f64;
                    let pv = cam.principal[1] - cam.focal * j3[1] / depth + dy as f64;
                    let err = (pu - u).hypot(pv - v);
                    worst = worst.max(err);
                    checked += 1;
                    check(err <= 0.5, || {
                        format!("sample {} joint error {err} px", rec.index)
                    })?;
                }
                None => {
                    behind += 1;
                    check(depth <= cam.near, || {
                        format!("sample {}: joint in front of camera lost", rec.index)
                    })?;
                }
            }
        }
        Ok((worst, checked, behind))
    })?;
    let worst = per_sample.iter().map(|r| r.0).fold(0.0, f64::max);
    let checked: usize = per_sample.iter().map(|r| r.1).sum();
    let behind: usize = per_sample.iter().map(|r| r.2).sum();
    Ok(format!(
        "1000 samples, {checked} joints within {worst:.1e} px, {behind} behind the camera"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("PCA round trip", pca_round_trip),
        ("LBS identity and equivariance", lbs_identity_and_equivariance),
        ("Compositing exactness", compositing_exactness),
        ("Placement soundness", placement_soundness),
        ("Determinism", determinism),
        ("Metric oracles", metric_oracles),
        ("Threshold sensitivity", threshold_sensitivity),
        ("Annotation consistency", reprojection),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
