//! Quick oracle and invariant checks runnable from the command line.

use crate::fixtures::{random_cloud, random_frame, random_motions};
use crate::gauge::{camera_loss, metric_gauge};
use crate::io;
use crate::metrics::{psnr, ssim};
use crate::model::{
    Camera, Direction, FlowField, Gaussian, GaussianCloud, Image, Intrinsics, SourceTag,
};
use crate::motion::{cyclic_weight, warp_frames_to_time, FlowConsistencyParams};
use crate::render::{render, render_reference, RenderConfig};
use crate::synth::{generate_scene, MotionKind, SceneConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
        Ok(Ok((passed, detail))) => Check {
            name,
            passed,
            detail,
        },
        Ok(Err(e)) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
        Err(_) => Check {
            name,
            passed: false,
            detail: "panicked".into(),
        },
    }
}

fn camera(size: usize, f: f64) -> Camera {
    let c = (size as f64 - 1.0) / 2.0;
    Camera::reference(Intrinsics {
        fx: f,
        fy: f,
        cx: c,
        cy: c,
    })
    .expect("valid intrinsics")
}

fn max_abs(a: &Image, b: &Image) -> f32 {
    a.data()
        .iter()
        .flatten()
        .zip(b.data().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

/// Runs every check; a failed check never stops the others.
pub fn run() -> Vec<Check> {
    vec![
        check("tiled-vs-reference", || {
            let cfg = RenderConfig::new(48, 48);
            let mut worst = 0.0f32;
            for seed in 0..4 {
                let cloud = random_cloud(seed, 200);
                let cam = camera(48, 48.0);
                worst = worst.max(max_abs(
                    &render(&cloud, &cam, &cfg)?,
                    &render_reference(&cloud, &cam, &cfg)?,
                ));
            }
            Ok((worst <= 1e-5, format!("max |diff| = {worst:e}")))
        }),
        check("single-splat", || {
            let g = Gaussian {
                position: [0.0, 0.0, 2.0],
                opacity: 0.5,
                color: [1.0, 0.0, 0.0],
                rotation: [1.0, 0.0, 0.0, 0.0],
                scale: [0.05; 3],
            };
            let cloud = GaussianCloud::from_gaussians([(
                g,
                SourceTag {
                    timestamp: 0,
                    view: 0,
                    pixel: 0,
                },
            )])?;
            let cfg = RenderConfig::new(33, 33).with_background([0.0, 0.0, 1.0]);
            let img = render(&cloud, &camera(33, 40.0), &cfg)?;
            let c = img.pixel(16, 16);
            let err = (c[0] - 0.5).abs().max((c[2] - 0.5).abs());
            Ok((err <= 1e-6, format!("center = {c:?}")))
        }),
        check("gauge-exactness", || {
            let k = Intrinsics {
                fx: 50.0,
                fy: 50.0,
                cx: 16.0,
                cy: 16.0,
            };
            let gt: Vec<Camera> = (0..4)
                .map(|i| {
                    Camera::new(
                        [1.0, 0.0, 0.0, 0.0],
                        [i as f64 * 0.3, 0.1, -0.2 * i as f64],
                        k,
                    )
                })
                .collect::<crate::Result<_>>()?;
            let mut worst = 0.0f64;
            for s in [0.5, 2.0, 10.0] {
                let pred: Vec<Camera> = gt
                    .iter()
                    .map(|c| c.with_translation_scaled(1.0 / s))
                    .collect();
                let g = metric_gauge(&pred, &gt)?.gauge;
                worst = worst.max((g - 1.0 / s).abs() * s);
                let loss = camera_loss(&pred, &pred, 1.0)?
                    .loss
                    .map_or(f64::NAN, |l| l.total);
                worst = worst.max(loss);
            }
            Ok((worst <= 1e-12, format!("worst deviation = {worst:e}")))
        }),
        check("warp-endpoints", || {
            let ft = random_frame(1, 8, 6, 2, 5);
            let fp = random_frame(2, 8, 6, 2, 4);
            let mt = random_motions(3, 8, 6, 2, 5, 0.1);
            let mp = random_motions(4, 8, 6, 2, 4, 0.1);
            let (wt, _) = warp_frames_to_time(&ft, &fp, &mt, &mp, 5.0)?;
            let same = wt.views().iter().zip(ft.views()).all(|(a, b)| {
                a.positions
                    .iter()
                    .flatten()
                    .zip(b.positions.iter().flatten())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            });
            Ok((same, "t' = t copies positions".into()))
        }),
        check("cyclic-weight", || {
            let mut worst = 0.0f64;
            for l in [0.5f32, 2.0, 7.5] {
                for d in [0.0f32, 0.25, 1.0] {
                    let fwd = FlowField::uniform(9, 9, [l, 0.0])?;
                    let bwd = FlowField::uniform(9, 9, [-l + d, 0.0])?;
                    let w = cyclic_weight(&fwd, &bwd, &FlowConsistencyParams::default())?;
                    let expected = (-(0.1 * l as f64 + 0.5) * d as f64).exp();
                    worst = worst.max((w.weights()[0] as f64 - expected).abs());
                }
            }
            Ok((worst <= 1e-7, format!("max error = {worst:e}")))
        }),
        check("image-metrics", || {
            let a = Image::filled(16, 16, [0.3, 0.4, 0.5]);
            let b = Image::filled(16, 16, [0.4, 0.5, 0.6]);
            let p = psnr(&a, &b)?;
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let r = Image::new(
                16,
                16,
                (0..256)
                    .map(|_| [rng.gen(), rng.gen(), rng.gen()])
                    .collect(),
            )?;
            let s = ssim(&r, &r)?;
            Ok((
                (p - 20.0).abs() <= 0.01 && (s - 1.0).abs() <= 1e-9,
                format!("psnr = {p:.4}, ssim = {s}"),
            ))
        }),
        check("synth-annotations", || {
            let cfg = SceneConfig {
                motion: MotionKind::Rigid,
                segments: 8,
                ..Default::default()
            };
            let scene = generate_scene(&cfg, 3)?;
            let mut exact = true;
            for t in 0..scene.timestamps() - 1 {
                let (a, b) = (scene.mesh(t).vertices(), scene.mesh(t + 1).vertices());
                for ((x, y), m) in a.iter().zip(b).zip(scene.motion(t, Direction::Forward)) {
                    exact &= (0..3).all(|k| x[k] + m[k] == y[k]);
                }
            }
            Ok((exact, "x^t + m2 = x^(t+1)".into()))
        }),
        check("io-round-trip", || {
            let f = random_frame(5, 5, 4, 2, 1);
            let back = io::frame_from_bytes(&io::frame_to_bytes(&f))?;
            Ok((back == f, "frame bytes".into()))
        }),
        check("header-fuzz", || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let good = io::frame_to_bytes(&random_frame(6, 3, 3, 1, 0));
            let mut accepted = 0;
            for _ in 0..200 {
                let mut b = good.clone();
                for _ in 0..rng.gen_range(1..4) {
                    let i = rng.gen_range(0..40.min(b.len()));
                    b[i] = rng.gen();
                }
                b.truncate(rng.gen_range(0..=b.len()));
                accepted += io::frame_from_bytes(&b).is_ok() as usize;
            }
            Ok((true, format!("{accepted} of 200 mutated headers parsed")))
        }),
    ]
}
