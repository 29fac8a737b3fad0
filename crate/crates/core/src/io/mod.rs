//! File formats. Binary formats are little-endian with a 16-byte header
//! (magic, version, kind, endianness marker); readers validate the declared
//! shape against the payload length before allocating.

mod binary;
mod cameras;
mod frame;
mod image;
mod manifest;
mod mesh;
mod ply;
mod raster;
mod weights;

pub use binary::{ENDIAN_MARKER, FORMAT_VERSION, HEADER_LEN};
pub use cameras::{cameras_from_str, cameras_to_string, read_cameras, write_cameras};
pub use frame::{frame_from_bytes, frame_to_bytes, read_frame, write_frame, FRAME_MAGIC};
pub use image::{
    image_from_bytes, image_to_bytes, png_from_bytes, png_to_bytes, read_image, read_png,
    write_image, write_png, IMAGE_MAGIC,
};
pub use manifest::{read_manifest, write_manifest, SceneManifest, TimestampEntry, MANIFEST_FORMAT};
pub use mesh::{mesh_from_bytes, mesh_to_bytes, read_mesh, write_mesh, MESH_MAGIC};
pub use ply::{export_ply, ply_to_bytes, PLY_PROPERTIES};
pub use raster::{
    raster_from_bytes, raster_to_bytes, read_raster, write_raster, Raster, RASTER_MAGIC,
};
pub use weights::{
    read_weights, weights_from_bytes, weights_to_bytes, write_weights, WEIGHTS_MAGIC,
};

use crate::error::{Error, Result};

fn expect_kind(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::CorruptHeader(format!(
            "payload kind {found}, expected {expected}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{Activation, FusionMlp, MLP_INPUTS, MLP_OUTPUTS};
    use crate::metrics::TriangleMesh;
    use crate::model::{
        Camera, FlowField, GaussianFrame, Image, Intrinsics, MotionField, ViewMaps, WeightMap,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize, views: usize) -> GaussianFrame {
        let n = w * h;
        let maps = (0..views)
            .map(|_| {
                let mut m = ViewMaps::empty(n);
                for p in 0..n {
                    if rng.gen_bool(0.7) {
                        let q: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                        m.set_gaussian(
                            p,
                            &crate::model::Gaussian {
                                position: std::array::from_fn(|_| rng.gen_range(-5.0..5.0)),
                                opacity: rng.gen(),
                                color: std::array::from_fn(|_| rng.gen()),
                                rotation: q,
                                scale: std::array::from_fn(|_| rng.gen_range(0.001..0.1)),
                            },
                        );
                    }
                }
                m
            })
            .collect();
        GaussianFrame::new(w, h, rng.gen_range(-3..100), maps).unwrap()
    }

    fn bits_equal(a: &[f32], b: &[f32]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    }

    #[test]
    fn frame_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_frame(&mut rng, 7, 5, 3);
        let bytes = frame_to_bytes(&f);
        let g = frame_from_bytes(&bytes).unwrap();
        assert_eq!(f, g);
        for (a, b) in f.views().iter().zip(g.views()) {
            assert!(bits_equal(&a.opacities, &b.opacities));
            assert!(bits_equal(
                a.positions.as_flattened(),
                b.positions.as_flattened()
            ));
        }
        assert!(matches!(
            frame_from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            frame_from_bytes(&bad),
            Err(Error::CorruptHeader(_))
        ));
        let mut bad = bytes;
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            frame_from_bytes(&bad),
            Err(Error::VersionUnsupported {
                found: 2,
                supported: 1
            })
        ));
    }

    #[test]
    fn empty_frame_round_trip() {
        let f = GaussianFrame::new(0, 0, 0, vec![]).unwrap();
        assert_eq!(frame_from_bytes(&frame_to_bytes(&f)).unwrap(), f);
    }

    #[test]
    fn raster_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (w, h) = (6, 4);
        let v3 = |rng: &mut ChaCha8Rng| {
            (0..w * h)
                .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
                .collect::<Vec<[f32; 3]>>()
        };
        let m = MotionField::new(w, h, 2, 5, v3(&mut rng), v3(&mut rng)).unwrap();
        let flow = FlowField::new(
            w,
            h,
            (0..w * h).map(|_| [rng.gen(), rng.gen()]).collect(),
            (0..w * h).map(|_| rng.gen()).collect(),
        )
        .unwrap();
        let zero = FlowField::uniform(w, h, [0.0; 2]).unwrap();
        let weights = WeightMap::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap();
        for r in [Raster::from(m), flow.into(), zero.into(), weights.into()] {
            let bytes = raster_to_bytes(&r);
            assert_eq!(raster_from_bytes(&bytes).unwrap(), r);
            assert!(matches!(
                raster_from_bytes(&bytes[..bytes.len() - 3]),
                Err(Error::TruncatedPayload { .. })
            ));
        }
    }

    #[test]
    fn raster_shape_mismatch() {
        let r = Raster::Weights(WeightMap::new(4, 4, vec![0.5; 16]).unwrap());
        let mut bytes = raster_to_bytes(&r);
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&5u32.to_le_bytes());
        assert!(matches!(
            raster_from_bytes(&bytes),
            Err(Error::TruncatedPayload { .. })
        ));
        bytes[8..12].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(
            raster_from_bytes(&bytes),
            Err(Error::CorruptHeader(_))
        ));
    }

    #[test]
    fn image_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::new(
            9,
            4,
            (0..36).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect(),
        )
        .unwrap();
        let back = image_from_bytes(&image_to_bytes(&img)).unwrap();
        assert!(bits_equal(
            img.data().as_flattened(),
            back.data().as_flattened()
        ));
        let png = png_from_bytes(&png_to_bytes(&img).unwrap()).unwrap();
        for (a, b) in img.data().iter().flatten().zip(png.data().iter().flatten()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn sixteen_bit_png_rejected() {
        let buf = ::image::ImageBuffer::<::image::Rgb<u16>, Vec<u16>>::from_pixel(
            3,
            3,
            ::image::Rgb([1000, 2, 3]),
        );
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ::image::ImageFormat::Png).unwrap();
        assert!(matches!(
            png_from_bytes(out.get_ref()),
            Err(Error::UnsupportedBitDepth(_))
        ));
    }

    #[test]
    fn canonical_resolution_preserved() {
        let img = Image::filled(518, 518, [0.25, 0.5, 0.75]);
        let back = image_from_bytes(&image_to_bytes(&img)).unwrap();
        assert_eq!((back.width(), back.height()), (518, 518));
        let png = png_from_bytes(&png_to_bytes(&img).unwrap()).unwrap();
        assert_eq!((png.width(), png.height()), (518, 518));
    }

    fn intrinsics() -> Intrinsics {
        Intrinsics {
            fx: 100.0,
            fy: 101.5,
            cx: 31.5,
            cy: 30.25,
        }
    }

    #[test]
    fn identity_camera_round_trip() {
        let sets = vec![vec![Camera::reference(intrinsics()).unwrap()]];
        assert_eq!(cameras_from_str(&cameras_to_string(&sets)).unwrap(), sets);
    }

    #[test]
    fn many_cameras_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sets: Vec<Vec<Camera>> = (0..8)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                        let t = std::array::from_fn(|_| {
                            rng.gen_range(-1e3..1e3) * 10f64.powi(rng.gen_range(-9..3))
                        });
                        Camera::new(q.map(|c| c / n), t, intrinsics()).unwrap()
                    })
                    .collect()
            })
            .collect();
        let back = cameras_from_str(&cameras_to_string(&sets)).unwrap();
        assert_eq!(back, sets);
    }

    #[test]
    fn malformed_quaternion_points_at_field() {
        let text = "format = \"g4d-cameras\"\nversion = 1\n\n[[timestamps]]\n\n[[timestamps.views]]\nrotation = [1.0, 0.0, 0.0]\ntranslation = [0.0, 0.0, 0.0]\nfx = 1.0\nfy = 1.0\ncx = 0.0\ncy = 0.0\n";
        match cameras_from_str(text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (7, 12)),
            other => panic!("{other:?}"),
        }
        let bad_type = text.replace("[1.0, 0.0, 0.0]", "\"one\"");
        assert!(matches!(
            cameras_from_str(&bad_type),
            Err(Error::Parse { line: 7, .. })
        ));
        let not_unit = text.replace("[1.0, 0.0, 0.0]", "[2.0, 0.0, 0.0, 0.0]");
        assert!(matches!(
            cameras_from_str(&not_unit),
            Err(Error::Parse { line: 7, .. })
        ));
        let broken = text.replace("fx = 1.0", "fx = = 1.0");
        assert!(matches!(
            cameras_from_str(&broken),
            Err(Error::Parse { line: 9, .. })
        ));
    }

    #[test]
    fn mesh_round_trip() {
        let m = TriangleMesh::new(
            vec![[0.0, 0.1, 0.2], [1.0, 1e-300, -3.5], [0.0, 1.0, 7.0]],
            vec![[0, 1, 2]],
            vec![10, 11, 12],
        )
        .unwrap();
        let bytes = mesh_to_bytes(&m);
        assert_eq!(mesh_from_bytes(&bytes).unwrap(), m);
        assert!(matches!(
            mesh_from_bytes(&bytes[..30]),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn weights_round_trip_and_layout_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 8;
        let mut v = |n: usize| {
            (0..n)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<f32>>()
        };
        let mlp = FusionMlp::new(
            Activation::Tanh,
            h,
            v(h * MLP_INPUTS),
            v(h),
            v(MLP_OUTPUTS * h),
            v(MLP_OUTPUTS),
        )
        .unwrap();
        let bytes = weights_to_bytes(&mlp);
        assert_eq!(weights_from_bytes(&bytes).unwrap(), mlp);
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 20] ^= 1;
        assert!(matches!(
            weights_from_bytes(&bad),
            Err(Error::WeightFileMismatch(_))
        ));
        let mut bad = bytes;
        bad[HEADER_LEN + 8..HEADER_LEN + 12].copy_from_slice(&30u32.to_le_bytes());
        assert!(matches!(
            weights_from_bytes(&bad),
            Err(Error::WeightFileMismatch(_))
        ));
    }

    #[test]
    fn ply_header_and_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cloud = random_frame(&mut rng, 3, 2, 1).flatten();
        let bytes = ply_to_bytes(&cloud);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains(&format!("element vertex {}\n", cloud.len())));
        let header_end = text.find("end_header\n").unwrap() + "end_header\n".len();
        assert_eq!(bytes.len() - header_end, cloud.len() * 14 * 4);
        let empty = ply_to_bytes(&crate::model::GaussianCloud::new());
        assert!(String::from_utf8_lossy(&empty).contains("element vertex 0\n"));
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = SceneManifest::new(u64::MAX, Default::default(), Default::default());
        m.timestamps.push(TimestampEntry {
            index: 0,
            frame: "frame_000.g4da".into(),
            motions: vec!["m0".into(), "m1".into()],
            ..Default::default()
        });
        assert_eq!(SceneManifest::from_toml(&m.to_toml()).unwrap(), m);
        assert!(matches!(
            SceneManifest::from_toml("format = 3"),
            Err(Error::Parse { .. })
        ));
    }
}
