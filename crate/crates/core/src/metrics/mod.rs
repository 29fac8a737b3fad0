//! Image quality, alignment and geometric evaluation.

mod align;
mod eval;
mod image;
mod mesh;

pub use align::{align_to_mesh, alignment_rms, similarity_align, SimilarityTransform};
pub use eval::{
    evaluate_motion, metric_scale_error, motion_error, retargeted_point_distance, MotionEvalInput,
    MotionEvalReport, PointDistance, ALIGN_ITERATIONS,
};
pub use image::{mse, psnr, reflect, ssim, ssim_kernel, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
pub use mesh::{
    closest_point_on_triangle, nearest_on_mesh, nearest_on_mesh_brute_force, nearest_points,
    MeshIndex, SurfacePoint, TriangleMesh,
};
