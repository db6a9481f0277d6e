//! Minimal pinhole z-buffer rasterizer producing depth and visibility
//! masks.
//!
//! Depth is interpolated barycentrically in screen space, pixels are
//! sampled at integer coordinates (pixel (0,0) center at the image's
//! top-left projection origin), and triangles are filled in mesh order with
//! a strict z-test, so output is bit-reproducible. Triangles touching the
//! near plane are dropped whole; back faces are kept because CAD models are
//! not consistently wound.

use nalgebra::Vector3;

use crate::geometry::{CameraIntrinsics, Pose};
use crate::symlabels::Mesh;

/// Near-plane distance in millimeters.
pub const Z_NEAR_MM: f64 = 10.0;

/// Per-pixel surface depth in millimeters; 0 marks empty pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    fn zeros(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Binary coverage: pixels with a surface.
    pub fn mask(&self) -> MaskMap {
        MaskMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&d| d > 0.0).collect(),
        }
    }
}

/// Binary object-visibility mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl MaskMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }
}

/// A mesh vertex projected into the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedVertex {
    /// Column in pixels.
    pub u: f64,
    /// Row in pixels.
    pub v: f64,
    /// Camera-frame depth in millimeters.
    pub z: f64,
    /// True when the vertex lies at or behind the near plane.
    pub clipped: bool,
}

/// Project every mesh vertex through the pinhole model.
pub fn project_vertices(mesh: &Mesh, pose: &Pose, cam: &CameraIntrinsics) -> Vec<ProjectedVertex> {
    mesh.vertices()
        .iter()
        .map(|x| {
            let p = pose.transform_point(x);
            let clipped = p.z <= Z_NEAR_MM;
            let (u, v) = if clipped {
                (f64::NAN, f64::NAN)
            } else {
                (cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy)
            };
            ProjectedVertex {
                u,
                v,
                z: p.z,
                clipped,
            }
        })
        .collect()
}

/// Rasterize the mesh under `pose` into a depth map of `width`x`height`
/// pixels, plus its coverage mask.
pub fn rasterize(
    mesh: &Mesh,
    pose: &Pose,
    cam: &CameraIntrinsics,
    width: usize,
    height: usize,
) -> (DepthMap, MaskMap) {
    let mut depth = DepthMap::zeros(width, height);
    let camera_frame: Vec<Vector3<f64>> = mesh
        .vertices()
        .iter()
        .map(|x| pose.transform_point(x))
        .collect();

    for tri in mesh.triangles() {
        let p = [
            camera_frame[tri[0] as usize],
            camera_frame[tri[1] as usize],
            camera_frame[tri[2] as usize],
        ];
        if p.iter().any(|v| v.z <= Z_NEAR_MM) {
            continue;
        }
        let project = |v: &Vector3<f64>| (cam.fx * v.x / v.z + cam.cx, cam.fy * v.y / v.z + cam.cy);
        let (u0, v0) = project(&p[0]);
        let (u1, v1) = project(&p[1]);
        let (u2, v2) = project(&p[2]);

        let area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0);
        if area == 0.0 {
            continue;
        }

        let min_x = u0.min(u1).min(u2).ceil().max(0.0) as usize;
        let max_x = u0.max(u1).max(u2).floor().min(width as f64 - 1.0);
        let min_y = v0.min(v1).min(v2).ceil().max(0.0) as usize;
        let max_y = v0.max(v1).max(v2).floor().min(height as f64 - 1.0);
        if max_x < 0.0 || max_y < 0.0 {
            continue;
        }
        let (max_x, max_y) = (max_x as usize, max_y as usize);

        // Explicit edge functions: a shared edge evaluates to exactly
        // negated values in the two adjacent triangles, so seams are
        // watertight.
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                let (px, py) = (x as f64, y as f64);
                let e0 = (u1 - px) * (v2 - py) - (u2 - px) * (v1 - py);
                let e1 = (u2 - px) * (v0 - py) - (u0 - px) * (v2 - py);
                let e2 = (u0 - px) * (v1 - py) - (u1 - px) * (v0 - py);
                let inside =
                    (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0);
                let weight_sum = e0 + e1 + e2;
                if !inside || weight_sum == 0.0 {
                    continue;
                }
                let z = (e0 * p[0].z + e1 * p[1].z + e2 * p[2].z) / weight_sum;
                let cell = &mut depth.data[y * width + x];
                if *cell == 0.0 || z < *cell {
                    *cell = z;
                }
            }
        }
    }

    let mask = depth.mask();
    (depth, mask)
}
