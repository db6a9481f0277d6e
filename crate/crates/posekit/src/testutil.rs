//! Shared mesh fixtures for unit tests.

use nalgebra::Vector3;

use crate::symlabels::Mesh;

/// Axis-aligned unit cube, vertex-only.
pub fn unit_cube() -> Mesh {
    let mut vertices = Vec::new();
    for z in [0.0, 1.0] {
        for y in [0.0, 1.0] {
            for x in [0.0, 1.0] {
                vertices.push(Vector3::new(x, y, z));
            }
        }
    }
    Mesh::new(vertices, vec![]).unwrap()
}

/// Regular 36-gon prism centered on the z axis; exactly symmetric under
/// rotations by multiples of 10 degrees.
pub fn prism36(radius: f64, half_height: f64) -> Mesh {
    let mut vertices = Vec::new();
    for z in [-half_height, half_height] {
        for k in 0..36 {
            let a = std::f64::consts::TAU * (k as f64) / 36.0;
            vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    Mesh::new(vertices, vec![]).unwrap()
}

/// Small asymmetric tetrahedron.
pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(30.0, 0.0, 0.0),
            Vector3::new(0.0, 20.0, 0.0),
            Vector3::new(0.0, 0.0, 10.0),
        ],
        vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
    )
    .unwrap()
}
