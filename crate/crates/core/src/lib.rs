//! Skeleton extraction, skin binding and skeleton-driven moving-least-squares
//! deformation for closed triangle meshes, with a curviness-based distortion
//! metric that detects large joint rotations and splits them into steps.

pub mod deform;
pub mod distortion;
pub mod fixtures;
pub mod formats;
pub mod frame;
pub mod linalg;
pub mod mesh;
pub mod mls;
pub mod procrustes;
pub mod rig;
pub mod skeleton;
pub mod skinning;
pub mod slicer;

pub use linalg::Vec3;
