//! Compiles and runs the guide's code listings as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}

#[doc = include_str!("../../../book/src/rigging.md")]
pub mod rigging {}

#[doc = include_str!("../../../book/src/skinning.md")]
pub mod skinning {}

#[doc = include_str!("../../../book/src/deformation.md")]
pub mod deformation {}

#[doc = include_str!("../../../book/src/large-angles.md")]
pub mod large_angles {}

#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
