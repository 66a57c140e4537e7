//! Monocular 3D bounding-box recovery from nine projected keypoints.
//!
//! The [`solver`] fits rotation, translation and dimensions of a box to its
//! projected vertexes and center by minimizing a confidence-weighted
//! reprojection error plus dimension and orientation priors over se(3). The
//! remaining modules supply what is needed to drive and verify it without a
//! trained network: the dense keypoint-map codec ([`heatmap`]), KITTI file
//! formats ([`kitti`]), synthetic scenes ([`synth`]) and KITTI-style metrics
//! ([`eval`]).

pub mod config;
pub mod eval;
pub mod geometry;
pub mod heatmap;
pub mod kitti;
pub mod par;
pub mod pipeline;
pub mod solver;
pub mod svg;
pub mod synth;
