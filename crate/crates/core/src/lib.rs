//! Dense stereo matching on rectified image pairs.
//!
//! Two matching costs are provided: the census transform compared by Hamming
//! distance, and a siamese convolutional network whose normalized features
//! are compared by dot product. Either cost volume can be aggregated with
//! semi-global matching, turned into a disparity map, checked for left-right
//! consistency and scored against ground truth.
//!
//! ```
//! use stereocost::pipeline::{match_pair, MatchCost, MatchParams};
//! use stereocost::synth::{generate, SceneSpec, Terrain};
//!
//! let spec = SceneSpec::new(64, 48, 8, Terrain::Constant { disparity: 3.0 });
//! let scene = generate(&spec).unwrap();
//! let params = MatchParams::new(8, MatchCost::default());
//! let d = match_pair(&scene.left, &scene.right, &params).unwrap();
//! assert_eq!(d.get(32, 24), Some(3.0));
//! ```

pub mod census;
pub mod cnn;
pub mod disparity;
pub mod error;
pub mod evaluation;
pub mod image_io;
pub mod pipeline;
pub mod sgm;
pub mod synth;

pub use error::{Error, FormatError, Result};
pub use image_io::{CostVolume, DisparityMap, GrayImage};
