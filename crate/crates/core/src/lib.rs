//! Runtime input validation for feed-forward neural networks.
//!
//! An input is scored by its approximate robustness radius: the largest L∞
//! radius (found by bisection) at which an abstract interpreter can still
//! certify that the predicted label does not change. Inputs whose radius is
//! unusually small are flagged, either against a fixed threshold or against
//! the distribution of recently accepted radii.
//!
//! ```
//! use radguard::{Activation, Architecture, SearchParams, approximate_radius};
//!
//! let net = "4,3".parse::<Architecture>().unwrap().build(&[2], Activation::Relu, 7).unwrap();
//! let r = approximate_radius(&net, &[0.3, 0.6], &SearchParams::default()).unwrap();
//! assert!(r.radius >= 0.0 && r.iterations == 8);
//! ```

pub mod arch;
pub mod attacks;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod radius;
pub mod tensor;
pub mod train;
pub mod validators;
pub mod weights;

pub use arch::{ArchLayer, Architecture};
pub use dataset::{load_dataset, Dataset, DatasetFormat, Sample};
pub use domain::{is_robust, Domain, Interval, Outcome, Zonotope};
pub use error::{Error, Result};
pub use network::{Activation, Layer, Network, Prediction};
pub use radius::{approximate_radius, search_radius, RadiusResult, RobustnessOracle, SearchParams, Verifier};
pub use tensor::Tensor;
pub use validators::{threshold_validate, Decision, ThresholdPolicy, WindowConfig, WindowState};
pub use weights::{load_network, save_network};
