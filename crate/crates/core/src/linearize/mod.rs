//! Linearization of Lipschitz retractions: smoothing, derivative averaging
//! and extraction of finite-rank projections.

pub mod averaging;
pub mod epsnet;
pub mod extract;
pub mod pi;
pub mod smoothing;

pub use averaging::{average_derivative, build_box, coordinate_box, AveragingBox, DerivativeAverage, Estimator};
pub use epsnet::{circle_net, epsnet_polyhedral_norm, greedy_sphere_net, net_size_bound};
pub use extract::{extract_projection, operator_norm, FrameNorm, ProjectionCertificate, PROJECTION_TOL};
pub use pi::{pi_certificate, toy_compact, LadderRung, PiConfig, PiRecord, PiReport};
pub use smoothing::{begun_smooth, SmoothedMap, SmoothingBudget};
