//! Lipschitz retractions onto convex compacta in finite-dimensional block
//! spaces.
//!
//! The main type is [`diamond::DiamondCompact`], the convex hull of scaled
//! block balls, with its gauge and a retraction of Lipschitz constant close
//! to one for suitable radii. Around it:
//!
//! - [`metric`] estimates Lipschitz constants and moduli from sampled pairs;
//! - [`smallness`] computes inner radii and heights and certifies smallness;
//! - [`linearize`] turns a retraction into a bounded linear projection;
//! - [`proximity`] has nearest point solvers and rotundity probes;
//! - [`counterexample`] assembles the tube compacta and audits candidates;
//! - [`cli`] is the config-driven experiment runner behind the binary.
//!
//! ```
//! use lipretract::convex::ConvexBody;
//! use lipretract::diamond::{schedule_for_delta, DiamondCompact};
//! use lipretract::norm::{PExponent, Point};
//! use lipretract::space::BlockSpace;
//!
//! let s = BlockSpace::one_dimensional(5, PExponent::Two).unwrap();
//! let k = DiamondCompact::new(s, schedule_for_delta(0.5, 5, None).unwrap()).unwrap();
//! let y = k.retract(&Point::from_element(5, 1.0));
//! assert!(k.gauge(&y) <= 1.0 + 1e-12);
//! ```

pub mod cli;
pub mod convex;
pub mod counterexample;
pub mod diamond;
pub mod error;
pub mod linearize;
pub mod metric;
pub mod norm;
pub mod optim;
pub mod proximity;
pub mod rng;
pub mod smallness;
pub mod space;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/diamonds.md")]
    mod diamonds {}
    #[doc = include_str!("../../../book/src/lipschitz.md")]
    mod lipschitz {}
    #[doc = include_str!("../../../book/src/smallness.md")]
    mod smallness {}
    #[doc = include_str!("../../../book/src/projections.md")]
    mod projections {}
    #[doc = include_str!("../../../book/src/nearest.md")]
    mod nearest {}
    #[doc = include_str!("../../../book/src/counterexample.md")]
    mod counterexample {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/limitations.md")]
    mod limitations {}
}
