//! Search and exact certification for ray-intersection Tverberg-type
//! partitions of convex families and hyperplane arrangements.

pub mod arrangements;
pub mod certificates;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod invariant_body;
pub mod linalg;
pub mod lp;
pub mod partition;
pub mod rational;
pub mod search;

pub use arrangements::{Cell, Hyperplane, HyperplanePartition, Sign, SignVector};
pub use certificates::{Report, SubfamilyEscapeCertificate, TverbergRayCertificate};
pub use coverage::{Family, MinMissed, MissMode, Multiplicity};
pub use error::{Error, Result};
pub use geometry::{Ball, ConvexBody, Direction, Mode, Point, Projection, VPolytope};
pub use invariant_body::InvariantBodyResult;
pub use rational::Rational;
pub use search::{Exhausted, SearchConfig, SearchOutcome};
