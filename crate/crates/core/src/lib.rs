pub mod cdf;
pub mod ensemble;
pub mod disc;
pub mod error;
pub mod euclidean;
pub mod hyperbolic;
pub mod pde;
pub mod quad;
pub mod reflection;
pub mod rng;
pub mod specfun;
pub mod validate;

pub use ensemble::{ModelTag, PathEnsemble, Recording, Scheme, TimeGrid};
pub use error::{Error, Result};
pub use reflection::{LocalTimeEstimate, ModelParams, SimOptions};
pub use validate::{ReportDocument, ValidationReport};
