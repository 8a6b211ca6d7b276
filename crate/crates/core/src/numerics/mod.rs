//! Special functions, Gaussian expectations, partitioned information
//! algebra and the random-stream contract shared by the other modules.

pub mod chisq;
pub mod partitioned;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use chisq::{chisq_cdf, chisq_quantile, noncentral_chisq_cdf, noncentral_chisq_sf};
pub use partitioned::{partitioned_inverse, InverseBlocks, PartitionedInfo};
pub use quadrature::{expect_under_shifted_normal, GaussianExpectation, HermiteRule, Smoothness};
pub use special::{
    digamma, gamma_log_derivatives, log_std_normal_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf,
    trigamma, EULER_GAMMA,
};
