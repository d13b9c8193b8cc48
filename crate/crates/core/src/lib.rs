#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bspline;
pub mod cli;
pub mod collocation;
pub mod eigen;
pub mod error;
pub mod galerkin;
pub mod geometry;
pub mod kernel;
pub mod kl;
pub mod reference;
pub mod linalg;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type GalerkinSetupF64 = galerkin::GalerkinSetup<f64>;
pub type GalerkinSetupF32 = galerkin::GalerkinSetup<f32>;
pub type CollocationSetupF64 = collocation::CollocationSetup<f64>;
pub type CollocationSetupF32 = collocation::CollocationSetup<f32>;
pub type GeometryMapF64 = geometry::GeometryMap<f64>;
pub type GeometryMapF32 = geometry::GeometryMap<f32>;
pub type CovarianceKernelF64 = kernel::CovarianceKernel<f64>;
pub type CovarianceKernelF32 = kernel::CovarianceKernel<f32>;
pub type BasisSpaceF64 = bspline::BasisSpace<f64>;
pub type BasisSpaceF32 = bspline::BasisSpace<f32>;
pub type EigenResultF64 = eigen::EigenResult<f64>;
pub type EigenResultF32 = eigen::EigenResult<f32>;
pub type KLExpansionF64 = kl::KLExpansion<f64>;
pub type KLExpansionF32 = kl::KLExpansion<f32>;
