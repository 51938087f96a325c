//! Test functions, their Fourier transforms and model expectations.

pub mod fourier;
pub mod moments;
pub mod testfn;

pub use fourier::{fourier_transform, FourierTable};
pub use moments::{model_expectation, model_expectation_grad, psi_n, ExpectationGrad, Rescale, SpectralComponent};
pub use testfn::TestFunction;
