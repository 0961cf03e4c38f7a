//! Spectral prior learning: a small residual convolutional network that maps
//! MSI pixels to subspace coefficients of the HSI, trained with Adam on
//! spatial crops, and the cyclic procedure that turns it into a registered
//! HSI.

mod adam;
mod network;
mod train;

pub use adam::{adam_step, AdamState};
pub use network::{SplArch, SplNetwork, SplParams, TENSOR_NAMES};
pub use train::{
    backward, backward_with, extract_patches, loss_l1, loss_with, patch_origins, train_epochs,
    train_sdr, LossKind, LossRecord, SdrOutcome, TrainingSet,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs_per_cycle: usize,
    /// Number of training cycles `K`; 1 disables cyclic growth.
    pub cycles: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub kernel_size: usize,
    pub hidden: usize,
    pub omega: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs_per_cycle: 200,
            cycles: 4,
            patch_size: 32,
            patch_stride: 16,
            kernel_size: 3,
            hidden: 64,
            omega: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::param(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::param("adam_eps must be positive"));
        }
        if self.cycles == 0 {
            return Err(Error::param("at least one training cycle is required"));
        }
        if self.patch_size == 0 || self.patch_stride == 0 || self.patch_stride > self.patch_size {
            return Err(Error::param(format!(
                "patch stride {} must lie in 1..={}",
                self.patch_stride, self.patch_size
            )));
        }
        Ok(())
    }
}
