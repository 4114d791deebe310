//! Deadline quantization grid t_k = (k - 1) eps, k = 1..=K, with t_K <= L_max.

use crate::error::{OffloadError, Result};

/// Slack, in grid steps, absorbed before rounding so that durations such as
/// 1.1 / 0.05 land on 22 steps instead of 23.
const SLOT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantGrid {
    pub eps: f64,
    pub k_max: usize,
    pub deadline: f64,
}

impl QuantGrid {
    pub fn new(deadline: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(OffloadError::InvalidArgument(format!("eps must be > 0, got {eps}")));
        }
        if !(deadline >= 0.0 && deadline.is_finite()) {
            return Err(OffloadError::InvalidArgument(format!("deadline must be >= 0, got {deadline}")));
        }
        let steps = (deadline / eps + SLOT_SLACK).floor();
        if steps > 1e7 {
            return Err(OffloadError::InvalidArgument(format!(
                "grid with {steps} steps is too fine"
            )));
        }
        Ok(QuantGrid { eps, k_max: steps as usize + 1, deadline })
    }

    /// t_k
    pub fn t(&self, k: usize) -> f64 {
        (k as f64 - 1.0) * self.eps
    }

    /// q(t) = t_k for t in (t_{k-1}, t_k], q(0) = 0.
    pub fn grid_value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(OffloadError::InvalidArgument(format!("negative time {t}")));
        }
        Ok(self.t(self.slots(t) + 1))
    }

    /// Q(t) = k for t in [t_{k-1}, t_k), Q(0) = 1, and K + 1 once t >= t_K.
    pub fn quantize_up(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(OffloadError::InvalidArgument(format!("negative time {t}")));
        }
        if t == 0.0 {
            return Ok(1);
        }
        let k = (t / self.eps + SLOT_SLACK).floor() + 2.0;
        Ok(if k > (self.k_max + 1) as f64 { self.k_max + 1 } else { k as usize })
    }

    /// Number of grid steps a duration consumes when rounded up; 0 for 0.
    pub fn slots(&self, duration: f64) -> usize {
        let s = (duration / self.eps - SLOT_SLACK).ceil();
        if s <= 0.0 {
            0
        } else if s >= usize::MAX as f64 / 4.0 {
            usize::MAX / 4
        } else {
            s as usize
        }
    }
}
