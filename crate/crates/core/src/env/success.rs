use serde::{Deserialize, Serialize};

pub const SUCCESS_POS_THRESHOLD: f64 = 0.02;
pub const SUCCESS_ORI_THRESHOLD_DEG: f64 = 2.0;
pub const SUCCESS_DWELL: u32 = 5;

/// Counts consecutive steps with both errors under threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessTracker {
    pub consecutive_count: u32,
    pub pos_threshold: f64,
    /// Radians.
    pub ori_threshold: f64,
    pub dwell: u32,
}

impl Default for SuccessTracker {
    fn default() -> Self {
        Self {
            consecutive_count: 0,
            pos_threshold: SUCCESS_POS_THRESHOLD,
            ori_threshold: SUCCESS_ORI_THRESHOLD_DEG.to_radians(),
            dwell: SUCCESS_DWELL,
        }
    }
}

impl SuccessTracker {
    pub fn within(&self, pos_err: f64, ori_err: f64) -> bool {
        pos_err < self.pos_threshold && ori_err < self.ori_threshold
    }

    pub fn is_success(&self) -> bool {
        self.consecutive_count >= self.dwell
    }

    pub fn reset(&mut self) {
        self.consecutive_count = 0;
    }
}

pub fn update_success(tracker: SuccessTracker, pos_err: f64, ori_err: f64) -> SuccessTracker {
    SuccessTracker {
        consecutive_count: if tracker.within(pos_err, ori_err) {
            tracker.consecutive_count.saturating_add(1)
        } else {
            0
        },
        ..tracker
    }
}
