/// Running maximum of the index values observed along one arm's play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrevailingTracker {
    current: f64,
}

impl PrevailingTracker {
    /// Tracker that has seen nothing yet; its level is negative infinity.
    pub fn new() -> Self {
        Self {
            current: f64::NEG_INFINITY,
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn is_empty(&self) -> bool {
        self.current == f64::NEG_INFINITY
    }

    /// Feeds one value and returns the updated level.
    pub fn observe(&mut self, gamma: f64) -> f64 {
        *self = prevailing_update(*self, gamma);
        self.current
    }
}

impl Default for PrevailingTracker {
    fn default() -> Self {
        Self::new()
    }
}

pub fn prevailing_update(tracker: PrevailingTracker, gamma_new: f64) -> PrevailingTracker {
    PrevailingTracker {
        current: tracker.current.max(gamma_new),
    }
}
