//! The sampler interface seen by the training loop.
//!
//! A [`BanditSampler`] exposes the distribution for the next round and
//! receives only [`BanditFeedback`], i.e. values for the clients that were
//! actually drawn. Nothing in the trait gives access to the other clients.

use crate::ensemble::{DoublingState, EnsembleState};
use crate::error::Result;
use crate::feedback::BanditFeedback;
use crate::osmd::OsmdState;
use crate::simplex::SimplexPoint;

pub trait BanditSampler {
    /// Distribution used to draw the next round's clients.
    fn distribution(&self) -> &SimplexPoint;

    /// Incorporates feedback for clients drawn from [`Self::distribution`].
    fn update(&mut self, fb: &BanditFeedback) -> Result<()>;
}

/// Always uniform; ignores feedback.
#[derive(Clone, Debug)]
pub struct UniformSampler {
    p: SimplexPoint,
}

impl UniformSampler {
    pub fn new(m: usize) -> Self {
        Self {
            p: SimplexPoint::uniform(m),
        }
    }
}

impl BanditSampler for UniformSampler {
    fn distribution(&self) -> &SimplexPoint {
        &self.p
    }

    fn update(&mut self, _fb: &BanditFeedback) -> Result<()> {
        Ok(())
    }
}

impl BanditSampler for OsmdState {
    fn distribution(&self) -> &SimplexPoint {
        self.current()
    }

    fn update(&mut self, fb: &BanditFeedback) -> Result<()> {
        self.step(fb)
    }
}

impl BanditSampler for EnsembleState {
    fn distribution(&self) -> &SimplexPoint {
        self.aggregated()
    }

    fn update(&mut self, fb: &BanditFeedback) -> Result<()> {
        self.step(fb)
    }
}

impl BanditSampler for DoublingState {
    fn distribution(&self) -> &SimplexPoint {
        self.aggregated()
    }

    fn update(&mut self, fb: &BanditFeedback) -> Result<()> {
        self.step(fb)
    }
}
