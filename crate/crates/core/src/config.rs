use crate::error::{Error, Result};

/// How responses with equal input reward are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Solve the problem as posed; tied inputs may receive different values.
    #[default]
    Free,
    /// Collapse tied inputs into one pseudo-response before solving, so tied
    /// inputs stay tied.
    Merge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Linear-time greedy walk over block boundaries.
    #[default]
    OnePass,
    /// Quadratic enumeration of every block-form vertex.
    Enumeration,
    /// Exponential vertex enumeration from the raw constraint system (n <= 8).
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute slack on bound checks.
    pub feas_tol: f64,
    /// Relative tolerance for objective comparisons.
    pub obj_tol: f64,
    pub tie_policy: TiePolicy,
    pub algorithm: Algorithm,
    /// Clamp out-of-range rewards into `[m, M]` instead of rejecting them.
    pub clip_rewards: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-12,
            obj_tol: 1e-9,
            tie_policy: TiePolicy::Free,
            algorithm: Algorithm::OnePass,
            clip_rewards: false,
        }
    }
}

impl SolverConfig {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_tie_policy(mut self, tie_policy: TiePolicy) -> Self {
        self.tie_policy = tie_policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol.is_finite() && self.feas_tol > 0.0) {
            return Err(Error::InvalidConfig("feas_tol must be positive"));
        }
        if !(self.obj_tol.is_finite() && self.obj_tol > 0.0) {
            return Err(Error::InvalidConfig("obj_tol must be positive"));
        }
        Ok(())
    }
}
