//! Outcome types shared by the per-step theory checks.

use alloc::vec::Vec;

/// Relative tolerance for exact identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Absolute slack allowed on inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `lhs == rhs` to [`IDENTITY_TOL`] relative.
    Identity,
    /// `lhs <= rhs + INEQUALITY_SLACK`.
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// The inequality's premise (certified constants, basin membership,
    /// `M >= H`) does not hold, so nothing is claimed.
    PremiseUnmet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Relative tolerance for identities, absolute slack for inequalities.
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl Check {
    pub fn identity(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let pass = (lhs - rhs).abs() <= IDENTITY_TOL * scale;
        Self {
            name,
            kind: CheckKind::Identity,
            lhs,
            rhs,
            tolerance: IDENTITY_TOL,
            outcome: if pass { Outcome::Pass } else { Outcome::Fail },
        }
    }

    pub fn inequality(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self::inequality_with(name, lhs, rhs, INEQUALITY_SLACK)
    }

    pub fn inequality_with(name: &'static str, lhs: f64, rhs: f64, slack: f64) -> Self {
        let pass = lhs <= rhs + slack;
        Self {
            name,
            kind: CheckKind::Inequality,
            lhs,
            rhs,
            tolerance: slack,
            outcome: if pass { Outcome::Pass } else { Outcome::Fail },
        }
    }

    /// An inequality whose premise is known to fail; values are recorded
    /// for diagnostics only.
    pub fn unmet(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            kind: CheckKind::Inequality,
            lhs,
            rhs,
            tolerance: INEQUALITY_SLACK,
            outcome: Outcome::PremiseUnmet,
        }
    }

    /// `rhs - lhs` for inequalities, `|lhs - rhs|` for identities.
    pub fn slack(&self) -> f64 {
        match self.kind {
            CheckKind::Identity => (self.lhs - self.rhs).abs(),
            CheckKind::Inequality => self.rhs - self.lhs,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

/// Certified regularity constants for a fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified {
    pub mu: f64,
    pub hess_lip: f64,
}

pub(crate) fn any_failed(checks: &[Check]) -> bool {
    checks.iter().any(Check::failed)
}

pub(crate) fn find<'a>(checks: &'a [Check], name: &str) -> Option<&'a Check> {
    checks.iter().find(|c| c.name == name)
}

/// Checks emitted by one verified step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub checks: Vec<Check>,
}

impl StepReport {
    pub fn any_failed(&self) -> bool {
        any_failed(&self.checks)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        find(&self.checks, name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_identity_passes() {
        assert!(Check::identity("z", 0.0, 0.0).passed());
        assert!(Check::identity("r", 1.0, 1.0 + 1e-13).passed());
        assert!(Check::identity("r", 1.0, 1.0 + 1e-11).failed());
    }

    #[test]
    fn inequality_slack() {
        assert!(Check::inequality("i", 1.0 + 5e-10, 1.0).passed());
        assert!(Check::inequality("i", 1.0 + 2e-9, 1.0).failed());
        assert!(!Check::unmet("u", 2.0, 1.0).passed());
        assert!(!Check::unmet("u", 2.0, 1.0).failed());
    }
}
