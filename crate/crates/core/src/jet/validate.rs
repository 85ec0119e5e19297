use serde::{Deserialize, Serialize};

use super::{JetDataset, SlackMatrix};

/// Rounding guard applied on top of `eps_c` when testing convexity slacks.
pub const SLACK_ROUNDING_GUARD: f64 = 1e-12;

/// Quantitative thresholds for the extendability conditions, all relative to
/// [`JetDataset::data_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed negative slack.
    pub eps_c: f64,
    /// Slacks at or below this count as equalities.
    pub eps_p: f64,
    /// Gradient gaps at or above this count as distinct gradients.
    pub eps_g: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_c: 0.0,
            eps_p: 1e-9,
            eps_g: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn check(&self) -> Result<(), String> {
        if !(self.eps_c >= 0.0 && self.eps_c.is_finite()) {
            return Err(format!("eps_c must be finite and >= 0, got {}", self.eps_c));
        }
        if !(self.eps_p > 0.0 && self.eps_p.is_finite()) {
            return Err(format!("eps_p must be finite and > 0, got {}", self.eps_p));
        }
        if !(self.eps_g > 0.0 && self.eps_g.is_finite()) {
            return Err(format!("eps_g must be finite and > 0, got {}", self.eps_g));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationStatus {
    Valid,
    #[serde(rename = "violates-C")]
    ViolatesC,
    #[serde(rename = "violates-CW1")]
    ViolatesCw1,
}

impl ValidationStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValidationStatus::Valid => "valid",
            ValidationStatus::ViolatesC => "violates-C",
            ValidationStatus::ViolatesCw1 => "violates-CW1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Negative slack: the value at `i` lies below the tangent plane at `j`.
    C,
    /// Zero slack with distinct gradients.
    CW1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub pair: (usize, usize),
    /// The slack for `C` violations, the gradient gap for `CW1` ones.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: ValidationStatus,
    pub violations: Vec<Violation>,
    /// Minimum off-diagonal slack; 0 for a single point.
    pub worst_c_slack: f64,
    /// `min P/max(b, eps_g)` over pairs flagged as equalities; `None` when no
    /// pair is flagged.
    pub cw1_margin: Option<f64>,
    /// The CW1 rule is a finite-data surrogate with tolerance gaps.
    pub cw1_rule: &'static str,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.status == ValidationStatus::Valid
    }
}

/// Check conditions (C) and (CW1) on every ordered pair.
///
/// A pair `(i, j)` violates (C) when `P(i,j) < -(eps_c + guard) * scale` and
/// (CW1) when `P(i,j) <= eps_p * scale` while `b(i,j) >= eps_g * scale`.
/// Both orderings are checked since `P` is not symmetric. Violations are
/// listed with all `C` entries ahead of `CW1` ones.
pub fn validate(slack: &SlackMatrix, tol: &Tolerances, dataset: &JetDataset) -> ValidationReport {
    let scale = dataset.data_scale();
    let c_floor = -(tol.eps_c + SLACK_ROUNDING_GUARD) * scale;
    let p_eq = tol.eps_p * scale;
    let g_distinct = tol.eps_g * scale;

    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    let mut margin: Option<f64> = None;
    for (i, j, p, b) in slack.pairs() {
        worst = worst.min(p);
        if p < c_floor {
            violations.push(Violation {
                kind: ViolationKind::C,
                pair: (i, j),
                magnitude: p,
            });
        }
        if p <= p_eq {
            let m = p / b.max(g_distinct);
            margin = Some(margin.map_or(m, |old: f64| old.min(m)));
            if b >= g_distinct {
                violations.push(Violation {
                    kind: ViolationKind::CW1,
                    pair: (i, j),
                    magnitude: b,
                });
            }
        }
    }
    // C violations first, pair order within a kind
    violations.sort_by_key(|v| v.kind != ViolationKind::C);
    let status = if violations.iter().any(|v| v.kind == ViolationKind::C) {
        ValidationStatus::ViolatesC
    } else if violations.is_empty() {
        ValidationStatus::Valid
    } else {
        ValidationStatus::ViolatesCw1
    };
    ValidationReport {
        status,
        violations,
        worst_c_slack: if worst.is_finite() { worst } else { 0.0 },
        cw1_margin: margin,
        cw1_rule: "P <= eps_p*scale and b >= eps_g*scale",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::fixtures::*;
    use crate::jet::{compute_slack, JetPoint};

    fn run(ds: &JetDataset) -> ValidationReport {
        validate(&compute_slack(ds), &Tolerances::default(), ds)
    }

    #[test]
    fn parabola_is_valid() {
        let r = run(&parabola());
        assert_eq!(r.status, ValidationStatus::Valid);
        assert!(r.violations.is_empty());
        assert_eq!(r.worst_c_slack, 1.0);
        assert_eq!(r.cw1_margin, None);
    }

    #[test]
    fn equality_with_distinct_gradients_is_cw1() {
        let ds = JetDataset::new(
            vec![JetPoint::new(vec![0.0], 0.0, vec![1.0]), JetPoint::new(vec![1.0], 1.0, vec![2.0])],
            1,
        )
        .unwrap();
        let r = run(&ds);
        assert_eq!(r.status, ValidationStatus::ViolatesCw1);
        assert_eq!(
            r.violations,
            vec![Violation {
                kind: ViolationKind::CW1,
                pair: (1, 0),
                magnitude: 1.0
            }]
        );
        assert_eq!(r.cw1_margin, Some(0.0));
    }

    #[test]
    fn negative_slack_is_c() {
        let ds = JetDataset::new(
            vec![JetPoint::new(vec![0.0], 0.0, vec![1.0]), JetPoint::new(vec![1.0], 0.0, vec![0.0])],
            1,
        )
        .unwrap();
        let r = run(&ds);
        assert_eq!(r.status, ValidationStatus::ViolatesC);
        let c: Vec<_> = r.violations.iter().filter(|v| v.kind == ViolationKind::C).collect();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].pair, (1, 0));
        assert_eq!(c[0].magnitude, -1.0);
        assert_eq!(r.worst_c_slack, -1.0);
    }

    #[test]
    fn affine_jet_is_valid() {
        assert!(run(&constant_gradient()).is_valid());
    }

    #[test]
    fn eps_c_loosens_condition_c() {
        let ds = JetDataset::new(
            vec![JetPoint::new(vec![0.0], 0.0, vec![1.0]), JetPoint::new(vec![1.0], 0.99, vec![1.0])],
            1,
        )
        .unwrap();
        assert_eq!(run(&ds).status, ValidationStatus::ViolatesC);
        let loose = Tolerances {
            eps_c: 0.02,
            ..Tolerances::default()
        };
        assert!(validate(&compute_slack(&ds), &loose, &ds).is_valid());
    }

    #[test]
    fn tolerance_check() {
        assert!(Tolerances::default().check().is_ok());
        assert!(Tolerances { eps_p: 0.0, ..Default::default() }.check().is_err());
        assert!(Tolerances { eps_c: -1.0, ..Default::default() }.check().is_err());
    }

    #[test]
    fn scaling_preserves_status() {
        for ds in [parabola(), constant_gradient(), single()] {
            let base = run(&ds).status;
            for lambda in [1e-3, 0.5, 7.0, 1e4] {
                assert_eq!(run(&ds.scaled(lambda).unwrap()).status, base);
            }
        }
    }
}
