//! Sequential case search: solve each case in turn and return the first
//! candidate whose membership conditions hold.

use std::fmt;

use crate::ensemble::{FadingEnsemble, Receiver};
use crate::error::{Error, Result};
use crate::rates::{Bound, ChannelConfig, PowerPolicy, RateSummary};
use crate::solvers::{BoundaryCase, CaseSolution, CaseSolver, DualVariables};

/// Margin a strict inequality must exceed, in bits.
pub const EPS_CASE: f64 = 1e-7;
/// Deviation an equality may show, in bits.
pub const EPS_EQ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3a,
    Case3b,
    Case3c,
    Boundary1With3a,
    Boundary2With3a,
    Boundary1With3b,
    Boundary2With3b,
    Boundary1With3c,
    Boundary2With3c,
}

impl CaseLabel {
    /// Search order.
    pub const ALL: [CaseLabel; 11] = [
        CaseLabel::Case1,
        CaseLabel::Case2,
        CaseLabel::Case3a,
        CaseLabel::Case3b,
        CaseLabel::Case3c,
        CaseLabel::Boundary1With3a,
        CaseLabel::Boundary2With3a,
        CaseLabel::Boundary1With3b,
        CaseLabel::Boundary2With3b,
        CaseLabel::Boundary1With3c,
        CaseLabel::Boundary2With3c,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Case1 => "C1",
            CaseLabel::Case2 => "C2",
            CaseLabel::Case3a => "C3a",
            CaseLabel::Case3b => "C3b",
            CaseLabel::Case3c => "C3c",
            CaseLabel::Boundary1With3a => "B1_3a",
            CaseLabel::Boundary2With3a => "B2_3a",
            CaseLabel::Boundary1With3b => "B1_3b",
            CaseLabel::Boundary2With3b => "B2_3b",
            CaseLabel::Boundary1With3c => "B1_3c",
            CaseLabel::Boundary2With3c => "B2_3c",
        }
    }

    pub fn parse(s: &str) -> Option<CaseLabel> {
        CaseLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn boundary(self) -> Option<BoundaryCase> {
        match self {
            CaseLabel::Boundary1With3a => Some(BoundaryCase::OneThreeA),
            CaseLabel::Boundary2With3a => Some(BoundaryCase::TwoThreeA),
            CaseLabel::Boundary1With3b => Some(BoundaryCase::OneThreeB),
            CaseLabel::Boundary2With3b => Some(BoundaryCase::TwoThreeB),
            CaseLabel::Boundary1With3c => Some(BoundaryCase::OneThreeC),
            CaseLabel::Boundary2With3c => Some(BoundaryCase::TwoThreeC),
            _ => None,
        }
    }

    /// True for the cases where the sources share the band opportunistically
    /// (everything except the two decoupled cases).
    pub fn is_opportunistic(self) -> bool {
        !matches!(self, CaseLabel::Case1 | CaseLabel::Case2)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// `rhs − lhs` of a strict inequality; must exceed [`EPS_CASE`].
    Strict,
    /// `−|lhs − rhs|` of an equality; must be at least `−EPS_EQ`.
    Equality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub kind: MarginKind,
    pub value: f64,
}

impl Margin {
    fn strict(value: f64) -> Self {
        Margin {
            kind: MarginKind::Strict,
            value,
        }
    }

    fn equality(a: f64, b: f64) -> Self {
        Margin {
            kind: MarginKind::Equality,
            value: -(a - b).abs(),
        }
    }

    /// Positive when satisfied (zero counts for equalities).
    pub fn score(&self) -> f64 {
        match self.kind {
            MarginKind::Strict => self.value - EPS_CASE,
            MarginKind::Equality => self.value + EPS_EQ,
        }
    }

    pub fn holds(&self) -> bool {
        match self.kind {
            MarginKind::Strict => self.value > EPS_CASE,
            MarginKind::Equality => self.value >= -EPS_EQ,
        }
    }
}

/// Slack of every defining condition of `label`'s membership set.
pub fn evaluate_case_conditions(label: CaseLabel, summary: &RateSummary) -> Vec<Margin> {
    use CaseLabel::*;
    let [t1, t2, t3, t4] = summary.bounds();
    let m12 = t1.min(t2);
    let s = Margin::strict;
    let eq = Margin::equality;
    match label {
        // R^max_{1,d} < R^min_{1,r} and R^max_{2,r} < R^min_{2,d}
        Case1 => vec![s(t1 - t4), s(t2 - t4)],
        Case2 => vec![s(t2 - t3), s(t1 - t3)],
        Case3a => vec![s(t2 - t1), s(t4 - m12), s(t3 - m12)],
        Case3b => vec![s(t1 - t2), s(t4 - m12), s(t3 - m12)],
        Case3c => vec![eq(t1, t2), s(t4 - m12), s(t3 - m12)],
        Boundary1With3a => vec![eq(t1, t4), s(t2 - t1), s(t2 - t4)],
        Boundary2With3a => vec![eq(t1, t3), s(t2 - t1), s(t2 - t3)],
        Boundary1With3b => vec![eq(t2, t4), s(t1 - t2), s(t1 - t4)],
        Boundary2With3b => vec![eq(t2, t3), s(t1 - t2), s(t1 - t3)],
        Boundary1With3c => vec![eq(t1, t2), eq(t2, t4), eq(t1, t4), s(t3 - t1)],
        Boundary2With3c => vec![eq(t1, t2), eq(t2, t3), eq(t1, t3), s(t4 - t1)],
    }
}

pub fn is_member(margins: &[Margin]) -> bool {
    margins.iter().all(Margin::holds)
}

/// Smallest score over the margins; nonnegative (positive for strict parts)
/// exactly when all conditions hold.
pub fn worst_score(margins: &[Margin]) -> f64 {
    margins
        .iter()
        .map(Margin::score)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Classified,
    /// No candidate passed its conditions; the least-violating one is returned.
    DegenerateClassification,
}

/// One step of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseAttempt {
    pub label: CaseLabel,
    /// `None` when the solver found no multiplier for the case.
    pub margins: Option<Vec<Margin>>,
    pub sum_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub label: CaseLabel,
    pub status: SolveStatus,
    pub policy: PowerPolicy,
    pub duals: DualVariables,
    pub summary: RateSummary,
    pub sum_rate: f64,
    /// Every attempted case in search order.
    pub diagnostics: Vec<CaseAttempt>,
}

impl SolveOutcome {
    /// Margins of the returned label.
    pub fn margins(&self) -> Vec<Margin> {
        evaluate_case_conditions(self.label, &self.summary)
    }

    pub fn solution(&self) -> CaseSolution {
        CaseSolution {
            policy: self.policy.clone(),
            duals: self.duals.clone(),
            summary: self.summary,
        }
    }
}

/// Runs the solver of one case.
pub fn solve_label(solver: &CaseSolver<'_>, label: CaseLabel) -> Result<CaseSolution> {
    let out = match label {
        CaseLabel::Case1 => solver.case1(),
        CaseLabel::Case2 => solver.case2(),
        CaseLabel::Case3a => solver.opportunistic(Receiver::Relay),
        CaseLabel::Case3b => solver.opportunistic(Receiver::Destination),
        CaseLabel::Case3c => solver.equalizer(),
        other => solver.boundary(other.boundary().expect("boundary label")),
    };
    out.map_err(|err| match err {
        Error::NotInCase(_) => Error::NotInCase(label),
        Error::NoConvergence(detail) => Error::CaseNoConvergence {
            case: label,
            detail,
        },
        other => other,
    })
}

/// Candidates in search order until one satisfies its case conditions.
pub fn classify_and_solve(e: &FadingEnsemble, cfg: &ChannelConfig) -> Result<SolveOutcome> {
    let solver = CaseSolver::new(e, cfg)?;
    let mut diagnostics = Vec::with_capacity(CaseLabel::ALL.len());
    let mut best: Option<(f64, CaseLabel, CaseSolution)> = None;
    for label in CaseLabel::ALL {
        let sol = match solve_label(&solver, label) {
            Ok(sol) => sol,
            Err(Error::NotInCase(_)) => {
                diagnostics.push(CaseAttempt {
                    label,
                    margins: None,
                    sum_rate: None,
                });
                continue;
            }
            Err(err) => return Err(err),
        };
        let margins = evaluate_case_conditions(label, &sol.summary);
        let member = is_member(&margins);
        let score = worst_score(&margins);
        diagnostics.push(CaseAttempt {
            label,
            margins: Some(margins),
            sum_rate: Some(sol.sum_rate()),
        });
        if member {
            return Ok(outcome(label, SolveStatus::Classified, sol, diagnostics));
        }
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, label, sol));
        }
    }
    let (_, label, sol) = best.expect("case 1 always yields a candidate");
    Ok(outcome(
        label,
        SolveStatus::DegenerateClassification,
        sol,
        diagnostics,
    ))
}

fn outcome(
    label: CaseLabel,
    status: SolveStatus,
    sol: CaseSolution,
    diagnostics: Vec<CaseAttempt>,
) -> SolveOutcome {
    SolveOutcome {
        label,
        status,
        sum_rate: sol.summary.sum_rate(),
        policy: sol.policy,
        duals: sol.duals,
        summary: sol.summary,
        diagnostics,
    }
}

/// Index of the smallest bound (lowest index on ties).
pub fn active_bound(summary: &RateSummary) -> Bound {
    let b = summary.bounds();
    let mut best = 0;
    for j in 1..4 {
        if b[j] < b[best] {
            best = j;
        }
    }
    Bound::ALL[best]
}
