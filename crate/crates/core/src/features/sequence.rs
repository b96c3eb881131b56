//! Logical sequences: the guards a call site has to pass before it executes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::cfg::{Cfg, GuardRole};
use super::expr::normalize_ws;
use super::model::FunctionDecl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Modifier,
    If,
    Require,
    Revert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalConstraint {
    pub kind: ConstraintKind,
    pub condition: String,
}

impl LogicalConstraint {
    pub fn new(kind: ConstraintKind, condition: &str) -> Self {
        LogicalConstraint {
            kind,
            condition: normalize_ws(condition),
        }
    }
}

impl fmt::Display for LogicalConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.kind, self.condition)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogicalSequence {
    pub steps: Vec<LogicalConstraint>,
}

impl LogicalSequence {
    pub fn new(steps: Vec<LogicalConstraint>) -> Self {
        LogicalSequence { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }
}

impl fmt::Display for LogicalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.steps.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Modifiers of the function in declaration order, then the guards that
/// dominate `target_node` in control-flow order. A dominating `if` counts as a
/// guard only when one of its branches cannot reach the target; reverts on
/// that branch follow it.
pub fn guard_sequence(function: &FunctionDecl, cfg: &Cfg, target_node: Option<usize>) -> LogicalSequence {
    let mut steps: Vec<LogicalConstraint> = function
        .modifiers
        .iter()
        .map(|m| LogicalConstraint::new(ConstraintKind::Modifier, &m.condition))
        .collect();
    let Some(target) = target_node else {
        return LogicalSequence::new(steps);
    };
    for dom in cfg.dominators_of(target) {
        let node = &cfg.nodes[dom];
        match &node.guard {
            Some(GuardRole::Require(c)) => steps.push(LogicalConstraint::new(ConstraintKind::Require, c)),
            Some(GuardRole::If(c)) => {
                let succs: BTreeSet<usize> = cfg.successors(dom).collect();
                let blocked: Vec<usize> = succs
                    .iter()
                    .copied()
                    .filter(|s| !cfg.reachable_from(*s).contains(&target))
                    .collect();
                // A single successor inside the statement means the other branch
                // leaves the function without reaching the target.
                let branch_exits = succs.len() == 1
                    && succs.iter().all(|s| match (node.span, cfg.nodes[*s].span) {
                        (Some(outer), Some(inner)) => outer.contains(&inner),
                        _ => true,
                    });
                if blocked.is_empty() && !branch_exits {
                    continue;
                }
                steps.push(LogicalConstraint::new(ConstraintKind::If, c));
                let mut reverts: Vec<usize> = blocked
                    .iter()
                    .flat_map(|b| cfg.reachable_from(*b))
                    .filter(|n| {
                        let inner = &cfg.nodes[*n];
                        let inside = match (node.span, inner.span) {
                            (Some(outer), Some(s)) => outer.contains(&s),
                            _ => true,
                        };
                        inside && matches!(inner.guard, Some(GuardRole::Revert(_)))
                    })
                    .collect();
                reverts.sort();
                reverts.dedup();
                for r in reverts {
                    if let Some(GuardRole::Revert(c)) = &cfg.nodes[r].guard {
                        steps.push(LogicalConstraint::new(ConstraintKind::Revert, c));
                    }
                }
            }
            _ => {}
        }
    }
    LogicalSequence::new(steps)
}

/// Guards of a whole function body: modifiers, then every `require`/`assert`
/// and every `if` with a reverting branch, in node order. Used for functions
/// that are reused rather than for a particular call site.
pub fn function_guard_sequence(function: &FunctionDecl, cfg: &Cfg) -> LogicalSequence {
    let mut steps: Vec<LogicalConstraint> = function
        .modifiers
        .iter()
        .map(|m| LogicalConstraint::new(ConstraintKind::Modifier, &m.condition))
        .collect();
    for node in &cfg.nodes {
        match &node.guard {
            Some(GuardRole::Require(c)) => steps.push(LogicalConstraint::new(ConstraintKind::Require, c)),
            Some(GuardRole::If(c)) => {
                let reverts: Vec<&str> = cfg
                    .reachable_from(node.id)
                    .into_iter()
                    .filter_map(|n| {
                        let inner = &cfg.nodes[n];
                        let inside = match (node.span, inner.span) {
                            (Some(outer), Some(s)) => outer.contains(&s),
                            _ => true,
                        };
                        match &inner.guard {
                            Some(GuardRole::Revert(r)) if inside => Some(r.as_str()),
                            _ => None,
                        }
                    })
                    .collect();
                if !reverts.is_empty() {
                    steps.push(LogicalConstraint::new(ConstraintKind::If, c));
                    steps.extend(reverts.into_iter().map(|r| LogicalConstraint::new(ConstraintKind::Revert, r)));
                }
            }
            _ => {}
        }
    }
    LogicalSequence::new(steps)
}

/// Guard sequence leading to the call expression `call_id` in `function`.
pub fn extract_logical_sequence(function: &FunctionDecl, cfg: &Cfg, call_id: i64) -> LogicalSequence {
    guard_sequence(function, cfg, cfg.node_of_call(call_id))
}
