use std::fmt;

use super::{Scenario, ROW_SUM_TOL};

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    EmptySet,
    RowSum,
    ProbabilityRange,
    DanglingIndex,
    ObservationMapNotTotal,
    ActionTableNotTotal,
    MemoryUpdateNotTotal,
    IdentityCost,
    NegativeCost,
    NegativeBudget,
    EmptyDecoy,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::EmptySet => "empty id set",
            Rule::RowSum => "row sum ≠ 1",
            Rule::ProbabilityRange => "probability outside [0,1]",
            Rule::DanglingIndex => "dangling reference",
            Rule::ObservationMapNotTotal => "O not total",
            Rule::ActionTableNotTotal => "γ not total",
            Rule::MemoryUpdateNotTotal => "δ not total",
            Rule::IdentityCost => "identity alteration not free",
            Rule::NegativeCost => "cost not a nonnegative finite number",
            Rule::NegativeBudget => "budget not a nonnegative finite number",
            Rule::EmptyDecoy => "decoy set empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule.label())?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Result of [`validate_scenario`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    fn push(&mut self, entity: impl Into<String>, rule: Rule, detail: impl Into<String>) {
        self.violations.push(Violation { entity: entity.into(), rule, detail: detail.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Checks every structural invariant of the scenario.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let (ns, na, no, nn) = (pomdp.num_states(), pomdp.num_actions(), pomdp.num_observations(), fsc.num_nodes());

    for (name, len) in [("states", ns), ("actions", na), ("observations", no), ("fsc.nodes", nn)] {
        if len == 0 {
            report.push(name, Rule::EmptySet, "");
        }
    }

    if pomdp.initial_state >= ns {
        report.push("initial_state", Rule::DanglingIndex, format!("index {}", pomdp.initial_state));
    }

    if pomdp.transitions.len() != ns || pomdp.transitions.iter().any(|row| row.len() != na) {
        report.push("transitions", Rule::DanglingIndex, "table shape does not match states × actions");
    } else {
        for (s, row) in pomdp.transitions.iter().enumerate() {
            for (a, succ) in row.iter().enumerate() {
                let entity = format!("transition ({}, {})", pomdp.states.id(s), pomdp.actions.id(a));
                let mut sum = 0.0;
                for &(t, p) in succ {
                    if t >= ns {
                        report.push(entity.clone(), Rule::DanglingIndex, format!("successor index {t}"));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        report.push(entity.clone(), Rule::ProbabilityRange, format!("{p}"));
                    }
                    sum += p;
                }
                if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                    report.push(entity, Rule::RowSum, format!("sum = {sum}"));
                }
            }
        }
    }

    if pomdp.obs_of.len() != ns {
        report.push("obs_of", Rule::ObservationMapNotTotal, format!("{} of {} states mapped", pomdp.obs_of.len(), ns));
    }
    for (s, &o) in pomdp.obs_of.iter().enumerate() {
        if o >= no {
            let entity = if s < ns { pomdp.states.id(s).to_string() } else { format!("state #{s}") };
            report.push(format!("obs_of[{entity}]"), Rule::DanglingIndex, format!("observation index {o}"));
        }
    }

    if fsc.initial_node >= nn {
        report.push("fsc.initial_node", Rule::DanglingIndex, format!("index {}", fsc.initial_node));
    }
    let table_ok = fsc.action_of.len() == nn
        && fsc.next_node.len() == nn
        && fsc.action_of.iter().chain(fsc.next_node.iter()).all(|row| row.len() == no);
    if !table_ok {
        report.push("fsc.rules", Rule::DanglingIndex, "table shape does not match nodes × observations");
    } else {
        for n in 0..nn {
            for o in 0..no {
                let entity = format!("fsc ({}, {})", fsc.nodes.id(n), pomdp.observations.id(o));
                match fsc.action_of[n][o] {
                    None => report.push(entity.clone(), Rule::ActionTableNotTotal, ""),
                    Some(a) if a >= na => report.push(entity.clone(), Rule::DanglingIndex, format!("action index {a}")),
                    Some(_) => {}
                }
                match fsc.next_node[n][o] {
                    None => report.push(entity, Rule::MemoryUpdateNotTotal, ""),
                    Some(m) if m >= nn => report.push(entity, Rule::DanglingIndex, format!("node index {m}")),
                    Some(_) => {}
                }
            }
        }
    }

    let cm = &scenario.cost_model;
    for (&(from, to), &c) in &cm.costs {
        if from >= no || to >= no {
            report.push("costs", Rule::DanglingIndex, format!("pair ({from}, {to})"));
            continue;
        }
        if !(c.is_finite() && c >= 0.0) {
            let entity = format!("cost ({}, {})", pomdp.observations.id(from), pomdp.observations.id(to));
            report.push(entity, Rule::NegativeCost, format!("{c}"));
        }
    }
    let initial_obs = pomdp.obs_of.get(pomdp.initial_state).copied();
    for o in 0..no {
        let detail = match cm.cost(o, o) {
            Some(c) if c == 0.0 => continue,
            Some(c) => format!("c(o, o) = {c}"),
            None => "identity pair missing".to_string(),
        };
        let detail = if initial_obs == Some(o) {
            format!("{detail}; initial observation must keep its identity, x[O(s0),O(s0)] = 1 is infeasible")
        } else {
            detail
        };
        report.push(format!("cost ({0}, {0})", pomdp.observations.id(o)), Rule::IdentityCost, detail);
    }
    if !(cm.budget.is_finite() && cm.budget >= 0.0) {
        report.push("budget", Rule::NegativeBudget, format!("{}", cm.budget));
    }

    if scenario.decoy.is_empty() {
        report.push("decoy", Rule::EmptyDecoy, "");
    }
    for &s in &scenario.decoy {
        if s >= ns {
            report.push("decoy", Rule::DanglingIndex, format!("state index {s}"));
        }
    }

    report
}
