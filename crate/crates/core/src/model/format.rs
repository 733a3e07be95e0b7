//! Scenario documents (TOML).
//!
//! ```toml
//! states = ["s0", "s1"]
//! actions = ["a"]
//! observations = ["o0", "o1"]
//! initial_state = "s0"
//! budget = 1.0
//! decoy = ["s1"]
//!
//! [obs_of]
//! s0 = "o0"
//! s1 = "o1"
//!
//! [[transitions]]
//! state = "s0"
//! action = "a"
//! successors = [{ state = "s1", prob = 1.0 }]
//!
//! [fsc]
//! nodes = ["n0"]
//! initial_node = "n0"
//! rules = [{ node = "n0", observation = "o0", action = "a", next_node = "n0" }]
//!
//! [[costs]]
//! from = "o0"
//! to = "o1"
//! cost = 1.0
//! ```
//!
//! Cost pairs that are not listed are forbidden, except identities, which
//! default to zero.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CostModel, Fsc, IdSet, Pomdp, Scenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{field}: unknown {kind} id `{id}`")]
    UnknownId { field: String, kind: &'static str, id: String },
    #[error("{field}: duplicate entry {entry}")]
    Duplicate { field: String, entry: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    initial_state: String,
    budget: f64,
    decoy: Vec<String>,
    obs_of: BTreeMap<String, String>,
    transitions: Vec<TransitionDoc>,
    fsc: FscDoc,
    #[serde(default)]
    costs: Vec<CostDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    state: String,
    action: String,
    successors: Vec<SuccessorDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessorDoc {
    state: String,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FscDoc {
    nodes: Vec<String>,
    initial_node: String,
    rules: Vec<RuleDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    node: String,
    observation: String,
    action: String,
    next_node: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDoc {
    from: String,
    to: String,
    cost: f64,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let prefix = &text[..offset.min(text.len())];
    let line = prefix.matches('\n').count() + 1;
    let column = prefix.rfind('\n').map_or(prefix.len(), |nl| prefix.len() - nl - 1) + 1;
    (line, column)
}

fn resolve(set: &IdSet, id: &str, field: &str, kind: &'static str) -> Result<usize, ParseError> {
    set.get(id).ok_or_else(|| ParseError::UnknownId { field: field.to_string(), kind, id: id.to_string() })
}

fn id_set(ids: &[String], field: &str) -> Result<IdSet, ParseError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(ParseError::Duplicate { field: field.to_string(), entry: format!("`{id}`") });
        }
    }
    Ok(IdSet::new(ids.iter().cloned()))
}

/// Parses and resolves a scenario document. Well-formedness (stochastic rows,
/// totality, identity costs) is left to [`super::validate_scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let doc: Document = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |span| line_col(text, span.start));
        ParseError::Syntax { line, column, message: e.message().trim().to_string() }
    })?;

    let states = id_set(&doc.states, "states")?;
    let actions = id_set(&doc.actions, "actions")?;
    let observations = id_set(&doc.observations, "observations")?;
    let nodes = id_set(&doc.fsc.nodes, "fsc.nodes")?;
    let (ns, na, no, nn) = (states.len(), actions.len(), observations.len(), nodes.len());

    let initial_state = resolve(&states, &doc.initial_state, "initial_state", "state")?;

    let mut obs_of = vec![None; ns];
    for (s, o) in &doc.obs_of {
        let si = resolve(&states, s, "obs_of", "state")?;
        obs_of[si] = Some(resolve(&observations, o, "obs_of", "observation")?);
    }
    let obs_of = obs_of
        .into_iter()
        .enumerate()
        .map(|(s, o)| {
            o.ok_or_else(|| ParseError::Invalid {
                field: "obs_of".to_string(),
                message: format!("state `{}` has no observation", states.id(s)),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut transitions = vec![vec![Vec::new(); na]; ns];
    let mut seen_rows = HashSet::new();
    for t in &doc.transitions {
        let s = resolve(&states, &t.state, "transitions.state", "state")?;
        let a = resolve(&actions, &t.action, "transitions.action", "action")?;
        if !seen_rows.insert((s, a)) {
            return Err(ParseError::Duplicate {
                field: "transitions".to_string(),
                entry: format!("({}, {})", t.state, t.action),
            });
        }
        let mut succ = Vec::with_capacity(t.successors.len());
        for entry in &t.successors {
            let target = resolve(&states, &entry.state, "transitions.successors.state", "state")?;
            succ.push((target, entry.prob));
        }
        succ.sort_by_key(|&(target, _)| target);
        if succ.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ParseError::Duplicate {
                field: "transitions.successors".to_string(),
                entry: format!("in ({}, {})", t.state, t.action),
            });
        }
        transitions[s][a] = succ;
    }

    let initial_node = resolve(&nodes, &doc.fsc.initial_node, "fsc.initial_node", "node")?;
    let mut action_of = vec![vec![None; no]; nn];
    let mut next_node = vec![vec![None; no]; nn];
    for rule in &doc.fsc.rules {
        let n = resolve(&nodes, &rule.node, "fsc.rules.node", "node")?;
        let o = resolve(&observations, &rule.observation, "fsc.rules.observation", "observation")?;
        let a = resolve(&actions, &rule.action, "fsc.rules.action", "action")?;
        let m = resolve(&nodes, &rule.next_node, "fsc.rules.next_node", "node")?;
        if action_of[n][o].is_some() {
            return Err(ParseError::Duplicate {
                field: "fsc.rules".to_string(),
                entry: format!("({}, {})", rule.node, rule.observation),
            });
        }
        action_of[n][o] = Some(a);
        next_node[n][o] = Some(m);
    }

    let mut costs = BTreeMap::new();
    for c in &doc.costs {
        let from = resolve(&observations, &c.from, "costs.from", "observation")?;
        let to = resolve(&observations, &c.to, "costs.to", "observation")?;
        if costs.insert((from, to), c.cost).is_some() {
            return Err(ParseError::Duplicate { field: "costs".to_string(), entry: format!("({}, {})", c.from, c.to) });
        }
    }
    for o in 0..no {
        costs.entry((o, o)).or_insert(0.0);
    }

    let mut decoy = Vec::with_capacity(doc.decoy.len());
    for s in &doc.decoy {
        decoy.push(resolve(&states, s, "decoy", "state")?);
    }
    decoy.sort_unstable();
    decoy.dedup();

    Ok(Scenario {
        pomdp: Pomdp { states, actions, observations, transitions, initial_state, obs_of },
        fsc: Fsc { nodes, initial_node, action_of, next_node },
        cost_model: CostModel::new(costs, doc.budget),
        decoy,
    })
}

/// Deterministic document for `scenario`: ids sorted, zero identity costs
/// left implicit.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let pomdp = &scenario.pomdp;
    let fsc = &scenario.fsc;
    let obs = &pomdp.observations;

    let mut transitions = Vec::new();
    for (s, row) in pomdp.transitions.iter().enumerate() {
        for (a, succ) in row.iter().enumerate() {
            if succ.is_empty() {
                continue;
            }
            transitions.push(TransitionDoc {
                state: pomdp.states.id(s).to_string(),
                action: pomdp.actions.id(a).to_string(),
                successors: succ
                    .iter()
                    .map(|&(t, p)| SuccessorDoc { state: pomdp.states.id(t).to_string(), prob: p })
                    .collect(),
            });
        }
    }

    let mut rules = Vec::new();
    for n in 0..fsc.num_nodes() {
        for o in 0..obs.len() {
            if let (Some(a), Some(m)) = (fsc.action_of[n][o], fsc.next_node[n][o]) {
                rules.push(RuleDoc {
                    node: fsc.nodes.id(n).to_string(),
                    observation: obs.id(o).to_string(),
                    action: pomdp.actions.id(a).to_string(),
                    next_node: fsc.nodes.id(m).to_string(),
                });
            }
        }
    }

    let costs = scenario
        .cost_model
        .costs
        .iter()
        .filter(|(&(from, to), &c)| !(from == to && c == 0.0))
        .map(|(&(from, to), &cost)| CostDoc { from: obs.id(from).to_string(), to: obs.id(to).to_string(), cost })
        .collect();

    let doc = Document {
        states: pomdp.states.ids().to_vec(),
        actions: pomdp.actions.ids().to_vec(),
        observations: obs.ids().to_vec(),
        initial_state: pomdp.states.id(pomdp.initial_state).to_string(),
        budget: scenario.cost_model.budget,
        decoy: scenario.decoy.iter().map(|&s| pomdp.states.id(s).to_string()).collect(),
        obs_of: pomdp
            .obs_of
            .iter()
            .enumerate()
            .map(|(s, &o)| (pomdp.states.id(s).to_string(), obs.id(o).to_string()))
            .collect(),
        transitions,
        fsc: FscDoc { nodes: fsc.nodes.ids().to_vec(), initial_node: fsc.nodes.id(fsc.initial_node).to_string(), rules },
        costs,
    };
    toml::to_string(&doc).expect("scenario documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;

    const TOY: &str = r#"
states = ["s0", "s1"]
actions = ["a"]
observations = ["o0", "o1"]
initial_state = "s0"
budget = 1.0
decoy = ["s1"]

[obs_of]
s0 = "o0"
s1 = "o1"

[[transitions]]
state = "s0"
action = "a"
successors = [{ state = "s1", prob = 1.0 }]

[[transitions]]
state = "s1"
action = "a"
successors = [{ state = "s1", prob = 1.0 }]

[fsc]
nodes = ["n0"]
initial_node = "n0"
rules = [
  { node = "n0", observation = "o0", action = "a", next_node = "n0" },
  { node = "n0", observation = "o1", action = "a", next_node = "n0" },
]

[[costs]]
from = "o0"
to = "o1"
cost = 1.0
"#;

    #[test]
    fn parses_toy_document() {
        let sc = parse_scenario(TOY).unwrap();
        assert!(validate_scenario(&sc).is_valid());
        assert_eq!(sc.pomdp.successors(0, 0), &[(1, 1.0)]);
        assert_eq!(sc.cost_model.cost(0, 1), Some(1.0));
        assert_eq!(sc.cost_model.cost(1, 1), Some(0.0));
        assert_eq!(sc.cost_model.cost(1, 0), None);
    }

    #[test]
    fn round_trip_is_stable() {
        let sc = parse_scenario(TOY).unwrap();
        let text = serialize_scenario(&sc);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(sc, back);
        assert_eq!(text, serialize_scenario(&back));
    }

    #[test]
    fn missing_initial_state_names_field() {
        let text = TOY.replace("initial_state = \"s0\"\n", "");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("initial_state"), "{err}");
    }

    #[test]
    fn unknown_action_in_fsc() {
        let text = TOY.replacen("observation = \"o1\", action = \"a\"", "observation = \"o1\", action = \"jump\"", 1);
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownId { field: "fsc.rules.action".into(), kind: "action", id: "jump".into() }
        );
    }

    #[test]
    fn unknown_key_rejected_with_position() {
        let text = format!("{TOY}\nextra = 3\n");
        match parse_scenario(&text).unwrap_err() {
            ParseError::Syntax { line, message, .. } => {
                assert!(message.contains("extra"), "{message}");
                assert!(line > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_rule_rejected() {
        let text = TOY.replace(
            "  { node = \"n0\", observation = \"o1\", action = \"a\", next_node = \"n0\" },",
            "  { node = \"n0\", observation = \"o0\", action = \"a\", next_node = \"n0\" },",
        );
        assert!(matches!(parse_scenario(&text), Err(ParseError::Duplicate { .. })));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_scenario("states = [\"a\"\nactions = 3").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line, .. } if line >= 1));
    }
}
