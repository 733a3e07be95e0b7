use std::collections::BTreeMap;

use num_rational::Ratio;

use super::GeneratorError;
use crate::model::{CostModel, Fsc, IdSet, Pomdp, Scenario};

pub type Cell = (usize, usize);

/// Id of the observation emitted by cells no sensor covers.
pub const BLANK: &str = "b";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    South,
    East,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::East, Heading::West];

    pub fn id(self) -> &'static str {
        match self {
            Heading::North => "N",
            Heading::South => "S",
            Heading::East => "E",
            Heading::West => "W",
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (0, 1),
            Heading::South => (0, -1),
            Heading::East => (1, 0),
            Heading::West => (-1, 0),
        }
    }

    fn orthogonal(self) -> [Heading; 2] {
        match self {
            Heading::North | Heading::South => [Heading::East, Heading::West],
            Heading::East | Heading::West => [Heading::North, Heading::South],
        }
    }
}

/// A range sensor: the cells it covers and the heading the controller takes
/// on its observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: String,
    pub cells: Vec<Cell>,
    pub heading: Heading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub sensors: Vec<SensorSpec>,
    pub start: Cell,
    pub goal: Cell,
    pub hazard: Cell,
    /// Probability of the intended move, as an exact ratio.
    pub p_intended: Ratio<u64>,
    pub blank_obs_alterable: bool,
    pub budget: f64,
}

fn scale(c: usize, n: usize) -> usize {
    // round-half-up of c·(n-1)/4; identity at n = 5
    (c * (n - 1) + 2) / 4
}

impl GridSpec {
    /// The seven-sensor layout with start (0,0), hazard (2,2) and goal (4,4)
    /// at n = 5. Larger grids keep the topology: anchors are scaled by
    /// `(n-1)/4`, sensor ranges are unchanged.
    pub fn standard(n: usize) -> Self {
        let layout: [(&str, Cell, &[Cell], Heading); 7] = [
            ("o0", (0, 0), &[(0, 0)], Heading::East),
            ("o1", (2, 0), &[(0, 0), (0, 1)], Heading::East),
            ("o2", (0, 2), &[(0, 0), (1, 0)], Heading::North),
            ("o3", (4, 0), &[(0, 0), (0, 1)], Heading::North),
            ("o4", (0, 4), &[(0, 0), (1, 0)], Heading::East),
            ("o5", (4, 3), &[(0, 0)], Heading::North),
            ("o6", (3, 4), &[(0, 0)], Heading::East),
        ];
        let sensors = layout
            .iter()
            .map(|&(id, (ax, ay), offsets, heading)| {
                let (bx, by) = (scale(ax, n), scale(ay, n));
                SensorSpec { id: id.to_string(), cells: offsets.iter().map(|&(dx, dy)| (bx + dx, by + dy)).collect(), heading }
            })
            .collect();
        GridSpec {
            n,
            sensors,
            start: (0, 0),
            goal: (n - 1, n - 1),
            hazard: (scale(2, n), scale(2, n)),
            p_intended: Ratio::new(4, 5),
            blank_obs_alterable: true,
            budget: 1.0,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "grid n={} p_intended={} blank_alterable={} start={:?} goal={:?} hazard={:?} sensors={}",
            self.n,
            self.p_intended,
            self.blank_obs_alterable,
            self.start,
            self.goal,
            self.hazard,
            self.sensors.iter().map(|s| format!("{}:{:?}", s.id, s.cells)).collect::<Vec<_>>().join(",")
        )
    }

    fn check(&self) -> Result<(), GeneratorError> {
        let bad = |msg: String| Err(GeneratorError::Grid(msg));
        if self.n < 2 {
            return bad(format!("grid side {} is too small", self.n));
        }
        let inside = |c: Cell| c.0 < self.n && c.1 < self.n;
        for (name, c) in [("start", self.start), ("goal", self.goal), ("hazard", self.hazard)] {
            if !inside(c) {
                return bad(format!("{name} {c:?} outside the grid"));
            }
        }
        if self.start == self.hazard {
            return bad("start coincides with the hazard".to_string());
        }
        if self.goal == self.hazard {
            return bad("goal coincides with the hazard".to_string());
        }
        if *self.p_intended.numer() == 0 || self.p_intended > Ratio::from_integer(1) {
            return bad(format!("p_intended {} outside (0, 1]", self.p_intended));
        }
        let mut ids: Vec<&str> = self.sensors.iter().map(|s| s.id.as_str()).collect();
        ids.push(BLANK);
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("sensor ids must be distinct and differ from the blank id".to_string());
        }
        for s in &self.sensors {
            if let Some(c) = s.cells.iter().find(|&&c| !inside(c)) {
                return bad(format!("sensor {} covers {c:?} outside the grid", s.id));
            }
        }
        Ok(())
    }

    fn step(&self, (x, y): Cell, h: Heading) -> Option<Cell> {
        let (dx, dy) = h.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.n && ny < self.n).then_some((nx, ny))
    }

    /// Successor distribution of `cell` under `heading`, in exact arithmetic.
    /// Goal and hazard are absorbing. A blocked intended move keeps its mass
    /// in place; the unintended mass is split over the feasible orthogonal
    /// moves (all of it to one if only one is feasible, to the cell itself
    /// if neither is).
    pub fn dynamics(&self, cell: Cell, heading: Heading) -> Vec<(Cell, Ratio<u64>)> {
        let one = Ratio::from_integer(1);
        if cell == self.goal || cell == self.hazard {
            return vec![(cell, one)];
        }
        let mut out: BTreeMap<Cell, Ratio<u64>> = BTreeMap::new();
        *out.entry(self.step(cell, heading).unwrap_or(cell)).or_insert(Ratio::from_integer(0)) += self.p_intended;
        let slip = one - self.p_intended;
        let feasible: Vec<Cell> = heading.orthogonal().iter().filter_map(|&h| self.step(cell, h)).collect();
        if feasible.is_empty() {
            *out.entry(cell).or_insert(Ratio::from_integer(0)) += slip;
        } else {
            let share = slip / feasible.len() as u64;
            for c in feasible {
                *out.entry(c).or_insert(Ratio::from_integer(0)) += share;
            }
        }
        out.into_iter().filter(|(_, p)| *p.numer() != 0).collect()
    }

    pub fn cell_id(&self, (x, y): Cell) -> String {
        let width = (self.n - 1).to_string().len();
        format!("x{x:0width$}y{y:0width$}")
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Grid-world scenario: one state per cell, actions N/S/E/W, one observation
/// per sensor plus the blank, and the three-node controller that heads east
/// or north by sensor class and resolves the blank by the last non-blank
/// class (node `n1` after east-class, `n2` after north-class, `n0` at start
/// behaves like `n1`). The decoy is the hazard; every alteration costs 1.
pub fn gen_grid(spec: &GridSpec) -> Result<Scenario, GeneratorError> {
    spec.check()?;
    let n = spec.n;
    let cells: Vec<Cell> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
    let states = IdSet::new(cells.iter().map(|&c| spec.cell_id(c)));
    let actions = IdSet::new(Heading::ALL.iter().map(|h| h.id()));
    let observations = IdSet::new(spec.sensors.iter().map(|s| s.id.clone()).chain([BLANK.to_string()]));
    let blank = observations.get(BLANK).expect("blank observation");

    let mut cover: BTreeMap<Cell, usize> = BTreeMap::new();
    for s in &spec.sensors {
        let o = observations.get(&s.id).expect("sensor observation");
        for &c in &s.cells {
            cover.entry(c).or_insert(o);
        }
    }

    let ns = states.len();
    let mut transitions = vec![vec![Vec::new(); actions.len()]; ns];
    let mut obs_of = vec![blank; ns];
    for &c in &cells {
        let s = states.get(&spec.cell_id(c)).expect("cell state");
        obs_of[s] = cover.get(&c).copied().unwrap_or(blank);
        for h in Heading::ALL {
            let a = actions.get(h.id()).expect("heading action");
            let mut row: Vec<(usize, f64)> = spec
                .dynamics(c, h)
                .into_iter()
                .map(|(t, p)| (states.get(&spec.cell_id(t)).expect("cell state"), to_f64(p)))
                .collect();
            row.sort_by_key(|&(t, _)| t);
            transitions[s][a] = row;
        }
    }

    let nodes = IdSet::new(["n0", "n1", "n2"]);
    let (east_node, north_node) = (nodes.get("n1").unwrap(), nodes.get("n2").unwrap());
    let no = observations.len();
    let mut action_of = vec![vec![None; no]; nodes.len()];
    let mut next_node = vec![vec![None; no]; nodes.len()];
    for node in 0..nodes.len() {
        for o in 0..no {
            let heading = if o == blank {
                if node == north_node {
                    Heading::North
                } else {
                    Heading::East
                }
            } else {
                spec.sensors.iter().find(|s| s.id == observations.id(o)).expect("sensor").heading
            };
            let memory = if heading == Heading::North { north_node } else { east_node };
            action_of[node][o] = Some(actions.get(heading.id()).unwrap());
            next_node[node][o] = Some(memory);
        }
    }

    let mut cost_model = CostModel::unit(no, spec.budget);
    if !spec.blank_obs_alterable {
        cost_model.costs.retain(|&(from, to), _| from != blank || to == blank);
    }

    let hazard = states.get(&spec.cell_id(spec.hazard)).unwrap();
    let initial_state = states.get(&spec.cell_id(spec.start)).unwrap();
    Ok(Scenario {
        pomdp: Pomdp { states, actions, observations, transitions, initial_state, obs_of },
        fsc: Fsc { nodes, initial_node: 0, action_of, next_node },
        cost_model,
        decoy: vec![hazard],
    })
}
