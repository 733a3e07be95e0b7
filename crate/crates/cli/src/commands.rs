use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use decoyforge_core::generators::{gen_grid, gen_knapsack, GridSpec, KnapsackInstance};
use decoyforge_core::milp::{self, build_milp, count_stats, MilpError, MilpOptions};
use decoyforge_core::optimizer::{self, OptError, OptResult, OptStatus, SearchLimits};
use decoyforge_core::verifier::{build_product, simulate, ReachMethod, ReachOptions, SimConfig, VerifyError};
use decoyforge_core::{
    parse_scenario, serialize_scenario, validate_scenario, verify, AltCost, Alteration, Rule, Scenario,
    ValidationReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::*;
use crate::output::{number, seconds, Report};
use crate::Failure;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Verify(a) => verify_alteration(a, cli.seed),
        Command::Optimize(a) => optimize(a),
        Command::ExportLp(a) => export_lp(a),
        Command::Gen(GenCommand::Grid(a)) => gen_grid_cmd(a),
        Command::Gen(GenCommand::Knapsack(a)) => gen_knapsack_cmd(a, cli.seed),
        Command::Stats(a) => stats(a),
    }
}

fn read_source(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(|e| Failure::io("stdin", e))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    }
    Ok(text)
}

fn load(path: &str, budget: Option<f64>) -> Result<Scenario, Failure> {
    let text = read_source(path)?;
    let sc = parse_scenario(&text).map_err(|e| Failure::input("parse", format!("{path}: {e}")))?;
    Ok(match budget {
        Some(b) => sc.with_budget(b),
        None => sc,
    })
}

fn invalid(sc: &Scenario, report: &ValidationReport) -> Failure {
    let o0 = sc.pomdp.observations.ids().get(sc.initial_observation()).cloned().unwrap_or_default();
    let pinned = format!("cost ({o0}, {o0})");
    let violations: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
    if report.violations.iter().any(|v| v.rule == Rule::IdentityCost && v.entity == pinned) {
        return Failure::input(
            "infeasible",
            format!(
                "the initial observation `{o0}` must map to itself, but its identity pair is not free; no alteration is admissible ({})",
                violations.join("; ")
            ),
        );
    }
    Failure::input("validation", format!("{} violation(s): {}", violations.len(), violations.join("; ")))
}

fn verify_error(sc: &Scenario, e: VerifyError) -> Failure {
    match e {
        VerifyError::Invalid(r) => invalid(sc, &r),
        e @ VerifyError::NotConverged { .. } => Failure::solver(e),
        e => Failure::input("alteration", e),
    }
}

fn opt_error(sc: &Scenario, e: OptError) -> Failure {
    match e {
        OptError::Invalid(r) => invalid(sc, &r),
        OptError::Verify(e) => verify_error(sc, e),
        e => Failure::input("optimize", e),
    }
}

fn milp_error(sc: &Scenario, e: MilpError) -> Failure {
    match e {
        MilpError::Invalid(r) => invalid(sc, &r),
        e @ MilpError::InitialIdentityForbidden { .. } => Failure::input("infeasible", e),
        e @ (MilpError::Solver { .. } | MilpError::Solution { .. }) => Failure::solver(e),
        e => Failure::input("milp", e),
    }
}

fn alteration_text(sc: &Scenario, alt: &Alteration) -> String {
    if alt.is_identity() {
        "identity".to_string()
    } else {
        alt.display(sc.observations()).to_string()
    }
}

fn cost_text(cost: AltCost) -> String {
    match cost.finite() {
        Some(c) => number(c),
        None => "forbidden".to_string(),
    }
}

fn validate(a: &ValidateArgs) -> Result<(), Failure> {
    let sc = load(&a.input.scenario, a.input.budget)?;
    let report = validate_scenario(&sc);
    let mut out = Report::new(&["entity", "rule", "detail"]);
    for v in &report.violations {
        out.push(vec![v.entity.clone(), v.rule.label().to_string(), v.detail.clone()]);
    }
    out.emit(&a.output.out)?;
    if report.is_valid() {
        eprintln!(
            "# valid: {} states, {} actions, {} observations, {} nodes",
            sc.pomdp.num_states(),
            sc.pomdp.num_actions(),
            sc.pomdp.num_observations(),
            sc.fsc.num_nodes()
        );
        Ok(())
    } else {
        Err(invalid(&sc, &report))
    }
}

const VERIFY_COLUMNS: &[&str] =
    &["scenario", "alteration", "cost", "within_budget", "probability", "residual", "method", "seconds"];
const VERIFY_SIM_COLUMNS: &[&str] = &[
    "scenario",
    "alteration",
    "cost",
    "within_budget",
    "probability",
    "residual",
    "method",
    "seconds",
    "mc_episodes",
    "mc_estimate",
    "mc_half_width_95",
];

fn verify_alteration(a: &VerifyArgs, seed: u64) -> Result<(), Failure> {
    let sc = load(&a.input.scenario, a.input.budget)?;
    let alt = if a.alt.trim() == "identity" {
        sc.identity()
    } else {
        Alteration::parse(&a.alt, sc.observations()).map_err(|e| Failure::input("alteration", e))?
    };
    let opts = ReachOptions {
        method: match a.solver {
            Solver::Auto => None,
            Solver::Direct => Some(ReachMethod::Direct),
            Solver::Iterative => Some(ReachMethod::Iterative),
        },
        ..ReachOptions::default()
    };
    let started = Instant::now();
    let v = verify(&sc, &alt, &opts).map_err(|e| verify_error(&sc, e))?;
    let took = started.elapsed();
    let mut row = vec![
        a.input.scenario.clone(),
        alteration_text(&sc, &alt),
        cost_text(v.cost),
        v.within_budget.to_string(),
        number(v.probability),
        format!("{:.3e}", v.residual),
        v.method.to_string(),
        seconds(took, a.output.no_timing),
    ];
    let mut out = match a.simulate {
        None => Report::new(VERIFY_COLUMNS),
        Some(episodes) => {
            let base = SimConfig::defaults_for(&sc, seed);
            let cfg = SimConfig { episodes, horizon: a.horizon.unwrap_or(base.horizon), seed };
            let est = simulate(&sc, &alt, &cfg);
            row.extend([est.episodes.to_string(), number(est.estimate), number(est.half_width_95)]);
            Report::new(VERIFY_SIM_COLUMNS)
        }
    };
    out.push(row);
    out.emit(&a.output.out)
}

const OPTIMIZE_COLUMNS: &[&str] = &["budget", "value", "cost", "status", "nodes", "seconds", "alteration"];

fn optimize(a: &OptimizeArgs) -> Result<(), Failure> {
    let sc = load(&a.scenario, None)?;
    let budgets = match (&a.sweep, a.budget) {
        (Some(list), _) => list.clone(),
        (None, Some(b)) => vec![b],
        (None, None) => vec![sc.cost_model.budget],
    };
    if let Some(b) = budgets.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Failure::input("usage", format!("budget {b} is not a nonnegative number")));
    }
    let limits = SearchLimits { max_nodes: a.max_nodes, max_seconds: a.max_seconds };
    let started = Instant::now();
    // seconds are cumulative from the start of the run
    let mut rows: Vec<(f64, OptResult, std::time::Duration)> = Vec::new();
    match a.method {
        Method::Bb => {
            let rs = optimizer::budget_sweep(&sc, &budgets, &limits).map_err(|e| opt_error(&sc, e))?;
            let took = started.elapsed();
            rows.extend(budgets.iter().zip(rs).map(|(&b, r)| (b, r, took)));
        }
        Method::Brute => {
            for &b in &budgets {
                let r = optimizer::brute_force_with_cap(&sc.with_budget(b), a.max_obs).map_err(|e| opt_error(&sc, e))?;
                rows.push((b, r, started.elapsed()));
            }
        }
        Method::Milp => {
            let Some(cmd) = a.solve_external.as_deref().filter(|c| !c.trim().is_empty()) else {
                return Err(Failure::input("usage", "--method milp needs --solve-external or DECOYFORGE_SOLVER"));
            };
            let opts = MilpOptions { sparse_l: true, prune_unreachable: a.prune };
            for &b in &budgets {
                let scb = sc.with_budget(b);
                let model = build_milp(&scb, &opts).map_err(|e| milp_error(&scb, e))?;
                let sol = milp::solve_external(&model, cmd).map_err(|e| milp_error(&scb, e))?;
                let alt = sol.alteration.ok_or_else(|| Failure::solver("solver returned a non-integral alteration"))?;
                let v = verify(&scb, &alt, &ReachOptions::default()).map_err(|e| verify_error(&scb, e))?;
                if !v.within_budget {
                    return Err(Failure::solver(format!("solver alteration exceeds budget {b}")));
                }
                let r = OptResult {
                    best_value: v.probability,
                    best_cost: v.cost.finite().unwrap_or(f64::NAN),
                    best_alteration: alt,
                    status: OptStatus::Optimal,
                    nodes_explored: 0,
                    bound_at_root: sol.objective,
                };
                rows.push((b, r, started.elapsed()));
            }
        }
    }
    let mut out = Report::new(OPTIMIZE_COLUMNS);
    for (b, r, took) in &rows {
        out.push(vec![
            number(*b),
            number(r.best_value),
            number(r.best_cost),
            r.status.to_string(),
            r.nodes_explored.to_string(),
            seconds(*took, a.output.no_timing),
            alteration_text(&sc, &r.best_alteration),
        ]);
    }
    out.emit(&a.output.out)
}

fn write_target(path: Option<&Path>, text: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(p.display(), e)),
        None => std::io::stdout().write_all(text).map_err(|e| Failure::io("stdout", e)),
    }
}

fn export_lp(a: &ExportArgs) -> Result<(), Failure> {
    let sc = load(&a.input.scenario, a.input.budget)?;
    let model = build_milp(&sc, &MilpOptions { sparse_l: !a.dense, prune_unreachable: a.prune })
        .map_err(|e| milp_error(&sc, e))?;
    let mut buf = Vec::new();
    milp::write_lp(&model, &mut buf).map_err(|e| Failure::io("lp", e))?;
    write_target(a.output.as_deref(), &buf)?;
    let s = count_stats(&model);
    eprintln!("# lp: {} variables, {} constraints", s.num_vars, s.num_constraints);
    Ok(())
}

fn with_header(header: &[String], scenario: &Scenario) -> Vec<u8> {
    let mut text: String = header.iter().map(|h| format!("# {h}\n")).collect();
    text += &serialize_scenario(scenario);
    text.into_bytes()
}

fn gen_grid_cmd(a: &GridArgs) -> Result<(), Failure> {
    if a.n < 5 {
        return Err(Failure::input("usage", format!("grid size {} is below 5, too small for the sensor layout", a.n)));
    }
    let spec = GridSpec { budget: a.budget, blank_obs_alterable: !a.freeze_blank, ..GridSpec::standard(a.n) };
    let sc = gen_grid(&spec).map_err(|e| Failure::input("generate", e))?;
    let header = vec!["generated by decoyforge gen grid".to_string(), spec.describe(), format!("budget={}", a.budget)];
    write_target(a.output.as_deref(), &with_header(&header, &sc))
}

fn gen_knapsack_cmd(a: &KnapsackArgs, seed: u64) -> Result<(), Failure> {
    let (weights, values) = match (&a.weights, &a.values, a.items) {
        (Some(w), Some(v), _) => (w.clone(), v.clone()),
        (_, _, Some(n)) => {
            if a.max_weight == 0 || a.max_value == 0 {
                return Err(Failure::input("usage", "--max-weight and --max-value must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = (0..n).map(|_| rng.random_range(1..=a.max_weight) as f64).collect();
            let v = (0..n).map(|_| rng.random_range(1..=a.max_value) as f64).collect();
            (w, v)
        }
        _ => return Err(Failure::input("usage", "give --weights and --values, or --items")),
    };
    let capacity = a.capacity.unwrap_or_else(|| (weights.iter().sum::<f64>() / 2.0).floor());
    let threshold = a.threshold.unwrap_or_else(|| (values.iter().sum::<f64>() / 2.0).floor());
    let inst = KnapsackInstance::new(weights, values, capacity, threshold);
    let generated = gen_knapsack(&inst).map_err(|e| Failure::input("generate", e))?;
    let header = vec![
        "generated by decoyforge gen knapsack".to_string(),
        inst.describe(),
        format!("seed={seed} threshold_r={}", generated.threshold_r),
    ];
    write_target(a.output.as_deref(), &with_header(&header, &generated.scenario))
}

const STATS_COLUMNS: &[&str] = &[
    "states",
    "actions",
    "observations",
    "nodes",
    "transitions",
    "product_states",
    "product_transitions",
    "triples",
    "milp_vars",
    "milp_constraints",
    "milp_x",
    "milp_z",
    "milp_l",
    "seconds",
];

fn stats(a: &StatsArgs) -> Result<(), Failure> {
    let sc = load(&a.input.scenario, a.input.budget)?;
    let started = Instant::now();
    let model = build_milp(&sc, &MilpOptions::default()).map_err(|e| milp_error(&sc, e))?;
    let s = count_stats(&model);
    let chain = build_product(&sc, &sc.identity());
    let took = started.elapsed();
    let mut out = Report::new(STATS_COLUMNS);
    out.push(vec![
        sc.pomdp.num_states().to_string(),
        sc.pomdp.num_actions().to_string(),
        sc.pomdp.num_observations().to_string(),
        sc.fsc.num_nodes().to_string(),
        sc.pomdp.nonzero_transitions().to_string(),
        chain.len().to_string(),
        chain.num_transitions().to_string(),
        model.product.len().to_string(),
        s.num_vars.to_string(),
        s.num_constraints.to_string(),
        s.num_x.to_string(),
        s.num_z.to_string(),
        s.num_l.to_string(),
        seconds(took, a.output.no_timing),
    ]);
    out.emit(&a.output.out)
}
