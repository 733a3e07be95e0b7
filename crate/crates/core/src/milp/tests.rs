use std::collections::BTreeSet;

use super::*;
use crate::generators::{gen_grid, gen_knapsack, GridSpec, KnapsackInstance};
use crate::model::{alteration_cost, Alteration, Scenario};
use crate::testutil::toy;
use crate::verifier::reach_value;

fn knapsack5() -> Scenario {
    gen_knapsack(&KnapsackInstance::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![20.0, 30.0, 40.0, 50.0, 60.0], 7.0, 100.0))
        .unwrap()
        .scenario
}

fn grid5() -> Scenario {
    gen_grid(&GridSpec::standard(5)).unwrap()
}

fn lp_text(model: &MilpModel) -> String {
    let mut buf = Vec::new();
    write_lp(model, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Every total alteration whose pairs are all permitted and that keeps the
/// initial observation, in lexicographic order.
fn admissible_alterations(sc: &Scenario) -> Vec<Alteration> {
    let no = sc.pomdp.num_observations();
    let o0 = sc.initial_observation();
    let choices: Vec<Vec<usize>> = (0..no)
        .map(|o| if o == o0 { vec![o] } else { sc.cost_model.images(o).map(|(t, _)| t).collect() })
        .collect();
    let mut out = vec![Vec::new()];
    for c in &choices {
        out = out.into_iter().flat_map(|p: Vec<usize>| c.iter().map(move |&t| [p.clone(), vec![t]].concat())).collect();
    }
    out.into_iter().map(Alteration::from_images).collect()
}

#[test]
fn triple_counts() {
    assert_eq!(build_extended_product(&toy(), false).len(), 4);
    assert_eq!(build_extended_product(&knapsack5(), false).len(), 243);
    assert_eq!(build_extended_product(&grid5(), false).len(), 600);
}

#[test]
fn t3_rows_are_stochastic_per_choice() {
    let sc = grid5();
    let ep = build_extended_product(&sc, false);
    let no = ep.num_observations;
    for t in 0..ep.len() {
        let (s, _, _) = ep.triple(t);
        if sc.is_decoy(s) {
            continue;
        }
        // fixing o' = identity picks one entry per successor state
        let mass: f64 = ep
            .successors(&sc, t)
            .iter()
            .filter(|&&(t2, _)| {
                let (s2, _, o2) = ep.triple(t2);
                o2 == sc.pomdp.obs_of[s2]
            })
            .map(|&(_, p)| p)
            .sum();
        assert!((mass - 1.0).abs() <= 1e-9);
        assert_eq!(ep.successors(&sc, t).len() % no, 0);
    }
}

#[test]
fn binary_count_matches_permitted_pairs() {
    let model = build_milp(&knapsack5(), &MilpOptions::default()).unwrap();
    assert_eq!(model.num_x(), 14);
    let toy_model = build_milp(&toy(), &MilpOptions::default()).unwrap();
    assert_eq!(toy_model.num_x(), 4);
    for &(from, to) in model.x_pairs() {
        assert!(knapsack5().cost_model.permitted(from, to));
    }
}

/// Counts from the construction rules, computed without the builder.
fn closed_form(sc: &Scenario) -> (usize, usize) {
    let (ns, nn, no) = (sc.pomdp.num_states(), sc.fsc.num_nodes(), sc.pomdp.num_observations());
    let nx = sc.cost_model.permitted_pairs();
    let nz = ns * nn * no;
    let mut nl = 0;
    for s in (0..ns).filter(|&s| !sc.is_decoy(s)) {
        let succ = (0..ns).filter(|&t| sc.pomdp.connected(s, t)).count();
        for (o, _) in sc.cost_model.images(sc.pomdp.obs_of[s]) {
            let nexts: BTreeSet<usize> = (0..nn).map(|n| sc.fsc.next(n, o)).collect();
            nl += succ * nexts.len() * no;
        }
    }
    let rows = 2 + no + nz + 3 * nl;
    (nx + nz + nl, rows)
}

#[test]
fn counts_match_closed_form() {
    for sc in [toy(), knapsack5(), grid5()] {
        let stats = count_stats(&build_milp(&sc, &MilpOptions::default()).unwrap());
        assert_eq!((stats.num_vars, stats.num_constraints), closed_form(&sc));
        assert_eq!(stats.num_vars, stats.num_x + stats.num_z + stats.num_l);
    }
    // knapsack(5): 9 identities + 5 item pairs; items and the club state are
    // the only non-decoy states with successors
    let stats = count_stats(&build_milp(&knapsack5(), &MilpOptions::default()).unwrap());
    assert_eq!(stats.num_z, 243);
}

#[test]
fn rows_enumerate_consistently() {
    let model = build_milp(&grid5(), &MilpOptions::default()).unwrap();
    assert_eq!(model.rows().count(), model.num_constraints());
    let names: BTreeSet<String> = model.rows().map(|r| model.row_name(r.kind)).collect();
    assert_eq!(names.len(), model.num_constraints());
    let vars: BTreeSet<String> = (0..model.num_vars()).map(|v| model.var_name(v)).collect();
    assert_eq!(vars.len(), model.num_vars());
}

#[test]
fn every_l_pair_is_connected() {
    let sc = grid5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    for l in model.l_vars() {
        let (s2, _, _) = model.product.triple(l.target);
        assert!(sc.pomdp.connected(l.state, s2));
        assert_eq!(model.kind(l.x), VarKind::X { from: sc.pomdp.obs_of[l.state], to: l.obs });
    }
}

#[test]
fn decoy_only_scenario_has_no_products() {
    let mut sc = toy();
    sc.decoy = vec![0, 1];
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    assert_eq!(model.num_l(), 0);
}

#[test]
fn decoy_initial_state_gives_one() {
    let mut sc = toy();
    sc.decoy = vec![0];
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let obj = model.objective();
    let in_decoy_row = model.rows().any(|r| matches!(r.kind, RowKind::Decoy { .. }) && r.terms.iter().any(|t| t.0 == obj));
    assert!(in_decoy_row);
    let sol = fix_and_solve(&model, &sc.identity()).unwrap();
    assert_eq!(sol.objective, 1.0);
    assert!(check_assignment(&model, &sol.values, 1e-9).is_empty());
}

#[test]
fn totality_rows_cover_every_observation() {
    let sc = knapsack5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let totals: Vec<usize> =
        model.rows().filter_map(|r| if let RowKind::Total { obs } = r.kind { Some(obs) } else { None }).collect();
    assert_eq!(totals, (0..sc.pomdp.num_observations()).collect::<Vec<_>>());
}

#[test]
fn double_image_violates_totality() {
    let sc = toy();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let mut values = fix_and_solve(&model, &sc.identity()).unwrap().values;
    values[model.x_var(1, 0).unwrap()] = 1.0;
    let bad = check_assignment(&model, &values, 1e-9);
    assert!(bad.iter().any(|b| b.starts_with("total__o1")), "{bad:?}");
}

#[test]
fn fix_and_solve_matches_verifier_on_grid() {
    let sc = grid5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let obs = sc.observations();
    for text in ["", "o1->o3", "o1->o5;o2->o0", "o1->o5;o2->o0;o6->o2", "o2->o6;o5->o1;o1->o2;o6->o3", "b->o2"] {
        let alt = if text.is_empty() { sc.identity() } else { Alteration::parse(text, obs).unwrap() };
        let sol = fix_and_solve(&model, &alt).unwrap();
        assert!((sol.objective - reach_value(&sc, &alt)).abs() <= 1e-9, "{text}");
        let sc_b = sc.with_budget(4.0);
        let m_b = build_milp(&sc_b, &MilpOptions::default()).unwrap();
        let sol_b = fix_and_solve(&m_b, &alt).unwrap();
        assert!(check_assignment(&m_b, &sol_b.values, 1e-9).is_empty(), "{text}");
        // gating: z never exceeds its x
        for (t, &(s, _, o)) in model.product.triples().iter().enumerate() {
            let x = model.x_var(sc.pomdp.obs_of[s], o).map_or(0.0, |v| sol.values[v]);
            assert!(sol.values[model.z_var(t)] <= x + 1e-12);
        }
    }
    let base = fix_and_solve(&model, &sc.identity()).unwrap().objective;
    assert!((base - 0.085).abs() <= 0.005);
}

#[test]
fn budget_row_rejects_expensive_alterations() {
    let sc = grid5().with_budget(0.0);
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let alt = Alteration::parse("o1->o3", sc.observations()).unwrap();
    let sol = fix_and_solve(&model, &alt).unwrap();
    let bad = check_assignment(&model, &sol.values, 1e-9);
    assert_eq!(bad.len(), 1);
    assert!(bad[0].starts_with("budget"));
}

#[test]
fn knapsack_fixed_values_and_dead_triples() {
    let sc = knapsack5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let alt = Alteration::parse("o1->oclub;o2->oclub;o4->oclub", sc.observations()).unwrap();
    let sol = fix_and_solve(&model, &alt).unwrap();
    assert!((sol.objective - 0.25).abs() <= 1e-12);
    assert!(check_assignment(&model, &sol.values, 1e-9).is_empty());
    let top = sc.pomdp.states.get("stop").unwrap();
    for (t, &(s, _, _)) in model.product.triples().iter().enumerate() {
        if s == top {
            assert_eq!(model.upper_bound(model.z_var(t)), 0.0);
        }
    }
}

#[test]
fn sparse_and_dense_models_agree() {
    let sc = gen_knapsack(&KnapsackInstance::new(vec![1.0, 1.0], vec![3.0, 1.0], 1.0, 2.0)).unwrap().scenario;
    let sparse = build_milp(&sc, &MilpOptions { sparse_l: true, prune_unreachable: false }).unwrap();
    let dense = build_milp(&sc, &MilpOptions { sparse_l: false, prune_unreachable: false }).unwrap();
    assert!(dense.num_l() > sparse.num_l());
    let mut best = (f64::MIN, f64::MIN);
    for alt in admissible_alterations(&sc) {
        if !alteration_cost(&sc.cost_model, &alt).within(sc.cost_model.budget) {
            continue;
        }
        let a = fix_and_solve(&sparse, &alt).unwrap();
        let b = fix_and_solve(&dense, &alt).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-12);
        assert!(check_assignment(&dense, &b.values, 1e-9).is_empty());
        best = (best.0.max(a.objective), best.1.max(b.objective));
    }
    assert_eq!(best.0, best.1);
    assert!((best.0 - 3.0 / 8.0).abs() <= 1e-12);
}

#[test]
fn pruning_keeps_fixed_values() {
    let sc = knapsack5();
    let full = build_milp(&sc, &MilpOptions::default()).unwrap();
    let pruned = build_milp(&sc, &MilpOptions { sparse_l: true, prune_unreachable: true }).unwrap();
    assert!(pruned.product.len() < full.product.len());
    let alt = Alteration::parse("o3->oclub;o4->oclub", sc.observations()).unwrap();
    let a = fix_and_solve(&full, &alt).unwrap().objective;
    let b = fix_and_solve(&pruned, &alt).unwrap().objective;
    assert!((a - b).abs() <= 1e-12);
    assert!(check_assignment(&pruned, &fix_and_solve(&pruned, &alt).unwrap().values, 1e-9).is_empty());
}

#[test]
fn forbidden_initial_identity_is_rejected() {
    let mut sc = toy();
    sc.cost_model.costs.remove(&(0, 0));
    assert!(matches!(build_milp(&sc, &MilpOptions::default()), Err(MilpError::InitialIdentityForbidden { .. })));
}

#[test]
fn fix_and_solve_rejects_forbidden_pairs() {
    let sc = knapsack5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let alt = Alteration::parse("oclub->o1", sc.observations()).unwrap();
    assert!(matches!(fix_and_solve(&model, &alt), Err(MilpError::ForbiddenPair { .. })));
}

#[test]
fn lp_sections_in_order_and_stable() {
    let model = build_milp(&toy(), &MilpOptions::default()).unwrap();
    let text = lp_text(&model);
    let pos: Vec<usize> = ["\nMaximize\n", "\nSubject To\n", "\nBounds\n", "\nBinary\n", "\nEnd\n"]
        .iter()
        .map(|h| text.find(h).unwrap_or_else(|| panic!("missing {h}")))
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(text, lp_text(&build_milp(&toy(), &MilpOptions::default()).unwrap()));
    assert!(text.contains(" budget: 1 x__o0__o1 + 1 x__o1__o0 <= 1\n"), "{text}");
    assert!(text.contains(" init_fix: 1 x__o0__o0 = 1\n"));
}

#[test]
fn lp_header_matches_stats() {
    let model = build_milp(&grid5(), &MilpOptions::default()).unwrap();
    let text = lp_text(&model);
    let stats = count_stats(&model);
    let header = format!("\\ vars: {} constraints: {}\n", stats.num_vars, stats.num_constraints);
    assert!(text.contains(&header));
    let body = &text[text.find("Subject To\n").unwrap() + 11..text.find("\nBounds\n").unwrap()];
    let rows = body.lines().filter(|l| l.starts_with(' ') && !l.starts_with("  ")).count();
    assert_eq!(rows, stats.num_constraints);
    assert!(text.lines().all(|l| l.len() <= 260));
}

#[test]
fn zero_budget_row_still_parses() {
    let mut sc = toy();
    sc.cost_model.costs.insert((0, 1), 0.0);
    sc.cost_model.costs.insert((1, 0), 0.0);
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    assert!(lp_text(&model).contains(" budget: 0 x__o0__o0 <= 1\n"));
}

#[test]
fn names_parse_back_to_ids() {
    let sc = knapsack5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    for v in 0..model.num_vars() {
        let (prefix, ids) = decompose_name(&model.var_name(v)).unwrap();
        match model.kind(v) {
            VarKind::X { from, to } => {
                assert_eq!(prefix, "x");
                assert_eq!(ids, vec![sc.observations().id(from), sc.observations().id(to)]);
            }
            VarKind::Z { triple } => {
                let (s, n, o) = model.product.triple(triple);
                assert_eq!(prefix, "z");
                assert_eq!(ids, vec![sc.pomdp.states.id(s), sc.fsc.nodes.id(n), sc.observations().id(o)]);
            }
            VarKind::L(_) => {
                assert_eq!(prefix, "l");
                assert_eq!(ids.len(), 5);
            }
        }
    }
}

#[test]
fn solution_round_trip() {
    let sc = grid5();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let alt = Alteration::parse("o1->o3", sc.observations()).unwrap();
    let sol = fix_and_solve(&model, &alt).unwrap();
    let text: String = (0..model.num_vars())
        .map(|v| format!("{} {}\n", model.var_name(v), format_number(sol.values[v])))
        .collect();
    let back = parse_solution(&model, &format!("# comment\n\n{text}")).unwrap();
    assert_eq!(back, sol.values);
    assert_eq!(model.decode_alteration(&back), Some(alt));
    assert!(matches!(parse_solution(&model, "nosuch 1\n"), Err(MilpError::Solution { line: 1, .. })));
    assert!(matches!(parse_solution(&model, "x__o0__o0\n"), Err(MilpError::Solution { .. })));
}

#[test]
fn external_command_plumbing() {
    let sc = toy();
    let model = build_milp(&sc, &MilpOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let canned = dir.path().join("canned.sol");
    let sol = fix_and_solve(&model, &sc.identity()).unwrap();
    let text: String = (0..model.num_vars()).map(|v| format!("{} {}\n", model.var_name(v), sol.values[v])).collect();
    std::fs::write(&canned, text).unwrap();
    let cmd = format!("test -s {{lp}} && cp '{}' {{sol}}", canned.display());
    let out = solve_external(&model, &cmd).unwrap();
    assert_eq!(out.objective, 1.0);
    assert_eq!(out.alteration, Some(sc.identity()));
    assert!(matches!(solve_external(&model, "exit 3"), Err(MilpError::Solver { .. })));
}
