use proptest::prelude::*;
use rand::Rng;
use trp_core::mdp::{forward_probabilities, history_rewards, sample_leaf, HistoryTree, RewardConfig, Strategy};
use trp_core::milp::{build_problem1, EncodingConfig};
use trp_core::mitl::{characteristic_with, parse, robustness_with, Formula, Task, TaskSet};
use trp_core::oracle::{enumerate_paths, shift_scan_robustness, OracleBudget};
use trp_core::random::{random_formula, random_mdp, random_tasks, random_vwts, random_word, rng, FormulaParams, MdpParams, VwtsParams};
use trp_core::receding::{pin_prefix, worst_case_vwts};
use trp_core::solver::{solve_milp, SolveOptions};
use trp_core::{Path, RobustnessVariant, Time, UntilMode};

const VARIANTS: [RobustnessVariant; 3] = [RobustnessVariant::Right, RobustnessVariant::Left, RobustnessVariant::Combined];
const MODES: [UntilMode; 2] = [UntilMode::Strict, UntilMode::Closed];

fn formula_and_word(seed: u64) -> (Formula, trp_core::TimedWord) {
    let mut r = rng(seed);
    let f = random_formula(&mut r, &FormulaParams { depth: 3, atoms: 3, max_bound: 5, max_arity: 3 });
    let w = random_word(&mut r, 3, 14, 3);
    (f, w)
}

fn chi(f: &Formula, w: &trp_core::TimedWord, t: Time, mode: UntilMode) -> i64 {
    characteristic_with(f, w, t, mode).unwrap().value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn negation_flips_the_characteristic(seed in any::<u64>(), t in -3i64..=14, m in 0usize..2) {
        let (f, w) = formula_and_word(seed);
        let neg = Formula::not(f.clone());
        prop_assert_eq!(chi(&neg, &w, t, MODES[m]), -chi(&f, &w, t, MODES[m]));
    }

    #[test]
    fn eventually_is_dual_to_globally(seed in any::<u64>(), t in -3i64..=14, lo in 0u32..4, len in 0u32..4) {
        let (f, w) = formula_and_word(seed);
        let ev = Formula::eventually(lo, lo + len, f.clone()).unwrap();
        let dual = Formula::not(Formula::globally(lo, lo + len, Formula::not(f)).unwrap());
        prop_assert_eq!(chi(&ev, &w, t, UntilMode::Strict), chi(&dual, &w, t, UntilMode::Strict));
    }

    #[test]
    fn robustness_sign_matches_satisfaction(seed in any::<u64>(), t in -3i64..=14, v in 0usize..3, m in 0usize..2) {
        let (f, w) = formula_and_word(seed);
        let eta = robustness_with(&f, &w, t, VARIANTS[v], MODES[m]).unwrap();
        if eta != 0 {
            prop_assert_eq!(eta.signum(), chi(&f, &w, t, MODES[m]));
        }
    }

    #[test]
    fn left_robustness_is_a_sound_forward_shift(seed in any::<u64>(), t in -3i64..=14) {
        let (f, w) = formula_and_word(seed);
        let k = robustness_with(&f, &w, t, RobustnessVariant::Left, UntilMode::Strict).unwrap();
        let here = chi(&f, &w, t, UntilMode::Strict);
        for u in t..=t + k.abs() {
            prop_assert_eq!(chi(&f, &w, u, UntilMode::Strict), here);
        }
    }

    #[test]
    fn combined_is_the_smaller_one_sided_shift(seed in any::<u64>(), t in -3i64..=14, m in 0usize..2) {
        let (f, w) = formula_and_word(seed);
        let mode = MODES[m];
        let right = robustness_with(&f, &w, t, RobustnessVariant::Right, mode).unwrap();
        let left = robustness_with(&f, &w, t, RobustnessVariant::Left, mode).unwrap();
        let both = robustness_with(&f, &w, t, RobustnessVariant::Combined, mode).unwrap();
        prop_assert_eq!(both.abs(), right.abs().min(left.abs()));
        prop_assert_eq!(both, shift_scan_robustness(&f, &w, t, RobustnessVariant::Combined, mode).unwrap());
    }

    #[test]
    fn longer_prehistory_never_shrinks_right_robustness(seed in any::<u64>(), k in 0i64..6) {
        let mut r = rng(seed);
        let f = random_formula(&mut r, &FormulaParams { depth: 3, atoms: 2, max_bound: 4, max_arity: 2 });
        let w = random_word(&mut r, 2, 12, 0);
        let short = robustness_with(&f, &w.clone().with_prehistory(k), 0, RobustnessVariant::Right, UntilMode::Strict).unwrap();
        let long = robustness_with(&f, &w.with_prehistory(k + 1), 0, RobustnessVariant::Right, UntilMode::Strict).unwrap();
        prop_assert!(long.abs() >= short.abs());
        prop_assert!(short == 0 || long.signum() == short.signum());
    }

    #[test]
    fn printed_formulas_parse_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_formula(&mut r, &FormulaParams { depth: 8, atoms: 4, max_bound: 100, max_arity: 3 });
        let text = f.to_string();
        prop_assert_eq!(parse(&text).unwrap(), f);
    }

    #[test]
    fn trailing_garbage_is_rejected(seed in any::<u64>(), tail in prop::sample::select(vec![")", "&", "| |", "G[1]", "\"a", "[0,1]", "U", "!"])) {
        let mut r = rng(seed);
        let f = random_formula(&mut r, &FormulaParams { depth: 4, atoms: 3, max_bound: 20, max_arity: 3 });
        let text = format!("{f} {tail}");
        prop_assert!(parse(&text).is_err(), "{text}");
    }
}

fn random_path(ts: &trp_core::Vwts, horizon: Time, r: &mut impl Rng) -> Path {
    let mut states = vec![ts.initial()];
    let mut t = 0;
    loop {
        let s = *states.last().unwrap();
        let options: Vec<_> = ts
            .out_edges(s)
            .iter()
            .filter_map(|&e| ts.edge_weight(e, t).map(|w| (ts.edges()[e].to, t + w as Time)))
            .filter(|&(_, arr)| arr <= horizon)
            .collect();
        if options.is_empty() || r.random_bool(0.1) {
            break;
        }
        let (to, arr) = options[r.random_range(0..options.len())];
        states.push(to);
        t = arr;
    }
    Path::new(ts, states).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn time_sequences_increase_and_align_with_words(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ts = random_vwts(&mut r, &VwtsParams { states: 5, horizon: 20, max_paths: None, ..VwtsParams::default() });
        let path = random_path(&ts, 20, &mut r);
        let times = ts.time_sequence(&path, 20).unwrap();
        prop_assert!(times.as_slice().windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(times.as_slice()[0], 0);
        let word = ts.timed_word(&path, 20).unwrap();
        let word_times: Vec<Time> = word.entries().iter().map(|e| e.time).collect();
        prop_assert_eq!(word_times.as_slice(), times.as_slice());
        for (e, &s) in word.entries().iter().zip(path.states()) {
            prop_assert_eq!(&e.labels, ts.labels(s));
        }
        prop_assert_eq!(ts.timed_word(&path, 20).unwrap(), word);
    }

    #[test]
    fn forward_mass_is_conserved_for_random_strategies(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &MdpParams { states: 3, horizon: 6, ..MdpParams::default() });
        let tree = HistoryTree::build(&mdp, &[(mdp.initial(), 0)], mdp.horizon(), 50_000).unwrap();
        let probs = tree
            .nodes()
            .iter()
            .map(|n| {
                let w: Vec<f64> = (0..n.actions.len()).map(|_| r.random_range(0.0..1.0) + 1e-3).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let strategy = Strategy { probs };
        let reach = forward_probabilities(&tree, &strategy).unwrap();
        let mass: f64 = tree.leaves().map(|l| reach[l]).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9, "{mass}");
    }

    #[test]
    fn rewards_ignore_task_order(seed in any::<u64>(), v in 0usize..3) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &MdpParams { states: 3, horizon: 5, ..MdpParams::default() });
        let tasks = random_tasks(&mut r, &FormulaParams { depth: 2, atoms: 2, max_bound: 3, max_arity: 2 }, 3, 4, 5);
        let mut reversed: Vec<Task> = tasks.tasks().to_vec();
        reversed.reverse();
        let reversed = TaskSet::new(reversed).unwrap();
        let tree = HistoryTree::build(&mdp, &[(mdp.initial(), 0)], mdp.horizon(), 50_000).unwrap();
        let cfg = RewardConfig::new(VARIANTS[v], 2);
        prop_assert_eq!(
            history_rewards(&mdp, &tree, &tasks, &cfg).unwrap(),
            history_rewards(&mdp, &tree, &reversed, &cfg).unwrap()
        );
    }

    #[test]
    fn worst_case_weights_dominate_every_delay(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &MdpParams { states: 4, horizon: 8, ..MdpParams::default() });
        let w = worst_case_vwts(&mdp).unwrap();
        for (e, edge) in mdp.edges().iter().enumerate() {
            for t in 0..mdp.horizon() {
                let we = w.edge_index(edge.from, edge.to).unwrap();
                for o in mdp.outcomes(e, t) {
                    prop_assert!(w.edge_weight(we, t).unwrap() >= o.dt);
                }
            }
        }
    }

    #[test]
    fn pinned_systems_only_replay_the_prefix(seed in any::<u64>(), tr in 1i64..6) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, &MdpParams { states: 3, horizon: 8, ..MdpParams::default() });
        let tree = HistoryTree::build(&mdp, &[(mdp.initial(), 0)], mdp.horizon(), 50_000).unwrap();
        let leaf = sample_leaf(&tree, &Strategy::uniform(&tree), &mut r);
        let trace = tree.trace(leaf);
        let pinned = pin_prefix(&worst_case_vwts(&mdp).unwrap(), &trace, tr).unwrap();
        let mut seen = 0;
        enumerate_paths(&pinned, tr, &OracleBudget::default(), |states, times| {
            seen += 1;
            for (k, (&s, &t)) in states.iter().zip(times).enumerate() {
                assert_eq!((s, t), trace[k], "path {states:?} {times:?} leaves {trace:?}");
            }
            Ok(())
        })
        .unwrap();
        let expected = trace.iter().filter(|&&(_, t)| t <= tr).count();
        prop_assert_eq!(seen, expected);
    }
}

#[test]
fn solver_is_deterministic_on_identical_models() {
    let mut r = rng(77);
    let ts = random_vwts(&mut r, &VwtsParams { states: 4, horizon: 10, ..VwtsParams::default() });
    let tasks = random_tasks(&mut r, &FormulaParams { depth: 2, atoms: 3, max_bound: 3, max_arity: 2 }, 2, 3, 10);
    let cfg = EncodingConfig::new(10, 2);
    let a = build_problem1(&ts, &tasks, &cfg).unwrap();
    let b = build_problem1(&ts, &tasks, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    let ra = solve_milp(&a.model, &SolveOptions::default(), None).unwrap();
    let rb = solve_milp(&b.model, &SolveOptions::default(), None).unwrap();
    assert_eq!((ra.status, ra.objective, ra.nodes), (rb.status, rb.objective, rb.nodes));
}

#[test]
fn model_size_grows_with_horizon_and_tasks() {
    let mut r = rng(8);
    let ts = random_vwts(&mut r, &VwtsParams { states: 5, horizon: 60, max_paths: None, ..VwtsParams::default() });
    let all = random_tasks(&mut r, &FormulaParams { depth: 2, atoms: 3, max_bound: 4, max_arity: 2 }, 4, 3, 12);
    let mut last = (0, 0);
    for horizon in [15, 30, 45, 60] {
        let p = build_problem1(&ts, &all, &EncodingConfig::new(horizon, 3)).unwrap();
        let size = (p.model.num_vars(), p.model.num_constraints());
        assert!(size.0 > last.0 && size.1 > last.1, "{horizon}: {size:?} after {last:?}");
        last = size;
    }
    let mut last = (0, 0);
    for k in 1..=all.len() {
        let tasks = TaskSet::new(all.tasks()[..k].to_vec()).unwrap();
        let p = build_problem1(&ts, &tasks, &EncodingConfig::new(30, 3)).unwrap();
        let size = (p.model.num_vars(), p.model.num_constraints());
        assert!(size.0 >= last.0 && size.1 >= last.1);
        last = size;
    }
}
