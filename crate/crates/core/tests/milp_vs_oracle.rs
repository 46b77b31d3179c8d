use trp_core::milp::{build_problem1, decode, EncodingConfig, TransitionEncoding};
use trp_core::oracle::{best_path_bruteforce, OracleBudget};
use trp_core::random::{random_tasks, random_vwts, rng, FormulaParams, VwtsParams};
use trp_core::solver::{solve_milp, SolveOptions, SolveStatus};
use trp_core::vwts::{EdgeWeights, VwtsBuilder};
use trp_core::{Priority, RobustnessVariant, TaskSet, UntilMode};

const VARIANTS: [RobustnessVariant; 3] = [RobustnessVariant::Right, RobustnessVariant::Left, RobustnessVariant::Combined];

#[test]
fn random_instances_match_enumeration() {
    for seed in 0..12u64 {
        let mut r = rng(seed);
        let horizon = 8 + (seed % 8) as i64;
        let params = VwtsParams { states: 3 + (seed % 4) as usize, horizon, max_paths: Some(50_000), ..VwtsParams::default() };
        let ts = random_vwts(&mut r, &params);
        let fp = FormulaParams { depth: 1 + (seed % 3) as usize, ..FormulaParams::default() };
        let tasks = random_tasks(&mut r, &fp, 1 + (seed % 3) as usize, 3, horizon);
        let variant = VARIANTS[(seed % 3) as usize];
        let tprime = 3;
        let cfg = EncodingConfig::new(horizon, tprime).with_variant(variant);
        let problem = build_problem1(&ts, &tasks, &cfg).unwrap();
        let res = solve_milp(&problem.model, &SolveOptions::default(), None).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "seed {seed}");
        let dec = decode(&problem, &res.values, &ts, &tasks).expect("decode");
        let budget = OracleBudget::default();
        let best = best_path_bruteforce(&ts, &tasks, horizon, tprime, variant, UntilMode::Strict, &budget, None).unwrap();
        assert_eq!(dec.objective, best.objective, "seed {seed}");
    }
}

#[test]
fn closed_until_matches_too() {
    for seed in 100..104u64 {
        let mut r = rng(seed);
        let horizon = 9;
        let ts = random_vwts(&mut r, &VwtsParams { states: 4, horizon, max_paths: Some(20_000), ..VwtsParams::default() });
        let tasks = random_tasks(&mut r, &FormulaParams::default(), 2, 2, horizon);
        let mut cfg = EncodingConfig::new(horizon, 2);
        cfg.until_mode = UntilMode::Closed;
        let problem = build_problem1(&ts, &tasks, &cfg).unwrap();
        let res = solve_milp(&problem.model, &SolveOptions::default(), None).unwrap();
        let dec = decode(&problem, &res.values, &ts, &tasks).expect("decode");
        let budget = OracleBudget::default();
        let best =
            best_path_bruteforce(&ts, &tasks, horizon, 2, RobustnessVariant::Right, UntilMode::Closed, &budget, None)
                .unwrap();
        assert_eq!(dec.objective, best.objective, "seed {seed}");
    }
}

// The short route start -> c -> a arrives at a at t=3, while the direct edge
// start -> a would arrive at t=4. Staying at a at t=4 must not be mistaken
// for having taken the direct edge.
#[test]
fn later_visit_of_a_direct_arrival_stays_feasible() {
    let mut b = VwtsBuilder::new(6);
    let start = b.state("start", ["b"]);
    let a = b.state("a", ["a"]);
    let c = b.state("c", ["c"]);
    b.edge(start, c, EdgeWeights::constant(1));
    b.edge(c, a, EdgeWeights::constant(2));
    b.edge(start, a, EdgeWeights::constant(4));
    let ts = b.build().unwrap();
    let tasks = TaskSet::single(trp_core::mitl::parse("\"a\"").unwrap(), Priority::new(1, 1).unwrap());
    let solve = |transitions| {
        let mut cfg = EncodingConfig::new(6, 0).with_variant(RobustnessVariant::Left);
        cfg.transitions = transitions;
        let problem = build_problem1(&ts, &tasks, &cfg).unwrap();
        let res = solve_milp(&problem.model, &SolveOptions::default(), None).unwrap();
        decode(&problem, &res.values, &ts, &tasks).unwrap()
    };
    let best =
        best_path_bruteforce(&ts, &tasks, 6, 0, RobustnessVariant::Left, UntilMode::Strict, &OracleBudget::default(), None)
            .unwrap();
    let exact = solve(TransitionEncoding::EdgeSelect);
    assert_eq!(exact.objective, best.objective);
    assert_eq!(&exact.path.states()[..3], &[start, c, a]);
    let occupancy_only = solve(TransitionEncoding::OccupancyOnly);
    assert!(occupancy_only.objective < best.objective);
}
