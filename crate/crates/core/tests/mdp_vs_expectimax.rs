use trp_core::mdp::{
    build_occupancy_lp, extract_strategy, flow_residual, history_rewards, occupancy_from_strategy, occupancy_gap,
    solve_occupancy, HistoryTree, RewardConfig,
};
use trp_core::oracle::{expectimax_mdp, OracleBudget};
use trp_core::random::{random_mdp, random_tasks, rng, FormulaParams, MdpParams};
use trp_core::mitl::score_to_f64;
use trp_core::solver::SolveOptions;
use trp_core::{RobustnessVariant, UntilMode};

#[test]
fn occupancy_lp_matches_expectimax() {
    for seed in 0..30u64 {
        let mut r = rng(1000 + seed);
        let horizon = 4 + (seed % 5) as i64;
        let p = MdpParams { states: 2 + (seed % 3) as usize, horizon, max_histories: 4000, ..MdpParams::default() };
        let mdp = random_mdp(&mut r, &p);
        let fp = FormulaParams { depth: 1 + (seed % 3) as usize, atoms: 2, max_bound: 3, ..FormulaParams::default() };
        let tasks = random_tasks(&mut r, &fp, 1 + (seed % 2) as usize, 3, horizon);
        let variant = [RobustnessVariant::Right, RobustnessVariant::Left, RobustnessVariant::Combined][(seed % 3) as usize];
        let cfg = RewardConfig::new(variant, 2);
        let tree = HistoryTree::build(&mdp, &[(0, 0)], horizon, 100_000).unwrap();
        let rewards: Vec<f64> = history_rewards(&mdp, &tree, &tasks, &cfg).unwrap().iter().map(score_to_f64).collect();
        let lp = build_occupancy_lp(&tree, &rewards);
        let sol = solve_occupancy(&lp, &SolveOptions::default()).unwrap();
        let oracle = expectimax_mdp(&mdp, &tasks, 2, variant, UntilMode::Strict, &OracleBudget::default(), None).unwrap();
        let strategy = extract_strategy(&tree, &lp, &sol.values);
        let replay = occupancy_from_strategy(&tree, &lp, &strategy).unwrap();
        assert!((sol.objective - oracle).abs() <= 1e-6, "seed {seed}");
        assert!(flow_residual(&lp, &sol.values) <= 1e-9, "seed {seed}");
        assert!(occupancy_gap(&replay, &sol.values) <= 1e-9, "seed {seed}");
    }
}
