use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use trp::cli::{run, Cli, RunConfig};
use trp::mps::{read_mps, write_mps, MpsFlavor};
use trp_core::milp::{build_problem1, EncodingConfig};
use trp_core::mitl::{characteristic, parse};
use trp_core::random::{random_tasks, random_vwts, rng, FormulaParams, VwtsParams};
use trp_core::{RobustnessVariant, TimedWord};

use clap::Parser;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).to_string_lossy().into_owned()
}

fn trp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_trp")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn config(args: &[&str]) -> RunConfig {
    let mut full = vec!["trp"];
    full.extend_from_slice(args);
    RunConfig::from_cli(Cli::try_parse_from(full).unwrap()).unwrap()
}

fn out_dir(dir: &tempfile::TempDir) -> String {
    dir.path().to_string_lossy().into_owned()
}

#[test]
fn office_plan_satisfies_the_office_task() {
    let dir = tempfile::tempdir().unwrap();
    let (env, tasks, out) = (data("office_env.json"), data("office_tasks.txt"), out_dir(&dir));
    let report = run(&config(&["plan-vwts", "--env", &env, "--tasks", &tasks, "--horizon", "14", "--out", &out])).unwrap();
    assert_eq!(report.code, 0);
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["status"], "Optimal");
    let entries: Vec<trp_core::mitl::WordEntry> = plan["word"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let labels: Vec<String> = serde_json::from_value(e["labels"].clone()).unwrap();
            trp_core::mitl::WordEntry::new(labels, e["t"].as_i64().unwrap())
        })
        .collect();
    let word = TimedWord::new(entries, 14).unwrap().with_prehistory(14);
    assert!(characteristic(&parse("F[0,12] \"off1\"").unwrap(), &word, 0).unwrap().is_pos());
    assert_eq!(plan["tasks"][0]["robustness"], 0);
    assert_eq!(plan["times"].as_array().unwrap()[..6], [0, 3, 4, 5, 6, 12].map(serde_json::Value::from));
}

#[test]
fn simulate_is_byte_reproducible() {
    let (mdp, tasks) = (data("office_mdp.json"), data("office_mdp_tasks.txt"));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (code, _, err) =
            trp(&["simulate", "--mdp", &mdp, "--tasks", &tasks, "--receding", "5", "--runs", "12", "--seed", "9", "--out", &out_dir(dir)]);
        assert_eq!(code, 0, "{err}");
    }
    let ta = std::fs::read(a.path().join("traces.jsonl")).unwrap();
    assert_eq!(ta, std::fs::read(b.path().join("traces.jsonl")).unwrap());
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 12);
}

#[test]
fn full_horizon_simulation_matches_the_expected_value() {
    let dir = tempfile::tempdir().unwrap();
    let (mdp, tasks) = (data("office_mdp.json"), data("office_mdp_tasks.txt"));
    let (code, stdout, err) = trp(&["plan-mdp", "--mdp", &mdp, "--tasks", &tasks, "--horizon", "8", "--out", &out_dir(&dir)]);
    assert_eq!(code, 0, "{err}");
    let strategy: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("strategy.json")).unwrap()).unwrap();
    let value = strategy["objective"].as_f64().unwrap();
    assert!(stdout.contains("expected robustness"));
    for h in strategy["strategy"].as_object().unwrap().values() {
        let total: f64 = h["actions"].as_object().unwrap().values().map(|p| p.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let (code, _, err) =
        trp(&["simulate", "--mdp", &mdp, "--tasks", &tasks, "--horizon", "8", "--runs", "4000", "--seed", "2", "--out", &out_dir(&dir)]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("traces.jsonl")).unwrap();
    let realized: Vec<f64> =
        text.lines().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["realized_f64"].as_f64().unwrap()).collect();
    let mean = realized.iter().sum::<f64>() / realized.len() as f64;
    let sd = (realized.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / realized.len() as f64).sqrt();
    assert!((mean - value).abs() <= 4.0 * sd / (realized.len() as f64).sqrt() + 1e-9, "{mean} vs {value}");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir);
    let (env, tasks, mdp) = (data("office_env.json"), data("office_tasks.txt"), data("office_mdp.json"));

    let (code, _, err) = trp(&["plan-vwts", "--tasks", &tasks, "--horizon", "5", "--out", &out]);
    assert_eq!(code, 1);
    assert!(err.contains("--env"));
    assert_eq!(trp(&["plan-mdp", "--mdp", &mdp, "--tasks", &tasks, "--horizon", "4", "--receding", "6", "--out", &out]).0, 1);
    assert_eq!(trp(&["plan-vwts", "--env", "/nonexistent.json", "--tasks", &tasks, "--horizon", "5", "--out", &out]).0, 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"states\": []").unwrap();
    assert_eq!(trp(&["plan-vwts", "--env", bad.to_str().unwrap(), "--tasks", &tasks, "--horizon", "5", "--out", &out]).0, 1);

    let infeasible = dir.path().join("infeasible.mps");
    std::fs::write(&infeasible, "NAME T\nROWS\n N OBJ\n G LOW\nCOLUMNS\n X OBJ 1 LOW 1\nRHS\n RHS LOW 5\nBOUNDS\n UP BND X 2\nENDATA\n").unwrap();
    assert_eq!(trp(&["solve-mps", "--input", infeasible.to_str().unwrap()]).0, 2);

    let (code, _, err) = trp(&["plan-mdp", "--mdp", &mdp, "--tasks", &tasks, "--cap", "10", "--out", &out]);
    assert_eq!(code, 3, "{err}");
    assert!(!err.is_empty());
    assert!(!dir.path().join("strategy.json").exists());

    let (code, _, err) = trp(&["plan-vwts", "--env", &env, "--tasks", &tasks, "--horizon", "12", "--out", &out]);
    assert_eq!(code, 1);
    assert!(err.contains("too small"), "{err}");
    assert_eq!(trp(&["plan-vwts", "--env", &env, "--tasks", &tasks, "--horizon", "13", "--out", &out]).0, 0);
}

#[test]
fn exported_model_solves_to_the_same_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let (env, tasks, out) = (data("office_env.json"), data("office_two_tasks.txt"), out_dir(&dir));
    let (code, stdout, _) = trp(&["plan-vwts", "--env", &env, "--tasks", &tasks, "--horizon", "13", "--mps", "--out", &out]);
    assert_eq!(code, 0);
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    let model = dir.path().join("model.mps");
    let (code, solved, _) = trp(&["solve-mps", "--input", model.to_str().unwrap()]);
    assert_eq!(code, 0);
    let objective: f64 = solved.lines().find_map(|l| l.strip_prefix("objective ")).unwrap().parse().unwrap();
    assert!((objective - plan["objective_f64"].as_f64().unwrap()).abs() < 1e-6, "{stdout} / {solved}");
}

#[test]
fn bench_and_plot_produce_csv_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir);
    let (code, stdout, err) = trp(&[
        "bench", "--kind", "vwts", "--states", "6", "--task-counts", "1,2", "--horizons", "10,20,40", "--no-solve", "--out", &out,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("monotone in T and |D|: true"), "{stdout}");
    let csv_path: PathBuf = dir.path().join("bench.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("kind,S,D,T,Tr,t_encoding,t_solving,lpvars,lpconst,status,objective,milp_calls"));
    assert_eq!(csv.lines().count(), 7);
    let rows = trp::bench::read_csv(csv.as_bytes()).unwrap();
    for d in [1, 2] {
        let vars: Vec<usize> = rows.iter().filter(|r| r.tasks == d).map(|r| r.lpvars).collect();
        assert!(vars.windows(2).all(|w| w[0] <= w[1]), "{vars:?}");
    }
    let (code, _, err) = trp(&["plot", "--input", csv_path.to_str().unwrap(), "--out", &out]);
    assert_eq!(code, 0, "{err}");
    for name in ["lpvars", "lpconst", "encoding", "solving"] {
        assert!(std::fs::read_to_string(dir.path().join(format!("{name}.svg"))).unwrap().contains("<polyline"));
    }
}

#[test]
fn oracle_check_reports_agreement() {
    let (code, stdout, err) = trp(&["oracle-check", "--count", "4", "--max-states", "4", "--max-horizon", "9", "--seed", "3"]);
    assert_eq!(code, 0, "{stdout}{err}");
    assert!(stdout.contains("milp-vs-enumeration: 4/4 agree"), "{stdout}");
    assert!(stdout.contains("robustness-vs-scan: 80/80 agree"), "{stdout}");
    assert!(stdout.contains("occupancy-vs-expectimax: 4/4 agree"), "{stdout}");
}

#[test]
fn receding_plan_reports_a_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (mdp, tasks) = (data("office_mdp.json"), data("office_mdp_tasks.txt"));
    let cfg = config(&["plan-receding", "--mdp", &mdp, "--tasks", &tasks, "--receding", "4", "--out", &out_dir(&dir)]);
    let report = run(&cfg).unwrap();
    assert!(report.summary.iter().any(|l| l.starts_with("worst-case lower bound")));
    let strategy: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("strategy.json")).unwrap()).unwrap();
    assert_eq!(strategy["cut"], 4);
    assert_eq!(strategy["mode"], "plan-receding");
}

#[test]
fn receding_rejects_other_variants() {
    let (mdp, tasks) = (data("office_mdp.json"), data("office_mdp_tasks.txt"));
    let cli = Cli::try_parse_from(["trp", "plan-receding", "--mdp", &mdp, "--tasks", &tasks, "--receding", "4", "--variant", "left"]).unwrap();
    assert_eq!(RunConfig::from_cli(cli).unwrap_err().exit_code(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_mps_roundtrip_is_exact(seed in any::<u64>(), v in 0usize..3) {
        let mut r = rng(seed);
        let ts = random_vwts(&mut r, &VwtsParams { states: 3, horizon: 8, ..VwtsParams::default() });
        let tasks = random_tasks(&mut r, &FormulaParams { depth: 2, atoms: 3, max_bound: 3, max_arity: 2 }, 2, 3, 8);
        let variant = [RobustnessVariant::Right, RobustnessVariant::Left, RobustnessVariant::Combined][v];
        let p = build_problem1(&ts, &tasks, &EncodingConfig::new(8, 2).with_variant(variant)).unwrap();
        let back = read_mps(&write_mps(&p.model, MpsFlavor::Free)).unwrap();
        prop_assert_eq!(back.num_vars(), p.model.num_vars());
        prop_assert_eq!(back.num_constraints(), p.model.num_constraints());
        prop_assert_eq!(back.sense, p.model.sense);
        prop_assert_eq!(&back.objective.terms, &p.model.objective.terms);
        for (a, b) in back.constraints.iter().zip(&p.model.constraints) {
            prop_assert_eq!((&a.terms, a.cmp, a.rhs), (&b.terms, b.cmp, b.rhs));
        }
        for (a, b) in back.vars.iter().zip(&p.model.vars) {
            prop_assert_eq!((a.kind, a.lower, a.upper), (b.kind, b.lower, b.upper));
        }
    }
}
