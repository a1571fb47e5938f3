use permsel_core::runner::{self, ExperimentConfig};

const CONFIG: &str = r#"
seeds = [7, 8, 9]
k_values = [2, "N1", "N2"]
output_dir = "results"

[learner]
n_trees = 8

[[datasets]]
name = "cls"
path = "cls.csv"
task = "classification"

[[methods]]
kind = "psefs-v1"
population_size = 8
generations = 4

[[methods]]
kind = "psefs-v2"
population_size = 8
generations = 4

[[methods]]
kind = "infogain"
bins = 5

[[methods]]
kind = "all"
"#;

fn write_fixture(dir: &std::path::Path) {
    let mut text = String::from("a,b,c,d,label\n");
    for i in 0..60 {
        let a = (i % 7) as f64;
        let b = ((i * 13) % 11) as f64 / 3.0;
        let label = if a + b > 5.0 { "hi" } else { "lo" };
        text.push_str(&format!("{a},{b},{},{},{label}\n", (i * 5) % 3, i % 2));
    }
    std::fs::write(dir.join("cls.csv"), text).unwrap();
    std::fs::write(dir.join("exp.toml"), CONFIG).unwrap();
}

#[test]
fn outputs_round_trip_and_isolate_test_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let cfg = ExperimentConfig::load(dir.path().join("exp.toml")).unwrap();
    assert_eq!(cfg.output_dir, dir.path().join("results"));
    let outcome = runner::run_experiment(&cfg).unwrap();
    // Per seed: two searches, infogain at 2, N1 and N2, all.
    assert_eq!(outcome.rows.len(), 3 * 6);
    assert!(outcome.rows.iter().all(|r| r.is_ok()), "{:#?}", outcome.rows);
    assert_eq!(outcome.audits.len(), 3);
    assert!(outcome.audits.iter().all(|a| a.test_row_reads == 0 && a.selection_row_reads > 0));
    for seed in [7, 8, 9] {
        let count = |label: &str| {
            outcome.rows.iter().find(|r| r.seed == seed && r.label() == label).unwrap().selected_count
        };
        assert_eq!(count("infogain@N1"), count("psefs-v1"));
        assert_eq!(count("infogain@N2"), count("psefs-v2"));
    }

    runner::write_outcome(&outcome, &cfg.output_dir).unwrap();
    let back = runner::read_reports(&cfg.output_dir).unwrap();
    assert_eq!(back, outcome.rows);
    for file in ["means.csv", "pairwise.csv", "overfitting.csv", "runtimes.csv", "cardinality.csv", "ranking_acc.csv"] {
        assert!(cfg.output_dir.join("summary").join(file).exists(), "{file}");
    }
    let traces = std::fs::read_dir(cfg.output_dir.join("traces")).unwrap().count();
    assert_eq!(traces, 6);
}
