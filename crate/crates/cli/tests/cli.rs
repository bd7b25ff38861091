use std::path::Path;
use std::process::{Command, Output};

fn flowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcast")).args(args).output().expect("binary runs")
}

fn synth(dir: &Path, years: &str, pois: &str, seed: &str) -> Output {
    flowcast(&["--data", dir.to_str().unwrap(), "synth", "--seed", seed, "--years", years, "--pois", pois])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = synth(d, "2017:2019", "32", "7");
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("entries.csv"));
    }
    for f in ["entries.csv", "weather.csv", "holidays.csv", "manifest.txt"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=7\n") && manifest.contains("years=2017:2019\n"));
}

#[test]
fn existing_outputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(synth(tmp.path(), "2019:2019", "2", "1").status.success());
    let again = synth(tmp.path(), "2019:2019", "2", "1");
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    let forced = flowcast(&["--data", tmp.path().to_str().unwrap(), "--force", "synth", "--years", "2019:2019", "--pois", "2"]);
    assert!(forced.status.success());
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(flowcast(&["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(flowcast(&["synth", "--years", "2019"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let o = flowcast(&["--data", tmp.path().to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "fit-arima"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("entries.csv"));
}

#[test]
fn compare_without_grid_names_the_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let o = flowcast(&["--data", tmp.path().to_str().unwrap(), "--out", out.to_str().unwrap(), "compare"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ledger.csv"), "{}", stderr(&o));
}

#[test]
fn fit_arima_writes_one_row_per_poi() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("runs");
    assert!(synth(&data, "2018:2019", "32", "7").status.success());
    let o = flowcast(&["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "fit-arima"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("arima_orders.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 32);
    let names: std::collections::HashSet<_> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names.len(), 32);
}

#[test]
fn train_writes_checkpoint_ledger_and_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("runs");
    assert!(synth(&data, "2018:2019", "2", "3").status.success());
    let cfg = tmp.path().join("quick.cfg");
    std::fs::write(&cfg, "epochs=1\ntrain_stride=40\nhidden_size=8\n").unwrap();
    let args = ["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--config", cfg.to_str().unwrap()];
    let o = flowcast(&[&args[..], &["train", "--model", "gru_d"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let said = stdout(&o);
    assert!(said.contains(".ckpt") && said.contains("ledger.csv") && said.contains("predictions_"));
    let ledger = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 2);
    assert!(ledger.lines().nth(1).unwrap().starts_with("gru_d,mse,8,true,visitors,0,"));
    let again = flowcast(&[&args[..], &["train", "--model", "gru_d"]].concat());
    assert_eq!(again.status.code(), Some(2));
    let unknown = flowcast(&[&args[..], &["train", "--model", "transformer"]].concat());
    assert_eq!(unknown.status.code(), Some(2));
}

fn write_predictions(path: &Path, models: &[&str], truth: impl Fn(usize) -> f64) {
    let mut s = String::from("model,poi,timestamp,y_true,y_pred\n");
    for m in models {
        for h in 0..24 {
            s.push_str(&format!("{m},poi_00,2019-05-01T{h:02}:00:00,{},{}\n", truth(h), h as f64 * 0.5));
            s.push_str(&format!("{m},poi_01,2019-05-01T{h:02}:00:00,1,1\n"));
        }
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn plot_draws_truth_and_each_model() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("p.csv");
    write_predictions(&csv, &["lstm", "gru_d", "arima"], |h| h as f64);
    let svg = tmp.path().join("plot.svg");
    let o = flowcast(&["plot", "--predictions", csv.to_str().unwrap(), "--poi", "poi_00", "--svg", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 4);
    for label in ["truth", "lstm", "gru_d", "arima"] {
        assert!(text.contains(&format!(">{label}</text>")));
    }
}

#[test]
fn plot_of_all_zero_truth_is_flat_on_the_axis() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("p.csv");
    write_predictions(&csv, &["lstm"], |_| 0.0);
    let svg = tmp.path().join("plot.svg");
    let o = flowcast(&[
        "plot", "--predictions", csv.to_str().unwrap(), "--poi", "poi_00", "--from", "2019-05-01T00:00:00", "--to",
        "2019-05-01T05:00:00", "--svg", svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    let truth = text.lines().find(|l| l.contains("<polyline") && l.contains("<title>truth")).unwrap();
    let points = truth.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: std::collections::HashSet<&str> = points.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert_eq!(ys.len(), 1, "{points}");
    assert_eq!(points.split(' ').count(), 6);
}

#[test]
fn plot_rejects_unknown_poi_and_empty_range() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("p.csv");
    write_predictions(&csv, &["lstm"], |h| h as f64);
    let svg = tmp.path().join("plot.svg");
    let base = ["plot", "--predictions", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()];
    let o = flowcast(&[&base[..], &["--poi", "poi_99"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("poi_99"));
    let o = flowcast(&[&base[..], &["--poi", "poi_00", "--from", "2020-01-01T00:00:00"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(!svg.exists());
}

#[test]
fn grid_then_compare_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("runs");
    assert!(synth(&data, "2018:2019", "2", "5").status.success());
    let cfg = tmp.path().join("tiny.cfg");
    std::fs::write(
        &cfg,
        "epochs=1\ntrain_stride=60\ngrid_sizes=8\ngrid_seeds=1\ngrid_losses=mse\ngrid_normalize=true\narima_latency_steps=3\n",
    )
    .unwrap();
    let args = ["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--config", cfg.to_str().unwrap()];
    let run = |extra: &[&str]| flowcast(&[&args[..], extra].concat());

    let o = run(&["grid"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ledger = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().count(), 1 + 14);

    let early = run(&["compare"]);
    assert_eq!(early.status.code(), Some(2));
    assert!(stderr(&early).contains("arima_orders.csv"));

    assert!(run(&["fit-arima"]).status.success());
    let o = run(&["compare"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,cells,params,train_min,predict_ms,mae_vis,rmse_vis,mae_ext,rmse_ext");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("ARIMA,,") && lines[1].ends_with(",,"));
    assert!(lines[2].starts_with("ANODE,8,") && lines[8].starts_with("GRU-D,8,"));

    let preds = out.join("predictions.csv");
    let svg = tmp.path().join("fig.svg");
    let o = flowcast(&[
        "plot", "--predictions", preds.to_str().unwrap(), "--poi", "poi_01", "--from", "2019-07-01T00:00:00", "--to",
        "2019-07-03T23:00:00", "--svg", svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // truth, arima, seasonal naive and seven recurrent models
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 10);

    // A second grid call finds every cell in the ledger.
    assert!(run(&["grid"]).status.success());
    assert_eq!(std::fs::read_to_string(out.join("ledger.csv")).unwrap(), ledger);
}
