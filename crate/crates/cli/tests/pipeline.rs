use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use staylength::simgen::BookingSimSpec;
use staylength::YearMonth;
use staylength_cli::{parse_phases, parse_stages, run_pipeline, run_simulate, PipelineConfig, Stage, StageStatus};

fn small_spec() -> BookingSimSpec {
    BookingSimSpec {
        start: YearMonth { year: 2019, month: 1 },
        end: YearMonth { year: 2022, month: 12 },
        intensity: 400,
        seed: 11,
        ..BookingSimSpec::default()
    }
}

fn simulated_input(dir: &Path) -> PathBuf {
    let spec_path = dir.join("spec.txt");
    fs::write(&spec_path, small_spec().to_text()).unwrap();
    let input = dir.join("bookings.csv");
    run_simulate(Some(&spec_path), &input, None).unwrap();
    input
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_staylength"))
}

#[test]
fn full_run_emits_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let out = tmp.path().join("out");
    let mut cfg = PipelineConfig::new(&input, &out);
    cfg.stages = Stage::ALL.to_vec();
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.succeeded(), "{:?}", report.stages);
    assert_eq!(report.exit_code(), 0);
    for required in [
        "descriptives.csv",
        "monthly.csv",
        "density_fits.csv",
        "nb_irr.csv",
        "hurdle_impact.csv",
        "sarima_coef.csv",
        "sarima_acf.csv",
        "sarima_ljung_box.csv",
    ] {
        assert!(report.outputs.iter().any(|o| o == required), "missing {required}");
    }
    for o in &report.outputs {
        assert!(out.join(o).is_file(), "{o} listed but absent");
    }
    assert_eq!(files_in(&out).len(), report.outputs.len());
}

#[test]
fn descriptives_only_writes_two_files() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let out = tmp.path().join("out");
    let mut cfg = PipelineConfig::new(&input, &out);
    cfg.stages = vec![Stage::Descriptives];
    let report = run_pipeline(&cfg).unwrap();
    assert!(report.succeeded());
    assert_eq!(files_in(&out), vec!["descriptives.csv", "monthly.csv"]);
}

#[test]
fn json_format_writes_json_tables_but_csv_monthly_series() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let out = tmp.path().join("out");
    let mut cfg = PipelineConfig::new(&input, &out);
    cfg.stages = vec![Stage::Descriptives];
    cfg.format = "json".parse().unwrap();
    run_pipeline(&cfg).unwrap();
    assert_eq!(files_in(&out), vec!["descriptives.json", "monthly.csv"]);
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("descriptives.json")).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let cfg = PipelineConfig::new(&input, &out);
        assert!(run_pipeline(&cfg).unwrap().succeeded());
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(files_in(&a), files_in(&b));
    for f in files_in(&a) {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f} differs");
    }
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let out = tmp.path().join("out");
    let mut cfg = PipelineConfig::new(&input, &out);
    cfg.cap = 20;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.kind.exit_code(), 1);
    assert!(!out.exists());
}

#[test]
fn stage_and_phase_parsing() {
    assert_eq!(parse_stages("fit-sarima,descriptives").unwrap(), vec![Stage::Descriptives, Stage::FitSarima]);
    assert!(parse_stages("fit-everything").is_err());
    let b = parse_phases("pre_end=2020-01-31,restr_end=2020-12-31").unwrap();
    assert_eq!(b.pre_end.to_string(), "2020-01-31");
    assert!(parse_phases("pre_end=2021-01-31,restr_end=2020-12-31").is_err());
    assert!(parse_phases("start=2020-01-01").is_err());
}

#[test]
fn failure_halts_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("short.csv");
    let mut rows = String::from("nights,weight,created_date\n");
    for m in 1..=12 {
        for y in [2019, 2020, 2021] {
            rows.push_str(&format!("{},3,{y}-{m:02}-10\n", 2 + m % 5));
        }
    }
    fs::write(&input, rows).unwrap();
    let out = tmp.path().join("out");
    let mut cfg = PipelineConfig::new(&input, &out);
    cfg.stages = vec![Stage::Descriptives, Stage::FitHurdle, Stage::FitSarima];
    let report = run_pipeline(&cfg).unwrap();
    let status: Vec<_> = report.stages.iter().map(|s| s.status).collect();
    assert_eq!(status, vec![StageStatus::Ok, StageStatus::Failed, StageStatus::Skipped]);
    assert_eq!(report.exit_code(), 3);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = simulated_input(tmp.path());
    let out = tmp.path().join("out");

    let ok = bin().args(["descriptives", "--input"]).arg(&input).arg("--out").arg(&out).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(summary["stages"][0]["status"], "ok");

    let monthly = out.join("monthly.csv");
    let sarima = bin().args(["fit-sarima", "--input"]).arg(&monthly).arg("--out").arg(&out).output().unwrap();
    assert_eq!(sarima.status.code(), Some(0), "{}", String::from_utf8_lossy(&sarima.stderr));
    assert!(out.join("sarima_coef.csv").is_file());

    let usage = bin().args(["fit-nb", "--input"]).arg(&input).arg("--out").arg(&out).args(["--format", "xml"]).output();
    assert_eq!(usage.unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "nights,weight,created_date\nseven,1,2020-01-01\n").unwrap();
    let data = bin().args(["descriptives", "--input"]).arg(&bad).arg("--out").arg(tmp.path().join("o2")).output();
    assert_eq!(data.unwrap().status.code(), Some(2));
}

#[test]
fn simulate_subcommand_respects_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.txt");
    fs::write(&spec, small_spec().to_text()).unwrap();
    let draw = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let st = bin().args(["simulate", "--spec"]).arg(&spec).arg("--out").arg(&out).args(["--seed", seed]).status();
        assert!(st.unwrap().success());
        fs::read(out).unwrap()
    };
    assert_eq!(draw("a.csv", "5"), draw("b.csv", "5"));
    assert_ne!(draw("a.csv", "5"), draw("c.csv", "6"));
}
