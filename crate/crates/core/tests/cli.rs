use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use haptex::evalstats::{default_labels, trials_csv, TrialRecord};

fn haptex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haptex")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let fx = root.join("fx");
    assert!(haptex(&["gen-fixtures", "--out", s(&fx)]).status.success());
    Workspace { config: fx.join("config.toml"), root, _dir: dir }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn single_texture_render_is_repeatable() {
    let ws = workspace();
    let out = ws.root.join("r");
    let o = haptex(&["render", "--config", s(&ws.config), "--texture", "rough_foam", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["pressure.csv", "thermal.csv", "roughness.csv"] {
        assert!(out.join("rough_foam").join(f).is_file(), "{f}");
    }
    assert!(!out.join("rough_metal").exists());
    let first = fs::read(out.join("rough_foam/commands.toml")).unwrap();
    assert!(haptex(&["render", "--config", s(&ws.config), "--texture", "rough_foam", "--out", s(&out)]).status.success());
    assert_eq!(fs::read(out.join("rough_foam/commands.toml")).unwrap(), first);

    // Selection does not change a texture's output.
    let all = ws.root.join("all");
    assert!(haptex(&["render", "--config", s(&ws.config), "--all", "--out", s(&all)]).status.success());
    assert_eq!(fs::read(all.join("rough_foam/commands.toml")).unwrap(), first);
}

#[test]
fn render_all_writes_eighteen_signal_files_and_summary() {
    let ws = workspace();
    let out = ws.root.join("r");
    assert!(haptex(&["render", "--config", s(&ws.config), "--all", "--out", s(&out)]).status.success());
    let listing = fs::read_to_string(out.join("outputs.txt")).unwrap();
    let signals = listing
        .lines()
        .filter(|l| ["pressure.csv", "thermal.csv", "roughness.csv"].iter().any(|f| l.ends_with(&format!("/{f}"))))
        .count();
    assert_eq!(signals, 18);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
}

#[test]
fn corrupted_manifest_exits_with_ingestion_code() {
    let ws = workspace();
    fs::write(ws.root.join("fx/fixtures/fabric/manifest.toml"), "name = [\n").unwrap();
    let o = haptex(&["render", "--config", s(&ws.config), "--all", "--out", s(&ws.root.join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("error[ingestion]"), "{}", stderr(&o));
}

#[test]
fn config_problems_exit_2() {
    let ws = workspace();
    let o = haptex(&["render", "--config", s(&ws.root.join("missing.toml")), "--all", "--out", s(&ws.root.join("r"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = haptex(&["render", "--config", s(&ws.config), "--out", s(&ws.root.join("r"))]);
    assert_eq!(o.status.code(), Some(2), "selector is required");
    let bad = ws.root.join("fx/bad.toml");
    fs::write(&bad, "[roughness]\nkernel_px = 4\n").unwrap();
    assert_eq!(haptex(&["render", "--config", s(&bad), "--all", "--out", s(&ws.root.join("r"))]).status.code(), Some(2));
}

#[test]
fn simulate_writes_logs_and_events_in_order() {
    let ws = workspace();
    let (r, sim) = (ws.root.join("r"), ws.root.join("sim"));
    assert!(haptex(&["render", "--config", s(&ws.config), "--texture", "rough_metal", "--out", s(&r)]).status.success());
    let o = haptex(&["simulate", "--config", s(&ws.config), "--commands", s(&r), "--texture", "rough_metal", "--out", s(&sim)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("press tracking max"));
    let events: serde_json::Value = serde_json::from_str(&fs::read_to_string(sim.join("rough_metal/events.json")).unwrap()).unwrap();
    let names: Vec<&str> = events["events"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    let pos = |n: &str| names.iter().position(|x| *x == n).unwrap();
    assert!(pos("slide_start") < pos("prepare_start"));
    assert!(pos("prepare_start") < pos("prepare_done"));
    assert!(pos("prepare_done") < pos("press_start"));
    assert!(pos("press_start") < pos("lift_start"));
    let csv = fs::read_to_string(sim.join("rough_metal/session.csv")).unwrap();
    assert!(csv.starts_with("time_s,phase,chamber_kpa"));
}

#[test]
fn unreachable_start_temperature_exits_5() {
    let ws = workspace();
    let r = ws.root.join("r");
    assert!(haptex(&["render", "--config", s(&ws.config), "--texture", "smooth_foam", "--out", s(&r)]).status.success());
    let path = r.join("smooth_foam/commands.toml");
    let text = fs::read_to_string(&path).unwrap();
    // Constant term 44 °C: the command starts above the hot tank.
    let start = text.find("coeffs = [").unwrap() + "coeffs = [".len();
    let end = start + text[start..].find(',').unwrap();
    fs::write(&path, format!("{}44.0{}", &text[..start], &text[end..])).unwrap();
    let o = haptex(&["simulate", "--config", s(&ws.config), "--commands", s(&r), "--all", "--out", s(&ws.root.join("sim"))]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[timeout]"));
}

#[test]
fn eval_all_correct_gives_1350() {
    let ws = workspace();
    let trials: Vec<TrialRecord> = (1..=15)
        .flat_map(|p| (1..=4u32).map(move |r| (p, r)))
        .flat_map(|(p, round)| {
            default_labels().into_iter().map(move |l| TrialRecord {
                participant: format!("P{p}"),
                round,
                presented: l.clone(),
                selected: l,
                ratings: [50.0, 50.0, 50.0],
            })
        })
        .collect();
    let path = ws.root.join("trials.csv");
    fs::write(&path, trials_csv(&trials)).unwrap();
    let out = ws.root.join("eval");
    let o = haptex(&["eval", "--config", s(&ws.config), "--trials", s(&path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats = fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(stats.lines().any(|l| l.starts_with("chi_squared,selection,1350,25,")), "{stats}");
    let confusion = fs::read_to_string(out.join("confusion.csv")).unwrap();
    assert!(confusion.lines().nth(1).unwrap().starts_with("rough_metal,45,0,0,0,0,0"));
}

#[test]
fn eval_synthetic_study() {
    let ws = workspace();
    let out = ws.root.join("eval");
    let o = haptex(&["eval", "--config", s(&ws.config), "--trials", s(&ws.root.join("fx/trials.csv")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("dof 25"));
    assert!(out.join("report.txt").is_file());
}

#[test]
fn bad_rating_exits_6_naming_row_and_column() {
    let ws = workspace();
    let path = ws.root.join("trials.csv");
    fs::write(&path, "participant,round,presented,selected,flat_bumpy,cold_hot,soft_stiff\nP1,2,fabric,fabric,10,20,30\nP1,2,cardboard,fabric,10,20,130\n").unwrap();
    let o = haptex(&["eval", "--config", s(&ws.config), "--trials", s(&path), "--out", s(&ws.root.join("e"))]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("row 3, column soft_stiff"), "{}", stderr(&o));
}
