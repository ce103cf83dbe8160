use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use clap::Parser;
use tomtalk_core::recommend::recommend;
use tomtalk_core::socialgraph::read_graph;
use tomtalk_platform::cli::{recommendation_line, run, Cli};
use tomtalk_platform::config::load_graph_file;
use tomtalk_platform::PlatformConfig;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config_arg() -> String {
    fixture("platform.toml").display().to_string()
}

fn invoke(args: &[&str], stdin: &str) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("tomtalk").chain(args.iter().copied()))
        .map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(cli, &mut stdin.as_bytes(), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn binary(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tomtalk"))
        .args(args)
        .env_remove("TOMTALK_CONFIG")
        .env_remove("TOMTALK_SIM_CONFIG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn recommend_prints_the_library_list() {
    let cfg = PlatformConfig::load(fixture("platform.toml")).unwrap();
    let g = load_graph_file(cfg.graph.as_ref().unwrap(), &cfg).unwrap();
    let mut nonempty = 0;
    for u in g.user_ids() {
        for now in [3u64, 7] {
            let printed = invoke(
                &["recommend", "--user", u.as_str(), "--now", &now.to_string(), "--config", &config_arg()],
                "",
            )
            .unwrap();
            let want: String = recommend(&g, u, &cfg.recommend, now)
                .unwrap()
                .iter()
                .map(|r| recommendation_line(r) + "\n")
                .collect();
            assert_eq!(printed, want, "user {u} at {now}");
            nonempty += !want.is_empty() as usize;
        }
    }
    assert!(nonempty > 0);

    let line = invoke(&["recommend", "--user", "u1", "--now", "7", "--config", &config_arg()], "").unwrap();
    let first = line.lines().next().unwrap();
    assert!(first.starts_with("candidate="));
    for key in ["score=", "phase=", "components="] {
        assert!(first.contains(key), "{first}");
    }
}

#[test]
fn missing_files_are_named_in_a_one_line_diagnostic() {
    let (code, out, err) = binary(&["sim", "run", "--config", "missing.file"], "");
    assert_ne!(code, 0);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("missing.file"), "{err}");

    let (code, _, err) = binary(&["recommend", "--user", "u1", "--config", "/tmp/absent-platform.toml"], "");
    assert_ne!(code, 0);
    assert!(err.contains("/tmp/absent-platform.toml"), "{err}");

    let (code, _, err) = binary(&["reward", "show", "--user", "u1", "--graph", "/tmp/absent-graph.txt"], "");
    assert_ne!(code, 0);
    assert!(err.contains("/tmp/absent-graph.txt"), "{err}");

    let (code, _, err) = binary(&["recommend", "--user", "nobody", "--config", &config_arg()], "");
    assert_ne!(code, 0);
    assert!(err.contains("nobody"), "{err}");
}

#[test]
fn config_path_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_tomtalk"))
        .args(["reward", "show", "--user", "u2"])
        .env("TOMTALK_CONFIG", fixture("platform.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("user=u2 total="));

    let out = Command::new(env!("CARGO_BIN_EXE_tomtalk"))
        .args(["reward", "show", "--user", "u2"])
        .env("TOMTALK_CONFIG", "/tmp/env-named-config.toml")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("/tmp/env-named-config.toml"));
}

#[test]
fn export_import_round_trip_is_identical() {
    let cfg = PlatformConfig::load(fixture("platform.toml")).unwrap();
    let original = load_graph_file(cfg.graph.as_ref().unwrap(), &cfg).unwrap();

    let (code, exported, err) = binary(&["graph", "export", "--config", &config_arg()], "");
    assert_eq!(code, 0, "{err}");
    let (code, imported, err) = binary(&["graph", "import", "--config", &config_arg()], &exported);
    assert_eq!(code, 0, "{err}");
    assert_eq!(imported, exported);
    let reread = read_graph(imported.as_bytes(), cfg.reward.params()).unwrap();
    assert_eq!(reread, original);

    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("copy.txt");
    invoke(&["graph", "import", "--out", dest.to_str().unwrap()], &exported).unwrap();
    assert_eq!(std::fs::read_to_string(&dest).unwrap(), exported);
}

#[test]
fn import_reports_the_bad_line() {
    let err = invoke(&["graph", "import"], "catalog attributes=0 preferences=1\nfriend a=b\n").unwrap_err();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn reward_show_matches_the_library() {
    let cfg = PlatformConfig::load(fixture("platform.toml")).unwrap();
    let g = load_graph_file(cfg.graph.as_ref().unwrap(), &cfg).unwrap();
    let out = invoke(&["reward", "show", "--user", "u4", "--config", &config_arg()], "").unwrap();
    let total: f64 = out
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("total="))
        .unwrap()
        .parse()
        .unwrap();
    let want = tomtalk_core::rewards::total_reward(&g, &"u4".into(), &cfg.reward.params()).unwrap();
    assert_eq!(total, want);
}

#[test]
fn pet_repl_is_deterministic_and_reports_errors() {
    let script = "tick 3\nfeed toy\ntick\nenv 0.2,0.4 0.5,0.5 0.6\ntick 25\nstate\n";
    let args = ["pet", "repl", "--seed", "5", "--config", &config_arg()];
    let a = invoke(&args, script).unwrap();
    let b = invoke(&args, script).unwrap();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert!(lines[0].starts_with("tick=1 "));
    assert_eq!(lines[3], "fed prop=toy s3=0.6 s4=0");
    // the tick after the feed carries a positive breeder stimulus
    let s = lines[4].split(" s=").nth(1).unwrap();
    let s: Vec<f64> = s.split(',').map(|x| x.parse().unwrap()).collect();
    assert!(s[2] > 0.0 && s[3] == 0.0);
    assert!(lines[5].starts_with("comfort=0.3"));
    assert!(lines.last().unwrap().starts_with("tick=29 "));

    let other = invoke(&["pet", "repl", "--seed", "6", "--config", &config_arg()], script).unwrap();
    assert_ne!(a, other);

    let (code, out, err) = binary(&["pet", "repl", "--seed", "1"], "tick\nbogus\nfeed caviar\nquit\n");
    assert_ne!(code, 0);
    assert!(out.contains("error: unknown command `bogus`"), "{out}");
    assert!(out.contains("unknown prop"), "{out}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn sim_run_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "population = 60\ntreatment = 30\ncontrol = 30\nweeks = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str| invoke(&["sim", "run", "--config", cfg, "--seed", seed, "--format", "csv"], "").unwrap();
    let a = run("3");
    assert_eq!(a, run("3"));
    assert_ne!(a, run("4"));
    assert!(a.starts_with("seed,group,week,social_time,circle_size,tasks\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 4);

    let table = invoke(&["sim", "run", "--config", cfg, "--replicates", "2"], "").unwrap();
    assert_eq!(table.matches("seed ").count(), 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "population = 10\ntreatment = 30\ncontrol = 30\n").unwrap();
    assert!(invoke(&["sim", "run", "--config", bad.to_str().unwrap()], "").is_err());
}

#[test]
fn trial_prints_a_satisfaction_histogram() {
    let out = invoke(&["sim", "trial", "--seed", "2", "--participants", "10", "--interactions", "20"], "").unwrap();
    let counts: usize = out
        .lines()
        .filter_map(|l| l.split("participants=").nth(1))
        .map(|n| n.parse::<usize>().unwrap())
        .sum();
    assert_eq!(counts, 10);
    assert!(out.contains("mean_empathy="));
}
