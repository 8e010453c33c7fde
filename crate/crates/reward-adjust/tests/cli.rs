use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reward-adjust"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run_with_stdin(cmd: &mut Command, stdin: &str) -> Output {
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn adjust_matches_golden_file() {
    let out = bin().arg("adjust").arg(golden("adjust_input.jsonl")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let expected = std::fs::read_to_string(golden("adjust_expected.jsonl")).unwrap();
    assert_eq!(stdout(&out), expected);
}

#[test]
fn merge_policy_matches_golden_file() {
    let out = bin()
        .args(["adjust", "--tie-policy", "merge"])
        .arg(golden("ties_input.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let expected = std::fs::read_to_string(golden("ties_merge_expected.jsonl")).unwrap();
    assert_eq!(stdout(&out), expected);
}

#[test]
fn three_point_record_from_stdin() {
    let out = run_with_stdin(
        bin().arg("adjust"),
        "{\"id\":\"a\",\"rewards\":[0.3,0.9,0.6],\"min\":0,\"max\":1}\n",
    );
    assert_eq!(out.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["id"], "a");
    assert_eq!(rec["adjusted"], serde_json::json!([0.0, 1.0, 0.8]));
    assert!(rec["error"].is_null());
}

#[test]
fn empty_input_gives_empty_output() {
    let out = run_with_stdin(bin().args(["adjust", "-"]), "");
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn out_of_bounds_without_clip_exits_2() {
    let line = "{\"id\":\"b\",\"rewards\":[2.0],\"min\":0,\"max\":1}\n";
    let out = run_with_stdin(bin().arg("adjust"), line);
    assert_eq!(out.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(rec["error"].as_str().unwrap().starts_with("RewardOutOfBounds"));

    let out = run_with_stdin(bin().args(["adjust", "--clip-rewards"]), line);
    assert_eq!(out.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["adjusted"], serde_json::json!([1.0]));
}

#[test]
fn missing_input_file_exits_1() {
    let out = bin().args(["adjust", "/definitely/not/here.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["adjust", "--feas-tol", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_flag_and_thread_count_do_not_change_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut input = String::new();
    for i in 0..300 {
        let n = 1 + i % 17;
        let rewards: Vec<String> = (0..n)
            .map(|j| format!("{}", ((i * 31 + j * 7) % 100) as f64 / 100.0))
            .collect();
        input.push_str(&format!(
            "{{\"id\":\"g{i}\",\"rewards\":[{}],\"min\":0,\"max\":1}}\n",
            rewards.join(",")
        ));
    }
    let in_path = dir.path().join("in.jsonl");
    std::fs::write(&in_path, &input).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_path = dir.path().join(format!("out{threads}.jsonl"));
        let status = bin()
            .env("REWARD_ADJ_THREADS", threads)
            .args(["adjust", "--output"])
            .arg(&out_path)
            .arg(&in_path)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read_to_string(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let ids: Vec<String> = outputs[0]
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(ids, (0..300).map(|i| format!("g{i}")).collect::<Vec<_>>());

    let check = bin()
        .args(["check", "--adjust-input"])
        .arg(&in_path)
        .arg("--adjust-output")
        .arg(dir.path().join("out1.jsonl"))
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
}

#[test]
fn check_rejects_tampered_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.jsonl");
    let tampered = std::fs::read_to_string(golden("adjust_expected.jsonl"))
        .unwrap()
        .replace("[0.0,1.0,0.8]", "[0.1,1.0,0.8]");
    std::fs::write(&out_path, tampered).unwrap();
    let out = bin()
        .args(["check", "--adjust-input"])
        .arg(golden("adjust_input.jsonl"))
        .arg("--adjust-output")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn bench_rows_and_flags() {
    let out = bin()
        .args(["bench", "--sizes", "1,10,64", "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        [
            "n",
            "f_enumeration",
            "f_one_pass",
            "time_enumeration_s",
            "time_one_pass_s",
            "seed",
            "agree"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(&row[5], "9");
        assert_eq!(&row[6], "true");
        let (fe, fo): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!((fe - fo).abs() <= 1e-9 * fe.max(1.0));
    }
    let again = bin()
        .args(["bench", "--sizes", "1,10,64", "--seed", "9"])
        .output()
        .unwrap();
    let f_cols = |o: &Output| -> Vec<String> {
        csv::Reader::from_reader(o.stdout.as_slice())
            .records()
            .map(|r| {
                let r = r.unwrap();
                format!("{},{}", &r[1], &r[2])
            })
            .collect()
    };
    assert_eq!(f_cols(&out), f_cols(&again));
}

#[test]
fn bench_rejects_zero_size() {
    let out = bin().args(["bench", "--sizes", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn simulate_csv(args: &[&str]) -> (Vec<csv::StringRecord>, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = bin()
        .arg("simulate")
        .args(args)
        .arg("--output-csv")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv::Reader::from_path(&path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect();
    (rows, stdout(&out))
}

#[test]
fn simulate_row_count_contract() {
    let (rows, summary) = simulate_csv(&["--arm", "both", "--seeds", "4", "--steps", "24"]);
    assert_eq!(rows.len(), 2 * 4 * 8);
    assert_eq!(rows.iter().filter(|r| &r[0] == "grpo").count(), 32);
    assert_eq!(rows.iter().filter(|r| &r[0] == "grpovi").count(), 32);
    assert!(summary.contains("grpo ") && summary.contains("grpovi"));
    assert!(summary.contains('±'));

    let (rows, _) = simulate_csv(&["--arm", "grpovi", "--seeds", "3", "--steps", "8"]);
    assert_eq!(rows.len(), 3 * 8);
}

#[test]
fn simulate_zero_steps_reports_initial_moments() {
    let (rows, _) = simulate_csv(&["--arm", "both", "--seeds", "2", "--steps", "0"]);
    assert_eq!(rows.len(), 32);
    // reward and variance columns; wall clock excluded
    let first = (&rows[0][4], &rows[0][5], &rows[0][6]);
    assert!(rows.iter().all(|r| (&r[4], &r[5], &r[6]) == first && &r[3] == "0"));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["--arm", "both", "--seeds", "2", "--steps", "16", "--world-seed", "5"];
    let strip = |rows: Vec<csv::StringRecord>| -> Vec<String> {
        rows.iter()
            .map(|r| r.iter().take(7).collect::<Vec<_>>().join(","))
            .collect()
    };
    let (a, _) = simulate_csv(&args);
    let (b, _) = simulate_csv(&args);
    assert_eq!(strip(a), strip(b));
}

#[test]
fn simulate_rejects_invalid_flags() {
    let out = bin()
        .args(["simulate", "--group-size", "1", "--seeds", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["simulate", "--arm", "neither"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn check_suites_run_with_small_case_counts() {
    let out = bin().args(["check", "--cases", "50", "--seed", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
