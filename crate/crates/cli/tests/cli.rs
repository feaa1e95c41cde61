use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embedcap")).args(args).env_remove("EMBEDCAP_SEED").output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn assert_fails_quietly(args: &[&str]) {
    let out = run(args);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty(), "stdout should stay empty: {}", String::from_utf8_lossy(&out.stdout));
    assert!(!out.stderr.is_empty());
}

#[test]
fn capacity_exponential_zero_order() {
    assert_eq!(
        stdout(&["capacity", "--model", "exponential", "--delta", "1", "--method", "zero"]),
        "delta,method,capacity\n1.0,zero,0.5\n"
    );
}

#[test]
fn capacity_from_max_delay_and_rate() {
    let a = stdout(&["capacity", "--model", "exp@10", "--max-delay", "0.1"]);
    assert_eq!(a, "delta,method,capacity\n1.0,zero,0.5\n");
    let b = stdout(&["capacity", "--model", "exp", "--max-delay", "0.5", "--rate", "4"]);
    assert_eq!(b, "delta,method,capacity\n2.0,zero,0.6666666666666666\n");
}

#[test]
fn monte_carlo_rows_carry_stderr_and_are_seeded() {
    let args = ["--seed", "7", "capacity", "--model", "erlang:xi=2", "--delta", "1", "--method", "mc-chain:1e5"];
    let a = stdout(&args);
    assert!(a.starts_with("delta,method,capacity,stderr\n1.0,mc-chain:100000,"), "{a}");
    assert_eq!(a.lines().nth(1).unwrap().split(',').count(), 4);
    assert_eq!(a, stdout(&args));
    let env = Command::new(env!("CARGO_BIN_EXE_embedcap")).args(&args[2..]).env("EMBEDCAP_SEED", "7").output().unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), a);
}

#[test]
fn sweep_rows_are_ordered_by_delta() {
    let out = stdout(&[
        "sweep",
        "--model",
        "exp",
        "--delta-min",
        "0.5",
        "--delta-max",
        "8",
        "--points",
        "5",
        "--log",
        "--methods",
        "zero,linear:1,mc-chain:1e4",
    ]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("delta,method,capacity,stderr"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 15);
    let deltas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
    for chunk in rows.chunks(3) {
        assert_eq!([chunk[0][1], chunk[1][1], chunk[2][1]], ["zero", "linear:1", "mc-chain:10000"]);
        assert_eq!(chunk[0][3], "");
        assert!(!chunk[2][3].is_empty());
        let d: f64 = chunk[0][0].parse().unwrap();
        let c: f64 = chunk[0][2].parse().unwrap();
        assert!((c - d / (1.0 + d)).abs() < 1e-12);
    }
}

#[test]
fn order_reports_relation_and_prediction() {
    assert_eq!(stdout(&["order", "erlang:xi=2", "exponential"]), "less_variable,C1>=C2\n");
    assert_eq!(stdout(&["order", "weibull:b=0.6", "weibull:b=3"]), "more_variable,C1<=C2\n");
    assert_eq!(stdout(&["order", "exponential", "exponential"]), "equal,C1=C2\n");
}

#[test]
fn matrix_dump_is_symmetric_for_order_one() {
    let out = stdout(&["matrix", "--model", "erlang:xi=2", "--delta", "2", "--order", "1"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("h,k,value"));
    let entries: Vec<(i64, i64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(entries.len(), 9);
    let get = |h: i64, k: i64| entries.iter().find(|e| e.0 == h && e.1 == k).unwrap().2;
    assert_eq!(get(0, 1), get(0, -1));
    assert_eq!(get(1, 1), get(-1, -1));
}

#[test]
fn trace_subcommand_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("a.txt");
    let rel = dir.path().join("b.txt");
    let gen = |k: f64| {
        (0..400).map(|i| format!("{} 1500\n", i as f64 * 0.01 + (i as f64 * k).sin().abs() * 0.004)).collect::<String>()
    };
    std::fs::write(&src, gen(1.3)).unwrap();
    std::fs::write(&rel, gen(2.9)).unwrap();
    let csv = dir.path().join("out.csv");
    let out = run(&[
        "trace",
        "--source",
        src.to_str().unwrap(),
        "--relay",
        rel.to_str().unwrap(),
        "--n",
        "300",
        "--deltas",
        "0.5,1",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("weibull shape"));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("delta,empirical_capacity,theoretical_capacity,abs_error\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn errors_go_to_stderr_only() {
    assert_fails_quietly(&["capacity", "--model", "pareto:b=1.5", "--delta", "1", "--method", "linear:1"]);
    assert_fails_quietly(&["capacity", "--model", "gamma:xi=-1", "--delta", "1"]);
    assert_fails_quietly(&["capacity", "--model", "nosuch", "--delta", "1"]);
    assert_fails_quietly(&["capacity", "--model", "exp", "--delta", "-1"]);
    assert_fails_quietly(&["capacity", "--model", "exp", "--delta", "1", "--method", "linear:0"]);
    assert_fails_quietly(&["sweep", "--model", "exp", "--delta-min", "2", "--delta-max", "1"]);
    assert_fails_quietly(&["trace", "--source", "/nonexistent/a", "--relay", "/nonexistent/b"]);
}
