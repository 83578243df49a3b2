use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lanexit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanexit"))
        .args(args)
        .output()
        .expect("spawn lanexit")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(table: &str, name: &str) -> Vec<String> {
    let mut lines = table.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn depth_profile_band_at_forty() {
    let t = stdout(&lanexit(&["depth-profile"]));
    let row = t.lines().find(|l| l.starts_with("40,")).unwrap();
    let hw: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((hw - 0.431).abs() < 1e-3, "{hw}");
}

#[test]
fn depth_profile_single_point() {
    let t = stdout(&lanexit(&["depth-profile", "--x-min", "0", "--x-max", "0"]));
    assert_eq!(t.lines().count(), 2);
}

#[test]
fn depth_profile_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanexit(&["depth-profile", "--output", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let t = fs::read_to_string(dir.path().join("depth_profile.csv")).unwrap();
    assert!(t.starts_with("x,f,x_l,x_u,half_width\n"));
    assert_eq!(t.lines().count(), 102);
}

#[test]
fn invalid_model_exits_2() {
    let o = lanexit(&["depth-profile", "--beta1", "-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lanexit(&["depth-profile", "--r-squared", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sampling_plan_rejects_zero_epsilon() {
    let o = lanexit(&["sampling-plan", "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tighter_epsilon_samples_farther() {
    let t = stdout(&lanexit(&["sampling-plan", "--epsilon", "0.1,0.4"]));
    let eps = column(&t, "epsilon");
    let dx = column(&t, "dx_abs");
    let status = column(&t, "status");
    assert!(status.iter().all(|s| s == "ok"));
    let pick = |e: &str| -> Vec<f64> {
        eps.iter()
            .zip(&dx)
            .filter(|(a, _)| a.as_str() == e)
            .map(|(_, d)| d.parse().unwrap())
            .collect()
    };
    let (tight, loose) = (pick("0.1"), pick("0.4"));
    assert_eq!(tight.len(), 91);
    for (a, b) in tight.iter().zip(&loose) {
        assert!(a > b, "{a} <= {b}");
    }
    for w in tight.windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn closing_speed_single_frame_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, "t_s,x_m_m\n0,40\n").unwrap();
    let t = stdout(&lanexit(&["closing-speed", "--stream", p.to_str().unwrap()]));
    assert_eq!(t, "t1,t2,x1,x2,v_nom,v_upper,v_lower,gamma_u\n");
}

#[test]
fn closing_speed_non_monotone_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, "t_s,x_m_m\n0,40\n0.1,39\n0.1,38\n").unwrap();
    let o = lanexit(&["closing-speed", "--stream", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn closing_speed_missing_file_exits_1() {
    let o = lanexit(&["closing-speed", "--stream", "/nonexistent/stream.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn closing_speed_meets_epsilon_on_noise_free_stream() {
    // constant 8 m/s approach from 80 m, measured depth = f-free truth + offset
    let (b1, b2, b3) = (0.002797, -0.004249, 0.007311);
    let mut body = String::from("t_s,x_m_m\n");
    for k in 0..=180 {
        let t = k as f64 * 0.05;
        let x: f64 = 80.0 - 8.0 * t;
        let xm = x + b1 * x * x + b2 * x + b3;
        body.push_str(&format!("{t},{xm}\n"));
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, body).unwrap();
    let t = stdout(&lanexit(&["closing-speed", "--epsilon", "0.2", "--stream", p.to_str().unwrap()]));
    let g = column(&t, "gamma_u");
    let v = column(&t, "v_nom");
    assert!(!g.is_empty());
    for (g, v) in g.iter().zip(&v) {
        let g: f64 = g.parse().unwrap();
        let v: f64 = v.parse().unwrap();
        assert!(g <= 0.2 + 1e-6, "{g}");
        assert!((v - 8.0).abs() < 1e-6, "{v}");
    }
}

#[test]
fn simulate_fixture_keeps_safety_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("two_intersections.toml");
    let o = lanexit(&["simulate", "--config", cfg.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]);
    stdout(&o);
    let sum: toml::Value = fs::read_to_string(dir.path().join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(sum["completed"].as_bool(), Some(true));
    let min = sum["min_separation_m"].as_float().unwrap();
    assert!(min >= 3.8, "{min}");
    for f in ["ego.csv", "neighbors.csv", "measurements.csv", "decisions.csv", "distances.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn simulate_without_neighbors_never_waits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("no_neighbors.toml");
    stdout(&lanexit(&["simulate", "--config", cfg.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]));
    let sum: toml::Value = fs::read_to_string(dir.path().join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(sum["total_wait_s"].as_float(), Some(0.0));
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let cfg = fixture("two_intersections.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        stdout(&lanexit(&[
            "simulate",
            "--seed",
            "7",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            d.path().to_str().unwrap(),
        ]));
    }
    for f in ["ego.csv", "neighbors.csv", "measurements.csv", "decisions.csv", "distances.csv", "summary.toml"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn simulate_many_configs_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let a = fixture("two_intersections.toml");
    let b = fixture("no_neighbors.toml");
    stdout(&lanexit(&[
        "simulate",
        "--jobs",
        "2",
        "--config",
        a.to_str().unwrap(),
        "--config",
        b.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]));
    assert!(dir.path().join("two_intersections/summary.toml").is_file());
    assert!(dir.path().join("no_neighbors/summary.toml").is_file());
}

#[test]
fn simulate_timeout_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("no_neighbors.toml")).unwrap();
    let text = text.replacen("wait_timeout_s", "# wait_timeout_s", 1);
    let text = format!(
        "wait_timeout_s = 1.5\n{text}\n[[tracks.synthetic]]\nid = \"parked\"\nintersection = 0\n\
         start = [9.0, 1.8]\nspeed_profile = [[0.0, 0.0]]\nduration_s = 30.0\n"
    );
    let p = dir.path().join("parked.toml");
    fs::write(&p, text).unwrap();
    let o = lanexit(&["simulate", "--config", p.to_str().unwrap(), "--output", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_bad_config_exits_2_or_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "epsilon = [").unwrap();
    let o = lanexit(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let text = fs::read_to_string(fixture("no_neighbors.toml")).unwrap();
    let text = text.replacen("safety_distance", "# safety_distance", 1);
    fs::write(&p, format!("safety_distance = -1.0\n{text}")).unwrap();
    let o = lanexit(&["simulate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("safety_distance"));
}
