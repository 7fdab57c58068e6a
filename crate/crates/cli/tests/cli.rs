use std::path::Path;
use std::process::{Command, Output};

fn crossview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossview"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = crossview(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn gen_tiles_writes_lattice() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tiles.txt");
    let msg = ok(&["gen-tiles", "--bounds", "-100", "100", "0", "50", "--out", p(&out)]);
    assert!(msg.starts_with("10 tiles"), "{msg}");
    assert!(out.exists());
}

#[test]
fn run_is_byte_identical_and_eval_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let sa = ok(&["run", "--seed", "3", "--out", p(&a)]);
    let sb = ok(&["run", "--seed", "3", "--out", p(&b)]);
    assert_eq!(sa, sb);
    assert_eq!(dir_contents(&a), dir_contents(&b));
    assert!(sa.starts_with("method,"));

    let sim = tmp.path().join("sim.txt");
    ok(&["simulate", "--seed", "3", "--out", p(&sim)]);
    assert_eq!(std::fs::read(&sim).unwrap(), std::fs::read(a.join("truth.txt")).unwrap());

    let self_eval = ok(&["eval", "--est", p(&sim), "--truth", p(&a.join("truth.txt"))]);
    assert!(self_eval.starts_with("pos_rmse_m 0\n"), "{self_eval}");
    let vo = ok(&["eval", "--est", p(&a.join("vo.txt")), "--truth", p(&sim)]);
    let pct: f64 = vo
        .lines()
        .find_map(|l| l.strip_prefix("pos_pct "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((4.5..=6.5).contains(&pct), "{pct}");
}

#[test]
fn recorded_matches_replay_to_the_same_output() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("rec");
    let first = ok(&["run", "--seed", "1", "--out", p(&rec), "--record"]);
    let cfg = tmp.path().join("replay.cfg");
    std::fs::write(
        &cfg,
        "hybrid_backend = replay\nhybrid_replay_file = rec/vo_hybrid.match\n",
    )
    .unwrap();
    let replayed = ok(&["run", "--config", p(&cfg), "--seed", "1", "--out", p(&tmp.path().join("out"))]);
    let row = |s: &str| s.lines().find(|l| l.starts_with("vo_hybrid,")).unwrap().to_string();
    assert_eq!(row(&first), row(&replayed));
}

#[test]
fn unknown_config_key_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "traj_speed = 3\n").unwrap();
    let out = crossview(&["simulate", "--config", p(&cfg), "--out", p(&tmp.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn loss_self_test_passes() {
    let out = ok(&["losses", "--self-test"]);
    assert!(out.lines().count() >= 2 && out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
