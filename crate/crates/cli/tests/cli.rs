use std::path::Path;
use std::process::{Command, Output};

fn sparseci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparseci"))
        .args(args)
        .env("SPARSECI_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn thresholds_print_reference_cutoff() {
    let o = sparseci(&["thresholds", "--d", "1000", "--s", "100", "--a", "4.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "kappa_star,4.005157"), "{text}");
    assert!(text.lines().any(|l| l == "regime_one_sided,low_snr"));
}

#[test]
fn bonferroni_on_zeros_clamps_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(&dir.path().join("obs.csv"), "j,x\n0,0\n1,0\n2,0\n");
    let o = sparseci(&["construct", "--method", "bonferroni", "--input", &input]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "j,selected,lower,upper\n0,1,0,inf\n1,1,0,inf\n2,1,0,inf\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(&dir.path().join("obs.csv"), "j,x\n0,0.5\n1,-1\n2,3\n");
    let hat = ["construct", "--method", "hat", "--input", &input, "--declared-s", "1", "--declared-a", "1"];
    let o = sparseci(&hat);
    assert_eq!(o.status.code(), Some(3));
    let mut forced = hat.to_vec();
    forced.push("--force");
    assert_eq!(sparseci(&forced).status.code(), Some(0));

    let o = sparseci(&["thresholds", "--d", "10", "--s", "20", "--a", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sparseci(&["thresholds", "--d", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(&dir.path().join("obs.csv"), "j,x\n0,1\n1,abc\n");
    let o = sparseci(&["construct", "--method", "plug-in", "--input", &input]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn construct_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("j,x\n");
    for j in 0..50 {
        let x = if j < 5 { 9.0 + j as f64 * 0.1 } else { ((j * 37 % 11) as f64 - 5.0) / 3.0 };
        text.push_str(&format!("{j},{x}\n"));
    }
    let input = write(&dir.path().join("obs.csv"), &text);
    for method in ["hat", "bar", "ts-hat", "ts-bar", "adaptive", "bonferroni", "plug-in"] {
        let out = dir.path().join(format!("{method}.csv"));
        let o = sparseci(&[
            "construct", "--method", method, "--input", &input, "--declared-s", "5",
            "--declared-a", "8", "--force", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let file = std::fs::File::open(&out).unwrap();
        let set = sparseci::intervals::read_interval_csv(file).unwrap();
        set.check_invariants().unwrap();
        assert_eq!(set.dim(), 50);
    }
}

#[test]
fn bounds_subcommand() {
    let o = sparseci(&["bounds", "--kind", "thm1", "--d", "1000", "--s", "100", "--a", "4.005157"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "name,value,inputs\nescape,0.0246870331,s=100;delta=0.7;snr=4.005157\n"
    );
    let o = sparseci(&[
        "bounds", "--kind", "thm4", "--d", "2", "--s", "1", "--a", "1", "--A", "1", "--rho", "1",
        "--m", "0",
    ]);
    assert!(o.status.success());
    let o = sparseci(&["bounds", "--kind", "thm4", "--d", "200", "--s", "10", "--a", "3", "--m", "1", "--sweep", "--rho-points", "20"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
    let o = sparseci(&["bounds", "--kind", "cor3", "--d", "1000", "--s", "100", "--a", "3", "--A", "10", "--W", "3"]);
    assert!(o.status.success());
}

#[test]
fn simulate_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_sparseci"))
            .args([
                "simulate", "--d", "200", "--s", "10", "--reps", "30", "--seed", "5",
                "--snr-grid", "3,5,8", "--out", out.to_str().unwrap(),
            ])
            .env("SPARSECI_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(dir.path().join(format!("{name}.meta.json"))).unwrap())
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    assert_eq!(a, b);
    let header = String::from_utf8(a.0).unwrap();
    assert!(header.starts_with(
        "method,snr,alpha_prime,coverage_hat,coverage_se,coverage_exact,dist_mean,dist_se,card_mean,card_se,infeasible\n"
    ));
}

#[test]
fn sensitivity_and_cardinality_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sens.csv");
    let o = sparseci(&[
        "sensitivity", "--d", "200", "--s", "10", "--reps", "10", "--force",
        "--alpha-prime-grid", "0.01,0.04", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // 2 alpha' values x 2 default SNRs x 8 methods
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1 + 32);

    let out = dir.path().join("card.csv");
    let o = sparseci(&["cardinality", "--d", "200", "--s", "10", "--reps", "10", "--snr-grid", "2,9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1 + 6);
}

#[test]
fn bad_thread_env_is_a_validation_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_sparseci"))
        .args(["thresholds", "--d", "100", "--s", "5", "--a", "3"])
        .env("SPARSECI_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
