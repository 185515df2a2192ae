use std::path::Path;
use std::process::{Command, Output};

use qflow_core::mobius_gauge::MobiusBoost;
use qflow_core::s4_spectral::{GridSpec, SpectralField, SphereTransform};
use qflow_core::workbench::Snapshot;

fn qflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qflow"))
        .args(args)
        .env("QFLOW_THREADS", "2")
        .output()
        .expect("spawn qflow")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_f_exit_codes() {
    let o = qflow(&["check-f", "--f", "linear:0,0,0,0,1;2"]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    assert!(stdout(&o).contains("CONDITION_FAILS"));

    let o = qflow(&["check-f", "--f", "quadric:1,2,3.5,4,5;-1.5"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("CONDITION_SATISFIED"));

    let o = qflow(&["check-f", "--f", "quadric:1,2,3,4,5;0"]);
    assert_eq!(code(&o), 5, "{}", stdout(&o));

    assert_eq!(code(&qflow(&["check-f", "--f", "const:-2"])), 1);
    assert_eq!(code(&qflow(&["check-f", "--f", "cubic:1"])), 1);
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.conf");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_at_a_solution_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let conf = write_config(dir.path(), "band_limit = 4\nf = const:3\nu0 = zero\n");
    let o = qflow(&["run", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("t,dt,alpha,E,E_f"));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("verdict = Converged"), "{summary}");
    let snap = Snapshot::read(&out.join("snap_00000000.qf4")).unwrap();
    assert!(snap.field.coeffs().iter().all(|c| c.abs() < 1e-14));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "band_limit = 6\nf = const:3\nu0 = random:0.1;2\nseed = 5\nt_max = 0.05\nsnapshot_every = 5\n",
    );
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = qflow(&["run", "--config", &conf, "--out", out.to_str().unwrap()]);
        assert!(matches!(code(&o), 0 | 3), "{}", String::from_utf8_lossy(&o.stderr));
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert!(traces[0].len() > 200);
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["band_limit = 4\nbogus = 1\n", "band_limit = x\n", "f = const:3\nf = const:2\n"] {
        let conf = write_config(dir.path(), body);
        let o = qflow(&["run", "--config", &conf]);
        assert_eq!(code(&o), 1, "{body}");
    }
    assert_eq!(code(&qflow(&["run", "--config", "/nonexistent/run.conf"])), 1);
}

#[test]
fn normalize_moves_to_balanced_gauge() {
    let dir = tempfile::tempdir().unwrap();
    let (input, output) = (dir.path().join("in.qf4"), dir.path().join("out.qf4"));
    let in_s = input.to_str().unwrap();
    let out_s = output.to_str().unwrap();

    Snapshot::new(SpectralField::zeros(8), 0.0, 1.0).write(&input).unwrap();
    let o = qflow(&["normalize", "--in", in_s, "--out", out_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Snapshot::read(&output).unwrap().field.coeffs().iter().all(|c| c.abs() < 1e-12));

    let plan = SphereTransform::new(&GridSpec::new(12, 1).unwrap()).unwrap();
    let u = MobiusBoost::along([0.0, 1.0, 0.0, 0.0, 0.0], 0.7).unwrap().factor_field(&plan).unwrap();
    Snapshot::new(u, 0.5, 2.0).write(&input).unwrap();
    let o = qflow(&["normalize", "--in", in_s, "--out", out_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let after: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("com_after = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(after < 1e-9, "{text}");
    let back = Snapshot::read(&output).unwrap();
    assert_eq!((back.t, back.alpha, back.field.band_limit()), (0.5, 2.0, 12));

    let text = std::fs::read_to_string(&input).unwrap();
    let cut: String = text.lines().take(40).map(|l| format!("{l}\n")).collect();
    std::fs::write(&input, cut).unwrap();
    assert_eq!(code(&qflow(&["normalize", "--in", in_s, "--out", out_s])), 1);
}

#[test]
fn selftest_detects_underresolution_and_corruption() {
    let o = qflow(&["selftest", "--band-limit", "8"]);
    assert_ne!(code(&o), 0);
    assert!(stdout(&o).contains("FAIL"));

    let o = qflow(&["selftest", "--band-limit", "8", "--debug-corrupt-ordering"]);
    assert_ne!(code(&o), 0);
    let text = stdout(&o);
    let green = text.lines().find(|l| l.contains("green identity")).unwrap();
    assert!(green.contains("FAIL"), "{green}");
}
