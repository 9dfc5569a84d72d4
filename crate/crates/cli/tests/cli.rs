use std::path::Path;
use std::process::{Command, Output};

use openq_cli::{parse_model, run_model, write_csv, ResultTable};

const DECAY: &str = r#"
dims = [2]
solver = "mesolve"
initial_state = "basis(2, 0)"
params = { eps = 1.0, gamma = 0.2 }
hamiltonian = [{ op = "0.5*eps*sigmaz" }]
c_ops = [{ op = "sqrt(gamma)*sigmam" }]
e_ops = [{ label = "sz", op = "sigmaz" }]
tlist = { start = 0.0, stop = 5.0, num = 11 }

[options]
atol = 1e-12
rtol = 1e-10
"#;

const MC: &str = r#"
dims = [2]
solver = "mcsolve"
initial_state = "basis(2, 0)"
params = { gamma = 0.5 }
hamiltonian = [{ op = "0.3*sigmax" }]
c_ops = [{ op = "sqrt(gamma)*sigmam" }]
e_ops = [{ label = "sz", op = "sigmaz" }, { label = "sm", op = "sigmam" }]
tlist = { start = 0.0, stop = 4.0, num = 9 }

[options]
ntraj = 120
seed = 11
"#;

fn openq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openq")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn decay_matches_closed_form() {
    let table = run_model(&parse_model(DECAY).unwrap()).unwrap();
    assert_eq!(table.labels, ["time", "sz"]);
    assert_eq!(table.rows.len(), 11);
    for row in &table.rows {
        let want = 2.0 * (-0.2 * row[0]).exp() - 1.0;
        assert!((row[1] - want).abs() < 1e-6, "t={} got {} want {want}", row[0], row[1]);
    }
}

#[test]
fn complex_and_std_columns() {
    let table = run_model(&parse_model(MC).unwrap()).unwrap();
    assert_eq!(table.labels, ["time", "sz", "sm_re", "sm_im", "sz_std", "sm_std_re", "sm_std_im"]);
    assert!(table.rows.iter().all(|r| r.len() == table.labels.len()));
    // every trajectory starts in the same pure state
    assert_eq!(table.rows[0][4], 0.0);
}

#[test]
fn empty_e_ops_gives_time_column_only() {
    let text = DECAY.replace("e_ops = [{ label = \"sz\", op = \"sigmaz\" }]", "e_ops = []");
    let table = run_model(&parse_model(&text).unwrap()).unwrap();
    assert_eq!(table.labels, ["time"]);
    assert_eq!(table.rows.len(), 11);
    assert!(table.to_csv().starts_with("time\n0.0000000000000000e0\n"));
}

#[test]
fn steadystate_is_one_row() {
    let text = DECAY.replace("\"mesolve\"", "\"steadystate\"");
    let table = run_model(&parse_model(&text).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!((table.rows[0][1] + 1.0).abs() < 1e-12);
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = run_model(&parse_model(MC).unwrap()).unwrap();
    let path = dir.path().join("out.csv");
    write_csv(&table, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(ResultTable::from_csv(&text).unwrap(), table);
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "mc.toml", MC);
    let a = openq(&["run", &model]);
    let b = openq(&["run", &model]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = openq(&["run", &model, "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn binary_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("decay.toml", DECAY), ("mc.toml", MC)] {
        let model = write(dir.path(), name, text);
        let out = dir.path().join(format!("{name}.csv"));
        let r = openq(&["run", &model, "--output", out.to_str().unwrap()]);
        assert!(r.status.success());
        let lib = run_model(&parse_model(text).unwrap()).unwrap().to_csv();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), lib);
    }
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "mc.toml", MC);
    let serial = openq(&["run", &model, "--ntraj", "30", "--map", "serial"]);
    let parallel = openq(&["run", &model, "--ntraj", "30", "--map", "parallel"]);
    assert_eq!(serial.stdout, parallel.stdout);
    let mut spec = parse_model(MC).unwrap();
    spec.ntraj = Some(30);
    assert_eq!(String::from_utf8(serial.stdout).unwrap(), run_model(&spec).unwrap().to_csv());

    let decay = write(dir.path(), "decay.toml", DECAY);
    let ss = openq(&["run", &decay, "--solver", "steadystate"]);
    assert_eq!(String::from_utf8(ss.stdout).unwrap().lines().count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", DECAY);
    assert_eq!(openq(&["validate", &good]).status.code(), Some(0));

    let bad = write(dir.path(), "bad.toml", &DECAY.replace("sigmam", "sigmaq"));
    let r = openq(&["validate", &bad]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("c_ops[0].op"));
    assert_eq!(openq(&["run", &bad]).status.code(), Some(1));
    assert_eq!(openq(&["run", &good, "--solver", "floquetx"]).status.code(), Some(1));
    assert_eq!(openq(&["run", "/nonexistent/model.toml"]).status.code(), Some(1));
    assert_eq!(openq(&["frobnicate"]).status.code(), Some(1));

    // substep that does not divide the output spacing fails inside the solver
    let sme = DECAY
        .replace("\"mesolve\"", "\"smesolve\"")
        .replace("c_ops = [{ op = \"sqrt(gamma)*sigmam\" }]", "sc_ops = [{ op = \"sqrt(gamma)*sigmam\" }]")
        .replace("rtol = 1e-10", "rtol = 1e-10\ndt_sub = 0.3\nntraj = 2\nseed = 1");
    let sme = write(dir.path(), "sme.toml", &sme);
    assert_eq!(openq(&["validate", &sme]).status.code(), Some(0));
    let r = openq(&["run", &sme]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn time_dependent_coefficients_parse() {
    let text = r#"
dims = [2]
solver = "sesolve"
initial_state = "basis(2, 0)"
params = { w = 2.0 }
hamiltonian = [
    { op = "sigmaz", coeff = { kind = "const", value = 0.5 } },
    { op = "sigmax", coeff = { kind = "cos", amp = 0.1, freq = "w" } },
    { op = "sigmay", coeff = { kind = "gauss", amp = 0.2, t0 = 1.0, sigma = 0.3 } },
    { op = "sigmax", coeff = { kind = "samples", times = [0.0, 1.0, 2.0, 3.0], values = [0.0, 0.1, 0.0, -0.1] } },
]
e_ops = [{ label = "sz", op = "sigmaz" }]
tlist = { start = 0.0, stop = 3.0, num = 7 }
"#;
    let table = run_model(&parse_model(text).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 7);
    assert!(table.rows.iter().all(|r| r[1].abs() <= 1.0 + 1e-9));
}
