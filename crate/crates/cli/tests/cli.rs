use std::path::PathBuf;
use std::process::{Command, Output};

use fractal_sio_cli::{RunConfig, RunReport, EXIT_CERTIFIED, EXIT_INCONCLUSIVE, EXIT_INVALID};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fractal-sio"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fractal-sio-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn report(out: &Output) -> RunReport {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(text: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn gasket_config_is_certified() {
    let gasket = config("gasket.json");
    let out = run(&["check-unbounded", "--config", gasket.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_CERTIFIED, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep.command, "check-unbounded");
    assert_eq!(rep.exit_code, EXIT_CERTIFIED);
    assert_eq!(rep.outputs["certified"], true);
    assert_eq!(rep.determinism.summation, "sequential-lexicographic");
    assert_eq!(rep.inputs["mode"], "interval");
}

#[test]
fn odd_symmetric_config_is_inconclusive() {
    let five = config("five_squares.json");
    let out = run(&["check-unbounded", "--config", five.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_INCONCLUSIVE);
    assert_eq!(report(&out).outputs["certified"], false);
}

#[test]
fn invalid_inputs_exit_with_three() {
    let bad = scratch("bad.json");
    std::fs::write(&bad, "{\"ifs\": ").unwrap();
    let out = run(&["check-unbounded", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_INVALID);
    assert!(!out.stderr.is_empty());

    let unknown = scratch("unknown.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("gasket.json")).unwrap()).unwrap();
    v["depth_of_field"] = 3.into();
    std::fs::write(&unknown, v.to_string()).unwrap();
    assert_eq!(code(&run(&["integrate", "--config", unknown.to_str().unwrap()])), EXIT_INVALID);

    let gasket = config("gasket.json");
    let g = gasket.to_str().unwrap();
    assert_eq!(code(&run(&["check-unbounded", "--config", "/nonexistent/x.json"])), EXIT_INVALID);
    assert_eq!(code(&run(&["--threads", "0", "telescope", "--config", g])), EXIT_INVALID);
    assert_eq!(code(&run(&["cantor-hn", "--n", "1", "--N", "2"])), EXIT_INVALID);
    assert_eq!(code(&run(&["cantor-hn", "--n", "1", "--N", "18", "--target-a", "-1"])), EXIT_INVALID);
    assert_eq!(code(&run(&["dim-solve", "--n", "1", "--N", "2"])), EXIT_INVALID);
    assert_eq!(code(&run(&["phi-solve", "--n", "1", "--N", "18", "--resolution", "1"])), EXIT_INVALID);
    assert_eq!(code(&run(&["no-such-command"])), EXIT_INVALID);
}

#[test]
fn dry_run_lists_stages() {
    let out = run(&["cantor-hn", "--n", "1", "--N", "18", "--dry-run"]);
    assert_eq!(code(&out), EXIT_CERTIFIED);
    let rep = report(&out);
    let stages: Vec<&str> = rep.outputs["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert_eq!(stages, ["parameters", "separation", "phi", "numerator_sign", "criterion"]);
}

#[test]
fn dim_solve_reports_closed_form() {
    let out = run(&["dim-solve", "--n", "1", "--N", "18"]);
    assert_eq!(code(&out), EXIT_CERTIFIED);
    let r = report(&out).outputs["solve"]["r"].as_f64().unwrap();
    assert!((r - 52489f64.powf(-1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn run_report_round_trips() {
    let gasket = config("gasket.json");
    let path = scratch("telescope.json");
    let out = run(&[
        "telescope",
        "--config",
        gasket.to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_CERTIFIED);
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, out.stdout);
    let rep = report(&out);
    let again: RunReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(again, rep);
    let echoed: RunConfig = serde_json::from_value(rep.inputs.clone()).unwrap();
    let original = RunConfig::from_path(&gasket).unwrap();
    assert_eq!(echoed.ifs, original.ifs);
    assert_eq!(echoed.kernel, original.kernel);
    assert_eq!(echoed.refinement, original.refinement);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let gasket = config("gasket.json");
    let g = gasket.to_str().unwrap();
    for cmd in ["check-unbounded", "integrate", "telescope", "maximal"] {
        let a = run(&[cmd, "--config", g]);
        let b = run(&[cmd, "--config", g]);
        assert_eq!(code(&a), EXIT_CERTIFIED, "{cmd}");
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn thread_counts_agree() {
    let gasket = config("gasket.json");
    let g = gasket.to_str().unwrap();
    let one = report(&run(&["integrate", "--config", g]));
    for t in ["2", "4", "8"] {
        let many = report(&run(&["--threads", t, "integrate", "--config", g]));
        assert_eq!(many.determinism.summation, "parallel-compensated");
        for c in 0..2 {
            let a = one.outputs["estimate"]["value"][c].as_f64().unwrap();
            let b = many.outputs["estimate"]["value"][c].as_f64().unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "threads {t}: {a} vs {b}");
        }
    }
}

#[test]
fn eta_csv_matches_telescope_report() {
    let gasket = config("gasket.json");
    let g = gasket.to_str().unwrap();
    let csv = run(&["emit-plotdata", "--kind", "eta", "--config", g]);
    assert_eq!(code(&csv), EXIT_CERTIFIED);
    let (header, rows) = csv_rows(&csv.stdout);
    assert_eq!(header, ["k", "component_0", "component_1"]);
    assert_eq!(rows.len(), 4);
    let rep = report(&run(&["telescope", "--config", g]));
    let eta = &rep.outputs["telescopes"][0]["eta"];
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k as f64);
        for c in 0..2 {
            assert_eq!(row[c + 1], eta[k][c].as_f64().unwrap());
        }
    }
}

#[test]
fn eps_and_convergence_csv_shapes() {
    let gasket = config("gasket.json");
    let g = gasket.to_str().unwrap();
    let (header, rows) = csv_rows(&run(&["emit-plotdata", "--kind", "eps", "--config", g]).stdout);
    assert_eq!(header, ["eps", "norm", "component_0", "component_1"]);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!((row[1] - row[2].hypot(row[3])).abs() <= 1e-12 * row[1].max(1.0));
    }
    let rep = report(&run(&["maximal", "--config", g]));
    let sup = rep.outputs["maximal"]["estimate"].as_f64().unwrap();
    let max_norm = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    assert!((sup - max_norm).abs() <= 1e-12 * sup.max(1.0), "{sup} vs {max_norm}");

    let (header, rows) = csv_rows(&run(&["emit-plotdata", "--kind", "convergence", "--config", g]).stdout);
    assert_eq!(header, ["depth", "nodes", "value_0", "value_1", "error_0", "error_1"]);
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
}

#[test]
fn phi_csv_covers_the_grid() {
    let path = scratch("phi.csv");
    let out = run(&[
        "emit-plotdata",
        "--kind",
        "phi",
        "--n",
        "1",
        "--N",
        "18",
        "--resolution",
        "16",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_CERTIFIED, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&std::fs::read(&path).unwrap());
    assert_eq!(header, ["w_1", "w_2", "phi"]);
    assert_eq!(rows.len(), 16 * 16);
    let bound = 8.0 * 52489f64.powf(-1.0 / 3.0);
    assert!(rows.iter().all(|r| r[2].abs() <= bound));

    let missing = run(&["emit-plotdata", "--kind", "phi", "--n", "1"]);
    assert_eq!(code(&missing), EXIT_INVALID);
    let no_config = run(&["emit-plotdata", "--kind", "eta"]);
    assert_eq!(code(&no_config), EXIT_INVALID);
}

#[test]
fn phi_solve_passes_at_default_resolution() {
    let out = run(&["phi-solve", "--n", "1", "--N", "18"]);
    assert_eq!(code(&out), EXIT_CERTIFIED, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep.outputs["report"]["pass"], true);
}
