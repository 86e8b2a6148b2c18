//! End-to-end tests of the `concentric` binary: input validation and exit
//! codes, JSON and CSV surfaces, determinism, and agreement with the
//! library fits.

use concentric_core::estimators::{fit_all, Method};
use concentric_core::simulation::{add_noise, generate_true_points, NoiseModel};
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_concentric"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_csv(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("concentric-test-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("write temp csv");
    path
}

fn circles_csv(points_per_ring: usize) -> String {
    let mut out = String::from("x,y,ring\n");
    for ring in 0..2 {
        let r = (ring + 1) as f64;
        for j in 0..points_per_ring {
            let t = 2.0 * std::f64::consts::PI * j as f64 / points_per_ring as f64;
            out.push_str(&format!(
                "{:.17e},{:.17e},{}\n",
                r * t.cos(),
                r * t.sin(),
                ring + 1
            ));
        }
    }
    out
}

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[test]
fn fit_recovers_exact_circles() {
    let path = temp_csv("circles.csv", &circles_csv(8));
    let out = run(&["fit", path.to_str().unwrap(), "--f0", "1", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let methods = doc["methods"].as_object().unwrap();
    assert_eq!(methods.len(), 5);
    for (name, entry) in methods {
        assert_eq!(entry["valid"], true, "{name}");
        let geo = &entry["geometry"];
        let center = geo["center"].as_array().unwrap();
        assert!(center[0].as_f64().unwrap().abs() < 1e-9, "{name}");
        assert!(center[1].as_f64().unwrap().abs() < 1e-9, "{name}");
        let rings = geo["rings"].as_array().unwrap();
        assert!((rings[0]["a"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!((rings[0]["b"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!((rings[1]["a"].as_f64().unwrap() - 2.0).abs() < 1e-9);
        assert!((rings[1]["b"].as_f64().unwrap() - 2.0).abs() < 1e-9);
        // psi is pure gauge for circles, no assertion on it
        assert!(entry["pencil_residual"].as_f64().unwrap() <= 1e-8);
    }
    std::fs::remove_file(path).ok();
}

#[test]
fn fit_rejects_insufficient_points() {
    let path = temp_csv(
        "short.csv",
        "x,y,ring\n1,0,1\n0,1,1\n-1,0,1\n0,-1,1\n2,0,2\n",
    );
    let out = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("insufficient points"),
        "{}",
        stderr(&out)
    );
    std::fs::remove_file(path).ok();
}

#[test]
fn fit_rejects_non_contiguous_rings() {
    let mut csv = String::from("x,y,ring\n");
    for j in 0..8 {
        let t = 2.0 * std::f64::consts::PI * j as f64 / 8.0;
        csv.push_str(&format!("{},{},1\n", t.cos(), t.sin()));
        csv.push_str(&format!("{},{},3\n", 2.0 * t.cos(), 2.0 * t.sin()));
    }
    let path = temp_csv("gap.csv", &csv);
    let out = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("non-contiguous"), "{}", stderr(&out));
    std::fs::remove_file(path).ok();
}

#[test]
fn fit_rejects_bad_header_and_bad_values() {
    let path = temp_csv("hdr.csv", "a,b,c\n1,2,1\n");
    let out = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("header"));
    std::fs::remove_file(path).ok();

    let path = temp_csv("val.csv", "x,y,ring\n1,zzz,1\n");
    let out = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(path).ok();
}

#[test]
fn fit_rejects_unknown_method() {
    let path = temp_csv("m.csv", &circles_csv(8));
    let out = run(&["fit", path.to_str().unwrap(), "--methods", "magic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown method"));
    std::fs::remove_file(path).ok();
}

#[test]
fn fit_handles_three_rings() {
    let mut csv = String::from("x,y,ring\n");
    for ring in 0..3 {
        let r = (ring + 1) as f64;
        for j in 0..12 {
            let t = 2.0 * std::f64::consts::PI * j as f64 / 12.0;
            csv.push_str(&format!("{},{},{}\n", r * t.cos(), r * t.sin(), ring + 1));
        }
    }
    let path = temp_csv("k3.csv", &csv);
    let out = run(&["fit", path.to_str().unwrap(), "--f0", "1", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for (_, entry) in doc["methods"].as_object().unwrap() {
        assert_eq!(entry["valid"], true);
        assert_eq!(entry["theta"].as_array().unwrap().len(), 8);
        assert_eq!(entry["geometry"]["rings"].as_array().unwrap().len(), 3);
    }
    std::fs::remove_file(path).ok();
}

/// The bundled iris-like point cloud exercises the full pipeline at pixel
/// scale with the default f0 = 100.
#[test]
fn fit_bundled_iris_like_scene() {
    let path = data_file("iris_like.csv");
    let out = run(&["fit", path.to_str().unwrap(), "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["f0"], 100.0);
    assert_eq!(doc["points"], 250);
    for (name, entry) in doc["methods"].as_object().unwrap() {
        assert_eq!(entry["valid"], true, "{name}");
        let center = entry["geometry"]["center"].as_array().unwrap();
        assert!(
            (center[0].as_f64().unwrap() - 160.0).abs() < 1.0,
            "{name}: center x {center:?}"
        );
        assert!((center[1].as_f64().unwrap() - 145.0).abs() < 1.0, "{name}");
        let rings = entry["geometry"]["rings"].as_array().unwrap();
        assert!(
            (rings[0]["a"].as_f64().unwrap() - 55.0).abs() < 2.0,
            "{name}"
        );
        assert!(
            (rings[1]["a"].as_f64().unwrap() - 88.0).abs() < 2.0,
            "{name}"
        );
    }
}

/// CLI fits reproduce the library fits through the 17-significant-digit
/// CSV round trip (up to last-ulp codegen differences between binaries).
#[test]
fn fit_matches_library_results() {
    let scenario = concentric_core::simulation::experiment_two();
    let data = add_noise(
        &generate_true_points(&scenario),
        &NoiseModel {
            sigma: 0.1,
            seed: 31337,
        },
    );
    let mut csv = String::from("x,y,ring\n");
    for (ring, p) in data.points() {
        csv.push_str(&format!("{:.17e},{:.17e},{}\n", p.x, p.y, ring + 1));
    }
    let path = temp_csv("lib.csv", &csv);
    let out = run(&["fit", path.to_str().unwrap(), "--f0", "1", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let expected = fit_all(&data).unwrap();
    for (method, res) in &expected {
        let fit = res.as_ref().unwrap();
        let got = doc["methods"][method.name()]["theta"].as_array().unwrap();
        for (a, b) in fit.theta.as_vector().iter().zip(got) {
            let b = b.as_f64().unwrap();
            assert!((a - b).abs() <= 1e-12, "{method}: {a} vs {b}");
        }
        let ev = doc["methods"][method.name()]["eigenvalue"]
            .as_f64()
            .unwrap();
        assert!(
            (ev - fit.eigenvalue).abs() <= 1e-12 * (1.0 + fit.eigenvalue.abs()),
            "{method}: {ev} vs {}",
            fit.eigenvalue
        );
    }
    std::fs::remove_file(path).ok();
}

fn mask_art_column(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            fields
                .iter()
                .enumerate()
                .map(|(i, f)| if i == 4 { "ART" } else { *f })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn simulate_is_deterministic_and_well_formed() {
    let args = [
        "simulate", "--preset", "exp2", "--sigma", "0.15", "--sigma", "0.05", "--runs", "40",
        "--seed", "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    // identical modulo the wall-clock art column
    assert_eq!(mask_art_column(&stdout(&a)), mask_art_column(&stdout(&b)));

    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sigma,method,nmse,nb,art_seconds,convergence_rate_pct,leading_variance_trace"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10); // 2 sigmas x 5 methods
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 7);
        for f in &fields[2..] {
            let v: f64 = f.parse().unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
        assert!(Method::parse(fields[1]).is_some());
    }
}

#[test]
fn simulate_zero_sigma_reports_raw_exact_errors() {
    let out = run(&[
        "simulate", "--preset", "exp1", "--sigma", "0", "--runs", "1", "--seed", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for row in stdout(&out).lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        let nmse: f64 = fields[2].parse().unwrap();
        let conv: f64 = fields[5].parse().unwrap();
        assert!(nmse <= 1e-16, "raw exact-fit error {nmse}");
        assert_eq!(conv, 100.0);
    }
}

/// A method with zero valid runs has no statistics to report: the command
/// fails with the numerical-failure exit code. (LS converges on ~0.5% of
/// runs at this noise level, so 30 runs reliably contain none.)
#[test]
fn simulate_fails_when_a_method_never_converges() {
    let out = run(&[
        "simulate", "--preset", "exp2", "--sigma", "0.3", "--runs", "30", "--seed", "4",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("no run of method"), "{}", stderr(&out));
}

#[test]
fn simulate_rejects_unknown_preset() {
    let out = run(&["simulate", "--preset", "exp9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown preset"));
}

#[test]
fn bias_scan_emits_ordered_columns_and_zero_hyper() {
    let out = run(&["bias-scan", "--preset", "scenario1", "--points", "8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,bias_ls,bias_oleary,bias_taubin,bias_semi_hyper,bias_hyper"
    );
    let mut rows = 0;
    for row in lines {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        let (omega, ls, ol, tau, hyper) = (fields[0], fields[1], fields[2], fields[3], fields[5]);
        assert_eq!(hyper, 0.0);
        if omega <= 4.0 {
            assert!(tau < ol && ol < ls, "ordering at omega {omega}: {row}");
        }
        rows += 1;
    }
    assert_eq!(rows, 8);
}

#[test]
fn bias_scan_gap_grows_as_arcs_shrink() {
    let out = run(&["bias-scan", "--preset", "scenario1", "--points", "6"]);
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|row| row.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    // LS-to-Taubin gap at the shortest arc dwarfs the gap at the longest.
    let gap_first = rows.first().unwrap()[1] - rows.first().unwrap()[3];
    let gap_last = rows.last().unwrap()[1] - rows.last().unwrap()[3];
    assert!(gap_first > 100.0 * gap_last.abs().max(1e-12));
}

#[test]
fn bias_scan_supports_all_families() {
    for preset in ["scenario1", "scenario2", "scenario3-high", "scenario3-low"] {
        let out = run(&["bias-scan", "--preset", preset, "--points", "3"]);
        assert!(out.status.success(), "{preset}: {}", stderr(&out));
        assert_eq!(stdout(&out).lines().count(), 4);
    }
    let out = run(&["bias-scan", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn high_curvature_biases_exceed_low_curvature() {
    let high = run(&["bias-scan", "--preset", "scenario3-high", "--points", "9"]);
    let low = run(&["bias-scan", "--preset", "scenario3-low", "--points", "9"]);
    let parse = |out: &Output| -> Vec<Vec<f64>> {
        stdout(out)
            .lines()
            .skip(1)
            .map(|row| row.split(',').map(|f| f.parse().unwrap()).collect())
            .collect()
    };
    let high = parse(&high);
    let low = parse(&low);
    // Compare the LS column row by row while the arcs are short enough to
    // stay inside their anchor regions; longer arcs wrap around and the two
    // cases blur into each other.
    let mut compared = 0;
    for (h, l) in high.iter().zip(&low) {
        if h[0] <= 1.5 {
            assert!(h[1] > l[1], "high {h:?} vs low {l:?}");
            compared += 1;
        }
    }
    assert!(compared >= 2);
}

#[test]
fn output_files_are_written() {
    let path = std::env::temp_dir().join(format!("concentric-out-{}.csv", std::process::id()));
    let out = run(&[
        "simulate",
        "--preset",
        "exp2",
        "--sigma",
        "0.1",
        "--runs",
        "10",
        "--seed",
        "3",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("sigma,method,"));
    std::fs::remove_file(path).ok();
}
