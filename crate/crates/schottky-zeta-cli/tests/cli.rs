//! End-to-end checks of the command-line surface: document schemas, exit
//! codes, CSV round-trips and output determinism on inexpensive commands.

use std::io::Write;
use std::process::{Command, Output};

use rug::{Complex, Float};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schottky-zeta"))
}

fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("schottky-zeta-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

fn group_a_path() -> std::path::PathBuf {
    write_temp("group_a.json", &schottky_zeta::samples::group_a_json(128))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn classes_stream_and_counts() {
    let out = run(&["classes", "--rank", "2", "--max-len", "2"]);
    assert!(out.status.success());
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().trim().lines().collect();
    assert_eq!(lines.len(), 8);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["word"], serde_json::json!([1]));

    let out = run(&["classes", "--rank", "2", "--max-len", "2", "--count-only"]);
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(doc["schema"], "schottky-zeta/1");
    assert_eq!(doc["total"], 8);
    assert_eq!(doc["by_length"], serde_json::json!([4, 4]));
}

#[test]
fn malformed_group_spec_exits_2() {
    let path = write_temp("broken.json", "{ this is not json");
    let out = run(&["products", "--group", path.to_str().unwrap(), "--what", "f1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["products", "--group", "/nonexistent/nowhere.json", "--what", "f1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ratio_on_nonreal_group_exits_1() {
    let path = write_temp("nonreal.json", &schottky_zeta::samples::nonreal_group_json(128));
    let out = run(&[
        "products", "--group", path.to_str().unwrap(), "--what", "ratio", "--k", "2",
        "--max-len", "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not real"), "stderr: {err}");
}

#[test]
fn products_json_is_deterministic() {
    let path = group_a_path();
    let args = ["products", "--group", path.to_str().unwrap(), "--what", "f1", "--max-len", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "identical invocations must be byte-identical");
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(doc["schema"], "schottky-zeta/1");
    assert!(doc["value"].is_array());
}

#[test]
fn shell_table_reproduces_the_value() {
    let path = group_a_path();
    let json_out = run(&[
        "products", "--group", path.to_str().unwrap(), "--what", "f1", "--max-len", "4",
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&json_out.stdout).unwrap()).unwrap();
    let value_re: Float = Float::with_val(128, Float::parse(doc["value"][0].as_str().unwrap()).unwrap());
    let value_im: Float = Float::with_val(128, Float::parse(doc["value"][1].as_str().unwrap()).unwrap());

    let csv_out = run(&[
        "products", "--group", path.to_str().unwrap(), "--what", "f1", "--max-len", "4", "--csv",
    ]);
    let text = std::str::from_utf8(&csv_out.stdout).unwrap();
    let last = text.trim().lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols.len(), 6);
    let cum = Complex::with_val(
        128,
        (
            Float::with_val(128, Float::parse(cols[4]).unwrap()),
            Float::with_val(128, Float::parse(cols[5]).unwrap()),
        ),
    );
    let rebuilt = cum.exp();
    let err_re = (rebuilt.real().clone() - &value_re).abs();
    let err_im = (rebuilt.imag().clone() - &value_im).abs();
    let ulp = Float::with_val(128, 1e-36);
    assert!(err_re < ulp && err_im < ulp, "round-trip error {err_re} {err_im}");
}

#[test]
fn shell_table_empty_truncation_is_header_only() {
    let path = group_a_path();
    let out = run(&[
        "products", "--group", path.to_str().unwrap(), "--what", "fk", "--k", "2",
        "--max-len", "0", "--csv",
    ]);
    assert!(out.status.success());
    let text = std::str::from_utf8(&out.stdout).unwrap();
    assert_eq!(text.trim().lines().count(), 1, "header only: {text}");
}

#[test]
fn tate_and_telescope_documents() {
    let out = run(&["tate-check", "--z0", "5/7", "--order", "12"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(doc["residual_zero"], true);
    assert_eq!(doc["first_nonzero_order"], serde_json::Value::Null);

    let out = run(&["telescope", "--k", "2", "--order", "20"]);
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(doc["residual_zero"], true);

    let out = run(&["tate-check", "--z0", "1", "--order", "12"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn expand_word_and_mod_p() {
    let out = run(&[
        "expand", "--g", "2", "--x-values", "-2=3", "--degree", "4", "--word", "1",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let monomials = doc["monomials"].as_array().unwrap();
    assert_eq!(monomials.len(), 1);
    assert_eq!(monomials[0]["exp"], serde_json::json!([1, 0]));
    assert_eq!(monomials[0]["num"], "1");

    let out = run(&[
        "expand", "--g", "2", "--x-values", "-2=3", "--degree", "3", "--f1", "--mod-p", "5",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(doc["monomials"].as_array().unwrap().iter().all(|m| m.get("res").is_some()));
}

#[test]
fn zeta_below_convergence_warns_on_stderr() {
    let path = group_a_path();
    let out = run(&[
        "zeta", "--group", path.to_str().unwrap(), "--s", "1.5,0", "--max-len", "4",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn env_precision_applies_to_unspecified_specs() {
    // strip the precision field from the bundled spec
    let spec = schottky_zeta::samples::group_b_json(128).replace("\"precision_bits\": 128,", "");
    let path = write_temp("group_b_noprec.json", &spec);
    let out = bin()
        .args(["products", "--group", path.to_str().unwrap(), "--what", "f1", "--max-len", "3"])
        .env("SCHOTTKY_PRECISION_BITS", "96")
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    // 96-bit values render with fewer digits than 128-bit ones
    let digits = doc["value"][0].as_str().unwrap().len();
    assert!(digits < 40, "value rendered with {digits} chars");
}
