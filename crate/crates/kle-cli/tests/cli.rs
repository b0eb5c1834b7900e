//! End-to-end checks of the command-line surface: input sniffing, space
//! resolution, flag validation, exit codes, and the shape of every output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn kle<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_kle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, content).expect("fixture write");
    path
}

fn toy_csv(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "toy.csv",
        "sample_id,w,c0,c1\n\
         0,0.3333333333333333,1,0\n\
         1,0.3333333333333333,-1,0\n\
         2,0.3333333333333333,0,0\n",
    )
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).expect("output exists")).expect("valid JSON")
}

#[test]
fn decompose_writes_decomposition_and_spectrum() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    let out = dir.path().join("decomposition.json");
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));

    let v = read_json(&out);
    let lambdas = v["lambdas"].as_array().unwrap();
    assert_eq!(lambdas.len(), 1);
    assert!((lambdas[0].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);
    assert_eq!(v["meta"]["tool"].as_str().unwrap(), concat!("kle ", env!("CARGO_PKG_VERSION")));
    assert!(v["meta"]["rank_tol"].as_f64().unwrap() > 0.0);

    let spectrum = fs::read_to_string(out.with_extension("spectrum.csv")).unwrap();
    let data: Vec<&str> = spectrum.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "r,lambda,cumulative_fraction");
    assert_eq!(data.len(), 2);
    assert!(data[1].starts_with("1,"));
    assert!(data[1].ends_with(",1"));
}

#[test]
fn inline_diagonal_gram_is_honored() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "pair.csv",
        "sample_id,w,c0,c1\n0,0.5,1,0\n1,0.5,-1,0\n",
    );
    let out = dir.path().join("d.json");
    let run = kle([
        "decompose".into(),
        "--input".into(),
        input.display().to_string(),
        "--gram".into(),
        "diagonal:4,1".into(),
        "--out".into(),
        out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let v = read_json(&out);
    assert!((v["lambdas"][0].as_f64().unwrap() - 4.0).abs() <= 1e-12);
    assert!((v["phis"][0][0].as_f64().unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn synth_sidecar_feeds_later_commands() {
    let dir = TempDir::new().unwrap();
    let ens = dir.path().join("synthetic.csv");
    let run = kle([
        "synth",
        "--seed",
        "7",
        "--samples",
        "24",
        "--blocks",
        "3:5",
        "--spectrum",
        "2.0,1.0,0.5,0.25",
        "--out",
        &ens.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    assert!(ens.with_extension("space.json").exists());

    // compare needs the block structure, which must come from the sidecar
    let report = dir.path().join("report.csv");
    let run = kle([
        "compare",
        "--input",
        &ens.display().to_string(),
        "--r0",
        "1,2,3",
        "--out",
        &report.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let text = fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "r0,total_terms,componentwise_rel_err,vectorfield_rel_err");
    assert_eq!(rows.len(), 4);
}

#[test]
fn compare_json_format_carries_both_error_families() {
    let dir = TempDir::new().unwrap();
    let ens = dir.path().join("synthetic.csv");
    kle([
        "synth", "--seed", "11", "--samples", "20", "--blocks", "2:4", "--spectrum", "1.0,0.5",
        "--out", &ens.display().to_string(),
    ]);
    let report = dir.path().join("report.json");
    let run = kle([
        "compare",
        "--input",
        &ens.display().to_string(),
        "--r0",
        "1,2",
        "--format",
        "json",
        "--out",
        &report.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let v = read_json(&report);
    assert_eq!(v["q"].as_u64().unwrap(), 2);
    assert_eq!(v["r0_values"].as_array().unwrap().len(), 2);
    assert!(v["componentwise_rel_err"].is_array());
    assert!(v["vectorfield_rel_err"].is_array());
    assert!(v["componentwise_rel_err_centered"].is_array());
    assert!(v["meta"]["tool"].is_string());
}

#[test]
fn truncate_reports_residual_and_tail() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    let out = dir.path().join("recon.csv");
    let run = kle([
        "truncate",
        "--input",
        &input.display().to_string(),
        "--m",
        "0",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let v = stdout_json(&run);
    assert_eq!(v["m"].as_u64().unwrap(), 0);
    assert_eq!(v["rank"].as_u64().unwrap(), 1);
    assert!((v["residual_sq"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);
    assert!((v["spectrum_tail"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);

    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "sample_id,w,c0,c1");
    assert_eq!(rows.len(), 4); // mean-only reconstruction of three samples
    assert!(out.with_extension("space.json").exists());
}

#[test]
fn mortality_pipeline_filters_and_transforms() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("year,age,region,value\n");
    for year in 2000..=2003 {
        for region in ["n", "s"] {
            for age in 0..3 {
                csv.push_str(&format!("{year},{age},{region},0.0{age}{year}\n"));
            }
        }
    }
    let input = write(&dir, "mort.csv", &csv);
    let out = dir.path().join("d.json");
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--transform",
        "log1p",
        "--years",
        "2000:2002",
        "--regions",
        "s",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let v = read_json(&out);
    assert_eq!(v["mean"].as_array().unwrap().len(), 3); // one region, three ages
    assert_eq!(v["meta"]["transform"].as_str().unwrap(), "log1p");
}

#[test]
fn image_embed_produces_a_unit_weight_sample() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "img.pgm", "P2\n# a comment\n2 2\n128\n128 64\n0 32\n");
    let out = dir.path().join("img.csv");
    let run = kle([
        "image-embed",
        "--input",
        &input.display().to_string(),
        "--grid",
        "2x2",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    let v = stdout_json(&run);
    assert_eq!(v["dim"].as_u64().unwrap(), 4);
    assert!(v["norm_sq"].as_f64().unwrap() > 0.0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("sample_id,w,c0,c1,c2,c3\n"));
    assert_eq!(text.lines().count(), 2);
    let space: serde_json::Value = read_json(&out.with_extension("space.json"));
    assert_eq!(space["gram"]["kind"].as_str().unwrap(), "diagonal");
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "sample_id,w,c0\n0,0.5,oops\n1,0.5,1\n");
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 2, "stderr: {}", stderr(&run));
    assert!(stderr(&run).starts_with("error:"));
}

#[test]
fn unrecognized_header_exits_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "time,price\n1,2\n");
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("mortality CSV"));
}

#[test]
fn incomplete_mortality_grid_exits_2_naming_the_hole() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "mort.csv",
        "year,age,region,value\n\
         2000,0,n,0.1\n2000,1,n,0.2\n2001,0,n,0.1\n",
    );
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 2);
    let msg = stderr(&run);
    assert!(msg.contains("2001") && msg.contains('n'), "unhelpful message: {msg}");
}

#[test]
fn non_spd_gram_exits_3() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    let space = write(
        &dir,
        "space.json",
        r#"{"dim":2,"gram":{"kind":"dense","values":[1.0,2.0,2.0,1.0]},"blocks":null}"#,
    );
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--space",
        &space.display().to_string(),
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 3, "stderr: {}", stderr(&run));
}

#[test]
fn infeasible_truncation_level_exits_4() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    let run = kle([
        "truncate",
        "--input",
        &input.display().to_string(),
        "--m",
        "5",
        "--out",
        &dir.path().join("x.csv").display().to_string(),
    ]);
    assert_eq!(code(&run), 4, "stderr: {}", stderr(&run));
}

#[test]
fn oversized_synth_spectrum_exits_4() {
    let dir = TempDir::new().unwrap();
    let run = kle([
        "synth", "--seed", "1", "--samples", "3", "--blocks", "2:2", "--spectrum",
        "1.0,0.5,0.25", "--out", &dir.path().join("x.csv").display().to_string(),
    ]);
    assert_eq!(code(&run), 4, "stderr: {}", stderr(&run));
}

#[test]
fn constant_ensemble_warns_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "const.csv",
        "sample_id,w,c0\n0,0.5,3.25\n1,0.5,3.25\n",
    );
    let out = dir.path().join("d.json");
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", stderr(&run));
    assert!(stderr(&run).contains("constant"));
    assert_eq!(read_json(&out)["lambdas"].as_array().unwrap().len(), 0);
}

#[test]
fn mortality_flags_are_rejected_for_ensemble_input() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    for extra in [vec!["--years", "2000:2001"], vec!["--regions", "n"], vec!["--transform", "log1p"]] {
        let mut args = vec![
            "decompose".to_string(),
            "--input".into(),
            input.display().to_string(),
            "--out".into(),
            dir.path().join("x.json").display().to_string(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let run = kle(args);
        assert_eq!(code(&run), 2, "{extra:?} should be rejected for ensemble input");
    }
}

#[test]
fn ensemble_flags_are_rejected_for_mortality_input() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "mort.csv",
        "year,age,region,value\n2000,0,n,0.1\n",
    );
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--gram",
        "identity",
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("mortality"));
}

#[test]
fn bad_gram_flag_exits_2() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    for gram in ["dense:1,0,0,1", "diagonal:1"] {
        let run = kle([
            "decompose",
            "--input",
            &input.display().to_string(),
            "--gram",
            gram,
            "--out",
            &dir.path().join("x.json").display().to_string(),
        ]);
        assert_eq!(code(&run), 2, "--gram {gram} should be rejected");
    }
}

#[test]
fn blocks_flag_must_factor_the_dimension() {
    let dir = TempDir::new().unwrap();
    let input = toy_csv(&dir);
    let run = kle([
        "decompose",
        "--input",
        &input.display().to_string(),
        "--blocks",
        "3:4",
        "--out",
        &dir.path().join("x.json").display().to_string(),
    ]);
    assert_eq!(code(&run), 2, "stderr: {}", stderr(&run));
}
