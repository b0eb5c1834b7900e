//! `kle` — reproducible decomposition, truncation, and comparison runs
//! over weighted ensembles.
//!
//! Inputs are sniffed by header: a long-format mortality CSV
//! (`year,age,region,value`) becomes a region-blocked ensemble with
//! uniform weights; anything else must be an ensemble CSV
//! (`sample_id,w,c0,...`) whose space comes from `--space`, `--gram`, a
//! `<input>.space.json` sidecar, or defaults to Euclidean.  Every output
//! embeds the metadata needed to reproduce it (tool version, rank
//! tolerance, transform, PRNG id and seed) and never a timestamp, so
//! identical invocations produce byte-identical files.
//!
//! Exit codes: 0 success, 2 input problem, 3 numerical failure,
//! 4 infeasible truncation request.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kle_core::io::image::parse_grid_image;
use kle_core::io::mortality::{parse_mortality_csv, table_to_ensemble, Transform};
use kle_core::io::synth::{synth_ensemble, PRNG_ID};
use kle_core::io::{read_ensemble_csv, spectrum_csv, write_ensemble_csv};
use kle_core::{
    compare_with_tol, decompose_with_tol, Ensemble, Error, SpaceSpec, DEFAULT_RANK_TOL,
};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Decompose(a) => cmd_decompose(a),
        Cmd::Truncate(a) => cmd_truncate(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::ImageEmbed(a) => cmd_image_embed(a),
    }
}

#[derive(Parser)]
#[command(
    name = "kle",
    version,
    about = "Karhunen-Loeve decomposition of weighted ensembles, \
             with component-wise vs whole-space truncation comparison"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose an ensemble; write decomposition JSON plus a spectrum CSV
    Decompose(DecomposeArgs),
    /// Reconstruct from the leading M terms; write the reconstruction and
    /// report the residual against the spectrum tail
    Truncate(TruncateArgs),
    /// Compare component-wise and whole-space truncation at several levels
    Compare(CompareArgs),
    /// Generate a seeded synthetic ensemble with a prescribed spectrum
    Synth(SynthArgs),
    /// Embed an ASCII P2/P3 image into its grid-L2 space
    ImageEmbed(ImageEmbedArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input file: mortality CSV or ensemble CSV (recognized by header)
    #[arg(long)]
    input: PathBuf,
    /// Space JSON for ensemble input (overrides the sidecar)
    #[arg(long)]
    space: Option<PathBuf>,
    /// Inline Gram for ensemble input: "identity" or "diagonal:w1,w2,..."
    #[arg(long, conflicts_with = "space")]
    gram: Option<String>,
    /// Block layout Q:BASE attached to the space of ensemble input
    #[arg(long)]
    blocks: Option<String>,
    /// Value transform applied at mortality ingest
    #[arg(long, default_value = "identity", value_parser = ["identity", "log1p"])]
    transform: String,
    /// Mortality region filter: comma-separated names, defining block order
    #[arg(long)]
    regions: Option<String>,
    /// Mortality year range A:B, inclusive
    #[arg(long)]
    years: Option<String>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Relative cutoff for retaining singular values
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Decomposition JSON path; the spectrum CSV lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TruncateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Number of leading terms to keep
    #[arg(long)]
    m: usize,
    /// Reconstruction CSV path; a space sidecar lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Per-component truncation levels, e.g. 1,2,3,4,5,6 (strictly increasing)
    #[arg(long)]
    r0: String,
    /// Report path
    #[arg(long)]
    out: PathBuf,
    /// Report format
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct SynthArgs {
    /// PRNG seed (generator: chacha8)
    #[arg(long)]
    seed: u64,
    /// Number of samples to draw
    #[arg(long)]
    samples: usize,
    /// Block layout Q:BASE of the generated space
    #[arg(long)]
    blocks: String,
    /// Mode amplitudes, comma-separated and nonincreasing, e.g. 2.0,1.0,0.5
    #[arg(long)]
    spectrum: String,
    /// 0 keeps every mode on a single block; 1 draws dense modes
    #[arg(long, default_value_t = 0.0)]
    cross_coupling: f64,
    /// Ensemble CSV path; a space sidecar lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImageEmbedArgs {
    /// ASCII P2 (graymap) or P3 (pixmap) image
    #[arg(long)]
    input: PathBuf,
    /// Grid size ROWSxCOLS, e.g. 64x48
    #[arg(long)]
    grid: String,
    /// Channel count: 1 for P2, 3 for P3
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Single-sample ensemble CSV path; a space sidecar lands next to it
    #[arg(long)]
    out: PathBuf,
}

/// A classified failure: the message goes to stderr, the code to the shell.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn output(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

fn lib_failure(e: Error) -> Failure {
    let code = match e {
        Error::NonSPDGram(_)
        | Error::NonFiniteInput
        | Error::DegenerateBasis
        | Error::CrossBlockGram => 3,
        Error::MOutOfRange { .. } | Error::R0OutOfRange { .. } | Error::SpectrumTooLong { .. } => 4,
        _ => 2,
    };
    Failure { code, message: e.to_string() }
}

/// Reproducibility metadata carried by every output.
struct Meta {
    rank_tol: Option<f64>,
    transform: Option<Transform>,
    prng: Option<(&'static str, u64)>,
}

impl Meta {
    fn json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        m.insert(
            "tool".into(),
            format!("kle {}", env!("CARGO_PKG_VERSION")).into(),
        );
        if let Some(t) = self.rank_tol {
            m.insert("rank_tol".into(), serde_json::json!(t));
        }
        if let Some(t) = self.transform {
            m.insert("transform".into(), t.id().into());
        }
        if let Some((id, seed)) = self.prng {
            m.insert("prng".into(), id.into());
            m.insert("seed".into(), serde_json::json!(seed));
        }
        serde_json::Value::Object(m)
    }

    fn csv_comments(&self) -> String {
        let mut s = format!("# tool: kle {}\n", env!("CARGO_PKG_VERSION"));
        if let Some(t) = self.rank_tol {
            s.push_str(&format!("# rank_tol: {t:e}\n"));
        }
        if let Some(t) = self.transform {
            s.push_str(&format!("# transform: {}\n", t.id()));
        }
        if let Some((id, seed)) = self.prng {
            s.push_str(&format!("# prng: {id}\n# seed: {seed}\n"));
        }
        s
    }
}

struct LoadedInput {
    ensemble: Ensemble,
    /// Set when the input was a mortality table.
    transform: Option<Transform>,
}

fn load_input(args: &InputArgs) -> Result<LoadedInput, Failure> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.input.display())))?;
    let header = first_data_line(&text);
    if header == Some("year,age,region,value") {
        if args.space.is_some() || args.gram.is_some() || args.blocks.is_some() {
            return Err(Failure::input(
                "--space/--gram/--blocks do not apply to mortality input; \
                 its space is Euclidean, blocked by region",
            ));
        }
        let transform: Transform = args.transform.parse().map_err(lib_failure)?;
        let regions: Option<Vec<String>> = args
            .regions
            .as_ref()
            .map(|s| s.split(',').map(str::to_string).collect());
        let years = args.years.as_deref().map(parse_year_range).transpose()?;
        let table = parse_mortality_csv(&text, regions.as_deref(), years, transform)
            .map_err(lib_failure)?;
        let ensemble = table_to_ensemble(&table).map_err(lib_failure)?;
        Ok(LoadedInput { ensemble, transform: Some(transform) })
    } else {
        if args.regions.is_some() || args.years.is_some() {
            return Err(Failure::input("--regions/--years apply only to mortality input"));
        }
        if args.transform != "identity" {
            return Err(Failure::input("--transform applies only to mortality input"));
        }
        let d = ensemble_dim_from_header(header)?;
        let space = resolve_space(args, d)?;
        let ensemble = read_ensemble_csv(&text, space).map_err(lib_failure)?;
        Ok(LoadedInput { ensemble, transform: None })
    }
}

fn first_data_line(text: &str) -> Option<&str> {
    text.lines()
        .map(|l| l.trim_end_matches('\r'))
        .find(|l| !l.is_empty() && !l.starts_with('#'))
}

fn ensemble_dim_from_header(header: Option<&str>) -> Result<usize, Failure> {
    let header = header.ok_or_else(|| Failure::input("input file has no data lines"))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "sample_id" || fields[1] != "w" {
        return Err(Failure::input(
            "unrecognized input: expected a mortality CSV (header year,age,region,value) \
             or an ensemble CSV (header sample_id,w,c0,...)",
        ));
    }
    Ok(fields.len() - 2)
}

fn resolve_space(args: &InputArgs, d: usize) -> Result<SpaceSpec, Failure> {
    let mut space = if let Some(path) = &args.space {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        SpaceSpec::from_json(&text).map_err(lib_failure)?
    } else if let Some(gram) = &args.gram {
        parse_gram_flag(gram, d)?
    } else {
        let sidecar = args.input.with_extension("space.json");
        if sidecar.exists() {
            let text = fs::read_to_string(&sidecar)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", sidecar.display())))?;
            SpaceSpec::from_json(&text).map_err(lib_failure)?
        } else {
            SpaceSpec::identity(d).map_err(lib_failure)?
        }
    };
    if space.dim() != d {
        return Err(Failure::input(format!(
            "space dimension {} does not match the {} coefficient columns of the input",
            space.dim(),
            d
        )));
    }
    if let Some(layout) = &args.blocks {
        let (q, base_dim) = parse_blocks(layout)?;
        space = space.with_blocks(q, base_dim).map_err(lib_failure)?;
    }
    Ok(space)
}

fn parse_gram_flag(gram: &str, d: usize) -> Result<SpaceSpec, Failure> {
    if gram == "identity" {
        return SpaceSpec::identity(d).map_err(lib_failure);
    }
    if let Some(rest) = gram.strip_prefix("diagonal:") {
        let weights = parse_f64_list(rest, "--gram diagonal weights")?;
        if weights.len() != d {
            return Err(Failure::input(format!(
                "--gram diagonal lists {} weights for {} coefficient columns",
                weights.len(),
                d
            )));
        }
        return SpaceSpec::diagonal(weights).map_err(lib_failure);
    }
    Err(Failure::input(
        "unsupported --gram: use \"identity\", \"diagonal:w1,...,wd\", \
         or --space with a JSON file for a dense Gram",
    ))
}

fn parse_year_range(s: &str) -> Result<(i64, i64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let fail = || Failure::input(format!("--years {s:?} is not of the form A:B"));
    if parts.len() != 2 {
        return Err(fail());
    }
    let a: i64 = parts[0].parse().map_err(|_| fail())?;
    let b: i64 = parts[1].parse().map_err(|_| fail())?;
    if a > b {
        return Err(Failure::input(format!("--years range {a}:{b} is empty")));
    }
    Ok((a, b))
}

fn parse_blocks(s: &str) -> Result<(usize, usize), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let fail = || Failure::input(format!("--blocks {s:?} is not of the form Q:BASE"));
    if parts.len() != 2 {
        return Err(fail());
    }
    let q: usize = parts[0].parse().map_err(|_| fail())?;
    let base: usize = parts[1].parse().map_err(|_| fail())?;
    Ok((q, base))
}

fn parse_grid(s: &str) -> Result<(usize, usize), Failure> {
    let parts: Vec<&str> = s.split('x').collect();
    let fail = || Failure::input(format!("--grid {s:?} is not of the form ROWSxCOLS"));
    if parts.len() != 2 {
        return Err(fail());
    }
    Ok((
        parts[0].parse().map_err(|_| fail())?,
        parts[1].parse().map_err(|_| fail())?,
    ))
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Failure::input(format!("{what}: {tok:?} is not a number")))
        })
        .collect()
}

fn parse_r0_list(s: &str) -> Result<Vec<usize>, Failure> {
    let list: Vec<usize> = s
        .split(',')
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Failure::input(format!("--r0: {tok:?} is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    if list.is_empty() || list[0] == 0 {
        return Err(Failure::input("--r0 needs strictly positive levels"));
    }
    if list.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Failure::input("--r0 levels must be strictly increasing"));
    }
    Ok(list)
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), Failure> {
    fs::write(path, content)
        .map_err(|e| Failure::output(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn cmd_decompose(a: DecomposeArgs) -> Result<(), Failure> {
    let loaded = load_input(&a.input)?;
    let kle = decompose_with_tol(&loaded.ensemble, a.rank_tol).map_err(lib_failure)?;
    if kle.rank() == 0 {
        eprintln!("warning: ensemble is constant up to the rank tolerance; the spectrum is empty");
    }
    let meta = Meta { rank_tol: Some(a.rank_tol), transform: loaded.transform, prng: None };
    let mut v = kle.to_json_value();
    v.as_object_mut()
        .expect("decomposition serializes to an object")
        .insert("meta".into(), meta.json());
    write_file(&a.out, &pretty(&v))?;
    let spectrum_path = a.out.with_extension("spectrum.csv");
    let mut s = meta.csv_comments();
    s.push_str(&spectrum_csv(&kle));
    write_file(&spectrum_path, &s)?;
    println!(
        "decomposed N={} d={} to rank {}; wrote {} and {}",
        loaded.ensemble.len(),
        loaded.ensemble.dim(),
        kle.rank(),
        a.out.display(),
        spectrum_path.display()
    );
    Ok(())
}

fn cmd_truncate(a: TruncateArgs) -> Result<(), Failure> {
    let loaded = load_input(&a.input)?;
    let ens = &loaded.ensemble;
    let kle = decompose_with_tol(ens, a.rank_tol).map_err(lib_failure)?;
    let recon = kle.reconstruct(a.m).map_err(lib_failure)?;

    // Residual measured directly on the samples; independently, the
    // spectrum tail says what it must be.
    let diff = Ensemble::new(
        ens.space().clone(),
        ens.samples() - recon.samples(),
        ens.weights().to_vec(),
    )
    .map_err(lib_failure)?;
    let residual_sq = diff.bochner_norm_sq();
    let spectrum_tail: f64 = kle.lambdas()[a.m..].iter().sum();

    let meta = Meta { rank_tol: Some(a.rank_tol), transform: loaded.transform, prng: None };
    let mut text = meta.csv_comments();
    text.push_str(&write_ensemble_csv(&recon));
    write_file(&a.out, &text)?;
    write_file(
        &a.out.with_extension("space.json"),
        &(ens.space().to_json() + "\n"),
    )?;
    let summary = serde_json::json!({
        "m": a.m,
        "rank": kle.rank(),
        "residual_sq": residual_sq,
        "spectrum_tail": spectrum_tail,
        "meta": meta.json(),
    });
    println!("{}", pretty(&summary).trim_end());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let loaded = load_input(&a.input)?;
    let r0 = parse_r0_list(&a.r0)?;
    let report =
        compare_with_tol(&loaded.ensemble, &r0, a.rank_tol).map_err(lib_failure)?;

    let meta = Meta { rank_tol: Some(a.rank_tol), transform: loaded.transform, prng: None };
    match a.format.as_str() {
        "csv" => {
            let mut text = meta.csv_comments();
            text.push_str(&report.to_csv());
            write_file(&a.out, &text)?;
        }
        _ => {
            let mut v = report.to_json_value();
            v.as_object_mut()
                .expect("report serializes to an object")
                .insert("meta".into(), meta.json());
            write_file(&a.out, &pretty(&v))?;
        }
    }

    println!(
        "{:>6}  {:>6}  {:>8}  {:>16}  {:>16}",
        "r0", "total", "realized", "componentwise", "vector-field"
    );
    for k in 0..report.r0_values.len() {
        println!(
            "{:>6}  {:>6}  {:>8}  {:>16.9e}  {:>16.9e}",
            report.r0_values[k],
            report.total_terms[k],
            report.realized_terms[k],
            report.componentwise_rel_err[k],
            report.vectorfield_rel_err[k],
        );
    }
    // How many component-wise terms does the first whole-space level buy?
    let target = report.vectorfield_rel_err[0];
    let matched = report
        .r0_values
        .iter()
        .zip(&report.componentwise_rel_err)
        .find(|(_, e)| **e <= target + 1e-15);
    match matched {
        Some((r0_match, _)) => println!(
            "component-wise truncation matches the whole-space error of {} total terms \
             at r0={} ({} total terms)",
            report.total_terms[0],
            r0_match,
            r0_match * report.q
        ),
        None => println!(
            "component-wise truncation does not reach the whole-space error of {} total \
             terms within the evaluated levels",
            report.total_terms[0]
        ),
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let (q, base_dim) = parse_blocks(&a.blocks)?;
    let spectrum = parse_f64_list(&a.spectrum, "--spectrum")?;
    let ens = synth_ensemble(a.seed, a.samples, q, base_dim, &spectrum, a.cross_coupling)
        .map_err(lib_failure)?;
    let meta = Meta { rank_tol: None, transform: None, prng: Some((PRNG_ID, a.seed)) };
    let mut text = meta.csv_comments();
    text.push_str(&write_ensemble_csv(&ens));
    write_file(&a.out, &text)?;
    write_file(
        &a.out.with_extension("space.json"),
        &(ens.space().to_json() + "\n"),
    )?;
    println!(
        "wrote {} samples of dimension {} ({} blocks of {}) to {}",
        ens.len(),
        ens.dim(),
        q,
        base_dim,
        a.out.display()
    );
    Ok(())
}

fn cmd_image_embed(a: ImageEmbedArgs) -> Result<(), Failure> {
    let (m, n) = parse_grid(&a.grid)?;
    let text = fs::read_to_string(&a.input)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", a.input.display())))?;
    let (space, point) = parse_grid_image(&text, m, n, a.channels).map_err(lib_failure)?;
    let norm_sq = space.norm_sq(&point).map_err(lib_failure)?;
    let dim = space.dim();
    let ens = Ensemble::from_points(space, &[point], vec![1.0]).map_err(lib_failure)?;
    write_file(&a.out, &write_ensemble_csv(&ens))?;
    write_file(
        &a.out.with_extension("space.json"),
        &(ens.space().to_json() + "\n"),
    )?;
    let summary = serde_json::json!({ "dim": dim, "norm_sq": norm_sq });
    println!("{}", pretty(&summary).trim_end());
    Ok(())
}
