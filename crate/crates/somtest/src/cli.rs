//! Command-line front end: `test` runs one two-sample test on two CSV
//! files, `power` estimates error rates on synthetic pairs, `export`
//! re-emits grid artifacts from a saved model.
//!
//! Exit status reflects operational success only; a rejected null
//! hypothesis still exits 0.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{power_run, sample_pair, Family, GeneratorSpec, PowerReport};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::export::{
    planes_doc, write_json, CountsDoc, GridValuesDoc, ResultDoc,
};
use crate::som::{InitMethod, MapGeometry, SomModel, TrainMode, TrainSchedule};
use crate::two_sample::{run_test, Method, TestParams, TestResult};

pub const RESULT_FILE: &str = "result.json";
pub const MODEL_FILE: &str = "som_model.json";
pub const COUNTS_FILE: &str = "counts.json";
pub const RELDIFF_FILE: &str = "relative_difference.json";
pub const PLANES_FILE: &str = "codebook_planes.json";

#[derive(Parser, Debug)]
#[command(name = "somtest", version, about = "Nonparametric two-sample tests on self-organizing maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a two-sample test on two CSV files and write its artifacts.
    Test(TestArgs),
    /// Estimate empirical type I/II error rates on synthetic Gaussian pairs.
    Power(PowerArgs),
    /// Re-emit grid artifacts from a saved model and two CSV files.
    Export(ExportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Som,
    Knn,
    C2stNn,
    C2stKnn,
    Mmd,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Som => Method::SomChi2,
            MethodArg::Knn => Method::KnnCoincidence,
            MethodArg::C2stNn => Method::C2stNn,
            MethodArg::C2stKnn => Method::C2stKnn,
            MethodArg::Mmd => Method::MmdB,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Batch,
    Online,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum InitArg {
    Random,
    Pca,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FamilyArg {
    #[value(alias = "gauss_location")]
    GaussLocation,
    #[value(alias = "gauss_scale")]
    GaussScale,
    #[value(alias = "gauss_fair_location")]
    GaussFairLocation,
    #[value(alias = "gauss_fair_scale")]
    GaussFairScale,
}

impl From<FamilyArg> for Family {
    fn from(value: FamilyArg) -> Self {
        match value {
            FamilyArg::GaussLocation => Family::GaussLocation,
            FamilyArg::GaussScale => Family::GaussScale,
            FamilyArg::GaussFairLocation => Family::GaussFairLocation,
            FamilyArg::GaussFairScale => Family::GaussFairScale,
        }
    }
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// First sample (CSV with a header line).
    pub x: PathBuf,
    /// Second sample (CSV with a header line).
    pub z: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Som)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub height: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Batch)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    /// Significance level used for the printed verdict.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving the result document and SOM artifacts.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Neighbors for the coincidence statistic.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 199)]
    pub perms: usize,
    #[arg(long, default_value_t = 0.5)]
    pub test_fraction: f64,
    /// MMD block size; defaults to floor(sqrt(n)).
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Gaussian kernel bandwidth; defaults to the median heuristic.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Som)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = FamilyArg::GaussLocation)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Second sample size; defaults to n.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean shift (location families) or scale factor (fair scale).
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    /// Wishart degrees of freedom for the scale family; defaults to dim.
    #[arg(long)]
    pub wishart_dof: Option<usize>,
    /// Draw the alternative pairs under the null too (calibration run).
    #[arg(long)]
    pub null: bool,
    /// Write the report table (header plus one row) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub height: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Saved model document.
    #[arg(long)]
    pub model: PathBuf,
    /// First sample (CSV).
    pub x: PathBuf,
    /// Second sample (CSV).
    pub z: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Power(args) => cmd_power(&args),
        Command::Export(args) => cmd_export(&args),
    }
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let x = Dataset::from_csv_path(&args.x)?;
    let z = Dataset::from_csv_path(&args.z)?;
    let geometry = MapGeometry::new(args.width, args.height)?;
    let schedule = TrainSchedule {
        epochs: args.epochs,
        mode: match args.mode {
            ModeArg::Batch => TrainMode::Batch,
            ModeArg::Online => TrainMode::Online,
        },
        init: match args.init {
            InitArg::Random => InitMethod::Random,
            InitArg::Pca => InitMethod::Pca,
        },
        ..TrainSchedule::for_geometry(&geometry).with_seed(args.seed)
    };
    let params = TestParams {
        geometry,
        schedule,
        coincidence_k: args.k,
        n_permutations: args.perms,
        test_fraction: args.test_fraction,
        block_size: args.block_size,
        bandwidth: args.bandwidth,
        ..TestParams::new(args.seed)
    };
    let method: Method = args.method.into();
    let result = run_test(method, &x, &z, &params)?;

    std::fs::create_dir_all(&args.out)?;
    let written = write_test_artifacts(&args.out, &result)?;

    println!("method: {}", result.method.name());
    println!("statistic: {}", result.statistic);
    println!("p_value: {}", result.p_value);
    println!(
        "reject_h0_at_alpha_{}: {}",
        args.alpha,
        if result.p_value <= args.alpha { "yes" } else { "no" }
    );
    for path in written {
        println!("wrote: {}", path.display());
    }
    Ok(())
}

/// Write the result document plus, for the SOM test, the model and grids.
/// Returns the written paths.
pub fn write_test_artifacts(dir: &Path, result: &TestResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let model_path = result.model.as_ref().map(|_| MODEL_FILE.to_string());
    let doc = ResultDoc::new(result, model_path)?;
    let result_path = dir.join(RESULT_FILE);
    write_json(&result_path, &doc)?;
    written.push(result_path);

    if let (Some(model), Some(grid)) = (&result.model, &result.counts) {
        let model_file = dir.join(MODEL_FILE);
        model.save(&model_file)?;
        written.push(model_file);

        let counts_path = dir.join(COUNTS_FILE);
        write_json(&counts_path, &CountsDoc::new(model.geometry(), grid)?)?;
        written.push(counts_path);

        let reldiff_path = dir.join(RELDIFF_FILE);
        write_json(
            &reldiff_path,
            &GridValuesDoc::new(model.geometry(), grid.relative_difference())?,
        )?;
        written.push(reldiff_path);

        let planes_path = dir.join(PLANES_FILE);
        write_json(&planes_path, &planes_doc(model, grid)?)?;
        written.push(planes_path);
    }
    Ok(written)
}

fn cmd_power(args: &PowerArgs) -> Result<()> {
    let dim = args.dim;
    let spec = GeneratorSpec {
        family: args.family.into(),
        dim,
        shift: args.shift,
        wishart_dof: args.wishart_dof.unwrap_or(dim),
        seed: args.seed,
    };
    let geometry = MapGeometry::new(args.width, args.height)?;
    let schedule = TrainSchedule {
        epochs: args.epochs,
        ..TrainSchedule::for_geometry(&geometry).with_seed(args.seed)
    };
    let params = TestParams {
        geometry,
        schedule,
        ..TestParams::new(args.seed)
    };
    let m = args.m.unwrap_or(args.n);
    let report = power_run(
        args.method.into(),
        &spec,
        args.n,
        m,
        args.alpha,
        args.reps,
        args.seed,
        &params,
        args.null,
    )?;

    println!("{}", PowerReport::CSV_HEADER);
    println!("{}", report.to_csv_row());
    if let Some(path) = &args.out {
        let mut text = String::from(PowerReport::CSV_HEADER);
        text.push('\n');
        text.push_str(&report.to_csv_row());
        text.push('\n');
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let model = SomModel::load(&args.model)?;
    let x = Dataset::from_csv_path(&args.x)?;
    let z = Dataset::from_csv_path(&args.z)?;
    if x.dim() != model.dim() || z.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: if x.dim() != model.dim() { x.dim() } else { z.dim() },
        });
    }
    let grid = model.project_counts(&x, &z)?;
    std::fs::create_dir_all(&args.out)?;

    let counts_path = args.out.join(COUNTS_FILE);
    write_json(&counts_path, &CountsDoc::new(model.geometry(), &grid)?)?;
    let reldiff_path = args.out.join(RELDIFF_FILE);
    write_json(
        &reldiff_path,
        &GridValuesDoc::new(model.geometry(), grid.relative_difference())?,
    )?;
    let planes_path = args.out.join(PLANES_FILE);
    write_json(&planes_path, &planes_doc(&model, &grid)?)?;

    for path in [&counts_path, &reldiff_path, &planes_path] {
        println!("wrote: {}", path.display());
    }
    Ok(())
}

/// Dump a generated pair to CSV files; handy for demos and smoke tests.
pub fn write_sample_csvs(
    spec: &GeneratorSpec,
    n: usize,
    m: usize,
    under_null: bool,
    x_path: &Path,
    z_path: &Path,
) -> Result<()> {
    let (x, z) = sample_pair(spec, n, m, under_null)?;
    for (data, path) in [(&x, x_path), (&z, z_path)] {
        let mut text = String::new();
        for j in 0..data.dim() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format!("f{j}"));
        }
        text.push('\n');
        for row in data.view().rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    text.push(',');
                }
                text.push_str(&format!("{v}"));
            }
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    Ok(())
}
