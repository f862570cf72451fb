//! Implementation of the `exact` command line. [`run`] takes the arguments
//! and output streams so the whole surface can be driven in-process.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use exact_core::assess::{auroc_matrix, AssessmentModel, ScoreMode};
use exact_core::config::RunConfig;
use exact_core::io::{
    group_by_action, read_buffer, read_collection, to_json_pretty, AurocReport, ModelBundle, SampleRecord, ScoreReport,
    TimelineFile,
};
use exact_core::mask::Matcher;
use exact_core::model::{merge_sequential, select_diverse, ExecutableActionModel};
use exact_core::parser::{parse_in, Language};
use exact_core::program::{Horizon, MotionProgram, ValidationReport};
use exact_core::runtime::compile_program;
use exact_core::sampler::{sample_many, CountRange, SamplerConfig};
use exact_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "exact",
    version,
    about = "Parse, sample, mask, compile and score ExAct motion programs"
)]
pub struct Cli {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a program file and print its syntax tree as JSON.
    Parse { file: PathBuf },
    /// Print a program file in canonical form.
    Fmt { file: PathBuf },
    /// Generate random valid programs as JSON lines.
    Sample(SampleArgs),
    /// Evaluate a token vocabulary against a program prefix.
    Mask(MaskArgs),
    /// Compile a program against a buffer into a latent timeline.
    Compile { program: PathBuf, buffer: PathBuf },
    /// Select a diverse program set for one action of a collection.
    Build {
        collection: PathBuf,
        #[arg(long)]
        label: String,
    },
    /// Append the second program after the first one.
    Merge { first: PathBuf, second: PathBuf },
    /// Score a query program against a model bundle.
    Score {
        bundle: PathBuf,
        query: PathBuf,
        #[arg(long, default_value = "mean_sigma")]
        mode: ScoreMode,
        /// Print a JSON report instead of the bare score.
        #[arg(long)]
        json: bool,
    },
    /// AUROC matrix over every collection found under a directory.
    Auroc {
        dir: PathBuf,
        #[arg(long, default_value = "min_sigma")]
        mode: ScoreMode,
        /// Also write the matrix as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion count, `N` or `MIN..MAX`.
    #[arg(long, default_value = "1..4")]
    pub motions: CountRange,
    /// Sensors per motion, `N` or `MIN..MAX`.
    #[arg(long, default_value = "1..3")]
    pub sensors: CountRange,
    /// Defaults to the configured horizon.
    #[arg(long)]
    pub horizon: Option<u32>,
    #[arg(long, default_value_t = 4)]
    pub decimals: u8,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, conflicts_with = "prefix_file")]
    pub prefix: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub prefix_file: Option<PathBuf>,
    /// One token per line; `<eof>` stands for end of input.
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: io::Error },
    Domain(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Domain(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn stdout_error(source: io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

/// Program files may end with a newline; the grammar itself has none.
fn read_program(path: &Path, horizon: Horizon) -> CliResult<(MotionProgram, ValidationReport)> {
    let raw = read(path)?;
    let text = raw.trim_end();
    match parse_in(text, &Language::new(horizon)) {
        Ok(parsed) => Ok((parsed.program, parsed.report)),
        Err(Error::Parse(e)) => {
            let rendered = e.render(text);
            let body = rendered.strip_prefix("error: ").unwrap_or(&rendered);
            Err(CliError::Domain(format!("{}: {body}", path.display())))
        }
        Err(e) => Err(CliError::Domain(format!("{}: {e}", path.display()))),
    }
}

fn warn(err: &mut dyn Write, path: &Path, report: &ValidationReport) {
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {}: {w}", path.display());
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let text = to_json_pretty(value)?;
    writeln!(out, "{text}").map_err(stdout_error)
}

#[derive(Serialize)]
struct ParseDump<'a> {
    canonical: String,
    program: &'a MotionProgram,
    warnings: &'a [exact_core::program::Violation],
    config: RunConfig,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_DOMAIN
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let config = match &cli.config {
        Some(path) => RunConfig::from_json(&read(path)?)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Parse { file } => {
            let (program, report) = read_program(&file, config.horizon)?;
            warn(err, &file, &report);
            emit_json(
                out,
                &ParseDump {
                    canonical: program.to_string(),
                    program: &program,
                    warnings: &report.warnings,
                    config,
                },
            )
        }
        Command::Fmt { file } => {
            let (program, report) = read_program(&file, config.horizon)?;
            warn(err, &file, &report);
            writeln!(out, "{program}").map_err(stdout_error)
        }
        Command::Sample(args) => cmd_sample(&args, &config, out),
        Command::Mask(args) => cmd_mask(&args, &config, out),
        Command::Compile { program, buffer } => {
            let (program, _) = read_program(&program, config.horizon)?;
            let entries = read_buffer(&read(&buffer)?).map_err(|e| in_file(&buffer, e))?;
            let timeline = compile_program(
                &program,
                &entries,
                &config.provider.build(),
                config.horizon,
                config.compile_options(),
            )?;
            emit_json(out, &TimelineFile { timeline, config })
        }
        Command::Build { collection, label } => {
            let records = read_collection(&read(&collection)?, config.horizon).map_err(|e| in_file(&collection, e))?;
            let candidates: Vec<_> = records
                .into_iter()
                .filter(|r| r.action_label == label)
                .map(|r| r.program)
                .collect();
            if candidates.is_empty() {
                return Err(CliError::Domain(format!(
                    "{}: no programs labelled `{label}`",
                    collection.display()
                )));
            }
            let model = ExecutableActionModel::select(label, &candidates, config.cap, config.horizon)?;
            let _ = writeln!(
                err,
                "selected {} of {} programs",
                model.programs.len(),
                model.selection_meta.candidate_count
            );
            emit_json(out, &ModelBundle::new(&model, &config))
        }
        Command::Merge { first, second } => {
            let (a, _) = read_program(&first, config.horizon)?;
            let (b, _) = read_program(&second, config.horizon)?;
            let merged = merge_sequential(&a, &b, config.horizon)?;
            writeln!(out, "{merged}").map_err(stdout_error)
        }
        Command::Score {
            bundle,
            query,
            mode,
            json,
        } => {
            let bundle_data = ModelBundle::from_json(&read(&bundle)?).map_err(|e| in_file(&bundle, e))?;
            // The bundle's own settings apply unless a config file overrides them.
            let config = if cli.config.is_some() {
                config
            } else {
                bundle_data.config
            };
            let programs = bundle_data.programs().map_err(|e| in_file(&bundle, e))?;
            let (query, _) = read_program(&query, bundle_data.horizon)?;
            let model = AssessmentModel::new(bundle_data.action_label.clone(), programs, config.costs, mode)?;
            let score = model.score(&query);
            if json {
                emit_json(
                    out,
                    &ScoreReport {
                        action_label: bundle_data.action_label,
                        query: query.to_string(),
                        score,
                        mode,
                        config,
                    },
                )
            } else {
                writeln!(out, "{score}").map_err(stdout_error)
            }
        }
        Command::Auroc { dir, mode, csv } => cmd_auroc(&dir, mode, csv.as_deref(), &config, out, err),
    }
}

fn in_file(path: &Path, e: Error) -> CliError {
    CliError::Domain(format!("{}: {e}", path.display()))
}

fn cmd_sample(args: &SampleArgs, config: &RunConfig, out: &mut dyn Write) -> CliResult {
    let horizon = match args.horizon {
        Some(h) => Horizon::new(h).ok_or_else(|| CliError::Domain("horizon must be positive".into()))?,
        None => config.horizon,
    };
    let sampler = SamplerConfig {
        seed: args.seed,
        motions: args.motions,
        sensors: args.sensors,
        horizon,
        target_decimals: args.decimals,
        ..SamplerConfig::default()
    };
    sampler.check()?;
    let mut buf = io::BufWriter::new(out);
    for (index, item) in sample_many(&sampler, args.n).enumerate() {
        let (seed, program) = item?;
        let record = SampleRecord {
            program: program.to_string(),
            seed,
            index,
        };
        serde_json::to_writer(&mut buf, &record).map_err(|e| CliError::Domain(e.to_string()))?;
        buf.write_all(b"\n").map_err(stdout_error)?;
    }
    buf.flush().map_err(stdout_error)
}

fn cmd_mask(args: &MaskArgs, config: &RunConfig, out: &mut dyn Write) -> CliResult {
    let prefix = match (&args.prefix, &args.prefix_file) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => read(path)?.trim_end_matches(['\n', '\r']).to_string(),
        (None, None) => String::new(),
    };
    let vocab_text = read(&args.vocab)?;
    let vocab: Vec<&str> = vocab_text.lines().collect();
    let matcher = Matcher::new(Language::new(config.horizon));
    let state = matcher.scan(&prefix).map_err(|r| {
        let admissible: String = r
            .admissible
            .iter()
            .map(|c| format!("{c:?}"))
            .collect::<Vec<_>>()
            .join(" ");
        CliError::Domain(format!(
            "prefix is dead at byte {}: {:?} is not admissible; admissible: {admissible}",
            r.position, r.rejected
        ))
    })?;
    let mut text = String::with_capacity(vocab.len() * 2);
    for allowed in matcher.allowed_tokens(&state, &vocab) {
        text.push(if allowed { '1' } else { '0' });
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

/// Every `*.jsonl` file below `dir`, in path order.
fn collection_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io {
            path: e.path().unwrap_or(dir).to_owned(),
            source: e.into_io_error().unwrap_or_else(|| io::Error::other("directory loop")),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "jsonl") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn cmd_auroc(
    dir: &Path,
    mode: ScoreMode,
    csv: Option<&Path>,
    config: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let mut records = Vec::new();
    for file in collection_files(dir)? {
        records.extend(read_collection(&read(&file)?, config.horizon).map_err(|e| in_file(&file, e))?);
    }
    let groups = group_by_action(records);
    let mut models = Vec::with_capacity(groups.len());
    let mut instances = Vec::with_capacity(groups.len());
    for (label, programs) in groups {
        let selected = select_diverse(&programs, config.cap)?;
        let _ = writeln!(
            err,
            "{label}: {} instances, {} model programs",
            programs.len(),
            selected.len()
        );
        models.push(AssessmentModel::new(label, selected, config.costs, mode)?);
        instances.push(programs);
    }
    let report = AurocReport::new(auroc_matrix(&models, &instances)?, mode, config);
    if let Some(path) = csv {
        write_file(path, &report.to_csv()?)?;
    }
    emit_json(out, &report)
}
