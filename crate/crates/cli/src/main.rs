use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmrelay::report::{header, Row};
use mmrelay::sim::run_simulation_traced;
use mmrelay::sweep::{preset, run_sweep, Axis, Extremum, Objective, SweepSpec, PRESETS};
use mmrelay::validation::validate;
use mmrelay::{analyze, build_success_table, SceneConfig, SimMode, SimOptions, SuccessTable};

#[derive(Parser)]
#[command(name = "mmrelay", version, about = "Relay-assisted mm-wave random access: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// JSON scene configuration; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a parameter, e.g. `--set q_u=0.2 --set theta_rd_deg=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Load the success table from this CSV instead of building it.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Directory of cached success tables (read and written).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads for table construction and sweeps (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Table)]
    mode: ModeArg,
    /// Fraction of initial slots discarded as warm-up.
    #[arg(long, default_value_t = 0.1)]
    warmup: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Table,
    Physical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Throughput,
    Delay,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtremumArg {
    Max,
    Min,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Build the conditional success-probability table and write it as CSV.
    BuildTable {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the analytical model at one operating point.
    Analyze {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the full analysis as JSON instead of a CSV row.
        #[arg(long)]
        json: bool,
    },
    /// Run the slotted simulator and print it next to the analysis.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-slot trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate a one- or two-dimensional parameter grid.
    Sweep {
        #[command(flatten)]
        scene: SceneArgs,
        /// Swept parameter: `name=start:stop:step` or `name=v1,v2,...`.
        /// The first axis is the outer one.
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Start from a named sweep; `--set` and `--axis` still apply.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Report the best value of the last axis for each outer value.
        #[arg(long, value_enum)]
        extremum: Option<ExtremumArg>,
        /// Also simulate every grid point.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the extremum trace (stderr when omitted).
        #[arg(long)]
        extremum_out: Option<PathBuf>,
        /// List the available presets and exit.
        #[arg(long)]
        list_presets: bool,
    },
    /// Check the analysis against brute-force references; exits 1 on failure.
    Validate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        json: bool,
    },
}

impl SceneArgs {
    fn scene(&self) -> Result<SceneConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => SceneConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut SceneConfig) -> Result<()> {
        for a in &self.set {
            cfg.apply_assignment(a)?;
        }
        Ok(())
    }

    fn table(&self, cfg: &SceneConfig) -> Result<SuccessTable> {
        cfg.validate()?;
        if let Some(path) = &self.table {
            let table = SuccessTable::load(path)?;
            table.check_covers(cfg.n_ues)?;
            return Ok(table);
        }
        if let Some(dir) = &self.cache_dir {
            let (table, hit) = SuccessTable::load_or_build(cfg, dir)?;
            log(&format!("success table {} ({})", if hit { "loaded" } else { "built" }, dir.display()));
            return Ok(table);
        }
        Ok(build_success_table(cfg)?)
    }

    fn install_pool(&self) -> Result<()> {
        if self.workers > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build_global()
                .context("configuring worker threads")?;
        }
        Ok(())
    }
}

impl SimArgs {
    fn options(&self) -> SimOptions {
        SimOptions {
            slots: self.slots,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Table => SimMode::Table,
                ModeArg::Physical => SimMode::Physical,
            },
            warmup_fraction: self.warmup,
            ..SimOptions::default()
        }
    }
}

fn log(msg: &str) {
    eprintln!("mmrelay: {msg}");
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows(out: Box<dyn Write>, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in rows {
        w.write_record(&r.0)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::BuildTable { scene, out } => {
            scene.install_pool()?;
            let cfg = scene.scene()?;
            let table = scene.table(&cfg)?;
            table.write_csv(output(out.as_deref())?)?;
        }
        Command::Analyze { scene, out, json } => {
            scene.install_pool()?;
            let cfg = scene.scene()?;
            let table = scene.table(&cfg)?;
            let analysis = analyze(&cfg, &table)?;
            if json {
                let mut w = output(out.as_deref())?;
                serde_json::to_writer_pretty(&mut w, &analysis)?;
                writeln!(w)?;
            } else {
                write_rows(output(out.as_deref())?, &[Row::analysis(&cfg, &analysis)])?;
            }
        }
        Command::Simulate { scene, sim, out, trace } => {
            scene.install_pool()?;
            let cfg = scene.scene()?;
            let table = scene.table(&cfg)?;
            let mut rows = vec![match analyze(&cfg, &table) {
                Ok(a) => Row::analysis(&cfg, &a),
                Err(e) => Row::failure(&cfg, "analysis", &e.to_string()),
            }];
            let mut trace_file = match &trace {
                Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
                None => None,
            };
            let result = run_simulation_traced(
                &cfg,
                &table,
                &sim.options(),
                trace_file.as_mut().map(|w| w as &mut dyn Write),
            )?;
            if let Some(mut w) = trace_file {
                w.flush()?;
            }
            rows.push(Row::simulation(&cfg, &result));
            write_rows(output(out.as_deref())?, &rows)?;
        }
        Command::Sweep {
            scene,
            axes,
            preset: preset_name,
            objective,
            extremum,
            simulate,
            sim,
            out,
            extremum_out,
            list_presets,
        } => {
            if list_presets {
                for p in PRESETS {
                    println!("{p}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let mut spec = match &preset_name {
                Some(name) => {
                    let mut spec = preset(name)?;
                    if let Some(path) = &scene.config {
                        let text = std::fs::read_to_string(path)?;
                        spec.base = serde_json::from_str(&text)?;
                    }
                    scene.apply(&mut spec.base)?;
                    spec
                }
                None => SweepSpec::new(scene.scene()?, Vec::new()),
            };
            if !axes.is_empty() {
                spec.axes = axes.iter().map(|a| Axis::parse(a)).collect::<mmrelay::Result<_>>()?;
            }
            if spec.axes.is_empty() {
                bail!("a sweep needs at least one --axis or a --preset");
            }
            if let Some(o) = objective {
                spec.objective = match o {
                    ObjectiveArg::Throughput => Objective::Throughput,
                    ObjectiveArg::Delay => Objective::Delay,
                };
            }
            if let Some(e) = extremum {
                spec.extremum = match e {
                    ExtremumArg::Max => Extremum::Max,
                    ExtremumArg::Min => Extremum::Min,
                    ExtremumArg::None => Extremum::None,
                };
            }
            if simulate {
                spec.simulate = Some(sim.options());
            }
            spec.workers = scene.workers;
            spec.cache_dir = scene.cache_dir.clone();
            let result = run_sweep(&spec)?;
            let rows: Vec<Row> = result.points.iter().flat_map(|p| p.rows()).collect();
            write_rows(output(out.as_deref())?, &rows)?;
            if !result.extremum.is_empty() {
                let sink: Box<dyn Write> = match &extremum_out {
                    Some(p) => Box::new(File::create(p)?),
                    None => Box::new(io::stderr()),
                };
                let mut w = csv::Writer::from_writer(sink);
                let inner = &spec.axes.last().unwrap().name;
                w.write_record([spec.axes[0].name.as_str(), &format!("best_{inner}"), "objective"])?;
                for e in &result.extremum {
                    w.write_record([e.outer.to_string(), e.best.to_string(), e.objective.to_string()])?;
                }
                w.flush()?;
            }
            let failed = rows.iter().filter(|r| r.get("error").is_some_and(|e| !e.is_empty())).count();
            if failed > 0 {
                log(&format!("{failed} grid point(s) failed; see the error column"));
            }
        }
        Command::Validate { scene, json } => {
            scene.install_pool()?;
            let cfg = scene.scene()?;
            let capped = SceneConfig {
                n_ues: cfg.n_ues.min(mmrelay::oracle::MAX_ENUMERATED_UES),
                ..cfg.clone()
            };
            let table = scene.table(&capped)?;
            let report = validate(&capped, &table)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for c in &report.checks {
                    println!(
                        "{} n={} {} error={:.3e} tol={:.1e} {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.n_ues,
                        c.name,
                        c.error,
                        c.tolerance,
                        c.detail
                    );
                }
            }
            if !report.passed() {
                log("validation failed");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log(&format!("error: {e:#}"));
            ExitCode::from(2)
        }
    }
}
