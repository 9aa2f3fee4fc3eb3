//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use codonsoup::alphabet::Alphabet;
use codonsoup::ecology::{read_file, ConfigError, World};
use codonsoup::genome::{disassemble, to_source, Assembler, Genome};
use codonsoup::isa::LoweringTable;
use codonsoup::lab::plot::{csv_to_svg, PlotOptions};
use codonsoup::lab::{self, write_outputs, ExperimentSpec, LabError, OutputFile, Parallelism};
use codonsoup::mutation::Rate;
use codonsoup::rng::seeded;

#[derive(Parser)]
#[command(
    name = "codonsoup",
    version,
    about = "Codon-based artificial-life soup"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment spec (TOML); the world lives in its `[world]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Bitflip rate per codon, `1/N` or a probability. Repeat for a grid.
    #[arg(long = "rate")]
    rates: Vec<Rate>,
    /// Alphabet file. Repeat for duels.
    #[arg(long = "alphabet")]
    alphabets: Vec<PathBuf>,
    /// Instruction-set file (REMOVE / LOWER lines). Repeatable.
    #[arg(long = "iset")]
    isets: Vec<PathBuf>,
    /// Run replicates one after another.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, ConfigError> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::default(),
        };
        if let Some(s) = self.seed {
            spec.seed = s;
            spec.world.seed = s;
        }
        if let Some(t) = self.ticks {
            spec.ticks = t;
        }
        if let Some(r) = self.replicates {
            spec.replicates = r;
        }
        if !self.rates.is_empty() {
            spec.rates = self.rates.clone();
            spec.world.mutation.bitflip_rate = self.rates[0];
        }
        if !self.alphabets.is_empty() {
            spec.alphabets = self.alphabets.clone();
            if self.alphabets.len() == 1 {
                spec.world.alphabet = Some(self.alphabets[0].clone());
            }
        }
        if !self.isets.is_empty() {
            spec.isets = self.isets.clone();
        }
        spec.validate()?;
        Ok(spec)
    }

    fn par(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }
}

#[derive(Args)]
struct Experiment {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble source into a genome file.
    Assemble {
        source: PathBuf,
        #[arg(long, short)]
        alphabet: Option<PathBuf>,
        /// Instruction-set file; removed instructions are lowered.
        #[arg(long)]
        iset: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Disassemble a genome file into a listing.
    Translate {
        genome: PathBuf,
        #[arg(long, short)]
        alphabet: Option<PathBuf>,
        /// Emit re-assemblable source instead of the annotated listing.
        #[arg(long)]
        source: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run one world and write its per-tick statistics.
    Run {
        #[command(flatten)]
        common: Common,
        /// CSV file (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Extinction fraction over a grid of bitflip rates.
    Sweep(Experiment),
    /// Distance-to-ancestor distributions over time.
    Hamming {
        #[command(flatten)]
        exp: Experiment,
        /// Also compare an intron-rich ancestor with an exon-dense one.
        #[arg(long)]
        compare_introns: bool,
    },
    /// Instruction frequencies of the ancestor under reduced sets.
    Density(Experiment),
    /// Two alphabets compete in one soup.
    Duel(Experiment),
    /// Intron-to-exon conversions of an intron-rich ancestor.
    Intron(Experiment),
    /// Single-bitflip API reachability.
    Apihash(Experiment),
    /// Minimize alphabet energy.
    OptimizeAlphabet {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Save a world after some ticks, or resume a saved one.
    Snapshot {
        #[command(flatten)]
        common: Common,
        /// Snapshot to resume instead of building from the config.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Where to write the snapshot.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write per-tick statistics here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render a CSV file as an SVG chart.
    Plot {
        csv: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
        /// Step chart instead of straight segments.
        #[arg(long)]
        stairs: bool,
    },
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), LabError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, LabError> {
    std::fs::read(path).map_err(|source| {
        ConfigError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn load_alphabet(path: Option<&Path>) -> Result<Alphabet, ConfigError> {
    match path {
        Some(p) => Ok(Alphabet::parse(&read_file(p)?)?),
        None => Ok(Alphabet::shipped()),
    }
}

fn emit(out: &Path, files: &[OutputFile]) -> Result<(), LabError> {
    write_outputs(out, files)?;
    eprintln!("wrote {} file(s) to {}", files.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Assemble {
            source,
            alphabet,
            iset,
            seed,
            out,
        } => {
            let alpha = load_alphabet(alphabet.as_deref())?;
            let text = read_file(&source)?;
            let table = iset
                .map(|p| {
                    LoweringTable::parse_over_shipped(&read_file(&p)?).map_err(ConfigError::from)
                })
                .transpose()?;
            let mut asm = Assembler::new(&alpha);
            if let Some(t) = &table {
                asm = asm.with_lowering(t);
            }
            let g = asm
                .assemble(&text, &mut seeded(seed))
                .map_err(ConfigError::from)?;
            write_file(&out, &g.to_bytes())?;
            eprintln!("{} codons, data at {}", g.len(), g.data_offset());
        }
        Command::Translate {
            genome,
            alphabet,
            source,
            out,
        } => {
            let alpha = load_alphabet(alphabet.as_deref())?;
            let g = Genome::from_bytes(&read_bytes(&genome)?)?;
            let text = if source {
                to_source(&g, &alpha)
            } else {
                disassemble(&g, &alpha)
            };
            match out {
                Some(p) => write_file(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Run { common, out } => {
            let spec = common.spec()?;
            let mut world = World::new(spec.world.clone())?;
            let stats = world.run(spec.ticks, |_, _| {});
            let csv = lab::stats_csv(&stats);
            match out {
                Some(p) => write_file(&p, csv.as_bytes())?,
                None => std::io::stdout()
                    .write_all(csv.as_bytes())
                    .map_err(|e| LabError::io(Path::new("<stdout>"), e))?,
            }
            if let Some(t) = world.extinct_at() {
                eprintln!("extinct at tick {t}");
            }
        }
        Command::Sweep(e) => {
            let spec = e.common.spec()?;
            let r = lab::sweep(&spec, e.common.par())?;
            for p in &r.points {
                eprintln!(
                    "rate {:>10}  extinct {}/{}  P(hit) {:.4}",
                    lab::rate_label(p.rate),
                    p.extinctions(),
                    p.extinct_at.len(),
                    p.analytic_p_hit
                );
            }
            match r.critical_window() {
                Some((lo, hi)) => eprintln!(
                    "critical window: {} .. {}",
                    lab::rate_label(lo),
                    lab::rate_label(hi)
                ),
                None => eprintln!("no complete survival-to-extinction transition in this grid"),
            }
            if !r.is_monotone() {
                eprintln!("note: extinction fraction is not monotone in rate");
            }
            eprintln!(
                "reference window 1/{} .. 1/{} (genome length {}), see sweep_reference.csv",
                lab::REFERENCE_WINDOW[0],
                lab::REFERENCE_WINDOW[1],
                lab::REFERENCE_LENGTH
            );
            emit(&e.out, &r.files())?;
        }
        Command::Hamming {
            exp,
            compare_introns,
        } => {
            let spec = exp.common.spec()?;
            let mut files = lab::hamming(&spec, exp.common.par())?.files();
            if compare_introns {
                let d = lab::drift_comparison(&spec, exp.common.par())?;
                eprintln!(
                    "intron-rich drifted faster in {}/{} pairs",
                    d.intron_wins(),
                    d.pairs().len()
                );
                files.extend(d.files());
            }
            emit(&exp.out, &files)?;
        }
        Command::Density(e) => {
            let spec = e.common.spec()?;
            let r = lab::density(&spec)?;
            for row in &r.rows {
                eprintln!(
                    "{:>12}  danger density {:.4}",
                    row.set,
                    row.histogram.danger_density()
                );
            }
            emit(&e.out, &r.files())?;
        }
        Command::Duel(e) => {
            let spec = e.common.spec()?;
            let r = lab::duel(&spec, e.common.par())?;
            eprintln!(
                "{} wins {}, {} wins {}, draws {}",
                r.names[0],
                r.wins(lab::Winner::A),
                r.names[1],
                r.wins(lab::Winner::B),
                r.wins(lab::Winner::Draw)
            );
            emit(&e.out, &r.files())?;
        }
        Command::Intron(e) => {
            let spec = e.common.spec()?;
            let r = lab::intron(&spec, e.common.par())?;
            emit(&e.out, &r.files())?;
        }
        Command::Apihash(e) => {
            let spec = e.common.spec()?;
            let r = lab::apihash(&spec)?;
            for row in &r.rows {
                eprintln!("{:>6} names: P = {:.4}", row.names, row.probability);
            }
            emit(&e.out, &r.files())?;
        }
        Command::OptimizeAlphabet { exp, iterations } => {
            let mut spec = exp.common.spec()?;
            if let Some(i) = iterations {
                spec.iterations = i;
            }
            let r = lab::optimize_alphabets(&spec, exp.common.par())?;
            for (k, e) in r.final_energies().iter().enumerate() {
                eprintln!("replicate {k}: final energy {e:.4}");
            }
            emit(&exp.out, &r.files())?;
        }
        Command::Snapshot {
            common,
            resume,
            out,
            csv,
        } => {
            let spec = common.spec()?;
            let mut world = match resume {
                Some(p) => World::restore(&read_bytes(&p)?)?,
                None => World::new(spec.world.clone())?,
            };
            let stats = world.run(spec.ticks, |_, _| {});
            write_file(&out, &world.snapshot())?;
            if let Some(p) = csv {
                write_file(&p, lab::stats_csv(&stats).as_bytes())?;
            }
            eprintln!(
                "tick {}, population {}",
                world.tick_count(),
                world.population()
            );
        }
        Command::Plot {
            csv,
            out,
            title,
            stairs,
        } => {
            let text = read_file(&csv)?;
            let opts = PlotOptions {
                title,
                stairs,
                ..PlotOptions::default()
            };
            write_file(&out, csv_to_svg(&text, &opts)?.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
