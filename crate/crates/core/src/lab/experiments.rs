use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng;

use super::{map_indexed, ExperimentSpec, LabError, OutputFile, Parallelism};
use crate::alphabet::{
    optimize, random_alphabet, Alphabet, OptimizeOptions, VParams, DEFAULT_START, DEFAULT_STOP,
};
use crate::ancestor::{core_source, AncestorSpec};
use crate::ecology::{read_file, ConfigError, Lineage, TickStats, World, WorldConfig};
use crate::genome::{splice_states, splice_translate, Assembler, Genome, Histogram};
use crate::isa::{Instruction, InstructionSet, LoweringTable};
use crate::mutation::{p_any_hit, Rate};
use crate::rng::{derive_seed, seeded};
use crate::vm::{hash12, VirtualOs};

/// Default sweep grid, as `1/N` per-codon bitflip rates.
pub const DEFAULT_SWEEP_GRID: [u64; 8] = [1000, 500, 200, 100, 70, 50, 20, 10];
/// Historical critical window (per-codon rates `1/N`) for a 20480-codon
/// organism; printed next to sweep results for comparison only.
pub const REFERENCE_WINDOW: [u64; 2] = [11003, 9001];
pub const REFERENCE_LENGTH: usize = 20480;

/// Probability that a genome of `len` codons receives at least one bitflip.
pub fn analytic_p_hit(rate: Rate, len: usize) -> f64 {
    p_any_hit(rate.get(), len)
}

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// Renders tick statistics with the standard header.
pub fn stats_csv(stats: &[TickStats]) -> String {
    table(TickStats::CSV_HEADER, stats.iter().map(TickStats::csv_row))
}

/// Formats a rate as `1/N` when it is a reciprocal of an integer.
pub fn rate_label(rate: Rate) -> String {
    let p = rate.get();
    if p > 0.0 {
        let n = (1.0 / p).round();
        if n >= 1.0 && Rate::one_in(n as u64) == rate {
            return format!("1/{n}");
        }
    }
    format!("{p}")
}

/// Builds the ancestor lineage of a world config, with the given ancestor
/// shape if `shape` is set.
pub fn build_lineage(
    world: &WorldConfig,
    shape: Option<AncestorSpec>,
) -> Result<Lineage, ConfigError> {
    let mut cfg = world.clone();
    if let Some(s) = shape {
        cfg.ancestor = None;
        cfg.ancestor_exon = s.exon_len;
        cfg.ancestor_intron = s.intron_len;
    }
    Ok(World::new(cfg)?.lineages()[0].clone())
}

fn load_alphabet(path: &Path) -> Result<Alphabet, ConfigError> {
    Ok(Alphabet::parse(&read_file(path)?)?)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub rate: Rate,
    /// Extinction tick per replicate (`None` = survived).
    pub extinct_at: Vec<Option<u64>>,
    pub analytic_p_hit: f64,
}

impl SweepPoint {
    pub fn extinctions(&self) -> usize {
        self.extinct_at.iter().filter(|e| e.is_some()).count()
    }

    pub fn extinction_fraction(&self) -> f64 {
        self.extinctions() as f64 / self.extinct_at.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub genome_length: usize,
    /// Ascending in rate.
    pub points: Vec<SweepPoint>,
    /// `curves[i][r]`: statistics of replicate `r` at `points[i]`.
    pub curves: Vec<Vec<Vec<TickStats>>>,
}

impl SweepResult {
    /// Whether the extinction fraction never decreases with rate. Advisory:
    /// neighbouring rates can invert by chance.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].extinction_fraction() >= w[0].extinction_fraction())
    }

    /// Highest rate with no extinctions and lowest rate with full extinction
    /// above it.
    pub fn critical_window(&self) -> Option<(Rate, Rate)> {
        let lo = self.points.iter().rposition(|p| p.extinctions() == 0)?;
        let hi = self.points[lo..]
            .iter()
            .position(|p| p.extinction_fraction() == 1.0)?
            + lo;
        Some((self.points[lo].rate, self.points[hi].rate))
    }

    /// Analytic hit probabilities of the reference window at this genome
    /// length and at the reference length.
    pub fn reference_rows(&self) -> Vec<(Rate, f64, usize)> {
        let mut rows = Vec::new();
        for len in [self.genome_length, REFERENCE_LENGTH] {
            for n in REFERENCE_WINDOW {
                let r = Rate::one_in(n);
                rows.push((r, analytic_p_hit(r, len), len));
            }
        }
        rows
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut files = vec![OutputFile::new(
            "sweep_summary.csv",
            table(
                "rate,replicates,extinctions,extinction_fraction,mean_extinction_tick,analytic_p_hit,genome_length",
                self.points.iter().map(|p| {
                    let ticks: Vec<u64> = p.extinct_at.iter().flatten().copied().collect();
                    let mean = if ticks.is_empty() {
                        String::new()
                    } else {
                        format!("{:.1}", ticks.iter().sum::<u64>() as f64 / ticks.len() as f64)
                    };
                    format!(
                        "{},{},{},{:.4},{},{:.6},{}",
                        rate_label(p.rate),
                        p.extinct_at.len(),
                        p.extinctions(),
                        p.extinction_fraction(),
                        mean,
                        p.analytic_p_hit,
                        self.genome_length
                    )
                }),
            ),
        )];
        files.push(OutputFile::new(
            "sweep_reference.csv",
            table(
                "rate,analytic_p_hit,genome_length",
                self.reference_rows()
                    .into_iter()
                    .map(|(r, p, len)| format!("{},{p:.6},{len}", rate_label(r))),
            ),
        ));
        for (i, reps) in self.curves.iter().enumerate() {
            for (r, stats) in reps.iter().enumerate() {
                files.push(OutputFile::new(
                    format!("sweep_r{i}_rep{r}.csv"),
                    stats_csv(stats),
                ));
            }
        }
        files
    }
}

/// Runs `spec.replicates` worlds per bitflip rate and records extinctions.
pub fn sweep(spec: &ExperimentSpec, par: Parallelism) -> Result<SweepResult, LabError> {
    spec.validate()?;
    let mut rates = if spec.rates.is_empty() {
        DEFAULT_SWEEP_GRID
            .iter()
            .map(|n| Rate::one_in(*n))
            .collect()
    } else {
        spec.rates.clone()
    };
    rates.sort_by(|a, b| a.get().total_cmp(&b.get()));
    let lineage = build_lineage(&spec.world, None)?;
    let genome_length = lineage.ancestor.len();
    let reps = spec.replicates;
    let jobs = map_indexed(rates.len() * reps, par, |k| {
        let cfg = spec.replicate_world(k % reps, rates[k / reps]);
        let mut w = World::with_lineages(cfg, vec![lineage.clone()])?;
        let stats = w.run(spec.ticks, |_, _| {});
        Ok::<_, ConfigError>((w.extinct_at(), stats))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::new();
    let mut curves = Vec::new();
    for (i, chunk) in jobs.chunks(reps).enumerate() {
        points.push(SweepPoint {
            rate: rates[i],
            extinct_at: chunk.iter().map(|(e, _)| *e).collect(),
            analytic_p_hit: analytic_p_hit(rates[i], genome_length),
        });
        curves.push(chunk.iter().map(|(_, s)| s.clone()).collect());
    }
    Ok(SweepResult {
        genome_length,
        points,
        curves,
    })
}

// ---------------------------------------------------------------- hamming

#[derive(Debug, Clone, PartialEq)]
pub struct HammingSample {
    pub tick: u64,
    /// Organisms sampled (see [`World::hamming_distances`]).
    pub population: usize,
    pub min: u64,
    pub mean: f64,
    pub max: u64,
    pub stddev: f64,
}

impl HammingSample {
    pub fn of(world: &World) -> Self {
        let d = world.hamming_distances();
        let n = d.len();
        if n == 0 {
            return HammingSample {
                tick: world.tick_count(),
                population: 0,
                min: 0,
                mean: 0.0,
                max: 0,
                stddev: 0.0,
            };
        }
        let mean = d.iter().sum::<u64>() as f64 / n as f64;
        let var = d.iter().map(|x| (*x as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        HammingSample {
            tick: world.tick_count(),
            population: n,
            min: *d.iter().min().expect("non-empty"),
            mean,
            max: *d.iter().max().expect("non-empty"),
            stddev: var.sqrt(),
        }
    }
}

/// Samples distance statistics at tick 0 and every `every` ticks.
pub fn hamming_trace(world: &mut World, ticks: u64, every: u64) -> Vec<HammingSample> {
    let mut out = vec![HammingSample::of(world)];
    world.run(ticks, |w, st| {
        if st.tick % every == 0 {
            out.push(HammingSample::of(w));
        }
    });
    out
}

/// Least-squares slope of mean distance over tick, using samples with a
/// living population.
pub fn drift_slope(samples: &[HammingSample]) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.population > 0)
        .map(|s| (s.tick as f64, s.mean))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn hamming_csv(samples: &[HammingSample]) -> String {
    table(
        "tick,population,min,mean,max,stddev",
        samples.iter().map(|s| {
            format!(
                "{},{},{},{:.4},{},{:.4}",
                s.tick, s.population, s.min, s.mean, s.max, s.stddev
            )
        }),
    )
}

#[derive(Debug, Clone)]
pub struct HammingResult {
    pub rate: Rate,
    pub replicates: Vec<Vec<HammingSample>>,
}

impl HammingResult {
    pub fn slopes(&self) -> Vec<f64> {
        self.replicates.iter().map(|s| drift_slope(s)).collect()
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut files: Vec<OutputFile> = self
            .replicates
            .iter()
            .enumerate()
            .map(|(r, s)| OutputFile::new(format!("hamming_rep{r}.csv"), hamming_csv(s)))
            .collect();
        files.push(OutputFile::new(
            "hamming_summary.csv",
            table(
                "replicate,slope",
                self.slopes()
                    .iter()
                    .enumerate()
                    .map(|(r, s)| format!("{r},{s:.6}")),
            ),
        ));
        files
    }
}

fn hamming_runs(
    spec: &ExperimentSpec,
    lineage: &Lineage,
    rate: Rate,
    par: Parallelism,
) -> Result<Vec<Vec<HammingSample>>, LabError> {
    let runs = map_indexed(spec.replicates, par, |r| {
        let cfg = spec.replicate_world(r, rate);
        let every = cfg.sample_every;
        let mut w = World::with_lineages(cfg, vec![lineage.clone()])?;
        Ok::<_, ConfigError>(hamming_trace(&mut w, spec.ticks, every))
    });
    Ok(runs.into_iter().collect::<Result<_, _>>()?)
}

/// Distance-to-ancestor distributions over time for the configured world.
pub fn hamming(spec: &ExperimentSpec, par: Parallelism) -> Result<HammingResult, LabError> {
    spec.validate()?;
    let lineage = build_lineage(&spec.world, None)?;
    let rate = spec.rate();
    Ok(HammingResult {
        rate,
        replicates: hamming_runs(spec, &lineage, rate, par)?,
    })
}

#[derive(Debug, Clone)]
pub struct DriftComparison {
    pub rate: Rate,
    pub intron: Vec<Vec<HammingSample>>,
    pub exon: Vec<Vec<HammingSample>>,
}

impl DriftComparison {
    /// `(intron slope, exon-dense slope)` per replicate pair.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.intron
            .iter()
            .zip(&self.exon)
            .map(|(a, b)| (drift_slope(a), drift_slope(b)))
            .collect()
    }

    pub fn intron_wins(&self) -> usize {
        self.pairs().iter().filter(|(a, b)| a > b).count()
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut files = vec![OutputFile::new(
            "drift_pairs.csv",
            table(
                "replicate,intron_slope,exon_slope,intron_faster",
                self.pairs()
                    .iter()
                    .enumerate()
                    .map(|(r, (a, b))| format!("{r},{a:.6},{b:.6},{}", u8::from(a > b))),
            ),
        )];
        for (r, s) in self.intron.iter().enumerate() {
            files.push(OutputFile::new(
                format!("drift_intron_rep{r}.csv"),
                hamming_csv(s),
            ));
        }
        for (r, s) in self.exon.iter().enumerate() {
            files.push(OutputFile::new(
                format!("drift_exon_rep{r}.csv"),
                hamming_csv(s),
            ));
        }
        files
    }
}

/// Compares drift of an intron-rich ancestor (`spec.intron_fraction` of
/// `spec.genome_length`) with an exon-dense one of the same length, paired
/// by replicate seed.
pub fn drift_comparison(
    spec: &ExperimentSpec,
    par: Parallelism,
) -> Result<DriftComparison, LabError> {
    spec.validate()?;
    let rate = spec.rate();
    let intron = build_lineage(
        &spec.world,
        Some(AncestorSpec::with_intron_fraction(
            spec.genome_length,
            spec.intron_fraction,
        )),
    )?;
    let exon = build_lineage(
        &spec.world,
        Some(AncestorSpec {
            exon_len: spec.genome_length,
            intron_len: 0,
        }),
    )?;
    Ok(DriftComparison {
        rate,
        intron: hamming_runs(spec, &intron, rate, par)?,
        exon: hamming_runs(spec, &exon, rate, par)?,
    })
}

// ---------------------------------------------------------------- density

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub set: String,
    pub code_len: usize,
    pub histogram: Histogram,
}

#[derive(Debug, Clone)]
pub struct DensityResult {
    /// The first row is always the full instruction set.
    pub rows: Vec<DensityRow>,
}

impl DensityResult {
    pub fn row(&self, set: &str) -> Option<&DensityRow> {
        self.rows.iter().find(|r| r.set == set)
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut detail = Vec::new();
        for r in &self.rows {
            for i in Instruction::ALL {
                detail.push(format!(
                    "{},{},{},{:.6}",
                    r.set,
                    i.mnemonic(),
                    r.histogram.count(i),
                    r.histogram.frequency(i)
                ));
            }
        }
        vec![
            OutputFile::new(
                "density.csv",
                table("set,instruction,count,frequency", detail),
            ),
            OutputFile::new(
                "density_summary.csv",
                table(
                    "set,code_len,danger_density",
                    self.rows.iter().map(|r| {
                        format!(
                            "{},{},{:.6}",
                            r.set,
                            r.code_len,
                            r.histogram.danger_density()
                        )
                    }),
                ),
            ),
        ]
    }
}

/// Histogram of the ancestor core's code section assembled under `table`.
pub fn core_histogram(
    alpha: &Alphabet,
    table: &LoweringTable,
    seed: u64,
) -> Result<(usize, Histogram), ConfigError> {
    let g = Assembler::new(alpha)
        .with_lowering(table)
        .assemble(&core_source(), &mut seeded(seed))?;
    let code = &splice_translate(&g, alpha)[..g.data_offset()];
    Ok((code.len(), Histogram::from_instructions(code)))
}

/// Instruction frequencies of the ancestor core under reduced instruction
/// sets: the sets named by `spec.isets`, or else every single removal the
/// shipped lowering table covers.
pub fn density(spec: &ExperimentSpec) -> Result<DensityResult, LabError> {
    spec.validate()?;
    let alpha = match &spec.world.alphabet {
        Some(p) => load_alphabet(p)?,
        None => Alphabet::shipped(),
    };
    let mut sets: Vec<(String, LoweringTable)> = vec![("full".into(), LoweringTable::shipped())];
    if spec.isets.is_empty() {
        let shipped = LoweringTable::shipped();
        for (i, _) in shipped.entries() {
            let t = LoweringTable::shipped().with_active_set(InstructionSet::FULL.without(i));
            sets.push((format!("-{}", i.mnemonic()), t));
        }
    } else {
        for p in &spec.isets {
            let t = LoweringTable::parse_over_shipped(&read_file(p)?).map_err(ConfigError::from)?;
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            sets.push((name, t));
        }
    }
    let mut rows = Vec::new();
    for (set, t) in sets {
        let (code_len, histogram) = core_histogram(&alpha, &t, spec.seed)?;
        rows.push(DensityRow {
            set,
            code_len,
            histogram,
        });
    }
    Ok(DensityResult { rows })
}

// ---------------------------------------------------------------- duel

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Draw,
}

impl Winner {
    fn label(self) -> &'static str {
        match self {
            Winner::A => "a",
            Winner::B => "b",
            Winner::Draw => "draw",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DuelRun {
    /// `(tick, population a, population b)`.
    pub curve: Vec<(u64, usize, usize)>,
    pub winner: Winner,
}

#[derive(Debug, Clone)]
pub struct DuelResult {
    pub names: [String; 2],
    pub runs: Vec<DuelRun>,
}

impl DuelResult {
    pub fn wins(&self, w: Winner) -> usize {
        self.runs.iter().filter(|r| r.winner == w).count()
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut files: Vec<OutputFile> = self
            .runs
            .iter()
            .enumerate()
            .map(|(r, run)| {
                OutputFile::new(
                    format!("duel_rep{r}.csv"),
                    table(
                        "tick,a,b,total",
                        run.curve
                            .iter()
                            .map(|(t, a, b)| format!("{t},{a},{b},{}", a + b)),
                    ),
                )
            })
            .collect();
        files.push(OutputFile::new(
            "duel_summary.csv",
            table(
                "replicate,winner,final_a,final_b",
                self.runs.iter().enumerate().map(|(r, run)| {
                    let (_, a, b) = run.curve.last().copied().unwrap_or((0, 0, 0));
                    format!("{r},{},{a},{b}", run.winner.label())
                }),
            ),
        ));
        files
    }
}

fn duel_winner(curve: &[(u64, usize, usize)]) -> Winner {
    let (_, a, b) = curve.last().copied().unwrap_or((0, 0, 0));
    let by_total = || {
        let ta: usize = curve.iter().map(|c| c.1).sum();
        let tb: usize = curve.iter().map(|c| c.2).sum();
        ta.cmp(&tb)
    };
    match a.cmp(&b).then_with(by_total) {
        std::cmp::Ordering::Greater => Winner::A,
        std::cmp::Ordering::Less => Winner::B,
        std::cmp::Ordering::Equal => Winner::Draw,
    }
}

/// Two lineages, each translated under its own alphabet, share one soup.
/// The winner of a replicate is the larger final population (ties broken
/// by population summed over the run).
pub fn duel(spec: &ExperimentSpec, par: Parallelism) -> Result<DuelResult, LabError> {
    spec.validate()?;
    let (alphas, names) = match spec.alphabets.as_slice() {
        [] => (
            [Alphabet::shipped(), Alphabet::shipped_random()],
            ["optimized".to_string(), "random".to_string()],
        ),
        [a, b] => (
            [load_alphabet(a)?, load_alphabet(b)?],
            [a.display().to_string(), b.display().to_string()],
        ),
        _ => return Err(ConfigError::Invalid("duel needs exactly two alphabets".into()).into()),
    };
    let mut lineages = Vec::new();
    for (alpha, name) in alphas.iter().zip(&names) {
        let mut base = build_lineage(&spec.world, None)?;
        // same program, encoded under the lineage's own alphabet
        let source = crate::genome::to_source(&base.ancestor, &base.alphabet);
        let g: Genome = crate::genome::assemble(&source, alpha, &mut seeded(spec.seed))
            .map_err(ConfigError::from)?;
        base = Lineage::new(name.clone(), alpha.clone(), g);
        lineages.push(base);
    }
    let rate = spec.rate();
    let runs = map_indexed(spec.replicates, par, |r| {
        let cfg = spec.replicate_world(r, rate);
        let mut w = World::with_lineages(cfg, lineages.clone())?;
        let mut curve = vec![(0, spec.world.founders, spec.world.founders)];
        w.run(spec.ticks, |_, st| {
            curve.push((st.tick, st.lineage_population[0], st.lineage_population[1]));
        });
        let winner = duel_winner(&curve);
        Ok::<_, ConfigError>(DuelRun { curve, winner })
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    Ok(DuelResult { names, runs })
}

// ---------------------------------------------------------------- intron

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntronRun {
    /// Converters whose parent carried no conversion.
    pub conversions: u64,
    /// Converters born to converters.
    pub inherited: u64,
    pub longest_converted_exon: usize,
    /// Distinct converters that called an API from inside a converted exon.
    pub api_calls_in_converted: u64,
    pub final_population: usize,
    /// `(tick, population, living converters, longest living conversion)`.
    pub curve: Vec<(u64, usize, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct IntronResult {
    pub ancestor: AncestorSpec,
    pub runs: Vec<IntronRun>,
}

impl IntronResult {
    pub fn files(&self) -> Vec<OutputFile> {
        let mut files: Vec<OutputFile> = self
            .runs
            .iter()
            .enumerate()
            .map(|(r, run)| {
                OutputFile::new(
                    format!("intron_rep{r}.csv"),
                    table(
                        "tick,population,converters,longest_converted",
                        run.curve
                            .iter()
                            .map(|(t, p, c, l)| format!("{t},{p},{c},{l}")),
                    ),
                )
            })
            .collect();
        files.push(OutputFile::new(
            "intron_summary.csv",
            table(
                "replicate,conversions,inherited,longest_converted_exon,api_calls_in_converted,final_population",
                self.runs.iter().enumerate().map(|(r, x)| {
                    format!(
                        "{r},{},{},{},{},{}",
                        x.conversions, x.inherited, x.longest_converted_exon, x.api_calls_in_converted, x.final_population
                    )
                }),
            ),
        ));
        files
    }
}

/// Maximal runs `[start, end)` of codons that are intron in the ancestor but
/// translated in `g`.
pub fn converted_runs(
    ancestor_intron: &[bool],
    g: &Genome,
    alpha: &Alphabet,
) -> Vec<(usize, usize)> {
    let states = splice_states(g, alpha);
    let mut runs = Vec::new();
    let mut start = None;
    for (i, (was, now)) in ancestor_intron.iter().zip(&states).enumerate() {
        let conv = *was && !now.is_intron();
        match (conv, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, ancestor_intron.len()));
    }
    runs
}

fn intron_run(
    spec: &ExperimentSpec,
    lineage: &Lineage,
    r: usize,
) -> Result<IntronRun, ConfigError> {
    let mut cfg = spec.replicate_world(r, spec.rate());
    cfg.track_api_calls = true;
    let every = cfg.sample_every;
    let anc_intron: Vec<bool> = splice_states(&lineage.ancestor, &lineage.alphabet)
        .iter()
        .map(|s| s.is_intron())
        .collect();
    let mut w = World::with_lineages(cfg, vec![lineage.clone()])?;
    let mut out = IntronRun::default();
    let mut ever: HashSet<u64> = HashSet::new();
    let mut live: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    let mut api_users: HashSet<u64> = HashSet::new();
    for _ in 0..spec.ticks {
        if w.is_extinct() {
            break;
        }
        let st = w.tick();
        let now = w.tick_count();
        let alive: HashSet<u64> = w.organisms().map(|o| o.id).collect();
        live.retain(|id, _| alive.contains(id));
        for o in w.organisms() {
            if o.birth_tick == now {
                let runs = converted_runs(&anc_intron, o.genome(), &lineage.alphabet);
                if !runs.is_empty() {
                    let longest = runs.iter().map(|(a, b)| b - a).max().unwrap_or(0);
                    out.longest_converted_exon = out.longest_converted_exon.max(longest);
                    if o.parent_id.is_some_and(|p| ever.contains(&p)) {
                        out.inherited += 1;
                    } else {
                        out.conversions += 1;
                    }
                    ever.insert(o.id);
                    live.insert(o.id, runs);
                }
            }
            if let Some(runs) = live.get(&o.id) {
                if !api_users.contains(&o.id)
                    && o.api_call_sites.iter().any(|ip| {
                        let ip = *ip as usize;
                        runs.iter().any(|(a, b)| (*a..*b).contains(&ip))
                    })
                {
                    api_users.insert(o.id);
                }
            }
        }
        if now % every == 0 {
            let longest = live
                .values()
                .flat_map(|rs| rs.iter().map(|(a, b)| b - a))
                .max()
                .unwrap_or(0);
            out.curve.push((now, st.population, live.len(), longest));
        }
    }
    out.api_calls_in_converted = api_users.len() as u64;
    out.final_population = w.population();
    Ok(out)
}

/// Watches an intron-rich ancestor for intron codons that become translated.
pub fn intron(spec: &ExperimentSpec, par: Parallelism) -> Result<IntronResult, LabError> {
    spec.validate()?;
    let shape = AncestorSpec::with_intron_fraction(spec.genome_length, spec.intron_fraction);
    let lineage = build_lineage(&spec.world, Some(shape))?;
    let runs = map_indexed(spec.replicates, par, |r| intron_run(spec, &lineage, r))
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(IntronResult {
        ancestor: shape,
        runs,
    })
}

// ---------------------------------------------------------------- apihash

/// Monte-Carlo estimate of the chance that flipping one random bit of a
/// random export's hash lands on another export. Returns `(hits, p)`.
pub fn resolve_probability(os: &VirtualOs, trials: u64, rng: &mut impl Rng) -> (u64, f64) {
    if os.is_empty() || trials == 0 {
        return (0, 0.0);
    }
    let mut hits = 0;
    for _ in 0..trials {
        let e = &os.exports()[rng.random_range(0..os.len())];
        let flipped = hash12(&e.name) ^ (1 << rng.random_range(0..12));
        if os.resolve_api(flipped) != 0 {
            hits += 1;
        }
    }
    (hits, hits as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApihashRow {
    pub names: usize,
    pub occupied_hashes: usize,
    pub trials: u64,
    pub hits: u64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct ApihashResult {
    pub rows: Vec<ApihashRow>,
}

impl ApihashResult {
    pub fn files(&self) -> Vec<OutputFile> {
        vec![OutputFile::new(
            "apihash.csv",
            table(
                "names,occupied_hashes,trials,hits,probability",
                self.rows.iter().map(|r| {
                    format!(
                        "{},{},{},{},{:.6}",
                        r.names, r.occupied_hashes, r.trials, r.hits, r.probability
                    )
                }),
            ),
        )]
    }
}

/// Single-bitflip reachability over synthetic export tables of each size in
/// `spec.export_names`.
pub fn apihash(spec: &ExperimentSpec) -> Result<ApihashResult, LabError> {
    spec.validate()?;
    let rows = spec
        .export_names
        .iter()
        .map(|&n| {
            let mut rng = seeded(derive_seed(spec.seed, n as u64));
            let os = VirtualOs::synthetic(n, &mut rng);
            let (hits, probability) = resolve_probability(&os, spec.trials, &mut rng);
            ApihashRow {
                names: n,
                occupied_hashes: os.occupied_hashes(),
                trials: spec.trials,
                hits,
                probability,
            }
        })
        .collect();
    Ok(ApihashResult { rows })
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone)]
pub struct OptimizeRun {
    pub alphabet: Alphabet,
    pub trace: crate::alphabet::EnergyTrace,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub runs: Vec<OptimizeRun>,
}

impl OptimizeResult {
    pub fn final_energies(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.trace.final_energy().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn files(&self) -> Vec<OutputFile> {
        let mut files = Vec::new();
        let mut summary = Vec::new();
        for (r, run) in self.runs.iter().enumerate() {
            files.push(OutputFile::new(
                format!("optimize_rep{r}.csv"),
                run.trace.to_csv(),
            ));
            files.push(OutputFile::new(
                format!("optimize_rep{r}.alpha"),
                run.alphabet.to_text(),
            ));
            let first = run.trace.energies().next().unwrap_or(f64::NAN);
            let last = run.trace.final_energy().unwrap_or(f64::NAN);
            summary.push(format!("{r},{first:.4},{last:.4}"));
        }
        files.push(OutputFile::new(
            "optimize_summary.csv",
            table("replicate,initial_energy,final_energy", summary),
        ));
        files
    }
}

/// Independent optimizer runs, one per replicate. Each starts from
/// `spec.alphabets[0]` if given, else from its own random alphabet.
pub fn optimize_alphabets(
    spec: &ExperimentSpec,
    par: Parallelism,
) -> Result<OptimizeResult, LabError> {
    spec.validate()?;
    let start = spec
        .alphabets
        .first()
        .map(|p| load_alphabet(p))
        .transpose()?;
    let opts = OptimizeOptions {
        iterations: spec.iterations,
        ..OptimizeOptions::default()
    };
    let v = VParams::default();
    let runs = map_indexed(spec.replicates, par, |r| {
        let mut rng = seeded(derive_seed(spec.seed, r as u64));
        let initial = match &start {
            Some(a) => a.clone(),
            None => random_alphabet(InstructionSet::FULL, DEFAULT_START, DEFAULT_STOP, &mut rng)
                .expect("full set fits the free slots"),
        };
        let (alphabet, trace) = optimize(&initial, &v, opts, &mut rng);
        OptimizeRun { alphabet, trace }
    });
    Ok(OptimizeResult { runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::ApiHandler;

    fn small() -> ExperimentSpec {
        let mut s = ExperimentSpec {
            replicates: 2,
            ticks: 120,
            ..ExperimentSpec::default()
        };
        s.world.capacity = 16;
        s
    }

    #[test]
    fn rate_labels() {
        assert_eq!(rate_label(Rate::one_in(9001)), "1/9001");
        assert_eq!(rate_label(Rate::new(0.3).unwrap()), "0.3");
        assert_eq!(rate_label(Rate::ZERO), "0");
    }

    #[test]
    fn sweep_extremes() {
        let mut s = small();
        s.rates = vec![Rate::ZERO, Rate::new(0.5).unwrap()];
        let r = sweep(&s, Parallelism::Sequential).unwrap();
        assert_eq!(r.points[0].extinctions(), 0);
        assert_eq!(r.points[1].extinction_fraction(), 1.0);
        assert!(r.is_monotone());
        assert_eq!(
            r.critical_window(),
            Some((Rate::ZERO, Rate::new(0.5).unwrap()))
        );
        assert_eq!(r.genome_length, 512);
        assert_eq!(r.files().len(), 2 + 4);
    }

    #[test]
    fn reference_rows_at_reference_length() {
        let r = SweepResult {
            genome_length: 512,
            points: vec![],
            curves: vec![],
        };
        let rows = r.reference_rows();
        assert_eq!(rows.len(), 4);
        assert!((rows[3].1 - 0.897).abs() < 1e-3);
        assert!((rows[2].1 - 0.845).abs() < 1e-3);
    }

    #[test]
    fn zero_rate_hamming_is_flat() {
        let s = small();
        let h = hamming(&s, Parallelism::Sequential).unwrap();
        for rep in &h.replicates {
            assert_eq!(rep[0].tick, 0);
            assert!(rep.iter().all(|x| x.max == 0 && x.stddev == 0.0));
        }
        assert!(h.slopes().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn slope_of_a_line() {
        let samples: Vec<HammingSample> = (0..5)
            .map(|t| HammingSample {
                tick: t * 10,
                population: 1,
                min: 0,
                mean: 3.0 + 0.5 * (t * 10) as f64,
                max: 0,
                stddev: 0.0,
            })
            .collect();
        assert!((drift_slope(&samples) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn density_frequencies_sum_to_one() {
        let d = density(&ExperimentSpec::default()).unwrap();
        assert_eq!(d.rows[0].set, "full");
        for r in &d.rows {
            let s: f64 = Instruction::ALL
                .iter()
                .map(|i| r.histogram.frequency(*i))
                .sum();
            assert!((s - 1.0).abs() < 1e-9, "{}", r.set);
        }
        let full = &d.rows[0].histogram;
        let no_zer0 = &d.row("-zer0").unwrap().histogram;
        assert_eq!(no_zer0.count(Instruction::Zer0), 0);
        // zer0 lowers to `save xor`: only those counts move
        for i in Instruction::ALL {
            if ![Instruction::Zer0, Instruction::Save, Instruction::Xor].contains(&i) {
                assert_eq!(full.count(i), no_zer0.count(i), "{i:?}");
            }
        }
    }

    #[test]
    fn duel_curves_and_symmetry() {
        let mut s = small();
        s.world.capacity = 24;
        let d = duel(&s, Parallelism::Sequential).unwrap();
        assert_eq!(d.runs.len(), 2);
        for run in &d.runs {
            assert_eq!(run.curve[0], (0, 1, 1));
            assert!(run.curve.iter().all(|(_, a, b)| a + b <= 24));
        }
    }

    #[test]
    fn intron_zero_rate_has_no_conversions() {
        let mut s = small();
        s.genome_length = 1024;
        let r = intron(&s, Parallelism::Sequential).unwrap();
        assert!(r
            .runs
            .iter()
            .all(|x| x.conversions == 0 && x.longest_converted_exon == 0));
    }

    #[test]
    fn converted_runs_detect_a_new_start() {
        let a = Alphabet::shipped();
        let src = crate::ancestor::ancestor_source(AncestorSpec {
            exon_len: 128,
            intron_len: 62,
        })
        .unwrap();
        let g = crate::genome::assemble(&src, &a, &mut seeded(3)).unwrap();
        let mask: Vec<bool> = splice_states(&g, &a)
            .iter()
            .map(|s| s.is_intron())
            .collect();
        assert!(converted_runs(&mask, &g, &a).is_empty());
        let first = mask.iter().position(|m| *m).unwrap();
        let mut h = g.clone();
        h.codons_mut()[first + 10] = a.start_codon();
        let runs = converted_runs(&mask, &h, &a);
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].0, first + 10);
    }

    #[test]
    fn apihash_edge_tables() {
        let mut rng = seeded(5);
        let one = VirtualOs::new([("onlyname", ApiHandler::Decoy)]);
        assert_eq!(resolve_probability(&one, 1000, &mut rng).0, 0);
        // find one name per hash value so that every hash is occupied
        let mut names: Vec<Option<String>> = vec![None; 4096];
        let mut k = 0u64;
        while names.iter().any(Option::is_none) {
            let n = format!("n{k:x}");
            let h = hash12(&n) as usize;
            if names[h].is_none() {
                names[h] = Some(n);
            }
            k += 1;
        }
        let full = VirtualOs::new(names.into_iter().flatten().map(|n| (n, ApiHandler::Decoy)));
        assert_eq!(full.occupied_hashes(), 4096);
        assert_eq!(resolve_probability(&full, 1000, &mut rng).1, 1.0);
    }

    #[test]
    fn optimize_runs_decrease() {
        let s = ExperimentSpec {
            replicates: 2,
            iterations: 2000,
            ..ExperimentSpec::default()
        };
        let r = optimize_alphabets(&s, Parallelism::Sequential).unwrap();
        assert!(r.runs.iter().all(|x| x.trace.is_non_increasing()));
        assert_eq!(r.files().len(), 5);
    }
}
