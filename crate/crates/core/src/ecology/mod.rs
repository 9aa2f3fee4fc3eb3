//! The soup: a population of organisms sharing a fixed number of slots,
//! scheduled round-robin, replicating through `vspawn` and culled by guards.
//!
//! Each tick every living organism (in id order) runs one slice. Spawn
//! requests are handled as they arrive: the child image is fitted to the
//! lineage's genome length, mutated, checked by the unmutated guard and
//! admitted if a slot is free. After all slices the loop guard and the
//! duplicate guard run, dead organisms are removed and statistics recorded.

mod config;

pub use config::{read_file, ConfigError, WorldConfig};

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alphabet::{Alphabet, NOP_MASK};
use crate::ancestor::{ancestor_source, AncestorSpec};
use crate::genome::{assemble, hamming_codons, Genome};
use crate::mutation::{mutate, Synonyms};
use crate::rng::{derive_seed, seeded, SoupRng};
use crate::vm::{run_slice, Env, FaultKind, Host, Program, StepOutcome, VirtualOs, VmState};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"CSOUPSNP";
pub const SNAPSHOT_VERSION: u32 = 1;

// Sub-stream indices for `derive_seed`.
const STREAM_WORLD: u64 = 0;
const STREAM_ASSEMBLY: u64 = 1;
const STREAM_ORGANISM: u64 = 0x1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("snapshot format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

/// A founding genome together with the alphabet its descendants are
/// translated under.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "LineageData", into = "LineageData")]
pub struct Lineage {
    pub name: String,
    pub alphabet: Alphabet,
    pub ancestor: Genome,
    synonyms: Synonyms,
}

#[derive(Serialize, Deserialize)]
struct LineageData {
    name: String,
    alphabet: Alphabet,
    ancestor: Genome,
}

impl From<LineageData> for Lineage {
    fn from(d: LineageData) -> Self {
        Lineage::new(d.name, d.alphabet, d.ancestor)
    }
}

impl From<Lineage> for LineageData {
    fn from(l: Lineage) -> Self {
        LineageData {
            name: l.name,
            alphabet: l.alphabet,
            ancestor: l.ancestor,
        }
    }
}

impl Lineage {
    pub fn new(name: impl Into<String>, alphabet: Alphabet, ancestor: Genome) -> Self {
        let synonyms = Synonyms::new(&alphabet);
        Lineage {
            name: name.into(),
            alphabet,
            ancestor,
            synonyms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Organism {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub lineage: usize,
    pub generation: u64,
    pub program: Program,
    pub vm: VmState,
    pub birth_tick: u64,
    pub offspring_count: u32,
    /// Instructions executed since the last completed spawn (or birth).
    /// Attempts refused for lack of space do not count.
    pub steps_since_spawn: u64,
    /// Codon indices of `call`s that reached an export (when tracked).
    pub api_call_sites: BTreeSet<u32>,
    rng: SoupRng,
    alive: bool,
}

impl Organism {
    pub fn genome(&self) -> &Genome {
        self.program.genome()
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    /// A founder, or a child that has executed at least one instruction.
    pub fn is_established(&self) -> bool {
        self.parent_id.is_none() || self.vm.steps_executed > 0
    }
}

/// Why an organism left the soup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Death {
    Fault(FaultKind),
    Exit,
    LoopGuard,
    DuplicateGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnResult {
    Accepted(u64),
    CapacityFull,
    KilledUnmutated,
}

/// Per-tick bookkeeping. `population = previous population + births -
/// all deaths`, with children killed by the unmutated guard counted as
/// both a birth and a death.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickStats {
    pub tick: u64,
    pub population: usize,
    pub births: u64,
    pub deaths_fault: u64,
    pub deaths_exit: u64,
    pub deaths_loop: u64,
    pub deaths_dup: u64,
    pub deaths_unmut: u64,
    pub mean_gen: f64,
    pub max_gen: u64,
    /// Over established organisms, see [`World::hamming_distances`].
    pub mean_hamming: f64,
    /// Spawn requests refused because the soup was full.
    pub rejected: u64,
    /// Living organisms per lineage.
    pub lineage_population: Vec<usize>,
}

impl TickStats {
    pub const CSV_HEADER: &'static str =
        "tick,population,births,deaths_fault,deaths_exit,deaths_loop,deaths_dup,deaths_unmut,mean_gen,max_gen,mean_hamming";

    pub fn deaths(&self) -> u64 {
        self.deaths_fault
            + self.deaths_exit
            + self.deaths_loop
            + self.deaths_dup
            + self.deaths_unmut
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.4},{},{:.4}",
            self.tick,
            self.population,
            self.births,
            self.deaths_fault,
            self.deaths_exit,
            self.deaths_loop,
            self.deaths_dup,
            self.deaths_unmut,
            self.mean_gen,
            self.max_gen,
            self.mean_hamming
        )
    }

    fn record(&mut self, death: Death) {
        match death {
            Death::Fault(_) => self.deaths_fault += 1,
            Death::Exit => self.deaths_exit += 1,
            Death::LoopGuard => self.deaths_loop += 1,
            Death::DuplicateGuard => self.deaths_dup += 1,
        }
    }
}

/// Host services for one organism: its own random stream and read access to
/// every other living organism, in id order.
struct WorldHost<'a> {
    rng: &'a mut SoupRng,
    peers: Vec<&'a [u8]>,
    api_sites: Option<&'a mut BTreeSet<u32>>,
}

impl Host for WorldHost<'_> {
    fn random_u32(&mut self) -> u32 {
        self.rng.random()
    }

    fn peer_count(&self) -> usize {
        self.peers.len()
    }

    fn peer_code(&self, index: usize) -> Option<&[u8]> {
        self.peers.get(index).copied()
    }

    fn on_api_call(&mut self, ip: u32, _export: usize) {
        if let Some(sites) = self.api_sites.as_deref_mut() {
            sites.insert(ip);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    config: WorldConfig,
    lineages: Vec<Lineage>,
    os: VirtualOs,
    organisms: Vec<Organism>,
    rng: SoupRng,
    tick: u64,
    next_id: u64,
    alive: usize,
    extinct_at: Option<u64>,
}

impl World {
    /// Builds a world from a config, loading the alphabet and ancestor it
    /// names (or the shipped defaults).
    pub fn new(config: WorldConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let alphabet = match &config.alphabet {
            Some(p) => Alphabet::parse(&read_file(p)?)?,
            None => Alphabet::shipped(),
        };
        let source = match &config.ancestor {
            Some(p) => read_file(p)?,
            None => ancestor_source(AncestorSpec {
                exon_len: config.ancestor_exon,
                intron_len: config.ancestor_intron,
            })?,
        };
        let mut asm_rng = seeded(derive_seed(config.seed, STREAM_ASSEMBLY));
        let ancestor = assemble(&source, &alphabet, &mut asm_rng)?;
        Self::with_lineages(config, vec![Lineage::new("ancestor", alphabet, ancestor)])
    }

    /// Seeds `config.founders` copies of each lineage's ancestor.
    pub fn with_lineages(config: WorldConfig, lineages: Vec<Lineage>) -> Result<Self, ConfigError> {
        config.validate()?;
        if lineages.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one lineage is required".into(),
            ));
        }
        if let Some(l) = lineages.iter().find(|l| l.ancestor.is_empty()) {
            return Err(ConfigError::Invalid(format!(
                "lineage {} has an empty ancestor",
                l.name
            )));
        }
        let mut world = World {
            rng: seeded(derive_seed(config.seed, STREAM_WORLD)),
            config,
            lineages,
            os: VirtualOs::standard(),
            organisms: Vec::new(),
            tick: 0,
            next_id: 0,
            alive: 0,
            extinct_at: None,
        };
        for lineage in 0..world.lineages.len() {
            for _ in 0..world.config.founders {
                let genome = world.lineages[lineage].ancestor.clone();
                world.admit(genome, lineage, None, 0);
            }
        }
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn lineages(&self) -> &[Lineage] {
        &self.lineages
    }

    pub fn os(&self) -> &VirtualOs {
        &self.os
    }

    /// Living organisms, id ascending.
    pub fn organisms(&self) -> impl Iterator<Item = &Organism> {
        self.organisms.iter().filter(|o| o.alive)
    }

    pub fn population(&self) -> usize {
        self.alive
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn is_extinct(&self) -> bool {
        self.alive == 0
    }

    /// First tick at whose end the soup was empty.
    pub fn extinct_at(&self) -> Option<u64> {
        self.extinct_at
    }

    /// Hamming distance to the lineage ancestor of every established
    /// organism: founders, and children that have run at least one slice.
    /// Newborns are left out until their first slice, so stillborn copies
    /// (which fault immediately) do not skew the statistics.
    pub fn hamming_distances(&self) -> Vec<u64> {
        self.organisms()
            .filter(|o| o.is_established())
            .map(|o| {
                hamming_codons(
                    o.genome().codons(),
                    self.lineages[o.lineage].ancestor.codons(),
                )
                .expect("genome length is fixed per lineage")
            })
            .collect()
    }

    fn admit(
        &mut self,
        genome: Genome,
        lineage: usize,
        parent: Option<(u64, u64)>,
        tick: u64,
    ) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let (parent_id, generation) = match parent {
            Some((pid, pgen)) => (Some(pid), pgen + 1),
            None => (None, 0),
        };
        self.organisms.push(Organism {
            id,
            parent_id,
            lineage,
            generation,
            program: Program::new(genome),
            vm: VmState::new(self.config.vm()),
            birth_tick: tick,
            offspring_count: 0,
            steps_since_spawn: 0,
            api_call_sites: BTreeSet::new(),
            rng: seeded(derive_seed(self.config.seed, STREAM_ORGANISM + id)),
            alive: true,
        });
        self.alive += 1;
        id
    }

    fn kill(&mut self, idx: usize, death: Death, st: &mut TickStats) {
        let o = &mut self.organisms[idx];
        if o.alive {
            o.alive = false;
            self.alive -= 1;
            st.record(death);
        }
    }

    /// Runs organism `idx` for at most `budget` steps, stopping at the first
    /// non-`Continue` outcome. Returns the outcome and the steps used.
    fn run_one(&mut self, idx: usize, budget: u64) -> (StepOutcome, u64) {
        let track = self.config.track_api_calls;
        let (before, rest) = self.organisms.split_at_mut(idx);
        let (me, after) = rest.split_first_mut().expect("index in range");
        let peers: Vec<&[u8]> = before
            .iter()
            .chain(after.iter())
            .filter(|o| o.alive)
            .map(|o| o.program.genome().codons())
            .collect();
        let env = Env {
            os: &self.os,
            alphabet: &self.lineages[me.lineage].alphabet,
        };
        let mut host = WorldHost {
            rng: &mut me.rng,
            peers,
            api_sites: if track {
                Some(&mut me.api_call_sites)
            } else {
                None
            },
        };
        let start = me.vm.steps_executed;
        let out = run_slice(&mut me.vm, &mut me.program, &env, &mut host, budget);
        let used = me.vm.steps_executed - start;
        me.steps_since_spawn += used;
        (out, used)
    }

    /// Handles a child image from organism `parent`.
    pub fn spawn(&mut self, parent: usize, bytes: Vec<u8>, st: &mut TickStats) -> SpawnResult {
        if self.alive >= self.config.capacity {
            st.rejected += 1;
            return SpawnResult::CapacityFull;
        }
        let (lineage, pid, pgen) = {
            let p = &self.organisms[parent];
            (p.lineage, p.id, p.generation)
        };
        let lin = &self.lineages[lineage];
        let mut codons = bytes;
        codons.resize(lin.ancestor.len(), NOP_MASK);
        let mut child =
            Genome::new(codons, lin.ancestor.data_offset()).expect("offset within ancestor length");

        let m = &self.config.mutation;
        let donor_idx = if m.hgt_rate.get() > 0.0 {
            let candidates: Vec<usize> = (0..self.organisms.len())
                .filter(|&i| {
                    i != parent && self.organisms[i].alive && self.organisms[i].lineage == lineage
                })
                .collect();
            (!candidates.is_empty()).then(|| candidates[self.rng.random_range(0..candidates.len())])
        } else {
            None
        };
        let donor = donor_idx.map(|i| self.organisms[i].program.genome());
        mutate(&mut child, m, &lin.synonyms, donor, &mut self.rng);
        st.births += 1;

        let p_kill = self.config.unmutated_kill_prob;
        if child.codons() == self.organisms[parent].genome().codons()
            && p_kill > 0.0
            && self.rng.random_bool(p_kill)
        {
            st.deaths_unmut += 1;
            return SpawnResult::KilledUnmutated;
        }
        self.organisms[parent].offspring_count += 1;
        SpawnResult::Accepted(self.admit(child, lineage, Some((pid, pgen)), self.tick))
    }

    pub fn tick(&mut self) -> TickStats {
        self.tick += 1;
        let mut st = TickStats {
            tick: self.tick,
            ..Default::default()
        };
        let scheduled = self.organisms.len();
        for idx in 0..scheduled {
            let mut budget = self.config.slice_steps;
            while budget > 0 && self.organisms[idx].alive {
                let (out, used) = self.run_one(idx, budget);
                budget = budget.saturating_sub(used);
                match out {
                    StepOutcome::Continue => break,
                    StepOutcome::SpawnRequest { addr, len } => {
                        let o = &self.organisms[idx];
                        let bytes =
                            o.vm.read_own(&o.program, addr, len)
                                .expect("range validated by vspawn");
                        if self.spawn(idx, bytes, &mut st) != SpawnResult::CapacityFull {
                            self.organisms[idx].steps_since_spawn = 0;
                        }
                    }
                    StepOutcome::Exit => self.kill(idx, Death::Exit, &mut st),
                    StepOutcome::Fault(kind) => self.kill(idx, Death::Fault(kind), &mut st),
                }
            }
        }
        self.loop_guard(&mut st);
        self.duplicate_guard(&mut st);
        self.organisms.retain(|o| o.alive);
        self.fill_stats(&mut st);
        if self.alive == 0 && self.extinct_at.is_none() {
            self.extinct_at = Some(self.tick);
        }
        st
    }

    fn loop_guard(&mut self, st: &mut TickStats) {
        for idx in 0..self.organisms.len() {
            let o = &self.organisms[idx];
            if o.alive && o.steps_since_spawn > self.config.lifetime_budget {
                self.kill(idx, Death::LoopGuard, st);
            }
        }
    }

    /// Keeps the oldest `duplicate_cap` organisms of each identical genome.
    fn duplicate_guard(&mut self, st: &mut TickStats) {
        let cap = self.config.duplicate_cap;
        if cap == 0 {
            return;
        }
        let mut seen: HashMap<[u8; 32], usize> = HashMap::new();
        // organisms are stored in id order, so later entries are newer
        for idx in 0..self.organisms.len() {
            if !self.organisms[idx].alive {
                continue;
            }
            let digest: [u8; 32] = Sha256::digest(self.organisms[idx].genome().codons()).into();
            let count = seen.entry(digest).or_insert(0);
            *count += 1;
            if *count > cap {
                self.kill(idx, Death::DuplicateGuard, st);
            }
        }
    }

    fn fill_stats(&self, st: &mut TickStats) {
        st.population = self.alive;
        st.lineage_population = vec![0; self.lineages.len()];
        let mut gen_sum = 0u64;
        for o in self.organisms() {
            st.lineage_population[o.lineage] += 1;
            gen_sum += o.generation;
            st.max_gen = st.max_gen.max(o.generation);
        }
        if self.alive > 0 {
            st.mean_gen = gen_sum as f64 / self.alive as f64;
            let d = self.hamming_distances();
            if !d.is_empty() {
                st.mean_hamming = d.iter().sum::<u64>() as f64 / d.len() as f64;
            }
        }
    }

    /// Runs up to `ticks` ticks, stopping early on extinction.
    pub fn run(
        &mut self,
        ticks: u64,
        mut on_tick: impl FnMut(&World, &TickStats),
    ) -> Vec<TickStats> {
        let mut out = Vec::new();
        for _ in 0..ticks {
            if self.is_extinct() {
                break;
            }
            let st = self.tick();
            on_tick(self, &st);
            out.push(st);
        }
        out
    }

    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).expect("world serializes");
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<World, SnapshotError> {
        if bytes.len() < 12 || bytes[..8] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::CorruptSnapshot(
                "missing snapshot header".into(),
            ));
        }
        let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if found != SNAPSHOT_VERSION {
            return Err(SnapshotError::VersionMismatch {
                found,
                expected: SNAPSHOT_VERSION,
            });
        }
        let world: World = bincode::deserialize(&bytes[12..])
            .map_err(|e| SnapshotError::CorruptSnapshot(e.to_string()))?;
        if world.alive != world.organisms.iter().filter(|o| o.alive).count() {
            return Err(SnapshotError::CorruptSnapshot(
                "population count mismatch".into(),
            ));
        }
        Ok(world)
    }
}
