//! Codon alphabets and their interaction energy.
//!
//! An alphabet maps each of the 256 codons to a role. Codons are the corners
//! of the 8-dimensional hypercube; two codons are neighbours when they differ
//! in one bit, i.e. when a single bitflip turns one into the other. The
//! energy of an alphabet sums a pairwise penalty over every neighbour pair,
//! so low-energy alphabets place similar instructions next to each other and
//! make point mutations more likely to be silent.
//!
//! Energies are accumulated as integers in units of 1/300 so that traces and
//! equality checks are exact on every platform.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{DangerCategory, Instruction, InstructionSet};
use crate::rng::SoupRng;

pub type Codon = u8;

/// Mask and value of the NOP-pattern codons `1??1.???1`.
pub const NOP_MASK: u8 = 0x91;
pub const DEFAULT_START: Codon = 0x2A;
pub const DEFAULT_STOP: Codon = 0x54;
/// Slots available to instructions once the NOP pattern and the two
/// markers are reserved.
pub const FREE_SLOTS: usize = 256 - 32 - 2;
/// Energy unit denominator: displayed energy = scaled / ENERGY_SCALE.
pub const ENERGY_SCALE: u32 = 300;
pub const MAX_ENERGY: f64 = 2048.0;

const FORMAT_HEADER: &str = "# codonsoup alphabet v1";
const SHIPPED: &str = include_str!("../data/default.alpha");
const SHIPPED_RANDOM: &str = include_str!("../data/random.alpha");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("too many instructions: {0} > {FREE_SLOTS}")]
    TooManyInstructions(usize),
    #[error("instruction set is empty")]
    NoInstructions,
    #[error("invalid marker codons start={start:#04x} stop={stop:#04x}")]
    BadMarkers { start: Codon, stop: Codon },
    #[error("codon {0:#04x} matches the NOP pattern but is not NOP")]
    ReservedSlot(Codon),
    #[error("alphabet needs exactly one START and one STOP codon")]
    MarkerCount,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

pub fn is_nop_pattern(c: Codon) -> bool {
    c & NOP_MASK == NOP_MASK
}

/// The 32 NOP-pattern codons in ascending order.
pub fn nop_codons() -> impl Iterator<Item = Codon> {
    (0..=255u8).filter(|c| is_nop_pattern(*c))
}

/// What a codon stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Exec(Instruction),
    Start,
    Stop,
    Nop,
}

impl Role {
    /// The instruction this role contributes to a translated stream; the
    /// markers have none.
    pub fn instruction(self) -> Option<Instruction> {
        match self {
            Role::Exec(i) => Some(i),
            Role::Nop => Some(Instruction::NopReal),
            Role::Start | Role::Stop => None,
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "START" => Some(Role::Start),
            "STOP" => Some(Role::Stop),
            "NOP" => Some(Role::Nop),
            m => Instruction::from_mnemonic(m).map(Role::Exec),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Exec(i) => f.write_str(i.mnemonic()),
            Role::Start => f.write_str("START"),
            Role::Stop => f.write_str("STOP"),
            Role::Nop => f.write_str("NOP"),
        }
    }
}

/// A validated 256-entry codon table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    entries: Vec<Role>,
    start: Codon,
    stop: Codon,
}

impl Alphabet {
    /// Builds an alphabet from raw entries, checking the reserved slots.
    pub fn from_entries(entries: [Role; 256]) -> Result<Self, AlphabetError> {
        let mut start = None;
        let mut stop = None;
        for (c, role) in entries.iter().enumerate() {
            let c = c as Codon;
            if is_nop_pattern(c) && *role != Role::Nop {
                return Err(AlphabetError::ReservedSlot(c));
            }
            let slot = match role {
                Role::Start => &mut start,
                Role::Stop => &mut stop,
                _ => continue,
            };
            if slot.replace(c).is_some() {
                return Err(AlphabetError::MarkerCount);
            }
        }
        match (start, stop) {
            (Some(start), Some(stop)) => Ok(Alphabet {
                entries: entries.to_vec(),
                start,
                stop,
            }),
            _ => Err(AlphabetError::MarkerCount),
        }
    }

    /// The shipped energy-optimized alphabet over the full instruction set.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped alphabet parses")
    }

    /// The shipped unoptimized alphabet (random fill, same markers).
    pub fn shipped_random() -> Self {
        Self::parse(SHIPPED_RANDOM).expect("shipped random alphabet parses")
    }

    pub fn role(&self, c: Codon) -> Role {
        self.entries[c as usize]
    }

    pub fn entries(&self) -> &[Role] {
        &self.entries
    }

    pub fn start_codon(&self) -> Codon {
        self.start
    }

    pub fn stop_codon(&self) -> Codon {
        self.stop
    }

    /// NOP-pattern slots and the two markers never move.
    pub fn is_reserved(&self, c: Codon) -> bool {
        is_nop_pattern(c) || c == self.start || c == self.stop
    }

    pub fn free_slots(&self) -> Vec<Codon> {
        (0..=255u8).filter(|c| !self.is_reserved(*c)).collect()
    }

    /// All codons whose entry equals `role`, ascending.
    pub fn codons_for(&self, role: Role) -> Vec<Codon> {
        (0..=255u8).filter(|c| self.role(*c) == role).collect()
    }

    /// Active-set instructions that no codon encodes.
    pub fn missing(&self, set: InstructionSet) -> Vec<Instruction> {
        set.iter()
            .filter(|i| !self.entries.contains(&Role::Exec(*i)))
            .collect()
    }

    pub fn energy(&self, v: &VParams) -> f64 {
        self.energy_scaled(v) as f64 / ENERGY_SCALE as f64
    }

    pub fn energy_scaled(&self, v: &VParams) -> u32 {
        energy_scaled(&self.entries, v)
    }

    fn swap(&mut self, a: Codon, b: Codon) {
        self.entries.swap(a as usize, b as usize);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(256 * 12);
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        for (c, role) in self.entries.iter().enumerate() {
            out.push_str(&format!("{c:02x} {role}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AlphabetError> {
        let ferr = |line: usize, msg: String| AlphabetError::Format { line, msg };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == FORMAT_HEADER => {}
            _ => return Err(ferr(1, format!("expected header `{FORMAT_HEADER}`"))),
        }
        let mut entries: [Option<Role>; 256] = [None; 256];
        for (n, raw) in lines {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let (Some(hex), Some(role), None) = (words.next(), words.next(), words.next()) else {
                return Err(ferr(n + 1, "expected `<hex codon> <role>`".into()));
            };
            let c = u8::from_str_radix(hex, 16)
                .map_err(|_| ferr(n + 1, format!("bad codon `{hex}`")))?;
            let role =
                Role::parse(role).ok_or_else(|| ferr(n + 1, format!("unknown role `{role}`")))?;
            if entries[c as usize].replace(role).is_some() {
                return Err(ferr(n + 1, format!("codon {c:02x} listed twice")));
            }
        }
        let mut full = [Role::Nop; 256];
        for (c, e) in entries.iter().enumerate() {
            full[c] = e.ok_or_else(|| ferr(0, format!("codon {c:02x} missing")))?;
        }
        Self::from_entries(full)
    }
}

/// Interaction energies per tier, in units of 1/[`ENERGY_SCALE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VParams {
    pub same: u32,
    pub add_family: u32,
    pub harmless: u32,
    pub semi_harmless: u32,
    pub dangerous_or_marker: u32,
}

impl Default for VParams {
    fn default() -> Self {
        VParams {
            same: 0,
            add_family: 150,
            harmless: 198,
            semi_harmless: 225,
            dangerous_or_marker: 300,
        }
    }
}

impl VParams {
    /// Builds the scaled table from plain energies (rounded to 1/300).
    pub fn from_values(add_family: f64, harmless: f64, semi_harmless: f64, other: f64) -> Self {
        let s = |x: f64| (x * ENERGY_SCALE as f64).round() as u32;
        VParams {
            same: 0,
            add_family: s(add_family),
            harmless: s(harmless),
            semi_harmless: s(semi_harmless),
            dangerous_or_marker: s(other),
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.same == 0
            && self.same <= self.add_family
            && self.add_family <= self.harmless
            && self.harmless <= self.semi_harmless
            && self.semi_harmless <= self.dangerous_or_marker
    }
}

/// Pair penalty in scaled units. Tiers are tried in order: identical,
/// both add-family, both harmless, both harmless or semi-harmless, other.
/// `Nop` counts as `nopREAL`.
#[inline]
pub fn interaction_scaled(a: Role, b: Role, v: &VParams) -> u32 {
    if a == b {
        return v.same;
    }
    let (Some(ia), Some(ib)) = (a.instruction(), b.instruction()) else {
        return v.dangerous_or_marker;
    };
    if ia == ib {
        return v.same;
    }
    let (ca, cb) = (ia.category(), ib.category());
    use DangerCategory::*;
    if ca == AddFamily && cb == AddFamily {
        v.add_family
    } else if ca.is_harmless() && cb.is_harmless() {
        v.harmless
    } else if ca != Dangerous && cb != Dangerous {
        v.semi_harmless
    } else {
        v.dangerous_or_marker
    }
}

pub fn interaction(a: Role, b: Role, v: &VParams) -> f64 {
    interaction_scaled(a, b, v) as f64 / ENERGY_SCALE as f64
}

/// Double sum over every codon and its eight single-bit neighbours; each
/// unordered pair is counted twice.
pub fn energy_scaled(entries: &[Role], v: &VParams) -> u32 {
    assert_eq!(entries.len(), 256);
    let mut total = 0u32;
    for i in 0..256usize {
        for bit in 0..8 {
            total += interaction_scaled(entries[i], entries[i ^ (1 << bit)], v);
        }
    }
    total
}

fn local_scaled(entries: &[Role], i: Codon, v: &VParams) -> u32 {
    let here = entries[i as usize];
    (0..8)
        .map(|bit| interaction_scaled(here, entries[(i ^ (1 << bit)) as usize], v))
        .sum()
}

/// Fills the free slots at random, each instruction at least once.
pub fn random_alphabet(
    instrs: InstructionSet,
    start: Codon,
    stop: Codon,
    rng: &mut SoupRng,
) -> Result<Alphabet, AlphabetError> {
    if start == stop || is_nop_pattern(start) || is_nop_pattern(stop) {
        return Err(AlphabetError::BadMarkers { start, stop });
    }
    let pool: Vec<Instruction> = instrs.iter().collect();
    if pool.is_empty() {
        return Err(AlphabetError::NoInstructions);
    }
    if pool.len() > FREE_SLOTS {
        return Err(AlphabetError::TooManyInstructions(pool.len()));
    }
    let mut entries = [Role::Nop; 256];
    entries[start as usize] = Role::Start;
    entries[stop as usize] = Role::Stop;
    let mut free: Vec<Codon> = (0..=255u8)
        .filter(|c| !is_nop_pattern(*c) && *c != start && *c != stop)
        .collect();
    free.shuffle(rng);
    for (k, &c) in free.iter().enumerate() {
        let instr = match pool.get(k) {
            Some(i) => *i,
            None => pool[rng.random_range(0..pool.len())],
        };
        entries[c as usize] = Role::Exec(instr);
    }
    Alphabet::from_entries(entries)
}

/// `(iteration, scaled energy)` samples of an optimizer run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnergyTrace {
    pub points: Vec<(u64, u32)>,
}

impl EnergyTrace {
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.points
            .iter()
            .map(|(_, e)| *e as f64 / ENERGY_SCALE as f64)
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energies().last()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy\n");
        for (it, e) in &self.points {
            out.push_str(&format!("{it},{:.4}\n", *e as f64 / ENERGY_SCALE as f64));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    pub iterations: u64,
    pub swaps_per_step: usize,
    /// A trace point is recorded every `trace_stride` iterations (and at the
    /// first and last iteration).
    pub trace_stride: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            iterations: 300_000,
            swaps_per_step: 2,
            trace_stride: 1_000,
        }
    }
}

/// Greedy Metropolis variant: swap a few random free-slot pairs, keep the
/// result only when the energy strictly drops.
pub fn optimize(
    alpha: &Alphabet,
    v: &VParams,
    opts: OptimizeOptions,
    rng: &mut SoupRng,
) -> (Alphabet, EnergyTrace) {
    assert!(opts.swaps_per_step >= 1, "swaps_per_step must be >= 1");
    let stride = opts.trace_stride.max(1);
    let mut current = alpha.clone();
    let free = current.free_slots();
    let mut energy = current.energy_scaled(v) as i64;
    let mut trace = EnergyTrace {
        points: vec![(0, energy as u32)],
    };
    let mut swaps: Vec<(Codon, Codon)> = Vec::with_capacity(opts.swaps_per_step);
    for it in 1..=opts.iterations {
        swaps.clear();
        let mut delta = 0i64;
        for _ in 0..opts.swaps_per_step {
            let a = free[rng.random_range(0..free.len())];
            let b = loop {
                let b = free[rng.random_range(0..free.len())];
                if b != a {
                    break b;
                }
            };
            let before =
                local_scaled(&current.entries, a, v) + local_scaled(&current.entries, b, v);
            current.swap(a, b);
            let after = local_scaled(&current.entries, a, v) + local_scaled(&current.entries, b, v);
            delta += 2 * (after as i64 - before as i64);
            swaps.push((a, b));
        }
        if delta < 0 {
            energy += delta;
        } else {
            for &(a, b) in swaps.iter().rev() {
                current.swap(a, b);
            }
        }
        if it % stride == 0 || it == opts.iterations {
            trace.points.push((it, energy as u32));
        }
    }
    debug_assert_eq!(energy as u32, current.energy_scaled(v));
    (current, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use Instruction::*;

    fn full_random(seed: u64) -> Alphabet {
        random_alphabet(
            InstructionSet::FULL,
            DEFAULT_START,
            DEFAULT_STOP,
            &mut seeded(seed),
        )
        .unwrap()
    }

    #[test]
    fn nop_pattern_examples() {
        assert!(is_nop_pattern(0x91));
        assert!(!is_nop_pattern(0x00));
        assert!(is_nop_pattern(0xBF));
        assert_eq!(nop_codons().count(), 32);
        assert!(!is_nop_pattern(DEFAULT_START) && !is_nop_pattern(DEFAULT_STOP));
        assert!((DEFAULT_START ^ DEFAULT_STOP).count_ones() > 1);
    }

    #[test]
    fn interaction_examples() {
        let v = VParams::default();
        assert_eq!(
            interaction(Role::Exec(Add0001), Role::Exec(Add0004), &v),
            0.5
        );
        assert_eq!(interaction(Role::Exec(Push), Role::Exec(Push), &v), 0.0);
        assert_eq!(interaction(Role::Exec(Zer0), Role::Start, &v), 1.0);
        assert_eq!(interaction(Role::Exec(Zer0), Role::Exec(Xor), &v), 0.66);
        assert_eq!(interaction(Role::Exec(Add0001), Role::Exec(Xor), &v), 0.66);
        assert_eq!(interaction(Role::Exec(Save), Role::Exec(Xor), &v), 0.75);
        assert_eq!(interaction(Role::Exec(Save), Role::Exec(Push), &v), 1.0);
        assert_eq!(interaction(Role::Nop, Role::Exec(NopReal), &v), 0.0);
        assert_eq!(interaction(Role::Start, Role::Stop, &v), 1.0);
        assert!(v.is_ordered());
        assert_eq!(VParams::from_values(0.5, 0.66, 0.75, 1.0), v);
    }

    #[test]
    fn single_instruction_alphabet_has_zero_energy() {
        let mut entries = [Role::Exec(Xor); 256];
        assert_eq!(energy_scaled(&entries, &VParams::default()), 0);
        // every pair in the top tier gives the stated maximum
        for (c, e) in entries.iter_mut().enumerate() {
            *e = if c % 2 == 0 {
                Role::Exec(Push)
            } else {
                Role::Exec(Pop)
            };
        }
        // neighbours across bit 0 differ, all others match
        let e = energy_scaled(&entries, &VParams::default());
        assert_eq!(e, 256 * 300);
        // parity colouring: every neighbour pair is push/pop, all in the top tier
        let parity: Vec<Role> = (0..256u32)
            .map(|c| {
                if c.count_ones() % 2 == 0 {
                    Role::Exec(Push)
                } else {
                    Role::Exec(Pop)
                }
            })
            .collect();
        assert_eq!(
            energy_scaled(&parity, &VParams::default()) as f64 / 300.0,
            MAX_ENERGY
        );
    }

    // Brute force over a 2-bit codon square: four corners, each with two
    // neighbours, summed by hand from the tier table.
    #[test]
    fn reduced_square_matches_hand_sum() {
        let v = VParams::default();
        let corners = [
            Role::Exec(Add0001),
            Role::Exec(Add0004),
            Role::Exec(Zer0),
            Role::Exec(Push),
        ];
        let mut sum = 0u32;
        for i in 0..4usize {
            for bit in 0..2 {
                sum += interaction_scaled(corners[i], corners[i ^ (1 << bit)], &v);
            }
        }
        // edges: 0-1 add/add 150, 0-2 add/zer0 198, 1-3 add/push 300, 2-3 zer0/push 300
        assert_eq!(sum, 2 * (150 + 198 + 300 + 300));
    }

    #[test]
    fn random_alphabet_contract() {
        let mut rng = seeded(3);
        let one = random_alphabet(
            InstructionSet::EMPTY.with(Shl),
            DEFAULT_START,
            DEFAULT_STOP,
            &mut rng,
        )
        .unwrap();
        for c in one.free_slots() {
            assert_eq!(one.role(c), Role::Exec(Shl));
        }
        let a = full_random(4);
        assert!(a.missing(InstructionSet::FULL).is_empty());
        assert_eq!(a.role(DEFAULT_START), Role::Start);
        assert_eq!(a.free_slots().len(), FREE_SLOTS);
        assert_eq!(
            random_alphabet(InstructionSet::FULL, 0x91, 0x54, &mut rng),
            Err(AlphabetError::BadMarkers {
                start: 0x91,
                stop: 0x54
            })
        );
        assert_eq!(
            random_alphabet(InstructionSet::FULL, 0x2A, 0x2A, &mut rng),
            Err(AlphabetError::BadMarkers {
                start: 0x2A,
                stop: 0x2A
            })
        );
        assert_eq!(
            random_alphabet(InstructionSet::EMPTY, 0x2A, 0x54, &mut rng),
            Err(AlphabetError::NoInstructions)
        );
    }

    #[test]
    fn optimize_zero_iterations_is_identity() {
        let a = full_random(9);
        let opts = OptimizeOptions {
            iterations: 0,
            ..Default::default()
        };
        let (b, trace) = optimize(&a, &VParams::default(), opts, &mut seeded(1));
        assert_eq!(a, b);
        assert_eq!(
            trace.points,
            vec![(0, a.energy_scaled(&VParams::default()))]
        );
    }

    #[test]
    fn optimize_lowers_energy_and_keeps_reserved_slots() {
        let v = VParams::default();
        let a = full_random(11);
        let opts = OptimizeOptions {
            iterations: 20_000,
            swaps_per_step: 2,
            trace_stride: 500,
        };
        let (b, trace) = optimize(&a, &v, opts, &mut seeded(2));
        assert!(trace.is_non_increasing());
        assert_eq!(trace.points.last().unwrap().1, b.energy_scaled(&v));
        assert!(b.energy_scaled(&v) < a.energy_scaled(&v));
        for c in 0..=255u8 {
            if a.is_reserved(c) {
                assert_eq!(a.role(c), b.role(c));
            }
        }
        // swaps only permute: multiset of roles unchanged
        let mut ra: Vec<_> = a.entries().iter().map(|r| format!("{r}")).collect();
        let mut rb: Vec<_> = b.entries().iter().map(|r| format!("{r}")).collect();
        ra.sort();
        rb.sort();
        assert_eq!(ra, rb);
    }

    // Mean energy of random full-set alphabets over seeds 10000..11000, frozen
    // from this estimator. A separate Python implementation of the energy and
    // the random fill gave 1563.88 +- 0.54 over 2000 alphabets.
    #[test]
    fn random_alphabet_mean_energy_baseline() {
        let v = VParams::default();
        let n = 1000;
        let mean = (0..n)
            .map(|s| full_random(10_000 + s).energy(&v))
            .sum::<f64>()
            / n as f64;
        assert!((mean - RANDOM_MEAN_BASELINE).abs() < 1e-6, "mean {mean}");
    }

    const RANDOM_MEAN_BASELINE: f64 = 1563.748;

    #[test]
    fn text_round_trip_and_errors() {
        let a = full_random(5);
        assert_eq!(Alphabet::parse(&a.to_text()).unwrap(), a);
        assert!(matches!(
            Alphabet::parse("00 push"),
            Err(AlphabetError::Format { line: 1, .. })
        ));
        let mut text = a.to_text();
        text = text.replace("\n91 NOP\n", "\n91 push\n");
        assert_eq!(
            Alphabet::parse(&text),
            Err(AlphabetError::ReservedSlot(0x91))
        );
        let s = Alphabet::shipped();
        assert!(s.missing(InstructionSet::FULL).is_empty());
        assert_eq!(
            (s.start_codon(), s.stop_codon()),
            (DEFAULT_START, DEFAULT_STOP)
        );
        let r = Alphabet::shipped_random();
        assert!(s.energy(&VParams::default()) < r.energy(&VParams::default()));
    }

    proptest! {
        #[test]
        fn energy_bounded_and_pair_sum_agrees(seed in any::<u64>()) {
            let v = VParams::default();
            let a = full_random(seed);
            let e = a.energy_scaled(&v);
            prop_assert!(e as f64 / 300.0 <= MAX_ENERGY);
            // unordered pairs, doubled
            let mut pairs = 0u32;
            for i in 0..256usize {
                for bit in 0..8 {
                    let j = i ^ (1 << bit);
                    if i < j {
                        pairs += interaction_scaled(a.entries()[i], a.entries()[j], &v);
                    }
                }
            }
            prop_assert_eq!(2 * pairs, e);
        }

        #[test]
        fn xor_relabeling_preserves_energy(seed in any::<u64>(), k in any::<u8>()) {
            let v = VParams::default();
            let a = full_random(seed);
            let permuted: Vec<Role> = (0..256).map(|c| a.entries()[c ^ k as usize]).collect();
            prop_assert_eq!(energy_scaled(&permuted, &v), a.energy_scaled(&v));
        }

        #[test]
        fn interaction_is_symmetric(i in 0usize..44, j in 0usize..44) {
            let role = |n: usize| match n {
                41 => Role::Start,
                42 => Role::Stop,
                43 => Role::Nop,
                n => Role::Exec(Instruction::ALL[n]),
            };
            let v = VParams::default();
            prop_assert_eq!(interaction_scaled(role(i), role(j), &v), interaction_scaled(role(j), role(i), &v));
        }
    }
}
