//! Mutation engines. All of them work in place, keep the genome length and
//! data offset, and draw from an explicit random stream.
//!
//! Rates are per-codon Bernoulli probabilities (per aligned site for the
//! d-word exchange, per replication for translocation and gene transfer).

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{nop_codons, Alphabet, Codon, Role};
use crate::genome::Genome;
use crate::rng::SoupRng;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("rate {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("cannot parse rate {0:?} (expected a probability or 1/N)")]
    Syntax(String),
}

/// A probability, written either as a decimal or as `1/N`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    pub fn new(p: f64) -> Result<Self, RateError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Rate(p))
        } else {
            Err(RateError::OutOfRange(p))
        }
    }

    /// `1/n`; `n = 0` means never.
    pub fn one_in(n: u64) -> Self {
        if n == 0 {
            Rate(0.0)
        } else {
            Rate(1.0 / n as f64)
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl FromStr for Rate {
    type Err = RateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || RateError::Syntax(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den <= 0.0 {
                return Err(bad());
            }
            Rate::new(num / den)
        } else {
            Rate::new(s.parse().map_err(|_| bad())?)
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if !d.is_human_readable() {
            return Rate::new(f64::deserialize(d)?).map_err(serde::de::Error::custom);
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Rate::new(p),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    pub bitflip_rate: Rate,
    pub xchg_rate: Rate,
    pub translocate_rate: Rate,
    pub recode_rate: Rate,
    pub hgt_rate: Rate,
    pub max_insert: usize,
    pub max_block: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            bitflip_rate: Rate::ZERO,
            xchg_rate: Rate::ZERO,
            translocate_rate: Rate::ZERO,
            recode_rate: Rate::ZERO,
            hgt_rate: Rate::ZERO,
            max_insert: 16,
            max_block: 64,
        }
    }
}

impl MutationConfig {
    pub fn bitflip_only(rate: Rate) -> Self {
        MutationConfig {
            bitflip_rate: rate,
            ..Self::default()
        }
    }
}

/// Calls `hit` for each index in `0..n` selected with probability `p`,
/// skipping ahead geometrically between hits.
fn bernoulli_sites(n: usize, p: f64, rng: &mut SoupRng, mut hit: impl FnMut(usize, &mut SoupRng)) {
    if n == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..n {
            hit(i, rng);
        }
        return;
    }
    let geo = Geometric::new(p).expect("p in (0, 1)");
    let mut i = 0usize;
    loop {
        let gap = geo.sample(rng);
        i = match usize::try_from(gap).ok().and_then(|g| i.checked_add(g)) {
            Some(v) if v < n => v,
            _ => return,
        };
        hit(i, rng);
        i += 1;
    }
}

/// Flips one uniformly chosen bit in each selected codon. Returns the number
/// of codons changed.
pub fn bitflip(g: &mut Genome, rate: Rate, rng: &mut SoupRng) -> usize {
    let codons = g.codons_mut();
    let mut count = 0;
    bernoulli_sites(codons.len(), rate.get(), rng, |i, rng| {
        codons[i] ^= 1 << rng.random_range(0..8);
        count += 1;
    });
    count
}

/// Swaps the two d-words of the 8-codon site starting at `site`.
pub fn dword_exchange_at(g: &mut Genome, site: usize) {
    let c = g.codons_mut();
    let (a, b) = c[site..site + 8].split_at_mut(4);
    a.swap_with_slice(b);
}

/// For each 8-aligned site, with probability `rate`, exchanges its two
/// d-words. Returns the number of sites exchanged.
pub fn dword_exchange(g: &mut Genome, rate: Rate, rng: &mut SoupRng) -> usize {
    let sites = g.len() / 8;
    let mut hits = Vec::new();
    bernoulli_sites(sites, rate.get(), rng, |s, _| hits.push(s));
    for &s in &hits {
        dword_exchange_at(g, s * 8);
    }
    hits.len()
}

/// Parameters of one translocation event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translocation {
    pub position: usize,
    pub insert: usize,
    pub block: usize,
}

/// Moves `[P, P+S_b)` right by `S_i`, fills `[P, P+S_i)` with random
/// NOP-pattern codons and drops whatever passes the genome end.
pub fn translocate_with(g: &mut Genome, t: Translocation, rng: &mut SoupRng) {
    let len = g.len();
    let p = t.position.min(len);
    let block_end = (p + t.block).min(len);
    let moved: Vec<Codon> = g.codons()[p..block_end].to_vec();
    let nops: Vec<Codon> = nop_codons().collect();
    let c = g.codons_mut();
    let fill_end = (p + t.insert).min(len);
    for slot in &mut c[p..fill_end] {
        *slot = *nops.choose(rng).expect("32 NOP codons");
    }
    let dst = p + t.insert;
    if dst < len {
        let n = moved.len().min(len - dst);
        c[dst..dst + n].copy_from_slice(&moved[..n]);
    }
}

/// Draws P, S_i and S_b and applies the translocation. `max_insert` and
/// `max_block` are clamped to the genome length.
pub fn translocate(
    g: &mut Genome,
    max_insert: usize,
    max_block: usize,
    rng: &mut SoupRng,
) -> Option<Translocation> {
    let len = g.len();
    if len == 0 {
        return None;
    }
    let t = Translocation {
        position: rng.random_range(0..len),
        insert: rng.random_range(1..=max_insert.clamp(1, len)),
        block: rng.random_range(0..=max_block.min(len)),
    };
    translocate_with(g, t, rng);
    Some(t)
}

/// Same-role codon classes of an alphabet. START and STOP are singletons.
#[derive(Debug, Clone)]
pub struct Synonyms {
    classes: Vec<Vec<Codon>>,
}

impl Synonyms {
    pub fn new(alpha: &Alphabet) -> Self {
        let classes = (0..=255u8)
            .map(|c| match alpha.role(c) {
                Role::Start | Role::Stop => Vec::new(),
                role => (0..=255u8)
                    .filter(|&d| d != c && alpha.role(d) == role)
                    .collect(),
            })
            .collect();
        Synonyms { classes }
    }

    /// Other codons with the same role as `c`.
    pub fn of(&self, c: Codon) -> &[Codon] {
        &self.classes[c as usize]
    }
}

/// Replaces each selected codon by a different codon of the same role
/// (codons without synonyms stay put). Returns the number of codons changed.
pub fn neutral_recode(g: &mut Genome, syn: &Synonyms, rate: Rate, rng: &mut SoupRng) -> usize {
    let codons = g.codons_mut();
    let mut count = 0;
    bernoulli_sites(codons.len(), rate.get(), rng, |i, rng| {
        if let Some(&d) = syn.of(codons[i]).choose(rng) {
            codons[i] = d;
            count += 1;
        }
    });
    count
}

/// Parameters of one gene-transfer event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub source: usize,
    pub target: usize,
    pub len: usize,
}

pub fn gene_transfer_with(g: &mut Genome, donor: &Genome, t: Transfer) {
    g.codons_mut()[t.target..t.target + t.len]
        .copy_from_slice(&donor.codons()[t.source..t.source + t.len]);
}

/// Copies a segment of 1 to `min(len)/4` codons from a random donor offset
/// over a random offset of `g`.
pub fn gene_transfer(g: &mut Genome, donor: &Genome, rng: &mut SoupRng) -> Option<Transfer> {
    let shortest = g.len().min(donor.len());
    if shortest == 0 {
        return None;
    }
    let len = rng.random_range(1..=(shortest / 4).max(1));
    let t = Transfer {
        source: rng.random_range(0..=donor.len() - len),
        target: rng.random_range(0..=g.len() - len),
        len,
    };
    gene_transfer_with(g, donor, t);
    Some(t)
}

/// What happened to one child during replication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutationReport {
    pub bitflips: usize,
    pub exchanges: usize,
    pub translocation: Option<Translocation>,
    pub recodes: usize,
    pub transfer: Option<Transfer>,
}

/// Applies every engine in the fixed order bitflip, d-word exchange,
/// translocation, neutral recode, gene transfer.
pub fn mutate(
    g: &mut Genome,
    cfg: &MutationConfig,
    syn: &Synonyms,
    donor: Option<&Genome>,
    rng: &mut SoupRng,
) -> MutationReport {
    let mut r = MutationReport {
        bitflips: bitflip(g, cfg.bitflip_rate, rng),
        exchanges: dword_exchange(g, cfg.xchg_rate, rng),
        ..Default::default()
    };
    if cfg.translocate_rate.get() > 0.0 && rng.random_bool(cfg.translocate_rate.get()) {
        r.translocation = translocate(g, cfg.max_insert, cfg.max_block, rng);
    }
    r.recodes = neutral_recode(g, syn, cfg.recode_rate, rng);
    if let Some(donor) = donor {
        if cfg.hgt_rate.get() > 0.0 && rng.random_bool(cfg.hgt_rate.get()) {
            r.transfer = gene_transfer(g, donor, rng);
        }
    }
    r
}

/// Probability that at least one codon of a `len`-codon genome is hit.
pub fn p_any_hit(rate: f64, len: usize) -> f64 {
    1.0 - (1.0 - rate).powf(len as f64)
}
