//! Register machine that executes spliced codon strings.
//!
//! Each organism owns a [`VmState`] and a [`Program`] (its genome plus a
//! cached translation). Services that depend on the rest of the world
//! (randomness, peer code) come in through the [`Host`] trait.
//!
//! Address layout:
//!
//! | base         | region                                   |
//! |--------------|------------------------------------------|
//! | `0x00010000` | genome: code, then the data section      |
//! | `0x00400000` | heap (bump allocated by `valloc`)        |
//! | `0x60000000` | peer code windows, `0x01000000` apart    |
//! | `0x7F000000` | API stubs, `0x10` apart                  |

mod os;

pub use os::{
    hash12, ApiHandler, Export, VirtualOs, API_STUB_SIZE, HASH_BITS, HASH_MASK, SERVICE_EXPORTS,
};

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Codon, Role, NOP_MASK};
use crate::genome::{splice::translate_codons, Genome};
use crate::isa::Instruction;
use crate::rng::SoupRng;

pub const CODE_BASE: u32 = 0x0001_0000;
pub const HEAP_BASE: u32 = 0x0040_0000;
pub const PEER_BASE: u32 = 0x6000_0000;
pub const PEER_STRIDE: u32 = 0x0100_0000;
pub const MAX_PEERS: u32 = 31;
pub const API_BASE: u32 = 0x7F00_0000;

pub const DEFAULT_MAX_STACK: usize = 256;
pub const DEFAULT_HEAP_LIMIT: u32 = 1 << 20;
/// Largest child image `vspawn` accepts.
pub const MAX_SPAWN_LEN: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    DivZero,
    BadMemory,
    StackOverflow,
    StackUnderflow,
    BadCall,
    StepBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepOutcome {
    Continue,
    Exit,
    Fault(FaultKind),
    SpawnRequest { addr: u32, len: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Code,
    Data,
    Heap,
    ApiStub,
    PeerCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub base: u32,
    pub len: u32,
    pub kind: RegionKind,
    pub writable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmConfig {
    pub max_stack: usize,
    pub heap_limit: u32,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig {
            max_stack: DEFAULT_MAX_STACK,
            heap_limit: DEFAULT_HEAP_LIMIT,
        }
    }
}

/// The organism-owned part of the address space (the genome lives in the
/// [`Program`]).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AddressSpace {
    pub heap: Vec<u8>,
    pub heap_limit: u32,
}

impl AddressSpace {
    /// Current region map for a genome of `code_len` codons.
    pub fn regions(
        &self,
        code_len: usize,
        data_offset: usize,
        os: &VirtualOs,
        peers: usize,
    ) -> Vec<Region> {
        let mut out = vec![Region {
            base: CODE_BASE,
            len: data_offset as u32,
            kind: RegionKind::Code,
            writable: true,
        }];
        if code_len > data_offset {
            out.push(Region {
                base: CODE_BASE + data_offset as u32,
                len: (code_len - data_offset) as u32,
                kind: RegionKind::Data,
                writable: true,
            });
        }
        out.push(Region {
            base: HEAP_BASE,
            len: self.heap.len() as u32,
            kind: RegionKind::Heap,
            writable: true,
        });
        for k in 0..(peers as u32).min(MAX_PEERS) {
            out.push(Region {
                base: PEER_BASE + k * PEER_STRIDE,
                len: PEER_STRIDE,
                kind: RegionKind::PeerCode,
                writable: false,
            });
        }
        out.push(Region {
            base: API_BASE,
            len: os.len() as u32 * API_STUB_SIZE,
            kind: RegionKind::ApiStub,
            writable: false,
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmState {
    pub reg_a: u32,
    pub reg_b: u32,
    pub reg_d: u32,
    pub bc1: u32,
    pub bc2: u32,
    pub ba1: u32,
    pub ba2: u32,
    /// Codon index of the next instruction.
    pub ip: u32,
    pub zf: bool,
    pub stack: Vec<u32>,
    pub max_stack: usize,
    pub memory: AddressSpace,
    pub steps_executed: u64,
}

impl VmState {
    pub fn new(config: VmConfig) -> Self {
        VmState {
            reg_a: 0,
            reg_b: 0,
            reg_d: 0,
            bc1: 0,
            bc2: 0,
            ba1: 0,
            ba2: 0,
            ip: 0,
            zf: false,
            stack: Vec::new(),
            max_stack: config.max_stack,
            memory: AddressSpace {
                heap: Vec::new(),
                heap_limit: config.heap_limit,
            },
            steps_executed: 0,
        }
    }

    /// The seven registers in `pushall` order.
    pub fn registers(&self) -> [u32; 7] {
        [
            self.reg_a, self.reg_b, self.reg_d, self.bc1, self.bc2, self.ba1, self.ba2,
        ]
    }

    pub fn set_registers(&mut self, r: [u32; 7]) {
        [
            self.reg_a, self.reg_b, self.reg_d, self.bc1, self.bc2, self.ba1, self.ba2,
        ] = r;
    }

    #[inline]
    fn set_bc1(&mut self, v: u32) {
        self.bc1 = v;
        self.zf = v == 0;
    }

    fn push(&mut self, v: u32) -> Result<(), FaultKind> {
        if self.stack.len() >= self.max_stack {
            return Err(FaultKind::StackOverflow);
        }
        self.stack.push(v);
        Ok(())
    }

    fn pop(&mut self) -> Result<u32, FaultKind> {
        self.stack.pop().ok_or(FaultKind::StackUnderflow)
    }

    fn read_u8(&self, prog: &Program, host: &dyn Host, addr: u32) -> Option<u8> {
        if let Some(off) = offset_in(addr, CODE_BASE, prog.len() as u32) {
            return Some(prog.genome.codons()[off]);
        }
        if let Some(off) = offset_in(addr, HEAP_BASE, self.memory.heap.len() as u32) {
            return Some(self.memory.heap[off]);
        }
        if let Some(off) = offset_in(addr, PEER_BASE, MAX_PEERS * PEER_STRIDE) {
            let k = off / PEER_STRIDE as usize;
            return host.peer_code(k)?.get(off % PEER_STRIDE as usize).copied();
        }
        None
    }

    fn read_u32(&self, prog: &Program, host: &dyn Host, addr: u32) -> Option<u32> {
        let mut b = [0u8; 4];
        for (k, slot) in b.iter_mut().enumerate() {
            *slot = self.read_u8(prog, host, addr.checked_add(k as u32)?)?;
        }
        Some(u32::from_le_bytes(b))
    }

    /// Checks that all of `[addr, addr + len)` is writable before writing.
    fn write_bytes(
        &mut self,
        prog: &mut Program,
        addr: u32,
        bytes: &[u8],
    ) -> Result<(), FaultKind> {
        let n = bytes.len() as u32;
        if let Some(off) = range_in(addr, n, CODE_BASE, prog.len() as u32) {
            prog.genome.codons_mut()[off..off + bytes.len()].copy_from_slice(bytes);
            prog.dirty = true;
            return Ok(());
        }
        if let Some(off) = range_in(addr, n, HEAP_BASE, self.memory.heap.len() as u32) {
            self.memory.heap[off..off + bytes.len()].copy_from_slice(bytes);
            return Ok(());
        }
        Err(FaultKind::BadMemory)
    }

    /// Bytes of an own region (genome or heap), as used for spawning.
    pub fn read_own(&self, prog: &Program, addr: u32, len: u32) -> Option<Vec<u8>> {
        if let Some(off) = range_in(addr, len, CODE_BASE, prog.len() as u32) {
            return Some(prog.genome.codons()[off..off + len as usize].to_vec());
        }
        if let Some(off) = range_in(addr, len, HEAP_BASE, self.memory.heap.len() as u32) {
            return Some(self.memory.heap[off..off + len as usize].to_vec());
        }
        None
    }

    fn alloc(&mut self, size: u32) -> u32 {
        let size = size.saturating_add(3) & !3;
        let used = self.memory.heap.len() as u32;
        match used.checked_add(size) {
            Some(end) if end <= self.memory.heap_limit => {
                self.memory.heap.resize(end as usize, 0);
                HEAP_BASE + used
            }
            _ => 0,
        }
    }
}

fn offset_in(addr: u32, base: u32, len: u32) -> Option<usize> {
    let off = addr.checked_sub(base)?;
    (off < len).then_some(off as usize)
}

fn range_in(addr: u32, n: u32, base: u32, len: u32) -> Option<usize> {
    let off = addr.checked_sub(base)?;
    (off.checked_add(n)? <= len).then_some(off as usize)
}

/// A genome being executed, with its translation cached until the next
/// write into the genome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Program {
    genome: Genome,
    #[serde(skip)]
    code: Vec<Instruction>,
    #[serde(skip, default = "always")]
    dirty: bool,
}

fn always() -> bool {
    true
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.genome == other.genome
    }
}

impl Program {
    pub fn new(genome: Genome) -> Self {
        Program {
            genome,
            code: Vec::new(),
            dirty: true,
        }
    }

    /// One codon per instruction; `None` if some instruction has no codon.
    pub fn from_instructions(seq: &[Instruction], alpha: &Alphabet) -> Option<Self> {
        let codons: Option<Vec<Codon>> = seq
            .iter()
            .map(|&i| match i {
                Instruction::NopReal => Some(NOP_MASK),
                _ => alpha.codons_for(Role::Exec(i)).first().copied(),
            })
            .collect();
        Some(Self::new(Genome::from_codons(codons?)))
    }

    pub fn genome(&self) -> &Genome {
        &self.genome
    }

    pub fn into_genome(self) -> Genome {
        self.genome
    }

    pub fn len(&self) -> usize {
        self.genome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genome.is_empty()
    }

    #[inline]
    pub fn fetch(&mut self, ip: u32, alpha: &Alphabet) -> Option<Instruction> {
        if self.dirty {
            self.code = translate_codons(self.genome.codons(), alpha);
            self.dirty = false;
        }
        self.code.get(ip as usize).copied()
    }
}

/// World services visible to a running organism.
pub trait Host {
    fn random_u32(&mut self) -> u32;

    fn peer_count(&self) -> usize {
        0
    }

    /// Genome bytes of peer `index`.
    fn peer_code(&self, _index: usize) -> Option<&[u8]> {
        None
    }

    /// Called with the codon index of each `call` that reaches an export.
    fn on_api_call(&mut self, _ip: u32, _export: usize) {}
}

/// A host with no peers, for running a single organism.
pub struct SoloHost {
    pub rng: SoupRng,
}

impl SoloHost {
    pub fn new(seed: u64) -> Self {
        SoloHost {
            rng: crate::rng::seeded(seed),
        }
    }
}

impl Host for SoloHost {
    fn random_u32(&mut self) -> u32 {
        rand::Rng::random(&mut self.rng)
    }
}

/// Read-only execution context.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub os: &'a VirtualOs,
    pub alphabet: &'a Alphabet,
}

pub fn step(
    state: &mut VmState,
    prog: &mut Program,
    env: &Env,
    host: &mut dyn Host,
) -> StepOutcome {
    let ip = state.ip;
    let Some(instr) = prog.fetch(ip, env.alphabet) else {
        return StepOutcome::Fault(FaultKind::BadMemory);
    };
    state.steps_executed += 1;
    match exec(state, prog, env, host, instr) {
        Ok(outcome) => outcome,
        Err(kind) => StepOutcome::Fault(kind),
    }
}

fn exec(
    s: &mut VmState,
    prog: &mut Program,
    env: &Env,
    host: &mut dyn Host,
    instr: Instruction,
) -> Result<StepOutcome, FaultKind> {
    use Instruction::*;
    let ip = s.ip;
    let mut next = ip.wrapping_add(1);
    let mut outcome = StepOutcome::Continue;
    match instr {
        NopReal => {}
        NopsA => s.bc1 = s.reg_a,
        NopsB => s.bc1 = s.reg_b,
        NopsD => s.bc1 = s.reg_d,
        NopdA => s.reg_a = s.bc1,
        NopdB => s.reg_b = s.bc1,
        NopdD => s.reg_d = s.bc1,
        Save => s.bc2 = s.bc1,
        AddSaved => s.set_bc1(s.bc1.wrapping_add(s.bc2)),
        SubSaved => s.set_bc1(s.bc1.wrapping_sub(s.bc2)),
        SaveWrtOff => s.ba1 = s.bc1,
        SaveJmpOff => s.ba2 = s.bc1,
        WriteByte => s.write_bytes(prog, s.ba1, &[s.bc1 as u8])?,
        WriteDWord => s.write_bytes(prog, s.ba1, &s.bc1.to_le_bytes())?,
        GetDo => s.bc1 = CODE_BASE + prog.genome.data_offset() as u32,
        GetData => s.bc1 = s.read_u32(prog, host, s.bc1).ok_or(FaultKind::BadMemory)?,
        GetEip => s.bc1 = CODE_BASE + ip,
        Push => s.push(s.bc1)?,
        Pop => s.bc1 = s.pop()?,
        PushAll => {
            if s.stack.len() + 7 > s.max_stack {
                return Err(FaultKind::StackOverflow);
            }
            s.stack.extend_from_slice(&s.registers());
        }
        PopAll => {
            let n = s.stack.len();
            if n < 7 {
                return Err(FaultKind::StackUnderflow);
            }
            let r: [u32; 7] = s.stack[n - 7..].try_into().unwrap();
            s.stack.truncate(n - 7);
            s.set_registers(r);
        }
        Zer0 => s.bc1 = 0,
        Add0001 | Add0004 | Add0010 | Add0040 | Add0100 | Add0400 | Add1000 | Add4000 => {
            let k = instr.add_immediate().unwrap_or(0);
            s.set_bc1(s.bc1.wrapping_add(k))
        }
        Sub0001 => s.set_bc1(s.bc1.wrapping_sub(1)),
        Shl | Shr => {
            let count = s.bc2 & 31;
            if count != 0 {
                let v = if instr == Shl {
                    s.bc1 << count
                } else {
                    s.bc1 >> count
                };
                s.set_bc1(v);
            }
        }
        Xor => s.set_bc1(s.bc1 ^ s.bc2),
        And => s.set_bc1(s.bc1 & s.bc2),
        Mul => {
            let p = s.reg_a as u64 * s.bc1 as u64;
            s.reg_a = p as u32;
            s.reg_d = (p >> 32) as u32;
        }
        Div => {
            if s.bc1 == 0 {
                return Err(FaultKind::DivZero);
            }
            let dividend = ((s.reg_d as u64) << 32) | s.reg_a as u64;
            let q = dividend / s.bc1 as u64;
            // quotient overflow raises the same exception as division by zero
            if q > u32::MAX as u64 {
                return Err(FaultKind::DivZero);
            }
            s.reg_a = q as u32;
            s.reg_d = (dividend % s.bc1 as u64) as u32;
        }
        JnzUp => {
            if !s.zf {
                next = offset_in(s.ba2, CODE_BASE, prog.len() as u32).ok_or(FaultKind::BadMemory)?
                    as u32;
            }
        }
        JnzDown => {}
        Call => {
            let target = s.bc1;
            if let Some(k) = env.os.stub_index(target) {
                host.on_api_call(ip, k);
                outcome = invoke_api(s, prog, host, env.os.exports()[k].handler)?;
            } else if let Some(off) = offset_in(target, CODE_BASE, prog.len() as u32) {
                s.push(CODE_BASE + next)?;
                next = off as u32;
            } else {
                return Err(FaultKind::BadCall);
            }
        }
        CallApiLoadLibrary => s.bc1 = env.os.resolve_api((s.bc1 & HASH_MASK) as u16),
    }
    s.ip = next;
    Ok(outcome)
}

/// Runs one virtual API. Arguments are popped first-argument-first.
pub fn invoke_api(
    s: &mut VmState,
    prog: &Program,
    host: &mut dyn Host,
    handler: ApiHandler,
) -> Result<StepOutcome, FaultKind> {
    if s.stack.len() < handler.arg_count() {
        return Err(FaultKind::StackUnderflow);
    }
    Ok(match handler {
        ApiHandler::Valloc => {
            let size = s.pop()?;
            s.reg_a = s.alloc(size);
            StepOutcome::Continue
        }
        ApiHandler::Vspawn => {
            let addr = s.pop()?;
            let len = s.pop()?;
            if len == 0 || len > MAX_SPAWN_LEN {
                return Err(FaultKind::BadMemory);
            }
            let own = range_in(addr, len, CODE_BASE, prog.len() as u32).is_some()
                || range_in(addr, len, HEAP_BASE, s.memory.heap.len() as u32).is_some();
            if !own {
                return Err(FaultKind::BadMemory);
            }
            s.reg_a = 0;
            StepOutcome::SpawnRequest { addr, len }
        }
        ApiHandler::Vexit => StepOutcome::Exit,
        ApiHandler::Vrand => {
            s.reg_a = host.random_u32();
            StepOutcome::Continue
        }
        ApiHandler::Vpeer => {
            let i = s.pop()?;
            s.reg_a = if (i as usize) < host.peer_count() && i < MAX_PEERS {
                PEER_BASE + i * PEER_STRIDE
            } else {
                0
            };
            StepOutcome::Continue
        }
        ApiHandler::Decoy => {
            s.reg_a = 0;
            StepOutcome::Continue
        }
    })
}

/// Steps until something other than `Continue` happens or `max_steps`
/// instructions have run; an exhausted slice returns `Continue`.
pub fn run_slice(
    state: &mut VmState,
    prog: &mut Program,
    env: &Env,
    host: &mut dyn Host,
    max_steps: u64,
) -> StepOutcome {
    for _ in 0..max_steps {
        let out = step(state, prog, env, host);
        if out != StepOutcome::Continue {
            return out;
        }
    }
    StepOutcome::Continue
}

/// Header of the trace format written by [`run_traced`].
pub const TRACE_HEADER: &str = "step,ip,instr,bc1,bc2,zf";

/// Like [`run_slice`], writing one trace line per executed step (state
/// after the step, `ip` of the instruction that ran).
pub fn run_traced(
    state: &mut VmState,
    prog: &mut Program,
    env: &Env,
    host: &mut dyn Host,
    max_steps: u64,
    out: &mut dyn Write,
) -> io::Result<StepOutcome> {
    for _ in 0..max_steps {
        let ip = state.ip;
        let instr = prog.fetch(ip, env.alphabet);
        let result = step(state, prog, env, host);
        if let Some(instr) = instr {
            writeln!(
                out,
                "{},{},{},{:#010x},{:#010x},{}",
                state.steps_executed,
                ip,
                instr.mnemonic(),
                state.bc1,
                state.bc2,
                state.zf as u8
            )?;
        }
        if result != StepOutcome::Continue {
            return Ok(result);
        }
    }
    Ok(StepOutcome::Continue)
}

/// Result of running an organism alone until it stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub outcome: StepOutcome,
    pub steps: u64,
    /// Child images requested along the way.
    pub spawns: Vec<Vec<u8>>,
}

/// Runs until exit or fault, collecting spawned images; running out of
/// `max_steps` is reported as `Fault(StepBudget)`.
pub fn run_to_completion(
    state: &mut VmState,
    prog: &mut Program,
    env: &Env,
    host: &mut dyn Host,
    max_steps: u64,
) -> RunReport {
    let start = state.steps_executed;
    let mut spawns = Vec::new();
    loop {
        let used = state.steps_executed - start;
        if used >= max_steps {
            break;
        }
        match run_slice(state, prog, env, host, max_steps - used) {
            StepOutcome::SpawnRequest { addr, len } => {
                if let Some(bytes) = state.read_own(prog, addr, len) {
                    spawns.push(bytes);
                }
            }
            StepOutcome::Continue => break,
            other => {
                return RunReport {
                    outcome: other,
                    steps: state.steps_executed - start,
                    spawns,
                }
            }
        }
    }
    RunReport {
        outcome: StepOutcome::Fault(FaultKind::StepBudget),
        steps: state.steps_executed - start,
        spawns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::assemble;
    use crate::rng::seeded;
    use rand::Rng;
    use Instruction::*;

    fn alpha() -> Alphabet {
        Alphabet::shipped()
    }

    fn exec_seq(seq: &[Instruction], s: &mut VmState) -> StepOutcome {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::from_instructions(seq, &a).unwrap();
        let mut host = SoloHost::new(0);
        s.ip = 0;
        for _ in seq {
            let out = step(s, &mut prog, &env, &mut host);
            if out != StepOutcome::Continue {
                return out;
            }
        }
        StepOutcome::Continue
    }

    fn fresh() -> VmState {
        VmState::new(VmConfig::default())
    }

    #[test]
    fn sub_to_zero_sets_zf() {
        let mut s = fresh();
        s.bc1 = 1;
        exec_seq(&[Sub0001], &mut s);
        assert_eq!(s.bc1, 0);
        assert!(s.zf);
    }

    #[test]
    fn mul_small_product() {
        let mut s = fresh();
        s.reg_a = 6;
        s.bc1 = 7;
        exec_seq(&[Mul], &mut s);
        assert_eq!((s.reg_a, s.reg_d), (42, 0));
    }

    #[test]
    fn div_by_zero_and_overflow_fault() {
        let mut s = fresh();
        s.reg_a = 5;
        assert_eq!(
            exec_seq(&[Div], &mut s),
            StepOutcome::Fault(FaultKind::DivZero)
        );
        s.reg_d = 2;
        s.bc1 = 1;
        assert_eq!(
            exec_seq(&[Div], &mut s),
            StepOutcome::Fault(FaultKind::DivZero)
        );
    }

    #[test]
    fn mul_div_inverse() {
        let mut rng = seeded(42);
        for _ in 0..10_000 {
            let d: u32 = rng.random_range(1..=u32::MAX);
            let q: u32 = rng.random_range(0..=(u32::MAX / d));
            let mut s = fresh();
            s.reg_a = q;
            s.bc1 = d;
            exec_seq(&[Mul, Div], &mut s);
            let product = q as u128 * d as u128;
            assert_eq!(s.reg_a as u128, product / d as u128);
            assert_eq!(s.reg_d, 0);
        }
    }

    #[test]
    fn pushall_popall_identity() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let mut s = fresh();
            let regs: [u32; 7] = std::array::from_fn(|_| rng.random());
            s.set_registers(regs);
            let depth = rng.random_range(0..=DEFAULT_MAX_STACK - 7);
            s.stack = vec![0xAB; depth];
            assert_eq!(exec_seq(&[PushAll, PopAll], &mut s), StepOutcome::Continue);
            assert_eq!(s.registers(), regs);
            assert_eq!(s.stack.len(), depth);
        }
        let mut s = fresh();
        s.stack = vec![0; DEFAULT_MAX_STACK - 6];
        assert_eq!(
            exec_seq(&[PushAll], &mut s),
            StepOutcome::Fault(FaultKind::StackOverflow)
        );
    }

    #[test]
    fn shifts_mask_count_and_keep_zf_on_zero_count() {
        let mut s = fresh();
        s.bc1 = 1;
        s.bc2 = 33;
        exec_seq(&[Shl], &mut s);
        assert_eq!(s.bc1, 2);
        s.zf = true;
        s.bc2 = 32;
        exec_seq(&[Shr], &mut s);
        assert_eq!(s.bc1, 2);
        assert!(s.zf);
    }

    #[test]
    fn zer0_leaves_zf() {
        let mut s = fresh();
        s.bc1 = 9;
        exec_seq(&[Zer0], &mut s);
        assert_eq!(s.bc1, 0);
        assert!(!s.zf);
    }

    #[test]
    fn stack_underflow() {
        let mut s = fresh();
        assert_eq!(
            exec_seq(&[Pop], &mut s),
            StepOutcome::Fault(FaultKind::StackUnderflow)
        );
    }

    #[test]
    fn jnzup_jumps_when_zf_clear() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::from_instructions(&[NopReal, NopReal, JnzUp], &a).unwrap();
        let mut host = SoloHost::new(0);
        let mut s = fresh();
        s.ba2 = CODE_BASE + 1;
        s.ip = 2;
        step(&mut s, &mut prog, &env, &mut host);
        assert_eq!(s.ip, 1);
        s.ip = 2;
        s.zf = true;
        step(&mut s, &mut prog, &env, &mut host);
        assert_eq!(s.ip, 3);
        s.ip = 2;
        s.zf = false;
        s.ba2 = HEAP_BASE;
        assert_eq!(
            step(&mut s, &mut prog, &env, &mut host),
            StepOutcome::Fault(FaultKind::BadMemory)
        );
    }

    #[test]
    fn nop_genome_slice() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::new(Genome::from_codons(vec![NOP_MASK; 64]));
        let mut s = fresh();
        let out = run_slice(&mut s, &mut prog, &env, &mut SoloHost::new(1), 10);
        assert_eq!(out, StepOutcome::Continue);
        assert_eq!(s.steps_executed, 10);
        assert_eq!(s.ip, 10);
    }

    #[test]
    fn endless_loop_uses_whole_budget() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let g = assemble(
            "getEIP\nsaveJmpOff\nzer0\nadd0001\nJnzUp",
            &a,
            &mut seeded(0),
        )
        .unwrap();
        let mut prog = Program::new(g);
        let mut s = fresh();
        let out = run_slice(&mut s, &mut prog, &env, &mut SoloHost::new(1), 1000);
        assert_eq!(out, StepOutcome::Continue);
        assert_eq!(s.steps_executed, 1000);
        let report = run_to_completion(&mut s, &mut prog, &env, &mut SoloHost::new(1), 500);
        assert_eq!(report.outcome, StepOutcome::Fault(FaultKind::StepBudget));
        assert_eq!(report.steps, 500);
    }

    #[test]
    fn vexit_call_exits() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let src = "getDO\ngetdata\nCallAPILoadLibrary\ncall\nDATA\napihash \"vexit\"";
        let mut prog = Program::new(assemble(src, &a, &mut seeded(0)).unwrap());
        let mut s = fresh();
        let out = run_slice(&mut s, &mut prog, &env, &mut SoloHost::new(1), 100);
        assert_eq!(out, StepOutcome::Exit);
    }

    #[test]
    fn valloc_write_read_back() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut s = fresh();
        let mut prog = Program::new(Genome::from_codons(vec![NOP_MASK; 4]));
        let mut host = SoloHost::new(0);
        s.stack.push(64);
        let out = invoke_api(&mut s, &prog, &mut host, ApiHandler::Valloc).unwrap();
        assert_eq!(out, StepOutcome::Continue);
        assert_eq!(s.reg_a, HEAP_BASE);
        s.ba1 = s.reg_a + 8;
        s.bc1 = 0xDEAD_BEEF;
        let mut p2 = Program::from_instructions(&[WriteDWord], &a).unwrap();
        s.ip = 0;
        assert_eq!(
            step(&mut s, &mut p2, &env, &mut host),
            StepOutcome::Continue
        );
        assert_eq!(s.read_u32(&prog, &host, HEAP_BASE + 8), Some(0xDEAD_BEEF));
        // writes past the heap fault
        s.ba1 = HEAP_BASE + 62;
        s.ip = 0;
        assert_eq!(
            step(&mut s, &mut p2, &env, &mut host),
            StepOutcome::Fault(FaultKind::BadMemory)
        );
        // heap exhaustion returns 0
        s.stack.push(DEFAULT_HEAP_LIMIT);
        invoke_api(&mut s, &prog, &mut host, ApiHandler::Valloc).unwrap();
        assert_eq!(s.reg_a, 0);
        let _ = &mut prog;
    }

    #[test]
    fn vpeer_without_peers_is_zero() {
        let mut s = fresh();
        let prog = Program::new(Genome::from_codons(vec![NOP_MASK; 4]));
        s.reg_a = 7;
        s.stack.push(0);
        invoke_api(&mut s, &prog, &mut SoloHost::new(0), ApiHandler::Vpeer).unwrap();
        assert_eq!(s.reg_a, 0);
    }

    #[test]
    fn vspawn_validates_range() {
        let prog = Program::new(Genome::from_codons(vec![NOP_MASK; 16]));
        let mut s = fresh();
        s.stack.extend([16, CODE_BASE]);
        assert_eq!(
            invoke_api(&mut s, &prog, &mut SoloHost::new(0), ApiHandler::Vspawn),
            Ok(StepOutcome::SpawnRequest {
                addr: CODE_BASE,
                len: 16
            })
        );
        s.stack.extend([17, CODE_BASE]);
        assert_eq!(
            invoke_api(&mut s, &prog, &mut SoloHost::new(0), ApiHandler::Vspawn),
            Err(FaultKind::BadMemory)
        );
    }

    #[test]
    fn decoys_never_fault() {
        let prog = Program::new(Genome::from_codons(vec![NOP_MASK; 4]));
        let mut s = fresh();
        assert_eq!(
            invoke_api(&mut s, &prog, &mut SoloHost::new(0), ApiHandler::Decoy),
            Ok(StepOutcome::Continue)
        );
    }

    #[test]
    fn call_into_code_pushes_return() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::from_instructions(&[Call, NopReal, NopReal], &a).unwrap();
        let mut s = fresh();
        s.bc1 = CODE_BASE + 2;
        step(&mut s, &mut prog, &env, &mut SoloHost::new(0));
        assert_eq!(s.ip, 2);
        assert_eq!(s.stack, vec![CODE_BASE + 1]);
        s.ip = 0;
        s.bc1 = 0x1234;
        assert_eq!(
            step(&mut s, &mut prog, &env, &mut SoloHost::new(0)),
            StepOutcome::Fault(FaultKind::BadCall)
        );
    }

    #[test]
    fn self_modification_takes_effect_next_fetch() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let pop = a.codons_for(Role::Exec(Pop))[0];
        let mut prog = Program::from_instructions(&[WriteByte, NopReal], &a).unwrap();
        let mut s = fresh();
        s.ba1 = CODE_BASE + 1;
        s.bc1 = pop as u32;
        let mut host = SoloHost::new(0);
        assert_eq!(
            step(&mut s, &mut prog, &env, &mut host),
            StepOutcome::Continue
        );
        assert_eq!(
            step(&mut s, &mut prog, &env, &mut host),
            StepOutcome::Fault(FaultKind::StackUnderflow)
        );
    }

    #[test]
    fn running_off_the_end_faults() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::new(Genome::from_codons(vec![NOP_MASK; 3]));
        let mut s = fresh();
        let out = run_slice(&mut s, &mut prog, &env, &mut SoloHost::new(0), 10);
        assert_eq!(out, StepOutcome::Fault(FaultKind::BadMemory));
        assert_eq!(s.steps_executed, 3);
    }

    #[test]
    fn trace_lines() {
        let a = alpha();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        let mut prog = Program::from_instructions(&[Add0004, Save], &a).unwrap();
        let mut s = fresh();
        let mut buf = Vec::new();
        run_traced(&mut s, &mut prog, &env, &mut SoloHost::new(0), 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "1,0,add0004,0x00000004,0x00000000,0\n2,1,save,0x00000004,0x00000004,0\n"
        );
    }

    #[test]
    fn regions_are_disjoint() {
        let s = fresh();
        let os = VirtualOs::standard();
        let mut r = s.memory.regions(100, 80, &os, 3);
        r.sort_by_key(|r| r.base);
        for w in r.windows(2) {
            assert!(w[0].base as u64 + w[0].len as u64 <= w[1].base as u64);
        }
    }
}
