//! The virtual operating system: a table of named exports, each with a stub
//! address in the API region, resolved by a 12-bit hash of the name.

use serde::{Deserialize, Serialize};

use super::API_BASE;

/// Address distance between consecutive export stubs.
pub const API_STUB_SIZE: u32 = 0x10;
pub const HASH_BITS: u32 = 12;
pub const HASH_MASK: u32 = (1 << HASH_BITS) - 1;

/// 12-bit rolling hash of an API name.
pub fn hash12(name: &str) -> u16 {
    let mut h: u32 = 0;
    for b in name.bytes() {
        h = ((h << 3) ^ (h >> 9) ^ b as u32) & HASH_MASK;
    }
    h as u16
}

/// Host services behind the stubs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApiHandler {
    /// `valloc(size)`: heap block, address in RegA (0 when exhausted).
    Valloc,
    /// `vspawn(addr, len)`: hand a child image to the world.
    Vspawn,
    /// `vexit()`: terminate.
    Vexit,
    /// `vrand()`: 32 random bits in RegA.
    Vrand,
    /// `vpeer(i)`: base address of another organism's read-only code, or 0.
    Vpeer,
    /// Takes no arguments, sets RegA to 0.
    Decoy,
}

impl ApiHandler {
    pub fn arg_count(self) -> usize {
        match self {
            ApiHandler::Valloc | ApiHandler::Vpeer => 1,
            ApiHandler::Vspawn => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Export {
    pub name: String,
    pub stub: u32,
    pub handler: ApiHandler,
}

pub const SERVICE_EXPORTS: [(&str, ApiHandler); 5] = [
    ("valloc", ApiHandler::Valloc),
    ("vspawn", ApiHandler::Vspawn),
    ("vexit", ApiHandler::Vexit),
    ("vrand", ApiHandler::Vrand),
    ("vpeer", ApiHandler::Vpeer),
];

const DECOY_NAMES: [&str; 59] = [
    "GetTickCount",
    "Sleep",
    "GetLastError",
    "SetLastError",
    "GetCurrentProcessId",
    "GetCurrentThreadId",
    "GetVersion",
    "GetCommandLineA",
    "GetModuleHandleA",
    "GetProcAddress",
    "FreeLibrary",
    "CreateFileA",
    "ReadFile",
    "WriteFile",
    "CloseHandle",
    "FindFirstFileA",
    "FindNextFileA",
    "FindClose",
    "DeleteFileA",
    "CopyFileA",
    "MoveFileA",
    "GetFileSize",
    "SetFilePointer",
    "CreateProcessA",
    "ExitProcess",
    "TerminateProcess",
    "WaitForSingleObject",
    "CreateThread",
    "ExitThread",
    "VirtualAlloc",
    "VirtualFree",
    "VirtualProtect",
    "HeapAlloc",
    "HeapFree",
    "GetProcessHeap",
    "GlobalAlloc",
    "GlobalFree",
    "LocalAlloc",
    "LocalFree",
    "lstrlenA",
    "lstrcpyA",
    "lstrcatA",
    "lstrcmpA",
    "MultiByteToWideChar",
    "WideCharToMultiByte",
    "GetSystemTime",
    "GetLocalTime",
    "QueryPerformanceCounter",
    "GetEnvironmentVariableA",
    "SetEnvironmentVariableA",
    "GetTempPathA",
    "GetWindowsDirectoryA",
    "GetSystemDirectoryA",
    "CreateMutexA",
    "ReleaseMutex",
    "OutputDebugStringA",
    "IsDebuggerPresent",
    "GetStartupInfoA",
    "FlushFileBuffers",
];

/// Export table plus a direct-mapped hash index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ExportTable", into = "ExportTable")]
pub struct VirtualOs {
    exports: Vec<Export>,
    /// For each hash value, 1 + index of the first export with that hash.
    index: Vec<u16>,
}

#[derive(Serialize, Deserialize)]
struct ExportTable {
    exports: Vec<Export>,
}

impl From<ExportTable> for VirtualOs {
    fn from(t: ExportTable) -> Self {
        Self::new(t.exports.into_iter().map(|e| (e.name, e.handler)))
    }
}

impl From<VirtualOs> for ExportTable {
    fn from(os: VirtualOs) -> Self {
        ExportTable {
            exports: os.exports,
        }
    }
}

impl VirtualOs {
    /// Builds an export table; duplicate names keep their first occurrence.
    pub fn new<I, S>(exports: I) -> Self
    where
        I: IntoIterator<Item = (S, ApiHandler)>,
        S: Into<String>,
    {
        let mut table: Vec<Export> = Vec::new();
        for (name, handler) in exports {
            let name = name.into();
            assert!(!name.is_empty(), "export names must be non-empty");
            if table.iter().any(|e| e.name == name) {
                continue;
            }
            let stub = API_BASE + table.len() as u32 * API_STUB_SIZE;
            table.push(Export {
                name,
                stub,
                handler,
            });
        }
        let mut os = VirtualOs {
            exports: table,
            index: Vec::new(),
        };
        os.rebuild_index();
        os
    }

    /// The service exports followed by the decoys.
    pub fn standard() -> Self {
        Self::new(
            SERVICE_EXPORTS
                .iter()
                .map(|&(n, h)| (n, h))
                .chain(DECOY_NAMES.iter().map(|&n| (n, ApiHandler::Decoy))),
        )
    }

    /// `n` seeded pseudo-random decoy names, for reachability estimates.
    pub fn synthetic(n: usize, rng: &mut crate::rng::SoupRng) -> Self {
        use rand::Rng;
        const SYLLABLES: [&str; 24] = [
            "Get", "Set", "Create", "Open", "Close", "Read", "Write", "Find", "Query", "Load",
            "Free", "Alloc", "File", "Process", "Thread", "Window", "Module", "Handle", "Heap",
            "Time", "Info", "Ex", "Name", "Path",
        ];
        let mut names = Vec::with_capacity(n);
        let mut seen = std::collections::HashSet::new();
        while names.len() < n {
            let parts = rng.random_range(2..=4);
            let mut name: String = (0..parts)
                .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                .collect();
            name.push(if rng.random_bool(0.5) { 'A' } else { 'W' });
            if seen.insert(name.clone()) {
                names.push((name, ApiHandler::Decoy));
            }
        }
        Self::new(names)
    }

    fn rebuild_index(&mut self) {
        let mut index = vec![0u16; 1 << HASH_BITS];
        for (k, e) in self.exports.iter().enumerate() {
            let slot = &mut index[hash12(&e.name) as usize];
            if *slot == 0 {
                *slot = k as u16 + 1;
            }
        }
        self.index = index;
    }

    pub fn exports(&self) -> &[Export] {
        &self.exports
    }

    pub fn len(&self) -> usize {
        self.exports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exports.is_empty()
    }

    /// Stub address of the first export whose name hashes to `h`, else 0.
    pub fn resolve_api(&self, h: u16) -> u32 {
        self.resolve_index(h).map_or(0, |k| self.exports[k].stub)
    }

    pub fn resolve_index(&self, h: u16) -> Option<usize> {
        match self.index.get((h as u32 & HASH_MASK) as usize) {
            Some(&slot) if slot > 0 => Some(slot as usize - 1),
            _ => None,
        }
    }

    /// Export index whose stub is exactly `addr`.
    pub fn stub_index(&self, addr: u32) -> Option<usize> {
        let off = addr.checked_sub(API_BASE)?;
        if off % API_STUB_SIZE != 0 {
            return None;
        }
        let k = (off / API_STUB_SIZE) as usize;
        (k < self.exports.len()).then_some(k)
    }

    pub fn in_stub_region(&self, addr: u32) -> bool {
        addr >= API_BASE && addr < API_BASE + self.exports.len() as u32 * API_STUB_SIZE
    }

    /// Number of distinct hashes in the table.
    pub fn occupied_hashes(&self) -> usize {
        self.index.iter().filter(|s| **s > 0).count()
    }
}

impl Default for VirtualOs {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    // Frozen outputs of `hash12` for the standard service exports.
    const GOLDEN: [(&str, u16); 5] = [
        ("valloc", 0x3C6),
        ("vspawn", 0x85A),
        ("vexit", 0x747),
        ("vrand", 0xF2D),
        ("vpeer", 0xA63),
    ];

    #[test]
    fn hash_golden_values() {
        for (name, h) in GOLDEN {
            assert_eq!(hash12(name), h, "{name}");
        }
        assert!(DECOY_NAMES.iter().all(|n| hash12(n) <= 0xFFF));
        // hand-computed: 'a' = 0x61 -> 0x061; "ab": (0x061<<3) ^ 0 ^ 0x62 = 0x308 ^ 0x62 = 0x36A
        assert_eq!(hash12("a"), 0x061);
        assert_eq!(hash12("ab"), 0x36A);
    }

    #[test]
    fn standard_table() {
        let os = VirtualOs::standard();
        assert!(os.len() >= 5 + 58);
        for (k, e) in os.exports().iter().enumerate() {
            assert_eq!(os.stub_index(e.stub), Some(k));
            assert!(os.in_stub_region(e.stub));
        }
        // the service exports resolve to themselves
        for (k, (name, _)) in SERVICE_EXPORTS.iter().enumerate() {
            assert_eq!(os.resolve_api(hash12(name)), os.exports()[k].stub);
        }
        assert_eq!(os.stub_index(API_BASE + 1), None);
    }

    #[test]
    fn resolve_unknown_hash_is_zero() {
        let os = VirtualOs::new([("valloc", ApiHandler::Valloc)]);
        let h = hash12("valloc");
        assert_eq!(os.resolve_api(h), API_BASE);
        assert_eq!(os.resolve_api(h ^ 1), 0);
    }

    #[test]
    fn first_export_wins_on_collision() {
        // find two names that collide
        let mut by_hash = std::collections::HashMap::new();
        let mut pair = None;
        for i in 0..10_000 {
            let n = format!("n{i}");
            if let Some(prev) = by_hash.insert(hash12(&n), n.clone()) {
                pair = Some((prev, n));
                break;
            }
        }
        let (a, b) = pair.unwrap();
        let os = VirtualOs::new([(a.clone(), ApiHandler::Decoy), (b, ApiHandler::Vexit)]);
        assert_eq!(os.resolve_index(hash12(&a)), Some(0));
    }

    #[test]
    fn single_bitflip_resolve_fraction() {
        use rand::Rng;
        let mut rng = seeded(2024);
        let os = VirtualOs::synthetic(1000, &mut rng);
        let trials = 100_000;
        let mut hits = 0;
        for _ in 0..trials {
            let e = &os.exports()[rng.random_range(0..os.len())];
            let flipped = hash12(&e.name) ^ (1 << rng.random_range(0..HASH_BITS));
            if os.resolve_api(flipped) != 0 {
                hits += 1;
            }
        }
        let frac = hits as f64 / trials as f64;
        assert!((0.19..=0.27).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn serde_rebuilds_index() {
        let os = VirtualOs::standard();
        let bytes = bincode::serialize(&os).unwrap();
        let back: VirtualOs = bincode::deserialize(&bytes).unwrap();
        assert_eq!(back, os);
        assert_eq!(back.resolve_api(hash12("vexit")), os.exports()[2].stub);
    }

    #[test]
    fn synthetic_tables_are_seeded() {
        let a = VirtualOs::synthetic(100, &mut seeded(1));
        let b = VirtualOs::synthetic(100, &mut seeded(1));
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
    }
}
