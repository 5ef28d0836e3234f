//! `chordspec` command line: brute-force tables, recursion tables, their
//! comparison, and the exponential/recursion consistency checks.
//!
//! Exit codes: 0 success, 1 mismatch, 2 invalid arguments, 3 internal
//! invariant failure, 4 corrupt cache file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num::{BigUint, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cutjoin::{self, DeltaConvention, TableSet};
use crate::error::{CutJoinError, OracleError, SeriesError, SpectraError};
use crate::oracle::{self, OracleOptions};
use crate::series::{extract_table, table_to_series, Series, Truncation};
use crate::spectra::{
    project_spectra, validate_class, BackboneSpectrum, CountTable, CyclicPolicy, DiagramClass, LengthPointSpectrum,
    Mode,
};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Mismatch(String),
    Invalid(String),
    Internal(String),
    Cache { file: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Internal(_) => 3,
            CliError::Cache { .. } => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Mismatch(s) => write!(f, "mismatch: {s}"),
            CliError::Invalid(s) => write!(f, "invalid arguments: {s}"),
            CliError::Internal(s) => write!(f, "internal error: {s}"),
            CliError::Cache { file, reason } => write!(f, "corrupt cache file {}: {reason}", file.display()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooManyChords { .. } => CliError::Invalid(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<CutJoinError> for CliError {
    fn from(e: CutJoinError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "chordspec", version, about = "Boundary length and point spectra of partial chord diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count diagrams of one sector by brute force.
    Oracle(OracleArgs),
    /// Step the cut-and-join equation and store one table per sector and chord count.
    Recurse(RangeArgs),
    /// Compare recursion tables with brute-force tables.
    Verify(VerifyArgs),
    /// Check exp(H) = Z and the cut-and-join recursion on recursion tables.
    PdeCheck(RangeArgs),
    /// Check a single diagram class given as JSON.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// rotation | rotation-reflection
    #[arg(long)]
    pub policy: Option<CyclicPolicy>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Backbone counts b_0,b_1,b_2,… (so `0,1,0,1` is one 1-vertex and one 3-vertex backbone).
    #[arg(long)]
    pub backbones: Option<String>,
    #[arg(long)]
    pub chords: Option<u32>,
    #[arg(long)]
    pub connected_only: bool,
    /// Keep only untwisted chords (non-oriented mode).
    #[arg(long)]
    pub untwisted_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Most backbones per sector.
    #[arg(long)]
    pub bmax: Option<u32>,
    /// Most vertices per backbone.
    #[arg(long)]
    pub vmax: Option<u32>,
    /// Most vertices per sector (default: unbounded).
    #[arg(long)]
    pub weight_max: Option<u64>,
    /// Directory holding cached tables.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Also write every table as CSV rows to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    /// Compare oriented recursion tables with the all-untwisted non-oriented enumeration.
    #[arg(long)]
    pub cross_mode: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// JSON file holding one class.
    #[arg(long)]
    pub class: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<Mode>,
    pub policy: Option<CyclicPolicy>,
    pub backbones: Option<String>,
    pub chords: Option<u32>,
    pub connected_only: Option<bool>,
    pub kmax: Option<u32>,
    pub bmax: Option<u32>,
    pub vmax: Option<u32>,
    pub weight_max: Option<u64>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TupleJson {
    pub tuple: Vec<u32>,
    pub mult: u32,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct EntryJson {
    pub euler_index: u32,
    #[serde(default = "one")]
    pub pieces: u32,
    pub spectrum: Vec<TupleJson>,
    pub count: String,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TableJson {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine_version: Option<String>,
    pub mode: Mode,
    pub policy: CyclicPolicy,
    pub k: u32,
    pub backbones: Vec<u32>,
    pub l: u32,
    pub connected_only: bool,
    pub entries: Vec<EntryJson>,
}

pub fn table_to_json(t: &CountTable) -> TableJson {
    let entries = t
        .entries()
        .map(|(c, n)| EntryJson {
            euler_index: c.euler_index,
            pieces: c.pieces,
            spectrum: c.spectrum.iter().map(|(d, m)| TupleJson { tuple: d.rep().to_vec(), mult: m }).collect(),
            count: n.to_string(),
        })
        .collect();
    TableJson {
        schema: SCHEMA,
        engine_version: None,
        mode: t.mode,
        policy: t.policy,
        k: t.k,
        backbones: t.backbones.counts().to_vec(),
        l: t.l().unwrap_or(0),
        connected_only: t.connected_only,
        entries,
    }
}

/// Rebuilds a table, checking every identity a stored table must satisfy.
pub fn table_from_json(j: &TableJson) -> Result<CountTable, String> {
    if j.schema != SCHEMA {
        return Err(format!("unknown schema {}", j.schema));
    }
    let b = BackboneSpectrum::new(j.backbones.clone());
    let mut table = CountTable::new(j.mode, j.policy, j.k, b.clone(), j.connected_only);
    if table.l() != Some(j.l) {
        return Err(format!("l={} does not fit b={} and k={}", j.l, b, j.k));
    }
    for e in &j.entries {
        let spectrum = LengthPointSpectrum::from_tuples(e.spectrum.iter().map(|t| (t.tuple.clone(), t.mult)), j.policy)
            .map_err(|err| err.to_string())?;
        let class = DiagramClass {
            mode: j.mode,
            euler_index: e.euler_index,
            pieces: e.pieces,
            k: j.k,
            l: j.l,
            backbones: b.clone(),
            spectrum,
        };
        let violations = validate_class(&class);
        if !violations.is_empty() {
            return Err(format!("entry violates {violations:?}"));
        }
        if (j.connected_only && class.pieces != 1) || table.get(&class) != BigUint::zero() {
            return Err(format!("entry {} is duplicated or disconnected", class.spectrum));
        }
        let count: BigUint = e.count.parse().map_err(|_| format!("count {:?} is not a nonnegative integer", e.count))?;
        table.insert(class, count).map_err(|err| err.to_string())?;
    }
    Ok(table)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn table_text(t: &CountTable) -> String {
    let mut s = serde_json::to_string_pretty(&table_to_json(t)).expect("serializable");
    s.push('\n');
    s
}

const CSV_HEADER: [&str; 9] = ["mode", "policy", "k", "backbones", "l", "euler_index", "pieces", "spectrum", "count"];

fn write_csv(path: &Path, tables: &[&CountTable]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| io_err(path, e))?;
    for t in tables {
        let b = t.backbones.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        for (c, n) in t.entries() {
            let row = [
                t.mode.to_string(),
                t.policy.to_string(),
                t.k.to_string(),
                b.clone(),
                c.l.to_string(),
                c.euler_index.to_string(),
                c.pieces.to_string(),
                c.spectrum.to_string(),
                n.to_string(),
            ];
            w.write_record(&row).map_err(|e| io_err(path, e))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
    write_atomic(path, &bytes)
}

/// Content-addressed table store.
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn path(&self, mode: Mode, policy: CyclicPolicy, b: &BackboneSpectrum, k: u32) -> PathBuf {
        let key = format!("{ENGINE_VERSION}|{mode}|{policy}|{:?}|{k}", b.counts());
        self.dir.join(format!("{}.json", hex::encode(Sha256::digest(key.as_bytes()))))
    }

    /// `Ok(None)` when absent or written by another engine version.
    pub fn load(&self, mode: Mode, policy: CyclicPolicy, b: &BackboneSpectrum, k: u32) -> Result<Option<CountTable>, CliError> {
        let path = self.path(mode, policy, b, k);
        let Ok(text) = fs::read_to_string(&path) else {
            return Ok(None);
        };
        let corrupt = |reason: String| CliError::Cache { file: path.clone(), reason };
        let json: TableJson = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if json.engine_version.as_deref() != Some(ENGINE_VERSION) {
            return Ok(None);
        }
        let table = table_from_json(&json).map_err(corrupt)?;
        if table.mode != mode || table.policy != policy || &table.backbones != b || table.k != k || !table.connected_only {
            return Err(corrupt("contents do not match the file's key".into()));
        }
        Ok(Some(table))
    }

    pub fn store(&self, t: &CountTable) -> Result<PathBuf, CliError> {
        let path = self.path(t.mode, t.policy, &t.backbones, t.k);
        let mut json = table_to_json(t);
        json.engine_version = Some(ENGINE_VERSION.to_string());
        let mut text = serde_json::to_string_pretty(&json).expect("serializable");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

fn parse_backbones(s: &str) -> Result<BackboneSpectrum, CliError> {
    let counts: Result<Vec<u32>, _> = s.split(',').map(|p| p.trim().parse::<u32>()).collect();
    let counts = counts.map_err(|_| CliError::Invalid(format!("--backbones expects comma-separated counts, got {s:?}")))?;
    let b = BackboneSpectrum::new(counts);
    if b.is_empty() {
        return Err(CliError::Invalid("--backbones needs at least one backbone".into()));
    }
    Ok(b)
}

fn check_policy(mode: Mode, policy: CyclicPolicy) -> Result<(), CliError> {
    if mode == Mode::NonOriented && policy == CyclicPolicy::RotationOnly {
        return Err(CliError::Invalid(
            "non-oriented boundaries have no preferred direction; use --policy rotation-reflection".into(),
        ));
    }
    Ok(())
}

/// Fully resolved options for the range commands.
#[derive(Debug, Clone)]
pub struct Range {
    pub mode: Mode,
    pub policy: CyclicPolicy,
    pub trunc: Truncation,
    pub cache: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Range {
    fn resolve(args: &RangeArgs) -> Result<Self, CliError> {
        let cfg = load_config(&args.common.config)?;
        let mode = args.common.mode.or(cfg.mode).unwrap_or(Mode::Oriented);
        let policy = args.common.policy.or(cfg.policy).unwrap_or_default();
        let need = |v: Option<u32>, c: Option<u32>, name: &str| {
            v.or(c).ok_or_else(|| CliError::Invalid(format!("--{name} is required")))
        };
        let kmax = need(args.kmax, cfg.kmax, "kmax")?;
        let bmax = need(args.bmax, cfg.bmax, "bmax")?;
        let vmax = need(args.vmax, cfg.vmax, "vmax")?;
        if bmax == 0 || vmax == 0 {
            return Err(CliError::Invalid("--bmax and --vmax must be positive".into()));
        }
        let mut trunc = Truncation::new(kmax, bmax, vmax);
        if let Some(w) = args.weight_max.or(cfg.weight_max) {
            trunc = trunc.with_weight_max(w);
        }
        check_policy(mode, policy)?;
        Ok(Range { mode, policy, trunc, cache: args.cache.clone().or(cfg.cache), csv: args.csv.clone().or(cfg.csv) })
    }

    /// Every sector with `1..=b_max` backbones of `1..=v_max` vertices within the weight bound.
    pub fn sectors(&self) -> Vec<BackboneSpectrum> {
        fn grow(sizes: &mut Vec<usize>, r: &Range, out: &mut Vec<BackboneSpectrum>) {
            if !sizes.is_empty() {
                out.push(BackboneSpectrum::from_sizes(sizes));
            }
            if sizes.len() == r.trunc.b_max as usize {
                return;
            }
            let start = sizes.last().copied().unwrap_or(1);
            let used: usize = sizes.iter().sum();
            for s in start..=r.trunc.v_max as usize {
                if r.trunc.weight_max.map_or(false, |w| (used + s) as u64 > w) {
                    break;
                }
                sizes.push(s);
                grow(sizes, r, out);
                sizes.pop();
            }
        }
        let mut out = Vec::new();
        grow(&mut Vec::new(), self, &mut out);
        out.sort();
        out
    }

    fn levels(&self, b: &BackboneSpectrum) -> impl Iterator<Item = u32> {
        0..=self.trunc.k_max.min((b.vertices() / 2) as u32)
    }
}

/// Recursion tables for every sector of the range, from the cache where possible.
pub fn recursion_tables(r: &Range) -> Result<TableSet, CliError> {
    let cache = r.cache.as_ref().map(Cache::new);
    let mut set = TableSet::new(r.mode, r.policy);
    let mut missing = false;
    let mut found = Vec::new();
    for b in r.sectors() {
        for k in r.levels(&b) {
            match cache.as_ref().map(|c| c.load(r.mode, r.policy, &b, k)).transpose()?.flatten() {
                Some(t) => found.push(t),
                None => missing = true,
            }
        }
    }
    if missing {
        let h = cutjoin::solve_connected(r.mode, r.policy, r.trunc, None)?;
        let cached: BTreeMap<(BackboneSpectrum, u32), CountTable> =
            found.into_iter().map(|t| ((t.backbones.clone(), t.k), t)).collect();
        for b in r.sectors() {
            for k in r.levels(&b) {
                let table = match cached.get(&(b.clone(), k)) {
                    Some(t) => t.clone(),
                    None => {
                        let t = extract_table(&h[k as usize], r.mode, k, &b)?;
                        if let Some(c) = &cache {
                            c.store(&t)?;
                        }
                        t
                    }
                };
                set.insert(table)?;
            }
        }
    } else {
        for t in found {
            set.insert(t)?;
        }
    }
    Ok(set)
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&args.common.config)?;
    let mode = args.common.mode.or(cfg.mode).unwrap_or(Mode::Oriented);
    let policy = args.common.policy.or(cfg.policy).unwrap_or_default();
    check_policy(mode, policy)?;
    let backbones = args.backbones.clone().or(cfg.backbones).ok_or_else(|| CliError::Invalid("--backbones is required".into()))?;
    let b = parse_backbones(&backbones)?;
    let k = args.chords.or(cfg.chords).ok_or_else(|| CliError::Invalid("--chords is required".into()))?;
    let opts = OracleOptions {
        connected_only: args.connected_only || cfg.connected_only.unwrap_or(false),
        policy,
        untwisted_only: args.untwisted_only,
    };
    let table = oracle::count_table_with(&b, k, mode, &opts)?;
    for (class, _) in table.entries() {
        let v = validate_class(class);
        if !v.is_empty() {
            return Err(CliError::Internal(format!("enumerated class {} violates {v:?}", class.spectrum)));
        }
    }
    match args.out.clone().or(cfg.out) {
        Some(path) => write_atomic(&path, table_text(&table).as_bytes())?,
        None => out.write_all(table_text(&table).as_bytes()).map_err(|e| CliError::Internal(e.to_string()))?,
    }
    if let Some(path) = args.csv.clone().or(cfg.csv) {
        write_csv(&path, &[&table])?;
    }
    Ok(())
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_recurse(args: &RangeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = Range::resolve(args)?;
    let set = recursion_tables(&r)?;
    for t in set.tables() {
        say(out, format!("b={} k={} classes={} total={}", t.backbones, t.k, t.len(), t.total()))?;
    }
    if let Some(path) = &r.csv {
        write_csv(path, &set.tables().collect::<Vec<_>>())?;
    }
    Ok(())
}

fn diff_tables(expected: &CountTable, actual: &CountTable, report: &mut Vec<String>) {
    let mut classes: Vec<&DiagramClass> = expected.entries().chain(actual.entries()).map(|(c, _)| c).collect();
    classes.sort();
    classes.dedup();
    for c in classes {
        let (e, a) = (expected.get(c), actual.get(c));
        if e != a {
            report.push(format!(
                "b={} k={} euler={} m={}: oracle {} recursion {}",
                c.backbones, c.k, c.euler_index, c.spectrum, e, a
            ));
        }
    }
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut r = Range::resolve(&args.range)?;
    if args.cross_mode {
        r.mode = Mode::Oriented;
    }
    let set = recursion_tables(&r)?;
    let mut report = Vec::new();
    let mut compared = 0usize;
    for t in set.tables() {
        let expected = if args.cross_mode {
            let opts = OracleOptions { connected_only: true, policy: r.policy, untwisted_only: true };
            let raw = oracle::count_table_with(&t.backbones, t.k, Mode::NonOriented, &opts)?;
            let mut relabelled = CountTable::new(Mode::Oriented, r.policy, t.k, t.backbones.clone(), true);
            for (c, n) in raw.entries() {
                if c.euler_index % 2 == 1 {
                    return Err(CliError::Internal(format!("untwisted diagram with odd cross-cap number: {}", c.spectrum)));
                }
                let class = DiagramClass { mode: Mode::Oriented, euler_index: c.euler_index / 2, ..c.clone() };
                relabelled.insert(class, n.clone())?;
            }
            relabelled
        } else {
            oracle::count_table(&t.backbones, t.k, r.mode, true, r.policy)?
        };
        diff_tables(&expected, t, &mut report);
        compared += 1;
    }
    for line in &report {
        say(out, line)?;
    }
    if report.is_empty() {
        say(out, format!("ok: {compared} tables agree"))
    } else {
        Err(CliError::Mismatch(format!("{} differing entries across {compared} tables", report.len())))
    }
}

fn first_difference(label: &str, a: &Series, b: &Series, report: &mut Vec<String>) -> Result<(), CliError> {
    let diff = a.sub(b)?;
    for (m, _) in diff.terms().iter().take(20) {
        report.push(format!("{label}: {m}: exp side {} linear side {}", a.coefficient(m), b.coefficient(m)));
    }
    if diff.len() > 20 {
        report.push(format!("{label}: … {} more", diff.len() - 20));
    }
    Ok(())
}

fn cmd_pde_check(args: &RangeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = Range::resolve(args)?;
    let set = recursion_tables(&r)?;
    let mut report = Vec::new();
    for m in cutjoin::recursion_check_all(&set, DeltaConvention::Corrected)? {
        report.push(format!("recursion: {m}"));
    }
    let mut h = Series::zero(r.policy, r.trunc);
    for t in set.tables() {
        h = h.add(&table_to_series(t, r.trunc))?;
    }
    let z = cutjoin::sum_parts(&cutjoin::solve_full(r.mode, r.policy, r.trunc)?)?;
    first_difference("exp(H) = Z at x=1", &h.exp()?.at_x_one(), &z.at_x_one(), &mut report)?;
    first_difference("exp(H regraded) = Z", &cutjoin::regrade_for_full(&h).exp()?, &z, &mut report)?;
    for line in &report {
        say(out, line)?;
    }
    if report.is_empty() {
        say(out, format!("ok: {} tables, {} terms of Z", set.tables().count(), z.len()))
    } else {
        Err(CliError::Mismatch(format!("{} problems", report.len())))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassJson {
    pub mode: Mode,
    #[serde(default)]
    pub policy: CyclicPolicy,
    pub euler_index: u32,
    #[serde(default = "one")]
    pub pieces: u32,
    pub k: u32,
    pub l: u32,
    pub backbones: Vec<u32>,
    pub spectrum: Vec<TupleJson>,
}

fn show_counts<K: std::fmt::Display>(m: &BTreeMap<K, u64>) -> String {
    m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ")
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.class).map_err(|e| CliError::Invalid(format!("{}: {e}", args.class.display())))?;
    let c: ClassJson = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", args.class.display())))?;
    let spectrum = LengthPointSpectrum::from_tuples(c.spectrum.iter().map(|t| (t.tuple.clone(), t.mult)), c.policy)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let class = DiagramClass {
        mode: c.mode,
        euler_index: c.euler_index,
        pieces: c.pieces,
        k: c.k,
        l: c.l,
        backbones: BackboneSpectrum::new(c.backbones),
        spectrum,
    };
    let (lengths, points) = project_spectra(&class.spectrum);
    say(out, format!("spectrum {}", class.spectrum))?;
    say(out, format!("lengths {}", show_counts(&lengths)))?;
    say(out, format!("points {}", show_counts(&points)))?;
    let violations = validate_class(&class);
    if violations.is_empty() {
        say(out, "valid")
    } else {
        for v in &violations {
            say(out, format!("violation {v:?}"))?;
        }
        Err(CliError::Mismatch(format!("{} identities violated", violations.len())))
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Recurse(a) => cmd_recurse(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::PdeCheck(a) => cmd_pde_check(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("chordspec: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_json_round_trip() {
        let t = oracle::count_table(&BackboneSpectrum::from_sizes(&[1, 3]), 1, Mode::NonOriented, false, CyclicPolicy::default())
            .unwrap();
        let json = table_to_json(&t);
        assert_eq!(table_from_json(&json).unwrap(), t);
        let text = serde_json::to_string(&json).unwrap();
        assert_eq!(serde_json::from_str::<TableJson>(&text).unwrap(), json);
    }

    #[test]
    fn sectors_of_a_small_range() {
        let args = RangeArgs {
            common: Common { config: None, mode: None, policy: None },
            kmax: Some(1),
            bmax: Some(2),
            vmax: Some(3),
            weight_max: Some(4),
            cache: None,
            csv: None,
        };
        let r = Range::resolve(&args).unwrap();
        let names: Vec<String> = r.sectors().iter().map(|b| b.to_string()).collect();
        assert_eq!(names.len(), 7, "{names:?}");
    }

    #[test]
    fn backbone_flag_parsing() {
        assert_eq!(parse_backbones("0,1,0,1").unwrap(), BackboneSpectrum::from_sizes(&[1, 3]));
        assert!(parse_backbones("0,x").is_err());
        assert!(parse_backbones("0").is_err());
    }
}
