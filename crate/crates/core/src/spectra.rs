//! Canonical cyclic tuples, spectra, diagram classes and count tables.
//!
//! A boundary component of a fattened partial chord diagram is described by
//! the cyclic sequence of marked-point counts met between consecutive length
//! elements (chord sides and backbone undersides). [`BoundaryClass`] stores the
//! canonical representative of that sequence under a [`CyclicPolicy`], which
//! makes it usable as a key in ordered maps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::{BigUint, Zero};
use serde::{Deserialize, Serialize};

use crate::error::SpectraError;

/// Whether chords may carry a half twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oriented,
    NonOriented,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Oriented => "oriented",
            Mode::NonOriented => "nonoriented",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oriented" => Ok(Mode::Oriented),
            "nonoriented" | "non-oriented" => Ok(Mode::NonOriented),
            other => Err(format!("unknown mode `{other}` (expected oriented|nonoriented)")),
        }
    }
}

/// Equivalence used when identifying two cyclic tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum CyclicPolicy {
    #[serde(rename = "rotation")]
    RotationOnly,
    #[default]
    #[serde(rename = "rotation-reflection")]
    RotationAndReflection,
}

impl CyclicPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            CyclicPolicy::RotationOnly => "rotation",
            CyclicPolicy::RotationAndReflection => "rotation-reflection",
        }
    }
}

impl fmt::Display for CyclicPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CyclicPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rotation" => Ok(CyclicPolicy::RotationOnly),
            "rotation-reflection" => Ok(CyclicPolicy::RotationAndReflection),
            other => Err(format!(
                "unknown policy `{other}` (expected rotation|rotation-reflection)"
            )),
        }
    }
}

/// Start offset of the lexicographically least rotation of `s`.
///
/// Two-pointer minimum-expression scan, linear in `s.len()`.
pub fn least_rotation(s: &[u32]) -> usize {
    let n = s.len();
    let (mut i, mut j, mut k) = (0usize, 1usize, 0usize);
    while i < n && j < n && k < n {
        let a = s[(i + k) % n];
        let b = s[(j + k) % n];
        if a == b {
            k += 1;
            continue;
        }
        if a > b {
            i += k + 1;
        } else {
            j += k + 1;
        }
        if i == j {
            j += 1;
        }
        k = 0;
    }
    i.min(j)
}

fn rotated(s: &[u32], offset: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(s.len());
    out.extend_from_slice(&s[offset..]);
    out.extend_from_slice(&s[..offset]);
    out
}

/// Canonical representative of a cyclic tuple of marked-point counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundaryClass {
    rep: Vec<u32>,
    policy: CyclicPolicy,
}

impl BoundaryClass {
    /// Least representative of `raw` under `policy`.
    pub fn canonicalize(raw: &[u32], policy: CyclicPolicy) -> Result<Self, SpectraError> {
        if raw.is_empty() {
            return Err(SpectraError::EmptyTuple);
        }
        let forward = rotated(raw, least_rotation(raw));
        let rep = match policy {
            CyclicPolicy::RotationOnly => forward,
            CyclicPolicy::RotationAndReflection => {
                let rev: Vec<u32> = raw.iter().rev().copied().collect();
                let backward = rotated(&rev, least_rotation(&rev));
                forward.min(backward)
            }
        };
        Ok(BoundaryClass { rep, policy })
    }

    /// The singleton class `(d)`.
    pub fn single(d: u32, policy: CyclicPolicy) -> Self {
        BoundaryClass { rep: vec![d], policy }
    }

    pub fn rep(&self) -> &[u32] {
        &self.rep
    }

    pub fn policy(&self) -> CyclicPolicy {
        self.policy
    }

    /// Number of length elements `K`.
    pub fn len(&self) -> usize {
        self.rep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep.is_empty()
    }

    /// Total number of marked points `|d|`.
    pub fn points(&self) -> u64 {
        self.rep.iter().map(|&d| d as u64).sum()
    }

    /// True when the reversed tuple lies in the same rotation orbit.
    pub fn is_reflection_symmetric(&self) -> bool {
        let rev: Vec<u32> = self.rep.iter().rev().copied().collect();
        rotated(&rev, least_rotation(&rev)) == self.rep
    }
}

impl fmt::Display for BoundaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, d) in self.rep.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str(")")
    }
}

/// Multiset of boundary classes: the boundary length and point spectrum `m`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LengthPointSpectrum {
    policy: CyclicPolicy,
    entries: BTreeMap<BoundaryClass, u32>,
}

impl LengthPointSpectrum {
    pub fn new(policy: CyclicPolicy) -> Self {
        LengthPointSpectrum { policy, entries: BTreeMap::new() }
    }

    /// Builds a spectrum from raw tuples, canonicalizing each one.
    pub fn from_tuples<I, T>(tuples: I, policy: CyclicPolicy) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = (T, u32)>,
        T: AsRef<[u32]>,
    {
        let mut out = LengthPointSpectrum::new(policy);
        for (raw, mult) in tuples {
            let class = BoundaryClass::canonicalize(raw.as_ref(), policy)?;
            out.add(&class, mult)?;
        }
        Ok(out)
    }

    pub fn policy(&self) -> CyclicPolicy {
        self.policy
    }

    pub fn get(&self, class: &BoundaryClass) -> u32 {
        self.entries.get(class).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BoundaryClass, u32)> {
        self.entries.iter().map(|(c, &m)| (c, m))
    }

    pub fn classes(&self) -> impl Iterator<Item = &BoundaryClass> {
        self.entries.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&mut self, class: &BoundaryClass, mult: u32) -> Result<(), SpectraError> {
        if class.policy != self.policy {
            return Err(SpectraError::PolicyMismatch);
        }
        if mult > 0 {
            *self.entries.entry(class.clone()).or_insert(0) += mult;
        }
        Ok(())
    }

    /// Removes `mult` copies of `class`; `false` (and no change) if fewer are present.
    pub fn remove(&mut self, class: &BoundaryClass, mult: u32) -> bool {
        if mult == 0 {
            return true;
        }
        match self.entries.get_mut(class) {
            Some(have) if *have >= mult => {
                *have -= mult;
                if *have == 0 {
                    self.entries.remove(class);
                }
                true
            }
            _ => false,
        }
    }

    /// Number of boundary components `n`.
    pub fn components(&self) -> u64 {
        self.entries.values().map(|&m| m as u64).sum()
    }

    /// `Σ K·m_d`.
    pub fn total_length(&self) -> u64 {
        self.iter().map(|(c, m)| c.len() as u64 * m as u64).sum()
    }

    /// `Σ |d|·m_d`.
    pub fn total_points(&self) -> u64 {
        self.iter().map(|(c, m)| c.points() * m as u64).sum()
    }

    /// Componentwise `self ≥ other`.
    pub fn contains(&self, other: &LengthPointSpectrum) -> bool {
        other.iter().all(|(c, m)| self.get(c) >= m)
    }

    /// Componentwise difference, `None` if `other` is not contained in `self`.
    pub fn checked_sub(&self, other: &LengthPointSpectrum) -> Option<LengthPointSpectrum> {
        let mut out = self.clone();
        for (c, m) in other.iter() {
            if !out.remove(c, m) {
                return None;
            }
        }
        Some(out)
    }

    pub fn union(&self, other: &LengthPointSpectrum) -> LengthPointSpectrum {
        let mut out = self.clone();
        for (c, m) in other.iter() {
            *out.entries.entry(c.clone()).or_insert(0) += m;
        }
        out
    }
}

impl fmt::Display for LengthPointSpectrum {
    /// Sorted `class^mult` factors separated by spaces; `1` when empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("1");
        }
        let mut factors: Vec<String> = self.iter().map(|(c, m)| format!("{c}^{m}")).collect();
        factors.sort();
        f.write_str(&factors.join(" "))
    }
}

/// Boundary length spectrum `ℓ` (length `K` → number of components).
pub type LengthSpectrum = BTreeMap<usize, u64>;
/// Boundary point spectrum `n` (marked points `i` → number of components).
pub type PointSpectrum = BTreeMap<u64, u64>;

/// Projects `m` onto the boundary length spectrum and the boundary point spectrum.
pub fn project_spectra(m: &LengthPointSpectrum) -> (LengthSpectrum, PointSpectrum) {
    let mut lengths = LengthSpectrum::new();
    let mut points = PointSpectrum::new();
    for (class, mult) in m.iter() {
        *lengths.entry(class.len()).or_insert(0) += mult as u64;
        *points.entry(class.points()).or_insert(0) += mult as u64;
    }
    (lengths, points)
}

/// Backbone spectrum `b`: `b_i` backbones carrying exactly `i` vertices.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BackboneSpectrum(Vec<u32>);

impl BackboneSpectrum {
    pub fn new(mut counts: Vec<u32>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        BackboneSpectrum(counts)
    }

    /// Spectrum of a list of backbone sizes (in any order).
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut counts = vec![0u32; sizes.iter().max().map_or(0, |&m| m + 1)];
        for &s in sizes {
            counts[s] += 1;
        }
        BackboneSpectrum::new(counts)
    }

    /// `e_i`: a single backbone with `i` vertices.
    pub fn single(i: usize) -> Self {
        Self::from_sizes(&[i])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn count(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    /// Number of backbones `b`.
    pub fn backbones(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Total number of vertices `Σ i·b_i`.
    pub fn vertices(&self) -> u64 {
        self.0.iter().enumerate().map(|(i, &c)| i as u64 * c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &BackboneSpectrum) -> BackboneSpectrum {
        let n = self.0.len().max(other.0.len());
        BackboneSpectrum::new((0..n).map(|i| self.count(i) + other.count(i)).collect())
    }

    pub fn checked_sub(&self, other: &BackboneSpectrum) -> Option<BackboneSpectrum> {
        let n = self.0.len().max(other.0.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.count(i).checked_sub(other.count(i))?);
        }
        Some(BackboneSpectrum::new(out))
    }

    /// Every `b' ≤ b` componentwise, including the empty spectrum and `b` itself.
    pub fn sub_spectra(&self) -> Vec<BackboneSpectrum> {
        let mut out = vec![Vec::new()];
        for &c in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<u32>| {
                    (0..=c).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(BackboneSpectrum::new).collect()
    }

    /// Backbone sizes in ascending order.
    pub fn sizes(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat(i).take(c as usize))
            .collect()
    }

    /// All distinct left-to-right arrangements of the backbone sizes.
    pub fn orderings(&self) -> Vec<Vec<usize>> {
        fn rec(remaining: &mut Vec<u32>, current: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<usize>>) {
            if current.len() == total {
                out.push(current.clone());
                return;
            }
            for i in 0..remaining.len() {
                if remaining[i] > 0 {
                    remaining[i] -= 1;
                    current.push(i);
                    rec(remaining, current, total, out);
                    current.pop();
                    remaining[i] += 1;
                }
            }
        }
        let mut out = Vec::new();
        let mut remaining = self.0.clone();
        rec(&mut remaining, &mut Vec::new(), self.backbones() as usize, &mut out);
        out
    }
}

impl fmt::Display for BackboneSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, c)| format!("b_{i}={c}"))
            .collect();
        if parts.is_empty() {
            f.write_str("{}")
        } else {
            write!(f, "{{{}}}", parts.join(","))
        }
    }
}

/// The full type of a diagram.
///
/// `euler_index` is the genus `g` in oriented mode and the cross-cap number
/// `h` in non-oriented mode. `pieces` is the number of connected components
/// of the diagram; for a disconnected diagram the index is summed over its
/// pieces, so the Euler relation reads `2·pieces − 2g = b − k + n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiagramClass {
    pub mode: Mode,
    pub euler_index: u32,
    pub pieces: u32,
    pub k: u32,
    pub l: u32,
    pub backbones: BackboneSpectrum,
    pub spectrum: LengthPointSpectrum,
}

/// One failed identity reported by [`validate_class`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `2·pieces − 2g ≠ b − k + n` (or `2·pieces − h ≠ …` when non-oriented).
    Euler { lhs: i64, rhs: i64 },
    /// `2k + l ≠ Σ i·b_i`.
    VertexCount { chords_and_marked: u64, vertices: u64 },
    /// `l ≠ Σ |d|·m_d`.
    MarkedPoints { l: u64, boundary_points: u64 },
    /// `2k + b ≠ Σ K·m_d`.
    BoundaryLength { expected: u64, boundary_length: u64 },
    /// A spectrum key was canonicalized under another policy.
    PolicyMismatch,
    /// A stored class is not its own canonical representative.
    NonCanonical(String),
}

/// Checks every identity relating the fields of `c`. Empty means valid.
pub fn validate_class(c: &DiagramClass) -> Vec<Violation> {
    let mut out = Vec::new();
    let b = c.backbones.backbones() as i64;
    let k = c.k as i64;
    let n = c.spectrum.components() as i64;
    let rhs = b - k + n;
    let lhs = match c.mode {
        Mode::Oriented => 2 * c.pieces as i64 - 2 * c.euler_index as i64,
        Mode::NonOriented => 2 * c.pieces as i64 - c.euler_index as i64,
    };
    if lhs != rhs {
        out.push(Violation::Euler { lhs, rhs });
    }
    let vertices = c.backbones.vertices();
    let chords_and_marked = 2 * c.k as u64 + c.l as u64;
    if chords_and_marked != vertices {
        out.push(Violation::VertexCount { chords_and_marked, vertices });
    }
    let boundary_points = c.spectrum.total_points();
    if boundary_points != c.l as u64 {
        out.push(Violation::MarkedPoints { l: c.l as u64, boundary_points });
    }
    let expected = 2 * c.k as u64 + b as u64;
    let boundary_length = c.spectrum.total_length();
    if boundary_length != expected {
        out.push(Violation::BoundaryLength { expected, boundary_length });
    }
    for class in c.spectrum.classes() {
        if class.policy() != c.spectrum.policy() {
            out.push(Violation::PolicyMismatch);
            continue;
        }
        match BoundaryClass::canonicalize(class.rep(), class.policy()) {
            Ok(canon) if &canon == class => {}
            _ => out.push(Violation::NonCanonical(class.to_string())),
        }
    }
    out
}

/// Exact counts of diagrams per class for one `(mode, policy, k, b)` sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub mode: Mode,
    pub policy: CyclicPolicy,
    pub k: u32,
    pub backbones: BackboneSpectrum,
    pub connected_only: bool,
    entries: BTreeMap<DiagramClass, BigUint>,
}

impl CountTable {
    pub fn new(
        mode: Mode,
        policy: CyclicPolicy,
        k: u32,
        backbones: BackboneSpectrum,
        connected_only: bool,
    ) -> Self {
        CountTable { mode, policy, k, backbones, connected_only, entries: BTreeMap::new() }
    }

    /// Marked points per diagram, `Σ i·b_i − 2k`; `None` when `2k` exceeds the vertex count.
    pub fn l(&self) -> Option<u32> {
        self.backbones.vertices().checked_sub(2 * self.k as u64).map(|l| l as u32)
    }

    /// Adds `count` to the entry for `class`. Zero counts are not stored.
    pub fn insert(&mut self, class: DiagramClass, count: BigUint) -> Result<(), SpectraError> {
        if class.mode != self.mode
            || class.k != self.k
            || class.backbones != self.backbones
            || class.spectrum.policy() != self.policy
        {
            return Err(SpectraError::TableMismatch(format!(
                "class {{mode={}, k={}, b={}}} does not belong to table {{mode={}, k={}, b={}}}",
                class.mode, class.k, class.backbones, self.mode, self.k, self.backbones
            )));
        }
        if count.is_zero() {
            return Ok(());
        }
        *self.entries.entry(class).or_insert_with(BigUint::zero) += count;
        Ok(())
    }

    pub fn get(&self, class: &DiagramClass) -> BigUint {
        self.entries.get(class).cloned().unwrap_or_default()
    }

    /// Count for the connected class with the given index and spectrum.
    pub fn get_spectrum(&self, euler_index: u32, spectrum: &LengthPointSpectrum) -> BigUint {
        match self.l() {
            Some(l) => self.get(&DiagramClass {
                mode: self.mode,
                euler_index,
                pieces: 1,
                k: self.k,
                l,
                backbones: self.backbones.clone(),
                spectrum: spectrum.clone(),
            }),
            None => BigUint::zero(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DiagramClass, &BigUint)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> BigUint {
        self.entries.values().sum()
    }

    /// Merges `other` into `self` by count addition.
    pub fn merge(&mut self, other: CountTable) -> Result<(), SpectraError> {
        for (class, count) in other.entries {
            self.insert(class, count)?;
        }
        Ok(())
    }

    /// Mutable access to a stored count, for fault injection in tests and tools.
    pub fn count_mut(&mut self, class: &DiagramClass) -> Option<&mut BigUint> {
        self.entries.get_mut(class)
    }
}

/// Selection for [`aggregate_n`]. `None` fields are summed over.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpectrumQuery {
    pub euler_index: Option<u32>,
    pub lengths: Option<LengthSpectrum>,
    pub points: Option<PointSpectrum>,
}

/// Sums the counts of all entries whose projected spectra match `query`.
///
/// With both projections fixed this is `N_{g,k,l}(b, ℓ, n)`; leaving one of
/// them open gives the marginals `N_{g,k,l}(b, n)` and `N_{g,k,b}(ℓ)`.
pub fn aggregate_n(table: &CountTable, query: &SpectrumQuery) -> BigUint {
    table
        .entries()
        .filter(|(class, _)| query.euler_index.map_or(true, |e| e == class.euler_index))
        .filter(|(class, _)| {
            if query.lengths.is_none() && query.points.is_none() {
                return true;
            }
            let (lengths, points) = project_spectra(&class.spectrum);
            query.lengths.as_ref().map_or(true, |q| *q == lengths)
                && query.points.as_ref().map_or(true, |q| *q == points)
        })
        .map(|(_, count)| count)
        .sum()
}
