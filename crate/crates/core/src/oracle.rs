//! Brute-force enumeration of labeled partial chord diagrams.
//!
//! For a backbone spectrum `b` every distinct left-to-right arrangement of the
//! backbone sizes is visited; within an arrangement every choice of `2k`
//! chord-end vertices, every perfect matching of them and (non-oriented) every
//! twist assignment yields one diagram.

use itertools::Itertools;
use num::BigUint;
use rayon::prelude::*;

use crate::error::OracleError;
use crate::spectra::{BackboneSpectrum, CountTable, CyclicPolicy, Mode};
use crate::tracer::{classify, Diagram, VertexRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub connected_only: bool,
    pub policy: CyclicPolicy,
    /// Non-oriented mode only: skip every twist assignment except all-untwisted.
    pub untwisted_only: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { connected_only: true, policy: CyclicPolicy::default(), untwisted_only: false }
    }
}

/// One independent slice of the search: an arrangement, a chord-end subset and
/// the partner of the least chord end.
#[derive(Debug, Clone)]
struct WorkUnit {
    sizes: Vec<usize>,
    ends: Vec<usize>,
    first_partner: usize,
}

fn vertex_refs(sizes: &[usize]) -> Vec<VertexRef> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| (0..n).map(move |i| VertexRef::new(j, i)))
        .collect()
}

fn check_size(b: &BackboneSpectrum, k: u32) -> Result<(), OracleError> {
    let vertices = b.vertices();
    if 2 * k as u64 > vertices {
        return Err(OracleError::TooManyChords { chords: k, vertices });
    }
    Ok(())
}

fn work_units(b: &BackboneSpectrum, k: u32) -> Vec<WorkUnit> {
    let v = b.vertices() as usize;
    let mut out = Vec::new();
    for sizes in b.orderings() {
        for ends in (0..v).combinations(2 * k as usize) {
            if ends.is_empty() {
                out.push(WorkUnit { sizes: sizes.clone(), ends, first_partner: 0 });
                continue;
            }
            for first_partner in 1..ends.len() {
                out.push(WorkUnit { sizes: sizes.clone(), ends: ends.clone(), first_partner });
            }
        }
    }
    out
}

/// Calls `f` with every perfect matching of `free` (as index pairs into the
/// vertex list), pairing the least unmatched element first.
fn matchings(free: &mut Vec<usize>, current: &mut Vec<(usize, usize)>, f: &mut dyn FnMut(&[(usize, usize)])) {
    if free.is_empty() {
        f(current);
        return;
    }
    let first = free.remove(0);
    for idx in 0..free.len() {
        let partner = free.remove(idx);
        current.push((first, partner));
        matchings(free, current, f);
        current.pop();
        free.insert(idx, partner);
    }
    free.insert(0, first);
}

fn for_each_in_unit(unit: &WorkUnit, mode: Mode, untwisted_only: bool, f: &mut dyn FnMut(Diagram)) {
    let refs = vertex_refs(&unit.sizes);
    let mut emit = |pairs: &[(usize, usize)]| {
        let twist_masks: u64 = match mode {
            Mode::NonOriented if !untwisted_only => 1 << pairs.len(),
            _ => 1,
        };
        for mask in 0..twist_masks {
            let chords: Vec<_> = pairs
                .iter()
                .enumerate()
                .map(|(c, &(a, b))| (refs[a], refs[b], mask >> c & 1 == 1))
                .collect();
            let d = Diagram::from_pairs(mode, &unit.sizes, &chords)
                .expect("enumerated chords are incident to distinct free vertices");
            f(d);
        }
    };
    if unit.ends.is_empty() {
        emit(&[]);
        return;
    }
    let first = unit.ends[0];
    let partner = unit.ends[unit.first_partner];
    let mut rest: Vec<usize> = unit.ends.iter().copied().filter(|&e| e != first && e != partner).collect();
    let mut current = vec![(first, partner)];
    matchings(&mut rest, &mut current, &mut emit);
}

/// Visits every labeled diagram with backbone spectrum `b` and `k` chords.
pub fn for_each_diagram(
    b: &BackboneSpectrum,
    k: u32,
    mode: Mode,
    mut f: impl FnMut(Diagram),
) -> Result<(), OracleError> {
    check_size(b, k)?;
    for unit in work_units(b, k) {
        for_each_in_unit(&unit, mode, false, &mut f);
    }
    Ok(())
}

/// All labeled diagrams with backbone spectrum `b` and `k` chords.
pub fn enumerate(b: &BackboneSpectrum, k: u32, mode: Mode) -> Result<Vec<Diagram>, OracleError> {
    let mut out = Vec::new();
    for_each_diagram(b, k, mode, |d| out.push(d))?;
    Ok(out)
}

/// Number of diagrams [`enumerate`] yields, in closed form.
pub fn expected_yield(b: &BackboneSpectrum, k: u32, mode: Mode) -> BigUint {
    let v = b.vertices();
    let arrangements = b.orderings().len() as u64;
    let choose: BigUint = (0..2 * k as u64).map(|i| BigUint::from(v - i)).product::<BigUint>()
        / (1..=2 * k as u64).map(BigUint::from).product::<BigUint>();
    let double_factorial: BigUint = (1..=k as u64).map(|i| BigUint::from(2 * i - 1)).product();
    let twists = match mode {
        Mode::Oriented => BigUint::from(1u32),
        Mode::NonOriented => BigUint::from(2u32).pow(k),
    };
    BigUint::from(arrangements) * choose * double_factorial * twists
}

/// True iff the chords joining distinct backbones connect all backbones.
pub fn is_connected(d: &Diagram) -> bool {
    !d.backbones.is_empty() && d.piece_count() == 1
}

/// Exact counts per diagram class for one sector.
pub fn count_table(
    b: &BackboneSpectrum,
    k: u32,
    mode: Mode,
    connected_only: bool,
    policy: CyclicPolicy,
) -> Result<CountTable, OracleError> {
    count_table_with(b, k, mode, &OracleOptions { connected_only, policy, untwisted_only: false })
}

/// [`count_table`] with the full option set. Work is split by first matched
/// pair and merged by count addition, so the result does not depend on the
/// number of worker threads.
pub fn count_table_with(
    b: &BackboneSpectrum,
    k: u32,
    mode: Mode,
    opts: &OracleOptions,
) -> Result<CountTable, OracleError> {
    check_size(b, k)?;
    let empty = || CountTable::new(mode, opts.policy, k, b.clone(), opts.connected_only);
    work_units(b, k)
        .par_iter()
        .map(|unit| {
            let mut table = empty();
            let mut failure = None;
            for_each_in_unit(unit, mode, opts.untwisted_only, &mut |d| {
                if failure.is_some() || (opts.connected_only && !is_connected(&d)) {
                    return;
                }
                let step = classify(&d, opts.policy)
                    .map_err(OracleError::from)
                    .and_then(|class| Ok(table.insert(class, BigUint::from(1u32))?));
                if let Err(e) = step {
                    failure = Some(e);
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(table),
            }
        })
        .try_reduce(empty, |mut acc, t| {
            acc.merge(t)?;
            Ok(acc)
        })
}
