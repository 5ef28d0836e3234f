//! Chord insertion operators, the y-steppers built from them, and a direct
//! term-by-term evaluation of the cut-and-join recursion on count tables.
//!
//! Tuple constructors come in two flavours: the public `build_*` functions
//! take 1-based positions and return a [`SignedIndexVector`]; the crate-level
//! `raw_*` functions take 0-based positions and return bare tuples.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num::{BigInt, BigRational, BigUint, One, Zero};
use rayon::prelude::*;

use crate::error::CutJoinError;
use crate::series::{factorial, par_expand, Monomial, Series, Truncation};
use crate::spectra::{BackboneSpectrum, BoundaryClass, CountTable, CyclicPolicy, DiagramClass, LengthPointSpectrum, Mode};

/// `p = p⁺ − p⁻` over boundary classes; `pos` and `neg` never share a key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignedIndexVector {
    pos: BTreeMap<BoundaryClass, u32>,
    neg: BTreeMap<BoundaryClass, u32>,
}

impl SignedIndexVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `n·e_d` (negative `n` subtracts), cancelling against the other side.
    pub fn add(&mut self, d: &BoundaryClass, n: i64) {
        let mut net = n + *self.pos.get(d).unwrap_or(&0) as i64 - *self.neg.get(d).unwrap_or(&0) as i64;
        self.pos.remove(d);
        self.neg.remove(d);
        if net > 0 {
            self.pos.insert(d.clone(), net as u32);
        } else if net < 0 {
            net = -net;
            self.neg.insert(d.clone(), net as u32);
        }
    }

    pub fn pos(&self) -> &BTreeMap<BoundaryClass, u32> {
        &self.pos
    }

    pub fn neg(&self) -> &BTreeMap<BoundaryClass, u32> {
        &self.neg
    }

    pub fn is_zero(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    fn from_parts(plus: &[&BoundaryClass], minus: &[&BoundaryClass]) -> Self {
        let mut p = SignedIndexVector::new();
        for d in plus {
            p.add(d, 1);
        }
        for d in minus {
            p.add(d, -1);
        }
        p
    }
}

fn falling(n: u32, k: u32) -> u64 {
    (0..k).map(|i| n.saturating_sub(i) as u64).product()
}

/// `D_p` on one monomial: coefficient factor and image, or `None` if it vanishes.
fn apply_d_monomial(p: &SignedIndexVector, m: &Monomial) -> Option<(u64, Monomial)> {
    let mut out = m.clone();
    let mut factor = 1u64;
    for (d, &e) in &p.pos {
        let have = m.u_exp(d);
        if have < e {
            return None;
        }
        factor *= falling(have, e);
        out.remove_u(d, e);
    }
    for (d, &e) in &p.neg {
        out.add_u(d, e);
    }
    Some((factor, out))
}

/// `D_p = Π u^{p⁻} Π ∂^{p⁺}` applied to a series.
pub fn apply_d(p: &SignedIndexVector, s: &Series) -> Series {
    let terms = par_expand(s.terms(), |m, c, emit| {
        if let Some((factor, image)) = apply_d_monomial(p, m) {
            emit(image, c * BigRational::from_integer(BigInt::from(factor)));
        }
    });
    Series::from_terms(s.policy(), s.truncation(), terms)
}

fn minus(a: u32, b: u32, what: &str) -> Result<u32, CutJoinError> {
    a.checked_sub(b).ok_or_else(|| CutJoinError::NegativeEntry(format!("{what}: {a} - {b}")))
}

/// Split of `d` by a chord with ends in clusters `i < j` (0-based).
pub(crate) fn raw_s(d: &[u32], i: usize, j: usize, l: u32, m: u32) -> Result<(Vec<u32>, Vec<u32>), CutJoinError> {
    let mut a = d[..i].to_vec();
    a.push(minus(d[i], l + 1, "d_I-l-1")?);
    a.push(m);
    a.extend_from_slice(&d[j + 1..]);
    let mut b = vec![l];
    b.extend_from_slice(&d[i + 1..j]);
    b.push(minus(d[j], m + 1, "d_J-m-1")?);
    Ok((a, b))
}

/// Split of `d` by a chord with both ends in cluster `i`.
pub(crate) fn raw_s_diag(d: &[u32], i: usize, l: u32, m: u32) -> Result<(Vec<u32>, Vec<u32>), CutJoinError> {
    let inner = minus(d[i], l + m + 2, "d_I-l-m-2")?;
    let mut a = d[..i].to_vec();
    a.extend([l, m]);
    a.extend_from_slice(&d[i + 1..]);
    Ok((a, vec![inner]))
}

/// Twisted chord with ends in clusters `i < j`: one component, middle reversed.
pub(crate) fn raw_s_x(d: &[u32], i: usize, j: usize, l: u32, m: u32) -> Result<Vec<u32>, CutJoinError> {
    let mut a = d[..i].to_vec();
    a.extend([l, m]);
    a.extend(d[i + 1..j].iter().rev());
    a.push(minus(d[i], l + 1, "d_I-l-1")?);
    a.push(minus(d[j], m + 1, "d_J-m-1")?);
    a.extend_from_slice(&d[j + 1..]);
    Ok(a)
}

/// Twisted chord with both ends in cluster `i`.
pub(crate) fn raw_s_diag_x(d: &[u32], i: usize, l: u32, m: u32) -> Result<Vec<u32>, CutJoinError> {
    let inner = minus(d[i], l + m + 2, "d_I-l-m-2")?;
    let mut a = d[..i].to_vec();
    a.extend([l, inner, m]);
    a.extend_from_slice(&d[i + 1..]);
    Ok(a)
}

/// Join of `d` (cluster `i`) and `f` (cluster `j`) by an untwisted chord.
pub(crate) fn raw_c(d: &[u32], f: &[u32], i: usize, j: usize, l: u32, m: u32) -> Result<Vec<u32>, CutJoinError> {
    let mut c = d[..i].to_vec();
    c.push(minus(d[i], l + 1, "d_I-l-1")?);
    c.push(m);
    c.extend_from_slice(&f[j + 1..]);
    c.extend_from_slice(&f[..j]);
    c.push(minus(f[j], m + 1, "f_J-m-1")?);
    c.push(l);
    c.extend_from_slice(&d[i + 1..]);
    Ok(c)
}

/// Join by a twisted chord: `d` is traversed backwards.
pub(crate) fn raw_c_x(d: &[u32], f: &[u32], i: usize, j: usize, l: u32, m: u32) -> Result<Vec<u32>, CutJoinError> {
    let mut c = f[..j].to_vec();
    c.push(minus(f[j], m + 1, "f_J-m-1")?);
    c.push(l);
    c.extend(d[..i].iter().rev());
    c.extend(d[i + 1..].iter().rev());
    c.push(minus(d[i], l + 1, "d_I-l-1")?);
    c.push(m);
    c.extend_from_slice(&f[j + 1..]);
    Ok(c)
}

fn position(d: &BoundaryClass, pos: usize, name: &str) -> Result<usize, CutJoinError> {
    if pos == 0 || pos > d.len() {
        return Err(CutJoinError::IndexOutOfRange(format!("{name}={pos} for {d}")));
    }
    Ok(pos - 1)
}

fn canon(raw: &[u32], policy: CyclicPolicy) -> Result<BoundaryClass, CutJoinError> {
    Ok(BoundaryClass::canonicalize(raw, policy)?)
}

/// `s_{I,J,ℓ,m}(d)` for `1 ≤ I < J ≤ K`.
pub fn build_s(d: &BoundaryClass, i: usize, j: usize, l: u32, m: u32) -> Result<SignedIndexVector, CutJoinError> {
    let (i, j) = (position(d, i, "I")?, position(d, j, "J")?);
    if i >= j {
        return Err(CutJoinError::IndexOutOfRange(format!("I={} must be below J={}", i + 1, j + 1)));
    }
    let (a, b) = raw_s(d.rep(), i, j, l, m)?;
    let (a, b) = (canon(&a, d.policy())?, canon(&b, d.policy())?);
    Ok(SignedIndexVector::from_parts(&[d], &[&a, &b]))
}

/// `s_{I,ℓ,m}(d)`; requires `ℓ + m ≤ d_I − 2`.
pub fn build_s_diag(d: &BoundaryClass, i: usize, l: u32, m: u32) -> Result<SignedIndexVector, CutJoinError> {
    let i = position(d, i, "I")?;
    let (a, b) = raw_s_diag(d.rep(), i, l, m)?;
    let (a, b) = (canon(&a, d.policy())?, canon(&b, d.policy())?);
    Ok(SignedIndexVector::from_parts(&[d], &[&a, &b]))
}

/// `q_{I,J,ℓ,m}(d, f) = e_d + e_f − e_c`.
pub fn build_q(
    d: &BoundaryClass,
    f: &BoundaryClass,
    i: usize,
    j: usize,
    l: u32,
    m: u32,
) -> Result<SignedIndexVector, CutJoinError> {
    let (i, j) = (position(d, i, "I")?, position(f, j, "J")?);
    let c = canon(&raw_c(d.rep(), f.rep(), i, j, l, m)?, d.policy())?;
    Ok(SignedIndexVector::from_parts(&[d, f], &[&c]))
}

/// `s^×_{I,J,ℓ,m}(d)` for `1 ≤ I < J ≤ K`.
pub fn build_s_x(d: &BoundaryClass, i: usize, j: usize, l: u32, m: u32) -> Result<SignedIndexVector, CutJoinError> {
    let (i, j) = (position(d, i, "I")?, position(d, j, "J")?);
    if i >= j {
        return Err(CutJoinError::IndexOutOfRange(format!("I={} must be below J={}", i + 1, j + 1)));
    }
    let a = canon(&raw_s_x(d.rep(), i, j, l, m)?, d.policy())?;
    Ok(SignedIndexVector::from_parts(&[d], &[&a]))
}

/// `s^×_{I,ℓ,m}(d)`; requires `ℓ + m ≤ d_I − 2`.
pub fn build_s_diag_x(d: &BoundaryClass, i: usize, l: u32, m: u32) -> Result<SignedIndexVector, CutJoinError> {
    let i = position(d, i, "I")?;
    let a = canon(&raw_s_diag_x(d.rep(), i, l, m)?, d.policy())?;
    Ok(SignedIndexVector::from_parts(&[d], &[&a]))
}

/// `q^×_{I,J,ℓ,m}(d, f)`.
pub fn build_q_x(
    d: &BoundaryClass,
    f: &BoundaryClass,
    i: usize,
    j: usize,
    l: u32,
    m: u32,
) -> Result<SignedIndexVector, CutJoinError> {
    let (i, j) = (position(d, i, "I")?, position(f, j, "J")?);
    let c = canon(&raw_c_x(d.rep(), f.rep(), i, j, l, m)?, d.policy())?;
    Ok(SignedIndexVector::from_parts(&[d, f], &[&c]))
}

/// The classes a chord can turn one class (or a pair) into, with multiplicities.
type Images = Arc<Vec<(Vec<BoundaryClass>, u32)>>;

fn tally(raw: impl IntoIterator<Item = Vec<BoundaryClass>>) -> Images {
    let mut counts: BTreeMap<Vec<BoundaryClass>, u32> = BTreeMap::new();
    for mut outs in raw {
        outs.sort();
        *counts.entry(outs).or_default() += 1;
    }
    Arc::new(counts.into_iter().collect())
}

/// Every in-range position tuple `(i, j, ℓ, m)` with `i < j`.
fn off_diagonal(d: &[u32]) -> impl Iterator<Item = (usize, usize, u32, u32)> + '_ {
    (0..d.len()).flat_map(move |i| {
        (i + 1..d.len()).flat_map(move |j| (0..d[i]).flat_map(move |l| (0..d[j]).map(move |m| (i, j, l, m))))
    })
}

/// Every `(i, ℓ, m)` with `ℓ + m ≤ d_i − 2`.
fn diagonal(d: &[u32]) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
    (0..d.len()).flat_map(move |i| {
        let top = d[i].saturating_sub(1);
        (0..top).flat_map(move |l| (0..top - l).map(move |m| (i, l, m)))
    })
}

fn split_images(d: &BoundaryClass) -> Vec<Vec<BoundaryClass>> {
    let (rep, p) = (d.rep(), d.policy());
    let mut out = Vec::new();
    for (i, j, l, m) in off_diagonal(rep) {
        let (a, b) = raw_s(rep, i, j, l, m).expect("range-filtered");
        out.push(vec![canon(&a, p).unwrap(), canon(&b, p).unwrap()]);
    }
    for (i, l, m) in diagonal(rep) {
        let (a, b) = raw_s_diag(rep, i, l, m).expect("range-filtered");
        out.push(vec![canon(&a, p).unwrap(), canon(&b, p).unwrap()]);
    }
    out
}

fn twist_images(d: &BoundaryClass) -> Vec<Vec<BoundaryClass>> {
    let (rep, p) = (d.rep(), d.policy());
    let mut out = Vec::new();
    for (i, j, l, m) in off_diagonal(rep) {
        out.push(vec![canon(&raw_s_x(rep, i, j, l, m).expect("range-filtered"), p).unwrap()]);
    }
    for (i, l, m) in diagonal(rep) {
        out.push(vec![canon(&raw_s_diag_x(rep, i, l, m).expect("range-filtered"), p).unwrap()]);
    }
    out
}

fn join_images(d: &BoundaryClass, f: &BoundaryClass, twisted: bool) -> Vec<Vec<BoundaryClass>> {
    let (dr, fr, p) = (d.rep(), f.rep(), d.policy());
    let mut out = Vec::new();
    for i in 0..dr.len() {
        for j in 0..fr.len() {
            for l in 0..dr[i] {
                for m in 0..fr[j] {
                    let raw = if twisted { raw_c_x(dr, fr, i, j, l, m) } else { raw_c(dr, fr, i, j, l, m) };
                    out.push(vec![canon(&raw.expect("range-filtered"), p).unwrap()]);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ImageKey {
    Split(BoundaryClass),
    Twist(BoundaryClass),
    Join(BoundaryClass, BoundaryClass),
    JoinTwisted(BoundaryClass, BoundaryClass),
}

fn images(key: ImageKey) -> Images {
    static MEMO: OnceLock<RwLock<HashMap<ImageKey, Images>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if let Some(hit) = memo.read().unwrap().get(&key) {
        return hit.clone();
    }
    let computed = match &key {
        ImageKey::Split(d) => tally(split_images(d)),
        ImageKey::Twist(d) => tally(twist_images(d)),
        ImageKey::Join(d, f) => tally(join_images(d, f, false)),
        ImageKey::JoinTwisted(d, f) => tally(join_images(d, f, true)),
    };
    memo.write().unwrap().insert(key, computed.clone());
    computed
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

/// Shared body of the first-order operators: `Σ_d ∂_d` followed by each image.
fn apply_first_order(s: &Series, twisted: bool) -> Series {
    let terms = par_expand(s.terms(), |mono, coef, emit| {
        for (d, e) in mono.u_pows() {
            let mut base = mono.clone();
            base.remove_u(d, 1);
            let key = if twisted { ImageKey::Twist(d.clone()) } else { ImageKey::Split(d.clone()) };
            for (outs, n) in images(key).iter() {
                let mut image = base.clone();
                for c in outs {
                    image.add_u(c, 1);
                }
                emit(image, coef * rat(*e as u64 * *n as u64));
            }
        }
    });
    Series::from_terms(s.policy(), s.truncation(), terms)
}

/// Shared body of the second-order operators: `½ Σ_{d,f} ∂_d ∂_f` then the join.
fn apply_second_order(s: &Series, twisted: bool) -> Series {
    let terms = par_expand(s.terms(), |mono, coef, emit| {
        let us = mono.u_pows();
        for (a, (d, ed)) in us.iter().enumerate() {
            for (b, (f, ef)) in us.iter().enumerate() {
                let weight = if a == b { falling(*ed, 2) } else { *ed as u64 * *ef as u64 };
                if weight == 0 {
                    continue;
                }
                let mut base = mono.clone();
                base.remove_u(d, 1);
                base.remove_u(f, 1);
                let key = if twisted {
                    ImageKey::JoinTwisted(d.clone(), f.clone())
                } else {
                    ImageKey::Join(d.clone(), f.clone())
                };
                for (outs, n) in images(key).iter() {
                    let mut image = base.clone();
                    image.add_u(&outs[0], 1);
                    emit(image, coef * rat(weight * *n as u64) * half());
                }
            }
        }
    });
    Series::from_terms(s.policy(), s.truncation(), terms)
}

/// `M₀`: an untwisted chord with both ends on one boundary component.
pub fn apply_m0(s: &Series) -> Series {
    apply_first_order(s, false)
}

/// `M₁^×`: a twisted chord with both ends on one boundary component (no `x`).
pub fn apply_m1x(s: &Series) -> Series {
    apply_first_order(s, true)
}

/// `M₂`: an untwisted chord joining two components of one diagram (no `x²`).
pub fn apply_m2(s: &Series) -> Series {
    apply_second_order(s, false)
}

/// `M₂^×`: the twisted counterpart of [`apply_m2`].
pub fn apply_m2x(s: &Series) -> Series {
    apply_second_order(s, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Plain,
    Cross,
}

/// `½ Σ_{d,f} u_c ∂_d A ∂_f B`, with `c` from the plain or twisted join.
pub fn apply_s_bilinear(a: &Series, b: &Series, variant: Variant) -> Result<Series, CutJoinError> {
    if a.policy() != b.policy() {
        return Err(crate::error::SeriesError::PolicyMismatch.into());
    }
    if a.truncation() != b.truncation() {
        return Err(crate::error::SeriesError::TruncationMismatch.into());
    }
    let trunc = a.truncation();
    let terms = par_expand(a.terms(), |m1, c1, emit| {
        for (m2, c2) in b.terms() {
            let product = m1.mul(m2);
            if !trunc.admits(&product) {
                continue;
            }
            let coef = c1 * c2 * half();
            for (d, ed) in m1.u_pows() {
                for (f, ef) in m2.u_pows() {
                    let mut base = product.clone();
                    base.remove_u(d, 1);
                    base.remove_u(f, 1);
                    let key = match variant {
                        Variant::Plain => ImageKey::Join(d.clone(), f.clone()),
                        Variant::Cross => ImageKey::JoinTwisted(d.clone(), f.clone()),
                    };
                    for (outs, n) in images(key).iter() {
                        let mut image = base.clone();
                        image.add_u(&outs[0], 1);
                        emit(image, &coef * rat(*ed as u64 * *ef as u64 * *n as u64));
                    }
                }
            }
        }
    });
    Ok(Series::from_terms(a.policy(), trunc, terms))
}

/// `Σ_i t_i u_(i)`: one bare backbone of each admitted size.
pub fn initial_h(policy: CyclicPolicy, trunc: Truncation) -> Series {
    let terms = (1..=trunc.v_max).map(|i| (Monomial::new(0, 0, [(i, 1)], [(BoundaryClass::single(i, policy), 1)]), BigRational::one()));
    Series::from_terms(policy, trunc, terms)
}

/// `M` of the given mode, including its powers of `x`.
pub fn apply_m(s: &Series, mode: Mode) -> Result<Series, CutJoinError> {
    let mut out = apply_m0(s).add(&apply_m2(s).shift(2, 0))?;
    if mode == Mode::NonOriented {
        out = out.add(&apply_m1x(s).shift(1, 0))?.add(&apply_m2x(s).shift(2, 0))?;
    }
    Ok(out)
}

/// `H_k` from `H_0 … H_{k−1}` (each homogeneous in `y`).
pub fn step_connected(parts: &[Series], mode: Mode) -> Result<Series, CutJoinError> {
    let k = parts.len();
    let last = parts.last().ok_or_else(|| CutJoinError::IndexOutOfRange("no initial data".into()))?;
    let mut rhs = apply_m(last, mode)?;
    for a in 0..k {
        let (left, right) = (&parts[a], &parts[k - 1 - a]);
        rhs = rhs.add(&apply_s_bilinear(left, right, Variant::Plain)?)?;
        if mode == Mode::NonOriented {
            rhs = rhs.add(&apply_s_bilinear(left, right, Variant::Cross)?)?;
        }
    }
    Ok(rhs.shift(0, 1).scale(&BigRational::new(BigInt::one(), BigInt::from(k))))
}

/// `Z_k = M Z_{k−1} / k`.
pub fn step_full(prev: &Series, k: u32, mode: Mode) -> Result<Series, CutJoinError> {
    Ok(apply_m(prev, mode)?.shift(0, 1).scale(&BigRational::new(BigInt::one(), BigInt::from(k))))
}

/// Restricts a series to the backbone sectors contained in `b`.
pub fn restrict_to_sector(s: &Series, b: &BackboneSpectrum) -> Series {
    s.filter(|m| b.checked_sub(&m.backbones()).is_some())
}

/// `[H_0, …, H_{k_max}]` with optional restriction to the sub-sectors of `sector`.
pub fn solve_connected(
    mode: Mode,
    policy: CyclicPolicy,
    trunc: Truncation,
    sector: Option<&BackboneSpectrum>,
) -> Result<Vec<Series>, CutJoinError> {
    let restrict = |s: Series| match sector {
        Some(b) => restrict_to_sector(&s, b),
        None => s,
    };
    let mut parts = vec![restrict(initial_h(policy, trunc))];
    for _ in 1..=trunc.k_max {
        let next = restrict(step_connected(&parts, mode)?);
        parts.push(next);
    }
    Ok(parts)
}

/// `[Z_0, …, Z_{k_max}]` from `Z_0 = exp(H_0)`.
pub fn solve_full(mode: Mode, policy: CyclicPolicy, trunc: Truncation) -> Result<Vec<Series>, CutJoinError> {
    let mut parts = vec![initial_h(policy, trunc).exp()?];
    for k in 1..=trunc.k_max {
        let next = step_full(parts.last().unwrap(), k, mode)?;
        parts.push(next);
    }
    Ok(parts)
}

/// `x^{-2} H(x, y, x² t, u)`: each connected term gains `x^{2(b−1)}`. The
/// linear full-diagram equation weights every join of two components by `x²`,
/// including joins of different pieces, so its solution is the exponential of
/// this regraded series rather than of `H` itself.
pub fn regrade_for_full(h: &Series) -> Series {
    let terms = h.terms().iter().map(|(m, c)| {
        let b = m.t_degree() as u32;
        let x = m.x_pow() + 2 * b.saturating_sub(1);
        (m.clone().with_x(x), c.clone())
    });
    Series::from_terms(h.policy(), h.truncation(), terms)
}

/// Sum of y-homogeneous parts.
pub fn sum_parts(parts: &[Series]) -> Result<Series, CutJoinError> {
    let mut iter = parts.iter();
    let first = iter.next().ok_or_else(|| CutJoinError::IndexOutOfRange("no parts".into()))?.clone();
    iter.try_fold(first, |acc, p| Ok(acc.add(p)?))
}

/// Connected count tables keyed by sector and chord count.
#[derive(Debug, Clone)]
pub struct TableSet {
    pub mode: Mode,
    pub policy: CyclicPolicy,
    tables: BTreeMap<(BackboneSpectrum, u32), CountTable>,
}

impl TableSet {
    pub fn new(mode: Mode, policy: CyclicPolicy) -> Self {
        TableSet { mode, policy, tables: BTreeMap::new() }
    }

    pub fn insert(&mut self, table: CountTable) -> Result<(), CutJoinError> {
        if table.mode != self.mode || table.policy != self.policy || !table.connected_only {
            return Err(CutJoinError::Spectra(crate::error::SpectraError::TableMismatch(format!(
                "table for b={} k={} does not fit this set",
                table.backbones, table.k
            ))));
        }
        self.tables.insert((table.backbones.clone(), table.k), table);
        Ok(())
    }

    /// `Ok(None)` for sectors that cannot hold `k` chords.
    pub fn get(&self, b: &BackboneSpectrum, k: u32) -> Result<Option<&CountTable>, CutJoinError> {
        if 2 * k as u64 > b.vertices() {
            return Ok(None);
        }
        match self.tables.get(&(b.clone(), k)) {
            Some(t) => Ok(Some(t)),
            None => Err(CutJoinError::MissingTable { backbones: b.to_string(), k }),
        }
    }

    pub fn tables(&self) -> impl Iterator<Item = &CountTable> {
        self.tables.values()
    }

    pub fn get_mut(&mut self, b: &BackboneSpectrum, k: u32) -> Option<&mut CountTable> {
        self.tables.get_mut(&(b.clone(), k))
    }
}

/// How the same-class case of the genus-raising term is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaConvention {
    /// `(m_d+1)(m_f+1+δ)`: ordered pairs of distinct components in the source.
    #[default]
    Corrected,
    /// `(m_d+1)(m_f+1−δ)`, exactly as the recursion is usually printed.
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub class: DiagramClass,
    /// `k · M(class)` from the table.
    pub lhs: BigRational,
    /// The right-hand side of the recursion.
    pub rhs: BigRational,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "b={} k={} euler={} m={}: k*M={} but recursion gives {}",
            self.class.backbones, self.class.k, self.class.euler_index, self.class.spectrum, self.lhs, self.rhs
        )
    }
}

fn big(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

/// Right-hand side of the cut-and-join recursion for sector `(b, k)`, from the
/// `k−1` table of `b` and the tables of every split of `b`.
pub fn recursion_rhs(
    tables: &TableSet,
    b: &BackboneSpectrum,
    k: u32,
    convention: DeltaConvention,
) -> Result<BTreeMap<DiagramClass, BigRational>, CutJoinError> {
    let mode = tables.mode;
    let v = b.vertices();
    if k == 0 || 2 * k as u64 > v {
        return Ok(BTreeMap::new());
    }
    let l = (v - 2 * k as u64) as u32;
    let target = |euler: u32, spectrum: LengthPointSpectrum| DiagramClass {
        mode,
        euler_index: euler,
        pieces: 1,
        k,
        l,
        backbones: b.clone(),
        spectrum,
    };
    let (twist_step, join_step) = match mode {
        Mode::Oriented => (0, 1),
        Mode::NonOriented => (1, 2),
    };
    let mut rhs: BTreeMap<DiagramClass, BigRational> = BTreeMap::new();
    let mut add = |class: DiagramClass, w: BigRational| {
        let slot = rhs.entry(class).or_insert_with(BigRational::zero);
        *slot += w;
    };
    let rebuild = |source: &LengthPointSpectrum, removed: &[&BoundaryClass], added: &[BoundaryClass]| {
        let mut m = source.clone();
        for d in removed {
            assert!(m.remove(d, 1), "removed class must be present");
        }
        for c in added {
            m.add(c, 1).expect("single policy");
        }
        m
    };

    if let Some(prev) = tables.get(b, k - 1)? {
        for (src, count) in prev.entries() {
            let count = big(count);
            for d in src.spectrum.classes() {
                // One boundary component cut by the new chord.
                for (outs, n) in images(ImageKey::Split(d.clone())).iter() {
                    let m = rebuild(&src.spectrum, &[d], outs);
                    let weight = rat(m.get(d) as u64 + 1) * rat(*n as u64);
                    add(target(src.euler_index, m), weight * &count);
                }
                if mode == Mode::NonOriented {
                    for (outs, n) in images(ImageKey::Twist(d.clone())).iter() {
                        let m = rebuild(&src.spectrum, &[d], outs);
                        let weight = rat(m.get(d) as u64 + 1) * rat(*n as u64);
                        add(target(src.euler_index + twist_step, m), weight * &count);
                    }
                }
            }
            // Two components of the same diagram joined.
            for d in src.spectrum.classes() {
                for f in src.spectrum.classes() {
                    if d == f && src.spectrum.get(d) < 2 {
                        continue;
                    }
                    let keys = match mode {
                        Mode::Oriented => vec![ImageKey::Join(d.clone(), f.clone())],
                        Mode::NonOriented => {
                            vec![ImageKey::Join(d.clone(), f.clone()), ImageKey::JoinTwisted(d.clone(), f.clone())]
                        }
                    };
                    for key in keys {
                        for (outs, n) in images(key).iter() {
                            let m = rebuild(&src.spectrum, &[d, f], outs);
                            let delta = (d == f) as u64;
                            let second = match convention {
                                DeltaConvention::Corrected => m.get(f) as u64 + 1 + delta,
                                DeltaConvention::AsPrinted => m.get(f) as u64 + 1 - delta,
                            };
                            let weight = rat((m.get(d) as u64 + 1) * second * *n as u64) * half();
                            add(target(src.euler_index + join_step, m), weight * &count);
                        }
                    }
                }
            }
        }
    }

    // Two diagrams joined into one.
    let b_fact = big(&factorial(b.backbones() as u64));
    for b1 in b.sub_spectra() {
        let b2 = b.checked_sub(&b1).expect("sub-spectrum");
        if b1.is_empty() || b2.is_empty() {
            continue;
        }
        let multinomial = &b_fact / (big(&factorial(b1.backbones() as u64)) * big(&factorial(b2.backbones() as u64)));
        for k1 in 0..k {
            let k2 = k - 1 - k1;
            let (Some(t1), Some(t2)) = (tables.get(&b1, k1)?, tables.get(&b2, k2)?) else {
                continue;
            };
            for (e1, c1) in t1.entries() {
                for (e2, c2) in t2.entries() {
                    let joined = e1.spectrum.union(&e2.spectrum);
                    let product = big(c1) * big(c2) * &multinomial * half();
                    for d in e1.spectrum.classes() {
                        for f in e2.spectrum.classes() {
                            let keys = match mode {
                                Mode::Oriented => vec![ImageKey::Join(d.clone(), f.clone())],
                                Mode::NonOriented => {
                                    vec![ImageKey::Join(d.clone(), f.clone()), ImageKey::JoinTwisted(d.clone(), f.clone())]
                                }
                            };
                            let mult = rat(e1.spectrum.get(d) as u64 * e2.spectrum.get(f) as u64);
                            for key in keys {
                                for (outs, n) in images(key).iter() {
                                    let m = rebuild(&joined, &[d, f], outs);
                                    add(
                                        target(e1.euler_index + e2.euler_index, m),
                                        &product * &mult * rat(*n as u64),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    rhs.retain(|_, w| !w.is_zero());
    Ok(rhs)
}

/// Compares `k · M` of every entry of sector `(b, k)` against the recursion.
pub fn recursion_check(
    tables: &TableSet,
    b: &BackboneSpectrum,
    k: u32,
    convention: DeltaConvention,
) -> Result<Vec<Mismatch>, CutJoinError> {
    let rhs = recursion_rhs(tables, b, k, convention)?;
    let Some(table) = tables.get(b, k)? else {
        return Ok(Vec::new());
    };
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut keys: Vec<&DiagramClass> = table.entries().map(|(c, _)| c).collect();
    keys.extend(rhs.keys());
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for class in keys {
        let lhs = big(&table.get(class)) * rat(k as u64);
        let right = rhs.get(class).cloned().unwrap_or_else(BigRational::zero);
        if lhs != right {
            out.push(Mismatch { class: class.clone(), lhs, rhs: right });
        }
    }
    Ok(out)
}

/// Runs [`recursion_check`] over every sector and `1 ≤ k` present in `tables`.
pub fn recursion_check_all(tables: &TableSet, convention: DeltaConvention) -> Result<Vec<Mismatch>, CutJoinError> {
    let keys: Vec<(BackboneSpectrum, u32)> =
        tables.tables().filter(|t| t.k > 0).map(|t| (t.backbones.clone(), t.k)).collect();
    let results: Result<Vec<Vec<Mismatch>>, CutJoinError> =
        keys.par_iter().map(|(b, k)| recursion_check(tables, b, *k, convention)).collect();
    Ok(results?.into_iter().flatten().collect())
}
