//! Sparse formal series in `x`, `y`, `t_i` and `u_d` with exact rational
//! coefficients.
//!
//! A [`Series`] carries its own [`Truncation`]; every stored monomial satisfies
//! it and products drop whatever falls outside. Binary operations require
//! both operands to share truncation and cyclic policy.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, BigUint, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::SeriesError;
use crate::spectra::{
    validate_class, BackboneSpectrum, BoundaryClass, CountTable, CyclicPolicy, DiagramClass, LengthPointSpectrum, Mode,
};

/// Bounds on the monomials a series keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Truncation {
    /// Largest power of `y` (chord count).
    pub k_max: u32,
    /// Largest total `t`-degree (backbone count).
    pub b_max: u32,
    /// Largest `t` index (vertices on one backbone).
    pub v_max: u32,
    /// Largest `Σ i·b_i` (total vertices), if bounded.
    pub weight_max: Option<u64>,
}

impl Truncation {
    pub fn new(k_max: u32, b_max: u32, v_max: u32) -> Self {
        Truncation { k_max, b_max, v_max, weight_max: None }
    }

    pub fn with_weight_max(mut self, weight_max: u64) -> Self {
        self.weight_max = Some(weight_max);
        self
    }

    pub fn admits(&self, m: &Monomial) -> bool {
        m.y <= self.k_max
            && m.t_degree() <= self.b_max as u64
            && m.t.last().map_or(true, |&(i, _)| i <= self.v_max)
            && self.weight_max.map_or(true, |w| m.t_weight() <= w)
    }

    /// Largest grade `y + Σ t` an admitted monomial can have.
    pub fn max_grade(&self) -> u64 {
        self.k_max as u64 + self.b_max as u64
    }
}

/// `x^a y^k Π t_i^{b_i} Π u_d^{m_d}` with sorted, zero-free exponent lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    y: u32,
    x: u32,
    t: Vec<(u32, u32)>,
    u: Vec<(BoundaryClass, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { y: 0, x: 0, t: Vec::new(), u: Vec::new() }
    }

    pub fn new(
        x: u32,
        y: u32,
        t: impl IntoIterator<Item = (u32, u32)>,
        u: impl IntoIterator<Item = (BoundaryClass, u32)>,
    ) -> Self {
        let mut m = Monomial { x, y, ..Monomial::one() };
        for (i, e) in t {
            m.add_t(i, e);
        }
        for (d, e) in u {
            m.add_u(&d, e);
        }
        m
    }

    /// `x^{2g} y^k t^b u^m` (oriented) or `x^h y^k t^b u^m` for a class.
    pub fn from_class(c: &DiagramClass) -> Self {
        let t = c.backbones.counts().iter().enumerate().map(|(i, &n)| (i as u32, n));
        let u = c.spectrum.iter().map(|(d, m)| (d.clone(), m));
        Monomial::new(x_power(c.mode, c.euler_index), c.k, t, u)
    }

    pub fn x_pow(&self) -> u32 {
        self.x
    }

    pub fn y_pow(&self) -> u32 {
        self.y
    }

    pub fn t_pows(&self) -> &[(u32, u32)] {
        &self.t
    }

    pub fn u_pows(&self) -> &[(BoundaryClass, u32)] {
        &self.u
    }

    pub fn u_exp(&self, d: &BoundaryClass) -> u32 {
        match self.u.binary_search_by(|(c, _)| c.cmp(d)) {
            Ok(i) => self.u[i].1,
            Err(_) => 0,
        }
    }

    pub fn t_degree(&self) -> u64 {
        self.t.iter().map(|&(_, e)| e as u64).sum()
    }

    pub fn t_weight(&self) -> u64 {
        self.t.iter().map(|&(i, e)| i as u64 * e as u64).sum()
    }

    /// Grade `y + Σ t` used to bound exp/log.
    pub fn grade(&self) -> u64 {
        self.y as u64 + self.t_degree()
    }

    pub fn backbones(&self) -> BackboneSpectrum {
        let len = self.t.last().map_or(0, |&(i, _)| i as usize + 1);
        let mut counts = vec![0u32; len];
        for &(i, e) in &self.t {
            counts[i as usize] = e;
        }
        BackboneSpectrum::new(counts)
    }

    pub fn spectrum(&self, policy: CyclicPolicy) -> Result<LengthPointSpectrum, SeriesError> {
        let mut s = LengthPointSpectrum::new(policy);
        for (d, e) in &self.u {
            s.add(d, *e)?;
        }
        Ok(s)
    }

    pub fn with_x(mut self, x: u32) -> Self {
        self.x = x;
        self
    }

    pub fn with_y(mut self, y: u32) -> Self {
        self.y = y;
        self
    }

    pub fn add_t(&mut self, i: u32, e: u32) {
        if e == 0 {
            return;
        }
        match self.t.binary_search_by(|&(j, _)| j.cmp(&i)) {
            Ok(pos) => self.t[pos].1 += e,
            Err(pos) => self.t.insert(pos, (i, e)),
        }
    }

    pub fn add_u(&mut self, d: &BoundaryClass, e: u32) {
        if e == 0 {
            return;
        }
        match self.u.binary_search_by(|(c, _)| c.cmp(d)) {
            Ok(pos) => self.u[pos].1 += e,
            Err(pos) => self.u.insert(pos, (d.clone(), e)),
        }
    }

    /// Removes `e` factors of `u_d`, returning `false` (unchanged) if fewer are present.
    pub fn remove_u(&mut self, d: &BoundaryClass, e: u32) -> bool {
        if e == 0 {
            return true;
        }
        match self.u.binary_search_by(|(c, _)| c.cmp(d)) {
            Ok(pos) if self.u[pos].1 >= e => {
                self.u[pos].1 -= e;
                if self.u[pos].1 == 0 {
                    self.u.remove(pos);
                }
                true
            }
            _ => false,
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        out.x += other.x;
        out.y += other.y;
        for &(i, e) in &other.t {
            out.add_t(i, e);
        }
        for (d, e) in &other.u {
            out.add_u(d, *e);
        }
        out
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut factors = Vec::new();
        if self.x > 0 {
            factors.push(format!("x^{}", self.x));
        }
        if self.y > 0 {
            factors.push(format!("y^{}", self.y));
        }
        for &(i, e) in &self.t {
            factors.push(format!("t_{i}^{e}"));
        }
        let mut us: Vec<String> = self.u.iter().map(|(d, e)| format!("u{d}^{e}")).collect();
        us.sort();
        factors.extend(us);
        if factors.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&factors.join(" "))
        }
    }
}

/// Power of `x` carried by a diagram of the given Euler index.
pub fn x_power(mode: Mode, euler_index: u32) -> u32 {
    match mode {
        Mode::Oriented => 2 * euler_index,
        Mode::NonOriented => euler_index,
    }
}

pub type Terms = BTreeMap<Monomial, BigRational>;

pub(crate) fn accumulate(into: &mut Terms, m: Monomial, c: BigRational) {
    if c.is_zero() {
        return;
    }
    match into.entry(m) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

pub(crate) fn merge_terms(mut a: Terms, b: Terms) -> Terms {
    if a.len() < b.len() {
        return merge_terms(b, a);
    }
    for (m, c) in b {
        accumulate(&mut a, m, c);
    }
    a
}

/// Runs `f` on every term in parallel and sums the emitted contributions.
pub(crate) fn par_expand<F>(terms: &Terms, f: F) -> Terms
where
    F: Fn(&Monomial, &BigRational, &mut dyn FnMut(Monomial, BigRational)) + Sync,
{
    let items: Vec<(&Monomial, &BigRational)> = terms.iter().collect();
    items
        .par_iter()
        .fold(Terms::new, |mut acc, (m, c)| {
            f(m, c, &mut |m2, c2| accumulate(&mut acc, m2, c2));
            acc
        })
        .reduce(Terms::new, merge_terms)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Series {
    policy: CyclicPolicy,
    trunc: Truncation,
    terms: Terms,
}

impl Series {
    pub fn zero(policy: CyclicPolicy, trunc: Truncation) -> Self {
        Series { policy, trunc, terms: Terms::new() }
    }

    pub fn one(policy: CyclicPolicy, trunc: Truncation) -> Self {
        Series::from_terms(policy, trunc, [(Monomial::one(), BigRational::one())])
    }

    /// Collects terms, summing duplicates and dropping zeros and truncated monomials.
    pub fn from_terms(
        policy: CyclicPolicy,
        trunc: Truncation,
        terms: impl IntoIterator<Item = (Monomial, BigRational)>,
    ) -> Self {
        let mut s = Series::zero(policy, trunc);
        for (m, c) in terms {
            s.add_term(m, c);
        }
        s
    }

    pub(crate) fn from_raw(policy: CyclicPolicy, trunc: Truncation, terms: Terms) -> Self {
        let terms = terms.into_iter().filter(|(m, c)| trunc.admits(m) && !c.is_zero()).collect();
        Series { policy, trunc, terms }
    }

    pub fn policy(&self) -> CyclicPolicy {
        self.policy
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Adds `c·m` in place (ignored if `m` is truncated away).
    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if self.trunc.admits(&m) {
            accumulate(&mut self.terms, m, c);
        }
    }

    fn check(&self, other: &Series) -> Result<(), SeriesError> {
        if self.policy != other.policy {
            return Err(SeriesError::PolicyMismatch);
        }
        if self.trunc != other.trunc {
            return Err(SeriesError::TruncationMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            accumulate(&mut out.terms, m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Series) -> Result<Series, SeriesError> {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, factor: &BigRational) -> Series {
        if factor.is_zero() {
            return Series::zero(self.policy, self.trunc);
        }
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c * factor)).collect();
        Series { policy: self.policy, trunc: self.trunc, terms }
    }

    pub fn mul(&self, other: &Series) -> Result<Series, SeriesError> {
        self.check(other)?;
        let trunc = self.trunc;
        let terms = par_expand(&self.terms, |m, c, emit| {
            for (m2, c2) in &other.terms {
                let prod = m.mul(m2);
                if trunc.admits(&prod) {
                    emit(prod, c * c2);
                }
            }
        });
        Ok(Series { policy: self.policy, trunc, terms })
    }

    /// Multiplies every term by `x^dx y^dy`.
    pub fn shift(&self, dx: u32, dy: u32) -> Series {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let (x, y) = (m.x + dx, m.y + dy);
                (m.clone().with_x(x).with_y(y), c.clone())
            })
            .collect();
        Series::from_raw(self.policy, self.trunc, terms)
    }

    /// Sets `x = 1`.
    pub fn at_x_one(&self) -> Series {
        let mut out = Series::zero(self.policy, self.trunc);
        for (m, c) in &self.terms {
            accumulate(&mut out.terms, m.clone().with_x(0), c.clone());
        }
        out
    }

    /// Keeps the terms whose monomial satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Series {
        let terms = self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect();
        Series { policy: self.policy, trunc: self.trunc, terms }
    }

    /// Terms with `y`-power exactly `k`.
    pub fn y_part(&self, k: u32) -> Series {
        self.filter(|m| m.y == k)
    }

    fn require_positive_grade(&self) -> Result<(), SeriesError> {
        match self.terms.keys().find(|m| m.grade() == 0) {
            Some(m) => Err(SeriesError::ZeroGradeTerm(m.to_string())),
            None => Ok(()),
        }
    }

    /// `Σ_n Sⁿ/n!`; every term of `self` must have positive grade.
    pub fn exp(&self) -> Result<Series, SeriesError> {
        self.require_positive_grade()?;
        let mut result = Series::one(self.policy, self.trunc);
        let mut power = result.clone();
        for n in 1..=self.trunc.max_grade() {
            power = power.mul(self)?.scale(&BigRational::new(BigInt::one(), BigInt::from(n)));
            if power.is_zero() {
                break;
            }
            result = result.add(&power)?;
        }
        Ok(result)
    }

    /// `Σ_n (−1)^{n+1} Nⁿ/n` for `self = 1 + N`.
    pub fn log(&self) -> Result<Series, SeriesError> {
        let constant = self.coefficient(&Monomial::one());
        if !constant.is_one() {
            return Err(SeriesError::NotLogarithmizable(constant.to_string()));
        }
        let n = self.sub(&Series::one(self.policy, self.trunc))?;
        n.require_positive_grade()?;
        let mut result = Series::zero(self.policy, self.trunc);
        let mut power = Series::one(self.policy, self.trunc);
        for i in 1..=self.trunc.max_grade() {
            power = power.mul(&n)?;
            if power.is_zero() {
                break;
            }
            let sign = if i % 2 == 1 { BigInt::one() } else { -BigInt::one() };
            result = result.add(&power.scale(&BigRational::new(sign, BigInt::from(i))))?;
        }
        Ok(result)
    }
}

impl fmt::Display for Series {
    /// One `coefficient monomial` line per term, in monomial order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return writeln!(f, "0");
        }
        for (m, c) in &self.terms {
            writeln!(f, "{c} {m}")?;
        }
        Ok(())
    }
}

pub(crate) fn factorial(n: u64) -> BigUint {
    (1..=n).map(BigUint::from).product()
}

/// `b!·[x^{euler} y^k t^b u^m] H`; zero for classes violating an identity.
pub fn extract_count(h: &Series, class: &DiagramClass) -> BigRational {
    if !validate_class(class).is_empty() {
        return BigRational::zero();
    }
    let coefficient = h.coefficient(&Monomial::from_class(class));
    coefficient * BigRational::from_integer(BigInt::from(factorial(class.backbones.backbones() as u64)))
}

/// Converts an extracted count to an integer, rejecting fractions and negatives.
pub fn as_integer_count(value: &BigRational, monomial: &Monomial) -> Result<BigUint, SeriesError> {
    if !value.is_integer() || value.is_negative() {
        return Err(SeriesError::NonIntegralCount { monomial: monomial.to_string(), value: value.to_string() });
    }
    Ok(value.to_integer().to_biguint().expect("nonnegative integer"))
}

/// Reads the connected count table of sector `(k, b)` out of `h`.
pub fn extract_table(h: &Series, mode: Mode, k: u32, b: &BackboneSpectrum) -> Result<CountTable, SeriesError> {
    let mut table = CountTable::new(mode, h.policy(), k, b.clone(), true);
    let Some(l) = table.l() else {
        return Ok(table);
    };
    let scale = BigRational::from_integer(BigInt::from(factorial(b.backbones() as u64)));
    for (m, c) in h.terms() {
        if m.y_pow() != k || &m.backbones() != b {
            continue;
        }
        let count = as_integer_count(&(c * &scale), m)?;
        let euler_index = match mode {
            Mode::Oriented if m.x_pow() % 2 == 1 => {
                return Err(SeriesError::OddGenusPower(m.to_string()));
            }
            Mode::Oriented => m.x_pow() / 2,
            Mode::NonOriented => m.x_pow(),
        };
        let class = DiagramClass {
            mode,
            euler_index,
            pieces: 1,
            k,
            l,
            backbones: b.clone(),
            spectrum: m.spectrum(h.policy())?,
        };
        table.insert(class, count)?;
    }
    Ok(table)
}

/// Inverse of [`extract_table`]: `Σ count/b! · x^{2g or h} y^k t^b u^m`.
pub fn table_to_series(table: &CountTable, trunc: Truncation) -> Series {
    let denom = BigInt::from(factorial(table.backbones.backbones() as u64));
    let mut s = Series::zero(table.policy, trunc);
    for (class, count) in table.entries() {
        s.add_term(Monomial::from_class(class), BigRational::new(BigInt::from(count.clone()), denom.clone()));
    }
    s
}

/// Small helper for tests and tools: `c` as a rational from a machine integer.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `true` if every coefficient of `s` is a (possibly negative) integer multiple of `1/den`.
pub fn coefficients_fit(s: &Series, den: u64) -> bool {
    s.terms().values().all(|c| (c * BigRational::from_integer(BigInt::from(den))).is_integer())
}

/// Largest absolute coefficient numerator, used in reports.
pub fn max_abs_numerator(s: &Series) -> Option<u64> {
    s.terms().values().map(|c| c.numer().abs().to_u64().unwrap_or(u64::MAX)).max()
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: CyclicPolicy = CyclicPolicy::RotationAndReflection;

    fn u(raw: &[u32]) -> BoundaryClass {
        BoundaryClass::canonicalize(raw, P).unwrap()
    }

    fn mono(t: &[(u32, u32)], us: &[(&[u32], u32)]) -> Monomial {
        Monomial::new(0, 0, t.iter().copied(), us.iter().map(|&(d, e)| (u(d), e)))
    }

    #[test]
    fn product_of_two_backbone_terms() {
        let trunc = Truncation::new(0, 2, 4);
        let a = Series::from_terms(P, trunc, [(mono(&[(1, 1)], &[(&[1], 1)]), rational(1, 1))]);
        let b = Series::from_terms(P, trunc, [(mono(&[(2, 1)], &[(&[2], 1)]), rational(1, 1))]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.coefficient(&mono(&[(1, 1), (2, 1)], &[(&[1], 1), (&[2], 1)])), rational(1, 1));

        let tight = Truncation::new(0, 1, 4);
        let a = Series::from_terms(P, tight, [(mono(&[(1, 1)], &[(&[1], 1)]), rational(1, 1))]);
        let b = Series::from_terms(P, tight, [(mono(&[(2, 1)], &[(&[2], 1)]), rational(1, 1))]);
        assert!(a.mul(&b).unwrap().is_zero());
    }

    #[test]
    fn additive_inverse() {
        let trunc = Truncation::new(2, 2, 3);
        let s = Series::from_terms(
            P,
            trunc,
            [(mono(&[(1, 1)], &[(&[1], 1)]), rational(3, 2)), (mono(&[(3, 2)], &[(&[0, 1], 1)]), rational(-1, 7))],
        );
        assert!(s.add(&s.scale(&rational(-1, 1))).unwrap().is_zero());
    }

    #[test]
    fn exp_of_two_backbone_terms() {
        let trunc = Truncation::new(0, 2, 2);
        let s = Series::from_terms(
            P,
            trunc,
            [(mono(&[(1, 1)], &[(&[1], 1)]), rational(1, 1)), (mono(&[(2, 1)], &[(&[2], 1)]), rational(1, 1))],
        );
        let e = s.exp().unwrap();
        let expect = Series::from_terms(
            P,
            trunc,
            [
                (Monomial::one(), rational(1, 1)),
                (mono(&[(1, 1)], &[(&[1], 1)]), rational(1, 1)),
                (mono(&[(2, 1)], &[(&[2], 1)]), rational(1, 1)),
                (mono(&[(1, 2)], &[(&[1], 2)]), rational(1, 2)),
                (mono(&[(1, 1), (2, 1)], &[(&[1], 1), (&[2], 1)]), rational(1, 1)),
                (mono(&[(2, 2)], &[(&[2], 2)]), rational(1, 2)),
            ],
        );
        assert_eq!(e, expect);
        assert_eq!(e.log().unwrap(), s);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let trunc = Truncation::new(3, 3, 3);
        assert_eq!(Series::zero(P, trunc).exp().unwrap(), Series::one(P, trunc));
    }

    #[test]
    fn log_needs_unit_constant() {
        let trunc = Truncation::new(1, 1, 1);
        let two = Series::one(P, trunc).scale(&rational(2, 1));
        assert!(matches!(two.log(), Err(SeriesError::NotLogarithmizable(_))));
        let pure_u = Series::from_terms(P, trunc, [(mono(&[], &[(&[0], 1)]), rational(1, 1))]);
        assert!(matches!(pure_u.exp(), Err(SeriesError::ZeroGradeTerm(_))));
    }

    #[test]
    fn mismatched_operands() {
        let a = Series::zero(P, Truncation::new(1, 1, 1));
        let b = Series::zero(CyclicPolicy::RotationOnly, Truncation::new(1, 1, 1));
        let c = Series::zero(P, Truncation::new(2, 1, 1));
        assert_eq!(a.mul(&b), Err(SeriesError::PolicyMismatch));
        assert_eq!(a.add(&c), Err(SeriesError::TruncationMismatch));
    }

    #[test]
    fn extraction_of_rainbow_and_bare_backbone() {
        let trunc = Truncation::new(1, 1, 4);
        let rainbow = mono(&[(2, 1)], &[(&[0], 1), (&[0, 0], 1)]).with_y(1);
        let h = Series::from_terms(P, trunc, [(rainbow, rational(1, 1)), (mono(&[(3, 1)], &[(&[3], 1)]), rational(1, 1))]);
        let class = DiagramClass {
            mode: Mode::Oriented,
            euler_index: 0,
            pieces: 1,
            k: 1,
            l: 0,
            backbones: BackboneSpectrum::single(2),
            spectrum: LengthPointSpectrum::from_tuples(vec![(vec![0u32], 1), (vec![0, 0], 1)], P).unwrap(),
        };
        assert_eq!(extract_count(&h, &class), rational(1, 1));
        let bare = DiagramClass {
            k: 0,
            l: 3,
            backbones: BackboneSpectrum::single(3),
            spectrum: LengthPointSpectrum::from_tuples(vec![(vec![3u32], 1)], P).unwrap(),
            ..class.clone()
        };
        assert_eq!(extract_count(&h, &bare), rational(1, 1));
        let bogus = DiagramClass { euler_index: 1, ..class };
        assert_eq!(extract_count(&h, &bogus), rational(0, 1));
    }

    #[test]
    fn fractional_count_is_rejected() {
        let m = mono(&[(1, 2)], &[(&[0, 0, 0, 0], 1)]);
        assert!(as_integer_count(&rational(1, 2), &m).is_err());
        assert!(as_integer_count(&rational(-1, 1), &m).is_err());
        assert_eq!(as_integer_count(&rational(4, 2), &m).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn monomial_text() {
        let m = mono(&[(2, 1)], &[(&[0, 0], 2), (&[0], 1)]).with_x(2).with_y(1);
        assert_eq!(m.to_string(), "x^2 y^1 t_2^1 u(0)^1 u(0,0)^2");
        assert_eq!(Monomial::one().to_string(), "1");
    }
}
