//! Values of a floating-point system ((p, n, beta), +, *): rationals
//! +-0.d1..dp * beta^e with e in [-n, n]. Every operation is computed exactly
//! and then rounded to nearest, ties to an even last digit, with overflow
//! capped at the largest magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::multiset::BoundedMultiset;

/// Default enumeration guard on beta^p.
pub const VALUE_GUARD: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FloatSystem {
    p: u32,
    n: u32,
    beta: u32,
    narrow: bool,
}

impl FloatSystem {
    pub fn new(p: u32, n: u32, beta: u32) -> Result<Self> {
        if p == 0 || beta < 2 {
            return Err(Error::Invalid("need p >= 1 and beta >= 2".into()));
        }
        if (beta as u128).checked_pow(p).is_none_or(|v| v >= 1 << 62) || n > 10_000 {
            return Err(Error::Invalid("beta^p must stay below 2^62".into()));
        }
        // All intermediates of add/mul/round stay below beta^(4p+4n+4); when
        // that fits comfortably in an i128 the fast path is exact.
        let narrow = (beta as u128)
            .checked_pow(4 * p + 4 * n + 4)
            .is_some_and(|v| v < 1 << 120);
        Ok(FloatSystem { p, n, beta, narrow })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    fn sig_limit(&self) -> u64 {
        (self.beta as u64).pow(self.p)
    }

    pub fn zero(&self) -> Float {
        Float {
            sys: *self,
            neg: false,
            sig: 0,
            exp: -(self.n as i32),
        }
    }

    pub fn max_value(&self) -> Float {
        Float {
            sys: *self,
            neg: false,
            sig: self.sig_limit() - 1,
            exp: self.n as i32,
        }
    }

    pub fn round(&self, x: &BigRational) -> Float {
        round_ratio(*self, x.numer().clone(), x.denom().clone())
    }

    /// Rounds an integer into the system.
    pub fn int(&self, v: i64) -> Float {
        if self.narrow {
            round_ratio(*self, v as i128, 1i128)
        } else {
            round_ratio(*self, BigInt::from(v), BigInt::one())
        }
    }

    /// Integer that must be exactly representable.
    pub fn exact_int(&self, v: i64) -> Result<Float> {
        let f = self.int(v);
        if f.to_ratio() == BigRational::from_integer(v.into()) {
            Ok(f)
        } else {
            Err(Error::Invalid(format!("{v} is not representable in {self}")))
        }
    }

    fn check_guard(&self) -> Result<()> {
        let size = self.sig_limit() as u128;
        if size > VALUE_GUARD {
            return Err(Error::guard("float value enumeration (beta^p)", size, VALUE_GUARD));
        }
        Ok(())
    }

    /// Every element of D_S in ascending order.
    pub fn values(&self) -> Result<Vec<Float>> {
        self.check_guard()?;
        let lim = self.sig_limit();
        let low = lim / self.beta as u64;
        let mut pos = Vec::new();
        for e in -(self.n as i32)..=self.n as i32 {
            let start = if e == -(self.n as i32) { 1 } else { low };
            for sig in start..lim {
                pos.push(Float {
                    sys: *self,
                    neg: false,
                    sig,
                    exp: e,
                });
            }
        }
        let mut out: Vec<Float> = pos.iter().rev().map(|f| f.negate()).collect();
        out.push(self.zero());
        out.extend(pos);
        Ok(out)
    }

    /// The analytic stabilization threshold beta^(p+1) + beta^p + beta^(p-1).
    pub fn sum_bound(&self) -> Result<u128> {
        self.check_guard()?;
        let b = self.beta as u128;
        Ok(b.pow(self.p + 1) + b.pow(self.p) + b.pow(self.p - 1))
    }

    /// Least k such that for all s, f in D_S, adding f to s k times and
    /// k + 1 times gives the same float.
    pub fn sum_bound_exact(&self) -> Result<u128> {
        let bound = self.sum_bound()?;
        let vals = self.values()?;
        let mut best = 0u128;
        for &f in &vals {
            for &s in &vals {
                let mut acc = s;
                let mut j = 0u128;
                loop {
                    let next = acc.plus(f);
                    if next == acc {
                        break;
                    }
                    acc = next;
                    j += 1;
                    if j > bound {
                        break;
                    }
                }
                best = best.max(j);
            }
        }
        Ok(best)
    }
}

impl fmt::Display for FloatSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={},n={},beta={}", self.p, self.n, self.beta)
    }
}

impl FromStr for FloatSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut p, mut n, mut beta) = (None, None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("system spec `{s}`")))?;
            let v: u32 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("system spec `{s}`")))?;
            match k.trim() {
                "p" => p = Some(v),
                "n" => n = Some(v),
                "beta" => beta = Some(v),
                _ => return Err(Error::Parse(format!("unknown system key `{k}`"))),
            }
        }
        match (p, n, beta) {
            (Some(p), Some(n), Some(beta)) => FloatSystem::new(p, n, beta),
            _ => Err(Error::Parse(format!("system spec `{s}` needs p, n and beta"))),
        }
    }
}

/// One element of D_S in canonical form: the significand has a nonzero
/// leading digit unless the exponent is already -n; zero is unsigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Float {
    sys: FloatSystem,
    neg: bool,
    sig: u64,
    exp: i32,
}

trait Int: Clone + Integer + Signed + From<i64> + ToPrimitive {}
impl<T: Clone + Integer + Signed + From<i64> + ToPrimitive> Int for T {}

fn pow<I: Int>(beta: u32, k: u32) -> I {
    num_traits::pow(I::from(beta as i64), k as usize)
}

/// Rounds num/den (den > 0) into the system.
fn round_ratio<I: Int>(sys: FloatSystem, num: I, den: I) -> Float {
    if num.is_zero() {
        return sys.zero();
    }
    let neg = num.is_negative();
    let a = num.abs();
    let n = sys.n as i32;
    // Smallest e >= -n with a/den < beta^e.
    let below = |e: i32| -> bool {
        if e >= 0 {
            a < den.clone() * pow::<I>(sys.beta, e as u32)
        } else {
            a.clone() * pow::<I>(sys.beta, (-e) as u32) < den
        }
    };
    let mut e = -n;
    while e <= n && !below(e) {
        e += 1;
    }
    let capped = Float {
        neg,
        ..sys.max_value()
    };
    if e > n {
        return capped;
    }
    let shift = sys.p as i32 - e;
    let (nn, dd) = if shift >= 0 {
        (a * pow::<I>(sys.beta, shift as u32), den)
    } else {
        (a, den * pow::<I>(sys.beta, (-shift) as u32))
    };
    let (q, r) = nn.div_rem(&dd);
    let q = q.to_u64().expect("significand fits");
    let twice = r.clone() + r;
    let limit = sys.sig_limit();
    let even_digit = |m: u64| m == limit || (m % sys.beta as u64).is_multiple_of(2);
    let sig = match twice.cmp(&dd) {
        Ordering::Less => q,
        Ordering::Greater => q + 1,
        Ordering::Equal => {
            // Odd bases can make both neighbours end in an even digit; the
            // larger magnitude is taken then.
            if even_digit(q) && !even_digit(q + 1) {
                q
            } else {
                q + 1
            }
        }
    };
    let (sig, e) = if sig == limit {
        if e + 1 > n {
            return capped;
        }
        (limit / sys.beta as u64, e + 1)
    } else {
        (sig, e)
    };
    if sig == 0 {
        return sys.zero();
    }
    Float {
        sys,
        neg,
        sig,
        exp: e,
    }
}

impl Float {
    pub fn system(&self) -> FloatSystem {
        self.sys
    }

    pub fn is_zero(&self) -> bool {
        self.sig == 0
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn exponent(&self) -> i32 {
        self.exp
    }

    /// The p base-beta digits d1..dp.
    pub fn digits(&self) -> Vec<u32> {
        let b = self.sys.beta as u64;
        let mut out = vec![0u32; self.sys.p as usize];
        let mut s = self.sig;
        for d in out.iter_mut().rev() {
            *d = (s % b) as u32;
            s /= b;
        }
        out
    }

    fn signed_sig<I: Int>(&self) -> I {
        let s = I::from(self.sig as i64);
        if self.neg {
            -s
        } else {
            s
        }
    }

    pub fn to_ratio(&self) -> BigRational {
        let k = self.exp - self.sys.p as i32;
        let s: BigInt = self.signed_sig();
        if k >= 0 {
            BigRational::from_integer(s * pow::<BigInt>(self.sys.beta, k as u32))
        } else {
            BigRational::new(s, pow::<BigInt>(self.sys.beta, (-k) as u32))
        }
    }

    pub fn negate(&self) -> Float {
        if self.is_zero() {
            *self
        } else {
            Float {
                neg: !self.neg,
                ..*self
            }
        }
    }

    fn same_system(&self, o: &Float) -> Result<()> {
        if self.sys == o.sys {
            Ok(())
        } else {
            Err(Error::MixedSystems(self.sys.to_string(), o.sys.to_string()))
        }
    }

    pub fn add(&self, o: &Float) -> Result<Float> {
        self.same_system(o)?;
        Ok(self.plus(*o))
    }

    pub fn mul(&self, o: &Float) -> Result<Float> {
        self.same_system(o)?;
        Ok(self.times(*o))
    }

    fn sum_in<I: Int>(self, o: Float) -> Float {
        let emin = self.exp.min(o.exp);
        let a: I = self.signed_sig::<I>() * pow::<I>(self.sys.beta, (self.exp - emin) as u32);
        let b: I = o.signed_sig::<I>() * pow::<I>(self.sys.beta, (o.exp - emin) as u32);
        scaled(self.sys, a + b, emin - self.sys.p as i32)
    }

    fn product_in<I: Int>(self, o: Float) -> Float {
        let m: I = self.signed_sig::<I>() * o.signed_sig::<I>();
        scaled(self.sys, m, self.exp + o.exp - 2 * self.sys.p as i32)
    }

    /// Same-system addition; callers guarantee matching systems.
    pub(crate) fn plus(self, o: Float) -> Float {
        debug_assert_eq!(self.sys, o.sys);
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        if self.sys.narrow {
            self.sum_in::<i128>(o)
        } else {
            self.sum_in::<BigInt>(o)
        }
    }

    pub(crate) fn times(self, o: Float) -> Float {
        debug_assert_eq!(self.sys, o.sys);
        if self.is_zero() || o.is_zero() {
            return self.sys.zero();
        }
        if self.sys.narrow {
            self.product_in::<i128>(o)
        } else {
            self.product_in::<BigInt>(o)
        }
    }

    /// Canonical literal `+0.d1..dp e<exp>`, e.g. `+0.106e1`.
    pub fn literal(&self) -> String {
        let sign = if self.neg { '-' } else { '+' };
        let digits = self.digits();
        let body: String = if self.sys.beta <= 36 {
            digits
                .iter()
                .map(|&d| std::char::from_digit(d, self.sys.beta).unwrap())
                .collect()
        } else {
            format!(
                "[{}]",
                digits.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
            )
        };
        format!("{sign}0.{body}e{}", self.exp)
    }

    /// Exact decimal when the value has a terminating expansion, otherwise
    /// a reduced fraction.
    pub fn decimal(&self) -> String {
        render_decimal(&self.to_ratio())
    }

    /// Parses either the canonical literal or an exact decimal/fraction
    /// that must already be representable.
    pub fn parse(sys: FloatSystem, text: &str) -> Result<Float> {
        let t = text.trim();
        if let Some(f) = parse_literal(sys, t)? {
            return Ok(f);
        }
        let x = parse_rational(t)?;
        let f = sys.round(&x);
        if f.to_ratio() != x {
            return Err(Error::Invalid(format!("{t} is not representable in {sys}")));
        }
        Ok(f)
    }
}

fn scaled<I: Int>(sys: FloatSystem, m: I, k: i32) -> Float {
    if k >= 0 {
        round_ratio(sys, m * pow::<I>(sys.beta, k as u32), I::from(1))
    } else {
        round_ratio(sys, m, pow::<I>(sys.beta, (-k) as u32))
    }
}

impl PartialOrd for Float {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Float {
    /// Numeric order within a system; magnitude is (exp, sig) lexicographic
    /// thanks to the canonical form.
    fn cmp(&self, o: &Self) -> Ordering {
        self.sys.cmp(&o.sys).then_with(|| {
            let class = |f: &Float| if f.is_zero() { 0 } else if f.neg { -1 } else { 1 };
            match class(self).cmp(&class(o)) {
                Ordering::Equal => {
                    let mag = (self.exp, self.sig).cmp(&(o.exp, o.sig));
                    match class(self) {
                        0 => Ordering::Equal,
                        1 => mag,
                        _ => mag.reverse(),
                    }
                }
                c => c,
            }
        })
    }
}

impl fmt::Display for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.decimal())
    }
}

/// SUM_S: fold of `add` over all occurrences in ascending numeric order.
pub fn sum_increasing(sys: FloatSystem, m: &BoundedMultiset<Float>) -> Result<Float> {
    let mut acc = sys.zero();
    for (x, c) in m.iter() {
        if x.sys != sys {
            return Err(Error::MixedSystems(sys.to_string(), x.sys.to_string()));
        }
        for _ in 0..c {
            acc = acc.plus(*x);
        }
    }
    Ok(acc)
}

/// SUM_S over a slice that is sorted in place first.
pub(crate) fn sum_sorted(sys: FloatSystem, xs: &mut [Float]) -> Float {
    xs.sort_unstable();
    xs.iter().fold(sys.zero(), |acc, &x| acc.plus(x))
}

fn render_decimal(x: &BigRational) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let neg = x.is_negative();
    let num = x.numer().abs();
    let den = x.denom().clone();
    let mut rest = den.clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut places = 0u32;
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    let sign = if neg { "-" } else { "" };
    if !rest.is_one() {
        return format!("{sign}{num}/{den}");
    }
    places = places.max(twos).max(fives);
    let scale = num_traits::pow(BigInt::from(10), places as usize);
    let digits = (num * &scale / den).to_string();
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let width = places as usize + 1;
    let padded = format!("{digits:0>width$}");
    let (int, frac) = padded.split_at(padded.len() - places as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn parse_rational(t: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("bad number `{t}`"));
    if let Some((a, b)) = t.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(a, b));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}0").parse::<BigInt>().map_err(|_| bad())? / 10;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let v = BigRational::new(digits, den);
    Ok(if neg { -v } else { v })
}

fn parse_literal(sys: FloatSystem, t: &str) -> Result<Option<Float>> {
    let (neg, rest) = match t.chars().next() {
        Some('+') => (false, &t[1..]),
        Some('-') => (true, &t[1..]),
        _ => return Ok(None),
    };
    let Some(rest) = rest.strip_prefix("0.") else {
        return Ok(None);
    };
    let Some((body, exp)) = rest.rsplit_once('e') else {
        return Ok(None);
    };
    let bad = || Error::Parse(format!("bad float literal `{t}`"));
    let digits: Vec<u32> = if let Some(list) = body.strip_prefix('[') {
        list.trim_end_matches(']')
            .split(',')
            .map(|d| d.trim().parse::<u32>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    } else {
        if body.len() != sys.p as usize {
            return Ok(None);
        }
        body.chars()
            .map(|c| c.to_digit(sys.beta.min(36)).ok_or_else(bad))
            .collect::<Result<_>>()?
    };
    let exp: i32 = exp.parse().map_err(|_| bad())?;
    if digits.len() != sys.p as usize
        || digits.iter().any(|&d| d >= sys.beta)
        || exp.unsigned_abs() > sys.n
    {
        return Err(bad());
    }
    let sig = digits.iter().fold(0u64, |a, &d| a * sys.beta as u64 + d as u64);
    let f = if sig == 0 {
        sys.zero()
    } else {
        Float { sys, neg, sig, exp }
    };
    let canonical = sig == 0 || digits[0] != 0 || exp == -(sys.n as i32);
    if !canonical || (sig == 0 && (neg || exp != -(sys.n as i32))) {
        return Err(Error::Parse(format!("non-canonical float literal `{t}`")));
    }
    Ok(Some(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sys(p: u32, n: u32, beta: u32) -> FloatSystem {
        FloatSystem::new(p, n, beta).unwrap()
    }

    fn f(s: FloatSystem, t: &str) -> Float {
        Float::parse(s, t).unwrap()
    }

    fn q(t: &str) -> BigRational {
        parse_rational(t).unwrap()
    }

    #[test]
    fn spec_string_roundtrip() {
        let s: FloatSystem = "p=3,n=2,beta=10".parse().unwrap();
        assert_eq!(s, sys(3, 2, 10));
        assert_eq!(s.to_string(), "p=3,n=2,beta=10");
        assert!("p=3,beta=10".parse::<FloatSystem>().is_err());
        assert!("p=0,n=1,beta=10".parse::<FloatSystem>().is_err());
    }

    #[test]
    fn rounding_examples() {
        let s = sys(3, 2, 10);
        let r = s.round(&q("1.055"));
        assert_eq!(r.decimal(), "1.06");
        assert_eq!(r.literal(), "+0.106e1");
        assert_eq!(s.round(&q("0")), s.zero());
        assert_eq!(sys(2, 2, 10).round(&q("123")).decimal(), "99");
        assert_eq!(sys(2, 2, 10).round(&q("-123")).decimal(), "-99");
    }

    #[test]
    fn ties_go_to_even_digit() {
        let s = sys(2, 2, 10);
        assert_eq!(s.round(&q("0.125")).decimal(), "0.12");
        assert_eq!(s.round(&q("0.135")).decimal(), "0.14");
        // 99.5 would round up to 100, which overflows: capped.
        assert_eq!(s.round(&q("99.5")).decimal(), "99");
        // 9.95 rounds up across the exponent boundary to 0.10e2.
        assert_eq!(s.round(&q("9.95")).literal(), "+0.10e2");
    }

    #[test]
    fn denormals_at_lowest_exponent() {
        let s = sys(2, 1, 10);
        let tiny = s.round(&q("0.001"));
        assert_eq!(tiny.literal(), "+0.01e-1");
        assert_eq!(s.round(&q("0.0004")), s.zero());
        assert_eq!(s.round(&q("0.0005")), s.zero());
        assert_eq!(s.round(&q("0.0015")).literal(), "+0.02e-1");
    }

    #[test]
    fn paper_addition() {
        let s = sys(3, 2, 10);
        assert_eq!(f(s, "0.312").add(&f(s, "0.743")).unwrap().decimal(), "1.06");
    }

    #[test]
    fn order_of_summation_matters() {
        let s = sys(2, 2, 10);
        let (one, m_one, c) = (f(s, "1"), f(s, "-1"), f(s, "0.01"));
        assert_eq!(one.add(&c).unwrap(), one);
        let a = one.add(&m_one).unwrap().add(&c).unwrap();
        let b = one.add(&c).unwrap().add(&m_one).unwrap();
        assert_eq!(a.decimal(), "0.01");
        assert_eq!(b.decimal(), "0");
        let m: BoundedMultiset<Float> = [one, m_one, c].into_iter().collect();
        assert_eq!(sum_increasing(s, &m).unwrap().decimal(), "0.01");
        assert_eq!(sum_increasing(s, &BoundedMultiset::new()).unwrap(), s.zero());
        let single: BoundedMultiset<Float> = [c].into_iter().collect();
        assert_eq!(sum_increasing(s, &single).unwrap(), c);
    }

    #[test]
    fn mixed_systems_rejected() {
        let a = sys(2, 2, 10).int(1);
        let b = sys(3, 2, 10).int(1);
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn multiplication() {
        let s = sys(2, 2, 10);
        assert_eq!(f(s, "0.5").mul(&f(s, "0.5")).unwrap().decimal(), "0.25");
        assert_eq!(f(s, "9.9").mul(&f(s, "9.9")).unwrap().decimal(), "98");
        assert_eq!(f(s, "-3").mul(&s.zero()).unwrap(), s.zero());
        assert_eq!(f(s, "99").mul(&f(s, "99")).unwrap(), s.max_value());
    }

    #[test]
    fn enumerate_tiny_system() {
        let v = sys(1, 0, 2).values().unwrap();
        let shown: Vec<String> = v.iter().map(|x| x.decimal()).collect();
        assert_eq!(shown, vec!["-0.5", "0", "0.5"]);
    }

    #[test]
    fn values_strictly_ascending_with_extremes() {
        for s in [sys(1, 1, 2), sys(2, 1, 3), sys(2, 2, 10)] {
            let v = s.values().unwrap();
            assert!(v.windows(2).all(|w| w[0] < w[1] && w[0].to_ratio() < w[1].to_ratio()));
            assert!(v.contains(&s.zero()) && v.contains(&s.max_value()) && v.contains(&s.max_value().negate()));
        }
    }

    #[test]
    fn analytic_bounds() {
        assert_eq!(sys(3, 2, 10).sum_bound().unwrap(), 11100);
        assert_eq!(sys(1, 1, 2).sum_bound().unwrap(), 7);
        assert_eq!(sys(1, 0, 3).sum_bound().unwrap(), 13);
        assert!(sys(7, 1, 10).sum_bound().unwrap_err().is_resource());
    }

    /// Independent oracle: the stabilization index by walking exact
    /// rationals through `round`.
    fn stabilization_oracle(s: FloatSystem) -> u128 {
        let vals = s.values().unwrap();
        let mut best = 0;
        for fv in &vals {
            for sv in &vals {
                let mut acc = sv.to_ratio();
                let mut j = 0;
                loop {
                    let next = s.round(&(acc.clone() + fv.to_ratio())).to_ratio();
                    if next == acc {
                        break;
                    }
                    acc = next;
                    j += 1;
                }
                best = best.max(j);
            }
        }
        best
    }

    #[test]
    fn exact_bounds_frozen() {
        // Values frozen from `stabilization_oracle`.
        // (1,1,2): -0.5 climbs through -0.25, 0, 0.25, 0.5 to 1 by +0.25.
        assert_eq!(sys(1, 1, 2).sum_bound_exact().unwrap(), 5);
        assert_eq!(sys(1, 0, 3).sum_bound_exact().unwrap(), 4);
        assert_eq!(sys(2, 1, 2).sum_bound_exact().unwrap(), 9);
        for s in [sys(1, 1, 2), sys(1, 0, 3), sys(2, 1, 2)] {
            assert_eq!(s.sum_bound_exact().unwrap(), stabilization_oracle(s));
            assert!(s.sum_bound_exact().unwrap() <= s.sum_bound().unwrap());
        }
    }

    #[test]
    fn literal_roundtrip_and_rejects() {
        let s = sys(3, 2, 10);
        for x in s.values().unwrap().iter().step_by(97) {
            assert_eq!(Float::parse(s, &x.literal()).unwrap(), *x);
            assert_eq!(Float::parse(s, &x.decimal()).unwrap(), *x);
        }
        assert!(Float::parse(s, "+0.012e1").is_err());
        assert!(Float::parse(s, "1.0001").is_err());
        assert!(Float::parse(s, "abc").is_err());
        let third = sys(1, 0, 3).round(&q("1/3"));
        assert_eq!(third.decimal(), "1/3");
        assert_eq!(Float::parse(sys(1, 0, 3), "1/3").unwrap(), third);
    }

    #[test]
    fn wide_systems_use_big_integers() {
        let s = sys(12, 12, 10);
        let a = f(s, "123456789012");
        let b = f(s, "0.000000000001");
        assert_eq!(a.add(&b).unwrap(), a);
        assert_eq!(a.mul(&f(s, "2")).unwrap().decimal(), "246913578024");
    }

    fn small_system() -> impl Strategy<Value = FloatSystem> {
        prop_oneof![
            Just(sys(1, 1, 2)),
            Just(sys(1, 0, 3)),
            Just(sys(2, 1, 2)),
            Just(sys(2, 2, 10)),
            Just(sys(3, 1, 5)),
        ]
    }

    fn pick(s: FloatSystem, i: usize) -> Float {
        let v = s.values().unwrap();
        v[i % v.len()]
    }

    proptest! {
        #[test]
        fn add_matches_rounded_exact_sum(s in small_system(), i in 0usize..5000, j in 0usize..5000) {
            let (a, b) = (pick(s, i), pick(s, j));
            prop_assert_eq!(a.add(&b).unwrap(), s.round(&(a.to_ratio() + b.to_ratio())));
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.add(&s.zero()).unwrap(), a);
        }

        #[test]
        fn mul_matches_rounded_exact_product(s in small_system(), i in 0usize..5000, j in 0usize..5000) {
            let (a, b) = (pick(s, i), pick(s, j));
            prop_assert_eq!(a.mul(&b).unwrap(), s.round(&(a.to_ratio() * b.to_ratio())));
            prop_assert_eq!(a.mul(&s.zero()).unwrap(), s.zero());
        }

        #[test]
        fn round_is_nearest_and_monotone(s in small_system(), a in -2000i64..2000, b in 1i64..300, c in -2000i64..2000) {
            let x = BigRational::new(a.into(), b.into());
            let y = BigRational::new(c.into(), b.into());
            let rx = s.round(&x);
            let vals = s.values().unwrap();
            let dist = |v: &Float| (v.to_ratio() - x.clone()).abs();
            let best = vals.iter().map(dist).min().unwrap();
            let max = s.max_value().to_ratio();
            if x.abs() <= max {
                prop_assert_eq!(dist(&rx), best);
            } else {
                prop_assert_eq!(rx.to_ratio().abs(), max);
            }
            if x <= y {
                prop_assert!(rx <= s.round(&y));
            }
        }

        #[test]
        fn round_fixes_representable_values(s in small_system(), i in 0usize..5000) {
            let v = pick(s, i);
            prop_assert_eq!(s.round(&v.to_ratio()), v);
        }
    }
}
