//! Multivariate polynomials with exact rational coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// A named indeterminate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Sym(pub String);

impl Sym {
    pub fn new(s: impl Into<String>) -> Self {
        Sym(s.into())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Sorted list of (symbol, power) with positive powers.
pub type Mono = Vec<(Sym, u32)>;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Mono, BigRational>,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut out: BTreeMap<Sym, u32> = BTreeMap::new();
    for (s, p) in a.iter().chain(b.iter()) {
        *out.entry(s.clone()).or_default() += p;
    }
    out.into_iter().collect()
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rat(n, 1))
    }

    pub fn sym(name: &str) -> Self {
        let mut p = Self::zero();
        p.terms.insert(vec![(Sym::new(name), 1)], BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            let key: Vec<Mono> =
                self.terms.iter().filter(|(_, v)| v.is_zero()).map(|(k, _)| k.clone()).collect();
            for k in key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &Poly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Poly {
        self.scale(&-BigRational::one())
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn scale_int(&self, n: i64) -> Poly {
        self.scale(&rat(n, 1))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                r.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        r
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::one(), |acc, _| acc.mul(self))
    }

    /// Replace every occurrence of `s` by `by`.
    pub fn substitute(&self, s: &str, by: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone());
            for (sym, p) in m {
                let f = if sym.0 == s {
                    by.pow(*p)
                } else {
                    Poly { terms: BTreeMap::from([(vec![(sym.clone(), *p)], BigRational::one())]) }
                };
                term = term.mul(&f);
            }
            r.add_assign(&term);
        }
        r
    }

    pub fn symbols(&self) -> Vec<Sym> {
        let mut v: Vec<Sym> =
            self.terms.keys().flat_map(|m| m.iter().map(|(s, _)| s.clone())).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Evaluate with every symbol bound; missing symbols are reported.
    pub fn eval(&self, env: &HashMap<String, f64>) -> Result<f64, String> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (s, p) in m {
                let v = env.get(&s.0).ok_or_else(|| s.0.clone())?;
                t *= v.powi(*p as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Terms as (coefficient string, [(symbol, power)]), in canonical order.
    pub fn term_list(&self) -> Vec<(String, Vec<(String, u32)>)> {
        self.terms
            .iter()
            .map(|(m, c)| (c.to_string(), m.iter().map(|(s, p)| (s.0.clone(), *p)).collect()))
            .collect()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let unit = a.is_one();
            if !unit || m.is_empty() {
                write!(f, "{a}")?;
            }
            for (j, (s, p)) in m.iter().enumerate() {
                if j > 0 || !unit {
                    f.write_str("*")?;
                }
                if *p == 1 {
                    write!(f, "{s}")?;
                } else {
                    write!(f, "{s}^{p}")?;
                }
            }
        }
        Ok(())
    }
}
