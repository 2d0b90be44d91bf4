//! Arithmetic in the prime field GF(p).
//!
//! Symbols are stored as plain `u8` residues and every operation goes through a
//! [`FieldSpec`] that carries the modulus. [`FieldElement`] pairs a residue
//! with its field for call sites that want mismatches caught at runtime.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported modulus; keeps every element within one byte.
pub const MAX_PRIME: u8 = 251;

/// A prime modulus `p` with `2 <= p <= 251`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    p: u8,
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

impl FieldSpec {
    pub fn new(p: u32) -> Result<Self> {
        if p > MAX_PRIME as u32 || !is_prime(p) {
            return Err(Error::Usage(format!(
                "field size {p} must be a prime between 2 and {MAX_PRIME}"
            )));
        }
        Ok(FieldSpec { p: p as u8 })
    }

    #[inline]
    pub fn p(self) -> u8 {
        self.p
    }

    /// Field size as `usize`, convenient for table dimensions.
    #[inline]
    pub fn size(self) -> usize {
        self.p as usize
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        ((a as u16 + b as u16) % self.p as u16) as u8
    }

    #[inline]
    pub fn sub(self, a: u8, b: u8) -> u8 {
        ((a as u16 + self.p as u16 - b as u16) % self.p as u16) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        self.sub(0, a)
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        ((a as u16 * b as u16) % self.p as u16) as u8
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(self, a: u8) -> Result<u8> {
        if a.is_multiple_of(self.p) {
            return Err(Error::Domain("inverse of zero".into()));
        }
        let (mut r0, mut r1) = (self.p as i32, a as i32);
        let (mut t0, mut t1) = (0i32, 1i32);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        Ok(t0.rem_euclid(self.p as i32) as u8)
    }

    pub fn elem(self, value: u8) -> Result<FieldElement> {
        if value >= self.p {
            return Err(Error::Usage(format!(
                "symbol {value} out of range for GF({})",
                self.p
            )));
        }
        Ok(FieldElement { value, spec: self })
    }

    /// Checks that every symbol of `v` lies in `[0, p)`.
    pub fn check_symbols(self, v: &[u8]) -> Result<()> {
        match v.iter().find(|&&s| s >= self.p) {
            Some(s) => Err(Error::Usage(format!(
                "symbol {s} out of range for GF({})",
                self.p
            ))),
            None => Ok(()),
        }
    }

    /// All field elements in increasing order.
    pub fn elements(self) -> impl Iterator<Item = u8> {
        0..self.p
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.p)
    }
}

/// A residue tagged with the field it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u8,
    spec: FieldSpec,
}

#[allow(clippy::should_implement_trait)]
impl FieldElement {
    #[inline]
    pub fn value(self) -> u8 {
        self.value
    }

    #[inline]
    pub fn spec(self) -> FieldSpec {
        self.spec
    }

    fn same_field(self, other: FieldElement) -> Result<FieldSpec> {
        if self.spec != other.spec {
            return Err(Error::Usage(format!(
                "mixed fields {} and {}",
                self.spec, other.spec
            )));
        }
        Ok(self.spec)
    }

    pub fn add(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.add(self.value, other.value),
            spec: f,
        })
    }

    pub fn sub(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.sub(self.value, other.value),
            spec: f,
        })
    }

    pub fn mul(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.mul(self.value, other.value),
            spec: f,
        })
    }

    pub fn inv(self) -> Result<FieldElement> {
        Ok(FieldElement {
            value: self.spec.inv(self.value)?,
            spec: self.spec,
        })
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}
