//! GF(2) polynomial arithmetic and the coding-theoretic view of linear
//! components spaces: generator-polynomial extraction, polynomial-code
//! verification and cyclicity testing.
//!
//! Codeword orientation: the leftmost coordinate (coordinate 1, the most
//! significant selector bit) maps to the constant term. A polynomial code of
//! dimension `k` is a subspace spanned by `g, Xg, .., X^(k-1)g` for one
//! generator polynomial `g`; it is cyclic exactly when `g` divides `X^n + 1`.

use crate::sbox::LcsResult;
use std::collections::BTreeMap;
use std::fmt;

/// Errors from polynomial arithmetic and generator extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodesError {
    /// Division by the zero polynomial.
    ZeroModulus,
    /// Generator extraction needs at least one member.
    EmptyMembers,
    /// Members plus zero do not form a subspace.
    NotSubspace,
    /// The minimal-degree codeword's shifts do not span the subspace.
    NotPolynomialCode { minimal: Gf2Poly },
    /// Classification rejects empty linear-components spaces.
    ZeroDimension,
}

impl fmt::Display for CodesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodesError::ZeroModulus => write!(f, "polynomial modulus is zero"),
            CodesError::EmptyMembers => write!(f, "no codewords given"),
            CodesError::NotSubspace => write!(f, "members plus zero are not a subspace"),
            CodesError::NotPolynomialCode { minimal } => {
                write!(f, "not a polynomial code (minimal-degree codeword {minimal})")
            }
            CodesError::ZeroDimension => write!(f, "linear components space is empty"),
        }
    }
}

impl std::error::Error for CodesError {}

/// Polynomial over GF(2) with degree below 64; bit `i` holds the
/// coefficient of `X^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gf2Poly(u64);

impl Gf2Poly {
    pub const ZERO: Gf2Poly = Gf2Poly(0);
    pub const ONE: Gf2Poly = Gf2Poly(1);

    pub fn from_mask(mask: u64) -> Self {
        Gf2Poly(mask)
    }

    /// `X^n + 1`.
    pub fn x_pow_plus_one(n: usize) -> Self {
        assert!((1..64).contains(&n));
        Gf2Poly((1 << n) | 1)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    /// Highest power present; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    /// Multiplication by `X^k`.
    pub fn shift(&self, k: usize) -> Self {
        debug_assert!(self.degree().is_none_or(|d| d + k < 64));
        Gf2Poly(self.0 << k)
    }

    pub fn xor(&self, other: Gf2Poly) -> Self {
        Gf2Poly(self.0 ^ other.0)
    }

    /// Remainder of carry-less division by `m`.
    pub fn rem(&self, m: Gf2Poly) -> Result<Gf2Poly, CodesError> {
        let dm = m.degree().ok_or(CodesError::ZeroModulus)?;
        let mut a = self.0;
        while a != 0 {
            let da = 63 - a.leading_zeros() as usize;
            if da < dm {
                break;
            }
            a ^= m.0 << (da - dm);
        }
        Ok(Gf2Poly(a))
    }

    pub fn divides(&self, other: Gf2Poly) -> Result<bool, CodesError> {
        Ok(other.rem(*self)?.is_zero())
    }

    /// Greatest common divisor (Euclid on remainders).
    pub fn gcd(a: Gf2Poly, b: Gf2Poly) -> Gf2Poly {
        let (mut a, mut b) = (a, b);
        while !b.is_zero() {
            let r = a.rem(b).expect("b nonzero");
            a = b;
            b = r;
        }
        a
    }

    /// Hex coefficient mask, low powers in the low bits.
    pub fn mask_hex(&self) -> String {
        format!("{:x}", self.0)
    }
}

/// Ascending sparse form: `"1 + X^3"`, `"X + X^4 + X^5"`, `"0"`.
impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        let mut first = true;
        for i in 0..64 {
            if (self.0 >> i) & 1 == 1 {
                if !first {
                    f.write_str(" + ")?;
                }
                match i {
                    0 => f.write_str("1")?,
                    1 => f.write_str("X")?,
                    _ => write!(f, "X^{i}")?,
                }
                first = false;
            }
        }
        Ok(())
    }
}

/// Codeword-to-polynomial bridge: coordinate `i + 1` (machine bit
/// `n - 1 - i`) becomes the coefficient of `X^i`.
pub fn vector_as_poly(v: u64, n: usize) -> Gf2Poly {
    assert!((1..=64).contains(&n));
    let mut mask = 0u64;
    for i in 0..n {
        if (v >> (n - 1 - i)) & 1 == 1 {
            mask |= 1 << i;
        }
    }
    Gf2Poly(mask)
}

/// Inverse of [`vector_as_poly`]; `None` when the polynomial does not fit
/// length `n`.
pub fn poly_as_vector(p: Gf2Poly, n: usize) -> Option<u64> {
    if p.degree().is_some_and(|d| d >= n) {
        return None;
    }
    let mut v = 0u64;
    for i in 0..n {
        if (p.mask() >> i) & 1 == 1 {
            v |= 1 << (n - 1 - i);
        }
    }
    Some(v)
}

/// A length-`n` polynomial code: `k` consecutive shifts of the generator's
/// coefficient vector form a basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialCode {
    pub n: usize,
    pub k: usize,
    pub generator: Gf2Poly,
    pub cyclic: bool,
}

/// Finds the generator polynomial of a subspace given as its nonzero
/// members (selector words, coordinate 1 most significant).
///
/// The generator candidate is the unique minimal-degree codeword: if any
/// codeword's `k` shifts span the subspace, the subspace is
/// `{p(X) g : deg p < k}` and its minimal-degree member is `g` itself, so
/// trying the minimal codeword loses nothing. Two distinct codewords of
/// equal minimal degree cannot exist (their sum would be a nonzero codeword
/// of lower degree). The shifts may stop short of the last column, so
/// `deg g <= n - k` with equality for most classes but not all.
pub fn extract_generator(members: &[u16], n: usize) -> Result<PolynomialCode, CodesError> {
    if members.is_empty() {
        return Err(CodesError::EmptyMembers);
    }
    let member_set: std::collections::BTreeSet<u16> = members.iter().copied().collect();
    if member_set.len() != members.len() || member_set.contains(&0) {
        return Err(CodesError::NotSubspace);
    }
    let rows: Vec<u64> = member_set.iter().map(|&v| v as u64).collect();
    let k = crate::gf2::rank(&rows);
    if member_set.len() != (1 << k) - 1 {
        return Err(CodesError::NotSubspace);
    }
    let polys: Vec<Gf2Poly> = member_set.iter().map(|&v| vector_as_poly(v as u64, n)).collect();
    let generator = *polys
        .iter()
        .min_by_key(|p| p.degree().expect("members are nonzero"))
        .expect("nonempty");
    let t = generator.degree().expect("nonzero");
    if polys
        .iter()
        .filter(|p| p.degree() == Some(t))
        .count()
        != 1
    {
        // impossible for a genuine subspace; kept as a defensive check
        return Err(CodesError::NotSubspace);
    }
    if t + k > n {
        return Err(CodesError::NotPolynomialCode { minimal: generator });
    }
    let mut seen_degrees = std::collections::BTreeSet::new();
    for i in 0..k {
        let row = generator.shift(i);
        let vec = poly_as_vector(row, n).expect("degree checked");
        if !member_set.contains(&(vec as u16)) {
            return Err(CodesError::NotPolynomialCode { minimal: generator });
        }
        // consecutive shifts have strictly increasing degree, hence
        // independence; record them so the claim is actually checked
        if !seen_degrees.insert(row.degree()) {
            return Err(CodesError::NotPolynomialCode { minimal: generator });
        }
    }
    let cyclic = generator
        .divides(Gf2Poly::x_pow_plus_one(n))
        .expect("generator nonzero");
    Ok(PolynomialCode {
        n,
        k,
        generator,
        cyclic,
    })
}

/// Generator-polynomial classification of a batch of linear-components
/// spaces: class counts keyed by (dimension, generator), with subspaces
/// that fail extraction collected in a separate bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    classes: BTreeMap<(usize, u64), u64>,
    non_polynomial: u64,
}

impl Classification {
    pub fn add_code(&mut self, code: &PolynomialCode) {
        self.add_class(code.k, code.generator, 1);
    }

    pub fn add_class(&mut self, dimension: usize, generator: Gf2Poly, count: u64) {
        *self.classes.entry((dimension, generator.mask())).or_insert(0) += count;
    }

    pub fn add_non_polynomial(&mut self) {
        self.non_polynomial += 1;
    }

    pub fn add_non_polynomial_count(&mut self, count: u64) {
        self.non_polynomial += count;
    }

    pub fn merge(&mut self, other: &Classification) {
        for (&key, &count) in &other.classes {
            *self.classes.entry(key).or_insert(0) += count;
        }
        self.non_polynomial += other.non_polynomial;
    }

    /// Classes ordered by dimension descending, then generator mask
    /// ascending.
    pub fn classes(&self) -> Vec<(usize, Gf2Poly, u64)> {
        let mut out: Vec<(usize, Gf2Poly, u64)> = self
            .classes
            .iter()
            .map(|(&(dim, mask), &count)| (dim, Gf2Poly::from_mask(mask), count))
            .collect();
        out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.mask().cmp(&b.1.mask())));
        out
    }

    pub fn non_polynomial(&self) -> u64 {
        self.non_polynomial
    }

    pub fn total(&self) -> u64 {
        self.classes.values().sum::<u64>() + self.non_polynomial
    }
}

/// Classifies a batch of linear-components spaces by extracting each
/// generator polynomial. Spaces of dimension zero are an error; extraction
/// failures land in the non-polynomial bucket rather than aborting, so an
/// unexpected structure shows up in the report instead of being masked.
pub fn classify_generators<'a, I>(results: I) -> Result<Classification, CodesError>
where
    I: IntoIterator<Item = &'a LcsResult>,
{
    let mut out = Classification::default();
    for lcs in results {
        if lcs.dimension() == 0 {
            return Err(CodesError::ZeroDimension);
        }
        match extract_generator(lcs.members(), lcs.n()) {
            Ok(code) => out.add_code(&code),
            Err(CodesError::NotPolynomialCode { .. }) => out.add_non_polynomial(),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(mask: u64) -> Gf2Poly {
        Gf2Poly::from_mask(mask)
    }

    #[test]
    fn division_examples() {
        // X^3 + 1 = (X + 1)(X^2 + X + 1)
        assert_eq!(poly(0b1001).rem(poly(0b11)).unwrap(), Gf2Poly::ZERO);
        // X^2 + X + 1 = (X + 1) X + 1
        assert_eq!(poly(0b111).rem(poly(0b11)).unwrap(), Gf2Poly::ONE);
        let a = poly(0b101101);
        assert_eq!(a.rem(a).unwrap(), Gf2Poly::ZERO);
        assert!(a.rem(Gf2Poly::ZERO).is_err());
        assert_eq!(Gf2Poly::gcd(poly(0b111), poly(0b101)), Gf2Poly::ONE);
        assert_eq!(Gf2Poly::gcd(poly(0b1001), poly(0b11)), poly(0b11));
    }

    #[test]
    fn display_forms() {
        assert_eq!(poly(0b1001).to_string(), "1 + X^3");
        assert_eq!(poly(0b110010).to_string(), "X + X^4 + X^5");
        assert_eq!(Gf2Poly::ZERO.to_string(), "0");
        assert_eq!(Gf2Poly::ONE.to_string(), "1");
        assert_eq!(poly(0b10).to_string(), "X");
    }

    #[test]
    fn vector_poly_bridge() {
        // only the leftmost coordinate set: constant polynomial 1
        assert_eq!(vector_as_poly(0b100000, 6), Gf2Poly::ONE);
        // codeword (1,0,0,1,0,0) in length 6: 1 + X^3
        assert_eq!(vector_as_poly(0b100100, 6), poly(0b1001));
        assert_eq!(vector_as_poly(0, 6), Gf2Poly::ZERO);
        for v in 0..64u64 {
            assert_eq!(poly_as_vector(vector_as_poly(v, 6), 6), Some(v));
        }
        assert_eq!(poly_as_vector(poly(1 << 6), 6), None);
    }

    #[test]
    fn extract_generator_on_shift_spans() {
        // span of (1100), (0110), (0011): generator 1 + X, cyclic in n = 4
        let members: Vec<u16> = all_members(&[0b1100, 0b0110, 0b0011]);
        let code = extract_generator(&members, 4).unwrap();
        assert_eq!(code.generator, poly(0b11));
        assert_eq!(code.k, 3);
        assert!(code.cyclic);

        // single codeword (1,0,1,1): generator 1 + X^2 + X^3, k = 1, and
        // 1 + X^2 + X^3 does not divide X^4 + 1
        let code = extract_generator(&[0b1011], 4).unwrap();
        assert_eq!(code.generator, poly(0b1101));
        assert_eq!(code.k, 1);
        assert!(!code.cyclic);
    }

    #[test]
    fn extract_generator_rejects_non_subspaces_and_non_codes() {
        assert_eq!(extract_generator(&[], 4), Err(CodesError::EmptyMembers));
        assert_eq!(
            extract_generator(&[0b0001, 0b0010], 4),
            Err(CodesError::NotSubspace)
        );
        assert_eq!(
            extract_generator(&[0b0001, 0b0001, 0b0010], 4),
            Err(CodesError::NotSubspace)
        );
        // span of (1000) and (0010) is a subspace but not shift-generated
        let members = all_members(&[0b1000, 0b0010]);
        assert!(matches!(
            extract_generator(&members, 4),
            Err(CodesError::NotPolynomialCode { .. })
        ));
    }

    #[test]
    fn shifted_span_with_low_degree_generator() {
        // span{g, Xg, X^2 g} with g = 1 + X + X^4 in n = 8: a dimension-3
        // polynomial code whose generator degree is below n - k
        let g = 0b10011u64;
        let rows: Vec<u64> = (0..3)
            .map(|i| poly_as_vector(poly(g << i), 8).unwrap())
            .collect();
        let members = all_members(&rows);
        let code = extract_generator(&members, 8).unwrap();
        assert_eq!(code.generator, poly(g));
        assert_eq!(code.k, 3);
        assert!(!code.cyclic);
    }

    #[test]
    fn classify_groups_lcs_results() {
        use crate::search::{for_each_oca_pair, SearchConfig};
        let mut results = Vec::new();
        for_each_oca_pair(&SearchConfig::new(4), |_, _, sbox| {
            results.push(sbox.linear_components_space());
        })
        .unwrap();
        let classification = classify_generators(results.iter()).unwrap();
        assert_eq!(classification.non_polynomial(), 0);
        assert_eq!(classification.total(), 32);
        let classes = classification.classes();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0], (3, poly(0b1001), 32));
        // empty linear-components spaces are rejected
        use rand::{rngs::StdRng, seq::SliceRandom, SeedableRng};
        let mut rng = StdRng::seed_from_u64(0x10c5);
        let empty = loop {
            let mut table: Vec<u16> = (0..32).collect();
            table.shuffle(&mut rng);
            let lcs = crate::sbox::SBox::new(5, table).unwrap().linear_components_space();
            if lcs.dimension() == 0 {
                break lcs;
            }
        };
        assert_eq!(
            classify_generators([empty].iter()),
            Err(CodesError::ZeroDimension)
        );
    }

    #[test]
    fn cyclic_codes_are_closed_under_rotation() {
        let members = all_members(&[0b1100, 0b0110, 0b0011]);
        let code = extract_generator(&members, 4).unwrap();
        assert!(code.cyclic);
        let set: std::collections::BTreeSet<u16> = members.iter().copied().collect();
        for &m in &members {
            let rotated = ((m >> 1) | ((m & 1) << 3)) & 0xf;
            assert!(set.contains(&rotated), "rotation of {m:04b} left the code");
        }
    }

    fn all_members(basis: &[u64]) -> Vec<u16> {
        let k = basis.len();
        let mut out: Vec<u16> = (1u32..1 << k)
            .map(|sel| {
                let mut v = 0u64;
                for (i, &b) in basis.iter().enumerate() {
                    if (sel >> i) & 1 == 1 {
                        v ^= b;
                    }
                }
                v as u16
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
