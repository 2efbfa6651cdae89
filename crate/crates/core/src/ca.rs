//! No-boundary cellular automata as vectorial maps, the Latin squares of
//! bipermutive rules, orthogonality testing and the superposition S-box.

use crate::boolfun::LocalRule;
use crate::sbox::SBox;
use std::fmt;

/// Errors from CA evaluation and Latin-square construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaError {
    /// Input length must be at least the rule diameter (and fit a word).
    InputLength { input_len: usize, diameter: usize },
    /// Configuration value outside `0..2^input_len`.
    InputRange { input_len: usize },
    /// Slice input of the wrong length.
    LengthMismatch { expected: usize, actual: usize },
    /// Latin squares are only guaranteed for bipermutive rules.
    NotBipermutive,
    /// Matrix shape or entry range is not a valid Latin square candidate.
    MalformedSquare,
    /// Orthogonality needs squares of equal order.
    OrderMismatch { a: usize, b: usize },
    /// Superposition needs two bipermutive rules of the same diameter.
    DiameterMismatch { f: usize, g: usize },
}

impl fmt::Display for CaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaError::InputLength { input_len, diameter } => write!(
                f,
                "input length {input_len} not in diameter..=64 range (diameter {diameter})"
            ),
            CaError::InputRange { input_len } => {
                write!(f, "configuration does not fit {input_len} cells")
            }
            CaError::LengthMismatch { expected, actual } => {
                write!(f, "expected {expected} cells, got {actual}")
            }
            CaError::NotBipermutive => write!(f, "local rule is not bipermutive"),
            CaError::MalformedSquare => write!(f, "malformed Latin square candidate"),
            CaError::OrderMismatch { a, b } => write!(f, "square orders differ: {a} vs {b}"),
            CaError::DiameterMismatch { f: df, g: dg } => {
                write!(f, "rule diameters differ: {df} vs {dg}")
            }
        }
    }
}

impl std::error::Error for CaError {}

/// A cellular automaton applied once, without boundary conditions: the local
/// rule slides over every full window of the input, so `n` cells shrink to
/// `n - d + 1`.
#[derive(Debug, Clone)]
pub struct NoBoundaryCA {
    rule: LocalRule,
    input_len: usize,
}

impl NoBoundaryCA {
    pub fn new(rule: LocalRule, input_len: usize) -> Result<Self, CaError> {
        if input_len < rule.diameter() || input_len > 64 {
            return Err(CaError::InputLength {
                input_len,
                diameter: rule.diameter(),
            });
        }
        Ok(NoBoundaryCA { rule, input_len })
    }

    pub fn rule(&self) -> &LocalRule {
        &self.rule
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.input_len - self.rule.diameter() + 1
    }

    /// Applies the CA to a packed configuration (`x1` most significant).
    /// Output coordinate `i` is the rule evaluated on the window starting
    /// at cell `i`.
    pub fn apply(&self, x: u64) -> Result<u64, CaError> {
        if self.input_len < 64 && x >> self.input_len != 0 {
            return Err(CaError::InputRange {
                input_len: self.input_len,
            });
        }
        let d = self.rule.diameter();
        let n = self.input_len;
        let out_len = self.output_len();
        let win_mask = (1u64 << d) - 1;
        let table = self.rule.table();
        let mut out = 0u64;
        for i in 1..=out_len {
            let window = (x >> (n - i - (d - 1))) & win_mask;
            if table.bit(window as usize) {
                out |= 1 << (out_len - i);
            }
        }
        Ok(out)
    }

    /// Slice form of [`NoBoundaryCA::apply`], index 0 holding `x1`.
    pub fn apply_bits(&self, cells: &[bool]) -> Result<Vec<bool>, CaError> {
        if cells.len() != self.input_len {
            return Err(CaError::LengthMismatch {
                expected: self.input_len,
                actual: cells.len(),
            });
        }
        let mut x = 0u64;
        for &c in cells {
            x = (x << 1) | c as u64;
        }
        let out = self.apply(x).expect("packed input is in range");
        let out_len = self.output_len();
        Ok((1..=out_len).map(|i| (out >> (out_len - i)) & 1 == 1).collect())
    }
}

/// Square matrix over `{0, .., order-1}` whose rows and columns are meant to
/// be permutations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatinSquare {
    order: usize,
    entries: Vec<u16>,
}

impl LatinSquare {
    /// Wraps a row-major matrix, checking shape and entry range only; use
    /// [`LatinSquare::is_latin`] for the actual Latin property.
    pub fn new(order: usize, entries: Vec<u16>) -> Result<Self, CaError> {
        if order == 0 || order > u16::MAX as usize || entries.len() != order * order {
            return Err(CaError::MalformedSquare);
        }
        if entries.iter().any(|&e| e as usize >= order) {
            return Err(CaError::MalformedSquare);
        }
        Ok(LatinSquare { order, entries })
    }

    /// The square of a bipermutive rule of diameter `d = b + 1`: the left
    /// `b` input cells index the row, the right `b` cells the column, and
    /// the entry is the integer value of the CA output.
    pub fn from_rule(rule: &LocalRule) -> Result<Self, CaError> {
        if !rule.is_bipermutive() {
            return Err(CaError::NotBipermutive);
        }
        let b = rule.diameter() - 1;
        let ca = NoBoundaryCA::new(rule.clone(), 2 * b)?;
        let order = 1usize << b;
        let mut entries = Vec::with_capacity(order * order);
        for r in 0..order {
            for c in 0..order {
                let x = ((r as u64) << b) | c as u64;
                entries.push(ca.apply(x).expect("input in range") as u16);
            }
        }
        Ok(LatinSquare { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.entries[row * self.order + col]
    }

    pub fn entries(&self) -> &[u16] {
        &self.entries
    }

    /// True when every row and every column is a permutation of the symbols.
    pub fn is_latin(&self) -> bool {
        let n = self.order;
        let mut seen = vec![false; n];
        for row in 0..n {
            seen.fill(false);
            for col in 0..n {
                let e = self.get(row, col) as usize;
                if seen[e] {
                    return false;
                }
                seen[e] = true;
            }
        }
        for col in 0..n {
            seen.fill(false);
            for row in 0..n {
                let e = self.get(row, col) as usize;
                if seen[e] {
                    return false;
                }
                seen[e] = true;
            }
        }
        true
    }

    /// Orthogonality: superposing the two squares cell by cell yields every
    /// ordered symbol pair exactly once. Checked with an occupancy bitmap
    /// over the `order^2` pairs.
    pub fn are_orthogonal(a: &LatinSquare, b: &LatinSquare) -> Result<bool, CaError> {
        if a.order != b.order {
            return Err(CaError::OrderMismatch {
                a: a.order,
                b: b.order,
            });
        }
        let n = a.order;
        let mut seen = vec![0u64; (n * n).div_ceil(64)];
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            let key = *ea as usize * n + *eb as usize;
            let (w, bit) = (key >> 6, 1u64 << (key & 63));
            if seen[w] & bit != 0 {
                return Ok(false);
            }
            seen[w] |= bit;
        }
        Ok(true)
    }

    /// Row-major JSON matrix.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            (0..self.order)
                .map(|r| {
                    serde_json::Value::Array(
                        (0..self.order)
                            .map(|c| serde_json::Value::from(self.get(r, c)))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

impl fmt::Display for LatinSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.order {
            for c in 0..self.order {
                if c > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

fn check_pair(f: &LocalRule, g: &LocalRule) -> Result<usize, CaError> {
    if f.diameter() != g.diameter() {
        return Err(CaError::DiameterMismatch {
            f: f.diameter(),
            g: g.diameter(),
        });
    }
    if !f.is_bipermutive() || !g.is_bipermutive() {
        return Err(CaError::NotBipermutive);
    }
    Ok(f.diameter())
}

/// The superposition S-box `H(x) = F(x) || G(x)` of two bipermutive rules of
/// diameter `d = b + 1`: an `n = 2b` bit map whose high `b` output bits come
/// from `F` and low `b` bits from `G`. Bijective exactly when the two rules
/// form an orthogonal pair.
pub fn superposition_sbox(f: &LocalRule, g: &LocalRule) -> Result<SBox, CaError> {
    let d = check_pair(f, g)?;
    let b = d - 1;
    let n = 2 * b;
    let ca_f = NoBoundaryCA::new(f.clone(), n)?;
    let ca_g = NoBoundaryCA::new(g.clone(), n)?;
    let table: Vec<u16> = (0..1usize << n)
        .map(|x| {
            let hi = ca_f.apply(x as u64).expect("in range");
            let lo = ca_g.apply(x as u64).expect("in range");
            ((hi << b) | lo) as u16
        })
        .collect();
    Ok(SBox::new(n, table).expect("table is well formed"))
}

/// Orthogonal Latin squares are (2,2)-multipermutations: for all distinct
/// input pairs, the tuples `(x, y, F(x||y), G(x||y))` disagree on at least
/// three of their four block coordinates. Checked directly against the
/// definition, independently of [`LatinSquare::are_orthogonal`].
pub fn multipermutation_check(f: &LocalRule, g: &LocalRule) -> Result<bool, CaError> {
    let d = check_pair(f, g)?;
    let b = d - 1;
    let n = 2 * b;
    let ca_f = NoBoundaryCA::new(f.clone(), n)?;
    let ca_g = NoBoundaryCA::new(g.clone(), n)?;
    let size = 1usize << b;
    let mut tuples = Vec::with_capacity(size * size);
    for x in 0..size {
        for y in 0..size {
            let input = ((x as u64) << b) | y as u64;
            tuples.push([
                x as u16,
                y as u16,
                ca_f.apply(input).expect("in range") as u16,
                ca_g.apply(input).expect("in range") as u16,
            ]);
        }
    }
    for i in 0..tuples.len() {
        for j in i + 1..tuples.len() {
            let differ = (0..4).filter(|&k| tuples[i][k] != tuples[j][k]).count();
            if differ < 3 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfun::TruthTable;

    fn rule(w: u64, d: usize) -> LocalRule {
        LocalRule::from_wolfram_u64(w, d).unwrap()
    }

    fn bipermutive_rules(d: usize) -> Vec<LocalRule> {
        (0..1u64 << (1 << (d - 2)))
            .map(|gi| {
                let g = TruthTable::from_wolfram_u64(gi, d - 2).unwrap();
                LocalRule::from_generating(&g, d).unwrap()
            })
            .collect()
    }

    #[test]
    fn apply_matches_hand_evaluated_windows() {
        let ca = NoBoundaryCA::new(rule(150, 3), 4).unwrap();
        assert_eq!(ca.output_len(), 2);
        // input (1,0,1,1): windows (1,0,1) -> 0 and (0,1,1) -> 0
        assert_eq!(ca.apply(0b1011).unwrap(), 0b00);
        assert_eq!(
            ca.apply_bits(&[true, false, true, true]).unwrap(),
            vec![false, false]
        );
        // single window when n = d
        let one = NoBoundaryCA::new(rule(150, 3), 3).unwrap();
        assert_eq!(one.apply(0b101).unwrap(), 0);
        assert_eq!(one.apply(0b100).unwrap(), 1);
        // rule 90 on all ones: x1 ^ x3 = 0 everywhere
        let ca90 = NoBoundaryCA::new(rule(90, 3), 5).unwrap();
        assert_eq!(ca90.apply(0b11111).unwrap(), 0b000);
        assert!(ca90.apply(1 << 5).is_err());
        assert!(ca90.apply_bits(&[true; 4]).is_err());
    }

    #[test]
    fn apply_is_shift_invariant() {
        let r = rule(150, 3);
        let long = NoBoundaryCA::new(r.clone(), 8).unwrap();
        let short = NoBoundaryCA::new(r, 5).unwrap();
        for x in 0..1u64 << 8 {
            let full = long.apply(x).unwrap();
            for offset in 0..=3u64 {
                let window = (x >> offset) & 0b11111;
                let expect = (full >> offset) & 0b111;
                assert_eq!(short.apply(window).unwrap(), expect);
            }
        }
    }

    #[test]
    fn latin_square_from_bipermutive_rules() {
        let sq = LatinSquare::from_rule(&rule(150, 3)).unwrap();
        assert_eq!(sq.order(), 4);
        assert!(sq.is_latin());
        assert!(LatinSquare::from_rule(&rule(90, 3)).unwrap().is_latin());
        for r in bipermutive_rules(3) {
            assert!(LatinSquare::from_rule(&r).unwrap().is_latin());
        }
        assert!(LatinSquare::from_rule(&rule(210, 3)).is_err());
    }

    #[test]
    fn is_latin_detects_cayley_tables_and_rejects_constants() {
        let n = 5usize;
        let add = LatinSquare::new(
            n,
            (0..n * n).map(|i| ((i / n + i % n) % n) as u16).collect(),
        )
        .unwrap();
        assert!(add.is_latin());
        let constant = LatinSquare::new(3, vec![1; 9]).unwrap();
        assert!(!constant.is_latin());
        assert!(LatinSquare::new(3, vec![3; 9]).is_err());
        assert!(LatinSquare::new(3, vec![0; 8]).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        let a = LatinSquare::from_rule(&rule(150, 3)).unwrap();
        let b = LatinSquare::from_rule(&rule(90, 3)).unwrap();
        assert!(LatinSquare::are_orthogonal(&a, &b).unwrap());
        assert!(!LatinSquare::are_orthogonal(&a, &a).unwrap());
        let swap = LatinSquare::new(2, vec![0, 1, 1, 0]).unwrap();
        assert!(!LatinSquare::are_orthogonal(&swap, &swap).unwrap());
        let order3 = LatinSquare::new(3, (0..9).map(|i| ((i / 3 + i % 3) % 3) as u16).collect())
            .unwrap();
        assert!(LatinSquare::are_orthogonal(&a, &order3).is_err());
    }

    #[test]
    fn superposition_sbox_examples() {
        let s = superposition_sbox(&rule(150, 3), &rule(90, 3)).unwrap();
        assert_eq!(s.n(), 4);
        assert!(s.is_bijective());
        assert_eq!(s.nonlinearity(false), 0);
        // frozen from the independent reference evaluation
        assert_eq!(
            s.table(),
            &[0, 5, 14, 11, 13, 8, 3, 6, 10, 15, 4, 1, 7, 2, 9, 12]
        );
        // same rule twice: output halves are equal, never bijective
        let same = superposition_sbox(&rule(150, 3), &rule(150, 3)).unwrap();
        assert!(!same.is_bijective());
        assert!(superposition_sbox(&rule(150, 3), &rule(210, 3)).is_err());
        let d4 = bipermutive_rules(4);
        assert!(superposition_sbox(&rule(150, 3), &d4[0]).is_err());
    }

    #[test]
    fn orthogonality_iff_superposition_bijective() {
        for d in [3usize, 4] {
            let rules = bipermutive_rules(d);
            for f in &rules {
                let lf = LatinSquare::from_rule(f).unwrap();
                for g in &rules {
                    let lg = LatinSquare::from_rule(g).unwrap();
                    let orth = LatinSquare::are_orthogonal(&lf, &lg).unwrap();
                    let bij = superposition_sbox(f, g).unwrap().is_bijective();
                    assert_eq!(orth, bij, "d={d} f={} g={}", f.wolfram(), g.wolfram());
                }
            }
        }
    }

    #[test]
    fn multipermutation_iff_orthogonal() {
        let rules = bipermutive_rules(3);
        for f in &rules {
            let lf = LatinSquare::from_rule(f).unwrap();
            for g in &rules {
                let lg = LatinSquare::from_rule(g).unwrap();
                assert_eq!(
                    multipermutation_check(f, g).unwrap(),
                    LatinSquare::are_orthogonal(&lf, &lg).unwrap()
                );
            }
        }
        assert!(multipermutation_check(&rule(150, 3), &rule(90, 3)).unwrap());
        assert!(!multipermutation_check(&rule(150, 3), &rule(150, 3)).unwrap());
    }

    #[test]
    fn latin_squares_sampled_at_larger_diameters() {
        for d in [5usize, 6] {
            for gi in [0u64, 1, 7, 100, 255] {
                let g = TruthTable::from_wolfram_u64(gi, d - 2).unwrap();
                let r = LocalRule::from_generating(&g, d).unwrap();
                assert!(LatinSquare::from_rule(&r).unwrap().is_latin(), "d={d} gi={gi}");
            }
        }
    }
}
