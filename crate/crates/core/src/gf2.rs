//! Small GF(2) linear algebra helpers on bit-packed row vectors.
//!
//! Rows are machine words; column 1 of the conceptual matrix is the most
//! significant of the `n` used bits, matching the coordinate convention of
//! the rest of the crate.

/// Rank of the span of `rows`.
pub fn rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &row in rows {
        let mut v = row;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
        }
    }
    basis.len()
}

/// Reduced row echelon basis of the span of `rows` over `n` columns,
/// pivot columns leftmost, rows ordered by pivot position.
pub fn reduced_row_echelon(rows: &[u64], n: usize) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for &row in rows {
        let mut v = row & mask(n);
        for &b in &basis {
            if v & top_bit(b) != 0 {
                v ^= b;
            }
        }
        if v == 0 {
            continue;
        }
        for b in basis.iter_mut() {
            if *b & top_bit(v) != 0 {
                *b ^= v;
            }
        }
        basis.push(v);
    }
    basis.sort_by(|a, b| b.cmp(a));
    basis
}

/// True when `v` lies in the span of an echelon `basis`.
pub fn in_span(basis: &[u64], v: u64) -> bool {
    let mut v = v;
    for &b in basis {
        if v & top_bit(b) != 0 {
            v ^= b;
        }
    }
    v == 0
}

fn top_bit(v: u64) -> u64 {
    debug_assert!(v != 0);
    1u64 << (63 - v.leading_zeros())
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}
