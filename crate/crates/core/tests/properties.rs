//! Cross-module invariants that tie the CA, S-box and code layers together.

use num_bigint::BigUint;
use oca_core::boolfun::{LocalRule, TruthTable};
use oca_core::ca::LatinSquare;
use oca_core::codes::Gf2Poly;
use oca_core::search::{for_each_oca_pair, SearchConfig};

fn affine_bipermutive_rules(d: usize) -> Vec<LocalRule> {
    (0..1u64 << (1 << (d - 2)))
        .map(|gi| {
            let g = TruthTable::from_wolfram(&BigUint::from(gi), d - 2).unwrap();
            LocalRule::from_generating(&g, d).unwrap()
        })
        .filter(|r| r.is_affine())
        .collect()
}

/// Polynomial attached to an affine rule: the coefficient of `x_i` in its
/// linear part becomes the coefficient of `X^(i-1)`.
fn associated_polynomial(rule: &LocalRule) -> Gf2Poly {
    assert!(rule.is_affine());
    let d = rule.diameter();
    let anf = rule.table().mobius_transform();
    let mut mask = 0u64;
    for i in 1..=d {
        if anf.coefficient(1 << (d - i)) {
            mask |= 1 << (i - 1);
        }
    }
    Gf2Poly::from_mask(mask)
}

#[test]
fn affine_rule_orthogonality_matches_polynomial_coprimality() {
    for d in [3usize, 4, 5] {
        let rules = affine_bipermutive_rules(d);
        assert_eq!(rules.len(), 1 << (d - 1));
        for f in &rules {
            let lf = LatinSquare::from_rule(f).unwrap();
            for g in &rules {
                let lg = LatinSquare::from_rule(g).unwrap();
                let orthogonal = LatinSquare::are_orthogonal(&lf, &lg).unwrap();
                let coprime =
                    Gf2Poly::gcd(associated_polynomial(f), associated_polynomial(g)) == Gf2Poly::ONE;
                assert_eq!(
                    orthogonal,
                    coprime,
                    "d={d} f={} g={}",
                    f.wolfram(),
                    g.wolfram()
                );
            }
        }
    }
}

#[test]
fn associated_polynomials_of_elementary_rules() {
    let p150 = associated_polynomial(&LocalRule::from_wolfram_u64(150, 3).unwrap());
    let p90 = associated_polynomial(&LocalRule::from_wolfram_u64(90, 3).unwrap());
    assert_eq!(p150, Gf2Poly::from_mask(0b111)); // 1 + X + X^2
    assert_eq!(p90, Gf2Poly::from_mask(0b101)); // 1 + X^2
    assert_eq!(Gf2Poly::gcd(p150, p90), Gf2Poly::ONE);
}

#[test]
fn every_reported_oca_sbox_is_bijective_and_pairwise_balanced() {
    for d in [3usize, 4] {
        let mut config = SearchConfig::new(d);
        config.exclude_linear_rules = false;
        for_each_oca_pair(&config, |left, right, sbox| {
            assert!(sbox.is_bijective());
            let f = oca_core::search::rule_from_generating_index(left, d).unwrap();
            let g = oca_core::search::rule_from_generating_index(right, d).unwrap();
            assert!(oca_core::search::pairwise_balanced(&f, &g).unwrap());
        })
        .unwrap();
    }
}

#[test]
fn swap_symmetry_of_orthogonal_pairs() {
    // (f, g) orthogonal exactly when (g, f) is; exhaustive at d = 4
    let config = SearchConfig::new(4);
    let mut pairs = std::collections::BTreeSet::new();
    for_each_oca_pair(&config, |left, right, _| {
        pairs.insert((left, right));
    })
    .unwrap();
    for &(l, r) in &pairs {
        assert!(pairs.contains(&(r, l)), "missing swapped pair of ({l}, {r})");
    }
    assert_eq!(pairs.len() % 2, 0);
}

#[test]
fn walsh_spectrum_parity_is_uniform() {
    for w in 0..256u64 {
        let t = TruthTable::from_wolfram_u64(w, 3).unwrap();
        let sp = t.walsh_transform();
        let parity = sp.coefficient(0).rem_euclid(2);
        assert!(sp.coeffs().iter().all(|c| c.rem_euclid(2) == parity));
        assert!(sp.max_abs() <= 8);
    }
}
