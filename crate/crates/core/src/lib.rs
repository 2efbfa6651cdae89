//! S-boxes from orthogonal cellular automata.
//!
//! A bipermutive CA local rule of diameter `d = b + 1`, applied without
//! boundary conditions to `2b` cells, is a Latin square of order `2^b`. Two
//! rules whose squares are orthogonal define a bijective `2b`-bit S-box by
//! concatenating their outputs. This crate constructs those S-boxes,
//! measures their cryptographic properties, exhaustively enumerates every
//! rule pair for diameters 3 through 6, and classifies the space of linear
//! components of each linear S-box as a polynomial code via its generator
//! polynomial.
//!
//! Modules mirror the pipeline: [`boolfun`] (scalar Boolean functions and
//! their transforms), [`ca`] (cellular automata, Latin squares and the
//! superposition S-box), [`sbox`] (vectorial metrics and the linear
//! components space), [`codes`] (GF(2) polynomials and code
//! classification), and [`search`] (the exhaustive pair enumeration with
//! filtering, checkpointing and report export).

pub mod boolfun;
pub mod ca;
pub mod codes;
pub mod gf2;
pub mod sbox;
pub mod search;

pub use boolfun::{AnfCoefficients, BoolFunError, LocalRule, TruthTable, WalshSpectrum};
pub use ca::{multipermutation_check, superposition_sbox, CaError, LatinSquare, NoBoundaryCA};
pub use codes::{
    classify_generators, extract_generator, vector_as_poly, Classification, CodesError, Gf2Poly,
    PolynomialCode,
};
pub use sbox::{coordinate_degree_check, ComponentSelector, LcsResult, SBox, SboxError};
pub use search::{
    enumerate_pairs, for_each_oca_pair, merge_reports, pairwise_balanced,
    rule_from_generating_index, run_search, run_search_with_options, RuleTables, RunOptions,
    SearchConfig, SearchError, SearchOutcome, SearchReport,
};
