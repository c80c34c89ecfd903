//! MPS input and output, instance generators and seeded permutations.

mod generate;
mod mps;
mod permute;

pub use generate::{gen_cascade, gen_random, RandomInstanceParams};
pub use mps::{parse_mps, parse_mps_with_threshold, read_mps_file, write_mps};
pub use permute::{permute_instance, PermutationPair};
