//! Latin squares as exclusive-law network-coding maps.

mod codebook;
mod complete;
mod square;

pub use codebook::{
    build_codebook, Codebook, CodebookEntry, CodebookEntryJson, CodebookOptions, CodebookStats, Origin,
};
pub use complete::{complete_cpls, Completion, CompletionOptions, PartialSquare};
pub use square::{
    exclusive_law_holds, is_latin, pam_standard, permute_columns, qam_standard, rotate_columns, rotate_for_symmetry,
    standard_square, transpose, xor_square, LatinSquare,
};
