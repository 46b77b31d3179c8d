//! Mixed-integer linear models and the planning encoding for MITL tasks
//! over varying weighted transition systems.

mod decode;
mod encode;
mod model;

pub use decode::{decode, occupied_steps, DecodeError, DecodedSolution};
pub use encode::{
    build_problem1, encode_combined_robustness, encode_label_tracking, encode_left_robustness,
    encode_right_robustness, encode_ts, reachable, AtomEncoding, TransitionEncoding, EncodeError, EncodeWarning, EncodingConfig,
    LabelTracking, Lit, MitlEncoder, Occupancy, Problem,
};
pub use model::*;
