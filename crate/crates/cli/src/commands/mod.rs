pub mod anchors;
pub mod augment;
pub mod bench;
pub mod eval;
pub mod gradcheck;
pub mod synth;
