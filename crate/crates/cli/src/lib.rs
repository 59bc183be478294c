//! IO, file formats, and the command-line pipeline around `dehaze-core`:
//! PPM/PGM codecs, the binary weight format, dataset synthesis on disk,
//! metrics reports, and the synth/train/dehaze/eval/verify subcommands.

// Training and inference churn through a few MB of tensor buffers per
// sample; the default allocator's unmap/trim behavior dominates the
// runtime budget without this.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod commands;
pub mod config;
pub mod dataset;
pub mod pnm;
pub mod report;
pub mod verify;
pub mod weights;
