//! Audio I/O, excitation signals, reference effects and split protocol.

mod dataset;
mod oracle;
mod signal;
mod split;
mod wav;

pub use dataset::{
    build_dataset, build_dataset_with, combination_stem, load_dataset, parse_dataset_manifest,
    parse_sidecar, write_dataset, Dataset, DatasetManifest, ParamGrid, Recording, Sidecar,
    DATASET_FILE, RECORDING_SECONDS,
};
pub use oracle::{apply_oracle, OracleKind, ParamSpec, LOWPASS_MAX_CUTOFF_RATIO};
pub use signal::{generate_input_signal, BlockKind, BLOCKS, BLOCK_ORDER, SILENCE_FRACTION};
pub use split::{
    held_out_spans, make_split_compositions, snap_points, RecordingSplit, SplitComposition,
    SplitStreams, MAX_COMPOSITIONS, SNAP_RADIUS_S, SNAP_RMS_RATIO, SNAP_WINDOW, SPAN_COUNT,
};
pub use wav::{
    decode_wav, decode_wav_info, encode_wav, load_wav, save_wav, SampleFormat, WavInfo, SAMPLE_RATE,
};
