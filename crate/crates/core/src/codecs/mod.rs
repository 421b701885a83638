//! Modality-specific encoders and decoders.

pub mod external;
pub mod pose;
pub mod render;
pub mod text;
pub mod toy;

pub use external::{external_decode, external_encode, ExternalCodecError, ExternalCodecSpec};
pub use pose::{decode_pose, encode_pose, quantize_pose, PoseError, PoseSequence, QuantizedPoseSequence};
pub use render::{render_pose, Topology};
pub use text::{decode_text, decode_text_lenient, encode_text, TextCodecError};
pub use toy::{toy_decode, toy_encode, ToyCodecError, ToyCodecParams};
