//! External formats: the tensor container, netpbm images and heatmaps,
//! model config files, and weight directories. Byte layouts here are
//! normative; golden files produced once must stay stable.

pub mod config;
pub mod netpbm;
pub mod tensor_file;
pub mod weights;

pub use config::{parse_model_config, read_model_config, serialize_model_config, write_model_config};
pub use netpbm::{read_pgm, read_ppm, write_heatmap, write_pgm, write_ppm};
pub use tensor_file::{read_tensor, read_tensor_from, write_tensor, write_tensor_to};
pub use weights::{load_weights, save_weights, WeightMap};
