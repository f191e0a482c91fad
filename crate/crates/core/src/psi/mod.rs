//! Phase-shift information: quantized phase matrices, the task
//! distribution, the control channel and the reconstruction metric.

mod channel;
mod dataset;
mod generate;
mod metric;
mod quantize;

pub use channel::{apply_channel, realize_channel, ChannelConfig, ChannelMode, ChannelRealization};
pub use dataset::{decode_dataset, Dataset, encode_dataset, load_dataset, save_dataset, write_csv};
pub use generate::{
    batch_tensor, draw_sample, draw_task_params, generate_psi, ramp_field, sample_task, task_params, Generator,
    PhaseShiftSample, Ramp, SampleMeta, Task, TaskParams, TaskSpec, DEFAULT_QUERY, DEFAULT_SUPPORT,
};
pub use metric::{nmse, nmse_db};
pub use quantize::{quantize, quantize_index, QuantizationSpec};
