//! LSTM spam classifier trained with Adam on binary cross-entropy.

mod adam;
mod lstm;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use lstm::{
    bce_loss, forward_sequence, lstm_backward, lstm_forward, predict_lstm, ForwardCache, LstmParams, LstmShape,
    SequenceCache, PROB_CLAMP,
};
pub use train::{clip_global_norm, train_lstm, train_lstm_with, EpochRecord, LstmTrainConfig, TrainLog};

/// Anything whose parameters can be viewed as a fixed list of flat tensors.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl ParamTensors for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}
