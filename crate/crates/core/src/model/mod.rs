//! Input encoders, the relational graph-convolution encoder with analytic
//! gradients, task decoders, optimizers and checkpoints.

mod checkpoint;
mod decoder;
mod features;
mod layer;
mod optim;
mod params;
mod state;

pub use checkpoint::{read_tensors, write_tensors, TensorEntry, CHECKPOINT_FORMAT, CHECKPOINT_MANIFEST};
pub use decoder::{argmax_rows, classifier_forward_loss, classifier_logits, score, score_backward, score_distmult, score_dot, ClassifierOutput};
pub use features::construct_features;
pub use layer::{layer_backward, layer_forward, layer_forward_aggregated, LayerCache, LayerGrads, LayerWeights, RelEnds};
pub use optim::{OptimizerState, BETA1, BETA2, EPS};
pub use params::{scale_gradset, Grads, Param, ParamStore};
pub use state::{
    decoder_rel, embed_name, input_bias, input_weight, layer_bias, rel_weight, self_weight, to_row, zeros_like, DecoderSpec, EncodeCache,
    InitOptions, InputSpec, ModelSpec, ModelState, RelSpec, DECODER_BIAS, DECODER_WEIGHT,
};
