//! Small differentiable network core: dense, strided convolution and
//! transposed convolution layers, elementwise activations, reverse-mode
//! gradients and Adam. Everything is `f64`.

mod activation;
mod adam;
mod layer;
mod network;
mod tensor;

pub use activation::{apply_activation, sigmoid, Activation, ELU_ALPHA, LEAKY_RELU_SLOPE};
pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use layer::{
    conv_out_size, deconv_out_size, init_params, LayerGrads, LayerHyper, LayerKind, LayerParams,
    LayerSpec, CONV_KERNEL, CONV_PADDING, CONV_STRIDE, DECONV_OUTPUT_PADDING,
};
pub use network::{ForwardCache, LayerOptim, NetworkGrads, TrainedNetwork};
pub use tensor::Tensor;
