//! Small dense neural-network engine: batched forward pass, analytic
//! backpropagation, Adam, min-max scalers, softmax cross entropy and a seeded
//! random stream.

mod adam;
mod dense;
mod loss;
mod matrix;
mod rng;
mod scaler;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, BatchTrace, DenseNet, Grads};
pub use loss::{cross_entropy, softmax_in_place, PROB_FLOOR};
pub use matrix::gemm;
pub use rng::SeededRng;
pub use scaler::MinMaxScaler;
