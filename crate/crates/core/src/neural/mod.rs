//! Small dense-network toolkit for the Q-learners: a ReLU multilayer
//! perceptron with hand-written backpropagation, Adam, Huber loss and an
//! experience replay ring.

mod loss;
mod matrix;
mod mlp;
mod optim;
mod replay;

pub use loss::huber_loss;
pub use matrix::Matrix;
pub use mlp::{copy_parameters, ForwardCache, Mlp, PARAM_MAGIC};
pub use optim::{Adam, AdamConfig};
pub use replay::ReplayBuffer;
