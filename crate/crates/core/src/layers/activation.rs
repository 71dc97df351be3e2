//! Element-wise activations with stored masks for the backward pass.

use ndarray::Array2;

use crate::real::Real;

#[derive(Debug)]
pub struct ActivationTape<T: Real> {
    input: Array2<T>,
    slope: T,
}

pub fn leaky_relu_forward<T: Real>(
    features: &Array2<T>,
    negative_slope: T,
) -> (Array2<T>, ActivationTape<T>) {
    let out = features.mapv(|v| if v > T::zero() { v } else { negative_slope * v });
    (out, ActivationTape { input: features.clone(), slope: negative_slope })
}

pub fn leaky_relu_backward<T: Real>(tape: ActivationTape<T>, dout: &Array2<T>) -> Array2<T> {
    let mut dx = dout.clone();
    dx.zip_mut_with(&tape.input, |g, &x| {
        if x <= T::zero() {
            *g *= tape.slope;
        }
    });
    dx
}

pub fn relu_forward<T: Real>(features: &Array2<T>) -> (Array2<T>, ActivationTape<T>) {
    leaky_relu_forward(features, T::zero())
}

pub fn relu_backward<T: Real>(tape: ActivationTape<T>, dout: &Array2<T>) -> Array2<T> {
    leaky_relu_backward(tape, dout)
}
