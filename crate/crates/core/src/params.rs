//! Uniform access to parameter and gradient buffers.

use alloc::vec::Vec;

use crate::nn::{Mlp, MlpGrad};

/// A fixed, ordered collection of `f64` buffers.
///
/// Parameters and their gradients expose buffers in the same order with the
/// same lengths, which is all the optimizer needs.
pub trait Parameters {
    fn buffers(&self) -> Vec<&[f64]>;
    fn buffers_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    /// All entries concatenated in buffer order.
    fn flat(&self) -> Vec<f64> {
        self.buffers().concat()
    }

    fn set_flat_entry(&mut self, mut index: usize, value: f64) {
        for buf in self.buffers_mut() {
            if index < buf.len() {
                buf[index] = value;
                return;
            }
            index -= buf.len();
        }
        panic!("flat index out of range");
    }

    fn shape(&self) -> Vec<usize> {
        self.buffers().iter().map(|b| b.len()).collect()
    }

    /// `Σ v²` over every entry.
    fn squared_norm(&self) -> f64 {
        self.buffers().iter().flat_map(|b| b.iter()).map(|v| v * v).sum()
    }
}

impl Parameters for Mlp {
    fn buffers(&self) -> Vec<&[f64]> {
        self.layers()
            .iter()
            .flat_map(|l| [l.weight.values(), l.bias.as_slice()])
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .iter_mut()
            .flat_map(|l| [l.weight.values_mut(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Parameters for MlpGrad {
    fn buffers(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl MlpGrad {
    pub fn scale(&mut self, k: f64) {
        for b in self.buffers_mut() {
            b.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &MlpGrad, k: f64) {
        for (a, b) in self.buffers_mut().into_iter().zip(other.buffers()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += k * y);
        }
    }
}
