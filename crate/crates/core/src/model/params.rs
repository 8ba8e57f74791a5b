//! Named parameter and buffer storage.

use rand::Rng;

use crate::autograd::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub name: String,
    pub value: Matrix,
}

/// Learned parameters plus non-learned buffers (batch-norm running
/// statistics), both addressed by stable names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub params: Vec<NamedMatrix>,
    pub buffers: Vec<NamedMatrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_param(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(NamedMatrix {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Matrix) -> BufferId {
        self.buffers.push(NamedMatrix {
            name: name.into(),
            value,
        });
        BufferId(self.buffers.len() - 1)
    }

    pub fn param(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn buffer(&self, id: BufferId) -> &Matrix {
        &self.buffers[id.0].value
    }

    pub fn buffer_mut(&mut self, id: BufferId) -> &mut Matrix {
        &mut self.buffers[id.0].value
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn find_param(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .iter()
            .chain(&self.buffers)
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }
}

/// Uniform initialisation in `[-bound, bound]` with `bound = gain * sqrt(3 / fan_in)`.
pub fn init_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, gain: f64) -> Matrix {
    let bound = gain * (3.0 / fan_in as f64).sqrt();
    Matrix::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
}
