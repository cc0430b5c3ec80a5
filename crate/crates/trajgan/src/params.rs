//! Named parameter collections.
//!
//! A [`ParamSet`] owns a model's weights in declaration order. Each training
//! step binds the set onto a fresh tape: trainable parameters become
//! gradient-carrying leaves, frozen ones become detached constants, so
//! "which network learns" is decided structurally at bind time rather than
//! by masking updates.
//!
//! [`ParamSet::checksum`] is an FNV-1a 64 hash over names, shapes and
//! element bits (implemented here rather than with `DefaultHasher`, whose
//! algorithm is not stable across Rust releases). It is the witness that a
//! frozen network did not move.

use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Param<F: Elem> {
    pub name: String,
    pub tensor: Tensor<F>,
}

#[derive(Clone, Debug, Default)]
pub struct ParamSet<F: Elem> {
    entries: Vec<Param<F>>,
}

impl<F: Elem> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    /// Append a parameter (trainable by default); returns its index.
    pub fn push(&mut self, name: impl Into<String>, mut tensor: Tensor<F>) -> usize {
        tensor.requires_grad = true;
        self.entries.push(Param { name: name.into(), tensor });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Param<F> {
        &self.entries[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param<F> {
        &mut self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<F>> {
        self.entries.iter()
    }

    pub fn named(&self, name: &str) -> Option<&Param<F>> {
        self.entries.iter().find(|p| p.name == name)
    }

    /// Total number of scalar elements across all parameters.
    pub fn total_elems(&self) -> usize {
        self.entries.iter().map(|p| p.tensor.numel()).sum()
    }

    /// True if every parameter carries gradients.
    pub fn trainable(&self) -> bool {
        self.entries.iter().all(|p| p.tensor.requires_grad)
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        for p in &mut self.entries {
            p.tensor.requires_grad = trainable;
        }
    }

    /// Bind onto a tape honoring each parameter's `requires_grad`.
    pub fn bind(&self, tape: &mut Tape<F>) -> Vec<TensorRef> {
        self.entries
            .iter()
            .map(|p| if p.tensor.requires_grad { tape.leaf(&p.tensor) } else { tape.constant(&p.tensor) })
            .collect()
    }

    /// Bind onto a tape as constants regardless of `requires_grad`.
    pub fn bind_frozen(&self, tape: &mut Tape<F>) -> Vec<TensorRef> {
        self.entries.iter().map(|p| tape.constant(&p.tensor)).collect()
    }

    /// Collect gradients after `tape.backward`, one buffer per parameter in
    /// order. Parameters that did not influence the loss yield zeros.
    pub fn grads(&self, tape: &Tape<F>, binds: &[TensorRef]) -> Result<Vec<Vec<F>>> {
        if binds.len() != self.entries.len() {
            return Err(Error::Contract(format!(
                "grads: {} bindings for {} parameters",
                binds.len(),
                self.entries.len()
            )));
        }
        let mut out = Vec::with_capacity(self.entries.len());
        for (p, &b) in self.entries.iter().zip(binds) {
            match tape.grad_of(b)? {
                Some(g) => out.push(g.to_vec()),
                None => out.push(vec![F::zero(); p.tensor.numel()]),
            }
        }
        Ok(out)
    }

    /// Elementwise cast of the whole set (f32 -> f64 exact).
    pub fn cast<G: Elem>(&self) -> ParamSet<G> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|p| Param { name: p.name.clone(), tensor: p.tensor.cast::<G>() })
                .collect(),
        }
    }

    /// FNV-1a 64 hash over names, shapes and element bits. Stable across
    /// platforms and Rust versions; bitwise-sensitive to any weight change.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for p in &self.entries {
            eat(p.name.as_bytes());
            eat(&[0xff]);
            for &d in p.tensor.shape() {
                eat(&(d as u64).to_le_bytes());
            }
            for &v in p.tensor.data() {
                eat(&v.to_f64().to_bits().to_le_bytes());
            }
        }
        h
    }

    /// True if every element of every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|p| p.tensor.all_finite())
    }
}

/// He-normal init: std `sqrt(2 / fan_in)`, the scaling matched to
/// relu-family activations.
pub fn he_normal<F: Elem>(shape: &[usize], fan_in: usize, rng: &mut crate::rng::Rng) -> Result<Tensor<F>> {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut t = Tensor::<F>::randn_with(shape, rng)?;
    let s = F::c(std);
    for v in t.data_mut() {
        *v = *v * s;
    }
    Ok(t)
}

/// Xavier-normal init: std `sqrt(2 / (fan_in + fan_out))`, used for layers
/// feeding linear or saturating outputs.
pub fn xavier_normal<F: Elem>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut crate::rng::Rng,
) -> Result<Tensor<F>> {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::<F>::randn_with(shape, rng)?;
    let s = F::c(std);
    for v in t.data_mut() {
        *v = *v * s;
    }
    Ok(t)
}
