//! Per-label pheromone vectors (`nbrPhers`).
//!
//! Small vocabularies use a dense array indexed by label; larger ones fall
//! back to a sorted sparse map so that memory stays proportional to the
//! number of distinct neighbor labels.

use std::collections::btree_map;
use std::collections::BTreeMap;
use std::iter::Enumerate;
use std::slice;

use crate::graph::Label;
use crate::scalar::{above_floor, Pheromone};

/// Largest vocabulary stored densely.
pub const DENSE_VOCAB_LIMIT: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub enum LabelVector<P> {
    Dense(Vec<P>),
    Sparse(BTreeMap<u32, P>),
}

impl<P: Pheromone> LabelVector<P> {
    pub fn new(vocab_size: usize) -> Self {
        if vocab_size <= DENSE_VOCAB_LIMIT {
            LabelVector::Dense(vec![P::zero(); vocab_size])
        } else {
            LabelVector::Sparse(BTreeMap::new())
        }
    }

    pub fn get(&self, label: Label) -> P {
        match self {
            LabelVector::Dense(v) => v.get(label.index()).copied().unwrap_or_else(P::zero),
            LabelVector::Sparse(m) => m.get(&label.0).copied().unwrap_or_else(P::zero),
        }
    }

    pub fn add(&mut self, label: Label, amount: P) {
        match self {
            LabelVector::Dense(v) => v[label.index()] = v[label.index()] + amount,
            LabelVector::Sparse(m) => {
                let slot = m.entry(label.0).or_insert_with(P::zero);
                *slot = *slot + amount;
            }
        }
    }

    pub fn clear(&mut self) {
        match self {
            LabelVector::Dense(v) => v.iter_mut().for_each(|x| *x = P::zero()),
            LabelVector::Sparse(m) => m.clear(),
        }
    }

    /// Multiplies every entry by `factor`, zeroing entries that fall to the floor.
    pub fn scale(&mut self, factor: P) {
        let shrink = |x: &mut P| {
            let y = *x * factor;
            *x = if above_floor(y) { y } else { P::zero() };
        };
        match self {
            LabelVector::Dense(v) => v.iter_mut().for_each(shrink),
            LabelVector::Sparse(m) => {
                m.values_mut().for_each(shrink);
                m.retain(|_, x| *x > P::zero());
            }
        }
    }

    pub fn sum(&self) -> P {
        self.iter().map(|(_, x)| x).sum()
    }

    pub fn norm(&self) -> P {
        self.iter().map(|(_, x)| x * x).sum::<P>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> P {
        match (self, other) {
            (LabelVector::Dense(a), LabelVector::Dense(b)) => a.iter().zip(b).map(|(&x, &y)| x * y).sum(),
            _ => self.iter().map(|(l, x)| x * other.get(l)).sum(),
        }
    }

    /// Cosine similarity; zero when either vector carries no mass.
    pub fn cosine(&self, other: &Self) -> P {
        let denom = self.norm() * other.norm();
        if denom <= P::zero() {
            return P::zero();
        }
        let c = self.dot(other) / denom;
        c.max(P::zero()).min(P::one())
    }

    /// Entries strictly above the pheromone floor.
    pub fn live(&self) -> impl Iterator<Item = (Label, P)> + '_ {
        self.iter().filter(|&(_, x)| above_floor(x))
    }

    /// All stored entries, including zeros in the dense form.
    pub fn iter(&self) -> Iter<'_, P> {
        match self {
            LabelVector::Dense(v) => Iter::Dense(v.iter().enumerate()),
            LabelVector::Sparse(m) => Iter::Sparse(m.iter()),
        }
    }
}

pub enum Iter<'a, P> {
    Dense(Enumerate<slice::Iter<'a, P>>),
    Sparse(btree_map::Iter<'a, u32, P>),
}

impl<P: Copy> Iterator for Iter<'_, P> {
    type Item = (Label, P);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Iter::Dense(it) => it.next().map(|(i, &x)| (Label(i as u32), x)),
            Iter::Sparse(it) => it.next().map(|(&l, &x)| (Label(l), x)),
        }
    }
}
