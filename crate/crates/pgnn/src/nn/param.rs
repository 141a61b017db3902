//! Parameter storage and the flat named view used by the optimizer and the
//! weight serializer.

use super::{Module, Scalar};
use crate::error::{Error, Result};
use crate::rng::Prng;
use rand::Rng;

/// A trainable tensor with its same-shaped gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<S> {
    pub dims: Vec<usize>,
    pub value: Vec<S>,
    pub grad: Vec<S>,
}

impl<S: Scalar> Param<S> {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Param {
            dims: dims.to_vec(),
            value: vec![S::ZERO; len],
            grad: vec![S::ZERO; len],
        }
    }

    pub fn filled(dims: &[usize], v: S) -> Self {
        let len = dims.iter().product();
        Param {
            dims: dims.to_vec(),
            value: vec![v; len],
            grad: vec![S::ZERO; len],
        }
    }

    /// He-uniform initialization: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    pub fn he_uniform(dims: &[usize], fan_in: usize, rng: &mut Prng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let len: usize = dims.iter().product();
        Param {
            dims: dims.to_vec(),
            value: (0..len)
                .map(|_| S::from_f64(rng.random_range(-bound..bound)))
                .collect(),
            grad: vec![S::ZERO; len],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Whether a stored slot is optimized or carried state (running statistics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Trainable,
    Stats,
}

/// Borrowed view of one parameter during a visit.
pub struct ParamVisit<'a, S> {
    pub name: String,
    pub dims: &'a [usize],
    pub value: &'a mut [S],
    pub grad: &'a mut [S],
}

impl<S: Scalar> Param<S> {
    pub(crate) fn visit<'a>(&'a mut self, name: String) -> ParamVisit<'a, S> {
        ParamVisit {
            name,
            dims: &self.dims,
            value: &mut self.value,
            grad: &mut self.grad,
        }
    }

    /// Visit without a gradient slot (running stats); `grad` is empty.
    pub(crate) fn visit_stat<'a>(&'a mut self, name: String) -> ParamVisit<'a, S> {
        ParamVisit {
            name,
            dims: &self.dims,
            value: &mut self.value,
            grad: &mut [],
        }
    }
}

#[derive(Debug, Clone)]
struct StoreEntry<S> {
    name: String,
    kind: SlotKind,
    dims: Vec<usize>,
    value: Vec<S>,
    grad: Vec<S>,
}

/// Flat, ordered snapshot of a module's parameters and running statistics.
///
/// Entry names are unique; every trainable entry carries a gradient slot of
/// the same shape. The store is the interchange format between models, the
/// optimizer ([`super::adam_step`]), and the weight file.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: Vec<StoreEntry<S>>,
    by_name: std::collections::HashMap<String, usize>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: std::collections::HashMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        name: &str,
        kind: SlotKind,
        dims: Vec<usize>,
        value: Vec<S>,
        grad: Vec<S>,
    ) -> Result<()> {
        if self.by_name.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name {name}")));
        }
        if kind == SlotKind::Trainable && grad.len() != value.len() {
            return Err(Error::Contract(format!(
                "parameter {name}: gradient slot length {} != value length {}",
                grad.len(),
                value.len()
            )));
        }
        self.by_name.insert(name.to_string(), self.entries.len());
        self.entries.push(StoreEntry {
            name: name.to_string(),
            kind,
            dims,
            value,
            grad,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total trainable element count.
    pub fn trainable_len(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind == SlotKind::Trainable)
            .map(|e| e.value.len())
            .sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[S])> {
        self.by_name.get(name).map(|&i| {
            (
                self.entries[i].dims.as_slice(),
                self.entries[i].value.as_slice(),
            )
        })
    }

    pub fn kind(&self, name: &str) -> Option<SlotKind> {
        self.by_name.get(name).map(|&i| self.entries[i].kind)
    }

    pub(crate) fn iter_entries(
        &mut self,
    ) -> impl Iterator<Item = (&str, SlotKind, &mut Vec<S>, &Vec<S>)> {
        self.entries
            .iter_mut()
            .map(|e| (e.name.as_str(), e.kind, &mut e.value, &e.grad))
    }

    pub(crate) fn iter_values(&self) -> impl Iterator<Item = (&str, SlotKind, &[usize], &[S])> {
        self.entries.iter().map(|e| {
            (
                e.name.as_str(),
                e.kind,
                e.dims.as_slice(),
                e.value.as_slice(),
            )
        })
    }

    /// Snapshots a module's parameters and running statistics.
    pub fn export(module: &mut dyn Module<S>) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut err = None;
        module.visit_params("", &mut |p: ParamVisit<'_, S>| {
            if err.is_none() {
                err = store
                    .insert(
                        &p.name,
                        SlotKind::Trainable,
                        p.dims.to_vec(),
                        p.value.to_vec(),
                        p.grad.to_vec(),
                    )
                    .err();
            }
        });
        module.visit_state("", &mut |p: ParamVisit<'_, S>| {
            if err.is_none() {
                err = store
                    .insert(
                        &p.name,
                        SlotKind::Stats,
                        p.dims.to_vec(),
                        p.value.to_vec(),
                        vec![],
                    )
                    .err();
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(store),
        }
    }

    /// Writes values back into a module, shape-checked by name. Every slot in
    /// the module must be covered by the store.
    pub fn import_into(&self, module: &mut dyn Module<S>) -> Result<()> {
        let mut err: Option<Error> = None;
        let mut seen = 0usize;
        {
            let mut apply = |p: ParamVisit<'_, S>| {
                if err.is_some() {
                    return;
                }
                match self.by_name.get(&p.name) {
                    None => err = Some(Error::Contract(format!("store missing {}", p.name))),
                    Some(&i) => {
                        let e = &self.entries[i];
                        if e.dims != p.dims {
                            err = Some(Error::Dimension(format!(
                                "{}: stored dims {:?} != model dims {:?}",
                                p.name, e.dims, p.dims
                            )));
                        } else {
                            p.value.copy_from_slice(&e.value);
                            seen += 1;
                        }
                    }
                }
            };
            module.visit_params("", &mut apply);
            module.visit_state("", &mut apply);
        }
        if let Some(e) = err {
            return Err(e);
        }
        if seen != self.entries.len() {
            return Err(Error::Contract(format!(
                "store has {} entries, model consumed {seen}",
                self.entries.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_rejects_duplicates_and_missing_grad_slots() {
        let mut s = ParamStore::<f32>::new();
        s.insert(
            "w",
            SlotKind::Trainable,
            vec![2],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!(s
            .insert(
                "w",
                SlotKind::Trainable,
                vec![2],
                vec![1.0, 2.0],
                vec![0.0, 0.0]
            )
            .is_err());
        assert!(s
            .insert("v", SlotKind::Trainable, vec![2], vec![1.0, 2.0], vec![0.0])
            .is_err());
    }

    #[test]
    fn he_uniform_stays_in_bound_and_replays() {
        let dims = [4usize, 3, 3, 3];
        let fan_in = 27;
        let bound = (6.0 / fan_in as f64).sqrt();
        let a: Param<f32> = Param::he_uniform(&dims, fan_in, &mut crate::rng::seeded(1, 0));
        let b: Param<f32> = Param::he_uniform(&dims, fan_in, &mut crate::rng::seeded(1, 0));
        assert_eq!(a.value, b.value);
        assert!(a.value.iter().all(|v| (v.abs() as f64) < bound));
    }
}
