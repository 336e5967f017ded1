use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{numel, Array, Gradients, Graph, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// How a segment is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// He fan-in normal initialization.
    Weight { fan_in: usize },
    Bias,
    /// PReLU negative slope, initialized to 0.25.
    Slope,
    /// Layer-norm gain, initialized to 1.
    Gain,
    /// Layer-norm shift, initialized to 0.
    Shift,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        numel(&self.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named, contiguous segments over one flat parameter vector.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
    total_len: usize,
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments
    }
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], kind: SegmentKind) {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate segment {name}");
        let seg = Segment { name: name.clone(), shape: shape.to_vec(), offset: self.total_len, kind };
        self.total_len += seg.len();
        self.index.insert(name, self.segments.len());
        self.segments.push(seg);
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.index.get(name).map(|&i| &self.segments[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }
}

/// The flattened weights of one network.
#[derive(Debug, Clone)]
pub struct ParameterSet<T> {
    layout: Arc<Layout>,
    values: Vec<T>,
}

impl<T: Real> PartialEq for ParameterSet<T> {
    fn eq(&self, other: &Self) -> bool {
        *self.layout == *other.layout && self.values == other.values
    }
}

impl<T: Real> ParameterSet<T> {
    pub fn from_flat(layout: Arc<Layout>, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::LayoutMismatch);
        }
        Ok(ParameterSet { layout, values })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let values = vec![T::zero(); layout.total_len()];
        ParameterSet { layout, values }
    }

    /// Deterministic initialization for a given rng state.
    pub fn init<R: Rng + ?Sized>(layout: Arc<Layout>, rng: &mut R) -> Self {
        let mut values = vec![T::zero(); layout.total_len()];
        for seg in layout.segments() {
            let dst = &mut values[seg.range()];
            match seg.kind {
                SegmentKind::Weight { fan_in } => {
                    let std = (2.0 / fan_in as f64).sqrt();
                    for v in dst.iter_mut() {
                        let n: f64 = StandardNormal.sample(rng);
                        *v = T::of(n * std);
                    }
                }
                SegmentKind::Bias | SegmentKind::Shift => {}
                SegmentKind::Slope => dst.fill(T::of(0.25)),
                SegmentKind::Gain => dst.fill(T::one()),
            }
        }
        ParameterSet { layout, values }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flat(&self) -> &[T] {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<T> {
        self.values
    }

    pub fn segment(&self, name: &str) -> Option<&[T]> {
        self.layout.segment(name).map(|s| &self.values[s.range()])
    }

    /// Per-segment arrays, the unflattened view.
    pub fn unflatten(&self) -> Vec<(String, Array<T>)> {
        self.layout
            .segments()
            .iter()
            .map(|s| (s.name.clone(), Array::new(s.shape.clone(), self.values[s.range()].to_vec()).expect("segment")))
            .collect()
    }

    /// Inverse of [`ParameterSet::unflatten`].
    pub fn flatten(layout: Arc<Layout>, parts: &[(String, Array<T>)]) -> Result<Self> {
        if parts.len() != layout.segments().len() {
            return Err(Error::LayoutMismatch);
        }
        let mut values = Vec::with_capacity(layout.total_len());
        for (seg, (name, arr)) in layout.segments().iter().zip(parts) {
            if &seg.name != name || seg.shape != arr.shape() {
                return Err(Error::LayoutMismatch);
            }
            values.extend_from_slice(arr.data());
        }
        ParameterSet::from_flat(layout, values)
    }

    pub fn same_layout(&self, other: &ParameterSet<T>) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn has_layout(&self, layout: &Arc<Layout>) -> bool {
        Arc::ptr_eq(&self.layout, layout) || *self.layout == **layout
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet { layout: self.layout.clone(), values: self.values.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    /// Registers every segment as a leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph<T>, trainable: bool) -> Bound {
        let vars = self
            .layout
            .segments()
            .iter()
            .map(|s| {
                let arr = Array::new(s.shape.clone(), self.values[s.range()].to_vec()).expect("segment");
                graph.leaf(arr, trainable)
            })
            .collect();
        Bound { layout: self.layout.clone(), vars }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
    }
}

/// Graph handles for a bound [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct Bound {
    layout: Arc<Layout>,
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        let i = self.layout.position(name).unwrap_or_else(|| panic!("no parameter segment `{name}`"));
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Flattens gradients for every segment in layout order, zero where a
    /// segment did not influence the loss.
    pub fn flat_grads<T: Real>(&self, grads: &Gradients<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.layout.total_len());
        for (seg, v) in self.layout.segments().iter().zip(&self.vars) {
            match grads.get(*v) {
                Some(g) => out.extend_from_slice(g.data()),
                None => out.extend(std::iter::repeat(T::zero()).take(seg.len())),
            }
        }
        out
    }
}

/// Elementwise `phi − w`, the Reptile pseudo-gradient.
pub fn params_delta<T: Real>(phi: &ParameterSet<T>, w: &ParameterSet<T>) -> Result<Vec<T>> {
    if !phi.same_layout(w) {
        return Err(Error::LayoutMismatch);
    }
    Ok(phi.flat().iter().zip(w.flat()).map(|(&a, &b)| a - b).collect())
}
