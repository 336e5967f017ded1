use rand::seq::index;
use rand::Rng;

use super::{bilinear_resize, normalize, RawClass};
use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{stream, Purpose};

/// One task: a class name and its normalized `size × size` images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageClass {
    pub name: String,
    pub images: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// Square grayscale classes with values in [−1, 1] and a train/validation
/// partition of class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    classes: Vec<ImageClass>,
    size: usize,
    train: Vec<usize>,
    validation: Vec<usize>,
}

impl TaskDataset {
    /// All classes start in the training split.
    pub fn new(classes: Vec<ImageClass>, size: usize) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for c in &classes {
            if c.images.is_empty() {
                return Err(Error::Malformed(format!("class `{}` has no images", c.name)));
            }
            for im in &c.images {
                if im.len() != size * size {
                    return Err(Error::ShapeMismatch(format!("class `{}`: image of {} values, expected {size}²", c.name, im.len())));
                }
                if im.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                    return Err(Error::Malformed(format!("class `{}` has values outside [-1, 1]", c.name)));
                }
            }
        }
        let train = (0..classes.len()).collect();
        Ok(TaskDataset { classes, size, train, validation: Vec::new() })
    }

    /// Normalizes raw classes and resizes every image to `size × size`.
    pub fn from_raw(raw: &[RawClass], size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidSize(size));
        }
        let classes = raw
            .iter()
            .map(|c| ImageClass {
                name: c.name.clone(),
                images: c
                    .images
                    .iter()
                    .map(|im| {
                        let x: Vec<f64> = im.pixels.iter().map(|&p| normalize(p)).collect();
                        let y = if im.height == size && im.width == size {
                            x
                        } else {
                            bilinear_resize(&x, im.height, im.width, size, size)
                        };
                        y.into_iter().map(|v| v as f32).collect()
                    })
                    .collect(),
            })
            .collect();
        TaskDataset::new(classes, size)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn classes(&self) -> &[ImageClass] {
        &self.classes
    }

    pub fn class(&self, id: usize) -> &ImageClass {
        &self.classes[id]
    }

    pub fn num_images(&self) -> usize {
        self.classes.iter().map(|c| c.images.len()).sum()
    }

    pub fn ids(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
        }
    }

    /// Moves `n_validation` uniformly chosen classes to validation,
    /// deterministically for `seed`.
    pub fn split_classes(mut self, n_validation: usize, seed: u64) -> Result<Self> {
        let total = self.classes.len();
        if n_validation >= total && n_validation > 0 {
            return Err(Error::TooManyValidation { requested: n_validation, available: total });
        }
        let mut rng = stream(seed, Purpose::Split);
        let mut val = index::sample(&mut rng, total, n_validation).into_vec();
        val.sort_unstable();
        self.set_validation(val);
        Ok(self)
    }

    /// Explicit validation class ids, e.g. the digit 9 for MNIST.
    pub fn with_validation_classes(mut self, ids: &[usize]) -> Result<Self> {
        let total = self.classes.len();
        let mut val = ids.to_vec();
        val.sort_unstable();
        val.dedup();
        if val.len() >= total && !val.is_empty() {
            return Err(Error::TooManyValidation { requested: val.len(), available: total });
        }
        if let Some(&bad) = val.iter().find(|&&i| i >= total) {
            return Err(Error::Malformed(format!("validation class id {bad} out of range 0..{total}")));
        }
        self.set_validation(val);
        Ok(self)
    }

    fn set_validation(&mut self, val: Vec<usize>) {
        self.train = (0..self.classes.len()).filter(|i| val.binary_search(i).is_err()).collect();
        self.validation = val;
    }

    /// Uniform class id from `split`.
    pub fn sample_task<R: Rng + ?Sized>(&self, split: Split, rng: &mut R) -> Result<usize> {
        let ids = self.ids(split);
        if ids.is_empty() {
            return Err(if self.classes.is_empty() { Error::EmptyDataset } else { Error::EmptySplit });
        }
        Ok(ids[rng.random_range(0..ids.len())])
    }

    /// `n` images of class `id` as `[n, 1, S, S]`: without replacement, or
    /// with replacement when the class has fewer than `n` images.
    pub fn sample_images<T: Real, R: Rng + ?Sized>(&self, id: usize, n: usize, rng: &mut R) -> Array<T> {
        let images = &self.classes[id].images;
        let picks: Vec<usize> = if images.len() >= n {
            index::sample(rng, images.len(), n).into_vec()
        } else {
            (0..n).map(|_| rng.random_range(0..images.len())).collect()
        };
        self.stack(id, &picks)
    }

    /// Every image of class `id` as `[count, 1, S, S]`.
    pub fn class_array<T: Real>(&self, id: usize) -> Array<T> {
        let all: Vec<usize> = (0..self.classes[id].images.len()).collect();
        self.stack(id, &all)
    }

    pub fn stack<T: Real>(&self, id: usize, picks: &[usize]) -> Array<T> {
        let images = &self.classes[id].images;
        let data = picks.iter().flat_map(|&i| images[i].iter().map(|&v| T::of(v as f64))).collect();
        Array::new(vec![picks.len(), 1, self.size, self.size], data).expect("stacked images")
    }
}
