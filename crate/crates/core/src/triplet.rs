//! Training triplets `(x, x*, y)` where any field may be missing, and the
//! clean-subset filter that routes them through the pipeline.

use std::collections::HashSet;

use bitflags::bitflags;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, MathError};
use crate::model::Task;

bitflags! {
    /// Which fields of a [`Triplet`] are present (or required).
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct Fields: u8 {
        const X = 0b001;
        const X_STAR = 0b010;
        const Y = 0b100;
    }
}

/// Anything with optional fields that [`clean_subset`] can filter.
pub trait Partial {
    fn present(&self) -> Fields;
}

/// Elements of `items` whose `required` fields are all present, in order.
pub fn clean_subset<T: Partial + Clone>(items: &[T], required: Fields) -> Vec<T> {
    items
        .iter()
        .filter(|v| v.present().contains(required))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    /// Stable identifier; soft labels and shuffles are keyed by it.
    pub id: u64,
    pub x: Option<Vec<f64>>,
    pub x_star: Option<Vec<f64>>,
    /// One-hot label for classification, target vector for regression.
    pub y: Option<Vec<f64>>,
}

impl Partial for Triplet {
    fn present(&self) -> Fields {
        let mut f = Fields::empty();
        f.set(Fields::X, self.x.is_some());
        f.set(Fields::X_STAR, self.x_star.is_some());
        f.set(Fields::Y, self.y.is_some());
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    /// Regular feature dimension.
    pub d: usize,
    /// Privileged feature dimension.
    pub d_star: usize,
    /// Number of classes, or of regression outputs.
    pub c: usize,
    pub task: Task,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("example {id}: {field} has dimension {actual}, header says {expected}")]
    Dimension {
        id: u64,
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("example {0} has no fields")]
    Empty(u64),
    #[error("duplicate example id {0}")]
    DuplicateId(u64),
    #[error("example {id}: {source}")]
    Value { id: u64, source: MathError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    header: Header,
    examples: Vec<Triplet>,
}

fn check_field(id: u64, field: &'static str, v: &Option<Vec<f64>>, expected: usize) -> Result<(), DatasetError> {
    if let Some(v) = v {
        if v.len() != expected {
            return Err(DatasetError::Dimension {
                id,
                field,
                expected,
                actual: v.len(),
            });
        }
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            return Err(DatasetError::Value {
                id,
                source: MathError::NonFinite(k),
            });
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(header: Header, examples: Vec<Triplet>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(examples.len());
        for t in &examples {
            if !seen.insert(t.id) {
                return Err(DatasetError::DuplicateId(t.id));
            }
            if t.present().is_empty() {
                return Err(DatasetError::Empty(t.id));
            }
            check_field(t.id, "x", &t.x, header.d)?;
            check_field(t.id, "x*", &t.x_star, header.d_star)?;
            check_field(t.id, "y", &t.y, header.c)?;
            if let (Task::Classification, Some(y)) = (header.task, &t.y) {
                math::validate_simplex(y).map_err(|source| DatasetError::Value { id: t.id, source })?;
            }
        }
        Ok(Dataset { header, examples })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn examples(&self) -> &[Triplet] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The same header over a subset of this data set's examples.
    pub fn with_examples(&self, examples: Vec<Triplet>) -> Result<Self, DatasetError> {
        Dataset::new(self.header, examples)
    }

    pub fn clean(&self, required: Fields) -> Dataset {
        Dataset {
            header: self.header,
            examples: clean_subset(&self.examples, required),
        }
    }

    /// Splits into the first `n` examples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.examples.len());
        let (a, b) = self.examples.split_at(n);
        (
            Dataset { header: self.header, examples: a.to_vec() },
            Dataset { header: self.header, examples: b.to_vec() },
        )
    }

    /// Stacks one field into a row matrix, skipping examples where it is
    /// missing. Returns the ids in row order.
    pub fn matrix(&self, field: Fields) -> (Vec<u64>, Array2<f64>) {
        type Getter = fn(&Triplet) -> Option<&Vec<f64>>;
        let (width, get): (usize, Getter) = if field == Fields::X {
            (self.header.d, |t| t.x.as_ref())
        } else if field == Fields::X_STAR {
            (self.header.d_star, |t| t.x_star.as_ref())
        } else {
            (self.header.c, |t| t.y.as_ref())
        };
        let rows: Vec<&Triplet> = self.examples.iter().filter(|t| get(t).is_some()).collect();
        let mut m = Array2::zeros((rows.len(), width));
        for (mut r, t) in m.outer_iter_mut().zip(&rows) {
            r.assign(&ndarray::ArrayView1::from(&get(t).expect("filtered")[..]));
        }
        (rows.iter().map(|t| t.id).collect(), m)
    }

    /// Class indices (argmax of each present label), in example order.
    pub fn class_labels(&self) -> Vec<usize> {
        self.examples
            .iter()
            .filter_map(|t| t.y.as_ref().map(|y| math::argmax(y)))
            .collect()
    }
}
