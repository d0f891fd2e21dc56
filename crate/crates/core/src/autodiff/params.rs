use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{invalid, Result};

/// A named, row-major block of parameters inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat trainable parameters, their gradient accumulator and a name registry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<f64>,
    grads: Vec<f64>,
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a `rows × cols` block. `values` must yield exactly
    /// `rows * cols` numbers.
    pub fn register(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        values: impl IntoIterator<Item = f64>,
    ) -> Result<Range<usize>> {
        if self.entries.iter().any(|e| e.name == name) {
            return Err(invalid("parameter name", format!("`{name}` registered twice")));
        }
        let offset = self.params.len();
        self.params.extend(values);
        let got = self.params.len() - offset;
        if got != rows * cols {
            self.params.truncate(offset);
            return Err(crate::Error::Shape {
                what: "parameter block",
                expected: rows * cols,
                got,
            });
        }
        self.grads.resize(self.params.len(), 0.0);
        self.entries.push(ParamEntry {
            name: name.into(),
            rows,
            cols,
            offset,
        });
        Ok(offset..offset + got)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.entry(name).map(|e| &self.params[e.range()])
    }

    pub fn zero_grad(&mut self) {
        self.grads.fill(0.0);
    }

    /// Human-readable name of a flat index, e.g. `hedger.l1.w[2,5]`.
    pub fn name_of(&self, index: usize) -> String {
        match self.entries.iter().find(|e| e.range().contains(&index)) {
            Some(e) => {
                let k = index - e.offset;
                format!("{}[{},{}]", e.name, k / e.cols.max(1), k % e.cols.max(1))
            }
            None => format!("#{index}"),
        }
    }

    /// Copies the values of every entry whose name also exists in `other`
    /// with the same shape.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for e in &self.entries {
            let src = other
                .entry(&e.name)
                .ok_or_else(|| invalid("checkpoint", format!("missing parameter `{}`", e.name)))?;
            if (src.rows, src.cols) != (e.rows, e.cols) {
                return Err(invalid(
                    "checkpoint",
                    format!(
                        "parameter `{}` has shape {}x{}, expected {}x{}",
                        e.name, src.rows, src.cols, e.rows, e.cols
                    ),
                ));
            }
            self.params[e.range()].copy_from_slice(&other.params[src.range()]);
        }
        Ok(())
    }
}
