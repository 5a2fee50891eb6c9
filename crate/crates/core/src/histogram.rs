//! Uniformly binned weighted histograms with under/overflow and sum of squared weights.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistogramError {
    #[error("invalid binning for `{variable}`: need nbins >= 1 and finite lo < hi")]
    InvalidSpec { variable: String },
    #[error("value and weight columns differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("histograms have different binning")]
    SpecMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    /// Ntuple column to histogram.
    pub variable: String,
    pub nbins: u32,
    pub lo: f64,
    pub hi: f64,
}

impl HistogramSpec {
    pub fn new(variable: impl Into<String>, nbins: u32, lo: f64, hi: f64) -> Result<Self, HistogramError> {
        let spec = HistogramSpec {
            variable: variable.into(),
            nbins,
            lo,
            hi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HistogramError> {
        if self.nbins == 0 || !self.lo.is_finite() || !self.hi.is_finite() || self.lo >= self.hi {
            return Err(HistogramError::InvalidSpec {
                variable: self.variable.clone(),
            });
        }
        Ok(())
    }

    /// Bin lower edge `i`; `i == nbins` gives the upper edge.
    pub fn edge(&self, i: u32) -> f64 {
        self.lo + (self.hi - self.lo) * (i as f64) / (self.nbins as f64)
    }
}

/// Where a value lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Underflow,
    Bin(usize),
    Overflow,
}

impl HistogramSpec {
    /// Lower edges inclusive, upper edges exclusive. NaN goes to overflow.
    pub fn locate(&self, v: f64) -> Slot {
        if v < self.lo {
            Slot::Underflow
        } else if v >= self.hi || v.is_nan() {
            Slot::Overflow
        } else {
            let i = ((v - self.lo) / (self.hi - self.lo) * self.nbins as f64) as usize;
            // rounding can push values just below `hi` onto nbins
            Slot::Bin(i.min(self.nbins as usize - 1))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub contents: Vec<f64>,
    pub sumw2: Vec<f64>,
    pub underflow: f64,
    pub underflow_sumw2: f64,
    pub overflow: f64,
    pub overflow_sumw2: f64,
    /// Unweighted number of fills.
    pub entries: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Result<Self, HistogramError> {
        spec.validate()?;
        let n = spec.nbins as usize;
        Ok(Histogram {
            spec,
            contents: vec![0.0; n],
            sumw2: vec![0.0; n],
            underflow: 0.0,
            underflow_sumw2: 0.0,
            overflow: 0.0,
            overflow_sumw2: 0.0,
            entries: 0,
        })
    }

    pub fn fill(&mut self, v: f64, w: f64) {
        let (c, s) = match self.spec.locate(v) {
            Slot::Underflow => (&mut self.underflow, &mut self.underflow_sumw2),
            Slot::Overflow => (&mut self.overflow, &mut self.overflow_sumw2),
            Slot::Bin(i) => (&mut self.contents[i], &mut self.sumw2[i]),
        };
        *c += w;
        *s += w * w;
        self.entries += 1;
    }

    /// Adds another histogram with identical binning bin by bin.
    pub fn merge(&mut self, other: &Histogram) -> Result<(), HistogramError> {
        if self.spec.nbins != other.spec.nbins
            || self.spec.lo.to_bits() != other.spec.lo.to_bits()
            || self.spec.hi.to_bits() != other.spec.hi.to_bits()
        {
            return Err(HistogramError::SpecMismatch);
        }
        for (a, b) in self.contents.iter_mut().zip(&other.contents) {
            *a += b;
        }
        for (a, b) in self.sumw2.iter_mut().zip(&other.sumw2) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.underflow_sumw2 += other.underflow_sumw2;
        self.overflow += other.overflow;
        self.overflow_sumw2 += other.overflow_sumw2;
        self.entries += other.entries;
        Ok(())
    }

    /// Multiplies every content by `k` and every sumw2 by `k * k`.
    pub fn scale(&mut self, k: f64) {
        for c in &mut self.contents {
            *c *= k;
        }
        for s in &mut self.sumw2 {
            *s *= k * k;
        }
        self.underflow *= k;
        self.overflow *= k;
        self.underflow_sumw2 *= k * k;
        self.overflow_sumw2 *= k * k;
    }

    /// Underflow + overflow + all bin contents.
    pub fn total(&self) -> f64 {
        self.underflow + self.overflow + self.contents.iter().sum::<f64>()
    }
}

/// Fills a histogram from a value column and a weight column, in row order.
pub fn fill_histogram(values: &[f64], weights: &[f64], spec: &HistogramSpec) -> Result<Histogram, HistogramError> {
    if values.len() != weights.len() {
        return Err(HistogramError::LengthMismatch {
            values: values.len(),
            weights: weights.len(),
        });
    }
    let mut h = Histogram::new(spec.clone())?;
    for (&v, &w) in values.iter().zip(weights) {
        h.fill(v, w);
    }
    Ok(h)
}
