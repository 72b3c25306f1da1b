use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec4;

/// One axis of a rectangular lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// A rectangular lattice over a coordinate box, `count >= 5` points per axis.
///
/// Nodes are numbered row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

pub const MIN_POINTS: usize = 5;

impl ChartGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 4 {
            return Err(Error::Grid(format!("dimension {} not in 1..=4", axes.len())));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.count < MIN_POINTS {
                return Err(Error::Grid(format!(
                    "axis {k} has {} points, need at least {MIN_POINTS}",
                    a.count
                )));
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.hi > a.lo) {
                return Err(Error::Grid(format!("axis {k} interval [{}, {}] is degenerate", a.lo, a.hi)));
            }
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].count;
        }
        let len = axes.iter().map(|a| a.count).product();
        Ok(ChartGrid { axes, strides, len })
    }

    /// Same count on every axis.
    pub fn uniform(lo: &[f64], hi: &[f64], count: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("lo and hi differ in length".into()));
        }
        Self::new(
            lo.iter()
                .zip(hi)
                .map(|(&lo, &hi)| Axis { lo, hi, count })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        (a.hi - a.lo) / (a.count - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        self.axes.iter().map(|a| (a.hi - a.lo).powi(2)).sum::<f64>().sqrt()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 4] {
        let mut m = [0; 4];
        let mut r = idx;
        for k in 0..self.dim() {
            m[k] = r / self.strides[k];
            r %= self.strides[k];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        (0..self.dim()).map(|k| m[k] * self.strides[k]).sum()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let a = &self.axes[axis];
        if i + 1 == a.count {
            a.hi
        } else {
            a.lo + i as f64 * self.spacing(axis)
        }
    }

    /// Coordinates of node `idx` (unused slots are zero).
    pub fn point(&self, idx: usize) -> Vec4 {
        let m = self.multi_index(idx);
        let mut p = [0.0; 4];
        for k in 0..self.dim() {
            p[k] = self.coordinate(k, m[k]);
        }
        p
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(a, &v)| v >= a.lo && v <= a.hi)
    }

    /// True when the node has a neighbor on both sides along every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim()).all(|k| m[k] > 0 && m[k] + 1 < self.axes[k].count)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_interior(i)).collect()
    }

    /// Nodes at least `margin` steps away from every face. Quantities built
    /// from two successive grid differences are second order only here.
    pub fn nodes_with_margin(&self, margin: usize) -> Vec<usize> {
        (0..self.len)
            .filter(|&i| {
                let m = self.multi_index(i);
                (0..self.dim()).all(|k| m[k] >= margin && m[k] + margin < self.axes[k].count)
            })
            .collect()
    }

    /// The node nearest to the box center.
    pub fn center_node(&self) -> usize {
        let m: Vec<usize> = self.axes.iter().map(|a| a.count / 2).collect();
        self.flat_index(&m)
    }

    /// A grid with the same box and `count` points per axis.
    pub fn refined(&self, count: usize) -> Result<Self> {
        Self::new(self.axes.iter().map(|a| Axis { count, ..*a }).collect())
    }

    /// Cell index and fractional position for multilinear interpolation.
    pub(crate) fn locate(&self, x: &[f64]) -> ([usize; 4], Vec4) {
        let mut cell = [0; 4];
        let mut frac = [0.0; 4];
        for k in 0..self.dim() {
            let a = &self.axes[k];
            let s = ((x[k] - a.lo) / self.spacing(k)).clamp(0.0, (a.count - 1) as f64);
            let i = (s.floor() as usize).min(a.count - 2);
            cell[k] = i;
            frac[k] = s - i as f64;
        }
        (cell, frac)
    }
}
