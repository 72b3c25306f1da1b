use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::ChartGrid;
use crate::error::{Error, Result};
use crate::linalg::{Mat4, Ten3, Ten4, Vec4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Up,
    Down,
}

/// A declared symmetry between two index slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

/// Components of a tensor at every node of a grid.
///
/// Node `idx` owns `n^rank` consecutive values, the last index fastest.
#[derive(Clone, Debug)]
pub struct TensorField {
    grid: ChartGrid,
    slots: Vec<Slot>,
    symmetries: Vec<Symmetry>,
    data: Arc<Vec<f64>>,
}

impl TensorField {
    pub fn new(grid: ChartGrid, slots: Vec<Slot>, symmetries: Vec<Symmetry>, data: Vec<f64>) -> Result<Self> {
        let per = grid.dim().pow(slots.len() as u32);
        if data.len() != per * grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} nodes of {} components",
                data.len(),
                grid.len(),
                per
            )));
        }
        for s in &symmetries {
            let (a, b) = match *s {
                Symmetry::Symmetric(a, b) | Symmetry::Antisymmetric(a, b) => (a, b),
            };
            if a >= slots.len() || b >= slots.len() || a == b || slots[a] != slots[b] {
                return Err(Error::InvalidArgument(format!("bad symmetry {s:?}")));
            }
        }
        Ok(TensorField {
            grid,
            slots,
            symmetries,
            data: Arc::new(data),
        })
    }

    /// Build by evaluating `f` at every node (in parallel, ordered).
    pub fn from_nodes(
        grid: ChartGrid,
        slots: Vec<Slot>,
        symmetries: Vec<Symmetry>,
        f: impl Fn(usize) -> Result<Vec<f64>> + Sync,
    ) -> Result<Self> {
        let chunks = (0..grid.len())
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()?;
        let data = chunks.concat();
        Self::new(grid, slots, symmetries, data)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }

    pub fn components_per_node(&self) -> usize {
        self.dim().pow(self.rank() as u32)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        let per = self.components_per_node();
        &self.data[idx * per..(idx + 1) * per]
    }

    pub fn get(&self, idx: usize, index: &[usize]) -> f64 {
        let n = self.dim();
        let off = index.iter().fold(0, |acc, &i| acc * n + i);
        self.node(idx)[off]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest violation of the declared symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let r = self.rank();
        let per = self.components_per_node();
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let node = self.node(idx);
            for off in 0..per {
                let mut index = vec![0; r];
                let mut t = off;
                for s in (0..r).rev() {
                    index[s] = t % n;
                    t /= n;
                }
                for sym in &self.symmetries {
                    let (a, b, sign) = match *sym {
                        Symmetry::Symmetric(a, b) => (a, b, 1.0),
                        Symmetry::Antisymmetric(a, b) => (a, b, -1.0),
                    };
                    let mut sw = index.clone();
                    sw.swap(a, b);
                    let o2 = sw.iter().fold(0, |acc, &i| acc * n + i);
                    worst = worst.max((node[off] - sign * node[o2]).abs());
                }
            }
        }
        worst
    }
}

pub fn flatten_vec(v: &Vec4, n: usize) -> Vec<f64> {
    v[..n].to_vec()
}

pub fn flatten_mat(m: &Mat4, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for row in m.iter().take(n) {
        out.extend_from_slice(&row[..n]);
    }
    out
}

pub fn flatten_ten3(t: &Ten3, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n * n);
    for a in t.iter().take(n) {
        out.extend(flatten_mat(a, n));
    }
    out
}

pub fn flatten_ten4(t: &Ten4, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n.pow(4));
    for a in t.iter().take(n) {
        out.extend(flatten_ten3(a, n));
    }
    out
}

pub fn unflatten_ten4(v: &[f64], n: usize) -> Ten4 {
    let mut t = crate::linalg::ZERO4;
    let mut it = v.iter();
    for a in t.iter_mut().take(n) {
        for b in a.iter_mut().take(n) {
            for c in b.iter_mut().take(n) {
                for d in c.iter_mut().take(n) {
                    *d = *it.next().expect("n^4 values");
                }
            }
        }
    }
    t
}
