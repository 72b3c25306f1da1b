//! File formats.
//!
//! Grid-field files are JSON:
//!
//! ```json
//! {"dim": 2, "axes": [{"lo": 0, "hi": 1, "count": 9}, ...],
//!  "components": {"g_00": "1 + x1^2", "g_11": {"samples": [...]}},
//!  "signature": "riemannian", "params": {"M": 1}}
//! ```
//!
//! Metric components are keyed `g_ij` (i <= j, missing entries are zero);
//! connection components `G^i_jk` (j <= k). Samples are row-major over the
//! axes, last axis fastest.
//!
//! Geodesic families are JSON lines: a header `{"dim", "form", "count"}` with
//! `form` either `jets` or `samples`, then one record per line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_with, Expr, ExpressionMatrix, Params, Symbols};
use crate::geodesic::{Curve, GeodesicFamily, GeodesicJet};
use crate::linalg::{Mat4, Ten3, ZERO3};
use crate::tensor::{Axis, ChartGrid, ConnectionField, ExprConnection, MetricField, Signature};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Component {
    Expr(String),
    Samples { samples: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFieldFile {
    pub dim: usize,
    pub axes: Vec<Axis>,
    pub components: BTreeMap<String, Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: Params,
}

pub fn metric_key(i: usize, j: usize) -> String {
    format!("g_{i}{j}")
}

pub fn connection_key(i: usize, j: usize, k: usize) -> String {
    format!("G^{i}_{j}{k}")
}

fn symbols(n: usize, params: &Params) -> Symbols {
    Symbols::coords(n).params(params.keys())
}

impl GridFieldFile {
    pub fn grid(&self) -> Result<ChartGrid> {
        if self.axes.len() != self.dim {
            return Err(Error::Format(format!("{} axes for dim {}", self.axes.len(), self.dim)));
        }
        ChartGrid::new(self.axes.clone())
    }

    fn check_keys(&self, valid: &[String]) -> Result<()> {
        for k in self.components.keys() {
            if !valid.contains(k) {
                return Err(Error::Format(format!("unexpected component `{k}`")));
            }
        }
        Ok(())
    }

    fn all_expressions(&self) -> bool {
        self.components.values().all(|c| matches!(c, Component::Expr(_)))
    }

    /// Component values at every node (expressions are evaluated).
    fn samples(&self, key: &str, grid: &ChartGrid) -> Result<Vec<f64>> {
        match self.components.get(key) {
            None => Ok(vec![0.0; grid.len()]),
            Some(Component::Samples { samples }) => {
                if samples.len() != grid.len() {
                    return Err(Error::Format(format!(
                        "`{key}` has {} samples, grid has {} nodes",
                        samples.len(),
                        grid.len()
                    )));
                }
                Ok(samples.clone())
            }
            Some(Component::Expr(_)) => {
                let e = self.expression(key)?;
                (0..grid.len())
                    .map(|i| {
                        let p = grid.point(i);
                        e.eval(&p[..self.dim], &self.params).map_err(|err| Error::eval(&p[..self.dim], err))
                    })
                    .collect()
            }
        }
    }

    fn expression(&self, key: &str) -> Result<Expr> {
        match self.components.get(key) {
            None => Ok(Expr::zero()),
            Some(Component::Expr(s)) => parse_with(s, &symbols(self.dim, &self.params))
                .map_err(|e| Error::Format(format!("component `{key}`: {e}"))),
            Some(Component::Samples { .. }) => Err(Error::Format(format!("`{key}` is sampled"))),
        }
    }

    pub fn from_metric_expressions(grid: &ChartGrid, m: &ExpressionMatrix, params: &Params) -> Self {
        let n = m.dim();
        let mut components = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let e = m.get(i, j);
                if !e.is_zero() {
                    components.insert(metric_key(i, j), Component::Expr(e.to_string()));
                }
            }
        }
        let signature = MetricField::from_expressions(grid.clone(), m, params).ok().map(|f| f.signature());
        GridFieldFile {
            dim: n,
            axes: grid.axes().to_vec(),
            components,
            signature,
            params: params.clone(),
        }
    }

    /// Node samples of any metric field.
    pub fn from_metric(g: &MetricField) -> Result<Self> {
        let grid = g.grid();
        let n = g.dim();
        let vals = (0..grid.len()).map(|i| g.value_at_node(i)).collect::<Result<Vec<Mat4>>>()?;
        let mut components = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                components.insert(
                    metric_key(i, j),
                    Component::Samples {
                        samples: vals.iter().map(|v| v[i][j]).collect(),
                    },
                );
            }
        }
        Ok(GridFieldFile {
            dim: n,
            axes: grid.axes().to_vec(),
            components,
            signature: Some(g.signature()),
            params: Params::new(),
        })
    }

    pub fn from_connection(gamma: &ConnectionField) -> Result<Self> {
        let grid = gamma.grid();
        let n = gamma.dim();
        let vals = (0..grid.len()).map(|i| gamma.value_at_node(i)).collect::<Result<Vec<Ten3>>>()?;
        let mut components = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    components.insert(
                        connection_key(i, j, k),
                        Component::Samples {
                            samples: vals.iter().map(|v| v[i][j][k]).collect(),
                        },
                    );
                }
            }
        }
        Ok(GridFieldFile {
            dim: n,
            axes: grid.axes().to_vec(),
            components,
            signature: None,
            params: Params::new(),
        })
    }

    pub fn metric_expressions(&self) -> Result<ExpressionMatrix> {
        let n = self.dim;
        let mut m = vec![vec![Expr::zero(); n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate().skip(i) {
                *e = self.expression(&metric_key(i, j))?;
            }
        }
        Ok(ExpressionMatrix::symmetric_from_upper(n, |i, j| m[i][j].clone()))
    }

    /// Expression components give an analytic field, otherwise node samples.
    pub fn to_metric(&self) -> Result<MetricField> {
        let grid = self.grid()?;
        let n = self.dim;
        let keys: Vec<String> = (0..n).flat_map(|i| (i..n).map(move |j| metric_key(i, j))).collect();
        self.check_keys(&keys)?;
        if self.components.is_empty() {
            return Err(Error::Format("no metric components".into()));
        }
        if self.all_expressions() {
            return MetricField::from_expressions(grid, &self.metric_expressions()?, &self.params);
        }
        let mut vals = vec![[[0.0; 4]; 4]; grid.len()];
        for i in 0..n {
            for j in i..n {
                for (v, s) in vals.iter_mut().zip(self.samples(&metric_key(i, j), &grid)?) {
                    v[i][j] = s;
                    v[j][i] = s;
                }
            }
        }
        MetricField::sampled(grid, vals)
    }

    pub fn to_connection(&self) -> Result<ConnectionField> {
        let grid = self.grid()?;
        let n = self.dim;
        let keys: Vec<String> = (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| (j..n).map(move |k| connection_key(i, j, k))))
            .collect();
        self.check_keys(&keys)?;
        if self.all_expressions() {
            let mut comps = Vec::with_capacity(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        comps.push(self.expression(&connection_key(i, j.min(k), j.max(k)))?);
                    }
                }
            }
            let model = ExprConnection::new(n, comps, &self.params)?;
            return ConnectionField::from_model(grid, Arc::new(model));
        }
        let mut vals = vec![ZERO3; grid.len()];
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    for (v, s) in vals.iter_mut().zip(self.samples(&connection_key(i, j, k), &grid)?) {
                        v[i][j][k] = s;
                        v[i][k][j] = s;
                    }
                }
            }
        }
        ConnectionField::sampled(grid, vals)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_grid_field(path: &Path) -> Result<GridFieldFile> {
    read_json(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyForm {
    Jets,
    Samples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyHeader {
    pub dim: usize,
    pub form: FamilyForm,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub curve_id: usize,
    pub t: f64,
    pub x: Vec<f64>,
    /// Marks the sample where jets are to be estimated.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub anchor: bool,
}

/// JSONL text for a family: jets if present, otherwise raw samples.
pub fn family_to_jsonl(family: &GeodesicFamily) -> Result<String> {
    let enc = |e: serde_json::Error| Error::Format(e.to_string());
    let mut out = String::new();
    if !family.jets.is_empty() {
        let h = FamilyHeader {
            dim: family.dim,
            form: FamilyForm::Jets,
            count: family.jets.len(),
        };
        out += &serde_json::to_string(&h).map_err(enc)?;
        out.push('\n');
        for j in &family.jets {
            out += &serde_json::to_string(j).map_err(enc)?;
            out.push('\n');
        }
    } else {
        let count = family.curves.iter().map(|c| c.len()).sum();
        let h = FamilyHeader {
            dim: family.dim,
            form: FamilyForm::Samples,
            count,
        };
        out += &serde_json::to_string(&h).map_err(enc)?;
        out.push('\n');
        for c in &family.curves {
            let anchor = c.nearest(c.t0);
            for (k, (t, x)) in c.t.iter().zip(&c.x).enumerate() {
                let r = SampleRecord {
                    curve_id: c.id,
                    t: *t,
                    x: x[..c.n].to_vec(),
                    anchor: k == anchor,
                };
                out += &serde_json::to_string(&r).map_err(enc)?;
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_family(path: &Path, family: &GeodesicFamily) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(family_to_jsonl(family)?.as_bytes())?;
    Ok(())
}

/// Read a family; sampled curves get jets estimated at their anchor sample
/// (the middle sample when none is marked).
pub fn read_family(path: &Path) -> Result<GeodesicFamily> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let bad = |no: usize, e: serde_json::Error| Error::Format(format!("{}:{}: {e}", path.display(), no + 1));
    let header: FamilyHeader = match lines.next() {
        Some((no, l)) => serde_json::from_str(&l?).map_err(|e| bad(no, e))?,
        None => return Err(Error::Format(format!("{}: empty family file", path.display()))),
    };
    let n = header.dim;
    let check = |no: usize, len: usize| {
        if len != n {
            Err(Error::Format(format!("{}:{}: expected {n} components", path.display(), no + 1)))
        } else {
            Ok(())
        }
    };
    let mut family = GeodesicFamily {
        dim: n,
        curves: Vec::new(),
        jets: Vec::new(),
    };
    match header.form {
        FamilyForm::Jets => {
            for (no, l) in lines {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                let j: GeodesicJet = serde_json::from_str(&l).map_err(|e| bad(no, e))?;
                check(no, j.x.len())?;
                check(no, j.v.len())?;
                check(no, j.a.len())?;
                family.jets.push(j);
            }
        }
        FamilyForm::Samples => {
            let mut by_curve: BTreeMap<usize, (Vec<SampleRecord>, Option<f64>)> = BTreeMap::new();
            for (no, l) in lines {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                let r: SampleRecord = serde_json::from_str(&l).map_err(|e| bad(no, e))?;
                check(no, r.x.len())?;
                let e = by_curve.entry(r.curve_id).or_default();
                if r.anchor {
                    e.1 = Some(r.t);
                }
                e.0.push(r);
            }
            for (id, (mut recs, anchor)) in by_curve {
                recs.sort_by(|a, b| a.t.total_cmp(&b.t));
                let t0 = anchor.unwrap_or(recs[recs.len() / 2].t);
                let pad = |x: &[f64]| {
                    let mut p = [0.0; 4];
                    p[..n].copy_from_slice(x);
                    p
                };
                family.curves.push(Curve {
                    id,
                    n,
                    t0,
                    t: recs.iter().map(|r| r.t).collect(),
                    x: recs.iter().map(|r| pad(&r.x)).collect(),
                    v: vec![[0.0; 4]; recs.len()],
                });
            }
            family = family.with_jets_from_curves()?;
            // the jet position is the anchor sample itself
            for (j, c) in family.jets.iter_mut().zip(&family.curves) {
                j.x = c.x[c.nearest(c.t0)][..n].to_vec();
            }
        }
    }
    if family.jets.len() + family.curves.len() == 0 {
        return Err(Error::Format(format!("{}: no records", path.display())));
    }
    Ok(family)
}

/// Parse a grid spec: `"lo:hi:count,lo:hi:count,..."`, or `"count"` to reuse
/// the bounds of `base`.
pub fn parse_grid_spec(spec: &str, base: Option<&ChartGrid>) -> Result<ChartGrid> {
    let spec = spec.trim();
    if let Ok(count) = spec.parse::<usize>() {
        return match base {
            Some(b) => b.refined(count),
            None => Err(Error::InvalidArgument("a bare point count needs a default chart".into())),
        };
    }
    let axes = spec
        .split(',')
        .map(|a| {
            let p: Vec<&str> = a.split(':').collect();
            if p.len() != 3 {
                return Err(Error::InvalidArgument(format!("axis `{a}` is not lo:hi:count")));
            }
            let f = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number `{s}` in grid spec")))
            };
            let count = p[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad count `{}` in grid spec", p[2])))?;
            Ok(Axis {
                lo: f(p[0])?,
                hi: f(p[1])?,
                count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ChartGrid::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn metric_round_trip() {
        let grid = fixtures::schwarzschild_chart(1.0, 5).unwrap();
        let p = fixtures::schwarzschild_params(1.0);
        let f = GridFieldFile::from_metric_expressions(&grid, &fixtures::schwarzschild(), &p);
        let text = to_json(&f).unwrap();
        let back: GridFieldFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let g = back.to_metric().unwrap();
        let h = MetricField::from_expressions(grid.clone(), &fixtures::schwarzschild(), &p).unwrap();
        for i in 0..grid.len() {
            assert_eq!(g.value_at_node(i).unwrap(), h.value_at_node(i).unwrap());
        }
        let s = GridFieldFile::from_metric(&h).unwrap().to_metric().unwrap();
        assert_eq!(s.value_at_node(7).unwrap(), h.value_at_node(7).unwrap());
    }

    #[test]
    fn grid_specs() {
        let g = parse_grid_spec("0:1:5, -1:1:9", None).unwrap();
        assert_eq!(g.len(), 45);
        assert!(parse_grid_spec("0:1", None).is_err());
        assert!(parse_grid_spec("9", None).is_err());
    }

    #[test]
    fn unexpected_component() {
        let mut f = GridFieldFile::from_metric_expressions(
            &parse_grid_spec("0:1:5,0:1:5", None).unwrap(),
            &ExpressionMatrix::identity(2),
            &Params::new(),
        );
        f.components.insert("g_22".into(), Component::Expr("1".into()));
        assert!(f.to_metric().is_err());
    }
}
