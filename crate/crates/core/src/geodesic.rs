//! Geodesic integration, reparameterization, jet estimation and sampled families.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{subsets, Expr, Func, Params};
use crate::linalg::{Ten3, Vec4};
use crate::tensor::{ChartGrid, ConnectionField};

/// Position, velocity and acceleration of a curve at one parameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicJet {
    pub curve_id: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl GeodesicJet {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// The same jet after t → t/c: velocity scales by c, acceleration by c².
    pub fn rescaled(&self, c: f64) -> GeodesicJet {
        GeodesicJet {
            curve_id: self.curve_id,
            t: self.t / c,
            x: self.x.clone(),
            v: self.v.iter().map(|v| v * c).collect(),
            a: self.a.iter().map(|a| a * c * c).collect(),
        }
    }
}

/// Samples of one curve: parameter, position and velocity.
///
/// `t0` is the parameter at which the curve passes its target point.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub id: usize,
    pub n: usize,
    pub t0: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec4>,
    pub v: Vec<Vec4>,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.t.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i == self.t.len() || (t - self.t[i - 1]) <= (self.t[i] - t) {
            i - 1
        } else {
            i
        }
    }
}

fn quad(g: &Ten3, v: &Vec4, n: usize) -> Vec4 {
    let mut q = [0.0; 4];
    for (i, qi) in q.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += g[i][a][b] * v[a] * v[b];
            }
        }
        *qi = s;
    }
    q
}

/// Γ^i_{ab} v^a v^b at x.
pub fn gamma_vv(gamma: &ConnectionField, x: &[f64], v: &[f64]) -> Result<Vec4> {
    let n = gamma.dim();
    let g = gamma.value_at(x)?;
    let mut vv = [0.0; 4];
    vv[..n].copy_from_slice(&v[..n]);
    Ok(quad(&g, &vv, n))
}

fn axpy(y: &Vec4, a: f64, x: &Vec4) -> Vec4 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2], y[3] + a * x[3]]
}

fn rk4_step(gamma: &ConnectionField, x: &Vec4, v: &Vec4, h: f64) -> Result<(Vec4, Vec4)> {
    let n = gamma.dim();
    let acc = |x: &Vec4, v: &Vec4| -> Result<Vec4> {
        let q = quad(&gamma.value_at(&x[..n])?, v, n);
        Ok([-q[0], -q[1], -q[2], -q[3]])
    };
    let k1x = *v;
    let k1v = acc(x, v)?;
    let x2 = axpy(x, 0.5 * h, &k1x);
    let v2 = axpy(v, 0.5 * h, &k1v);
    let k2x = v2;
    let k2v = acc(&x2, &v2)?;
    let x3 = axpy(x, 0.5 * h, &k2x);
    let v3 = axpy(v, 0.5 * h, &k2v);
    let k3x = v3;
    let k3v = acc(&x3, &v3)?;
    let x4 = axpy(x, h, &k3x);
    let v4 = axpy(v, h, &k3v);
    let k4x = v4;
    let k4v = acc(&x4, &v4)?;
    let mut nx = *x;
    let mut nv = *v;
    for i in 0..4 {
        nx[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        nv[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    Ok((nx, nv))
}

fn to4(v: &[f64]) -> Vec4 {
    let mut o = [0.0; 4];
    o[..v.len()].copy_from_slice(v);
    o
}

/// Integrate ẍ + Γ(ẋ, ẋ) = 0 with fixed-step RK4 from t = 0 to `t_end`
/// (negative `t_end` integrates backwards). Stops early at the chart boundary.
pub fn integrate_geodesic(
    gamma: &ConnectionField,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    step: f64,
) -> Result<Curve> {
    let n = gamma.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::Dimension(format!("expected {n} coordinates")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let grid = gamma.grid();
    if !grid.contains(x0) {
        return Err(Error::ChartExit(format!("start {x0:?} is outside the chart")));
    }
    let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
    let steps = (t_end.abs() / step).round() as usize;
    let mut x = to4(x0);
    let mut v = to4(v0);
    let mut curve = Curve {
        id: 0,
        n,
        t0: 0.0,
        t: vec![0.0],
        x: vec![x],
        v: vec![v],
    };
    for k in 1..=steps {
        let (nx, nv) = rk4_step(gamma, &x, &v, dir * step)?;
        if !grid.contains(&nx[..n]) {
            if k == 1 && steps > 0 {
                return Err(Error::ChartExit(format!("geodesic from {x0:?} leaves the chart at once")));
            }
            break;
        }
        x = nx;
        v = nv;
        curve.t.push(dir * step * k as f64);
        curve.x.push(x);
        curve.v.push(v);
    }
    if dir < 0.0 {
        curve.t.reverse();
        curve.x.reverse();
        curve.v.reverse();
    }
    Ok(curve)
}

/// Geodesic through `x0` at t = 0, integrated over [−span, span].
pub fn geodesic_through(gamma: &ConnectionField, x0: &[f64], v0: &[f64], span: f64, step: f64) -> Result<Curve> {
    let back = integrate_geodesic(gamma, x0, v0, -span, step)?;
    let fwd = integrate_geodesic(gamma, x0, v0, span, step)?;
    let mut c = back;
    c.t.extend_from_slice(&fwd.t[1..]);
    c.x.extend_from_slice(&fwd.x[1..]);
    c.v.extend_from_slice(&fwd.v[1..]);
    Ok(c)
}

fn hermite(t0: f64, t1: f64, x0: &Vec4, v0: &Vec4, x1: &Vec4, v1: &Vec4, t: f64) -> (Vec4, Vec4) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let mut x = [0.0; 4];
    let mut v = [0.0; 4];
    for i in 0..4 {
        x[i] = h00 * x0[i] + h10 * h * v0[i] + h01 * x1[i] + h11 * h * v1[i];
        v[i] = d00 * x0[i] + d10 * v0[i] + d01 * x1[i] + d11 * v1[i];
    }
    (x, v)
}

/// τ(t) = t + a sin(b t + c), monotone when |a b| < 1.
pub fn sine_reparameterization(a: f64, b: f64, c: f64) -> Expr {
    let t = Expr::var(0);
    t.add(&Expr::num(a).mul(&Expr::call(Func::Sin, &Expr::num(b).mul(&t).add(&Expr::num(c)))))
}

fn tau_eval(tau: &Expr, t: f64) -> Result<(f64, f64)> {
    let d = tau.eval_dual1(&[t], &Params::new()).map_err(|e| Error::eval(&[t], e))?;
    Ok((d.v, d.d[0]))
}

/// Resample the curve at equal steps of the new parameter τ(t) (an
/// expression in `x0` = t), anchored so that τ(t0) is a sample.
///
/// `step` defaults to the mean τ spacing of the original samples.
pub fn reparameterize(curve: &Curve, tau: &Expr, step: Option<f64>) -> Result<Curve> {
    if curve.len() < 2 {
        return Err(Error::Insufficient("curve has fewer than two samples".into()));
    }
    let mut taus = Vec::with_capacity(curve.len());
    for k in 0..curve.len() {
        let (s, ds) = tau_eval(tau, curve.t[k])?;
        if !(ds > 0.0) {
            return Err(Error::InvalidArgument(format!("dτ/dt = {ds} <= 0 at t = {}", curve.t[k])));
        }
        if k > 0 {
            let (_, dm) = tau_eval(tau, 0.5 * (curve.t[k - 1] + curve.t[k]))?;
            if !(dm > 0.0) || s <= taus[k - 1] {
                return Err(Error::InvalidArgument("τ is not increasing along the curve".into()));
            }
        }
        taus.push(s);
    }
    let (lo, hi) = (taus[0], taus[taus.len() - 1]);
    let h = step.unwrap_or((hi - lo) / (curve.len() - 1) as f64);
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("resampling step must be positive".into()));
    }
    let anchor = tau_eval(tau, curve.t0)?.0;
    let j_lo = -(((anchor - lo) / h + 1e-9).floor() as i64);
    let j_hi = ((hi - anchor) / h + 1e-9).floor() as i64;
    let mut out = Curve {
        id: curve.id,
        n: curve.n,
        t0: anchor,
        t: Vec::new(),
        x: Vec::new(),
        v: Vec::new(),
    };
    for j in j_lo..=j_hi {
        let target = anchor + j as f64 * h;
        let k = taus.partition_point(|&s| s < target).clamp(1, taus.len() - 1) - 1;
        // invert τ on [t_k, t_{k+1}] by safeguarded Newton
        let (mut a, mut b) = (curve.t[k], curve.t[k + 1]);
        let mut t = a + (b - a) * ((target - taus[k]) / (taus[k + 1] - taus[k])).clamp(0.0, 1.0);
        for _ in 0..60 {
            let (s, ds) = tau_eval(tau, t)?;
            let r = s - target;
            if r.abs() <= 1e-15 * (1.0 + target.abs()) {
                break;
            }
            if r > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let nt = t - r / ds;
            t = if nt > a && nt < b { nt } else { 0.5 * (a + b) };
        }
        let (x, v) = hermite(
            curve.t[k],
            curve.t[k + 1],
            &curve.x[k],
            &curve.v[k],
            &curve.x[k + 1],
            &curve.v[k + 1],
            t,
        );
        let ds = tau_eval(tau, t)?.1;
        out.t.push(if j == 0 { anchor } else { target });
        out.x.push(x);
        out.v.push(v.map(|c| c / ds));
    }
    Ok(out)
}

/// Window length of the quartic jet fit.
pub const JET_WINDOW: usize = 7;

/// Least-squares quartic fit over the 7 samples centered at the sample
/// nearest `t0`; returns value, first and second derivative at `t0`.
pub fn estimate_jets(curve: &Curve, t0: f64) -> Result<GeodesicJet> {
    let m = curve.len();
    if m < JET_WINDOW {
        return Err(Error::Insufficient(format!("{m} samples, need {JET_WINDOW}")));
    }
    if !(t0 >= curve.t[0] && t0 <= curve.t[m - 1]) {
        return Err(Error::InvalidArgument(format!("t0 = {t0} outside the sample range")));
    }
    let c = curve.nearest(t0);
    let start = c.saturating_sub(JET_WINDOW / 2).min(m - JET_WINDOW);
    let idx: Vec<usize> = (start..start + JET_WINDOW).collect();
    let scale = (curve.t[idx[JET_WINDOW - 1]] - curve.t[idx[0]]) / 2.0;
    let a = DMatrix::from_fn(JET_WINDOW, 5, |r, p| ((curve.t[idx[r]] - t0) / scale).powi(p as i32));
    let qr = a.clone().qr();
    let n = curve.n;
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for i in 0..n {
        let b = DVector::from_iterator(JET_WINDOW, idx.iter().map(|&k| curve.x[k][i]));
        let qtb = qr.q().transpose() * b;
        let coef = qr
            .r()
            .solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::Numerical("singular jet fit".into()))?;
        x[i] = coef[0];
        v[i] = coef[1] / scale;
        acc[i] = 2.0 * coef[2] / (scale * scale);
    }
    Ok(GeodesicJet {
        curve_id: curve.id,
        t: t0,
        x,
        v,
        a: acc,
    })
}

/// Largest condition number over all n-subsets of the directions.
pub fn worst_subset_condition(dirs: &[Vec4], n: usize) -> f64 {
    let mut worst = 1.0f64;
    for s in subsets(dirs.len(), n) {
        let m = DMatrix::from_fn(n, n, |i, j| dirs[s[j]][i]);
        let sv = crate::linalg::singular_values(&m);
        let (hi, lo) = (sv[0], sv[n - 1]);
        worst = worst.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
    worst
}

pub const MAX_CONDITION: f64 = 1e6;
/// Bound on σ_1/σ_r of the reconstruction system spanned by a direction set,
/// r = n²(n+1)/2 − n (the gauge directions are always null).
pub const MAX_SYSTEM_CONDITION: f64 = 1e3;

/// Conditioning of the reconstruction system the directions would produce.
pub fn system_condition(dirs: &[Vec4], n: usize) -> Result<f64> {
    let jets: Vec<GeodesicJet> = dirs
        .iter()
        .enumerate()
        .map(|(k, d)| GeodesicJet {
            curve_id: k,
            t: 0.0,
            x: vec![0.0; n],
            v: d[..n].to_vec(),
            a: vec![0.0; n],
        })
        .collect();
    let sys = crate::recon::assemble_point_system(&vec![0.0; n], &jets)?;
    let sv = crate::linalg::singular_values(&sys.a);
    let r = crate::recon::unknown_count(n) - n;
    Ok(match sv.get(r - 1) {
        Some(&lo) if lo > 0.0 => sv[0] / lo,
        _ => f64::INFINITY,
    })
}

/// How jets are produced for a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetMode {
    /// Jets from the geodesic equation at the target, no integration.
    Exact,
    /// Integrate, resample and fit quartic jets.
    Fit,
}

#[derive(Clone, Debug)]
pub struct FamilyOptions {
    pub per_point: usize,
    pub seed: u64,
    pub mode: JetMode,
    /// Apply a random monotone reparameterization to every curve.
    pub reparameterize: bool,
    /// Speed of the initial velocity (coordinate units per parameter).
    pub speed: f64,
    /// RK4 step; defaults to 1e-3 of the chart diameter.
    pub step: Option<f64>,
    /// Spacing of the resampled curve in the new parameter.
    pub sample_step: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            per_point: 12,
            seed: 0,
            mode: JetMode::Exact,
            reparameterize: true,
            speed: 1.0,
            step: None,
            sample_step: 1e-2,
        }
    }
}

/// Curves (optional) and the jets at their target points.
#[derive(Clone, Debug, Default)]
pub struct GeodesicFamily {
    pub dim: usize,
    pub curves: Vec<Curve>,
    pub jets: Vec<GeodesicJet>,
}

impl GeodesicFamily {
    /// Jets from the curves at their anchor parameters (when only curves were given).
    pub fn with_jets_from_curves(mut self) -> Result<Self> {
        if self.jets.is_empty() {
            self.jets = self
                .curves
                .iter()
                .map(|c| estimate_jets(c, c.t0))
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(self)
    }
}

/// Random unit directions, any n of which are well conditioned.
fn generic_directions(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Result<Vec<Vec4>> {
    for _ in 0..100 {
        let dirs: Vec<Vec4> = (0..count)
            .map(|_| {
                let mut d = [0.0; 4];
                for c in d.iter_mut().take(n) {
                    *c = rng.sample(StandardNormal);
                }
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                d.map(|x| x / norm)
            })
            .collect();
        if worst_subset_condition(&dirs, n) <= MAX_CONDITION && system_condition(&dirs, n)? <= MAX_SYSTEM_CONDITION {
            return Ok(dirs);
        }
    }
    Err(Error::Numerical("could not draw generic directions".into()))
}

fn target_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// `per_point` geodesics through every target, with jets at the targets.
pub fn sample_family(gamma: &ConnectionField, targets: &[Vec<f64>], opts: &FamilyOptions) -> Result<GeodesicFamily> {
    let n = gamma.dim();
    if opts.per_point < n {
        return Err(Error::InvalidArgument(format!("need at least {n} curves per point")));
    }
    let step = opts.step.unwrap_or(1e-3 * gamma.grid().diameter());
    let per: Vec<(Vec<Curve>, Vec<GeodesicJet>)> = targets
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            if x0.len() != n {
                return Err(Error::Dimension("target has wrong dimension".into()));
            }
            let mut rng = target_rng(opts.seed, k);
            let dirs = generic_directions(&mut rng, n, opts.per_point)?;
            let mut curves = Vec::new();
            let mut jets = Vec::new();
            for (c, d) in dirs.iter().enumerate() {
                let id = k * opts.per_point + c;
                let v0: Vec<f64> = d[..n].iter().map(|x| x * opts.speed).collect();
                let (a, b, ph) = if opts.reparameterize {
                    let b = rng.random_range(0.5..2.0);
                    let a = rng.random_range(-0.45..0.45) / b;
                    (a, b, rng.random_range(0.0..std::f64::consts::TAU))
                } else {
                    (0.0, 0.0, 0.0)
                };
                match opts.mode {
                    JetMode::Exact => {
                        let q = gamma_vv(gamma, x0, &v0)?;
                        let mut acc: Vec<f64> = q[..n].iter().map(|q| -q).collect();
                        let mut v = v0.clone();
                        let mut t = 0.0;
                        if opts.reparameterize {
                            // chain rule for x(t(τ)) at t = 0
                            let d1 = 1.0 + a * b * ph.cos();
                            let d2 = -a * b * b * ph.sin();
                            for i in 0..n {
                                acc[i] = (acc[i] - v[i] * d2 / d1) / (d1 * d1);
                                v[i] /= d1;
                            }
                            t = a * ph.sin();
                        }
                        jets.push(GeodesicJet {
                            curve_id: id,
                            t,
                            x: x0.clone(),
                            v,
                            a: acc,
                        });
                    }
                    JetMode::Fit => {
                        // τ' >= 0.55, so ±6 resampling steps in t cover the 7-sample window
                        let span = 6.0 * opts.sample_step + 2.0 * step;
                        let mut curve = geodesic_through(gamma, x0, &v0, span, step)?;
                        curve.id = id;
                        let tau = sine_reparameterization(a, b, ph);
                        let curve = reparameterize(&curve, &tau, Some(opts.sample_step))?;
                        // attribute the fitted derivatives to the recorded target sample
                        let mut jet = estimate_jets(&curve, curve.t0)?;
                        jet.x = curve.x[curve.nearest(curve.t0)][..n].to_vec();
                        jets.push(jet);
                        curves.push(curve);
                    }
                }
            }
            Ok((curves, jets))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fam = GeodesicFamily {
        dim: n,
        ..Default::default()
    };
    for (c, j) in per {
        fam.curves.extend(c);
        fam.jets.extend(j);
    }
    Ok(fam)
}

/// Target points: the nodes of a grid.
pub fn grid_targets(grid: &ChartGrid) -> Vec<Vec<f64>> {
    (0..grid.len()).map(|i| grid.point(i)[..grid.dim()].to_vec()).collect()
}

/// max over jets of ‖(ẍ + Γ(ẋ, ẋ)) ∧ ẋ‖∞.
pub fn geodesibility_residual(gamma: &ConnectionField, jets: &[GeodesicJet]) -> Result<f64> {
    let n = gamma.dim();
    let per = jets
        .par_iter()
        .map(|j| {
            let q = gamma_vv(gamma, &j.x, &j.v)?;
            let w: Vec<f64> = (0..n).map(|i| j.a[i] + q[i]).collect();
            let mut m = 0.0f64;
            for p in 0..n {
                for r in (p + 1)..n {
                    m = m.max((w[p] * j.v[r] - w[r] * j.v[p]).abs());
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}
