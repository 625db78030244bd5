//! Closed-form fractional marginal likelihood of decomposable Gaussian
//! graphical models under the hyper-inverse Wishart g-prior.
//!
//! For a decomposable graph the marginal likelihood is
//! `(2 pi)^(-np/2) H_G(gn, g X'X) / H_G(n, X'X)`, where `H_G(b, D)` is a ratio
//! of per-clique and per-separator terms. Everything is evaluated in log
//! space; only log-determinants of principal submatrices of `X'X` are needed,
//! and those are cached per vertex subset.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chordal::JunctionTree;
use crate::error::{Error, Result};
use crate::graph::{bits, set_bit, Graph};
use crate::linalg::log_det_sub;
use crate::prior::PriorSpec;

/// Observations as an `n x p` matrix with its cached Gram matrix `X'X`.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    gram: DMatrix<f64>,
    centered: bool,
}

impl DataMatrix {
    /// Column-centres `values` and caches the Gram matrix.
    pub fn new(values: DMatrix<f64>) -> Self {
        Self::uncentered(values).center()
    }

    /// Wraps raw observations without centring.
    pub fn uncentered(values: DMatrix<f64>) -> Self {
        let gram = values.tr_mul(&values);
        DataMatrix {
            values,
            gram,
            centered: false,
        }
    }

    pub fn center(mut self) -> Self {
        if self.centered {
            return self;
        }
        let n = self.values.nrows();
        for mut col in self.values.column_iter_mut() {
            let mean = col.sum() / n.max(1) as f64;
            col.add_scalar_mut(-mean);
        }
        self.gram = self.values.tr_mul(&self.values);
        self.centered = true;
        self
    }

    /// Multiplies every observation by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        DataMatrix {
            values: &self.values * s,
            gram: &self.gram * (s * s),
            centered: self.centered,
        }
    }

    /// Restricts to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let values = self.values.select_columns(cols);
        let gram = values.tr_mul(&values);
        DataMatrix {
            values,
            gram,
            centered: self.centered,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Sample correlation matrix from the Gram matrix.
    pub fn correlation(&self) -> DMatrix<f64> {
        let p = self.p();
        let g = &self.gram;
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else {
                let d = (g[(i, i)] * g[(j, j)]).sqrt();
                if d > 0.0 {
                    g[(i, j)] / d
                } else {
                    0.0
                }
            }
        })
    }
}

/// Fraction `g` of the g-prior; `None` means `1/n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    pub g: Option<f64>,
}

impl LikelihoodConfig {
    pub fn fraction(&self, n: usize) -> Result<f64> {
        let g = self.g.unwrap_or(1.0 / n as f64);
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Domain(format!("fraction g must lie in (0, 1), got {g}")));
        }
        Ok(g)
    }
}

/// Log multivariate gamma function `ln Gamma_a(x)`.
pub fn log_mvgamma(a: usize, x: f64) -> Result<f64> {
    if a == 0 {
        return Ok(0.0);
    }
    let smallest = x + (1.0 - a as f64) / 2.0;
    if !(smallest > 0.0) {
        return Err(Error::Domain(format!(
            "multivariate gamma of dimension {a} needs x > {}, got {x}",
            (a as f64 - 1.0) / 2.0
        )));
    }
    let af = a as f64;
    Ok(af * (af - 1.0) / 4.0 * PI.ln()
        + (1..=a).map(|j| ln_gamma(x + (1.0 - j as f64) / 2.0)).sum::<f64>())
}

/// One clique or separator factor of `ln H_G(b, D)`, given `ln det D_A`.
fn hiw_factor(size: usize, b: f64, log_det_d: f64) -> Result<f64> {
    if size == 0 {
        return Ok(0.0);
    }
    let s = size as f64;
    let shape = (b + s - 1.0) / 2.0;
    Ok(shape * (log_det_d - s * std::f64::consts::LN_2) - log_mvgamma(size, shape)?)
}

/// `ln H_G(b, D)` for the decomposition `jt`.
pub fn log_hiw_norm_const(jt: &JunctionTree, b: f64, d: &DMatrix<f64>) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom must be positive, got {b}")));
    }
    let mut total = 0.0;
    for c in &jt.cliques {
        total += hiw_factor(c.len(), b, log_det_sub(d, c)?)?;
    }
    for s in &jt.separators {
        total -= hiw_factor(s.len(), b, log_det_sub(d, s)?)?;
    }
    Ok(total)
}

fn check_inputs(data: &DataMatrix, g: &Graph) -> Result<()> {
    if !data.is_centered() {
        return Err(Error::NotCentered);
    }
    if data.p() != g.num_vertices() {
        return Err(Error::Dimension(format!(
            "data has {} columns but graph has {} vertices",
            data.p(),
            g.num_vertices()
        )));
    }
    Ok(())
}

/// `ln f(x | G)` evaluated directly as a ratio of two `H_G` constants.
pub fn log_marginal_likelihood(data: &DataMatrix, g: &Graph, cfg: &LikelihoodConfig) -> Result<f64> {
    check_inputs(data, g)?;
    let jt = JunctionTree::new(g)?;
    let (n, p) = (data.n() as f64, data.p() as f64);
    let frac = cfg.fraction(data.n())?;
    let scaled = data.gram() * frac;
    Ok(-n * p / 2.0 * (2.0 * PI).ln() + log_hiw_norm_const(&jt, frac * n, &scaled)?
        - log_hiw_norm_const(&jt, n, data.gram())?)
}

/// Unnormalised log posterior: log marginal likelihood plus log prior.
pub fn log_posterior_score(
    data: &DataMatrix,
    g: &Graph,
    prior: &PriorSpec,
    cfg: &LikelihoodConfig,
) -> Result<f64> {
    Ok(log_marginal_likelihood(data, g, cfg)? + prior.log_prior(g)?)
}

/// Subset-keyed store of per-subset likelihood factors, shareable across
/// threads and across searches over the same data and fraction. Values are
/// deterministic, so concurrent writers of the same key are harmless.
#[derive(Debug, Default)]
pub struct SubsetCache {
    map: RwLock<HashMap<Box<[u64]>, f64>>,
}

impl SubsetCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_try_insert(&self, key: &[u64], f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(&v) = self.map.read().expect("cache lock poisoned").get(key) {
            return Ok(v);
        }
        let v = f()?;
        self.map
            .write()
            .expect("cache lock poisoned")
            .insert(key.into(), v);
        Ok(v)
    }
}

/// Scores decomposable graphs against fixed data, caching subset factors.
#[derive(Debug, Clone)]
pub struct Scorer {
    data: Arc<DataMatrix>,
    frac: f64,
    words: usize,
    cache: Arc<SubsetCache>,
}

impl Scorer {
    pub fn new(data: Arc<DataMatrix>, cfg: &LikelihoodConfig) -> Result<Self> {
        Self::with_cache(data, cfg, Arc::new(SubsetCache::new()))
    }

    /// A scorer that shares `cache` with other scorers on the same data and
    /// fraction.
    pub fn with_cache(data: Arc<DataMatrix>, cfg: &LikelihoodConfig, cache: Arc<SubsetCache>) -> Result<Self> {
        if !data.is_centered() {
            return Err(Error::NotCentered);
        }
        let frac = cfg.fraction(data.n())?;
        let words = crate::graph::words_for(data.p());
        Ok(Scorer {
            data,
            frac,
            words,
            cache,
        })
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn cache(&self) -> &Arc<SubsetCache> {
        &self.cache
    }

    /// Log marginal likelihood of the complete graph on `subset` (as a bitset),
    /// without the `(2 pi)` term.
    fn subset_term(&self, subset: &[u64]) -> Result<f64> {
        let size: usize = subset.iter().map(|w| w.count_ones() as usize).sum();
        if size == 0 {
            return Ok(0.0);
        }
        self.cache.get_or_try_insert(subset, || {
            let idx: Vec<usize> = bits(subset).collect();
            let ld = log_det_sub(self.data.gram(), &idx)?;
            let n = self.data.n() as f64;
            let s = size as f64;
            Ok(hiw_factor(size, self.frac * n, ld + s * self.frac.ln())? - hiw_factor(size, n, ld)?)
        })
    }

    fn set_term(&self, set: &[usize]) -> Result<f64> {
        let mut key = vec![0u64; self.words];
        for &v in set {
            set_bit(&mut key, v);
        }
        self.subset_term(&key)
    }

    fn constant(&self) -> f64 {
        let (n, p) = (self.data.n() as f64, self.data.p() as f64);
        -n * p / 2.0 * (2.0 * PI).ln()
    }

    pub fn log_marginal(&self, g: &Graph) -> Result<f64> {
        if g.num_vertices() != self.data.p() {
            return Err(Error::Dimension(format!(
                "data has {} columns but graph has {} vertices",
                self.data.p(),
                g.num_vertices()
            )));
        }
        let jt = JunctionTree::new(g)?;
        let mut total = self.constant();
        for c in &jt.cliques {
            total += self.set_term(c)?;
        }
        for s in &jt.separators {
            total -= self.set_term(s)?;
        }
        Ok(total)
    }

    pub fn log_score(&self, g: &Graph, prior: &PriorSpec) -> Result<f64> {
        Ok(self.log_marginal(g)? + prior.log_prior(g)?)
    }

    /// Change in log marginal likelihood from toggling the edge `(u, v)` of
    /// the decomposable graph `g`, assuming the toggle is legal. Only the
    /// four subsets around the common neighbourhood of `u` and `v` change.
    pub fn toggle_delta(&self, g: &Graph, u: usize, v: usize) -> Result<f64> {
        let mut s: Vec<u64> = g.row(u).iter().zip(g.row(v)).map(|(a, b)| a & b).collect();
        let t_s = self.subset_term(&s)?;
        set_bit(&mut s, u);
        let t_su = self.subset_term(&s)?;
        set_bit(&mut s, v);
        let t_suv = self.subset_term(&s)?;
        crate::graph::clear_bit(&mut s, u);
        let t_sv = self.subset_term(&s)?;
        let added = t_suv + t_s - t_su - t_sv;
        Ok(if g.has_edge(u, v) { -added } else { added })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mvgamma_small_cases() {
        assert_abs_diff_eq!(log_mvgamma(1, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        let want = 0.5 * PI.ln() + (PI.sqrt() / 2.0).ln();
        assert_abs_diff_eq!(log_mvgamma(2, 2.0).unwrap(), want, epsilon = 1e-14);
        assert!(matches!(log_mvgamma(3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn scalar_norm_const_vanishes() {
        let jt = JunctionTree::new(&Graph::empty(1)).unwrap();
        let d = DMatrix::from_element(1, 1, 2.0);
        assert_abs_diff_eq!(log_hiw_norm_const(&jt, 2.0, &d).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_marginal_closed_form() {
        let x = DMatrix::from_column_slice(5, 1, &[0.3, -1.2, 0.8, 2.0, -0.4]);
        let data = DataMatrix::new(x);
        let n = 5.0;
        let s = data.gram()[(0, 0)];
        let g = 1.0 / n;
        let want = -(n / 2.0) * (2.0 * PI).ln() + (g * n / 2.0) * (g * s / 2.0).ln()
            - ln_gamma(g * n / 2.0)
            - (n / 2.0) * (s / 2.0).ln()
            + ln_gamma(n / 2.0);
        let got = log_marginal_likelihood(&data, &Graph::empty(1), &LikelihoodConfig::default()).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn uncentered_data_is_rejected() {
        let data = DataMatrix::uncentered(DMatrix::from_element(3, 1, 1.0));
        assert!(matches!(
            log_marginal_likelihood(&data, &Graph::empty(1), &LikelihoodConfig::default()),
            Err(Error::NotCentered)
        ));
    }

    #[test]
    fn centering_constant_columns_gives_zeros() {
        let data = DataMatrix::new(DMatrix::from_element(3, 2, 7.5));
        assert!(data.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_fraction_rejected() {
        assert!(LikelihoodConfig { g: Some(1.0) }.fraction(10).is_err());
        assert_eq!(LikelihoodConfig::default().fraction(4).unwrap(), 0.25);
    }
}
