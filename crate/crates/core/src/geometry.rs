//! Zero-mean Gaussian geometry: Kullback-Leibler divergence, I-projection onto
//! decomposable models, and the samplers used by the simulation drivers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::chordal::JunctionTree;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::DataMatrix;
use crate::linalg::{cholesky, inverse_pd, inverse_sub, log_det, max_asymmetry, symmetrize};

/// Covariance with its precision matrix and, optionally, the graph whose
/// non-edges are zeros of the precision.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub sigma: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub graph: Option<Graph>,
}

impl CovarianceModel {
    pub fn from_sigma(sigma: DMatrix<f64>, graph: Option<Graph>) -> Result<Self> {
        let precision = inverse_pd(&sigma)?;
        Ok(CovarianceModel {
            sigma,
            precision,
            graph,
        })
    }

    pub fn from_precision(precision: DMatrix<f64>, graph: Option<Graph>) -> Result<Self> {
        let sigma = inverse_pd(&precision)?;
        Ok(CovarianceModel {
            sigma,
            precision,
            graph,
        })
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    /// Largest `|K_ij|` over non-edges of the attached graph (0 without one).
    pub fn max_offgraph_precision(&self) -> f64 {
        let Some(g) = &self.graph else { return 0.0 };
        let p = self.p();
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in i + 1..p {
                if !g.has_edge(i, j) {
                    worst = worst.max(self.precision[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Partial correlation `-K_ij / sqrt(K_ii K_jj)`.
    pub fn partial_correlation(&self, i: usize, j: usize) -> f64 {
        let k = &self.precision;
        -k[(i, j)] / (k[(i, i)] * k[(j, j)]).sqrt()
    }
}

fn check_square_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "expected two square matrices of equal size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `KL(N(0, sigma1) || N(0, sigma2))`.
pub fn kl_gaussian(sigma1: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<f64> {
    check_square_pair(sigma1, sigma2)?;
    if sigma1 == sigma2 {
        cholesky(sigma1)?;
        return Ok(0.0);
    }
    let p = sigma1.nrows() as f64;
    let inv2 = inverse_pd(sigma2)?;
    let trace = inv2.component_mul(sigma1).sum();
    let kl = 0.5 * (trace - p - log_det(sigma1)? + log_det(sigma2)?);
    Ok(kl.max(0.0))
}

/// KL-minimising covariance Markov with respect to the decomposable `target`:
/// the precision is the sum of zero-padded inverse clique blocks minus the
/// zero-padded inverse separator blocks.
pub fn iproject(sigma: &DMatrix<f64>, target: &Graph) -> Result<CovarianceModel> {
    let p = sigma.nrows();
    if !sigma.is_square() || target.num_vertices() != p {
        return Err(Error::Dimension(format!(
            "covariance is {:?} but target has {} vertices",
            sigma.shape(),
            target.num_vertices()
        )));
    }
    let jt = JunctionTree::new(target)?;
    let mut k = DMatrix::<f64>::zeros(p, p);
    let mut add_block = |set: &[usize], sign: f64| -> Result<()> {
        if set.is_empty() {
            return Ok(());
        }
        let inv = inverse_sub(sigma, set)?;
        for (a, &i) in set.iter().enumerate() {
            for (b, &j) in set.iter().enumerate() {
                k[(i, j)] += sign * inv[(a, b)];
            }
        }
        Ok(())
    };
    for c in &jt.cliques {
        add_block(c, 1.0)?;
    }
    for s in &jt.separators {
        add_block(s, -1.0)?;
    }
    symmetrize(&mut k);
    CovarianceModel::from_precision(k, Some(target.clone()))
}

/// Smallest KL divergence from `N(0, sigma)` to a model on a complete graph
/// with one edge removed, and the edge attaining it.
///
/// Markov models are nested, so no graph other than a one-edge deletion can
/// do better; each deletion costs `-ln(1 - rho^2) / 2` with `rho` the partial
/// correlation of the deleted pair.
pub fn min_kl_complete_to_subgraphs(sigma: &DMatrix<f64>) -> Result<(f64, (usize, usize))> {
    let p = sigma.nrows();
    if p < 2 {
        return Err(Error::Dimension("need at least two variables".into()));
    }
    let k = inverse_pd(sigma)?;
    min_kl_from_precision(&k)
}

/// As [`min_kl_complete_to_subgraphs`], starting from the precision matrix.
pub fn min_kl_from_precision(k: &DMatrix<f64>) -> Result<(f64, (usize, usize))> {
    let p = k.nrows();
    if p < 2 {
        return Err(Error::Dimension("need at least two variables".into()));
    }
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..p {
        for j in i + 1..p {
            let r2 = k[(i, j)] * k[(i, j)] / (k[(i, i)] * k[(j, j)]);
            if r2 < best.0 {
                best = (r2, (i, j));
            }
        }
    }
    Ok((-0.5 * (-best.0).ln_1p(), best.1))
}

/// The same minimum computed the long way: project onto every one-edge
/// deletion of the complete graph and evaluate the divergence.
pub fn min_kl_by_projection(sigma: &DMatrix<f64>) -> Result<(f64, (usize, usize))> {
    let p = sigma.nrows();
    let full = Graph::complete(p);
    let mut best = (f64::INFINITY, (0, 1));
    for (i, j) in full.edges() {
        let proj = iproject(sigma, &full.toggled(i, j))?;
        let kl = kl_gaussian(sigma, &proj.sigma)?;
        if kl < best.0 {
            best = (kl, (i, j));
        }
    }
    Ok(best)
}

/// G-Wishart law on the complete graph: density proportional to
/// `det(K)^((delta - 2)/2) exp(-tr(D K)/2)` over positive-definite `K`.
#[derive(Debug, Clone)]
pub struct GWishartSpec {
    pub delta: f64,
    pub scale: DMatrix<f64>,
    scale_inv_chol: DMatrix<f64>,
}

impl GWishartSpec {
    pub fn new(delta: f64, scale: DMatrix<f64>) -> Result<Self> {
        if !(delta > 2.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("G-Wishart shape must exceed 2, got {delta}")));
        }
        if !scale.is_square() || max_asymmetry(&scale) > 1e-12 {
            return Err(Error::Domain("G-Wishart scale must be symmetric".into()));
        }
        let scale_inv_chol = cholesky(&inverse_pd(&scale)?)?;
        Ok(GWishartSpec {
            delta,
            scale,
            scale_inv_chol,
        })
    }

    pub fn p(&self) -> usize {
        self.scale.nrows()
    }

    /// Equivalent Wishart degrees of freedom, `delta + p - 1`.
    pub fn wishart_df(&self) -> f64 {
        self.delta + self.p() as f64 - 1.0
    }
}

/// Draws a precision matrix by the Bartlett construction of a Wishart with
/// `delta + p - 1` degrees of freedom and scale `D^-1`.
pub fn sample_complete_gwishart<R: Rng + ?Sized>(spec: &GWishartSpec, rng: &mut R) -> DMatrix<f64> {
    let p = spec.p();
    let df = spec.wishart_df();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).expect("degrees of freedom positive");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = &spec.scale_inv_chol * a;
    let mut k = &la * la.transpose();
    symmetrize(&mut k);
    k
}

/// `n` rows drawn i.i.d. from `N_p(0, sigma)`, returned uncentred.
pub fn sample_mvn<R: Rng + ?Sized>(sigma: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<DataMatrix> {
    let l = cholesky(sigma)?;
    let p = sigma.nrows();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for r in 0..n {
        for c in 0..p {
            z[(r, c)] = StandardNormal.sample(rng);
        }
    }
    Ok(DataMatrix::uncentered(z * l.transpose()))
}
