//! Graph priors that depend on a graph only through its edge count.
//!
//! The loss-based family penalises a graph of `k` edges out of `m` possible by
//! `h * ((1 - c) * k + c * ln C(m, k))`: `h` sets the overall strength and `c`
//! trades absolute size against the multiplicity of the size class. Several
//! common priors are special cases, and Bernoulli and beta-binomial
//! comparators are provided alongside.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// `ln C(m, k)` via log-gamma.
pub fn ln_binomial(m: usize, k: usize) -> f64 {
    debug_assert!(k <= m);
    if k == 0 || k == m {
        return 0.0;
    }
    ln_gamma(m as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log-sum-exp of a slice; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorVariant {
    LossBased { h: f64, c: f64 },
    /// `LossBased(0, c)` for any `c`.
    Uniform,
    /// `LossBased(1, 1)`: penalises `ln C(m, k)`.
    CarvalhoScott,
    /// `LossBased(h, 0)`: penalises the edge count only.
    VillaLee { h: f64 },
    /// `LossBased(1, 1/2)`.
    Mixture,
    Bernoulli { phi: f64 },
    BetaBinomial { a: f64, b: f64 },
}

/// A graph prior together with the maximum edge count `m` it is defined on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub variant: PriorVariant,
    pub m: usize,
}

/// How a size distribution weights each edge count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeWeighting {
    /// `P(k)` proportional to the prior mass of a single graph of size `k`.
    PerSize,
    /// `P(k)` proportional to `C(m, k)` times that mass, i.e. the law of `|G|`
    /// when every graph on `m` possible edges is counted.
    GraphCount,
}

impl PriorSpec {
    pub fn new(variant: PriorVariant, m: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::Domain(msg));
        match variant {
            PriorVariant::LossBased { h, c } => {
                if !(h >= 0.0 && h.is_finite()) {
                    return bad(format!("h must be finite and >= 0, got {h}"));
                }
                if !(0.0..=1.0).contains(&c) {
                    return bad(format!("c must lie in [0, 1], got {c}"));
                }
            }
            PriorVariant::VillaLee { h } => {
                if !(h >= 0.0 && h.is_finite()) {
                    return bad(format!("h must be finite and >= 0, got {h}"));
                }
            }
            PriorVariant::Bernoulli { phi } => {
                if !(phi > 0.0 && phi < 1.0) {
                    return bad(format!("phi must lie in (0, 1), got {phi}"));
                }
            }
            PriorVariant::BetaBinomial { a, b } => {
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad(format!("beta parameters must be positive, got ({a}, {b})"));
                }
            }
            PriorVariant::Uniform | PriorVariant::CarvalhoScott | PriorVariant::Mixture => {}
        }
        Ok(PriorSpec { variant, m })
    }

    pub fn loss_based(h: f64, c: f64, m: usize) -> Result<Self> {
        Self::new(PriorVariant::LossBased { h, c }, m)
    }

    /// Prior on graphs over `p` vertices.
    pub fn for_vertices(variant: PriorVariant, p: usize) -> Result<Self> {
        Self::new(variant, p * p.saturating_sub(1) / 2)
    }

    /// `(h, c)` when the variant is a member of the loss-based family.
    pub fn loss_parameters(&self) -> Option<(f64, f64)> {
        match self.variant {
            PriorVariant::LossBased { h, c } => Some((h, c)),
            PriorVariant::Uniform => Some((0.0, 0.0)),
            PriorVariant::CarvalhoScott => Some((1.0, 1.0)),
            PriorVariant::VillaLee { h } => Some((h, 0.0)),
            PriorVariant::Mixture => Some((1.0, 0.5)),
            PriorVariant::Bernoulli { .. } | PriorVariant::BetaBinomial { .. } => None,
        }
    }

    /// Unnormalised log prior of any graph with `k` edges.
    pub fn log_prior_size(&self, k: usize) -> f64 {
        debug_assert!(k <= self.m);
        let m = self.m;
        if let Some((h, c)) = self.loss_parameters() {
            if h == 0.0 {
                return 0.0;
            }
            return -h * ((1.0 - c) * k as f64 + c * ln_binomial(m, k));
        }
        match self.variant {
            PriorVariant::Bernoulli { phi } => {
                k as f64 * phi.ln() + (m - k) as f64 * (-phi).ln_1p()
            }
            PriorVariant::BetaBinomial { a, b } => {
                ln_beta(a + k as f64, b + (m - k) as f64) - ln_beta(a, b)
            }
            _ => unreachable!(),
        }
    }

    /// Unnormalised log prior of `g`.
    pub fn log_prior(&self, g: &Graph) -> Result<f64> {
        if g.max_edges() != self.m {
            return Err(Error::Dimension(format!(
                "prior defined for m = {} but graph has m = {}",
                self.m,
                g.max_edges()
            )));
        }
        Ok(self.log_prior_size(g.num_edges()))
    }

    pub fn size_distribution(&self, weighting: SizeWeighting) -> SizeDistribution {
        let m = self.m;
        let logw: Vec<f64> = (0..=m)
            .map(|k| {
                let base = self.log_prior_size(k);
                match weighting {
                    SizeWeighting::PerSize => base,
                    SizeWeighting::GraphCount => base + ln_binomial(m, k),
                }
            })
            .collect();
        let norm = log_sum_exp(&logw);
        SizeDistribution {
            m,
            weighting,
            probabilities: logw.iter().map(|l| (l - norm).exp()).collect(),
        }
    }

    /// Short human-readable label, e.g. `pi(1,0.5)`.
    pub fn label(&self) -> String {
        match (self.variant, self.loss_parameters()) {
            (PriorVariant::Uniform, _) => "uniform".to_string(),
            (_, Some((h, c))) => format!("pi({h},{c})"),
            (PriorVariant::Bernoulli { phi }, _) => format!("bernoulli({phi})"),
            (PriorVariant::BetaBinomial { a, b }, _) => format!("beta_binomial({a},{b})"),
            _ => unreachable!(),
        }
    }
}

/// Law of the edge count under a prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub m: usize,
    pub weighting: SizeWeighting,
    pub probabilities: Vec<f64>,
}

impl SizeDistribution {
    pub fn point_mass(m: usize, k: usize) -> Self {
        let mut probabilities = vec![0.0; m + 1];
        probabilities[k] = 1.0;
        SizeDistribution {
            m,
            weighting: SizeWeighting::PerSize,
            probabilities,
        }
    }

    /// `(mean, variance)` of the edge count.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self
            .probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum();
        let var = self
            .probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        (mean, var)
    }
}

pub fn size_moments(dist: &SizeDistribution) -> (f64, f64) {
    dist.moments()
}

pub const CALIBRATE_MAX_H: f64 = 20.0;
pub const CALIBRATE_MEAN_TOL: f64 = 1e-4;
pub const CALIBRATE_VAR_TOL: f64 = 1e-2;

const H_GRID: usize = 400;
const C_GRID: usize = 200;
const BISECT_STEPS: usize = 200;

fn per_size_moments(m: usize, h: f64, c: f64) -> (f64, f64) {
    PriorSpec {
        variant: PriorVariant::LossBased { h, c },
        m,
    }
    .size_distribution(SizeWeighting::PerSize)
    .moments()
}

fn bisect(mut lo: f64, mut hi: f64, mut f_lo: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `h` in `[0, 20]` whose per-size mean equals `target` for fixed `c`.
pub fn solve_h_for_mean(m: usize, c: f64, target: f64) -> Option<f64> {
    let f = |h: f64| per_size_moments(m, h, c).0 - target;
    let mut h_prev = 0.0;
    let mut f_prev = f(h_prev);
    if f_prev.abs() <= CALIBRATE_MEAN_TOL * 1e-3 {
        return Some(0.0);
    }
    for i in 1..=H_GRID {
        let h = CALIBRATE_MAX_H * i as f64 / H_GRID as f64;
        let f_h = f(h);
        if f_h == 0.0 {
            return Some(h);
        }
        if (f_h < 0.0) != (f_prev < 0.0) {
            return Some(bisect(h_prev, h, f_prev, f));
        }
        h_prev = h;
        f_prev = f_h;
    }
    None
}

/// Calibrates a loss-based prior on `m` possible edges so that the per-size
/// edge-count law has the requested mean and, optionally, variance.
///
/// Among admissible solutions the one with the smallest `c` is returned.
pub fn calibrate(m: usize, target_mean: f64, target_variance: Option<f64>) -> Result<PriorSpec> {
    if m == 0 || !(target_mean > 0.0 && target_mean < m as f64) {
        return Err(Error::Domain(format!(
            "target mean must lie in (0, {m}), got {target_mean}"
        )));
    }
    let spec = match target_variance {
        None => (0..=C_GRID).find_map(|j| {
            let c = j as f64 / C_GRID as f64;
            solve_h_for_mean(m, c, target_mean).map(|h| (h, c))
        }),
        Some(v) => {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("target variance must be positive, got {v}")));
            }
            calibrate_with_variance(m, target_mean, v)
        }
    };
    let (h, c) = spec.ok_or_else(|| {
        Error::Unattainable(format!("m = {m}, mean = {target_mean}, variance = {target_variance:?}"))
    })?;
    let (mean, var) = per_size_moments(m, h, c);
    if (mean - target_mean).abs() > CALIBRATE_MEAN_TOL
        || target_variance.is_some_and(|v| (var - v).abs() > CALIBRATE_VAR_TOL)
    {
        return Err(Error::Unattainable(format!(
            "closest solution (h = {h}, c = {c}) gives mean {mean}, variance {var}"
        )));
    }
    PriorSpec::loss_based(h, c, m)
}

fn calibrate_with_variance(m: usize, mean: f64, variance: f64) -> Option<(f64, f64)> {
    let excess = |c: f64| -> Option<(f64, f64)> {
        let h = solve_h_for_mean(m, c, mean)?;
        Some((h, per_size_moments(m, h, c).1 - variance))
    };
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..=C_GRID {
        let c = j as f64 / C_GRID as f64;
        let Some((h, e)) = excess(c) else {
            prev = None;
            continue;
        };
        if e.abs() <= CALIBRATE_VAR_TOL * 1e-3 {
            return Some((h, c));
        }
        if let Some((c_prev, e_prev)) = prev {
            if (e < 0.0) != (e_prev < 0.0) {
                let c_star = bisect(c_prev, c, e_prev, |c| {
                    excess(c).map_or(f64::NAN, |(_, e)| e)
                });
                let h_star = solve_h_for_mean(m, c_star, mean)?;
                return Some((h_star, c_star));
            }
        }
        prev = Some((c, e));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ln_binomial_by_product(m: usize, k: usize) -> f64 {
        (0..k).map(|i| ((m - i) as f64 / (i + 1) as f64).ln()).sum()
    }

    #[test]
    fn log_binomial_matches_product_form() {
        for &m in &[3usize, 15, 136, 1225, 10_000] {
            for k in [0, 1, m / 3, m / 2, m] {
                let want = ln_binomial_by_product(m, k);
                assert_abs_diff_eq!(ln_binomial(m, k), want, epsilon = 1e-9 * want.max(1.0));
            }
        }
    }

    #[test]
    fn empty_graph_has_zero_log_prior() {
        for (h, c) in [(0.3, 0.1), (5.0, 1.0), (1.0, 0.0)] {
            let p = PriorSpec::loss_based(h, c, 10).unwrap();
            assert_eq!(p.log_prior(&Graph::empty(5)).unwrap(), 0.0);
        }
    }

    #[test]
    fn carvalho_scott_single_edge() {
        let p = PriorSpec::loss_based(1.0, 1.0, 3).unwrap();
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert_abs_diff_eq!(p.log_prior(&g).unwrap(), -(3f64.ln()), epsilon = 1e-12);
        let cs = PriorSpec::new(PriorVariant::CarvalhoScott, 3).unwrap();
        assert_eq!(cs.log_prior(&g).unwrap(), p.log_prior(&g).unwrap());
    }

    #[test]
    fn special_cases_agree_with_loss_based() {
        let m = 21;
        for k in 0..=m {
            let lb = |h, c| PriorSpec::loss_based(h, c, m).unwrap().log_prior_size(k);
            let v = |var| PriorSpec::new(var, m).unwrap().log_prior_size(k);
            assert_eq!(v(PriorVariant::Uniform), lb(0.0, 0.7));
            assert_eq!(v(PriorVariant::Mixture), lb(1.0, 0.5));
            assert_eq!(v(PriorVariant::VillaLee { h: 2.5 }), lb(2.5, 0.0));
        }
    }

    #[test]
    fn uniform_is_constant() {
        let p = PriorSpec::loss_based(0.0, 0.4, 15).unwrap();
        assert!((0..=15).all(|k| p.log_prior_size(k) == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PriorSpec::loss_based(-1.0, 0.5, 3).is_err());
        assert!(PriorSpec::loss_based(1.0, 1.5, 3).is_err());
        assert!(PriorSpec::new(PriorVariant::Bernoulli { phi: 1.0 }, 3).is_err());
        assert!(PriorSpec::new(PriorVariant::BetaBinomial { a: 0.0, b: 1.0 }, 3).is_err());
        let p = PriorSpec::loss_based(1.0, 0.5, 3).unwrap();
        assert!(p.log_prior(&Graph::empty(4)).is_err());
    }

    #[test]
    fn beta_binomial_one_one_is_carvalho_scott_up_to_constant() {
        let m = 10;
        let bb = PriorSpec::new(PriorVariant::BetaBinomial { a: 1.0, b: 1.0 }, m).unwrap();
        for k in 0..=m {
            let want = -((m + 1) as f64).ln() - ln_binomial(m, k);
            assert_abs_diff_eq!(bb.log_prior_size(k), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn bernoulli_weighted_is_binomial() {
        let p = PriorSpec::new(PriorVariant::Bernoulli { phi: 0.2 }, 15).unwrap();
        let (mean, var) = p.size_distribution(SizeWeighting::GraphCount).moments();
        assert_abs_diff_eq!(mean, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 15.0 * 0.2 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn bernoulli_edge_density_gives_vertex_count_edges() {
        for v in [4usize, 7, 12, 30] {
            let phi = 2.0 / (v as f64 - 1.0);
            let p = PriorSpec::for_vertices(PriorVariant::Bernoulli { phi }, v).unwrap();
            let (mean, _) = p.size_distribution(SizeWeighting::GraphCount).moments();
            assert_abs_diff_eq!(mean, v as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn point_mass_moments() {
        assert_eq!(SizeDistribution::point_mass(7, 0).moments(), (0.0, 0.0));
    }

    #[test]
    fn calibrate_mean_only_prefers_zero_c() {
        let spec = calibrate(15, 3.0, None).unwrap();
        let (h, c) = spec.loss_parameters().unwrap();
        assert_eq!(c, 0.0);
        let (mean, _) = spec.size_distribution(SizeWeighting::PerSize).moments();
        assert_abs_diff_eq!(mean, 3.0, epsilon = CALIBRATE_MEAN_TOL);
        assert!(h > 0.2 && h < 0.35);
    }

    #[test]
    fn calibrate_half_m_gives_flat_prior() {
        let spec = calibrate(10, 5.0, None).unwrap();
        assert_eq!(spec.loss_parameters().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn calibrate_rejects_out_of_range() {
        assert!(matches!(calibrate(15, 0.0, None), Err(Error::Domain(_))));
        assert!(matches!(calibrate(15, 10.0, None), Err(Error::Unattainable(_))));
        assert!(matches!(calibrate(15, 3.0, Some(500.0)), Err(Error::Unattainable(_))));
    }
}
