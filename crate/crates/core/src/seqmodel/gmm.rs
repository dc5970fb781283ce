use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Diagonal-covariance Gaussian mixture emitting one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState<T> {
    dim: usize,
    weights: Vec<T>,
    means: Vec<T>,
    vars: Vec<T>,
    // ln w_k - (d ln 2π + Σ ln σ²) / 2
    log_norm: Vec<T>,
    inv_vars: Vec<T>,
}

impl<T: Scalar> GmmState<T> {
    /// Builds a mixture from flat component-major `means` and `vars`.
    pub fn new(weights: Vec<T>, means: Vec<T>, vars: Vec<T>) -> Result<Self> {
        let g = weights.len();
        if g == 0 {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        let dim = means.len() / g;
        if means.len() != g * dim || vars.len() != means.len() {
            return Err(Error::DimensionMismatch { expected: g * dim, got: vars.len() });
        }
        if vars.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput("mixture variances must be positive".into()));
        }
        if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mixture weights and means must be finite".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
        }
        let mut s = GmmState { dim, weights, means, vars, log_norm: Vec::new(), inv_vars: Vec::new() };
        s.refresh();
        Ok(s)
    }

    /// Single Gaussian.
    pub fn gaussian(mean: Vec<T>, var: Vec<T>) -> Result<Self> {
        Self::new(vec![T::one()], mean, var)
    }

    fn refresh(&mut self) {
        let two_pi = T::lit(std::f64::consts::TAU).ln();
        self.inv_vars = self.vars.iter().map(|&v| v.recip()).collect();
        self.log_norm = (0..self.weights.len())
            .map(|k| {
                let log_det: T = self.var(k).iter().map(|v| v.ln()).sum();
                self.weights[k].ln() - T::lit(0.5) * (T::from_count(self.dim) * two_pi + log_det)
            })
            .collect();
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[T] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn var(&self, k: usize) -> &[T] {
        &self.vars[k * self.dim..(k + 1) * self.dim]
    }

    /// Log density of component `k` including its log weight.
    #[inline]
    pub fn component_log_pdf(&self, k: usize, x: &[T]) -> T {
        let lo = k * self.dim;
        let mu = &self.means[lo..lo + self.dim];
        let iv = &self.inv_vars[lo..lo + self.dim];
        let mut q = T::zero();
        for i in 0..self.dim {
            let d = x[i] - mu[i];
            q += d * d * iv[i];
        }
        self.log_norm[k] - T::lit(0.5) * q
    }

    /// Mixture log density without the dimension check.
    #[inline]
    pub fn log_pdf_unchecked(&self, x: &[T]) -> T {
        if self.weights.len() == 1 {
            return self.component_log_pdf(0, x);
        }
        let mut acc = T::neg_infinity();
        for k in 0..self.weights.len() {
            acc = T::log_add(acc, self.component_log_pdf(k, x));
        }
        acc
    }

    /// `ln Σ_k w_k N(x; μ_k, Σ_k)`.
    pub fn log_pdf(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.log_pdf_unchecked(x))
    }

    /// Writes per-component log densities into `out` and returns their log-sum.
    pub fn component_log_pdfs(&self, x: &[T], out: &mut Vec<T>) -> T {
        out.clear();
        out.extend((0..self.weights.len()).map(|k| self.component_log_pdf(k, x)));
        log_sum_exp(out)
    }

    /// Replaces all parameters; `means`/`vars` keep the component-major layout.
    pub(crate) fn set_params(&mut self, weights: Vec<T>, means: Vec<T>, vars: Vec<T>) {
        debug_assert_eq!(means.len(), weights.len() * self.dim);
        self.weights = weights;
        self.means = means;
        self.vars = vars;
        self.refresh();
    }

    /// Splits the heaviest component into two with means shifted by
    /// `±offset·σ` and half the weight each. Ties go to the lower index.
    pub fn split_heaviest(&mut self, offset: T) {
        let mut best = 0;
        for k in 1..self.weights.len() {
            if self.weights[k] > self.weights[best] {
                best = k;
            }
        }
        let (lo, hi) = (best * self.dim, (best + 1) * self.dim);
        let mut shifted = self.means[lo..hi].to_vec();
        for i in 0..self.dim {
            let delta = offset * self.vars[lo + i].sqrt();
            self.means[lo + i] += delta;
            shifted[i] -= delta;
        }
        let half = self.weights[best] * T::lit(0.5);
        self.weights[best] = half;
        self.weights.push(half);
        self.means.extend_from_slice(&shifted);
        let var = self.vars[lo..hi].to_vec();
        self.vars.extend_from_slice(&var);
        self.refresh();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_normal_values() {
        let g = GmmState::gaussian(vec![0.0f64], vec![1.0]).unwrap();
        assert!((g.log_pdf(&[0.0]).unwrap() - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        assert!((g.log_pdf(&[1.0]).unwrap() + 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!(g.log_pdf(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn identical_components_collapse() {
        let single = GmmState::gaussian(vec![0.3f64, -1.0], vec![0.5, 2.0]).unwrap();
        let twin = GmmState::new(vec![0.5, 0.5], vec![0.3, -1.0, 0.3, -1.0], vec![0.5, 2.0, 0.5, 2.0]).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [-3.0, 4.0]] {
            assert!((single.log_pdf(&x).unwrap() - twin.log_pdf(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GmmState::new(vec![0.6f64, 0.6], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(GmmState::gaussian(vec![0.0f64], vec![0.0]).is_err());
        assert!(GmmState::<f64>::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn split_doubles_and_perturbs() {
        let mut g = GmmState::gaussian(vec![1.0f64], vec![4.0]).unwrap();
        g.split_heaviest(0.2);
        assert_eq!(g.components(), 2);
        assert_eq!(g.weights(), &[0.5, 0.5]);
        assert!((g.mean(0)[0] - 1.4).abs() < 1e-12 && (g.mean(1)[0] - 0.6).abs() < 1e-12);
        g.split_heaviest(0.2);
        g.split_heaviest(0.2);
        assert_eq!(g.components(), 4);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_tracks_double() {
        let w = [0.3, 0.7];
        let m = [0.0, 1.0, -2.0, 0.5];
        let v = [1.0, 2.0, 0.5, 0.25];
        let g64 = crate::GmmState64::new(w.to_vec(), m.to_vec(), v.to_vec()).unwrap();
        let g32 = crate::GmmState32::new(
            w.iter().map(|&x| x as f32).collect(),
            m.iter().map(|&x| x as f32).collect(),
            v.iter().map(|&x| x as f32).collect(),
        )
        .unwrap();
        for x in [[0.0, 0.0], [-1.5, 0.7], [3.0, -2.0]] {
            let a = g64.log_pdf(&x).unwrap();
            let b = g32.log_pdf(&[x[0] as f32, x[1] as f32]).unwrap();
            assert!((a - b as f64).abs() < 1e-4, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn density_integrates_to_one(mu in -5.0f64..5.0, var in 0.05f64..9.0) {
            let g = GmmState::gaussian(vec![mu], vec![var]).unwrap();
            let sd = var.sqrt();
            let n = 4000;
            let h = 16.0 * sd / n as f64;
            let mass: f64 = (0..=n)
                .map(|i| {
                    let x = mu - 8.0 * sd + i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * g.log_pdf(&[x]).unwrap().exp()
                })
                .sum::<f64>() * h;
            prop_assert!((mass - 1.0).abs() < 0.02);
        }
    }
}
