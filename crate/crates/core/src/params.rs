use serde::{Deserialize, Serialize};

use crate::scalar::{dot, Scalar};

/// Common coefficients `β` plus sender effects `α` and receiver effects `γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParameterSet<T> {
    pub beta: Vec<T>,
    pub alpha: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Scalar> ParameterSet<T> {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            beta: vec![T::zero(); k],
            alpha: vec![T::zero(); n],
            gamma: vec![T::zero(); n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim_beta(&self) -> usize {
        self.beta.len()
    }

    #[inline]
    pub fn pi(&self, i: usize, j: usize) -> T {
        self.alpha[i] + self.gamma[j]
    }

    /// Linear index `x'β + α_i + γ_j`.
    #[inline]
    pub fn eta(&self, x: &[T], i: usize, j: usize) -> T {
        dot(x, &self.beta) + self.pi(i, j)
    }

    /// `Σα − Σγ`.
    pub fn normalization_gap(&self) -> T {
        self.alpha.iter().copied().sum::<T>() - self.gamma.iter().copied().sum::<T>()
    }

    /// Shift the level so that `Σα = Σγ` without changing any `π_ij`.
    pub fn normalize(&mut self) {
        let n = self.alpha.len();
        if n == 0 {
            return;
        }
        let delta = self.normalization_gap() / T::from_usize_lossy(2 * n);
        self.alpha.iter_mut().for_each(|a| *a = *a - delta);
        self.gamma.iter_mut().for_each(|g| *g = *g + delta);
    }

    /// Stack as `(β, α, γ)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.beta.clone();
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn from_slice(v: &[T], n: usize, k: usize) -> Self {
        assert_eq!(v.len(), k + 2 * n);
        Self {
            beta: v[..k].to_vec(),
            alpha: v[k..k + n].to_vec(),
            gamma: v[k + n..].to_vec(),
        }
    }

    /// Reorder nodes: new node `a` is old node `perm[a]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            beta: self.beta.clone(),
            alpha: perm.iter().map(|&p| self.alpha[p]).collect(),
            gamma: perm.iter().map(|&p| self.gamma[p]).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        ParameterSet {
            beta: c(&self.beta),
            alpha: c(&self.alpha),
            gamma: c(&self.gamma),
        }
    }
}
