//! Partialled scores and dyad-clustered sandwich variance for `β`.

use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::Scalar;
use crate::special::two_sided_p;

/// Which projection of the `β` score onto the fixed-effect scores to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiVariant {
    /// `Ξ_ij = (1/c) Σ_s Σ_t Γ_ijst q_st x_st` with
    /// `Γ_ijst = (αα)_is + (γα)_js + (αγ)_it + (γγ)_jt`.
    #[default]
    Gamma,
    /// Prefactor `1/N` and index pattern `(αα)_is + (γα)_jt + (αγ)_it + (γγ)_st`.
    MainText,
}

impl std::str::FromStr for XiVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gamma" | "appendix" => Ok(XiVariant::Gamma),
            "main_text" | "maintext" | "main" => Ok(XiVariant::MainText),
            other => Err(format!("unknown xi variant {other:?} (expected gamma or main-text)")),
        }
    }
}

/// `Ξ_ij` and `D_ij = ∂βℓ_ij − Ξ_ij ∂πℓ_ij` for every ordered pair.
#[derive(Clone, Debug)]
pub struct PartialledScore<T> {
    n: usize,
    k: usize,
    xi: Vec<T>,
    d: Vec<T>,
    /// `−∂η²ℓ_ij`, kept for the second `Ŵ` path.
    curvature: Vec<T>,
    pub variant: XiVariant,
}

impl<T: Scalar> PartialledScore<T> {
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn dim_beta(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> &[T] {
        let at = (i * self.n + j) * self.k;
        &self.xi[at..at + self.k]
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> &[T] {
        let at = (i * self.n + j) * self.k;
        &self.d[at..at + self.k]
    }

    /// Multiply every `D_ij` by `c`.
    pub fn scale_d(&mut self, c: T) {
        self.d.iter_mut().for_each(|v| *v = *v * c);
    }

    /// `Σ_ij D_ij`.
    pub fn d_total(&self) -> Vec<T> {
        let mut tot = vec![T::zero(); self.k];
        for i in 0..self.n {
            for j in (0..self.n).filter(|&j| j != i) {
                for (t, &v) in tot.iter_mut().zip(self.d(i, j)) {
                    *t = *t + v;
                }
            }
        }
        tot
    }
}

/// Row and column aggregates `R_s = Σ_t q_st x_st`, `C_t = Σ_s q_st x_st`
/// over the fit's edges, for one covariate `r`.
fn margins<T: Scalar>(fit: &FitResult<T>, data: &NetworkData<T>, q: &[T], r: usize) -> (Vec<T>, Vec<T>) {
    let n = data.n_nodes();
    let mut rows = vec![T::zero(); n];
    let mut cols = vec![T::zero(); n];
    for (s, t) in data.edges() {
        if fit.effective_mask.included(s, t) {
            let v = q[s * n + t] * data.x(s, t)[r];
            rows[s] = rows[s] + v;
            cols[t] = cols[t] + v;
        }
    }
    (rows, cols)
}

pub fn compute_partialled_score<T: Scalar>(
    fit: &FitResult<T>,
    data: &NetworkData<T>,
    variant: XiVariant,
) -> Result<PartialledScore<T>> {
    let (n, k) = (data.n_nodes(), data.dim_beta());
    let p = &fit.params;
    let mut d1 = vec![T::zero(); n * n];
    let mut q = vec![T::zero(); n * n];
    for (i, j) in data.edges() {
        let der = fit.family.eta_derivs(data.y(i, j), p.eta(data.x(i, j), i, j));
        d1[i * n + j] = der.d1;
        q[i * n + j] = -der.d2;
    }
    let inv = fit.hessian.inverse_phi_blocks();
    let mut xi = vec![T::zero(); n * n * k];
    for r in 0..k {
        let (rows, cols) = margins(fit, data, &q, r);
        let (za, zg, constant) = match variant {
            XiVariant::Gamma => {
                let inv_c = T::one() / fit.normalizer;
                let za: Vec<T> = inv
                    .alpha_alpha
                    .mat_vec(&rows)
                    .iter()
                    .zip(inv.alpha_gamma.mat_vec(&cols))
                    .map(|(&a, b)| (a + b) * inv_c)
                    .collect();
                let zg: Vec<T> = inv
                    .gamma_alpha
                    .mat_vec(&rows)
                    .iter()
                    .zip(inv.gamma_gamma.mat_vec(&cols))
                    .map(|(&a, b)| (a + b) * inv_c)
                    .collect();
                (za, zg, T::zero())
            }
            XiVariant::MainText => {
                let inv_n = T::one() / T::from_usize_lossy(n);
                let za: Vec<T> = inv
                    .alpha_alpha
                    .mat_vec(&rows)
                    .iter()
                    .zip(inv.alpha_gamma.mat_vec(&cols))
                    .map(|(&a, b)| (a + b) * inv_n)
                    .collect();
                let zg: Vec<T> = inv.gamma_alpha.mat_vec(&cols).iter().map(|&a| a * inv_n).collect();
                let mut c = T::zero();
                for (s, t) in data.edges() {
                    if fit.effective_mask.included(s, t) {
                        c = c + inv.gamma_gamma[(s, t)] * q[s * n + t] * data.x(s, t)[r];
                    }
                }
                (za, zg, c * inv_n)
            }
        };
        for (i, j) in data.edges() {
            xi[(i * n + j) * k + r] = za[i] + zg[j] + constant;
        }
    }
    let mut d = vec![T::zero(); n * n * k];
    for (i, j) in data.edges() {
        let x = data.x(i, j);
        let at = (i * n + j) * k;
        for r in 0..k {
            d[at + r] = d1[i * n + j] * (x[r] - xi[at + r]);
        }
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian {
            block: "fixed effects",
            nodes: Vec::new(),
        });
    }
    Ok(PartialledScore {
        n,
        k,
        xi,
        d,
        curvature: q,
        variant,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VarianceEstimate<T> {
    pub w_hat: Matrix<T>,
    pub omega_hat: Matrix<T>,
    pub v_hat: Matrix<T>,
    pub se: Vec<T>,
    /// Always dyad-level: `(i, j)` and `(j, i)` form one cluster.
    pub clustering: String,
    pub w_eigenvalues: Vec<T>,
    /// Max-abs gap between `Ŵ` from the partialled score and from the
    /// Newton factorization.
    pub w_path_gap: T,
}

/// `Ŵ = (1/(N c)) Σ q_ij x_ij (x_ij − Ξ_ij)'`, symmetrized.
pub fn w_hat_from_partialled<T: Scalar>(fit: &FitResult<T>, data: &NetworkData<T>, ps: &PartialledScore<T>) -> Matrix<T> {
    let (n, k) = (data.n_nodes(), data.dim_beta());
    let mut w = Matrix::zeros(k, k);
    for (i, j) in data.edges() {
        if !fit.effective_mask.included(i, j) {
            continue;
        }
        let x = data.x(i, j);
        let xi = ps.xi(i, j);
        let q = ps.curvature[i * n + j];
        for a in 0..k {
            for b in 0..k {
                w[(a, b)] = w[(a, b)] + q * x[a] * (x[b] - xi[b]);
            }
        }
    }
    w.scaled(T::one() / (T::from_usize_lossy(n) * fit.normalizer)).symmetrized()
}

/// `(1/(N(N−1))) Σ_{j<i} (D_ij + D_ji)(D_ij + D_ji)'`.
pub fn omega_hat<T: Scalar>(ps: &PartialledScore<T>) -> Matrix<T> {
    let (n, k) = (ps.n, ps.k);
    let mut om = Matrix::zeros(k, k);
    let mut s = vec![T::zero(); k];
    for i in 0..n {
        for j in 0..i {
            for (r, v) in s.iter_mut().enumerate() {
                *v = ps.d(i, j)[r] + ps.d(j, i)[r];
            }
            for a in 0..k {
                for b in 0..k {
                    om[(a, b)] = om[(a, b)] + s[a] * s[b];
                }
            }
        }
    }
    om.scaled(T::one() / T::from_usize_lossy(n * (n - 1)))
}

pub fn sandwich_variance<T: Scalar>(
    fit: &FitResult<T>,
    ps: &PartialledScore<T>,
    data: &NetworkData<T>,
) -> Result<VarianceEstimate<T>> {
    let n = T::from_usize_lossy(data.n_nodes());
    let w = w_hat_from_partialled(fit, data, ps);
    let w_path_gap = w.max_abs_diff(&fit.w_hat());
    let eig = symmetric_eigenvalues(&w);
    let chol = w.cholesky().map_err(|_| Error::NotPositiveDefinite {
        what: "W_hat",
        eigenvalues: eig.iter().map(|v| v.as_f64()).collect(),
    })?;
    let winv = chol.inverse();
    let om = omega_hat(ps);
    let v = winv.matmul(&om).matmul(&winv).symmetrized();
    let se = v.diagonal().iter().map(|&d| d.max(T::zero()).sqrt() / n).collect();
    Ok(VarianceEstimate {
        w_hat: w,
        omega_hat: om,
        v_hat: v,
        se,
        clustering: "dyad".into(),
        w_eigenvalues: eig,
        w_path_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TStat<T> {
    pub estimate: T,
    pub null: T,
    pub se: T,
    pub t: T,
    pub p: T,
}

/// Per-coefficient `t = (β − β₀)/se` with two-sided normal p-values.
pub fn t_statistics<T: Scalar>(beta: &[T], null: &[T], variance: &VarianceEstimate<T>) -> Vec<TStat<T>> {
    beta.iter()
        .zip(null)
        .zip(&variance.se)
        .map(|((&b, &b0), &se)| {
            let t = if b == b0 { T::zero() } else { (b - b0) / se };
            TStat {
                estimate: b,
                null: b0,
                se,
                t,
                p: T::lit(two_sided_p(t.as_f64())),
            }
        })
        .collect()
}
