//! Bordered-arrow factorization of the negative Hessian.
//!
//! Parameter order is `(β, α, γ)`. With `h_ij = −∂η²ℓ_ij / c` the negative
//! Hessian of the penalized objective has
//!
//! ```text
//!   αα: diag(Σ_j h_ij) + p 11'      αγ: [h_ij] − p 11'
//!   γγ: diag(Σ_i h_ij) + p 11'      ββ: Σ h_ij x_ij x_ij'
//!   βα_i: Σ_j h_ij x_ij             βγ_j: Σ_i h_ij x_ij
//! ```
//!
//! where `p = b/N` comes from the normalization penalty. The `αα` block is
//! inverted by Sherman–Morrison, the `γ` Schur complement is a dense
//! Cholesky, and `β` is eliminated last through its own (small) Schur
//! complement, which is the concentrated information for `β`.
//!
//! Only active fixed effects enter the system; inactive ones are held fixed
//! and receive zero in every solve.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug)]
pub struct HessianBlocks<T> {
    pub active_alpha: Vec<bool>,
    pub active_gamma: Vec<bool>,
    pub d_alpha: Vec<T>,
    pub d_gamma: Vec<T>,
    /// `h_ij`, the un-penalized `αγ` block.
    pub cross: Matrix<T>,
    pub beta_beta: Matrix<T>,
    /// `k × N`, column `i` is `Σ_j h_ij x_ij`.
    pub beta_alpha: Matrix<T>,
    /// `k × N`, column `j` is `Σ_i h_ij x_ij`.
    pub beta_gamma: Matrix<T>,
    /// Penalty curvature `b / N`.
    pub penalty: T,
}

impl<T: Scalar> HessianBlocks<T> {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            active_alpha: vec![true; n],
            active_gamma: vec![true; n],
            d_alpha: vec![T::zero(); n],
            d_gamma: vec![T::zero(); n],
            cross: Matrix::zeros(n, n),
            beta_beta: Matrix::zeros(k, k),
            beta_alpha: Matrix::zeros(k, n),
            beta_gamma: Matrix::zeros(k, n),
            penalty: T::zero(),
        }
    }

    /// The identity operator in structured form.
    pub fn identity(n: usize, k: usize) -> Self {
        let mut h = Self::zeros(n, k);
        h.d_alpha.fill(T::one());
        h.d_gamma.fill(T::one());
        h.beta_beta = Matrix::identity(k);
        h
    }

    pub fn n_nodes(&self) -> usize {
        self.d_alpha.len()
    }

    pub fn dim_beta(&self) -> usize {
        self.beta_beta.rows()
    }

    /// Dense `(k + 2N)`-square matrix; inactive rows and columns are the identity.
    pub fn to_dense(&self) -> Matrix<T> {
        let (n, k) = (self.n_nodes(), self.dim_beta());
        let p = self.penalty;
        let mut m = Matrix::zeros(k + 2 * n, k + 2 * n);
        for a in 0..k {
            for b in 0..k {
                m[(a, b)] = self.beta_beta[(a, b)];
            }
            for i in 0..n {
                if self.active_alpha[i] {
                    m[(a, k + i)] = self.beta_alpha[(a, i)];
                    m[(k + i, a)] = self.beta_alpha[(a, i)];
                }
                if self.active_gamma[i] {
                    m[(a, k + n + i)] = self.beta_gamma[(a, i)];
                    m[(k + n + i, a)] = self.beta_gamma[(a, i)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let (ai, aj) = (self.active_alpha[i], self.active_alpha[j]);
                let (gi, gj) = (self.active_gamma[i], self.active_gamma[j]);
                if ai && aj {
                    m[(k + i, k + j)] = p + if i == j { self.d_alpha[i] } else { T::zero() };
                }
                if gi && gj {
                    m[(k + n + i, k + n + j)] = p + if i == j { self.d_gamma[i] } else { T::zero() };
                }
                if ai && gj {
                    m[(k + i, k + n + j)] = self.cross[(i, j)] - p;
                    m[(k + n + j, k + i)] = self.cross[(i, j)] - p;
                }
            }
            if !self.active_alpha[i] {
                m[(k + i, k + i)] = T::one();
            }
            if !self.active_gamma[i] {
                m[(k + n + i, k + n + i)] = T::one();
            }
        }
        m
    }
}

/// Inverse of the fixed-effect block, as four `N × N` matrices.
#[derive(Clone, Debug)]
pub struct PhiInverse<T> {
    pub alpha_alpha: Matrix<T>,
    pub alpha_gamma: Matrix<T>,
    pub gamma_alpha: Matrix<T>,
    pub gamma_gamma: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct StructuredHessian<T> {
    blocks: HessianBlocks<T>,
    ia: Vec<usize>,
    ig: Vec<usize>,
    dinv: Vec<T>,
    dinv1: Vec<T>,
    sm: T,
    b: Matrix<T>,
    ainv_b: Matrix<T>,
    schur_gamma: Cholesky<T>,
    /// `H_φφ⁻¹ H_φβ` over active fixed effects, `(na + ng) × k`.
    z: Matrix<T>,
    schur_beta: Matrix<T>,
    schur_beta_chol: Cholesky<T>,
}

impl<T: Scalar> StructuredHessian<T> {
    pub fn factorize(blocks: HessianBlocks<T>) -> Result<Self> {
        let n = blocks.n_nodes();
        let k = blocks.dim_beta();
        let p = blocks.penalty;
        let ia: Vec<usize> = (0..n).filter(|&i| blocks.active_alpha[i]).collect();
        let ig: Vec<usize> = (0..n).filter(|&j| blocks.active_gamma[j]).collect();
        let (na, ng) = (ia.len(), ig.len());

        let scale = ia
            .iter()
            .map(|&i| blocks.d_alpha[i])
            .chain(ig.iter().map(|&j| blocks.d_gamma[j]))
            .fold(T::zero(), |m, d| m.max(d.abs()));
        let tiny = scale * T::epsilon() * T::lit(1e3);
        let bad: Vec<usize> = ia.iter().copied().filter(|&i| !(blocks.d_alpha[i] > tiny)).collect();
        if !bad.is_empty() {
            return Err(Error::SingularHessian { block: "sender", nodes: bad });
        }
        let bad: Vec<usize> = ig.iter().copied().filter(|&j| !(blocks.d_gamma[j] > tiny)).collect();
        if !bad.is_empty() {
            return Err(Error::SingularHessian { block: "receiver", nodes: bad });
        }

        let dinv: Vec<T> = ia.iter().map(|&i| T::one() / blocks.d_alpha[i]).collect();
        let dinv1 = dinv.clone();
        let s1: T = dinv.iter().copied().sum();
        let sm = p / (T::one() + p * s1);
        let b = Matrix::from_fn(na, ng, |a, g| blocks.cross[(ia[a], ig[g])] - p);

        // A⁻¹B = D⁻¹B − sm (D⁻¹1)(1'D⁻¹B)
        let colw: Vec<T> = (0..ng).map(|g| (0..na).map(|a| dinv[a] * b[(a, g)]).sum()).collect();
        let ainv_b = Matrix::from_fn(na, ng, |a, g| dinv[a] * b[(a, g)] - sm * dinv1[a] * colw[g]);

        let mut s = Matrix::from_fn(ng, ng, |g, h| {
            p + if g == h { blocks.d_gamma[ig[g]] } else { T::zero() }
        });
        for a in 0..na {
            let brow = b.row(a);
            let prow = ainv_b.row(a);
            for g in 0..ng {
                let bg = brow[g];
                if bg == T::zero() {
                    continue;
                }
                let srow = s.row_mut(g);
                for h in 0..ng {
                    srow[h] = srow[h] - bg * prow[h];
                }
            }
        }
        let s = s.symmetrized();
        let schur_gamma = s.cholesky().map_err(|piv| Error::SingularHessian {
            block: "receiver",
            nodes: vec![ig[piv]],
        })?;

        let mut h = Self {
            blocks,
            ia,
            ig,
            dinv,
            dinv1,
            sm,
            b,
            ainv_b,
            schur_gamma,
            z: Matrix::zeros(na + ng, k),
            schur_beta: Matrix::zeros(k, k),
            schur_beta_chol: Matrix::<T>::identity(0).cholesky().expect("empty"),
        };

        let mut z = Matrix::zeros(na + ng, k);
        let mut w = h.blocks.beta_beta.clone();
        for r in 0..k {
            let col = h.phi_beta_column(r);
            let sol = h.solve_phi(&col);
            for (a, &v) in sol.iter().enumerate() {
                z[(a, r)] = v;
            }
            for c in 0..k {
                let hc = h.phi_beta_column(c);
                w[(c, r)] = w[(c, r)] - dot(&hc, &sol);
            }
        }
        let w = w.symmetrized();
        h.schur_beta_chol = w.cholesky().map_err(|_| Error::SingularHessian {
            block: "beta",
            nodes: Vec::new(),
        })?;
        h.z = z;
        h.schur_beta = w;
        Ok(h)
    }

    pub fn identity(n: usize, k: usize) -> Self {
        Self::factorize(HessianBlocks::identity(n, k)).expect("identity is positive definite")
    }

    pub fn blocks(&self) -> &HessianBlocks<T> {
        &self.blocks
    }

    pub fn n_nodes(&self) -> usize {
        self.blocks.n_nodes()
    }

    pub fn dim_beta(&self) -> usize {
        self.blocks.dim_beta()
    }

    /// Concentrated `β` information: `H_ββ − H_βφ H_φφ⁻¹ H_φβ`.
    pub fn schur_beta(&self) -> &Matrix<T> {
        &self.schur_beta
    }

    fn phi_beta_column(&self, r: usize) -> Vec<T> {
        self.ia
            .iter()
            .map(|&i| self.blocks.beta_alpha[(r, i)])
            .chain(self.ig.iter().map(|&j| self.blocks.beta_gamma[(r, j)]))
            .collect()
    }

    fn apply_ainv(&self, v: &[T]) -> Vec<T> {
        let t = dot(&self.dinv1, v);
        v.iter()
            .zip(&self.dinv)
            .zip(&self.dinv1)
            .map(|((&vi, &di), &d1)| di * vi - self.sm * d1 * t)
            .collect()
    }

    /// Solve the fixed-effect block over the compressed active index set.
    fn solve_phi(&self, r: &[T]) -> Vec<T> {
        let na = self.ia.len();
        let (ra, rg) = r.split_at(na);
        let t = self.apply_ainv(ra);
        let btt = self.b.tr_mat_vec(&t);
        let mut xg: Vec<T> = rg.iter().zip(&btt).map(|(&a, &b)| a - b).collect();
        self.schur_gamma.solve_in_place(&mut xg);
        let pxg = self.ainv_b.mat_vec(&xg);
        let mut out: Vec<T> = t.iter().zip(&pxg).map(|(&a, &b)| a - b).collect();
        out.extend(xg);
        out
    }

    fn compress(&self, rhs: &[T]) -> (Vec<T>, Vec<T>) {
        let (n, k) = (self.n_nodes(), self.dim_beta());
        assert_eq!(rhs.len(), k + 2 * n, "rhs length");
        let phi = self
            .ia
            .iter()
            .map(|&i| rhs[k + i])
            .chain(self.ig.iter().map(|&j| rhs[k + n + j]))
            .collect();
        (rhs[..k].to_vec(), phi)
    }

    fn expand(&self, beta: Vec<T>, phi: &[T]) -> Vec<T> {
        let (n, k) = (self.n_nodes(), self.dim_beta());
        let mut out = beta;
        out.resize(k + 2 * n, T::zero());
        for (a, &i) in self.ia.iter().enumerate() {
            out[k + i] = phi[a];
        }
        for (g, &j) in self.ig.iter().enumerate() {
            out[k + n + j] = phi[self.ia.len() + g];
        }
        out
    }

    /// Solve `H x = rhs` in `(β, α, γ)` order. Inactive entries of the
    /// result are zero and the matching entries of `rhs` are ignored.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let k = self.dim_beta();
        let (rb, rphi) = self.compress(rhs);
        let hinv_r = self.solve_phi(&rphi);
        let zr = self.z.tr_mat_vec(&rphi);
        let mut xb: Vec<T> = rb.iter().zip(&zr).map(|(&a, &b)| a - b).collect();
        self.schur_beta_chol.solve_in_place(&mut xb);
        let mut xphi = hinv_r;
        for (a, x) in xphi.iter_mut().enumerate() {
            for r in 0..k {
                *x = *x - self.z[(a, r)] * xb[r];
            }
        }
        self.expand(xb, &xphi)
    }

    /// Inverse of the `β` block of `H⁻¹`, i.e. the concentrated information.
    pub fn concentrated_beta(&self) -> Matrix<T> {
        self.schur_beta.clone()
    }

    /// The four blocks of the fixed-effect inverse `H_φφ⁻¹`, scattered to
    /// full `N × N` shape (zero rows and columns for inactive effects).
    pub fn inverse_phi_blocks(&self) -> PhiInverse<T> {
        let n = self.n_nodes();
        let (na, ng) = (self.ia.len(), self.ig.len());
        let sinv = self.schur_gamma.inverse();
        // P S⁻¹ with P = A⁻¹B.
        let ps = self.ainv_b.matmul(&sinv);
        let mut aa = Matrix::zeros(n, n);
        let mut ag = Matrix::zeros(n, n);
        let mut gg = Matrix::zeros(n, n);
        for a in 0..na {
            let psa = ps.row(a);
            for c in 0..na {
                let mut v = -self.sm * self.dinv1[a] * self.dinv1[c];
                if a == c {
                    v = v + self.dinv[a];
                }
                v = v + dot(psa, self.ainv_b.row(c));
                aa[(self.ia[a], self.ia[c])] = v;
            }
            for g in 0..ng {
                ag[(self.ia[a], self.ig[g])] = -psa[g];
            }
        }
        for g in 0..ng {
            for h in 0..ng {
                gg[(self.ig[g], self.ig[h])] = sinv[(g, h)];
            }
        }
        PhiInverse {
            alpha_alpha: aa.symmetrized(),
            gamma_alpha: ag.transpose(),
            alpha_gamma: ag,
            gamma_gamma: gg,
        }
    }

    /// Dense negative Hessian in `(β, α, γ)` order.
    pub fn to_dense(&self) -> Matrix<T> {
        self.blocks.to_dense()
    }
}
