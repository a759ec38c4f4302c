//! Sparse normal equations for chain-structured problems: a symmetric
//! block-tridiagonal band (one block per active support state, or per
//! interleaved group of support states when several trajectories share the
//! grid) plus an optional dense border for globally shared parameters.
//!
//! The solve is a block Cholesky factorization along the band followed by a
//! Schur complement for the border.  Only the lower triangle is stored: the
//! `sub[k]` block is the coupling of band block `k + 1` onto block `k`.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("band block {0} is not positive definite")]
    BandNotPd(usize),
    #[error("border Schur complement is not positive definite")]
    BorderNotPd,
    #[error("system is empty")]
    Empty,
}

/// Symmetric positive-definite system with block-tridiagonal band plus an
/// optional dense border, along with its right-hand side.
#[derive(Debug, Clone)]
pub struct BandBorder {
    /// Band block dimension.
    pub dim: usize,
    /// Border dimension, zero when there is no border.
    pub bdim: usize,
    /// Diagonal band blocks, `dim x dim`.
    pub diag: Vec<DMatrix<f64>>,
    /// Sub-diagonal blocks: `sub[k]` couples block `k + 1` onto block `k`.
    pub sub: Vec<DMatrix<f64>>,
    /// Border coupling per band block, `dim x bdim`; empty when `bdim == 0`.
    pub border: Vec<DMatrix<f64>>,
    /// Border diagonal, `bdim x bdim`.
    pub corner: DMatrix<f64>,
    /// Right-hand side per band block.
    pub b: Vec<DVector<f64>>,
    /// Right-hand side for the border.
    pub b_border: DVector<f64>,
}

impl BandBorder {
    pub fn new(n_blocks: usize, dim: usize, bdim: usize) -> Self {
        Self {
            dim,
            bdim,
            diag: vec![DMatrix::zeros(dim, dim); n_blocks],
            sub: vec![DMatrix::zeros(dim, dim); n_blocks.saturating_sub(1)],
            border: if bdim > 0 {
                vec![DMatrix::zeros(dim, bdim); n_blocks]
            } else {
                Vec::new()
            },
            corner: DMatrix::zeros(bdim, bdim),
            b: vec![DVector::zeros(dim); n_blocks],
            b_border: DVector::zeros(bdim),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Add `lambda` to every diagonal entry (band and border).
    pub fn add_damping(&mut self, lambda: f64) {
        for d in &mut self.diag {
            for i in 0..self.dim {
                d[(i, i)] += lambda;
            }
        }
        for i in 0..self.bdim {
            self.corner[(i, i)] += lambda;
        }
    }

    /// Assemble the full dense system; reference implementation for tests
    /// and small problems.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n_blocks();
        let total = n * self.dim + self.bdim;
        let mut h = DMatrix::zeros(total, total);
        let mut rhs = DVector::zeros(total);
        for k in 0..n {
            let o = k * self.dim;
            h.view_mut((o, o), (self.dim, self.dim))
                .copy_from(&self.diag[k]);
            if k + 1 < n {
                let s = &self.sub[k];
                h.view_mut((o + self.dim, o), (self.dim, self.dim))
                    .copy_from(s);
                h.view_mut((o, o + self.dim), (self.dim, self.dim))
                    .copy_from(&s.transpose());
            }
            if self.bdim > 0 {
                let e = &self.border[k];
                h.view_mut((o, n * self.dim), (self.dim, self.bdim))
                    .copy_from(e);
                h.view_mut((n * self.dim, o), (self.bdim, self.dim))
                    .copy_from(&e.transpose());
            }
            rhs.rows_mut(o, self.dim).copy_from(&self.b[k]);
        }
        if self.bdim > 0 {
            h.view_mut((n * self.dim, n * self.dim), (self.bdim, self.bdim))
                .copy_from(&self.corner);
            rhs.rows_mut(n * self.dim, self.bdim)
                .copy_from(&self.b_border);
        }
        (h, rhs)
    }

    /// Solve the system, returning the band solution per block and the
    /// border solution (empty vector when there is no border).
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self) -> Result<(Vec<DVector<f64>>, DVector<f64>), LinalgError> {
        let n = self.n_blocks();
        if n == 0 {
            return Err(LinalgError::Empty);
        }

        // Block Cholesky along the band: diag[k] = L_k L_k^T + M_{k-1} M_{k-1}^T,
        // sub[k] = M_k L_k^T.
        let mut l: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut m: Vec<DMatrix<f64>> = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let mut d = self.diag[k].clone();
            if k > 0 {
                let mk = &m[k - 1];
                d -= mk * mk.transpose();
            }
            let lk = Cholesky::new(d).ok_or(LinalgError::BandNotPd(k))?.unpack();
            if k + 1 < n {
                // M_k = sub[k] L_k^-T, computed by solving L_k M_k^T = sub[k]^T.
                let mut rhs = self.sub[k].transpose();
                if !lk.solve_lower_triangular_mut(&mut rhs) {
                    return Err(LinalgError::BandNotPd(k));
                }
                m.push(rhs.transpose());
            }
            l.push(lk);
        }

        // Joint right-hand side per block: [border columns | b].
        let rhs_cols = self.bdim + 1;
        let mut z: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut rhs = DMatrix::zeros(self.dim, rhs_cols);
                if self.bdim > 0 {
                    rhs.view_mut((0, 0), (self.dim, self.bdim))
                        .copy_from(&self.border[k]);
                }
                rhs.column_mut(self.bdim).copy_from(&self.b[k]);
                rhs
            })
            .collect();

        // Forward: L u = rhs with the band structure.
        for k in 0..n {
            if k > 0 {
                let carry = &m[k - 1] * &z[k - 1];
                z[k] -= carry;
            }
            if !l[k].solve_lower_triangular_mut(&mut z[k]) {
                return Err(LinalgError::BandNotPd(k));
            }
        }
        // Backward: L^T x = u.
        for k in (0..n).rev() {
            if k + 1 < n {
                let carry = m[k].transpose() * &z[k + 1];
                z[k] -= carry;
            }
            if !l[k].tr_solve_lower_triangular_mut(&mut z[k]) {
                return Err(LinalgError::BandNotPd(k));
            }
        }

        if self.bdim == 0 {
            let x = z.into_iter().map(|zk| zk.column(0).into_owned()).collect();
            return Ok((x, DVector::zeros(0)));
        }

        // Schur complement on the border: S = C - E^T A^-1 E.
        let mut s = self.corner.clone();
        let mut rhs_y = self.b_border.clone();
        for k in 0..n {
            let e_t = self.border[k].transpose();
            s -= &e_t * z[k].view((0, 0), (self.dim, self.bdim));
            rhs_y -= &e_t * z[k].column(self.bdim);
        }
        // Symmetrize against accumulation rounding before factorizing.
        let s = 0.5 * (&s + s.transpose());
        let y = Cholesky::new(s)
            .ok_or(LinalgError::BorderNotPd)?
            .solve(&rhs_y);

        let x = z
            .into_iter()
            .map(|zk| {
                (zk.column(self.bdim) - zk.view((0, 0), (self.dim, self.bdim)) * &y).into_owned()
            })
            .collect();
        Ok((x, y))
    }
}
