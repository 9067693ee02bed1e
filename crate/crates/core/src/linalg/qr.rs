use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, OpCounter};

/// Householder QR with column pivoting, `B·P = Q·R`.
///
/// Only full-column-rank bases are accepted; numerical rank is the number of
/// diagonal entries of `R` above `max(m, k)·ε·|R₀₀|`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    /// Householder vectors; `reflectors[j]` acts on entries `j..rows`.
    reflectors: Vec<Vec<f64>>,
    taus: Vec<f64>,
    /// Upper-triangular `R`, column-major `k×k`.
    r: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn factor(basis: &DenseMatrix, ctr: &mut OpCounter) -> Result<Self> {
        let m = basis.rows();
        let k = basis.cols();
        let mut work: Vec<Vec<f64>> = basis.columns().map(|c| c.to_vec()).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        let steps = m.min(k);
        let mut reflectors = Vec::with_capacity(steps);
        let mut taus = Vec::with_capacity(steps);
        let mut diag = Vec::with_capacity(steps);

        for j in 0..steps {
            // Pivot on the largest remaining column norm, recomputed exactly.
            let mut best = j;
            let mut best_norm = -1.0;
            for (c, col) in work.iter().enumerate().skip(j) {
                let n = dot(&col[j..], &col[j..]);
                if n > best_norm {
                    best_norm = n;
                    best = c;
                }
            }
            ctr.mul_add((m - j) * (k - j));
            work.swap(j, best);
            perm.swap(j, best);

            let x = &work[j][j..];
            let norm = dot(x, x).sqrt();
            let mut v = x.to_vec();
            let (alpha, tau) = if norm == 0.0 {
                (0.0, 0.0)
            } else {
                let alpha = if x[0] >= 0.0 { -norm } else { norm };
                v[0] -= alpha;
                let vtv = dot(&v, &v);
                (alpha, 2.0 / vtv)
            };
            ctr.mul_add(2 * (m - j));
            for col in work.iter_mut().skip(j + 1) {
                reflect(&v, tau, &mut col[j..], ctr);
            }
            work[j][j] = alpha;
            for e in &mut work[j][j + 1..] {
                *e = 0.0;
            }
            diag.push(alpha);
            reflectors.push(v);
            taus.push(tau);
        }

        let largest = diag.first().map_or(0.0, |d: &f64| d.abs());
        let tol = m.max(k) as f64 * f64::EPSILON * largest;
        let rank = diag.iter().take_while(|d| d.abs() > tol).count();
        if rank < k {
            return Err(Error::IllConditioned { rank, cols: k });
        }

        let mut r = vec![0.0; k * k];
        for (j, col) in work.iter().enumerate() {
            r[j * k..j * k + j + 1].copy_from_slice(&col[..=j]);
        }
        Ok(Self {
            rows: m,
            reflectors,
            taus,
            r,
            perm,
        })
    }

    pub fn rank(&self) -> usize {
        self.taus.len()
    }

    /// Overwrites `t` with `Qᵀ t`.
    fn apply_qt(&self, t: &mut [f64], ctr: &mut OpCounter) {
        for (j, (v, &tau)) in self.reflectors.iter().zip(&self.taus).enumerate() {
            reflect(v, tau, &mut t[j..], ctr);
        }
    }

    /// Overwrites `t` with `Q t`.
    fn apply_q(&self, t: &mut [f64], ctr: &mut OpCounter) {
        for (j, (v, &tau)) in self.reflectors.iter().zip(&self.taus).enumerate().rev() {
            reflect(v, tau, &mut t[j..], ctr);
        }
    }

    /// Orthogonal projection of `t` onto the range of the basis.
    pub fn project(&self, t: &[f64], ctr: &mut OpCounter) -> Vec<f64> {
        let mut w = t.to_vec();
        self.apply_qt(&mut w, ctr);
        for e in &mut w[self.rank()..] {
            *e = 0.0;
        }
        self.apply_q(&mut w, ctr);
        w
    }

    /// `t` minus its projection, computed from the complementary block of `Qᵀt`.
    pub fn residual(&self, t: &[f64], ctr: &mut OpCounter) -> Vec<f64> {
        let mut w = t.to_vec();
        self.apply_qt(&mut w, ctr);
        for e in &mut w[..self.rank()] {
            *e = 0.0;
        }
        self.apply_q(&mut w, ctr);
        w
    }

    /// Norm of the residual of `t`, read off `Qᵀt` without transforming back.
    pub fn residual_norm(&self, t: &[f64], ctr: &mut OpCounter) -> f64 {
        let mut w = t.to_vec();
        self.apply_qt(&mut w, ctr);
        let tail = &w[self.rank()..];
        ctr.mul_add(tail.len());
        dot(tail, tail).sqrt()
    }

    /// Least-squares coefficients `c` minimising `‖B c − t‖₂`.
    pub fn solve(&self, t: &[f64], ctr: &mut OpCounter) -> Vec<f64> {
        let k = self.rank();
        let mut w = t.to_vec();
        self.apply_qt(&mut w, ctr);
        let mut y = w[..k].to_vec();
        for i in (0..k).rev() {
            let mut s = y[i];
            for j in i + 1..k {
                s -= self.r[j * k + i] * y[j];
            }
            y[i] = s / self.r[i * k + i];
        }
        ctr.mul_add(k * (k + 1) / 2);
        let mut c = vec![0.0; k];
        for (i, &p) in self.perm.iter().enumerate() {
            c[p] = y[i];
        }
        c
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

#[inline]
fn reflect(v: &[f64], tau: f64, t: &mut [f64], ctr: &mut OpCounter) {
    if tau == 0.0 {
        return;
    }
    let s = tau * dot(v, t);
    for (ti, vi) in t.iter_mut().zip(v) {
        *ti -= s * vi;
    }
    ctr.mul_add(2 * v.len());
}

/// `Basis · Basis⁺ · Targets`, via pivoted QR of the basis.
pub fn least_squares_project(
    basis: &DenseMatrix,
    targets: &DenseMatrix,
    ctr: &mut OpCounter,
) -> Result<DenseMatrix> {
    if basis.rows() != targets.rows() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, targets have {}",
            basis.rows(),
            targets.rows()
        )));
    }
    let qr = PivotedQr::factor(basis, ctr)?;
    let mut data = Vec::with_capacity(targets.rows() * targets.cols());
    for t in targets.columns() {
        data.extend(qr.project(t, ctr));
    }
    DenseMatrix::new(targets.rows(), targets.cols(), data)
}
