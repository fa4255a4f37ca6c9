//! Hermitian linear algebra for the lattice operators.
//!
//! The lattice matrices are block tridiagonal. Eigenvalues inside an energy
//! window are located by Sylvester inertia counts of `A - σ` (block `LDLᴴ`
//! with Bunch–Kaufman pivoting inside each block) and polished by Rayleigh
//! quotient iteration on the same factorization.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Dense complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// `self · other`, skipping exact zeros of `self`.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.mul_vec_acc(x, &mut y, 1.0);
        y
    }

    /// `y += s · self · x`.
    pub fn mul_vec_acc(&self, x: &[C64], y: &mut [C64], s: f64) {
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(x) {
                if *a != ZERO {
                    acc += a * b;
                }
            }
            y[i] += acc * s;
        }
    }

    /// `y += s · selfᴴ · x`.
    pub fn adjoint_mul_vec_acc(&self, x: &[C64], y: &mut [C64], s: f64) {
        for i in 0..self.rows {
            let xi = x[i];
            if xi == ZERO {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row) {
                if *a != ZERO {
                    *yj += a.conj() * xi * s;
                }
            }
        }
    }

    pub fn sub_assign(&mut self, other: &CMat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - Aᴴ|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// Submatrix `[r0, r0+nr) × [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMat {
        CMat::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.get(i, j));
            }
        }
    }

    /// Whether all entries outside the `g` diagonal tiles (each
    /// `rows/g × cols/g`) vanish.
    pub fn is_tile_diagonal(&self, g: usize) -> bool {
        if g == 0 || self.rows % g != 0 || self.cols % g != 0 {
            return false;
        }
        let (tr, tc) = (self.rows / g, self.cols / g);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i / tr != j / tc && self.get(i, j) != ZERO {
                    return false;
                }
            }
        }
        true
    }
}

/// `PAPᵀ = LDLᴴ` with `D` made of 1×1 and 2×2 Hermitian blocks
/// (Bunch–Kaufman diagonal pivoting).
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    n: usize,
    /// Unit lower `L` below the diagonal, `D` on the diagonal (and at
    /// `(k+1, k)` for 2×2 pivots).
    a: Vec<C64>,
    perm: Vec<usize>,
    /// 1: 1×1 pivot, 2: first index of a 2×2 pivot, 0: second index.
    kinds: Vec<u8>,
    negatives: usize,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + √17)/8

impl HermitianFactor {
    /// Factors the Hermitian matrix `m - shift·I`. Pivots smaller than
    /// `pivmin` in magnitude are replaced by `±pivmin`.
    pub fn new(m: &CMat, shift: f64, pivmin: f64) -> Self {
        assert_eq!(m.rows, m.cols, "factor needs a square matrix");
        let n = m.rows;
        let mut a = m.data.clone();
        for i in 0..n {
            a[i * n + i] = C64::new(a[i * n + i].re - shift, 0.0);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut kinds = vec![0u8; n];
        let mut negatives = 0;
        let mut k = 0;
        while k < n {
            let akk = a[k * n + k].re.abs();
            let mut imax = k;
            let mut colmax = 0.0;
            for i in k + 1..n {
                let v = a[i * n + k].norm();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            let (size, kp) = if akk >= BK_ALPHA * colmax {
                (1, k)
            } else {
                let mut rowmax: f64 = 0.0;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(a[imax * n + j].norm());
                    }
                }
                if akk * rowmax >= BK_ALPHA * colmax * colmax {
                    (1, k)
                } else if a[imax * n + imax].re.abs() >= BK_ALPHA * rowmax {
                    (1, imax)
                } else {
                    (2, imax)
                }
            };
            let target = k + size - 1;
            if kp != target {
                swap_symmetric(&mut a, n, target, kp);
                perm.swap(target, kp);
            }
            if size == 1 {
                let mut d = a[k * n + k].re;
                if d.abs() < pivmin {
                    d = if d < 0.0 { -pivmin } else { pivmin };
                }
                a[k * n + k] = C64::new(d, 0.0);
                if d < 0.0 {
                    negatives += 1;
                }
                let col: Vec<C64> = (k + 1..n).map(|i| a[i * n + k]).collect();
                for (ii, ci) in col.iter().enumerate() {
                    if *ci == ZERO {
                        continue;
                    }
                    let i = k + 1 + ii;
                    let f = ci / d;
                    for (jj, cj) in col.iter().enumerate() {
                        if *cj != ZERO {
                            a[i * n + k + 1 + jj] -= f * cj.conj();
                        }
                    }
                    a[i * n + k] = f;
                }
                kinds[k] = 1;
                k += 1;
            } else {
                let d11 = a[k * n + k].re;
                let d22 = a[(k + 1) * n + k + 1].re;
                let d21 = a[(k + 1) * n + k];
                let det = d11 * d22 - d21.norm_sqr();
                if det < 0.0 {
                    negatives += 1;
                } else if d11 + d22 < 0.0 {
                    negatives += 2;
                }
                let c0: Vec<C64> = (k + 2..n).map(|i| a[i * n + k]).collect();
                let c1: Vec<C64> = (k + 2..n).map(|i| a[i * n + k + 1]).collect();
                let d12 = d21.conj();
                let lrows: Vec<(C64, C64)> = c0
                    .iter()
                    .zip(&c1)
                    .map(|(x0, x1)| ((x0 * d22 - x1 * d21) / det, (-x0 * d12 + x1 * d11) / det))
                    .collect();
                for (ii, (l0, l1)) in lrows.iter().enumerate() {
                    if *l0 == ZERO && *l1 == ZERO {
                        continue;
                    }
                    let i = k + 2 + ii;
                    for jj in 0..c0.len() {
                        let (y0, y1) = (c0[jj], c1[jj]);
                        if y0 == ZERO && y1 == ZERO {
                            continue;
                        }
                        a[i * n + k + 2 + jj] -= l0 * y0.conj() + l1 * y1.conj();
                    }
                    a[i * n + k] = *l0;
                    a[i * n + k + 1] = *l1;
                }
                kinds[k] = 2;
                kinds[k + 1] = 0;
                k += 2;
            }
        }
        Self {
            n,
            a,
            perm,
            kinds,
            negatives,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative eigenvalues of the factored matrix.
    pub fn negatives(&self) -> usize {
        self.negatives
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let a = &self.a;
        let mut z: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for k in 0..n {
            let start = if self.kinds[k] == 2 { k + 2 } else { k + 1 };
            let zk = z[k];
            if zk == ZERO {
                continue;
            }
            for i in start..n {
                let l = a[i * n + k];
                if l != ZERO {
                    z[i] -= l * zk;
                }
            }
        }
        let mut k = 0;
        while k < n {
            if self.kinds[k] == 1 {
                z[k] /= a[k * n + k].re;
                k += 1;
            } else {
                let d11 = a[k * n + k].re;
                let d22 = a[(k + 1) * n + k + 1].re;
                let d21 = a[(k + 1) * n + k];
                let det = d11 * d22 - d21.norm_sqr();
                let (x0, x1) = (z[k], z[k + 1]);
                z[k] = (x0 * d22 - x1 * d21.conj()) / det;
                z[k + 1] = (-x0 * d21 + x1 * d11) / det;
                k += 2;
            }
        }
        for k in (0..n).rev() {
            let start = if self.kinds[k] == 2 { k + 2 } else { k + 1 };
            let mut acc = z[k];
            for i in start..n {
                let l = a[i * n + k];
                if l != ZERO {
                    acc -= l.conj() * z[i];
                }
            }
            z[k] = acc;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = z[i];
        }
    }

    /// `M⁻¹ B`, skipping zero columns of `B`.
    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut out = CMat::zeros(b.rows, b.cols);
        let mut col = vec![ZERO; b.rows];
        for j in 0..b.cols {
            let mut any = false;
            for i in 0..b.rows {
                col[i] = b.get(i, j);
                any |= col[i] != ZERO;
            }
            if !any {
                continue;
            }
            self.solve_in_place(&mut col);
            for i in 0..b.rows {
                out.set(i, j, col[i]);
            }
        }
        out
    }
}

fn swap_symmetric(a: &mut [C64], n: usize, r: usize, s: usize) {
    for j in 0..n {
        a.swap(r * n + j, s * n + j);
    }
    for i in 0..n {
        a.swap(i * n + r, i * n + s);
    }
}

/// Eigen decomposition of a small Hermitian matrix by cyclic Jacobi
/// rotations. Eigenvalues ascending; eigenvectors are the columns.
pub fn hermitian_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(m.rows, m.cols, "eigh needs a square matrix");
    let n = m.rows;
    let mut a = m.clone();
    let mut v = CMat::identity(n);
    let total: f64 = a.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a.get(i, j).norm_sqr();
                }
            }
        }
        if off.sqrt() <= 1e-16 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let b = apq.norm();
                if b == 0.0 {
                    continue;
                }
                let ph = apq / b;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let gqp = -s * ph.conj();
                let gqq = c * ph.conj();
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c + akq * gqp);
                    a.set(k, q, akp * s + akq * gqq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c + aqk * gqp.conj());
                    a.set(q, k, apk * s + aqk * gqq.conj());
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c + vkq * gqp);
                    v.set(k, q, vkp * s + vkq * gqq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
    let values = order.iter().map(|&i| a.get(i, i).re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| v.get(i, order[j]));
    (values, vectors)
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
    n
}

/// Schur complement factor of one block: dense, or split into independent
/// diagonal tiles.
#[derive(Debug, Clone)]
enum BlockFactorKind {
    Dense(HermitianFactor),
    Tiled(Vec<HermitianFactor>),
}

impl BlockFactorKind {
    fn negatives(&self) -> usize {
        match self {
            BlockFactorKind::Dense(f) => f.negatives(),
            BlockFactorKind::Tiled(fs) => fs.iter().map(|f| f.negatives()).sum(),
        }
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        match self {
            BlockFactorKind::Dense(f) => f.solve_in_place(b),
            BlockFactorKind::Tiled(fs) => {
                let mut off = 0;
                for f in fs {
                    let d = f.dim();
                    f.solve_in_place(&mut b[off..off + d]);
                    off += d;
                }
            }
        }
    }

    fn solve_mat(&self, b: &CMat) -> CMat {
        match self {
            BlockFactorKind::Dense(f) => f.solve_mat(b),
            BlockFactorKind::Tiled(_) => {
                let mut out = CMat::zeros(b.rows, b.cols);
                let mut col = vec![ZERO; b.rows];
                for j in 0..b.cols {
                    let mut any = false;
                    for i in 0..b.rows {
                        col[i] = b.get(i, j);
                        any |= col[i] != ZERO;
                    }
                    if !any {
                        continue;
                    }
                    self.solve_in_place(&mut col);
                    for i in 0..b.rows {
                        out.set(i, j, col[i]);
                    }
                }
                out
            }
        }
    }
}

/// Hermitian block-tridiagonal matrix: diagonal blocks `D_j` and couplings
/// `C_j` between blocks `j` and `j+1` (the lower couplings are `C_jᴴ`).
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    diag: Vec<CMat>,
    upper: Vec<CMat>,
    offsets: Vec<usize>,
    /// Per block: whether `D_j` and `C_j` split into `tiles` diagonal tiles.
    tiled: Vec<bool>,
    tiles: usize,
}

impl BlockTridiag {
    pub fn new(diag: Vec<CMat>, upper: Vec<CMat>) -> Result<Self> {
        if diag.is_empty() || upper.len() + 1 != diag.len() {
            return Err(Error::Grid(
                "block tridiagonal matrix needs n diagonal and n-1 coupling blocks".into(),
            ));
        }
        for (j, d) in diag.iter().enumerate() {
            if d.rows != d.cols || d.rows == 0 {
                return Err(Error::Grid(format!("diagonal block {j} is not square")));
            }
        }
        for (j, c) in upper.iter().enumerate() {
            if c.rows != diag[j].rows || c.cols != diag[j + 1].rows {
                return Err(Error::Grid(format!("coupling block {j} has the wrong shape")));
            }
        }
        let mut offsets = Vec::with_capacity(diag.len() + 1);
        let mut o = 0;
        for d in &diag {
            offsets.push(o);
            o += d.rows;
        }
        offsets.push(o);
        let n = diag.len();
        Ok(Self {
            diag,
            upper,
            offsets,
            tiled: vec![false; n],
            tiles: 1,
        })
    }

    /// Records which blocks split into `tiles` independent diagonal tiles so
    /// that factorizations can work tile by tile there.
    pub fn with_tiles(mut self, tiles: usize) -> Self {
        self.tiles = tiles.max(1);
        let nb = self.diag.len();
        for j in 0..nb {
            let d_ok = self.diag[j].is_tile_diagonal(self.tiles);
            let c_ok = j + 1 == nb || self.upper[j].is_tile_diagonal(self.tiles);
            self.tiled[j] = self.tiles > 1 && d_ok && c_ok;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.diag.len()]
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn diag_block(&self, j: usize) -> &CMat {
        &self.diag[j]
    }

    pub fn upper_block(&self, j: usize) -> &CMat {
        &self.upper[j]
    }

    /// Largest entry magnitude.
    pub fn scale(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.upper)
            .map(|b| b.max_abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|A - Aᴴ|` entry (only the diagonal blocks can be defective).
    pub fn hermiticity_defect(&self) -> f64 {
        self.diag
            .iter()
            .map(|d| d.hermiticity_defect())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for j in 0..self.diag.len() {
            let o = self.offsets[j];
            m.set_block(o, o, &self.diag[j]);
            if j + 1 < self.diag.len() {
                let o2 = self.offsets[j + 1];
                m.set_block(o, o2, &self.upper[j]);
                m.set_block(o2, o, &self.upper[j].adjoint());
            }
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        let nb = self.diag.len();
        for j in 0..nb {
            let r = self.block_range(j);
            self.diag[j].mul_vec_acc(&x[r.clone()], &mut y[r.clone()], 1.0);
            if j + 1 < nb {
                let r2 = self.block_range(j + 1);
                self.upper[j].mul_vec_acc(&x[r2.clone()], &mut y[r.clone()], 1.0);
                self.upper[j].adjoint_mul_vec_acc(&x[r], &mut y[r2], 1.0);
            }
        }
        y
    }

    fn pivmin(&self) -> f64 {
        f64::MIN_POSITIVE.max(self.scale() * f64::EPSILON * f64::EPSILON)
    }

    fn factor_block(&self, s: &CMat, tiled: bool, pivmin: f64) -> BlockFactorKind {
        if tiled {
            let g = self.tiles;
            let t = s.rows / g;
            BlockFactorKind::Tiled(
                (0..g)
                    .map(|i| HermitianFactor::new(&s.block(i * t, i * t, t, t), 0.0, pivmin))
                    .collect(),
            )
        } else {
            BlockFactorKind::Dense(HermitianFactor::new(s, 0.0, pivmin))
        }
    }

    /// Block factorization of `A - σI`, eliminating from the last block.
    pub fn factor_shifted(&self, sigma: f64) -> ShiftedFactor {
        let nb = self.diag.len();
        let pivmin = self.pivmin();
        let mut factors: Vec<Option<BlockFactorKind>> = vec![None; nb];
        let mut negatives = 0;
        let mut next_tiled = true;
        for j in (0..nb).rev() {
            let mut s = self.diag[j].clone();
            for i in 0..s.rows {
                s.add(i, i, C64::new(-sigma, 0.0));
            }
            let tiled = self.tiled[j] && next_tiled;
            if j + 1 < nb {
                let next = factors[j + 1].as_ref().expect("factor of the next block");
                let c = &self.upper[j];
                let x = next.solve_mat(&c.adjoint());
                s.sub_assign(&c.mul(&x));
            }
            let f = self.factor_block(&s, tiled, pivmin);
            negatives += f.negatives();
            factors[j] = Some(f);
            next_tiled = tiled;
        }
        ShiftedFactor {
            sigma,
            negatives,
            factors: factors.into_iter().map(|f| f.expect("all blocks factored")).collect(),
        }
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        self.factor_shifted(sigma).negatives
    }
}

/// Factorization of `A - σI` produced by [`BlockTridiag::factor_shifted`].
#[derive(Debug, Clone)]
pub struct ShiftedFactor {
    sigma: f64,
    negatives: usize,
    factors: Vec<BlockFactorKind>,
}

impl ShiftedFactor {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn negatives(&self) -> usize {
        self.negatives
    }

    /// Solves `(A - σI) x = b`.
    pub fn solve(&self, a: &BlockTridiag, b: &[C64]) -> Vec<C64> {
        let nb = a.n_blocks();
        let mut y = b.to_vec();
        for j in (0..nb.saturating_sub(1)).rev() {
            let r2 = a.block_range(j + 1);
            let mut z = y[r2].to_vec();
            self.factors[j + 1].solve_in_place(&mut z);
            let r = a.block_range(j);
            a.upper[j].mul_vec_acc(&z, &mut y[r], -1.0);
        }
        let mut x = vec![ZERO; b.len()];
        for j in 0..nb {
            let r = a.block_range(j);
            let mut rhs = y[r.clone()].to_vec();
            if j > 0 {
                let rp = a.block_range(j - 1);
                a.upper[j - 1].adjoint_mul_vec_acc(&x[rp], &mut rhs, -1.0);
            }
            self.factors[j].solve_in_place(&mut rhs);
            x[r].copy_from_slice(&rhs);
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceOptions {
    /// Eigenvalues closer than this fraction of the window width are
    /// resolved together as a cluster.
    pub cluster_rel: f64,
    pub max_refinements: usize,
    pub seed: u64,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            cluster_rel: 1e-9,
            max_refinements: 80,
            seed: 0x5eed,
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut x: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut x);
    x
}

fn rayleigh(a: &BlockTridiag, x: &[C64]) -> (f64, f64) {
    let ax = a.matvec(x);
    let lam = dot(x, &ax).re;
    let res = ax
        .iter()
        .zip(x)
        .map(|(p, q)| (p - q * lam).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (lam, res)
}

/// All eigenpairs of `a` with eigenvalue in the open interval `(lo, hi)`,
/// ascending.
pub fn eigenpairs_in(
    a: &BlockTridiag,
    lo: f64,
    hi: f64,
    opts: &SliceOptions,
) -> Result<Vec<Eigenpair>> {
    if !(lo < hi) {
        return Err(Error::Eigensolver(format!("empty interval ({lo}, {hi})")));
    }
    let n_lo = a.count_below(lo);
    let n_hi = a.count_below(hi);
    if n_hi <= n_lo {
        return Ok(Vec::new());
    }
    let width = hi - lo;
    let cluster_width = opts.cluster_rel * width.max(f64::MIN_POSITIVE);
    let scale = a.scale().max(f64::MIN_POSITIVE);

    let mut isolated: Vec<(f64, f64, usize)> = Vec::new();
    let mut clusters: Vec<(f64, f64, usize, usize)> = Vec::new();
    let mut stack = vec![(lo, hi, n_lo, n_hi)];
    while let Some((l, h, cl, ch)) = stack.pop() {
        let c = ch - cl;
        if c == 0 {
            continue;
        }
        if c == 1 {
            isolated.push((l, h, cl));
        } else if h - l <= cluster_width {
            clusters.push((l, h, cl, c));
        } else {
            let m = 0.5 * (l + h);
            let cm = a.count_below(m);
            stack.push((m, h, cm, ch));
            stack.push((l, m, cl, cm));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    for (l0, h0, c0) in isolated {
        out.push(refine_isolated(a, l0, h0, c0, scale, opts, &mut rng)?);
    }
    for (l, h, _cl, c) in clusters {
        out.extend(resolve_cluster(a, 0.5 * (l + h), c, &mut rng)?);
    }
    out.sort_by(|p, q| p.value.total_cmp(&q.value));
    Ok(out)
}

fn refine_isolated(
    a: &BlockTridiag,
    mut l: f64,
    mut h: f64,
    cl: usize,
    scale: f64,
    opts: &SliceOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Eigenpair> {
    let n = a.dim();
    let mut x = random_unit(n, rng);
    for _ in 0..opts.max_refinements {
        let mid = 0.5 * (l + h);
        // inverse iteration at the midpoint, then Rayleigh quotient steps
        let f = a.factor_shifted(mid);
        x = f.solve(a, &x);
        normalize(&mut x);
        x = f.solve(a, &x);
        normalize(&mut x);
        let (mut lam, mut res) = rayleigh(a, &x);
        for _ in 0..6 {
            if res <= 1e-13 * scale || !(lam > l && lam < h) {
                break;
            }
            let g = a.factor_shifted(lam);
            let mut y = g.solve(a, &x);
            if normalize(&mut y) == 0.0 || y.iter().any(|v| !v.is_finite()) {
                break;
            }
            let (l2, r2) = rayleigh(a, &y);
            if r2 >= res && l2 > l && l2 < h {
                x = y;
                lam = l2;
                res = r2;
                break;
            }
            x = y;
            lam = l2;
            res = r2;
        }
        if lam > l && lam < h && res <= 1e-7 * scale {
            return Ok(Eigenpair {
                value: lam,
                vector: x,
            });
        }
        // the iteration drifted to a neighbour: halve the bracket
        let cm = a.count_below(mid);
        if cm > cl {
            h = mid;
        } else {
            l = mid;
        }
    }
    Err(Error::Eigensolver(format!(
        "inverse iteration did not converge in ({l}, {h})"
    )))
}

fn resolve_cluster(
    a: &BlockTridiag,
    shift: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Eigenpair>> {
    let n = a.dim();
    let f = a.factor_shifted(shift);
    let mut basis: Vec<Vec<C64>> = (0..count).map(|_| random_unit(n, rng)).collect();
    for _ in 0..4 {
        basis = basis.iter().map(|x| f.solve(a, x)).collect();
        orthonormalize(&mut basis)?;
    }
    let ritz = rayleigh_ritz(a, &basis);
    Ok(ritz)
}

/// Modified Gram–Schmidt, applied twice.
pub fn orthonormalize(basis: &mut [Vec<C64>]) -> Result<()> {
    for _ in 0..2 {
        for i in 0..basis.len() {
            for j in 0..i {
                let (head, tail) = basis.split_at_mut(i);
                let p = dot(&head[j], &tail[0]);
                for (t, h) in tail[0].iter_mut().zip(&head[j]) {
                    *t -= p * h;
                }
            }
            if normalize(&mut basis[i]) == 0.0 {
                return Err(Error::Eigensolver("degenerate basis in cluster".into()));
            }
        }
    }
    Ok(())
}

/// Ritz pairs of `a` on the span of the orthonormal `basis`.
pub fn rayleigh_ritz(a: &BlockTridiag, basis: &[Vec<C64>]) -> Vec<Eigenpair> {
    let k = basis.len();
    let ab: Vec<Vec<C64>> = basis.iter().map(|x| a.matvec(x)).collect();
    let h = CMat::from_fn(k, k, |i, j| dot(&basis[i], &ab[j]));
    let h = CMat::from_fn(k, k, |i, j| 0.5 * (h.get(i, j) + h.get(j, i).conj()));
    let (vals, vecs) = hermitian_eigh(&h);
    let n = basis[0].len();
    vals.iter()
        .enumerate()
        .map(|(c, &value)| {
            let mut v = vec![ZERO; n];
            for (i, b) in basis.iter().enumerate() {
                let coef = vecs.get(i, c);
                for (vv, bb) in v.iter_mut().zip(b) {
                    *vv += coef * bb;
                }
            }
            normalize(&mut v);
            Eigenpair { value, vector: v }
        })
        .collect()
}

/// Within groups of eigenpairs whose values differ by less than `tol`,
/// rotates the vectors to diagonalize the weight `Σ_{i∈dofs} |x_i|²`,
/// separating states by where they live. Values become Rayleigh quotients.
pub fn separate_by_weight(
    a: &BlockTridiag,
    pairs: &mut [Eigenpair],
    tol: f64,
    dofs: std::ops::Range<usize>,
) {
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].value - pairs[end - 1].value < tol {
            end += 1;
        }
        if end - start > 1 {
            let k = end - start;
            let group = &pairs[start..end];
            let t = CMat::from_fn(k, k, |i, j| {
                dot(&group[i].vector[dofs.clone()], &group[j].vector[dofs.clone()])
            });
            let (_, rot) = hermitian_eigh(&t);
            let n = group[0].vector.len();
            let rotated: Vec<Vec<C64>> = (0..k)
                .map(|c| {
                    let mut v = vec![ZERO; n];
                    for (i, p) in group.iter().enumerate() {
                        let coef = rot.get(i, c);
                        for (vv, pp) in v.iter_mut().zip(&p.vector) {
                            *vv += coef * pp;
                        }
                    }
                    normalize(&mut v);
                    v
                })
                .collect();
            for (p, v) in pairs[start..end].iter_mut().zip(rotated) {
                p.value = rayleigh(a, &v).0;
                p.vector = v;
            }
        }
        start = end;
    }
    pairs.sort_by(|p, q| p.value.total_cmp(&q.value));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMat::from_fn(n, n, |_, _| C64::new(0.0, 0.0));
        let mut m = m;
        for i in 0..n {
            m.set(i, i, C64::new(rng.gen_range(-2.0..2.0), 0.0));
            for j in i + 1..n {
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        m
    }

    #[test]
    fn bunch_kaufman_solves_and_counts() {
        for seed in 0..20 {
            let n = 1 + (seed as usize % 9);
            let m = random_hermitian(n, seed);
            let (vals, _) = hermitian_eigh(&m);
            let shift = 0.3;
            let f = HermitianFactor::new(&m, shift, 1e-300);
            assert_eq!(f.negatives(), vals.iter().filter(|v| **v < shift).count());
            let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
            let mut x = b.clone();
            f.solve_in_place(&mut x);
            let mut r = m.mul_vec(&x);
            for i in 0..n {
                r[i] -= x[i] * shift + b[i];
            }
            assert!(norm(&r) < 1e-10 * (1.0 + norm(&x)), "seed {seed}");
        }
    }

    #[test]
    fn bunch_kaufman_handles_zero_diagonal() {
        // forces a 2×2 pivot
        let m = CMat::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(0.0, 0.0)
            } else if i == 0 {
                C64::new(0.0, 1.0)
            } else {
                C64::new(0.0, -1.0)
            }
        });
        let f = HermitianFactor::new(&m, 0.0, 1e-300);
        assert_eq!(f.negatives(), 1);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = random_hermitian(7, 3);
        let (vals, vecs) = hermitian_eigh(&m);
        for (c, lam) in vals.iter().enumerate() {
            let v: Vec<C64> = (0..7).map(|i| vecs.get(i, c)).collect();
            let mv = m.mul_vec(&v);
            let r: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * lam).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-12);
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    fn random_tridiag(nb: usize, bs: usize, seed: u64) -> BlockTridiag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diag = (0..nb).map(|j| random_hermitian(bs, seed * 100 + j as u64)).collect();
        let upper = (0..nb - 1)
            .map(|_| {
                CMat::from_fn(bs, bs, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        BlockTridiag::new(diag, upper).unwrap()
    }

    #[test]
    fn block_counts_match_dense_eigenvalues() {
        let a = random_tridiag(12, 3, 9);
        let (vals, _) = hermitian_eigh(&a.to_dense());
        for sigma in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            let expect = vals.iter().filter(|v| **v < sigma).count();
            assert_eq!(a.count_below(sigma), expect);
        }
    }

    #[test]
    fn block_solve_inverts_shifted_matrix() {
        let a = random_tridiag(10, 2, 4);
        let f = a.factor_shifted(0.17);
        let b: Vec<C64> = (0..a.dim()).map(|i| C64::new((i as f64).sin(), 0.5)).collect();
        let x = f.solve(&a, &b);
        let ax = a.matvec(&x);
        let r: f64 = ax
            .iter()
            .zip(&x)
            .zip(&b)
            .map(|((p, q), s)| (p - q * 0.17 - s).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(r < 1e-9 * norm(&x));
    }

    #[test]
    fn slicing_finds_all_window_eigenpairs() {
        let a = random_tridiag(15, 2, 11);
        let (vals, _) = hermitian_eigh(&a.to_dense());
        let pairs = eigenpairs_in(&a, -1.0, 1.5, &SliceOptions::default()).unwrap();
        let expect: Vec<f64> = vals.into_iter().filter(|v| *v > -1.0 && *v < 1.5).collect();
        assert_eq!(pairs.len(), expect.len());
        for (p, e) in pairs.iter().zip(&expect) {
            assert_abs_diff_eq!(p.value, *e, epsilon = 1e-10);
            let (_, res) = rayleigh(&a, &p.vector);
            assert!(res < 1e-8);
        }
    }

    #[test]
    fn slicing_resolves_exact_degeneracy() {
        // two identical decoupled chains
        let single = random_tridiag(8, 2, 5);
        let nb = single.n_blocks();
        let diag = (0..nb)
            .map(|j| {
                let d = single.diag_block(j);
                let mut m = CMat::zeros(4, 4);
                m.set_block(0, 0, d);
                m.set_block(2, 2, d);
                m
            })
            .collect();
        let upper = (0..nb - 1)
            .map(|j| {
                let c = single.upper_block(j);
                let mut m = CMat::zeros(4, 4);
                m.set_block(0, 0, c);
                m.set_block(2, 2, c);
                m
            })
            .collect();
        let a = BlockTridiag::new(diag, upper).unwrap().with_tiles(2);
        let (vals, _) = hermitian_eigh(&single.to_dense());
        let pairs = eigenpairs_in(&a, -0.8, 0.8, &SliceOptions::default()).unwrap();
        let expect: Vec<f64> = vals.into_iter().filter(|v| v.abs() < 0.8).collect();
        assert_eq!(pairs.len(), 2 * expect.len());
        for (i, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(pairs[2 * i].value, *e, epsilon = 1e-10);
            assert_abs_diff_eq!(pairs[2 * i + 1].value, *e, epsilon = 1e-10);
        }
        let v0 = &pairs[0].vector;
        let v1 = &pairs[1].vector;
        assert!(dot(v0, v1).norm() < 1e-8);
    }
}
