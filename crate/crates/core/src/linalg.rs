//! Dense linear-algebra helpers: real-symmetric eigendecomposition and the
//! complex matrix exponential used by the non-Hermitian propagator.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a real
/// symmetric matrix.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues of a complex Hermitian matrix (only the Hermitian part is used).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<DVector<f64>> {
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    SymmetricEigen::try_new(herm, f64::EPSILON, EIGEN_MAX_ITER)
        .map(|e| e.eigenvalues)
        .ok_or_else(|| Error::Numerical("Hermitian eigendecomposition did not converge".into()))
}

// Backward-error bounds θ_m for the [m/m] Padé approximants.
const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn scaled(a: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
    a.map(|z| z * s)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 (Higham 2005).
pub fn expm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Numerical("expm of a non-finite matrix".into()));
    }
    let ident = DMatrix::<C64>::identity(n, n);

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            let (u, v) = pade_low(a, coeffs, &ident);
            return solve_pade(u, v);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = if norm > theta13 { (norm / theta13).log2().ceil() as i32 } else { 0 };
    let a = scaled(a, 0.5f64.powi(squarings));
    let (u, v) = pade13(&a, &ident);
    let mut x = solve_pade(u, v)?;
    for _ in 0..squarings {
        x = &x * &x;
    }
    Ok(x)
}

fn pade_low(a: &DMatrix<C64>, b: &[f64], ident: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_acc = scaled(ident, b[1]);
    let mut v = scaled(ident, b[0]);
    for k in 1..=(b.len() - 1) / 2 {
        power = &power * &a2;
        u_acc += scaled(&power, b[2 * k + 1]);
        v += scaled(&power, b[2 * k]);
    }
    (a * u_acc, v)
}

fn pade13(a: &DMatrix<C64>, ident: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a * (&a6 * inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(ident, b[1]));
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(ident, b[0]);
    (u, v)
}

fn solve_pade(u: DMatrix<C64>, v: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let denom = &v - &u;
    let numer = v + u;
    denom.lu().solve(&numer).ok_or_else(|| Error::Numerical("singular Padé denominator in expm".into()))
}
