//! Matrix exponential for the small generator blocks, by scaling and
//! squaring with a Taylor kernel. Exact to roundoff for the 2x2 and 3x3
//! matrices used here, with no eigenvalue-degeneracy caveats.

use nalgebra::SMatrix;

pub fn expm<const N: usize>(a: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let norm = a.abs().row_sum().max();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(s);

    let mut result = SMatrix::<f64, N, N>::identity();
    let mut term = SMatrix::<f64, N, N>::identity();
    for k in 1..40 {
        term = term * b / k as f64;
        result += term;
        if term.abs().max() < 1e-20 * result.abs().max() {
            break;
        }
    }
    for _ in 0..s {
        result = result * result;
    }
    result
}
