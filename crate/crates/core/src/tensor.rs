//! Mode-wise contractions on rank-3 complex tensors in standard layout.
//!
//! These loops are the inner kernel of every operator application; they
//! assume (and assert) standard row-major layout so the innermost index is
//! contiguous.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

#[inline]
fn slices<'a>(
    x: &'a Array3<Complex64>,
    out: &'a mut Array3<Complex64>,
) -> (&'a [Complex64], &'a mut [Complex64]) {
    (
        x.as_slice().expect("standard layout"),
        out.as_slice_mut().expect("standard layout"),
    )
}

/// out = (M acting on `mode`) x, with a real dense matrix.
pub fn apply_dense_real(
    x: &Array3<Complex64>,
    m: &Array2<f64>,
    mode: usize,
    out: &mut Array3<Complex64>,
) {
    let (n0, n1, n2) = x.dim();
    let n = [n0, n1, n2][mode];
    debug_assert_eq!(m.nrows(), n);
    debug_assert_eq!(m.ncols(), n);
    let mm = m.as_slice().expect("standard layout");
    let (xs, os) = slices(x, out);
    os.fill(Complex64::ZERO);
    match mode {
        0 => {
            let r = n1 * n2;
            for a in 0..n0 {
                let orow = &mut os[a * r..(a + 1) * r];
                for b in 0..n0 {
                    let c = mm[a * n0 + b];
                    if c == 0.0 {
                        continue;
                    }
                    let xrow = &xs[b * r..(b + 1) * r];
                    for (o, v) in orow.iter_mut().zip(xrow.iter()) {
                        *o += c * v;
                    }
                }
            }
        }
        1 => {
            let slab = n1 * n2;
            for i in 0..n0 {
                let xi = &xs[i * slab..(i + 1) * slab];
                let oi = &mut os[i * slab..(i + 1) * slab];
                for a in 0..n1 {
                    let orow = &mut oi[a * n2..(a + 1) * n2];
                    for b in 0..n1 {
                        let c = mm[a * n1 + b];
                        if c == 0.0 {
                            continue;
                        }
                        let xrow = &xi[b * n2..(b + 1) * n2];
                        for (o, v) in orow.iter_mut().zip(xrow.iter()) {
                            *o += c * v;
                        }
                    }
                }
            }
        }
        2 => {
            let rows = n0 * n1;
            for r in 0..rows {
                let xrow = &xs[r * n2..(r + 1) * n2];
                let orow = &mut os[r * n2..(r + 1) * n2];
                for a in 0..n2 {
                    let mrow = &mm[a * n2..(a + 1) * n2];
                    let mut acc = Complex64::ZERO;
                    for (c, v) in mrow.iter().zip(xrow.iter()) {
                        acc += *c * v;
                    }
                    orow[a] = acc;
                }
            }
        }
        _ => panic!("mode out of range"),
    }
}

/// out = (diag(d) acting on `mode`) x.
pub fn apply_diag_real(
    x: &Array3<Complex64>,
    d: &[f64],
    mode: usize,
    out: &mut Array3<Complex64>,
) {
    let (n0, n1, n2) = x.dim();
    debug_assert_eq!(d.len(), [n0, n1, n2][mode]);
    let (xs, os) = slices(x, out);
    match mode {
        0 => {
            let r = n1 * n2;
            for a in 0..n0 {
                let da = d[a];
                for k in 0..r {
                    os[a * r + k] = da * xs[a * r + k];
                }
            }
        }
        1 => {
            let slab = n1 * n2;
            for i in 0..n0 {
                for a in 0..n1 {
                    let da = d[a];
                    let base = i * slab + a * n2;
                    for k in 0..n2 {
                        os[base + k] = da * xs[base + k];
                    }
                }
            }
        }
        2 => {
            let rows = n0 * n1;
            for r in 0..rows {
                let base = r * n2;
                for (k, dk) in d.iter().enumerate() {
                    os[base + k] = *dk * xs[base + k];
                }
            }
        }
        _ => panic!("mode out of range"),
    }
}

/// out = (M acting on `mode`) x with a complex dense matrix; rectangular
/// matrices change the mode dimension (used for basis projections).
pub fn apply_dense_complex(
    x: &Array3<Complex64>,
    m: &Array2<Complex64>,
    mode: usize,
) -> Array3<Complex64> {
    let (n0, n1, n2) = x.dim();
    let n_in = [n0, n1, n2][mode];
    debug_assert_eq!(m.ncols(), n_in);
    let n_out = m.nrows();
    let mut shape = [n0, n1, n2];
    shape[mode] = n_out;
    let mut out = Array3::<Complex64>::zeros((shape[0], shape[1], shape[2]));
    let xs = x.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    let mm = m.as_slice().expect("standard layout");
    match mode {
        0 => {
            let r = n1 * n2;
            for a in 0..n_out {
                let orow = &mut os[a * r..(a + 1) * r];
                for b in 0..n_in {
                    let c = mm[a * n_in + b];
                    if c == Complex64::ZERO {
                        continue;
                    }
                    let xrow = &xs[b * r..(b + 1) * r];
                    for (o, v) in orow.iter_mut().zip(xrow.iter()) {
                        *o += c * v;
                    }
                }
            }
        }
        1 => {
            let slab_in = n1 * n2;
            let slab_out = n_out * n2;
            for i in 0..n0 {
                let xi = &xs[i * slab_in..(i + 1) * slab_in];
                let oi = &mut os[i * slab_out..(i + 1) * slab_out];
                for a in 0..n_out {
                    let orow = &mut oi[a * n2..(a + 1) * n2];
                    for b in 0..n1 {
                        let c = mm[a * n_in + b];
                        if c == Complex64::ZERO {
                            continue;
                        }
                        let xrow = &xi[b * n2..(b + 1) * n2];
                        for (o, v) in orow.iter_mut().zip(xrow.iter()) {
                            *o += c * v;
                        }
                    }
                }
            }
        }
        2 => {
            let rows = n0 * n1;
            for r in 0..rows {
                let xrow = &xs[r * n2..(r + 1) * n2];
                let orow = &mut os[r * n_out..(r + 1) * n_out];
                for a in 0..n_out {
                    let mrow = &mm[a * n_in..(a + 1) * n_in];
                    let mut acc = Complex64::ZERO;
                    for (c, v) in mrow.iter().zip(xrow.iter()) {
                        acc += *c * v;
                    }
                    orow[a] = acc;
                }
            }
        }
        _ => panic!("mode out of range"),
    }
    out
}

/// F[j, l] = sum over the other two indices of conj(a)[..j..] b[..l..];
/// with a == b this is the one-mode reduced density matrix.
pub fn fold_density(
    a: &Array3<Complex64>,
    b: &Array3<Complex64>,
    mode: usize,
) -> Array2<Complex64> {
    let (n0, n1, n2) = a.dim();
    let n = [n0, n1, n2][mode];
    let mut out = Array2::<Complex64>::zeros((n, n));
    let aa = a.as_slice().expect("standard layout");
    let bb = b.as_slice().expect("standard layout");
    match mode {
        0 => {
            let r = n1 * n2;
            for j in 0..n {
                for l in 0..n {
                    let mut acc = Complex64::ZERO;
                    for k in 0..r {
                        acc += aa[j * r + k].conj() * bb[l * r + k];
                    }
                    out[[j, l]] = acc;
                }
            }
        }
        1 => {
            for j in 0..n {
                for l in 0..n {
                    let mut acc = Complex64::ZERO;
                    for i in 0..n0 {
                        let ja = i * n1 * n2 + j * n2;
                        let jb = i * n1 * n2 + l * n2;
                        for k in 0..n2 {
                            acc += aa[ja + k].conj() * bb[jb + k];
                        }
                    }
                    out[[j, l]] = acc;
                }
            }
        }
        2 => {
            let rows = n0 * n1;
            for j in 0..n {
                for l in 0..n {
                    let mut acc = Complex64::ZERO;
                    for rw in 0..rows {
                        acc += aa[rw * n2 + j].conj() * bb[rw * n2 + l];
                    }
                    out[[j, l]] = acc;
                }
            }
        }
        _ => panic!("mode out of range"),
    }
    out
}

/// Hermitian inner product <a|b> = sum conj(a) b.
pub fn inner(a: &Array3<Complex64>, b: &Array3<Complex64>) -> Complex64 {
    let xs = a.as_slice().expect("standard layout");
    let ys = b.as_slice().expect("standard layout");
    let mut acc = Complex64::ZERO;
    for (x, y) in xs.iter().zip(ys.iter()) {
        acc += x.conj() * y;
    }
    acc
}

/// out += c * x.
pub fn axpy(c: Complex64, x: &Array3<Complex64>, out: &mut Array3<Complex64>) {
    let xs = x.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    for (o, v) in os.iter_mut().zip(xs.iter()) {
        *o += c * v;
    }
}
