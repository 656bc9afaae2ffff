//! Inner loops for the dense layers.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`, so every
//! kernel walks contiguous slices. The forward kernel processes four output
//! rows at a time to keep several FMA chains in flight.

/// `pre[b, o] = bias[o] + sum_i x[b, i] * w[o, i]`
pub(crate) fn affine_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    pre: &mut [f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
) {
    debug_assert_eq!(x.len(), batch * in_dim);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    debug_assert_eq!(bias.len(), out_dim);
    debug_assert_eq!(pre.len(), batch * out_dim);

    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let out_row = &mut pre[b * out_dim..(b + 1) * out_dim];
        let mut o = 0;
        while o + 4 <= out_dim {
            let w0 = &w[o * in_dim..(o + 1) * in_dim];
            let w1 = &w[(o + 1) * in_dim..(o + 2) * in_dim];
            let w2 = &w[(o + 2) * in_dim..(o + 3) * in_dim];
            let w3 = &w[(o + 3) * in_dim..(o + 4) * in_dim];
            let (mut a0, mut a1, mut a2, mut a3) = (0.0f64, 0.0, 0.0, 0.0);
            let (mut b0, mut b1, mut b2, mut b3) = (0.0f64, 0.0, 0.0, 0.0);
            let mut i = 0;
            while i + 2 <= in_dim {
                let xv = xr[i];
                let xv2 = xr[i + 1];
                a0 = xv.mul_add(w0[i], a0);
                b0 = xv2.mul_add(w0[i + 1], b0);
                a1 = xv.mul_add(w1[i], a1);
                b1 = xv2.mul_add(w1[i + 1], b1);
                a2 = xv.mul_add(w2[i], a2);
                b2 = xv2.mul_add(w2[i + 1], b2);
                a3 = xv.mul_add(w3[i], a3);
                b3 = xv2.mul_add(w3[i + 1], b3);
                i += 2;
            }
            if i < in_dim {
                let xv = xr[i];
                a0 = xv.mul_add(w0[i], a0);
                a1 = xv.mul_add(w1[i], a1);
                a2 = xv.mul_add(w2[i], a2);
                a3 = xv.mul_add(w3[i], a3);
            }
            out_row[o] = bias[o] + a0 + b0;
            out_row[o + 1] = bias[o + 1] + a1 + b1;
            out_row[o + 2] = bias[o + 2] + a2 + b2;
            out_row[o + 3] = bias[o + 3] + a3 + b3;
            o += 4;
        }
        while o < out_dim {
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = 0.0f64;
            for (xv, wv) in xr.iter().zip(wr) {
                acc = xv.mul_add(*wv, acc);
            }
            out_row[o] = bias[o] + acc;
            o += 1;
        }
    }
}

/// `dx[b, i] = sum_o dz[b, o] * w[o, i]`
pub(crate) fn grad_input(
    dz: &[f64],
    w: &[f64],
    dx: &mut [f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
) {
    debug_assert_eq!(dz.len(), batch * out_dim);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    debug_assert_eq!(dx.len(), batch * in_dim);

    dx.fill(0.0);
    for b in 0..batch {
        let dzr = &dz[b * out_dim..(b + 1) * out_dim];
        let dxr = &mut dx[b * in_dim..(b + 1) * in_dim];
        for (o, &g) in dzr.iter().enumerate() {
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            for (d, &wv) in dxr.iter_mut().zip(wr) {
                *d = wv.mul_add(g, *d);
            }
        }
    }
}

/// `dw[o, i] = sum_b dz[b, o] * x[b, i]` and `db[o] = sum_b dz[b, o]`
pub(crate) fn grad_params(
    dz: &[f64],
    x: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    batch: usize,
    in_dim: usize,
    out_dim: usize,
) {
    debug_assert_eq!(dz.len(), batch * out_dim);
    debug_assert_eq!(x.len(), batch * in_dim);
    debug_assert_eq!(dw.len(), out_dim * in_dim);
    debug_assert_eq!(db.len(), out_dim);

    dw.fill(0.0);
    db.fill(0.0);
    for b in 0..batch {
        let dzr = &dz[b * out_dim..(b + 1) * out_dim];
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        for (o, &g) in dzr.iter().enumerate() {
            db[o] += g;
            let dwr = &mut dw[o * in_dim..(o + 1) * in_dim];
            for (d, &xv) in dwr.iter_mut().zip(xr) {
                *d = xv.mul_add(g, *d);
            }
        }
    }
}
