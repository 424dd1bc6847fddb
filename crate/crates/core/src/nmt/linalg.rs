//! Small dense helpers for the recurrent network. Matrices are row-major.

/// out += m (rows x cols) . x
pub(crate) fn matvec_acc(out: &mut [f64], m: &[f64], rows: usize, cols: usize, x: &[f64]) {
    debug_assert_eq!(out.len(), rows);
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        *o += acc;
    }
}

/// out += m^T . v, i.e. out[c] += sum_r m[r, c] * v[r]
pub(crate) fn matvec_t_acc(out: &mut [f64], m: &[f64], rows: usize, cols: usize, v: &[f64]) {
    debug_assert_eq!(out.len(), cols);
    debug_assert_eq!(v.len(), rows);
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, w) in out.iter_mut().zip(row) {
            *o += vr * w;
        }
    }
}

/// grad += v (outer) x, i.e. grad[r, c] += v[r] * x[c]
pub(crate) fn outer_acc(grad: &mut [f64], v: &[f64], x: &[f64]) {
    debug_assert_eq!(grad.len(), v.len() * x.len());
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        let row = &mut grad[r * x.len()..(r + 1) * x.len()];
        for (g, xv) in row.iter_mut().zip(x) {
            *g += vr * xv;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// In-place softmax; returns nothing. Inputs must be finite.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// In-place log-softmax.
pub(crate) fn log_softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = values
        .iter()
        .map(|v| (v - max).exp())
        .sum::<f64>()
        .ln();
    for v in values.iter_mut() {
        *v = *v - max - log_sum;
    }
}
