//! A single-direction LSTM pass with exact, hand-derived backprop.
//!
//! Gate layout inside the stacked weight matrices is `[input, forget, cell,
//! output]` — four blocks of `hidden` rows each:
//!
//! ```text
//! pre = W x_t + U h_{t-1} + b            (4h)
//! i = sigmoid(pre[0h..1h])   f = sigmoid(pre[1h..2h])
//! g = tanh   (pre[2h..3h])   o = sigmoid(pre[3h..4h])
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! Initial `h`/`c` are zero. The caller decides direction by ordering the
//! inputs; outputs come back in the same order they were given.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Post-activation gate values for one step: (i, f, g, o).
type StepGates = (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>);

/// Everything the backward pass needs, saved during forward.
pub struct LstmCache {
    gates: Vec<StepGates>,
    /// Cell states per step.
    c: Vec<Array1<f64>>,
    /// Hidden states per step (h[t] is the step-t output).
    h: Vec<Array1<f64>>,
}

/// Gradients for one direction's weights.
pub struct LstmGrads {
    pub d_w: Array2<f64>,
    pub d_u: Array2<f64>,
    pub d_b: Array1<f64>,
}

/// Run the cell over `inputs` (already in processing order).
///
/// `w` is `(4h, d)`, `u` is `(4h, h)`, `b` is `(4h)`. Returns the hidden
/// state after each step plus the cache for [`lstm_backward`].
pub fn lstm_forward(
    w: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    inputs: &[Array1<f64>],
) -> (Vec<Array1<f64>>, LstmCache) {
    let hidden = u.ncols();
    debug_assert_eq!(w.nrows(), 4 * hidden);
    debug_assert_eq!(b.len(), 4 * hidden);

    let mut cache = LstmCache {
        gates: Vec::with_capacity(inputs.len()),
        c: Vec::with_capacity(inputs.len()),
        h: Vec::with_capacity(inputs.len()),
    };
    let mut h_prev = Array1::<f64>::zeros(hidden);
    let mut c_prev = Array1::<f64>::zeros(hidden);

    for x in inputs {
        debug_assert_eq!(x.len(), w.ncols());
        let mut pre = w.dot(x) + u.dot(&h_prev);
        pre += &b;
        let i = pre.slice(ndarray::s![0..hidden]).mapv(sigmoid);
        let f = pre.slice(ndarray::s![hidden..2 * hidden]).mapv(sigmoid);
        let g = pre
            .slice(ndarray::s![2 * hidden..3 * hidden])
            .mapv(f64::tanh);
        let o = pre.slice(ndarray::s![3 * hidden..4 * hidden]).mapv(sigmoid);
        let c = &f * &c_prev + &i * &g;
        let h = &o * &c.mapv(f64::tanh);
        cache.gates.push((i, f, g, o));
        cache.c.push(c.clone());
        cache.h.push(h.clone());
        h_prev = h;
        c_prev = c;
    }
    (cache.h.clone(), cache)
}

/// Exact gradients for one direction.
///
/// `d_h` holds the loss gradient w.r.t. each step's hidden output (same
/// order as the forward inputs). Returns weight gradients and the gradient
/// w.r.t. each input vector.
pub fn lstm_backward(
    w: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    inputs: &[Array1<f64>],
    cache: &LstmCache,
    d_h: &[Array1<f64>],
) -> (LstmGrads, Vec<Array1<f64>>) {
    let hidden = u.ncols();
    let steps = inputs.len();
    debug_assert_eq!(d_h.len(), steps);

    let mut d_w = Array2::<f64>::zeros(w.dim());
    let mut d_u = Array2::<f64>::zeros(u.dim());
    let mut d_b = Array1::<f64>::zeros(4 * hidden);
    let mut d_inputs = vec![Array1::<f64>::zeros(w.ncols()); steps];

    let zero = Array1::<f64>::zeros(hidden);
    let mut dh_carry = Array1::<f64>::zeros(hidden);
    let mut dc_carry = Array1::<f64>::zeros(hidden);

    for t in (0..steps).rev() {
        let (i, f, g, o) = &cache.gates[t];
        let c = &cache.c[t];
        let c_prev = if t == 0 { &zero } else { &cache.c[t - 1] };
        let h_prev = if t == 0 { &zero } else { &cache.h[t - 1] };

        let dh = &d_h[t] + &dh_carry;
        let tanh_c = c.mapv(f64::tanh);
        // h = o * tanh(c)
        let d_o = &dh * &tanh_c;
        let mut d_c = &dh * o * &(1.0 - &tanh_c * &tanh_c);
        d_c += &dc_carry;
        // c = f * c_prev + i * g
        let d_f = &d_c * c_prev;
        let d_i = &d_c * g;
        let d_g = &d_c * i;
        dc_carry = &d_c * f;

        // through the activations to the pre-activation block
        let mut d_pre = Array1::<f64>::zeros(4 * hidden);
        {
            let mut s = d_pre.slice_mut(ndarray::s![0..hidden]);
            s.assign(&(&d_i * i * &(1.0 - i)));
            let mut s = d_pre.slice_mut(ndarray::s![hidden..2 * hidden]);
            s.assign(&(&d_f * f * &(1.0 - f)));
            let mut s = d_pre.slice_mut(ndarray::s![2 * hidden..3 * hidden]);
            s.assign(&(&d_g * &(1.0 - g * g)));
            let mut s = d_pre.slice_mut(ndarray::s![3 * hidden..4 * hidden]);
            s.assign(&(&d_o * o * &(1.0 - o)));
        }

        // pre = W x + U h_prev + b
        for (r, &dp) in d_pre.iter().enumerate() {
            d_w.row_mut(r).scaled_add(dp, &inputs[t].view());
            d_u.row_mut(r).scaled_add(dp, &h_prev.view());
        }
        d_b += &d_pre;
        d_inputs[t] = w.t().dot(&d_pre);
        dh_carry = u.t().dot(&d_pre);
    }

    (LstmGrads { d_w, d_u, d_b }, d_inputs)
}
