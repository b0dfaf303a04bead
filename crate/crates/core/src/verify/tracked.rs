//! Explicit admissible constants for the asserted inequalities.
//!
//! Each function returns a constant obtained by composing elementary steps
//! (Hölder and Jensen contribute 1, Doob's inequality at exponent `t`
//! contributes `t'`, the dyadic comparison contributes 2).

/// `t' = t / (t - 1)`.
pub fn conj(t: f64) -> f64 {
    t / (t - 1.0)
}

/// Doob's maximal inequality in `L^t`.
pub fn doob(t: f64) -> f64 {
    conj(t)
}

/// `K` in `int (T_alpha w)^s <= K int sum_i alpha_i E_i w (E_i(bar alpha_i w))^{s-1}`.
///
/// For `s <= 2` this is `s`. Above 2 the power-of-sums inequality is applied
/// `k + 1 = ceil(s - 2) + 1` times and the resulting self-bound
/// `A <= C A^{k/(s-1)} B^{(s-k-1)/(s-1)}` is solved for `A`.
pub fn power_sum_factor(s: f64) -> f64 {
    if s <= 2.0 {
        return s;
    }
    let k = (s - 2.0).ceil();
    let c: f64 = (0..=k as u32).map(|m| s - m as f64).product();
    c.powf((s - 1.0) / (s - k - 1.0))
}

/// `A3 <= (s')^s A1`, via `sup_i E_i(bar alpha_i w) <= (T_alpha w)^*`.
pub fn sup_tail_factor(s: f64) -> f64 {
    conj(s).powf(s)
}

/// `A2 <= (s')^{s-1} A1`, combining Hölder with [`sup_tail_factor`].
pub fn mixed_tail_factor(s: f64) -> f64 {
    conj(s).powf(s - 1.0)
}

/// Embedding constant `(C_0 theta)^{1/(p theta)}` from a Carleson constant.
pub fn carleson_embedding(c0: f64, theta: f64, p: f64) -> f64 {
    (c0 * theta).powf(1.0 / (p * theta))
}

/// Weighted embedding constant `C_0^{1/q}`.
pub fn weighted_embedding(c0: f64, q: f64) -> f64 {
    c0.powf(1.0 / q)
}

/// Factor `theta'` in `C_0 <= theta' R^q` for the martingale test family.
pub fn weighted_embedding_converse(theta: f64) -> f64 {
    conj(theta)
}

/// `||M_alpha||_{L^p(v) -> L^q(u)} <= 2 p' (q/p)^{1/q} C_2`.
pub fn maximal_testing_factor(p: f64, q: f64) -> f64 {
    2.0 * conj(p) * (q / p).powf(1.0 / q)
}

/// `C_2 <= p^{1/(p-1)} [w]_{A_p}^{1/(p-1)}` for the one-weight Sawyer test.
pub fn ap_testing_factor(p: f64) -> f64 {
    p.powf(1.0 / (p - 1.0))
}

/// `||f^*||_{L^p(w)} <= 2 p' p^{1/(p-1)} [w]_{A_p}^{1/(p-1)}`.
pub fn ap_maximal_factor(p: f64) -> f64 {
    maximal_testing_factor(p, p) * ap_testing_factor(p)
}

/// `int_P (sup_{j>=i} E_j[1_P sigma])^p w <= 2 4^p e [w]_{A_p} [sigma]_{A_inf} sigma(P)`.
pub fn mixed_core_factor(p: f64) -> f64 {
    2.0 * 4f64.powf(p) * std::f64::consts::E
}

/// `||f^*||_{L^p(w)} <= C_p ([w]_{A_p} [sigma]_{A_inf})^{1/p}`.
pub fn mixed_maximal_factor(p: f64) -> f64 {
    maximal_testing_factor(p, p) * mixed_core_factor(p).powf(1.0 / p)
}

/// `||T_alpha||_{L^p -> L^q(w)} <= K C_2` for `p <= q`, with `c` the tail-comparability ratio.
pub fn trace_testing_factor(p: f64, q: f64, c: f64) -> f64 {
    let s = conj(p);
    let qq = conj(q);
    let k = power_sum_factor(s) * c.powf(4.0 * (s - 1.0)) * q.powf(s) * (s / qq) * p.powf(s - 1.0);
    k.powf(1.0 / s)
}

/// `||T_alpha||_{L^p -> L^p(v)} <= K` with `v = w / W_alpha[w]^{p-1}`.
pub fn wolff_weight_factor(p: f64, c: f64) -> f64 {
    let s = conj(p);
    (power_sum_factor(s) * c.powf(4.0 * (s - 1.0)) * p.powf(s)).powf(1.0 / s)
}

/// `||W^{1/p'}||_{L^r(w)} <= K ||T_alpha||_{L^p -> L^q(w)}` for `1 < q < p`.
pub fn wolff_converse_factor(p: f64, q: f64, c: f64) -> f64 {
    let s = conj(p);
    let t = q * (p - 1.0) / (p - q);
    (t * c.powf(4.0 * (s - 1.0)) * p.powf(s - 1.0)).powf(1.0 / s)
}
