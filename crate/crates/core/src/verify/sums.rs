//! The elementary power-of-sums inequality and the three equivalent
//! integrals built from `T_alpha w`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::{block_averages, integral, pos_op, tail_sums, AdaptedFamily};
use crate::space::FilteredSpace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sides {
    #[serde(with = "crate::json::num")]
    pub lhs: f64,
    #[serde(with = "crate::json::num")]
    pub rhs: f64,
}

impl Sides {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * slack
    }
}

/// `(sum a_i)^s <= s sum_i a_i (sum_{j >= i} a_j)^{s-1}` for nonnegative `a`.
pub fn power_sum_inequality(a: &[f64], s: f64) -> Result<Sides> {
    if !(s.is_finite() && s > 1.0) {
        return Err(LabError::param(format!("s = {s} must exceed 1")));
    }
    if a.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(LabError::param("the sequence must be finite and nonnegative"));
    }
    Ok(power_sum_sides(a, s))
}

/// Both sides without the range check on `s`.
pub(crate) fn power_sum_sides(a: &[f64], s: f64) -> Sides {
    let mut tail = 0.0;
    let mut rhs = 0.0;
    for &v in a.iter().rev() {
        tail += v;
        if v > 0.0 {
            rhs += v * tail.powf(s - 1.0);
        }
    }
    Sides {
        lhs: tail.powf(s),
        rhs: s * rhs,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailIntegrals {
    /// `int (T_alpha w)^s`
    pub a1: f64,
    /// `int sum_i alpha_i E_i w (E_i(bar alpha_i w))^{s-1}`
    pub a2: f64,
    /// `int (sup_i E_i(bar alpha_i w))^s`
    pub a3: f64,
}

pub fn tail_integrals(space: &FilteredSpace, alpha: &AdaptedFamily, w: &[f64], s: f64) -> Result<TailIntegrals> {
    if !(s.is_finite() && s > 1.0) {
        return Err(LabError::param(format!("s = {s} must exceed 1")));
    }
    alpha.validate(space)?;
    if w.len() != space.num_atoms() {
        return Err(LabError::validation(0, "weight length does not match the space"));
    }
    let n = space.num_atoms();
    let t = pos_op(space, alpha, w);
    let a1 = integral(space, &t.iter().map(|v| v.powf(s)).collect::<Vec<_>>());
    let tails = tail_sums(space, alpha);
    let mut a2_density = vec![0.0; n];
    let mut sup = vec![0.0_f64; n];
    for i in 0..space.num_levels() {
        let tw: Vec<f64> = (0..n).map(|a| tails.levels[i][a] * w[a]).collect();
        let etw = block_averages(space, i, &tw);
        let ew = block_averages(space, i, w);
        for a in 0..n {
            let b = space.block_of(i, a);
            sup[a] = sup[a].max(etw[b]);
            let al = alpha.levels[i][b];
            if al > 0.0 && ew[b] > 0.0 {
                a2_density[a] += al * ew[b] * etw[b].powf(s - 1.0);
            }
        }
    }
    Ok(TailIntegrals {
        a1,
        a2: integral(space, &a2_density),
        a3: integral(space, &sup.iter().map(|v| v.powf(s)).collect::<Vec<_>>()),
    })
}
