//! Lower bounds for operator norms between weighted Lebesgue spaces.
//!
//! Every reported bound is the ratio `||Op f||_{L^q(dst)} / ||f||_{L^p(src)}`
//! of an explicit nonnegative witness `f`, so it never exceeds the true norm.
//! All operators handled here are positive, hence their norms are attained
//! on nonnegative functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::{block_averages, conjugate, lp_norm_pow, AdaptedFamily, AtomFunction};
use crate::space::{FilteredSpace, MeasurableSet};

/// The operator whose norm is estimated.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    /// `f -> T_alpha(pre * f)`; `pre = w` gives the dual form of the trace inequality.
    Positive {
        alpha: AdaptedFamily,
        pre: Option<Vec<f64>>,
    },
    /// `f -> M_alpha f`.
    Maximal { alpha: AdaptedFamily },
    /// `f -> 1_E sup_{j >= level(E)} |E_j f|`.
    LocalMaximal { set: MeasurableSet },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Indicators, `1_E sigma` and other structured test functions.
    IndicatorTests,
    RandomSearch,
    AscentFixedPoint,
    ExhaustiveGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    #[serde(with = "crate::json::num")]
    pub lower: f64,
    pub witness: AtomFunction,
    pub method: Method,
}

/// `||Op f||_{L^q(dst)} <= C ||f||_{L^p(src)}`; missing weights are 1.
#[derive(Clone, Debug)]
pub struct NormProblem<'a> {
    pub space: &'a FilteredSpace,
    pub op: Operator,
    pub p: f64,
    pub q: f64,
    pub src: Option<Vec<f64>>,
    pub dst: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct NormOptions {
    /// Number of random candidates.
    pub budget: usize,
    pub indicators: bool,
    /// Adds `1_B src^{1-p'}` for every block `B`.
    pub dual_indicators: bool,
    pub ascent: bool,
    /// Number of best candidates used as ascent starting points.
    pub restarts: usize,
    pub seed: u64,
    pub extra: Vec<Vec<f64>>,
    /// Grid search on spaces with at most three atoms.
    pub grid: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            budget: 24,
            indicators: true,
            dual_indicators: false,
            ascent: true,
            restarts: 3,
            seed: 0,
            extra: Vec::new(),
            grid: true,
        }
    }
}

pub const ASCENT_MAX_STEPS: usize = 200;
pub const ASCENT_REL_CHANGE: f64 = 1e-12;
const GRID_2: usize = 4096;
const GRID_3: usize = 160;

struct Linearized {
    /// level -> atom -> multiplier applied to `E_level f`
    mult: Vec<Vec<f64>>,
}

impl<'a> NormProblem<'a> {
    fn check(&self) -> Result<()> {
        conjugate(self.p)?;
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(LabError::param(format!("target exponent {} must be positive", self.q)));
        }
        let n = self.space.num_atoms();
        for (name, w) in [("src", &self.src), ("dst", &self.dst)] {
            if let Some(w) = w {
                if w.len() != n || w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(LabError::validation(0, format!("{name} weight must be finite, nonnegative, one value per atom")));
                }
            }
        }
        match &self.op {
            Operator::Positive { alpha, pre } => {
                alpha.validate(self.space)?;
                if pre.as_ref().is_some_and(|w| w.len() != n) {
                    return Err(LabError::validation(0, "pre-multiplier length does not match the space"));
                }
            }
            Operator::Maximal { alpha } => alpha.validate(self.space)?,
            Operator::LocalMaximal { set } => set.validate(self.space)?,
        }
        Ok(())
    }

    fn local_family(&self, set: &MeasurableSet) -> (AdaptedFamily, Vec<bool>) {
        let mut fam = AdaptedFamily::zeros(self.space);
        for level in fam.levels.iter_mut().skip(set.level) {
            level.iter_mut().for_each(|v| *v = 1.0);
        }
        (fam, set.indicator(self.space))
    }

    /// `Op f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let s = self.space;
        match &self.op {
            Operator::Positive { alpha, pre } => {
                let g: Vec<f64> = match pre {
                    Some(w) => f.iter().zip(w).map(|(a, b)| a * b).collect(),
                    None => f.to_vec(),
                };
                crate::operators::pos_op(s, alpha, &g)
            }
            Operator::Maximal { alpha } => crate::operators::gen_max(s, alpha, f),
            Operator::LocalMaximal { set } => {
                let (fam, mask) = self.local_family(set);
                crate::operators::gen_max(s, &fam, f)
                    .into_iter()
                    .zip(mask)
                    .map(|(v, m)| if m { v } else { 0.0 })
                    .collect()
            }
        }
    }

    /// The norm ratio at `f`; `None` when `||f||_{L^p(src)} = 0`.
    pub fn ratio(&self, f: &[f64]) -> Option<f64> {
        let den = lp_norm_pow(self.space, f, self.p, self.src.as_deref());
        if !(den > 0.0) || !den.is_finite() {
            return None;
        }
        let num = lp_norm_pow(self.space, &self.apply(f), self.q, self.dst.as_deref());
        Some(num.powf(1.0 / self.q) / den.powf(1.0 / self.p))
    }

    /// Linear operator agreeing with `Op` at `f` (the argmax level for maximal operators).
    fn linearize(&self, f: &[f64]) -> Option<Linearized> {
        let s = self.space;
        let (fam, mask) = match &self.op {
            Operator::Positive { .. } => return None,
            Operator::Maximal { alpha } => (alpha.clone(), vec![true; s.num_atoms()]),
            Operator::LocalMaximal { set } => self.local_family(set),
        };
        let mut best = vec![(f64::NEG_INFINITY, usize::MAX); s.num_atoms()];
        for i in 0..s.num_levels() {
            let avg = block_averages(s, i, f);
            for (a, b) in best.iter_mut().enumerate() {
                let blk = s.block_of(i, a);
                let v = fam.levels[i][blk] * avg[blk];
                if v > b.0 {
                    *b = (v, i);
                }
            }
        }
        let mut mult = vec![vec![0.0; s.num_atoms()]; s.num_levels()];
        for (a, &(_, i)) in best.iter().enumerate() {
            if mask[a] && i != usize::MAX {
                mult[i][a] = fam.levels[i][s.block_of(i, a)];
            }
        }
        Some(Linearized { mult })
    }

    /// Adjoint in `L^2(dmu)` of the (linearized) operator, applied to `g`.
    fn adjoint(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let s = self.space;
        let n = s.num_atoms();
        let mut out = vec![0.0; n];
        match &self.op {
            Operator::Positive { alpha, pre } => {
                for i in 0..s.num_levels() {
                    let h: Vec<f64> = (0..n).map(|a| alpha.at(s, i, a) * g[a]).collect();
                    let avg = block_averages(s, i, &h);
                    for (a, o) in out.iter_mut().enumerate() {
                        *o += avg[s.block_of(i, a)];
                    }
                }
                if let Some(w) = pre {
                    out.iter_mut().zip(w).for_each(|(o, w)| *o *= w);
                }
            }
            _ => {
                let lin = self.linearize(f).expect("maximal operators linearize");
                for (i, m) in lin.mult.iter().enumerate() {
                    if m.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let h: Vec<f64> = m.iter().zip(g).map(|(a, b)| a * b).collect();
                    let avg = block_averages(s, i, &h);
                    for (a, o) in out.iter_mut().enumerate() {
                        *o += avg[s.block_of(i, a)];
                    }
                }
            }
        }
        out
    }

    fn normalize(&self, f: &mut [f64]) -> bool {
        let den = lp_norm_pow(self.space, f, self.p, self.src.as_deref());
        if !(den > 0.0 && den.is_finite()) {
            return false;
        }
        let c = den.powf(-1.0 / self.p);
        f.iter_mut().for_each(|v| *v *= c);
        true
    }

    /// One step of `f <- (Op*(dst (Op f)^{q-1}) / src)^{1/(p-1)}`.
    fn ascent_step(&self, f: &[f64]) -> Option<Vec<f64>> {
        let h = self.apply(f);
        let g: Vec<f64> = h
            .iter()
            .enumerate()
            .map(|(a, &v)| {
                let d = self.dst.as_ref().map_or(1.0, |w| w[a]);
                if v > 0.0 && d > 0.0 {
                    d * v.powf(self.q - 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let adj = self.adjoint(f, &g);
        let mut next: Vec<f64> = adj
            .iter()
            .enumerate()
            .map(|(a, &v)| {
                let sw = self.src.as_ref().map_or(1.0, |w| w[a]);
                if v > 0.0 && sw > 0.0 {
                    (v / sw).powf(1.0 / (self.p - 1.0))
                } else {
                    0.0
                }
            })
            .collect();
        if next.iter().any(|v| !v.is_finite()) || !self.normalize(&mut next) {
            return None;
        }
        Some(next)
    }
}

struct Best {
    value: f64,
    witness: Vec<f64>,
    method: Method,
}

impl Best {
    fn offer(&mut self, problem: &NormProblem, f: &[f64], method: Method) -> Option<f64> {
        let r = problem.ratio(f)?;
        if r.is_finite() && r > self.value {
            self.value = r;
            self.witness = f.to_vec();
            self.method = method;
        }
        Some(r)
    }
}

fn random_candidate(rng: &mut ChaCha8Rng, n: usize, kind: usize) -> Vec<f64> {
    match kind % 3 {
        0 => (0..n).map(|_| rng.gen::<f64>()).collect(),
        1 => {
            let ln = LogNormal::new(0.0, 1.5).expect("valid log-normal");
            (0..n).map(|_| ln.sample(rng)).collect()
        }
        _ => (0..n)
            .map(|_| if rng.gen_bool(0.3) { rng.gen::<f64>() * 4.0 } else { 0.0 })
            .collect(),
    }
}

fn grid_search(problem: &NormProblem, best: &mut Best) {
    let n = problem.space.num_atoms();
    let half_pi = std::f64::consts::FRAC_PI_2;
    match n {
        1 => {
            best.offer(problem, &[1.0], Method::ExhaustiveGrid);
        }
        2 => {
            let eval = |t: f64| problem.ratio(&[t.cos().max(0.0), t.sin().max(0.0)]).unwrap_or(0.0);
            let mut arg = 0;
            let mut top = f64::NEG_INFINITY;
            for k in 0..=GRID_2 {
                let v = eval(half_pi * k as f64 / GRID_2 as f64);
                if v > top {
                    top = v;
                    arg = k;
                }
            }
            let h = half_pi / GRID_2 as f64;
            let (mut lo, mut hi) = ((arg as f64 - 1.0) * h, (arg as f64 + 1.0) * h);
            lo = lo.max(0.0);
            hi = hi.min(half_pi);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..80 {
                let a = hi - phi * (hi - lo);
                let b = lo + phi * (hi - lo);
                if eval(a) < eval(b) {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            for t in [half_pi * arg as f64 / GRID_2 as f64, 0.5 * (lo + hi)] {
                best.offer(problem, &[t.cos().max(0.0), t.sin().max(0.0)], Method::ExhaustiveGrid);
            }
        }
        3 => {
            for a in 0..=GRID_3 {
                for b in 0..=GRID_3 {
                    let (t, u) = (half_pi * a as f64 / GRID_3 as f64, half_pi * b as f64 / GRID_3 as f64);
                    let f = [t.cos() * u.cos(), t.sin() * u.cos(), u.sin()].map(|v| v.max(0.0));
                    best.offer(problem, &f, Method::ExhaustiveGrid);
                }
            }
        }
        _ => {}
    }
}

/// Best lower bound for the norm of `problem.op` over the configured candidates.
pub fn norm_lower_bound(problem: &NormProblem, opts: &NormOptions) -> Result<NormEstimate> {
    problem.check()?;
    let s = problem.space;
    let n = s.num_atoms();
    let mut best = Best {
        value: f64::NEG_INFINITY,
        witness: Vec::new(),
        method: Method::IndicatorTests,
    };
    let mut pool: Vec<(f64, Vec<f64>)> = Vec::new();
    let consider = |best: &mut Best, f: Vec<f64>, method: Method, pool: &mut Vec<(f64, Vec<f64>)>| {
        if let Some(r) = best.offer(problem, &f, method) {
            pool.push((r, f));
        }
    };

    let mut structured = 0usize;
    if opts.indicators {
        for i in 0..s.num_levels() {
            for b in 0..s.num_blocks(i) {
                let f = MeasurableSet::block(i, b).indicator(s).into_iter().map(f64::from).collect();
                consider(&mut best, f, Method::IndicatorTests, &mut pool);
                structured += 1;
            }
        }
    }
    if opts.dual_indicators {
        let pp = conjugate(problem.p)?;
        let sigma: Vec<f64> = match &problem.src {
            Some(v) => v.iter().map(|&x| if x > 0.0 { x.powf(1.0 - pp) } else { 0.0 }).collect(),
            None => vec![1.0; n],
        };
        for i in 0..s.num_levels() {
            for b in 0..s.num_blocks(i) {
                let ind = MeasurableSet::block(i, b).indicator(s);
                let f = sigma.iter().zip(ind).map(|(&v, m)| if m { v } else { 0.0 }).collect();
                consider(&mut best, f, Method::IndicatorTests, &mut pool);
                structured += 1;
            }
        }
    }
    for f in &opts.extra {
        if f.len() != n {
            return Err(LabError::validation(0, "extra test function length does not match the space"));
        }
        consider(&mut best, f.clone(), Method::IndicatorTests, &mut pool);
        structured += 1;
    }
    let grid = opts.grid && n <= 3;
    if structured == 0 && opts.budget == 0 && !grid {
        return Err(LabError::EmptyEstimate);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 0..opts.budget {
        let f = random_candidate(&mut rng, n, k);
        consider(&mut best, f, Method::RandomSearch, &mut pool);
    }
    if grid {
        grid_search(problem, &mut best);
    }
    if opts.ascent {
        // Stable sort keeps candidate order among ties.
        pool.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, start) in pool.into_iter().take(opts.restarts) {
            let mut f = start;
            if !problem.normalize(&mut f) {
                continue;
            }
            let mut prev = problem.ratio(&f).unwrap_or(0.0);
            for _ in 0..ASCENT_MAX_STEPS {
                let Some(next) = problem.ascent_step(&f) else { break };
                let Some(r) = best.offer(problem, &next, Method::AscentFixedPoint) else { break };
                f = next;
                if (r - prev).abs() <= ASCENT_REL_CHANGE * r.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
                prev = r;
            }
        }
    }
    if best.witness.is_empty() {
        // Every candidate had zero source norm.
        return Err(LabError::EmptyEstimate);
    }
    Ok(NormEstimate {
        lower: best.value,
        witness: AtomFunction { values: best.witness },
        method: best.method,
    })
}

/// Estimates for `||T_alpha||_{L^p(dmu) -> L^q(w dmu)}` and for its dual form
/// `||g -> T_alpha(g w)||_{L^{q'}(w dmu) -> L^{p'}(dmu)}`.
pub fn duality_gap(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    w: &[f64],
    p: f64,
    q: f64,
    opts: &NormOptions,
) -> Result<(NormEstimate, NormEstimate)> {
    if !(q >= p) {
        return Err(LabError::param(format!("duality check needs p <= q, got p = {p}, q = {q}")));
    }
    let qq = conjugate(q)?;
    let pp = conjugate(p)?;
    let primal = NormProblem {
        space,
        op: Operator::Positive {
            alpha: alpha.clone(),
            pre: None,
        },
        p,
        q,
        src: None,
        dst: Some(w.to_vec()),
    };
    let dual = NormProblem {
        space,
        op: Operator::Positive {
            alpha: alpha.clone(),
            pre: Some(w.to_vec()),
        },
        p: qq,
        q: pp,
        src: Some(w.to_vec()),
        dst: None,
    };
    Ok((norm_lower_bound(&primal, opts)?, norm_lower_bound(&dual, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MassRule;

    fn depth1() -> FilteredSpace {
        FilteredSpace::dyadic(1, &MassRule::Uniform).unwrap()
    }

    fn positive(space: &FilteredSpace, alpha: AdaptedFamily) -> NormProblem<'_> {
        NormProblem {
            space,
            op: Operator::Positive { alpha, pre: None },
            p: 2.0,
            q: 2.0,
            src: None,
            dst: None,
        }
    }

    #[test]
    fn conditional_expectation_has_norm_one() {
        let s = FilteredSpace::dyadic(2, &MassRule::Uniform).unwrap();
        let est = norm_lower_bound(&positive(&s, AdaptedFamily::single_level(&s, 0, 1.0)), &NormOptions::default())
            .unwrap();
        assert!((est.lower - 1.0).abs() < 1e-12);
        assert_eq!(est.witness.values, vec![1.0; 4]);
    }

    #[test]
    fn zero_operator() {
        let s = depth1();
        let est = norm_lower_bound(&positive(&s, AdaptedFamily::zeros(&s)), &NormOptions::default()).unwrap();
        assert_eq!(est.lower, 0.0);
    }

    /// `E_0 + I` on two equal atoms is the symmetric matrix [[1.5, .5], [.5, 1.5]]
    /// in `L^2(mu)` with eigenvalues 2 and 1.
    #[test]
    fn two_atom_closed_form() {
        let s = depth1();
        let prob = positive(&s, AdaptedFamily::ones(&s));
        let grid_only = NormOptions {
            budget: 0,
            indicators: false,
            ascent: false,
            ..NormOptions::default()
        };
        let grid = norm_lower_bound(&prob, &grid_only).unwrap();
        assert_eq!(grid.method, Method::ExhaustiveGrid);
        assert!((grid.lower - 2.0).abs() < 1e-10);
        let random = NormOptions {
            indicators: false,
            grid: false,
            budget: 64,
            seed: 5,
            ..NormOptions::default()
        };
        let est = norm_lower_bound(&prob, &random).unwrap();
        assert!((est.lower - 2.0).abs() < 1e-6, "{}", est.lower);
        assert!(est.lower <= 2.0 + 1e-12);
    }

    #[test]
    fn witness_reproduces_lower() {
        let s = FilteredSpace::dyadic(3, &MassRule::Uniform).unwrap();
        let w: Vec<f64> = (0..8).map(|k| 1.0 + k as f64).collect();
        let prob = NormProblem {
            space: &s,
            op: Operator::Maximal { alpha: AdaptedFamily::ones(&s) },
            p: 2.0,
            q: 3.0,
            src: Some(w.clone()),
            dst: Some(w),
        };
        let opts = NormOptions { dual_indicators: true, seed: 3, ..NormOptions::default() };
        let est = norm_lower_bound(&prob, &opts).unwrap();
        let again = prob.ratio(&est.witness.values).unwrap();
        assert!((again - est.lower).abs() <= 1e-10 * est.lower);
    }

    #[test]
    fn empty_estimate() {
        let s = depth1();
        let opts = NormOptions {
            budget: 0,
            indicators: false,
            grid: false,
            ..NormOptions::default()
        };
        assert_eq!(
            norm_lower_bound(&positive(&s, AdaptedFamily::ones(&s)), &opts).unwrap_err(),
            LabError::EmptyEstimate
        );
    }

    #[test]
    fn duality_examples() {
        let s = depth1();
        let opts = NormOptions::default();
        let (a, b) = duality_gap(&s, &AdaptedFamily::zeros(&s), &[1.0, 1.0], 2.0, 2.0, &opts).unwrap();
        assert_eq!((a.lower, b.lower), (0.0, 0.0));
        let (a, b) = duality_gap(&s, &AdaptedFamily::ones(&s), &[1.0, 1.0], 2.0, 2.0, &opts).unwrap();
        assert!((a.lower - 2.0).abs() < 1e-9 && (b.lower - 2.0).abs() < 1e-9);
        let (a, b) = duality_gap(&s, &AdaptedFamily::ones(&s), &[1.0, 3.0], 1.5, 2.5, &opts).unwrap();
        assert!((a.lower - b.lower).abs() <= 1e-6 * a.lower, "{} vs {}", a.lower, b.lower);
    }
}
