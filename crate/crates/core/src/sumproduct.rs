//! Sum-product message passing over `GF(p)` parity checks and the six-step
//! SC/SSC algorithm with a running syndrome.
//!
//! A check `sum_k a_k x_k = t` sends to variable `v` the distribution of
//! `a_v^{-1} (t - sum_{k != v} a_k x_k)`, computed by pairwise cyclic
//! convolutions with forward/backward partial products. Messages live in the
//! linear domain and are renormalised after every update.

use crate::decoders::{
    argmax_smallest, draw_symbol, ConditionalModel, Decision, DecodeResult, Evaluation, StagePosterior,
};
use crate::enumerate::{advance, check_budget, for_each_vector, space_size};
use crate::error::{Error, Result};
use crate::gf::FieldSpec;
use crate::linalg::{column_suffixes, DenseMatrix, SparseMatrix};
use crate::source::seeded_rng;

pub const DEFAULT_ITERATIONS: usize = 20;

/// Stage conditionals on suffixes with at most this many free assignments may
/// be summed exactly instead of approximated.
pub const EXACT_STAGE_BUDGET: f64 = 65536.0;

pub type Belief = StagePosterior;

/// Variable/check adjacency of a sparse matrix.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    field: FieldSpec,
    vars: usize,
    /// Per check: `(variable, coefficient, edge id)`.
    checks: Vec<Vec<(usize, u8, usize)>>,
    /// Per variable: edge ids.
    var_edges: Vec<Vec<usize>>,
    edges: usize,
}

impl FactorGraph {
    pub fn new(a: &SparseMatrix) -> Self {
        let mut var_edges = vec![Vec::new(); a.cols()];
        let mut checks = Vec::with_capacity(a.rows());
        let mut e = 0;
        for r in 0..a.rows() {
            let mut row = Vec::with_capacity(a.row(r).len());
            for &(j, v) in a.row(r) {
                row.push((j, v, e));
                var_edges[j].push(e);
                e += 1;
            }
            checks.push(row);
        }
        FactorGraph {
            field: a.field(),
            vars: a.cols(),
            checks,
            var_edges,
            edges: e,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }
    pub fn checks(&self) -> usize {
        self.checks.len()
    }
    pub fn edges(&self) -> usize {
        self.edges
    }

    /// Flooding schedule: `iterations` rounds of variable-to-check then
    /// check-to-variable updates; returns every variable's belief.
    pub fn beliefs(&self, priors: &[Vec<f64>], target: &[u8], iterations: usize) -> Result<Vec<Belief>> {
        let p = self.field.size();
        if priors.len() != self.vars || target.len() != self.checks.len() {
            return Err(Error::Usage(format!(
                "graph has {} variables and {} checks, got {} priors and {} targets",
                self.vars,
                self.checks.len(),
                priors.len(),
                target.len()
            )));
        }
        if priors.iter().any(|v| v.len() != p) {
            return Err(Error::Usage("prior vectors must have one entry per symbol".into()));
        }
        let uniform = vec![1.0 / p as f64; p];
        let mut to_var = vec![uniform.clone(); self.edges];
        let mut to_check = vec![uniform; self.edges];
        let mut infeasible = false;
        for _ in 0..iterations {
            for (v, edges) in self.var_edges.iter().enumerate() {
                for &e in edges {
                    let mut m = priors[v].clone();
                    for &e2 in edges {
                        if e2 != e {
                            mul_assign(&mut m, &to_var[e2]);
                        }
                    }
                    normalise(&mut m);
                    to_check[e] = m;
                }
            }
            for (r, row) in self.checks.iter().enumerate() {
                if row.is_empty() {
                    infeasible |= target[r] != 0;
                    continue;
                }
                self.check_update(row, target[r], &to_check, &mut to_var);
            }
        }
        Ok((0..self.vars)
            .map(|v| {
                let mut b = priors[v].clone();
                for &e in &self.var_edges[v] {
                    mul_assign(&mut b, &to_var[e]);
                }
                if infeasible {
                    b.iter_mut().for_each(|x| *x = 0.0);
                }
                StagePosterior::from_masses(&b)
            })
            .collect())
    }

    fn check_update(&self, row: &[(usize, u8, usize)], t: u8, to_check: &[Vec<f64>], to_var: &mut [Vec<f64>]) {
        let f = self.field;
        let p = f.size();
        // distribution of a_k x_k for each neighbour
        let scaled: Vec<Vec<f64>> = row
            .iter()
            .map(|&(_, a, e)| {
                let mut z = vec![0.0; p];
                for (x, &m) in to_check[e].iter().enumerate() {
                    z[f.mul(a, x as u8) as usize] += m;
                }
                z
            })
            .collect();
        let d = row.len();
        let mut delta = vec![0.0; p];
        delta[0] = 1.0;
        let mut fwd = Vec::with_capacity(d + 1);
        fwd.push(delta.clone());
        for z in &scaled {
            let next = convolve(f, fwd.last().expect("seeded"), z);
            fwd.push(next);
        }
        let mut bwd = vec![delta; d + 1];
        for k in (0..d).rev() {
            bwd[k] = convolve(f, &bwd[k + 1], &scaled[k]);
        }
        for (k, &(_, a, e)) in row.iter().enumerate() {
            let others = convolve(f, &fwd[k], &bwd[k + 1]);
            let mut m: Vec<f64> = (0..p as u8)
                .map(|x| others[f.sub(t, f.mul(a, x)) as usize])
                .collect();
            normalise(&mut m);
            to_var[e] = m;
        }
    }
}

fn convolve(f: FieldSpec, a: &[f64], b: &[f64]) -> Vec<f64> {
    let p = f.size();
    let mut out = vec![0.0; p];
    for (s, &pa) in a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (t, &pb) in b.iter().enumerate() {
            out[f.add(s as u8, t as u8) as usize] += pa * pb;
        }
    }
    out
}

fn mul_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x *= y);
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Approximate `mu_{X_j | X^{j-1}, C_1, Y}`: belief of the first variable of
/// the suffix graph `A_j^n` with syndrome `c'_1(j)`.
pub fn conditional_sp(suffix: &SparseMatrix, c1_prime: &[u8], priors: &[Vec<f64>], iterations: usize) -> Result<Belief> {
    if iterations == 0 {
        return Err(Error::Usage("sum-product needs at least one iteration".into()));
    }
    if suffix.cols() == 0 {
        return Err(Error::Usage("empty suffix has no variable to estimate".into()));
    }
    let mut beliefs = FactorGraph::new(suffix).beliefs(priors, c1_prime, iterations)?;
    Ok(beliefs.swap_remove(0))
}

/// Every variable's belief for the whole graph of `A` with target `c1`.
pub fn marginal_beliefs(a: &SparseMatrix, c1: &[u8], priors: &[Vec<f64>], iterations: usize) -> Result<Vec<Belief>> {
    if iterations == 0 {
        return Err(Error::Usage("sum-product needs at least one iteration".into()));
    }
    FactorGraph::new(a).beliefs(priors, c1, iterations)
}

/// Exact summation of the stage conditional over `{x_j^n : A_j^n x_j^n =
/// c'_1(j)}`. The free coordinates `x_j .. x_{n-l}` are enumerated and the
/// tail is solved with the inverse of the rightmost block.
pub fn exact_stage_conditional(
    suffix: &SparseMatrix,
    tail_inverse: &DenseMatrix,
    c1_prime: &[u8],
    priors: &[Vec<f64>],
) -> Result<Belief> {
    let f = suffix.field();
    let p = f.size();
    let l = suffix.rows();
    let width = suffix.cols();
    if width <= l {
        return Err(Error::Usage("stage conditional needs at least one free coordinate".into()));
    }
    let free = width - l;
    check_budget("exact stage conditional", space_size(p, free), EXACT_STAGE_BUDGET)?;
    let mut masses = vec![0.0; p];
    let mut xf = vec![0u8; free];
    let mut target = vec![0u8; l];
    loop {
        let w_free: f64 = xf.iter().zip(priors).map(|(&x, pr)| pr[x as usize]).product();
        if w_free > 0.0 {
            for (r, t) in target.iter_mut().enumerate() {
                *t = suffix
                    .row(r)
                    .iter()
                    .filter(|&&(j, _)| j < free)
                    .fold(c1_prime[r], |acc, &(j, v)| f.sub(acc, f.mul(v, xf[j])));
            }
            let tail = tail_inverse.apply(&target)?;
            let w_tail: f64 = tail.iter().zip(&priors[free..]).map(|(&x, pr)| pr[x as usize]).product();
            masses[xf[0] as usize] += w_free * w_tail;
        }
        if !advance(p as u8, &mut xf) {
            break;
        }
    }
    Ok(StagePosterior::from_masses(&masses))
}

/// Brute-force `mu_{X_j | X^{j-1}, C_1, Y}(. | prefix, c1, y)`: sums the
/// block law over every `x` with `A x = c1` and the given prefix.
pub fn brute_force_conditional(
    a: &SparseMatrix,
    c1: &[u8],
    prefix: &[u8],
    priors: &[Vec<f64>],
) -> Result<Belief> {
    let f = a.field();
    let p = f.size();
    let n = a.cols();
    let j = prefix.len();
    if j >= n {
        return Err(Error::Usage("prefix covers the whole block".into()));
    }
    check_budget("brute-force conditional", space_size(p, n - j), crate::enumerate::ENUMERATION_BUDGET)?;
    let mut masses = vec![0.0; p];
    let mut x = prefix.to_vec();
    x.resize(n, 0);
    for_each_vector(p as u8, n - j, |rest| {
        x[j..].copy_from_slice(rest);
        let w: f64 = x.iter().zip(priors).map(|(&s, pr)| pr[s as usize]).product();
        if w > 0.0 && a.apply(&x).map(|c| c == c1).unwrap_or(false) {
            masses[rest[0] as usize] += w;
        }
    });
    Ok(StagePosterior::from_masses(&masses))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionMode {
    Deterministic,
    Stochastic,
}

/// The six-step SC/SSC algorithm on an ordered system with `B = [I | 0]`.
///
/// 1. `j = 1`, `c'_1 = c_1`.
/// 2. Stage conditional of `x_j` given `c'_1` and `y_j^n` (exact summation or
///    sum-product, per the model's evaluation mode).
/// 3. Argmax or seeded draw.
/// 4. `c'_1 <- c'_1 - x_j a_j`.
/// 5. After stage `n - l`, `x_{n-l+1}^n = [A_{n-l+1}^n]^{-1} c'_1`.
/// 6. Otherwise `j <- j + 1` and repeat from step 2.
pub fn run_sc_ssc_algorithm(
    model: &ConditionalModel,
    c1: &[u8],
    y: &[u8],
    mode: DecisionMode,
    seed: u64,
) -> Result<DecodeResult> {
    let sys = model.system();
    let tail_inverse = sys.tail_inverse().ok_or_else(|| {
        Error::Domain("six-step algorithm needs B = [I | 0] and an invertible right block".into())
    })?;
    let law = model.law();
    let f = sys.field();
    let (n, l) = (sys.n(), sys.l());
    if c1.len() != l || y.len() != n {
        return Err(Error::Usage(format!("expected codeword length {l} and side information length {n}")));
    }
    f.check_symbols(c1)?;
    if let Some(&bad) = y.iter().find(|&&v| v as usize >= law.y_size()) {
        return Err(Error::Usage(format!("side-information symbol {bad} out of range")));
    }
    let a = sys.a();
    let priors: Vec<Vec<f64>> = y.iter().map(|&yi| law.conditional(yi).to_vec()).collect();
    let suffixes = column_suffixes(a);
    let mut rng = seeded_rng(seed, 0);
    let mut c_prime = c1.to_vec();
    let mut x = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n - l);
    for j in 0..n - l {
        let belief = match model.evaluation() {
            Evaluation::Exact => exact_stage_conditional(&suffixes[j], tail_inverse, &c_prime, &priors[j..])?,
            Evaluation::SumProduct { iterations } => {
                conditional_sp(&suffixes[j], &c_prime, &priors[j..], iterations)?
            }
        };
        let s = match mode {
            DecisionMode::Deterministic => argmax_smallest(&belief.probs).0,
            DecisionMode::Stochastic => draw_symbol(&belief.probs, &mut rng),
        };
        let tie = {
            let slack = 1e-12 * belief.probs[s];
            belief
                .probs
                .iter()
                .enumerate()
                .any(|(t, &v)| t != s && (v - belief.probs[s]).abs() <= slack)
        };
        trace.push(Decision {
            index: l + j,
            symbol: s as u8,
            mass: belief.probs[s],
            tie,
            zero_support: belief.zero_support,
        });
        let xj = s as u8;
        for (r, v) in a.column(j) {
            c_prime[r] = f.sub(c_prime[r], f.mul(xj, v));
        }
        x.push(xj);
    }
    x.extend(tail_inverse.apply(&c_prime)?);
    Ok(DecodeResult::success(x, trace))
}

/// Largest disagreement among the three expressions for the stage
/// conditional: prefix masses of the extended-codeword law, brute-force
/// summation over the coset with fixed prefix, and the suffix summation with
/// the running syndrome. Covers every stage, codeword, side-information
/// vector and prefix.
pub fn conditional_equivalence_gap(model: &ConditionalModel) -> Result<f64> {
    let sys = model.system();
    let tail_inverse = sys
        .tail_inverse()
        .ok_or_else(|| Error::Domain("equivalence check needs an ordered system with B = [I | 0]".into()))?;
    let law = model.law();
    let f = sys.field();
    let p = f.size() as u8;
    let (n, l) = (sys.n(), sys.l());
    let a = sys.a();
    let suffixes = column_suffixes(a);
    let mut gap: f64 = 0.0;
    let mut failure = None;
    for_each_vector(law.y_size() as u8, n, |y| {
        if failure.is_some() || y.iter().any(|&v| law.marginal_y(v) == 0.0) {
            return;
        }
        let priors: Vec<Vec<f64>> = y.iter().map(|&yi| law.conditional(yi).to_vec()).collect();
        let tree = crate::decoders::PrefixTree::build(sys, law, y);
        for_each_vector(p, l, |c1| {
            for j in 0..n - l {
                for_each_vector(p, j, |prefix| {
                    let run = || -> Result<f64> {
                        // c = (c1, x_1^{j-1}) in ordered coordinates
                        let mut c = c1.to_vec();
                        c.extend_from_slice(prefix);
                        let q = crate::enumerate::rank(p as usize, &c);
                        let exc = StagePosterior::from_masses(tree.children(l + j, q));
                        let crng = brute_force_conditional(a, c1, prefix, &priors)?;
                        let mut c_prime = c1.to_vec();
                        for (k, &xk) in prefix.iter().enumerate() {
                            for (r, v) in a.column(k) {
                                c_prime[r] = f.sub(c_prime[r], f.mul(xk, v));
                            }
                        }
                        let sp = exact_stage_conditional(&suffixes[j], tail_inverse, &c_prime, &priors[j..])?;
                        if exc.zero_support != crng.zero_support || crng.zero_support != sp.zero_support {
                            return Ok(f64::INFINITY);
                        }
                        let mut g: f64 = 0.0;
                        for s in 0..p as usize {
                            g = g.max((exc.probs[s] - crng.probs[s]).abs());
                            g = g.max((crng.probs[s] - sp.probs[s]).abs());
                        }
                        Ok(g)
                    };
                    match run() {
                        Ok(g) => gap = gap.max(g),
                        Err(e) => failure = Some(e),
                    }
                });
            }
        });
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(gap),
    }
}

/// True when [`conditional_equivalence_gap`] is within `tolerance`.
pub fn reduce_conditional_equivalence_check(model: &ConditionalModel, tolerance: f64) -> Result<bool> {
    Ok(conditional_equivalence_gap(model)? <= tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::build_complement;
    use crate::source::JointSourceLaw;

    fn gf(p: u32) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    #[test]
    fn empty_check_set_returns_prior() {
        let a = SparseMatrix::zeros(gf(3), 0, 2);
        let priors = vec![vec![0.2, 0.3, 0.5], vec![1.0 / 3.0; 3]];
        let b = conditional_sp(&a, &[], &priors, 3).unwrap();
        for (u, v) in b.probs.iter().zip(&priors[0]) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn single_parity_check_flips_bias() {
        let a = SparseMatrix::from_dense_rows(gf(2), &[vec![1, 1]], 2).unwrap();
        let uniform = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let b = conditional_sp(&a, &[1], &uniform, 1).unwrap();
        assert!((b.probs[0] - 0.5).abs() < 1e-15);

        let biased = vec![vec![0.5, 0.5], vec![0.8, 0.2]];
        let b = conditional_sp(&a, &[1], &biased, 1).unwrap();
        // x_j = 1 - x_{j+1}
        assert!((b.probs[0] - 0.2).abs() < 1e-15);
        assert!((b.probs[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn infeasible_empty_row_is_zero_support() {
        let a = SparseMatrix::new(gf(2), 2, vec![vec![], vec![(0, 1)]]).unwrap();
        let b = conditional_sp(&a, &[1, 0], &[vec![0.5, 0.5], vec![0.5, 0.5]], 2).unwrap();
        assert!(b.zero_support);
    }

    #[test]
    fn check_order_does_not_change_beliefs() {
        let rows = vec![vec![1, 1, 0, 0, 0], vec![0, 1, 1, 1, 0], vec![0, 0, 0, 1, 1]];
        let mut rev = rows.clone();
        rev.reverse();
        let f = gf(3);
        let a = SparseMatrix::from_dense_rows(f, &rows, 5).unwrap();
        let b = SparseMatrix::from_dense_rows(f, &rev, 5).unwrap();
        let priors: Vec<Vec<f64>> = (0..5).map(|k| vec![0.5, 0.3 - 0.05 * k as f64, 0.2 + 0.05 * k as f64]).collect();
        let ba = marginal_beliefs(&a, &[1, 2, 0], &priors, 10).unwrap();
        let bb = marginal_beliefs(&b, &[0, 2, 1], &priors, 10).unwrap();
        for (u, v) in ba.iter().zip(&bb) {
            for (s, t) in u.probs.iter().zip(&v.probs) {
                assert!((s - t).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn syndrome_recursion_preserves_solution_set() {
        let f = gf(2);
        let a = crate::linalg::sample_sparse_full_rank(f, 6, 3, 3, 11).unwrap();
        let suffixes = column_suffixes(&a);
        for x in crate::enumerate::all_vectors(2, 6) {
            let c1 = a.apply(&x).unwrap();
            for j in 0..=6 {
                let mut cp = c1.clone();
                for (k, &xk) in x[..j].iter().enumerate() {
                    for (r, v) in a.column(k) {
                        cp[r] = f.sub(cp[r], f.mul(xk, v));
                    }
                }
                // same solution set as A x = c1 with the prefix fixed
                let mut lhs = Vec::new();
                let mut rhs = Vec::new();
                for_each_vector(2, 6 - j, |rest| {
                    if suffixes[j].apply(rest).unwrap() == cp {
                        lhs.push(rest.to_vec());
                    }
                    let mut full = x[..j].to_vec();
                    full.extend_from_slice(rest);
                    if a.apply(&full).unwrap() == c1 {
                        rhs.push(rest.to_vec());
                    }
                });
                assert_eq!(lhs, rhs);
                assert_eq!(suffixes[j], a.column_suffix(j));
            }
        }
    }

    #[test]
    fn noiseless_side_information_recovers_with_one_iteration() {
        let f = gf(2);
        let a = crate::linalg::sample_sparse_full_rank(f, 8, 4, 3, 5).unwrap();
        let (a, _) = crate::linalg::permute_columns_full_rank_tail(&a).unwrap();
        let sys = build_complement(&a).unwrap();
        let law = JointSourceLaw::noiseless(f).unwrap();
        let model = ConditionalModel::new(sys, law.clone(), Evaluation::SumProduct { iterations: 1 }).unwrap();
        for seed in 0..20 {
            let s = law.sample_block(8, seed);
            let c1 = a.apply(&s.x).unwrap();
            let out = run_sc_ssc_algorithm(&model, &c1, &s.y, DecisionMode::Deterministic, 0).unwrap();
            assert_eq!(out.x_hat.unwrap(), s.x);
        }
    }

    #[test]
    fn full_rank_square_skips_the_loop() {
        let f = gf(3);
        let a = SparseMatrix::from_dense_rows(f, &[vec![1, 2], vec![0, 1]], 2).unwrap();
        let sys = build_complement(&a).unwrap();
        let law = JointSourceLaw::symmetric(f, 0.2).unwrap();
        let model = ConditionalModel::exact(sys, law).unwrap();
        let out = run_sc_ssc_algorithm(&model, &[1, 2], &[0, 0], DecisionMode::Stochastic, 3).unwrap();
        assert!(out.trace.is_empty());
        let inv = a.invert().unwrap();
        assert_eq!(out.x_hat.unwrap(), inv.apply(&[1, 2]).unwrap());
    }
}
