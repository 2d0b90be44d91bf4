//! Exact error probabilities and per-stage statistics by summing over every
//! `(x, y)` pair.

use super::{argmax_smallest, ConditionalModel, PrefixTree, StagePosterior};
use crate::enumerate::{check_budget, for_each_vector, rank, space_size, ENUMERATION_BUDGET};
use crate::error::Result;
use crate::linalg::ExtendedCodeSystem;
use crate::source::JointSourceLaw;

use super::tree::{side_weight, source_weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecoderKind {
    Map,
    Typical { epsilon: f64 },
    Smap,
    Sc,
    Ssc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub typical_epsilon: f64,
    /// Also evaluate SSC in the source domain by expanding every decision
    /// tree (costs `p^(n-l)` per codeword and side-information vector).
    pub ssc_decision_trees: bool,
    /// Test hook: SC picks the least likely symbol instead of the most.
    #[doc(hidden)]
    pub corrupt_sc: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            typical_epsilon: 0.1,
            ssc_decision_trees: true,
            corrupt_sc: false,
        }
    }
}

/// Exact block error probabilities of every decoder on one model, together
/// with the per-stage quantities used by the bound checks. Stage vectors are
/// indexed by 0-based extended coordinate; entries at codeword coordinates
/// are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactProfile {
    pub n: usize,
    pub map: f64,
    pub typical: f64,
    pub smap: f64,
    /// SC error measured on the source block, `Q(f) != x`.
    pub sc: f64,
    /// SC error measured on the extended codeword, `f != c`.
    pub sc_extended: f64,
    /// SSC error by the path formula on extended codewords.
    pub ssc_extended: f64,
    /// SSC error on the source block from the expanded decision trees.
    pub ssc: Option<f64>,
    /// `P(f_i(C^{i-1}, Y) != C_i)` with the true prefix.
    pub stage_error: Vec<f64>,
    /// `P(F_i(C^{i-1}, Y) != C_i)` for the stochastic rule.
    pub stage_error_stochastic: Vec<f64>,
    /// `H(C_i | C^{i-1}, Y)` in base `|X|`, for every coordinate.
    pub stage_entropy: Vec<f64>,
    /// `H(X|Y)` per symbol, base `|X|`.
    pub conditional_entropy: f64,
}

impl ExactProfile {
    pub fn error(&self, kind: DecoderKind) -> Option<f64> {
        match kind {
            DecoderKind::Map => Some(self.map),
            DecoderKind::Typical { .. } => Some(self.typical),
            DecoderKind::Smap => Some(self.smap),
            DecoderKind::Sc => Some(self.sc),
            DecoderKind::Ssc => Some(self.ssc_extended),
        }
    }

    pub fn entropy_sum(&self) -> f64 {
        self.stage_entropy.iter().sum()
    }
}

/// Per-system lookup tables shared by every side-information vector.
struct LeafIndex {
    n: usize,
    /// `x = Q(c)` for each leaf rank `c`, flattened.
    x: Vec<u8>,
    /// Leaf ranks grouped by codeword `c1`.
    cosets: Vec<Vec<u32>>,
}

impl LeafIndex {
    fn new(sys: &ExtendedCodeSystem) -> Result<Self> {
        let p = sys.field().size();
        let n = sys.n();
        let size = p.pow(n as u32);
        let mut x_of = vec![0u8; size * n];
        let mut cosets = vec![Vec::new(); p.pow(sys.l() as u32)];
        let mut err = None;
        for_each_vector(p as u8, n, |x| match sys.extend(x) {
            Ok(c) => {
                let r = rank(p, &c);
                x_of[r * n..(r + 1) * n].copy_from_slice(x);
                let (c1, _) = sys.split(&c);
                cosets[rank(p, &c1)].push(r as u32);
            }
            Err(e) => err = Some(e),
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(LeafIndex { n, x: x_of, cosets })
    }

    fn x(&self, r: usize) -> &[u8] {
        &self.x[r * self.n..(r + 1) * self.n]
    }

    fn tree(&self, p: usize, law: &JointSourceLaw, y: &[u8]) -> PrefixTree {
        let leaves = (0..self.x.len() / self.n.max(1))
            .map(|r| source_weight(law, self.x(r), y))
            .collect();
        PrefixTree::from_leaves(p, self.n, leaves)
    }
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
}

/// Exact `Prob(decoder(AX, Y) != X)` for one decoder.
pub fn block_error_probability(model: &ConditionalModel, kind: DecoderKind) -> Result<f64> {
    let opts = ProfileOptions {
        typical_epsilon: match kind {
            DecoderKind::Typical { epsilon } => epsilon,
            _ => ProfileOptions::default().typical_epsilon,
        },
        ssc_decision_trees: false,
        corrupt_sc: false,
    };
    let prof = exact_profile(model, opts)?;
    Ok(prof.error(kind).expect("every kind is profiled"))
}

/// Enumerates every `(x, y)` and collects all exact decoder statistics.
pub fn exact_profile(model: &ConditionalModel, opts: ProfileOptions) -> Result<ExactProfile> {
    let sys = model.system();
    let law = model.law();
    let p = sys.field().size();
    let n = sys.n();
    check_budget(
        "exact enumeration of X^n x Y^n",
        space_size(p, n) * space_size(law.y_size(), n),
        ENUMERATION_BUDGET,
    )?;
    let index = LeafIndex::new(sys)?;
    let ln_base = law.ln_base();
    let h = law.conditional_entropy();

    let mut acc = Accumulator::new(n);
    let mut err = None;
    for_each_vector(law.y_size() as u8, n, |y| {
        let py = side_weight(law, y);
        if py <= 0.0 || err.is_some() {
            return;
        }
        let tree = index.tree(p, law, y);
        if let Err(e) = accumulate(&mut acc, sys, &index, &tree, law, y, py, h, ln_base, opts) {
            err = Some(e);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let clamp = |v: f64| (1.0 - v).max(0.0);
    Ok(ExactProfile {
        n,
        map: clamp(acc.map),
        typical: clamp(acc.typical),
        smap: clamp(acc.smap),
        sc: clamp(acc.sc),
        sc_extended: clamp(acc.sc_extended),
        ssc_extended: clamp(acc.ssc_extended),
        ssc: opts.ssc_decision_trees.then(|| clamp(acc.ssc)),
        stage_error: (0..n)
            .map(|i| if sys.is_codeword_index(i) { 0.0 } else { clamp(acc.stage[i]) })
            .collect(),
        stage_error_stochastic: (0..n)
            .map(|i| if sys.is_codeword_index(i) { 0.0 } else { clamp(acc.stage_stochastic[i]) })
            .collect(),
        stage_entropy: acc.entropy.iter().map(|v| v.max(0.0)).collect(),
        conditional_entropy: h,
    })
}

/// Correct-decoding masses, accumulated over side-information vectors.
struct Accumulator {
    map: f64,
    typical: f64,
    smap: f64,
    sc: f64,
    sc_extended: f64,
    ssc_extended: f64,
    ssc: f64,
    stage: Vec<f64>,
    stage_stochastic: Vec<f64>,
    entropy: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            map: 0.0,
            typical: 0.0,
            smap: 0.0,
            sc: 0.0,
            sc_extended: 0.0,
            ssc_extended: 0.0,
            ssc: 0.0,
            stage: vec![0.0; n],
            stage_stochastic: vec![0.0; n],
            entropy: vec![0.0; n],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    acc: &mut Accumulator,
    sys: &ExtendedCodeSystem,
    index: &LeafIndex,
    tree: &PrefixTree,
    law: &JointSourceLaw,
    y: &[u8],
    py: f64,
    h: f64,
    ln_base: f64,
    opts: ProfileOptions,
) -> Result<()> {
    let p = sys.field().size();
    let n = sys.n();
    let leaves = tree.leaves();

    // per-stage genie statistics
    for i in 0..n {
        let parents = tree.level(i);
        let (mut best, mut second_moment, mut ent) = (0.0, 0.0, 0.0);
        for (q, &mq) in parents.iter().enumerate() {
            if mq <= 0.0 {
                continue;
            }
            let ch = tree.children(i, q);
            best += ch.iter().copied().fold(0.0, f64::max);
            second_moment += ch.iter().map(|m| m * m).sum::<f64>() / mq;
            ent += ch.iter().map(|&m| if m > 0.0 { -m * (m / mq).ln() } else { 0.0 }).sum::<f64>();
        }
        acc.stage[i] += py * best;
        acc.stage_stochastic[i] += py * second_moment;
        acc.entropy[i] += py * ent / ln_base;
    }

    // SSC path formula: product of the stage probabilities along each path
    let mut path = vec![1.0];
    for i in 0..n {
        let parents = tree.level(i);
        let free = !sys.is_codeword_index(i);
        let mut next = vec![0.0; parents.len() * p];
        for (q, &mq) in parents.iter().enumerate() {
            if mq <= 0.0 {
                continue;
            }
            for (s, &m) in tree.children(i, q).iter().enumerate() {
                next[q * p + s] = if free { path[q] * m / mq } else { path[q] };
            }
        }
        path = next;
    }
    acc.ssc_extended += py * leaves.iter().zip(&path).map(|(w, pr)| w * pr).sum::<f64>();

    let nf = n as f64;
    for (k1, coset) in index.cosets.iter().enumerate() {
        if coset.iter().all(|&r| leaves[r as usize] <= 0.0) {
            continue;
        }
        let mut c1 = vec![0u8; sys.l()];
        crate::enumerate::unrank(p, k1, &mut c1);

        // MAP: the largest coset weight is decoded correctly whatever the tie rule
        let top = coset.iter().map(|&r| leaves[r as usize]).fold(0.0, f64::max);
        acc.map += py * top;

        // typical set
        let mut typical = coset.iter().filter(|&&r| {
            let w = leaves[r as usize];
            w > 0.0 && ((w.ln() / ln_base) + nf * h).abs() <= nf * opts.typical_epsilon
        });
        if let (Some(&r), None) = (typical.next(), typical.next()) {
            acc.typical += py * leaves[r as usize];
        }

        // SMAP: coordinate-wise modes of the coset posterior
        let mut marg = vec![0.0; n * p];
        for &r in coset {
            let w = leaves[r as usize];
            for (k, &s) in index.x(r as usize).iter().enumerate() {
                marg[k * p + s as usize] += w;
            }
        }
        let x_smap: Vec<u8> = marg.chunks(p).map(|m| argmax_smallest(m).0 as u8).collect();
        let c_smap = sys.extend(&x_smap)?;
        if sys.split(&c_smap).0 == c1 {
            acc.smap += py * leaves[rank(p, &c_smap)];
        }

        // SC: one deterministic path per codeword
        let (c_hat, _) = super::successive_pass(sys, tree, &c1, |post| {
            if opts.corrupt_sc {
                argmin(&post.probs)
            } else {
                argmax_smallest(&post.probs).0
            }
        });
        acc.sc_extended += py * leaves[rank(p, &c_hat)];
        let x_hat = sys.source_from_extended(&c_hat)?;
        acc.sc += py * source_weight(law, &x_hat, y);

        if opts.ssc_decision_trees {
            acc.ssc += py * decision_tree_mass(sys, tree, law, y, &c1)?;
        }
    }
    Ok(())
}

/// `sum_c P(SSC path = c) * mu(Q(c) | y)` by expanding every branch of the
/// stochastic decision tree for codeword `c1`.
fn decision_tree_mass(
    sys: &ExtendedCodeSystem,
    tree: &PrefixTree,
    law: &JointSourceLaw,
    y: &[u8],
    c1: &[u8],
) -> Result<f64> {
    let p = sys.field().size();
    let n = sys.n();
    // stack of (stage, prefix rank, prefix, probability)
    let mut stack = vec![(0usize, 0usize, Vec::with_capacity(n), 1.0f64, 0usize)];
    let mut total = 0.0;
    while let Some((i, q, prefix, prob, k1)) = stack.pop() {
        if i == n {
            let x = sys.source_from_extended(&prefix)?;
            total += prob * source_weight(law, &x, y);
            continue;
        }
        if sys.is_codeword_index(i) {
            let s = c1[k1];
            let mut next = prefix;
            next.push(s);
            stack.push((i + 1, q * p + s as usize, next, prob, k1 + 1));
            continue;
        }
        let post = StagePosterior::from_masses(tree.children(i, q));
        for (s, &ps) in post.probs.iter().enumerate() {
            if ps > 0.0 {
                let mut next = prefix.clone();
                next.push(s as u8);
                stack.push((i + 1, q * p + s, next, prob * ps, k1));
            }
        }
    }
    Ok(total)
}

/// `sum_i H(C_i | C^{i-1}, Y)` must equal `n H(X|Y)`; returns the gap.
pub fn chain_rule_gap(profile: &ExactProfile) -> f64 {
    (profile.entropy_sum() - profile.n as f64 * profile.conditional_entropy).abs()
}
