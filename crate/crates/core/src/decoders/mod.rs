//! Decoders for a linear source code with decoder side information.
//!
//! Five decoders share one [`ConditionalModel`]: block MAP over the coset
//! `{x : Ax = c1}`, the conditional-typical-set decoder, symbol-wise MAP,
//! and deterministic / stochastic successive cancellation on the extended
//! codeword followed by the reconstruction `Q`. In exact mode every posterior
//! is obtained by enumeration; in sum-product mode SMAP, SC and SSC use the
//! message-passing approximations from [`crate::sumproduct`].

mod analysis;
mod tree;

pub use analysis::{block_error_probability, chain_rule_gap, exact_profile, DecoderKind, ExactProfile, ProfileOptions};
pub(crate) use tree::{source_weight, PrefixTree};

use rand::Rng;

use crate::enumerate::{advance, check_budget, space_size, ENUMERATION_BUDGET};
use crate::error::{Error, Result};
use crate::linalg::{build_complement, permute_columns_full_rank_tail, ExtendedCodeSystem, Permutation, SparseMatrix};
use crate::source::{seeded_rng, JointSourceLaw};
use crate::sumproduct;

/// Relative gap under which two posterior masses count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// How stage posteriors are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    Exact,
    SumProduct { iterations: usize },
}

/// An extended-code system paired with a source law.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    sys: ExtendedCodeSystem,
    law: JointSourceLaw,
    evaluation: Evaluation,
}

impl ConditionalModel {
    pub fn new(sys: ExtendedCodeSystem, law: JointSourceLaw, evaluation: Evaluation) -> Result<Self> {
        if sys.field() != law.field() {
            return Err(Error::Usage(format!(
                "system over {} but law over {}",
                sys.field(),
                law.field()
            )));
        }
        match evaluation {
            Evaluation::Exact => check_budget(
                "exact enumeration of GF(p)^n",
                space_size(sys.field().size(), sys.n()),
                ENUMERATION_BUDGET,
            )?,
            Evaluation::SumProduct { iterations } => {
                if iterations == 0 {
                    return Err(Error::Usage("sum-product needs at least one iteration".into()));
                }
                if !sys.has_identity_complement() {
                    return Err(Error::Usage(
                        "sum-product evaluation needs an ordered system with B = [I | 0]".into(),
                    ));
                }
            }
        }
        Ok(ConditionalModel { sys, law, evaluation })
    }

    pub fn exact(sys: ExtendedCodeSystem, law: JointSourceLaw) -> Result<Self> {
        Self::new(sys, law, Evaluation::Exact)
    }

    pub fn system(&self) -> &ExtendedCodeSystem {
        &self.sys
    }
    pub fn law(&self) -> &JointSourceLaw {
        &self.law
    }
    pub fn evaluation(&self) -> Evaluation {
        self.evaluation
    }

    fn check_inputs(&self, c1: &[u8], y: &[u8]) -> Result<()> {
        if c1.len() != self.sys.l() {
            return Err(Error::Usage(format!(
                "codeword has length {}, expected {}",
                c1.len(),
                self.sys.l()
            )));
        }
        if y.len() != self.sys.n() {
            return Err(Error::Usage(format!(
                "side information has length {}, expected {}",
                y.len(),
                self.sys.n()
            )));
        }
        self.sys.field().check_symbols(c1)?;
        if let Some(&bad) = y.iter().find(|&&v| v as usize >= self.law.y_size()) {
            return Err(Error::Usage(format!("side-information symbol {bad} out of range")));
        }
        Ok(())
    }

    fn require_exact(&self, what: &str) -> Result<()> {
        match self.evaluation {
            Evaluation::Exact => Ok(()),
            Evaluation::SumProduct { .. } => Err(Error::Usage(format!("{what} needs exact evaluation"))),
        }
    }

    /// Calls `f(x, weight)` for every coset member `x = Q(c1, c0)`, in
    /// increasing order of `c0`.
    fn for_each_coset_member(&self, c1: &[u8], y: &[u8], mut f: impl FnMut(&[u8], f64)) -> Result<()> {
        let p = self.sys.field().p();
        let mut c0 = vec![0u8; self.sys.n() - self.sys.l()];
        loop {
            let x = self.sys.q_map(c1, &c0)?;
            f(&x, source_weight(&self.law, &x, y));
            if !advance(p, &mut c0) {
                return Ok(());
            }
        }
    }
}

/// One free-coordinate decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// 0-based coordinate (extended-codeword index for SC/SSC, source index
    /// for SMAP).
    pub index: usize,
    pub symbol: u8,
    /// Normalised posterior mass of the chosen symbol.
    pub mass: f64,
    pub tie: bool,
    /// Conditioning event had no mass; a uniform vector was used instead.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Reconstruction, or `None` for a typical-set decoding failure.
    pub x_hat: Option<Vec<u8>>,
    pub trace: Vec<Decision>,
}

impl DecodeResult {
    pub fn success(x_hat: Vec<u8>, trace: Vec<Decision>) -> Self {
        DecodeResult {
            x_hat: Some(x_hat),
            trace,
        }
    }

    pub fn failure() -> Self {
        DecodeResult {
            x_hat: None,
            trace: Vec::new(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.x_hat.is_some()
    }
}

/// Normalised posterior over `GF(p)` for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePosterior {
    pub probs: Vec<f64>,
    pub zero_support: bool,
}

impl StagePosterior {
    /// Normalises `masses`; an all-zero vector becomes uniform and is flagged.
    pub fn from_masses(masses: &[f64]) -> Self {
        let total: f64 = masses.iter().sum();
        if total > 0.0 && total.is_finite() {
            StagePosterior {
                probs: masses.iter().map(|m| m / total).collect(),
                zero_support: false,
            }
        } else {
            StagePosterior {
                probs: vec![1.0 / masses.len() as f64; masses.len()],
                zero_support: true,
            }
        }
    }
}

/// Index of the largest entry (smallest index among near-equal maxima) and
/// whether another entry ties with it.
pub fn argmax_smallest(v: &[f64]) -> (usize, bool) {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * top.abs();
    let mut hits = v.iter().enumerate().filter(|(_, &x)| top - x <= slack).map(|(i, _)| i);
    let first = hits.next().unwrap_or(0);
    (first, hits.next().is_some())
}

fn is_tied(probs: &[f64], s: usize) -> bool {
    let slack = TIE_TOLERANCE * probs[s].abs();
    probs.iter().enumerate().any(|(t, &v)| t != s && (v - probs[s]).abs() <= slack)
}

/// Inverse-CDF draw from a normalised probability vector.
pub fn draw_symbol<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Block MAP: the most probable coset member, lexicographically smallest on
/// ties.
pub fn decode_map(model: &ConditionalModel, c1: &[u8], y: &[u8]) -> Result<DecodeResult> {
    model.require_exact("MAP decoding")?;
    model.check_inputs(c1, y)?;
    let mut best: Option<(Vec<u8>, f64)> = None;
    model.for_each_coset_member(c1, y, |x, w| {
        let better = match &best {
            None => true,
            Some((bx, bw)) => {
                let tied = (w - bw).abs() <= TIE_TOLERANCE * bw.abs().max(w.abs());
                (!tied && w > *bw) || (tied && x < bx.as_slice())
            }
        };
        if better {
            best = Some((x.to_vec(), w));
        }
    })?;
    let (x, _) = best.expect("coset is never empty");
    Ok(DecodeResult::success(x, Vec::new()))
}

/// Typical-set decoder: the unique typical coset member, else failure.
pub fn decode_typical(model: &ConditionalModel, c1: &[u8], y: &[u8], epsilon: f64) -> Result<DecodeResult> {
    model.require_exact("typical-set decoding")?;
    model.check_inputs(c1, y)?;
    let law = model.law();
    let n = y.len() as f64;
    let h = law.conditional_entropy();
    let ln_base = law.ln_base();
    let mut found: Option<Vec<u8>> = None;
    let mut count = 0usize;
    model.for_each_coset_member(c1, y, |x, w| {
        let lp = w.ln() / ln_base;
        if lp.is_finite() && (lp + n * h).abs() <= n * epsilon {
            count += 1;
            found = Some(x.to_vec());
        }
    })?;
    Ok(match (count, found) {
        (1, Some(x)) => DecodeResult::success(x, Vec::new()),
        _ => DecodeResult::failure(),
    })
}

/// Symbol-wise MAP: coordinate-wise posterior modes given `(c1, y)`. The
/// result need not satisfy `A x = c1`.
pub fn decode_smap(model: &ConditionalModel, c1: &[u8], y: &[u8]) -> Result<DecodeResult> {
    model.check_inputs(c1, y)?;
    let p = model.sys.field().size();
    let n = model.sys.n();
    let marginals: Vec<Vec<f64>> = match model.evaluation {
        Evaluation::Exact => {
            let mut m = vec![vec![0.0; p]; n];
            model.for_each_coset_member(c1, y, |x, w| {
                for (k, &s) in x.iter().enumerate() {
                    m[k][s as usize] += w;
                }
            })?;
            m
        }
        Evaluation::SumProduct { iterations } => {
            let priors: Vec<Vec<f64>> = y.iter().map(|&yi| model.law.conditional(yi).to_vec()).collect();
            sumproduct::marginal_beliefs(model.sys.a(), c1, &priors, iterations)?
                .into_iter()
                .map(|b| b.probs)
                .collect()
        }
    };
    let mut x = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    for (k, masses) in marginals.iter().enumerate() {
        let post = StagePosterior::from_masses(masses);
        let (s, tie) = argmax_smallest(&post.probs);
        x.push(s as u8);
        trace.push(Decision {
            index: k,
            symbol: s as u8,
            mass: post.probs[s],
            tie,
            zero_support: post.zero_support,
        });
    }
    Ok(DecodeResult::success(x, trace))
}

/// Exact `mu_{C_i | C_1^{i-1} Y}(. | c_prefix, y)` for the 0-based extended
/// coordinate `i = c_prefix.len()`, summing the joint over all suffixes.
pub fn sc_conditional(model: &ConditionalModel, c_prefix: &[u8], y: &[u8]) -> Result<StagePosterior> {
    let sys = &model.sys;
    let i = c_prefix.len();
    if i >= sys.n() {
        return Err(Error::Usage(format!("stage {i} out of range for n = {}", sys.n())));
    }
    check_budget(
        "exact enumeration of GF(p)^n",
        space_size(sys.field().size(), sys.n()),
        ENUMERATION_BUDGET,
    )?;
    if y.len() != sys.n() {
        return Err(Error::Usage("side information length mismatch".into()));
    }
    sys.field().check_symbols(c_prefix)?;
    let tree = PrefixTree::build(sys, &model.law, y);
    let q = crate::enumerate::rank(sys.field().size(), c_prefix);
    Ok(StagePosterior::from_masses(tree.children(i, q)))
}

/// Sequential pass over the extended codeword: copy `c1` at `I1`, let
/// `choose` pick the symbol at `I0` from the stage posterior.
pub(crate) fn successive_pass(
    sys: &ExtendedCodeSystem,
    tree: &PrefixTree,
    c1: &[u8],
    mut choose: impl FnMut(&StagePosterior) -> usize,
) -> (Vec<u8>, Vec<Decision>) {
    let p = sys.field().size();
    let n = sys.n();
    let mut c = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n - sys.l());
    let mut q = 0usize;
    let mut k1 = 0usize;
    for i in 0..n {
        let s = if sys.is_codeword_index(i) {
            k1 += 1;
            c1[k1 - 1] as usize
        } else {
            let post = StagePosterior::from_masses(tree.children(i, q));
            let s = choose(&post);
            let tie = is_tied(&post.probs, s);
            trace.push(Decision {
                index: i,
                symbol: s as u8,
                mass: post.probs[s],
                tie,
                zero_support: post.zero_support,
            });
            s
        };
        c.push(s as u8);
        q = q * p + s;
    }
    (c, trace)
}

fn finish_extended(sys: &ExtendedCodeSystem, c: &[u8], trace: Vec<Decision>) -> Result<DecodeResult> {
    Ok(DecodeResult::success(sys.source_from_extended(c)?, trace))
}

/// Deterministic successive-cancellation decoding followed by `Q`.
pub fn decode_sc(model: &ConditionalModel, c1: &[u8], y: &[u8]) -> Result<DecodeResult> {
    model.check_inputs(c1, y)?;
    match model.evaluation {
        Evaluation::Exact => {
            let tree = PrefixTree::build(&model.sys, &model.law, y);
            let (c, trace) = successive_pass(&model.sys, &tree, c1, |post| argmax_smallest(&post.probs).0);
            finish_extended(&model.sys, &c, trace)
        }
        Evaluation::SumProduct { .. } => {
            sumproduct::run_sc_ssc_algorithm(model, c1, y, sumproduct::DecisionMode::Deterministic, 0)
        }
    }
}

/// Stochastic successive cancellation: each free coordinate is drawn from its
/// stage posterior with a `seed`-driven RNG (one draw per free coordinate,
/// in index order).
pub fn decode_ssc(model: &ConditionalModel, c1: &[u8], y: &[u8], seed: u64) -> Result<DecodeResult> {
    model.check_inputs(c1, y)?;
    match model.evaluation {
        Evaluation::Exact => {
            let tree = PrefixTree::build(&model.sys, &model.law, y);
            let mut rng = seeded_rng(seed, 0);
            let (c, trace) = successive_pass(&model.sys, &tree, c1, |post| draw_symbol(&post.probs, &mut rng));
            finish_extended(&model.sys, &c, trace)
        }
        Evaluation::SumProduct { .. } => {
            sumproduct::run_sc_ssc_algorithm(model, c1, y, sumproduct::DecisionMode::Stochastic, seed)
        }
    }
}

/// Decoder selector for [`LinearCode::decode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Map,
    Typical { epsilon: f64 },
    Smap,
    Sc,
    Ssc { seed: u64 },
}

/// An arbitrary full-rank encoder `A` together with the column permutation
/// `S` and the ordered system built on `A S`. Encoding uses `A` itself;
/// decoding runs in permuted coordinates and maps the result back.
#[derive(Debug, Clone)]
pub struct LinearCode {
    encoder: SparseMatrix,
    perm: Permutation,
    model: ConditionalModel,
}

impl LinearCode {
    pub fn new(encoder: SparseMatrix, law: JointSourceLaw, evaluation: Evaluation) -> Result<Self> {
        let (permuted, perm) = permute_columns_full_rank_tail(&encoder)?;
        let sys = build_complement(&permuted)?;
        Ok(LinearCode {
            encoder,
            perm,
            model: ConditionalModel::new(sys, law, evaluation)?,
        })
    }

    pub fn encoder(&self) -> &SparseMatrix {
        &self.encoder
    }
    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }
    pub fn model(&self) -> &ConditionalModel {
        &self.model
    }

    pub fn encode(&self, x: &[u8]) -> Result<Vec<u8>> {
        self.encoder.field().check_symbols(x)?;
        self.encoder.apply(x)
    }

    pub fn decode(&self, method: Method, c1: &[u8], y: &[u8]) -> Result<DecodeResult> {
        if y.len() != self.encoder.cols() {
            return Err(Error::Usage("side information length mismatch".into()));
        }
        let yw = self.perm.to_working(y);
        let m = &self.model;
        let mut res = match method {
            Method::Map => decode_map(m, c1, &yw)?,
            Method::Typical { epsilon } => decode_typical(m, c1, &yw, epsilon)?,
            Method::Smap => decode_smap(m, c1, &yw)?,
            Method::Sc => decode_sc(m, c1, &yw)?,
            Method::Ssc { seed } => decode_ssc(m, c1, &yw, seed)?,
        };
        if let Some(x) = res.x_hat.take() {
            res.x_hat = Some(self.perm.from_working(&x));
        }
        if matches!(method, Method::Smap) {
            for d in &mut res.trace {
                d.index = self.perm.source(d.index);
            }
        }
        Ok(res)
    }
}
