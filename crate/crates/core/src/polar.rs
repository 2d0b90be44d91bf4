//! Polar source codes over `GF(p)`.
//!
//! The extended codeword is `c = S_BR^t G^t x` with
//! `G = [[1,0],[1,1]]^{(x)k} S_BR`. Splitting `x = (x_a, x_b)` into halves
//! gives `c = (T(x_a + x_b), T(x_b))` for the half-size transform `T`, which
//! is what both the butterfly and the successive-cancellation recursion use.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::decoders::{argmax_smallest, draw_symbol, Decision, DecodeResult, StagePosterior};
use crate::enumerate::{check_budget, for_each_vector, rank, space_size, ENUMERATION_BUDGET};
use crate::error::{Error, Result};
use crate::gf::FieldSpec;
use crate::linalg::{DenseMatrix, ExtendedCodeSystem};
use crate::par;
use crate::source::{seeded_rng, JointSourceLaw};

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_SAMPLES: usize = 100_000;
/// Largest block length for which exact Z values are attempted by default.
pub const EXACT_MAX_N: usize = 16;
const MC_CHUNK: usize = 1024;

fn stages_of(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Usage(format!("block length {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Bit-reversal permutation of `0..2^k`.
pub fn bit_reversal(k: usize) -> Vec<usize> {
    let n = 1usize << k;
    (0..n)
        .map(|i| if k == 0 { 0 } else { i.reverse_bits() >> (usize::BITS as usize - k) })
        .collect()
}

pub fn bit_reversal_matrix(field: FieldSpec, k: usize) -> DenseMatrix {
    let n = 1usize << k;
    let mut s = DenseMatrix::zeros(field, n, n);
    for (i, j) in bit_reversal(k).into_iter().enumerate() {
        s.set(i, j, 1);
    }
    s
}

/// `[[1,0],[1,1]]^{(x)k}`.
pub fn kernel_power(field: FieldSpec, k: usize) -> DenseMatrix {
    let n = 1usize << k;
    let mut m = DenseMatrix::zeros(field, n, n);
    for i in 0..n {
        for j in 0..n {
            // entry is 1 iff the bits of j are a subset of the bits of i
            if j & !i == 0 {
                m.set(i, j, 1);
            }
        }
    }
    m
}

/// `G = [[1,0],[1,1]]^{(x)k} S_BR`.
pub fn generator_matrix(field: FieldSpec, k: usize) -> DenseMatrix {
    kernel_power(field, k)
        .mul(&bit_reversal_matrix(field, k))
        .expect("square matrices of equal size")
}

/// Dense `S_BR^t G^t`, the reference for [`polar_transform`].
pub fn dense_transform(field: FieldSpec, k: usize) -> DenseMatrix {
    bit_reversal_matrix(field, k)
        .transpose()
        .mul(&generator_matrix(field, k).transpose())
        .expect("square matrices of equal size")
}

/// `c = S_BR^t G^t x` by butterflies, `O(n log n)`.
pub fn polar_transform(field: FieldSpec, x: &[u8]) -> Result<Vec<u8>> {
    let k = stages_of(x.len())?;
    field.check_symbols(x)?;
    let mut c = x.to_vec();
    for b in 0..k {
        let step = 1 << b;
        for i in 0..c.len() {
            if i & step == 0 {
                c[i] = field.add(c[i], c[i | step]);
            }
        }
    }
    Ok(c)
}

/// Inverse of [`polar_transform`].
pub fn polar_inverse(field: FieldSpec, c: &[u8]) -> Result<Vec<u8>> {
    let k = stages_of(c.len())?;
    field.check_symbols(c)?;
    let mut x = c.to_vec();
    for b in 0..k {
        let step = 1 << b;
        for i in 0..x.len() {
            if i & step == 0 {
                x[i] = field.sub(x[i], x[i | step]);
            }
        }
    }
    Ok(x)
}

/// Extended-code system whose transform is the polar matrix, with `I1`
/// given by `frozen`.
pub fn polar_system(field: FieldSpec, k: usize, frozen: &[bool]) -> Result<ExtendedCodeSystem> {
    ExtendedCodeSystem::from_transform(&dense_transform(field, k), frozen.to_vec())
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Successive cancellation over the polar recursion. `lik` holds `m` flat
/// likelihood vectors `mu_{X|Y}(. | y_j)`; `policy(i, posterior)` fixes
/// `c_i`. Writes the decisions into `c_out` and returns the matching `x`.
fn recurse<P>(f: FieldSpec, lik: &[f64], m: usize, offset: usize, policy: &mut P, c_out: &mut [u8]) -> Vec<u8>
where
    P: FnMut(usize, &StagePosterior) -> u8,
{
    let p = f.size();
    if m == 1 {
        let post = StagePosterior::from_masses(lik);
        let s = policy(offset, &post);
        c_out[offset] = s;
        return vec![s];
    }
    let h = m / 2;
    let (l0, l1) = lik.split_at(h * p);
    let mut la = vec![0.0; h * p];
    for j in 0..h {
        let (a0, a1) = (&l0[j * p..(j + 1) * p], &l1[j * p..(j + 1) * p]);
        let out = &mut la[j * p..(j + 1) * p];
        for (b, &pb) in a1.iter().enumerate() {
            if pb == 0.0 {
                continue;
            }
            for (xa, &pa) in a0.iter().enumerate() {
                out[f.add(xa as u8, b as u8) as usize] += pa * pb;
            }
        }
        normalise(out);
    }
    let u = recurse(f, &la, h, offset, policy, c_out);
    let mut lb = vec![0.0; h * p];
    for j in 0..h {
        for b in 0..p {
            lb[j * p + b] = l0[j * p + f.sub(u[j], b as u8) as usize] * l1[j * p + b];
        }
        normalise(&mut lb[j * p..(j + 1) * p]);
    }
    let v = recurse(f, &lb, h, offset + h, policy, c_out);
    u.iter()
        .zip(&v)
        .map(|(&a, &b)| f.sub(a, b))
        .chain(v.iter().copied())
        .collect()
}

fn likelihoods(law: &JointSourceLaw, y: &[u8]) -> Result<Vec<f64>> {
    if let Some(&bad) = y.iter().find(|&&v| v as usize >= law.y_size()) {
        return Err(Error::Usage(format!("side-information symbol {bad} out of range")));
    }
    Ok(y.iter().flat_map(|&v| law.conditional(v).iter().copied()).collect())
}

/// Runs the recursion with an arbitrary decision policy; returns `(c, x)`.
pub fn successive_cancellation<P>(law: &JointSourceLaw, y: &[u8], mut policy: P) -> Result<(Vec<u8>, Vec<u8>)>
where
    P: FnMut(usize, &StagePosterior) -> u8,
{
    stages_of(y.len())?;
    let lik = likelihoods(law, y)?;
    let mut c = vec![0u8; y.len()];
    let x = recurse(law.field(), &lik, y.len(), 0, &mut policy, &mut c);
    Ok((c, x))
}

/// `mu_{C_i | C^{i-1}, Y}` with the given prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPosterior {
    pub index: usize,
    pub prefix: Vec<u8>,
    pub probs: Vec<f64>,
    pub zero_support: bool,
}

/// Exact stage posterior for index `prefix.len()` by the polar recursion.
pub fn polar_conditionals(law: &JointSourceLaw, y: &[u8], prefix: &[u8]) -> Result<SymbolPosterior> {
    let i = prefix.len();
    if i >= y.len() {
        return Err(Error::Usage(format!("prefix of length {i} leaves no symbol in a block of {}", y.len())));
    }
    law.field().check_symbols(prefix)?;
    let mut found = None;
    successive_cancellation(law, y, |j, post| {
        if j == i {
            found = Some(post.clone());
        }
        prefix.get(j).copied().unwrap_or(0)
    })?;
    let post = found.expect("every index is visited");
    Ok(SymbolPosterior {
        index: i,
        prefix: prefix.to_vec(),
        probs: post.probs,
        zero_support: post.zero_support,
    })
}

/// All stage posteriors along the true extended codeword `c`.
pub fn genie_posteriors(law: &JointSourceLaw, c: &[u8], y: &[u8]) -> Result<Vec<StagePosterior>> {
    let mut out = vec![None; c.len()];
    successive_cancellation(law, y, |j, post| {
        out[j] = Some(post.clone());
        c[j]
    })?;
    Ok(out.into_iter().map(|p| p.expect("every index is visited")).collect())
}

/// `(1/(p-1)) sum_{u != u'} sqrt(q_u q_u')` for a normalised posterior.
pub fn bhattacharyya_of(probs: &[f64]) -> f64 {
    let p = probs.len();
    if p < 2 {
        return 0.0;
    }
    let s: f64 = probs.iter().map(|q| q.max(0.0).sqrt()).sum();
    let total: f64 = probs.iter().sum();
    ((s * s - total) / (p - 1) as f64).clamp(0.0, 1.0)
}

fn entropy_base(probs: &[f64], ln_base: f64) -> f64 {
    probs
        .iter()
        .map(|&q| if q > 0.0 { -q * q.ln() } else { 0.0 })
        .sum::<f64>()
        / ln_base
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMethodTag {
    Exact,
    MonteCarlo,
}

impl fmt::Display for ZMethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZMethodTag::Exact => "exact",
            ZMethodTag::MonteCarlo => "monte-carlo",
        })
    }
}

impl FromStr for ZMethodTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ZMethodTag::Exact),
            "monte-carlo" => Ok(ZMethodTag::MonteCarlo),
            other => Err(Error::Usage(format!("unknown Z method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMethod {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl ZMethod {
    pub fn tag(self) -> ZMethodTag {
        match self {
            ZMethod::Exact => ZMethodTag::Exact,
            ZMethod::MonteCarlo { .. } => ZMethodTag::MonteCarlo,
        }
    }
}

/// Per-index `Z(C_i | C^{i-1}, Y)` and `H(C_i | C^{i-1}, Y)` (base `|X|`).
#[derive(Debug, Clone, PartialEq)]
pub struct StageStatistics {
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    /// Standard errors; zero for exact values.
    pub z_se: Vec<f64>,
    pub h_se: Vec<f64>,
    pub method: ZMethodTag,
    pub samples: usize,
}

pub fn stage_statistics(law: &JointSourceLaw, k: usize, method: ZMethod) -> Result<StageStatistics> {
    match method {
        ZMethod::Exact => exact_stage_statistics(law, k),
        ZMethod::MonteCarlo { samples, seed } => monte_carlo_stage_statistics(law, k, samples, seed),
    }
}

/// Exact values by enumerating `x` for every `y`. Additive-symmetric laws
/// only need `y = 0`, since every other `y` translates the codeword tree.
pub fn exact_stage_statistics(law: &JointSourceLaw, k: usize) -> Result<StageStatistics> {
    let f = law.field();
    let p = f.size();
    let n = 1usize << k;
    let symmetric = law.is_additive_symmetric();
    let points = if symmetric {
        space_size(p, n)
    } else {
        space_size(p, n) * space_size(law.y_size(), n)
    };
    check_budget("exact polar statistics", points, ENUMERATION_BUDGET)?;
    let ln_base = law.ln_base();
    let mut z = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut leaves = vec![0.0; p.pow(n as u32)];
    let mut visit = |y: &[u8], weight: f64| {
        leaves.iter_mut().for_each(|v| *v = 0.0);
        for_each_vector(p as u8, n, |x| {
            let w: f64 = x.iter().zip(y).map(|(&a, &b)| law.conditional(b)[a as usize]).product();
            if w > 0.0 {
                let c = polar_transform(f, x).expect("power-of-two length");
                leaves[rank(p, &c)] = w;
            }
        });
        let tree = crate::decoders::PrefixTree::from_leaves(p, n, leaves.clone());
        for i in 0..n {
            for (q, &mq) in tree.level(i).iter().enumerate() {
                if mq <= 0.0 {
                    continue;
                }
                let ch = tree.children(i, q);
                let s: f64 = ch.iter().map(|m| m.sqrt()).sum();
                z[i] += weight * (s * s - mq) / (p - 1) as f64;
                h[i] += weight * ch.iter().map(|&m| if m > 0.0 { -m * (m / mq).ln() } else { 0.0 }).sum::<f64>()
                    / ln_base;
            }
        }
    };
    if symmetric {
        visit(&vec![0u8; n], 1.0);
    } else {
        for_each_vector(law.y_size() as u8, n, |y| {
            let py: f64 = y.iter().map(|&v| law.marginal_y(v)).product();
            if py > 0.0 {
                visit(y, py);
            }
        });
    }
    Ok(StageStatistics {
        z: z.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        h: h.into_iter().map(|v| v.max(0.0)).collect(),
        z_se: vec![0.0; n],
        h_se: vec![0.0; n],
        method: ZMethodTag::Exact,
        samples: 0,
    })
}

/// Monte Carlo estimates from `samples` genie passes over sampled blocks.
/// Chunk `c` of the sample budget draws from RNG stream `c`.
pub fn monte_carlo_stage_statistics(law: &JointSourceLaw, k: usize, samples: usize, seed: u64) -> Result<StageStatistics> {
    if samples < 2 {
        return Err(Error::Usage("Monte Carlo estimation needs at least two samples".into()));
    }
    let f = law.field();
    let n = 1usize << k;
    let ln_base = law.ln_base();
    let partial = par::map_indexed(par::chunks(samples, MC_CHUNK).len(), |c| -> Result<[Vec<f64>; 4]> {
        let (_, _, len) = par::chunks(samples, MC_CHUNK)[c];
        let mut rng = seeded_rng(seed, c as u64);
        let mut acc = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for _ in 0..len {
            let s = law.sample_block_with(n, &mut rng);
            let c = polar_transform(f, &s.x)?;
            for (i, post) in genie_posteriors(law, &c, &s.y)?.iter().enumerate() {
                let zi = bhattacharyya_of(&post.probs);
                let hi = entropy_base(&post.probs, ln_base);
                acc[0][i] += zi;
                acc[1][i] += zi * zi;
                acc[2][i] += hi;
                acc[3][i] += hi * hi;
            }
        }
        Ok(acc)
    });
    let mut tot = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for part in partial {
        let part = part?;
        for (t, v) in tot.iter_mut().zip(part.iter()) {
            t.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
    }
    let m = samples as f64;
    let mean_se = |s: &[f64], s2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        s.iter()
            .zip(s2)
            .map(|(&a, &b)| {
                let mean = a / m;
                let var = (b / m - mean * mean).max(0.0) * m / (m - 1.0);
                (mean, (var / m).sqrt())
            })
            .unzip()
    };
    let (mut z, z_se) = mean_se(&tot[0], &tot[1]);
    z.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let (h, h_se) = mean_se(&tot[2], &tot[3]);
    Ok(StageStatistics {
        z,
        h,
        z_se,
        h_se,
        method: ZMethodTag::MonteCarlo,
        samples,
    })
}

/// `Z(C_i | C^{i-1}, Y)` and its standard error.
pub fn bhattacharyya(law: &JointSourceLaw, k: usize, i: usize, method: ZMethod) -> Result<(f64, f64)> {
    let n = 1usize << k;
    if i >= n {
        return Err(Error::Usage(format!("index {i} out of range for n = {n}")));
    }
    let stats = stage_statistics(law, k, method)?;
    Ok((stats.z[i], stats.z_se[i]))
}

/// `2^(-n^beta)`.
pub fn threshold(n: usize, beta: f64) -> f64 {
    (-(n as f64).powf(beta)).exp2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    field: FieldSpec,
    k: usize,
    beta: f64,
    method: ZMethodTag,
    z: Vec<f64>,
    /// `I1` membership: these coordinates form the codeword.
    frozen: Vec<bool>,
}

impl PolarCode {
    /// Partitions indices by `Z_i <= 2^(-n^beta)` (complement set `I0`).
    pub fn from_z(field: FieldSpec, k: usize, beta: f64, method: ZMethodTag, z: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::Usage(format!("beta must lie in (0, 1/2), got {beta}")));
        }
        let n = 1usize << k;
        if z.len() != n {
            return Err(Error::Usage(format!("expected {n} Z values, got {}", z.len())));
        }
        let t = threshold(n, beta);
        let frozen = z.iter().map(|&v| v > t).collect();
        Ok(PolarCode {
            field,
            k,
            beta,
            method,
            z,
            frozen,
        })
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        1 << self.k
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn method(&self) -> ZMethodTag {
        self.method
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }
    pub fn threshold(&self) -> f64 {
        threshold(self.n(), self.beta)
    }
    pub fn i1(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.frozen[i]).collect()
    }
    pub fn i0(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.frozen[i]).collect()
    }
    pub fn rate(&self) -> f64 {
        self.frozen.iter().filter(|&&b| b).count() as f64 / self.n() as f64
    }

    /// `((p-1) / (2 log 2)) sum_{I0} Z_i` with `log` in base `|X|`; bounds
    /// the SC block error.
    pub fn sc_error_bound(&self) -> f64 {
        let p = self.field.size() as f64;
        let log_p_2 = 2f64.ln() / p.ln();
        let sum: f64 = self.i0().iter().map(|&i| self.z[i]).sum();
        (p - 1.0) / (2.0 * log_p_2) * sum
    }

    /// Twice [`Self::sc_error_bound`], the SSC counterpart.
    pub fn ssc_error_bound(&self) -> f64 {
        2.0 * self.sc_error_bound()
    }

    pub fn system(&self) -> Result<ExtendedCodeSystem> {
        polar_system(self.field, self.k, &self.frozen)
    }
}

impl fmt::Display for PolarCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {:?} {}", self.field.p(), self.k, self.beta, self.method)?;
        for (i, (z, fr)) in self.z.iter().zip(&self.frozen).enumerate() {
            writeln!(f, "{i} {z:?} {}", u8::from(*fr))?;
        }
        Ok(())
    }
}

impl FromStr for PolarCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty descriptor"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::parse(1, "header must be 'p k beta method'"));
        }
        let p: u32 = h[0].parse().map_err(|_| Error::parse(1, "bad p"))?;
        let field = FieldSpec::new(p)?;
        let k: usize = h[1].parse().map_err(|_| Error::parse(1, "bad k"))?;
        if k > 24 {
            return Err(Error::parse(1, "k too large"));
        }
        let beta: f64 = h[2].parse().map_err(|_| Error::parse(1, "bad beta"))?;
        let method: ZMethodTag = h[3].parse().map_err(|_| Error::parse(1, "bad method"))?;
        let n = 1usize << k;
        let mut z = Vec::with_capacity(n);
        let mut frozen = Vec::with_capacity(n);
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::parse(ln + 1, "expected 'i Z_i frozen_flag'"));
            }
            let i: usize = t[0].parse().map_err(|_| Error::parse(ln + 1, "bad index"))?;
            if i != z.len() {
                return Err(Error::parse(ln + 1, format!("expected index {}", z.len())));
            }
            let zi: f64 = t[1].parse().map_err(|_| Error::parse(ln + 1, "bad Z value"))?;
            if !(0.0..=1.0).contains(&zi) {
                return Err(Error::parse(ln + 1, "Z out of [0, 1]"));
            }
            let fr = match t[2] {
                "0" => false,
                "1" => true,
                _ => return Err(Error::parse(ln + 1, "frozen flag must be 0 or 1")),
            };
            z.push(zi);
            frozen.push(fr);
        }
        if z.len() != n {
            return Err(Error::parse(n + 1, format!("expected {n} index lines, got {}", z.len())));
        }
        let code = PolarCode::from_z(field, k, beta, method, z)?;
        if code.frozen != frozen {
            return Err(Error::parse(1, "frozen flags disagree with the threshold"));
        }
        Ok(code)
    }
}

/// Estimates every `Z_i` and partitions the indices.
pub fn construct(law: &JointSourceLaw, k: usize, beta: f64, method: ZMethod) -> Result<(PolarCode, StageStatistics)> {
    let stats = stage_statistics(law, k, method)?;
    let code = PolarCode::from_z(law.field(), k, beta, stats.method, stats.z.clone())?;
    Ok((code, stats))
}

/// Codeword: the transform symbols at `I1`, in increasing index order.
pub fn polar_encode(code: &PolarCode, x: &[u8]) -> Result<Vec<u8>> {
    if x.len() != code.n() {
        return Err(Error::Usage(format!("source block has length {}, expected {}", x.len(), code.n())));
    }
    let c = polar_transform(code.field, x)?;
    Ok(c.into_iter().zip(&code.frozen).filter(|(_, &f)| f).map(|(s, _)| s).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarMode {
    Sc,
    Ssc { seed: u64 },
}

/// SC / SSC decoding: copy `c1` at `I1`, decide at `I0`, then invert the
/// transform.
pub fn polar_decode(code: &PolarCode, law: &JointSourceLaw, c1: &[u8], y: &[u8], mode: PolarMode) -> Result<DecodeResult> {
    let n = code.n();
    if law.field() != code.field {
        return Err(Error::Usage("law and code use different fields".into()));
    }
    if y.len() != n {
        return Err(Error::Usage(format!("side information has length {}, expected {n}", y.len())));
    }
    let l = code.frozen.iter().filter(|&&b| b).count();
    if c1.len() != l {
        return Err(Error::Usage(format!("codeword has length {}, expected {l}", c1.len())));
    }
    code.field.check_symbols(c1)?;
    let mut rng = match mode {
        PolarMode::Ssc { seed } => Some(seeded_rng(seed, 0)),
        PolarMode::Sc => None,
    };
    let mut slots = Vec::with_capacity(n);
    let mut k1 = 0;
    for &fr in &code.frozen {
        slots.push(if fr { Some(k1) } else { None });
        k1 += usize::from(fr);
    }
    let mut trace = Vec::with_capacity(n - l);
    let (c_hat, x_rec) = successive_cancellation(law, y, |i, post| match slots[i] {
        Some(s) => c1[s],
        None => {
            let s = match rng.as_mut() {
                Some(r) => draw_symbol(&post.probs, r),
                None => argmax_smallest(&post.probs).0,
            };
            let slack = 1e-12 * post.probs[s];
            trace.push(Decision {
                index: i,
                symbol: s as u8,
                mass: post.probs[s],
                tie: post
                    .probs
                    .iter()
                    .enumerate()
                    .any(|(t, &v)| t != s && (v - post.probs[s]).abs() <= slack),
                zero_support: post.zero_support,
            });
            s as u8
        }
    })?;
    let x_hat = polar_inverse(code.field, &c_hat)?;
    debug_assert_eq!(x_hat, x_rec);
    Ok(DecodeResult::success(x_hat, trace))
}

/// Draws a source block and side information for a polar trial.
pub fn sample_trial<R: Rng + ?Sized>(law: &JointSourceLaw, n: usize, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
    let s = law.sample_block_with(n, rng);
    (s.x, s.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{decode_sc, ConditionalModel};
    use crate::enumerate::all_vectors;

    fn gf(p: u32) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    #[test]
    fn k1_transform() {
        let f = gf(2);
        for x in all_vectors(2, 2) {
            assert_eq!(polar_transform(f, &x).unwrap(), vec![f.add(x[0], x[1]), x[1]]);
        }
        assert_eq!(polar_transform(f, &[0; 8]).unwrap(), vec![0; 8]);
        assert!(matches!(polar_transform(f, &[0; 6]), Err(Error::Usage(_))));
    }

    #[test]
    fn butterfly_matches_dense_reference() {
        for (p, k) in [(2u32, 3usize), (2, 4), (3, 3), (5, 2)] {
            let f = gf(p);
            let t = dense_transform(f, k);
            let mut rng = seeded_rng(k as u64, p as u64);
            for _ in 0..50 {
                let x: Vec<u8> = (0..1 << k).map(|_| rng.random_range(0..f.p())).collect();
                assert_eq!(polar_transform(f, &x).unwrap(), t.apply(&x).unwrap());
            }
        }
    }

    #[test]
    fn bit_reversal_is_an_explicit_involution() {
        for k in 0..=4 {
            let br = bit_reversal(k);
            for (i, &j) in br.iter().enumerate() {
                assert_eq!(br[j], i);
            }
            let s = bit_reversal_matrix(gf(2), k);
            assert_eq!(s.mul(&s).unwrap(), DenseMatrix::identity(gf(2), 1 << k));
        }
        assert_eq!(bit_reversal(3), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn inverse_round_trips() {
        let f = gf(2);
        for x in all_vectors(2, 8) {
            let c = polar_transform(f, &x).unwrap();
            assert_eq!(polar_inverse(f, &c).unwrap(), x);
        }
        let f3 = gf(3);
        let mut rng = seeded_rng(3, 3);
        for _ in 0..100 {
            let x: Vec<u8> = (0..16).map(|_| rng.random_range(0..3)).collect();
            assert_eq!(polar_inverse(f3, &polar_transform(f3, &x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn n1_posterior_is_the_channel() {
        let law = JointSourceLaw::symmetric(gf(3), 0.3).unwrap();
        let post = polar_conditionals(&law, &[2], &[]).unwrap();
        for (a, b) in post.probs.iter().zip(law.conditional(2)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conditionals_match_enumeration_n4() {
        let f = gf(2);
        let law = JointSourceLaw::symmetric(f, 0.11).unwrap();
        let sys = polar_system(f, 2, &[false; 4]).unwrap();
        let model = ConditionalModel::exact(sys, law.clone()).unwrap();
        for y in all_vectors(2, 4) {
            for i in 0..4 {
                for prefix in all_vectors(2, i) {
                    let a = polar_conditionals(&law, &y, &prefix).unwrap();
                    let b = crate::decoders::sc_conditional(&model, &prefix, &y).unwrap();
                    assert_eq!(a.zero_support, b.zero_support);
                    for s in 0..2 {
                        assert!((a.probs[s] - b.probs[s]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn z_examples() {
        let f = gf(2);
        let det = JointSourceLaw::deterministic(f, 2).unwrap();
        assert!(exact_stage_statistics(&det, 3).unwrap().z.iter().all(|&z| z == 0.0));
        let uni = JointSourceLaw::uniform_independent(f, 2).unwrap();
        let s = exact_stage_statistics(&uni, 0).unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-15);
        let s = exact_stage_statistics(&uni, 3).unwrap();
        assert!(s.z.iter().all(|&z| (z - 1.0).abs() < 1e-12));
    }

    #[test]
    fn symmetric_shortcut_matches_full_enumeration() {
        let f = gf(3);
        let law = JointSourceLaw::symmetric(f, 0.25).unwrap();
        let fast = exact_stage_statistics(&law, 2).unwrap();
        // same law written out as a general table, so the shortcut is not taken
        let rows: Vec<Vec<f64>> = (0..3u8).map(|x| (0..4u8).map(|y| if y < 3 { law.prob(x, y) } else { 0.0 }).collect()).collect();
        let general = JointSourceLaw::new(f, &rows).unwrap();
        assert!(!general.is_additive_symmetric());
        let slow = exact_stage_statistics(&general, 2).unwrap();
        for i in 0..4 {
            assert!((fast.z[i] - slow.z[i]).abs() < 1e-12);
            assert!((fast.h[i] - slow.h[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let law = JointSourceLaw::symmetric(gf(2), 0.11).unwrap();
        let exact = exact_stage_statistics(&law, 2).unwrap();
        let mc = monte_carlo_stage_statistics(&law, 2, 20_000, 5).unwrap();
        for i in 0..4 {
            assert!((exact.z[i] - mc.z[i]).abs() <= 3.0 * mc.z_se[i] + 1e-12, "index {i}");
        }
        let again = monte_carlo_stage_statistics(&law, 2, 20_000, 5).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn construct_trivial_laws() {
        let f = gf(2);
        let (code, _) = construct(&JointSourceLaw::noiseless(f).unwrap(), 3, 0.3, ZMethod::Exact).unwrap();
        assert_eq!(code.rate(), 0.0);
        let (code, _) = construct(&JointSourceLaw::uniform_independent(f, 2).unwrap(), 3, 0.3, ZMethod::Exact).unwrap();
        assert_eq!(code.rate(), 1.0);
        assert!(matches!(PolarCode::from_z(f, 1, 0.5, ZMethodTag::Exact, vec![0.0, 1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn encode_extracts_i1() {
        let f = gf(2);
        let code = PolarCode::from_z(f, 2, 0.3, ZMethodTag::Exact, vec![0.9, 0.0, 0.8, 0.0]).unwrap();
        let x = [1, 0, 1, 1];
        let c = polar_transform(f, &x).unwrap();
        assert_eq!(polar_encode(&code, &x).unwrap(), vec![c[0], c[2]]);
        let none = PolarCode::from_z(f, 2, 0.3, ZMethodTag::Exact, vec![0.0; 4]).unwrap();
        assert!(polar_encode(&none, &x).unwrap().is_empty());
        let all = PolarCode::from_z(f, 2, 0.3, ZMethodTag::Exact, vec![1.0; 4]).unwrap();
        assert_eq!(polar_encode(&all, &x).unwrap(), c);
    }

    #[test]
    fn descriptor_round_trip() {
        let law = JointSourceLaw::symmetric(gf(2), 0.11).unwrap();
        let (code, _) = construct(&law, 3, 0.3, ZMethod::Exact).unwrap();
        let text = code.to_string();
        let back: PolarCode = text.parse().unwrap();
        assert_eq!(back, code);
        assert_eq!(back.to_string(), text);
        assert!("2 1 0.3 exact\n0 0.5 1\n".parse::<PolarCode>().is_err());
    }

    #[test]
    fn sc_matches_generic_decoder() {
        let f = gf(2);
        let law = JointSourceLaw::symmetric(f, 0.11).unwrap();
        let (code, _) = construct(&law, 3, 0.3, ZMethod::Exact).unwrap();
        let model = ConditionalModel::exact(code.system().unwrap(), law.clone()).unwrap();
        for x in all_vectors(2, 8).into_iter().step_by(5) {
            for y in all_vectors(2, 8).into_iter().step_by(17) {
                let c1 = polar_encode(&code, &x).unwrap();
                let a = polar_decode(&code, &law, &c1, &y, PolarMode::Sc).unwrap();
                let b = decode_sc(&model, &c1, &y).unwrap();
                assert_eq!(a.x_hat, b.x_hat);
                assert_eq!(a.trace.iter().map(|d| d.symbol).collect::<Vec<_>>(), b.trace.iter().map(|d| d.symbol).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn noiseless_recovery_and_ssc_equals_sc() {
        let f = gf(3);
        let law = JointSourceLaw::noiseless(f).unwrap();
        let code = PolarCode::from_z(f, 4, 0.3, ZMethodTag::Exact, vec![0.0; 16]).unwrap();
        for seed in 0..10 {
            let s = law.sample_block(16, seed);
            let c1 = polar_encode(&code, &s.x).unwrap();
            let sc = polar_decode(&code, &law, &c1, &s.y, PolarMode::Sc).unwrap();
            let ssc = polar_decode(&code, &law, &c1, &s.y, PolarMode::Ssc { seed }).unwrap();
            assert_eq!(sc.x_hat.as_deref(), Some(&s.x[..]));
            assert_eq!(ssc.x_hat, sc.x_hat);
        }
    }
}
