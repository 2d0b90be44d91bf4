//! Bound checks, entropy profiles and Monte Carlo error estimates.
//!
//! Every entropy here is in base `|X|`. The entropy-to-error bounds are
//! applied in that unit: `P_SC <= log2(p)/2 * sum H` and `P_SSC <= log2(p) *
//! sum H`, which for `p = 2` are the familiar `H/2` and `H` in bits.

use std::fmt::Write as _;
use std::io;

use rand::Rng;
use serde::Serialize;

use crate::decoders::{exact_profile, ConditionalModel, ExactProfile, LinearCode, Method, ProfileOptions};
use crate::error::{Error, Result};
use crate::gf::FieldSpec;
use crate::linalg::{build_complement, permute_columns_full_rank_tail, sample_sparse_full_rank, ExtendedCodeSystem, IndexOrdering};
use crate::par;
use crate::polar::{polar_decode, polar_encode, PolarCode, PolarMode, StageStatistics};
use crate::source::{seeded_rng, JointSourceLaw};

pub const EXACT_TOLERANCE: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
const WILSON_Z: f64 = 1.959_963_984_540_054;
const TRIAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMethod {
    Exact,
    MonteCarlo,
}

/// One evaluated inequality or identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when the check was skipped.
    pub satisfied: Option<bool>,
    pub method: CheckMethod,
    pub trials: Option<usize>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl BoundReport {
    /// `lhs <= rhs + tolerance`.
    pub fn le(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::exact(id, lhs, rhs, lhs <= rhs + EXACT_TOLERANCE)
    }

    /// `|lhs - rhs| <= tolerance`.
    pub fn eq(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::exact(id, lhs, rhs, (lhs - rhs).abs() <= tolerance)
    }

    fn exact(id: impl Into<String>, lhs: f64, rhs: f64, ok: bool) -> Self {
        BoundReport {
            bound_id: id.into(),
            lhs,
            rhs,
            satisfied: Some(ok),
            method: CheckMethod::Exact,
            trials: None,
            ci_low: None,
            ci_high: None,
        }
    }

    /// Statistical check of `estimate <= rhs`: violated only when the whole
    /// confidence interval lies above `rhs`.
    pub fn statistical(id: impl Into<String>, est: &Estimate, rhs: f64) -> Self {
        BoundReport {
            bound_id: id.into(),
            lhs: est.p_hat,
            rhs,
            satisfied: Some(est.ci_low <= rhs),
            method: CheckMethod::MonteCarlo,
            trials: Some(est.trials),
            ci_low: Some(est.ci_low),
            ci_high: Some(est.ci_high),
        }
    }

    pub fn skipped(id: impl Into<String>, method: CheckMethod) -> Self {
        BoundReport {
            bound_id: id.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            satisfied: None,
            method,
            trials: None,
            ci_low: None,
            ci_high: None,
        }
    }

    pub fn is_violation(&self) -> bool {
        self.satisfied == Some(false)
    }

    /// Violations that must fail a run: exact ones only.
    pub fn is_hard_violation(&self) -> bool {
        self.is_violation() && self.method == CheckMethod::Exact
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        if !prefix.is_empty() {
            self.bound_id = format!("{prefix}/{}", self.bound_id);
        }
        self
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    bound_id: &'a str,
    lhs: String,
    rhs: String,
    satisfied: &'static str,
    method: CheckMethod,
    trials: Option<usize>,
    ci_low: Option<String>,
    ci_high: Option<String>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

/// Writes reports as CSV with the fixed column order
/// `bound_id,lhs,rhs,satisfied,method,trials,ci_low,ci_high`.
pub fn write_csv<W: io::Write>(reports: &[BoundReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            bound_id: &r.bound_id,
            lhs: num(r.lhs),
            rhs: num(r.rhs),
            satisfied: match r.satisfied {
                Some(true) => "true",
                Some(false) => "false",
                None => "skipped",
            },
            method: r.method,
            trials: r.trials,
            ci_low: r.ci_low.map(num),
            ci_high: r.ci_high.map(num),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text digest: totals first, then each violation.
pub fn summary(reports: &[BoundReport]) -> String {
    let count = |f: &dyn Fn(&BoundReport) -> bool| reports.iter().filter(|r| f(r)).count();
    let mut s = String::new();
    let _ = writeln!(s, "checked: {}", reports.len());
    let _ = writeln!(s, "satisfied: {}", count(&|r| r.satisfied == Some(true)));
    let _ = writeln!(s, "violated (exact): {}", count(&|r| r.is_hard_violation()));
    let _ = writeln!(
        s,
        "violated (statistical, warning only): {}",
        count(&|r| r.is_violation() && r.method == CheckMethod::MonteCarlo)
    );
    let _ = writeln!(s, "skipped: {}", count(&|r| r.satisfied.is_none()));
    for r in reports.iter().filter(|r| r.is_violation()) {
        let _ = writeln!(s, "VIOLATION {}: lhs {:?} > rhs {:?}", r.bound_id, r.lhs, r.rhs);
    }
    s
}

/// `h(theta)` in base `b`.
fn binary_entropy_base(theta: f64, ln_base: f64) -> f64 {
    let t = theta.clamp(0.0, 1.0);
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    (term(t) + term(1.0 - t)) / ln_base
}

/// Entropy bookkeeping for a partition `(I0, I1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationProfile {
    /// `H(C_i | C^{i-1}, Y)`, base `|X|`.
    pub h: Vec<f64>,
    pub in_i1: Vec<bool>,
    pub sum_i0: f64,
    pub sum_i1: f64,
    /// `n H(X|Y)`.
    pub reference: f64,
    /// `n H(X|Y) - sum_{I1} H`: the smallest `delta` for which the I1 side
    /// of the quasi-polarization condition holds.
    pub delta: f64,
    pub p: usize,
    pub ordered: bool,
}

impl PolarizationProfile {
    pub fn new(h: Vec<f64>, in_i1: Vec<bool>, conditional_entropy: f64, p: usize, ordered: bool) -> Self {
        let n = h.len();
        let sum_i0 = h.iter().zip(&in_i1).filter(|(_, &b)| !b).map(|(v, _)| v).sum();
        let sum_i1: f64 = h.iter().zip(&in_i1).filter(|(_, &b)| b).map(|(v, _)| v).sum();
        let reference = n as f64 * conditional_entropy;
        PolarizationProfile {
            h,
            in_i1,
            sum_i0,
            sum_i1,
            reference,
            delta: reference - sum_i1,
            p,
            ordered,
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// Chain rule and the quasi-polarization equivalence, as identities.
    pub fn identity_reports(&self, tolerance: f64) -> Vec<BoundReport> {
        vec![
            BoundReport::eq("chain-rule", self.sum_i0 + self.sum_i1, self.reference, tolerance),
            BoundReport::eq("polarization-delta", self.sum_i0, self.delta, tolerance),
        ]
    }

    /// Fano-side bounds for a decoder with block error `eps`:
    /// `sum_{I0} H <= n (eps + h(eps))`, and for ordered systems
    /// `sum_{i>l} H <= eps (n + log(1/eps) + log e)`.
    pub fn fano_reports(&self, label: &str, eps: f64) -> Vec<BoundReport> {
        let ln_base = (self.p as f64).ln();
        let n = self.n() as f64;
        let mut out = vec![BoundReport::le(
            format!("fano.{label}"),
            self.sum_i0,
            n * (eps + binary_entropy_base(eps, ln_base)),
        )];
        if self.ordered {
            let rhs = if eps > 0.0 {
                eps * (n + (1.0 / eps).ln() / ln_base + 1.0 / ln_base)
            } else {
                0.0
            };
            out.push(BoundReport::le(format!("fano-tail.{label}"), self.sum_i0, rhs));
        }
        out
    }
}

pub fn polarization_profile_linear(profile: &ExactProfile, sys: &ExtendedCodeSystem) -> PolarizationProfile {
    PolarizationProfile::new(
        profile.stage_entropy.clone(),
        (0..sys.n()).map(|i| sys.is_codeword_index(i)).collect(),
        profile.conditional_entropy,
        sys.field().size(),
        sys.ordering() == IndexOrdering::Ordered,
    )
}

pub fn polarization_profile_polar(code: &PolarCode, stats: &StageStatistics, law: &JointSourceLaw) -> PolarizationProfile {
    PolarizationProfile::new(
        stats.h.clone(),
        code.frozen().to_vec(),
        law.conditional_entropy(),
        code.field().size(),
        false,
    )
}

/// Which groups of bounds to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub decoder_ratios: bool,
    pub stage_bounds: bool,
    pub entropy: bool,
    pub optimality: bool,
    pub typical_epsilon: f64,
}

impl Default for BoundSet {
    fn default() -> Self {
        BoundSet {
            decoder_ratios: true,
            stage_bounds: true,
            entropy: true,
            optimality: true,
            typical_epsilon: 0.1,
        }
    }
}

/// Test hook: replaces the SC argmax by an argmin so that the harness has a
/// decoder it must reject.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Corruption {
    pub sc_argmin: bool,
}

/// Exact checks of every decoder comparison and stage bound on one model.
/// A budget overrun yields skipped entries instead of an error.
pub fn check_bounds(model: &ConditionalModel, set: BoundSet) -> Result<Vec<BoundReport>> {
    check_bounds_with(model, set, Corruption::default())
}

#[doc(hidden)]
pub fn check_bounds_with(model: &ConditionalModel, set: BoundSet, corruption: Corruption) -> Result<Vec<BoundReport>> {
    let opts = ProfileOptions {
        typical_epsilon: set.typical_epsilon,
        ssc_decision_trees: true,
        corrupt_sc: corruption.sc_argmin,
    };
    let prof = match exact_profile(model, opts) {
        Ok(p) => p,
        Err(Error::Budget { .. }) => return Ok(skipped_suite(model.system())),
        Err(e) => return Err(e),
    };
    Ok(reports_from_profile(&prof, model.system(), set))
}

fn skipped_suite(sys: &ExtendedCodeSystem) -> Vec<BoundReport> {
    let mut ids = vec!["smap-vs-map", "smap-vs-typical", "sc-domains", "ssc-domains", "sc-union", "ssc-union", "sc-entropy", "ssc-entropy"];
    if sys.ordering() == IndexOrdering::Ordered {
        ids.extend(["sc-vs-map", "ssc-vs-map"]);
    }
    ids.into_iter().map(|id| BoundReport::skipped(id, CheckMethod::Exact)).collect()
}

/// All bound reports derivable from an exact profile.
pub fn reports_from_profile(prof: &ExactProfile, sys: &ExtendedCodeSystem, set: BoundSet) -> Vec<BoundReport> {
    let n = prof.n as f64;
    let ordered = sys.ordering() == IndexOrdering::Ordered;
    let i0 = sys.i0();
    let log2p = (sys.field().size() as f64).log2();
    let ssc_tree = prof.ssc.unwrap_or(prof.ssc_extended);
    let mut out = Vec::new();
    if set.decoder_ratios {
        out.push(BoundReport::le("smap-vs-map", prof.smap, n * prof.map));
        out.push(BoundReport::le("smap-vs-typical", prof.smap, n * prof.typical));
        if ordered {
            out.push(BoundReport::le("sc-vs-map", prof.sc, n * prof.map));
            out.push(BoundReport::le("ssc-vs-map", ssc_tree, 2.0 * prof.map));
        }
    }
    if set.stage_bounds {
        out.push(BoundReport::eq("sc-domains", prof.sc, prof.sc_extended, IDENTITY_TOLERANCE));
        out.push(BoundReport::eq("ssc-domains", ssc_tree, prof.ssc_extended, IDENTITY_TOLERANCE));
        let sum_f: f64 = i0.iter().map(|&i| prof.stage_error[i]).sum();
        let sum_fs: f64 = i0.iter().map(|&i| prof.stage_error_stochastic[i]).sum();
        out.push(BoundReport::le("sc-union", prof.sc_extended, sum_f));
        out.push(BoundReport::le("ssc-union", prof.ssc_extended, sum_fs));
        for &i in i0 {
            if ordered {
                out.push(BoundReport::le(format!("stage-vs-map[{i}]"), prof.stage_error[i], prof.map));
            }
            out.push(BoundReport::le(
                format!("stage.ssc[{i}]"),
                prof.stage_error_stochastic[i],
                2.0 * prof.stage_error[i],
            ));
        }
    }
    if set.entropy {
        let pp = polarization_profile_linear(prof, sys);
        out.extend(pp.identity_reports(IDENTITY_TOLERANCE));
        out.push(BoundReport::le("sc-entropy", prof.sc, log2p / 2.0 * pp.sum_i0));
        out.push(BoundReport::le("ssc-entropy", prof.ssc_extended, log2p * pp.sum_i0));
        let fano = |label: &str, eps: f64| {
            let mut v = pp.fano_reports(label, eps);
            // the tail bound is stated for the reference decoder only
            v.retain(|r| !r.bound_id.starts_with("fano-tail.") || label == "map");
            v
        };
        out.extend(fano("sc", prof.sc));
        out.extend(fano("ssc", prof.ssc_extended));
        if ordered {
            out.extend(fano("map", prof.map).into_iter().filter(|r| r.bound_id.starts_with("fano-tail.")));
        }
    }
    if set.optimality {
        for (name, v) in [
            ("smap", prof.smap),
            ("typical", prof.typical),
            ("sc", prof.sc),
            ("ssc", prof.ssc_extended),
        ] {
            out.push(BoundReport::le(format!("map-opt.{name}"), prof.map, v));
        }
    }
    out
}

/// Exact entropy-side checks for a polar code: chain rule, quasi-
/// polarization identity and `H_i <= (p-1) Z_i` per index.
pub fn check_polar_bounds(code: &PolarCode, stats: &StageStatistics, law: &JointSourceLaw) -> Vec<BoundReport> {
    let p = code.field().size() as f64;
    let exact = stats.method == crate::polar::ZMethodTag::Exact;
    let mut out = Vec::new();
    if exact {
        let pp = polarization_profile_polar(code, stats, law);
        out.extend(pp.identity_reports(IDENTITY_TOLERANCE));
        for (i, (&h, &z)) in stats.h.iter().zip(&stats.z).enumerate() {
            out.push(BoundReport::le(format!("h-le-z[{i}]"), h, (p - 1.0) * z));
        }
        let log2p = p.log2();
        let bound_h = log2p / 2.0 * pp.sum_i0;
        out.push(BoundReport::le("polar.entropy-vs-z", bound_h, code.sc_error_bound()));
    } else {
        out.push(BoundReport::skipped("chain-rule", CheckMethod::Exact));
    }
    out
}

/// Block-error estimate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub errors: usize,
    pub trials: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn from_counts(errors: usize, trials: usize) -> Self {
        let (lo, hi) = wilson_interval(errors, trials);
        Estimate {
            errors,
            trials,
            p_hat: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci_low: lo,
            ci_high: hi,
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let ph = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let den = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / den;
    let half = WILSON_Z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / den;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// What to simulate in [`monte_carlo_error`].
#[derive(Debug, Clone, Copy)]
pub enum DecoderConfig<'a> {
    Linear { code: &'a LinearCode, method: Method },
    Polar { code: &'a PolarCode, stochastic: bool },
}

/// `trials` independent sample / encode / decode / compare rounds. Trials
/// are cut into fixed chunks, chunk `c` using RNG stream `c`, so the result
/// does not depend on the thread count. Stochastic decoders draw their seed
/// from the trial's stream.
pub fn monte_carlo_error(config: DecoderConfig<'_>, law: &JointSourceLaw, trials: usize, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::Usage("need at least one trial".into()));
    }
    let n = match config {
        DecoderConfig::Linear { code, .. } => code.encoder().cols(),
        DecoderConfig::Polar { code, .. } => code.n(),
    };
    let chunks = par::chunks(trials, TRIAL_CHUNK);
    let counts = par::map_indexed(chunks.len(), |c| -> Result<usize> {
        let (id, _, len) = chunks[c];
        let mut rng = seeded_rng(seed, id as u64);
        let mut errors = 0;
        for _ in 0..len {
            let s = law.sample_block_with(n, &mut rng);
            let dec_seed: u64 = rng.random();
            let x_hat = match config {
                DecoderConfig::Linear { code, method } => {
                    let method = match method {
                        Method::Ssc { .. } => Method::Ssc { seed: dec_seed },
                        m => m,
                    };
                    let c1 = code.encode(&s.x)?;
                    code.decode(method, &c1, &s.y)?.x_hat
                }
                DecoderConfig::Polar { code, stochastic } => {
                    let mode = if stochastic { PolarMode::Ssc { seed: dec_seed } } else { PolarMode::Sc };
                    let c1 = polar_encode(code, &s.x)?;
                    polar_decode(code, law, &c1, &s.y, mode)?.x_hat
                }
            };
            if x_hat.as_deref() != Some(&s.x[..]) {
                errors += 1;
            }
        }
        Ok(errors)
    });
    let mut errors = 0;
    for c in counts {
        errors += c?;
    }
    Ok(Estimate::from_counts(errors, trials))
}

/// Statistical end-to-end checks for a polar code: SC error against the
/// finite-n bound and SSC error against twice the SC interval.
pub fn polar_trial_reports(sc: &Estimate, ssc: &Estimate, code: &PolarCode) -> Vec<BoundReport> {
    vec![
        BoundReport::statistical("polar.sc-bound", sc, code.sc_error_bound()),
        BoundReport::statistical("polar.ssc-vs-sc", ssc, 2.0 * sc.ci_high),
    ]
}

/// A seeded random `(system, law)` pair.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: usize,
    pub description: String,
    pub model: ConditionalModel,
}

/// Draws instance `id` of the randomized suite: `n` in 3..=6, `p` in
/// {2, 3}, `l` in 1..n, sparse full-rank `A`, and either a Dirichlet law
/// (|Y| in {2, 3}) or a symmetric law with random crossover.
pub fn random_instance(seed: u64, id: usize) -> Result<Instance> {
    let mut rng = seeded_rng(seed, 1_000 + id as u64);
    let p: u32 = if rng.random_bool(0.5) { 2 } else { 3 };
    let field = FieldSpec::new(p)?;
    let n: usize = rng.random_range(3..=6);
    let l: usize = rng.random_range(1..n);
    let w: usize = rng.random_range(1..=3);
    let a = sample_sparse_full_rank(field, n, l, w, rng.random())?;
    let (a, _) = permute_columns_full_rank_tail(&a)?;
    let sys = build_complement(&a)?;
    let (law, kind) = if rng.random_bool(0.7) {
        let ys = rng.random_range(2..=3);
        let alpha = [0.3, 1.0, 3.0][rng.random_range(0..3)];
        (JointSourceLaw::random_dirichlet(field, ys, alpha, &mut rng)?, format!("dirichlet(|Y|={ys}, alpha={alpha})"))
    } else {
        let theta = rng.random_range(0.01..0.4);
        (JointSourceLaw::symmetric(field, theta)?, format!("symmetric({theta:.4})"))
    };
    Ok(Instance {
        id,
        description: format!("GF({p}) n={n} l={l} w={w} {kind}"),
        model: ConditionalModel::exact(sys, law)?,
    })
}

/// Runs [`check_bounds`] on `count` random instances in parallel; report ids
/// are prefixed with the instance number and merged in instance order.
pub fn default_suite(seed: u64, count: usize, set: BoundSet) -> Result<Vec<BoundReport>> {
    suite_with(seed, count, set, Corruption::default())
}

#[doc(hidden)]
pub fn suite_with(seed: u64, count: usize, set: BoundSet, corruption: Corruption) -> Result<Vec<BoundReport>> {
    let per = par::map_indexed(count, |id| -> Result<Vec<BoundReport>> {
        let inst = random_instance(seed, id)?;
        let reports = check_bounds_with(&inst.model, set, corruption)?;
        Ok(reports.into_iter().map(|r| r.prefixed(&format!("i{id}"))).collect())
    });
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

/// MAP refinement inequality on a joint `mu(u, v, w)` (flattened `u`-major):
/// returns `(P(argmax_u mu(u|V,W) != U), P(argmax_u mu(u|V) != U))`.
pub fn map_refinement_errors(mu: &[f64], nu: usize, nv: usize, nw: usize) -> Result<(f64, f64)> {
    if mu.len() != nu * nv * nw {
        return Err(Error::Usage("joint table has the wrong size".into()));
    }
    let at = |u: usize, v: usize, w: usize| mu[(u * nv + v) * nw + w];
    // Both sums run in the same order, so rounding is monotone and the
    // inequality survives floating point exactly.
    let mut correct_vw = 0.0;
    let mut correct_v = 0.0;
    for v in 0..nv {
        let mut fine = 0.0;
        let mut marg = vec![0.0; nu];
        for w in 0..nw {
            let col: Vec<f64> = (0..nu).map(|u| at(u, v, w)).collect();
            fine += col.iter().copied().fold(0.0, f64::max);
            for u in 0..nu {
                marg[u] += col[u];
            }
        }
        correct_vw += fine;
        correct_v += marg.iter().copied().fold(0.0, f64::max);
    }
    Ok((1.0 - correct_vw, 1.0 - correct_v))
}

/// Marginals `(mu_{UW}, mu_{VW})` of `mu_{UVW}(u, v, w) = mu_{UW}(u, w)
/// chi(v = u)` built from a joint `mu_{UW}` (flattened `u`-major).
pub fn copy_marginals(mu_uw: &[f64], nu: usize, nw: usize) -> (Vec<f64>, Vec<f64>) {
    let mut joint = vec![0.0; nu * nu * nw];
    for u in 0..nu {
        for w in 0..nw {
            joint[(u * nu + u) * nw + w] = mu_uw[u * nw + w];
        }
    }
    let mut uw = vec![0.0; nu * nw];
    let mut vw = vec![0.0; nu * nw];
    for u in 0..nu {
        for v in 0..nu {
            for w in 0..nw {
                let m = joint[(u * nu + v) * nw + w];
                uw[u * nw + w] += m;
                vw[v * nw + w] += m;
            }
        }
    }
    (uw, vw)
}

/// A random pmf with `size` cells from a flat Dirichlet.
pub fn random_pmf<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..size).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{block_error_probability, DecoderKind, Evaluation};
    use crate::polar::{construct, ZMethod};

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn csv_columns_are_fixed() {
        let reports = vec![
            BoundReport::le("sc-vs-map", 0.1, 0.4),
            BoundReport::statistical("polar.sc-bound", &Estimate::from_counts(3, 100), 0.5),
            BoundReport::skipped("sc-domains", CheckMethod::Exact),
        ];
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "bound_id,lhs,rhs,satisfied,method,trials,ci_low,ci_high");
        assert_eq!(lines.next().unwrap(), "sc-vs-map,0.1,0.4,true,exact,,,");
        assert!(lines.next().unwrap().starts_with("polar.sc-bound,0.03,0.5,true,monte-carlo,100,"));
        assert_eq!(lines.next().unwrap(), "sc-domains,,,skipped,exact,,,");
    }

    #[test]
    fn noiseless_law_gives_zero_lhs() {
        let f = FieldSpec::new(2).unwrap();
        let a = sample_sparse_full_rank(f, 4, 2, 2, 1).unwrap();
        let (a, _) = permute_columns_full_rank_tail(&a).unwrap();
        let model = ConditionalModel::exact(build_complement(&a).unwrap(), JointSourceLaw::noiseless(f).unwrap()).unwrap();
        let reports = check_bounds(&model, BoundSet::default()).unwrap();
        assert!(reports.iter().all(|r| r.satisfied == Some(true)));
        for r in reports.iter().filter(|r| r.bound_id.ends_with("vs-map")) {
            assert!(r.lhs.abs() < 1e-15);
        }
    }

    #[test]
    fn random_laws_satisfy_full_suite() {
        let reports = default_suite(42, 5, BoundSet::default()).unwrap();
        let bad: Vec<_> = reports.iter().filter(|r| r.satisfied != Some(true)).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn five_random_laws_on_n4() {
        let f = FieldSpec::new(2).unwrap();
        let a = sample_sparse_full_rank(f, 4, 2, 2, 17).unwrap();
        let (a, _) = permute_columns_full_rank_tail(&a).unwrap();
        let sys = build_complement(&a).unwrap();
        let mut rng = seeded_rng(3, 0);
        for _ in 0..5 {
            let law = JointSourceLaw::random_dirichlet(f, 3, 1.0, &mut rng).unwrap();
            let model = ConditionalModel::exact(sys.clone(), law).unwrap();
            let reports = check_bounds(&model, BoundSet::default()).unwrap();
            assert!(reports.iter().all(|r| r.satisfied == Some(true)), "{reports:?}");
            let delta = reports.iter().find(|r| r.bound_id == "polarization-delta").unwrap();
            assert!((delta.lhs - delta.rhs).abs() <= IDENTITY_TOLERANCE);
        }
    }

    #[test]
    fn polar_profile_n16_splits_the_entropy() {
        let law = JointSourceLaw::symmetric(FieldSpec::new(2).unwrap(), 0.11).unwrap();
        let (code, stats) = construct(&law, 4, 0.3, ZMethod::Exact).unwrap();
        let pp = polarization_profile_polar(&code, &stats, &law);
        assert!((pp.sum_i0 + pp.sum_i1 - pp.reference).abs() < 1e-12);
        let low = pp.h.iter().filter(|&&h| h < 0.1).count();
        let high = pp.h.iter().filter(|&&h| h > 0.5).count();
        assert!(low >= 2 && high >= 2, "{:?}", pp.h);
        assert!(pp.sum_i1 > pp.sum_i0);
    }

    #[test]
    fn noiseless_profile_is_zero() {
        let law = JointSourceLaw::noiseless(FieldSpec::new(3).unwrap()).unwrap();
        let (code, stats) = construct(&law, 2, 0.3, ZMethod::Exact).unwrap();
        let pp = polarization_profile_polar(&code, &stats, &law);
        assert!(pp.h.iter().all(|&h| h.abs() < 1e-15));
    }

    #[test]
    fn corrupted_sc_is_caught() {
        let reports = suite_with(42, 3, BoundSet::default(), Corruption { sc_argmin: true }).unwrap();
        assert!(reports.iter().any(|r| r.is_hard_violation()));
    }

    #[test]
    fn budget_overrun_is_reported_as_skipped() {
        let f = FieldSpec::new(3).unwrap();
        let a = sample_sparse_full_rank(f, 12, 6, 2, 1).unwrap();
        let (a, _) = permute_columns_full_rank_tail(&a).unwrap();
        let sys = build_complement(&a).unwrap();
        let law = JointSourceLaw::uniform_independent(f, 4).unwrap();
        let model = ConditionalModel::exact(sys, law).unwrap();
        let reports = check_bounds(&model, BoundSet::default()).unwrap();
        assert!(!reports.is_empty() && reports.iter().all(|r| r.satisfied.is_none()));
    }

    #[test]
    fn monte_carlo_tracks_exact_error() {
        let f = FieldSpec::new(2).unwrap();
        let a = sample_sparse_full_rank(f, 4, 2, 2, 3).unwrap();
        let law = JointSourceLaw::symmetric(f, 0.15).unwrap();
        let code = LinearCode::new(a, law.clone(), Evaluation::Exact).unwrap();
        let exact = block_error_probability(code.model(), DecoderKind::Sc).unwrap();
        let small = monte_carlo_error(DecoderConfig::Linear { code: &code, method: Method::Sc }, &law, 2_000, 9).unwrap();
        let large = monte_carlo_error(DecoderConfig::Linear { code: &code, method: Method::Sc }, &law, 20_000, 9).unwrap();
        assert!(large.ci_low <= exact && exact <= large.ci_high, "{large:?} vs {exact}");
        assert!(small.ci_low <= exact && exact <= small.ci_high, "{small:?} vs {exact}");
        assert!(large.ci_high - large.ci_low < small.ci_high - small.ci_low);
        let again = monte_carlo_error(DecoderConfig::Linear { code: &code, method: Method::Sc }, &law, 2_000, 9).unwrap();
        assert_eq!(small, again);
    }

    #[test]
    fn noiseless_monte_carlo_is_zero() {
        let f = FieldSpec::new(3).unwrap();
        let law = JointSourceLaw::noiseless(f).unwrap();
        let (code, _) = construct(&law, 3, 0.3, ZMethod::Exact).unwrap();
        let est = monte_carlo_error(DecoderConfig::Polar { code: &code, stochastic: true }, &law, 500, 1).unwrap();
        assert_eq!(est.errors, 0);
    }

    #[test]
    fn polar_entropy_reports_hold() {
        let law = JointSourceLaw::symmetric(FieldSpec::new(2).unwrap(), 0.11).unwrap();
        let (code, stats) = construct(&law, 4, 0.3, ZMethod::Exact).unwrap();
        let reports = check_polar_bounds(&code, &stats, &law);
        assert!(reports.iter().all(|r| r.satisfied == Some(true)), "{reports:?}");
    }

    #[test]
    fn refinement_and_copy_on_random_joints() {
        let mut rng = seeded_rng(8, 0);
        for _ in 0..100 {
            let (nu, nv, nw) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
            let mu = random_pmf(nu * nv * nw, &mut rng);
            let (fine, coarse) = map_refinement_errors(&mu, nu, nv, nw).unwrap();
            assert!(fine <= coarse + 1e-12);
            let uw = random_pmf(nu * nw, &mut rng);
            let (a, b) = copy_marginals(&uw, nu, nw);
            assert_eq!(a, b);
            assert_eq!(a, uw);
        }
    }
}
