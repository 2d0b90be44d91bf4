//! Memoryless joint source / side-information models.
//!
//! A [`JointSourceLaw`] is a single-letter pmf `mu(x, y)` on `GF(p) x Y`,
//! extended to blocks as a product. Entropies and block log-probabilities are
//! reported in base `|X|` units, so `H(X|Y) <= 1` always.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::error::{Error, Result};
use crate::gf::FieldSpec;

pub const MAX_Y_SIZE: usize = 64;
const SUM_TOLERANCE: f64 = 1e-12;

/// RNG for `(seed, stream)`; independent streams share a seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `p log_b(1/p)` with the `0 log 0 = 0` convention, natural log.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Entropy of a probability vector in the given log base.
pub fn entropy(probs: &[f64], base: f64) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum::<f64>() / base.ln()
}

/// Binary entropy `h(theta)` in the given log base.
pub fn binary_entropy(theta: f64, base: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("binary entropy argument {theta} outside [0, 1]")));
    }
    Ok((plogp(theta) + plogp(1.0 - theta)) / base.ln())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSample {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSourceLaw {
    field: FieldSpec,
    y_size: usize,
    /// `mu(x, y)` at `x * y_size + y`.
    pmf: Vec<f64>,
    marginal_y: Vec<f64>,
    /// `mu(x | y)` at `y * p + x`; zero rows for `mu_Y(y) = 0`.
    cond: Vec<f64>,
}

impl JointSourceLaw {
    /// Builds a law from `|X|` rows of `|Y|` probabilities.
    pub fn new(field: FieldSpec, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != field.size() {
            return Err(Error::Usage(format!(
                "law needs {} rows for {field}, got {}",
                field.size(),
                rows.len()
            )));
        }
        let y_size = rows[0].len();
        if y_size == 0 || y_size > MAX_Y_SIZE {
            return Err(Error::Usage(format!("side-information alphabet size must be 1..={MAX_Y_SIZE}")));
        }
        if rows.iter().any(|r| r.len() != y_size) {
            return Err(Error::Usage("law rows have different lengths".into()));
        }
        let pmf: Vec<f64> = rows.iter().flatten().copied().collect();
        if pmf.iter().any(|&v| v.is_nan() || v < 0.0 || !v.is_finite()) {
            return Err(Error::Usage("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Usage(format!("probabilities sum to {total}, not 1")));
        }
        let p = field.size();
        let marginal_y: Vec<f64> = (0..y_size)
            .map(|y| (0..p).map(|x| pmf[x * y_size + y]).sum())
            .collect();
        let mut cond = vec![0.0; y_size * p];
        for y in 0..y_size {
            if marginal_y[y] > 0.0 {
                for x in 0..p {
                    cond[y * p + x] = pmf[x * y_size + y] / marginal_y[y];
                }
            }
        }
        Ok(JointSourceLaw {
            field,
            y_size,
            pmf,
            marginal_y,
            cond,
        })
    }

    /// `X` uniform, `Y = X + Z` with `Z = 0` w.p. `1 - theta` and uniform on
    /// the nonzero symbols otherwise. For `p = 2` this is the binary symmetric
    /// pair with crossover `theta`.
    pub fn symmetric(field: FieldSpec, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Usage(format!("crossover {theta} outside [0, 1]")));
        }
        let p = field.size();
        let off = if p > 1 { theta / (p - 1) as f64 } else { 0.0 };
        let rows = (0..p)
            .map(|x| {
                (0..p)
                    .map(|y| if x == y { (1.0 - theta) / p as f64 } else { off / p as f64 })
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        Self::new(field, &rows)
    }

    /// `Y = X` with `X` uniform.
    pub fn noiseless(field: FieldSpec) -> Result<Self> {
        Self::symmetric(field, 0.0)
    }

    /// `X` uniform and independent of a uniform `Y` on `y_size` symbols.
    pub fn uniform_independent(field: FieldSpec, y_size: usize) -> Result<Self> {
        let v = 1.0 / (field.size() * y_size) as f64;
        Self::new(field, &vec![vec![v; y_size]; field.size()])
    }

    /// Point mass on `(x, y) = (0, 0)`.
    pub fn deterministic(field: FieldSpec, y_size: usize) -> Result<Self> {
        let mut rows = vec![vec![0.0; y_size]; field.size()];
        rows[0][0] = 1.0;
        Self::new(field, &rows)
    }

    /// Product law `mu_X(x) mu_Y(y)`.
    pub fn independent(field: FieldSpec, px: &[f64], py: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = px.iter().map(|&a| py.iter().map(|&b| a * b).collect()).collect();
        Self::new(field, &rows)
    }

    /// Symmetric-Dirichlet draw over all `|X| |Y|` cells, redrawn until every
    /// `x` row has positive mass.
    pub fn random_dirichlet<R: Rng + ?Sized>(
        field: FieldSpec,
        y_size: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Usage(format!("bad concentration: {e}")))?;
        let p = field.size();
        for _ in 0..1000 {
            let draws: Vec<f64> = (0..p * y_size).map(|_| gamma.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            if total.is_nan() || total <= 0.0 {
                continue;
            }
            let rows: Vec<Vec<f64>> = draws
                .chunks(y_size)
                .map(|r| r.iter().map(|v| v / total).collect())
                .collect();
            if rows.iter().all(|r| r.iter().sum::<f64>() > 0.0) {
                return Self::new(field, &rows);
            }
        }
        Err(Error::Budget {
            what: "non-degenerate Dirichlet law draws",
            needed: f64::INFINITY,
            limit: 1000.0,
        })
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.field
    }
    #[inline]
    pub fn y_size(&self) -> usize {
        self.y_size
    }
    #[inline]
    pub fn prob(&self, x: u8, y: u8) -> f64 {
        self.pmf[x as usize * self.y_size + y as usize]
    }
    #[inline]
    pub fn marginal_y(&self, y: u8) -> f64 {
        self.marginal_y[y as usize]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.pmf.chunks(self.y_size).map(|r| r.iter().sum()).collect()
    }

    /// `mu_{X|Y}(. | y)`, all zeros when `mu_Y(y) = 0`.
    #[inline]
    pub fn conditional(&self, y: u8) -> &[f64] {
        let p = self.field.size();
        &self.cond[y as usize * p..(y as usize + 1) * p]
    }

    /// Natural log of `|X|`, the unit of every entropy reported here.
    #[inline]
    pub fn ln_base(&self) -> f64 {
        (self.field.size() as f64).ln()
    }

    fn check_block(&self, x: &[u8], y: &[u8]) -> Result<()> {
        if x.len() != y.len() {
            return Err(Error::Usage(format!(
                "source length {} differs from side-information length {}",
                x.len(),
                y.len()
            )));
        }
        self.field.check_symbols(x)?;
        if let Some(&bad) = y.iter().find(|&&v| v as usize >= self.y_size) {
            return Err(Error::Usage(format!("side-information symbol {bad} out of range")));
        }
        Ok(())
    }

    /// `log mu_{X|Y}(x | y)` for a block, base `|X|`; `-inf` if impossible.
    pub fn block_log_prob(&self, x: &[u8], y: &[u8]) -> Result<f64> {
        self.check_block(x, y)?;
        let mut acc = 0.0;
        for (&xi, &yi) in x.iter().zip(y) {
            if self.marginal_y(yi) == 0.0 {
                return Err(Error::Domain(format!("side-information symbol {yi} has zero probability")));
            }
            acc += self.conditional(yi)[xi as usize].ln();
        }
        Ok(acc / self.ln_base())
    }

    /// `H(X|Y)` in base `|X|`.
    pub fn conditional_entropy(&self) -> f64 {
        (0..self.y_size)
            .map(|y| self.marginal_y[y] * entropy(self.conditional(y as u8), self.field.size() as f64))
            .sum()
    }

    /// `H(X)` in base `|X|`.
    pub fn entropy_x(&self) -> f64 {
        entropy(&self.marginal_x(), self.field.size() as f64)
    }

    pub fn binary_entropy(&self, theta: f64) -> Result<f64> {
        binary_entropy(theta, self.field.size() as f64)
    }

    /// Conditional typicality: `|log mu(x|y) + n H(X|Y)| <= n eps`.
    pub fn typical_set_membership(&self, x: &[u8], y: &[u8], epsilon: f64) -> Result<bool> {
        let lp = self.block_log_prob(x, y)?;
        let n = x.len() as f64;
        Ok(lp.is_finite() && (lp + n * self.conditional_entropy()).abs() <= n * epsilon)
    }

    /// True when `mu(x, y) = mu(0, y - x)` over `Y = GF(p)`, i.e. the pair is
    /// an additive-noise model invariant under joint translation.
    pub fn is_additive_symmetric(&self) -> bool {
        let p = self.field.size();
        if self.y_size != p {
            return false;
        }
        let f = self.field;
        (0..p as u8).all(|x| {
            (0..p as u8).all(|y| (self.prob(x, y) - self.prob(0, f.sub(y, x))).abs() <= 1e-15)
        })
    }

    fn cell_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.pmf).expect("validated law has positive mass")
    }

    pub fn sample_block_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> BlockSample {
        let dist = self.cell_sampler();
        let (x, y) = (0..n)
            .map(|_| {
                let k = dist.sample(rng);
                ((k / self.y_size) as u8, (k % self.y_size) as u8)
            })
            .unzip();
        BlockSample { x, y }
    }

    /// i.i.d. block of length `n` from stream `stream` of `seed`.
    pub fn sample_block_stream(&self, n: usize, seed: u64, stream: u64) -> BlockSample {
        self.sample_block_with(n, &mut seeded_rng(seed, stream))
    }

    pub fn sample_block(&self, n: usize, seed: u64) -> BlockSample {
        self.sample_block_stream(n, seed, 0)
    }
}

impl fmt::Display for JointSourceLaw {
    /// Text format: header `p |Y|`, then `|X|` lines of `|Y|` probabilities.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.field.p(), self.y_size)?;
        for row in self.pmf.chunks(self.y_size) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for JointSourceLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty law file"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, format!("bad header token `{t}`"))))
            .collect::<Result<_>>()?;
        let [p, y_size] = nums[..] else {
            return Err(Error::parse(1, "header must be `p |Y|`"));
        };
        let field = FieldSpec::new(p as u32)?;
        let mut rows = Vec::with_capacity(p);
        for (ln, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(ln + 1, format!("bad probability `{t}`"))))
                .collect::<Result<_>>()?;
            if row.len() != y_size {
                return Err(Error::parse(ln + 1, format!("expected {y_size} probabilities")));
            }
            rows.push(row);
        }
        if rows.len() != p {
            return Err(Error::parse(0, format!("expected {p} rows, found {}", rows.len())));
        }
        JointSourceLaw::new(field, &rows)
    }
}
