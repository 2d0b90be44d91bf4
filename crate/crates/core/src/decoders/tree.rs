use crate::enumerate::{for_each_vector, rank};
use crate::linalg::ExtendedCodeSystem;
use crate::source::JointSourceLaw;

/// Prefix masses of `mu_{C|Y}(. | y)` over extended codewords.
///
/// `level(i)[q]` is the probability that the first `i` extended coordinates
/// equal the prefix ranked `q`, given `y`; `level(n)` holds the full joint
/// `mu_{X|Y}(Q(c) | y)`.
pub(crate) struct PrefixTree {
    p: usize,
    levels: Vec<Vec<f64>>,
}

impl PrefixTree {
    pub fn build(sys: &ExtendedCodeSystem, law: &JointSourceLaw, y: &[u8]) -> Self {
        let p = sys.field().size();
        let n = sys.n();
        let mut leaves = vec![0.0; p.pow(n as u32)];
        for_each_vector(p as u8, n, |x| {
            let w = source_weight(law, x, y);
            if w > 0.0 {
                let c = sys.extend(x).expect("length checked");
                leaves[rank(p, &c)] = w;
            }
        });
        Self::from_leaves(p, n, leaves)
    }

    pub fn from_leaves(p: usize, n: usize, leaves: Vec<f64>) -> Self {
        let mut levels = vec![Vec::new(); n + 1];
        levels[n] = leaves;
        for i in (0..n).rev() {
            levels[i] = levels[i + 1].chunks(p).map(|c| c.iter().sum()).collect();
        }
        PrefixTree { p, levels }
    }

    #[inline]
    pub fn level(&self, i: usize) -> &[f64] {
        &self.levels[i]
    }

    pub fn leaves(&self) -> &[f64] {
        self.levels.last().expect("at least one level")
    }

    /// Masses of the `p` one-symbol extensions of prefix `q` (length `i`).
    #[inline]
    pub fn children(&self, i: usize, q: usize) -> &[f64] {
        &self.levels[i + 1][q * self.p..(q + 1) * self.p]
    }
}

/// `prod_k mu_{X|Y}(x_k | y_k)`.
#[inline]
pub(crate) fn source_weight(law: &JointSourceLaw, x: &[u8], y: &[u8]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| law.conditional(yi)[xi as usize])
        .product()
}

/// `prod_k mu_Y(y_k)`.
#[inline]
pub(crate) fn side_weight(law: &JointSourceLaw, y: &[u8]) -> f64 {
    y.iter().map(|&yi| law.marginal_y(yi)).product()
}
