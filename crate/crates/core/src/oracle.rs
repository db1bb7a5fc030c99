//! Brute-force references used to check the dynamic machinery.
//!
//! Everything here is deliberately naive and shares as little code as
//! possible with the fast paths it checks.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{contract, Error, Result};
use crate::graph::DynGraph;
use crate::linalg::{charpoly, PolyMatrix, RatMatrix};
use crate::numerics::{qi, Q};
use crate::poly::{divide_monic, UniPoly};

/// `sum_{i=0}^{K} (xA)^i mod x^{K+1}` by Horner: `S <- I + xA S`.
pub fn exact_power_sum(a: &PolyMatrix, max_degree: usize) -> PolyMatrix {
    let id = PolyMatrix::identity(a.dim());
    let xa = a.shift().truncated(max_degree);
    let mut acc = id.clone();
    for _ in 0..max_degree {
        acc = id.add(&xa.mul_mod_deg(&acc, max_degree));
    }
    acc
}

/// Total weight of `s -> t` walks by length, for lengths `0..=max_len`.
/// `weights[u][v]` is the weight of arc `u -> v`.
pub fn walk_count_dp(weights: &RatMatrix, s: usize, t: usize, max_len: usize) -> UniPoly {
    let n = weights.dim();
    let mut dist = vec![Q::zero(); n];
    dist[s] = Q::one();
    let mut coeffs = Vec::with_capacity(max_len + 1);
    for len in 0..=max_len {
        coeffs.push(dist[t].clone());
        if len == max_len {
            break;
        }
        let mut next = vec![Q::zero(); n];
        for (u, du) in dist.iter().enumerate() {
            if du.is_zero() {
                continue;
            }
            for (v, nv) in next.iter_mut().enumerate() {
                let w = weights.get(u, v);
                if !w.is_zero() {
                    *nv += du * w;
                }
            }
        }
        dist = next;
    }
    UniPoly::from_coeffs(coeffs)
}

/// Fraction-free elimination on the integer matrix `D*M`, divided by `D^l`.
pub fn det_bareiss(m: &RatMatrix) -> Q {
    let l = m.dim();
    if l == 0 {
        return Q::one();
    }
    let (den, rows) = m.clear_denominators();
    let mut a = rows;
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..l {
        if a[k][k].is_zero() {
            match (k + 1..l).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return Q::zero(),
            }
        }
        for i in k + 1..l {
            for j in k + 1..l {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let det = sign * &a[l - 1][l - 1];
    Q::new(det, num_traits::pow(den, l))
}

/// Sparsest cut by exhaustive search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutReport {
    pub best_set: Vec<usize>,
    pub conductance: Q,
}

pub const CONDUCTANCE_MAX_N: usize = 20;

/// `min |E(S, S^c)| / (2d|S|)` over all `1 <= |S| <= n/2`.
pub fn conductance_bruteforce(g: &DynGraph) -> Result<CutReport> {
    let n = g.n();
    if n > CONDUCTANCE_MAX_N {
        return Err(Error::Refused(format!("exhaustive cut search limited to n <= {CONDUCTANCE_MAX_N}")));
    }
    if n < 2 {
        return contract("conductance needs at least two vertices");
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let two_d = 2 * g.d() as i64;
    let mut best: Option<(Q, u32)> = None;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > n / 2 {
            continue;
        }
        let cut = edges.iter().filter(|&&(u, v)| ((mask >> u) & 1) != ((mask >> v) & 1)).count();
        let phi = Q::new(BigInt::from(cut), BigInt::from(two_d * size as i64));
        if best.as_ref().is_none_or(|(b, _)| phi < *b) {
            best = Some((phi, mask));
        }
    }
    let (conductance, mask) = best.expect("n >= 2 gives a singleton cut");
    let best_set = (0..n).filter(|&v| (mask >> v) & 1 == 1).collect();
    Ok(CutReport { best_set, conductance })
}

/// Interval known to contain the second largest eigenvalue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenBracket {
    pub lower: Q,
    pub upper: Q,
}

impl EigenBracket {
    pub fn width(&self) -> Q {
        &self.upper - &self.lower
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.lower <= x && x <= &self.upper
    }
}

/// `p(z + c)` by repeated synthetic division.
fn taylor_shift(p: &UniPoly, c: &Q) -> UniPoly {
    let mut a: Vec<Q> = p.coeffs().to_vec();
    let n = a.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let t = &a[j + 1] * c;
            a[j] += t;
        }
    }
    UniPoly::from_coeffs(a)
}

/// Sign changes in the coefficient sequence, zeros skipped.
fn sign_variations(p: &UniPoly) -> usize {
    let signs: Vec<bool> = p.coeffs().iter().filter(|c| !c.is_zero()).map(|c| c.is_positive()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of roots strictly above `c`, exact when every root is real.
fn roots_above(p: &UniPoly, c: &Q) -> usize {
    sign_variations(&taylor_shift(p, c))
}

/// Brackets `lambda_2` of a symmetric stochastic matrix to width `<= tol`.
///
/// Deflates the eigenvalue 1 from the characteristic polynomial, then
/// bisects on `[-1, 1]` counting real roots above the midpoint by Descartes'
/// rule (exact here since a symmetric matrix has only real eigenvalues).
pub fn second_eigenvalue(t: &RatMatrix, tol: &Q) -> Result<EigenBracket> {
    if !t.is_symmetric() {
        return contract("second_eigenvalue needs a symmetric matrix");
    }
    if (0..t.dim()).any(|i| t.row(i).iter().sum::<Q>() != qi(1)) {
        return contract("second_eigenvalue needs a row-stochastic matrix");
    }
    if t.dim() < 2 {
        return contract("second_eigenvalue needs at least two vertices");
    }
    if !tol.is_positive() {
        return contract("tolerance must be positive");
    }
    let chi = charpoly(t)?;
    let (quot, rem) = divide_monic(&chi, &UniPoly::from_coeffs(vec![qi(-1), qi(1)]))?;
    if !rem.is_zero() {
        return Err(Error::Internal("1 is not an eigenvalue of a stochastic matrix".into()));
    }
    let one = qi(1);
    if quot.eval(&one).is_zero() {
        return Ok(EigenBracket { lower: one.clone(), upper: one });
    }
    let mut lo = qi(-1);
    let mut hi = one;
    while &hi - &lo > *tol {
        let mid = (&lo + &hi) / qi(2);
        if roots_above(&quot, &mid) > 0 {
            lo = mid;
        } else if quot.eval(&mid).is_zero() {
            return Ok(EigenBracket { lower: mid.clone(), upper: mid });
        } else {
            hi = mid;
        }
    }
    Ok(EigenBracket { lower: lo, upper: hi })
}
