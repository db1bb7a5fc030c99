//! Univariate polynomials over exact rationals.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{contract, Result};
use crate::numerics::{fmt_q, qi, Q};

/// Dense coefficient vector, `coeffs[i]` multiplies `x^i`.
///
/// Always normalized: no trailing zero coefficients, so the zero polynomial
/// is the empty vector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct UniPoly {
    coeffs: Vec<Q>,
}

impl UniPoly {
    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// `x`
    pub fn x() -> Self {
        Self::monomial(Q::one(), 1)
    }

    pub fn monomial(c: Q, degree: usize) -> Self {
        let mut coeffs = vec![Q::zero(); degree + 1];
        coeffs[degree] = c;
        Self::from_coeffs(coeffs)
    }

    pub fn from_coeffs(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| qi(c)).collect())
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Q> {
        self.coeffs
    }

    /// Coefficient of `x^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> Q {
        self.coeffs.get(i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeff_ref(&self, i: usize) -> Option<&Q> {
        self.coeffs.get(i)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().is_some_and(One::is_one)
    }

    pub fn leading(&self) -> Option<&Q> {
        self.coeffs.last()
    }

    pub fn constant_term(&self) -> Q {
        self.coeff(0)
    }

    /// Drops every term of degree greater than `max_degree`.
    pub fn truncate(&mut self, max_degree: usize) {
        if self.coeffs.len() > max_degree + 1 {
            self.coeffs.truncate(max_degree + 1);
            *self = Self::from_coeffs(std::mem::take(&mut self.coeffs));
        }
    }

    pub fn truncated(mut self, max_degree: usize) -> Self {
        self.truncate(max_degree);
        self
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        UniPoly { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Multiplies by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Q::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        UniPoly { coeffs }
    }

    /// Coefficients of `x^len-1 p(1/x)`, i.e. the first `len` coefficients reversed.
    pub fn reversed(&self, len: usize) -> Self {
        let coeffs = (0..len).rev().map(|i| self.coeff(i)).collect();
        Self::from_coeffs(coeffs)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> Q {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
    }

    /// Applies `f` to every coefficient and renormalizes.
    pub fn map_coeffs(&self, f: impl Fn(&Q) -> Q) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(f).collect())
    }

    /// `self += a * b mod x^(max_degree+1)` without allocating the product.
    pub fn add_mul_mod_deg(&mut self, a: &UniPoly, b: &UniPoly, max_degree: usize) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        let len = (a.coeffs.len() + b.coeffs.len() - 1).min(max_degree + 1);
        if self.coeffs.len() < len {
            self.coeffs.resize(len, Q::zero());
        }
        for (i, ai) in a.coeffs.iter().enumerate().take(len) {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.coeffs.iter().enumerate().take(len - i) {
                if !bj.is_zero() {
                    self.coeffs[i + j] += ai * bj;
                }
            }
        }
        *self = Self::from_coeffs(std::mem::take(&mut self.coeffs));
    }
}

/// Product with every term of degree above `max_degree` removed.
pub fn mul_mod_deg(p: &UniPoly, q: &UniPoly, max_degree: usize) -> UniPoly {
    let mut out = UniPoly::zero();
    out.add_mul_mod_deg(p, q, max_degree);
    out
}

pub fn eval(p: &UniPoly, x: &Q) -> Q {
    p.eval(x)
}

impl Add<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn add(self, rhs: &UniPoly) -> UniPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&UniPoly> for UniPoly {
    fn add_assign(&mut self, rhs: &UniPoly) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), Q::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        *self = Self::from_coeffs(std::mem::take(&mut self.coeffs));
    }
}

impl Sub<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn sub(self, rhs: &UniPoly) -> UniPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl SubAssign<&UniPoly> for UniPoly {
    fn sub_assign(&mut self, rhs: &UniPoly) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), Q::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        *self = Self::from_coeffs(std::mem::take(&mut self.coeffs));
    }
}

impl Neg for &UniPoly {
    type Output = UniPoly;
    fn neg(self) -> UniPoly {
        UniPoly { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Mul<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn mul(self, rhs: &UniPoly) -> UniPoly {
        if self.is_zero() || rhs.is_zero() {
            return UniPoly::zero();
        }
        let deg = self.coeffs.len() + rhs.coeffs.len() - 2;
        mul_mod_deg(self, rhs, deg)
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => fmt_q(c),
                1 => format!("{}*x", fmt_q(c)),
                _ => format!("{}*x^{}", fmt_q(c), i),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// The interpolation nodes `x_i = i / scale^2` for `i in 0..count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalGrid {
    count: usize,
    scale: BigInt,
}

impl EvalGrid {
    pub fn new(count: usize, scale: impl Into<BigInt>) -> Result<Self> {
        let scale = scale.into();
        if count == 0 {
            return contract("evaluation grid needs at least one point");
        }
        if scale <= BigInt::zero() {
            return contract("grid scale must be a positive integer");
        }
        Ok(EvalGrid { count, scale })
    }

    /// Grid of `degree + 1` points with scale `3 * max(factor, 1)`, the
    /// `i / (3 * factor)^2` family used throughout the powering cascade.
    pub fn for_degree(degree: usize, factor: usize) -> Self {
        EvalGrid { count: degree + 1, scale: BigInt::from(3 * factor.max(1)) }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn scale(&self) -> &BigInt {
        &self.scale
    }

    pub fn point(&self, i: usize) -> Q {
        Q::new(BigInt::from(i), &self.scale * &self.scale)
    }

    pub fn points(&self) -> Vec<Q> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// The unique polynomial of degree `< grid.count()` through `(x_i, values[i])`.
///
/// Solves the grid's Vandermonde system exactly. Substituting `y = scale^2 x`
/// turns the nodes into `0, 1, ..., m`, where the system factors through
/// forward differences (Newton form); the monomial coefficients in `y` are
/// then rescaled by `scale^(2j)`.
pub fn interpolate(grid: &EvalGrid, values: &[Q]) -> Result<UniPoly> {
    if values.len() != grid.count {
        return contract(format!("interpolation needs {} values, got {}", grid.count, values.len()));
    }
    let m = grid.count;
    // Work over integers: scale values by the lcm of their denominators and
    // the Newton coefficients Δ^k f(0) / k! by (m-1)!.
    let den = values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let mut diffs: Vec<BigInt> = values.iter().map(|v| v.numer() * (&den / v.denom())).collect();
    let mut factorials = vec![BigInt::one()];
    for k in 1..m {
        let next = &factorials[k - 1] * BigInt::from(k);
        factorials.push(next);
    }
    let top = factorials[m - 1].clone();
    let mut newton = Vec::with_capacity(m);
    for fact in &factorials {
        newton.push(&diffs[0] * (&top / fact));
        for i in 0..diffs.len() - 1 {
            let d = &diffs[i + 1] - &diffs[i];
            diffs[i] = d;
        }
        diffs.pop();
    }
    // Expand sum_k newton[k] * y (y-1) ... (y-k+1) into monomials in y.
    let mut scaled = vec![BigInt::zero(); m];
    let mut falling: Vec<BigInt> = vec![BigInt::one()];
    for (k, nk) in newton.iter().enumerate() {
        if !nk.is_zero() {
            for (j, f) in falling.iter().enumerate() {
                if !f.is_zero() {
                    scaled[j] += nk * f;
                }
            }
        }
        // falling *= (y - k)
        let kk = BigInt::from(k);
        let mut next = vec![BigInt::zero(); falling.len() + 1];
        for (j, f) in falling.iter().enumerate() {
            next[j + 1] += f;
            next[j] -= f * &kk;
        }
        falling = next;
    }
    let common = &den * &top;
    let mut coeffs: Vec<Q> = scaled.into_iter().map(|c| Q::new(c, common.clone())).collect();
    let s2 = Q::from_integer(&grid.scale * &grid.scale);
    let mut power = Q::one();
    for c in coeffs.iter_mut() {
        *c *= &power;
        power *= &s2;
    }
    Ok(UniPoly::from_coeffs(coeffs))
}

fn common_denominator(coeffs: &[Q]) -> BigInt {
    coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

fn scaled_numer(c: &Q, den: &BigInt) -> BigInt {
    c.numer() * (den / c.denom())
}

/// Kung–Sieveking division of monic `g` by monic `f`: `g = q f + r`.
///
/// Reverses both polynomials, inverts `f_R` as the truncated geometric series
/// `sum_{i<=n-m} (1 - f_R)^i`, reads `q_R = f~_R g_R mod x^(n-m+1)`, then
/// takes `r = g - q f`.
pub fn divide_monic(g: &UniPoly, f: &UniPoly) -> Result<(UniPoly, UniPoly)> {
    if !g.is_monic() || !f.is_monic() {
        return contract("divide_monic needs monic operands");
    }
    let (n, m) = (g.degree().unwrap(), f.degree().unwrap());
    if m == 0 {
        return contract("divisor must have degree at least 1");
    }
    if n < m {
        return contract(format!("dividend degree {n} below divisor degree {m}"));
    }
    let qdeg = n - m;
    let f_rev = f.reversed(m + 1);
    let g_rev = g.reversed(n + 1);
    let one_minus = &UniPoly::one() - &f_rev;
    // The Horner iteration acc <- 1 + (1 - f_R) acc fixes coefficient i after
    // i rounds, so each coefficient is produced once from the earlier ones.
    // With D the common denominator of f, coefficient i has denominator
    // dividing D^i, so the recurrence runs on the integers inv_i * D^i.
    let den_f = common_denominator(one_minus.coeffs());
    let step: Vec<BigInt> = (0..=m).map(|j| scaled_numer(&one_minus.coeff(j), &den_f)).collect();
    let mut den_pow = vec![BigInt::one()];
    for i in 1..=qdeg {
        let next = &den_pow[i - 1] * &den_f;
        den_pow.push(next);
    }
    let mut inv: Vec<BigInt> = Vec::with_capacity(qdeg + 1);
    inv.push(BigInt::one());
    for i in 1..=qdeg {
        let mut c = BigInt::zero();
        for j in 1..=i.min(m) {
            if !step[j].is_zero() {
                c += &step[j] * &den_pow[j - 1] * &inv[i - j];
            }
        }
        inv.push(c);
    }
    // q_R = inv * g_R mod x^(qdeg+1), with coefficient i over D^i E.
    let den_g = common_denominator(g_rev.coeffs());
    let g_scaled: Vec<BigInt> = (0..=qdeg).map(|t| scaled_numer(&g_rev.coeff(t), &den_g)).collect();
    let q_rev: Vec<Q> = (0..=qdeg)
        .map(|i| {
            let mut c = BigInt::zero();
            for t in 0..=i {
                if !g_scaled[t].is_zero() {
                    c += &inv[i - t] * &g_scaled[t] * &den_pow[t];
                }
            }
            Q::new(c, &den_pow[i] * &den_g)
        })
        .collect();
    let q = UniPoly::from_coeffs(q_rev.into_iter().rev().collect());
    // Only the coefficients below deg f survive in g - q f.
    let r = UniPoly::from_coeffs(
        (0..m)
            .map(|t| {
                let mut c = g.coeff(t);
                for i in 0..=t.min(qdeg) {
                    c -= q.coeff(i) * f.coeff(t - i);
                }
                c
            })
            .collect(),
    );
    Ok((q, r))
}
