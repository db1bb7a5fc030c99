//! Matrix powering through determinants.
//!
//! Small exponents (`<= l` for an `l x l` matrix) are read off the power
//! series `(I - zA)^-1 = adj(I - zA) / det(I - zA)`: each entry's series is a
//! ratio of two polynomial determinants, recovered by a unit lower-triangular
//! solve. Large exponents are reduced below `l` with Cayley–Hamilton at each
//! point of an evaluation grid and the entries interpolated back.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{contract, Error, Result};
use crate::linalg::{charpoly, det_poly, solve_unit_lower_triangular, PolyMatrix, RatMatrix};
use crate::numerics::{pow2, q, Q};
use crate::poly::{divide_monic, interpolate, EvalGrid, UniPoly};

/// `powers[i] = A^i` for `i` in `0..=m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerTable {
    dim: usize,
    powers: Vec<RatMatrix>,
}

impl PowerTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn powers(&self) -> &[RatMatrix] {
        &self.powers
    }

    pub fn power(&self, i: usize) -> &RatMatrix {
        &self.powers[i]
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Spot check `powers[i+1] = powers[i] A` with `A = powers[1]`.
    pub fn is_consistent(&self) -> bool {
        if self.powers.first() != Some(&RatMatrix::identity(self.dim)) {
            return false;
        }
        match self.powers.get(1) {
            None => true,
            Some(a) => self.powers.windows(2).all(|w| w[0].mul(a) == w[1]),
        }
    }
}

/// `I - zA` as a degree-one polynomial matrix in `z`.
fn identity_minus_z(a: &RatMatrix) -> PolyMatrix {
    PolyMatrix::identity(a.dim()).sub(&a.to_poly().shift())
}

/// The triangular system `M pi = d` with `M[i][k] = D_{i-k}`.
pub(crate) fn series_system(denominator: &UniPoly, size: usize) -> RatMatrix {
    let mut m = RatMatrix::zero(size);
    for i in 0..size {
        for k in 0..=i {
            m.set(i, k, denominator.coeff(i - k));
        }
    }
    m
}

/// `A^0 .. A^m` via the power series of `(I - zA)^-1`.
///
/// Requires `m <= l` and every `|A[i][j]| <= 1/(3l)`.
pub fn small_powers_via_series(a: &RatMatrix, m: usize) -> Result<PowerTable> {
    let l = a.dim();
    if m > l {
        return contract(format!("series powering supports exponents up to {l}, asked for {m}"));
    }
    if l == 0 {
        return Ok(PowerTable { dim: 0, powers: vec![RatMatrix::zero(0); m + 1] });
    }
    if a.max_abs() > q(1, 3 * l as i64) {
        return contract(format!("entries exceed 1/(3*{l})"));
    }
    let ima = identity_minus_z(a);
    let denominator = det_poly(&ima)?;
    if !denominator.constant_term().is_one() {
        return Err(Error::Internal("det(I - zA) has constant term other than 1".into()));
    }
    let system = series_system(&denominator, l + 1);
    let mut powers = vec![RatMatrix::zero(l); m + 1];
    for s in 0..l {
        for t in 0..l {
            // adj(I - zA)[s][t] is the (t, s) cofactor.
            let mut cof = det_poly(&ima.minor(t, s))?;
            if (s + t) % 2 == 1 {
                cof = -&cof;
            }
            let rhs: Vec<Q> = (0..=l).map(|i| cof.coeff(i)).collect();
            let series = solve_unit_lower_triangular(&system, &rhs)?;
            for (i, p) in powers.iter_mut().enumerate() {
                p.set(s, t, series[i].clone());
            }
        }
    }
    Ok(PowerTable { dim: l, powers })
}

/// `A^0 .. A^m` for any `A` with `m <= l`, scaling by a power of two into the
/// series method's admissible range and unscaling the table.
pub fn small_powers_rescaled(a: &RatMatrix, m: usize) -> Result<PowerTable> {
    let l = a.dim();
    let limit = q(1, 3 * l.max(1) as i64);
    let mut shift = 0u64;
    let mut scaled = a.clone();
    let max = a.max_abs();
    while &max / Q::from_integer(pow2(shift)) > limit {
        shift += 1;
    }
    if shift > 0 {
        scaled = a.scale(&Q::new(BigInt::one(), pow2(shift)));
    }
    let table = small_powers_via_series(&scaled, m)?;
    let powers = table
        .powers
        .into_iter()
        .enumerate()
        .map(|(j, p)| if shift == 0 { p } else { p.scale(&Q::from_integer(pow2(shift * j as u64))) })
        .collect();
    Ok(PowerTable { dim: l, powers })
}

/// `M^k` for a polynomial matrix.
///
/// Evaluates at the `dk + 1` points `i/(3dk)^2`; at each point writes
/// `z^k = q(z) chi(z) + r(z)` with `chi` the characteristic polynomial, so the
/// point value is `r(M_i)` and only powers below `l` are needed. Entries are
/// interpolated as degree-`dk` polynomials.
pub fn power_large(m: &PolyMatrix, k: usize) -> Result<PolyMatrix> {
    let l = m.dim();
    if k == 0 {
        return contract("power_large needs k >= 1");
    }
    if l == 0 {
        return Ok(PolyMatrix::zero(0));
    }
    if m.max_constant_term() > q(1, 3 * l as i64) {
        return contract(format!("constant terms exceed 1/(3*{l})"));
    }
    let d = m.degree();
    let grid = EvalGrid::for_degree(d * k, d * k);
    let zk = UniPoly::monomial(Q::one(), k);
    let mut point_values: Vec<RatMatrix> = Vec::with_capacity(grid.count());
    for x in grid.points() {
        let mi = m.eval(&x);
        let rem = if k >= l {
            let chi = charpoly(&mi)?;
            divide_monic(&zk, &chi)?.1
        } else {
            zk.clone()
        };
        let top = rem.degree().unwrap_or(0);
        let powers = small_powers_rescaled(&mi, top)?.powers;
        point_values.push(combine_powers(rem.coeffs(), &powers));
    }
    let mut out = PolyMatrix::zero(l);
    for s in 0..l {
        for t in 0..l {
            let vals: Vec<Q> = point_values.iter().map(|v| v.get(s, t).clone()).collect();
            out.set(s, t, interpolate(&grid, &vals)?);
        }
    }
    Ok(out)
}

/// `sum_j c_j P_j` over one common denominator, reducing each entry once.
fn combine_powers(coeffs: &[Q], powers: &[RatMatrix]) -> RatMatrix {
    let l = powers[0].dim();
    let terms: Vec<(&Q, &RatMatrix)> = coeffs.iter().zip(powers).filter(|(c, _)| !c.is_zero()).collect();
    let den = terms.iter().fold(BigInt::one(), |acc, (c, p)| acc.lcm(&(c.denom() * p.common_denominator())));
    let mut out = RatMatrix::zero(l);
    for s in 0..l {
        for t in 0..l {
            let mut num = BigInt::zero();
            for (c, p) in &terms {
                let e = p.get(s, t);
                if !e.is_zero() {
                    num += c.numer() * e.numer() * (&den / (c.denom() * e.denom()));
                }
            }
            out.set(s, t, Q::new(num, den.clone()));
        }
    }
    out
}

/// `sum_{i=0}^{K} (xM)^i mod x^{K+1}`, accumulating successive powers.
pub fn power_sum(m: &PolyMatrix, max_degree: usize) -> PolyMatrix {
    if m.degree() == 0 {
        return constant_power_sum(&m.eval(&Q::zero()), max_degree);
    }
    let xm = m.shift().truncated(max_degree);
    let mut term = PolyMatrix::identity(m.dim());
    let mut sum = term.clone();
    for _ in 0..max_degree {
        term = term.mul_mod_deg(&xm, max_degree);
        if term.entries().iter().all(UniPoly::is_zero) {
            break;
        }
        sum = sum.add(&term);
    }
    sum
}

/// Constant-matrix case: the `x^i` coefficient is just `M^i`.
fn constant_power_sum(m: &RatMatrix, max_degree: usize) -> PolyMatrix {
    let l = m.dim();
    let mut coeffs: Vec<Vec<Q>> = vec![Vec::with_capacity(max_degree + 1); l * l];
    let mut term = RatMatrix::identity(l);
    for i in 0..=max_degree {
        if i > 0 {
            term = term.mul(m);
        }
        for (slot, v) in coeffs.iter_mut().zip(term.entries()) {
            slot.push(v.clone());
        }
    }
    let rows =
        coeffs.chunks(l.max(1)).take(l).map(|row| row.iter().cloned().map(UniPoly::from_coeffs).collect()).collect();
    PolyMatrix::from_rows(rows).expect("square by construction")
}
