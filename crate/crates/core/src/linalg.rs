//! Rational and polynomial matrices, and the determinant routines behind the
//! powering cascade: determinants over `Z_p`, CRT-reconstructed rational
//! determinants, polynomial determinants by evaluation and interpolation.

use std::fmt;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{contract, Error, Result};
use crate::numerics::{pow2, Q};
use crate::poly::{interpolate, EvalGrid, UniPoly};

/// Square matrix of exact rationals, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    dim: usize,
    entries: Vec<Q>,
}

impl RatMatrix {
    pub fn zero(dim: usize) -> Self {
        RatMatrix { dim, entries: vec![Q::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return contract("matrix rows must form a square");
        }
        Ok(RatMatrix { dim, entries: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &Q {
        &self.entries[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Q) {
        self.entries[r * self.dim + c] = v;
    }

    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut Q {
        &mut self.entries[r * self.dim + c]
    }

    pub fn row(&self, r: usize) -> &[Q] {
        &self.entries[r * self.dim..(r + 1) * self.dim]
    }

    pub fn entries(&self) -> &[Q] {
        &self.entries
    }

    pub fn mul(&self, rhs: &RatMatrix) -> RatMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        *out.entry_mut(i, j) += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &RatMatrix) -> RatMatrix {
        RatMatrix { dim: self.dim, entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, c: &Q) -> RatMatrix {
        RatMatrix { dim: self.dim, entries: self.entries.iter().map(|a| a * c).collect() }
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).filter(|(a, _)| !a.is_zero()).fold(Q::zero(), |acc, (a, b)| acc + a * b))
            .collect()
    }

    pub fn max_abs(&self) -> Q {
        self.entries.iter().map(|a| a.abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Declared `Det(l, b, v)` bound: every `|entry| <= v`.
    pub fn check_entry_bound(&self, v: &Q) -> Result<()> {
        if self.max_abs() > *v {
            return contract(format!("entry magnitude exceeds declared bound {v}"));
        }
        Ok(())
    }

    /// Delete row `r` and column `c`.
    pub fn minor(&self, r: usize, c: usize) -> RatMatrix {
        let n = self.dim;
        let entries = (0..n)
            .filter(|&i| i != r)
            .flat_map(|i| (0..n).filter(move |&j| j != c).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        RatMatrix { dim: n - 1, entries }
    }

    /// Least common multiple of all entry denominators.
    pub fn common_denominator(&self) -> BigInt {
        self.entries.iter().fold(BigInt::one(), |acc, e| acc.lcm(e.denom()))
    }

    /// `D * self` as integers, with `D` the common denominator.
    pub fn clear_denominators(&self) -> (BigInt, Vec<Vec<BigInt>>) {
        let den = self.common_denominator();
        let rows =
            (0..self.dim).map(|i| self.row(i).iter().map(|e| e.numer() * (&den / e.denom())).collect()).collect();
        (den, rows)
    }

    pub fn to_poly(&self) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().map(|e| UniPoly::constant(e.clone())).collect() }
    }
}

impl fmt::Display for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            let row: Vec<String> = self.row(i).iter().map(crate::numerics::fmt_q).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Square matrix whose entries are polynomials in `x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<UniPoly>,
}

impl PolyMatrix {
    pub fn zero(dim: usize) -> Self {
        PolyMatrix { dim, entries: vec![UniPoly::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.set(i, i, UniPoly::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<UniPoly>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return contract("matrix rows must form a square");
        }
        Ok(PolyMatrix { dim, entries: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &UniPoly {
        &self.entries[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: UniPoly) {
        self.entries[r * self.dim + c] = p;
    }

    pub fn entry_mut(&mut self, r: usize, c: usize) -> &mut UniPoly {
        &mut self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[UniPoly] {
        &self.entries
    }

    /// Highest entry degree; zero for the zero matrix.
    pub fn degree(&self) -> usize {
        self.entries.iter().filter_map(UniPoly::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &Q) -> RatMatrix {
        RatMatrix { dim: self.dim, entries: self.entries.iter().map(|p| p.eval(x)).collect() }
    }

    /// Product with all terms above `max_degree` dropped.
    pub fn mul_mod_deg(&self, rhs: &PolyMatrix, max_degree: usize) -> PolyMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.entry_mut(i, j).add_mul_mod_deg(a, b, max_degree);
                    }
                }
            }
        }
        out
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> PolyMatrix {
        let deg = self.degree() + rhs.degree();
        self.mul_mod_deg(rhs, deg)
    }

    pub fn add(&self, rhs: &PolyMatrix) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, rhs: &PolyMatrix) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect() }
    }

    /// Multiplies every entry by `x`.
    pub fn shift(&self) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().map(|p| p.shift(1)).collect() }
    }

    pub fn truncated(&self, max_degree: usize) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().map(|p| p.clone().truncated(max_degree)).collect() }
    }

    pub fn map_coeffs(&self, f: impl Fn(&Q) -> Q + Copy) -> PolyMatrix {
        PolyMatrix { dim: self.dim, entries: self.entries.iter().map(|p| p.map_coeffs(f)).collect() }
    }

    /// Largest `|c|` over all constant terms.
    pub fn max_constant_term(&self) -> Q {
        self.entries.iter().map(|p| p.constant_term().abs()).max().unwrap_or_else(Q::zero)
    }

    /// Largest absolute coefficient anywhere in the matrix.
    pub fn max_abs_coeff(&self) -> Q {
        self.entries.iter().map(UniPoly::max_abs_coeff).max().unwrap_or_else(Q::zero)
    }

    pub fn minor(&self, r: usize, c: usize) -> PolyMatrix {
        let n = self.dim;
        let entries = (0..n)
            .filter(|&i| i != r)
            .flat_map(|i| (0..n).filter(move |&j| j != c).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        PolyMatrix { dim: n - 1, entries }
    }
}

/// Square matrix over `Z_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModMatrix {
    dim: usize,
    prime: u64,
    entries: Vec<u64>,
}

impl ModMatrix {
    /// Entries are reduced into `0..p`. `p` must be a prime below `2^32`.
    pub fn new(rows: &[Vec<i64>], prime: u64) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return contract("matrix rows must form a square");
        }
        check_prime(prime)?;
        let p = prime as i64;
        let entries = rows.iter().flatten().map(|&v| v.rem_euclid(p) as u64).collect();
        Ok(ModMatrix { dim, prime, entries })
    }

    fn from_residues(dim: usize, prime: u64, entries: Vec<u64>) -> Self {
        ModMatrix { dim, prime, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }
}

fn check_prime(p: u64) -> Result<()> {
    if p >= 1 << 32 {
        return contract(format!("modulus {p} exceeds 32 bits"));
    }
    if !is_prime(p) {
        return contract(format!("modulus {p} is not prime"));
    }
    Ok(())
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p.is_multiple_of(2) {
        return p == 2;
    }
    let mut f = 3;
    while f * f <= p {
        if p.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Determinant over `Z_p` by Gaussian elimination in the field.
pub fn det_mod_p(m: &ModMatrix) -> u64 {
    let (n, p) = (m.dim, m.prime);
    let mut a = m.entries.clone();
    let mut det = 1u64;
    for c in 0..n {
        let Some(piv) = (c..n).find(|&r| a[r * n + c] != 0) else {
            return 0;
        };
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            det = (p - det) % p;
        }
        let pv = a[c * n + c];
        det = det * pv % p;
        let inv = pow_mod(pv, p - 2, p);
        for r in c + 1..n {
            let f = a[r * n + c] * inv % p;
            if f == 0 {
                continue;
            }
            for k in c..n {
                let sub = f * a[c * n + k] % p;
                a[r * n + k] = (a[r * n + k] + p - sub) % p;
            }
        }
    }
    det
}

static PRIME_POOL: Mutex<Vec<u64>> = Mutex::new(Vec::new());

/// The first `count` primes above `2^16`.
pub fn prime_pool(count: usize) -> Vec<u64> {
    let mut pool = PRIME_POOL.lock().unwrap_or_else(|e| e.into_inner());
    let mut cand = pool.last().map_or(1 << 16, |&p| p + 1);
    while pool.len() < count {
        if is_prime(cand) {
            pool.push(cand);
        }
        cand += 1;
    }
    pool[..count].to_vec()
}

/// Smallest `P` with `P^2 > 4 * prod_i |row_i|^2`, i.e. twice the Hadamard bound.
fn hadamard_target_squared(rows: &[Vec<BigInt>]) -> BigInt {
    rows.iter().map(|r| r.iter().map(|a| a * a).sum::<BigInt>()).fold(BigInt::from(4), |acc, s| acc * s)
}

fn integer_det_crt(rows: &[Vec<BigInt>]) -> Result<BigInt> {
    let n = rows.len();
    if n == 0 {
        return Ok(BigInt::one());
    }
    let target = hadamard_target_squared(rows);
    if target.is_zero() {
        return Ok(BigInt::zero());
    }
    // Each pool prime exceeds 2^16, so 2 bits of P^2 per prime bit suffice.
    let needed = (target.bits() / 32 + 2) as usize;
    let primes = prime_pool(needed);
    let mut modulus = BigInt::one();
    let mut value = BigInt::zero();
    for &p in &primes {
        if &modulus * &modulus > target {
            break;
        }
        let pb = BigInt::from(p);
        let entries = rows.iter().flatten().map(|a| a.mod_floor(&pb).to_u64().unwrap()).collect();
        let residue = det_mod_p(&ModMatrix::from_residues(n, p, entries));
        // Garner step: value + modulus * t ≡ residue (mod p).
        let cur = value.mod_floor(&pb).to_u64().unwrap();
        let m_mod = modulus.mod_floor(&pb).to_u64().unwrap();
        let t = (residue + p - cur) % p * pow_mod(m_mod, p - 2, p) % p;
        value += &modulus * BigInt::from(t);
        modulus *= pb;
    }
    if &modulus * &modulus <= target {
        return Err(Error::Internal("prime pool exhausted before the Hadamard bound".into()));
    }
    if &value * 2 > modulus {
        value -= &modulus;
    }
    Ok(value)
}

/// Exact determinant of a rational matrix through Chinese remaindering.
///
/// The matrix is scaled by the common denominator `D` to an integer matrix,
/// its determinant is taken modulo pool primes until their product exceeds
/// twice the Hadamard bound, and the signed CRT lift is divided by `D^l`.
/// When `bits` is given, every entry denominator must be at most `2^bits`.
pub fn det_rational_crt(m: &RatMatrix, bits: Option<u64>) -> Result<Q> {
    if let Some(b) = bits {
        let cap = pow2(b);
        if m.entries.iter().any(|e| *e.denom() > cap) {
            return contract(format!("entry denominator exceeds declared 2^{b}"));
        }
    }
    let (den, rows) = m.clear_denominators();
    let det = integer_det_crt(&rows)?;
    Ok(Q::new(det, num_traits::pow(den, m.dim)))
}

/// Determinant of a polynomial matrix: evaluate on `l d + 1` grid points
/// `i / (3 l d)^2`, take rational determinants, interpolate.
pub fn det_poly(m: &PolyMatrix) -> Result<UniPoly> {
    let l = m.dim;
    if l == 0 {
        return Ok(UniPoly::one());
    }
    let deg = l * m.degree();
    let grid = EvalGrid::for_degree(deg, deg);
    let values = grid.points().iter().map(|x| det_rational_crt(&m.eval(x), None)).collect::<Result<Vec<_>>>()?;
    interpolate(&grid, &values)
}

/// `det(zI - M)`, monic of degree `l`.
pub fn charpoly(m: &RatMatrix) -> Result<UniPoly> {
    let l = m.dim;
    let mut zi_minus = PolyMatrix::zero(l);
    for i in 0..l {
        for j in 0..l {
            let mut c = vec![-m.get(i, j).clone()];
            if i == j {
                c.push(Q::one());
            }
            zi_minus.set(i, j, UniPoly::from_coeffs(c));
        }
    }
    det_poly(&zi_minus)
}

/// Forward substitution for a unit lower-triangular system.
pub fn solve_unit_lower_triangular(m: &RatMatrix, rhs: &[Q]) -> Result<Vec<Q>> {
    let n = m.dim;
    if rhs.len() != n {
        return contract("right-hand side length differs from matrix dimension");
    }
    for i in 0..n {
        if !m.get(i, i).is_one() {
            return contract(format!("diagonal entry {i} is not 1"));
        }
        if (i + 1..n).any(|k| !m.get(i, k).is_zero()) {
            return contract(format!("row {i} has entries above the diagonal"));
        }
    }
    let mut x: Vec<Q> = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = rhs[i].clone();
        for (k, xk) in x.iter().enumerate() {
            let a = m.get(i, k);
            if !a.is_zero() {
                acc -= a * xk;
            }
        }
        x.push(acc);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inv_pow2, q, qi};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(rows: &[&[(i64, i64)]]) -> RatMatrix {
        RatMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&(n, d)| q(n, d)).collect()).collect()).unwrap()
    }

    /// Leibniz expansion, test-only reference.
    fn det_leibniz(m: &RatMatrix) -> Q {
        let n = m.dim();
        if n == 0 {
            return Q::one();
        }
        (0..n)
            .map(|c| {
                let term = m.get(0, c) * det_leibniz(&m.minor(0, c));
                if c % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .sum()
    }

    #[test]
    fn det_mod_p_examples() {
        let m = ModMatrix::new(&[vec![1, 2], vec![3, 4]], 5).unwrap();
        assert_eq!(det_mod_p(&m), 3);
        for l in [1, 3, 6] {
            let rows: Vec<Vec<i64>> = (0..l).map(|i| (0..l).map(|j| i64::from(i == j)).collect()).collect();
            assert_eq!(det_mod_p(&ModMatrix::new(&rows, 65537).unwrap()), 1);
        }
        assert_eq!(det_mod_p(&ModMatrix::new(&[vec![1, 1], vec![1, 1]], 7).unwrap()), 0);
        assert!(ModMatrix::new(&[vec![1]], 9).is_err());
        // needs a row swap
        let m = ModMatrix::new(&[vec![0, 1], vec![1, 0]], 7).unwrap();
        assert_eq!(det_mod_p(&m), 6);
    }

    #[test]
    fn prime_pool_is_above_two_to_sixteen() {
        let pool = prime_pool(5);
        assert_eq!(pool, vec![65537, 65539, 65543, 65551, 65557]);
    }

    #[test]
    fn det_rational_examples() {
        let d = rat(&[&[(1, 2), (0, 1)], &[(0, 1), (1, 2)]]);
        assert_eq!(det_rational_crt(&d, Some(1)).unwrap(), q(1, 4));
        let a = rat(&[&[(0, 1), (1, 2)], &[(1, 2), (0, 1)]]);
        assert_eq!(det_rational_crt(&a, None).unwrap(), q(-1, 4));
        let one = rat(&[&[(-7, 9)]]);
        assert_eq!(det_rational_crt(&one, None).unwrap(), q(-7, 9));
        assert!(det_rational_crt(&one, Some(3)).is_err());
        assert_eq!(det_rational_crt(&RatMatrix::zero(0), None).unwrap(), qi(1));
        assert_eq!(det_rational_crt(&RatMatrix::zero(3), None).unwrap(), qi(0));
    }

    #[test]
    fn det_crt_matches_leibniz_on_wide_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let l = rng.gen_range(1..=6);
            let rows = (0..l)
                .map(|_| {
                    (0..l)
                        .map(|_| {
                            Q::new(
                                BigInt::from(rng.gen_range(-1i64 << 40..1 << 40)),
                                BigInt::from(rng.gen_range(1i64..1 << 30)),
                            )
                        })
                        .collect()
                })
                .collect();
            let m = RatMatrix::from_rows(rows).unwrap();
            assert_eq!(det_rational_crt(&m, None).unwrap(), det_leibniz(&m));
        }
    }

    #[test]
    fn det_poly_examples() {
        // I - zA with A = [[0,1/2],[1/2,0]]
        let a = rat(&[&[(0, 1), (1, 2)], &[(1, 2), (0, 1)]]);
        let ima = PolyMatrix::identity(2).sub(&a.to_poly().shift());
        assert_eq!(det_poly(&ima).unwrap(), UniPoly::from_coeffs(vec![qi(1), qi(0), q(-1, 4)]));
        assert_eq!(det_poly(&PolyMatrix::identity(4)).unwrap(), UniPoly::one());
    }

    #[test]
    fn charpoly_examples() {
        assert_eq!(charpoly(&rat(&[&[(1, 4)]])).unwrap(), UniPoly::from_coeffs(vec![q(-1, 4), qi(1)]));
        let a = rat(&[&[(0, 1), (1, 2)], &[(1, 2), (0, 1)]]);
        assert_eq!(charpoly(&a).unwrap(), UniPoly::from_coeffs(vec![q(-1, 4), qi(0), qi(1)]));
    }

    fn poly_at_matrix(p: &UniPoly, m: &RatMatrix) -> RatMatrix {
        let mut acc = RatMatrix::zero(m.dim());
        for c in p.coeffs().iter().rev() {
            acc = acc.mul(m).add(&RatMatrix::identity(m.dim()).scale(c));
        }
        acc
    }

    #[test]
    fn cayley_hamilton_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let rows =
                (0..3).map(|_| (0..3).map(|_| q(rng.gen_range(-9..10), rng.gen_range(1..12))).collect()).collect();
            let m = RatMatrix::from_rows(rows).unwrap();
            let chi = charpoly(&m).unwrap();
            assert!(chi.is_monic());
            assert_eq!(poly_at_matrix(&chi, &m), RatMatrix::zero(3));
        }
    }

    #[test]
    fn triangular_solve_examples() {
        let v = vec![q(3, 5), q(-1, 2), qi(7)];
        assert_eq!(solve_unit_lower_triangular(&RatMatrix::identity(3), &v).unwrap(), v);
        let m = rat(&[&[(1, 1), (0, 1)], &[(1, 2), (1, 1)]]);
        assert_eq!(solve_unit_lower_triangular(&m, &[qi(1), qi(1)]).unwrap(), vec![qi(1), q(1, 2)]);
        let bad = rat(&[&[(2, 1), (0, 1)], &[(1, 2), (1, 1)]]);
        assert!(solve_unit_lower_triangular(&bad, &[qi(1), qi(1)]).is_err());
        let upper = rat(&[&[(1, 1), (1, 3)], &[(0, 1), (1, 1)]]);
        assert!(solve_unit_lower_triangular(&upper, &[qi(1), qi(1)]).is_err());
    }

    #[test]
    fn triangular_solve_residual_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..8);
            let mut m = RatMatrix::identity(n);
            for i in 0..n {
                for k in 0..i {
                    m.set(i, k, q(rng.gen_range(-20..20), rng.gen_range(1..9)));
                }
            }
            let rhs: Vec<Q> = (0..n).map(|_| q(rng.gen_range(-20..20), rng.gen_range(1..9))).collect();
            let x = solve_unit_lower_triangular(&m, &rhs).unwrap();
            assert_eq!(m.mul_vec(&x), rhs);
        }
    }

    fn random_poly_matrix(rng: &mut ChaCha8Rng, l: usize, d: usize, c0: &Q) -> PolyMatrix {
        let mut m = PolyMatrix::zero(l);
        for i in 0..l {
            for j in 0..l {
                let mut coeffs = vec![c0 * q(rng.gen_range(-64..=64), 64)];
                for _ in 0..d {
                    coeffs.push(q(rng.gen_range(-255..=255), 256));
                }
                m.set(i, j, UniPoly::from_coeffs(coeffs));
            }
        }
        m
    }

    #[test]
    fn det_poly_agrees_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..8 {
            let l = rng.gen_range(1..=4);
            let d = rng.gen_range(0..=2);
            let m = random_poly_matrix(&mut rng, l, d, &q(1, 3 * l as i64));
            let det = det_poly(&m).unwrap();
            let grid = EvalGrid::for_degree(l * d, l * d);
            for x in grid.points() {
                assert_eq!(det.eval(&x), det_leibniz(&m.eval(&x)));
            }
            let off_grid = q(7, 3);
            assert_eq!(det.eval(&off_grid), det_leibniz(&m.eval(&off_grid)));
        }
    }

    #[test]
    fn evaluated_entries_respect_magnitude_bound() {
        // Powering grid i/(3dl)^2 with constant terms <= 1/(3l): entries < 1/(l+1)
        // and coefficient j > 0 of det(I - zA) has magnitude below 1.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..12 {
            let l = rng.gen_range(1..=5);
            let d = rng.gen_range(1..=3);
            let m = random_poly_matrix(&mut rng, l, d, &q(1, 3 * l as i64));
            let grid = EvalGrid::for_degree(d * l, d * l);
            for x in grid.points() {
                let a = m.eval(&x);
                assert!(a.max_abs() < q(1, l as i64 + 1));
                let ima = PolyMatrix::identity(l).sub(&a.to_poly().shift());
                let dz = det_poly(&ima).unwrap();
                assert_eq!(dz.constant_term(), qi(1));
                for c in dz.coeffs().iter().skip(1) {
                    assert!(c.abs() < qi(1));
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Perturbing entries below 1/l by at most 2^-B moves the determinant by at most 2^-B.
        // Checked for l >= 5, where the first-order cofactor sum l^2 (l-1)!/l^(l-1) is below 1.
        #[test]
        fn determinant_error_is_bounded(seed in any::<u64>(), l in 5usize..=7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bits = (l * l) as u64;
            let li = l as i64;
            let m = RatMatrix::from_rows((0..l).map(|_| (0..l)
                .map(|_| q(rng.gen_range(-(1000 - 1)..1000), 1000 * li)).collect()).collect()).unwrap();
            let scale = inv_pow2(bits);
            let pert = RatMatrix::from_rows((0..l).map(|_| (0..l)
                .map(|_| &scale * q(rng.gen_range(-1000..=1000), 1000)).collect()).collect()).unwrap();
            let moved = det_rational_crt(&m.add(&pert), None).unwrap() - det_rational_crt(&m, None).unwrap();
            prop_assert!(moved.abs() <= scale);
        }
    }
}
