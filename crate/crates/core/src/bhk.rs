//! Invertible quasi-homogeneous polynomials in exact arithmetic: parsing,
//! Fermat/chain/loop atom decomposition, weight systems, the Calabi-Yau sum
//! condition, the transposed mirror, and diagonal symmetry groups via Smith
//! normal form. No floating point anywhere in this module.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_VARIABLES: usize = 64;
const MAX_EXPONENT: u64 = 1_000_000;

/// Square matrix of monomial exponents, one row per monomial. Nonzero
/// determinant is enforced at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentMatrix {
    rows: Vec<Vec<u64>>,
    vars: Vec<String>,
}

impl ExponentMatrix {
    pub fn new(rows: Vec<Vec<u64>>, vars: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse("empty exponent matrix".into()));
        }
        if n > MAX_VARIABLES {
            return Err(Error::Parse(format!("more than {MAX_VARIABLES} variables")));
        }
        if vars.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                monomials: n,
                variables: vars.len().max(rows.iter().map(Vec::len).max().unwrap_or(0)),
            });
        }
        if rows.iter().flatten().any(|&v| v > MAX_EXPONENT) {
            return Err(Error::Parse(format!("exponent above {MAX_EXPONENT}")));
        }
        let m = ExponentMatrix { rows, vars };
        if m.det() == 0 {
            return Err(Error::ZeroDeterminant);
        }
        Ok(m)
    }

    /// Matrix input with autogenerated variable names x0..xN.
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        Self::new(rows, (0..n).map(|i| format!("x{i}")).collect())
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Exact determinant, fraction-free elimination in i128.
    pub fn det(&self) -> i128 {
        let n = self.dim();
        let mut m: Vec<Vec<i128>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| v as i128).collect())
            .collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if m[k][k] == 0 {
                match (k + 1..n).find(|&r| m[r][k] != 0) {
                    Some(r) => {
                        m.swap(k, r);
                        sign = -sign;
                    }
                    None => return 0,
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
                }
                m[i][k] = 0;
            }
            prev = m[k][k];
        }
        sign * m[n - 1][n - 1]
    }

    /// The polynomial the matrix encodes, monomials in row order.
    pub fn polynomial(&self) -> String {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(j, &e)| {
                        if e == 1 {
                            self.vars[j].clone()
                        } else {
                            format!("{}^{e}", self.vars[j])
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("*")
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Sum of monomials over variables x0..xN: integer coefficients are ignored,
/// factors are `x<k>` or `x<k>^<e>` joined by `*`, exponents are at least 1,
/// a repeated variable accumulates. Every index up to the largest mentioned
/// must occur, and the monomial count must match the variable count.
pub fn parse_polynomial(s: &str) -> Result<ExponentMatrix> {
    let compact: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == '-' { '+' } else { c })
        .collect();
    let terms: Vec<&str> = compact.split('+').filter(|t| !t.is_empty()).collect();
    if terms.is_empty() {
        return Err(Error::Parse("no monomials found".into()));
    }
    let mut exponents: Vec<std::collections::BTreeMap<usize, u64>> = Vec::new();
    let mut max_var = 0usize;
    for term in &terms {
        let mut row = std::collections::BTreeMap::new();
        for piece in term.split('*') {
            if piece.is_empty() {
                return Err(Error::Parse(format!("empty factor in '{term}'")));
            }
            if piece.chars().all(|c| c.is_ascii_digit()) {
                continue; // integer coefficient, discarded
            }
            let rest = piece
                .strip_prefix('x')
                .ok_or_else(|| Error::Parse(format!("expected a variable, got '{piece}'")))?;
            let (var_digits, exp) = match rest.split_once('^') {
                Some((v, e)) => (v, e.parse::<u64>().map_err(|_| {
                    Error::Parse(format!("bad exponent in '{piece}'"))
                })?),
                None => (rest, 1),
            };
            if var_digits.is_empty() || !var_digits.chars().all(|c| c.is_ascii_digit()) {
                return Err(Error::Parse(format!("bad variable name '{piece}'")));
            }
            let var: usize = var_digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad variable index in '{piece}'")))?;
            if var >= MAX_VARIABLES {
                return Err(Error::Parse(format!("variable index {var} too large")));
            }
            if exp == 0 || exp > MAX_EXPONENT {
                return Err(Error::Parse(format!(
                    "exponent of '{piece}' must be between 1 and {MAX_EXPONENT}"
                )));
            }
            *row.entry(var).or_insert(0) += exp;
            max_var = max_var.max(var);
        }
        if row.is_empty() {
            return Err(Error::Parse(format!("monomial '{term}' has no variables")));
        }
        exponents.push(row);
    }
    let n_vars = max_var + 1;
    for v in 0..n_vars {
        if !exponents.iter().any(|row| row.contains_key(&v)) {
            return Err(Error::Parse(format!("variable x{v} never appears")));
        }
    }
    if exponents.len() != n_vars {
        return Err(Error::NotSquare {
            monomials: exponents.len(),
            variables: n_vars,
        });
    }
    let rows = exponents
        .iter()
        .map(|row| (0..n_vars).map(|v| row.get(&v).copied().unwrap_or(0)).collect())
        .collect();
    ExponentMatrix::new(rows, (0..n_vars).map(|i| format!("x{i}")).collect())
}

/// One block of the invertible normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    /// x^a
    Fermat { var: usize, exponent: u64 },
    /// x1^a1 x2 + x2^a2 x3 + ... + xk^ak
    Chain { vars: Vec<usize>, exponents: Vec<u64> },
    /// x1^a1 x2 + ... + xk^ak x1
    Loop { vars: Vec<usize>, exponents: Vec<u64> },
}

impl Atom {
    pub fn len(&self) -> usize {
        match self {
            Atom::Fermat { .. } => 1,
            Atom::Chain { vars, .. } | Atom::Loop { vars, .. } => vars.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn min_var(&self) -> usize {
        match self {
            Atom::Fermat { var, .. } => *var,
            Atom::Chain { vars, .. } | Atom::Loop { vars, .. } => {
                *vars.iter().min().expect("atoms are nonempty")
            }
        }
    }

    /// The atom's own polynomial in the given variable names.
    pub fn summary(&self, names: &[String]) -> String {
        let pow = |v: usize, e: u64| {
            if e == 1 {
                names[v].clone()
            } else {
                format!("{}^{e}", names[v])
            }
        };
        match self {
            Atom::Fermat { var, exponent } => format!("fermat({})", pow(*var, *exponent)),
            Atom::Chain { vars, exponents } => {
                let terms: Vec<String> = (0..vars.len())
                    .map(|i| {
                        if i + 1 < vars.len() {
                            format!("{}*{}", pow(vars[i], exponents[i]), names[vars[i + 1]])
                        } else {
                            pow(vars[i], exponents[i])
                        }
                    })
                    .collect();
                format!("chain({})", terms.join(" + "))
            }
            Atom::Loop { vars, exponents } => {
                let terms: Vec<String> = (0..vars.len())
                    .map(|i| {
                        format!(
                            "{}*{}",
                            pow(vars[i], exponents[i]),
                            names[vars[(i + 1) % vars.len()]]
                        )
                    })
                    .collect();
                format!("loop({})", terms.join(" + "))
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Fermat { var, exponent } => write!(f, "fermat(x{var}^{exponent})"),
            Atom::Chain { vars, .. } => write!(f, "chain(len {})", vars.len()),
            Atom::Loop { vars, .. } => write!(f, "loop(len {})", vars.len()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Interp {
    head: usize,
    tail: Option<usize>,
    exponent: u64,
}

/// Decomposes the polynomial into Fermat/chain/loop atoms, the normal form
/// every invertible polynomial admits. Monomials become pointers
/// head -> tail; a valid assignment makes the pointer graph a disjoint union
/// of paths (chains ending in a pure power) and cycles (loops).
pub fn classify_atoms(e: &ExponentMatrix) -> Result<Vec<Atom>> {
    let n = e.dim();
    let mut options: Vec<Vec<Interp>> = Vec::with_capacity(n);
    for (r, row) in e.rows().iter().enumerate() {
        let support: Vec<(usize, u64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(i, &v)| (i, v))
            .collect();
        let mut opts = Vec::new();
        match support.as_slice() {
            [(i, a)] => opts.push(Interp { head: *i, tail: None, exponent: *a }),
            [(i, a), (j, b)] => {
                if *b == 1 {
                    opts.push(Interp { head: *i, tail: Some(*j), exponent: *a });
                }
                if *a == 1 {
                    opts.push(Interp { head: *j, tail: Some(*i), exponent: *b });
                }
                if opts.is_empty() {
                    return Err(Error::NotInvertible(format!(
                        "monomial {r} couples two variables with both exponents above 1"
                    )));
                }
            }
            _ => {
                return Err(Error::NotInvertible(format!(
                    "monomial {r} involves more than two variables"
                )))
            }
        }
        options.push(opts);
    }

    fn assign(
        r: usize,
        options: &[Vec<Interp>],
        head_used: &mut [bool],
        picks: &mut Vec<Interp>,
    ) -> Option<Vec<Atom>> {
        if r == options.len() {
            return build_atoms(picks);
        }
        for interp in &options[r] {
            if head_used[interp.head] {
                continue;
            }
            head_used[interp.head] = true;
            picks.push(*interp);
            if let Some(atoms) = assign(r + 1, options, head_used, picks) {
                return Some(atoms);
            }
            picks.pop();
            head_used[interp.head] = false;
        }
        None
    }

    let mut head_used = vec![false; n];
    let mut picks = Vec::with_capacity(n);
    assign(0, &options, &mut head_used, &mut picks).ok_or_else(|| {
        Error::NotInvertible("no Fermat/chain/loop decomposition exists".into())
    })
}

/// Reads the pointer graph of a complete head assignment; None when a
/// variable is the tail of two monomials.
fn build_atoms(picks: &[Interp]) -> Option<Vec<Atom>> {
    let n = picks.len();
    let mut tail_of = vec![None; n];
    let mut exponent_of = vec![0u64; n];
    let mut in_degree = vec![0usize; n];
    for p in picks {
        tail_of[p.head] = p.tail;
        exponent_of[p.head] = p.exponent;
        if let Some(t) = p.tail {
            in_degree[t] += 1;
            if in_degree[t] > 1 {
                return None;
            }
        }
    }

    let mut visited = vec![false; n];
    let mut atoms = Vec::new();
    // paths start at in-degree 0 and end at a pure power
    for start in 0..n {
        if in_degree[start] > 0 || visited[start] {
            continue;
        }
        let mut vars = vec![start];
        visited[start] = true;
        let mut cursor = start;
        while let Some(next) = tail_of[cursor] {
            vars.push(next);
            visited[next] = true;
            cursor = next;
        }
        let exponents: Vec<u64> = vars.iter().map(|&v| exponent_of[v]).collect();
        if vars.len() == 1 {
            atoms.push(Atom::Fermat { var: start, exponent: exponents[0] });
        } else {
            atoms.push(Atom::Chain { vars, exponents });
        }
    }
    // everything left lies on cycles
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut vars = vec![start];
        visited[start] = true;
        let mut cursor = tail_of[start].expect("cycle vertices all have tails");
        while cursor != start {
            vars.push(cursor);
            visited[cursor] = true;
            cursor = tail_of[cursor].expect("cycle vertices all have tails");
        }
        // rotate the smallest variable to the front
        let pivot = vars
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .expect("cycle is nonempty");
        vars.rotate_left(pivot);
        let exponents: Vec<u64> = vars.iter().map(|&v| exponent_of[v]).collect();
        atoms.push(Atom::Loop { vars, exponents });
    }
    atoms.sort_by_key(Atom::min_var);
    Some(atoms)
}

/// Positive integer weights and degree with E w = d 1 and gcd(w, d) = 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSystem {
    pub weights: Vec<u64>,
    pub degree: u64,
}

impl WeightSystem {
    /// Sum of weights equals the degree.
    pub fn is_calabi_yau(&self) -> bool {
        self.weights.iter().map(|&w| w as u128).sum::<u128>() == self.degree as u128
    }
}

/// Solves E q = 1 over the rationals, clears denominators, and normalizes.
pub fn weights(e: &ExponentMatrix) -> Result<WeightSystem> {
    let q = solve_unit_system(e.rows())?;
    let degree = q
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let w: Vec<BigInt> = q
        .iter()
        .map(|v| (v * BigRational::from_integer(degree.clone())).to_integer())
        .collect();
    for (i, wi) in w.iter().enumerate() {
        if !wi.is_positive() {
            return Err(Error::NonPositiveWeight { index: i });
        }
    }
    let g = w.iter().fold(degree.clone(), |acc, v| acc.gcd(v));
    let to_u64 = |v: &BigInt| -> Result<u64> {
        v.to_u64()
            .ok_or_else(|| Error::Parse("weight exceeds u64".into()))
    };
    Ok(WeightSystem {
        weights: w.iter().map(|v| to_u64(&(v / &g))).collect::<Result<_>>()?,
        degree: to_u64(&(&degree / &g))?,
    })
}

fn solve_unit_system(rows: &[Vec<u64>]) -> Result<Vec<BigRational>> {
    let n = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| BigRational::from_integer(v.into()))
                .collect()
        })
        .collect();
    let mut b: Vec<BigRational> = vec![BigRational::one(); n];
    for k in 0..n {
        let pivot_row = (k..n)
            .find(|&r| !a[r][k].is_zero())
            .ok_or(Error::ZeroDeterminant)?;
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        let pivot = a[k][k].clone();
        for r in k + 1..n {
            if a[r][k].is_zero() {
                continue;
            }
            let factor = &a[r][k] / &pivot;
            for c in k..n {
                let sub = &factor * &a[k][c];
                a[r][c] = &a[r][c] - &sub;
            }
            let sub = &factor * &b[k];
            b[r] = &b[r] - &sub;
        }
    }
    let mut q = vec![BigRational::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for c in k + 1..n {
            acc -= &a[k][c] * &q[c];
        }
        q[k] = acc / &a[k][k];
    }
    Ok(q)
}

/// E^T with fresh variable names; applying it twice restores the original.
pub fn transpose_mirror(e: &ExponentMatrix) -> ExponentMatrix {
    let n = e.dim();
    let rows: Vec<Vec<u64>> = (0..n)
        .map(|i| (0..n).map(|j| e.rows[j][i]).collect())
        .collect();
    let prefix = if e.vars.first().map_or(false, |v| v.starts_with('x')) {
        "y"
    } else {
        "x"
    };
    ExponentMatrix {
        rows,
        vars: (0..n).map(|i| format!("{prefix}{i}")).collect(),
    }
}

/// Diagonal symmetries of the polynomial: the abelian group
/// Z^{N+1} / E^T Z^{N+1} presented by its invariant factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    /// Nontrivial invariant factors d1 | d2 | ..., the 1s dropped.
    pub invariant_factors: Vec<u64>,
    /// Product of all invariant factors, equal to |det E|.
    pub order: u64,
}

pub fn symmetry_group(e: &ExponentMatrix) -> Result<SymmetryGroup> {
    let n = e.dim();
    let transposed: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| e.rows[j][i] as i128).collect())
        .collect();
    let diag = smith_diagonal(transposed);
    let mut order: u64 = 1;
    for &v in &diag {
        let v = u64::try_from(v).map_err(|_| Error::Parse("group order exceeds u64".into()))?;
        order = order
            .checked_mul(v)
            .ok_or_else(|| Error::Parse("group order exceeds u64".into()))?;
    }
    Ok(SymmetryGroup {
        invariant_factors: diag.iter().filter(|&&v| v > 1).map(|&v| v as u64).collect(),
        order,
    })
}

/// Smith normal form diagonal of an integer matrix, entries made nonnegative
/// and satisfying the divisibility chain.
fn smith_diagonal(mut m: Vec<Vec<i128>>) -> Vec<i128> {
    let n = m.len();
    for k in 0..n {
        loop {
            // smallest nonzero entry of the trailing block becomes the pivot
            let mut best: Option<(usize, usize)> = None;
            for i in k..n {
                for j in k..n {
                    if m[i][j] != 0
                        && best.map_or(true, |(bi, bj)| m[i][j].abs() < m[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else { break };
            if bi != k {
                m.swap(k, bi);
            }
            if bj != k {
                for row in m.iter_mut() {
                    row.swap(k, bj);
                }
            }
            let mut clean = true;
            for i in k + 1..n {
                if m[i][k] != 0 {
                    let q = m[i][k] / m[k][k];
                    for j in k..n {
                        m[i][j] -= q * m[k][j];
                    }
                    if m[i][k] != 0 {
                        clean = false;
                    }
                }
            }
            for j in k + 1..n {
                if m[k][j] != 0 {
                    let q = m[k][j] / m[k][k];
                    for i in k..n {
                        m[i][j] -= q * m[i][k];
                    }
                    if m[k][j] != 0 {
                        clean = false;
                    }
                }
            }
            if !clean {
                continue;
            }
            // pivot must divide the rest of the block; if not, pull the
            // offending row up and keep reducing
            let mut divides = true;
            'scan: for i in k + 1..n {
                for j in k + 1..n {
                    if m[i][j] % m[k][k] != 0 {
                        for jj in k..n {
                            m[k][jj] += m[i][jj];
                        }
                        divides = false;
                        break 'scan;
                    }
                }
            }
            if divides {
                break;
            }
        }
    }
    (0..n).map(|i| m[i][i].abs()).collect()
}
