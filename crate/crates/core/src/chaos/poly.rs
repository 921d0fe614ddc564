//! Multivariate polynomials stored as coefficient vectors over a graded
//! monomial dictionary.
//!
//! The dictionary for `dims` variables and total degree `r` lists every
//! exponent tuple with total degree at most `r`, ordered by total degree and
//! then lexicographically with the first variable varying slowest, i.e. for
//! two variables: `1, x1, x2, x1^2, x1 x2, x2^2, ...`. The dictionary of
//! degree `r` is a prefix of the dictionary of degree `r + 1`, so a polynomial
//! can be promoted to a higher degree by zero-extending its coefficients.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent tuple of a monomial.
pub type MultiIndex = Vec<u32>;

/// Multi-indices of total degree exactly `degree`, lexicographically descending.
fn indices_of_degree(dims: usize, degree: u32) -> Vec<MultiIndex> {
    if dims == 0 {
        return if degree == 0 {
            vec![Vec::new()]
        } else {
            Vec::new()
        };
    }
    if dims == 1 {
        return vec![vec![degree]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut tail in indices_of_degree(dims - 1, degree - first) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Graded lexicographic dictionary of all multi-indices with total degree `<= degree`.
pub fn graded_indices(dims: usize, degree: u32) -> Vec<MultiIndex> {
    (0..=degree)
        .flat_map(|k| indices_of_degree(dims, k))
        .collect()
}

/// Number of monomials with total degree `<= degree` in `dims` variables: C(dims + degree, dims).
pub fn dictionary_size(dims: usize, degree: u32) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 1..=dims as u128 {
        num *= degree as u128 + k;
        den *= k;
    }
    (num / den) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dims: usize,
    degree: u32,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero(dims: usize) -> Self {
        Self {
            dims,
            degree: 0,
            coeffs: vec![0.0],
        }
    }

    pub fn constant(dims: usize, value: f64) -> Self {
        Self {
            dims,
            degree: 0,
            coeffs: vec![value],
        }
    }

    /// The coordinate function `x_var` (0-based).
    pub fn variable(dims: usize, var: usize) -> Self {
        let mut exps = vec![0; dims];
        exps[var] = 1;
        Self::monomial(&exps, 1.0)
    }

    pub fn monomial(exponents: &[u32], coeff: f64) -> Self {
        let dims = exponents.len();
        let degree: u32 = exponents.iter().sum();
        let mut p = Self {
            dims,
            degree,
            coeffs: vec![0.0; dictionary_size(dims, degree)],
        };
        let pos = graded_indices(dims, degree)
            .iter()
            .position(|m| m.as_slice() == exponents)
            .expect("monomial is in its own dictionary");
        p.coeffs[pos] = coeff;
        p
    }

    /// Builds a polynomial from explicit coefficients over the degree-`degree` dictionary.
    pub fn from_coeffs(dims: usize, degree: u32, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dictionary_size(dims, degree) {
            return Err(Error::config(format!(
                "expected {} coefficients for {} variables at degree {}, got {}",
                dictionary_size(dims, degree),
                dims,
                degree,
                coeffs.len()
            )));
        }
        Ok(Self {
            dims,
            degree,
            coeffs,
        }
        .trimmed())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest exponent of a single variable among nonzero terms.
    pub fn max_univariate_degree(&self) -> u32 {
        self.terms()
            .map(|(m, _)| m.iter().copied().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Nonzero `(multi-index, coefficient)` pairs in dictionary order.
    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        graded_indices(self.dims, self.degree)
            .into_iter()
            .zip(self.coeffs.iter().copied())
            .filter(|(_, c)| *c != 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree == 0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dims);
        if self.degree == 0 {
            return self.coeffs[0];
        }
        // powers[k][e] = x_k^e, accumulated incrementally per dimension
        let deg = self.degree as usize;
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xk| {
                let mut row = Vec::with_capacity(deg + 1);
                let mut acc = 1.0;
                for _ in 0..=deg {
                    row.push(acc);
                    acc *= xk;
                }
                row
            })
            .collect();
        graded_indices(self.dims, self.degree)
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| {
                m.iter()
                    .enumerate()
                    .fold(*c, |acc, (k, &e)| acc * powers[k][e as usize])
            })
            .sum()
    }

    fn promoted(&self, degree: u32) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        c.resize(dictionary_size(self.dims, degree.max(self.degree)), 0.0);
        c
    }

    fn trimmed(mut self) -> Self {
        while self.degree > 0 {
            let lower = dictionary_size(self.dims, self.degree - 1);
            if self.coeffs[lower..].iter().all(|c| *c == 0.0) {
                self.coeffs.truncate(lower);
                self.degree -= 1;
            } else {
                break;
            }
        }
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        let degree = self.degree.max(other.degree);
        let a = self.promoted(degree);
        let b = other.promoted(degree);
        Self {
            dims: self.dims,
            degree,
            coeffs: a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        }
        .trimmed()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dims: self.dims,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
        .trimmed()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        let degree = self.degree + other.degree;
        let dict = graded_indices(self.dims, degree);
        let lookup: HashMap<&MultiIndex, usize> =
            dict.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut coeffs = vec![0.0; dict.len()];
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                let m: MultiIndex = ma.iter().zip(&mb).map(|(a, b)| a + b).collect();
                coeffs[lookup[&m]] += ca * cb;
            }
        }
        Self {
            dims: self.dims,
            degree,
            coeffs,
        }
        .trimmed()
    }

    /// Parses expressions such as `1 + 1*d1`, `-1 + d1`, `0.5*d1^2*d2 - 3 d2`.
    ///
    /// Variables are named `d1 .. d<dims>`.
    pub fn parse(text: &str, dims: usize) -> Result<Self> {
        PolyParser::new(text, dims).parse()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            write!(f, "{mag}")?;
            for (k, &e) in m.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*d{}", k + 1)?,
                    _ => write!(f, "*d{}^{}", k + 1, e)?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

struct PolyParser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
    dims: usize,
}

impl<'a> PolyParser<'a> {
    fn new(src: &'a str, dims: usize) -> Self {
        Self {
            src,
            chars: src.chars().collect(),
            pos: 0,
            dims,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(
            format!("polynomial \"{}\" (column {})", self.src, self.pos + 1),
            msg,
        )
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Polynomial> {
        if self.peek().is_none() {
            return Err(self.err("empty expression"));
        }
        let mut acc = Polynomial::zero(self.dims);
        let mut sign = 1.0;
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                sign = -1.0;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        loop {
            let term = self.term()?;
            acc = acc.add(&term.scale(sign));
            match self.peek() {
                None => break,
                Some('+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some('-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(c) => return Err(self.err(format!("unexpected '{c}'"))),
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                // implicit product, e.g. "3 d1"
                Some('d') => acc = acc.mul(&self.factor()?),
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some('d') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.err("expected variable index after 'd'"));
                }
                let idx: usize = self.chars[start..self.pos]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| self.err("bad variable index"))?;
                if idx == 0 || idx > self.dims {
                    return Err(self.err(format!(
                        "variable d{idx} out of range (parameters are d1..d{})",
                        self.dims
                    )));
                }
                let mut exp = 1u32;
                if self.peek() == Some('^') {
                    self.pos += 1;
                    self.skip_ws();
                    let start = self.pos;
                    while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    exp = self.chars[start..self.pos]
                        .iter()
                        .collect::<String>()
                        .parse()
                        .map_err(|_| self.err("expected integer exponent"))?;
                }
                let mut exps = vec![0; self.dims];
                exps[idx - 1] = exp;
                Ok(Polynomial::monomial(&exps, 1.0))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.pos < self.chars.len() {
                    let c = self.chars[self.pos];
                    let exp_sign = (c == '-' || c == '+')
                        && self.pos > start
                        && matches!(self.chars[self.pos - 1], 'e' | 'E');
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let lit: String = self.chars[start..self.pos].iter().collect();
                let v: f64 = lit
                    .parse()
                    .map_err(|_| self.err(format!("bad number '{lit}'")))?;
                if !v.is_finite() {
                    return Err(self.err("non-finite coefficient"));
                }
                Ok(Polynomial::constant(self.dims, v))
            }
            Some('(') => Err(self.err("parentheses are not supported; expand the polynomial")),
            Some(c) => Err(self.err(format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}
