//! Problem container for conic programs in the form
//!
//! ```text
//! minimize    c^T x
//! subject to  G x + s = h,   s in K = K_1 x ... x K_p
//!             A x = b
//! ```
//!
//! Programs are assembled through [`ProgramBuilder`] from affine
//! expressions: a cone constraint `expr_i(x) in K` becomes the rows
//! `G_i = -a_i`, `h_i = a0_i`.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::cone::Cone;
use crate::ConicError;

/// Sparse affine expression `sum_j coef_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, idx: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn add(mut self, other: &AffineExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    /// Evaluates the expression at `x`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// Named ranges of the stacked decision vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableLayout {
    entries: BTreeMap<String, Range<usize>>,
}

impl VariableLayout {
    pub fn get(&self, name: &str) -> Option<Range<usize>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Range<usize>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// An immutable conic program.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub(crate) c: DVector<f64>,
    pub(crate) g: DMatrix<f64>,
    pub(crate) h: DVector<f64>,
    pub(crate) cones: Vec<Cone>,
    pub(crate) a: DMatrix<f64>,
    pub(crate) b: DVector<f64>,
    pub(crate) layout: VariableLayout,
    pub(crate) objective_offset: f64,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.b.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn cone_dim(&self) -> usize {
        self.cones.iter().map(Cone::dim).sum()
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Builds a program directly from dense data.
    pub fn from_dense(
        c: DVector<f64>,
        g: DMatrix<f64>,
        h: DVector<f64>,
        cones: Vec<Cone>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self, ConicError> {
        let p = Self {
            c,
            g,
            h,
            cones,
            a,
            b,
            layout: VariableLayout::default(),
            objective_offset: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn validate(&self) -> Result<(), ConicError> {
        let n = self.c.len();
        let m = self.cone_dim();
        if n == 0 {
            return Err(ConicError::Structure("program has no variables".into()));
        }
        if self.g.nrows() != m || self.h.len() != m {
            return Err(ConicError::Structure(format!(
                "cone dimension {m} does not match G ({}x{}) / h ({})",
                self.g.nrows(),
                self.g.ncols(),
                self.h.len()
            )));
        }
        if self.g.ncols() != n || self.a.ncols() != n {
            return Err(ConicError::Structure(format!(
                "column count mismatch: c has {n}, G has {}, A has {}",
                self.g.ncols(),
                self.a.ncols()
            )));
        }
        if self.a.nrows() != self.b.len() {
            return Err(ConicError::Structure("A and b row counts differ".into()));
        }
        for cone in &self.cones {
            match *cone {
                Cone::SecondOrder(0) | Cone::Psd(0) | Cone::NonNeg(0) | Cone::Zero(0) => {
                    return Err(ConicError::Structure("empty cone block".into()))
                }
                _ => {}
            }
        }
        let finite = |s: &[f64]| s.iter().all(|v| v.is_finite());
        if !finite(self.c.as_slice())
            || !finite(self.g.as_slice())
            || !finite(self.h.as_slice())
            || !finite(self.a.as_slice())
            || !finite(self.b.as_slice())
        {
            return Err(ConicError::Structure("non-finite problem data".into()));
        }
        let mut seen: Vec<&Range<usize>> = self.layout.entries.values().collect();
        seen.sort_by_key(|r| r.start);
        for pair in seen.windows(2) {
            if pair[0].end > pair[1].start {
                return Err(ConicError::Structure("overlapping variable ranges".into()));
            }
        }
        if seen.last().is_some_and(|r| r.end > n) {
            return Err(ConicError::Structure("variable range exceeds size".into()));
        }
        Ok(())
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    n: usize,
    layout: VariableLayout,
    objective: Vec<(usize, f64)>,
    objective_offset: f64,
    cones: Vec<(Cone, Vec<AffineExpr>)>,
    equalities: Vec<AffineExpr>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a named block of `len` variables and returns its index range.
    pub fn add_variable(&mut self, name: &str, len: usize) -> Range<usize> {
        let r = self.n..self.n + len;
        self.n += len;
        self.layout.entries.insert(name.to_string(), r.clone());
        r
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `coef * x_idx` to the (minimized) objective.
    pub fn add_objective(&mut self, idx: usize, coef: f64) {
        self.objective.push((idx, coef));
    }

    pub fn add_objective_offset(&mut self, c: f64) {
        self.objective_offset += c;
    }

    /// Requires `expr(x) = 0`.
    pub fn add_equality(&mut self, expr: AffineExpr) {
        self.equalities.push(expr);
    }

    /// Requires `(exprs[0](x), ..., exprs[d-1](x))` to lie in `cone`.
    /// PSD entries are given in column-major order of the full matrix.
    pub fn add_cone(&mut self, cone: Cone, exprs: Vec<AffineExpr>) -> Result<(), ConicError> {
        if exprs.len() != cone.dim() {
            return Err(ConicError::Structure(format!(
                "cone {cone:?} expects {} expressions, got {}",
                cone.dim(),
                exprs.len()
            )));
        }
        self.cones.push((cone, exprs));
        Ok(())
    }

    /// Requires `expr(x) >= 0`.
    pub fn add_nonneg(&mut self, expr: AffineExpr) {
        self.cones.push((Cone::NonNeg(1), vec![expr]));
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        let n = self.n;
        let check = |e: &AffineExpr| -> Result<(), ConicError> {
            if let Some(&(j, _)) = e.terms.iter().find(|(j, _)| *j >= n) {
                return Err(ConicError::Structure(format!("variable index {j} out of range {n}")));
            }
            Ok(())
        };
        let mut c = DVector::zeros(n);
        for &(j, v) in &self.objective {
            if j >= n {
                return Err(ConicError::Structure(format!("objective index {j} out of range")));
            }
            c[j] += v;
        }
        let m: usize = self.cones.iter().map(|(k, _)| k.dim()).sum();
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        let mut cones = Vec::with_capacity(self.cones.len());
        let mut row = 0;
        for (cone, exprs) in &self.cones {
            for e in exprs {
                check(e)?;
                for &(j, v) in &e.terms {
                    g[(row, j)] -= v;
                }
                h[row] = e.constant;
                row += 1;
            }
            cones.push(*cone);
        }
        let p = self.equalities.len();
        let mut a = DMatrix::zeros(p, n);
        let mut b = DVector::zeros(p);
        for (i, e) in self.equalities.iter().enumerate() {
            check(e)?;
            for &(j, v) in &e.terms {
                a[(i, j)] += v;
            }
            b[i] = -e.constant;
        }
        let prog = ConicProgram {
            c,
            g,
            h,
            cones,
            a,
            b,
            layout: self.layout,
            objective_offset: self.objective_offset,
        };
        prog.validate()?;
        Ok(prog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_places_rows_with_sign_convention() {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", 2);
        b.add_objective(x.start, 1.0);
        b.add_nonneg(AffineExpr::var(x.start).plus_const(-3.0));
        b.add_equality(AffineExpr::var(x.start + 1).plus_const(-1.0));
        let p = b.build().unwrap();
        assert_eq!(p.g()[(0, 0)], -1.0);
        assert_eq!(p.h()[0], -3.0);
        assert_eq!(p.a()[(0, 1)], 1.0);
        assert_eq!(p.b()[0], 1.0);
        assert_eq!(p.layout().get("x"), Some(0..2));
    }

    #[test]
    fn mismatched_cone_dimension_is_rejected() {
        let mut b = ProgramBuilder::new();
        b.add_variable("x", 1);
        assert!(b.add_cone(Cone::Psd(2), vec![AffineExpr::var(0); 3]).is_err());
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let mut b = ProgramBuilder::new();
        b.add_variable("x", 1);
        b.add_nonneg(AffineExpr::var(4));
        assert!(matches!(b.build(), Err(ConicError::Structure(_))));
    }
}
