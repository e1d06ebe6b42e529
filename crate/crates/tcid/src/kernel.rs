//! Exact finite Markov kernels over named discrete variables.
//!
//! A [`FiniteKernel`] maps every point of a finite source space to a probability
//! distribution on a finite target space, with all masses stored as
//! arbitrary-precision rationals. Every operation here (marginalization,
//! product, composition, disintegration, pushforward) is exact: output rows
//! sum to exactly one, and equalities between kernels are decidable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigRational, One, Signed, Zero};
use serde_json::Value;
use thiserror::Error;

/// Exact probability carrier: arbitrary-precision rational, always reduced.
pub type Rational = BigRational;

/// The reserved symbol for "no forced value"; rejected in user domains.
pub const STAR: &str = "⋆";

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Parses `"p/q"` or `"p"` into a rational.
pub fn parse_rat(s: &str) -> Result<Rational, KernelError> {
    let mk_err = || KernelError::BadRational(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: num::BigInt = n.trim().parse().map_err(|_| mk_err())?;
    let d: num::BigInt = d.trim().parse().map_err(|_| mk_err())?;
    if d.is_zero() {
        return Err(mk_err());
    }
    Ok(Rational::new(n, d))
}

/// Renders a rational as `"p/q"` (or `"p"` when the denominator is one).
pub fn format_rat(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("duplicate variable `{0}` in space")]
    DuplicateVariable(String),
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("the symbol `⋆` is reserved and cannot appear in a domain")]
    ReservedSymbol,
    #[error("source and target share variable `{0}`")]
    SourceTargetOverlap(String),
    #[error("mass table has {got} entries, expected {want}")]
    BadTableSize { got: usize, want: usize },
    #[error("negative mass at row {row}")]
    NegativeMass { row: usize },
    #[error("row {row} sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("overlapping target variable `{0}` in product")]
    OverlappingTargets(String),
    #[error("variable `{0}` cannot be resolved consistently in product")]
    Unresolvable(String),
    #[error("spaces differ: {0}")]
    SpaceMismatch(String),
    #[error("pushforward map produced an invalid point")]
    BadPushforward,
    #[error("fallback distribution does not match the conditioned space")]
    BadFallback,
    #[error("cannot parse rational `{0}`")]
    BadRational(String),
    #[error("malformed kernel JSON: {0}")]
    BadJson(String),
}

/// A named discrete variable together with its ordered domain of symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub id: String,
    pub domain: Vec<String>,
}

impl Var {
    pub fn new(id: impl Into<String>, domain: &[&str]) -> Self {
        Var {
            id: id.into(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn binary(id: impl Into<String>) -> Self {
        Var::new(id, &["0", "1"])
    }
}

/// An ordered list of variables; the empty list denotes the one-point space.
///
/// Points of the space are tuples of domain indices, one per variable, and
/// are enumerated row-major (the first variable varies slowest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    vars: Vec<Var>,
}

impl FiniteSpace {
    pub fn new(vars: Vec<Var>) -> Result<Self, KernelError> {
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(v.id.clone()) {
                return Err(KernelError::DuplicateVariable(v.id.clone()));
            }
            if v.domain.is_empty() {
                return Err(KernelError::EmptyDomain(v.id.clone()));
            }
            if v.domain.iter().any(|s| s == STAR) {
                return Err(KernelError::ReservedSymbol);
            }
            let mut syms = BTreeSet::new();
            for s in &v.domain {
                if !syms.insert(s) {
                    return Err(KernelError::DuplicateVariable(format!("{}:{}", v.id, s)));
                }
            }
        }
        Ok(FiniteSpace { vars })
    }

    /// Internal constructor for spaces that legitimately contain `⋆`
    /// (soft-intervention input domains).
    pub(crate) fn new_with_star(vars: Vec<Var>) -> Result<Self, KernelError> {
        let mut stripped = vars.clone();
        for v in &mut stripped {
            v.domain.retain(|s| s != STAR);
            if v.domain.is_empty() {
                v.domain.push("0".into());
            }
        }
        FiniteSpace::new(stripped)?;
        Ok(FiniteSpace { vars })
    }

    pub fn point_space() -> Self {
        FiniteSpace { vars: Vec::new() }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var_ids(&self) -> BTreeSet<String> {
        self.vars.iter().map(|v| v.id.clone()).collect()
    }

    pub fn var(&self, id: &str) -> Option<&Var> {
        self.vars.iter().find(|v| v.id == id)
    }

    pub fn index_of_var(&self, id: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.id == id)
    }

    /// Number of points (1 for the one-point space).
    pub fn size(&self) -> usize {
        self.vars.iter().map(|v| v.domain.len()).product()
    }

    /// Decodes a flat index into per-variable domain indices.
    pub fn point(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate().rev() {
            out[i] = idx % v.domain.len();
            idx /= v.domain.len();
        }
        out
    }

    /// Encodes per-variable domain indices into a flat index.
    pub fn index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for (i, v) in self.vars.iter().enumerate() {
            debug_assert!(coords[i] < v.domain.len());
            idx = idx * v.domain.len() + coords[i];
        }
        idx
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(|i| self.point(i))
    }

    /// Renders a point as `var=sym,var=sym`; the one-point space renders as `⋆`.
    pub fn label(&self, coords: &[usize]) -> String {
        if self.vars.is_empty() {
            return STAR.to_string();
        }
        self.vars
            .iter()
            .zip(coords)
            .map(|(v, &c)| format!("{}={}", v.id, v.domain[c]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a label produced by [`FiniteSpace::label`].
    pub fn parse_label(&self, label: &str) -> Result<Vec<usize>, KernelError> {
        if self.vars.is_empty() {
            if label == STAR || label.is_empty() {
                return Ok(Vec::new());
            }
            return Err(KernelError::BadJson(format!("unexpected point `{label}`")));
        }
        let mut coords = vec![usize::MAX; self.vars.len()];
        for part in label.split(',') {
            let (id, sym) = part
                .split_once('=')
                .ok_or_else(|| KernelError::BadJson(format!("bad point `{label}`")))?;
            let vi = self
                .index_of_var(id)
                .ok_or_else(|| KernelError::UnknownVariable(id.to_string()))?;
            let ci = self.vars[vi]
                .domain
                .iter()
                .position(|s| s == sym)
                .ok_or_else(|| KernelError::BadJson(format!("unknown symbol `{sym}` for `{id}`")))?;
            coords[vi] = ci;
        }
        if coords.iter().any(|&c| c == usize::MAX) {
            return Err(KernelError::BadJson(format!("incomplete point `{label}`")));
        }
        Ok(coords)
    }

    fn restricted(&self, keep: &BTreeSet<String>) -> FiniteSpace {
        FiniteSpace {
            vars: self
                .vars
                .iter()
                .filter(|v| keep.contains(&v.id))
                .cloned()
                .collect(),
        }
    }
}

/// A named assignment of symbols to variables, used in reports and errors.
pub type Assignment = BTreeMap<String, String>;


/// An exact Markov kernel between finite product spaces.
///
/// For every source point the target masses sum to exactly one; source and
/// target variable sets are disjoint. Equality (`==`) is semantic: variable
/// order does not matter, only the named spaces and the mass function.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    source: FiniteSpace,
    target: FiniteSpace,
    /// Row-major: `mass[s * target.size() + t]`.
    mass: Vec<Rational>,
}

impl FiniteKernel {
    pub fn new(
        source: FiniteSpace,
        target: FiniteSpace,
        mass: Vec<Rational>,
    ) -> Result<Self, KernelError> {
        for v in source.vars() {
            if target.var(&v.id).is_some() {
                return Err(KernelError::SourceTargetOverlap(v.id.clone()));
            }
        }
        let want = source.size() * target.size();
        if mass.len() != want {
            return Err(KernelError::BadTableSize {
                got: mass.len(),
                want,
            });
        }
        let tsize = target.size();
        for s in 0..source.size() {
            let row = &mass[s * tsize..(s + 1) * tsize];
            if let Some(_) = row.iter().position(|m| m.is_negative()) {
                return Err(KernelError::NegativeMass { row: s });
            }
            let sum: Rational = row.iter().sum();
            if !sum.is_one() {
                return Err(KernelError::RowNotNormalized {
                    row: s,
                    sum: format_rat(&sum),
                });
            }
        }
        Ok(FiniteKernel {
            source,
            target,
            mass,
        })
    }

    /// A distribution: kernel from the one-point space.
    pub fn distribution(target: FiniteSpace, mass: Vec<Rational>) -> Result<Self, KernelError> {
        FiniteKernel::new(FiniteSpace::point_space(), target, mass)
    }

    /// Point mass at a fixed target point, constant in the source.
    pub fn dirac(source: FiniteSpace, target: FiniteSpace, point: &[usize]) -> Result<Self, KernelError> {
        let tsize = target.size();
        let ti = target.index(point);
        let mut mass = vec![Rational::zero(); source.size() * tsize];
        for s in 0..source.size() {
            mass[s * tsize + ti] = Rational::one();
        }
        FiniteKernel::new(source, target, mass)
    }

    /// Uniform distribution on the target for every source point.
    pub fn uniform(source: FiniteSpace, target: FiniteSpace) -> Result<Self, KernelError> {
        let tsize = target.size();
        let p = Rational::new(1.into(), (tsize as i64).into());
        let mass = vec![p; source.size() * tsize];
        FiniteKernel::new(source, target, mass)
    }

    /// Deterministic copy of a single source variable into a target variable
    /// with the same domain.
    pub fn copy(source_var: Var, target_id: impl Into<String>) -> Result<Self, KernelError> {
        let tvar = Var {
            id: target_id.into(),
            domain: source_var.domain.clone(),
        };
        let n = source_var.domain.len();
        let source = FiniteSpace::new(vec![source_var])?;
        let target = FiniteSpace::new(vec![tvar])?;
        let mut mass = vec![Rational::zero(); n * n];
        for i in 0..n {
            mass[i * n + i] = Rational::one();
        }
        FiniteKernel::new(source, target, mass)
    }

    pub fn source(&self) -> &FiniteSpace {
        &self.source
    }

    pub fn target(&self) -> &FiniteSpace {
        &self.target
    }

    pub fn get(&self, s: usize, t: usize) -> &Rational {
        &self.mass[s * self.target.size() + t]
    }

    /// Mass at a named source/target assignment; panics on unknown names.
    /// Intended for tests and small lookups.
    pub fn mass_at(&self, source: &[(&str, &str)], target: &[(&str, &str)]) -> Rational {
        let s = coords_from_pairs(&self.source, source);
        let t = coords_from_pairs(&self.target, target);
        self.get(self.source.index(&s), self.target.index(&t)).clone()
    }

    /// Reorders source and target variables into sorted-by-name order.
    pub fn canonical(&self) -> FiniteKernel {
        let mut svars = self.source.vars().to_vec();
        svars.sort_by(|a, b| a.id.cmp(&b.id));
        let mut tvars = self.target.vars().to_vec();
        tvars.sort_by(|a, b| a.id.cmp(&b.id));
        self.reordered(
            &svars.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(),
            &tvars.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(),
        )
    }

    /// Reorders variables by name; the name sets must match exactly.
    pub fn reordered(&self, source_order: &[&str], target_order: &[&str]) -> FiniteKernel {
        let sperm: Vec<usize> = source_order
            .iter()
            .map(|id| self.source.index_of_var(id).expect("source var"))
            .collect();
        let tperm: Vec<usize> = target_order
            .iter()
            .map(|id| self.target.index_of_var(id).expect("target var"))
            .collect();
        assert_eq!(sperm.len(), self.source.vars().len());
        assert_eq!(tperm.len(), self.target.vars().len());
        let new_source = FiniteSpace {
            vars: sperm.iter().map(|&i| self.source.vars()[i].clone()).collect(),
        };
        let new_target = FiniteSpace {
            vars: tperm.iter().map(|&i| self.target.vars()[i].clone()).collect(),
        };
        let tsize = new_target.size();
        let mut mass = vec![Rational::zero(); new_source.size() * tsize];
        for s_new in 0..new_source.size() {
            let sc_new = new_source.point(s_new);
            let mut sc_old = vec![0; sc_new.len()];
            for (new_i, &old_i) in sperm.iter().enumerate() {
                sc_old[old_i] = sc_new[new_i];
            }
            let s_old = self.source.index(&sc_old);
            for t_new in 0..tsize {
                let tc_new = new_target.point(t_new);
                let mut tc_old = vec![0; tc_new.len()];
                for (new_i, &old_i) in tperm.iter().enumerate() {
                    tc_old[old_i] = tc_new[new_i];
                }
                let t_old = self.target.index(&tc_old);
                mass[s_new * tsize + t_new] = self.get(s_old, t_old).clone();
            }
        }
        FiniteKernel {
            source: new_source,
            target: new_target,
            mass,
        }
    }

    /// Restricts the target to `keep`, summing masses over dropped coordinates.
    pub fn marginalize(&self, keep: &BTreeSet<String>) -> Result<FiniteKernel, KernelError> {
        for id in keep {
            if self.target.var(id).is_none() {
                return Err(KernelError::UnknownVariable(id.clone()));
            }
        }
        let new_target = self.target.restricted(keep);
        let proj: Vec<usize> = new_target
            .vars()
            .iter()
            .map(|v| self.target.index_of_var(&v.id).unwrap())
            .collect();
        let tsize = new_target.size();
        let mut mass = vec![Rational::zero(); self.source.size() * tsize];
        for s in 0..self.source.size() {
            for t in 0..self.target.size() {
                let m = self.get(s, t);
                if m.is_zero() {
                    continue;
                }
                let tc = self.target.point(t);
                let kc: Vec<usize> = proj.iter().map(|&i| tc[i]).collect();
                mass[s * tsize + new_target.index(&kc)] += m;
            }
        }
        FiniteKernel::new(self.source.clone(), new_target, mass)
    }

    /// Product `K1 ⊗ K2` where `K1`'s source variables may be supplied by
    /// `K2`'s target; remaining source variables (shared by name) become the
    /// source of the result. Targets must be disjoint.
    pub fn product(&self, other: &FiniteKernel) -> Result<FiniteKernel, KernelError> {
        let k1 = self;
        let k2 = other;
        for v in k1.target.vars() {
            if k2.target.var(&v.id).is_some() {
                return Err(KernelError::OverlappingTargets(v.id.clone()));
            }
            if k2.source.var(&v.id).is_some() {
                // K2 may not read what K1 produces; that would invert the order.
                return Err(KernelError::Unresolvable(v.id.clone()));
            }
        }
        // Resolve each K1 source variable against K2's target, else keep free.
        enum Res {
            FromK2Target(usize),
            Free(usize), // index into free var list
        }
        let mut free: Vec<Var> = Vec::new();
        let free_index = |v: &Var, free: &mut Vec<Var>| -> Result<usize, KernelError> {
            if let Some(i) = free.iter().position(|f| f.id == v.id) {
                if free[i].domain != v.domain {
                    return Err(KernelError::Unresolvable(v.id.clone()));
                }
                Ok(i)
            } else {
                free.push(v.clone());
                Ok(free.len() - 1)
            }
        };
        let mut k1_src_res = Vec::new();
        for v in k1.source.vars() {
            if let Some(ti) = k2.target.index_of_var(&v.id) {
                if k2.target.vars()[ti].domain != v.domain {
                    return Err(KernelError::Unresolvable(v.id.clone()));
                }
                k1_src_res.push(Res::FromK2Target(ti));
            } else {
                k1_src_res.push(Res::Free(free_index(v, &mut free)?));
            }
        }
        let mut k2_src_res = Vec::new();
        for v in k2.source.vars() {
            k2_src_res.push(free_index(v, &mut free)?);
        }
        let source = FiniteSpace { vars: free };
        let mut tvars = k1.target.vars().to_vec();
        tvars.extend(k2.target.vars().iter().cloned());
        let target = FiniteSpace { vars: tvars };
        for v in source.vars() {
            if target.var(&v.id).is_some() {
                return Err(KernelError::Unresolvable(v.id.clone()));
            }
        }
        let n1 = k1.target.vars().len();
        let tsize = target.size();
        let mut mass = vec![Rational::zero(); source.size() * tsize];
        for s in 0..source.size() {
            let sc = source.point(s);
            let k2_sc: Vec<usize> = k2_src_res.iter().map(|&i| sc[i]).collect();
            let k2_s = k2.source.index(&k2_sc);
            for t in 0..tsize {
                let tc = target.point(t);
                let (z, xy) = tc.split_at(n1);
                let k2_t = k2.target.index(xy);
                let m2 = k2.get(k2_s, k2_t);
                if m2.is_zero() {
                    continue;
                }
                let k1_sc: Vec<usize> = k1_src_res
                    .iter()
                    .map(|r| match r {
                        Res::FromK2Target(i) => xy[*i],
                        Res::Free(i) => sc[*i],
                    })
                    .collect();
                let m1 = k1.get(k1.source.index(&k1_sc), k1.target.index(z));
                if m1.is_zero() {
                    continue;
                }
                mass[s * tsize + t] = m1 * m2;
            }
        }
        FiniteKernel::new(source, target, mass)
    }

    /// Composition `K1 ∘ K2`: product followed by marginalization onto
    /// `K1`'s target.
    pub fn compose(&self, other: &FiniteKernel) -> Result<FiniteKernel, KernelError> {
        self.product(other)?.marginalize(&self.target.var_ids())
    }

    /// Disintegrates the kernel given a subset of its target variables, with
    /// a uniform distribution on rows of zero marginal mass.
    pub fn disintegrate(&self, given: &BTreeSet<String>) -> Result<FiniteKernel, KernelError> {
        self.disintegrate_with(given, None)
    }

    /// Disintegration with an explicit fallback distribution for zero-mass
    /// conditioning rows. The conditional is unique only up to those rows;
    /// making the choice explicit keeps downstream equalities reproducible.
    pub fn disintegrate_with(
        &self,
        given: &BTreeSet<String>,
        fallback: Option<&FiniteKernel>,
    ) -> Result<FiniteKernel, KernelError> {
        for id in given {
            if self.target.var(id).is_none() {
                return Err(KernelError::UnknownVariable(id.clone()));
            }
        }
        let y_space = self.target.restricted(given);
        let x_ids: BTreeSet<String> = self
            .target
            .var_ids()
            .difference(given)
            .cloned()
            .collect();
        let x_space = self.target.restricted(&x_ids);
        if let Some(fb) = fallback {
            if fb.source.vars().is_empty() == false
                || fb.target.var_ids() != x_space.var_ids()
                || fb
                    .target
                    .vars()
                    .iter()
                    .any(|v| x_space.var(&v.id).map(|w| &w.domain) != Some(&v.domain))
            {
                return Err(KernelError::BadFallback);
            }
        }
        // New source: conditioned variables first, then the original source.
        let mut svars = y_space.vars().to_vec();
        for v in self.source.vars() {
            if given.contains(&v.id) || x_ids.contains(&v.id) {
                return Err(KernelError::SourceTargetOverlap(v.id.clone()));
            }
            svars.push(v.clone());
        }
        let source = FiniteSpace { vars: svars };
        let y_len = y_space.vars().len();

        let y_proj: Vec<usize> = y_space
            .vars()
            .iter()
            .map(|v| self.target.index_of_var(&v.id).unwrap())
            .collect();
        let x_proj: Vec<usize> = x_space
            .vars()
            .iter()
            .map(|v| self.target.index_of_var(&v.id).unwrap())
            .collect();

        let xsize = x_space.size();
        let uniform = Rational::new(1.into(), (xsize as i64).into());
        let mut mass = vec![Rational::zero(); source.size() * xsize];
        for s_old in 0..self.source.size() {
            let sc_old = self.source.point(s_old);
            for y in 0..y_space.size() {
                let yc = y_space.point(y);
                // Collect the slice of the original row matching Y=y.
                let mut row = vec![Rational::zero(); xsize];
                let mut total = Rational::zero();
                for t in 0..self.target.size() {
                    let m = self.get(s_old, t);
                    if m.is_zero() {
                        continue;
                    }
                    let tc = self.target.point(t);
                    if y_proj.iter().zip(&yc).all(|(&i, &c)| tc[i] == c) {
                        let xc: Vec<usize> = x_proj.iter().map(|&i| tc[i]).collect();
                        row[x_space.index(&xc)] += m;
                        total += m;
                    }
                }
                let mut sc_new: Vec<usize> = yc.clone();
                sc_new.extend(&sc_old);
                debug_assert_eq!(sc_new.len(), y_len + sc_old.len());
                let s_new = source.index(&sc_new);
                if total.is_zero() {
                    for x in 0..xsize {
                        mass[s_new * xsize + x] = match fallback {
                            Some(fb) => {
                                let xc = x_space.point(x);
                                let fc: Vec<usize> = fb
                                    .target
                                    .vars()
                                    .iter()
                                    .map(|v| xc[x_space.index_of_var(&v.id).unwrap()])
                                    .collect();
                                fb.get(0, fb.target.index(&fc)).clone()
                            }
                            None => uniform.clone(),
                        };
                    }
                } else {
                    for x in 0..xsize {
                        mass[s_new * xsize + x] = &row[x] / &total;
                    }
                }
            }
        }
        FiniteKernel::new(source, x_space, mass)
    }

    /// Deterministic post-processing of the target: the mass of a new point
    /// is the sum over its preimage, per source point.
    pub fn pushforward(
        &self,
        new_target: FiniteSpace,
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<FiniteKernel, KernelError> {
        let tsize = new_target.size();
        let mut mass = vec![Rational::zero(); self.source.size() * tsize];
        for s in 0..self.source.size() {
            for t in 0..self.target.size() {
                let m = self.get(s, t);
                if m.is_zero() {
                    continue;
                }
                let img = f(&self.target.point(t));
                if img.len() != new_target.vars().len()
                    || img
                        .iter()
                        .zip(new_target.vars())
                        .any(|(&c, v)| c >= v.domain.len())
                {
                    return Err(KernelError::BadPushforward);
                }
                mass[s * tsize + new_target.index(&img)] += m;
            }
        }
        FiniteKernel::new(self.source.clone(), new_target, mass)
    }

    /// True iff every table entry is strictly positive.
    pub fn strictly_positive(&self) -> bool {
        self.mass.iter().all(|m| m.is_positive())
    }

    /// Absolute continuity `self ≪ other`: wherever `other` vanishes, `self`
    /// vanishes too. Both kernels must live on the same named spaces.
    pub fn absolutely_continuous(&self, other: &FiniteKernel) -> Result<bool, KernelError> {
        if self.source.var_ids() != other.source.var_ids()
            || self.target.var_ids() != other.target.var_ids()
        {
            return Err(KernelError::SpaceMismatch(
                "absolute continuity requires identical variable sets".into(),
            ));
        }
        let a = self.canonical();
        let b = other.canonical();
        if a.source != b.source || a.target != b.target {
            return Err(KernelError::SpaceMismatch("domains differ".into()));
        }
        Ok(a.mass
            .iter()
            .zip(&b.mass)
            .all(|(ka, kb)| !kb.is_zero() || ka.is_zero()))
    }

    /// Drops source variables after checking that the kernel is constant in
    /// them. Used when a factor provably does not depend on a coordinate.
    pub fn restrict_source_constant(
        &self,
        keep: &BTreeSet<String>,
    ) -> Result<FiniteKernel, KernelError> {
        let kept = self.source.restricted(keep);
        let dropped: Vec<&Var> = self
            .source
            .vars()
            .iter()
            .filter(|v| !keep.contains(&v.id))
            .collect();
        if dropped.is_empty() {
            return Ok(self.clone());
        }
        let tsize = self.target.size();
        let mut mass = vec![Rational::zero(); kept.size() * tsize];
        let mut filled = vec![false; kept.size()];
        for s in 0..self.source.size() {
            let sc = self.source.point(s);
            let kc: Vec<usize> = kept
                .vars()
                .iter()
                .map(|v| sc[self.source.index_of_var(&v.id).unwrap()])
                .collect();
            let k = kept.index(&kc);
            if !filled[k] {
                filled[k] = true;
                for t in 0..tsize {
                    mass[k * tsize + t] = self.get(s, t).clone();
                }
            } else {
                for t in 0..tsize {
                    if &mass[k * tsize + t] != self.get(s, t) {
                        return Err(KernelError::Unresolvable(format!(
                            "kernel is not constant in dropped variable(s) {:?}",
                            dropped.iter().map(|v| &v.id).collect::<Vec<_>>()
                        )));
                    }
                }
            }
        }
        FiniteKernel::new(kept, self.target.clone(), mass)
    }

    /// Serializes to the interchange JSON format with `"p/q"` rationals.
    pub fn to_json(&self) -> Value {
        let spaces = |sp: &FiniteSpace| {
            Value::Array(
                sp.vars()
                    .iter()
                    .map(|v| {
                        Value::Array(vec![
                            Value::String(v.id.clone()),
                            Value::Array(
                                v.domain.iter().map(|s| Value::String(s.clone())).collect(),
                            ),
                        ])
                    })
                    .collect(),
            )
        };
        let mut rows = serde_json::Map::new();
        for s in 0..self.source.size() {
            let mut row = serde_json::Map::new();
            for t in 0..self.target.size() {
                row.insert(
                    self.target.label(&self.target.point(t)),
                    Value::String(format_rat(self.get(s, t))),
                );
            }
            rows.insert(self.source.label(&self.source.point(s)), Value::Object(row));
        }
        let mut obj = serde_json::Map::new();
        obj.insert("source".into(), spaces(&self.source));
        obj.insert("target".into(), spaces(&self.target));
        obj.insert("mass".into(), Value::Object(rows));
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<FiniteKernel, KernelError> {
        let obj = v
            .as_object()
            .ok_or_else(|| KernelError::BadJson("expected object".into()))?;
        let space = |key: &str| -> Result<FiniteSpace, KernelError> {
            let arr = obj
                .get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| KernelError::BadJson(format!("missing `{key}`")))?;
            let mut vars = Vec::new();
            for item in arr {
                let pair = item
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| KernelError::BadJson("bad variable entry".into()))?;
                let id = pair[0]
                    .as_str()
                    .ok_or_else(|| KernelError::BadJson("variable id must be a string".into()))?;
                let domain = pair[1]
                    .as_array()
                    .ok_or_else(|| KernelError::BadJson("domain must be an array".into()))?
                    .iter()
                    .map(|s| {
                        s.as_str()
                            .map(String::from)
                            .ok_or_else(|| KernelError::BadJson("symbol must be a string".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                vars.push(Var {
                    id: id.to_string(),
                    domain,
                });
            }
            FiniteSpace::new_with_star(vars)
        };
        let source = space("source")?;
        let target = space("target")?;
        let rows = obj
            .get("mass")
            .and_then(Value::as_object)
            .ok_or_else(|| KernelError::BadJson("missing `mass`".into()))?;
        let tsize = target.size();
        let mut mass = vec![Rational::zero(); source.size() * tsize];
        for (skey, row) in rows {
            let sc = source.parse_label(skey)?;
            let s = source.index(&sc);
            let row = row
                .as_object()
                .ok_or_else(|| KernelError::BadJson("mass row must be an object".into()))?;
            for (tkey, m) in row {
                let tc = target.parse_label(tkey)?;
                let m = m
                    .as_str()
                    .ok_or_else(|| KernelError::BadJson("mass must be a `p/q` string".into()))?;
                mass[s * tsize + target.index(&tc)] = parse_rat(m)?;
            }
        }
        FiniteKernel::new(source, target, mass)
    }
}

impl PartialEq for FiniteKernel {
    fn eq(&self, other: &Self) -> bool {
        if self.source.var_ids() != other.source.var_ids()
            || self.target.var_ids() != other.target.var_ids()
        {
            return false;
        }
        let a = self.canonical();
        let b = other.canonical();
        a.source == b.source && a.target == b.target && a.mass == b.mass
    }
}

impl Eq for FiniteKernel {}

impl fmt::Display for FiniteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.source.size() {
            let sl = self.source.label(&self.source.point(s));
            for t in 0..self.target.size() {
                let m = self.get(s, t);
                if !m.is_zero() {
                    writeln!(
                        f,
                        "  ({} ‖ {}) = {}",
                        self.target.label(&self.target.point(t)),
                        sl,
                        format_rat(m)
                    )?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn coords_from_pairs(space: &FiniteSpace, pairs: &[(&str, &str)]) -> Vec<usize> {
    let mut coords = vec![usize::MAX; space.vars().len()];
    for (id, sym) in pairs {
        let vi = space.index_of_var(id).expect("unknown variable");
        let ci = space.vars()[vi]
            .domain
            .iter()
            .position(|s| s == sym)
            .expect("unknown symbol");
        coords[vi] = ci;
    }
    assert!(coords.iter().all(|&c| c != usize::MAX), "incomplete point");
    coords
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(vars: &[(&str, &[&str])]) -> FiniteSpace {
        FiniteSpace::new(vars.iter().map(|(id, d)| Var::new(*id, d)).collect()).unwrap()
    }

    fn xy_kernel() -> FiniteKernel {
        // Joint on X × Y with masses (0,0): 1/2, (0,1): 1/4, (1,1): 1/4.
        FiniteKernel::distribution(
            space(&[("X", &["0", "1"]), ("Y", &["0", "1"])]),
            vec![rat(1, 2), rat(1, 4), rat(0, 1), rat(1, 4)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let err = FiniteKernel::distribution(
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 2), rat(1, 4)],
        )
        .unwrap_err();
        assert!(matches!(err, KernelError::RowNotNormalized { .. }));
    }

    #[test]
    fn rejects_source_target_overlap() {
        let err = FiniteKernel::uniform(
            space(&[("X", &["0", "1"])]),
            space(&[("X", &["0", "1"])]),
        )
        .unwrap_err();
        assert!(matches!(err, KernelError::SourceTargetOverlap(_)));
    }

    #[test]
    fn marginalize_uniform_pair() {
        let k = FiniteKernel::uniform(
            FiniteSpace::point_space(),
            space(&[("X", &["0", "1"]), ("Y", &["0", "1"])]),
        )
        .unwrap();
        let m = k.marginalize(&["X".to_string()].into()).unwrap();
        assert_eq!(m.get(0, 0), &rat(1, 2));
        assert_eq!(m.get(0, 1), &rat(1, 2));
    }

    #[test]
    fn marginalize_dirac() {
        let sp = space(&[("X", &["0", "1"]), ("Y", &["0", "1"])]);
        let k = FiniteKernel::dirac(FiniteSpace::point_space(), sp, &[1, 0]).unwrap();
        let m = k.marginalize(&["Y".to_string()].into()).unwrap();
        assert_eq!(m.mass_at(&[], &[("Y", "0")]), rat(1, 1));
    }

    #[test]
    fn marginalize_sums_columns() {
        let m = xy_kernel().marginalize(&["Y".to_string()].into()).unwrap();
        assert_eq!(m.mass_at(&[], &[("Y", "0")]), rat(1, 2));
        assert_eq!(m.mass_at(&[], &[("Y", "1")]), rat(1, 2));
    }

    #[test]
    fn product_copy_with_marginal() {
        let copy = FiniteKernel::copy(Var::binary("X"), "Z").unwrap();
        let px = FiniteKernel::distribution(
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 3), rat(2, 3)],
        )
        .unwrap();
        let joint = copy.product(&px).unwrap();
        assert_eq!(joint.mass_at(&[], &[("Z", "0"), ("X", "0")]), rat(1, 3));
        assert_eq!(joint.mass_at(&[], &[("Z", "1"), ("X", "1")]), rat(2, 3));
        assert_eq!(joint.mass_at(&[], &[("Z", "0"), ("X", "1")]), rat(0, 1));
    }

    #[test]
    fn product_constant_first_factor() {
        let dz = FiniteKernel::dirac(
            FiniteSpace::point_space(),
            space(&[("Z", &["0", "1"])]),
            &[0],
        )
        .unwrap();
        let k2 = xy_kernel();
        let p = dz.product(&k2).unwrap().marginalize(&["Z".to_string()].into()).unwrap();
        assert_eq!(p.mass_at(&[], &[("Z", "0")]), rat(1, 1));
    }

    #[test]
    fn compose_identity_law() {
        let copy = FiniteKernel::copy(Var::binary("X"), "Z").unwrap();
        let px = FiniteKernel::distribution(
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let z = copy.compose(&px).unwrap();
        assert_eq!(z.mass_at(&[], &[("Z", "0")]), rat(1, 2));
        assert_eq!(z.mass_at(&[], &[("Z", "1")]), rat(1, 2));
    }

    #[test]
    fn compose_matrix_vector() {
        // K(Z‖X): 0 → δ0, 1 → (1/2, 1/2); p(X) = (1/2, 1/2); Z ~ (3/4, 1/4).
        let k = FiniteKernel::new(
            space(&[("X", &["0", "1"])]),
            space(&[("Z", &["0", "1"])]),
            vec![rat(1, 1), rat(0, 1), rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let p = FiniteKernel::distribution(
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let z = k.compose(&p).unwrap();
        assert_eq!(z.mass_at(&[], &[("Z", "0")]), rat(3, 4));
        assert_eq!(z.mass_at(&[], &[("Z", "1")]), rat(1, 4));
    }

    #[test]
    fn disintegrate_exact_ratios() {
        let k = xy_kernel();
        let c = k.disintegrate(&["Y".to_string()].into()).unwrap();
        assert_eq!(c.mass_at(&[("Y", "0")], &[("X", "0")]), rat(1, 1));
        assert_eq!(c.mass_at(&[("Y", "1")], &[("X", "0")]), rat(1, 2));
        assert_eq!(c.mass_at(&[("Y", "1")], &[("X", "1")]), rat(1, 2));
    }

    #[test]
    fn disintegrate_product_is_constant() {
        let q = FiniteKernel::distribution(
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 3), rat(2, 3)],
        )
        .unwrap();
        let p = FiniteKernel::distribution(
            space(&[("Y", &["0", "1"])]),
            vec![rat(1, 4), rat(3, 4)],
        )
        .unwrap();
        let joint = q.product(&p).unwrap();
        let c = joint.disintegrate(&["Y".to_string()].into()).unwrap();
        for y in ["0", "1"] {
            assert_eq!(c.mass_at(&[("Y", y)], &[("X", "0")]), rat(1, 3));
            assert_eq!(c.mass_at(&[("Y", y)], &[("X", "1")]), rat(2, 3));
        }
    }

    #[test]
    fn disintegrate_zero_row_uniform_and_reconstructs() {
        // Y = 0 has zero mass; conditional there falls back to uniform, and
        // the reconstruction identity still holds exactly.
        let k = FiniteKernel::distribution(
            space(&[("X", &["0", "1"]), ("Y", &["0", "1"])]),
            vec![rat(0, 1), rat(1, 3), rat(0, 1), rat(2, 3)],
        )
        .unwrap();
        let c = k.disintegrate(&["Y".to_string()].into()).unwrap();
        assert_eq!(c.mass_at(&[("Y", "0")], &[("X", "0")]), rat(1, 2));
        let m = k.marginalize(&["Y".to_string()].into()).unwrap();
        let back = c.product(&m).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn pushforward_projection_equals_marginalization() {
        let k = xy_kernel();
        let proj = k
            .pushforward(space(&[("X", &["0", "1"])]), |tc| vec![tc[0]])
            .unwrap();
        // Rename to compare against marginalize, which keeps the name X.
        assert_eq!(proj, k.marginalize(&["X".to_string()].into()).unwrap());
    }

    #[test]
    fn pushforward_constant_is_dirac() {
        let k = xy_kernel();
        let c = k
            .pushforward(space(&[("S", &["s"])]), |_| vec![0])
            .unwrap();
        assert_eq!(c.mass_at(&[], &[("S", "s")]), rat(1, 1));
    }

    #[test]
    fn strict_positivity() {
        assert!(FiniteKernel::uniform(
            FiniteSpace::point_space(),
            space(&[("X", &["0", "1"])])
        )
        .unwrap()
        .strictly_positive());
        assert!(!FiniteKernel::dirac(
            FiniteSpace::point_space(),
            space(&[("X", &["0", "1"])]),
            &[0]
        )
        .unwrap()
        .strictly_positive());
    }

    #[test]
    fn absolute_continuity_cases() {
        let sp = space(&[("X", &["0", "1"])]);
        let d = FiniteKernel::dirac(FiniteSpace::point_space(), sp.clone(), &[0]).unwrap();
        let u = FiniteKernel::uniform(FiniteSpace::point_space(), sp).unwrap();
        assert!(d.absolutely_continuous(&d).unwrap());
        assert!(d.absolutely_continuous(&u).unwrap());
        assert!(!u.absolutely_continuous(&d).unwrap());
    }

    #[test]
    fn product_of_marginals_not_ac_wrt_copy_joint() {
        let joint = FiniteKernel::distribution(
            space(&[("X", &["0", "1"]), ("Y", &["0", "1"])]),
            vec![rat(1, 2), rat(0, 1), rat(0, 1), rat(1, 2)],
        )
        .unwrap();
        let px = joint.marginalize(&["X".to_string()].into()).unwrap();
        let py = joint.marginalize(&["Y".to_string()].into()).unwrap();
        let prod = px.product(&py).unwrap();
        assert!(!prod.absolutely_continuous(&joint).unwrap());
        assert!(joint.absolutely_continuous(&prod).unwrap());
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let k = FiniteKernel::new(
            space(&[("T", &["0", "1"])]),
            space(&[("X", &["0", "1"])]),
            vec![rat(1, 3), rat(2, 3), rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let j1 = serde_json::to_string(&k.to_json()).unwrap();
        let k2 = FiniteKernel::from_json(&serde_json::from_str(&j1).unwrap()).unwrap();
        let j2 = serde_json::to_string(&k2.to_json()).unwrap();
        assert_eq!(j1, j2);
        assert_eq!(k, k2);
    }

    #[test]
    fn reserved_star_rejected() {
        let err = FiniteSpace::new(vec![Var::new("X", &["0", STAR])]).unwrap_err();
        assert_eq!(err, KernelError::ReservedSymbol);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random distribution on up to three binary variables, built from
        /// integer weights so every mass is an exact small rational.
        fn arb_joint(vars: usize) -> impl Strategy<Value = FiniteKernel> {
            let cells = 1usize << vars;
            proptest::collection::vec(0u32..12, cells).prop_filter_map(
                "at least one positive weight",
                move |w| {
                    let total: u32 = w.iter().sum();
                    if total == 0 {
                        return None;
                    }
                    let names = ["X", "Y", "Z"];
                    let sp = FiniteSpace::new(
                        (0..vars).map(|i| Var::binary(names[i])).collect(),
                    )
                    .unwrap();
                    let mass = w
                        .iter()
                        .map(|&wi| Rational::new(wi.into(), total.into()))
                        .collect();
                    Some(FiniteKernel::distribution(sp, mass).unwrap())
                },
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn disintegration_reconstruction(k in arb_joint(3)) {
                let given: BTreeSet<String> = ["Y".to_string(), "Z".to_string()].into();
                let c = k.disintegrate(&given).unwrap();
                let m = k.marginalize(&given).unwrap();
                prop_assert_eq!(c.product(&m).unwrap(), k);
            }

            #[test]
            fn marginalization_commutes(k in arb_joint(3)) {
                let g1: BTreeSet<String> = ["X".to_string()].into();
                let g12: BTreeSet<String> = ["X".to_string(), "Y".to_string()].into();
                let lhs = k.marginalize(&g12).unwrap().marginalize(&g1).unwrap();
                let rhs = k.marginalize(&g1).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn essential_uniqueness(k in arb_joint(2)) {
                // Two disintegrations with different fallbacks differ only on
                // zero-mass rows of the marginal.
                let given: BTreeSet<String> = ["Y".to_string()].into();
                let fb = FiniteKernel::dirac(
                    FiniteSpace::point_space(),
                    FiniteSpace::new(vec![Var::binary("X")]).unwrap(),
                    &[1],
                ).unwrap();
                let c1 = k.disintegrate(&given).unwrap();
                let c2 = k.disintegrate_with(&given, Some(&fb)).unwrap();
                let m = k.marginalize(&given).unwrap();
                for y in 0..2 {
                    let row_mass = m.get(0, y);
                    for x in 0..2 {
                        if !row_mass.is_zero() {
                            prop_assert_eq!(c1.get(y, x), c2.get(y, x));
                        }
                    }
                }
            }

            #[test]
            fn product_associativity(
                w1 in proptest::collection::vec(1u32..8, 2),
                w2 in proptest::collection::vec(1u32..8, 4),
                w3 in proptest::collection::vec(1u32..8, 4),
            ) {
                // Three chained binary kernels: K3(C‖B), K2(B‖A), K1(A).
                let dist = |w: &[u32]| {
                    let t: u32 = w.iter().sum();
                    w.iter().map(|&x| Rational::new(x.into(), t.into())).collect::<Vec<_>>()
                };
                let row2 = |w: &[u32]| {
                    let mut out = Vec::new();
                    for r in w.chunks(2) {
                        let t: u32 = r.iter().sum();
                        out.extend(r.iter().map(|&x| Rational::new(x.into(), t.into())));
                    }
                    out
                };
                let a = FiniteSpace::new(vec![Var::binary("A")]).unwrap();
                let b = FiniteSpace::new(vec![Var::binary("B")]).unwrap();
                let c = FiniteSpace::new(vec![Var::binary("C")]).unwrap();
                let k1 = FiniteKernel::distribution(a.clone(), dist(&w1)).unwrap();
                let k2 = FiniteKernel::new(a, b.clone(), row2(&w2)).unwrap();
                let k3 = FiniteKernel::new(b, c, row2(&w3)).unwrap();
                let lhs = k3.product(&k2).unwrap().product(&k1).unwrap();
                let rhs = k3.product(&k2.product(&k1).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
