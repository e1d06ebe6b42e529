//! Transitional conditional independence over finite transitional
//! probability spaces.
//!
//! A transitional probability space is a kernel `K(W ‖ T)` together with
//! variables that are total functions of the joint point `(w, t)`. This
//! unifies random variables (functions of `w`) and non-stochastic variables
//! (functions of `t`): both are just declared variables here, so inputs and
//! parameters join independence statements on an equal footing.
//!
//! `X ⫫ Y | Z` holds when one single kernel `Q(X ‖ Z)` — not depending on
//! `Y` or `T` — factorizes the joint as `K(X,Y,Z ‖ T) = Q(X ‖ Z) ⊗
//! K(Y,Z ‖ T)`. The relation is genuinely asymmetric; [`tci_symmetric`]
//! takes the disjunction of the two directions.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num::Zero;
use serde_json::Value;
use thiserror::Error;

use crate::kernel::{
    Assignment, FiniteKernel, FiniteSpace, KernelError, Rational, Var,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TciError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("variable `{0}` is not declared")]
    UndeclaredVariable(String),
    #[error("variable `{0}` is already declared")]
    Redeclared(String),
    #[error("`{0}` refers to an unknown coordinate")]
    UnknownCoordinate(String),
    #[error("variable map for `{0}` returned an out-of-range value")]
    NotTotal(String),
    #[error("the conditioning variable must differ from the independent variable")]
    SameVariable,
    #[error("statistic must map every point of the sample space")]
    StatisticNotTotal,
    #[error("malformed variable declaration JSON: {0}")]
    BadJson(String),
}

/// Where a declared variable reads each of its coordinates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoordRef {
    Target(usize),
    Source(usize),
}

/// A variable on the joint `(w, t)` point set, materialized as a total
/// lookup table into its value space.
#[derive(Debug, Clone)]
struct TransVar {
    /// Value labels, one per value index.
    labels: Vec<String>,
    /// `value[t * wsize + w]` is the value index at the joint point.
    value: Vec<usize>,
}

/// A finite transitional probability space with named variables.
#[derive(Debug, Clone)]
pub struct TransitionalSpace {
    kernel: FiniteKernel,
    vars: BTreeMap<String, TransVar>,
}

/// Outcome of a transitional conditional independence test.
///
/// Exactly one of `witness_q` and `violation` is present: a witness kernel
/// `Q(X ‖ Z)` when the independence holds (uniform on conditioning values
/// that provide no constraint), or a pair of contexts forcing two different
/// conditionals for the same `z`.
#[derive(Debug, Clone)]
pub struct TciCertificate {
    pub holds: bool,
    pub witness_q: Option<FiniteKernel>,
    pub violation: Option<TciViolation>,
}

/// Two contexts `(t, y)` with positive mass that induce different
/// conditionals of `X` at the same conditioning value `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TciViolation {
    pub z: String,
    pub first: (Assignment, String),
    pub second: (Assignment, String),
}

impl TransitionalSpace {
    pub fn new(kernel: FiniteKernel) -> Self {
        TransitionalSpace {
            kernel,
            vars: BTreeMap::new(),
        }
    }

    pub fn kernel(&self) -> &FiniteKernel {
        &self.kernel
    }

    fn joint_sizes(&self) -> (usize, usize) {
        (self.kernel.target().size(), self.kernel.source().size())
    }

    /// Declares a variable as the projection onto a list of coordinates,
    /// which may mix target (`w`) and source (`t`) coordinates.
    pub fn declare_coords(&mut self, name: &str, coords: &[&str]) -> Result<(), TciError> {
        if self.vars.contains_key(name) {
            return Err(TciError::Redeclared(name.to_string()));
        }
        let mut refs = Vec::new();
        let mut doms: Vec<&[String]> = Vec::new();
        for c in coords {
            if let Some(i) = self.kernel.target().index_of_var(c) {
                refs.push(CoordRef::Target(i));
                doms.push(&self.kernel.target().vars()[i].domain);
            } else if let Some(i) = self.kernel.source().index_of_var(c) {
                refs.push(CoordRef::Source(i));
                doms.push(&self.kernel.source().vars()[i].domain);
            } else {
                return Err(TciError::UnknownCoordinate(c.to_string()));
            }
        }
        // Value space: the product of the projected domains, labelled by the
        // tuple of symbols ("(s1,s2)" for arity ≥ 2, the bare symbol for 1,
        // "⋆" for the empty projection).
        let sizes: Vec<usize> = doms.iter().map(|d| d.len()).collect();
        let total: usize = sizes.iter().product();
        let mut labels = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut syms = vec![""; sizes.len()];
            for i in (0..sizes.len()).rev() {
                syms[i] = &doms[i][idx % sizes[i]];
                idx /= sizes[i];
            }
            labels.push(match syms.len() {
                0 => crate::kernel::STAR.to_string(),
                1 => syms[0].to_string(),
                _ => format!("({})", syms.join(",")),
            });
        }
        let (wsize, tsize) = self.joint_sizes();
        let mut value = vec![0usize; wsize * tsize];
        for t in 0..tsize {
            let tc = self.kernel.source().point(t);
            for w in 0..wsize {
                let wc = self.kernel.target().point(w);
                let mut v = 0usize;
                for (r, size) in refs.iter().zip(&sizes) {
                    let c = match r {
                        CoordRef::Target(i) => wc[*i],
                        CoordRef::Source(i) => tc[*i],
                    };
                    v = v * size + c;
                }
                value[t * wsize + w] = v;
            }
        }
        self.vars.insert(
            name.to_string(),
            TransVar { labels, value },
        );
        Ok(())
    }

    /// Declares a variable by an arbitrary total map on joint points. The
    /// closure receives the target coordinates and the source coordinates.
    pub fn declare_map(
        &mut self,
        name: &str,
        labels: Vec<String>,
        f: impl Fn(&[usize], &[usize]) -> usize,
    ) -> Result<(), TciError> {
        if self.vars.contains_key(name) {
            return Err(TciError::Redeclared(name.to_string()));
        }
        let (wsize, tsize) = self.joint_sizes();
        let mut value = vec![0usize; wsize * tsize];
        for t in 0..tsize {
            let tc = self.kernel.source().point(t);
            for w in 0..wsize {
                let v = f(&self.kernel.target().point(w), &tc);
                if v >= labels.len() {
                    return Err(TciError::NotTotal(name.to_string()));
                }
                value[t * wsize + w] = v;
            }
        }
        self.vars.insert(name.to_string(), TransVar { labels, value });
        Ok(())
    }

    fn var(&self, name: &str) -> Result<&TransVar, TciError> {
        self.vars
            .get(name)
            .ok_or_else(|| TciError::UndeclaredVariable(name.to_string()))
    }

    /// The joint law of declared variables as a kernel from `T`, with one
    /// target variable per name.
    pub fn joint_law(&self, names: &[&str]) -> Result<FiniteKernel, TciError> {
        let vars: Vec<&TransVar> = names
            .iter()
            .map(|n| self.var(n))
            .collect::<Result<_, _>>()?;
        let tvars: Vec<Var> = names
            .iter()
            .zip(&vars)
            .map(|(n, v)| Var {
                id: n.to_string(),
                domain: v.labels.clone(),
            })
            .collect();
        let target = FiniteSpace::new_with_star(tvars)?;
        let (wsize, tsize) = self.joint_sizes();
        let t_target = target.size();
        let mut mass = vec![Rational::zero(); tsize * t_target];
        for t in 0..tsize {
            for w in 0..wsize {
                let m = self.kernel.get(t, w);
                if m.is_zero() {
                    continue;
                }
                let coords: Vec<usize> = vars.iter().map(|v| v.value[t * wsize + w]).collect();
                mass[t * t_target + target.index(&coords)] += m;
            }
        }
        Ok(FiniteKernel::new(self.kernel.source().clone(), target, mass)?)
    }
}

/// Decides `X ⫫ Y | Z` for declared variables, producing a certificate.
///
/// For each conditioning value `z`, every context `(t, y)` with positive
/// marginal mass on `(y, z)` pins the conditional of `X`; the independence
/// holds iff all pinned conditionals agree per `z`, and the witness takes
/// that common value (uniform where nothing is pinned).
pub fn tci_check(
    s: &TransitionalSpace,
    x: &str,
    y: &str,
    z: &str,
) -> Result<TciCertificate, TciError> {
    if x == z {
        return Err(TciError::SameVariable);
    }
    let vx = s.var(x)?;
    let vy = s.var(y)?;
    let vz = s.var(z)?;
    let (wsize, tsize) = s.joint_sizes();
    let nx = vx.labels.len();
    let ny = vy.labels.len();
    let nz = vz.labels.len();

    // mass[(z, t, y)][x], accumulated from the joint table.
    let mut table = vec![Rational::zero(); nz * tsize * ny * nx];
    for t in 0..tsize {
        for w in 0..wsize {
            let m = s.kernel.get(t, w);
            if m.is_zero() {
                continue;
            }
            let j = t * wsize + w;
            let idx = ((vz.value[j] * tsize + t) * ny + vy.value[j]) * nx + vx.value[j];
            table[idx] += m;
        }
    }

    let uniform = Rational::new(1.into(), (nx as i64).into());
    let mut q_rows: Vec<Option<(Vec<Rational>, (usize, usize))>> = vec![None; nz];
    for zi in 0..nz {
        for t in 0..tsize {
            for yi in 0..ny {
                let base = ((zi * tsize + t) * ny + yi) * nx;
                let row = &table[base..base + nx];
                let total: Rational = row.iter().sum();
                if total.is_zero() {
                    continue;
                }
                let cond: Vec<Rational> = row.iter().map(|m| m / &total).collect();
                match &q_rows[zi] {
                    None => q_rows[zi] = Some((cond, (t, yi))),
                    Some((prev, first_ctx)) => {
                        if prev != &cond {
                            return Ok(TciCertificate {
                                holds: false,
                                witness_q: None,
                                violation: Some(TciViolation {
                                    z: vz.labels[zi].clone(),
                                    first: (
                                        source_assignment(s, first_ctx.0),
                                        vy.labels[first_ctx.1].clone(),
                                    ),
                                    second: (source_assignment(s, t), vy.labels[yi].clone()),
                                }),
                            });
                        }
                    }
                }
            }
        }
    }

    // Assemble the witness Q(X ‖ Z).
    let z_space = FiniteSpace::new_with_star(vec![Var {
        id: z.to_string(),
        domain: vz.labels.clone(),
    }])?;
    let x_space = FiniteSpace::new_with_star(vec![Var {
        id: x.to_string(),
        domain: vx.labels.clone(),
    }])?;
    let mut mass = Vec::with_capacity(nz * nx);
    for zi in 0..nz {
        match &q_rows[zi] {
            Some((cond, _)) => mass.extend(cond.iter().cloned()),
            None => mass.extend(std::iter::repeat(uniform.clone()).take(nx)),
        }
    }
    Ok(TciCertificate {
        holds: true,
        witness_q: Some(FiniteKernel::new(z_space, x_space, mass)?),
        violation: None,
    })
}

fn source_assignment(s: &TransitionalSpace, t: usize) -> Assignment {
    let src = s.kernel.source();
    let coords = src.point(t);
    src.vars()
        .iter()
        .zip(&coords)
        .map(|(v, &c)| (v.id.clone(), v.domain[c].clone()))
        .collect()
}

/// The symmetrized independence: `X ⫫ Y | Z` or `Y ⫫ X | Z`.
pub fn tci_symmetric(
    s: &TransitionalSpace,
    x: &str,
    y: &str,
    z: &str,
) -> Result<bool, TciError> {
    Ok(tci_check(s, x, y, z)?.holds || tci_check(s, y, x, z)?.holds)
}

/// Statistical notions expressed as transitional conditional independences
/// over the model kernel `P(X ‖ ϑ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatisticMode {
    /// The law of the statistic does not depend on the parameter.
    Ancillary,
    /// The data is independent of the parameter given the statistic.
    Sufficient,
    /// The data is independent of the parameter and the auxiliary target
    /// variables jointly, given the statistic.
    Adequate { y_vars: BTreeSet<String> },
}

/// Tests ancillarity, sufficiency or adequacy of a statistic of the data.
///
/// `model` is a kernel from the parameter space to the sample space; the
/// statistic is a total map of the data coordinates (for `Adequate`, of the
/// data coordinates excluding `y_vars`) into `labels`.
pub fn statistic_check(
    model: &FiniteKernel,
    labels: Vec<String>,
    statistic: impl Fn(&[usize]) -> usize,
    mode: StatisticMode,
) -> Result<TciCertificate, TciError> {
    let mut s = TransitionalSpace::new(model.clone());
    let theta_coords: Vec<&str> = model
        .source()
        .vars()
        .iter()
        .map(|v| v.id.as_str())
        .collect();
    let (x_coords, y_coords): (Vec<&str>, Vec<&str>) = match &mode {
        StatisticMode::Adequate { y_vars } => model
            .target()
            .vars()
            .iter()
            .map(|v| v.id.as_str())
            .partition(|id| !y_vars.contains(*id)),
        _ => (
            model.target().vars().iter().map(|v| v.id.as_str()).collect(),
            Vec::new(),
        ),
    };
    let x_positions: Vec<usize> = x_coords
        .iter()
        .map(|c| model.target().index_of_var(c).unwrap())
        .collect();
    let n = labels.len();
    s.declare_map("S", labels, move |wc, _| {
        let xs: Vec<usize> = x_positions.iter().map(|&i| wc[i]).collect();
        let v = statistic(&xs);
        v.min(n) // out-of-range surfaces as NotTotal via declare_map
    })?;
    s.declare_coords("X", &x_coords)?;
    s.declare_coords("theta", &theta_coords)?;
    match mode {
        StatisticMode::Ancillary => {
            // `S ⫫ ϑ` is `S ⫫ ϑ | ⋆`: condition on the trivial variable.
            s.declare_coords("trivial", &[])?;
            tci_check(&s, "S", "theta", "trivial")
        }
        StatisticMode::Sufficient => tci_check(&s, "X", "theta", "S"),
        StatisticMode::Adequate { .. } => {
            let mut coords: Vec<&str> = Vec::new();
            coords.extend(theta_coords.iter());
            coords.extend(y_coords.iter());
            s.declare_coords("thetaY", &coords)?;
            tci_check(&s, "X", "thetaY", "S")
        }
    }
}

/// Parses a variable-declaration block `{"vars":{"X":["a"],"Z":["c","I_a"]}}`
/// against a kernel, declaring each variable as a coordinate projection.
pub fn space_from_json(
    kernel_json: &Value,
    decl: &Value,
) -> Result<TransitionalSpace, TciError> {
    let kernel = FiniteKernel::from_json(kernel_json)?;
    let mut s = TransitionalSpace::new(kernel);
    let vars = decl
        .get("vars")
        .and_then(Value::as_object)
        .ok_or_else(|| TciError::BadJson("missing `vars`".into()))?;
    for (name, coords) in vars {
        let coords: Vec<&str> = coords
            .as_array()
            .ok_or_else(|| TciError::BadJson(format!("`{name}` must list coordinates")))?
            .iter()
            .map(|c| {
                c.as_str()
                    .ok_or_else(|| TciError::BadJson("coordinates must be strings".into()))
            })
            .collect::<Result<_, _>>()?;
        s.declare_coords(name, &coords)?;
    }
    Ok(s)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cbn::LiCbn;
    use crate::fixtures::asymmetry_model;
    use crate::kernel::{rat, FiniteKernel, FiniteSpace, Var};

    fn space_of(model: &LiCbn) -> TransitionalSpace {
        TransitionalSpace::new(model.observable_kernel().unwrap())
    }

    #[test]
    fn constant_y_independent_on_probability_spaces() {
        // With a one-point source, a degenerate Y reduces the test to the
        // disintegration identity, which always holds.
        let joint = FiniteKernel::distribution(
            FiniteSpace::new(vec![Var::binary("x"), Var::binary("z")]).unwrap(),
            vec![rat(1, 2), rat(1, 4), rat(1, 8), rat(1, 8)],
        )
        .unwrap();
        let mut s = TransitionalSpace::new(joint);
        s.declare_coords("X", &["x"]).unwrap();
        s.declare_coords("Y", &[]).unwrap();
        s.declare_coords("Z", &["z"]).unwrap();
        let cert = tci_check(&s, "X", "Y", "Z").unwrap();
        assert!(cert.holds);
        assert!(cert.witness_q.is_some());
    }

    #[test]
    fn constant_y_still_binds_the_source() {
        // With inputs present, a degenerate Y does not trivialize the test:
        // the witness must be a single kernel valid for every input value.
        let m = asymmetry_model();
        let mut s = space_of(&m);
        s.declare_coords("X", &["a"]).unwrap();
        s.declare_coords("Y", &[]).unwrap();
        s.declare_coords("Z", &["c"]).unwrap();
        // a = c xor I_a, so the conditional of a given c moves with I_a.
        assert!(!tci_check(&s, "X", "Y", "Z").unwrap().holds);
        // Adding I_a to the conditioning set pins it down.
        s.declare_coords("Z2", &["c", "I_a"]).unwrap();
        assert!(tci_check(&s, "X", "Y", "Z2").unwrap().holds);
    }

    #[test]
    fn asymmetry_forward_holds_reverse_fails() {
        let m = asymmetry_model();
        let mut s = space_of(&m);
        s.declare_coords("A", &["a"]).unwrap();
        s.declare_coords("B", &["b"]).unwrap();
        s.declare_coords("Z", &["c", "I_a"]).unwrap();
        let forward = tci_check(&s, "A", "B", "Z").unwrap();
        assert!(forward.holds);
        let reverse = tci_check(&s, "B", "A", "Z").unwrap();
        assert!(!reverse.holds);
        let v = reverse.violation.expect("violation reported");
        // Two input settings force different point masses for b at the
        // same (c, I_a).
        assert_ne!(v.first.0, v.second.0);
    }

    #[test]
    fn factored_joint_recovers_witness() {
        // K(X,Y‖T) = Q(X) ⊗ P(Y‖T): independence holds and the witness is Q.
        let q = FiniteKernel::distribution(
            FiniteSpace::new(vec![Var::binary("x")]).unwrap(),
            vec![rat(1, 3), rat(2, 3)],
        )
        .unwrap();
        let p = FiniteKernel::new(
            FiniteSpace::new(vec![Var::binary("t")]).unwrap(),
            FiniteSpace::new(vec![Var::binary("y")]).unwrap(),
            vec![rat(1, 4), rat(3, 4), rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let joint = q.product(&p).unwrap();
        let mut s = TransitionalSpace::new(joint);
        s.declare_coords("X", &["x"]).unwrap();
        s.declare_coords("Y", &["y"]).unwrap();
        s.declare_coords("Z", &[]).unwrap();
        let cert = tci_check(&s, "X", "Y", "Z").unwrap();
        assert!(cert.holds);
        let w = cert.witness_q.unwrap();
        assert_eq!(w.mass_at(&[("Z", crate::kernel::STAR)], &[("X", "0")]), rat(1, 3));
    }

    #[test]
    fn witness_reconstructs_joint() {
        // Soundness: Q(X‖Z) ⊗ K(Y,Z‖T) equals K(X,Y,Z‖T) exactly.
        let m = asymmetry_model();
        let mut s = space_of(&m);
        s.declare_coords("A", &["a"]).unwrap();
        s.declare_coords("B", &["b"]).unwrap();
        s.declare_coords("Z", &["c", "I_a"]).unwrap();
        let cert = tci_check(&s, "A", "B", "Z").unwrap();
        let q = cert.witness_q.unwrap();
        let joint = s.joint_law(&["A", "B", "Z"]).unwrap();
        let yz = joint
            .marginalize(&["B".to_string(), "Z".to_string()].into())
            .unwrap();
        assert_eq!(q.product(&yz).unwrap(), joint);
    }

    #[test]
    fn closure_under_postprocessing_and_marginals() {
        let m = asymmetry_model();
        let mut s = space_of(&m);
        s.declare_coords("A", &["a"]).unwrap();
        s.declare_coords("Y2", &["b", "I_b"]).unwrap();
        s.declare_coords("B", &["b"]).unwrap();
        // f(Y2) = first coordinate of (b, I_b).
        s.declare_map("fY", vec!["0".into(), "1".into()], |wc, _| wc[1])
            .unwrap();
        s.declare_coords("Z", &["c", "I_a"]).unwrap();
        let whole = tci_check(&s, "A", "Y2", "Z").unwrap();
        assert!(whole.holds);
        // Post-processing of Y preserves independence.
        assert!(tci_check(&s, "A", "fY", "Z").unwrap().holds);
        // Marginal consequence: dropping a component of Y preserves it.
        assert!(tci_check(&s, "A", "B", "Z").unwrap().holds);
    }

    #[test]
    fn symmetric_version_is_symmetric_and_weaker() {
        let m = asymmetry_model();
        let mut s = space_of(&m);
        s.declare_coords("A", &["a"]).unwrap();
        s.declare_coords("B", &["b"]).unwrap();
        s.declare_coords("Z", &["c", "I_a"]).unwrap();
        assert_eq!(
            tci_symmetric(&s, "A", "B", "Z").unwrap(),
            tci_symmetric(&s, "B", "A", "Z").unwrap()
        );
        // Strictness: symmetric version true while one direction fails.
        assert!(tci_symmetric(&s, "B", "A", "Z").unwrap());
        assert!(!tci_check(&s, "B", "A", "Z").unwrap().holds);
    }

    #[test]
    fn totally_dependent_pair_fails_both_ways() {
        // X and Y both copy T: neither direction factorizes.
        let t_space = FiniteSpace::new(vec![Var::binary("t")]).unwrap();
        let xy = FiniteSpace::new(vec![Var::binary("x"), Var::binary("y")]).unwrap();
        let mut mass = Vec::new();
        for t in 0..2usize {
            for x in 0..2usize {
                for y in 0..2usize {
                    mass.push(if x == t && y == t { rat(1, 1) } else { rat(0, 1) });
                }
            }
        }
        let k = FiniteKernel::new(t_space, xy, mass).unwrap();
        let mut s = TransitionalSpace::new(k);
        s.declare_coords("X", &["x"]).unwrap();
        s.declare_coords("Y", &["y"]).unwrap();
        s.declare_coords("Z", &[]).unwrap();
        assert!(!tci_check(&s, "X", "Y", "Z").unwrap().holds);
        assert!(!tci_check(&s, "Y", "X", "Z").unwrap().holds);
        assert!(!tci_symmetric(&s, "X", "Y", "Z").unwrap());
    }

    fn bernoulli_three() -> FiniteKernel {
        // Three exchangeable draws, success chance 1/4 or 3/4 by parameter.
        let theta = FiniteSpace::new(vec![Var::new("theta", &["1/4", "3/4"])]).unwrap();
        let xs = FiniteSpace::new(vec![
            Var::binary("x1"),
            Var::binary("x2"),
            Var::binary("x3"),
        ])
        .unwrap();
        let mut mass = Vec::new();
        for t in 0..2usize {
            let p1 = if t == 0 { rat(1, 4) } else { rat(3, 4) };
            for point in 0..8usize {
                let ones = (point & 1) + ((point >> 1) & 1) + ((point >> 2) & 1);
                let mut m = rat(1, 1);
                for _ in 0..ones {
                    m *= p1.clone();
                }
                for _ in 0..(3 - ones) {
                    m *= rat(1, 1) - p1.clone();
                }
                mass.push(m);
            }
        }
        FiniteKernel::new(theta, xs, mass).unwrap()
    }

    #[test]
    fn success_count_is_sufficient_for_bernoulli() {
        let model = bernoulli_three();
        let cert = statistic_check(
            &model,
            vec!["0".into(), "1".into(), "2".into(), "3".into()],
            |xs| xs.iter().sum(),
            StatisticMode::Sufficient,
        )
        .unwrap();
        assert!(cert.holds);
        // The first coordinate alone is not sufficient.
        let cert = statistic_check(
            &model,
            vec!["0".into(), "1".into()],
            |xs| xs[0],
            StatisticMode::Sufficient,
        )
        .unwrap();
        assert!(!cert.holds);
    }

    #[test]
    fn identity_is_sufficient_constant_is_ancillary() {
        let model = bernoulli_three();
        let identity = statistic_check(
            &model,
            (0..8).map(|i| i.to_string()).collect(),
            |xs| xs[0] * 4 + xs[1] * 2 + xs[2],
            StatisticMode::Sufficient,
        )
        .unwrap();
        assert!(identity.holds);
        let constant = statistic_check(
            &model,
            vec!["s".into()],
            |_| 0,
            StatisticMode::Ancillary,
        )
        .unwrap();
        assert!(constant.holds);
        // The success count is NOT ancillary: its law moves with θ.
        let count = statistic_check(
            &model,
            vec!["0".into(), "1".into(), "2".into(), "3".into()],
            |xs| xs.iter().sum(),
            StatisticMode::Ancillary,
        )
        .unwrap();
        assert!(!count.holds);
    }

    #[test]
    fn adequacy_on_a_joint_model() {
        // Model P(X, Y ‖ θ) where Y is a deterministic copy of X's count and
        // X is the pair of draws: S = count is adequate for Y.
        let theta = FiniteSpace::new(vec![Var::new("theta", &["1/4", "3/4"])]).unwrap();
        let xy = FiniteSpace::new(vec![
            Var::binary("x1"),
            Var::binary("x2"),
            Var::new("y", &["0", "1", "2"]),
        ])
        .unwrap();
        let mut mass = Vec::new();
        for t in 0..2usize {
            let p1 = if t == 0 { rat(1, 4) } else { rat(3, 4) };
            for x1 in 0..2usize {
                for x2 in 0..2usize {
                    let px = (if x1 == 1 { p1.clone() } else { rat(1, 1) - p1.clone() })
                        * (if x2 == 1 { p1.clone() } else { rat(1, 1) - p1.clone() });
                    for y in 0..3usize {
                        mass.push(if y == x1 + x2 { px.clone() } else { rat(0, 1) });
                    }
                }
            }
        }
        let model = FiniteKernel::new(theta, xy, mass).unwrap();
        let cert = statistic_check(
            &model,
            vec!["0".into(), "1".into(), "2".into()],
            |xs| xs[0] + xs[1],
            StatisticMode::Adequate {
                y_vars: ["y".to_string()].into(),
            },
        )
        .unwrap();
        assert!(cert.holds);
    }

    #[test]
    fn json_declared_space() {
        let m = asymmetry_model();
        let kj = m.observable_kernel().unwrap().to_json();
        let decl: Value = serde_json::from_str(
            r#"{"vars":{"X":["a"],"Y":["b"],"Z":["c","I_a"]}}"#,
        )
        .unwrap();
        let s = space_from_json(&kj, &decl).unwrap();
        assert!(tci_check(&s, "X", "Y", "Z").unwrap().holds);
    }
}
