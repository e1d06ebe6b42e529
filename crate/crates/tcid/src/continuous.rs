//! Closed-form density families and quadrature for the continuous
//! counterexamples.
//!
//! This layer is deliberately small: a handful of one-dimensional families
//! (uniform, Gaussian, Dirac mixtures, and two piecewise-logarithmic shapes)
//! plus a bivariate Gaussian, evaluated numerically. It exists to exhibit,
//! with concrete numbers, three facts the exact layer cannot show:
//! identification need not hold pointwise, back-door adjustment fails
//! without absolute continuity, and conditioning on a shrinking ball
//! recovers the continuous conditional kernel.

use serde::Serialize;
use statrs::distribution::ContinuousCDF;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericError {
    #[error("quadrature failed to converge within {0} subdivisions")]
    NonConvergence(usize),
    #[error("invalid density parameters: {0}")]
    BadDensity(String),
    #[error("correlation must lie strictly inside (-1, 1)")]
    BadCorrelation,
}

/// Adaptive quadrature configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureCfg {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        QuadratureCfg {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 60,
        }
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn integrate(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadratureCfg,
) -> Result<f64, NumericError> {
    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, cfg.abs_tol, cfg.max_subdivisions)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, NumericError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(NumericError::NonConvergence(0));
    }
    let l = adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
    let r = adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
    Ok(l + r)
}

/// Integrates with the interval split at the given points; endpoints that
/// touch a split point are nudged inward so integrable singularities at the
/// split points never get evaluated.
pub fn integrate_split(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadratureCfg,
) -> Result<f64, NumericError> {
    const NUDGE: f64 = 1e-12;
    let mut points = vec![a, b];
    points.extend(splits.iter().copied().filter(|s| *s > a && *s < b));
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut total = 0.0;
    for w in points.windows(2) {
        let (lo, hi) = (w[0] + NUDGE, w[1] - NUDGE);
        if lo < hi {
            total += integrate(f, lo, hi, cfg)?;
        }
    }
    Ok(total)
}

/// The two piecewise-logarithmic density shapes used by the adjustment
/// failure demo: a normalized logarithmic cusp, and the same cusp with its
/// inner part flattened to a plateau plus a second cusp at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PiecewiseForm {
    /// `−ln(2|x − center|)` for `2|x − center| ≤ 1`.
    LogCusp { center: f64 },
    /// `−ln(2|x − center|)` for `1/2 ≤ 2|x − center| ≤ 1`, the constant
    /// `ln 2` for `2|x − center| < 1/2`, plus `−ln(4|x|)` for `2|x| < 1/2`.
    LogCuspFlattened { center: f64 },
}

/// A closed-form one-dimensional law: either absolutely continuous with an
/// evaluable density, or a finite mixture of point masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Density1D {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, var: f64 },
    DiracMixture { points: Vec<f64>, weights: Vec<f64> },
    Piecewise { form: PiecewiseForm },
}

impl Density1D {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, NumericError> {
        if !(lo < hi) {
            return Err(NumericError::BadDensity(format!(
                "uniform needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Density1D::Uniform { lo, hi })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self, NumericError> {
        if !(var > 0.0) {
            return Err(NumericError::BadDensity("variance must be positive".into()));
        }
        Ok(Density1D::Gaussian { mean, var })
    }

    pub fn dirac(point: f64) -> Self {
        Density1D::DiracMixture {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn dirac_mixture(points: Vec<f64>, weights: Vec<f64>) -> Result<Self, NumericError> {
        if points.len() != weights.len()
            || weights.iter().any(|w| *w < 0.0)
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(NumericError::BadDensity(
                "mixture weights must be non-negative and sum to one".into(),
            ));
        }
        Ok(Density1D::DiracMixture { points, weights })
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !matches!(self, Density1D::DiracMixture { .. })
    }

    /// Density value at `x` for absolutely continuous families.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Density1D::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Density1D::Gaussian { mean, var } => {
                let z = x - mean;
                (-(z * z) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
            }
            Density1D::DiracMixture { .. } => 0.0,
            Density1D::Piecewise { form } => form.eval(x),
        }
    }

    /// Support interval (hull) of the law.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density1D::Uniform { lo, hi } => (*lo, *hi),
            Density1D::Gaussian { mean, var } => {
                let s = var.sqrt();
                (mean - 10.0 * s, mean + 10.0 * s)
            }
            Density1D::DiracMixture { points, .. } => {
                let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            Density1D::Piecewise { form } => form.support(),
        }
    }

    /// Points where the density is singular or non-smooth; quadrature
    /// intervals are split here.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density1D::Uniform { lo, hi } => vec![*lo, *hi],
            Density1D::Gaussian { .. } => vec![],
            Density1D::DiracMixture { points, .. } => points.clone(),
            Density1D::Piecewise { form } => form.breakpoints(),
        }
    }

    /// `∫ pdf − 1` for absolutely continuous families, by quadrature.
    pub fn normalization_error(&self, cfg: &QuadratureCfg) -> Result<f64, NumericError> {
        if let Density1D::DiracMixture { weights, .. } = self {
            return Ok(weights.iter().sum::<f64>() - 1.0);
        }
        let (lo, hi) = self.support();
        let mass = integrate_split(&|x| self.pdf(x), lo, hi, &self.breakpoints(), cfg)?;
        Ok(mass - 1.0)
    }

    /// Mass assigned to the interval `[lo, hi]`.
    pub fn mass_on(&self, lo: f64, hi: f64, cfg: &QuadratureCfg) -> Result<f64, NumericError> {
        match self {
            Density1D::DiracMixture { points, weights } => Ok(points
                .iter()
                .zip(weights)
                .filter(|(p, _)| **p >= lo && **p <= hi)
                .map(|(_, w)| w)
                .sum()),
            _ => {
                let (slo, shi) = self.support();
                integrate_split(&|x| self.pdf(x), lo.max(slo), hi.min(shi), &self.breakpoints(), cfg)
            }
        }
    }
}

impl PiecewiseForm {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PiecewiseForm::LogCusp { center } => {
                let u = 2.0 * (x - center).abs();
                if u <= 1.0 {
                    -u.ln()
                } else {
                    0.0
                }
            }
            PiecewiseForm::LogCuspFlattened { center } => {
                let u = 2.0 * (x - center).abs();
                let mut v = if (0.5..=1.0).contains(&u) {
                    -u.ln()
                } else if u < 0.5 {
                    2f64.ln()
                } else {
                    0.0
                };
                if 2.0 * x.abs() < 0.5 {
                    v += -(4.0 * x.abs()).ln();
                }
                v
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            PiecewiseForm::LogCusp { center } => (center - 0.5, center + 0.5),
            PiecewiseForm::LogCuspFlattened { center } => {
                ((center - 0.5).min(-0.25), (center + 0.5).max(0.25))
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PiecewiseForm::LogCusp { center } => {
                vec![center - 0.5, *center, center + 0.5]
            }
            PiecewiseForm::LogCuspFlattened { center } => vec![
                center - 0.5,
                center - 0.25,
                *center,
                center + 0.25,
                center + 0.5,
                -0.25,
                0.0,
                0.25,
            ],
        }
    }
}

/// Total variation distance between two one-dimensional laws.
///
/// A purely atomic law and an absolutely continuous one are mutually
/// singular, so their distance is exactly one; two atomic laws compare
/// their weights; two absolutely continuous laws integrate `|f − g|/2`.
pub fn total_variation(
    p: &Density1D,
    q: &Density1D,
    cfg: &QuadratureCfg,
) -> Result<f64, NumericError> {
    use Density1D::DiracMixture;
    match (p, q) {
        (
            DiracMixture {
                points: pp,
                weights: pw,
            },
            DiracMixture {
                points: qp,
                weights: qw,
            },
        ) => {
            let mut atoms: Vec<f64> = pp.iter().chain(qp).cloned().collect();
            atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            atoms.dedup();
            let weight = |points: &[f64], weights: &[f64], x: f64| -> f64 {
                points
                    .iter()
                    .zip(weights)
                    .filter(|(p, _)| **p == x)
                    .map(|(_, w)| w)
                    .sum()
            };
            Ok(0.5
                * atoms
                    .iter()
                    .map(|&x| (weight(pp, pw, x) - weight(qp, qw, x)).abs())
                    .sum::<f64>())
        }
        (DiracMixture { .. }, other) | (other, DiracMixture { .. }) => {
            debug_assert!(other.is_absolutely_continuous());
            Ok(1.0)
        }
        (p, q) => {
            let (plo, phi) = p.support();
            let (qlo, qhi) = q.support();
            let mut splits = p.breakpoints();
            splits.extend(q.breakpoints());
            let f = |x: f64| (p.pdf(x) - q.pdf(x)).abs();
            let v = integrate_split(&f, plo.min(qlo), phi.max(qhi), &splits, cfg)?;
            Ok(0.5 * v)
        }
    }
}

// ---------------------------------------------------------------------------
// Demo: no pointwise identification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct NoPointwiseCase {
    pub label: String,
    pub x_a: f64,
    /// Chosen so the interventional law is an atom while the conditional
    /// version is uniform.
    pub interventional_atomic: bool,
    pub tv_distance: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoPointwiseReport {
    pub cases: Vec<NoPointwiseCase>,
}

/// Two-node model `a → b` where the mechanism of `b` is a uniform scaling
/// on irrational inputs but a point mass on rationals. The interventional
/// law at a rational point is the atom, while every conditional version may
/// take the uniform value there: the two laws sit at total variation one,
/// so no pointwise identification statement can hold.
pub fn demo_no_pointwise(cfg: &QuadratureCfg) -> Result<NoPointwiseReport, NumericError> {
    let mut cases = Vec::new();
    for (label, x_a) in [("1/2", 0.5), ("1/3", 1.0 / 3.0), ("3/4", 0.75)] {
        let interventional = Density1D::dirac(x_a);
        let conditional = Density1D::uniform(0.0, x_a)?;
        cases.push(NoPointwiseCase {
            label: label.to_string(),
            x_a,
            interventional_atomic: true,
            tv_distance: total_variation(&interventional, &conditional, cfg)?,
            boundary: false,
        });
    }
    // At an irrational point both laws are the same uniform.
    let x_a = std::f64::consts::SQRT_2 / 2.0;
    let u = Density1D::uniform(0.0, x_a)?;
    cases.push(NoPointwiseCase {
        label: "√2/2".to_string(),
        x_a,
        interventional_atomic: false,
        tv_distance: total_variation(&u, &u, cfg)?,
        boundary: false,
    });
    // The boundary point 0: both laws degenerate to the atom at zero.
    let d0 = Density1D::dirac(0.0);
    cases.push(NoPointwiseCase {
        label: "0".to_string(),
        x_a: 0.0,
        interventional_atomic: true,
        tv_distance: total_variation(&d0, &d0, cfg)?,
        boundary: true,
    });
    Ok(NoPointwiseReport { cases })
}

// ---------------------------------------------------------------------------
// Demo: failure of back-door adjustment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BackdoorFailureReport {
    pub x_a: f64,
    pub interventional_integral: f64,
    pub adjusted_integral: f64,
    pub l1_distance: f64,
    /// Largest pointwise difference on the region where the two densities
    /// share the same logarithmic branch.
    pub shared_region_max_diff: f64,
    pub abs_tol: f64,
}

/// Evaluates the interventional outcome density and the back-door adjusted
/// density of the threshold triangle at treatment value `x_a`, confirming
/// both normalize to one while disagreeing in L1.
pub fn demo_backdoor_failure(
    x_a: f64,
    cfg: &QuadratureCfg,
) -> Result<BackdoorFailureReport, NumericError> {
    if !(x_a > 0.0 && x_a <= 1.0) {
        return Err(NumericError::BadDensity(
            "treatment value must lie in (0, 1]".into(),
        ));
    }
    let f_do = Density1D::Piecewise {
        form: PiecewiseForm::LogCusp { center: x_a },
    };
    let f_adj = Density1D::Piecewise {
        form: PiecewiseForm::LogCuspFlattened { center: x_a },
    };
    let interventional_integral = f_do.normalization_error(cfg)? + 1.0;
    let adjusted_integral = f_adj.normalization_error(cfg)? + 1.0;

    let mut splits = f_do.breakpoints();
    splits.extend(f_adj.breakpoints());
    let (lo1, hi1) = f_do.support();
    let (lo2, hi2) = f_adj.support();
    let l1 = integrate_split(
        &|x| (f_do.pdf(x) - f_adj.pdf(x)).abs(),
        lo1.min(lo2),
        hi1.max(hi2),
        &splits,
        cfg,
    )?;

    // On { 1/2 ≤ 2|x − x_a| ≤ 1 } minus the origin cusp both densities are
    // the same logarithmic branch.
    let mut shared_max: f64 = 0.0;
    for i in 0..200 {
        let u = 0.25 + 0.25 * (i as f64 + 0.5) / 200.0;
        for x in [x_a - 2.0 * u / 2.0, x_a + 2.0 * u / 2.0] {
            if 2.0 * x.abs() < 0.5 {
                continue;
            }
            shared_max = shared_max.max((f_do.pdf(x) - f_adj.pdf(x)).abs());
        }
    }
    Ok(BackdoorFailureReport {
        x_a,
        interventional_integral,
        adjusted_integral,
        l1_distance: l1,
        shared_region_max_diff: shared_max,
        abs_tol: cfg.abs_tol,
    })
}

// ---------------------------------------------------------------------------
// Demo: positivity is not necessary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    /// Largest pointwise difference between the observational conditional
    /// density and the interventional one over the evaluation grid.
    pub grid_max_diff: f64,
    /// Mass the post-intervention law of the intermediate node assigns to
    /// an interval far outside its support.
    pub mass_far_outside: f64,
    /// Monte Carlo check that samples reproduce the conditional law:
    /// characteristic-function deviation, sup over frequencies and bins.
    pub mc_sup_deviation: f64,
    pub mc_draws: usize,
    pub mc_seed: u64,
    pub bins_used: usize,
}

/// The four-node model `u → b → c ← u`, `c → a` with `u` uniform, `b`
/// Gaussian around `u`, `c = u·b` and `a` Gaussian around `c`: conditioning
/// and intervening on `b` give the same Gaussian conditional for `a` even
/// though the intervened law of `c` has no strictly positive density.
pub fn demo_positivity_not_necessary(
    cfg: &QuadratureCfg,
    seed: u64,
    draws: usize,
) -> Result<PositivityReport, NumericError> {
    use rand::Rng;

    // (i) The conditional density of a given (b, c) and the interventional
    // conditional of a given c under do(b) are the same Gaussian in closed
    // form; evaluate both expressions over a grid.
    let mut grid_max_diff: f64 = 0.0;
    for bi in -2..=2 {
        for ci in -6..=6 {
            let x_c = ci as f64 * 0.5;
            for ai in -6..=6 {
                let x_a = ai as f64 * 0.5;
                let observational =
                    (-(x_a - x_c) * (x_a - x_c) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let interventional = Density1D::gaussian(x_c, 1.0)?.pdf(x_a);
                let _ = bi;
                grid_max_diff = grid_max_diff.max((observational - interventional).abs());
            }
        }
    }

    // (ii) After do(b = 1), the law of c is uniform on [0, 1]: no mass far
    // outside, hence no strictly positive density anywhere on the line.
    let c_do = Density1D::uniform(0.0, 1.0)?;
    let mass_far_outside = c_do.mass_on(2.0, 3.0, cfg)?;

    // (iii) Monte Carlo from the generative model. Conditionally on c, the
    // outcome is Gaussian around c, so within any c-bin the characteristic
    // function of a must equal the bin's characteristic function of c
    // damped by the Gaussian factor.
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let n_bins = 8usize;
    let (bin_lo, bin_hi) = (-0.5f64, 1.5f64);
    let freqs = [0.5f64, 1.0];
    let mut sums = vec![[0.0f64; 4]; n_bins * freqs.len()];
    let mut counts = vec![0usize; n_bins];
    for _ in 0..draws {
        let u: f64 = rng.gen();
        let b = u + rng.sample(normal);
        let c = u * b;
        let a = c + rng.sample(normal);
        if c < bin_lo || c >= bin_hi {
            continue;
        }
        let bin = ((c - bin_lo) / (bin_hi - bin_lo) * n_bins as f64) as usize;
        counts[bin] += 1;
        for (fi, t) in freqs.iter().enumerate() {
            let cell = &mut sums[bin * freqs.len() + fi];
            cell[0] += (t * a).cos();
            cell[1] += (t * a).sin();
            cell[2] += (t * c).cos();
            cell[3] += (t * c).sin();
        }
    }
    let mut sup_dev: f64 = 0.0;
    let mut bins_used = 0usize;
    for bin in 0..n_bins {
        if counts[bin] < 1000 {
            continue;
        }
        bins_used += 1;
        let n = counts[bin] as f64;
        for (fi, t) in freqs.iter().enumerate() {
            let cell = &sums[bin * freqs.len() + fi];
            let damp = (-t * t / 2.0).exp();
            let re = cell[0] / n - damp * cell[2] / n;
            let im = cell[1] / n - damp * cell[3] / n;
            sup_dev = sup_dev.max((re * re + im * im).sqrt());
        }
    }
    Ok(PositivityReport {
        grid_max_diff,
        mass_far_outside,
        mc_sup_deviation: sup_dev,
        mc_draws: draws,
        mc_seed: seed,
        bins_used,
    })
}

// ---------------------------------------------------------------------------
// Shrinking-ball conditioning
// ---------------------------------------------------------------------------

/// A strictly positive continuous two-dimensional law; currently the
/// standard bivariate Gaussian family parameterized by its correlation.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Joint2D {
    BivariateGaussian { rho: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkingBallEntry {
    pub delta: f64,
    /// Sup over the fixed test functions of the difference between the
    /// ball-conditioned expectation and the closed-form conditional one.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkingBallReport {
    pub rho: f64,
    pub y: f64,
    pub conditional_mean: f64,
    pub conditional_var: f64,
    pub entries: Vec<ShrinkingBallEntry>,
}

/// The fixed family of bounded Lipschitz test functions: clipped
/// polynomials and sigmoids.
fn test_functions() -> Vec<Box<dyn Fn(f64) -> f64 + Sync>> {
    let clamp = |x: f64, lo: f64, hi: f64| x.max(lo).min(hi);
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    vec![
        Box::new(move |x| clamp(x, -3.0, 3.0)),
        Box::new(move |x| clamp(x * x, 0.0, 9.0)),
        Box::new(move |x| clamp(x * x * x / 3.0, -9.0, 9.0)),
        Box::new(move |x| clamp(x.abs(), 0.0, 3.0)),
        Box::new(move |x| clamp(x, 0.0, 3.0)),
        Box::new(move |x| clamp(-x, 0.0, 3.0)),
        Box::new(move |x| sigmoid(x)),
        Box::new(move |x| sigmoid(2.0 * (x - 1.0))),
        Box::new(move |x| sigmoid(2.0 * (x + 1.0))),
        Box::new(move |x| sigmoid(0.5 * x)),
    ]
}

/// Conditions the joint law on `Y ∈ [y − δ, y + δ]` for each `δ`, compares
/// expectations of the test functions against the closed-form conditional,
/// and reports the error sequence.
pub fn shrinking_ball_conditional(
    joint: Joint2D,
    y: f64,
    deltas: &[f64],
    cfg: &QuadratureCfg,
) -> Result<ShrinkingBallReport, NumericError> {
    let Joint2D::BivariateGaussian { rho } = joint;
    if !(rho.abs() < 1.0) {
        return Err(NumericError::BadCorrelation);
    }
    let s = (1.0 - rho * rho).sqrt();
    let cond_mean = rho * y;
    let cond_var = 1.0 - rho * rho;
    let std_normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let phis = test_functions();

    // For fixed x, the y-slice integral over the ball has a closed form in
    // the Gaussian cdf, which leaves one-dimensional quadrature in x.
    let slice = |x: f64, delta: f64| -> f64 {
        let std_pdf = (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let hi = (y + delta - rho * x) / s;
        let lo = (y - delta - rho * x) / s;
        std_pdf * (std_normal.cdf(hi) - std_normal.cdf(lo))
    };
    let cond_pdf = |x: f64| -> f64 {
        let z = x - cond_mean;
        (-(z * z) / (2.0 * cond_var)).exp() / (2.0 * std::f64::consts::PI * cond_var).sqrt()
    };

    let (lo, hi) = (-8.0f64, 8.0f64);
    let mut entries = Vec::new();
    for &delta in deltas {
        let mass = integrate(&|x| slice(x, delta), lo, hi, cfg)?;
        let mut err: f64 = 0.0;
        for phi in &phis {
            let ball = integrate(&|x| phi(x) * slice(x, delta), lo, hi, cfg)? / mass;
            let exact = integrate(&|x| phi(x) * cond_pdf(x), lo, hi, cfg)?;
            err = err.max((ball - exact).abs());
        }
        entries.push(ShrinkingBallEntry { delta, error: err });
    }
    Ok(ShrinkingBallReport {
        rho,
        y,
        conditional_mean: cond_mean,
        conditional_var: cond_var,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureCfg {
        QuadratureCfg::default()
    }

    #[test]
    fn densities_normalize() {
        let cases = [
            Density1D::uniform(0.0, 0.5).unwrap(),
            Density1D::gaussian(0.3, 1.0).unwrap(),
            Density1D::Piecewise {
                form: PiecewiseForm::LogCusp { center: 0.25 },
            },
            Density1D::Piecewise {
                form: PiecewiseForm::LogCuspFlattened { center: 0.25 },
            },
            Density1D::Piecewise {
                form: PiecewiseForm::LogCuspFlattened { center: 1.0 },
            },
        ];
        for d in cases {
            let err = d.normalization_error(&cfg()).unwrap();
            assert!(err.abs() < 1e-9, "{d:?} off by {err}");
        }
    }

    #[test]
    fn quadrature_knows_polynomials() {
        let v = integrate(&|x| x * x, 0.0, 1.0, &cfg()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let v = integrate_split(&|x| x.abs(), -1.0, 1.0, &[0.0], &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tv_distance_cases() {
        let c = cfg();
        let atom = Density1D::dirac(0.5);
        let unif = Density1D::uniform(0.0, 0.5).unwrap();
        assert_eq!(total_variation(&atom, &unif, &c).unwrap(), 1.0);
        assert_eq!(total_variation(&atom, &atom, &c).unwrap(), 0.0);
        let u2 = Density1D::uniform(0.0, 1.0).unwrap();
        let tv = total_variation(&unif, &u2, &c).unwrap();
        assert!((tv - 0.5).abs() < 1e-9, "{tv}");
    }

    #[test]
    fn no_pointwise_demo_values() {
        let rep = demo_no_pointwise(&cfg()).unwrap();
        assert_eq!(rep.cases.len(), 5);
        for case in &rep.cases[..3] {
            assert_eq!(case.tv_distance, 1.0, "{}", case.label);
        }
        assert_eq!(rep.cases[3].tv_distance, 0.0);
        assert_eq!(rep.cases[4].tv_distance, 0.0);
        assert!(rep.cases[4].boundary);
    }

    #[test]
    fn backdoor_failure_demo() {
        for x_a in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let rep = demo_backdoor_failure(x_a, &cfg()).unwrap();
            assert!((rep.interventional_integral - 1.0).abs() < 1e-6, "{rep:?}");
            assert!((rep.adjusted_integral - 1.0).abs() < 1e-6, "{rep:?}");
            assert!(rep.l1_distance >= 0.05, "x_a={x_a}: {}", rep.l1_distance);
            assert!(rep.shared_region_max_diff < 1e-12);
        }
        assert!(demo_backdoor_failure(0.0, &cfg()).is_err());
    }

    #[test]
    fn positivity_demo_deterministic() {
        let rep = demo_positivity_not_necessary(&cfg(), 42, 200_000).unwrap();
        assert!(rep.grid_max_diff < 1e-12);
        assert_eq!(rep.mass_far_outside, 0.0);
        assert!(rep.mc_sup_deviation < 0.05, "{}", rep.mc_sup_deviation);
        assert!(rep.bins_used >= 4);
        let rep2 = demo_positivity_not_necessary(&cfg(), 42, 200_000).unwrap();
        assert_eq!(rep.mc_sup_deviation, rep2.mc_sup_deviation);
    }

    #[test]
    fn shrinking_ball_independent_case() {
        let rep = shrinking_ball_conditional(
            Joint2D::BivariateGaussian { rho: 0.0 },
            1.0,
            &[1e-2],
            &cfg(),
        )
        .unwrap();
        assert!((rep.conditional_mean - 0.0).abs() < 1e-15);
        assert!(rep.entries[0].error < 1e-3);
    }

    #[test]
    fn shrinking_ball_correlated_case() {
        let rep = shrinking_ball_conditional(
            Joint2D::BivariateGaussian { rho: 0.5 },
            1.0,
            &[1e-1, 1e-2, 1e-3],
            &cfg(),
        )
        .unwrap();
        assert!((rep.conditional_mean - 0.5).abs() < 1e-15);
        assert!((rep.conditional_var - 0.75).abs() < 1e-15);
        assert!(rep.entries[1].error < 1e-3);
        // Errors decrease along the delta sequence, with 10% slack; below
        // the quadrature noise floor the comparison is vacuous.
        for w in rep.entries.windows(2) {
            assert!(
                w[1].error <= (w[0].error * 1.1).max(1e-6),
                "{:?}",
                rep.entries
            );
        }
        assert!(matches!(
            shrinking_ball_conditional(
                Joint2D::BivariateGaussian { rho: 1.5 },
                0.0,
                &[1e-2],
                &cfg()
            ),
            Err(NumericError::BadCorrelation)
        ));
    }
}
