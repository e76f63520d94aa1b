//! Transmission-time distributions attached to edges.
//!
//! All variants are sampled by inverse transform from exactly one uniform
//! draw, so a fixed uniform stream replays the same delays. Delays are zero
//! for negative arguments and the survival function starts at one.
//!
//! The nonparametric variant defines its hazard as a non-negative sum of
//! Gaussian kernels. Its cumulative hazard has a closed form in terms of
//! `erf`, but the total hazard mass is finite, so the distribution is
//! defective: with probability `exp(-H(horizon))` the transmission never
//! happens and sampling returns `f64::INFINITY`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Multiple of the bandwidth past the last kernel center where the
/// nonparametric hazard is truncated.
pub const KERNEL_HORIZON_BANDWIDTHS: f64 = 64.0;

#[derive(Clone, Debug, PartialEq)]
pub enum TransmissionModel {
    /// Density `rate * exp(-rate * t)`.
    Exponential { rate: f64 },
    /// Density `alpha * t * exp(-alpha * t^2 / 2)`.
    Rayleigh { alpha: f64 },
    /// Density `(shape/scale) (t/scale)^(shape-1) exp(-(t/scale)^shape)`.
    Weibull { scale: f64, shape: f64 },
    KernelHazard(Arc<KernelHazard>),
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Model(format!("{what} must be positive and finite, got {x}")))
    }
}

/// `-ln(1 - u)`, the unit-exponential quantile.
#[inline]
fn unit_exp_quantile(u: f64) -> f64 {
    -(-u).ln_1p()
}

impl TransmissionModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        check_positive("exponential rate", rate)?;
        Ok(TransmissionModel::Exponential { rate })
    }

    pub fn rayleigh(alpha: f64) -> Result<Self> {
        check_positive("rayleigh alpha", alpha)?;
        Ok(TransmissionModel::Rayleigh { alpha })
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        check_positive("weibull scale", scale)?;
        check_positive("weibull shape", shape)?;
        Ok(TransmissionModel::Weibull { scale, shape })
    }

    pub fn kernel_hazard(kernel: KernelHazard) -> Self {
        TransmissionModel::KernelHazard(Arc::new(kernel))
    }

    /// Name used in the graph-TSV format.
    pub fn name(&self) -> &'static str {
        match self {
            TransmissionModel::Exponential { .. } => "exp",
            TransmissionModel::Rayleigh { .. } => "rayleigh",
            TransmissionModel::Weibull { .. } => "weibull",
            TransmissionModel::KernelHazard(_) => "kernelhazard",
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            TransmissionModel::Exponential { rate } => rate * (-rate * t).exp(),
            TransmissionModel::Rayleigh { alpha } => alpha * t * (-alpha * t * t / 2.0).exp(),
            TransmissionModel::Weibull { scale, shape } => {
                let z = t / scale;
                if z == 0.0 {
                    // limit of z^(shape-1) at 0
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    };
                }
                (shape / scale) * z.powf(shape - 1.0) * (-z.powf(*shape)).exp()
            }
            TransmissionModel::KernelHazard(k) => k.hazard(t) * k.survival(t),
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-self.cumulative_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        -(-self.cumulative_hazard(t)).exp_m1()
    }

    pub fn hazard(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            TransmissionModel::Exponential { rate } => *rate,
            TransmissionModel::Rayleigh { alpha } => alpha * t,
            TransmissionModel::Weibull { scale, shape } => {
                (shape / scale) * (t / scale).powf(shape - 1.0)
            }
            TransmissionModel::KernelHazard(k) => k.hazard(t),
        }
    }

    /// `H(t) = -ln S(t)`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            TransmissionModel::Exponential { rate } => rate * t,
            TransmissionModel::Rayleigh { alpha } => alpha * t * t / 2.0,
            TransmissionModel::Weibull { scale, shape } => (t / scale).powf(*shape),
            TransmissionModel::KernelHazard(k) => k.cumulative_hazard(t),
        }
    }

    /// Inverse CDF at `u` in `[0, 1)`. Returns `f64::INFINITY` when `u` falls
    /// in the never-transmits mass of a defective distribution.
    pub fn quantile(&self, u: f64) -> f64 {
        let h = unit_exp_quantile(u);
        match self {
            TransmissionModel::Exponential { rate } => h / rate,
            TransmissionModel::Rayleigh { alpha } => (2.0 * h / alpha).sqrt(),
            TransmissionModel::Weibull { scale, shape } => scale * h.powf(1.0 / shape),
            TransmissionModel::KernelHazard(k) => k.invert_cumulative_hazard(h),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Expected delay, `None` when it is infinite.
    pub fn mean(&self) -> Option<f64> {
        match self {
            TransmissionModel::Exponential { rate } => Some(1.0 / rate),
            TransmissionModel::Rayleigh { alpha } => Some((FRAC_PI_2 / alpha).sqrt()),
            TransmissionModel::Weibull { scale, shape } => {
                Some(scale * libm::tgamma(1.0 + 1.0 / shape))
            }
            TransmissionModel::KernelHazard(_) => None,
        }
    }
}

impl fmt::Display for TransmissionModel {
    /// Parameters in graph-TSV order. The kernel variant has no inline form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransmissionModel::Exponential { rate } => write!(f, "exp\t{rate}"),
            TransmissionModel::Rayleigh { alpha } => write!(f, "rayleigh\t{alpha}"),
            TransmissionModel::Weibull { scale, shape } => write!(f, "weibull\t{scale}\t{shape}"),
            TransmissionModel::KernelHazard(_) => write!(f, "kernelhazard"),
        }
    }
}

/// Hazard `h(t) = sum_l w_l exp(-(t - c_l)^2 / (2 s^2))` for `t > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelHazard {
    centers: Vec<f64>,
    weights: Vec<f64>,
    bandwidth: f64,
    horizon: f64,
    horizon_hazard: f64,
}

impl KernelHazard {
    pub fn new(centers: Vec<f64>, weights: Vec<f64>, bandwidth: f64) -> Result<Self> {
        check_positive("kernel bandwidth", bandwidth)?;
        if centers.is_empty() || centers.len() != weights.len() {
            return Err(Error::Model(format!(
                "kernel hazard needs matching non-empty centers and weights, got {} and {}",
                centers.len(),
                weights.len()
            )));
        }
        if let Some(c) = centers.iter().find(|c| !c.is_finite()) {
            return Err(Error::Model(format!("kernel center {c} is not finite")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Model(format!("kernel weight {w} is negative or not finite")));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::Model("kernel hazard needs at least one positive weight".into()));
        }
        let last = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let horizon = last.max(0.0) + KERNEL_HORIZON_BANDWIDTHS * bandwidth;
        let mut k = KernelHazard {
            centers,
            weights,
            bandwidth,
            horizon,
            horizon_hazard: 0.0,
        };
        k.horizon_hazard = k.raw_cumulative_hazard(horizon);
        Ok(k)
    }

    /// Parses a kernel-spec file: a `bandwidth <s>` line followed by
    /// `<center> <weight>` lines. Blank lines and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut bandwidth = None;
        let mut centers = Vec::new();
        let mut weights = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if bandwidth.is_none() {
                let tok = match toks.as_slice() {
                    ["bandwidth", s] | [s] => *s,
                    _ => return Err(err(lineno, format!("expected `bandwidth <s>`, got `{line}`"))),
                };
                let s: f64 = tok
                    .parse()
                    .map_err(|_| err(lineno, format!("bad bandwidth `{tok}`")))?;
                bandwidth = Some(s);
                continue;
            }
            let [c, w] = toks.as_slice() else {
                return Err(err(lineno, format!("expected `<center> <weight>`, got `{line}`")));
            };
            centers.push(c.parse().map_err(|_| err(lineno, format!("bad center `{c}`")))?);
            weights.push(w.parse().map_err(|_| err(lineno, format!("bad weight `{w}`")))?);
        }
        let bandwidth = bandwidth.ok_or_else(|| err(1, "missing bandwidth line".into()))?;
        KernelHazard::new(centers, weights, bandwidth)
            .map_err(|e| err(0, e.to_string()))
    }

    pub fn to_spec_string(&self) -> String {
        let mut out = format!("bandwidth {}\n", self.bandwidth);
        for (c, w) in self.centers.iter().zip(&self.weights) {
            out.push_str(&format!("{c} {w}\n"));
        }
        out
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Truncation point; survival mass past it is never transmitted.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let two_s2 = 2.0 * self.bandwidth * self.bandwidth;
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (-(t - c) * (t - c) / two_s2).exp())
            .sum()
    }

    fn raw_cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let s = self.bandwidth;
        let scale = s * (PI / 2.0).sqrt();
        let denom = s * SQRT_2;
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * scale * (libm::erf((t - c) / denom) - libm::erf(-c / denom)))
            .sum()
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    /// Hazard is treated as zero past the horizon.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        self.raw_cumulative_hazard(t.min(self.horizon))
    }

    /// Smallest `t` with `H(t) = target`, by bisection on the monotone
    /// cumulative hazard.
    fn invert_cumulative_hazard(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        if target > self.horizon_hazard {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0f64, self.horizon);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.raw_cumulative_hazard(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson rule, independent of the closed forms under test.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    fn gaussian_kernel() -> TransmissionModel {
        TransmissionModel::kernel_hazard(KernelHazard::new(vec![1.5], vec![0.8], 0.5).unwrap())
    }

    /// Kolmogorov-Smirnov distance between sorted draws and a CDF.
    fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                let f = cdf(*x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_values() {
        let w = TransmissionModel::weibull(1.0, 1.0).unwrap();
        assert!((w.pdf(0.0) - 1.0).abs() < 1e-15);
        let e = TransmissionModel::exponential(2.0).unwrap();
        assert!((e.pdf(1.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((e.pdf(1.0) - 0.27067).abs() < 1e-5);
        let e1 = TransmissionModel::exponential(1.0).unwrap();
        assert!((e1.survival(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn negative_time_has_zero_density_and_unit_survival() {
        for m in [
            TransmissionModel::exponential(1.0).unwrap(),
            TransmissionModel::rayleigh(2.0).unwrap(),
            TransmissionModel::weibull(3.0, 0.5).unwrap(),
            gaussian_kernel(),
        ] {
            assert_eq!(m.pdf(-0.1), 0.0);
            assert_eq!(m.survival(0.0), 1.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TransmissionModel::exponential(0.0).is_err());
        assert!(TransmissionModel::rayleigh(-1.0).is_err());
        assert!(TransmissionModel::weibull(1.0, f64::NAN).is_err());
        assert!(KernelHazard::new(vec![1.0], vec![0.0], 1.0).is_err());
        assert!(KernelHazard::new(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(KernelHazard::new(vec![1.0, 2.0], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn parametric_densities_integrate_to_one() {
        for m in [
            TransmissionModel::exponential(1.3).unwrap(),
            TransmissionModel::rayleigh(0.7).unwrap(),
            TransmissionModel::weibull(2.0, 1.7).unwrap(),
        ] {
            let mass = simpson(|t| m.pdf(t), 0.0, 60.0, 200_000);
            assert!((mass - 1.0).abs() < 1e-6, "{m:?}: {mass}");
        }
    }

    #[test]
    fn weibull_survival_matches_quadrature() {
        let m = TransmissionModel::weibull(1.7, 2.3).unwrap();
        for i in 0..=40 {
            let t = i as f64 * 0.1;
            let by_quad = 1.0 - simpson(|x| m.pdf(x), 0.0, t, 4_000);
            assert!((m.survival(t) - by_quad).abs() < 1e-6, "t={t}");
            assert!((m.survival(t) - (-(t / 1.7f64).powf(2.3)).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_pdf_is_hazard_times_quadrature_survival() {
        let m = gaussian_kernel();
        for i in 0..=60 {
            let t = i as f64 * 0.1;
            let cum = simpson(|x| m.hazard(x), 0.0, t, 4_000);
            let expected = m.hazard(t) * (-cum).exp();
            assert!((m.pdf(t) - expected).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn kernel_defective_mass_accounts_for_missing_density() {
        let m = gaussian_kernel();
        let TransmissionModel::KernelHazard(k) = &m else { unreachable!() };
        let mass = simpson(|t| m.pdf(t), 0.0, k.horizon(), 200_000);
        assert!((mass - (1.0 - m.survival(k.horizon()))).abs() < 1e-6);
    }

    #[test]
    fn survival_is_non_increasing() {
        for m in [
            TransmissionModel::rayleigh(0.7).unwrap(),
            TransmissionModel::weibull(0.4, 0.3).unwrap(),
            gaussian_kernel(),
        ] {
            let mut prev = 1.0;
            for i in 0..2_000 {
                let s = m.survival(i as f64 * 0.01);
                assert!(s <= prev);
                prev = s;
            }
        }
    }

    #[test]
    fn weibull_shape_one_equals_exponential_draw_for_draw() {
        let w = TransmissionModel::weibull(1.0, 1.0).unwrap();
        let e = TransmissionModel::exponential(1.0).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000 {
            assert_eq!(w.sample(&mut r1), e.sample(&mut r2));
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for m in [
            TransmissionModel::exponential(0.3).unwrap(),
            TransmissionModel::rayleigh(4.0).unwrap(),
            TransmissionModel::weibull(5.0, 0.6).unwrap(),
            gaussian_kernel(),
        ] {
            for u in [0.01, 0.2, 0.5] {
                let t = m.quantile(u);
                assert!((m.cdf(t) - u).abs() < 1e-9, "{m:?} u={u}");
            }
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let m = TransmissionModel::exponential(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean = (0..n).map(|_| m.sample(&mut rng)).sum::<f64>() / n as f64;
        // 3 standard errors of the mean; sd = 1
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn samples_match_cdf_ks() {
        for m in [
            TransmissionModel::exponential(2.0).unwrap(),
            TransmissionModel::rayleigh(0.5).unwrap(),
            TransmissionModel::weibull(3.0, 2.5).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let xs: Vec<f64> = (0..100_000).map(|_| m.sample(&mut rng)).collect();
            let d = ks(xs, |t| m.cdf(t));
            assert!(d < 0.01, "{m:?}: KS {d}");
        }
    }

    #[test]
    fn kernel_samples_match_quadrature_survival() {
        let m = gaussian_kernel();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
        assert!(xs.iter().any(|x| x.is_infinite()));
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut worst = 0.0f64;
        for i in 0..=50 {
            let t = i as f64 * 0.1;
            let survived = n - xs.partition_point(|x| *x <= t);
            let empirical = survived as f64 / n as f64;
            let expected = (-simpson(|x| m.hazard(x), 0.0, t, 2_000)).exp();
            worst = worst.max((empirical - expected).abs());
        }
        assert!(worst < 0.02, "sup gap {worst}");
    }

    #[test]
    fn kernel_spec_round_trip() {
        let k = KernelHazard::new(vec![0.5, 2.0], vec![1.0, 0.25], 0.3).unwrap();
        let back = KernelHazard::parse(&k.to_spec_string(), Path::new("k.txt")).unwrap();
        assert_eq!(k, back);
        let err = KernelHazard::parse("bandwidth 1\n1.0\n", Path::new("k.txt")).unwrap_err();
        assert!(err.to_string().contains("k.txt:2"));
    }
}
