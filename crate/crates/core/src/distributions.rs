//! Circular uniform, von Mises, cardioid and wrapped Cauchy distributions:
//! densities and exact samplers.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special;

const LN_TAU: f64 = 1.837_877_066_409_345_5;

/// An angle in radians, always stored in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps any finite real into `[0, 2 pi)` with a floored modulo.
    pub fn new(radians: f64) -> Result<Self> {
        if !radians.is_finite() {
            return domain(format!("angle must be finite, got {radians}"));
        }
        Ok(Self::wrap(radians))
    }

    pub fn wrap(radians: f64) -> Self {
        let r = radians.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2 pi for tiny negative inputs
        Angle(if r >= TAU { 0.0 } else { r })
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Angle::new(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "uniform")]
    CircularUniform,
    #[serde(rename = "vm")]
    VonMises,
    #[serde(rename = "cardioid")]
    Cardioid,
    #[serde(rename = "wc")]
    WrappedCauchy,
}

impl Family {
    /// Concentration support as `(low, high)`; the upper end is excluded.
    pub fn concentration_support(self) -> (f64, f64) {
        match self {
            Family::CircularUniform => (0.0, 0.0),
            Family::VonMises => (0.0, f64::INFINITY),
            Family::Cardioid => (0.0, 0.5),
            Family::WrappedCauchy => (0.0, 1.0),
        }
    }

    pub fn contains_concentration(self, c: f64) -> bool {
        let (lo, hi) = self.concentration_support();
        match self {
            Family::CircularUniform => true,
            _ => c.is_finite() && c >= lo && c < hi,
        }
    }

    /// Map from the concentration support onto the real line:
    /// `ln kappa`, `logit(2 ell)` or `logit rho`.
    pub fn to_unconstrained(self, c: f64) -> f64 {
        match self {
            Family::CircularUniform => 0.0,
            Family::VonMises => c.ln(),
            Family::Cardioid => (2.0 * c).ln() - (1.0 - 2.0 * c).ln(),
            Family::WrappedCauchy => c.ln() - (1.0 - c).ln(),
        }
    }

    pub fn from_unconstrained(self, eta: f64) -> f64 {
        match self {
            Family::CircularUniform => 0.0,
            Family::VonMises => eta.exp(),
            Family::Cardioid => 0.5 * special::sigmoid(eta),
            Family::WrappedCauchy => special::sigmoid(eta),
        }
    }

    /// `ln |d c / d eta|` for the map above.
    pub fn ln_jacobian(self, eta: f64) -> f64 {
        match self {
            Family::CircularUniform => 0.0,
            Family::VonMises => eta,
            Family::Cardioid => special::ln_sigmoid(eta) + special::ln_sigmoid(-eta) - std::f64::consts::LN_2,
            Family::WrappedCauchy => special::ln_sigmoid(eta) + special::ln_sigmoid(-eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::CircularUniform => "uniform",
            Family::VonMises => "vm",
            Family::Cardioid => "cardioid",
            Family::WrappedCauchy => "wc",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "circular-uniform" => Ok(Family::CircularUniform),
            "vm" | "von-mises" | "vonmises" => Ok(Family::VonMises),
            "cardioid" | "card" => Ok(Family::Cardioid),
            "wc" | "wrapped-cauchy" => Ok(Family::WrappedCauchy),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}

/// A fully specified circular distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    family: Family,
    mu: Angle,
    concentration: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, mu: f64, concentration: f64) -> Result<Self> {
        let mu = Angle::new(mu)?;
        if family == Family::CircularUniform {
            return Ok(Self { family, mu, concentration: 0.0 });
        }
        if !family.contains_concentration(concentration) {
            let (lo, hi) = family.concentration_support();
            return domain(format!("{family} concentration must lie in [{lo}, {hi}), got {concentration}"));
        }
        Ok(Self { family, mu, concentration })
    }

    pub fn uniform() -> Self {
        Self { family: Family::CircularUniform, mu: Angle::ZERO, concentration: 0.0 }
    }

    pub fn von_mises(mu: f64, kappa: f64) -> Result<Self> {
        Self::new(Family::VonMises, mu, kappa)
    }

    pub fn cardioid(mu: f64, ell: f64) -> Result<Self> {
        Self::new(Family::Cardioid, mu, ell)
    }

    pub fn wrapped_cauchy(mu: f64, rho: f64) -> Result<Self> {
        Self::new(Family::WrappedCauchy, mu, rho)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mu(&self) -> Angle {
        self.mu
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn pdf(&self, x: Angle) -> f64 {
        let delta = x.0 - self.mu.0;
        match self.family {
            Family::CircularUniform => 1.0 / TAU,
            Family::Cardioid => (1.0 + 2.0 * self.concentration * delta.cos()).max(0.0) / TAU,
            Family::WrappedCauchy => {
                let rho = self.concentration;
                (1.0 - rho) * (1.0 + rho) / (wc_denominator(rho, delta) * TAU)
            }
            Family::VonMises => self.log_pdf(x).exp(),
        }
    }

    /// Log density; `-inf` where the density vanishes.
    pub fn log_pdf(&self, x: Angle) -> f64 {
        let delta = x.0 - self.mu.0;
        match self.family {
            Family::CircularUniform => -LN_TAU,
            Family::VonMises => {
                let kappa = self.concentration;
                kappa * delta.cos() - LN_TAU - special::ln_i0(kappa)
            }
            Family::Cardioid => {
                let v = 1.0 + 2.0 * self.concentration * delta.cos();
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln() - LN_TAU
                }
            }
            Family::WrappedCauchy => {
                let rho = self.concentration;
                (-rho * rho).ln_1p() - wc_denominator(rho, delta).ln() - LN_TAU
            }
        }
    }

    /// Population mean resultant length.
    pub fn mean_resultant_length(&self) -> f64 {
        match self.family {
            Family::CircularUniform => 0.0,
            Family::VonMises => special::ratio(self.concentration),
            Family::Cardioid | Family::WrappedCauchy => self.concentration,
        }
    }

    /// `n` independent draws from a generator seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return domain("sample size must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles = (0..n).map(|_| self.draw(&mut rng)).collect();
        Ok(Dataset { angles, label: format!("{}(mu={}, c={})", self.family, self.mu.0, self.concentration) })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        match self.family {
            Family::CircularUniform => Angle::wrap(TAU * rng.random::<f64>()),
            Family::VonMises => draw_von_mises(rng, self.mu.0, self.concentration),
            Family::Cardioid => draw_cardioid(rng, self.mu.0, self.concentration),
            Family::WrappedCauchy => {
                let rho = self.concentration;
                if rho == 0.0 {
                    return Angle::wrap(TAU * rng.random::<f64>());
                }
                let scale = -rho.ln();
                let u: f64 = rng.random();
                Angle::wrap(self.mu.0 + scale * (PI * (u - 0.5)).tan())
            }
        }
    }
}

/// `1 + rho^2 - 2 rho cos(delta)` without cancellation near `rho = 1`.
fn wc_denominator(rho: f64, delta: f64) -> f64 {
    let s = (0.5 * delta).sin();
    (1.0 - rho) * (1.0 - rho) + 4.0 * rho * s * s
}

/// Best & Fisher (1979) rejection sampler.
fn draw_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> Angle {
    if kappa == 0.0 {
        return Angle::wrap(TAU * rng.random::<f64>());
    }
    let q = (1.0 + 4.0 * kappa * kappa).sqrt();
    let tau = 1.0 + q;
    // rho = (tau - sqrt(2 tau)) / (2 kappa), rewritten to avoid cancellation
    let rho = 2.0 * kappa * tau / ((q + 1.0) * (tau + (2.0 * tau).sqrt()));
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return Angle::wrap(mu + signed);
        }
    }
}

pub(crate) fn cardioid_cdf(x: f64, mu: f64, ell: f64) -> f64 {
    x / TAU + ell / PI * ((x - mu).sin() + mu.sin())
}

fn draw_cardioid<R: Rng + ?Sized>(rng: &mut R, mu: f64, ell: f64) -> Angle {
    let u: f64 = rng.random();
    let (mut lo, mut hi) = (0.0, TAU);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cardioid_cdf(mid, mu, ell) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 {
            break;
        }
    }
    Angle::wrap(0.5 * (lo + hi))
}

/// An ordered sample of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub angles: Vec<Angle>,
    pub label: String,
}

impl Dataset {
    pub fn from_radians(values: &[f64], label: impl Into<String>) -> Result<Self> {
        let angles = values.iter().map(|&v| Angle::new(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { angles, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn radians(&self) -> impl Iterator<Item = f64> + '_ {
        self.angles.iter().map(|a| a.0)
    }

    /// `(sum cos, sum sin)`.
    pub fn resultant(&self) -> (f64, f64) {
        self.radians().fold((0.0, 0.0), |(c, s), x| (c + x.cos(), s + x.sin()))
    }

    pub fn mean_resultant_length(&self) -> f64 {
        let (c, s) = self.resultant();
        c.hypot(s) / self.len() as f64
    }

    pub fn circular_mean(&self) -> Angle {
        let (c, s) = self.resultant();
        Angle::wrap(s.atan2(c))
    }

    /// Returns a copy with every angle shifted by `delta`.
    pub fn rotated(&self, delta: f64) -> Self {
        Self { angles: self.radians().map(|x| Angle::wrap(x + delta)).collect(), label: self.label.clone() }
    }

    /// Reads a CSV with a single `angle_rad` column.
    pub fn read_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let column = rdr
            .headers()?
            .iter()
            .position(|h| h == "angle_rad")
            .ok_or_else(|| Error::Domain("dataset CSV needs an 'angle_rad' column".into()))?;
        let mut angles = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let field = record.get(column).unwrap_or("");
            let value: f64 = field.parse().map_err(|_| Error::Domain(format!("not a number: '{field}'")))?;
            angles.push(Angle::new(value)?);
        }
        Ok(Self { angles, label: label.into() })
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["angle_rad"])?;
        for a in &self.angles {
            w.write_record([format!("{}", a.0)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::trapezoid_periodic;

    fn specs_spanning_support() -> Vec<DistributionSpec> {
        let mut v = vec![DistributionSpec::uniform()];
        for k in [0.0, 0.5, 2.0, 10.0, 100.0] {
            v.push(DistributionSpec::von_mises(1.0, k).unwrap());
        }
        for l in [0.0, 0.1, 0.25, 0.4, 0.49] {
            v.push(DistributionSpec::cardioid(4.0, l).unwrap());
        }
        for r in [0.0, 0.2, 0.5, 0.9, 0.99] {
            v.push(DistributionSpec::wrapped_cauchy(2.5, r).unwrap());
        }
        v
    }

    #[test]
    fn angle_wraps_into_range() {
        assert_eq!(Angle::new(TAU).unwrap().radians(), 0.0);
        assert!((Angle::new(-0.5).unwrap().radians() - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(Angle::new(-1e-300).unwrap().radians(), 0.0);
        assert!(Angle::new(f64::NAN).is_err());
        let a = Angle::new(7.0 * TAU + 1.0).unwrap().radians();
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_support() {
        assert!(DistributionSpec::von_mises(0.0, -1.0).is_err());
        assert!(DistributionSpec::cardioid(0.0, 0.5).is_err());
        assert!(DistributionSpec::wrapped_cauchy(0.0, 1.0).is_err());
        let u = DistributionSpec::new(Family::CircularUniform, 1.0, 3.0).unwrap();
        assert_eq!(u.concentration(), 0.0);
    }

    #[test]
    fn reference_density_values() {
        let x = Angle::new(1.0).unwrap();
        let vm0 = DistributionSpec::von_mises(PI, 0.0).unwrap();
        assert!((vm0.pdf(x) - 1.0 / TAU).abs() < 1e-15);
        let c0 = DistributionSpec::cardioid(PI, 0.0).unwrap();
        assert!((c0.pdf(Angle::new(2.0).unwrap()) - 1.0 / TAU).abs() < 1e-15);

        let wc = DistributionSpec::wrapped_cauchy(0.0, 0.5).unwrap();
        let expected = 3.0 / TAU;
        assert!((wc.pdf(Angle::ZERO) - expected).abs() < 1e-14);
        // wrapped sum of Cauchy(0, -ln 0.5) densities
        let gamma = -(0.5f64).ln();
        let wrapped: f64 = (-200_000..=200_000)
            .map(|k| {
                let y = TAU * k as f64;
                gamma / (PI * (gamma * gamma + y * y))
            })
            .sum();
        assert!((wc.pdf(Angle::ZERO) - wrapped).abs() < 1e-6);
    }

    #[test]
    fn log_density_values() {
        let vm = DistributionSpec::von_mises(0.0, 2.0).unwrap();
        let expected = 2.0 - TAU.ln() - special::ln_i0(2.0);
        assert!((vm.log_pdf(Angle::ZERO) - expected).abs() < 1e-14);
        let u = DistributionSpec::uniform();
        assert!((u.log_pdf(Angle::new(3.3).unwrap()) + TAU.ln()).abs() < 1e-15);
        let c = DistributionSpec::cardioid(0.0, 0.3).unwrap();
        let expected = ((1.0 - 0.6) / TAU).ln();
        assert!((c.log_pdf(Angle::new(PI).unwrap()) - expected).abs() < 1e-14);
        for spec in specs_spanning_support() {
            for i in 0..50 {
                let x = Angle::new(i as f64 * 0.13).unwrap();
                let p = spec.pdf(x);
                assert!((spec.log_pdf(x) - p.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn densities_are_normalized() {
        for spec in specs_spanning_support() {
            let total = trapezoid_periodic(|x| spec.pdf(Angle::wrap(x)), 20001);
            assert!((total - 1.0).abs() < 1e-8, "{spec:?}: {total}");
        }
    }

    #[test]
    fn location_equivariance_and_continuity() {
        for spec in specs_spanning_support() {
            let centered = DistributionSpec::new(spec.family(), 0.0, spec.concentration()).unwrap();
            for i in 0..40 {
                let delta = -3.0 + i as f64 * 0.17;
                let shifted = spec.pdf(Angle::wrap(spec.mu().radians() + delta));
                assert!((shifted - centered.pdf(Angle::wrap(delta))).abs() < 1e-10 * shifted.max(1.0));
            }
            let near_zero = spec.pdf(Angle::wrap(1e-12));
            let near_tau = spec.pdf(Angle::wrap(TAU - 1e-12));
            assert!((near_zero - near_tau).abs() <= 1e-9 * near_zero.max(1.0));
        }
    }

    #[test]
    fn wrapped_cauchy_resultant_equals_rho() {
        // first trigonometric moment equals rho
        for rho in [0.1, 0.5, 0.8] {
            let spec = DistributionSpec::wrapped_cauchy(0.7, rho).unwrap();
            let r = trapezoid_periodic(|x| (x - 0.7).cos() * spec.pdf(Angle::wrap(x)), 20001);
            assert!((r - rho).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = DistributionSpec::von_mises(1.0, 3.0).unwrap();
        assert_eq!(spec.sample(100, 9).unwrap(), spec.sample(100, 9).unwrap());
        assert_ne!(spec.sample(100, 9).unwrap(), spec.sample(100, 10).unwrap());
        assert!(spec.sample(0, 1).is_err());
    }

    #[test]
    fn cardioid_inverse_cdf_hits_target() {
        let (mu, ell) = (1.3, 0.45);
        assert!(cardioid_cdf(0.0, mu, ell).abs() < 1e-15);
        assert!((cardioid_cdf(TAU, mu, ell) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let data = Dataset::from_radians(&[0.1, 3.0, 6.0], "t").unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("angle_rad\n"));
        let back = Dataset::read_csv(&buf[..], "t").unwrap();
        assert_eq!(back, data);
        assert!(Dataset::read_csv("x\n1.0\n".as_bytes(), "bad").is_err());
    }
}
