//! Closed-form quantities for uniform measures on balls, cubes and annuli:
//! inner-ball radii, DTM minima, volume-gap lower bounds and standardness
//! constants. These serve as trustworthy oracles for the empirical code.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signature::Signature1D;

/// Shapes with closed-form volume, reach, diameter and inner-set mass.
///
/// Balls and annuli are centred at the origin; the cube is `(0, side)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UniformShape {
    Ball { dim: usize, radius: f64 },
    Cube { dim: usize, side: f64 },
    Annulus { dim: usize, inner: f64, outer: f64 },
}

/// Lebesgue volume of the unit ball, `pi^{d/2} / Gamma(d/2 + 1)`.
///
/// The Gamma factor is evaluated exactly from the integer / half-integer
/// recurrence, so any dimension works without tables.
pub fn unit_ball_volume(d: usize) -> f64 {
    assert!(d >= 1);
    let (mut gamma, mut x, pi_pow) = if d.is_multiple_of(2) {
        (1.0, 1.0, std::f64::consts::PI.powi(d as i32 / 2))
    } else {
        (
            std::f64::consts::PI.sqrt(),
            0.5,
            std::f64::consts::PI.powi((d as i32 - 1) / 2) * std::f64::consts::PI.sqrt(),
        )
    };
    // Gamma(x + 1) = x Gamma(x) up to x = d/2.
    while x < d as f64 / 2.0 + 0.25 {
        gamma *= x;
        x += 1.0;
    }
    pi_pow / gamma
}

impl UniformShape {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim < 1 || !radius.is_finite() || radius <= 0.0 {
            return Err(Error::ShapeUnsupported(format!(
                "ball dim {dim} radius {radius}"
            )));
        }
        Ok(Self::Ball { dim, radius })
    }

    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        if dim < 1 || !side.is_finite() || side <= 0.0 {
            return Err(Error::ShapeUnsupported(format!("cube dim {dim} side {side}")));
        }
        Ok(Self::Cube { dim, side })
    }

    pub fn annulus(dim: usize, inner: f64, outer: f64) -> Result<Self> {
        if dim < 1 || !(0.0 < inner && inner < outer) {
            return Err(Error::ShapeUnsupported(format!(
                "annulus dim {dim} radii {inner}..{outer}"
            )));
        }
        Ok(Self::Annulus { dim, inner, outer })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Ball { dim, .. } | Self::Cube { dim, .. } | Self::Annulus { dim, .. } => dim,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Self::Ball { dim, radius } => unit_ball_volume(dim) * radius.powi(dim as i32),
            Self::Cube { dim, side } => side.powi(dim as i32),
            Self::Annulus { dim, inner, outer } => {
                unit_ball_volume(dim) * (outer.powi(dim as i32) - inner.powi(dim as i32))
            }
        }
    }

    /// Distance from the boundary to the medial axis.
    ///
    /// A cube in dimension two or higher has reach zero: its medial axis
    /// reaches into the corners.
    pub fn reach(&self) -> f64 {
        match *self {
            Self::Ball { radius, .. } => radius,
            Self::Cube { dim, side } => {
                if dim == 1 {
                    side / 2.0
                } else {
                    0.0
                }
            }
            Self::Annulus { inner, outer, .. } => (outer - inner) / 2.0,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Self::Ball { radius, .. } => 2.0 * radius,
            Self::Cube { dim, side } => side * (dim as f64).sqrt(),
            Self::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Largest epsilon for which the inner set `O_eps` is non-empty.
    pub fn inner_set_limit(&self) -> f64 {
        match *self {
            Self::Ball { radius, .. } => radius,
            Self::Cube { side, .. } => side / 2.0,
            Self::Annulus { inner, outer, .. } => (outer - inner) / 2.0,
        }
    }

    /// Mass of the inner set `O_eps` under the uniform measure.
    pub fn inner_set_mass(&self, eps: f64) -> Result<f64> {
        if eps < 0.0 || eps > self.inner_set_limit() {
            return Err(Error::InfeasibleMass {
                m: f64::NAN,
                eps,
                limit: self.inner_set_limit(),
            });
        }
        Ok(match *self {
            Self::Ball { dim, radius } => ((radius - eps) / radius).powi(dim as i32),
            Self::Cube { dim, side } => ((side - 2.0 * eps) / side).powi(dim as i32),
            Self::Annulus { dim, inner, outer } => {
                let d = dim as i32;
                ((outer - eps).powi(d) - (inner + eps).powi(d))
                    / (outer.powi(d) - inner.powi(d))
            }
        })
    }

    /// Membership test (open set).
    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        let norm = || p.iter().map(|x| x * x).sum::<f64>().sqrt();
        match *self {
            Self::Ball { radius, .. } => norm() < radius,
            Self::Cube { side, .. } => p.iter().all(|&x| x > 0.0 && x < side),
            Self::Annulus { inner, outer, .. } => {
                let r = norm();
                r > inner && r < outer
            }
        }
    }
}

/// Radius of a ball of uniform-measure mass `m` that fits inside the shape:
/// `(m Leb(O) / omega_d)^{1/d}`.
pub fn epsilon_m(shape: &UniformShape, m: f64) -> Result<f64> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::MassOutOfRange(m));
    }
    let d = shape.dim();
    Ok((m * shape.volume() / unit_ball_volume(d)).powf(1.0 / d as f64))
}

/// Closed-form minimum of the DTM of the uniform measure:
/// `d/(d+1) * (m Leb(O) / omega_d)^{1/d}`, attained on the inner set.
///
/// Refused when the inner set at `epsilon_m` is empty (checked against the
/// reach for balls and annuli, against half the side for cubes), because
/// the formula's precondition is then unverified.
pub fn dtm_min(shape: &UniformShape, m: f64) -> Result<f64> {
    let eps = epsilon_m(shape, m)?;
    let limit = shape.inner_set_limit();
    if eps > limit {
        return Err(Error::InfeasibleMass { m, eps, limit });
    }
    let d = shape.dim() as f64;
    Ok(d / (d + 1.0) * eps)
}

/// Lower bound on the W1 gap between the DTM-signatures of two uniform
/// measures with different volumes:
/// `min(mass_A(O_eps), mass_B(O'_eps)) * d/(d+1) * (m/omega_d)^{1/d}
///  * |Leb_A^{1/d} - Leb_B^{1/d}|`.
pub fn uniform_volume_lower_bound(
    shape_a: &UniformShape,
    shape_b: &UniformShape,
    m: f64,
) -> Result<f64> {
    if shape_a.dim() != shape_b.dim() {
        return Err(Error::ShapeUnsupported(format!(
            "dimension mismatch: {} vs {}",
            shape_a.dim(),
            shape_b.dim()
        )));
    }
    let d = shape_a.dim();
    let eps_a = epsilon_m(shape_a, m)?;
    let eps_b = epsilon_m(shape_b, m)?;
    let mass_a = shape_a.inner_set_mass(eps_a).map_err(|_| Error::InfeasibleMass {
        m,
        eps: eps_a,
        limit: shape_a.inner_set_limit(),
    })?;
    let mass_b = shape_b.inner_set_mass(eps_b).map_err(|_| Error::InfeasibleMass {
        m,
        eps: eps_b,
        limit: shape_b.inner_set_limit(),
    })?;
    let df = d as f64;
    let omega = unit_ball_volume(d);
    let vol_gap = (shape_a.volume().powf(1.0 / df) - shape_b.volume().powf(1.0 / df)).abs();
    Ok(mass_a.min(mass_b) * df / (df + 1.0) * (m / omega).powf(1.0 / df) * vol_gap)
}

/// Standardness constants of the uniform measure:
/// `a = omega_d / Leb(O) * (Reach(O) / Diam(O))^d`, `b = d`.
pub fn standardness_constant(shape: &UniformShape) -> Result<(f64, f64)> {
    let reach = shape.reach();
    if reach <= 0.0 {
        return Err(Error::ZeroReach);
    }
    let d = shape.dim();
    let a = unit_ball_volume(d) / shape.volume() * (reach / shape.diameter()).powi(d as i32);
    Ok((a, d as f64))
}

/// W1 distance between a signature and its `lambda`-dilated copy:
/// `|1 - lambda| * E[dtm]`. Quantiles scale linearly, so this is exact.
pub fn dilation_distance(sig: &Signature1D, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "dilation factor {lambda} must be positive"
        )));
    }
    Ok((1.0 - lambda).abs() * sig.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::signature_full;
    use crate::space::FiniteMeasureSpace;
    use crate::wasserstein::w1;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-13);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-13);
    }

    #[test]
    fn epsilon_examples() {
        let disc = UniformShape::ball(2, 1.0).unwrap();
        assert!((epsilon_m(&disc, 0.09).unwrap() - 0.3).abs() < 1e-14);
        assert!((epsilon_m(&disc, 1.0).unwrap() - 1.0).abs() < 1e-14);

        let seg = UniformShape::cube(1, 1.0).unwrap();
        assert!((epsilon_m(&seg, 0.5).unwrap() - 0.25).abs() < 1e-14);

        assert!(matches!(
            epsilon_m(&disc, 0.0),
            Err(Error::MassOutOfRange(_))
        ));
    }

    #[test]
    fn dtm_min_examples() {
        let disc = UniformShape::ball(2, 1.0).unwrap();
        assert!((dtm_min(&disc, 0.09).unwrap() - 0.2).abs() < 1e-14);

        let seg = UniformShape::cube(1, 1.0).unwrap();
        assert!((dtm_min(&seg, 0.5).unwrap() - 0.125).abs() < 1e-14);

        // m -> 0 limit.
        assert!(dtm_min(&disc, 1e-12).unwrap() < 1e-5);

        // Annulus: feasibility bounded by the reach.
        let ann = UniformShape::annulus(2, 1.0, 1.2).unwrap();
        assert!(matches!(
            dtm_min(&ann, 0.9),
            Err(Error::InfeasibleMass { .. })
        ));
    }

    #[test]
    fn volume_lower_bound_examples() {
        let a = UniformShape::ball(2, 1.0).unwrap();
        assert_eq!(uniform_volume_lower_bound(&a, &a, 0.1).unwrap(), 0.0);

        let b = UniformShape::ball(2, 2.0).unwrap();
        let lb = uniform_volume_lower_bound(&a, &b, 0.01).unwrap();
        // min mass = 0.81, 2/3, (0.01/pi)^{1/2}, |sqrt(pi) - sqrt(4 pi)|.
        let want = 0.81 * (2.0 / 3.0) * (0.01 / PI).sqrt() * PI.sqrt();
        assert!((lb - want).abs() < 1e-12);
        assert!(lb > 0.0);

        // Mass too large for the smaller shape's inner set.
        let thin = UniformShape::annulus(2, 1.0, 1.1).unwrap();
        assert!(uniform_volume_lower_bound(&thin, &b, 0.9).is_err());
    }

    #[test]
    fn standardness_examples() {
        let disc = UniformShape::ball(2, 1.0).unwrap();
        let (a, b) = standardness_constant(&disc).unwrap();
        assert!((a - 0.25).abs() < 1e-14);
        assert_eq!(b, 2.0);

        let seg = UniformShape::cube(1, 1.0).unwrap();
        let (a, b) = standardness_constant(&seg).unwrap();
        assert!((a - 1.0).abs() < 1e-14);
        assert_eq!(b, 1.0);

        // The dimensionless ratio (reach/diameter)^d is scale invariant; the
        // omega_d / Leb factor is not, so a carries the radius dependence.
        let big = UniformShape::ball(2, 2.0).unwrap();
        let (a_big, _) = standardness_constant(&big).unwrap();
        assert!((a_big - 0.25 / 4.0).abs() < 1e-14);

        let square = UniformShape::cube(2, 1.0).unwrap();
        assert!(matches!(standardness_constant(&square), Err(Error::ZeroReach)));
    }

    #[test]
    fn dilation_distance_matches_w1() {
        let s = FiniteMeasureSpace::from_points(vec![vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let sig = signature_full(&s, 2.0 / 3.0).unwrap();
        assert_eq!(dilation_distance(&sig, 1.0).unwrap(), 0.0);
        assert!((dilation_distance(&sig, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        for lambda in [0.25, 0.5, 2.0, 3.0, 7.5] {
            let scaled = sig.dist().scale(lambda).unwrap();
            let got = w1(sig.dist(), &scaled);
            let want = dilation_distance(&sig, lambda).unwrap();
            assert!((got - want).abs() < 1e-12, "lambda={lambda}");
        }
    }

    #[test]
    fn empirical_standardness_fuzz() {
        // mu_hat(B(x, r)) >= min(1, a r^b) - 3 sqrt(log N / N) with high
        // probability for uniform ball samples.
        use rand::Rng;
        let shape = UniformShape::ball(2, 1.0).unwrap();
        let (a, b) = standardness_constant(&shape).unwrap();
        let n = 2000usize;
        let spec = crate::synth::GeneratorSpec {
            kind: crate::synth::GeneratorKind::Shape(shape),
            n,
            seed: 42,
        };
        let space = crate::synth::sample(&spec).unwrap();
        let slack = 3.0 * ((n as f64).ln() / n as f64).sqrt();
        let mut rng = crate::seeding::stream_rng(5, 77, 0);
        let mut violations = 0;
        let trials = 300;
        for _ in 0..trials {
            let i = rng.random_range(0..n);
            let r: f64 = rng.random_range(0.01..shape.diameter());
            let x = space.point(i).unwrap().to_vec();
            let mut mass = 0.0;
            for j in 0..n {
                if space.distance_to_point(&x, j).unwrap() < r {
                    mass += space.weights()[j];
                }
            }
            if mass < (a * r.powf(b)).min(1.0) - slack {
                violations += 1;
            }
        }
        assert!(
            violations == 0,
            "{violations}/{trials} standardness violations"
        );
    }
}
