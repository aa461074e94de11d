//! Named initial data.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Field, SpectralBasis};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `w₁`.
    FirstMode,
    /// `(w₁ + w₂)/√2`, sign-changing.
    Mixed,
    /// Projection of `Π x_i (L_i - x_i)`.
    Bump,
    /// `w₁` plus a seeded random tail small enough to keep the field positive.
    PositiveRandom,
}

pub const PRESETS: [Preset; 4] = [Preset::FirstMode, Preset::Mixed, Preset::Bump, Preset::PositiveRandom];

/// Weighted tail size `Σ_{n≥2} |a_n| Π k_i` of `positive_random`, relative to `a₁`.
const RANDOM_TAIL: f64 = 0.5;

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::FirstMode => "first_mode",
            Preset::Mixed => "mixed",
            Preset::Bump => "bump",
            Preset::PositiveRandom => "positive_random",
        }
    }

    /// Whether the datum is strictly positive inside the domain.
    pub fn is_positive(&self) -> bool {
        !matches!(self, Preset::Mixed)
    }

    /// Unit-norm datum on `basis`; `seed` only affects `positive_random`.
    pub fn build(&self, basis: &Arc<SpectralBasis>, seed: u64) -> Result<Field> {
        let u = match self {
            Preset::FirstMode => Field::mode(basis, 0),
            Preset::Mixed => {
                if basis.len() < 2 {
                    return Err(Error::InvalidArgument("the mixed preset needs two modes".into()));
                }
                &Field::mode(basis, 0) + &Field::mode(basis, 1)
            }
            Preset::Bump => {
                let lengths = basis.domain().lengths().to_vec();
                Field::from_fn(basis, |x| x.iter().zip(&lengths).map(|(x, l)| x * (l - x)).product())
            }
            Preset::PositiveRandom => {
                // |sin(kθ)| ≤ k sin θ, so Σ|a_n| Π k_i < a₁ keeps u > 0
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut coeffs: Vec<f64> = (0..basis.len())
                    .map(|n| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g / ((n + 1) * (n + 1)) as f64
                    })
                    .collect();
                coeffs[0] = 1.0;
                let weighted: f64 = basis.modes()[1..]
                    .iter()
                    .zip(&coeffs[1..])
                    .map(|(m, a)| a.abs() * m.multi_index().iter().map(|k| *k as f64).product::<f64>())
                    .sum();
                if weighted > 0.0 {
                    let s = RANDOM_TAIL / weighted;
                    coeffs[1..].iter_mut().for_each(|a| *a *= s);
                }
                Field::from_coefficients(basis, coeffs)?
            }
        };
        u.normalized()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PRESETS
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset '{s}'")))
    }
}
