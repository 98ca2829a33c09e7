//! Least-squares decay fits of `(ℓ, value)` ladders.
//!
//! - power: `v = C ℓ^k`, fitted on `(ln ℓ, ln v)`; `exponent_or_rate = k`.
//! - exponential: `v = C e^{−βℓ}`, fitted on `(ℓ, ln v)`; `exponent_or_rate = β`.
//!
//! `r_squared` is computed on the transformed data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Power,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub model: DecayModel,
    pub exponent_or_rate: f64,
    pub constant: f64,
    pub r_squared: f64,
    /// Points with nonpositive value (or nonpositive ℓ for power fits) left out.
    pub dropped: usize,
}

impl RateFit {
    /// The fitted model at `ell`.
    pub fn predict(&self, ell: f64) -> f64 {
        match self.model {
            DecayModel::Power => self.constant * exp(self.exponent_or_rate * ln(ell)),
            DecayModel::Exponential => self.constant * exp(-self.exponent_or_rate * ell),
        }
    }
}

pub fn fit_rate(points: &[(f64, f64)], model: DecayModel) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(l, v)| *v > 0.0 && v.is_finite() && l.is_finite() && (model == DecayModel::Exponential || *l > 0.0))
        .map(|&(l, v)| match model {
            DecayModel::Power => (ln(l), ln(v)),
            DecayModel::Exponential => (l, ln(v)),
        })
        .collect();
    let dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints { usable: usable.len(), dropped });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit needs at least two distinct ℓ values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable.iter().map(|p| {
        let r = p.1 - (intercept + slope * p.0);
        r * r
    }).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let exponent_or_rate = match model {
        DecayModel::Power => slope,
        DecayModel::Exponential => -slope,
    };
    Ok(RateFit { model, exponent_or_rate, constant: exp(intercept), r_squared, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_data() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&l: &f64| (l, 7.0 * l.powi(-2))).collect();
        let fit = fit_rate(&pts, DecayModel::Power).unwrap();
        assert!((fit.exponent_or_rate + 2.0).abs() < 1e-12);
        assert!((fit.constant - 7.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential_data() {
        let pts: Vec<(f64, f64)> = [4.0, 6.0, 8.0, 10.0].iter().map(|&l: &f64| (l, 3.0 * (-0.5 * l).exp())).collect();
        let fit = fit_rate(&pts, DecayModel::Exponential).unwrap();
        assert!((fit.exponent_or_rate - 0.5).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refit_of_own_prediction_recovers_parameters() {
        for model in [DecayModel::Power, DecayModel::Exponential] {
            let pts = vec![(3.0, 2.0), (5.0, 0.9), (7.0, 0.5), (9.0, 0.2)];
            let fit = fit_rate(&pts, model).unwrap();
            let synthetic: Vec<(f64, f64)> = pts.iter().map(|&(l, _)| (l, fit.predict(l))).collect();
            let again = fit_rate(&synthetic, model).unwrap();
            assert!((again.exponent_or_rate - fit.exponent_or_rate).abs() < 1e-10);
            assert!((again.constant - fit.constant).abs() < 1e-10 * fit.constant);
        }
    }

    #[test]
    fn noisy_power_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let l = 2.0 * 1.5f64.powi(k);
                let noise: f64 = rng.random_range(-0.05..0.05);
                (l, 4.0 * l.powf(-1.5) * (1.0 + noise))
            })
            .collect();
        let fit = fit_rate(&pts, DecayModel::Power).unwrap();
        assert!((fit.exponent_or_rate + 1.5).abs() <= 0.15);
    }

    #[test]
    fn drops_nonpositive_values() {
        let pts = vec![(1.0, 1.0), (2.0, 0.0), (3.0, -1.0), (4.0, 0.5), (5.0, 0.25)];
        let fit = fit_rate(&pts, DecayModel::Exponential).unwrap();
        assert_eq!(fit.dropped, 2);
        let err = fit_rate(&pts[..3], DecayModel::Power).unwrap_err();
        assert_eq!(err, Error::TooFewPoints { usable: 1, dropped: 2 });
    }
}
