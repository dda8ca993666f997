//! Gradient-based one-side sampling.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `ceil(f * n)` with a little slack so products like `0.3 * 10` that land a
/// hair above an integer do not round up.
fn ceil_fraction(f: f64, n: usize) -> usize {
    ((f * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

pub fn validate_goss(a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidParameter(format!(
            "GOSS fractions must lie in [0, 1], got a={a}, b={b}"
        )));
    }
    if a + b > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "GOSS fractions sum to {} > 1",
            a + b
        )));
    }
    if a + b <= 0.0 {
        return Err(Error::InvalidParameter(
            "GOSS keeps no rows when a + b = 0".into(),
        ));
    }
    Ok(())
}

/// Keeps the `ceil(a*n)` rows with the largest magnitudes (ties by index)
/// at weight 1 and a uniform draw of `ceil(b*n)` of the rest at weight
/// `(1-a)/b`. Returns ascending row indices with matching weights.
pub fn goss_sample(
    magnitudes: &[f64],
    a: f64,
    b: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<f64>)> {
    validate_goss(a, b)?;
    let n = magnitudes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        magnitudes[j]
            .abs()
            .total_cmp(&magnitudes[i].abs())
            .then(i.cmp(&j))
    });
    let n_top = ceil_fraction(a, n);
    let rest = &order[n_top..];
    let n_other = ceil_fraction(b, n).min(rest.len());

    let mut kept: Vec<(usize, f64)> = order[..n_top].iter().map(|&i| (i, 1.0)).collect();
    if n_other > 0 {
        let amplify = (1.0 - a) / b;
        kept.extend(
            rand::seq::index::sample(rng, rest.len(), n_other)
                .into_iter()
                .map(|k| (rest[k], amplify)),
        );
    }
    kept.sort_unstable_by_key(|&(i, _)| i);
    Ok(kept.into_iter().unzip())
}
