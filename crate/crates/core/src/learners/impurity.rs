//! Node impurity measures over class proportions, generalized to K classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Entropy,
    Gini,
}

fn check_proportions(p: &[f64]) -> Result<()> {
    if let Some(bad) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid class proportion {bad}"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "class proportions sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Shannon entropy in bits, with `0 * log2(0) = 0`.
pub fn entropy(proportions: &[f64]) -> Result<f64> {
    check_proportions(proportions)?;
    Ok(entropy_unchecked(proportions))
}

/// `1 - sum(p^2)`.
pub fn gini(proportions: &[f64]) -> Result<f64> {
    check_proportions(proportions)?;
    Ok(gini_unchecked(proportions))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
    h.max(0.0)
}

fn gini_unchecked(p: &[f64]) -> f64 {
    (1.0 - p.iter().map(|v| v * v).sum::<f64>()).max(0.0)
}

/// Impurity of a node given its (possibly weighted) class counts.
pub(crate) fn impurity_of_counts(counts: &[f64], criterion: Criterion) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Entropy => counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                -p * p.log2()
            })
            .sum::<f64>()
            .max(0.0),
        Criterion::Gini => (1.0
            - counts
                .iter()
                .map(|c| (c / total) * (c / total))
                .sum::<f64>())
        .max(0.0),
    }
}

/// Parent impurity minus the size-weighted child impurities.
pub fn information_gain(
    parent: &[f64],
    left: &[f64],
    right: &[f64],
    criterion: Criterion,
) -> Result<f64> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return Err(Error::shape(
            format!("{} classes", parent.len()),
            format!("{} / {}", left.len(), right.len()),
        ));
    }
    for ((p, l), r) in parent.iter().zip(left).zip(right) {
        if *l < 0.0 || *r < 0.0 || (p - (l + r)).abs() > 1e-9 * p.abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "child counts {l} + {r} do not add up to parent {p}"
            )));
        }
    }
    let n: f64 = parent.iter().sum();
    if n <= 0.0 {
        return Err(Error::InvalidInput("empty parent node".into()));
    }
    let n_left: f64 = left.iter().sum();
    let n_right: f64 = right.iter().sum();
    Ok(impurity_of_counts(parent, criterion)
        - (n_left / n) * impurity_of_counts(left, criterion)
        - (n_right / n) * impurity_of_counts(right, criterion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        // -(0.25 log2 0.25 + 0.75 log2 0.75) = 0.5 + 0.311278...
        let expected = 0.5 + 0.75 * (4.0f64 / 3.0).log2();
        let h = entropy(&[0.25, 0.75]).unwrap();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.811278).abs() < 1e-6);
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(entropy(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(gini(&[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(gini(&[0.25, 0.75]).unwrap(), 0.375);
        assert!(gini(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn information_gain_values() {
        let e = Criterion::Entropy;
        assert_eq!(
            information_gain(&[2.0, 2.0], &[2.0, 0.0], &[0.0, 2.0], e).unwrap(),
            1.0
        );
        assert_eq!(
            information_gain(&[2.0, 2.0], &[2.0, 2.0], &[0.0, 0.0], e).unwrap(),
            0.0
        );
        // H([3,1]) - 0.5 * H([2,0]) - 0.5 * H([1,1]).
        let expected = entropy(&[0.75, 0.25]).unwrap() - 0.5;
        let ig = information_gain(&[3.0, 1.0], &[2.0, 0.0], &[1.0, 1.0], e).unwrap();
        assert!((ig - expected).abs() < 1e-15);
        assert!((ig - 0.3113).abs() < 1e-4);
        assert!(information_gain(&[3.0, 1.0], &[2.0, 0.0], &[2.0, 1.0], e).is_err());
        assert!(information_gain(&[3.0, 1.0], &[3.0], &[0.0, 1.0], e).is_err());
    }

    proptest! {
        #[test]
        fn bounds_and_maxima(raw in proptest::collection::vec(0.0f64..10.0, 2..7)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let k = p.len() as f64;
            let h = entropy(&p).unwrap();
            let g = gini(&p).unwrap();
            prop_assert!(h >= 0.0 && h <= k.log2() + 1e-12);
            prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / k + 1e-12);
            let uniform = vec![1.0 / k; p.len()];
            prop_assert!(h <= entropy(&uniform).unwrap() + 1e-12);
            prop_assert!(g <= gini(&uniform).unwrap() + 1e-12);
        }

        #[test]
        fn gain_is_non_negative(
            left in proptest::collection::vec(0u32..20, 3),
            right in proptest::collection::vec(0u32..20, 3),
            crit in prop_oneof![Just(Criterion::Entropy), Just(Criterion::Gini)],
        ) {
            let l: Vec<f64> = left.iter().map(|&v| v as f64).collect();
            let r: Vec<f64> = right.iter().map(|&v| v as f64).collect();
            let parent: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
            prop_assume!(parent.iter().sum::<f64>() > 0.0);
            prop_assert!(information_gain(&parent, &l, &r, crit).unwrap() >= -1e-12);
        }

        #[test]
        fn proportional_children_give_zero_gain(base in proptest::collection::vec(1u32..10, 3), scale in 1u32..5) {
            let l: Vec<f64> = base.iter().map(|&v| v as f64).collect();
            let r: Vec<f64> = base.iter().map(|&v| (v * scale) as f64).collect();
            let parent: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
            for crit in [Criterion::Entropy, Criterion::Gini] {
                prop_assert!(information_gain(&parent, &l, &r, crit).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_exactly_on_pure_nodes() {
        for k in 2..6 {
            let mut p = vec![0.0; k];
            p[k - 1] = 1.0;
            assert_eq!(entropy(&p).unwrap(), 0.0);
            assert_eq!(gini(&p).unwrap(), 0.0);
        }
        assert!(entropy(&[0.999, 0.001]).unwrap() > 0.0);
        assert!(gini(&[0.999, 0.001]).unwrap() > 0.0);
    }
}
