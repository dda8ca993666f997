//! Exclusive feature bundling: merging columns that are rarely active on
//! the same row into one column with disjoint value ranges.

/// Greedy bundling over activity masks. Features are visited by active-row
/// count (descending, ties by index) and join the first bundle whose
/// accumulated conflicts stay within `max_conflict`. `fits` can veto a
/// placement, e.g. when a bundle would outgrow its bin budget.
pub(crate) fn bundle_masks<F>(
    masks: &[Vec<bool>],
    max_conflict: usize,
    mut fits: F,
) -> Vec<Vec<usize>>
where
    F: FnMut(&[usize], usize) -> bool,
{
    let counts: Vec<usize> = masks
        .iter()
        .map(|m| m.iter().filter(|&&b| b).count())
        .collect();
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));

    struct Open {
        features: Vec<usize>,
        used: Vec<bool>,
        conflicts: usize,
    }
    let mut bundles: Vec<Open> = Vec::new();
    for f in order {
        let mask = &masks[f];
        let slot = bundles.iter().position(|b| {
            let added = b.used.iter().zip(mask).filter(|(u, m)| **u && **m).count();
            b.conflicts + added <= max_conflict && fits(&b.features, f)
        });
        match slot {
            Some(i) => {
                let b = &mut bundles[i];
                b.conflicts += b.used.iter().zip(mask).filter(|(u, m)| **u && **m).count();
                for (u, m) in b.used.iter_mut().zip(mask) {
                    *u |= *m;
                }
                b.features.push(f);
            }
            None => bundles.push(Open {
                features: vec![f],
                used: mask.clone(),
                conflicts: 0,
            }),
        }
    }
    bundles.into_iter().map(|b| b.features).collect()
}

/// Groups columns so that features sharing a bundle are nonzero together
/// on at most `max_conflict` rows in total.
pub fn efb_bundle(columns: &[Vec<f64>], max_conflict: usize) -> Vec<Vec<usize>> {
    let masks: Vec<Vec<bool>> = columns
        .iter()
        .map(|c| c.iter().map(|v| *v != 0.0).collect())
        .collect();
    bundle_masks(&masks, max_conflict, |_, _| true)
}

/// One merged column. Code 0 means every member is zero; feature `j`'s
/// nonzero values occupy `offsets[j] + 1 ..= offsets[j] + codebooks[j].len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedBundle {
    pub features: Vec<usize>,
    pub offsets: Vec<usize>,
    /// Sorted distinct nonzero values per member.
    pub codebooks: Vec<Vec<f64>>,
    pub codes: Vec<usize>,
}

/// Merges the bundle's columns. On a conflicting row the earliest member in
/// bundle order keeps its value and the others read back as zero.
pub fn merge_bundle(columns: &[Vec<f64>], bundle: &[usize]) -> MergedBundle {
    let n = bundle.first().map_or(0, |&f| columns[f].len());
    let mut offsets = Vec::with_capacity(bundle.len());
    let mut codebooks = Vec::with_capacity(bundle.len());
    let mut next = 0;
    for &f in bundle {
        let mut book: Vec<f64> = columns[f].iter().copied().filter(|v| *v != 0.0).collect();
        book.sort_by(f64::total_cmp);
        book.dedup();
        offsets.push(next);
        next += book.len();
        codebooks.push(book);
    }
    let codes = (0..n)
        .map(|r| {
            bundle
                .iter()
                .zip(&offsets)
                .zip(&codebooks)
                .find_map(|((&f, off), book)| {
                    let v = columns[f][r];
                    (v != 0.0)
                        .then(|| off + 1 + book.binary_search_by(|b| b.total_cmp(&v)).unwrap_or(0))
                })
                .unwrap_or(0)
        })
        .collect();
    MergedBundle {
        features: bundle.to_vec(),
        offsets,
        codebooks,
        codes,
    }
}

/// Recovers one column per member, in bundle order.
pub fn unbundle(merged: &MergedBundle) -> Vec<Vec<f64>> {
    merged
        .offsets
        .iter()
        .zip(&merged.codebooks)
        .map(|(&off, book)| {
            merged
                .codes
                .iter()
                .map(|&c| {
                    if c > off && c <= off + book.len() {
                        book[c - off - 1]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}
