//! Set-level shape similarity: MMD between binarized sample sets, and the
//! symmetric coverage/accuracy IoU with 8-way rotational alignment.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::rotate::rotate_values;
use crate::view::{Resampling, Viewpoint, ViewpointSet};

/// A collection of equally-shaped binary items (flattened grids or images).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSet {
    item_len: usize,
    items: Vec<Vec<bool>>,
}

impl ShapeSet {
    pub fn new(items: Vec<Vec<bool>>) -> Result<Self> {
        let item_len = match items.first() {
            Some(first) => first.len(),
            None => return Err(Error::Empty { what: "shape set" }),
        };
        if items.iter().any(|item| item.len() != item_len) {
            return Err(Error::ShapeMismatch {
                context: "shape set items",
            });
        }
        Ok(Self { item_len, items })
    }

    /// Binarizes a batch of value arrays at `threshold`.
    pub fn from_values<'a, I>(values: I, threshold: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let items = values
            .into_iter()
            .map(|v| binarize(v, threshold))
            .collect();
        Self::new(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_len(&self) -> usize {
        self.item_len
    }

    pub fn items(&self) -> &[Vec<bool>] {
        &self.items
    }

    /// Cube side when items are cubic grids.
    pub fn cube_side(&self) -> Result<usize> {
        let n = libm::cbrt(self.item_len as f64) as usize;
        for cand in [n.saturating_sub(1), n, n + 1] {
            if cand * cand * cand == self.item_len {
                return Ok(cand);
            }
        }
        Err(Error::NotCubic { len: self.item_len })
    }
}

/// `value > threshold` elementwise; values equal to the threshold map to 0.
pub fn binarize(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|v| *v > threshold).collect()
}

/// Hamming distance divided by the item dimensionality.
pub fn hamming_mean(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            context: "hamming operands",
        });
    }
    let differing = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(differing as f64 / a.len() as f64)
}

fn kernel(a: &[bool], b: &[bool], bandwidth: f64) -> Result<f64> {
    Ok(libm::exp(-hamming_mean(a, b)? / bandwidth))
}

/// Biased squared-MMD estimator with the kernel
/// `k(x, y) = exp(-hamming_mean(x, y) / bandwidth)`:
/// mean within-A kernel + mean within-B kernel - 2 * mean cross kernel,
/// floored at zero.
pub fn mmd(set_a: &ShapeSet, set_b: &ShapeSet, bandwidth: f64) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::Empty { what: "shape set" });
    }
    if set_a.item_len() != set_b.item_len() {
        return Err(Error::ShapeMismatch {
            context: "shape set items",
        });
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Invalid {
            what: "mmd",
            why: "bandwidth must be positive",
        });
    }
    let mean_pairs = |xs: &[Vec<bool>], ys: &[Vec<bool>]| -> Result<f64> {
        let mut sum = 0.0;
        for x in xs {
            for y in ys {
                sum += kernel(x, y, bandwidth)?;
            }
        }
        Ok(sum / (xs.len() * ys.len()) as f64)
    };
    let within_a = mean_pairs(set_a.items(), set_a.items())?;
    let within_b = mean_pairs(set_b.items(), set_b.items())?;
    let cross = mean_pairs(set_a.items(), set_b.items())?;
    Ok((within_a + within_b - 2.0 * cross).max(0.0))
}

/// Intersection over union of two equal-shape binary arrays. Two empty
/// shapes are identical, so empty-over-empty is defined as 1.
pub fn iou(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            context: "iou operands",
        });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.iter().zip(b) {
        inter += usize::from(*x && *y);
        union += usize::from(*x || *y);
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

fn rotate_binary(g: &[bool], n: usize, view: Viewpoint) -> Vec<bool> {
    let values: Vec<f64> = g.iter().map(|b| f64::from(u8::from(*b))).collect();
    let rotated = rotate_values(&values, n, 1, view, Resampling::Nearest);
    binarize(&rotated, 0.5)
}

/// Rotates `g` by each azimuth of the default 8-view ring (nearest
/// resampling, re-binarized at 0.5) and returns the view index and IoU of
/// the rotation that best matches `x`. Ties break toward the lowest index.
pub fn align_best_rotation(g: &[bool], x: &[bool], n: usize) -> Result<(usize, f64)> {
    if g.len() != x.len() || g.len() != n * n * n {
        return Err(Error::ShapeMismatch {
            context: "alignment operands",
        });
    }
    let views = ViewpointSet::default();
    let mut best = (0usize, -1.0f64);
    for (index, view) in views.iter().enumerate() {
        let rotated = rotate_binary(g, n, view);
        let score = iou(&rotated, x)?;
        if score > best.1 {
            best = (index, score);
        }
    }
    Ok(best)
}

/// Coverage / accuracy / average over two sets of cubic binary grids.
///
/// Coverage is the mean over dataset items of the best aligned IoU against
/// any generated item (how much of the dataset's variety is covered);
/// accuracy is the mean over generated items of the best aligned IoU
/// against any dataset item. Alignment is chosen per pair.
pub fn chamfer_iou(set_g: &ShapeSet, set_d: &ShapeSet) -> Result<(f64, f64, f64)> {
    if set_g.is_empty() || set_d.is_empty() {
        return Err(Error::Empty { what: "shape set" });
    }
    if set_g.item_len() != set_d.item_len() {
        return Err(Error::ShapeMismatch {
            context: "shape set items",
        });
    }
    let n = set_g.cube_side()?;
    let best_against = |item: &[bool], others: &ShapeSet, rotate_other: bool| -> Result<f64> {
        let mut best = 0.0f64;
        for other in others.items() {
            let score = if rotate_other {
                align_best_rotation(other, item, n)?.1
            } else {
                align_best_rotation(item, other, n)?.1
            };
            if score > best {
                best = score;
            }
        }
        Ok(best)
    };
    // Generated shapes carry the arbitrary orientation, so they are the
    // rotated side of every pair.
    let mut coverage = 0.0;
    for x in set_d.items() {
        coverage += best_against(x, set_g, true)?;
    }
    coverage /= set_d.len() as f64;
    let mut accuracy = 0.0;
    for g in set_g.items() {
        accuracy += best_against(g, set_d, false)?;
    }
    accuracy /= set_g.len() as f64;
    Ok((coverage, accuracy, (coverage + accuracy) / 2.0))
}

/// Convenience: binarized grid set from voxel grids.
pub fn shape_set_from_grids(grids: &[VoxelGrid], threshold: f64) -> Result<ShapeSet> {
    ShapeSet::from_values(grids.iter().map(|g| g.values()), threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_items(count: usize, len: usize, rng: &mut SplitMix64) -> Vec<Vec<bool>> {
        (0..count)
            .map(|_| (0..len).map(|_| rng.next_f64() > 0.5).collect())
            .collect()
    }

    #[test]
    fn binarize_is_strict() {
        assert_eq!(binarize(&[0.0005, 0.5], 0.001), [false, true]);
        assert_eq!(binarize(&[0.0, 0.0], 0.001), [false, false]);
        assert_eq!(binarize(&[0.25], 0.25), [false]);
    }

    #[test]
    fn hamming_examples() {
        let a = [true, false, true, false];
        assert_eq!(hamming_mean(&a, &a).unwrap(), 0.0);
        let complement: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(hamming_mean(&a, &complement).unwrap(), 1.0);
        let one_off = [true, false, true, true];
        assert_eq!(hamming_mean(&a, &one_off).unwrap(), 0.25);
        assert!(hamming_mean(&a, &[true]).is_err());
    }

    #[test]
    fn mmd_identical_sets_is_zero() {
        let mut rng = SplitMix64::new(8);
        let set = ShapeSet::new(random_items(16, 64, &mut rng)).unwrap();
        let v = mmd(&set, &set, 1e-2).unwrap();
        assert!(v <= 1e-12, "mmd(X,X) = {v}");
    }

    #[test]
    fn mmd_is_symmetric() {
        let mut rng = SplitMix64::new(9);
        let a = ShapeSet::new(random_items(8, 32, &mut rng)).unwrap();
        let b = ShapeSet::new(random_items(8, 32, &mut rng)).unwrap();
        let ab = mmd(&a, &b, 1e-2).unwrap();
        let ba = mmd(&b, &a, 1e-2).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn mmd_singletons_match_hand_evaluation() {
        // hamming_mean = 0.5 on two 2-element items differing everywhere? No:
        // use 2 differing out of 4 elements.
        let x = alloc::vec![true, true, false, false];
        let y = alloc::vec![true, false, true, false];
        assert_eq!(hamming_mean(&x, &y).unwrap(), 0.5);
        let a = ShapeSet::new(alloc::vec![x]).unwrap();
        let b = ShapeSet::new(alloc::vec![y]).unwrap();
        let v = mmd(&a, &b, 1e-2).unwrap();
        let expected = 2.0 * (1.0 - libm::exp(-50.0));
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn mmd_rejects_empty_and_mismatched() {
        let a = ShapeSet::new(alloc::vec![alloc::vec![true]]).unwrap();
        let b = ShapeSet::new(alloc::vec![alloc::vec![true, false]]).unwrap();
        assert!(mmd(&a, &b, 1e-2).is_err());
        assert!(ShapeSet::new(alloc::vec![]).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = [true, true, false, false];
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let disjoint = [false, false, true, true];
        assert_eq!(iou(&a, &disjoint).unwrap(), 0.0);
        let empty = [false; 4];
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
    }

    /// Constructed 2^3 pair with |a and b| = 2, |a or b| = 8.
    #[test]
    fn iou_counted_pair() {
        // a = {0..4}, b = {3..7}: intersection {3,4}, union all 8
        let a = [true, true, true, true, true, false, false, false];
        let b = [false, false, false, true, true, true, true, true];
        assert_eq!(iou(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn alignment_identity_wins_with_tie_break() {
        let mut rng = SplitMix64::new(12);
        let g: Vec<bool> = (0..64).map(|_| rng.next_f64() > 0.5).collect();
        let (index, score) = align_best_rotation(&g, &g, 4).unwrap();
        assert_eq!(index, 0);
        assert_eq!(score, 1.0);
    }

    /// An asymmetric shape rotated by the 90-degree permutation must be
    /// recovered at the 90-degree view index with IoU 1.
    #[test]
    fn alignment_finds_a_quarter_turn() {
        let n = 4;
        let idx = |x: usize, y: usize, z: usize| (x * n + y) * n + z;
        let mut g = alloc::vec![false; n * n * n];
        // L-shaped: no azimuthal symmetry.
        g[idx(0, 1, 0)] = true;
        g[idx(1, 1, 0)] = true;
        g[idx(2, 1, 0)] = true;
        g[idx(2, 1, 1)] = true;
        // x[dest] = g[src] under the quarter-turn permutation
        // dest (x,y,z) <- src (n-1-z, y, x).
        let mut x = alloc::vec![false; n * n * n];
        for xd in 0..n {
            for yd in 0..n {
                for zd in 0..n {
                    x[(xd * n + yd) * n + zd] = g[((n - 1 - zd) * n + yd) * n + xd];
                }
            }
        }
        let (index, score) = align_best_rotation(&g, &x, n).unwrap();
        assert_eq!(index, 2, "90 degrees is view index 2 of the 8-ring");
        assert_eq!(score, 1.0);
    }

    #[test]
    fn alignment_of_empty_against_nonempty() {
        let g = alloc::vec![false; 27];
        let mut x = alloc::vec![false; 27];
        x[13] = true;
        let (index, score) = align_best_rotation(&g, &x, 3).unwrap();
        assert_eq!((index, score), (0, 0.0));
    }

    #[test]
    fn chamfer_of_a_set_with_itself_is_ones() {
        let mut rng = SplitMix64::new(21);
        let set = ShapeSet::new(random_items(4, 27, &mut rng)).unwrap();
        let (coverage, accuracy, avg) = chamfer_iou(&set, &set).unwrap();
        assert_eq!((coverage, accuracy, avg), (1.0, 1.0, 1.0));
    }

    #[test]
    fn chamfer_singletons_reduce_to_pair_iou() {
        // Singleton sets collapse both chamfer terms onto the single
        // aligned pair score.
        let a = alloc::vec![true, true, true, true, true, false, false, false];
        let b = alloc::vec![false, false, false, true, true, true, true, true];
        let expected = {
            let mut best = 0.0f64;
            for view in ViewpointSet::default().iter() {
                let r = rotate_binary(&a, 2, view);
                best = best.max(iou(&r, &b).unwrap());
            }
            best
        };
        let sa = ShapeSet::new(alloc::vec![a]).unwrap();
        let sb = ShapeSet::new(alloc::vec![b]).unwrap();
        let (coverage, accuracy, avg) = chamfer_iou(&sa, &sb).unwrap();
        assert_eq!(coverage, expected);
        assert_eq!(accuracy, expected);
        assert_eq!(avg, expected);
    }

    #[test]
    fn adding_a_dataset_copy_never_decreases_coverage() {
        let mut rng = SplitMix64::new(33);
        let d_items = random_items(3, 27, &mut rng);
        let g_items = random_items(2, 27, &mut rng);
        let d = ShapeSet::new(d_items.clone()).unwrap();
        let g = ShapeSet::new(g_items.clone()).unwrap();
        let (before, _, _) = chamfer_iou(&g, &d).unwrap();
        let mut extended = g_items;
        extended.push(d_items[0].clone());
        let g2 = ShapeSet::new(extended).unwrap();
        let (after, _, _) = chamfer_iou(&g2, &d).unwrap();
        assert!(after >= before);
    }

    #[test]
    fn cube_side_detection() {
        let set = ShapeSet::new(alloc::vec![alloc::vec![false; 27]]).unwrap();
        assert_eq!(set.cube_side().unwrap(), 3);
        let flat = ShapeSet::new(alloc::vec![alloc::vec![false; 12]]).unwrap();
        assert!(flat.cube_side().is_err());
    }
}
