//! Post-hoc example typing from k-nearest-neighbor class composition.
//!
//! With `s` same-class examples among the `k = 5` nearest neighbors an example
//! is safe (`s` in {4, 5}), borderline ({2, 3}), rare (1) or an outlier (0).
//! Neighbor search uses a k-d tree; distance ties go to the lower example index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::euclidean_sq;
use crate::model::{LabeledExample, Point, N_ATTRIBUTES};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_WINDOW: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodType {
    Safe,
    Borderline,
    Rare,
    Outlier,
}

impl NeighborhoodType {
    pub const ALL: [NeighborhoodType; 4] =
        [NeighborhoodType::Safe, NeighborhoodType::Borderline, NeighborhoodType::Rare, NeighborhoodType::Outlier];

    /// Type from the number of same-class neighbors among `k`, scaled to the k = 5 thresholds.
    pub fn from_same_class(same: usize, k: usize) -> Self {
        // 5 -> {4,5} safe, {2,3} borderline, 1 rare, 0 outlier
        let scaled = same as f64 * 5.0 / k as f64;
        if scaled >= 3.5 {
            NeighborhoodType::Safe
        } else if scaled >= 1.5 {
            NeighborhoodType::Borderline
        } else if same >= 1 {
            NeighborhoodType::Rare
        } else {
            NeighborhoodType::Outlier
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("window of {size} examples is too small for k = {k} (needs at least {})", k + 1)]
    WindowTooSmall { size: usize, k: usize },
}

/// Exact k-nearest-neighbor index over a fixed point set.
#[derive(Clone, Debug)]
pub struct KdTree<'a> {
    points: &'a [Point],
    ids: &'a [u64],
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

#[derive(Clone, Debug)]
struct KdNode {
    item: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist: f64,
    id: u64,
    item: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> KdTree<'a> {
    /// `ids[i]` orders ties; pass example indices.
    pub fn build(points: &'a [Point], ids: &'a [u64]) -> Self {
        assert_eq!(points.len(), ids.len());
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree { points, ids, nodes: Vec::with_capacity(points.len()), root: None };
        tree.root = tree.build_rec(&mut order, 0);
        tree
    }

    fn build_rec(&mut self, items: &mut [usize], depth: usize) -> Option<usize> {
        if items.is_empty() {
            return None;
        }
        let axis = depth % N_ATTRIBUTES;
        let mid = items.len() / 2;
        let points = self.points;
        items.select_nth_unstable_by(mid, |a, b| points[*a][axis].total_cmp(&points[*b][axis]));
        let item = items[mid];
        let (lo, rest) = items.split_at_mut(mid);
        let hi = &mut rest[1..];
        let slot = self.nodes.len();
        self.nodes.push(KdNode { item, axis, left: None, right: None });
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(hi, depth + 1);
        self.nodes[slot].left = left;
        self.nodes[slot].right = right;
        Some(slot)
    }

    /// The `k` nearest items to `query`, nearest first, skipping item `exclude`.
    pub fn nearest(&self, query: &Point, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(self.root, query, k, exclude, &mut heap);
        }
        let mut found = heap.into_vec();
        found.sort();
        found.into_iter().map(|c| c.item).collect()
    }

    fn search(&self, node: Option<usize>, q: &Point, k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        if Some(node.item) != exclude {
            let cand = Candidate { dist: euclidean_sq(&self.points[node.item], q), id: self.ids[node.item], item: node.item };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("full heap") {
                heap.pop();
                heap.push(cand);
            }
        }
        let diff = q[node.axis] - self.points[node.item][node.axis];
        let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.search(near, q, k, exclude, heap);
        // Equal distances may still hide a lower index on the far side.
        if heap.len() < k || diff * diff <= heap.peek().expect("nonempty").dist {
            self.search(far, q, k, exclude, heap);
        }
    }
}

/// The `k` nearest examples of `window[query]`, excluding itself.
pub fn knn(window: &[LabeledExample], query: usize, k: usize) -> Result<Vec<usize>, LabelError> {
    if window.len() < k + 1 {
        return Err(LabelError::WindowTooSmall { size: window.len(), k });
    }
    let points: Vec<Point> = window.iter().map(|e| e.x).collect();
    let ids: Vec<u64> = window.iter().map(|e| e.t).collect();
    let tree = KdTree::build(&points, &ids);
    Ok(tree.nearest(&points[query], k, Some(query)))
}

/// Types every example of the window.
pub fn label_types(window: &[LabeledExample], k: usize) -> Result<Vec<NeighborhoodType>, LabelError> {
    if window.len() < k + 1 {
        return Err(LabelError::WindowTooSmall { size: window.len(), k });
    }
    let points: Vec<Point> = window.iter().map(|e| e.x).collect();
    let ids: Vec<u64> = window.iter().map(|e| e.t).collect();
    let tree = KdTree::build(&points, &ids);
    Ok(window
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let same = tree.nearest(&e.x, k, Some(i)).into_iter().filter(|&j| window[j].y == e.y).count();
            NeighborhoodType::from_same_class(same, k)
        })
        .collect())
}

/// Normalized (safe, borderline, rare, outlier) shares of `class`, or `None` when the class is absent.
pub fn type_distribution(tags: &[NeighborhoodType], labels: &[usize], class: usize) -> Option<[f64; 4]> {
    let mut counts = [0usize; 4];
    for (tag, y) in tags.iter().zip(labels) {
        if *y == class {
            counts[tag.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    (total > 0).then(|| counts.map(|c| c as f64 / total as f64))
}

/// Per-class type counts over one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeHistogram {
    pub window_start: u64,
    pub window_end: u64,
    /// `counts[class] = [safe, borderline, rare, outlier]`
    pub counts: Vec<[usize; 4]>,
}

impl TypeHistogram {
    pub fn proportions(&self, class: usize) -> Option<[f64; 4]> {
        let c = self.counts[class];
        let total: usize = c.iter().sum();
        (total > 0).then(|| c.map(|v| v as f64 / total as f64))
    }
}

/// Labels consecutive windows of `window` examples. The last window may be shorter, and a
/// tail of at most `k` examples is merged into the window before it; a stream shorter than
/// one window is a single window.
pub fn label_windows(
    stream: &[LabeledExample],
    n_classes: usize,
    k: usize,
    window: usize,
) -> Result<Vec<TypeHistogram>, LabelError> {
    let window = window.max(1);
    let mut bounds: Vec<(usize, usize)> = (0..stream.len()).step_by(window).map(|s| (s, (s + window).min(stream.len()))).collect();
    // a tail too short to label joins the window before it
    if bounds.len() > 1 && bounds[bounds.len() - 1].1 - bounds[bounds.len() - 1].0 <= k {
        let (_, end) = bounds.pop().expect("nonempty");
        bounds.last_mut().expect("nonempty").1 = end;
    }
    let mut out = Vec::new();
    for chunk in bounds.into_iter().map(|(s, e)| &stream[s..e]) {
        let tags = label_types(chunk, k)?;
        let mut counts = vec![[0usize; 4]; n_classes];
        for (tag, e) in tags.iter().zip(chunk) {
            counts[e.y][tag.index()] += 1;
        }
        out.push(TypeHistogram {
            window_start: chunk[0].t,
            window_end: chunk[chunk.len() - 1].t,
            counts,
        });
    }
    Ok(out)
}

/// Writes `window_end,class,safe,borderline,rare,outlier` rows with per-class proportions.
/// Classes absent from a window are omitted.
pub fn write_type_csv<W: Write>(out: &mut W, histograms: &[TypeHistogram], class_names: &[String]) -> io::Result<()> {
    writeln!(out, "window_end,class,safe,borderline,rare,outlier")?;
    for h in histograms {
        for (c, name) in class_names.iter().enumerate() {
            if let Some(p) = h.proportions(c) {
                writeln!(out, "{},{},{:.6},{:.6},{:.6},{:.6}", h.window_end, name, p[0], p[1], p[2], p[3])?;
            }
        }
    }
    Ok(())
}
