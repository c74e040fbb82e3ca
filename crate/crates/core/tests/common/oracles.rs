//! Naive reference implementations used by tests to cross-check the
//! production algorithms. Nothing outside tests should call these; they
//! share no code with the modules they check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use panoptic_sip::metrics::{ClassScores, PanopticScores};
use panoptic_sip::{ClassConfig, Error, Result, SemanticMap};

pub const DENSE_MAX_SEEDS: usize = 2000;

/// Dense adjacency: same class and Euclidean distance strictly below the
/// class radius, self-loops included.
pub fn dense_adjacency(positions: &[[f64; 3]], classes: &[u16], radius_of: impl Fn(u16) -> Option<f64>) -> Vec<Vec<bool>> {
    let m = positions.len();
    let mut adj = vec![vec![false; m]; m];
    for u in 0..m {
        for v in 0..m {
            if classes[u] != classes[v] {
                continue;
            }
            let Some(r) = radius_of(classes[u]) else {
                adj[u][v] = u == v;
                continue;
            };
            let d = ((positions[u][0] - positions[v][0]).powi(2)
                + (positions[u][1] - positions[v][1]).powi(2)
                + (positions[u][2] - positions[v][2]).powi(2))
            .sqrt();
            adj[u][v] = d < r;
        }
    }
    adj
}

/// Applies `X <- (D^-1 K) X` `iterations` times with explicit dense matrix
/// products, `D = diag(K 1)`.
pub fn dense_shift_oracle(positions: &[[f64; 3]], adjacency: &[Vec<bool>], iterations: usize) -> Result<Vec<[f64; 3]>> {
    let m = positions.len();
    if m > DENSE_MAX_SEEDS {
        return Err(Error::OracleGuard(format!(
            "{m} seeds exceed the dense limit of {DENSE_MAX_SEEDS}"
        )));
    }
    let mut w = vec![0.0f64; m * m];
    for u in 0..m {
        let degree = adjacency[u].iter().filter(|&&a| a).count() as f64;
        for v in 0..m {
            if adjacency[u][v] {
                w[u * m + v] = 1.0 / degree;
            }
        }
    }
    let mut x: Vec<f64> = positions.iter().flat_map(|p| p.iter().copied()).collect();
    let mut y = vec![0.0f64; m * 3];
    for _ in 0..iterations {
        for u in 0..m {
            for k in 0..3 {
                let mut acc = 0.0;
                for v in 0..m {
                    acc += w[u * m + v] * x[v * 3 + k];
                }
                y[u * 3 + k] = acc;
            }
        }
        std::mem::swap(&mut x, &mut y);
    }
    Ok(x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Breadth-first connected components over `0..n` with an arbitrary edge
/// predicate. Labels are dense, ordered by each component's lowest vertex.
pub fn bfs_components(n: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Vec<u32> {
    let mut label = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if label[v] == u32::MAX && (edge(u, v) || edge(v, u)) {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Whether two labelings induce the same partition of the points whose label
/// is non-zero in both, with zero ("unlabeled") positions required to agree.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ab: BTreeMap<u32, u32> = BTreeMap::new();
    let mut ba: BTreeMap<u32, u32> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if (x == 0) != (y == 0) {
            return false;
        }
        if x == 0 {
            continue;
        }
        if *ab.entry(x).or_insert(y) != y || *ba.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

#[derive(Default, Clone, Copy)]
struct Tally {
    tp: u64,
    fp: u64,
    fn_: u64,
    iou_sum: f64,
    inter: u64,
    union: u64,
}

/// Brute-force panoptic evaluation over several scans: enumerates every
/// ground-truth × predicted segment pair and counts overlaps by scanning all
/// points.
pub fn brute_force_panoptic(scans: &[(SemanticMap, SemanticMap)], cfg: &ClassConfig) -> Result<PanopticScores> {
    let mut tallies: BTreeMap<u16, Tally> = BTreeMap::new();
    for (pred, gt) in scans {
        if pred.semantic.len() != gt.semantic.len() {
            return Err(Error::Evaluation("length mismatch".into()));
        }
        let n = gt.semantic.len();
        let kept: Vec<usize> = (0..n).filter(|&i| !cfg.ignore.contains(&gt.semantic[i])).collect();
        for &i in &kept {
            for c in [gt.semantic[i], pred.semantic[i]] {
                if cfg.class(c).is_none() && !cfg.ignore.contains(&c) {
                    return Err(Error::Evaluation(format!("class {c} is not in the class table")));
                }
            }
        }
        let inst = |map: &SemanticMap, i: usize| {
            if cfg.class(map.semantic[i]).is_some_and(|c| c.is_thing) {
                map.instance[i]
            } else {
                0
            }
        };

        let classes: BTreeSet<u16> = kept
            .iter()
            .flat_map(|&i| [gt.semantic[i], pred.semantic[i]])
            .filter(|c| !cfg.ignore.contains(c))
            .collect();
        for class in classes {
            let gt_segs: BTreeSet<u16> = kept
                .iter()
                .filter(|&&i| gt.semantic[i] == class)
                .map(|&i| inst(gt, i))
                .collect();
            let pred_segs: BTreeSet<u16> = kept
                .iter()
                .filter(|&&i| pred.semantic[i] == class)
                .map(|&i| inst(pred, i))
                .collect();
            let t = tallies.entry(class).or_default();
            let mut pred_matched: BTreeSet<u16> = BTreeSet::new();
            for &g in &gt_segs {
                let mut matched = false;
                for &p in &pred_segs {
                    let mut inter = 0u64;
                    let mut union = 0u64;
                    for &i in &kept {
                        let in_g = gt.semantic[i] == class && inst(gt, i) == g;
                        let in_p = pred.semantic[i] == class && inst(pred, i) == p;
                        if in_g && in_p {
                            inter += 1;
                        }
                        if in_g || in_p {
                            union += 1;
                        }
                    }
                    let iou = inter as f64 / union as f64;
                    if iou > 0.5 {
                        t.tp += 1;
                        t.iou_sum += iou;
                        matched = true;
                        pred_matched.insert(p);
                    }
                }
                if !matched {
                    t.fn_ += 1;
                }
            }
            t.fp += pred_segs.iter().filter(|p| !pred_matched.contains(p)).count() as u64;
            for &i in &kept {
                let (g, p) = (gt.semantic[i], pred.semantic[i]);
                if g == class && p == class {
                    t.inter += 1;
                }
                if g == class || p == class {
                    t.union += 1;
                }
            }
        }
    }

    let mut classes = Vec::new();
    for info in cfg.classes() {
        let Some(t) = tallies.get(&info.id) else {
            continue;
        };
        if t.tp + t.fp + t.fn_ == 0 {
            continue;
        }
        let sq = if t.tp == 0 { 0.0 } else { t.iou_sum / t.tp as f64 };
        let rq = t.tp as f64 / (t.tp as f64 + 0.5 * t.fp as f64 + 0.5 * t.fn_ as f64);
        classes.push(ClassScores {
            id: info.id,
            name: info.name.clone(),
            thing: info.is_thing,
            pq: sq * rq,
            sq,
            rq,
            iou: if t.union == 0 { 0.0 } else { t.inter as f64 / t.union as f64 },
            tp: t.tp,
            fp: t.fp,
            fn_: t.fn_,
        });
    }
    let avg = |vals: Vec<f64>| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let pick = |f: &dyn Fn(&ClassScores) -> Option<f64>| avg(classes.iter().filter_map(f).collect());
    Ok(PanopticScores {
        pq: pick(&|c| Some(c.pq)),
        sq: pick(&|c| Some(c.sq)),
        rq: pick(&|c| Some(c.rq)),
        pq_th: pick(&|c| c.thing.then_some(c.pq)),
        sq_th: pick(&|c| c.thing.then_some(c.sq)),
        rq_th: pick(&|c| c.thing.then_some(c.rq)),
        pq_st: pick(&|c| (!c.thing).then_some(c.pq)),
        sq_st: pick(&|c| (!c.thing).then_some(c.sq)),
        rq_st: pick(&|c| (!c.thing).then_some(c.rq)),
        pq_dagger: pick(&|c| Some(if c.thing { c.pq } else { c.iou })),
        miou: pick(&|c| Some(c.iou)),
        classes,
    })
}
