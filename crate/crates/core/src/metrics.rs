//! Panoptic quality evaluation.
//!
//! Segments are `(class, instance)` pairs. Stuff classes form one segment per
//! class regardless of instance IDs, and a thing point with instance 0 belongs
//! to the class's "instance 0" segment. A prediction matches a ground-truth
//! segment of the same class when their IoU exceeds 0.5, so matches are
//! unique. Points whose ground-truth class is ignored are dropped before any
//! counting.
//!
//! Per class, `SQ` is the mean IoU of matches, `RQ = TP / (TP + FP/2 + FN/2)`
//! and `PQ = SQ * RQ`. Averages run over classes that appear in the ground
//! truth or the prediction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::config::ClassConfig;
use crate::error::{Error, Result};
use crate::model::{ProposalSet, SemanticMap};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ClassAccum {
    tp: u64,
    fp: u64,
    fn_: u64,
    iou_sum: f64,
    sem_tp: u64,
    sem_fp: u64,
    sem_fn: u64,
}

impl ClassAccum {
    fn add(&mut self, o: &ClassAccum) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.iou_sum += o.iou_sum;
        self.sem_tp += o.sem_tp;
        self.sem_fp += o.sem_fp;
        self.sem_fn += o.sem_fn;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub id: u16,
    pub name: String,
    pub thing: bool,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub iou: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Scores as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanopticScores {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub pq_th: f64,
    pub sq_th: f64,
    pub rq_th: f64,
    pub pq_st: f64,
    pub sq_st: f64,
    pub rq_st: f64,
    pub pq_dagger: f64,
    pub miou: f64,
    pub classes: Vec<ClassScores>,
}

impl PanopticScores {
    pub fn class(&self, id: u16) -> Option<&ClassScores> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scores serialize")
    }

    /// Human-readable table with scores in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
            "class", "kind", "PQ", "SQ", "RQ", "IoU", "TP", "FP", "FN"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>6} {:>6} {:>6}",
                c.name,
                if c.thing { "thing" } else { "stuff" },
                c.pq * 100.0,
                c.sq * 100.0,
                c.rq * 100.0,
                c.iou * 100.0,
                c.tp,
                c.fp,
                c.fn_
            );
        }
        let _ = writeln!(out);
        let rows = [
            ("all", self.pq, self.sq, self.rq),
            ("things", self.pq_th, self.sq_th, self.rq_th),
            ("stuff", self.pq_st, self.sq_st, self.rq_st),
        ];
        let _ = writeln!(out, "{:<16} {:>7} {:>7} {:>7}", "", "PQ", "SQ", "RQ");
        for (name, pq, sq, rq) in rows {
            let _ = writeln!(
                out,
                "{:<16} {:>7.1} {:>7.1} {:>7.1}",
                name,
                pq * 100.0,
                sq * 100.0,
                rq * 100.0
            );
        }
        let _ = writeln!(out, "PQ-dagger {:>6.1}", self.pq_dagger * 100.0);
        let _ = writeln!(out, "mIoU      {:>6.1}", self.miou * 100.0);
        out
    }
}

/// Accumulates counts over any number of scans.
#[derive(Debug, Clone)]
pub struct PanopticEvaluator {
    cfg: ClassConfig,
    accum: BTreeMap<u16, ClassAccum>,
}

type SegKey = (u16, u16);

impl PanopticEvaluator {
    pub fn new(cfg: &ClassConfig) -> Self {
        PanopticEvaluator {
            cfg: cfg.clone(),
            accum: BTreeMap::new(),
        }
    }

    fn check_class(&self, class: u16, side: &str) -> Result<()> {
        if self.cfg.class(class).is_none() && !self.cfg.is_ignored(class) {
            return Err(Error::Evaluation(format!(
                "{side} class {class} is not in the class table"
            )));
        }
        Ok(())
    }

    #[inline]
    fn segment(&self, class: u16, instance: u16) -> SegKey {
        if self.cfg.is_thing(class) {
            (class, instance)
        } else {
            (class, 0)
        }
    }

    pub fn add_scan(&mut self, pred: &SemanticMap, gt: &SemanticMap) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Evaluation(format!(
                "prediction has {} points but ground truth has {}",
                pred.len(),
                gt.len()
            )));
        }
        let mut scan: BTreeMap<u16, ClassAccum> = BTreeMap::new();
        let mut gt_area: FxHashMap<SegKey, u64> = FxHashMap::default();
        let mut pred_area: FxHashMap<SegKey, u64> = FxHashMap::default();
        let mut inter: FxHashMap<(u16, u16, u16), u64> = FxHashMap::default();

        for i in 0..gt.len() {
            let g = gt.semantic[i];
            if self.cfg.is_ignored(g) {
                continue;
            }
            let p = pred.semantic[i];
            self.check_class(g, "ground-truth")?;
            self.check_class(p, "predicted")?;
            let pred_counts = !self.cfg.is_ignored(p);

            if g == p {
                scan.entry(g).or_default().sem_tp += 1;
            } else {
                scan.entry(g).or_default().sem_fn += 1;
                if pred_counts {
                    scan.entry(p).or_default().sem_fp += 1;
                }
            }

            let gk = self.segment(g, gt.instance[i]);
            *gt_area.entry(gk).or_default() += 1;
            if pred_counts {
                let pk = self.segment(p, pred.instance[i]);
                *pred_area.entry(pk).or_default() += 1;
                if g == p {
                    *inter.entry((g, gk.1, pk.1)).or_default() += 1;
                }
            }
        }

        let mut pairs: Vec<_> = inter.into_iter().collect();
        pairs.sort_unstable_by_key(|&(k, _)| k);
        let mut matched_gt: FxHashSet<SegKey> = FxHashSet::default();
        let mut matched_pred: FxHashSet<SegKey> = FxHashSet::default();
        for ((class, gi, pi), n) in pairs {
            let union = gt_area[&(class, gi)] + pred_area[&(class, pi)] - n;
            let iou = n as f64 / union as f64;
            if iou > 0.5 {
                let acc = scan.entry(class).or_default();
                acc.tp += 1;
                acc.iou_sum += iou;
                matched_gt.insert((class, gi));
                matched_pred.insert((class, pi));
            }
        }
        for key in gt_area.keys() {
            if !matched_gt.contains(key) {
                scan.entry(key.0).or_default().fn_ += 1;
            }
        }
        for key in pred_area.keys() {
            if !matched_pred.contains(key) {
                scan.entry(key.0).or_default().fp += 1;
            }
        }

        for (class, acc) in scan {
            self.accum.entry(class).or_default().add(&acc);
        }
        Ok(())
    }

    /// Folds another evaluator's counts into this one.
    pub fn merge(&mut self, other: &PanopticEvaluator) {
        for (class, acc) in &other.accum {
            self.accum.entry(*class).or_default().add(acc);
        }
    }

    pub fn finalize(&self) -> PanopticScores {
        let mut classes = Vec::new();
        for info in self.cfg.classes() {
            if self.cfg.is_ignored(info.id) {
                continue;
            }
            let Some(acc) = self.accum.get(&info.id) else {
                continue;
            };
            if acc.tp + acc.fp + acc.fn_ == 0 {
                continue;
            }
            let sq = if acc.tp > 0 { acc.iou_sum / acc.tp as f64 } else { 0.0 };
            let rq = acc.tp as f64 / (acc.tp as f64 + 0.5 * acc.fp as f64 + 0.5 * acc.fn_ as f64);
            let union = acc.sem_tp + acc.sem_fp + acc.sem_fn;
            let iou = if union > 0 { acc.sem_tp as f64 / union as f64 } else { 0.0 };
            classes.push(ClassScores {
                id: info.id,
                name: info.name.clone(),
                thing: info.is_thing,
                pq: sq * rq,
                sq,
                rq,
                iou,
                tp: acc.tp,
                fp: acc.fp,
                fn_: acc.fn_,
            });
        }

        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                0.0
            } else {
                s / n as f64
            }
        };
        let th = |c: &&ClassScores| c.thing;
        let st = |c: &&ClassScores| !c.thing;
        PanopticScores {
            pq: mean(&mut classes.iter().map(|c| c.pq)),
            sq: mean(&mut classes.iter().map(|c| c.sq)),
            rq: mean(&mut classes.iter().map(|c| c.rq)),
            pq_th: mean(&mut classes.iter().filter(th).map(|c| c.pq)),
            sq_th: mean(&mut classes.iter().filter(th).map(|c| c.sq)),
            rq_th: mean(&mut classes.iter().filter(th).map(|c| c.rq)),
            pq_st: mean(&mut classes.iter().filter(st).map(|c| c.pq)),
            sq_st: mean(&mut classes.iter().filter(st).map(|c| c.sq)),
            rq_st: mean(&mut classes.iter().filter(st).map(|c| c.rq)),
            pq_dagger: mean(&mut classes.iter().map(|c| if c.thing { c.pq } else { c.iou })),
            miou: mean(&mut classes.iter().map(|c| c.iou)),
            classes,
        }
    }
}

/// Scores one scan whose predicted instances come from a proposal set.
pub fn evaluate(
    pred_semantic: &SemanticMap,
    proposals: &ProposalSet,
    gt: &SemanticMap,
    cfg: &ClassConfig,
) -> Result<PanopticScores> {
    let pred = proposals.to_semantic_map(pred_semantic)?;
    evaluate_maps(&pred, gt, cfg)
}

pub fn evaluate_maps(pred: &SemanticMap, gt: &SemanticMap, cfg: &ClassConfig) -> Result<PanopticScores> {
    let mut ev = PanopticEvaluator::new(cfg);
    ev.add_scan(pred, gt)?;
    Ok(ev.finalize())
}
