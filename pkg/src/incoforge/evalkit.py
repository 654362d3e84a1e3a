"""Evaluation metrics.

Classification side: accuracy/precision/recall/F1 over pooled (score, gold)
pairs, ROC curves, and AUC computed two ways (rank statistic and trapezoid
under the ROC) that must agree.

Generation side: corpus-level BLEU, NIST, a METEOR-style unigram-alignment
score without synonym tables (exact + Porter-stem stages, reported as
"meteor_lite"), n-gram entropy, distinct-n, and mean length. Single
reference per hypothesis.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from math import exp, log, log2
from typing import Iterable, Sequence

from .porter import stem

__all__ = [
    "DegenerateClassError",
    "classification_report",
    "roc_points",
    "trapezoid_auc",
    "auc",
    "bleu",
    "nist",
    "meteor_lite",
    "entropy_n",
    "dist_n",
    "mean_length",
    "generation_report",
    "per_position_auc",
    "read_predictions",
    "read_prediction_records",
    "read_generations",
    "format_report",
]

log_ = logging.getLogger(__name__)

Pred = tuple[float, int]  # (score in [0,1], gold label)


class DegenerateClassError(ValueError):
    """AUC needs at least one positive and one negative."""


def classification_report(preds: Sequence[Pred], threshold: float = 0.5) -> dict:
    """Confusion counts and Acc/P/R/F1 at a decision threshold.

    Zero-denominator precision/recall are reported as 0 and flagged.
    """
    if not preds:
        raise ValueError("empty prediction set")
    tp = fp = fn = tn = 0
    for score, gold in preds:
        pred = 1 if score >= threshold else 0
        if pred == 1 and gold == 1:
            tp += 1
        elif pred == 1 and gold == 0:
            fp += 1
        elif pred == 0 and gold == 1:
            fn += 1
        else:
            tn += 1
    total = tp + fp + fn + tn
    degenerate = []
    if tp + fp == 0:
        precision = 0.0
        degenerate.append("precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        degenerate.append("recall")
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {
        "accuracy": (tp + tn) / total,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "tn": tn,
        "threshold": threshold,
        "degenerate": degenerate,
    }


def roc_points(preds: Sequence[Pred]) -> list[tuple[float, float]]:
    """(FPR, TPR) points over all score thresholds, from (0,0) to (1,1).

    Tied scores advance as one group, so ties trace a diagonal segment.
    """
    n_pos = sum(1 for _, g in preds if g == 1)
    n_neg = len(preds) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError("need at least one positive and one negative")
    ordered = sorted(preds, key=lambda p: -p[0])
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            if ordered[j][1] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return points


def trapezoid_auc(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def auc(preds: Sequence[Pred]) -> tuple[float, list[tuple[float, float]]]:
    """AUC as the rank statistic (ties count 0.5) plus the ROC points.

    Equal to the trapezoidal area under roc_points on every input.
    """
    n_pos = sum(1 for _, g in preds if g == 1)
    n_neg = len(preds) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError("need at least one positive and one negative")
    ordered = sorted(preds, key=lambda p: p[0])
    # Midranks: tied scores share the average of their 1-based rank range.
    rank_sum_pos = 0.0
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            j += 1
        midrank = (i + 1 + j) / 2.0  # average of ranks i+1 .. j
        rank_sum_pos += midrank * sum(1 for k in range(i, j) if ordered[k][1] == 1)
        i = j
    value = (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return value, roc_points(preds)


# --- generation metrics ---------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def bleu(
    hyps: Sequence[Sequence[str]],
    refs: Sequence[Sequence[str]],
    max_n: int = 4,
    smooth: bool = False,
) -> float:
    """Corpus-level BLEU as a percentage: clipped n-gram precision pooled
    over the corpus, geometric mean over orders 1..max_n, brevity penalty
    exp(1 - r/c) when c < r. Without smoothing, a zero precision at any
    order gives 0."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch")
    if not hyps:
        raise ValueError("empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    c_len = 0
    r_len = 0
    for hyp, ref in zip(hyps, refs):
        c_len += len(hyp)
        r_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_counts = Counter(_ngrams(hyp, n))
            ref_counts = Counter(_ngrams(ref, n))
            total[n - 1] += max(len(hyp) - n + 1, 0)
            for g, c in hyp_counts.items():
                matched[n - 1] += min(c, ref_counts.get(g, 0))
    if c_len == 0:
        return 0.0
    log_precisions = []
    for n in range(max_n):
        m, t = matched[n], total[n]
        if smooth and n >= 1:
            m, t = m + 1, t + 1
        if t == 0 or m == 0:
            return 0.0
        log_precisions.append(log(m / t))
    bp = 1.0 if c_len > r_len else exp(1.0 - r_len / c_len)
    return 100.0 * bp * exp(sum(log_precisions) / max_n)


# Brevity factor constant: 0.5 when the hypothesis/reference length ratio
# is 2/3.
_NIST_BETA = log(0.5) / log(2.0 / 3.0) ** 2


def nist(
    hyps: Sequence[Sequence[str]],
    refs: Sequence[Sequence[str]],
    max_n: int = 4,
) -> float:
    """Corpus-level NIST: information-weighted n-gram matches.

    Info(w_1..w_n) = log2(count(w_1..w_{n-1}) / count(w_1..w_n)) over the
    pooled reference statistics (the (n-1)-gram count for n=1 is the total
    reference token count). Per order, matched info divides by the total
    hypothesis n-gram count; orders sum and the NIST brevity factor
    exp(beta * ln^2(min(c/r, 1))) scales the result."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch")
    if not hyps:
        raise ValueError("empty corpus")
    # Reference n-gram statistics pooled over the corpus.
    ref_counts: list[Counter] = [Counter() for _ in range(max_n + 1)]
    for ref in refs:
        ref_counts[0][()] += len(ref)
        for n in range(1, max_n + 1):
            ref_counts[n].update(_ngrams(ref, n))

    def info(gram: tuple[str, ...]) -> float:
        denom = ref_counts[len(gram)][gram]
        numer = ref_counts[len(gram) - 1][gram[:-1]] if len(gram) > 1 else ref_counts[0][()]
        if denom == 0 or numer == 0:
            return 0.0
        return log2(numer / denom)

    score_total = 0.0
    c_len = sum(len(h) for h in hyps)
    r_len = sum(len(r) for r in refs)
    if c_len == 0:
        return 0.0
    for n in range(1, max_n + 1):
        matched_info = 0.0
        hyp_total = 0
        for hyp, ref in zip(hyps, refs):
            hyp_total += max(len(hyp) - n + 1, 0)
            hyp_grams = Counter(_ngrams(hyp, n))
            seg_ref = Counter(_ngrams(ref, n))
            for g, c in hyp_grams.items():
                m = min(c, seg_ref.get(g, 0))
                if m:
                    matched_info += m * info(g)
        if hyp_total:
            score_total += matched_info / hyp_total
    ratio = min(c_len / r_len, 1.0) if r_len else 1.0
    brevity = exp(_NIST_BETA * log(ratio) ** 2) if ratio < 1.0 else 1.0
    return score_total * brevity


def _align_stage(
    hyp: Sequence[str],
    ref: Sequence[str],
    hyp_free: list[bool],
    ref_free: list[bool],
    key,
) -> list[tuple[int, int]]:
    # Per word type, pair i-th free occurrence in hyp with i-th in ref.
    ref_slots: dict[str, list[int]] = {}
    for j, w in enumerate(ref):
        if ref_free[j]:
            ref_slots.setdefault(key(w), []).append(j)
    pairs = []
    for i, w in enumerate(hyp):
        if not hyp_free[i]:
            continue
        slots = ref_slots.get(key(w))
        if slots:
            j = slots.pop(0)
            pairs.append((i, j))
            hyp_free[i] = False
            ref_free[j] = False
    return pairs


def meteor_lite(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Unigram-alignment score: exact matches first, Porter-stem matches on
    the leftovers; F_mean = P*R / (0.9P + 0.1R), fragmentation penalty
    0.5 * (chunks/matches)^3. No synonym or paraphrase resources."""
    if not hyp or not ref:
        raise ValueError("meteor_lite requires non-empty token lists")
    hyp_free = [True] * len(hyp)
    ref_free = [True] * len(ref)
    pairs = _align_stage(hyp, ref, hyp_free, ref_free, key=lambda w: w)
    pairs += _align_stage(hyp, ref, hyp_free, ref_free, key=stem)
    m = len(pairs)
    if m == 0:
        return 0.0
    p = m / len(hyp)
    r = m / len(ref)
    f_mean = p * r / (0.9 * p + 0.1 * r)
    pairs.sort()
    chunks = 1
    for (h0, r0), (h1, r1) in zip(pairs, pairs[1:]):
        if h1 != h0 + 1 or r1 != r0 + 1:
            chunks += 1
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def entropy_n(hyps: Sequence[Sequence[str]], n: int = 4) -> float:
    """Natural-log entropy of the pooled n-gram distribution; 0 (with a
    warning) when no hypothesis is long enough to contain an n-gram."""
    counts: Counter = Counter()
    for hyp in hyps:
        counts.update(_ngrams(hyp, n))
    total = sum(counts.values())
    if total == 0:
        log_.warning("entropy_%d: no n-grams in corpus, reporting 0", n)
        return 0.0
    return -sum((c / total) * log(c / total) for c in counts.values())


def dist_n(hyps: Sequence[Sequence[str]], n: int) -> float:
    """Distinct n-grams / total n-grams, pooled over the corpus."""
    counts: Counter = Counter()
    for hyp in hyps:
        counts.update(_ngrams(hyp, n))
    total = sum(counts.values())
    if total == 0:
        log_.warning("dist_%d: no n-grams in corpus, reporting 0", n)
        return 0.0
    return len(counts) / total


def mean_length(hyps: Sequence[Sequence[str]]) -> float:
    if not hyps:
        raise ValueError("empty corpus")
    return sum(len(h) for h in hyps) / len(hyps)


def generation_report(
    hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]
) -> dict:
    return {
        "nist_2": nist(hyps, refs, 2),
        "nist_4": nist(hyps, refs, 4),
        "bleu_2": bleu(hyps, refs, 2),
        "bleu_4": bleu(hyps, refs, 4),
        "meteor_lite": sum(meteor_lite(h, r) for h, r in zip(hyps, refs)) / len(hyps),
        "entropy_4": entropy_n(hyps, 4),
        "dist_1": dist_n(hyps, 1),
        "dist_2": dist_n(hyps, 2),
        "mean_length": mean_length(hyps),
    }


def per_position_auc(records: Sequence[dict]) -> dict[int, dict]:
    """AUC per position index (the pooled AUC is the headline number; this
    is the optional breakdown). Positions with one class report NaN."""
    by_pos: dict[int, list[Pred]] = {}
    for rec in records:
        by_pos.setdefault(int(rec["position"]), []).append(
            (float(rec["score"]), int(rec["gold"]))
        )
    out = {}
    for pos in sorted(by_pos):
        preds = by_pos[pos]
        try:
            value, _ = auc(preds)
        except DegenerateClassError:
            value = float("nan")
        out[pos] = {"auc": value, "n": len(preds)}
    return out


def read_prediction_records(path) -> list[dict]:
    """Full prediction rows: {"instance": id, "position": k, "score": f, "gold": 0|1}."""
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    return records


def read_predictions(path) -> list[Pred]:
    """Pooled (score, gold) pairs from a prediction JSONL file."""
    return [
        (float(rec["score"]), int(rec["gold"])) for rec in read_prediction_records(path)
    ]


def read_generations(path, tokenizer) -> tuple[list[list[str]], list[list[str]]]:
    """Generation JSONL: {"instance": id, "position": k, "hyp": s, "ref": s}."""
    hyps, refs = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            hyps.append(tokenizer(rec["hyp"]))
            refs.append(tokenizer(rec["ref"]))
    return hyps, refs


def format_report(report: dict, title: str = "report") -> str:
    """Aligned plain-text table of a flat metric dict."""
    keys = [k for k in report if not isinstance(report[k], (list, dict))]
    width = max(len(k) for k in keys)
    lines = [f"== {title} =="]
    for k in keys:
        v = report[k]
        if isinstance(v, float):
            lines.append(f"{k:<{width}}  {v:.6f}")
        else:
            lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines)
