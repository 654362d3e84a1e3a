"""Create missing-sentence (MSD) and discordant-sentence (DSD) instances.

MSD removes interior, pairwise non-adjacent sentences from a sampled
segment and labels the slots they vacate. DSD replaces sentences with
confounders mined from the whole corpus: highest BM25 rank whose greedy
token-matching similarity to the original is below tau.

All randomness is derived per narrative from the global seed, so forging
order (or parallelism) cannot change outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from math import ceil, comb
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import Narrative, Sentence
from .retrieval import Bm25Index, Bm25Params, top_k
from .similarity import TokenVectors, bertscore_f

__all__ = [
    "ForgeConfig",
    "MsdInstance",
    "DsdInstance",
    "Confounder",
    "Segment",
    "InfeasibleRemovalError",
    "narrative_rng",
    "sample_segment",
    "choose_removals",
    "choose_replacements",
    "forge_msd",
    "find_confounder",
    "forge_dsd",
    "forge_dataset",
    "make_pretrain_segments",
    "noise_sentence",
    "reconstruct_msd",
    "reconstruct_dsd",
    "instance_to_json",
    "instance_from_json",
    "write_instances",
    "read_instances",
    "config_hash",
]


class InfeasibleRemovalError(ValueError):
    pass


@dataclass(frozen=True)
class ForgeConfig:
    mode: str  # "msd" | "dsd"
    segment_len: int
    corrupt_count: int
    bm25_top_k: int = 100
    tau: float = 0.7
    seed: int = 0
    no_boundary_removal: bool = True
    no_adjacent_removal: bool = True
    exclude_self_narrative: bool = True
    constrain_replacements: bool = False
    bm25: Bm25Params = field(default_factory=Bm25Params)

    def __post_init__(self):
        if self.mode not in ("msd", "dsd"):
            raise ValueError(f"mode must be 'msd' or 'dsd', got {self.mode!r}")
        s, k = self.segment_len, self.corrupt_count
        if not 1 <= k < s:
            raise ValueError(f"need 1 <= corrupt_count < segment_len, got K={k}, S={s}")
        if self.mode == "msd" and self.no_boundary_removal and self.no_adjacent_removal:
            if k > (s - 1) // 2:
                raise ValueError(
                    f"K={k} infeasible for S={s} with interior non-adjacent removals"
                )
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.bm25_top_k < 1:
            raise ValueError("bm25_top_k must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "segment_len": self.segment_len,
            "corrupt_count": self.corrupt_count,
            "bm25_top_k": self.bm25_top_k,
            "tau": self.tau,
            "seed": self.seed,
            "no_boundary_removal": self.no_boundary_removal,
            "no_adjacent_removal": self.no_adjacent_removal,
            "exclude_self_narrative": self.exclude_self_narrative,
            "constrain_replacements": self.constrain_replacements,
            "bm25_k1": self.bm25.k1,
            "bm25_b": self.bm25.b,
        }
        return d


def config_hash(cfg: ForgeConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class Confounder(NamedTuple):
    sid: int
    rank: int
    sim: float


@dataclass(frozen=True)
class MsdInstance:
    id: str
    source_narrative_id: str
    observed: tuple[Sentence, ...]
    slot_labels: tuple[int, ...]  # slot i sits between observed[i] and observed[i+1]
    gap_targets: dict[int, tuple[Sentence, ...]]  # slot index -> removed sentences
    phi: tuple[int, ...]  # 1-indexed positions of observed in the original segment

    mode = "msd"

    @property
    def labels(self) -> tuple[int, ...]:
        return self.slot_labels


@dataclass(frozen=True)
class DsdInstance:
    id: str
    source_narrative_id: str
    sentences: tuple[Sentence, ...]
    labels: tuple[int, ...]
    originals: dict[int, Sentence]  # position -> replaced-away original
    confounders: dict[int, Confounder]

    mode = "dsd"


class Segment(NamedTuple):
    start: int  # 0-based offset in the narrative
    sentences: tuple[Sentence, ...]


def narrative_rng(seed: int, narrative_id: str, *extra: str) -> np.random.Generator:
    """Per-narrative RNG: a 64-bit hash of (seed, narrative id, ...)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    for part in (narrative_id, *extra):
        h.update(b"\x1f")
        h.update(part.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))


def sample_segment(
    narrative: Narrative, segment_len: int, rng: np.random.Generator
) -> Segment | None:
    """Uniformly random contiguous slice of segment_len sentences, or None
    when the narrative is shorter than that."""
    if segment_len < 2:
        raise ValueError("segment_len must be >= 2")
    n = len(narrative.sentences)
    if n < segment_len:
        return None
    start = int(rng.integers(0, n - segment_len + 1))
    return Segment(start, narrative.sentences[start : start + segment_len])


def _valid_positions(s: int, no_boundary: bool) -> list[int]:
    return list(range(2, s)) if no_boundary else list(range(1, s + 1))


def _non_adjacent(subset: Sequence[int]) -> bool:
    return all(b - a >= 2 for a, b in zip(subset, subset[1:]))


def choose_removals(
    s: int,
    k: int,
    rng: np.random.Generator,
    no_boundary: bool = True,
    no_adjacent: bool = True,
) -> list[int]:
    """Uniformly choose K removal positions (1-indexed within the segment).

    With the default constraints, positions lie in [2, S-1] and are pairwise
    non-adjacent. Raises InfeasibleRemovalError when no valid subset exists.
    """
    positions = _valid_positions(s, no_boundary)
    if k > len(positions):
        raise InfeasibleRemovalError(f"K={k} exceeds {len(positions)} valid positions")
    if not no_adjacent:
        chosen = rng.choice(len(positions), size=k, replace=False)
        return sorted(positions[i] for i in chosen)
    # Enumerate valid subsets when cheap, otherwise rejection-sample.
    if comb(len(positions), k) <= 200_000:
        valid = [c for c in combinations(positions, k) if _non_adjacent(c)]
        if not valid:
            raise InfeasibleRemovalError(f"no non-adjacent {k}-subset of {positions}")
        return list(valid[int(rng.integers(0, len(valid)))])
    for _ in range(10_000):
        chosen = sorted(positions[i] for i in rng.choice(len(positions), size=k, replace=False))
        if _non_adjacent(chosen):
            return chosen
    raise InfeasibleRemovalError("rejection sampling failed to find a valid subset")


def choose_replacements(
    s: int, k: int, rng: np.random.Generator, constrain: bool = False
) -> list[int]:
    """Uniform K-subset of [1, S]; constrain=True re-enables the MSD rules."""
    if constrain:
        return choose_removals(s, k, rng)
    if not 1 <= k <= s:
        raise ValueError(f"need 1 <= K <= S, got K={k}, S={s}")
    chosen = rng.choice(s, size=k, replace=False)
    return sorted(int(c) + 1 for c in chosen)


def forge_msd(
    segment: Sequence[Sentence],
    removal_positions: Sequence[int],
    instance_id: str = "",
    source_narrative_id: str = "",
) -> MsdInstance:
    """Remove the given 1-indexed positions and label the vacated slots."""
    s = len(segment)
    removed = set(removal_positions)
    if any(not 1 <= p <= s for p in removed):
        raise ValueError("removal positions out of range")
    phi = tuple(p for p in range(1, s + 1) if p not in removed)
    observed = tuple(segment[p - 1] for p in phi)
    slot_labels = tuple(
        1 if phi[i + 1] - phi[i] > 1 else 0 for i in range(len(phi) - 1)
    )
    gap_targets: dict[int, tuple[Sentence, ...]] = {}
    for i in range(len(phi) - 1):
        if slot_labels[i]:
            gap_targets[i] = tuple(segment[p - 1] for p in range(phi[i] + 1, phi[i + 1]))
    return MsdInstance(
        id=instance_id,
        source_narrative_id=source_narrative_id,
        observed=observed,
        slot_labels=slot_labels,
        gap_targets=gap_targets,
        phi=phi,
    )


def find_confounder(
    x: Sentence,
    index: Bm25Index,
    provider: TokenVectors,
    cfg: ForgeConfig,
    exclude_ids: Iterable[int] = (),
) -> Confounder | None:
    """First BM25 candidate (scanned in rank order) that reads differently:
    text differs from x and similarity < tau. None when nothing qualifies."""
    candidates = top_k(x.tokens, cfg.bm25_top_k, index, cfg.bm25, exclude=exclude_ids)
    for rank, (sid, _bm25_score) in enumerate(candidates, start=1):
        cand = index.sentences[sid]
        if cand.text == x.text:
            continue
        sim = bertscore_f(x.tokens, cand.tokens, provider)
        if sim < cfg.tau:
            return Confounder(sid=sid, rank=rank, sim=sim)
    return None


def forge_dsd(
    segment: Sequence[Sentence],
    positions: Sequence[int],
    index: Bm25Index,
    provider: TokenVectors,
    cfg: ForgeConfig,
    instance_id: str = "",
    source_narrative_id: str = "",
    exclude_ids: Iterable[int] = (),
) -> DsdInstance | None:
    """Replace the given 1-indexed positions with confounders; None (skip)
    when any position lacks a qualifying confounder."""
    s = len(segment)
    if any(not 1 <= p <= s for p in positions):
        raise ValueError("replacement positions out of range")
    sentences = list(segment)
    originals: dict[int, Sentence] = {}
    confounders: dict[int, Confounder] = {}
    labels = [0] * s
    for p in positions:
        original = segment[p - 1]
        found = find_confounder(original, index, provider, cfg, exclude_ids)
        if found is None:
            return None
        sentences[p - 1] = index.sentences[found.sid]
        originals[p - 1] = original
        confounders[p - 1] = found
        labels[p - 1] = 1
    return DsdInstance(
        id=instance_id,
        source_narrative_id=source_narrative_id,
        sentences=tuple(sentences),
        labels=tuple(labels),
        originals=originals,
        confounders=confounders,
    )


def _narrative_id_map(index: Bm25Index) -> dict[str, list[int]]:
    by_narrative: dict[str, list[int]] = {}
    for sid, (nid, _pos) in enumerate(index.provenance):
        by_narrative.setdefault(nid, []).append(sid)
    return by_narrative


def forge_dataset(
    narratives: Sequence[Narrative],
    cfg: ForgeConfig,
    index: Bm25Index | None = None,
    provider: TokenVectors | None = None,
) -> tuple[list[MsdInstance | DsdInstance], dict]:
    """One attempted instance per eligible narrative, deterministic under
    (seed, corpus, config). Returns (instances, manifest)."""
    if cfg.mode == "dsd" and (index is None or provider is None):
        raise ValueError("DSD forging needs a BM25 index and a token-vector provider")
    by_narrative = _narrative_id_map(index) if index is not None else {}
    instances: list[MsdInstance | DsdInstance] = []
    counts = {"attempted": 0, "emitted": 0, "skipped_short": 0, "skipped_no_confounder": 0}
    for narrative in narratives:
        counts["attempted"] += 1
        rng = narrative_rng(cfg.seed, narrative.id)
        seg = sample_segment(narrative, cfg.segment_len, rng)
        if seg is None:
            counts["skipped_short"] += 1
            continue
        instance_id = f"{cfg.mode}:{narrative.id}"
        if cfg.mode == "msd":
            positions = choose_removals(
                cfg.segment_len,
                cfg.corrupt_count,
                rng,
                no_boundary=cfg.no_boundary_removal,
                no_adjacent=cfg.no_adjacent_removal,
            )
            inst = forge_msd(seg.sentences, positions, instance_id, narrative.id)
        else:
            positions = choose_replacements(
                cfg.segment_len, cfg.corrupt_count, rng, constrain=cfg.constrain_replacements
            )
            exclude = by_narrative.get(narrative.id, []) if cfg.exclude_self_narrative else []
            inst = forge_dsd(
                seg.sentences, positions, index, provider, cfg,
                instance_id, narrative.id, exclude_ids=exclude,
            )
            if inst is None:
                counts["skipped_no_confounder"] += 1
                continue
        instances.append(inst)
        counts["emitted"] += 1
    manifest = {"config": cfg.to_dict(), "config_hash": config_hash(cfg), "counts": counts}
    return instances, manifest


def make_pretrain_segments(
    narratives: Sequence[Narrative],
    cfg: ForgeConfig,
    index: Bm25Index | None = None,
    provider: TokenVectors | None = None,
    segment_len: int = 16,
    rate: float = 0.25,
) -> tuple[list[MsdInstance | DsdInstance], dict]:
    """Large-scale variant: non-overlapping segment_len-sentence windows per
    document, each corrupted at round(rate * segment_len) positions through
    the mode's usual forging path."""
    k = round(rate * segment_len)
    win_cfg = replace(cfg, segment_len=segment_len, corrupt_count=k)
    if win_cfg.mode == "dsd" and (index is None or provider is None):
        raise ValueError("DSD forging needs a BM25 index and a token-vector provider")
    by_narrative = _narrative_id_map(index) if index is not None else {}
    instances: list[MsdInstance | DsdInstance] = []
    counts = {"attempted": 0, "emitted": 0, "skipped_short": 0, "skipped_no_confounder": 0}
    for narrative in narratives:
        n_windows = len(narrative.sentences) // segment_len
        if n_windows == 0:
            counts["attempted"] += 1
            counts["skipped_short"] += 1
            continue
        for w in range(n_windows):
            counts["attempted"] += 1
            window = narrative.sentences[w * segment_len : (w + 1) * segment_len]
            rng = narrative_rng(win_cfg.seed, narrative.id, f"w{w}")
            instance_id = f"{win_cfg.mode}:{narrative.id}:w{w}"
            if win_cfg.mode == "msd":
                positions = choose_removals(
                    segment_len, k, rng,
                    no_boundary=win_cfg.no_boundary_removal,
                    no_adjacent=win_cfg.no_adjacent_removal,
                )
                inst = forge_msd(window, positions, instance_id, narrative.id)
            else:
                positions = choose_replacements(
                    segment_len, k, rng, constrain=win_cfg.constrain_replacements
                )
                exclude = (
                    by_narrative.get(narrative.id, []) if win_cfg.exclude_self_narrative else []
                )
                inst = forge_dsd(
                    window, positions, index, provider, win_cfg,
                    instance_id, narrative.id, exclude_ids=exclude,
                )
                if inst is None:
                    counts["skipped_no_confounder"] += 1
                    continue
            instances.append(inst)
            counts["emitted"] += 1
    manifest = {
        "config": win_cfg.to_dict(),
        "config_hash": config_hash(win_cfg),
        "segment_len": segment_len,
        "rate": rate,
        "counts": counts,
    }
    return instances, manifest


def noise_sentence(
    tokens: Sequence[str],
    rng: np.random.Generator,
    perm_ratio: float = 0.2,
    mask_ratio: float = 0.2,
    random_ratio: float = 0.2,
    vocab: Sequence[str] = (),
    mask_token: str = "[MASK]",
) -> list[str]:
    """Denoising-autoencoder corruption, applied in order permute -> mask ->
    random, each touching ceil(ratio * L) positions; mask and random draws
    are disjoint. Output length equals input length."""
    for name, ratio in (("perm", perm_ratio), ("mask", mask_ratio), ("random", random_ratio)):
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"{name}_ratio must be in [0, 1]")
    out = list(tokens)
    n = len(out)
    if n == 0:
        return out
    n_perm = ceil(perm_ratio * n)
    if n_perm >= 1:
        idx = np.sort(rng.choice(n, size=n_perm, replace=False))
        order = rng.permutation(n_perm)
        vals = [out[i] for i in idx]
        for slot, j in zip(idx, order):
            out[slot] = vals[j]
    n_mask = min(ceil(mask_ratio * n), n)
    n_rand = min(ceil(random_ratio * n), n - n_mask)
    if n_mask + n_rand > 0:
        touched = rng.choice(n, size=n_mask + n_rand, replace=False)
        for i in touched[:n_mask]:
            out[i] = mask_token
        if n_rand > 0:
            if not vocab:
                raise ValueError("random replacement needs a non-empty vocab")
            picks = rng.integers(0, len(vocab), size=n_rand)
            for i, v in zip(touched[n_mask:], picks):
                out[i] = vocab[int(v)]
    return out


def reconstruct_msd(inst: MsdInstance) -> list[Sentence]:
    """Interleave observed sentences and gap targets back into the original
    segment order."""
    total = inst.phi[-1]
    segment: list[Sentence | None] = [None] * total
    for i, p in enumerate(inst.phi):
        segment[p - 1] = inst.observed[i]
    for slot, removed in inst.gap_targets.items():
        left = inst.phi[slot]  # 1-indexed position of the slot's left neighbor
        for offset, sentence in enumerate(removed):
            segment[left + offset] = sentence  # original position left+1+offset
    missing = [i for i, s in enumerate(segment) if s is None]
    if missing:
        raise ValueError(f"reconstruction left gaps at {missing}")
    return segment  # type: ignore[return-value]


def reconstruct_dsd(inst: DsdInstance) -> list[Sentence]:
    segment = list(inst.sentences)
    for pos, original in inst.originals.items():
        segment[pos] = original
    return segment


def instance_to_json(inst: MsdInstance | DsdInstance) -> dict:
    if isinstance(inst, MsdInstance):
        return {
            "id": inst.id,
            "source": inst.source_narrative_id,
            "mode": "msd",
            "sentences": [s.text for s in inst.observed],
            "slot_labels": list(inst.slot_labels),
            "gap_targets": {
                str(k): [s.text for s in v] for k, v in sorted(inst.gap_targets.items())
            },
            "phi": list(inst.phi),
        }
    return {
        "id": inst.id,
        "source": inst.source_narrative_id,
        "mode": "dsd",
        "sentences": [s.text for s in inst.sentences],
        "labels": list(inst.labels),
        "originals": {str(k): v.text for k, v in sorted(inst.originals.items())},
        "confounders": {
            str(k): {"sid": c.sid, "rank": c.rank, "sim": c.sim}
            for k, c in sorted(inst.confounders.items())
        },
    }


def instance_from_json(rec: dict) -> MsdInstance | DsdInstance:
    mode = rec.get("mode")
    if mode == "msd":
        return MsdInstance(
            id=rec["id"],
            source_narrative_id=rec["source"],
            observed=tuple(Sentence.from_text(t) for t in rec["sentences"]),
            slot_labels=tuple(int(v) for v in rec["slot_labels"]),
            gap_targets={
                int(k): tuple(Sentence.from_text(t) for t in v)
                for k, v in rec["gap_targets"].items()
            },
            phi=tuple(int(p) for p in rec["phi"]),
        )
    if mode == "dsd":
        return DsdInstance(
            id=rec["id"],
            source_narrative_id=rec["source"],
            sentences=tuple(Sentence.from_text(t) for t in rec["sentences"]),
            labels=tuple(int(v) for v in rec["labels"]),
            originals={int(k): Sentence.from_text(t) for k, t in rec["originals"].items()},
            confounders={
                int(k): Confounder(sid=c["sid"], rank=c["rank"], sim=c["sim"])
                for k, c in rec["confounders"].items()
            },
        )
    raise ValueError(f"unknown instance mode {mode!r}")


def write_instances(instances: Iterable[MsdInstance | DsdInstance], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for inst in instances:
            f.write(json.dumps(instance_to_json(inst), ensure_ascii=False))
            f.write("\n")
            n += 1
    return n


def read_instances(path) -> list[MsdInstance | DsdInstance]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(instance_from_json(json.loads(line)))
    return out
