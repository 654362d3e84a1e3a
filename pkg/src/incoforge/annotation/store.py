"""Annotation state with an append-only JSONL journal.

Every mutation is journaled (flush + fsync) before it is acknowledged;
replaying the journal reconstructs the state exactly, including after a
crash that truncated the final line. A snapshot file can shortcut replay
but is never required.

Candidates are per-position judgments: one slot (missing-sentence mode) or
one sentence (discordant mode) of a forged instance, with the automatic
label hidden from judges. A candidate enters the verified test set iff at
least `required_agree` of `n_judges` verification judgments match the
automatic label.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .. import evalkit

__all__ = [
    "AgreementPolicy",
    "AnnotationError",
    "UnknownWorkerError",
    "UnknownCandidateError",
    "DuplicateJudgmentError",
    "PhaseError",
    "IncompleteJudgmentsError",
    "AnnotationStore",
    "candidates_from_instances",
]


class AnnotationError(Exception):
    code = "annotation_error"
    status = 400


class UnknownWorkerError(AnnotationError):
    code = "unknown_worker"
    status = 401


class UnknownCandidateError(AnnotationError):
    code = "unknown_candidate"
    status = 404


class DuplicateJudgmentError(AnnotationError):
    code = "duplicate_judgment"
    status = 409


class PhaseError(AnnotationError):
    code = "phase_error"
    status = 403


class IncompleteJudgmentsError(AnnotationError):
    code = "incomplete_judgments"
    status = 409

    def __init__(self, message: str, deficient: list[str]):
        super().__init__(message)
        self.deficient = deficient


@dataclass(frozen=True)
class AgreementPolicy:
    n_judges: int = 4
    required_agree: int = 3

    def __post_init__(self):
        if not 1 <= self.required_agree <= self.n_judges:
            raise ValueError("need 1 <= required_agree <= n_judges")


def candidates_from_instances(records: Iterable[dict]) -> list[dict]:
    """Expand forge-output records into per-position candidates.

    Every labeled position becomes one candidate (id "<instance>@<pos>"),
    with the original record kept for export.
    """
    out = []
    for rec in records:
        mode = rec.get("mode")
        if mode == "msd":
            labels = rec["slot_labels"]
        elif mode == "dsd":
            labels = rec["labels"]
        else:
            raise ValueError(f"record {rec.get('id')!r} has unknown mode {mode!r}")
        for pos, label in enumerate(labels):
            out.append(
                {
                    "id": f"{rec['id']}@{pos}",
                    "mode": mode,
                    "sentences": list(rec["sentences"]),
                    "focus": pos,
                    "auto_label": int(label),
                    "source": rec,
                }
            )
    return out


def _validate_candidate(cand: dict) -> str | None:
    """Returns a rejection reason or None."""
    if not isinstance(cand, dict):
        return "not an object"
    if not isinstance(cand.get("id"), str) or not cand["id"]:
        return "missing id"
    mode = cand.get("mode")
    if mode not in ("msd", "dsd"):
        return f"invalid mode {mode!r}"
    sentences = cand.get("sentences")
    if not isinstance(sentences, list) or not sentences:
        return "missing sentences"
    focus = cand.get("focus")
    limit = len(sentences) - 1 if mode == "msd" else len(sentences)
    if not isinstance(focus, int) or not 0 <= focus < max(limit, 0):
        return f"focus {focus!r} invalid for {mode} with {len(sentences)} sentences"
    if cand.get("auto_label") not in (0, 1):
        return "auto_label must be 0 or 1"
    return None


class _Journal:
    def __init__(self, path: str):
        self.path = path
        self._fh = None

    def append(self, record: dict) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
        self._fh.write(json.dumps(record, ensure_ascii=False))
        self._fh.write("\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @staticmethod
    def read(path: str) -> list[dict]:
        """All complete records; a torn final line (crash artifact) is ignored."""
        records = []
        if not os.path.exists(path):
            return records
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                rest = any(l.strip() for l in lines[i + 1 :])
                if rest:
                    raise ValueError(f"corrupt journal record at line {i + 1}")
                break  # torn tail from a crash mid-append
        return records


class AnnotationStore:
    """In-memory state + write-ahead journal. All writes serialize through
    one lock; reads take it too so views are consistent."""

    SNAPSHOT = "snapshot.json"
    JOURNAL = "journal.jsonl"

    def __init__(self, state_dir: str, screening_pass: float = 0.8):
        os.makedirs(state_dir, exist_ok=True)
        self.state_dir = state_dir
        self.screening_pass = screening_pass
        self._lock = threading.RLock()
        self._journal = _Journal(os.path.join(state_dir, self.JOURNAL))
        self._applied = 0

        self.candidates: dict[str, dict] = {}
        self.candidate_order: list[str] = []
        self.probes: dict[str, dict] = {}
        self.probe_order: list[str] = []
        self.workers: dict[str, dict] = {}
        self.tokens: dict[str, str] = {}
        # judgments[phase][candidate_id][worker_id] = label
        self.judgments: dict[str, dict[str, dict[str, int]]] = {
            "screening": {},
            "verification": {},
            "baseline": {},
        }
        self.idempotency: dict[str, dict] = {}
        self.closed = False
        self.kept: list[str] | None = None
        self.tally: dict[str, dict] | None = None
        self._recover()

    # -- persistence ---------------------------------------------------------

    def _recover(self) -> None:
        snap_path = os.path.join(self.state_dir, self.SNAPSHOT)
        start = 0
        if os.path.exists(snap_path):
            with open(snap_path, encoding="utf-8") as f:
                snap = json.load(f)
            self._load_snapshot(snap)
            start = snap["applied"]
        records = _Journal.read(self._journal.path)
        for rec in records[start:]:
            self._apply(rec)
            self._applied += 1
        if start > self._applied:  # snapshot ahead of journal: corrupt pairing
            raise ValueError("snapshot is newer than the journal")

    def snapshot(self) -> None:
        """Write a snapshot so future recoveries skip replayed records."""
        with self._lock:
            snap = {
                "applied": self._applied,
                "candidates": self.candidates,
                "candidate_order": self.candidate_order,
                "probes": self.probes,
                "probe_order": self.probe_order,
                "workers": self.workers,
                "judgments": self.judgments,
                "idempotency": self.idempotency,
                "closed": self.closed,
                "kept": self.kept,
                "tally": self.tally,
            }
            tmp = os.path.join(self.state_dir, self.SNAPSHOT + ".tmp")
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(snap, f, ensure_ascii=False)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, os.path.join(self.state_dir, self.SNAPSHOT))

    def _load_snapshot(self, snap: dict) -> None:
        self.candidates = snap["candidates"]
        self.candidate_order = snap["candidate_order"]
        self.probes = snap["probes"]
        self.probe_order = snap["probe_order"]
        self.workers = snap["workers"]
        self.judgments = snap["judgments"]
        self.idempotency = snap["idempotency"]
        self.closed = snap["closed"]
        self.kept = snap["kept"]
        self.tally = snap["tally"]
        self.tokens = {w["token"]: wid for wid, w in self.workers.items()}
        self._applied = snap["applied"]

    def _commit(self, record: dict) -> None:
        self._journal.append(record)
        self._apply(record)
        self._applied += 1

    def _apply(self, rec: dict) -> None:
        op = rec["op"]
        if op == "enqueue":
            for cand in rec["candidates"]:
                if cand["id"] not in self.candidates:
                    self.candidates[cand["id"]] = cand
                    self.candidate_order.append(cand["id"])
        elif op == "screening_probes":
            for cand in rec["candidates"]:
                if cand["id"] not in self.probes:
                    self.probes[cand["id"]] = cand
                    self.probe_order.append(cand["id"])
        elif op == "worker":
            wid = rec["worker_id"]
            self.workers[wid] = {
                "worker_id": wid,
                "name": rec["name"],
                "role": rec["role"],
                "token": rec["token"],
            }
            self.tokens[rec["token"]] = wid
        elif op == "judgment":
            phase = rec["phase"]
            self.judgments[phase].setdefault(rec["candidate_id"], {})[rec["worker_id"]] = rec[
                "label"
            ]
            if rec.get("key"):
                self.idempotency[rec["key"]] = {
                    "accepted": True,
                    "phase": phase,
                    "candidate_id": rec["candidate_id"],
                }
        elif op == "filter":
            self.closed = True
            self.kept = rec["kept"]
            self.tally = rec["tally"]
        else:
            raise ValueError(f"unknown journal op {op!r}")

    # -- admin ops -----------------------------------------------------------

    def add_screening_probes(self, candidates: Sequence[dict]) -> int:
        with self._lock:
            fresh = []
            for cand in candidates:
                reason = _validate_candidate(cand)
                if reason:
                    raise ValueError(f"invalid screening probe {cand.get('id')!r}: {reason}")
                if cand["id"] not in self.probes:
                    fresh.append(cand)
            if fresh:
                self._commit({"op": "screening_probes", "candidates": fresh})
            return len(fresh)

    def enqueue(self, candidates: Sequence[dict]) -> dict:
        """Idempotent by candidate id; malformed candidates are rejected with
        a reason, the rest of the batch is accepted."""
        with self._lock:
            fresh, duplicates, rejected = [], 0, []
            seen_batch: set[str] = set()
            for cand in candidates:
                reason = _validate_candidate(cand)
                if reason:
                    rejected.append({"id": cand.get("id"), "reason": reason})
                    continue
                if cand["id"] in self.candidates or cand["id"] in seen_batch:
                    duplicates += 1
                    continue
                seen_batch.add(cand["id"])
                fresh.append(cand)
            if fresh:
                self._commit({"op": "enqueue", "candidates": fresh})
            return {"accepted": len(fresh), "duplicates": duplicates, "rejected": rejected}

    def create_worker(self, name: str, role: str = "judge") -> dict:
        if role not in ("judge", "baseline"):
            raise ValueError(f"role must be 'judge' or 'baseline', got {role!r}")
        with self._lock:
            wid = f"w{len(self.workers):04d}"
            token = secrets.token_hex(16)
            self._commit(
                {"op": "worker", "worker_id": wid, "name": name, "role": role, "token": token}
            )
            return {"worker_id": wid, "token": token}

    # -- worker ops -----------------------------------------------------------

    def _worker_by_token(self, token: str) -> dict:
        wid = self.tokens.get(token)
        if wid is None:
            raise UnknownWorkerError("unknown worker token")
        return self.workers[wid]

    def authenticate(self, token: str) -> dict:
        with self._lock:
            worker = dict(self._worker_by_token(token))
        worker.pop("token", None)
        return worker

    def _screening_state(self, wid: str) -> dict:
        total = len(self.probe_order)
        answered = 0
        correct = 0
        for pid in self.probe_order:
            lab = self.judgments["screening"].get(pid, {}).get(wid)
            if lab is not None:
                answered += 1
                if lab == self.probes[pid]["auto_label"]:
                    correct += 1
        passed = None
        if answered == total:
            passed = total == 0 or (correct / total) >= self.screening_pass
        return {"total": total, "answered": answered, "correct": correct, "passed": passed}

    def _task_view(self, cand: dict, phase: str) -> dict:
        # auto_label and source never leave the server
        return {
            "candidate_id": cand["id"],
            "mode": cand["mode"],
            "sentences": list(cand["sentences"]),
            "focus": cand["focus"],
            "phase": phase,
        }

    def next_task(self, token: str) -> dict:
        """The worker's next candidate: screening probes first, then the
        least-judged unseen candidate for their phase."""
        with self._lock:
            worker = self._worker_by_token(token)
            wid = worker["worker_id"]
            screening = self._screening_state(wid)
            if screening["passed"] is None:
                for pid in self.probe_order:
                    if wid not in self.judgments["screening"].get(pid, {}):
                        return {
                            "task": self._task_view(self.probes[pid], "screening"),
                            "phase": "screening",
                            "screening": screening,
                            "done": False,
                        }
            if screening["passed"] is False:
                return {"task": None, "phase": "screening_failed", "screening": screening, "done": True}
            if worker["role"] == "judge":
                if self.closed:
                    return {"task": None, "phase": "closed", "screening": screening, "done": True}
                pool = self.candidate_order
                phase = "verification"
            else:
                if not self.closed:
                    return {
                        "task": None,
                        "phase": "awaiting_filter",
                        "screening": screening,
                        "done": False,
                    }
                pool = self.kept or []
                phase = "baseline"
            best = None
            best_key = None
            for cid in pool:
                judged = self.judgments[phase].get(cid, {})
                if wid in judged:
                    continue
                key = (len(judged), cid)
                if best_key is None or key < best_key:
                    best, best_key = cid, key
            if best is None:
                return {"task": None, "phase": phase, "screening": screening, "done": True}
            return {
                "task": self._task_view(self.candidates[best], phase),
                "phase": phase,
                "screening": screening,
                "done": False,
            }

    def submit(self, token: str, candidate_id: str, label: int, key: str | None = None) -> dict:
        """Record one judgment. Journaled (fsync) before the ack. Duplicate
        (worker, candidate) submissions are rejected; a repeated idempotency
        key returns the previous ack instead."""
        with self._lock:
            worker = self._worker_by_token(token)
            wid = worker["worker_id"]
            if key and key in self.idempotency:
                return self.idempotency[key]
            if label not in (0, 1):
                raise AnnotationError(f"label must be 0 or 1, got {label!r}")
            screening = self._screening_state(wid)
            if screening["passed"] is None and candidate_id in self.probes:
                phase = "screening"
            elif screening["passed"] is not True:
                raise PhaseError("worker has not passed screening")
            elif worker["role"] == "judge":
                phase = "verification"
                if self.closed:
                    raise PhaseError("test set is closed: the agreement filter already ran")
                if candidate_id not in self.candidates:
                    raise UnknownCandidateError(f"unknown candidate {candidate_id!r}")
            else:
                phase = "baseline"
                if not self.closed:
                    raise PhaseError("baseline phase opens after the agreement filter")
                if candidate_id not in (self.kept or []):
                    raise UnknownCandidateError(f"candidate {candidate_id!r} not in kept set")
            if wid in self.judgments[phase].get(candidate_id, {}):
                raise DuplicateJudgmentError(
                    f"worker already judged {candidate_id!r} in {phase}"
                )
            record = {
                "op": "judgment",
                "worker_id": wid,
                "candidate_id": candidate_id,
                "label": int(label),
                "phase": phase,
                "ts": time.time(),
                "key": key,
            }
            self._commit(record)  # _apply fills the idempotency map for keyed acks
            return {"accepted": True, "phase": phase, "candidate_id": candidate_id}

    # -- filtering and reporting ----------------------------------------------

    def run_filter(self, policy: AgreementPolicy = AgreementPolicy()) -> dict:
        """Keep candidates where >= required_agree of n_judges verification
        judgments match the automatic label. Requires complete coverage."""
        with self._lock:
            if self.closed:
                raise PhaseError("filter already ran")
            deficient = [
                cid
                for cid in self.candidate_order
                if len(self.judgments["verification"].get(cid, {})) != policy.n_judges
            ]
            if deficient:
                raise IncompleteJudgmentsError(
                    f"{len(deficient)} candidates lack exactly {policy.n_judges} judgments",
                    deficient,
                )
            kept = []
            tally = {}
            for cid in self.candidate_order:
                auto = self.candidates[cid]["auto_label"]
                votes = self.judgments["verification"][cid]
                agree = sum(1 for lab in votes.values() if lab == auto)
                tally[cid] = {"agree": agree, "total": policy.n_judges}
                if agree >= policy.required_agree:
                    kept.append(cid)
            self._commit({"op": "filter", "kept": kept, "tally": tally,
                          "policy": {"n_judges": policy.n_judges,
                                     "required_agree": policy.required_agree}})
            return {"kept": list(kept), "tally": dict(tally)}

    def export_kept(self) -> list[dict]:
        """Kept candidates in enqueue order: the original forged record plus
        focus, auto label, and the agreement tally."""
        with self._lock:
            if not self.closed or self.kept is None:
                raise PhaseError("run the agreement filter before exporting")
            out = []
            for cid in self.kept:
                cand = self.candidates[cid]
                rec = dict(cand.get("source") or {})
                rec.update(
                    {
                        "candidate_id": cid,
                        "focus": cand["focus"],
                        "auto_label": cand["auto_label"],
                        "tally": self.tally[cid],
                    }
                )
                out.append(rec)
            return out

    def human_baseline(self, required_judges: int = 3) -> dict:
        """Per-judge Acc/P/R/F1 against the automatic labels on the kept set,
        plus the arithmetic mean over judges."""
        with self._lock:
            if not self.closed or self.kept is None:
                raise PhaseError("run the agreement filter before the baseline")
            by_worker: dict[str, dict[str, int]] = {}
            deficient = []
            for cid in self.kept:
                votes = self.judgments["baseline"].get(cid, {})
                if len(votes) != required_judges:
                    deficient.append(cid)
                for wid, lab in votes.items():
                    by_worker.setdefault(wid, {})[cid] = lab
            if deficient:
                raise IncompleteJudgmentsError(
                    f"{len(deficient)} kept candidates lack exactly "
                    f"{required_judges} baseline judgments",
                    deficient,
                )
            incomplete = [w for w, votes in by_worker.items() if len(votes) != len(self.kept)]
            if incomplete:
                raise IncompleteJudgmentsError(
                    f"baseline judges {incomplete} did not cover the whole kept set",
                    incomplete,
                )
            per_judge = {}
            for wid, votes in sorted(by_worker.items()):
                preds = [
                    (float(votes[cid]), self.candidates[cid]["auto_label"])
                    for cid in self.kept
                ]
                rep = evalkit.classification_report(preds, threshold=0.5)
                per_judge[wid] = {k: rep[k] for k in ("accuracy", "precision", "recall", "f1")}
            n = len(per_judge)
            mean = {
                k: sum(j[k] for j in per_judge.values()) / n
                for k in ("accuracy", "precision", "recall", "f1")
            }
            return {"per_judge": per_judge, "mean": mean, "kept": len(self.kept)}

    def progress(self) -> dict:
        with self._lock:
            v_counts = {
                cid: len(self.judgments["verification"].get(cid, {}))
                for cid in self.candidate_order
            }
            return {
                "candidates": len(self.candidate_order),
                "screening_probes": len(self.probe_order),
                "workers": len(self.workers),
                "verification_judgments": sum(v_counts.values()),
                "fully_judged": sum(1 for c in v_counts.values() if c >= 4),
                "closed": self.closed,
                "kept": len(self.kept) if self.kept is not None else None,
                "baseline_judgments": sum(
                    len(v) for v in self.judgments["baseline"].values()
                ),
            }

    def close(self) -> None:
        self._journal.close()
