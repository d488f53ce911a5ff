"""
Queue-behaviour anomaly detection.

Contains:
    - LogEntry / UserFeatures: job log rows and the six per-user behaviour features
    - extract_features / extract_all: log -> feature vectors
    - train / score: kernel one-class boundary fitted on normal users only
    - respond: isolate or deprioritize a flagged user's queued jobs
    - synthetic_corpus: seeded benchmark of normal and flooding users
"""
from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import astuple, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adversary import generate_kitchen_sink_jobs, select_target_qubits
from .errors import InsufficientDataError
from .hardware import CouplingGraph, enumerate_connected_allocations, grid20, synthetic_calibration
from .scheduler import Job

DEPRIORITIZE_EPS = 1e-6


@dataclass(frozen=True)
class LogEntry:
    """One job in the scheduler log. Times are in days; priority 0=high, 1=medium, 2=low."""
    user: str
    job_id: str
    submit: float
    finish: float
    priority: int
    qubits: tuple[int, ...] = ()

    @property
    def duration(self) -> float:
        return self.finish - self.submit

    def to_dict(self) -> dict:
        return {"user": self.user, "job_id": self.job_id, "submit": self.submit, "finish": self.finish,
                "priority": self.priority, "qubits": list(self.qubits)}

    @classmethod
    def from_dict(cls, d: dict) -> LogEntry:
        return cls(str(d["user"]), str(d["job_id"]), float(d["submit"]), float(d["finish"]),
                   int(d["priority"]), tuple(int(q) for q in d.get("qubits", ())))


@dataclass(frozen=True)
class UserFeatures:
    request_frequency: float = 0.0
    concurrency: float = 0.0
    priority_skew: float = 0.0
    activity_burstiness: float = 0.0
    duration_priority_inversion: float = 0.0
    contention_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _max_overlap(intervals: list[tuple[float, float]]) -> int:
    events = sorted([(s, 1) for s, _ in intervals] + [(f, -1) for _, f in intervals])
    best = cur = 0
    for _, step in events:
        cur += step
        best = max(best, cur)
    return best


def extract_features(history: Sequence[LogEntry], window: float, start: float = 0.0,
                     others: Sequence[LogEntry] = ()) -> UserFeatures:
    """
    Behaviour features of one user over ``[start, start + window)``.

    request_frequency       jobs per day
    concurrency             most of the user's jobs pending at one instant
    priority_skew           mean of +1/0/-1 for high/medium/low jobs
    activity_burstiness     coefficient of variation of the gaps between
                            submissions, the window taken as circular so a
                            single burst yields sqrt(n - 1) and an even
                            schedule yields 0
    duration_priority_inversion
                            share of (higher, lower) priority pairs where
                            the lower-priority job had the shorter turnaround
    contention_rate         share of jobs sharing a qubit with a time-
                            overlapping job of another user (``others``)
    """
    end = start + window
    jobs = sorted((e for e in history if start <= e.submit < end), key=lambda e: e.submit)
    if not jobs:
        return UserFeatures()
    n = len(jobs)

    freq = n / window
    conc = _max_overlap([(e.submit, e.finish) for e in jobs])
    skew = float(np.mean([1 - e.priority for e in jobs]))

    t = np.array([e.submit for e in jobs])
    gaps = np.append(np.diff(t), end - t[-1] + t[0] - start)
    burst = float(gaps.std() / gaps.mean()) if gaps.mean() > 0 else 0.0

    pairs = inverted = 0
    for a in jobs:
        for b in jobs:
            if a.priority < b.priority:
                pairs += 1
                inverted += b.duration < a.duration
    inversion = inverted / pairs if pairs else 0.0

    rivals = sorted((o for o in others if o.user != jobs[0].user and o.submit < end and o.finish >= start),
                    key=lambda o: o.submit)
    r_submit = [o.submit for o in rivals]
    longest = max((o.duration for o in rivals), default=0.0)
    contended = 0
    for e in jobs:
        qs = set(e.qubits)
        lo = bisect_left(r_submit, e.submit - longest)
        hi = bisect_left(r_submit, e.finish)
        if any(e.submit < o.finish and qs.intersection(o.qubits) for o in rivals[lo:hi]):
            contended += 1
    return UserFeatures(freq, float(conc), skew, burst, inversion, contended / n)


def extract_all(log: Sequence[LogEntry], window: float, start: float = 0.0) -> dict[str, UserFeatures]:
    """Features for every user in ``log``, keyed and ordered by user id."""
    by_user: dict[str, list[LogEntry]] = {}
    for e in log:
        by_user.setdefault(e.user, []).append(e)
    return {u: extract_features(by_user[u], window, start, log) for u in sorted(by_user)}


# ---------------------------------------------------------------- one-class model

@dataclass(frozen=True)
class AnomalyModel:
    support: np.ndarray      # standardized support vectors, one per row
    coef: np.ndarray         # non-negative, sums to 1
    bandwidth: float
    offset: float
    mean: np.ndarray
    scale: np.ndarray
    nu: float
    iterations: int = 0

    def decision(self, X: np.ndarray) -> np.ndarray:
        Z = (np.atleast_2d(X) - self.mean) / self.scale
        return _rbf(Z, self.support, self.bandwidth) @ self.coef - self.offset

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "coef": self.coef.tolist(), "bandwidth": self.bandwidth,
                "offset": self.offset, "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "nu": self.nu, "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> AnomalyModel:
        return cls(np.array(d["support"], dtype=float), np.array(d["coef"], dtype=float), float(d["bandwidth"]),
                   float(d["offset"]), np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float),
                   float(d["nu"]), int(d.get("iterations", 0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> AnomalyModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _rbf(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
    return np.exp(-np.maximum(d2, 0.0) / (2 * sigma * sigma))


def median_bandwidth(Z: np.ndarray) -> float:
    d2 = (Z * Z).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2 * Z @ Z.T
    iu = np.triu_indices(len(Z), 1)
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0


def _as_matrix(data) -> np.ndarray:
    rows = [f.as_array() if isinstance(f, UserFeatures) else np.asarray(f, dtype=float) for f in data]
    return np.array(rows, dtype=float)


def train(normal: Sequence[UserFeatures] | np.ndarray, nu: float = 0.1, seed: int = 0,
          tol: float = 1e-6, max_iter: int = 10_000) -> AnomalyModel:
    """
    Fit a one-class RBF boundary around ``normal`` feature vectors.

    Features are standardized, the kernel bandwidth is the median pairwise
    distance, and the dual (minimise 1/2 a'Ka with 0 <= a_i <= 1/(nu n),
    sum a = 1) is solved by maximal-violating-pair coordinate updates until
    the objective moves less than ``tol``. The offset is the nu-quantile of
    the training decision values, so about nu of them score below 0.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    X = _as_matrix(normal)
    n = len(X)
    if n < 10:
        raise InsufficientDataError(f"need at least 10 samples, got {n}")

    mean = X.mean(0)
    scale = X.std(0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    sigma = median_bandwidth(Z)
    K = _rbf(Z, Z, sigma)

    C = 1.0 / (nu * n)
    alpha = np.zeros(n)
    order = np.random.default_rng(seed).permutation(n)
    left = 1.0
    for i in order:
        alpha[i] = min(C, left)
        left -= alpha[i]
        if left <= 0:
            break

    grad = K @ alpha
    obj = 0.5 * alpha @ grad
    it = 0
    for it in range(1, max_iter + 1):
        up = np.flatnonzero(alpha < C - 1e-12)
        low = np.flatnonzero(alpha > 1e-12)
        i = up[np.argmin(grad[up])]
        j = low[np.argmax(grad[low])]
        gap = grad[j] - grad[i]
        if gap <= 1e-12:
            break
        eta = max(K[i, i] + K[j, j] - 2 * K[i, j], 1e-12)
        step = min(gap / eta, C - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])
        new_obj = 0.5 * alpha @ grad
        if abs(obj - new_obj) < tol:
            obj = new_obj
            break
        obj = new_obj

    keep = alpha > 1e-12
    offset = float(np.quantile(grad, nu))
    return AnomalyModel(Z[keep].copy(), alpha[keep] / alpha[keep].sum(), sigma, offset, mean, scale, nu, it)


def score(m: AnomalyModel, f: UserFeatures | Sequence[float]) -> float:
    """Decision value; negative means anomalous."""
    x = f.as_array() if isinstance(f, UserFeatures) else np.asarray(f, dtype=float)
    return float(m.decision(x)[0])


def score_all(m: AnomalyModel, feats: dict[str, UserFeatures]) -> dict[str, float]:
    return {u: score(m, f) for u, f in feats.items()}


def respond(queue: Sequence[Job], user: str, policy: str = "isolate") -> list[Job]:
    """
    Apply a response to a flagged user.

    ``isolate`` marks the user's jobs solo so they never share a batch;
    ``deprioritize`` sets their usage just above everyone else's so they
    sort last.
    """
    if policy not in ("isolate", "deprioritize"):
        raise ValueError(f"unknown policy {policy!r}")
    if not queue:
        return []
    if not any(j.user == user for j in queue):
        raise ValueError(f"user {user!r} has no jobs in the queue")
    if policy == "isolate":
        return [replace(j, solo=True) if j.user == user else j for j in queue]
    top = max(j.usage_score for j in queue) + DEPRIORITIZE_EPS
    return [replace(j, usage_score=top) if j.user == user else j for j in queue]


# ---------------------------------------------------------------- synthetic corpus

def _normal_user(user: str, rng: np.random.Generator, window: float, allocs: list[tuple[int, ...]]) -> list[LogEntry]:
    rate = rng.uniform(1.0, 8.0)
    n = max(2, int(round(rate * window)))
    spacing = window / n
    t0 = rng.uniform(0, spacing)
    out = []
    for i in range(n):
        submit = (t0 + i * spacing + rng.uniform(-0.3, 0.3) * spacing) % window
        p = int(rng.integers(3))
        turnaround = rng.uniform(0.0005, 0.002) * (1.0 + 0.75 * p)
        out.append(LogEntry(user, f"{user}-{i}", float(submit), float(submit + turnaround), p,
                            allocs[int(rng.integers(len(allocs)))]))
    return sorted(out, key=lambda e: e.submit)


def _attacker_user(user: str, jobs: Sequence[Job], tier: int, rng: np.random.Generator,
                   window: float, bursts: int) -> list[LogEntry]:
    starts = np.sort(rng.uniform(0, window * 0.9, size=bursts))
    out = []
    for i, job in enumerate(jobs):
        b = starts[i % bursts]
        submit = b + rng.uniform(0, 0.01)
        turnaround = rng.uniform(0.001, 0.004)
        out.append(LogEntry(user, f"{user}-{i}", float(submit), float(submit + turnaround), tier,
                            job.requested or ()))
    return sorted(out, key=lambda e: e.submit)


def synthetic_corpus(n_normal: int = 100, n_attackers: int = 10, seed: int = 0, window: float = 7.0,
                     g: CouplingGraph | None = None) -> tuple[list[LogEntry], dict[str, bool]]:
    """
    Seeded job log of ``n_normal`` ordinary users and ``n_attackers`` flooders.

    Normal users submit 1-8 jobs/day on a jittered regular schedule with
    uniform priorities and random allocations. Each attacker is one tier
    account of a kitchen-sink flood (see ``generate_kitchen_sink_jobs``),
    submitted in a few tight bursts. Returns the log and user -> is_attacker.
    """
    g = g or grid20()
    rng = np.random.default_rng(seed)
    allocs = [a for k in (2, 3, 4) for a in enumerate_connected_allocations(g, k)]
    log: list[LogEntry] = []
    labels: dict[str, bool] = {}
    for u in range(n_normal):
        user = f"user{u:03d}"
        log += _normal_user(user, rng, window, allocs)
        labels[user] = False
    cal = synthetic_calibration(g, seed)
    targets = select_target_qubits(g, cal)
    for a in range(n_attackers):
        tier = a % 3
        tiers = int(rng.integers(40, 120))
        flood = generate_kitchen_sink_jobs(g, targets, tiers, (20, 40, 80), seed=seed * 1000 + a,
                                           user_prefix=f"atk{a:02d}-")
        mine = [j for j in flood if j.user == f"atk{a:02d}-{tier}"]
        user = f"atk{a:02d}"
        log += _attacker_user(user, mine, tier, rng, window, bursts=int(rng.integers(2, 5)))
        labels[user] = True
    return sorted(log, key=lambda e: (e.submit, e.user)), labels


def flood_log(jobs: Sequence[Job], window: float = 7.0, seed: int = 0, repeats: int = 20,
              bursts: int = 3) -> list[LogEntry]:
    """
    Log entries for flood accounts that resubmit their jobs ``repeats`` times.

    Each account's jobs are replayed in ``bursts`` tight bursts spread over
    the window, with the job's priority tier taken from its usage rank.
    """
    rng = np.random.default_rng(seed)
    by_user: dict[str, list[Job]] = {}
    for j in jobs:
        by_user.setdefault(j.user, []).append(j)
    tier_of = {u: t for t, u in enumerate(sorted(by_user, key=lambda u: (by_user[u][0].usage_score, u)))}
    out: list[LogEntry] = []
    for user in sorted(by_user):
        replay = [j for _ in range(repeats) for j in by_user[user]]
        out += _attacker_user(user, replay, min(tier_of[user], 2), rng, window, bursts)
    return sorted(out, key=lambda e: (e.submit, e.user))


def save_log(log: Iterable[LogEntry], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"entries": [e.to_dict() for e in log]}, indent=1))


def load_log(path: str | Path) -> list[LogEntry]:
    return [LogEntry.from_dict(d) for d in json.loads(Path(path).read_text())["entries"]]
