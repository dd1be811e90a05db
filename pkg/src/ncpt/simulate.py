"""Sequential-test observers and the ordered-collection coordinator.

Each observer runs Wald's sequential probability ratio test on its own
observation stream; the coordinator collects the three binary decisions in
the order the tests stop, breaking ties by a fixed preference order. Runs
are reproducible: every (run, observer) pair owns a counter-based Philox
substream derived from (seed, run index, observer slot), so results do not
depend on execution order or sharding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import log

import numpy as np

from .errors import DegenerateSpec

_KEY_SALT = 0x9E3779B97F4A7C15
_CHUNK = 64
_BLOCK = 1 << 15


@dataclass(frozen=True)
class ObserverSpec:
    """One observer: outcome distributions under either hypothesis and SPRT targets."""

    pmf_h0: tuple
    pmf_h1: tuple
    alpha: float = 0.05
    beta: float = 0.05
    max_samples: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "pmf_h0", tuple(float(p) for p in self.pmf_h0))
        object.__setattr__(self, "pmf_h1", tuple(float(p) for p in self.pmf_h1))
        p0, p1 = np.array(self.pmf_h0), np.array(self.pmf_h1)
        if p0.shape != p1.shape or p0.ndim != 1 or p0.size < 2:
            raise ValueError("the two pmfs must share one finite alphabet")
        for p in (p0, p1):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("pmfs must be probability vectors summing to 1")
        if np.any((p0 == 0) & (p1 == 0)):
            raise DegenerateSpec("an outcome has zero probability under both hypotheses")
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.max_samples < 1:
            raise ValueError("max_samples must be positive")

    def thresholds(self):
        """Wald's boundaries (upper, lower) for the accumulated log-likelihood ratio."""
        return (log((1.0 - self.beta) / self.alpha),
                log(self.beta / (1.0 - self.alpha)))

    def llr_increments(self) -> np.ndarray:
        """log(p1/p0) per outcome; +/-inf where one hypothesis excludes it."""
        p0, p1 = np.array(self.pmf_h0), np.array(self.pmf_h1)
        with np.errstate(divide="ignore"):
            return np.log(p1) - np.log(p0)

    def cdf(self, h: int) -> np.ndarray:
        p = np.array(self.pmf_h1 if h else self.pmf_h0)
        return np.cumsum(p)


@dataclass(frozen=True)
class SimConfig:
    """A full simulation campaign: observers, run count, seed, prior, tie-break order."""

    observers: tuple
    runs: int
    seed: int
    hypothesis_prior: tuple = (0.5, 0.5)
    preference: tuple = (2, 1, 3)

    def __post_init__(self):
        object.__setattr__(self, "observers", tuple(self.observers))
        object.__setattr__(self, "hypothesis_prior", tuple(self.hypothesis_prior))
        object.__setattr__(self, "preference", tuple(int(i) for i in self.preference))
        z0, z1 = self.hypothesis_prior
        if z0 < 0 or z1 < 0 or abs(z0 + z1 - 1.0) > 1e-12:
            raise ValueError("hypothesis_prior must be a probability pair")
        n = len(self.observers)
        if sorted(self.preference) != list(range(1, n + 1)):
            raise ValueError("preference must be a permutation of observer ids")
        if self.runs < 0:
            raise ValueError("runs must be nonnegative")

    @classmethod
    def from_dict(cls, payload: dict) -> "SimConfig":
        observers = tuple(
            ObserverSpec(
                pmf_h0=obs["pmf_h0"],
                pmf_h1=obs["pmf_h1"],
                alpha=obs.get("alpha", 0.05),
                beta=obs.get("beta", 0.05),
                max_samples=obs.get("max_samples", 10_000),
            )
            for obs in payload["observers"]
        )
        return cls(
            observers=observers,
            runs=int(payload["runs"]),
            seed=int(payload["seed"]),
            hypothesis_prior=tuple(payload.get("hypothesis_prior", (0.5, 0.5))),
            preference=tuple(payload.get("preference", (2, 1, 3))),
        )

    def to_dict(self) -> dict:
        return {
            "observers": [
                {
                    "pmf_h0": list(o.pmf_h0),
                    "pmf_h1": list(o.pmf_h1),
                    "alpha": o.alpha,
                    "beta": o.beta,
                    "max_samples": o.max_samples,
                }
                for o in self.observers
            ],
            "runs": self.runs,
            "seed": self.seed,
            "hypothesis_prior": list(self.hypothesis_prior),
            "preference": list(self.preference),
        }

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RunRecord:
    """One simulated trial: true hypothesis, decisions in collection order, stop times."""

    h: int
    decisions: tuple      # ((observer_id, bit), ...) in the order collected
    stop_times: tuple     # indexed by observer id - 1

    @property
    def observer_order(self):
        return tuple(obs for obs, _ in self.decisions)


def observer_stream(seed: int, run: int, slot: int) -> np.random.Generator:
    """Philox substream owned by one (run, slot) pair.

    Slot 0 is reserved for hypothesis draws; observer i uses slot i. The
    substream occupies counter block [., ., run, slot], so streams never
    overlap and any shard of runs can be regenerated independently.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(_KEY_SALT)])
    counter = np.array([0, 0, run, slot], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def sprt_run(spec: ObserverSpec, h: int, stream) -> tuple:
    """Run one SPRT to absorption, consuming uniforms one at a time.

    Returns (decision, stop_time). Decides 1 when the accumulated
    log-likelihood ratio reaches the upper boundary, 0 at the lower one;
    at the sample cap the sign decides (ties to 0).
    """
    upper, lower = spec.thresholds()
    incr = spec.llr_increments()
    cdf = spec.cdf(h)
    last = incr.size - 1
    llr = 0.0
    for t in range(1, spec.max_samples + 1):
        u = stream.random()
        x = min(int(np.searchsorted(cdf, u, side="right")), last)
        llr += incr[x]
        if llr >= upper:
            return 1, t
        if llr <= lower:
            return 0, t
    return (1 if llr > 0 else 0), spec.max_samples


def coordinate(stop_times, decisions, preference=(2, 1, 3)) -> list:
    """Order decisions by arrival time, breaking ties by the preference list.

    Returns [(observer_id, decision), ...] in collection order.
    """
    n = len(stop_times)
    rank = {obs: pos for pos, obs in enumerate(preference)}
    order = sorted(range(n), key=lambda i: (stop_times[i], rank[i + 1]))
    return [(i + 1, decisions[i]) for i in order]


def _observer_columns(spec: ObserverSpec, h: np.ndarray, seed: int, slot: int):
    """Vectorized SPRT for one observer over all runs.

    Consumes each run's substream in chunks of 64 uniforms; decisions match
    `sprt_run` on the same substream exactly.
    """
    runs = h.size
    upper, lower = spec.thresholds()
    incr = spec.llr_increments()
    cdfs = (spec.cdf(0), spec.cdf(1))
    last = incr.size - 1
    decisions = np.zeros(runs, dtype=np.int8)
    stop_times = np.zeros(runs, dtype=np.int32)

    for start in range(0, runs, _BLOCK):
        block = np.arange(start, min(start + _BLOCK, runs))
        gens = [observer_stream(seed, int(r), slot) for r in block]
        h_block = h[block]
        carry = np.zeros(block.size)
        active = np.arange(block.size)
        consumed = 0
        while active.size:
            n_draw = min(_CHUNK, spec.max_samples - consumed)
            u = np.empty((active.size, n_draw))
            for i, a in enumerate(active):
                gens[a].random(out=u[i])
            lam = np.empty_like(u)
            for hv in (0, 1):
                mask = h_block[active] == hv
                if mask.any():
                    idx = np.searchsorted(cdfs[hv], u[mask].ravel(), side="right")
                    lam[mask] = incr[np.minimum(idx, last)].reshape(-1, n_draw)
            cum = np.cumsum(lam, axis=1)
            cum += carry[active, None]
            up = cum >= upper
            crossed = up | (cum <= lower)
            hit = crossed.any(axis=1)
            first = np.argmax(crossed, axis=1)
            rows = np.nonzero(hit)[0]
            done = active[rows]
            decisions[block[done]] = up[rows, first[rows]]
            stop_times[block[done]] = consumed + first[rows] + 1
            consumed += n_draw
            surv_rows = np.nonzero(~hit)[0]
            surv = active[surv_rows]
            carry[surv] = cum[surv_rows, -1]
            if consumed >= spec.max_samples:
                decisions[block[surv]] = carry[surv] > 0
                stop_times[block[surv]] = spec.max_samples
                active = np.empty(0, dtype=int)
            else:
                active = surv
    return decisions, stop_times


def simulate_arrays(config: SimConfig):
    """Run the whole campaign, returning flat arrays.

    Returns (h, decisions, stop_times) with shapes (runs,), (runs, n_obs),
    (runs, n_obs). Output is a pure function of (config contents, seed).
    """
    runs = config.runs
    n_obs = len(config.observers)
    z1 = config.hypothesis_prior[1]
    h = (observer_stream(config.seed, 0, 0).random(runs) < z1).astype(np.int8)
    decisions = np.zeros((runs, n_obs), dtype=np.int8)
    stop_times = np.zeros((runs, n_obs), dtype=np.int32)
    for o, spec in enumerate(config.observers):
        decisions[:, o], stop_times[:, o] = _observer_columns(
            spec, h, config.seed, o + 1
        )
    return h, decisions, stop_times


def collection_order(stop_times: np.ndarray, preference) -> np.ndarray:
    """Vectorized coordinator: (runs, n) observer indices in collection order."""
    n = stop_times.shape[1]
    rank = np.empty(n, dtype=np.int64)
    for pos, obs in enumerate(preference):
        rank[obs - 1] = pos
    key = stop_times.astype(np.int64) * (n + 1) + rank[None, :]
    return np.argsort(key, axis=1, kind="stable")


def simulate_campaign(config: SimConfig) -> list:
    """Run the campaign and materialize one RunRecord per trial."""
    h, decisions, stop_times = simulate_arrays(config)
    order = collection_order(stop_times, config.preference)
    records = []
    for r in range(config.runs):
        ordered = tuple(
            (int(o) + 1, int(decisions[r, o])) for o in order[r]
        )
        records.append(
            RunRecord(
                h=int(h[r]),
                decisions=ordered,
                stop_times=tuple(int(t) for t in stop_times[r]),
            )
        )
    return records


def write_run_records_csv(path, h, decisions, stop_times, preference=(2, 1, 3)):
    """Write one CSV row per run: hypothesis, collection order, ordered decisions, stop times."""
    import csv

    h = np.asarray(h)
    decisions = np.asarray(decisions)
    stop_times = np.asarray(stop_times)
    order = collection_order(stop_times, preference)
    n = decisions.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "obs_order"]
                        + [f"d_{name}" for name in ("first", "second", "third")[:n]]
                        + [f"tau{i + 1}" for i in range(n)])
        for r in range(h.size):
            obs_order = ",".join(f"D{order[r, k] + 1}" for k in range(n))
            ordered_dec = [int(decisions[r, order[r, k]]) for k in range(n)]
            writer.writerow([int(h[r]), obs_order] + ordered_dec
                            + [int(t) for t in stop_times[r]])


def decision_rates(h: np.ndarray, decisions: np.ndarray) -> dict:
    """Empirical P(D_i = 1 | h) per observer, for summaries and sanity checks."""
    out = {}
    for hv in (0, 1):
        mask = h == hv
        if mask.any():
            out[hv] = decisions[mask].mean(axis=0).tolist()
        else:
            out[hv] = None
    return out
