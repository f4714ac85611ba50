"""Discrete Bayesian mixtures with per-component provenance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InputError
from .measures import NEG_INF, ProcessMeasure, log2, logsumexp2, measure_from_dict


@dataclass(frozen=True)
class Component:
    weight: float
    measure: ProcessMeasure
    provenance: str = ""


class DiscretePrior(ProcessMeasure):
    """nu = sum_i w_i mu_i over a finite list of components.

    Components that share a measure are merged for evaluation (weights summed
    in list order), so evaluation cost scales with the number of distinct
    measures, not the number of provenance entries.
    """

    def __init__(self, components: Iterable[Component]):
        comps = tuple(components)
        if not comps:
            raise InputError("mixture needs at least one component")
        for c in comps:
            if not math.isfinite(c.weight) or c.weight < 0:
                raise InputError(f"component weight must be finite and >= 0, got {c.weight!r}")
        sizes = {c.measure.alphabet_size for c in comps}
        if len(sizes) != 1:
            raise InputError("mixture components disagree on alphabet size")
        self.components = comps
        self.alphabet_size = sizes.pop()

        merged: dict[str, list] = {}
        for c in comps:
            slot = merged.setdefault(c.measure.identity, [c.measure, 0.0])
            slot[1] += c.weight
        support = [(m, w) for m, w in merged.values() if w > 0]
        if not support:
            raise InputError("mixture has zero total weight")
        self.support: tuple[tuple[ProcessMeasure, float], ...] = tuple(support)
        self._log_w = log2([w for _, w in support])
        self._cache: dict[int, np.ndarray] = {}

    @classmethod
    def of(cls, pairs: Iterable[tuple[float, ProcessMeasure]], provenance: str = "") -> "DiscretePrior":
        return cls(Component(float(w), m, provenance) for w, m in pairs)

    @property
    def total_weight(self) -> float:
        return math.fsum(c.weight for c in self.components)

    @property
    def measures(self) -> tuple[ProcessMeasure, ...]:
        return tuple(m for m, _ in self.support)

    def __eq__(self, other):
        return isinstance(other, DiscretePrior) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def _mix(self, per_measure: list[np.ndarray]) -> np.ndarray:
        stacked = np.stack(per_measure) + self._log_w.reshape((-1,) + (1,) * per_measure[0].ndim)
        return logsumexp2(stacked, axis=0)

    def component_log_probs(self, strings: np.ndarray) -> np.ndarray:
        """log2 w_i mu_i(x) for each distinct support measure, shape ``(K, m)``."""
        return np.stack([m.log_prob_block(strings) for m in self.measures]) + self._log_w[:, None]

    def log_prob_block(self, strings):
        return logsumexp2(self.component_log_probs(np.asarray(strings)), axis=0)

    def log_cond(self, prefixes):
        joint = self.component_log_probs(prefixes)
        total = logsumexp2(joint, axis=0)
        conds = np.stack([m.log_cond(prefixes) for m in self.measures])
        with np.errstate(invalid="ignore"):
            out = logsumexp2(joint[:, :, None] + conds, axis=0) - total[:, None]
        out[np.isneginf(total)] = NEG_INF
        return out

    def log_marginals(self, n):
        if n not in self._cache:
            self._cache[n] = self._mix([m.log_marginals(n) for m in self.measures])
        return self._cache[n]

    def log_marginal_table(self, N):
        tables = [m.log_marginal_table(N) for m in self.measures]
        out = [self._mix([t[n] for t in tables]) for n in range(N + 1)]
        for n, v in enumerate(out):
            self._cache.setdefault(n, v)
        return out

    def sample_block(self, n, count, rng):
        weights = np.array([w for _, w in self.support])
        picks = rng.choice(len(weights), size=count, p=weights / weights.sum())
        out = np.zeros((count, n), dtype=np.uint8)
        for j, m in enumerate(self.measures):
            rows = np.flatnonzero(picks == j)
            if rows.size:
                out[rows] = m.sample_block(n, rows.size, rng)
        return out

    def to_dump(self) -> list[dict]:
        """JSON array: one entry per component, weights as full-precision decimal strings."""
        return [
            {
                "weight": repr(float(c.weight)),
                "id": c.measure.identity,
                "measure": c.measure.to_dict(),
                "provenance": c.provenance,
            }
            for c in self.components
        ]

    @classmethod
    def from_dump(cls, entries: list) -> "DiscretePrior":
        if not isinstance(entries, list):
            raise InputError("prior dump must be a JSON array")
        comps = []
        for e in entries:
            try:
                comps.append(Component(float(e["weight"]), measure_from_dict(e["measure"]), e.get("provenance", "")))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"bad prior dump entry {e!r}: {exc}") from exc
        return cls(comps)

    def to_dict(self):
        return {"type": "mixture", "components": self.to_dump()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretePrior":
        return cls.from_dump(d["components"])

    @property
    def identity(self):
        inner = "+".join(f"{w!r}*{m.identity}" for m, w in self.support)
        return f"mixture({inner})"

    def __repr__(self):
        return f"DiscretePrior({len(self.components)} components, {len(self.support)} measures)"
