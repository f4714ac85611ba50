"""Process measures on one-way infinite sequences over a finite alphabet.

A measure is exposed through its next-symbol conditionals, evaluated on a
whole block of prefixes at once (``log_cond``). Marginals over all of X^n are
built by prefix extension in lexicographic order: the string with index ``j``
at horizon ``t`` has children ``j*|X| + a`` at horizon ``t+1``. Every
probability is kept as a log2 value; ``-inf`` stands for probability zero.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from decimal import Decimal
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InputError, UndefinedConditionalError

NEG_INF = -np.inf


def log2(p) -> np.ndarray:
    """Elementwise log2 with log2(0) = -inf and no warning."""
    with np.errstate(divide="ignore"):
        return np.log2(np.asarray(p, dtype=float))


def logsumexp2(values, axis=None):
    """log2 of a sum of 2**values; an empty or all -inf input gives -inf."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return NEG_INF
    return np.logaddexp2.reduce(values, axis=axis)


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 2:
            raise InputError(f"alphabet size must be an integer >= 2, got {self.size!r}")
        if self.size > 255:
            raise InputError("alphabet size above 255 is not supported")

    @property
    def M(self) -> float:
        return math.log2(self.size)


@lru_cache(maxsize=128)
def all_strings(size: int, n: int) -> np.ndarray:
    """All of X^n as a read-only ``(size**n, n)`` uint8 array in lexicographic order."""
    idx = np.arange(size**n, dtype=np.int64)
    powers = size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = ((idx[:, None] // powers[None, :]) % size).astype(np.uint8)
    out.setflags(write=False)
    return out


def string_index(x: Sequence[int], size: int) -> int:
    """Lexicographic index of ``x`` within X^len(x)."""
    j = 0
    for a in x:
        j = j * size + int(a)
    return j


def as_symbols(x, size: int) -> tuple[int, ...]:
    """Normalize a string given as ``"0110"`` or a sequence of ints; validates symbols."""
    if isinstance(x, str):
        if any(not c.isdigit() for c in x):
            raise InputError(f"string {x!r} contains non-digit characters")
        syms = tuple(int(c) for c in x)
    else:
        syms = tuple(int(a) for a in x)
    for a in syms:
        if not 0 <= a < size:
            raise InputError(f"symbol {a} outside alphabet of size {size}")
    return syms


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


class ProcessMeasure(ABC):
    """A probability measure on X^infinity given by consistent conditionals."""

    alphabet_size: int

    @abstractmethod
    def log_cond(self, prefixes: np.ndarray) -> np.ndarray:
        """log2 next-symbol probabilities for every row of ``prefixes``.

        ``prefixes`` has shape ``(m, t)``; the result has shape ``(m, |X|)``.
        Rows for zero-probability prefixes may hold anything finite or -inf.
        """

    @abstractmethod
    def to_dict(self) -> dict:
        """JSON-serializable parameters, including a ``type`` key."""

    @property
    def identity(self) -> str:
        d = self.to_dict()
        body = ",".join(f"{k}={_fmt(v)}" for k, v in d.items() if k != "type")
        return f"{d['type']}({body})"

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.alphabet_size)

    def log_prob_block(self, strings: np.ndarray) -> np.ndarray:
        """log2 marginal probability of each row of ``strings`` (shape ``(m, n)``)."""
        strings = np.asarray(strings)
        m, n = strings.shape
        total = np.zeros(m)
        rows = np.arange(m)
        for t in range(n):
            step = self.log_cond(strings[:, :t])[rows, strings[:, t]]
            total = total + step
        return total

    def log_marginals(self, n: int) -> np.ndarray:
        """log2 probabilities of all strings in X^n, lexicographic order."""
        return self.log_marginal_table(n)[n]

    def log_marginal_table(self, N: int) -> list[np.ndarray]:
        """``[log P(X^0), log P(X^1), ..., log P(X^N)]`` by prefix extension."""
        size = self.alphabet_size
        logp = np.zeros(1)
        table = [logp]
        for t in range(N):
            cond = self.log_cond(all_strings(size, t))
            logp = (logp[:, None] + cond).reshape(-1)
            table.append(logp)
        return table

    def sample_block(self, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """``count`` independent draws of x_{1..n}, shape ``(count, n)``."""
        out = np.zeros((count, n), dtype=np.uint8)
        for t in range(n):
            probs = np.exp2(self.log_cond(out[:, :t]))
            cdf = np.cumsum(probs, axis=1)
            u = rng.random(count) * cdf[:, -1]
            sym = (u[:, None] >= cdf).sum(axis=1)
            out[:, t] = np.minimum(sym, self.alphabet_size - 1)
        return out


def _check_prob(p: float, what: str, open_interval: bool = False) -> float:
    p = float(p)
    if not math.isfinite(p) or p < 0.0 or p > 1.0:
        raise InputError(f"{what} must lie in [0, 1], got {p!r}")
    if open_interval and not 0.0 < p < 1.0:
        raise InputError(f"{what} must lie in (0, 1), got {p!r}")
    return p


def _check_dist(probs: Iterable[float], what: str) -> tuple[float, ...]:
    probs = tuple(_check_prob(p, what) for p in probs)
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        raise InputError(f"{what} must sum to 1, got {math.fsum(probs)!r}")
    return probs


@dataclass(frozen=True)
class Bernoulli(ProcessMeasure):
    """i.i.d. binary measure with P(x_t = 1) = p."""

    p: float
    alphabet_size: int = field(default=2, init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", _check_prob(self.p, "Bernoulli parameter"))

    def log_cond(self, prefixes):
        row = log2([1.0 - self.p, self.p])
        return np.broadcast_to(row, (len(prefixes), 2))

    def to_dict(self):
        return {"type": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class IID(ProcessMeasure):
    probs: tuple[float, ...]
    alphabet_size: int = field(init=False)

    def __post_init__(self):
        probs = _check_dist(self.probs, "i.i.d. probabilities")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "alphabet_size", Alphabet(len(probs)).size)

    def log_cond(self, prefixes):
        return np.broadcast_to(log2(self.probs), (len(prefixes), self.alphabet_size))

    def to_dict(self):
        return {"type": "iid", "probs": list(self.probs)}


@dataclass(frozen=True)
class Uniform(ProcessMeasure):
    """The equal-probability i.i.d. measure: P(x_{1..n}) = |X|^-n exactly."""

    alphabet_size: int = 2

    def __post_init__(self):
        Alphabet(self.alphabet_size)

    def log_cond(self, prefixes):
        return np.full((len(prefixes), self.alphabet_size), -math.log2(self.alphabet_size))

    def log_marginal_table(self, N):
        return [np.full(self.alphabet_size**t, -t * math.log2(self.alphabet_size)) for t in range(N + 1)]

    def to_dict(self):
        return {"type": "uniform", "alphabet_size": self.alphabet_size}


@dataclass(frozen=True)
class Markov(ProcessMeasure):
    """Finite-order Markov chain.

    ``rows[c]`` is the next-symbol distribution after context ``c``, where
    ``c`` is the lexicographic index of the last ``order`` symbols. The first
    ``order`` symbols are drawn i.i.d. from ``initial`` (uniform by default).
    """

    order: int
    rows: tuple[tuple[float, ...], ...]
    initial: tuple[float, ...] | None = None
    alphabet_size: int = field(init=False)

    def __post_init__(self):
        rows = tuple(_check_dist(r, "transition row") for r in self.rows)
        if not rows:
            raise InputError("Markov measure needs transition rows")
        size = Alphabet(len(rows[0])).size
        if self.order < 0:
            raise InputError("Markov order must be >= 0")
        if len(rows) != size**self.order or any(len(r) != size for r in rows):
            raise InputError(f"order-{self.order} chain over {size} symbols needs {size**self.order} rows of length {size}")
        initial = (1.0 / size,) * size if self.initial is None else _check_dist(self.initial, "initial distribution")
        if len(initial) != size:
            raise InputError("initial distribution has wrong length")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "alphabet_size", size)

    @classmethod
    def binary(cls, ones: Sequence[float], order: int = 1) -> "Markov":
        """Binary chain from P(x_t = 1 | context), one entry per context."""
        return cls(order, tuple((1.0 - float(q), float(q)) for q in ones))

    def log_cond(self, prefixes):
        m, t = prefixes.shape
        if t < self.order:
            return np.broadcast_to(log2(self.initial), (m, self.alphabet_size))
        table = log2(self.rows)
        if self.order == 0:
            return np.broadcast_to(table[0], (m, self.alphabet_size))
        powers = self.alphabet_size ** np.arange(self.order - 1, -1, -1)
        ctx = prefixes[:, t - self.order:].astype(np.int64) @ powers
        return table[ctx]

    def to_dict(self):
        return {
            "type": "markov",
            "order": self.order,
            "rows": [list(r) for r in self.rows],
            "initial": list(self.initial),
        }


@dataclass(frozen=True)
class ChangePoint(ProcessMeasure):
    """Binary i.i.d. segments: symbol x_t uses ``params[j]`` where j counts change times <= t."""

    times: tuple[int, ...]
    params: tuple[float, ...]
    alphabet_size: int = field(default=2, init=False)

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        params = tuple(_check_prob(p, "segment parameter") for p in self.params)
        if any(t < 2 for t in times) or list(times) != sorted(set(times)):
            raise InputError(f"change times must be strictly increasing and >= 2, got {times}")
        if len(params) != len(times) + 1:
            raise InputError("need exactly one more segment parameter than change times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "params", params)

    def param_at(self, t: int) -> float:
        """Parameter governing position t (1-indexed)."""
        return self.params[sum(1 for c in self.times if c <= t)]

    def log_cond(self, prefixes):
        p = self.param_at(prefixes.shape[1] + 1)
        return np.broadcast_to(log2([1.0 - p, p]), (len(prefixes), 2))

    def to_dict(self):
        return {"type": "change-point", "times": list(self.times), "params": list(self.params)}


@dataclass(frozen=True)
class Dirac(ProcessMeasure):
    """Point mass on ``prefix`` followed by ``tail`` repeated forever.

    Trailing tail symbols are stripped from the prefix, so each sequence has a
    single representation; ``support_length`` is then the position of the last
    non-tail symbol (0 for the constant sequence).
    """

    prefix: tuple[int, ...]
    tail: int = 0
    alphabet_size: int = 2

    def __post_init__(self):
        Alphabet(self.alphabet_size)
        prefix = list(as_symbols(self.prefix, self.alphabet_size))
        tail = as_symbols([self.tail], self.alphabet_size)[0]
        while prefix and prefix[-1] == tail:
            prefix.pop()
        object.__setattr__(self, "prefix", tuple(prefix))
        object.__setattr__(self, "tail", tail)

    @property
    def support_length(self) -> int:
        return len(self.prefix)

    def symbol_at(self, t: int) -> int:
        """Symbol at 0-based position t."""
        return self.prefix[t] if t < len(self.prefix) else self.tail

    def sequence(self, n: int) -> tuple[int, ...]:
        return tuple(self.symbol_at(t) for t in range(n))

    def log_cond(self, prefixes):
        row = np.full(self.alphabet_size, NEG_INF)
        row[self.symbol_at(prefixes.shape[1])] = 0.0
        return np.broadcast_to(row, (len(prefixes), self.alphabet_size))

    def log_marginal_table(self, N):
        size = self.alphabet_size
        table = []
        for t in range(N + 1):
            v = np.full(size**t, NEG_INF)
            v[string_index(self.sequence(t), size)] = 0.0
            table.append(v)
        return table

    def sample_block(self, n, count, rng):
        return np.tile(np.array(self.sequence(n), dtype=np.uint8), (count, 1))

    def to_dict(self):
        return {
            "type": "dirac",
            "prefix": "".join(map(str, self.prefix)) if self.alphabet_size <= 10 else list(self.prefix),
            "tail": self.tail,
            "alphabet_size": self.alphabet_size,
        }


def uniform_measure(alphabet: Alphabet | int = 2) -> Uniform:
    size = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
    return Uniform(size)


def marginal(m: ProcessMeasure, x) -> float:
    """log2 of m(x_{1..n})."""
    syms = as_symbols(x, m.alphabet_size)
    return float(m.log_prob_block(np.array([syms], dtype=np.uint8).reshape(1, len(syms)))[0])


def conditional(m: ProcessMeasure, prefix, a: int) -> float:
    """log2 of m(x_t = a | prefix)."""
    syms = as_symbols(prefix, m.alphabet_size)
    (a,) = as_symbols([a], m.alphabet_size)
    if marginal(m, syms) == NEG_INF:
        raise UndefinedConditionalError(f"prefix {syms} has probability zero under {m.identity}")
    block = np.array([syms], dtype=np.uint8).reshape(1, len(syms))
    return float(m.log_cond(block)[0, a])


def sample(m: ProcessMeasure, n: int, seed: int) -> tuple[int, ...]:
    if n < 0:
        raise InputError("horizon must be >= 0")
    rng = np.random.default_rng(seed)
    return tuple(int(a) for a in m.sample_block(n, 1, rng)[0])


def measure_from_dict(d: dict) -> ProcessMeasure:
    """Inverse of ``ProcessMeasure.to_dict``."""
    if not isinstance(d, dict) or "type" not in d:
        raise InputError(f"measure description must be an object with a 'type': {d!r}")
    kind = d["type"]
    try:
        if kind == "bernoulli":
            return Bernoulli(d["p"])
        if kind == "iid":
            return IID(tuple(d["probs"]))
        if kind == "uniform":
            return Uniform(int(d.get("alphabet_size", 2)))
        if kind == "markov":
            if "ones" in d:
                return Markov.binary(d["ones"], int(d.get("order", 1)))
            initial = d.get("initial")
            return Markov(int(d["order"]), tuple(tuple(r) for r in d["rows"]),
                          None if initial is None else tuple(initial))
        if kind == "change-point":
            return ChangePoint(tuple(d["times"]), tuple(d["params"]))
        if kind == "dirac":
            size = int(d.get("alphabet_size", 2))
            return Dirac(as_symbols(d.get("prefix", ""), size), int(d.get("tail", 0)), size)
        if kind == "mixture":
            from .mixture import DiscretePrior

            return DiscretePrior.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad parameters for measure type {kind!r}: {exc}") from exc
    raise InputError(f"unknown measure type {kind!r}")


@dataclass(frozen=True)
class ModelClass:
    """Ordered, non-empty list of measures with unique identities."""

    measures: tuple[ProcessMeasure, ...]
    family: str = "custom"
    spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        measures = tuple(self.measures)
        if not measures:
            raise InputError("model class is empty")
        sizes = {m.alphabet_size for m in measures}
        if len(sizes) != 1:
            raise InputError(f"measures disagree on alphabet size: {sorted(sizes)}")
        ids = [m.identity for m in measures]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise InputError(f"duplicate measures in class: {sorted(dup)}")
        object.__setattr__(self, "measures", measures)

    def __len__(self):
        return len(self.measures)

    def __iter__(self):
        return iter(self.measures)

    def __getitem__(self, i):
        return self.measures[i]

    @property
    def alphabet_size(self) -> int:
        return self.measures[0].alphabet_size

    @property
    def M(self) -> float:
        return math.log2(self.alphabet_size)

    def index_of(self, m: ProcessMeasure) -> int:
        ident = m.identity
        for i, other in enumerate(self.measures):
            if other.identity == ident:
                return i
        raise InputError(f"{ident} is not a member of the class")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "alphabet_size": self.alphabet_size,
            "spec": self.spec,
            "measures": [m.to_dict() for m in self.measures],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ModelClass":
        if not isinstance(d, dict) or not isinstance(d.get("measures"), list):
            raise InputError("class file must be an object with a 'measures' list")
        return cls(tuple(measure_from_dict(m) for m in d["measures"]),
                   d.get("family", "custom"), d.get("spec", {}))


def _grid(spec: dict) -> list[float]:
    if "grid" in spec:
        values = [float(v) for v in spec["grid"]]
    elif {"start", "stop", "step"} <= spec.keys():
        start, stop, step = (Decimal(str(spec[k])) for k in ("start", "stop", "step"))
        if step <= 0:
            raise InputError("grid step must be positive")
        values, v = [], start
        while v <= stop:
            values.append(float(v))
            v += step
    else:
        raise InputError("grid families need 'grid' or 'start'/'stop'/'step'")
    if not values:
        raise InputError("parameter grid is empty")
    for v in values:
        _check_prob(v, "grid value", open_interval=True)
    return values


_DIRAC_FAMILY = re.compile(r"^dirac-upto(?:-(\d+))?$")


def build_class(spec: dict) -> ModelClass:
    """Build a model class from a JSON-style description.

    Families: ``bernoulli-grid``, ``markov-grid``, ``change-point``,
    ``dirac-upto`` (``K`` parameter, or ``dirac-upto-3`` style), ``custom``
    (explicit ``measures`` list) and ``union`` (list of ``classes``).
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise InputError("class spec must be an object with a 'family'")
    family = spec["family"]
    size = int(spec.get("alphabet_size", 2))
    Alphabet(size)
    dirac = _DIRAC_FAMILY.match(str(family))

    if family == "bernoulli-grid":
        _binary_only(size, family)
        measures = [Bernoulli(p) for p in _grid(spec)]
    elif family == "markov-grid":
        order = int(spec.get("order", 1))
        if order < 0:
            raise InputError("order must be >= 0")
        if "rows" in spec:
            rows = [_check_dist(r, "candidate row") for r in spec["rows"]]
            if not rows:
                raise InputError("parameter grid is empty")
            size = len(rows[0])
        else:
            _binary_only(size, family)
            rows = [(1.0 - q, q) for q in _grid(spec)]
        initial = spec.get("initial")
        measures = [
            Markov(order, combo, None if initial is None else tuple(initial))
            for combo in itertools.product(rows, repeat=size**order)
        ]
    elif family == "change-point":
        _binary_only(size, family)
        times = sorted(int(t) for t in spec.get("times", []))
        choose = int(spec.get("choose", len(times)))
        if not 0 <= choose <= len(times):
            raise InputError("'choose' must be between 0 and the number of times")
        grid = _grid(spec)
        measures = [
            ChangePoint(cps, params)
            for cps in itertools.combinations(times, choose)
            for params in itertools.product(grid, repeat=choose + 1)
        ]
    elif dirac:
        K = int(dirac.group(1) if dirac.group(1) is not None else spec.get("K", -1))
        if K < 0:
            raise InputError("dirac-upto needs a non-negative K")
        measures = [Dirac(x, 0, size) for x in itertools.product(range(size), repeat=K)]
    elif family == "custom":
        if not isinstance(spec.get("measures"), list):
            raise InputError("custom class needs a 'measures' list")
        measures = [measure_from_dict(d) for d in spec["measures"]]
    elif family == "union":
        measures = [m for sub in spec.get("classes", []) for m in build_class(sub).measures]
    else:
        raise InputError(f"unknown family {family!r}")
    return ModelClass(tuple(measures), str(family), spec)


def _binary_only(size: int, family: str) -> None:
    if size != 2:
        raise InputError(f"family {family!r} is binary; alphabet_size must be 2")
