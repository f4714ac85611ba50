"""Construction of a discrete prior over a model class that tracks a reference predictor.

For every horizon n the strings of X^n are sorted into cells by the
per-symbol log-likelihood ratio of each class measure against the
(uniform-mixed) reference. A greedy cover picks class measures whose cells
carry the most reference mass; the picked measures are mixed with a
1/(l log^2 l) weight sequence, and a regularizer mixture of class measures
absorbs the remaining prior mass.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EnumerationBudgetError, InputError
from .loss import DEFAULT_BUDGET, check_budget
from .measures import ModelClass, ProcessMeasure, Uniform
from .mixture import Component, DiscretePrior

SERIES_CUTOFF = 10**7
BOUNDARY_RTOL = 1e-12
TIE_RTOL = 1e-12
THREADS_ENV = "BAYES_REGRET_THREADS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def series_tail(K: float) -> float:
    """sum_{k>K} 1/(k log2^2 k): integral ln^2(2)/ln K minus Euler-Maclaurin endpoint terms."""
    L = math.log2(K)
    f = 1.0 / (K * L * L)
    df = -1.0 / (K * K * L * L) - 2.0 / (K * K * L**3 * math.log(2))
    return math.log(2) ** 2 / math.log(K) - f / 2 - df / 12


@lru_cache(maxsize=None)
def weight_normalizer() -> float:
    """w such that 1/2 + sum_{k>=2} w / (k log2^2 k) = 1.

    Head summed exactly up to ``SERIES_CUTOFF``, tail in closed form.
    """
    chunk_sums = []
    for lo in range(2, SERIES_CUTOFF + 1, 10**6):
        k = np.arange(lo, min(lo + 10**6, SERIES_CUTOFF + 1), dtype=float)
        chunk_sums.append(float(np.sum(1.0 / (k * np.log2(k) ** 2))))
    return 0.5 / (math.fsum(chunk_sums) + series_tail(SERIES_CUTOFF))


def weight(k: float, w: float | None = None) -> float:
    """w_1 = 1/2, w_k = w / (k log2^2 k) for k > 1."""
    if k < 1:
        raise InputError("weights are indexed from 1")
    if k == 1:
        return 0.5
    w = weight_normalizer() if w is None else w
    return w / (k * math.log2(k) ** 2)


@dataclass(frozen=True)
class WeightScheme:
    normalizer: float
    weights: np.ndarray = field(repr=False)

    @property
    def k_max(self) -> int:
        return len(self.weights)

    def __call__(self, k: float) -> float:
        return weight(k, self.normalizer)

    def tail_mass(self) -> float:
        """sum_{k > k_max} w_k."""
        if self.k_max < 2:
            return 1.0 - float(self.weights.sum())
        return self.normalizer * series_tail(self.k_max)


def weights(k_max: int) -> WeightScheme:
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    w = weight_normalizer()
    k = np.arange(2, k_max + 1, dtype=float)
    tail = w / (k * np.log2(k) ** 2)
    arr = np.concatenate([[0.5], tail])
    arr.setflags(write=False)
    return WeightScheme(w, arr)


def k_of_n(n: int) -> int:
    """Number of ratio intervals used at horizon n: ceil(n / log2 log2 n), with k(2) = 2."""
    if n < 2:
        raise InputError("k(n) is defined for n >= 2")
    if n == 2:
        return 2
    return max(2, math.ceil(n / math.log2(math.log2(n))))


def mix_with_uniform(rho: ProcessMeasure) -> ProcessMeasure:
    """rho' = (rho + delta) / 2 with delta the uniform i.i.d. measure; -log2 rho'(x) <= nM + 1."""
    delta = Uniform(rho.alphabet_size)
    if isinstance(rho, Uniform):
        return rho
    return DiscretePrior([Component(0.5, rho, "reference"), Component(0.5, delta, "uniform")])


def _snap(values: np.ndarray, targets: np.ndarray | float) -> np.ndarray:
    close = np.abs(values - targets) <= BOUNDARY_RTOL * np.maximum(1.0, np.abs(targets))
    return np.where(close, targets, values)


def _ratio_mask(log_mu: np.ndarray, log_rho: np.ndarray, n: int) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        lr = log_mu - log_rho
    lr = np.where(np.isneginf(log_mu), -np.inf, lr)
    return _snap(lr, -math.log2(n)) >= -math.log2(n)


def high_ratio_set(mu: ProcessMeasure, rho_prime: ProcessMeasure, n: int,
                   budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Boolean mask over X^n (lexicographic) of {x : mu(x)/rho'(x) >= 1/n}."""
    if n < 1:
        raise InputError("horizon must be >= 1")
    check_budget(mu.alphabet_size, n, budget)
    return _ratio_mask(mu.log_marginals(n), rho_prime.log_marginals(n), n)


@dataclass(frozen=True)
class IntervalPartition:
    """k intervals over [-log2(n)/n, M + 1/n]; interior breakpoints at iM/k.

    The first interval is closed, the others are open on the left and closed
    on the right.
    """

    n: int
    k: int
    M: float

    @property
    def lower(self) -> float:
        return -math.log2(self.n) / self.n

    @property
    def upper(self) -> float:
        return self.M + 1.0 / self.n

    def bounds(self, i: int) -> tuple[float, float]:
        if not 1 <= i <= self.k:
            raise InputError(f"interval index {i} outside 1..{self.k}")
        lo = self.lower if i == 1 else (i - 1) * self.M / self.k
        hi = self.upper if i == self.k else i * self.M / self.k
        return lo, hi

    def contains(self, i: int, v: float) -> bool:
        lo, hi = self.bounds(i)
        return (lo <= v if i == 1 else lo < v) and v <= hi

    def locate(self, v) -> np.ndarray:
        """Interval index (1..k) of each value; 0 where the value falls outside the range."""
        v = np.asarray(v, dtype=float)
        scaled = v * self.k / self.M
        with np.errstate(invalid="ignore"):
            scaled = _snap(scaled, np.round(scaled))
            idx = np.clip(np.ceil(scaled), 1, self.k).astype(np.int64)
            inside = (_snap(v, self.lower) >= self.lower) & (_snap(v, self.upper) <= self.upper)
        return np.where(inside, idx, 0)


def partition_thresholds(n: int, k: int, M: float) -> IntervalPartition:
    if n < 2 or k < 2:
        raise InputError(f"partition needs n >= 2 and k >= 2, got n={n}, k={k}")
    if M <= 0:
        raise InputError("M must be positive")
    return IntervalPartition(n, k, M)


def cell_labels(log_mu: np.ndarray, log_rho_prime: np.ndarray, part: IntervalPartition) -> np.ndarray:
    """Cell index 1..k of every string of X^n, 0 for strings outside the high-ratio set."""
    in_t = _ratio_mask(log_mu, log_rho_prime, part.n)
    with np.errstate(invalid="ignore"):
        v = (log_mu - log_rho_prime) / part.n
    labels = part.locate(np.where(in_t, v, 0.0))
    return np.where(in_t, labels, 0)


@dataclass(frozen=True)
class CoverCell:
    measure: ProcessMeasure
    n: int
    k: int
    i: int
    mask: np.ndarray = field(repr=False)
    mass: float


def cover_cells(mu: ProcessMeasure, rho_prime: ProcessMeasure, n: int, k: int,
                budget: int = DEFAULT_BUDGET) -> list[CoverCell]:
    """The k cells partitioning the high-ratio set of ``mu`` at horizon n."""
    check_budget(mu.alphabet_size, n, budget)
    part = partition_thresholds(n, k, math.log2(mu.alphabet_size))
    log_rho = rho_prime.log_marginals(n)
    labels = cell_labels(mu.log_marginals(n), log_rho, part)
    probs = np.exp2(log_rho)
    cells = []
    for i in range(1, k + 1):
        mask = labels == i
        cells.append(CoverCell(mu, n, k, i, mask, float(probs[mask].sum())))
    return cells


@dataclass(frozen=True)
class GreedyCover:
    """Greedy selection for one (n, k, i).

    ``first_cover[x]`` is the 1-based selection step at which string x was
    first covered (0 if never), so T_l = {x : 1 <= first_cover[x] <= l}.
    """

    n: int
    k: int
    i: int
    selected: tuple[int, ...]
    gains: tuple[float, ...]
    first_cover: np.ndarray = field(repr=False)
    cell_masks: np.ndarray = field(repr=False)
    l_i: float

    def covered(self, l: int) -> np.ndarray:
        return (self.first_cover >= 1) & (self.first_cover <= l)


def _greedy(masks: np.ndarray, probs: np.ndarray) -> tuple[list[int], list[float], np.ndarray]:
    covered = np.zeros(masks.shape[1], dtype=bool)
    first = np.zeros(masks.shape[1], dtype=np.int64)
    selected, gains = [], []
    while True:
        fresh = masks & ~covered
        has_new = fresh.any(axis=1)
        if not has_new.any():
            break
        g = fresh.astype(float) @ probs
        best = g[has_new].max()
        pick = int(np.flatnonzero(has_new & (g >= best * (1 - TIE_RTOL)))[0])
        selected.append(pick)
        gains.append(float(g[pick]))
        first[fresh[pick]] = len(selected)
        covered |= fresh[pick]
    return selected, gains, first


def tail_count(n: int, k: int, i: int, M: float) -> float:
    """l_i = ceil(k n 2^{(iM/k) n + 1}); inf when it overflows a double."""
    exponent = i * M * n / k + 1
    if exponent > 1000:
        return math.inf
    return float(math.ceil(k * n * 2.0**exponent))


def greedy_cover(C: ModelClass, rho_prime: ProcessMeasure, n: int, k: int, i: int,
                 budget: int = DEFAULT_BUDGET) -> GreedyCover:
    """Greedy cover of the level-i cells of all class measures, by reference mass.

    Ties on gain go to the lowest class index.
    """
    check_budget(C.alphabet_size, n, budget)
    part = partition_thresholds(n, k, C.M)
    log_rho = rho_prime.log_marginals(n)
    masks = np.stack([cell_labels(m.log_marginals(n), log_rho, part) == i for m in C])
    return _cover_from_masks(masks, np.exp2(log_rho), n, k, i, C.M)


def _cover_from_masks(masks, probs, n, k, i, M) -> GreedyCover:
    selected, gains, first = _greedy(masks, probs)
    return GreedyCover(n, k, i, tuple(selected), tuple(gains), first, masks, tail_count(n, k, i, M))


def cell_mixture(cover: GreedyCover, C: ModelClass, scheme: WeightScheme | None = None
                 ) -> list[tuple[float, ProcessMeasure, int]]:
    """(w_l, mu_l, l) for every retained selection; empty for an empty cover."""
    w = weight_normalizer() if scheme is None else scheme.normalizer
    return [(weight(l, w), C[idx], l) for l, idx in enumerate(cover.selected, start=1)]


def regularizer(C: ModelClass, N: int, budget: int = DEFAULT_BUDGET) -> DiscretePrior:
    """Probability mixture r = sum_{n<=N} w_n r'_n / sum_{n<=N} w_n.

    r'_n puts mass 1/|A_n| on a maximizer mu_x of mu(x) for every x that some
    class measure can produce; ties go to the lowest class index.
    """
    check_budget(C.alphabet_size, N, budget)
    tables = [m.log_marginal_table(N) for m in C]
    return _regularizer_from_tables(C, tables, N)


def _regularizer_from_tables(C: ModelClass, tables, N: int) -> DiscretePrior:
    w = weight_normalizer()
    horizon_w = [weight(n, w) for n in range(1, N + 1)]
    norm = math.fsum(horizon_w)
    comps = []
    for n in range(1, N + 1):
        logs = np.stack([t[n] for t in tables])
        best = logs.max(axis=0)
        in_a = ~np.isneginf(best)
        argbest = np.argmax(logs, axis=0)[in_a]
        counts = np.bincount(argbest, minlength=len(C))
        size_a = int(in_a.sum())
        for idx in np.flatnonzero(counts):
            comps.append(Component(horizon_w[n - 1] / norm * counts[idx] / size_a, C[idx], f"regularizer(n={n})"))
    return DiscretePrior(comps)


@dataclass
class Construction:
    """Everything built on the way to the prior, kept for auditing."""

    model_class: ModelClass
    rho: ProcessMeasure
    rho_prime: ProcessMeasure
    N: int
    normalizer: float
    ks: dict[int, int]
    covers: dict[tuple[int, int], GreedyCover]
    cover_mass: float
    regularizer: DiscretePrior
    prior: DiscretePrior

    def scale(self, n: int) -> float:
        """Prior mass factor (1/2) w_n w_k / k on each cell mixture at horizon n."""
        k = self.ks[n]
        return 0.5 * weight(n, self.normalizer) * weight(k, self.normalizer) / k


def first_over_budget(size: int, N: int, budget: int) -> int | None:
    for n in range(1, N + 1):
        if size**n > budget:
            return n
    return None


def build_construction(C: ModelClass, rho: ProcessMeasure, N: int, budget: int = DEFAULT_BUDGET,
                       workers: int | None = None) -> Construction:
    if N < 3:
        raise InputError(f"N must be >= 3, got {N}")
    if rho.alphabet_size != C.alphabet_size:
        raise InputError("reference predictor and class use different alphabets")
    bad = first_over_budget(C.alphabet_size, N, budget)
    if bad is not None:
        raise EnumerationBudgetError(bad, C.alphabet_size, budget)

    w = weight_normalizer()
    rho_prime = mix_with_uniform(rho)
    rho_tab = rho_prime.log_marginal_table(N)
    tables = [m.log_marginal_table(N) for m in C]
    ks = {n: k_of_n(n) for n in range(2, N + 1)}

    def horizon_masks(n):
        part = partition_thresholds(n, ks[n], C.M)
        return np.stack([cell_labels(t[n], rho_tab[n], part) for t in tables])

    jobs = []
    for n in range(2, N + 1):
        labels = horizon_masks(n)
        probs = np.exp2(rho_tab[n])
        jobs.extend((n, i, labels == i, probs) for i in range(1, ks[n] + 1))

    def run(job):
        n, i, masks, probs = job
        return _cover_from_masks(masks, probs, n, ks[n], i, C.M)

    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    covers = {(c.n, c.i): c for c in results}

    comps = []
    for (n, i), cover in covers.items():
        k = ks[n]
        scale = 0.5 * weight(n, w) * weight(k, w) / k
        for l, idx in enumerate(cover.selected, start=1):
            comps.append(Component(scale * weight(l, w), C[idx], f"cover(n={n},k={k},i={i},l={l})"))
    cover_mass = math.fsum(c.weight for c in comps)

    reg = _regularizer_from_tables(C, tables, N)
    residual = 1.0 - cover_mass
    comps.extend(Component(residual * c.weight, c.measure, c.provenance) for c in reg.components)
    return Construction(C, rho, rho_prime, N, w, ks, covers, cover_mass, reg, DiscretePrior(comps))


def assemble_prior(C: ModelClass, rho: ProcessMeasure, N: int, budget: int = DEFAULT_BUDGET,
                   workers: int | None = None) -> DiscretePrior:
    return build_construction(C, rho, N, budget, workers).prior
