"""Expected cumulative KL divergence (log-loss regret) between two measures.

All values are in bits. Exact values come from enumerating X^n; ``mc_loss``
is the sampling fallback for horizons past the enumeration budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EnumerationBudgetError, InputError, UndefinedConditionalError
from .measures import NEG_INF, ProcessMeasure, all_strings, as_symbols, string_index
from .mixture import DiscretePrior

DEFAULT_BUDGET = 2**24


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    sample_count: int
    seed: int | None = None

    @property
    def infinite(self) -> bool:
        return self.mean == math.inf


def check_budget(size: int, n: int, budget: int = DEFAULT_BUDGET) -> None:
    if size**n > budget:
        raise EnumerationBudgetError(n, size, budget)


def kl_from_logs(log_mu: np.ndarray, log_rho: np.ndarray) -> float:
    """sum mu log2(mu/rho) over the given entries, with 0 log 0 = 0 and mu>0, rho=0 -> inf."""
    live = ~np.isneginf(log_mu)
    if np.any(np.isneginf(log_rho[live])):
        return math.inf
    lm = log_mu[live]
    return float(np.sum(np.exp2(lm) * (lm - log_rho[live])))


def cumulative_kl(mu: ProcessMeasure, rho: ProcessMeasure, n: int, budget: int = DEFAULT_BUDGET) -> float:
    """L_n(mu, rho) = sum over x in X^n of mu(x) log2(mu(x)/rho(x))."""
    if n < 1:
        raise InputError("horizon must be >= 1")
    check_budget(mu.alphabet_size, n, budget)
    return kl_from_logs(mu.log_marginals(n), rho.log_marginals(n))


def cumulative_kl_conditional(mu: ProcessMeasure, rho: ProcessMeasure, n: int,
                              budget: int = DEFAULT_BUDGET) -> float:
    """Same quantity as the mu-expected sum over t = 1..n of next-symbol KL divergences."""
    if n < 1:
        raise InputError("horizon must be >= 1")
    size = mu.alphabet_size
    check_budget(size, n, budget)
    total = 0.0
    log_prefix = np.zeros(1)
    for t in range(n):
        prefixes = all_strings(size, t)
        cm, cr = mu.log_cond(prefixes), rho.log_cond(prefixes)
        live = ~np.isneginf(log_prefix)
        cm, cr, w = cm[live], cr[live], np.exp2(log_prefix[live])
        pos = ~np.isneginf(cm)
        if np.any(pos & np.isneginf(cr)):
            return math.inf
        with np.errstate(invalid="ignore"):
            terms = np.where(pos, np.exp2(cm) * (cm - np.where(pos, cr, 0.0)), 0.0).sum(axis=1)
        total += float(np.sum(w * terms))
        log_prefix = (log_prefix[:, None] + mu.log_cond(prefixes)).reshape(-1)
    return total


def restricted_kl(mu: ProcessMeasure, rho: ProcessMeasure, n: int, A: Iterable,
                  budget: int = DEFAULT_BUDGET) -> float:
    """L_n restricted to A: sum over x in A of mu(x) log2(mu(x)/rho(x)); may be negative.

    ``A`` is either a boolean mask over X^n (lexicographic order) or an
    iterable of strings of length n.
    """
    size = mu.alphabet_size
    check_budget(size, n, budget)
    mask = as_mask(A, size, n)
    return kl_from_logs(mu.log_marginals(n)[mask], rho.log_marginals(n)[mask])


def as_mask(A, size: int, n: int) -> np.ndarray:
    """Boolean mask over X^n from a mask or a collection of length-n strings."""
    if isinstance(A, np.ndarray) and A.dtype == bool:
        if A.shape != (size**n,):
            raise InputError(f"mask has shape {A.shape}, expected ({size**n},)")
        return A
    mask = np.zeros(size**n, dtype=bool)
    for x in A:
        syms = as_symbols(x, size)
        if len(syms) != n:
            raise InputError(f"string {x!r} has length {len(syms)}, expected {n}")
        mask[string_index(syms, size)] = True
    return mask


def mc_loss(mu: ProcessMeasure, rho: ProcessMeasure, n: int, samples: int, seed: int,
            batch: int = 20000) -> MCEstimate:
    """Monte Carlo estimate of L_n(mu, rho) from samples x ~ mu of log2(mu(x)/rho(x))."""
    if samples < 2:
        raise InputError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    ratios = []
    for start in range(0, samples, batch):
        xs = mu.sample_block(n, min(batch, samples - start), rng)
        lm, lr = mu.log_prob_block(xs), rho.log_prob_block(xs)
        if np.any(np.isneginf(lr)):
            return MCEstimate(math.inf, math.inf, samples, seed)
        ratios.append(lm - lr)
    r = np.concatenate(ratios)
    return MCEstimate(float(r.mean()), float(r.std(ddof=1) / math.sqrt(samples)), samples, seed)


def predict_next(prior: ProcessMeasure, prefix) -> np.ndarray:
    """Posterior predictive distribution of the next symbol (probabilities, not logs)."""
    syms = as_symbols(prefix, prior.alphabet_size)
    block = np.array([syms], dtype=np.uint8).reshape(1, len(syms))
    if isinstance(prior, DiscretePrior):
        joint = prior.component_log_probs(block)[:, 0]
        if np.all(np.isneginf(joint)):
            raise UndefinedConditionalError(f"prefix {syms} has probability zero under the mixture")
        post = np.exp2(joint - np.max(joint))
        post /= post.sum()
        conds = np.stack([np.exp2(m.log_cond(block)[0]) for m in prior.measures])
        out = post @ conds
    else:
        if prior.log_prob_block(block)[0] == NEG_INF:
            raise UndefinedConditionalError(f"prefix {syms} has probability zero")
        out = np.exp2(prior.log_cond(block)[0])
    return out / out.sum()
