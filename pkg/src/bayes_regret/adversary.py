"""Lower-bound construction over point masses on eventually-zero binary sequences.

Against the fair-coin reference every point mass costs exactly n bits by
horizon n, and no Bayes mixture over the class can keep its regret bounded
at every horizon: whatever mass the prior has not yet spent on sequences
that go quiet before position n is spread over 2^n continuations, and the
lightest of them is the witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .loss import cumulative_kl
from .measures import Bernoulli, Dirac, ModelClass, all_strings, build_class, string_index
from .mixture import Component, DiscretePrior

FAIR_COIN = Bernoulli(0.5)


def dirac_class(K: int) -> ModelClass:
    return build_class({"family": "dirac-upto", "K": K})


def u_set(n: int) -> np.ndarray:
    """Length-(n+1) binary strings ending in 1, lexicographic; |U_n| = 2^n."""
    head = all_strings(2, n)
    return np.hstack([head, np.ones((len(head), 1), dtype=np.uint8)])


def minimax_loss_check(n: int, measures=None) -> float:
    """Largest L_n(mu, fair coin) over the given point masses; equals n for every one of them."""
    if n < 1:
        raise InputError("horizon must be >= 1")
    measures = (Dirac(()),) if measures is None else tuple(measures)
    losses = [cumulative_kl(m, FAIR_COIN, n) for m in measures]
    for m, loss in zip(measures, losses):
        if loss != n:
            raise AssertionError(f"L_{n}({m.identity}, fair coin) = {loss!r}, expected {n}")
    return max(losses)


def _check_dirac_prior(prior: DiscretePrior, K: int) -> None:
    for c in prior.components:
        m = c.measure
        if not (isinstance(m, Dirac) and m.tail == 0 and m.alphabet_size == 2 and m.support_length <= K):
            raise InputError(f"component {m.identity} is outside the dirac-upto-{K} class")


@dataclass(frozen=True)
class PriorMassProfile:
    """W[s-1] = prior weight on point masses whose sequence is 0 from position s on."""

    K: int
    W: tuple[float, ...]
    members: tuple[frozenset, ...]

    def at(self, s: int) -> float:
        if s < 1:
            return 0.0
        return self.W[min(s, len(self.W)) - 1]


def mass_profile(prior: DiscretePrior, K: int) -> PriorMassProfile:
    """W_s and M_s for s = 1..K+1."""
    _check_dirac_prior(prior, K)
    W, members = [], []
    for s in range(1, K + 2):
        inside = [c for c in prior.components if c.measure.support_length < s]
        W.append(math.fsum(c.weight for c in inside))
        members.append(frozenset(c.measure.identity for c in inside))
    return PriorMassProfile(K, tuple(W), tuple(members))


def dirac_masses(prior: DiscretePrior, length: int) -> np.ndarray:
    """nu(x) for every binary string of the given length (plain probabilities, lexicographic)."""
    idx = [string_index(c.measure.sequence(length), 2) for c in prior.components]
    return np.bincount(idx, weights=[c.weight for c in prior.components], minlength=2**length)


@dataclass(frozen=True)
class Witness:
    n: int
    prefix: tuple[int, ...]
    measure: Dirac
    W_n: float
    nu_mass: float
    guarantee_bits: float
    regret_bits: float
    actual_regret_bits: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "witness_prefix": "".join(map(str, self.prefix)),
            "W_n": self.W_n,
            "guarantee_bits": self.guarantee_bits,
            "actual_regret_bits": self.actual_regret_bits,
        }


def guarantee(W_n: float) -> float:
    """-log2(1 - W_n) - 1, +inf when the remaining mass is zero."""
    rest = 1.0 - W_n
    return math.inf if rest <= 0 else -math.log2(rest) - 1


def adversarial_witness(prior: DiscretePrior, n: int, K: int) -> Witness:
    """Lightest string of U_n under the prior, and the regret it forces at horizon n+1."""
    if n < 1 or n + 1 > K:
        raise InputError(f"witness horizon needs 1 <= n <= K-1, got n={n}, K={K}")
    _check_dirac_prior(prior, K)
    masses = dirac_masses(prior, n + 1)
    u = u_set(n)
    u_masses = masses[[string_index(x, 2) for x in u]]
    j = int(np.argmin(u_masses))
    x_star = tuple(int(a) for a in u[j])
    mu_star = Dirac(x_star)
    nu_mass = float(u_masses[j])
    regret = math.inf if nu_mass == 0 else -math.log2(nu_mass) - (n + 1)
    actual = cumulative_kl(mu_star, prior, n + 1) - cumulative_kl(mu_star, FAIR_COIN, n + 1)
    W_n = mass_profile(prior, K).at(n)
    return Witness(n, x_star, mu_star, W_n, nu_mass, guarantee(W_n), regret, actual)


def theta_curve(prior: DiscretePrior, K: int) -> list[Witness]:
    return [adversarial_witness(prior, n, K) for n in range(1, K)]


def uniform_dirac_prior(K: int) -> DiscretePrior:
    C = dirac_class(K)
    return DiscretePrior([Component(1.0 / len(C), m, "uniform") for m in C])


def geometric_dirac_prior(K: int, ratio: float = 0.5) -> DiscretePrior:
    """Mass proportional to ratio^j on support length j, split evenly within each length."""
    if not 0 < ratio < 1:
        raise InputError("ratio must lie in (0, 1)")
    C = dirac_class(K)
    group_sizes = {j: (1 if j == 0 else 2 ** (j - 1)) for j in range(K + 1)}
    z = math.fsum(ratio**j for j in range(K + 1))
    return DiscretePrior([
        Component(ratio**m.support_length / z / group_sizes[m.support_length], m, f"geometric(j={m.support_length})")
        for m in C
    ])


def single_delta_prior(prefix=()) -> DiscretePrior:
    return DiscretePrior([Component(1.0, Dirac(tuple(prefix)), "single")])
