"""Explicit regret bound and its exhaustive verification for every class measure and horizon."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import InputError
from .loss import DEFAULT_BUDGET, kl_from_logs
from .measures import ModelClass, ProcessMeasure
from .mixture import DiscretePrior
from .prior import build_construction, default_workers, k_of_n, mix_with_uniform, weight, weight_normalizer

CSV_COLUMNS = (
    "measure_id",
    "n",
    "loss_nu_bits",
    "loss_rho_bits",
    "loss_rho_prime_bits",
    "bound_rhs_bits",
    "margin_bits",
    "pass",
)


@dataclass(frozen=True)
class BoundConstants:
    n: int
    k: int
    M: float
    w: float
    w_n: float
    log2_B_n: float

    @property
    def B_n(self) -> float:
        return 2.0**self.log2_B_n


def bound_constants(n: int, M: float) -> BoundConstants:
    """Constants of the bound at horizon n; B_n is kept in log2 form since it underflows fast."""
    if n < 3:
        raise InputError(f"the bound is stated for n >= 3, got {n}")
    k = k_of_n(n)
    w = weight_normalizer()
    log2_B = (
        3 * math.log2(w)
        - 2
        - 2 * math.log2(M + 1)
        - 5 * math.log2(n)
        - 3 * math.log2(k)
        - 2 * math.log2(math.log2(n))
        - 2 * math.log2(math.log2(k))
    )
    return BoundConstants(n, k, M, w, weight(n, w), log2_B)


def bound_rhs(n: int, M: float) -> float:
    """Mn/k - log2 B_n + 4M - (2/n)(log2 w_n - 1) + 1/2, in bits."""
    c = bound_constants(n, M)
    return M * n / c.k - c.log2_B_n + 4 * M - (2.0 / n) * (math.log2(c.w_n) - 1) + 0.5


@dataclass(frozen=True)
class RegretReport:
    measure_id: str
    n: int
    loss_nu: float
    loss_rho: float
    loss_rho_prime: float
    bound_rhs: float

    @property
    def margin_tight(self) -> float:
        """Slack against the uniform-mixed reference."""
        return self.loss_rho_prime + self.bound_rhs - self.loss_nu

    @property
    def margin_original(self) -> float:
        """Slack against the original reference, with one extra bit."""
        return self.loss_rho + self.bound_rhs + 1 - self.loss_nu

    @property
    def margin(self) -> float:
        return min(self.margin_tight, self.margin_original)

    @property
    def passed(self) -> bool:
        return self.margin_tight >= 0 and self.margin_original >= 0

    def row(self) -> list[str]:
        return [
            self.measure_id,
            str(self.n),
            repr(self.loss_nu),
            repr(self.loss_rho),
            repr(self.loss_rho_prime),
            repr(self.bound_rhs),
            repr(self.margin),
            "true" if self.passed else "false",
        ]


def verify_theorem1(C: ModelClass, rho: ProcessMeasure, N: int, prior: DiscretePrior | None = None,
                    budget: int = DEFAULT_BUDGET, workers: int | None = None) -> list[RegretReport]:
    """One report per (mu, n) for mu in C and 3 <= n <= N, in class order then horizon order."""
    if prior is None:
        prior = build_construction(C, rho, N, budget, workers).prior
    if N < 3:
        raise InputError(f"N must be >= 3, got {N}")
    rho_prime = mix_with_uniform(rho)
    M = C.M
    horizons = range(3, N + 1)
    nu_tab = prior.log_marginal_table(N)
    rho_tab = rho.log_marginal_table(N)
    rp_tab = rho_prime.log_marginal_table(N)
    rhs = {n: bound_rhs(n, M) for n in horizons}

    def check(mu):
        tab = mu.log_marginal_table(N)
        return [
            RegretReport(
                mu.identity,
                n,
                kl_from_logs(tab[n], nu_tab[n]),
                kl_from_logs(tab[n], rho_tab[n]),
                kl_from_logs(tab[n], rp_tab[n]),
                rhs[n],
            )
            for n in horizons
        ]

    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_measure = list(pool.map(check, C.measures))
    else:
        per_measure = [check(mu) for mu in C]
    return [r for rows in per_measure for r in rows]


def reports_to_csv(reports: list[RegretReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()
