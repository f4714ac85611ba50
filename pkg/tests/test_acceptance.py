"""Acceptance criteria, one test each; every test records a PASS/FAIL line before asserting."""

import math
import time

import numpy as np
import pytest

from bayes_regret.adversary import (
    adversarial_witness,
    dirac_masses,
    geometric_dirac_prior,
    mass_profile,
    single_delta_prior,
    u_set,
    uniform_dirac_prior,
)
from bayes_regret.bounds import bound_constants, verify_theorem1
from bayes_regret.loss import cumulative_kl, mc_loss, predict_next, restricted_kl
from bayes_regret.measures import Bernoulli, Dirac, Markov, all_strings, string_index
from bayes_regret.prior import build_construction, high_ratio_set, mix_with_uniform, weight

from conftest import ACCEPTANCE_LINES

N = 12
RHO = Bernoulli(0.5)
CLASSES = ("mixed_class", "dirac3_class")


def record(num, text, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {num}. {text}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def built(mixed_class, dirac3_class):
    out = {}
    for name, C in (("mixed_class", mixed_class), ("dirac3_class", dirac3_class)):
        t0 = time.perf_counter()
        con = build_construction(C, RHO, N)
        out[name] = (con, time.perf_counter() - t0)
    return out


def test_c01_bound_mixed_class(mixed_class):
    t0 = time.perf_counter()
    reports = verify_theorem1(mixed_class, RHO, N)
    elapsed = time.perf_counter() - t0
    fails = [r for r in reports if not r.loss_nu - r.loss_rho <= r.bound_rhs + 1 or not r.passed]
    ok = len(mixed_class) == 13 and len(reports) == 13 * 10 and not fails and elapsed <= 300
    assert record(1, "regret bound, 13-measure Bernoulli+Markov class, 3<=n<=12", ok,
                  f"{len(fails)} failures of {len(reports)}, min margin {min(r.margin for r in reports):.3f} bits, "
                  f"{elapsed:.2f}s")


def test_c02_bound_dirac_class(dirac3_class):
    reports = verify_theorem1(dirac3_class, RHO, N)
    exact_n = all(r.loss_rho == r.n for r in reports)
    fails = [r for r in reports if not r.passed]
    assert record(2, "regret bound, dirac-upto-3 class, L_n(mu,rho) = n", len(dirac3_class) == 8 and exact_n and not fails,
                  f"{len(fails)} failures of {len(reports)}, min margin {min(r.margin for r in reports):.3f} bits")


@pytest.mark.parametrize("cls", CLASSES)
def test_c03_markov_tail(cls, request):
    C = request.getfixturevalue(cls)
    rho_prime = mix_with_uniform(RHO)
    worst = -math.inf
    for mu in C:
        for n in range(1, N + 1):
            outside = ~high_ratio_set(mu, rho_prime, n)
            mass = float(np.exp2(mu.log_marginals(n))[outside].sum())
            worst = max(worst, mass - 1 / n)
    assert record(3, f"mu(X^n minus T^n_mu) <= 1/n, {cls}", worst <= 0, f"max excess {worst:.3g}")


@pytest.mark.parametrize("cls", CLASSES)
def test_c04_greedy_tail(cls, built):
    con, _ = built[cls]
    probs = {n: np.exp2(con.rho_prime.log_marginals(n)) for n in range(2, 11)}
    worst, checked = -math.inf, 0
    for (n, i), cover in con.covers.items():
        if n > 10:
            continue
        for l in range(1, len(cover.selected) + 2):
            rest = cover.cell_masks & ~cover.covered(l)
            mass = rest.astype(float) @ probs[n]
            worst = max(worst, float(mass.max()) - 1 / l)
            checked += 1
    assert record(4, f"greedy tail rho'(T^n_mu,k,i minus T_l) <= 1/l, {cls}", worst <= 1e-15,
                  f"{checked} (n,i,l) checks, max excess {worst:.3g}")


@pytest.mark.parametrize("cls", CLASSES)
def test_c05_domination_chain(cls, built):
    con, _ = built[cls]
    nu = con.prior
    worst = -math.inf
    for n in range(3, 11):
        c = bound_constants(n, con.model_class.M)
        log_nu = nu.log_marginals(n)
        log_rp = con.rho_prime.log_marginals(n)
        floor = c.log2_B_n - c.M * n / c.k + log_rp
        for i in range(1, c.k + 1):
            cover = con.covers[(n, i)]
            covered = cover.covered(int(min(cover.l_i, len(cover.selected))))
            if covered.any():
                worst = max(worst, float(np.max(floor[covered] - log_nu[covered])))
    assert record(5, f"nu(x) >= B_n 2^(-Mn/k) rho'(x) on covered strings, {cls}", worst <= 1e-9,
                  f"max log2 excess {worst:.3f}")


@pytest.mark.parametrize("cls", CLASSES)
def test_c06_probability_measure(cls, built):
    nu = built[cls][0].prior
    sums = [float(np.exp2(t).sum()) for t in nu.log_marginal_table(N)[1:]]
    sum_err = max(abs(s - 1) for s in sums)
    chain_err = 0.0
    rng = np.random.default_rng(7)
    strings = [tuple(x) for x in all_strings(2, 7)] + [tuple(rng.integers(0, 2, N)) for _ in range(50)]
    for x in strings:
        logp = 0.0
        for t in range(len(x)):
            p = predict_next(nu, x[:t])[x[t]]
            if p == 0:
                logp = -math.inf
                break
            logp += math.log2(p)
        target = nu.log_marginals(len(x))[string_index(x, 2)]
        err = 0.0 if logp == target == -math.inf else abs(logp - target)
        chain_err = max(chain_err, err)
    ok = sum_err <= 1e-9 and chain_err <= 1e-9
    assert record(6, f"nu sums to 1 and chain rule matches marginals, {cls}", ok,
                  f"sum err {sum_err:.2g}, chain err {chain_err:.2g}")


@pytest.mark.parametrize("cls", CLASSES)
def test_c07_regularizer(cls, built):
    con, _ = built[cls]
    nu_tab = con.prior.log_marginal_table(N)
    M = con.model_class.M
    worst = -math.inf
    for mu in con.model_class:
        tab = mu.log_marginal_table(N)
        for n in range(1, N + 1):
            pos = ~np.isneginf(tab[n])
            excess = tab[n][pos] - nu_tab[n][pos] - (n * M - math.log2(weight(n)) + 1)
            worst = max(worst, float(excess.max()))
    assert record(7, f"log2(mu/nu) <= nM - log2 w_n + 1, {cls}", worst <= 1e-9, f"max excess {worst:.3f} bits")


@pytest.mark.parametrize("cls", CLASSES)
def test_c08_delta_mixing(cls, request):
    C = request.getfixturevalue(cls)
    rho_prime = mix_with_uniform(RHO)
    tab = rho_prime.log_marginal_table(N)
    point = max(float(np.max(-tab[n] - (n * C.M + 1))) for n in range(1, N + 1))
    loss = max(cumulative_kl(mu, rho_prime, n) - cumulative_kl(mu, RHO, n) - 1 for mu in C for n in range(1, N + 1))
    assert record(8, f"-log2 rho'(x) <= nM + 1 and L_n(mu,rho') <= L_n(mu,rho) + 1, {cls}",
                  point <= 1e-12 and loss <= 1e-12, f"max pointwise excess {point:.3f}, max loss excess {loss:.3f}")


def test_c09_lower_bound():
    K = 10
    priors = {"uniform": uniform_dirac_prior(K), "geometric": geometric_dirac_prior(K), "single": single_delta_prior()}
    floor_ok = pigeon_ok = True
    curves = {}
    for name, prior in priors.items():
        prof = mass_profile(prior, K)
        curves[name] = []
        for n in range(1, K):
            w = adversarial_witness(prior, n, K)
            curves[name].append(w.regret_bits)
            floor_ok &= w.regret_bits >= w.guarantee_bits - 1e-9
            masses = dirac_masses(prior, n + 1)
            u = u_set(n)
            pigeon_ok &= len(u) == 2**n
            pigeon_ok &= masses[[string_index(x, 2) for x in u]].min() <= 2.0**-n * (1 - prof.at(n)) + 1e-15
    uniform_exceeds = max(curves["uniform"]) > 5
    single_inf = curves["single"][0] == math.inf
    ok = floor_ok and pigeon_ok and uniform_exceeds and single_inf
    detail = (f"floor {floor_ok}, pigeonhole {pigeon_ok}, uniform max {max(curves['uniform']):.3f} bits, "
              f"geometric max {max(curves['geometric']):.3f} bits, single n=1 {curves['single'][0]}")
    assert record(9, "lower-bound witnesses over dirac-upto-10", ok, detail)


def test_c10_monte_carlo():
    exact = cumulative_kl(Bernoulli(0.7), Bernoulli(0.5), 10)
    est = mc_loss(Bernoulli(0.7), Bernoulli(0.5), 10, samples=100_000, seed=42)
    dirac = mc_loss(Dirac(()), Bernoulli(0.5), 20, samples=100_000, seed=42)
    ok = abs(est.mean - exact) <= 3 * est.std_error and dirac.mean == cumulative_kl(Dirac(()), Bernoulli(0.5), 20) == 20
    assert record(10, "Monte Carlo loss matches exact enumeration", ok,
                  f"|diff| {abs(est.mean - exact):.4f} vs 3se {3 * est.std_error:.4f}, dirac {dirac.mean}")


def test_c11_jensen_instance():
    rng = np.random.default_rng(2024)
    worst = -math.inf
    for _ in range(100):
        n = int(rng.integers(1, 9))
        mu = Markov.binary(rng.uniform(0.05, 0.95, 2))
        rho = Bernoulli(float(rng.uniform(0.05, 0.95)))
        mask = rng.random(2**n) < rng.uniform(0.1, 0.9)
        mu_a = float(np.exp2(mu.log_marginals(n))[mask].sum())
        rho_a = float(np.exp2(rho.log_marginals(n))[mask].sum())
        base = mu_a * math.log2(rho_a) if mu_a > 0 else 0.0
        worst = max(worst, -restricted_kl(mu, rho, n, mask) - base - 0.5)
    assert record(11, "-L_n|_A(mu,rho) <= mu(A) log2 rho(A) + 1/2 on 100 random triples", worst <= 1e-12,
                  f"max excess {worst:.4f} bits")
