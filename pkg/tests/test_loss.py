import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayes_regret.errors import EnumerationBudgetError, InputError, UndefinedConditionalError
from bayes_regret.loss import (
    cumulative_kl,
    cumulative_kl_conditional,
    mc_loss,
    predict_next,
    restricted_kl,
)
from bayes_regret.measures import Bernoulli, Dirac, IID, Markov, all_strings
from bayes_regret.mixture import DiscretePrior

from conftest import brute_kl

# 4 * (0.7 log2 1.4 + 0.3 log2 0.6), evaluated by hand
KL_07_05_PER_STEP = 0.7 * math.log2(1.4) + 0.3 * math.log2(0.6)

pq = st.floats(0.05, 0.95)


@st.composite
def binary_pair(draw):
    def one():
        if draw(st.booleans()):
            return Bernoulli(draw(pq))
        return Markov.binary([draw(pq), draw(pq)])

    return one(), one()


def test_identity_is_zero(mixed_class):
    for m in mixed_class:
        assert cumulative_kl(m, m, 6) == 0.0


def test_dirac_against_fair_coin_is_n():
    for x in [(), (1,), (1, 0, 1)]:
        for n in (1, 5, 9):
            assert cumulative_kl(Dirac(x), Bernoulli(0.5), n) == n


def test_bernoulli_pair_value():
    value = cumulative_kl(Bernoulli(0.7), Bernoulli(0.5), 4)
    assert value == pytest.approx(4 * KL_07_05_PER_STEP, abs=1e-12)
    assert value == pytest.approx(0.4748, abs=5e-5)
    assert brute_kl(Bernoulli(0.7), Bernoulli(0.5), 4) == pytest.approx(value, abs=1e-12)
    assert cumulative_kl_conditional(Bernoulli(0.7), Bernoulli(0.5), 4) == pytest.approx(value, abs=1e-12)


def test_infinite_when_support_missing():
    assert cumulative_kl(Bernoulli(0.5), Dirac(()), 3) == math.inf
    assert cumulative_kl_conditional(Bernoulli(0.5), Dirac(()), 3) == math.inf
    assert cumulative_kl(Dirac(()), Bernoulli(0.5), 3) == 3


def test_budget_error():
    with pytest.raises(EnumerationBudgetError) as info:
        cumulative_kl(Bernoulli(0.5), Bernoulli(0.4), 11, budget=1024)
    assert info.value.n == 11


@settings(max_examples=30, deadline=None)
@given(binary_pair(), st.integers(1, 10))
def test_forms_agree_and_nonnegative(pair, n):
    mu, rho = pair
    a = cumulative_kl(mu, rho, n)
    b = cumulative_kl_conditional(mu, rho, n)
    assert a == pytest.approx(b, abs=1e-9)
    assert a >= -1e-12


@settings(max_examples=20, deadline=None)
@given(binary_pair())
def test_monotone_in_horizon(pair):
    mu, rho = pair
    values = [cumulative_kl(mu, rho, n) for n in range(1, 11)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


@settings(max_examples=30, deadline=None)
@given(binary_pair(), st.integers(1, 8), st.data())
def test_restricted_additivity(pair, n, data):
    mu, rho = pair
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=2**n, max_size=2**n)))
    total = restricted_kl(mu, rho, n, mask) + restricted_kl(mu, rho, n, ~mask)
    assert total == pytest.approx(cumulative_kl(mu, rho, n), abs=1e-9)


def test_restricted_examples():
    mu, rho = Bernoulli(0.3), Bernoulli(0.6)
    everything = ["".join(map(str, x)) for x in itertools.product([0, 1], repeat=3)]
    assert restricted_kl(mu, rho, 3, everything) == pytest.approx(cumulative_kl(mu, rho, 3), abs=1e-12)
    assert restricted_kl(mu, rho, 3, []) == 0.0
    assert restricted_kl(Bernoulli(0.9), Bernoulli(0.1), 1, ["0"]) < 0
    with pytest.raises(InputError):
        restricted_kl(mu, rho, 3, ["01"])


def _jensen_sides(mu, rho, n, mask):
    lhs = -restricted_kl(mu, rho, n, mask)
    mu_a = float(np.exp2(mu.log_marginals(n))[mask].sum())
    rho_a = float(np.exp2(rho.log_marginals(n))[mask].sum())
    return lhs, mu_a * math.log2(rho_a) if mu_a > 0 else 0.0


def test_jensen_lemma_random_instances():
    bits_constant = math.log2(math.e) / math.e
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        mu = Markov.binary(rng.uniform(0.05, 0.95, 2))
        rho = Bernoulli(float(rng.uniform(0.05, 0.95)))
        mask = rng.random(2**n) < rng.uniform(0.1, 0.9)
        lhs, base = _jensen_sides(mu, rho, n, mask)
        assert lhs <= base + bits_constant + 1e-12
        # natural-log form: constant 1/e < 1/2
        assert lhs * math.log(2) <= base * math.log(2) + 0.5


def test_jensen_constant_in_bits():
    # with base-2 logs the tight additive constant is max_p -p log2 p = log2(e)/e, slightly above 1/2
    p = 1 / math.e
    mu, rho = Bernoulli(p), Bernoulli(0.5)
    mask = np.array([False, True])
    lhs, base = _jensen_sides(mu, rho, 1, mask)
    assert lhs > base + 0.5
    assert lhs <= base + math.log2(math.e) / math.e + 1e-12


def test_mc_identical_measures():
    est = mc_loss(Bernoulli(0.3), Bernoulli(0.3), 10, samples=1000, seed=1)
    assert abs(est.mean) <= 3 * est.std_error + 1e-12


def test_mc_dirac_exact():
    est = mc_loss(Dirac(()), Bernoulli(0.5), 20, samples=100, seed=5)
    assert est.mean == 20.0
    assert est.std_error == 0.0


def test_mc_matches_exact():
    exact = cumulative_kl(Bernoulli(0.7), Bernoulli(0.5), 10)
    assert exact == pytest.approx(1.1871, abs=5e-5)
    est = mc_loss(Bernoulli(0.7), Bernoulli(0.5), 10, samples=100_000, seed=42)
    assert abs(est.mean - exact) <= 3 * est.std_error


def test_mc_flags_infinite():
    est = mc_loss(Bernoulli(0.5), Dirac(()), 5, samples=10, seed=0)
    assert est.infinite


def test_mc_deterministic():
    a = mc_loss(Markov.binary([0.3, 0.6]), Bernoulli(0.5), 8, samples=500, seed=9)
    b = mc_loss(Markov.binary([0.3, 0.6]), Bernoulli(0.5), 8, samples=500, seed=9)
    assert a == b


def test_predict_next_examples():
    single = DiscretePrior.of([(1.0, Markov.binary([0.2, 0.7]))])
    assert predict_next(single, "01") == pytest.approx([0.3, 0.7])
    two = DiscretePrior.of([(0.5, Dirac(())), (0.5, Dirac((1,)))])
    assert predict_next(two, "") == pytest.approx([0.5, 0.5])
    assert predict_next(two, "1") == pytest.approx([1.0, 0.0])
    with pytest.raises(UndefinedConditionalError):
        predict_next(two, "11")
    assert predict_next(IID((0.2, 0.3, 0.5)), "2") == pytest.approx([0.2, 0.3, 0.5])


def test_predict_next_chain_rule(grid_class):
    prior = DiscretePrior.of([(1 / len(grid_class), m) for m in grid_class])
    table = prior.log_marginals(6)
    for j, x in enumerate(all_strings(2, 6)):
        logp = sum(math.log2(predict_next(prior, x[:t])[x[t]]) for t in range(6))
        assert logp == pytest.approx(table[j], abs=1e-9)
