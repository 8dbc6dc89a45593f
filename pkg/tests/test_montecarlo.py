"""Monte Carlo determinism and statistical sanity."""

import pytest

from quadwalk import validate_steps
from quadwalk.dp import ExitSpec, survival_prob
from quadwalk.errors import InputError
from quadwalk.montecarlo import simulate_survival


@pytest.fixture(scope="module")
def tilted():
    return validate_steps([((1, -1), 2.0), ((1, 1), 1.0), ((-1, 1), 1.0)])


def test_one_step_matches_enumeration(tilted):
    est = simulate_survival(tilted, (1, 1), 1, 10 ** 6, seed=20240801)
    assert abs(est.mean - 0.25) <= est.half_width_95


def test_same_seed_bit_identical(tilted):
    a = simulate_survival(tilted, (1, 1), 50, 200_000, seed=7)
    b = simulate_survival(tilted, (1, 1), 50, 200_000, seed=7)
    assert a == b


def test_worker_count_invariance(tilted):
    ref = simulate_survival(tilted, (1, 1), 50, 200_000, seed=99, workers=1)
    for workers in (2, 3, 8):
        est = simulate_survival(tilted, (1, 1), 50, 200_000, seed=99,
                                workers=workers)
        assert est.mean == ref.mean  # bit identical

def test_different_seeds_differ(tilted):
    a = simulate_survival(tilted, (1, 1), 50, 100_000, seed=1)
    b = simulate_survival(tilted, (1, 1), 50, 100_000, seed=2)
    assert a.mean != b.mean


def test_n_zero_exact(tilted):
    est = simulate_survival(tilted, (1, 1), 0, 1234, seed=5)
    assert est.mean == 1.0
    assert est.half_width_95 == 0.0


def test_reps_must_be_positive(tilted):
    with pytest.raises(InputError):
        simulate_survival(tilted, (1, 1), 5, 0, seed=1)


def test_ci_interval_fields(tilted):
    est = simulate_survival(tilted, (1, 1), 20, 50_000, seed=11)
    assert est.low <= est.mean <= est.high
    assert est.reps == 50_000 and est.seed == 11


def test_quick_coverage(tilted):
    # a 25-seed preview of the acceptance coverage check
    truth, _ = survival_prob(tilted, (1, 1), 100, ExitSpec())
    hits = 0
    for seed in range(25):
        est = simulate_survival(tilted, (1, 1), 100, 100_000, seed=seed)
        if est.low <= truth <= est.high:
            hits += 1
    assert hits >= 21
