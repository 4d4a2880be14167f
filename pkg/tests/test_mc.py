import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldzeta.errors import BudgetError, ConfigError, DomainError, InfeasibleError, LdzetaError, PrecisionError
from ldzeta.mc import TailEstimate, block_rng, mean_and_se, run_blocks


def _normals(rng, count, scale):
    return {"x": rng.normal(0, scale, count), "u": rng.uniform(size=(count, 2))}


def test_block_streams_differ():
    a = block_rng(1, 1, 0).uniform(size=4)
    assert not np.array_equal(a, block_rng(1, 2, 0).uniform(size=4))
    assert not np.array_equal(a, block_rng(1, 1, 1).uniform(size=4))
    assert np.array_equal(a, block_rng(1, 1, 0).uniform(size=4))


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 9000), block=st.sampled_from([7, 100, 4096]))
def test_sample_index_stable_under_prefix(n, block):
    # the first n samples do not depend on how many more are drawn
    short = run_blocks(_normals, n, 5, 3, (2.0,), block_size=block)
    long = run_blocks(_normals, n + 500, 5, 3, (2.0,), block_size=block)
    assert np.array_equal(short["x"], long["x"][:n])
    assert short["u"].shape == (n, 2)


def test_worker_count_invariance():
    one = run_blocks(_normals, 10_000, 9, 3, (1.0,), workers=1)
    two = run_blocks(_normals, 10_000, 9, 3, (1.0,), workers=2)
    assert all(np.array_equal(one[k], two[k]) for k in one)


def test_nonpositive_n():
    with pytest.raises(ValueError):
        run_blocks(_normals, 0, 1, 1, (1.0,))


def test_mean_and_se():
    m, se = mean_and_se(np.array([1.0, 2.0, 3.0, 4.0]))
    assert m == 2.5 and se == pytest.approx(math.sqrt(np.var([1, 2, 3, 4], ddof=1) / 4))


def test_tail_estimate_invariants():
    ind = np.zeros(1000, dtype=bool)
    ind[:37] = True
    est = TailEstimate.from_indicator(ind, prediction=0.05)
    assert est.p_hat == est.hits / est.n == 0.037
    assert est.std_err == pytest.approx(math.sqrt(0.037 * 0.963 / 1000))
    assert est.ratio == pytest.approx(0.74)
    assert est.to_dict()["hits"] == 37


def test_exit_code_mapping():
    assert ConfigError.exit_code == DomainError.exit_code == 2
    assert InfeasibleError.exit_code == 3
    assert BudgetError.exit_code == PrecisionError.exit_code == 4
    assert issubclass(DomainError, LdzetaError)
