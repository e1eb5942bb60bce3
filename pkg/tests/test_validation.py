import numpy as np
import pytest

from irs6d.validation import SUITES, SuiteResult, central_diff, rel_err, run_suite


@pytest.mark.parametrize("name", SUITES)
def test_quick_suites_pass(name):
    res = run_suite(name, quick=True)
    assert res.ok, res.line()
    assert res.passed > 0


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("everything")


def test_suite_result_bookkeeping():
    r = SuiteResult("x")
    r.record(True, 1e-9)
    r.record(False, 0.5)
    assert (r.passed, r.failed, r.worst) == (1, 1, 0.5)
    assert not r.ok and "FAIL" in r.line()


def test_central_diff_polynomial():
    J = central_diff(lambda x: np.array([x[0] ** 2 * x[1], np.sin(x[1])]), np.array([1.5, 0.3]), 1e-6)
    np.testing.assert_allclose(J, [[2 * 1.5 * 0.3, 1.5 ** 2], [0, np.cos(0.3)]], atol=1e-8)
    assert rel_err(np.ones(3), np.ones(3)) == 0.0
