import pytest

from specbandit import analytics
from specbandit.verify import CHECKS, run_checks


def test_fast_checks_pass():
    results = run_checks(["expected_nacc", "var_nacc", "bd_condition_interval", "bd_signal_bound", "objective_mismatch"])
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]


def test_sign_flip_in_variance_is_caught(monkeypatch):
    good = analytics.var_nacc

    def broken(alpha, n):
        # flip the sign of one term of the closed form
        if alpha in (0.0, 1.0):
            return 0.0
        poly = 1 + (2 * n + 1) * alpha**n + (2 * n + 1) * alpha ** (n + 1) - alpha ** (2 * n + 1)
        return alpha / (1 - alpha) ** 2 * poly

    monkeypatch.setattr(analytics, "var_nacc", broken)
    failed = {r.name for r in run_checks(["var_nacc", "expected_nacc"]) if not r.passed}
    assert failed == {"var_nacc"}
    monkeypatch.setattr(analytics, "var_nacc", good)
    assert run_checks(["var_nacc"])[0].passed


def test_unknown_check():
    with pytest.raises(KeyError, match="unknown checks"):
        run_checks(["nope"])


def test_crash_is_a_failure(monkeypatch):
    def boom():
        raise RuntimeError("bad")

    monkeypatch.setitem(CHECKS, "lossless", boom)
    res = run_checks(["lossless"])[0]
    assert not res.passed and "RuntimeError" in res.detail
