"""
Tests for the randomized check suites.
"""

from src.checks import THEORY_SUITES, run_prox_suites, run_theory_suites


def test_theory_suites_pass():
    """Test that every inequality suite reports zero violations."""
    results = run_theory_suites(trials=50, seed=1)
    assert [r.name for r in results] == [name for name, _ in THEORY_SUITES]
    for r in results:
        assert r.trials == 50
        assert r.passed, f"{r.name} violated with slack {r.worst_slack}"


def test_theory_suites_are_seeded():
    """Test that the same seed reproduces the same worst slacks."""
    a = run_theory_suites(trials=10, seed=4)
    b = run_theory_suites(trials=10, seed=4)
    assert [r.worst_slack for r in a] == [r.worst_slack for r in b]


def test_prox_suites_pass():
    """Test the prox optimality and gradient suites at small trial counts."""
    results = run_prox_suites(trials=5, seed=0, gradient_trials=3)
    assert [r.name for r in results] == ["prox-nuclear", "huber-gradient"]
    assert all(r.passed for r in results)
