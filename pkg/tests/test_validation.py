import numpy as np
import pytest

from llhomotopy.functions import BinaryIndicator, ScaledL0
from llhomotopy.validation import (
    FUNCTIONS,
    CheckResult,
    PerturbedFunction,
    check_conjugate_identities,
    check_oracle_chain,
    check_ordering_chain,
    check_prox,
    results_csv,
    run_checks,
)


def test_check_result_pass_rule():
    assert CheckResult("a", 0.5, 1.0).passed
    assert not CheckResult("a", 2.0, 1.0).passed
    assert not CheckResult("a", float("nan"), 1.0).passed


def test_gradient_suite_passes():
    res = run_checks(suites=["gradients"])
    assert res and all(r.passed for r in res), [r for r in res if not r.passed]
    names = {r.name.split("[")[0] for r in res}
    assert names == {"gradient/finite-diff", "lipschitz/quotient"}


def test_unknown_suite():
    with pytest.raises(ValueError, match="unknown suite"):
        run_checks(suites=["nope"])


def test_oracle_chain_on_l0():
    res = check_oracle_chain(FUNCTIONS["l0"], "l0", np.random.default_rng(0), n=200)
    assert res and all(r.passed for r in res)


def test_perturbed_closed_form_is_caught():
    rng = np.random.default_rng(0)
    bad = PerturbedFunction(BinaryIndicator(), 1e-3)
    chain = check_ordering_chain(bad, "binary", rng)
    assert not chain[0].passed
    assert chain[0].name == "chain/closed[binary]"
    oracle = check_oracle_chain(bad, "binary", rng, n=200)
    assert any(not r.passed for r in oracle)


def test_prox_check_and_identities_on_binary():
    assert all(r.passed for r in check_prox(BinaryIndicator(), "binary"))
    assert all(r.passed for r in check_conjugate_identities(ScaledL0(0.5), "l0"))


def test_results_csv_layout():
    text = results_csv([CheckResult("x[f]", 0.1, 1.0, "note")])
    assert text.splitlines() == ["check,deviation,tolerance,passed,detail",
                                 "x[f],0.10000000000000001,1,1,note"]
