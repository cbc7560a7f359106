"""Acceptance criteria 1-9, each run at its stated tolerance.

Every test prints a single ``C<n>: PASS`` or ``C<n>: FAIL`` line (run with ``-s`` to see them).
Failing criteria are left failing; see the decisions ledger for the blocking analysis.
"""
import warnings

import pytest

from dipolecavity import verification
from dipolecavity.emission import expansion_samples


@pytest.fixture(scope="module")
def samples():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return expansion_samples()


def _report(res):
    print()
    print(res.line())
    assert res.number in verification.CHECKS
    assert res.passed, res.line()


@pytest.mark.parametrize("number", sorted(verification.CHECKS))
def test_criterion(number, request, tmp_path):
    check = verification.CHECKS[number]
    if number in verification.COEFFICIENT_FITS:
        res = check(request.getfixturevalue("samples"))
    elif number == 9:
        res = check(tmp_path)
    else:
        res = check()
    _report(res)
