import copy
import json
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from permflag.certify import (Certificate, CertificateError, NonCertifiableSolution, RationalMatrix,
                              exact_alphas, exact_bound, psd_factor, read_certificate,
                              round_factor, round_solution, verify, write_certificate)
from permflag.perm import enumerate_perms, parse_perm
from permflag.sdp import NumericSolution, assemble, crude_bound

LAMBDA = 2 * math.sqrt(3) - 3


def test_psd_factor_reconstructs():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(6, 3))
    Q = A @ A.T
    L = psd_factor(Q)
    assert np.allclose(L @ L.T, Q, atol=1e-10)
    assert np.allclose(L, np.tril(L))
    assert (np.diag(L) >= 0).all()


def test_psd_factor_zero_and_rejects_indefinite():
    assert not psd_factor(np.zeros((3, 3))).any()
    with pytest.raises(NonCertifiableSolution):
        psd_factor(np.diag([1.0, -0.5]))


def test_round_factor_error_bound():
    rng = np.random.default_rng(7)
    n, k = 8, 20
    A = rng.normal(size=(n, n))
    Q = A @ A.T / n
    L = round_factor(psd_factor(Q), k)
    assert L.is_lower_triangular() and L.has_nonnegative_diagonal()
    err = np.abs(L.gram().to_numpy() - Q).max()
    assert err <= n * 2.0 ** -19


def test_round_solution_shift_is_opt_in():
    Q = np.diag([1.0, -1e-7])
    sol = NumericSolution(0.0, [Q])
    assert round_solution(sol)[1] == 0.0
    assert round_solution(sol, epsilon_shift=1e-8)[1] == 1e-8


def test_eigen_floor_drops_tiny_modes():
    sol = NumericSolution(0.0, [np.diag([1.0, 1e-9])])
    (L,), _ = round_solution(sol, floor=1e-8)
    assert L.rows[1][1] == 0


def known_q_132():
    # the exact Q of the 132 example, mapped onto our flag order 12@1, 12@2, 21@1, 21@2
    lam = Fraction(2 * math.sqrt(3) - 3)
    ref = [[0, 0, 0, 0],
             [0, lam, lam, 3 * (lam - 1) / 2],
             [0, lam, lam, 3 * (lam - 1) / 2],
             [0, 3 * (lam - 1) / 2, 3 * (lam - 1) / 2, 3 * lam]]
    order = [0, 2, 3, 1]
    ours = [[Fraction(0)] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            ours[order[i]][order[j]] = Fraction(ref[i][j])
    return np.array(ours, dtype=float)


def test_alpha_matches_delta_coefficients():
    problem = assemble((1, 3, 2), 3)
    L = round_factor(psd_factor(known_q_132()), 40)
    alphas = dict(zip(problem.admissible, exact_alphas(problem, [L])))
    lam = LAMBDA
    expected = {"123": lam, "132": lam - 1, "213": lam, "231": (5 * lam - 3) / 6,
                "312": (5 * lam - 3) / 6, "321": lam}
    for p, v in expected.items():
        assert float(alphas[parse_perm(p)]) == pytest.approx(v, abs=1e-9)


def test_solver_q_matches_known_optimum(cert132):
    _, sol = cert132
    assert np.abs(sol.q_matrices[0] - known_q_132()).max() < 1e-6


def test_zero_l_gives_crude_bound():
    problem = assemble((1, 3, 2, 4), 4)
    zeros = [RationalMatrix.zeros(t.size) for t in problem.tables]
    bound, _ = exact_bound(problem, zeros)
    assert bound == crude_bound((1, 3, 2, 4), 4)


def test_pipeline_bound_132(cert132):
    cert, sol = cert132
    assert sol.objective_value == pytest.approx(0.4641016, abs=1e-5)
    assert LAMBDA < float(cert.bound) <= LAMBDA + 1e-7
    assert verify(cert).ok


def test_round_trip(cert132, tmp_path):
    cert, _ = cert132
    path = write_certificate(cert, tmp_path / "c.json")
    again = read_certificate(path)
    assert again == cert
    data = json.loads(path.read_text())
    assert "/" in data["bound"]
    assert data["types"][0]["flags"][0] == {"base": "12", "support": [1]}


def test_unknown_fields_warn(cert132, tmp_path):
    cert, _ = cert132
    data = cert.to_json()
    data["comment"] = "hi"
    with pytest.warns(UserWarning, match="comment"):
        again = Certificate.from_json(data)
    assert again == cert


@pytest.mark.parametrize("key, value", [("n", "three"), ("bound", "1/0"), ("pattern", "1224"),
                                        ("l_matrices", [[["x"]]]), ("types", [{"type": "1"}])])
def test_malformed_field_named(cert132, key, value):
    data = cert132[0].to_json()
    data[key] = value
    with pytest.raises(CertificateError) as exc:
        Certificate.from_json(data)
    assert exc.value.field.startswith(key)


def test_missing_field(cert132):
    data = cert132[0].to_json()
    del data["witness"]
    with pytest.raises(CertificateError, match="witness"):
        Certificate.from_json(data)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n "pattern": "132",\n oops\n}')
    with pytest.raises(CertificateError) as exc:
        read_certificate(path)
    assert exc.value.field == "line 3"


def _tamper(cert, how):
    c = copy.deepcopy(cert)
    rows = [list(r) for r in c.l_matrices[0].rows]
    if how == "bound":
        c.bound = c.bound - Fraction(1, 10 ** 6)
    elif how == "diagonal":
        rows[1][1] = Fraction(-1, 2)
    elif how == "upper":
        rows[0][len(rows) - 1] = Fraction(1, 3)
    elif how == "admissible":
        c.admissible = c.admissible[1:]
    elif how == "entry":
        rows[-1][0] += Fraction(1, 2)
    if how in ("diagonal", "upper", "entry"):
        c.l_matrices[0] = RationalMatrix(tuple(tuple(r) for r in rows))
    return c


@pytest.mark.parametrize("how, check", [("bound", "bound"), ("diagonal", "L diagonal non-negative"),
                                        ("upper", "L lower-triangular"),
                                        ("admissible", "admissible permutations"),
                                        ("entry", "bound")])
def test_tampering_detected(cert132, how, check):
    report = verify(_tamper(cert132[0], how))
    assert not report.ok
    assert any(c.name == check and not c.passed for c in report.checks)


def test_wrong_witness_fails(cert132):
    c = copy.deepcopy(cert132[0])
    c.witness = (2, 3, 1)
    assert not verify(c).ok
