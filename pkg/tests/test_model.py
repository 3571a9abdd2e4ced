import numpy as np
import pytest

from stochsym import io
from stochsym.expr import Const, DimensionError, evaluate_points, is_zero
from stochsym.model import (
    FiniteTransformation, InfinitesimalTransformation, Sde, directional_mat, generator_apply, jacobian,
    lie_bracket, matmul, mixed_bracket, validate,
)
from stochsym.transform import flow

from helpers import (
    B_FLIPPED, B_SIGN_CORRECT, ETA_RADIAL, P, PLANE, PUNCTURED, UNIT, brownian, mat, random_sde, seeded,
    vec,
)


def assert_zero_matrix(a, domain=UNIT):
    for row in a:
        for e in row:
            assert is_zero(e, domain)


def same(a, b, domain=UNIT):
    assert_zero_matrix([[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)], domain)


# -- generator ---------------------------------------------------------------


@pytest.mark.parametrize("f, expected", [("x^2 + y^2", "2"), ("x*y", "0"), ("x", "0"), ("exp(x)", "exp(x)/2")])
def test_generator_on_brownian_motion(f, expected):
    assert is_zero(generator_apply(brownian(), P(f)) - P(expected), UNIT)


def test_generator_on_radial_drift(ex51):
    assert is_zero(generator_apply(ex51.sde, P("x")) - P("x/(x^2+y^2)"), PUNCTURED)


def test_generator_rejects_wrong_dimension():
    with pytest.raises(DimensionError):
        generator_apply(brownian(), P("x1 + x3", 3))


def test_generator_matches_ito_second_order_term_for_constant_sigma():
    sde = Sde(vec("0", "0"), mat(["1", "2"], ["0", "3"]), UNIT)
    f = P("sin(x)*y^3")
    # A = 1/2 sigma sigma^T = [[5/2, 3], [3, 9/2]]
    expected = P("(5/2)*(-sin(x)*y^3) + 2*3*cos(x)*3*y^2 + (9/2)*sin(x)*6*y")
    assert is_zero(generator_apply(sde, f) - expected, UNIT)


@pytest.mark.parametrize("seed", range(5))
def test_generator_is_linear(seed):
    rng = seeded(seed)
    sde = random_sde(rng)
    f, g = P("x^2*y + sin(y)"), P("exp(x)*y")
    a, b = Const(int(rng.integers(-5, 6))), Const(int(rng.integers(-5, 6)))
    lhs = generator_apply(sde, a * f + b * g)
    rhs = a * generator_apply(sde, f) + b * generator_apply(sde, g)
    assert is_zero(lhs - rhs, UNIT)


# -- jacobian ----------------------------------------------------------------


def test_jacobian_examples():
    same(jacobian(vec("x + y", "x - y"), 2), mat(["1", "1"], ["1", "-1"]))
    same(jacobian(vec("x", "y"), 2), mat(["1", "0"], ["0", "1"]))
    r3 = "(x^2+y^2)^(3/2)"
    same(jacobian([P("x/(x^2+y^2)^(1/2)")], 2), mat([f"y^2/{r3}", f"-x*y/{r3}"]), PUNCTURED)


# -- mixed bracket -----------------------------------------------------------


def test_mixed_bracket_examples():
    same(mixed_bracket(vec("x", "y"), mat(["1", "0"], ["0", "1"])), mat(["-1", "0"], ["0", "-1"]))
    same(mixed_bracket(vec("x*sin(y)", "exp(x)"), mat(["0", "0"], ["0", "0"])), mat(["0", "0"], ["0", "0"]))
    # rotations and dilations commute
    br = lie_bracket(vec("y", "-x"), vec("x", "y"))
    assert all(is_zero(a, UNIT) for a in br)
    br = lie_bracket(vec("1", "0"), vec("x*y", "x^2"))
    assert all(is_zero(a - b, UNIT) for a, b in zip(br, vec("y", "2*x")))


def test_lie_bracket_matches_flow_commutator():
    # phi^B_{-s} phi^A_{-s} phi^B_s phi^A_s (p) = p + s^2 [A, B](p) + O(s^3)
    A, Bv = vec("y", "-x"), vec("x^2", "y")
    p = np.array([[0.3, -0.4]])
    zero = mat(["0", "0"], ["0", "0"])
    VA, VB = InfinitesimalTransformation(A, zero, P("0")), InfinitesimalTransformation(Bv, zero, P("0"))
    s = 1e-3

    def go(V, a, q):
        return flow(V, a, q, h_flow=a / 20 if a else None).phi

    q = go(VB, -s, go(VA, -s, go(VB, s, go(VA, s, p))))
    numeric = (q - p)[0] / s ** 2
    exact = evaluate_points(list(lie_bracket(A, Bv)), p)[0]
    assert np.allclose(numeric, exact, atol=5e-3)


def _small_matrix_field(rng):
    polys = ["x", "y", "x*y", "1", "x^2", "sin(y)"]
    return [[P(f"{int(rng.integers(-3, 4))}*{polys[rng.integers(6)]}") for _ in range(2)] for _ in range(2)]


def _field(rng):
    polys = ["x", "y", "x*y", "1", "y^2", "cos(x)"]
    return [P(f"{int(rng.integers(-3, 4))}*{polys[rng.integers(6)]} + {polys[rng.integers(6)]}") for _ in range(2)]


@pytest.mark.parametrize("seed", range(6))
def test_mixed_bracket_leibniz(seed):
    rng = seeded(seed)
    A, Bm, D = _field(rng), _small_matrix_field(rng), _small_matrix_field(rng)
    lhs = mixed_bracket(A, matmul(Bm, D))
    rhs1 = matmul(mixed_bracket(A, Bm), D)
    rhs2 = matmul(Bm, directional_mat(A, D))
    same(lhs, [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(rhs1, rhs2)])


@pytest.mark.parametrize("seed", range(6))
def test_mixed_bracket_jacobi(seed):
    rng = seeded(100 + seed)
    A, Cv, Bm = _field(rng), _field(rng), _small_matrix_field(rng)
    lhs = mixed_bracket(A, mixed_bracket(Cv, Bm))
    r1 = mixed_bracket(lie_bracket(A, Cv), Bm)
    r2 = mixed_bracket(Cv, mixed_bracket(A, Bm))
    same(lhs, [[a + b for a, b in zip(x, y)] for x, y in zip(r1, r2)])


def test_mixed_bracket_dimension_mismatch():
    with pytest.raises(DimensionError):
        mixed_bracket(vec("x", "y"), [[P("1")]])


# -- validation --------------------------------------------------------------


def _checks(report):
    return {c.name: c.passed for c in report.checks}


@pytest.mark.parametrize("B", [B_SIGN_CORRECT, B_FLIPPED])
def test_radial_rotation_is_special_orthogonal(B):
    T = FiniteTransformation(vec("x", "y"), vec("x", "y"), B, ETA_RADIAL, PUNCTURED)
    checks = _checks(validate(T))
    assert checks["B orthogonal"] and checks["det B = 1"] and checks["eta positive"]


def test_shear_fails_orthogonality():
    T = FiniteTransformation(vec("x", "y"), vec("x", "y"), mat(["1", "1"], ["0", "1"]), P("1"), UNIT)
    report = validate(T)
    assert not _checks(report)["B orthogonal"]
    assert _checks(report)["det B = 1"]
    assert not report.passed
    assert "FAIL" in str(report)


def test_reflection_fails_determinant():
    T = FiniteTransformation(vec("x", "y"), vec("x", "y"), mat(["1", "0"], ["0", "-1"]), P("1"), UNIT)
    assert not _checks(validate(T))["det B = 1"]


def test_wrong_inverse_and_nonpositive_eta_are_reported():
    T = FiniteTransformation(vec("2*x", "y"), vec("x", "y"), mat(["1", "0"], ["0", "1"]), P("x"), UNIT)
    checks = _checks(validate(T))
    assert not checks["phi_inverse(phi(p)) = p"]
    assert not checks["eta positive"]


def test_antisymmetry_of_C():
    good = InfinitesimalTransformation(vec("y", "-x"), mat(["0", "1"], ["-1", "0"]), P("0"))
    bad = InfinitesimalTransformation(vec("y", "-x"), mat(["0", "1"], ["1", "0"]), P("0"))
    assert validate(good).passed
    assert not validate(bad).passed


def test_sde_validation_detects_psd_and_symmetry():
    assert validate(brownian()).passed
    # sigma sigma^T is always PSD; an undefined drift everywhere is flagged
    sde = Sde(vec("log(neg(x^2) - 1)", "0"), mat(["1", "0"], ["0", "1"]), UNIT)
    assert not validate(sde).passed


def test_validate_rejects_other_types():
    with pytest.raises(TypeError):
        validate(42)


def test_report_serialises():
    d = validate(brownian(PLANE)).as_dict()
    assert d["kind"] == "Sde" and d["passed"] and len(d["checks"]) == 3


# -- model files -------------------------------------------------------------


def test_fixture_round_trip(tmp_path, ex51):
    path = io.save(ex51, tmp_path / "m.json")
    back = io.load(path)
    assert back.n == 2 and back.m == 2
    for a, b in zip(back.sde.mu, ex51.sde.mu):
        assert is_zero(a - b, PUNCTURED)
    assert set(back.transforms) == set(ex51.transforms)
    assert set(back.symmetries) == set(ex51.symmetries)
    same(back.transforms["T"].bmat, ex51.transforms["T"].bmat, PUNCTURED)
    assert back.domain.margin == ex51.domain.margin


def test_single_object_files():
    mf = io.loads({"Y": ["y", "-x"], "C": [["0", "1"], ["-1", "0"]], "tau": "0"})
    assert list(mf.symmetries) == ["V"] and mf.n == 2 and mf.m == 2
    mf = io.loads({"phi": ["x"], "phi_inverse": ["x"], "B": [["1"]], "eta": "2"})
    assert mf.transforms["T"].n == 1


@pytest.mark.parametrize("data", [
    {"n": 2, "mu": ["x", "y +"], "sigma": [["1", "0"], ["0", "1"]]},
    {"n": 2, "domain": {"box": [[0, 1]]}},
    {"n": 2, "Y": ["x", "y"], "C": [["0", "0"], ["0", "0"]]},
    [1, 2, 3],
])
def test_malformed_files_raise(data):
    with pytest.raises(io.ModelFileError):
        io.loads(data)
