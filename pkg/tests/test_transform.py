import csv
import io as stdio

import numpy as np
import pytest

from stochsym.expr import DimensionError, Domain, evaluate_points, is_zero
from stochsym.model import FiniteTransformation, InfinitesimalTransformation
from stochsym.transform import (
    FlowExitError, TransformError, compose, flow, flow_tolerance, infinitesimals_equal, invert, pullback,
    pushforward, sdes_equal, transform_sde, triads_equal,
)

from helpers import (
    B_FLIPPED, B_SIGN_CORRECT, ETA_RADIAL, P, PLANE, PUNCTURED, UNIT, brownian, mat, radial_gauge,
    random_infinitesimal, random_sde, random_triad, seeded, strong, vec,
)

I2 = mat(["1", "0"], ["0", "1"])
Z2 = mat(["0", "0"], ["0", "0"])
J = mat(["0", "1"], ["-1", "0"])


def identity(domain=UNIT):
    return FiniteTransformation.identity(2, 2, domain)


def coefficients_are(sde, mu, sigma, domain):
    diffs = [a - P(b) for a, b in zip(sde.mu, mu)]
    diffs += [a - P(b) for ra, rb in zip(sde.sigma, sigma) for a, b in zip(ra, rb)]
    return all(is_zero(d, domain) for d in diffs)


# -- transformed SDE -----------------------------------------------------------


def test_identity_leaves_sde_unchanged():
    sde = random_sde(seeded(3))
    assert sdes_equal(transform_sde(identity(), sde), sde)


def test_radial_gauge_linearises_the_example(ex51):
    # the flipped B rotates the noise onto [[x, y], [-y, x]]
    out = transform_sde(radial_gauge(B_FLIPPED), ex51.sde)
    assert coefficients_are(out, ["x", "y"], [["x", "y"], ["-y", "x"]], PUNCTURED)
    # the reduction solution rotates it the other way
    out = transform_sde(radial_gauge(B_SIGN_CORRECT), ex51.sde)
    assert coefficients_are(out, ["x", "y"], [["x", "-y"], ["y", "x"]], PUNCTURED)


def test_constant_time_change_scales_diffusion():
    T = FiniteTransformation(vec("x", "y"), vec("x", "y"), I2, P("4"), PLANE)
    out = transform_sde(T, brownian())
    assert coefficients_are(out, ["0", "0"], [["1/2", "0"], ["0", "1/2"]], PLANE)


def test_transform_rejects_bad_input():
    T = FiniteTransformation(vec("x", "y"), vec("x", "y"), I2, P("x"), UNIT)
    with pytest.raises(TransformError):
        transform_sde(T, brownian(UNIT))
    T1 = FiniteTransformation([P("x", 1)], [P("x", 1)], [[P("1", 1)]], P("1", 1), Domain((0,), (1,)))
    with pytest.raises(DimensionError):
        transform_sde(T1, brownian())


# -- group operations --------------------------------------------------------


def test_compose_shift_then_scale():
    x = lambda s: [P(s, 1)]  # noqa: E731
    line = Domain((-1,), (1,))
    T1 = FiniteTransformation(x("x + 1"), x("x - 1"), [[P("1", 1)]], P("1", 1), line)
    T2 = FiniteTransformation(x("2*x"), x("x/2"), [[P("1", 1)]], P("3", 1), line)
    T = compose(T2, T1)
    expected = FiniteTransformation(x("2*(x + 1)"), x("x/2 - 1"), [[P("1", 1)]], P("3", 1), line)
    assert triads_equal(T, expected, line)


def test_invert_radial_gauge():
    inv = invert(radial_gauge())
    expected = FiniteTransformation(vec("x", "y"), vec("x", "y"), [list(c) for c in zip(*B_SIGN_CORRECT)],
                                    P("x^2 + y^2"), PUNCTURED)
    assert triads_equal(inv, expected, PUNCTURED)
    assert triads_equal(invert(identity()), identity())


@pytest.mark.parametrize("seed", range(10))
def test_group_laws_on_random_triads(seed):
    rng = seeded(seed)
    T1, T2, T3 = random_triad(rng), random_triad(rng), random_triad(rng)
    assert triads_equal(compose(T3, compose(T2, T1)), compose(compose(T3, T2), T1), UNIT)
    assert triads_equal(compose(T1, identity()), T1, UNIT)
    assert triads_equal(compose(invert(T1), T1), identity(), UNIT)
    assert triads_equal(invert(invert(T1)), T1, UNIT)


def test_triads_equal_detects_difference():
    rng = seeded(0)
    T1, T2 = random_triad(rng), random_triad(rng)
    assert not triads_equal(T1, T2, UNIT)


# -- push-forward ------------------------------------------------------------


V1 = InfinitesimalTransformation(vec("x", "y"), Z2, P("2"))
V2 = InfinitesimalTransformation(vec("y", "-x"), J, P("0"))


def test_radial_gauge_pushes_symmetries_to_strong_ones():
    T = radial_gauge(B_SIGN_CORRECT)
    assert infinitesimals_equal(pushforward(T, V1), strong("x", "y"), PUNCTURED)
    assert infinitesimals_equal(pushforward(T, V2), strong("y", "-x"), PUNCTURED)


def test_flipped_gauge_leaves_rotation_weak():
    pushed = pushforward(radial_gauge(B_FLIPPED), V2)
    expected = InfinitesimalTransformation(vec("y", "-x"), mat(["0", "2"], ["-2", "0"]), P("0"))
    assert infinitesimals_equal(pushed, expected, PUNCTURED)


def test_pullback_examples():
    T = radial_gauge()
    assert infinitesimals_equal(pullback(T, strong("x", "y")), V1, PUNCTURED)
    assert infinitesimals_equal(pullback(identity(PUNCTURED), V2), V2, PUNCTURED)
    assert infinitesimals_equal(pushforward(identity(PUNCTURED), V2), V2, PUNCTURED)


@pytest.mark.parametrize("seed", range(5))
def test_pull_after_push_is_identity(seed):
    rng = seeded(20 + seed)
    T, V = random_triad(rng), random_infinitesimal(rng)
    assert infinitesimals_equal(pullback(T, pushforward(T, V)), V, UNIT)


@pytest.mark.parametrize("seed", range(5))
def test_functoriality_on_random_pairs(seed):
    rng = seeded(40 + seed)
    T1 = random_triad(rng)
    T2 = random_triad(rng, T1.target)
    sde, V = random_sde(rng), random_infinitesimal(rng)
    T21 = compose(T2, T1)
    assert sdes_equal(transform_sde(T21, sde), transform_sde(T2, transform_sde(T1, sde)), T21.target)
    assert infinitesimals_equal(pushforward(T21, V), pushforward(T2, pushforward(T1, V)), T21.target)


# -- flows -----------------------------------------------------------------------


GRID = np.array([[0.3, -0.2], [0.5, 0.5], [-0.7, 0.1], [0.05, -0.9]])


def test_translation_flow():
    V = strong("1", "0")
    r = flow(V, 0.5, GRID)
    assert np.allclose(r.phi, GRID + [0.5, 0], atol=1e-13)
    assert np.allclose(r.jac, np.eye(2), atol=1e-13)
    assert np.allclose(r.B, np.eye(2)) and np.allclose(r.eta, 1)


def test_dilation_flow():
    a = 0.3
    r = flow(V1, a, GRID)
    assert np.allclose(r.phi, np.exp(a) * GRID, rtol=1e-12)
    assert np.allclose(r.eta, np.exp(2 * a), rtol=1e-12)


def test_rotation_flow():
    a = 0.7
    r = flow(V2, a, GRID)
    c, s = np.cos(a), np.sin(a)
    rot = np.array([[c, s], [-s, c]])
    assert np.allclose(r.phi, GRID @ rot.T, atol=1e-12)
    assert np.allclose(r.B, rot, atol=1e-12)
    assert np.abs(np.swapaxes(r.B, 1, 2) @ r.B - np.eye(2)).max() < 1e-7
    assert np.allclose(r.jac, rot, atol=1e-12)


def test_flow_at_zero_is_identity():
    r = flow(V2, 0.0, GRID)
    assert np.array_equal(r.phi, GRID) and np.array_equal(r.B[0], np.eye(2)) and np.all(r.eta == 1)


def test_flow_derivatives_match_finite_differences():
    V = InfinitesimalTransformation(vec("sin(y)", "x*y"), Z2, P("x"))
    p = np.array([[0.2, 0.4]])
    h = 1e-4
    r = flow(V, 0.4, p)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up, dn, mid = flow(V, 0.4, p + e).phi, flow(V, 0.4, p - e).phi, r.phi
        assert np.allclose((up - dn)[0] / (2 * h), r.jac[0, :, i], atol=1e-7)
        assert np.allclose((up - 2 * mid + dn)[0] / h ** 2, r.hess[0, :, i, i], atol=1e-4)


@pytest.mark.parametrize("a, b", [(0.1, 0.2), (0.25, -0.1)])
def test_flow_group_law(a, b):
    V = InfinitesimalTransformation(vec("y + x^2/4", "-x"), Z2, P("0"))
    h = 1e-3
    direct = flow(V, a + b, GRID, h_flow=h).phi
    stepped = flow(V, a, flow(V, b, GRID, h_flow=h).phi, h_flow=h).phi
    assert np.abs(direct - stepped).max() <= flow_tolerance(h, abs(a) + abs(b)) * np.abs(direct).max()


def test_flow_exit_reports_parameter():
    with pytest.raises(FlowExitError) as info:
        flow(strong("1", "0"), 0.5, [[0.9, 0.0]], h_flow=1e-3, domain=UNIT)
    assert info.value.a_exit == pytest.approx(0.1, abs=2e-3)
    with pytest.raises(FlowExitError):
        flow(strong("1", "0"), 0.1, [[3.0, 0.0]], domain=UNIT)


def test_flow_csv_export(tmp_path):
    r = flow(V2, 0.2, GRID)
    text = r.to_csv(tmp_path / "flow.csv")
    rows = list(csv.reader(stdio.StringIO(text)))
    assert rows[0] == ["a", "point", "p1", "p2", "phi1", "phi2", "B11", "B12", "B21", "B22", "eta"]
    assert len(rows) == 1 + len(GRID)
    assert float(rows[2][5]) == r.phi[1, 1]
    assert (tmp_path / "flow.csv").read_text() == text


def test_flow_tolerance_has_roundoff_floor():
    assert flow_tolerance(1e-2, 1.0) == pytest.approx(1e-7)
    assert flow_tolerance(1e-4, 0.1) > 10 * (1e-4) ** 4


def test_pushforward_dimension_mismatch():
    W = InfinitesimalTransformation(vec("x", "y"), [[P("0")]], P("0"))
    with pytest.raises(DimensionError):
        pushforward(identity(), W)


def test_eta_radial_is_reciprocal_radius_squared():
    pts = PUNCTURED.sample()
    assert np.allclose(evaluate_points(ETA_RADIAL, pts) * (pts ** 2).sum(axis=1), 1.0)
