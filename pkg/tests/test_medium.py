import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfbeam.errors import ConfigError, MomentumUnderflow, NonPositiveSpeed
from hfbeam.medium import (Branch, ConstantSpeed, GaussianBumpSpeed, SineSpeed,
                           eval_speed, hamiltonian, hamiltonian_blocks,
                           hamiltonian_third_blocks, medium_from_config)


def test_eval_speed_constant():
    m = ConstantSpeed(2.0, n=3)
    c, dc, d2c = eval_speed(m, np.array([0.3, -1.0, 4.0]))
    assert c == 2.0
    assert np.all(dc == 0) and np.all(d2c == 0)


def test_eval_speed_sin_profile():
    m = SineSpeed(0.1, 1.0, n=2)
    c, dc, d2c = eval_speed(m, np.array([0.0, 0.7]))
    assert np.isclose(c, 1.0)
    assert np.allclose(dc, [0.1, 0.0])
    assert np.allclose(d2c, 0.0)

    c, dc, d2c = eval_speed(m, np.array([np.pi / 2, 0.0]))
    assert np.isclose(c, 1.1)
    assert np.isclose(dc[0], 0.0, atol=1e-15)
    assert np.isclose(d2c[0, 0], -0.1)


def test_hamiltonian_values():
    assert np.isclose(
        hamiltonian(ConstantSpeed(1.0, 2), Branch.PLUS, np.zeros(2), np.array([0.6, 0.8])),
        1.0)
    assert np.isclose(
        hamiltonian(ConstantSpeed(2.0, 2), Branch.MINUS, np.zeros(2), np.array([3.0, 4.0])),
        -10.0)
    m = SineSpeed(0.1, 1.0, n=2)
    assert np.isclose(
        hamiltonian(m, Branch.PLUS, np.array([np.pi / 2, 0.0]), np.array([1.0, 0.0])),
        1.1)


def test_hpp_projector():
    blocks = hamiltonian_blocks(ConstantSpeed(1.0, 2), Branch.PLUS,
                                np.zeros(2), np.array([1.0, 0.0]))
    assert np.allclose(blocks.H_pp, [[0.0, 0.0], [0.0, 1.0]])


def test_1d_constant_blocks_vanish():
    blocks = hamiltonian_blocks(ConstantSpeed(1.0, 1), Branch.PLUS,
                                np.zeros(1), np.array([1.0]))
    assert np.allclose(blocks.H_pp, 0.0)
    assert np.allclose(blocks.H_xx, 0.0)
    assert np.allclose(blocks.H_xp, 0.0)


def _fd_grad(f, z, h):
    g = np.zeros_like(z)
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


@pytest.mark.parametrize("medium", [
    SineSpeed(0.1, 1.0, n=2),
    GaussianBumpSpeed(0.2, 0.5, center=[0.1, -0.2], n=2),
])
def test_blocks_match_finite_differences(medium):
    x = np.array([0.0, 0.0])
    p = np.array([1.0, 0.0])
    h = 1e-4
    bl = hamiltonian_blocks(medium, Branch.PLUS, x, p)

    Hx_fd = _fd_grad(lambda z: hamiltonian(medium, Branch.PLUS, z, p), x, h)
    Hp_fd = _fd_grad(lambda z: hamiltonian(medium, Branch.PLUS, x, z), p, h)
    assert np.allclose(bl.H_x, Hx_fd, atol=1e-6)
    assert np.allclose(bl.H_p, Hp_fd, atol=1e-6)

    for i in range(2):
        ei = np.zeros(2)
        ei[i] = h
        row_xx = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x + ei, p).H_x)
                  - hamiltonian_blocks(medium, Branch.PLUS, x - ei, p).H_x) / (2 * h)
        assert np.allclose(bl.H_xx[i], row_xx, atol=1e-6)
        row_xp = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x, p + ei).H_x)
                  - hamiltonian_blocks(medium, Branch.PLUS, x, p - ei).H_x) / (2 * h)
        assert np.allclose(bl.H_xp[:, i], row_xp, atol=1e-6)
        row_pp = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x, p + ei).H_p)
                  - hamiltonian_blocks(medium, Branch.PLUS, x, p - ei).H_p) / (2 * h)
        assert np.allclose(bl.H_pp[:, i], row_pp, atol=1e-6)


def test_fd_consistency_is_second_order():
    medium = SineSpeed(0.1, 1.3, n=1)
    x = np.array([0.4])
    p = np.array([0.8])
    exact = hamiltonian_blocks(medium, Branch.PLUS, x, p).H_x[0]
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (hamiltonian(medium, Branch.PLUS, x + h, p)
              - hamiltonian(medium, Branch.PLUS, x - h, p)) / (2 * h)
        errs.append(abs(fd - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_third_blocks_match_fd_of_blocks():
    medium = GaussianBumpSpeed(0.2, 0.6, n=2)
    x = np.array([0.3, -0.1])
    p = np.array([0.9, 0.4])
    h = 1e-5
    t3 = hamiltonian_third_blocks(medium, Branch.PLUS, x, p)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        dxx = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x + e, p).H_xx)
               - hamiltonian_blocks(medium, Branch.PLUS, x - e, p).H_xx) / (2 * h)
        assert np.allclose(t3.H_xxx[:, :, k], dxx, atol=1e-6)
        dxp = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x, p + e).H_xx)
               - hamiltonian_blocks(medium, Branch.PLUS, x, p - e).H_xx) / (2 * h)
        assert np.allclose(t3.H_xxp[:, :, k], dxp, atol=1e-6)
        dpp = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x, p + e).H_xp)
               - hamiltonian_blocks(medium, Branch.PLUS, x, p - e).H_xp) / (2 * h)
        assert np.allclose(t3.H_xpp[:, :, k], dpp, atol=1e-6)
        dppp = (np.asarray(hamiltonian_blocks(medium, Branch.PLUS, x, p + e).H_pp)
                - hamiltonian_blocks(medium, Branch.PLUS, x, p - e).H_pp) / (2 * h)
        assert np.allclose(t3.H_ppp[:, :, k], dppp, atol=1e-6)


@given(x1=st.floats(-3, 3), x2=st.floats(-3, 3),
       p1=st.floats(-2, 2), p2=st.floats(-2, 2))
@settings(max_examples=50, deadline=None)
def test_branch_antisymmetry(x1, x2, p1, p2):
    p = np.array([p1, p2])
    if np.linalg.norm(p) < 1e-6:
        return
    x = np.array([x1, x2])
    m = SineSpeed(0.1, 1.0, n=2)
    hp = hamiltonian(m, Branch.PLUS, x, p)
    hm = hamiltonian(m, Branch.MINUS, x, p)
    assert np.isclose(hp, -hm, rtol=1e-14)


@given(x1=st.floats(-3, 3), p1=st.floats(0.1, 2), lam=st.floats(0.1, 10))
@settings(max_examples=50, deadline=None)
def test_homogeneity_and_euler_identity(x1, p1, lam):
    m = SineSpeed(0.1, 1.0, n=1)
    x = np.array([x1])
    p = np.array([p1])
    h1 = hamiltonian(m, Branch.PLUS, x, p)
    hl = hamiltonian(m, Branch.PLUS, x, lam * p)
    assert np.isclose(hl, lam * h1, rtol=1e-12)
    bl = hamiltonian_blocks(m, Branch.PLUS, x, p)
    assert np.isclose(p @ bl.H_p, h1, rtol=1e-10)


def test_speed_positivity_guard():
    with pytest.raises(NonPositiveSpeed):
        SineSpeed(1.5, 1.0, n=1)
    with pytest.raises(NonPositiveSpeed):
        ConstantSpeed(-1.0, 1)


def test_momentum_underflow():
    m = ConstantSpeed(1.0, 2)
    with pytest.raises(MomentumUnderflow):
        hamiltonian(m, Branch.PLUS, np.zeros(2), np.array([0.0, 1e-12]))
    with pytest.raises(MomentumUnderflow):
        hamiltonian_blocks(m, Branch.PLUS, np.zeros(2), np.zeros(2))


def test_medium_from_config():
    m = medium_from_config({"kind": "constant", "c0": 1.0, "n": 1})
    assert isinstance(m, ConstantSpeed)
    m = medium_from_config({"kind": "sin1d", "amplitude": 0.1, "wavenumber": 1.0})
    assert isinstance(m, SineSpeed)
    with pytest.raises(ConfigError):
        medium_from_config({"kind": "tabulated"})
    with pytest.raises(ConfigError):
        medium_from_config({"kind": "constant", "c0": 1.0, "bogus": 2})
