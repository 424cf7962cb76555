"""Backend parity and determinism for the path-stepping kernel."""

import numpy as np
import pytest

from ergohj._kernels import get_backend
from ergohj._kernels import _pykernels as pk
from ergohj.model import ProblemSpec, build_coefficients

try:
    get_backend("cython")
    HAVE_CORE = True
except ImportError:
    HAVE_CORE = False


def _setup(n_paths=8, k=512, seed=5):
    spec = ProblemSpec(m=2.0, d=3, delta=0.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    params = build_coefficients(spec).kernel_params()
    rng = np.random.default_rng(seed)
    ctrl_r = np.linspace(0.0, 40.0, 200)
    ctrl_xi = -np.tanh(ctrl_r)
    r = rng.uniform(1.0, 20.0, n_paths)
    acc = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    dW = rng.standard_normal((n_paths, k))
    args = dict(
        step0=0, burn_steps=64, dW=dW, ctrl_r=ctrl_r, ctrl_xi=ctrl_xi,
        params=params, m_star=2.0, d=3.0, beta=10.0, dt=1e-3,
        r_floor=1e-3, r_abort=400.0,
    )
    return r, acc, alive, args


def _run(mod, r, acc, alive, args):
    r, acc, alive = r.copy(), acc.copy(), alive.copy()
    counted = mod.em_chunk(r, acc, alive, **args)
    return r, acc, alive, counted


def test_python_backend_deterministic():
    r0, acc0, alive0, args = _setup()
    a = _run(pk, r0, acc0, alive0, args)
    b = _run(pk, r0, acc0, alive0, args)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert a[3] == b[3] == 512 - 64


@pytest.mark.skipif(not HAVE_CORE, reason="compiled kernel not built")
def test_backends_agree():
    core, _ = get_backend("cython")
    r0, acc0, alive0, args = _setup(n_paths=16, k=2048)
    rp, ap, lp, cp = _run(pk, r0, acc0, alive0, args)
    rc, ac, lc, cc = _run(core, r0, acc0, alive0, args)
    assert cp == cc
    np.testing.assert_array_equal(lp, lc)
    np.testing.assert_allclose(rc, rp, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(ac, ap, rtol=1e-10)


@pytest.mark.skipif(not HAVE_CORE, reason="compiled kernel not built")
def test_reflection_and_abort_parity():
    core, _ = get_backend("cython")
    r0, acc0, alive0, args = _setup(n_paths=8, k=256, seed=11)
    # huge dt forces reflections and at least one abort
    args = dict(args, dt=0.5, r_abort=30.0)
    rp, ap, lp, _ = _run(pk, r0, acc0, alive0, args)
    rc, ac, lc, _ = _run(core, r0, acc0, alive0, args)
    np.testing.assert_array_equal(lp, lc)
    np.testing.assert_allclose(rc, rp, rtol=1e-9, atol=1e-12)
    assert np.all(rp >= args["r_floor"])


def test_control_interpolation_matches_numpy():
    rng = np.random.default_rng(2)
    ctrl_r = np.sort(rng.uniform(0.0, 10.0, 50))
    ctrl_r[0] = 0.0
    ctrl_xi = rng.standard_normal(50)
    spec = ProblemSpec(m=2.0, d=3, delta=1.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    params = build_coefficients(spec).kernel_params()
    r = rng.uniform(0.01, ctrl_r[-1], 300)
    mine = pk._control(r, ctrl_r, ctrl_xi, params)
    ref = np.interp(r, ctrl_r, ctrl_xi)
    np.testing.assert_allclose(mine, ref, rtol=1e-12, atol=1e-14)


def test_coefficient_eval_matches_model():
    spec = ProblemSpec(m=2.0, d=3, delta=0.7, rho=1.3, a=0.4, eta=1.7, R=1.2)
    coeffs = build_coefficients(spec)
    params = coeffs.kernel_params()
    r = np.geomspace(1e-3, 50.0, 200)
    np.testing.assert_allclose(pk._drift(r, params), coeffs.drift(r), rtol=1e-14)
    np.testing.assert_allclose(pk._potential(r, params), coeffs.potential(r), rtol=1e-14)


def test_compact_potential_in_kernel():
    spec = ProblemSpec(
        m=2.0, d=3, delta=0.0, rho=1.0, a=2.0, eta=2.0, R=1.0,
        potential_kind="compact_support", R_prime=2.0,
    )
    coeffs = build_coefficients(spec)
    params = coeffs.kernel_params()
    r = np.linspace(0.0, 3.0, 301) + 1e-9
    np.testing.assert_allclose(pk._potential(r, params), coeffs.potential(r), rtol=1e-13, atol=1e-300)
