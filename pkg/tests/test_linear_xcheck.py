import numpy as np
import pytest

from ergohj.grids import Grid, GridOptions, build_grid
from ergohj.linear_xcheck import (
    EigenPair,
    assemble_operator,
    colehopf_compare,
    drift_antiderivative,
    linear_lambda,
    principal_eigenvalue,
    sturm_count,
)
from ergohj.model import ProblemSpec, build_coefficients
from ergohj.solver import Solution, gradient, make_stencil, solve_newton


def spec_ip(**kw):
    base = dict(m=2.0, d=3, delta=0.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    base.update(kw)
    return ProblemSpec(**base)


class _FreeCoeffs:
    """b = 0, V = 0 stub for the free-Laplacian limit."""

    def drift(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def drift_d1(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def potential(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


def _dense(op):
    n = op.diag.size
    T = np.diag(op.diag)
    T += np.diag(op.off, 1) + np.diag(op.off, -1)
    return T


class TestAssemble:
    def test_symmetric_by_construction(self):
        spec = spec_ip()
        g = build_grid(spec, 10.0, GridOptions(n=256))
        op = assemble_operator(g, build_coefficients(spec), 10.0, spec.d)
        T = _dense(op)
        assert np.array_equal(T, T.T)

    def test_free_laplacian_limit(self):
        # smallest eigenvalue of -2 d^2/dr^2 on (0, L) Dirichlet is 2 pi^2/L^2
        for L in (25.0, 50.0):
            g = Grid(nodes=np.linspace(0.0, L, 2001), kind="uniform", R_max=L)
            op = assemble_operator(g, _FreeCoeffs(), 0.0, d=3)
            pair = principal_eigenvalue(op)
            assert pair.lambda_ == pytest.approx(2.0 * np.pi**2 / L**2, rel=1e-3)
        # and it vanishes as the domain grows

    def test_eigenvector_positive(self):
        spec = spec_ip()
        g = build_grid(spec, 10.0, GridOptions(n=512))
        pair = linear_lambda(spec, 10.0, g)
        assert np.all(pair.eigenvector > 0.0)
        assert pair.eigenvector.max() == pytest.approx(1.0)

    def test_similarity_invariance(self):
        # the principal eigenvalue must be unchanged when the symmetrized
        # matrix is conjugated back to the raw (nonsymmetric) form; inverse
        # power iteration on the conjugated matrix is the independent route
        spec = spec_ip()
        g = build_grid(spec, 5.0, GridOptions(n=200, r_max=20.0, uniform=True))
        op = assemble_operator(g, build_coefficients(spec), 5.0, spec.d)
        pair = principal_eigenvalue(op)
        T = _dense(op)
        c = np.exp(op.log_weight - op.log_weight.mean())
        A = (T * c[None, :]) / c[:, None]  # diag(1/c) T diag(c)
        shift = pair.lambda_ - 1e-3
        x = np.ones(T.shape[0])
        M = A - shift * np.eye(T.shape[0])
        for _ in range(60):
            x = np.linalg.solve(M, x)
            x /= np.linalg.norm(x)
        lam_raw = float(x @ (A @ x))
        assert abs(lam_raw - pair.lambda_) <= 1e-10 * op.norm_bound

    def test_antiderivative_quadrature_oracle(self):
        spec = spec_ip(delta=1.0, a=0.5)
        coeffs = build_coefficients(spec)
        r = np.array([0.5, 1.0, 2.0, 8.0])
        from scipy.integrate import quad

        B = drift_antiderivative(coeffs, r)
        for ri, Bi in zip(r, B):
            ref, _ = quad(lambda s: float(coeffs.drift(s)), 0.0, ri, epsabs=1e-12)
            assert Bi == pytest.approx(ref, abs=1e-10)


class TestSturm:
    def test_degenerate_diagonal(self):
        op_diag = np.array([3.0, 1.0, 2.0])
        off = np.zeros(2)
        assert sturm_count(op_diag, off, 0.99) == 0
        assert sturm_count(op_diag, off, 1.01) == 1

    def test_count_below_gershgorin_is_zero(self):
        rng = np.random.default_rng(3)
        d = rng.standard_normal(64)
        e = rng.standard_normal(63)
        lower = np.min(d - np.abs(np.concatenate([[0], e])) - np.abs(np.concatenate([e, [0]])))
        assert sturm_count(d, e, lower - 1e-9) == 0

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            d = rng.standard_normal(64)
            e = rng.standard_normal(63)
            T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
            evs = np.linalg.eigvalsh(T)
            from ergohj.linear_xcheck import TridiagonalOperator

            op = TridiagonalOperator(
                diag=d, off=e, nodes=np.arange(1.0, 65.0),
                log_weight=np.zeros(64), cell=np.ones(64),
            )
            pair = principal_eigenvalue(op)
            scale = np.abs(T).sum(axis=1).max()
            assert pair.lambda_ == pytest.approx(evs[0], abs=1e-10 * scale)
            # principal: exactly one eigenvalue at or below lambda + eps
            assert sturm_count(d, e, pair.lambda_ + 1e-9 * scale) == 1


class TestColeHopf:
    def test_synthetic_exact_transform(self):
        nodes = np.linspace(0.0, 20.0, 401)
        r = nodes[1:]
        w = np.exp(-((r - 8.0) ** 2) / 4.0)
        w /= w.max()
        lw = 0.3 * r
        phi = -2.0 * (lw + np.log(w))
        grid = Grid(nodes=nodes, kind="uniform", R_max=20.0)
        u = np.concatenate([[phi[0]], phi])
        st = make_stencil(grid)
        sol = Solution(
            lambda_=1.0, u=u, du=gradient(u, st), residual_norm=0.0,
            newton_iters=0, converged=True, grid=grid, beta=0.0,
        )
        pair = EigenPair(
            lambda_=1.0, eigenvector=w, nodes=r, log_weight=lw,
            iterations=1, residual=0.0,
        )
        rep = colehopf_compare(sol, pair)
        assert rep.lambda_diff == 0.0
        assert rep.profile_diff < 1e-10

    def test_gap_regime_agreement(self):
        spec = spec_ip()
        g = build_grid(spec, 20.0, GridOptions(n=2048, rmax_mult=8.0, uniform=True))
        nl = solve_newton(spec, 20.0, g)
        li = linear_lambda(spec, 20.0, g)
        rep = colehopf_compare(nl, li)
        assert rep.lambda_diff < 1e-6
        assert rep.profile_diff < 1e-3

    def test_strong_drift_agreement(self):
        spec = spec_ip(delta=1.0)
        g = build_grid(spec, 100.0, GridOptions(n=4096, rmax_mult=8.0))
        nl = solve_newton(spec, 100.0, g)
        li = linear_lambda(spec, 100.0, g)
        rep = colehopf_compare(nl, li)
        assert rep.lambda_diff < 1e-5 * max(1.0, nl.lambda_)

    def test_m_not_two_rejected(self):
        spec = spec_ip(m=3.0)
        g = build_grid(spec, 10.0, GridOptions(n=128))
        with pytest.raises(ValueError):
            linear_lambda(spec, 10.0, g)
