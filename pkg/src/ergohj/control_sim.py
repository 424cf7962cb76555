"""Monte Carlo check of the stochastic-control meaning of the eigenvalue.

The eigenvalue is the least achievable long-run average of

    (1/m*) |xi_t|^{m*}  +  beta V(X_t)

over controls xi of the diffusion dX = -xi dt - b(X) dt + sqrt(2) dW.  The
minimizing feedback extracted from a computed eigenfunction is
xi*(x) = |D phi|^(m-2) D phi, and everything here is radial: the simulated
process is the radius with its (d-1)/r Bessel drift, reflected at a small
floor where the Bessel term would blow up.  Paths draw from counter-based
per-path random streams, so estimates are bit-reproducible and unchanged
for existing paths when the path count grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .grids import domain_scale
from .model import ProblemSpec, build_coefficients
from .solver import Solution

CHUNK_STEPS = 16384


class SimulationError(RuntimeError):
    """A path left the sane region (wrong control or too-large dt)."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 2e-3
    T: float = 1000.0
    n_paths: int = 64
    seed: int = 20260809
    burn_in: float = 0.25  # fraction of the horizon discarded

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= 100 * self.dt:
            raise ValueError("T must be at least 100*dt")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not 0.0 <= self.burn_in <= 0.5:
            raise ValueError("burn_in must lie in [0, 0.5]")


@dataclass(frozen=True)
class FeedbackControl:
    """Radial control magnitude xi(r), tabulated on the solution grid.

    Inside the grid the control interpolates linearly; beyond it the
    analytic continuation -b_r(r) is used (the Legendre minimizer of the
    far-field slope exactly cancels the drift).  `scale` multiplies the
    table, giving the perturbed competitors for optimality checks.
    """

    nodes: np.ndarray
    xi: np.ndarray
    params: np.ndarray  # coefficient pack for the far-field continuation
    scale: float = 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        from ._kernels import _pykernels

        base = _pykernels._control(r, self.nodes, self.xi * self.scale, self.params)
        return base

    def scaled(self, factor: float) -> "FeedbackControl":
        return replace(self, scale=self.scale * factor)


def feedback_control(solution: Solution, spec: ProblemSpec) -> FeedbackControl:
    """Optimal feedback from a converged solution: xi(r) = |u'|^(m-2) u'."""
    if not solution.converged:
        raise ValueError("feedback extraction needs a converged solution")
    du = solution.du
    m = spec.m
    mag = np.abs(du)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(mag > 0, mag ** (m - 2.0) * du, 0.0)
    return FeedbackControl(
        nodes=solution.grid.nodes,
        xi=xi,
        params=build_coefficients(spec).kernel_params(),
    )


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_paths: int
    per_path: tuple[float, ...]
    horizon: float
    control_scale: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "horizon": self.horizon,
            "control_scale": self.control_scale,
        }


def _drift_fixed_point(spec: ProblemSpec, solution: Solution) -> float:
    """Zero of the optimally controlled radial drift (the well bottom).

    Starting paths here removes most of the finite-horizon transient bias;
    the equilibration that remains is the fast width relaxation.  Falls
    back to the feature radius when no interior zero exists.
    """
    r = solution.grid.nodes[1:]
    coeffs = build_coefficients(spec)
    m = spec.m
    du = solution.du[1:]
    mag = np.abs(du)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(mag > 0, mag ** (m - 2.0) * du, 0.0)
    f = -xi - np.asarray(coeffs.drift(r)) + (spec.d - 1.0) / r
    sign_change = np.nonzero((f[:-1] > 0) & (f[1:] <= 0))[0]
    hi = 0.5 * float(solution.grid.R_max)
    if sign_change.size:
        i = sign_change[-1]
        return float(np.clip(0.5 * (r[i] + r[i + 1]), spec.R / 2.0, hi))
    return float(np.clip(domain_scale(spec, max(beta_of(solution), 1.0)), spec.R, hi))


def beta_of(solution: Solution) -> float:
    return float(solution.beta)


def _path_generator(seed: int, path_index: int) -> np.random.Generator:
    # Philox is counter based; jumped() gives disjoint per-path streams that
    # do not reshuffle when n_paths changes
    return np.random.Generator(np.random.Philox(key=seed).jumped(path_index))


def simulate(
    spec: ProblemSpec,
    beta: float,
    solution: Solution,
    config: SimConfig,
    control: FeedbackControl | None = None,
    trace_file=None,
    trace_stride: int = 100,
) -> CostEstimate:
    """Average cost rate of the (possibly perturbed) feedback, with SE.

    Euler-Maruyama on the radial process dr = [-xi - b_r + (d-1)/r] dt
    + sqrt(2) dB, reflecting at r_floor = min(1e-3, R/100); the running
    cost is accumulated after the burn-in fraction of the horizon.  A path
    exceeding 10 * R_max aborts the run with SimulationError.  Passing a
    `trace_file` additionally writes path 0 as CSV (step, t, r, cost) every
    `trace_stride` steps.
    """
    ctrl = control if control is not None else feedback_control(solution, spec)
    n_steps = int(round(config.T / config.dt))
    burn_steps = int(round(config.burn_in * n_steps))
    r_floor = min(1e-3, spec.R / 100.0)
    r_max = float(solution.grid.R_max)
    r_abort = 10.0 * r_max
    r_start = _drift_fixed_point(spec, solution)

    # extend the table with the analytic far control out to the abort radius
    # before scaling, so a perturbed control is `scale * xi*` everywhere
    params = ctrl.params
    far = np.geomspace(1.0001 * ctrl.nodes[-1], 1.001 * r_abort, 128)
    from ._kernels import _pykernels as _pk

    ctrl_r = np.concatenate([ctrl.nodes, far])
    xi_tab = np.concatenate([ctrl.xi, -_pk._drift(far, params)]) * ctrl.scale
    n_paths = config.n_paths

    r = np.full(n_paths, r_start)
    acc = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    gens = [_path_generator(config.seed, p) for p in range(n_paths)]

    trace_rows = []
    counted = 0
    step0 = 0
    while step0 < n_steps:
        k = min(CHUNK_STEPS, n_steps - step0)
        dW = np.empty((n_paths, k))
        for p, g in enumerate(gens):
            dW[p, :] = g.standard_normal(k)
        if trace_file is not None:
            _trace_chunk(
                trace_rows, r[0], acc[0], step0, dW[0], ctrl_r, xi_tab, params,
                spec, beta, config, r_floor, trace_stride,
            )
        counted += _kernels.em_chunk(
            r, acc, alive, step0, burn_steps, dW, ctrl_r, xi_tab, params,
            spec.m_star, float(spec.d), beta, config.dt, r_floor, r_abort,
        )
        if not alive.all():
            bad = int(np.nonzero(~alive)[0][0])
            raise SimulationError(
                f"path {bad} exceeded 10*R_max={r_abort:.3g}: wrong control "
                f"or dt={config.dt} too large"
            )
        step0 += k

    per_path = acc / max(counted, 1)
    mean = float(np.mean(per_path))
    if n_paths >= 2:
        se = float(np.std(per_path, ddof=1) / math.sqrt(n_paths))
    else:
        se = float("inf")
    if trace_file is not None:
        arr = np.asarray(trace_rows)
        np.savetxt(
            trace_file, arr, delimiter=",", header="step,t,r,cost", comments="", fmt="%.17g"
        )
    return CostEstimate(
        mean=mean,
        std_error=se,
        n_paths=n_paths,
        per_path=tuple(float(x) for x in per_path),
        horizon=config.T,
        control_scale=ctrl.scale,
    )


def _trace_chunk(
    rows, r0, acc0, step0, dW, ctrl_r, ctrl_xi, params, spec, beta, config, r_floor, stride
):
    """Python re-run of path 0 for debugging traces (kept out of the kernel)."""
    from ._kernels import _pykernels as pk

    r = float(r0)
    sq2dt = math.sqrt(2.0 * config.dt)
    for i, dw in enumerate(dW):
        step = step0 + i
        xi = float(pk._control(np.array([r]), ctrl_r, ctrl_xi, params)[0])
        cost = abs(xi) ** spec.m_star / spec.m_star + beta * float(
            pk._potential(np.array([r]), params)[0]
        )
        if step % stride == 0:
            rows.append((step, step * config.dt, r, cost))
        b = float(pk._drift(np.array([r]), params)[0])
        r = r + (-xi - b + (spec.d - 1.0) / r) * config.dt + sq2dt * float(dw)
        if r < r_floor:
            r = 2.0 * r_floor - r


@dataclass(frozen=True)
class ControlComparison:
    lambda_solver: float
    mc_mean: float
    mc_std_error: float
    gap: float
    z_score: float
    passed: bool
    perturbed_ok: bool
    perturbed_means: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "lambda_solver": self.lambda_solver,
            "mc_mean": self.mc_mean,
            "mc_std_error": self.mc_std_error,
            "gap": self.gap,
            "z_score": self.z_score,
            "passed": self.passed,
            "perturbed_ok": self.perturbed_ok,
            "perturbed_means": list(self.perturbed_means),
        }


def compare_lambda(
    estimate: CostEstimate,
    solution: Solution,
    perturbed: tuple[CostEstimate, ...] = (),
) -> ControlComparison:
    """Match the Monte Carlo average against the solver eigenvalue.

    Passing means |mean - lambda| <= max(3 SE, 5% |lambda|).  Perturbed
    estimates (scaled or zeroed feedback on common random numbers) must not
    undercut the optimal one by more than 2 SE, or the run is flagged.
    """
    lam = solution.lambda_
    gap = estimate.mean - lam
    se = estimate.std_error
    z = gap / se if se > 0 else float("inf") if gap else 0.0
    passed = abs(gap) <= max(3.0 * se, 0.05 * abs(lam))
    slack = 2.0 * se
    perturbed_ok = all(p.mean >= estimate.mean - slack for p in perturbed)
    return ControlComparison(
        lambda_solver=lam,
        mc_mean=estimate.mean,
        mc_std_error=se,
        gap=float(gap),
        z_score=float(z),
        passed=bool(passed),
        perturbed_ok=bool(perturbed_ok),
        perturbed_means=tuple(p.mean for p in perturbed),
    )
