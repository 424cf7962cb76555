"""Beta sweeps, asymptotic-law fits, and reproducible reports.

A sweep runs one extrapolated solve plus one certified lower bound per
beta, then checks the structural facts (monotone, concave, below the
moderate-drift ceiling) and fits the regime's rate law:

* strong drift: log lambda vs log beta over the top half of the swept
  decades; slope vs delta*m*/(delta*m* + eta), exp(intercept) vs c0;
* strict gap: log(ceiling - lambda) vs log beta; rate vs 1/(eta-1), and
  the amplitude read as beta^(1/(eta-1)) * gap at the deepest beta, where
  the law is most converged (the free intercept would fold the slowly
  decaying transient into an extrapolation to beta = 1);
* plateau: onset detection -- see detect_plateau for the exact semantics.

Reports serialize to CSV (fixed column order, 17 significant digits) and
JSON (spec echo, interior-extension record, fits, environment stamp) and
round-trip losslessly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, certificates
from ._kernels import BACKEND
from .grids import GridOptions
from .model import INVERSE_POWER, ProblemSpec, build_coefficients
from .solver import DEFAULT_LADDER, NEWTON_TOL, SolverError, SolverOptions, estimate_lambda_extrapolated

SCHEMA_VERSION = 1
CSV_COLUMNS = ("beta", "lambda", "err", "lower_bound", "seconds")


class InsufficientSpanError(ValueError):
    """The swept betas cannot support the requested fit."""


class GapUnderflowError(ValueError):
    """lambda is within solver error of the ceiling; no gap left to fit."""


@dataclass(frozen=True)
class SweepRow:
    beta: float
    lambda_: float = math.nan
    error_estimate: float = math.nan
    lower_bound: float = math.nan
    seconds: float = 0.0
    converged: bool = True
    certificate_kind: str = ""
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "lambda": self.lambda_,
            "err": self.error_estimate,
            "lower_bound": self.lower_bound,
            "seconds": self.seconds,
            "converged": self.converged,
            "certificate_kind": self.certificate_kind,
            "failure": self.failure,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        return cls(
            beta=d["beta"],
            lambda_=d["lambda"],
            error_estimate=d["err"],
            lower_bound=d["lower_bound"],
            seconds=d.get("seconds", 0.0),
            converged=d.get("converged", True),
            certificate_kind=d.get("certificate_kind", ""),
            failure=d.get("failure"),
        )


@dataclass
class SweepReport:
    spec: dict
    rows: list[SweepRow]
    fits: dict = field(default_factory=dict)
    plateau: dict | None = None
    checks: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)
    extension: dict = field(default_factory=dict)

    def good_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.failure is None and r.converged]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": self.spec,
            "rows": [r.to_dict() for r in self.rows],
            "fits": self.fits,
            "plateau": self.plateau,
            "checks": self.checks,
            "environment": self.environment,
            "extension": self.extension,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        validate_report_dict(d)
        return cls(
            spec=d["spec"],
            rows=[SweepRow.from_dict(r) for r in d["rows"]],
            fits=d.get("fits", {}),
            plateau=d.get("plateau"),
            checks=d.get("checks", {}),
            environment=d.get("environment", {}),
            extension=d.get("extension", {}),
        )


def environment_stamp() -> dict:
    import numpy
    import scipy

    return {
        "package": f"ergohj {__version__}",
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": BACKEND,
        "newton_tol": NEWTON_TOL,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


# -- running ------------------------------------------------------------------


def _solve_row(args) -> SweepRow:
    spec_dict, beta, ladder, grid_kwargs, tol = args
    spec = ProblemSpec.from_dict(spec_dict)
    t0 = time.perf_counter()
    try:
        ex = estimate_lambda_extrapolated(
            spec,
            beta,
            ladder=ladder,
            grid_opts=GridOptions(**grid_kwargs) if grid_kwargs else None,
            solver_opts=SolverOptions(tol=tol) if tol else None,
        )
        cert = certificates.lower_bound(spec, beta)
        return SweepRow(
            beta=beta,
            lambda_=ex.lambda_,
            error_estimate=ex.error_estimate,
            lower_bound=cert.lambda_lower,
            seconds=time.perf_counter() - t0,
            converged=True,
            certificate_kind=cert.candidate,
        )
    except (SolverError, certificates.SubsolutionRejected, ValueError) as exc:
        return SweepRow(
            beta=beta,
            seconds=time.perf_counter() - t0,
            converged=False,
            failure=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(
    spec: ProblemSpec,
    beta_list,
    ladder=DEFAULT_LADDER,
    grid_opts: GridOptions | None = None,
    tol: float | None = None,
    jobs: int = 1,
) -> SweepReport:
    """One extrapolated solve + one certificate per beta; failures flagged.

    Rows are computed independently (concurrently when jobs > 1) and always
    assembled in ascending beta order, so reports are deterministic up to
    the environment timestamp and wall-time columns.
    """
    betas = sorted(float(b) for b in beta_list)
    grid_kwargs = None
    if grid_opts is not None:
        grid_kwargs = {
            "n": grid_opts.n,
            "rmax_mult": grid_opts.rmax_mult,
            "r_max": grid_opts.r_max,
            "uniform": grid_opts.uniform,
            "rmax_min": grid_opts.rmax_min,
            "rmax_cap": grid_opts.rmax_cap,
            "core_fraction": grid_opts.core_fraction,
        }
    tasks = [(spec.to_dict(), b, tuple(ladder), grid_kwargs, tol) for b in betas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_row, tasks))
    else:
        rows = [_solve_row(t) for t in tasks]

    report = SweepReport(
        spec=spec.to_dict(),
        rows=rows,
        environment=environment_stamp(),
        extension=build_coefficients(spec).extension_descriptor(),
    )
    good = report.good_rows()
    if len(good) >= 3:
        report.checks = {
            "monotone": check_monotone(good),
            "concave": check_concavity(good),
        }
    if spec.delta == 0.0 and good:
        ceiling = spec.lambda_plateau
        report.checks["below_ceiling"] = bool(
            all(r.lambda_ <= ceiling + 1e-6 + r.error_estimate for r in good)
        )
        det = detect_plateau(good, spec)
        report.plateau = det.to_dict() if det is not None else None
    regime = certificates.certificate_regime(spec)
    try:
        if regime == certificates.STRONG_DRIFT and len(good) >= 4:
            report.fits["strong_drift"] = fit_strong_drift(good, spec).to_dict()
        elif (
            regime == certificates.MODERATE_GAP
            and spec.potential_kind == INVERSE_POWER
            and len(good) >= 4
        ):
            report.fits["moderate_gap"] = fit_moderate_gap(good, spec).to_dict()
    except (InsufficientSpanError, GapUnderflowError) as exc:
        report.fits["error"] = f"{type(exc).__name__}: {exc}"
    return report


# -- fits ---------------------------------------------------------------------


def _fit_window(rows) -> list:
    """Rows in the top half of the swept log-beta range, at least 3 of them."""
    rows = sorted(rows, key=lambda r: r.beta)
    logs = np.log10([r.beta for r in rows])
    mid = 0.5 * (logs[0] + logs[-1])
    window = [r for r, lb in zip(rows, logs) if lb >= mid - 1e-12]
    if len(window) < 3:
        window = rows[-min(3, len(rows)) :]
    return window


def _loglog_fit(x, y):
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2


@dataclass(frozen=True)
class StrongDriftFit:
    exponent: float
    prefactor: float
    r_squared: float
    target_exponent: float
    target_prefactor: float
    window: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "target_exponent": self.target_exponent,
            "target_prefactor": self.target_prefactor,
            "window": list(self.window),
        }


def fit_strong_drift(rows, spec: ProblemSpec) -> StrongDriftFit:
    """Free log-log fit of lambda(beta); compare against the growth law."""
    if not spec.delta > 0:
        raise ValueError("fit_strong_drift requires delta > 0")
    rows = [r for r in rows if r.failure is None]
    if len(rows) < 4:
        raise InsufficientSpanError("need at least 4 rows")
    betas = np.array(sorted(r.beta for r in rows))
    if np.log10(betas[-1] / betas[0]) < 3.0 - 1e-9:
        raise InsufficientSpanError("need at least 3 decades of beta")
    window = _fit_window(rows)
    x = np.array([r.beta for r in window])
    y = np.array([r.lambda_ for r in window])
    slope, intercept, r2 = _loglog_fit(x, y)
    ms = spec.m_star
    dms = spec.delta * ms
    return StrongDriftFit(
        exponent=slope,
        prefactor=math.exp(intercept),
        r_squared=r2,
        target_exponent=dms / (dms + spec.eta),
        target_prefactor=certificates.c0_constant(spec),
        window=tuple(float(b) for b in x),
    )


@dataclass(frozen=True)
class ModerateGapFit:
    rate: float
    c1_estimate: float
    intercept_prefactor: float
    r_squared: float
    target_rate: float
    target_c1: float
    window: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "c1_estimate": self.c1_estimate,
            "intercept_prefactor": self.intercept_prefactor,
            "r_squared": self.r_squared,
            "target_rate": self.target_rate,
            "target_c1": self.target_c1,
            "window": list(self.window),
        }


def fit_moderate_gap(rows, spec: ProblemSpec) -> ModerateGapFit:
    """Fit log(ceiling - lambda) vs log beta in the strict-gap regime.

    The free slope validates the decay rate 1/(eta-1).  The amplitude
    c1_estimate is the theory-rate rescaling beta^(1/(eta-1)) * gap at the
    deepest swept beta (where the limit is most converged); the raw
    exp(intercept) of the free fit is also reported for reference.
    """
    if certificates.certificate_regime(spec) != certificates.MODERATE_GAP:
        raise ValueError("fit_moderate_gap requires the strict-gap regime")
    if spec.potential_kind != INVERSE_POWER:
        raise ValueError("the gap rate law holds for the inverse-power tail only")
    rows = sorted((r for r in rows if r.failure is None), key=lambda r: r.beta)
    if len(rows) < 4:
        raise InsufficientSpanError("need at least 4 rows")
    ceiling = spec.lambda_plateau
    window = _fit_window(rows)
    gaps = np.array([ceiling - r.lambda_ for r in window])
    errs = np.array([r.error_estimate if math.isfinite(r.error_estimate) else 0.0 for r in window])
    if np.any(gaps <= errs):
        raise GapUnderflowError(
            "lambda within solver error of the ceiling; misclassified spec or "
            "beta too large for the grid"
        )
    x = np.array([r.beta for r in window])
    slope, intercept, r2 = _loglog_fit(x, gaps)
    rate_theory = 1.0 / (spec.eta - 1.0)
    return ModerateGapFit(
        rate=-slope,
        c1_estimate=float(gaps[-1] * x[-1] ** rate_theory),
        intercept_prefactor=math.exp(intercept),
        r_squared=r2,
        target_rate=rate_theory,
        target_c1=certificates.c1_constant(spec),
        window=tuple(float(b) for b in x),
    )


# -- plateau detection ----------------------------------------------------------


@dataclass(frozen=True)
class PlateauDetection:
    beta0_estimate: float
    plateau_value: float
    n_rows: int

    def to_dict(self) -> dict:
        return {
            "beta0_estimate": self.beta0_estimate,
            "plateau_value": self.plateau_value,
            "n_rows": self.n_rows,
        }


def detect_plateau(rows, spec: ProblemSpec, tol: float = 1e-3) -> PlateauDetection | None:
    """Earliest swept beta from which lambda sits at the ceiling and stays.

    A row qualifies when lambda >= ceiling - tol.  "Stays there" requires
    confirmation: every later row must qualify too, at least one later row
    must exist, and the later rows must not keep climbing -- the rise past
    the candidate must stay within the error estimates, a quarter of the
    candidate's own remaining distance to the ceiling, or tol/40, whichever
    is largest.  A strict-gap spectral function eventually grazes any fixed
    tolerance band, but each of its subsequent rises recovers most of the
    remaining gap, so it never confirms.  Larger tol never yields a larger
    beta0.
    """
    if spec.delta != 0.0:
        raise ValueError("plateau detection applies to moderate drift only")
    rows = sorted((r for r in rows if r.failure is None), key=lambda r: r.beta)
    ceiling = spec.lambda_plateau
    for i, row in enumerate(rows[:-1]):
        if row.lambda_ < ceiling - tol:
            continue
        tail = rows[i + 1 :]
        if any(t.lambda_ < ceiling - tol for t in tail):
            continue
        err_i = row.error_estimate if math.isfinite(row.error_estimate) else 0.0
        err_tail = max(
            (t.error_estimate if math.isfinite(t.error_estimate) else 0.0)
            for t in tail
        )
        slack = max(
            err_i + err_tail + 1e-8,
            0.25 * max(ceiling - row.lambda_, 0.0),
            tol / 40.0,
        )
        if max(t.lambda_ for t in tail) - row.lambda_ <= slack:
            values = [row.lambda_] + [t.lambda_ for t in tail]
            return PlateauDetection(
                beta0_estimate=row.beta,
                plateau_value=float(np.mean(values)),
                n_rows=len(values),
            )
    return None


# -- structural checks ----------------------------------------------------------


def check_monotone(rows) -> bool:
    """lambda nondecreasing in beta within 1e-8 plus the error estimates."""
    rows = sorted(rows, key=lambda r: r.beta)
    for a, b in zip(rows, rows[1:]):
        ea = a.error_estimate if math.isfinite(a.error_estimate) else 0.0
        eb = b.error_estimate if math.isfinite(b.error_estimate) else 0.0
        if b.lambda_ < a.lambda_ - (1e-8 + ea + eb):
            return False
    return True


def check_concavity(rows) -> bool:
    """All second divided differences nonpositive within propagated errors."""
    rows = sorted(rows, key=lambda r: r.beta)
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        h1 = b.beta - a.beta
        h2 = c.beta - b.beta
        H = c.beta - a.beta
        d2 = ((c.lambda_ - b.lambda_) / h2 - (b.lambda_ - a.lambda_) / h1) / H
        ea, eb, ec = (
            r.error_estimate if math.isfinite(r.error_estimate) else 0.0
            for r in (a, b, c)
        )
        bound = (ec / h2 + eb * (1.0 / h1 + 1.0 / h2) + ea / h1) / H
        if d2 > bound + 1e-12:
            return False
    return True


# -- persistence ----------------------------------------------------------------


def validate_report_dict(d: dict) -> None:
    """Structural check of the documented JSON layout; raises ValueError."""
    required = {"schema_version", "spec", "rows"}
    missing = required - set(d)
    if missing:
        raise ValueError(f"report missing keys: {sorted(missing)}")
    if d["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {d['schema_version']!r}")
    if not isinstance(d["rows"], list):
        raise ValueError("rows must be a list")
    row_keys = {"beta", "lambda", "err", "lower_bound"}
    for i, row in enumerate(d["rows"]):
        if not row_keys <= set(row):
            raise ValueError(f"row {i} missing keys {sorted(row_keys - set(row))}")


def json_default(obj):
    """Coerce numpy scalars/arrays for json.dumps."""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=json_default) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: SweepReport, path, fmt: str = "json") -> Path:
    """Persist a report atomically as JSON (full) or CSV (row table)."""
    path = Path(path)
    try:
        if fmt == "json":
            _atomic_write(path, dumps(report.to_dict()))
        elif fmt == "csv":
            lines = [",".join(CSV_COLUMNS)]
            for r in report.rows:
                lines.append(
                    ",".join(
                        _fmt17(v)
                        for v in (r.beta, r.lambda_, r.error_estimate, r.lower_bound, r.seconds)
                    )
                )
            _atomic_write(path, "\n".join(lines) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"writing report to {path}: {exc}") from exc
    return path


def _fmt17(v: float) -> str:
    return f"{v:.17g}"


def read_report(path) -> SweepReport:
    """Load a JSON report (validating) or a CSV row table."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv" or text.lstrip().startswith("beta"):
        rows = []
        lines = [ln for ln in text.splitlines() if ln.strip()]
        for ln in lines[1:]:
            vals = ln.split(",")
            rows.append(
                SweepRow(
                    beta=float(vals[0]),
                    lambda_=float(vals[1]),
                    error_estimate=float(vals[2]),
                    lower_bound=float(vals[3]),
                    seconds=float(vals[4]) if len(vals) > 4 else 0.0,
                )
            )
        return SweepReport(spec={}, rows=rows)
    return SweepReport.from_dict(json.loads(text))


def default_report_name(spec: ProblemSpec, fmt: str = "json") -> str:
    from .model import spec_digest

    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"sweep_{spec_digest(spec)}_{stamp}.{fmt}"
