"""Bounded nonlinear least-squares identification of compliance models.

The residual vector stacks normalised real and imaginary errors over the
N_s harmonics; its RMSE is ``sqrt(sum(r**2) / N_s)``. Minimisation uses a
Levenberg-Marquardt iteration with Marquardt diagonal scaling, a gain-ratio
trust region, and an active set that freezes parameters pinned against a
bound. Several starts are run and the lowest objective is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .errors import FracompError, TooFewHarmonics, ZeroNormalizer
from .models import (
    MODEL_TAGS,
    canonical_theta,
    default_bounds_and_init,
    evaluate,
    get_model,
    _raw,
)
from .spectral import MeasuredCompliance

# models whose optimum can seed a nested model: child -> (parent, embed)
NESTED_STARTS = {
    "B": (("A", lambda th: [0.0, th[0], th[1]]),
          ("G", lambda th: [th[0], th[1], 1.0])),
    "D": (("C", lambda th: [0.0, th[0], th[1]]),),
}


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    multistart_count: int = 5
    fd_relative_step: float = 1e-6
    seed: int = 0
    strict_paper_objective: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("gradient_tolerance", "step_tolerance", "fd_relative_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.multistart_count < 1:
            raise ValueError("multistart_count must be >= 1")


@dataclass(frozen=True)
class FitResult:
    model: str
    theta_hat: tuple[float, ...]
    param_names: tuple[str, ...]
    rmse: float
    aicc: float
    deviation_pct: float
    abs_deviation_pct: float
    converged: bool
    iterations: int
    n_s: int
    objective_history: tuple[float, ...] = field(repr=False, default=())
    message: str = ""

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.param_names, self.theta_hat))

    @property
    def alpha(self) -> float | None:
        i = get_model(self.model).alpha_index
        return None if i is None else self.theta_hat[i]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "rmse": self.rmse,
            "aicc": self.aicc,
            "deviation_pct": self.deviation_pct,
            "abs_deviation_pct": self.abs_deviation_pct,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_s": self.n_s,
            "message": self.message,
            "objective_history": list(self.objective_history),
        }


@dataclass(frozen=True)
class FitFailure:
    """Marker for a model that could not be fitted to a dataset."""

    model: str
    error: str

    def to_dict(self) -> dict:
        return {"model": self.model, "error": self.error}


def _normalizers(data: MeasuredCompliance, strict: bool):
    re = data.values.real
    im = data.values.imag
    re_scale = np.max(np.abs(re))
    if re_scale == 0:
        raise ZeroNormalizer("real part of the measured compliance is identically zero")
    if strict:
        if np.any(im == 0):
            raise ZeroNormalizer("imaginary part vanishes at some harmonic (strict objective)")
        im_scale = np.abs(im)
    else:
        im_scale = np.max(np.abs(im))
        if im_scale == 0:
            raise ZeroNormalizer("imaginary part of the measured compliance is identically zero")
    return re_scale, im_scale


def _check_size(tag: str, data: MeasuredCompliance):
    p = get_model(tag).n_params
    if data.n_s < p + 2:
        raise TooFewHarmonics(
            f"model {tag} has {p} parameters and needs at least {p + 2} harmonics, "
            f"data has {data.n_s}")


def residual_function(model, data: MeasuredCompliance, strict: bool = False):
    """Return ``theta -> residual vector`` for ``model`` against ``data``."""
    tag = get_model(model).tag
    _check_size(tag, data)
    re_scale, im_scale = _normalizers(data, strict)
    s = 1j * data.angular_frequencies
    re, im = data.values.real, data.values.imag

    def fun(theta):
        # wild trial points may overflow; they are rejected by the caller
        with np.errstate(all="ignore"):
            c = _raw(tag, theta, s)
        return np.concatenate([(re - c.real) / re_scale, (im - c.imag) / im_scale])

    return fun


def rmse_from_residuals(r: np.ndarray, n_s: int) -> float:
    return math.sqrt(float(np.dot(r, r)) / n_s)


def objective(model, theta, data: MeasuredCompliance, strict: bool = False) -> float:
    """Normalised complex RMSE between ``model(theta)`` and the measured compliance."""
    tag = get_model(model).tag
    evaluate(tag, theta, data.angular_frequencies[:1])  # validates theta
    fun = residual_function(tag, data, strict)
    return rmse_from_residuals(fun(np.asarray(theta, dtype=float)), data.n_s)


def fd_jacobian(fun, x, rel_step: float = 1e-6, f0=None) -> np.ndarray:
    """Central-difference Jacobian with step ``rel_step * |x_i|`` (``rel_step`` at 0)."""
    x = np.asarray(x, dtype=float)
    h = rel_step * np.where(x != 0, np.abs(x), 1.0)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        cols.append((fun(xp) - fun(xm)) / (xp[i] - xm[i]))
    return np.column_stack(cols)


@dataclass
class _LMOutcome:
    x: np.ndarray
    r: np.ndarray
    iterations: int
    converged: bool
    history: list
    message: str


def levenberg_marquardt(fun, x0, lower, upper, *, n_s, max_iterations=500,
                        gradient_tolerance=1e-10, step_tolerance=1e-12,
                        fd_relative_step=1e-6) -> _LMOutcome:
    """Minimise ``||fun(x)||^2`` over the box ``[lower, upper]``.

    Steps are accepted only when they reduce the objective, so the
    recorded history is non-increasing.
    """
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    r = fun(x)
    cost = float(r @ r)
    if not np.isfinite(cost):
        return _LMOutcome(x, r, 0, False, [math.inf], "non-finite objective at start")
    J = fd_jacobian(fun, x, fd_relative_step)
    history = [rmse_from_residuals(r, n_s)]
    diag = np.einsum("ij,ij->j", J, J)
    mu = 1e-3 * max(float(diag.max()), 1e-300)
    nu = 2.0
    for it in range(max_iterations):
        g = J.T @ r
        pinned = ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))
        free = ~pinned
        if np.max(np.abs(g[free]), initial=0.0) <= gradient_tolerance:
            return _LMOutcome(x, r, it, True, history, "gradient tolerance reached")
        Jf = J[:, free]
        A = Jf.T @ Jf
        d = np.diag(A).copy()
        d = np.maximum(d, 1e-12 * max(float(d.max()), 1e-300))
        try:
            h = np.linalg.solve(A + mu * np.diag(d), -g[free])
        except np.linalg.LinAlgError:
            h = np.linalg.lstsq(A + mu * np.diag(d), -g[free], rcond=None)[0]
        step = np.zeros_like(x)
        step[free] = h
        x_new = np.clip(x + step, lower, upper)
        p = x_new - x
        if np.linalg.norm(p) <= step_tolerance * (np.linalg.norm(x) + step_tolerance):
            return _LMOutcome(x, r, it, True, history, "step tolerance reached")
        r_new = fun(x_new)
        with np.errstate(all="ignore"):
            cost_new = float(r_new @ r_new)
        lin = r + J @ p
        predicted = cost - float(lin @ lin)
        actual = cost - cost_new
        rho = actual / predicted if predicted > 0 and np.isfinite(cost_new) else -1.0
        if rho > 1e-4 and actual > 0:
            x, r, cost = x_new, r_new, cost_new
            J = fd_jacobian(fun, x, fd_relative_step)
            history.append(rmse_from_residuals(r, n_s))
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
        else:
            mu *= nu
            nu *= 2.0
            if not np.isfinite(mu) or mu > 1e300:
                return _LMOutcome(x, r, it + 1, False, history, "damping overflow")
    return _LMOutcome(x, r, max_iterations, False, history, "iteration limit reached")


def _starts(tag, init, lower, upper, cfg: FitConfig, extra_starts=()):
    spec = get_model(tag)
    starts = [np.clip(np.asarray(init, dtype=float), lower, upper)]
    rng = np.random.default_rng(cfg.seed)
    span = np.array([0.3 if p.kind == "order" else 1.0 for p in spec.params])
    for _ in range(cfg.multistart_count - 1):
        factor = 10.0 ** rng.uniform(-span, span)
        starts.append(np.clip(starts[0] * factor, lower, upper))
    for s in extra_starts:
        starts.append(np.clip(np.asarray(s, dtype=float), lower, upper))
    return starts


def fit(model, data: MeasuredCompliance, cfg: FitConfig | None = None, init=None,
        extra_starts=()) -> FitResult:
    """Identify ``model`` parameters from a measured apparent compliance.

    ``extra_starts`` are tried in addition to the default start and its
    random perturbations; they let nested models start from a parent optimum.
    """
    cfg = cfg or FitConfig()
    spec = get_model(model)
    tag = spec.tag
    lower, upper, default_init = default_bounds_and_init(tag)
    if init is not None:
        init = np.asarray(init, dtype=float)
        if init.size != spec.n_params:
            raise FracompError(f"init has {init.size} values, model {tag} takes {spec.n_params}")
        if np.any(init < lower) or np.any(init > upper):
            raise FracompError(f"init {init.tolist()} outside the bounds of model {tag}")
    else:
        init = default_init
    fun = residual_function(tag, data, cfg.strict_paper_objective)

    best = None
    for x0 in _starts(tag, init, lower, upper, cfg, extra_starts):
        out = levenberg_marquardt(
            fun, x0, lower, upper, n_s=data.n_s,
            max_iterations=cfg.max_iterations,
            gradient_tolerance=cfg.gradient_tolerance,
            step_tolerance=cfg.step_tolerance,
            fd_relative_step=cfg.fd_relative_step)
        obj = rmse_from_residuals(out.r, data.n_s)
        if not np.isfinite(obj):
            continue
        key = (obj, out.iterations)
        if best is None or key < best[0]:
            best = (key, out)
    if best is None:
        raise FracompError(f"model {tag}: objective is not finite at any start")
    out = best[1]
    theta = canonical_theta(tag, out.x)
    model_vals = evaluate(tag, theta, data.angular_frequencies)
    rmse = rmse_from_residuals(out.r, data.n_s)
    # -2 ln(0) -> +inf for an exact fit
    aic = metrics.aicc(rmse, spec.n_params, data.n_s) if rmse > 0 else math.inf
    return FitResult(
        model=tag,
        theta_hat=tuple(float(v) for v in theta),
        param_names=spec.param_names,
        rmse=rmse,
        aicc=aic,
        deviation_pct=metrics.deviation(model_vals, data.values),
        abs_deviation_pct=metrics.abs_deviation(model_vals, data.values),
        converged=out.converged,
        iterations=out.iterations,
        n_s=data.n_s,
        objective_history=tuple(out.history),
        message=out.message,
    )


def fit_models(data: MeasuredCompliance, models=MODEL_TAGS, cfg: FitConfig | None = None
               ) -> dict[str, FitResult | FitFailure]:
    """Fit each requested model, seeding nested models from their parents.

    Parents needed for a nested start are fitted even when not requested
    (but not returned), so a model's result never depends on which other
    models were asked for.
    """
    cfg = cfg or FitConfig()
    wanted = [get_model(m).tag for m in models]
    needed = list(wanted)
    for tag in wanted:
        for parent, _ in NESTED_STARTS.get(tag, ()):
            if parent not in needed:
                needed.append(parent)
    # parents first
    order = sorted(needed, key=lambda t: (t in NESTED_STARTS, MODEL_TAGS.index(t)))
    done: dict[str, FitResult | FitFailure] = {}
    for tag in order:
        extra = []
        for parent, embed in NESTED_STARTS.get(tag, ()):
            res = done.get(parent)
            if isinstance(res, FitResult):
                extra.append(embed(res.theta_hat))
        try:
            done[tag] = fit(tag, data, cfg, extra_starts=extra)
        except FracompError as exc:
            done[tag] = FitFailure(tag, f"{type(exc).__name__}: {exc}")
    return {tag: done[tag] for tag in wanted}


def sort_by_aicc(results) -> list:
    ok = sorted((r for r in results if isinstance(r, FitResult)),
                key=lambda r: (r.aicc, MODEL_TAGS.index(r.model)))
    failed = [r for r in results if not isinstance(r, FitResult)]
    return ok + failed


def fit_all(data: MeasuredCompliance, cfg: FitConfig | None = None,
            models=MODEL_TAGS) -> list[FitResult | FitFailure]:
    """Fit every model and return results sorted by AICc (failures last)."""
    return sort_by_aicc(fit_models(data, models, cfg).values())

