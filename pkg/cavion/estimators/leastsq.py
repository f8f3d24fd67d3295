"""
Damped Least Squares
Levenberg-Marquardt minimization of sum(((y - f(x; theta)) / sigma)^2).

Damping scales with diag(J^T J), and step size, singularity and covariance
are all judged in the Jacobi-scaled parameter space, so parameters with very
different units (watts next to probabilities) fit together.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import FitInputError

FIT_RESULT_VERSION = 1
MAX_ITERATIONS = 200
TOLERANCE = 1e-8
# scaled normal matrix with a larger condition number counts as singular
SINGULAR_CONDITION = 1e13


@dataclass(frozen=True)
class Model:
    """A parametric curve with an optional analytic Jacobian."""
    name: str
    param_names: Tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def __call__(self, x, theta) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float), np.asarray(theta, dtype=float))

    def jacobian(self, x, theta) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.jac is not None:
            return self.jac(x, theta)
        return finite_difference_jacobian(self.func, x, theta)


def finite_difference_jacobian(func, x, theta, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences, one column per parameter."""
    theta = np.asarray(theta, dtype=float)
    columns = []
    for i in range(theta.size):
        h = rel_step * max(abs(theta[i]), 1e-12)
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        columns.append((func(x, up) - func(x, down)) / (2.0 * h))
    return np.column_stack(columns)


@dataclass
class FitResult:
    """Estimates with covariance from the linearized residuals at the optimum."""
    model: str
    param_names: Tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    chi2: float = float("nan")
    dof: int = 0
    p_value: float = float("nan")
    message: str = ""
    derived: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    def _index(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise KeyError(f"{self.model} has no parameter {name!r}")

    def value(self, name: str) -> float:
        if name in self.derived:
            return self.derived[name][0]
        return float(self.params[self._index(name)])

    def error(self, name: str) -> float:
        if name in self.derived:
            return self.derived[name][1]
        i = self._index(name)
        var = self.covariance[i, i]
        return float(np.sqrt(var)) if var >= 0 else float("nan")

    @property
    def values(self) -> Dict[str, float]:
        return {n: float(v) for n, v in zip(self.param_names, self.params)}

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def to_dict(self) -> dict:
        names = list(self.param_names) + list(self.derived)
        return {
            "version": FIT_RESULT_VERSION,
            "model": self.model,
            "params": {n: {"value": self.value(n), "error": self.error(n)} for n in names},
            "covariance": self.covariance.tolist(),
            "residual_norm": self.residual_norm,
            "chi2": self.chi2,
            "dof": self.dof,
            "p_value": self.p_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
            "flags": list(self.flags),
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True), encoding="utf-8")
        return path


def _validate(model: Model, x, y, sigma, init):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.broadcast_to(np.asarray(1.0 if sigma is None else sigma, dtype=float), y.shape)
    init = np.asarray(init, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise FitInputError("x and y lengths differ")
    if init.size != model.n_params:
        raise FitInputError(f"{model.name} needs {model.n_params} initial values, got {init.size}")
    for label, arr in (("x", x), ("y", y), ("sigma", sigma), ("init", init)):
        if not np.all(np.isfinite(arr)):
            raise FitInputError(f"non-finite values in {label}")
    if y.size < model.n_params:
        raise FitInputError(f"{model.name} needs at least {model.n_params} points, got {y.size}")
    if np.any(sigma <= 0):
        raise FitInputError("sigma must be > 0")
    return x, y, np.array(sigma), init


def _scaled_inverse(a: np.ndarray):
    """Inverse of a symmetric normal matrix via Jacobi scaling; None when singular."""
    d = np.sqrt(np.diag(a))
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        return None
    scaled = a / np.outer(d, d)
    if np.linalg.cond(scaled) > SINGULAR_CONDITION:
        return None
    try:
        inv = np.linalg.inv(scaled)
    except np.linalg.LinAlgError:
        return None
    cov = inv / np.outer(d, d)
    return 0.5 * (cov + cov.T)


def fit_least_squares(model: Model, x, y, sigma, init: Sequence[float],
                      max_iterations: int = MAX_ITERATIONS, tolerance: float = TOLERANCE) -> FitResult:
    """
    Levenberg-Marquardt fit of model to (x, y, sigma).

    Converged when both the relative step and the relative cost change fall
    below `tolerance`. A singular normal matrix returns the current estimate
    with converged=False and a NaN covariance.

    Raises:
        FitInputError: NaN/inf in the data, too few points, sigma <= 0
    """
    x, y, sigma, theta = _validate(model, x, y, sigma, init)
    n, k = y.size, theta.size

    def residuals(t):
        return (y - model(x, t)) / sigma

    r = residuals(theta)
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise FitInputError(f"{model.name} is not finite at the initial parameters")
    lam = 1e-3
    converged = False
    singular = False
    message = "iteration limit reached"
    iterations = 0
    cost_floor = 1e-28 * n

    for iterations in range(1, max_iterations + 1):
        jac = model.jacobian(x, theta) / sigma[:, None]
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(a), np.finfo(float).eps)
        scale = np.sqrt(diag)

        improved = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                singular = True
                break
            trial = theta + step
            r_new = residuals(trial)
            new_cost = float(r_new @ r_new)
            if np.isfinite(new_cost) and new_cost <= cost:
                improved = True
                break
            lam *= 10.0
        if singular:
            message = "singular normal equations"
            break
        if not improved:
            # no downhill step at any damping: already at the minimum
            converged = True
            message = "no further improvement"
            break

        rel_step = np.linalg.norm(scale * step) / (np.linalg.norm(scale * theta) + tolerance)
        rel_cost = abs(cost - new_cost) / max(cost, cost_floor)
        theta, r, cost = trial, r_new, new_cost
        lam = max(lam / 10.0, 1e-12)
        if rel_step < tolerance and (rel_cost < tolerance or cost <= cost_floor):
            converged = True
            message = "converged"
            break

    jac = model.jacobian(x, theta) / sigma[:, None]
    covariance = _scaled_inverse(jac.T @ jac)
    if covariance is None:
        covariance = np.full((k, k), np.nan)
        converged = False
        message = "singular normal equations"

    dof = n - k
    return FitResult(
        model=model.name,
        param_names=tuple(model.param_names),
        params=theta,
        covariance=covariance,
        residual_norm=float(np.sqrt(cost)),
        iterations=iterations,
        converged=converged,
        chi2=cost,
        dof=dof,
        p_value=float(stats.chi2.sf(cost, dof)) if dof > 0 else float("nan"),
        message=message,
    )
