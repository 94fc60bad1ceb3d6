"""Pressure and flow estimators with their evaluation metrics.

Pressures are recovered by successive convex approximation of

    min_{p >= 0}  ||W p - y|| + lambda g(p),   W = I - Dbar_S U U^T,

where ``g`` measures how far the flows implied by ``p`` are from satisfying
mass balance.  Flows are recovered in closed form from a quadratic
data-fit plus conservation penalty.

Sign convention follows :mod:`wdntsp.hydraulics`: the head drop along the
edges is ``s = -B1^T p`` and the implied flows are
``f = C^(-1/alpha) sign(s) |s|^(1/alpha)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericalError, RecoveryError
from .sampling import MAX_CONDITION, SamplingSet, interpolation_operator

DIFF_FLOOR = 1e-12
MIN_EIG = 1e-10


def nmse(estimate, truth) -> float:
    """``||estimate - truth||^2 / ||truth||^2``."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    den = float(tru @ tru)
    if den == 0.0:
        raise ValueError("NMSE is undefined for an all-zero truth")
    diff = est - tru
    return float(diff @ diff) / den


# ---------------------------------------------------------------- penalty g


def implied_flows(p, B1, C, alpha) -> np.ndarray:
    s = -(B1.T @ p)
    return C ** (-1.0 / alpha) * np.sign(s) * np.abs(s) ** (1.0 / alpha)


def g_value_grad(p, b1, C, alpha, d):
    """Conservation penalty ``g(p) = ||B1 f(p) - d||`` and its gradient.

    Returns ``(value, gradient, converged)``.  Head drops smaller than
    1e-12 in magnitude are floored before the negative power.  When the
    penalty is exactly zero the gradient is undefined; a zero vector is
    returned with ``converged=True``.
    """
    B1 = np.asarray(getattr(b1, "entries", b1), dtype=float)
    p = np.asarray(p, dtype=float)
    C = np.asarray(C, dtype=float)
    d = np.asarray(d, dtype=float)
    r = B1 @ implied_flows(p, B1, C, alpha) - d
    val = float(np.linalg.norm(r))
    if val == 0.0:
        return 0.0, np.zeros_like(p), True
    s = np.maximum(np.abs(B1.T @ p), DIFF_FLOOR)
    w = C ** (-1.0 / alpha) * s ** (1.0 / alpha - 1.0)
    grad = -(B1 @ (w * (B1.T @ r))) / (alpha * val)
    return val, grad, False


# ---------------------------------------------------------------- subproblem


@dataclass(frozen=True)
class ScaConfig:
    lam: float = 1.0
    tau: float = 0.2
    gamma0: float = 1.0
    alpha_bar: float = 1e-2
    max_outer: int = 500
    tol_outer: float = 1e-6
    smoothing_mu: float = 1e-6
    sub_tol: float = 1e-9
    sub_max_iter: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if not 0 < self.gamma0 <= 1:
            raise ValueError("gamma0 must lie in (0, 1]")
        if not 0 < self.alpha_bar < 1.0 / self.gamma0:
            raise ValueError("alpha_bar must lie in (0, 1/gamma0)")
        if self.max_outer < 1 or self.sub_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        if self.tol_outer <= 0 or self.sub_tol <= 0 or self.smoothing_mu <= 0:
            raise ValueError("tolerances and mu must be positive")


def _smoothed_norm(r, mu):
    return math.sqrt(float(r @ r) + mu * mu)


def solve_subproblem(p_nu, grad, W, y, lam, tau, mu=1e-6, tol=1e-9, max_iter=200):
    """Minimise ``sqrt(||Wp - y||^2 + mu^2) + lam grad.(p - p_nu) + tau ||p - p_nu||^2``
    over ``p >= 0``.

    Projected Newton with an Armijo search along the projection arc.
    Coordinates pinned at zero with a positive gradient are held fixed and
    the Newton system is solved on the rest.  Stops when the projected
    gradient ``||p - max(p - grad F, 0)||_inf`` is below ``tol`` or when the
    step drops to rounding level, ``1e-13 (1 + ||p||_inf)``: close to
    ``Wp = y`` the smoothed norm amplifies rounding in the residual by
    ``1/mu`` and the gradient cannot be resolved further.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    p_nu = np.asarray(p_nu, dtype=float)
    lin = lam * np.asarray(grad, dtype=float)
    W = np.asarray(W, dtype=float)
    y = np.asarray(y, dtype=float)
    n = p_nu.shape[0]

    def value(p):
        dp = p - p_nu
        return _smoothed_norm(W @ p - y, mu) + lin @ dp + tau * float(dp @ dp)

    p = np.maximum(p_nu, 0.0)
    f = value(p)
    for it in range(max_iter + 1):
        r = W @ p - y
        rho = _smoothed_norm(r, mu)
        v = W.T @ r
        gradF = v / rho + lin + 2.0 * tau * (p - p_nu)
        res = float(np.max(np.abs(p - np.maximum(p - gradF, 0.0))))
        if res <= tol:
            return p
        if it == max_iter:
            break
        pinned = (p <= 1e-12) & (gradF > 0)
        free = ~pinned
        d = np.zeros(n)
        d[pinned] = -gradF[pinned]
        if free.any():
            Wf = W[:, free]
            H = Wf.T @ Wf / rho - np.outer(v[free], v[free]) / rho ** 3
            H[np.diag_indices_from(H)] += 2.0 * tau
            d[free] = -np.linalg.solve(H, gradF[free])
        t = 1.0
        for _ in range(60):
            p_try = np.maximum(p + t * d, 0.0)
            f_try = value(p_try)
            if f_try <= f + 1e-4 * float(gradF @ (p_try - p)):
                break
            t *= 0.5
        else:
            # Armijo cannot resolve progress below rounding; accept if no worse
            if f_try > f:
                break
        moved = float(np.max(np.abs(p_try - p)))
        p, f = p_try, f_try
        if moved <= 1e-13 * (1.0 + float(np.max(np.abs(p)))):
            return p
    raise NumericalError(f"subproblem did not reach tol {tol:g} in {max_iter} iterations",
                         residual=res)


# ---------------------------------------------------------------- SCA


@dataclass
class ReconReport:
    estimate: np.ndarray
    nmse: float | None
    cost_trace: list[float]
    config: dict
    sampling: tuple[int, ...]
    surrogate_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    fit_term: float | None = None
    conservation_term: float | None = None

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "nmse": self.nmse,
            "iterations": self.iterations,
            "converged": self.converged,
            "fit_term": self.fit_term,
            "conservation_term": self.conservation_term,
            "sampling": list(self.sampling),
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    def write(self, prefix) -> None:
        """Write ``<prefix>.json``, ``<prefix>_estimate.csv`` and ``<prefix>_trace.csv``."""
        prefix = str(prefix)
        with open(prefix + ".json", "w") as fh:
            fh.write(self.to_json() + "\n")
        with open(prefix + "_estimate.csv", "w") as fh:
            fh.write("index,value\n")
            for i, v in enumerate(self.estimate):
                fh.write(f"{i},{format(float(v), '.17g')}\n")
        with open(prefix + "_trace.csv", "w") as fh:
            fh.write("iteration,cost\n")
            for i, v in enumerate(self.cost_trace):
                fh.write(f"{i},{format(float(v), '.17g')}\n")


def initial_point(p_obs, S: SamplingSet, seed: int = 0) -> np.ndarray:
    """Observed values on ``S``, uniform draws in their range elsewhere."""
    p_obs = np.asarray(p_obs, dtype=float)
    mask = S.mask(p_obs.shape[0])
    obs = p_obs[mask]
    lo, hi = max(float(obs.min()), 0.0), max(float(obs.max()), 0.0)
    rng = np.random.default_rng(seed)
    p0 = rng.uniform(lo, hi, size=p_obs.shape[0]) if hi > lo else np.full(p_obs.shape[0], hi)
    p0[mask] = obs
    return np.maximum(p0, 0.0)


def sca_reconstruct_pressure(p_obs, S: SamplingSet, U_K, b1, C, alpha, d,
                             config: ScaConfig = ScaConfig(), truth=None,
                             p0=None) -> ReconReport:
    """Successive convex approximation for node heads.

    Each outer step solves the strongly convex surrogate (data term plus
    linearised penalty plus proximal term) and moves towards its minimiser
    by ``min(1, kappa gamma)``, where ``gamma <- gamma (1 - alpha_bar gamma)``
    is the diminishing schedule and ``kappa`` adapts to the surrogate's
    behaviour: halved when the direction reverses (overshoot), doubled when
    it persists.  ``cost_trace`` records the smoothed objective
    ``sqrt(||Wp - y||^2 + mu^2) + lambda g(p)``; a step that would raise it
    is halved for that iteration, so the trace never increases.
    ``surrogate_trace`` holds the surrogate value at each accepted iterate.
    """
    B1 = np.asarray(getattr(b1, "entries", b1), dtype=float)
    U = np.asarray(U_K, dtype=float)
    N = B1.shape[0]
    p_obs = np.asarray(p_obs, dtype=float)
    if p_obs.shape[0] != N or U.shape[0] != N:
        raise ValueError("observation, basis and network sizes disagree")
    W = interpolation_operator(S, U)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise RecoveryError(f"interpolation operator is ill-conditioned (cond={cond:.3e}); "
                            "add samples or shrink the band")
    mask = S.mask(N)
    y = np.where(mask, p_obs, 0.0)
    cfg = config
    mu = cfg.smoothing_mu

    def objective(p):
        gv = g_value_grad(p, B1, C, alpha, d)[0] if cfg.lam > 0 else 0.0
        return _smoothed_norm(W @ p - y, mu) + cfg.lam * gv

    p = initial_point(p_obs, S, cfg.seed) if p0 is None else np.maximum(np.asarray(p0, float), 0.0)
    cost = objective(p)
    trace = [cost]
    surrogate = []
    gamma = cfg.gamma0
    kappa = 1.0
    prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        if cfg.lam > 0:
            _, grad, _ = g_value_grad(p, B1, C, alpha, d)
        else:
            grad = np.zeros(N)
        try:
            p_hat = solve_subproblem(p, grad, W, y, cfg.lam, cfg.tau, mu,
                                     cfg.sub_tol, cfg.sub_max_iter)
        except NumericalError as exc:
            raise NumericalError(f"outer iteration {it}: {exc}", residual=exc.residual,
                                 trace=trace) from exc
        direction = p_hat - p
        if prev is not None:
            # the surrogate flipping direction means the step overshoots
            kappa = 0.5 * kappa if float(direction @ prev) < 0.0 else min(1.0 / gamma, 2.0 * kappa)
        step = min(1.0, gamma * kappa)
        for _ in range(60):
            p_new = p + step * direction
            new_cost = objective(p_new)
            if new_cost <= cost:
                break
            step *= 0.5
        else:
            p_new, new_cost = p, cost
        dp = p_new - p
        prev = direction
        surrogate.append(_smoothed_norm(W @ p_new - y, mu) + cfg.lam * float(grad @ dp)
                         + cfg.tau * float(dp @ dp))
        change = float(np.max(np.abs(dp)))
        p, cost = p_new, new_cost
        trace.append(cost)
        gamma = gamma * (1.0 - cfg.alpha_bar * gamma)
        if change <= cfg.tol_outer:
            converged = True
            break

    est = np.maximum(p, 0.0)
    gv = g_value_grad(est, B1, C, alpha, d)[0]
    return ReconReport(
        estimate=est,
        nmse=None if truth is None else nmse(est, truth),
        cost_trace=trace,
        config=asdict(cfg),
        sampling=S.indices,
        surrogate_trace=surrogate,
        iterations=it,
        converged=converged,
        fit_term=float(np.linalg.norm(W @ est - y)),
        conservation_term=gv,
    )


# ---------------------------------------------------------------- flows


@dataclass(frozen=True)
class FlowEstimate:
    estimate: np.ndarray
    fit_term: float
    conservation_term: float
    clamped: int


def flow_terms(f, W, y, B1, d) -> tuple[float, float]:
    """Mean-square data misfit over edges and mean-square imbalance over nodes."""
    fit = W @ f - y
    cons = B1 @ f - d
    return float(fit @ fit) / len(fit), float(cons @ cons) / len(cons)


def reconstruct_flow(f_obs, F: SamplingSet, U_M, b1, d, beta: float = 0.3) -> FlowEstimate:
    """Closed-form flow estimate ``max(M^{-1}(W^T y + beta B1^T d), 0)``.

    ``M = W^T W + beta B1^T B1`` with ``W = I - Dbar_F U U^T``.  The
    elementwise clamp is applied after the unconstrained solve.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    B1 = np.asarray(getattr(b1, "entries", b1), dtype=float)
    U = np.asarray(U_M, dtype=float)
    f_obs = np.asarray(f_obs, dtype=float)
    d = np.asarray(d, dtype=float)
    E = B1.shape[1]
    if f_obs.shape[0] != E or U.shape[0] != E or d.shape[0] != B1.shape[0]:
        raise ValueError("observation, basis, incidence and demand sizes disagree")
    W = interpolation_operator(F, U)
    y = np.where(F.mask(E), f_obs, 0.0)
    M = W.T @ W + beta * (B1.T @ B1)
    lam_min = float(np.linalg.eigvalsh(M)[0])
    if lam_min <= MIN_EIG:
        raise RecoveryError(f"normal matrix is singular (min eigenvalue {lam_min:.3e}); "
                            "use beta > 0 or sample more edges")
    raw = np.linalg.solve(M, W.T @ y + beta * (B1.T @ d))
    est = np.maximum(raw, 0.0)
    fit, cons = flow_terms(est, W, y, B1, d)
    return FlowEstimate(est, fit, cons, int(np.sum(raw < 0)))
