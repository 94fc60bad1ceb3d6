"""Head-loss laws and the steady-state network solver used as ground truth.

Sign convention: with the head=+1 incidence matrix, ``B1 @ f`` is the net
inflow of every node and ``-(B1.T @ p)`` is the head drop along every edge
(tail minus head).  Steady state therefore reads

    B1 f = d            (mass, junction rows)
    -B1^T p = C h(f)    (energy, every edge)

with ``h(f) = |f|^(alpha-1) f``.  Fixed-head nodes (reservoirs, tanks) drop
out of the unknowns; the flow they inject is reported as a negative demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import NumericalError, StructuralError
from .network import ACTIVE_EDGE_KINDS, Network
from .topology import build_b1

GRAVITY = 9.80665
HW_SI = 10.667
HW_US = 4.727
LAWS = {"darcy_weisbach": 2.0, "hazen_williams": 1.852}
JACOBIAN_FLOOR = 1e-8


@dataclass(frozen=True)
class HeadLossModel:
    law: str
    alpha: float
    c: np.ndarray

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown head-loss law {self.law!r}")
        if self.alpha != LAWS[self.law]:
            raise ValueError(f"{self.law} requires alpha={LAWS[self.law]}, got {self.alpha}")
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or not np.all(c > 0) or not np.all(np.isfinite(c)):
            raise ValueError("resistances must be a vector of positive finite numbers")
        object.__setattr__(self, "c", c)

    @classmethod
    def from_network(cls, network: Network, law: str = "hazen_williams",
                     friction_factor: float = 0.02, hw_constant: float = HW_SI) -> "HeadLossModel":
        """Per-pipe resistances of the passive edges, in network edge order.

        Hazen-Williams uses ``k L / (D^4.871 C^1.852)`` with the pipe roughness
        as C; Darcy-Weisbach uses ``8 f L / (g pi^2 D^5)`` with a constant
        friction factor ``f``.
        """
        law = normalize_law(law)
        c = []
        for e in network.edges:
            if e.kind in ACTIVE_EDGE_KINDS:
                continue
            if e.length <= 0 or e.diameter <= 0:
                raise StructuralError(f"pipe {e.id!r} needs positive length and diameter")
            if law == "hazen_williams":
                if e.roughness <= 0:
                    raise StructuralError(f"pipe {e.id!r} needs a positive H-W roughness")
                c.append(hw_constant * e.length / (e.diameter ** 4.871 * e.roughness ** 1.852))
            else:
                c.append(8.0 * friction_factor * e.length
                         / (GRAVITY * math.pi ** 2 * e.diameter ** 5))
        return cls(law, LAWS[law], np.array(c))


def normalize_law(law: str) -> str:
    key = law.lower().replace("-", "_")
    aliases = {"hw": "hazen_williams", "dw": "darcy_weisbach"}
    key = aliases.get(key, key)
    if key not in LAWS:
        raise ValueError(f"unknown head-loss law {law!r}")
    return key


def head_loss(f, model: HeadLossModel) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return model.c * np.abs(f) ** (model.alpha - 1.0) * f


def head_loss_derivative(f, model: HeadLossModel) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return model.alpha * model.c * np.abs(f) ** (model.alpha - 1.0)


@dataclass(frozen=True)
class HydraulicState:
    """Converged steady state.

    ``demand`` is the net node demand consistent with ``B1 @ flows``:
    junction consumptions plus the (negative) injections of fixed-head nodes.
    """

    flows: np.ndarray
    heads: np.ndarray
    demand: np.ndarray
    residual_mass: float
    residual_energy: float
    iterations: int
    law: str = ""
    alpha: float = float("nan")

    def pressures(self, network: Network) -> np.ndarray:
        return self.heads - network.elevations()


def _residuals(B1, f, p, d, junctions, model):
    mass = (B1 @ f - d)[junctions]
    energy = B1.T @ p + head_loss(f, model)
    return mass, energy


def solve_steady_state(network: Network, model: HeadLossModel, tol: float = 1e-10,
                       max_iter: int = 200, max_halvings: int = 30) -> HydraulicState:
    """Damped Newton solve of mass and energy balance.

    Flows start at 0.01 m^3/s along every edge and junction heads at the mean
    fixed head.  Each Newton step is halved until the residual 2-norm
    decreases.  The Jacobian floors ``|f|^(alpha-1)`` at 1e-8; residuals are
    always evaluated exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    active = [e.id for e in network.edges if e.kind in ACTIVE_EDGE_KINDS]
    if active:
        raise StructuralError(
            f"solver does not model active elements; remove pump/valve edges {active[:5]}")
    fixed = network.fixed_head_mask()
    if not fixed.any():
        raise StructuralError("network has no fixed-head node (reservoir or tank)")
    b1 = build_b1(network, include_active=False)
    B1 = sp.csr_matrix(b1.entries.astype(float))
    N, E = b1.shape
    if model.c.shape[0] != E:
        raise ValueError(f"model has {model.c.shape[0]} resistances for {E} edges")
    junctions = np.nonzero(~fixed)[0]
    fixed_idx = np.nonzero(fixed)[0]
    d = network.demands()
    d[fixed_idx] = 0.0

    p = np.empty(N)
    p[fixed_idx] = [network.nodes[i].fixed_head for i in fixed_idx]
    p[junctions] = p[fixed_idx].mean()
    f = np.full(E, 0.01)

    B1J = B1[junctions, :]
    nJ = len(junctions)

    def merit(mass, energy):
        return math.sqrt(float(mass @ mass + energy @ energy))

    mass, energy = _residuals(B1, f, p, d, junctions, model)
    it = 0
    for it in range(max_iter + 1):
        rm = float(np.max(np.abs(mass))) if nJ else 0.0
        re = float(np.max(np.abs(energy))) if E else 0.0
        if rm <= tol and re <= tol:
            break
        if it == max_iter:
            raise NumericalError(
                f"Newton did not converge in {max_iter} iterations "
                f"(mass {rm:.3e}, energy {re:.3e})", residual=max(rm, re))
        deriv = model.alpha * model.c * np.maximum(np.abs(f), JACOBIAN_FLOOR) ** (model.alpha - 1.0)
        J = sp.bmat([[B1J, None], [sp.diags(deriv), B1J.T]], format="csc")
        rhs = -np.concatenate([mass, energy])
        step = spsolve(J, rhs)
        if not np.all(np.isfinite(step)):
            raise NumericalError("singular Newton system", residual=max(rm, re))
        df, dp = step[:E], step[E:]
        current = merit(mass, energy)
        lam = 1.0
        for _ in range(max_halvings + 1):
            f_try = f + lam * df
            p_try = p.copy()
            p_try[junctions] += lam * dp
            m_try, e_try = _residuals(B1, f_try, p_try, d, junctions, model)
            if merit(m_try, e_try) < current:
                break
            lam *= 0.5
        f, p, mass, energy = f_try, p_try, m_try, e_try

    demand = B1 @ f
    demand[junctions] = d[junctions]
    return HydraulicState(
        flows=f, heads=p, demand=demand,
        residual_mass=float(np.max(np.abs(B1 @ f - demand))) if N else 0.0,
        residual_energy=float(np.max(np.abs(energy))) if E else 0.0,
        iterations=it, law=model.law, alpha=model.alpha)


def loop_residual(state: HydraulicState, b2, model: HeadLossModel) -> np.ndarray:
    """Head loss summed around every cell, ``B2^T C h(f)``."""
    B2 = np.asarray(getattr(b2, "entries", b2), dtype=float)
    return B2.T @ head_loss(state.flows, model)


def orient_to_flow(network: Network, state: HydraulicState):
    """Reverse every edge that carries negative flow.

    Returns ``(network', state')``.  Resistances are per edge and do not
    change; incidence matrices must be rebuilt from ``network'``.
    """
    passive = [k for k, e in enumerate(network.edges) if e.kind not in ACTIVE_EDGE_KINDS]
    if len(passive) != len(state.flows):
        raise ValueError("state does not match the network's passive edges")
    flip = {passive[j] for j in np.nonzero(state.flows < 0)[0]}
    edges = [e.reversed() if k in flip else e for k, e in enumerate(network.edges)]
    net2 = Network(network.nodes, edges, dict(network.metadata), network.warnings)
    return net2, replace(state, flows=np.abs(state.flows))
