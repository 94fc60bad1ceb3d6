"""End-to-end pipelines: simulate, build the complex, select a band, place
sensors and reconstruct.  Used by the command line and the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .hydraulics import HeadLossModel, HydraulicState, orient_to_flow, solve_steady_state
from .network import Network, generate_synthetic
from .errors import RecoveryError
from .recon import ScaConfig, nmse, reconstruct_flow, sca_reconstruct_pressure
from .sampling import maxdet_place
from .sparsify import sparse_support
from .spectral import SpectralBasis, eig_sym
from .topology import CellComplex, build_complex

FLOW_BASES = ("L1_down", "L1")


@dataclass(frozen=True)
class Scenario:
    """A network with its hydraulic ground truth and training snapshots."""

    network: Network
    model: HeadLossModel
    state: HydraulicState
    snapshots: tuple[HydraulicState, ...]


def scale_demands(network: Network, factors) -> Network:
    nodes = [replace(n, demand=n.demand * float(k)) if n.kind == "junction" else n
             for n, k in zip(network.nodes, factors)]
    return Network(nodes, network.edges, dict(network.metadata), network.warnings)


def make_scenario(network: Network, law: str = "hazen_williams", n_snapshots: int = 5,
                  seed: int = 0) -> Scenario:
    """Solve the base state plus ``n_snapshots - 1`` states with demands
    scaled per junction by factors drawn from U[0.5, 1.5]."""
    model = HeadLossModel.from_network(network, law)
    state = solve_steady_state(network, model)
    rng = np.random.default_rng(seed + 7919)
    snaps = [state]
    for _ in range(max(n_snapshots, 1) - 1):
        perturbed = scale_demands(network, rng.uniform(0.5, 1.5, network.n_nodes))
        snaps.append(solve_steady_state(perturbed, model))
    return Scenario(network, model, state, tuple(snaps))


def synthetic_scenario(seed: int, n_nodes: int = 50, loop_fraction: float = 0.4,
                       law: str = "hazen_williams", n_snapshots: int = 5) -> Scenario:
    return make_scenario(generate_synthetic(seed, n_nodes, loop_fraction), law, n_snapshots, seed)


def band(snapshots: np.ndarray, basis: SpectralBasis, epsilon_fraction: float = 0.05,
         budget: int | None = None) -> SpectralBasis:
    """Sparse spectral support of the snapshots.

    With a ``budget`` the fitting tolerance is raised, by bisection, until
    the support has at most ``budget`` elements; support size never grows
    with the tolerance, so the result is the least-error band that the
    available sensors can pin down.
    """
    norm = float(np.linalg.norm(snapshots))
    result = sparse_support(snapshots, basis, epsilon_fraction * norm)
    if budget is not None and len(result.selected) > budget:
        lo, hi = epsilon_fraction, 1.0
        best = None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            trial = sparse_support(snapshots, basis, mid * norm)
            if 0 < len(trial.selected) <= budget:
                best, hi = trial, mid
            else:
                lo = mid
            if hi - lo < 1e-9:
                break
        if best is None:
            raise RecoveryError(f"no nonempty band fits a budget of {budget}")
        result = best
    return basis.with_selection(result.selected)


def sample_budget(samples, n: int) -> int:
    """Sample count from a fraction in (0, 1] (float) or an absolute count (int)."""
    if isinstance(samples, (int, np.integer)) and not isinstance(samples, bool):
        m = int(samples)
    else:
        frac = float(samples)
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"sample fraction must lie in (0, 1], got {samples}")
        m = int(round(frac * n))
    if not 1 <= m <= n:
        raise ValueError(f"sample count {m} outside [1, {n}]")
    return m


@dataclass(frozen=True)
class PressureResult:
    nmse: float
    fit_term: float
    conservation_term: float
    iterations: int
    converged: bool
    n_samples: int
    band_size: int
    cost_trace: tuple[float, ...]
    estimate: np.ndarray
    sampling: tuple[int, ...]


def pressure_experiment(scn: Scenario, samples, lam: float = 1.0,
                        epsilon_fraction: float = 0.05, p_max: int = 30,
                        config: ScaConfig | None = None, cx: CellComplex | None = None
                        ) -> PressureResult:
    """Recover node heads from ``samples`` Max-Det nodes (fraction or count)."""
    cx = cx or build_complex(scn.network, p_max)
    basis = eig_sym(cx.laplacians.L0, "L0")
    X = np.column_stack([s.heads for s in scn.snapshots])
    N = scn.network.n_nodes
    m = sample_budget(samples, N)
    basis = band(X, basis, epsilon_fraction, budget=m)
    S = maxdet_place(basis.U_sel, m, "node", basis.selected)
    truth = scn.state.heads
    cfg = replace(config or ScaConfig(), lam=lam)
    rep = sca_reconstruct_pressure(np.where(S.mask(N), truth, 0.0), S, basis.U_sel, cx.b1,
                                   scn.model.c, scn.model.alpha, scn.state.demand, cfg, truth)
    return PressureResult(rep.nmse, rep.fit_term, rep.conservation_term, rep.iterations,
                          rep.converged, len(S), len(basis.selected), tuple(rep.cost_trace),
                          rep.estimate, S.indices)


@dataclass(frozen=True)
class FlowResult:
    nmse: float
    fit_term: float
    conservation_term: float
    n_samples: int
    band_size: int
    clamped: int
    estimate: np.ndarray
    sampling: tuple[int, ...]


def flow_setup(scn: Scenario, basis_kind: str = "L1", p_max: int = 30):
    """Orient edges along the base flow and diagonalise the edge Laplacian.

    Returns ``(complex, truth, demand, basis, snapshots)`` in the oriented
    frame; the band is chosen later, once the sample budget is known.
    """
    if basis_kind not in FLOW_BASES:
        raise ValueError(f"basis must be one of {FLOW_BASES}, got {basis_kind!r}")
    net2, st2 = orient_to_flow(scn.network, scn.state)
    sign = np.where(scn.state.flows < 0, -1.0, 1.0)
    cx = build_complex(net2, p_max)
    L = getattr(cx.laplacians, basis_kind)
    basis = eig_sym(L, basis_kind)
    X = np.column_stack([sign * s.flows for s in scn.snapshots])
    return cx, st2.flows, st2.demand, basis, X


def flow_experiment(scn: Scenario, samples, basis_kind: str = "L1",
                    beta: float = 0.3, epsilon_fraction: float = 0.05, p_max: int = 30,
                    setup=None) -> FlowResult:
    """Recover edge flows from ``samples`` Max-Det edges (fraction or count)."""
    cx, truth, demand, full, X = setup or flow_setup(scn, basis_kind, p_max)
    E = truth.shape[0]
    m = sample_budget(samples, E)
    basis = band(X, full, epsilon_fraction, budget=m)
    F = maxdet_place(basis.U_sel, m, "edge", basis.selected)
    est = reconstruct_flow(np.where(F.mask(E), truth, 0.0), F, basis.U_sel, cx.b1, demand, beta)
    return FlowResult(nmse(est.estimate, truth), est.fit_term, est.conservation_term,
                      len(F), len(basis.selected), est.clamped, est.estimate, F.indices)
