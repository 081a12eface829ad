"""Searching root configurations Z ∈ C^d for the longest lemniscate.

The objective |E(p_Z)| has square-root kinks wherever a critical value
crosses T, and the conjectured maximisers sit exactly on such kinks, so the
search is derivative-free (Nelder-Mead simplex with restarts). Translation
is gauged out by centring Z (Σ z_j = 0) before every evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist
from tqdm import tqdm

from .config_utils import config_dataclass
from .error_handling import LemniError, require
from .levelset import TraceOptions, is_connected
from .measure import length_integral
from .poly import MonicPolynomial, critical_values, from_roots

logger = logging.getLogger(__name__)


@config_dataclass("search")
class SearchOptions:
    budget: int = 2000  # objective evaluations
    restarts: int = 6  # planned restarts; the budget is shared between them
    tol: float = 1e-4  # quadrature tolerance of the objective
    perturbation: float = 0.1  # spread of perturbed restart points
    simplex_scale: float = 0.2  # initial simplex edge
    diameter_barrier: float = 8.0  # configurations wider than this are rejected unevaluated
    xatol: float = 1e-8
    fatol: float = 1e-10
    critical_tol: float = 1e-2  # critical values this close to T count as on it for connectivity
    rescore: int = 10  # best candidates re-measured at full quadrature tolerance before reporting


@dataclass(frozen=True, eq=False)
class SearchResult:
    best: MonicPolynomial
    best_length: float
    evaluations: int
    history: list[tuple[int, float]]
    critical_value_moduli: list[float]
    connected: bool
    rejected: int = 0
    options: SearchOptions = field(default_factory=SearchOptions, repr=False)

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "best_length": self.best_length,
            "evaluations": self.evaluations,
            "rejected": self.rejected,
            "critical_value_moduli": list(self.critical_value_moduli),
            "connected": self.connected,
            "history": [[i, length] for i, length in self.history],
        }


class _BudgetExhausted(Exception):
    pass


def _as_roots(x: np.ndarray, d: int) -> np.ndarray:
    z = x[:d] + 1j * x[d:]
    return z - z.mean()


def _as_vector(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag])


def _diameter(z: np.ndarray) -> float:
    return float(np.max(pdist(np.column_stack([z.real, z.imag])))) if z.size > 1 else 0.0


def restart_point(kind: int, d: int, rng: np.random.Generator, perturbation: float) -> np.ndarray:
    """0: perturbed z^d + 1, 1: perturbed z^d, 2: uniform in |z| < 1.5."""
    noise = perturbation * (rng.normal(size=d) + 1j * rng.normal(size=d))
    if kind == 0:
        return np.exp(1j * np.pi * (2 * np.arange(d) + 1) / d) + noise
    if kind == 1:
        return noise
    radius = 1.5 * np.sqrt(rng.uniform(size=d))
    return radius * np.exp(2j * np.pi * rng.uniform(size=d))


def critical_value_report(p: MonicPolynomial) -> list[float]:
    """| |a_j| − 1 | for each critical value, largest first."""
    require(p.degree >= 2, "critical values need degree at least 2")
    return sorted((abs(abs(a) - 1.0) for a in critical_values(p)), reverse=True)


def exterior_critical_values(p: MonicPolynomial) -> list[complex]:
    """Critical values of modulus above 1 (an extremal polynomial has none)."""
    if p.degree < 2:
        return []
    return [complex(a) for a in critical_values(p) if abs(a) > 1.0]


def _keep_leaders(leaders: list[tuple[float, np.ndarray]], length: float, z: np.ndarray, size: int) -> None:
    """Insert (length, z) into the descending list of the `size` longest distinct configurations."""
    for k, (_, other) in enumerate(leaders):
        if np.allclose(other, z, rtol=0.0, atol=1e-12):
            if length <= leaders[k][0]:
                return
            del leaders[k]
            break
    leaders.append((length, z))
    leaders.sort(key=lambda item: -item[0])
    del leaders[max(size, 1):]


def _rescore(leaders: list[tuple[float, np.ndarray]]) -> tuple[float, MonicPolynomial]:
    """Re-measure the leaders at the default length tolerance and keep the longest."""
    scored = []
    for rough, z in leaders:
        p = from_roots(z)
        try:
            scored.append((length_integral(p), p))
        except LemniError as exc:
            logger.warning("could not re-measure a candidate of length %.6f: %s", rough, exc)
    require(bool(scored), "no search candidate could be re-measured")
    length, best = max(scored, key=lambda item: item[0])
    logger.debug("re-measured %d leaders; best %.10f (objective said %.10f)", len(scored), length, leaders[0][0])
    return float(length), best


def search(
    d: int,
    budget: int = SearchOptions.budget,
    seed: int = 0,
    options: SearchOptions | None = None,
    start: np.ndarray | None = None,
    progress: bool = False,
) -> SearchResult:
    """Multi-start simplex search maximising |E(p_Z)|; the best point found, not a certificate."""
    options = replace(options or SearchOptions(), budget=budget)
    require(2 <= d <= 6, f"search degree must be in 2..6, got {d}")
    require(budget >= 500, f"search budget must be at least 500, got {budget}")

    state = {"evaluations": 0, "rejected": 0}
    leaders: list[tuple[float, np.ndarray]] = []
    history: list[tuple[int, float]] = []

    def objective(x: np.ndarray) -> float:
        z = _as_roots(x, d)
        if _diameter(z) > options.diameter_barrier:
            state["rejected"] += 1
            if state["rejected"] > 10 * budget:
                raise _BudgetExhausted
            return 0.0
        if state["evaluations"] >= budget:
            raise _BudgetExhausted
        state["evaluations"] += 1
        try:
            length = length_integral(from_roots(z), options.tol)
        except LemniError as exc:
            logger.warning("objective failed at %s: %s", np.array2string(z, precision=4), exc)
            state["rejected"] += 1
            return 0.0
        history.append((state["evaluations"], length))
        _keep_leaders(leaders, length, z, options.rescore)
        return -length

    per_restart = max(budget // options.restarts, 2 * d + 2)
    n = 2 * d
    restart = 0
    with tqdm(total=budget, desc=f"Searching degree {d}", unit="eval", disable=not progress) as bar:
        while state["evaluations"] < budget:
            rng = np.random.default_rng([seed, restart])
            if restart == 0 and start is not None:
                z0 = np.asarray(start, dtype=complex)
            else:
                z0 = restart_point(restart % 3, d, rng, options.perturbation)
            x0 = _as_vector(z0 - z0.mean())
            simplex = np.vstack([x0, x0 + options.simplex_scale * np.eye(n)])
            before = state["evaluations"]
            try:
                minimize(
                    objective,
                    x0,
                    method="Nelder-Mead",
                    options={
                        "maxfev": min(per_restart, budget - before),
                        "xatol": options.xatol,
                        "fatol": options.fatol,
                        "initial_simplex": simplex,
                    },
                )
            except _BudgetExhausted:
                pass
            bar.update(state["evaluations"] - before)
            logger.debug("restart %d: best so far %.8f", restart, leaders[0][0] if leaders else float("nan"))
            restart += 1
            if state["rejected"] > 10 * budget:
                break

    require(bool(leaders), "search found no admissible configuration")
    best_length, best = _rescore(leaders)
    connect_opts = TraceOptions(critical_phase_tol=max(options.critical_tol, TraceOptions.critical_phase_tol))
    try:
        connected = is_connected(best, connect_opts)
    except LemniError as exc:
        logger.warning("could not trace the best configuration: %s", exc)
        connected = False
    return SearchResult(
        best=best,
        best_length=best_length,
        evaluations=state["evaluations"],
        history=history,
        critical_value_moduli=critical_value_report(best),
        connected=connected,
        rejected=state["rejected"],
        options=options,
    )


def erdos_candidate(d: int) -> MonicPolynomial:
    """z^d + 1."""
    return from_roots(np.exp(1j * np.pi * (2 * np.arange(d) + 1) / d))


@dataclass(frozen=True)
class ErdosComparison:
    degree: int
    candidate_length: float
    search_length: float

    @property
    def margin(self) -> float:
        return self.search_length - self.candidate_length

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "candidate_length": self.candidate_length,
            "search_length": self.search_length,
            "margin": self.margin,
        }


def erdos_comparison(
    d: int,
    budget: int = SearchOptions.budget,
    seed: int = 0,
    options: SearchOptions | None = None,
    seed_at_candidate: bool = False,
    progress: bool = False,
) -> ErdosComparison:
    """Length of z^d + 1 against the best the search finds (conjecture: margin ≤ 0)."""
    options = options or SearchOptions()
    require(2 <= d <= 6, f"comparison degree must be in 2..6, got {d}")
    candidate = erdos_candidate(d)
    candidate_length = length_integral(candidate)
    start = candidate.roots if seed_at_candidate else None
    found = search(d, budget, seed, options, start=start, progress=progress)
    return ErdosComparison(d, candidate_length, found.best_length)
