"""User-equilibrium traffic assignment by the Frank-Wolfe method.

Latencies follow the BPR form ``l(f) = t (1 + alpha (f/Q)^beta)`` and the
objective is the Beckmann sum of link latency integrals, for which the BPR
integral has the closed form ``t F + t alpha F^(beta+1) / ((beta+1) Q^beta)``.
Each iteration builds an all-or-nothing (AON) direction from shortest paths
under current latencies, measures the relative gap

    gap = (f . l(f) - f_aon . l(f)) / (f . l(f)),

and moves by an exact 1-D line search (bisection on the derivative).

Determinism contract: per-origin loading is accumulated in a fixed origin
order using a fixed chunk size, so flows are bit-identical for any thread
count; threads only affect wall time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DataError, SolverError
from .network import DemandMatrix, Link, Network
from .shortest_path import ALGORITHMS, DEFAULT_ALGORITHM, _tree_arrays

__all__ = [
    "Assignment",
    "SolverSettings",
    "bpr_latency",
    "bpr_integral",
    "all_or_nothing",
    "relative_gap",
    "vht",
    "solve_ue",
    "solve_with",
    "write_flow_file",
    "format_flow_file",
]

# Origins per loading task. Fixed (never derived from the thread count) so the
# floating-point reduction order, and therefore the flows, cannot depend on
# how many threads run.
_CHUNK = 16

_LINE_SEARCH_STEPS = 48


@dataclass(eq=False)
class Assignment:
    """Result of one equilibrium (or truncated) solve."""

    flows: np.ndarray
    latencies: np.ndarray
    vht: float
    relative_gap: float
    iterations: int
    beckmann: float
    beckmann_history: list[float] = field(default_factory=list)
    gap_history: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class SolverSettings:
    """Bundle of solve_ue keyword arguments, handy for passing through layers."""

    target_gap: float = 1e-6
    max_iters: int = 10_000
    algorithm: str = DEFAULT_ALGORITHM
    threads: int = 1


def bpr_latency(link: Link, flow: float) -> float:
    """Travel time on one link at the given flow."""
    if flow < 0:
        raise DataError(f"negative flow {flow} on link {link.from_node}->{link.to_node}")
    return link.free_flow_time * (1.0 + link.alpha * (flow / link.capacity) ** link.beta)


def bpr_integral(link: Link, flow: float) -> float:
    """Integral of the BPR latency from 0 to `flow` (one Beckmann term)."""
    if flow < 0:
        raise DataError(f"negative flow {flow} on link {link.from_node}->{link.to_node}")
    t, a, b, q = link.free_flow_time, link.alpha, link.beta, link.capacity
    return t * flow + t * a * flow ** (b + 1.0) / ((b + 1.0) * q**b)


def vht(flows: np.ndarray, latencies: np.ndarray) -> float:
    """Total vehicle-hours (flow-weighted travel time)."""
    return float(np.dot(np.asarray(flows, dtype=float), np.asarray(latencies, dtype=float)))


def relative_gap(flows: np.ndarray, costs: np.ndarray, aon_flows: np.ndarray) -> float:
    """Relative difference between current total cost and the AON total cost."""
    flows = np.asarray(flows, dtype=float)
    costs = np.asarray(costs, dtype=float)
    total = float(np.dot(flows, costs))
    if total == 0.0:
        raise DataError("relative gap undefined: total travel cost is zero")
    best = float(np.dot(np.asarray(aon_flows, dtype=float), costs))
    return (total - best) / total


class _LinkArrays:
    """Per-link BPR parameters as numpy columns."""

    def __init__(self, net: Network):
        self.t = np.array([l.free_flow_time for l in net.links], dtype=float)
        self.cap = np.array([l.capacity for l in net.links], dtype=float)
        self.alpha = np.array([l.alpha for l in net.links], dtype=float)
        self.beta = np.array([l.beta for l in net.links], dtype=float)
        self.from_nodes = [l.from_node for l in net.links]

    def latencies(self, flows: np.ndarray) -> np.ndarray:
        return self.t * (1.0 + self.alpha * np.power(flows / self.cap, self.beta))

    def beckmann(self, flows: np.ndarray) -> float:
        terms = self.t * flows + self.t * self.alpha * np.power(flows, self.beta + 1.0) / (
            (self.beta + 1.0) * np.power(self.cap, self.beta)
        )
        return float(np.sum(terms))


def _check_demand(net: Network, demand: DemandMatrix) -> None:
    for (r, s), _ in demand.entries.items():
        if r > net.zone_count or s > net.zone_count:
            raise DataError(
                f"demand pair ({r},{s}) lies outside the zone range 1..{net.zone_count}"
            )


def _load_chunk(net, arrays, costs, algorithm, chunk):
    """AON-load every origin in `chunk`; returns a dense flow vector."""
    flows = [0.0] * len(net.links)
    from_nodes = arrays.from_nodes
    limit = net.node_count + 1
    for origin, dests in chunk:
        dist, pred = _tree_arrays(net, costs, origin, algorithm)
        for dest, q in dests:
            if not math.isfinite(dist[dest]):
                raise SolverError(f"no path for demanded O-D pair ({origin},{dest})")
            v = dest
            steps = 0
            while v != origin:
                a = pred[v]
                flows[a] += q
                v = from_nodes[a]
                steps += 1
                if steps >= limit:
                    raise SolverError(f"predecessor walk did not terminate for pair ({origin},{dest})")
    return np.array(flows, dtype=float)


def _aon(net, arrays, costs, by_origin, algorithm, executor):
    chunks = [by_origin[i : i + _CHUNK] for i in range(0, len(by_origin), _CHUNK)]
    total = np.zeros(len(net.links), dtype=float)
    if executor is None:
        for chunk in chunks:
            total += _load_chunk(net, arrays, costs, algorithm, chunk)
    else:
        # Reduction stays in chunk order, so results match the serial path bit
        # for bit regardless of worker count.
        for part in executor.map(
            lambda c: _load_chunk(net, arrays, costs, algorithm, c), chunks
        ):
            total += part
    return total


def all_or_nothing(
    net: Network,
    demand: DemandMatrix,
    link_costs: Sequence[float],
    algorithm: str = DEFAULT_ALGORITHM,
    threads: int = 1,
) -> np.ndarray:
    """Load all demand onto shortest paths under fixed link costs."""
    if algorithm not in ALGORITHMS:
        raise DataError(f"unknown algorithm {algorithm!r}")
    _check_demand(net, demand)
    costs = [float(c) for c in link_costs]
    if len(costs) != len(net.links):
        raise DataError(f"got {len(costs)} costs for {len(net.links)} links")
    for c in costs:
        if not (c >= 0 and math.isfinite(c)):
            raise DataError(f"invalid link cost {c}")
    arrays = _LinkArrays(net)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return _aon(net, arrays, costs, demand.by_origin, algorithm, pool)
    return _aon(net, arrays, costs, demand.by_origin, algorithm, None)


def _line_search(arrays: _LinkArrays, flows: np.ndarray, direction: np.ndarray) -> float:
    """Exact step length for the Beckmann objective along `direction`.

    g'(lam) = direction . l(flows + lam * direction) is nondecreasing in lam
    (convex objective), so bisection brackets the root. g'(0) < 0 whenever the
    AON direction improves; if even g'(1) <= 0 the full step is optimal.
    """

    def gprime(lam: float) -> float:
        return float(np.dot(direction, arrays.latencies(flows + lam * direction)))

    if gprime(0.0) >= 0.0:
        return 0.0
    if gprime(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_LINE_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        if gprime(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_ue(
    net: Network,
    demand: DemandMatrix,
    target_gap: float = 1e-4,
    max_iters: int = 1000,
    algorithm: str = DEFAULT_ALGORITHM,
    threads: int = 1,
) -> Assignment:
    """Frank-Wolfe user-equilibrium assignment.

    Iterates until the relative gap reaches `target_gap` or `max_iters`
    direction computations have been spent; the reported gap always describes
    the returned flows.
    """
    if target_gap <= 0:
        raise DataError("target_gap must be positive")
    if max_iters < 1:
        raise DataError("max_iters must be at least 1")
    if algorithm not in ALGORITHMS:
        raise DataError(f"unknown algorithm {algorithm!r}")
    if threads < 1:
        raise DataError("threads must be at least 1")
    _check_demand(net, demand)

    arrays = _LinkArrays(net)
    m = len(net.links)
    by_origin = demand.by_origin
    if not by_origin:
        zeros = np.zeros(m, dtype=float)
        return Assignment(
            flows=zeros,
            latencies=arrays.latencies(zeros),
            vht=0.0,
            relative_gap=0.0,
            iterations=0,
            beckmann=0.0,
        )

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        freeflow = arrays.latencies(np.zeros(m, dtype=float))
        flows = _aon(net, arrays, freeflow.tolist(), by_origin, algorithm, executor)

        beck_hist: list[float] = []
        gap_hist: list[float] = []
        steps: list[float] = []
        for iteration in range(1, max_iters + 1):
            lat = arrays.latencies(flows)
            if not np.all(np.isfinite(lat)):
                bad = int(np.argmax(~np.isfinite(lat)))
                link = net.links[bad]
                raise SolverError(f"non-finite latency on link {link.from_node}->{link.to_node}")
            aon_flows = _aon(net, arrays, lat.tolist(), by_origin, algorithm, executor)
            gap = relative_gap(flows, lat, aon_flows)
            gap_hist.append(gap)
            beck_hist.append(arrays.beckmann(flows))
            if gap <= target_gap or iteration == max_iters:
                return Assignment(
                    flows=flows,
                    latencies=lat,
                    vht=float(np.dot(flows, lat)),
                    relative_gap=gap,
                    iterations=iteration,
                    beckmann=beck_hist[-1],
                    beckmann_history=beck_hist,
                    gap_history=gap_hist,
                    step_sizes=steps,
                )
            direction = aon_flows - flows
            lam = _line_search(arrays, flows, direction)
            steps.append(lam)
            flows = flows + lam * direction
        raise AssertionError("unreachable")  # loop always returns
    finally:
        if executor is not None:
            executor.shutdown()


def solve_with(net: Network, demand: DemandMatrix, settings: SolverSettings) -> Assignment:
    return solve_ue(
        net,
        demand,
        target_gap=settings.target_gap,
        max_iters=settings.max_iters,
        algorithm=settings.algorithm,
        threads=settings.threads,
    )


def format_flow_file(net: Network, assignment: Assignment) -> str:
    """Flow table text: a one-line summary header, then `from to volume cost` rows."""
    lines = [
        f"~ vht {assignment.vht:.6f} relative_gap {assignment.relative_gap:.12e} "
        f"iterations {assignment.iterations}"
    ]
    for link, volume, cost in zip(net.links, assignment.flows, assignment.latencies):
        lines.append(f"{link.from_node} {link.to_node} {volume:.9f} {cost:.9f}")
    return "\n".join(lines) + "\n"


def write_flow_file(path_or_io: str | IO[str], net: Network, assignment: Assignment) -> None:
    text = format_flow_file(net, assignment)
    if hasattr(path_or_io, "write"):
        path_or_io.write(text)
    else:
        with open(path_or_io, "w") as fh:
            fh.write(text)
