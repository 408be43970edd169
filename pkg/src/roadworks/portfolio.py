"""Budgeted upgrade selection as a quadratic knapsack.

Building subset S of the candidate upgrades is worth, in thousands of
dollars per year,

    obj(S) = sum over i in S of (m' v_i - c_i)  +  m' * sum over i<j in S of d_ij

where v_i is the single-upgrade drop in daily vehicle-hours, d_ij the
pairwise interaction correction, c_i the construction cost in k$, and
m' = m / 1000 converts one unit of daily VHT into k$ per year.  The budget
constrains sum of c_i.  An exact branch-and-bound search maximizes obj.

Float discipline: every objective that is compared (solver incumbents, test
oracles, re-validation before output) is produced by the one canonical
evaluator here, summing item terms in id order and pair terms in sorted-key
order, so equal selections yield bit-identical floats and ties break
deterministically: higher objective, then fewer upgrades, then
lexicographically smallest id tuple.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import IO, Iterable, Mapping

from .errors import DataError, ParseError
from .network import UpgradeSet
from .scenario import DeltaTable

__all__ = [
    "SelectionProblem",
    "Selection",
    "evaluate_selection",
    "better_selection",
    "optimize_subset",
    "format_problem",
    "parse_problem",
    "format_selection",
]

DEFAULT_M = 3650.0


@dataclass(frozen=True)
class SelectionProblem:
    """Inputs of one budgeted selection: values, costs, pairwise corrections."""

    ids: tuple[str, ...]
    values: Mapping[str, float]
    costs: Mapping[str, float]
    corrections: Mapping[tuple[str, str], float]
    budget: float
    m: float = DEFAULT_M

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise DataError("selection problem repeats an upgrade id")
        known = set(self.ids)
        for label, mapping in (("value", self.values), ("cost", self.costs)):
            missing = [i for i in self.ids if i not in mapping]
            if missing:
                raise DataError(f"no {label} for upgrade(s) {', '.join(missing)}")
        for i in self.ids:
            if self.costs[i] < 0:
                raise DataError(f"upgrade {i} has negative cost")
        for pair in self.corrections:
            if len(pair) != 2 or pair[0] >= pair[1]:
                raise DataError(f"correction key {pair!r} must be a sorted pair of distinct ids")
            if pair[0] not in known or pair[1] not in known:
                raise DataError(f"correction {pair!r} names an unknown upgrade")
        if self.budget < 0:
            raise DataError("budget must be non-negative")
        if self.m <= 0:
            raise DataError("m (yearly value of one unit of daily VHT) must be positive")

    @classmethod
    def from_delta_table(
        cls,
        table: DeltaTable,
        upgrades: UpgradeSet,
        budget: float,
        m: float = DEFAULT_M,
    ) -> "SelectionProblem":
        """Wire a computed delta table and the candidate costs into a problem."""
        missing = [i for i in upgrades.ids if i not in table.singles]
        if missing:
            raise DataError(
                "delta table lacks single-upgrade rows for " + ", ".join(missing)
            )
        idset = set(upgrades.ids)
        return cls(
            ids=upgrades.ids,
            values={i: table.singles[i] for i in upgrades.ids},
            costs={u.id: u.cost for u in upgrades},
            corrections={
                p: d
                for p, d in table.pair_corrections.items()
                if p[0] in idset and p[1] in idset
            },
            budget=budget,
            m=m,
        )


@dataclass(frozen=True)
class Selection:
    """One evaluated choice of upgrades."""

    chosen: tuple[str, ...]
    objective: float
    spend: float
    estimated_delta_vht: float


def _objective(problem: SelectionProblem, chosen: tuple[str, ...]) -> tuple[float, float, float]:
    # chosen must already be sorted; combinations() then yields sorted keys
    mprime = problem.m / 1000.0
    obj = 0.0
    spend = 0.0
    delta = 0.0
    for i in chosen:
        obj += mprime * problem.values[i] - problem.costs[i]
        spend += problem.costs[i]
        delta += problem.values[i]
    for pair in combinations(chosen, 2):
        d = problem.corrections.get(pair)
        if d is not None:
            obj += mprime * d
            delta += d
    return obj, spend, delta


def evaluate_selection(problem: SelectionProblem, ids: Iterable[str]) -> Selection:
    """Canonical score of an explicit selection (budget not enforced here)."""
    chosen = tuple(sorted(ids))
    if len(set(chosen)) != len(chosen):
        raise DataError("selection repeats an upgrade")
    known = set(problem.ids)
    unknown = [i for i in chosen if i not in known]
    if unknown:
        raise DataError(f"selection names unknown upgrade(s) {', '.join(unknown)}")
    obj, spend, delta = _objective(problem, chosen)
    return Selection(chosen, obj, spend, delta)


def better_selection(a: Selection, b: Selection) -> bool:
    """True when a beats b: objective, then fewer upgrades, then lex ids."""
    if a.objective != b.objective:
        return a.objective > b.objective
    if len(a.chosen) != len(b.chosen):
        return len(a.chosen) < len(b.chosen)
    return a.chosen < b.chosen


def optimize_subset(problem: SelectionProblem) -> Selection:
    """Exact maximizer of the selection objective within the budget.

    Branch and bound over items in (cost, id) order.  The suffix bound adds
    every still-available positive item term and positive pair term (a pair
    counts at the later of its endpoints), so it never undercounts any
    completion.  Pruning keeps an epsilon of slack for float-order noise;
    every surviving leaf is re-scored by the canonical evaluator, and the
    incumbent is replaced only under the deterministic tie-break, so the
    result matches exhaustive enumeration exactly, ties included.
    """
    order = sorted(problem.ids, key=lambda i: (problem.costs[i], i))
    n = len(order)
    pos = {i: p for p, i in enumerate(order)}
    mprime = problem.m / 1000.0
    item_term = [mprime * problem.values[i] - problem.costs[i] for i in order]
    cost = [problem.costs[i] for i in order]
    pairs_at: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (a, b), d in problem.corrections.items():
        pa, pb = pos[a], pos[b]
        pairs_at[max(pa, pb)].append((min(pa, pb), mprime * d))
    bound = [0.0] * (n + 1)
    for j in range(n - 1, -1, -1):
        acc = bound[j + 1]
        if item_term[j] > 0:
            acc += item_term[j]
        for _, term in pairs_at[j]:
            if term > 0:
                acc += term
        bound[j] = acc

    best = evaluate_selection(problem, ())
    budget_slack = 1e-9 * (1.0 + problem.budget)
    in_set = bytearray(n)
    stack: list[int] = []

    def dfs(j: int, cur: float, spend: float) -> None:
        nonlocal best
        slack = 1e-9 * (1.0 + abs(best.objective))
        if cur + bound[j] < best.objective - slack:
            return
        if j == n:
            cand = evaluate_selection(problem, (order[p] for p in stack))
            if cand.spend <= problem.budget and better_selection(cand, best):
                best = cand
            return
        if spend + cost[j] <= problem.budget + budget_slack:
            extra = item_term[j]
            for other, term in pairs_at[j]:
                if in_set[other]:
                    extra += term
            in_set[j] = 1
            stack.append(j)
            dfs(j + 1, cur + extra, spend + cost[j])
            stack.pop()
            in_set[j] = 0
        dfs(j + 1, cur, spend)

    dfs(0, 0.0, 0.0)
    return best


def format_problem(problem: SelectionProblem) -> str:
    """Selection problem as text: count, item rows, pair rows, BUDGET, M."""
    lines = ["# roadworks selection problem", str(len(problem.ids))]
    for i in problem.ids:
        lines.append(f"{i} {problem.costs[i]!r} {problem.values[i]!r}")
    for pair in sorted(problem.corrections):
        lines.append(f"{pair[0]} {pair[1]} {problem.corrections[pair]!r}")
    lines.append(f"BUDGET {problem.budget!r}")
    lines.append(f"M {problem.m!r}")
    return "\n".join(lines) + "\n"


def parse_problem(text: str) -> SelectionProblem:
    """Inverse of format_problem; '#' starts a comment, M is optional."""
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise ParseError("empty selection problem file")
    lineno, fields = rows[0]
    if len(fields) != 1 or not fields[0].isdigit():
        raise ParseError("expected the number of upgrades", line=lineno)
    count = int(fields[0])
    if len(rows) < 1 + count:
        raise ParseError(f"expected {count} upgrade rows, found {len(rows) - 1}")
    ids: list[str] = []
    values: dict[str, float] = {}
    costs: dict[str, float] = {}
    for lineno, fields in rows[1 : 1 + count]:
        if len(fields) != 3:
            raise ParseError("expected 'id cost value'", line=lineno)
        name = fields[0]
        if name in costs:
            raise ParseError(f"duplicate upgrade row for {name}", line=lineno)
        try:
            costs[name] = float(fields[1])
            values[name] = float(fields[2])
        except ValueError:
            raise ParseError(f"non-numeric cost or value for {name}", line=lineno)
        ids.append(name)
    corrections: dict[tuple[str, str], float] = {}
    budget: float | None = None
    m = DEFAULT_M
    for lineno, fields in rows[1 + count :]:
        if fields[0] == "BUDGET" and len(fields) == 2:
            try:
                budget = float(fields[1])
            except ValueError:
                raise ParseError(f"non-numeric budget {fields[1]!r}", line=lineno)
        elif fields[0] == "M" and len(fields) == 2:
            try:
                m = float(fields[1])
            except ValueError:
                raise ParseError(f"non-numeric m {fields[1]!r}", line=lineno)
        elif len(fields) == 3:
            key = tuple(sorted((fields[0], fields[1])))
            if key[0] == key[1]:
                raise ParseError(f"pair of an upgrade with itself: {key[0]}", line=lineno)
            if key in corrections:
                raise ParseError(f"duplicate pair row {key[0]},{key[1]}", line=lineno)
            try:
                corrections[key] = float(fields[2])
            except ValueError:
                raise ParseError(f"non-numeric correction for {key[0]},{key[1]}", line=lineno)
        else:
            raise ParseError(f"unrecognized row {' '.join(fields)!r}", line=lineno)
    if budget is None:
        raise ParseError("missing BUDGET line")
    return SelectionProblem(tuple(ids), values, costs, corrections, budget, m)


def format_selection(problem: SelectionProblem, selection: Selection) -> str:
    """Small human-readable block describing one selection."""
    names = " ".join(selection.chosen) if selection.chosen else "(none)"
    return (
        f"selected            {names}\n"
        f"spend k$            {selection.spend:.3f} (budget {problem.budget:.3f})\n"
        f"net benefit k$/yr   {selection.objective:.3f}\n"
        f"delta VHT/day       {selection.estimated_delta_vht:.3f}\n"
    )
