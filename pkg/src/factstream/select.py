"""Stage 3a: concept-coverage selection from the pooled clusters.

Entity mentions act as concepts with mention frequency as weight; picking at
most L documents to maximize the weight of covered concepts is the classic
weighted max-coverage problem. A bespoke branch-and-bound solver gives the
global optimum for small pools and a greedy solver covers production sizes
with the usual (1 - 1/e) guarantee. Coverage is binary: a concept counts
once no matter how many chosen documents contain it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .rerank import EntityType, Tagger, tag_entities

EXACT_POOL_CAP = 25

ConceptKey = tuple[str, EntityType]


@dataclass
class ConceptTable:
    """Concepts (key, weight) and the docs each occurs in, by pool index."""

    concepts: list[tuple[ConceptKey, float]]
    occurrence: list[frozenset[int]]

    def __post_init__(self) -> None:
        if len(self.concepts) != len(self.occurrence):
            raise ValueError("concepts and occurrence must align")
        for (key, weight), docs in zip(self.concepts, self.occurrence):
            if weight <= 0:
                raise ValueError(f"concept {key}: weight must be > 0")
            if not docs:
                raise ValueError(f"concept {key}: must occur in at least one doc")


@dataclass
class IlpProblem:
    concept_table: ConceptTable
    max_docs: int
    pool: list[str]  # doc_ids, fixed order

    def __post_init__(self) -> None:
        if self.max_docs < 1:
            raise ValueError("max_docs must be >= 1")
        if not self.pool:
            raise ValueError("pool must be non-empty")
        if len(set(self.pool)) != len(self.pool):
            raise ValueError("pool doc_ids must be unique")


@dataclass
class Selection:
    chosen: set[str]
    objective: float


def extract_concepts(
    pool: Sequence[tuple[str, str]], tagger: Union[str, Tagger] = "rules"
) -> ConceptTable:
    """Build the concept table from (doc_id, text) pairs.

    Concept key = (lowercased mention surface, entity type); weight = total
    mention count across the pool; occurrence is binary per document.
    """
    weights: Counter[ConceptKey] = Counter()
    occurrence: dict[ConceptKey, set[int]] = {}
    for j, (doc_id, text) in enumerate(pool):
        for mention in tag_entities(text, tagger, doc_id=doc_id):
            key = (mention.surface.lower(), mention.etype)
            weights[key] += 1
            occurrence.setdefault(key, set()).add(j)
    keys = sorted(weights, key=lambda k: (k[0], k[1].value))
    return ConceptTable(
        concepts=[(k, float(weights[k])) for k in keys],
        occurrence=[frozenset(occurrence[k]) for k in keys],
    )


def _doc_concept_sets(problem: IlpProblem) -> list[set[int]]:
    """Concept indices contained in each pool document."""
    per_doc: list[set[int]] = [set() for _ in problem.pool]
    for ci, docs in enumerate(problem.concept_table.occurrence):
        for j in docs:
            if j >= len(problem.pool):
                raise ValueError("occurrence references a doc outside the pool")
            per_doc[j].add(ci)
    return per_doc


def _fallback(problem: IlpProblem) -> Selection:
    # No concepts anywhere: take the pool head so a summary is still emitted.
    chosen = set(problem.pool[: problem.max_docs])
    return Selection(chosen=chosen, objective=0.0)


def solve_greedy(problem: IlpProblem) -> Selection:
    """Weighted max-coverage greedy: best marginal gain until L or no gain."""
    if not problem.concept_table.concepts:
        return _fallback(problem)
    weights = [w for _, w in problem.concept_table.concepts]
    per_doc = _doc_concept_sets(problem)
    order = sorted(range(len(problem.pool)), key=lambda j: problem.pool[j])

    chosen: set[str] = set()
    covered: set[int] = set()
    remaining = set(order)
    while len(chosen) < problem.max_docs and remaining:
        best_j: Optional[int] = None
        best_gain = 0.0
        for j in order:
            if j not in remaining:
                continue
            gain = sum(weights[c] for c in per_doc[j] if c not in covered)
            if gain > best_gain:
                best_gain = gain
                best_j = j
        if best_j is None:
            break
        chosen.add(problem.pool[best_j])
        covered |= per_doc[best_j]
        remaining.discard(best_j)
    objective = sum(weights[c] for c in covered)
    return Selection(chosen=chosen, objective=objective)


class _ExactSolver:
    """Depth-first branch and bound over documents in doc_id order."""

    def __init__(self, problem: IlpProblem):
        self.weights = [w for _, w in problem.concept_table.concepts]
        per_doc = _doc_concept_sets(problem)
        order = sorted(range(len(problem.pool)), key=lambda j: problem.pool[j])
        self.doc_ids = [problem.pool[j] for j in order]
        self.doc_concepts = [per_doc[j] for j in order]
        self.L = problem.max_docs
        self.n = len(order)
        # Suffix unions let the bound discount concepts no later doc covers.
        self.suffix_cover: list[set[int]] = [set() for _ in range(self.n + 1)]
        for i in range(self.n - 1, -1, -1):
            self.suffix_cover[i] = self.suffix_cover[i + 1] | self.doc_concepts[i]

    def _bound(self, i: int, covered: set[int], budget: int) -> float:
        if budget <= 0:
            return 0.0
        reachable = self.suffix_cover[i] - covered
        total = sum(self.weights[c] for c in reachable)
        if budget < self.n - i:
            top = sorted(
                (
                    sum(self.weights[c] for c in self.doc_concepts[j] - covered)
                    for j in range(i, self.n)
                ),
                reverse=True,
            )[:budget]
            total = min(total, sum(top))
        return total

    def best_objective(self, incumbent: float) -> float:
        self._best = incumbent
        self._target: Optional[float] = None
        self._search(0, set(), [], 0.0)
        return self._best

    def reaches(self, prefix: list[int], target: float) -> bool:
        """Can some superset of `prefix` (using docs after the last prefix
        element) reach `target` within the budget?"""
        covered: set[int] = set()
        for j in prefix:
            covered |= self.doc_concepts[j]
        value = sum(self.weights[c] for c in covered)
        start = prefix[-1] + 1 if prefix else 0
        self._best = float("-inf")
        self._target = target
        self._search(start, covered, list(prefix), value)
        return self._best >= target

    def _search(self, i: int, covered: set[int], chosen: list[int], value: float) -> None:
        if self._target is not None and self._best >= self._target:
            return
        if value > self._best:
            self._best = value
        if i >= self.n or len(chosen) >= self.L:
            return
        if value + self._bound(i, covered, self.L - len(chosen)) <= self._best:
            return
        gained = self.doc_concepts[i] - covered
        if gained:  # including a no-gain doc never helps the objective
            chosen.append(i)
            self._search(i + 1, covered | gained, chosen, value + sum(self.weights[c] for c in gained))
            chosen.pop()
        self._search(i + 1, covered, chosen, value)


def solve_exact(problem: IlpProblem, cap: int = EXACT_POOL_CAP) -> Selection:
    """Globally optimal selection; ties go to the lexicographically smallest
    doc_id set. Pools larger than `cap` must use solve_greedy."""
    if len(problem.pool) > cap:
        raise ValueError(
            f"pool of {len(problem.pool)} exceeds the exact-solver cap of {cap}; use solve_greedy"
        )
    if not problem.concept_table.concepts:
        return _fallback(problem)

    solver = _ExactSolver(problem)
    optimum = solver.best_objective(incumbent=solve_greedy(problem).objective)

    # Lexicographic refinement: commit the smallest doc_ids that still allow
    # the optimum; stop as soon as the prefix itself achieves it.
    prefix: list[int] = []
    covered: set[int] = set()
    value = 0.0
    position = 0
    while value < optimum and len(prefix) < solver.L:
        for j in range(position, solver.n):
            if solver.doc_concepts[j] <= covered:
                continue
            if solver.reaches(prefix + [j], optimum):
                prefix.append(j)
                covered |= solver.doc_concepts[j]
                value = sum(solver.weights[c] for c in covered)
                position = j + 1
                break
        else:
            raise AssertionError("optimum unreachable during refinement")

    return Selection(chosen={solver.doc_ids[j] for j in prefix}, objective=value)
