"""
Q2SAT instances with identical clauses.

Every clause j projects qubits (a_j, b_j) onto |Phi> = alpha|1_a 0_b> + beta|0_a 1_b>,
with alpha = sqrt(1 - |beta|^2) real and non-negative. The all-|0> and all-|1>
product states satisfy every clause of this family.

Basis convention shared by every module: qubit a is bit a of the basis index,
bit value 1 means |1>.
"""
import json
import logging
import math
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from errors import Conflict, InstanceParseError, ParameterError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

RESIDUAL_TOL = 1e-12

# -------------------------------------------------------------------
# Models
# -------------------------------------------------------------------


class ClauseParams(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    beta: complex = complex(2 ** -0.5, 0.0)
    delta: float = 1.0

    @field_validator("beta", mode="before")
    @classmethod
    def _coerce_beta(cls, value):
        if isinstance(value, dict):
            return complex(value.get("re", 0.0), value.get("im", 0.0))
        return complex(value)

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, value: complex) -> complex:
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise ValueError(f"beta must be finite, got {value!r}")
        if abs(value) > 1.0:
            raise ValueError(f"beta out of range: |beta| = {abs(value)!r} > 1")
        return value

    @field_validator("delta")
    @classmethod
    def _check_delta(cls, value: float) -> float:
        if not 0 < value < math.inf:
            raise ValueError(f"delta must be positive and finite, got {value!r}")
        return value

    @property
    def alpha(self) -> float:
        # Phase of alpha is ignored; clamp guards |beta| = 1 rounding
        return math.sqrt(max(0.0, 1.0 - abs(self.beta) ** 2))

    @property
    def phi(self) -> np.ndarray:
        """Clause vector on the (|1_a 0_b>, |0_a 1_b>) pair."""
        return np.array([self.alpha, self.beta], dtype=complex)


class Q2SATInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    edges: Tuple[Edge, ...] = ()
    clause: ClauseParams = ClauseParams()
    seed: int = 0
    density: float = 0.0

    @model_validator(mode="after")
    def _check_graph(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must lie in [0, 1], got {self.density}")
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on qubit {a}")
            if not 0 <= a < b < self.n:
                raise ValueError(f"edge ({a}, {b}) must satisfy 0 <= a < b < n = {self.n}")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
        return self

    @property
    def m(self) -> int:
        return len(self.edges)

    def digest(self) -> str:
        return f"n{self.n}-m{self.m}-seed{self.seed}"


@dataclass(frozen=True)
class ProductAssignment:
    """Per-qubit states (u, v) meaning u|0> + v|1>, shape (n, 2)."""

    states: np.ndarray

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @classmethod
    def uniform(cls, n: int, u: complex, v: complex) -> "ProductAssignment":
        states = np.tile(np.array([u, v], dtype=complex), (n, 1))
        return cls(states=states)


def make_clause(beta: complex = complex(2 ** -0.5, 0.0), delta: float = 1.0) -> ClauseParams:
    try:
        return ClauseParams(beta=beta, delta=delta)
    except ValueError as e:
        raise ParameterError(str(e)) from e


def make_instance(n: int, edges: Sequence[Edge], clause: Optional[ClauseParams] = None,
                  seed: int = 0, density: float = 0.0) -> Q2SATInstance:
    try:
        return Q2SATInstance(
            n=n,
            edges=tuple((int(a), int(b)) for a, b in edges),
            clause=clause or ClauseParams(),
            seed=seed,
            density=density,
        )
    except ValueError as e:
        raise ParameterError(str(e)) from e


# -------------------------------------------------------------------
# Generation
# -------------------------------------------------------------------


def uniform_draws(seed: int, count: int) -> np.ndarray:
    """
    Doubles in [0, 1) from the PCG64 bit stream seeded by `seed`.
    Uses the raw 64-bit outputs (top 53 bits) so the stream does not depend on
    Generator method implementations.
    """
    if count == 0:
        return np.empty(0)
    raw = np.random.PCG64(seed).random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def generate_instance(n: int, d: float, clause: Optional[ClauseParams] = None, seed: int = 0) -> Q2SATInstance:
    """
    Random instance: each unordered pair (a, b) is an edge with probability d.
    Pairs are visited lexicographically, one draw per pair.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 <= d <= 1.0:
        raise ParameterError(f"d must lie in [0, 1], got {d!r}")
    if seed < 0 or seed >= 2 ** 64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed!r}")

    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    draws = uniform_draws(seed, len(pairs))
    edges = [pair for pair, u in zip(pairs, draws) if u < d]
    logger.debug(f"Generated instance n={n} d={d} seed={seed}: m={len(edges)}")
    return make_instance(n, edges, clause, seed=seed, density=d)


def chain_bonds(n: int, boundary: str = "periodic") -> List[Edge]:
    """Oriented bonds (i, i+1) of a chain; periodic adds (n-1, 0) for n > 2."""
    if n < 2:
        raise ParameterError(f"chain length must be >= 2, got {n}")
    if boundary not in ("open", "periodic"):
        raise ParameterError(f"unknown boundary '{boundary}'")
    bonds = [(i, i + 1) for i in range(n - 1)]
    if boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    return bonds


# -------------------------------------------------------------------
# Graph structure
# -------------------------------------------------------------------


def to_graph(inst: Q2SATInstance) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(inst.n))
    graph.add_edges_from(inst.edges)
    return graph


def connected_components(inst: Q2SATInstance) -> List[Tuple[int, ...]]:
    """Vertex sets of the connected components, sorted by smallest member."""
    components = [tuple(sorted(c)) for c in nx.connected_components(to_graph(inst))]
    return sorted(components)


def subinstance(inst: Q2SATInstance, qubits: Sequence[int]) -> Q2SATInstance:
    """Restriction to `qubits`, relabelled 0..len-1 in ascending order."""
    order = sorted(qubits)
    if len(order) < 2:
        raise ParameterError(f"subinstance needs at least 2 qubits, got {order}")
    relabel = {q: i for i, q in enumerate(order)}
    edges = [(relabel[a], relabel[b]) for a, b in inst.edges if a in relabel and b in relabel]
    return Q2SATInstance(
        n=len(order),
        edges=tuple(sorted(edges)),
        clause=inst.clause,
        seed=inst.seed,
        density=inst.density,
    )


# -------------------------------------------------------------------
# Classical product-state baseline
# -------------------------------------------------------------------


def clause_overlap(clause: ClauseParams, psi_a: np.ndarray, psi_b: np.ndarray) -> complex:
    """<Phi|psi_a psi_b> = conj(alpha) v_a u_b + conj(beta) u_a v_b."""
    return np.conj(clause.alpha) * psi_a[1] * psi_b[0] + np.conj(clause.beta) * psi_a[0] * psi_b[1]


def clause_residuals(inst: Q2SATInstance, assignment: ProductAssignment) -> np.ndarray:
    return np.array([
        abs(clause_overlap(inst.clause, assignment.states[a], assignment.states[b]))
        for a, b in inst.edges
    ])


def _forced_state(clause: ClauseParams, known: np.ndarray, known_is_a: bool) -> Optional[np.ndarray]:
    # Solve the clause constraint for the other endpoint; None when unconstrained
    alpha_c, beta_c = np.conj(clause.alpha), np.conj(clause.beta)
    if known_is_a:
        candidate = np.array([beta_c * known[0], -alpha_c * known[1]])
    else:
        candidate = np.array([alpha_c * known[0], -beta_c * known[1]])
    norm = np.linalg.norm(candidate)
    if norm < RESIDUAL_TOL:
        return None
    return candidate / norm


def product_solve(inst: Q2SATInstance, seed_state: Sequence[complex] = (2 ** -0.5, 2 ** -0.5)) -> ProductAssignment:
    """
    Product-state solution by propagation.

    The smallest qubit of each component gets `seed_state`; the clause
    constraint then fixes its neighbours breadth-first. A component whose
    propagation is inconsistent is reset to all-|0>, which satisfies every
    clause of this family, so the solver never fails here.
    """
    seed = np.asarray(seed_state, dtype=complex)
    seed = seed / np.linalg.norm(seed)

    adjacency: Dict[int, List[Tuple[int, bool]]] = {q: [] for q in range(inst.n)}
    for a, b in inst.edges:
        adjacency[a].append((b, True))
        adjacency[b].append((a, False))

    states = np.zeros((inst.n, 2), dtype=complex)
    for component in connected_components(inst):
        try:
            _propagate_component(inst, component, adjacency, seed, states)
        except Conflict as e:
            logger.debug(f"Propagation conflict ({e}); resetting component {component} to |0...0>")
            for q in component:
                states[q] = (1.0, 0.0)

    return ProductAssignment(states=states)


def _propagate_component(inst, component, adjacency, seed, states) -> None:
    assigned = {component[0]}
    states[component[0]] = seed
    queue = deque([component[0]])
    while queue:
        q = queue.popleft()
        for other, q_is_a in adjacency[q]:
            edge = (q, other) if q_is_a else (other, q)
            if other in assigned:
                psi_a, psi_b = states[edge[0]], states[edge[1]]
                if abs(clause_overlap(inst.clause, psi_a, psi_b)) > RESIDUAL_TOL:
                    raise Conflict(other, edge)
                continue
            forced = _forced_state(inst.clause, states[q], q_is_a)
            states[other] = forced if forced is not None else seed
            assigned.add(other)
            queue.append(other)


def product_state_vector(assignment: ProductAssignment) -> np.ndarray:
    """2^n amplitudes of the product state (qubit 0 is the least significant bit)."""
    vec = np.array([1.0 + 0j])
    for q in range(assignment.n):
        vec = np.kron(assignment.states[q], vec)
    return vec


def trivial_indices(n: int) -> Tuple[int, int]:
    return 0, (1 << n) - 1


# -------------------------------------------------------------------
# Instance files
# -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_instance(inst: Q2SATInstance) -> str:
    edges = sorted(inst.edges)
    lines = ["{", f'  "n": {inst.n},', '  "edges": [']
    for j, (a, b) in enumerate(edges):
        sep = "," if j < len(edges) - 1 else ""
        lines.append(f"    [{a}, {b}]{sep}")
    lines.append("  ],")
    beta = inst.clause.beta
    lines.append(f'  "beta": {{"re": {_fmt(beta.real)}, "im": {_fmt(beta.imag)}}},')
    lines.append(f'  "delta": {_fmt(inst.clause.delta)},')
    lines.append(f'  "seed": {inst.seed},')
    lines.append(f'  "density": {_fmt(inst.density)}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_instance(inst: Q2SATInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_instance(inst))
    logger.info(f"Wrote instance {inst.digest()} to {path}")


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _field_line(text: str, key: str) -> Optional[int]:
    idx = text.find(f'"{key}"')
    return _line_of(text, idx) if idx >= 0 else None


def _edge_lines(text: str) -> List[int]:
    start = text.find('"edges"')
    if start < 0:
        return []
    pattern = re.compile(r"\[\s*-?\d+\s*,\s*-?\d+\s*\]")
    return [_line_of(text, m.start()) for m in pattern.finditer(text, start)]


def loads_instance(text: str) -> Q2SATInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(f"malformed JSON: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise InstanceParseError("top-level value must be an object", line=1)

    for key in ("n", "edges", "beta", "delta"):
        if key not in data:
            raise InstanceParseError("missing field", field=key)

    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise InstanceParseError(f"n must be an integer >= 2, got {n!r}", field="n", line=_field_line(text, "n"))

    raw_edges = data["edges"]
    if not isinstance(raw_edges, list):
        raise InstanceParseError("edges must be a list", field="edges", line=_field_line(text, "edges"))
    edge_lines = _edge_lines(text)
    edges: List[Edge] = []
    seen = set()
    for j, pair in enumerate(raw_edges):
        line = edge_lines[j] if j < len(edge_lines) else _field_line(text, "edges")
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)):
            raise InstanceParseError(f"edge {j} must be a pair of integers", field="edges", line=line)
        a, b = pair
        if a == b:
            raise InstanceParseError(f"self-loop on qubit {a}", field="edges", line=line)
        if not 0 <= a < b < n:
            raise InstanceParseError(f"edge ({a}, {b}) must satisfy 0 <= a < b < n", field="edges", line=line)
        if (a, b) in seen:
            raise InstanceParseError(f"duplicate edge ({a}, {b})", field="edges", line=line)
        seen.add((a, b))
        edges.append((a, b))

    beta_raw = data["beta"]
    beta_line = _field_line(text, "beta")
    if not isinstance(beta_raw, dict) or not all(isinstance(beta_raw.get(k), (int, float)) for k in ("re", "im")):
        raise InstanceParseError('beta must be {"re": float, "im": float}', field="beta", line=beta_line)
    beta = complex(beta_raw["re"], beta_raw["im"])
    if abs(beta) > 1.0:
        raise InstanceParseError(f"beta out of range: |beta| = {abs(beta)!r}", field="beta", line=beta_line)

    delta = data["delta"]
    if not isinstance(delta, (int, float)) or isinstance(delta, bool) or not delta > 0:
        raise InstanceParseError(f"delta must be positive, got {delta!r}", field="delta",
                                 line=_field_line(text, "delta"))

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise InstanceParseError(f"seed must be a non-negative integer, got {seed!r}", field="seed",
                                 line=_field_line(text, "seed"))
    density = data.get("density", 0.0)
    if not isinstance(density, (int, float)) or not 0.0 <= density <= 1.0:
        raise InstanceParseError(f"density must lie in [0, 1], got {density!r}", field="density",
                                 line=_field_line(text, "density"))

    return Q2SATInstance(
        n=n,
        edges=tuple(edges),
        clause=ClauseParams(beta=beta, delta=float(delta)),
        seed=seed,
        density=float(density),
    )


def read_instance(path: Union[str, Path]) -> Q2SATInstance:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InstanceParseError(f"cannot read {path}: {e}") from e
    return loads_instance(text)
