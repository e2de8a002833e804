"""
One-dimensional chains: one-magnon band, gap law and the two closed-form limits.

Every bond (i, i+1) carries the same orientation, the ring closes with
(n-1, 0). On a state with a single |1> at site a, the projector of bond (a, b)
gives alpha^2 on a, |beta|^2 on b and the hopping alpha * conj(beta) from b
to a, so the uniform periodic band is Delta * (1 + 2 alpha Re(beta) cos k)
for real beta.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import stats

from errors import ParameterError
from hamiltonian import SparseHamiltonian, build_h0_from_bonds
from instance import chain_bonds, make_clause

logger = logging.getLogger(__name__)

GROUND_TOL = 1e-9


class ChainSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    beta: float = 2 ** -0.5
    delta: float = 1.0
    boundary: str = "periodic"

    @field_validator("n")
    @classmethod
    def _check_n(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"chain length must be >= 2, got {value}")
        return value

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {value!r}")
        return value

    @field_validator("delta")
    @classmethod
    def _check_delta(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"delta must be positive, got {value!r}")
        return value

    @field_validator("boundary")
    @classmethod
    def _check_boundary(cls, value: str) -> str:
        if value not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got '{value}'")
        return value

    @property
    def alpha(self) -> float:
        return math.sqrt(1.0 - self.beta ** 2)


def make_chain(n: int, beta: float = 2 ** -0.5, delta: float = 1.0, boundary: str = "periodic") -> ChainSpec:
    try:
        return ChainSpec(n=n, beta=beta, delta=delta, boundary=boundary)
    except ValueError as e:
        raise ParameterError(str(e)) from e


@dataclass(frozen=True)
class ChainGapRow:
    n: int
    beta: float
    boundary: str
    gap: float


def dispersion(beta: float, k: float, delta: float = 1.0) -> float:
    """Band of the uniform periodic chain, exact for every beta in [0, 1]."""
    if not 0.0 <= beta <= 1.0:
        raise ParameterError(f"beta must lie in [0, 1], got {beta!r}")
    alpha = math.sqrt(1.0 - beta ** 2)
    return delta * (1.0 + 2.0 * alpha * beta * math.cos(k))


def limit_band(beta: float, k: float, limit: str, delta: float = 1.0) -> float:
    """
    Closed-form band formulas for the two limits.

    'small_beta': Delta (1/2 - 2|beta| cos k); 'balanced' (beta = sqrt(2)/2):
    Delta (1 + cos k). The small-beta form is kept as stated; it does not
    follow from the one-magnon block, see dispersion().
    """
    if limit == "small_beta":
        return delta * (0.5 - 2.0 * abs(beta) * math.cos(k))
    if limit == "balanced":
        return delta * (1.0 + math.cos(k))
    raise ParameterError(f"unknown limit '{limit}' (expected 'small_beta' or 'balanced')")


def one_magnon_block(spec: ChainSpec) -> np.ndarray:
    clause = make_clause(spec.beta, spec.delta)
    alpha, beta = clause.alpha, clause.beta
    block = np.zeros((spec.n, spec.n), dtype=complex)
    for a, b in chain_bonds(spec.n, spec.boundary):
        block[a, a] += alpha ** 2
        block[b, b] += abs(beta) ** 2
        block[a, b] += alpha * np.conj(beta)
        block[b, a] += alpha * beta
    return spec.delta * block


def one_magnon_gap(spec: ChainSpec) -> float:
    """Lowest one-magnon eigenvalue above the zero-energy ground manifold."""
    values = np.linalg.eigvalsh(one_magnon_block(spec))
    excited = values[values >= GROUND_TOL * spec.delta]
    gap = float(excited[0])
    logger.debug(f"One-magnon gap n={spec.n} beta={spec.beta:.6g} {spec.boundary}: {gap:.12g}")
    return gap


def chain_h0(spec: ChainSpec) -> SparseHamiltonian:
    """Full 2^n projector Hamiltonian with the same bonds as one_magnon_block."""
    return build_h0_from_bonds(spec.n, chain_bonds(spec.n, spec.boundary), make_clause(spec.beta, spec.delta))


def gap_law_table(ns: Iterable[int], betas: Sequence[float], boundary: str = "periodic",
                  delta: float = 1.0) -> List[ChainGapRow]:
    rows = []
    for beta in betas:
        for n in ns:
            gap = one_magnon_gap(make_chain(n, beta, delta, boundary))
            rows.append(ChainGapRow(n=n, beta=beta, boundary=boundary, gap=gap))
    return rows


def fit_gap_exponent(ns: Sequence[int], gaps: Sequence[float]) -> float:
    """Slope of log(gap) against log(n)."""
    if len(ns) < 2:
        raise ParameterError("need at least two chain lengths to fit an exponent")
    fit = stats.linregress(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(gaps, dtype=float)))
    return float(fit.slope)
