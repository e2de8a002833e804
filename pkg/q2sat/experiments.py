"""
Ensemble runs: gap scaling, 1/delta^2 histograms and trivial-probability sweeps.

Instances are seeded base_seed + index and fanned out to worker processes;
results come back in index order, so every output is independent of the
worker count.
"""
import asyncio
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from config import DEFAULT_BIN_WIDTH, DEFAULT_MULTIPLIER, SETTINGS, samples_for
from dynamics import evolve_lab, evolve_rotating, schedule_from_gap
from errors import DimensionError, NumericalError, ParameterError
from hamiltonian import build_h0
from holonomy import predicted_trivial_probability
from instance import ClauseParams, ProductAssignment, generate_instance, make_clause, product_state_vector
from reports import write_csv, write_json, write_plot_data
from spectrum import component_spectrum, inverse_square_gap
from store import EvolutionRow, RunLedger, SpectrumRow

logger = logging.getLogger(__name__)

SPOT_DENSITIES = (0.1, 0.15, 0.2)

# -------------------------------------------------------------------
# Records
# -------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumSample:
    n: int
    seed: int
    m: int
    gap: Optional[float]
    inv_sq_gap: Optional[float]
    degeneracy: Optional[int]
    excluded_reason: Optional[str] = None


@dataclass(frozen=True)
class ScalingRecord:
    n: int
    sample_count: int
    mean_inv_sq_gap: Optional[float]
    excluded_count: int
    samples: List[SpectrumSample] = field(default_factory=list)

    def included(self) -> List[float]:
        return [s.inv_sq_gap for s in self.samples if s.excluded_reason is None]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    correlation_r: float


@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    count: int


@dataclass(frozen=True)
class HistogramResult:
    n: int
    bins: List[HistogramBin]
    values: List[float]
    excluded_count: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    def modal_bin(self) -> HistogramBin:
        return max(self.bins, key=lambda b: b.count)


@dataclass(frozen=True)
class DynamicsSample:
    n: int
    seed: int
    total_time: Optional[float]
    steps: int
    ground_fidelity: Optional[float]
    trivial_probability: Optional[float]
    norm_drift: Optional[float]
    excluded_reason: Optional[str] = None
    # Holonomy prediction for the same schedule
    predicted_trivial_probability: Optional[float] = None


@dataclass(frozen=True)
class DynamicsAggregate:
    n: int
    sample_count: int
    excluded_count: int
    mean_trivial_probability: float
    sem_trivial_probability: float
    mean_ground_fidelity: float
    sem_ground_fidelity: float


@dataclass(frozen=True)
class SpectrumJob:
    n: int
    d: float
    seed: int
    beta: complex
    delta: float


@dataclass(frozen=True)
class DynamicsJob:
    n: int
    d: float
    seed: int
    beta: complex
    delta: float
    multiplier: float
    frame: str = "lab"
    steps: Optional[int] = None


# -------------------------------------------------------------------
# Fan-out
# -------------------------------------------------------------------


def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """fn over items in worker processes, results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]

    async def gather_all():
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            tasks = [loop.run_in_executor(pool, fn, x) for x in items]
            return await asyncio.gather(*tasks)

    return list(asyncio.run(gather_all()))


# -------------------------------------------------------------------
# Statistics
# -------------------------------------------------------------------


def mean_standard_error(values: Sequence[float]):
    """(mean, standard error of the mean); the error is nan below two values."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), math.nan
    return float(arr.mean()), float(stats.sem(arr))


def fit_points(ns: Sequence[float], means: Sequence[float]) -> FitResult:
    """OLS of ln(mean) against ln(n), unweighted."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    if len(np.unique(x)) < 2:
        raise ParameterError(f"need at least 2 distinct n values to fit, got {len(np.unique(x))}")
    fit = stats.linregress(x, y)
    return FitResult(slope=float(fit.slope), intercept=float(fit.intercept), correlation_r=float(fit.rvalue))


def fit_loglog(records: Sequence[ScalingRecord]) -> FitResult:
    usable = [r for r in records if r.mean_inv_sq_gap is not None and r.sample_count > 0]
    return fit_points([r.n for r in usable], [r.mean_inv_sq_gap for r in usable])


def histogram_inv_sq_gap(samples: Sequence[float], bin_width: float = DEFAULT_BIN_WIDTH) -> List[HistogramBin]:
    """Right-closed bins (k w, (k+1) w] spanning the sample range, empty bins included."""
    if not bin_width > 0:
        raise ParameterError(f"bin width must be positive, got {bin_width!r}")
    values = np.asarray(list(samples), dtype=float)
    if values.size == 0:
        return []
    # Guard against x/w landing a hair above an integer
    idx = np.ceil(values / bin_width - 1e-9).astype(np.int64) - 1
    lo_idx, hi_idx = int(idx.min()), int(idx.max())
    counts = np.bincount(idx - lo_idx, minlength=hi_idx - lo_idx + 1)
    return [HistogramBin(lo=k * bin_width, hi=(k + 1) * bin_width, count=int(counts[k - lo_idx]))
            for k in range(lo_idx, hi_idx + 1)]


# -------------------------------------------------------------------
# Gap scaling
# -------------------------------------------------------------------


def spectrum_task(job: SpectrumJob) -> SpectrumSample:
    """One instance; zero gaps and failed diagonalizations come back excluded, not raised."""
    inst = generate_instance(job.n, job.d, make_clause(job.beta, job.delta), job.seed)
    spec = None
    try:
        spec = component_spectrum(inst)
        inv = inverse_square_gap(spec, min_gap=1e-7 * job.delta)
    except NumericalError as e:
        logger.warning(f"Excluded n={job.n} seed={job.seed}: {type(e).__name__}: {e}")
        gap = spec.gap_delta if spec is not None else None
        degeneracy = spec.degeneracy if spec is not None else None
        return SpectrumSample(job.n, job.seed, inst.m, gap, None, degeneracy, f"{type(e).__name__}: {e}")
    return SpectrumSample(job.n, job.seed, inst.m, spec.gap_delta, inv, spec.degeneracy)


def _sample_from_row(row: SpectrumRow) -> SpectrumSample:
    return SpectrumSample(row.n, int(row.seed), row.m, row.gap_delta, row.inv_sq_gap, row.degeneracy,
                          row.excluded_reason)


def _check_density(d: float) -> None:
    if not 0.0 <= d <= 1.0:
        raise ParameterError(f"d must lie in [0, 1], got {d!r}")


def _resolve_samples(n: int, samples: Union[int, Dict[int, int], None], full: bool) -> int:
    if samples is None:
        count = samples_for(n, full)
    elif isinstance(samples, dict):
        count = samples[n]
    else:
        count = samples
    if count < 1:
        raise ParameterError(f"samples per n must be >= 1, got {count}")
    return count


def _spectrum_samples(jobs: List[SpectrumJob], workers: int, ledger: Optional[RunLedger]) -> List[SpectrumSample]:
    cached: Dict[int, SpectrumSample] = {}
    if ledger is not None:
        for i, job in enumerate(jobs):
            row = ledger.get_spectrum(job.n, job.seed, job.d, job.beta, job.delta)
            if row is not None:
                cached[i] = _sample_from_row(row)
    pending = [i for i in range(len(jobs)) if i not in cached]
    fresh = parallel_map(spectrum_task, [jobs[i] for i in pending], workers)
    for i, sample in zip(pending, fresh):
        cached[i] = sample
        if ledger is not None:
            job = jobs[i]
            ledger.put_spectrum(SpectrumRow(
                n=job.n, seed=str(job.seed), density=job.d, beta_re=job.beta.real, beta_im=job.beta.imag,
                delta=job.delta, m=sample.m, degeneracy=sample.degeneracy, gap_delta=sample.gap,
                inv_sq_gap=sample.inv_sq_gap, method="components", excluded_reason=sample.excluded_reason,
            ))
    if ledger is not None and len(pending) < len(jobs):
        logger.info(f"Reused {len(jobs) - len(pending)} ledger rows")
    return [cached[i] for i in range(len(jobs))]


def _record(n: int, samples: List[SpectrumSample]) -> ScalingRecord:
    included = [s.inv_sq_gap for s in samples if s.excluded_reason is None]
    mean = float(np.mean(included)) if included else None
    return ScalingRecord(n=n, sample_count=len(included), mean_inv_sq_gap=mean,
                         excluded_count=len(samples) - len(included), samples=samples)


def run_scaling(n_range: Iterable[int], d: float, samples_per_n: Union[int, Dict[int, int], None] = None,
                clause: Optional[ClauseParams] = None, base_seed: int = 0, workers: int = 1,
                ledger: Optional[RunLedger] = None, full: bool = False) -> List[ScalingRecord]:
    """<1/delta^2> per n; zero-gap instances are excluded and counted."""
    _check_density(d)
    clause = clause or make_clause()
    records = []
    for n in n_range:
        count = _resolve_samples(n, samples_per_n, full)
        jobs = [SpectrumJob(n, d, base_seed + i, clause.beta, clause.delta) for i in range(count)]
        record = _record(n, _spectrum_samples(jobs, workers, ledger))
        logger.info(f"n={n}: {record.sample_count} samples, {record.excluded_count} excluded, "
                    f"<1/delta^2>={record.mean_inv_sq_gap}")
        records.append(record)
    return records


def run_histogram(n: int, d: float, samples: int, clause: Optional[ClauseParams] = None, base_seed: int = 0,
                  workers: int = 1, bin_width: float = DEFAULT_BIN_WIDTH,
                  ledger: Optional[RunLedger] = None) -> HistogramResult:
    record = run_scaling([n], d, samples, clause, base_seed, workers, ledger)[0]
    values = record.included()
    return HistogramResult(n=n, bins=histogram_inv_sq_gap(values, bin_width), values=values,
                           excluded_count=record.excluded_count)


# -------------------------------------------------------------------
# Dynamics sweep
# -------------------------------------------------------------------


def dynamics_task(job: DynamicsJob) -> DynamicsSample:
    try:
        return _evolve_instance(job)
    except NumericalError as e:
        reason = f"{type(e).__name__}: {e}"
        logger.warning(f"Excluded n={job.n} seed={job.seed}: {reason}")
        return DynamicsSample(job.n, job.seed, None, 0, None, None, None, reason)


def _evolve_instance(job: DynamicsJob) -> DynamicsSample:
    inst = generate_instance(job.n, job.d, make_clause(job.beta, job.delta), job.seed)
    spec = component_spectrum(inst, with_basis=True)
    gap = spec.gap_delta
    if gap is None:
        # H0 = 0: nothing evolves, any T closes the path
        gap = job.delta
    elif gap < 1e-7 * job.delta:
        reason = f"gap {gap:.3e} below exclusion threshold"
        logger.warning(f"Excluded n={job.n} seed={job.seed}: {reason}")
        return DynamicsSample(job.n, job.seed, None, 0, None, None, None, reason)

    sched = schedule_from_gap(gap, job.multiplier)
    h0 = build_h0(inst)
    psi0 = product_state_vector(ProductAssignment.uniform(inst.n, 1.0, 0.0))
    if job.frame == "rotating":
        result = evolve_rotating(h0, sched, psi0, basis=spec.ground_basis)
    else:
        result = evolve_lab(h0, sched, psi0, steps=job.steps, basis=spec.ground_basis)
    predicted = predicted_trivial_probability(spec.ground_basis, sched)
    return DynamicsSample(job.n, job.seed, sched.total_time, result.step_count, result.ground_fidelity,
                          result.trivial_probability, result.norm_drift,
                          predicted_trivial_probability=predicted)


def _dynamics_samples(jobs: List[DynamicsJob], workers: int, ledger: Optional[RunLedger]) -> List[DynamicsSample]:
    cached: Dict[int, DynamicsSample] = {}
    if ledger is not None:
        for i, job in enumerate(jobs):
            row = ledger.get_evolution(job.n, job.seed, job.d, job.beta, job.delta, job.multiplier,
                                       job.frame, job.steps)
            if row is not None:
                cached[i] = DynamicsSample(row.n, int(row.seed), row.total_time, row.steps, row.ground_fidelity,
                                           row.trivial_probability, row.norm_drift, row.excluded_reason,
                                           row.predicted_trivial_probability)
    pending = [i for i in range(len(jobs)) if i not in cached]
    fresh = parallel_map(dynamics_task, [jobs[i] for i in pending], workers)
    for i, sample in zip(pending, fresh):
        cached[i] = sample
        if ledger is not None:
            job = jobs[i]
            ledger.put_evolution(EvolutionRow(
                n=job.n, seed=str(job.seed), density=job.d, beta_re=job.beta.real, beta_im=job.beta.imag,
                delta=job.delta, multiplier=job.multiplier, total_time=sample.total_time, steps=sample.steps,
                frame=job.frame, requested_steps=job.steps or 0, ground_fidelity=sample.ground_fidelity,
                trivial_probability=sample.trivial_probability, norm_drift=sample.norm_drift,
                predicted_trivial_probability=sample.predicted_trivial_probability,
                excluded_reason=sample.excluded_reason,
            ))
    if ledger is not None and len(pending) < len(jobs):
        logger.info(f"Reused {len(jobs) - len(pending)} ledger rows")
    return [cached[i] for i in range(len(jobs))]


def aggregate_dynamics(n: int, samples: List[DynamicsSample]) -> DynamicsAggregate:
    kept = [s for s in samples if s.excluded_reason is None]
    trivial = mean_standard_error([s.trivial_probability for s in kept])
    fidelity = mean_standard_error([s.ground_fidelity for s in kept])
    return DynamicsAggregate(n=n, sample_count=len(kept), excluded_count=len(samples) - len(kept),
                             mean_trivial_probability=trivial[0], sem_trivial_probability=trivial[1],
                             mean_ground_fidelity=fidelity[0], sem_ground_fidelity=fidelity[1])


@dataclass(frozen=True)
class EscapeSummary:
    """
    Pass counts for one n. A sample passes when it stays in the ground space
    (fidelity >= min_fidelity) and leaves the trivial states (trivial
    probability <= max_trivial). Instances whose holonomy keeps |00...0>
    in place cannot pass at any T, so they are counted separately.
    """
    n: int
    kept: int
    passed: int
    escape_predicted: int
    escape_passed: int

    @property
    def share(self) -> float:
        return self.passed / self.kept if self.kept else math.nan

    @property
    def escape_share(self) -> float:
        return self.escape_passed / self.escape_predicted if self.escape_predicted else math.nan


def summarize_escape(n: int, samples: Sequence[DynamicsSample], min_fidelity: float = 0.9,
                     max_trivial: float = 0.9, escape_limit: float = 0.9) -> EscapeSummary:
    kept = [s for s in samples if s.excluded_reason is None]

    def passes(s: DynamicsSample) -> bool:
        return s.ground_fidelity >= min_fidelity and s.trivial_probability <= max_trivial

    escaping = [s for s in kept
                if s.predicted_trivial_probability is not None and s.predicted_trivial_probability <= escape_limit]
    return EscapeSummary(n=n, kept=len(kept), passed=sum(passes(s) for s in kept),
                         escape_predicted=len(escaping), escape_passed=sum(passes(s) for s in escaping))


def run_dynamics_sweep(n_range: Iterable[int], d: float, samples: int, multiplier: float = DEFAULT_MULTIPLIER,
                       clause: Optional[ClauseParams] = None, base_seed: int = 0, workers: int = 1,
                       ledger: Optional[RunLedger] = None, frame: str = "lab", steps: Optional[int] = None,
                       max_qubits: Optional[int] = None) -> Dict[int, List[DynamicsSample]]:
    """Evolve |00...0> over T = multiplier pi/(50 delta^2) for every instance, alongside its holonomy prediction."""
    _check_density(d)
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    if frame not in ("lab", "rotating"):
        raise ParameterError(f"frame must be 'lab' or 'rotating', got '{frame}'")
    cap = SETTINGS.dynamics_max_qubits if max_qubits is None else max_qubits
    clause = clause or make_clause()
    table: Dict[int, List[DynamicsSample]] = {}
    for n in n_range:
        if n > cap:
            raise DimensionError(f"dynamics limited to n <= {cap}, got n = {n}")
        jobs = [DynamicsJob(n, d, base_seed + i, clause.beta, clause.delta, multiplier, frame, steps)
                for i in range(samples)]
        table[n] = _dynamics_samples(jobs, workers, ledger)
        agg = aggregate_dynamics(n, table[n])
        logger.info(f"n={n}: trivial={agg.mean_trivial_probability:.4f}+-{agg.sem_trivial_probability:.4f}, "
                    f"fidelity={agg.mean_ground_fidelity:.4f}")
    return table


def d_spot_check(n: int, densities: Sequence[float] = SPOT_DENSITIES, samples: int = 30,
                 **kwargs) -> Dict[float, DynamicsAggregate]:
    """Trivial-probability aggregates at a few densities around the failure regime d > 0.15."""
    return {d: aggregate_dynamics(n, run_dynamics_sweep([n], d, samples, **kwargs)[n]) for d in densities}


# -------------------------------------------------------------------
# Output files
# -------------------------------------------------------------------


def write_scaling_csv(path: Union[str, Path], records: Sequence[ScalingRecord]) -> None:
    rows = [(s.n, s.seed, s.m, s.gap, s.inv_sq_gap, s.degeneracy) for r in records for s in r.samples]
    write_csv(path, ["n", "seed", "m", "gap", "inv_sq_gap", "degeneracy"], rows)


def write_fit_json(path: Union[str, Path], fit: Optional[FitResult], records: Sequence[ScalingRecord]) -> None:
    write_json(path, {
        "slope": fit.slope if fit else None,
        "intercept": fit.intercept if fit else None,
        "r": fit.correlation_r if fit else None,
        "samples": {str(r.n): r.sample_count for r in records},
        "exclusions": {str(r.n): r.excluded_count for r in records},
        "means": {str(r.n): r.mean_inv_sq_gap for r in records},
    })


def write_scaling_plot(path: Union[str, Path], records: Sequence[ScalingRecord], fit: Optional[FitResult]) -> None:
    rows = []
    for r in records:
        if r.mean_inv_sq_gap is None:
            continue
        line = fit.slope * math.log(r.n) + fit.intercept if fit else None
        rows.append((r.n, r.mean_inv_sq_gap, math.log(r.n), math.log(r.mean_inv_sq_gap), line))
    write_plot_data(path, ["n", "mean_inv_sq_gap", "ln_n", "ln_mean", "ln_fit"], rows)


def write_histogram_csv(path: Union[str, Path], bins: Sequence[HistogramBin]) -> None:
    write_csv(path, ["bin_lo", "bin_hi", "count"], [(b.lo, b.hi, b.count) for b in bins])


def write_histogram_plot(path: Union[str, Path], bins: Sequence[HistogramBin]) -> None:
    write_plot_data(path, ["bin_center", "count"], [((b.lo + b.hi) / 2, b.count) for b in bins])


def write_dynamics_csv(path: Union[str, Path], table: Dict[int, List[DynamicsSample]]) -> None:
    rows = [(s.n, s.seed, s.total_time, s.steps, s.ground_fidelity, s.trivial_probability,
             s.predicted_trivial_probability)
            for n in table for s in table[n]]
    write_csv(path, ["n", "seed", "T", "steps", "ground_fidelity", "trivial_probability",
                     "predicted_trivial_probability"], rows)


def write_dynamics_plot(path: Union[str, Path], table: Dict[int, List[DynamicsSample]]) -> None:
    rows = []
    for n, samples in table.items():
        agg = aggregate_dynamics(n, samples)
        rows.append((n, agg.mean_trivial_probability, agg.sem_trivial_probability,
                     agg.mean_ground_fidelity, agg.sem_ground_fidelity))
    write_plot_data(path, ["n", "mean_trivial", "sem_trivial", "mean_fidelity", "sem_fidelity"], rows)
