"""
Sweeps, optimum search and result tables.

A sweep varies either the OAM power fraction p_N2 or the SNR over a grid and
evaluates the selected schemes by the selected methods at every grid point.
Grid points are independent and may run concurrently; rows always come out in
grid order.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from splurge_cnoma_capacity.channel import DEFAULT_CONTROL, SeriesControl
from splurge_cnoma_capacity.closed_form import exact_baseline_capacities, exact_scheme_capacities
from splurge_cnoma_capacity.config import RunConfig
from splurge_cnoma_capacity.exceptions import InfeasibleAllocationError
from splurge_cnoma_capacity.mc_sim import (
    DEFAULT_BLOCK_SIZE,
    BaselineSplit,
    OperatingPoint,
    PowerAllocation,
    SchemeCapacities,
    Scheme,
    ergodic_capacities,
)
from splurge_cnoma_capacity.oam import build_oam_channel

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "variable",
    "scheme",
    "method",
    "c_ccu",
    "c_ceu",
    "c_sum",
    "std_err",
    "effective_order",
    "status",
)

DEFAULT_ANTENNA_COUNTS = (1, 2, 4, 8)

_TIE_TOLERANCE = 1.0e-12
_FEASIBILITY_SLACK = 1.0e-12


class SweepVariable(Enum):
    """Quantity varied along the grid."""
    P_N2 = "p_n2"
    RHO_DB = "rho_db"


class Method(Enum):
    """How a capacity is evaluated."""
    MONTE_CARLO = "monte_carlo"
    CLOSED_FORM = "closed_form"


class SweepConstraint(Enum):
    """
    How the other power fractions follow p_N2.

    CONSERVED_SUM keeps p_F and sets p_N1 = P - p_F - p_N2. FIXED_PN1 keeps
    p_N1, gives the remainder to p_F and treats the template p_F as a floor.
    """
    CONSERVED_SUM = "conserved_sum"
    FIXED_PN1 = "fixed_pn1"


class RowStatus(Enum):
    """Outcome of one (grid value, scheme, method) cell."""
    OK = "ok"
    INFEASIBLE = "infeasible"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class SweepSpec:
    """A grid of operating points and what to evaluate at each of them."""

    variable: SweepVariable
    grid: Tuple[float, ...]
    fixed: OperatingPoint
    schemes: Tuple[Scheme, ...] = (Scheme.CNOMA_OAM, Scheme.CNOMA, Scheme.OMA_OAM)
    methods: Tuple[Method, ...] = (Method.MONTE_CARLO, Method.CLOSED_FORM)
    trials: int = 1_000_000
    seed: int = 7
    constraint: SweepConstraint = SweepConstraint.CONSERVED_SUM
    split: BaselineSplit = BaselineSplit.POWER_CONSERVING
    control: SeriesControl = DEFAULT_CONTROL
    block_size: int = DEFAULT_BLOCK_SIZE
    threads: int = 1

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("sweep grid must not be empty")
        if any(later <= earlier for earlier, later in zip(self.grid, self.grid[1:])):
            raise ValueError(f"sweep grid must be strictly increasing, got {list(self.grid)}")
        if not all(math.isfinite(value) for value in self.grid):
            raise ValueError("sweep grid values must be finite")
        if self.variable is SweepVariable.P_N2:
            total = self.fixed.power.total
            outside = [value for value in self.grid if not 0.0 <= value <= total]
            if outside:
                raise ValueError(f"p_n2 grid values must lie in [0, {total}], got {outside}")
        if not self.schemes:
            raise ValueError("schemes must not be empty")
        if not self.methods:
            raise ValueError("methods must not be empty")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class ResultRow:
    """One CSV row: a scheme evaluated by one method at one grid value."""

    variable: float
    scheme: Scheme
    method: Method
    c_ccu: float
    c_ceu: float
    c_sum: float
    std_err: float
    effective_order: int
    status: RowStatus = RowStatus.OK
    detail: str = ""

    @classmethod
    def from_capacities(
            cls,
            variable: float,
            scheme: Scheme,
            method: Method,
            capacities: SchemeCapacities
    ) -> "ResultRow":
        return cls(
            variable=variable,
            scheme=scheme,
            method=method,
            c_ccu=capacities.c_ccu,
            c_ceu=capacities.c_ceu,
            c_sum=capacities.c_sum,
            std_err=capacities.std_error.sum,
            effective_order=capacities.effective_order,
        )

    @classmethod
    def marker(
            cls,
            variable: float,
            scheme: Scheme,
            method: Method,
            status: RowStatus,
            detail: str
    ) -> "ResultRow":
        """A row without capacities, flagged infeasible or unsupported."""
        return cls(
            variable=variable,
            scheme=scheme,
            method=method,
            c_ccu=math.nan,
            c_ceu=math.nan,
            c_sum=math.nan,
            std_err=math.nan,
            effective_order=0,
            status=status,
            detail=detail,
        )

    def csv_fields(self) -> List[str]:
        """Format the row in CSV column order; floats in full-precision scientific notation."""
        return [
            _format_float(self.variable),
            self.scheme.value,
            self.method.value,
            _format_float(self.c_ccu),
            _format_float(self.c_ceu),
            _format_float(self.c_sum),
            _format_float(self.std_err),
            str(self.effective_order),
            self.status.value,
        ]


def _format_float(value: float) -> str:
    return format(value, ".17e")


@dataclass
class ResultTable:
    """Ordered sweep rows plus free-form annotations such as the optimum p_N2."""

    variable: SweepVariable
    rows: List[ResultRow] = field(default_factory=list)
    annotations: Dict[str, str] = field(default_factory=dict)

    def __iter__(self) -> Iterator[ResultRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def select(
            self,
            scheme: Optional[Union[Scheme, str]] = None,
            method: Optional[Union[Method, str]] = None
    ) -> List[ResultRow]:
        """Rows of one scheme and/or method, in grid order."""
        wanted_scheme = Scheme.parse(scheme) if scheme is not None else None
        wanted_method = Method(method) if method is not None else None
        return [
            row for row in self.rows
            if (wanted_scheme is None or row.scheme is wanted_scheme) and
               (wanted_method is None or row.method is wanted_method)
        ]

    def column(
            self,
            name: str,
            scheme: Union[Scheme, str],
            method: Union[Method, str]
    ) -> np.ndarray:
        """Values of one numeric column for one scheme and method."""
        return np.array([getattr(row, name) for row in self.select(scheme, method)], dtype=float)

    def to_csv_text(self) -> str:
        """Render the table as CSV with a header row and '\\n' line endings."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        return buffer.getvalue()


def write_csv(table: ResultTable, path: Union[str, Path]) -> Path:
    """
    Write a result table to a CSV file.

    Args:
        table: Result table
        path: Output file; parent directories are created

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(table.to_csv_text())
    logger.info("wrote %d rows to %s", len(table), path)
    return path


def allocation_for_pn2(
        p_n2: float,
        *,
        p_n1: float,
        p_f: float,
        total: float,
        constraint: SweepConstraint
) -> PowerAllocation:
    """
    Build the power allocation at one p_N2 value under a sweep constraint.

    Args:
        p_n2: OAM power fraction
        p_n1: Template CCU NOMA fraction (held under FIXED_PN1)
        p_f: Template CEU fraction (held under CONSERVED_SUM, a floor under FIXED_PN1)
        total: Total power P
        constraint: Sweep constraint

    Raises:
        InfeasibleAllocationError: If the allocation violates the constraints
    """
    if constraint is SweepConstraint.CONSERVED_SUM:
        near = total - p_f - p_n2
        if near <= _FEASIBILITY_SLACK or p_n2 <= 0.0:
            raise InfeasibleAllocationError(
                f"p_n2={p_n2} leaves p_n1={near:.6g}; both must be > 0 with p_f={p_f}"
            )
        return PowerAllocation(p_n1=near, p_n2=p_n2, p_f=p_f, total=total)
    far = total - p_n1 - p_n2
    if far < p_f - _FEASIBILITY_SLACK:
        raise InfeasibleAllocationError(
            f"p_n2={p_n2} with p_n1={p_n1} leaves p_f={far:.6g}, below the required {p_f}"
        )
    return PowerAllocation(p_n1=p_n1, p_n2=p_n2, p_f=far, total=total)


def point_at(spec: SweepSpec, value: float) -> OperatingPoint:
    """Operating point of one grid value; raises InfeasibleAllocationError for infeasible p_N2 values."""
    if spec.variable is SweepVariable.RHO_DB:
        return replace(spec.fixed, rho_db=value)
    power = spec.fixed.power
    return replace(
        spec.fixed,
        power=allocation_for_pn2(
            value, p_n1=power.p_n1, p_f=power.p_f, total=power.total, constraint=spec.constraint
        )
    )


def evaluate(
        scheme: Scheme,
        method: Method,
        point: OperatingPoint,
        *,
        trials: int,
        seed: int,
        split: BaselineSplit = BaselineSplit.POWER_CONSERVING,
        control: SeriesControl = DEFAULT_CONTROL,
        block_size: int = DEFAULT_BLOCK_SIZE,
        threads: int = 1
) -> Optional[SchemeCapacities]:
    """
    Evaluate one scheme by one method; None when the method does not cover the scheme.

    OMA-OAM has no closed form.
    """
    if method is Method.MONTE_CARLO:
        return ergodic_capacities(
            scheme, point, trials, seed, block_size=block_size, threads=threads, split=split
        )
    if scheme is Scheme.CNOMA_OAM:
        return exact_scheme_capacities(point, control)
    if scheme is Scheme.CNOMA:
        return exact_baseline_capacities(point, control, split)
    return None


def _grid_rows(spec: SweepSpec, value: float, threads: int) -> List[ResultRow]:
    try:
        point = point_at(spec, value)
    except InfeasibleAllocationError as exc:
        logger.debug("grid value %.6g is infeasible: %s", value, exc)
        return [
            ResultRow.marker(value, scheme, method, RowStatus.INFEASIBLE, str(exc))
            for scheme in spec.schemes for method in spec.methods
        ]

    rows = []
    for scheme in spec.schemes:
        for method in spec.methods:
            capacities = evaluate(
                scheme,
                method,
                point,
                trials=spec.trials,
                seed=spec.seed,
                split=spec.split,
                control=spec.control,
                block_size=spec.block_size,
                threads=threads,
            )
            if capacities is None:
                rows.append(ResultRow.marker(
                    value, scheme, method, RowStatus.UNSUPPORTED, f"no {method.value} for {scheme.value}"
                ))
            else:
                rows.append(ResultRow.from_capacities(value, scheme, method, capacities))
    return rows


def sweep(spec: SweepSpec) -> ResultTable:
    """
    Evaluate every (grid value, scheme, method) cell of a sweep.

    Infeasible grid values produce rows with status 'infeasible'; OMA-OAM by
    closed form produces rows with status 'unsupported'. The same spec always
    yields the same table.

    Args:
        spec: Sweep specification

    Returns:
        ResultTable in grid order, then scheme order, then method order

    Raises:
        SeriesTruncationError: If a closed-form series does not converge
    """
    logger.info(
        "sweeping %s over %d value(s): schemes=%s methods=%s",
        spec.variable.value,
        len(spec.grid),
        ",".join(scheme.value for scheme in spec.schemes),
        ",".join(method.value for method in spec.methods),
    )
    if spec.threads > 1 and len(spec.grid) > 1:
        per_value = Parallel(n_jobs=min(spec.threads, len(spec.grid)), prefer="threads")(
            delayed(_grid_rows)(spec, value, 1) for value in spec.grid
        )
    else:
        per_value = [_grid_rows(spec, value, spec.threads) for value in spec.grid]

    table = ResultTable(variable=spec.variable)
    for rows in per_value:
        table.rows.extend(rows)
    return table


@dataclass(frozen=True)
class OptimumResult:
    """Outcome of the p_N2 grid search."""

    p_n2: float
    c_sum: float
    constraint: SweepConstraint
    grid: Tuple[float, ...]
    c_sum_values: Tuple[float, ...]
    ties: Tuple[float, ...] = ()
    degenerate: bool = False


def _pn2_grid(p_f: float, grid_step: float, total: float) -> Tuple[float, ...]:
    values = []
    k = 1
    while k * grid_step < total - p_f - _FEASIBILITY_SLACK:
        values.append(round(k * grid_step, 12))
        k += 1
    return tuple(values)


def find_optimal_pn2(
        rho_db: float,
        p_f: float,
        grid_step: float,
        fixed: OperatingPoint,
        *,
        constraint: SweepConstraint = SweepConstraint.CONSERVED_SUM,
        control: SeriesControl = DEFAULT_CONTROL
) -> OptimumResult:
    """
    Grid-search the p_N2 maximising the closed-form sum capacity of CNOMA-OAM.

    The grid is grid_step, 2 grid_step, ... strictly below P - p_F. Ties go to
    the smaller p_N2 and are listed in the result. When the grid has no point
    inside (0, P - p_F) the midpoint of that interval is used instead and a
    warning is logged.

    Args:
        rho_db: Transmit SNR in dB
        p_f: CEU power fraction, 0 < p_f < P
        grid_step: Grid spacing (> 0)
        fixed: Template supplying links, OAM channel, total power and p_N1 (FIXED_PN1)
        constraint: How p_N1 and p_F follow p_N2
        control: Series truncation rule

    Returns:
        OptimumResult

    Raises:
        InfeasibleAllocationError: If no grid value gives a feasible allocation
        ValueError: If grid_step <= 0 or p_f is outside (0, P)
    """
    total = fixed.power.total
    if not grid_step > 0.0:
        raise ValueError(f"grid_step must be > 0, got {grid_step}")
    if not 0.0 < p_f < total:
        raise ValueError(f"p_f must lie in (0, {total}), got {p_f}")

    grid = _pn2_grid(p_f, grid_step, total)
    degenerate = not grid
    if degenerate:
        grid = ((total - p_f) / 2.0,)
        logger.warning(
            "feasible p_n2 range (0, %.6g) is narrower than the grid step %.6g; using its midpoint",
            total - p_f, grid_step
        )

    base = replace(fixed, rho_db=rho_db)
    values = []
    for p_n2 in grid:
        try:
            power = allocation_for_pn2(
                p_n2, p_n1=fixed.power.p_n1, p_f=p_f, total=total, constraint=constraint
            )
        except InfeasibleAllocationError:
            values.append(math.nan)
            continue
        values.append(exact_scheme_capacities(replace(base, power=power), control).c_sum)

    c_sum = np.array(values, dtype=float)
    if np.all(np.isnan(c_sum)):
        raise InfeasibleAllocationError(
            f"no feasible p_n2 on the grid for p_f={p_f} under {constraint.value}"
        )
    best = int(np.nanargmax(c_sum))
    tolerance = _TIE_TOLERANCE * max(1.0, abs(c_sum[best]))
    ties = tuple(
        grid[i] for i in range(len(grid))
        if i != best and not math.isnan(c_sum[i]) and abs(c_sum[i] - c_sum[best]) <= tolerance
    )
    if ties:
        logger.info("p_n2 optimum %.6g ties with %s", grid[best], ties)
    return OptimumResult(
        p_n2=grid[best],
        c_sum=float(c_sum[best]),
        constraint=constraint,
        grid=grid,
        c_sum_values=tuple(values),
        ties=ties,
        degenerate=degenerate,
    )


def build_sweep_spec(config: RunConfig) -> SweepSpec:
    """Translate a run configuration into a sweep specification."""
    return SweepSpec(
        variable=SweepVariable(config.sweep_variable),
        grid=config.grid(),
        fixed=config.operating_point(),
        schemes=tuple(Scheme.parse(scheme) for scheme in config.schemes),
        methods=tuple(Method(method) for method in config.methods),
        trials=config.trials,
        seed=config.seed,
        constraint=SweepConstraint(config.sweep_constraint),
        split=config.split(),
        control=config.control(),
        block_size=config.block_size,
        threads=config.threads,
    )


def figure_spec(figure: int, **overrides) -> SweepSpec:
    """
    Sweep specification reproducing one of the reference figures.

    Figure 3 sweeps p_N2 at 15 dB with p_F = 0.6; figures 4 to 6 sweep the SNR
    from 0 to 30 dB for all three schemes.

    Args:
        figure: 3, 4, 5 or 6
        **overrides: RunConfig keys replacing preset values (e.g. trials)
    """
    return build_sweep_spec(RunConfig.for_figure(figure, **overrides))


@dataclass(frozen=True)
class AntennaStudyRow:
    antennas: int
    mu1: float
    cnoma_oam: SchemeCapacities
    oma_oam: SchemeCapacities

    @property
    def beats_oma_in_sum(self) -> bool:
        """CNOMA-OAM has the larger sum capacity."""
        return self.cnoma_oam.c_sum > self.oma_oam.c_sum

    @property
    def oma_wins_ccu(self) -> bool:
        """OMA-OAM serves the CCU better."""
        return self.oma_oam.c_ccu > self.cnoma_oam.c_ccu


def antenna_study(
        point: OperatingPoint,
        *,
        antennas: Sequence[int] = DEFAULT_ANTENNA_COUNTS,
        trials: int = 100_000,
        seed: int = 7,
        control: SeriesControl = DEFAULT_CONTROL
) -> List[AntennaStudyRow]:
    """
    Compare CNOMA-OAM (closed form) with OMA-OAM (Monte Carlo) across antenna counts.

    The antenna count only changes μ_1 = 1/√M, so this shows which M makes the
    OAM term large enough to reverse the CCU and sum-capacity orderings.
    """
    rows = []
    for count in antennas:
        candidate = replace(point, oam=build_oam_channel(point.oam.mode, int(count)))
        rows.append(AntennaStudyRow(
            antennas=int(count),
            mu1=candidate.oam.principal_singular_value,
            cnoma_oam=exact_scheme_capacities(candidate, control),
            oma_oam=ergodic_capacities(Scheme.OMA_OAM, candidate, trials, seed),
        ))
        logger.debug("antenna study M=%d done", count)
    return rows


def summarize(table: ResultTable) -> Iterable[str]:
    """Human-readable lines, one per row."""
    name = table.variable.value
    for row in table.rows:
        if row.status is not RowStatus.OK:
            yield f"{name}={row.variable:g} {row.scheme.value:<9} {row.method.value:<11} {row.status.value}"
            continue
        line = (
            f"{name}={row.variable:g} {row.scheme.value:<9} {row.method.value:<11} "
            f"C_CCU={row.c_ccu:.4f} C_CEU={row.c_ceu:.4f} C_sum={row.c_sum:.4f}"
        )
        if row.method is Method.MONTE_CARLO:
            line += f" (se {row.std_err:.1e})"
        yield line
