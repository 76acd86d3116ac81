"""Configuration-driven experiment runner.

An experiment config names a plant, an optional certificate override, one or
more trigger parameter sets, constant initial functions and horizons. Every
(initial, horizon, trigger) combination becomes one independent run; runs are
fanned out over worker threads and merged back in run-index order, so the
summary never depends on completion order.
"""

import asyncio
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, computed_field, model_validator

from delay_etc.benchmarks import (
    COUNT_TOLERANCE,
    LONG_HORIZON,
    SHORT_HORIZON,
    PublishedCell,
    example1_phi,
    example1_system,
    example2_lipschitz,
    example2_system,
    published_cells,
)
from delay_etc.certificate import (
    KrasovskiiCertificate,
    check_functional_bounds,
    check_iss_decrement,
    derive_example2_certificate,
    derive_linear_certificate,
)
from delay_etc.errors import InfeasibleError, RejectedInputError
from delay_etc.history import HistoryWindow
from delay_etc.reports import ViolationReport
from delay_etc.simulation import (
    SimConfig,
    SimTrace,
    bound_margin,
    check_restriction,
    classify_event_sequence,
    count_events,
    final_state_norm,
    inter_event_times,
    simulate,
    v_bound_oracle,
    verify_state_bound,
    zero_state_from,
)
from delay_etc.settings import Settings, load_settings
from delay_etc.systems import DelaySystem, Example2Params, LinearDelaySystem, MatrixNorm
from delay_etc.trigger import TriggerMode, TriggerParams
from delay_etc.tuner import (
    LipschitzConstants,
    NontrivialityVariant,
    TunerResult,
    check_linear_feasibility,
    check_nontriviality,
    evaluate_constants,
    linear_lipschitz_constants,
    tune,
)

logger = logging.getLogger(__name__)

Matrix = list[list[float]]


class LinearSystemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A1: Matrix
    A2: Matrix
    B: Matrix
    K: Matrix
    tau: int = Field(default=1, ge=0)

    def build(self) -> LinearDelaySystem:
        return LinearDelaySystem(A1=self.A1, A2=self.A2, B=self.B, K=self.K, tau=self.tau)


class Example2SystemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A1: float = 1.0
    A2: float = 0.05
    B: float = 2.0
    K: float = -0.3
    tau: Literal[1] = 1

    def build(self) -> Example2Params:
        return Example2Params(A1=self.A1, A2=self.A2, B=self.B, K=self.K, tau=self.tau)


class SystemConfig(BaseModel):
    """Exactly one of ``linear`` or ``example2``."""

    model_config = ConfigDict(extra="forbid")

    linear: LinearSystemConfig | None = None
    example2: Example2SystemConfig | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> Self:
        if (self.linear is None) == (self.example2 is None):
            raise ValueError("system needs exactly one of 'linear' or 'example2'")
        if self.linear is not None:
            # Dimension checks live in LinearDelaySystem; surface them as field errors.
            self.linear.build()
        return self

    @property
    def dim(self) -> int:
        return len(self.linear.A1) if self.linear is not None else 1

    @property
    def tau(self) -> int:
        return self.linear.tau if self.linear is not None else 1


class CertificateOverride(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eps: float | None = Field(default=None, ge=0.0)
    mu: float | None = Field(default=None, gt=0.0, lt=1.0)


class TriggerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma: float = Field(ge=0.0)
    a: float = Field(ge=0.0)
    b: float = Field(gt=0.0, lt=1.0)
    mode: TriggerMode = TriggerMode.FULL

    @model_validator(mode="after")
    def _mode_consistent(self) -> Self:
        self.to_params()
        return self

    def to_params(self) -> TriggerParams:
        return TriggerParams(sigma=self.sigma, a=self.a, b=self.b, mode=self.mode)


class OutputConfig(BaseModel):
    """Output file names, resolved against the run's output directory.

    ``trace_csv`` is a stem pattern: each run writes
    ``<stem>_i<initial>_h<horizon>_t<trigger><suffix>``. Set it to null to
    skip trace files.
    """

    model_config = ConfigDict(extra="forbid")

    trace_csv: str | None = "trace.csv"
    summary_json: str = "summary.json"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: SystemConfig
    certificate: CertificateOverride | None = None
    trigger: TriggerConfig | list[TriggerConfig]
    initial: list[list[float]] = Field(min_length=1)
    horizons: list[PositiveInt] = Field(min_length=1)
    outputs: OutputConfig = OutputConfig()
    allow_infeasible: bool = False

    @model_validator(mode="after")
    def _initials_match_system(self) -> Self:
        if isinstance(self.trigger, list) and not self.trigger:
            raise ValueError("trigger list must not be empty")
        dim = self.system.dim
        for index, vector in enumerate(self.initial):
            if len(vector) != dim:
                raise ValueError(
                    f"initial[{index}] has dimension {len(vector)}, system has {dim}"
                )
        return self

    @property
    def triggers(self) -> list[TriggerConfig]:
        return self.trigger if isinstance(self.trigger, list) else [self.trigger]

    def phis(self) -> list[HistoryWindow]:
        return [HistoryWindow.constant(np.array(v), self.system.tau) for v in self.initial]


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate a JSON experiment config."""
    return ExperimentConfig.model_validate_json(Path(path).read_text())


@dataclass(frozen=True)
class PreparedExperiment:
    """A validated config turned into a plant, certificate and constants."""

    config: ExperimentConfig
    system: DelaySystem
    cert: KrasovskiiCertificate
    consts: LipschitzConstants
    feasible: bool | None


def prepare(config: ExperimentConfig) -> PreparedExperiment:
    """Derive the certificate and Lipschitz data for a config.

    Raises:
        InfeasibleError: If a linear plant fails the feasibility inequality
            and ``allow_infeasible`` is not set.
        CertificateInfeasibleError: If the certificate has mu <= 0.
        RejectedInputError: If a linear plant has tau != 1.
    """
    override = config.certificate or CertificateOverride()
    feasible: bool | None = None
    if config.system.linear is not None:
        system = config.system.linear.build()
        feasible = check_linear_feasibility(system)
        if not feasible:
            if not config.allow_infeasible:
                raise InfeasibleError(
                    "Linear plant fails the feasibility inequality; set allow_infeasible to run it"
                )
            logger.warning("Feasibility inequality fails; running because allow_infeasible is set")
        linear = derive_linear_certificate(system, eps=override.eps)
        consts = linear_lipschitz_constants(system, linear.cert)
    else:
        params = config.system.example2.build()
        system = example2_system(params)
        linear = derive_example2_certificate(params, eps=0.1 if override.eps is None else override.eps)
        consts = example2_lipschitz(params)
    cert = linear.cert
    if override.mu is not None:
        if override.mu > cert.mu:
            logger.warning(f"Certificate mu overridden upward from {cert.mu:.6g} to {override.mu:.6g}")
        cert = cert.with_mu(override.mu)
    return PreparedExperiment(config=config, system=system, cert=cert, consts=consts, feasible=feasible)


class RunSummary(BaseModel):
    """Outcome of one (initial, horizon, trigger) run."""

    initial_index: int
    horizon_index: int
    trigger_index: int
    initial: list[float]
    horizon: int
    trigger: dict[str, Any]
    event_count_incl: int
    event_count_excl: int
    min_gap: int | None
    max_gap: int | None
    sequence_class: str
    final_state_norm: float
    bound_margin: float | None
    constants: dict[str, Any]
    certified: bool
    violations: list[dict[str, Any]]
    trace_csv: str | None = None


class ExperimentSummary(BaseModel):
    certificate: dict[str, float]
    lipschitz: dict[str, float]
    feasible: bool | None
    runs: list[RunSummary]

    @property
    def certified_violations(self) -> list[RunSummary]:
        """Certified runs that nevertheless reported violations."""
        return [run for run in self.runs if run.certified and run.violations]


@dataclass(frozen=True)
class RunSpec:
    initial_index: int
    horizon_index: int
    trigger_index: int
    phi: HistoryWindow
    horizon: int
    params: TriggerParams


def run_specs(config: ExperimentConfig) -> list[RunSpec]:
    """The cross product initials x horizons x triggers, in run-index order."""
    phis = config.phis()
    return [
        RunSpec(i, h, t, phis[i], config.horizons[h], config.triggers[t].to_params())
        for i, h, t in itertools.product(
            range(len(phis)), range(len(config.horizons)), range(len(config.triggers))
        )
    ]


def trace_path(base: Path, spec: RunSpec) -> Path:
    """``<stem>_i<initial>_h<horizon>_t<trigger><suffix>`` next to ``base``."""
    suffix = base.suffix or ".csv"
    name = f"{base.stem}_i{spec.initial_index}_h{spec.horizon_index}_t{spec.trigger_index}{suffix}"
    return base.with_name(name)


def _execute_run(prepared: PreparedExperiment, spec: RunSpec, out_dir: Path) -> RunSummary:
    cert = prepared.cert
    config = SimConfig(spec.horizon, spec.phi, spec.params, record_v=True)
    trace = simulate(prepared.system, cert, config)
    constants = evaluate_constants(spec.params, cert, prepared.consts, spec.phi)

    reports = [check_restriction(trace, cert), check_iss_decrement(cert, trace)]
    margin: float | None = None
    if constants.c > 0.0:
        reports.append(verify_state_bound(trace, constants, cert))
        reports.append(v_bound_oracle(trace, cert, constants))
        margin = bound_margin(trace, constants, cert)
    gaps = inter_event_times(trace)
    if constants.nontrivial_certified and min(gaps, default=2) < 2:
        logger.warning(
            f"Run i{spec.initial_index} h{spec.horizon_index} t{spec.trigger_index} certified "
            "strongly nontrivial but has a unit gap"
        )
        reports.append(_unit_gap_report(trace))

    csv_path: str | None = None
    if prepared.config.outputs.trace_csv is not None:
        path = trace_path(out_dir / prepared.config.outputs.trace_csv, spec)
        csv_path = str(trace.to_csv(path))

    summary = RunSummary(
        initial_index=spec.initial_index,
        horizon_index=spec.horizon_index,
        trigger_index=spec.trigger_index,
        initial=spec.phi.current.tolist(),
        horizon=spec.horizon,
        trigger=spec.params.to_dict(),
        event_count_incl=count_events(trace, spec.horizon, include_initial=True),
        event_count_excl=count_events(trace, spec.horizon, include_initial=False),
        min_gap=min(gaps) if gaps else None,
        max_gap=max(gaps) if gaps else None,
        sequence_class=str(classify_event_sequence(trace)),
        final_state_norm=final_state_norm(trace),
        bound_margin=margin,
        constants=constants.to_dict(),
        certified=constants.nontrivial_certified,
        violations=[r.to_dict() for r in reports if not r.ok],
        trace_csv=csv_path,
    )
    logger.debug(
        f"Run i{spec.initial_index} h{spec.horizon_index} t{spec.trigger_index}: "
        f"{summary.event_count_excl} events, min gap {summary.min_gap}"
    )
    return summary


def _unit_gap_report(trace: SimTrace) -> ViolationReport:
    report = ViolationReport(name="strong_nontriviality")
    times = trace.event_times
    for prev, nxt in zip(times, times[1:]):
        if nxt - prev < 2:
            report.add(nxt, float(nxt - prev), 2.0)
    report.checked_steps = len(times)
    return report


async def run_experiment_async(
    config: ExperimentConfig, out_dir: Path | None = None, settings: Settings | None = None
) -> ExperimentSummary:
    """Run every combination concurrently and write the summary document.

    Args:
        config: Validated experiment config.
        out_dir: Directory for traces and the summary; defaults to settings.
        settings: Runtime settings; loaded from the environment if omitted.

    Returns:
        The merged summary, runs ordered by (initial, horizon, trigger).
    """
    settings = settings or load_settings()
    out_dir = Path(out_dir or settings.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prepared = prepare(config)
    specs = run_specs(config)
    logger.info(f"Running {len(specs)} simulations with up to {settings.max_workers} workers")

    gate = asyncio.Semaphore(settings.max_workers)

    async def bounded(spec: RunSpec) -> RunSummary:
        async with gate:
            return await asyncio.to_thread(_execute_run, prepared, spec, out_dir)

    runs = await asyncio.gather(*(bounded(spec) for spec in specs))
    summary = ExperimentSummary(
        certificate=prepared.cert.to_dict(),
        lipschitz=prepared.consts.to_dict(),
        feasible=prepared.feasible,
        runs=sorted(runs, key=lambda r: (r.initial_index, r.horizon_index, r.trigger_index)),
    )
    summary_path = out_dir / config.outputs.summary_json
    summary_path.write_text(summary.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote summary to {summary_path}")
    return summary


def run_experiment(
    config: ExperimentConfig, out_dir: Path | None = None, settings: Settings | None = None
) -> ExperimentSummary:
    """Synchronous wrapper around :func:`run_experiment_async`."""
    return asyncio.run(run_experiment_async(config, out_dir, settings))


def tune_experiment(config: ExperimentConfig) -> list[TunerResult]:
    """Tune (sigma, a, b) once per initial function of the config."""
    prepared = prepare(config)
    return [
        tune(prepared.cert.mu, prepared.consts, phi, prepared.cert, config.system.tau)
        for phi in config.phis()
    ]


def check_experiment(config: ExperimentConfig) -> dict[str, Any]:
    """Feasibility, certificate and constant re-validation without simulating."""
    prepared = prepare(config)
    checks = []
    for i, phi in enumerate(config.phis()):
        for t, trigger in enumerate(config.triggers):
            params = trigger.to_params()
            constants = evaluate_constants(params, prepared.cert, prepared.consts, phi)
            combined = constants.c > 0.0 and check_nontriviality(
                params, prepared.consts, constants.m, phi.tau, NontrivialityVariant.COMBINED
            )
            checks.append(
                {
                    "initial_index": i,
                    "trigger_index": t,
                    "functional_bounds": check_functional_bounds(prepared.cert, phi),
                    "constants": constants.to_dict(),
                    "combined_condition": combined,
                }
            )
    return {
        "feasible": prepared.feasible,
        "certificate": prepared.cert.to_dict(),
        "lipschitz": prepared.consts.to_dict(),
        "checks": checks,
    }


class TableCell(BaseModel):
    group: str
    sigma: float
    a: float
    b: float
    mode: str
    initial: list[float]
    horizon: int
    computed_incl: int
    computed_excl: int
    computed: int
    published: int
    relative_error: float
    last_event: int
    zero_state_from: int | None = None
    tolerance: float = COUNT_TOLERANCE

    @computed_field
    @property
    def within_tolerance(self) -> bool:
        return self.relative_error <= self.tolerance


class TableDocument(BaseModel):
    include_initial: bool
    matrix_norm: MatrixNorm = MatrixNorm.SPECTRAL
    cells: list[TableCell]

    def group(self, name: str) -> list[TableCell]:
        return [cell for cell in self.cells if cell.group == name]

    def render(self) -> str:
        """Plain-text layout: one line per (parameters, initial) cell."""
        counting = "including" if self.include_initial else "excluding"
        lines = [
            f"Event counts ({counting} the initial update at k = 0), "
            f"induced {self.matrix_norm}-norm",
            "",
        ]
        titles = {
            "amplitude_decay": f"sigma = 0.1, interval [0, {SHORT_HORIZON}]",
            "rule_comparison": f"a = 16, b = 0.01, interval [0, {LONG_HORIZON}]",
        }
        for name, title in titles.items():
            lines.append(title)
            lines.append(
                f"{'sigma':>6} {'a':>6} {'b':>6} {'initial':>12} {'computed':>9} "
                f"{'published':>9} {'rel.err':>8} {'last event':>10}"
            )
            for cell in self.group(name):
                initial = "[" + ", ".join(f"{v:g}" for v in cell.initial) + "]"
                lines.append(
                    f"{cell.sigma:>6g} {cell.a:>6g} {cell.b:>6g} {initial:>12} "
                    f"{cell.computed:>9d} {cell.published:>9d} {cell.relative_error:>8.2%} "
                    f"{cell.last_event:>10d}"
                    + ("" if cell.within_tolerance else "  outside tolerance")
                )
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump()


def _table_cell(cell: PublishedCell, include_initial: bool, norm: MatrixNorm) -> TableCell:
    system = example1_system()
    cert = derive_linear_certificate(system, norm=norm).cert
    trace = simulate(system, cert, SimConfig(cell.horizon, example1_phi(cell.initial), cell.params))
    incl = count_events(trace, cell.horizon, include_initial=True)
    excl = count_events(trace, cell.horizon, include_initial=False)
    computed = incl if include_initial else excl
    return TableCell(
        group=cell.group,
        sigma=cell.params.sigma,
        a=cell.params.a,
        b=cell.params.b,
        mode=str(cell.params.mode),
        initial=list(cell.initial),
        horizon=cell.horizon,
        computed_incl=incl,
        computed_excl=excl,
        computed=computed,
        published=cell.published,
        relative_error=abs(computed - cell.published) / cell.published,
        last_event=trace.event_times[-1],
        zero_state_from=zero_state_from(trace),
        tolerance=cell.tolerance,
    )


async def reproduce_tables_async(
    include_initial: bool = False,
    settings: Settings | None = None,
    norm: MatrixNorm = MatrixNorm.SPECTRAL,
) -> TableDocument:
    settings = settings or load_settings()
    gate = asyncio.Semaphore(settings.max_workers)

    async def bounded(cell: PublishedCell) -> TableCell:
        async with gate:
            return await asyncio.to_thread(_table_cell, cell, include_initial, norm)

    cells = await asyncio.gather(*(bounded(cell) for cell in published_cells()))
    logger.info(f"Reproduced {len(cells)} event-count cells")
    return TableDocument(include_initial=include_initial, matrix_norm=norm, cells=list(cells))


def reproduce_tables(
    include_initial: bool = False,
    settings: Settings | None = None,
    norm: MatrixNorm = MatrixNorm.SPECTRAL,
) -> TableDocument:
    """Recompute every published event count for the two-state linear plant.

    Counts exclude the implicit update at k = 0 unless ``include_initial``;
    both conventions are kept in each cell. ``norm`` selects the induced
    matrix norm behind mu and the gain of chi.
    """
    return asyncio.run(reproduce_tables_async(include_initial, settings, norm))


def emit_plot_data(trace: SimTrace, out: Path) -> Path:
    """Write k, e_norm, threshold, is_event, x_*, u_* for plotting elsewhere.

    Raises:
        RejectedInputError: If the trace is empty.
        OSError: If ``out`` cannot be written.
    """
    if len(trace) == 0:
        raise RejectedInputError("Cannot emit plot data for an empty trace")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = (
        ["k", "e_norm", "threshold", "is_event"]
        + [f"x_{i}" for i in range(trace.x.shape[1])]
        + [f"u_{j}" for j in range(trace.u.shape[1])]
    )
    columns = np.column_stack(
        [trace.k, trace.e_norm, trace.threshold, trace.is_event.astype(int), trace.x, trace.u]
    )
    fmt = ["%d", "%.17g", "%.17g", "%d"] + ["%.17g"] * (trace.x.shape[1] + trace.u.shape[1])
    np.savetxt(out, columns, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return out

