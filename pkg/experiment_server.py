"""
Delay ETC MCP server using FastMCP.
Exposes certificate derivation, trigger tuning and experiment runs as tools.
"""

import json
import logging
from pathlib import Path

from mcp.server.fastmcp import Context, FastMCP
from mcp.server.session import ServerSession
from pydantic import ValidationError

from delay_etc.benchmarks import example1_config, example2_config
from delay_etc.errors import DelayEtcError
from delay_etc.harness import (
    ExperimentConfig,
    check_experiment,
    reproduce_tables_async,
    run_experiment_async,
    tune_experiment,
)
from delay_etc.systems import MatrixNorm

logger = logging.getLogger(__name__)

# Initialize FastMCP server
mcp = FastMCP("delay-etc")


def _parse(config_json: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(config_json)


@mcp.tool()
async def derive_certificate(config_json: str, ctx: Context[ServerSession, None]) -> str:
    """Derive the Lyapunov-Krasovskii certificate and check feasibility.

    Args:
        config_json: Experiment config as a JSON document
    """
    try:
        report = check_experiment(_parse(config_json))
    except (ValidationError, DelayEtcError) as e:
        await ctx.error(f"Certificate derivation failed: {e}")
        return f"Error: {e}"
    await ctx.info(f"Certificate mu = {report['certificate']['mu']:.6g}")
    return json.dumps(report, indent=2)


@mcp.tool()
async def tune_trigger(config_json: str, ctx: Context[ServerSession, None]) -> str:
    """Select trigger parameters (sigma, a, b) for every initial function.

    Args:
        config_json: Experiment config as a JSON document
    """
    try:
        results = tune_experiment(_parse(config_json))
    except (ValidationError, DelayEtcError) as e:
        await ctx.error(f"Tuning failed: {e}")
        return f"Error: {e}"
    await ctx.info(f"Tuned {len(results)} parameter set(s)")
    return json.dumps([r.to_dict() for r in results], indent=2)


@mcp.tool()
async def run_experiment_tool(
    config_json: str, ctx: Context[ServerSession, None], out_dir: str | None = None
) -> str:
    """Run all simulations of a config and return the summary.

    Args:
        config_json: Experiment config as a JSON document
        out_dir: Directory for traces and the summary (default: $DELAY_ETC_OUT_DIR)
    """
    try:
        summary = await run_experiment_async(
            _parse(config_json), out_dir=Path(out_dir) if out_dir else None
        )
    except (ValidationError, DelayEtcError) as e:
        await ctx.error(f"Experiment failed: {e}")
        return f"Error: {e}"
    if summary.certified_violations:
        await ctx.warning(f"{len(summary.certified_violations)} certified run(s) reported violations")
    await ctx.info(f"Finished {len(summary.runs)} run(s)")
    return summary.model_dump_json(indent=2)


@mcp.tool()
async def reproduce_event_counts(
    ctx: Context[ServerSession, None], include_initial: bool = False, matrix_norm: str = "2"
) -> str:
    """Recompute the published event counts of the two-state linear plant.

    Args:
        include_initial: Count the implicit update at k = 0
        matrix_norm: Induced matrix norm for the certificate: "2", "1" or "inf"
    """
    try:
        norm = MatrixNorm(matrix_norm)
    except ValueError:
        await ctx.error(f"Unknown matrix norm {matrix_norm!r}")
        return f"Error: unknown matrix norm {matrix_norm!r}; use 2, 1 or inf"
    document = await reproduce_tables_async(include_initial=include_initial, norm=norm)
    await ctx.info(f"Reproduced {len(document.cells)} cells")
    return document.render()


@mcp.resource("resource://configs/example1")
async def example1_resource() -> str:
    """Experiment config for the two-state linear delay plant."""
    return json.dumps(example1_config(), indent=2)


@mcp.resource("resource://configs/example2")
async def example2_resource() -> str:
    """Experiment config for the scalar trigonometric delay plant."""
    return json.dumps(example2_config(), indent=2)


@mcp.prompt()
async def tune_trigger_parameters(system: str) -> str:
    """Walk through feasibility, tuning and simulation for a delay system."""
    return f"""
    You are helping design an event-triggered controller for this discrete-time
    delay system: {system}.
    1. Write it as an experiment config (see resource://configs/example1).
    2. Call derive_certificate and report mu and whether the design is feasible.
    3. If feasible, call tune_trigger and explain the selected sigma, a and b.
    4. Run run_experiment_tool with the tuned parameters and confirm that the
       minimum inter-event gap is at least two and no violations are reported.
    """


if __name__ == "__main__":
    # Initialize and run the server
    mcp.run(transport="stdio")
