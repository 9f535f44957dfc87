"""
Command-line interface for Proj-BNN.

Provides one command per pipeline stage plus end-to-end runs:
- gen-data: Write a synthetic dataset (toy-rbf, four-modes, sine)
- fge: Stage 1, snapshot harvesting
- pcae: Stage 2, prediction-constrained autoencoder
- vi: Stage 3, variational inference (grid as configured)
- eval: Metrics from stored artifacts
- meta: Multitask sine experiment
- pipeline: All stages for the configured method

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

import typer
from rich.console import Console
from rich.table import Table

from ..core.errors import ConfigError, ProjBNNError
from ..core.pipeline import PipelineResult, ProjBNNPipeline
from ..data.sources import get_source
from ..utils import get_logger, reload_config, setup_logging
from ..utils.config import RunConfig, with_overrides
from .._version import __version__


# Initialize
app = typer.Typer(
    name="proj-bnn",
    help="Proj-BNN - Bayesian neural networks inferred in a learned low-dimensional weight space",
    add_completion=False,
)
console = Console()
logger = get_logger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2


class DataKind(str, Enum):
    TOY_RBF = "toy-rbf"
    FOUR_MODES = "four-modes"
    SINE = "sine"


class MethodChoice(str, Enum):
    PROJBNN = "projbnn"
    BBB = "bbb"
    LINEAR = "linear"
    ONE_STAGE = "one_stage"
    QZ_ONLY = "qz_only"
    FGE = "fge"
    META = "meta"


class SplitPart(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


@dataclass(frozen=True)
class GenDataOptions:
    kind: DataKind
    seed: int
    output_path: Path
    n_points: Optional[int]


@dataclass(frozen=True)
class RunOptions:
    config: RunConfig
    output_dir: Path
    verbose: bool


def _resolve_gen_data_options(
    *,
    kind: DataKind,
    seed_arg: Optional[int],
    out_arg: Optional[Path],
    n_points_arg: Optional[int],
) -> GenDataOptions:
    """Resolve gen-data options: CLI > defaults."""
    output_path = out_arg if out_arg is not None else Path("output") / f"{kind.value}.csv"
    return GenDataOptions(
        kind=kind,
        seed=seed_arg if seed_arg is not None else 0,
        output_path=Path(output_path),
        n_points=n_points_arg,
    )


def _resolve_run_options(
    *,
    config_file: Optional[Path],
    seed_arg: Optional[int] = None,
    scale_arg: Optional[float] = None,
    out_arg: Optional[Path] = None,
    method_arg: Optional[MethodChoice] = None,
    latent_dim_arg: Optional[int] = None,
    lr_arg: Optional[float] = None,
    samples_arg: Optional[int] = None,
    verbose: bool = False,
) -> RunOptions:
    """
    Load the configuration and apply CLI overrides (CLI > env > file > defaults).

    Configuration errors end the command with exit code 2.
    """
    try:
        config = reload_config(config_file)
        config = with_overrides(
            config,
            seed=seed_arg,
            scale=scale_arg,
            method=method_arg.value if method_arg is not None else None,
            output_directory=out_arg,
            latent_dim=latent_dim_arg,
            lr=lr_arg,
            samples=samples_arg,
        )
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        raise typer.Exit(EXIT_USAGE)

    output_dir = Path(config.general.output_directory)
    setup_logging(
        log_level="DEBUG" if verbose else config.general.log_level,
        log_dir=output_dir / "logs",
        colored=config.cli.colored_output,
    )
    return RunOptions(config=config, output_dir=output_dir, verbose=verbose)


def print_header(title: str) -> None:
    """Print a one-line command header."""
    console.print(f"[bold cyan]Proj-BNN v{__version__}[/bold cyan] - {title}", highlight=False)


def _on_stage(stage: str, summary: str) -> None:
    console.print(f"[green]✓[/green] [bold]{stage}[/bold]: {summary}", highlight=False)


def print_result(result: PipelineResult) -> None:
    """Artifacts table and headline metrics; exits 1 on failure."""
    if result.artifacts:
        table = Table(title="Artifacts")
        table.add_column("Name", style="cyan")
        table.add_column("Path")
        for name, path in result.artifacts.items():
            table.add_row(name, str(path))
        console.print(table)

    if result.metrics:
        metrics = result.metrics
        line = f"test LL {metrics['test_ll']:.4f} | RMSE {metrics['test_rmse']:.4f}"
        if "mode_coverage" in metrics:
            line += f" | modes covered {metrics['mode_coverage']}"
        console.print(f"[bold]{metrics['method']}[/bold]: {line}", highlight=False)

    if not result.ok:
        failure = result.failure
        console.print(
            f"[red]❌ Stage {failure.stage} failed: {failure.error_type}: "
            f"{failure.message}[/red]",
            highlight=False,
        )
        raise typer.Exit(EXIT_FAILURE)


def _run(options: RunOptions, title: str, action: Callable[[ProjBNNPipeline], PipelineResult]) -> None:
    print_header(title)
    pipeline = ProjBNNPipeline(options.config, options.output_dir, on_stage=_on_stage)
    try:
        result = action(pipeline)
    except ConfigError as e:
        console.print(f"[red]Configuration error: {e}[/red]")
        raise typer.Exit(EXIT_USAGE)
    except ProjBNNError as e:
        console.print(f"[red]❌ Error: {e}[/red]")
        raise typer.Exit(EXIT_FAILURE)
    print_result(result)


# Shared options
ConfigOpt = typer.Option(None, "--config", "-c", help="Path to configuration file")
SeedOpt = typer.Option(None, "--seed", "-s", help="Run seed")
ScaleOpt = typer.Option(None, "--scale", help="Shrink iteration and sample budgets, in (0, 1]")
OutOpt = typer.Option(None, "--out", "-o", help="Output directory")
MethodOpt = typer.Option(None, "--method", "-m", case_sensitive=False, help="Inference method")
LatentOpt = typer.Option(None, "--latent-dim", help="Latent dimension (collapses the grid)")
LrOpt = typer.Option(None, "--lr", help="VI learning rate (collapses the grid)")
SamplesOpt = typer.Option(None, "--samples", help="Posterior samples for evaluation")
VerboseOpt = typer.Option(False, "--verbose", "-v", help="Enable verbose output")


@app.command("gen-data")
def gen_data(
    kind: DataKind = typer.Option(..., "--kind", "-k", case_sensitive=False, help="Dataset kind"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output CSV path"),
    n_points: Optional[int] = typer.Option(None, "--n-points", "-n", help="Points (per task for sine)"),
):
    """
    Write a synthetic dataset as CSV (plus its truth or task manifest).

    Examples:
        proj-bnn gen-data --kind four-modes --seed 7
        proj-bnn gen-data -k sine -o data/sine.csv
    """
    options = _resolve_gen_data_options(
        kind=kind, seed_arg=seed, out_arg=out, n_points_arg=n_points
    )
    try:
        generated = get_source(options.kind.value).generate(options.seed, options.n_points)
        options.output_path.parent.mkdir(parents=True, exist_ok=True)
        written = generated.write(options.output_path)
    except (OSError, ProjBNNError, ValueError) as e:
        console.print(f"[red]❌ Error: {e}[/red]")
        raise typer.Exit(EXIT_FAILURE)

    for path in written:
        console.print(f"[green]✓[/green] Wrote {path}", highlight=False)
    logger.info(f"Generated {options.kind.value} data ({generated.dataset.n} rows)")


@app.command()
def fge(
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    scale: Optional[float] = ScaleOpt,
    out: Optional[Path] = OutOpt,
    verbose: bool = VerboseOpt,
):
    """Stage 1: MAP fit, cyclic-LR snapshot harvest and top-k filter."""
    options = _resolve_run_options(
        config_file=config_file, seed_arg=seed, scale_arg=scale, out_arg=out, verbose=verbose
    )
    _run(options, "snapshot harvesting", lambda p: p.run_fge())


@app.command()
def pcae(
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    scale: Optional[float] = ScaleOpt,
    out: Optional[Path] = OutOpt,
    latent_dim: Optional[int] = LatentOpt,
    snapshots: Optional[Path] = typer.Option(None, "--snapshots", help="Snapshot CSV (default: <out>/snapshots.csv)"),
    verbose: bool = VerboseOpt,
):
    """Stage 2: train the prediction-constrained autoencoder on stored snapshots."""
    options = _resolve_run_options(
        config_file=config_file,
        seed_arg=seed,
        scale_arg=scale,
        out_arg=out,
        latent_dim_arg=latent_dim,
        verbose=verbose,
    )
    _run(options, "autoencoder", lambda p: p.run_pcae(snapshots))


@app.command()
def vi(
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    scale: Optional[float] = ScaleOpt,
    out: Optional[Path] = OutOpt,
    method: Optional[MethodChoice] = MethodOpt,
    latent_dim: Optional[int] = LatentOpt,
    lr: Optional[float] = LrOpt,
    decoder: Optional[Path] = typer.Option(None, "--decoder", help="Decoder artifact for qz_only"),
    snapshots: Optional[Path] = typer.Option(None, "--snapshots", help="Snapshot CSV for projbnn/linear"),
    verbose: bool = VerboseOpt,
):
    """Stage 3: variational inference from stored artifacts."""
    options = _resolve_run_options(
        config_file=config_file,
        seed_arg=seed,
        scale_arg=scale,
        out_arg=out,
        method_arg=method,
        latent_dim_arg=latent_dim,
        lr_arg=lr,
        verbose=verbose,
    )
    _run(options, "variational inference", lambda p: p.run_vi(decoder, snapshots))


@app.command("eval")
def eval_command(
    model: Path = typer.Option(..., "--model", help="Model artifact (JSON) or snapshot CSV"),
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    split_part: SplitPart = typer.Option(SplitPart.TEST, "--split", case_sensitive=False, help="Split part to evaluate"),
    samples: Optional[int] = SamplesOpt,
    verbose: bool = VerboseOpt,
):
    """
    Recompute metrics from a stored model.

    Examples:
        proj-bnn eval --model output/model.json --samples 500
        proj-bnn eval --model output/snapshots.csv --split valid
    """
    options = _resolve_run_options(
        config_file=config_file,
        seed_arg=seed,
        out_arg=out,
        samples_arg=samples,
        verbose=verbose,
    )
    _run(options, "evaluation", lambda p: p.run_eval(model, split_part.value))


@app.command()
def meta(
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    scale: Optional[float] = ScaleOpt,
    out: Optional[Path] = OutOpt,
    samples: Optional[int] = SamplesOpt,
    verbose: bool = VerboseOpt,
):
    """Multitask sine experiment: per-task latents with a shared decoder vs shared BbB."""
    options = _resolve_run_options(
        config_file=config_file,
        seed_arg=seed,
        scale_arg=scale,
        out_arg=out,
        samples_arg=samples,
        verbose=verbose,
    )
    _run(options, "multitask", lambda p: p.run_meta())


@app.command()
def pipeline(
    config_file: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    scale: Optional[float] = ScaleOpt,
    out: Optional[Path] = OutOpt,
    method: Optional[MethodChoice] = MethodOpt,
    latent_dim: Optional[int] = LatentOpt,
    lr: Optional[float] = LrOpt,
    samples: Optional[int] = SamplesOpt,
    decoder: Optional[Path] = typer.Option(None, "--decoder", help="Decoder artifact for qz_only"),
    verbose: bool = VerboseOpt,
):
    """
    Run every stage the method needs, select the grid cell and evaluate.

    Examples:
        proj-bnn pipeline --config config/toy.yaml --scale 0.1
        proj-bnn pipeline -c config/toy.yaml --method bbb --lr 0.01
    """
    options = _resolve_run_options(
        config_file=config_file,
        seed_arg=seed,
        scale_arg=scale,
        out_arg=out,
        method_arg=method,
        latent_dim_arg=latent_dim,
        lr_arg=lr,
        samples_arg=samples,
        verbose=verbose,
    )
    _run(options, f"pipeline ({options.config.method})", lambda p: p.run(decoder))


@app.command()
def version():
    """Show version information."""
    console.print(f"Proj-BNN v{__version__}", highlight=False)


def main():
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
