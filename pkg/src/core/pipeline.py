"""
End-to-end orchestration of a Proj-BNN run.

The pipeline prepares data (generate or load, normalize, split), harvests
snapshots (stage 1), fits the autoencoder (stage 2), runs variational
inference over a (hidden layout, latent dim, learning rate) grid (stage 3),
selects the cell with the best validation marginal log-likelihood and
evaluates it. Stages not needed by the chosen method are skipped.

Every stage draws from its own stream derived from the run seed, so stages
can be rerun in isolation. A failing stage leaves earlier artifacts in
place and writes a ``FAILED.json`` marker next to them.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..data.dataset import DataSplits, Dataset, NormStats, SplitSpec, normalize, split
from ..data.generators import ModeDescriptor
from ..data.sources import GeneratedData, get_source
from ..utils.config import RunConfig
from ..utils.logging import get_logger
from ..utils.seeding import stage_rng, stage_seed
from .ensemble import run_fge
from .errors import ArtifactError, ConfigError
from .metrics import (
    EnsembleModel,
    EvaluationReport,
    WeightSampler,
    evaluate,
    grid_points,
    marginal_test_ll,
    mode_coverage,
    padded_range,
    predictive_bands,
    predictive_samples,
    region_mean_std,
)
from .models import FailureRecord, FailureStage, Method, ObservationModel, PriorSpec, SnapshotSet
from .multitask import (
    latent_grid_decode,
    phi_draws_for_fixed_z,
    split_tasks,
    task_rmse,
    train_meta,
    train_shared_bbb,
)
from .network import Architecture
from .projector import AutoencoderParams, train_pcae
from .statistics import pca_project, two_means
from .vi import VariationalModel, train_ablation, train_bbb, train_projbnn

logger = get_logger(__name__)

SNAPSHOTS_FILE = "snapshots.csv"
DECODER_FILE = "decoder.json"
MODEL_FILE = "model.json"
METRICS_FILE = "metrics.json"
BANDS_FILE = "bands.csv"
GRID_FILE = "grid.csv"
PCA_FILE = "weights_pca.csv"
LOGLIK_FILE = "loglik_per_sample.csv"
LATENT_GRID_FILE = "latent_grid.csv"
PHI_DRAWS_FILE = "phi_draws.csv"

SNAPSHOT_METHODS = (Method.PROJBNN, Method.LINEAR, Method.FGE)


def section_seed(run_seed: int, stage: str, offset: int = 0) -> int:
    """Seed of one stage: hash of (run seed, stage name) plus the section's own seed."""
    return stage_seed(run_seed, stage) + offset


@dataclass(eq=False)
class PreparedData:
    """Normalized dataset, its splits and what is known about it."""

    generated: GeneratedData
    full: Dataset
    splits: DataSplits
    stats: NormStats
    target_arch: Architecture
    modes: List[ModeDescriptor] = field(default_factory=list)
    gap: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class GridCell:
    """One point of the hyperparameter grid."""

    lr: float
    latent_dim: Optional[int] = None
    hidden: Tuple[int, ...] = ()
    layout_index: int = 0

    @property
    def cell_id(self) -> str:
        latent = "na" if self.latent_dim is None else str(self.latent_dim)
        hidden = "-".join(str(h) for h in self.hidden) or "none"
        return f"dz{latent}_lr{self.lr:g}_h{hidden}"

    def sort_key(self, valid_ll: float) -> Tuple[float, int, float, int]:
        """Best validation LL first; ties go to smaller D_z, then smaller lr."""
        return (-valid_ll, self.latent_dim or 0, self.lr, self.layout_index)


@dataclass(eq=False)
class CellJob:
    """Everything one grid cell needs; picklable for worker processes."""

    method: Method
    cell: GridCell
    train: Dataset
    valid: Dataset
    target_arch: Architecture
    obs: ObservationModel
    prior: PriorSpec
    config: RunConfig
    snapshots: Optional[SnapshotSet] = None
    decoder: Optional[AutoencoderParams] = None


@dataclass(eq=False)
class CellOutcome:
    cell: GridCell
    valid_ll: float
    model: VariationalModel
    autoencoder: Optional[AutoencoderParams] = None

    def row(self, selected: bool = False) -> Dict[str, Any]:
        return {
            "cell": self.cell.cell_id,
            "latent_dim": self.cell.latent_dim if self.cell.latent_dim is not None else "",
            "lr": self.cell.lr,
            "hidden": "-".join(str(h) for h in self.cell.hidden),
            "valid_ll": self.valid_ll,
            "best_iteration": self.model.trace.best_iteration,
            "stopped_early": self.model.trace.stopped_early,
            "selected": selected,
        }


def fit_cell(job: CellJob) -> CellOutcome:
    """Train one grid cell; the returned valid LL is that of the kept iterate."""
    cfg = job.config
    vi_cfg = dataclasses.replace(
        cfg.vi, lr=job.cell.lr, seed=section_seed(cfg.seed, "vi", cfg.vi.seed)
    )
    pcae_cfg = dataclasses.replace(
        cfg.pcae,
        latent_dim=job.cell.latent_dim or cfg.pcae.latent_dim,
        hidden=list(job.cell.hidden),
        seed=section_seed(cfg.seed, "pcae", cfg.pcae.seed),
    )
    autoencoder = None

    if job.method is Method.BBB:
        model = train_bbb(job.train, job.valid, job.target_arch, job.obs, job.prior, vi_cfg)
    elif job.method is Method.PROJBNN:
        autoencoder = train_pcae(job.snapshots, job.train, job.obs, pcae_cfg, job.target_arch)
        model = train_projbnn(autoencoder, job.train, job.valid, job.obs, job.prior, vi_cfg)
    else:
        model = train_ablation(
            job.method,
            job.train,
            job.valid,
            job.obs,
            job.prior,
            vi_cfg,
            target_arch=job.target_arch,
            pcae_cfg=pcae_cfg,
            ae=job.decoder,
            snapshots=job.snapshots,
        )
    valid_ll = max(value for _, value in model.trace.checks)
    return CellOutcome(job.cell, valid_ll, model, autoencoder)


def select_cell(outcomes: Sequence[CellOutcome]) -> CellOutcome:
    if not outcomes:
        raise ValueError("empty grid")
    return min(outcomes, key=lambda o: o.cell.sort_key(o.valid_ll))


@dataclass
class PipelineResult:
    """
    Outcome of a pipeline invocation.

    Attributes:
        output_dir: Directory holding the artifacts.
        artifacts: Artifact name -> written path.
        summaries: One line per completed stage.
        metrics: Metrics document, when evaluation ran.
        failure: Failure record when a stage raised.
    """

    output_dir: Path
    artifacts: Dict[str, Path] = field(default_factory=dict)
    summaries: List[str] = field(default_factory=list)
    completed_stages: List[str] = field(default_factory=list)
    metrics: Optional[Dict[str, Any]] = None
    failure: Optional[FailureRecord] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


class ProjBNNPipeline:
    """
    Runs the stages of one configuration and writes their artifacts.

    Example:
        >>> pipeline = ProjBNNPipeline(config)
        >>> result = pipeline.run()
        >>> result.metrics["test_ll"]
    """

    def __init__(
        self,
        config: RunConfig,
        output_dir: Optional[Path | str] = None,
        on_stage: Optional[Callable[[str, str], None]] = None,
    ):
        self.config = config
        self.method = Method(config.method)
        self.output_dir = Path(output_dir or config.general.output_directory)
        self.on_stage = on_stage
        self.obs = ObservationModel(config.observation.sigma_y)
        self.prior = PriorSpec(config.prior.mean, config.prior.variance)
        self._result = PipelineResult(self.output_dir)
        self._stage = FailureStage.DATA
        self._grid_rows: Optional[List[Dict[str, Any]]] = None

    # Bookkeeping

    def _enter(self, stage: FailureStage) -> None:
        self._stage = stage
        logger.info(f"Stage {stage}: started")

    def _done(self, stage: FailureStage, summary: str) -> None:
        self._result.completed_stages.append(str(stage))
        self._result.summaries.append(f"{stage}: {summary}")
        logger.info(f"Stage {stage}: {summary}")
        if self.on_stage:
            self.on_stage(str(stage), summary)

    def _artifact(self, name: str, path: Path) -> Path:
        self._result.artifacts[name] = path
        return path

    def _guard(self, body: Callable[[], None]) -> PipelineResult:
        from ..exporters.json_export import write_failure

        self._result = PipelineResult(self.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        try:
            body()
        except ConfigError:
            # usage error, not a stage failure: no marker
            raise
        except Exception as e:
            logger.error(f"Stage {self._stage} failed: {e}")
            record = FailureRecord.from_exception(
                self._stage, e, seed=self.config.seed, method=str(self.method)
            )
            self._result.failure = record
            try:
                self._artifact(
                    "failure",
                    write_failure(record, self.output_dir, self._result.completed_stages),
                )
            except ArtifactError as write_error:
                logger.error(f"Could not write failure marker: {write_error}")
        return self._result

    # Stages

    def prepare_data(self) -> PreparedData:
        """Generate or load the dataset, normalize it and split it."""
        self._enter(FailureStage.DATA)
        cfg = self.config.data
        kwargs: Dict[str, Any] = {}
        if cfg.source == "csv":
            if not cfg.path:
                raise ConfigError("data.path is required when data.source is 'csv'")
            kwargs["path"] = cfg.path
        elif cfg.source == "sine":
            kwargs["n_tasks"] = self.config.meta.n_tasks
        generated = get_source(cfg.source, **kwargs).generate(self.config.seed, cfg.n_points)

        data = generated.dataset
        if cfg.normalize:
            data, stats = normalize(data)
        else:
            stats = NormStats.identity(data)

        spec = SplitSpec(
            kind=cfg.split,
            train=cfg.train_fraction,
            valid=cfg.valid_fraction,
            test=cfg.test_fraction,
            seed=section_seed(self.config.seed, "split"),
        )
        splits = split(data, spec)

        target_arch = generated.target_arch or self._configured_arch(data)
        target_arch.require_hidden()
        gap = None
        if "gap" in generated.truth and data.x_dim == 1:
            low, high = stats.x_to_normalized(np.asarray(generated.truth["gap"])[:, None])[:, 0]
            gap = (float(low), float(high))

        self._done(
            FailureStage.DATA,
            f"{generated.kind}: {data.n} rows, split {spec.kind} "
            f"{splits.train.n}/{splits.valid.n}/{splits.test.n}",
        )
        return PreparedData(
            generated=generated,
            full=data,
            splits=splits,
            stats=stats,
            target_arch=target_arch,
            modes=list(generated.modes),
            gap=gap,
        )

    def _configured_arch(self, data: Dataset) -> Architecture:
        net = self.config.network
        return Architecture.mlp(
            data.x_dim,
            net.hidden,
            data.y_dim,
            net.activation,
            rbf_center=net.rbf_center,
            rbf_lengthscale=net.rbf_lengthscale,
        )

    def _mode_subsets(self, prep: PreparedData) -> List[Dataset]:
        """Training rows with one mode left out, for every mode."""
        train_idx = prep.splits.train_idx
        subsets = []
        for mode in prep.modes:
            keep = ~np.isin(train_idx, mode.point_indices)
            subsets.append(
                prep.full.subset(train_idx[keep], f"{prep.full.name}:without-mode-{mode.index}")
            )
        return subsets

    def fit_snapshots(self, prep: PreparedData) -> SnapshotSet:
        """Stage 1: MAP, cyclic-LR harvest, top-k filter; writes the kept snapshots."""
        from ..exporters.csv_export import SnapshotCSVExporter

        self._enter(FailureStage.FGE)
        cfg = self.config
        fge_cfg = dataclasses.replace(
            cfg.fge, seed=section_seed(cfg.seed, "fge", cfg.fge.seed)
        )
        subsets = self._mode_subsets(prep) if cfg.fge.fit_mode_subsets and prep.modes else None
        harvested, kept = run_fge(
            prep.target_arch,
            prep.splits.train,
            prep.splits.valid,
            self.obs,
            self.prior,
            fge_cfg,
            subsets=subsets,
        )
        self._artifact(
            "snapshots",
            SnapshotCSVExporter().export(
                (kept, prep.target_arch), self.output_dir / SNAPSHOTS_FILE
            ),
        )
        self._done(
            FailureStage.FGE,
            f"kept {len(kept)}/{len(harvested)} snapshots, "
            f"valid RMSE {kept.valid_rmse.min():.4f}..{kept.valid_rmse.max():.4f}",
        )
        return kept

    def fit_decoder(self, prep: PreparedData, snapshots: SnapshotSet) -> AutoencoderParams:
        """Stage 2 alone (pcae subcommand): one autoencoder with the configured pcAE settings."""
        from ..exporters.json_export import save_decoder

        self._enter(FailureStage.PCAE)
        cfg = self.config
        pcae_cfg = dataclasses.replace(
            cfg.pcae, seed=section_seed(cfg.seed, "pcae", cfg.pcae.seed)
        )
        ae = train_pcae(snapshots, prep.splits.train, self.obs, pcae_cfg, prep.target_arch)
        self._artifact(
            "decoder", save_decoder(ae, self.output_dir / DECODER_FILE, pcae_cfg)
        )
        self._done(
            FailureStage.PCAE,
            f"D_z={ae.latent_dim}, reconstruction MSE {ae.report.reconstruction_mse:.5f}, "
            f"decoded train LL {ae.report.decoded_train_ll:.4f}",
        )
        return ae

    def _grid_cells(self, prep: PreparedData, decoder: Optional[AutoencoderParams]) -> List[GridCell]:
        grid = self.config.grid
        d_w = prep.target_arch.num_params
        if self.method is Method.BBB:
            return [GridCell(lr=lr) for lr in grid.learning_rates]
        if self.method is Method.QZ_ONLY:
            return [
                GridCell(lr=lr, latent_dim=decoder.latent_dim, hidden=decoder_hidden(decoder))
                for lr in grid.learning_rates
            ]

        latent_dims = [d for d in grid.latent_dims if d < d_w]
        if not latent_dims:
            raise ConfigError(
                f"no grid latent dimension is below the {d_w} target weights: {grid.latent_dims}"
            )
        layouts = [[]] if self.method is Method.LINEAR else grid.hidden_layouts
        return [
            GridCell(lr=lr, latent_dim=d, hidden=tuple(hidden), layout_index=i)
            for i, hidden in enumerate(layouts)
            for d in latent_dims
            for lr in grid.learning_rates
        ]

    def search_grid(
        self,
        prep: PreparedData,
        snapshots: Optional[SnapshotSet] = None,
        decoder: Optional[AutoencoderParams] = None,
    ) -> CellOutcome:
        """
        Stage 3 over the grid: fit every cell, keep the best by validation
        marginal log-likelihood. Cell artifacts go to disjoint subdirectories.
        """
        from ..exporters.csv_export import write_rows
        from ..exporters.json_export import save_decoder, save_model

        self._enter(FailureStage.VI)
        jobs = [
            CellJob(
                method=self.method,
                cell=cell,
                train=prep.splits.train,
                valid=prep.splits.valid,
                target_arch=prep.target_arch,
                obs=self.obs,
                prior=self.prior,
                config=self.config,
                snapshots=snapshots,
                decoder=decoder,
            )
            for cell in self._grid_cells(prep, decoder)
        ]
        logger.info(f"Grid search: {len(jobs)} cells, {self.config.grid.jobs} worker(s)")

        if self.config.grid.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=self.config.grid.jobs) as pool:
                outcomes = list(pool.map(fit_cell, jobs))
        else:
            outcomes = [fit_cell(job) for job in jobs]

        best = select_cell(outcomes)
        if len(outcomes) > 1:
            for outcome in outcomes:
                cell_dir = self.output_dir / "grid" / outcome.cell.cell_id
                save_model(outcome.model, cell_dir / MODEL_FILE, self.prior, self.obs,
                           seed=self.config.seed)
                if outcome.autoencoder is not None:
                    save_decoder(outcome.autoencoder, cell_dir / DECODER_FILE)
            self._artifact(
                "grid",
                write_rows([o.row(o is best) for o in outcomes], self.output_dir / GRID_FILE),
            )

        if best.autoencoder is not None:
            self._artifact(
                "decoder",
                save_decoder(best.autoencoder, self.output_dir / DECODER_FILE, self.config.pcae),
            )
        self._artifact(
            "model",
            save_model(
                best.model,
                self.output_dir / MODEL_FILE,
                self.prior,
                self.obs,
                seed=self.config.seed,
                config=self.config.to_dict(),
            ),
        )
        self._grid_rows = [o.row(o is best) for o in outcomes]
        self._done(
            FailureStage.VI,
            f"{self.method}: selected {best.cell.cell_id} of {len(outcomes)} cell(s), "
            f"valid LL {best.valid_ll:.4f}",
        )
        return best

    def load_decoder(self, path: Optional[Path | str], target_arch: Architecture) -> AutoencoderParams:
        from ..exporters.json_export import load_decoder

        self._enter(FailureStage.VI)
        path = Path(path) if path else self.output_dir / DECODER_FILE
        if not path.exists():
            raise ArtifactError(
                f"method {self.method} needs a trained decoder artifact; not found: {path}"
            )
        return load_decoder(path, target_arch)

    def evaluate_model(
        self,
        prep: PreparedData,
        model: WeightSampler,
        part: str = "test",
        valid_ll: Optional[float] = None,
        snapshots: Optional[SnapshotSet] = None,
        started: Optional[float] = None,
    ) -> Dict[str, Any]:
        """Metrics, bands, per-sample log-likelihoods and the weight-space PCA."""
        from ..exporters.aggregation import build_metrics_document
        from ..exporters.csv_export import BandsCSVExporter, CSVExporter
        from ..exporters.json_export import JSONExporter

        self._enter(FailureStage.EVAL)
        cfg = self.config
        data = getattr(prep.splits, part)
        rng = stage_rng(cfg.seed, "eval")
        report, loglik = evaluate(
            model, data.x, data.y, self.obs, cfg.eval.samples, rng
        )
        report.valid_ll = valid_ll
        if prep.modes:
            preds = predictive_samples(model, prep.full.x, cfg.eval.samples, rng)
            report.mode_coverage = mode_coverage(
                preds, prep.full.y, prep.modes, self.obs.sigma_y, cfg.eval.fit_threshold_sigmas
            )

        self._artifact(
            "loglik_per_sample",
            CSVExporter().export(
                {"sample": np.arange(loglik.shape[0]), "mean_loglik": loglik.mean(axis=1)},
                self.output_dir / LOGLIK_FILE,
            ),
        )

        arch = prep.target_arch
        if arch.input_dim == 1 and arch.output_dim == 1:
            x_grid = grid_points(*padded_range(prep.full.x), cfg.eval.band_points)
            bands = predictive_bands(
                model, x_grid, cfg.eval.samples, cfg.eval.quantiles, self.obs, rng
            )
            self._artifact(
                "bands", BandsCSVExporter().export(bands, self.output_dir / BANDS_FILE)
            )
            if prep.gap is not None:
                report.extras.update(self._gap_stds(prep, bands))

        pca_columns = self._weights_pca(model, snapshots, rng, report)
        if pca_columns:
            self._artifact(
                "weights_pca", CSVExporter().export(pca_columns, self.output_dir / PCA_FILE)
            )

        report.extras["split_part"] = part
        report.extras["normalization"] = prep.stats.to_dict()
        grid_rows = self._grid_rows
        selected = next((r for r in grid_rows or [] if r["selected"]), None)
        document = build_metrics_document(
            report,
            dataset=prep.generated.kind,
            split_kind=cfg.data.split,
            seed=cfg.seed,
            wall_clock_seconds=time.perf_counter() - started if started else 0.0,
            selected_cell=selected,
            grid=grid_rows if grid_rows and len(grid_rows) > 1 else None,
        )
        self._artifact(
            "metrics", JSONExporter(kind="metrics").export(document, self.output_dir / METRICS_FILE)
        )
        self._result.metrics = document
        summary = f"test LL {report.test_ll:.4f}, RMSE {report.test_rmse:.4f}"
        if report.mode_coverage is not None:
            summary += f", modes covered {report.mode_coverage}/{len(prep.modes)}"
        self._done(FailureStage.EVAL, summary)
        return document

    def _gap_stds(self, prep: PreparedData, bands) -> Dict[str, float]:
        low, high = prep.gap
        x_min, x_max = float(prep.full.x.min()), float(prep.full.x.max())
        gap_std = region_mean_std(bands, low, high)
        dense_std = 0.5 * (
            region_mean_std(bands, x_min, low) + region_mean_std(bands, high, x_max)
        )
        return {
            "gap_total_std": gap_std,
            "dense_total_std": dense_std,
            "gap_std_ratio": gap_std / dense_std,
        }

    def _weights_pca(
        self,
        model: WeightSampler,
        snapshots: Optional[SnapshotSet],
        rng: np.random.Generator,
        report: EvaluationReport,
    ) -> Optional[Dict[str, np.ndarray]]:
        """
        Posterior draws (and snapshots, when there are any) projected on the
        top-2 principal axes of the snapshots, or of the draws themselves.
        """
        posterior = np.atleast_2d(model.sample_weights(rng, self.config.eval.samples))
        reference = snapshots.matrix if snapshots is not None else posterior
        if min(reference.shape) < 2:
            return None
        pca = pca_project(reference, k=2)
        clusters = two_means(
            pca.scores, seed=section_seed(self.config.seed, "cluster") % (2**32)
        )
        report.extras["weights_clusters"] = clusters.n_clusters
        report.extras["weights_cluster_separation"] = (
            clusters.separation if np.isfinite(clusters.separation) else None
        )

        scores = (posterior - pca.mean) @ pca.components.T
        source = ["posterior"] * len(posterior)
        if snapshots is not None:
            scores = np.vstack([pca.scores, scores])
            source = ["snapshot"] * len(reference) + source
        return {"source": np.asarray(source), "pc_0": scores[:, 0], "pc_1": scores[:, 1]}

    # Entry points

    def run(self, decoder_path: Optional[Path | str] = None) -> PipelineResult:
        """Full pipeline for the configured method; meta delegates to ``run_meta``."""
        if self.method is Method.META:
            return self.run_meta()

        def body() -> None:
            started = time.perf_counter()
            prep = self.prepare_data()
            snapshots = None
            decoder = None
            if self.method in SNAPSHOT_METHODS:
                snapshots = self.fit_snapshots(prep)
            if self.method is Method.QZ_ONLY:
                decoder = self.load_decoder(decoder_path, prep.target_arch)

            if self.method is Method.FGE:
                model: WeightSampler = EnsembleModel(snapshots, prep.target_arch)
                valid_ll = marginal_test_ll(
                    model, prep.splits.valid.x, prep.splits.valid.y, self.obs,
                    len(snapshots), stage_rng(self.config.seed, "eval"),
                )
            else:
                best = self.search_grid(prep, snapshots, decoder)
                model, valid_ll = best.model, best.valid_ll
            self.evaluate_model(prep, model, "test", valid_ll, snapshots, started)

        return self._guard(body)

    def run_fge(self) -> PipelineResult:
        """Data + stage 1 only."""

        def body() -> None:
            self.fit_snapshots(self.prepare_data())

        return self._guard(body)

    def run_pcae(self, snapshot_path: Optional[Path | str] = None) -> PipelineResult:
        """Stage 2 from a stored snapshot file."""
        from ..exporters.csv_export import read_snapshots

        def body() -> None:
            prep = self.prepare_data()
            self._enter(FailureStage.PCAE)
            path = Path(snapshot_path) if snapshot_path else self.output_dir / SNAPSHOTS_FILE
            snapshots, _ = read_snapshots(path, prep.target_arch)
            self.fit_decoder(prep, snapshots)

        return self._guard(body)

    def run_vi(
        self,
        decoder_path: Optional[Path | str] = None,
        snapshot_path: Optional[Path | str] = None,
    ) -> PipelineResult:
        """
        Stage 3 (grid as configured) from stored artifacts.

        projbnn reuses a stored decoder when one exists and otherwise trains
        it per cell from the stored snapshots.
        """
        from ..exporters.csv_export import read_snapshots

        def body() -> None:
            prep = self.prepare_data()
            snapshots = None
            decoder = None
            if self.method is Method.FGE:
                raise ConfigError("the fge method has no variational stage; use 'fge' and 'eval'")
            if self.method is Method.META:
                raise ConfigError("the meta method runs as a whole; use 'meta'")
            if self.method in (Method.PROJBNN, Method.LINEAR):
                path = Path(snapshot_path) if snapshot_path else self.output_dir / SNAPSHOTS_FILE
                snapshots, _ = read_snapshots(path, prep.target_arch)
            if self.method is Method.QZ_ONLY:
                decoder = self.load_decoder(decoder_path, prep.target_arch)
            self.search_grid(prep, snapshots, decoder)

        return self._guard(body)

    def run_eval(self, model_path: Path | str, part: str = "test") -> PipelineResult:
        """Recompute metrics from a stored model (or snapshot file for fge)."""
        from ..exporters.csv_export import read_snapshots
        from ..exporters.json_export import load_model

        def body() -> None:
            started = time.perf_counter()
            prep = self.prepare_data()
            self._enter(FailureStage.EVAL)
            path = Path(model_path)
            snapshots = None
            if path.suffix == ".csv":
                snapshots, _ = read_snapshots(path, prep.target_arch)
                model: WeightSampler = EnsembleModel(snapshots, prep.target_arch)
            else:
                model = load_model(path, prep.target_arch).model
            self.evaluate_model(prep, model, part, None, snapshots, started)

        return self._guard(body)

    def run_meta(self) -> PipelineResult:
        """Multitask sine experiment: meta Proj-BNN against a shared BbB."""
        from ..exporters.aggregation import build_metrics_document
        from ..exporters.csv_export import CSVExporter, GridCSVExporter, matrix_columns
        from ..exporters.json_export import JSONExporter, save_model

        def body() -> None:
            started = time.perf_counter()
            cfg = self.config
            meta = cfg.meta
            self._enter(FailureStage.DATA)
            target_arch = Architecture.mlp(1, meta.target_hidden, 1, meta.target_activation)
            tasks = get_source("sine", n_tasks=meta.n_tasks).generate(
                cfg.seed, meta.points_per_task
            ).tasks
            tasks = dataclasses.replace(tasks, target_arch=target_arch)
            splits = split_tasks(tasks, meta.valid_fraction, section_seed(cfg.seed, "split"))
            self._done(
                FailureStage.DATA,
                f"{len(splits)} sine tasks, {splits[0].train.n}/{splits[0].valid.n}/"
                f"{splits[0].test.n} points per task",
            )

            self._enter(FailureStage.META)
            vi_cfg = dataclasses.replace(
                cfg.vi, seed=section_seed(cfg.seed, "vi", cfg.vi.seed)
            )
            model = train_meta(splits, target_arch, self.obs, self.prior, meta, vi_cfg)
            shared = train_shared_bbb(splits, target_arch, self.obs, self.prior, vi_cfg)
            self._artifact(
                "model",
                save_model(model, self.output_dir / MODEL_FILE, self.prior, self.obs,
                           seed=cfg.seed, config=cfg.to_dict()),
            )
            self._done(FailureStage.META, f"D_z={meta.latent_dim}, {model.n_tasks} task posteriors")

            self._enter(FailureStage.EVAL)
            rng = stage_rng(cfg.seed, "eval")
            task_models = [model.task_model(m) for m in range(model.n_tasks)]
            tests = [s.test for s in splits]
            meta_rmse = task_rmse(task_models, tests, cfg.eval.samples, rng)
            shared_rmse = task_rmse([shared] * len(tests), tests, cfg.eval.samples, rng)
            meta_ll = [
                marginal_test_ll(tm, t.x, t.y, self.obs, cfg.eval.samples, rng)
                for tm, t in zip(task_models, tests)
            ]
            shared_ll = [
                marginal_test_ll(shared, t.x, t.y, self.obs, cfg.eval.samples, rng)
                for t in tests
            ]

            x_grid = np.linspace(*padded_range(tasks.pooled().x, pad=0.0), meta.x_grid_points)
            if meta.latent_dim == 2:
                latent = latent_grid_decode(
                    model.q_phi.mu, model.decoder_arch, target_arch, meta.grid_n, x_grid
                )
                self._artifact(
                    "latent_grid",
                    GridCSVExporter().export(latent, self.output_dir / LATENT_GRID_FILE),
                )
            draws = phi_draws_for_fixed_z(
                model.q_phi, model.decoder_arch, target_arch,
                np.zeros(meta.latent_dim), meta.phi_draws, x_grid, rng,
            )
            self._artifact(
                "phi_draws",
                CSVExporter().export(
                    {"x": x_grid, **matrix_columns("f", draws.T)},
                    self.output_dir / PHI_DRAWS_FILE,
                ),
            )

            report = EvaluationReport(
                method=str(Method.META),
                test_ll=float(np.mean(meta_ll)),
                test_rmse=float(np.mean(meta_rmse)),
                n_samples=cfg.eval.samples,
                n_points=sum(t.n for t in tests),
                extras={
                    "task_rmse": meta_rmse,
                    "task_test_ll": meta_ll,
                    "shared_bbb_rmse": float(np.mean(shared_rmse)),
                    "shared_bbb_task_rmse": shared_rmse,
                    "shared_bbb_test_ll": float(np.mean(shared_ll)),
                },
            )
            document = build_metrics_document(
                report,
                dataset="sine",
                split_kind="per-task random",
                seed=cfg.seed,
                wall_clock_seconds=time.perf_counter() - started,
            )
            self._artifact(
                "metrics",
                JSONExporter(kind="metrics").export(document, self.output_dir / METRICS_FILE),
            )
            self._result.metrics = document
            self._done(
                FailureStage.EVAL,
                f"meta RMSE {report.test_rmse:.4f} vs shared BbB "
                f"{report.extras['shared_bbb_rmse']:.4f}",
            )

        self.method = Method.META
        return self._guard(body)


def decoder_hidden(ae: AutoencoderParams) -> Tuple[int, ...]:
    """Hidden sizes of the encoder side (the decoder mirrors them)."""
    return tuple(ae.encoder_arch.hidden_sizes)
