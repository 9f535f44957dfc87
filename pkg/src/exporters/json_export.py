"""
JSON Exporter

Structured artifacts: metrics documents, decoder artifacts, model artifacts
and the failure marker. Floats are written with ``repr`` precision so a
stored model reloads to bit-identical parameters.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src.core.errors import ArtifactError, FingerprintMismatchError
from src.core.models import (
    FailureRecord,
    MeanFieldGaussian,
    Method,
    ObservationModel,
    PointMass,
    PriorSpec,
    TrainingTrace,
)
from src.core.multitask import MetaModel
from src.core.network import Architecture, WeightVector
from src.core.projector import AutoencoderParams, PcaeReport
from src.core.vi import VariationalModel
from src.exporters.aggregation import SCHEMA_VERSION, build_failure_document, build_header
from src.exporters.base import BaseExporter
from src.utils.logging import get_logger

logger = get_logger(__name__)

FAILURE_MARKER = "FAILED.json"

AnyModel = Union[VariationalModel, MetaModel]


class JSONExporter(BaseExporter):
    """Write a JSON document, adding the common header when it is missing."""

    def __init__(
        self,
        output_directory: Path | str | None = None,
        kind: str = "document",
        pretty: bool = True,
    ):
        super().__init__(output_directory)
        self.kind = kind
        self.pretty = pretty

    @property
    def file_extension(self) -> str:
        return "json"

    @property
    def name(self) -> str:
        return "JSON"

    def export(self, data: Dict[str, Any], output_path: Path | str | None = None) -> Path:
        path = self._resolve(output_path, self.kind)
        document = data if "schema_version" in data else {**build_header(self.kind), **data}
        text = json.dumps(document, indent=2 if self.pretty else None, allow_nan=False)
        try:
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            raise ArtifactError(f"Cannot write {path}: {e}") from e
        logger.debug(f"Wrote {self.kind} document to {path}")
        return path


def read_document(path: Path | str, kind: Optional[str] = None) -> Dict[str, Any]:
    """
    Load a JSON artifact and check its header.

    Raises:
        ArtifactError: Missing file, invalid JSON, unknown schema version
            or a different artifact kind.
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Artifact not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArtifactError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(document, dict):
        raise ArtifactError(f"{path} does not hold a JSON object")
    if document.get("schema_version") != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path}: unsupported schema_version {document.get('schema_version')!r}"
        )
    if kind is not None and document.get("kind") != kind:
        raise ArtifactError(f"{path}: expected a {kind} artifact, got {document.get('kind')!r}")
    return document


def _arch_from(document: Dict[str, Any], key: str) -> Architecture:
    arch = Architecture.from_dict(document[key])
    stored = document.get(f"{key}_fingerprint")
    if stored is not None and stored != arch.fingerprint:
        raise FingerprintMismatchError(stored, arch.fingerprint, key)
    return arch


def _check_target(arch: Architecture, expected: Optional[Architecture]) -> None:
    if expected is not None and expected.fingerprint != arch.fingerprint:
        raise FingerprintMismatchError(expected.fingerprint, arch.fingerprint, "artifact")


# Decoder artifacts


def decoder_document(ae: AutoencoderParams, pcae_config: Any = None) -> Dict[str, Any]:
    document = build_header("decoder")
    document.update(
        {
            "target_arch": ae.target_arch.to_dict(),
            "target_arch_fingerprint": ae.target_arch.fingerprint,
            "encoder_arch": ae.encoder_arch.to_dict(),
            "decoder_arch": ae.decoder_arch.to_dict(),
            "latent_dim": ae.latent_dim,
            "theta": ae.theta.values.tolist(),
            "phi": ae.phi.values.tolist(),
            "pcae": dataclasses.asdict(pcae_config) if pcae_config is not None else None,
            "report": ae.report.to_dict() if ae.report is not None else None,
        }
    )
    return document


def save_decoder(ae: AutoencoderParams, path: Path | str, pcae_config: Any = None) -> Path:
    return JSONExporter(kind="decoder").export(decoder_document(ae, pcae_config), path)


def load_decoder(
    path: Path | str, target_arch: Optional[Architecture] = None
) -> AutoencoderParams:
    """Rebuild a trained autoencoder; checks the target fingerprint when given."""
    document = read_document(path, "decoder")
    try:
        target = _arch_from(document, "target_arch")
        _check_target(target, target_arch)
        encoder = Architecture.from_dict(document["encoder_arch"])
        decoder = Architecture.from_dict(document["decoder_arch"])
        report = document.get("report")
        return AutoencoderParams(
            encoder_arch=encoder,
            decoder_arch=decoder,
            target_arch=target,
            theta=WeightVector.for_arch(encoder, np.asarray(document["theta"])),
            phi=WeightVector.for_arch(decoder, np.asarray(document["phi"])),
            report=PcaeReport(**report) if report else None,
        )
    except KeyError as e:
        raise ArtifactError(f"{path}: missing field {e}") from e


# Model artifacts


def _phi_to_dict(q_phi: Union[MeanFieldGaussian, PointMass]) -> Dict[str, Any]:
    if q_phi.is_variational:
        return {"type": "gaussian", **q_phi.to_dict()}
    return {"type": "point_mass", **q_phi.to_dict()}


def _phi_from_dict(data: Dict[str, Any]) -> Union[MeanFieldGaussian, PointMass]:
    if data.get("type") == "point_mass":
        return PointMass.from_dict(data)
    return MeanFieldGaussian.from_dict(data)


def model_document(
    model: AnyModel,
    prior: PriorSpec,
    obs: ObservationModel,
    *,
    seed: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    document = build_header("model")
    document.update(
        {
            "method": str(model.method),
            "target_arch": model.target_arch.to_dict(),
            "target_arch_fingerprint": model.target_arch.fingerprint,
            "decoder_arch": model.decoder_arch.to_dict() if model.decoder_arch else None,
            "prior": prior.to_dict(),
            "observation": obs.to_dict(),
            "seed": seed,
        }
    )
    if isinstance(model, MetaModel):
        document["q_zs"] = [q.to_dict() for q in model.q_zs]
        document["q_phi"] = _phi_to_dict(model.q_phi)
        document["frozen"] = {"phi": False}
    elif model.q_w is not None:
        document["q_w"] = model.q_w.to_dict()
        document["frozen"] = {}
    else:
        document["q_z"] = model.q_z.to_dict()
        document["q_phi"] = _phi_to_dict(model.q_phi)
        document["frozen"] = {"phi": not model.q_phi.is_variational}
    document["trace"] = model.trace.to_dict()
    document["config"] = config
    return document


def save_model(
    model: AnyModel,
    path: Path | str,
    prior: PriorSpec,
    obs: ObservationModel,
    *,
    seed: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    document = model_document(model, prior, obs, seed=seed, config=config)
    return JSONExporter(kind="model").export(document, path)


@dataclasses.dataclass(eq=False)
class LoadedModel:
    """A model artifact with the context it was trained in."""

    model: AnyModel
    prior: PriorSpec
    obs: ObservationModel
    seed: Optional[int]
    config: Optional[Dict[str, Any]]


def load_model(
    path: Path | str, target_arch: Optional[Architecture] = None
) -> LoadedModel:
    """
    Rebuild a fitted model.

    Raises:
        ArtifactError: Missing/malformed file.
        FingerprintMismatchError: Stored architecture differs from ``target_arch``.
    """
    document = read_document(path, "model")
    try:
        target = _arch_from(document, "target_arch")
        _check_target(target, target_arch)
        method = Method(document["method"])
        trace = TrainingTrace.from_dict(document.get("trace") or {})
        decoder = (
            Architecture.from_dict(document["decoder_arch"])
            if document.get("decoder_arch")
            else None
        )
        model: AnyModel
        if "q_zs" in document:
            model = MetaModel(
                q_zs=[MeanFieldGaussian.from_dict(q) for q in document["q_zs"]],
                q_phi=_phi_from_dict(document["q_phi"]),
                decoder_arch=decoder,
                target_arch=target,
                trace=trace,
            )
        elif "q_w" in document:
            model = VariationalModel(
                method=method,
                target_arch=target,
                q_w=MeanFieldGaussian.from_dict(document["q_w"]),
                trace=trace,
            )
        else:
            model = VariationalModel(
                method=method,
                target_arch=target,
                q_z=MeanFieldGaussian.from_dict(document["q_z"]),
                q_phi=_phi_from_dict(document["q_phi"]),
                decoder_arch=decoder,
                trace=trace,
            )
        return LoadedModel(
            model=model,
            prior=PriorSpec.from_dict(document["prior"]),
            obs=ObservationModel.from_dict(document["observation"]),
            seed=document.get("seed"),
            config=document.get("config"),
        )
    except KeyError as e:
        raise ArtifactError(f"{path}: missing field {e}") from e


# Failure marker


def write_failure(
    record: FailureRecord, directory: Path | str, completed_stages: List[str]
) -> Path:
    """Write FAILED.json into ``directory``, leaving other artifacts alone."""
    path = Path(directory) / FAILURE_MARKER
    return JSONExporter(kind="failure").export(
        build_failure_document(record, completed_stages), path
    )


def read_failure(directory: Path | str) -> FailureRecord:
    document = read_document(Path(directory) / FAILURE_MARKER, "failure")
    return FailureRecord.from_dict(document["failure"])
