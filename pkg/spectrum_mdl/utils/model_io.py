"""
Model file utilities
JSON model documents that reload bit-exactly
"""

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from ..config import MODEL_FORMAT_VERSION
from ..errors import ConfigError
from ..models.domain import SpectrumParams
from ..models.network import DenseNet, SpectrumVae
from ..models.schemas import ModelDocument, NetworkDocument

logger = logging.getLogger(__name__)


def _network_document(net: DenseNet) -> NetworkDocument:
    return NetworkDocument(
        layer_sizes=list(net.layer_sizes),
        hidden_activation=net.hidden_activation,
        output_activation=net.output_activation,
        weights=[w.tolist() for w in net.weights],
        biases=[b.tolist() for b in net.biases],
    )


def _network_from_document(doc: NetworkDocument) -> DenseNet:
    return DenseNet(
        layer_sizes=list(doc.layer_sizes),
        weights=[np.array(w, dtype=np.float64).reshape(fan_in, fan_out)
                 for w, fan_in, fan_out in zip(doc.weights, doc.layer_sizes[:-1], doc.layer_sizes[1:])],
        biases=[np.array(b, dtype=np.float64) for b in doc.biases],
        hidden_activation=doc.hidden_activation,
        output_activation=doc.output_activation,
    )


def model_document(model: SpectrumVae) -> ModelDocument:
    return ModelDocument(
        format_version=MODEL_FORMAT_VERSION,
        K=model.params.K,
        a=model.params.a,
        b=model.params.b,
        encoder=_network_document(model.encoder),
        decoder=_network_document(model.decoder),
    )


def save_model(model: SpectrumVae, path: Union[str, Path]) -> Path:
    """
    Write a model file

    Floats are written with Python's shortest round-trip repr, so loading
    restores every weight exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = model_document(model).model_dump()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=1)
    logger.debug("saved model to %s", path)
    return path


def load_model(path: Union[str, Path]) -> SpectrumVae:
    """
    Read a model file

    Raises:
        ConfigError: If the file is missing, malformed or of another format version
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Model file not found: {path}")
    try:
        document = ModelDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigError(f"Malformed model file {path}: {e}") from e
    if document.format_version != MODEL_FORMAT_VERSION:
        raise ConfigError(
            f"Model file {path} has format version {document.format_version}, expected {MODEL_FORMAT_VERSION}"
        )
    try:
        params = SpectrumParams(a=document.a, b=document.b, K=document.K)
        return SpectrumVae(_network_from_document(document.encoder), _network_from_document(document.decoder), params)
    except ValueError as e:
        raise ConfigError(f"Inconsistent model file {path}: {e}") from e
