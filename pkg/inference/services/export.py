# inference/services/export.py

import io
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from rest_framework.renderers import JSONRenderer

from inference.conf import inference_settings
from inference.enums.enums import ExportFormatEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import DimensionMismatchError, InvalidParameterError
from inference.serializers.graph_serializer import GraphSerializer
from inference.serializers.roc_serializer import RocSerializer

logger = logging.getLogger(__name__)

LAPLACIAN = "laplacian"
ADJACENCY = "adjacency"
SCORE = "score"


def orient(matrix, orientation):
    """Estimates are stored sensing (row i reads column j); sending is the transpose."""
    matrix = np.asarray(matrix, dtype=float)
    if OrientationEnum(orientation) is OrientationEnum.SENDING:
        return matrix.T
    return matrix


class Edge(NamedTuple):
    source: str
    target: str
    weight: float
    sign_violation: bool


def _names(p, names):
    if names is None:
        return [str(i + 1) for i in range(p)]
    names = list(names)
    if len(names) != p:
        raise DimensionMismatchError(f"{len(names)} names for {p} variables")
    return names


def edge_weights(matrix, kind):
    """Laplacian off-diagonals carry the adjacency weight -L_ij."""
    matrix = np.array(matrix, dtype=float)
    weights = -matrix if kind == LAPLACIAN else matrix
    np.fill_diagonal(weights, 0.0)
    return weights


def _edges(weights, tolerance, labels):
    if tolerance is None:
        tolerance = inference_settings.EDGE_TOLERANCE
    edges = []
    for i, j in zip(*np.nonzero(np.abs(weights) > tolerance)):
        if i == j:
            continue
        weight = float(weights[i, j])
        edges.append(Edge(labels[i], labels[j], weight, weight < 0))
    return edges


def extract_edges(
    matrix,
    kind=LAPLACIAN,
    orientation=OrientationEnum.SENSING,
    tolerance=None,
    names: Optional[Sequence[str]] = None,
):
    """
    Directed edges (i, j), i != j, with |weight_ij| above ``tolerance``.

    Negative weights are kept and flagged rather than clipped. Edges are
    sorted by source then target position.
    """
    weights = orient(edge_weights(matrix, kind), orientation)
    return _edges(weights, tolerance, _names(weights.shape[0], names))


def oriented_weights(source, orientation):
    """(weights in ``orientation``, kind, names) for an estimate or an edge score matrix."""
    if hasattr(source, "scores"):
        return source.oriented(orientation), SCORE, source.names
    if hasattr(source, "P_hat"):
        return orient(edge_weights(source.P_hat, ADJACENCY), orientation), ADJACENCY, None
    return orient(edge_weights(source.L_hat, LAPLACIAN), orientation), LAPLACIAN, None


def summarize(estimate, edge_count):
    summary = {
        "model": estimate.model.value,
        "rho": estimate.rho,
        "converged": estimate.converged,
        "edge_count": edge_count,
    }
    if hasattr(estimate, "xi"):
        summary.update(
            residual=estimate.xi,
            xi=estimate.xi,
            alpha=estimate.alpha,
            delta=estimate.delta,
            epsilon=None if estimate.epsilon is None else estimate.epsilon.tolist(),
            recovered=estimate.recovered,
        )
    else:
        summary["residual"] = estimate.residual
        if getattr(estimate, "support_agreement", None) is not None:
            summary["support_agreement"] = estimate.support_agreement
    return summary


def _write(text, path):
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
        logger.info("wrote %s", path)
    return text


def render_edges_csv(edges):
    frame = pd.DataFrame(edges, columns=list(Edge._fields))
    buffer = io.StringIO()
    frame.to_csv(
        buffer,
        index=False,
        float_format=f"%.{inference_settings.OUTPUT_PRECISION}g",
        lineterminator="\n",
    )
    return buffer.getvalue()


def render_dot(edges, names):
    precision = inference_settings.OUTPUT_PRECISION
    lines = ["digraph G {"]
    lines += [f'  "{name}";' for name in names]
    for edge in edges:
        lines.append(f'  "{edge.source}" -> "{edge.target}" [weight={edge.weight:.{precision}g}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(
    source,
    fmt=ExportFormatEnum.CSV,
    orientation=OrientationEnum.SENDING,
    path=None,
    tolerance=None,
    names=None,
):
    """
    Edge list CSV, adjacency JSON or DOT text for an estimate or score matrix.

    The text is returned and also written to ``path`` when one is given.
    """
    fmt = ExportFormatEnum(fmt)
    orientation = OrientationEnum(orientation)
    weights, kind, source_names = oriented_weights(source, orientation)
    labels = _names(weights.shape[0], names if names is not None else source_names)
    edges = _edges(weights, tolerance, labels)

    if fmt is ExportFormatEnum.CSV:
        return _write(render_edges_csv(edges), path)
    if fmt is ExportFormatEnum.DOT:
        return _write(render_dot(edges, labels), path)

    data = {
        "orientation": orientation.value,
        "kind": kind,
        "names": labels,
        "adjacency": weights.tolist(),
        "edges": [edge._asdict() for edge in edges],
        "summary": None if kind == SCORE else summarize(source, len(edges)),
    }
    text = JSONRenderer().render(GraphSerializer(data).data).decode("utf-8") + "\n"
    return _write(text, path)


def export_roc(result, fmt=ExportFormatEnum.CSV, path=None):
    fmt = ExportFormatEnum(fmt)
    if fmt is ExportFormatEnum.JSON:
        data = {
            "auc": result.auc,
            "n_positive": result.n_positive,
            "n_negative": result.n_negative,
            "points": result.to_frame().to_dict(orient="records"),
        }
        text = JSONRenderer().render(RocSerializer(data).data).decode("utf-8") + "\n"
        return _write(text, path)
    if fmt is ExportFormatEnum.DOT:
        raise InvalidParameterError("ROC curves have no DOT form")
    buffer = io.StringIO()
    frame = result.to_frame()
    frame.to_csv(
        buffer,
        index=False,
        float_format=f"%.{inference_settings.OUTPUT_PRECISION}g",
        lineterminator="\n",
    )
    return _write(buffer.getvalue(), path)
