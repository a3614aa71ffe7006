"""Deterministic, lossless serialization of realizations, measures, models,
and reports.

Realization file layout (little endian):

    magic "SINRLDP" | version u32 | header length u32 | header JSON (utf-8)
    | point records (d coords + mark, float64 each)
    | edge records (two u32 indices, smaller first)

Header floats are hex-encoded; CSV exports elsewhere are derived views and
never the source of truth.  Files are written atomically (temp + rename),
and two saves of the same object are byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .connectivity import EdgeSet, kernel_from_spec
from .detection import EstimatedModel
from .errors import RealizationFormatError, SerializationError
from .measures import BinGrid, BinnedMeasure, BinnedPairMeasure
from .model import Domain, ModelParams, ScalingSchedule, mark_function_from_spec
from .sampler import PointSample
from .simulate import SinrRealization

MAGIC = b"SINRLDP"
VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _hex(value: float) -> str:
    return float(value).hex()


def _unhex(value) -> float:
    return float.fromhex(value) if isinstance(value, str) else float(value)


def _kernel_spec_or_none(kernel):
    if kernel is None:
        return None
    if not hasattr(kernel, "spec"):
        raise SerializationError(f"limit kernel {type(kernel).__name__} has no serializable spec")
    return kernel.spec()


# --------------------------------------------------------------------------
# realizations


def realization_header(real: SinrRealization) -> dict:
    params = real.params
    if params.mu is not None:
        raise SerializationError("only the uniform density serializes; custom mu unsupported")
    if not hasattr(params.iota, "spec") or not hasattr(params.zeta, "spec"):
        raise SerializationError("iota/zeta must be constant or tabulated to serialize")
    return {
        "format": "sinr-realization",
        "dimension": real.domain.dimension,
        "lambda": _hex(params.lam),
        "c": _hex(params.c),
        "alpha": _hex(params.alpha),
        "n0": _hex(params.n0),
        "gamma_a": _hex(real.sched.gamma_a),
        "domain_lower": [_hex(x) for x in real.domain.lower],
        "domain_upper": [_hex(x) for x in real.domain.upper],
        "mark_cap": None if real.domain.mark_cap is None else _hex(real.domain.mark_cap),
        "iota": params.iota.spec(),
        "zeta": params.zeta.spec(),
        "bounded_path_loss": params.bounded_path_loss,
        "include_transmitter_in_interference": params.include_transmitter_in_interference,
        "mode": real.mode,
        "seed": real.seed,
        "kernel": _kernel_spec_or_none(real.kernel),
        "n_points": real.n_nodes,
        "n_edges": real.n_edges,
    }


def save_realization(real: SinrRealization, path) -> None:
    """Write the realization; numbers are encoded losslessly."""
    header = json.dumps(realization_header(real), sort_keys=True, separators=(",", ":")).encode()
    body = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header)), header]
    points = np.hstack([
        real.sample.locations.astype("<f8"),
        real.sample.marks.astype("<f8").reshape(-1, 1),
    ])
    body.append(points.tobytes(order="C"))
    body.append(real.edges.pairs.astype("<u4").tobytes(order="C"))
    atomic_write_bytes(path, b"".join(body))


def load_realization(path) -> SinrRealization:
    """Read and fully validate a realization file."""
    with open(path, "rb") as fh:
        data = fh.read()
    off = 0
    if data[:7] != MAGIC:
        raise RealizationFormatError(f"bad magic at byte offset {off}")
    off = 7
    if len(data) < off + 8:
        raise RealizationFormatError(f"truncated header at byte offset {len(data)}")
    (version,) = struct.unpack_from("<I", data, off)
    if version != VERSION:
        raise RealizationFormatError(f"unsupported version {version}")
    off += 4
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + hlen:
        raise RealizationFormatError(f"truncated header body at byte offset {len(data)}")
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RealizationFormatError(f"corrupt header at byte offset {off}: {exc}") from exc
    off += hlen
    d = int(header["dimension"])
    n = int(header["n_points"])
    m = int(header["n_edges"])
    point_bytes = n * (d + 1) * 8
    if len(data) < off + point_bytes:
        raise RealizationFormatError(f"truncated point records at byte offset {len(data)}")
    points = np.frombuffer(data, dtype="<f8", count=n * (d + 1), offset=off).reshape(n, d + 1)
    off += point_bytes
    edge_bytes = m * 2 * 4
    if len(data) < off + edge_bytes:
        raise RealizationFormatError(f"truncated edge records at byte offset {len(data)}")
    pairs = np.frombuffer(data, dtype="<u4", count=m * 2, offset=off).reshape(m, 2)
    off += edge_bytes
    if len(data) != off:
        raise RealizationFormatError(f"trailing bytes at byte offset {off}")
    domain = Domain(
        lower=tuple(_unhex(x) for x in header["domain_lower"]),
        upper=tuple(_unhex(x) for x in header["domain_upper"]),
        mark_cap=None if header["mark_cap"] is None else _unhex(header["mark_cap"]),
    )
    params = ModelParams(
        lam=_unhex(header["lambda"]),
        c=_unhex(header["c"]),
        alpha=_unhex(header["alpha"]),
        n0=_unhex(header["n0"]),
        iota=mark_function_from_spec(header["iota"]),
        zeta=mark_function_from_spec(header["zeta"]),
        bounded_path_loss=bool(header["bounded_path_loss"]),
        include_transmitter_in_interference=bool(header["include_transmitter_in_interference"]),
    )
    sample = PointSample(
        locations=np.ascontiguousarray(points[:, :d]),
        marks=np.ascontiguousarray(points[:, d]),
        seed=int(header["seed"]),
        lambda_used=params.lam,
    )
    try:
        edges = EdgeSet(pairs.astype(np.int64), n)
    except ValueError as exc:
        raise RealizationFormatError(f"invalid edges: {exc}") from exc
    kernel = None if header["kernel"] is None else kernel_from_spec(header["kernel"])
    return SinrRealization(
        sample=sample,
        edges=edges,
        params=params,
        domain=domain,
        sched=ScalingSchedule(gamma_a=_unhex(header["gamma_a"])),
        mode=header["mode"],
        seed=int(header["seed"]),
        kernel=kernel,
    )


# --------------------------------------------------------------------------
# measures


def _grid_spec(grid: BinGrid) -> dict:
    return {
        "lower": [_hex(x) for x in grid.domain.lower],
        "upper": [_hex(x) for x in grid.domain.upper],
        "mark_cap": None if grid.domain.mark_cap is None else _hex(grid.domain.mark_cap),
        "spatial_bins": grid.spatial_bins,
        "mark_bins": grid.mark_bins,
        "c": _hex(grid.c),
    }


def _grid_from_spec(spec: dict) -> BinGrid:
    domain = Domain(
        lower=tuple(_unhex(x) for x in spec["lower"]),
        upper=tuple(_unhex(x) for x in spec["upper"]),
        mark_cap=None if spec["mark_cap"] is None else _unhex(spec["mark_cap"]),
    )
    return BinGrid(
        domain=domain,
        spatial_bins=int(spec["spatial_bins"]),
        mark_bins=int(spec["mark_bins"]),
        c=_unhex(spec["c"]),
    )


def save_measure(measure, path) -> None:
    pair = isinstance(measure, BinnedPairMeasure)
    payload = {
        "format": "sinr-measure",
        "kind": "pair" if pair else "single",
        "grid": _grid_spec(measure.grid),
        "exact_mass": None if measure.exact_mass is None else _hex(measure.exact_mass),
        "weights": (
            [[_hex(v) for v in row] for row in measure.weights]
            if pair else [_hex(v) for v in measure.weights]
        ),
    }
    atomic_write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")))


def load_measure(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "sinr-measure":
        raise RealizationFormatError("not a measure file")
    grid = _grid_from_spec(payload["grid"])
    mass = None if payload["exact_mass"] is None else _unhex(payload["exact_mass"])
    if payload["kind"] == "pair":
        weights = np.array([[_unhex(v) for v in row] for row in payload["weights"]])
        return BinnedPairMeasure(grid, weights, exact_mass=mass)
    weights = np.array([_unhex(v) for v in payload["weights"]])
    return BinnedMeasure(grid, weights, exact_mass=mass)


# --------------------------------------------------------------------------
# estimated models


def save_estimated_model(model: EstimatedModel, path, meta: dict | None = None) -> None:
    payload = {
        "format": "sinr-model",
        "grid": _grid_spec(model.grid),
        "beta_hat": [_hex(v) for v in model.beta_hat.weights],
        "t_hat": [[_hex(v) for v in row] for row in model.t_hat],
        "defined": [[bool(v) for v in row] for row in model.defined],
        "k_used": model.k_used,
        "lambda": _hex(model.lam),
        "meta": meta or {},
    }
    atomic_write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")))


def load_estimated_model(path) -> tuple[EstimatedModel, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "sinr-model":
        raise RealizationFormatError("not an estimated-model file")
    grid = _grid_from_spec(payload["grid"])
    model = EstimatedModel(
        grid=grid,
        beta_hat=BinnedMeasure(grid, np.array([_unhex(v) for v in payload["beta_hat"]])),
        t_hat=np.array([[_unhex(v) for v in row] for row in payload["t_hat"]]),
        defined=np.array(payload["defined"], dtype=bool),
        k_used=int(payload["k_used"]),
        lam=_unhex(payload["lambda"]),
    )
    return model, payload["meta"]


# --------------------------------------------------------------------------
# reports and trend results


def json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_json_lines(path, records) -> None:
    atomic_write_text(path, "".join(json_line(r) + "\n" for r in records))


def write_trend_result(result, out_dir) -> None:
    """Summary JSON, raw line-JSON records, and a plot-ready CSV."""
    os.makedirs(out_dir, exist_ok=True)
    summary = {
        "name": result.name,
        "config": result.config,
        "rungs": list(result.rungs),
        "verdicts": result.verdicts,
    }
    atomic_write_text(
        os.path.join(out_dir, f"{result.name}-summary.json"),
        json.dumps(summary, sort_keys=True, indent=2) + "\n",
    )
    write_json_lines(os.path.join(out_dir, f"{result.name}-records.jsonl"), result.records)
    lines = ["lambda,statistic,median,q25,q75,mean,std"]
    for rung in result.rungs:
        for key, val in rung.items():
            if isinstance(val, dict) and "median" in val:
                lines.append(
                    f"{rung['lambda']!r},{key},{val['median']!r},{val['q25']!r},"
                    f"{val['q75']!r},{val['mean']!r},{val['std']!r}"
                )
            elif key in ("frequency", "empirical_rate", "deviation", "threshold_scale"):
                lines.append(f"{rung['lambda']!r},{key},{val!r},,,,")
    atomic_write_text(os.path.join(out_dir, f"{result.name}-trend.csv"), "\n".join(lines) + "\n")
