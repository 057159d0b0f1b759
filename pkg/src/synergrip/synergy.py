"""Grasp posture decoding from (grasp type, grasp size, latent point).

Two decoder variants share one surface:

* :class:`AnalyticSynergy` interpolates per joint between calibrated open
  and closed postures of each grasp type.
* :class:`LearnedSynergy` runs a feed-forward network loaded from a
  "decoder/1" weights file, so externally trained decoders can be
  dropped in without code changes. Input layout: [z | one-hot(type) | size].

Both are deterministic given (context, latent); the latent defaults to
the zero vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .hand import HandModel, JointConfiguration, thumb_index_distance
from .units import ConfigError, GraspContext, GraspType

DECODER_SCHEMA = "decoder/1"

_ACTIVATIONS = {
    "tanh": np.tanh,
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
}

# Calibrated (open, closed) joint angle triples per finger for the bundled
# hand. Thumb and index close mirror-symmetrically, which keeps the thumb
# to index distance strictly monotone in the interpolation parameter.
_DEFAULT_POSTURES: dict[GraspType, dict[str, tuple[tuple[float, ...], tuple[float, ...]]]] = {
    GraspType.TRIPOD: {
        "thumb": ((-0.15, -0.05, -0.05), (0.30, 0.15, 0.10)),
        "index": ((0.15, 0.05, 0.05), (-0.30, -0.15, -0.10)),
        "middle": ((0.15, 0.05, 0.05), (-0.30, -0.15, -0.10)),
    },
    GraspType.PINCH: {
        "thumb": ((-0.16, -0.06, -0.04), (0.32, 0.16, 0.11)),
        "index": ((0.16, 0.06, 0.04), (-0.32, -0.16, -0.11)),
        # Parked well clear of the object; pinch uses thumb and index only.
        "middle": ((0.35, 0.20, 0.15), (0.35, 0.20, 0.15)),
    },
    GraspType.LATERAL_TRIPOD: {
        "thumb": ((-0.12, -0.08, -0.04), (0.30, 0.16, 0.10)),
        "index": ((0.12, 0.08, 0.04), (-0.30, -0.16, -0.10)),
        "middle": ((0.18, 0.10, 0.06), (-0.42, -0.22, -0.14)),
    },
}


@dataclass(frozen=True)
class GraspCalibration:
    """Open/closed posture pair plus their measured thumb-index distances."""

    q_open: np.ndarray
    q_closed: np.ndarray
    size_open: float
    size_closed: float


@dataclass(frozen=True)
class DecodedPosture:
    """Decode result: the posture plus a flag for out-of-range size clamping."""

    joints: JointConfiguration
    size_clamped: bool


class AnalyticSynergy:
    """Per-joint linear interpolation between calibrated postures.

    Sizes outside [size_closed, size_open] are clamped (flagged in the
    result) rather than rejected, so a controller that momentarily
    integrates past the calibrated range keeps getting valid postures.
    """

    def __init__(self, model: HandModel, calibrations: dict[GraspType, GraspCalibration]):
        self.model = model
        lo, hi = model.joint_limits()
        for gtype, cal in calibrations.items():
            if cal.q_open.shape != (model.joint_count,) or cal.q_closed.shape != (model.joint_count,):
                raise ConfigError(f"{gtype.value}: calibration postures must have {model.joint_count} angles")
            if not cal.size_open > cal.size_closed:
                raise ConfigError(f"{gtype.value}: size_open must exceed size_closed")
            for name, q in (("q_open", cal.q_open), ("q_closed", cal.q_closed)):
                if np.any(q < lo - 1e-9) or np.any(q > hi + 1e-9):
                    raise ConfigError(f"{gtype.value}: {name} violates joint limits")
        self.calibrations = dict(calibrations)
        self._lo, self._hi = lo, hi

    def size_range(self, grasp_type: GraspType) -> tuple[float, float]:
        cal = self._calibration(grasp_type)
        return cal.size_closed, cal.size_open

    def _calibration(self, grasp_type: GraspType) -> GraspCalibration:
        try:
            return self.calibrations[grasp_type]
        except KeyError:
            raise ValueError(f"decoder has no calibration for grasp type {grasp_type.value!r}") from None

    def decode(self, ctx: GraspContext, z: Sequence[float] | None = None) -> DecodedPosture:
        cal = self._calibration(ctx.grasp_type)
        size = float(ctx.grasp_size_m)
        if not math.isfinite(size):
            raise ValueError("grasp size must be finite")
        lam = (size - cal.size_closed) / (cal.size_open - cal.size_closed)
        clamped = lam < 0.0 or lam > 1.0
        lam = min(1.0, max(0.0, lam))
        q = cal.q_closed + lam * (cal.q_open - cal.q_closed)
        q = np.clip(q, self._lo, self._hi)
        return DecodedPosture(JointConfiguration.from_sequence(q), clamped)


@dataclass(frozen=True)
class DecoderLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str


class LearnedSynergy:
    """Inference-only feed-forward decoder loaded from a weights file."""

    def __init__(
        self,
        model: HandModel,
        latent_dim: int,
        grasp_types: Sequence[str],
        layers: Sequence[DecoderLayer],
        size_range: tuple[float, float] = (0.02, 0.12),
    ):
        self.model = model
        self.latent_dim = int(latent_dim)
        self.grasp_types = tuple(grasp_types)
        self.layers = tuple(layers)
        self._size_range = (float(size_range[0]), float(size_range[1]))
        self._lo, self._hi = model.joint_limits()

        in_dim = self.latent_dim + len(self.grasp_types) + 1
        for i, layer in enumerate(self.layers):
            rows, cols = layer.weights.shape
            if cols != in_dim:
                raise ConfigError(f"layers[{i}]: expects {cols} inputs, previous stage provides {in_dim}")
            if layer.bias.shape != (rows,):
                raise ConfigError(f"layers[{i}]: bias length {layer.bias.shape[0]} != rows {rows}")
            in_dim = rows
        if in_dim != model.joint_count:
            raise ConfigError(
                f"decoder output dimension {in_dim} does not match model joint count {model.joint_count}"
            )

    def size_range(self, grasp_type: GraspType) -> tuple[float, float]:
        return self._size_range

    def decode(self, ctx: GraspContext, z: Sequence[float] | None = None) -> DecodedPosture:
        if ctx.grasp_type.value not in self.grasp_types:
            raise ValueError(f"decoder does not support grasp type {ctx.grasp_type.value!r}")
        size = float(ctx.grasp_size_m)
        if not math.isfinite(size):
            raise ValueError("grasp size must be finite")
        if z is None:
            zv = np.zeros(self.latent_dim)
        else:
            zv = np.asarray(z, dtype=float)
            if zv.shape != (self.latent_dim,):
                raise ValueError(f"latent point must have {self.latent_dim} entries, got {zv.shape}")
            if not np.all(np.isfinite(zv)):
                raise ValueError("latent point must be finite")
        onehot = np.zeros(len(self.grasp_types))
        onehot[self.grasp_types.index(ctx.grasp_type.value)] = 1.0
        x = np.concatenate([zv, onehot, [size]])
        for layer in self.layers:
            x = _ACTIVATIONS[layer.activation](layer.weights @ x + layer.bias)
        q = np.clip(x, self._lo, self._hi)
        lo, hi = self._size_range
        return DecodedPosture(JointConfiguration.from_sequence(q), not lo <= size <= hi)


def load_decoder_weights(path: str | Path, model: HandModel) -> LearnedSynergy:
    """Load a decoder/1 weights file and bind it to a hand model."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read decoder weights {path}: {exc}") from None
    if not isinstance(data, dict) or data.get("schema") != DECODER_SCHEMA:
        raise ConfigError(f"decoder weights: schema must be {DECODER_SCHEMA!r}")
    latent_dim = data.get("latent_dim")
    if not isinstance(latent_dim, int) or latent_dim < 0:
        raise ConfigError("decoder weights: latent_dim must be a non-negative integer")
    grasp_types = data.get("grasp_types")
    if not isinstance(grasp_types, list) or sorted(grasp_types) != sorted(t.value for t in GraspType):
        raise ConfigError("decoder weights: grasp_types must list tripod, pinch and lateral_tripod")
    raw_layers = data.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ConfigError("decoder weights: layers must be a non-empty list")
    layers = []
    for i, ld in enumerate(raw_layers):
        if not isinstance(ld, dict):
            raise ConfigError(f"layers[{i}]: expected an object")
        rows, cols = ld.get("rows"), ld.get("cols")
        if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
            raise ConfigError(f"layers[{i}]: rows/cols must be positive integers")
        weights = ld.get("weights")
        if not isinstance(weights, list) or len(weights) != rows * cols:
            raise ConfigError(f"layers[{i}]: weights must hold rows*cols={rows * cols} values (row-major)")
        bias = ld.get("bias")
        if not isinstance(bias, list) or len(bias) != rows:
            raise ConfigError(f"layers[{i}]: bias must hold {rows} values")
        activation = ld.get("activation", "identity")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"layers[{i}]: unknown activation {activation!r}")
        w = np.array(weights, dtype=float).reshape(rows, cols)
        b = np.array(bias, dtype=float)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ConfigError(f"layers[{i}]: weights and bias must be finite")
        layers.append(DecoderLayer(weights=w, bias=b, activation=activation))
    size_range = data.get("size_range", [0.02, 0.12])
    if not (isinstance(size_range, list) and len(size_range) == 2 and size_range[0] < size_range[1]):
        raise ConfigError("decoder weights: size_range must be [lo, hi] with lo < hi")
    return LearnedSynergy(model, latent_dim, grasp_types, layers, (size_range[0], size_range[1]))


def default_synergy(model: HandModel) -> AnalyticSynergy:
    """Analytic decoder for the bundled hand, sizes measured via FK."""
    slices = model.finger_slices()
    missing = [n for n in ("thumb", "index", "middle") if n not in slices]
    if missing:
        raise ConfigError(
            f"default calibration needs fingers thumb/index/middle, missing {missing}; "
            "supply a custom AnalyticSynergy for other hands"
        )
    calibrations = {}
    for gtype, per_finger in _DEFAULT_POSTURES.items():
        q_open = np.zeros(model.joint_count)
        q_closed = np.zeros(model.joint_count)
        for name, (open_angles, closed_angles) in per_finger.items():
            sl = slices[name]
            if sl.stop - sl.start != len(open_angles):
                raise ConfigError(f"default calibration expects 3 joints on finger {name!r}")
            q_open[sl] = open_angles
            q_closed[sl] = closed_angles
        size_open = thumb_index_distance(model, JointConfiguration.from_sequence(q_open))
        size_closed = thumb_index_distance(model, JointConfiguration.from_sequence(q_closed))
        calibrations[gtype] = GraspCalibration(q_open, q_closed, size_open, size_closed)
    return AnalyticSynergy(model, calibrations)


@dataclass(frozen=True)
class SizeMap:
    """Commanded-size to achieved-distance table for one grasp type."""

    grasp_type: GraspType
    entries: tuple[tuple[float, float], ...]
    violations: int


def calibrate_size_map(decoder, model: HandModel, grasp_type: GraspType, n_samples: int) -> SizeMap:
    """Sample the decoder across its size range and report achieved distances.

    The table is sorted by commanded size; ``violations`` counts adjacent
    pairs where the achieved distance decreases, which is the detector for
    a decoder that does not honor the size conditioning.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    lo, hi = decoder.size_range(grasp_type)
    commanded = np.linspace(lo, hi, n_samples)
    entries = []
    for size in commanded:
        posture = decoder.decode(GraspContext(grasp_type, float(size)))
        achieved = thumb_index_distance(model, posture.joints)
        entries.append((float(size), float(achieved)))
    violations = sum(
        1 for (_, a), (_, b) in zip(entries, entries[1:]) if b < a - 1e-9
    )
    return SizeMap(grasp_type=grasp_type, entries=tuple(entries), violations=violations)
