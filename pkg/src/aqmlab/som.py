"""Self-organizing map with a supervised scalar output layer.

The map is a rectangular grid of neurons. Each neuron holds a 2-component
input weight vector (compared against inputs by Euclidean distance) and one
output weight (the value the map answers with). Training moves the winning
neuron and its grid neighbourhood toward the presented input, and nudges
their output weights toward a teaching signal. Once frozen, a map is
immutable and can be shared read-only.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

DEFAULT_ROWS = 25
DEFAULT_COLS = 25

# Default clamp bounds for output weights, matching the drop-probability
# clamps of the adaptive queue disciplines.
DEFAULT_OUT_BOUNDS = (0.001, 0.5)


class FrozenMapError(RuntimeError):
    """Raised when training is attempted on a frozen map."""


class SomFormatError(ValueError):
    """Raised when a map file is malformed."""


@dataclass
class LearnParams:
    """Learning schedule: rates and neighbourhood radius with decay floors."""

    eta_in: float = 0.3
    eta_out: float = 0.3
    radius: float = 6.0
    decay: float = 0.999
    explore_sigma: float = 0.02
    eta_floor: float = 0.01
    radius_floor: float = 1.0

    def __post_init__(self) -> None:
        if self.eta_in < 0 or self.eta_out < 0:
            raise ValueError("learning rates must be non-negative")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if not (0 < self.decay <= 1):
            raise ValueError("decay must be in (0, 1]")

    def decay_step(self) -> None:
        """One multiplicative decay step, respecting the floors."""
        self.eta_in = max(self.eta_floor, self.eta_in * self.decay)
        self.eta_out = max(self.eta_floor, self.eta_out * self.decay)
        self.radius = max(self.radius_floor, self.radius * self.decay)


class SomMap:
    """Grid of neurons with 2-D input weights and a scalar output weight."""

    def __init__(self, in_weights: np.ndarray, out_weights: np.ndarray,
                 out_bounds: tuple[float, float] = DEFAULT_OUT_BOUNDS):
        in_weights = np.asarray(in_weights, dtype=np.float64)
        out_weights = np.asarray(out_weights, dtype=np.float64)
        if in_weights.ndim != 3 or in_weights.shape[2] != 2:
            raise ValueError(f"input weights must have shape (rows, cols, 2), got {in_weights.shape}")
        if out_weights.shape != in_weights.shape[:2]:
            raise ValueError("output weight grid must match the input weight grid")
        self.in_w = in_weights
        self.out_w = out_weights
        self.out_lo, self.out_hi = out_bounds
        self.frozen = False

    @property
    def rows(self) -> int:
        return self.in_w.shape[0]

    @property
    def cols(self) -> int:
        return self.in_w.shape[1]

    @classmethod
    def random(cls, rng: random.Random, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS,
               out_init: tuple[float, float] = (0.01, 0.2),
               out_bounds: tuple[float, float] = DEFAULT_OUT_BOUNDS) -> "SomMap":
        """Fresh map: input weights uniform over the unit square, output
        weights uniform over *out_init*."""
        n = rows * cols
        in_w = np.array([rng.random() for _ in range(n * 2)]).reshape(rows, cols, 2)
        lo, hi = out_init
        out_w = np.array([lo + (hi - lo) * rng.random() for _ in range(n)]).reshape(rows, cols)
        return cls(in_w, out_w, out_bounds)

    # -- lookup ---------------------------------------------------------

    def winner(self, x) -> tuple[int, int]:
        """Coordinate of the neuron nearest *x*; ties go to the smallest
        row-major index."""
        dx = self.in_w[:, :, 0] - x[0]
        dy = self.in_w[:, :, 1] - x[1]
        flat = (dx * dx + dy * dy).argmin()
        return divmod(int(flat), self.cols)

    def respond(self, x) -> float:
        return float(self.out_w[self.winner(x)])

    # -- training ---------------------------------------------------------

    def train_step(self, x, target: float, lp: LearnParams) -> None:
        """Winner-take-most update of input and output weights.

        Neurons within Chebyshev grid distance ``lp.radius`` of the winner
        learn with a Gaussian falloff h = exp(-d^2 / (2 radius^2)); a zero
        radius updates the winner alone at full strength.
        """
        if self.frozen:
            raise FrozenMapError("cannot train a frozen map")
        wr, wc = self.winner(x)
        reach = int(lp.radius)
        r0, r1 = max(0, wr - reach), min(self.rows, wr + reach + 1)
        c0, c1 = max(0, wc - reach), min(self.cols, wc + reach + 1)
        dr = np.abs(np.arange(r0, r1) - wr)
        dc = np.abs(np.arange(c0, c1) - wc)
        d = np.maximum(dr[:, None], dc[None, :]).astype(np.float64)
        if lp.radius > 0:
            h = np.exp(-(d * d) / (2.0 * lp.radius * lp.radius))
            h[d > lp.radius] = 0.0
        else:
            h = np.where(d == 0, 1.0, 0.0)
        sub_in = self.in_w[r0:r1, c0:c1]
        sub_in += lp.eta_in * h[:, :, None] * (np.asarray(x, dtype=np.float64) - sub_in)
        sub_out = self.out_w[r0:r1, c0:c1]
        sub_out += lp.eta_out * h * (target - sub_out)
        np.clip(sub_out, self.out_lo, self.out_hi, out=sub_out)

    def freeze(self) -> None:
        self.frozen = True
        self.in_w.setflags(write=False)
        self.out_w.setflags(write=False)

    # -- comparison / integrity -------------------------------------------

    def checksum(self) -> int:
        """Stable digest of all weights, for immutability checks."""
        import zlib

        return zlib.crc32(self.in_w.tobytes()) ^ zlib.crc32(self.out_w.tobytes())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SomMap):
            return NotImplemented
        return (self.in_w.shape == other.in_w.shape
                and np.array_equal(self.in_w, other.in_w)
                and np.array_equal(self.out_w, other.out_w))


def save_map(som: SomMap, path) -> None:
    """Write a map in the KSOM text format (full-precision floats, LF)."""
    lines = [f"KSOM 1 {som.rows} {som.cols} 2 1"]
    for r in range(som.rows):
        for c in range(som.cols):
            w1 = float(som.in_w[r, c, 0])
            w2 = float(som.in_w[r, c, 1])
            wo = float(som.out_w[r, c])
            lines.append(f"{r} {c} {w1!r} {w2!r} {wo!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_map(path, out_bounds: tuple[float, float] = DEFAULT_OUT_BOUNDS) -> SomMap:
    """Read a KSOM file back into a map; the round trip is lossless.

    Loaded maps come back frozen: persisted maps are deployment artifacts.
    Raises SomFormatError with the offending line number for malformed
    headers, dimension mismatches, and out-of-range weights.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SomFormatError(f"{path}: empty map file")
    header = lines[0].split()
    if len(header) != 6 or header[0] != "KSOM" or header[1] != "1":
        raise SomFormatError(f"{path}:1: bad header {lines[0]!r}")
    try:
        rows, cols, in_dim, out_dim = (int(v) for v in header[2:])
    except ValueError as exc:
        raise SomFormatError(f"{path}:1: non-integer dimensions in header") from exc
    if rows <= 0 or cols <= 0 or in_dim != 2 or out_dim != 1:
        raise SomFormatError(
            f"{path}:1: unsupported dimensions rows={rows} cols={cols} in={in_dim} out={out_dim}"
        )
    expected = rows * cols
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != expected:
        raise SomFormatError(
            f"{path}: dimension mismatch: header promises {expected} neurons, file has {len(body)}"
        )
    in_w = np.empty((rows, cols, 2), dtype=np.float64)
    out_w = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        lineno = i + 2
        parts = line.split()
        if len(parts) != 5:
            raise SomFormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            r, c = int(parts[0]), int(parts[1])
            w1, w2, wo = float(parts[2]), float(parts[3]), float(parts[4])
        except ValueError as exc:
            raise SomFormatError(f"{path}:{lineno}: unparsable values") from exc
        if (r, c) != divmod(i, cols):
            raise SomFormatError(
                f"{path}:{lineno}: neuron ({r},{c}) out of row-major order"
            )
        if not (0.0 <= w1 <= 1.0 and 0.0 <= w2 <= 1.0):
            raise SomFormatError(f"{path}:{lineno}: input weight outside [0, 1]")
        if not (0.0 <= wo <= 1.0):
            raise SomFormatError(f"{path}:{lineno}: output weight {wo} outside [0, 1]")
        in_w[r, c] = (w1, w2)
        out_w[r, c] = wo
    som = SomMap(in_w, out_w, out_bounds)
    som.freeze()
    return som
