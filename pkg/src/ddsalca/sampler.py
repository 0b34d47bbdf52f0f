"""Random exploration: i.i.d. initial states and input sequences, recorded as behaviors."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .behavior import ExternalBehavior
from .systems import System, simulate_batch

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_DRAW = np.uint64(0xD1B54A32D192ED03)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_bits(seed: int, ids: np.ndarray, n_draws: int) -> np.ndarray:
    """64 random bits per ``(seed, record id, draw)``; shape ``(len(ids), n_draws)``.

    Each value depends only on its own counter, so any partition of the work
    produces the same numbers.
    """
    s = _mix64(np.array([seed & ((1 << 64) - 1)], dtype=np.uint64))[0]
    rec = _mix64(np.asarray(ids, dtype=np.uint64) * _GOLDEN + s)
    draws = (np.arange(n_draws, dtype=np.uint64) + np.uint64(1)) * _DRAW
    return _mix64(rec[:, None] + draws[None, :])


def bits_to_unit(bits: np.ndarray) -> np.ndarray:
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def bits_to_index(bits: np.ndarray, n: int) -> np.ndarray:
    # multiply-shift on the top 32 bits: unbiased up to 2^-32
    return (((bits >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32)).astype(np.int16)


@dataclass(frozen=True)
class SampleConfig:
    N: int
    H: int
    seed: int = 0
    workers: int = 1
    id_offset: int = 0

    def __post_init__(self):
        if self.N < 1 or self.H < 1:
            raise ValueError("N and H must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass
class Dataset:
    """Sampled external behaviors plus their initial states.

    ``outputs`` has shape ``(N, H+1)`` and ``inputs`` ``(N, H)``, both symbol
    indices. ``ids`` are the record counters used to draw each record.
    """

    system: str
    H: int
    output_labels: tuple
    input_labels: tuple
    ids: np.ndarray
    x0: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.output_labels = tuple(self.output_labels)
        self.input_labels = tuple(self.input_labels)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        self.inputs = np.asarray(self.inputs, dtype=np.int16).reshape(len(self.ids), self.H)
        self.outputs = np.asarray(self.outputs, dtype=np.int16).reshape(len(self.ids), self.H + 1)
        if self.x0.ndim == 1:
            self.x0 = self.x0.reshape(len(self.ids), -1)
        if not (len(self.x0) == len(self.inputs) == len(self.outputs) == len(self.ids)):
            raise ValueError("record arrays disagree in length")

    def __len__(self):
        return len(self.ids)

    @property
    def N(self) -> int:
        return len(self.ids)

    @property
    def n_inputs(self) -> int:
        return len(self.input_labels)

    def behavior(self, i: int) -> ExternalBehavior:
        return ExternalBehavior(tuple(self.outputs[i].tolist()), tuple(self.inputs[i].tolist()))

    def subset(self, sl) -> "Dataset":
        return Dataset(self.system, self.H, self.output_labels, self.input_labels,
                       self.ids[sl], self.x0[sl], self.inputs[sl], self.outputs[sl],
                       self.seed, dict(self.meta))

    def head(self, n: int) -> "Dataset":
        return self.subset(slice(0, n))

    @classmethod
    def from_behaviors(cls, behaviors, output_labels, input_labels, system="explicit", x0=None):
        behaviors = list(behaviors)
        if not behaviors:
            raise ValueError("no behaviors")
        H = behaviors[0].H
        if any(b.H != H for b in behaviors):
            raise ValueError("behaviors must share one horizon")
        n = len(behaviors)
        x0 = np.zeros((n, 1)) if x0 is None else np.asarray(x0, float).reshape(n, -1)
        return cls(system, H, output_labels, input_labels, np.arange(n),
                   x0, [b.inputs for b in behaviors], [b.outputs for b in behaviors])


def _sample_chunk(sys: System, cfg: SampleConfig, ids: np.ndarray):
    d = sys.dim
    bits = counter_bits(cfg.seed, ids, d + cfg.H)
    x0 = sys.from_unit(bits_to_unit(bits[:, :d]))
    u = bits_to_index(bits[:, d:], sys.n_inputs)
    y = simulate_batch(sys, x0, u)
    return x0, u, y


def sample_dataset(sys: System, cfg: SampleConfig, chunk: int = 1 << 16) -> Dataset:
    """Draw ``cfg.N`` records: uniform ``x0`` on the domain box, uniform i.i.d. inputs."""
    ids = np.arange(cfg.id_offset, cfg.id_offset + cfg.N, dtype=np.int64)
    x0 = np.empty((cfg.N, sys.dim), dtype=np.float64)
    u = np.empty((cfg.N, cfg.H), dtype=np.int16)
    y = np.empty((cfg.N, cfg.H + 1), dtype=np.int16)

    def fill(a):
        x0[a:a + chunk], u[a:a + chunk], y[a:a + chunk] = _sample_chunk(sys, cfg, ids[a:a + chunk])

    starts = range(0, cfg.N, chunk)
    if cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            list(ex.map(fill, starts))
    else:
        for a in starts:
            fill(a)
    meta = {"N": cfg.N, "H": cfg.H, "seed": cfg.seed, "id_offset": cfg.id_offset}
    meta.update(sys.params())
    return Dataset(sys.name, cfg.H, sys.output_labels, sys.input_labels, ids, x0, u, y,
                   cfg.seed, meta)


def holdout_split(d: Dataset, m: int) -> tuple[Dataset, Dataset]:
    """First ``m`` records and the remaining ``N - m``, order preserved."""
    if not 0 < m < d.N:
        raise ValueError(f"split point {m} must lie strictly between 0 and N={d.N}")
    return d.head(m), d.subset(slice(m, None))
