"""Synthetic test matrices: a rank-``k`` block of ``t`` columns next to an independent low-rank remainder."""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from .core import ColumnSet, DomainError, NumericError, as_matrix

__all__ = [
    "InstanceSpec",
    "generate",
    "seed_streams",
    "write_matrix_csv",
    "read_matrix_csv",
]

_RANK_TOL = 1e-10


def seed_streams(seed: int, count: int = 2) -> list[np.random.Generator]:
    """Independent generators split from one integer seed.

    Stream 0 builds the instance, stream 1 drives the sampler. Runs that share a
    seed therefore share both the matrix and the sampling randomness.
    """
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.default_rng(c) for c in children]


@dataclass(frozen=True)
class InstanceSpec:
    """Size and rank structure of one synthetic matrix.

    ``tau`` is always the first ``t`` columns. ``mode`` is ``"gaussian"`` for
    standard normal factors or ``"integer"`` for factors drawn uniformly from
    ``{-q, ..., q}``; the latter yields singular probes with positive probability.
    """

    m: int = 50
    n: int = 50
    t: int = 20
    k: int = 2
    r_rest: int = 4
    seed: int = 0
    mode: str = "gaussian"
    q: int = 1

    def __post_init__(self):
        m, n, t, k, r = self.m, self.n, self.t, self.k, self.r_rest
        if m < 1 or n < 1:
            raise DomainError(f"matrix must be nonempty, got {m}x{n}")
        if not 1 <= t <= n:
            raise DomainError(f"need 1 <= t <= n, got t={t}, n={n}")
        if not 1 <= k <= min(m, t):
            raise DomainError(f"need 1 <= k <= min(m, t), got k={k}")
        if t < n and not 1 <= r <= min(m, n - t):
            raise DomainError(f"need 1 <= r_rest <= min(m, n - t), got r_rest={r}")
        if self.mode not in ("gaussian", "integer"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.mode == "integer" and self.q < 1:
            raise DomainError("integer mode needs q >= 1")

    @property
    def tau(self) -> ColumnSet:
        return ColumnSet.first(self.n, self.t)

    @property
    def expected_rank(self) -> int:
        rest = self.r_rest if self.t < self.n else 0
        return min(self.k + rest, self.m, self.n)

    def as_dict(self) -> dict:
        return asdict(self)


def _factor(rng: np.random.Generator, shape, spec: InstanceSpec) -> np.ndarray:
    if spec.mode == "gaussian":
        return rng.standard_normal(shape)
    return rng.integers(-spec.q, spec.q + 1, size=shape).astype(float)


def _numerical_rank_ok(A: np.ndarray, r: int) -> bool:
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return False
    if r < s.size and s[r] / s[0] > _RANK_TOL:
        return False
    return s[r - 1] / s[0] > _RANK_TOL


def generate(spec: InstanceSpec) -> tuple[np.ndarray, ColumnSet]:
    """Draw ``M`` for ``spec`` and return it with its structured column set.

    ``M[:, :t] = G1 @ C1`` has rank ``k``; ``M[:, t:] = G2 @ C2`` has rank
    ``r_rest``; all four factors are drawn independently. Gaussian instances
    are rank-certified from their singular values, integer instances are not
    (a discrete draw can legitimately lose rank).
    """
    rng = seed_streams(spec.seed)[0]
    m, n, t, k = spec.m, spec.n, spec.t, spec.k
    M = np.empty((m, n))
    M[:, :t] = _factor(rng, (m, k), spec) @ _factor(rng, (k, t), spec)
    if t < n:
        M[:, t:] = _factor(rng, (m, spec.r_rest), spec) @ _factor(rng, (spec.r_rest, n - t), spec)
    if spec.mode == "gaussian":
        if not _numerical_rank_ok(M[:, :t], k) or not _numerical_rank_ok(M, spec.expected_rank):
            raise NumericError(f"rank certification failed for {spec}")
    return M, spec.tau


def write_matrix_csv(M, dest: str | Path | TextIO) -> None:
    """One matrix row per line, 17 significant digits so the round trip is exact."""
    M = as_matrix(M, "M")
    text = "".join(",".join(format(float(x), ".17g") for x in row) + "\n" for row in M)
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_matrix_csv(src: str | Path | TextIO) -> np.ndarray:
    if isinstance(src, (str, Path)):
        src = io.StringIO(Path(src).read_text())
    return as_matrix(np.loadtxt(src, delimiter=",", ndmin=2), "M")
