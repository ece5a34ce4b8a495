"""Simulation of paired competing-risks data and its CSV format.

Given the frailties the two individuals are independent.  Individual ``k``
fails at ``T_k`` solving ``sum_j eps_kj H_kj(T_k) = E`` with ``E ~ Exp(1)``
and the cause is drawn with probability proportional to ``h_kj(T_k) eps_kj``.

Record ``i`` uses its own stream ``SeedSequence([seed, i])`` so the output
does not depend on how records are batched.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import frailty as fr
from .closedform import ModelSpec
from .errors import ParseError
from .hazards import total_inverse

log = logging.getLogger(__name__)

HEADER = ("t1", "j1", "t2", "j2")
OPTIONAL = ("censored",)


@dataclass(frozen=True)
class PairRecord:
    t1: float
    j1: int
    t2: float
    j2: int


@dataclass(frozen=True)
class Dataset:
    """Columns of a paired dataset; causes are 1-based."""

    t1: np.ndarray
    j1: np.ndarray
    t2: np.ndarray
    j2: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.t1.size)

    @property
    def records(self) -> list[PairRecord]:
        return [PairRecord(float(a), int(b), float(c), int(d))
                for a, b, c, d in zip(self.t1, self.j1, self.t2, self.j2)]

    @classmethod
    def from_records(cls, records, meta=None):
        recs = list(records)
        cols = list(zip(*[(r.t1, r.j1, r.t2, r.j2) for r in recs])) or [(), (), (), ()]
        return cls(np.asarray(cols[0], dtype=float), np.asarray(cols[1], dtype=int),
                   np.asarray(cols[2], dtype=float), np.asarray(cols[3], dtype=int),
                   dict(meta or {}))

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.concatenate([self.t1, other.t1]), np.concatenate([self.j1, other.j1]),
                       np.concatenate([self.t2, other.t2]), np.concatenate([self.j2, other.j2]),
                       dict(self.meta))


def _draw_individual(m, k, eps, expo, u):
    hs = m.hazards
    T = np.asarray(total_inverse(hs, k, eps, expo), dtype=float).reshape(-1)
    rates = hs.hazards(k, T) * eps
    total = rates.sum(axis=1)
    bad = ~(total > 0) | ~np.isfinite(total)
    # at T = 0 a Weibull hazard may be 0 or infinite; fall back to the
    # limiting cause shares, which only matters on a null set
    if np.any(bad):
        with np.errstate(invalid="ignore"):
            near = hs.hazards(k, np.full(bad.sum(), 1e-300)) * eps[bad]
            near = np.where(np.isfinite(near), near, np.where(np.isinf(near), 1.0, 0.0))
        rates[bad] = near
        total = rates.sum(axis=1)
    cum = np.cumsum(rates, axis=1) / total[:, None]
    J = (u[:, None] > cum).sum(axis=1) + 1
    return T, np.minimum(J, hs.n_causes(k))


def simulate_pairs(m: ModelSpec, n: int, seed: int) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    L1, L2 = m.dims
    eps1 = np.empty((n, L1))
    eps2 = np.empty((n, L2))
    expo = np.empty((n, 2))
    unif = np.empty((n, 2))
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))
        d = fr.sample(m.frailty, L1, L2, rng)
        eps1[i], eps2[i] = d.eps1, d.eps2
        expo[i] = rng.standard_exponential(2)
        unif[i] = rng.random(2)
    redraws = 0
    while True:
        bad = (expo <= 0).any(axis=1)
        if not bad.any():
            break
        redraws += int(bad.sum())
        expo[bad] = np.random.default_rng([int(seed), n, redraws]).standard_exponential((bad.sum(), 2))
    if redraws:
        log.info("re-drew %d zero exponential variates", redraws)
    T1, J1 = _draw_individual(m, 1, eps1, expo[:, 0], unif[:, 0])
    T2, J2 = _draw_individual(m, 2, eps2, expo[:, 1], unif[:, 1])
    meta = {"version": __version__, "model": m.to_dict(), "seed": int(seed), "n": int(n)}
    return Dataset(T1, J1, T2, J2, meta)


# ---------------------------------------------------------------- CSV


def format_dataset(ds: Dataset) -> str:
    out = io.StringIO()
    meta = ds.meta or {}
    for key in ("version", "model", "seed", "n"):
        if key in meta:
            value = json.dumps(meta[key], sort_keys=True) if key == "model" else meta[key]
            out.write(f"# {key}: {value}\n")
    out.write(",".join(HEADER) + "\n")
    for a, b, c, d in zip(ds.t1, ds.j1, ds.t2, ds.j2):
        out.write(f"{a:.17g},{int(b)},{c:.17g},{int(d)}\n")
    return out.getvalue()


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_dataset(ds))


def parse_dataset(text: str, dims: tuple[int, int] | None = None) -> Dataset:
    """Parse CSV text; with ``dims=(L1, L2)`` cause indices are range-checked."""
    meta: dict = {}
    rows: list[tuple[float, int, float, int]] = []
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                key, value = key.strip(), value.strip()
                try:
                    meta[key] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key] = value
            continue
        fields = next(csv.reader([stripped]))
        if header is None:
            names = tuple(f.strip() for f in fields)
            if names[:4] != HEADER or any(x not in OPTIONAL for x in names[4:]):
                raise ParseError(lineno, f"expected header {','.join(HEADER)}, got {stripped!r}")
            header = names
            continue
        if len(fields) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(fields)}")
        try:
            t1, t2 = float(fields[0]), float(fields[2])
            j1, j2 = int(fields[1]), int(fields[3])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        for name, t in (("t1", t1), ("t2", t2)):
            if not (np.isfinite(t) and t > 0):
                raise ParseError(lineno, f"{name} must be finite and positive, got {t!r}")
        for k, (name, j) in enumerate((("j1", j1), ("j2", j2))):
            upper = dims[k] if dims else None
            if j < 1 or (upper is not None and j > upper):
                rng = f"1..{upper}" if upper else ">= 1"
                raise ParseError(lineno, f"{name}={j} out of range {rng}")
        rows.append((t1, j1, t2, j2))
    if header is None:
        raise ParseError(1, "missing header line")
    cols = list(zip(*rows)) or [(), (), (), ()]
    return Dataset(np.asarray(cols[0], dtype=float), np.asarray(cols[1], dtype=int),
                   np.asarray(cols[2], dtype=float), np.asarray(cols[3], dtype=int), meta)


def read_dataset(path, dims: tuple[int, int] | None = None) -> Dataset:
    """Read a dataset; cause ranges are checked against ``dims`` or, if
    absent, against the model recorded in the file header."""
    with open(path) as fh:
        text = fh.read()
    if dims is None:
        head = parse_dataset("\n".join(l for l in text.splitlines() if l.startswith("#"))
                             + "\n" + ",".join(HEADER))
        model = head.meta.get("model")
        if isinstance(model, dict) and isinstance(model.get("hazards"), list):
            dims = tuple(len(g) for g in model["hazards"])
    return parse_dataset(text, dims)
