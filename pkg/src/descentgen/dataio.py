"""Blip CSV ingestion, descent cleaning, train/test splitting and artifact files."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArtifactError, ArtifactVersionError, DataFormatError, InsufficientDataError

log = logging.getLogger(__name__)

BLIP_HEADER = ["traj_id", "type", "t_s", "h_m", "rocd_mps", "ias_mps", "mach"]
FPM = 0.3048 / 60.0  # m/s per ft/min
ARTIFACT_FORMAT = "descentgen-artifact"
ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class RadarBlip:
    t: float
    h: float
    rocd: float
    v_ias: float
    mach: float


@dataclass
class Trajectory:
    traj_id: str
    aircraft_type: str
    t: np.ndarray
    h: np.ndarray
    rocd: np.ndarray
    v_ias: np.ndarray
    mach: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def blips(self) -> list[RadarBlip]:
        return [RadarBlip(*map(float, row))
                for row in zip(self.t, self.h, self.rocd, self.v_ias, self.mach)]

    def take(self, idx) -> "Trajectory":
        return Trajectory(self.traj_id, self.aircraft_type, self.t[idx], self.h[idx],
                          self.rocd[idx], self.v_ias[idx], self.mach[idx])

    @classmethod
    def from_blips(cls, traj_id, aircraft_type, blips) -> "Trajectory":
        a = np.array([[b.t, b.h, b.rocd, b.v_ias, b.mach] for b in blips], dtype=float).reshape(-1, 5)
        return cls(traj_id, aircraft_type, *a.T.copy())


@dataclass
class Dataset:
    trajectories: list[Trajectory] = field(default_factory=list)
    quarantined: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i):
        return self.trajectories[i]

    @property
    def ids(self) -> list[str]:
        return [t.traj_id for t in self.trajectories]

    def select(self, ids) -> "Dataset":
        wanted = set(ids)
        return Dataset([t for t in self.trajectories if t.traj_id in wanted])


def _validate(traj: Trajectory) -> str | None:
    arr = np.stack([traj.t, traj.h, traj.rocd, traj.v_ias, traj.mach])
    if not np.all(np.isfinite(arr)):
        return "non-finite value"
    if np.any(traj.h <= 0):
        return "non-positive altitude"
    if np.any(np.diff(traj.t) <= 0):
        return "non-monotone time"
    return None


def read_blips(path) -> Dataset:
    """Parse a blip CSV, grouping rows by ``traj_id`` in order of first appearance."""
    groups: dict[str, list] = {}
    types: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError("missing header", line=1)
        if [h.strip() for h in header] != BLIP_HEADER:
            raise DataFormatError(f"header must be {','.join(BLIP_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(BLIP_HEADER):
                raise DataFormatError(f"expected {len(BLIP_HEADER)} fields, got {len(row)}", line=lineno)
            tid, typ = row[0], row[1]
            try:
                vals = [float(x) for x in row[2:]]
            except ValueError as exc:
                raise DataFormatError(str(exc), line=lineno) from None
            groups.setdefault(tid, []).append(vals)
            types.setdefault(tid, typ)
    ds = Dataset()
    for tid, rows in groups.items():
        a = np.array(rows, dtype=float)
        traj = Trajectory(tid, types[tid], *a.T.copy())
        reason = _validate(traj)
        if reason:
            log.warning("quarantined trajectory %s: %s", tid, reason)
            ds.quarantined.append((tid, reason))
        else:
            ds.trajectories.append(traj)
    return ds


def write_blips(path, dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BLIP_HEADER)
        for tr in dataset:
            for row in zip(tr.t, tr.h, tr.rocd, tr.v_ias, tr.mach):
                w.writerow([tr.traj_id, tr.aircraft_type, *(repr(float(x)) for x in row)])


def _runs(flags):
    """(start, stop) of maximal runs of True."""
    idx = np.flatnonzero(np.diff(np.concatenate([[0], flags.astype(int), [0]])))
    return list(zip(idx[::2], idx[1::2]))


def _constant_rate_mask(r, min_run: int, tol: float):
    """Flag runs of >= ``min_run`` blips whose ROCD stays within ``tol`` of the run mean."""
    n = len(r)
    out = np.zeros(n, dtype=bool)
    if min_run <= 0 or n < min_run:
        return out
    i = 0
    while i < n:
        j = i + 1
        while j < n:
            w = r[i:j + 1]
            if np.max(np.abs(w - w.mean())) <= tol:
                j += 1
            else:
                break
        if j - i >= min_run:
            out[i:j] = True
            i = j
        else:
            i += 1
    return out


def clean_descents(dataset, min_rocd_fpm: float = 500.0, const_run: int = 10,
                   const_tol_fpm: float = 25.0) -> Dataset:
    """Keep the free-descent part of each trajectory.

    Blips descending slower than ``min_rocd_fpm`` are dropped, runs of near-constant
    ROCD (managed descent) are removed, and the longest remaining contiguous stretch
    is kept. Trajectories with fewer than two surviving blips are dropped.
    """
    thr = -min_rocd_fpm * FPM
    tol = const_tol_fpm * FPM
    out = Dataset(quarantined=list(getattr(dataset, "quarantined", [])))
    for tr in dataset:
        keep = tr.rocd <= thr
        for a, b in _runs(keep):
            keep[a:b] &= ~_constant_rate_mask(tr.rocd[a:b], const_run, tol)
        runs = _runs(keep)
        if not runs:
            continue
        a, b = max(runs, key=lambda ab: (ab[1] - ab[0], -ab[0]))
        if b - a >= 2:
            out.trajectories.append(tr.take(slice(a, b)))
    return out


def split(dataset, train_frac: float = 0.8, seed: int = 0):
    """Shuffled trajectory-level train/test split."""
    n = len(dataset)
    if n < 5:
        raise InsufficientDataError(f"need at least 5 trajectories to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(train_frac * n))
    trajs = list(dataset)
    train = Dataset([trajs[i] for i in sorted(perm[:n_train])])
    test = Dataset([trajs[i] for i in sorted(perm[n_train:])])
    return train, test


def kfold(dataset, k: int = 5, seed: int = 0):
    """Yield ``(fold, train, held_out)`` for a shuffled k-fold partition."""
    n = len(dataset)
    if n < 3 * k:
        raise InsufficientDataError(f"{n} trajectories is too few for {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    trajs = list(dataset)
    for f, held in enumerate(np.array_split(perm, k)):
        held_set = set(held.tolist())
        yield (f, Dataset([trajs[i] for i in range(n) if i not in held_set]),
               Dataset([trajs[i] for i in sorted(held_set)]))


# -- artifacts ---------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if not math.isfinite(x):
            raise ArtifactError("artifacts cannot hold non-finite numbers")
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_artifact(kind: str, payload: dict) -> str:
    doc = {"format": ARTIFACT_FORMAT, "version": ARTIFACT_VERSION, "kind": kind,
           "payload": _jsonable(payload)}
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def save_artifact(path, kind: str, payload: dict) -> None:
    """Write atomically so a crash never leaves a half-written artifact."""
    path = Path(path)
    text = dumps_artifact(kind, payload)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def load_artifact(path, kind: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"cannot read artifact {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != ARTIFACT_FORMAT or "payload" not in doc:
        raise ArtifactError(f"{path} is not a {ARTIFACT_FORMAT} file")
    if doc.get("version") != ARTIFACT_VERSION:
        raise ArtifactVersionError(
            f"{path} has artifact version {doc.get('version')}, expected {ARTIFACT_VERSION}")
    if kind is not None and doc.get("kind") != kind:
        raise ArtifactError(f"{path} holds a {doc.get('kind')!r} artifact, expected {kind!r}")
    return doc["payload"]
