"""Interpolation node sets: tensor lattices, Kadec-type perturbations, I/O.

Node sets are finite sections of (conjecturally or provably) Riesz-basis
sequences.  The separation ``q`` of a set is the smallest pairwise distance.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import HypothesisViolation, SizeCapExceeded

LATTICE_COUNT_CAP = 10**6
EXACT_SEPARATION_LIMIT = 10**4


@dataclass(frozen=True)
class Provenance:
    kind: str = "explicit"  # lattice | kadec | explicit
    spacing: Optional[float] = None
    extent: Optional[int] = None
    magnitude: Optional[float] = None
    seed: Optional[int] = None
    truncation_radius: Optional[float] = None
    truncation_center: Optional[tuple] = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("spacing", "extent", "magnitude", "seed", "truncation_radius"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.truncation_center is not None:
            out["truncation_center"] = list(self.truncation_center)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        kw = dict(d)
        if kw.get("truncation_center") is not None:
            kw["truncation_center"] = tuple(kw["truncation_center"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Finite ordered node sequence in ``R^d``.

    ``points`` is an ``(N, d)`` float array; it is made read-only on
    construction.  ``multi_index`` is kept for lattice-derived sets so that
    perturbations can be keyed by lattice site rather than list position.
    """

    points: np.ndarray
    provenance: Provenance = field(default_factory=Provenance)
    multi_index: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError("points must be an (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.multi_index is not None:
            mi = np.array(self.multi_index, dtype=np.int64, copy=True)
            mi.setflags(write=False)
            object.__setattr__(self, "multi_index", mi)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return (self.provenance == other.provenance
                and self.points.shape == other.points.shape
                and bool(np.array_equal(self.points, other.points)))

    def translated(self, shift) -> "NodeSet":
        shift = np.asarray(shift, dtype=float).reshape(1, -1)
        return NodeSet(self.points + shift, replace(self.provenance, kind="explicit"))


def lattice_nodes(d: int, spacing: float, extent, cap: int = LATTICE_COUNT_CAP) -> NodeSet:
    """All points ``spacing * k`` with integer ``|k_i| <= extent_i``.

    ``extent`` may be one integer or one integer per axis.  Points are in
    lexicographic multi-index order (last axis fastest).
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    ext = np.broadcast_to(np.asarray(extent, dtype=np.int64), (d,))
    if np.any(ext < 1):
        raise ValueError("extent must be >= 1 on every axis")
    count = int(np.prod([2 * int(e) + 1 for e in ext], dtype=object))
    if count > cap:
        raise SizeCapExceeded(f"lattice would have {count} points (cap {cap})")
    axes = [np.arange(-e, e + 1, dtype=np.int64) for e in ext]
    grids = np.meshgrid(*axes, indexing="ij")
    mi = np.stack([g.ravel() for g in grids], axis=1)
    prov = Provenance(kind="lattice", spacing=float(spacing),
                      extent=int(ext[0]) if np.all(ext == ext[0]) else None)
    return NodeSet(spacing * mi.astype(float), prov, multi_index=mi)


def _site_uniforms(seed: int, multi_index: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) draws, one per axis, keyed by (seed, lattice site, axis).

    A Philox stream is positioned by the lattice multi-index, and axis ``i``
    takes the ``i``-th draw of that stream.  The result therefore does not
    depend on how many sites are generated or in which order.
    """
    n, d = multi_index.shape
    if d > 4:
        raise ValueError("keyed perturbation supports d <= 4")
    key = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out = np.empty((n, d))
    counter = np.zeros(4, dtype=np.uint64)
    for row in range(n):
        counter[:] = 0
        counter[:d] = multi_index[row].astype(np.int64).view(np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        out[row] = gen.random(d)
    return out


def kadec_perturb(base: NodeSet, magnitude: float, seed: int) -> NodeSet:
    """Shift each coordinate of a lattice by an independent uniform draw.

    Each coordinate moves by a value in ``[-magnitude, magnitude]``.  The
    per-axis bound ``magnitude < spacing / 4`` is enforced strictly.
    """
    prov = base.provenance
    if prov.kind != "lattice" or prov.spacing is None or base.multi_index is None:
        raise ValueError("kadec_perturb needs a node set with lattice provenance")
    h = prov.spacing
    if magnitude < 0:
        raise ValueError("perturbation magnitude must be nonnegative")
    if not magnitude < h / 4:
        raise HypothesisViolation(
            f"perturbation magnitude {magnitude:.6g} violates the strict Kadec bound "
            f"L < h/4 = {h / 4:.6g} (h = {h:.6g})")
    new_prov = replace(prov, kind="kadec", magnitude=float(magnitude), seed=int(seed))
    if magnitude == 0:
        return NodeSet(base.points, new_prov, multi_index=base.multi_index)
    u = _site_uniforms(seed, base.multi_index)
    shift = magnitude * (2.0 * u - 1.0)
    lattice = h * base.multi_index.astype(float)
    return NodeSet(lattice + shift, new_prov, multi_index=base.multi_index)


def separation(nodes) -> float:
    """Minimum pairwise Euclidean distance ``q``.

    All pairs are scanned for up to 10^4 points; larger sets use a k-d tree
    nearest-neighbour query, which is also exact.
    """
    pts = nodes.points if isinstance(nodes, NodeSet) else np.atleast_2d(np.asarray(nodes, float))
    n = pts.shape[0]
    if n < 2:
        raise ValueError("separation needs at least 2 points")
    if n <= EXACT_SEPARATION_LIMIT:
        best = math.inf
        # row blocks keep memory bounded
        for start in range(0, n - 1, 512):
            blk = pts[start:start + 512]
            diff = blk[:, None, :] - pts[None, start + 1:, :]
            dist = np.sqrt(np.sum(diff * diff, axis=2))
            rows = np.arange(blk.shape[0])[:, None]
            cols = np.arange(start + 1, n)[None, :]
            dist = np.where(cols > rows + start, dist, np.inf)
            best = min(best, float(dist.min()))
        return best
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(dist[:, 1].min())


def truncate_to_radius(nodes: NodeSet, radius: float, center=None) -> NodeSet:
    """Keep the points within Euclidean distance ``radius`` of ``center``."""
    if not radius > 0:
        raise ValueError("truncation radius must be positive")
    c = np.zeros(nodes.dim) if center is None else np.asarray(center, dtype=float).reshape(-1)
    if c.shape[0] != nodes.dim:
        raise ValueError("center dimension mismatch")
    if math.isinf(radius):
        keep = np.ones(len(nodes), dtype=bool)
    else:
        r = np.sqrt(np.sum((nodes.points - c) ** 2, axis=1))
        keep = r <= radius
    if not np.any(keep):
        raise ValueError(f"no nodes within radius {radius} of {c.tolist()}")
    prov = replace(nodes.provenance, truncation_radius=float(radius),
                   truncation_center=tuple(float(v) for v in c))
    mi = None if nodes.multi_index is None else nodes.multi_index[keep]
    return NodeSet(nodes.points[keep], prov, multi_index=mi)


# -- node recipes (used by sweeps) -------------------------------------------

@dataclass(frozen=True)
class NodeRecipe:
    """Lattice (optionally Kadec-perturbed) nodes, buildable at any radius."""

    dim: int
    spacing: float
    extent: Optional[int] = None
    magnitude: float = 0.0
    seed: int = 0

    def build(self, radius: Optional[float] = None) -> NodeSet:
        if radius is None:
            if self.extent is None:
                raise ValueError("recipe needs either an extent or a radius")
            nodes = lattice_nodes(self.dim, self.spacing, self.extent)
        else:
            ext = int(math.ceil(radius / self.spacing)) + 1
            nodes = lattice_nodes(self.dim, self.spacing, ext)
        if self.magnitude > 0:
            nodes = kadec_perturb(nodes, self.magnitude, self.seed)
        if radius is not None:
            nodes = truncate_to_radius(nodes, radius)
        return nodes

    def to_dict(self) -> dict:
        return {"kind": "kadec" if self.magnitude > 0 else "lattice", "dim": self.dim,
                "spacing": self.spacing, "extent": self.extent,
                "magnitude": self.magnitude, "seed": self.seed}


# -- serialization ------------------------------------------------------------

def write_nodes(nodes: NodeSet, csv_path) -> Path:
    """Write ``idx,x0,...`` CSV plus a ``.json`` provenance sidecar."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["idx"] + [f"x{i}" for i in range(nodes.dim)])
        for i, p in enumerate(nodes.points):
            w.writerow([i] + [repr(float(v)) for v in p])
    side = {"provenance": nodes.provenance.to_dict(), "count": len(nodes), "dim": nodes.dim}
    if nodes.multi_index is not None:
        side["multi_index"] = nodes.multi_index.tolist()
    sidecar_path(csv_path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return csv_path


def sidecar_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_suffix(".json")


def read_nodes(csv_path) -> NodeSet:
    csv_path = Path(csv_path)
    with csv_path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "idx":
        raise ValueError(f"{csv_path}: missing 'idx,x0,...' header")
    pts = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, len(rows[0]) - 1)
    prov = Provenance()
    mi = None
    side = sidecar_path(csv_path)
    if side.exists():
        meta = json.loads(side.read_text())
        prov = Provenance.from_dict(meta.get("provenance", {}))
        if "multi_index" in meta:
            mi = np.asarray(meta["multi_index"], dtype=np.int64).reshape(len(pts), -1)
    return NodeSet(pts, prov, multi_index=mi)
