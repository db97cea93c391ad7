"""Origin-symmetric spectral domains (boxes and Euclidean balls).

Only the two shapes needed for the flat-limit experiments are representable:
an axis-aligned box ``[-s_1, s_1] x ... x [-s_d, s_d]`` and a closed ball of
radius ``r``.  Both are closed sets, so boundary points are members.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class SpectrumDomain:
    """A closed, origin-symmetric box or ball in ``R^d``.

    Use :meth:`box` or :meth:`ball` rather than the raw constructor.
    """

    dim: int
    shape: str
    halfwidths: Optional[Tuple[float, ...]] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim!r}")
        if self.shape == "box":
            if self.halfwidths is None or len(self.halfwidths) != self.dim:
                raise ValueError("box needs exactly `dim` halfwidths")
            if any(not (h > 0 and math.isfinite(h)) for h in self.halfwidths):
                raise ValueError(f"box halfwidths must be positive and finite: {self.halfwidths}")
        elif self.shape == "ball":
            if self.radius is None or not (self.radius > 0 and math.isfinite(self.radius)):
                raise ValueError(f"ball radius must be positive and finite: {self.radius}")
        else:
            raise ValueError(f"unknown shape {self.shape!r}; expected 'box' or 'ball'")

    @classmethod
    def box(cls, halfwidths: Sequence[float]) -> "SpectrumDomain":
        hw = tuple(float(h) for h in halfwidths)
        return cls(dim=len(hw), shape="box", halfwidths=hw)

    @classmethod
    def ball(cls, radius: float, dim: int) -> "SpectrumDomain":
        return cls(dim=int(dim), shape="ball", radius=float(radius))

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        if self.shape == "box":
            return {"shape": "box", "halfwidths": list(self.halfwidths), "dim": self.dim}
        return {"shape": "ball", "radius": self.radius, "dim": self.dim}

    @classmethod
    def from_dict(cls, spec: dict) -> "SpectrumDomain":
        shape = spec.get("shape")
        if shape == "box":
            dom = cls.box(spec["halfwidths"])
            if "dim" in spec and int(spec["dim"]) != dom.dim:
                raise ValueError("'dim' disagrees with the number of halfwidths")
            return dom
        if shape == "ball":
            return cls.ball(spec["radius"], spec["dim"])
        raise ValueError(f"unknown domain shape {shape!r}")

    # -- convenience ---------------------------------------------------

    def bounding_halfwidths(self) -> np.ndarray:
        """Halfwidths of the smallest axis box containing the domain."""
        if self.shape == "box":
            return np.asarray(self.halfwidths, dtype=float)
        return np.full(self.dim, self.radius)

    def as_box(self) -> Optional["SpectrumDomain"]:
        """The same set as a box when possible (any box, or a 1-d ball)."""
        if self.shape == "box":
            return self
        if self.dim == 1:
            return SpectrumDomain.box((self.radius,))
        return None


def inscribed_delta(domain: SpectrumDomain) -> float:
    """Largest ``delta`` with ``delta * B_2`` contained in the domain."""
    if domain.shape == "box":
        return float(min(domain.halfwidths))
    return float(domain.radius)


def circumscribed_in_unit_ball(domain: SpectrumDomain) -> bool:
    """True iff the domain lies in the closed unit ball."""
    if domain.shape == "box":
        return bool(math.hypot(*domain.halfwidths) <= 1.0)
    return bool(domain.radius <= 1.0)


def measure(domain: SpectrumDomain) -> float:
    """Lebesgue measure of the domain."""
    if domain.shape == "box":
        return float(np.prod([2.0 * h for h in domain.halfwidths]))
    d = domain.dim
    return float(math.pi ** (d / 2) * domain.radius ** d / math.gamma(d / 2 + 1))


def contains(domain: SpectrumDomain, point) -> bool:
    """Closed-set membership test for a single point."""
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.shape[0] != domain.dim:
        raise ValueError(f"point has dimension {x.shape[0]}, domain has {domain.dim}")
    if domain.shape == "box":
        return bool(np.all(np.abs(x) <= np.asarray(domain.halfwidths)))
    return bool(np.sqrt(np.dot(x, x)) <= domain.radius)


def contains_many(domain: SpectrumDomain, points) -> np.ndarray:
    """Vectorized :func:`contains` over an ``(n, d)`` array."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != domain.dim:
        raise ValueError(f"points have dimension {x.shape[1]}, domain has {domain.dim}")
    if domain.shape == "box":
        return np.all(np.abs(x) <= np.asarray(domain.halfwidths), axis=1)
    return np.sqrt(np.sum(x * x, axis=1)) <= domain.radius


def contains_box(domain: SpectrumDomain, lo, hi) -> bool:
    """True iff the axis box ``[lo, hi]`` is a subset of the (convex) domain."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if domain.shape == "box":
        hw = np.asarray(domain.halfwidths)
        return bool(np.all(lo >= -hw) and np.all(hi <= hw))
    # farthest corner from the origin, per axis
    far = np.maximum(np.abs(lo), np.abs(hi))
    return bool(np.sqrt(np.dot(far, far)) <= domain.radius)
