"""Centrally symmetric convex bodies: dual norms, geometry, lattice enumeration.

Every supported shape (parallelepiped, cube, Euclidean ball, lp-ellipsoid) is
stored in one canonical form: semi-axes ``sigma`` plus an exponent ``mu`` in
[1, inf].  A point x belongs to the body iff

    ( sum_j |x_j / sigma_j|^mu )^(1/mu)  <=  1      (max over j when mu = inf)

so boxes are mu = inf, balls are mu = 2.  All derived quantities (dual norm,
volume, diameter, lattice sets) are computed from the canonical form, which
makes the aliased constructions (cube vs linf-ellipsoid, ball vs l2-ellipsoid)
agree by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Sequence

import numpy as np

#: Hard cap on the number of bounding-box points scanned during enumeration.
LATTICE_CAP = 10**7

#: Desk-scale dimension limit.
MAX_DIM = 4

#: Relative guard band for floating-point membership on the defining inequality.
MEMBERSHIP_GUARD = 1e-12


class BodySpecError(ValueError):
    """Malformed body specification string."""


@dataclass(frozen=True)
class LatticeSet:
    """A finite set of integer lattice vectors, sorted lexicographically."""

    m: int
    points: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if any(len(p) != self.m for p in self.points):
            raise ValueError("lattice point of wrong dimension")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.points)

    def __contains__(self, k) -> bool:
        return tuple(int(c) for c in k) in set(self.points)

    def as_array(self) -> np.ndarray:
        """Points as an (n, m) integer array in enumeration order."""
        if not self.points:
            return np.zeros((0, self.m), dtype=np.int64)
        return np.array(self.points, dtype=np.int64)


@dataclass(frozen=True)
class ConvexBody:
    """Centrally symmetric closed convex body in R^m (canonical lp form).

    Attributes:
        m: dimension, 1 <= m <= 4.
        sigma: per-axis semi-axes, all positive.
        mu: lp exponent in [1, inf] (math.inf for boxes).
        label: display name preserving the constructor used.
    """

    m: int
    sigma: tuple[float, ...]
    mu: float
    label: str

    def __post_init__(self):
        if not (1 <= self.m <= MAX_DIM):
            raise ValueError(f"dimension m={self.m} outside [1, {MAX_DIM}]")
        if len(self.sigma) != self.m:
            raise ValueError("sigma length must equal m")
        if any(s <= 0 for s in self.sigma):
            raise ValueError("semi-axes must be positive")
        if not (self.mu >= 1):
            raise ValueError("exponent mu must lie in [1, inf]")

    # ----- constructors -------------------------------------------------

    @staticmethod
    def parallelepiped(sigma: Sequence[float]) -> "ConvexBody":
        sigma = tuple(float(s) for s in sigma)
        return ConvexBody(len(sigma), sigma, math.inf,
                          "pi:" + ",".join(_fmt(s) for s in sigma))

    @staticmethod
    def cube(M: float, m: int) -> "ConvexBody":
        return ConvexBody(m, (float(M),) * m, math.inf, f"cube:{_fmt(M)}")

    @staticmethod
    def ball(M: float, m: int) -> "ConvexBody":
        return ConvexBody(m, (float(M),) * m, 2.0, f"ball:{_fmt(M)}")

    @staticmethod
    def lp_ellipsoid(sigma: Sequence[float], mu: float) -> "ConvexBody":
        sigma = tuple(float(s) for s in sigma)
        return ConvexBody(len(sigma), sigma, float(mu),
                          "lp:" + ",".join(_fmt(s) for s in sigma) + f":{_fmt(mu)}")

    def scaled(self, gamma: float) -> "ConvexBody":
        """The dilated body gamma*V (same shape, scaled semi-axes)."""
        if gamma <= 0:
            raise ValueError("scale factor must be positive")
        return ConvexBody(self.m, tuple(gamma * s for s in self.sigma),
                          self.mu, f"{self.label}*{_fmt(gamma)}")

    # ----- pointwise geometry -------------------------------------------

    def gauge(self, x) -> np.ndarray:
        """Minkowski gauge of x: <= 1 exactly on the body.

        Accepts an array of shape (..., m); returns shape (...).
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.m:
            raise ValueError(f"expected vectors of length {self.m}")
        t = np.abs(x) / np.asarray(self.sigma)
        if math.isinf(self.mu):
            return t.max(axis=-1)
        return (t ** self.mu).sum(axis=-1) ** (1.0 / self.mu)

    def contains(self, x) -> np.ndarray:
        """Closed membership with a relative floating-point guard band."""
        return self.gauge(x) <= 1.0 + MEMBERSHIP_GUARD

    def dual_norm(self, y) -> float:
        """Support-function norm sup_{x in V} |x . y|.

        For exponent mu this is the weighted l^lambda norm of y with
        1/mu + 1/lambda = 1; boxes give sum_j sigma_j |y_j|, balls give
        M |y|.
        """
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise ValueError(f"expected a vector of length {self.m}")
        w = np.abs(np.asarray(self.sigma) * y)
        if math.isinf(self.mu):
            return float(w.sum())
        if self.mu == 1.0:
            return float(w.max())
        lam = self.mu / (self.mu - 1.0)
        return float((w ** lam).sum() ** (1.0 / lam))

    # ----- exact scalar geometry ----------------------------------------

    def volume(self) -> float:
        """m-dimensional volume, by closed formula."""
        if math.isinf(self.mu):
            return float(np.prod([2.0 * s for s in self.sigma]))
        # unit l^mu ball volume times the product of semi-axes
        g1 = math.gamma(1.0 / self.mu + 1.0)
        gm = math.gamma(self.m / self.mu + 1.0)
        return float(np.prod(self.sigma) * (2.0 * g1) ** self.m / gm)

    def diameter(self) -> float:
        """sup_{x,y in V} |x - y| = 2 max_{x in V} |x|, by closed formula.

        For mu <= 2 the Euclidean maximum sits on a coordinate axis; for
        mu > 2 it sits at the balanced corner given by the Lagrange
        condition; mu = inf degenerates to the box corner.
        """
        s = np.asarray(self.sigma)
        if math.isinf(self.mu):
            return 2.0 * float(np.sqrt((s ** 2).sum()))
        if self.mu <= 2.0:
            return 2.0 * float(s.max())
        e = 2.0 * self.mu / (self.mu - 2.0)
        return 2.0 * float((s ** e).sum() ** (1.0 / e))

    def ell1_over_dual(self) -> float:
        """sup_y (sum_j |y_j|) / dual_norm(y), by closed formula.

        This is the norm of the identity from the dual norm into l^1; it
        controls how much a sinc-squared window enlarges a spectrum.
        """
        s = np.asarray(self.sigma)
        if math.isinf(self.mu):
            return 1.0 / float(s.min())
        return float(((1.0 / s) ** self.mu).sum() ** (1.0 / self.mu))

    # ----- lattice enumeration ------------------------------------------

    def lattice_points(self, a: float, cap: int = LATTICE_CAP) -> LatticeSet:
        """All k in Z^m with k/a in V, sorted lexicographically.

        Boundary points are included (the body is closed).  Membership is
        decided exactly with rational arithmetic when the exponent is an
        integer or infinity; otherwise points within 1e-9 of the boundary
        fall back to the guarded floating-point test.
        """
        if a <= 0:
            raise ValueError("scale a must be positive")
        radii = [int(math.floor(a * s * (1.0 + 1e-9))) for s in self.sigma]
        box = 1
        for r in radii:
            box *= 2 * r + 1
        if box > cap:
            raise OverflowError(
                f"bounding box of {self.label} at a={a} holds {box} points "
                f"(cap {cap})")

        ranges = [np.arange(-r, r + 1) for r in radii]
        if math.isinf(self.mu):
            # the bounding box IS the body; radii must be exact floors
            radii = [_exact_floor_prod(a, s) for s in self.sigma]
            ranges = [np.arange(-r, r + 1) for r in radii]
            pts = [tuple(int(c) for c in p) for p in product(*ranges)]
            return LatticeSet(self.m, tuple(sorted(pts)))

        grids = np.meshgrid(*ranges, indexing="ij")
        k = np.stack([g.ravel() for g in grids], axis=-1)
        val = (np.abs(k / (a * np.asarray(self.sigma))) ** self.mu).sum(axis=-1)
        inside = val < 1.0 - 1e-9
        boundary = np.abs(val - 1.0) <= 1e-9
        accepted = [tuple(int(c) for c in p) for p in k[inside]]
        for p in k[boundary]:
            if self._exact_member(tuple(int(c) for c in p), a):
                accepted.append(tuple(int(c) for c in p))
        return LatticeSet(self.m, tuple(sorted(accepted)))

    def _exact_member(self, k: tuple[int, ...], a: float) -> bool:
        mu_round = round(self.mu)
        if abs(self.mu - mu_round) < 1e-12 and mu_round <= 64:
            lhs = Fraction(0)
            for kj, sj in zip(k, self.sigma):
                lhs += Fraction(abs(kj)) ** mu_round / Fraction(sj) ** mu_round
            return lhs <= Fraction(a) ** mu_round
        val = (np.abs(np.asarray(k, dtype=float) /
                      (a * np.asarray(self.sigma))) ** self.mu).sum()
        return bool(val <= 1.0 + MEMBERSHIP_GUARD)


def _exact_floor_prod(a: float, s: float) -> int:
    """floor(a*s) computed exactly for float inputs (both are rationals)."""
    f = Fraction(a) * Fraction(s)
    return f.numerator // f.denominator


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if float(x) == int(x):
        return str(int(x))
    return repr(float(x))


def parse_body(spec: str, m: int | None = None) -> ConvexBody:
    """Parse a body specification string.

    Grammar: ``pi:1,2`` (parallelepiped), ``cube:1``, ``ball:1``,
    ``lp:1,2:3`` (semi-axes 1,2 with exponent 3).  ``cube`` and ``ball``
    need the ambient dimension ``m``; the others infer it from the axis
    list.
    """
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "pi":
            if len(parts) != 2:
                raise BodySpecError(f"expected pi:<s1,..,sm> in {spec!r}")
            return ConvexBody.parallelepiped(_floats(parts[1], spec))
        if kind in ("cube", "ball"):
            if len(parts) != 2:
                raise BodySpecError(f"expected {kind}:<M> in {spec!r}")
            if m is None:
                raise BodySpecError(
                    f"{kind} spec {spec!r} needs an explicit dimension m")
            M = float(parts[1])
            return (ConvexBody.cube if kind == "cube" else ConvexBody.ball)(M, m)
        if kind == "lp":
            if len(parts) != 3:
                raise BodySpecError(f"expected lp:<s1,..,sm>:<mu> in {spec!r}")
            mu = math.inf if parts[2].lower() == "inf" else float(parts[2])
            return ConvexBody.lp_ellipsoid(_floats(parts[1], spec), mu)
    except ValueError as exc:
        if isinstance(exc, BodySpecError):
            raise
        raise BodySpecError(f"bad number in body spec {spec!r}: {exc}") from exc
    raise BodySpecError(
        f"unknown body kind {kind!r} at position 0 in {spec!r} "
        "(expected pi, cube, ball, or lp)")


def _floats(csv: str, spec: str) -> list[float]:
    out = []
    for i, tok in enumerate(csv.split(",")):
        try:
            out.append(float(tok))
        except ValueError:
            raise BodySpecError(
                f"bad number {tok!r} (field {i}) in body spec {spec!r}") from None
    return out
