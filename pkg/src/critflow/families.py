"""Exponent families for the mild-solution iteration space.

Every family fixes a time exponent ``r``, a spatial regularity ``s`` and a
spatial integrability ``p``; the iteration space is
``L^r([0, T]; H^s_p)``.  The named families also carry the datum space
``H^{d/q - 1}_q``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .norms import NormSpec

TOL = 1e-12

NAMES = ("Generic", "Th1", "Th5", "Th7")


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class IndexFamily:
    name: str
    d: int
    p: float
    r: float
    s: float
    q: float | None = None

    @classmethod
    def generic(cls, d: int, s: float, p: float, r: float) -> "IndexFamily":
        return cls("Generic", d, float(p), float(r), float(s)).check()

    @classmethod
    def th1(cls, d: int, q: float) -> "IndexFamily":
        if not 3 <= d <= 4:
            raise FamilyError("Th1 requires 3 ≤ d ≤ 4")
        if not 2 <= q <= d:
            raise FamilyError("Th1 requires 2 ≤ q ≤ d")
        return cls("Th1", d, 2 * d * q / (2 * d - q), 4.0, d / q - 1, float(q)).check()

    @classmethod
    def th5(cls, d: int, q: float, p: float) -> "IndexFamily":
        if d < 3:
            raise FamilyError("Th5 requires d ≥ 3")
        if not 2 < q <= d:
            raise FamilyError("Th5 requires 2 < q ≤ d")
        upper = d + 2 if q == d else min((d - 2) * q / (d - q), d + 2)
        if not q < p < upper:
            raise FamilyError("Th5 requires q < p < min{(d-2)q/(d-q), d+2}")
        return cls("Th5", d, float(p), float(p), (2 + d - p) / p, float(q)).check()

    @classmethod
    def th7(cls, d: int, q: float) -> "IndexFamily":
        if d < 3:
            raise FamilyError("Th7 requires d ≥ 3")
        if not 1 < q <= 2:
            raise FamilyError("Th7 requires 1 < q ≤ 2")
        return cls("Th7", d, d * q / (d + 1 - q), 2 * q, (d + 2 - 2 * q) / q, float(q)).check()

    @classmethod
    def build(cls, name: str, d: int, q: float | None = None, p: float | None = None,
              r: float | None = None, s: float | None = None) -> "IndexFamily":
        if name == "Th1":
            return cls.th1(d, _need(q, "q", name))
        if name == "Th5":
            return cls.th5(d, _need(q, "q", name), _need(p, "p", name))
        if name == "Th7":
            return cls.th7(d, _need(q, "q", name))
        if name == "Generic":
            return cls.generic(d, _need(s, "s", name), _need(p, "p", name), _need(r, "r", name))
        raise FamilyError(f"unknown family {name!r} (expected one of {', '.join(NAMES)})")

    def check(self) -> "IndexFamily":
        """Hypotheses of the bilinear estimate; raises naming the first failed inequality."""
        d, s, p, r = self.d, self.s, self.p, self.r
        checks = [
            (d >= 3, "d ≥ 3"),
            (s >= -TOL, "s ≥ 0"),
            (p > 1, "p > 1"),
            (r > 2, "r > 2"),
            (s / d < 1 / p, "s/d < 1/p"),
            (1 / p < 0.5 + s / (2 * d), "1/p < 1/2 + s/(2d)"),
            (self.scaling_defect <= TOL, "2/r + d/p - s ≤ 1"),
        ]
        for ok, text in checks:
            if not ok:
                raise FamilyError(f"{self.name} family violates {text} (d={d}, s={s:g}, p={p:g}, r={r:g})")
        return self

    @property
    def scaling_defect(self) -> float:
        """``2/r + d/p - s - 1``; zero for critical families."""
        return 2 / self.r + self.d / self.p - self.s - 1

    @property
    def critical(self) -> bool:
        return abs(self.scaling_defect) <= 1e-10

    @property
    def time_exponent(self) -> float:
        """Power of ``T`` in the bilinear and smallness estimates."""
        e = 0.5 * (1 + self.s - 2 / self.r - self.d / self.p)
        return 0.0 if abs(e) <= 1e-12 else e

    def spatial_spec(self, homogeneous: bool = True, levels: int = 1) -> NormSpec:
        return NormSpec("sobolev_hom" if homogeneous else "sobolev_inhom", s=self.s, q=self.p, levels=levels)

    def datum_spec(self) -> NormSpec | None:
        """Critical Sobolev space of the initial datum."""
        if self.q is None:
            return None
        return NormSpec("sobolev_hom", s=self.d / self.q - 1, q=self.q)

    def caloric_besov(self) -> tuple[float, float, float]:
        """``(s, p, q)`` of the Besov space equivalent to the caloric norm: ``B^{s - 2/r, r}_p``."""
        return self.s - 2 / self.r, self.r, self.p

    def w_besov(self) -> tuple[float, float, float] | None:
        """``(s, p, q)`` of the Besov space holding ``w = u - e^{t Lap} u0`` uniformly in time."""
        d, q, p = self.d, self.q, self.p
        if self.name == "Th1":
            return d / q - 1, 2.0, q
        if self.name == "Th5":
            return (d + p - 2) / p - 1, p / 2, d * p / (d + p - 2)
        if self.name == "Th7":
            return d / q - 1, q, q
        return None

    def as_dict(self) -> dict:
        return {"name": self.name, "d": self.d, "q": self.q, "p": self.p, "r": self.r, "s": self.s}


def _need(value, key, name):
    if value is None:
        raise FamilyError(f"{name} family needs {key}")
    return float(value)
