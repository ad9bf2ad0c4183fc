"""Scalar profiles of the arc-length variable used for twist rates and trial functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


def _bump(x):
    """exp(1 - 1/(1 - x^2)) on |x| < 1, zero elsewhere; peak value 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class Profile:
    """Base class: subclasses implement ``_eval``; ``support`` is None if unbounded."""

    def __call__(self, s):
        return self._eval(np.asarray(s, dtype=float))

    @property
    def support(self) -> Optional[Tuple[float, float]]:
        return None

    def sup_norm(self, lo: float, hi: float, n: int = 20001) -> float:
        s = np.linspace(lo, hi, n)
        return float(np.max(np.abs(self(s))))

    def scaled(self, factor: float) -> "Profile":
        return Scaled(self, float(factor))

    def to_dict(self) -> dict:
        d = {"kind": type(self).__name__.lower()}
        d.update({k: getattr(self, k) for k in self.__dataclass_fields__})
        return d


@dataclass(frozen=True)
class Constant(Profile):
    value: float = 1.0

    def _eval(self, s):
        return np.full_like(s, self.value)


@dataclass(frozen=True)
class Bump(Profile):
    """Smooth compactly supported bump with peak ``amplitude`` at ``center``."""

    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0

    def _eval(self, s):
        return self.amplitude * _bump((s - self.center) / self.width)

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)


@dataclass(frozen=True)
class Plateau(Profile):
    """``amplitude`` on [left, right], linear ramps to zero over ``taper``."""

    amplitude: float = 1.0
    left: float = -1.0
    right: float = 1.0
    taper: float = 1.0

    def _eval(self, s):
        ramp = np.clip(np.minimum(s - (self.left - self.taper), (self.right + self.taper) - s)
                       / self.taper, 0.0, 1.0)
        return self.amplitude * ramp

    @property
    def support(self):
        return (self.left - self.taper, self.right + self.taper)


@dataclass(frozen=True)
class Hat(Profile):
    """Piecewise-linear hat of height 1 on (center - half_width, center + half_width)."""

    center: float = 0.0
    half_width: float = 1.0
    amplitude: float = 1.0

    def _eval(self, s):
        return self.amplitude * np.clip(1.0 - np.abs(s - self.center) / self.half_width, 0.0, None)

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)


@dataclass(frozen=True)
class Decaying(Profile):
    """amplitude / (1 + (s - center)^2)."""

    amplitude: float = 1.0
    center: float = 0.0

    def _eval(self, s):
        return self.amplitude / (1.0 + (s - self.center) ** 2)


@dataclass(frozen=True)
class Sampled(Profile):
    """Piecewise-linear interpolation of samples, zero outside the sample range."""

    s: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if len(self.s) != len(self.values) or len(self.s) < 2:
            raise ValueError("sampled profile needs matching s and values of length >= 2")
        if np.any(np.diff(self.s) <= 0):
            raise ValueError("sample locations must be strictly increasing")

    def _eval(self, s):
        return np.interp(s, self.s, self.values, left=0.0, right=0.0)

    @property
    def support(self):
        v = np.asarray(self.values)
        nz = np.flatnonzero(v != 0)
        if len(nz) == 0:
            return (self.s[0], self.s[0])
        i0, i1 = max(nz[0] - 1, 0), min(nz[-1] + 1, len(v) - 1)
        return (self.s[i0], self.s[i1])


@dataclass(frozen=True)
class Scaled(Profile):
    base: Profile = None
    factor: float = 1.0

    def _eval(self, s):
        return self.factor * self.base(s)

    @property
    def support(self):
        return self.base.support

    def to_dict(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_dict()}


_KINDS = {"constant": Constant, "bump": Bump, "plateau": Plateau, "hat": Hat,
          "decaying": Decaying, "sampled": Sampled}


def from_dict(d: dict) -> Profile:
    d = dict(d)
    kind = d.pop("kind")
    if kind == "scaled":
        return Scaled(from_dict(d["base"]), float(d["factor"]))
    if kind == "sampled":
        return Sampled(tuple(d["s"]), tuple(d["values"]))
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown profile kind {kind!r}") from None
    return cls(**{k: float(v) for k, v in d.items()})
