"""Quadratic matter sources built from wave-map data (gamma, omega)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field_core import (
    PolarGrid,
    ScalarField,
    integrate,
    read_field_csv,
    sobolev_norm,
)


class SourceError(ValueError):
    pass


_MATTER_KEYS = ("gamma", "omega", "gamma_dot", "omega_dot")
_SOURCE_KEYS = ("p1", "p2", "q_dot", "q_grad")


@dataclass(frozen=True, eq=False)
class MatterData:
    """Components of u = (gamma, omega) and their time derivatives."""

    gamma: ScalarField
    omega: ScalarField
    gamma_dot: ScalarField
    omega_dot: ScalarField

    def __post_init__(self):
        g0 = self.gamma.grid
        for f in (self.omega, self.gamma_dot, self.omega_dot):
            if f.grid != g0:
                raise SourceError("matter fields live on different grids")
        with np.errstate(over="ignore"):
            w = np.exp(-4 * self.gamma.values)
        if not np.isfinite(w).all():
            raise SourceError("exp(-4 gamma) overflows; gamma is too negative")

    @property
    def grid(self) -> PolarGrid:
        return self.gamma.grid

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "MatterData":
        z = ScalarField.zeros(grid)
        return cls(z, z, z, z)


@dataclass(frozen=True, eq=False)
class SourceFields:
    """p_j = u_dot . d_j u, q_dot = |u_dot|^2, q_grad = |grad u|^2."""

    p1: ScalarField
    p2: ScalarField
    q_dot: ScalarField
    q_grad: ScalarField

    @property
    def grid(self) -> PolarGrid:
        return self.p1.grid

    @property
    def p_theta(self) -> ScalarField:
        g = self.grid
        return ScalarField(g, g.x1 * self.p2.values - g.x2 * self.p1.values)

    @property
    def p_r(self) -> ScalarField:
        g = self.grid
        return ScalarField(g, g.x1 * self.p1.values + g.x2 * self.p2.values)

    @property
    def q(self) -> ScalarField:
        return self.q_dot + self.q_grad

    def is_zero(self) -> bool:
        return not any(f.values.any() for f in (self.p1, self.p2, self.q_dot, self.q_grad))

    def validate(self, rel_tol: float = 1e-12) -> None:
        """Positivity of q and the Cauchy-Schwarz bound p_j^2 <= q_dot q_grad."""
        scale = max(self.q_dot.max_abs(), self.q_grad.max_abs(), 1e-300)
        for name in ("q_dot", "q_grad"):
            v = getattr(self, name).values
            if v.min() < -rel_tol * scale:
                raise SourceError(f"{name} is negative (min {v.min():.3e})")
        bound = self.q_dot.values * self.q_grad.values
        for name in ("p1", "p2"):
            p2 = getattr(self, name).values ** 2
            if (p2 - bound).max() > rel_tol * scale**2 + 1e-14 * bound.max():
                raise SourceError(f"{name}^2 exceeds q_dot * q_grad somewhere")

    def scaled(self, t: float) -> "SourceFields":
        return SourceFields(self.p1 * t, self.p2 * t, self.q_dot * t, self.q_grad * t)

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "SourceFields":
        z = ScalarField.zeros(grid)
        return cls(z, z, z, z)


def build_sources(m: MatterData) -> SourceFields:
    """Sources from the scalar product 2 da gamma db gamma + (1/2) e^{-4 gamma} da omega db omega."""
    g = m.grid
    w = 0.5 * np.exp(-4 * m.gamma.values)
    gg = m.gamma.jet().grad()
    go = m.omega.jet().grad()
    gd, od = m.gamma_dot.values, m.omega_dot.values
    p = [2 * gd * gg[j] + w * od * go[j] for j in range(2)]
    q_dot = 2 * gd**2 + w * od**2
    q_grad = sum(2 * gg[j] ** 2 + w * go[j] ** 2 for j in range(2))
    return SourceFields(ScalarField(g, p[0]), ScalarField(g, p[1]),
                        ScalarField(g, q_dot), ScalarField(g, q_grad))


def epsilon(s: SourceFields) -> float:
    """Total energy int (|u_dot|^2 + |grad u|^2)."""
    return integrate(s.q, "1")


def source_norms(s: SourceFields, delta: float) -> dict:
    """H^0_{delta+3} norms of the sources, the smallness quantities of the theory."""
    return {name: sobolev_norm(getattr(s, name), 0, delta + 3) for name in _SOURCE_KEYS}


# ---------------------------------------------------------------------------
# built-in families

def gaussian(grid: PolarGrid, amplitude: float, center=(0.0, 0.0), width: float = 1.0) -> ScalarField:
    """amplitude * exp(-|x - center|^2 / width^2)."""
    x0, y0 = center
    d2 = (grid.x1 - x0) ** 2 + (grid.x2 - y0) ** 2
    return ScalarField(grid, amplitude * np.exp(-d2 / width**2))


def gaussian_matter(grid: PolarGrid, amplitude: float, terms) -> MatterData:
    """Sum of offset Gaussians placed in the named matter components.

    ``terms`` is a sequence of dicts with keys ``which``, ``center`` and
    optionally ``width`` and ``weight`` (a multiplier on ``amplitude``).
    """
    acc = {k: np.zeros(grid.shape) for k in _MATTER_KEYS}
    for t in terms:
        which = t.get("which")
        if which not in acc:
            raise SourceError(f"gaussian term 'which' must be one of {_MATTER_KEYS}, got {which!r}")
        c = t.get("center", (0.0, 0.0))
        if len(c) != 2:
            raise SourceError(f"gaussian center must have two entries, got {c!r}")
        amp = amplitude * float(t.get("weight", 1.0))
        acc[which] += gaussian(grid, amp, (float(c[0]), float(c[1])), float(t.get("width", 1.0))).values
    return MatterData(*(ScalarField(grid, acc[k]) for k in _MATTER_KEYS))


def sources_from_config(grid: PolarGrid, cfg: dict | None, base: Path | None = None) -> SourceFields:
    """Build sources from a run-config entry (None or {} gives zero sources)."""
    if not cfg:
        return SourceFields.zeros(grid)
    fam = cfg.get("family")
    if fam == "gaussian":
        amp = float(cfg.get("amplitude", 0.0))
        terms = cfg.get("terms")
        if terms is None:
            terms = [{k: cfg[k] for k in ("which", "center", "width") if k in cfg}]
        return build_sources(gaussian_matter(grid, amp, terms))
    if fam == "file":
        paths = cfg.get("paths") or {}
        base = base or Path(".")

        def load(key):
            f = read_field_csv(base / paths[key], order=grid.order)
            if f.grid != grid:
                raise SourceError(f"field {key!r} is on grid {f.grid.meta()}, run grid is {grid.meta()}")
            return f

        if set(paths) == set(_MATTER_KEYS):
            return build_sources(MatterData(*(load(k) for k in _MATTER_KEYS)))
        if set(paths) == set(_SOURCE_KEYS):
            s = SourceFields(*(load(k) for k in _SOURCE_KEYS))
            s.validate(1e-10)
            return s
        raise SourceError(f"file paths must name exactly {_MATTER_KEYS} or {_SOURCE_KEYS}")
    raise SourceError(f"unknown source family {fam!r}")

