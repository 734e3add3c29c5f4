"""Periodic coefficient fields, problem data and effective scalar averages.

Coefficient fields come from a closed registry of families.  Every family is
a function of the fractional part of its arguments (or a trigonometric
polynomial with integer frequencies), so unit periodicity in every variable
holds by construction.

Variable conventions: ``rho`` is a function of the micro variable ``z``,
``beta`` of ``(y, tau)`` and ``A`` of ``(y, z)``, with ``y`` the meso
variable.  All of them are evaluated on arrays whose last axis holds the
coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, ModelError

__all__ = [
    "ScalarField", "ConstantField", "LaminateField", "TrigField",
    "CheckerboardField", "MatrixField", "make_field", "make_matrix_field",
    "HoleSpec", "make_hole", "CoefficientModel", "BoxExpression",
    "make_expression", "ProblemData", "EffectiveScalars", "Violation",
    "ValidationReport", "validate_model", "compute_effective_scalars",
]


# ---------------------------------------------------------------------------
# scalar periodic fields


class ScalarField:
    """Unit-periodic scalar function of ``nvars`` variables."""

    nvars: int

    def __call__(self, pts):
        raise NotImplementedError

    def depends_on(self) -> frozenset:
        """Axes the field actually varies along."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantField(ScalarField):
    value: float
    nvars: int

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], float(self.value))

    def depends_on(self):
        return frozenset()


@dataclass(frozen=True)
class LaminateField(ScalarField):
    """Two-phase layering along one axis: ``values[0]`` on ``[0, fraction)``."""

    axis: int
    values: tuple
    nvars: int
    fraction: float = 0.5

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        s = np.mod(pts[..., self.axis], 1.0)
        return np.where(s < self.fraction, self.values[0], self.values[1]).astype(float)

    def depends_on(self):
        return frozenset({self.axis})


@dataclass(frozen=True)
class TrigField(ScalarField):
    """``constant + sum coef * trig(2 pi freq . x) ** power``.

    ``terms`` is a tuple of ``(coef, kind, freq, power)`` with ``kind`` in
    ``{"cos", "sin"}`` and ``freq`` an integer vector of length ``nvars``.
    """

    constant: float
    terms: tuple
    nvars: int

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.full(pts.shape[:-1], float(self.constant))
        for coef, kind, freq, power in self.terms:
            phase = 2.0 * np.pi * (pts @ np.asarray(freq, dtype=float))
            base = np.cos(phase) if kind == "cos" else np.sin(phase)
            out = out + coef * base ** power
        return out

    def depends_on(self):
        axes = set()
        for coef, _, freq, _ in self.terms:
            if coef != 0.0:
                axes.update(i for i, k in enumerate(freq) if k != 0)
        return frozenset(axes)


@dataclass(frozen=True)
class CheckerboardField(ScalarField):
    """``values[0]`` on even cells of a ``cells``-per-period checkerboard."""

    values: tuple
    nvars: int
    axes: tuple = (0, 1)
    cells: int = 2

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        parity = np.zeros(pts.shape[:-1], dtype=int)
        for a in self.axes:
            parity += np.floor(np.mod(pts[..., a], 1.0) * self.cells).astype(int)
        return np.where(parity % 2 == 0, self.values[0], self.values[1]).astype(float)

    def depends_on(self):
        return frozenset(self.axes)


def _check_axis(axis, nvars):
    if not 0 <= axis < nvars:
        raise ConfigError(f"axis {axis} out of range for a field of {nvars} variables")
    return axis


def make_field(spec, nvars: int) -> ScalarField:
    """Build a scalar field from a ``{"family", "params"}`` block.

    A bare number is accepted as shorthand for the constant family.
    """
    if isinstance(spec, (int, float)):
        return ConstantField(float(spec), nvars)
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"field spec must be an object with a 'family' key, got {spec!r}")
    family = spec["family"]
    p = spec.get("params", {})
    try:
        if family == "constant":
            return ConstantField(float(p["value"]), nvars)
        if family == "laminate":
            values = tuple(float(v) for v in p["values"])
            if len(values) != 2:
                raise ConfigError("laminate needs exactly two values")
            fraction = float(p.get("fraction", 0.5))
            if not 0.0 < fraction < 1.0:
                raise ConfigError("laminate fraction must lie in (0, 1)")
            return LaminateField(_check_axis(int(p.get("axis", 0)), nvars), values, nvars, fraction)
        if family == "trig":
            terms = []
            for t in p.get("terms", []):
                kind = t.get("kind", "cos")
                if kind not in ("cos", "sin"):
                    raise ConfigError(f"unknown trig kind {kind!r}")
                freq = tuple(int(k) for k in t["freq"])
                if len(freq) != nvars:
                    raise ConfigError(f"trig frequency {freq} must have {nvars} entries")
                power = int(t.get("power", 1))
                if power < 1:
                    raise ConfigError("trig power must be >= 1")
                terms.append((float(t.get("coef", 1.0)), kind, freq, power))
            return TrigField(float(p.get("constant", 0.0)), tuple(terms), nvars)
        if family == "checkerboard":
            values = tuple(float(v) for v in p["values"])
            axes = tuple(_check_axis(int(a), nvars) for a in p.get("axes", (0, 1)))
            return CheckerboardField(values, nvars, axes, int(p.get("cells", 2)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for field family {family!r}: {exc}") from exc
    raise ConfigError(f"unknown field family {family!r}")


# ---------------------------------------------------------------------------
# matrix field A(y, z) = sum_t a_t(y) b_t(z) M_t


@dataclass(frozen=True)
class MatrixField:
    """Sum of separable terms ``a_t(y) b_t(z) M_t`` with constant matrices ``M_t``.

    A(y, z) depends on ``y`` only through the weight vector
    ``(a_t(y))_t``; the micro cell problem exploits this for caching.
    """

    terms: tuple  # of (ScalarField over y, ScalarField over z, ndarray)
    dim: int

    @property
    def separable(self) -> bool:
        return len(self.terms) == 1

    def y_weights(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([a(y) for a, _, _ in self.terms], axis=-1)

    def at_weights(self, weights, z):
        """Evaluate ``sum_t weights[t] b_t(z) M_t`` for a fixed weight vector."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1] + (self.dim, self.dim))
        for w, (_, b, m) in zip(weights, self.terms):
            if w != 0.0:
                out += (w * b(z))[..., None, None] * m
        return out

    def __call__(self, y, z):
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = np.broadcast_shapes(y.shape[:-1], z.shape[:-1])
        out = np.zeros(shape + (self.dim, self.dim))
        for a, b, m in self.terms:
            out += (a(y) * b(z))[..., None, None] * m
        return out


def _as_matrix(m, dim):
    m = np.asarray(m, dtype=float)
    if m.shape != (dim, dim):
        raise ConfigError(f"matrix must be {dim}x{dim}, got shape {m.shape}")
    return m


def make_matrix_field(spec, dim: int) -> MatrixField:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"A spec must be an object with a 'family' key, got {spec!r}")
    family = spec["family"]
    p = spec.get("params", {})
    one = ConstantField(1.0, dim)
    try:
        if family == "constant":
            return MatrixField(((one, one, _as_matrix(p["matrix"], dim)),), dim)
        if family == "isotropic":
            a = make_field(p.get("y", 1.0), dim)
            b = make_field(p.get("z", 1.0), dim)
            return MatrixField(((a, b, np.eye(dim)),), dim)
        if family == "terms":
            terms = tuple(
                (make_field(t.get("y", 1.0), dim), make_field(t.get("z", 1.0), dim),
                 _as_matrix(t.get("matrix", np.eye(dim)), dim))
                for t in p["terms"]
            )
            if not terms:
                raise ConfigError("A family 'terms' needs at least one term")
            return MatrixField(terms, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for A family {family!r}: {exc}") from exc
    raise ConfigError(f"unknown A family {family!r}")


# ---------------------------------------------------------------------------
# holes


@dataclass(frozen=True)
class HoleSpec:
    """Reference hole in the unit cell: ``none``, ``disk`` or ``square``."""

    shape: str = "none"
    center: tuple = (0.5, 0.5)
    size: float = 0.0  # radius for disks, half-width for squares

    @property
    def dim(self):
        return len(self.center)

    @property
    def empty(self):
        return self.shape == "none"

    def contains(self, z):
        """Strict interior test; boundary points count as material."""
        z = np.asarray(z, dtype=float)
        if self.empty:
            return np.zeros(z.shape[:-1], dtype=bool)
        d = z - np.asarray(self.center)
        if self.shape == "disk":
            return np.einsum("...i,...i->...", d, d) < self.size ** 2
        return np.all(np.abs(d) < self.size, axis=-1)

    def project(self, z):
        """Nearest point on the hole boundary."""
        z = np.asarray(z, dtype=float)
        c = np.asarray(self.center)
        d = z - c
        if self.shape == "disk":
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            r = np.where(r == 0.0, 1.0, r)
            return c + self.size * d / r
        if self.shape == "square":
            s = self.size
            outside = np.any(np.abs(d) > s, axis=-1, keepdims=True)
            clipped = np.clip(d, -s, s)
            # inside: push the coordinate closest to a face onto that face
            gap = s - np.abs(d)
            k = np.argmin(gap, axis=-1)
            pushed = d.copy()
            idx = np.indices(k.shape)
            sel = tuple(idx) + (k,)
            pushed[sel] = np.where(d[sel] >= 0.0, s, -s)
            return c + np.where(outside, clipped, pushed)
        raise ValueError("empty hole has no boundary")

    def gap(self) -> float:
        """Distance from the hole to the boundary of the unit cell."""
        if self.empty:
            return 0.5
        c = np.asarray(self.center)
        return float(min(np.min(c), np.min(1.0 - c)) - self.size)

    def bbox(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.size, c + self.size

    def measure(self) -> float:
        if self.empty:
            return 0.0
        if self.shape == "disk":
            n = self.dim
            from math import gamma, pi
            return pi ** (n / 2) / gamma(n / 2 + 1) * self.size ** n
        return (2.0 * self.size) ** self.dim


def make_hole(spec, dim: int = 2) -> HoleSpec:
    if spec is None:
        return HoleSpec("none", (0.5,) * dim, 0.0)
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"hole spec must be an object with a 'family' key, got {spec!r}")
    family = spec["family"]
    p = spec.get("params", {})
    if family == "none":
        return HoleSpec("none", (0.5,) * dim, 0.0)
    aliases = {"disk": "disk", "square": "square", "axis-aligned-square": "square"}
    if family not in aliases:
        raise ConfigError(f"unknown hole family {family!r}")
    center = tuple(float(c) for c in p.get("center", (0.5,) * dim))
    if len(center) != dim:
        raise ConfigError(f"hole center must have {dim} coordinates")
    key = "radius" if aliases[family] == "disk" else "halfwidth"
    try:
        size = float(p[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"hole family {family!r} needs a numeric {key!r}") from exc
    if size <= 0.0:
        raise ConfigError(f"hole {key} must be positive")
    return HoleSpec(aliases[family], center, size)


# ---------------------------------------------------------------------------
# coefficient model


@dataclass(frozen=True)
class CoefficientModel:
    rho: ScalarField
    beta: ScalarField
    a_matrix: MatrixField
    lambda_bound: float
    alpha: float

    @property
    def dim(self):
        return self.a_matrix.dim

    def beta_time_dependent(self) -> bool:
        return self.dim in self.beta.depends_on()

    @classmethod
    def from_config(cls, block: dict, dim: int = 2) -> "CoefficientModel":
        try:
            rho = make_field(block.get("rho", 1.0), dim)
            beta = make_field(block.get("beta", 1.0), dim + 1)
            a = make_matrix_field(block.get("A", {"family": "constant",
                                                  "params": {"matrix": np.eye(dim).tolist()}}), dim)
            lam = float(block.get("lambda_bound", 10.0))
            alpha = float(block.get("alpha", 0.1))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model block: {exc}") from exc
        if lam <= 0.0 or alpha <= 0.0:
            raise ConfigError("lambda_bound and alpha must be positive")
        return cls(rho, beta, a, lam, alpha)


# ---------------------------------------------------------------------------
# problem data on a box


@dataclass(frozen=True)
class BoxExpression:
    """Sum of terms ``amp * g(t) * prod_i trig(m_i pi s_i)`` on a box.

    ``s_i`` is the coordinate rescaled to ``[0, 1]`` on the box.  Each term is
    ``(amplitude, modes, kind, time, omega)`` where ``kind`` is ``"sin"``,
    ``"cos"`` or ``"one"`` and ``time`` is ``"const"``, ``"cos"`` or ``"sin"``.
    """

    terms: tuple
    lower: tuple
    upper: tuple

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        s = (x - lo) / (np.asarray(self.upper) - lo)
        out = np.zeros(x.shape[:-1])
        for amp, modes, kind, time, omega in self.terms:
            v = np.full(x.shape[:-1], amp)
            if kind != "one":
                fn = np.sin if kind == "sin" else np.cos
                for i, m in enumerate(modes):
                    if kind == "sin" or m != 0:
                        v = v * fn(m * np.pi * s[..., i])
            if time == "cos":
                v = v * np.cos(omega * t)
            elif time == "sin":
                v = v * np.sin(omega * t)
            out = out + v
        return out

    def time_dependent(self) -> bool:
        return any(t[3] != "const" and t[0] != 0.0 for t in self.terms)


def make_expression(spec, domain) -> BoxExpression:
    lower = tuple(float(a) for a, _ in domain)
    upper = tuple(float(b) for _, b in domain)
    dim = len(lower)
    if isinstance(spec, (int, float)):
        return BoxExpression(((float(spec), (0,) * dim, "one", "const", 1.0),), lower, upper)
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"expression must be an object with a 'family' key, got {spec!r}")
    family = spec["family"]
    p = spec.get("params", {})

    def term(q, kind):
        time = q.get("time", "const")
        if time not in ("const", "cos", "sin"):
            raise ConfigError(f"unknown time factor {time!r}")
        modes = tuple(int(m) for m in q.get("modes", (1,) * dim))
        if len(modes) != dim:
            raise ConfigError(f"modes must have {dim} entries")
        return (float(q.get("amplitude", 1.0)), modes, kind, time, float(q.get("omega", 1.0)))

    try:
        if family == "constant":
            return BoxExpression(((float(p.get("value", 0.0)), (0,) * dim, "one",
                                   p.get("time", "const"), float(p.get("omega", 1.0))),), lower, upper)
        if family in ("sine_product", "cosine_product"):
            return BoxExpression((term(p, family[:3]),), lower, upper)
        if family == "sum":
            terms = []
            for sub in p["terms"]:
                terms.extend(make_expression(sub, domain).terms)
            return BoxExpression(tuple(terms), lower, upper)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for expression family {family!r}: {exc}") from exc
    raise ConfigError(f"unknown expression family {family!r}")


@dataclass(frozen=True)
class ProblemData:
    domain: np.ndarray  # shape (N, 2), rows [lower, upper]
    final_time: float
    source: BoxExpression
    initial_displacement: BoxExpression
    initial_velocity: BoxExpression

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=float)
        if dom.ndim != 2 or dom.shape[1] != 2 or np.any(dom[:, 1] <= dom[:, 0]):
            raise ConfigError(f"degenerate domain {self.domain!r}")
        if not self.final_time > 0.0:
            raise ConfigError("final time T must be positive")
        pts = _box_boundary_samples(dom, 33)
        vals = self.initial_displacement(pts)
        if np.max(np.abs(vals)) > 1e-10:
            k = int(np.argmax(np.abs(vals)))
            raise ConfigError(f"initial displacement does not vanish on the boundary "
                              f"(u0{tuple(pts[k])} = {vals[k]:.3e})")

    @property
    def dim(self):
        return len(self.domain)

    @classmethod
    def from_config(cls, block: dict) -> "ProblemData":
        try:
            domain = np.asarray(block.get("domain", [[0.0, 1.0], [0.0, 1.0]]), dtype=float)
            dom = [tuple(r) for r in domain]
            return cls(
                domain,
                float(block.get("T", 1.0)),
                make_expression(block.get("f", 0.0), dom),
                make_expression(block.get("u0", 0.0), dom),
                make_expression(block.get("v0", 0.0), dom),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid problem block: {exc}") from exc


def _box_boundary_samples(dom, n):
    dim = len(dom)
    grids = np.meshgrid(*[np.linspace(a, b, n) for a, b in dom], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    on = np.zeros(len(pts), dtype=bool)
    for i in range(dim):
        on |= np.isclose(pts[:, i], dom[i, 0]) | np.isclose(pts[:, i], dom[i, 1])
    return pts[on]


# ---------------------------------------------------------------------------
# validation and effective scalars


@dataclass(frozen=True)
class EffectiveScalars:
    z_star_measure: float
    m_rho: float
    m_sqrt_rho: float
    m_beta: float


@dataclass(frozen=True)
class Violation:
    assumption: str
    message: str
    witness: tuple


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "pass"
        return "\n".join(f"{v.assumption}: {v.message} at {v.witness}" for v in self.violations)


def _samples(dim, count, seed_offset=0):
    """Deterministic Halton samples plus a cell-centred lattice in ``[0,1)^dim``."""
    halton = qmc.Halton(d=dim, scramble=False).random(count + 1 + seed_offset)[1 + seed_offset:]
    side = max(2, int(round(count ** (1.0 / dim))))
    ticks = (np.arange(side) + 0.5) / side
    lattice = np.stack([g.ravel() for g in np.meshgrid(*([ticks] * dim), indexing="ij")], axis=-1)
    return np.vstack([halton, lattice])


def _hole_offsets(hole: HoleSpec, count):
    """Points just inside and outside the hole boundary."""
    if hole.empty:
        return np.zeros((0, hole.dim))
    pts = _samples(hole.dim, max(count // 4, 8))
    on = hole.project(pts)
    c = np.asarray(hole.center)
    out = []
    for delta in (-1e-6, 1e-6):
        d = on - c
        d = d / np.maximum(np.linalg.norm(d, axis=-1, keepdims=True), 1e-300)
        out.append(np.clip(on + delta * d, 0.0, 1.0))
    return np.vstack(out)


def validate_model(model: CoefficientModel, hole: HoleSpec, sample_count: int = 1024) -> ValidationReport:
    """Sampled check of uniform ellipticity, positivity and hole placement.

    Violations are collected, not raised; each carries one witness point.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    dim = model.dim
    report = ValidationReport()
    lam = model.lambda_bound

    zs = np.vstack([_samples(dim, sample_count), _hole_offsets(hole, sample_count)])
    ys = _samples(dim, sample_count, seed_offset=17)
    paired = np.hstack([ys[np.arange(len(zs)) % len(ys)], zs])
    yz = np.vstack([_samples(2 * dim, sample_count), paired])
    a = model.a_matrix(yz[:, :dim], yz[:, dim:])
    if not np.all(np.isfinite(a)):
        k = int(np.argmax(~np.all(np.isfinite(a), axis=(-2, -1))))
        report.violations.append(Violation("A1", "non-finite entry in A", tuple(yz[k])))
    else:
        asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), axis=(-2, -1))
        scale = np.maximum(np.max(np.abs(a), axis=(-2, -1)), 1.0)
        bad = asym > 1e-12 * scale
        if bad.any():
            k = int(np.argmax(bad))
            report.violations.append(Violation("A1", "A is not symmetric", tuple(yz[k])))
        big = np.max(np.abs(a), axis=(-2, -1)) > lam * (1 + 1e-12)
        if big.any():
            k = int(np.argmax(big))
            report.violations.append(Violation("A1", f"|a_ij| exceeds Lambda={lam}", tuple(yz[k])))
        sym = 0.5 * (a + np.swapaxes(a, -1, -2))
        lmin = np.linalg.eigvalsh(sym)[..., 0]
        weak = lmin < 1.0 / lam * (1 - 1e-12)
        if weak.any():
            k = int(np.argmin(lmin))
            report.violations.append(Violation(
                "A1", f"ellipticity fails: smallest eigenvalue {lmin[k]:.3e} < 1/Lambda", tuple(yz[k])))

    rho = model.rho(zs)
    if np.any(~np.isfinite(rho)) or np.any(rho < 0.0):
        k = int(np.argmin(np.where(np.isfinite(rho), rho, -np.inf)))
        report.violations.append(Violation("A2", f"rho < 0 (rho={rho[k]:.3e})", tuple(zs[k])))

    yt = _samples(dim + 1, sample_count)
    beta = model.beta(yt)
    if np.any(~np.isfinite(beta)) or np.any(beta < model.alpha):
        k = int(np.argmin(np.where(np.isfinite(beta), beta, -np.inf)))
        report.violations.append(Violation(
            "A2", f"beta < alpha={model.alpha} (beta={beta[k]:.3e})", tuple(yt[k])))

    if not hole.empty:
        if hole.dim != dim:
            report.violations.append(Violation("geometry", "hole dimension differs from model", hole.center))
        elif hole.gap() <= 0.0:
            report.violations.append(Violation(
                "geometry", f"hole touches or exits the unit cell (gap {hole.gap():.3e})", hole.center))
        elif hole.measure() >= 1.0:
            report.violations.append(Violation("geometry", "hole leaves no material", hole.center))
    return report


def compute_effective_scalars(model: CoefficientModel, hole: HoleSpec,
                              quadrature_resolution: int = 128) -> EffectiveScalars:
    """Midpoint-rule averages over the perforated cell and over ``Y x T``.

    A midpoint counts as removed iff it lies strictly inside the hole.  Means
    are normalised by the measure of the integration set.
    """
    r = int(quadrature_resolution)
    if r < 8:
        raise ValueError("quadrature_resolution must be >= 8")
    dim = model.dim
    ticks = (np.arange(r) + 0.5) / r
    z = np.stack([g.ravel() for g in np.meshgrid(*([ticks] * dim), indexing="ij")], axis=-1)
    keep = ~hole.contains(z)
    if not keep.any():
        raise ModelError("A3: the perforated cell has zero measure at this resolution")
    rho = model.rho(z[keep])
    z_star = keep.sum() / r ** dim
    m_rho = float(rho.mean())
    if not m_rho > 0.0:
        raise ModelError(f"A3: mean of rho over the perforated cell is {m_rho:.3e} (must be > 0)")
    m_sqrt = float(np.sqrt(np.maximum(rho, 0.0)).mean())

    # Y x T mean, accumulated one tau layer at a time
    total = 0.0
    for tau in ticks:
        pts = np.concatenate([z, np.full((len(z), 1), tau)], axis=-1)
        total += model.beta(pts).sum()
    m_beta = float(total / r ** (dim + 1))
    return EffectiveScalars(float(z_star), m_rho, m_sqrt, m_beta)
