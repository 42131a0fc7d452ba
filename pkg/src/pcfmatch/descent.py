"""Descent&Repel: many-point optimisation towards integer PCF identities.

A template fixes the shape of the fraction ``b(0)/(a(0) + b(1)/(a(1) + ...))``
with a(n), b(n) polynomial in n and in a few real unknowns, plus a target
expression.  The population runs plain gradient descent on
``|target - fraction|`` alternated with a pairwise inverse-square repulsion,
then a lattice phase pulls points onto integer coordinates.  Integer points
that survive are converted into ordinary PCFs and handed to the exact
verifier; the optimiser itself never publishes anything.

The inner loop is vectorised over the whole population in float64.  The
acceptance test at snapped integer points uses 40-digit decimals.
"""
from __future__ import annotations

import json
import math
import pathlib
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal, localcontext
from typing import Callable, Sequence

import numpy as np

from . import _expr, numerics
from .conjecture import DESCENT, Conjecture, verify
from .lhs import LhsExpression, parse_formula
from .pcf import PcfDefinition
from .poly import IntPolynomial

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

LOSS_DIGITS = 40
TEMPLATE_DIR = pathlib.Path(__file__).parent / "data" / "templates"
INFINITE_LOSS = math.inf


class TemplateError(ValueError):
    pass


# -- templates ---------------------------------------------------------------


@dataclass(frozen=True)
class Template:
    a: str
    b: str
    target: str
    variables: tuple[str, ...]
    ranges: tuple[tuple[float, float], ...]
    depth: int = 20
    optimizer: dict = field(default_factory=dict)  # config overrides shipped with the template

    def __post_init__(self):
        if len(self.ranges) != len(self.variables):
            raise TemplateError("one range per variable required")
        if self.depth < 1:
            raise TemplateError("depth must be positive")
        for text in (self.a, self.b):
            unknown = _expr.names(_expr.parse(text)) - set(self.variables) - {"n"}
            if unknown:
                raise TemplateError(f"unknown symbols {sorted(unknown)} in {text!r}")

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @classmethod
    def from_dict(cls, data: dict) -> "Template":
        variables = tuple(data["variables"])
        ranges = tuple(tuple(float(v) for v in data["ranges"][name]) for name in variables)
        return cls(data["a"], data["b"], data["target"], variables, ranges, int(data.get("depth", 20)),
                   dict(data.get("optimizer", {})))

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "target": self.target,
            "variables": list(self.variables),
            "ranges": {v: list(r) for v, r in zip(self.variables, self.ranges)},
            "depth": self.depth,
            "optimizer": self.optimizer,
        }


def load_template(source) -> Template:
    """Load a JSON or TOML template; bare names refer to the shipped templates."""
    path = pathlib.Path(source)
    if not path.exists() and not path.suffix:
        path = TEMPLATE_DIR / f"{source}.json"
    text = path.read_text()
    data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    return Template.from_dict(data)


def shipped_templates() -> list[str]:
    return sorted(p.stem for p in TEMPLATE_DIR.glob("*.json"))


class _NumSemantics:
    """Evaluates template expressions with numpy arrays or Decimals."""

    def __init__(self, env: dict, constants: Callable[[str], object], cast):
        self.env = env
        self.constants = constants
        self.cast = cast

    def num(self, text):
        return self.cast(text)

    def name(self, name):
        if name in self.env:
            return self.env[name]
        return self.constants(name)

    def call(self, name, args):
        if name == "zeta" and len(args) == 1:
            return self.constants("zeta3")
        raise _expr.ExpressionError(f"function {name!r} not allowed in a template")

    def neg(self, a):
        return -a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def pow(self, a, b):
        return a ** int(b)


def _float_constant(name: str) -> float:
    return float(numerics.constant_value(name, 20))


class _Compiled:
    def __init__(self, template: Template):
        self.t = template
        self.a = _expr.parse(template.a)
        self.b = _expr.parse(template.b)
        self.target = _expr.parse(template.target)
        self.target_has_vars = bool(_expr.names(self.target) & set(template.variables))
        self._target_float = None if self.target_has_vars else float(self._target_decimal({}, 30))

    def _target_decimal(self, env, digits):
        with localcontext() as ctx:
            ctx.prec = digits + numerics.GUARD_DIGITS
            sem = _NumSemantics(env, lambda c: numerics.constant_value(c, digits + numerics.GUARD_DIGITS), Decimal)
            return _expr.fold(self.target, sem)

    def target_float(self, env):
        if self._target_float is not None:
            return self._target_float
        return _expr.fold(self.target, _NumSemantics(env, _float_constant, float))

    def fraction_float(self, points: np.ndarray, depth: int) -> np.ndarray:
        env = {v: points[:, i] for i, v in enumerate(self.t.variables)}
        tail = np.zeros(len(points))
        with np.errstate(all="ignore"):
            for k in range(depth - 1, -1, -1):
                env["n"] = float(k)
                a = _expr.fold(self.a, _NumSemantics(env, _float_constant, float))
                b = _expr.fold(self.b, _NumSemantics(env, _float_constant, float))
                tail = b / (a + tail)
        return tail

    def loss_float(self, points: np.ndarray, depth: int) -> np.ndarray:
        env = {v: points[:, i] for i, v in enumerate(self.t.variables)}
        with np.errstate(all="ignore"):
            out = np.abs(self.target_float(env) - self.fraction_float(points, depth))
        return np.where(np.isfinite(out), out, INFINITE_LOSS)

    def loss_decimal(self, point: Sequence, depth: int, digits: int = LOSS_DIGITS) -> Decimal | float:
        with localcontext() as ctx:
            ctx.prec = digits
            env = {v: Decimal(str(x)) if not isinstance(x, Decimal) else x for v, x in zip(self.t.variables, point)}
            sem = _NumSemantics(env, lambda c: numerics.constant_value(c, digits), Decimal)
            tail = Decimal(0)
            for k in range(depth - 1, -1, -1):
                env["n"] = Decimal(k)
                den = _expr.fold(self.a, sem) + tail
                if den == 0:
                    return INFINITE_LOSS
                tail = _expr.fold(self.b, sem) / den
            target = self._target_decimal({k: v for k, v in env.items() if k != "n"}, digits)
            return abs(target - tail)


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    step: float = 1.0  # mu, the initial step of the backtracking line search
    repel: float = 0.02  # C in C/r^2
    gd_steps: int = 20
    rounds: int = 50
    lattice_alternations: int = 200
    lattice_rate: float = 0.25
    snap_tolerance: float = 0.05
    acceptance: float = 1e-10
    count: int = 100
    start: tuple[float, ...] = (0.0, 0.0)
    end: tuple[float, ...] = (1.0, 1.0)
    probe: float = 1e-6
    max_move_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        bad = [name for name in ("step", "repel", "lattice_rate", "snap_tolerance", "probe", "max_move_fraction")
               if not getattr(self, name) > 0]
        bad += [name for name in ("gd_steps", "rounds", "lattice_alternations", "count") if getattr(self, name) < 0]
        if self.acceptance < 0:
            bad.append("acceptance")
        if len(self.start) != len(self.end):
            bad.append("start/end")
        if bad:
            raise ValueError(f"invalid optimizer settings: {', '.join(bad)}")

    def with_overrides(self, overrides: dict) -> "OptimizerConfig":
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
        return replace(self, **data)

    def to_json(self) -> dict:
        return asdict(self)


def config_for(template: Template, overrides: dict | None = None) -> OptimizerConfig:
    cfg = OptimizerConfig(start=(0.0,) * template.dimension, end=(0.0,) * template.dimension)
    cfg = cfg.with_overrides(template.optimizer)
    return cfg.with_overrides(overrides or {})


def initial_points(config: OptimizerConfig) -> np.ndarray:
    """``count`` evenly spaced points on the segment start -> end."""
    start = np.array(config.start, dtype=float)
    end = np.array(config.end, dtype=float)
    t = np.linspace(0.0, 1.0, config.count) if config.count > 1 else np.zeros(config.count)
    return start + t[:, None] * (end - start)


# -- single-point API ------------------------------------------------------------


@dataclass
class SearchPoint:
    coords: np.ndarray
    loss: float


def loss(point, template: Template, depth: int | None = None, digits: int = LOSS_DIGITS):
    """|target - fraction| at ``point`` in ``digits``-digit decimals (+inf at a pole)."""
    return _Compiled(template).loss_decimal(list(point), depth or template.depth, digits)


def gradient(fn: Callable[[np.ndarray], float], point, probe: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Central differences with relative probe; one-sided where a side is infinite.

    Returns (gradient, stuck) with stuck set when both sides of some
    coordinate are infinite.
    """
    x = np.asarray(point, dtype=float)
    g = np.zeros_like(x)
    stuck = False
    f0 = float(fn(x))
    for i in range(len(x)):
        h = probe * max(1.0, abs(x[i]))
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        fu, fd = float(fn(up)), float(fn(dn))
        if math.isfinite(fu) and math.isfinite(fd):
            g[i] = (fu - fd) / (2 * h)
        elif math.isfinite(fu) and math.isfinite(f0):
            g[i] = (fu - f0) / h
        elif math.isfinite(fd) and math.isfinite(f0):
            g[i] = (f0 - fd) / h
        else:
            stuck = True
    return g, stuck


# -- population steps --------------------------------------------------------------


class Optimizer:
    def __init__(self, template: Template, config: OptimizerConfig):
        self.template = template
        self.config = config
        self.compiled = _Compiled(template)
        self.lo = np.array([r[0] for r in template.ranges])
        self.hi = np.array([r[1] for r in template.ranges])
        self.rng = np.random.default_rng(config.seed)
        self.trajectory: list[dict] | None = None
        self._steps = 0

    def batch_loss(self, points: np.ndarray) -> np.ndarray:
        return self.compiled.loss_float(points, self.template.depth)

    def project(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, self.lo, self.hi)

    def batch_gradient(self, points: np.ndarray, fn=None) -> np.ndarray:
        fn = fn or self.batch_loss
        f0 = fn(points)
        g = np.zeros_like(points)
        for i in range(points.shape[1]):
            h = self.config.probe * np.maximum(1.0, np.abs(points[:, i]))
            up, dn = points.copy(), points.copy()
            up[:, i] += h
            dn[:, i] -= h
            fu, fd = fn(up), fn(dn)
            both = np.isfinite(fu) & np.isfinite(fd)
            only_u = np.isfinite(fu) & ~np.isfinite(fd) & np.isfinite(f0)
            only_d = np.isfinite(fd) & ~np.isfinite(fu) & np.isfinite(f0)
            with np.errstate(all="ignore"):
                g[:, i] = np.where(both, (fu - fd) / (2 * h), 0.0)
                g[:, i] = np.where(only_u, (fu - f0) / h, g[:, i])
                g[:, i] = np.where(only_d, (f0 - fd) / h, g[:, i])
        return g

    def gd_step(self, points: np.ndarray, fn=None, step: float | None = None) -> np.ndarray:
        """One backtracking step per point; the loss never increases."""
        fn = fn or self.batch_loss
        step = self.config.step if step is None else step
        f0 = fn(points)
        g = self.batch_gradient(points, fn)
        out = points.copy()
        pending = np.isfinite(f0) & np.any(g != 0, axis=1)
        t = np.full(len(points), step)
        for _ in range(30):
            if not pending.any():
                break
            idx = np.flatnonzero(pending)
            trial = self.project(points[idx] - t[idx, None] * g[idx])
            ft = fn(trial)
            ok = ft < f0[idx]
            out[idx[ok]] = trial[ok]
            pending[idx[ok]] = False
            t[idx[~ok]] /= 2
        return out

    def repel_step(self, points: np.ndarray, strength: float | None = None) -> np.ndarray:
        """Move every point along sum_b C (a - b)/|a - b|^3, clipped per step."""
        c = self.config.repel if strength is None else strength
        n = len(points)
        if n < 2:
            raise ValueError("repulsion needs at least two points")
        diff = points[:, None, :] - points[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        coincident = dist == 0
        if coincident.any():
            rows = np.unique(np.nonzero(coincident)[0])
            points = points.copy()
            points[rows] += self.rng.normal(scale=1e-6, size=(len(rows), points.shape[1]))
            return self.repel_step(points, c)
        force = c * (diff / dist[:, :, None] ** 3).sum(axis=1)
        limit = self.config.max_move_fraction * float(np.linalg.norm(self.hi - self.lo))
        norm = np.linalg.norm(force, axis=1)
        scale = np.where(norm > limit, limit / np.where(norm > 0, norm, 1.0), 1.0)
        return self.project(points + force * scale[:, None])

    def snap_loss(self, points: np.ndarray) -> np.ndarray:
        return ((points - np.rint(points)) ** 2).sum(axis=1)

    def lattice_phase(self, points: np.ndarray) -> tuple[np.ndarray, list[tuple[int, ...]]]:
        """Alternate descent on the loss and on the integer-snap loss, then
        return the integer points whose exact loss is below the threshold."""
        cfg = self.config
        for _ in range(cfg.lattice_alternations):
            points = self.gd_step(points)
            points = self.project(points - cfg.lattice_rate * 2 * (points - np.rint(points)))
            self._record("lattice", points)
        near = np.all(np.abs(points - np.rint(points)) <= cfg.snap_tolerance, axis=1)
        snapped = sorted({tuple(int(v) for v in np.rint(p)) for p in points[near]})
        found = []
        for cand in snapped:
            value = self.compiled.loss_decimal(cand, self.template.depth)
            if value != INFINITE_LOSS and value <= Decimal(repr(cfg.acceptance)):
                found.append(cand)
        return points, found

    def _record(self, stage: str, points: np.ndarray) -> None:
        if self.trajectory is not None:
            losses = self.batch_loss(points)
            step = self._steps
            self._steps += 1
            for i, (p, f) in enumerate(zip(points, losses)):
                self.trajectory.append({"step": step, "stage": stage, "point": i, "coords": p.tolist(),
                                        "loss": float(f) if math.isfinite(f) else None})

    def descend_and_repel(self, points: np.ndarray) -> np.ndarray:
        for _ in range(self.config.rounds):
            for _ in range(self.config.gd_steps):
                points = self.gd_step(points)
            self._record("gd", points)
            if len(points) >= 2:
                points = self.repel_step(points)
                self._record("repel", points)
        return points


@dataclass
class RunResult:
    candidates: list[tuple[int, ...]]
    conjectures: list[Conjecture]
    final_points: np.ndarray
    diagnostic: str = ""
    trajectory: list[dict] | None = None


def run(template: Template, config: OptimizerConfig | None = None, record: bool = False,
        verify_digits: int = 50) -> RunResult:
    """GD/Repel rounds, one lattice phase, exact verification of candidates."""
    config = config or config_for(template)
    opt = Optimizer(template, config)
    if record:
        opt.trajectory = []
    points = opt.project(initial_points(config))
    if len(points) and not np.isfinite(opt.batch_loss(points)).any():
        return RunResult([], [], points, "loss is infinite at every initial point", opt.trajectory)
    opt._record("init", points)
    points = opt.descend_and_repel(points)
    points, candidates = opt.lattice_phase(points)
    conjectures = []
    for cand in candidates:
        draft = to_conjecture(template, cand, seed=config.seed)
        if draft is None:
            continue
        checked = verify(draft, verify_digits)
        if checked.status == "verified":
            conjectures.append(checked)
    return RunResult(candidates, conjectures, points, "", opt.trajectory)


def _substitute(text: str, values: dict) -> str:
    node = _expr.parse(text)
    return _expr.unparse(node, {k: f"({v})" for k, v in values.items()})


def to_conjecture(template: Template, point: Sequence[int], seed: int | None = None) -> Conjecture | None:
    """Rewrite ``b(0)/(a(0) + ...) = target`` at an integer point as a PCF
    ``a0 + b1/(a1 + ...)`` with the target's integer part moved into a0."""
    values = dict(zip(template.variables, point))
    try:
        a = IntPolynomial.parse(_substitute(template.a, values)).shift(-1)
        b = IntPolynomial.parse(_substitute(template.b, values)).shift(-1)
        lhs = parse_formula(_substitute(template.target, values))
    except (_expr.ExpressionError, ValueError):
        return None
    a0 = 0
    if isinstance(lhs, LhsExpression) and lhs.delta.degree == 0 and lhs.gamma.degree >= 1:
        d0 = lhs.delta.coeffs[0]
        g0 = lhs.gamma.coeffs[0]
        if g0 % d0 == 0 and g0 != 0:
            a0 = -g0 // d0
            lhs = LhsExpression(lhs.gamma - g0, lhs.delta, lhs.constant).canonical()
    try:
        pcf = PcfDefinition((a,), (b,), a0)
    except ValueError:
        return None  # a vanishing partial numerator makes the fraction finite
    meta = {"template": template.to_dict(), "point": list(point)}
    if seed is not None:
        meta["seed"] = seed
    return Conjecture(lhs, pcf, provenance=DESCENT, metadata=meta)
