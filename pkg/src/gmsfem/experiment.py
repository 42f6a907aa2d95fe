"""
Declarative experiment runner.

A config is a JSON object; unknown keys are rejected. Example::

    {
      "grid": {"n_fine": 80, "n_coarse": 8},
      "field": {"kind": "channels", "params": {"n_strips": 4}, "seed": 1},
      "snapshots": {"type": "harmonic"},
      "oversampling": {"coarse_layers": 1},
      "mass_weight": "pou",
      "variant": "OFF1",
      "schedule": [{"count": 2}, {"count": 4}, {"threshold": 60}],
      "references": ["snapshot", "fine"]
    }

``variant`` may be a list of two offline variants, giving the union space;
its schedule entries then carry one value per variant. An ``online``
block switches to a parameter-dependent run whose rows sweep the online
dimension inside a fixed offline space.
"""
import copy
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coeff as cf
from .couple import build_operator, fine_system, linear_boundary, solve_coarse, solve_fine
from .errors import ConfigurationError, GmsfemError
from .grid import CoarseLayers, FineLayers, build_grids, build_partition, neighborhood, oversample
from .metrics import NormEvaluator, decay_series
from .reduce import (
    OFFLINE_PENCILS, ONLINE_PENCILS, Count, Threshold, lambda_star,
    frame_matrices, online_space, select, spectrum, union_space,
)
from .snapshot import harmonic_snapshots, merge_parameter_snapshots, spectral_snapshots

# used when the field has several terms and no training set is given
DEFAULT_TRAINING_VALUES = (0.1, 0.55, 1.0)

_TOP_KEYS = {
    "grid", "field", "mu", "training_mu", "snapshots", "oversampling", "mass_weight",
    "variant", "schedule", "references", "online", "chop", "source", "boundary",
    "prune_tol", "seed", "decay_variants",
}
_REFERENCES = ("fine", "snapshot", "offline")


def _strict(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {extra}")


def _selection(entry, n_variants, where):
    _strict(entry, {"count", "threshold"}, where)
    if len(entry) != 1:
        raise ConfigurationError(f"{where}: give exactly one of 'count' or 'threshold'")
    (kind, value), = entry.items()
    values = value if isinstance(value, list) else [value] * n_variants
    if len(values) != n_variants:
        raise ConfigurationError(f"{where}: expected {n_variants} values, got {len(values)}")
    if kind == "count":
        if not all(isinstance(v, int) and v >= 0 for v in values):
            raise ConfigurationError(f"{where}: counts must be non-negative integers")
        return tuple(Count(v) for v in values)
    if not all(isinstance(v, (int, float)) for v in values):
        raise ConfigurationError(f"{where}: thresholds must be numbers")
    return tuple(Threshold(float(v)) for v in values)


@dataclass
class OnlineConfig:
    mu: np.ndarray
    variant: str
    schedule: list
    offline: tuple


@dataclass
class ExperimentConfig:
    raw: dict
    n_fine: int
    n_coarse: int
    field: dict
    mu: np.ndarray
    training_mu: list
    snapshot_type: str
    L: int
    oversampling: object
    mass_weight: str
    variants: tuple
    schedule: list
    references: tuple
    online: OnlineConfig = None
    chop: float = None
    source: float = 1.0
    boundary: tuple = (0.0, 1.0, 0.0)
    prune_tol: float = 1e-8
    seed: int = 0
    decay_variants: tuple = field(default=())

    @property
    def is_multi(self):
        return len(self.variants) > 1


def load_config(source, seed=None):
    """Validate a config (path or dict) into an :class:`ExperimentConfig`."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{source}: invalid JSON ({exc})") from exc
    if seed is not None:
        raw["seed"] = int(seed)
    _strict(raw, _TOP_KEYS, "config")
    for key in ("grid", "field", "snapshots"):
        if key not in raw:
            raise ConfigurationError(f"config: missing '{key}'")

    grid = raw["grid"]
    _strict(grid, {"n_fine", "n_coarse"}, "grid")
    fld = raw["field"]
    _strict(fld, {"kind", "params", "seed", "file", "terms"}, "field")

    snap = raw["snapshots"]
    _strict(snap, {"type", "L"}, "snapshots")
    stype = snap.get("type")
    if stype not in ("harmonic", "spectral"):
        raise ConfigurationError(f"snapshots.type: expected harmonic or spectral, got {stype!r}")
    if stype == "spectral" and not isinstance(snap.get("L"), int):
        raise ConfigurationError("snapshots.L: spectral snapshots need an integer L")

    os_cfg = raw.get("oversampling")
    if os_cfg is None:
        ovs = None
    else:
        _strict(os_cfg, {"coarse_layers", "fine_layers"}, "oversampling")
        if len(os_cfg) != 1:
            raise ConfigurationError("oversampling: give coarse_layers or fine_layers")
        (k, v), = os_cfg.items()
        ovs = CoarseLayers(int(v)) if k == "coarse_layers" else FineLayers(int(v))

    variant = raw.get("variant", "OFF1")
    variants = tuple(variant) if isinstance(variant, list) else (variant,)
    for v in variants:
        if v not in OFFLINE_PENCILS:
            raise ConfigurationError(f"variant: unknown offline variant {v!r}")
    if len(variants) == 2 and len(set(variants)) != 2 or len(variants) > 2:
        raise ConfigurationError("variant: a union needs two distinct variants")

    schedule = raw.get("schedule", [])
    if not isinstance(schedule, list) or not schedule:
        raise ConfigurationError("schedule: need a non-empty list")
    sched = [_selection(e, len(variants), f"schedule[{k}]") for k, e in enumerate(schedule)]

    refs = tuple(raw.get("references", ["snapshot", "fine"]))
    for r in refs:
        if r not in _REFERENCES:
            raise ConfigurationError(f"references: unknown reference {r!r}")

    online = None
    if raw.get("online") is not None:
        on = raw["online"]
        _strict(on, {"mu", "variant", "schedule", "offline"}, "online")
        if on.get("variant") not in ONLINE_PENCILS:
            raise ConfigurationError(f"online.variant: unknown online variant {on.get('variant')!r}")
        if len(variants) != 1:
            raise ConfigurationError("online: needs a single offline variant")
        on_sched = [_selection(e, 1, f"online.schedule[{k}]")[0]
                    for k, e in enumerate(on.get("schedule", []))]
        if not on_sched:
            raise ConfigurationError("online.schedule: need a non-empty list")
        off = _selection(on["offline"], 1, "online.offline") if "offline" in on else sched[-1]
        online = OnlineConfig(np.asarray(on["mu"], dtype=float), on["variant"], on_sched, off)
    elif "offline" in refs:
        raise ConfigurationError("references: 'offline' is only defined for online runs")

    boundary = raw.get("boundary", {"a": 0.0, "bx": 1.0, "by": 0.0})
    _strict(boundary, {"a", "bx", "by"}, "boundary")
    mw = raw.get("mass_weight", cf.POU_WEIGHTED)
    if mw not in (cf.IDENTITY, cf.POU_WEIGHTED):
        raise ConfigurationError(f"mass_weight: expected identity or pou, got {mw!r}")
    decay = raw.get("decay_variants", list(variants))
    for v in decay:
        if v not in OFFLINE_PENCILS:
            raise ConfigurationError(f"decay_variants: unknown variant {v!r}")

    return ExperimentConfig(
        raw=raw,
        n_fine=int(grid.get("n_fine", 0)),
        n_coarse=int(grid.get("n_coarse", 0)),
        field=fld,
        mu=None if raw.get("mu") is None else np.asarray(raw["mu"], dtype=float),
        training_mu=raw.get("training_mu"),
        snapshot_type=stype,
        L=snap.get("L", 0),
        oversampling=ovs,
        mass_weight=mw,
        variants=variants,
        schedule=sched,
        references=refs,
        online=online,
        chop=None if raw.get("chop") is None else float(raw["chop"]),
        source=float(raw.get("source", 1.0)),
        boundary=(float(boundary.get("a", 0.0)), float(boundary.get("bx", 0.0)),
                  float(boundary.get("by", 0.0))),
        prune_tol=float(raw.get("prune_tol", 1e-8)),
        seed=int(raw.get("seed", 0)),
        decay_variants=tuple(decay),
    )


def _one_term(spec, n_fine, seed, where):
    _strict(spec, {"kind", "params", "seed", "file"}, where)
    if "file" in spec:
        values = cf.load_field(spec["file"])
        if values.size != n_fine * n_fine:
            raise ConfigurationError(f"{where}: field file has {values.size} cells, "
                                     f"grid needs {n_fine * n_fine}")
        return values
    if "kind" not in spec:
        raise ConfigurationError(f"{where}: need 'kind' or 'file'")
    return cf.generate_field(spec["kind"], n_fine, spec.get("params"), spec.get("seed", seed))


def build_field(config):
    spec = config.field
    if "terms" in spec:
        if set(spec) - {"terms"}:
            raise ConfigurationError("field: 'terms' excludes other keys")
        terms = [_one_term(t, config.n_fine, config.seed + q, f"field.terms[{q}]")
                 for q, t in enumerate(spec["terms"])]
    else:
        terms = [_one_term(spec, config.n_fine, config.seed, "field")]
    return cf.CoefficientField(np.vstack(terms))


@dataclass
class Row:
    dim: int
    lambda_star: float
    errors: dict
    lambda_star_plus: float = None


@dataclass
class LocalData:
    vertex: int
    snapshots: object
    matrices: object
    spectra: dict


class Experiment:
    """Shared state of one config: grid, coefficient and local spaces."""

    def __init__(self, config, threads=1):
        self.config = config
        self.threads = max(1, int(threads))
        self.grid = build_grids(config.n_fine, config.n_coarse)
        self.field = build_field(config)
        Q = self.field.Q
        self.mu = np.ones(Q) if config.mu is None else config.mu
        cf.evaluate(self.field, self.mu)
        if config.training_mu is not None:
            self.training = [np.asarray(m, dtype=float) for m in config.training_mu]
        elif Q == 1:
            self.training = [self.mu]
        else:
            self.training = [np.asarray(m) for m in itertools.product(DEFAULT_TRAINING_VALUES, repeat=Q)]
        self.kappa_bar = cf.parameter_average(self.field, self.training)
        self.kappa_train = [cf.evaluate(self.field, m) for m in self.training]
        self.pou = build_partition(self.grid)
        self._local = None

    # local stage

    def _weight(self, kappa):
        return cf.mass_weight(kappa, self.config.mass_weight, self.pou).values

    def _regions(self, i):
        om = neighborhood(self.grid, i)
        op = om if self.config.oversampling is None else oversample(self.grid, om, self.config.oversampling)
        return om, op

    def _localize(self, kappa, om, op):
        if self.config.chop is None:
            return kappa
        return cf.chop(kappa, om, op, self.config.chop)

    def _build_local(self, i):
        c = self.config
        om, op = self._regions(i)
        spaces = []
        for j, kap in enumerate(self.kappa_train):
            kap = self._localize(kap, om, op)
            if c.snapshot_type == "harmonic":
                spaces.append(harmonic_snapshots(op, kap, om, j))
            else:
                spaces.append(spectral_snapshots(op, kap, self._weight(kap), c.L, om, j))
        snap = spaces[0] if len(spaces) == 1 else merge_parameter_snapshots(spaces, c.prune_tol)
        kbar = self._localize(self.kappa_bar, om, op)
        mats = frame_matrices(snap, kbar, self._weight(kbar))
        return LocalData(i, snap, mats, {})

    def _map(self, fn, items):
        if self.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    @property
    def local(self):
        if self._local is None:
            verts = [int(i) for i in self.grid.interior_vertices]
            self._local = dict(zip(verts, self._map(self._build_local, verts)))
        return self._local

    def spectrum(self, i, variant):
        d = self.local[i]
        if variant not in d.spectra:
            d.spectra[variant] = spectrum(d.snapshots, variant, d.matrices)
        return d.spectra[variant]

    def offline_spaces(self, selection):
        """Per-vertex offline spaces for one schedule entry."""
        c = self.config

        def one(i):
            parts = [select(self.spectrum(i, v), s) for v, s in zip(c.variants, selection)]
            return parts[0] if len(parts) == 1 else union_space(parts, c.prune_tol)

        verts = list(self.local)
        return dict(zip(verts, self._map(one, verts)))

    def online_spaces(self, offline, selection):
        c = self.config
        kmu = cf.evaluate(self.field, c.online.mu)

        def one(i):
            om, op = self._regions(i)
            k = self._localize(kmu, om, op)
            return online_space(offline[i], c.online.variant, selection, k, self._weight(k))

        verts = list(offline)
        return dict(zip(verts, self._map(one, verts)))

    # global stage

    def boundary_fn(self):
        return linear_boundary(*self.config.boundary)

    def solve(self, spaces, kappa, system):
        op = build_operator(self.grid, spaces, self.boundary_fn(), self.pou, self.config.prune_tol)
        return op, solve_coarse(op, kappa, self.config.source, system)

    def snapshot_solution(self, kappa, system):
        spaces = {i: d.snapshots for i, d in self.local.items()}
        return self.solve(spaces, kappa, system)[1]


def run_experiment(config, threads=1):
    """Rows per reference, one row per schedule entry.

    Returns ``{reference: [Row, ...]}`` in schedule order.
    """
    exp = Experiment(config, threads)
    c = config
    mu = c.online.mu if c.online is not None else exp.mu
    kappa = cf.evaluate(exp.field, mu)
    system = fine_system(exp.grid, kappa, c.source)
    norms = NormEvaluator(exp.grid, kappa)

    refs = {}
    if "fine" in c.references:
        refs["fine"] = solve_fine(exp.grid, kappa, c.source, exp.boundary_fn())
    if "snapshot" in c.references:
        refs["snapshot"] = exp.snapshot_solution(kappa, system)

    def row(spaces, u):
        errs = {name: norms.relative_error(ref, u, name) for name, ref in refs.items()}
        vals = list(spaces.values())
        plus = lambda_star(vals, plus=True) if c.is_multi else None
        return Row(0, lambda_star(vals), errs, plus)

    rows = []
    if c.online is None:
        for k, sel in enumerate(c.schedule):
            try:
                spaces = exp.offline_spaces(sel)
                op, u = exp.solve(spaces, kappa, system)
            except GmsfemError as exc:
                raise type(exc)(f"schedule[{k}]: {exc}") from exc
            r = row(spaces, u)
            r.dim = op.dim
            rows.append(r)
    else:
        offline = exp.offline_spaces(c.online.offline)
        if "offline" in c.references:
            refs["offline"] = exp.solve(offline, kappa, system)[1]
        for k, sel in enumerate(c.online.schedule):
            try:
                spaces = exp.online_spaces(offline, sel)
                op, u = exp.solve(spaces, kappa, system)
            except GmsfemError as exc:
                raise type(exc)(f"online.schedule[{k}]: {exc}") from exc
            r = row(spaces, u)
            r.dim = op.dim
            rows.append(r)
    return {name: rows for name in c.references}, exp


def eigen_decay(config, threads=1, experiment=None):
    """``{variant: {vertex: ascending eigenvalues}}`` for ``config.decay_variants``."""
    exp = Experiment(config, threads) if experiment is None else experiment
    return {v: {i: exp.spectrum(i, v).eigenvalues for i in exp.local}
            for v in config.decay_variants}, exp


def config_echo(config):
    """Comment lines describing the config, one per top-level key."""
    return [f"# {k}={json.dumps(config.raw[k], sort_keys=True)}" for k in sorted(config.raw)]


def _fmt(x):
    return repr(float(x))


def table_lines(rows, reference, multi=False):
    """CSV lines (header first) for one reference."""
    header = "dim,lambda_star,l2_pct,h1_pct" + (",lambda_star_plus" if multi else "")
    out = [header]
    for r in rows:
        e = r.errors[reference]
        cells = [str(r.dim), _fmt(r.lambda_star), _fmt(e.l2_pct), _fmt(e.h1_pct)]
        if multi:
            cells.append(_fmt(r.lambda_star_plus))
        out.append(",".join(cells))
    return out


def human_table(rows, reference, multi=False):
    lines = [f"reference: {reference}",
             f"{'dim':>8} {'lambda*':>12} {'L2 %':>8} {'H1 %':>8}" + ("  lambda*+" if multi else "")]
    for r in rows:
        e = r.errors[reference]
        line = f"{r.dim:>8} {r.lambda_star:>12.4g} {e.l2_pct:>8.2f} {e.h1_pct:>8.2f}"
        if multi:
            line += f"  {r.lambda_star_plus:.4g}"
        lines.append(line)
    return "\n".join(lines)


def decay_lines(decay):
    out = ["neighborhood,k,lambda,inv_lambda"]
    for variant, per_vertex in decay.items():
        out.append(f"# variant={variant}")
        for i, lam in per_vertex.items():
            for k, l, inv in decay_series(lam):
                out.append(f"{i},{k},{_fmt(l)},{_fmt(inv)}")
    return out
