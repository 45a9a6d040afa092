"""Config-driven experiment grids: parsing, execution, aggregation and reports.

A run is described by an INI file with the sections ``[task]``, ``[data]``,
``[methods]``, ``[attacks]``, ``[budgets]`` and ``[output]``::

    [task]
    task = node_classification
    train_fractions = 0.1, 0.5, 0.9
    shuffles = 3
    repetitions = 3
    seed = 0

    [data]
    datasets = citeseer, sbm:homo
    homo.blocks = 100, 100, 100
    homo.p_in = 0.1
    homo.p_out = 0.01

    [methods]
    methods = deepwalk, hope
    dim = 128
    deepwalk.num_walks = 10

    [attacks]
    attacks = add_rand, del_rand
    allow_disconnect = false

    [budgets]
    budgets = 0.1, 0.2, 0.3

    [output]
    dir = results
    formats = csv, json

Dataset tokens are manifest names, ``sbm:<name>`` (block model defined by
``<name>.*`` keys) or ``file:<edge list>`` (labels read from a sibling
``.labels`` file when present).
"""

from __future__ import annotations

import concurrent.futures
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import platform
import re
import resource
import subprocess
import time
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import __version__
from .attacks import ADDITION, DELETION, DETERMINISTIC, LABEL_BASED, STRATEGIES, AttackSpec, apply_attack
from .data import SbmSpec, dataset_names, fetch_dataset, get_descriptor, load_dataset, sbm_generate, sha256_file
from .embed import MethodConfig, available_methods, embed
from .evaluation import network_reconstruction_eval, node_classification_eval
from .graph import Graph, read_edgelist, read_labels
from .logreg import DEFAULT_REG_GRID

logger = logging.getLogger(__name__)

TASKS = ("node_classification", "network_reconstruction")
NC_METRICS = ("f1_micro", "f1_macro", "mr")
NR_METRICS = ("auc", "average_precision")
ALL = "*"


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.problems))


class ReportError(OSError):
    pass


# -- configuration ---------------------------------------------------------


_METHOD_FIELDS = {f.name: f for f in fields(MethodConfig)}
_METHOD_FIELD_TYPES = {
    name: (float if name == "katz_beta" else str if name == "command" else type(f.default))
    for name, f in _METHOD_FIELDS.items()
}
_TUNABLE = sorted(set(_METHOD_FIELDS) - {"method", "seed", "d"})

_FIXED_KEYS = {
    "task": {"task", "train_fractions", "shuffles", "repetitions", "seed", "pair_fraction", "folds", "reg_grid", "standardize"},
    "data": {"datasets"},
    "methods": {"methods", "dim"} | set(_TUNABLE),
    "attacks": {"attacks", "allow_disconnect", "moment_mode", "degree_on_original"},
    "budgets": {"budgets"},
    "output": {"dir", "formats", "jobs"},
}
_SBM_KEYS = {"blocks", "p_in", "p_out", "seed"}


@dataclass
class SbmDataset:
    blocks: list
    p_in: float
    p_out: float
    seed: Optional[int] = None


@dataclass
class ExperimentConfig:
    datasets: list
    methods: list
    attacks: list
    task: str = "node_classification"
    method_configs: dict = field(default_factory=dict)
    sbm: dict = field(default_factory=dict)
    budgets: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    allow_disconnect: list = field(default_factory=lambda: [False])
    moment_mode: str = "literal"
    degree_on_original: bool = False
    train_fractions: list = field(default_factory=lambda: [0.1, 0.5, 0.9])
    shuffles: int = 3
    repetitions: int = 3
    seed: int = 0
    pair_fraction: float = 0.05
    folds: int = 5
    reg_grid: tuple = DEFAULT_REG_GRID
    standardize: bool = False
    out_dir: str = "results"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    jobs: int = 1

    def __post_init__(self):
        for m in self.methods:
            self.method_configs.setdefault(m, MethodConfig(method=m))

    def method_config(self, method: str) -> MethodConfig:
        return self.method_configs[method]

    def to_ini(self) -> str:
        """Fully resolved config; parsing it again yields an equal config."""
        fmt = lambda xs: ", ".join(_fmt_value(x) for x in xs)  # noqa: E731
        out = io.StringIO()
        out.write("[task]\n")
        out.write(f"task = {self.task}\ntrain_fractions = {fmt(self.train_fractions)}\n")
        out.write(f"shuffles = {self.shuffles}\nrepetitions = {self.repetitions}\nseed = {self.seed}\n")
        out.write(f"pair_fraction = {_fmt_value(self.pair_fraction)}\nfolds = {self.folds}\n")
        out.write(f"reg_grid = {fmt(self.reg_grid)}\nstandardize = {_fmt_value(self.standardize)}\n\n")
        out.write(f"[data]\ndatasets = {', '.join(self.datasets)}\n")
        for name, s in sorted(self.sbm.items()):
            out.write(f"{name}.blocks = {fmt(s.blocks)}\n{name}.p_in = {_fmt_value(s.p_in)}\n")
            out.write(f"{name}.p_out = {_fmt_value(s.p_out)}\n")
            if s.seed is not None:
                out.write(f"{name}.seed = {s.seed}\n")
        out.write(f"\n[methods]\nmethods = {', '.join(self.methods)}\n")
        dims = {self.method_configs[m].d for m in self.methods}
        if len(dims) == 1:
            out.write(f"dim = {dims.pop()}\n")
        for m in self.methods:
            c = self.method_configs[m]
            for key in ["d"] + _TUNABLE:
                value = getattr(c, key)
                if value is not None:
                    out.write(f"{m}.{key} = {_fmt_value(value)}\n")
        out.write(f"\n[attacks]\nattacks = {', '.join(self.attacks)}\n")
        out.write(f"allow_disconnect = {fmt(self.allow_disconnect)}\nmoment_mode = {self.moment_mode}\n")
        out.write(f"degree_on_original = {_fmt_value(self.degree_on_original)}\n\n")
        out.write(f"[budgets]\nbudgets = {fmt(self.budgets)}\n\n")
        out.write(f"[output]\ndir = {self.out_dir}\nformats = {', '.join(self.formats)}\njobs = {self.jobs}\n")
        return out.getvalue()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method_configs"] = {m: c.to_dict() for m, c in self.method_configs.items()}
        d["sbm"] = {k: asdict(v) for k, v in self.sbm.items()}
        d["reg_grid"] = list(self.reg_grid)
        return d


def _fmt_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^\s=:#;][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), i)
    return where


_BOOL = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _split(value: str) -> list[str]:
    return [t.strip() for t in value.split(",") if t.strip()]


def parse_config(stream) -> ExperimentConfig:
    """Parse and validate an INI experiment config from a text stream or string.

    Raises ``ConfigError`` listing every problem, with line numbers.
    """
    text = stream if isinstance(stream, str) else stream.read()
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {ln}: cannot parse {line.strip()!r}" for ln, line in exc.errors]) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of any section") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}") from None

    lines = _key_lines(text)
    problems: list[str] = []

    def at(section, key):
        ln = lines.get((section, key))
        return f"line {ln}: [{section}] {key}" if ln else f"[{section}] {key}"

    for section in parser.sections():
        if section not in _FIXED_KEYS:
            problems.append(f"unknown section [{section}]")
    sec = {s: dict(parser[s]) if parser.has_section(s) else {} for s in _FIXED_KEYS}

    def get(section, key, conv, default):
        if key not in sec[section]:
            return default
        raw = sec[section][key]
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            problems.append(f"{at(section, key)}: invalid value {raw!r} ({exc})")
            return default

    def as_bool(s):
        if s.strip().lower() not in _BOOL:
            raise ValueError("expected true/false")
        return _BOOL[s.strip().lower()]

    def floats(s):
        return [float(t) for t in _split(s)]

    def ints(s):
        return [int(t) for t in _split(s)]

    # unknown keys are errors
    methods = _split(sec["methods"].get("methods", ""))
    datasets = _split(sec["data"].get("datasets", ""))
    sbm_names = [t.split(":", 1)[1] for t in datasets if t.startswith("sbm:")]
    for section, keys in sec.items():
        for key in keys:
            if key in _FIXED_KEYS[section]:
                continue
            if section == "methods" and "." in key:
                m, f = key.split(".", 1)
                if m in methods and (f in _TUNABLE or f == "d"):
                    continue
            if section == "data" and "." in key:
                name, f = key.split(".", 1)
                if name in sbm_names and f in _SBM_KEYS:
                    continue
            problems.append(f"{at(section, key)}: unknown key")

    cfg_kwargs = dict(
        task=get("task", "task", str.strip, "node_classification"),
        train_fractions=get("task", "train_fractions", floats, [0.1, 0.5, 0.9]),
        shuffles=get("task", "shuffles", int, 3),
        repetitions=get("task", "repetitions", int, 3),
        seed=get("task", "seed", int, 0),
        pair_fraction=get("task", "pair_fraction", float, 0.05),
        folds=get("task", "folds", int, 5),
        reg_grid=tuple(get("task", "reg_grid", floats, list(DEFAULT_REG_GRID))),
        standardize=get("task", "standardize", as_bool, False),
        allow_disconnect=get("attacks", "allow_disconnect", lambda s: [as_bool(t) for t in _split(s)], [False]),
        moment_mode=get("attacks", "moment_mode", str.strip, "literal"),
        degree_on_original=get("attacks", "degree_on_original", as_bool, False),
        budgets=get("budgets", "budgets", floats, [round(0.1 * i, 1) for i in range(1, 10)]),
        out_dir=get("output", "dir", str.strip, "results"),
        formats=get("output", "formats", _split, ["csv", "json"]),
        jobs=get("output", "jobs", int, 1),
    )
    attacks = _split(sec["attacks"].get("attacks", ""))

    sbm = {}
    for name in sbm_names:
        def k(f, name=name):
            return f"{name}.{f}"
        missing = [k(f) for f in ("blocks", "p_in", "p_out") if k(f) not in sec["data"]]
        if missing:
            problems.append(f"[data] sbm:{name} needs {', '.join(missing)}")
            continue
        sbm[name] = SbmDataset(
            blocks=get("data", k("blocks"), ints, []),
            p_in=get("data", k("p_in"), float, 0.0),
            p_out=get("data", k("p_out"), float, 0.0),
            seed=get("data", k("seed"), int, None),
        )

    dim = get("methods", "dim", int, None)
    method_configs = {}
    for m in methods:
        overrides = {"method": m}
        if dim is not None:
            overrides["d"] = dim
        for key in _TUNABLE:
            if key in sec["methods"]:
                overrides[key] = get("methods", key, _coerce(key), None)
        for key in ["d"] + _TUNABLE:
            full = f"{m}.{key}"
            if full in sec["methods"]:
                overrides[key] = get("methods", full, _coerce(key), None)
        try:
            method_configs[m] = MethodConfig(**overrides)
        except (TypeError, ValueError) as exc:
            problems.append(f"[methods] {m}: {exc}")

    if not problems:
        cfg = ExperimentConfig(
            datasets=datasets, methods=methods, attacks=attacks, method_configs=method_configs, sbm=sbm, **cfg_kwargs
        )
        problems.extend(validate_config(cfg, at))
    if problems:
        raise ConfigError(problems)
    return cfg


def _coerce(key):
    t = _METHOD_FIELD_TYPES[key]
    if t is bool:
        return lambda s: _BOOL[s.strip().lower()]
    return lambda s: t(s.strip())


def validate_config(cfg: ExperimentConfig, at=lambda s, k: f"[{s}] {k}") -> list[str]:
    """Every semantic problem with ``cfg`` (empty list if valid)."""
    p = []
    if cfg.task not in TASKS:
        p.append(f"{at('task', 'task')}: must be one of {', '.join(TASKS)}, got {cfg.task!r}")
    if not cfg.datasets:
        p.append(f"{at('data', 'datasets')}: at least one dataset is required")
    known = set(dataset_names())
    unlabeled = []
    for d in cfg.datasets:
        if d.startswith("sbm:"):
            s = cfg.sbm.get(d[4:])
            if s is not None:
                try:
                    SbmSpec(s.blocks, s.p_in, s.p_out)
                except ValueError as exc:
                    p.append(f"[data] {d}: {exc}")
        elif d.startswith("file:"):
            if not Path(d[5:]).exists():
                p.append(f"[data] {d}: edge list not found")
        elif d not in known:
            p.append(f"{at('data', 'datasets')}: unknown dataset {d!r}; known: {', '.join(sorted(known))}")
        elif get_descriptor(d).expected.get("labels") is None:
            unlabeled.append(d)
    if not cfg.methods:
        p.append(f"{at('methods', 'methods')}: at least one method is required")
    avail = set(available_methods())
    for m in cfg.methods:
        if m not in avail:
            p.append(f"{at('methods', 'methods')}: unknown method {m!r}")
    if not cfg.attacks:
        p.append(f"{at('attacks', 'attacks')}: at least one attack is required")
    for a in cfg.attacks:
        if a not in STRATEGIES:
            p.append(f"{at('attacks', 'attacks')}: unknown attack {a!r}")
    if cfg.moment_mode not in ("literal", "edge_end"):
        p.append(f"{at('attacks', 'moment_mode')}: must be literal or edge_end")
    if not cfg.allow_disconnect:
        p.append(f"{at('attacks', 'allow_disconnect')}: needs at least one value")
    if not cfg.budgets:
        p.append(f"{at('budgets', 'budgets')}: at least one budget is required")
    for b in cfg.budgets:
        if not math.isfinite(b) or b < 0:
            p.append(f"{at('budgets', 'budgets')}: budget {b} must be a finite number >= 0")
            continue
        for a in cfg.attacks:
            if a in STRATEGIES and a not in ADDITION and b >= 1:
                p.append(f"{at('budgets', 'budgets')}: budget {b} is outside [0, 1) required by {a}")
    label_attacks = [a for a in cfg.attacks if a in LABEL_BASED]
    for d in unlabeled:
        if label_attacks:
            p.append(f"[data] {d} has no labels but label-based attacks {', '.join(label_attacks)} were requested")
        if cfg.task == "node_classification":
            p.append(f"[data] {d} has no labels; node_classification needs labels")
    if cfg.task == "node_classification":
        for f in cfg.train_fractions:
            if not 0 < f < 1:
                p.append(f"{at('task', 'train_fractions')}: {f} must lie in (0, 1)")
        if not cfg.train_fractions:
            p.append(f"{at('task', 'train_fractions')}: at least one train fraction is required")
    if cfg.shuffles < 1:
        p.append(f"{at('task', 'shuffles')}: must be >= 1")
    if cfg.repetitions < 1:
        p.append(f"{at('task', 'repetitions')}: must be >= 1")
    if cfg.folds < 2:
        p.append(f"{at('task', 'folds')}: must be >= 2")
    if not 0 < cfg.pair_fraction <= 1:
        p.append(f"{at('task', 'pair_fraction')}: must lie in (0, 1]")
    if not cfg.reg_grid or any(r <= 0 for r in cfg.reg_grid):
        p.append(f"{at('task', 'reg_grid')}: needs positive values")
    if cfg.jobs < 1:
        p.append(f"{at('output', 'jobs')}: must be >= 1")
    for f in cfg.formats:
        if f not in ("csv", "json"):
            p.append(f"{at('output', 'formats')}: unknown format {f!r}")
    return p


# -- result table ----------------------------------------------------------


@dataclass
class ResultRow:
    task: str
    dataset: str
    method: str
    attack: str
    allow_disconnect: object  # bool, or "*" on aggregate rows
    budget: float
    n_tr: object  # float, None (reconstruction) or "*"
    shuffle: object
    repetition: object
    seed: Optional[int]
    metric: str
    value: Optional[float]
    wall_time: Optional[float]
    peak_rss_mb: Optional[float]
    status: str = "ok"
    note: str = ""

    @property
    def is_aggregate(self) -> bool:
        return ":" in self.metric


COLUMNS = [f.name for f in fields(ResultRow)]


def _order(x):
    if x is None:
        return (0, 0)
    if x == ALL:
        return (2, 0)
    return (1, x)


def _row_key(r: ResultRow):
    return (
        r.is_aggregate, r.task, r.dataset, r.method, r.attack, _order(r.allow_disconnect), r.budget,
        _order(r.n_tr), _order(r.shuffle), _order(r.repetition), r.metric,
    )


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (cell description, reason)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def sort(self) -> "ResultTable":
        self.rows.sort(key=_row_key)
        return self

    @property
    def raw(self) -> list:
        return [r for r in self.rows if not r.is_aggregate]

    @property
    def aggregates(self) -> list:
        return [r for r in self.rows if r.is_aggregate]

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.status != "ok"]

    def filter(self, **criteria) -> "ResultTable":
        keep = [r for r in self.rows if all(getattr(r, k) == v for k, v in criteria.items())]
        return ResultTable(keep, list(self.skipped), dict(self.metadata))

    def values(self, metric: str, **criteria) -> np.ndarray:
        return np.array([r.value for r in self.filter(metric=metric, status="ok", **criteria).raw], dtype=float)


def derive_seed(master: int, *coords) -> int:
    """Deterministic 63-bit seed from the master seed and cell coordinates."""
    blob = json.dumps([int(master), *coords], separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


def mean_ci(values: Sequence[float], level: float = 0.95):
    """(mean, sample std, ci_low, ci_high) with a Student-t interval; CI is None for n < 2."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    mean = float(x.mean())
    if n < 2:
        return mean, None, None, None
    sd = float(x.std(ddof=1))
    half = float(sps.t.ppf(0.5 + level / 2, n - 1)) * sd / math.sqrt(n)
    return mean, sd, mean - half, mean + half


def aggregate_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    """Mean / std / n / 95% CI rows over shuffles and repetitions.

    Groups are formed per train fraction and, for classification, once more
    pooled over all train fractions (``n_tr = "*"``).
    """
    groups: dict = {}
    for r in rows:
        if r.status != "ok" or r.is_aggregate or r.value is None:
            continue
        base = (r.task, r.dataset, r.method, r.attack, r.allow_disconnect, r.budget)
        groups.setdefault(base + (r.n_tr, r.metric), []).append(r.value)
        if r.n_tr is not None:
            groups.setdefault(base + (ALL, r.metric), []).append(r.value)
    out = []
    for (task, ds, m, a, ad, b, n_tr, metric), vals in groups.items():
        mean, sd, lo, hi = mean_ci(vals)
        stats = {"mean": mean, "n": float(len(vals))}
        if sd is not None:
            stats.update(std=sd, ci95_low=lo, ci95_high=hi)
        for name, v in stats.items():
            out.append(ResultRow(task, ds, m, a, ad, b, n_tr, ALL, ALL, None, f"{metric}:{name}", v, None, None))
    return out


# -- running ---------------------------------------------------------------


def _graph_digest(g: Graph, labels) -> str:
    h = hashlib.sha256()
    h.update(f"{g.num_nodes}\n".encode())
    for u, v in g.sorted_edges():
        h.update(f"{u} {v}\n".encode())
    for v in sorted(labels or {}):
        h.update(f"L {v} {labels[v]}\n".encode())
    return h.hexdigest()


def load_config_dataset(token: str, cfg: ExperimentConfig):
    """(graph, labels or None, provenance dict) for a dataset token."""
    if token.startswith("sbm:"):
        s = cfg.sbm[token[4:]]
        seed = s.seed if s.seed is not None else derive_seed(cfg.seed, "sbm", token)
        g, labels = sbm_generate(SbmSpec(s.blocks, s.p_in, s.p_out, seed))
        return g, labels, {"kind": "sbm", "seed": seed, "sha256": _graph_digest(g, labels)}
    if token.startswith("file:"):
        path = Path(token[5:])
        g, ids = read_edgelist(path)
        files = {str(path): sha256_file(path)}
        labels = None
        lab = path.with_suffix(".labels")
        if lab.exists():
            labels = read_labels(lab, ids)
            files[str(lab)] = sha256_file(lab)
        return g, labels, {"kind": "file", "files": files, "sha256": _graph_digest(g, labels)}
    desc = get_descriptor(token)
    digests = fetch_dataset(desc)
    g, labels = load_dataset(desc, fetch=False)
    return g, labels, {"kind": "manifest", "files": digests, "sha256": _graph_digest(g, labels)}


@dataclass
class _Cell:
    task: str
    dataset: str
    method: str
    attack: str
    allow_disconnect: bool
    budget: float
    repetition: int

    def coords(self):
        # allow_disconnect is left out on purpose: paired constrained and
        # unconstrained cells share their random streams
        return [self.dataset, self.method, self.attack, self.budget, self.repetition]


def _peak_rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _failed_row(cell: _Cell, seed, note: str, wall=None) -> ResultRow:
    return ResultRow(
        cell.task, cell.dataset, cell.method, cell.attack, cell.allow_disconnect, cell.budget,
        None, None, cell.repetition, seed, "", None, wall, _peak_rss_mb(), "failed", note,
    )


def _run_cell(payload) -> list[ResultRow]:
    cell, cfg, g_orig, g_att, labels, embed_seed = payload
    t0 = time.perf_counter()
    rows = []
    try:
        mcfg = cfg.method_config(cell.method).replace(seed=embed_seed)
        emb = embed(g_att, mcfg)
        t_embed = time.perf_counter() - t0
        if cell.task == "node_classification":
            for n_tr in cfg.train_fractions:
                rng = np.random.default_rng(derive_seed(cfg.seed, "eval", *cell.coords(), n_tr))
                for shuffle in range(cfg.shuffles):
                    t1 = time.perf_counter()
                    (res,) = node_classification_eval(
                        g_att, labels, mcfg, n_tr, 1, rng, embedding=emb, folds=cfg.folds,
                        reg_grid=cfg.reg_grid, standardize=cfg.standardize,
                    )
                    wall = t_embed + time.perf_counter() - t1
                    for metric, value in zip(NC_METRICS, (res.f1_micro, res.f1_macro, res.mr)):
                        rows.append(ResultRow(
                            cell.task, cell.dataset, cell.method, cell.attack, cell.allow_disconnect,
                            cell.budget, n_tr, shuffle, cell.repetition, embed_seed, metric, float(value),
                            wall, _peak_rss_mb(),
                        ))
        else:
            rng = np.random.default_rng(derive_seed(cfg.seed, "eval", *cell.coords()))
            res = network_reconstruction_eval(
                g_orig, g_att, mcfg, cfg.pair_fraction, rng, embedding=emb, folds=cfg.folds,
                reg_grid=cfg.reg_grid, standardize=cfg.standardize,
            )
            wall = time.perf_counter() - t0
            for metric, value in zip(NR_METRICS, (res.auc, res.average_precision)):
                rows.append(ResultRow(
                    cell.task, cell.dataset, cell.method, cell.attack, cell.allow_disconnect, cell.budget,
                    None, 0, cell.repetition, embed_seed, metric, float(value), wall, _peak_rss_mb(),
                ))
    except Exception as exc:  # fail-soft: one bad cell must not end the sweep
        logger.error("cell %s failed:\n%s", cell, traceback.format_exc())
        return [_failed_row(cell, embed_seed, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)]
    return rows


def enumerate_cells(cfg: ExperimentConfig) -> tuple[list[_Cell], list]:
    """Grid cells in canonical order, plus the (cell, reason) pairs skipped as invalid."""
    cells, skipped = [], []
    for ds in cfg.datasets:
        for m in cfg.methods:
            for a in cfg.attacks:
                for ad in cfg.allow_disconnect:
                    for b in cfg.budgets:
                        for rep in range(cfg.repetitions):
                            c = _Cell(cfg.task, ds, m, a, ad, b, rep)
                            if ad and a in ADDITION and False in cfg.allow_disconnect:
                                skipped.append((c, "allow_disconnect has no effect on addition attacks"))
                                continue
                            cells.append(c)
    return cells, skipped


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Execute every grid cell and return raw plus aggregate rows.

    Attacked graphs are built once per (dataset, attack, connectivity, budget,
    repetition); deterministic attacks reuse one graph across repetitions,
    while embedding and evaluation are still repeated. Failed cells become
    rows with ``status = "failed"``.
    """
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    table = ResultTable()
    cells, skipped = enumerate_cells(cfg)
    for c, reason in skipped:
        logger.info("skipping %s: %s", c, reason)
        table.skipped.append((asdict(c), reason))

    data, provenance, load_errors = {}, {}, {}
    for ds in cfg.datasets:
        try:
            g, labels, prov = load_config_dataset(ds, cfg)
            data[ds] = (g, labels)
            provenance[ds] = prov
        except Exception as exc:
            logger.error("could not load %s: %s", ds, exc)
            load_errors[ds] = f"{type(exc).__name__}: {exc}"

    attacked, attack_errors, builds, seeds = {}, {}, 0, {}
    payloads, rows = [], []
    for c in cells:
        embed_seed = derive_seed(cfg.seed, "embed", *c.coords())
        if c.dataset in load_errors:
            rows.append(_failed_row(c, embed_seed, f"dataset unavailable: {load_errors[c.dataset]}"))
            continue
        g, labels = data[c.dataset]
        if c.attack in LABEL_BASED and not labels:
            reason = f"{c.attack} needs labels but {c.dataset} has none"
            table.skipped.append((asdict(c), reason))
            logger.info("skipping %s: %s", c, reason)
            continue
        if c.task == "node_classification" and not labels:
            rows.append(_failed_row(c, embed_seed, f"{c.dataset} has no labels"))
            continue
        spec_rep = 0 if c.attack in DETERMINISTIC else c.repetition
        key = (c.dataset, c.attack, c.allow_disconnect, c.budget, spec_rep)
        if key not in attacked and key not in attack_errors:
            attack_seed = derive_seed(cfg.seed, "attack", c.dataset, c.attack, c.budget, spec_rep)
            seeds["attack|" + "|".join(map(str, key))] = attack_seed
            try:
                spec = AttackSpec(
                    c.attack, c.budget, c.allow_disconnect, attack_seed, cfg.moment_mode, cfg.degree_on_original
                )
                g_att, log = apply_attack(g, labels, spec)
                attacked[key] = (g_att, log)
                builds += 1
                if log.exhausted:
                    logger.warning("%s: %s", key, log.shortfall_reason)
            except Exception as exc:
                attack_errors[key] = f"{type(exc).__name__}: {exc}"
        if key in attack_errors:
            rows.append(_failed_row(c, embed_seed, f"attack failed: {attack_errors[key]}"))
            continue
        seeds["embed|" + "|".join(map(str, c.coords()))] = embed_seed
        payloads.append((c, cfg, g, attacked[key][0], labels, embed_seed))

    if cfg.jobs > 1 and len(payloads) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for out in pool.map(_run_cell, payloads):
                rows.extend(out)
    else:
        for p in payloads:
            rows.extend(_run_cell(p))

    table.rows = rows + aggregate_rows(rows)
    table.sort()
    table.metadata = {
        "config": cfg.to_dict(),
        "resolved_config": cfg.to_ini(),
        "datasets": provenance,
        "dataset_errors": load_errors,
        "seeds": seeds,
        "attack_builds": builds,
        "attack_logs": {"|".join(map(str, k)): {"requested": v[1].requested, "achieved": v[1].achieved,
                                                "shortfall_reason": v[1].shortfall_reason}
                        for k, v in attacked.items()},
    }
    return table


# -- constrained vs unconstrained deletion ---------------------------------


@dataclass
class ConstrainedSummary:
    constrained_mean: float
    constrained_std: float
    unconstrained_mean: float
    unconstrained_std: float
    n_pairs: int
    per_attack: dict

    @property
    def gap(self) -> float:
        """Constrained minus unconstrained mean f1_micro (positive: disconnection hurts more)."""
        return self.constrained_mean - self.unconstrained_mean

    def format(self) -> str:
        return (f"{self.constrained_mean:.3f} ± {self.constrained_std:.3f} vs "
                f"{self.unconstrained_mean:.3f} ± {self.unconstrained_std:.3f}")


def compare_constrained_deletion(
    cfg: Optional[ExperimentConfig] = None,
    table: Optional[ResultTable] = None,
    attacks: Sequence[str] = ("del_rand", "del_deg"),
    metric: str = "f1_micro",
) -> ConstrainedSummary:
    """Mean ± std of ``metric`` without (constrained) and with disconnections.

    Rows are paired on every coordinate except ``allow_disconnect``; budget-0
    rows are left out since both conditions coincide there. ``std`` is the
    sample standard deviation over the paired rows.
    """
    if table is None:
        if cfg is None:
            raise ValueError("pass a config or a result table")
        table = run_experiment(cfg)
    by_key: dict = {}
    for r in table.raw:
        if r.status != "ok" or r.metric != metric or r.attack not in attacks or r.budget == 0:
            continue
        k = (r.dataset, r.method, r.attack, r.budget, r.n_tr, r.shuffle, r.repetition)
        by_key.setdefault(k, {})[bool(r.allow_disconnect)] = r.value
    if not by_key:
        raise ValueError(f"no {metric} rows for {', '.join(attacks)} at positive budgets")
    unpaired = [k for k, v in by_key.items() if len(v) != 2]
    if unpaired:
        raise ValueError(f"{len(unpaired)} unpaired runs, e.g. {unpaired[0]}: need allow_disconnect = false, true")
    keys = sorted(by_key, key=lambda k: tuple(_order(x) if x is None else x for x in k))
    con = np.array([by_key[k][False] for k in keys])
    unc = np.array([by_key[k][True] for k in keys])
    per_attack = {}
    for a in attacks:
        idx = [i for i, k in enumerate(keys) if k[2] == a]
        if idx:
            per_attack[a] = (float(con[idx].mean()), float(unc[idx].mean()))
    ddof = 1 if len(keys) > 1 else 0
    return ConstrainedSummary(
        float(con.mean()), float(con.std(ddof=ddof)), float(unc.mean()), float(unc.std(ddof=ddof)),
        len(keys), per_attack,
    )


# -- reports ---------------------------------------------------------------


def _cell_str(value) -> str:
    if value is None:
        return ""
    return _fmt_value(value)


def _parse_cell(column: str, s: str):
    if column in ("task", "dataset", "method", "attack", "metric", "status", "note"):
        return s
    if s == "":
        return None
    if s == ALL:
        return ALL
    if column == "allow_disconnect":
        return _BOOL[s]
    if column in ("shuffle", "repetition", "seed"):
        return int(s)
    return float(s)


def write_results_csv(table: ResultTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in table.rows:
            w.writerow([_cell_str(getattr(r, c)) for c in COLUMNS])


def read_results_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        return [ResultRow(*(_parse_cell(c, s) for c, s in zip(COLUMNS, rec))) for rec in reader]


def plot_rows(table: ResultTable) -> list[dict]:
    """Plot-ready means: deletions are mapped to negative x (budget) values."""
    out = []
    for r in table.aggregates:
        metric, stat = r.metric.split(":")
        if stat != "mean" or (r.n_tr is not None and r.n_tr != ALL):
            continue
        agg = {x.metric.split(":")[1]: x.value for x in table.aggregates
               if x.metric.startswith(metric + ":") and _row_key(x)[1:9] == _row_key(r)[1:9]}
        out.append({
            "task": r.task, "dataset": r.dataset, "method": r.method, "attack": r.attack,
            "allow_disconnect": r.allow_disconnect, "x": -r.budget if r.attack in DELETION else r.budget,
            "metric": metric, "mean": r.value, "ci95_low": agg.get("ci95_low"), "ci95_high": agg.get("ci95_high"),
        })
    return out


def code_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5
        )
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def emit_report(table: ResultTable, out_dir, formats=("csv", "json")) -> dict:
    """Write results.csv / results.json, plot_data.csv, resolved_config.ini and manifest.json."""
    if not table.rows:
        raise ValueError("result table is empty; refusing to write a report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        if "csv" in formats:
            paths["csv"] = out / "results.csv"
            write_results_csv(table, paths["csv"])
        if "json" in formats:
            paths["json"] = out / "results.json"
            with open(paths["json"], "w", encoding="utf-8") as fh:
                json.dump([asdict(r) for r in table.rows], fh, indent=1)
        plot = plot_rows(table)
        if plot:
            paths["plot"] = out / "plot_data.csv"
            with open(paths["plot"], "w", newline="", encoding="utf-8") as fh:
                w = csv.DictWriter(fh, fieldnames=list(plot[0]))
                w.writeheader()
                w.writerows({k: _cell_str(v) for k, v in row.items()} for row in plot)
        meta = table.metadata
        if "resolved_config" in meta:
            paths["config"] = out / "resolved_config.ini"
            paths["config"].write_text(meta["resolved_config"], encoding="utf-8")
        manifest = {
            "code_version": code_version(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "resolved_config": meta.get("config"),
            "seeds": meta.get("seeds", {}),
            "datasets": meta.get("datasets", {}),
            "dataset_errors": meta.get("dataset_errors", {}),
            "skipped": [{"cell": c, "reason": r} for c, r in table.skipped],
            "rows": len(table.rows),
            "failed_rows": len(table.failed),
        }
        paths["manifest"] = out / "manifest.json"
        with open(paths["manifest"], "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, default=str)
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return paths
