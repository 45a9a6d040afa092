"""Dataset registry, cached download, loading with a statistics gate, and SBM graphs.

The cache directory defaults to ``~/.cache/nerobust`` and can be moved with the
``NEROBUST_DATA_DIR`` environment variable. Each dataset lives in its own
sub-directory together with pinned checksums and the node-id mapping.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import shutil
import time
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from filelock import FileLock

from .graph import Graph, LabelMap, graph_stats, largest_component, read_edgelist, read_labels

logger = logging.getLogger(__name__)

CACHE_ENV = "NEROBUST_DATA_DIR"
RETRIES = 3


class DatasetError(RuntimeError):
    pass


class DatasetUnavailable(DatasetError):
    pass


class ChecksumMismatch(DatasetError):
    pass


class StatsGateError(DatasetError):
    pass


@dataclass
class DataFile:
    name: str
    url: Optional[str] = None
    sha256: Optional[str] = None


@dataclass
class DatasetDescriptor:
    name: str
    format: str
    files: list
    expected: dict = field(default_factory=dict)
    largest_component: bool = False
    description: str = ""
    cache_dir: Optional[Path] = None

    @property
    def path(self) -> Path:
        return Path(self.cache_dir or default_cache_dir()) / self.name


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "nerobust")


def load_manifest() -> dict:
    return json.loads(resources.files("nerobust").joinpath("datasets.json").read_text(encoding="utf-8"))


def dataset_names() -> list[str]:
    return sorted(load_manifest()["datasets"])


def get_descriptor(name: str, cache_dir=None) -> DatasetDescriptor:
    entries = load_manifest()["datasets"]
    if name not in entries:
        raise DatasetError(f"unknown dataset {name!r}; known: {sorted(entries)}")
    e = entries[name]
    return DatasetDescriptor(
        name=name,
        format=e["format"],
        files=[DataFile(**f) for f in e["files"]],
        expected=e.get("expected", {}),
        largest_component=e.get("largest_component", False),
        description=e.get("description", ""),
        cache_dir=Path(cache_dir) if cache_dir else None,
    )


# -- fetching --------------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _download(url: str, dest: Path, timeout: float = 60.0) -> None:
    last = None
    for attempt in range(RETRIES):
        try:
            tmp = dest.with_suffix(dest.suffix + ".part")
            with urllib.request.urlopen(url, timeout=timeout) as resp, open(tmp, "wb") as out:
                shutil.copyfileobj(resp, out)
            tmp.replace(dest)
            return
        except OSError as exc:  # URLError is an OSError
            last = exc
            logger.warning("download of %s failed (attempt %d/%d): %s", url, attempt + 1, RETRIES, exc)
            if attempt + 1 < RETRIES:
                time.sleep(min(2**attempt, 5))
    raise DatasetUnavailable(f"could not download {url} after {RETRIES} attempts: {last}")


def _verify(desc: DatasetDescriptor, f: DataFile, path: Path) -> str:
    digest = sha256_file(path)
    pin = path.with_name(path.name + ".sha256")
    expected = f.sha256 or (pin.read_text().strip() if pin.exists() else None)
    if expected is None:
        pin.write_text(digest + "\n")
        logger.info("%s: pinned sha256 %s for %s", desc.name, digest, f.name)
    elif digest != expected:
        raise ChecksumMismatch(f"{desc.name}/{f.name}: sha256 mismatch, expected {expected}, found {digest}")
    return digest


def fetch_dataset(desc: DatasetDescriptor | str, download=_download) -> dict:
    """Make sure every file of the dataset is cached and verified.

    Returns ``{file name: sha256}``. Cached files are re-verified but never
    downloaded again.
    """
    if isinstance(desc, str):
        desc = get_descriptor(desc)
    root = desc.path
    root.mkdir(parents=True, exist_ok=True)
    digests = {}
    with FileLock(str(root) + ".lock"):
        for f in desc.files:
            path = root / f.name
            if not path.exists():
                if not f.url:
                    raise DatasetUnavailable(
                        f"{desc.name}: {f.name} has no download URL; place it at {path}"
                    )
                download(f.url, path)
            digests[f.name] = _verify(desc, f, path)
    return digests


# -- loading ---------------------------------------------------------------


def _load_npz(path: Path) -> tuple[Graph, Optional[np.ndarray]]:
    with np.load(path, allow_pickle=True) as z:
        if "adj_data" in z:
            adj = sp.csr_matrix((z["adj_data"], z["adj_indices"], z["adj_indptr"]), shape=tuple(z["adj_shape"]))
        elif "adj_matrix.data" in z:
            adj = sp.csr_matrix(
                (z["adj_matrix.data"], z["adj_matrix.indices"], z["adj_matrix.indptr"]),
                shape=tuple(z["adj_matrix.shape"]),
            )
        else:
            raise DatasetError(f"{path}: no adjacency arrays found")
        labels = None
        for key in ("labels", "label"):
            if key in z:
                labels = np.asarray(z[key]).ravel()
                break
    return Graph.from_scipy(adj), labels


def _matches_printed(value: float, printed: float, tol: float = 0.005) -> bool:
    """True if ``value`` is within ``tol`` of a 2-decimal printed figure, or truncates to it."""
    if abs(value - printed) <= tol + 1e-12:
        return True
    return math.trunc(value * 100) / 100 == printed


def check_stats(desc: DatasetDescriptor, g: Graph, labels: Optional[LabelMap]) -> None:
    exp = desc.expected
    stats = graph_stats(g, labels)
    problems = []
    for key, got in (("nodes", stats.num_nodes), ("edges", stats.num_edges)):
        if exp.get(key) is not None and got != exp[key]:
            problems.append(f"{key}: expected {exp[key]}, got {got}")
    if exp.get("labels") is not None:
        got = labels.num_classes if labels else 0
        if got != exp["labels"]:
            problems.append(f"labels: expected {exp['labels']}, got {got}")
    if exp.get("avg_degree") is not None and not _matches_printed(stats.avg_degree, exp["avg_degree"]):
        problems.append(f"avg_degree: expected {exp['avg_degree']}, got {stats.avg_degree:.4f}")
    if exp.get("assortativity") is not None:
        r = stats.assortativity
        if r is None or not _matches_printed(r, exp["assortativity"]):
            problems.append(f"assortativity: expected {exp['assortativity']}, got {r}")
    if problems:
        raise StatsGateError(f"{desc.name} failed the statistics gate: " + "; ".join(problems))


def load_dataset(desc: DatasetDescriptor | str, fetch: bool = True, gate: bool = True):
    """Load a registered dataset as ``(Graph, LabelMap or None)``.

    Node ids are remapped to ``0..N-1`` (after largest-component extraction
    when the descriptor asks for it); the mapping to the source ids is written
    to ``idmap.json`` next to the cached files.
    """
    if isinstance(desc, str):
        desc = get_descriptor(desc)
    if fetch:
        fetch_dataset(desc)
    root = desc.path
    first = root / desc.files[0].name
    if not first.exists():
        raise DatasetUnavailable(f"{desc.name}: {first} not found")

    labels = None
    if desc.format == "npz":
        g, lab_arr = _load_npz(first)
        source_ids = list(range(g.num_nodes))
        if lab_arr is not None and len(lab_arr) == g.num_nodes:
            labels = LabelMap.from_array(lab_arr)
    elif desc.format == "edgelist":
        g, ids = read_edgelist(first)
        source_ids = [None] * len(ids)
        for tok, i in ids.items():
            source_ids[i] = tok
        if len(desc.files) > 1:
            labels = read_labels(root / desc.files[1].name, ids)
    else:
        raise DatasetError(f"unsupported dataset format {desc.format!r}")

    if desc.largest_component:
        g, keep = largest_component(g)
        source_ids = [source_ids[i] for i in keep]
        if labels is not None:
            labels = LabelMap({new: labels[int(old)] for new, old in enumerate(keep) if int(old) in labels})
    with open(root / "idmap.json", "w", encoding="utf-8") as fh:
        json.dump({"source_ids": [str(s) for s in source_ids]}, fh)
    if gate:
        check_stats(desc, g, labels)
    return g, labels


# -- synthetic graphs ------------------------------------------------------


@dataclass
class SbmSpec:
    block_sizes: Sequence[int]
    p_in: float
    p_out: float
    seed: int = 0

    def __post_init__(self):
        for p in (self.p_in, self.p_out):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"SBM probabilities must lie in [0, 1], got {p}")
        if any(b < 0 for b in self.block_sizes) or sum(self.block_sizes) < 2:
            raise ValueError("SBM needs non-negative block sizes with at least 2 nodes in total")


def sbm_generate(spec: SbmSpec, rng: Optional[np.random.Generator] = None) -> tuple[Graph, LabelMap]:
    """Planted-partition SBM: each pair is an edge with p_in (same block) or p_out."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    sizes = list(spec.block_sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = len(block)
    g = Graph(n)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], spec.p_in, spec.p_out)
    hit = rng.random(len(iu)) < prob
    for u, v in zip(iu[hit].tolist(), ju[hit].tolist()):
        g.adj[u].add(v)
        g.adj[v].add(u)
        g.edges.add((u, v))
    return g, LabelMap.from_array(block)
