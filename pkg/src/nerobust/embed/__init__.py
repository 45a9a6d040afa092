"""Unsupervised node embeddings behind a single ``embed(graph, config)`` call."""

from __future__ import annotations

import os
import shlex
import struct
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from ..graph import Graph, write_edgelist
from .factorization import grarep_embed, hope_embed, netmf_embed, spectral_radius, truncated_svd
from .skipgram import skipgram_train
from .walks import WalkCorpus, generate_walks

__all__ = [
    "Embedding",
    "MethodConfig",
    "WalkCorpus",
    "embed",
    "generate_walks",
    "grarep_embed",
    "hope_embed",
    "netmf_embed",
    "read_embedding",
    "read_embedding_binary",
    "register_method",
    "skipgram_train",
    "spectral_radius",
    "truncated_svd",
    "write_embedding",
    "write_embedding_binary",
]

BUILTIN_METHODS = ("deepwalk", "node2vec", "hope", "netmf", "grarep")


@dataclass
class MethodConfig:
    method: str = "deepwalk"
    d: int = 128
    num_walks: int = 10
    walk_length: int = 80
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    p: float = 1.0
    q: float = 1.0
    katz_beta: Optional[float] = None  # None -> 0.5 / spectral radius
    netmf_window: int = 10
    netmf_negatives: float = 1.0
    grarep_K: int = 4
    seed: int = 0
    # external executables: "{edgelist} {output} {dim}" placeholders
    command: Optional[str] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {self.d}")
        if self.method == "grarep" and self.d % self.grarep_K:
            raise ValueError(f"grarep_K={self.grarep_K} must divide d={self.d}")

    @classmethod
    def keys(cls) -> set:
        return {f.name for f in fields(cls)}

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "MethodConfig":
        return MethodConfig(**{**asdict(self), **changes})


@dataclass
class Embedding:
    """N x d matrix; row i is node i."""

    matrix: np.ndarray
    method: str = ""
    config: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError(f"{self.method or 'embedding'} produced non-finite values")


def _walk_method(g: Graph, cfg: MethodConfig, p: float, q: float) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    corpus = generate_walks(g, cfg.num_walks, cfg.walk_length, p, q, rng)
    return skipgram_train(corpus, cfg.d, cfg.window, cfg.negatives, cfg.epochs, cfg.lr, rng)


def _external(g: Graph, cfg: MethodConfig) -> np.ndarray:
    if not cfg.command:
        raise ValueError("external method needs MethodConfig.command")
    with tempfile.TemporaryDirectory() as tmp:
        edges = os.path.join(tmp, "graph.edgelist")
        out = os.path.join(tmp, "embedding.txt")
        write_edgelist(g, edges)
        cmd = [a.format(edgelist=edges, output=out, dim=cfg.d) for a in shlex.split(cfg.command)]
        subprocess.run(cmd, check=True, capture_output=True)
        emb = read_embedding(out)
    if emb.num_nodes != g.num_nodes:
        raise ValueError(f"external method returned {emb.num_nodes} rows for {g.num_nodes} nodes")
    return emb.matrix


_REGISTRY: dict[str, Callable[[Graph, MethodConfig], np.ndarray]] = {
    "deepwalk": lambda g, c: _walk_method(g, c, 1.0, 1.0),
    "node2vec": lambda g, c: _walk_method(g, c, c.p, c.q),
    "hope": lambda g, c: hope_embed(g, c.d, c.katz_beta),
    "netmf": lambda g, c: netmf_embed(g, c.d, c.netmf_window, c.netmf_negatives),
    "grarep": lambda g, c: grarep_embed(g, c.d, c.grarep_K),
    "external": _external,
}


def register_method(name: str, fn: Callable[[Graph, MethodConfig], np.ndarray]) -> None:
    """Plug in another embedding method; ``fn(graph, config)`` returns an N x d array."""
    _REGISTRY[name] = fn


def available_methods() -> list[str]:
    return sorted(_REGISTRY)


def embed(g: Graph, cfg: MethodConfig) -> Embedding:
    try:
        fn = _REGISTRY[cfg.method]
    except KeyError:
        raise ValueError(f"unknown embedding method {cfg.method!r}; known: {available_methods()}") from None
    mat = fn(g, cfg)
    if mat.shape != (g.num_nodes, cfg.d):
        raise ValueError(f"{cfg.method} returned shape {mat.shape}, expected {(g.num_nodes, cfg.d)}")
    return Embedding(mat, cfg.method, cfg.to_dict())


# -- serialization ---------------------------------------------------------


def write_embedding(emb: Embedding, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{emb.num_nodes} {emb.d}\n")
        for i, row in enumerate(emb.matrix):
            fh.write(f"{i} " + " ".join(repr(float(x)) for x in row) + "\n")


def read_embedding(path) -> Embedding:
    with open(path, encoding="utf-8") as fh:
        n, d = (int(x) for x in fh.readline().split())
        mat = np.zeros((n, d))
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if len(tok) != d + 1:
                raise ValueError(f"{path}: expected {d} values for node {tok[0]}")
            mat[int(tok[0])] = [float(x) for x in tok[1:]]
    return Embedding(mat)


def write_embedding_binary(emb: Embedding, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", emb.num_nodes, emb.d))
        fh.write(np.ascontiguousarray(emb.matrix, dtype="<f8").tobytes())


def read_embedding_binary(path) -> Embedding:
    with open(path, "rb") as fh:
        n, d = struct.unpack("<qq", fh.read(16))
        mat = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d)
    return Embedding(mat.astype(float))
