"""Evolutionary architecture search over motifs.

A controller repeatedly picks two parents by tournament, queues one mutant
and one crossover child, and appends every evaluated genotype to a
grow-only memory table. Events are written as JSON lines so a run can be
resumed.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .backend.program import compile_program
from .backend.registry import CONV_ANSATZ_KEYS, POOL_ANSATZES
from .expansion import resolve
from .motif import (FILTER_FAMILIES, Composite, Motif, Primitive, Qconv, Qdense, Qfree, Qpool,
                    drop_first_primitive, flatten, motif_from_dict, motif_to_dict,
                    replace_primitive)
from .qpr import FitnessWeights

log = logging.getLogger(__name__)

CONV_MAPPINGS = tuple(CONV_ANSATZ_KEYS.values())
MAX_RETRIES = 8


# -- genotypes -----------------------------------------------------------------------

@dataclass(frozen=True)
class Genotype:
    id: int
    motif: Motif
    fitness: float | None = None
    parents: tuple[int, ...] = ()
    op: str = "init"
    generation: int = 0
    info: dict = field(default_factory=dict, compare=False)

    def evaluated(self, fitness: float, info: dict | None = None) -> "Genotype":
        if self.fitness is not None:
            raise ValueError(f"genotype {self.id} already has a fitness")
        return replace(self, fitness=float(fitness), info={**self.info, **(info or {})})

    def to_record(self) -> dict:
        return {"id": self.id, "generation": self.generation, "op": self.op,
                "parents": list(self.parents), "fitness": self.fitness,
                "motif": motif_to_dict(self.motif), "info": self.info}

    @classmethod
    def from_record(cls, r: dict) -> "Genotype":
        return cls(r["id"], motif_from_dict(r["motif"]), r["fitness"], tuple(r["parents"]),
                   r["op"], r["generation"], r.get("info", {}))


class MemoryTable:
    """Append-only store of evaluated genotypes."""

    def __init__(self, entries: Sequence[Genotype] = ()):
        self._entries: list[Genotype] = []
        for g in entries:
            self.append(g)

    def append(self, g: Genotype) -> None:
        if g.fitness is None:
            raise ValueError("only evaluated genotypes enter the memory table")
        self._entries.append(g)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Genotype]:
        return iter(tuple(self._entries))

    def __getitem__(self, i) -> Genotype:
        return self._entries[i]

    @property
    def entries(self) -> tuple[Genotype, ...]:
        return tuple(self._entries)

    def best(self) -> Genotype:
        if not self._entries:
            raise ValueError("memory table is empty")
        return min(self._entries, key=lambda g: (g.fitness, g.id))

    def next_id(self) -> int:
        return 1 + max((g.id for g in self._entries), default=-1)


@dataclass
class SearchConfig:
    n_qubits: int = 8
    pool_size: int = 100
    pressure: float = 0.05
    generations: int = 100
    time_limit: float | None = None
    seed: int = 0
    workers: int = 1
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    train_epochs: int = 20
    max_retries: int = MAX_RETRIES

    def __post_init__(self):
        if self.pool_size < 2:
            raise ValueError("pool size must be at least 2 (crossover needs two parents)")
        if not 0 < self.pressure <= 1:
            raise ValueError("selection pressure must be in (0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


# -- validity and random primitives -----------------------------------------------------

def is_valid(motif: Motif) -> bool:
    """True when the motif resolves and compiles against the default registry."""
    try:
        compile_program(resolve(motif))
    except (ValueError, KeyError):
        return False
    return True


def _random_filter(rng: np.random.Generator, n_available: int | None) -> str:
    options = list(FILTER_FAMILIES) + (["literal"] if n_available and n_available > 1 else [])
    pick = options[rng.integers(len(options))]
    if pick != "literal":
        return pick
    while True:
        bits = "".join("01"[b] for b in rng.integers(0, 2, n_available))
        if "0" in bits and "1" in bits:
            return bits


def random_primitive(rng: np.random.Generator, n_available: int | None = None) -> Primitive:
    """Draw one operational primitive.

    Kind uniform over conv/pool/dense; conv stride 1..7; pool stride 0..3;
    filter uniform over the six families plus a random literal mask when the
    available-qubit count is known; ``qpu`` 3 with probability 0.2 for conv
    and pool (Gell-Mann mappings), otherwise 2 with a registry ansatz.
    """
    kind = ("qconv", "qpool", "qdense")[rng.integers(3)]
    wide = kind != "qdense" and rng.random() < 0.2
    if kind == "qconv":
        mapping = "gm3" if wide else CONV_MAPPINGS[rng.integers(len(CONV_MAPPINGS))]
        return Qconv(int(rng.integers(1, 8)), qpu=3 if wide else 2, mapping=mapping)
    if kind == "qpool":
        stride = int(rng.integers(0, 4))
        filt = _random_filter(rng, n_available)
        mapping = "cgm3" if wide else POOL_ANSATZES[rng.integers(len(POOL_ANSATZES))]
        return Qpool(stride, filt, qpu=3 if wide else 2, mapping=mapping)
    return Qdense(mapping=CONV_MAPPINGS[rng.integers(len(CONV_MAPPINGS))])


def _available_before(motif: Motif, index: int) -> int:
    graphs = resolve(flatten(motif)[:index])
    return len(graphs[-1].remaining)


def init_population(cfg: SearchConfig, rng: np.random.Generator | None = None) -> list[Genotype]:
    """``cfg.pool_size`` unevaluated single-primitive genotypes on ``Qfree(n)``."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    out = []
    while len(out) < cfg.pool_size:
        m = Qfree(cfg.n_qubits) + random_primitive(rng, cfg.n_qubits)
        if is_valid(m):
            out.append(Genotype(len(out), m))
    return out


# -- operators -------------------------------------------------------------------------

def tournament_select(table: MemoryTable | Sequence[Genotype], pressure: float,
                      rng: np.random.Generator) -> tuple[Genotype, Genotype]:
    pool = [g for g in table if g.fitness is not None]
    if len(pool) < 2:
        raise ValueError("tournament needs at least two evaluated genotypes")
    k = min(len(pool), max(2, math.ceil(pressure * len(pool))))
    idx = rng.choice(len(pool), size=k, replace=False)
    ranked = sorted((pool[i] for i in idx), key=lambda g: (g.fitness, g.id))
    return ranked[0], ranked[1]


def mutate_motif(motif: Motif, rng: np.random.Generator, retries: int = MAX_RETRIES
                 ) -> Motif | None:
    """Swap one non-leading primitive for a fresh random one; None if every try fails."""
    prims = flatten(motif)
    if len(prims) < 2:
        return None
    for _ in range(retries):
        pos = int(rng.integers(1, len(prims)))
        new = random_primitive(rng, _available_before(motif, pos))
        if new == prims[pos]:
            continue
        child = replace_primitive(motif, pos, new)
        if is_valid(child):
            return child
    return None


def crossover_motif(a: Motif, b: Motif) -> tuple[Motif, str]:
    """Combine tail-to-head, else interleave; returns the child and the path taken."""
    tail = drop_first_primitive(b)
    if tail is None:
        return a, "degenerate"
    joined = a + tail
    if is_valid(joined):
        return joined, "concat"
    pa, pb = flatten(a)[1:], flatten(b)[1:]
    mixed = []
    for i in range(max(len(pa), len(pb))):
        mixed += pa[i:i + 1] + pb[i:i + 1]
    head = flatten(a)[0]
    best = None
    for k in range(1, len(mixed) + 1):
        cand = Composite((head,) + tuple(mixed[:k]))
        if is_valid(cand):
            best = cand
    if best is None:
        return a, "degenerate"
    return best, "interleave"


# -- fitness functions -------------------------------------------------------------------

class ParameterCountFitness:
    """Synthetic objective: the number of trainable parameters."""

    worst = float("inf")

    def __call__(self, motif: Motif) -> dict:
        n = compile_program(resolve(motif)).n_params
        return {"fitness": float(n), "n_params": n}


class QPRFitness:
    """Train on the ``h2 = 0`` line, then score the tagged regions."""

    def __init__(self, n_spins: int, weights: FitnessWeights = FitnessWeights(),
                 regions=None, epochs: int = 20, learning_rate: float = 0.1, seed: int = 0,
                 cache_dir=None):
        self.n_spins = n_spins
        self.weights = weights
        self.regions = regions
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.cache_dir = cache_dir
        self._cache = None

    @property
    def worst(self) -> float:
        return self.weights.worst

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_cache"] = None
        return state

    def __call__(self, motif: Motif) -> dict:
        from .qpr import GroundStateCache, Regions, evaluate_regions, train_line
        from .training import TrainConfig

        if self._cache is None:
            self._cache = GroundStateCache(self.cache_dir)
        prog = compile_program(resolve(motif), num_qubits=self.n_spins)
        cfg = TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, seed=self.seed)
        res, acc = train_line(prog, self.n_spins, cfg=cfg, cache=self._cache)
        rep = evaluate_regions(prog, res.params, self.n_spins,
                               self.regions or Regions.default(), self.weights, self._cache)
        return {**rep.as_dict(), "train_accuracy": acc}


def _evaluate(fitness_fn, motif: Motif) -> tuple[float, dict]:
    try:
        out = fitness_fn(motif)
    except (ValueError, FloatingPointError, KeyError) as exc:
        worst = getattr(fitness_fn, "worst", float("inf"))
        return worst, {"error": str(exc)}
    if isinstance(out, dict):
        return float(out["fitness"]), out
    if hasattr(out, "fitness"):
        return float(out.fitness), getattr(out, "as_dict", lambda: {})()
    return float(out), {}


# -- controller -------------------------------------------------------------------------

@dataclass
class SearchResult:
    table: MemoryTable
    best: Genotype
    best_curve: list[float]
    skips: int


class EventLog:
    """JSON-lines event stream; ``None`` path keeps everything in memory."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.events: list[dict] = []

    def write(self, event: dict) -> None:
        self.events.append(event)
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(event) + "\n")

    @staticmethod
    def read(path) -> list[dict]:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


def _restore(events: list[dict]):
    checkpoints = [e for e in events if e["event"] == "generation_end"]
    if not checkpoints:
        return None
    last = checkpoints[-1]
    done = last["generation"]
    records = {}
    for e in events:
        if e["event"] == "genotype" and e["generation"] <= done:
            records[e["id"]] = e
    table = MemoryTable([Genotype.from_record(records[i]) for i in sorted(records)])
    curve = [c["best"] for c in checkpoints]
    return table, done, last["rng_state"], curve, last.get("skips", 0)


def run_search(cfg: SearchConfig, fitness_fn: Callable[[Motif], object], *,
               log_path=None, resume: bool = False) -> SearchResult:
    """Evolve architectures until ``cfg.generations`` or ``cfg.time_limit`` is reached."""
    rng = np.random.default_rng(cfg.seed)
    events = EventLog(log_path)
    t0 = time.perf_counter()
    executor = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def evaluate_all(pending: list[Genotype], generation: int) -> list[Genotype]:
        motifs = [g.motif for g in pending]
        if executor:
            results = list(executor.map(_evaluate, [fitness_fn] * len(motifs), motifs))
        else:
            results = [_evaluate(fitness_fn, m) for m in motifs]
        done = []
        for g, (f, info) in zip(pending, results):
            g = g.evaluated(f, info)
            done.append(g)
            events.write({"event": "genotype", "wall_time": time.perf_counter() - t0,
                          **g.to_record()})
        return done

    restored = None
    if resume and log_path and Path(log_path).exists():
        restored = _restore(EventLog.read(log_path))
    try:
        if restored:
            table, start_gen, state, curve, skips = restored
            rng.bit_generator.state = state
            events.write({"event": "resume", "generation": start_gen})
        else:
            table = MemoryTable()
            for g in evaluate_all(init_population(cfg, rng), 0):
                table.append(g)
            start_gen, skips = 0, 0
            curve = [table.best().fitness]
            events.write({"event": "generation_end", "generation": 0, "best": curve[-1],
                          "best_id": table.best().id, "size": len(table), "skips": 0,
                          "rng_state": rng.bit_generator.state})
        for gen in range(start_gen + 1, cfg.generations + 1):
            if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
                break
            g1, g2 = tournament_select(table, cfg.pressure, rng)
            pending = []
            nid = table.next_id()
            mutant = mutate_motif(g1.motif, rng, cfg.max_retries)
            if mutant is None:
                skips += 1
                log.info("generation %d: mutation of %d skipped", gen, g1.id)
                events.write({"event": "skip", "generation": gen, "parent": g1.id})
            else:
                pending.append(Genotype(nid, mutant, parents=(g1.id,), op="mutate",
                                        generation=gen))
                nid += 1
            child, how = crossover_motif(g1.motif, g2.motif)
            pending.append(Genotype(nid, child, parents=(g1.id, g2.id), op="crossover",
                                    generation=gen, info={"path": how}))
            for g in evaluate_all(pending, gen):
                table.append(g)
            best = table.best()
            curve.append(best.fitness)
            events.write({"event": "generation_end", "generation": gen, "best": best.fitness,
                          "best_id": best.id, "size": len(table), "skips": skips,
                          "rng_state": rng.bit_generator.state})
    finally:
        if executor:
            executor.shutdown()
    return SearchResult(table, table.best(), curve, skips)
