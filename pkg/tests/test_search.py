import json
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motiq.expansion import resolve
from motiq.motif import Qconv, Qfree, Qpool, flatten
from motiq.qpr import FitnessWeights, Regions
from motiq.search import (EventLog, Genotype, MemoryTable, ParameterCountFitness, QPRFitness,
                          SearchConfig, crossover_motif, init_population, is_valid,
                          mutate_motif, random_primitive, run_search, tournament_select)


def random_motif(seed, n=8, max_len=4):
    rng = np.random.default_rng(seed)
    m = Qfree(n)
    for _ in range(int(rng.integers(1, max_len + 1))):
        cand = m + random_primitive(rng, len(resolve(m)[-1].remaining))
        if is_valid(cand):
            m = cand
    return m


def table_of(fitnesses):
    return MemoryTable([Genotype(i, Qfree(2) + Qconv(1), f) for i, f in enumerate(fitnesses)])


# -- genotypes and the memory table -------------------------------------------------------------

def test_genotype_fitness_set_once():
    g = Genotype(0, Qfree(2)).evaluated(1.5, {"a": 1})
    assert g.fitness == 1.5 and g.info == {"a": 1}
    with pytest.raises(ValueError):
        g.evaluated(2.0)
    assert Genotype.from_record(json.loads(json.dumps(g.to_record()))) == g


def test_table_rejects_unevaluated_and_breaks_ties_by_id():
    t = table_of([3.0, 1.0, 1.0])
    assert t.best().id == 1 and t.next_id() == 3
    with pytest.raises(ValueError):
        t.append(Genotype(3, Qfree(2)))
    with pytest.raises(ValueError):
        MemoryTable().best()


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(pool_size=1)
    with pytest.raises(ValueError):
        SearchConfig(pressure=0)
    with pytest.raises(ValueError):
        SearchConfig(generations=-1)


# -- selection --------------------------------------------------------------------------------

def test_tournament_small_pressure_still_samples_two():
    t = table_of([5.0, 4.0, 3.0])
    rng = np.random.default_rng(0)
    seen = {tuple(g.id for g in tournament_select(t, 0.01, rng)) for _ in range(200)}
    assert seen == {(1, 0), (2, 0), (2, 1)}


def test_tournament_full_pressure_returns_top_two():
    t = table_of([0.3, 0.1, 0.9, 0.2])
    for seed in range(20):
        a, b = tournament_select(t, 1.0, np.random.default_rng(seed))
        assert (a.id, b.id) == (1, 3)


def test_tournament_needs_two():
    with pytest.raises(ValueError):
        tournament_select(table_of([1.0]), 0.5, np.random.default_rng(0))


def test_tournament_win_frequencies_follow_rank():
    n, pressure, trials = 20, 0.2, 10_000
    k = 4
    t = table_of(list(np.arange(n, dtype=float)))
    rng = np.random.default_rng(11)
    counts = np.zeros(n)
    for _ in range(trials):
        counts[tournament_select(t, pressure, rng)[0].id] += 1
    # rank r (0 = best) wins when it is sampled and nobody better is
    expected = np.array([comb(n - 1 - r, k - 1) / comb(n, k) for r in range(n)])
    assert abs(expected.sum() - 1) < 1e-12
    sigma = np.sqrt(trials * expected * (1 - expected)) + 1e-9
    assert np.all(np.abs(counts - trials * expected) <= 5 * sigma)
    assert np.all(np.diff(expected) <= 0)
    assert counts[0] > counts[5] > counts[10] and counts[-1] == 0


# -- variation operators -----------------------------------------------------------------------

@settings(max_examples=2000, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(0, 10 ** 9))
def test_mutation_keeps_qfree_and_changes_one_position(mseed, rseed):
    m = random_motif(mseed)
    child = mutate_motif(m, np.random.default_rng(rseed))
    if child is None:
        return
    a, b = flatten(m), flatten(child)
    assert a[0] == b[0] and len(a) == len(b)
    assert sum(x != y for x, y in zip(a, b)) == 1
    assert is_valid(child)


def test_mutation_of_bare_qfree_skips():
    assert mutate_motif(Qfree(8), np.random.default_rng(0)) is None


def test_crossover_concat_path():
    a = Qfree(8) + Qconv(1)
    b = Qfree(8) + Qpool(0, "right")
    child, how = crossover_motif(a, b)
    assert how == "concat" and flatten(child) == [Qfree(8), Qconv(1), Qpool(0, "right")]


def test_crossover_interleave_path():
    pool = Qpool(0, "right")
    a = Qfree(8) + pool + pool + pool  # leaves one qubit, so b's leading pool cannot follow
    b = Qfree(8) + pool + Qconv(1)
    assert not is_valid(a + pool + Qconv(1))
    child, how = crossover_motif(a, b)
    assert how == "interleave" and is_valid(child)
    assert flatten(child) == [Qfree(8), pool, pool, pool, Qconv(1)]


def test_crossover_degenerate_when_b_is_bare():
    a = Qfree(8) + Qconv(1)
    assert crossover_motif(a, Qfree(8)) == (a, "degenerate")


@settings(max_examples=10_000, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(0, 10 ** 9))
def test_crossover_always_resolves(s1, s2):
    child, how = crossover_motif(random_motif(s1, max_len=3), random_motif(s2, max_len=3))
    assert how in ("concat", "interleave", "degenerate")
    resolve(child)


def test_random_primitive_distribution():
    rng = np.random.default_rng(0)
    prims = [random_primitive(rng, 8) for _ in range(3000)]
    kinds = {k: sum(p.kind == k for p in prims) for k in ("qconv", "qpool", "qdense")}
    assert all(900 < v < 1100 for v in kinds.values())
    wide = [p for p in prims if p.qpu == 3]
    assert all(p.mapping in ("gm3", "cgm3") for p in wide)
    assert 0.15 < len(wide) / (kinds["qconv"] + kinds["qpool"]) < 0.25
    assert all(1 <= p.stride <= 7 for p in prims if p.kind == "qconv")
    assert all(0 <= p.stride <= 3 for p in prims if p.kind == "qpool")


def test_init_population_valid_and_sized():
    pop = init_population(SearchConfig(pool_size=12, seed=2))
    assert len(pop) == 12 and [g.id for g in pop] == list(range(12))
    assert all(is_valid(g.motif) and len(flatten(g.motif)) == 2 for g in pop)


# -- the controller ----------------------------------------------------------------------------

def small_cfg(**kw):
    base = dict(n_qubits=8, pool_size=6, pressure=0.5, generations=12, seed=3)
    return SearchConfig(**{**base, **kw})


def test_run_is_deterministic():
    a = run_search(small_cfg(), ParameterCountFitness())
    b = run_search(small_cfg(), ParameterCountFitness())
    assert [g.to_record() for g in a.table] == [g.to_record() for g in b.table]


def test_table_size_and_monotone_best():
    cfg = small_cfg(generations=20)
    res = run_search(cfg, ParameterCountFitness())
    assert len(res.table) == cfg.pool_size + 2 * cfg.generations - res.skips
    assert len(res.best_curve) == cfg.generations + 1
    assert all(b <= a for a, b in zip(res.best_curve, res.best_curve[1:]))
    assert res.best.fitness == min(g.fitness for g in res.table)
    ids = [g.id for g in res.table]
    assert ids == sorted(ids) and len(set(ids)) == len(ids)


def test_zero_generations_evaluates_pool_only():
    res = run_search(small_cfg(generations=0), ParameterCountFitness())
    assert len(res.table) == 6 and len(res.best_curve) == 1


def test_failed_evaluation_gets_worst_fitness():
    def flaky(motif):
        if len(flatten(motif)) > 2:
            raise FloatingPointError("diverged")
        return {"fitness": 1.0}
    flaky.worst = 99.0
    res = run_search(small_cfg(generations=3), flaky)
    later = [g for g in res.table if g.generation > 0 and len(flatten(g.motif)) > 2]
    assert later and all(g.fitness == 99.0 and "error" in g.info for g in later)


def test_event_log_and_resume(tmp_path):
    full = run_search(small_cfg(generations=10), ParameterCountFitness())
    log = tmp_path / "events.jsonl"
    run_search(small_cfg(generations=5), ParameterCountFitness(), log_path=log)
    events = EventLog.read(log)
    assert sum(e["event"] == "generation_end" for e in events) == 6
    resumed = run_search(small_cfg(generations=10), ParameterCountFitness(), log_path=log,
                         resume=True)
    assert [g.to_record() for g in resumed.table] == [g.to_record() for g in full.table]
    assert resumed.best_curve == full.best_curve
    assert any(e["event"] == "resume" for e in EventLog.read(log))


def test_resume_ignores_partial_generation(tmp_path):
    log = tmp_path / "events.jsonl"
    run_search(small_cfg(generations=4), ParameterCountFitness(), log_path=log)
    lines = log.read_text().splitlines()
    # drop the last checkpoint so generation 4 looks interrupted mid-way
    cut = max(i for i, line in enumerate(lines) if '"generation_end"' in line)
    log.write_text("\n".join(lines[:cut]) + "\n")
    resumed = run_search(small_cfg(generations=4), ParameterCountFitness(), log_path=log,
                         resume=True)
    fresh = run_search(small_cfg(generations=4), ParameterCountFitness())
    assert [g.to_record() for g in resumed.table] == [g.to_record() for g in fresh.table]


def test_time_limit_stops_early():
    res = run_search(small_cfg(generations=10_000, time_limit=0.5), ParameterCountFitness())
    assert len(res.best_curve) < 10_001


def test_parallel_matches_serial():
    a = run_search(small_cfg(workers=2, generations=4), ParameterCountFitness())
    b = run_search(small_cfg(generations=4), ParameterCountFitness())
    assert [g.to_record() for g in a.table] == [g.to_record() for g in b.table]


def test_qpr_fitness_small_chain(tmp_path):
    fn = QPRFitness(4, FitnessWeights(), Regions.default(2), epochs=2, cache_dir=tmp_path)
    out = fn(Qfree(4) + Qconv(1) + Qpool(0, "right"))
    assert 0 <= out["fitness"] <= fn.worst and 0 <= out["train_accuracy"] <= 1
    assert out["n_params"] == 4
