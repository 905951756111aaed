"""Acceptance criteria, one test per criterion.

Each test logs a PASS/FAIL line that is repeated in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from driverloc.classify import PROMPT_TEXTS, parse_answer
from driverloc.cli import main
from driverloc.config import DetectionConfig
from driverloc.evaluate import (Activity, GroundTruth, match_and_score, overlap_score,
                                within_tolerance)
from driverloc.graph import graph_stats, kmst, pairwise_distances
from driverloc.intervals import ActivityInterval
from driverloc.keypoints import View
from driverloc.scan import Scanner, null_moments, scan
from driverloc.synthetic import gen_null, gen_planted, random_scenario, write_scenario
from oracles import all_spanning_trees, brute_force_all, mc_moments, min_spanning_weight

FIX = Path(__file__).parent / "fixtures"
pytestmark = pytest.mark.slow


def test_a1_scan_matches_brute_force(record):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    bad = []
    worst = 0.0
    for case in range(100):
        n = int(rng.integers(10, 201))
        k = int(rng.integers(1, 8))
        d = int(rng.integers(1, 11))
        g = kmst(pairwise_distances(rng.standard_normal((n, d))), k)
        l0 = int(rng.integers(2, n // 2))
        l1 = int(rng.integers(l0, n - 1))
        oracle = brute_force_all(g, n, l0, l1)
        for kind in "owgm":
            res = scan(g, n, l0, l1, kind)
            v, t1, t2 = oracle[kind]
            worst = max(worst, abs(res.value - v))
            if (res.t1, res.t2) != (t1, t2) or abs(res.value - v) > 1e-9:
                bad.append((case, kind, (res.t1, res.t2, res.value), (t1, t2, v)))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    record("A1", "scan equals brute force (100 graphs, 4 stats)", ok,
           f"{len(bad)} mismatches, max |diff| {worst:.1e}, {elapsed:.0f} s")
    assert not bad, bad[:3]
    assert elapsed < 120


def test_a2_moments_match_monte_carlo(record):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    fails = []
    for case in range(20):
        n = int(rng.integers(8, 81))
        k = int(rng.integers(1, 6))
        g = kmst(pairwise_distances(rng.standard_normal((n, 3))), k)
        n1 = int(rng.integers(2, n - 1))
        mo = null_moments(graph_stats(g), n, n1)
        exact = np.array([mo.mean_r1, mo.mean_r2, mo.var_r1, mo.var_r2, mo.cov_r1_r2])
        est, se = mc_moments(g, n, n1, 100_000, seed=1000 + case)
        z = np.abs(est - exact) / np.where(se > 0, se, np.inf)
        worst = max(worst, float(z.max()))
        if (z > 3).any():
            fails.append((case, n, n1, z.round(2).tolist()))
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 300
    record("A2", "null moments within 3 MC s.e. (20 configs, 1e5 draws)", ok,
           f"max |z| {worst:.2f}, {elapsed:.0f} s")
    assert not fails, fails
    assert elapsed < 300


def test_a3_null_calibration(record):
    cfg = DetectionConfig()
    l0, l1 = cfg.interval_bounds(600)
    t0 = time.perf_counter()
    ps = []
    for w in range(200):
        x = gen_null(600, 10, seed=np.random.SeedSequence([3, w]))
        g = kmst(pairwise_distances(x), cfg.k)
        sc = Scanner(g, 600, l0, l1, cfg.stat)
        ps.append(sc.permutation_pvalue(100, seed=np.random.SeedSequence([4, w])))
    frac = float(np.mean(np.array(ps) < 0.05))
    elapsed = time.perf_counter() - t0
    ok = 0.01 <= frac <= 0.12 and elapsed < 600
    record("A3", "null calibration, P(p < 0.05) in [0.01, 0.12]", ok,
           f"{frac:.3f} over 200 windows, {elapsed:.0f} s")
    assert 0.01 <= frac <= 0.12
    assert elapsed < 600


def test_a4_planted_recovery(record):
    cfg = DetectionConfig()
    l0, l1 = cfg.interval_bounds(600)
    hits = 0
    for seed in range(50):
        x = gen_planted(600, 10, 200, 260, 1.5, seed=seed)
        res = scan(kmst(pairwise_distances(x), cfg.k), 600, l0, l1, "m")
        hits += abs(res.t1 - 200) <= 30 and abs(res.t2 - 260) <= 30
    ok = hits >= 40
    record("A4", "planted (200,260] recovered within +-30 in >= 80% of 50 seeds", ok,
           f"{hits}/50")
    assert ok


def _kmst_instances():
    rng = np.random.default_rng(99)
    for _ in range(300):
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, n + 1))
        yield n, k, pairwise_distances(rng.random((n, 2)))


def test_a5_kmst_trees_and_minimality(record):
    trees_ok = minimal_ok = 0
    total = 0
    enum = {n: all_spanning_trees(n) for n in range(3, 9)}
    for n, k, dm in _kmst_instances():
        total += 1
        g = kmst(dm, k)
        seen = set()
        good = True
        spanning = g.trees if g.complete else g.trees[:-1]
        for t in spanning:
            es = {tuple(e) for e in t.tolist()}
            parent = list(range(n))

            def find(i):
                while parent[i] != i:
                    i = parent[i]
                return i

            for i, j in es:
                parent[find(i)] = find(j)
            good &= len(es) == n - 1 and len({find(i) for i in range(n)}) == 1
            good &= not (es & seen)
            seen |= es
        if not g.complete:
            good &= not ({tuple(e) for e in g.trees[-1].tolist()} & seen)
        trees_ok += good
        t1 = g.trees[0]
        w = dm[t1[:, 0], t1[:, 1]].sum()
        minimal_ok += bool(np.isclose(w, min_spanning_weight(dm, enum[n]), rtol=1e-12))
    ok = trees_ok == total and minimal_ok == total
    record("A5a", "k-MST trees edge-disjoint spanning, T1 minimal (n <= 8)", ok,
           f"{trees_ok}/{total} disjoint spanning, {minimal_ok}/{total} minimal")
    assert ok


def test_a5_kmst_union_size(record):
    """Union size equals min(k(n-1), n(n-1)/2) on generic instances."""
    total = 0
    misses = []
    for n, k, dm in _kmst_instances():
        total += 1
        g = kmst(dm, k)
        want = min(k * (n - 1), n * (n - 1) // 2)
        if g.m != want:
            misses.append((n, k, g.m, want))
    ok = not misses
    record("A5b", "k-MST union size = min(k(n-1), n(n-1)/2)", ok,
           f"{total - len(misses)}/{total} instances" + (f", e.g. n,k={misses[0][:2]} gives "
                                                         f"{misses[0][2]} not {misses[0][3]}"
                                                         if misses else ""))
    assert ok, f"{len(misses)} of {total} instances short of the union size"


def test_a6_metric_fixtures(record):
    os1 = overlap_score((236, 241), (237.3, 240))
    os2 = overlap_score((236, 241), (233.9, 236.067))
    tol = within_tolerance((236, 241), (237.3, 240)) and within_tolerance((236, 241), (233.9, 236.067))
    gt = GroundTruth("v", [Activity(1, 20 * i, 20 * i + 8) for i in range(450)])
    preds = [ActivityInterval("v", View.FUSED, 20 * i + 1, 20 * i + 9) for i in range(223)]
    acc = 100 * match_and_score(gt, preds).accuracy
    ok = (abs(os1 - 0.54) <= 1e-9 and abs(os2 - 0.00944) <= 1e-4 and tol
          and abs(acc - 49.5) <= 0.1)
    record("A6", "evaluation metric fixtures", ok,
           f"os={os1:.10f}, {os2:.5f}; tolerance={tol}; 223/450={acc:.2f}%")
    assert ok


def _closed_loop(seed, out):
    spec = random_scenario(10, seed=seed, video_id=f"s{seed}")
    paths = write_scenario(spec, out / "data")
    views = [str(paths[v]) for v in ("Dashboard", "Rearview", "RightWindow")]
    gt = str(paths["ground_truth"])
    code = main(["run", "--views", *views, "--ground-truth", gt, "--fps", "10",
                 "--classifier", "mock", "--error-rate", "0", "--out-dir", str(out / "run")])
    assert code == 0
    rep = json.loads((out / "run" / "report.json").read_text())["reports"]
    code = main(["classify", "--proposals", str(out / "run" / "fused.json"), "--ground-truth", gt,
                 "--classifier", "mock", "--error-rate", "0.4", "--out", str(out / "noisy.json")])
    assert code == 0
    code = main(["evaluate", "--ground-truth", gt, "--predictions", str(out / "noisy.json"),
                 "--mode", "classified", "--out", str(out / "noisy_report.json")])
    assert code == 0
    noisy = json.loads((out / "noisy_report.json").read_text())
    return (rep["proposal"]["matched"], rep["classified"]["matched"], noisy["matched"],
            rep["proposal"]["total"])


def test_a7_closed_loop(record, tmp_path, capsys):
    rows = [_closed_loop(seed, tmp_path / f"seed{seed}") for seed in range(20)]
    capsys.readouterr()
    prop = sum(r[0] for r in rows)
    clean = sum(r[1] for r in rows)
    noisy = sum(r[2] for r in rows)
    total = sum(r[3] for r in rows)
    exact = all(r[0] == r[1] for r in rows)
    ratio = noisy / prop if prop else float("nan")
    ok = exact and abs(ratio - 0.6) <= 0.15 * 0.6
    record("A7", "closed loop: error 0 equals proposal, error 0.4 ~ 0.6x (+-15% rel)", ok,
           f"proposal {prop}/{total}, error 0 {clean}/{total}, error 0.4 {noisy}/{total} "
           f"(ratio {ratio:.3f})")
    assert exact
    assert abs(ratio - 0.6) <= 0.15 * 0.6


def _tsv(name):
    rows = [line.split("\t") for line in (FIX / name).read_text().splitlines()]
    return {int(a): b for a, b in rows}


def test_a8_prompt_and_parse_fidelity(record):
    names = _tsv("class_names.tsv")
    paraphrases = _tsv("paraphrases.tsv")
    names_ok = sum(parse_answer(t).class_id == c for c, t in names.items())
    para_ok = sum(parse_answer(t).class_id == c for c, t in paraphrases.items())
    no_ok = parse_answer("no").class_id is None
    expected = (FIX / "prompts.txt").read_bytes().decode("utf-8").splitlines()
    prompts_ok = [PROMPT_TEXTS[i + 1].encode("utf-8") == e.encode("utf-8")
                  for i, e in enumerate(expected)]
    ok = names_ok == 16 and para_ok == 16 and no_ok and len(prompts_ok) == 3 and all(prompts_ok)
    record("A8", "prompt and answer-parsing fidelity", ok,
           f"names {names_ok}/16, paraphrases {para_ok}/16, 'no'->none {no_ok}, "
           f"prompts identical {sum(prompts_ok)}/3")
    assert ok


def _run_all(base):
    """Every subcommand once; returns {output name: bytes}."""
    data = base / "data"
    assert main(["synth", "--activities", "3", "--seed", "11", "--out-dir", str(data)]) == 0
    views = [str(data / f"synth_{v}.csv") for v in ("Dashboard", "Rearview", "RightWindow")]
    gt = str(data / "ground_truth.csv")
    fast = ["--fps", "10", "--perm-b", "30", "--seed", "5"]
    assert main(["detect", "--keypoints", *views, *fast, "--out", str(base / "det.json")]) == 0
    assert main(["sweep", "--keypoints", *views, "--param", "k", "--values", "10,26",
                 "--ground-truth", gt, *fast, "--out", str(base / "sweep_k.csv")]) == 0
    assert main(["sweep", "--keypoints", *views, "--param", "window", "--values", "60,90",
                 "--ground-truth", gt, *fast, "--out", str(base / "sweep_w.csv")]) == 0
    assert main(["fuse", "--proposals", str(base / "det.json"), "--out",
                 str(base / "fused.json")]) == 0
    assert main(["classify", "--proposals", str(base / "fused.json"), "--ground-truth", gt,
                 "--error-rate", "0.3", "--seed", "5", "--out", str(base / "cls.json")]) == 0
    assert main(["evaluate", "--ground-truth", gt, "--predictions", str(base / "cls.json"),
                 "--out", str(base / "eval.json"), "--table", str(base / "eval.txt")]) == 0
    assert main(["run", "--views", *views, "--ground-truth", gt, *fast, "--error-rate", "0.3",
                 "--out-dir", str(base / "run")]) == 0
    return {str(p.relative_to(base)): p.read_bytes() for p in sorted(base.rglob("*")) if p.is_file()}


def test_a9_determinism(record, tmp_path, capsys):
    first = _run_all(tmp_path / "a")
    second = _run_all(tmp_path / "b")
    capsys.readouterr()
    differing = sorted(k for k in first if first[k] != second.get(k))
    ok = first.keys() == second.keys() and not differing
    record("A9", "two runs of every subcommand are byte-identical", ok,
           f"{len(first)} files compared, {len(differing)} differ")
    assert ok, differing
