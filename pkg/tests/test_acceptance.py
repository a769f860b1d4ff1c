"""Acceptance suite.

Each criterion below is exercised at its stated tolerance; the conftest
hook prints one PASS/FAIL/SKIP line per test at the end of the run.

Known red: test_c1_strict_published_aggregate_reproduction.  The published
aggregate table cannot be derived from the published per-method table it
claims to summarize: the average-rank column sums to 223.12 rank units
where any complete ranking of 7 items over 8 metrics must sum to exactly
224, the MS-SSIM median column disagrees with the per-method MS-SSIM rows
for every sequence, and three CaVignal cells (EPs, CEPs, CQM) contradict
the CaVignal rows.  The strict test is implemented faithfully and left
failing; the consistent cells are covered by the passing tests around it.
"""

import math
import os
import statistics
from pathlib import Path

import numpy as np
import pytest

import numba
from conftest import random_image
from oracles import (age_oracle, ceps_oracle, cqm_oracle, eps_oracle,
                     ms_ssim_oracle, psnr_oracle)
from sbibench import bench, metrics
from sbibench.bench import (load_reference_matrix, median_by_sequence,
                            rank_sequences, render, run)
from sbibench.bgmethods import (BlockMrfParams, WS2006Params,
                                blockmrf_background, median_background,
                                sobs_background, ws2006_background)
from sbibench.seqio import default_manifest_path, load_manifest
from sbibench.synth import Occluder, SceneScript, generate, occupancy_map

# ---------------------------------------------------------------------------
# criterion 1: aggregation reproduction from the bundled reference table

PUBLISHED_ORDER = ["HighwayI", "HighwayII", "Foliage", "Hall&Monitor",
                   "CaVignal", "People&Foliage", "Snellen"]

# the published aggregate table, at its printed precision
PUBLISHED_AGGREGATE = {
    # sequence: (avg_rank, AGE, EPs, pEPs%, CEPs, pCEPs%, MSSSIM, PSNR, CQM)
    "HighwayI":       (1.63, "2.17", 267, "0.35", 19, "0.02", "0.97", "37.13", "59.03"),
    "HighwayII":      (2.00, "2.43", 375, "0.49", 4, "0.01", "0.95", "34.40", "41.77"),
    "Foliage":        (2.50, "3.82", 160, "0.56", 2, "0.01", "0.95", "31.77", "39.14"),
    "Hall&Monitor":   (3.75, "2.71", 703, "0.83", 272, "0.32", "0.95", "30.47", "41.73"),
    "CaVignal":       (5.63, "4.09", 956, "3.19", 435, "1.60", "0.89", "21.85", "35.08"),
    "People&Foliage": (5.63, "5.42", 2743, "3.57", 434, "0.57", "0.78", "22.70", "35.37"),
    "Snellen":        (6.75, "23.00", 6946, "33.50", 5055, "24.38", "0.76", "15.62", "36.07"),
}


def aggregated_reference():
    return rank_sequences(median_by_sequence(load_reference_matrix()))


def test_c1_aggregate_medians_match_order_statistics():
    matrix = load_reference_matrix()
    ranked = {a.sequence: a for a in aggregated_reference()}
    for seq in matrix.sequences():
        for col in bench.METRIC_COLUMNS:
            vals = [matrix.value(seq, m, col) for m in matrix.methods()]
            assert ranked[seq].medians[col] == statistics.median(vals), (seq, col)
    # the named display examples
    hw1 = ranked["HighwayI"].medians
    assert hw1["AGE"] == pytest.approx(2.1745, abs=1e-12)
    assert f"{hw1['AGE']:.2f}" == "2.17"
    assert ranked["Foliage"].medians["EPs"] == 160
    assert f"{ranked['HighwayII'].medians['pEPs'] * 100:.4f}" == "0.4883"


def test_c1_aggregate_rank_ordering_matches_published_order():
    assert [a.sequence for a in aggregated_reference()] == PUBLISHED_ORDER


def test_c1_aggregate_via_cli(tmp_path, capsys):
    from sbibench.cli import main

    assert main(["aggregate", "--table", str(bench.reference_matrix_path())]) == 0
    lines = capsys.readouterr().out.splitlines()
    rows = [ln for ln in lines if ln.startswith("| ")][1:]
    assert [r.split("|")[1].strip() for r in rows] == PUBLISHED_ORDER
    assert rows[0].split("|")[3].strip() == "2.17"   # HighwayI median AGE display
    assert rows[2].split("|")[4].strip() == "160"    # Foliage median EPs


def _display2(value) -> str:
    # the published table rounds half away from zero (e.g. 37.125 -> 37.13)
    import decimal

    return str(decimal.Decimal(repr(float(value)))
               .quantize(decimal.Decimal("0.01"), rounding=decimal.ROUND_HALF_UP))


def test_c1_strict_published_aggregate_reproduction():
    """Every published aggregate cell at printed precision, ranks +-0.05.

    Faithful to the stated criterion; fails on the cells where the
    published aggregate table is inconsistent with the published
    per-method table (see the module docstring).
    """
    ranked = {a.sequence: a for a in aggregated_reference()}
    mismatches = []
    for seq, (rank, s_age, n_eps, s_peps, n_ceps, s_pceps,
              s_ms, s_psnr, s_cqm) in PUBLISHED_AGGREGATE.items():
        got = ranked[seq]
        checks = [
            ("AvRank", f"{rank:.2f}", _display2(got.avg_rank),
             abs(got.avg_rank - rank) <= 0.05),
            ("AGE", s_age, _display2(got.medians["AGE"]),
             _display2(got.medians["AGE"]) == s_age),
            ("EPs", n_eps, got.medians["EPs"], got.medians["EPs"] == n_eps),
            ("pEPs", s_peps, _display2(got.medians["pEPs"] * 100),
             _display2(got.medians["pEPs"] * 100) == s_peps),
            ("CEPs", n_ceps, got.medians["CEPs"], got.medians["CEPs"] == n_ceps),
            ("pCEPs", s_pceps, _display2(got.medians["pCEPs"] * 100),
             _display2(got.medians["pCEPs"] * 100) == s_pceps),
            ("MSSSIM", s_ms, _display2(got.medians["MSSSIM"]),
             _display2(got.medians["MSSSIM"]) == s_ms),
            ("PSNR", s_psnr, _display2(got.medians["PSNR"]),
             _display2(got.medians["PSNR"]) == s_psnr),
            ("CQM", s_cqm, _display2(got.medians["CQM"]),
             _display2(got.medians["CQM"]) == s_cqm),
        ]
        for col, want, have, ok in checks:
            if not ok:
                mismatches.append(f"{seq} {col}: published {want}, computed {have}")
    assert not mismatches, (
        "published aggregate table is not reproducible from the published "
        "per-method rows:\n  " + "\n  ".join(mismatches))


# ---------------------------------------------------------------------------
# criterion 2: metric oracle equivalence on random pairs

def test_c2_metric_oracle_equivalence():
    rng = np.random.default_rng(1234)
    checked = 0
    while checked < 200:
        h = int(rng.integers(11, 65))
        w = int(rng.integers(11, 65))
        channels = 3 if checked % 2 else 1
        a = random_image(rng, h, w, channels)
        if checked % 3 == 0:
            b = np.clip(a.astype(np.int16)
                        + rng.integers(-25, 26, a.shape), 0, 255).astype(np.uint8)
        else:
            b = random_image(rng, h, w, channels)
        tau = int(rng.integers(0, 256))

        assert metrics.eps(a, b, tau) == eps_oracle(a, b, tau)
        assert metrics.ceps(a, b, tau) == ceps_oracle(a, b, tau)
        assert metrics.age(a, b) == pytest.approx(age_oracle(a, b), rel=1e-9, abs=1e-12)
        ours, ref = metrics.psnr(a, b), psnr_oracle(a, b)
        if math.isinf(ref):
            assert math.isinf(ours)
        else:
            assert ours == pytest.approx(ref, rel=1e-9)
        assert metrics.ms_ssim(a, b) == pytest.approx(ms_ssim_oracle(a, b), abs=1e-6)
        if channels == 3:
            ours, ref = metrics.cqm(a, b), cqm_oracle(a, b)
            if math.isinf(ref):
                assert math.isinf(ours)
            else:
                assert ours == pytest.approx(ref, rel=1e-9)
        checked += 1


# ---------------------------------------------------------------------------
# criterion 3: metric identities

def test_c3_identities_and_threshold_monotonicity(rng):
    img = random_image(rng, 48, 48, 3)
    rep = metrics.compute_all(img, img)
    assert rep.age == 0.0
    assert rep.eps == 0 and rep.ceps == 0
    assert rep.psnr == math.inf and rep.cqm == math.inf
    assert rep.ms_ssim == 1.0

    noisy = np.clip(img.astype(np.int16)
                    + rng.integers(-60, 61, img.shape), 0, 255).astype(np.uint8)
    for pair in ((img, noisy), (img, random_image(rng, 48, 48, 3))):
        prev_eps = prev_ceps = None
        for tau in range(256):
            e = metrics.eps(*pair, tau)
            c = metrics.ceps(*pair, tau)
            assert c <= e
            if prev_eps is not None:
                assert e <= prev_eps and c <= prev_ceps
            prev_eps, prev_ceps = e, c
        assert metrics.eps(*pair, 255) == 0


# ---------------------------------------------------------------------------
# criterion 4: median recovery and its stated failure mode

def test_c4_median_exact_when_background_majority():
    scripts = [
        SceneScript(width=64, height=64, frames=100, seed=21,
                    background=("gradient",),
                    occluders=(Occluder((4, 6, 20, 24), ("fixed", (250, 20, 20)),
                                        (0, 44)),)),           # 45% static
        SceneScript(width=64, height=64, frames=100, seed=22,
                    background=("texture",),
                    occluders=(Occluder((0, 10, 16, 16), ("flicker", 0, 255),
                                        (10, 53), velocity=(1.0, 0.0)),
                               Occluder((40, 40, 12, 12), ("fixed", (5, 5, 5)),
                                        (60, 99)),)),
    ]
    for script in scripts:
        occupancy = occupancy_map(script)
        assert occupancy.max() < 0.5
        seq, bg = generate(script)
        assert np.array_equal(median_background(seq), bg)


def test_c4_median_fails_and_ws2006_recovers_on_steady_occluder():
    rect = (12, 16, 24, 20)
    script = SceneScript(width=64, height=64, frames=100, seed=23,
                         background=("flat", (30, 60, 30)),
                         occluders=(Occluder(rect, ("flicker", 100, 255), (0, 59)),))
    occupancy = occupancy_map(script)
    x, y, w, h = rect
    assert (occupancy[y:y + h, x:x + w] == 0.6).all()
    seq, bg = generate(script)

    med = median_background(seq)
    inside = (slice(y, y + h), slice(x, x + w))
    assert metrics.age(bg[inside], med[inside]) > 10.0
    outside_mask = np.ones((64, 64), bool)
    outside_mask[inside] = False
    assert np.array_equal(med[outside_mask], bg[outside_mask])  # failure confined

    out = ws2006_background(seq, WS2006Params(eps_stable=10, min_len=10,
                                              delta_consensus=10))
    assert np.array_equal(out, bg)


# ---------------------------------------------------------------------------
# criterion 5: block completion on a steady-occluder scene

def test_c5_blockmrf_resolves_steady_occluder_and_energy_monotone():
    script = SceneScript(width=64, height=64, frames=100, seed=25,
                         background=("gradient",),
                         occluders=(Occluder((8, 16, 24, 32), ("fixed", (210, 40, 40)),
                                             (0, 59)),))
    seq, bg = generate(script)
    out, info = blockmrf_background(seq, BlockMrfParams(), full_output=True)
    med = median_background(seq)
    assert metrics.age(bg, out) < 5.0
    assert metrics.p_eps(bg, out) < metrics.p_eps(bg, med)
    energies = info["seam_energies"]
    assert all(e1 >= e2 - 1e-9 for e1, e2 in zip(energies, energies[1:]))


# ---------------------------------------------------------------------------
# criterion 6: determinism across runs and thread counts

def _thread_counts():
    cap = numba.config.NUMBA_NUM_THREADS
    return sorted({1, min(8, cap)})


def test_c6_methods_bit_identical_across_runs_and_threads():
    script = SceneScript(width=32, height=32, frames=40, seed=31,
                         background=("texture",),
                         occluders=(Occluder((4, 4, 12, 12), ("flicker", 60, 220),
                                             (5, 30)),),
                         noise_sigma=1.5)
    seq, gt = generate(script)

    def snapshot():
        return {
            "median": median_background(seq).tobytes(),
            "ws2006": ws2006_background(seq).tobytes(),
            "sobs": sobs_background(seq).tobytes(),
            "sobs-oracle": sobs_background(seq, extraction="oracle", gt=gt).tobytes(),
            "blockmrf": blockmrf_background(seq).tobytes(),
        }

    results = []
    for threads in _thread_counts():
        numba.set_num_threads(threads)
        results.append((threads, snapshot()))
        results.append((threads, snapshot()))  # repeat at the same count
    baseline = results[0][1]
    for threads, snap in results[1:]:
        for name in baseline:
            assert snap[name] == baseline[name], (name, threads)


def test_c6_eval_pipeline_renders_byte_identical(tmp_path):
    from sbibench.seqio import SequenceSpec, save_image

    script = SceneScript(width=16, height=16, frames=10, seed=33,
                         background=("gradient",),
                         occluders=(Occluder((2, 2, 6, 6), ("fixed", (220, 10, 10)),
                                             (0, 4)),))
    seq, gt = generate(script)
    d = tmp_path / "seq"
    d.mkdir()
    for t in range(seq.num_frames):
        save_image(seq.frames[t], d / ("in%06d.png" % t))
    save_image(gt, d / "gt.png")
    spec = SequenceSpec("scene", d, "in%06d.png", 0, 9, d / "gt.png")

    texts = []
    images = []
    for threads in _thread_counts():
        for _ in range(2):
            numba.set_num_threads(threads)
            backgrounds = {}
            matrix = run([spec], ["median", "ws2006:min_len=4", "sobs", "blockmrf"],
                         backgrounds=backgrounds)
            texts.append(render(matrix, "csv").encode())
            d = tmp_path / f"run{len(texts)}"
            d.mkdir()
            for (seq_name, label), img in backgrounds.items():
                save_image(img, d / f"{seq_name}__{label}.png")
            images.append(b"".join(p.read_bytes()
                                   for p in sorted(d.glob("*.png"))))
    assert all(t == texts[0] for t in texts[1:])
    assert all(i == images[0] for i in images[1:])


# ---------------------------------------------------------------------------
# criterion 7: dataset-gated reproduction of the published median rows

_SBI_DATA = os.environ.get("SBI_DATA", "")


@pytest.mark.skipif(not (_SBI_DATA and Path(_SBI_DATA).is_dir()),
                    reason="SBI_DATA not set; dataset-gated check is non-blocking")
def test_c7_median_rows_reproduce_published_accuracy():
    specs = load_manifest(default_manifest_path(), root=_SBI_DATA)
    matrix = run(specs, ["median"])
    assert not matrix.errors, matrix.errors
    reference = load_reference_matrix()
    for spec in specs:
        got = next(rep for s, m, rep in matrix.rows if s == spec.name)
        want = next(rep for s, m, rep in reference.rows
                    if s == spec.name and m == "Median")
        assert got.age == pytest.approx(want.age, abs=0.1), spec.name
        assert got.p_eps == pytest.approx(want.p_eps, abs=0.002), spec.name
        assert got.psnr == pytest.approx(want.psnr, abs=0.2), spec.name
