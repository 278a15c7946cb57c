"""Acceptance gate: nine end-to-end checks, one printed verdict line each.

Every check recomputes its expected values from first principles or from
frozen constants derived outside this codebase.  Tolerances are stated
inline and are not adjusted to fit observed behavior: if a reference
value disagrees with its own recomputation, the check reports the
deviation and fails.
"""

import time

import numpy as np
import pytest

from flarepp.benchmark import format_benchmark_report, run_reference_benchmark
from flarepp.dataio import write_epoch_log
from flarepp.loss import LossBatch, LossConfig, bce, bce_pp, bce_pp_grad, loss_curve
from flarepp.metrics import ConfusionMatrix, skill_scores
from flarepp.ordinal import (
    BinaryLabel,
    FlareClass,
    ThresholdSpec,
    binarize,
    proximity_weights,
)
from flarepp.pipeline import (
    DEFAULT_UNDERSAMPLE_RATES,
    balanced_counts,
    max_flux_window,
)
from flarepp.synth import REFERENCE_CLASS_MIX
from flarepp.trainer import ModelSpec, SchedulerState, scheduler_step

GE_M = ThresholdSpec(FlareClass.M)

# Reference operating points: confusion counts and the rounded scores
# quoted alongside them in the source material.  Each (tss, hss, css)
# trio must match recomputation from the counts within +/-0.005.
REFERENCE_POINTS = (
    ("bce val", ConfusionMatrix(tp=1057, fp=5102, tn=102059, fn=481), (0.64, 0.26, 0.41)),
    ("bce-pp val", ConfusionMatrix(tp=973, fp=2969, tn=104192, fn=565), (0.61, 0.34, 0.45)),
    ("bce test", ConfusionMatrix(tp=1548, fp=5429, tn=105273, fn=625), (0.66, 0.31, 0.45)),
    ("bce-pp test", ConfusionMatrix(tp=1446, fp=4460, tn=106242, fn=727), (0.63, 0.34, 0.46)),
)


def _verdict(n: int, ok: bool, detail: str) -> str:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    return line


def _single_batch(z: float, subclass: int) -> LossBatch:
    subs = np.array([subclass], dtype=np.int64)
    y = (subs >= int(GE_M.min_positive_class)).astype(np.int64)
    return LossBatch(np.array([z], dtype=np.float64), y, subs, GE_M)


@pytest.fixture(scope="module")
def benchmark_runs():
    t0 = time.perf_counter()
    first = run_reference_benchmark(seed=42)
    elapsed = time.perf_counter() - t0
    second = run_reference_benchmark(seed=42)
    return first, second, elapsed


def test_criterion_1_reference_score_table():
    bad = []
    for name, cm, quoted in REFERENCE_POINTS:
        s = skill_scores(cm)
        computed = (s.tss, s.hss, s.css)
        for metric, got, want in zip(("tss", "hss", "css"), computed, quoted):
            if abs(got - want) > 0.005:
                bad.append(
                    f"{name} {metric}: computed {got:.7f} vs quoted {want:.2f},"
                    f" |diff| {abs(got - want):.7f}"
                )
    ok = not bad
    detail = "all 12 scores within +/-0.005" if ok else "; ".join(bad)
    line = _verdict(1, ok, detail)
    assert ok, line


def test_criterion_2_weight_table():
    w = proximity_weights(GE_M)
    want_log = {
        FlareClass.FQ: 1,
        FlareClass.A: 2,
        FlareClass.B: 3,
        FlareClass.C: 4,
        FlareClass.M: 4,
        FlareClass.X: 3,
    }
    want_beta = {c: 10 ** lb for c, lb in want_log.items()}
    ok = (
        dict(w.log_beta) == want_log
        and dict(w.beta) == want_beta
        and all(type(v) is int for v in w.log_beta.values())
        and all(type(v) is int for v in w.beta.values())
    )
    line = _verdict(2, ok, "beta {10,10^2,10^3,10^4,10^4,10^3}, integer exponents {1,2,3,4,4,3}")
    assert ok, line


def test_criterion_3_coincidence_identities():
    grid = np.arange(1.0, 1002.0) / 1002.0
    assert grid.size == 1001 and 0.0 < grid[0] and grid[-1] < 1.0
    pairs = ((0.25, FlareClass.C), (0.25, FlareClass.M), (1.0, FlareClass.FQ))
    worst = 0.0
    for alpha, cls in pairs:
        cfg = LossConfig(alpha=alpha)
        for target in (BinaryLabel.NF, BinaryLabel.FL):
            t = loss_curve(cls, target, cfg, grid)
            worst = max(worst, float(np.max(np.abs(t.loss_bce_pp - t.loss_bce))))
        # same identity through the batched logit-space path, at the
        # target consistent with the subclass
        z = np.log(grid) - np.log1p(-grid)
        subs = np.full(grid.size, int(cls), dtype=np.int64)
        y = (subs >= int(GE_M.min_positive_class)).astype(np.int64)
        batch = LossBatch(z, y, subs, GE_M)
        diff = np.abs(bce_pp(batch, cfg, "none") - bce(batch, "none"))
        worst = max(worst, float(np.max(diff)))
    ok = worst < 1e-12
    line = _verdict(3, ok, f"max |bce_pp - bce| = {worst:.3e} over 1001-point grid")
    assert ok, line


def test_criterion_4_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260815)
    h = 1e-5
    quiet = np.array([int(c) for c in (FlareClass.FQ, FlareClass.A, FlareClass.B, FlareClass.C)])
    hot = np.array([int(c) for c in (FlareClass.M, FlareClass.X)])

    worst_loss = 0.0
    for _ in range(1000):
        y = int(rng.integers(0, 2))
        sub = int(rng.choice(hot if y else quiet))
        z = float(rng.uniform(-5.0, 5.0))
        cfg = LossConfig(alpha=float(rng.uniform(0.25, 1.0)))
        an = float(bce_pp_grad(_single_batch(z, sub), cfg, "mean")[0])
        fd = (
            float(bce_pp(_single_batch(z + h, sub), cfg, "mean"))
            - float(bce_pp(_single_batch(z - h, sub), cfg, "mean"))
        ) / (2.0 * h)
        worst_loss = max(worst_loss, abs(fd - an) / abs(an))

    spec = ModelSpec(kind="linear", input_dim=2)
    worst_model = 0.0
    for _ in range(334):
        n = 8
        y = rng.integers(0, 2, n)
        subs = np.where(y == 1, rng.choice(hot, n), rng.choice(quiet, n)).astype(np.int64)
        x = rng.normal(0.0, 1.0, (n, 2))
        params = rng.uniform(-1.0, 1.0, spec.n_params)
        cfg = LossConfig(alpha=float(rng.uniform(0.25, 1.0)))

        def loss_at(p):
            b = LossBatch(spec.forward(p, x), y.astype(np.int64), subs, GE_M)
            return float(bce_pp(b, cfg, "mean"))

        batch = LossBatch(spec.forward(params, x), y.astype(np.int64), subs, GE_M)
        an_vec = spec.loss_grad(params, x, bce_pp_grad(batch, cfg, "mean"))
        fd_vec = np.empty_like(an_vec)
        for j in range(an_vec.size):
            up, dn = params.copy(), params.copy()
            up[j] += h
            dn[j] -= h
            fd_vec[j] = (loss_at(up) - loss_at(dn)) / (2.0 * h)
        worst_model = max(
            worst_model, float(np.linalg.norm(fd_vec - an_vec) / np.linalg.norm(an_vec))
        )

    elapsed = time.perf_counter() - t0
    ok = worst_loss < 1e-6 and worst_model < 1e-5 and elapsed < 5.0
    line = _verdict(
        4,
        ok,
        f"1000 loss checks max rel {worst_loss:.2e} (< 1e-6), "
        f"334x3 model checks max rel {worst_model:.2e} (< 1e-5), {elapsed:.2f}s",
    )
    assert ok, line


def test_criterion_5_balance_arithmetic():
    t0 = time.perf_counter()
    counts = dict(REFERENCE_CLASS_MIX["train"])
    out = balanced_counts(counts)
    want = {
        FlareClass.FQ: 11073,
        FlareClass.A: 6,
        FlareClass.B: 3639,
        FlareClass.C: 5418,
        FlareClass.M: 19008,
        FlareClass.X: 1128,
    }
    nf_total = sum(v for c, v in out.items() if binarize(c, GE_M) == BinaryLabel.NF)
    fl_total = sum(v for c, v in out.items() if binarize(c, GE_M) == BinaryLabel.FL)
    rough = dict(DEFAULT_UNDERSAMPLE_RATES)
    rough[FlareClass.FQ] = 0.06
    fq_rough = balanced_counts(counts, rough)[FlareClass.FQ]
    elapsed = time.perf_counter() - t0
    ok = (
        out == want
        and nf_total == 20136
        and fl_total == 20136
        and abs(fq_rough - 11073) <= 0.01 * 11073
        and elapsed < 1.0
    )
    line = _verdict(
        5,
        ok,
        f"counts {dict((c.name, v) for c, v in out.items())}, NF total {nf_total} == "
        f"FL total {fl_total}, 6% rate gives FQ {fq_rough} ({abs(fq_rough - 11073) / 110.73:.2f}% off)",
    )
    assert ok, line


def test_criterion_6_window_selection_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(64)
    mismatches = []
    for i in range(200):
        # integer-valued rasters keep both paths exact, so equality is strict
        raster = rng.integers(-300, 301, (64, 64)).astype(np.float64)
        got = max_flux_window(raster, 16, 16)
        views = np.lib.stride_tricks.sliding_window_view(np.abs(raster), (16, 16))
        sums = views.sum(axis=(2, 3))
        flat = int(np.argmax(sums))
        want = (flat // sums.shape[1], flat % sums.shape[1])
        if got != want:
            mismatches.append((i, got, want))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 5.0
    detail = (
        f"200 rasters, 0 mismatches vs exhaustive scan, {elapsed:.2f}s"
        if ok
        else f"mismatches {mismatches[:3]} (of {len(mismatches)}), {elapsed:.2f}s"
    )
    line = _verdict(6, ok, detail)
    assert ok, line


def test_criterion_7_scheduler_trajectory():
    state = SchedulerState(initial_lr=0.01)
    seen = []
    for val_loss in (0.5, 0.6, 0.6, 0.7, 0.7):
        state = scheduler_step(state, val_loss)
        seen.append(state.current_lr)
    want = [0.01, 0.01, 0.01 * 0.9, 0.01 * 0.9, 0.01 * 0.9 ** 2]
    levels = sorted(set(seen), reverse=True)
    ok = (
        seen == want
        and levels[0] == 0.01
        and levels[1] == pytest.approx(0.009, abs=1e-15)
        and levels[2] == pytest.approx(0.0081, abs=1e-15)
    )
    line = _verdict(7, ok, f"two plateaus -> lr levels {levels}")
    assert ok, line


def test_criterion_8_benchmark_end_to_end(benchmark_runs):
    report, _, elapsed = benchmark_runs
    problems = []
    for kind in ("bce", "bce_pp"):
        run = report.runs[kind]
        if len(run.records) != 50:
            problems.append(f"{kind} ran {len(run.records)} epochs")
        if not run.records[-1].train_loss < 0.5 * run.records[0].train_loss:
            problems.append(
                f"{kind} final train loss {run.records[-1].train_loss:.4f} not < 50% "
                f"of epoch-1 {run.records[0].train_loss:.4f}"
            )
        if not run.scores.css > 0.0:
            problems.append(f"{kind} val css {run.scores.css:.4f} not > 0")
    text = format_benchmark_report(report)
    kv = dict(line.split("=", 1) for line in text.splitlines())
    for kind in ("bce", "bce_pp"):
        cm = report.runs[kind].cm
        if kv.get(f"{kind}_fp") != str(cm.fp) or kv.get(f"{kind}_fn") != str(cm.fn):
            problems.append(f"report does not record {kind} fp/fn")
    fp_pp, fp_plain = report.runs["bce_pp"].cm.fp, report.runs["bce"].cm.fp
    if not fp_pp <= fp_plain:
        problems.append(f"fp(bce_pp)={fp_pp} > fp(bce)={fp_plain}")
    if not elapsed < 120.0:
        problems.append(f"took {elapsed:.1f}s")
    ok = not problems
    detail = (
        f"50 epochs both, losses halved, css > 0, fp {fp_pp} (bce_pp) <= {fp_plain} (bce), "
        f"{elapsed:.1f}s"
        if ok
        else "; ".join(problems)
    )
    line = _verdict(8, ok, detail)
    assert ok, line


def test_criterion_9_benchmark_determinism(benchmark_runs, tmp_path):
    first, second, _ = benchmark_runs
    differing = []
    for kind in ("bce", "bce_pp"):
        pa = tmp_path / f"first_{kind}.csv"
        pb = tmp_path / f"second_{kind}.csv"
        write_epoch_log(pa, first.runs[kind].records)
        write_epoch_log(pb, second.runs[kind].records)
        if pa.read_bytes() != pb.read_bytes():
            differing.append(kind)
    ok = not differing
    detail = (
        "repeat run epoch logs byte-identical"
        if ok
        else f"epoch logs differ for {differing}"
    )
    line = _verdict(9, ok, detail)
    assert ok, line
