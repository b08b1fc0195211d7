"""Acceptance checks, one test per criterion, each printing a single pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary section
at the end lists every criterion.
"""

import time

import numpy as np
import pytest

from acceptance_log import record
from fixtures import gradient_models, single_zeroed_weight_fixture, exhaustive_delta_loss_ranking, trained_small_ffnn
from oracles import (brute_accuracy, brute_confusion_accuracy, brute_constraint_accuracy, finite_difference_grads,
                     max_relative_error)
from netrepair.constraints import ConstraintSpec, default_constraint
from netrepair.data import DatasetError, extract_failing_set, load_dataset
from netrepair.defects import DefectSpec, inject_defect
from netrepair.engine import loss_and_grads, predict_logits, softmax
from netrepair.evaluate import confusion_accuracy_from_matrix, constraint_accuracy_from_probs, evaluate, \
    metrics_from_logits
from netrepair.model import build_architecture
from netrepair.orchestrate import (RunConfig, parse_cli, read_events, render_report, resolve_params, run_pipeline,
                                   strip_volatile, train_baseline)
from netrepair.repair import RepairConfig, attach_correction_unit, localize_faulty_weights, repair
from netrepair.repair.config import PSOParams
from netrepair.repair.outcome import fraction_correct
from netrepair.repair.pso import pso_optimize
from netrepair.store import save_model

METHODS = ["weight-patch", "finetune-augment", "extend-correct"]
SEEDS = [0, 1, 2]


def test_criterion_1_gradients():
    start = time.perf_counter()
    worst = {}
    for seed in range(5):
        for kind, (model, x, y) in gradient_models(seed).items():
            _, analytic = loss_and_grads(model, x, y)
            numeric, valid = finite_difference_grads(model, x, y, h=1e-3)
            worst[kind] = max(worst.get(kind, 0.0), max_relative_error(analytic, numeric, valid))
    elapsed = time.perf_counter() - start
    ok = all(e < 1e-4 for e in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f}s"
    assert record(1, "finite-difference gradients, every layer kind, 5 seeds", ok, detail)


def test_criterion_2_metric_oracles():
    checks = []
    checks.append(confusion_accuracy_from_matrix(np.array([[3, 1], [1, 5]])) == 19 / 24)
    two = ConstraintSpec([[0, 1], [2, 3]], 0.05)
    checks.append(constraint_accuracy_from_probs(np.array([[0.97, 0.01, 0.01, 0.01]]), two) == 1.0)
    checks.append(constraint_accuracy_from_probs(np.array([[0.5, 0.1, 0.2, 0.2]]), two) == 0.0)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        logits = rng.normal(scale=3.0, size=(200, 10))
        labels = rng.integers(0, 10, 200)
        spec = default_constraint(10)
        m = metrics_from_logits(logits, labels, spec)
        preds = logits.argmax(1)
        checks.append(m["acc"] == brute_accuracy(preds, labels))
        checks.append(m["conf_acc"] == brute_confusion_accuracy(preds, labels, 10))
        checks.append(m["const_acc"] == brute_constraint_accuracy(softmax(logits), spec.groups, spec.epsilon))
    assert record(2, "metrics equal brute-force counting exactly", all(checks), f"{sum(checks)}/{len(checks)} exact")


def test_criterion_3_baseline_training(synthetic):
    start = time.perf_counter()
    model = train_baseline("cnn-small", 2, synthetic, seed=0, epochs=3, lr=0.05)
    acc = evaluate(model, synthetic.test).accuracy
    elapsed = time.perf_counter() - start
    ok = acc >= 0.97 and elapsed < 300
    detail = f"synthetic acc {acc:.4f} in {elapsed:.0f}s"
    try:
        mnist = load_dataset("mnist", train_size=10000, test_size=2000)
    except (DatasetError, FileNotFoundError, OSError):
        detail += "; MNIST files absent, subset variant skipped"
    else:
        start = time.perf_counter()
        m = train_baseline("cnn-small", 2, mnist, seed=0, epochs=3, lr=0.05)
        macc = evaluate(m, mnist.test).accuracy
        melapsed = time.perf_counter() - start
        ok = ok and macc >= 0.95 and melapsed < 600
        detail += f"; mnist acc {macc:.4f} in {melapsed:.0f}s"
    assert record(3, "cnn-small baseline accuracy within 3 epochs", ok, detail)


def test_criterion_4_repair_recovery(baseline, synthetic):
    clean = evaluate(baseline, synthetic.test).accuracy
    lines, ok = [], True
    for method in METHODS:
        start = time.perf_counter()
        passed = 0
        for seed in SEEDS:
            defective = inject_defect(baseline, DefectSpec("weight-zero", "fc2", 0.3, seed=seed))
            params = resolve_params(method, "cnn-small", "synthetic")
            assert params.get("epoch", 5) <= 5 and params.get("iters", 100) <= 100
            out = repair(defective, synthetic, RepairConfig.from_params(method, {**params, "seed": seed}))
            drop = clean - out.before.accuracy
            recovered = (out.after.accuracy - out.before.accuracy) / drop if drop > 0 else 0.0
            good = drop >= 0.10 and recovered >= 0.5 and out.retention >= 0.98
            passed += good
            lines.append(f"{method} s{seed} drop {drop:.3f} rec {recovered:.2f} ret {out.retention:.3f}")
        elapsed = time.perf_counter() - start
        ok = ok and passed >= 2 and elapsed < 600
        lines.append(f"{method} {passed}/3 in {elapsed:.0f}s")
    assert record(4, "each method repairs a weight-zero defect with --auto defaults", ok, "; ".join(lines))


def test_criterion_5_weight_patch():
    overlaps, monotone, fail_acc = [], [], []
    for seed in SEEDS:
        defective, _, data, _ = single_zeroed_weight_fixture(seed)
        failing, passing = extract_failing_set(defective, data.test)
        coords, _ = localize_faulty_weights(defective, failing, passing, top_k=10)
        oracle = set(exhaustive_delta_loss_ranking(defective, failing)[:10])
        overlaps.append(len({(c.param, c.index) for c in coords} & oracle))
        events = []
        out = repair(defective, data, RepairConfig("weight-patch", seed=seed), emit=lambda e, p: events.append((e, p)))
        trace = next(p["trace"] for e, p in events if e == "pso_done")
        monotone.append(all(b >= a for a, b in zip(trace, trace[1:])))
        fail_acc.append(fraction_correct(out.model, failing))
    ok = sum(o >= 1 for o in overlaps) >= 2 and all(monotone) and all(a >= 0.9 for a in fail_acc)
    detail = f"overlaps {overlaps}, monotone {monotone}, failing acc {[round(a, 3) for a in fail_acc]}"
    assert record(5, "localization overlap, monotone trace, failing-set accuracy", ok, detail)


def test_criterion_6_extend_correct():
    identical = []
    x = np.random.default_rng(0).uniform(size=(8, 1, 28, 28))
    for arch, depth in [("ffnn", 6), ("cnn-small", 2), ("resnet", 8)]:
        m = build_architecture(arch, depth, (1, 28, 28), seed=1, **({"width": 32} if arch == "ffnn" else {}))
        identical.append(np.array_equal(predict_logits(attach_correction_unit(m), x), predict_logits(m, x)))
    toy = load_dataset("toy", seed=0)
    rows, tradeoff = [], []
    for seed in SEEDS:
        model = train_baseline("cnn-small", 2, toy, seed=seed, epochs=3, lr=0.05)
        out = repair(model, toy, RepairConfig.from_params("extend-correct",
                                                          {"lam": 10.0, "epoch": 5, "lr": 0.01, "seed": seed}))
        dc = out.after.constraint_accuracy - out.before.constraint_accuracy
        da = out.after.accuracy - out.before.accuracy
        tradeoff.append(dc >= 0.10 and da >= -0.03)
        rows.append(f"s{seed} const {dc * 100:+.1f}pt acc {da * 100:+.1f}pt")
    ok = all(identical) and all(tradeoff)
    assert record(6, "identity at attach, lam=10 raises constraint accuracy", ok,
                  f"identical {identical}; " + "; ".join(rows))


def test_criterion_7_pso_quadratic():
    found, times = [], []
    for seed in SEEDS:
        start = time.perf_counter()
        res = pso_optimize(lambda w: -float((w[0] - 3.0) ** 2), 1, (-10, 10), PSOParams(swarm=16, iters=100), seed)
        times.append(time.perf_counter() - start)
        found.append(abs(res.best[0] - 3.0) < 1e-2)
    ok = all(found) and max(times) < 1.0
    assert record(7, "PSO finds the quadratic optimum", ok, f"{sum(found)}/3 within 1e-2, max {max(times):.3f}s")


FAST = {"iters": 4, "swarm": 6, "top_k": 8, "epoch": 1, "extra": 8, "lr": 0.01, "width": 8}


def _inputs(where, train_epochs=4):
    """Train a small baseline, inject a defect, save both; returns the defect path and the data."""
    model, data = trained_small_ffnn(0, epochs=train_epochs)
    save_model(model, where / "small_ffnn2_baseline.air")
    defective = inject_defect(model, DefectSpec("weight-zero", "fc2", 0.3, seed=0))
    save_model(defective, where / "small_ffnn2_defect.air")
    return where / "small_ffnn2_defect.air", data


def _pipeline_run(out, pretrained, data):
    cfg = RunConfig(methods=list(METHODS), pretrained=str(pretrained), dataset="synthetic", auto=True,
                    overrides=dict(FAST), output_dir=str(out)).validate()
    return run_pipeline(cfg, data=data)


def test_criterion_8_protocol_and_report(tmp_path):
    checks = {}
    records = _pipeline_run(tmp_path, *_inputs(tmp_path))
    checks["9 outcomes/3 records"] = len(records) == 3 and sum(len(r.outcomes) for r in records) == 9
    means = True
    for r in records:
        for key, value in r.aggregate["after"].items():
            means &= abs(value - np.mean([o.after.to_record()[key] for o in r.outcomes])) <= 1e-9
        means &= abs(r.aggregate["retention"] - np.mean([o.retention for o in r.outcomes])) <= 1e-9
    checks["aggregate means"] = bool(means)
    before, after = {"acc": 0.9205, "const_acc": 0.9051}, {"acc": 0.9255, "const_acc": 0.8105}
    text, _ = render_report([{"model_name": "cifar10_resnet18", "method": "finetune-augment", "status": "ok",
                              "before": before,
                              "aggregate": {"deltas": {k: after[k] - before[k] for k in before}}}])
    checks["cells"] = "+0.50%" in text and "−9.46%" in text
    cfg = parse_cli(["--method", "apricot", "deeprepair", "dl2", "--pretrained", "cifar10_resnet34_baseline.pt",
                     "--dataset", "cifar10", "--net_arch", "resnet", "--depth", "34"])
    checks["CLI golden"] = (cfg.methods == METHODS and cfg.net_arch == "resnet" and cfg.depth == 34
                            and cfg.dataset == "cifar10" and cfg.repetitions == 3)
    ok = all(checks.values())
    assert record(8, "pipeline counting, aggregates, report cells, CLI golden", ok,
                  ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in checks.items()))


def test_criterion_9_determinism(tmp_path):
    dirs = [tmp_path / name for name in ("in_a", "in_b", "a", "b")]
    for d in dirs:
        d.mkdir()
    pretrained, data = _inputs(dirs[0])
    _inputs(dirs[1])
    _pipeline_run(dirs[2], pretrained, data)
    _pipeline_run(dirs[3], pretrained, data)

    def same(x, y):
        names = sorted(p.name for p in x.glob("*.air"))
        return names, names == sorted(p.name for p in y.glob("*.air")) and all(
            (x / f).read_bytes() == (y / f).read_bytes() for f in names)

    inputs, same_inputs = same(dirs[0], dirs[1])
    files, same_files = same(dirs[2], dirs[3])
    same_files = same_files and same_inputs
    files = inputs + files
    same_logs = strip_volatile(read_events(dirs[2] / "events.jsonl")) == \
        strip_volatile(read_events(dirs[3] / "events.jsonl"))
    ok = same_files and same_logs and len(files) == 11
    assert record(9, "identical seeds give identical model files and logs", ok,
                  f"{len(files)} model files {'identical' if same_files else 'DIFFER'}, "
                  f"logs {'identical' if same_logs else 'DIFFER'}")
