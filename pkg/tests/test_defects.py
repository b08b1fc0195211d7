import numpy as np
import pytest

from fixtures import trained_small_ffnn
from netrepair.defects import DefectError, DefectSpec, inject_defect
from netrepair.model import Model, dense, flatten, init_weights
from netrepair.store import model_to_bytes


def _changed(a, b):
    return {k for k in a.weights if not np.array_equal(a.weights[k], b.weights[k])}


def test_zero_fraction_zero_is_identity():
    m, _ = trained_small_ffnn(0, epochs=1)
    assert model_to_bytes(inject_defect(m, DefectSpec("weight-zero", "fc2", 0.0))) == model_to_bytes(m)


def test_noise_sigma_zero_is_identity():
    m, _ = trained_small_ffnn(0, epochs=1)
    assert model_to_bytes(inject_defect(m, DefectSpec("weight-noise", "fc1", 0.0))) == model_to_bytes(m)


def test_zero_half_of_ten_weights_matches_reference_stream():
    layers = [flatten(), dense("fc", 5, 2)]
    w = init_weights(layers, 0)
    w["fc.weight"] = np.arange(1, 11, dtype=np.float32).reshape(2, 5)
    m = Model("custom", 1, (1, 1, 5), 2, layers, w)
    out = inject_defect(m, DefectSpec("weight-zero", "fc", 0.5, seed=7))
    zeros = np.flatnonzero(out.weights["fc.weight"].ravel() == 0)
    assert len(zeros) == 5
    # reference: seeded PCG64 sampling without replacement
    expected = np.sort(np.random.default_rng(7).choice(10, 5, replace=False))
    assert np.array_equal(zeros, expected)


@pytest.mark.parametrize("kind,mag", [("weight-noise", 0.1), ("weight-zero", 0.3), ("label-flip-finetune", 1)])
def test_only_target_layer_changes_and_deterministic(kind, mag):
    m, data = trained_small_ffnn(0, epochs=2)
    spec = DefectSpec(kind, "fc2", mag, seed=1)
    a = inject_defect(m, spec, data.train)
    b = inject_defect(m, spec, data.train)
    assert model_to_bytes(a) == model_to_bytes(b)
    assert _changed(m, a) <= {"fc2.weight", "fc2.bias"} and _changed(m, a)
    assert [l.to_dict() for l in a.layers] == [l.to_dict() for l in m.layers]


def test_label_flip_records_provenance():
    m, data = trained_small_ffnn(0, epochs=2)
    out = inject_defect(m, DefectSpec("label-flip-finetune", "fc2", 1, seed=2), data.train)
    rec = out.metadata["defect"]
    assert rec["kind"] == "label-flip-finetune" and len(rec["flipped_classes"]) == 2
    assert "defect" not in inject_defect(m, DefectSpec("weight-zero", "fc2", 0.2)).metadata


def test_unknown_layer():
    m, _ = trained_small_ffnn(0, epochs=1)
    with pytest.raises(DefectError):
        inject_defect(m, DefectSpec("weight-zero", "nope", 0.1))


@pytest.mark.parametrize("kind,mag", [("weight-zero", 1.5), ("weight-noise", -1), ("bogus", 0.1)])
def test_invalid_spec(kind, mag):
    with pytest.raises(DefectError):
        DefectSpec(kind, "fc2", mag)


def test_label_flip_needs_train():
    m, _ = trained_small_ffnn(0, epochs=1)
    with pytest.raises(DefectError):
        inject_defect(m, DefectSpec("label-flip-finetune", "fc2", 1))
