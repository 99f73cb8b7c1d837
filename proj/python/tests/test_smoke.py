import copy
import json
import pathlib

import jsonschema
import numpy as np
import pytest

import slogan

ROOT = pathlib.Path(__file__).resolve().parents[2]
PRESET = ROOT / "configs" / "synthetic_imbalanced.json"


def preset():
    return json.loads(PRESET.read_text())


def tiny(steps=30):
    cfg = preset()
    cfg["output_dir"] = "unused"
    cfg["dataset"]["counts"] = [50, 50, 50, 50, 150, 150, 150, 150]
    cfg["model"]["latent_dim"] = 8
    cfg["model"]["encoder"]["layers"][2]["units"] = 8
    cfg["train"]["steps"] = steps
    cfg["train"]["batch_size"] = 16
    return cfg


@pytest.fixture(scope="module")
def model():
    return slogan.train(tiny())


def test_metrics():
    assert slogan.ari([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert slogan.nmi([0, 0, 1, 1], [5, 5, 3, 3]) == pytest.approx(1.0)
    assert slogan.nmi([0, 1], [0, 1], norm="arithmetic") == pytest.approx(1.0)
    with pytest.raises(slogan.ConfigError):
        slogan.nmi([0, 1], [0, 1], norm="bogus")
    d = slogan.frechet_distance(np.zeros(1), np.eye(1), np.ones(1), 4 * np.eye(1))
    assert d == pytest.approx(2.0, abs=1e-12)


def test_synthetic_dataset():
    x, labels = slogan.synthetic_8gauss(3)
    assert x.shape == (80000, 2)
    assert x.min() == pytest.approx(-1.0) and x.max() == pytest.approx(1.0)
    assert np.bincount(labels).tolist() == [5000] * 4 + [15000] * 4
    x2, _ = slogan.synthetic_8gauss(3)
    np.testing.assert_array_equal(x, x2)


def test_schema_is_valid_and_accepts_preset():
    schema = slogan.run_config_schema()
    assert schema == json.loads((ROOT / "schemas" / "run_config.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(preset(), schema)
    assert slogan.validate_config(preset()) == []


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.pop("seed"),
        lambda c: c["train"].pop("eta"),
        lambda c: c["train"].__setitem__("batch_size", 1),
        lambda c: c["train"].__setitem__("learning_rate", 0.1),
        lambda c: c["dataset"].__setitem__("kind", "mnist"),
        lambda c: c["model"]["generator"]["layers"][0].__setitem__("activation", "swish"),
        lambda c: c.__setitem__("version", 2),
    ],
)
def test_validator_agrees_with_jsonschema(mutate):
    cfg = copy.deepcopy(preset())
    mutate(cfg)
    schema = slogan.run_config_schema()
    reference = sorted("/" + "/".join(str(p) for p in e.absolute_path) for e in
                       jsonschema.Draft202012Validator(schema).iter_errors(cfg))
    issues = slogan.validate_config(cfg)
    assert reference and issues
    pointers = sorted(i.split(": ", 1)[0] for i in issues)
    # Missing and unknown keys are reported at the key itself rather than the parent object.
    assert len(pointers) == len(reference)
    for ours, ref in zip(pointers, reference):
        assert ours.startswith(ref.rstrip("/"))


def test_train_generate_assign(model, tmp_path):
    assert model.k == 8 and model.latent_dim == 8 and model.data_dim == 2 and model.step == 30
    assert model.pi.sum() == pytest.approx(1.0)
    assert model.mu.shape == (8, 8)
    s = model.sigma(0)
    np.testing.assert_allclose(s, s.T)
    assert np.linalg.eigvalsh(s).min() > 0

    g = model.generate(2, 100, seed=5)
    assert g.shape == (100, 2)
    np.testing.assert_array_equal(g, model.generate(2, 100, seed=5))
    assert model.means().shape == (8, 2)

    x, labels = slogan.synthetic_8gauss(1, counts=[50, 50, 50, 50, 150, 150, 150, 150])
    a = model.assign(x)
    assert len(a) == len(x) and min(a) >= 0 and max(a) < 8
    report = slogan.evaluate(model, x, labels, seed=1, n_gen=50)
    assert {"ari", "nmi", "fid", "icfid", "pi"} <= set(report)

    path = tmp_path / "ckpt.json"
    model.save(str(path))
    again = slogan.Model.load(str(path))
    assert again.to_json() == model.to_json()


def test_training_is_deterministic(model):
    assert slogan.train(tiny()).to_json() == model.to_json()


def test_errors(model):
    with pytest.raises(slogan.ConfigError):
        model.generate(8, 10)
    with pytest.raises(slogan.ShapeMismatch):
        model.assign(np.zeros((4, 3)))
    with pytest.raises(slogan.ConfigError):
        slogan.train({"version": 1})
    assert issubclass(slogan.ConfigError, slogan.SloganError)


def test_verify_gradients_detects_fault():
    rep = slogan.verify_gradients(samples=100000, fault="flip-mu")
    assert not rep["all_pass"]
    names = {r["name"].split(" (")[0] for r in rep["rows"]}
    assert any(n.startswith("mean grad rel err") for n in names)
    failed = [r["name"] for r in rep["rows"] if not r["pass"]]
    assert any(n.startswith("mean grad") for n in failed)
