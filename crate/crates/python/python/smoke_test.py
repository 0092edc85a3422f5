"""Smoke test for the grasp_decode extension module.

Build and install first, e.g. `maturin develop --release` or
`pip install --no-build-isolation .` from crates/python, then run
`python python/smoke_test.py`.
"""

import math
import random
import tempfile

import grasp_decode as gd


def main():
    trials = gd.synth(n_trials_per_class=10, seed=3)
    assert len(trials) == 60, len(trials)
    t0 = trials[0]
    assert t0.paradigm == "movement" and t0.class_label == "lateral"
    assert len(t0.eeg) == 20 and len(t0.emg) == 6 and len(t0.eeg[0]) == 1000
    assert gd.synth(n_trials_per_class=10, seed=3)[5] == trials[5]

    with tempfile.TemporaryDirectory() as d:
        gd.write_dataset(trials, d)
        assert gd.read_dataset(d) == trials

    model = gd.train(trials, method="proposed")
    assert model.method == "proposed"
    report = model.classify(trials[0])
    assert report["predicted"] in ("lateral", "pincer", "palmar")
    assert len(report["per_pattern_mse"]) == 30
    assert model.predict(trials[0]) == report["predicted"]

    with tempfile.TemporaryDirectory() as d:
        path = d + "/model.json"
        model.save(path)
        again = gd.Model.load(path)
    assert [again.predict(t) for t in trials] == [model.predict(t) for t in trials]
    assert gd.Model.from_json(model.to_json()).to_json() == model.to_json()

    cv = gd.cross_validate(trials, method="model1", k_folds=5)
    assert len(cv["per_fold_accuracy"]) == 5 and cv["leakage_violations"] == []

    a = [[random.randint(0, 1) for _ in range(30)] for _ in range(6)]
    b = [[1 - v for v in row] for row in a]
    assert gd.pattern_mse(a, a) == 0.0 and gd.pattern_mse(a, b) == 1.0

    burst = [random.gauss(0, 1) * (8.0 if 400 <= i < 600 else 1.0) for i in range(1000)]
    bits = gd.binarize_channel(burst, 250.0)
    assert len(bits) == 30 and sum(bits) > 0

    tone = [math.sin(2 * math.pi * 12 * i / 250) for i in range(1000)]
    out = gd.bandpass(tone, 8.0, 16.0, 250.0)
    assert abs(max(out[300:700]) - 1.0) < 0.05

    csp = gd.fit_csp([[2.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 2.0]], m_pairs=1)
    assert abs(csp["eigenvalues"][0] - 2 / 3) < 1e-12

    try:
        gd.train(trials, method="model9")
    except gd.GraspDecodeError:
        pass
    else:
        raise AssertionError("unknown method accepted")
    try:
        gd.fit_csp([[1.0, 1.0], [1.0, 1.0]], [[1.0, 1.0], [1.0, 1.0]], m_pairs=1)
    except gd.NumericalError:
        pass
    else:
        raise AssertionError("singular composite accepted")
    print("grasp_decode", gd.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
