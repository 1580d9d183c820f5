"""Smoke test for the ecg_synth extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/ecg_synth-*.whl
    python python/smoke_test.py
"""

import json
import math
import tempfile

import ecg_synth as es


def main():
    space = es.ParameterSpace(3.0)
    bounds = es.ParameterSpace(2.0).bounds()
    lo, hi = bounds["p.amplitude"]
    assert abs(lo - 0.02) < 1e-12 and abs(hi - 0.23) < 1e-12, bounds["p.amplitude"]
    assert es.ParameterSpace(1.0).bounds()["r.amplitude"] == es.ParameterSpace(5.0).bounds()["r.amplitude"]
    assert json.loads(space.to_json())["scaling"]["wave"] == 3.0

    draw = space.sample(7)
    assert draw.to_json() == space.sample(7).to_json()
    assert es.ParameterDraw.from_json(draw.to_json()).mu == draw.mu

    r_only = es.ParameterSpace().midpoint().isolate(["r"])
    intervals, times, clamped = es.generate_rr(1.0, 0.0, 0.28, 0.0, 12)
    assert not clamped and times[1] == intervals[0]
    clean = es.synthesize_clean(r_only, intervals, 2500)
    amp = r_only.wave("r")["amplitude"]
    peak = max(clean["samples"])
    assert abs(peak / amp - 1.0) < 0.01, peak

    x = es.generate_noise(0.0, 0.0, 1.0, 8192, seed=3)
    var = sum(v * v for v in x) / len(x)
    assert abs(var - 1.0) < 0.1, var
    assert len(es.periodogram(x)) == 8192 // 2 + 1

    labels = es.make_labels([100], 1000)
    assert [i for i, v in enumerate(labels) if v] == [98, 99, 100, 101, 102]

    tone = [math.sin(2 * math.pi * 10 * n / 250) for n in range(5000)]
    y = es.bandpass(tone, 250.0)
    assert 0.95 < max(y[2500:]) < 1.01
    norm, degenerate = es.normalize([0.0, 5.0, 10.0])
    assert norm == [-1.0, 0.0, 1.0] and not degenerate

    config = es.GenerationConfig(space, 7)
    ex = config.example(0)
    assert len(ex["signal"]) == 1000 and len(ex["labels"]) == 1000
    assert ex["signal"] == config.example(0)["signal"]
    assert min(ex["signal"]) >= -1.0 and max(ex["signal"]) <= 1.0

    prob = [float(v) for v in ex["labels"]]
    found = es.extract_peaks(prob, ex["signal"])
    truth = [r for r in ex["r_indices"] if 2 <= r < 998]
    report = es.match_peaks(truth, found["peaks"])
    assert report["false_negatives"] == 0, (truth, found)

    segs = es.split_segments([1.0] * 2000)
    assert len(segs) == 5
    assert es.windowed_average(segs, 2000) == [1.0] * 2000

    m = es.match_peaks([100, 300], [105, 600], 10)
    assert (m["true_positives"], m["false_positives"], m["false_negatives"]) == (1, 1, 1)
    assert m["f1"] == 0.5
    assert es.scores(0, 0, 0)["f1"] == 1.0
    agg = es.aggregate([i / 10 for i in range(11)])
    assert (agg["p10"], agg["p90"]) == (0.1, 0.9)
    assert es.roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    try:
        es.roc_auc([1, 1], [0.2, 0.3])
    except ValueError:
        pass
    else:
        raise AssertionError("single-class AUC must raise")
    try:
        es.ParameterSpace(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative scale must raise")

    with tempfile.TemporaryDirectory() as d:
        manifest = json.loads(config.export(5, d + "/a"))
        assert manifest["format_version"] == es.FORMAT_VERSION
        es.replay_manifest(d + "/a/manifest.json", d + "/b")
        for name in ("signals.f32", "labels.u8", "r_indices.csv", "manifest.json"):
            with open(f"{d}/a/{name}", "rb") as fa, open(f"{d}/b/{name}", "rb") as fb:
                assert fa.read() == fb.read(), name

    print("ecg_synth", es.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
