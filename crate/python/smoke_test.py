#!/usr/bin/env python3
"""Smoke test for the ais_py extension module.

Build the module first, then run this script:

    cargo build -p ais-python --release
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libais_py.so",
        REPO / "target" / "debug" / "libais_py.so",
        REPO / "target" / "release" / "libais_py.dylib",
        REPO / "target" / "debug" / "libais_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("ais_py not built; run: cargo build -p ais-python --release")
    stage = Path(tempfile.mkdtemp(prefix="ais_py_"))
    shutil.copy2(built, stage / "ais_py.so")
    sys.path.insert(0, str(stage))
    import ais_py

    return ais_py


def main():
    ais = load_module()
    print(f"loaded ais_py {ais.__version__}")

    # --- representation -------------------------------------------------
    schema = ais.Schema.fit(
        [
            {"id": "a", "x": "2.0", "proto": "tcp"},
            {"id": "b", "x": "4.0", "proto": "udp"},
        ]
    )
    assert schema.dimensionality() == 3, schema.dimensionality()
    vec = schema.encode({"x": "3.0", "proto": "tcp"})
    assert vec == [1.0, 0.0, 0.5], vec  # one-hot [tcp, udp] then normalized x
    bits = schema.encode_bits({"x": "3.0", "proto": "tcp"}, bits_per_feature=3)
    assert bits == "111000100", bits
    round_trip = ais.Schema.from_json(schema.to_json())
    assert round_trip.fingerprint() == schema.fingerprint()
    print("ok representation: encode / bits / json round-trip")

    assert ais.euclidean([0.0, 0.0], [3.0, 4.0]) == 5.0
    assert ais.hamming("1010", "1010") == 0
    assert ais.r_contiguous(3, "10110", "00111") is True
    print("ok affinity: euclidean / hamming / r-contiguous")

    # --- negative selection ----------------------------------------------
    scenario = ais.synth_scenario(seed=42, n_self_train=200, n_self_test=50, n_anomaly_test=50)
    self_vectors = [v for _, v in scenario["self_train"]]
    detectors, attempts, coverage = ais.DetectorSet.generate_nsa(
        self_vectors, self_radius=0.05, target_count=150, radius=0.06, seed=42
    )
    assert len(detectors) == 150, len(detectors)
    for v in self_vectors:
        nonself, matched = detectors.classify(v)
        assert not nonself, f"self sample flagged nonself by {matched}"
    labels = dict(scenario["labels"])
    hits = sum(1 for tid, v in scenario["traffic"] if labels[tid] and detectors.classify(v)[0])
    anomalies = sum(1 for _, anomalous in scenario["labels"] if anomalous)
    assert hits / anomalies > 0.9, f"only {hits}/{anomalies} anomalies detected"
    print(f"ok negsel: {len(detectors)} detectors in {attempts} candidates, {hits}/{anomalies} anomalies caught")

    vset, _, vcov = ais.DetectorSet.generate_vdetector(
        self_vectors, self_radius=0.05, target_coverage=0.9, seed=42
    )
    assert vcov is not None and vcov >= 0.9, vcov
    print(f"ok v-detector: {len(vset)} detectors at estimated coverage {vcov:.2f}")

    # --- clonal maturation -----------------------------------------------
    validation_vectors = [v for _, v in scenario["traffic"]]
    validation_labels = [labels[tid] for tid, _ in scenario["traffic"]]
    history = detectors.mature(
        self_vectors,
        0.05,
        validation_vectors,
        validation_labels,
        generations=10,
        seed=7,
    )
    best = [b for _, b, _ in history]
    assert all(b2 >= b1 for b1, b2 in zip(best, best[1:])), "max fitness decreased"
    print(f"ok clonal: best fitness {best[0]:.3f} -> {best[-1]:.3f} over {len(history) - 1} generations")

    # --- dendritic cells ---------------------------------------------------
    safe_frames = [(t, 0.0, 0.0, 1.0, ["quiet"]) for t in range(30)]
    table = ais.run_dca(safe_frames, pool_size=5, seed=1)
    assert table["quiet"]["mcav"] == 0.0, table
    assert table["quiet"]["verdict"] == "normal"
    pamp_frames = [(t, 1.0, 0.2, 0.0, ["loud"]) for t in range(30)]
    table = ais.run_dca(pamp_frames, pool_size=5, seed=1)
    assert table["loud"]["mcav"] == 1.0, table
    assert table["loud"]["verdict"] == "anomalous"
    print("ok dca: pure-safe -> mcav 0, pure-pamp -> mcav 1")

    # --- lifecycle ----------------------------------------------------------
    library = ais.Library(capacity=64)
    drifted = [[min(1.0, x + 0.3), min(1.0, y + 0.3)] for x, y in self_vectors]
    summary = detectors.evolve(library, drifted, 0.05, seed=9)
    assert summary["kept"] + summary["invalidated"] + summary["pruned"] == summary["original"]
    for v in drifted:
        nonself, _ = detectors.classify(v)
        assert not nonself, "detector covers drifted self"
    print(
        f"ok lifecycle: kept {summary['kept']}/{summary['original']}, "
        f"archived {summary['archived']}, library now {len(library)}"
    )

    persisted = ais.DetectorSet.from_json(detectors.to_json())
    assert len(persisted) == len(detectors)
    print("ok persistence: detector set json round-trip")

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
