"""Smoke test for the dqk extension module.

Build and run from the repository root:

    cargo build --release -p dqk-python --features extension-module
    cp target/release/libdqk.so python/dqk.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dqk  # noqa: E402


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    plus = dqk.StateVector(1)
    plus.h(0)
    assert close(plus.prob_zero(0), 0.5)
    assert close(dqk.swap_test_probability(plus, plus), 1.0)

    p = dqk.encode([3.0, 4.0])
    assert close(p.norm_factor, 5.0)
    assert p.amplitudes == [0.6, 0.8]

    poly = {"kind": "poly", "a": 0.5, "c": 1.0, "degree": 2}
    x, y = [0.2, 0.7, 0.1], [0.9, 0.3, 0.4]
    ex, ey = dqk.encode(x, poly), dqk.encode(y, poly)
    assert close(ex.norm_factor * ey.norm_factor * ex.overlap(ey), dqk.kernel_value(x, y, poly))

    a, b = dqk.encode([0.1, 0.5, 0.3, 0.9]), dqk.encode([0.4, 0.2, 0.8, 0.6])
    cfg = dqk.SessionConfig(2, shots=4096, shared_seed=7)
    t = dqk.run_session(a, b, cfg, session_id=1, seed=3)
    assert len(t["shots"]) == 4096
    assert len(t["messages"]) == 4
    assert abs(t["estimate"] - a.overlap(b) ** 2) < 0.05
    noisy = dqk.run_session(a, b, dqk.SessionConfig(2, shots=256, noise="l2"), seed=3)
    assert noisy["ancilla_p0"] is None

    points = [[0.1, 0.2, 0.9], [0.8, 0.1, 0.3], [0.2, 0.3, 0.8], [0.9, 0.2, 0.2]]
    exact = dqk.assemble_gram(points, source="exact_classical")
    gram = dqk.assemble_gram(points, source="protocol", session=dqk.SessionConfig(2, shots=2048), seed=1)
    assert len(gram) == 4
    for i in range(4):
        for j in range(4):
            assert abs(gram.get(i, j) - exact.get(i, j)) < 0.15
    repaired = gram.psd_repair()
    assert repaired.min_eigenvalue() > -1e-9
    assert repaired.clipped_mass is not None

    model = dqk.train_svm(exact, [0, 1, 0, 1])
    assert [model.predict(row) for row in exact.values] == [0, 1, 0, 1]

    report = dqk.validate({"name": "v", "dataset": "x", "mode": "protocol", "execution": "full_circuit", "data_dir": "."})
    assert not report["accepted"]

    data_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")
    if os.path.exists(os.path.join(data_dir, "wine.csv")):
        rows = dqk.cross_validate(
            {"name": "wine", "dataset": "wine", "mode": "exact_classical", "data_dir": data_dir, "seed": 42}
        )
        assert len(rows) == 1 and rows[0]["mean"] > 0.9
        print(f"wine classical 5-fold accuracy {rows[0]['mean']:.4f}")
    else:
        print("wine.csv not found, cross-validation skipped")

    try:
        dqk.encode([0.0, 0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("zero vector should be rejected")

    assert math.isfinite(gram.min_eigenvalue())
    print("python smoke test passed")


if __name__ == "__main__":
    main()
