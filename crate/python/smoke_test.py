"""Smoke test for the ethsim_py extension.

Build and install first, e.g. `pip install maturin && maturin build --release -m crates/py/Cargo.toml`
followed by `pip install target/wheels/ethsim_py-*.whl`.
"""

import math
import tempfile
from pathlib import Path

import ethsim_py as es


def bloch_density(n):
    n1, n2, n3 = n
    return [[complex((1 + n3) / 2, 0), complex(n1 / 2, -n2 / 2)],
            [complex(n1 / 2, n2 / 2), complex((1 - n3) / 2, 0)]]


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    # diagonal algebra: commutant is itself, bicommutant closes
    diag = es.Algebra.diagonal(2)
    assert diag.dim == 2 and diag.commutant().dim == 2
    full = es.Algebra.full(3)
    assert full.commutant().dim == 1 and full.center().dim == 1
    assert es.Algebra.full(2).tensor(es.Algebra.scalars(2)).dim == 4

    # finest event of diag(0.7, 0.3) on the full qubit algebra: the two eigenprojections
    rho = [[0.7 + 0j, 0j], [0j, 0.3 + 0j]]
    event = es.finest_event(rho, es.Algebra.full(2))
    assert len(event) == 2
    assert sorted(round(p[0][0].real) for p in event) == [0, 1]

    step = es.eth_step(rho, es.Algebra.full(2), es.Algebra.full(2), seed=3)
    assert step["actualized"]
    assert any(close(step["born_probability"], w) for w in (0.7, 0.3))

    # depth-2 history tree sums to one
    n0 = (0.3, 0.4, 0.5)
    up, down = bloch_density((0, 0, 1)), bloch_density((0, 0, -1))
    xp, xm = bloch_density((1, 0, 0)), bloch_density((-1, 0, 0))
    total = sum(es.history_probability(bloch_density(n0), [a, b]) for a in (up, down) for b in (xp, xm))
    assert close(total, 1.0, 1e-12), total

    # Lindblad decay from +e3 with Omega = 0: n3 = -1 + 2 exp(-alpha t)
    path = es.integrate_lindblad([0, 0, 1], 0.0, 0.5, 0.01, 1.0)
    assert close(path["states"][-1][2], -1 + 2 * math.exp(-0.5), 1e-8)

    ens = es.fluorescence_ensemble([0, 0, 1], 1.0, 0.5, 0.01, 1.0, 200, 7, 10)
    assert len(ens["times"]) == 11 and sum(ens["jump_count_distribution"]) == 200

    pm = es.photomultiplier([0, 0, 1], 0.0, 0.5, 0.01, 1.0, True, 500, 1)
    assert pm["emitted_not_ground"] == 0

    pdp = es.check_pdp(0.1, 1.0, 2)
    assert all(c == e for _, _, c, e in pdp) and len(pdp) == 3

    cal = es.calibrate_alpha(0.1, 1.0)
    assert close(cal["alpha"], -math.log(math.cos(0.1) ** 2), 1e-10)

    assert es.stern_gerlach([0, 0, 1], 0) == "upper"
    assert es.stern_gerlach([0, 0, -1], 0) == "lower"

    direct, summed, violation = es.lsw_demo()
    assert close(violation, 0.5, 1e-10)
    assert close(es.smeared_interval_probability(0, 0, -math.inf, 0, 1.0), 0.5, 1e-12)

    out = es.execute("scenario=history-tree\nseed=2\nn_traj=500")
    assert out["columns"][0] == "history" and len(out["rows"]) == 16
    assert close(out["headline"]["total_probability"], 1.0, 1e-9)

    with tempfile.TemporaryDirectory() as d:
        data, summary = es.run_scenario("scenario=lsw-demo\nseed=1", d)
        assert Path(data).name == "lsw-demo_1.csv" and Path(summary).exists()

    try:
        es.execute("scenario=lsw-demo")
    except ValueError as e:
        assert "seed" in str(e)
    else:
        raise AssertionError("missing seed accepted")

    print(f"ethsim_py {es.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
