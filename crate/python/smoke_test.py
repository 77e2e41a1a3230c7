"""Smoke test for the noisereg Python bindings.

Build and install first: `maturin build --release -m crates/py/Cargo.toml`
followed by `pip install target/wheels/noisereg-*.whl`.
"""

import json
import math
import tempfile

import noisereg


def main():
    sde = noisereg.Model("superlinear_sde", c0=0.0)
    quiet = noisereg.Noise.scalar(0.0, 2.0)
    cfg = noisereg.SimConfig(1e-4, 2.0, scheme="semi_implicit")
    rec = noisereg.run_path(sde, quiet, cfg, [1.0])
    assert rec["status"]["status"] == "blown_up"
    assert 0.99 <= rec["status"]["t_blow"] <= 1.0001

    sink = noisereg.Model("superlinear_sde", c0=0.0, source=0.0, sink=1.0)
    rec = noisereg.run_path(sink, quiet, noisereg.SimConfig(1e-4, 4.0), [2.0])
    assert abs(rec["status"]["tau_e"] - 2 * math.sqrt(2)) < 0.01 * 2 * math.sqrt(2)

    model = noisereg.Model("superlinear_sde", c0=1.0)
    noise = noisereg.Noise.scalar(1.0, 2.0)
    stats = noisereg.run_ensemble(model, noise, noisereg.SimConfig(1e-3, 2.0), [1.0], 50, seed=1)
    assert stats["n_paths"] == 50
    again = noisereg.run_ensemble(model, noise, noisereg.SimConfig(1e-3, 2.0), [1.0], 50, seed=1)
    assert stats == again

    assert noisereg.check_noise_dominance(model, noise, 1.5)["holds"]
    assert noisereg.regime(1.0, 2.0) == "regularized_by_theorem"
    lo, hi = noisereg.wilson_interval(0, 100)
    assert lo == 0.0 and abs(hi - 0.037) < 0.001

    fd = noisereg.Model("fast_diffusion", r=0.5, n_interior=16)
    x = fd.sine_mode(1)
    assert abs(fd.h_norm(x) - 1.0) < 1e-12
    field_noise = noisereg.Noise.uniform(1.0, 0.0)
    hs = field_noise.hs_norm_sq(fd, x)
    assert abs(field_noise.adjoint_action_norm_sq(fd, x) - hs * fd.h_norm(x) ** 2) < 1e-12
    assert noisereg.check_extinction_dominance(fd, field_noise)["holds"]

    with tempfile.TemporaryDirectory() as out:
        plan = {
            "model": {"kind": "superlinear_sde", "c0": 1, "m": 2},
            "sim": {"T": 1, "dt": 1e-3},
            "ensemble": {"n_paths": 20},
            "analyses": ["conditions", "blowup"],
            "output_dir": out,
        }
        resolved = json.loads(noisereg.resolve_config(json.dumps(plan)))
        assert resolved["sim"]["scheme"] == "tamed"
        result = noisereg.run_experiment(json.dumps(plan))
        assert [v["analysis"] for v in result["verdicts"]] == ["conditions", "blowup"]
        fig = noisereg.figure("fig3", seed=0, out=out)
        assert fig["status"]["status"] != "blown_up"

    try:
        noisereg.Model("p_laplace_hot", p=2.5, n_interior=8)
    except ValueError as e:
        assert "p < 2" in str(e)
    else:
        raise AssertionError("p = 2.5 accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
