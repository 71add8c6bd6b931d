"""Smoke test for the mgsta Python module.

Uses an installed `mgsta` when available (`maturin develop` in crates/py),
otherwise the library built by
`cargo build -p mgsta-py --release --features extension-module`.
"""

import importlib
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    try:
        return importlib.import_module("mgsta")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = os.path.join(ROOT, "target", profile, "libmgsta_py.so")
        if os.path.exists(lib):
            tmp = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(tmp, "mgsta.so"))
            sys.path.insert(0, tmp)
            return importlib.import_module("mgsta")
    sys.exit("mgsta not importable; build crates/py first")


def main():
    mgsta = load()
    print("mgsta", mgsta.__version__)

    k = mgsta.benchmark_gains()
    assert len(k["K2"]) == 2

    project = mgsta.Project(["scenario.horizon=1", "sim.horizon=1"])
    assert project.vertices == 8
    d, per_vertex = mgsta.compute_delta(project, k["K2"], 4.0)
    print(f"delta_min for the benchmark gains: {d:.4f}")
    assert len(per_vertex) == 8 and d == min(per_vertex)

    r = project.synthesize()
    print(r)
    assert r.status == "Optimal"
    assert abs(r.theta - 583.2724) / 583.2724 < 0.10
    again = mgsta.Synthesis.from_json(r.to_json())
    assert again.theta == r.theta

    report = project.verify(r)
    assert report.all_pass, report.to_csv()
    print("worst scaled margin", report.worst_scaled_margin, "nu*", report.constants["nu_star"])

    traj = project.simulate(vertex=2, result=r)
    ratio, ust = traj.cost_ratios(r.theta, r.omega)
    print(f"t_s = {traj.t_s}, cost/theta = {ratio:.4f}, |u_ST|^2 ratio = {ust:.4f}")
    assert traj.t_s is not None and ratio <= 1.0 and ust <= 1.0

    bench = project.trailer(result=r)
    assert not bench.errors
    assert all(t is not None for _, t in bench.t_s)
    assert bench.summary_csv().count("\n") == 9

    try:
        mgsta.Project(["design.omega=1e-9"]).synthesize()
    except mgsta.InfeasibleError as e:
        print("infeasible as expected:", e)
    else:
        raise AssertionError("expected InfeasibleError")

    print("ok")


if __name__ == "__main__":
    main()
