"""Smoke test for the edge_offload extension module."""

import math
import tempfile
from pathlib import Path

import edge_offload as eo


def main():
    inst = eo.Instance.generate(3, seed=7)
    assert inst.n_vehicles == 3
    assert eo.Instance.from_json(inst.to_json()).to_json() == inst.to_json()

    exact = eo.solve_exhaustive(inst)
    assert exact.proven_optimal
    assert math.isclose(exact.cost, inst.total_cost(exact.decisions, exact.alloc), rel_tol=1e-12)

    sbb = eo.solve_sbb(inst, max_nodes=1 << 4)
    assert sbb.decisions == exact.decisions
    assert sbb.cost >= exact.cost * (1 - 1e-12)

    alloc = inst.optimal_allocation([True, True, True])
    assert math.isclose(sum(alloc), 1.0)

    train_set = eo.generate_instances(2, 500, seed=1)
    model = eo.Model.train(train_set, epochs=5, seed=0)
    assert len(model.to_bytes()) <= 2048
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "model.bin"
        model.save(str(path))
        again = eo.Model.load(str(path))
        assert again.to_bytes() == model.to_bytes()
    sol = model.infer(train_set[0])
    assert sum(sol.alloc) <= 1 + 1e-9
    assert all(a > 0 for a, d in zip(sol.alloc, sol.decisions) if d)

    k, cost = eo.best_split()
    rows = eo.eta_sweep(step=0.1)
    assert len(rows) == 11 and cost > 0 and k >= 0
    assert all(r[2] == rows[0][2] for r in rows)

    try:
        eo.solve_grid(eo.Instance.generate(8, seed=1), 0.01)
    except ValueError:
        pass
    else:
        raise AssertionError("oversized grid accepted")

    print("edge_offload smoke test passed")


if __name__ == "__main__":
    main()
