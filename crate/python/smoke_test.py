"""Builds the extension module, imports it, and exercises the main API."""

import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_and_stage():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "toepcomp-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libtoepcomp_py.so")
    stage = tempfile.mkdtemp(prefix="toepcomp_py_")
    shutil.copy(lib, os.path.join(stage, "toepcomp.so"))
    sys.path.insert(0, stage)


def main():
    build_and_stage()
    import toepcomp as tc

    # x1 = 1, x2 = 1 on a 3x3 matrix: the all-ones matrix has rank 1.
    inst = tc.Instance.from_mask(3, [(1, 2, 1.0), (1, 3, 1.0)])
    res = tc.complete(inst)
    assert res.rank <= res.rank_bound == 2 * inst.m, res
    assert inst.residual(res.x) <= 1e-9
    assert all(ok for _, ok, _, _ in tc.verify(inst, res))

    again = tc.CompletionResult.from_json(res.to_json())
    assert again.x == res.x

    inst = tc.Instance.random(4, 12, 1, 6, seed=7, count=20, index=3)
    res = tc.complete(inst)
    assert res.support_size <= inst.m
    assert tc.numerical_rank(res.toeplitz()) == res.rank

    x = tc.moments_from_measure([(0.0, 1.0), (math.pi / 3, 2.0)], 5)
    assert tc.min_eigenvalue(tc.toeplitz(x)) >= -1e-12
    assert tc.numerical_rank(tc.toeplitz(x)) == 3

    c = tc.chebyshev_coeff_matrix(4)
    assert c[3][3] == 4.0

    z, y, obj = tc.solve_finite_lp([[1.0, 1.0]], [1.0], [1.0, 2.0])
    assert z == [1.0, 0.0] and abs(obj - 1.0) < 1e-12

    try:
        tc.Instance([[1.0, 0.0], [2.0, 0.0]], [1.0, 2.0])
    except ValueError as e:
        assert "full row rank" in str(e)
    else:
        raise AssertionError("rank-deficient B accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
