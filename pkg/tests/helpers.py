"""Shared test utilities: finite-difference gradients and comparison helpers."""

import numpy as np

from polyaflow import autodiff as ad

FD_STEP = 1e-5


def numeric_gradient(fn, arrays, step=FD_STEP):
    """Central-difference gradient of scalar fn(list_of_arrays) w.r.t. each array."""
    grads = []
    for k, base in enumerate(arrays):
        base = np.asarray(base, dtype=np.float64)
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn(arrays)
            flat[i] = orig - step
            lo = fn(arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    """Norm-based relative error used across all gradient checks."""
    analytic = np.concatenate([np.asarray(a).reshape(-1) for a in analytic])
    numeric = np.concatenate([np.asarray(n).reshape(-1) for n in numeric])
    denom = max(np.linalg.norm(numeric), 1e-8)
    return np.linalg.norm(analytic - numeric) / denom


def tape_gradients(build, arrays):
    """Run build(tape, vars) -> scalar Var; return (value, grads per array)."""
    tape = ad.Tape()
    leaves = [tape.leaf(a) for a in arrays]
    out = build(tape, leaves)
    ad.backward(out)
    return float(out.value), [leaf.grad for leaf in leaves]


def check_gradients(build, arrays, tol=1e-4, step=FD_STEP):
    """Compare tape gradients of build against central differences.

    `build(tape, vars)` must produce a scalar Var from Var leaves created
    in the same order as `arrays`.
    """
    _, analytic = tape_gradients(build, arrays)

    def value_of(arrs):
        tape = ad.Tape()
        leaves = [tape.leaf(a) for a in arrs]
        return float(build(tape, leaves).value)

    numeric = numeric_gradient(value_of, [np.array(a, dtype=np.float64) for a in arrays], step=step)
    err = relative_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: relative error {err:.3e} >= {tol}"
    return err
