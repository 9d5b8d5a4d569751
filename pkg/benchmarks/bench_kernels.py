"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--tags 572] [--lengths 5 20 50] [--repeat 20]

Reports the median wall time per call for viterbi, log_partition and
forward_backward, and checks that both backends agree on each input.
"""
import argparse
import statistics
import time

import numpy as np

from lexrec.constraints import FLAG_END, FLAG_START, FLAG_TRANS
from lexrec.kernels import NEG, backends
from lexrec.tagcodec import FLAGS, MweFlag


# rough share of each MWE flag among the tags of a trained model
FLAG_SHARE = {"O": 0.33, "o": 0.2, "B": 0.18, "b": 0.04, "I_": 0.001, "i_": 0.001, "I~": 0.15, "i~": 0.03}


def lattice(rng, T, K):
    """Random scores with the structural transition pattern of a K-tag model."""
    names = list(FLAG_SHARE)
    p = np.array([FLAG_SHARE[n] for n in names])
    f = np.array([FLAGS.index(MweFlag(n)) for n in rng.choice(names, size=K, p=p / p.sum())])
    em = rng.normal(size=(T, K))
    tr = np.where(FLAG_TRANS[np.ix_(f, f)], rng.normal(size=(K, K)), NEG)
    st = np.where(FLAG_START[f], rng.normal(size=K), NEG)
    en = np.where(FLAG_END[f], rng.normal(size=K), NEG)
    return np.ascontiguousarray(em), np.ascontiguousarray(tr), st, en


def timeit(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tags", type=int, default=572)
    ap.add_argument("--lengths", type=int, nargs="+", default=[5, 20, 50])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    impls = backends()
    if "cython" not in impls:
        print("compiled extension not built; only the NumPy backend is available")
    rng = np.random.default_rng(a.seed)
    names = sorted(impls)
    print(f"K={a.tags} tags, median of {a.repeat} runs (ms)")
    print(f"{'kernel':<17} {'T':>4} " + " ".join(f"{n:>9}" for n in names) + "   speedup  agree")
    for T in a.lengths:
        args = lattice(rng, T, a.tags)
        for kernel in ("viterbi", "log_partition", "forward_backward"):
            res = {n: getattr(impls[n], kernel)(*args) for n in names}
            ms = {n: 1000 * timeit(getattr(impls[n], kernel), args, a.repeat) for n in names}
            if len(names) == 2:
                x, y = res["cython"], res["python"]
                if kernel == "forward_backward":
                    agree = np.isclose(x[0], y[0]) and all(np.allclose(p, q, atol=1e-9) for p, q in zip(x[1:], y[1:]))
                elif kernel == "viterbi":
                    agree = list(x) == list(y)
                else:
                    agree = np.isclose(x, y, rtol=1e-12)
                speed = f"{ms['python'] / ms['cython']:8.1f}x"
            else:
                agree, speed = True, "       -"
            print(f"{kernel:<17} {T:>4} " + " ".join(f"{ms[n]:9.3f}" for n in names)
                  + f"  {speed}  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
