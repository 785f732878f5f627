"""Compare the compiled and numpy policy-scoring kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--prompts 33 --searches 11]

Prints the time per kernel call for a single 11x33 likelihood and the time
to score every policy of the full model once with each backend.
"""

import argparse
import timeit

import numpy as np

from inferact import kernels
from inferact.control import enumerate_policies, novelty_weights, score_policies
from inferact.maths import log_softmax
from inferact.model import build_research_model


def random_beliefs(model, rng):
    return [rng.dirichlet(np.ones(n)) for n in model.num_states]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--prompts", type=int, default=33)
    parser.add_argument("--searches", type=int, default=11)
    parser.add_argument("--horizon", type=int, default=2)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    model, dirichlet = build_research_model({"prompts": args.prompts, "searches": args.searches})
    dirichlet.pA[0][:] += rng.gamma(1.0, 5.0, size=dirichlet.pA[0].shape)
    A2 = np.ascontiguousarray(dirichlet.pA[0] / dirichlet.pA[0].sum(axis=0))
    qs = rng.dirichlet(np.ones(A2.shape[1]))
    ln_pref = log_softmax(model.C[0])
    W = novelty_weights(dirichlet)[0]

    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    results = {}
    backends = [("python", kernels.modality_terms_py)]
    if kernels.BACKEND == "cython":
        backends.insert(0, ("cython", kernels.modality_terms))
    n_calls = 2000
    for name, fn in backends:
        t = min(timeit.repeat(lambda: fn(A2, qs, ln_pref, W), number=n_calls, repeat=args.repeat))
        results[name] = t / n_calls
        print(f"kernel {name:7s}: {1e6 * t / n_calls:8.2f} us/call")

    policies = enumerate_policies(args.prompts, args.searches, args.horizon)
    beliefs = random_beliefs(model, rng)
    for name, fn in backends:
        t = min(timeit.repeat(lambda: score_policies(model, dirichlet, beliefs, policies, kernel=fn),
                              number=1, repeat=max(1, args.repeat // 2)))
        print(f"score {len(policies)} policies with {name:7s}: {t:7.3f} s")
    if "cython" in results:
        print(f"kernel speed-up: {results['python'] / results['cython']:.1f}x")


if __name__ == "__main__":
    main()
