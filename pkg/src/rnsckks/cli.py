"""Command-line harness: self-tests, throughput sweeps and a demo workload.

Exit codes: 0 success, 1 suite or workload failure, 2 usage error.
"""

import argparse
import csv
import json
import statistics
import sys
import time

import numpy as np

from . import batch as batchmod
from . import kernels, ntt
from . import params as par
from .ckks import CkksContext
from .errors import ParameterError
from .rns import RnsPolynomial, COEFF, NTT

CSV_FIELDS = ["op", "backend", "n", "level", "batch", "threads", "reps",
              "wall_ms_median", "ops_per_sec"]

BENCH_OPS = ("ntt", "intt", "hmult", "hadd", "hrotate", "rescale", "cmult",
             "forbenius_map")

#: Test hook: when true, selftest corrupts one twiddle entry before running
#: the transform suite, to prove the suite actually detects a broken table.
INJECT_TWIDDLE_FAULT = False


def _emit(rows, out_path):
    if out_path is None:
        w = csv.DictWriter(sys.stdout, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)
    elif out_path.endswith(".json"):
        with open(out_path, "w") as fh:
            json.dump(rows, fh, indent=2)
    else:
        with open(out_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            w.writeheader()
            w.writerows(rows)


def _time_batched(fn, reps):
    """Median wall-clock milliseconds of fn() over reps runs, one warm-up."""
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(times)


def _random_batch(ctx, b, domain, rng):
    basis = ctx.params.q_basis()
    rows = np.empty((len(basis), b, ctx.params.n), dtype=np.uint32)
    for i, q in enumerate(basis):
        rows[i] = rng.integers(0, q, (b, ctx.params.n), dtype=np.uint64)
    return batchmod.BatchBuffer(data=rows, basis=basis, domain=domain)


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _suite_transform(ctx, rng):
    """Oracle equivalence plus inverse roundtrip for the chosen backend."""
    p = ctx.params
    n = min(p.n, 1 << 10)  # oracle is quadratic; clamp the check size
    qs = p.chain.all_primes[:3]
    table = ntt.TwiddleTable(n, qs)
    if INJECT_TWIDDLE_FAULT:
        tw = table.twiddles(qs[0], "fwd")
        w1 = tw.w1.copy()
        w1[0, 0] = (w1[0, 0] + 1) % qs[0]
        object.__setattr__(tw, "w1", w1)
        e = table.entry(qs[0])
        psi_tab = table.butterfly(qs[0])
        bad = psi_tab.psi_br.copy()
        bad[1] = (bad[1] + 1) % qs[0]
        e.psi_br = bad
        e.fwd_seg = None
    for q in qs:
        psi = table.entry(q).psi
        for _ in range(5):
            a = rng.integers(0, q, n, dtype=np.uint64)
            want = ntt.ntt_oracle(a, q, psi)
            got = ntt.transform_rows(a[None], q, table, ctx.backend)[0]
            if not np.array_equal(got, want):
                return False
            back = ntt.transform_rows(got[None], q, table, ctx.backend,
                                      inverse=True)[0]
            if not np.array_equal(back, a):
                return False
    return True


def _suite_roundtrip(ctx, rng):
    sk, pk = ctx.keygen()
    for _ in range(5):
        z = rng.uniform(-1, 1, ctx.params.slots) \
            + 1j * rng.uniform(-1, 1, ctx.params.slots)
        ct = ctx.encrypt(pk, ctx.encode(z))
        if np.max(np.abs(ctx.decrypt_decode(sk, ct) - z)) > 2 ** -20:
            return False
    return True


def _suite_homomorphism(ctx, rng):
    sk, pk = ctx.keygen()
    rlk = ctx.make_relin_key(sk)
    rk = ctx.make_rotation_key(sk, 1)
    for _ in range(3):
        z = rng.uniform(-1, 1, ctx.params.slots) \
            + 1j * rng.uniform(-1, 1, ctx.params.slots)
        w = rng.uniform(-1, 1, ctx.params.slots)
        c0 = ctx.encrypt(pk, ctx.encode(z))
        c1 = ctx.encrypt(pk, ctx.encode(w))
        s = ctx.decrypt_decode(sk, ctx.hadd(c0, c1))
        if np.max(np.abs(s - (z + w))) > 2 ** -19:
            return False
        m = ctx.decrypt_decode(sk, ctx.rescale(ctx.hmult(c0, c1, rlk)))
        if np.max(np.abs(m - z * w)) > 2 ** -18:
            return False
        r = ctx.decrypt_decode(sk, ctx.hrotate(c0, 1, rk))
        if np.max(np.abs(r - np.roll(z, -1))) > 2 ** -18:
            return False
    return True


def cmd_selftest(args):
    try:
        params = _load_params(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ctx = CkksContext(params, backend=args.ntt_backend, seed=args.seed,
                      workers=args.threads)
    rng = np.random.default_rng(args.seed)
    suites = [("transform", _suite_transform),
              ("roundtrip", _suite_roundtrip),
              ("homomorphism", _suite_homomorphism)]
    failed = False
    for name, fn in suites:
        ok = fn(ctx, rng)
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
        failed |= not ok
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_kernel_fn(ctx, op, b, rng):
    """Build a zero-argument callable running one batched op of size b."""
    p = ctx.params
    if op in ("ntt", "intt", "hada_mult", "ele_add", "ele_sub",
              "forbenius_map"):
        domain = COEFF if op == "ntt" else NTT
        buf = _random_batch(ctx, b, domain, rng)
        aux = None
        if op in ("hada_mult", "ele_add", "ele_sub"):
            aux = _random_batch(ctx, b, domain, rng)
        elif op == "forbenius_map":
            aux = 1
        return lambda: batchmod.batched_apply(
            buf, op, aux=aux, table=ctx.table, backend=ctx.backend,
            workers=ctx.workers)
    # ciphertext-level operations run member by member
    sk, pk = ctx.keygen()
    z = rng.uniform(-1, 1, p.slots)
    cts = [ctx.encrypt(pk, ctx.encode(z)) for _ in range(b)]
    if op == "hadd":
        return lambda: [ctx.hadd(c, c) for c in cts]
    if op == "rescale":
        return lambda: [ctx.rescale(c) for c in cts]
    if op == "cmult":
        pt = ctx.encode(z)
        return lambda: [ctx.cmult(c, pt) for c in cts]
    if op == "hmult":
        rlk = ctx.make_relin_key(sk)
        return lambda: [ctx.hmult(c, c, rlk) for c in cts]
    if op == "hrotate":
        rk = ctx.make_rotation_key(sk, 1)
        return lambda: [ctx.hrotate(c, 1, rk) for c in cts]
    raise ParameterError(f"unknown bench op {op!r}")


def cmd_bench(args):
    params = _load_params(args)
    ctx = CkksContext(params, backend=args.ntt_backend, seed=args.seed,
                      workers=args.threads)
    rng = np.random.default_rng(args.seed)
    rows = []
    for op in args.ops:
        for b in args.batch_sizes:
            try:
                fn = _bench_kernel_fn(ctx, op, b, rng)
                ms = _time_batched(fn, args.reps)
            except MemoryError:
                continue  # record as a skipped row, not a crash
            rows.append({
                "op": op, "backend": args.ntt_backend, "n": params.n,
                "level": params.l_max, "batch": b,
                "threads": args.threads or 1, "reps": args.reps,
                "wall_ms_median": round(ms, 4),
                "ops_per_sec": round(b * 1000.0 / ms, 2) if ms else 0.0,
            })
    _emit(rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# sweep over polynomial length
# ---------------------------------------------------------------------------

def cmd_sweep_n(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in args.n_values:
        if n & (n - 1):
            print(f"error: n={n} is not a power of two", file=sys.stderr)
            return 2
        q = par.generate_primes(n, [30])[0]
        table = ntt.TwiddleTable(n, [q])
        b = args.batch_sizes[0]
        x = rng.integers(0, q, (b, n), dtype=np.uint64)
        op = args.ops[0]
        inverse = op == "intt"
        fn = lambda: ntt.transform_rows(x, q, table, args.ntt_backend,
                                        inverse=inverse,
                                        workers=args.threads)
        ms = _time_batched(fn, args.reps)
        rows.append({
            "op": op, "backend": args.ntt_backend, "n": n, "level": 0,
            "batch": b, "threads": args.threads or 1, "reps": args.reps,
            "wall_ms_median": round(ms, 4),
            "ops_per_sec": round(b * 1000.0 / ms, 2) if ms else 0.0,
        })
    _emit(rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# encrypted dot-product workload
# ---------------------------------------------------------------------------

def run_dotproduct(params, length, backend="butterfly", seed=0, workers=None):
    """Homomorphic dot product of two random vectors; returns a report dict."""
    ctx = CkksContext(params, backend=backend, seed=seed, workers=workers)
    if length > params.slots:
        raise ParameterError(f"length {length} exceeds {params.slots} slots")
    if params.l_max < 2:
        raise ParameterError("need at least 2 levels for the reduction")
    rng = np.random.default_rng(seed)
    # positive entries keep the reference dot product away from zero
    x = rng.uniform(0.1, 1.0, length)
    y = rng.uniform(0.1, 1.0, length)
    want = float(np.dot(x, y))

    width = 1
    while width < length:
        width *= 2
    sk, pk = ctx.keygen()
    rlk = ctx.make_relin_key(sk)
    counts = {"hmult": 0, "rescale": 0, "hrotate": 0, "hadd": 0}
    t0 = time.perf_counter()
    cx = ctx.encrypt(pk, ctx.encode(x))
    cy = ctx.encrypt(pk, ctx.encode(y))
    acc = ctx.rescale(ctx.hmult(cx, cy, rlk))
    counts["hmult"] += 1
    counts["rescale"] += 1
    step = 1
    while step < width:
        rk = ctx.make_rotation_key(sk, step)
        acc = ctx.hadd(acc, ctx.hrotate(acc, step, rk))
        counts["hrotate"] += 1
        counts["hadd"] += 1
        step *= 2
    got = float(np.real(ctx.decrypt_decode(sk, acc)[0]))
    wall = time.perf_counter() - t0
    rel = abs(got - want) / max(abs(want), 1e-12)
    return {"length": length, "expected": want, "got": got,
            "relative_error": rel, "wall_seconds": wall, "op_counts": counts}


def cmd_workload_dotproduct(args):
    params = _load_params(args)
    try:
        report = run_dotproduct(params, args.length,
                                backend=args.ntt_backend, seed=args.seed,
                                workers=args.threads)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if report["relative_error"] < 2 ** -15 else 1


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _load_params(args):
    if args.params_json:
        with open(args.params_json) as fh:
            return par.CkksParams.from_json(fh.read())
    return par.CkksParams.from_preset(args.preset)


def _int_list(text):
    return [int(t) for t in text.split(",") if t]


def build_parser():
    ap = argparse.ArgumentParser(
        prog="rnsckks",
        description="RNS-CKKS kernel benchmarks and self-tests")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", default="default",
                       choices=sorted(par.PRESETS))
        p.add_argument("--params-json", default=None,
                       help="load parameters from a JSON file instead")
        p.add_argument("--ntt-backend", default="butterfly",
                       choices=ntt.BACKENDS)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--reps", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None,
                       help="CSV or .json output path (default stdout)")

    p = sub.add_parser("selftest", help="run correctness suites")
    common(p)
    p.set_defaults(fn=cmd_selftest)

    p = sub.add_parser("bench", help="throughput over batch sizes")
    common(p)
    p.add_argument("--ops", type=lambda s: s.split(","),
                   default=["ntt"], help="comma list from: " + ",".join(BENCH_OPS))
    p.add_argument("--batch-sizes", type=_int_list, default=[32, 128])
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sweep-n", help="throughput across polynomial lengths")
    common(p)
    p.add_argument("--ops", type=lambda s: s.split(","), default=["ntt"])
    p.add_argument("--batch-sizes", type=_int_list, default=[8])
    p.add_argument("--n-values", type=_int_list,
                   default=[1 << 11, 1 << 12, 1 << 13])
    p.set_defaults(fn=cmd_sweep_n)

    p = sub.add_parser("workload-dotproduct",
                       help="encrypted dot product demo")
    common(p)
    p.add_argument("--length", type=int, default=128)
    p.set_defaults(fn=cmd_workload_dotproduct)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    for op in getattr(args, "ops", []):
        if op not in BENCH_OPS:
            ap.error(f"unknown op {op!r}")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
