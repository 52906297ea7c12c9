"""Benchmark the compiled kernel extension against the numpy reference.

Times the four hot kernels (conv1d, maxpool1d, lstm, rnn) forward and
backward at the shapes the default pipeline actually uses, then two
end-to-end lanes: a large-batch training epoch and the batch-1 predict
loop that dominates recursive forecasting. The end-to-end lanes swap
the backend in process by rebinding the kernel module's functions.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9 --epoch-batches 20

Neither backend wins everywhere. The numpy reference amortizes its
Python overhead across large batches, while the compiled core avoids
per-call overhead and tends to lead at batch size 1.
"""

import argparse
import contextlib
import time

import numpy as np

from epfcast.nn import kernels
from epfcast.nn.kernels import reference

try:
    from epfcast.nn.kernels import _core as compiled
except ImportError:
    compiled = None

KERNEL_NAMES = (
    "conv1d_forward", "conv1d_backward",
    "maxpool1d_forward", "maxpool1d_backward",
    "lstm_forward", "lstm_backward",
    "rnn_forward", "rnn_backward",
)


def best_of(fn, repeats):
    """Best wall time of ``repeats`` timed calls, in seconds."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


@contextlib.contextmanager
def backend(impl):
    """Temporarily rebind the shared kernel module to ``impl``."""
    saved = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for name in KERNEL_NAMES:
            setattr(kernels, name, getattr(impl, name))
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def micro_cases(batch):
    """Kernel call closures at the default pipeline's shapes."""
    rng = np.random.default_rng(0)
    window, n_features = 30, 13

    x = rng.normal(size=(batch, window, n_features))
    w = rng.normal(size=(16, n_features, 3))
    b = rng.normal(size=16)
    y = reference.conv1d_forward(x, w, b, 1)
    dy = rng.normal(size=y.shape)

    pooled, argmax = reference.maxpool1d_forward(y, 2, 2)
    dpool = rng.normal(size=pooled.shape)

    seq = rng.normal(size=(batch, 12, 32))
    hidden = 64
    wx = rng.normal(size=(32, 4 * hidden)) * 0.1
    wh = rng.normal(size=(hidden, 4 * hidden)) * 0.1
    lb = np.zeros(4 * hidden)
    hs, cs, ifgo, tanh_c = reference.lstm_forward(seq, wx, wh, lb)
    dh = rng.normal(size=(batch, hidden))

    rwx = rng.normal(size=(n_features, hidden)) * 0.1
    rwh = rng.normal(size=(hidden, hidden)) * 0.1
    rb = np.zeros(hidden)
    rhs = reference.rnn_forward(x, rwx, rwh, rb)

    def run(impl):
        return {
            "conv1d_forward": lambda: impl.conv1d_forward(x, w, b, 1),
            "conv1d_backward": lambda: impl.conv1d_backward(x, w, 1, dy),
            "maxpool1d_forward": lambda: impl.maxpool1d_forward(y, 2, 2),
            "maxpool1d_backward": lambda: impl.maxpool1d_backward(
                dpool, argmax, y.shape[1]
            ),
            "lstm_forward": lambda: impl.lstm_forward(seq, wx, wh, lb),
            "lstm_backward": lambda: impl.lstm_backward(
                seq, wx, wh, hs, cs, ifgo, tanh_c, dh
            ),
            "rnn_forward": lambda: impl.rnn_forward(x, rwx, rwh, rb),
            "rnn_backward": lambda: impl.rnn_backward(x, rwx, rwh, rhs, dh),
        }

    return run


def end_to_end_cases(epoch_batches):
    """Training-epoch and batch-1 prediction closures on the live graph."""
    from epfcast.models import HybridConfig, build_hybrid
    from epfcast.training import TrainConfig, adam_update, init_adam_state, mse_loss

    rng = np.random.default_rng(7)
    window, n_features, batch = 30, 13, 32
    xs = rng.normal(size=(epoch_batches, batch, window, n_features))
    ts = rng.normal(size=(epoch_batches, batch, 1))
    one = rng.normal(size=(1, window, n_features))
    cfg = TrainConfig(seed=0)

    def fresh():
        return build_hybrid(HybridConfig(window=window, n_features=n_features), seed=0)

    def epoch():
        model = fresh()
        handles = model.parameters()
        arrays = [p for _, _, p in handles]
        state = init_adam_state(arrays)
        for step in range(epoch_batches):
            out, cache = model.forward(xs[step], training=True, step=step)
            _, dy = mse_loss(out, ts[step])
            _, layer_grads = model.backward(cache, dy)
            grads = [layer_grads[idx][name] for idx, name, _ in handles]
            updated, state = adam_update(arrays, grads, state, cfg)
            for dst, src in zip(arrays, updated):
                dst[...] = src

    predictor = fresh()

    def single():
        for _ in range(100):
            predictor.predict(one)

    return {
        f"train epoch, {epoch_batches} batches of {batch}": epoch,
        "predict, 100 calls at batch 1": single,
    }


def fmt(seconds):
    return f"{seconds * 1e3:9.3f} ms"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed repeats per case; best is reported")
    parser.add_argument("--epoch-batches", type=int, default=10,
                        help="batches per synthetic training epoch")
    args = parser.parse_args()

    if compiled is None:
        print("compiled extension not importable; timing the reference backend only")

    print(f"numpy {np.__version__}, repeats={args.repeats}")
    header = f"{'case':44s} {'reference':>12s} {'compiled':>12s} {'ref/comp':>9s}"

    for batch in (1, 32):
        print(f"\nkernel micro-benchmarks, batch {batch}")
        print(header)
        run = micro_cases(batch)
        ref_cases = run(reference)
        comp_cases = run(compiled) if compiled is not None else None
        for name in KERNEL_NAMES:
            ref_t = best_of(ref_cases[name], args.repeats)
            if comp_cases is None:
                print(f"{name:44s} {fmt(ref_t)} {'-':>12s} {'-':>9s}")
                continue
            comp_t = best_of(comp_cases[name], args.repeats)
            print(f"{name:44s} {fmt(ref_t)} {fmt(comp_t)} {ref_t / comp_t:8.2f}x")

    print("\nend to end, default hybrid model")
    print(header)
    for name, fn in end_to_end_cases(args.epoch_batches).items():
        with backend(reference):
            ref_t = best_of(fn, args.repeats)
        if compiled is None:
            print(f"{name:44s} {fmt(ref_t)} {'-':>12s} {'-':>9s}")
            continue
        with backend(compiled):
            comp_t = best_of(fn, args.repeats)
        print(f"{name:44s} {fmt(ref_t)} {fmt(comp_t)} {ref_t / comp_t:8.2f}x")


if __name__ == "__main__":
    main()
