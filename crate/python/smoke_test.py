#!/usr/bin/env python3
"""Smoke test for the cernn Python extension module.

Build the module first:

    cargo build -p cernn-py --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def load_module():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libcernn.so",
        root / "target" / "debug" / "libcernn.so",
        root / "target" / "release" / "libcernn.dylib",
        root / "target" / "debug" / "libcernn.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p cernn-py --release")
    shim_dir = Path(tempfile.mkdtemp(prefix="cernn-py-"))
    # CPython loads .so-suffixed extension modules on Linux and macOS alike.
    shutil.copy2(built, shim_dir / "cernn.so")
    sys.path.insert(0, str(shim_dir))
    import cernn  # noqa: E402

    return cernn


def approx(a, b, tol=1e-10):
    return abs(a - b) <= tol


def main():
    cernn = load_module()
    failures = []

    def check(name, ok, detail=""):
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}" + (f" ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    print("cascade operators:")
    cas = cernn.Cascade(64, "unitary", seed=7)
    x_re = [math.sin(0.3 * i) for i in range(64)]
    x_im = [math.cos(0.1 * i) for i in range(64)]
    y_re, y_im = cas.apply(x_re, x_im)
    norm_in = math.sqrt(sum(a * a + b * b for a, b in zip(x_re, x_im)))
    norm_out = math.sqrt(sum(a * a + b * b for a, b in zip(y_re, y_im)))
    check("unitary cascade preserves the norm", approx(norm_in, norm_out, 1e-10 * norm_in))

    check("unitary parameter count is 7N", cernn.Cascade(512, "unitary", 1).parameter_count() == 3584)
    check(
        "complex-evolution parameter count is 10N",
        cernn.Cascade(512, "cernn", 1).parameter_count() == 5120,
    )

    pinned = cas.to_complex_evolution()
    p_re, p_im = pinned.apply(x_re, x_im)
    gap = max(max(abs(a - b) for a, b in zip(y_re, p_re)), max(abs(a - b) for a, b in zip(y_im, p_im)))
    check("pinned free diagonals reproduce the unitary cascade", gap < 1e-13, f"max gap {gap:.2e}")

    moduli = [
        math.sqrt(r * r + i * i)
        for re, im in cas.diagonal_entries()
        for r, i in zip(re, im)
    ]
    check("unitary diagonal moduli are 1", all(abs(m - 1.0) < 1e-12 for m in moduli))

    print("activations and transforms:")
    out_re, out_im = cernn.modrelu([3.0], [4.0], [-1.0])
    check("modrelu scales modulus, keeps phase", approx(out_re[0], 2.4, 1e-12) and approx(out_im[0], 3.2, 1e-12))
    out_re, out_im = cernn.modrelu([3.0], [4.0], [-6.0])
    check("modrelu dead region is zero", out_re[0] == 0.0 and out_im[0] == 0.0)

    f_re, f_im = cernn.fourier([1.0, 0.0, 0.0, 0.0], [0.0] * 4)
    check("FFT of a delta is flat 1/sqrt(N)", all(approx(v, 0.5, 1e-12) for v in f_re))
    b_re, b_im = cernn.fourier(f_re, f_im, inverse=True)
    check("inverse FFT round-trips", approx(b_re[0], 1.0, 1e-12) and all(abs(v) < 1e-12 for v in b_im))

    print("tasks and baselines:")
    base = cernn.baseline_copy_ce(10, 100)
    check("memoryless copy baseline", approx(base, 10 * math.log(7) / 121, 1e-12), f"{base:.4f}")
    check("regression noise floor", approx(cernn.regression_noise_floor(32, 0.1), 0.01, 1e-15))

    samples = cernn.copy_batch(10, 100, 4, seed=3)
    ok = all(
        len(inp) == 121 and inp[110] == 8 and tgt[111:] == inp[:10]
        for inp, tgt in samples
    )
    check("copy batch layout", ok)

    h = cernn.lstm_hidden_for_budget(1417, 9, 9)
    check("lstm budget helper returns a plausible width", 10 <= h <= 20, f"h = {h}")

    print("small training runs:")
    records = cernn.train_regression("dense", 8, noise_std=0.0, lr=1e-2, max_steps=800, seed=4)
    check(
        "dense regression drives the loss down",
        records[-1][1] < 1e-4 and records[0][1] > records[-1][1],
        f"start {records[0][1]:.3e} end {records[-1][1]:.3e}",
    )
    records = cernn.train_copy("cernn", 16, 3, 10, max_steps=150, metrics_interval=25, seed=5)
    check(
        "ceRNN copy run learns the filler structure",
        records[-1][1] < records[0][1],
        f"start {records[0][1]:.3f} end {records[-1][1]:.3f}",
    )

    if failures:
        sys.exit(f"{len(failures)} smoke check(s) failed: {', '.join(failures)}")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
