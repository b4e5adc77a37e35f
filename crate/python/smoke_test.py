"""Smoke test for the splitleak extension module.

Build first, either with `maturin develop -m crates/python/Cargo.toml` or with
`cargo build --release -p splitleak-python`; in the second case the library is
picked up from target/release.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile


def load():
    try:
        import splitleak

        return splitleak
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        for name in ("libsplitleak.so", "libsplitleak.dylib", "splitleak.dll"):
            lib = root / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("splitleak", str(lib))
                spec = importlib.util.spec_from_file_location("splitleak", lib, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("splitleak extension not found; build it first")


def main():
    sl = load()

    p = sl.softmax([1.0, 2.0, 3.0])
    assert abs(sum(p) - 1.0) < 1e-12 and p[2] > p[1] > p[0]
    q = [0.2, 0.3, 0.5]
    ce = sl.cross_entropy(p, q)
    assert abs(ce - (sl.entropy(p) + sl.kl_divergence(p, q))) < 1e-9
    assert sl.optimal_assignment_accuracy([1, 1, 0, 0], [0, 0, 1, 1], 2) == 1.0
    assert sl.perturb_gradient([1.0, -2.0], 0.0, 7) == [1.0, -2.0]
    t, acc = sl.norm_attack_best_threshold([0.1, 0.2, 5.0, 0.15, 4.8], [0, 0, 1, 0, 1])
    assert acc == 1.0 and 0.2 < t < 4.8

    data = sl.generate_blobs(3, 300, 2, 0.5, 1)
    assert len(data) == 300 and data.num_classes == 3
    model = sl.MlpModel([2, 8, 3], 0)
    out = model.forward(data.inputs[:4])
    assert len(out) == 4 and len(out[0]) == 3
    loss, grads = model.input_gradients(data.inputs[:2], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert math.isfinite(loss) and len(grads) == 2

    cfg = sl.default_config() + "\ntrain.epochs = 3\nattack.n_outer = 2\nattack.inner_epochs = 5\n"
    f, g, transcript = sl.split_train(cfg, data)
    assert len(transcript) == 3 * len(data)
    with tempfile.TemporaryDirectory() as tmp:
        path = str(pathlib.Path(tmp) / "t.spltr")
        transcript.save(path)
        assert len(sl.Transcript.load(path)) == len(transcript)
    ids, labels, objective = sl.run_gia(transcript, [1 / 3] * 3, cfg)
    assert len(ids) == len(labels) == len(data) and math.isfinite(objective)

    try:
        sl.softmax([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty logits accepted")

    result = sl.run_pipeline(cfg)
    print(f"smoke test ok: test accuracy {result['test_accuracy']:.3f}, leak accuracy {result['leak_accuracy']:.3f}")


if __name__ == "__main__":
    main()
