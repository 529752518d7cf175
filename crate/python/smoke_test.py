"""End-to-end smoke test for the pydhbn extension module."""

import math
import os
import sys
import tempfile

import pydhbn


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        sys.exit(1)


def main():
    img = pydhbn.Image.from_rows(["#..#", "#..#", "####"])
    check((img.width, img.height, img.foreground_count()) == (4, 3, 8), "image from rows")
    check(img.to_rows() == ["#..#", "#..#", "####"], "image round trip")

    m = pydhbn.WordModel(3, 2, 2, 2, 4, "left-right", seed=1)
    check(abs(sum(m.pi) - 1.0) < 1e-9, "initial distribution is stochastic")
    path, slices = m.sample(6, seed=2)
    ll = m.forward_loglik(slices)
    best, vl = m.viterbi(slices)
    check(math.isfinite(ll) and vl <= ll + 1e-12, "viterbi bounded by forward")
    check(len(best) == 6, "viterbi path length")
    seqs = [m.sample(6, seed=s)[1] for s in range(20)]
    trained, hist = m.train(seqs, max_iter=20)
    check(all(b >= a - 1e-9 for a, b in zip(hist, hist[1:])), "EM history non-decreasing")
    again = pydhbn.WordModel.from_text(trained.to_text())
    check(again.forward_loglik(slices) == trained.forward_loglik(slices), "model text round trip")

    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data")
        bundle = os.path.join(tmp, "bundle")
        n = pydhbn.synthesize(data, n_classes=5, per_class=40, seed=0)
        check(n == 200, "synthetic corpus size")
        labels = pydhbn.train(data, bundle, "ab")
        check(len(labels) == 5, "trained five classes")
        rate = pydhbn.evaluate(bundle, data, "d")
        print(f"     fold d recognition rate {rate:.3f}")
        check(rate >= 0.9, "recognition rate at least 0.9")

        rec = pydhbn.Recognizer.load(bundle)
        word = pydhbn.load_image(os.path.join(data, "images", "class00_0000.pgm"))
        ranked = rec.recognize(word)
        check(len(ranked) == 5 and ranked[0][1] >= ranked[-1][1], "ranked recognition")
        check(len(pydhbn.segment(word)) >= 1, "segmentation")

        try:
            pydhbn.Recognizer.load(os.path.join(tmp, "missing"))
            check(False, "missing bundle rejected")
        except (OSError, ValueError):
            check(True, "missing bundle rejected")

    check(abs(pydhbn.mean_rate([0.8, 0.9]) - 0.85) < 1e-12, "mean rate")
    print("smoke test passed")


if __name__ == "__main__":
    main()
