"""Straight-line numpy reference for the recognizer forward pass.

Writes recognizer.weights, face.pgm and recognizer_golden.txt. Run from this
directory: python3 make_recognizer_golden.py
"""

import numpy as np

WIDTHS = [8, 8, 16, 32, 64]
K = 3
EPS = 1e-5
CLASSES = 7

rng = np.random.default_rng(20240607)
blobs = {}


def uniform(shape, scale):
    return rng.uniform(-scale, scale, size=shape)


def bn(prefix, c):
    blobs[prefix + ".bn.gamma"] = 1.0 + uniform((c,), 0.5)
    blobs[prefix + ".bn.beta"] = uniform((c,), 0.1)
    blobs[prefix + ".bn.mean"] = uniform((c,), 0.1)
    blobs[prefix + ".bn.variance"] = 1.0 + uniform((c,), 0.5)


blobs["entry.kernel"] = uniform((K, K, 1, WIDTHS[0]), 0.8)
bn("entry", WIDTHS[0])
for i, (cin, cout) in enumerate(zip(WIDTHS[:-1], WIDTHS[1:])):
    p = f"block{i}"
    blobs[p + ".depthwise"] = uniform((K, K, cin), 0.8)
    blobs[p + ".pointwise"] = uniform((cin, cout), np.sqrt(6.0 / cin))
    if cin != cout:
        blobs[p + ".projection"] = uniform((cin, cout), np.sqrt(3.0 / cin))
    bn(p, cout)
blobs["head.kernel"] = uniform((WIDTHS[-1], CLASSES), 0.02)
blobs["head.bias"] = uniform((CLASSES,), 0.1)

pixels = rng.integers(0, 256, size=(48, 48))


def apply_bn(x, prefix):
    g, b = blobs[prefix + ".bn.gamma"], blobs[prefix + ".bn.beta"]
    m, v = blobs[prefix + ".bn.mean"], blobs[prefix + ".bn.variance"]
    return g * (x - m) / np.sqrt(v + EPS) + b


def conv_same(x, w):
    # x: H x W x Cin, w: K x K x Cin x Cout, zero padded cross-correlation
    h, wd, _ = x.shape
    pad = w.shape[0] // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    out = np.zeros((h, wd, w.shape[3]))
    for ky in range(w.shape[0]):
        for kx in range(w.shape[1]):
            out += xp[ky:ky + h, kx:kx + wd, :] @ w[ky, kx]
    return out


def depthwise_same(x, w):
    h, wd, _ = x.shape
    pad = w.shape[0] // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    out = np.zeros_like(x)
    for ky in range(w.shape[0]):
        for kx in range(w.shape[1]):
            out += xp[ky:ky + h, kx:kx + wd, :] * w[ky, kx]
    return out


def pool(x):
    h, w, c = x.shape
    x = x[: h // 2 * 2, : w // 2 * 2]
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


x = (pixels / 255.0)[:, :, None]
x = np.maximum(apply_bn(conv_same(x, blobs["entry.kernel"]), "entry"), 0.0)
for i in range(len(WIDTHS) - 1):
    p = f"block{i}"
    f = depthwise_same(x, blobs[p + ".depthwise"]) @ blobs[p + ".pointwise"]
    f = np.maximum(apply_bn(f, p), 0.0)
    shortcut = x @ blobs[p + ".projection"] if p + ".projection" in blobs else x
    x = pool(f + shortcut)
logits = x.mean(axis=(0, 1)) @ blobs["head.kernel"] + blobs["head.bias"]
e = np.exp(logits - logits.max())
probs = e / e.sum()

with open("recognizer.weights", "w") as fh:
    fh.write("tomtalk-weights 1\n")
    for name in sorted(blobs):
        arr = blobs[name]
        fh.write("blob " + name + " " + " ".join(str(d) for d in arr.shape) + "\n")
        fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")

with open("face.pgm", "w") as fh:
    fh.write("P2\n48 48\n255\n")
    for row in pixels:
        fh.write(" ".join(str(int(v)) for v in row) + "\n")

with open("recognizer_golden.txt", "w") as fh:
    fh.write("# softmax output in label order anger disgust fear happy sad surprise neutral\n")
    fh.write(" ".join(repr(float(v)) for v in probs) + "\n")
