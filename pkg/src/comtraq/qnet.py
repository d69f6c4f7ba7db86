"""Small fully connected Q-network in float64 numpy, with Adam and checkpoints."""
from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class QNetwork:
    """ReLU MLP; ``weights[i]`` has shape (sizes[i+1], sizes[i])."""
    sizes: tuple
    weights: list
    biases: list

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> "QNetwork":
        sizes = tuple(int(s) for s in sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            # He-uniform for the ReLU layers.
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        # Small output layer keeps initial Q-values near zero.
        weights[-1] *= 0.1
        return cls(sizes, weights, biases)

    @classmethod
    def zeros(cls, sizes) -> "QNetwork":
        sizes = tuple(int(s) for s in sizes)
        return cls(sizes, [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]])

    def copy(self) -> "QNetwork":
        return QNetwork(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def load_params_from(self, other: "QNetwork") -> None:
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)


def forward(net: QNetwork, x) -> np.ndarray:
    """Q-values for one input (shape (d,)) or a batch (shape (n, d))."""
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != net.sizes[0]:
        raise ValueError(f"input has {h.shape[-1]} features, network expects {net.sizes[0]}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def _forward_cache(net: QNetwork, x: np.ndarray):
    acts, pre = [x], []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return acts, pre


def mse_loss_and_grads(net: QNetwork, x: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Loss mean((Q(x)[a] - y)^2) and its gradient w.r.t. every parameter.

    Gradients come back in the order of :meth:`QNetwork.params`.
    """
    x = np.asarray(x, dtype=float)
    actions = np.asarray(actions, dtype=int)
    n = len(x)
    acts, pre = _forward_cache(net, x)
    q = acts[-1]
    rows = np.arange(n)
    err = q[rows, actions] - targets
    loss = float(np.mean(err**2))

    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * err / n
    grads = [None] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (pre[i - 1] > 0)
    return loss, grads


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list, grads: list) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class CheckpointError(ValueError):
    pass


def config_digest(cfg) -> str:
    """Stable SHA-256 of a config's JSON form (dataclass or mapping)."""
    def plain(obj):
        if is_dataclass(obj):
            return asdict(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return list(obj)

    blob = json.dumps(cfg, sort_keys=True, default=plain).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(net: QNetwork, path, cfg=None, seed: int | None = None, extra: dict | None = None) -> None:
    meta = {
        "format": "comtraq-qnet",
        "version": CHECKPOINT_VERSION,
        "sizes": list(net.sizes),
        "config_digest": config_digest(cfg) if cfg is not None else None,
        "seed": seed,
        "extra": extra or {},
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{i}"] = np.ascontiguousarray(w, dtype="<f8")
        arrays[f"b{i}"] = np.ascontiguousarray(b, dtype="<f8")
    # Fixed member timestamps keep the file byte-identical across runs.
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w") as fh:
                np.lib.format.write_array(fh, arr, allow_pickle=False)


def read_checkpoint_meta(path) -> dict:
    try:
        with np.load(path, allow_pickle=False) as data:
            return json.loads(bytes(data["meta"]).decode())
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from exc


def load_checkpoint(path, expected_sizes=None, expected_digest: str | None = None, warnings: list | None = None) -> QNetwork:
    """Load a network saved by :func:`save_checkpoint`.

    Shape problems raise :class:`CheckpointError`. A config digest that does
    not match ``expected_digest`` is only a warning, appended to ``warnings``
    when given.
    """
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format") != "comtraq-qnet":
                raise CheckpointError(f"{path}: unrecognized format {meta.get('format')!r}")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            sizes = tuple(meta["sizes"])
            weights = [np.array(data[f"W{i}"], dtype=float) for i in range(len(sizes) - 1)]
            biases = [np.array(data[f"b{i}"], dtype=float) for i in range(len(sizes) - 1)]
    except CheckpointError:
        raise
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted or unreadable checkpoint ({exc})") from exc

    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
            raise CheckpointError(
                f"{path}: layer {i} has weight {w.shape} / bias {b.shape}, "
                f"expected {(sizes[i + 1], sizes[i])} / {(sizes[i + 1],)}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise CheckpointError(f"{path}: layer {i} contains non-finite values")
    if expected_sizes is not None and tuple(expected_sizes) != sizes:
        raise CheckpointError(f"{path}: layer sizes {list(sizes)} do not match expected {list(expected_sizes)}")
    if expected_digest is not None and meta.get("config_digest") != expected_digest:
        msg = f"{path}: config digest {meta.get('config_digest')} differs from expected {expected_digest}"
        if warnings is not None:
            warnings.append(msg)
    return QNetwork(sizes, weights, biases)
