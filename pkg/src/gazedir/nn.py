"""Minimal CNN stack for gaze classification.

Forward/backward implementations of every layer (conv, ReLU, 2x2 max pool,
dense, softmax cross-entropy), plain SGD, a three-stage network builder,
finite-difference gradient checking, and a binary model format.

Tensors are C-order (row-major) numpy arrays: float32 in production,
float64 in gradient-check mode. The kernels run on stacked minibatches
(B, C, H, W); the single-sample operations wrap them with B=1.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

NUM_FILTERS = 24
KERNEL_SIZES = (7, 5, 3)

MODEL_MAGIC = b"GDN1"
MODEL_FORMAT_VERSION = 1

# u8 tags in the model file, one per layer kind
_KIND_TAGS = {"Conv2D": 0, "ReLU": 1, "MaxPool2": 2, "Dense": 3, "SoftmaxCE": 4}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


def assert_finite(x: np.ndarray, what: str = "tensor") -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")


# --------------------------------------------------------------------------
# batched kernels
# --------------------------------------------------------------------------

def _conv_cols(x4: np.ndarray, kh: int, kw: int, buf: np.ndarray | None = None) -> np.ndarray:
    """Zero-pad for same-size output and unfold: (B,C,H,W) -> (B, C*kh*kw, H*W).

    One strided slice copy per kernel offset; the layout makes the final
    reshape a view. A matching scratch buffer is reused when supplied
    (allocating these per batch dominates training time otherwise).
    """
    b, c, h, w = x4.shape
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=x4.dtype)
    padded[:, :, ph : ph + h, pw : pw + w] = x4
    shape = (b, c, kh, kw, h, w)
    if buf is None or buf.size != b * c * kh * kw * h * w or buf.dtype != x4.dtype:
        buf = np.empty(shape, dtype=x4.dtype)
    cols = buf.reshape(shape)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = padded[:, :, u : u + h, v : v + w]
    return cols.reshape(b, c * kh * kw, h * w)


def _conv_fwd(cols: np.ndarray, weights: np.ndarray, bias: np.ndarray, hw) -> np.ndarray:
    b = cols.shape[0]
    out_ch = weights.shape[0]
    out = weights.reshape(out_ch, -1)[None] @ cols + bias[None, :, None]
    return out.reshape(b, out_ch, *hw)


def _conv_bwd(upstream4, cols, input_shape, weights, need_input_grad=True, up_cols=None):
    b, out_ch, h, w = upstream4.shape
    grad_bias = upstream4.sum(axis=(0, 2, 3))
    up_mat = upstream4.reshape(b, out_ch, h * w)
    grad_weights = (up_mat @ cols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)
    if not need_input_grad:
        return None, grad_weights, grad_bias
    # input gradient == same-padded correlation of upstream with kernels
    # flipped in both spatial dims and with in/out channels swapped
    flipped = np.ascontiguousarray(weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    kh, kw = flipped.shape[2], flipped.shape[3]
    if up_cols is None:
        up_cols = _conv_cols(upstream4, kh, kw)
    grad_input = _conv_fwd(
        up_cols, flipped, np.zeros(flipped.shape[0], dtype=upstream4.dtype), (h, w)
    )
    return grad_input.reshape(input_shape), grad_weights, grad_bias


def _pool_fwd(x4: np.ndarray):
    b, c, h, w = x4.shape
    ho, wo = h // 2, w // 2
    win = x4[:, :, : ho * 2, : wo * 2].reshape(b, c, ho, 2, wo, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
    idx = win.argmax(axis=4)  # first max wins: row-major tie-break
    out = np.take_along_axis(win, idx[..., None], axis=4)[..., 0]
    return out, idx


def _pool_bwd(upstream4, idx4, input_shape):
    b, c, ho, wo = upstream4.shape
    grad = np.zeros(input_shape, dtype=upstream4.dtype)
    u, v = idx4 // 2, idx4 % 2
    bi = np.arange(b)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    ri = 2 * np.arange(ho)[None, None, :, None] + u
    cj = 2 * np.arange(wo)[None, None, None, :] + v
    grad[bi, ci, ri, cj] = upstream4
    return grad


def _softmax_rows(logits2: np.ndarray) -> np.ndarray:
    shifted = logits2 - logits2.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _softmax_ce_batch(logits2: np.ndarray, labels: np.ndarray):
    """Summed loss over the batch, plus per-row probabilities and logit grads."""
    b = logits2.shape[0]
    shifted = logits2 - logits2.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1)
    probs = exp / total[:, None]
    rows = np.arange(b)
    loss = float(np.sum(np.log(total) - shifted[rows, labels]))
    grad = probs.copy()
    grad[rows, labels] -= 1
    return loss, probs, grad


# --------------------------------------------------------------------------
# functional single-sample operations
# --------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(upstream: np.ndarray, cached_input: np.ndarray) -> np.ndarray:
    """Masked pass-through; the subgradient at exactly 0 is 0."""
    if upstream.shape != cached_input.shape:
        raise ValueError(
            f"relu_backward shape mismatch: {upstream.shape} vs {cached_input.shape}"
        )
    return upstream * (cached_input > 0)


def _check_conv_args(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> None:
    if x.ndim != 3 or weights.ndim != 4:
        raise ValueError("conv2d expects input (C,H,W) and weights (O,C,kh,kw)")
    kh, kw = weights.shape[2], weights.shape[3]
    if kh % 2 == 0 or kw % 2 == 0 or kh < 1 or kw < 1:
        raise ValueError(f"kernel dims must be odd positive, got {kh}x{kw}")
    if weights.shape[1] != x.shape[0]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[0]}, weights expect {weights.shape[1]}"
        )
    if bias.shape != (weights.shape[0],):
        raise ValueError("bias length must equal the number of output channels")


def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 cross-correlation; output is (O, H, W)."""
    _check_conv_args(x, weights, bias)
    kh, kw = weights.shape[2], weights.shape[3]
    cols = _conv_cols(x[None], kh, kw)
    return _conv_fwd(cols, weights, bias, x.shape[1:])[0]


def conv2d_backward(
    upstream: np.ndarray, cached_input: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward w.r.t. (input, weights, bias)."""
    if upstream.shape != (weights.shape[0],) + cached_input.shape[1:]:
        raise ValueError(
            f"conv2d_backward shape mismatch: upstream {upstream.shape}, "
            f"input {cached_input.shape}, weights {weights.shape}"
        )
    kh, kw = weights.shape[2], weights.shape[3]
    cols = _conv_cols(cached_input[None], kh, kw)
    grad_in, grad_w, grad_b = _conv_bwd(
        upstream[None], cols, (1,) + cached_input.shape, weights
    )
    return grad_in[0], grad_w, grad_b


def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping 2x2 max pool; trailing odd row/column dropped.

    Returns the pooled map and per-window argmax indices (0..3 in row-major
    window order) needed by the backward pass.
    """
    if x.ndim != 3:
        raise ValueError("maxpool2 expects input (C,H,W)")
    _, h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"maxpool2 needs spatial dims >= 2, got {h}x{w}")
    out, idx = _pool_fwd(x[None])
    return out[0], idx[0]


def maxpool2_backward(
    upstream: np.ndarray, argmax_indices: np.ndarray, input_shape: tuple[int, int, int]
) -> np.ndarray:
    """Routes each upstream value to its argmax position; zeros elsewhere."""
    c, h, w = input_shape
    if upstream.shape != (c, h // 2, w // 2) or argmax_indices.shape != upstream.shape:
        raise ValueError("maxpool2_backward called with stale argmax indices")
    return _pool_bwd(upstream[None], argmax_indices[None], (1, c, h, w))[0]


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 1 or weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ValueError(
            f"dense dimension mismatch: input {x.shape}, weights {weights.shape}"
        )
    return weights @ x + bias


def dense_backward(
    upstream: np.ndarray, cached_input: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grad_input = weights.T @ upstream
    grad_weights = np.outer(upstream, cached_input)
    return grad_input, grad_weights, upstream.copy()


def softmax_ce(
    logits: np.ndarray, true_class: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Stable softmax + cross-entropy.

    Returns (loss, probabilities, gradient w.r.t. logits). The logits are
    shifted by their max before exponentiation, and the loss is computed as a
    shifted log-sum-exp, so magnitudes ~1e3 stay finite.
    """
    n = logits.shape[0]
    if not 0 <= true_class < n:
        raise ValueError(f"class index {true_class} out of range for {n} classes")
    loss, probs, grad = _softmax_ce_batch(logits[None], np.array([true_class]))
    return loss, probs[0], grad[0]


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> list[np.ndarray]:
    """In-place p <- p - lr*g over all parameter tensors. Plain SGD."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads):
        raise ValueError("params and grads must pair up")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")
        p -= lr * g
    return params


# --------------------------------------------------------------------------
# layers with parameters and caches (batched: inputs are (B,C,H,W))
# --------------------------------------------------------------------------

class Conv2D:
    kind = "Conv2D"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = weights
        self.bias = bias
        self.grad_weights = np.zeros_like(weights)
        self.grad_bias = np.zeros_like(bias)
        self._cols = None
        self._bwd_cols = None
        self._input_shape = None

    def forward(self, x, cache=False):
        kh, kw = self.weights.shape[2], self.weights.shape[3]
        if cache:
            # training path (single-writer): reuse the unfold scratch buffer
            self._cols = _conv_cols(x, kh, kw, buf=self._cols)
            self._input_shape = x.shape
            cols = self._cols
        else:
            cols = _conv_cols(x, kh, kw)
        return _conv_fwd(cols, self.weights, self.bias, x.shape[2:])

    def backward(self, upstream, need_input_grad=True):
        up_cols = None
        if need_input_grad:
            kh, kw = self.weights.shape[2], self.weights.shape[3]
            self._bwd_cols = _conv_cols(upstream, kh, kw, buf=self._bwd_cols)
            up_cols = self._bwd_cols
        grad_in, gw, gb = _conv_bwd(
            upstream, self._cols, self._input_shape, self.weights,
            need_input_grad, up_cols,
        )
        self.grad_weights += gw
        self.grad_bias += gb
        return grad_in

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.grad_weights, self.grad_bias]


class ReLU:
    kind = "ReLU"

    def __init__(self):
        self._input = None

    def forward(self, x, cache=False):
        if cache:
            self._input = x
        return relu_forward(x)

    def backward(self, upstream):
        return relu_backward(upstream, self._input)

    def params(self):
        return []

    def grads(self):
        return []


class MaxPool2:
    kind = "MaxPool2"

    def __init__(self):
        self._argmax = None
        self._input_shape = None

    def forward(self, x, cache=False):
        out, idx = _pool_fwd(x)
        if cache:
            self._argmax = idx
            self._input_shape = x.shape
        return out

    def backward(self, upstream):
        return _pool_bwd(upstream, self._argmax, self._input_shape)

    def params(self):
        return []

    def grads(self):
        return []


class Dense:
    """Fully connected layer; flattens each sample to 1-D (row-major)."""

    kind = "Dense"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = weights
        self.bias = bias
        self.grad_weights = np.zeros_like(weights)
        self.grad_bias = np.zeros_like(bias)
        self._input_shape = None
        self._flat = None

    def forward(self, x, cache=False):
        flat = x.reshape(x.shape[0], -1)
        if cache:
            self._input_shape = x.shape
            self._flat = flat
        return flat @ self.weights.T + self.bias

    def backward(self, upstream):
        self.grad_weights += upstream.T @ self._flat
        self.grad_bias += upstream.sum(axis=0)
        return (upstream @ self.weights).reshape(self._input_shape)

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.grad_weights, self.grad_bias]


class SoftmaxCE:
    """Terminal layer: softmax at inference, softmax+CE loss in training."""

    kind = "SoftmaxCE"

    def forward(self, logits, cache=False):
        return _softmax_rows(logits)

    def params(self):
        return []

    def grads(self):
        return []


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

class Model:
    """Ordered layer list over a fixed (1, H, W) input producing class probs."""

    def __init__(self, input_shape: tuple[int, int, int], n_classes: int, layers: list):
        if len(layers) == 0 or layers[-1].kind != "SoftmaxCE":
            raise ValueError("model must end in a SoftmaxCE layer")
        dense = [l for l in layers if l.kind == "Dense"]
        if not dense or dense[-1].weights.shape[0] != n_classes:
            raise ValueError("final dense layer must produce n_classes outputs")
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        self.layers = layers

    @property
    def dtype(self):
        return self.parameters()[0].dtype

    def _check_input(self, x):
        if x.shape != self.input_shape:
            raise ValueError(
                f"input shape {x.shape} does not match model input {self.input_shape}"
            )

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Pure inference pass (no caches written; safe to share across threads)."""
        self._check_input(x)
        h = x.astype(self.dtype, copy=False)[None]
        for layer in self.layers:
            h = layer.forward(h)
        return h[0]

    def batch_loss_and_backward(self, x4: np.ndarray, labels: np.ndarray) -> float:
        """Training pass over a stacked batch; accumulates summed parameter
        grads and returns the summed loss."""
        if x4.shape[1:] != self.input_shape:
            raise ValueError(
                f"batch sample shape {x4.shape[1:]} does not match model "
                f"input {self.input_shape}"
            )
        h = x4.astype(self.dtype, copy=False)
        for layer in self.layers[:-1]:
            h = layer.forward(h, cache=True)
        loss, _, grad = _softmax_ce_batch(h, labels)
        for i in reversed(range(len(self.layers) - 1)):
            layer = self.layers[i]
            if i == 0 and layer.kind == "Conv2D":
                # nothing consumes the gradient w.r.t. the raw input
                layer.backward(grad, need_input_grad=False)
            else:
                grad = layer.backward(grad)
        return loss

    def loss_and_backward(self, x: np.ndarray, true_class: int) -> float:
        self._check_input(x)
        return self.batch_loss_and_backward(x[None], np.array([true_class]))

    def loss(self, x: np.ndarray, true_class: int) -> float:
        self._check_input(x)
        h = x.astype(self.dtype, copy=False)[None]
        for layer in self.layers[:-1]:
            h = layer.forward(h)
        return _softmax_ce_batch(h, np.array([true_class]))[0]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def zero_grads(self) -> None:
        for g in self.gradients():
            g.fill(0)

    def astype(self, dtype) -> "Model":
        """Copy of the model with parameters cast (float64 for gradient checks)."""
        layers = []
        for layer in self.layers:
            if layer.kind == "Conv2D":
                layers.append(Conv2D(layer.weights.astype(dtype), layer.bias.astype(dtype)))
            elif layer.kind == "Dense":
                layers.append(Dense(layer.weights.astype(dtype), layer.bias.astype(dtype)))
            else:
                layers.append(type(layer)())
        return Model(self.input_shape, self.n_classes, layers)


def build_gaze_net(
    input_h: int, input_w: int, n_classes: int, seed: int = 0, dtype=np.float32
) -> Model:
    """Three conv/ReLU/pool stages (24 filters of 7x7, 5x5, 3x3) into a dense
    classifier head.

    Same-padded convolutions keep spatial dims; each pool halves them, so the
    input must be at least 8x8. Weights are uniform +-sqrt(6/fan_in), biases 0.
    """
    if input_h < 8 or input_w < 8:
        raise ValueError(
            f"input {input_h}x{input_w} too small: three pool stages need >= 8x8"
        )
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    layers: list = []
    channels, h, w = 1, input_h, input_w
    for k in KERNEL_SIZES:
        fan_in = channels * k * k
        limit = math.sqrt(6.0 / fan_in)
        weights = rng.uniform(-limit, limit, size=(NUM_FILTERS, channels, k, k))
        layers += [
            Conv2D(weights.astype(dtype), np.zeros(NUM_FILTERS, dtype=dtype)),
            ReLU(),
            MaxPool2(),
        ]
        channels, h, w = NUM_FILTERS, h // 2, w // 2
    features = channels * h * w
    limit = math.sqrt(6.0 / features)
    dense_w = rng.uniform(-limit, limit, size=(n_classes, features))
    layers += [
        Dense(dense_w.astype(dtype), np.zeros(n_classes, dtype=dtype)),
        SoftmaxCE(),
    ]
    return Model((1, input_h, input_w), n_classes, layers)


def model_forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Class-probability vector for one input patch."""
    probs = model.forward(x)
    assert_finite(probs, "model output")
    return probs


def train_epoch(
    model: Model,
    samples: list[np.ndarray],
    labels,
    lr: float,
    batch_size: int,
    rng_seed: int,
) -> float:
    """One epoch of minibatch SGD: seeded shuffle, mean-of-batch gradients.

    lr=0 runs the epoch without updates (pure evaluation of the mean loss).
    """
    n = len(samples)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError("labels must pair with samples")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise ValueError("label out of range")
    order = np.random.default_rng(rng_seed).permutation(n)
    total = 0.0
    for start in range(0, n, batch_size):
        batch = order[start : start + batch_size]
        x4 = np.stack([samples[i] for i in batch])
        model.zero_grads()
        total += model.batch_loss_and_backward(x4, labels[batch])
        inv = 1.0 / len(batch)
        for g in model.gradients():
            g *= inv
        if lr > 0:
            sgd_step(model.parameters(), model.gradients(), lr)
    mean_loss = total / n
    if not math.isfinite(mean_loss):
        raise FloatingPointError("training loss diverged (non-finite)")
    return mean_loss


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    per_param: dict[str, float]  # parameter name -> max relative error
    max_rel_error: float
    threshold: float
    passed: bool


def grad_check(
    model: Model,
    x: np.ndarray,
    true_class: int,
    h: float = 1e-5,
    threshold: float = 1e-4,
) -> GradCheckReport:
    """Central-difference check of every parameter against backprop.

    Relative error per element is |a - n| / max(|a|, |n|, 1e-12); the report
    carries the max per parameter tensor and overall.
    """
    if model.dtype != np.float64:
        raise ValueError("gradient check requires a double-precision model")
    if not 1e-7 <= h <= 1e-4:
        raise ValueError("step h must lie in [1e-7, 1e-4]")
    model.zero_grads()
    model.loss_and_backward(x, true_class)

    # activations entering each layer; a perturbation in layer i only
    # changes the suffix, so the finite differences rerun layers i..end
    labels = np.array([true_class])
    acts = [x.astype(np.float64, copy=False)[None]]
    for layer in model.layers[:-1]:
        acts.append(layer.forward(acts[-1]))

    def loss_from(layer_index: int) -> float:
        out = acts[layer_index]
        for layer in model.layers[layer_index:-1]:
            out = layer.forward(out)
        return _softmax_ce_batch(out, labels)[0]

    per_param: dict[str, float] = {}
    worst = 0.0
    for i, layer in enumerate(model.layers):
        for param, grad, suffix in zip(layer.params(), layer.grads(), ("weights", "bias")):
            flat = param.reshape(-1)
            numeric = np.empty_like(flat)
            for j in range(flat.shape[0]):
                orig = flat[j]
                flat[j] = orig + h
                loss_plus = loss_from(i)
                flat[j] = orig - h
                loss_minus = loss_from(i)
                flat[j] = orig
                numeric[j] = (loss_plus - loss_minus) / (2 * h)
            a = grad.reshape(-1)
            denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-12)
            err = float(np.max(np.abs(a - numeric) / denom))
            per_param[f"layer{i}.{layer.kind}.{suffix}"] = err
            worst = max(worst, err)
    return GradCheckReport(per_param, worst, threshold, worst < threshold)


# --------------------------------------------------------------------------
# model file I/O
# --------------------------------------------------------------------------

def save_model(model: Model, path) -> None:
    """Binary model file: magic GDN1, version, layer kinds + f32 parameters."""
    chunks = [MODEL_MAGIC, struct.pack("<II", MODEL_FORMAT_VERSION, len(model.layers))]
    for layer in model.layers:
        chunks.append(struct.pack("<B", _KIND_TAGS[layer.kind]))
        for param in layer.params():
            chunks.append(struct.pack("<I", param.ndim))
            chunks.append(struct.pack(f"<{param.ndim}I", *param.shape))
            chunks.append(np.ascontiguousarray(param, dtype="<f4").tobytes())
    chunks.append(
        struct.pack("<III", model.n_classes, model.input_shape[1], model.input_shape[2])
    )
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_model(path) -> Model:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    version, n_layers = struct.unpack_from("<II", buf, 4)
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    pos = 12
    n_params = {"Conv2D": 2, "Dense": 2, "ReLU": 0, "MaxPool2": 0, "SoftmaxCE": 0}
    layers: list = []
    for _ in range(n_layers):
        (tag,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        if tag not in _TAG_KINDS:
            raise ValueError(f"{path}: unknown layer tag {tag}")
        kind = _TAG_KINDS[tag]
        params = []
        for _ in range(n_params[kind]):
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f4", count=count, offset=pos)
            pos += 4 * count
            params.append(arr.reshape(dims).copy())
        if kind == "Conv2D":
            layers.append(Conv2D(*params))
        elif kind == "Dense":
            layers.append(Dense(*params))
        elif kind == "ReLU":
            layers.append(ReLU())
        elif kind == "MaxPool2":
            layers.append(MaxPool2())
        else:
            layers.append(SoftmaxCE())
    n_classes, input_h, input_w = struct.unpack_from("<III", buf, pos)
    pos += 12
    if pos != len(buf):
        raise ValueError(f"{path}: trailing bytes in model file")
    return Model((1, input_h, input_w), n_classes, layers)
