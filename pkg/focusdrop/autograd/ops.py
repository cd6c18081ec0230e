"""
Differentiable operations

Elementwise arithmetic with numpy broadcasting, matmul, ReLU, reductions,
and the layer kernels the CNNs need (conv2d, maxpool2d, global average
pooling, batch norm, linear, softmax cross-entropy). All spatial ops use
NCHW layout.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError
from .tensor import ArrayLike, Function, Tensor, unbroadcast


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# =============================================================================
# Elementwise and linear algebra
# =============================================================================

class Add(Function):
    name = 'add'

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Mul(Function):
    name = 'mul'

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return unbroadcast(grad * self.b, self.a.shape), unbroadcast(grad * self.a, self.b.shape)


class Neg(Function):
    name = 'neg'

    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class MatMul(Function):
    name = 'matmul'

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"{self.name}: shapes {a.shape} and {b.shape} are not aligned")
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class ReLU(Function):
    name = 'relu'

    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, 0).astype(a.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


class Sum(Function):
    name = 'sum'

    def forward(self, a, axis=None, keepdims=False):
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    name = 'mean'

    def forward(self, a, axis=None, keepdims=False):
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        out = np.asarray(a.mean(axis=axis, keepdims=keepdims))
        self.count = a.size // max(out.size, 1)
        return out

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.shape).copy(),)


class Reshape(Function):
    name = 'reshape'

    def forward(self, a, shape=None):
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError:
            raise ShapeError(f"{self.name}: cannot reshape {a.shape} into {tuple(shape)}") from None

    def backward(self, grad):
        return (grad.reshape(self.shape),)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    return Add.apply(a, b)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise product with broadcasting (used for mask multiplication)."""
    return Mul.apply(a, b)


def neg(a: ArrayLike) -> Tensor:
    return Neg.apply(a)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return MatMul.apply(a, b)


def relu(a: ArrayLike) -> Tensor:
    return ReLU.apply(a)


def sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a: ArrayLike, shape) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


# =============================================================================
# Convolution and pooling
# =============================================================================

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class Conv2d(Function):
    """Cross-correlation of (N,C,H,W) input with (O,C,KH,KW) kernel, optional (O,) bias"""
    name = 'conv2d'

    def forward(self, x, w, b=None, stride=1, padding=0):
        if x.ndim != 4 or w.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-D input and kernel, got {x.shape} and {w.shape}")
        if x.shape[1] != w.shape[1]:
            raise ShapeError(f"{self.name}: input channels {x.shape} do not match kernel {w.shape}")
        if b is not None and b.shape != (w.shape[0],):
            raise ShapeError(f"{self.name}: bias {b.shape} does not match kernel {w.shape}")

        n, c, h, wd = x.shape
        kh, kw = w.shape[2], w.shape[3]
        out_h = conv_output_size(h, kh, stride, padding)
        out_w = conv_output_size(wd, kw, stride, padding)
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(
                f"{self.name}: non-positive output size ({out_h}, {out_w}) for input {x.shape}, "
                f"kernel {w.shape}, stride {stride}, padding {padding}"
            )

        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        # (N, C, OH, OW, KH, KW)
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b.reshape(1, -1, 1, 1)

        self.x_shape, self.xp_shape = x.shape, xp.shape
        self.windows, self.w = windows, w
        self.stride, self.padding = stride, padding
        self.has_bias = b is not None
        return np.ascontiguousarray(out)

    def backward(self, grad):
        stride, padding = self.stride, self.padding
        kh, kw = self.w.shape[2], self.w.shape[3]
        out_h, out_w = grad.shape[2], grad.shape[3]

        grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        # (N, OH, OW, C, KH, KW)
        grad_cols = np.tensordot(grad, self.w, axes=([1], [0]))
        grad_xp = np.zeros(self.xp_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                    grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        if padding:
            grad_xp = grad_xp[:, :, padding:-padding, padding:-padding]

        grads = (np.ascontiguousarray(grad_xp), grad_w)
        if self.has_bias:
            grads += (grad.sum(axis=(0, 2, 3)),)
        return grads


class MaxPool2d(Function):
    """Max over kernel x kernel windows, floor convention for partial windows"""
    name = 'maxpool2d'

    def forward(self, x, kernel=2, stride=None):
        stride = stride or kernel
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-D input, got {x.shape}")
        n, c, h, w = x.shape
        out_h = conv_output_size(h, kernel, stride, 0)
        out_w = conv_output_size(w, kernel, stride, 0)
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(f"{self.name}: window {kernel} larger than input {x.shape}")

        windows = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
        flat = windows.reshape(n, c, out_h, out_w, kernel * kernel)
        # first occurrence wins on ties
        self.argmax = flat.argmax(axis=-1)
        self.x_shape, self.kernel, self.stride = x.shape, kernel, stride
        return np.take_along_axis(flat, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, out_h, out_w = grad.shape
        rows = self.argmax // self.kernel + (np.arange(out_h) * self.stride)[None, None, :, None]
        cols = self.argmax % self.kernel + (np.arange(out_w) * self.stride)[None, None, None, :]
        grad_x = np.zeros(self.x_shape, dtype=grad.dtype)
        nn_idx = np.arange(n)[:, None, None, None]
        cc_idx = np.arange(c)[None, :, None, None]
        np.add.at(grad_x, (nn_idx, cc_idx, rows, cols), grad)
        return (grad_x,)


class GlobalAvgPool(Function):
    """(N,C,H,W) -> (N,C): per-channel spatial mean"""
    name = 'global_avg_pool'

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-D input, got {x.shape}")
        self.x_shape = x.shape
        return x.sum(axis=(2, 3)) / (x.shape[2] * x.shape[3])

    def backward(self, grad):
        h, w = self.x_shape[2], self.x_shape[3]
        return (np.broadcast_to(grad[:, :, None, None] / (h * w), self.x_shape).copy(),)


def conv2d(x: ArrayLike, w: ArrayLike, b: Optional[ArrayLike] = None, stride: int = 1, padding: int = 0) -> Tensor:
    if b is None:
        return Conv2d.apply(x, w, stride=stride, padding=padding)
    return Conv2d.apply(x, w, b, stride=stride, padding=padding)


def maxpool2d(x: ArrayLike, kernel: int = 2, stride: Optional[int] = None) -> Tensor:
    return MaxPool2d.apply(x, kernel=kernel, stride=stride)


def global_avg_pool(x: ArrayLike) -> Tensor:
    return GlobalAvgPool.apply(x)


# =============================================================================
# Normalisation, classifier head, loss
# =============================================================================

class BatchNormTrain(Function):
    """Batch statistics over (N,H,W) per channel"""
    name = 'batchnorm2d'

    def forward(self, x, gamma, beta, eps=1e-5):
        if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
            raise ShapeError(f"{self.name}: input {x.shape} vs affine {gamma.shape}/{beta.shape}")
        mu = x.mean(axis=(0, 2, 3), keepdims=True)
        var = x.var(axis=(0, 2, 3), keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.x_hat = (x - mu) * self.inv_std
        self.gamma = gamma
        return self.x_hat * gamma.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1)

    def backward(self, grad):
        axes = (0, 2, 3)
        m = grad.shape[0] * grad.shape[2] * grad.shape[3]
        grad_gamma = (grad * self.x_hat).sum(axis=axes)
        grad_beta = grad.sum(axis=axes)
        d_xhat = grad * self.gamma.reshape(1, -1, 1, 1)
        grad_x = (self.inv_std / m) * (
            m * d_xhat
            - d_xhat.sum(axis=axes, keepdims=True)
            - self.x_hat * (d_xhat * self.x_hat).sum(axis=axes, keepdims=True)
        )
        return grad_x, grad_gamma, grad_beta


class BatchNormEval(Function):
    """Affine normalisation with fixed (running) statistics"""
    name = 'batchnorm2d_eval'

    def forward(self, x, gamma, beta, mean=None, var=None, eps=1e-5):
        if x.ndim != 4 or gamma.shape != (x.shape[1],):
            raise ShapeError(f"{self.name}: input {x.shape} vs affine {gamma.shape}")
        inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
        self.scale = (gamma * inv_std).reshape(1, -1, 1, 1)
        self.x_hat = (x - mean.reshape(1, -1, 1, 1).astype(x.dtype)) * inv_std.reshape(1, -1, 1, 1)
        return self.x_hat * gamma.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1)

    def backward(self, grad):
        return grad * self.scale, (grad * self.x_hat).sum(axis=(0, 2, 3)), grad.sum(axis=(0, 2, 3))


def batch_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
                 training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """
    Batch norm over NCHW input.

    In training mode normalises with batch statistics and updates the running
    buffers in place (unbiased variance, exponential moving average with
    ``momentum``). In eval mode uses the running buffers, which start at zero
    mean and unit variance.
    """
    if not training:
        return BatchNormEval.apply(x, gamma, beta, mean=running_mean, var=running_var, eps=eps)

    out = BatchNormTrain.apply(x, gamma, beta, eps=eps)
    data = x.data
    count = data.shape[0] * data.shape[2] * data.shape[3]
    batch_mean = data.mean(axis=(0, 2, 3))
    batch_var = data.var(axis=(0, 2, 3)) * (count / max(count - 1, 1))
    running_mean *= (1 - momentum)
    running_mean += momentum * batch_mean
    running_var *= (1 - momentum)
    running_var += momentum * batch_var
    return out


class Linear(Function):
    """x @ W.T + b with x (N,in), W (out,in), b (out,)"""
    name = 'linear'

    def forward(self, x, w, b=None):
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
            raise ShapeError(f"{self.name}: input {x.shape} does not match weight {w.shape}")
        self.x, self.w, self.has_bias = x, w, b is not None
        out = x @ w.T
        return out + b if b is not None else out

    def backward(self, grad):
        grads = (grad @ self.w, grad.T @ self.x)
        if self.has_bias:
            grads += (grad.sum(axis=0),)
        return grads


def linear(x: ArrayLike, w: ArrayLike, b: Optional[ArrayLike] = None) -> Tensor:
    if b is None:
        return Linear.apply(x, w)
    return Linear.apply(x, w, b)


class SoftmaxCrossEntropy(Function):
    """Mean softmax cross-entropy of (N,K) logits against integer labels"""
    name = 'softmax_cross_entropy'

    def forward(self, logits, labels=None):
        labels = np.asarray(labels)
        if logits.ndim != 2 or labels.shape != (logits.shape[0],):
            raise ShapeError(f"{self.name}: logits {logits.shape} vs labels {labels.shape}")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        rows = np.arange(logits.shape[0])
        self.probs = np.exp(log_probs)
        self.labels = labels
        return np.asarray(-log_probs[rows, labels].mean(), dtype=logits.dtype)

    def backward(self, grad):
        n = self.probs.shape[0]
        d = self.probs.copy()
        d[np.arange(n), self.labels] -= 1
        return (d * (grad / n),)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    return SoftmaxCrossEntropy.apply(logits, labels=labels)
