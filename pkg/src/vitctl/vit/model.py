"""Encoder-only Vision Transformer on the autodiff engine.

Wiring: flattened patches are projected to ``d_model`` and a learned positional table
is added; ``t`` pre-norm encoders follow (``x + MHA(LN(x))`` then ``x + FFN(LN(x))``);
tokens are mean-pooled and mapped to class logits. Each head owns its own
``W_q, W_k`` (d_model x d_key) and ``W_v`` (d_model x d_value); head outputs are
concatenated and projected back to ``d_model``.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from vitctl.autodiff import ops
from vitctl.autodiff.tensor import Operand, Parameter, Tensor
from vitctl.data.transforms import extract_patch_batch
from vitctl.exceptions import DimensionError
from vitctl.models import ModelConfig, Precision
from vitctl.vit.counting import enumerate_params

logger = logging.getLogger(__name__)


class AttentionHead:
    """Query/key/value projections of one head."""

    def __init__(
        self,
        w_q: Parameter,
        w_k: Parameter,
        w_v: Parameter,
        b_q: Parameter | None = None,
        b_k: Parameter | None = None,
        b_v: Parameter | None = None,
    ) -> None:
        self.w_q, self.w_k, self.w_v = w_q, w_k, w_v
        self.b_q, self.b_k, self.b_v = b_q, b_k, b_v

    def parameters(self) -> list[Parameter]:
        found = [self.w_q, self.b_q, self.w_k, self.b_k, self.w_v, self.b_v]
        return [p for p in found if p is not None]


class EncoderBlock:
    """Multi-head attention plus one-hidden-layer feedforward network."""

    def __init__(
        self,
        heads: list[AttentionHead],
        w_o: Parameter,
        b_o: Parameter | None,
        norm1: tuple[Parameter, Parameter],
        norm2: tuple[Parameter, Parameter],
        w_1: Parameter,
        b_1: Parameter | None,
        w_2: Parameter,
        b_2: Parameter | None,
    ) -> None:
        self.heads = heads
        self.w_o, self.b_o = w_o, b_o
        self.norm1_gain, self.norm1_shift = norm1
        self.norm2_gain, self.norm2_shift = norm2
        self.w_1, self.b_1 = w_1, b_1
        self.w_2, self.b_2 = w_2, b_2

    def parameters(self) -> list[Parameter]:
        found: list[Parameter | None] = []
        for head in self.heads:
            found.extend(head.parameters())
        found += [
            self.w_o,
            self.b_o,
            self.norm1_gain,
            self.norm1_shift,
            self.norm2_gain,
            self.norm2_shift,
            self.w_1,
            self.b_1,
            self.w_2,
            self.b_2,
        ]
        return [p for p in found if p is not None]


class VisionTransformer:
    """Parameters of a built model plus its configuration."""

    def __init__(
        self,
        config: ModelConfig,
        precision: Precision,
        embed_weight: Parameter,
        embed_bias: Parameter | None,
        positional: Parameter,
        encoders: list[EncoderBlock],
        classifier_weight: Parameter,
        classifier_bias: Parameter | None,
    ) -> None:
        self.config = config
        self.precision = precision
        self.embed_weight = embed_weight
        self.embed_bias = embed_bias
        self.positional = positional
        self.encoders = encoders
        self.classifier_weight = classifier_weight
        self.classifier_bias = classifier_bias

    def parameters(self) -> list[Parameter]:
        found: list[Parameter | None] = [self.embed_weight, self.embed_bias, self.positional]
        for block in self.encoders:
            found.extend(block.parameters())
        found += [self.classifier_weight, self.classifier_bias]
        return [p for p in found if p is not None]

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def param_count(self) -> int:
        """Parameter total by enumeration of the built arrays."""
        return enumerate_params(p.shape for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, images: Tensor | np.ndarray) -> Tensor:
        return forward(images, self)


class _Builder:
    """Draws parameters in a fixed order from one seeded generator."""

    def __init__(self, seed: int, precision: Precision) -> None:
        self.rng = np.random.default_rng(seed)
        self.precision = precision

    def matrix(self, name: str, fan_in: int, fan_out: int) -> Parameter:
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        values = self.rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return Parameter(name, values, self.precision)

    def constant(self, name: str, shape: tuple[int, ...], fill: float = 0.0) -> Parameter:
        return Parameter(name, np.full(shape, fill), self.precision)

    def bias(self, name: str, width: int, enabled: bool) -> Parameter | None:
        return self.constant(name, (width,)) if enabled else None


def build(
    config: ModelConfig, seed: int, precision: Precision | str = Precision.FLOAT32
) -> VisionTransformer:
    """Initialize a model deterministically from ``seed``.

    Matrices are Glorot-uniform, biases and the positional table zero, layer-norm
    gains one.
    """
    precision = Precision(precision)
    mk = _Builder(seed, precision)
    d, bias = config.d_model, config.use_bias

    embed_weight = mk.matrix("embed.weight", config.patch_dim, d)
    embed_bias = mk.bias("embed.bias", d, bias)
    positional = mk.constant("positional", (config.tokens, d))

    encoders = []
    for i in range(config.encoders):
        pre = f"encoders.{i}"
        heads = []
        for j in range(config.heads):
            hp = f"{pre}.heads.{j}"
            heads.append(
                AttentionHead(
                    w_q=mk.matrix(f"{hp}.w_q", d, config.d_key),
                    w_k=mk.matrix(f"{hp}.w_k", d, config.d_key),
                    w_v=mk.matrix(f"{hp}.w_v", d, config.d_value),
                    b_q=mk.bias(f"{hp}.b_q", config.d_key, bias),
                    b_k=mk.bias(f"{hp}.b_k", config.d_key, bias),
                    b_v=mk.bias(f"{hp}.b_v", config.d_value, bias),
                )
            )
        encoders.append(
            EncoderBlock(
                heads=heads,
                w_o=mk.matrix(f"{pre}.out.weight", config.heads * config.d_value, d),
                b_o=mk.bias(f"{pre}.out.bias", d, bias),
                norm1=(
                    mk.constant(f"{pre}.norm1.gain", (d,), 1.0),
                    mk.constant(f"{pre}.norm1.shift", (d,)),
                ),
                norm2=(
                    mk.constant(f"{pre}.norm2.gain", (d,), 1.0),
                    mk.constant(f"{pre}.norm2.shift", (d,)),
                ),
                w_1=mk.matrix(f"{pre}.ffn.w1", d, config.d_ff),
                b_1=mk.bias(f"{pre}.ffn.b1", config.d_ff, bias),
                w_2=mk.matrix(f"{pre}.ffn.w2", config.d_ff, d),
                b_2=mk.bias(f"{pre}.ffn.b2", d, bias),
            )
        )

    model = VisionTransformer(
        config=config,
        precision=precision,
        embed_weight=embed_weight,
        embed_bias=embed_bias,
        positional=positional,
        encoders=encoders,
        classifier_weight=mk.matrix("classifier.weight", d, config.classes),
        classifier_bias=mk.bias("classifier.bias", config.classes, bias),
    )
    logger.debug(
        "Built h=%d t=%d model with %d parameters (seed %d)",
        config.heads,
        config.encoders,
        model.param_count(),
        seed,
    )
    return model


def _affine(x: Operand, weight: Parameter, bias: Parameter | None) -> Tensor:
    out = ops.matmul(x, weight)
    return ops.add(out, bias) if bias is not None else out


def patch_embed(images: Tensor | np.ndarray, model: VisionTransformer) -> Tensor:
    """Patch tokens with positional rows added: C x s x s -> N x d, or batched."""
    cfg = model.config
    arr = images.data if isinstance(images, Tensor) else np.asarray(images)
    single = arr.ndim == 3
    batch = arr[None] if single else arr
    expected = (cfg.channels, cfg.image_size, cfg.image_size)
    if batch.ndim != 4 or batch.shape[1:] != expected:
        raise DimensionError(f"images of shape {arr.shape} do not match geometry {expected}")
    patches = Tensor(extract_patch_batch(batch, cfg.patch_size), model.precision)
    tokens = ops.add(_affine(patches, model.embed_weight, model.embed_bias), model.positional)
    return ops.reshape(tokens, tokens.shape[1:]) if single else tokens


def multi_head_attention(
    tokens: Tensor,
    block: EncoderBlock,
    weights_sink: list[np.ndarray] | None = None,
) -> Tensor:
    """Scaled dot-product attention per head, concatenated and output-projected."""
    outputs = []
    for head in block.heads:
        q = _affine(tokens, head.w_q, head.b_q)
        k = _affine(tokens, head.w_k, head.b_k)
        v = _affine(tokens, head.w_v, head.b_v)
        scores = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(head.w_q.shape[1]))
        weights = ops.softmax_rows(scores)
        if weights_sink is not None:
            weights_sink.append(weights.numpy())
        outputs.append(ops.matmul(weights, v))
    joined = ops.concat(outputs, axis=-1) if len(outputs) > 1 else outputs[0]
    return _affine(joined, block.w_o, block.b_o)


def feedforward(tokens: Tensor, block: EncoderBlock) -> Tensor:
    hidden = ops.gelu(_affine(tokens, block.w_1, block.b_1))
    return _affine(hidden, block.w_2, block.b_2)


def encoder_forward(
    tokens: Tensor, block: EncoderBlock, weights_sink: list[np.ndarray] | None = None
) -> Tensor:
    """Pre-norm residual encoder: x + MHA(LN1(x)), then x + FFN(LN2(x))."""
    normed = ops.layer_norm(tokens, block.norm1_gain, block.norm1_shift)
    x = ops.add(tokens, multi_head_attention(normed, block, weights_sink))
    normed = ops.layer_norm(x, block.norm2_gain, block.norm2_shift)
    return ops.add(x, feedforward(normed, block))


def forward(images: Tensor | np.ndarray, model: VisionTransformer) -> Tensor:
    """B x C x s x s images -> B x M logits."""
    arr = images.data if isinstance(images, Tensor) else np.asarray(images)
    if arr.ndim != 4:
        raise DimensionError(f"forward expects a B x C x s x s batch, got shape {arr.shape}")
    x = patch_embed(arr, model)
    for block in model.encoders:
        x = encoder_forward(x, block)
    pooled = ops.mean(x, axis=-2)
    return _affine(pooled, model.classifier_weight, model.classifier_bias)


def attention_maps(images: Tensor | np.ndarray, model: VisionTransformer) -> list[list[np.ndarray]]:
    """Attention weights (B x N x N) for every encoder and head."""
    x = patch_embed(images, model)
    maps = []
    for block in model.encoders:
        sink: list[np.ndarray] = []
        x = encoder_forward(x, block, sink)
        maps.append(sink)
    return maps
