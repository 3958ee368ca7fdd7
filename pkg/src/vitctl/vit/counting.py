"""Closed-form parameter accounting for the encoder-only Vision Transformer."""

from __future__ import annotations

from collections.abc import Iterable

from vitctl.models import ModelConfig, ParamCountBreakdown


def count_params(config: ModelConfig) -> ParamCountBreakdown:
    """Count parameters block by block without building the model."""
    b = 1 if config.use_bias else 0
    d, dk, dv, dff, h = config.d_model, config.d_key, config.d_value, config.d_ff, config.heads

    embedding = config.patch_dim * d + b * d
    positional = config.tokens * d
    # per head: W_q, W_k (d x dk), W_v (d x dv) and their biases; then output projection
    attention = h * (d * (2 * dk + dv) + b * (2 * dk + dv)) + (h * dv) * d + b * d
    ffn = d * dff + b * dff + dff * d + b * d
    norm = 4 * d
    classifier = d * config.classes + b * config.classes

    total = embedding + positional + config.encoders * (attention + ffn + norm) + classifier
    return ParamCountBreakdown(
        embedding=embedding,
        positional=positional,
        attention_per_encoder=attention,
        ffn_per_encoder=ffn,
        norm_per_encoder=norm,
        classifier=classifier,
        encoders=config.encoders,
        total=total,
    )


def enumerate_params(shapes: Iterable[tuple[int, ...]]) -> int:
    """Total element count over a collection of parameter shapes."""
    total = 0
    for shape in shapes:
        size = 1
        for extent in shape:
            size *= extent
        total += size
    return total
