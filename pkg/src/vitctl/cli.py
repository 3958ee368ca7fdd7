"""Typer CLI for vitctl."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated, Any

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

import vitctl
from vitctl.exceptions import ConfigError, VitctlError

app = typer.Typer(
    name="vitctl",
    help="Capacity and overdetermination experiments with Vision Transformers.",
)
config_app = typer.Typer(name="config", help="Configuration management.")
app.add_typer(config_app)

console = Console()
logger = logging.getLogger("vitctl")


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(f"vitctl {vitctl.__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        bool | None,
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit.",
            callback=_version_callback,
            is_eager=True,
        ),
    ] = None,
    verbose: Annotated[
        bool, typer.Option("--verbose", "-V", help="Log per-epoch and per-batch detail.")
    ] = False,
) -> None:
    """Capacity and overdetermination experiments with Vision Transformers."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _describe(e: Exception) -> str:
    if isinstance(e, ValidationError):
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or e.title
        extra = f" (+{e.error_count() - 1} more)" if e.error_count() > 1 else ""
        return f"invalid {e.title} {where}: {first['msg']}{extra}"
    return str(e)


def _fail(e: Exception) -> typer.Exit:
    console.print(f"[red]Error:[/red] {escape(_describe(e))}", soft_wrap=True)
    return typer.Exit(1)


def _int_list(text: str | None, name: str) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--{name} must be comma-separated integers, got '{text}'") from e


def _document(path: Path | None) -> dict[str, Any]:
    from vitctl.config import load_document

    return load_document(path) if path is not None else {}


def _section(document: dict[str, Any], key: str) -> dict[str, Any]:
    value = document.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' in the config document must be a mapping")
    return value


def _check_sections(document: dict[str, Any], allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown section(s) in the config document: {', '.join(unknown)} "
            f"(expected {', '.join(allowed)})"
        )


# Shared options

ConfigOpt = Annotated[
    Path | None, typer.Option("--config", "-c", help="JSON or YAML config document.")
]
ImageSizeOpt = Annotated[int | None, typer.Option("--image-size", help="Image side s.")]
PatchSizeOpt = Annotated[int | None, typer.Option("--patch-size", help="Patch side p.")]
ChannelsOpt = Annotated[int | None, typer.Option("--channels", help="Image channels C.")]
DimsOpt = Annotated[
    int | None, typer.Option("--dims", help="Set d_model, d_key, d_value and d_ff at once.")
]
DModelOpt = Annotated[int | None, typer.Option("--d-model", help="Token width.")]
DKeyOpt = Annotated[int | None, typer.Option("--d-key", help="Query/key width per head.")]
DValueOpt = Annotated[int | None, typer.Option("--d-value", help="Value width per head.")]
DFfOpt = Annotated[int | None, typer.Option("--d-ff", help="Feedforward hidden width.")]
HeadsOpt = Annotated[int | None, typer.Option("--heads", "-h", help="Attention heads h.")]
EncodersOpt = Annotated[int | None, typer.Option("--encoders", "-t", help="Encoders t.")]
ClassesOpt = Annotated[int | None, typer.Option("--classes", "-m", help="Output classes M.")]
NoBiasOpt = Annotated[bool, typer.Option("--no-bias", help="Drop all bias vectors.")]
JsonOpt = Annotated[bool, typer.Option("--json", help="Output as JSON.")]
OutOpt = Annotated[Path | None, typer.Option("--out", "-o", help="Write the table to a file.")]


def _model_overrides(
    image_size: int | None,
    patch_size: int | None,
    channels: int | None,
    dims: int | None,
    d_model: int | None,
    d_key: int | None,
    d_value: int | None,
    d_ff: int | None,
    heads: int | None,
    encoders: int | None,
    classes: int | None,
    no_bias: bool,
) -> dict[str, Any]:
    widths = dict.fromkeys(("d_model", "d_key", "d_value", "d_ff"), dims)
    explicit = {"d_model": d_model, "d_key": d_key, "d_value": d_value, "d_ff": d_ff}
    widths.update({k: v for k, v in explicit.items() if v is not None})
    return {
        "image_size": image_size,
        "patch_size": patch_size,
        "channels": channels,
        **widths,
        "heads": heads,
        "encoders": encoders,
        "classes": classes,
        "use_bias": False if no_bias else None,
    }


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Could not write {out}: {e}") from e
    console.print(f"[green]Wrote {out}[/green]")


# --- Capacity commands ---


@app.command()
def count(
    config: ConfigOpt = None,
    image_size: ImageSizeOpt = None,
    patch_size: PatchSizeOpt = None,
    channels: ChannelsOpt = None,
    dims: DimsOpt = None,
    d_model: DModelOpt = None,
    d_key: DKeyOpt = None,
    d_value: DValueOpt = None,
    d_ff: DFfOpt = None,
    heads: HeadsOpt = None,
    encoders: EncodersOpt = None,
    classes: ClassesOpt = None,
    no_bias: NoBiasOpt = False,
    check: Annotated[
        bool, typer.Option("--check", help="Also build the model and enumerate its arrays.")
    ] = False,
    json_output: JsonOpt = False,
) -> None:
    """Closed-form parameter count of a ViT configuration."""
    from vitctl.config import merge_overrides
    from vitctl.models import ModelConfig
    from vitctl.vit.counting import count_params
    from vitctl.vit.model import build

    try:
        overrides = _model_overrides(
            image_size, patch_size, channels, dims, d_model, d_key, d_value, d_ff,
            heads, encoders, classes, no_bias,
        )
        model_config = ModelConfig(**merge_overrides(_document(config), overrides))
        breakdown = count_params(model_config)
        enumerated = build(model_config, seed=0).param_count() if check else None
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    if json_output:
        console.print(breakdown.model_dump_json(indent=2))
        return
    table = Table(title=f"Parameters (h={model_config.heads}, t={model_config.encoders})")
    table.add_column("Part")
    table.add_column("Count", justify="right")
    table.add_row("embedding", f"{breakdown.embedding:,}")
    table.add_row("positional", f"{breakdown.positional:,}")
    table.add_row("attention / encoder", f"{breakdown.attention_per_encoder:,}")
    table.add_row("feedforward / encoder", f"{breakdown.ffn_per_encoder:,}")
    table.add_row("norms / encoder", f"{breakdown.norm_per_encoder:,}")
    stacked = breakdown.encoders * breakdown.per_encoder
    table.add_row(f"encoders x {breakdown.encoders}", f"{stacked:,}")
    table.add_row("classifier", f"{breakdown.classifier:,}")
    table.add_row("[bold]total[/bold]", f"[bold]{breakdown.total:,}[/bold]")
    console.print(table)
    if enumerated is not None:
        style = "green" if enumerated == breakdown.total else "red"
        console.print(f"[{style}]Enumerated: {enumerated:,}[/{style}]")


@app.command()
def qratio(
    m: Annotated[int, typer.Option("--m", help="Output count M (classes).")],
    k: Annotated[int, typer.Option("--k", help="Training samples K.")],
    p: Annotated[int | None, typer.Option("--p", help="Parameter count P.")] = None,
    config: ConfigOpt = None,
    image_size: ImageSizeOpt = None,
    patch_size: PatchSizeOpt = None,
    channels: ChannelsOpt = None,
    dims: DimsOpt = None,
    heads: HeadsOpt = None,
    encoders: EncodersOpt = None,
) -> None:
    """Determination ratio Q = MK/P, from P or from a model configuration."""
    from vitctl.capacity.ratio import classify, noise_fit_fraction, q_ratio
    from vitctl.config import merge_overrides
    from vitctl.models import ModelConfig
    from vitctl.vit.counting import count_params

    try:
        if p is None:
            overrides = _model_overrides(
                image_size, patch_size, channels, dims, None, None, None, None,
                heads, encoders, m, False,
            )
            p = count_params(ModelConfig(**merge_overrides(_document(config), overrides))).total
        q = q_ratio(m, k, p)
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    typer.echo(repr(float(q)))
    console.print(f"Q = {m} x {k} / {p:,} = {q} ({classify(q).value})")
    if q >= 1:
        console.print(f"noise fraction absorbed by the fit: {float(noise_fit_fraction(q)):g}")


@app.command()
def theory(
    noise_variance: Annotated[
        float, typer.Option("--noise-variance", "-s", help="Noise variance sigma^2.")
    ] = 1.0,
    c: Annotated[float, typer.Option("--c", help="Lumped constant of the test law.")] = 1.0,
    q_min: Annotated[float, typer.Option("--q-min", help="Smallest Q.")] = 1.0,
    q_max: Annotated[float, typer.Option("--q-max", help="Largest Q.")] = 1024.0,
    points: Annotated[
        int | None,
        typer.Option("--points", help="Log-spaced points (default: doubling grid)."),
    ] = None,
    out: OutOpt = None,
) -> None:
    """Analytic train/test MSE curves over a Q grid."""
    from vitctl.capacity.theory import curve_sweep, doubling_grid, log_grid
    from vitctl.models import TheoryParams
    from vitctl.sweep.datafile import format_table

    try:
        params = TheoryParams(noise_variance=noise_variance, c=c)
        grid = log_grid(q_min, q_max, points) if points else doubling_grid(q_min, q_max)
        rows = [
            (pt.q, pt.train_mse, pt.test_mse, 1.0 / pt.q if pt.q >= 1 else 1.0)
            for pt in curve_sweep(grid, params)
        ]
        _emit(format_table(("determination", "loss", "val_loss", "noise_fraction"), rows), out)
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None


@app.command()
def plan(
    preset: Annotated[
        str | None, typer.Option("--preset", help="mnist, cifar100, birds, places365, imagenet.")
    ] = None,
    k: Annotated[int | None, typer.Option("--k", help="Training samples K.")] = None,
    heads_list: Annotated[
        str | None, typer.Option("--heads", help="Comma-separated head counts.")
    ] = None,
    encoders_list: Annotated[
        str | None, typer.Option("--encoders", help="Comma-separated encoder counts.")
    ] = None,
    config: ConfigOpt = None,
    image_size: ImageSizeOpt = None,
    patch_size: PatchSizeOpt = None,
    channels: ChannelsOpt = None,
    dims: DimsOpt = None,
    classes: ClassesOpt = None,
    json_output: JsonOpt = False,
) -> None:
    """P, Q and determination regime for every (h, t) grid point."""
    from vitctl.capacity.planner import get_preset, plan_grid
    from vitctl.config import merge_overrides
    from vitctl.models import ModelConfig

    try:
        overrides = _model_overrides(
            image_size, patch_size, channels, dims, None, None, None, None,
            None, None, classes, False,
        )
        if preset is not None:
            chosen = get_preset(preset)
            given = {key: v for key, v in overrides.items() if v is not None}
            base = chosen.config.model_copy(update=given)
            train_size = k or chosen.train_size
            heads = _int_list(heads_list, "heads") or chosen.heads
            encoders = _int_list(encoders_list, "encoders") or chosen.encoders
        else:
            if k is None:
                raise ConfigError("--k is required without --preset")
            base = ModelConfig(**merge_overrides(_document(config), overrides))
            train_size = k
            heads = _int_list(heads_list, "heads") or [1, 2, 4, 8]
            encoders = _int_list(encoders_list, "encoders") or [1, 2, 4, 8]
        rows = plan_grid(base, heads, encoders, train_size)
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    if json_output:
        import json

        console.print(json.dumps([r.model_dump(mode="json") for r in rows], indent=2))
        return
    table = Table(title=f"Determination plan (M={base.classes}, K={train_size:,})")
    table.add_column("h", justify="right")
    table.add_column("t", justify="right")
    table.add_column("P", justify="right")
    table.add_column("Q", justify="right")
    table.add_column("Regime")
    colors = {"underdetermined": "red", "marginal": "yellow", "overdetermined": "green"}
    for r in rows:
        color = colors[r.regime.value]
        table.add_row(
            str(r.heads), str(r.encoders), f"{r.params:,}", f"{r.q:.4g}",
            f"[{color}]{r.regime.value}[/{color}]",
        )
    console.print(table)


# --- Linear oracle ---


@app.command()
def linsim(
    config: ConfigOpt = None,
    p: Annotated[int | None, typer.Option("--p", help="Parameter count P.")] = None,
    m: Annotated[int | None, typer.Option("--m", help="Outputs M.")] = None,
    k: Annotated[
        str | None,
        typer.Option("--k", help="Training-set size, or comma-separated ascending list."),
    ] = None,
    k_test: Annotated[int | None, typer.Option("--k-test", help="Test-set size.")] = None,
    sigma: Annotated[float | None, typer.Option("--sigma", help="Noise std deviation.")] = None,
    trials: Annotated[int | None, typer.Option("--trials", help="Monte Carlo trials.")] = None,
    seed: Annotated[int | None, typer.Option("--seed", help="Base seed.")] = None,
    workers: Annotated[int, typer.Option("--workers", "-w", help="Trial threads.")] = 1,
    out: OutOpt = None,
    json_output: JsonOpt = False,
) -> None:
    """Monte Carlo least-squares check of the overdetermination laws."""
    from vitctl.config import merge_overrides
    from vitctl.models import LinearExperimentConfig
    from vitctl.oracle.linear import fit_lumped_c, oracle_table, sweep_over_k

    try:
        document = _document(config)
        k_values = _int_list(k, "k") if k is not None else document.pop("k_list", None)
        if k_values is None and "k_train" in document:
            k_values = [document["k_train"]]
        if not k_values:
            raise ConfigError("give --k (or k_train / k_list in the config document)")
        document.pop("k_list", None)
        overrides = {
            "p": p, "m": m, "k_test": k_test, "sigma": sigma, "trials": trials, "seed": seed
        }
        experiment = LinearExperimentConfig(
            **merge_overrides(document, overrides | {"k_train": k_values[0]})
        )
        rows = sweep_over_k(experiment, k_values, workers=workers)
        if out is not None:
            _emit(oracle_table(rows), out)
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    if json_output:
        import json

        console.print(json.dumps([r.model_dump() for r in rows], indent=2))
        return
    table = Table(
        title=f"Least squares: P={experiment.p}, M={experiment.m}, "
        f"sigma={experiment.sigma:g}, {experiment.trials} trials"
    )
    for column in ("K", "Q", "train MSE", "predicted", "test MSE", "expected test"):
        table.add_column(column, justify="right")
    for r in rows:
        expected = "-" if r.expected_test_mse is None else f"{r.expected_test_mse:.4f}"
        table.add_row(
            str(r.k), f"{r.q:.4g}",
            f"{r.train_mse:.4f} ± {r.train_stderr:.4f}", f"{r.predicted_train_mse:.4f}",
            f"{r.test_mse:.4f} ± {r.test_stderr:.4f}", expected,
        )
    console.print(table)
    try:
        console.print(f"Fitted c: {fit_lumped_c(rows):.4f}")
    except VitctlError:
        pass


# --- Training ---


@app.command("train")
def train_cmd(
    config: ConfigOpt = None,
    dataset: Annotated[
        str | None, typer.Option("--dataset", help="mnist or synthetic.")
    ] = None,
    data_dir: Annotated[str | None, typer.Option("--data-dir", help="MNIST IDX directory.")] = None,
    train_limit: Annotated[int | None, typer.Option("--train-limit", help="Train samples.")] = None,
    test_limit: Annotated[int | None, typer.Option("--test-limit", help="Test samples.")] = None,
    contextual: Annotated[
        bool, typer.Option("--contextual", help="Synthetic labels depend on a glyph pair.")
    ] = False,
    image_size: ImageSizeOpt = None,
    patch_size: PatchSizeOpt = None,
    dims: DimsOpt = None,
    heads: HeadsOpt = None,
    encoders: EncodersOpt = None,
    no_bias: NoBiasOpt = False,
    epochs: Annotated[int | None, typer.Option("--epochs", "-e", help="Training epochs.")] = None,
    batch_size: Annotated[int | None, typer.Option("--batch-size", help="Batch size.")] = None,
    learning_rate: Annotated[float | None, typer.Option("--lr", help="Learning rate.")] = None,
    weight_decay: Annotated[float | None, typer.Option("--wd", help="Weight decay.")] = None,
    seed: Annotated[int | None, typer.Option("--seed", help="Init/shuffle seed.")] = None,
    precision: Annotated[str | None, typer.Option("--precision", help="float32/float64.")] = None,
    no_augment: Annotated[bool, typer.Option("--no-augment", help="Disable augmentation.")] = False,
    checkpoint: Annotated[
        Path | None, typer.Option("--checkpoint", help="Save the trained model here.")
    ] = None,
    metrics_log: Annotated[
        Path | None, typer.Option("--metrics-log", help="Append epoch rows here.")
    ] = None,
    json_output: JsonOpt = False,
) -> None:
    """Train one ViT configuration and report per-epoch losses."""
    from vitctl.config import get_config, get_data_dir, merge_overrides
    from vitctl.data.loader import load_dataset
    from vitctl.models import DatasetRef, ModelConfig, TrainConfig
    from vitctl.train.loop import train
    from vitctl.vit.checkpoint import save_checkpoint
    from vitctl.vit.counting import count_params
    from vitctl.vit.model import build

    try:
        document = _document(config)
        _check_sections(document, ("model", "train", "dataset"))
        user = get_config()

        model_doc = merge_overrides(
            _section(document, "model"),
            _model_overrides(
                image_size, patch_size, None, dims, None, None, None, None,
                heads, encoders, None, no_bias,
            ),
        )
        train_doc = merge_overrides(
            {"seed": user["seed"], "precision": user["precision"]} | _section(document, "train"),
            {
                "epochs": epochs, "batch_size": batch_size, "learning_rate": learning_rate,
                "weight_decay": weight_decay, "seed": seed, "precision": precision,
            },
        )
        if no_augment:
            train_doc["augmentation"] = {"enabled": False}
        data_doc = merge_overrides(
            {"data_dir": get_data_dir()} | _section(document, "dataset"),
            {
                "kind": dataset,
                "data_dir": data_dir,
                "train_limit": train_limit,
                "test_limit": test_limit,
            },
        )
        if contextual:
            data_doc["synthetic"] = {**data_doc.get("synthetic", {}), "contextual": True}

        if "image_size" in model_doc:
            data_doc.setdefault("image_size", model_doc["image_size"])
        ref = DatasetRef(**data_doc)
        train_set, test_set = load_dataset(ref)
        model_doc.setdefault("image_size", train_set.image_size)
        model_doc.setdefault("channels", train_set.channels)
        model_doc.setdefault("classes", train_set.class_count)
        model_config = ModelConfig(**model_doc)
        train_config = TrainConfig(**train_doc)

        model = build(model_config, seed=train_config.seed, precision=train_config.precision)
        console.print(
            f"Training P={count_params(model_config).total:,} on K={len(train_set):,} "
            f"for {train_config.epochs} epoch(s)"
        )
        history = train(model, train_set, test_set, train_config, metrics_log=metrics_log)
        if checkpoint is not None:
            path = save_checkpoint(model, checkpoint)
            console.print(f"[green]Checkpoint saved to {path}[/green]")
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    if json_output:
        import json

        console.print(json.dumps([h.model_dump() for h in history], indent=2))
        return
    table = Table(title="Training")
    for column in ("Epoch", "loss", "val_loss", "seconds"):
        table.add_column(column, justify="right")
    for h in history:
        table.add_row(str(h.epoch), f"{h.train_loss:.4f}", f"{h.test_loss:.4f}", f"{h.seconds:.1f}")
    console.print(table)


# --- Sweeps ---


def _print_records(records: list[Any]) -> None:
    table = Table(title="Sweep")
    for column in ("h", "t", "P", "Q", "loss", "val_loss", "gap"):
        table.add_column(column, justify="right")
    for r in records:
        if r.ok:
            table.add_row(
                str(r.heads), str(r.encoders), f"{r.params:,}", f"{r.q:.4g}",
                f"{r.train_loss:.4f}", f"{r.test_loss:.4f}", f"{r.generalization_gap:+.4f}",
            )
        else:
            table.add_row(
                str(r.heads), str(r.encoders), f"{r.params:,}", f"{r.q:.4g}",
                "[red]failed[/red]", "", "",
            )
    console.print(table)


def _print_trends(checks: list[Any]) -> None:
    marks = {
        True: "[green]ok[/green]",
        False: "[yellow]not met[/yellow]",
        None: "[dim]skipped[/dim]",
    }
    for check in checks:
        console.print(f"  {marks[check.passed]}  {check.name}: {escape(check.detail)}")


@app.command()
def sweep(
    config: ConfigOpt = None,
    name: Annotated[str | None, typer.Option("--name", help="Prefix of the data files.")] = None,
    heads_list: Annotated[
        str | None, typer.Option("--heads", help="Comma-separated head counts.")
    ] = None,
    encoders_list: Annotated[
        str | None, typer.Option("--encoders", help="Comma-separated encoder counts.")
    ] = None,
    dataset: Annotated[str | None, typer.Option("--dataset", help="mnist or synthetic.")] = None,
    data_dir: Annotated[str | None, typer.Option("--data-dir", help="MNIST IDX directory.")] = None,
    train_limit: Annotated[int | None, typer.Option("--train-limit", help="Train samples.")] = None,
    test_limit: Annotated[int | None, typer.Option("--test-limit", help="Test samples.")] = None,
    dims: DimsOpt = None,
    epochs: Annotated[int | None, typer.Option("--epochs", "-e", help="Training epochs.")] = None,
    seed: Annotated[int | None, typer.Option("--seed", help="Grid seed.")] = None,
    workers: Annotated[int | None, typer.Option("--workers", "-w", help="Parallel runs.")] = None,
    out: Annotated[Path | None, typer.Option("--out", "-o", help="Output directory.")] = None,
) -> None:
    """Train every (h, t) pair and write records, manifest and cross-section tables."""
    from vitctl.config import get_config, get_data_dir, merge_overrides
    from vitctl.models import SweepGrid
    from vitctl.sweep.grid import run_sweep, trend_report, write_sweep_outputs

    try:
        document = _document(config)
        user = get_config()
        grid_doc = merge_overrides(
            {"output_dir": user["output_dir"], "workers": user["workers"], "seed": user["seed"]}
            | document,
            {
                "name": name,
                "heads": _int_list(heads_list, "heads"),
                "encoders": _int_list(encoders_list, "encoders"),
                "seed": seed,
                "workers": workers,
                "output_dir": str(out) if out is not None else None,
            },
        )
        base_doc = dict(_section(grid_doc, "base"))
        if dims is not None:
            base_doc.update(dict.fromkeys(("d_model", "d_key", "d_value", "d_ff"), dims))
        if base_doc:
            grid_doc["base"] = base_doc
        train_doc = merge_overrides(
            {"precision": user["precision"]} | _section(grid_doc, "train"), {"epochs": epochs}
        )
        grid_doc["train"] = train_doc
        grid_doc["dataset"] = merge_overrides(
            {"data_dir": get_data_dir()} | _section(grid_doc, "dataset"),
            {
                "kind": dataset,
                "data_dir": data_dir,
                "train_limit": train_limit,
                "test_limit": test_limit,
            },
        )
        grid = SweepGrid(**grid_doc)
        out_dir = Path(grid.output_dir)
        records = run_sweep(grid, metrics_dir=out_dir / "metrics")
        written = write_sweep_outputs(grid, records, out_dir)
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None

    _print_records(records)
    _print_trends(trend_report(records))
    for path in written:
        console.print(f"[green]Wrote {path}[/green]")


@app.command()
def emit(
    records_file: Annotated[Path, typer.Argument(help="records.json from a sweep.")],
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory.")] = Path("."),
    name: Annotated[str, typer.Option("--name", help="Prefix of the data files.")] = "sweep",
    fixed: Annotated[
        int | None,
        typer.Option("--fixed", help="Value held fixed on each axis (4, else the largest)."),
    ] = None,
) -> None:
    """Re-emit the cross-section data files from a records file."""
    from vitctl.models import SectionAxis
    from vitctl.sweep.datafile import emit_data_file, read_records
    from vitctl.sweep.grid import cross_section, data_file_name, section_value

    try:
        records = read_records(records_file)
        written = []
        for axis in (SectionAxis.ENCODERS, SectionAxis.HEADS):
            at = fixed if fixed is not None else section_value(records, axis)
            section = cross_section(records, axis, at)
            written.append(emit_data_file(section, out / data_file_name(name, axis, at)))
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None
    for path in written:
        console.print(f"[green]Wrote {path}[/green]")


# --- Data ---


@app.command()
def synth(
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory.")],
    config: ConfigOpt = None,
    image_size: ImageSizeOpt = None,
    glyph_size: Annotated[int | None, typer.Option("--glyph-size", help="Glyph side.")] = None,
    classes: ClassesOpt = None,
    contextual: Annotated[
        bool, typer.Option("--contextual", help="Label depends on a glyph pair.")
    ] = False,
    train_samples: Annotated[int | None, typer.Option("--train-samples")] = None,
    test_samples: Annotated[int | None, typer.Option("--test-samples")] = None,
    seed: Annotated[int | None, typer.Option("--seed")] = None,
    gzip_output: Annotated[bool, typer.Option("--gzip", help="Write .gz files.")] = False,
) -> None:
    """Generate a glyph dataset and export it in MNIST's IDX layout."""
    from vitctl.config import merge_overrides
    from vitctl.data.idx import write_dataset_idx
    from vitctl.data.loader import MNIST_FILES
    from vitctl.data.synthetic import synth_context_dataset
    from vitctl.models import Split, SyntheticContextConfig

    try:
        cfg = SyntheticContextConfig(
            **merge_overrides(
                _document(config),
                {
                    "image_size": image_size, "glyph_size": glyph_size, "class_count": classes,
                    "contextual": True if contextual else None, "train_samples": train_samples,
                    "test_samples": test_samples, "seed": seed,
                },
            )
        )
        suffix = ".gz" if gzip_output else ""
        for split, data in zip((Split.TRAIN, Split.TEST), synth_context_dataset(cfg)):
            images, labels = MNIST_FILES[split]
            write_dataset_idx(data, out / f"{images}{suffix}", out / f"{labels}{suffix}")
            console.print(f"[green]{split.value}: {len(data):,} samples[/green]")
    except (VitctlError, ValidationError) as e:
        raise _fail(e) from None
    console.print(f"Wrote IDX files to {out}")


# --- Config commands ---


@config_app.command("init")
def config_init() -> None:
    """Create default config file."""
    from vitctl.config import init_config

    try:
        path = init_config()
        console.print(f"[green]Config created at {path}[/green]")
    except ConfigError as e:
        raise _fail(e) from None


@config_app.command("set")
def config_set(
    key: Annotated[str, typer.Argument(help="Config key to set.")],
    value: Annotated[str, typer.Argument(help="Value to set.")],
) -> None:
    """Set a config value."""
    from vitctl.config import set_value

    try:
        set_value(key, value)
        console.print(f"[green]Set {key} = {value}[/green]")
    except ConfigError as e:
        raise _fail(e) from None


@config_app.command("show")
def config_show() -> None:
    """Show current configuration."""
    from vitctl.config import get_config

    try:
        config = get_config()
    except ConfigError as e:
        raise _fail(e) from None
    for k, v in sorted(config.items()):
        console.print(f"  {k}: {v}")
