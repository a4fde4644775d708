#!/usr/bin/env python
"""
FivcMMCAN CLI

Command-line interface for generating data, pretraining the matcher and
running matching-aware co-attention experiments.
"""

import logging
from pathlib import Path
from typing import List, NoReturn, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from fivcmmcan import __version__
from fivcmmcan.datasets import generate_dataset, save_jsonl
from fivcmmcan.experiments import (
    SPLIT_FILES,
    ExperimentConfig,
    ablation_suite,
    dump_attention as dump_attention_grids,
    evaluate_checkpoint,
    lambda_sweep,
    load_config,
    pretrain_matcher as pretrain_matcher_checkpoint,
    run as run_experiment,
    sweep_trend,
)
from fivcmmcan.training import EpochRecord, TrainingEvent, TrainingMonitor

app = typer.Typer(
    name="FivcMMCAN",
    help="FivcMMCAN - " "Matching-aware co-attention for multimodal fake news detection",
    rich_markup_mode="rich",
)

console = Console()

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Experiment config (JSON or YAML)")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory (overrides config)")
SEED_OPTION = typer.Option(None, "--seed", "-s", help="Single seed (overrides config)")
DATA_SEED_OPTION = typer.Option(None, "--seed", "-s", help="Generator seed (overrides config)")
VERBOSE_OPTION = typer.Option(False, "--verbose", "-v", help="Enable debug logging")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=verbose)],
        force=True,
    )


def _load(config: Optional[Path], out: Optional[Path], seed: Optional[int]) -> ExperimentConfig:
    return load_config(config, out=str(out) if out is not None else None, seed=seed)


def _data_override(config: Optional[Path]) -> Optional[ExperimentConfig]:
    return load_config(config) if config is not None else None


def _fail(e: Exception) -> NoReturn:
    console.print(f"[red]❌ {type(e).__name__}: {e}[/red]")
    raise typer.Exit(1)


def _on_training_event(event: TrainingEvent, record: Optional[EpochRecord]) -> None:
    if event == TrainingEvent.EARLY_STOP and record is not None:
        console.print(f"[yellow]Early stop after epoch {record.epoch}[/yellow]")


@app.command()
def generate(
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = DATA_SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Generate the synthetic train/val/test splits as JSON lines
    """
    _setup_logging(verbose)
    try:
        experiment = _load(config, None, None)
        generator = experiment.generator
        if seed is not None:
            generator = generator.model_copy(update={"seed": seed})
        target = out if out is not None else Path(experiment.out) / "data"
        target.mkdir(parents=True, exist_ok=True)
        splits = generate_dataset(generator, workers=experiment.train.workers)
        for name, items in zip(SPLIT_FILES, splits):
            save_jsonl(items, target / name)
    except Exception as e:
        _fail(e)
    console.print(
        f"[green]✅ Generated {sum(len(s) for s in splits)} items in {target}[/green]"
    )


@app.command("pretrain-matcher")
def pretrain_matcher(
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Pretrain the bilinear image-text matcher and save it as a checkpoint
    """
    _setup_logging(verbose)
    try:
        experiment = _load(config, out, seed)
        path = pretrain_matcher_checkpoint(experiment)
    except Exception as e:
        _fail(e)
    console.print(f"[green]✅ Matcher saved to {path}[/green]")


@app.command()
def run(
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Train one variant per seed and write metrics, history and checkpoints
    """
    _setup_logging(verbose)
    console.print(
        Panel.fit(
            Text("FivcMMCAN Experiment Runner", style="bold blue"),
            subtitle="Matching-aware co-attention",
        )
    )
    try:
        experiment = _load(config, out, seed)
        records = run_experiment(experiment, TrainingMonitor(on_event=_on_training_event))
    except Exception as e:
        _fail(e)

    table = Table(title=f"Test metrics ({experiment.train.variant.value})")
    for column in ("seed", "best epoch", "accuracy", "F1 fake", "F1 real"):
        table.add_column(column, justify="right")
    for record in records:
        m = record.test_metrics
        table.add_row(
            str(record.seed), str(record.best_epoch),
            f"{m.accuracy:.4f}", f"{m.f1_fake:.4f}", f"{m.f1_real:.4f}",
        )
    console.print(table)
    console.print(f"[green]✅ {len(records)} run(s) written to {experiment.out}[/green]")


@app.command()
def ablate(
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Run all six variants over every seed and write the comparison table
    """
    _setup_logging(verbose)
    try:
        experiment = _load(config, out, seed)
        rows = ablation_suite(experiment)
    except Exception as e:
        _fail(e)

    table = Table(title="Ablation (mean ± std over seeds)")
    for column in ("variant", "accuracy", "F1 fake", "F1 real"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            row["variant"],
            f"{row['accuracy_mean']:.4f} ± {row['accuracy_std']:.4f}",
            f"{row['f1_fake_mean']:.4f} ± {row['f1_fake_std']:.4f}",
            f"{row['f1_real_mean']:.4f} ± {row['f1_real_std']:.4f}",
        )
    console.print(table)
    console.print(f"[green]✅ Ablation written to {Path(experiment.out) / 'ablation.csv'}[/green]")


@app.command()
def sweep(
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[Path] = OUT_OPTION,
    seed: Optional[int] = SEED_OPTION,
    values: Optional[List[float]] = typer.Option(
        None, "--lambda", "-l", help="lambda_KL value (repeatable, overrides config)"
    ),
    verbose: bool = VERBOSE_OPTION,
):
    """
    Train the full model over a grid of lambda_KL values
    """
    _setup_logging(verbose)
    try:
        experiment = _load(config, out, seed)
        rows = lambda_sweep(experiment, values or None)
    except Exception as e:
        _fail(e)

    table = Table(title="lambda_KL sweep (mean over seeds)")
    for column in ("lambda_KL", "accuracy", "avg F1"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(f"{row['lambda']:g}", f"{row['accuracy']:.4f}", f"{row['avg_f1']:.4f}")
    console.print(table)
    if sweep_trend(rows):
        console.print("[blue]Accuracy rises then falls over lambda_KL[/blue]")
    else:
        console.print("[yellow]Accuracy does not rise then fall over lambda_KL[/yellow]")
    console.print(f"[green]✅ Sweep written to {Path(experiment.out) / 'sweep.csv'}[/green]")


@app.command("dump-attention")
def dump_attention(
    checkpoint: Path = typer.Option(..., "--checkpoint", "-k", help="Run checkpoint"),
    item: int = typer.Option(..., "--item", "-i", help="News item id"),
    out: Path = typer.Option(Path("attention"), "--out", "-o", help="Output directory"),
    network: str = typer.Option("text", "--network", "-n", help="'text' or 'vision'"),
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Experiment config holding the item (default: the checkpoint's)"
    ),
    seed: Optional[int] = DATA_SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Write one item's co-attention grids and median-threshold masks
    """
    _setup_logging(verbose)
    try:
        written = dump_attention_grids(
            checkpoint, item, out, network=network,
            config=_data_override(config), data_seed=seed,
        )
    except Exception as e:
        _fail(e)
    console.print(f"[green]✅ {len(written)} attention files written to {out}[/green]")


@app.command("eval")
def evaluate(
    checkpoint: Path = typer.Option(..., "--checkpoint", "-k", help="Run checkpoint"),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Output directory (default: next to the checkpoint)"
    ),
    split: str = typer.Option("test", "--split", help="train, val or test"),
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Experiment config to score on (default: the checkpoint's)"
    ),
    seed: Optional[int] = DATA_SEED_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Re-evaluate a checkpoint and write its metrics table
    """
    _setup_logging(verbose)
    target = out if out is not None else checkpoint.parent / f"eval_{split}"
    try:
        metrics = evaluate_checkpoint(
            checkpoint, target, split=split,
            config=_data_override(config), data_seed=seed,
        )
    except Exception as e:
        _fail(e)
    console.print(
        f"[green]✅ {split} accuracy {metrics.accuracy:.4f}, "
        f"F1 fake {metrics.f1_fake:.4f}, F1 real {metrics.f1_real:.4f} "
        f"({target / 'metrics.csv'})[/green]"
    )


@app.command()
def info():
    """
    Show information about FivcMMCAN
    """
    info_text = f"""
    [bold blue]FivcMMCAN[/bold blue] {__version__}

    Image-text matching aware co-attention with mutual knowledge
    distillation between a text-centered and a vision-centered network,
    trained from scratch on synthetic multimodal news.

    [bold]Features:[/bold]
    • Reverse-mode autodiff and AdamW on numpy
    • Matching-gated co-attention fusion
    • Six-variant ablation suite and lambda_KL sweep
    • Attention grids with median-threshold masks

    [bold]Usage Examples:[/bold]
    fivcmmcan generate --out data                                  # Synthetic splits
    fivcmmcan pretrain-matcher --config exp.yaml                   # Frozen matcher
    fivcmmcan run --config exp.yaml --seed 1                       # Single run
    fivcmmcan ablate --config exp.yaml                             # Ablation suite
    fivcmmcan sweep --config exp.yaml                              # lambda_KL sweep
    fivcmmcan dump-attention -k outputs/full/seed_0/model.ckpt -i 800
    fivcmmcan eval -k outputs/full/seed_0/model.ckpt
    """

    console.print(Panel(info_text, title="FivcMMCAN", border_style="blue"))


def main():
    """
    Main entry point for the CLI
    """
    app()


if __name__ == "__main__":
    main()
