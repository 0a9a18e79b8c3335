"""Command line for the parity harness."""

from __future__ import annotations

import json
import sys

import click

from .parity import DEFAULT_THRESHOLD, check_parity, write_report
from .train import train_and_export


@click.group()
def main():
    """Train reference models and check logit parity with the main engine."""


@main.command("train-export")
@click.option("--dataset", required=True)
@click.option("--out", required=True, help="Weight file to write (shared format).")
@click.option("--arch", type=click.Choice(["gcn"]), default="gcn", show_default=True)
@click.option("--hidden", default=20, show_default=True)
@click.option("--depth", default=3, show_default=True)
@click.option("--readout", type=click.Choice(["max", "mean"]), default="max", show_default=True)
@click.option("--task", type=click.Choice(["graph", "node"]), default="graph", show_default=True)
@click.option("--epochs", default=400, show_default=True)
@click.option("--learning-rate", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--occlusion-variants", default=24, show_default=True)
def train_export(dataset, out, arch, hidden, depth, readout, task, epochs,
                 learning_rate, seed, occlusion_variants):
    """Train on a shared-format dataset and export shared-format weights."""
    _, metrics = train_and_export(
        dataset, out, arch=arch, hidden=hidden, depth=depth, readout=readout,
        task=task, epochs=epochs, learning_rate=learning_rate, seed=seed,
        occlusion_variants=occlusion_variants,
    )
    fmt = lambda v: "n/a" if v is None else f"{v:.4f}"
    click.echo(
        f"train acc {fmt(metrics['train_accuracy'])}  val acc {fmt(metrics['val_accuracy'])}  "
        f"test acc {fmt(metrics['test_accuracy'])}"
    )
    click.echo(f"weights: {out}")


@main.command("check-parity")
@click.option("--weights", required=True)
@click.option("--dataset", required=True)
@click.option("--logits", required=True, help="Logit dump produced by the engine's predict command.")
@click.option("--out", default=None, help="Write the parity report to this JSON file.")
@click.option("--threshold", default=DEFAULT_THRESHOLD, show_default=True)
def check(weights, dataset, logits, out, threshold):
    """Compare torch logits against the engine's dump; nonzero exit on failure."""
    report = check_parity(weights, dataset, logits, threshold=threshold)
    worst = max((r["max_abs_diff"] or 0.0) for r in report["graphs"]) if report["graphs"] else 0.0
    click.echo(
        f"{report['num_graphs']} graphs, worst |logit diff| {worst:.3e}, "
        f"{'PASS' if report['passed'] else 'FAIL'}"
    )
    if out:
        write_report(report, out)
        click.echo(f"report: {out}")
    if not report["passed"]:
        for row in report["graphs"]:
            if not row["passed"]:
                click.echo(f"  {row['graph_id']}: {row.get('error') or row['max_abs_diff']}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
