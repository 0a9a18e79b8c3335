"""Command-line client for the explanation service.

Every command assembles a request and posts it to the service: in-process by
default, or to a running server via ``--server``. Flags can be overridden by
SUBGRAPHX_* environment variables and pre-seeded from a JSON config file
(flags take precedence).
"""

from __future__ import annotations

import json
import sys

import click

CONTEXT = dict(auto_envvar_prefix="SUBGRAPHX", max_content_width=100)


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(ctx, path: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    return resp.json()


@click.group(context_settings=CONTEXT)
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="JSON file of per-command option defaults; flags take precedence.")
@click.pass_context
def main(ctx, server, config_path):
    """Subgraph explanations for small GNNs: generate data, train, explain, evaluate."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server
    if config_path:
        with open(config_path, "r", encoding="utf-8") as f:
            ctx.default_map = json.load(f)


@main.command()
@click.option("--dataset", type=click.Choice(["ba2motifs", "bashape"]), required=True)
@click.option("--out-dir", default="data", show_default=True)
@click.option("--num-graphs", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def gen(ctx, dataset, out_dir, num_graphs, seed):
    """Generate a synthetic dataset plus its ground-truth motif sidecar."""
    out = _post(ctx, "/gen", {
        "dataset": dataset, "out_dir": out_dir, "num_graphs": num_graphs, "seed": seed,
    })
    click.echo(f"wrote {out['num_records']} records to {out['dataset_path']}")
    click.echo(f"ground truth: {out['ground_truth_path']}")
    click.echo("label counts: " + ", ".join(f"{k}: {v}" for k, v in sorted(out["label_counts"].items())))
    for w in out["warnings"]:
        click.echo(f"warning: {w}", err=True)


@main.command()
@click.option("--dataset", required=True, help="Dataset file to train on.")
@click.option("--out", default="model.json", show_default=True, help="Weight file to write.")
@click.option("--model-type", type=click.Choice(["gcn", "gin"]), default="gcn", show_default=True)
@click.option("--task", type=click.Choice(["graph", "node"]), default="graph", show_default=True)
@click.option("--readout", type=click.Choice(["max", "mean"]), default="mean", show_default=True)
@click.option("--hidden-dims", default="20,20,20", show_default=True)
@click.option("--epochs", default=800, show_default=True)
@click.option("--learning-rate", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--init", type=click.Choice(["auto", "glorot", "degree-basis"]), default="auto",
              show_default=True, help="Weight scheme: degree-basis fits only the classifier over fixed hinge-basis layers.")
@click.option("--occlusion-variants", default=0, show_default=True,
              help="Extra training copies with random nodes zero-padded (degree-basis only).")
@click.pass_context
def train(ctx, dataset, out, model_type, task, readout, hidden_dims, epochs, learning_rate, seed, init, occlusion_variants):
    """Train a classifier with full-batch gradient descent (80/10/10 split)."""
    out_doc = _post(ctx, "/train", {
        "dataset": dataset, "out": out, "model_type": model_type, "task": task,
        "readout": readout, "hidden_dims": [int(x) for x in hidden_dims.split(",")],
        "epochs": epochs, "learning_rate": learning_rate, "seed": seed, "init": init,
        "occlusion_variants": occlusion_variants,
    })
    acc = lambda v: "n/a" if v is None else f"{v:.4f}"
    click.echo(
        f"train acc {acc(out_doc['train_accuracy'])}  val acc {acc(out_doc['val_accuracy'])}  "
        f"test acc {acc(out_doc['test_accuracy'])}  "
        f"(n={out_doc['num_train']}/{out_doc['num_val']}/{out_doc['num_test']})"
    )
    click.echo(f"weights: {out_doc['weights_path']}")


@main.command()
@click.option("--model", required=True, help="Weight file.")
@click.option("--dataset", required=True)
@click.option("--out-dir", default="explanations", show_default=True)
@click.option("--graphs", default="all", show_default=True, help="'all' or comma-separated record ids.")
@click.option("--task", type=click.Choice(["graph", "node"]), default="graph", show_default=True)
@click.option("--target-node", default=None, type=int, help="Override the record's target node (node task).")
@click.option("--scorer", type=click.Choice(["shapley-mc", "shapley-exact", "direct"]),
              default="shapley-mc", show_default=True)
@click.option("--samples", default=100, show_default=True, help="Monte-Carlo sampling steps T.")
@click.option("--hops", default="3", show_default=True, help="Co-player hop range L, or 'inf' for all nodes.")
@click.option("--nmin", default=5, show_default=True, help="Leaf threshold: max explanation size.")
@click.option("--iterations", default=20, show_default=True, help="Search iterations M.")
@click.option("--lambda", "lambda_", default=10.0, show_default=True, help="Exploration weight.")
@click.option("--prune", type=click.Choice(["low2high", "high2low"]), default="low2high", show_default=True)
@click.option("--prune-k", default=12, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.pass_context
def explain(ctx, model, dataset, out_dir, graphs, task, target_node, scorer, samples,
            hops, nmin, iterations, lambda_, prune, prune_k, seed, workers):
    """Search for the best explanation subgraph of each requested instance."""
    if task == "node" and target_node is None and graphs == "all":
        pass  # per-record target nodes come from the dataset
    hops_value = "inf" if hops == "inf" else int(hops)
    out = _post(ctx, "/explain", {
        "model": model, "dataset": dataset, "out_dir": out_dir, "graphs": graphs,
        "task": task, "target_node": target_node, "scorer": scorer, "samples": samples,
        "hops": hops_value, "nmin": nmin, "iterations": iterations, "lambda": lambda_,
        "prune": prune, "prune_k": prune_k, "seed": seed, "workers": workers,
    })
    click.echo(f"explained {len(out['explained'])} instance(s) -> {len(out['documents'])} document(s)")
    for doc in out["documents"]:
        click.echo(f"  {doc}")
    if out["failures"]:
        click.echo("failures:", err=True)
        for f in out["failures"]:
            click.echo(f"  {f['graph_id']}: {f['error']}", err=True)
        sys.exit(1)


@main.command("eval")
@click.option("--model", required=True)
@click.option("--dataset", required=True)
@click.option("--explanations", required=True, help="Directory of explanation documents.")
@click.option("--out-dir", default=None)
@click.option("--sizes", default="", help="Comma-separated explanation sizes for the curve.")
@click.option("--ground-truth", default=None, help="Motif sidecar for recall.")
@click.pass_context
def eval_cmd(ctx, model, dataset, explanations, out_dir, sizes, ground_truth):
    """Fidelity / Sparsity metrics and the sparsity-fidelity curve."""
    out = _post(ctx, "/eval", {
        "model": model, "dataset": dataset, "explanations": explanations,
        "out_dir": out_dir, "sizes": [int(s) for s in sizes.split(",") if s.strip()],
        "ground_truth": ground_truth,
    })
    click.echo(f"fidelity {out['fidelity']:.4f}  sparsity {out['sparsity']:.4f}  n={out['n_graphs']}")
    if out.get("motif_recall") is not None:
        click.echo(f"motif recall {out['motif_recall']:.4f}")
    click.echo("size,sparsity,fidelity,n_graphs")
    for row in out["curve"]:
        click.echo(f"{row['size']},{row['sparsity']:.6f},{row['fidelity']:.6f},{row['n_graphs']}")
    for key in ("metrics_path", "curve_csv_path", "curve_json_path"):
        if out.get(key):
            click.echo(f"wrote {out[key]}")


@main.command()
@click.option("--model", required=True)
@click.option("--dataset", required=True)
@click.option("--graphs", default="all", show_default=True)
@click.option("--out", default=None, help="Write per-record logits to this JSON file.")
@click.pass_context
def predict(ctx, model, dataset, graphs, out):
    """Emit logits / probabilities per record (for parity checks)."""
    doc = _post(ctx, "/predict", {
        "model": model, "dataset": dataset, "graphs": graphs, "out": out,
    })
    n = len(doc["records"])
    correct = sum(1 for r in doc["records"] if r["label"] is not None and r["label"] == r["predicted_class"])
    labeled = sum(1 for r in doc["records"] if r["label"] is not None)
    click.echo(f"predicted {n} record(s)" + (f", accuracy {correct / labeled:.4f}" if labeled else ""))
    if doc.get("out_path"):
        click.echo(f"wrote {doc['out_path']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
