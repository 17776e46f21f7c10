"""Command-line client for the pipeline service.

Every command talks HTTP to the service app. By default the app runs
in-process (no server needed, works offline); --server points the same
commands at a remote deployment instead.
"""
from __future__ import annotations

import json
import warnings
from pathlib import Path

import click
import httpx

from .corpus import read_jsonl, write_jsonl


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    # in-process: mount the ASGI app directly, no socket involved
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app as service_app

    return TestClient(service_app)


def _call(client, method: str, path: str, **kwargs):
    response = client.request(method, path, **kwargs)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
    return response


def _read_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Generate articles under discourse-role plans and evaluate adherence."""
    ctx.obj = {"server": server}


def _ctx_client(ctx):
    return _client(ctx.obj.get("server"))


@main.group()
def schema():
    """Inspect or export discourse schemas."""


@schema.command("export")
@click.option("--domain", required=True, type=click.Choice(["news", "recipe"]))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def schema_export(ctx, domain, out_path):
    """Write a domain's roles and definitions to a JSON file."""
    data = _call(_ctx_client(ctx), "GET", f"/schemas/{domain}").json()
    Path(out_path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(data['roles'])} roles to {out_path}")


@main.command()
@click.option("--domain", required=True, type=click.Choice(["news", "recipe"]))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--rejects", "rejects_path", default=None, type=click.Path(dir_okay=False))
@click.pass_context
def preprocess(ctx, domain, in_path, out_path, rejects_path):
    """Filter and clean a raw JSONL corpus."""
    body = {"domain": domain, "records": read_jsonl(in_path)}
    data = _call(_ctx_client(ctx), "POST", "/preprocess", json=body).json()
    write_jsonl(data["accepted"], out_path)
    if rejects_path:
        write_jsonl(data["rejected"], rejects_path)
    click.echo(f"accepted {len(data['accepted'])}, rejected {len(data['rejected'])}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def label(ctx, config_path, in_path, out_path):
    """Assign discourse roles to every unit of a segmented corpus."""
    body = {"config": _read_config(config_path), "records": read_jsonl(in_path)}
    data = _call(_ctx_client(ctx), "POST", "/label", json=body).json()
    write_jsonl(data["records"], out_path)
    click.echo(f"labeled {len(data['records'])} articles")


@main.command("sft-export")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def sft_export(ctx, config_path, in_path, out_path):
    """Build instruction/target fine-tuning pairs from a labeled corpus."""
    body = {"config": _read_config(config_path), "records": read_jsonl(in_path)}
    data = _call(_ctx_client(ctx), "POST", "/sft/export", json=body).json()
    write_jsonl(data["rows"], out_path)
    click.echo(f"exported {len(data['rows'])} pairs")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--failures", "failures_path", default=None, type=click.Path(dir_okay=False))
@click.option("--fail-fast", is_flag=True, default=False,
              help="Stop at the first failed article instead of finishing the batch.")
@click.pass_context
def generate(ctx, config_path, in_path, out_path, failures_path, fail_fast):
    """Generate articles for a JSONL file of inputs and control sequences."""
    body = {
        "config": _read_config(config_path),
        "inputs": read_jsonl(in_path),
        "fail_fast": fail_fast,
    }
    data = _call(_ctx_client(ctx), "POST", "/generate/batch", json=body).json()
    write_jsonl(data["outputs"], out_path)
    if failures_path:
        write_jsonl(data["failures"], failures_path)
    click.echo(f"generated {len(data['outputs'])}, failed {len(data['failures'])}")
    if data["failures"]:
        for failure in data["failures"][:5]:
            click.echo(f"  {failure['id']}: {failure['error']}", err=True)
        ctx.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--reference", "reference_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--generated", "generated_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--bins", "bins_path", default=None, type=click.Path(dir_okay=False))
@click.pass_context
def evaluate(ctx, config_path, reference_path, generated_path, report_path, bins_path):
    """Score generated articles against a labeled reference corpus."""
    body = {
        "config": _read_config(config_path),
        "reference": read_jsonl(reference_path),
        "generated": read_jsonl(generated_path),
    }
    data = _call(_ctx_client(ctx), "POST", "/evaluate", json=body).json()
    with open(report_path, "w", encoding="utf-8") as handle:
        json.dump(data["report"], handle, indent=2, sort_keys=True)
        handle.write("\n")
    if bins_path:
        with open(bins_path, "w", encoding="utf-8") as handle:
            for row in data["bins"]:
                handle.write(",".join(row) + "\n")
    metrics = data["report"]["metrics"]
    click.echo(
        "pos_divergence={pos_divergence:.6f} exact_match={exact_match:.4f}".format(**metrics)
    )


@main.command()
@click.option("--heatmap", "heatmap_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="bins.csv produced by evaluate.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def report(ctx, heatmap_path, out_path):
    """Render the per-bin role distributions to a static image."""
    csv_text = Path(heatmap_path).read_text(encoding="utf-8")
    response = _call(_ctx_client(ctx), "POST", "/report/heatmap",
                     json={"csv_text": csv_text})
    Path(out_path).write_bytes(response.content)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
