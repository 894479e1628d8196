"""Command-line client for the simulation service.

Every subcommand speaks HTTP to the service layer: against a remote server
when ``--server`` is given, otherwise against an in-process instance, so
batch runs need no daemon.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # This starlette build nags about its httpx-backed test client; the
        # in-process transport is exactly what we want here.
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def _read_config(config: str | None) -> str | None:
    if config is None:
        return None
    return Path(config).read_text(encoding="utf-8")


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Credit-network rebalancing simulator."""
    ctx.obj = server


@main.command()
@click.option("--nodes", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--density", type=float, default=4.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the serialized graph here (default: stdout).")
@click.pass_obj
def gen(server: str | None, nodes: int, seed: int, density: float,
        out: str | None) -> None:
    """Generate a deterministic credit network."""
    with _client(server) as client:
        data = _post(client, "/network/generate",
                     {"nodes": nodes, "seed": seed, "density": density})
    click.echo(f"nodes={data['nodes']} links={data['links']} seed={data['seed']}",
               err=True)
    _write_or_print(data["graph"], out)


def _run_scenario_command(server: str | None, scenario: str, nodes: int | None,
                          seed: int | None, config: str | None,
                          out: str | None, ledger: str | None) -> dict:
    payload = {"scenario": scenario, "nodes": nodes, "seed": seed,
               "config": _read_config(config)}
    with _client(server) as client:
        data = _post(client, "/scenario/run", payload)
    for metric in data["metrics"]:
        click.echo(metric["line"], err=True)
    metrics_text = "".join(m["line"] + "\n" for m in data["metrics"])
    if out:
        Path(out).write_text(metrics_text, encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    if ledger:
        Path(ledger).write_text(
            "".join(line + "\n" for line in data["ledger"]), encoding="utf-8")
        click.echo(f"wrote {ledger}", err=True)
    return data


def _scenario_options(fn):
    fn = click.option("--nodes", type=int, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                      default=None)(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Metrics file (line-delimited records).")(fn)
    fn = click.option("--ledger", type=click.Path(dir_okay=False), default=None,
                      help="Ledger file (one entry per line).")(fn)
    return fn


@main.command("bt-prefix")
@_scenario_options
@click.pass_obj
def bt_prefix(server, nodes, seed, config, out, ledger) -> None:
    """Balance transfer over the prefix embedding."""
    data = _run_scenario_command(server, "prefix-bt", nodes, seed, config, out, ledger)
    click.echo(f"requestor={data['requestor']} links={data['links_established']}")


@main.command("bt-chord")
@_scenario_options
@click.pass_obj
def bt_chord(server, nodes, seed, config, out, ledger) -> None:
    """Balance transfer over the Chord ring."""
    data = _run_scenario_command(server, "chord-bt", nodes, seed, config, out, ledger)
    click.echo(f"requestor={data['requestor']} links={data['links_established']}")


@main.command()
@_scenario_options
@click.pass_obj
def bailout(server, nodes, seed, config, out, ledger) -> None:
    """Landmark-assisted creation of outgoing links."""
    data = _run_scenario_command(server, "bailout", nodes, seed, config, out, ledger)
    click.echo(
        f"requestor={data['requestor']} links={data['links_established']} "
        f"fee={data['landmark_fee']} failed={data['bailout_failed']}"
    )


@main.command()
@click.option("--scenario", default="prefix-bt", show_default=True,
              type=click.Choice(["prefix-bt", "chord-bt", "bailout"]))
@click.option("--sizes", default="1000,2000,4000,8000,10000", show_default=True,
              help="Comma-separated node counts.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def bench(server, scenario, sizes, seed, config, out) -> None:
    """Run one scenario across several network sizes."""
    lines: list[str] = []
    config_text = _read_config(config)
    with _client(server) as client:
        for size in (int(s) for s in sizes.split(",")):
            data = _post(client, "/scenario/run", {
                "scenario": scenario, "nodes": size, "seed": seed,
                "config": config_text,
            })
            for metric in data["metrics"]:
                click.echo(metric["line"])
                lines.append(metric["line"])
    if out:
        Path(out).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        click.echo(f"wrote {out}", err=True)


@main.command()
@click.option("--scenario", default="prefix-bt", show_default=True,
              type=click.Choice(["prefix-bt", "chord-bt", "bailout"]))
@click.option("--nodes", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def audit(server, scenario, nodes, seed, config, out) -> None:
    """Run a scenario and report the arbiter's findings."""
    payload = {"scenario": scenario, "nodes": nodes, "seed": seed,
               "config": _read_config(config)}
    with _client(server) as client:
        data = _post(client, "/audit/run", payload)
    lines = [f"{f['kind']}: {f['detail']}" for f in data["findings"]]
    text = "".join(l + "\n" for l in lines)
    if data["clean"]:
        click.echo("audit clean: no findings", err=True)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    elif lines:
        click.echo(text, nl=False)
    sys.exit(0 if data["clean"] else 3)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("creditnet.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
