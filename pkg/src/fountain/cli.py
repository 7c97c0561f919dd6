"""Command-line client: serve the API, ingest files, run model checks.

The data directory defaults to $FOUNTAIN_DATA, then ./fountain-data.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import evalsuite, ingest
from .embeddings import make_provider
from .errors import FountainError
from .persistence import DataPaths, compact, load_graph

_DATA_OPTION = click.option(
    "--data",
    "data_dir",
    envvar="FOUNTAIN_DATA",
    default="fountain-data",
    show_default=True,
    help="data directory (env: FOUNTAIN_DATA)",
)


@click.group()
def main() -> None:
    """Deviation-risk assistant."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@_DATA_OPTION
@click.option("--listen", default=None, help="host:port, overrides the config file")
@click.option("--provider", default=None, help="test | lookup:<path> | provider URL")
def serve(config_path, data_dir, listen, provider) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import AppState, ServiceConfig, create_app

    if config_path:
        config = ServiceConfig.from_file(config_path)
    else:
        config = ServiceConfig(data_dir=data_dir)
    if listen:
        config.listen = listen
    if provider:
        config.provider = provider
    app = create_app(AppState(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


@main.command("ingest")
@click.argument("kind", type=click.Choice(["bom", "fmea", "claims", "synonyms"]))
@click.argument("file", type=click.Path(exists=True))
@_DATA_OPTION
@click.option("--allow-orphans", is_flag=True, help="create placeholder parts for unknown FMEA part_ids")
def ingest_cmd(kind, file, data_dir, allow_orphans) -> None:
    """Load a CSV file into the graph and snapshot the result."""
    paths = DataPaths(data_dir).ensure()
    try:
        if kind == "synonyms":
            synonyms = ingest.load_synonyms(file)
            with open(file, "r", encoding="utf-8") as src, open(
                paths.synonyms, "w", encoding="utf-8"
            ) as dst:
                dst.write(src.read())
            counts = {"terms": len(synonyms.entries)}
        else:
            graph = load_graph(paths)
            synonyms = (
                ingest.load_synonyms(paths.synonyms)
                if os.path.exists(paths.synonyms)
                else ingest.SynonymMap.empty()
            )
            if kind == "bom":
                counts = ingest.load_bom(graph, file)
            elif kind == "fmea":
                counts = ingest.load_fmea(graph, file, synonyms, allow_orphans=allow_orphans)
            else:
                counts = ingest.load_claims(graph, file, synonyms)
            compact(graph, paths)
    except FountainError as exc:
        _fail(exc)
    click.echo(json.dumps(counts))


@main.command()
@_DATA_OPTION
def snapshot(data_dir) -> None:
    """Compact the data directory into a fresh snapshot."""
    paths = DataPaths(data_dir).ensure()
    try:
        graph = load_graph(paths)
        records = compact(graph, paths)
    except FountainError as exc:
        _fail(exc)
    click.echo(json.dumps({"path": paths.snapshot, "records": records}))


@main.group("eval")
def eval_group() -> None:
    """Model-suitability checks."""


def _run_check(provider_spec: str, spec: evalsuite.CheckSpec, groups_path, as_json: bool) -> None:
    try:
        provider = make_provider(provider_spec)
        if groups_path:
            with open(groups_path, "r", encoding="utf-8", newline="") as fh:
                groups = evalsuite.SentenceGroupSet.from_csv(fh)
        else:
            groups = evalsuite.builtin_groups()
        report = evalsuite.run_suitability(provider, groups, spec)
    except FountainError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps(report.to_dict()))
    else:
        click.echo(report.to_text(), nl=False)
    sys.exit(0 if report.passed else 1)


@eval_group.command()
@click.option("--provider", required=True, help="test | lookup:<path> | provider URL")
@click.option("--groups", "groups_path", type=click.Path(exists=True), default=None)
@click.option("--checks", "checks_path", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True)
def suitability(provider, groups_path, checks_path, as_json) -> None:
    """Expected-similar vs expected-dissimilar gate on the packaged groups."""
    if checks_path:
        with open(checks_path, "r", encoding="utf-8") as fh:
            spec = evalsuite.CheckSpec.from_json(fh.read())
    else:
        spec = evalsuite.builtin_similarity_checks()
    _run_check(provider, spec, groups_path, as_json)


@eval_group.command()
@click.option("--provider", required=True, help="test | lookup:<path> | provider URL")
@click.option("--groups", "groups_path", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True)
def negation(provider, groups_path, as_json) -> None:
    """Negation-handling check on the negated sentence groups."""
    _run_check(provider, evalsuite.builtin_negation_checks(), groups_path, as_json)


def _fail(exc: FountainError) -> None:
    click.echo(json.dumps({"error": {"code": exc.code, "message": exc.message, "details": exc.details}}), err=True)
    sys.exit(2)


if __name__ == "__main__":
    main()
