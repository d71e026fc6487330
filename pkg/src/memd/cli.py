"""Command-line client for the memd service.

Every subcommand builds a request from local files and sends it to the HTTP
API. By default the service is mounted in-process (no server or network
involved), so the CLI works standalone; `--server http://host:port` routes
the same requests to a running `memd serve` instance instead.

Exit codes: 0 success, 2 input parse error, 3 configuration error,
4 numeric failure.
"""

from __future__ import annotations

import asyncio
import sys

import click
import httpx


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _post_inprocess(path: str, payload: dict) -> httpx.Response:
    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://memd.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def call_service(ctx, path: str, payload: dict) -> dict:
    server = ctx.obj.get("server")
    try:
        if server:
            response = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
        else:
            response = _post_inprocess(path, payload)
    except httpx.HTTPError as err:
        click.echo(f"error: cannot reach service: {err}", err=True)
        sys.exit(1)
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "exit_code" in detail:
        click.echo(f"error: {detail['message']}", err=True)
        sys.exit(detail["exit_code"])
    # request-model validation failures are configuration errors
    click.echo(f"error: HTTP {response.status_code}: {response.text}", err=True)
    sys.exit(3 if response.status_code == 422 else 1)


def _parse_k(ctx, param, value):
    if value == "auto":
        return "auto"
    try:
        return int(value)
    except ValueError:
        raise click.BadParameter("must be an integer or 'auto'") from None


def data_options(fn):
    options = [
        click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False)),
        click.option(
            "--format", "format_", required=True,
            type=click.Choice(["csv", "sparse", "corpus"]),
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def experiment_options(fn):
    options = [
        click.option("--method", type=click.Choice(["j", "js"]), default="j", show_default=True),
        click.option("--orders", type=click.Choice(["1", "2"]), default="1", show_default=True,
                     help="1: first moment; 2: first and second moments."),
        click.option("--support", type=click.Choice(["halfline", "real", "unit"]),
                     default="halfline", show_default=True),
        click.option("--k", default="auto", callback=_parse_k, show_default=True,
                     help="Number of features to keep, or 'auto'."),
        click.option("--smoothing", type=float, default=1e-6, show_default=True),
        click.option("--variance-floor", type=float, default=1e-4, show_default=True),
        click.option("--gamma", type=int, default=2, show_default=True,
                     help="Corpus frequency cut-off for vocabulary words."),
        click.option("--stopwords", type=click.Path(exists=True, dir_okay=False), default=None),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--stratified", is_flag=True, default=False),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def build_payload(data, format_, method, orders, support, k, smoothing,
                  variance_floor, gamma, stopwords, seed, stratified, folds=10):
    return {
        "data": _read(data),
        "format": format_,
        "method": method,
        "orders": int(orders),
        "support": support,
        "k": k,
        "smoothing": smoothing,
        "variance_floor": variance_floor,
        "gamma": gamma,
        "stopwords": _read(stopwords) if stopwords else "",
        "seed": seed,
        "stratified": stratified,
        "folds": folds,
    }


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.option("--server", envvar="MEMD_SERVER", default=None,
              help="Base URL of a running service; defaults to in-process.")
@click.version_option()
@click.pass_context
def main(ctx, server):
    """Maximum-entropy classification with divergence-based feature ranking."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@data_options
@experiment_options
@click.option("--out", required=True, type=click.Path(writable=True),
              help="Where to write the fitted model.")
@click.pass_context
def fit(ctx, data, format_, method, orders, support, k, smoothing,
        variance_floor, gamma, stopwords, seed, stratified, out):
    """Fit a model and write it to --out."""
    payload = build_payload(data, format_, method, orders, support, k, smoothing,
                            variance_floor, gamma, stopwords, seed, stratified)
    result = call_service(ctx, "/v1/fit", payload)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(result["model"])
    click.echo(
        f"fitted {result['n_classes']}-class model on {result['n_features']} features, "
        f"kept k={result['chosen_k']} -> {out}",
        err=True,
    )


@main.command()
@data_options
@experiment_options
@click.option("--out", default=None, type=click.Path(writable=True))
@click.pass_context
def rank(ctx, data, format_, method, orders, support, k, smoothing,
         variance_floor, gamma, stopwords, seed, stratified, out):
    """Rank all features; emits feature_id,score,rank CSV."""
    payload = build_payload(data, format_, method, orders, support, k, smoothing,
                            variance_floor, gamma, stopwords, seed, stratified)
    result = call_service(ctx, "/v1/rank", payload)
    _emit(result["csv"], out)


@main.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@data_options
@click.option("--out", default=None, type=click.Path(writable=True))
@click.pass_context
def predict(ctx, model_path, data, format_, out):
    """Score instances; emits instance_id,predicted_label,log_posteriors CSV."""
    payload = {"model": _read(model_path), "data": _read(data), "format": format_}
    result = call_service(ctx, "/v1/predict", payload)
    _emit(result["csv"], out)


@main.command()
@data_options
@experiment_options
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--out", default=None, type=click.Path(writable=True))
@click.pass_context
def cv(ctx, data, format_, method, orders, support, k, smoothing,
       variance_floor, gamma, stopwords, seed, stratified, folds, out):
    """Cross-validate; emits the experiment report (stdout is deterministic)."""
    payload = build_payload(data, format_, method, orders, support, k, smoothing,
                            variance_floor, gamma, stopwords, seed, stratified, folds)
    result = call_service(ctx, "/v1/cv", payload)
    _emit(result["report"], out)
    click.echo(
        f"mean accuracy {result['mean_accuracy']:.4f} over {folds} folds "
        f"in {result['total_seconds']:.2f}s",
        err=True,
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
