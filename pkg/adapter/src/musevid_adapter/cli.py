"""Command line entry point: configure engines and serve the protocol."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from .config import AdapterConfig, ConfigProblems, config_from_dict

TOKEN_ENV = "ADAPTER_AUTH_TOKEN"


def _load_file(path: str) -> dict:
    data = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(data.decode("utf-8"))
    return json.loads(data)


def _merge_flags(base: dict, flags: dict) -> dict:
    for route in ("embed", "chat", "video"):
        engine = flags.get(f"{route}_engine")
        model = flags.get(f"{route}_model")
        disabled = flags.get(f"no_{route}")
        if disabled:
            base[route] = None
            continue
        if engine or model:
            spec = dict(base.get(route) or {})
            if engine:
                spec["engine"] = engine
            if model:
                spec["model"] = model
            spec.setdefault("engine", AdapterConfig().model_dump()[route]["engine"])
            base[route] = spec
    for key in ("device", "seed", "host", "port", "max_audio_s", "chat_timeout_s", "video_timeout_s"):
        if flags.get(key) is not None:
            base[key] = flags[key]
    return base


@click.group()
@click.version_option(version=__version__, prog_name="musevid-adapter")
def main() -> None:
    """Serve embedding, chat, and video models over the four-route protocol."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML or JSON config file; flags override it.")
@click.option("--embed-engine", type=click.Choice(["spectral", "clap-hf"]), default=None)
@click.option("--embed-model", default=None, help="Checkpoint for the embed engine.")
@click.option("--chat-engine", type=click.Choice(["outline", "causal-hf"]), default=None)
@click.option("--chat-model", default=None, help="Checkpoint for the chat engine.")
@click.option("--video-engine", type=click.Choice(["gradient"]), default=None)
@click.option("--video-model", default=None)
@click.option("--no-embed", is_flag=True, help="Disable the embedding routes.")
@click.option("--no-chat", is_flag=True, help="Disable the chat route.")
@click.option("--no-video", is_flag=True, help="Disable the video route.")
@click.option("--device", type=click.Choice(["cpu", "cuda", "auto"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--max-audio-s", type=float, default=None)
@click.option("--chat-timeout-s", type=float, default=None)
@click.option("--video-timeout-s", type=float, default=None)
def serve(config_path, **flags):
    """Start the adapter; reads ADAPTER_AUTH_TOKEN for optional bearer auth."""
    base = _load_file(config_path) if config_path else {}
    data = _merge_flags(base, flags)
    token = os.environ.get(TOKEN_ENV)
    if token:
        data["token"] = token
    try:
        config = config_from_dict(data)
    except ConfigProblems as exc:
        for problem in exc.problems:
            click.echo(f"config error: {problem}", err=True)
        sys.exit(1)

    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(config), host=config.host, port=config.port)


@main.command("check-config")
@click.argument("config_file", type=click.Path(exists=True))
def check_config(config_file):
    """Validate a config file and print the resolved settings."""
    try:
        config = config_from_dict(_load_file(config_file))
    except ConfigProblems as exc:
        for problem in exc.problems:
            click.echo(f"config error: {problem}", err=True)
        sys.exit(1)
    click.echo(json.dumps(config.model_dump(mode="json"), indent=2))


if __name__ == "__main__":
    main()
