"""Command-line client for the orchestration service.

All commands talk HTTP to the service.  By default the app is mounted
in-process (no network, same filesystem); --server points the same client
at a remote instance instead.  Commands that create runs accept config
flags; commands that continue existing runs read the config snapshot from
the run's manifest.
"""

from __future__ import annotations

import asyncio
import json
import sys
from typing import Any

import click
import httpx

from . import __version__
from .run_manager import STAGE_ORDER


class ServiceCallError(Exception):
    def __init__(self, code: str, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.code = code
        self.problems = problems or []


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process ASGI unless --server is set."""

    def __init__(self, server: str | None = None):
        self._server = server

    def request(self, method: str, path: str, body: dict | None = None, params: dict | None = None) -> dict:
        async def go() -> httpx.Response:
            if self._server:
                transport = None
                base_url = self._server
            else:
                from .service.app import create_app

                transport = httpx.ASGITransport(app=create_app())
                base_url = "http://musevid.internal"
            # Stages can run for minutes; never let the client time out first.
            async with httpx.AsyncClient(
                transport=transport, base_url=base_url, timeout=None
            ) as client:
                return await client.request(method, path, json=body, params=params)

        try:
            response = asyncio.run(go())
        except httpx.HTTPError as exc:
            raise ServiceCallError("transport", f"cannot reach service: {exc}") from exc
        try:
            data = response.json()
        except ValueError:
            data = None
        if response.status_code >= 400:
            raise ServiceCallError(*_extract_error(response.status_code, data))
        if not isinstance(data, dict):
            raise ServiceCallError("protocol", "service returned a non-JSON body")
        return data


def _extract_error(status: int, data: Any) -> tuple[str, str, list[str]]:
    if isinstance(data, dict):
        err = data.get("error")
        if isinstance(err, dict):
            return (
                str(err.get("code", "error")),
                str(err.get("message", "request failed")),
                [str(p) for p in err.get("problems") or []],
            )
        # FastAPI request-validation errors use {"detail": [...]}.
        detail = data.get("detail")
        if detail is not None:
            if isinstance(detail, list):
                msgs = [
                    f"{'.'.join(str(x) for x in item.get('loc', []))}: {item.get('msg', '')}"
                    for item in detail
                    if isinstance(item, dict)
                ]
                return ("validation", f"invalid request (HTTP {status})", msgs)
            return ("error", str(detail), [])
    return ("error", f"request failed with HTTP {status}", [])


def _fail(error: ServiceCallError, json_output: bool) -> None:
    if json_output:
        payload = {"error": {"code": error.code, "message": str(error), "problems": error.problems}}
        click.echo(json.dumps(payload), err=True)
    else:
        click.echo(f"error [{error.code}]: {error}", err=True)
        for problem in error.problems:
            click.echo(f"  - {problem}", err=True)
    sys.exit(1)


def _print_manifest(data: dict, json_output: bool) -> None:
    manifest = data["manifest"]
    if json_output:
        click.echo(json.dumps(manifest, indent=2))
        return
    stages = manifest["stages"]
    width = max(len(name) for name in STAGE_ORDER)
    for name in STAGE_ORDER:
        state = stages[name]
        line = f"{name:<{width}}  {state['status']}"
        if state.get("error"):
            line += f"  ({state['error']})"
        click.echo(line)
    final = [a for a in stages["Assemble"].get("artifacts", []) if a]
    if stages["Assemble"]["status"] == "Done" and final:
        click.echo(f"output: {final[0]}")


def client_options(f):
    f = click.option("--server", default=None, metavar="URL",
                     help="Remote service URL; default runs the service in-process.")(f)
    f = click.option("--json", "json_output", is_flag=True,
                     help="Machine-readable output (manifest JSON / error JSON).")(f)
    return f


_FLAG_PATHS = {
    "pipeline": ("pipeline",),
    "segmenter": ("segmenter",),
    "seed": ("seed",),
    "mock": ("mock",),
    "analysis_rate": ("analysis_rate",),
    "retries": ("retries",),
    "taxonomy": ("taxonomy_path",),
    "muxer": ("muxer",),
    "container": ("container",),
    "max_workers": ("max_workers",),
    "fps": ("video", "fps"),
    "width": ("video", "width"),
    "height": ("video", "height"),
    "conform": ("video", "conform_policy"),
    "embed_url": ("backends", "embed_url"),
    "chat_url": ("backends", "chat_url"),
    "chat_audio_url": ("backends", "chat_audio_url"),
    "video_url": ("backends", "video_url"),
    "backend_timeout": ("backends", "timeout_s"),
    "backend_retries": ("backends", "max_retries"),
    "additional_prompt": ("prompt", "additional_prompt"),
}


def config_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="TOML or JSON config file; flags override it."),
        click.option("--pipeline", type=click.Choice(["clap", "lalm"]), default=None),
        click.option("--segmenter", type=click.Choice(["random", "rules"]), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--mock/--no-mock", default=None,
                     help="Use deterministic in-process mock backends."),
        click.option("--analysis-rate", type=int, default=None),
        click.option("--retries", type=int, default=None,
                     help="Script re-requests allowed after a malformed response."),
        click.option("--taxonomy", type=click.Path(), default=None,
                     help="Label taxonomy JSON; defaults to the built-in set."),
        click.option("--muxer", default=None,
                     help="Muxer command template ({frames_pattern} {fps} {audio} {out})."),
        click.option("--container", type=click.Choice(["auto", "Mp4ViaMuxer", "ManifestOnly"]),
                     default=None),
        click.option("--max-workers", type=int, default=None),
        click.option("--fps", type=int, default=None),
        click.option("--width", type=int, default=None),
        click.option("--height", type=int, default=None),
        click.option("--conform", type=click.Choice(["TrimEnd", "HoldLastFrame"]), default=None),
        click.option("--embed-url", default=None),
        click.option("--chat-url", default=None),
        click.option("--chat-audio-url", default=None),
        click.option("--video-url", default=None),
        click.option("--backend-timeout", type=float, default=None),
        click.option("--backend-retries", type=int, default=None),
        click.option("--additional-prompt", default=None,
                     help="Extra sentence appended to the script request."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def build_config_payload(config_path: str | None, flags: dict) -> dict:
    """Merge config file + flags into the dict the service validates."""
    from .config import load_config

    overrides: dict = {}
    for flag, path in _FLAG_PATHS.items():
        value = flags.get(flag)
        if value is None:
            continue
        node = overrides
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    config = load_config(config_path, overrides)
    return config.model_dump(mode="json")


def _init_and_execute(
    audio: str,
    output: str,
    through_stage: str | None,
    server: str | None,
    json_output: bool,
    config_path: str | None,
    flags: dict,
) -> None:
    client = ServiceClient(server)
    try:
        config_payload = build_config_payload(config_path, flags)
    except Exception as exc:
        problems = getattr(exc, "problems", None)
        _fail(ServiceCallError("config", str(exc), problems), json_output)
        return
    try:
        client.request(
            "POST", "/v1/runs/init",
            body={"audio_path": audio, "run_dir": output, "config": config_payload},
        )
        data = client.request(
            "POST", "/v1/runs/execute",
            body={"run_dir": output, "through_stage": through_stage},
        )
    except ServiceCallError as exc:
        _fail(exc, json_output)
        return
    _print_manifest(data, json_output)


def _execute_existing(run_dir: str, through_stage: str | None, server: str | None, json_output: bool) -> None:
    client = ServiceClient(server)
    try:
        data = client.request(
            "POST", "/v1/runs/execute",
            body={"run_dir": run_dir, "through_stage": through_stage},
        )
    except ServiceCallError as exc:
        _fail(exc, json_output)
        return
    _print_manifest(data, json_output)


@click.group()
@click.version_option(version=__version__, prog_name="musevid")
def main() -> None:
    """Generate music videos: segment, describe, script, render, assemble."""


@main.command()
@click.argument("audio", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(), help="Run directory to create.")
@client_options
@config_options
def run(audio, output, server, json_output, config_path, **flags):
    """Run the full pipeline on AUDIO into a new run directory."""
    _init_and_execute(audio, output, None, server, json_output, config_path, flags)


@main.command()
@click.argument("audio", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(), help="Run directory to create.")
@client_options
@config_options
def segment(audio, output, server, json_output, config_path, **flags):
    """Create a run for AUDIO and compute its segment plan."""
    _init_and_execute(audio, output, "Segment", server, json_output, config_path, flags)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def analyze(run_dir, server, json_output):
    """Derive musical/visual descriptors for an existing run."""
    _execute_existing(run_dir, "Analyze", server, json_output)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def script(run_dir, server, json_output):
    """Request and parse the scene-by-scene video script."""
    _execute_existing(run_dir, "Script", server, json_output)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def story(run_dir, server, json_output):
    """Precompute the story concept (audio-chat pipeline only)."""
    client = ServiceClient(server)
    try:
        data = client.request("POST", "/v1/runs/story", body={"run_dir": run_dir})
    except ServiceCallError as exc:
        _fail(exc, json_output)
        return
    if json_output:
        click.echo(json.dumps(data))
    else:
        click.echo(data["story"])


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def render(run_dir, server, json_output):
    """Generate one video clip per scene."""
    _execute_existing(run_dir, "Generate", server, json_output)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def assemble(run_dir, server, json_output):
    """Concatenate clips over the source audio into the final artifact."""
    _execute_existing(run_dir, "Assemble", server, json_output)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def resume(run_dir, server, json_output):
    """Re-execute every stage that is not Done."""
    client = ServiceClient(server)
    try:
        data = client.request("POST", "/v1/runs/resume", body={"run_dir": run_dir})
    except ServiceCallError as exc:
        _fail(exc, json_output)
        return
    _print_manifest(data, json_output)


@main.command()
@click.argument("run_dir", type=click.Path())
@client_options
def status(run_dir, server, json_output):
    """Show stage statuses for a run without executing anything."""
    client = ServiceClient(server)
    try:
        data = client.request("GET", "/v1/runs/manifest", params={"run_dir": run_dir})
    except ServiceCallError as exc:
        _fail(exc, json_output)
        return
    _print_manifest(data, json_output)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, type=int, show_default=True)
def serve(host, port):
    """Start the orchestration service over HTTP."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
