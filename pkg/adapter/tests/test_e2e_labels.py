"""Full-stack check: the music-video pipeline runs against a live adapter.

The pipeline CLI talks to its own in-process service, which calls the
adapter over real HTTP for embeddings, chat, and video.  Every label the
analysis stage picks must come from the pipeline's own taxonomy, which is
what the zero-shot contract promises regardless of the embedding engine.
"""

import json
import socket
import threading
import time
from pathlib import Path

import httpx
import numpy as np
import pytest
import uvicorn
from click.testing import CliRunner
from scipy.io import wavfile

from musevid_adapter.config import AdapterConfig
from musevid_adapter.service import create_app


@pytest.fixture(scope="module")
def adapter_url():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    app = create_app(AdapterConfig(seed=5))
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 15.0
    while time.monotonic() < deadline:
        try:
            if httpx.get(f"{url}/health", timeout=1.0).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("adapter server did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=10.0)


def write_song(path: Path, duration_s: float = 10.0, rate: int = 22050) -> None:
    t = np.arange(int(duration_s * rate)) / rate
    samples = 0.4 * np.sin(2 * np.pi * 330.0 * t) + 0.2 * np.sin(2 * np.pi * 495.0 * t)
    # louder back half so segment-level embeddings differ
    samples[t > duration_s / 2] *= 1.8
    wavfile.write(path, rate, samples.astype(np.float32))


def test_pipeline_run_against_live_adapter_uses_taxonomy_labels(adapter_url, tmp_path):
    from musevid.cli import main
    from musevid.taxonomy import default_taxonomy

    song = tmp_path / "song.wav"
    write_song(song)
    run_dir = tmp_path / "run"
    result = CliRunner().invoke(
        main,
        [
            "run", str(song), "-o", str(run_dir),
            "--no-mock", "--pipeline", "clap", "--segmenter", "random", "--seed", "5",
            "--width", "96", "--height", "64", "--fps", "8",
            "--embed-url", adapter_url, "--chat-url", adapter_url, "--video-url", adapter_url,
            "--backend-timeout", "120", "--backend-retries", "0",
        ],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    assert (run_dir / "output" / "final.manifest.json").exists()

    taxonomy = default_taxonomy()
    analysis = json.loads((run_dir / "analysis" / "analysis.json").read_text())
    classifications = list(analysis["track"]["content_style"])
    classifications += analysis["track"]["visual_style"]
    for segment in analysis["segments"]:
        classifications += segment["classifications"]
    assert classifications
    for entry in classifications:
        category = taxonomy.get(entry["category_id"])
        assert entry["chosen_label"] in category.labels
        assert set(entry["scores"]) == set(category.labels)

    script = json.loads((run_dir / "scripts" / "parsed_script.json").read_text())
    segments = json.loads((run_dir / "segments" / "segments.json").read_text())
    assert len(script["scenes"]) == len(segments["segments"])
