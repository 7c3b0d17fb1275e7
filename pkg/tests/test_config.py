import json

import pytest

from musevid.config import (
    PipelineConfig,
    config_from_dict,
    config_hash,
    load_config,
    validate_runtime,
)
from musevid.errors import ConfigError


def test_defaults():
    config = PipelineConfig()
    assert config.pipeline == "clap"
    assert config.segmenter == "random"
    assert config.mock is False
    assert config.analysis_rate == 22050
    assert config.video.fps == 12
    assert config.segmentation.max_rule_s == 7.0
    assert config.segmentation.beats_per_cut == 8
    assert config.container == "auto"


def test_segmentation_settings_to_config():
    config = PipelineConfig(seed=77)
    seg = config.segmentation.to_config(config.seed)
    assert seg.seed == 77
    assert seg.min_random_s == 4.0
    assert seg.max_random_s == 8.0


def test_load_toml(tmp_path):
    path = tmp_path / "musevid.toml"
    path.write_text(
        'pipeline = "lalm"\nseed = 9\nmock = true\n\n[video]\nfps = 24\n\n[segmentation]\nmax_rule_s = 5.0\n'
    )
    config = load_config(path)
    assert config.pipeline == "lalm"
    assert config.seed == 9
    assert config.video.fps == 24
    assert config.segmentation.max_rule_s == 5.0


def test_load_json(tmp_path):
    path = tmp_path / "musevid.json"
    path.write_text(json.dumps({"seed": 4, "backends": {"embed_url": "http://e"}}))
    config = load_config(path)
    assert config.seed == 4
    assert config.backends.embed_url == "http://e"


def test_overrides_beat_file_values(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('seed = 1\n[video]\nfps = 10\nwidth = 100\n')
    config = load_config(path, overrides={"seed": 2, "video": {"fps": 30}})
    assert config.seed == 2
    assert config.video.fps == 30
    assert config.video.width == 100  # untouched file value survives the merge


def test_load_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")


def test_load_invalid_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("this is = not [ valid")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_field_validation_collects_all_problems():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"analysis_rate": -1, "video": {"fps": 0}, "pipeline": "wrong"})
    problems = err.value.problems
    assert len(problems) == 3
    joined = "\n".join(problems)
    assert "analysis_rate" in joined
    assert "video.fps" in joined
    assert "pipeline" in joined


def test_runtime_validation_mock_forbids_urls():
    config = PipelineConfig(mock=True)
    config.backends.embed_url = "http://e"
    config.backends.video_url = "http://v"
    problems = validate_runtime(config)
    assert len(problems) == 1
    assert "embed_url" in problems[0] and "video_url" in problems[0]


def test_runtime_validation_required_urls_per_pipeline():
    clap = PipelineConfig(pipeline="clap")
    missing = validate_runtime(clap)
    assert {p.split()[-1] for p in missing} == {
        "backends.embed_url",
        "backends.chat_url",
        "backends.video_url",
    }

    lalm = PipelineConfig(pipeline="lalm")
    missing = validate_runtime(lalm)
    assert any("chat_audio_url" in p for p in missing)
    assert len(missing) == 4


def test_runtime_validation_accepts_complete_real_config():
    config = PipelineConfig(
        backends={
            "embed_url": "http://e",
            "chat_url": "http://c",
            "video_url": "http://v",
        }
    )
    assert validate_runtime(config) == []


def test_runtime_validation_cross_field_rules():
    config = PipelineConfig(mock=True)
    config.segmentation.min_random_s = 9.0
    config.segmentation.max_random_s = 8.0
    config.container = "Mp4ViaMuxer"
    problems = validate_runtime(config)
    assert any("min_random_s" in p for p in problems)
    assert any("muxer" in p for p in problems)


def test_config_hash_stable_and_sensitive():
    a = PipelineConfig(seed=1)
    b = PipelineConfig(seed=1)
    c = PipelineConfig(seed=2)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    assert len(config_hash(a)) == 64


def test_config_survives_json_roundtrip():
    config = PipelineConfig(pipeline="lalm", mock=True, seed=3)
    data = json.loads(json.dumps(config.model_dump(mode="json")))
    again = config_from_dict(data)
    assert config_hash(again) == config_hash(config)
