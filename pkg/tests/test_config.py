"""Run-configuration parsing tests."""

import pytest

from dermaprep.config import (
    DEFAULT_CLASSES,
    ConfigError,
    PipelineConfig,
    load_config,
    parse_config_text,
    with_seed,
)


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.comparison_resolution == 256
    assert cfg.dedup_threshold == 0.005
    assert cfg.multiplier == 6
    assert cfg.seed == 0
    assert cfg.class_list == DEFAULT_CLASSES
    assert cfg.purify.luminance_threshold == "otsu"


def test_parse_full_file():
    text = """
# run settings
comparison_resolution = 128
dedup_threshold = 0.01   # inline comment
multiplier = 4
seed = 7
class_list = melanoma, nevus

purify.luminance_threshold = 0.2
purify.line_lengths = 5, 9
purify.line_angles = 0, 45, 90, 135
purify.closing_radius = 3
purify.inpaint_iterations = 50
purify.min_component_area = 10
purify.reference_width = 256
"""
    cfg = parse_config_text(text)
    assert cfg.comparison_resolution == 128
    assert cfg.dedup_threshold == 0.01
    assert cfg.multiplier == 4
    assert cfg.seed == 7
    assert cfg.class_list == ("melanoma", "nevus")
    assert cfg.purify.luminance_threshold == 0.2
    assert cfg.purify.line_lengths == (5, 9)
    assert cfg.purify.line_angles == (0.0, 45.0, 90.0, 135.0)
    assert cfg.purify.closing_radius == 3
    assert cfg.purify.inpaint_iterations == 50
    assert cfg.purify.min_component_area == 10
    assert cfg.purify.reference_width == 256


def test_parse_empty_text_gives_defaults():
    assert parse_config_text("") == PipelineConfig()
    assert parse_config_text("# only a comment\n\n") == PipelineConfig()


def test_otsu_keyword_passes_through():
    cfg = parse_config_text("purify.luminance_threshold = otsu\n")
    assert cfg.purify.luminance_threshold == "otsu"


def test_parse_errors_carry_source_and_line():
    cases = [
        "florp = 3\n",
        "purify.florp = 3\n",
        "seed\n",
        "seed = x\n",
        "dedup_threshold = much\n",
        "purify.line_lengths = \n",
        "seed = 1\nseed = 2\n",
        "purify.closing_radius = 1\npurify.closing_radius = 2\n",
    ]
    for text in cases:
        with pytest.raises(ConfigError, match="cfg.txt:"):
            parse_config_text(text, source="cfg.txt")


def test_semantic_errors_mention_source():
    with pytest.raises(ConfigError, match="cfg.txt"):
        parse_config_text("multiplier = 0\n", source="cfg.txt")
    with pytest.raises(ConfigError, match="cfg.txt"):
        parse_config_text("purify.line_lengths = 1, 2\n", source="cfg.txt")


def test_validation_rules():
    with pytest.raises(ConfigError):
        PipelineConfig(comparison_resolution=0)
    with pytest.raises(ConfigError):
        PipelineConfig(dedup_threshold=-0.1)
    with pytest.raises(ConfigError):
        PipelineConfig(multiplier=0)
    with pytest.raises(ConfigError):
        PipelineConfig(class_list=())
    with pytest.raises(ConfigError):
        PipelineConfig(class_list=("a", "a"))
    with pytest.raises(ConfigError):
        PipelineConfig(class_list=("a", ""))


def test_load_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seed = 3\n")
    assert load_config(p).seed == 3
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_with_seed_replaces_only_seed():
    cfg = parse_config_text("seed = 1\nmultiplier = 3\n")
    out = with_seed(cfg, 9)
    assert out.seed == 9
    assert out.multiplier == 3
    assert cfg.seed == 1  # original untouched
