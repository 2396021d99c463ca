import pytest

from wristemg.config import ConfigError, RunConfig, config_from_dict, load_config


def test_defaults():
    c = RunConfig()
    assert (c.preprocess.lowpass_cutoff_hz, c.preprocess.mvc_percentile, c.preprocess.working_rate_hz) == (5.0, 95.0, 100.0)
    assert (c.features.window_len, c.features.stride, c.features.ar_order) == (20, 5, 4)
    assert (c.models.k, c.models.min_leaf, c.models.force_filter_hz) == (10, 10, 1.0)
    assert c.reduction.variance_target == 0.95 and c.eval.folds == 5 and c.selection.n_channels == 3


def test_toml_and_flag_precedence(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("seed = 7\n[selection]\nn_channels = 4\n[features]\nchannels = [2, 5, 8]\n[models]\nk = 5\n")
    c = load_config(p)
    assert c.seed == 7 and c.selection.n_channels == 4 and c.models.k == 5 and c.features.channels == (2, 5, 8)
    o = c.with_overrides(seed=11, channels=(1, 2))
    assert o.seed == 11 and o.selection.channels == (1, 2) and o.selection.n_channels == 2
    assert c.synth_spec().seed == 7


@pytest.mark.parametrize("doc,msg", [
    ({"bogus": {}}, "unknown config table"),
    ({"models": {"kk": 1}}, "unknown key"),
    ({"models": {"k": 0}}, "k and min_leaf"),
    ({"preprocess": {"filter_order": 3}}, "filter_order"),
    ({"selection": {"target": "both"}}, "target"),
    ({"seed": "x"}, "seed"),
    ({"eval": 3}, "must be a table"),
])
def test_rejections(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(doc)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 3\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert load_config(None) == RunConfig()
