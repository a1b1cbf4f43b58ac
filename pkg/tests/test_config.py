"""Config parsing: defaults, typed errors, idempotent rendering."""

import pytest

from lnn.config import (ExperimentConfig, config_hash, parse_config,
                        render_config, scenario_hash)


def test_empty_file_is_all_defaults():
    cfg = parse_config("")
    ref = ExperimentConfig()
    assert cfg.run.task == "predict"
    assert cfg.run.seed == 0
    assert cfg.model.kind == "ltc"
    assert cfg.model.units == 32
    assert cfg.prediction.carrier_hz == ref.prediction.carrier_hz
    assert cfg.beamforming.phases == ((6.0, 700), (15.0, 600), (30.0, 500))
    assert render_config(cfg) == render_config(ref)


def test_values_parse_into_sections():
    cfg = parse_config("""
[run]
task = beamform
seed = 7
out_dir = results

[model]
kind = cfc
units = 30
ncp = true

[glnn]
n_inner = 3
wmmse_reinit = true
""")
    assert cfg.run.task == "beamform"
    assert cfg.run.seed == 7
    assert cfg.run.out_dir == "results"
    assert cfg.model.kind == "cfc"
    assert cfg.model.ncp is True
    assert cfg.glnn.n_inner == 3
    assert cfg.glnn.wmmse_reinit is True


def test_phases_syntax():
    cfg = parse_config("[beamforming]\nphases = 3:900,9:900\n")
    assert cfg.beamforming.phases == ((3.0, 900), (9.0, 900))


def test_phases_must_sum_to_1800():
    with pytest.raises(ValueError, match="1800"):
        parse_config("[beamforming]\nphases = 3:900,9:100\n")


def test_unknown_section_rejected():
    with pytest.raises(ValueError, match=r"unknown section \[misc\]"):
        parse_config("[misc]\nx = 1\n")


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="velocity"):
        parse_config("[prediction]\nvelocity = 3\n")


def test_scenario_seed_is_not_a_key():
    # seeds come from [run]; a seed key inside a scenario section is a typo
    with pytest.raises(ValueError, match="seed"):
        parse_config("[prediction]\nseed = 3\n")


def test_negative_speed_error_names_the_key():
    with pytest.raises(ValueError, match="speed_mps"):
        parse_config("[prediction]\nspeed_mps = -1\n")


def test_malformed_int():
    with pytest.raises(ValueError, match=r"\[run\] seed"):
        parse_config("[run]\nseed = seven\n")


def test_malformed_float():
    with pytest.raises(ValueError, match=r"\[train\] lr"):
        parse_config("[train]\nlr = fast\n")


def test_malformed_bool():
    with pytest.raises(ValueError, match=r"\[model\] ncp"):
        parse_config("[model]\nncp = maybe\n")


def test_malformed_phases():
    with pytest.raises(ValueError, match="speed:steps"):
        parse_config("[beamforming]\nphases = 6-700\n")


def test_ncp_sizes_must_sum_to_units():
    text = "[model]\nncp = true\nunits = 31\n"
    with pytest.raises(ValueError, match="31"):
        parse_config(text)
    parse_config("[model]\nncp = true\nunits = 30\n")  # 16+10+4


def test_ncp_fanout_bounds_checked():
    text = "[model]\nncp = true\nunits = 30\nfanout_sensory = 17\n"
    with pytest.raises(ValueError, match="fanout_sensory"):
        parse_config(text)


def test_dense_model_ignores_ncp_layer_sums():
    cfg = parse_config("[model]\nunits = 31\n")
    assert cfg.model.units == 31


def test_bad_task_rejected():
    with pytest.raises(ValueError, match="task"):
        parse_config("[run]\ntask = walk\n")


def test_bad_cell_kind_rejected():
    with pytest.raises(ValueError, match="kind"):
        parse_config("[model]\nkind = lstm\n")


def test_bench_trial_floor():
    with pytest.raises(ValueError, match="n_trials"):
        parse_config("[bench]\nn_trials = 5\n")


def test_default_section_rejected():
    with pytest.raises(ValueError, match="DEFAULT"):
        parse_config("[DEFAULT]\nseed = 1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ValueError, match="malformed"):
        parse_config("[run]\nseed = 1\nseed = 2\n")


def test_render_parse_idempotent():
    cfg = parse_config("[run]\nseed = 3\n[model]\nkind = gru\n")
    text1 = render_config(cfg)
    text2 = render_config(parse_config(text1))
    assert text1 == text2


def test_render_covers_every_key():
    text = render_config(ExperimentConfig())
    for needle in ("[run]", "[prediction]", "[beamforming]", "[model]",
                   "[train]", "[glnn]", "[bench]",
                   "task = predict", "phases = 6.0:700,15.0:600,30.0:500",
                   "map_terms = full", "n_trials = 50"):
        assert needle in text, needle


def test_config_hash_ignores_formatting():
    a = parse_config("[run]\nseed = 3\n")
    b = parse_config("# comment\n\n[run]\nseed=3\n")
    assert config_hash(a) == config_hash(b)
    c = parse_config("[run]\nseed = 4\n")
    assert config_hash(a) != config_hash(c)


def test_scenario_hash_tracks_task_and_seed():
    base = parse_config("")
    seeded = parse_config("[run]\nseed = 1\n")
    other_task = parse_config("[run]\ntask = beamform\n")
    assert scenario_hash(base) != scenario_hash(seeded)
    assert scenario_hash(base) != scenario_hash(other_task)
    assert len(scenario_hash(base)) == 12
    # model changes do not touch the scenario digest
    model = parse_config("[model]\nkind = gru\n")
    assert scenario_hash(base) == scenario_hash(model)


def test_run_seed_feeds_scenarios():
    cfg = parse_config("[run]\nseed = 9\n")
    assert cfg.prediction_scenario().seed == 9
    assert cfg.beamforming_scenario().seed == 9
    assert cfg.prediction.seed == 0  # stored section untouched


def test_train_section_builds_hyper():
    cfg = parse_config("[train]\nlr = 0.01\nepochs = 5\n")
    h = cfg.train.hyper()
    assert h.lr == 0.01
    assert h.epochs == 5
    assert h.batch == 64
