import json
import math

import pytest

from prescript_opt import experiment
from prescript_opt.errors import InvalidInput, NumericalError
from prescript_opt.experiment import (ExperimentConfig, ResultRow, quick_config, read_results,
                                      run_experiment, stage_seed, summarize)


def test_single_method_single_level_gives_one_row(tmp_path):
    config = quick_config(methods=("cso",), instances=1, levels=(0.0,))
    rows = read_results(run_experiment(config, tmp_path))
    assert len(rows) == 1
    assert rows[0].method == "cso" and rows[0].status == "ok"
    assert rows[0].alpha == 0.0 and rows[0].gamma is None


def test_methods_agree_without_shift(tmp_path):
    config = quick_config(instances=1, levels=(0.0,))
    rows = read_results(run_experiment(config, tmp_path))
    scores = [r.oos_pcr for r in rows]
    assert len(scores) == 4
    assert max(scores) - min(scores) <= 0.1


def test_stage_errors_are_recorded_per_row(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(experiment, "calibrate_drpcr", broken)
    config = quick_config(instances=1, levels=(0.0,))
    rows = read_results(run_experiment(config, tmp_path))
    by_method = {r.method: r for r in rows}
    assert by_method["drpcr"].status.startswith("error:NumericalError")
    assert math.isnan(by_method["drpcr"].oos_pcr)
    assert all(by_method[m].status == "ok" for m in ("cso", "drcso", "drcro"))
    # the failed row has no cost file, the others are still consistent
    assert not experiment.verify_costs(tmp_path)


def test_summary_handles_minus_infinity():
    rows = [ResultRow(0, "cso", 0.0, 0.0, None, 0.5, 1.0, "ok"),
            ResultRow(1, "cso", 0.0, 0.0, None, -math.inf, 1.0, "ok"),
            ResultRow(2, "cso", 0.0, 0.0, None, 0.25, 1.0, "ok")]
    (s,) = summarize(rows)
    assert s.mean_pcr == -math.inf
    assert s.median == 0.25
    assert s.q75 == pytest.approx(0.375)


def test_stage_seeds_are_independent_of_method_lists():
    a = stage_seed(0, 3, "train").generate_state(2)
    b = stage_seed(0, 3, "train").generate_state(2)
    c = stage_seed(0, 3, "test_noise").generate_state(2)
    assert (a == b).all() and not (a == c).all()


def test_config_validation_and_round_trip(tmp_path):
    with pytest.raises(InvalidInput):
        ExperimentConfig(levels=(1.5,))
    with pytest.raises(InvalidInput):
        ExperimentConfig(methods=("saa",))
    with pytest.raises(InvalidInput):
        ExperimentConfig(drpcr_policy="other")
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_dict({"unknown": 1})
    config = quick_config(seed=9)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config.to_dict()))
    assert ExperimentConfig.load(path) == config
