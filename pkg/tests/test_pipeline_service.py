"""
Tests for the end-to-end pipeline and its run directory
"""

import json

import pytest

from spectrum_mdl.config import ARTIFACT_VERSION, EXIT_INCOMPATIBLE, EXIT_OK
from spectrum_mdl.errors import ConfigError, StageError
from spectrum_mdl.models.schemas import CertificationBudget, DatasetSpec, ModelSpec, RunConfig, TrainConfig
from spectrum_mdl.services.dataset_service import save_points
from spectrum_mdl.services import pipeline_service
from spectrum_mdl.services.pipeline_service import run_pipeline

EXPECTED_FILES = {
    "points.csv",
    "holdout.csv",
    "model_0.json",
    "census.csv",
    "complexity.csv",
    "certificates.json",
    "per_sample_errors.csv",
    "cover_points.csv",
    "boundary_pairs.csv",
    "info.csv",
    "codes.svg",
    "manifest.json",
}


def test_run_writes_every_artifact(small_config, tmp_path):
    manifest = run_pipeline(small_config, tmp_path / "run")

    written = {path.name for path in (tmp_path / "run").iterdir()}
    assert EXPECTED_FILES <= written
    assert manifest.exit_code in (0, 2, 3)
    assert set(manifest.digests) <= written
    assert "data" in manifest.timings and "outputs" in manifest.timings

    on_disk = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert on_disk["exit_code"] == manifest.exit_code
    assert on_disk["essence"]["lower"] <= on_disk["essence"]["upper"]
    assert on_disk["selection"]["analyzed_seed"] == 0


def test_same_config_reproduces_every_number(small_config, tmp_path):
    first = run_pipeline(small_config, tmp_path / "first")
    second = run_pipeline(small_config, tmp_path / "second")

    assert first.reproducible() == second.reproducible()
    assert first.digests["codes.svg"] == second.digests["codes.svg"]


def test_no_compatible_candidate(small_config, tmp_path):
    config = small_config.model_copy(update={"gamma1": 1e6})

    manifest = run_pipeline(config, tmp_path / "run")

    assert manifest.exit_code == EXIT_INCOMPATIBLE
    assert manifest.report["selection"]["selected_seed"] is None
    assert (tmp_path / "run" / "complexity.csv").exists()


def test_several_candidates_are_ranked(small_config, tmp_path):
    config = small_config.model_copy(update={"candidate_seeds": [0, 1]})

    manifest = run_pipeline(config, tmp_path / "run")

    assert sorted(manifest.report["selection"]["ranking"]) == [0, 1]
    assert len(manifest.report["candidates"]) == 2
    assert (tmp_path / "run" / "model_1.json").exists()


def test_failing_stage_is_named(small_config, tmp_path):
    dataset = DatasetSpec(kind="custom", path=str(tmp_path / "absent.csv"))
    config = small_config.model_copy(update={"dataset": dataset})

    with pytest.raises(StageError) as excinfo:
        run_pipeline(config, tmp_path / "run")

    assert excinfo.value.stage == "data"
    assert isinstance(excinfo.value.__cause__, ConfigError)


def test_custom_dataset_run(small_config, tmp_path, two_circle_points):
    path = save_points(tmp_path / "source.csv", two_circle_points[:150])
    dataset = DatasetSpec(kind="custom", path=str(path), holdout_n=30)
    config = small_config.model_copy(update={"dataset": dataset, "gamma1": 50})

    manifest = run_pipeline(config, tmp_path / "run")

    assert manifest.report["candidates"][0]["compatibility"]["n_samples"] == 120
    assert "source.csv" in manifest.digests


@pytest.fixture
def compatible_run(monkeypatch, circle_splitter):
    """Untrained run of the pinned circle splitter, compatible at U = 1.5"""
    monkeypatch.setattr(pipeline_service, "build_model", lambda *args, **kwargs: circle_splitter.copy())
    return RunConfig(
        seed=0,
        dataset=DatasetSpec(kind="two-circles", n=400, holdout_n=200),
        model=ModelSpec(K=2, encoder_hidden=[2], decoder_hidden=[2]),
        train=TrainConfig(epochs=0),
        U=1.5,
        gamma1=50,
        gamma2=5.0,
        candidate_seeds=[0],
        certification=CertificationBudget(
            base_points=16, perturbs_per_point=4, max_lattice_points=500, search_iterations=8
        ),
        info_bins=16,
    )


def test_compatible_two_circle_run_meets_every_check(compatible_run, tmp_path):
    manifest = run_pipeline(compatible_run, tmp_path / "run")
    report = manifest.report

    assert manifest.exit_code == EXIT_OK
    assert report["selection"]["selected_seed"] == 0
    assert report["holdout_compatibility"]["compatible"] is True

    # One code per pattern: two codes, one bit
    achieved = report["candidates"][0]["achieved_description_length"]
    assert achieved["total_sum"] == 2
    assert achieved["achieved_description_length_bits"] == pytest.approx(1.0)

    # Disks of diameter 2.4 hold at most one point of a packing more than 3 apart
    assert report["essence"]["lower"] == 2
    lower_bound = report["lower_bound_check"]
    assert lower_bound["eligible"] is True
    assert lower_bound["holds"] is True
    assert lower_bound["margin_bits"] >= 0

    sub_quantization = report["sub_quantization"]
    assert sub_quantization["n_samples"] == 200
    assert sub_quantization["violations_of_inequality"] == 0
    assert sub_quantization["fraction"] == 1.0
    assert report["grid_consistency"]["all_hold"] is True
    assert (tmp_path / "run" / "subquantization.csv").exists()

    certificates = json.loads((tmp_path / "run" / "certificates.json").read_text())
    assert certificates["artifact_version"] == ARTIFACT_VERSION
    header = (tmp_path / "run" / "complexity.csv").read_text().splitlines()[0]
    assert "certified_complexity_upper_bound" in header
    assert achieved["certified_complexity_upper_bound"] == {"{1}": 1, "{2}": 1}
