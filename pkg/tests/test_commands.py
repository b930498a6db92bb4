"""
End-to-end tests of the commands on small synthetic worlds.
"""

import json

import numpy as np
import pandas as pd
import pytest

from main import build_config, parse_arguments, run
from src.commands import (
    cmd_ablate,
    cmd_curate,
    cmd_eval,
    cmd_inspect,
    cmd_synthetic,
    cmd_train,
)
from src.commands.synthetic import plain_head, run_transfer
from src.commands.world import build_world, evaluate_transfer
from src.config import (
    Config,
    EvalConfig,
    SyntheticWorldConfig,
    TrainConfig,
)
from src.data.curation import load_dataset
from src.evaluation.features import load_features, save_features
from src.evaluation.metrics import aggregate
from src.structures.enums import ClassSplit
from src.utilities import read_json

SMALL_WORLD = {
    "synthetic.classes": 6,
    "synthetic.base_classes": 3,
    "synthetic.novel_classes": 3,
    "synthetic.descriptions_per_class": 4,
    "synthetic.images_per_class": 5,
    "synthetic.encoder.num_layers": 1,
    "synthetic.encoder.d_model": 16,
    "synthetic.encoder.num_heads": 2,
    "synthetic.encoder.projection_dim": 8,
    "synthetic.train.epochs": 2,
    "synthetic.train.batch_size": 8,
    "synthetic.train.prompt_depth": 1,
}


def make_config(tmp_path, run_id, **values):
    """A default config writing into tmp_path with dotted overrides."""
    settings = {**SMALL_WORLD, **values}
    overrides = [(["paths", "output"], str(tmp_path)), (["run_id"], run_id)]
    overrides.extend((key.split("."), v) for key, v in settings.items())
    return Config(overrides=overrides)


def small_world(tmp_path, sigma=0.3, seed=1):
    config = make_config(tmp_path, "world", **{"synthetic.sigma": sigma})
    settings = SyntheticWorldConfig.from_config(config)
    return build_world(settings, seed, "a photo of a {CLS}")


class TestCommandLine:
    def test_overrides_are_layered(self):
        args = parse_arguments(
            ["train", "--seed", "7", "--set", "train.lr=0.5", "--out", "x"]
        )
        config = build_config(args)
        assert config.get("seed") == 7
        assert config.get("train", "lr") == 0.5
        assert config.get("paths", "output") == "x"

    def test_missing_input_exits_with_validation_code(self, tmp_path):
        args = parse_arguments(["train", "--out", str(tmp_path)])
        assert run(args) == 1

    def test_absent_path_exits_with_validation_code(self, tmp_path):
        args = parse_arguments(
            ["inspect", "--out", str(tmp_path), "--vocab", "absent.json"]
        )
        assert run(args) == 1

    def test_corrupt_artifact_exits_with_io_code(self, tmp_path):
        vocab = tmp_path / "vocab.json"
        vocab.write_text("{not json", encoding="utf-8")
        args = parse_arguments(
            [
                "inspect",
                "--out",
                str(tmp_path / "runs"),
                "--vocab",
                str(vocab),
                "--weights",
                str(vocab),
                "--checkpoint",
                str(vocab),
            ]
        )
        assert run(args) == 3

    def test_unknown_mode_is_rejected(self):
        with pytest.raises(SystemExit) as info:
            parse_arguments(["serve"])
        assert info.value.code == 1

    def test_bad_flags_exit_with_validation_code(self, tmp_path):
        for argv in (
            ["train", "--seed", "seven"],
            ["train", "--set", "no-equals-sign"],
            ["train", "--config-dir", str(tmp_path / "absent")],
        ):
            with pytest.raises(SystemExit) as info:
                parse_arguments(argv)
            assert info.value.code == 1, argv

    def test_features_flag_can_repeat(self):
        single = build_config(parse_arguments(["eval", "--features", "a"]))
        assert single.get("paths", "features") == "a"
        several = build_config(
            parse_arguments(["eval", "--features", "a", "--features", "b"])
        )
        assert several.get("paths", "features") == ["a", "b"]


class TestSynthetic:
    def test_writes_artifacts_and_manifest(self, tmp_path):
        directory = cmd_synthetic(make_config(tmp_path, "first"))
        for name in (
            "vocab.json",
            "weights.json",
            "dataset.jsonl",
            "features.json",
            "checkpoint.json",
            "loss_trace.csv",
            "report.json",
            "report.txt",
            "manifest.json",
        ):
            assert (directory / name).exists(), name
        manifest = read_json(directory / "manifest.json")
        assert manifest["command"] == "synthetic"
        assert manifest["seed"] == 1
        assert "checkpoint.json" in manifest["outputs"]
        report = read_json(directory / "report.json")
        assert set(report["heads"]) == {
            "plain-template",
            "ensembled",
            "prompted",
        }
        assert len(pd.read_csv(directory / "loss_trace.csv")) == 4

    def test_reruns_are_identical(self, tmp_path):
        first = cmd_synthetic(make_config(tmp_path, "first"))
        second = cmd_synthetic(make_config(tmp_path, "second"))
        outputs = read_json(first / "manifest.json")["outputs"]
        assert outputs == read_json(second / "manifest.json")["outputs"]

    def test_manifests_are_bitwise_identical(self, tmp_path, monkeypatch):
        manifests = []
        for folder in ("first", "second"):
            (tmp_path / folder).mkdir()
            monkeypatch.chdir(tmp_path / folder)
            directory = cmd_synthetic(make_config("runs", "same"))
            manifests.append((directory / "manifest.json").read_bytes())
            run_log = read_json(directory / "run_log.json")
            assert set(run_log) == {"run_id", "created"}
        assert manifests[0] == manifests[1]
        assert b"created" not in manifests[0]

    def test_run_ids_are_not_reused(self, tmp_path):
        cmd_synthetic(make_config(tmp_path, "once"))
        args = parse_arguments(
            ["synthetic", "--out", str(tmp_path), "--run-id", "once"]
        )
        assert run(args) == 1

    def test_noiseless_images_are_solved_by_the_ensemble(self, tmp_path):
        world = small_world(tmp_path, sigma=0.0)
        _, results = run_transfer(
            world, TrainConfig(epochs=1, prompt_depth=1), EvalConfig()
        )
        assert results["ensembled"].base.top1 == 1.0
        assert results["ensembled"].novel.top1 == 1.0

    def test_plain_head_matches_nearest_neighbour(self, tmp_path):
        world = small_world(tmp_path)
        result = evaluate_transfer(world, plain_head(world, EvalConfig()))
        for which, report in (
            (ClassSplit.BASE, result.base),
            (ClassSplit.NOVEL, result.novel),
        ):
            classes = world.split_classes(which)
            texts = [f"a photo of a {r.name}" for r in classes]
            centers = world.encoder.encode_texts(texts)
            images = world.images.restrict([r.name for r in classes])
            correct = 0
            for feature, label in zip(images.features, images.labels):
                scores = [float(feature @ center) for center in centers]
                correct += int(np.argmax(scores) == label)
            assert report.top1 == pytest.approx(correct / images.n)


class TestEvalAndInspect:
    @pytest.fixture
    def synthetic_run(self, tmp_path):
        return cmd_synthetic(make_config(tmp_path / "runs", "source"))

    def artifact_paths(self, directory):
        return {
            "paths.vocab": str(directory / "vocab.json"),
            "paths.weights": str(directory / "weights.json"),
            "paths.checkpoint": str(directory / "checkpoint.json"),
            "paths.features": str(directory / "features.json"),
        }

    def test_eval_scores_every_image(self, tmp_path, synthetic_run):
        config = make_config(
            tmp_path, "eval", **self.artifact_paths(synthetic_run)
        )
        directory = cmd_eval(config)
        report = read_json(directory / "report.json")
        (single,) = report["reports"]
        assert single["head"] == "prompted"
        assert single["count"] == 30
        manifest = read_json(directory / "manifest.json")
        assert str(synthetic_run / "checkpoint.bin") in manifest["inputs"]

    def test_eval_transfer_with_split_classes(self, tmp_path, synthetic_run):
        classes = tmp_path / "classes.json"
        names = [f"cls{i:02d}" for i in range(6)]
        entries = [
            {"name": name, "split": "base" if i < 3 else "novel"}
            for i, name in enumerate(names)
        ]
        classes.write_text(json.dumps(entries), encoding="utf-8")
        config = make_config(
            tmp_path,
            "transfer",
            **self.artifact_paths(synthetic_run),
            **{"paths.classes": str(classes), "eval.head": "plain-template"},
        )
        report = read_json(cmd_eval(config) / "report.json")
        (result,) = report["transfer"].values()
        assert result["base"]["count"] == 15
        assert result["novel"]["count"] == 15

    def test_inspect_lists_k_neighbours(self, tmp_path, synthetic_run):
        config = make_config(
            tmp_path,
            "inspect",
            **self.artifact_paths(synthetic_run),
            **{"inspect.k": 3},
        )
        directory = cmd_inspect(config)
        text = (directory / "nearest_words.txt").read_text(encoding="utf-8")
        # 1 layer x 4 prompts x 3 neighbours, plus the header
        assert len(text.strip().splitlines()) == 13

    def test_eval_averages_several_datasets(self, tmp_path, synthetic_run):
        images = load_features(synthetic_run / "features.json")
        subset = tmp_path / "subset.jsonl"
        save_features(images.restrict(["cls00", "cls01", "cls02"]), subset)
        paths = self.artifact_paths(synthetic_run)
        paths["paths.features"] = [paths["paths.features"], str(subset)]
        config = make_config(
            tmp_path, "datasets", **paths, **{"eval.head": "plain-template"}
        )
        directory = cmd_eval(config)
        report = read_json(directory / "report.json")
        rows = report["datasets"]
        assert rows["features"]["count"] == 30
        assert rows["subset"]["count"] == 15
        expected = aggregate(
            [rows["features"]["top1"], rows["subset"]["top1"]]
        )
        assert report["average"]["top1"] == pytest.approx(expected)
        table = (directory / "report.txt").read_text(encoding="utf-8")
        assert table.strip().splitlines()[-1].lstrip().startswith("Average")
        manifest = read_json(directory / "manifest.json")
        assert str(subset) in manifest["inputs"]


class TestCurateAndTrain:
    def test_fixture_curation(self, tmp_path):
        classes = tmp_path / "classes.json"
        classes.write_text('["cat", "dog"]', encoding="utf-8")
        for class_id, name in enumerate(["cat", "dog"]):
            folder = tmp_path / "fixtures" / str(class_id)
            folder.mkdir(parents=True)
            (folder / "0.txt").write_text(
                f"a {name} on a sofa\na small {name}\n", encoding="utf-8"
            )
        config = make_config(
            tmp_path,
            "curate",
            **{
                "paths.classes": str(classes),
                "paths.fixtures": str(tmp_path / "fixtures"),
                "curate.outputs_per_query": 2,
                "curate.queries": ["Describe a {CLS}."],
            },
        )
        directory = cmd_curate(config)
        dataset = load_dataset(directory / "dataset.jsonl")
        assert len(dataset) == 4
        assert dataset.inputs_by_class() == {
            0: "a photo of a cat",
            1: "a photo of a dog",
        }
        manifest = read_json(directory / "manifest.json")
        assert "dataset.header.json" in manifest["outputs"]

    def test_train_on_a_saved_dataset(self, tmp_path):
        source = cmd_synthetic(make_config(tmp_path / "runs", "source"))
        config = make_config(
            tmp_path,
            "train",
            **{
                "paths.vocab": str(source / "vocab.json"),
                "paths.weights": str(source / "weights.json"),
                "paths.dataset": str(source / "dataset.jsonl"),
                "train.epochs": 1,
            },
        )
        directory = cmd_train(config)
        trace = pd.read_csv(directory / "loss_trace.csv")
        assert len(trace) == 1
        checkpoint = read_json(directory / "checkpoint.json")
        assert checkpoint["J"] == 1
        assert checkpoint["T"] == 4


class TestAblate:
    def test_loss_sweep_has_one_row_per_loss(self, tmp_path):
        directory = cmd_ablate(make_config(tmp_path, "losses"))
        sweep = pd.read_csv(directory / "sweep.csv")
        assert list(sweep["loss"]) == ["mse", "l1", "contrastive"]
        assert list(sweep["seed"]) == [1, 2, 3]
        assert (directory / "sweep.txt").exists()

    def test_zero_length_cell_matches_baseline(self, tmp_path):
        config = make_config(
            tmp_path,
            "lengths",
            **{"ablate.axes": {"T": [0, 4]}, "ablate.workers": 2},
        )
        directory = cmd_ablate(config)
        report = read_json(directory / "report.json")
        zero = report["cells"][0]
        assert zero["prompt_length"] == 0
        baseline = report["baseline"]
        assert zero["base"] == pytest.approx(
            100 * baseline["base"]["top1"]
        )
        assert zero["novel"] == pytest.approx(
            100 * baseline["novel"]["top1"]
        )

    def test_target_mode_sweep(self, tmp_path):
        config = make_config(
            tmp_path,
            "targets",
            **{"ablate.axes": {"target": ["per-sample", "ensembled"]}},
        )
        sweep = pd.read_csv(cmd_ablate(config) / "sweep.csv")
        assert list(sweep["target"]) == ["per-sample", "ensembled"]
        columns = ["final_loss", "base", "novel", "hm"]
        assert sweep[columns].notna().to_numpy().all()

    def test_descriptions_sweep(self, tmp_path):
        config = make_config(
            tmp_path,
            "descriptions",
            **{"ablate.axes": {"descriptions": [1, 4]}},
        )
        directory = cmd_ablate(config)
        sweep = pd.read_csv(directory / "sweep.csv")
        assert list(sweep["descriptions"]) == [1, 4]
        assert sweep["final_loss"].notna().all()
        assert "descriptions" in (directory / "sweep.txt").read_text(
            encoding="utf-8"
        )


@pytest.mark.slow
def test_more_descriptions_never_hurt_on_average(tmp_path):
    novel = []
    for seed in range(1, 6):
        config = Config(
            overrides=[
                (["paths", "output"], str(tmp_path)),
                (["run_id"], f"descriptions{seed}"),
                (["seed"], seed),
                (["ablate", "axes"], {"descriptions": [1, 20]}),
            ]
        )
        sweep = pd.read_csv(cmd_ablate(config) / "sweep.csv")
        novel.append(sweep.set_index("descriptions")["novel"])
    means = pd.concat(novel, axis=1).mean(axis=1)
    assert means.loc[20] >= means.loc[1]


@pytest.mark.slow
def test_prompts_transfer_to_novel_classes(tmp_path):
    config = Config(overrides=[(["paths", "output"], str(tmp_path))])
    settings = SyntheticWorldConfig.from_config(config)
    train_config = TrainConfig.from_config(config, section="synthetic.train")
    wins = 0
    for seed in range(5):
        world = build_world(
            settings,
            seed,
            "a photo of a {CLS}",
            init_text=train_config.init_text,
        )
        _, results = run_transfer(world, train_config, EvalConfig())
        prompted = results["prompted"].novel.top1
        wins += prompted > results["plain-template"].novel.top1
    assert wins >= 4
