"""
Tests for prompt records, curation, dataset files and LLM clients.
"""

import json

import pytest
import requests

from src.config import Config, CurateConfig
from src.data.client import FixtureLlmClient, HttpLlmClient, LlmClient
from src.data.curation import (
    assemble_dataset,
    build_inputs,
    curate,
    load_dataset,
    save_dataset,
)
from src.data.records import (
    ClassRecord,
    PromptDataset,
    PromptPair,
    QueryTemplate,
    load_classes,
)
from src.data.templates import ATTRIBUTE_TEMPLATES, DEFAULT_QUERIES
from src.structures.enums import ClassSplit, CurationMode, PairSource
from src.structures.errors import (
    ArtifactIOError,
    LlmClientError,
    ValidationError,
)


def write_fixtures(directory, classes, queries, lines):
    """Writes <directory>/<class_id>/<query_id>.txt fixture files."""
    for record in classes:
        folder = directory / str(record.class_id)
        folder.mkdir(parents=True, exist_ok=True)
        for query_id in range(queries):
            text = "\n".join(
                f"{record.name} description {query_id}.{i}"
                for i in range(lines)
            )
            (folder / f"{query_id}.txt").write_text(text, encoding="utf-8")
    return directory


class FakeResponse:
    def __init__(self, payload=None, status_code=200):
        self.payload = payload
        self.status_code = status_code

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.exceptions.HTTPError(
                f"{self.status_code} error", response=self
            )

    def json(self):
        return self.payload


class TestRecords:
    @pytest.mark.parametrize(
        "template", ["a photo of a cat", "{CLS} and {CLS}", ""]
    )
    def test_template_needs_one_placeholder(self, template):
        with pytest.raises(ValidationError):
            QueryTemplate(template)

    def test_template_renders_name(self):
        query = QueryTemplate("a photo of a {CLS}.")
        assert query.render("goldfish") == "a photo of a goldfish."

    def test_empty_output_is_rejected(self):
        with pytest.raises(ValidationError):
            PromptPair(0, "a photo of a cat", "   ", PairSource.LLM)

    def test_class_needs_a_name(self):
        with pytest.raises(ValidationError):
            ClassRecord(class_id=0, name=" ")

    def test_one_input_per_class(self, toy_classes):
        pairs = (
            PromptPair(0, "a photo of a cat", "a cat", PairSource.LLM),
            PromptPair(0, "a picture of a cat", "a cat", PairSource.LLM),
        )
        with pytest.raises(ValidationError):
            PromptDataset(pairs=pairs, classes=tuple(toy_classes))

    def test_duplicate_class_names_are_rejected(self):
        classes = (ClassRecord(0, "cat"), ClassRecord(1, "cat"))
        with pytest.raises(ValidationError):
            PromptDataset(pairs=(), classes=classes)

    def test_pair_count_must_match_meta(self, toy_dataset):
        with pytest.raises(ValidationError):
            PromptDataset(
                pairs=toy_dataset.pairs[:-1],
                classes=toy_dataset.classes,
                meta={"M": 2, "N": 1},
            )

    def test_limit_outputs(self, toy_dataset):
        limited = toy_dataset.limit_outputs(1)
        assert len(limited) == 3
        assert limited.meta["limit"] == 1
        assert [p.output_text for p in limited.pairs] == [
            toy_dataset.outputs_by_class()[i][0] for i in range(3)
        ]
        with pytest.raises(ValidationError):
            toy_dataset.limit_outputs(0)

    def test_split_keeps_one_side(self):
        classes = [
            ClassRecord(0, "cat", split="base"),
            ClassRecord(1, "dog", split="novel"),
        ]
        dataset = assemble_dataset(
            classes,
            {0: "a cat", 1: "a dog"},
            {0: ["a small cat"], 1: ["a big dog"]},
        )
        base = dataset.split(ClassSplit.BASE)
        assert [r.name for r in base.classes] == ["cat"]
        assert {p.class_id for p in base.pairs} == {0}
        assert dataset.split(ClassSplit.ALL) is dataset


class TestLoadClasses:
    def test_plain_names_get_positional_ids(self, tmp_path):
        path = tmp_path / "classes.json"
        path.write_text(json.dumps(["cat", "dog"]), encoding="utf-8")
        records = load_classes(path)
        assert [(r.class_id, r.name) for r in records] == [
            (0, "cat"),
            (1, "dog"),
        ]
        assert all(r.split == ClassSplit.ALL for r in records)

    def test_object_entries(self, tmp_path):
        path = tmp_path / "classes.json"
        data = {
            "classes": [
                {"name": "cat", "split": "base"},
                {"name": "pug", "concept_suffix": ", a type of dog."},
            ]
        }
        path.write_text(json.dumps(data), encoding="utf-8")
        cat, pug = load_classes(path)
        assert cat.split == ClassSplit.BASE
        assert pug.concept_suffix == ", a type of dog."

    def test_repeated_name_raises(self, tmp_path):
        path = tmp_path / "classes.json"
        path.write_text(json.dumps(["cat", "cat"]), encoding="utf-8")
        with pytest.raises(ValidationError):
            load_classes(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_classes(tmp_path / "absent.json")


class TestCurate:
    def test_inputs_include_concept_suffix(self):
        classes = [ClassRecord(0, "pug", concept_suffix=", a dog.")]
        inputs = build_inputs(classes, "a photo of a {CLS}")
        assert inputs == {0: "a photo of a pug, a dog."}

    def test_fixture_curation_counts(self, tmp_path, toy_classes):
        fixtures = write_fixtures(
            tmp_path / "fixtures", toy_classes, len(DEFAULT_QUERIES), 6
        )
        settings = CurateConfig(
            mode=CurationMode.FIXTURE, outputs_per_query=4, workers=2
        )
        dataset = curate(toy_classes, settings, FixtureLlmClient(fixtures))
        assert len(dataset) == 3 * 5 * 4
        assert dataset.meta["M"] == 4 and dataset.meta["N"] == 5
        assert len(set(dataset.inputs_by_class().values())) == 3
        for class_id, outputs in dataset.outputs_by_class().items():
            assert len(outputs) == 20
            name = dataset.class_by_id[class_id].name
            assert all(text.startswith(name) for text in outputs)
        assert all(p.source == PairSource.FIXTURE for p in dataset.pairs)

    def test_blank_completions_are_dropped(self, tmp_path, toy_classes):
        fixtures = write_fixtures(tmp_path, toy_classes, 1, 2)
        (tmp_path / "0" / "0.txt").write_text("a cat\n \n", encoding="utf-8")
        settings = CurateConfig(
            mode=CurationMode.FIXTURE,
            outputs_per_query=2,
            queries=["Describe a {CLS}."],
        )
        dataset = curate(toy_classes, settings, FixtureLlmClient(fixtures))
        assert len(dataset) == 5
        assert dataset.meta["filtered"] == 1

    def test_missing_fixture_raises(self, tmp_path, toy_classes):
        settings = CurateConfig(mode=CurationMode.FIXTURE)
        with pytest.raises(ArtifactIOError):
            curate(toy_classes, settings, FixtureLlmClient(tmp_path))

    def test_handcrafted_templates(self, toy_classes):
        settings = CurateConfig(mode=CurationMode.HANDCRAFTED_80)
        dataset = curate(toy_classes, settings)
        assert len(dataset) == 80 * 3
        assert dataset.meta["K"] == 80
        assert "a photo of a cat." in dataset.outputs_by_class()[0]

    def test_attribute_templates(self, toy_classes):
        assert len(ATTRIBUTE_TEMPLATES) == 46
        assert len(set(ATTRIBUTE_TEMPLATES)) == 46
        assert all("{CLS}" in text for text in ATTRIBUTE_TEMPLATES)
        settings = CurateConfig(mode=CurationMode.HANDCRAFTED_ATTRIBUTE)
        dataset = curate(toy_classes, settings)
        assert len(dataset) == 46 * 3
        assert "a blurry photo of a dog." in dataset.outputs_by_class()[1]

    def test_generated_mode_needs_a_client(self, toy_classes):
        settings = CurateConfig(mode=CurationMode.FIXTURE)
        with pytest.raises(ValidationError):
            curate(toy_classes, settings)

    def test_no_classes_raises(self):
        with pytest.raises(ValidationError):
            curate([], CurateConfig(mode=CurationMode.HANDCRAFTED_80))


class TestDatasetFiles:
    def test_save_then_load_is_identity(self, tmp_path, toy_dataset):
        path = tmp_path / "pairs.jsonl"
        save_dataset(toy_dataset, path)
        assert load_dataset(path) == toy_dataset

    def test_bad_line_names_its_position(self, tmp_path, toy_dataset):
        path = tmp_path / "pairs.jsonl"
        save_dataset(toy_dataset, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[2] = "{not json"
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(ArtifactIOError, match=":3:"):
            load_dataset(path)

    def test_mismatched_class_name_raises(self, tmp_path, toy_dataset):
        path = tmp_path / "pairs.jsonl"
        save_dataset(toy_dataset, path)
        text = path.read_text(encoding="utf-8")
        path.write_text(
            text.replace('"class_name": "cat"', '"class_name": "lion"'),
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match=":1:"):
            load_dataset(path)

    def test_missing_field_is_a_validation_error(
        self, tmp_path, toy_dataset
    ):
        path = tmp_path / "pairs.jsonl"
        save_dataset(toy_dataset, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        record = json.loads(lines[1])
        del record["output"]
        lines[1] = json.dumps(record)
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(ValidationError, match=":2: missing output"):
            load_dataset(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_dataset(tmp_path / "absent.jsonl")


class TestHttpClient:
    @pytest.fixture
    def sleeps(self, monkeypatch):
        delays = []
        monkeypatch.setattr("src.data.client.time.sleep", delays.append)
        return delays

    def test_transient_failures_are_retried(self, monkeypatch, sleeps):
        responses = iter(
            [
                requests.exceptions.ConnectionError("reset"),
                FakeResponse(status_code=503),
                FakeResponse({"completions": ["a cat", "a kitten"]}),
            ]
        )
        calls = []

        def post(**kwargs):
            calls.append(kwargs)
            response = next(responses)
            if isinstance(response, Exception):
                raise response
            return response

        monkeypatch.setattr("src.data.client.requests.post", post)
        client = HttpLlmClient("http://llm", key="secret", backoff=0.5)
        completions = client.complete(
            ClassRecord(0, "cat"), QueryTemplate("Describe a {CLS}."), 2
        )
        assert completions == ["a cat", "a kitten"]
        assert sleeps == [0.5, 1.0]
        assert calls[0]["json"]["prompt"] == "Describe a cat."
        assert calls[0]["json"]["n"] == 2
        assert calls[0]["headers"]["Authorization"] == "Bearer secret"

    def test_client_errors_are_not_retried(self, monkeypatch, sleeps):
        monkeypatch.setattr(
            "src.data.client.requests.post",
            lambda **kwargs: FakeResponse(status_code=400),
        )
        client = HttpLlmClient("http://llm")
        with pytest.raises(LlmClientError):
            client.complete(ClassRecord(0, "cat"), QueryTemplate("{CLS}"), 1)
        assert sleeps == []

    def test_retries_are_bounded(self, monkeypatch, sleeps):
        monkeypatch.setattr(
            "src.data.client.requests.post",
            lambda **kwargs: FakeResponse(status_code=503),
        )
        client = HttpLlmClient("http://llm", retries=2, backoff=1.0)
        with pytest.raises(LlmClientError, match="3 attempt"):
            client.complete(ClassRecord(0, "cat"), QueryTemplate("{CLS}"), 1)
        assert sleeps == [1.0, 2.0]


class TestClientFromConfig:
    @pytest.fixture(autouse=True)
    def clean_environment(self, monkeypatch):
        for name in Config.LLM_URL_VARIABLES + Config.LLM_KEY_VARIABLES:
            monkeypatch.delenv(name, raising=False)

    def test_endpoint_comes_from_the_environment(self, monkeypatch):
        monkeypatch.setenv("PROTEXT_LLM_URL", "http://llm")
        monkeypatch.setenv("PROTEXT_LLM_KEY", "secret")
        settings = CurateConfig(mode=CurationMode.LLM)
        client = LlmClient.from_config(Config(), settings)
        assert isinstance(client, HttpLlmClient)
        assert client.url == "http://llm"
        assert client.key == "secret"

    def test_project_variables_are_a_fallback(self, monkeypatch):
        monkeypatch.setenv("TEXTPROMPTS_LLM_URL", "http://fallback")
        config = Config()
        assert config.llm_url == "http://fallback"
        monkeypatch.setenv("PROTEXT_LLM_URL", "http://primary")
        assert config.llm_url == "http://primary"

    def test_missing_endpoint_raises(self):
        settings = CurateConfig(mode=CurationMode.LLM)
        with pytest.raises(ValidationError, match="PROTEXT_LLM_URL"):
            LlmClient.from_config(Config(), settings)
