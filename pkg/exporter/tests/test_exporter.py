import json
import warnings
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from comca_export.cli import main
from comca_export.encoders import HashEncoder, ModelLoad, resolve_encoder
from comca_export.jobs import ExportJob, export, read_vocab
from comca_export.templates import soft_label_texts, split_has_attribute

# the container format is the interface to the scoring side; its loader
# is the ingest validator the exported files must satisfy
import comca


def write_vocab(path, attrs=("red", "wet"), objs=("car", "dog", "apple"),
                types=None):
    types = types or {}
    payload = {
        "attributes": [{"name": a, "type": types.get(a, "is"),
                        "synonyms": [], "bucket": "unknown"} for a in attrs],
        "objects": list(objs),
    }
    Path(path).write_text(json.dumps(payload))
    return path


def write_images(tmp_path, specs):
    """specs: list of (id, color, size, box-or-None); returns manifest path."""
    manifest = tmp_path / "images.jsonl"
    with open(manifest, "w") as fh:
        for id_, color, size, box in specs:
            img_path = tmp_path / f"{id_}.png"
            Image.new("RGB", size, color).save(img_path)
            rec = {"id": id_, "path": str(img_path)}
            if box:
                rec["box"] = box
            fh.write(json.dumps(rec) + "\n")
    return manifest


class TestEncoders:
    def test_hash_encoder_deterministic(self):
        enc = HashEncoder(16)
        a = enc.encode_texts(["hello", "world"])
        b = enc.encode_texts(["hello", "world"])
        np.testing.assert_array_equal(a, b)
        assert a.shape == (2, 16)
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)

    def test_different_text_different_row(self):
        enc = HashEncoder(16)
        rows = enc.encode_texts(["hello", "goodbye"])
        assert not np.allclose(rows[0], rows[1])

    def test_resolve_hash(self):
        enc = resolve_encoder("hash/8")
        assert enc.dim == 8

    def test_resolve_unknown_scheme(self):
        with pytest.raises(ModelLoad):
            resolve_encoder("bogus/thing")

    def test_resolve_bad_dim(self):
        with pytest.raises(ModelLoad):
            resolve_encoder("hash/xx")


class TestTemplates:
    def test_split_has_attribute(self):
        assert split_has_attribute("long sleeves") == ("long", "sleeves")
        assert split_has_attribute("wings") == ("", "wings")

    def test_is_type_texts(self):
        assert soft_label_texts("red", "is") == ["a red object",
                                                 "a object is red"]

    def test_has_type_texts_whitespace_normalized(self):
        texts = soft_label_texts("wings", "has")
        assert texts == ["a wings object", "a object has wings"]


class TestImageExport:
    def test_pool_export_passes_primary_ingest_cleanly(self, tmp_path):
        manifest = write_images(tmp_path, [
            ("img0", "red", (16, 16), None),
            ("img1", "blue", (16, 16), None),
        ])
        out = tmp_path / "pool.comcaemb"
        result = export(ExportJob("pool_images", "hash/32", str(manifest),
                                  str(out)))
        assert result.rows == 2 and not result.skipped
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            loaded = comca.load_embeddings(out)
        assert loaded.ids == ["img0", "img1"]
        assert loaded.kind == "image"
        assert loaded.dim == 32

    def test_identical_inputs_identical_rows(self, tmp_path):
        manifest = write_images(tmp_path, [
            ("a", "green", (10, 10), None),
            ("b", "green", (10, 10), None),
        ])
        out = tmp_path / "pool.comcaemb"
        export(ExportJob("pool_images", "hash/16", str(manifest), str(out)))
        loaded = comca.load_embeddings(out)
        np.testing.assert_array_equal(loaded.data[0], loaded.data[1])

    def test_reexport_bitwise_identical(self, tmp_path):
        manifest = write_images(tmp_path, [("a", "red", (12, 9), None)])
        out1 = tmp_path / "one.comcaemb"
        out2 = tmp_path / "two.comcaemb"
        export(ExportJob("pool_images", "hash/16", str(manifest), str(out1)))
        export(ExportJob("pool_images", "hash/16", str(manifest), str(out2)))
        assert out1.read_bytes() == out2.read_bytes()

    def test_region_crop_changes_embedding(self, tmp_path):
        # quadrant-colored image: the crop content differs from the whole
        img_path = tmp_path / "quad.png"
        img = Image.new("RGB", (20, 20), "white")
        for x in range(10):
            for y in range(10):
                img.putpixel((x, y), (255, 0, 0))
        img.save(img_path)
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(
            json.dumps({"id": "whole", "path": str(img_path)}) + "\n"
            + json.dumps({"id": "crop", "path": str(img_path),
                          "box": [0, 0, 10, 10]}) + "\n")
        full_out = tmp_path / "full.comcaemb"
        export(ExportJob("pool_images", "hash/16", str(manifest),
                         str(full_out)))
        region_manifest = tmp_path / "r.jsonl"
        region_manifest.write_text(json.dumps(
            {"id": "crop", "path": str(img_path),
             "box": [0, 0, 10, 10]}) + "\n")
        crop_out = tmp_path / "crop.comcaemb"
        export(ExportJob("region_images", "hash/16", str(region_manifest),
                         str(crop_out)))
        full = comca.load_embeddings(full_out)
        crop = comca.load_embeddings(crop_out)
        assert not np.allclose(full.row("whole"), crop.row("crop"))

    def test_region_without_box_skipped(self, tmp_path):
        manifest = write_images(tmp_path, [
            ("ok", "red", (8, 8), [0, 0, 4, 4]),
            ("nobox", "red", (8, 8), None),
        ])
        out = tmp_path / "regions.comcaemb"
        result = export(ExportJob("region_images", "hash/16", str(manifest),
                                  str(out)))
        assert result.rows == 1 and result.skipped == ["nobox"]

    def test_undecodable_image_skipped_and_reported(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"this is not a png")
        manifest = tmp_path / "m.jsonl"
        good = tmp_path / "good.png"
        Image.new("RGB", (8, 8), "red").save(good)
        manifest.write_text(
            json.dumps({"id": "good", "path": str(good)}) + "\n"
            + json.dumps({"id": "bad", "path": str(bad)}) + "\n")
        out = tmp_path / "pool.comcaemb"
        result = export(ExportJob("pool_images", "hash/16", str(manifest),
                                  str(out)))
        assert result.rows == 1 and result.skipped == ["bad"]
        assert comca.load_embeddings(out).ids == ["good"]


class TestTextExport:
    def test_query_grid_size_and_ids(self, tmp_path):
        vocab = write_vocab(tmp_path / "vocab.json")
        out = tmp_path / "queries.comcaemb"
        result = export(ExportJob("query_texts", "hash/16", str(vocab),
                                  str(out)))
        assert result.rows == 6  # |A| * |O|
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            loaded = comca.load_embeddings(out)
        assert loaded.ids == ["red|car", "red|dog", "red|apple",
                              "wet|car", "wet|dog", "wet|apple"]
        assert loaded.kind == "text"

    def test_pair_list_restricts_grid(self, tmp_path):
        vocab = write_vocab(tmp_path / "vocab.json")
        pairs = tmp_path / "pairs.jsonl"
        pairs.write_text(json.dumps({"attribute": "wet", "object": "dog"})
                         + "\n")
        out = tmp_path / "queries.comcaemb"
        result = export(ExportJob("query_texts", "hash/16", str(vocab),
                                  str(out), pairs_path=str(pairs)))
        assert result.rows == 1
        assert comca.load_embeddings(out).ids == ["wet|dog"]

    def test_attr_prompts_one_row_per_attribute(self, tmp_path):
        vocab = write_vocab(tmp_path / "vocab.json")
        out = tmp_path / "prompts.comcaemb"
        result = export(ExportJob("attr_prompts", "hash/16", str(vocab),
                                  str(out)))
        assert result.rows == 2
        loaded = comca.load_embeddings(out)
        assert loaded.ids == ["red", "wet"]

    def test_attr_text_is_normalized_template_average(self, tmp_path):
        vocab = write_vocab(tmp_path / "vocab.json", attrs=("red",))
        out = tmp_path / "attr_text.comcaemb"
        export(ExportJob("attr_text", "hash/16", str(vocab), str(out)))
        loaded = comca.load_embeddings(out)
        enc = HashEncoder(16)
        pair = enc.encode_texts(soft_label_texts("red", "is"))
        want = pair.mean(axis=0)
        want = want / np.linalg.norm(want)
        np.testing.assert_allclose(
            loaded.data[0], want.astype(np.float32).astype(np.float64),
            atol=1e-7)

    def test_separator_in_vocab_name_rejected(self, tmp_path):
        vocab = write_vocab(tmp_path / "vocab.json", attrs=("red|ish",))
        with pytest.raises(ValueError, match="reserved"):
            read_vocab(vocab)
        with pytest.raises(ValueError):
            export(ExportJob("query_texts", "hash/16", str(vocab),
                             str(tmp_path / "q.comcaemb")))


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        vocab = write_vocab(tmp_path / "vocab.json")
        out = tmp_path / "prompts.comcaemb"
        rc = main(["--mode", "attr_prompts", "--model", "hash/16",
                   "--in", str(vocab), "--out", str(out)])
        assert rc == 0
        assert "wrote 2 rows" in capsys.readouterr().out
        assert out.exists()

    def test_skips_exit_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"nope")
        good = tmp_path / "good.png"
        Image.new("RGB", (8, 8), "red").save(good)
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(
            json.dumps({"id": "good", "path": str(good)}) + "\n"
            + json.dumps({"id": "bad", "path": str(bad)}) + "\n")
        out = tmp_path / "pool.comcaemb"
        rc = main(["--mode", "pool_images", "--model", "hash/16",
                   "--in", str(manifest), "--out", str(out)])
        assert rc == 2
        rc = main(["--mode", "pool_images", "--model", "hash/16",
                   "--in", str(manifest), "--out", str(out),
                   "--allow-skips"])
        assert rc == 0

    def test_unknown_model_exit_1(self, tmp_path, capsys):
        vocab = write_vocab(tmp_path / "vocab.json")
        rc = main(["--mode", "attr_prompts", "--model", "nope/x",
                   "--in", str(vocab), "--out", str(tmp_path / "o.emb")])
        assert rc == 1

    def test_missing_manifest_exit_2(self, tmp_path, capsys):
        rc = main(["--mode", "attr_prompts", "--model", "hash/16",
                   "--in", str(tmp_path / "missing.json"),
                   "--out", str(tmp_path / "o.emb")])
        assert rc == 2


class TestPipelineIntegration:
    def test_exported_containers_drive_primary_scoring(self, tmp_path):
        """Exporter output feeds the scoring side purely through files."""
        vocab_path = write_vocab(tmp_path / "vocab.json")
        manifest = write_images(tmp_path, [
            (f"p{i}", c, (12, 12), None)
            for i, c in enumerate(["red", "blue", "green", "white"])])
        pool_out = tmp_path / "pool.comcaemb"
        prompts_out = tmp_path / "prompts.comcaemb"
        export(ExportJob("pool_images", "hash/24", str(manifest),
                         str(pool_out)))
        export(ExportJob("attr_prompts", "hash/24", str(vocab_path),
                         str(prompts_out)))
        pool = comca.load_embeddings(pool_out)
        prompts = comca.load_embeddings(prompts_out)
        scores = comca.zero_shot_scores(pool, prompts)
        assert scores.values.shape == (4, 2)
        assert np.all(np.isfinite(scores.values))
