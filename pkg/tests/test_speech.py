"""Speech evaluation: WER with edit counts, DTW-aligned MCD, MOS."""

import json
import math

import numpy as np
import pytest

from limba.errors import EmptyInputError, FormatError
from limba.speech import (
    WHISPER_FINETUNE_DEFAULTS,
    FrameSequence,
    MosRecord,
    Transcript,
    frame_distortion,
    mcd,
    mos,
    read_frames,
    read_mos_records,
    read_transcript_pairs,
    wer,
)
from oracles import edit_distance_by_search, min_alignment_costs

_SCALE = 10.0 / math.log(10.0)


def _t(text):
    return Transcript(tuple(text.split()))


class TestWer:
    """Word error rate with substitution/deletion/insertion counts."""

    def test_identity_is_zero(self):
        result = wer(_t("sa limba sarda"), _t("sa limba sarda"))
        assert result.wer == 0.0
        assert (result.substitutions, result.deletions, result.insertions) == (0, 0, 0)

    def test_single_substitution(self):
        result = wer(_t("a b c"), _t("a x c"))
        np.testing.assert_allclose(result.wer, 1.0 / 3.0, atol=1e-12)
        assert result.substitutions == 1
        assert result.reference_length == 3

    def test_rate_can_exceed_one(self):
        result = wer(_t("a"), _t("x y"))
        assert result.wer == 2.0
        assert result.substitutions == 1
        assert result.insertions == 1

    def test_deletion_counted(self):
        result = wer(_t("a b c"), _t("a c"))
        assert result.deletions == 1
        np.testing.assert_allclose(result.wer, 1.0 / 3.0, atol=1e-12)

    def test_empty_hypothesis_deletes_everything(self):
        result = wer(_t("a b c"), Transcript(()))
        assert result.deletions == 3
        assert result.wer == 1.0

    def test_empty_reference_rejected(self):
        with pytest.raises(EmptyInputError):
            wer(Transcript(()), _t("a"))

    def test_counts_match_search_on_random_pairs(self):
        rng = np.random.default_rng(23)
        vocab = list("abc")
        for _ in range(80):
            ref = [str(w) for w in rng.choice(vocab, size=rng.integers(1, 6))]
            hyp = [str(w) for w in rng.choice(vocab, size=rng.integers(0, 6))]
            result = wer(Transcript(tuple(ref)), Transcript(tuple(hyp)))
            edits = result.substitutions + result.deletions + result.insertions
            assert edits == edit_distance_by_search(ref, hyp)
            np.testing.assert_allclose(result.wer, edits / len(ref), atol=1e-12)


class TestFrameDistortion:
    """Per-frame distortion: (10/ln10) * sqrt(2 * sum of squared gaps)."""

    def test_known_value(self):
        value = frame_distortion(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        np.testing.assert_allclose(value, _SCALE * math.sqrt(2.0), atol=1e-12)

    def test_zero_for_identical_frames(self):
        frame = np.array([0.3, -1.2, 5.0])
        assert frame_distortion(frame, frame) == 0.0


class TestMcd:
    """DTW-aligned mean distortion."""

    def test_identity_is_zero(self):
        frames = FrameSequence(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert mcd(frames, frames) == 0.0

    def test_single_frame_formula(self):
        a = FrameSequence(np.array([[1.0, 0.0]]))
        b = FrameSequence(np.array([[0.0, 0.0]]))
        np.testing.assert_allclose(mcd(a, b), _SCALE * math.sqrt(2.0),
                                   atol=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a = FrameSequence(rng.normal(size=(5, 3)))
        b = FrameSequence(rng.normal(size=(7, 3)))
        np.testing.assert_allclose(mcd(a, b), mcd(b, a), atol=1e-12)

    def test_dim_mismatch_rejected(self):
        a = FrameSequence(np.zeros((2, 3)))
        b = FrameSequence(np.zeros((2, 4)))
        with pytest.raises(FormatError):
            mcd(a, b)

    def test_matches_exhaustive_alignment_on_tiny_inputs(self):
        rng = np.random.default_rng(29)
        for _ in range(60):
            n, m = rng.integers(1, 5), rng.integers(1, 5)
            a = rng.normal(size=(n, 2))
            b = rng.normal(size=(m, 2))
            cost = np.array([[frame_distortion(a[i], b[j]) for j in range(m)]
                             for i in range(n)])
            best, lengths = min_alignment_costs(cost)
            value = mcd(FrameSequence(a), FrameSequence(b))
            assert any(value == best / length for length in lengths)

    def test_frame_sequence_validation(self):
        with pytest.raises(EmptyInputError):
            FrameSequence(np.zeros((0, 3)))
        with pytest.raises(FormatError):
            FrameSequence(np.array([[np.nan, 0.0]]))
        with pytest.raises(FormatError):
            FrameSequence(np.zeros(4))  # not 2-D


class TestMos:
    """Per-item and overall opinion-score means."""

    def test_single_item_mean(self):
        records = [MosRecord(item_id="u1", scores=(5, 4, 4, 5))]
        report = mos(records)
        np.testing.assert_allclose(report.per_item["u1"], 4.5, atol=1e-12)
        np.testing.assert_allclose(report.overall, 4.5, atol=1e-12)

    def test_overall_weights_by_score_count(self):
        records = [
            MosRecord(item_id="a", scores=(5, 5, 5)),
            MosRecord(item_id="b", scores=(1,)),
        ]
        report = mos(records)
        np.testing.assert_allclose(report.overall, 4.0, atol=1e-12)

    def test_duplicate_item_ids_merge(self):
        records = [
            MosRecord(item_id="a", scores=(5,)),
            MosRecord(item_id="a", scores=(3,)),
        ]
        report = mos(records)
        np.testing.assert_allclose(report.per_item["a"], 4.0, atol=1e-12)

    def test_constant_scores(self):
        report = mos([MosRecord(item_id="a", scores=(3, 3, 3))])
        assert report.overall == 3.0

    def test_score_out_of_range_rejected(self):
        with pytest.raises(FormatError):
            MosRecord(item_id="a", scores=(6,))
        with pytest.raises(FormatError):
            MosRecord(item_id="a", scores=(0,))

    def test_empty_records_rejected(self):
        with pytest.raises(EmptyInputError):
            mos([])

    def test_report_dict_is_sorted(self):
        records = [
            MosRecord(item_id="b", scores=(3,)),
            MosRecord(item_id="a", scores=(4,)),
        ]
        payload = mos(records).as_dict()
        assert list(payload["per_item"]) == ["a", "b"]

    def test_reference_finetune_table(self):
        assert WHISPER_FINETUNE_DEFAULTS == {
            "epochs": 15,
            "batch_size": 4,
            "learning_rate": 1e-5,
            "weight_decay": 0.01,
            "loss": "wer",
        }


class TestFiles:
    """Transcript TSV, frame JSON, and MOS JSON readers."""

    def test_transcript_pairs_round_trip(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("sa limba\tsa limba\na b c\ta b\n", encoding="utf-8")
        pairs = read_transcript_pairs(path)
        assert len(pairs) == 2
        ref, hyp = pairs[1]
        assert ref.words == ("a", "b", "c")
        assert hyp.words == ("a", "b")

    def test_transcript_pairs_reject_bad_columns(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("no-tab-here\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_transcript_pairs(path)

    def test_frames_round_trip(self, tmp_path):
        path = tmp_path / "frames.json"
        payload = {"dim": 2, "frames": [[1.0, 2.0], [3.0, 4.0]]}
        path.write_text(json.dumps(payload), encoding="utf-8")
        frames = read_frames(path)
        assert frames.dim == 2
        np.testing.assert_array_equal(frames.frames,
                                      np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_frames_dim_cross_checked(self, tmp_path):
        path = tmp_path / "frames.json"
        payload = {"dim": 3, "frames": [[1.0, 2.0]]}
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(FormatError):
            read_frames(path)

    def test_mos_records_parse(self, tmp_path):
        path = tmp_path / "mos.json"
        payload = [{"item_id": "u1", "scores": [4, 5]}]
        path.write_text(json.dumps(payload), encoding="utf-8")
        records = read_mos_records(path)
        assert records[0].item_id == "u1"
        assert records[0].scores == (4, 5)
