import io
import json

import pytest

from gpt2_backend import (
    PrefixError,
    check_prefix,
    descriptor,
    generate,
    load_checkpoint,
    serve_stdio,
)


class TestCheckPrefix:
    @pytest.mark.parametrize(
        "prefix",
        [
            "a post about crabs [SEP]",
            "one word [SEP] ",
            "story 3 about prism foxes [SEP]",
        ],
    )
    def test_valid(self, prefix):
        check_prefix(prefix)

    @pytest.mark.parametrize(
        "prefix",
        [
            "",
            "   ",
            "no separator at all",
            "[SEP]",
            "ends mid [SEP] sentence",
            "two [SEP] markers [SEP]",
            "an end marker [EOS] inside [SEP]",
        ],
    )
    def test_rejected(self, prefix):
        with pytest.raises(PrefixError):
            check_prefix(prefix)


def test_load_checkpoint_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nope")


@pytest.fixture(scope="module")
def ckpt(quick_checkpoint):
    return load_checkpoint(quick_checkpoint)


class TestGenerate:
    def test_candidate_count_and_flags(self, ckpt):
        candidates, flags = generate(ckpt, "story 0 about nebula crabs [SEP]")
        assert len(candidates) == 3
        assert len(flags) == 3
        assert all(flag in ("", "truncated") for flag in flags)

    def test_token_budget(self, ckpt):
        candidates, flags = generate(
            ckpt, "story 0 about nebula crabs [SEP]", max_new_tokens=4
        )
        for candidate, flag in zip(candidates, flags):
            assert len(candidate.split()) <= 4
            if flag == "":
                assert candidate.endswith("[EOS]")

    def test_repeat_request_is_reproducible(self, ckpt):
        first = generate(ckpt, "story 1 about quartz owls [SEP]", seed=9)
        second = generate(ckpt, "story 1 about quartz owls [SEP]", seed=9)
        assert first == second

    def test_candidates_differ_across_slots_or_seeds(self, ckpt):
        # per-slot seeding: slot i uses a distinct stream, and changing the
        # base seed changes the draw
        a, _ = generate(ckpt, "story 2 about velvet moths [SEP]", seed=0,
                        max_new_tokens=20)
        b, _ = generate(ckpt, "story 2 about velvet moths [SEP]", seed=1,
                        max_new_tokens=20)
        assert a != b

    def test_unknown_words_still_generate(self, ckpt):
        candidates, _ = generate(ckpt, "completely novel words [SEP]")
        assert len(candidates) == 3

    def test_malformed_prefix_raises(self, ckpt):
        with pytest.raises(PrefixError):
            generate(ckpt, "no trailing separator")

    def test_bad_counts_rejected(self, ckpt):
        with pytest.raises(ValueError):
            generate(ckpt, "story 0 about nebula crabs [SEP]", num_candidates=0)

    def test_descriptor_shape(self, ckpt):
        desc = descriptor(ckpt, "gpt2", 2, seed=4)
        assert desc["name"] == "gpt2"
        assert desc["scheme"] == "s"
        assert desc["instance_id"] == 2
        assert desc["serial_only"] is True
        assert desc["decoding"].startswith("sampling:")
        assert "tiny" in desc["decoding"]
        assert "seed 4" in desc["decoding"]
        assert desc["training"]["optimizer"] == "adam"


class TestServeStdio:
    def run_session(self, ckpt, lines):
        stdin = io.StringIO("".join(line + "\n" for line in lines))
        stdout = io.StringIO()
        serve_stdio(ckpt, name="unit", instance_id=1, seed=0,
                    stdin=stdin, stdout=stdout)
        return [json.loads(line) for line in stdout.getvalue().splitlines()]

    def test_handshake_then_response(self, ckpt):
        request = json.dumps(
            {"prefix": "story 0 about nebula crabs [SEP]",
             "num_candidates": 2, "max_new_tokens": 10}
        )
        handshake, response = self.run_session(ckpt, [request])
        assert handshake["name"] == "unit"
        assert handshake["scheme"] == "s"
        assert handshake["serial_only"] is True
        assert set(response) == {"candidates", "truncated_flags"}
        assert len(response["candidates"]) == 2

    def test_bad_json_then_recovery(self, ckpt):
        request = json.dumps({"prefix": "story 0 about nebula crabs [SEP]"})
        _, error, response = self.run_session(ckpt, ["{not json", request])
        assert error["error"]["code"] == "bad_request"
        assert len(response["candidates"]) == 3

    def test_malformed_prefix_error_code(self, ckpt):
        _, error = self.run_session(ckpt, [json.dumps({"prefix": "missing marker"})])
        assert error["error"]["code"] == "malformed_prefix"

    def test_request_defaults(self, ckpt):
        request = json.dumps({"prefix": "story 4 about ember snails [SEP]"})
        _, response = self.run_session(ckpt, [request])
        assert len(response["candidates"]) == 3
        assert len(response["truncated_flags"]) == 3
