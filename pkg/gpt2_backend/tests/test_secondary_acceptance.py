"""Acceptance gate for the neural backend: protocol conformance and a
learning smoke test, each printing a single PASS line."""

import json
import subprocess
import sys
import time

from corpus_helpers import prefix_and_target

from gpt2_backend import (
    FineTuneJob,
    TrainingConfig,
    finetune,
    generate,
    load_checkpoint,
    load_instances,
)

SCHEMES = {"cs", "sc", "s"}


def test_acceptance_protocol_conformance_handshake_plus_ten_requests(quick_checkpoint):
    proc = subprocess.Popen(
        [sys.executable, "-m", "gpt2_backend", "serve",
         "--checkpoint", str(quick_checkpoint)],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
    )
    try:
        handshake = json.loads(proc.stdout.readline())
        assert isinstance(handshake["name"], str) and handshake["name"]
        assert handshake["scheme"] in SCHEMES
        assert isinstance(handshake["instance_id"], int) and handshake["instance_id"] >= 1
        assert isinstance(handshake["decoding"], str) and handshake["decoding"]
        assert handshake["serial_only"] is True
        training = handshake["training"]
        assert isinstance(training["epochs"], int)
        assert isinstance(training["learning_rate"], float)
        assert isinstance(training["batch_size"], int)
        assert isinstance(training["optimizer"], str)
        assert isinstance(training["eval_every_epoch"], bool)

        for i in range(10):
            request = {
                "prefix": f"story {i} about anything at all [SEP]",
                "num_candidates": 3,
                "max_new_tokens": 50,
            }
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            response = json.loads(proc.stdout.readline())
            assert set(response) == {"candidates", "truncated_flags"}
            assert len(response["candidates"]) == 3
            assert len(response["truncated_flags"]) == 3
            for candidate, flag in zip(response["candidates"],
                                       response["truncated_flags"]):
                assert isinstance(candidate, str)
                assert len(candidate.split()) <= 50
                assert isinstance(flag, str)
    finally:
        proc.stdin.close()
        proc.wait(timeout=30)
    print("[ACCEPTANCE] protocol conformance: handshake + 10 requests, "
          "3 candidates each, <= 50 tokens: PASS")


def test_acceptance_learning_smoke_under_ten_minutes(toy20, toy5, tmp_path):
    start = time.perf_counter()

    # loss trend at the default configuration
    trend = finetune(FineTuneJob(toy20, tmp_path / "trend", TrainingConfig(), seed=0))
    assert len(trend.epoch_mean_losses) == 5
    assert trend.epoch_mean_losses[-1] < trend.epoch_mean_losses[0]

    # overfit a 5-instance corpus and replay each training post
    overfit = finetune(
        FineTuneJob(toy5, tmp_path / "overfit",
                    TrainingConfig(epochs=50, learning_rate=5e-3), seed=0)
    )
    checkpoint = load_checkpoint(overfit.checkpoints[-1])
    memorized = 0
    for record in load_instances(toy5):
        prefix, target = prefix_and_target(record)
        candidates, _ = generate(checkpoint, prefix, num_candidates=3,
                                 max_new_tokens=50, seed=0)
        memorized += any(candidate == target for candidate in candidates)
    assert memorized == 5, f"only {memorized}/5 training posts reproduced"

    elapsed = time.perf_counter() - start
    assert elapsed < 600.0, f"learning smoke took {elapsed:.0f}s"
    print(f"[ACCEPTANCE] learning smoke: loss "
          f"{trend.epoch_mean_losses[0]:.3f} -> {trend.epoch_mean_losses[-1]:.3f}, "
          f"memorization 5/5, in {elapsed:.0f}s: PASS")
