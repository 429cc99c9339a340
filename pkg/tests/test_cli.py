import json

import pytest

from moegps.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_trace_round_trip(tmp_path, capsys):
    tr = tmp_path / "t.jsonl"
    assert run(["gen-trace", "--experts", "8", "--skew", "2", "--tokens", "512", "--seed", "7", "--out", str(tr)], capsys)[0] == 0
    code, out, _ = run(["trace-stats", "--trace", str(tr)], capsys)
    assert code == 0
    stats = json.loads(out)
    assert stats["tokens"] == 512 and stats["num_experts"] == 8
    assert stats["skewness"] == pytest.approx(2.0, abs=0.35)


def test_trace_stats_csv(tmp_path, capsys):
    tr = tmp_path / "t.jsonl"
    main(["gen-trace", "--experts", "4", "--tokens", "64", "--layers", "3", "--out", str(tr)])
    code, out, _ = run(["trace-stats", "--trace", str(tr), "--format", "csv"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("layer,skewness,expert_0") and len(lines) == 4


def test_simulate_smoke(capsys):
    code, out, _ = run(["simulate", "--config", "mixtral_nvlink.json"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["strategy"] == "none"
    assert rec["breakdown"]["total"] > 0


def test_simulate_strategies(capsys):
    code, out, _ = run(["simulate", "--config", "mixtral_nvlink.json", "--strategy", "token_to_expert", "--accuracy", "0.9", "--format", "csv"], capsys)
    assert code == 0 and len(out.splitlines()) == 2
    code, out, _ = run(["simulate", "--config", "mixtral_nvlink.json", "--strategy", "distribution_only", "--prefill"], capsys)
    assert code == 0 and json.loads(out)["error_rate"] == pytest.approx(0.0098)


def test_recommend_reference(capsys):
    code, out, _ = run(["recommend", "--config", "mixtral_nvlink.json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["strategy"] == "distribution_only"
    assert data["savings_difference_s"] > 0


def test_sweep_outputs(capsys):
    code, out, _ = run(["sweep", "--config", "mixtral_nvlink.json"], capsys)
    assert code == 0 and len(out.splitlines()) == 1 + 4 * (2 + 9)
    code, out, _ = run(["sweep", "--config", "bandwidth_sweep.json", "--savings", "--format", "json"], capsys)
    assert code == 0 and len(json.loads(out)) == 16


def test_estimate_with_truth(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["gen-trace", "--experts", "8", "--skew", "2", "--tokens", "4000", "--seed", "1", "--out", str(a)])
    main(["gen-trace", "--experts", "8", "--skew", "2", "--tokens", "4000", "--seed", "2", "--out", str(b)])
    truth = tmp_path / "truth.json"
    truth.write_text(json.dumps({"probs": [0.25] + [0.75 / 7] * 7}))
    code, out, _ = run(["estimate", "--trace", str(a), "--trace", str(b), "--truth", str(truth)], capsys)
    assert code == 0
    data = json.loads(out)
    assert 0 <= data["error_rate"] < 0.1
    code, out, _ = run(["estimate", "--trace", str(a), "--trace", str(b), "--mode", "exponential"], capsys)
    assert code == 1


def test_duplicate(tmp_path, capsys):
    tr = tmp_path / "t.jsonl"
    tr.write_text(json.dumps({"layer": 0, "experts": [0, 0, 0, 0, 0, 0, 1, 1]}) + "\n")
    code, out, _ = run(["duplicate", "--trace", str(tr), "--gpus", "4", "--experts", "4"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["dispatch"]["loads"] == [2, 2, 2, 2]
    assert data["report"]["ok"] and data["complete"]


def test_exit_codes(tmp_path, capsys):
    assert run(["simulate", "--config", "mixtral_nvlink.json", "--bogus"], capsys)[0] == 1
    assert run(["nonsense"], capsys)[0] == 1
    assert run(["simulate", "--config", "mixtral_nvlink.json", "--strategy", "token_to_expert"], capsys)[0] == 1
    assert run(["simulate", "--config", "mixtral_nvlink.json", "--skew", "12"], capsys)[0] == 1
    assert run(["trace-stats", "--trace", str(tmp_path / "missing.jsonl")], capsys)[0] == 2
    assert run(["simulate", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert run(["trace-stats", "--trace", str(bad)], capsys)[0] == 1
    assert run(["--version"], capsys)[0] == 0


WORKFLOWS = [
    ["gen-trace", "--experts", "8", "--skew", "1.8", "--tokens", "256", "--top-k", "2", "--layers", "2", "--seed", "5"],
    ["sweep", "--config", "strategy_sweep.json", "--workers", "4"],
    ["recommend", "--config", "mixtral_pcie.json"],
    ["simulate", "--config", "llama_moe_nvlink.json", "--strategy", "distribution_only", "--seed", "3"],
]


@pytest.mark.parametrize("argv", WORKFLOWS, ids=lambda a: a[0])
def test_byte_identical_outputs(argv, tmp_path):
    outs = []
    for i in range(2):
        dest = tmp_path / f"out{i}"
        assert main(argv + ["--out", str(dest)]) == 0
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1] and outs[0]
