"""Regenerates the demo vocabulary, tabular model and experiment config."""
import base64
import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent
N_ITEMS = 6
# Items answered correctly per cell (none, key_only, prompt_only, both).
CORRECT = {(0, 0): 3, (0, 1): 4, (1, 0): 3, (1, 1): 5}

tokens = ['{"steps":', '{"think_step_by_step":', '"', "ok", '","answer":', ',"answer":', "1}", "2}", "1", "}",
          "P", "N", "I"] + [f"q{k}" for k in range(N_ITEMS)] + [""]
EOS = len(tokens) - 1
V = len(tokens)
P, N, I = 10, 11, 12


def peaked(preferred, logit=4.0):
    logits = [0.0] * V
    logits[preferred] = logit
    norm = math.log(sum(math.exp(x) for x in logits))
    return [x - norm for x in logits]


entries = []
for c_p in (0, 1):
    description = [I, I] if c_p else [N]
    for k in range(N_ITEMS):
        prompt = [P] + description + [P, 13 + k]
        entries.append({"context": prompt, "logprobs": peaked(0)})
        for c_s in (0, 1):
            answer = 6 if k < CORRECT[(c_p, c_s)] else 7
            path = [c_s, 2, 3, 4, answer]
            following = [2, 3, 4, answer, EOS]
            for depth in range(1, len(path) + 1):
                entries.append({"context": prompt + path[:depth], "logprobs": peaked(following[depth - 1])})

(HERE / "vocab.txt").write_text(
    f"#eos {EOS}\n" + "".join(f"{i}\t{base64.b64encode(t.encode()).decode()}\n" for i, t in enumerate(tokens)))
uniform = [-math.log(V)] * V
(HERE / "model.json").write_text(json.dumps({"vocab_size": V, "horizon": 12, "default": uniform, "entries": entries}))
(HERE / "schema.json").write_text(json.dumps(
    {"fields": [{"key": "steps", "kind": "string"}, {"key": "answer", "kind": "integer"}], "max_string_len": 16,
     "max_number_len": 4}, indent=2) + "\n")
(HERE / "neutral.json").write_text(json.dumps({"field": "steps", "wording": "steps"}) + "\n")
(HERE / "instructional.json").write_text(json.dumps({"field": "steps", "wording": "think_step_by_step"}) + "\n")
(HERE / "experiment.json").write_text(json.dumps({
    "vocab": "vocab.txt",
    "schema": "schema.json",
    "neutral_variant": "neutral.json",
    "instructional_variant": "instructional.json",
    "prompt": {"template": [P, -1, P], "neutral_description": [N], "instructional_description": [I, I]},
    "backend": {"type": "tabular", "path": "model.json"},
    "items": [{"id": f"q{k}", "prompt_ids": [13 + k], "gold": 1} for k in range(N_ITEMS)],
    "policy": "greedy",
    "seed": 1,
    "max_steps": 32,
    "metric": "exact_answer",
    "model": "demo-table",
    "benchmark": "toy",
}, indent=2) + "\n")
