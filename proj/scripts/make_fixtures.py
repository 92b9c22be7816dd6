#!/usr/bin/env python3
"""Regenerates the bundled synthetic fixtures under data/fixtures/.

The fixtures are committed; rerun this only when the fixture design changes.
Everything is derived from a fixed RNG seed so reruns are reproducible.
"""

import json
import os
import random

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "fixtures")

MODELS = ["gpt-oss-20b", "gpt-oss-120b", "qwen3-14b", "grok-4.1-fast"]

HEDGE_CORE = [
    "maybe", "perhaps", "possibly", "probably", "likely", "apparently",
    "presumably", "seemingly", "unsure", "uncertain", "unclear", "doubtful",
    "hesitant", "reportedly",
]
HEDGE_NOISE = [
    "roughly", "approximately", "vaguely", "arguably", "conceivably",
    "ostensibly", "tentatively", "allegedly", "supposedly", "somewhat",
]
VERIFY_CORE = [
    "check", "verify", "recheck", "confirm", "validate", "recompute",
    "recalculate", "substitute", "reevaluate", "reassess", "inspect",
    "crosscheck", "prove", "re-evaluate",
]
VERIFY_NOISE = [
    "audit", "examine", "reconfirm", "reverify", "plug", "derive", "ensure",
    "certify", "retest", "compute",
]

# Sentences that contain markers of the hand-authored dictionary below.
HEDGE_SENTENCES = [
    "Hmm, maybe the intermediate sum is off.",
    "Perhaps the second term dominates here.",
    "I am not sure the sign is right.",
    "I doubt the last assumption holds.",
    "The rounding step feels unsure to me.",
]
VERIFY_SENTENCES = [
    "Let me check the arithmetic once more.",
    "We verify the result against the table.",
    "Substitute back into the relation.",
    "I will double-check the units now.",
    "Time to check the boundary condition.",
]
NEUTRAL_SENTENCES = [
    "The gradient of the loss is computed next.",
    "We expand the product and collect terms.",
    "The matrix has full rank by construction.",
    "Summing the series gives a closed form.",
    "The recurrence telescopes after two steps.",
    "Both branches reduce to the same expression.",
    "The limit follows from the ratio bound.",
    "We normalize the rows before comparing.",
    "The second derivative stays positive on the interval.",
    "Collecting the residues gives the coefficient.",
    "The base case holds by direct evaluation.",
    "Each row operation preserves the determinant sign.",
]

LETTERS = ["A", "B", "C", "D", "E"]
DATASETS = ["bbh", "gpqa", "mmlu-pro"]


def write_seed_runs(rng):
    outdir = os.path.join(ROOT, "seed_runs")
    os.makedirs(outdir, exist_ok=True)
    for model in MODELS:
        for role, core, noise in (
            ("hedge", HEDGE_CORE, HEDGE_NOISE),
            ("verify", VERIFY_CORE, VERIFY_NOISE),
        ):
            for run_index in range(1, 6):
                words = list(core) + rng.sample(noise, 3)
                rng.shuffle(words)
                payload = {
                    "model": model,
                    "role": role,
                    "run_index": run_index,
                    "words": words,
                }
                name = f"{model}_{role}_run{run_index}.json".replace("/", "_")
                with open(os.path.join(outdir, name), "w") as f:
                    json.dump(payload, f, indent=2, sort_keys=True)
                    f.write("\n")


def build_trace(rng, n_hedge, n_verify, n_total):
    sentences = rng.sample(HEDGE_SENTENCES, n_hedge) + rng.sample(VERIFY_SENTENCES, n_verify)
    while len(sentences) < n_total:
        sentences.append(rng.choice(NEUTRAL_SENTENCES))
    rng.shuffle(sentences)
    return " ".join(sentences)


def make_record(rng, idx, dataset, labeled):
    n_hedge = rng.choice([0, 0, 1, 1, 2, 2, 3, 4])
    n_verify = rng.choice([0, 1, 1, 2, 2, 3])
    n_total = rng.randint(6, 12)
    trace = build_trace(rng, n_hedge, n_verify, min(n_total, n_hedge + n_verify + 8))

    conf_pct = max(35, min(99, int(rng.gauss(88 - 9 * n_hedge + 2 * n_verify, 6))))
    answer = rng.choice(LETTERS)
    record = {
        "id": f"{dataset}-{idx:04d}",
        "model": "gpt-oss-20b",
        "dataset": dataset,
        "question": f"Synthetic question {idx} over options A-E.",
        "trace_text": trace,
        "response_text": (
            "I worked through the candidate options step by step.</think>\n"
            f"The final option is \\boxed{{{answer}}}.\nConfidence: {conf_pct}%"
        ),
    }
    if rng.random() < 0.15:
        # store the parsed value directly instead of relying on the parser
        record["verbalized_confidence"] = conf_pct / 100.0
    if labeled:
        p_correct = 0.25 + 0.55 * (conf_pct / 100.0) - 0.08 * n_hedge + 0.03 * n_verify
        correct = rng.random() < max(0.05, min(0.97, p_correct))
        record["correct"] = correct
        samples = []
        for _ in range(5):
            if rng.random() < (0.85 if correct else 0.45):
                samples.append(answer)
            else:
                samples.append(rng.choice(LETTERS))
        record["sampled_answers"] = samples
    return record


def drop_confidence(record):
    record = dict(record)
    record["response_text"] = record["response_text"].split("\nConfidence:")[0]
    record.pop("verbalized_confidence", None)
    return record


def write_corpora(rng):
    os.makedirs(ROOT, exist_ok=True)

    calibration = []
    for i in range(90):
        record = make_record(rng, i, DATASETS[i % 3], labeled=False)
        record["id"] = f"cal-{i:04d}"
        if i < 10:
            # zero-hedge traces so the deployment gate has calibration support
            record["trace_text"] = build_trace(rng, 0, rng.choice([0, 1, 2]), rng.randint(6, 10))
        calibration.append(record)
    with open(os.path.join(ROOT, "calibration.jsonl"), "w") as f:
        for record in calibration:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    evaluation = []
    idx = 0
    for dataset in DATASETS:
        for _ in range(50):
            record = make_record(rng, idx, dataset, labeled=True)
            idx += 1
            evaluation.append(record)
    for k in rng.sample(range(len(evaluation)), 6):
        evaluation[k] = drop_confidence(evaluation[k])
    with open(os.path.join(ROOT, "eval.jsonl"), "w") as f:
        for record in evaluation:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def write_manual_dictionary():
    dictionary = {
        "model": "gpt-oss-20b",
        "hedge": sorted(["maybe", "perhaps", "not sure", "i doubt", "unsure"]),
        "verify": sorted(["check", "verify", "let me check", "substitute back", "double-check"]),
        "tau_verify": 0.14,
        "tau_hedge": 0.20,
        "min_trace_fraction": 0.1,
        "seed_subset": 10,
        "provenance": {
            "encoder": "manual",
            "calibration_corpus_hash": "",
            "build_timestamp": "2026-01-01T00:00:00Z",
            "pruning_log": {"hedge": [], "verify": []},
        },
    }
    with open(os.path.join(ROOT, "dict_manual.json"), "w") as f:
        json.dump(dictionary, f, indent=2, sort_keys=True)
        f.write("\n")


def main():
    rng = random.Random(20260809)
    write_seed_runs(rng)
    write_corpora(rng)
    write_manual_dictionary()
    print(f"fixtures written under {os.path.normpath(ROOT)}")


if __name__ == "__main__":
    main()
